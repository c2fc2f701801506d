//! Named policies over the simulated world.
//!
//! A policy streams exactly `duration` frames: a travel phase followed by a
//! short stationary settle phase. Success is a single Bernoulli draw at
//! execute time; picks grasp at the start of the settle phase (the hand
//! approaches a standoff pose just below the object and snaps onto it only
//! when the grasp succeeds), places release at the start of the settle phase
//! and withdraw the hand so the placed object is observable on its own.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use rand::Rng;

use sceneplan_core::frame::Frame;

use crate::world::{SpatialGoal, WorldState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Approach and grasp the first entity of the class.
    Pick(String),
    /// Carry the held entity to a placement zone and release it.
    Place(SpatialGoal),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureMode {
    /// The manipulated object ends where it started (a timeout).
    NoOp,
    /// The object lands at a uniformly random free spot (a botched grasp or
    /// misplace).
    DropRandom,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolicySpec {
    pub name: String,
    pub kind: PolicyKind,
    pub success_probability: f64,
    /// Total frames streamed per execution, settle phase included.
    pub duration: u32,
    pub failure_mode: FailureMode,
}

impl PolicySpec {
    pub fn pick(name: &str, class: &str, p: f64) -> Self {
        PolicySpec {
            name: name.into(),
            kind: PolicyKind::Pick(class.into()),
            success_probability: p,
            duration: 30,
            failure_mode: FailureMode::NoOp,
        }
    }

    pub fn place(name: &str, goal: SpatialGoal, p: f64) -> Self {
        PolicySpec {
            name: name.into(),
            kind: PolicyKind::Place(goal),
            success_probability: p,
            duration: 30,
            failure_mode: FailureMode::NoOp,
        }
    }
}

/// The six policies of the tabletop scenario with their measured success
/// rates.
pub fn default_policies() -> Vec<PolicySpec> {
    vec![
        PolicySpec::pick("pick_knife", "knife", 0.8),
        PolicySpec::pick("pick_fork", "fork", 0.6),
        PolicySpec::pick("pick_spoon", "spoon", 0.7),
        PolicySpec::place("place_left", SpatialGoal::LeftOf, 1.0),
        PolicySpec::place("place_right", SpatialGoal::RightOf, 1.0),
        PolicySpec::place("place_inside", SpatialGoal::Inside, 1.0),
    ]
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("unknown policy {0:?}")]
    Unknown(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum PlanKind {
    /// Travel to the standoff pose; grasp `target` on success at settle.
    Pick,
    /// Carry the held object to the slot; release on success at settle.
    Place,
}

/// One policy execution in progress: the pre-drawn outcome plus the
/// waypoints. `step` advances the world one frame at a time.
#[derive(Clone, Debug)]
pub struct ActiveExecution {
    pub request_id: u64,
    drawn_success: bool,
    feasible: bool,
    failure_frame: u32,
    failure_mode: FailureMode,
    kind: PlanKind,
    target: Option<String>,
    start: (f64, f64),
    goal: (f64, f64),
    /// Pose to return to when a no-op failure rewinds the motion.
    home: (f64, f64),
    travel: u32,
    duration: u32,
    frame_idx: u32,
}

impl ActiveExecution {
    /// Plans an execution against the current world; draws the Bernoulli
    /// outcome and (for failures) the failure frame.
    pub fn begin<R: Rng>(
        spec: &PolicySpec,
        world: &WorldState,
        settle_frames: u32,
        request_id: u64,
        rng: &mut R,
    ) -> ActiveExecution {
        let drawn_success = rng.gen_bool(spec.success_probability.clamp(0.0, 1.0));
        let duration = spec.duration.max(2);
        let travel = duration.saturating_sub(settle_frames.min(duration / 2)).max(1);
        let failure_frame = rng.gen_range(0..travel);
        let hand = world.entities[&world.hand].bbox.centroid();

        let (kind, target, goal, feasible) = match &spec.kind {
            PolicyKind::Pick(class) => {
                let target = world
                    .entities
                    .values()
                    .find(|e| &e.class == class && e.name != world.hand)
                    .map(|e| e.name.clone());
                match target {
                    Some(name) => {
                        let entity = &world.entities[&name];
                        // Standoff just below the object: close, not
                        // overlapping, so a grasp is observable only when it
                        // happens.
                        let (cx, cy) = entity.bbox.centroid();
                        let hand_h = world.entities[&world.hand].bbox.height();
                        let standoff =
                            (cx, (cy + entity.bbox.height() / 2.0 + hand_h / 2.0 + 0.015).min(0.92));
                        (PlanKind::Pick, Some(name), standoff, true)
                    }
                    None => (PlanKind::Pick, None, hand, false),
                }
            }
            PolicyKind::Place(zone) => {
                let held = world
                    .entities
                    .values()
                    .find(|e| e.held_by.as_deref() == Some(world.hand.as_str()))
                    .map(|e| e.name.clone());
                match held {
                    Some(name) => {
                        let slot = world.zone_slot(*zone, &name);
                        (PlanKind::Place, Some(name), slot, true)
                    }
                    None => {
                        let slot = world.zone_slot(*zone, "");
                        (PlanKind::Place, None, slot, false)
                    }
                }
            }
        };

        ActiveExecution {
            request_id,
            drawn_success,
            feasible,
            failure_frame,
            failure_mode: spec.failure_mode,
            kind,
            target,
            start: hand,
            goal,
            home: (0.88, 0.88),
            travel,
            duration,
            frame_idx: 0,
        }
    }

    pub fn succeeded(&self) -> bool {
        self.drawn_success && self.feasible
    }

    fn lerp(a: (f64, f64), b: (f64, f64), f: f64) -> (f64, f64) {
        (a.0 + (b.0 - a.0) * f, a.1 + (b.1 - a.1) * f)
    }

    /// Advances one frame and renders it; `None` once the execution is over.
    pub fn step<R: Rng>(&mut self, world: &mut WorldState, rng: &mut R) -> Option<Frame> {
        if self.frame_idx >= self.duration {
            return None;
        }
        let i = self.frame_idx;
        self.frame_idx += 1;
        let failing = !self.succeeded();
        let hand = world.hand.clone();

        if i < self.travel {
            let f = (i + 1) as f64 / self.travel as f64;
            if failing && self.failure_mode == FailureMode::NoOp && self.kind == PlanKind::Place {
                // Rewind: carry back to the start over the remaining frames.
                if i >= self.failure_frame {
                    let total_back = (self.duration - self.failure_frame).max(1);
                    let fb = (i - self.failure_frame + 1) as f64 / total_back as f64;
                    let turn = Self::lerp(self.start, self.goal, self.failure_frame as f64 / self.travel as f64);
                    let (cx, cy) = Self::lerp(turn, self.start, fb);
                    world.move_entity_to(&hand, cx, cy);
                } else {
                    let (cx, cy) = Self::lerp(self.start, self.goal, f);
                    world.move_entity_to(&hand, cx, cy);
                }
            } else {
                let (cx, cy) = Self::lerp(self.start, self.goal, f);
                world.move_entity_to(&hand, cx, cy);
            }
            if failing && self.failure_mode == FailureMode::DropRandom && i == self.failure_frame {
                if let Some(target) = &self.target {
                    let (cx, cy) = (rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9));
                    if let Some(e) = world.entities.get_mut(target) {
                        e.held_by = None;
                    }
                    world.move_entity_to(target, cx, cy);
                }
            }
        } else {
            // Settle phase.
            let settle_idx = i - self.travel;
            let settle_len = self.duration - self.travel;
            match self.kind {
                PlanKind::Pick => {
                    // On success the grasp happens at the start of the
                    // settle phase, then holds still so the grip is
                    // observable; a failed grasp hovers at the standoff.
                    if self.succeeded() && settle_idx == 0 {
                        if let Some(target) = &self.target {
                            let center = world.entities[target].bbox.centroid();
                            world.move_entity_to(&hand, center.0, center.1);
                            if let Some(e) = world.entities.get_mut(target) {
                                e.held_by = Some(hand.clone());
                            }
                            world.sync_held();
                        }
                    }
                }
                PlanKind::Place => {
                    if self.succeeded() {
                        if settle_idx == 0 {
                            if let Some(target) = &self.target {
                                if let Some(e) = world.entities.get_mut(target) {
                                    e.held_by = None;
                                }
                                world.move_entity_to(target, self.goal.0, self.goal.1);
                            }
                        }
                        // Withdraw so the placed object is observed unheld.
                        let f = (settle_idx + 1) as f64 / settle_len as f64;
                        let (cx, cy) = Self::lerp(self.goal, self.home, f * 0.8);
                        world.move_entity_to(&hand, cx, cy);
                    } else if self.failure_mode == FailureMode::NoOp {
                        // Finish the rewind back at the start pose.
                        let total_back = (self.duration - self.failure_frame).max(1);
                        let fb = (i - self.failure_frame + 1) as f64 / total_back as f64;
                        let turn = Self::lerp(
                            self.start,
                            self.goal,
                            self.failure_frame as f64 / self.travel as f64,
                        );
                        let (cx, cy) = Self::lerp(turn, self.start, fb.min(1.0));
                        world.move_entity_to(&hand, cx, cy);
                    }
                }
            }
        }
        Some(world.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn run_policy(
        spec: &PolicySpec,
        world: &mut WorldState,
        rng: &mut ChaCha8Rng,
    ) -> (Vec<Frame>, bool) {
        let mut exec = ActiveExecution::begin(spec, world, 6, 1, rng);
        let mut frames = Vec::new();
        while let Some(frame) = exec.step(world, rng) {
            frames.push(frame);
        }
        (frames, exec.succeeded())
    }

    #[test]
    fn successful_pick_ends_with_coincident_boxes() {
        let mut world = WorldState::default_scenario();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = PolicySpec::pick("pick_knife", "knife", 1.0);
        let (frames, success) = run_policy(&spec, &mut world, &mut rng);
        assert!(success);
        assert_eq!(frames.len(), 30);
        let knife = world.entities["knife"].bbox.centroid();
        let hand = world.entities["hand"].bbox.centroid();
        assert!((knife.0 - hand.0).abs() < 1e-9 && (knife.1 - hand.1).abs() < 1e-9);
        assert_eq!(world.entities["knife"].held_by.as_deref(), Some("hand"));
    }

    #[test]
    fn travel_interpolates_linearly() {
        let mut world = WorldState::default_scenario();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = PolicySpec::pick("pick_knife", "knife", 1.0);
        let mut exec = ActiveExecution::begin(&spec, &*world, 6, 1, &mut rng);
        let start = world.entities["hand"].bbox.centroid();
        let travel = exec.travel;
        for _ in 0..travel / 2 {
            exec.step(&mut world, &mut rng);
        }
        let mid = world.entities["hand"].bbox.centroid();
        let expected = ActiveExecution::lerp(start, exec.goal, (travel / 2) as f64 / travel as f64);
        assert!((mid.0 - expected.0).abs() < 1e-9 && (mid.1 - expected.1).abs() < 1e-9);
    }

    #[test]
    fn failed_pick_never_touches_the_object() {
        let mut world = WorldState::default_scenario();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = PolicySpec::pick("pick_fork", "fork", 0.0);
        let (_, success) = run_policy(&spec, &mut world, &mut rng);
        assert!(!success);
        assert_eq!(world.entities["fork"].held_by, None);
        let fork = world.entities["fork"].bbox.centroid();
        assert!((fork.0 - 0.50).abs() < 1e-9, "fork must not move");
    }

    #[test]
    fn place_releases_into_the_zone_and_withdraws() {
        let mut world = WorldState::default_scenario();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        run_policy(&PolicySpec::pick("pick_knife", "knife", 1.0), &mut world, &mut rng);
        let (frames, success) =
            run_policy(&PolicySpec::place("place_left", SpatialGoal::LeftOf, 1.0), &mut world, &mut rng);
        assert!(success);
        assert_eq!(frames.len(), 30);
        assert_eq!(world.entities["knife"].held_by, None);
        assert_eq!(world.zone_of("knife"), Some(SpatialGoal::LeftOf));
        // The hand has withdrawn: no overlap with the placed knife.
        let hand = &world.entities["hand"].bbox;
        let knife = &world.entities["knife"].bbox;
        assert_eq!(hand.intersection_area(knife), 0.0);
    }

    #[test]
    fn place_with_empty_hand_is_infeasible() {
        let mut world = WorldState::default_scenario();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (frames, success) =
            run_policy(&PolicySpec::place("place_left", SpatialGoal::LeftOf, 1.0), &mut world, &mut rng);
        assert!(!success);
        assert_eq!(frames.len(), 30);
        assert_eq!(world.zone_of("knife"), None);
    }

    #[test]
    fn noop_place_failure_leaves_the_object_at_its_origin() {
        let mut world = WorldState::default_scenario();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        run_policy(&PolicySpec::pick("pick_knife", "knife", 1.0), &mut world, &mut rng);
        let before = world.entities["knife"].bbox.centroid();
        let (_, success) =
            run_policy(&PolicySpec::place("place_left", SpatialGoal::LeftOf, 0.0), &mut world, &mut rng);
        assert!(!success);
        let after = world.entities["knife"].bbox.centroid();
        assert!((before.0 - after.0).abs() < 1e-6 && (before.1 - after.1).abs() < 1e-6);
        // Still held: the grasp itself did not fail.
        assert_eq!(world.entities["knife"].held_by.as_deref(), Some("hand"));
    }

    #[test]
    fn drop_random_scatters_the_object() {
        let mut world = WorldState::default_scenario();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        run_policy(&PolicySpec::pick("pick_knife", "knife", 1.0), &mut world, &mut rng);
        let mut spec = PolicySpec::place("place_left", SpatialGoal::LeftOf, 0.0);
        spec.failure_mode = FailureMode::DropRandom;
        let (_, success) = run_policy(&spec, &mut world, &mut rng);
        assert!(!success);
        assert_eq!(world.entities["knife"].held_by, None);
    }

    #[test]
    fn same_seed_reproduces_identical_frames() {
        let run = || {
            let mut world = WorldState::default_scenario();
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let (a, _) = run_policy(&PolicySpec::pick("pick_fork", "fork", 0.7), &mut world, &mut rng);
            let (b, _) =
                run_policy(&PolicySpec::place("place_inside", SpatialGoal::Inside, 1.0), &mut world, &mut rng);
            (a, b)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn bernoulli_rate_matches_the_configured_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xACC);
        let spec = PolicySpec::pick("pick_knife", "knife", 0.8);
        let mut successes = 0u32;
        let trials = 10_000;
        for _ in 0..trials {
            let world = WorldState::default_scenario();
            let exec = ActiveExecution::begin(&spec, &world, 6, 1, &mut rng);
            if exec.succeeded() {
                successes += 1;
            }
        }
        let rate = successes as f64 / trials as f64;
        assert!((rate - 0.8).abs() < 0.01, "empirical rate {rate}");
    }
}
