//! The simulated tabletop: a plate in the middle, cutlery in a loading area
//! along the top edge, and a gripper rendered as a hand-class detection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use sceneplan_core::frame::{Detection, Frame};
use sceneplan_core::geometry::BBox;
use sceneplan_core::Timestamp;

/// The three placement goals of the scenario, keyed by the spatial predicate
/// they should produce relative to the plate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialGoal {
    LeftOf,
    RightOf,
    Inside,
}

impl SpatialGoal {
    pub const ALL: [SpatialGoal; 3] = [SpatialGoal::LeftOf, SpatialGoal::RightOf, SpatialGoal::Inside];

    pub fn predicate(self) -> &'static str {
        match self {
            SpatialGoal::LeftOf => "left_of",
            SpatialGoal::RightOf => "right_of",
            SpatialGoal::Inside => "inside",
        }
    }

    pub fn from_predicate(predicate: &str) -> Option<Self> {
        match predicate {
            "left_of" => Some(SpatialGoal::LeftOf),
            "right_of" => Some(SpatialGoal::RightOf),
            "inside" => Some(SpatialGoal::Inside),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Entity {
    pub name: String,
    pub class: String,
    pub bbox: BBox,
    /// Name of the hand entity currently carrying this one, if any; a held
    /// entity's box tracks the holder every frame.
    #[serde(default)]
    pub held_by: Option<String>,
    /// Fixed entities (the plate) never move.
    #[serde(default)]
    pub fixed: bool,
}

/// World state: entities by name plus the frame counter. The counter is the
/// timestamp source for every rendered frame and persists across policy
/// executions, so downstream graphs always see strictly increasing times.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WorldState {
    pub entities: BTreeMap<String, Entity>,
    /// Name of the gripper entity.
    pub hand: String,
    pub frame_counter: Timestamp,
}

impl WorldState {
    /// The default scenario layout: plate centered, knife/fork/spoon in a
    /// loading row along the top edge, gripper parked bottom-right.
    pub fn default_scenario() -> Self {
        let mut entities = BTreeMap::new();
        let mut add = |name: &str, class: &str, cx: f64, cy: f64, w: f64, h: f64, fixed: bool| {
            entities.insert(
                name.to_string(),
                Entity {
                    name: name.to_string(),
                    class: class.to_string(),
                    bbox: BBox::centered(cx, cy, w, h),
                    held_by: None,
                    fixed,
                },
            );
        };
        add("plate", "plate", 0.50, 0.55, 0.24, 0.24, true);
        add("knife", "knife", 0.20, 0.15, 0.10, 0.24, false);
        add("fork", "fork", 0.50, 0.15, 0.10, 0.22, false);
        add("spoon", "spoon", 0.80, 0.15, 0.10, 0.20, false);
        add("hand", "hand", 0.88, 0.88, 0.14, 0.14, false);
        WorldState { entities, hand: "hand".to_string(), frame_counter: 0 }
    }

    pub fn plate_center(&self) -> (f64, f64) {
        self.entities
            .values()
            .find(|e| e.fixed)
            .map(|e| e.bbox.centroid())
            .unwrap_or((0.5, 0.55))
    }

    /// Placement slot for an entity in a zone. Entities get small per-entity
    /// offsets along the non-dominant axis so several objects can share a
    /// zone without stacking.
    pub fn zone_slot(&self, goal: SpatialGoal, entity_name: &str) -> (f64, f64) {
        let (px, py) = self.plate_center();
        let index = self
            .entities
            .values()
            .filter(|e| !e.fixed && e.name != self.hand)
            .position(|e| e.name == entity_name)
            .unwrap_or(0);
        let offset = (index as f64 - 1.0) * 0.06;
        match goal {
            SpatialGoal::LeftOf => (px - 0.28, py + offset),
            SpatialGoal::RightOf => (px + 0.28, py + offset),
            SpatialGoal::Inside => (px + offset, py),
        }
    }

    /// Which zone an entity currently occupies, by the same sector geometry
    /// the relation derivation uses. None while in the loading area (above
    /// the plate) or held.
    pub fn zone_of(&self, entity_name: &str) -> Option<SpatialGoal> {
        let entity = self.entities.get(entity_name)?;
        if entity.held_by.is_some() {
            return None;
        }
        let plate = self.entities.values().find(|e| e.fixed)?;
        let (cx, cy) = entity.bbox.centroid();
        if plate.bbox.contains_point(cx, cy) {
            return Some(SpatialGoal::Inside);
        }
        let (px, py) = plate.bbox.centroid();
        let (dx, dy) = (cx - px, cy - py);
        if dx.abs() >= dy.abs() {
            Some(if dx < 0.0 { SpatialGoal::LeftOf } else { SpatialGoal::RightOf })
        } else {
            None // above or below: not a placement zone
        }
    }

    /// Moves an entity's center, dragging everything it holds.
    pub fn move_entity_to(&mut self, name: &str, cx: f64, cy: f64) {
        if let Some(entity) = self.entities.get_mut(name) {
            entity.bbox = entity.bbox.with_center(cx, cy);
        }
        self.sync_held();
    }

    /// Re-centers every held entity on its holder.
    pub fn sync_held(&mut self) {
        let holders: Vec<(String, (f64, f64))> = self
            .entities
            .values()
            .filter_map(|e| {
                e.held_by.as_ref().map(|h| {
                    let center = self.entities.get(h).map(|holder| holder.bbox.centroid());
                    (e.name.clone(), center.unwrap_or_else(|| e.bbox.centroid()))
                })
            })
            .collect();
        for (name, (cx, cy)) in holders {
            if let Some(entity) = self.entities.get_mut(&name) {
                entity.bbox = entity.bbox.with_center(cx, cy);
            }
        }
    }

    /// Renders the world as one detection frame and advances the counter.
    pub fn render(&mut self) -> Frame {
        let t = self.frame_counter;
        self.frame_counter += 1;
        let detections = self
            .entities
            .values()
            .map(|e| Detection::new(e.bbox, e.class.clone(), 1.0))
            .collect();
        Frame::new(t, detections)
    }

    /// Renders without advancing time (for inspection).
    pub fn snapshot(&self) -> Vec<(String, BBox, Option<String>)> {
        self.entities
            .values()
            .map(|e| (e.name.clone(), e.bbox, e.held_by.clone()))
            .collect()
    }
}
