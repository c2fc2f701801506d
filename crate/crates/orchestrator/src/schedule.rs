//! Expanding learned actions into an executable plan.
//!
//! Each action becomes a pick-style step (from its trigger) followed by one
//! place-style step per positive effect. The pick step is gated on the
//! action's preconditions and verified by its trigger relation; the place
//! step is gated on the trigger (the grip must still hold) and verified by
//! its effect relation. Grounding is class-level throughout: track IDs from
//! demonstration time do not survive into execution.

use serde::{Deserialize, Serialize};

use sceneplan_core::action::{GroundedAction, Triplet};

use crate::skills::SkillMap;

/// A relation triplet grounded by class only.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassTriplet {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl From<&Triplet> for ClassTriplet {
    fn from(t: &Triplet) -> Self {
        ClassTriplet {
            subject: t.subject.class.clone(),
            predicate: t.predicate.clone(),
            object: t.object.class.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Pick,
    Place,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    /// Mapped policy, or None for an unmapped placeholder.
    pub policy: Option<String>,
    pub kind: StepKind,
    /// Relations that must be committed before executing.
    pub preconditions: Vec<ClassTriplet>,
    /// Relations that must be committed afterwards.
    pub verify: Vec<ClassTriplet>,
    pub max_retries: u32,
    /// Index of the source action in the schedule.
    pub action_index: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecutionPlan {
    pub steps: Vec<PlanStep>,
}

impl ExecutionPlan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn action_count(&self) -> usize {
        self.steps.last().map(|s| s.action_index + 1).unwrap_or(0)
    }
}

/// Expands time-ordered, deduplicated actions into a plan. Unmapped actions
/// (or unmapped individual effects) become placeholder steps rather than
/// errors; the report surfaces them.
pub fn build_schedule(
    actions: &[GroundedAction],
    skills: &SkillMap,
    max_retries: u32,
) -> ExecutionPlan {
    let mut steps = Vec::new();
    for (action_index, action) in actions.iter().enumerate() {
        let trigger = ClassTriplet::from(&action.trigger);
        let pick_policy = skills.trigger_policy(&action.trigger.predicate, &trigger.object);
        let Some(pick_policy) = pick_policy else {
            steps.push(PlanStep {
                policy: None,
                kind: StepKind::Pick,
                preconditions: action.preconditions.iter().map(ClassTriplet::from).collect(),
                verify: vec![trigger],
                max_retries,
                action_index,
            });
            continue;
        };
        steps.push(PlanStep {
            policy: Some(pick_policy.to_string()),
            kind: StepKind::Pick,
            preconditions: action.preconditions.iter().map(ClassTriplet::from).collect(),
            verify: vec![trigger.clone()],
            max_retries,
            action_index,
        });
        for effect in &action.effects {
            let class_effect = ClassTriplet::from(effect);
            let place_policy = skills.effect_policy(&effect.predicate, &class_effect.object);
            steps.push(PlanStep {
                policy: place_policy.map(str::to_string),
                kind: StepKind::Place,
                preconditions: vec![trigger.clone()],
                verify: vec![class_effect],
                max_retries,
                action_index,
            });
        }
    }
    ExecutionPlan { steps }
}
