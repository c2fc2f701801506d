//! Action model extraction from the continuous scene graph.
//!
//! A transitional state is a functional relation (an agent acting on an
//! object) that leads to a change of the object's topological relations. For
//! every functional relation `⟨s, p, o⟩` committed at time `k`, the
//! preconditions are the topological states with subject `o` committed
//! anywhere in `[k - w, k]` and the effects are those committed in
//! `[k, k + w]` that are not preconditions, where `w` is the look-around
//! window. An action is emitted when both sets are nonempty; preconditions
//! absent from the effects are added as negated effects.
//!
//! Grounded actions deduplicate by their lifted signature and lift into
//! class-typed schemas ready for domain emission.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csg::{ContinuousSceneGraph, CsgError};
use crate::layer::Layer;
use crate::{Timestamp, TrackId};

/// A grounded entity reference: track identity plus its class label.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Entity {
    pub id: TrackId,
    pub class: String,
}

/// A grounded relation triplet.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triplet {
    pub subject: Entity,
    pub predicate: String,
    pub object: Entity,
}

impl Triplet {
    pub fn new(subject: Entity, predicate: impl Into<String>, object: Entity) -> Self {
        Triplet { subject, predicate: predicate.into(), object }
    }
}

/// One extracted action instance: the functional trigger, the topological
/// preconditions, and the positive/negative effects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundedAction {
    pub trigger: Triplet,
    pub trigger_time: Timestamp,
    pub preconditions: BTreeSet<Triplet>,
    pub effects: BTreeSet<Triplet>,
    pub negative_effects: BTreeSet<Triplet>,
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("window [{from}, {to}] around {at} not covered by graph history {available}")]
    InsufficientHistory { at: Timestamp, from: Timestamp, to: Timestamp, available: String },
    #[error(transparent)]
    Graph(#[from] CsgError),
}

fn entity(graph: &ContinuousSceneGraph, id: TrackId) -> Entity {
    let class = graph.node(id).map(|n| n.class_label.clone()).unwrap_or_default();
    Entity { id, class }
}

/// Runs the extraction rule at a single timestamp `k` with window `window`.
///
/// The graph history must cover `[k - window, k + window]`; streaming use is
/// therefore delayed by `window` frames.
pub fn extract_actions(
    graph: &ContinuousSceneGraph,
    k: Timestamp,
    window: u32,
) -> Result<Vec<GroundedAction>, ExtractError> {
    let w = window as Timestamp;
    let (first, last) = graph.available_range().ok_or(CsgError::Empty)?;
    if k < first.saturating_add(w) || k.saturating_add(w) > last || k > last {
        return Err(ExtractError::InsufficientHistory {
            at: k,
            from: k.saturating_sub(w),
            to: k.saturating_add(w),
            available: format!("[{first}, {last}]"),
        });
    }

    let mut actions = Vec::new();
    for (subject, object, pred) in graph.relations_at_ids(Layer::Functional, k)? {
        let pre = graph.subject_states_in_range(Layer::Topological, object, k - w, k)?;
        let post = graph.subject_states_in_range(Layer::Topological, object, k, k + w)?;
        let effects: BTreeSet<_> = post.difference(&pre).copied().collect();
        if pre.is_empty() || effects.is_empty() || effects == pre {
            continue;
        }
        // Preconditions that do not survive into the effects are negated.
        let negative: BTreeSet<_> = pre.difference(&effects).copied().collect();

        let to_triplets = |set: &BTreeSet<(crate::csg::PredId, TrackId)>| {
            set.iter()
                .map(|&(p, target)| {
                    Triplet::new(
                        entity(graph, object),
                        graph.resolve(p),
                        entity(graph, target),
                    )
                })
                .collect::<BTreeSet<_>>()
        };

        actions.push(GroundedAction {
            trigger: Triplet::new(entity(graph, subject), graph.resolve(pred), entity(graph, object)),
            trigger_time: k,
            preconditions: to_triplets(&pre),
            effects: to_triplets(&effects),
            negative_effects: to_triplets(&negative),
        });
    }
    Ok(actions)
}

/// Batch extraction: the rule applied at every ingested timestamp whose
/// window is covered, deduplicated.
pub fn extract_all(graph: &ContinuousSceneGraph, window: u32) -> Vec<GroundedAction> {
    let mut raw = Vec::new();
    let Some((first, last)) = graph.available_range() else {
        return raw;
    };
    let w = window as Timestamp;
    for &k in graph.ingested_times() {
        if k < first.saturating_add(w) || k.saturating_add(w) > last {
            continue;
        }
        if let Ok(mut found) = extract_actions(graph, k, window) {
            raw.append(&mut found);
        }
    }
    dedup(raw)
}

/// Incremental extractor for stream processing: emission is delayed by
/// `window` frames so the look-ahead half of the window is always covered.
#[derive(Clone, Debug)]
pub struct StreamingExtractor {
    window: u32,
    emitted: Vec<GroundedAction>,
    signatures: BTreeSet<String>,
    last_evaluated: Option<Timestamp>,
}

impl StreamingExtractor {
    pub fn new(window: u32) -> Self {
        StreamingExtractor {
            window,
            emitted: Vec::new(),
            signatures: BTreeSet::new(),
            last_evaluated: None,
        }
    }

    /// Call after every graph update; evaluates every ingested trigger
    /// timestamp whose look-ahead window just gained full coverage.
    pub fn on_update(&mut self, graph: &ContinuousSceneGraph) -> Result<(), ExtractError> {
        let Some((first, last)) = graph.available_range() else {
            return Ok(());
        };
        let w = self.window as Timestamp;
        let times = graph.ingested_times();
        let start = match self.last_evaluated {
            Some(t) => times.partition_point(|&x| x <= t),
            None => 0,
        };
        for &k in &times[start..] {
            if k.saturating_add(w) > last {
                break;
            }
            if k >= first.saturating_add(w) {
                for action in extract_actions(graph, k, self.window)? {
                    let sig = lifted_signature(&action);
                    if self.signatures.insert(sig) {
                        self.emitted.push(action);
                    }
                }
            }
            self.last_evaluated = Some(k);
        }
        Ok(())
    }

    pub fn actions(&self) -> &[GroundedAction] {
        &self.emitted
    }

    pub fn into_actions(self) -> Vec<GroundedAction> {
        self.emitted
    }
}

/// Collapses actions with identical lifted signatures, keeping the earliest
/// trigger time; first-occurrence order is preserved.
pub fn dedup(actions: Vec<GroundedAction>) -> Vec<GroundedAction> {
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut out: Vec<GroundedAction> = Vec::new();
    for action in actions {
        let sig = lifted_signature(&action);
        if seen.insert(sig) {
            out.push(action);
        }
    }
    out
}

/// A typed schema variable, `?<class><index>`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub type_name: String,
}

/// A predicate applied to schema variables.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<String>) -> Self {
        Atom { predicate: predicate.into(), args }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Effect {
    Add(Atom),
    Del(Atom),
}

/// A class-typed action schema.
///
/// The grounded trigger becomes an extra precondition atom and its negation
/// an extra effect atom: the agent's grip is required before the action and
/// released by it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LiftedAction {
    pub name: String,
    pub parameters: Vec<Variable>,
    pub preconditions: Vec<Atom>,
    pub effects: Vec<Effect>,
}

struct VariableTable {
    by_id: Vec<(TrackId, String)>,
    per_class: std::collections::BTreeMap<String, u32>,
    parameters: Vec<Variable>,
}

impl VariableTable {
    fn new() -> Self {
        VariableTable { by_id: Vec::new(), per_class: Default::default(), parameters: Vec::new() }
    }

    fn variable(&mut self, e: &Entity) -> String {
        if let Some((_, name)) = self.by_id.iter().find(|(id, _)| *id == e.id) {
            return name.clone();
        }
        let index = self.per_class.entry(e.class.clone()).or_insert(0);
        let name = format!("?{}{}", e.class, *index);
        *index += 1;
        self.by_id.push((e.id, name.clone()));
        self.parameters.push(Variable { name: name.clone(), type_name: e.class.clone() });
        name
    }
}

/// Lifts a grounded action to its schema: each distinct track becomes a
/// class-typed variable, indexed per class by first appearance (trigger
/// subject, trigger object, then preconditions, then effects).
pub fn lift(action: &GroundedAction) -> LiftedAction {
    let mut vars = VariableTable::new();
    let atom = |t: &Triplet, vars: &mut VariableTable| {
        let s = vars.variable(&t.subject);
        let o = vars.variable(&t.object);
        Atom::new(t.predicate.clone(), vec![s, o])
    };

    let trigger_atom = atom(&action.trigger, &mut vars);
    let mut preconditions: Vec<Atom> =
        action.preconditions.iter().map(|t| atom(t, &mut vars)).collect();
    let mut effects: Vec<Effect> =
        action.effects.iter().map(|t| Effect::Add(atom(t, &mut vars))).collect();
    effects.extend(action.negative_effects.iter().map(|t| Effect::Del(atom(t, &mut vars))));
    preconditions.push(trigger_atom.clone());
    effects.push(Effect::Del(trigger_atom));

    LiftedAction {
        name: format!("{}_{}", action.trigger.predicate, action.trigger.object.class),
        parameters: vars.parameters,
        preconditions,
        effects,
    }
}

/// Canonical dedup key: the lifted schema minus its name.
pub fn lifted_signature(action: &GroundedAction) -> String {
    let lifted = lift(action);
    format!("{:?}|{:?}|{:?}", lifted.parameters, lifted.preconditions, lifted.effects)
}
