//! The continuous scene graph: persistent nodes plus per-pair, per-layer
//! state timelines.
//!
//! Every ordered node pair carries one committed state cell per layer per
//! ingested timestamp (an `n x 4` matrix). Raw observations feed a debounce
//! automaton: a change of state commits only after `refine_window`
//! consecutive identical observations, so single-frame mispredictions never
//! enter the committed history. Each committed relation carries a confidence
//! weight that grows on re-detection and linearly decays while unobserved;
//! relations whose weight falls below the prune threshold are cleared.
//!
//! One writer updates the graph; readers clone snapshots (the structure is
//! plain data) or query `&self` between updates.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BBox;
use crate::layer::{Layer, LayeredRelation, LAYER_COUNT};
use crate::tracker::TrackedDetection;
use crate::{Timestamp, TrackId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapMode {
    /// Weight grows with the re-detection gap: `w + gain * (now - last)`.
    Linear,
    /// Weight grows inversely with the gap: `w + gain / (now - last)` for a
    /// positive gap. Non-default; kept behind this switch for comparison.
    Inverse,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CsgConfig {
    /// Consecutive identical observations required to change a committed
    /// state (the theta window).
    pub refine_window: u32,
    /// Weight gain factor per timestamp of re-detection gap (sigma).
    pub redetection_gain: f64,
    /// Weight decay per unobserved frame (delta).
    pub decay: f64,
    /// Weight below which a committed relation is cleared (omega_min).
    pub prune_threshold: f64,
    /// Ring-buffer cap on retained matrix rows.
    pub history_cap: usize,
    /// Frames after which an unseen node is marked inactive.
    pub inactive_after: u32,
    /// Class labels whose nodes are agents rather than objects.
    pub agent_classes: BTreeSet<String>,
    pub gap_mode: GapMode,
}

impl Default for CsgConfig {
    fn default() -> Self {
        CsgConfig {
            refine_window: 3,
            redetection_gain: 0.5,
            decay: 0.02,
            prune_threshold: 0.05,
            history_cap: 100_000,
            inactive_after: 10,
            agent_classes: ["person", "hand"].iter().map(|s| s.to_string()).collect(),
            gap_mode: GapMode::Linear,
        }
    }
}

#[derive(Debug, Error)]
pub enum CsgError {
    #[error("update timestamp {given} not greater than current {current}")]
    NonMonotonicUpdate { current: Timestamp, given: Timestamp },
    #[error("re-detection timestamp {current} earlier than last detection {last}")]
    NegativeGap { current: Timestamp, last: Timestamp },
    #[error("timestamp {requested} outside retained history [{first}, {last}]")]
    OutsideHistory { requested: Timestamp, first: Timestamp, last: Timestamp },
    #[error("graph has no ingested frames")]
    Empty,
}

/// Confidence update on re-detection, exactly `prev + gain * (now - last)`.
///
/// `now` must not precede `last`; a same-timestamp re-detection adds nothing.
pub fn update_weight(
    prev: f64,
    now: Timestamp,
    last: Timestamp,
    gain: f64,
) -> Result<f64, CsgError> {
    if now < last {
        return Err(CsgError::NegativeGap { current: now, last });
    }
    Ok(prev + gain * (now - last) as f64)
}

/// Debounce automaton for one pair/layer state cell.
///
/// The first-ever observation commits immediately (an empty cell has nothing
/// to protect); afterwards a differing label must be observed `window`
/// consecutive times to replace the committed state. An observation of the
/// committed label resets any pending candidate, and so does a frame without
/// any observation for the cell (`reset_pending`): evidence for a state
/// change must be uninterrupted, otherwise isolated one-frame glitches could
/// accumulate across gaps and commit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StateRefiner<L> {
    committed: Option<L>,
    pending: Option<(L, u32)>,
}

impl<L: Copy + Eq> StateRefiner<L> {
    pub fn new() -> Self {
        StateRefiner { committed: None, pending: None }
    }

    pub fn with_committed(label: L) -> Self {
        StateRefiner { committed: Some(label), pending: None }
    }

    pub fn committed(&self) -> Option<L> {
        self.committed
    }

    pub fn observe(&mut self, label: L, window: u32) {
        match self.committed {
            None => {
                self.committed = Some(label);
                self.pending = None;
            }
            Some(c) if c == label => {
                self.pending = None;
            }
            Some(_) => {
                let count = match self.pending {
                    Some((p, n)) if p == label => n + 1,
                    _ => 1,
                };
                if count >= window.max(1) {
                    self.committed = Some(label);
                    self.pending = None;
                } else {
                    self.pending = Some((label, count));
                }
            }
        }
    }

    pub fn clear(&mut self) {
        self.committed = None;
        self.pending = None;
    }

    /// Drops the pending candidate; call when a frame passes without an
    /// observation for this cell.
    pub fn reset_pending(&mut self) {
        self.pending = None;
    }
}

/// Interned predicate label; resolve through the owning graph.
pub type PredId = u32;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
struct Interner {
    names: Vec<String>,
    #[allow(clippy::type_complexity)]
    index: HashMap<String, PredId>,
}

impl Interner {
    fn intern(&mut self, name: &str) -> PredId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as PredId;
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    fn resolve(&self, id: PredId) -> &str {
        &self.names[id as usize]
    }
}

impl From<Vec<String>> for Interner {
    fn from(names: Vec<String>) -> Self {
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i as PredId)).collect();
        Interner { names, index }
    }
}

impl From<Interner> for Vec<String> {
    fn from(i: Interner) -> Self {
        i.names
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Agent,
    Object,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NodeRecord {
    pub track_id: TrackId,
    pub class_label: String,
    pub bbox: BBox,
    pub confidence: f64,
    pub first_seen: Timestamp,
    pub last_seen: Timestamp,
    pub kind: NodeKind,
    /// False once unseen longer than `inactive_after`; the record itself is
    /// retained as history.
    pub active: bool,
}

type Row = [Option<PredId>; LAYER_COUNT];

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
struct LayerState {
    refiner: StateRefiner<PredId>,
    weight: f64,
    /// Timestamp of the last observation of the committed relation.
    last_seen: Timestamp,
}

/// State timelines of one ordered node pair: the committed matrix (one row
/// per ingested timestamp, one column per layer) plus per-layer refinement
/// and weight state.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairTimeline {
    pub subject: TrackId,
    pub object: TrackId,
    layers: [LayerState; LAYER_COUNT],
    rows: Vec<Row>,
}

impl PairTimeline {
    fn new(subject: TrackId, object: TrackId, backfill: usize) -> Self {
        PairTimeline {
            subject,
            object,
            layers: Default::default(),
            rows: vec![[None; LAYER_COUNT]; backfill],
        }
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Relations whose endpoints were unknown and were skipped.
    pub skipped_relations: u64,
}

/// The live graph. See the module docs for the update/query contract.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContinuousSceneGraph {
    config: CsgConfig,
    nodes: BTreeMap<TrackId, NodeRecord>,
    #[serde(with = "pairs_as_list")]
    pairs: BTreeMap<(TrackId, TrackId), PairTimeline>,
    /// Ingested timestamps, aligned with every pair's rows.
    times: Vec<Timestamp>,
    interner: Interner,
    diagnostics: Diagnostics,
}

/// JSON object keys must be strings; pair timelines serialize as a list and
/// re-key on load.
mod pairs_as_list {
    use super::*;
    use serde::de::Deserializer;
    use serde::ser::Serializer;

    pub fn serialize<S: Serializer>(
        pairs: &BTreeMap<(TrackId, TrackId), PairTimeline>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(pairs.values())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<BTreeMap<(TrackId, TrackId), PairTimeline>, D::Error> {
        let list = Vec::<PairTimeline>::deserialize(deserializer)?;
        Ok(list.into_iter().map(|p| ((p.subject, p.object), p)).collect())
    }
}

impl ContinuousSceneGraph {
    pub fn new(config: CsgConfig) -> Self {
        ContinuousSceneGraph {
            config,
            nodes: BTreeMap::new(),
            pairs: BTreeMap::new(),
            times: Vec::new(),
            interner: Interner::default(),
            diagnostics: Diagnostics::default(),
        }
    }

    pub fn config(&self) -> &CsgConfig {
        &self.config
    }

    pub fn current_timestamp(&self) -> Option<Timestamp> {
        self.times.last().copied()
    }

    /// Retained history range (first, last), if anything was ingested.
    pub fn available_range(&self) -> Option<(Timestamp, Timestamp)> {
        Some((*self.times.first()?, *self.times.last()?))
    }

    /// Timestamps currently retained, in ingestion order.
    pub fn ingested_times(&self) -> &[Timestamp] {
        &self.times
    }

    pub fn node(&self, id: TrackId) -> Option<&NodeRecord> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeRecord> {
        self.nodes.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }

    pub fn resolve(&self, id: PredId) -> &str {
        self.interner.resolve(id)
    }

    /// Current confidence weight of a pair/layer cell, if it has a committed
    /// state.
    pub fn layer_weight(&self, subject: TrackId, object: TrackId, layer: Layer) -> Option<f64> {
        let pair = self.pairs.get(&(subject, object))?;
        let state = &pair.layers[layer.index()];
        state.refiner.committed().map(|_| state.weight)
    }

    /// The committed matrix of one pair as predicate names, one row per
    /// retained timestamp.
    pub fn committed_matrix(
        &self,
        subject: TrackId,
        object: TrackId,
    ) -> Option<Vec<[Option<&str>; LAYER_COUNT]>> {
        let pair = self.pairs.get(&(subject, object))?;
        Some(
            pair.rows
                .iter()
                .map(|row| {
                    let mut out = [None; LAYER_COUNT];
                    for (i, cell) in row.iter().enumerate() {
                        out[i] = cell.map(|p| self.interner.resolve(p));
                    }
                    out
                })
                .collect(),
        )
    }

    pub fn pair_timelines(&self) -> impl Iterator<Item = &PairTimeline> {
        self.pairs.values()
    }

    /// Ingests one frame: upserts nodes, feeds relation observations through
    /// state refinement and weight updates, applies pruning decay, and
    /// appends one committed-matrix row to every pair.
    pub fn update(
        &mut self,
        tracked: &[TrackedDetection],
        relations: &[LayeredRelation],
        t: Timestamp,
    ) -> Result<(), CsgError> {
        if let Some(current) = self.current_timestamp() {
            if t <= current {
                return Err(CsgError::NonMonotonicUpdate { current, given: t });
            }
        }
        let backfill = self.times.len();
        self.times.push(t);

        for det in tracked {
            let d = &det.detection;
            match self.nodes.get_mut(&det.track_id) {
                Some(node) => {
                    node.bbox = d.bbox;
                    node.confidence = d.confidence;
                    node.last_seen = t;
                    node.active = true;
                }
                None => {
                    let kind = if self.config.agent_classes.contains(&d.class_label) {
                        NodeKind::Agent
                    } else {
                        NodeKind::Object
                    };
                    self.nodes.insert(
                        det.track_id,
                        NodeRecord {
                            track_id: det.track_id,
                            class_label: d.class_label.clone(),
                            bbox: d.bbox,
                            confidence: d.confidence,
                            first_seen: t,
                            last_seen: t,
                            kind,
                            active: true,
                        },
                    );
                }
            }
        }

        // Deduplicate same-frame observations per (pair, layer), keeping the
        // most confident.
        let mut observations: BTreeMap<(TrackId, TrackId, usize), (PredId, f64)> = BTreeMap::new();
        for rel in relations {
            if !self.nodes.contains_key(&rel.subject) || !self.nodes.contains_key(&rel.object) {
                self.diagnostics.skipped_relations += 1;
                continue;
            }
            let pred = self.interner.intern(&rel.predicate);
            let key = (rel.subject, rel.object, rel.layer.index());
            let entry = observations.entry(key).or_insert((pred, rel.confidence));
            if rel.confidence > entry.1 {
                *entry = (pred, rel.confidence);
            }
        }

        let mut observed: BTreeSet<(TrackId, TrackId, usize)> = BTreeSet::new();
        for (&(subject, object, layer_idx), &(pred, confidence)) in &observations {
            let pair = self
                .pairs
                .entry((subject, object))
                .or_insert_with(|| PairTimeline::new(subject, object, backfill));
            let state = &mut pair.layers[layer_idx];
            let before = state.refiner.committed();
            state.refiner.observe(pred, self.config.refine_window);
            if state.refiner.committed() == Some(pred) {
                if before == Some(pred) {
                    // Re-detection of the committed relation.
                    state.weight = match self.config.gap_mode {
                        GapMode::Linear => update_weight(
                            state.weight,
                            t,
                            state.last_seen,
                            self.config.redetection_gain,
                        )?,
                        GapMode::Inverse => {
                            let gap = t - state.last_seen;
                            if gap > 0 {
                                state.weight + self.config.redetection_gain / gap as f64
                            } else {
                                state.weight
                            }
                        }
                    };
                } else {
                    // Fresh commit: the detector confidence seeds the weight.
                    state.weight = confidence;
                }
                state.last_seen = t;
            }
            observed.insert((subject, object, layer_idx));
        }

        // Cells that went unobserved this frame: pending candidates reset
        // and committed weights decay.
        for (&(subject, object), pair) in self.pairs.iter_mut() {
            for (layer_idx, state) in pair.layers.iter_mut().enumerate() {
                if observed.contains(&(subject, object, layer_idx)) {
                    continue;
                }
                state.refiner.reset_pending();
                if state.refiner.committed().is_none() {
                    continue;
                }
                // Weights never go negative, so a zero prune threshold keeps
                // relations forever.
                state.weight = (state.weight - self.config.decay).max(0.0);
                if state.weight < self.config.prune_threshold {
                    state.refiner.clear();
                    state.weight = 0.0;
                }
            }
            let row: Row = std::array::from_fn(|i| pair.layers[i].refiner.committed());
            pair.rows.push(row);
        }

        // Ring cap on retained rows.
        if self.times.len() > self.config.history_cap {
            let excess = self.times.len() - self.config.history_cap;
            self.times.drain(..excess);
            for pair in self.pairs.values_mut() {
                pair.rows.drain(..excess.min(pair.rows.len()));
            }
        }

        for node in self.nodes.values_mut() {
            node.active = t - node.last_seen <= self.config.inactive_after as Timestamp;
        }
        Ok(())
    }

    fn row_index_for(&self, t: Timestamp) -> Result<usize, CsgError> {
        let (first, last) = self.available_range().ok_or(CsgError::Empty)?;
        if t < first || t > last {
            return Err(CsgError::OutsideHistory { requested: t, first, last });
        }
        Ok(self.times.partition_point(|&ts| ts <= t) - 1)
    }

    /// The committed relation set of one layer at time `t` (the latest
    /// ingested timestamp not after `t`), as interned predicate IDs.
    pub fn relations_at_ids(
        &self,
        layer: Layer,
        t: Timestamp,
    ) -> Result<Vec<(TrackId, TrackId, PredId)>, CsgError> {
        let idx = self.row_index_for(t)?;
        let li = layer.index();
        let mut out = Vec::new();
        for pair in self.pairs.values() {
            if let Some(Some(pred)) = pair.rows.get(idx).map(|row| row[li]) {
                out.push((pair.subject, pair.object, pred));
            }
        }
        Ok(out)
    }

    /// The committed relation set of one layer at time `t`, with resolved
    /// predicate names.
    pub fn relations_at(
        &self,
        layer: Layer,
        t: Timestamp,
    ) -> Result<BTreeSet<(TrackId, TrackId, String)>, CsgError> {
        Ok(self
            .relations_at_ids(layer, t)?
            .into_iter()
            .map(|(s, o, p)| (s, o, self.interner.resolve(p).to_string()))
            .collect())
    }

    /// Union of the committed states with the given subject over the
    /// inclusive timestamp range, as (predicate, object) pairs.
    pub fn subject_states_in_range(
        &self,
        layer: Layer,
        subject: TrackId,
        from: Timestamp,
        to: Timestamp,
    ) -> Result<BTreeSet<(PredId, TrackId)>, CsgError> {
        let start = self.row_index_for(from)?;
        let end = self.row_index_for(to)?;
        let li = layer.index();
        let mut out = BTreeSet::new();
        for pair in self.pairs.range((subject, TrackId::MIN)..=(subject, TrackId::MAX)) {
            let timeline = pair.1;
            for row in &timeline.rows[start..=end] {
                if let Some(pred) = row[li] {
                    out.insert((pred, timeline.object));
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Detection;

    fn tracked(id: TrackId, class: &str, conf: f64) -> TrackedDetection {
        TrackedDetection {
            detection: Detection::new(BBox::new(0.1, 0.1, 0.2, 0.2), class, conf),
            track_id: id,
        }
    }

    fn rel(s: TrackId, o: TrackId, pred: &str, layer: Layer, conf: f64) -> LayeredRelation {
        LayeredRelation { subject: s, object: o, predicate: pred.into(), layer, confidence: conf }
    }

    fn graph() -> ContinuousSceneGraph {
        ContinuousSceneGraph::new(CsgConfig::default())
    }

    #[test]
    fn first_observation_commits_immediately_with_detector_weight() {
        let mut g = graph();
        g.update(
            &[tracked(1, "glass", 0.9), tracked(2, "table", 0.9)],
            &[rel(1, 2, "on", Layer::Topological, 0.8)],
            0,
        )
        .unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.pair_count(), 1);
        let rels = g.relations_at(Layer::Topological, 0).unwrap();
        assert!(rels.contains(&(1, 2, "on".to_string())));
        assert_eq!(g.layer_weight(1, 2, Layer::Topological), Some(0.8));
    }

    #[test]
    fn redetection_weight_follows_the_gap_formula() {
        let mut g = graph();
        let nodes = [tracked(1, "glass", 0.9), tracked(2, "table", 0.9)];
        g.update(&nodes, &[rel(1, 2, "on", Layer::Topological, 0.8)], 4).unwrap();
        g.update(&nodes, &[rel(1, 2, "on", Layer::Topological, 0.8)], 5).unwrap();
        // 0.8 + 0.5 * (5 - 4)
        let w = g.layer_weight(1, 2, Layer::Topological).unwrap();
        assert!((w - 1.3).abs() < 1e-12, "{w}");
    }

    #[test]
    fn person_nodes_are_agents() {
        let mut g = graph();
        g.update(&[tracked(1, "person", 0.9), tracked(2, "glass", 0.9)], &[], 0).unwrap();
        assert_eq!(g.node(1).unwrap().kind, NodeKind::Agent);
        assert_eq!(g.node(2).unwrap().kind, NodeKind::Object);
    }

    #[test]
    fn update_weight_matches_direct_substitution() {
        assert_eq!(update_weight(0.8, 5, 4, 0.5).unwrap(), 1.3);
        assert_eq!(update_weight(1.0, 7, 7, 0.5).unwrap(), 1.0);
        assert_eq!(update_weight(0.5, 10, 2, 0.5).unwrap(), 4.5);
        assert!(update_weight(0.5, 2, 10, 0.5).is_err());
    }

    #[test]
    fn non_monotone_update_is_rejected() {
        let mut g = graph();
        g.update(&[tracked(1, "glass", 0.9)], &[], 3).unwrap();
        assert!(g.update(&[tracked(1, "glass", 0.9)], &[], 3).is_err());
        assert!(g.update(&[tracked(1, "glass", 0.9)], &[], 2).is_err());
    }

    #[test]
    fn unknown_endpoints_are_skipped_and_tallied() {
        let mut g = graph();
        g.update(
            &[tracked(1, "glass", 0.9)],
            &[rel(1, 99, "on", Layer::Topological, 0.8)],
            0,
        )
        .unwrap();
        assert_eq!(g.pair_count(), 0);
        assert_eq!(g.diagnostics().skipped_relations, 1);
    }

    #[test]
    fn refinement_rejects_single_frame_flicker() {
        // committed "above", raw [above, above, below, above, above]:
        // the lone "below" never reaches 3 consecutive observations.
        let mut r = StateRefiner::with_committed(8u32);
        let mut committed = Vec::new();
        for obs in [8, 8, 5, 8, 8] {
            r.observe(obs, 3);
            committed.push(r.committed().unwrap());
        }
        assert_eq!(committed, vec![8, 8, 8, 8, 8]);
    }

    #[test]
    fn refinement_commits_after_window_consecutive() {
        let mut r = StateRefiner::with_committed(8u32);
        for obs in [5, 5] {
            r.observe(obs, 3);
            assert_eq!(r.committed(), Some(8));
        }
        r.observe(5, 3);
        assert_eq!(r.committed(), Some(5));
    }

    #[test]
    fn interleaved_observation_resets_the_candidate_count() {
        // committed 8, raw [5,5,8,5,5,5]: the commit happens only at the
        // sixth observation.
        let mut r = StateRefiner::with_committed(8u32);
        let seq = [5, 5, 8, 5, 5, 5];
        let mut commit_at = None;
        for (i, obs) in seq.into_iter().enumerate() {
            r.observe(obs, 3);
            if commit_at.is_none() && r.committed() == Some(5) {
                commit_at = Some(i);
            }
        }
        assert_eq!(commit_at, Some(5));
    }

    #[test]
    fn window_of_one_tracks_raw_observations() {
        let mut r = StateRefiner::with_committed(1u32);
        for obs in [2, 3, 3, 1, 2] {
            r.observe(obs, 1);
            assert_eq!(r.committed(), Some(obs));
        }
    }

    #[test]
    fn unobserved_relation_decays_and_prunes() {
        let mut g = ContinuousSceneGraph::new(CsgConfig {
            decay: 0.02,
            prune_threshold: 0.05,
            ..CsgConfig::default()
        });
        let nodes = [tracked(1, "glass", 0.9), tracked(2, "table", 0.9)];
        g.update(&nodes, &[rel(1, 2, "on", Layer::Topological, 0.06)], 0).unwrap();
        assert_eq!(g.layer_weight(1, 2, Layer::Topological), Some(0.06));
        // One unobserved frame: 0.06 - 0.02 = 0.04 < 0.05, cleared.
        g.update(&nodes, &[], 1).unwrap();
        assert_eq!(g.layer_weight(1, 2, Layer::Topological), None);
        assert!(g.relations_at(Layer::Topological, 1).unwrap().is_empty());
        // The earlier row still reads "on".
        assert!(!g.relations_at(Layer::Topological, 0).unwrap().is_empty());
    }

    #[test]
    fn observed_every_frame_is_never_pruned() {
        let mut g = ContinuousSceneGraph::new(CsgConfig {
            decay: 0.5,
            prune_threshold: 0.4,
            ..CsgConfig::default()
        });
        let nodes = [tracked(1, "glass", 0.9), tracked(2, "table", 0.9)];
        for t in 0..20 {
            g.update(&nodes, &[rel(1, 2, "on", Layer::Topological, 0.5)], t).unwrap();
        }
        assert!(g.layer_weight(1, 2, Layer::Topological).is_some());
    }

    #[test]
    fn zero_prune_threshold_never_clears() {
        let mut g = ContinuousSceneGraph::new(CsgConfig {
            decay: 0.5,
            prune_threshold: 0.0,
            ..CsgConfig::default()
        });
        let nodes = [tracked(1, "glass", 0.9), tracked(2, "table", 0.9)];
        g.update(&nodes, &[rel(1, 2, "on", Layer::Topological, 0.9)], 0).unwrap();
        for t in 1..50 {
            g.update(&nodes, &[], t).unwrap();
        }
        assert!(g.layer_weight(1, 2, Layer::Topological).is_some());
    }

    #[test]
    fn empty_layer_query_is_empty() {
        let mut g = graph();
        g.update(
            &[tracked(1, "glass", 0.9), tracked(2, "table", 0.9)],
            &[rel(1, 2, "on", Layer::Topological, 0.8)],
            0,
        )
        .unwrap();
        assert!(g.relations_at(Layer::Functional, 0).unwrap().is_empty());
    }

    #[test]
    fn queries_outside_history_name_the_range() {
        let mut g = graph();
        g.update(&[tracked(1, "glass", 0.9)], &[], 5).unwrap();
        g.update(&[tracked(1, "glass", 0.9)], &[], 6).unwrap();
        let err = g.relations_at(Layer::Topological, 4).unwrap_err();
        assert!(err.to_string().contains("[5, 6]"), "{err}");
        assert!(g.relations_at(Layer::Topological, 7).is_err());
    }

    #[test]
    fn matrix_keeps_one_row_per_ingested_timestamp() {
        let mut g = graph();
        let nodes = [tracked(1, "glass", 0.9), tracked(2, "table", 0.9), tracked(3, "cup", 0.9)];
        for t in 0..7 {
            let rels = if t == 3 {
                vec![rel(1, 2, "on", Layer::Topological, 0.8), rel(3, 2, "on", Layer::Topological, 0.8)]
            } else if t > 3 {
                vec![rel(1, 2, "on", Layer::Topological, 0.8)]
            } else {
                vec![]
            };
            g.update(&nodes, &rels, t).unwrap();
        }
        for pair in g.pair_timelines() {
            assert_eq!(pair.row_count(), 7, "pair {:?}", (pair.subject, pair.object));
        }
        // The pair created at t=3 has empty backfill rows before it.
        let matrix = g.committed_matrix(3, 2).unwrap();
        assert!(matrix[2].iter().all(Option::is_none));
        assert_eq!(matrix[3][Layer::Topological.index()], Some("on"));
    }

    #[test]
    fn carried_forward_state_is_visible_at_later_timestamps() {
        let mut g = graph();
        let nodes = [tracked(1, "glass", 0.9), tracked(2, "table", 0.9)];
        g.update(&nodes, &[rel(1, 2, "on", Layer::Topological, 0.9)], 0).unwrap();
        for t in 1..5 {
            g.update(&nodes, &[], t).unwrap();
        }
        let rels = g.relations_at(Layer::Topological, 4).unwrap();
        assert!(rels.contains(&(1, 2, "on".to_string())));
    }

    #[test]
    fn history_cap_drops_oldest_rows() {
        let mut g = ContinuousSceneGraph::new(CsgConfig { history_cap: 10, ..CsgConfig::default() });
        let nodes = [tracked(1, "glass", 0.9), tracked(2, "table", 0.9)];
        for t in 0..25 {
            g.update(&nodes, &[rel(1, 2, "on", Layer::Topological, 0.8)], t).unwrap();
        }
        assert_eq!(g.ingested_times().len(), 10);
        assert_eq!(g.available_range(), Some((15, 24)));
        assert!(g.relations_at(Layer::Topological, 14).is_err());
        for pair in g.pair_timelines() {
            assert_eq!(pair.row_count(), 10);
        }
    }

    #[test]
    fn inactive_nodes_are_retained_but_flagged() {
        let mut g = ContinuousSceneGraph::new(CsgConfig { inactive_after: 2, ..CsgConfig::default() });
        g.update(&[tracked(1, "glass", 0.9)], &[], 0).unwrap();
        g.update(&[], &[], 1).unwrap();
        g.update(&[], &[], 2).unwrap();
        assert!(g.node(1).unwrap().active);
        g.update(&[], &[], 3).unwrap();
        let node = g.node(1).unwrap();
        assert!(!node.active);
        assert_eq!(node.last_seen, 0);
    }

    #[test]
    fn graph_serializes_and_restores() {
        let mut g = graph();
        g.update(
            &[tracked(1, "glass", 0.9), tracked(2, "table", 0.9)],
            &[rel(1, 2, "on", Layer::Topological, 0.8)],
            0,
        )
        .unwrap();
        let text = serde_json::to_string(&g).unwrap();
        let back: ContinuousSceneGraph = serde_json::from_str(&text).unwrap();
        assert_eq!(back.relations_at(Layer::Topological, 0).unwrap(), g.relations_at(Layer::Topological, 0).unwrap());
    }
}
