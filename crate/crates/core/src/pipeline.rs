//! Wiring of the stages into a single frame-ingestion loop.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::action::{ExtractError, GroundedAction, StreamingExtractor};
use crate::config::RunConfig;
use crate::csg::{ContinuousSceneGraph, CsgError};
use crate::frame::Frame;
use crate::layer::{filter_detections, select_per_layer, LayeredRelation, Lexicon};
use crate::qsr::derive_relations;
use crate::tracker::Tracker;
use crate::TrackId;

/// Where relations come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelationSource {
    /// Relations carried in the stream records (detector-log mode).
    Stream,
    /// Relations derived from box geometry (reference-system mode).
    Derived,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("graph update failed: {0}")]
    Graph(#[from] CsgError),
    #[error("action extraction failed: {0}")]
    Extract(#[from] ExtractError),
}

/// Detection filter, tracker, relation layering, graph maintenance, and
/// (optionally) streaming action extraction behind one `ingest_frame` call.
pub struct Pipeline {
    config: RunConfig,
    lexicon: Lexicon,
    source: RelationSource,
    tracker: Tracker,
    graph: ContinuousSceneGraph,
    extractor: Option<StreamingExtractor>,
}

impl Pipeline {
    pub fn new(config: RunConfig, lexicon: Lexicon, source: RelationSource, extract: bool) -> Self {
        let tracker = Tracker::new(config.tracker);
        let graph = ContinuousSceneGraph::new(config.csg_config());
        let extractor = extract.then(|| StreamingExtractor::new(config.zeta));
        Pipeline { config, lexicon, source, tracker, graph, extractor }
    }

    pub fn graph(&self) -> &ContinuousSceneGraph {
        &self.graph
    }

    pub fn actions(&self) -> &[GroundedAction] {
        self.extractor.as_ref().map(|e| e.actions()).unwrap_or(&[])
    }

    pub fn into_parts(self) -> (ContinuousSceneGraph, Vec<GroundedAction>) {
        let actions = self.extractor.map(|e| e.into_actions()).unwrap_or_default();
        (self.graph, actions)
    }

    /// Runs one frame through filter, tracker, relation resolution, and the
    /// graph update; the streaming extractor then evaluates any trigger
    /// timestamp whose window became covered.
    pub fn ingest_frame(&mut self, frame: &Frame) -> Result<(), PipelineError> {
        let filtered = filter_detections(frame, self.config.alpha);
        let tracked = self.tracker.associate(&filtered);

        let relations: Vec<LayeredRelation> = match self.source {
            RelationSource::Derived => derive_relations(&tracked, &self.config.qsr),
            RelationSource::Stream => {
                // Group per ordered pair, resolve indices to track ids, take
                // the per-layer argmax.
                let mut pair_scores: BTreeMap<(TrackId, TrackId), BTreeMap<String, f64>> =
                    BTreeMap::new();
                for rel in filtered.relations.iter().flatten() {
                    let subject = tracked[rel.subject_index].track_id;
                    let object = tracked[rel.object_index].track_id;
                    let scores = pair_scores.entry((subject, object)).or_default();
                    let entry = scores.entry(rel.predicate.clone()).or_insert(rel.confidence);
                    if rel.confidence > *entry {
                        *entry = rel.confidence;
                    }
                }
                pair_scores
                    .iter()
                    .flat_map(|(&(s, o), scores)| select_per_layer(&self.lexicon, scores, s, o))
                    .collect()
            }
        };

        self.graph.update(&tracked, &relations, frame.timestamp)?;
        if let Some(extractor) = &mut self.extractor {
            extractor.on_update(&self.graph)?;
        }
        Ok(())
    }
}
