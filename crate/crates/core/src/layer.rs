//! Relation layers and the predicate lexicon.
//!
//! Every relation lives on one of four layers. A predicate may belong to
//! several layers ("on" is topological between objects and functional between
//! an agent and a device), so flat relation scores are resolved by taking the
//! per-layer argmax over the predicates registered for that layer.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::Frame;
use crate::TrackId;

/// The four relation layers. Order is fixed; `index()` addresses per-layer
/// storage throughout the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    Functional,
    Topological,
    PartWhole,
    Attributive,
}

pub const LAYER_COUNT: usize = 4;

impl Layer {
    pub const ALL: [Layer; LAYER_COUNT] =
        [Layer::Functional, Layer::Topological, Layer::PartWhole, Layer::Attributive];

    pub fn index(self) -> usize {
        match self {
            Layer::Functional => 0,
            Layer::Topological => 1,
            Layer::PartWhole => 2,
            Layer::Attributive => 3,
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Layer::Functional => "functional",
            Layer::Topological => "topological",
            Layer::PartWhole => "part_whole",
            Layer::Attributive => "attributive",
        };
        f.write_str(name)
    }
}

/// A relation between two tracked nodes, resolved to a specific layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayeredRelation {
    pub subject: TrackId,
    pub object: TrackId,
    pub predicate: String,
    pub layer: Layer,
    pub confidence: f64,
}

/// Maps predicates to their admissible layers and keeps the per-layer
/// confidence thresholds plus the detection threshold.
///
/// Immutable after load; all threshold comparisons are inclusive (`>=`).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Lexicon {
    /// Lexicon file format version.
    #[serde(default = "default_version")]
    pub version: u32,
    /// predicate -> set of admissible layers
    pub predicates: BTreeMap<String, BTreeSet<Layer>>,
    /// Minimum confidence per layer, indexed by [`Layer::index`].
    #[serde(default = "default_layer_thresholds")]
    pub layer_thresholds: [f64; LAYER_COUNT],
    /// Detection confidence threshold (the detector filter).
    #[serde(default = "default_detection_threshold")]
    pub detection_threshold: f64,
}

fn default_version() -> u32 {
    1
}

fn default_layer_thresholds() -> [f64; LAYER_COUNT] {
    [0.3; LAYER_COUNT]
}

fn default_detection_threshold() -> f64 {
    0.194
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("failed to read lexicon {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed lexicon: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("predicate {0:?} maps to no layer")]
    EmptyLayerSet(String),
    #[error("threshold {0} outside [0,1]")]
    InvalidThreshold(f64),
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::default_indoor()
    }
}

impl Lexicon {
    /// The built-in indoor vocabulary: the six geometry-derived predicates
    /// plus common detector predicates.
    pub fn default_indoor() -> Self {
        use Layer::*;
        let mut predicates: BTreeMap<String, BTreeSet<Layer>> = BTreeMap::new();
        let entries: &[(&str, &[Layer])] = &[
            ("on", &[Topological, Functional]),
            ("in", &[Topological]),
            ("holding", &[Functional]),
            ("using", &[Functional]),
            ("wearing", &[Attributive]),
            ("part_of", &[PartWhole]),
            ("next_to", &[Topological]),
            ("above", &[Topological]),
            ("below", &[Topological]),
            ("left_of", &[Topological]),
            ("right_of", &[Topological]),
            ("inside", &[Topological]),
        ];
        for (pred, layers) in entries {
            predicates.insert(pred.to_string(), layers.iter().copied().collect());
        }
        Lexicon {
            version: 1,
            predicates,
            layer_thresholds: default_layer_thresholds(),
            detection_threshold: default_detection_threshold(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, LexiconError> {
        let lexicon: Lexicon = serde_json::from_str(text)?;
        lexicon.validate()?;
        Ok(lexicon)
    }

    pub fn validate(&self) -> Result<(), LexiconError> {
        for (pred, layers) in &self.predicates {
            if layers.is_empty() {
                return Err(LexiconError::EmptyLayerSet(pred.clone()));
            }
        }
        for &t in self.layer_thresholds.iter().chain([&self.detection_threshold]) {
            if !t.is_finite() || !(0.0..=1.0).contains(&t) {
                return Err(LexiconError::InvalidThreshold(t));
            }
        }
        Ok(())
    }

    /// Layers a predicate may appear on; empty for unknown predicates.
    pub fn classify_layers(&self, predicate: &str) -> BTreeSet<Layer> {
        self.predicates.get(predicate).cloned().unwrap_or_default()
    }

    pub fn threshold(&self, layer: Layer) -> f64 {
        self.layer_thresholds[layer.index()]
    }
}

/// Per-layer argmax over the relation scores of one ordered node pair.
///
/// For each layer, the highest-scoring predicate registered on that layer is
/// kept when its confidence clears the layer threshold; at most one relation
/// per layer, so at most four per ordered pair. Unknown predicates are
/// silently dropped. Score ties resolve to the lexicographically smallest
/// predicate so selection is deterministic.
pub fn select_per_layer(
    lexicon: &Lexicon,
    pair_scores: &BTreeMap<String, f64>,
    subject: TrackId,
    object: TrackId,
) -> Vec<LayeredRelation> {
    let mut out = Vec::new();
    for layer in Layer::ALL {
        let mut best: Option<(&str, f64)> = None;
        for (pred, &score) in pair_scores {
            if !lexicon.predicates.get(pred).is_some_and(|layers| layers.contains(&layer)) {
                continue;
            }
            // BTreeMap iterates in predicate order, so strict `>` keeps the
            // lexicographically smallest predicate among equal scores.
            if best.is_none() || score > best.unwrap().1 {
                best = Some((pred, score));
            }
        }
        if let Some((pred, score)) = best {
            if score >= lexicon.threshold(layer) {
                out.push(LayeredRelation {
                    subject,
                    object,
                    predicate: pred.to_string(),
                    layer,
                    confidence: score,
                });
            }
        }
    }
    out
}

/// Drops detections below the detection threshold (inclusive boundary:
/// a confidence equal to the threshold survives). Relation entries that
/// reference a removed detection are dropped and the remaining indices are
/// rewritten to the filtered list.
pub fn filter_detections(frame: &Frame, threshold: f64) -> Frame {
    let keep: Vec<bool> =
        frame.detections.iter().map(|d| d.confidence >= threshold).collect();
    let mut remap: Vec<Option<usize>> = Vec::with_capacity(keep.len());
    let mut next = 0usize;
    for &k in &keep {
        remap.push(if k {
            next += 1;
            Some(next - 1)
        } else {
            None
        });
    }
    let detections = frame
        .detections
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(d, _)| d.clone())
        .collect();
    let relations = frame.relations.as_ref().map(|rels| {
        rels.iter()
            .filter_map(|r| {
                let sub = remap[r.subject_index]?;
                let obj = remap[r.object_index]?;
                let mut r = r.clone();
                r.subject_index = sub;
                r.object_index = obj;
                Some(r)
            })
            .collect()
    });
    Frame { timestamp: frame.timestamp, detections, relations }
}
