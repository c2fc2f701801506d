//! The frame data model: one timestep of detections and optional relation
//! predictions, serialized as one JSON record per line.
//!
//! Record layout (key names are fixed; field order is irrelevant on input):
//!
//! ```json
//! {"t":0,
//!  "detections":[{"bbox":[0.4,0.5,0.6,0.7],"class":"plate","conf":0.9}],
//!  "relations":[{"sub":0,"obj":1,"predicate":"on","conf":0.8}]}
//! ```
//!
//! The `relations` key may be absent entirely; spatial predicates are then
//! derived downstream from the boxes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BBox;
use crate::Timestamp;

/// One detected object region with its class and detector confidence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    #[serde(rename = "class")]
    pub class_label: String,
    #[serde(rename = "conf")]
    pub confidence: f64,
}

impl Detection {
    pub fn new(bbox: BBox, class_label: impl Into<String>, confidence: f64) -> Self {
        Detection { bbox, class_label: class_label.into(), confidence }
    }
}

/// A predicted relation between two detections of the same frame, by index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawRelation {
    #[serde(rename = "sub")]
    pub subject_index: usize,
    #[serde(rename = "obj")]
    pub object_index: usize,
    pub predicate: String,
    #[serde(rename = "conf")]
    pub confidence: f64,
}

/// One timestep of the demonstration stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    #[serde(rename = "t")]
    pub timestamp: Timestamp,
    pub detections: Vec<Detection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relations: Option<Vec<RawRelation>>,
}

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("malformed frame record: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("detection {index}: bbox {bbox:?} out of range or not ordered")]
    InvalidBBox { index: usize, bbox: [f64; 4] },
    #[error("detection {index}: confidence {value} outside [0,1]")]
    InvalidConfidence { index: usize, value: f64 },
    #[error("relation {index}: confidence {value} outside [0,1]")]
    InvalidRelationConfidence { index: usize, value: f64 },
    #[error("relation {index}: subject_index equals object_index ({value})")]
    SelfRelation { index: usize, value: usize },
    #[error("relation {index}: {field} {value} out of range for {detections} detections")]
    IndexOutOfRange { index: usize, field: &'static str, value: usize, detections: usize },
}

impl Frame {
    pub fn new(timestamp: Timestamp, detections: Vec<Detection>) -> Self {
        Frame { timestamp, detections, relations: None }
    }

    pub fn with_relations(mut self, relations: Vec<RawRelation>) -> Self {
        self.relations = Some(relations);
        self
    }

    /// Checks every type invariant, naming the offending field on failure.
    pub fn validate(&self) -> Result<(), FrameError> {
        for (i, det) in self.detections.iter().enumerate() {
            if !det.bbox.is_valid() {
                return Err(FrameError::InvalidBBox { index: i, bbox: det.bbox.into() });
            }
            if !det.confidence.is_finite() || !(0.0..=1.0).contains(&det.confidence) {
                return Err(FrameError::InvalidConfidence { index: i, value: det.confidence });
            }
        }
        let n = self.detections.len();
        for (i, rel) in self.relations.iter().flatten().enumerate() {
            if rel.subject_index >= n {
                return Err(FrameError::IndexOutOfRange {
                    index: i,
                    field: "subject_index",
                    value: rel.subject_index,
                    detections: n,
                });
            }
            if rel.object_index >= n {
                return Err(FrameError::IndexOutOfRange {
                    index: i,
                    field: "object_index",
                    value: rel.object_index,
                    detections: n,
                });
            }
            if rel.subject_index == rel.object_index {
                return Err(FrameError::SelfRelation { index: i, value: rel.subject_index });
            }
            if !rel.confidence.is_finite() || !(0.0..=1.0).contains(&rel.confidence) {
                return Err(FrameError::InvalidRelationConfidence {
                    index: i,
                    value: rel.confidence,
                });
            }
        }
        Ok(())
    }
}

/// Parses one line-delimited record into a validated frame.
pub fn parse_frame(line: &str) -> Result<Frame, FrameError> {
    let frame: Frame = serde_json::from_str(line)?;
    frame.validate()?;
    Ok(frame)
}

/// Serializes a frame to one line, parseable back into an equal frame.
///
/// Valid frames always serialize; the input is assumed to uphold the type
/// invariants (see [`Frame::validate`]).
pub fn serialize_frame(frame: &Frame) -> String {
    serde_json::to_string(frame).expect("frame serialization cannot fail")
}
