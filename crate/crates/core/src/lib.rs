//! Symbolic task-modeling engine for tabletop demonstrations.
//!
//! The crate turns a time-stamped stream of object detections (and optional
//! relation predictions) into a planning domain:
//!
//! 1. [`stream`] reads line-delimited demonstration records into [`frame::Frame`]s.
//! 2. [`tracker`] assigns persistent track IDs so graph nodes survive across frames.
//! 3. [`layer`] maps predicates onto the four relation layers and performs the
//!    per-layer argmax selection; [`qsr`] derives spatial predicates from
//!    geometry when the stream carries no relation predictions.
//! 4. [`csg`] maintains the continuous scene graph: per-pair, per-layer state
//!    timelines with debounced state changes and confidence weights.
//! 5. [`action`] detects transitional states and extracts grounded
//!    precondition/effect models, which [`pddl`] emits as a PDDL domain.
//!
//! [`pipeline`] wires the stages together behind one `ingest_frame` call.

pub mod action;
pub mod config;
pub mod csg;
pub mod frame;
pub mod geometry;
pub mod layer;
pub mod pddl;
pub mod pipeline;
pub mod qsr;
pub mod stream;
pub mod tracker;

pub use config::RunConfig;
pub use csg::ContinuousSceneGraph;
pub use frame::{Detection, Frame, RawRelation};
pub use geometry::BBox;
pub use layer::{Layer, LayeredRelation, Lexicon};
pub use tracker::{TrackedDetection, Tracker, TrackerConfig};

/// Persistent identity of a tracked object, unique per trajectory.
pub type TrackId = u64;

/// Discrete time index of a frame within a stream.
pub type Timestamp = u64;
