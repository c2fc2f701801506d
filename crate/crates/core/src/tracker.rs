//! Greedy IoU tracker: assigns persistent track IDs to detections so graph
//! nodes stay continuous through time.
//!
//! Matching is class-gated and greedy by descending IoU. Unmatched detections
//! open new tracks; tracks unseen for more than `max_age` frames retire and
//! their IDs are never reused.

use serde::{Deserialize, Serialize};

use crate::frame::{Detection, Frame};
use crate::geometry::{iou, BBox};
use crate::TrackId;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// Minimum IoU between a track's last box and a detection for a match.
    pub iou_match_threshold: f64,
    /// Frames a track may go unseen before it retires.
    pub max_age: u32,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig { iou_match_threshold: 0.3, max_age: 10 }
    }
}

/// A detection with its persistent track identity.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackedDetection {
    pub detection: Detection,
    pub track_id: TrackId,
}

#[derive(Clone, Debug)]
struct Track {
    id: TrackId,
    bbox: BBox,
    class_label: String,
    frames_since_seen: u32,
}

/// Tracker state: active tracks plus the next-ID counter.
///
/// Owned by a single stream-processing loop; `associate` consumes one frame
/// at a time and never reuses a retired ID.
#[derive(Clone, Debug)]
pub struct Tracker {
    tracks: Vec<Track>,
    next_id: TrackId,
    config: TrackerConfig,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Self {
        Tracker { tracks: Vec::new(), next_id: 0, config }
    }

    pub fn active_track_count(&self) -> usize {
        self.tracks.len()
    }

    /// Assigns a track ID to every detection of the frame.
    ///
    /// Greedy matching per class by descending IoU; ties break toward the
    /// lower track ID, then the lower detection index, so the assignment is
    /// deterministic. Every detection receives an ID (new tracks are opened
    /// for unmatched ones).
    pub fn associate(&mut self, frame: &Frame) -> Vec<TrackedDetection> {
        // All candidate (track, detection) pairs above the threshold.
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (ti, track) in self.tracks.iter().enumerate() {
            for (di, det) in frame.detections.iter().enumerate() {
                if det.class_label != track.class_label {
                    continue;
                }
                let overlap = iou(&track.bbox, &det.bbox);
                if overlap >= self.config.iou_match_threshold {
                    candidates.push((overlap, ti, di));
                }
            }
        }
        candidates.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| self.tracks[a.1].id.cmp(&self.tracks[b.1].id))
                .then_with(|| a.2.cmp(&b.2))
        });

        let mut track_taken = vec![false; self.tracks.len()];
        let mut det_assignment: Vec<Option<usize>> = vec![None; frame.detections.len()];
        for (_, ti, di) in candidates {
            if track_taken[ti] || det_assignment[di].is_some() {
                continue;
            }
            track_taken[ti] = true;
            det_assignment[di] = Some(ti);
        }

        let mut output = Vec::with_capacity(frame.detections.len());
        for (di, det) in frame.detections.iter().enumerate() {
            let track_id = match det_assignment[di] {
                Some(ti) => {
                    let track = &mut self.tracks[ti];
                    track.bbox = det.bbox;
                    track.frames_since_seen = 0;
                    track.id
                }
                None => {
                    let id = self.next_id;
                    self.next_id += 1;
                    self.tracks.push(Track {
                        id,
                        bbox: det.bbox,
                        class_label: det.class_label.clone(),
                        frames_since_seen: 0,
                    });
                    track_taken.push(true);
                    id
                }
            };
            output.push(TrackedDetection { detection: det.clone(), track_id });
        }

        // Age unmatched tracks and retire the stale ones.
        let max_age = self.config.max_age;
        for (ti, track) in self.tracks.iter_mut().enumerate() {
            if !track_taken.get(ti).copied().unwrap_or(true) {
                track.frames_since_seen += 1;
            }
        }
        self.tracks.retain(|t| t.frames_since_seen <= max_age);

        output
    }
}
