//! Tracker identity properties over randomized slow-motion streams.

use proptest::prelude::*;

use sceneplan_core::frame::{Detection, Frame};
use sceneplan_core::geometry::BBox;
use sceneplan_core::tracker::{Tracker, TrackerConfig};

/// Random walks for a handful of well-separated objects. Steps stay far
/// below the matching threshold's displacement bound, and objects start far
/// enough apart that inter-object IoU stays at zero.
fn arb_walks() -> impl Strategy<Value = Vec<Vec<(f64, f64)>>> {
    let object_count = 2usize..=4;
    (object_count, 5usize..=25, any::<u64>()).prop_map(|(objects, frames, seed)| {
        let mut state = seed;
        let mut random = move || {
            // xorshift; plenty for jittered walks
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 1000) as f64 / 1000.0
        };
        (0..objects)
            .map(|i| {
                let (mut x, mut y) = (0.12 + 0.22 * i as f64, 0.2 + 0.1 * i as f64);
                (0..frames)
                    .map(|_| {
                        x = (x + (random() - 0.5) * 0.02).clamp(0.05, 0.9);
                        y = (y + (random() - 0.5) * 0.02).clamp(0.05, 0.9);
                        (x, y)
                    })
                    .collect()
            })
            .collect()
    })
}

proptest! {
    /// Identity is stable when every object overlaps its own previous box
    /// above the threshold and never overlaps another object.
    #[test]
    fn ids_stay_constant_over_slow_motion(walks in arb_walks()) {
        let frames = walks[0].len();
        let mut tracker = Tracker::new(TrackerConfig::default());
        let mut baseline: Option<Vec<u64>> = None;
        for f in 0..frames {
            let detections: Vec<Detection> = walks
                .iter()
                .map(|walk| {
                    let (x, y) = walk[f];
                    Detection::new(BBox::centered(x, y, 0.08, 0.08), "cup", 0.9)
                })
                .collect();
            // Skip frames where random walks drifted into overlap; the
            // property is conditioned on separation.
            let mut separated = true;
            for i in 0..detections.len() {
                for j in i + 1..detections.len() {
                    if detections[i].bbox.intersection_area(&detections[j].bbox) > 0.0 {
                        separated = false;
                    }
                }
            }
            if !separated {
                return Ok(());
            }
            let tracked = tracker.associate(&Frame::new(f as u64, detections));
            let ids: Vec<u64> = tracked.iter().map(|t| t.track_id).collect();
            let mut unique = ids.clone();
            unique.sort_unstable();
            unique.dedup();
            prop_assert_eq!(unique.len(), ids.len(), "duplicate id in frame {}", f);
            match &baseline {
                None => baseline = Some(ids),
                Some(expected) => prop_assert_eq!(&ids, expected, "ids changed at frame {}", f),
            }
        }
    }
}
