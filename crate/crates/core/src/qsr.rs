//! Spatial predicate derivation from tracked boxes, for streams that carry
//! no relation predictions.
//!
//! A reference object (the plate in the tabletop scenario) anchors a
//! reference system. Each remaining object receives exactly one of five
//! predicates per frame: `inside` when its centroid falls within the
//! reference box, otherwise one of `left_of`, `right_of`, `above`, `below`
//! by which diagonal sector of the reference-centered frame holds the
//! centroid. Image coordinates: y grows downward, so "above" means smaller y.
//!
//! `holding` is derived independently: a hand-class detection overlapping an
//! object with IoU at or above the holding threshold holds the single
//! highest-IoU object. An object currently held has no stable spatial state
//! of its own (its position belongs to the hand sweeping it around), so the
//! five reference predicates are not derived for it on that frame.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::geometry::iou;
use crate::layer::{Layer, LayeredRelation};
use crate::tracker::TrackedDetection;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QsrConfig {
    /// Class anchoring the reference system; the highest-confidence instance
    /// is used when several are present.
    pub reference_class: String,
    /// Classes treated as hands for `holding` derivation.
    pub hand_classes: BTreeSet<String>,
    /// Minimum hand/object IoU for a `holding` relation.
    pub holding_iou_threshold: f64,
}

impl Default for QsrConfig {
    fn default() -> Self {
        QsrConfig {
            reference_class: "plate".to_string(),
            hand_classes: ["hand", "person"].iter().map(|s| s.to_string()).collect(),
            holding_iou_threshold: 0.1,
        }
    }
}

/// Confidence attached to derived relations: the geometry is exact, so the
/// initial graph weight starts at full confidence.
const DERIVED_CONFIDENCE: f64 = 1.0;

/// Derives the six spatial/functional predicates for one frame of tracked
/// detections.
///
/// Without a reference instance the spatial output is empty (holding is
/// still derived). With several reference instances the highest-confidence
/// one wins and the ambiguity is logged.
pub fn derive_relations(tracked: &[TrackedDetection], config: &QsrConfig) -> Vec<LayeredRelation> {
    let mut out = Vec::new();

    // holding: per hand, the single best-overlapping non-hand object.
    let mut held: BTreeSet<crate::TrackId> = BTreeSet::new();
    for hand in tracked.iter().filter(|t| config.hand_classes.contains(&t.detection.class_label)) {
        let mut best: Option<(f64, &TrackedDetection)> = None;
        for obj in tracked {
            if obj.track_id == hand.track_id
                || config.hand_classes.contains(&obj.detection.class_label)
            {
                continue;
            }
            let overlap = iou(&hand.detection.bbox, &obj.detection.bbox);
            if overlap < config.holding_iou_threshold {
                continue;
            }
            let better = match best {
                None => true,
                Some((b, prev)) => {
                    overlap > b || (overlap == b && obj.track_id < prev.track_id)
                }
            };
            if better {
                best = Some((overlap, obj));
            }
        }
        if let Some((_, obj)) = best {
            held.insert(obj.track_id);
            out.push(LayeredRelation {
                subject: hand.track_id,
                object: obj.track_id,
                predicate: "holding".to_string(),
                layer: Layer::Functional,
                confidence: DERIVED_CONFIDENCE,
            });
        }
    }

    // Reference resolution: highest confidence, then lowest track id.
    let mut reference: Option<&TrackedDetection> = None;
    let mut reference_instances = 0usize;
    for t in tracked.iter().filter(|t| t.detection.class_label == config.reference_class) {
        reference_instances += 1;
        let better = match reference {
            None => true,
            Some(prev) => {
                t.detection.confidence > prev.detection.confidence
                    || (t.detection.confidence == prev.detection.confidence
                        && t.track_id < prev.track_id)
            }
        };
        if better {
            reference = Some(t);
        }
    }
    if reference_instances > 1 {
        log::warn!(
            "{} instances of reference class {:?} in frame; keeping the most confident",
            reference_instances,
            config.reference_class
        );
    }
    let Some(reference) = reference else {
        return out;
    };
    let (rx, ry) = reference.detection.bbox.centroid();

    for obj in tracked {
        if obj.track_id == reference.track_id || held.contains(&obj.track_id) {
            continue;
        }
        let (cx, cy) = obj.detection.bbox.centroid();
        let predicate = if reference.detection.bbox.contains_point(cx, cy) {
            "inside"
        } else {
            let (dx, dy) = (cx - rx, cy - ry);
            // Diagonal sectors; ties on the diagonal resolve to the
            // horizontal pair.
            if dx.abs() >= dy.abs() {
                if dx < 0.0 {
                    "left_of"
                } else {
                    "right_of"
                }
            } else if dy < 0.0 {
                "above"
            } else {
                "below"
            }
        };
        out.push(LayeredRelation {
            subject: obj.track_id,
            object: reference.track_id,
            predicate: predicate.to_string(),
            layer: Layer::Topological,
            confidence: DERIVED_CONFIDENCE,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Detection;
    use crate::geometry::BBox;

    fn tracked(id: u64, class: &str, bbox: BBox, conf: f64) -> TrackedDetection {
        TrackedDetection { detection: Detection::new(bbox, class, conf), track_id: id }
    }

    fn at(cx: f64, cy: f64, size: f64) -> BBox {
        BBox::new(cx - size / 2.0, cy - size / 2.0, cx + size / 2.0, cy + size / 2.0)
    }

    fn spatial_of(rels: &[LayeredRelation], subject: u64) -> Vec<&str> {
        rels.iter()
            .filter(|r| r.subject == subject && r.layer == Layer::Topological)
            .map(|r| r.predicate.as_str())
            .collect()
    }

    #[test]
    fn x_dominant_offset_yields_left_of() {
        let scene = vec![
            tracked(0, "plate", at(0.50, 0.60, 0.2), 0.9),
            tracked(1, "fork", at(0.30, 0.60, 0.06), 0.9),
        ];
        let rels = derive_relations(&scene, &QsrConfig::default());
        assert_eq!(spatial_of(&rels, 1), vec!["left_of"]);
        assert_eq!(rels[0].object, 0);
    }

    #[test]
    fn centroid_containment_yields_inside() {
        let scene = vec![
            tracked(0, "plate", BBox::new(0.4, 0.5, 0.6, 0.7), 0.9),
            // Knife bbox is wider than the plate, but the centroid is inside.
            tracked(1, "knife", BBox::new(0.35, 0.55, 0.65, 0.62), 0.9),
        ];
        let rels = derive_relations(&scene, &QsrConfig::default());
        assert_eq!(spatial_of(&rels, 1), vec!["inside"]);
    }

    #[test]
    fn four_sectors_resolve_as_expected() {
        let cases = [
            ((0.2, 0.5), "left_of"),
            ((0.8, 0.5), "right_of"),
            ((0.5, 0.2), "above"),
            ((0.5, 0.8), "below"),
        ];
        for ((x, y), expected) in cases {
            let scene = vec![
                tracked(0, "plate", at(0.5, 0.5, 0.1), 0.9),
                tracked(1, "cup", at(x, y, 0.05), 0.9),
            ];
            let rels = derive_relations(&scene, &QsrConfig::default());
            assert_eq!(spatial_of(&rels, 1), vec![expected], "object at ({x},{y})");
        }
    }

    #[test]
    fn diagonal_tie_resolves_horizontal() {
        let scene = vec![
            tracked(0, "plate", at(0.5, 0.5, 0.1), 0.9),
            tracked(1, "cup", at(0.7, 0.7, 0.05), 0.9), // dx == dy
        ];
        let rels = derive_relations(&scene, &QsrConfig::default());
        assert_eq!(spatial_of(&rels, 1), vec!["right_of"]);
    }

    #[test]
    fn holding_keeps_only_highest_iou_object_per_hand() {
        let hand = at(0.5, 0.5, 0.2);
        // Both clear the threshold; the spoon overlaps the hand more.
        let spoon = BBox::new(0.45, 0.45, 0.65, 0.65);
        let fork = BBox::new(0.5, 0.5, 0.7, 0.7);
        let scene = vec![
            tracked(0, "hand", hand, 0.9),
            tracked(1, "spoon", spoon, 0.9),
            tracked(2, "fork", fork, 0.9),
        ];
        let cfg = QsrConfig { reference_class: "plate".into(), ..Default::default() };
        let rels = derive_relations(&scene, &cfg);
        let holding: Vec<_> = rels.iter().filter(|r| r.predicate == "holding").collect();
        assert_eq!(holding.len(), 1);
        assert_eq!(holding[0].subject, 0);
        assert_eq!(holding[0].object, 1);
        assert_eq!(holding[0].layer, Layer::Functional);
    }

    #[test]
    fn holding_below_threshold_is_not_derived() {
        let scene = vec![
            tracked(0, "hand", at(0.2, 0.2, 0.1), 0.9),
            tracked(1, "spoon", at(0.8, 0.8, 0.1), 0.9),
        ];
        let rels = derive_relations(&scene, &QsrConfig::default());
        assert!(rels.iter().all(|r| r.predicate != "holding"));
    }

    #[test]
    fn no_reference_yields_holding_only() {
        let scene = vec![
            tracked(0, "hand", at(0.5, 0.5, 0.2), 0.9),
            tracked(1, "spoon", at(0.52, 0.52, 0.1), 0.9),
        ];
        let rels = derive_relations(&scene, &QsrConfig::default());
        assert_eq!(rels.len(), 1);
        assert_eq!(rels[0].predicate, "holding");
    }

    #[test]
    fn duplicate_references_resolve_to_most_confident() {
        let scene = vec![
            tracked(0, "plate", at(0.3, 0.5, 0.1), 0.6),
            tracked(1, "plate", at(0.7, 0.5, 0.1), 0.9),
            tracked(2, "cup", at(0.9, 0.5, 0.05), 0.9),
        ];
        let rels = derive_relations(&scene, &QsrConfig::default());
        // Relative to the plate at 0.7, the cup is to the right; the weaker
        // plate instance becomes an ordinary object.
        let cup = rels.iter().find(|r| r.subject == 2).unwrap();
        assert_eq!(cup.predicate, "right_of");
        assert_eq!(cup.object, 1);
        let other_plate = rels.iter().find(|r| r.subject == 0).unwrap();
        assert_eq!(other_plate.predicate, "left_of");
    }

    #[test]
    fn held_object_gets_no_spatial_predicate() {
        let scene = vec![
            tracked(0, "plate", at(0.5, 0.5, 0.2), 0.9),
            tracked(1, "hand", at(0.2, 0.2, 0.14), 0.9),
            tracked(2, "knife", at(0.21, 0.21, 0.1), 0.9),
        ];
        let rels = derive_relations(&scene, &QsrConfig::default());
        assert!(rels.iter().any(|r| r.predicate == "holding" && r.object == 2));
        assert!(spatial_of(&rels, 2).is_empty(), "held object must not get a sector");
    }

    /// Every unheld non-reference object gets exactly one of the five spatial
    /// predicates; reflecting x about the reference centroid swaps
    /// left_of/right_of and preserves the rest.
    #[test]
    fn exclusivity_and_reflection_symmetry() {
        let cfg = QsrConfig::default();
        let positions = [
            (0.15, 0.52),
            (0.85, 0.48),
            (0.52, 0.15),
            (0.48, 0.85),
            (0.55, 0.52), // inside
            (0.12, 0.12),
            (0.9, 0.9),
            (0.31, 0.77),
        ];
        let scene: Vec<TrackedDetection> = std::iter::once(tracked(0, "plate", at(0.5, 0.5, 0.2), 0.9))
            .chain(
                positions
                    .iter()
                    .enumerate()
                    .map(|(i, &(x, y))| tracked(i as u64 + 1, "cup", at(x, y, 0.05), 0.9)),
            )
            .collect();
        let mirrored: Vec<TrackedDetection> = scene
            .iter()
            .map(|t| {
                let b = t.detection.bbox;
                let mut m = t.clone();
                // reflect about the reference centroid x = 0.5
                m.detection.bbox = BBox::new(1.0 - b.x2, b.y1, 1.0 - b.x1, b.y2);
                m
            })
            .collect();

        let rels = derive_relations(&scene, &cfg);
        let rels_m = derive_relations(&mirrored, &cfg);
        for t in scene.iter().skip(1) {
            let got = spatial_of(&rels, t.track_id);
            assert_eq!(got.len(), 1, "object {} must get exactly one predicate", t.track_id);
            let mirrored_pred = spatial_of(&rels_m, t.track_id)[0];
            let expected = match got[0] {
                "left_of" => "right_of",
                "right_of" => "left_of",
                other => other,
            };
            assert_eq!(mirrored_pred, expected);
        }
    }
}
