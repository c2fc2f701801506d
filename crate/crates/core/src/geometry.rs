//! Axis-aligned boxes in normalized image coordinates.

use serde::{Deserialize, Serialize};

/// Bounding box normalized to `[0, 1]` on both axes, stored as
/// `[x1, y1, x2, y2]` with `x1 < x2` and `y1 < y2`. The y axis grows
/// downward, as in image coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        BBox { x1, y1, x2, y2 }
    }

    /// Box of the given size centered at `(cx, cy)`, clamped to the unit square.
    pub fn centered(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        let x1 = (cx - w / 2.0).clamp(0.0, 1.0 - w.min(1.0));
        let y1 = (cy - h / 2.0).clamp(0.0, 1.0 - h.min(1.0));
        BBox::new(x1, y1, x1 + w.min(1.0), y1 + h.min(1.0))
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn centroid(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    /// True when the point lies inside the box, edges included.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x1 && x <= self.x2 && y >= self.y1 && y <= self.y2
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = (self.x2.min(other.x2) - self.x1.max(other.x1)).max(0.0);
        let h = (self.y2.min(other.y2) - self.y1.max(other.y1)).max(0.0);
        w * h
    }

    /// Translate the box so its center lands on `(cx, cy)`, without clamping.
    pub fn with_center(&self, cx: f64, cy: f64) -> BBox {
        let (w, h) = (self.width(), self.height());
        BBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    }

    /// True when all coordinates are finite, within `[0, 1]` and properly ordered.
    pub fn is_valid(&self) -> bool {
        let coords = [self.x1, self.y1, self.x2, self.y2];
        coords.iter().all(|c| c.is_finite() && (0.0..=1.0).contains(c))
            && self.x1 < self.x2
            && self.y1 < self.y2
    }
}

impl From<[f64; 4]> for BBox {
    fn from(v: [f64; 4]) -> Self {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

/// Intersection over union of two boxes; 0 when disjoint, 1 when identical.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter / union
}
