//! Bounding boxes, IoU and the shape-constrained IoU distance.
//!
//! Boxes are stored as `(x, y, a, h)`: top-left corner, aspect ratio
//! `w / h` and height. Overlap math happens in corner form.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("box height must be positive and finite, got {0}")]
    InvalidHeight(f64),
    #[error("box aspect ratio must be positive and finite, got {0}")]
    InvalidAspect(f64),
    #[error("box position must be finite, got ({0}, {1})")]
    InvalidPosition(f64, f64),
}

/// Axis-aligned box in `(x, y, a, h)` form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub a: f64,
    pub h: f64,
}

impl BoundingBox {
    /// Builds a box from `(x, y, a, h)`, rejecting non-positive shapes.
    pub fn new(x: f64, y: f64, a: f64, h: f64) -> Result<Self, GeometryError> {
        let b = Self { x, y, a, h };
        b.validate()?;
        Ok(b)
    }

    /// Builds a box from top-left corner, width and height.
    pub fn from_tlwh(left: f64, top: f64, width: f64, height: f64) -> Result<Self, GeometryError> {
        if !(height > 0.0 && height.is_finite()) {
            return Err(GeometryError::InvalidHeight(height));
        }
        Self::new(left, top, width / height, height)
    }

    pub fn from_tlbr(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeometryError> {
        Self::from_tlwh(x1, y1, x2 - x1, y2 - y1)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(GeometryError::InvalidHeight(self.h));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(GeometryError::InvalidAspect(self.a));
        }
        if !(self.x.is_finite() && self.y.is_finite()) {
            return Err(GeometryError::InvalidPosition(self.x, self.y));
        }
        Ok(())
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.a * self.h
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.width() * self.h
    }

    /// `[left, top, width, height]`
    pub fn to_tlwh(&self) -> [f64; 4] {
        [self.x, self.y, self.width(), self.h]
    }

    /// `[x1, y1, x2, y2]`
    pub fn to_tlbr(&self) -> [f64; 4] {
        [self.x, self.y, self.x + self.width(), self.y + self.h]
    }

    pub fn to_xyah(&self) -> [f64; 4] {
        [self.x, self.y, self.a, self.h]
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectionError {
    #[error(transparent)]
    Box(#[from] GeometryError),
    #[error("detection score {0} outside [0, 1]")]
    Score(f64),
}

/// A detector output: box plus confidence in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub score: f64,
}

impl Detection {
    pub fn new(bbox: BoundingBox, score: f64) -> Result<Self, DetectionError> {
        let d = Self { bbox, score };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), DetectionError> {
        self.bbox.validate()?;
        if !(0.0..=1.0).contains(&self.score) {
            return Err(DetectionError::Score(self.score));
        }
        Ok(())
    }
}

/// Toggles and epsilon for [`shape_iou_distance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeIoUParams {
    pub epsilon: f64,
    pub use_height_term: bool,
    pub use_area_term: bool,
}

impl Default for ShapeIoUParams {
    fn default() -> Self {
        Self {
            epsilon: 1e-7,
            use_height_term: true,
            use_area_term: true,
        }
    }
}

impl ShapeIoUParams {
    /// Plain `1 - IoU`.
    pub fn iou_only() -> Self {
        Self {
            use_height_term: false,
            use_area_term: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(format!("epsilon must be positive, got {}", self.epsilon));
        }
        Ok(())
    }
}

fn intersection_area(b1: &[f64; 4], b2: &[f64; 4]) -> f64 {
    let iw = b1[2].min(b2[2]) - b1[0].max(b2[0]);
    let ih = b1[3].min(b2[3]) - b1[1].max(b2[1]);
    if iw <= 0.0 || ih <= 0.0 {
        // touching edges count as no overlap
        return 0.0;
    }
    iw * ih
}

/// Intersection over union of two valid boxes.
pub fn iou(b1: &BoundingBox, b2: &BoundingBox) -> f64 {
    let r1 = b1.to_tlbr();
    let r2 = b2.to_tlbr();
    let inter = intersection_area(&r1, &r2);
    if inter == 0.0 {
        return 0.0;
    }
    let area1 = (r1[2] - r1[0]) * (r1[3] - r1[1]);
    let area2 = (r2[2] - r2[0]) * (r2[3] - r2[1]);
    (inter / (area1 + area2 - inter)).clamp(0.0, 1.0)
}

/// `1 - IoU` plus the optional squared height and area discrepancy terms,
/// each normalised by the minimum enclosing rectangle of the pair.
pub fn shape_iou_distance(b1: &BoundingBox, b2: &BoundingBox, params: &ShapeIoUParams) -> f64 {
    let mut d = 1.0 - iou(b1, b2);
    if !(params.use_height_term || params.use_area_term) {
        return d;
    }

    let r1 = b1.to_tlbr();
    let r2 = b2.to_tlbr();
    let enclosing_w = r1[2].max(r2[2]) - r1[0].min(r2[0]);
    let enclosing_h = r1[3].max(r2[3]) - r1[1].min(r2[1]);

    if params.use_height_term {
        let dh = b1.h - b2.h;
        let norm = enclosing_h + params.epsilon;
        d += (dh * dh) / (norm * norm);
    }
    if params.use_area_term {
        let ds = b1.area() - b2.area();
        let norm = enclosing_w * enclosing_h + params.epsilon;
        d += (ds * ds) / (norm * norm);
    }
    d
}

/// Pairwise distances, rows = tracks, cols = detections.
pub fn cost_matrix(
    tracks: &[BoundingBox],
    detections: &[BoundingBox],
    params: &ShapeIoUParams,
) -> DMatrix<f64> {
    DMatrix::from_fn(tracks.len(), detections.len(), |i, j| {
        shape_iou_distance(&tracks[i], &detections[j], params)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tlwh(l: f64, t: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::from_tlwh(l, t, w, h).unwrap()
    }

    #[test]
    fn iou_identity_and_disjoint() {
        let b = tlwh(5.0, 5.0, 10.0, 20.0);
        assert_eq!(iou(&b, &b), 1.0);
        assert_eq!(iou(&tlwh(0.0, 0.0, 10.0, 10.0), &tlwh(20.0, 20.0, 5.0, 5.0)), 0.0);
    }

    #[test]
    fn iou_half_overlap() {
        // intersection 2, union 6
        let v = iou(&tlwh(0.0, 0.0, 2.0, 2.0), &tlwh(1.0, 0.0, 2.0, 2.0));
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn touching_edges_have_zero_iou() {
        assert_eq!(iou(&tlwh(0.0, 0.0, 2.0, 2.0), &tlwh(2.0, 0.0, 2.0, 2.0)), 0.0);
    }

    #[test]
    fn same_iou_different_shape() {
        let p = ShapeIoUParams::default();
        let r = tlwh(0.0, 0.0, 4.0, 4.0);
        let same = tlwh(2.0, 0.0, 4.0, 4.0);
        let tall = tlwh(2.0, 0.0, 2.0, 8.0);
        assert!((iou(&r, &same) - 1.0 / 3.0).abs() < 1e-15);
        assert!((iou(&r, &tall) - 1.0 / 3.0).abs() < 1e-15);

        let d_same = shape_iou_distance(&r, &same, &p);
        let d_tall = shape_iou_distance(&r, &tall, &p);
        assert!((d_same - 2.0 / 3.0).abs() < 1e-12);
        let expected = 2.0 / 3.0 + 16.0 / (8.0 + 1e-7_f64).powi(2);
        assert!((d_tall - expected).abs() < 1e-12);
        assert!((d_tall - 0.916_666_6).abs() < 1e-6);
    }

    #[test]
    fn flags_off_is_iou_distance() {
        let r = tlwh(0.0, 0.0, 4.0, 4.0);
        let tall = tlwh(2.0, 0.0, 2.0, 8.0);
        let d = shape_iou_distance(&r, &tall, &ShapeIoUParams::iou_only());
        assert_eq!(d, 1.0 - iou(&r, &tall));
    }

    #[test]
    fn cost_matrix_shapes() {
        let b = tlwh(1.0, 1.0, 3.0, 6.0);
        let p = ShapeIoUParams::default();
        assert_eq!(cost_matrix(&[b], &[b], &p)[(0, 0)], 0.0);

        let m = cost_matrix(&[], &[b, b, b], &p);
        assert_eq!((m.nrows(), m.ncols()), (0, 3));
    }

    #[test]
    fn cost_matrix_is_elementwise() {
        let p = ShapeIoUParams::default();
        let tracks = [tlwh(0.0, 0.0, 4.0, 4.0), tlwh(2.0, 0.0, 4.0, 4.0)];
        let dets = [tlwh(2.0, 0.0, 4.0, 4.0), tlwh(2.0, 0.0, 2.0, 8.0)];
        let m = cost_matrix(&tracks, &dets, &p);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(m[(i, j)], shape_iou_distance(&tracks[i], &dets[j], &p));
            }
        }
    }

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(matches!(
            BoundingBox::from_tlwh(0.0, 0.0, 1.0, 0.0),
            Err(GeometryError::InvalidHeight(_))
        ));
        assert!(matches!(
            BoundingBox::from_tlwh(0.0, 0.0, -1.0, 2.0),
            Err(GeometryError::InvalidAspect(_))
        ));
        assert!(BoundingBox::new(f64::NAN, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn tlwh_round_trip() {
        let b = tlwh(12.5, -3.25, 7.0, 21.0);
        let [l, t, w, h] = b.to_tlwh();
        assert_eq!((l, t, h), (12.5, -3.25, 21.0));
        assert!((w - 7.0).abs() / 7.0 < 1e-9);
    }
}
