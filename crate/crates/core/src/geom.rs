//! Axis-aligned box geometry.
//!
//! Boxes are stored in corner format `(x1, y1, x2, y2)` with a confidence
//! score and a class label. Construction validates the box, so every
//! geometric routine downstream can assume strictly positive area.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("degenerate box ({x1}, {y1}, {x2}, {y2}): corners must satisfy x1 < x2 and y1 < y2")]
    Degenerate { x1: f64, y1: f64, x2: f64, y2: f64 },
    #[error("score {0} outside [0, 1]")]
    Score(f64),
    #[error("non-finite coordinate")]
    NonFinite,
}

/// A scored axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
    score: f64,
    label: u32,
}

impl BBox {
    /// Creates a class-0 box.
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64, score: f64) -> Result<Self, GeomError> {
        Self::with_label(x1, y1, x2, y2, score, 0)
    }

    pub fn with_label(
        x1: f64,
        y1: f64,
        x2: f64,
        y2: f64,
        score: f64,
        label: u32,
    ) -> Result<Self, GeomError> {
        if ![x1, y1, x2, y2, score].iter().all(|v| v.is_finite()) {
            return Err(GeomError::NonFinite);
        }
        if !(x1 < x2 && y1 < y2) {
            return Err(GeomError::Degenerate { x1, y1, x2, y2 });
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(GeomError::Score(score));
        }
        Ok(Self {
            x1,
            y1,
            x2,
            y2,
            score,
            label,
        })
    }

    /// Ground-truth style box with score 1.
    pub fn gt(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeomError> {
        Self::new(x1, y1, x2, y2, 1.0)
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }
    pub fn y1(&self) -> f64 {
        self.y1
    }
    pub fn x2(&self) -> f64 {
        self.x2
    }
    pub fn y2(&self) -> f64 {
        self.y2
    }
    pub fn score(&self) -> f64 {
        self.score
    }
    pub fn label(&self) -> u32 {
        self.label
    }

    pub fn corners(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        area(self)
    }

    /// Same geometry, new score.
    pub fn rescored(&self, score: f64) -> Result<Self, GeomError> {
        if !score.is_finite() {
            return Err(GeomError::NonFinite);
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(GeomError::Score(score));
        }
        Ok(Self { score, ..*self })
    }

    /// Same geometry with the score clamped into `[0, 1]`.
    pub(crate) fn with_clamped_score(&self, score: f64) -> Self {
        Self {
            score: score.clamp(0.0, 1.0),
            ..*self
        }
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        iou(self, other)
    }
}

pub fn area(b: &BBox) -> f64 {
    (b.x2 - b.x1) * (b.y2 - b.y1)
}

/// Intersection over union. Symmetric, in `[0, 1]`, zero for disjoint or
/// edge-touching boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = a.x2.min(b.x2) - a.x1.max(b.x1);
    let ih = a.y2.min(b.y2) - a.y1.max(b.y1);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = area(a) + area(b) - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Validating IoU over raw corner tuples.
pub fn iou_corners(a: [f64; 4], b: [f64; 4]) -> Result<f64, GeomError> {
    let a = BBox::gt(a[0], a[1], a[2], a[3])?;
    let b = BBox::gt(b[0], b[1], b[2], b[3])?;
    Ok(iou(&a, &b))
}

/// All boxes of one video frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDetections {
    pub sequence_id: String,
    pub frame_index: u32,
    pub boxes: Vec<BBox>,
}

impl FrameDetections {
    pub fn new(sequence_id: impl Into<String>, frame_index: u32, boxes: Vec<BBox>) -> Self {
        Self {
            sequence_id: sequence_id.into(),
            frame_index,
            boxes,
        }
    }

    pub fn key(&self) -> (&str, u32) {
        (&self.sequence_id, self.frame_index)
    }
}

/// Frames of one or more sequences, in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SequenceDataset {
    pub frames: Vec<FrameDetections>,
}

impl SequenceDataset {
    pub fn new(frames: Vec<FrameDetections>) -> Self {
        Self { frames }
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    /// Distinct sequence ids in first-appearance order.
    pub fn sequence_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = Vec::new();
        for f in &self.frames {
            if !ids.contains(&f.sequence_id.as_str()) {
                ids.push(&f.sequence_id);
            }
        }
        ids
    }

    pub fn get(&self, sequence_id: &str, frame_index: u32) -> Option<&FrameDetections> {
        self.frames
            .iter()
            .find(|f| f.sequence_id == sequence_id && f.frame_index == frame_index)
    }

    pub fn num_boxes(&self) -> usize {
        self.frames.iter().map(|f| f.boxes.len()).sum()
    }

    /// Applies `f` to every frame's box list, keeping frame keys.
    pub fn map_frames<F>(&self, mut f: F) -> SequenceDataset
    where
        F: FnMut(&[BBox]) -> Vec<BBox>,
    {
        SequenceDataset {
            frames: self
                .frames
                .iter()
                .map(|fr| FrameDetections {
                    sequence_id: fr.sequence_id.clone(),
                    frame_index: fr.frame_index,
                    boxes: f(&fr.boxes),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn b(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::gt(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn iou_examples() {
        let a = b(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &b(20.0, 20.0, 30.0, 30.0)), 0.0);
        assert_abs_diff_eq!(iou(&a, &b(5.0, 0.0, 15.0, 10.0)), 50.0 / 150.0, epsilon = 1e-12);
    }

    #[test]
    fn edge_touching_is_zero() {
        assert_eq!(iou(&b(0.0, 0.0, 10.0, 10.0), &b(10.0, 0.0, 20.0, 10.0)), 0.0);
    }

    #[test]
    fn area_examples() {
        assert_eq!(b(0.0, 0.0, 10.0, 10.0).area(), 100.0);
        assert_eq!(b(0.0, 0.0, 1.0, 1.0).area(), 1.0);
        assert_eq!(b(2.5, 0.0, 7.5, 4.0).area(), 20.0);
    }

    #[test]
    fn degenerate_rejected() {
        assert!(matches!(
            BBox::gt(0.0, 0.0, 0.0, 5.0),
            Err(GeomError::Degenerate { .. })
        ));
        assert!(matches!(
            BBox::gt(3.0, 0.0, 1.0, 5.0),
            Err(GeomError::Degenerate { .. })
        ));
        assert!(iou_corners([0.0, 0.0, 1.0, 1.0], [0.0, 0.0, 1.0, -1.0]).is_err());
        assert!(matches!(
            BBox::new(0.0, 0.0, 1.0, 1.0, 1.5),
            Err(GeomError::Score(_))
        ));
        assert!(BBox::gt(f64::NAN, 0.0, 1.0, 1.0).is_err());
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (0.0..100.0f64, 0.0..100.0f64, 0.1..50.0f64, 0.1..50.0f64)
            .prop_map(|(x, y, w, h)| b(x, y, x + w, y + h))
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), c in arb_box()) {
            let ab = iou(&a, &c);
            prop_assert_eq!(ab, iou(&c, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn iou_one_iff_identical(a in arb_box(), c in arb_box()) {
            prop_assert_eq!(iou(&a, &a), 1.0);
            if a.corners() != c.corners() {
                prop_assert!(iou(&a, &c) < 1.0);
            }
        }

        #[test]
        fn iou_positive_iff_overlap(a in arb_box(), c in arb_box()) {
            let overlap = a.x1().max(c.x1()) < a.x2().min(c.x2())
                && a.y1().max(c.y1()) < a.y2().min(c.y2());
            prop_assert_eq!(iou(&a, &c) > 0.0, overlap);
        }
    }
}
