//! Seeded synthetic sequences with candidate boxes.
//!
//! Each sequence follows one square blob along a linear trajectory whose
//! size grows linearly over the sequence. Per-frame brightness, occlusion
//! and dropout model heterogeneity inside a sequence; candidates are
//! jittered copies of the ground truth whose scores correlate with their
//! IoU through `rho`.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`) seeded with
//! `seed_from_u64(seed)`. Sequence `s` draws frame conditions from stream
//! `2s` and candidates from stream `2s + 1`, so ground truth and candidates
//! can be generated independently and still agree.
//!
//! Candidate scores use
//! `raw = 0.5 + rho * (n - 0.5) + (1 - |rho|) * (u - 0.5)` where `n` is the
//! candidate's IoU min-max normalised within the frame and `u ~ U(0, 1)`,
//! then `score = (eps + (1 - 2 eps) * raw) * brightness`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{iou, BBox, FrameDetections, SequenceDataset};
use crate::tensor::Tensor;

/// Score floor and ceiling margin.
pub const SCORE_EPS: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("{name} = {value} outside [0, 1]")]
    Probability { name: &'static str, value: f64 },
    #[error("rho = {0} outside [-1, 1]")]
    Rho(f64),
    #[error("sigma_box = {0} must be finite and >= 0")]
    Sigma(f64),
    #[error("candidate count must be at least 1")]
    Candidates,
    #[error("image must be at least 1x1")]
    Image,
    #[error("size_range {0:?} must satisfy 0 < min <= max")]
    Size([f64; 2]),
    #[error("brightness_range {0:?} must satisfy 0 < lo <= hi <= 1")]
    Brightness([f64; 2]),
    #[error("non-finite trajectory parameter")]
    Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_sequences: u32,
    pub n_frames: u32,
    pub image_w: u32,
    pub image_h: u32,
    /// Blob centre at frame 0.
    pub start: [f64; 2],
    /// Centre displacement per frame.
    pub velocity: [f64; 2],
    /// Side length at the first and last frame.
    pub size_range: [f64; 2],
    pub brightness_range: [f64; 2],
    pub occlusion_prob: f64,
    pub dropout_prob: f64,
    /// Chance of one spurious candidate per frame.
    pub clutter_prob: f64,
    pub rho: f64,
    pub n_candidates: u32,
    /// Corner jitter standard deviation as a fraction of the side length.
    pub sigma_box: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_sequences: 1,
            n_frames: 500,
            image_w: 512,
            image_h: 512,
            start: [160.0, 300.0],
            velocity: [0.4, -0.25],
            size_range: [48.0, 128.0],
            brightness_range: [0.6, 1.0],
            occlusion_prob: 0.05,
            dropout_prob: 0.02,
            clutter_prob: 0.1,
            rho: 0.0,
            n_candidates: 8,
            sigma_box: 0.1,
            seed: 7,
        }
    }
}

impl SynthConfig {
    /// The rho = 0, seed 7, 500-frame, 8-candidate discrepancy fixture.
    pub fn discrepancy_fixture() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        for (name, value) in [
            ("occlusion_prob", self.occlusion_prob),
            ("dropout_prob", self.dropout_prob),
            ("clutter_prob", self.clutter_prob),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SynthError::Probability { name, value });
            }
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(SynthError::Rho(self.rho));
        }
        if !(self.sigma_box.is_finite() && self.sigma_box >= 0.0) {
            return Err(SynthError::Sigma(self.sigma_box));
        }
        if self.n_candidates == 0 {
            return Err(SynthError::Candidates);
        }
        if self.image_w == 0 || self.image_h == 0 {
            return Err(SynthError::Image);
        }
        let [s0, s1] = self.size_range;
        if !(s0 > 0.0 && s0 <= s1 && s1.is_finite()) {
            return Err(SynthError::Size(self.size_range));
        }
        let [b0, b1] = self.brightness_range;
        if !(b0 > 0.0 && b0 <= b1 && b1 <= 1.0) {
            return Err(SynthError::Brightness(self.brightness_range));
        }
        if !self.start.iter().chain(&self.velocity).all(|v| v.is_finite()) {
            return Err(SynthError::Trajectory);
        }
        Ok(())
    }

    pub fn sequence_id(index: u32) -> String {
        format!("syn{index:03}")
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Visibility {
    Visible,
    Occluded,
    Dropped,
}

/// Per-frame scene state shared by ground truth, candidates and rasters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameCondition {
    pub visibility: Visibility,
    pub brightness: f64,
    /// Where the blob would be, visible or not.
    pub blob: BBox,
}

fn clamp_box(x1: f64, y1: f64, x2: f64, y2: f64, w: f64, h: f64) -> BBox {
    let fix = |a: f64, b: f64, limit: f64| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let mut lo = lo.clamp(0.0, limit - 1.0);
        let hi = hi.clamp(lo + 1.0, limit);
        if hi - lo < 1.0 {
            lo = hi - 1.0;
        }
        (lo, hi)
    };
    let (x1, x2) = fix(x1, x2, w);
    let (y1, y2) = fix(y1, y2, h);
    BBox::gt(x1, y1, x2, y2).expect("clamped box has positive extent")
}

/// Frame conditions of sequence `seq`.
pub fn frame_conditions(cfg: &SynthConfig, seq: u32) -> Vec<FrameCondition> {
    let mut rng = cfg.rng(2 * u64::from(seq));
    let (w, h) = (f64::from(cfg.image_w.max(2)), f64::from(cfg.image_h.max(2)));
    let last = f64::from(cfg.n_frames.saturating_sub(1).max(1));
    (0..cfg.n_frames)
        .map(|t| {
            let t = f64::from(t);
            let side = cfg.size_range[0] + (cfg.size_range[1] - cfg.size_range[0]) * t / last;
            let cx = (cfg.start[0] + cfg.velocity[0] * t).clamp(0.0, w);
            let cy = (cfg.start[1] + cfg.velocity[1] * t).clamp(0.0, h);
            let blob = clamp_box(cx - side / 2.0, cy - side / 2.0, cx + side / 2.0, cy + side / 2.0, w, h);
            let [b0, b1] = cfg.brightness_range;
            let brightness = b0 + (b1 - b0) * rng.random::<f64>();
            let u: f64 = rng.random();
            let visibility = if u < cfg.occlusion_prob {
                Visibility::Occluded
            } else if u < cfg.occlusion_prob + cfg.dropout_prob * (1.0 - cfg.occlusion_prob) {
                Visibility::Dropped
            } else {
                Visibility::Visible
            };
            FrameCondition {
                visibility,
                brightness,
                blob,
            }
        })
        .collect()
}

/// One ground-truth box per visible frame; occluded and dropped frames are
/// present with no boxes.
pub fn generate_ground_truth(cfg: &SynthConfig) -> Result<SequenceDataset, SynthError> {
    cfg.validate()?;
    let mut frames = Vec::new();
    for seq in 0..cfg.n_sequences {
        let id = SynthConfig::sequence_id(seq);
        for (t, c) in frame_conditions(cfg, seq).into_iter().enumerate() {
            let boxes = match c.visibility {
                Visibility::Visible => vec![c.blob],
                _ => vec![],
            };
            frames.push(FrameDetections::new(id.clone(), t as u32, boxes));
        }
    }
    Ok(SequenceDataset::new(frames))
}

fn to_score(raw: f64, brightness: f64) -> f64 {
    ((SCORE_EPS + (1.0 - 2.0 * SCORE_EPS) * raw) * brightness).clamp(0.0, 1.0)
}

/// Jittered, scored candidates for every frame of `gt`.
///
/// Candidates are drawn around the frame's ground truth; frames without
/// ground truth get only clutter, and dropped frames get nothing.
pub fn corrupt_candidates(gt: &SequenceDataset, cfg: &SynthConfig) -> Result<SequenceDataset, SynthError> {
    cfg.validate()?;
    let (w, h) = (f64::from(cfg.image_w.max(2)), f64::from(cfg.image_h.max(2)));
    let mut frames = Vec::with_capacity(gt.len());
    let mut current: Option<(String, Vec<FrameCondition>, ChaCha8Rng)> = None;
    for frame in &gt.frames {
        if current.as_ref().is_none_or(|(id, _, _)| *id != frame.sequence_id) {
            let seq = (0..cfg.n_sequences)
                .find(|&s| SynthConfig::sequence_id(s) == frame.sequence_id)
                .unwrap_or(0);
            current = Some((
                frame.sequence_id.clone(),
                frame_conditions(cfg, seq),
                cfg.rng(2 * u64::from(seq) + 1),
            ));
        }
        let (_, conds, rng) = current.as_mut().expect("set above");
        let cond = conds.get(frame.frame_index as usize).copied();
        let brightness = cond.map_or(1.0, |c| c.brightness);
        if cond.is_some_and(|c| c.visibility == Visibility::Dropped) {
            frames.push(FrameDetections::new(frame.sequence_id.clone(), frame.frame_index, vec![]));
            continue;
        }

        let mut boxes = Vec::new();
        if let Some(g) = frame.boxes.first() {
            let side = g.width().max(g.height());
            let jitter: Vec<BBox> = (0..cfg.n_candidates)
                .map(|_| {
                    let mut d = [0.0; 4];
                    for v in &mut d {
                        let z: f64 = rng.sample(StandardNormal);
                        *v = cfg.sigma_box * side * z;
                    }
                    clamp_box(g.x1() + d[0], g.y1() + d[1], g.x2() + d[2], g.y2() + d[3], w, h)
                })
                .collect();
            let ious: Vec<f64> = jitter.iter().map(|b| iou(b, g)).collect();
            let lo = ious.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ious.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for (b, v) in jitter.iter().zip(&ious) {
                let n = if hi - lo > 1e-12 { (v - lo) / (hi - lo) } else { 0.5 };
                let u: f64 = rng.random();
                let raw = 0.5 + cfg.rho * (n - 0.5) + (1.0 - cfg.rho.abs()) * (u - 0.5);
                boxes.push(b.rescored(to_score(raw, brightness)).expect("score in range"));
            }
        }
        if rng.random::<f64>() < cfg.clutter_prob {
            let side = cfg.size_range[0];
            let cx = rng.random::<f64>() * w;
            let cy = rng.random::<f64>() * h;
            let raw = 0.6 * rng.random::<f64>();
            let b = clamp_box(cx - side / 2.0, cy - side / 2.0, cx + side / 2.0, cy + side / 2.0, w, h);
            boxes.push(b.rescored(to_score(raw, brightness)).expect("score in range"));
        }
        frames.push(FrameDetections::new(frame.sequence_id.clone(), frame.frame_index, boxes));
    }
    Ok(SequenceDataset::new(frames))
}

/// Ground truth and candidates for `cfg`.
pub fn generate(cfg: &SynthConfig) -> Result<(SequenceDataset, SequenceDataset), SynthError> {
    let gt = generate_ground_truth(cfg)?;
    let cand = corrupt_candidates(&gt, cfg)?;
    Ok((gt, cand))
}

fn argmax_by<F: Fn(&BBox) -> f64>(boxes: &[BBox], key: F) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, b) in boxes.iter().enumerate() {
        let k = key(b);
        if best.is_none_or(|(_, bk)| k > bk) {
            best = Some((i, k));
        }
    }
    best.map(|(i, _)| i)
}

/// Fraction of frames with ground truth and candidates whose top-scored
/// candidate is not the one with the highest IoU.
pub fn discrepancy_fraction(gt: &SequenceDataset, cand: &SequenceDataset) -> f64 {
    let (mut n, mut bad) = (0usize, 0usize);
    for f in &gt.frames {
        let (Some(g), Some(c)) = (f.boxes.first(), cand.get(&f.sequence_id, f.frame_index)) else {
            continue;
        };
        let Some(by_score) = argmax_by(&c.boxes, BBox::score) else {
            continue;
        };
        let by_iou = argmax_by(&c.boxes, |b| iou(b, g)).expect("non-empty");
        n += 1;
        bad += usize::from(iou(&c.boxes[by_score], g) < iou(&c.boxes[by_iou], g));
    }
    if n == 0 {
        0.0
    } else {
        bad as f64 / n as f64
    }
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation; 0 when either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Mean per-frame Spearman correlation between candidate score and IoU
/// with the frame's ground truth. Clutter is excluded by keeping only
/// candidates that overlap the ground truth.
pub fn score_iou_correlation(gt: &SequenceDataset, cand: &SequenceDataset) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for f in &gt.frames {
        let (Some(g), Some(c)) = (f.boxes.first(), cand.get(&f.sequence_id, f.frame_index)) else {
            continue;
        };
        let (scores, ious): (Vec<f64>, Vec<f64>) = c
            .boxes
            .iter()
            .map(|b| (b.score(), iou(b, g)))
            .filter(|&(_, v)| v > 0.0)
            .unzip();
        if scores.len() >= 2 {
            total += spearman(&scores, &ious);
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

/// Grayscale frames of sequence `seq` as `[1, out_h, out_w]` tensors in
/// `[0, 1]`: a flat background with a Gaussian blob scaled by the frame's
/// brightness. Occluded and dropped frames show background only.
pub fn render_sequence(cfg: &SynthConfig, seq: u32, out_w: usize, out_h: usize) -> Vec<Tensor> {
    let sx = out_w as f64 / f64::from(cfg.image_w.max(1));
    let sy = out_h as f64 / f64::from(cfg.image_h.max(1));
    frame_conditions(cfg, seq)
        .into_iter()
        .map(|c| {
            let b = c.blob;
            let cx = (b.x1() + b.x2()) / 2.0 * sx;
            let cy = (b.y1() + b.y2()) / 2.0 * sy;
            let rx = (b.width() * sx / 4.0).max(0.5);
            let ry = (b.height() * sy / 4.0).max(0.5);
            let amp = if c.visibility == Visibility::Visible { c.brightness } else { 0.0 };
            let data = (0..out_h * out_w)
                .map(|k| {
                    let dx = ((k % out_w) as f64 + 0.5 - cx) / rx;
                    let dy = ((k / out_w) as f64 + 0.5 - cy) / ry;
                    0.1 + 0.85 * amp * (-(dx * dx + dy * dy) / 2.0).exp()
                })
                .collect();
            Tensor::new(vec![1, out_h, out_w], data).expect("length matches dims")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            n_frames: 60,
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn zero_velocity_no_occlusion_gives_constant_gt() {
        let cfg = SynthConfig {
            velocity: [0.0, 0.0],
            size_range: [40.0, 40.0],
            occlusion_prob: 0.0,
            dropout_prob: 0.0,
            ..small(3)
        };
        let gt = generate_ground_truth(&cfg).unwrap();
        let first = gt.frames[0].boxes[0];
        assert!(gt.frames.iter().all(|f| f.boxes == vec![first]));
    }

    #[test]
    fn full_occlusion_makes_every_frame_negative() {
        let cfg = SynthConfig {
            occlusion_prob: 1.0,
            ..small(3)
        };
        let gt = generate_ground_truth(&cfg).unwrap();
        assert_eq!(gt.len(), 60);
        assert_eq!(gt.num_boxes(), 0);
    }

    #[test]
    fn perfect_correlation_without_jitter_reproduces_gt() {
        let cfg = SynthConfig {
            rho: 1.0,
            sigma_box: 0.0,
            clutter_prob: 0.0,
            ..small(5)
        };
        let (gt, cand) = generate(&cfg).unwrap();
        for f in &gt.frames {
            let c = cand.get(&f.sequence_id, f.frame_index).unwrap();
            if let Some(g) = f.boxes.first() {
                assert_eq!(c.boxes.len(), 8);
                assert!(c.boxes.iter().all(|b| b.corners() == g.corners()));
            }
        }
    }

    #[test]
    fn perfect_correlation_aligns_argmaxes() {
        let cfg = SynthConfig {
            rho: 1.0,
            clutter_prob: 0.0,
            ..small(11)
        };
        let (gt, cand) = generate(&cfg).unwrap();
        assert_eq!(discrepancy_fraction(&gt, &cand), 0.0);
    }

    #[test]
    fn correlation_monotone_in_rho() {
        let corr: Vec<f64> = [-1.0, 0.0, 1.0]
            .iter()
            .map(|&rho| {
                let (gt, cand) = generate(&SynthConfig { rho, ..small(13) }).unwrap();
                score_iou_correlation(&gt, &cand)
            })
            .collect();
        assert!(corr[0] < corr[1] && corr[1] < corr[2], "{corr:?}");
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        assert_eq!(generate(&small(1)).unwrap(), generate(&small(1)).unwrap());
        assert_ne!(generate(&small(1)).unwrap().1, generate(&small(2)).unwrap().1);
    }

    #[test]
    fn boxes_stay_inside_image() {
        let cfg = SynthConfig {
            velocity: [9.0, 7.0],
            sigma_box: 0.5,
            clutter_prob: 1.0,
            ..small(17)
        };
        let (gt, cand) = generate(&cfg).unwrap();
        for b in gt.frames.iter().chain(&cand.frames).flat_map(|f| &f.boxes) {
            assert!(b.x1() >= 0.0 && b.y1() >= 0.0 && b.x2() <= 512.0 && b.y2() <= 512.0);
            assert!(b.width() >= 1.0 && b.height() >= 1.0);
            assert!((0.0..=1.0).contains(&b.score()));
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = [
            SynthConfig { occlusion_prob: 1.5, ..small(0) },
            SynthConfig { rho: -2.0, ..small(0) },
            SynthConfig { sigma_box: -0.1, ..small(0) },
            SynthConfig { n_candidates: 0, ..small(0) },
            SynthConfig { size_range: [10.0, 5.0], ..small(0) },
            SynthConfig { brightness_range: [0.5, 1.2], ..small(0) },
        ];
        for cfg in bad {
            assert!(generate(&cfg).is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn spearman_basics() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), 0.0);
    }

    #[test]
    fn raster_shape_and_range() {
        let frames = render_sequence(&small(1), 0, 32, 24);
        assert_eq!(frames.len(), 60);
        assert_eq!(frames[0].dims(), &[1, 24, 32]);
        assert!(frames.iter().flat_map(|f| f.data()).all(|&v| (0.0..=1.0).contains(&v)));
    }
}
