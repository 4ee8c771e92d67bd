//! Single-class detection evaluation.
//!
//! Matching follows the COCO protocol: predictions are visited by descending
//! score and each takes the highest-IoU unmatched ground truth with
//! `IoU >= threshold`. AP is the 101-point interpolated area under the
//! precision envelope. Area-bucketed AP marks ground truths outside the
//! bucket as ignored, as COCO does.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::geom::{iou, BBox, FrameDetections, SequenceDataset};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("average precision is undefined without ground truth boxes")]
    NoGroundTruth,
    #[error("empty IoU threshold list")]
    EmptyThresholds,
    #[error("IoU threshold {0} outside (0, 1]")]
    Threshold(f64),
    #[error("false-positive rate needs at least one frame")]
    NoFrames,
    #[error("prediction sequences missing from ground truth: {}", .0.join(", "))]
    SequenceMismatch(Vec<String>),
    #[error("invalid AP range {0:?}: expected lo:step:hi with 0 < lo <= hi <= 1 and step > 0")]
    Range(String),
}

type Result<T> = std::result::Result<T, EvalError>;

/// COCO area buckets in square pixels.
pub const SMALL_AREA: (f64, f64) = (0.0, 32.0 * 32.0);
pub const MEDIUM_AREA: (f64, f64) = (32.0 * 32.0, 96.0 * 96.0);
pub const LARGE_AREA: (f64, f64) = (96.0 * 96.0, f64::INFINITY);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredMatch {
    /// Index into the frame's prediction list.
    pub index: usize,
    pub score: f64,
    pub gt: Option<usize>,
    pub iou: f64,
    pub ignored: bool,
}

/// Matching outcome for one frame at one IoU threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub iou_threshold: f64,
    /// Predictions in descending score order (lower index first on ties).
    pub preds: Vec<PredMatch>,
    pub gt_covered: Vec<bool>,
    pub gt_ignored: Vec<bool>,
}

impl MatchResult {
    pub fn true_positives(&self) -> usize {
        self.preds
            .iter()
            .filter(|p| !p.ignored && p.gt.is_some())
            .count()
    }

    pub fn false_positives(&self) -> usize {
        self.preds
            .iter()
            .filter(|p| !p.ignored && p.gt.is_none())
            .count()
    }

    pub fn num_gt(&self) -> usize {
        self.gt_ignored.iter().filter(|&&i| !i).count()
    }

    pub fn false_negatives(&self) -> usize {
        self.gt_covered
            .iter()
            .zip(&self.gt_ignored)
            .filter(|&(&c, &i)| !c && !i)
            .count()
    }
}

fn in_area(b: &BBox, area: Option<(f64, f64)>) -> bool {
    area.is_none_or(|(lo, hi)| {
        let a = b.area();
        a >= lo && a < hi
    })
}

/// Greedy score-descending matching of one frame.
pub fn match_frame(preds: &[BBox], gts: &[BBox], iou_thresh: f64) -> MatchResult {
    match_frame_in_area(preds, gts, iou_thresh, None)
}

/// [`match_frame`] restricted to ground truths whose area falls in `area`;
/// the rest are ignored, and so are predictions that match them or that are
/// unmatched and outside the bucket.
pub fn match_frame_in_area(
    preds: &[BBox],
    gts: &[BBox],
    iou_thresh: f64,
    area: Option<(f64, f64)>,
) -> MatchResult {
    let gt_ignored: Vec<bool> = gts.iter().map(|g| !in_area(g, area)).collect();
    let mut gt_covered = vec![false; gts.len()];
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        preds[b]
            .score()
            .partial_cmp(&preds[a].score())
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut out = Vec::with_capacity(preds.len());
    for i in order {
        let p = &preds[i];
        let mut best: Option<(usize, f64)> = None;
        // regular ground truths take precedence over ignored ones
        for want_ignored in [false, true] {
            for (g, gt) in gts.iter().enumerate() {
                if gt_covered[g] || gt_ignored[g] != want_ignored {
                    continue;
                }
                let v = iou(p, gt);
                if v >= iou_thresh && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((g, v));
                }
            }
            if best.is_some() {
                break;
            }
        }
        let (gt, v, ignored) = match best {
            Some((g, v)) => {
                gt_covered[g] = true;
                (Some(g), v, gt_ignored[g])
            }
            None => (None, 0.0, !in_area(p, area)),
        };
        out.push(PredMatch {
            index: i,
            score: p.score(),
            gt,
            iou: v,
            ignored,
        });
    }
    MatchResult {
        iou_threshold: iou_thresh,
        preds: out,
        gt_covered,
        gt_ignored,
    }
}

/// 101-point interpolated AP over matches pooled across frames.
pub fn average_precision(matches: &[MatchResult]) -> Result<f64> {
    let n_gt: usize = matches.iter().map(MatchResult::num_gt).sum();
    if n_gt == 0 {
        return Err(EvalError::NoGroundTruth);
    }
    let mut dets: Vec<(f64, bool)> = matches
        .iter()
        .flat_map(|m| m.preds.iter())
        .filter(|p| !p.ignored)
        .map(|p| (p.score, p.gt.is_some()))
        .collect();
    // stable: equal scores keep frame order
    dets.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));

    let mut tp = 0usize;
    let mut recall = Vec::with_capacity(dets.len());
    let mut precision = Vec::with_capacity(dets.len());
    for (k, &(_, hit)) in dets.iter().enumerate() {
        tp += usize::from(hit);
        recall.push(tp as f64 / n_gt as f64);
        precision.push(tp as f64 / (k + 1) as f64);
    }
    for k in (1..precision.len()).rev() {
        if precision[k] > precision[k - 1] {
            precision[k - 1] = precision[k];
        }
    }
    let sum: f64 = (0..=100)
        .map(|r| {
            let level = r as f64 / 100.0;
            let k = recall.partition_point(|&rc| rc < level);
            precision.get(k).copied().unwrap_or(0.0)
        })
        .sum();
    Ok(sum / 101.0)
}

/// `lo:step:hi` inclusive grid, e.g. `0.5:0.05:0.95`.
pub fn threshold_grid(lo: f64, step: f64, hi: f64) -> Result<Vec<f64>> {
    let spec = format!("{lo}:{step}:{hi}");
    if !(lo > 0.0 && lo <= hi && hi <= 1.0 && step > 0.0) {
        return Err(EvalError::Range(spec));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|i| ((lo + step * i as f64) * 1e6).round() / 1e6)
        .collect())
}

/// Parses `lo:step:hi`.
pub fn parse_threshold_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let nums: Option<Vec<f64>> = parts.iter().map(|p| p.trim().parse().ok()).collect();
    match nums.as_deref() {
        Some(&[lo, step, hi]) => threshold_grid(lo, step, hi),
        Some(&[single]) => threshold_grid(single, 1.0, single),
        _ => Err(EvalError::Range(s.to_string())),
    }
}

/// Per-frame pairing of predictions with ground truth.
#[derive(Debug, Clone)]
pub struct FramePair<'a> {
    pub sequence_id: &'a str,
    pub frame_index: u32,
    pub preds: &'a [BBox],
    pub gts: &'a [BBox],
}

/// Pairs frames by `(sequence id, frame index)`. Ground-truth frames come
/// first in file order, then prediction-only frames; a missing side counts
/// as empty. Predictions for sequences absent from the ground truth are an
/// error.
pub fn pair_frames<'a>(
    preds: &'a SequenceDataset,
    gts: &'a SequenceDataset,
) -> Result<Vec<FramePair<'a>>> {
    let gt_ids = gts.sequence_ids();
    let unknown: Vec<String> = preds
        .sequence_ids()
        .into_iter()
        .filter(|id| !gt_ids.contains(id))
        .map(str::to_string)
        .collect();
    if !unknown.is_empty() {
        return Err(EvalError::SequenceMismatch(unknown));
    }
    let pred_by_key: HashMap<(&str, u32), &FrameDetections> =
        preds.frames.iter().map(|f| (f.key(), f)).collect();
    let gt_keys: HashMap<(&str, u32), ()> = gts.frames.iter().map(|f| (f.key(), ())).collect();
    let mut out: Vec<FramePair> = gts
        .frames
        .iter()
        .map(|g| FramePair {
            sequence_id: &g.sequence_id,
            frame_index: g.frame_index,
            preds: pred_by_key.get(&g.key()).map_or(&[][..], |p| &p.boxes),
            gts: &g.boxes,
        })
        .collect();
    out.extend(
        preds
            .frames
            .iter()
            .filter(|p| !gt_keys.contains_key(&p.key()))
            .map(|p| FramePair {
                sequence_id: &p.sequence_id,
                frame_index: p.frame_index,
                preds: &p.boxes,
                gts: &[],
            }),
    );
    Ok(out)
}

fn validate_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(EvalError::EmptyThresholds);
    }
    if let Some(&t) = thresholds.iter().find(|&&t| !(t > 0.0 && t <= 1.0)) {
        return Err(EvalError::Threshold(t));
    }
    Ok(())
}

/// AP at one threshold over paired frames, optionally area-bucketed.
pub fn ap_at(pairs: &[FramePair], iou_thresh: f64, area: Option<(f64, f64)>) -> Result<f64> {
    let matches: Vec<MatchResult> = pairs
        .iter()
        .map(|p| match_frame_in_area(p.preds, p.gts, iou_thresh, area))
        .collect();
    average_precision(&matches)
}

/// Per-threshold AP and their mean.
pub fn ap_over_range(pairs: &[FramePair], thresholds: &[f64]) -> Result<(Vec<(f64, f64)>, f64)> {
    validate_thresholds(thresholds)?;
    let per = thresholds
        .iter()
        .map(|&t| ap_at(pairs, t, None).map(|ap| (t, ap)))
        .collect::<Result<Vec<_>>>()?;
    let mean = per.iter().map(|(_, ap)| ap).sum::<f64>() / per.len() as f64;
    Ok((per, mean))
}

fn mean_ap(pairs: &[FramePair], thresholds: &[f64], area: Option<(f64, f64)>) -> Option<f64> {
    let aps: Result<Vec<f64>> = thresholds.iter().map(|&t| ap_at(pairs, t, area)).collect();
    aps.ok().map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub thresholds: Vec<f64>,
    /// Predictions below this score are dropped for P/R/F1 and mean IoU.
    pub score_thresh: f64,
    /// IoU threshold of the P/R/F1 operating point.
    pub operating_iou: f64,
    /// Inclusive bounds of the sub-range mean, sampled every 0.05.
    pub subrange: (f64, f64),
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            thresholds: threshold_grid(0.5, 0.05, 0.95).expect("static grid"),
            score_thresh: 0.5,
            operating_iou: 0.5,
            subrange: (0.5, 0.75),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub ap_per_threshold: Vec<(f64, f64)>,
    pub ap_mean: f64,
    pub ap50: f64,
    pub ap75: f64,
    pub ap_subrange: f64,
    pub subrange: (f64, f64),
    pub ap_small: Option<f64>,
    pub ap_medium: Option<f64>,
    pub ap_large: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mean_iou: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Full report over a prediction/ground-truth dataset pair.
pub fn evaluate(preds: &SequenceDataset, gts: &SequenceDataset, cfg: &EvalConfig) -> Result<MetricsReport> {
    let pairs = pair_frames(preds, gts)?;
    evaluate_pairs(&pairs, cfg)
}

pub fn evaluate_pairs(pairs: &[FramePair], cfg: &EvalConfig) -> Result<MetricsReport> {
    let (ap_per_threshold, ap_mean) = ap_over_range(pairs, &cfg.thresholds)?;
    let ap50 = ap_at(pairs, 0.5, None)?;
    let ap75 = ap_at(pairs, 0.75, None)?;
    let (lo, hi) = cfg.subrange;
    let sub = threshold_grid(lo, 0.05, hi)?;
    let ap_subrange = sub
        .iter()
        .map(|&t| ap_at(pairs, t, None))
        .sum::<Result<f64>>()?
        / sub.len() as f64;

    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    let mut iou_sum = 0.0;
    for p in pairs {
        let kept: Vec<BBox> = p
            .preds
            .iter()
            .filter(|b| b.score() >= cfg.score_thresh)
            .copied()
            .collect();
        let m = match_frame(&kept, p.gts, cfg.operating_iou);
        tp += m.true_positives();
        fp += m.false_positives();
        fn_ += m.false_negatives();
        iou_sum += m.preds.iter().filter(|x| x.gt.is_some()).map(|x| x.iou).sum::<f64>();
    }
    let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
    let recall = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
    Ok(MetricsReport {
        ap_per_threshold,
        ap_mean,
        ap50,
        ap75,
        ap_subrange,
        subrange: cfg.subrange,
        ap_small: mean_ap(pairs, &cfg.thresholds, Some(SMALL_AREA)),
        ap_medium: mean_ap(pairs, &cfg.thresholds, Some(MEDIUM_AREA)),
        ap_large: mean_ap(pairs, &cfg.thresholds, Some(LARGE_AREA)),
        precision,
        recall,
        f1: f1_score(precision, recall),
        mean_iou: if tp > 0 { iou_sum / tp as f64 } else { 0.0 },
        tp,
        fp,
        fn_,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |v| format!("{v:.6}"))
}

impl MetricsReport {
    /// `name<TAB>value` lines, one metric per line.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for (t, ap) in &self.ap_per_threshold {
            let _ = writeln!(s, "AP@{t:.2}\t{ap:.6}");
        }
        let first = self.ap_per_threshold.first().map_or(0.0, |x| x.0);
        let last = self.ap_per_threshold.last().map_or(0.0, |x| x.0);
        let _ = writeln!(s, "AP@[{first:.2}:{last:.2}]\t{:.6}", self.ap_mean);
        let _ = writeln!(s, "AP_0.5\t{:.6}", self.ap50);
        let _ = writeln!(s, "AP_0.75\t{:.6}", self.ap75);
        let (lo, hi) = self.subrange;
        let _ = writeln!(s, "AP_{lo}-{hi}\t{:.6}", self.ap_subrange);
        let _ = writeln!(s, "AP_s\t{}", fmt_opt(self.ap_small));
        let _ = writeln!(s, "AP_m\t{}", fmt_opt(self.ap_medium));
        let _ = writeln!(s, "AP_l\t{}", fmt_opt(self.ap_large));
        let _ = writeln!(s, "precision\t{:.6}", self.precision);
        let _ = writeln!(s, "recall\t{:.6}", self.recall);
        let _ = writeln!(s, "f1\t{:.6}", self.f1);
        let _ = writeln!(s, "mean_iou\t{:.6}", self.mean_iou);
        let _ = writeln!(s, "tp\t{}", self.tp);
        let _ = writeln!(s, "fp\t{}", self.fp);
        let _ = writeln!(s, "fn\t{}", self.fn_);
        s
    }

    /// The five columns plotted against the suppression threshold sweep.
    pub fn sweep_columns(&self) -> [Option<f64>; 5] {
        [
            Some(self.ap_subrange),
            Some(self.ap50),
            Some(self.ap75),
            self.ap_medium,
            self.ap_large,
        ]
    }
}

/// Mean IoU between each frame's highest-scored prediction and its best
/// ground truth, over frames that have both. `None` when no frame does.
pub fn top1_mean_iou(pairs: &[FramePair]) -> Option<f64> {
    let ious: Vec<f64> = pairs
        .iter()
        .filter(|p| !p.gts.is_empty())
        .filter_map(|p| {
            let top = p.preds.iter().enumerate().max_by(|(i, a), (j, b)| {
                a.score()
                    .partial_cmp(&b.score())
                    .unwrap_or(Ordering::Equal)
                    .then(j.cmp(i))
            })?;
            Some(p.gts.iter().map(|g| iou(top.1, g)).fold(0.0, f64::max))
        })
        .collect();
    (!ious.is_empty()).then(|| ious.iter().sum::<f64>() / ious.len() as f64)
}

/// Hit/miss flags for every ground truth of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub sequence_id: String,
    pub frame_index: u32,
    pub hits: Vec<bool>,
}

/// Per-frame recall trace at a fixed IoU and score threshold, one row per
/// paired frame.
pub fn recall_trace(pairs: &[FramePair], iou_thresh: f64, score_thresh: f64) -> Vec<TraceRow> {
    pairs
        .iter()
        .map(|p| {
            let kept: Vec<BBox> = p
                .preds
                .iter()
                .filter(|b| b.score() >= score_thresh)
                .copied()
                .collect();
            TraceRow {
                sequence_id: p.sequence_id.to_string(),
                frame_index: p.frame_index,
                hits: match_frame(&kept, p.gts, iou_thresh).gt_covered,
            }
        })
        .collect()
}

pub fn trace_to_tsv(rows: &[TraceRow]) -> String {
    let mut s = String::from("sequence\tframe\tn_gt\tn_hit\thits\n");
    for r in rows {
        let flags: Vec<&str> = r.hits.iter().map(|&h| if h { "1" } else { "0" }).collect();
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}",
            r.sequence_id,
            r.frame_index,
            r.hits.len(),
            r.hits.iter().filter(|&&h| h).count(),
            flags.join(",")
        );
    }
    s
}

/// False-positive statistics over frames known to contain no object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativeReport {
    pub n_frames: usize,
    pub n_fp_boxes: usize,
    pub n_flagged_frames: usize,
    /// Fraction of frames with at least one box at or above the threshold.
    pub rate: f64,
    /// Boxes per frame.
    pub box_rate: f64,
}

impl NegativeReport {
    pub fn to_tsv(&self) -> String {
        format!(
            "negative_frames\t{}\nfalse_positive_boxes\t{}\nflagged_frames\t{}\nfalse_positive_rate\t{:.6}\nfalse_positive_boxes_per_frame\t{:.6}\n",
            self.n_frames, self.n_fp_boxes, self.n_flagged_frames, self.rate, self.box_rate
        )
    }
}

pub fn false_positive_rate(frames: &[FrameDetections], score_thresh: f64) -> Result<NegativeReport> {
    if frames.is_empty() {
        return Err(EvalError::NoFrames);
    }
    let counts: Vec<usize> = frames
        .iter()
        .map(|f| f.boxes.iter().filter(|b| b.score() >= score_thresh).count())
        .collect();
    let n_frames = frames.len();
    let n_fp_boxes: usize = counts.iter().sum();
    let n_flagged_frames = counts.iter().filter(|&&c| c > 0).count();
    Ok(NegativeReport {
        n_frames,
        n_fp_boxes,
        n_flagged_frames,
        rate: n_flagged_frames as f64 / n_frames as f64,
        box_rate: n_fp_boxes as f64 / n_frames as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn b(x1: f64, y1: f64, x2: f64, y2: f64, s: f64) -> BBox {
        BBox::new(x1, y1, x2, y2, s).unwrap()
    }

    #[test]
    fn match_examples() {
        let g = b(0.0, 0.0, 10.0, 10.0, 1.0);
        let m = match_frame(&[b(0.0, 0.0, 10.0, 10.0, 0.9)], &[g], 0.5);
        assert_eq!((m.true_positives(), m.false_positives(), m.false_negatives()), (1, 0, 0));

        let m = match_frame(&[], &[g, g], 0.5);
        assert_eq!(m.false_negatives(), 2);

        let preds = [b(50.0, 50.0, 60.0, 60.0, 0.9), b(0.0, 0.0, 10.0, 10.0, 0.7)];
        let m = match_frame(&preds, &[g], 0.5);
        assert_eq!((m.true_positives(), m.false_positives()), (1, 1));
        assert_eq!(m.preds[0].index, 0);
        assert_eq!(m.preds[0].gt, None);
        assert_eq!(m.preds[1].gt, Some(0));
    }

    #[test]
    fn each_gt_matched_once_and_best_iou_wins() {
        let g1 = b(0.0, 0.0, 10.0, 10.0, 1.0);
        let g2 = b(1.0, 0.0, 11.0, 10.0, 1.0);
        let p = b(1.0, 0.0, 11.0, 10.0, 0.9);
        let m = match_frame(&[p, p.rescored(0.8).unwrap()], &[g1, g2], 0.5);
        assert_eq!(m.preds[0].gt, Some(1));
        assert_eq!(m.preds[1].gt, Some(0));
        let m = match_frame(&[p, p.rescored(0.8).unwrap(), p.rescored(0.7).unwrap()], &[g2], 0.5);
        assert_eq!(m.true_positives(), 1);
        assert_eq!(m.false_positives(), 2);
    }

    #[test]
    fn ap_examples() {
        let g = b(0.0, 0.0, 10.0, 10.0, 1.0);
        let perfect = match_frame(&[b(0.0, 0.0, 10.0, 10.0, 0.8)], &[g], 0.5);
        assert_eq!(average_precision(&[perfect]).unwrap(), 1.0);

        let preds = [b(50.0, 50.0, 60.0, 60.0, 0.9), b(0.0, 0.0, 10.0, 10.0, 0.7)];
        let m = match_frame(&preds, &[g], 0.5);
        assert_eq!(average_precision(&[m]).unwrap(), 0.5);

        let miss = match_frame(&[b(50.0, 50.0, 60.0, 60.0, 0.9)], &[g], 0.5);
        assert_eq!(average_precision(&[miss]).unwrap(), 0.0);

        let none = match_frame(&[b(50.0, 50.0, 60.0, 60.0, 0.9)], &[], 0.5);
        assert_eq!(average_precision(&[none]), Err(EvalError::NoGroundTruth));
    }

    #[test]
    fn ap_partial_recall_hand_curve() {
        // two GTs, predictions TP (0.9), FP (0.8), TP (0.7):
        // recall 0.5, 0.5, 1.0; precision 1, 0.5, 2/3; envelope 1, 2/3, 2/3
        // samples r <= 0.5 -> 1 (51 points), r > 0.5 -> 2/3 (50 points)
        let g1 = b(0.0, 0.0, 10.0, 10.0, 1.0);
        let g2 = b(100.0, 0.0, 110.0, 10.0, 1.0);
        let preds = [
            b(0.0, 0.0, 10.0, 10.0, 0.9),
            b(50.0, 50.0, 60.0, 60.0, 0.8),
            b(100.0, 0.0, 110.0, 10.0, 0.7),
        ];
        let m = match_frame(&preds, &[g1, g2], 0.5);
        let expected = (51.0 + 50.0 * 2.0 / 3.0) / 101.0;
        assert_abs_diff_eq!(average_precision(&[m]).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn grids() {
        let g = threshold_grid(0.5, 0.05, 0.95).unwrap();
        assert_eq!(g.len(), 10);
        assert_eq!(g[0], 0.5);
        assert_eq!(g[9], 0.95);
        assert_eq!(parse_threshold_range("0.5:0.05:0.75").unwrap().len(), 6);
        assert_eq!(parse_threshold_range("0.5").unwrap(), vec![0.5]);
        assert!(parse_threshold_range("0.9:0.1:0.5").is_err());
        assert!(parse_threshold_range("a:b").is_err());
    }

    #[test]
    fn single_threshold_range_equals_ap() {
        let gt = SequenceDataset::new(vec![FrameDetections::new("s", 0, vec![b(0.0, 0.0, 10.0, 10.0, 1.0)])]);
        let pr = SequenceDataset::new(vec![FrameDetections::new("s", 0, vec![b(1.0, 0.0, 11.0, 10.0, 0.6)])]);
        let pairs = pair_frames(&pr, &gt).unwrap();
        let (per, mean) = ap_over_range(&pairs, &[0.5]).unwrap();
        assert_eq!(per, vec![(0.5, ap_at(&pairs, 0.5, None).unwrap())]);
        assert_eq!(mean, per[0].1);
        assert_eq!(ap_over_range(&pairs, &[]), Err(EvalError::EmptyThresholds));
    }

    #[test]
    fn sequence_mismatch_lists_ids() {
        let gt = SequenceDataset::new(vec![FrameDetections::new("a", 0, vec![])]);
        let pr = SequenceDataset::new(vec![
            FrameDetections::new("b", 0, vec![]),
            FrameDetections::new("c", 0, vec![]),
        ]);
        let err = pair_frames(&pr, &gt).unwrap_err();
        assert_eq!(err, EvalError::SequenceMismatch(vec!["b".into(), "c".into()]));
        assert!(err.to_string().contains("b, c"));
    }

    #[test]
    fn report_fields_consistent() {
        let gt = SequenceDataset::new(vec![
            FrameDetections::new("s", 0, vec![b(0.0, 0.0, 40.0, 40.0, 1.0)]),
            FrameDetections::new("s", 1, vec![b(0.0, 0.0, 40.0, 40.0, 1.0)]),
        ]);
        let pr = SequenceDataset::new(vec![
            FrameDetections::new("s", 0, vec![b(2.0, 0.0, 42.0, 40.0, 0.9), b(200.0, 0.0, 240.0, 40.0, 0.8)]),
            FrameDetections::new("s", 1, vec![b(0.0, 0.0, 40.0, 40.0, 0.3)]),
        ]);
        let r = evaluate(&pr, &gt, &EvalConfig::default()).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_), (1, 1, 1));
        assert_eq!(r.precision, r.tp as f64 / (r.tp + r.fp) as f64);
        assert_eq!(r.recall, r.tp as f64 / (r.tp + r.fn_) as f64);
        assert_abs_diff_eq!(r.f1, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.mean_iou, 38.0 / 42.0, epsilon = 1e-12);
        assert!(r.ap_small.is_none());
        assert!(r.ap_medium.is_some());
        assert!(r.ap_large.is_none());
        let tsv = r.to_tsv();
        assert!(tsv.contains("AP_0.5\t"));
        assert!(tsv.contains("AP_0.5-0.75\t"));
        assert!(tsv.contains("AP_s\tnan"));
        assert!(tsv.lines().all(|l| l.split('\t').count() == 2));
    }

    #[test]
    fn f1_zero_when_both_zero() {
        assert_eq!(f1_score(0.0, 0.0), 0.0);
        assert_abs_diff_eq!(f1_score(0.5, 1.0), 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn area_bucket_ignores_out_of_range() {
        let small_gt = b(0.0, 0.0, 10.0, 10.0, 1.0);
        let big_gt = b(100.0, 100.0, 200.0, 200.0, 1.0);
        let preds = [b(0.0, 0.0, 10.0, 10.0, 0.9), b(100.0, 100.0, 200.0, 200.0, 0.8)];
        let m = match_frame_in_area(&preds, &[small_gt, big_gt], 0.5, Some(SMALL_AREA));
        assert_eq!(m.num_gt(), 1);
        assert_eq!(m.true_positives(), 1);
        assert_eq!(m.false_positives(), 0);
        assert_eq!(average_precision(&[m]).unwrap(), 1.0);
    }

    #[test]
    fn trace_examples() {
        let g = b(0.0, 0.0, 10.0, 10.0, 1.0);
        let gt = SequenceDataset::new((0..4).map(|i| FrameDetections::new("s", i, vec![g])).collect());
        let hit_all = gt.map_frames(|bs| bs.iter().map(|x| x.rescored(0.9).unwrap()).collect());
        let pairs = pair_frames(&hit_all, &gt).unwrap();
        assert!(recall_trace(&pairs, 0.5, 0.5).iter().all(|r| r.hits == vec![true]));

        let empty = SequenceDataset::default();
        let pairs = pair_frames(&empty, &gt).unwrap();
        assert!(recall_trace(&pairs, 0.5, 0.5).iter().all(|r| r.hits == vec![false]));

        let alternating = SequenceDataset::new(
            (0..4)
                .map(|i| FrameDetections::new("s", i, if i % 2 == 0 { vec![g.rescored(0.9).unwrap()] } else { vec![] }))
                .collect(),
        );
        let pairs = pair_frames(&alternating, &gt).unwrap();
        let hits: Vec<bool> = recall_trace(&pairs, 0.5, 0.5).iter().map(|r| r.hits[0]).collect();
        assert_eq!(hits, vec![true, false, true, false]);
        assert!(trace_to_tsv(&recall_trace(&pairs, 0.5, 0.5)).contains("s\t1\t1\t0\t0"));
    }

    #[test]
    fn negative_rate_examples() {
        assert_eq!(false_positive_rate(&[], 0.5), Err(EvalError::NoFrames));
        let empty: Vec<FrameDetections> = (0..5).map(|i| FrameDetections::new("n", i, vec![])).collect();
        assert_eq!(false_positive_rate(&empty, 0.5).unwrap().rate, 0.0);
        let full: Vec<FrameDetections> = (0..5)
            .map(|i| FrameDetections::new("n", i, vec![b(0.0, 0.0, 1.0, 1.0, 0.9)]))
            .collect();
        assert_eq!(false_positive_rate(&full, 0.5).unwrap().rate, 1.0);
        assert_eq!(false_positive_rate(&full, 0.95).unwrap().rate, 0.0);
    }
}
