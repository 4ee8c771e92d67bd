//! Browser demo. Every export takes a JSON request and returns a JSON view.
//!
//! The plain functions ([`frame_view`], [`discrepancy_curve`], [`delta_sweep`])
//! hold the logic and run on the host; the `*_json` wrappers are what the page
//! calls through wasm-bindgen.

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use tsdetect::eval::{evaluate, pair_frames, top1_mean_iou, EvalConfig};
use tsdetect::geom::{iou, BBox, SequenceDataset};
use tsdetect::pac::{build_graph, classical_nms, corrections, nms_indices, pac_rescore, pac_select, PacParams};
use tsdetect::synth::{discrepancy_fraction, generate, SynthConfig};
use wasm_bindgen::prelude::*;

const SCENE: u32 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacKnobs {
    pub theta: f64,
    pub delta: f64,
    pub nms_iou: f64,
}

impl Default for PacKnobs {
    fn default() -> Self {
        let p = PacParams::default();
        Self {
            theta: p.theta(),
            delta: p.delta(),
            nms_iou: p.nms_iou(),
        }
    }
}

impl PacKnobs {
    fn params(&self) -> Result<PacParams, String> {
        PacParams::new(self.theta, self.delta, self.nms_iou).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameRequest {
    pub seed: u64,
    pub rho: f64,
    pub n_candidates: u32,
    pub sigma_box: f64,
    #[serde(flatten)]
    pub pac: PacKnobs,
}

impl Default for FrameRequest {
    fn default() -> Self {
        Self {
            seed: 1,
            rho: 0.0,
            n_candidates: 8,
            sigma_box: 0.1,
            pac: PacKnobs::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxView {
    pub corners: [f64; 4],
    pub score: f64,
    pub enhancement: f64,
    pub suppression: f64,
    pub corrected: f64,
    pub iou_gt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameView {
    pub width: u32,
    pub height: u32,
    pub gt: [f64; 4],
    pub candidates: Vec<BoxView>,
    pub pac_kept: Vec<usize>,
    pub nms_kept: Vec<usize>,
    /// IoU with the ground truth of the top box after PAC and after NMS.
    pub pac_top_iou: Option<f64>,
    pub nms_top_iou: Option<f64>,
}

fn scene(seed: u64, rho: f64, n_candidates: u32, sigma_box: f64, n_frames: u32) -> SynthConfig {
    SynthConfig {
        n_frames,
        image_w: SCENE,
        image_h: SCENE,
        start: [SCENE as f64 * 0.4, SCENE as f64 * 0.6],
        velocity: [0.2, -0.1],
        size_range: [48.0, 96.0],
        rho,
        n_candidates,
        sigma_box,
        seed,
        ..SynthConfig::default()
    }
}

/// One frame of candidates around a single ground truth, with PAC terms.
pub fn frame_view(req: &FrameRequest) -> Result<FrameView, String> {
    let params = req.pac.params()?;
    let cfg = SynthConfig {
        occlusion_prob: 0.0,
        dropout_prob: 0.0,
        clutter_prob: 0.0,
        ..scene(req.seed, req.rho, req.n_candidates, req.sigma_box, 1)
    };
    let (gt, cand) = generate(&cfg).map_err(|e| e.to_string())?;
    let g = gt.frames[0].boxes[0];
    let boxes = &cand.frames[0].boxes;
    let graph = build_graph(boxes, params.theta()).map_err(|e| e.to_string())?;
    let corr = corrections(&graph, params.delta()).map_err(|e| e.to_string())?;
    let candidates = boxes
        .iter()
        .zip(&corr)
        .map(|(b, c)| BoxView {
            corners: b.corners(),
            score: c.original,
            enhancement: c.enhancement,
            suppression: c.suppression,
            corrected: c.corrected,
            iou_gt: iou(b, &g),
        })
        .collect();
    let pac_kept = nms_indices(&pac_rescore(boxes, &params), params.nms_iou());
    let nms_kept = nms_indices(boxes, params.nms_iou());
    Ok(FrameView {
        width: cfg.image_w,
        height: cfg.image_h,
        gt: g.corners(),
        candidates,
        pac_top_iou: pac_kept.first().map(|&i| iou(&boxes[i], &g)),
        nms_top_iou: nms_kept.first().map(|&i| iou(&boxes[i], &g)),
        pac_kept,
        nms_kept,
    })
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveRequest {
    pub rhos: Vec<f64>,
    pub n_frames: u32,
    pub seed: u64,
    pub n_candidates: u32,
    #[serde(flatten)]
    pub pac: PacKnobs,
}

impl Default for CurveRequest {
    fn default() -> Self {
        Self {
            rhos: (0..=8).map(|i| -1.0 + 0.25 * i as f64).collect(),
            n_frames: 200,
            seed: 7,
            n_candidates: 8,
            pac: PacKnobs::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub rho: f64,
    /// Fraction of frames whose best-IoU candidate is not the top-scored one.
    pub discrepancy: f64,
    pub pac_top1_iou: f64,
    pub nms_top1_iou: f64,
}

fn top1(pred: &SequenceDataset, gt: &SequenceDataset) -> Result<f64, String> {
    let pairs = pair_frames(pred, gt).map_err(|e| e.to_string())?;
    Ok(top1_mean_iou(&pairs).unwrap_or(0.0))
}

/// Top-1 IoU of PAC and NMS as the score/IoU correlation varies.
pub fn discrepancy_curve(req: &CurveRequest) -> Result<Vec<CurvePoint>, String> {
    let params = req.pac.params()?;
    req.rhos
        .iter()
        .map(|&rho| {
            let cfg = scene(req.seed, rho, req.n_candidates, 0.1, req.n_frames);
            let (gt, cand) = generate(&cfg).map_err(|e| e.to_string())?;
            let pac = cand.map_frames(|b| pac_select(b, &params));
            let nms = cand.map_frames(|b| classical_nms(b, params.nms_iou()));
            Ok(CurvePoint {
                rho,
                discrepancy: discrepancy_fraction(&gt, &cand),
                pac_top1_iou: top1(&pac, &gt)?,
                nms_top1_iou: top1(&nms, &gt)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepRequest {
    pub deltas: Vec<f64>,
    pub n_frames: u32,
    pub seed: u64,
    pub rho: f64,
    pub theta: f64,
    pub nms_iou: f64,
}

impl Default for SweepRequest {
    fn default() -> Self {
        let p = PacKnobs::default();
        Self {
            deltas: vec![0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95],
            n_frames: 200,
            seed: 7,
            rho: 0.0,
            theta: p.theta,
            nms_iou: p.nms_iou,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// `None` for the plain NMS baseline.
    pub delta: Option<f64>,
    pub ap_subrange: f64,
    pub ap50: f64,
    pub ap75: f64,
    pub ap_medium: Option<f64>,
    pub ap_large: Option<f64>,
}

/// AP of PAC at each delta, preceded by the plain NMS baseline row.
pub fn delta_sweep(req: &SweepRequest) -> Result<Vec<SweepRow>, String> {
    let params: Vec<PacParams> = req
        .deltas
        .iter()
        .map(|&d| PacParams::new(req.theta, d, req.nms_iou).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let cfg = scene(req.seed, req.rho, 8, 0.1, req.n_frames);
    let (gt, cand) = generate(&cfg).map_err(|e| e.to_string())?;
    let ecfg = EvalConfig::default();
    let row = |delta: Option<f64>, pred: &SequenceDataset| -> Result<SweepRow, String> {
        let r = evaluate(pred, &gt, &ecfg).map_err(|e| e.to_string())?;
        Ok(SweepRow {
            delta,
            ap_subrange: r.ap_subrange,
            ap50: r.ap50,
            ap75: r.ap75,
            ap_medium: r.ap_medium,
            ap_large: r.ap_large,
        })
    };
    let mut rows = vec![row(None, &cand.map_frames(|b| classical_nms(b, req.nms_iou)))?];
    for p in &params {
        rows.push(row(Some(p.delta()), &cand.map_frames(|b: &[BBox]| pac_select(b, p)))?);
    }
    Ok(rows)
}

fn call<Q, R>(request: &str, f: impl FnOnce(&Q) -> Result<R, String>) -> Result<String, String>
where
    Q: DeserializeOwned + Default,
    R: Serialize,
{
    let req = if request.trim().is_empty() {
        Q::default()
    } else {
        serde_json::from_str(request).map_err(|e| e.to_string())?
    };
    serde_json::to_string(&f(&req)?).map_err(|e| e.to_string())
}

pub fn frame_view_json(request: &str) -> Result<String, String> {
    call(request, frame_view)
}

pub fn discrepancy_curve_json(request: &str) -> Result<String, String> {
    call(request, discrepancy_curve)
}

pub fn delta_sweep_json(request: &str) -> Result<String, String> {
    call(request, delta_sweep)
}

#[wasm_bindgen(js_name = frameView)]
pub fn js_frame_view(request: &str) -> Result<String, JsError> {
    frame_view_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = discrepancyCurve)]
pub fn js_discrepancy_curve(request: &str) -> Result<String, JsError> {
    discrepancy_curve_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = deltaSweep)]
pub fn js_delta_sweep(request: &str) -> Result<String, JsError> {
    delta_sweep_json(request).map_err(|e| JsError::new(&e))
}
