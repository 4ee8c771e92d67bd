//! Position-aware clustering (PAC) and the classical suppression baselines.
//!
//! PAC recalibrates candidate confidences from their spatial neighbourhood
//! before the final greedy selection. For a candidate `a` with score `P(a)`:
//!
//! * neighbours are candidates with `IoU > theta`;
//! * low neighbours `L` have `IoU > delta` and a strictly lower score;
//! * high neighbours `H` have `IoU > delta` and a strictly higher score;
//! * enhancement `E = Q/(Q+1) * (1 - P(a)) * max_{L} P`, with `Q = |L|`;
//! * suppression `S = P(a) * IoU(a, h*)`, `h*` the highest-scored member of `H`;
//! * corrected score `P^(a) = P(a) + E - S`.
//!
//! All corrections are computed from the original scores in one pass.
//! [`pac_select`] then runs classical NMS on the corrected scores.

use std::cmp::Ordering;

use thiserror::Error;

use crate::geom::{iou, BBox};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PacError {
    #[error("theta must lie in (0, 1), got {0}")]
    Theta(f64),
    #[error("delta must lie in (theta, 1) = ({theta}, 1), got {delta}")]
    Delta { theta: f64, delta: f64 },
    #[error("NMS IoU threshold must lie in (0, 1), got {0}")]
    NmsIou(f64),
    #[error("soft-NMS sigma must be positive, got {0}")]
    Sigma(f64),
    #[error("node index {index} out of range for graph with {len} nodes")]
    Index { index: usize, len: usize },
}

/// Thresholds for PAC rescoring and the terminal NMS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacParams {
    theta: f64,
    delta: f64,
    nms_iou: f64,
}

impl PacParams {
    pub const DEFAULT_THETA: f64 = 0.5;
    pub const DEFAULT_DELTA: f64 = 0.8;
    pub const DEFAULT_NMS_IOU: f64 = 0.65;

    pub fn new(theta: f64, delta: f64, nms_iou: f64) -> Result<Self, PacError> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(PacError::Theta(theta));
        }
        if !(delta > theta && delta < 1.0) {
            return Err(PacError::Delta { theta, delta });
        }
        if !(nms_iou > 0.0 && nms_iou < 1.0) {
            return Err(PacError::NmsIou(nms_iou));
        }
        Ok(Self {
            theta,
            delta,
            nms_iou,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn nms_iou(&self) -> f64 {
        self.nms_iou
    }
}

impl Default for PacParams {
    fn default() -> Self {
        Self {
            theta: Self::DEFAULT_THETA,
            delta: Self::DEFAULT_DELTA,
            nms_iou: Self::DEFAULT_NMS_IOU,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub iou: f64,
}

/// IoU-thresholded neighbour graph over one frame's candidates.
#[derive(Debug, Clone)]
pub struct AdjacencyGraph {
    nodes: Vec<BBox>,
    edges: Vec<Edge>,
    // per node: (neighbour index, IoU), ascending neighbour index
    adjacency: Vec<Vec<(usize, f64)>>,
    theta: f64,
}

impl AdjacencyGraph {
    pub fn nodes(&self) -> &[BBox] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Neighbours of node `i` with their IoU.
    pub fn neighbors(&self, i: usize) -> Result<&[(usize, f64)], PacError> {
        self.adjacency
            .get(i)
            .map(Vec::as_slice)
            .ok_or(PacError::Index {
                index: i,
                len: self.nodes.len(),
            })
    }
}

/// Builds the neighbour graph: an edge joins every pair with `IoU > theta`.
pub fn build_graph(boxes: &[BBox], theta: f64) -> Result<AdjacencyGraph, PacError> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(PacError::Theta(theta));
    }
    let n = boxes.len();
    let mut edges = Vec::new();
    let mut adjacency = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = iou(&boxes[i], &boxes[j]);
            if v > theta {
                edges.push(Edge { a: i, b: j, iou: v });
                adjacency[i].push((j, v));
                adjacency[j].push((i, v));
            }
        }
    }
    for list in &mut adjacency {
        list.sort_by_key(|&(j, _)| j);
    }
    Ok(AdjacencyGraph {
        nodes: boxes.to_vec(),
        edges,
        adjacency,
        theta,
    })
}

/// Connected components, each sorted ascending, ordered by smallest member.
pub fn connected_components(g: &AdjacencyGraph) -> Vec<Vec<usize>> {
    let n = g.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut comp = Vec::new();
        while let Some(u) = stack.pop() {
            comp.push(u);
            for &(v, _) in &g.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Low and high neighbour sets of node `i` (ascending indices).
pub fn low_high_neighbors(
    g: &AdjacencyGraph,
    i: usize,
    delta: f64,
) -> Result<(Vec<usize>, Vec<usize>), PacError> {
    if !(delta >= g.theta && delta < 1.0) {
        return Err(PacError::Delta {
            theta: g.theta,
            delta,
        });
    }
    let p = g
        .nodes
        .get(i)
        .ok_or(PacError::Index {
            index: i,
            len: g.len(),
        })?
        .score();
    let mut low = Vec::new();
    let mut high = Vec::new();
    for &(j, v) in &g.adjacency[i] {
        if v <= delta {
            continue;
        }
        let pj = g.nodes[j].score();
        if pj < p {
            low.push(j);
        } else if pj > p {
            high.push(j);
        }
    }
    Ok((low, high))
}

/// Enhancement term for node `i`. Zero when it has no low neighbours.
pub fn enhancement(g: &AdjacencyGraph, i: usize, delta: f64) -> Result<f64, PacError> {
    let (low, _) = low_high_neighbors(g, i, delta)?;
    Ok(enhancement_from(
        g.nodes[i].score(),
        low.iter().map(|&j| g.nodes[j].score()),
    ))
}

/// Suppression term for node `i`. Zero when it has no high neighbours.
pub fn suppression(g: &AdjacencyGraph, i: usize, delta: f64) -> Result<f64, PacError> {
    let (_, high) = low_high_neighbors(g, i, delta)?;
    let iou_of = |j: usize| {
        g.adjacency[i]
            .iter()
            .find(|&&(k, _)| k == j)
            .map(|&(_, v)| v)
            .unwrap_or(0.0)
    };
    Ok(suppression_from(
        g.nodes[i].score(),
        high.iter().map(|&j| (g.nodes[j].score(), iou_of(j))),
    ))
}

fn enhancement_from(p: f64, low_scores: impl Iterator<Item = f64>) -> f64 {
    let (q, best) = low_scores.fold((0usize, 0.0f64), |(q, m), s| (q + 1, m.max(s)));
    if q == 0 {
        return 0.0;
    }
    let q = q as f64;
    q / (q + 1.0) * (1.0 - p) * best
}

// Among equally top-scored high neighbours the largest IoU wins, which keeps
// the result independent of input order.
fn suppression_from(p: f64, high: impl Iterator<Item = (f64, f64)>) -> f64 {
    let best = high.fold(None::<(f64, f64)>, |acc, (s, v)| match acc {
        None => Some((s, v)),
        Some((bs, bv)) => {
            if s > bs || (s == bs && v > bv) {
                Some((s, v))
            } else {
                Some((bs, bv))
            }
        }
    });
    best.map_or(0.0, |(_, v)| p * v)
}

/// Per-node correction terms, exposed for diagnostics and plotting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correction {
    pub original: f64,
    pub enhancement: f64,
    pub suppression: f64,
    pub corrected: f64,
}

/// Computes `E`, `S` and `P^` for every node of `g` in one simultaneous pass.
pub fn corrections(g: &AdjacencyGraph, delta: f64) -> Result<Vec<Correction>, PacError> {
    if !(delta >= g.theta && delta < 1.0) {
        return Err(PacError::Delta {
            theta: g.theta,
            delta,
        });
    }
    Ok((0..g.len())
        .map(|i| {
            let p = g.nodes[i].score();
            let close = g.adjacency[i].iter().filter(|&&(_, v)| v > delta);
            let e = enhancement_from(
                p,
                close
                    .clone()
                    .map(|&(j, _)| g.nodes[j].score())
                    .filter(|&s| s < p),
            );
            let s = suppression_from(
                p,
                close
                    .map(|&(j, v)| (g.nodes[j].score(), v))
                    .filter(|&(sj, _)| sj > p),
            );
            Correction {
                original: p,
                enhancement: e,
                suppression: s,
                corrected: (p + e - s).clamp(0.0, 1.0),
            }
        })
        .collect())
}

/// Returns the same boxes, in the same order, carrying PAC-corrected scores.
pub fn pac_rescore(boxes: &[BBox], params: &PacParams) -> Vec<BBox> {
    // params are validated on construction, so graph building cannot fail
    let g = build_graph(boxes, params.theta).expect("validated theta");
    let corr = corrections(&g, params.delta).expect("validated delta");
    boxes
        .iter()
        .zip(corr)
        .map(|(b, c)| b.with_clamped_score(c.corrected))
        .collect()
}

/// Box indices sorted by descending score; equal scores keep input order.
fn score_order(boxes: &[BBox]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| {
        boxes[b]
            .score()
            .partial_cmp(&boxes[a].score())
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Greedy NMS. Kept boxes are returned in selection (descending score) order.
pub fn classical_nms(boxes: &[BBox], iou_thresh: f64) -> Vec<BBox> {
    nms_indices(boxes, iou_thresh)
        .into_iter()
        .map(|i| boxes[i])
        .collect()
}

/// Indices kept by [`classical_nms`], in selection order.
pub fn nms_indices(boxes: &[BBox], iou_thresh: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for i in score_order(boxes) {
        if kept
            .iter()
            .all(|&k| iou(&boxes[k], &boxes[i]) <= iou_thresh)
        {
            kept.push(i);
        }
    }
    kept
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SoftNmsMode {
    Linear,
    Gaussian,
}

/// Soft-NMS. Returns every input box, in input order, with decayed scores.
///
/// Linear mode multiplies by `1 - IoU` when `IoU > iou_thresh`; gaussian
/// mode multiplies by `exp(-IoU^2 / sigma)` unconditionally.
pub fn soft_nms(
    boxes: &[BBox],
    iou_thresh: f64,
    mode: SoftNmsMode,
    sigma: f64,
) -> Result<Vec<BBox>, PacError> {
    if !(sigma > 0.0) {
        return Err(PacError::Sigma(sigma));
    }
    let mut scores: Vec<f64> = boxes.iter().map(BBox::score).collect();
    let mut remaining: Vec<usize> = (0..boxes.len()).collect();
    while !remaining.is_empty() {
        // current maximum, lower index on ties
        let (pos, &top) = remaining
            .iter()
            .enumerate()
            .max_by(|(_, &a), (_, &b)| {
                scores[a]
                    .partial_cmp(&scores[b])
                    .unwrap_or(Ordering::Equal)
                    .then(b.cmp(&a))
            })
            .expect("non-empty");
        remaining.swap_remove(pos);
        for &j in &remaining {
            let v = iou(&boxes[top], &boxes[j]);
            let decay = match mode {
                SoftNmsMode::Linear if v > iou_thresh => 1.0 - v,
                SoftNmsMode::Linear => 1.0,
                SoftNmsMode::Gaussian => (-(v * v) / sigma).exp(),
            };
            scores[j] *= decay;
        }
    }
    Ok(boxes
        .iter()
        .zip(scores)
        .map(|(b, s)| b.with_clamped_score(s))
        .collect())
}

/// PAC rescoring followed by classical NMS on the corrected scores.
pub fn pac_select(boxes: &[BBox], params: &PacParams) -> Vec<BBox> {
    classical_nms(&pac_rescore(boxes, params), params.nms_iou)
}
