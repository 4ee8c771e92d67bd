//! Global temporal-aware convolution.
//!
//! A 2D convolution whose weights and biases are recalibrated for every
//! frame from the recent feature history:
//!
//! ```text
//! S     = BN(ReLU(F_gap(GAP(X^)) + F_sap(SAP(X^))))     X^ = last k frames
//! a_w   = 1 + F_w(S)[newest],  a_b = 1 + F_b(S)[newest]
//! W'[o] = W[o] * a_w[o],       b'[o] = b[o] * a_b[o]
//! out   = conv2d(x_t, W', b')
//! ```
//!
//! `F_gap`/`F_sap` are kernel-1 3D convolutions over the stacked pooled
//! frames, `F_w`/`F_b` are `[3, 1, 1]` temporal convolutions. With zero
//! `F_w`/`F_b` the layer is exactly the base convolution.

use std::collections::VecDeque;

use crate::tensor::{
    batchnorm_inference, conv2d, conv3d, gap, relu, sap, BatchNorm, ConvParams, Tensor,
    TensorError,
};

type Result<T> = std::result::Result<T, TensorError>;

/// Default context length (current frame plus three predecessors).
pub const DEFAULT_SEQUENCE_LEN: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct GtConvLayer {
    pub base: ConvParams,
    pub f_agg_gap: ConvParams,
    pub f_agg_sap: ConvParams,
    pub bn: BatchNorm,
    pub f_w: ConvParams,
    pub f_b: ConvParams,
    pub sap_attn: ConvParams,
}

impl GtConvLayer {
    pub fn new(
        base: ConvParams,
        f_agg_gap: ConvParams,
        f_agg_sap: ConvParams,
        bn: BatchNorm,
        f_w: ConvParams,
        f_b: ConvParams,
        sap_attn: ConvParams,
    ) -> Result<Self> {
        let layer = Self {
            base,
            f_agg_gap,
            f_agg_sap,
            bn,
            f_w,
            f_b,
            sap_attn,
        };
        layer.validate()?;
        Ok(layer)
    }

    fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(TensorError::Invalid(m));
        if self.base.weight.rank() != 4 {
            return invalid(format!("gtconv base must be 2D, got {:?}", self.base.weight.dims()));
        }
        let cin = self.base.in_channels();
        let cout = self.base.out_channels();
        for (name, p) in [("f_agg_gap", &self.f_agg_gap), ("f_agg_sap", &self.f_agg_sap)] {
            let d = p.weight.dims();
            if d.len() != 5 || d[1] != cin || d[2..] != [1, 1, 1] {
                return invalid(format!(
                    "gtconv {name} must be [Cs, {cin}, 1, 1, 1], got {d:?}"
                ));
            }
        }
        let cs = self.f_agg_gap.out_channels();
        if self.f_agg_sap.out_channels() != cs || self.bn.channels() != cs {
            return invalid(format!(
                "gtconv aggregation branches and batchnorm must share {cs} channels"
            ));
        }
        for (name, p) in [("f_w", &self.f_w), ("f_b", &self.f_b)] {
            let d = p.weight.dims();
            if d.len() != 5 || d[0] != cout || d[1] != cs || d[3..] != [1, 1] {
                return invalid(format!(
                    "gtconv {name} must be [{cout}, {cs}, kt, 1, 1], got {d:?}"
                ));
            }
        }
        if self.sap_attn.weight.dims() != [1, cin, 1, 1] {
            return invalid(format!(
                "gtconv sap_attn must be [1, {cin}, 1, 1], got {:?}",
                self.sap_attn.weight.dims()
            ));
        }
        Ok(())
    }

    /// A layer whose calibration generators are all zero: it behaves as
    /// `base` until trained generator weights are loaded.
    pub fn with_zero_calibration(base: ConvParams, summary_channels: usize) -> Result<Self> {
        let cin = base.in_channels();
        let cout = base.out_channels();
        let cs = summary_channels;
        let agg = || {
            ConvParams::new(
                Tensor::zeros(&[cs, cin, 1, 1, 1])?,
                Tensor::zeros(&[cs])?,
                1,
                0,
            )
        };
        let temporal = || {
            ConvParams::new(
                Tensor::zeros(&[cout, cs, 3, 1, 1])?,
                Tensor::zeros(&[cout])?,
                1,
                1,
            )
        };
        Self::new(
            base,
            agg()?,
            agg()?,
            BatchNorm::neutral(cs, 1e-5),
            temporal()?,
            temporal()?,
            ConvParams::new(Tensor::zeros(&[1, cin, 1, 1])?, Tensor::zeros(&[1])?, 1, 0)?,
        )
    }

    pub fn in_channels(&self) -> usize {
        self.base.in_channels()
    }

    pub fn out_channels(&self) -> usize {
        self.base.out_channels()
    }
}

/// Rolling window over the most recent `k` frame features, oldest first.
#[derive(Debug, Clone)]
pub struct FrameSequenceBuffer {
    capacity: usize,
    frames: VecDeque<Tensor>,
}

impl FrameSequenceBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(TensorError::Invalid("sequence length k must be >= 1".into()));
        }
        Ok(Self {
            capacity,
            frames: VecDeque::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn clear(&mut self) {
        self.frames.clear();
    }

    pub fn newest(&self) -> Option<&Tensor> {
        self.frames.back()
    }

    /// Appends `frame` as the newest entry, evicting the oldest when full.
    pub fn push(&mut self, frame: Tensor) -> Result<()> {
        if let Some(prev) = self.frames.back() {
            if prev.dims() != frame.dims() {
                return Err(TensorError::Shape {
                    op: "FrameSequenceBuffer::push",
                    left: prev.dims().to_vec(),
                    right: frame.dims().to_vec(),
                });
            }
        }
        if self.frames.len() == self.capacity {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
        Ok(())
    }

    /// Exactly `k` frames, oldest first, left-padded with the oldest frame.
    pub fn window(&self) -> Result<Vec<Tensor>> {
        let oldest = self
            .frames
            .front()
            .ok_or_else(|| TensorError::Invalid("empty frame buffer".into()))?;
        let pad = self.capacity - self.frames.len();
        Ok(std::iter::repeat_n(oldest, pad)
            .chain(self.frames.iter())
            .cloned()
            .collect())
    }
}

/// Temporal summary `S` of `k` stacked frames: shape `[k, Cs, 1, 1]`.
pub fn temporal_summary(seq: &[Tensor], layer: &GtConvLayer) -> Result<Tensor> {
    if let Some(first) = seq.first() {
        if let Some(bad) = seq.iter().find(|t| t.dims() != first.dims()) {
            return Err(TensorError::Shape {
                op: "temporal_summary",
                left: first.dims().to_vec(),
                right: bad.dims().to_vec(),
            });
        }
    }
    let gaps = seq.iter().map(gap).collect::<Result<Vec<_>>>()?;
    let saps = seq
        .iter()
        .map(|x| sap(x, &layer.sap_attn))
        .collect::<Result<Vec<_>>>()?;
    let g = conv3d(&Tensor::stack(&gaps)?, &layer.f_agg_gap)?;
    let s = conv3d(&Tensor::stack(&saps)?, &layer.f_agg_sap)?;
    batchnorm_inference(&relu(&g.add(&s)?), &layer.bn, 1)
}

/// Per-output-channel factors `(alpha_w, alpha_b)` from the newest temporal
/// slice of `F_w(S)` and `F_b(S)`.
pub fn calibration_factors(summary: &Tensor, layer: &GtConvLayer) -> Result<(Vec<f64>, Vec<f64>)> {
    let newest = |p: &ConvParams| -> Result<Vec<f64>> {
        let out = conv3d(summary, p)?;
        let last = out
            .unstack()
            .pop()
            .ok_or_else(|| TensorError::Invalid("empty temporal output".into()))?;
        Ok(last.data().iter().map(|v| 1.0 + v).collect())
    };
    Ok((newest(&layer.f_w)?, newest(&layer.f_b)?))
}

/// `base` with weights and biases scaled per output channel.
pub fn calibrated_params(base: &ConvParams, alpha_w: &[f64], alpha_b: &[f64]) -> Result<ConvParams> {
    let cout = base.out_channels();
    if alpha_w.len() != cout || alpha_b.len() != cout {
        return Err(TensorError::Shape {
            op: "calibrated_params",
            left: vec![cout],
            right: vec![alpha_w.len(), alpha_b.len()],
        });
    }
    let per_out = base.weight.len() / cout;
    let weight = Tensor::from_fn(base.weight.dims(), |i| {
        base.weight.data()[i] * alpha_w[i / per_out]
    })?;
    let bias = Tensor::from_fn(&[cout], |o| base.bias.data()[o] * alpha_b[o])?;
    ConvParams::new(weight, bias, base.stride, base.padding)
}

/// Calibrated convolution of `x_t`, whose history (ending in `x_t`) is held in
/// `buffer`.
pub fn gtconv_forward(x_t: &Tensor, buffer: &FrameSequenceBuffer, layer: &GtConvLayer) -> Result<Tensor> {
    match buffer.newest() {
        Some(n) if n.dims() == x_t.dims() => {}
        Some(n) => {
            return Err(TensorError::Shape {
                op: "gtconv_forward",
                left: n.dims().to_vec(),
                right: x_t.dims().to_vec(),
            })
        }
        None => return Err(TensorError::Invalid("gtconv_forward: empty frame buffer".into())),
    }
    let summary = temporal_summary(&buffer.window()?, layer)?;
    let (aw, ab) = calibration_factors(&summary, layer)?;
    conv2d(x_t, &calibrated_params(&layer.base, &aw, &ab)?)
}

/// Streaming wrapper owning one sequence's frame history.
#[derive(Debug, Clone)]
pub struct GtConv {
    layer: GtConvLayer,
    buffer: FrameSequenceBuffer,
}

impl GtConv {
    pub fn new(layer: GtConvLayer, k: usize) -> Result<Self> {
        Ok(Self {
            layer,
            buffer: FrameSequenceBuffer::new(k)?,
        })
    }

    pub fn layer(&self) -> &GtConvLayer {
        &self.layer
    }

    /// Pushes `x` into the history and returns its calibrated convolution.
    pub fn step(&mut self, x: &Tensor) -> Result<Tensor> {
        self.buffer.push(x.clone())?;
        gtconv_forward(x, &self.buffer, &self.layer)
    }

    pub fn reset(&mut self) {
        self.buffer.clear();
    }
}
