//! Dense row-major `f64` tensors and the forward-only kernels used by the
//! temporal modules: 2D/3D convolution, pooling, activations, inference-mode
//! batch normalisation and channel concatenation.
//!
//! Layouts: `[C, H, W]` per frame, `[T, C, H, W]` for sequences,
//! `[Cout, Cin, kh, kw]` for 2D kernels and `[Cout, Cin, kt, kh, kw]` for 3D
//! kernels. Convolution is cross-correlation with zero padding.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("data length {len} does not match dims {dims:?}")]
    Length { dims: Vec<usize>, len: usize },
    #[error("invalid dims {0:?}: every extent must be at least 1")]
    Dims(Vec<usize>),
    #[error("{0}")]
    Invalid(String),
}

type Result<T> = std::result::Result<T, TensorError>;

fn shape_err(op: &'static str, left: &[usize], right: &[usize]) -> TensorError {
    TensorError::Shape {
        op,
        left: left.to_vec(),
        right: right.to_vec(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(TensorError::Dims(dims));
        }
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(TensorError::Length {
                dims,
                len: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn full(dims: &[usize], value: f64) -> Result<Self> {
        let n = dims.iter().product();
        Self::new(dims.to_vec(), vec![value; n])
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::full(dims, 0.0)
    }

    pub fn from_fn(dims: &[usize], mut f: impl FnMut(usize) -> f64) -> Result<Self> {
        let n = dims.iter().product();
        Self::new(dims.to_vec(), (0..n).map(&mut f).collect())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn reshape(&self, dims: &[usize]) -> Result<Self> {
        Self::new(dims.to_vec(), self.data.clone())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.dims != other.dims {
            return Err(shape_err("zip_map", &self.dims, &other.dims));
        }
        Ok(Self {
            dims: self.dims.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, other: &Tensor) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        if self.dims != other.dims {
            return Err(shape_err("max_abs_diff", &self.dims, &other.dims));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Stacks equally shaped tensors along a new leading axis.
    pub fn stack(items: &[Tensor]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| TensorError::Invalid("stack of zero tensors".into()))?;
        let mut data = Vec::with_capacity(first.len() * items.len());
        for t in items {
            if t.dims != first.dims {
                return Err(shape_err("stack", &first.dims, &t.dims));
            }
            data.extend_from_slice(&t.data);
        }
        let mut dims = vec![items.len()];
        dims.extend_from_slice(&first.dims);
        Self::new(dims, data)
    }

    /// Splits along the leading axis. Rank-1 tensors yield `[1]` scalars.
    pub fn unstack(&self) -> Vec<Tensor> {
        let inner: Vec<usize> = if self.dims.len() > 1 {
            self.dims[1..].to_vec()
        } else {
            vec![1]
        };
        let step: usize = inner.iter().product();
        self.data
            .chunks(step)
            .map(|c| Tensor {
                dims: inner.clone(),
                data: c.to_vec(),
            })
            .collect()
    }

    /// Per-channel `(mean, max)` of a `[C, H, W]` tensor.
    pub fn channel_stats(&self) -> Result<Vec<(f64, f64)>> {
        let (c, h, w) = chw(self, "channel_stats")?;
        let plane = h * w;
        Ok((0..c)
            .map(|ch| {
                let s = &self.data[ch * plane..(ch + 1) * plane];
                let mean = s.iter().sum::<f64>() / plane as f64;
                let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (mean, max)
            })
            .collect())
    }
}

fn chw(x: &Tensor, op: &'static str) -> Result<(usize, usize, usize)> {
    match *x.dims() {
        [c, h, w] => Ok((c, h, w)),
        _ => Err(shape_err(op, x.dims(), &[0, 0, 0])),
    }
}

/// Convolution weights, per-output-channel bias, stride and zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub weight: Tensor,
    pub bias: Tensor,
    pub stride: usize,
    pub padding: usize,
}

impl ConvParams {
    pub fn new(weight: Tensor, bias: Tensor, stride: usize, padding: usize) -> Result<Self> {
        if !(weight.rank() == 4 || weight.rank() == 5) {
            return Err(TensorError::Invalid(format!(
                "conv weight must be rank 4 or 5, got {:?}",
                weight.dims()
            )));
        }
        if bias.dims() != [weight.dims()[0]] {
            return Err(shape_err("conv bias", weight.dims(), bias.dims()));
        }
        if stride == 0 {
            return Err(TensorError::Invalid("conv stride must be >= 1".into()));
        }
        Ok(Self {
            weight,
            bias,
            stride,
            padding,
        })
    }

    /// Stride-1 kernel with "same" padding `(kh - 1) / 2`.
    pub fn same(weight: Tensor, bias: Tensor) -> Result<Self> {
        let kh = weight.dims().get(2).copied().unwrap_or(1);
        Self::new(weight, bias, 1, kh.saturating_sub(1) / 2)
    }

    /// All-zero `[cout, cin, k, k]` kernel with "same" padding.
    pub fn zeros_2d(cout: usize, cin: usize, k: usize) -> Result<Self> {
        Self::same(Tensor::zeros(&[cout, cin, k, k])?, Tensor::zeros(&[cout])?)
    }

    /// `1x1` kernel copying input channel `i` to output channel `i`.
    pub fn identity_1x1(channels: usize) -> Result<Self> {
        let w = Tensor::from_fn(&[channels, channels, 1, 1], |i| {
            if i / channels == i % channels {
                1.0
            } else {
                0.0
            }
        })?;
        Self::new(w, Tensor::zeros(&[channels])?, 1, 0)
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dims()[1]
    }

    /// Output spatial extent along one axis, if integral and positive.
    pub fn out_extent(&self, input: usize, kernel: usize) -> Option<usize> {
        let padded = input + 2 * self.padding;
        if padded < kernel || !(padded - kernel).is_multiple_of(self.stride) {
            return None;
        }
        Some((padded - kernel) / self.stride + 1)
    }
}

/// 2D cross-correlation of a `[C, H, W]` input.
pub fn conv2d(x: &Tensor, p: &ConvParams) -> Result<Tensor> {
    let (c, h, w) = chw(x, "conv2d")?;
    let wd = p.weight.dims();
    if wd.len() != 4 || wd[1] != c {
        return Err(shape_err("conv2d", x.dims(), wd));
    }
    let (cout, kh, kw) = (wd[0], wd[2], wd[3]);
    let (oh, ow) = match (p.out_extent(h, kh), p.out_extent(w, kw)) {
        (Some(oh), Some(ow)) => (oh, ow),
        _ => return Err(shape_err("conv2d", x.dims(), wd)),
    };
    let pad = p.padding as isize;
    let xs = x.data();
    let ws = p.weight.data();
    let mut out = vec![0.0; cout * oh * ow];
    for o in 0..cout {
        let bias = p.bias.data()[o];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = bias;
                for ci in 0..c {
                    for ky in 0..kh {
                        let iy = (oy * p.stride + ky) as isize - pad;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let ix = (ox * p.stride + kx) as isize - pad;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            acc += xs[(ci * h + iy as usize) * w + ix as usize]
                                * ws[((o * c + ci) * kh + ky) * kw + kx];
                        }
                    }
                }
                out[(o * oh + oy) * ow + ox] = acc;
            }
        }
    }
    Tensor::new(vec![cout, oh, ow], out)
}

/// 3D cross-correlation of a `[T, C, H, W]` sequence with a
/// `[Cout, Cin, kt, kh, kw]` kernel, stride 1.
///
/// `padding` applies to the temporal axis. Spatial padding is "same"
/// (`(k - 1) / 2`), so spatial kernels must be odd. Output is `[T', Cout, H, W]`.
pub fn conv3d(x: &Tensor, p: &ConvParams) -> Result<Tensor> {
    let (t, c, h, w) = match *x.dims() {
        [t, c, h, w] => (t, c, h, w),
        _ => return Err(shape_err("conv3d", x.dims(), p.weight.dims())),
    };
    let wd = p.weight.dims();
    if wd.len() != 5 || wd[1] != c || wd[3].is_multiple_of(2) || wd[4].is_multiple_of(2) || p.stride != 1 {
        return Err(shape_err("conv3d", x.dims(), wd));
    }
    let (cout, kt, kh, kw) = (wd[0], wd[2], wd[3], wd[4]);
    let tp = t + 2 * p.padding;
    if tp < kt {
        return Err(shape_err("conv3d", x.dims(), wd));
    }
    let ot = tp - kt + 1;
    let (ph, pw) = ((kh / 2) as isize, (kw / 2) as isize);
    let pt = p.padding as isize;
    let xs = x.data();
    let ws = p.weight.data();
    let mut out = vec![0.0; ot * cout * h * w];
    for ti in 0..ot {
        for o in 0..cout {
            let bias = p.bias.data()[o];
            for oy in 0..h {
                for ox in 0..w {
                    let mut acc = bias;
                    for kz in 0..kt {
                        let it = (ti + kz) as isize - pt;
                        if it < 0 || it >= t as isize {
                            continue;
                        }
                        for ci in 0..c {
                            for ky in 0..kh {
                                let iy = (oy + ky) as isize - ph;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                for kx in 0..kw {
                                    let ix = (ox + kx) as isize - pw;
                                    if ix < 0 || ix >= w as isize {
                                        continue;
                                    }
                                    let xi = ((it as usize * c + ci) * h + iy as usize) * w
                                        + ix as usize;
                                    let wi = (((o * c + ci) * kt + kz) * kh + ky) * kw + kx;
                                    acc += xs[xi] * ws[wi];
                                }
                            }
                        }
                    }
                    out[((ti * cout + o) * h + oy) * w + ox] = acc;
                }
            }
        }
    }
    Tensor::new(vec![ot, cout, h, w], out)
}

/// Global average pooling: `[C, H, W] -> [C, 1, 1]`.
pub fn gap(x: &Tensor) -> Result<Tensor> {
    let (c, h, w) = chw(x, "gap")?;
    let plane = h * w;
    let data = x
        .data()
        .chunks(plane)
        .map(|s| s.iter().sum::<f64>() / plane as f64)
        .collect();
    Tensor::new(vec![c, 1, 1], data)
}

/// Spatial attention pooling: a `C -> 1` `1x1` convolution scores every
/// pixel, a spatial softmax turns scores into weights, and each channel is
/// reduced to its weighted mean. Constant scores reduce this to [`gap`].
pub fn sap(x: &Tensor, attn: &ConvParams) -> Result<Tensor> {
    let (c, h, w) = chw(x, "sap")?;
    let ad = attn.weight.dims();
    if ad != [1, c, 1, 1] {
        return Err(shape_err("sap", x.dims(), ad));
    }
    let logits = conv2d(x, attn)?;
    let m = logits
        .data()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.data().iter().map(|&l| (l - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    let plane = h * w;
    let data = x
        .data()
        .chunks(plane)
        .map(|s| s.iter().zip(&exps).map(|(v, e)| v * e).sum::<f64>() / z)
        .collect();
    Tensor::new(vec![c, 1, 1], data)
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(sigmoid_scalar)
}

pub fn tanh(x: &Tensor) -> Tensor {
    x.map(f64::tanh)
}

pub(crate) fn sigmoid_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Stored per-channel statistics for inference-mode batch normalisation.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub eps: f64,
}

impl BatchNorm {
    pub fn new(
        mean: Vec<f64>,
        var: Vec<f64>,
        gamma: Vec<f64>,
        beta: Vec<f64>,
        eps: f64,
    ) -> Result<Self> {
        let n = mean.len();
        if var.len() != n || gamma.len() != n || beta.len() != n {
            return Err(TensorError::Invalid(
                "batchnorm statistics must share one length".into(),
            ));
        }
        if let Some(v) = var.iter().find(|v| !(**v >= 0.0)) {
            return Err(TensorError::Invalid(format!(
                "batchnorm variance must be non-negative, got {v}"
            )));
        }
        if !(eps >= 0.0) {
            return Err(TensorError::Invalid("batchnorm eps must be >= 0".into()));
        }
        Ok(Self {
            mean,
            var,
            gamma,
            beta,
            eps,
        })
    }

    /// `mean = 0, var = 1, gamma = 1, beta = 0`.
    pub fn neutral(channels: usize, eps: f64) -> Self {
        Self {
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            eps,
        }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }
}

/// `(x - mean) / sqrt(var + eps) * gamma + beta` along `channel_axis`.
pub fn batchnorm_inference(x: &Tensor, bn: &BatchNorm, channel_axis: usize) -> Result<Tensor> {
    let dims = x.dims();
    if channel_axis >= dims.len() || dims[channel_axis] != bn.channels() {
        return Err(shape_err("batchnorm", dims, &[bn.channels()]));
    }
    if let Some(v) = bn.var.iter().find(|v| !(**v >= 0.0)) {
        return Err(TensorError::Invalid(format!(
            "batchnorm variance must be non-negative, got {v}"
        )));
    }
    let inner: usize = dims[channel_axis + 1..].iter().product();
    let c = dims[channel_axis];
    let scale: Vec<f64> = (0..c)
        .map(|i| bn.gamma[i] / (bn.var[i] + bn.eps).sqrt())
        .collect();
    let data = x
        .data()
        .iter()
        .enumerate()
        .map(|(idx, &v)| {
            let ch = (idx / inner) % c;
            (v - bn.mean[ch]) * scale[ch] + bn.beta[ch]
        })
        .collect();
    Tensor::new(dims.to_vec(), data)
}

/// Concatenates `[C_i, H, W]` tensors along the channel axis.
pub fn concat_channels(xs: &[Tensor]) -> Result<Tensor> {
    let first = xs
        .first()
        .ok_or_else(|| TensorError::Invalid("concat of zero tensors".into()))?;
    let (_, h, w) = chw(first, "concat_channels")?;
    let mut total = 0;
    let mut data = Vec::new();
    for t in xs {
        let (c, th, tw) = chw(t, "concat_channels")?;
        if (th, tw) != (h, w) {
            return Err(shape_err("concat_channels", first.dims(), t.dims()));
        }
        total += c;
        data.extend_from_slice(t.data());
    }
    Tensor::new(vec![total, h, w], data)
}

/// Splits a `[C, H, W]` tensor into consecutive channel groups.
pub fn split_channels(x: &Tensor, sizes: &[usize]) -> Result<Vec<Tensor>> {
    let (c, h, w) = chw(x, "split_channels")?;
    if sizes.iter().sum::<usize>() != c || sizes.contains(&0) {
        return Err(shape_err("split_channels", x.dims(), sizes));
    }
    let plane = h * w;
    let mut start = 0;
    sizes
        .iter()
        .map(|&s| {
            let t = Tensor::new(
                vec![s, h, w],
                x.data()[start * plane..(start + s) * plane].to_vec(),
            );
            start += s;
            t
        })
        .collect()
}
