//! A GT-Conv layer feeding an HQIM block, addressed by weight names.
//!
//! Every kernel is stride 1 with "same" padding. Names:
//!
//! ```text
//! gtconv.{base,f_agg_gap,f_agg_sap,f_w,f_b,sap_attn}.{weight,bias}
//! gtconv.bn.{mean,var,gamma,beta}
//! hqim.cell.{W_f,W_i,W_o,W_C,F}.{weight,bias}
//! hqim.acc.reducer{i}.{weight,bias}     i = 0 .. 2(k-1)
//! ```

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gtconv::{GtConv, GtConvLayer};
use crate::hqim::{AccumulatorStack, ConvLstmCell, Hqim};
use crate::io::WeightMap;
use crate::tensor::{conv2d, BatchNorm, ConvParams, Tensor, TensorError};

pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("missing weights: {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error("weight {name}: {source}")]
    Weight { name: String, source: TensorError },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

type Result<T> = std::result::Result<T, ModelError>;

/// Shape parameters of a freshly initialised model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub in_channels: usize,
    /// GT-Conv output channels; also the HQIM hidden width. Must be even.
    pub channels: usize,
    pub summary_channels: usize,
    pub kernel: usize,
    pub k: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            in_channels: 1,
            channels: 4,
            summary_channels: 4,
            kernel: 3,
            k: crate::gtconv::DEFAULT_SEQUENCE_LEN,
        }
    }
}

const GTCONV_PARTS: [&str; 6] = ["base", "f_agg_gap", "f_agg_sap", "f_w", "f_b", "sap_attn"];
const CELL_PARTS: [&str; 5] = ["W_f", "W_i", "W_o", "W_C", "F"];
const BN_PARTS: [&str; 4] = ["mean", "var", "gamma", "beta"];

/// Every weight name a model with sequence length `k` needs.
pub fn required_names(k: usize) -> Vec<String> {
    let mut names = Vec::new();
    let conv = |prefix: String, names: &mut Vec<String>| {
        names.push(format!("{prefix}.weight"));
        names.push(format!("{prefix}.bias"));
    };
    for p in GTCONV_PARTS {
        conv(format!("gtconv.{p}"), &mut names);
    }
    for p in BN_PARTS {
        names.push(format!("gtconv.bn.{p}"));
    }
    for p in CELL_PARTS {
        conv(format!("hqim.cell.{p}"), &mut names);
    }
    for i in 0..2 * k.saturating_sub(1) {
        conv(format!("hqim.acc.reducer{i}"), &mut names);
    }
    names
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalModel {
    pub gtconv: GtConvLayer,
    pub cell: ConvLstmCell,
    pub stack: AccumulatorStack,
}

/// Per-frame outputs of [`TemporalModel::run`].
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    /// Calibrated convolution output.
    pub features: Tensor,
    /// The uncalibrated base convolution of the same frame.
    pub base: Tensor,
    /// Integrated HQIM output.
    pub integrated: Tensor,
}

fn conv_from(map: &WeightMap, prefix: &str) -> Result<ConvParams> {
    let w = map[&format!("{prefix}.weight")].clone();
    let b = map[&format!("{prefix}.bias")].clone();
    ConvParams::same(w, b).map_err(|source| ModelError::Weight {
        name: prefix.to_string(),
        source,
    })
}

fn put_conv(map: &mut WeightMap, prefix: &str, p: &ConvParams) {
    map.insert(format!("{prefix}.weight"), p.weight.clone());
    map.insert(format!("{prefix}.bias"), p.bias.clone());
}

fn vec_tensor(v: &[f64]) -> Tensor {
    Tensor::new(vec![v.len()], v.to_vec()).expect("non-empty statistics")
}

impl TemporalModel {
    /// Loads a model for sequence length `k`, listing every missing name.
    pub fn from_weights(map: &WeightMap, k: usize) -> Result<Self> {
        let missing: Vec<String> = required_names(k)
            .into_iter()
            .filter(|n| !map.contains_key(n))
            .collect();
        if !missing.is_empty() {
            return Err(ModelError::Missing(missing));
        }
        let g = |p: &str| conv_from(map, &format!("gtconv.{p}"));
        let bn_vec = |p: &str| map[&format!("gtconv.bn.{p}")].data().to_vec();
        let bn = BatchNorm::new(bn_vec("mean"), bn_vec("var"), bn_vec("gamma"), bn_vec("beta"), BN_EPS)
            .map_err(|source| ModelError::Weight {
                name: "gtconv.bn".into(),
                source,
            })?;
        let gtconv = GtConvLayer::new(
            g("base")?,
            g("f_agg_gap")?,
            g("f_agg_sap")?,
            bn,
            g("f_w")?,
            g("f_b")?,
            g("sap_attn")?,
        )?;
        let c = |p: &str| conv_from(map, &format!("hqim.cell.{p}"));
        let cell = ConvLstmCell::new(c("W_f")?, c("W_i")?, c("W_o")?, c("W_C")?, c("F")?)?;
        let mut reducers = Vec::new();
        while map.contains_key(&format!("hqim.acc.reducer{}.weight", reducers.len())) {
            reducers.push(conv_from(map, &format!("hqim.acc.reducer{}", reducers.len()))?);
        }
        reducers.truncate(reducers.len() / 2 * 2);
        let stack = AccumulatorStack::new(reducers)?;
        Ok(Self { gtconv, cell, stack })
    }

    pub fn to_weights(&self) -> WeightMap {
        let mut map = WeightMap::new();
        let l = &self.gtconv;
        for (p, conv) in [
            ("base", &l.base),
            ("f_agg_gap", &l.f_agg_gap),
            ("f_agg_sap", &l.f_agg_sap),
            ("f_w", &l.f_w),
            ("f_b", &l.f_b),
            ("sap_attn", &l.sap_attn),
        ] {
            put_conv(&mut map, &format!("gtconv.{p}"), conv);
        }
        for (p, v) in [
            ("mean", &l.bn.mean),
            ("var", &l.bn.var),
            ("gamma", &l.bn.gamma),
            ("beta", &l.bn.beta),
        ] {
            map.insert(format!("gtconv.bn.{p}"), vec_tensor(v));
        }
        let c = &self.cell;
        for (p, conv) in [("W_f", &c.w_f), ("W_i", &c.w_i), ("W_o", &c.w_o), ("W_C", &c.w_c), ("F", &c.fuse)] {
            put_conv(&mut map, &format!("hqim.cell.{p}"), conv);
        }
        for (i, r) in self.stack.reducers().iter().enumerate() {
            put_conv(&mut map, &format!("hqim.acc.reducer{i}"), r);
        }
        map
    }

    /// All-zero weights (neutral batch norm statistics).
    pub fn zero(dims: ModelDims) -> Result<Self> {
        let gtconv = GtConvLayer::with_zero_calibration(
            ConvParams::zeros_2d(dims.channels, dims.in_channels, dims.kernel)?,
            dims.summary_channels,
        )?;
        let cell = ConvLstmCell::zeros(dims.channels, dims.channels, dims.kernel)?;
        let stack = AccumulatorStack::zeros(dims.channels, dims.k.saturating_sub(1))?;
        Ok(Self { gtconv, cell, stack })
    }

    /// Seeded uniform initialisation scaled by fan-in. Values are rounded to
    /// `f32` so a save/load cycle is lossless.
    pub fn seeded(dims: ModelDims, seed: u64, zero_calibration: bool) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let zero = Self::zero(dims)?;
        let mut fill = |p: &ConvParams| -> Result<ConvParams> {
            let fan_in: usize = p.weight.dims()[1..].iter().product();
            let a = 1.0 / (fan_in as f64).sqrt();
            let mut draw = |n: usize, scale: f64| -> Vec<f64> {
                (0..n)
                    .map(|_| f64::from((scale * rng.random_range(-1.0..1.0)) as f32))
                    .collect()
            };
            let w = Tensor::new(p.weight.dims().to_vec(), draw(p.weight.len(), a))?;
            let b = Tensor::new(p.bias.dims().to_vec(), draw(p.bias.len(), 0.1))?;
            Ok(ConvParams::new(w, b, p.stride, p.padding)?)
        };
        let z = &zero.gtconv;
        let base = fill(&z.base)?;
        let gtconv = if zero_calibration {
            GtConvLayer::with_zero_calibration(base, dims.summary_channels)?
        } else {
            GtConvLayer::new(
                base,
                fill(&z.f_agg_gap)?,
                fill(&z.f_agg_sap)?,
                z.bn.clone(),
                fill(&z.f_w)?,
                fill(&z.f_b)?,
                fill(&z.sap_attn)?,
            )?
        };
        let c = &zero.cell;
        let cell = ConvLstmCell::new(fill(&c.w_f)?, fill(&c.w_i)?, fill(&c.w_o)?, fill(&c.w_c)?, fill(&c.fuse)?)?;
        let reducers = zero
            .stack
            .reducers()
            .iter()
            .map(&mut fill)
            .collect::<Result<Vec<_>>>()?;
        let stack = AccumulatorStack::new(reducers)?;
        Ok(Self { gtconv, cell, stack })
    }

    /// True when every calibration generator is zero, so the layer reduces
    /// to its base convolution.
    pub fn has_zero_calibration(&self) -> bool {
        let l = &self.gtconv;
        [&l.f_w, &l.f_b]
            .iter()
            .all(|p| p.weight.data().iter().chain(p.bias.data()).all(|&v| v == 0.0))
    }

    /// Streams `frames` through GT-Conv and HQIM with context length `k`.
    pub fn run(&self, frames: &[Tensor], k: usize) -> Result<Vec<FrameOutput>> {
        let mut gt = GtConv::new(self.gtconv.clone(), k)?;
        let mut hq = Hqim::new(self.cell.clone(), self.stack.clone(), k)?;
        frames
            .iter()
            .map(|x| {
                let features = gt.step(x)?;
                let base = conv2d(x, &self.gtconv.base)?;
                let integrated = hq.step(&features)?;
                Ok(FrameOutput {
                    features,
                    base,
                    integrated,
                })
            })
            .collect()
    }
}
