//! Hierarchical queue integration: a convolutional LSTM over the context
//! window followed by progressive channel-halving accumulation.
//!
//! Gate update, for `z = concat[x_t, h_{t-1}]`:
//!
//! ```text
//! f = sigmoid(W_f * z + b_f)      i = sigmoid(W_i * z + b_i)
//! o = sigmoid(W_o * z + b_o)      g = tanh(W_C * z + b_C)
//! C_t = f . C_{t-1} + i . g
//! h_t = F(o . C_t)                (a convolution instead of o . tanh(C_t))
//! ```
//!
//! `f` gates the previous cell and `i` gates the candidate. The hidden
//! outputs of the window are then merged oldest to newest: each merge halves
//! the running accumulator and the next hidden state with two dedicated
//! convolutions and concatenates them back to `C` channels.

use std::collections::VecDeque;

use crate::tensor::{
    concat_channels, conv2d, sigmoid, sigmoid_scalar, tanh, ConvParams, Tensor, TensorError,
};

type Result<T> = std::result::Result<T, TensorError>;

/// One gate of the dense reference LSTM: `W_x` is `hidden x input`, `W_h` is
/// `hidden x hidden`, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGate {
    pub w_x: Vec<f64>,
    pub w_h: Vec<f64>,
    pub b: Vec<f64>,
}

/// Classical fully connected LSTM, used to cross-check gate wiring.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLstm {
    pub input: usize,
    pub hidden: usize,
    pub forget: DenseGate,
    pub input_gate: DenseGate,
    pub output: DenseGate,
    pub candidate: DenseGate,
}

impl DenseLstm {
    /// Every weight set to `w`, every bias to `b`.
    pub fn constant(input: usize, hidden: usize, w: f64, b: f64) -> Self {
        let gate = || DenseGate {
            w_x: vec![w; hidden * input],
            w_h: vec![w; hidden * hidden],
            b: vec![b; hidden],
        };
        Self {
            input,
            hidden,
            forget: gate(),
            input_gate: gate(),
            output: gate(),
            candidate: gate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl DenseLstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

fn dense_gate(g: &DenseGate, x: &[f64], h: &[f64]) -> Vec<f64> {
    g.b.iter()
        .enumerate()
        .map(|(r, b)| {
            let wx: f64 = x.iter().enumerate().map(|(k, v)| g.w_x[r * x.len() + k] * v).sum();
            let wh: f64 = h.iter().enumerate().map(|(k, v)| g.w_h[r * h.len() + k] * v).sum();
            wx + wh + b
        })
        .collect()
}

/// One step of the classical LSTM with `h_t = o . tanh(C_t)`.
pub fn lstm_reference_step(
    x: &[f64],
    state: &DenseLstmState,
    lstm: &DenseLstm,
) -> Result<DenseLstmState> {
    if x.len() != lstm.input || state.h.len() != lstm.hidden || state.c.len() != lstm.hidden {
        return Err(TensorError::Shape {
            op: "lstm_reference_step",
            left: vec![lstm.input, lstm.hidden],
            right: vec![x.len(), state.h.len()],
        });
    }
    let act = |g: &DenseGate, f: fn(f64) -> f64| -> Vec<f64> {
        dense_gate(g, x, &state.h).into_iter().map(f).collect()
    };
    let f = act(&lstm.forget, sigmoid_scalar);
    let i = act(&lstm.input_gate, sigmoid_scalar);
    let o = act(&lstm.output, sigmoid_scalar);
    let g = act(&lstm.candidate, f64::tanh);
    let c: Vec<f64> = (0..lstm.hidden)
        .map(|k| f[k] * state.c[k] + i[k] * g[k])
        .collect();
    let h = (0..lstm.hidden).map(|k| o[k] * c[k].tanh()).collect();
    Ok(DenseLstmState { h, c })
}

/// Convolutional LSTM cell with a convolutional output fusion `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLstmCell {
    pub w_f: ConvParams,
    pub w_i: ConvParams,
    pub w_o: ConvParams,
    pub w_c: ConvParams,
    pub fuse: ConvParams,
}

impl ConvLstmCell {
    pub fn new(
        w_f: ConvParams,
        w_i: ConvParams,
        w_o: ConvParams,
        w_c: ConvParams,
        fuse: ConvParams,
    ) -> Result<Self> {
        let cell = Self {
            w_f,
            w_i,
            w_o,
            w_c,
            fuse,
        };
        cell.validate()?;
        Ok(cell)
    }

    fn validate(&self) -> Result<()> {
        let d = self.w_f.weight.dims().to_vec();
        let same_size = |p: &ConvParams| {
            let w = p.weight.dims();
            w.len() == 4 && w[2] % 2 == 1 && w[3] == w[2] && p.stride == 1 && p.padding == w[2] / 2
        };
        for (name, g) in [("W_i", &self.w_i), ("W_o", &self.w_o), ("W_C", &self.w_c)] {
            if g.weight.dims() != d.as_slice() {
                return Err(TensorError::Invalid(format!(
                    "ConvLstmCell {name} kernel {:?} differs from W_f kernel {d:?}",
                    g.weight.dims()
                )));
            }
        }
        let gates_ok = [&self.w_f, &self.w_i, &self.w_o, &self.w_c]
            .iter()
            .all(|p| same_size(p));
        let hidden = d.first().copied().unwrap_or(0);
        if !gates_ok || d.len() != 4 || d[1] <= hidden {
            return Err(TensorError::Invalid(format!(
                "ConvLstmCell gates must be size-preserving [Ch, Cin + Ch, k, k] kernels, got {d:?}"
            )));
        }
        let f = self.fuse.weight.dims();
        if !same_size(&self.fuse) || f[0] != hidden || f[1] != hidden {
            return Err(TensorError::Invalid(format!(
                "ConvLstmCell fusion must be a size-preserving [{hidden}, {hidden}, k, k] kernel, got {f:?}"
            )));
        }
        Ok(())
    }

    /// All-zero cell with `k x k` gates and a `3 x 3` fusion.
    pub fn zeros(input: usize, hidden: usize, k: usize) -> Result<Self> {
        let gate = || ConvParams::zeros_2d(hidden, input + hidden, k);
        Self::new(gate()?, gate()?, gate()?, gate()?, ConvParams::zeros_2d(hidden, hidden, 3)?)
    }

    pub fn hidden_channels(&self) -> usize {
        self.w_f.out_channels()
    }

    pub fn input_channels(&self) -> usize {
        self.w_f.in_channels() - self.hidden_channels()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Tensor,
    pub c: Tensor,
}

impl LstmState {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        Ok(Self {
            h: Tensor::zeros(&[channels, height, width])?,
            c: Tensor::zeros(&[channels, height, width])?,
        })
    }

    fn for_input(cell: &ConvLstmCell, x: &Tensor) -> Result<Self> {
        match *x.dims() {
            [_, h, w] => Self::zeros(cell.hidden_channels(), h, w),
            _ => Err(TensorError::Shape {
                op: "LstmState::for_input",
                left: x.dims().to_vec(),
                right: vec![cell.input_channels(), 0, 0],
            }),
        }
    }
}

/// Gate activations of one step, kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct GateTrace {
    pub forget: Tensor,
    pub input: Tensor,
    pub output: Tensor,
    pub candidate: Tensor,
}

/// One cell update, also returning the gate activations.
pub fn convlstm_step_traced(
    x: &Tensor,
    state: &LstmState,
    cell: &ConvLstmCell,
) -> Result<(Tensor, LstmState, GateTrace)> {
    if x.dims().first() != Some(&cell.input_channels()) {
        return Err(TensorError::Shape {
            op: "convlstm_step",
            left: x.dims().to_vec(),
            right: cell.w_f.weight.dims().to_vec(),
        });
    }
    let z = concat_channels(&[x.clone(), state.h.clone()])?;
    let forget = sigmoid(&conv2d(&z, &cell.w_f)?);
    let input = sigmoid(&conv2d(&z, &cell.w_i)?);
    let output = sigmoid(&conv2d(&z, &cell.w_o)?);
    let candidate = tanh(&conv2d(&z, &cell.w_c)?);
    let c = forget.mul(&state.c)?.add(&input.mul(&candidate)?)?;
    let h = conv2d(&output.mul(&c)?, &cell.fuse)?;
    let next = LstmState { h: h.clone(), c };
    Ok((
        h,
        next,
        GateTrace {
            forget,
            input,
            output,
            candidate,
        },
    ))
}

/// One cell update: returns the fused hidden output and the next state.
pub fn convlstm_step(x: &Tensor, state: &LstmState, cell: &ConvLstmCell) -> Result<(Tensor, LstmState)> {
    let (h, s, _) = convlstm_step_traced(x, state, cell)?;
    Ok((h, s))
}

/// Runs the cell over `seq` in temporal order. `init` defaults to zeros.
/// Returns the hidden output of every step and the final state.
pub fn run_sequence(
    seq: &[Tensor],
    cell: &ConvLstmCell,
    init: Option<LstmState>,
) -> Result<(Vec<Tensor>, LstmState)> {
    let first = seq
        .first()
        .ok_or_else(|| TensorError::Invalid("run_sequence: empty sequence".into()))?;
    let mut state = match init {
        Some(s) => s,
        None => LstmState::for_input(cell, first)?,
    };
    let mut hiddens = Vec::with_capacity(seq.len());
    for x in seq {
        if x.dims() != first.dims() {
            return Err(TensorError::Shape {
                op: "run_sequence",
                left: first.dims().to_vec(),
                right: x.dims().to_vec(),
            });
        }
        let (h, next) = convlstm_step(x, &state, cell)?;
        hiddens.push(h);
        state = next;
    }
    Ok((hiddens, state))
}

/// Channel-halving reducers for progressive accumulation. Merge level `l`
/// uses `reducers[2l]` on the accumulator and `reducers[2l + 1]` on the
/// incoming hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct AccumulatorStack {
    reducers: Vec<ConvParams>,
}

impl AccumulatorStack {
    pub fn new(reducers: Vec<ConvParams>) -> Result<Self> {
        if !reducers.len().is_multiple_of(2) {
            return Err(TensorError::Invalid(format!(
                "accumulator needs two reducers per merge level, got {}",
                reducers.len()
            )));
        }
        if let Some(first) = reducers.first() {
            let c = first.in_channels();
            for r in &reducers {
                let d = r.weight.dims();
                if d.len() != 4 || d[1] != c || d[0] * 2 != c {
                    return Err(TensorError::Invalid(format!(
                        "reducer must map {c} -> {} channels, got kernel {d:?}",
                        c / 2
                    )));
                }
            }
        }
        Ok(Self { reducers })
    }

    /// Zero `3 x 3` reducers for `levels` merges over `channels` channels.
    pub fn zeros(channels: usize, levels: usize) -> Result<Self> {
        let reducers = (0..2 * levels)
            .map(|_| ConvParams::zeros_2d(channels / 2, channels, 3))
            .collect::<Result<Vec<_>>>()?;
        Self::new(reducers)
    }

    pub fn reducers(&self) -> &[ConvParams] {
        &self.reducers
    }

    pub fn levels(&self) -> usize {
        self.reducers.len() / 2
    }
}

/// Left-fold merge of `hiddens` (oldest first) into one `[C, H, W]` tensor.
pub fn progressive_accumulate(hiddens: &[Tensor], stack: &AccumulatorStack) -> Result<Tensor> {
    let (first, rest) = hiddens
        .split_first()
        .ok_or_else(|| TensorError::Invalid("progressive_accumulate: no hidden states".into()))?;
    if rest.is_empty() {
        return Ok(first.clone());
    }
    let c = first.dims()[0];
    if c % 2 != 0 {
        return Err(TensorError::Invalid(format!(
            "progressive accumulation needs an even channel count, got {c}"
        )));
    }
    if stack.levels() < rest.len() {
        return Err(TensorError::Invalid(format!(
            "accumulator has {} merge levels, {} needed",
            stack.levels(),
            rest.len()
        )));
    }
    let mut acc = first.clone();
    for (level, h) in rest.iter().enumerate() {
        if h.dims() != first.dims() {
            return Err(TensorError::Shape {
                op: "progressive_accumulate",
                left: first.dims().to_vec(),
                right: h.dims().to_vec(),
            });
        }
        let a = conv2d(&acc, &stack.reducers[2 * level])?;
        let b = conv2d(h, &stack.reducers[2 * level + 1])?;
        acc = concat_channels(&[a, b])?;
    }
    Ok(acc)
}

/// ConvLSTM over `seq` from a zero state, then progressive accumulation.
pub fn hqim_forward(seq: &[Tensor], cell: &ConvLstmCell, stack: &AccumulatorStack) -> Result<Tensor> {
    let (hiddens, _) = run_sequence(seq, cell, None)?;
    progressive_accumulate(&hiddens, stack)
}

/// Streaming form: the cell state persists across frames of one sequence and
/// the last `k` hidden outputs are kept in a queue (left-padded with the
/// oldest until full) that is accumulated into `M_t` on every step.
#[derive(Debug, Clone)]
pub struct Hqim {
    cell: ConvLstmCell,
    stack: AccumulatorStack,
    k: usize,
    state: Option<LstmState>,
    hiddens: VecDeque<Tensor>,
}

impl Hqim {
    pub fn new(cell: ConvLstmCell, stack: AccumulatorStack, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(TensorError::Invalid("sequence length k must be >= 1".into()));
        }
        if stack.levels() < k - 1 {
            return Err(TensorError::Invalid(format!(
                "accumulator has {} merge levels, k = {k} needs {}",
                stack.levels(),
                k - 1
            )));
        }
        Ok(Self {
            cell,
            stack,
            k,
            state: None,
            hiddens: VecDeque::with_capacity(k),
        })
    }

    pub fn step(&mut self, x: &Tensor) -> Result<Tensor> {
        let state = match self.state.take() {
            Some(s) => s,
            None => LstmState::for_input(&self.cell, x)?,
        };
        let (h, next) = convlstm_step(x, &state, &self.cell)?;
        self.state = Some(next);
        if self.hiddens.len() == self.k {
            self.hiddens.pop_front();
        }
        self.hiddens.push_back(h);
        let oldest = &self.hiddens[0];
        let window: Vec<Tensor> = std::iter::repeat_n(oldest, self.k - self.hiddens.len())
            .chain(self.hiddens.iter())
            .cloned()
            .collect();
        progressive_accumulate(&window, &self.stack)
    }

    pub fn reset(&mut self) {
        self.state = None;
        self.hiddens.clear();
    }
}
