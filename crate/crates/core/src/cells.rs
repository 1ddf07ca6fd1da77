//! Single-step recurrent and feedforward layers with analytic backward passes.
//!
//! Every `*_forward` returns a cache holding the intermediates its matching
//! `*_backward` needs. Backward functions never mutate parameters; they
//! return gradients shaped like the parameters plus gradients for the step
//! inputs. The `*_backward_into` variants accumulate into caller-owned
//! buffers and are what the sequence model uses during BPTT.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    add_into, gemv_add, gemv_t_add, glorot_init, outer_add, relu_scalar, sigmoid_scalar, Matrix,
    Rng,
};

/// Uniform access to the learnable tensors of a layer, in a fixed order.
pub trait Parameters: Sized {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;
    /// Same shapes, all zeros.
    fn zeros_like(&self) -> Self;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }
}

/// Glorot over the full `[h, x]` fan-in, split into the recurrent (h x h)
/// and input (h x x) blocks.
fn glorot_split(hidden: usize, input: usize, rng: &mut Rng) -> Result<(Matrix, Matrix)> {
    let joint = glorot_init(hidden, hidden + input, rng)?;
    let mut w = Vec::with_capacity(hidden * hidden);
    let mut u = Vec::with_capacity(hidden * input);
    for r in 0..hidden {
        let row = joint.row(r);
        w.extend_from_slice(&row[..hidden]);
        u.extend_from_slice(&row[hidden..]);
    }
    Ok((
        Matrix::new(hidden, hidden, w)?,
        Matrix::new(hidden, input, u)?,
    ))
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::dim(format!(
            "{what}: expected length {want}, got {got}"
        )));
    }
    Ok(())
}

fn check_shape(what: &str, m: &Matrix, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::dim(format!(
            "{what}: expected {rows}x{cols}, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => relu_scalar(x),
            Activation::Linear => x,
        }
    }

    /// Derivative at a pre-activation value; relu'(0) is 0.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Linear => "linear",
        }
    }
}

// ---------------------------------------------------------------------------
// GRU

/// GRU weights. Each matrix is `hidden x (hidden + input)` and acts on the
/// concatenation `[h_prev, x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w_reset: Matrix,
    pub w_update: Matrix,
    pub w_candidate: Matrix,
    pub b_reset: Vec<f64>,
    pub b_update: Vec<f64>,
    pub b_candidate: Vec<f64>,
}

impl GruParams {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        GruParams {
            w_reset: Matrix::zeros(hidden, hidden + input),
            w_update: Matrix::zeros(hidden, hidden + input),
            w_candidate: Matrix::zeros(hidden, hidden + input),
            b_reset: vec![0.0; hidden],
            b_update: vec![0.0; hidden],
            b_candidate: vec![0.0; hidden],
        }
    }

    pub fn init(hidden: usize, input: usize, rng: &mut Rng) -> Result<Self> {
        Ok(GruParams {
            w_reset: glorot_init(hidden, hidden + input, rng)?,
            w_update: glorot_init(hidden, hidden + input, rng)?,
            w_candidate: glorot_init(hidden, hidden + input, rng)?,
            b_reset: vec![0.0; hidden],
            b_update: vec![0.0; hidden],
            b_candidate: vec![0.0; hidden],
        })
    }

    pub fn hidden(&self) -> usize {
        self.b_reset.len()
    }

    pub fn input(&self) -> usize {
        self.w_reset.cols() - self.hidden()
    }

    fn validate(&self) -> Result<()> {
        let h = self.hidden();
        let cols = self.w_reset.cols();
        if cols < h {
            return Err(Error::dim("gru weight narrower than hidden size"));
        }
        check_shape("gru w_reset", &self.w_reset, h, cols)?;
        check_shape("gru w_update", &self.w_update, h, cols)?;
        check_shape("gru w_candidate", &self.w_candidate, h, cols)?;
        check_len("gru b_update", self.b_update.len(), h)?;
        check_len("gru b_candidate", self.b_candidate.len(), h)
    }
}

impl Parameters for GruParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.w_reset.as_slice(),
            self.w_update.as_slice(),
            self.w_candidate.as_slice(),
            &self.b_reset,
            &self.b_update,
            &self.b_candidate,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_reset.as_mut_slice(),
            self.w_update.as_mut_slice(),
            self.w_candidate.as_mut_slice(),
            &mut self.b_reset,
            &mut self.b_update,
            &mut self.b_candidate,
        ]
    }

    fn zeros_like(&self) -> Self {
        GruParams::zeros(self.hidden(), self.input())
    }
}

/// Intermediates of one GRU step.
#[derive(Debug, Clone)]
pub struct GruCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub reset: Vec<f64>,
    pub update: Vec<f64>,
    pub candidate: Vec<f64>,
    /// `reset ∘ h_prev`
    pub gated_prev: Vec<f64>,
}

pub fn gru_forward(x: &[f64], h_prev: &[f64], p: &GruParams) -> Result<(Vec<f64>, GruCache)> {
    p.validate()?;
    let h = p.hidden();
    check_len("gru h_prev", h_prev.len(), h)?;
    check_len("gru x", x.len(), p.input())?;
    Ok(gru_forward_unchecked(x, h_prev, p))
}

pub(crate) fn gru_forward_unchecked(
    x: &[f64],
    h_prev: &[f64],
    p: &GruParams,
) -> (Vec<f64>, GruCache) {
    let h = p.hidden();
    let mut reset = p.b_reset.clone();
    gemv_add(&p.w_reset, 0, h_prev, &mut reset);
    gemv_add(&p.w_reset, h, x, &mut reset);
    reset.iter_mut().for_each(|v| *v = sigmoid_scalar(*v));

    let mut update = p.b_update.clone();
    gemv_add(&p.w_update, 0, h_prev, &mut update);
    gemv_add(&p.w_update, h, x, &mut update);
    update.iter_mut().for_each(|v| *v = sigmoid_scalar(*v));

    let gated_prev: Vec<f64> = reset.iter().zip(h_prev).map(|(r, hp)| r * hp).collect();
    let mut candidate = p.b_candidate.clone();
    gemv_add(&p.w_candidate, 0, &gated_prev, &mut candidate);
    gemv_add(&p.w_candidate, h, x, &mut candidate);
    candidate.iter_mut().for_each(|v| *v = v.tanh());

    let h_t = (0..h)
        .map(|i| (1.0 - update[i]) * h_prev[i] + update[i] * candidate[i])
        .collect();
    let cache = GruCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        reset,
        update,
        candidate,
        gated_prev,
    };
    (h_t, cache)
}

#[derive(Debug, Clone)]
pub struct GruGrads {
    pub params: GruParams,
    pub dh_prev: Vec<f64>,
    pub dx: Vec<f64>,
}

pub fn gru_backward(dh: &[f64], cache: &GruCache, p: &GruParams) -> Result<GruGrads> {
    p.validate()?;
    check_len("gru dh", dh.len(), p.hidden())?;
    check_len("gru cache h_prev", cache.h_prev.len(), p.hidden())?;
    check_len("gru cache x", cache.x.len(), p.input())?;
    let mut grads = GruGrads {
        params: p.zeros_like(),
        dh_prev: vec![0.0; p.hidden()],
        dx: vec![0.0; p.input()],
    };
    gru_backward_into(
        dh,
        cache,
        p,
        &mut grads.params,
        &mut grads.dh_prev,
        &mut grads.dx,
    );
    Ok(grads)
}

/// Accumulates parameter gradients into `g` and adds into `dh_prev` / `dx`.
pub fn gru_backward_into(
    dh: &[f64],
    c: &GruCache,
    p: &GruParams,
    g: &mut GruParams,
    dh_prev: &mut [f64],
    dx: &mut [f64],
) {
    let h = p.hidden();
    let mut d_update_pre = vec![0.0; h];
    let mut d_cand_pre = vec![0.0; h];
    for i in 0..h {
        let z = c.update[i];
        let cand = c.candidate[i];
        d_update_pre[i] = dh[i] * (cand - c.h_prev[i]) * z * (1.0 - z);
        d_cand_pre[i] = dh[i] * z * (1.0 - cand * cand);
        dh_prev[i] += dh[i] * (1.0 - z);
    }

    outer_add(&mut g.w_candidate, 0, &d_cand_pre, &c.gated_prev);
    outer_add(&mut g.w_candidate, h, &d_cand_pre, &c.x);
    add_into(&mut g.b_candidate, &d_cand_pre);

    let mut d_gated = vec![0.0; h];
    gemv_t_add(&p.w_candidate, 0, &d_cand_pre, &mut d_gated);
    gemv_t_add(&p.w_candidate, h, &d_cand_pre, dx);

    let mut d_reset_pre = vec![0.0; h];
    for i in 0..h {
        let r = c.reset[i];
        d_reset_pre[i] = d_gated[i] * c.h_prev[i] * r * (1.0 - r);
        dh_prev[i] += d_gated[i] * r;
    }

    outer_add(&mut g.w_reset, 0, &d_reset_pre, &c.h_prev);
    outer_add(&mut g.w_reset, h, &d_reset_pre, &c.x);
    add_into(&mut g.b_reset, &d_reset_pre);
    outer_add(&mut g.w_update, 0, &d_update_pre, &c.h_prev);
    outer_add(&mut g.w_update, h, &d_update_pre, &c.x);
    add_into(&mut g.b_update, &d_update_pre);

    gemv_t_add(&p.w_reset, 0, &d_reset_pre, dh_prev);
    gemv_t_add(&p.w_reset, h, &d_reset_pre, dx);
    gemv_t_add(&p.w_update, 0, &d_update_pre, dh_prev);
    gemv_t_add(&p.w_update, h, &d_update_pre, dx);
}

// ---------------------------------------------------------------------------
// LSTM

/// Weights of one LSTM gate: `w` acts on `h_prev`, `u` on the input.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    pub w: Matrix,
    pub u: Matrix,
    pub b: Vec<f64>,
}

impl GateParams {
    fn zeros(hidden: usize, input: usize) -> Self {
        GateParams {
            w: Matrix::zeros(hidden, hidden),
            u: Matrix::zeros(hidden, input),
            b: vec![0.0; hidden],
        }
    }

    fn init(hidden: usize, input: usize, rng: &mut Rng) -> Result<Self> {
        let (w, u) = glorot_split(hidden, input, rng)?;
        Ok(GateParams {
            w,
            u,
            b: vec![0.0; hidden],
        })
    }

    #[inline]
    fn pre_activation(&self, h_prev: &[f64], x: &[f64]) -> Vec<f64> {
        let mut out = self.b.clone();
        gemv_add(&self.w, 0, h_prev, &mut out);
        gemv_add(&self.u, 0, x, &mut out);
        out
    }

    fn validate(&self, name: &str, hidden: usize, input: usize) -> Result<()> {
        check_shape(&format!("lstm {name}.w"), &self.w, hidden, hidden)?;
        check_shape(&format!("lstm {name}.u"), &self.u, hidden, input)?;
        check_len(&format!("lstm {name}.b"), self.b.len(), hidden)
    }

    fn accumulate(
        &self,
        g: &mut GateParams,
        d_pre: &[f64],
        c: &LstmCache,
        dh_prev: &mut [f64],
        dx: &mut [f64],
    ) {
        outer_add(&mut g.w, 0, d_pre, &c.h_prev);
        outer_add(&mut g.u, 0, d_pre, &c.x);
        add_into(&mut g.b, d_pre);
        gemv_t_add(&self.w, 0, d_pre, dh_prev);
        gemv_t_add(&self.u, 0, d_pre, dx);
    }
}

/// Standard four-gate LSTM: forget, input, candidate (cell input) and output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub forget: GateParams,
    pub input: GateParams,
    pub cell: GateParams,
    pub output: GateParams,
}

impl LstmParams {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        LstmParams {
            forget: GateParams::zeros(hidden, input),
            input: GateParams::zeros(hidden, input),
            cell: GateParams::zeros(hidden, input),
            output: GateParams::zeros(hidden, input),
        }
    }

    pub fn init(hidden: usize, input: usize, rng: &mut Rng) -> Result<Self> {
        Ok(LstmParams {
            forget: GateParams::init(hidden, input, rng)?,
            input: GateParams::init(hidden, input, rng)?,
            cell: GateParams::init(hidden, input, rng)?,
            output: GateParams::init(hidden, input, rng)?,
        })
    }

    pub fn hidden(&self) -> usize {
        self.forget.b.len()
    }

    pub fn input_size(&self) -> usize {
        self.forget.u.cols()
    }

    fn validate(&self) -> Result<()> {
        let (h, x) = (self.hidden(), self.input_size());
        self.forget.validate("forget", h, x)?;
        self.input.validate("input", h, x)?;
        self.cell.validate("cell", h, x)?;
        self.output.validate("output", h, x)
    }
}

impl Parameters for LstmParams {
    fn tensors(&self) -> Vec<&[f64]> {
        [&self.forget, &self.input, &self.cell, &self.output]
            .into_iter()
            .flat_map(|g| [g.w.as_slice(), g.u.as_slice(), g.b.as_slice()])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        [
            &mut self.forget,
            &mut self.input,
            &mut self.cell,
            &mut self.output,
        ]
        .into_iter()
        .flat_map(|g| [g.w.as_mut_slice(), g.u.as_mut_slice(), g.b.as_mut_slice()])
        .collect()
    }

    fn zeros_like(&self) -> Self {
        LstmParams::zeros(self.hidden(), self.input_size())
    }
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub forget: Vec<f64>,
    pub input: Vec<f64>,
    pub candidate: Vec<f64>,
    pub output: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

pub fn lstm_forward(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    p: &LstmParams,
) -> Result<(Vec<f64>, Vec<f64>, LstmCache)> {
    p.validate()?;
    check_len("lstm h_prev", h_prev.len(), p.hidden())?;
    check_len("lstm c_prev", c_prev.len(), p.hidden())?;
    check_len("lstm x", x.len(), p.input_size())?;
    Ok(lstm_forward_unchecked(x, h_prev, c_prev, p))
}

pub(crate) fn lstm_forward_unchecked(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    p: &LstmParams,
) -> (Vec<f64>, Vec<f64>, LstmCache) {
    let mut forget = p.forget.pre_activation(h_prev, x);
    forget.iter_mut().for_each(|v| *v = sigmoid_scalar(*v));
    let mut input = p.input.pre_activation(h_prev, x);
    input.iter_mut().for_each(|v| *v = sigmoid_scalar(*v));
    let mut candidate = p.cell.pre_activation(h_prev, x);
    candidate.iter_mut().for_each(|v| *v = v.tanh());
    let mut output = p.output.pre_activation(h_prev, x);
    output.iter_mut().for_each(|v| *v = sigmoid_scalar(*v));

    let c: Vec<f64> = (0..p.hidden())
        .map(|i| forget[i] * c_prev[i] + input[i] * candidate[i])
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = output.iter().zip(&tanh_c).map(|(o, t)| o * t).collect();
    let cache = LstmCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        forget,
        input,
        candidate,
        output,
        c: c.clone(),
        tanh_c,
    };
    (h, c, cache)
}

#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub params: LstmParams,
    pub dh_prev: Vec<f64>,
    pub dc_prev: Vec<f64>,
    pub dx: Vec<f64>,
}

pub fn lstm_backward(
    dh: &[f64],
    dc: &[f64],
    cache: &LstmCache,
    p: &LstmParams,
) -> Result<LstmGrads> {
    p.validate()?;
    let h = p.hidden();
    check_len("lstm dh", dh.len(), h)?;
    check_len("lstm dc", dc.len(), h)?;
    check_len("lstm cache c_prev", cache.c_prev.len(), h)?;
    check_len("lstm cache x", cache.x.len(), p.input_size())?;
    let mut grads = LstmGrads {
        params: p.zeros_like(),
        dh_prev: vec![0.0; h],
        dc_prev: vec![0.0; h],
        dx: vec![0.0; p.input_size()],
    };
    lstm_backward_into(
        dh,
        dc,
        cache,
        p,
        &mut grads.params,
        &mut grads.dh_prev,
        &mut grads.dc_prev,
        &mut grads.dx,
    );
    Ok(grads)
}

/// Accumulating LSTM backward step. `dc` is the gradient arriving at `c_t`
/// from the next step; the output path through `h_t` is added here.
#[allow(clippy::too_many_arguments)]
pub fn lstm_backward_into(
    dh: &[f64],
    dc: &[f64],
    c: &LstmCache,
    p: &LstmParams,
    g: &mut LstmParams,
    dh_prev: &mut [f64],
    dc_prev: &mut [f64],
    dx: &mut [f64],
) {
    let h = p.hidden();
    let mut d_f = vec![0.0; h];
    let mut d_i = vec![0.0; h];
    let mut d_g = vec![0.0; h];
    let mut d_o = vec![0.0; h];
    for k in 0..h {
        let tc = c.tanh_c[k];
        let o = c.output[k];
        let dc_total = dc[k] + dh[k] * o * (1.0 - tc * tc);
        let (f, i, gg) = (c.forget[k], c.input[k], c.candidate[k]);
        d_o[k] = dh[k] * tc * o * (1.0 - o);
        d_f[k] = dc_total * c.c_prev[k] * f * (1.0 - f);
        d_i[k] = dc_total * gg * i * (1.0 - i);
        d_g[k] = dc_total * i * (1.0 - gg * gg);
        dc_prev[k] += dc_total * f;
    }
    p.forget.accumulate(&mut g.forget, &d_f, c, dh_prev, dx);
    p.input.accumulate(&mut g.input, &d_i, c, dh_prev, dx);
    p.cell.accumulate(&mut g.cell, &d_g, c, dh_prev, dx);
    p.output.accumulate(&mut g.output, &d_o, c, dh_prev, dx);
}

// ---------------------------------------------------------------------------
// Vanilla RNN

#[derive(Debug, Clone, PartialEq)]
pub struct RnnParams {
    pub w: Matrix,
    pub u: Matrix,
    pub b: Vec<f64>,
}

impl RnnParams {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        RnnParams {
            w: Matrix::zeros(hidden, hidden),
            u: Matrix::zeros(hidden, input),
            b: vec![0.0; hidden],
        }
    }

    pub fn init(hidden: usize, input: usize, rng: &mut Rng) -> Result<Self> {
        let (w, u) = glorot_split(hidden, input, rng)?;
        Ok(RnnParams {
            w,
            u,
            b: vec![0.0; hidden],
        })
    }

    pub fn hidden(&self) -> usize {
        self.b.len()
    }

    pub fn input(&self) -> usize {
        self.u.cols()
    }

    fn validate(&self) -> Result<()> {
        let h = self.hidden();
        check_shape("rnn w", &self.w, h, h)?;
        check_shape("rnn u", &self.u, h, self.u.cols())
    }
}

impl Parameters for RnnParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.w.as_slice(), self.u.as_slice(), &self.b]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.w.as_mut_slice(), self.u.as_mut_slice(), &mut self.b]
    }

    fn zeros_like(&self) -> Self {
        RnnParams::zeros(self.hidden(), self.input())
    }
}

#[derive(Debug, Clone)]
pub struct RnnCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub h: Vec<f64>,
}

pub fn rnn_forward(x: &[f64], h_prev: &[f64], p: &RnnParams) -> Result<(Vec<f64>, RnnCache)> {
    p.validate()?;
    check_len("rnn h_prev", h_prev.len(), p.hidden())?;
    check_len("rnn x", x.len(), p.input())?;
    Ok(rnn_forward_unchecked(x, h_prev, p))
}

pub(crate) fn rnn_forward_unchecked(
    x: &[f64],
    h_prev: &[f64],
    p: &RnnParams,
) -> (Vec<f64>, RnnCache) {
    let mut h = p.b.clone();
    gemv_add(&p.w, 0, h_prev, &mut h);
    gemv_add(&p.u, 0, x, &mut h);
    h.iter_mut().for_each(|v| *v = v.tanh());
    let cache = RnnCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        h: h.clone(),
    };
    (h, cache)
}

#[derive(Debug, Clone)]
pub struct RnnGrads {
    pub params: RnnParams,
    pub dh_prev: Vec<f64>,
    pub dx: Vec<f64>,
}

pub fn rnn_backward(dh: &[f64], cache: &RnnCache, p: &RnnParams) -> Result<RnnGrads> {
    p.validate()?;
    check_len("rnn dh", dh.len(), p.hidden())?;
    check_len("rnn cache x", cache.x.len(), p.input())?;
    let mut grads = RnnGrads {
        params: p.zeros_like(),
        dh_prev: vec![0.0; p.hidden()],
        dx: vec![0.0; p.input()],
    };
    rnn_backward_into(
        dh,
        cache,
        p,
        &mut grads.params,
        &mut grads.dh_prev,
        &mut grads.dx,
    );
    Ok(grads)
}

pub fn rnn_backward_into(
    dh: &[f64],
    c: &RnnCache,
    p: &RnnParams,
    g: &mut RnnParams,
    dh_prev: &mut [f64],
    dx: &mut [f64],
) {
    let d_pre: Vec<f64> = dh
        .iter()
        .zip(&c.h)
        .map(|(d, h)| d * (1.0 - h * h))
        .collect();
    outer_add(&mut g.w, 0, &d_pre, &c.h_prev);
    outer_add(&mut g.u, 0, &d_pre, &c.x);
    add_into(&mut g.b, &d_pre);
    gemv_t_add(&p.w, 0, &d_pre, dh_prev);
    gemv_t_add(&p.u, 0, &d_pre, dx);
}

// ---------------------------------------------------------------------------
// Dense

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub w: Matrix,
    pub b: Vec<f64>,
    pub activation: Activation,
}

impl DenseParams {
    pub fn zeros(out: usize, input: usize, activation: Activation) -> Self {
        DenseParams {
            w: Matrix::zeros(out, input),
            b: vec![0.0; out],
            activation,
        }
    }

    pub fn init(out: usize, input: usize, activation: Activation, rng: &mut Rng) -> Result<Self> {
        Ok(DenseParams {
            w: glorot_init(out, input, rng)?,
            b: vec![0.0; out],
            activation,
        })
    }

    fn validate(&self) -> Result<()> {
        check_len("dense b", self.b.len(), self.w.rows())
    }
}

impl Parameters for DenseParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.w.as_slice(), &self.b]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.w.as_mut_slice(), &mut self.b]
    }

    fn zeros_like(&self) -> Self {
        DenseParams::zeros(self.w.rows(), self.w.cols(), self.activation)
    }
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    pub x: Vec<f64>,
    pub pre: Vec<f64>,
}

pub fn dense_forward(x: &[f64], p: &DenseParams) -> Result<(Vec<f64>, DenseCache)> {
    p.validate()?;
    check_len("dense x", x.len(), p.w.cols())?;
    Ok(dense_forward_unchecked(x, p))
}

pub(crate) fn dense_forward_unchecked(x: &[f64], p: &DenseParams) -> (Vec<f64>, DenseCache) {
    let mut pre = p.b.clone();
    gemv_add(&p.w, 0, x, &mut pre);
    let y = pre.iter().map(|&v| p.activation.apply(v)).collect();
    (y, DenseCache { x: x.to_vec(), pre })
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub params: DenseParams,
    pub dx: Vec<f64>,
}

pub fn dense_backward(dy: &[f64], cache: &DenseCache, p: &DenseParams) -> Result<DenseGrads> {
    p.validate()?;
    check_len("dense dy", dy.len(), p.w.rows())?;
    check_len("dense cache x", cache.x.len(), p.w.cols())?;
    let mut grads = DenseGrads {
        params: p.zeros_like(),
        dx: vec![0.0; p.w.cols()],
    };
    dense_backward_into(dy, cache, p, &mut grads.params, &mut grads.dx);
    Ok(grads)
}

pub fn dense_backward_into(
    dy: &[f64],
    c: &DenseCache,
    p: &DenseParams,
    g: &mut DenseParams,
    dx: &mut [f64],
) {
    let d_pre: Vec<f64> = dy
        .iter()
        .zip(&c.pre)
        .map(|(d, &z)| d * p.activation.derivative(z))
        .collect();
    outer_add(&mut g.w, 0, &d_pre, &c.x);
    add_into(&mut g.b, &d_pre);
    gemv_t_add(&p.w, 0, &d_pre, dx);
}

// ---------------------------------------------------------------------------
// Dropout

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Inverted dropout. Returns the output and the per-unit scale mask
/// (`0` or `1 / (1 - rate)`; all ones in infer mode).
pub fn dropout(x: &[f64], rate: f64, mode: Mode, rng: &mut Rng) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::config(format!("dropout rate {rate} outside [0, 1)")));
    }
    if mode == Mode::Infer || rate == 0.0 {
        return Ok((x.to_vec(), vec![1.0; x.len()]));
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = x
        .iter()
        .map(|_| if rng.bernoulli(rate) { 0.0 } else { keep })
        .collect();
    let y = x.iter().zip(&mask).map(|(v, m)| v * m).collect();
    Ok((y, mask))
}
