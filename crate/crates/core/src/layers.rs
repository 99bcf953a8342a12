//! Layer building blocks with explicit backward passes.

use crate::error::{Result, SpinnError};
use crate::tensor::ops::{self, BatchNormCache, BatchNormConfig, NormMode, RunningStats};
use crate::tensor::{Float, Matrix, ParamId, ParamStore, RngState};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    He,
    Uniform(Float, Float),
}

/// `y = x·W + b` with `W` stored `fan_in × fan_out`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn create(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        init: Init,
        rng: &mut RngState,
    ) -> Result<Self> {
        let w = match init {
            Init::He => ops::he_init(fan_in, fan_out, rng)?,
            Init::Uniform(lo, hi) => ops::uniform_init(fan_in, fan_out, lo, hi, rng)?,
        };
        let b = match init {
            Init::He => Matrix::zeros(1, fan_out),
            Init::Uniform(lo, hi) => ops::uniform_init(1, fan_out, lo, hi, rng)?,
        };
        Ok(Linear { w: store.add(&format!("{name}.w"), w)?, b: store.add(&format!("{name}.b"), b)? })
    }

    pub fn fan_in(&self, store: &ParamStore) -> usize {
        store.value(self.w).rows()
    }

    pub fn fan_out(&self, store: &ParamStore) -> usize {
        store.value(self.w).cols()
    }

    pub fn forward(&self, store: &ParamStore, x: &Matrix) -> Result<Matrix> {
        let mut y = x.matmul(store.value(self.w))?;
        y.add_row(store.value(self.b).data())?;
        Ok(y)
    }

    /// Accumulates parameter gradients only.
    pub fn backward_params(&self, store: &mut ParamStore, x: &Matrix, dy: &Matrix) -> Result<()> {
        store.grad_mut(self.w).add_matmul_tn(x, dy)?;
        dy.add_column_sums_to(store.grad_mut(self.b).data_mut());
        Ok(())
    }

    /// Accumulates parameter gradients and returns `dx`.
    pub fn backward(&self, store: &mut ParamStore, x: &Matrix, dy: &Matrix) -> Result<Matrix> {
        let dx = dy.matmul(&store.value(self.w).transpose())?;
        self.backward_params(store, x, dy)?;
        Ok(dx)
    }
}

/// Batch normalisation with trainable scale and shift plus running statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm {
    pub name: String,
    pub gamma: ParamId,
    pub beta: ParamId,
    pub stats: RunningStats,
    pub cfg: BatchNormConfig,
}

impl BatchNorm {
    pub fn create(store: &mut ParamStore, name: &str, features: usize, cfg: BatchNormConfig) -> Result<Self> {
        Ok(BatchNorm {
            name: name.to_string(),
            gamma: store.add(&format!("{name}.gamma"), Matrix::filled(1, features, 1.0))?,
            beta: store.add(&format!("{name}.beta"), Matrix::zeros(1, features))?,
            stats: RunningStats::new(features),
            cfg,
        })
    }

    pub fn forward(&mut self, store: &ParamStore, x: &Matrix, mode: NormMode) -> Result<(Matrix, BatchNormCache)> {
        ops::batch_norm(
            x,
            store.value(self.gamma).data(),
            store.value(self.beta).data(),
            mode,
            &mut self.stats,
            self.cfg,
        )
    }

    /// Evaluation mode in place; matches [`BatchNorm::forward`] exactly.
    pub fn eval_in_place(&self, store: &ParamStore, x: &mut Matrix) -> Result<()> {
        ops::batch_norm_eval_in_place(
            x,
            store.value(self.gamma).data(),
            store.value(self.beta).data(),
            &self.stats,
            self.cfg,
        )
    }

    pub fn backward(&self, store: &mut ParamStore, cache: &BatchNormCache, dy: &Matrix) -> Matrix {
        let gamma = store.value(self.gamma).data().to_vec();
        let mut dgamma = vec![0.0; gamma.len()];
        let mut dbeta = vec![0.0; gamma.len()];
        let dx = ops::batch_norm_backward(cache, &gamma, dy, &mut dgamma, &mut dbeta);
        for (g, d) in store.grad_mut(self.gamma).data_mut().iter_mut().zip(&dgamma) {
            *g += d;
        }
        for (g, d) in store.grad_mut(self.beta).data_mut().iter_mut().zip(&dbeta) {
            *g += d;
        }
        dx
    }
}

/// Elementwise product in place.
pub fn mul_in_place(x: &mut Matrix, mask: &Matrix) -> Result<()> {
    if x.shape() != mask.shape() {
        return Err(SpinnError::dims("mask", x.shape(), mask.shape()));
    }
    for (v, m) in x.data_mut().iter_mut().zip(mask.data()) {
        *v *= m;
    }
    Ok(())
}

/// Draws an inverted-dropout mask, or `None` when dropout is off or the keep rate is 1.
pub fn maybe_mask(rows: usize, cols: usize, keep: Float, active: bool, rng: &mut RngState) -> Result<Option<Matrix>> {
    if !active || keep == 1.0 {
        if !(keep > 0.0 && keep <= 1.0) {
            return Err(SpinnError::Config(format!("keep rate must be in (0, 1], got {keep}")));
        }
        return Ok(None);
    }
    ops::dropout_mask(rows, cols, keep, rng).map(Some)
}

/// Activated LSTM gates and cell state for one step over a batch.
#[derive(Clone, Debug)]
pub struct LstmCache {
    /// `[i, f, o, g]` after their nonlinearities.
    pub gates: Matrix,
    pub c_prev: Matrix,
    pub c: Matrix,
    pub tanh_c: Matrix,
}

/// One standard LSTM step from pre-activations `pre` (`m × 4H`, blocks `[i, f, o, g]`).
/// Returns the new hidden state.
pub fn lstm_cell(pre: Matrix, c_prev: Matrix) -> Result<(Matrix, LstmCache)> {
    let (m, w) = pre.shape();
    let hd = w / 4;
    if w != 4 * hd || c_prev.shape() != (m, hd) {
        return Err(SpinnError::dims("lstm_cell", pre.shape(), c_prev.shape()));
    }
    let mut gates = pre;
    let mut c = Matrix::zeros(m, hd);
    let mut tanh_c = Matrix::zeros(m, hd);
    let mut h = Matrix::zeros(m, hd);
    for r in 0..m {
        let g = gates.row_mut(r);
        ops::sigmoid_in_place(&mut g[..3 * hd]);
        ops::tanh_in_place(&mut g[3 * hd..]);
        let g = gates.row(r);
        let cp = c_prev.row(r);
        let cr = c.row_mut(r);
        for j in 0..hd {
            cr[j] = g[hd + j] * cp[j] + g[j] * g[3 * hd + j];
        }
        let tc = tanh_c.row_mut(r);
        tc.copy_from_slice(cr);
        ops::tanh_in_place(tc);
        for (j, hv) in h.row_mut(r).iter_mut().enumerate() {
            *hv = g[2 * hd + j] * tc[j];
        }
    }
    Ok((h, LstmCache { gates, c_prev, c, tanh_c }))
}

/// Backward of [`lstm_cell`] given upstream `dh` and `dc`. Returns
/// `(d_pre, dc_prev)`.
pub fn lstm_cell_backward(cache: &LstmCache, dh: &Matrix, dc: &Matrix) -> (Matrix, Matrix) {
    let (m, hd) = cache.c.shape();
    let mut d_pre = Matrix::zeros(m, 4 * hd);
    let mut dc_prev = Matrix::zeros(m, hd);
    for r in 0..m {
        let g = cache.gates.row(r);
        let cp = cache.c_prev.row(r);
        let tc = cache.tanh_c.row(r);
        let dh = dh.row(r);
        let dcr = dc.row(r);
        let out = d_pre.row_mut(r);
        for j in 0..hd {
            let (i, f, o, gg) = (g[j], g[hd + j], g[2 * hd + j], g[3 * hd + j]);
            let dct = dcr[j] + dh[j] * o * (1.0 - tc[j] * tc[j]);
            out[j] = dct * gg * i * (1.0 - i);
            out[hd + j] = dct * cp[j] * f * (1.0 - f);
            out[2 * hd + j] = dh[j] * tc[j] * o * (1.0 - o);
            out[3 * hd + j] = dct * i * (1.0 - gg * gg);
            dc_prev.set(r, j, dct * f);
        }
    }
    (d_pre, dc_prev)
}

/// Activated TreeLSTM gates for a batch of compositions.
#[derive(Clone, Debug)]
pub struct ComposeCache {
    /// `[i, f_l, f_r, o, g]` after their nonlinearities.
    pub gates: Matrix,
    pub c_left: Matrix,
    pub c_right: Matrix,
    pub tanh_c: Matrix,
}

/// TreeLSTM cell from pre-activations `pre` (`m × 5D`). `c_right` belongs to the
/// stack top. Returns rows `[h; c]` of width `2D`.
///
/// `c = f_l ⊙ c_left + f_r ⊙ c_right + i ⊙ g`, `h = o ⊙ tanh(c)`. With `swap_forget`
/// the forget gates trade children.
pub fn compose_cell(pre: Matrix, c_left: Matrix, c_right: Matrix, swap_forget: bool) -> Result<(Matrix, ComposeCache)> {
    let (m, w) = pre.shape();
    let d = w / 5;
    if w != 5 * d || c_left.shape() != (m, d) || c_right.shape() != (m, d) {
        return Err(SpinnError::dims("compose_cell", pre.shape(), c_left.shape()));
    }
    let mut gates = pre;
    let mut tanh_c = Matrix::zeros(m, d);
    let mut out = Matrix::zeros(m, 2 * d);
    for r in 0..m {
        let g = gates.row_mut(r);
        ops::sigmoid_in_place(&mut g[..4 * d]);
        ops::tanh_in_place(&mut g[4 * d..]);
        let g = gates.row(r);
        let (cl, cr) = if swap_forget { (c_right.row(r), c_left.row(r)) } else { (c_left.row(r), c_right.row(r)) };
        let o = out.row_mut(r);
        for j in 0..d {
            o[d + j] = g[d + j] * cl[j] + g[2 * d + j] * cr[j] + g[j] * g[4 * d + j];
        }
        let tc = tanh_c.row_mut(r);
        tc.copy_from_slice(&o[d..]);
        ops::tanh_in_place(tc);
        for j in 0..d {
            o[j] = g[3 * d + j] * tc[j];
        }
    }
    Ok((out, ComposeCache { gates, c_left, c_right, tanh_c }))
}

/// Backward of [`compose_cell`]. Returns `(d_pre, dc_left, dc_right)`.
pub fn compose_cell_backward(cache: &ComposeCache, d_out: &Matrix, swap_forget: bool) -> (Matrix, Matrix, Matrix) {
    let (m, d) = cache.c_left.shape();
    let mut d_pre = Matrix::zeros(m, 5 * d);
    let mut dcl = Matrix::zeros(m, d);
    let mut dcr = Matrix::zeros(m, d);
    for r in 0..m {
        let g = cache.gates.row(r);
        let tc = cache.tanh_c.row(r);
        let (cl, cr) = if swap_forget {
            (cache.c_right.row(r), cache.c_left.row(r))
        } else {
            (cache.c_left.row(r), cache.c_right.row(r))
        };
        let dout = d_out.row(r);
        let dp = d_pre.row_mut(r);
        let mut dfl = vec![0.0; d];
        let mut dfr = vec![0.0; d];
        for j in 0..d {
            let (i, fl, fr, o, gg) = (g[j], g[d + j], g[2 * d + j], g[3 * d + j], g[4 * d + j]);
            let dh = dout[j];
            let dc = dout[d + j] + dh * o * (1.0 - tc[j] * tc[j]);
            dp[j] = dc * gg * i * (1.0 - i);
            dp[d + j] = dc * cl[j] * fl * (1.0 - fl);
            dp[2 * d + j] = dc * cr[j] * fr * (1.0 - fr);
            dp[3 * d + j] = dh * tc[j] * o * (1.0 - o);
            dp[4 * d + j] = dc * i * (1.0 - gg * gg);
            dfl[j] = dc * fl;
            dfr[j] = dc * fr;
        }
        let (a, b) = if swap_forget { (&dfr, &dfl) } else { (&dfl, &dfr) };
        dcl.row_mut(r).copy_from_slice(a);
        dcr.row_mut(r).copy_from_slice(b);
    }
    (d_pre, dcl, dcr)
}
