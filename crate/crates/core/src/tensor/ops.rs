//! Activations, dropout, batch normalisation and initialisers, each with the
//! backward rule the model layers need.

use super::{Float, Matrix, RngState};
use crate::error::{Result, SpinnError};

const LOG2E: f64 = std::f64::consts::LOG2_E;
const LN2_HI: f64 = 6.931_471_803_691_238e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
/// `1.5 * 2^52`: adding it rounds to an integer held in the low mantissa bits.
const SHIFTER: f64 = 6_755_399_441_055_744.0;

/// Branch-free `e^x` from plain multiplies and adds, so a vectorised loop and a
/// scalar call agree to the bit. Within 2 ulp of the true value; NaN propagates.
#[inline(always)]
fn exp_core(x: f64) -> f64 {
    let xc = x.clamp(-708.0, 709.0);
    let t = xc * LOG2E + SHIFTER;
    let nf = t - SHIFTER;
    let r = xc - nf * LN2_HI - nf * LN2_LO;
    let mut p = 1.0 / 6_227_020_800.0;
    for c in [
        1.0 / 479_001_600.0,
        1.0 / 39_916_800.0,
        1.0 / 3_628_800.0,
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5_040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
        1.0,
    ] {
        p = p * r + c;
    }
    let n = (t.to_bits() as i64).wrapping_sub(SHIFTER.to_bits() as i64);
    let y = p * f64::from_bits(((n + 1023) as u64) << 52);
    if x < -708.0 {
        0.0
    } else if x > 709.0 {
        f64::INFINITY
    } else {
        y
    }
}

#[inline(always)]
fn sigmoid_core(x: Float) -> Float {
    (1.0 / (1.0 + exp_core(-x))) as Float
}

#[inline(always)]
fn tanh_core(x: Float) -> Float {
    (1.0 - 2.0 / (1.0 + exp_core(2.0 * x))) as Float
}

#[inline]
pub fn sigmoid(x: Float) -> Float {
    sigmoid_core(x)
}

/// Agrees with `f64::tanh` to about 1e-16 absolute.
#[inline]
pub fn tanh(x: Float) -> Float {
    tanh_core(x)
}

macro_rules! slice_map {
    ($name:ident, $core:ident) => {
        /// Applies the scalar function of the same name in place; identical results.
        pub fn $name(xs: &mut [Float]) {
            #[cfg(target_arch = "x86_64")]
            {
                #[target_feature(enable = "avx2")]
                unsafe fn wide(xs: &mut [Float]) {
                    for x in xs.iter_mut() {
                        *x = $core(*x);
                    }
                }
                if std::arch::is_x86_feature_detected!("avx2") {
                    // SAFETY: the feature was detected at runtime.
                    unsafe { wide(xs) };
                    return;
                }
            }
            for x in xs.iter_mut() {
                *x = $core(*x);
            }
        }
    };
}

slice_map!(sigmoid_in_place, sigmoid_core);
slice_map!(tanh_in_place, tanh_core);

#[inline]
pub fn relu(x: Float) -> Float {
    x.max(0.0)
}

/// Softmax of one row, shifted by its maximum.
pub fn softmax(row: &[Float]) -> Vec<Float> {
    let mut out = row.to_vec();
    softmax_in_place(&mut out);
    out
}

pub fn softmax_in_place(row: &mut [Float]) {
    let max = row.iter().copied().fold(Float::NEG_INFINITY, Float::max);
    let mut sum = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in row.iter_mut() {
        *x /= sum;
    }
}

pub fn softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for i in 0..out.rows() {
        softmax_in_place(out.row_mut(i));
    }
    out
}

/// Inverted-dropout mask: entries are `0` or `1 / keep_rate`.
pub fn dropout_mask(rows: usize, cols: usize, keep_rate: Float, rng: &mut RngState) -> Result<Matrix> {
    if !(keep_rate > 0.0 && keep_rate <= 1.0) {
        return Err(SpinnError::Config(format!("keep rate must be in (0, 1], got {keep_rate}")));
    }
    if keep_rate == 1.0 {
        return Ok(Matrix::filled(rows, cols, 1.0));
    }
    let scale = 1.0 / keep_rate;
    let keep = keep_rate;
    let data = (0..rows * cols)
        .map(|_| if rng.unit() < keep { scale } else { 0.0 })
        .collect();
    Matrix::new(rows, cols, data)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormMode {
    Train,
    Eval,
}

/// Running per-feature statistics for evaluation-mode normalisation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<Float>,
    pub var: Vec<Float>,
}

impl RunningStats {
    pub fn new(features: usize) -> Self {
        RunningStats { mean: vec![0.0; features], var: vec![1.0; features] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchNormConfig {
    pub eps: Float,
    pub momentum: Float,
}

impl Default for BatchNormConfig {
    fn default() -> Self {
        BatchNormConfig { eps: 1e-5, momentum: 0.9 }
    }
}

#[derive(Clone, Debug)]
pub struct BatchNormCache {
    mode: NormMode,
    xhat: Matrix,
    inv_std: Vec<Float>,
}

/// Normalises each column of `x`, then scales by `gamma` and shifts by `beta`.
///
/// Training mode uses the batch statistics (biased variance) and folds them into
/// `stats` with the configured momentum; the running variance uses the unbiased
/// estimate. Evaluation mode reads `stats` only.
pub fn batch_norm(
    x: &Matrix,
    gamma: &[Float],
    beta: &[Float],
    mode: NormMode,
    stats: &mut RunningStats,
    cfg: BatchNormConfig,
) -> Result<(Matrix, BatchNormCache)> {
    let (m, f) = x.shape();
    if gamma.len() != f || beta.len() != f || stats.mean.len() != f {
        return Err(SpinnError::dims("batch_norm", x.shape(), (1, gamma.len())));
    }
    let (mean, var) = match mode {
        NormMode::Train => {
            if m < 2 {
                return Err(SpinnError::Config(format!(
                    "batch norm in training mode needs at least 2 rows, got {m}"
                )));
            }
            let mut mean = vec![0.0; f];
            x.add_column_sums_to(&mut mean);
            mean.iter_mut().for_each(|v| *v /= m as Float);
            let mut var = vec![0.0; f];
            for row in x.data().chunks_exact(f) {
                for j in 0..f {
                    let d = row[j] - mean[j];
                    var[j] += d * d;
                }
            }
            var.iter_mut().for_each(|v| *v /= m as Float);
            let unbias = m as Float / (m as Float - 1.0);
            for j in 0..f {
                stats.mean[j] = cfg.momentum * stats.mean[j] + (1.0 - cfg.momentum) * mean[j];
                stats.var[j] = cfg.momentum * stats.var[j] + (1.0 - cfg.momentum) * var[j] * unbias;
            }
            (mean, var)
        }
        NormMode::Eval => (stats.mean.clone(), stats.var.clone()),
    };
    let inv_std: Vec<Float> = var.iter().map(|v| 1.0 / (v + cfg.eps).sqrt()).collect();
    let mut xhat = x.clone();
    let mut y = Matrix::zeros(m, f);
    for i in 0..m {
        let xr = xhat.row_mut(i);
        for j in 0..f {
            xr[j] = (xr[j] - mean[j]) * inv_std[j];
        }
        let yr = y.row_mut(i);
        for j in 0..f {
            yr[j] = gamma[j] * xr[j] + beta[j];
        }
    }
    Ok((y, BatchNormCache { mode, xhat, inv_std }))
}

/// Evaluation-mode [`batch_norm`] applied in place, without a cache.
pub fn batch_norm_eval_in_place(
    x: &mut Matrix,
    gamma: &[Float],
    beta: &[Float],
    stats: &RunningStats,
    cfg: BatchNormConfig,
) -> Result<()> {
    let f = x.cols();
    if gamma.len() != f || beta.len() != f || stats.mean.len() != f {
        return Err(SpinnError::dims("batch_norm", x.shape(), (1, gamma.len())));
    }
    let inv_std: Vec<Float> = stats.var.iter().map(|v| 1.0 / (v + cfg.eps).sqrt()).collect();
    for row in x.data_mut().chunks_exact_mut(f) {
        for j in 0..f {
            row[j] = gamma[j] * ((row[j] - stats.mean[j]) * inv_std[j]) + beta[j];
        }
    }
    Ok(())
}

/// Returns `dx` and accumulates into `dgamma` / `dbeta`.
pub fn batch_norm_backward(
    cache: &BatchNormCache,
    gamma: &[Float],
    dy: &Matrix,
    dgamma: &mut [Float],
    dbeta: &mut [Float],
) -> Matrix {
    let (m, f) = dy.shape();
    let mut sum_dxhat = vec![0.0; f];
    let mut sum_dxhat_xhat = vec![0.0; f];
    for i in 0..m {
        let d = dy.row(i);
        let xh = cache.xhat.row(i);
        for j in 0..f {
            dgamma[j] += d[j] * xh[j];
            dbeta[j] += d[j];
            let dxh = d[j] * gamma[j];
            sum_dxhat[j] += dxh;
            sum_dxhat_xhat[j] += dxh * xh[j];
        }
    }
    let mut dx = Matrix::zeros(m, f);
    for i in 0..m {
        let d = dy.row(i);
        let xh = cache.xhat.row(i);
        let out = dx.row_mut(i);
        for j in 0..f {
            let dxh = d[j] * gamma[j];
            out[j] = match cache.mode {
                NormMode::Eval => dxh * cache.inv_std[j],
                NormMode::Train => {
                    cache.inv_std[j] / m as Float
                        * (m as Float * dxh - sum_dxhat[j] - xh[j] * sum_dxhat_xhat[j])
                }
            };
        }
    }
    dx
}

/// He initialisation for a weight stored input-major (`rows` = fan-in): uniform on
/// `±sqrt(6 / fan_in)`, which has zero mean and variance `2 / fan_in`.
pub fn he_init(rows: usize, cols: usize, rng: &mut RngState) -> Result<Matrix> {
    if rows == 0 || cols == 0 {
        return Err(SpinnError::Config(format!("he_init needs positive dims, got {rows}x{cols}")));
    }
    let bound = (6.0 / rows as f64).sqrt();
    uniform_init(rows, cols, -bound as Float, bound as Float, rng)
}

pub fn uniform_init(rows: usize, cols: usize, lo: Float, hi: Float, rng: &mut RngState) -> Result<Matrix> {
    if lo > hi {
        return Err(SpinnError::Config(format!("uniform_init bounds reversed: {lo} > {hi}")));
    }
    if rows == 0 || cols == 0 {
        return Err(SpinnError::Config(format!("uniform_init needs positive dims, got {rows}x{cols}")));
    }
    let data = (0..rows * cols)
        .map(|_| (rng.uniform(lo, hi) as Float).clamp(lo, hi))
        .collect();
    Matrix::new(rows, cols, data)
}
