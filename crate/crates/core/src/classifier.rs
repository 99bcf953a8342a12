//! Sentence-pair head: feature construction, MLP, softmax and the training objective.

use crate::data::Label;
use crate::error::{Result, SpinnError};
use crate::layers::{self, BatchNorm, Init, Linear};
use crate::tensor::ops::{self, BatchNormCache, BatchNormConfig, NormMode};
use crate::tensor::{Float, Matrix, ParamStore, RngState};
use crate::transitions::Transition;

pub const LABELS: usize = 3;

/// `[h_p; h_h; h_p − h_h; h_p ⊙ h_h]` per row.
pub fn pair_features(hp: &Matrix, hh: &Matrix) -> Result<Matrix> {
    if hp.shape() != hh.shape() {
        return Err(SpinnError::dims("pair_features", hp.shape(), hh.shape()));
    }
    let (b, d) = hp.shape();
    let mut x = Matrix::zeros(b, 4 * d);
    for i in 0..b {
        let (p, h) = (hp.row(i), hh.row(i));
        let row = x.row_mut(i);
        for j in 0..d {
            row[j] = p[j];
            row[d + j] = h[j];
            row[2 * d + j] = p[j] - h[j];
            row[3 * d + j] = p[j] * h[j];
        }
    }
    Ok(x)
}

/// Gradients of [`pair_features`] with respect to both inputs.
pub fn pair_features_backward(hp: &Matrix, hh: &Matrix, dx: &Matrix) -> (Matrix, Matrix) {
    let (b, d) = hp.shape();
    let mut dp = Matrix::zeros(b, d);
    let mut dh = Matrix::zeros(b, d);
    for i in 0..b {
        let (p, h, g) = (hp.row(i), hh.row(i), dx.row(i));
        for j in 0..d {
            let (g_p, g_h, g_diff, g_prod) = (g[j], g[d + j], g[2 * d + j], g[3 * d + j]);
            dp.row_mut(i)[j] = g_p + g_diff + g_prod * h[j];
            dh.row_mut(i)[j] = g_h - g_diff + g_prod * p[j];
        }
    }
    (dp, dh)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierConfig {
    /// Hidden ReLU layers, 0 to 3.
    pub layers: usize,
    pub hidden: usize,
    /// Dropout keep rate on the MLP input and hidden outputs.
    pub keep: Float,
    pub bn: BatchNormConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig { layers: 2, hidden: 1024, keep: 0.94, bn: BatchNormConfig::default() }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers > 3 {
            return Err(SpinnError::Config(format!("mlp_layers must be 0 to 3, got {}", self.layers)));
        }
        if self.layers > 0 && self.hidden == 0 {
            return Err(SpinnError::Config("mlp hidden width must be positive".into()));
        }
        if !(self.keep > 0.0 && self.keep <= 1.0) {
            return Err(SpinnError::Config(format!("mlp keep rate must be in (0, 1], got {}", self.keep)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct HiddenCache {
    input: Matrix,
    relu: Matrix,
    bn: BatchNormCache,
    mask: Option<Matrix>,
}

#[derive(Clone, Debug)]
pub struct ClassifierCache {
    in_bn: BatchNormCache,
    in_mask: Option<Matrix>,
    hidden: Vec<HiddenCache>,
    last: Matrix,
}

/// MLP over pair features: batch norm and dropout on the input, then per hidden
/// layer Linear, ReLU, batch norm, dropout; a final Linear gives the three logits.
#[derive(Clone, Debug)]
pub struct Classifier {
    pub config: ClassifierConfig,
    pub in_bn: BatchNorm,
    pub hidden: Vec<(Linear, BatchNorm)>,
    pub out: Linear,
}

impl Classifier {
    /// Registers parameters under `cls.*` for features of width `4 * dim`.
    pub fn create(config: ClassifierConfig, dim: usize, store: &mut ParamStore, rng: &mut RngState) -> Result<Self> {
        config.validate()?;
        let mut width = 4 * dim;
        let in_bn = BatchNorm::create(store, "cls.in.bn", width, config.bn)?;
        let mut hidden = Vec::with_capacity(config.layers);
        for i in 0..config.layers {
            let lin = Linear::create(store, &format!("cls.h{i}"), width, config.hidden, Init::He, rng)?;
            let bn = BatchNorm::create(store, &format!("cls.h{i}.bn"), config.hidden, config.bn)?;
            hidden.push((lin, bn));
            width = config.hidden;
        }
        let out = Linear::create(store, "cls.out", width, LABELS, Init::Uniform(-0.005, 0.005), rng)?;
        Ok(Classifier { config, in_bn, hidden, out })
    }

    /// Logits (`B × 3`) for a batch of pair features.
    pub fn forward(
        &mut self,
        store: &ParamStore,
        features: &Matrix,
        norm: NormMode,
        dropout: bool,
        rng: &mut RngState,
    ) -> Result<(Matrix, ClassifierCache)> {
        let keep = self.config.keep;
        let (mut x, in_bn) = self.in_bn.forward(store, features, norm)?;
        let in_mask = layers::maybe_mask(x.rows(), x.cols(), keep, dropout, rng)?;
        if let Some(m) = &in_mask {
            layers::mul_in_place(&mut x, m)?;
        }
        let mut hidden = Vec::with_capacity(self.hidden.len());
        for (lin, bn) in &mut self.hidden {
            let relu = lin.forward(store, &x)?.map(ops::relu);
            let (mut y, bn_cache) = bn.forward(store, &relu, norm)?;
            let mask = layers::maybe_mask(y.rows(), y.cols(), keep, dropout, rng)?;
            if let Some(m) = &mask {
                layers::mul_in_place(&mut y, m)?;
            }
            hidden.push(HiddenCache { input: x, relu, bn: bn_cache, mask });
            x = y;
        }
        let logits = self.out.forward(store, &x)?;
        Ok((logits, ClassifierCache { in_bn, in_mask, hidden, last: x }))
    }

    /// Accumulates parameter gradients and returns the gradient on the features.
    pub fn backward(&self, store: &mut ParamStore, cache: &ClassifierCache, d_logits: &Matrix) -> Result<Matrix> {
        let mut dx = self.out.backward(store, &cache.last, d_logits)?;
        for ((lin, bn), hc) in self.hidden.iter().zip(&cache.hidden).rev() {
            if let Some(m) = &hc.mask {
                layers::mul_in_place(&mut dx, m)?;
            }
            let mut d_relu = bn.backward(store, &hc.bn, &dx);
            for (g, r) in d_relu.data_mut().iter_mut().zip(hc.relu.data()) {
                if *r <= 0.0 {
                    *g = 0.0;
                }
            }
            dx = lin.backward(store, &hc.input, &d_relu)?;
        }
        if let Some(m) = &cache.in_mask {
            layers::mul_in_place(&mut dx, m)?;
        }
        Ok(self.in_bn.backward(store, &cache.in_bn, &dx))
    }

    pub fn batch_norms(&self) -> impl Iterator<Item = &BatchNorm> {
        std::iter::once(&self.in_bn).chain(self.hidden.iter().map(|(_, bn)| bn))
    }

    pub fn batch_norms_mut(&mut self) -> impl Iterator<Item = &mut BatchNorm> {
        std::iter::once(&mut self.in_bn).chain(self.hidden.iter_mut().map(|(_, bn)| bn))
    }
}

/// Weights of the auxiliary terms of the objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    /// Transition loss weight `α`.
    pub alpha: Float,
    /// L2 coefficient `λ`.
    pub lambda: Float,
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.lambda >= 0.0) {
            return Err(SpinnError::Config(format!("alpha and lambda must be non-negative, got {self:?}")));
        }
        Ok(())
    }
}

/// Mean cross-entropy of softmax rows against `gold`, and its gradient on the logits.
pub fn cross_entropy(logits: &Matrix, gold: &[usize]) -> Result<(Float, Matrix)> {
    if logits.rows() != gold.len() {
        return Err(SpinnError::dims("cross_entropy", logits.shape(), (gold.len(), logits.cols())));
    }
    if let Some(&g) = gold.iter().find(|&&g| g >= logits.cols()) {
        return Err(SpinnError::Data { line: 0, message: format!("label {g} outside 0..{}", logits.cols()) });
    }
    let n = gold.len().max(1) as Float;
    let mut d = ops::softmax_rows(logits);
    let mut loss = 0.0;
    for (i, &g) in gold.iter().enumerate() {
        let row = d.row_mut(i);
        loss -= row[g].max(Float::MIN_POSITIVE).ln();
        row[g] -= 1.0;
        for v in row.iter_mut() {
            *v /= n;
        }
    }
    Ok((loss / n, d))
}

/// Label cross-entropy for [`Label`]s.
pub fn label_loss(logits: &Matrix, gold: &[Label]) -> Result<(Float, Matrix)> {
    let idx: Vec<usize> = gold.iter().map(|l| l.index()).collect();
    cross_entropy(logits, &idx)
}

/// Transition cross-entropy for `lanes`, averaged over each lane's non-PAD steps and
/// then over the lanes. Gradients are scaled by `weight` and written into `d_logits`
/// (`B_total × 2` per step).
pub fn transition_loss(
    logits: &[Matrix],
    gold: &[&[Transition]],
    lanes: std::ops::Range<usize>,
    weight: Float,
    d_logits: &mut [Matrix],
) -> Result<Float> {
    let lane_count = lanes.len().max(1) as Float;
    let mut total = 0.0;
    for b in lanes {
        let seq = gold[b];
        if seq.len() != logits.len() {
            return Err(SpinnError::Internal(format!("lane {b}: {} gold steps for {} logits", seq.len(), logits.len())));
        }
        let real = seq.iter().filter(|&&a| a != Transition::Pad).count();
        if real == 0 {
            continue;
        }
        let mut lane_loss = 0.0;
        for (t, a) in seq.iter().enumerate() {
            let Some(class) = a.class() else { continue };
            let p = ops::softmax(logits[t].row(b));
            lane_loss -= p[class].max(Float::MIN_POSITIVE).ln();
            let scale = weight / (lane_count * real as Float);
            let row = d_logits[t].row_mut(b);
            for (k, pk) in p.iter().enumerate() {
                row[k] += scale * (pk - if k == class { 1.0 } else { 0.0 });
            }
        }
        total += lane_loss / real as Float;
    }
    Ok(total / lane_count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn features_blocks() {
        let v = Matrix::row_vector(&[1.0, -2.0]);
        let x = pair_features(&v, &v).unwrap();
        assert_eq!(x.data(), &[1.0, -2.0, 1.0, -2.0, 0.0, 0.0, 1.0, 4.0]);
        let z = Matrix::zeros(1, 2);
        let x = pair_features(&z, &v).unwrap();
        assert_eq!(x.data(), &[0.0, 0.0, 1.0, -2.0, -1.0, 2.0, 0.0, 0.0]);
        assert!(pair_features(&z, &Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn uniform_loss_and_zero_params() {
        let (l, _) = cross_entropy(&Matrix::zeros(4, 3), &[0, 1, 2, 0]).unwrap();
        assert!((l - 3f64.ln() as Float).abs() < 1e-12);
        let (l, _) = cross_entropy(&Matrix::row_vector(&[1e3, 0.0, 0.0]), &[0]).unwrap();
        assert_eq!(l, 0.0);
        assert!(cross_entropy(&Matrix::zeros(1, 3), &[3]).is_err());

        let mut store = ParamStore::new();
        let mut rng = RngState::new(2);
        let cfg = ClassifierConfig { layers: 2, hidden: 5, ..Default::default() };
        let mut cls = Classifier::create(cfg, 2, &mut store, &mut rng).unwrap();
        store.zero_values();
        let x = Matrix::from_rows(&[[0.3, 1.0, -1.0, 2.0, 0.0, 1.0, 1.0, 1.0]]).unwrap();
        let (logits, _) = cls.forward(&store, &x, NormMode::Eval, false, &mut rng).unwrap();
        let p = ops::softmax(logits.row(0));
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn hand_computed_two_layer_forward() {
        let mut store = ParamStore::new();
        let mut rng = RngState::new(0);
        let cfg = ClassifierConfig { layers: 1, hidden: 2, keep: 1.0, ..Default::default() };
        let mut cls = Classifier::create(cfg, 1, &mut store, &mut rng).unwrap();
        let w0 = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, -1.0], [0.5, 0.5]]).unwrap();
        *store.value_mut(cls.hidden[0].0.w) = w0;
        *store.value_mut(cls.out.w) = Matrix::from_rows(&[[1.0, 0.0, 2.0], [0.0, 1.0, -1.0]]).unwrap();
        store.value_mut(cls.out.b).fill(0.0);
        // identity batch norms in evaluation mode
        let x = pair_features(&Matrix::row_vector(&[2.0]), &Matrix::row_vector(&[3.0])).unwrap();
        let (logits, _) = cls.forward(&store, &x, NormMode::Eval, false, &mut rng).unwrap();
        let s = 1.0 / (1.0 + 1e-5 as Float).sqrt();
        // features [2, 3, -1, 6]; hidden pre-ReLU [2 - 1 + 3, 3 + 1 + 3] = [4, 7]
        let (h0, h1) = (4.0 * s * s, 7.0 * s * s);
        let expect = [h0, h1, 2.0 * h0 - h1];
        for (a, b) in logits.row(0).iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn classifier_gradients_match_finite_differences() {
        let mut store = ParamStore::new();
        let mut rng = RngState::new(11);
        let cfg = ClassifierConfig { layers: 2, hidden: 4, keep: 1.0, ..Default::default() };
        let mut cls = Classifier::create(cfg, 2, &mut store, &mut rng).unwrap();
        for bn in cls.batch_norms_mut() {
            for (m, v) in bn.stats.mean.iter_mut().zip(bn.stats.var.iter_mut()) {
                *m = rng.uniform(-0.5, 0.5) as Float;
                *v = rng.uniform(0.5, 2.0) as Float;
            }
        }
        for e in store.entries_mut() {
            for v in e.value.data_mut() {
                *v += rng.uniform(-0.3, 0.3) as Float;
            }
        }
        let hp = ops::uniform_init(3, 2, -1.0, 1.0, &mut rng).unwrap();
        let hh = ops::uniform_init(3, 2, -1.0, 1.0, &mut rng).unwrap();
        let gold = [0, 2, 1];
        let x = pair_features(&hp, &hh).unwrap();
        let (logits, cache) = cls.forward(&store, &x, NormMode::Eval, false, &mut rng).unwrap();
        let (_, dl) = cross_entropy(&logits, &gold).unwrap();
        store.zero_grads();
        let dx = cls.backward(&mut store, &cache, &dl).unwrap();
        let (dp, _) = pair_features_backward(&hp, &hh, &dx);

        let mut probe = cls.clone();
        let numeric = crate::oracles::finite_diff_grad(&mut store, 1e-5, |s| {
            let (l, _) = probe.forward(s, &x, NormMode::Eval, false, &mut RngState::new(0))?;
            Ok(cross_entropy(&l, &gold)?.0)
        })
        .unwrap();
        for (e, n) in store.entries().iter().zip(&numeric) {
            for (a, b) in e.grad.data().iter().zip(n.data()) {
                assert!(crate::oracles::relative_error(*a, *b) < 1e-6, "{}: {a} vs {b}", e.name);
            }
        }
        let h = 1e-5;
        for j in 0..2 {
            let mut up = hp.clone();
            up.set(1, j, up.get(1, j) + h);
            let mut dn = hp.clone();
            dn.set(1, j, dn.get(1, j) - h);
            let f = |p: &Matrix| {
                let (l, _) = probe
                    .clone()
                    .forward(&store, &pair_features(p, &hh).unwrap(), NormMode::Eval, false, &mut RngState::new(0))
                    .unwrap();
                cross_entropy(&l, &gold).unwrap().0
            };
            let num = (f(&up) - f(&dn)) / (2.0 * h);
            assert!(crate::oracles::relative_error(dp.get(1, j), num) < 1e-6);
        }
    }

    #[test]
    fn transition_loss_skips_padding() {
        use Transition::{Pad, Reduce, Shift};
        let logits = vec![Matrix::zeros(2, 2); 3];
        let a = [Pad, Shift, Shift];
        let b = [Shift, Shift, Reduce];
        let mut d = vec![Matrix::zeros(2, 2); 3];
        let l = transition_loss(&logits, &[&a, &b], 0..2, 2.0, &mut d).unwrap();
        assert!((l - 2f64.ln() as Float).abs() < 1e-12);
        assert_eq!(d[0].row(0), &[0.0, 0.0]);
        assert!((d[1].row(0)[0] - 2.0 * (0.5 - 1.0) / (2.0 * 2.0)).abs() < 1e-15);
        assert!((d[2].row(1)[1] - 2.0 * (0.5 - 1.0) / (2.0 * 3.0)).abs() < 1e-15);
    }
}
