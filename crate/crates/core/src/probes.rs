//! Deterministic convex solvers for linear probes.
//!
//! Binary models minimise
//!
//! ```text
//! F(w, b) = C * sum_i s_i * loss(y_i * (w.x_i + b)) + R(w)
//! ```
//!
//! with per-sample weights `s_i` summing to one (uniform, or inversely
//! proportional to class frequency when balanced), `R = ||w||^2 / 2` (L2)
//! or `||w||_1` (L1), and an unpenalised intercept. Because the loss term is
//! a weighted mean, `C` does not scale with the sample count. The solver is
//! accelerated proximal gradient with backtracking and adaptive restart.
//!
//! The downstream task probe is a softmax linear layer trained by plain
//! full-batch gradient descent.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, EmbeddingMatrix};
use crate::metrics;

pub const MAX_ITERS: usize = 10_000;
pub const REL_TOL: f64 = 1e-8;

pub const C_GRID_MIN: f64 = 1e-3;
pub const C_GRID_MAX: f64 = 1e3;
pub const C_GRID_LEN: usize = 20;

/// Below this many samples selection uses stratified K-fold.
pub const SMALL_DATASET: usize = 128;
pub const DEFAULT_FOLDS: usize = 5;
pub const VAL_FRACTION: f64 = 0.2;
pub const VAL_CAP: usize = 100;

pub const PROBE_EPOCHS: usize = 500;
pub const PROBE_LR: f64 = 1e-2;
pub const PROBE_WEIGHT_DECAY: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Penalty {
    L1,
    L2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Loss {
    Logistic,
    SquaredHinge,
    Softmax,
}

/// Which binary solver a selection or CAV fit uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    Logistic(Penalty),
    Svm,
}

impl SolverKind {
    fn loss(self) -> Loss {
        match self {
            SolverKind::Logistic(_) => Loss::Logistic,
            SolverKind::Svm => Loss::SquaredHinge,
        }
    }

    fn penalty(self) -> Penalty {
        match self {
            SolverKind::Logistic(p) => p,
            SolverKind::Svm => Penalty::L2,
        }
    }
}

/// Fitted binary linear model.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub penalty: Penalty,
    pub c: f64,
    pub loss: Loss,
    pub iterations: usize,
}

impl LinearModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.intercept
    }
}

/// Anything that maps a representation to a class index.
pub trait Predictor {
    fn dim(&self) -> usize;
    fn predict(&self, x: &[f64]) -> u32;
}

impl Predictor for LinearModel {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn predict(&self, x: &[f64]) -> u32 {
        (self.decision(x) > 0.0) as u32
    }
}

#[inline]
fn logistic_loss(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

/// d/dm log(1 + exp(-m))
#[inline]
fn logistic_dloss(m: f64) -> f64 {
    if m > 0.0 {
        let e = (-m).exp();
        -e / (1.0 + e)
    } else {
        -1.0 / (1.0 + m.exp())
    }
}

/// Regularised binary objective over a fixed design matrix.
pub struct Objective<'a> {
    x: &'a EmbeddingMatrix,
    rows: Vec<usize>,
    y: Vec<f64>,
    s: Vec<f64>,
    loss: Loss,
    penalty: Penalty,
    c: f64,
    /// weighted design mean; the solver works with centred rows
    mu: Vec<f64>,
}

impl<'a> Objective<'a> {
    pub fn new(
        x: &'a EmbeddingMatrix,
        y: &[bool],
        loss: Loss,
        penalty: Penalty,
        c: f64,
        balanced: bool,
    ) -> Result<Self> {
        Self::on_rows(x, (0..x.n()).collect(), y, loss, penalty, c, balanced)
    }

    /// Objective over a subset of rows; `y[k]` labels `rows[k]`.
    pub fn on_rows(
        x: &'a EmbeddingMatrix,
        rows: Vec<usize>,
        y: &[bool],
        loss: Loss,
        penalty: Penalty,
        c: f64,
        balanced: bool,
    ) -> Result<Self> {
        if rows.len() != y.len() {
            return Err(Error::LengthMismatch(rows.len(), y.len()));
        }
        crate::linalg::check_rows(&rows, x.n())?;
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::ConfigInvalid(format!("C must be positive, got {c}")));
        }
        if matches!(loss, Loss::Softmax) {
            return Err(Error::ConfigInvalid("softmax is not a binary loss".into()));
        }
        let n_pos = y.iter().filter(|&&v| v).count();
        let n_neg = y.len() - n_pos;
        if n_pos == 0 || n_neg == 0 {
            return Err(Error::SingleClass);
        }
        let s = y
            .iter()
            .map(|&v| {
                if balanced {
                    0.5 / if v { n_pos } else { n_neg } as f64
                } else {
                    1.0 / y.len() as f64
                }
            })
            .collect::<Vec<f64>>();
        let mut mu = vec![0.0; x.d()];
        let total: f64 = s.iter().sum();
        for (&i, &si) in rows.iter().zip(&s) {
            axpy(si / total, x.row(i), &mut mu);
        }
        Ok(Self {
            x,
            rows,
            y: y.iter().map(|&v| if v { 1.0 } else { -1.0 }).collect(),
            s,
            loss,
            penalty,
            c,
            mu,
        })
    }

    pub fn dim(&self) -> usize {
        self.x.d()
    }

    /// Smooth part (data term, plus the L2 penalty when applicable) and its
    /// gradient with respect to `(w, b)`.
    pub fn smooth(&self, w: &[f64], b: f64, grad_w: &mut [f64]) -> (f64, f64) {
        let (f, gb) = self.smooth_centred(w, b + dot(w, &self.mu), grad_w);
        axpy(gb, &self.mu, grad_w);
        (f, gb)
    }

    /// As [`Objective::smooth`] with the intercept taken relative to the
    /// centred rows `x - mu`. Centring leaves the minimiser unchanged but
    /// decouples the intercept from the weights, which matters when C is
    /// small and the intercept's curvature is tiny.
    fn smooth_centred(&self, w: &[f64], bc: f64, grad_w: &mut [f64]) -> (f64, f64) {
        grad_w.iter_mut().for_each(|g| *g = 0.0);
        let mut f = 0.0;
        let mut gb = 0.0;
        let b = bc - dot(w, &self.mu);
        for ((&i, &yi), &si) in self.rows.iter().zip(&self.y).zip(&self.s) {
            let xi = self.x.row(i);
            let m = yi * (dot(w, xi) + b);
            let (l, dl) = match self.loss {
                Loss::Logistic => (logistic_loss(m), logistic_dloss(m)),
                Loss::SquaredHinge => {
                    let h = (1.0 - m).max(0.0);
                    (h * h, -2.0 * h)
                }
                Loss::Softmax => unreachable!(),
            };
            f += si * l;
            let coef = self.c * si * dl * yi;
            if coef != 0.0 {
                axpy(coef, xi, grad_w);
                gb += coef;
            }
        }
        axpy(-gb, &self.mu, grad_w);
        f *= self.c;
        if self.penalty == Penalty::L2 {
            f += 0.5 * dot(w, w);
            axpy(1.0, w, grad_w);
        }
        (f, gb)
    }

    fn nonsmooth(&self, w: &[f64]) -> f64 {
        match self.penalty {
            Penalty::L1 => w.iter().map(|x| x.abs()).sum(),
            Penalty::L2 => 0.0,
        }
    }

    pub fn value(&self, w: &[f64], b: f64) -> f64 {
        let mut g = vec![0.0; w.len()];
        self.smooth(w, b, &mut g).0 + self.nonsmooth(w)
    }

    fn value_centred(&self, w: &[f64], bc: f64) -> f64 {
        let mut g = vec![0.0; w.len()];
        self.smooth_centred(w, bc, &mut g).0 + self.nonsmooth(w)
    }

    fn prox(&self, w: &mut [f64], step: f64) {
        if self.penalty == Penalty::L1 {
            for x in w.iter_mut() {
                *x = x.signum() * (x.abs() - step).max(0.0);
            }
        }
    }

    /// Accelerated proximal gradient from `(w0, b0)`.
    pub fn minimize(&self, w0: Vec<f64>, b0: f64) -> Result<(Vec<f64>, f64, usize)> {
        let d = self.dim();
        let mut b = b0 + dot(&w0, &self.mu);
        let mut w = w0;
        let mut gw = vec![0.0; d];
        let mut yw = w.clone();
        let mut yb = b;
        let mut t = 1.0f64;
        let mut lip = 1.0f64;
        let mut f_obj = self.value_centred(&w, b);
        if !f_obj.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        let mut nw = vec![0.0; d];
        let mut iters = 0;
        while iters < MAX_ITERS {
            iters += 1;
            let (fy, gb) = self.smooth_centred(&yw, yb, &mut gw);
            // backtracking on the smooth part
            let (fn_smooth, nb) = loop {
                for ((n, y), g) in nw.iter_mut().zip(&yw).zip(&gw) {
                    *n = y - g / lip;
                }
                self.prox(&mut nw, 1.0 / lip);
                let nb = yb - gb / lip;
                let mut scratch = vec![0.0; d];
                let (fs, _) = self.smooth_centred(&nw, nb, &mut scratch);
                let mut lin = (nb - yb) * gb;
                let mut quad = (nb - yb).powi(2);
                for ((n, y), g) in nw.iter().zip(&yw).zip(&gw) {
                    lin += (n - y) * g;
                    quad += (n - y).powi(2);
                }
                if !fs.is_finite() && lip > 1e300 {
                    return Err(Error::NonFiniteLoss);
                }
                if fs.is_finite() && fs <= fy + lin + 0.5 * lip * quad + 1e-12 * fy.abs() {
                    break (fs, nb);
                }
                lip *= 2.0;
            };
            let f_new = fn_smooth + self.nonsmooth(&nw);
            if !f_new.is_finite() {
                return Err(Error::NonFiniteLoss);
            }
            if f_new > f_obj {
                // momentum overshoot: restart from the current iterate
                if t > 1.0 {
                    t = 1.0;
                    yw.copy_from_slice(&w);
                    yb = b;
                    continue;
                }
                // plain step did not descend: already optimal to rounding
                break;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            for ((y, n), o) in yw.iter_mut().zip(&nw).zip(&w) {
                *y = n + beta * (n - o);
            }
            yb = nb + beta * (nb - b);
            t = t_next;
            let decrease = f_obj - f_new;
            w.copy_from_slice(&nw);
            b = nb;
            let prev = f_obj;
            f_obj = f_new;
            if decrease <= REL_TOL * prev.abs().max(f64::MIN_POSITIVE) {
                break;
            }
            lip *= 0.95;
        }
        let b = b - dot(&w, &self.mu);
        Ok((w, b, iters))
    }
}

fn fit_binary(
    x: &EmbeddingMatrix,
    y: &[bool],
    kind: SolverKind,
    c: f64,
    balanced: bool,
) -> Result<LinearModel> {
    let obj = Objective::new(x, y, kind.loss(), kind.penalty(), c, balanced)?;
    let (weights, intercept, iterations) = obj.minimize(vec![0.0; x.d()], 0.0)?;
    Ok(LinearModel {
        weights,
        intercept,
        penalty: kind.penalty(),
        c,
        loss: kind.loss(),
        iterations,
    })
}

/// Class-weighted regularised logistic regression.
pub fn fit_logistic(
    x: &EmbeddingMatrix,
    y: &[bool],
    penalty: Penalty,
    c: f64,
    balanced: bool,
) -> Result<LinearModel> {
    fit_binary(x, y, SolverKind::Logistic(penalty), c, balanced)
}

/// L2-regularised squared-hinge linear SVM.
pub fn fit_linear_svm(x: &EmbeddingMatrix, y: &[bool], c: f64, balanced: bool) -> Result<LinearModel> {
    fit_binary(x, y, SolverKind::Svm, c, balanced)
}

/// `C_GRID_LEN` log-spaced values from `C_GRID_MIN` to `C_GRID_MAX`.
pub fn c_grid() -> Vec<f64> {
    let (lo, hi) = (C_GRID_MIN.log10(), C_GRID_MAX.log10());
    let steps = (C_GRID_LEN - 1) as f64;
    (0..C_GRID_LEN)
        .map(|i| match i {
            0 => C_GRID_MIN,
            i if i == C_GRID_LEN - 1 => C_GRID_MAX,
            i => 10f64.powf(lo + (hi - lo) * i as f64 / steps),
        })
        .collect()
}

/// Cross-validation layout used by C selection.
#[derive(Clone, Debug, PartialEq)]
pub enum CvPlan {
    StratifiedKFold { k: usize, seed: u64 },
    StratifiedShuffle {
        val_fraction: f64,
        val_cap: usize,
        seed: u64,
    },
}

impl CvPlan {
    /// K-fold below [`SMALL_DATASET`] samples, a single capped shuffle
    /// split otherwise.
    pub fn for_size(n: usize, seed: u64) -> Self {
        if n < SMALL_DATASET {
            CvPlan::StratifiedKFold {
                k: DEFAULT_FOLDS,
                seed,
            }
        } else {
            CvPlan::StratifiedShuffle {
                val_fraction: VAL_FRACTION,
                val_cap: VAL_CAP,
                seed,
            }
        }
    }

    /// `(train, validation)` position lists over `y`.
    pub fn splits(&self, y: &[bool]) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
        let mut pos: Vec<usize> = (0..y.len()).filter(|&i| y[i]).collect();
        let mut neg: Vec<usize> = (0..y.len()).filter(|&i| !y[i]).collect();
        if pos.len() < 2 || neg.len() < 2 {
            return Err(Error::SingleClass);
        }
        match *self {
            CvPlan::StratifiedKFold { k, seed } => {
                let k = k.min(pos.len()).min(neg.len());
                if k < 2 {
                    return Err(Error::SingleClass);
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                pos.shuffle(&mut rng);
                neg.shuffle(&mut rng);
                let mut fold_of = vec![0usize; y.len()];
                for side in [&pos, &neg] {
                    for (r, &i) in side.iter().enumerate() {
                        fold_of[i] = r % k;
                    }
                }
                Ok((0..k)
                    .map(|f| {
                        let (val, train): (Vec<usize>, Vec<usize>) =
                            (0..y.len()).partition(|&i| fold_of[i] == f);
                        (train, val)
                    })
                    .collect())
            }
            CvPlan::StratifiedShuffle {
                val_fraction,
                val_cap,
                seed,
            } => {
                let n = y.len();
                let size = ((val_fraction * n as f64).floor() as usize).min(val_cap).max(2);
                let vp = ((size as f64 * pos.len() as f64 / n as f64).round() as usize)
                    .clamp(1, pos.len() - 1);
                let vn = size.saturating_sub(vp).clamp(1, neg.len() - 1);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                pos.shuffle(&mut rng);
                neg.shuffle(&mut rng);
                let mut is_val = vec![false; n];
                pos[..vp].iter().chain(&neg[..vn]).for_each(|&i| is_val[i] = true);
                let (val, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| is_val[i]);
                Ok(vec![(train, val)])
            }
        }
    }
}

/// Grid value with the best mean validation AUC; ties go to the smaller C.
pub fn select_c(
    x: &EmbeddingMatrix,
    y: &[bool],
    kind: SolverKind,
    grid: &[f64],
    plan: &CvPlan,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Empty);
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let folds = plan.splits(y)?;
    let mut totals = vec![0.0; grid.len()];
    for (train, val) in &folds {
        let ty: Vec<bool> = train.iter().map(|&i| y[i]).collect();
        let mut w = vec![0.0; x.d()];
        let mut b = 0.0;
        for (gi, &c) in grid.iter().enumerate() {
            let obj = Objective::on_rows(x, train.clone(), &ty, kind.loss(), kind.penalty(), c, true)?;
            // warm start along the ascending grid
            let (nw, nb, _) = obj.minimize(w, b)?;
            w = nw;
            b = nb;
            let (mut sp, mut sn) = (Vec::new(), Vec::new());
            for &i in val {
                let s = dot(&w, x.row(i)) + b;
                if y[i] {
                    sp.push(s)
                } else {
                    sn.push(s)
                }
            }
            totals[gi] += metrics::auc(&sp, &sn)?;
        }
    }
    let mut best = 0;
    for gi in 1..grid.len() {
        if totals[gi] > totals[best] {
            best = gi;
        }
    }
    Ok(grid[best])
}

/// Select C on the adaptive plan, then refit on all rows.
pub fn fit_with_selection(
    x: &EmbeddingMatrix,
    y: &[bool],
    kind: SolverKind,
    seed: u64,
) -> Result<LinearModel> {
    let plan = CvPlan::for_size(y.len(), seed);
    let c = select_c(x, y, kind, &c_grid(), &plan)?;
    fit_binary(x, y, kind, c, true)
}

/// Multinomial linear probe.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskProbe {
    /// `classes × d`, row-major.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub classes: usize,
    pub d: usize,
}

impl TaskProbe {
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        (0..self.classes)
            .map(|k| dot(&self.weights[k * self.d..(k + 1) * self.d], x) + self.biases[k])
            .collect()
    }
}

impl Predictor for TaskProbe {
    fn dim(&self) -> usize {
        self.d
    }

    fn predict(&self, x: &[f64]) -> u32 {
        let logits = self.logits(x);
        let mut best = 0;
        for (k, &l) in logits.iter().enumerate() {
            if l > logits[best] {
                best = k;
            }
        }
        best as u32
    }
}

/// Softmax probe: zero init, full-batch descent, fixed epochs/lr/decay.
pub fn fit_task_probe(x: &EmbeddingMatrix, rows: &[usize], labels: &[u32], classes: usize) -> Result<TaskProbe> {
    crate::linalg::check_rows(rows, x.n())?;
    if labels.len() != x.n() {
        return Err(Error::LengthMismatch(labels.len(), x.n()));
    }
    let mut seen = vec![false; classes.max(1)];
    for &i in rows {
        let l = labels[i] as usize;
        if l >= classes {
            return Err(Error::ConfigInvalid(format!(
                "task label {l} out of range for {classes} classes"
            )));
        }
        seen[l] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(Error::SingleClass);
    }
    let d = x.d();
    let mut probe = TaskProbe {
        weights: vec![0.0; classes * d],
        biases: vec![0.0; classes],
        classes,
        d,
    };
    let inv_n = 1.0 / rows.len() as f64;
    let mut gw = vec![0.0; classes * d];
    let mut gb = vec![0.0; classes];
    let mut p = vec![0.0; classes];
    for _ in 0..PROBE_EPOCHS {
        gw.iter_mut().for_each(|g| *g = 0.0);
        gb.iter_mut().for_each(|g| *g = 0.0);
        for &i in rows {
            let xi = x.row(i);
            let logits = probe.logits(xi);
            let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (pk, l) in p.iter_mut().zip(&logits) {
                *pk = (l - mx).exp();
                z += *pk;
            }
            for (k, pk) in p.iter().enumerate() {
                let r = (pk / z - (labels[i] as usize == k) as u8 as f64) * inv_n;
                axpy(r, xi, &mut gw[k * d..(k + 1) * d]);
                gb[k] += r;
            }
        }
        for (w, g) in probe.weights.iter_mut().zip(&gw) {
            *w -= PROBE_LR * (g + PROBE_WEIGHT_DECAY * *w);
        }
        for (b, g) in probe.biases.iter_mut().zip(&gb) {
            *b -= PROBE_LR * g;
        }
    }
    if probe.weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFiniteLoss);
    }
    Ok(probe)
}

/// Fraction of `rows` whose predicted class equals `labels[row]`.
pub fn predict_accuracy(
    model: &impl Predictor,
    x: &EmbeddingMatrix,
    rows: &[usize],
    labels: &[u32],
) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::EmptyEval);
    }
    if model.dim() != x.d() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: x.d(),
        });
    }
    if labels.len() != x.n() {
        return Err(Error::LengthMismatch(labels.len(), x.n()));
    }
    crate::linalg::check_rows(rows, x.n())?;
    let correct = rows
        .iter()
        .filter(|&&i| model.predict(x.row(i)) == labels[i])
        .count();
    Ok(correct as f64 / rows.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn one_d(vals: &[f64]) -> EmbeddingMatrix {
        EmbeddingMatrix::new(vals.len(), 1, vals.to_vec()).unwrap()
    }

    #[test]
    fn separable_1d_logistic() {
        let x = one_d(&[2.0, 3.0, -3.0, -2.0]);
        let y = [true, true, false, false];
        let m = fit_logistic(&x, &y, Penalty::L2, 1.0, true).unwrap();
        assert!(m.weights[0] > 0.0);
        let pos: Vec<f64> = (0..2).map(|i| m.decision(x.row(i))).collect();
        let neg: Vec<f64> = (2..4).map(|i| m.decision(x.row(i))).collect();
        assert_eq!(metrics::auc(&pos, &neg).unwrap(), 1.0);
    }

    #[test]
    fn separable_1d_svm_and_scale_invariance() {
        let y = [true, true, false, false];
        for scale in [1.0, 10.0] {
            let x = one_d(&[2.0 * scale, 3.0 * scale, -3.0 * scale, -2.0 * scale]);
            let m = fit_linear_svm(&x, &y, 1.0, true).unwrap();
            assert_eq!(m.weights[0].signum(), 1.0);
            for (i, &yi) in y.iter().enumerate() {
                assert_eq!(m.predict(x.row(i)) == 1, yi);
            }
        }
    }

    #[test]
    fn single_class_rejected() {
        let x = one_d(&[1.0, 2.0]);
        assert!(matches!(
            fit_logistic(&x, &[true, true], Penalty::L2, 1.0, true),
            Err(Error::SingleClass)
        ));
        assert!(matches!(
            fit_linear_svm(&x, &[false, false], 1.0, true),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn l1_strong_regularisation_zeroes_noise_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, d) = (200, 64);
        let data: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
        let x = EmbeddingMatrix::new(n, d, data).unwrap();
        let y: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        let m = fit_logistic(&x, &y, Penalty::L1, 1e-3, true).unwrap();
        let zeros = m.weights.iter().filter(|&&w| w == 0.0).count();
        assert!(zeros as f64 >= 0.9 * d as f64, "{zeros} zeros");
    }

    #[test]
    fn c_grid_constants() {
        let g = c_grid();
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], 1e-3);
        assert_eq!(g[19], 1e3);
        for w in g.windows(2) {
            let ratio = w[1] / w[0];
            assert!((ratio - 10f64.powf(6.0 / 19.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn plan_size_rule() {
        assert_eq!(
            CvPlan::for_size(100, 0),
            CvPlan::StratifiedKFold { k: 5, seed: 0 }
        );
        let plan = CvPlan::for_size(1000, 0);
        let y: Vec<bool> = (0..1000).map(|i| i % 2 == 0).collect();
        let splits = plan.splits(&y).unwrap();
        assert_eq!(splits.len(), 1);
        assert_eq!(splits[0].1.len(), 100);
        assert_eq!(splits[0].0.len(), 900);
    }

    #[test]
    fn kfold_is_stratified_and_covering() {
        let y: Vec<bool> = (0..23).map(|i| i % 3 == 0).collect();
        let splits = CvPlan::StratifiedKFold { k: 5, seed: 1 }.splits(&y).unwrap();
        let mut seen = vec![0; y.len()];
        for (train, val) in &splits {
            assert!(val.iter().any(|&i| y[i]) && val.iter().any(|&i| !y[i]));
            assert_eq!(train.len() + val.len(), y.len());
            val.iter().for_each(|&i| seen[i] += 1);
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn select_c_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (n, d) = (60, 5);
        let y: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        let data: Vec<f64> = (0..n * d)
            .map(|k| {
                let shift = if y[k / d] && k % d == 0 { 1.0 } else { 0.0 };
                shift + rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let x = EmbeddingMatrix::new(n, d, data).unwrap();
        let plan = CvPlan::for_size(n, 7);
        let kind = SolverKind::Logistic(Penalty::L2);
        let a = select_c(&x, &y, kind, &c_grid(), &plan).unwrap();
        let b = select_c(&x, &y, kind, &c_grid(), &plan).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            select_c(&x, &y, kind, &[], &plan),
            Err(Error::Empty)
        ));
    }

    fn blobs(n: usize, seed: u64) -> (EmbeddingMatrix, Vec<u32>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = (i % 2) as u32;
            let centre = if c == 1 { 3.0 } else { -3.0 };
            data.push(centre + 0.5 * rng.sample::<f64, _>(StandardNormal));
            data.push(rng.sample::<f64, _>(StandardNormal));
            labels.push(c);
        }
        (EmbeddingMatrix::new(n, 2, data).unwrap(), labels)
    }

    #[test]
    fn task_probe_separable_blobs() {
        let (x, labels) = blobs(200, 3);
        let rows: Vec<usize> = (0..200).collect();
        let probe = fit_task_probe(&x, &rows, &labels, 2).unwrap();
        assert!(predict_accuracy(&probe, &x, &rows, &labels).unwrap() >= 0.99);

        let mut anti = probe.clone();
        anti.weights.iter_mut().for_each(|w| *w = -*w);
        anti.biases.iter_mut().for_each(|b| *b = -*b);
        assert_eq!(predict_accuracy(&anti, &x, &rows, &labels).unwrap(), 0.0);
    }

    #[test]
    fn task_probe_permutation_equivariance() {
        let (x, labels) = blobs(50, 4);
        let rows: Vec<usize> = (0..50).collect();
        let probe = fit_task_probe(&x, &rows, &labels, 2).unwrap();
        let swapped =
            EmbeddingMatrix::from_rows(&x.rows().map(|r| vec![r[1], r[0]]).collect::<Vec<_>>())
                .unwrap();
        let mut p2 = probe.clone();
        for k in 0..2 {
            p2.weights.swap(2 * k, 2 * k + 1);
        }
        for i in 0..50 {
            assert_eq!(probe.predict(x.row(i)), p2.predict(swapped.row(i)));
        }
    }

    #[test]
    fn task_probe_errors() {
        let (x, _) = blobs(10, 1);
        let rows: Vec<usize> = (0..10).collect();
        assert!(matches!(
            fit_task_probe(&x, &rows, &[0; 10], 2),
            Err(Error::SingleClass)
        ));
        let (_, labels) = blobs(10, 1);
        let probe = fit_task_probe(&x, &rows, &labels, 2).unwrap();
        assert!(matches!(
            predict_accuracy(&probe, &x, &[], &labels),
            Err(Error::EmptyEval)
        ));
        let wide = EmbeddingMatrix::new(1, 3, vec![0.0; 3]).unwrap();
        assert!(matches!(
            predict_accuracy(&probe, &wide, &[0], &[0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
