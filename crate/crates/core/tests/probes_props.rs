use proptest::prelude::*;

use cavbench::probes::{c_grid, fit_logistic, select_c, CvPlan, Loss, Objective, Penalty, SolverKind};
use cavbench::EmbeddingMatrix;

/// Random binary problem with both classes present.
fn problem(max_n: usize, max_d: usize) -> impl Strategy<Value = (EmbeddingMatrix, Vec<bool>)> {
    (4..=max_n, 1..=max_d).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(-3.0..3.0f64, n * d),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_map(move |(x, mut y)| {
                y[0] = true;
                y[1] = false;
                (EmbeddingMatrix::new(n, d, x).unwrap(), y)
            })
    })
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Class-weighted L2 logistic objective, written out independently of the
/// solver: `C * sum_i s_i log(1 + exp(-y_i (w.x_i + b))) + |w|^2 / 2`.
fn oracle_objective(x: &EmbeddingMatrix, y: &[bool], c: f64, w: &[f64], b: f64) -> f64 {
    let n_pos = y.iter().filter(|&&v| v).count() as f64;
    let n_neg = y.len() as f64 - n_pos;
    let mut f = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let s = if yi { 0.5 / n_pos } else { 0.5 / n_neg };
        let sign = if yi { 1.0 } else { -1.0 };
        let z: f64 = x.row(i).iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
        f += s * softplus(-sign * z);
    }
    c * f + 0.5 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Plain gradient descent on the oracle objective with a small fixed step.
fn oracle_minimum(x: &EmbeddingMatrix, y: &[bool], c: f64) -> f64 {
    let d = x.d();
    let n_pos = y.iter().filter(|&&v| v).count() as f64;
    let n_neg = y.len() as f64 - n_pos;
    let max_sq = x.rows().map(|r| r.iter().map(|v| v * v).sum::<f64>()).fold(0.0, f64::max);
    let step = 1.0 / (1.0 + 0.25 * c * (max_sq + 1.0));
    let (mut w, mut b) = (vec![0.0; d], 0.0);
    for _ in 0..200_000 {
        let mut gw = w.clone();
        let mut gb = 0.0;
        for (i, &yi) in y.iter().enumerate() {
            let s = if yi { 0.5 / n_pos } else { 0.5 / n_neg };
            let sign = if yi { 1.0 } else { -1.0 };
            let xi = x.row(i);
            let z: f64 = xi.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b;
            let g = -c * s * sign / (1.0 + (sign * z).exp());
            gw.iter_mut().zip(xi).for_each(|(gj, xj)| *gj += g * xj);
            gb += g;
        }
        w.iter_mut().zip(&gw).for_each(|(wj, g)| *wj -= step * g);
        b -= step * gb;
    }
    oracle_objective(x, y, c, &w, b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradients_match_finite_differences(
        (x, y) in problem(40, 10),
        c in 0.01..100.0f64,
        hinge in any::<bool>(),
        balanced in any::<bool>(),
        seed in prop::collection::vec(-1.0..1.0f64, 11),
    ) {
        let loss = if hinge { Loss::SquaredHinge } else { Loss::Logistic };
        let obj = Objective::new(&x, &y, loss, Penalty::L2, c, balanced).unwrap();
        let d = x.d();
        let w: Vec<f64> = seed[..d].to_vec();
        let b = seed[10];
        let mut g = vec![0.0; d];
        let (_, gb) = obj.smooth(&w, b, &mut g);
        let h = 1e-5;
        let mut scratch = vec![0.0; d];
        let mut worst = 0.0f64;
        let scale = g.iter().fold(gb.abs(), |m, v| m.max(v.abs())).max(1e-8);
        for j in 0..=d {
            let (mut wp, mut wm, mut bp, mut bm) = (w.clone(), w.clone(), b, b);
            if j < d {
                wp[j] += h;
                wm[j] -= h;
            } else {
                bp += h;
                bm -= h;
            }
            let fd = (obj.smooth(&wp, bp, &mut scratch).0 - obj.smooth(&wm, bm, &mut scratch).0) / (2.0 * h);
            let an = if j < d { g[j] } else { gb };
            worst = worst.max((fd - an).abs() / scale);
        }
        prop_assert!(worst <= 1e-4, "relative gradient error {}", worst);
    }

    #[test]
    fn class_balancing_equals_duplication((x, _) in problem(12, 4), c in 0.1..10.0f64) {
        // 2:1 set: the first third are positives
        let n = x.n() - x.n() % 3;
        prop_assume!(n >= 3);
        let p = n / 3;
        let rows: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).to_vec()).collect();
        let y: Vec<bool> = (0..n).map(|i| i < p).collect();
        let base = EmbeddingMatrix::from_rows(&rows).unwrap();
        let mut dup_rows = rows.clone();
        dup_rows.extend(rows[..p].iter().cloned());
        let mut dup_y = y.clone();
        dup_y.extend(std::iter::repeat_n(true, p));
        let dup = EmbeddingMatrix::from_rows(&dup_rows).unwrap();

        let balanced = fit_logistic(&base, &y, Penalty::L2, c, true).unwrap();
        let plain = fit_logistic(&dup, &dup_y, Penalty::L2, c, false).unwrap();
        let fb = Objective::new(&base, &y, Loss::Logistic, Penalty::L2, c, true).unwrap().value(&balanced.weights, balanced.intercept);
        let fd = Objective::new(&dup, &dup_y, Loss::Logistic, Penalty::L2, c, false).unwrap().value(&plain.weights, plain.intercept);
        prop_assert!((fb - fd).abs() <= 1e-5, "{} vs {}", fb, fd);
    }

    #[test]
    fn select_c_is_deterministic((x, y) in problem(30, 4), seed in any::<u64>()) {
        let n_pos = y.iter().filter(|&&v| v).count();
        prop_assume!(n_pos >= 5 && y.len() - n_pos >= 5);
        let plan = CvPlan::for_size(y.len(), seed);
        let a = select_c(&x, &y, SolverKind::Logistic(Penalty::L2), &c_grid(), &plan).unwrap();
        let b = select_c(&x, &y, SolverKind::Logistic(Penalty::L2), &c_grid(), &plan).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn l2_logistic_reaches_oracle_minimum((x, y) in problem(16, 4), c in 0.1..10.0f64) {
        let model = fit_logistic(&x, &y, Penalty::L2, c, true).unwrap();
        let fitted = oracle_objective(&x, &y, c, &model.weights, model.intercept);
        let best = oracle_minimum(&x, &y, c);
        prop_assert!(fitted <= best + 1e-6, "solver {} vs oracle {}", fitted, best);
    }
}
