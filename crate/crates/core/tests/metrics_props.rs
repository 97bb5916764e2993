use proptest::prelude::*;

use cavbench::linalg::normalize;
use cavbench::metrics::{auc, ccr, f1, threshold_predictions, youden_threshold};
use cavbench::EmbeddingMatrix;

/// Integer-valued scores so ties are common.
fn scores(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-6i32..6).prop_map(f64::from), 1..=max)
}

fn pairwise(pos: &[f64], neg: &[f64]) -> f64 {
    let mut wins = 0.0;
    for p in pos {
        for q in neg {
            if p > q {
                wins += 1.0;
            } else if p == q {
                wins += 0.5;
            }
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

fn youden_stat(scores: &[f64], labels: &[bool], pred: impl Fn(f64) -> bool) -> f64 {
    let p = labels.iter().filter(|&&y| y).count() as f64;
    let q = labels.len() as f64 - p;
    let tp = scores.iter().zip(labels).filter(|(s, y)| **y && pred(**s)).count() as f64;
    let fp = scores.iter().zip(labels).filter(|(s, y)| !**y && pred(**s)).count() as f64;
    tp / p - fp / q
}

proptest! {
    #[test]
    fn auc_matches_pairwise_oracle(pos in scores(200), neg in scores(200)) {
        let fast = auc(&pos, &neg).unwrap();
        prop_assert!((fast - pairwise(&pos, &neg)).abs() <= 1e-12);
    }

    #[test]
    fn auc_matches_oracle_on_continuous_scores(
        pos in prop::collection::vec(-1e3..1e3f64, 1..200),
        neg in prop::collection::vec(-1e3..1e3f64, 1..200),
    ) {
        prop_assert!((auc(&pos, &neg).unwrap() - pairwise(&pos, &neg)).abs() <= 1e-12);
    }

    #[test]
    fn auc_complement_is_exact(pos in scores(100), neg in scores(100)) {
        prop_assert_eq!(auc(&pos, &neg).unwrap() + auc(&neg, &pos).unwrap(), 1.0);
    }

    #[test]
    fn auc_invariant_under_increasing_transform(pos in scores(100), neg in scores(100)) {
        // exact on small integers, strictly increasing
        let f = |x: &f64| x * x * x + 2.0 * x - 7.0;
        let tp: Vec<f64> = pos.iter().map(f).collect();
        let tn: Vec<f64> = neg.iter().map(f).collect();
        prop_assert_eq!(auc(&pos, &neg).unwrap(), auc(&tp, &tn).unwrap());
    }

    #[test]
    fn youden_matches_brute_force(
        data in prop::collection::vec(((-8i32..8).prop_map(f64::from), any::<bool>()), 2..80),
    ) {
        let (scores, mut labels): (Vec<f64>, Vec<bool>) = data.into_iter().unzip();
        labels[0] = true;
        labels[1] = false;
        let mut cuts = scores.clone();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut best = (youden_stat(&scores, &labels, |_| true), f64::NEG_INFINITY);
        for &c in &cuts {
            let j = youden_stat(&scores, &labels, |s| s > c);
            if j > best.0 {
                best = (j, c);
            }
        }
        let t = youden_threshold(&scores, &labels).unwrap();
        prop_assert!((youden_stat(&scores, &labels, |s| s > t) - best.0).abs() <= 1e-12);
        let preds = threshold_predictions(&scores, t);
        for (s, p) in scores.iter().zip(preds) {
            prop_assert_eq!(p, *s > best.1);
        }
    }

    #[test]
    fn f1_matches_confusion_matrix(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..100)) {
        let (y, y_hat): (Vec<bool>, Vec<bool>) = pairs.into_iter().unzip();
        let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
        for (&a, &b) in y.iter().zip(&y_hat) {
            match (a, b) {
                (true, true) => tp += 1.0,
                (false, true) => fp += 1.0,
                (true, false) => fneg += 1.0,
                _ => {}
            }
        }
        let r = f1(&y, &y_hat).unwrap();
        // no positives anywhere: flagged, scored 0
        prop_assert_eq!(r.degenerate, tp + fp + fneg == 0.0);
        if tp + fp == 0.0 || tp + fneg == 0.0 {
            prop_assert_eq!(r.value, 0.0);
        } else {
            let precision = tp / (tp + fp);
            let recall = tp / (tp + fneg);
            let oracle = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
            prop_assert!((r.value - oracle).abs() <= 1e-12, "{} vs {}", r.value, oracle);
        }
    }

    #[test]
    fn ccr_is_one_for_orthogonal_others(
        rows in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 2), 4..40),
        beta in 0.5..5.0f64,
    ) {
        // the concept lives in the first two axes; the other CAV is axis 3
        let n = rows.len();
        let data: Vec<Vec<f64>> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let s = if i < n / 2 { beta } else { 0.0 };
                vec![r[0] + s, r[1] + 0.5 * s, 0.0, r[0] - r[1]]
            })
            .collect();
        let m = EmbeddingMatrix::from_rows(&data).unwrap();
        let target = normalize(&[1.0, 0.5, 0.0, 0.0]).unwrap();
        let other = normalize(&[0.0, 0.0, 1.0, 0.0]).unwrap();
        let pos: Vec<usize> = (0..n / 2).collect();
        let neg: Vec<usize> = (n / 2..n).collect();
        let s = cavbench::metrics::ScorePair::project(target.as_slice(), &m, &pos, &neg);
        prop_assume!(auc(&s.pos, &s.neg).unwrap() > 1e-6);
        let r = ccr(&target, &[&other], &m, &pos, &neg).unwrap();
        prop_assert!((r - 1.0).abs() <= 1e-6, "CCR {}", r);
    }
}
