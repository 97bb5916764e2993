//! Vector and steering metrics: AUC, MAD, maximum similarity, cross-concept
//! robustness, Youden thresholds, F1, collateral damage, steering
//! disparity and mean ± 2SE aggregation.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, EmbeddingMatrix, UnitVector};
use crate::probes::{predict_accuracy, Predictor};
use crate::steer::orthogonalize;

/// Minimum |accuracy gap| for which steering disparity is defined.
pub const SD_GAP_EPS: f64 = 1e-3;

/// Post-erasure projections at or below this (relative to the row norm)
/// are treated as exact zeros when scoring CCR.
pub const ERASED_SCORE_TOL: f64 = 1e-9;

/// How a positive/negative score tie is counted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TieRule {
    /// Mann-Whitney convention: a tie counts one half.
    #[default]
    Half,
    /// Strict indicator `s_pos > s_neg`; ties count zero.
    Strict,
}

/// Projection scores of concept-positive and concept-negative samples.
#[derive(Clone, Debug, PartialEq)]
pub struct ScorePair {
    pub pos: Vec<f64>,
    pub neg: Vec<f64>,
}

impl ScorePair {
    pub fn project(v: &[f64], m: &EmbeddingMatrix, pos: &[usize], neg: &[usize]) -> Self {
        Self {
            pos: pos.iter().map(|&i| dot(v, m.row(i))).collect(),
            neg: neg.iter().map(|&i| dot(v, m.row(i))).collect(),
        }
    }

    pub fn swapped(&self) -> Self {
        Self {
            pos: self.neg.clone(),
            neg: self.pos.clone(),
        }
    }
}

pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    auc_with(pos, neg, TieRule::Half)
}

/// Rank-based AUC in `O(n log n)`.
///
/// Counts `2U` as an integer so that swapping sides yields the exact
/// complement.
pub fn auc_with(pos: &[f64], neg: &[f64], ties: TieRule) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::EmptySide);
    }
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    // 2 * (pairs with pos > neg) + (tied pairs, when counted)
    let mut twice_u: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        let (mut p, mut q) = (0u128, 0u128);
        // total_cmp separates -0.0 and 0.0; treat them as one score
        while j < all.len() && all[j].0 == all[i].0 {
            if all[j].1 {
                p += 1
            } else {
                q += 1
            }
            j += 1;
        }
        twice_u += 2 * p * neg_below;
        if ties == TieRule::Half {
            twice_u += p * q;
        }
        neg_below += q;
        i = j;
    }
    let total = 2 * pos.len() as u128 * neg.len() as u128;
    let (num, den) = (twice_u as f64, total as f64);
    Ok(if 2 * twice_u <= total {
        num / den
    } else {
        1.0 - (total - twice_u) as f64 / den
    })
}

/// Standardised mean score gap, normalised by the negative sample std.
pub fn mad(s: &ScorePair) -> Result<f64> {
    if s.pos.is_empty() || s.neg.is_empty() {
        return Err(Error::EmptySide);
    }
    if s.neg.len() < 2 {
        return Err(Error::DegenerateNegatives);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mp, mn) = (mean(&s.pos), mean(&s.neg));
    let var = s.neg.iter().map(|x| (x - mn).powi(2)).sum::<f64>() / (s.neg.len() - 1) as f64;
    let sd = var.sqrt();
    if !(sd > 1e-12) {
        return Err(Error::DegenerateNegatives);
    }
    Ok((mp - mn) / sd)
}

/// Largest signed dot product between `target` and any other vector.
pub fn max_similarity(target: &UnitVector, others: &[&UnitVector]) -> Result<f64> {
    if others.is_empty() {
        return Err(Error::EmptyOthers);
    }
    others
        .iter()
        .map(|o| {
            if o.dim() != target.dim() {
                return Err(Error::DimensionMismatch {
                    expected: target.dim(),
                    got: o.dim(),
                });
            }
            Ok(dot(target.as_slice(), o.as_slice()))
        })
        .try_fold(f64::NEG_INFINITY, |m, s| Ok(m.max(s?)))
}

/// Worst-case retained AUC of `target` after erasing each other direction
/// from the evaluation rows, normalised by the unerased AUC.
pub fn ccr(
    target: &UnitVector,
    others: &[&UnitVector],
    m: &EmbeddingMatrix,
    eval_pos: &[usize],
    eval_neg: &[usize],
) -> Result<f64> {
    if others.is_empty() {
        return Err(Error::EmptyOthers);
    }
    let v = target.as_slice();
    let base = ScorePair::project(v, m, eval_pos, eval_neg);
    let baseline = auc(&base.pos, &base.neg)?;
    if !(baseline > 1e-6) {
        return Err(Error::DegenerateBaseline);
    }
    let mut worst = f64::INFINITY;
    for other in others {
        let score = |i: usize| -> Result<f64> {
            let h = m.row(i);
            let erased = orthogonalize(h, other)?;
            let s = dot(v, &erased);
            Ok(if s.abs() <= ERASED_SCORE_TOL * norm(h).max(1.0) {
                0.0
            } else {
                s
            })
        };
        let pos: Vec<f64> = eval_pos.iter().map(|&i| score(i)).collect::<Result<_>>()?;
        let neg: Vec<f64> = eval_neg.iter().map(|&i| score(i)).collect::<Result<_>>()?;
        worst = worst.min(auc(&pos, &neg)? / baseline);
    }
    Ok(worst)
}

/// Threshold maximising TPR - FPR. Samples with `score > threshold` are
/// predicted positive. Candidates are midpoints between consecutive unique
/// scores plus the two infinities; ties go to the lowest threshold.
pub fn youden_threshold(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<(f64, bool)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    // Sweep thresholds upward; at t = -inf everything is predicted positive.
    let (mut tp, mut fp) = (n_pos, n_neg);
    let j_of = |tp: usize, fp: usize| tp as f64 / n_pos as f64 - fp as f64 / n_neg as f64;
    let mut best_t = f64::NEG_INFINITY;
    let mut best_j = j_of(tp, fp);
    let mut i = 0;
    while i < order.len() {
        let mut k = i;
        while k < order.len() && order[k].0 == order[i].0 {
            if order[k].1 {
                tp -= 1
            } else {
                fp -= 1
            }
            k += 1;
        }
        let t = if k < order.len() {
            midpoint(order[i].0, order[k].0)
        } else {
            f64::INFINITY
        };
        let j = j_of(tp, fp);
        if j > best_j {
            best_j = j;
            best_t = t;
        }
        i = k;
    }
    Ok(best_t)
}

/// Midpoint of `a < b` that still separates them under `score > t`.
fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b || !m.is_finite() {
        a
    } else {
        m
    }
}

/// Binary predictions `score > threshold`.
pub fn threshold_predictions(scores: &[f64], threshold: f64) -> Vec<bool> {
    scores.iter().map(|&s| s > threshold).collect()
}

/// F1 with its degenerate-case flag.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct F1 {
    pub value: f64,
    /// No positives in either the labels or the predictions.
    pub degenerate: bool,
}

pub fn f1(y: &[bool], y_hat: &[bool]) -> Result<F1> {
    if y.len() != y_hat.len() {
        return Err(Error::LengthMismatch(y.len(), y_hat.len()));
    }
    let tp = y.iter().zip(y_hat).filter(|(&a, &b)| a && b).count();
    let denom = y.iter().filter(|&&a| a).count() + y_hat.iter().filter(|&&b| b).count();
    Ok(if denom == 0 {
        F1 {
            value: 0.0,
            degenerate: true,
        }
    } else {
        F1 {
            value: 2.0 * tp as f64 / denom as f64,
            degenerate: false,
        }
    })
}

/// Signed accuracy drop in percentage points on concept-absent rows.
/// `clean` and `steered` are aligned row for row.
pub fn collateral_damage(
    probe: &impl Predictor,
    clean: &EmbeddingMatrix,
    steered: &EmbeddingMatrix,
    rows: &[usize],
    task_labels: &[u32],
) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::EmptyEval);
    }
    let before = predict_accuracy(probe, clean, rows, task_labels)?;
    let after = predict_accuracy(probe, steered, rows, task_labels)?;
    Ok(100.0 * (before - after))
}

/// Accuracies entering steering disparity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DisparityInputs {
    /// probe accuracy on clean concept-absent rows
    pub clean: f64,
    /// on steered concept-infused rows
    pub steered_infused: f64,
    /// on unsteered concept-infused rows
    pub infused: f64,
}

impl DisparityInputs {
    pub fn gap(&self) -> f64 {
        self.clean - self.infused
    }
}

pub fn steering_disparity_from(acc: DisparityInputs) -> Result<f64> {
    let gap = acc.gap();
    if gap.abs() <= SD_GAP_EPS {
        return Err(Error::DegenerateGap(gap));
    }
    Ok((acc.clean - acc.steered_infused) / gap)
}

/// Steering disparity over counterfactual pairs: `clean_rows[i]` is the
/// clean twin of `infused_rows[i]`. `steered` is `m` with the infused rows
/// erased. Labels are the task labels of the samples.
pub fn steering_disparity(
    probe: &impl Predictor,
    m: &EmbeddingMatrix,
    steered: &EmbeddingMatrix,
    clean_rows: &[usize],
    infused_rows: &[usize],
    task_labels: &[u32],
) -> Result<(f64, DisparityInputs)> {
    if clean_rows.is_empty() || infused_rows.is_empty() {
        return Err(Error::EmptyEval);
    }
    let acc = DisparityInputs {
        clean: predict_accuracy(probe, m, clean_rows, task_labels)?,
        steered_infused: predict_accuracy(probe, steered, infused_rows, task_labels)?,
        infused: predict_accuracy(probe, m, infused_rows, task_labels)?,
    };
    Ok((steering_disparity_from(acc)?, acc))
}

/// Mean and two standard errors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    pub two_se: f64,
    pub n: usize,
    /// Only one value: the standard error is undefined and reported as 0.
    pub single: bool,
}

pub fn aggregate(values: &[f64]) -> Result<Aggregate> {
    if values.is_empty() {
        return Err(Error::Empty);
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Ok(Aggregate {
            mean,
            two_se: 0.0,
            n,
            single: true,
        });
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(Aggregate {
        mean,
        two_se: 2.0 * var.sqrt() / (n as f64).sqrt(),
        n,
        single: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::normalize;

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[2.0, 3.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.0, 1.0], &[2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(auc(&[1.0], &[1.0]).unwrap(), 0.5);
        assert_eq!(auc_with(&[1.0], &[1.0], TieRule::Strict).unwrap(), 0.0);
        assert!(matches!(auc(&[], &[1.0]), Err(Error::EmptySide)));
    }

    #[test]
    fn auc_signed_zero_ties() {
        assert_eq!(auc(&[0.0], &[-0.0]).unwrap(), 0.5);
    }

    #[test]
    fn mad_examples() {
        let s = ScorePair {
            pos: vec![2.0, 4.0],
            neg: vec![0.0, 2.0],
        };
        assert!((mad(&s).unwrap() - 2f64.sqrt()).abs() < 1e-8);
        let s = ScorePair {
            pos: vec![0.0, 2.0],
            neg: vec![0.0, 2.0],
        };
        assert_eq!(mad(&s).unwrap(), 0.0);
        let s = ScorePair {
            pos: vec![3.0],
            neg: vec![1.0, 1.0],
        };
        assert!(matches!(mad(&s), Err(Error::DegenerateNegatives)));
    }

    #[test]
    fn max_similarity_examples() {
        let t = normalize(&[1.0, 0.0]).unwrap();
        let a = normalize(&[0.0, 1.0]).unwrap();
        let b = normalize(&[1.0, 1.0]).unwrap();
        let ms = max_similarity(&t, &[&a, &b]).unwrap();
        assert!((ms - 0.707_106_78).abs() < 1e-8);
        assert_eq!(max_similarity(&t, &[&t.negated()]).unwrap(), -1.0);
        assert_eq!(max_similarity(&t, &[&a]).unwrap(), 0.0);
        assert!(matches!(max_similarity(&t, &[]), Err(Error::EmptyOthers)));
    }

    #[test]
    fn ccr_orthogonal_other_is_noop() {
        let m = EmbeddingMatrix::from_rows(&[
            [2.0, 0.0, 0.0],
            [3.0, 0.0, 0.0],
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
        ])
        .unwrap();
        let t = normalize(&[1.0, 0.0, 0.0]).unwrap();
        let o = normalize(&[0.0, 0.0, 1.0]).unwrap();
        assert!((ccr(&t, &[&o], &m, &[0, 1], &[2, 3]).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ccr_self_erasure_gives_chance() {
        let m = EmbeddingMatrix::from_rows(&[
            [2.0, 1.0],
            [3.0, -1.0],
            [0.1, 0.5],
            [0.3, -0.2],
        ])
        .unwrap();
        let t = normalize(&[1.0, 0.0]).unwrap();
        let v = ccr(&t, &[&t.clone()], &m, &[0, 1], &[2, 3]).unwrap();
        assert_eq!(v, 0.5);
    }

    #[test]
    fn ccr_degenerate_baseline() {
        let m = EmbeddingMatrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let t = normalize(&[1.0]).unwrap();
        assert!(matches!(
            ccr(&t, &[&t.clone()], &m, &[0], &[1]),
            Err(Error::DegenerateBaseline)
        ));
    }

    #[test]
    fn youden_examples() {
        let t = youden_threshold(&[2.0, 3.0, 0.0, 1.0], &[true, true, false, false]).unwrap();
        assert_eq!(t, 1.5);
        // interleaved: J = 0 everywhere
        let t = youden_threshold(&[1.0, 1.0], &[true, false]).unwrap();
        assert_eq!(t, f64::NEG_INFINITY);
        let t = youden_threshold(&[5.0, 1.0, 2.0], &[true, false, false]).unwrap();
        assert!(t < 5.0 && t > 2.0);
        assert!(matches!(
            youden_threshold(&[1.0], &[true]),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn f1_examples() {
        let y = [true, true, false, false];
        assert_eq!(f1(&y, &y).unwrap().value, 1.0);
        let not: Vec<bool> = y.iter().map(|b| !b).collect();
        assert_eq!(f1(&y, &not).unwrap().value, 0.0);
        assert_eq!(f1(&y, &[true, false, true, false]).unwrap().value, 0.5);
        let empty = f1(&[false, false], &[false, false]).unwrap();
        assert!(empty.degenerate && empty.value == 0.0);
        assert!(matches!(f1(&y, &[true]), Err(Error::LengthMismatch(4, 1))));
    }

    #[test]
    fn disparity_examples() {
        let sd = |clean, steered_infused, infused| {
            steering_disparity_from(DisparityInputs {
                clean,
                steered_infused,
                infused,
            })
        };
        assert_eq!(sd(0.95, 0.95, 0.55).unwrap(), 0.0);
        assert_eq!(sd(0.95, 0.55, 0.55).unwrap(), 1.0);
        assert!(matches!(sd(0.9, 0.5, 0.9), Err(Error::DegenerateGap(_))));
    }

    #[test]
    fn aggregate_examples() {
        let a = aggregate(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((a.mean, a.two_se), (1.0, 0.0));
        let a = aggregate(&[0.0, 2.0]).unwrap();
        assert!((a.mean - 1.0).abs() < 1e-15 && (a.two_se - 2.0).abs() < 1e-12);
        let a = aggregate(&[7.0]).unwrap();
        assert!(a.single && a.mean == 7.0 && a.two_se == 0.0);
        assert!(matches!(aggregate(&[]), Err(Error::Empty)));
    }
}
