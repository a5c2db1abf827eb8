//! Micro-pooled F1 and ROC AUC over the record x code grid, and threshold
//! tuning.

mod scores_csv;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use scores_csv::{read_scores_csv, write_scores_csv, ScoreTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub precision: f64,
    pub recall: f64,
    pub micro_f1: f64,
    /// `None` when the grid has no positive or no negative cell.
    pub micro_auc: Option<f64>,
    pub threshold: f64,
}

impl EvalReport {
    fn from_counts(tp: u64, fp: u64, fn_: u64, tn: u64, threshold: f64) -> Self {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let micro_f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            micro_f1,
            micro_auc: None,
            threshold,
        }
    }
}

fn check_shapes(scores: &[Vec<f64>], labels: &[Vec<bool>]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::dim("score/label rows", labels.len(), scores.len()));
    }
    for (s, l) in scores.iter().zip(labels) {
        if s.len() != l.len() {
            return Err(Error::dim("score/label columns", l.len(), s.len()));
        }
    }
    Ok(())
}

fn check_threshold(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParam(format!("threshold must be in [0, 1], got {t}")));
    }
    Ok(())
}

/// Confusion counts with `score >= threshold` as positive, pooled over
/// every cell.
pub fn micro_f1(scores: &[Vec<f64>], labels: &[Vec<bool>], threshold: f64) -> Result<EvalReport> {
    check_shapes(scores, labels)?;
    check_threshold(threshold)?;
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (s, l) in scores.iter().zip(labels) {
        for (&x, &y) in s.iter().zip(l) {
            match (x >= threshold, y) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
    }
    Ok(EvalReport::from_counts(tp, fp, fn_, tn, threshold))
}

/// Same as [`micro_f1`] with one threshold per code (column).
pub fn micro_f1_per_code(scores: &[Vec<f64>], labels: &[Vec<bool>], thresholds: &[f64]) -> Result<EvalReport> {
    check_shapes(scores, labels)?;
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (s, l) in scores.iter().zip(labels) {
        if s.len() != thresholds.len() {
            return Err(Error::dim("per-code thresholds", s.len(), thresholds.len()));
        }
        for ((&x, &y), &t) in s.iter().zip(l).zip(thresholds) {
            match (x >= t, y) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
    }
    let mean = thresholds.iter().sum::<f64>() / thresholds.len().max(1) as f64;
    Ok(EvalReport::from_counts(tp, fp, fn_, tn, mean))
}

/// Pooled AUC: the probability a random positive cell outscores a random
/// negative one, ties counting one half. Computed from average ranks.
pub fn micro_auc(scores: &[Vec<f64>], labels: &[Vec<bool>]) -> Result<f64> {
    check_shapes(scores, labels)?;
    let mut cells: Vec<(f64, bool)> = Vec::new();
    for (s, l) in scores.iter().zip(labels) {
        for (&x, &y) in s.iter().zip(l) {
            if x.is_nan() {
                return Err(Error::InvalidParam("NaN score".into()));
            }
            cells.push((x, y));
        }
    }
    let pos = cells.iter().filter(|c| c.1).count();
    let neg = cells.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateLabels);
    }
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Sum of (1-based, tie-averaged) ranks of the positives, doubled to stay integral.
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < cells.len() {
        let mut j = i;
        while j < cells.len() && cells[j].0 == cells[i].0 {
            j += 1;
        }
        let twice_avg = (i + 1 + j) as u128;
        let p = cells[i..j].iter().filter(|c| c.1).count() as u128;
        rank_sum2 += p * twice_avg;
        i = j;
    }
    let (p, n) = (pos as u128, neg as u128);
    let twice_u = rank_sum2 - p * (p + 1);
    Ok(twice_u as f64 / (2 * p * n) as f64)
}

/// Quadratic pair-counting AUC, the reference for [`micro_auc`].
pub fn micro_auc_pairs(scores: &[Vec<f64>], labels: &[Vec<bool>]) -> Result<f64> {
    check_shapes(scores, labels)?;
    let flat: Vec<(f64, bool)> = scores
        .iter()
        .zip(labels)
        .flat_map(|(s, l)| s.iter().copied().zip(l.iter().copied()))
        .collect();
    let (mut wins, mut ties, mut pairs) = (0u64, 0u64, 0u64);
    for &(sp, _) in flat.iter().filter(|c| c.1) {
        for &(sn, _) in flat.iter().filter(|c| !c.1) {
            pairs += 1;
            if sp > sn {
                wins += 1;
            } else if sp == sn {
                ties += 1;
            }
        }
    }
    if pairs == 0 {
        return Err(Error::DegenerateLabels);
    }
    Ok((wins as f64 + 0.5 * ties as f64) / pairs as f64)
}

/// F1 and, when defined, AUC at `threshold`.
pub fn evaluate(scores: &[Vec<f64>], labels: &[Vec<bool>], threshold: f64) -> Result<EvalReport> {
    let mut r = micro_f1(scores, labels, threshold)?;
    r.micro_auc = match micro_auc(scores, labels) {
        Ok(a) => Some(a),
        Err(Error::DegenerateLabels) => None,
        Err(e) => return Err(e),
    };
    Ok(r)
}

/// The threshold grid `0.01, 0.02, ..., 0.99`.
pub fn threshold_grid() -> impl Iterator<Item = f64> {
    (1..100).map(|k| k as f64 / 100.0)
}

fn best_on_grid(mut f1_at: impl FnMut(f64) -> f64) -> f64 {
    let mut best = (f64::NEG_INFINITY, 0.01);
    for t in threshold_grid() {
        let f = f1_at(t);
        if f > best.0 {
            best = (f, t);
        }
    }
    best.1
}

/// Grid threshold with the highest micro-F1; the lowest one wins ties.
pub fn tune_threshold(scores: &[Vec<f64>], labels: &[Vec<bool>]) -> Result<f64> {
    check_shapes(scores, labels)?;
    if scores.iter().all(Vec::is_empty) {
        return Err(Error::Empty("empty score matrix"));
    }
    Ok(best_on_grid(|t| {
        micro_f1(scores, labels, t).map(|r| r.micro_f1).unwrap_or(0.0)
    }))
}

/// One tuned threshold per code, each maximising that column's F1.
pub fn tune_per_code_thresholds(scores: &[Vec<f64>], labels: &[Vec<bool>]) -> Result<Vec<f64>> {
    check_shapes(scores, labels)?;
    let n = scores.first().map_or(0, Vec::len);
    if n == 0 {
        return Err(Error::Empty("empty score matrix"));
    }
    Ok((0..n)
        .map(|c| {
            let col_s: Vec<Vec<f64>> = scores.iter().map(|r| vec![r[c]]).collect();
            let col_l: Vec<Vec<bool>> = labels.iter().map(|r| vec![r[c]]).collect();
            best_on_grid(|t| micro_f1(&col_s, &col_l, t).map(|r| r.micro_f1).unwrap_or(0.0))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use proptest::prelude::*;

    fn col(s: &[f64], l: &[u8]) -> (Vec<Vec<f64>>, Vec<Vec<bool>>) {
        (vec![s.to_vec()], vec![l.iter().map(|&x| x == 1).collect()])
    }

    #[test]
    fn f1_arithmetic() {
        let (s, l) = col(&[0.9, 0.8, 0.7, 0.1, 0.2], &[1, 1, 0, 1, 0]);
        let r = micro_f1(&s, &l, 0.5).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_, r.tn), (2, 1, 1, 1));
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.micro_f1 - 2.0 / 3.0).abs() < 1e-15);

        let (s, l) = col(&[0.9, 0.1], &[1, 0]);
        assert_eq!(micro_f1(&s, &l, 0.5).unwrap().micro_f1, 1.0);
        let none = micro_f1(&s, &l, 0.95).unwrap();
        assert_eq!((none.precision, none.recall, none.micro_f1), (0.0, 0.0, 0.0));
        // Ties at the threshold count as positive.
        assert_eq!(micro_f1(&s, &l, 0.9).unwrap().tp, 1);
        assert!(micro_f1(&s, &l, 1.5).is_err());
        assert!(micro_f1(&s, &[vec![true]], 0.5).is_err());
    }

    #[test]
    fn auc_examples() {
        let (s, l) = col(&[0.9, 0.8, 0.3], &[1, 0, 1]);
        assert_eq!(micro_auc(&s, &l).unwrap(), 0.5);
        let (s, l) = col(&[0.9, 0.7, 0.2, 0.1], &[1, 1, 0, 0]);
        assert_eq!(micro_auc(&s, &l).unwrap(), 1.0);
        let (s, l) = col(&[0.4; 5], &[1, 0, 0, 1, 0]);
        assert_eq!(micro_auc(&s, &l).unwrap(), 0.5);
        let (s, l) = col(&[0.4, 0.5], &[1, 1]);
        assert!(matches!(micro_auc(&s, &l), Err(Error::DegenerateLabels)));
        assert!(evaluate(&s, &l, 0.5).unwrap().micro_auc.is_none());
    }

    #[test]
    fn tuning_examples() {
        let (s, l) = col(&[0.9, 0.1], &[1, 0]);
        assert_eq!(tune_threshold(&s, &l).unwrap(), 0.11);
        let (s, l) = col(&[0.3, 0.6, 0.05], &[1, 1, 1]);
        assert_eq!(tune_threshold(&s, &l).unwrap(), 0.01);
        let (s, l) = col(&[0.5, 0.5], &[1, 0]);
        assert_eq!(tune_threshold(&s, &l).unwrap(), 0.01);
        let per = tune_per_code_thresholds(
            &[vec![0.9, 0.3], vec![0.2, 0.6]],
            &[vec![true, false], vec![false, true]],
        )
        .unwrap();
        assert_eq!(per, vec![0.21, 0.31]);
    }

    fn instance(rng: &mut Rng, max_cells: usize) -> (Vec<Vec<f64>>, Vec<Vec<bool>>) {
        let cols = 1 + rng.below(10);
        let rows = 1 + rng.below(max_cells / cols);
        let coarse = rng.chance(0.5);
        let mut s = vec![vec![0.0; cols]; rows];
        let mut l = vec![vec![false; cols]; rows];
        for (sr, lr) in s.iter_mut().zip(&mut l) {
            for (x, y) in sr.iter_mut().zip(lr.iter_mut()) {
                *x = if coarse {
                    rng.below(5) as f64 / 4.0
                } else {
                    rng.next_f64()
                };
                *y = rng.chance(0.3);
            }
        }
        l[0][0] = true;
        if rows * cols > 1 {
            l[rows - 1][cols - 1] = false;
        } else {
            s[0].push(0.5);
            l[0].push(false);
        }
        (s, l)
    }

    #[test]
    fn sort_auc_matches_pair_counting() {
        let mut rng = Rng::new(2024);
        for _ in 0..200 {
            let (s, l) = instance(&mut rng, 500);
            let a = micro_auc(&s, &l).unwrap();
            let b = micro_auc_pairs(&s, &l).unwrap();
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    proptest! {
        #[test]
        fn auc_is_invariant_under_monotone_maps(seed in any::<u64>()) {
            let mut rng = Rng::new(seed);
            let (s, l) = instance(&mut rng, 200);
            let t: Vec<Vec<f64>> = s.iter().map(|r| r.iter().map(|x| (3.0 * x).exp() - 7.0).collect()).collect();
            prop_assert_eq!(micro_auc(&s, &l).unwrap(), micro_auc(&t, &l).unwrap());
        }

        #[test]
        fn tuned_threshold_is_at_least_as_good_as_half(seed in any::<u64>()) {
            let mut rng = Rng::new(seed);
            let (s, l) = instance(&mut rng, 200);
            let t = tune_threshold(&s, &l).unwrap();
            prop_assert!(micro_f1(&s, &l, t).unwrap().micro_f1 >= micro_f1(&s, &l, 0.5).unwrap().micro_f1);
        }

        #[test]
        fn record_order_does_not_matter(seed in any::<u64>()) {
            let mut rng = Rng::new(seed);
            let (s, l) = instance(&mut rng, 200);
            let mut idx: Vec<usize> = (0..s.len()).collect();
            rng.shuffle(&mut idx);
            let s2: Vec<_> = idx.iter().map(|&i| s[i].clone()).collect();
            let l2: Vec<_> = idx.iter().map(|&i| l[i].clone()).collect();
            prop_assert_eq!(evaluate(&s, &l, 0.4).unwrap(), evaluate(&s2, &l2, 0.4).unwrap());
        }
    }
}
