//! Test-set metrics: classification accuracy and AUC.

use ndarray::ArrayView2;

use crate::data::LabelMap;
use crate::error::{CoreError, Result};

/// Fraction of rows whose decoded prediction matches the raw label.
pub fn accuracy(outputs: ArrayView2<f64>, labels: &[f64], map: &LabelMap) -> Result<f64> {
    if outputs.nrows() != labels.len() {
        return Err(CoreError::Shape(format!(
            "{} output rows vs {} labels",
            outputs.nrows(),
            labels.len()
        )));
    }
    if outputs.nrows() == 0 {
        return Err(CoreError::InvalidConfig("no instances to score".into()));
    }
    let mut correct = 0usize;
    for (row, &y) in outputs.outer_iter().zip(labels) {
        if map.predict(row.as_slice().expect("row-major outputs")) == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / labels.len() as f64)
}

/// Area under the ROC curve by the Mann-Whitney rank statistic. `positive[i]`
/// marks instances of the positive class; tied scores between a positive and
/// a negative instance count half.
pub fn auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(CoreError::Shape(format!(
            "{} scores vs {} class flags",
            scores.len(),
            positive.len()
        )));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(CoreError::InvalidConfig(
            "AUC needs at least one positive and one negative instance".into(),
        ));
    }
    if scores.iter().any(|v| v.is_nan()) {
        return Err(CoreError::InvalidConfig("AUC scores must not be NaN".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    // Sum of average ranks (1-based) of the positive instances; ties share
    // the mean rank of their run, which yields exactly the 0.5 tie credit.
    let mut rank_sum = 0.0;
    let mut i = 0usize;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0; // mean of ranks i+1 ..= j
        for &k in &order[i..j] {
            if positive[k] {
                rank_sum += avg_rank;
            }
        }
        i = j;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// O(l^2) reference: every positive/negative pair contributes 1 if the
    /// positive scores higher, 0.5 on a tie.
    fn auc_pairwise(scores: &[f64], positive: &[bool]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..scores.len() {
            if !positive[i] {
                continue;
            }
            for j in 0..scores.len() {
                if positive[j] {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn accuracy_counts_argmax_matches() {
        let map = crate::data::LabelMap::fit(&[0.0, 1.0, 2.0], 3).unwrap();
        let z = array![[0.9, 0.1, 0.0], [0.1, 0.2, 0.7], [0.4, 0.5, 0.1]];
        let acc = accuracy(z.view(), &[0.0, 2.0, 0.0], &map).unwrap();
        assert_eq!(acc, 2.0 / 3.0);
    }

    #[test]
    fn accuracy_with_scalar_outputs_uses_the_sign_rule() {
        let map = crate::data::LabelMap::fit(&[-1.0, 1.0], 1).unwrap();
        let z = array![[0.8], [-0.2], [0.0]];
        let acc = accuracy(z.view(), &[1.0, -1.0, -1.0], &map).unwrap();
        assert_eq!(acc, 2.0 / 3.0);
    }

    #[test]
    fn perfectly_separated_scores_give_auc_one() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let pos = [true, true, false, false];
        assert_eq!(auc(&scores, &pos).unwrap(), 1.0);
    }

    #[test]
    fn inverted_scores_give_auc_zero() {
        let scores = [0.1, 0.2, 0.8, 0.9];
        let pos = [true, true, false, false];
        assert_eq!(auc(&scores, &pos).unwrap(), 0.0);
    }

    #[test]
    fn ties_earn_half_credit() {
        let scores = [0.5, 0.5];
        let pos = [true, false];
        assert_eq!(auc(&scores, &pos).unwrap(), 0.5);
    }

    #[test]
    fn rank_statistic_matches_pairwise_counting_on_tied_data() {
        let scores = [0.1, 0.4, 0.4, 0.4, 0.7, 0.7, 0.9, 0.1, 0.3];
        let pos = [false, true, false, true, true, false, true, true, false];
        let fast = auc(&scores, &pos).unwrap();
        let slow = auc_pairwise(&scores, &pos);
        assert!((fast - slow).abs() < 1e-15, "{fast} vs {slow}");
    }

    #[test]
    fn rank_statistic_matches_pairwise_counting_on_random_data() {
        let mut rng = crate::rng::Rng::from_seed(99);
        for _ in 0..20 {
            let n = 30;
            // Quantized scores force plenty of ties.
            let scores: Vec<f64> = (0..n)
                .map(|_| (rng.next_f64() * 8.0).floor() / 8.0)
                .collect();
            let pos: Vec<bool> = (0..n).map(|_| rng.next_f64() < 0.4).collect();
            if pos.iter().all(|&p| p) || pos.iter().all(|&p| !p) {
                continue;
            }
            let fast = auc(&scores, &pos).unwrap();
            let slow = auc_pairwise(&scores, &pos);
            assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
        }
    }

    #[test]
    fn single_class_input_is_an_error() {
        assert!(auc(&[0.1, 0.2], &[true, true]).is_err());
    }
}
