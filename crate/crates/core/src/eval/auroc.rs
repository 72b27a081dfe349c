//! Area under the ROC curve as the Mann–Whitney statistic.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Scores paired with binary labels (1 = positive/anomaly).
#[derive(Debug, Clone, PartialEq)]
pub struct RocInput<T = f64> {
    scores: Vec<T>,
    labels: Vec<u8>,
}

impl<T: Scalar> RocInput<T> {
    pub fn new(scores: Vec<T>, labels: Vec<u8>) -> Result<Self> {
        validate(&scores, &labels)?;
        Ok(Self { scores, labels })
    }

    pub fn scores(&self) -> &[T] {
        &self.scores
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn auroc(&self) -> Result<f64> {
        auroc(&self.scores, &self.labels)
    }
}

fn validate<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::dim("auroc", format!("{} labels", scores.len()), labels.len()));
    }
    if let Some(bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::Validation(format!("label {bad} not in {{0, 1}}")));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("auroc scores".into()));
    }
    Ok(())
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. `O(n log n)`: one sort, then a sweep over tie groups.
///
/// Fails with [`Error::UndefinedMetric`] unless both classes are present.
pub fn auroc<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<f64> {
    validate(scores, labels)?;
    let n_pos = labels.iter().filter(|&&y| y == 1).count() as u128;
    let n_neg = labels.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "need both classes, got {n_pos} positive and {n_neg} negative"
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    // twice the pair credit, kept integral until the final division
    let mut credit2: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let mut j = i;
        let (mut pos, mut neg) = (0u128, 0u128);
        while j < order.len() && scores[order[j]] == s {
            if labels[order[j]] == 1 {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        credit2 += 2 * pos * neg_below + pos * neg;
        neg_below += neg;
        i = j;
    }
    Ok(credit2 as f64 / (2 * n_pos * n_neg) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_separation() {
        assert_eq!(auroc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap(), 1.0);
    }

    #[test]
    fn all_ties_is_half() {
        assert_eq!(auroc(&[0.3; 6], &[1, 0, 1, 0, 0, 0]).unwrap(), 0.5);
    }

    #[test]
    fn three_of_four_pairs() {
        assert_eq!(auroc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap(), 0.75);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(auroc(&[0.1, 0.2], &[1, 1]), Err(Error::UndefinedMetric(_))));
        assert!(matches!(auroc::<f64>(&[], &[]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn rejects_nan_and_bad_labels() {
        assert!(matches!(auroc(&[f64::NAN, 0.2], &[1, 0]), Err(Error::NonFinite(_))));
        assert!(auroc(&[0.1, 0.2], &[1, 3]).is_err());
        assert!(RocInput::new(vec![0.1], vec![0, 1]).is_err());
    }
}
