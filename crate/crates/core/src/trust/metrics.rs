use serde::{Deserialize, Serialize};

use super::classifier::{predict_trust, ScoreModel, TrustClassifier};
use super::features::trust_dataset;
use super::TrustLabel;
use crate::corpus::Corpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub support: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierMetrics {
    pub n: usize,
    pub accuracy: f64,
    /// Mean F1 over classes that occur in the truth or the predictions.
    pub macro_f1: f64,
    /// Rows are true classes, columns predicted classes (label 1 first).
    pub confusion: [[usize; 5]; 5],
    /// Frequency of the most common true class.
    pub majority_baseline: f64,
    pub per_class: [ClassMetrics; 5],
}

pub fn metrics_from_labels(truth: &[TrustLabel], predicted: &[TrustLabel]) -> Result<ClassifierMetrics> {
    if truth.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let mut confusion = [[0usize; 5]; 5];
    for (t, p) in truth.iter().zip(predicted) {
        confusion[t.index()][p.index()] += 1;
    }
    let n = truth.len();
    let correct: usize = (0..5).map(|c| confusion[c][c]).sum();
    let support: [usize; 5] = std::array::from_fn(|c| confusion[c].iter().sum());
    let predicted_count: [usize; 5] = std::array::from_fn(|c| (0..5).map(|r| confusion[r][c]).sum());

    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let per_class: [ClassMetrics; 5] = std::array::from_fn(|c| {
        let precision = ratio(confusion[c][c], predicted_count[c]);
        let recall = ratio(confusion[c][c], support[c]);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ClassMetrics {
            support: support[c],
            precision,
            recall,
            f1,
        }
    });
    let active: Vec<usize> = (0..5).filter(|&c| support[c] + predicted_count[c] > 0).collect();
    let macro_f1 = active.iter().map(|&c| per_class[c].f1).sum::<f64>() / active.len() as f64;

    Ok(ClassifierMetrics {
        n,
        accuracy: correct as f64 / n as f64,
        macro_f1,
        confusion,
        majority_baseline: *support.iter().max().unwrap() as f64 / n as f64,
        per_class,
    })
}

/// Predicts every exchange of `test` (with recorded lagged trust) and scores the result.
pub fn evaluate_classifier<M: ScoreModel>(model: &TrustClassifier<M>, test: &Corpus) -> Result<ClassifierMetrics> {
    if test.exchange_count() == 0 {
        return Err(Error::EmptyTestSet);
    }
    let (xs, truth) = trust_dataset(test, &model.schema)?;
    let predicted = xs
        .iter()
        .map(|x| predict_trust(model, x).map(|p| p.label))
        .collect::<Result<Vec<_>>>()?;
    metrics_from_labels(&truth, &predicted)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[u8]) -> Vec<TrustLabel> {
        v.iter().map(|x| TrustLabel::new(*x).unwrap()).collect()
    }

    #[test]
    fn perfect_and_constant_predictors() {
        let truth = labels(&[1, 2, 3, 3, 3, 4, 5, 5]);
        let m = metrics_from_labels(&truth, &truth).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.macro_f1, 1.0);
        let constant = labels(&[3; 8]);
        let m = metrics_from_labels(&truth, &constant).unwrap();
        assert_eq!(m.accuracy, m.majority_baseline);
        assert_eq!(m.accuracy, 3.0 / 8.0);
    }

    #[test]
    fn confusion_rows_sum_to_support() {
        let truth = labels(&[1, 1, 2, 4, 4, 4, 5]);
        let pred = labels(&[1, 2, 2, 4, 3, 5, 5]);
        let m = metrics_from_labels(&truth, &pred).unwrap();
        for c in 0..5 {
            assert_eq!(m.confusion[c].iter().sum::<usize>(), m.per_class[c].support);
        }
        assert_eq!(m.per_class[2].support, 0);
        // Class 3 is predicted once but never true: precision 0, counts toward macro-F1.
        assert_eq!(m.per_class[2].f1, 0.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(metrics_from_labels(&[], &[]), Err(Error::EmptyTestSet)));
        assert!(matches!(
            metrics_from_labels(&labels(&[1]), &labels(&[1, 2])),
            Err(Error::LengthMismatch { .. })
        ));
    }
}
