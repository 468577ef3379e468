//! One-vs-rest linear max-margin classifier over the five trust classes.
//!
//! Each binary problem is trained with the Pegasos stochastic subgradient
//! method on standardized features. The sample order is a seeded shuffle
//! shared by all classes, so training is deterministic per seed.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::features::{trust_dataset, FeatureSchema, FeatureVector};
use super::TrustLabel;
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::rng::Stream;

/// Anything producing one score per trust class (index 0 = label 1).
pub trait ScoreModel {
    fn class_scores(&self, x: &[f64]) -> [f64; 5];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustPrediction {
    pub label: TrustLabel,
    pub scores: [f64; 5],
}

impl TrustPrediction {
    /// Argmax over scores; ties go to the lowest class.
    pub fn from_scores(scores: [f64; 5]) -> Self {
        let best = (1..5).fold(0, |best, i| if scores[i] > scores[best] { i } else { best });
        TrustPrediction {
            label: TrustLabel::from_index(best),
            scores,
        }
    }
}

/// What the environment needs from a trust model.
pub trait TrustEstimator: Send + Sync {
    fn schema(&self) -> &FeatureSchema;
    fn estimate(&self, features: &FeatureVector) -> Result<TrustPrediction>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub schema: FeatureSchema,
    pub epochs: usize,
    /// L2 regularization strength.
    pub lambda: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            schema: FeatureSchema::default(),
            epochs: 30,
            lambda: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    /// One weight row per class.
    pub weights: Vec<Vec<f64>>,
    pub bias: [f64; 5],
}

impl LinearSvm {
    pub fn fit(xs: &[Vec<f64>], ys: &[TrustLabel], epochs: usize, lambda: f64, seed: u64) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::InsufficientData(format!("{} samples, {} labels", xs.len(), ys.len())));
        }
        if epochs == 0 || !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidHyperparams(format!("epochs={epochs}, lambda={lambda}")));
        }
        let d = xs[0].len();
        if xs.iter().any(|x| x.len() != d) {
            return Err(Error::InsufficientData("ragged feature matrix".into()));
        }
        if let Some(first) = ys.first().filter(|f| ys.iter().all(|y| y == *f)) {
            return Err(Error::DegenerateLabels(first.value()));
        }

        let n = xs.len() as f64;
        let feature_mean: Vec<f64> = (0..d).map(|j| xs.iter().map(|x| x[j]).sum::<f64>() / n).collect();
        let feature_scale: Vec<f64> = (0..d)
            .map(|j| {
                let var = xs.iter().map(|x| (x[j] - feature_mean[j]).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let z: Vec<Vec<f64>> = xs
            .iter()
            .map(|x| (0..d).map(|j| (x[j] - feature_mean[j]) / feature_scale[j]).collect())
            .collect();

        let mut order: Vec<usize> = (0..xs.len()).collect();
        let mut rng = Stream::new(seed).child("pegasos").rng();
        let mut weights = vec![vec![0.0; d]; 5];
        let mut bias = [0.0; 5];
        let mut t = 0usize;
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (lambda * t as f64);
                let shrink = 1.0 - eta * lambda;
                for class in 0..5 {
                    let y = if ys[i].index() == class { 1.0 } else { -1.0 };
                    let w = &mut weights[class];
                    let margin = y * (dot(w, &z[i]) + bias[class]);
                    w.iter_mut().for_each(|wj| *wj *= shrink);
                    if margin < 1.0 {
                        for (wj, xj) in w.iter_mut().zip(&z[i]) {
                            *wj += eta * y * xj;
                        }
                        // The bias is unregularized but takes damped steps.
                        bias[class] += eta * y * lambda;
                    }
                }
            }
        }
        Ok(LinearSvm {
            feature_mean,
            feature_scale,
            weights,
            bias,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ScoreModel for LinearSvm {
    fn class_scores(&self, x: &[f64]) -> [f64; 5] {
        let z: Vec<f64> = x
            .iter()
            .zip(self.feature_mean.iter().zip(&self.feature_scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        std::array::from_fn(|c| dot(&self.weights[c], &z) + self.bias[c])
    }
}

/// A score model paired with the feature schema it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustClassifier<M = LinearSvm> {
    pub schema: FeatureSchema,
    pub model: M,
}

impl<M: ScoreModel> TrustClassifier<M> {
    pub fn predict(&self, features: &FeatureVector) -> Result<TrustPrediction> {
        predict_trust(self, features)
    }
}

impl<M: ScoreModel + Send + Sync> TrustEstimator for TrustClassifier<M> {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn estimate(&self, features: &FeatureVector) -> Result<TrustPrediction> {
        predict_trust(self, features)
    }
}

impl TrustClassifier<LinearSvm> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(s)?;
        let d = model.schema.len();
        let shapes_ok = model.model.feature_mean.len() == d
            && model.model.feature_scale.len() == d
            && model.model.weights.len() == 5
            && model.model.weights.iter().all(|w| w.len() == d);
        if !shapes_ok {
            return Err(Error::SchemaMismatch {
                expected: format!("{} with {d} features", model.schema.id()),
                found: "weights of a different shape".into(),
            });
        }
        Ok(model)
    }
}

pub fn predict_trust<M: ScoreModel>(model: &TrustClassifier<M>, features: &FeatureVector) -> Result<TrustPrediction> {
    if features.schema != model.schema.id() || features.values.len() != model.schema.len() {
        return Err(Error::SchemaMismatch {
            expected: model.schema.id(),
            found: format!("{} ({} values)", features.schema, features.values.len()),
        });
    }
    Ok(TrustPrediction::from_scores(model.model.class_scores(&features.values)))
}

/// Trains the default classifier on every exchange of `corpus`.
pub fn train_classifier(corpus: &Corpus, config: &TrainConfig) -> Result<TrustClassifier> {
    if corpus.dialogs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 dialogs, got {}",
            corpus.dialogs.len()
        )));
    }
    let (xs, ys) = trust_dataset(corpus, &config.schema)?;
    let xs: Vec<Vec<f64>> = xs.into_iter().map(|f| f.values).collect();
    let model = LinearSvm::fit(&xs, &ys, config.epochs, config.lambda, config.seed)?;
    Ok(TrustClassifier {
        schema: config.schema.clone(),
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::{dialog, profile};
    use crate::corpus::{generate_synthetic_corpus, split_corpus, GeneratorConfig, ProactiveAct};

    #[test]
    fn single_label_is_degenerate() {
        let mut dialogs: Vec<_> = (0..3)
            .map(|i| dialog(&format!("u{i}"), profile(3.0, 3.0, 3.0), ProactiveAct::None))
            .collect();
        for d in &mut dialogs {
            for e in &mut d.exchanges {
                (e.trust, e.competence, e.reliability, e.predictability) = (4, 4, 4, 4);
            }
        }
        let corpus = Corpus::new(dialogs).unwrap();
        assert!(matches!(
            train_classifier(&corpus, &TrainConfig::default()),
            Err(Error::DegenerateLabels(4))
        ));
    }

    #[test]
    fn too_few_dialogs() {
        let corpus = Corpus::new(vec![dialog("u", profile(3.0, 3.0, 3.0), ProactiveAct::None)]).unwrap();
        assert!(matches!(
            train_classifier(&corpus, &TrainConfig::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn deterministic_and_learns() {
        let (corpus, _) = generate_synthetic_corpus(&GeneratorConfig { dialogs: 120, ..Default::default() }, 4).unwrap();
        let (train, test) = split_corpus(&corpus, 0.8, 4).unwrap();
        let cfg = TrainConfig { seed: 9, ..Default::default() };
        let a = train_classifier(&train, &cfg).unwrap();
        let b = train_classifier(&train, &cfg).unwrap();
        assert_eq!(a, b);
        let m = super::super::evaluate_classifier(&a, &test).unwrap();
        assert!(m.accuracy > m.majority_baseline, "{} vs {}", m.accuracy, m.majority_baseline);
    }

    #[test]
    fn argmax_invariant_under_positive_scaling() {
        let scores = [0.3, -1.0, 2.5, 2.4, 0.0];
        let label = TrustPrediction::from_scores(scores).label;
        assert_eq!(label.value(), 3);
        for k in [1e-6, 0.5, 3.0, 1e6] {
            assert_eq!(TrustPrediction::from_scores(scores.map(|s| s * k)).label, label);
        }
        assert_eq!(TrustPrediction::from_scores([1.0; 5]).label.value(), 1);
    }

    #[test]
    fn schema_mismatch_rejected() {
        let (corpus, _) = generate_synthetic_corpus(&GeneratorConfig { dialogs: 10, ..Default::default() }, 1).unwrap();
        let model = train_classifier(&corpus, &TrainConfig { epochs: 2, ..Default::default() }).unwrap();
        let (xs, _) = trust_dataset(&corpus, &FeatureSchema::with_lag_window(1)).unwrap();
        assert!(matches!(model.predict(&xs[0]), Err(Error::SchemaMismatch { .. })));
        let json = model.to_json().unwrap();
        assert_eq!(TrustClassifier::from_json(&json).unwrap(), model);
    }

    #[test]
    fn invalid_hyperparams() {
        let xs = vec![vec![0.0], vec![1.0]];
        let ys = [TrustLabel::new(1).unwrap(), TrustLabel::new(2).unwrap()];
        assert!(matches!(LinearSvm::fit(&xs, &ys, 0, 0.1, 0), Err(Error::InvalidHyperparams(_))));
        assert!(LinearSvm::fit(&xs, &ys, 1, 0.0, 0).is_err());
    }
}
