//! Trust estimation: the combined trust target, feature extraction over a
//! dialog's history, a multi-class classifier, and its evaluation.

mod classifier;
mod features;
mod metrics;

pub use classifier::{
    predict_trust, train_classifier, LinearSvm, ScoreModel, TrainConfig, TrustClassifier, TrustEstimator,
    TrustPrediction,
};
pub use features::{
    extract_features, trust_dataset, FeatureSchema, FeatureVector, HistoryEntry, InteractionRecord,
    FEATURE_SCHEMA_VERSION,
};
pub use metrics::{evaluate_classifier, metrics_from_labels, ClassMetrics, ClassifierMetrics};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A trust level on the 1..=5 Likert scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct TrustLabel(u8);

impl TrustLabel {
    pub const NEUTRAL: TrustLabel = TrustLabel(3);

    pub fn new(value: u8) -> Result<Self> {
        if (1..=5).contains(&value) {
            Ok(TrustLabel(value))
        } else {
            Err(Error::ValueOutOfRange {
                field: "trust".into(),
                row: 0,
                detail: value.to_string(),
            })
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// 0-based class index.
    pub fn index(self) -> usize {
        usize::from(self.0 - 1)
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < 5, "trust class index {i} out of range");
        TrustLabel(i as u8 + 1)
    }

    pub fn all() -> impl Iterator<Item = TrustLabel> {
        (1..=5).map(TrustLabel)
    }
}

impl TryFrom<u8> for TrustLabel {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        TrustLabel::new(v).map_err(|e| e.to_string())
    }
}

impl From<TrustLabel> for u8 {
    fn from(t: TrustLabel) -> u8 {
        t.0
    }
}

impl fmt::Display for TrustLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Mean of the four ratings, rounded half-up.
pub fn combine_trust_target(trust: u8, competence: u8, reliability: u8, predictability: u8) -> Result<TrustLabel> {
    let parts = [
        ("trust", trust),
        ("competence", competence),
        ("reliability", reliability),
        ("predictability", predictability),
    ];
    for (field, v) in parts {
        if !(1..=5).contains(&v) {
            return Err(Error::ValueOutOfRange {
                field: field.into(),
                row: 0,
                detail: v.to_string(),
            });
        }
    }
    let sum = u16::from(trust) + u16::from(competence) + u16::from(reliability) + u16::from(predictability);
    // floor(sum / 4 + 1/2)
    TrustLabel::new(((sum + 2) / 4) as u8)
}

pub fn exchange_target(ex: &crate::corpus::Exchange) -> Result<TrustLabel> {
    combine_trust_target(ex.trust, ex.competence, ex.reliability, ex.predictability)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn target_examples() {
        assert_eq!(combine_trust_target(1, 1, 1, 1).unwrap().value(), 1);
        assert_eq!(combine_trust_target(5, 5, 5, 5).unwrap().value(), 5);
        assert_eq!(combine_trust_target(4, 4, 5, 5).unwrap().value(), 5);
        assert_eq!(combine_trust_target(2, 3, 3, 3).unwrap().value(), 3); // 2.75
        assert_eq!(combine_trust_target(2, 2, 3, 3).unwrap().value(), 3); // 2.5
        assert_eq!(combine_trust_target(2, 2, 2, 3).unwrap().value(), 2); // 2.25
        assert!(combine_trust_target(0, 3, 3, 3).is_err());
        assert!(combine_trust_target(3, 3, 3, 6).is_err());
    }

    #[test]
    fn label_bounds() {
        assert!(TrustLabel::new(0).is_err());
        assert!(TrustLabel::new(6).is_err());
        assert_eq!(TrustLabel::from_index(4).value(), 5);
        assert!(serde_json::from_str::<TrustLabel>("7").is_err());
        assert_eq!(serde_json::from_str::<TrustLabel>("2").unwrap().value(), 2);
    }

    proptest! {
        #[test]
        fn target_symmetric_and_monotone(v in prop::array::uniform4(1u8..=5), i in 0usize..4) {
            let base = combine_trust_target(v[0], v[1], v[2], v[3]).unwrap();
            let mut rev = v;
            rev.reverse();
            prop_assert_eq!(base, combine_trust_target(rev[0], rev[1], rev[2], rev[3]).unwrap());
            let mut rot = v;
            rot.rotate_left(1);
            prop_assert_eq!(base, combine_trust_target(rot[0], rot[1], rot[2], rot[3]).unwrap());
            if v[i] < 5 {
                let mut up = v;
                up[i] += 1;
                prop_assert!(combine_trust_target(up[0], up[1], up[2], up[3]).unwrap() >= base);
            }
            // Brute-force oracle: round-half-up of the real mean.
            let mean = v.iter().map(|x| f64::from(*x)).sum::<f64>() / 4.0;
            prop_assert_eq!(f64::from(base.value()), (mean + 0.5).floor());
        }
    }
}
