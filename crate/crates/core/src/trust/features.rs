//! Named, versioned feature schema for trust estimation.
//!
//! Three groups: static personal parameters, the current exchange's
//! interaction parameters, and a window of lagged interaction parameters
//! with the trust labels observed (or estimated) at those steps. Missing lags
//! at the start of a dialog are filled with neutral values: 3 for Likert
//! quantities (difficulty, trust), 0 for flags, act indicators, duration and
//! score.

use serde::{Deserialize, Serialize};

use super::{exchange_target, TrustLabel};
use crate::corpus::{Corpus, Exchange, ProactiveAct, UserProfile};
use crate::error::{Error, Result};
use crate::simulator::SimulatedTurn;

pub const FEATURE_SCHEMA_VERSION: &str = "trust-features/v1";

const PERSONAL: [&str; 12] = [
    "age",
    "gender_male",
    "gender_female",
    "gender_other",
    "technical_affinity",
    "trust_propensity",
    "domain_expertise",
    "openness",
    "conscientiousness",
    "extraversion",
    "agreeableness",
    "neuroticism",
];

const INTERACTION: [&str; 11] = [
    "act_none",
    "act_notification",
    "act_suggestion",
    "act_intervention",
    "complexity",
    "step",
    "difficulty",
    "duration",
    "game_score",
    "help_request",
    "suggestion_request",
];

const LAGGED: [&str; 14] = [
    "act_none",
    "act_notification",
    "act_suggestion",
    "act_intervention",
    "difficulty",
    "duration",
    "game_score",
    "help_request",
    "suggestion_request",
    "trust_1",
    "trust_2",
    "trust_3",
    "trust_4",
    "trust_5",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub version: String,
    pub lag_window: usize,
}

impl Default for FeatureSchema {
    fn default() -> Self {
        FeatureSchema {
            version: FEATURE_SCHEMA_VERSION.into(),
            lag_window: 2,
        }
    }
}

impl FeatureSchema {
    pub fn with_lag_window(lag_window: usize) -> Self {
        FeatureSchema {
            lag_window,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        PERSONAL.len() + INTERACTION.len() + LAGGED.len() * self.lag_window
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = PERSONAL.iter().chain(INTERACTION.iter()).map(|s| s.to_string()).collect();
        for lag in 1..=self.lag_window {
            names.extend(LAGGED.iter().map(|s| format!("lag{lag}_{s}")));
        }
        names
    }

    /// Identifier embedding the version and window, e.g. `trust-features/v1+lag2`.
    pub fn id(&self) -> String {
        format!("{}+lag{}", self.version, self.lag_window)
    }
}

/// The observable parts of one exchange.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub step: u8,
    pub complexity: u8,
    pub act: ProactiveAct,
    pub difficulty: u8,
    pub duration: f64,
    pub game_score: f64,
    pub help_request: bool,
    pub suggestion_request: bool,
}

impl From<&Exchange> for InteractionRecord {
    fn from(e: &Exchange) -> Self {
        InteractionRecord {
            step: e.step,
            complexity: e.complexity,
            act: e.proactive_act,
            difficulty: e.difficulty,
            duration: e.duration,
            game_score: e.game_score,
            help_request: e.help_request,
            suggestion_request: e.suggestion_request,
        }
    }
}

impl InteractionRecord {
    pub fn from_turn(step: u8, complexity: u8, act: ProactiveAct, turn: &SimulatedTurn) -> Self {
        InteractionRecord {
            step,
            complexity,
            act,
            difficulty: turn.difficulty,
            duration: turn.duration,
            game_score: turn.game_score,
            help_request: turn.help_request,
            suggestion_request: turn.suggestion_request,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub interaction: InteractionRecord,
    pub trust: TrustLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub schema: String,
    pub values: Vec<f64>,
}

fn flag(b: bool) -> f64 {
    f64::from(u8::from(b))
}

fn act_one_hot(act: ProactiveAct) -> [f64; 4] {
    std::array::from_fn(|i| flag(i == act.index()))
}

/// Builds the feature vector for `current`, looking only at `history`
/// entries from earlier steps (most recent last).
pub fn extract_features(
    schema: &FeatureSchema,
    profile: &UserProfile,
    history: &[HistoryEntry],
    current: &InteractionRecord,
) -> Result<FeatureVector> {
    if schema.version != FEATURE_SCHEMA_VERSION {
        return Err(Error::SchemaMismatch {
            expected: FEATURE_SCHEMA_VERSION.into(),
            found: schema.version.clone(),
        });
    }
    if current.step == 0 {
        return Err(Error::StepOutOfRange(0));
    }
    let ordered = history.windows(2).all(|w| w[0].interaction.step < w[1].interaction.step);
    if !ordered || history.last().is_some_and(|h| h.interaction.step >= current.step) {
        return Err(Error::InvalidConfig("history must be step-ordered and precede the current step".into()));
    }

    let mut v = Vec::with_capacity(schema.len());
    v.push(f64::from(profile.age));
    v.extend((0..3).map(|g| flag(g == profile.gender.index())));
    v.extend([profile.technical_affinity, profile.trust_propensity, profile.domain_expertise]);
    v.extend(profile.big5.to_array());

    v.extend(act_one_hot(current.act));
    v.extend([
        f64::from(current.complexity),
        f64::from(current.step),
        f64::from(current.difficulty),
        current.duration,
        current.game_score,
        flag(current.help_request),
        flag(current.suggestion_request),
    ]);

    for lag in 1..=schema.lag_window {
        match history.len().checked_sub(lag).map(|i| &history[i]) {
            Some(h) => {
                let r = &h.interaction;
                v.extend(act_one_hot(r.act));
                v.extend([
                    f64::from(r.difficulty),
                    r.duration,
                    r.game_score,
                    flag(r.help_request),
                    flag(r.suggestion_request),
                ]);
                v.extend((0..5).map(|c| flag(c == h.trust.index())));
            }
            None => {
                v.extend([0.0; 4]);
                v.extend([3.0, 0.0, 0.0, 0.0, 0.0]);
                v.extend((0..5).map(|c| flag(c == TrustLabel::NEUTRAL.index())));
            }
        }
    }
    debug_assert_eq!(v.len(), schema.len());
    Ok(FeatureVector {
        schema: schema.id(),
        values: v,
    })
}

/// One (features, combined target) pair per exchange, using the recorded
/// targets of earlier steps as lagged trust.
pub fn trust_dataset(corpus: &Corpus, schema: &FeatureSchema) -> Result<(Vec<FeatureVector>, Vec<TrustLabel>)> {
    let mut xs = Vec::with_capacity(corpus.exchange_count());
    let mut ys = Vec::with_capacity(corpus.exchange_count());
    for dialog in &corpus.dialogs {
        let mut history: Vec<HistoryEntry> = Vec::with_capacity(dialog.exchanges.len());
        for ex in &dialog.exchanges {
            let current = InteractionRecord::from(ex);
            xs.push(extract_features(schema, &dialog.user.profile, &history, &current)?);
            let label = exchange_target(ex)?;
            ys.push(label);
            history.push(HistoryEntry {
                interaction: current,
                trust: label,
            });
        }
    }
    Ok((xs, ys))
}
