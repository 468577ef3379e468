//! Corpus data model: users, their 12-step dialogs, and validation.
//!
//! A corpus holds one dialog per user. Each dialog is exactly twelve
//! [`Exchange`]s, one per task step, in step order.

mod io;
mod split;
pub mod synth;

pub use io::{load_corpus, save_corpus, CorpusFormat, CORPUS_COLUMNS};
pub use split::split_corpus;
pub use synth::{generate_synthetic_corpus, GeneratorConfig, GroundTruth};

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of task steps in one game.
pub const STEPS: u8 = 12;
/// Task durations must be strictly greater than this many seconds.
pub const MIN_DURATION: f64 = 20.0;
pub const MIN_AGE: u32 = 18;
pub const MAX_AGE: u32 = 60;
pub const LIKERT_MIN: f64 = 1.0;
pub const LIKERT_MAX: f64 = 5.0;

/// Number of options (3, 4 or 5) the user chooses from at `step`.
///
/// The game cycles 3, 4, 5 over its twelve steps.
pub fn complexity_of_step(step: u8) -> Result<u8> {
    if !(1..=STEPS).contains(&step) {
        return Err(Error::StepOutOfRange(i64::from(step)));
    }
    Ok(3 + (step - 1) % 3)
}

/// The agent's proactive dialog act, in increasing order of autonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ProactiveAct {
    None,
    Notification,
    Suggestion,
    Intervention,
}

impl ProactiveAct {
    pub const ALL: [ProactiveAct; 4] = [
        ProactiveAct::None,
        ProactiveAct::Notification,
        ProactiveAct::Suggestion,
        ProactiveAct::Intervention,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProactiveAct::None => "None",
            ProactiveAct::Notification => "Notification",
            ProactiveAct::Suggestion => "Suggestion",
            ProactiveAct::Intervention => "Intervention",
        }
    }
}

impl fmt::Display for ProactiveAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProactiveAct {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown proactive act `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    Other,
}

impl Gender {
    pub const ALL: [Gender; 3] = [Gender::Male, Gender::Female, Gender::Other];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BigFive {
    pub openness: f64,
    pub conscientiousness: f64,
    pub extraversion: f64,
    pub agreeableness: f64,
    pub neuroticism: f64,
}

impl BigFive {
    pub const NAMES: [&'static str; 5] = [
        "openness",
        "conscientiousness",
        "extraversion",
        "agreeableness",
        "neuroticism",
    ];

    pub fn to_array(self) -> [f64; 5] {
        [
            self.openness,
            self.conscientiousness,
            self.extraversion,
            self.agreeableness,
            self.neuroticism,
        ]
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        BigFive {
            openness: v[0],
            conscientiousness: v[1],
            extraversion: v[2],
            agreeableness: v[3],
            neuroticism: v[4],
        }
    }
}

/// Static user characteristics, observed or sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub age: u32,
    pub gender: Gender,
    pub technical_affinity: f64,
    pub trust_propensity: f64,
    pub domain_expertise: f64,
    pub big5: BigFive,
}

impl UserProfile {
    /// Checks age and scale bounds; `row` is only used for error reporting.
    pub fn validate(&self, row: usize) -> Result<()> {
        if !(MIN_AGE..=MAX_AGE).contains(&self.age) {
            return Err(out_of_range("age", row, self.age));
        }
        let scales = [
            ("technical_affinity", self.technical_affinity),
            ("trust_propensity", self.trust_propensity),
            ("domain_expertise", self.domain_expertise),
        ];
        let big5 = BigFive::NAMES.into_iter().zip(self.big5.to_array());
        for (name, v) in scales.into_iter().chain(big5) {
            if !(LIKERT_MIN..=LIKERT_MAX).contains(&v) {
                return Err(out_of_range(name, row, v));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub profile: UserProfile,
}

/// One user-agent turn: the agent's act and the user's full response for a
/// single task step, with the four trust annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub dialog_id: String,
    pub step: u8,
    pub complexity: u8,
    pub proactive_act: ProactiveAct,
    pub game_score: f64,
    pub help_request: bool,
    pub suggestion_request: bool,
    pub duration: f64,
    pub difficulty: u8,
    pub trust: u8,
    pub competence: u8,
    pub reliability: u8,
    pub predictability: u8,
}

impl Exchange {
    pub fn validate(&self, row: usize) -> Result<()> {
        let expected = complexity_of_step(self.step)
            .map_err(|_| out_of_range("step", row, self.step))?;
        if self.complexity != expected {
            return Err(Error::ValueOutOfRange {
                field: "complexity".into(),
                row,
                detail: format!("{} (step {} has complexity {expected})", self.complexity, self.step),
            });
        }
        if !(self.game_score.is_finite() && self.game_score >= 0.0) {
            return Err(out_of_range("game_score", row, self.game_score));
        }
        if !(self.duration.is_finite() && self.duration > MIN_DURATION) {
            return Err(out_of_range("duration", row, self.duration));
        }
        let likert = [
            ("difficulty", self.difficulty),
            ("trust", self.trust),
            ("competence", self.competence),
            ("reliability", self.reliability),
            ("predictability", self.predictability),
        ];
        for (name, v) in likert {
            if !(1..=5).contains(&v) {
                return Err(out_of_range(name, row, v));
            }
        }
        Ok(())
    }
}

fn out_of_range(field: &str, row: usize, value: impl fmt::Display) -> Error {
    Error::ValueOutOfRange {
        field: field.into(),
        row,
        detail: value.to_string(),
    }
}

/// One user's complete game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dialog {
    pub user: UserRecord,
    pub exchanges: Vec<Exchange>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Corpus {
    pub dialogs: Vec<Dialog>,
}

impl Corpus {
    /// Builds a corpus and checks every invariant.
    pub fn new(dialogs: Vec<Dialog>) -> Result<Self> {
        let corpus = Corpus { dialogs };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        let mut row = 0;
        for dialog in &self.dialogs {
            let user_id = &dialog.user.user_id;
            if !seen.insert(user_id.as_str()) {
                return Err(Error::InconsistentUser {
                    user_id: user_id.clone(),
                    field: "user_id (duplicate dialog)".into(),
                });
            }
            dialog.user.profile.validate(row + 1)?;
            if dialog.exchanges.len() != usize::from(STEPS) {
                return Err(Error::IncompleteDialog(user_id.clone()));
            }
            let dialog_id = &dialog.exchanges[0].dialog_id;
            for (i, ex) in dialog.exchanges.iter().enumerate() {
                row += 1;
                if usize::from(ex.step) != i + 1 || &ex.dialog_id != dialog_id {
                    return Err(Error::IncompleteDialog(user_id.clone()));
                }
                ex.validate(row)?;
            }
        }
        Ok(())
    }

    pub fn users(&self) -> impl Iterator<Item = &UserRecord> {
        self.dialogs.iter().map(|d| &d.user)
    }

    /// All exchanges in dialog order, paired with their user.
    pub fn exchanges(&self) -> impl Iterator<Item = (&UserRecord, &Exchange)> {
        self.dialogs
            .iter()
            .flat_map(|d| d.exchanges.iter().map(move |e| (&d.user, e)))
    }

    pub fn exchange_count(&self) -> usize {
        self.dialogs.iter().map(|d| d.exchanges.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.dialogs.is_empty()
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn complexity_cycle() {
        assert_eq!(complexity_of_step(1).unwrap(), 3);
        assert_eq!(complexity_of_step(5).unwrap(), 4);
        assert_eq!(complexity_of_step(7).unwrap(), 3);
        // The listed sequence 3,4,5,3,4,5 repeated over both halves of the game.
        let listed = [3, 4, 5, 3, 4, 5];
        let all: Vec<u8> = (1..=12).map(|s| complexity_of_step(s).unwrap()).collect();
        let expected: Vec<u8> = listed.iter().chain(listed.iter()).copied().collect();
        assert_eq!(all, expected);
    }

    #[test]
    fn complexity_rejects_bad_steps() {
        assert!(matches!(complexity_of_step(0), Err(Error::StepOutOfRange(0))));
        assert!(matches!(complexity_of_step(13), Err(Error::StepOutOfRange(13))));
    }

    #[test]
    fn act_parsing() {
        assert_eq!("suggestion".parse::<ProactiveAct>().unwrap(), ProactiveAct::Suggestion);
        assert!("Ask".parse::<ProactiveAct>().is_err());
        for a in ProactiveAct::ALL {
            assert_eq!(ProactiveAct::from_index(a.index()), Some(a));
        }
    }

    #[test]
    fn short_duration_rejected() {
        let mut d = dialog("u1", profile(3.0, 3.0, 3.0), ProactiveAct::None);
        d.exchanges[4].duration = 15.0;
        let err = Corpus::new(vec![d]).unwrap_err();
        assert!(matches!(err, Error::ValueOutOfRange { ref field, row: 5, .. } if field == "duration"));
    }

    #[test]
    fn exactly_twenty_seconds_rejected() {
        let mut d = dialog("u1", profile(3.0, 3.0, 3.0), ProactiveAct::None);
        d.exchanges[0].duration = 20.0;
        assert!(Corpus::new(vec![d]).is_err());
    }

    #[test]
    fn eleven_exchanges_is_incomplete() {
        let mut d = dialog("u1", profile(3.0, 3.0, 3.0), ProactiveAct::None);
        d.exchanges.pop();
        assert!(matches!(Corpus::new(vec![d]), Err(Error::IncompleteDialog(u)) if u == "u1"));
    }

    #[test]
    fn wrong_complexity_rejected() {
        let mut d = dialog("u1", profile(3.0, 3.0, 3.0), ProactiveAct::None);
        d.exchanges[1].complexity = 3;
        assert!(matches!(
            Corpus::new(vec![d]),
            Err(Error::ValueOutOfRange { field, .. }) if field == "complexity"
        ));
    }

    #[test]
    fn age_bounds() {
        let mut p = profile(3.0, 3.0, 3.0);
        p.age = 17;
        assert!(p.validate(1).is_err());
        p.age = 60;
        assert!(p.validate(1).is_ok());
        p.domain_expertise = 5.1;
        assert!(p.validate(1).is_err());
    }

    #[test]
    fn exchange_count_identity() {
        let c = Corpus::new(vec![
            dialog("a", profile(3.0, 3.0, 3.0), ProactiveAct::None),
            dialog("b", profile(3.0, 3.0, 3.0), ProactiveAct::None),
        ])
        .unwrap();
        assert_eq!(c.exchange_count(), 24);
        assert_eq!(c.exchanges().count(), 24);
    }
}
