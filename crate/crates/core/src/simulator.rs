//! The user dialog manager: turns a behavior table into simulated user turns.
//!
//! For one turn the profile is binarized, the context cell looked up (with
//! fallback), a (help, suggestion) combination drawn from the cell's request
//! probabilities, and then difficulty, duration and score drawn conditional
//! on that combination. Each field uses its own named substream of the
//! step's [`Stream`].

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::behavior::{BehaviorTable, TableMode, DEFAULT_FALLBACK_THRESHOLD};
use crate::corpus::{
    complexity_of_step, BigFive, Corpus, CorpusFormat, Gender, ProactiveAct, UserProfile, UserRecord, MIN_DURATION,
    STEPS,
};
use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::user_model::{binarize_traits, sample_categorical, sample_truncated_gaussian};

/// How sampled game scores are confined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScoreClamp {
    /// Scores lie between the worst and best option of the step, where
    /// option `j` is worth `unit * j`.
    OptionRange { unit: f64 },
    NonNegative,
}

impl ScoreClamp {
    pub fn range(self, complexity: u8) -> (f64, f64) {
        match self {
            ScoreClamp::OptionRange { unit } => (unit, unit * f64::from(complexity)),
            ScoreClamp::NonNegative => (0.0, f64::MAX),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub mode: TableMode,
    pub fallback_threshold: usize,
    pub duration_upper: f64,
    pub score_clamp: ScoreClamp,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            mode: TableMode::TaskStepBased,
            fallback_threshold: DEFAULT_FALLBACK_THRESHOLD,
            duration_upper: 300.0,
            score_clamp: ScoreClamp::OptionRange { unit: 10.0 },
            seed: 0,
        }
    }
}

impl SimConfig {
    /// Durations are always strictly above this bound.
    pub const MIN_DURATION: f64 = MIN_DURATION;

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_upper > Self::MIN_DURATION) || !self.duration_upper.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "duration upper bound must exceed {} s",
                Self::MIN_DURATION
            )));
        }
        if let ScoreClamp::OptionRange { unit } = self.score_clamp {
            if !(unit > 0.0) || !unit.is_finite() {
                return Err(Error::InvalidConfig("score unit must be positive".into()));
            }
        }
        if self.fallback_threshold == 0 {
            return Err(Error::InvalidConfig("fallback threshold must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulatedTurn {
    pub help_request: bool,
    pub suggestion_request: bool,
    pub duration: f64,
    pub difficulty: u8,
    pub game_score: f64,
    pub used_fallback: bool,
}

#[derive(Debug, Clone)]
pub struct Simulator {
    table: BehaviorTable,
    config: SimConfig,
}

impl Simulator {
    pub fn new(table: BehaviorTable, config: SimConfig) -> Result<Self> {
        config.validate()?;
        if table.mode != config.mode {
            return Err(Error::ModeMismatch(format!(
                "config asks for {:?} but table is {:?}",
                config.mode, table.mode
            )));
        }
        if table.fallback_threshold != config.fallback_threshold {
            return Err(Error::InvalidConfig(format!(
                "config fallback threshold {} differs from table threshold {}",
                config.fallback_threshold, table.fallback_threshold
            )));
        }
        Ok(Simulator { table, config })
    }

    /// Simulator over `table` with otherwise default settings.
    pub fn with_table(table: BehaviorTable) -> Self {
        let config = SimConfig {
            mode: table.mode,
            fallback_threshold: table.fallback_threshold,
            ..Default::default()
        };
        Simulator { table, config }
    }

    pub fn table(&self) -> &BehaviorTable {
        &self.table
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// One simulated user response. `stream` should be specific to this
    /// dialog and step.
    pub fn simulate_turn(&self, profile: &UserProfile, step: u8, act: ProactiveAct, stream: Stream) -> Result<SimulatedTurn> {
        let complexity = complexity_of_step(step)?;
        let key = self.table.key(binarize_traits(profile), act, step)?;
        let hit = self.table.lookup(&key)?;

        let combination = sample_categorical(&hit.cell.request_probs, &mut stream.child("requests").rng());
        let (help_request, suggestion_request) = crate::behavior::REQUEST_COMBINATIONS[combination];
        let stats = self
            .table
            .combination(&key, hit.rung, combination)
            .ok_or_else(|| Error::NoDataForCondition(format!("{} request combination {combination}", key.condition)))?;

        let weights = stats.difficulty_counts.map(|c| c as f64);
        let difficulty = 1 + sample_categorical(&weights, &mut stream.child("difficulty").rng()) as u8;

        let duration = sample_truncated_gaussian(
            stats.duration_mean,
            stats.duration_sd,
            SimConfig::MIN_DURATION,
            self.config.duration_upper,
            &mut stream.child("duration").rng(),
        )?;
        let duration = if duration > SimConfig::MIN_DURATION {
            duration
        } else {
            SimConfig::MIN_DURATION.next_up()
        };

        let (lo, hi) = self.config.score_clamp.range(complexity);
        let game_score = sample_truncated_gaussian(
            stats.score_mean,
            stats.score_sd,
            lo,
            hi,
            &mut stream.child("score").rng(),
        )?;

        Ok(SimulatedTurn {
            help_request,
            suggestion_request,
            duration,
            difficulty,
            game_score,
            used_fallback: hit.used_fallback,
        })
    }

    /// A full game; turn `i` is step `i + 1` under `acts[i]`.
    pub fn simulate_dialog(&self, profile: &UserProfile, acts: &[ProactiveAct], stream: Stream) -> Result<Vec<SimulatedTurn>> {
        if acts.len() != usize::from(STEPS) {
            return Err(Error::WrongActCount(acts.len()));
        }
        (1..=STEPS)
            .zip(acts)
            .map(|(step, &act)| self.simulate_turn(profile, step, act, stream.index(u64::from(step))))
            .collect()
    }

    /// Simulates every exchange of `corpus` under its recorded user, step and
    /// act. The output is aligned 1:1 with the corpus. Each dialog draws
    /// from `stream / user_id`, so results do not depend on corpus order.
    pub fn replay_conditions(&self, corpus: &Corpus, stream: Stream) -> Result<SimulatedLog> {
        let dialogs = corpus
            .dialogs
            .par_iter()
            .map(|d| {
                let acts: Vec<ProactiveAct> = d.exchanges.iter().map(|e| e.proactive_act).collect();
                let turns = self.simulate_dialog(&d.user.profile, &acts, stream.child(&d.user.user_id))?;
                Ok(SimulatedDialog {
                    user: d.user.clone(),
                    dialog_id: d.exchanges[0].dialog_id.clone(),
                    steps: d
                        .exchanges
                        .iter()
                        .zip(turns)
                        .map(|(e, turn)| SimulatedStep {
                            step: e.step,
                            complexity: e.complexity,
                            proactive_act: e.proactive_act,
                            turn,
                        })
                        .collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SimulatedLog { dialogs })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedStep {
    pub step: u8,
    pub complexity: u8,
    pub proactive_act: ProactiveAct,
    pub turn: SimulatedTurn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedDialog {
    pub user: UserRecord,
    pub dialog_id: String,
    pub steps: Vec<SimulatedStep>,
}

/// Simulated behavior shaped like a corpus, without trust annotations.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimulatedLog {
    pub dialogs: Vec<SimulatedDialog>,
}

impl SimulatedLog {
    pub fn records(&self) -> impl Iterator<Item = (&SimulatedDialog, &SimulatedStep)> {
        self.dialogs.iter().flat_map(|d| d.steps.iter().map(move |s| (d, s)))
    }

    pub fn len(&self) -> usize {
        self.dialogs.iter().map(|d| d.steps.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn fallback_rate(&self) -> f64 {
        let n = self.len();
        if n == 0 {
            return 0.0;
        }
        self.records().filter(|(_, s)| s.turn.used_fallback).count() as f64 / n as f64
    }
}

/// Column order of simulated-log files: the corpus schema without the four
/// trust annotations, plus `used_fallback`.
pub const SIMULATED_COLUMNS: [&str; 21] = [
    "user_id",
    "age",
    "gender",
    "technical_affinity",
    "trust_propensity",
    "domain_expertise",
    "openness",
    "conscientiousness",
    "extraversion",
    "agreeableness",
    "neuroticism",
    "dialog_id",
    "step",
    "complexity",
    "proactive_act",
    "game_score",
    "help_request",
    "suggestion_request",
    "duration",
    "difficulty",
    "used_fallback",
];

#[derive(Debug, Serialize, Deserialize)]
struct SimRow {
    user_id: String,
    age: u32,
    gender: Gender,
    technical_affinity: f64,
    trust_propensity: f64,
    domain_expertise: f64,
    openness: f64,
    conscientiousness: f64,
    extraversion: f64,
    agreeableness: f64,
    neuroticism: f64,
    dialog_id: String,
    step: u8,
    complexity: u8,
    proactive_act: ProactiveAct,
    game_score: f64,
    help_request: bool,
    suggestion_request: bool,
    duration: f64,
    difficulty: u8,
    used_fallback: bool,
}

impl SimRow {
    fn new(d: &SimulatedDialog, s: &SimulatedStep) -> Self {
        let p = &d.user.profile;
        SimRow {
            user_id: d.user.user_id.clone(),
            age: p.age,
            gender: p.gender,
            technical_affinity: p.technical_affinity,
            trust_propensity: p.trust_propensity,
            domain_expertise: p.domain_expertise,
            openness: p.big5.openness,
            conscientiousness: p.big5.conscientiousness,
            extraversion: p.big5.extraversion,
            agreeableness: p.big5.agreeableness,
            neuroticism: p.big5.neuroticism,
            dialog_id: d.dialog_id.clone(),
            step: s.step,
            complexity: s.complexity,
            proactive_act: s.proactive_act,
            game_score: s.turn.game_score,
            help_request: s.turn.help_request,
            suggestion_request: s.turn.suggestion_request,
            duration: s.turn.duration,
            difficulty: s.turn.difficulty,
            used_fallback: s.turn.used_fallback,
        }
    }
}

pub fn save_simulated_log(log: &SimulatedLog, path: &Path, format: CorpusFormat) -> Result<()> {
    let rows = log.records().map(|(d, s)| SimRow::new(d, s));
    match format {
        CorpusFormat::Csv => {
            let mut w = csv::Writer::from_path(path)?;
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        CorpusFormat::Jsonl => {
            let mut out = BufWriter::new(File::create(path)?);
            for row in rows {
                serde_json::to_writer(&mut out, &row)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

/// Reads a simulated log, keeping file order. Consecutive rows with the same
/// `user_id` form one dialog.
pub fn load_simulated_log(path: &Path, format: CorpusFormat) -> Result<SimulatedLog> {
    let rows: Vec<SimRow> = match format {
        CorpusFormat::Csv => {
            let mut r = csv::Reader::from_path(path)?;
            let headers = r.headers()?.clone();
            if let Some(col) = SIMULATED_COLUMNS.iter().find(|c| !headers.iter().any(|h| h.trim() == **c)) {
                return Err(Error::MissingColumn((*col).into()));
            }
            r.deserialize()
                .enumerate()
                .map(|(i, row)| row.map_err(|e| Error::Malformed { row: i + 1, detail: e.to_string() }))
                .collect::<Result<_>>()?
        }
        CorpusFormat::Jsonl => BufReader::new(File::open(path)?)
            .lines()
            .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str(&l?).map_err(|e| Error::Malformed { row: i + 1, detail: e.to_string() })
            })
            .collect::<Result<_>>()?,
    };

    let mut log = SimulatedLog::default();
    for (i, row) in rows.into_iter().enumerate() {
        let row_no = i + 1;
        if row.duration.partial_cmp(&MIN_DURATION) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::ValueOutOfRange { field: "duration".into(), row: row_no, detail: row.duration.to_string() });
        }
        if !(1..=5).contains(&row.difficulty) {
            return Err(Error::ValueOutOfRange { field: "difficulty".into(), row: row_no, detail: row.difficulty.to_string() });
        }
        if complexity_of_step(row.step).ok() != Some(row.complexity) {
            return Err(Error::ValueOutOfRange { field: "complexity".into(), row: row_no, detail: row.complexity.to_string() });
        }
        let step = SimulatedStep {
            step: row.step,
            complexity: row.complexity,
            proactive_act: row.proactive_act,
            turn: SimulatedTurn {
                help_request: row.help_request,
                suggestion_request: row.suggestion_request,
                duration: row.duration,
                difficulty: row.difficulty,
                game_score: row.game_score,
                used_fallback: row.used_fallback,
            },
        };
        match log.dialogs.last_mut() {
            Some(d) if d.user.user_id == row.user_id => d.steps.push(step),
            _ => log.dialogs.push(SimulatedDialog {
                user: UserRecord {
                    user_id: row.user_id,
                    profile: UserProfile {
                        age: row.age,
                        gender: row.gender,
                        technical_affinity: row.technical_affinity,
                        trust_propensity: row.trust_propensity,
                        domain_expertise: row.domain_expertise,
                        big5: BigFive {
                            openness: row.openness,
                            conscientiousness: row.conscientiousness,
                            extraversion: row.extraversion,
                            agreeableness: row.agreeableness,
                            neuroticism: row.neuroticism,
                        },
                    },
                },
                dialog_id: row.dialog_id,
                steps: vec![step],
            }),
        }
    }
    Ok(log)
}
