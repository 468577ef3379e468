use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{estimate_distribution, kl_divergence, mse, Binning, Measure};
use crate::behavior::{build_table, TableMode, DEFAULT_FALLBACK_THRESHOLD};
use crate::corpus::{complexity_of_step, split_corpus, Corpus, Exchange, STEPS};
use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::simulator::{SimConfig, SimulatedLog, SimulatedTurn, Simulator};
use crate::user_model::mean_sd;

/// Reference and simulated distributions of one measure at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionPair {
    pub measure: Measure,
    pub step: u8,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFidelity {
    pub measure: Measure,
    pub step: u8,
    pub kl: f64,
    pub mse: f64,
}

/// Mean and sample SD of per-step KL and MSE values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureSummary {
    pub kl_mean: f64,
    pub kl_sd: f64,
    pub mse_mean: f64,
    pub mse_sd: f64,
}

impl MeasureSummary {
    fn of<'a>(rows: impl Iterator<Item = &'a StepFidelity> + Clone) -> Self {
        let (kl_mean, kl_sd) = mean_sd(&rows.clone().map(|r| r.kl).collect::<Vec<_>>());
        let (mse_mean, mse_sd) = mean_sd(&rows.map(|r| r.mse).collect::<Vec<_>>());
        MeasureSummary {
            kl_mean,
            kl_sd,
            mse_mean,
            mse_sd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub mode: TableMode,
    /// One entry per measure and step, measure-major.
    pub steps: Vec<StepFidelity>,
    pub measures: Vec<(Measure, MeasureSummary)>,
    /// Pooled over every entry of `steps`.
    pub overall: MeasureSummary,
    pub fallback_rate: f64,
}

impl ModeReport {
    pub fn measure(&self, m: Measure) -> &MeasureSummary {
        &self.measures.iter().find(|(k, _)| *k == m).expect("every measure is reported").1
    }

    pub fn step(&self, m: Measure, step: u8) -> Option<&StepFidelity> {
        self.steps.iter().find(|r| r.measure == m && r.step == step)
    }
}

/// Side-by-side fidelity of one or more simulator variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub modes: Vec<ModeReport>,
}

impl FidelityReport {
    pub fn mode(&self, mode: TableMode) -> Option<&ModeReport> {
        self.modes.iter().find(|m| m.mode == mode)
    }

    fn rows(&self) -> Vec<(String, Vec<MeasureSummary>)> {
        let mut rows: Vec<_> = Measure::ALL
            .iter()
            .map(|&m| (m.label().to_string(), self.modes.iter().map(|r| *r.measure(m)).collect()))
            .collect();
        rows.push(("Overall".into(), self.modes.iter().map(|r| r.overall).collect()));
        rows
    }

    /// One row per measure plus `Overall`; four columns per mode.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("measure");
        for m in &self.modes {
            let l = m.mode.label();
            write!(out, ",{l}_kl_mean,{l}_kl_sd,{l}_mse_mean,{l}_mse_sd").unwrap();
        }
        out.push('\n');
        for (name, cells) in self.rows() {
            out.push_str(&name);
            for c in cells {
                write!(out, ",{},{},{},{}", c.kl_mean, c.kl_sd, c.mse_mean, c.mse_sd).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Aligned plain-text table with a fallback-rate footer.
    pub fn to_text(&self) -> String {
        const NAME: usize = 20;
        const CELL: usize = 10;
        let group = 4 * CELL + 3;
        let mut out = format!("{:NAME$}", "");
        for m in &self.modes {
            write!(out, " | {:^group$}", m.mode.label()).unwrap();
        }
        out.push('\n');
        write!(out, "{:NAME$}", "").unwrap();
        for _ in &self.modes {
            write!(out, " | {:>CELL$} {:>CELL$} {:>CELL$} {:>CELL$}", "KL M", "KL SD", "MSE M", "MSE SD").unwrap();
        }
        out.push('\n');
        let width = NAME + self.modes.len() * (group + 3);
        out.push_str(&"-".repeat(width));
        out.push('\n');
        for (name, cells) in self.rows() {
            write!(out, "{name:NAME$}").unwrap();
            for c in cells {
                write!(
                    out,
                    " | {:>CELL$.3} {:>CELL$.3} {:>CELL$.3} {:>CELL$.3}",
                    c.kl_mean, c.kl_sd, c.mse_mean, c.mse_sd
                )
                .unwrap();
            }
            out.push('\n');
        }
        out.push_str(&"-".repeat(width));
        out.push('\n');
        write!(out, "{:NAME$}", "Fallback rate").unwrap();
        for m in &self.modes {
            write!(out, " | {:>group$.4}", m.fallback_rate).unwrap();
        }
        out.push('\n');
        out
    }
}

fn reference_value(e: &Exchange, m: Measure) -> f64 {
    match m {
        Measure::GameScore => e.game_score,
        Measure::Duration => e.duration,
        Measure::Difficulty => f64::from(e.difficulty),
        Measure::HelpRequest => f64::from(u8::from(e.help_request)),
        Measure::SuggestionRequest => f64::from(u8::from(e.suggestion_request)),
    }
}

fn simulated_value(t: &SimulatedTurn, m: Measure) -> f64 {
    match m {
        Measure::GameScore => t.game_score,
        Measure::Duration => t.duration,
        Measure::Difficulty => f64::from(t.difficulty),
        Measure::HelpRequest => f64::from(u8::from(t.help_request)),
        Measure::SuggestionRequest => f64::from(u8::from(t.suggestion_request)),
    }
}

fn check_alignment(reference: &Corpus, simulated: &SimulatedLog) -> Result<()> {
    if reference.dialogs.len() != simulated.dialogs.len() {
        return Err(Error::AlignmentError(format!(
            "{} reference dialogs vs {} simulated",
            reference.dialogs.len(),
            simulated.dialogs.len()
        )));
    }
    for (r, s) in reference.dialogs.iter().zip(&simulated.dialogs) {
        if r.user.user_id != s.user.user_id || r.exchanges.len() != s.steps.len() {
            return Err(Error::AlignmentError(format!(
                "dialog of user `{}` does not line up with simulated user `{}`",
                r.user.user_id, s.user.user_id
            )));
        }
        for (e, t) in r.exchanges.iter().zip(&s.steps) {
            if e.step != t.step || e.proactive_act != t.proactive_act {
                return Err(Error::AlignmentError(format!(
                    "user `{}` step {}: reference ({}, {}) vs simulated ({}, {})",
                    r.user.user_id, e.step, e.step, e.proactive_act, t.step, t.proactive_act
                )));
            }
        }
    }
    Ok(())
}

/// All distribution pairs, measure-major then by step. Steps with no
/// reference data are skipped.
pub fn distribution_pairs(reference: &Corpus, simulated: &SimulatedLog, binning: &Binning) -> Result<Vec<DistributionPair>> {
    check_alignment(reference, simulated)?;
    paired_values(reference, simulated)
        .into_iter()
        .map(|(m, step, p, q)| {
            let k = complexity_of_step(step)?;
            Ok(DistributionPair {
                measure: m,
                step,
                p: estimate_distribution(&p, m, k, binning)?,
                q: estimate_distribution(&q, m, k, binning)?,
            })
        })
        .collect()
}

type Paired = (Measure, u8, Vec<f64>, Vec<f64>);

fn paired_values(reference: &Corpus, simulated: &SimulatedLog) -> Vec<Paired> {
    let mut out = Vec::with_capacity(Measure::ALL.len() * usize::from(STEPS));
    for m in Measure::ALL {
        for step in 1..=STEPS {
            let (p, q): (Vec<f64>, Vec<f64>) = reference
                .dialogs
                .iter()
                .zip(&simulated.dialogs)
                .flat_map(|(r, s)| r.exchanges.iter().zip(&s.steps))
                .filter(|(e, _)| e.step == step)
                .map(|(e, t)| (reference_value(e, m), simulated_value(&t.turn, m)))
                .unzip();
            if !p.is_empty() {
                out.push((m, step, p, q));
            }
        }
    }
    out
}

/// KL (reference as P) and paired MSE per measure and step, aggregated.
pub fn evaluate_simulator(
    reference: &Corpus,
    simulated: &SimulatedLog,
    mode: TableMode,
    binning: &Binning,
) -> Result<ModeReport> {
    check_alignment(reference, simulated)?;
    binning.validate()?;
    if reference.exchange_count() == 0 {
        return Err(Error::EmptyCorpus);
    }
    let steps = paired_values(reference, simulated)
        .into_par_iter()
        .map(|(m, step, p, q)| {
            let k = complexity_of_step(step)?;
            let kl = kl_divergence(
                &estimate_distribution(&p, m, k, binning)?,
                &estimate_distribution(&q, m, k, binning)?,
                0.0,
            )?;
            Ok(StepFidelity {
                measure: m,
                step,
                kl,
                mse: mse(&q, &p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let measures = Measure::ALL
        .iter()
        .map(|&m| (m, MeasureSummary::of(steps.iter().filter(move |r| r.measure == m))))
        .collect();
    Ok(ModeReport {
        mode,
        overall: MeasureSummary::of(steps.iter()),
        measures,
        steps,
        fallback_rate: simulated.fallback_rate(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareConfig {
    pub train_fraction: f64,
    pub fallback_threshold: usize,
    pub binning: Binning,
    /// Simulator settings other than mode and threshold.
    pub simulator: SimConfig,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            train_fraction: 0.8,
            fallback_threshold: DEFAULT_FALLBACK_THRESHOLD,
            binning: Binning::default(),
            simulator: SimConfig::default(),
        }
    }
}

/// Splits `corpus`, builds a complexity-based and a task-step-based table
/// on the train part and evaluates both on replays of the test part. Both
/// replays share one random stream.
pub fn compare_modes(corpus: &Corpus, seed: u64, config: &CompareConfig) -> Result<FidelityReport> {
    let (train, test) = split_corpus(corpus, config.train_fraction, seed)?;
    let replay = Stream::new(seed).child("replay");
    let modes = [TableMode::ComplexityBased, TableMode::TaskStepBased]
        .into_iter()
        .map(|mode| {
            let table = build_table(&train, mode, config.fallback_threshold)?;
            let sim = Simulator::new(
                table,
                SimConfig {
                    mode,
                    fallback_threshold: config.fallback_threshold,
                    seed,
                    ..config.simulator.clone()
                },
            )?;
            let log = sim.replay_conditions(&test, replay)?;
            evaluate_simulator(&test, &log, mode, &config.binning)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FidelityReport { modes })
}
