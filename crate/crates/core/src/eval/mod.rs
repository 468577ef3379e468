//! Simulator fidelity: per-step KL divergence and paired MSE between a
//! reference corpus and a condition-matched simulated log.

mod report;

pub use report::{
    compare_modes, distribution_pairs, evaluate_simulator, CompareConfig, DistributionPair, FidelityReport, MeasureSummary, ModeReport,
    StepFidelity,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::MIN_DURATION;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Measure {
    GameScore,
    Duration,
    Difficulty,
    HelpRequest,
    SuggestionRequest,
}

impl Measure {
    pub const ALL: [Measure; 5] = [
        Measure::GameScore,
        Measure::Duration,
        Measure::Difficulty,
        Measure::HelpRequest,
        Measure::SuggestionRequest,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Measure::GameScore => "Game Score",
            Measure::Duration => "Duration",
            Measure::Difficulty => "Difficulty",
            Measure::HelpRequest => "Help Request",
            Measure::SuggestionRequest => "Suggestion Request",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Measure::GameScore => "game_score",
            Measure::Duration => "duration",
            Measure::Difficulty => "difficulty",
            Measure::HelpRequest => "help_request",
            Measure::SuggestionRequest => "suggestion_request",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.key() == s || m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown measure `{s}`")))
    }
}

/// How samples become discrete distributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Binning {
    /// Fixed-width duration bins over `[duration_lo, duration_hi]`; values
    /// outside land in the first or last bin.
    pub duration_bins: usize,
    pub duration_lo: f64,
    pub duration_hi: f64,
    /// Option `j` of a step is worth `score_unit * j`.
    pub score_unit: f64,
    /// Added to every bin before renormalizing.
    pub smoothing: f64,
}

impl Default for Binning {
    fn default() -> Self {
        Binning {
            duration_bins: 20,
            duration_lo: MIN_DURATION,
            duration_hi: 300.0,
            score_unit: 10.0,
            smoothing: 1e-6,
        }
    }
}

impl Binning {
    pub fn validate(&self) -> Result<()> {
        if self.duration_bins == 0 || !(self.duration_hi > self.duration_lo) {
            return Err(Error::InvalidConfig("duration binning needs at least one bin and hi > lo".into()));
        }
        if !(self.score_unit > 0.0) {
            return Err(Error::InvalidConfig("score unit must be positive".into()));
        }
        if !(self.smoothing >= 0.0) || !self.smoothing.is_finite() {
            return Err(Error::InvalidConfig("smoothing must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Number of bins for `measure` at a step with `complexity` options.
    pub fn bins(&self, measure: Measure, complexity: u8) -> usize {
        match measure {
            Measure::GameScore => usize::from(complexity),
            Measure::Duration => self.duration_bins,
            Measure::Difficulty => 5,
            Measure::HelpRequest | Measure::SuggestionRequest => 2,
        }
    }

    fn bin_of(&self, measure: Measure, complexity: u8, value: f64) -> usize {
        let n = self.bins(measure, complexity);
        let clamp = |x: f64| (x.max(0.0) as usize).min(n - 1);
        match measure {
            Measure::GameScore => clamp((value / self.score_unit).round() - 1.0),
            Measure::Duration => {
                let width = (self.duration_hi - self.duration_lo) / n as f64;
                clamp(((value - self.duration_lo) / width).floor())
            }
            Measure::Difficulty => clamp(value.round() - 1.0),
            Measure::HelpRequest | Measure::SuggestionRequest => usize::from(value >= 0.5),
        }
    }

    /// Lower and upper edge of every duration bin.
    pub fn duration_edges(&self) -> Vec<(f64, f64)> {
        let width = (self.duration_hi - self.duration_lo) / self.duration_bins as f64;
        (0..self.duration_bins)
            .map(|i| (self.duration_lo + width * i as f64, self.duration_lo + width * (i + 1) as f64))
            .collect()
    }
}

fn normalize_smoothed(counts: &[f64], eps: f64) -> Vec<f64> {
    let total: f64 = counts.iter().map(|c| c + eps).sum();
    counts.iter().map(|c| (c + eps) / total).collect()
}

/// Histogram of `values` on the natural support of `measure`. Booleans are
/// encoded 0/1, difficulty 1..=5, scores are rounded to the nearest option.
pub fn estimate_distribution(values: &[f64], measure: Measure, complexity: u8, binning: &Binning) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptySequence);
    }
    binning.validate()?;
    let mut counts = vec![0.0; binning.bins(measure, complexity)];
    for &v in values {
        counts[binning.bin_of(measure, complexity, v)] += 1.0;
    }
    Ok(normalize_smoothed(&counts, binning.smoothing))
}

/// `KL(p || q)` in bits, after adding `smoothing` to both vectors and
/// renormalizing. Terms with `p = 0` contribute nothing; `p > 0` against
/// `q = 0` gives infinity.
pub fn kl_divergence(p: &[f64], q: &[f64], smoothing: f64) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    if let Some(i) = p.iter().chain(q).position(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::NegativeEntry(i % p.len().max(1)));
    }
    if p.is_empty() {
        return Err(Error::EmptySequence);
    }
    let p = normalize_smoothed(p, smoothing);
    let q = normalize_smoothed(q, smoothing);
    let kl: f64 = p
        .iter()
        .zip(&q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi).log2())
        .sum();
    // Rounding can leave tiny negatives when p and q are nearly equal.
    Ok(kl.max(0.0))
}

/// Mean squared difference of index-aligned values.
pub fn mse(simulated: &[f64], reference: &[f64]) -> Result<f64> {
    if simulated.len() != reference.len() {
        return Err(Error::LengthMismatch {
            left: simulated.len(),
            right: reference.len(),
        });
    }
    if simulated.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(simulated.iter().zip(reference).map(|(s, r)| (s - r).powi(2)).sum::<f64>() / simulated.len() as f64)
}
