//! Conditional behavior tables built from a corpus.
//!
//! Exchanges are grouped by trait tuple, proactive act and either the step's
//! complexity or the step number itself. Within a cell the data is split by
//! the (help, suggestion) request combination; each combination keeps score
//! and duration moments plus difficulty class counts.
//!
//! Sparse cells fall back along a fixed ladder: trait-specific cell, then the
//! trait-agnostic (act, condition) cell, then the condition-only cell.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{complexity_of_step, Corpus, ProactiveAct, STEPS};
use crate::error::{Error, Result};
use crate::user_model::{binarize_traits, mean_sd, TraitTuple};

pub const DEFAULT_FALLBACK_THRESHOLD: usize = 10;
pub const TABLE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TableMode {
    ComplexityBased,
    TaskStepBased,
}

impl TableMode {
    pub fn condition(self, step: u8) -> Result<Condition> {
        let complexity = complexity_of_step(step)?;
        Ok(match self {
            TableMode::ComplexityBased => Condition::Complexity(complexity),
            TableMode::TaskStepBased => Condition::Step(step),
        })
    }

    pub fn conditions(self) -> Vec<Condition> {
        match self {
            TableMode::ComplexityBased => (3..=5).map(Condition::Complexity).collect(),
            TableMode::TaskStepBased => (1..=STEPS).map(Condition::Step).collect(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TableMode::ComplexityBased => "complexity",
            TableMode::TaskStepBased => "task-step",
        }
    }
}

impl fmt::Display for TableMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for TableMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "complexity" | "ComplexityBased" => Ok(TableMode::ComplexityBased),
            "task-step" | "TaskStepBased" => Ok(TableMode::TaskStepBased),
            other => Err(format!("unknown mode `{other}` (expected complexity or task-step)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    Complexity(u8),
    Step(u8),
}

impl Condition {
    fn matches(self, mode: TableMode) -> bool {
        matches!(
            (self, mode),
            (Condition::Complexity(_), TableMode::ComplexityBased) | (Condition::Step(_), TableMode::TaskStepBased)
        )
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Complexity(k) => write!(f, "complexity {k}"),
            Condition::Step(s) => write!(f, "step {s}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ContextKey {
    pub traits: TraitTuple,
    pub act: ProactiveAct,
    pub condition: Condition,
}

/// Request combinations in storage order: (help, suggestion).
pub const REQUEST_COMBINATIONS: [(bool, bool); 4] = [(false, false), (true, false), (false, true), (true, true)];

pub fn combination_index(help: bool, suggestion: bool) -> usize {
    usize::from(help) + 2 * usize::from(suggestion)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CombinationStats {
    pub count: usize,
    pub score_mean: f64,
    pub score_sd: f64,
    pub duration_mean: f64,
    pub duration_sd: f64,
    pub difficulty_counts: [usize; 5],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub n: usize,
    /// Indexed like [`REQUEST_COMBINATIONS`].
    pub request_probs: [f64; 4],
    pub combinations: [CombinationStats; 4],
}

#[derive(Default)]
struct Accumulator {
    scores: [Vec<f64>; 4],
    durations: [Vec<f64>; 4],
    difficulty: [[usize; 5]; 4],
}

impl Accumulator {
    fn push(&mut self, help: bool, suggestion: bool, score: f64, duration: f64, difficulty: u8) {
        let c = combination_index(help, suggestion);
        self.scores[c].push(score);
        self.durations[c].push(duration);
        self.difficulty[c][usize::from(difficulty) - 1] += 1;
    }

    fn finish(&self) -> CellStats {
        let n: usize = self.scores.iter().map(Vec::len).sum();
        let combinations: [CombinationStats; 4] = std::array::from_fn(|c| {
            let (score_mean, score_sd) = mean_sd(&self.scores[c]);
            let (duration_mean, duration_sd) = mean_sd(&self.durations[c]);
            CombinationStats {
                count: self.scores[c].len(),
                score_mean,
                score_sd,
                duration_mean,
                duration_sd,
                difficulty_counts: self.difficulty[c],
            }
        });
        let request_probs = if n > 0 {
            combinations.each_ref().map(|s| s.count as f64 / n as f64)
        } else {
            [0.0; 4]
        };
        CellStats {
            n,
            request_probs,
            combinations,
        }
    }
}

/// Which level of the fallback ladder served a lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rung {
    Traits,
    Act,
    Global,
}

#[derive(Debug, Clone, Copy)]
pub struct Lookup<'a> {
    pub cell: &'a CellStats,
    pub rung: Rung,
    pub used_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorTable {
    pub format_version: u32,
    pub mode: TableMode,
    pub fallback_threshold: usize,
    #[serde(with = "entries")]
    pub cells: BTreeMap<ContextKey, CellStats>,
    #[serde(with = "entries")]
    pub fallback_cells: BTreeMap<(ProactiveAct, Condition), CellStats>,
    #[serde(with = "entries")]
    pub global_cells: BTreeMap<Condition, CellStats>,
}

/// Serializes struct-keyed maps as lists of `[key, value]` pairs.
mod entries {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<K, V, S>(map: &BTreeMap<K, V>, s: S) -> Result<S::Ok, S::Error>
    where
        K: Serialize,
        V: Serialize,
        S: Serializer,
    {
        s.collect_seq(map.iter())
    }

    pub fn deserialize<'de, K, V, D>(d: D) -> Result<BTreeMap<K, V>, D::Error>
    where
        K: Deserialize<'de> + Ord,
        V: Deserialize<'de>,
        D: Deserializer<'de>,
    {
        Ok(Vec::<(K, V)>::deserialize(d)?.into_iter().collect())
    }
}

pub fn build_table(corpus: &Corpus, mode: TableMode, fallback_threshold: usize) -> Result<BehaviorTable> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if fallback_threshold == 0 {
        return Err(Error::InvalidConfig("fallback threshold must be at least 1".into()));
    }
    let mut cells: BTreeMap<ContextKey, Accumulator> = BTreeMap::new();
    let mut fallback: BTreeMap<(ProactiveAct, Condition), Accumulator> = BTreeMap::new();
    let mut global: BTreeMap<Condition, Accumulator> = BTreeMap::new();

    for dialog in &corpus.dialogs {
        let traits = binarize_traits(&dialog.user.profile);
        for ex in &dialog.exchanges {
            let condition = mode.condition(ex.step)?;
            let key = ContextKey {
                traits,
                act: ex.proactive_act,
                condition,
            };
            for acc in [
                cells.entry(key).or_default(),
                fallback.entry((ex.proactive_act, condition)).or_default(),
                global.entry(condition).or_default(),
            ] {
                acc.push(ex.help_request, ex.suggestion_request, ex.game_score, ex.duration, ex.difficulty);
            }
        }
    }

    Ok(BehaviorTable {
        format_version: TABLE_FORMAT_VERSION,
        mode,
        fallback_threshold,
        cells: cells.into_iter().map(|(k, a)| (k, a.finish())).collect(),
        fallback_cells: fallback.into_iter().map(|(k, a)| (k, a.finish())).collect(),
        global_cells: global.into_iter().map(|(k, a)| (k, a.finish())).collect(),
    })
}

impl BehaviorTable {
    pub fn key(&self, traits: TraitTuple, act: ProactiveAct, step: u8) -> Result<ContextKey> {
        Ok(ContextKey {
            traits,
            act,
            condition: self.mode.condition(step)?,
        })
    }

    fn check_mode(&self, key: &ContextKey) -> Result<()> {
        if key.condition.matches(self.mode) {
            Ok(())
        } else {
            Err(Error::ModeMismatch(format!("{:?} key {}", self.mode, key.condition)))
        }
    }

    fn cell_at(&self, key: &ContextKey, rung: Rung) -> Option<&CellStats> {
        match rung {
            Rung::Traits => self.cells.get(key),
            Rung::Act => self.fallback_cells.get(&(key.act, key.condition)),
            Rung::Global => self.global_cells.get(&key.condition),
        }
        .filter(|c| c.n > 0)
    }

    /// Trait-specific cell iff it has at least `fallback_threshold`
    /// observations, else the (act, condition) cell, else the condition cell.
    pub fn lookup(&self, key: &ContextKey) -> Result<Lookup<'_>> {
        self.check_mode(key)?;
        if let Some(cell) = self.cells.get(key).filter(|c| c.n >= self.fallback_threshold) {
            return Ok(Lookup {
                cell,
                rung: Rung::Traits,
                used_fallback: false,
            });
        }
        for rung in [Rung::Act, Rung::Global] {
            if let Some(cell) = self.cell_at(key, rung) {
                return Ok(Lookup {
                    cell,
                    rung,
                    used_fallback: true,
                });
            }
        }
        Err(Error::NoDataForCondition(key.condition.to_string()))
    }

    /// Statistics of one request combination, starting at `rung` and
    /// descending the ladder while the combination has no observations.
    pub fn combination(&self, key: &ContextKey, rung: Rung, combination: usize) -> Option<&CombinationStats> {
        [Rung::Traits, Rung::Act, Rung::Global]
            .into_iter()
            .filter(|r| *r >= rung)
            .filter_map(|r| self.cell_at(key, r))
            .map(|c| &c.combinations[combination])
            .find(|s| s.count > 0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let table: BehaviorTable = serde_json::from_str(s)?;
        if table.format_version != TABLE_FORMAT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported table format version {}",
                table.format_version
            )));
        }
        let mismatched = table
            .cells
            .keys()
            .map(|k| k.condition)
            .chain(table.global_cells.keys().copied())
            .find(|c| !c.matches(table.mode));
        if let Some(c) = mismatched {
            return Err(Error::ModeMismatch(format!("{:?} table contains {c}", table.mode)));
        }
        Ok(table)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSummary {
    pub act: ProactiveAct,
    pub condition: Condition,
    pub n: usize,
    pub observed_trait_cells: usize,
    pub dense_trait_cells: usize,
    /// Fraction of the 8 trait tuples that resolve to a fallback cell.
    pub fallback_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSummary {
    pub mode: TableMode,
    pub fallback_threshold: usize,
    pub possible_keys: usize,
    pub observed_keys: usize,
    pub dense_keys: usize,
    /// Fraction of possible keys answered by a fallback cell.
    pub fallback_coverage: f64,
    /// Fallback coverage restricted to each act, indexed like [`ProactiveAct::ALL`].
    pub act_fallback_coverage: [f64; 4],
    pub slices: Vec<SliceSummary>,
}

pub fn table_summary(table: &BehaviorTable) -> TableSummary {
    let conditions = table.mode.conditions();
    let mut slices = Vec::new();
    let mut act_dense = [0usize; 4];
    for act in ProactiveAct::ALL {
        for &condition in &conditions {
            let mut observed = 0;
            let mut dense = 0;
            for traits in TraitTuple::all() {
                if let Some(c) = table.cells.get(&ContextKey { traits, act, condition }) {
                    observed += usize::from(c.n > 0);
                    dense += usize::from(c.n >= table.fallback_threshold);
                }
            }
            act_dense[act.index()] += dense;
            slices.push(SliceSummary {
                act,
                condition,
                n: table.fallback_cells.get(&(act, condition)).map_or(0, |c| c.n),
                observed_trait_cells: observed,
                dense_trait_cells: dense,
                fallback_fraction: (8 - dense) as f64 / 8.0,
            });
        }
    }
    let per_act = 8 * conditions.len();
    let possible_keys = 4 * per_act;
    let dense_keys: usize = act_dense.iter().sum();
    TableSummary {
        mode: table.mode,
        fallback_threshold: table.fallback_threshold,
        possible_keys,
        observed_keys: table.cells.values().filter(|c| c.n > 0).count(),
        dense_keys,
        fallback_coverage: (possible_keys - dense_keys) as f64 / possible_keys as f64,
        act_fallback_coverage: act_dense.map(|d| (per_act - d) as f64 / per_act as f64),
        slices,
    }
}
