//! The simulated user and trust model as a sequential decision process.
//!
//! An episode is one 12-step game. The agent picks a proactive act per step,
//! the simulator answers with a user turn, and the trust classifier turns the
//! interaction so far into an estimated trust level. Both the state and the
//! reward see only that estimate, never annotated trust.

mod qlearn;

pub use qlearn::{
    greedy_rollout, state_index, train_tabular_policy, QLearningConfig, TabularPolicy, TrainingOutcome, STATE_COUNT,
};

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{complexity_of_step, ProactiveAct, UserProfile, STEPS};
use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::simulator::{ScoreClamp, SimulatedTurn, Simulator};
use crate::trust::{extract_features, HistoryEntry, InteractionRecord, TrustEstimator, TrustLabel};
use crate::user_model::{binarize_traits, sample_user, TraitDistributions, TraitTuple};

/// The four proactive acts, in action-index order.
pub const ACTIONS: [ProactiveAct; 4] = ProactiveAct::ALL;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub step: u8,
    pub complexity: u8,
    pub traits: TraitTuple,
    pub last_turn: Option<SimulatedTurn>,
    pub estimated_trust: TrustLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub score_weight: f64,
    pub trust_weight: f64,
    /// Points per option; the best option of a step with complexity `k`
    /// is worth `k * score_unit`, which normalizes the score term.
    pub score_unit: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            score_weight: 0.5,
            trust_weight: 0.5,
            score_unit: 10.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.score_weight.is_finite() || !self.trust_weight.is_finite() {
            return Err(Error::InvalidConfig("reward weights must be finite".into()));
        }
        if !(self.score_unit > 0.0) || !self.score_unit.is_finite() {
            return Err(Error::InvalidConfig("score normalizer must be positive".into()));
        }
        Ok(())
    }

    pub fn max_score(&self, step: u8) -> Result<f64> {
        Ok(self.score_unit * f64::from(complexity_of_step(step)?))
    }

    pub fn reward(&self, step: u8, game_score: f64, trust: TrustLabel) -> Result<f64> {
        let score = game_score / self.max_score(step)?;
        let trust = f64::from(trust.value() - 1) / 4.0;
        Ok(self.score_weight * score + self.trust_weight * trust)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: EnvState,
    pub reward: f64,
    pub done: bool,
}

/// Reset/step interface shared by the trust environment and test doubles.
pub trait Environment {
    fn reset(&mut self, stream: Stream) -> Result<EnvState>;
    fn step(&mut self, action: ProactiveAct) -> Result<Transition>;
}

#[derive(Debug, Clone)]
struct Episode {
    stream: Stream,
    profile: UserProfile,
    history: Vec<HistoryEntry>,
    state: EnvState,
    done: bool,
}

/// Simulator-backed environment. Cloning is cheap; clones share the
/// immutable simulator, trait distributions and trust model.
#[derive(Clone)]
pub struct TrustEnv {
    simulator: Arc<Simulator>,
    traits: Arc<TraitDistributions>,
    trust: Arc<dyn TrustEstimator>,
    reward: RewardConfig,
    episode: Option<Episode>,
}

impl std::fmt::Debug for TrustEnv {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrustEnv")
            .field("reward", &self.reward)
            .field("trust_schema", &self.trust.schema().id())
            .field("episode", &self.episode)
            .finish_non_exhaustive()
    }
}

impl TrustEnv {
    pub fn new(
        simulator: Arc<Simulator>,
        traits: Arc<TraitDistributions>,
        trust: Arc<dyn TrustEstimator>,
        reward: RewardConfig,
    ) -> Result<Self> {
        reward.validate()?;
        traits.validate()?;
        if let ScoreClamp::OptionRange { unit } = simulator.config().score_clamp {
            if unit != reward.score_unit {
                return Err(Error::InvalidConfig(format!(
                    "reward score unit {} differs from simulator score unit {unit}",
                    reward.score_unit
                )));
            }
        }
        Ok(TrustEnv {
            simulator,
            traits,
            trust,
            reward,
            episode: None,
        })
    }

    pub fn reward_config(&self) -> &RewardConfig {
        &self.reward
    }

    /// The simulated user of the current episode.
    pub fn profile(&self) -> Option<&UserProfile> {
        self.episode.as_ref().map(|e| &e.profile)
    }
}

impl Environment for TrustEnv {
    fn reset(&mut self, stream: Stream) -> Result<EnvState> {
        let profile = sample_user(&self.traits, &mut stream.child("user").rng())?;
        let state = EnvState {
            step: 1,
            complexity: complexity_of_step(1)?,
            traits: binarize_traits(&profile),
            last_turn: None,
            estimated_trust: TrustLabel::NEUTRAL,
        };
        self.episode = Some(Episode {
            stream,
            profile,
            history: Vec::with_capacity(usize::from(STEPS)),
            state,
            done: false,
        });
        Ok(state)
    }

    fn step(&mut self, action: ProactiveAct) -> Result<Transition> {
        let ep = match self.episode.as_mut() {
            Some(ep) if !ep.done => ep,
            _ => return Err(Error::EpisodeFinished),
        };
        let step = ep.state.step;
        let turn = self.simulator.simulate_turn(
            &ep.profile,
            step,
            action,
            ep.stream.child("turn").index(u64::from(step)),
        )?;
        let current = InteractionRecord::from_turn(step, ep.state.complexity, action, &turn);
        let features = extract_features(self.trust.schema(), &ep.profile, &ep.history, &current)?;
        let estimated = self.trust.estimate(&features)?.label;
        ep.history.push(HistoryEntry {
            interaction: current,
            trust: estimated,
        });

        let reward = self.reward.reward(step, turn.game_score, estimated)?;
        let done = step == STEPS;
        let next_step = if done { step } else { step + 1 };
        ep.state = EnvState {
            step: next_step,
            complexity: complexity_of_step(next_step)?,
            traits: ep.state.traits,
            last_turn: Some(turn),
            estimated_trust: estimated,
        };
        ep.done = done;
        Ok(Transition {
            state: ep.state,
            reward,
            done,
        })
    }
}

/// One line of a trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub episode: u64,
    pub state: EnvState,
    pub action: ProactiveAct,
    pub reward: f64,
    pub done: bool,
}

pub fn write_trajectories(records: &[TrajectoryRecord], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trajectories(path: &Path) -> Result<Vec<TrajectoryRecord>> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
