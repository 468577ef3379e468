//! Reference tabular Q-learner over (step, trait tuple, trust label).

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EnvState, Environment, TrajectoryRecord, ACTIONS};
use crate::corpus::{ProactiveAct, STEPS};
use crate::error::{Error, Result};
use crate::rng::Stream;

/// 12 steps x 8 trait tuples x 5 trust labels.
pub const STATE_COUNT: usize = 12 * 8 * 5;

pub fn state_index(s: &EnvState) -> usize {
    (usize::from(s.step) - 1) * 40 + s.traits.index() * 5 + s.estimated_trust.index()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QLearningConfig {
    /// Step size floor. The `n`-th update of a state-action pair uses
    /// `max(1/n, learning_rate)`, i.e. a running mean until the floor.
    pub learning_rate: f64,
    pub discount: f64,
    /// Exploration rate, decayed linearly to `epsilon_min` over training.
    pub epsilon: f64,
    pub epsilon_min: f64,
    pub initial_q: f64,
    pub seed: u64,
}

impl Default for QLearningConfig {
    fn default() -> Self {
        QLearningConfig {
            learning_rate: 0.05,
            discount: 0.9,
            epsilon: 1.0,
            epsilon_min: 0.2,
            initial_q: 0.0,
            seed: 0,
        }
    }
}

impl QLearningConfig {
    fn validate(&self, episodes: usize) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if episodes == 0 {
            return Err(Error::InvalidHyperparams("episodes must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0)
            || !unit(self.discount)
            || !unit(self.epsilon)
            || !unit(self.epsilon_min)
            || self.epsilon_min > self.epsilon
            || !self.initial_q.is_finite()
        {
            return Err(Error::InvalidHyperparams(format!("{self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    /// Action values per state, actions in [`ACTIONS`] order.
    pub q: Vec<[f64; 4]>,
}

impl TabularPolicy {
    pub fn zeros() -> Self {
        Self::filled(0.0)
    }

    fn filled(v: f64) -> Self {
        TabularPolicy {
            q: vec![[v; 4]; STATE_COUNT],
        }
    }

    /// Greedy action; ties go to the lowest action index.
    pub fn action(&self, state: &EnvState) -> ProactiveAct {
        ACTIONS[argmax(&self.q[state_index(state)])]
    }

    /// Greedy action for every state index.
    pub fn greedy_table(&self) -> Vec<ProactiveAct> {
        self.q.iter().map(|row| ACTIONS[argmax(row)]).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        if p.q.len() != STATE_COUNT {
            return Err(Error::InvalidConfig(format!("policy has {} states, expected {STATE_COUNT}", p.q.len())));
        }
        Ok(p)
    }
}

fn argmax(row: &[f64; 4]) -> usize {
    (1..4).fold(0, |best, i| if row[i] > row[best] { i } else { best })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingOutcome {
    pub policy: TabularPolicy,
    /// Undiscounted return of every training episode.
    pub returns: Vec<f64>,
}

/// Q-learning with epsilon-greedy exploration. Each episode is played with
/// the current table, then its transitions are applied in reverse order.
/// Episode `e` resets the environment with `Stream(seed) / "episode" / e`;
/// exploration draws from a separate substream.
pub fn train_tabular_policy<E: Environment>(
    env: &mut E,
    episodes: usize,
    config: &QLearningConfig,
) -> Result<TrainingOutcome> {
    config.validate(episodes)?;
    let root = Stream::new(config.seed);
    let mut explore = root.child("explore").rng();
    let mut policy = TabularPolicy::filled(config.initial_q);
    let mut returns = Vec::with_capacity(episodes);
    let mut visits = vec![[0u32; 4]; STATE_COUNT];
    let mut episode = Vec::with_capacity(usize::from(STEPS));

    for e in 0..episodes {
        let progress = if episodes > 1 { e as f64 / (episodes - 1) as f64 } else { 1.0 };
        let epsilon = config.epsilon + (config.epsilon_min - config.epsilon) * progress;
        let mut state = env.reset(root.child("episode").index(e as u64))?;
        let mut total = 0.0;
        episode.clear();
        for _ in 0..STEPS {
            let s = state_index(&state);
            let a = if epsilon > 0.0 && explore.random_bool(epsilon) {
                explore.random_range(0..ACTIONS.len())
            } else {
                argmax(&policy.q[s])
            };
            let t = env.step(ACTIONS[a])?;
            total += t.reward;
            episode.push((s, a, t.reward, (!t.done).then(|| state_index(&t.state))));
            state = t.state;
            if t.done {
                break;
            }
        }
        // Backing up last step first lets one episode carry the final
        // rewards all the way to step 1.
        for &(s, a, reward, next) in episode.iter().rev() {
            let target = match next {
                Some(n) => reward + config.discount * policy.q[n][argmax(&policy.q[n])],
                None => reward,
            };
            visits[s][a] += 1;
            let alpha = (1.0 / f64::from(visits[s][a])).max(config.learning_rate);
            let q = &mut policy.q[s][a];
            *q += alpha * (target - *q);
        }
        returns.push(total);
    }
    Ok(TrainingOutcome { policy, returns })
}

/// Plays one episode greedily and logs every transition.
pub fn greedy_rollout<E: Environment>(
    env: &mut E,
    policy: &TabularPolicy,
    stream: Stream,
    episode: u64,
) -> Result<Vec<TrajectoryRecord>> {
    let mut state = env.reset(stream)?;
    let mut out = Vec::with_capacity(usize::from(STEPS));
    loop {
        let action = policy.action(&state);
        let t = env.step(action)?;
        out.push(TrajectoryRecord {
            episode,
            state,
            action,
            reward: t.reward,
            done: t.done,
        });
        if t.done {
            return Ok(out);
        }
        state = t.state;
    }
}
