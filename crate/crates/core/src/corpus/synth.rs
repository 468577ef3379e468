//! Synthetic corpus generator with a known behavior process.
//!
//! Each user gets a profile from [`TraitDistributions`]; the agent's act at
//! every step is drawn from `act_weights`. The user's response depends only
//! on the binarized trait tuple, the act, the complexity and (with drift
//! enabled) the position of the step within the game:
//!
//! * help and suggestion requests are independent Bernoullis with linear
//!   (clamped) probabilities;
//! * the chosen option is the best one with probability `skill`, otherwise
//!   uniform over the remaining options; option `j` scores `score_unit * j`;
//! * duration is a Gaussian truncated to `(20, duration_upper]`;
//! * difficulty is a discretized Gaussian bump over the five Likert classes.
//!
//! Drift moves skill up and duration down linearly over the four rounds of
//! the game (steps 1-3, 4-6, 7-9, 10-12), so steps sharing a complexity
//! behave differently.
//!
//! Trust follows a latent per-dialog level: it starts near the user's trust
//! propensity, rises after notifications and suggestions, rises after
//! interventions only for users with high trust propensity (and falls for
//! the rest), and moves with the quality of the user's choice. The four
//! annotations are noisy roundings of the latent level.
//!
//! [`GroundTruth`] exports the exact per-context moments of this process.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{complexity_of_step, Corpus, Dialog, Exchange, ProactiveAct, UserRecord, MIN_DURATION, STEPS};
use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::user_model::{
    binarize_traits, sample_categorical, sample_truncated_gaussian, sample_user, TraitDistributions,
    TraitTuple,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub dialogs: usize,
    pub traits: TraitDistributions,
    /// Relative frequencies with which the recording agent chose each act.
    pub act_weights: [f64; 4],
    pub behavior: BehaviorParams,
    pub drift: DriftConfig,
    pub trust: TrustRule,
    pub duration_upper: f64,
    pub score_unit: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            dialogs: 308,
            traits: TraitDistributions::default(),
            act_weights: [0.25; 4],
            behavior: BehaviorParams::default(),
            drift: DriftConfig::default(),
            trust: TrustRule::default(),
            duration_upper: 300.0,
            score_unit: 10.0,
        }
    }
}

/// Coefficients of the conditional behavior process. Trait terms apply when
/// the corresponding bit is high; act arrays are indexed None, Notification,
/// Suggestion, Intervention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BehaviorParams {
    pub help_base: f64,
    pub help_expertise: f64,
    pub help_affinity: f64,
    pub help_complexity: f64,
    pub help_act: [f64; 4],

    pub suggestion_base: f64,
    pub suggestion_propensity: f64,
    pub suggestion_expertise: f64,
    pub suggestion_complexity: f64,
    pub suggestion_act: [f64; 4],

    pub skill_base: f64,
    pub skill_expertise: f64,
    pub skill_affinity: f64,
    pub skill_complexity: f64,
    pub skill_act: [f64; 4],
    /// Multiplier on `skill_act` for users with low trust propensity.
    pub skill_act_low_propensity: f64,
    pub skill_suggestion_request: f64,

    pub duration_base: f64,
    pub duration_complexity: f64,
    pub duration_help: f64,
    pub duration_suggestion: f64,
    pub duration_expertise: f64,
    pub duration_affinity: f64,
    pub duration_act: [f64; 4],
    pub duration_sd: f64,
    pub duration_sd_complexity: f64,

    pub difficulty_base: f64,
    pub difficulty_complexity: f64,
    pub difficulty_help: f64,
    pub difficulty_expertise: f64,
    pub difficulty_spread: f64,
}

impl Default for BehaviorParams {
    fn default() -> Self {
        BehaviorParams {
            help_base: 0.22,
            help_expertise: -0.10,
            help_affinity: -0.05,
            help_complexity: 0.03,
            help_act: [0.04, 0.0, -0.06, -0.08],

            suggestion_base: 0.30,
            suggestion_propensity: 0.10,
            suggestion_expertise: -0.10,
            suggestion_complexity: 0.04,
            suggestion_act: [0.06, 0.04, -0.12, -0.16],

            skill_base: 0.40,
            skill_expertise: 0.20,
            skill_affinity: 0.05,
            skill_complexity: -0.04,
            skill_act: [0.0, 0.05, 0.12, 0.10],
            skill_act_low_propensity: 0.5,
            skill_suggestion_request: 0.08,

            duration_base: 45.0,
            duration_complexity: 8.0,
            duration_help: 12.0,
            duration_suggestion: 6.0,
            duration_expertise: -6.0,
            duration_affinity: -4.0,
            duration_act: [0.0, 3.0, 5.0, -4.0],
            duration_sd: 10.0,
            duration_sd_complexity: 2.0,

            difficulty_base: 2.0,
            difficulty_complexity: 0.5,
            difficulty_help: 0.6,
            difficulty_expertise: -0.5,
            difficulty_spread: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriftConfig {
    pub enabled: bool,
    /// Skill offset at the last round (negated at the first).
    pub score: f64,
    /// Duration offset in seconds at the first round (negated at the last).
    pub duration: f64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig {
            enabled: true,
            score: 0.2,
            duration: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrustRule {
    pub initial_base: f64,
    pub initial_propensity_slope: f64,
    pub initial_noise: f64,
    /// Per-act change of the latent level (Intervention entry applies to
    /// high-propensity users only).
    pub act_delta: [f64; 4],
    pub intervention_low_propensity: f64,
    pub best_option_delta: f64,
    pub other_option_delta: f64,
    pub annotation_noise: f64,
}

impl Default for TrustRule {
    fn default() -> Self {
        TrustRule {
            initial_base: 3.0,
            initial_propensity_slope: 0.8,
            initial_noise: 0.3,
            act_delta: [-0.05, 0.10, 0.20, 0.15],
            intervention_low_propensity: -0.35,
            best_option_delta: 0.15,
            other_option_delta: -0.10,
            annotation_noise: 0.35,
        }
    }
}

/// Exact moments of the generating process for one context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextTruth {
    pub traits: TraitTuple,
    pub act: ProactiveAct,
    pub step: u8,
    pub help_prob: f64,
    pub suggestion_prob: f64,
    /// E[game_score], marginal over the suggestion request.
    pub expected_score: f64,
    /// Mean of the untruncated duration Gaussian, marginal over requests.
    pub duration_mean: f64,
    /// P(difficulty = 1..5), marginal over the help request.
    pub difficulty_probs: [f64; 5],
}

/// The generator's configuration plus its per-context moments, written next
/// to a generated corpus so evaluations can compare against known truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: GeneratorConfig,
    pub contexts: Vec<ContextTruth>,
}

impl GroundTruth {
    pub fn new(config: &GeneratorConfig) -> Self {
        let mut contexts = Vec::with_capacity(8 * 4 * 12);
        for traits in TraitTuple::all() {
            for act in ProactiveAct::ALL {
                for step in 1..=STEPS {
                    contexts.push(config.moments(traits, act, step));
                }
            }
        }
        GroundTruth {
            config: config.clone(),
            contexts,
        }
    }

    pub fn context(&self, traits: TraitTuple, act: ProactiveAct, step: u8) -> &ContextTruth {
        &self.contexts[(traits.index() * 4 + act.index()) * usize::from(STEPS) + usize::from(step) - 1]
    }
}

fn bit(b: bool) -> f64 {
    f64::from(u8::from(b))
}

fn prob(p: f64) -> f64 {
    p.clamp(0.01, 0.99)
}

/// Within-game progress in [-1, 1]: -1 for steps 1-3, +1 for steps 10-12.
fn progress(step: u8) -> f64 {
    let round = f64::from((step - 1) / 3);
    (round - 1.5) / 1.5
}

impl GeneratorConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: GeneratorConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.dialogs == 0 {
            return invalid("dialogs must be at least 1");
        }
        self.traits.validate()?;
        if self.act_weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) || self.act_weights.iter().sum::<f64>() <= 0.0 {
            return invalid("act_weights must be non-negative with a positive sum");
        }
        if !(self.duration_upper > MIN_DURATION + 1.0) || !self.duration_upper.is_finite() {
            return invalid("duration_upper must exceed 21 seconds");
        }
        if !(self.score_unit > 0.0) || !self.score_unit.is_finite() {
            return invalid("score_unit must be positive");
        }
        let b = &self.behavior;
        if !(b.duration_sd > 0.0) || !(b.duration_sd + 2.0 * b.duration_sd_complexity > 0.0) {
            return invalid("duration spread must be positive");
        }
        if !(b.difficulty_spread > 0.0) {
            return invalid("difficulty_spread must be positive");
        }
        if !(self.trust.initial_noise >= 0.0) || !(self.trust.annotation_noise >= 0.0) {
            return invalid("trust noise levels must be non-negative");
        }
        Ok(())
    }

    fn drift_progress(&self, step: u8) -> f64 {
        if self.drift.enabled {
            progress(step)
        } else {
            0.0
        }
    }

    pub fn help_prob(&self, t: TraitTuple, act: ProactiveAct, step: u8) -> f64 {
        let b = &self.behavior;
        let k = f64::from(3 + (step - 1) % 3) - 3.0;
        prob(b.help_base
            + b.help_expertise * bit(t.domain_expertise_high)
            + b.help_affinity * bit(t.technical_affinity_high)
            + b.help_complexity * k
            + b.help_act[act.index()])
    }

    pub fn suggestion_prob(&self, t: TraitTuple, act: ProactiveAct, step: u8) -> f64 {
        let b = &self.behavior;
        let k = f64::from(3 + (step - 1) % 3) - 3.0;
        prob(b.suggestion_base
            + b.suggestion_propensity * bit(t.trust_propensity_high)
            + b.suggestion_expertise * bit(t.domain_expertise_high)
            + b.suggestion_complexity * k
            + b.suggestion_act[act.index()])
    }

    /// Probability of picking the best option.
    pub fn skill(&self, t: TraitTuple, act: ProactiveAct, step: u8, suggestion_request: bool) -> f64 {
        let b = &self.behavior;
        let k = f64::from(3 + (step - 1) % 3) - 3.0;
        let act_factor = if t.trust_propensity_high { 1.0 } else { b.skill_act_low_propensity };
        prob(b.skill_base
            + b.skill_expertise * bit(t.domain_expertise_high)
            + b.skill_affinity * bit(t.technical_affinity_high)
            + b.skill_complexity * k
            + b.skill_act[act.index()] * act_factor
            + b.skill_suggestion_request * bit(suggestion_request)
            + self.drift.score * self.drift_progress(step))
    }

    pub fn expected_score_given(&self, t: TraitTuple, act: ProactiveAct, step: u8, suggestion_request: bool) -> f64 {
        let k = f64::from(3 + (step - 1) % 3);
        let skill = self.skill(t, act, step, suggestion_request);
        // Non-best options 1..k-1 have mean score unit * k / 2.
        self.score_unit * (skill * k + (1.0 - skill) * k / 2.0)
    }

    pub fn duration_mean(&self, t: TraitTuple, act: ProactiveAct, step: u8, help: bool, suggestion: bool) -> f64 {
        let b = &self.behavior;
        let k = f64::from(3 + (step - 1) % 3) - 3.0;
        b.duration_base
            + b.duration_complexity * k
            + b.duration_help * bit(help)
            + b.duration_suggestion * bit(suggestion)
            + b.duration_expertise * bit(t.domain_expertise_high)
            + b.duration_affinity * bit(t.technical_affinity_high)
            + b.duration_act[act.index()]
            - self.drift.duration * self.drift_progress(step)
    }

    pub fn duration_sd(&self, step: u8) -> f64 {
        let k = f64::from(3 + (step - 1) % 3) - 3.0;
        self.behavior.duration_sd + self.behavior.duration_sd_complexity * k
    }

    pub fn difficulty_probs(&self, t: TraitTuple, step: u8, help: bool) -> [f64; 5] {
        let b = &self.behavior;
        let k = f64::from(3 + (step - 1) % 3) - 3.0;
        let center = b.difficulty_base
            + b.difficulty_complexity * k
            + b.difficulty_help * bit(help)
            + b.difficulty_expertise * bit(t.domain_expertise_high);
        let w: [f64; 5] = std::array::from_fn(|i| {
            let d = (i + 1) as f64 - center;
            (-d * d / (2.0 * b.difficulty_spread * b.difficulty_spread)).exp()
        });
        let total: f64 = w.iter().sum();
        w.map(|x| x / total)
    }

    pub fn moments(&self, traits: TraitTuple, act: ProactiveAct, step: u8) -> ContextTruth {
        let ph = self.help_prob(traits, act, step);
        let ps = self.suggestion_prob(traits, act, step);
        let expected_score = (1.0 - ps) * self.expected_score_given(traits, act, step, false)
            + ps * self.expected_score_given(traits, act, step, true);
        let mut duration_mean = 0.0;
        for (h, wh) in [(false, 1.0 - ph), (true, ph)] {
            for (s, ws) in [(false, 1.0 - ps), (true, ps)] {
                duration_mean += wh * ws * self.duration_mean(traits, act, step, h, s);
            }
        }
        let d0 = self.difficulty_probs(traits, step, false);
        let d1 = self.difficulty_probs(traits, step, true);
        ContextTruth {
            traits,
            act,
            step,
            help_prob: ph,
            suggestion_prob: ps,
            expected_score,
            duration_mean,
            difficulty_probs: std::array::from_fn(|i| (1.0 - ph) * d0[i] + ph * d1[i]),
        }
    }
}

/// Deterministic for a fixed `(config, seed)`.
pub fn generate_synthetic_corpus(config: &GeneratorConfig, seed: u64) -> Result<(Corpus, GroundTruth)> {
    config.validate()?;
    let root = Stream::new(seed).child("generator");
    let mut dialogs = Vec::with_capacity(config.dialogs);
    for i in 0..config.dialogs {
        let stream = root.index(i as u64);
        let profile = sample_user(&config.traits, &mut stream.child("user").rng())?;
        let user = UserRecord {
            user_id: format!("u{i:04}"),
            profile,
        };
        let exchanges = generate_dialog(config, &user, &format!("d{i:04}"), stream)?;
        dialogs.push(Dialog { user, exchanges });
    }
    Ok((Corpus::new(dialogs)?, GroundTruth::new(config)))
}

fn generate_dialog(config: &GeneratorConfig, user: &UserRecord, dialog_id: &str, stream: Stream) -> Result<Vec<Exchange>> {
    let traits = binarize_traits(&user.profile);
    let rule = &config.trust;
    let noise: f64 = stream.child("trust-initial").rng().sample(StandardNormal);
    let mut latent = (rule.initial_base
        + rule.initial_propensity_slope * (user.profile.trust_propensity - 3.0)
        + rule.initial_noise * noise)
        .clamp(1.0, 5.0);

    let mut exchanges = Vec::with_capacity(usize::from(STEPS));
    for step in 1..=STEPS {
        let s = stream.index(u64::from(step));
        let complexity = complexity_of_step(step)?;
        let act = ProactiveAct::ALL[sample_categorical(&config.act_weights, &mut s.child("act").rng())];

        let help = s.child("help").rng().random_bool(config.help_prob(traits, act, step));
        let suggestion = s
            .child("suggestion")
            .rng()
            .random_bool(config.suggestion_prob(traits, act, step));

        let difficulty = 1 + sample_categorical(
            &config.difficulty_probs(traits, step, help),
            &mut s.child("difficulty").rng(),
        ) as u8;

        let duration = sample_truncated_gaussian(
            config.duration_mean(traits, act, step, help, suggestion),
            config.duration_sd(step),
            MIN_DURATION,
            config.duration_upper,
            &mut s.child("duration").rng(),
        )?;
        let duration = if duration > MIN_DURATION { duration } else { MIN_DURATION.next_up() };

        let mut score_rng = s.child("score").rng();
        let best = score_rng.random_bool(config.skill(traits, act, step, suggestion));
        let option = if best {
            complexity
        } else {
            1 + score_rng.random_range(0..complexity - 1)
        };
        let game_score = config.score_unit * f64::from(option);

        let delta_act = match act {
            ProactiveAct::Intervention if !traits.trust_propensity_high => rule.intervention_low_propensity,
            _ => rule.act_delta[act.index()],
        };
        let delta_outcome = if best { rule.best_option_delta } else { rule.other_option_delta };
        latent = (latent + delta_act + delta_outcome).clamp(1.0, 5.0);

        let mut trust_rng = s.child("trust").rng();
        let mut annotate = || -> u8 {
            let z: f64 = trust_rng.sample(StandardNormal);
            (latent + rule.annotation_noise * z).round().clamp(1.0, 5.0) as u8
        };
        let (trust, competence, reliability, predictability) = (annotate(), annotate(), annotate(), annotate());

        exchanges.push(Exchange {
            dialog_id: dialog_id.into(),
            step,
            complexity,
            proactive_act: act,
            game_score,
            help_request: help,
            suggestion_request: suggestion,
            duration,
            difficulty,
            trust,
            competence,
            reliability,
            predictability,
        });
    }
    Ok(exchanges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{save_corpus, CorpusFormat};

    fn small(dialogs: usize) -> GeneratorConfig {
        GeneratorConfig {
            dialogs,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let (a, _) = generate_synthetic_corpus(&small(20), 42).unwrap();
        let (b, _) = generate_synthetic_corpus(&small(20), 42).unwrap();
        let (pa, pb) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        save_corpus(&a, &pa, CorpusFormat::Csv).unwrap();
        save_corpus(&b, &pb, CorpusFormat::Csv).unwrap();
        assert_eq!(std::fs::read(pa).unwrap(), std::fs::read(pb).unwrap());
        let (c, _) = generate_synthetic_corpus(&small(20), 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn default_size_matches_study() {
        let (c, truth) = generate_synthetic_corpus(&GeneratorConfig::default(), 1).unwrap();
        assert_eq!(c.dialogs.len(), 308);
        assert_eq!(c.exchange_count(), 3696);
        assert_eq!(truth.contexts.len(), 384);
    }

    #[test]
    fn invalid_configs() {
        assert!(matches!(generate_synthetic_corpus(&small(0), 1), Err(Error::InvalidConfig(_))));
        let mut cfg = small(3);
        cfg.act_weights = [0.0; 4];
        assert!(generate_synthetic_corpus(&cfg, 1).is_err());
        let mut cfg = small(3);
        cfg.duration_upper = 20.0;
        assert!(generate_synthetic_corpus(&cfg, 1).is_err());
    }

    #[test]
    fn scores_are_option_multiples() {
        let (c, _) = generate_synthetic_corpus(&small(30), 5).unwrap();
        for (_, e) in c.exchanges() {
            let option = e.game_score / 10.0;
            assert_eq!(option.fract(), 0.0);
            assert!((1.0..=f64::from(e.complexity)).contains(&option));
        }
    }

    #[test]
    fn drift_off_makes_steps_of_equal_complexity_identical() {
        let mut cfg = GeneratorConfig::default();
        cfg.drift.enabled = false;
        let truth = GroundTruth::new(&cfg);
        for t in TraitTuple::all() {
            for a in ProactiveAct::ALL {
                for step in 4..=12 {
                    let mut here = truth.context(t, a, step).clone();
                    let base = truth.context(t, a, (step - 1) % 3 + 1);
                    here.step = base.step;
                    assert_eq!(&here, base);
                }
            }
        }
        let drifting = GroundTruth::new(&GeneratorConfig::default());
        let t = TraitTuple::from_index(0);
        assert!(
            drifting.context(t, ProactiveAct::None, 10).expected_score
                > drifting.context(t, ProactiveAct::None, 1).expected_score
        );
    }

    #[test]
    fn moments_are_distributions() {
        let truth = GroundTruth::new(&GeneratorConfig::default());
        for c in &truth.contexts {
            assert!((c.difficulty_probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&c.help_prob));
            assert_eq!(truth.context(c.traits, c.act, c.step), c);
        }
    }

    #[test]
    fn toml_partial_override() {
        let cfg = GeneratorConfig::from_toml_str("dialogs = 12\n[drift]\nenabled = false\n").unwrap();
        assert_eq!(cfg.dialogs, 12);
        assert!(!cfg.drift.enabled);
        assert_eq!(cfg.behavior, BehaviorParams::default());
        assert!(GeneratorConfig::from_toml_str("dialogs = 0").is_err());
    }
}
