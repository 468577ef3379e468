//! Corpus-based, trust-aware user simulation for proactive dialog agents.
//!
//! The pipeline: fit user-trait distributions and conditional behavior
//! tables from a dialog corpus ([`corpus`], [`user_model`], [`behavior`]),
//! simulate user turns ([`simulator`]), estimate trust with a multi-class
//! classifier ([`trust`]), wrap everything as a 12-step decision process for
//! policy learning ([`env`]), and measure simulator fidelity with KL
//! divergence and MSE ([`eval`]).

pub mod behavior;
pub mod corpus;
pub mod env;
pub mod error;
pub mod eval;
pub mod rng;
pub mod simulator;
pub mod trust;
pub mod user_model;

pub use behavior::{build_table, table_summary, BehaviorTable, CellStats, Condition, ContextKey, TableMode};
pub use corpus::{
    complexity_of_step, generate_synthetic_corpus, load_corpus, save_corpus, split_corpus, Corpus, CorpusFormat,
    Dialog, Exchange, Gender, GeneratorConfig, GroundTruth, ProactiveAct, UserProfile, UserRecord,
};
pub use error::{Error, Result};
pub use rng::Stream;
pub use user_model::{
    binarize_traits, fit_trait_distributions, sample_truncated_gaussian, sample_user, TraitDistributions, TraitTuple,
};
pub use simulator::{SimConfig, SimulatedLog, SimulatedTurn, Simulator};
pub use trust::{combine_trust_target, train_classifier, TrustClassifier, TrustLabel};
pub use env::{train_tabular_policy, Environment, EnvState, QLearningConfig, RewardConfig, TabularPolicy, TrustEnv};
pub use eval::{compare_modes, evaluate_simulator, kl_divergence, mse, Binning, FidelityReport, Measure};
