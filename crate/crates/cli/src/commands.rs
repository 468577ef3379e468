use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use trustsim::env::{greedy_rollout, write_trajectories};
use trustsim::eval::{compare_modes, evaluate_simulator, CompareConfig};
use trustsim::simulator::{load_simulated_log, save_simulated_log, ScoreClamp, SimulatedDialog, SimulatedStep};
use trustsim::trust::TrustEstimator;
use trustsim::{
    build_table, complexity_of_step, fit_trait_distributions, generate_synthetic_corpus, load_corpus, sample_user,
    save_corpus, train_classifier, train_tabular_policy, BehaviorTable, Corpus, CorpusFormat, Error, ProactiveAct,
    RewardConfig, SimConfig, SimulatedLog, Simulator, Stream, TableMode, TrustEnv, UserRecord,
};

use crate::config::{ClassifierSection, QLearningSection, RunConfig};
use crate::manifest::Run;
use crate::CliError;

type CmdResult = Result<PathBuf, CliError>;

fn require_seed(cfg: &RunConfig, command: &str) -> Result<u64, CliError> {
    cfg.seed
        .ok_or_else(|| CliError::Usage(format!("`{command}` is stochastic and needs an explicit --seed")))
}

fn require_path<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    p.as_deref().ok_or_else(|| CliError::Usage(format!("missing --{flag}")))
}

fn ext(format: CorpusFormat) -> &'static str {
    match format {
        CorpusFormat::Csv => "csv",
        CorpusFormat::Jsonl => "jsonl",
    }
}

fn read_corpus(run: &mut Run, path: &Path) -> Result<Corpus, CliError> {
    run.input("corpus", path)?;
    Ok(load_corpus(path, CorpusFormat::from_path(path))?)
}

/// Simulator settings other than mode and threshold.
fn sim_config(cfg: &RunConfig, mode: TableMode, seed: u64) -> SimConfig {
    let d = SimConfig::default();
    SimConfig {
        mode,
        fallback_threshold: cfg.fallback_threshold.unwrap_or(d.fallback_threshold),
        duration_upper: cfg.duration_upper.unwrap_or(d.duration_upper),
        seed,
        ..d
    }
}

pub fn gen_corpus(mut cfg: RunConfig) -> CmdResult {
    let seed = require_seed(&cfg, "gen-corpus")?;
    let mut generator = cfg.generator.take().unwrap_or_default();
    if let Some(n) = cfg.dialogs {
        generator.dialogs = n;
    }
    cfg.dialogs = Some(generator.dialogs);
    cfg.generator = Some(generator.clone());
    let format = cfg.corpus_format()?;
    cfg.format = Some(ext(format).into());

    let mut run = Run::create("gen-corpus", &cfg)?;
    run.seed("root", seed);
    let (corpus, truth) = generate_synthetic_corpus(&generator, seed)?;
    let name = format!("corpus.{}", ext(format));
    save_corpus(&corpus, &run.path(&name), format)?;
    run.record(&name)?;
    run.write("generator.toml", toml::to_string(&generator).map_err(|e| Error::InvalidConfig(e.to_string()))?)?;
    run.write("ground_truth.json", serde_json::to_string_pretty(&truth).map_err(Error::from)?)?;
    Ok(run.finish()?)
}

pub fn fit(mut cfg: RunConfig) -> CmdResult {
    let seed = require_seed(&cfg, "fit")?;
    let corpus_path = require_path(&cfg.corpus, "corpus")?.to_path_buf();
    let mode = cfg.table_mode()?;
    let threshold = cfg.fallback_threshold.unwrap_or(trustsim::behavior::DEFAULT_FALLBACK_THRESHOLD);
    let classifier = cfg.classifier.take().unwrap_or_default();
    cfg.mode = Some(mode.label().into());
    cfg.fallback_threshold = Some(threshold);
    cfg.classifier = Some(classifier.clone());

    let mut run = Run::create("fit", &cfg)?;
    let corpus = read_corpus(&mut run, &corpus_path)?;
    let classifier_seed = Stream::new(seed).child("classifier").raw();
    run.seed("root", seed);
    run.seed("classifier", classifier_seed);

    let table = build_table(&corpus, mode, threshold)?;
    let traits = fit_trait_distributions(&corpus)?;
    let model = train_classifier(&corpus, &classifier.train_config(classifier_seed))?;
    run.write("table.json", table.to_json()?)?;
    run.write("traits.json", serde_json::to_string_pretty(&traits).map_err(Error::from)?)?;
    run.write("trust_model.json", model.to_json()?)?;
    run.write(
        "table_summary.json",
        serde_json::to_string_pretty(&trustsim::table_summary(&table)).map_err(Error::from)?,
    )?;
    Ok(run.finish()?)
}

fn load_or_build_table(run: &mut Run, cfg: &RunConfig, corpus: &Corpus) -> Result<BehaviorTable, CliError> {
    let threshold = cfg.fallback_threshold.unwrap_or(trustsim::behavior::DEFAULT_FALLBACK_THRESHOLD);
    match &cfg.table {
        Some(path) => {
            run.input("table", path)?;
            let table = BehaviorTable::from_json(&std::fs::read_to_string(path).map_err(Error::from)?)?;
            if cfg.mode.is_some() && table.mode != cfg.table_mode()? {
                return Err(Error::ModeMismatch(format!("--mode {} but table is {}", cfg.table_mode()?, table.mode)).into());
            }
            Ok(table)
        }
        None => Ok(build_table(corpus, cfg.table_mode()?, threshold)?),
    }
}

pub fn simulate(mut cfg: RunConfig) -> CmdResult {
    let seed = require_seed(&cfg, "simulate")?;
    let corpus_path = require_path(&cfg.corpus, "corpus")?.to_path_buf();
    let format = cfg.corpus_format()?;
    cfg.format = Some(ext(format).into());

    let mut run = Run::create("simulate", &cfg)?;
    run.seed("root", seed);
    let corpus = read_corpus(&mut run, &corpus_path)?;
    let table = load_or_build_table(&mut run, &cfg, &corpus)?;
    let mode = table.mode;
    let sim = Simulator::new(
        table.clone(),
        SimConfig {
            fallback_threshold: table.fallback_threshold,
            ..sim_config(&cfg, mode, seed)
        },
    )?;
    let stream = Stream::new(seed).child("simulate");

    let log = match cfg.users {
        None => sim.replay_conditions(&corpus, stream)?,
        Some(n) => {
            let traits = fit_trait_distributions(&corpus)?;
            let dialogs = (0..n)
                .map(|i| {
                    let i = i as u64;
                    let profile = sample_user(&traits, &mut stream.child("users").index(i).rng())?;
                    let mut rng = stream.child("acts").index(i).rng();
                    let acts: Vec<ProactiveAct> = (0..trustsim::corpus::STEPS)
                        .map(|_| ProactiveAct::ALL[rng.random_range(0..4)])
                        .collect();
                    let turns = sim.simulate_dialog(&profile, &acts, stream.child("dialogs").index(i))?;
                    let steps = turns
                        .into_iter()
                        .zip(acts)
                        .zip(1u8..)
                        .map(|((turn, act), step)| {
                            Ok(SimulatedStep {
                                step,
                                complexity: complexity_of_step(step)?,
                                proactive_act: act,
                                turn,
                            })
                        })
                        .collect::<trustsim::Result<Vec<_>>>()?;
                    Ok(SimulatedDialog {
                        user: UserRecord {
                            user_id: format!("sim{i:04}"),
                            profile,
                        },
                        dialog_id: format!("simd{i:04}"),
                        steps,
                    })
                })
                .collect::<trustsim::Result<Vec<_>>>()?;
            SimulatedLog { dialogs }
        }
    };
    let name = format!("simulated.{}", ext(format));
    save_simulated_log(&log, &run.path(&name), format)?;
    run.record(&name)?;
    Ok(run.finish()?)
}

pub fn evaluate(mut cfg: RunConfig) -> CmdResult {
    let corpus_path = require_path(&cfg.corpus, "corpus")?.to_path_buf();
    let sim_path = require_path(&cfg.simulated, "simulated")?.to_path_buf();
    let mode = cfg.table_mode()?;
    let binning = cfg.binning.take().unwrap_or_default();
    cfg.mode = Some(mode.label().into());
    cfg.binning = Some(binning);

    let mut run = Run::create("evaluate", &cfg)?;
    let corpus = read_corpus(&mut run, &corpus_path)?;
    run.input("simulated", &sim_path)?;
    let log = load_simulated_log(&sim_path, CorpusFormat::from_path(&sim_path))?;
    let report = trustsim::FidelityReport {
        modes: vec![evaluate_simulator(&corpus, &log, mode, &binning)?],
    };
    write_report(&mut run, &report)?;
    Ok(run.finish()?)
}

fn write_report(run: &mut Run, report: &trustsim::FidelityReport) -> Result<(), CliError> {
    run.write("report.csv", report.to_csv())?;
    run.write("report.txt", report.to_text())?;
    run.write("report.json", serde_json::to_string_pretty(report).map_err(Error::from)?)?;
    Ok(())
}

pub fn compare(mut cfg: RunConfig) -> CmdResult {
    let seed = require_seed(&cfg, "compare")?;
    let corpus_path = require_path(&cfg.corpus, "corpus")?.to_path_buf();
    let d = CompareConfig::default();
    let config = CompareConfig {
        train_fraction: cfg.train_fraction.unwrap_or(d.train_fraction),
        fallback_threshold: cfg.fallback_threshold.unwrap_or(d.fallback_threshold),
        binning: cfg.binning.unwrap_or(d.binning),
        simulator: sim_config(&cfg, TableMode::TaskStepBased, seed),
    };
    cfg.train_fraction = Some(config.train_fraction);
    cfg.fallback_threshold = Some(config.fallback_threshold);
    cfg.binning = Some(config.binning);
    cfg.duration_upper = Some(config.simulator.duration_upper);

    let mut run = Run::create("compare", &cfg)?;
    run.seed("root", seed);
    let corpus = read_corpus(&mut run, &corpus_path)?;
    let report = compare_modes(&corpus, seed, &config)?;
    write_report(&mut run, &report)?;
    Ok(run.finish()?)
}

pub fn train_rl(mut cfg: RunConfig) -> CmdResult {
    let seed = require_seed(&cfg, "train-rl")?;
    let corpus_path = require_path(&cfg.corpus, "corpus")?.to_path_buf();
    let mode = cfg.table_mode()?;
    let episodes = cfg.episodes.unwrap_or(5000);
    let rollouts = cfg.rollouts.unwrap_or(10);
    let rd = RewardConfig::default();
    let reward = RewardConfig {
        score_weight: cfg.score_weight.unwrap_or(rd.score_weight),
        trust_weight: cfg.trust_weight.unwrap_or(rd.trust_weight),
        ..rd
    };
    let classifier: ClassifierSection = cfg.classifier.take().unwrap_or_default();
    let qlearning: QLearningSection = cfg.qlearning.take().unwrap_or_default();
    cfg.mode = Some(mode.label().into());
    cfg.episodes = Some(episodes);
    cfg.rollouts = Some(rollouts);
    cfg.score_weight = Some(reward.score_weight);
    cfg.trust_weight = Some(reward.trust_weight);
    cfg.classifier = Some(classifier.clone());
    cfg.qlearning = Some(qlearning.clone());

    let mut run = Run::create("train-rl", &cfg)?;
    let root = Stream::new(seed);
    let seeds = [
        ("root", seed),
        ("classifier", root.child("classifier").raw()),
        ("qlearning", root.child("qlearning").raw()),
        ("rollouts", root.child("rollouts").raw()),
    ];
    for (name, s) in seeds {
        run.seed(name, s);
    }
    let corpus = read_corpus(&mut run, &corpus_path)?;
    let table = load_or_build_table(&mut run, &cfg, &corpus)?;
    let sim = Simulator::new(
        table.clone(),
        SimConfig {
            fallback_threshold: table.fallback_threshold,
            score_clamp: ScoreClamp::OptionRange { unit: reward.score_unit },
            ..sim_config(&cfg, table.mode, seed)
        },
    )?;
    let traits = fit_trait_distributions(&corpus)?;
    let model = train_classifier(&corpus, &classifier.train_config(seeds[1].1))?;
    let estimator: Arc<dyn TrustEstimator> = Arc::new(model);
    let mut env = TrustEnv::new(Arc::new(sim), Arc::new(traits), estimator, reward)?;

    let outcome = train_tabular_policy(&mut env, episodes, &qlearning.config(seeds[2].1))?;
    let mut curve = String::from("episode,return\n");
    for (i, r) in outcome.returns.iter().enumerate() {
        curve.push_str(&format!("{},{}\n", i + 1, r));
    }
    run.write("learning_curve.csv", curve)?;
    run.write("policy.json", outcome.policy.to_json()?)?;

    let rollout_stream = Stream::new(seeds[3].1);
    let mut records = Vec::new();
    for e in 0..rollouts as u64 {
        records.extend(greedy_rollout(&mut env, &outcome.policy, rollout_stream.index(e), e)?);
    }
    write_trajectories(&records, &run.path("trajectories.jsonl"))?;
    run.record("trajectories.jsonl")?;
    Ok(run.finish()?)
}
