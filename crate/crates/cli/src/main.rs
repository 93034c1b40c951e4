//! `platoon` — train, evaluate and compare groupcast resource-selection
//! policies.
//!
//! Subcommands:
//!   train    learn a policy, write checkpoint + reward curves
//!   eval     sweep payload sizes with a frozen policy, write metrics + traces
//!   compare  run all three policies paired on the same channel draws
//!
//! Log verbosity via RUST_LOG (env_logger). Exit codes: 0 ok, 2 bad
//! configuration, 3 runtime failure.

mod artifacts;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::Utc;
use clap::{Args, Parser, Subcommand};

use artifacts::RunManifest;
use platoon_core::eval::{self, EvalPointResult, EvalPolicy};
use platoon_core::rng::{self, tag};
use platoon_core::{marl, vdn};
use platoon_core::{Algo, Checkpoint, Error, QNetParams, Result, SimConfig, TrainLogRow};
use rand::Rng as _;

#[derive(Parser)]
#[command(name = "platoon", version, about = "Multi-platoon groupcast experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a learner and write its checkpoint and reward curves.
    Train(TrainArgs),
    /// Evaluate a checkpoint (or the random policy) over a payload sweep.
    Eval(EvalArgs),
    /// Train or load both learners, then evaluate all three policies on
    /// identical channel realizations.
    Compare(CompareArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration TOML ([scenario] + [training]).
    #[arg(long)]
    config: PathBuf,

    /// Override the config's rng_seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Override the config's completion-bonus coefficient tau.
    #[arg(long)]
    tau: Option<f64>,

    /// Directory for output artifacts (created if missing).
    #[arg(long)]
    out_dir: PathBuf,
}

impl CommonArgs {
    fn load_config(&self) -> Result<SimConfig> {
        let mut cfg = SimConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.scenario.rng_seed = seed;
        }
        if let Some(tau) = self.tau {
            cfg.training.tau = tau;
        }
        cfg.validate()?;
        fs::create_dir_all(&self.out_dir)?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Which learner to train.
    #[arg(long, default_value = "vdn")]
    algo: Algo,

    /// Override the config's training episode count.
    #[arg(long)]
    episodes: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Trained checkpoint to evaluate (omit for --algo random).
    #[arg(long)]
    checkpoint: Option<PathBuf>,

    /// Policy name; required without --checkpoint, cross-checked against it
    /// otherwise.
    #[arg(long)]
    algo: Option<Algo>,

    /// Payload sizes to sweep, as multiples of payload_unit_bytes.
    #[arg(long, value_delimiter = ',', default_values_t = (1..=10u64).collect::<Vec<_>>())]
    payload_multiples: Vec<u64>,

    /// Greedy evaluation episodes per payload point.
    #[arg(long, default_value_t = 500)]
    episodes: u64,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Reuse a trained shared-net checkpoint instead of training here.
    #[arg(long)]
    vdn_checkpoint: Option<PathBuf>,

    /// Reuse a trained independent-nets checkpoint instead of training here.
    #[arg(long)]
    marl_checkpoint: Option<PathBuf>,

    /// Payload sizes to sweep, as multiples of payload_unit_bytes.
    #[arg(long, value_delimiter = ',', default_values_t = (1..=10u64).collect::<Vec<_>>())]
    payload_multiples: Vec<u64>,

    /// Greedy evaluation episodes per payload point.
    #[arg(long, default_value_t = 500)]
    episodes: u64,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Compare(args) => cmd_compare(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

/// Train one learner into `dir`; returns the nets and the files written.
fn train_into(cfg: &SimConfig, algo: Algo, dir: &Path) -> Result<(Vec<QNetParams>, Vec<String>)> {
    fs::create_dir_all(dir)?;
    let (nets, log): (Vec<QNetParams>, Vec<TrainLogRow>) = match algo {
        Algo::Vdn => {
            let r = vdn::train(cfg)?;
            (vec![r.params], r.log)
        }
        Algo::Marl => {
            let r = marl::train_marl(cfg)?;
            (r.nets, r.log)
        }
        Algo::Random => {
            return Err(Error::Config("the random policy has no parameters to train".into()));
        }
    };

    Checkpoint::new(algo, cfg.structural_hash(), nets.clone())?.save(&dir.join("checkpoint.bin"))?;
    artifacts::write_training_csv(&dir.join("training.csv"), &log)?;
    artifacts::write_rewards_csv(&dir.join("rewards.csv"), &log)?;
    let files =
        vec!["checkpoint.bin".to_string(), "training.csv".to_string(), "rewards.csv".to_string()];
    Ok((nets, files))
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut cfg = args.common.load_config()?;
    if let Some(e) = args.episodes {
        cfg.training.episodes = e;
        cfg.validate()?;
    }
    let started = Utc::now();
    let (_, mut outputs) = train_into(&cfg, args.algo, &args.common.out_dir)?;

    let manifest = RunManifest {
        command: "train".into(),
        algo: args.algo.to_string(),
        seed: cfg.scenario.rng_seed,
        code_version: env!("CARGO_PKG_VERSION").into(),
        started_utc: started.to_rfc3339(),
        finished_utc: Utc::now().to_rfc3339(),
        trace_episode: None,
        scenario_hash: format!("{:#018x}", cfg.structural_hash()),
        outputs: {
            outputs.push("manifest.json".into());
            outputs
        },
        config: cfg,
    };
    manifest.write(&args.common.out_dir)?;
    Ok(())
}

/// Load a checkpoint and refuse unless it was trained on this scenario.
fn load_checkpoint(path: &Path, cfg: &SimConfig, expect_algo: Option<Algo>) -> Result<Checkpoint> {
    let ck = Checkpoint::load(path)?;
    if let Err(Error::Checkpoint(msg)) = ck.expect_scenario(cfg.structural_hash()) {
        return Err(Error::Config(format!(
            "checkpoint {} does not match the configured scenario: {msg}; \
             re-train or point --config at the scenario it was trained on",
            path.display()
        )));
    }
    if let Some(algo) = expect_algo {
        if ck.algo != algo {
            return Err(Error::Config(format!(
                "checkpoint {} holds a {} policy, but --algo {algo} was requested",
                path.display(),
                ck.algo
            )));
        }
    }
    Ok(ck)
}

fn policy_of<'a>(algo: Algo, nets: &'a [QNetParams]) -> EvalPolicy<'a> {
    match algo {
        Algo::Random => EvalPolicy::Random,
        Algo::Vdn => EvalPolicy::Vdn(&nets[0]),
        Algo::Marl => EvalPolicy::Marl(nets),
    }
}

/// The episode whose per-slot rates are kept, drawn from a dedicated stream
/// so it is independent of everything else the seed drives.
fn draw_trace_episode(seed: u64, episodes: u64) -> u64 {
    rng::stream(seed, tag::EVAL_TRACE).random_range(0..episodes)
}

/// Evaluate one policy over the sweep and write its trace files into `dir`.
/// Returns the rows plus the trace file names (one per payload point).
fn sweep_with_traces(
    cfg: &SimConfig,
    algo: Algo,
    nets: &[QNetParams],
    multiples: &[u64],
    episodes: u64,
    trace_episode: u64,
    dir: &Path,
) -> Result<(Vec<EvalPointResult>, Vec<String>)> {
    let rows = eval::evaluate_sweep(
        &cfg.scenario,
        cfg.training.tau,
        &policy_of(algo, nets),
        multiples,
        episodes,
        trace_episode,
    )?;
    let mut trace_files = Vec::with_capacity(rows.len());
    for row in &rows {
        let name = format!("trace_{algo}_m{}.jsonl", row.payload_multiple);
        artifacts::write_trace_jsonl(&dir.join(&name), &row.trace)?;
        trace_files.push(name);
    }
    Ok((rows, trace_files))
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let cfg = args.common.load_config()?;
    if args.episodes == 0 {
        return Err(Error::Config("--episodes must be at least 1".into()));
    }
    let started = Utc::now();

    let (algo, nets): (Algo, Vec<QNetParams>) = match (&args.checkpoint, args.algo) {
        (Some(path), expect) => {
            let ck = load_checkpoint(path, &cfg, expect)?;
            (ck.algo, ck.nets)
        }
        (None, Some(Algo::Random)) => (Algo::Random, Vec::new()),
        (None, Some(other)) => {
            return Err(Error::Config(format!(
                "evaluating {other} needs --checkpoint (only random runs without one)"
            )));
        }
        (None, None) => {
            return Err(Error::Config("pass --checkpoint, or --algo random".into()));
        }
    };

    let trace_episode = draw_trace_episode(cfg.scenario.rng_seed, args.episodes);
    let (rows, trace_files) = sweep_with_traces(
        &cfg,
        algo,
        &nets,
        &args.payload_multiples,
        args.episodes,
        trace_episode,
        &args.common.out_dir,
    )?;

    let mut metrics = String::from(artifacts::METRICS_HEADER);
    metrics.push_str(&artifacts::metrics_rows(&algo.to_string(), &rows, &trace_files));
    fs::write(args.common.out_dir.join("metrics.csv"), metrics)?;

    let manifest = RunManifest {
        command: "eval".into(),
        algo: algo.to_string(),
        seed: cfg.scenario.rng_seed,
        code_version: env!("CARGO_PKG_VERSION").into(),
        started_utc: started.to_rfc3339(),
        finished_utc: Utc::now().to_rfc3339(),
        trace_episode: Some(trace_episode),
        scenario_hash: format!("{:#018x}", cfg.structural_hash()),
        outputs: {
            let mut o = vec!["metrics.csv".to_string(), "manifest.json".to_string()];
            o.extend(trace_files);
            o
        },
        config: cfg,
    };
    manifest.write(&args.common.out_dir)?;
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let cfg = args.common.load_config()?;
    if args.episodes == 0 {
        return Err(Error::Config("--episodes must be at least 1".into()));
    }
    let started = Utc::now();
    let out_dir = &args.common.out_dir;

    // Learners: load if a checkpoint was given, train into a subdirectory
    // otherwise. Sub-runs write their own manifests.
    let mut learner_nets: Vec<(Algo, Vec<QNetParams>)> = Vec::new();
    for (algo, ckpt) in [(Algo::Vdn, &args.vdn_checkpoint), (Algo::Marl, &args.marl_checkpoint)] {
        let nets = match ckpt {
            Some(path) => load_checkpoint(path, &cfg, Some(algo))?.nets,
            None => {
                log::info!("no --{algo}-checkpoint given; training {algo} here");
                let sub = out_dir.join(algo.to_string());
                let sub_started = Utc::now();
                let (nets, mut outputs) = train_into(&cfg, algo, &sub)?;
                let manifest = RunManifest {
                    command: "train".into(),
                    algo: algo.to_string(),
                    seed: cfg.scenario.rng_seed,
                    code_version: env!("CARGO_PKG_VERSION").into(),
                    started_utc: sub_started.to_rfc3339(),
                    finished_utc: Utc::now().to_rfc3339(),
                    trace_episode: None,
                    scenario_hash: format!("{:#018x}", cfg.structural_hash()),
                    outputs: {
                        outputs.push("manifest.json".into());
                        outputs
                    },
                    config: cfg.clone(),
                };
                manifest.write(&sub)?;
                nets
            }
        };
        learner_nets.push((algo, nets));
    }

    // Same designated episode and the same per-episode channel draws for
    // every policy: the comparison is paired throughout.
    let trace_episode = draw_trace_episode(cfg.scenario.rng_seed, args.episodes);
    let mut metrics = String::from(artifacts::METRICS_HEADER);
    let mut outputs = vec!["compare.csv".to_string(), "manifest.json".to_string()];
    let no_nets: Vec<QNetParams> = Vec::new();

    let all: Vec<(Algo, &[QNetParams])> = learner_nets
        .iter()
        .map(|(a, n)| (*a, n.as_slice()))
        .chain([(Algo::Random, no_nets.as_slice())])
        .collect();
    for (algo, nets) in all {
        let (rows, trace_files) = sweep_with_traces(
            &cfg,
            algo,
            nets,
            &args.payload_multiples,
            args.episodes,
            trace_episode,
            out_dir,
        )?;
        metrics.push_str(&artifacts::metrics_rows(&algo.to_string(), &rows, &trace_files));
        outputs.extend(trace_files);
    }
    fs::write(out_dir.join("compare.csv"), metrics)?;

    let manifest = RunManifest {
        command: "compare".into(),
        algo: "vdn+marl+random".into(),
        seed: cfg.scenario.rng_seed,
        code_version: env!("CARGO_PKG_VERSION").into(),
        started_utc: started.to_rfc3339(),
        finished_utc: Utc::now().to_rfc3339(),
        trace_episode: Some(trace_episode),
        scenario_hash: format!("{:#018x}", cfg.structural_hash()),
        outputs,
        config: cfg,
    };
    manifest.write(out_dir)?;
    Ok(())
}
