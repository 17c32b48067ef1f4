use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use netforge_core::bridge::HypervisorMode;
use netforge_core::harness::{
    episode_seeds, load_weights, measure_sps, record_transcript, run_episode_with, run_matrix_logged, step_record,
    write_outputs, EpisodeEnv, EpisodeOptions, MatrixResult, MetricSummary, SeedRow, POLICY_NAMES,
};
use netforge_core::rng::{stream, CORPUS};
use netforge_core::telemetry::{generate_seed_corpus, EncoderModel, DEFAULT_CORPUS_SIZE};
use netforge_core::ScenarioConfig;

#[derive(Parser)]
#[command(name = "netforge", version, about = "Continuous-time cyber range simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run episodes for one seed and write step, episode and summary files.
    Run(RunArgs),
    /// Sweep consecutive seeds and aggregate medians over the last 20% of episodes.
    Matrix(MatrixArgs),
    /// Measure single-threaded Sim-mode steps per second.
    BenchSps(BenchArgs),
    /// Generate the seed corpus and fit the telemetry encoder.
    FitEncoder(FitArgs),
    /// Record one Sim episode as a replayable transcript.
    RecordTranscript(RecordArgs),
}

#[derive(Args)]
struct EnvArgs {
    /// Scenario TOML; the 100-node benchmark when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Encoder model file; overrides the scenario's `encoder`.
    #[arg(long)]
    encoder: Option<PathBuf>,
    /// Policy weights archive for `ctgmarl`.
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Args)]
struct PolicyArgs {
    #[arg(long, default_value = "random")]
    blue: String,
    #[arg(long, default_value = "random")]
    red: String,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[command(flatten)]
    policies: PolicyArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    episodes: usize,
    /// `sim` or `replay`.
    #[arg(long)]
    mode: Option<HypervisorMode>,
    /// Transcript to replay; overrides the scenario's `transcript`.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Also write one event trace per episode (`trace-<k>.jsonl`).
    #[arg(long)]
    trace: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MatrixArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[command(flatten)]
    policies: PolicyArgs,
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    #[arg(long, default_value_t = 5)]
    episodes: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Skip `steps.jsonl`.
    #[arg(long)]
    no_steps: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[command(flatten)]
    policies: PolicyArgs,
    #[arg(long, default_value_t = 60.0)]
    seconds: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_CORPUS_SIZE)]
    corpus_size: usize,
    /// Seed of the corpus stream.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    fit_seed: u64,
    /// Optional JSONL export of the corpus.
    #[arg(long)]
    corpus_out: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RecordArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[command(flatten)]
    policies: PolicyArgs,
    /// Row seed; the first episode seed of this row is recorded, matching `run --seed`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn load_scenario(path: Option<&Path>) -> Result<ScenarioConfig> {
    match path {
        Some(p) => ScenarioConfig::load(p).with_context(|| format!("loading scenario {}", p.display())),
        None => Ok(ScenarioConfig::default()),
    }
}

fn check_policies(p: &PolicyArgs) -> Result<()> {
    for name in [&p.blue, &p.red] {
        if !POLICY_NAMES.contains(&name.as_str()) {
            bail!("unknown policy `{name}`; expected one of {}", POLICY_NAMES.join(", "));
        }
    }
    Ok(())
}

fn build_env(mut cfg: ScenarioConfig, args: &EnvArgs) -> Result<EpisodeEnv> {
    if let Some(e) = &args.encoder {
        cfg.encoder = Some(e.clone());
    }
    let mut env = EpisodeEnv::from_scenario(cfg)?;
    if let Some(w) = &args.weights {
        let params = load_weights(w).with_context(|| format!("loading weights {}", w.display()))?;
        env = env.with_weights(Arc::new(params));
    }
    Ok(env)
}

fn finish(out: &Path, result: &MatrixResult) {
    print!("{}", result.table());
    for row in &result.rows {
        if let Some(e) = &row.error {
            eprintln!("seed {} failed: {e}", row.seed);
        }
    }
    eprintln!("wrote {}", out.display());
}

fn run(args: RunArgs) -> Result<()> {
    check_policies(&args.policies)?;
    let mut cfg = load_scenario(args.env.scenario.as_deref())?;
    if let Some(m) = args.mode {
        cfg.mode = m;
    }
    if let Some(t) = &args.transcript {
        cfg.transcript = Some(t.clone());
    }
    if cfg.mode == HypervisorMode::RealStub {
        bail!("the real executor is a stub; use --mode sim or --mode replay");
    }
    let env = build_env(cfg, &args.env)?;
    fs::create_dir_all(&args.out)?;
    let (blue, red) = (&args.policies.blue, &args.policies.red);
    let mut episodes = Vec::with_capacity(args.episodes);
    let mut steps = Vec::new();
    let mut error = None;
    for (k, ep_seed) in episode_seeds(args.seed, args.episodes).into_iter().enumerate() {
        let trace: Option<Box<dyn Write + Send>> = if args.trace {
            let f = File::create(args.out.join(format!("trace-{k}.jsonl")))?;
            Some(Box::new(BufWriter::new(f)))
        } else {
            None
        };
        let opts = EpisodeOptions {
            episode: k,
            row_seed: args.seed,
            trace,
            ..Default::default()
        };
        let res = run_episode_with(&env, blue, red, ep_seed, opts, |_, rep, dec| {
            steps.push(step_record(args.seed, k, rep, dec));
            Ok(())
        });
        match res {
            Ok(o) => episodes.push(o.metrics),
            Err(e) => {
                error = Some(format!("episode {k}: {e}"));
                break;
            }
        }
    }
    let summary = (error.is_none() && !episodes.is_empty()).then(|| MetricSummary::from_episodes(&episodes));
    let result = MatrixResult {
        blue: blue.clone(),
        red: red.clone(),
        aggregate: summary.as_ref().map(|s| MetricSummary::across(std::slice::from_ref(s))),
        rows: vec![SeedRow {
            seed: args.seed,
            episodes,
            summary,
            error: error.clone(),
        }],
    };
    write_outputs(&args.out, &result, &steps)?;
    finish(&args.out, &result);
    if let Some(e) = error {
        bail!("seed {} failed: {e}", args.seed);
    }
    Ok(())
}

fn matrix(args: MatrixArgs) -> Result<()> {
    check_policies(&args.policies)?;
    if args.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let env = build_env(load_scenario(args.env.scenario.as_deref())?, &args.env)?;
    let seeds: Vec<u64> = (args.first_seed..args.first_seed + args.seeds).collect();
    let (result, steps) = run_matrix_logged(
        &env,
        &args.policies.blue,
        &args.policies.red,
        &seeds,
        args.episodes,
        args.workers,
        !args.no_steps,
    );
    write_outputs(&args.out, &result, &steps)?;
    finish(&args.out, &result);
    if result.failed() == seeds.len() {
        bail!("every seed failed");
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    check_policies(&args.policies)?;
    let mut cfg = load_scenario(args.env.scenario.as_deref())?;
    cfg.mode = HypervisorMode::Sim;
    let env = build_env(cfg, &args.env)?;
    if !(args.seconds >= 0.0 && args.seconds.is_finite()) {
        bail!("--seconds must be a finite non-negative number");
    }
    let rep = measure_sps(
        &env,
        &args.policies.blue,
        &args.policies.red,
        Duration::from_secs_f64(args.seconds),
        args.seed,
    )?;
    println!(
        "{:.0} steps/s ({} steps, {} episodes, {:.2} s, {} nodes, encoder {})",
        rep.sps,
        rep.steps,
        rep.episodes,
        rep.seconds,
        env.topology.node_count(),
        if env.encoder.is_some() { "on" } else { "off" }
    );
    Ok(())
}

fn fit(args: FitArgs) -> Result<()> {
    let cfg = load_scenario(args.scenario.as_deref())?;
    let topo = cfg.build_topology()?;
    let corpus = generate_seed_corpus(&topo, args.corpus_size, &mut stream(args.seed, CORPUS))?;
    if let Some(path) = &args.corpus_out {
        let mut w = BufWriter::new(File::create(path)?);
        for rec in &corpus {
            serde_json::to_writer(&mut w, rec)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    let model = EncoderModel::fit(&corpus, args.fit_seed)?;
    model.save(&args.out)?;
    println!(
        "fitted {} records: {} n-gram rows, dimension {}, wrote {}",
        corpus.len(),
        model.vocab_len(),
        model.dim(),
        args.out.display()
    );
    Ok(())
}

fn record(args: RecordArgs) -> Result<()> {
    check_policies(&args.policies)?;
    let mut cfg = load_scenario(args.env.scenario.as_deref())?;
    cfg.mode = HypervisorMode::Sim;
    let env = build_env(cfg, &args.env)?;
    let ep_seed = episode_seeds(args.seed, 1)[0];
    let (metrics, transcript) = record_transcript(&env, &args.policies.blue, &args.policies.red, ep_seed)?;
    transcript.save(&args.out)?;
    println!(
        "recorded {} transitions over {} steps to {}",
        transcript.records.len(),
        metrics.steps,
        args.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let res = match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::Matrix(a) => matrix(a),
        Command::BenchSps(a) => bench(a),
        Command::FitEncoder(a) => fit(a),
        Command::RecordTranscript(a) => record(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
