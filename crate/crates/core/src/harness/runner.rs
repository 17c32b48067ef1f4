//! Episode execution, seed matrices and throughput measurement.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use netforge_kernels::{PolicyParams, WeightsArchive};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{render_table, EpisodeMetrics, MetricSummary, StepRecord};
use super::policy::{build_policy, Policy};
use crate::actions::{decode_action, Outcome, Registry};
use crate::bridge::{Bridge, HypervisorMode, Transcript};
use crate::error::{CoreError, Result};
use crate::rng::{stream, EPISODES};
use crate::scenario::ScenarioConfig;
use crate::sim::{DecisionReport, Simulator, StepReport};
use crate::state::{AgentId, Team};
use crate::telemetry::EncoderModel;
use crate::topology::Topology;

/// Everything shared by the episodes of one run.
#[derive(Clone)]
pub struct EpisodeEnv {
    pub scenario: ScenarioConfig,
    pub topology: Arc<Topology>,
    pub registry: Arc<Registry>,
    pub encoder: Option<Arc<EncoderModel>>,
    pub weights: Option<Arc<PolicyParams>>,
    pub transcript: Option<Arc<Transcript>>,
}

impl EpisodeEnv {
    /// Builds the topology and registry; no encoder, weights or transcript.
    pub fn new(scenario: ScenarioConfig) -> Result<Self> {
        scenario.validate()?;
        let registry = match &scenario.registry {
            Some(p) => Registry::load(p)?,
            None => Registry::default(),
        };
        Ok(EpisodeEnv {
            topology: Arc::new(scenario.build_topology()?),
            registry: Arc::new(registry),
            scenario,
            encoder: None,
            weights: None,
            transcript: None,
        })
    }

    /// Like [`EpisodeEnv::new`], also loading the encoder and transcript the
    /// scenario names.
    pub fn from_scenario(scenario: ScenarioConfig) -> Result<Self> {
        let mut env = Self::new(scenario)?;
        if let Some(p) = &env.scenario.encoder {
            env.encoder = Some(Arc::new(EncoderModel::load(p)?));
        }
        if env.scenario.mode == HypervisorMode::Replay {
            let p = env
                .scenario
                .transcript
                .clone()
                .ok_or_else(|| CoreError::Scenario("replay mode needs a transcript path".into()))?;
            env.transcript = Some(Arc::new(Transcript::load(&p)?));
        }
        Ok(env)
    }

    pub fn with_encoder(mut self, encoder: Arc<EncoderModel>) -> Self {
        self.encoder = Some(encoder);
        self
    }

    pub fn with_weights(mut self, weights: Arc<PolicyParams>) -> Self {
        self.weights = Some(weights);
        self
    }

    pub fn with_transcript(mut self, transcript: Arc<Transcript>) -> Self {
        self.scenario.mode = HypervisorMode::Replay;
        self.transcript = Some(transcript);
        self
    }

    fn bridge(&self, record: bool) -> Result<Option<Bridge>> {
        Ok(match self.scenario.mode {
            HypervisorMode::Sim if record => Some(Bridge::recording()),
            HypervisorMode::Sim => None,
            HypervisorMode::Replay => {
                let t = self
                    .transcript
                    .clone()
                    .ok_or_else(|| CoreError::Scenario("replay mode needs a transcript".into()))?;
                Some(Bridge::replay(t))
            }
            HypervisorMode::RealStub => Some(Bridge::RealStub),
        })
    }
}

pub fn load_weights(path: &Path) -> Result<PolicyParams> {
    let mut r = std::io::BufReader::new(File::open(path)?);
    let archive = WeightsArchive::read_from(&mut r)?;
    Ok(PolicyParams::from_archive(&archive)?)
}

/// Per-episode switches.
#[derive(Default)]
pub struct EpisodeOptions {
    pub episode: usize,
    /// Seed of the matrix row this episode belongs to.
    pub row_seed: u64,
    pub record_transcript: bool,
    pub trace: Option<Box<dyn Write + Send>>,
    pub max_steps: Option<u64>,
}

pub struct EpisodeOutcome {
    pub metrics: EpisodeMetrics,
    pub transcript: Option<Transcript>,
}

fn query(sim: &Simulator, agents: &[AgentId], policies: &mut [Box<dyn Policy>]) -> Result<Vec<(AgentId, Option<crate::actions::AgentAction>)>> {
    let mut out = Vec::with_capacity(agents.len());
    for (agent, policy) in agents.iter().zip(policies.iter_mut()) {
        let raw = policy.act(sim, *agent)?;
        let action = match raw {
            Some(pair) => Some(decode_action(pair).map_err(|e| sim.policy_error(*agent, e.to_string()))?),
            None => None,
        };
        out.push((*agent, action));
    }
    Ok(out)
}

/// Runs one episode to the horizon, calling `hook` after every step with the
/// step's report and the decisions that followed it.
pub fn run_episode_with(
    env: &EpisodeEnv,
    blue: &str,
    red: &str,
    seed: u64,
    opts: EpisodeOptions,
    mut hook: impl FnMut(&Simulator, &StepReport, &DecisionReport) -> Result<()>,
) -> Result<EpisodeOutcome> {
    let started = Instant::now();
    let mut sim = Simulator::new(
        &env.scenario,
        env.topology.clone(),
        env.registry.clone(),
        env.encoder.clone(),
        seed,
    )?;
    if let Some(b) = env.bridge(opts.record_transcript)? {
        sim = sim.with_bridge(b);
    }
    if let Some(t) = opts.trace {
        sim = sim.with_trace(t);
    }
    let agents = sim.agents();
    let mut policies = Vec::with_capacity(agents.len());
    for (slot, &agent) in agents.iter().enumerate() {
        let name = match agent.team {
            Team::Blue => blue,
            Team::Red => red,
        };
        policies.push(build_policy(name, &sim, agent, slot, seed, env.weights.as_ref())?);
    }

    let mut blue_total = 0.0;
    let mut red_total = 0.0;
    let first = query(&sim, &agents, &mut policies)?;
    sim.decide(&first)?;
    while let Some(report) = sim.advance()? {
        blue_total += report.blue.total;
        red_total += report.red.total;
        let decisions = query(&sim, &agents, &mut policies)?;
        let decided = sim.decide(&decisions)?;
        hook(&sim, &report, &decided)?;
        if opts.max_steps.is_some_and(|m| report.step >= m) {
            break;
        }
    }

    let wall = started.elapsed().as_secs_f64();
    let c = sim.counters().clone();
    let state = sim.state();
    let metrics = EpisodeMetrics {
        seed: opts.row_seed,
        episode: opts.episode,
        episode_seed: seed,
        blue_policy: blue.to_string(),
        red_policy: red.to_string(),
        steps: c.steps,
        sim_ticks: state.clock,
        blue_reward: blue_total,
        red_reward: red_total,
        services_restored: c.services_restored,
        cleanup_completions: c.cleanup_completions,
        false_positive_cleanups: c.false_positive_cleanups,
        successful_exploits: c.successful_exploits,
        dropped_blue_actions: c.dropped_blue,
        rejected_actions: c.rejected,
        nullified: c.nullified,
        aborted: c.aborted,
        honeytoken_trips: c.honeytoken_trips,
        compromised_final: state.compromised_count(),
        isolated_final: state.isolated_count(),
        clipped_fraction: if c.steps == 0 { 0.0 } else { c.clipped_steps as f64 / c.steps as f64 },
        max_active_blue: c.max_active_blue,
        wall_seconds: wall,
        sps: if wall > 0.0 { c.steps as f64 / wall } else { 0.0 },
    };
    let transcript = opts.record_transcript.then(|| {
        let mut t = Transcript::new(&env.scenario.name, seed);
        t.records = sim.take_transcript();
        t
    });
    Ok(EpisodeOutcome { metrics, transcript })
}

pub fn run_episode(env: &EpisodeEnv, blue: &str, red: &str, seed: u64) -> Result<EpisodeMetrics> {
    Ok(run_episode_with(env, blue, red, seed, EpisodeOptions::default(), |_, _, _| Ok(()))?.metrics)
}

pub fn step_record(seed: u64, episode: usize, report: &StepReport, decided: &DecisionReport) -> StepRecord {
    let count = |o: Outcome| report.completed.iter().filter(|c| c.outcome == o).count();
    StepRecord {
        seed,
        episode,
        step: report.step,
        tick: report.jump.t_next,
        dt_norm: report.jump.dt_norm,
        blue: report.blue,
        red: report.red,
        completed: count(Outcome::Success) + count(Outcome::Failure),
        nullified: count(Outcome::Nullified),
        aborted: count(Outcome::Aborted),
        logs: report.logs,
        enqueued: decided.enqueued.len(),
        rejected: decided.rejected.len(),
        dropped_blue: decided.dropped_blue.len(),
    }
}

/// Episode seeds of one matrix row, drawn from the row seed's episode stream.
pub fn episode_seeds(row_seed: u64, episodes: usize) -> Vec<u64> {
    let mut rng = stream(row_seed, EPISODES);
    (0..episodes).map(|_| rng.random()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub seed: u64,
    pub episodes: Vec<EpisodeMetrics>,
    pub summary: Option<MetricSummary>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixResult {
    pub blue: String,
    pub red: String,
    pub rows: Vec<SeedRow>,
    pub aggregate: Option<MetricSummary>,
}

impl MatrixResult {
    pub fn table(&self) -> String {
        let mut rows: Vec<(String, Option<&MetricSummary>)> = self
            .rows
            .iter()
            .map(|r| (r.seed.to_string(), r.summary.as_ref()))
            .collect();
        rows.push(("median".into(), self.aggregate.as_ref()));
        render_table(&rows)
    }

    pub fn failed(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}

fn run_row(env: &EpisodeEnv, blue: &str, red: &str, row_seed: u64, episodes: usize, steps: Option<&mut Vec<StepRecord>>) -> SeedRow {
    let mut done = Vec::with_capacity(episodes);
    let mut step_log = steps;
    for (k, ep_seed) in episode_seeds(row_seed, episodes).into_iter().enumerate() {
        let opts = EpisodeOptions {
            episode: k,
            row_seed,
            ..Default::default()
        };
        let result = run_episode_with(env, blue, red, ep_seed, opts, |_, report, decided| {
            if let Some(log) = step_log.as_deref_mut() {
                log.push(step_record(row_seed, k, report, decided));
            }
            Ok(())
        });
        match result {
            Ok(o) => done.push(o.metrics),
            Err(e) => {
                return SeedRow {
                    seed: row_seed,
                    episodes: done,
                    summary: None,
                    error: Some(format!("episode {k}: {e}")),
                }
            }
        }
    }
    SeedRow {
        seed: row_seed,
        summary: Some(MetricSummary::from_episodes(&done)),
        episodes: done,
        error: None,
    }
}

/// One row per seed, computed on up to `workers` threads. A failing seed is
/// reported in its row and does not stop the others.
pub fn run_matrix(
    env: &EpisodeEnv,
    blue: &str,
    red: &str,
    seeds: &[u64],
    episodes: usize,
    workers: usize,
) -> MatrixResult {
    run_matrix_logged(env, blue, red, seeds, episodes, workers, false).0
}

/// [`run_matrix`] that can also collect per-step records for every episode.
pub fn run_matrix_logged(
    env: &EpisodeEnv,
    blue: &str,
    red: &str,
    seeds: &[u64],
    episodes: usize,
    workers: usize,
    log_steps: bool,
) -> (MatrixResult, Vec<StepRecord>) {
    let workers = workers.max(1).min(seeds.len().max(1));
    let mut slots: Vec<Option<(SeedRow, Vec<StepRecord>)>> = vec![None; seeds.len()];
    std::thread::scope(|scope| {
        for (w, chunk) in slots.chunks_mut(seeds.len().div_ceil(workers).max(1)).enumerate() {
            let base = w * seeds.len().div_ceil(workers).max(1);
            scope.spawn(move || {
                for (k, slot) in chunk.iter_mut().enumerate() {
                    let mut steps = Vec::new();
                    let row = run_row(env, blue, red, seeds[base + k], episodes, log_steps.then_some(&mut steps));
                    *slot = Some((row, steps));
                }
            });
        }
    });
    let mut rows = Vec::with_capacity(seeds.len());
    let mut steps = Vec::new();
    for (row, s) in slots.into_iter().flatten() {
        rows.push(row);
        steps.extend(s);
    }
    let summaries: Vec<MetricSummary> = rows.iter().filter_map(|r| r.summary.clone()).collect();
    let aggregate = (!summaries.is_empty()).then(|| MetricSummary::across(&summaries));
    (
        MatrixResult {
            blue: blue.to_string(),
            red: red.to_string(),
            rows,
            aggregate,
        },
        steps,
    )
}

/// Writes `steps.jsonl`, `episodes.jsonl` and `summary.txt` under `dir`.
pub fn write_outputs(dir: &Path, result: &MatrixResult, steps: &[StepRecord]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(File::create(dir.join("steps.jsonl"))?);
    for s in steps {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    let mut w = BufWriter::new(File::create(dir.join("episodes.jsonl"))?);
    for row in &result.rows {
        for m in &row.episodes {
            serde_json::to_writer(&mut w, m)?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    let mut table = result.table();
    for row in &result.rows {
        if let Some(e) = &row.error {
            table.push_str(&format!("seed {} failed: {e}\n", row.seed));
        }
    }
    fs::write(dir.join("summary.txt"), table)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpsReport {
    pub steps: u64,
    pub episodes: u64,
    pub seconds: f64,
    pub sps: f64,
}

/// Runs back-to-back episodes until `duration` of wall time has elapsed
/// and reports environment steps per second.
pub fn measure_sps(env: &EpisodeEnv, blue: &str, red: &str, duration: Duration, seed: u64) -> Result<SpsReport> {
    if duration.is_zero() {
        return Err(CoreError::InvalidArgument("benchmark duration must be positive".into()));
    }
    let mut rng = stream(seed, EPISODES);
    let started = Instant::now();
    let mut steps = 0;
    let mut episodes = 0;
    loop {
        let m = run_episode(env, blue, red, rng.random())?;
        steps += m.steps;
        episodes += 1;
        if started.elapsed() >= duration {
            break;
        }
    }
    let seconds = started.elapsed().as_secs_f64();
    Ok(SpsReport {
        steps,
        episodes,
        seconds,
        sps: steps as f64 / seconds,
    })
}

/// Records one Sim episode through the recording bridge.
pub fn record_transcript(env: &EpisodeEnv, blue: &str, red: &str, seed: u64) -> Result<(EpisodeMetrics, Transcript)> {
    let mut env = env.clone();
    env.scenario.mode = HypervisorMode::Sim;
    let opts = EpisodeOptions {
        record_transcript: true,
        ..Default::default()
    };
    let out = run_episode_with(&env, blue, red, seed, opts, |_, _, _| Ok(()))?;
    Ok((out.metrics, out.transcript.unwrap_or_else(|| Transcript::new(&env.scenario.name, seed))))
}
