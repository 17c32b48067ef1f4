//! Execution backends behind a single dispatch point: the in-process mock,
//! transcript replay, and a real-executor stub that only describes commands.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actions::{apply_effect, ActionSpec, AgentAction, Outcome, Rejection, Rules, StateDelta};
use crate::engine::ScheduledEvent;
use crate::error::{CoreError, Result};
use crate::state::{AgentId, Team, WorldState};
use crate::telemetry::{synthesize_log, LogRecord, Origin};
use crate::topology::{Node, NodeId};

pub const TRANSCRIPT_FORMAT: &str = "netforge-transcript";
pub const TRANSCRIPT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypervisorMode {
    #[default]
    Sim,
    Replay,
    RealStub,
}

impl std::str::FromStr for HypervisorMode {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sim" => Ok(HypervisorMode::Sim),
            "replay" => Ok(HypervisorMode::Replay),
            "real_stub" | "real-stub" => Ok(HypervisorMode::RealStub),
            other => Err(CoreError::InvalidArgument(format!("unknown mode `{other}`"))),
        }
    }
}

/// One executed transition as seen by an external executor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub actor: AgentId,
    pub action: AgentAction,
    /// Host the raw log is attributed to.
    pub log_node: Option<NodeId>,
    pub delta: StateDelta,
    pub raw_log: String,
    pub wall_duration: f64,
    pub exit_status: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptHeader {
    pub format: String,
    pub version: u32,
    pub scenario: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transcript {
    pub header: TranscriptHeader,
    pub records: Vec<TransitionRecord>,
}

impl Transcript {
    pub fn new(scenario: &str, seed: u64) -> Self {
        Transcript {
            header: TranscriptHeader {
                format: TRANSCRIPT_FORMAT.into(),
                version: TRANSCRIPT_VERSION,
                scenario: scenario.into(),
                seed,
            },
            records: Vec::new(),
        }
    }

    /// JSONL: a header line followed by one record per line.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        serde_json::to_writer(&mut *w, &self.header)?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut *w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines
            .next()
            .ok_or_else(|| CoreError::Transcript("empty file, missing header".into()))??;
        let header: TranscriptHeader = serde_json::from_str(&first)?;
        if header.format != TRANSCRIPT_FORMAT || header.version != TRANSCRIPT_VERSION {
            return Err(CoreError::Transcript(format!(
                "unsupported header {}/{}",
                header.format, header.version
            )));
        }
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = serde_json::from_str(&line)
                .map_err(|e| CoreError::Transcript(format!("record {i}: {e}")))?;
            records.push(rec);
        }
        Ok(Transcript { header, records })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

/// What a real executor would be asked to run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandDescriptor {
    pub action: String,
    pub mitre: String,
    pub cve: Option<String>,
    pub script: String,
    pub target: String,
}

fn cve_for(name: &str) -> Option<&'static str> {
    match name {
        "ExploitEternalBlue" => Some("CVE-2017-0144"),
        "ExploitBlueKeep" => Some("CVE-2019-0708"),
        "ExploitApacheRFI" => Some("CVE-2021-41773"),
        "ExploitLog4Shell" => Some("CVE-2021-44228"),
        "ExploitProxyLogon" => Some("CVE-2021-26855"),
        _ => None,
    }
}

pub fn command_descriptor(spec: &ActionSpec, node: Option<&Node>) -> CommandDescriptor {
    let cve = cve_for(&spec.name).map(str::to_string);
    let script = match &cve {
        Some(c) => format!("exploits/{}.sh", c.to_lowercase()),
        None => format!("playbooks/{}.sh", spec.effect.as_str()),
    };
    CommandDescriptor {
        action: spec.name.clone(),
        mitre: spec.mitre.clone(),
        cve,
        script,
        target: match node {
            Some(n) => format!("<target:{}>", n.address),
            None => "<target:*>".into(),
        },
    }
}

/// Per-dispatch inputs shared by all backends.
pub struct DispatchContext<'a> {
    pub state: &'a WorldState,
    pub spec: &'a ActionSpec,
    pub rules: Rules,
    pub tick: f64,
    pub rng: &'a mut ChaCha8Rng,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionResult {
    pub outcome: Outcome,
    pub delta: StateDelta,
    pub logs: Vec<LogRecord>,
    pub failure: Option<Rejection>,
}

fn origin_of(team: Team) -> Origin {
    match team {
        Team::Red => Origin::Red,
        Team::Blue => Origin::Blue,
    }
}

/// In-process execution: the same effect function and log synthesis the
/// simulator uses directly.
pub fn mock_execute(ctx: &mut DispatchContext<'_>, event: &ScheduledEvent) -> TransitionResult {
    let target = event.target.unwrap_or(event.action.target as usize);
    let effect = apply_effect(ctx.state, ctx.spec, event.actor, target, ctx.rules);
    let topo = &ctx.state.topology;
    let logs = effect
        .logs
        .iter()
        .map(|d| synthesize_log(d, ctx.tick, topo, ctx.rng))
        .collect();
    TransitionResult {
        outcome: effect.outcome,
        delta: effect.delta,
        logs,
        failure: effect.failure,
    }
}

/// Container runtime chatter a real executor leaves around the event log.
/// Most of it never appears in the simulator's own telemetry.
fn container_noise<R: Rng + ?Sized>(rng: &mut R, node: Option<&Node>) -> String {
    let cid: u64 = rng.random();
    let addr = node.map(|n| n.address.to_string()).unwrap_or_else(|| "0.0.0.0".into());
    format!(
        "[runc:{cid:016x}] execve → /opt/payload ⟂ ttyS{} qz{:04x}vq@{addr} ✓",
        rng.random_range(0..4),
        rng.random::<u16>()
    )
}

/// Converts a mock transition into a transcript record. The returned log is
/// the single merged record both the recording run and its replay observe.
pub fn record_transition(
    ctx: &mut DispatchContext<'_>,
    event: &ScheduledEvent,
    result: &TransitionResult,
) -> (TransitionRecord, Vec<LogRecord>) {
    let topo = &ctx.state.topology;
    let log_node = result.logs.first().map(|l| l.node).or(event.target);
    let mut raw = result
        .logs
        .iter()
        .map(|l| l.xml_text.as_str())
        .collect::<Vec<_>>()
        .join("\n");
    if !raw.is_empty() {
        raw.push('\n');
    }
    raw.push_str(&container_noise(ctx.rng, log_node.map(|n| &topo.nodes[n])));
    let rec = TransitionRecord {
        actor: event.actor,
        action: event.action,
        log_node,
        delta: result.delta.clone(),
        raw_log: raw,
        wall_duration: event.completion_tick - event.start_tick,
        exit_status: if result.outcome == Outcome::Success { 0 } else { 1 },
    };
    let logs = replay_logs(&rec, ctx.state, ctx.tick);
    (rec, logs)
}

fn parse_event_id(raw: &str) -> u32 {
    raw.split_once("<EventID>")
        .and_then(|(_, rest)| rest.split_once("</EventID>"))
        .and_then(|(id, _)| id.trim().parse().ok())
        .unwrap_or(0)
}

fn replay_logs(rec: &TransitionRecord, state: &WorldState, tick: f64) -> Vec<LogRecord> {
    match rec.log_node {
        Some(node) if node < state.node_count() => vec![LogRecord {
            tick,
            node,
            zone: state.zone_of(node),
            event_id: parse_event_id(&rec.raw_log),
            xml_text: rec.raw_log.clone(),
            origin: origin_of(rec.actor.team),
        }],
        _ => Vec::new(),
    }
}

/// Returns the transcript record at `cursor` after checking it belongs to
/// `event`.
pub fn replay_execute<'t>(transcript: &'t Transcript, cursor: usize, event: &ScheduledEvent) -> Result<&'t TransitionRecord> {
    let rec = transcript
        .records
        .get(cursor)
        .ok_or(CoreError::ReplayExhausted(transcript.records.len()))?;
    if rec.actor != event.actor || rec.action != event.action {
        return Err(CoreError::ReplayDivergence {
            cursor,
            expected: format!("{} {:?}", rec.actor, rec.action),
            got: format!("{} {:?}", event.actor, event.action),
        });
    }
    Ok(rec)
}

#[derive(Clone, Debug)]
pub enum Bridge {
    Sim { recorder: Option<Vec<TransitionRecord>> },
    Replay { transcript: Arc<Transcript>, cursor: usize },
    RealStub,
}

impl Bridge {
    pub fn sim() -> Self {
        Bridge::Sim { recorder: None }
    }

    pub fn recording() -> Self {
        Bridge::Sim {
            recorder: Some(Vec::new()),
        }
    }

    pub fn replay(transcript: Arc<Transcript>) -> Self {
        Bridge::Replay { transcript, cursor: 0 }
    }

    pub fn mode(&self) -> HypervisorMode {
        match self {
            Bridge::Sim { .. } => HypervisorMode::Sim,
            Bridge::Replay { .. } => HypervisorMode::Replay,
            Bridge::RealStub => HypervisorMode::RealStub,
        }
    }

    pub fn dispatch(&mut self, ctx: &mut DispatchContext<'_>, event: &ScheduledEvent) -> Result<TransitionResult> {
        match self {
            Bridge::Sim { recorder: None } => Ok(mock_execute(ctx, event)),
            Bridge::Sim { recorder: Some(out) } => {
                let mut result = mock_execute(ctx, event);
                let (rec, logs) = record_transition(ctx, event, &result);
                out.push(rec);
                result.logs = logs;
                Ok(result)
            }
            Bridge::Replay { transcript, cursor } => {
                let rec = replay_execute(transcript, *cursor, event)?;
                *cursor += 1;
                Ok(TransitionResult {
                    outcome: if rec.exit_status == 0 { Outcome::Success } else { Outcome::Failure },
                    delta: rec.delta.clone(),
                    logs: replay_logs(rec, ctx.state, ctx.tick),
                    failure: None,
                })
            }
            Bridge::RealStub => {
                let node = event.target.map(|n| &ctx.state.topology.nodes[n]);
                let cmd = command_descriptor(ctx.spec, node);
                Err(CoreError::RealNotImplemented(serde_json::to_string(&cmd)?))
            }
        }
    }

    pub fn take_records(&mut self) -> Vec<TransitionRecord> {
        match self {
            Bridge::Sim { recorder: Some(out) } => std::mem::take(out),
            _ => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::Registry;
    use crate::topology::benchmark_topology;

    #[test]
    fn cve_mapping() {
        let r = Registry::default();
        let topo = benchmark_topology(10).unwrap();
        let eb = command_descriptor(r.by_name("ExploitEternalBlue").unwrap(), Some(&topo.nodes[3]));
        assert_eq!(eb.cve.as_deref(), Some("CVE-2017-0144"));
        assert_eq!(eb.target, format!("<target:{}>", topo.nodes[3].address));
        let bk = command_descriptor(r.by_name("ExploitBlueKeep").unwrap(), None);
        assert_eq!(bk.cve.as_deref(), Some("CVE-2019-0708"));
        let rfi = command_descriptor(r.by_name("ExploitApacheRFI").unwrap(), None);
        assert_eq!(rfi.cve.as_deref(), Some("CVE-2021-41773"));
        assert!(command_descriptor(r.by_name("IsolateHost").unwrap(), None).cve.is_none());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("replay".parse::<HypervisorMode>().unwrap(), HypervisorMode::Replay);
        assert_eq!("real-stub".parse::<HypervisorMode>().unwrap(), HypervisorMode::RealStub);
        assert!("docker".parse::<HypervisorMode>().is_err());
    }

    #[test]
    fn event_id_parsing() {
        assert_eq!(parse_event_id("<Event>\n<System>\n<EventID>4625</EventID>"), 4625);
        assert_eq!(parse_event_id("garbage"), 0);
    }

    #[test]
    fn transcript_rejects_missing_header() {
        assert!(Transcript::read_from(&b""[..]).is_err());
        assert!(Transcript::read_from(&b"{\"format\":\"x\",\"version\":1,\"scenario\":\"s\",\"seed\":0}\n"[..]).is_err());
    }
}
