//! The episode loop: decisions, time jumps, effects, telemetry, rewards.

use std::collections::HashSet;
use std::io::Write;
use std::sync::Arc;

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::actions::{
    validate_action, ActionSpec, AgentAction, EffectKind, Outcome, Rejection, Registry, Rules, StateDelta,
};
use crate::bridge::{mock_execute, Bridge, DispatchContext, TransitionRecord, TransitionResult};
use crate::engine::{
    enforce_blue_cap, resolve_conflicts, sample_sojourn, CompletedEvent, EventQueue, EventStatus, ScheduledEvent,
    TimeJump,
};
use crate::error::{CoreError, Result};
use crate::reward::{blue_reward, red_reward, BlueReward, RedReward, RewardWeights};
use crate::rng::{stream, GREEN, SOJOURN, SYSTEM_LOGS, TEMPLATES};
use crate::scenario::ScenarioConfig;
use crate::state::{AgentId, Compromise, Team, WorldState};
use crate::telemetry::{
    green_noise, synthesize_log, Embedding128, EncoderModel, LogDraft, LogRecord, ObservationWindow, Origin,
    TemplateKey, WordCache,
};
use crate::topology::{NodeId, Topology};

/// Episode-level tallies.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Counters {
    pub steps: u64,
    pub clipped_steps: u64,
    pub enqueued: u64,
    pub rejected: u64,
    pub dropped_blue: u64,
    pub nullified: u64,
    pub aborted: u64,
    pub max_active_blue: usize,
    pub red_logs: u64,
    pub blue_logs: u64,
    pub green_logs: u64,
    pub system_logs: u64,
    pub oov_logs: u64,
    pub successful_exploits: u64,
    pub services_restored: u64,
    pub cleanup_completions: u64,
    pub false_positive_cleanups: u64,
    pub honeytoken_trips: u64,
    pub blue_energy_spent: f64,
    pub red_energy_spent: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DecisionReport {
    pub enqueued: Vec<u64>,
    pub rejected: Vec<(AgentId, AgentAction, Rejection)>,
    pub dropped_blue: Vec<(AgentId, AgentAction)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub step: u64,
    pub jump: TimeJump,
    pub completed: Vec<CompletedEvent>,
    pub blue: BlueReward,
    pub red: RedReward,
    pub logs: usize,
}

pub struct Simulator {
    cfg: ScenarioConfig,
    registry: Arc<Registry>,
    rules: Rules,
    weights: RewardWeights,
    state: WorldState,
    queue: EventQueue,
    sojourn_rng: ChaCha8Rng,
    green_rng: ChaCha8Rng,
    dispatch_rng: ChaCha8Rng,
    system_rng: ChaCha8Rng,
    encoder: Option<WordCache>,
    zone_windows: Vec<ObservationWindow>,
    node_windows: Vec<ObservationWindow>,
    node_log_counts: Vec<u64>,
    heartbeats: u64,
    bridge: Option<Bridge>,
    trace: Option<Box<dyn Write + Send>>,
    kept_logs: Option<Vec<LogRecord>>,
    counters: Counters,
    last_jump: TimeJump,
    done: bool,
}

struct BlueRequest {
    agent: AgentId,
    action: AgentAction,
    origin: Option<NodeId>,
}

impl Simulator {
    pub fn new(
        cfg: &ScenarioConfig,
        topology: Arc<Topology>,
        registry: Arc<Registry>,
        encoder: Option<Arc<EncoderModel>>,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let n = topology.node_count();
        let zones = topology.zones.len();
        let state = WorldState::new(topology, cfg.red_agents, cfg.blue_agents, cfg.energy_budget);
        Ok(Simulator {
            cfg: cfg.clone(),
            registry,
            rules: Rules {
                honeytokens: cfg.honeytokens,
            },
            weights: RewardWeights::default(),
            state,
            queue: EventQueue::new(),
            sojourn_rng: stream(seed, SOJOURN),
            green_rng: stream(seed, GREEN),
            dispatch_rng: stream(seed, TEMPLATES),
            system_rng: stream(seed, SYSTEM_LOGS),
            encoder: encoder.map(WordCache::new),
            zone_windows: vec![ObservationWindow::default(); zones],
            node_windows: vec![ObservationWindow::default(); n],
            node_log_counts: vec![0; n],
            heartbeats: 0,
            bridge: None,
            trace: None,
            kept_logs: None,
            counters: Counters::default(),
            last_jump: TimeJump::new(0.0, 0.0),
            done: false,
        })
    }

    /// Routes every matured event through `bridge` instead of calling the
    /// effect function directly.
    pub fn with_bridge(mut self, bridge: Bridge) -> Self {
        self.bridge = Some(bridge);
        self
    }

    pub fn with_trace(mut self, sink: Box<dyn Write + Send>) -> Self {
        self.trace = Some(sink);
        self
    }

    /// Retain every emitted log record for inspection.
    pub fn keep_logs(mut self) -> Self {
        self.kept_logs = Some(Vec::new());
        self
    }

    pub fn take_logs(&mut self) -> Vec<LogRecord> {
        self.kept_logs.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn take_transcript(&mut self) -> Vec<TransitionRecord> {
        self.bridge.as_mut().map(Bridge::take_records).unwrap_or_default()
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    /// Direct state access for scenario setup before the first step.
    pub fn state_mut(&mut self) -> &mut WorldState {
        &mut self.state
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.state.topology
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn rules(&self) -> Rules {
        self.rules
    }

    pub fn queue(&self) -> &EventQueue {
        &self.queue
    }

    pub fn clock(&self) -> f64 {
        self.state.clock
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    pub fn last_jump(&self) -> TimeJump {
        self.last_jump
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn has_encoder(&self) -> bool {
        self.encoder.is_some()
    }

    /// Red agents first, then Blue, each by index.
    pub fn agents(&self) -> Vec<AgentId> {
        (0..self.cfg.red_agents)
            .map(AgentId::red)
            .chain((0..self.cfg.blue_agents).map(AgentId::blue))
            .collect()
    }

    /// Zone index a Blue agent watches; agents are dealt round-robin over
    /// the declared zones.
    pub fn agent_zone(&self, agent: AgentId) -> usize {
        agent.index % self.zone_windows.len().max(1)
    }

    pub fn zone_observation(&self, zone_index: usize) -> Embedding128 {
        self.zone_windows[zone_index].build_observation()
    }

    pub fn zone_window(&self, zone_index: usize) -> &ObservationWindow {
        &self.zone_windows[zone_index]
    }

    pub fn node_window(&self, node: NodeId) -> &ObservationWindow {
        &self.node_windows[node]
    }

    /// Records observed on `node` so far this episode.
    pub fn node_log_count(&self, node: NodeId) -> u64 {
        self.node_log_counts[node]
    }

    pub fn mask(&self) -> Array2<f64> {
        self.state.topology_mask()
    }

    /// Validates and enqueues one round of decisions. Red actions are
    /// handled in the order given; Blue actions then compete for the cap.
    pub fn decide(&mut self, actions: &[(AgentId, Option<AgentAction>)]) -> Result<DecisionReport> {
        let mut report = DecisionReport::default();
        let mut blue = Vec::new();
        let ordered = actions
            .iter()
            .filter(|(a, _)| a.team == Team::Red)
            .chain(actions.iter().filter(|(a, _)| a.team == Team::Blue));
        for &(agent, action) in ordered {
            let Some(action) = action else { continue };
            let Some(spec) = self.registry.get(action.type_id) else {
                self.reject(&mut report, agent, action, None, Rejection::InvalidTarget);
                continue;
            };
            if spec.effect == EffectKind::NoOp {
                continue;
            }
            match validate_action(&self.state, spec, agent, action, self.rules) {
                Ok(ap) if agent.team == Team::Red => {
                    let seq = self.enqueue(agent, action, ap.origin);
                    report.enqueued.push(seq);
                }
                Ok(ap) => blue.push(BlueRequest {
                    agent,
                    action,
                    origin: ap.origin,
                }),
                Err(reason) => {
                    let kind = spec.effect;
                    self.reject(&mut report, agent, action, Some(kind), reason);
                }
            }
        }
        let (accepted, dropped) = enforce_blue_cap(self.queue.active_blue(), self.cfg.blue_cap, blue, |r| {
            (r.agent.index, r.action.type_id)
        });
        for r in accepted {
            let seq = self.enqueue(r.agent, r.action, r.origin);
            report.enqueued.push(seq);
        }
        for r in dropped {
            self.counters.dropped_blue += 1;
            self.trace_line(json!({
                "tick": self.state.clock, "agent": r.agent.to_string(),
                "type": r.action.type_id, "target": r.action.target, "verdict": "dropped",
            }))?;
            report.dropped_blue.push((r.agent, r.action));
        }
        self.counters.max_active_blue = self.counters.max_active_blue.max(self.queue.active_blue());
        for r in &report.rejected {
            self.trace_line(json!({
                "tick": self.state.clock, "agent": r.0.to_string(),
                "type": r.1.type_id, "target": r.1.target, "verdict": "rejected", "reason": r.2.as_str(),
            }))?;
        }
        Ok(report)
    }

    fn enqueue(&mut self, agent: AgentId, action: AgentAction, origin: Option<NodeId>) -> u64 {
        let spec = self.registry.get(action.type_id).expect("validated type");
        let sojourn = sample_sojourn(spec, self.cfg.jitter, &mut self.sojourn_rng);
        let target = (!spec.effect.is_global()).then_some(action.target as usize);
        let energy = spec.energy;
        self.state.inventory_mut(agent).energy -= energy;
        match agent.team {
            Team::Red => self.counters.red_energy_spent += energy,
            Team::Blue => self.counters.blue_energy_spent += energy,
        }
        let now = self.state.clock;
        let seq = self.queue.push(agent, action, target, origin, now, now + sojourn, energy);
        self.counters.enqueued += 1;
        let ev = self.queue.get(seq).clone();
        // trace write failures surface on the next step
        let _ = self.trace_line(json!({
            "tick": now, "seq": seq, "agent": agent.to_string(), "type": action.type_id,
            "target": action.target, "origin": origin, "completion": ev.completion_tick, "verdict": "enqueued",
        }));
        seq
    }

    fn reject(
        &mut self,
        report: &mut DecisionReport,
        agent: AgentId,
        action: AgentAction,
        kind: Option<EffectKind>,
        reason: Rejection,
    ) {
        self.counters.rejected += 1;
        report.rejected.push((agent, action, reason));
        if kind != Some(EffectKind::LateralMove) || (action.target as usize) >= self.state.node_count() {
            return;
        }
        let template = match reason {
            Rejection::RouteBlocked => TemplateKey::FirewallDrop,
            Rejection::MissingToken => TemplateKey::Action(EffectKind::LateralMove, Outcome::Rejected),
            _ => return,
        };
        let draft = LogDraft {
            node: action.target as usize,
            template,
            detail: None,
        };
        let rec = synthesize_log(&draft, self.state.clock, &self.state.topology, &mut self.system_rng);
        self.ingest(vec![rec]);
    }

    fn trace_line(&mut self, value: serde_json::Value) -> Result<()> {
        if let Some(w) = self.trace.as_mut() {
            serde_json::to_writer(&mut *w, &value)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    fn ingest(&mut self, records: Vec<LogRecord>) -> usize {
        let count = records.len();
        for rec in records {
            match rec.origin {
                Origin::Red => self.counters.red_logs += 1,
                Origin::Blue => self.counters.blue_logs += 1,
                Origin::Green => self.counters.green_logs += 1,
                Origin::System => self.counters.system_logs += 1,
            }
            self.node_log_counts[rec.node] += 1;
            if let Some(cache) = self.encoder.as_mut() {
                let enc = cache.encode(&rec.xml_text);
                if enc.oov {
                    self.counters.oov_logs += 1;
                }
                if let Some(z) = self.state.topology.zone_index(rec.zone) {
                    self.zone_windows[z].push(enc.embedding);
                }
                self.node_windows[rec.node].push(enc.embedding);
            }
            if let Some(kept) = self.kept_logs.as_mut() {
                kept.push(rec);
            }
        }
        count
    }

    fn execute(&mut self, ev: &ScheduledEvent, spec: &ActionSpec) -> Result<TransitionResult> {
        let mut ctx = DispatchContext {
            state: &self.state,
            spec,
            rules: self.rules,
            tick: self.state.clock,
            rng: &mut self.dispatch_rng,
        };
        match self.bridge.as_mut() {
            Some(b) => b.dispatch(&mut ctx, ev),
            None => Ok(mock_execute(&mut ctx, ev)),
        }
    }

    fn next_heartbeat(&self) -> f64 {
        (self.heartbeats + 1) as f64 * self.cfg.heartbeat
    }

    fn unresolved_log(&mut self, ev: &ScheduledEvent, outcome: Outcome) -> Option<LogRecord> {
        let spec = self.registry.get(ev.action.type_id)?;
        let node = ev.target?;
        let draft = LogDraft {
            node,
            template: TemplateKey::Action(spec.effect, outcome),
            detail: None,
        };
        Some(synthesize_log(&draft, self.state.clock, &self.state.topology, &mut self.system_rng))
    }

    fn target_before(&self, ev: &ScheduledEvent) -> Option<(Compromise, bool)> {
        ev.target.map(|n| (self.state.nodes[n].compromise, self.state.nodes[n].isolated))
    }

    fn unresolved(&mut self, ev: &ScheduledEvent, outcome: Outcome, logs: &mut Vec<LogRecord>) -> Result<CompletedEvent> {
        let status = match outcome {
            Outcome::Nullified => {
                self.counters.nullified += 1;
                EventStatus::Nullified
            }
            _ => {
                self.counters.aborted += 1;
                EventStatus::Aborted
            }
        };
        self.queue.set_status(ev.seq, status);
        logs.extend(self.unresolved_log(ev, outcome));
        self.trace_line(json!({
            "tick": self.state.clock, "seq": ev.seq, "agent": ev.actor.to_string(),
            "type": ev.action.type_id, "target": ev.action.target, "verdict": outcome.as_str(),
        }))?;
        let effect = self.registry.get(ev.action.type_id).map(|s| s.effect).unwrap_or(EffectKind::NoOp);
        Ok(CompletedEvent {
            event: ScheduledEvent {
                status,
                ..ev.clone()
            },
            effect,
            outcome,
            delta: StateDelta::default(),
            target_before: self.target_before(ev),
        })
    }

    /// Jumps to the next completion or heartbeat and resolves it. Returns
    /// `None` once the next instant lies beyond the horizon.
    pub fn advance(&mut self) -> Result<Option<StepReport>> {
        if self.done {
            return Ok(None);
        }
        let heartbeat = self.next_heartbeat();
        let t_queue = self.queue.next_completion();
        let t_next = t_queue.map_or(heartbeat, |t| t.min(heartbeat));
        if t_next > self.cfg.horizon {
            self.done = true;
            return Ok(None);
        }
        let jump = TimeJump::new(self.state.clock, t_next);
        self.state.clock = t_next;
        let maturing = if t_queue == Some(t_next) {
            self.queue.pop_maturing(t_next)
        } else {
            Vec::new()
        };
        let verdicts = resolve_conflicts(&maturing);
        let mut completed = Vec::with_capacity(maturing.len());
        let mut logs = Vec::new();
        let mut preempted: HashSet<NodeId> = HashSet::new();

        for &i in &verdicts.applied {
            let ev = &maturing[i];
            if ev.actor.team == Team::Red
                && (ev.origin.is_some_and(|o| preempted.contains(&o)) || ev.target.is_some_and(|t| preempted.contains(&t)))
            {
                let c = self.unresolved(ev, Outcome::Aborted, &mut logs)?;
                completed.push(c);
                continue;
            }
            let spec = self.registry.get(ev.action.type_id).expect("enqueued type").clone();
            let before = self.target_before(ev);
            let result = self.execute(ev, &spec)?;
            result.delta.apply(&mut self.state);
            self.queue.set_status(ev.seq, EventStatus::Completed);
            self.trace_line(json!({
                "tick": t_next, "seq": ev.seq, "agent": ev.actor.to_string(), "type": ev.action.type_id,
                "target": ev.action.target, "verdict": result.outcome.as_str(), "delta": &result.delta,
            }))?;
            logs.extend(result.logs);
            let success = result.outcome == Outcome::Success;
            let was_compromised = before.is_some_and(|(c, _)| c != Compromise::Healthy);
            if success && spec.effect == EffectKind::Exploit && result.delta.escalations().next().is_some() {
                self.counters.successful_exploits += 1;
            }
            if success && spec.effect == EffectKind::Cleanup {
                self.counters.cleanup_completions += 1;
                if was_compromised {
                    self.counters.services_restored += 1;
                } else {
                    self.counters.false_positive_cleanups += 1;
                }
            }
            if result.delta.honeytoken_tripped {
                self.counters.honeytoken_trips += 1;
            }
            completed.push(CompletedEvent {
                event: ScheduledEvent {
                    status: EventStatus::Completed,
                    ..ev.clone()
                },
                effect: spec.effect,
                outcome: result.outcome,
                delta: result.delta,
                target_before: before,
            });
            if success && ev.actor.team == Team::Blue && spec.effect.preempts() {
                if let Some(node) = ev.target {
                    preempted.insert(node);
                    for ab in self.queue.preempt(node) {
                        self.queue.set_status(ab.seq, EventStatus::Pending);
                        let c = self.unresolved(&ab, Outcome::Aborted, &mut logs)?;
                        completed.push(c);
                    }
                }
            }
        }
        for &i in &verdicts.nullified {
            let c = self.unresolved(&maturing[i], Outcome::Nullified, &mut logs)?;
            completed.push(c);
        }
        if t_next == heartbeat {
            self.heartbeats += 1;
            if self.cfg.green.enabled {
                let t0 = t_next - self.cfg.heartbeat;
                logs.extend(green_noise(t0, t_next, &self.cfg.green, &self.state.topology, &mut self.green_rng));
            }
        }
        let log_count = self.ingest(logs);

        let blue = blue_reward(&self.state.nodes, &completed, self.cfg.honeytoken_bonus, &self.weights);
        let red = red_reward(&self.state.nodes, &completed, &self.weights);
        self.counters.steps += 1;
        if jump.clipped() {
            self.counters.clipped_steps += 1;
        }
        self.last_jump = jump;
        Ok(Some(StepReport {
            step: self.counters.steps,
            jump,
            completed,
            blue,
            red,
            logs: log_count,
        }))
    }

    /// Fails fast with the agent and step when a policy misbehaves.
    pub fn policy_error(&self, agent: AgentId, message: impl Into<String>) -> CoreError {
        CoreError::Policy {
            agent: agent.to_string(),
            step: self.counters.steps,
            message: message.into(),
        }
    }
}
