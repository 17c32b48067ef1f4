//! Scripted and learned agent policies.

use std::collections::BTreeSet;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use netforge_kernels::{policy_forward, PolicyInputs, PolicyParams, Rk4};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::actions::{validate_action, AgentAction};
use crate::error::{CoreError, Result};
use crate::rng::policy_stream;
use crate::sim::Simulator;
use crate::state::{AgentId, Compromise, Team};
use crate::telemetry::{Embedding128, EMBED_DIM};
use crate::topology::{NodeId, Zone};

pub const POLICY_NAMES: [&str; 5] = ["random", "passive", "red-chain", "blue-threshold", "ctgmarl"];

/// Maps the current simulator state to one raw `[type, target]` pair, or
/// `None` to stay idle this step.
pub trait Policy: Send {
    fn name(&self) -> &'static str;
    fn act(&mut self, sim: &Simulator, agent: AgentId) -> Result<Option<[i64; 2]>>;
}

pub struct PassivePolicy;

impl Policy for PassivePolicy {
    fn name(&self) -> &'static str {
        "passive"
    }

    fn act(&mut self, _: &Simulator, _: AgentId) -> Result<Option<[i64; 2]>> {
        Ok(None)
    }
}

/// Uniform over the team's own action types and the populated target slots.
pub struct RandomPolicy {
    rng: ChaCha8Rng,
    types: Vec<u32>,
}

impl RandomPolicy {
    pub fn new(sim: &Simulator, team: Team, rng: ChaCha8Rng) -> Self {
        RandomPolicy {
            rng,
            types: sim.registry().team_ids(team),
        }
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &'static str {
        "random"
    }

    fn act(&mut self, sim: &Simulator, _: AgentId) -> Result<Option<[i64; 2]>> {
        if self.types.is_empty() {
            return Ok(None);
        }
        let t = self.types[self.rng.random_range(0..self.types.len())];
        let target = self.rng.random_range(0..sim.state().node_count());
        Ok(Some([t as i64, target as i64]))
    }
}

const EXPLOITS: [&str; 6] = [
    "ExploitEternalBlue",
    "ExploitBlueKeep",
    "ExploitProxyLogon",
    "ExploitLog4Shell",
    "ExploitApacheRFI",
    "ExploitRemoteService",
];

/// Kill-chain attacker with ground-truth visibility: breach the perimeter,
/// take a credential holder, dump its token, pass the ticket into the
/// vault, exfiltrate. Waits while its previous action is in flight.
#[derive(Default)]
pub struct RedChainPolicy {
    exfiltrated: BTreeSet<NodeId>,
}

fn depth(zone: Zone) -> usize {
    Zone::CHAIN.iter().position(|&z| z == zone).unwrap_or(0)
}

impl RedChainPolicy {
    fn try_action(sim: &Simulator, agent: AgentId, name: &str, target: NodeId) -> Option<[i64; 2]> {
        let id = sim.registry().id_of(name)?;
        let action = AgentAction::new(id, target as u32);
        let spec = sim.registry().get(id)?;
        validate_action(sim.state(), spec, agent, action, sim.rules())
            .ok()
            .map(|_| [id as i64, target as i64])
    }

    fn choose(&mut self, sim: &Simulator, agent: AgentId) -> Option<[i64; 2]> {
        let s = sim.state();
        let topo = &s.topology;
        let inv = s.inventory(agent);
        let mut owned: Vec<NodeId> = (0..s.node_count()).filter(|&n| s.controls(agent.index, n)).collect();
        owned.sort_by_key(|&n| (std::cmp::Reverse(depth(topo.nodes[n].zone)), n));

        for &n in &owned {
            match s.nodes[n].compromise {
                Compromise::UserShell => {
                    if let Some(a) = Self::try_action(sim, agent, "PrivilegeEscalation", n) {
                        return Some(a);
                    }
                }
                Compromise::Root => {
                    let token_missing = topo.nodes[n].token.is_some_and(|t| !inv.tokens.contains(&t));
                    if token_missing {
                        if let Some(a) = Self::try_action(sim, agent, "DumpLSASS", n) {
                            return Some(a);
                        }
                    }
                    if topo.nodes[n].zone == Zone::SecureVault && !self.exfiltrated.contains(&n) {
                        if let Some(a) = Self::try_action(sim, agent, "DataExfiltration", n) {
                            self.exfiltrated.insert(n);
                            return Some(a);
                        }
                    }
                }
                Compromise::Healthy => {}
            }
        }

        let mut targets: Vec<NodeId> = (0..s.node_count())
            .filter(|&n| s.nodes[n].compromise == Compromise::Healthy)
            .collect();
        targets.sort_by_key(|&n| {
            (
                topo.nodes[n].token.is_none(),
                std::cmp::Reverse(depth(topo.nodes[n].zone)),
                n,
            )
        });
        for &n in &targets {
            if let Some(a) = Self::try_action(sim, agent, "PassTheTicket", n) {
                return Some(a);
            }
            for name in EXPLOITS {
                if let Some(a) = Self::try_action(sim, agent, name, n) {
                    return Some(a);
                }
            }
        }
        None
    }
}

impl Policy for RedChainPolicy {
    fn name(&self) -> &'static str {
        "red-chain"
    }

    fn act(&mut self, sim: &Simulator, agent: AgentId) -> Result<Option<[i64; 2]>> {
        if agent.team != Team::Red {
            return Err(sim.policy_error(agent, "red-chain drives Red agents only"));
        }
        if sim.queue().has_pending(agent) {
            return Ok(None);
        }
        Ok(self.choose(sim, agent))
    }
}

const NOVELTY_SIMILARITY: f64 = 0.9;
const MIN_SUPPORT: u32 = 5;
const MAX_PATTERNS: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stage {
    Isolated,
    Cleaned,
}

/// Telemetry-only defender for one zone. Embeddings that recur become known
/// patterns; a host emitting something unlike every known pattern is
/// isolated, cleaned and reconnected.
pub struct BlueThresholdPolicy {
    patterns: Vec<(Embedding128, u32)>,
    seen: Vec<u64>,
    suspects: Vec<NodeId>,
    handled: Vec<(NodeId, Stage)>,
}

impl BlueThresholdPolicy {
    pub fn new(node_count: usize) -> Self {
        BlueThresholdPolicy {
            patterns: Vec::new(),
            seen: vec![0; node_count],
            suspects: Vec::new(),
            handled: Vec::new(),
        }
    }

    /// Best similarity to an established pattern, then folds `e` into the
    /// pattern table.
    fn observe(&mut self, e: &Embedding128) -> f64 {
        let mut best_known = 0.0f64;
        let mut best = (0.0f64, None);
        for (k, (p, count)) in self.patterns.iter().enumerate() {
            let sim = p.dot(e);
            if *count >= MIN_SUPPORT {
                best_known = best_known.max(sim);
            }
            if sim > best.0 {
                best = (sim, Some(k));
            }
        }
        match best {
            (s, Some(k)) if s >= NOVELTY_SIMILARITY => self.patterns[k].1 += 1,
            _ if self.patterns.len() < MAX_PATTERNS => self.patterns.push((*e, 1)),
            _ => {}
        }
        best_known
    }
}

impl Policy for BlueThresholdPolicy {
    fn name(&self) -> &'static str {
        "blue-threshold"
    }

    fn act(&mut self, sim: &Simulator, agent: AgentId) -> Result<Option<[i64; 2]>> {
        if agent.team != Team::Blue {
            return Err(sim.policy_error(agent, "blue-threshold drives Blue agents only"));
        }
        let reg = sim.registry();
        let id = |name: &str| {
            reg.id_of(name)
                .ok_or_else(|| CoreError::Registry(format!("registry lacks {name}")))
        };
        let topo = sim.topology();
        let zone = topo.zones[sim.agent_zone(agent)].zone;

        for n in topo.zone_nodes(zone) {
            let fresh = (sim.node_log_count(n) - self.seen[n]).min(sim.node_window(n).len() as u64) as usize;
            self.seen[n] = sim.node_log_count(n);
            let window: Vec<Embedding128> = sim.node_window(n).entries().copied().collect();
            for e in &window[window.len() - fresh..] {
                if e.is_zero() {
                    continue;
                }
                if self.observe(e) < NOVELTY_SIMILARITY && !self.suspects.contains(&n) {
                    self.suspects.push(n);
                }
            }
        }

        if sim.queue().has_pending(agent) {
            return Ok(None);
        }
        if let Some(&(node, stage)) = self.handled.first() {
            return Ok(Some(match stage {
                Stage::Isolated => {
                    self.handled[0].1 = Stage::Cleaned;
                    [id("CleanupHost")? as i64, node as i64]
                }
                Stage::Cleaned => {
                    self.handled.remove(0);
                    [id("ReconnectHost")? as i64, node as i64]
                }
            }));
        }
        while !self.suspects.is_empty() {
            let node = self.suspects.remove(0);
            if !sim.state().nodes[node].isolated {
                self.handled.push((node, Stage::Isolated));
                return Ok(Some([id("IsolateHost")? as i64, node as i64]));
            }
        }
        Ok(None)
    }
}

/// Samples from the continuous-time graph policy cell. Node features are
/// the per-host telemetry window means.
pub struct CtgmarlPolicy {
    params: Arc<PolicyParams>,
    rk4: Rk4,
    h: Array1<f64>,
    rng: ChaCha8Rng,
}

impl CtgmarlPolicy {
    pub fn new(params: Arc<PolicyParams>, rng: ChaCha8Rng) -> Result<Self> {
        if params.hidden() != EMBED_DIM {
            return Err(CoreError::InvalidArgument(format!(
                "policy weights have hidden size {}, telemetry embeddings are {EMBED_DIM}",
                params.hidden()
            )));
        }
        Ok(CtgmarlPolicy {
            h: Array1::zeros(params.hidden()),
            params,
            rk4: Rk4::new(),
            rng,
        })
    }

    pub fn nfe(&self) -> u64 {
        self.rk4.nfe()
    }
}

impl Policy for CtgmarlPolicy {
    fn name(&self) -> &'static str {
        "ctgmarl"
    }

    fn act(&mut self, sim: &Simulator, agent: AgentId) -> Result<Option<[i64; 2]>> {
        let topo = sim.topology();
        let n = topo.node_count();
        let mut features = Array2::zeros((n, EMBED_DIM));
        for (i, mut row) in features.rows_mut().into_iter().enumerate() {
            let obs = sim.node_window(i).build_observation();
            row.assign(&ndarray::ArrayView1::from(obs.as_slice()));
        }
        let node_zone: Vec<usize> = topo
            .nodes
            .iter()
            .map(|node| topo.zone_index(node.zone).unwrap_or(0))
            .collect();
        let agent_zone = match agent.team {
            Team::Blue => sim.agent_zone(agent),
            Team::Red => 0,
        };
        let mask = sim.mask();
        let inputs = PolicyInputs {
            features: features.view(),
            mask: mask.view(),
            node_zone: &node_zone,
            num_zones: topo.zones.len(),
            agent_zone,
            dt: sim.last_jump().dt_norm,
            h_prev: self.h.view(),
        };
        let out = policy_forward(&inputs, &self.params, &mut self.rk4)
            .map_err(|e| sim.policy_error(agent, e.to_string()))?;
        self.h = out.h_next;
        let [t, s] = out.head.sample(&mut self.rng);
        Ok(Some([t as i64, s as i64]))
    }
}

/// Builds a named policy for one agent slot. `ctgmarl` uses `weights` when
/// given, otherwise a seeded random initialization.
pub fn build_policy(
    name: &str,
    sim: &Simulator,
    agent: AgentId,
    slot: usize,
    seed: u64,
    weights: Option<&Arc<PolicyParams>>,
) -> Result<Box<dyn Policy>> {
    let mut rng = policy_stream(seed, slot);
    Ok(match name {
        "random" => Box::new(RandomPolicy::new(sim, agent.team, rng)),
        "passive" => Box::new(PassivePolicy),
        "red-chain" if agent.team == Team::Red => Box::new(RedChainPolicy::default()),
        "blue-threshold" if agent.team == Team::Blue => Box::new(BlueThresholdPolicy::new(sim.state().node_count())),
        "ctgmarl" => {
            let params = match weights {
                Some(p) => p.clone(),
                None => Arc::new(PolicyParams::random(
                    EMBED_DIM,
                    netforge_kernels::NUM_HEADS,
                    &mut rng,
                )),
            };
            Box::new(CtgmarlPolicy::new(params, rng)?)
        }
        "red-chain" | "blue-threshold" => {
            return Err(CoreError::InvalidArgument(format!("policy `{name}` cannot drive {agent}")))
        }
        other => return Err(CoreError::UnknownPolicy(other.to_string())),
    })
}
