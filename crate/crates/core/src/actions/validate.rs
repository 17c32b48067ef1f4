use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{ActionSpec, AgentAction, EffectKind};
use crate::state::{AgentId, Compromise, Team, WorldState};
use crate::topology::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    InvalidTarget,
    WrongTeam,
    InsufficientEnergy,
    RouteBlocked,
    MissingToken,
    NotVulnerable,
    NotHealthy,
    NoSession,
    AlreadyRoot,
    NotRoot,
    NoCredentials,
    TargetIsolated,
    AlreadyIsolated,
    NotIsolated,
    HoneytokenPresent,
    HoneytokensDisabled,
}

impl Rejection {
    pub fn as_str(self) -> &'static str {
        use Rejection::*;
        match self {
            InvalidTarget => "invalid_target",
            WrongTeam => "wrong_team",
            InsufficientEnergy => "insufficient_energy",
            RouteBlocked => "route_blocked",
            MissingToken => "missing_token",
            NotVulnerable => "not_vulnerable",
            NotHealthy => "not_healthy",
            NoSession => "no_session",
            AlreadyRoot => "already_root",
            NotRoot => "not_root",
            NoCredentials => "no_credentials",
            TargetIsolated => "target_isolated",
            AlreadyIsolated => "already_isolated",
            NotIsolated => "not_isolated",
            HoneytokenPresent => "honeytoken_present",
            HoneytokensDisabled => "honeytokens_disabled",
        }
    }
}

/// Scenario switches that change what validation allows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rules {
    pub honeytokens: bool,
}

impl Default for Rules {
    fn default() -> Self {
        Rules { honeytokens: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Approval {
    /// Foothold the action is launched from; `None` for Internet ingress and
    /// for Blue or host-local actions.
    pub origin: Option<NodeId>,
}

/// Full enqueue-time check: role, target slot, energy, then the
/// state-dependent preconditions.
pub fn validate_action(
    state: &WorldState,
    spec: &ActionSpec,
    agent: AgentId,
    action: AgentAction,
    rules: Rules,
) -> Result<Approval, Rejection> {
    if spec.team != agent.team {
        return Err(Rejection::WrongTeam);
    }
    if !spec.effect.is_global() && action.target as usize >= state.node_count() {
        return Err(Rejection::InvalidTarget);
    }
    if state.inventory(agent).energy < spec.energy {
        return Err(Rejection::InsufficientEnergy);
    }
    check_preconditions(state, spec, agent, action.target as usize, rules)
}

/// State-dependent preconditions, re-run when an event matures.
pub fn check_preconditions(
    state: &WorldState,
    spec: &ActionSpec,
    agent: AgentId,
    target: NodeId,
    rules: Rules,
) -> Result<Approval, Rejection> {
    use EffectKind::*;
    let local = Approval { origin: None };
    if spec.effect.is_global() {
        return Ok(local);
    }
    if target >= state.node_count() {
        return Err(Rejection::InvalidTarget);
    }
    let node = &state.nodes[target];
    match (agent.team, spec.effect) {
        (Team::Red, Scan) => red_origin(state, agent.index, target, &BTreeSet::new()),
        (Team::Red, Exploit) => {
            let approval = red_origin(state, agent.index, target, &BTreeSet::new())?;
            if node.compromise != Compromise::Healthy {
                return Err(Rejection::NotHealthy);
            }
            if !spec.matches_vuln(&node.vulns) {
                return Err(Rejection::NotVulnerable);
            }
            Ok(approval)
        }
        (Team::Red, LateralMove) => {
            let inv = &state.red[agent.index];
            let approval = red_origin(state, agent.index, target, &inv.tokens)?;
            let topo = &state.topology;
            if !inv.tokens.iter().any(|&t| !topo.tokens[t].decoy) {
                return Err(Rejection::MissingToken);
            }
            if node.compromise != Compromise::Healthy {
                return Err(Rejection::NotHealthy);
            }
            Ok(approval)
        }
        (Team::Red, PrivilegeEscalation | CredentialDump | Impact) => {
            if !state.controls(agent.index, target) {
                return Err(Rejection::NoSession);
            }
            if node.isolated {
                return Err(Rejection::TargetIsolated);
            }
            match spec.effect {
                PrivilegeEscalation if node.compromise == Compromise::Root => Err(Rejection::AlreadyRoot),
                CredentialDump if node.compromise != Compromise::Root => Err(Rejection::NotRoot),
                CredentialDump if state.topology.nodes[target].token.is_none() && node.honeytoken.is_none() => {
                    Err(Rejection::NoCredentials)
                }
                _ => Ok(local),
            }
        }
        (Team::Blue, Isolate) if node.isolated => Err(Rejection::AlreadyIsolated),
        (Team::Blue, Reconnect) if !node.isolated => Err(Rejection::NotIsolated),
        (Team::Blue, Honeytoken) => {
            if !rules.honeytokens || state.topology.decoy_token().is_none() {
                Err(Rejection::HoneytokensDisabled)
            } else if node.honeytoken.is_some() {
                Err(Rejection::HoneytokenPresent)
            } else {
                Ok(local)
            }
        }
        (Team::Blue, Patch) if !spec.matches_vuln(&node.vulns) => Err(Rejection::NotVulnerable),
        (Team::Blue, _) => Ok(local),
        (Team::Red, _) => Err(Rejection::WrongTeam),
    }
}

/// Picks the lowest-id connected foothold that routes to `target` with the
/// presented tokens, falling back to Internet ingress for exposed zones.
fn red_origin(
    state: &WorldState,
    red: usize,
    target: NodeId,
    tokens: &BTreeSet<usize>,
) -> Result<Approval, Rejection> {
    if let Some(src) = state.footholds(red).find(|&src| state.route_with(src, target, tokens)) {
        return Ok(Approval { origin: Some(src) });
    }
    if state.topology.internet_facing(target) && !state.nodes[target].isolated {
        return Ok(Approval { origin: None });
    }
    Err(Rejection::RouteBlocked)
}
