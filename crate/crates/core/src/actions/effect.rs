use serde::{Deserialize, Serialize};

use super::{check_preconditions, ActionSpec, EffectKind, Outcome, Rejection, Rules};
use crate::state::{AgentId, Compromise, WorldState};
use crate::telemetry::{LogDraft, TemplateKey};
use crate::topology::{NodeId, TokenId};

/// One field-level change. Every variant carries its final value, so
/// applying a mutation twice leaves the same state as applying it once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Mutation {
    Compromise {
        node: NodeId,
        level: Compromise,
        controller: Option<usize>,
        previous: Compromise,
    },
    Isolation {
        node: NodeId,
        isolated: bool,
    },
    GrantToken {
        agent: AgentId,
        token: TokenId,
    },
    RevokeTokens {
        agent: AgentId,
        tokens: Vec<TokenId>,
    },
    RemoveVulnerability {
        node: NodeId,
        vuln: String,
    },
    PlaceHoneytoken {
        node: NodeId,
        token: TokenId,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StateDelta {
    pub mutations: Vec<Mutation>,
    #[serde(default)]
    pub honeytoken_tripped: bool,
}

impl StateDelta {
    pub fn is_empty(&self) -> bool {
        self.mutations.is_empty() && !self.honeytoken_tripped
    }

    pub fn apply(&self, state: &mut WorldState) {
        for m in &self.mutations {
            match m {
                Mutation::Compromise {
                    node, level, controller, ..
                } => {
                    let n = &mut state.nodes[*node];
                    n.compromise = *level;
                    n.controller = *controller;
                }
                Mutation::Isolation { node, isolated } => state.nodes[*node].isolated = *isolated,
                Mutation::GrantToken { agent, token } => {
                    state.inventory_mut(*agent).tokens.insert(*token);
                }
                Mutation::RevokeTokens { agent, tokens } => {
                    let inv = state.inventory_mut(*agent);
                    for t in tokens {
                        inv.tokens.remove(t);
                    }
                }
                Mutation::RemoveVulnerability { node, vuln } => state.nodes[*node].vulns.retain(|v| v != vuln),
                Mutation::PlaceHoneytoken { node, token } => state.nodes[*node].honeytoken = Some(*token),
            }
        }
    }

    /// Compromise levels newly reached by this delta, as `(node, level)`.
    pub fn escalations(&self) -> impl Iterator<Item = (NodeId, Compromise)> + '_ {
        self.mutations.iter().filter_map(|m| match m {
            Mutation::Compromise {
                node, level, previous, ..
            } if level > previous => Some((*node, *level)),
            _ => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Effect {
    pub outcome: Outcome,
    pub delta: StateDelta,
    pub logs: Vec<LogDraft>,
    /// Precondition that no longer held at completion.
    pub failure: Option<Rejection>,
}

/// Computes the delta of a matured event against `state` without mutating
/// it. Preconditions are re-checked first; if one decayed since enqueue the
/// event fails and only a failure log is produced.
pub fn apply_effect(state: &WorldState, spec: &ActionSpec, agent: AgentId, target: NodeId, rules: Rules) -> Effect {
    use EffectKind::*;
    let kind = spec.effect;
    let log_node = if kind.is_global() { None } else { Some(target) };
    let draft = |outcome: Outcome, node: NodeId| LogDraft {
        node,
        template: TemplateKey::Action(kind, outcome),
        detail: None,
    };

    if let Err(reason) = check_preconditions(state, spec, agent, target, rules) {
        let logs = match log_node {
            Some(n) if n < state.node_count() => vec![draft(Outcome::Failure, n)],
            _ => Vec::new(),
        };
        return Effect {
            outcome: Outcome::Failure,
            delta: StateDelta::default(),
            logs,
            failure: Some(reason),
        };
    }

    let mut delta = StateDelta::default();
    let mut logs = Vec::new();
    let node_state = log_node.map(|n| &state.nodes[n]);
    let set_level = |level: Compromise, controller: Option<usize>| Mutation::Compromise {
        node: target,
        level,
        controller,
        previous: state.nodes[target].compromise,
    };

    match kind {
        Scan | Impact => logs.push(draft(Outcome::Success, target)),
        Exploit | LateralMove => {
            delta.mutations.push(set_level(Compromise::UserShell, Some(agent.index)));
            logs.push(draft(Outcome::Success, target));
        }
        PrivilegeEscalation => {
            delta.mutations.push(set_level(Compromise::Root, Some(agent.index)));
            logs.push(draft(Outcome::Success, target));
        }
        CredentialDump => {
            if let Some(token) = state.topology.nodes[target].token {
                delta.mutations.push(Mutation::GrantToken { agent, token });
            }
            logs.push(draft(Outcome::Success, target));
            if let Some(token) = node_state.and_then(|n| n.honeytoken) {
                delta.mutations.push(Mutation::GrantToken { agent, token });
                delta.honeytoken_tripped = true;
                logs.push(LogDraft {
                    node: target,
                    template: TemplateKey::HoneytokenAlert,
                    detail: None,
                });
            }
        }
        Isolate | Reconnect => {
            delta.mutations.push(Mutation::Isolation {
                node: target,
                isolated: kind == Isolate,
            });
            logs.push(draft(Outcome::Success, target));
        }
        Cleanup => {
            if state.nodes[target].compromise != Compromise::Healthy {
                delta.mutations.push(set_level(Compromise::Healthy, None));
            }
            logs.push(draft(Outcome::Success, target));
        }
        CredentialReset => {
            let n = &state.nodes[target];
            if n.compromise == Compromise::Root {
                delta.mutations.push(set_level(Compromise::UserShell, n.controller));
            }
            logs.push(draft(Outcome::Success, target));
        }
        TokenRotate => {
            for inv in &state.red {
                if !inv.tokens.is_empty() {
                    delta.mutations.push(Mutation::RevokeTokens {
                        agent: inv.agent,
                        tokens: inv.tokens.iter().copied().collect(),
                    });
                }
            }
            // the rotation is recorded on the identity provider host when one exists
            let idp = state.topology.nodes.iter().find(|n| n.token.is_some()).map(|n| n.id).unwrap_or(0);
            logs.push(draft(Outcome::Success, idp));
        }
        Honeytoken => {
            if let Some(token) = state.topology.decoy_token() {
                delta.mutations.push(Mutation::PlaceHoneytoken { node: target, token });
            }
            logs.push(draft(Outcome::Success, target));
        }
        Patch => {
            let wildcard = spec.vulns.iter().any(|v| v == "*");
            for v in &state.nodes[target].vulns {
                if wildcard || spec.vulns.contains(v) {
                    delta.mutations.push(Mutation::RemoveVulnerability {
                        node: target,
                        vuln: v.clone(),
                    });
                }
            }
            logs.push(draft(Outcome::Success, target));
        }
        Analyze => {
            let suspicious = state.nodes[target].compromise != Compromise::Healthy;
            logs.push(LogDraft {
                detail: Some(if suspicious { "suspicious" } else { "clean" }),
                ..draft(Outcome::Success, target)
            });
        }
        NoOp => {}
    }

    Effect {
        outcome: Outcome::Success,
        delta,
        logs,
        failure: None,
    }
}
