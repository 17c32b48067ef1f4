//! Per-step team rewards, decomposed into their components.

use serde::{Deserialize, Serialize};

use crate::actions::{EffectKind, Outcome};
use crate::engine::CompletedEvent;
use crate::state::{Compromise, NodeState, Team};

/// Tactical bonuses and scales.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub isolate_hit: f64,
    pub isolate_false_positive: f64,
    pub cleanup: f64,
    pub honeytoken: f64,
    pub economics: f64,
    pub user_shell: f64,
    pub root: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            isolate_hit: 5.0,
            isolate_false_positive: -2.0,
            cleanup: 3.0,
            honeytoken: 2.0,
            economics: 5.0,
            user_shell: 3.0,
            root: 5.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlueReward {
    pub tactical: f64,
    pub health: f64,
    pub economics: f64,
    pub cost: f64,
    pub total: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RedReward {
    pub tactical: f64,
    pub progression: f64,
    pub cost: f64,
    pub total: f64,
}

fn was_compromised(ev: &CompletedEvent) -> bool {
    ev.target_before.is_some_and(|(c, _)| c != Compromise::Healthy)
}

fn executed(ev: &CompletedEvent) -> bool {
    matches!(ev.outcome, Outcome::Success | Outcome::Failure)
}

/// `total = tactical + health - economics - cost`, where health is the
/// fraction of hosts Healthy and connected, economics scales the isolated
/// fraction, and cost sums the energy of Blue events that executed this
/// step.
pub fn blue_reward(nodes: &[NodeState], completed: &[CompletedEvent], honeytoken_bonus: bool, w: &RewardWeights) -> BlueReward {
    let total_nodes = nodes.len().max(1) as f64;
    let mut tactical = 0.0;
    let mut cost = 0.0;
    for ev in completed {
        match ev.event.actor.team {
            Team::Blue => {
                if executed(ev) {
                    cost += ev.event.energy_committed;
                }
                if ev.outcome != Outcome::Success {
                    continue;
                }
                match ev.effect {
                    EffectKind::Isolate if was_compromised(ev) => tactical += w.isolate_hit,
                    EffectKind::Isolate => tactical += w.isolate_false_positive,
                    EffectKind::Cleanup if was_compromised(ev) => tactical += w.cleanup,
                    _ => {}
                }
            }
            Team::Red => {
                if honeytoken_bonus && ev.delta.honeytoken_tripped {
                    tactical += w.honeytoken;
                }
            }
        }
    }
    let healthy = nodes
        .iter()
        .filter(|n| n.compromise == Compromise::Healthy && !n.isolated)
        .count() as f64;
    let isolated = nodes.iter().filter(|n| n.isolated).count() as f64;
    let health = healthy / total_nodes;
    let economics = w.economics * isolated / total_nodes;
    BlueReward {
        tactical,
        health,
        economics,
        cost,
        total: tactical + health - economics - cost,
    }
}

/// `total = tactical + progression - cost`, where tactical pays each newly
/// reached compromise level and progression is the compromised fraction.
pub fn red_reward(nodes: &[NodeState], completed: &[CompletedEvent], w: &RewardWeights) -> RedReward {
    let total_nodes = nodes.len().max(1) as f64;
    let mut tactical = 0.0;
    let mut cost = 0.0;
    for ev in completed.iter().filter(|e| e.event.actor.team == Team::Red) {
        if executed(ev) {
            cost += ev.event.energy_committed;
        }
        if ev.outcome != Outcome::Success {
            continue;
        }
        for (_, level) in ev.delta.escalations() {
            tactical += match level {
                Compromise::UserShell => w.user_shell,
                Compromise::Root => w.root,
                Compromise::Healthy => 0.0,
            };
        }
    }
    let compromised = nodes.iter().filter(|n| n.compromise != Compromise::Healthy).count() as f64;
    let progression = compromised / total_nodes;
    RedReward {
        tactical,
        progression,
        cost,
        total: tactical + progression - cost,
    }
}
