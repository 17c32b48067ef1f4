mod common;

use std::sync::Arc;

use common::{act, quiet, sim};
use netforge_core::actions::{AgentAction, EffectKind, Mutation, Outcome, Registry, StateDelta};
use netforge_core::engine::{CompletedEvent, EventStatus, ScheduledEvent};
use netforge_core::harness::{run_episode_with, EpisodeEnv, EpisodeOptions};
use netforge_core::reward::{blue_reward, red_reward, RewardWeights};
use netforge_core::state::{AgentId, Compromise, NodeState, Team, WorldState};
use netforge_core::topology::benchmark_topology;
use netforge_core::ScenarioConfig;

const EPS: f64 = 1e-12;

fn nodes(n: usize) -> Vec<NodeState> {
    WorldState::new(Arc::new(benchmark_topology(n).unwrap()), 1, 1, 1000.0).nodes
}

fn completed(
    actor: AgentId,
    effect: EffectKind,
    outcome: Outcome,
    energy: f64,
    delta: StateDelta,
    before: Option<(Compromise, bool)>,
) -> CompletedEvent {
    CompletedEvent {
        event: ScheduledEvent {
            seq: 0,
            actor,
            action: AgentAction::new(0, 0),
            target: Some(0),
            origin: None,
            start_tick: 0.0,
            completion_tick: 1.0,
            energy_committed: energy,
            status: EventStatus::Completed,
        },
        effect,
        outcome,
        delta,
        target_before: before,
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < EPS
}

#[test]
fn all_healthy_blue_reward_is_one() {
    let r = blue_reward(&nodes(100), &[], true, &RewardWeights::default());
    assert!(close(r.total, 1.0));
    assert_eq!((r.tactical, r.economics, r.cost), (0.0, 0.0, 0.0));
}

#[test]
fn correct_isolation_components() {
    let mut ns = nodes(100);
    ns[0].compromise = Compromise::UserShell;
    ns[0].isolated = true;
    let ev = completed(
        AgentId::blue(0),
        EffectKind::Isolate,
        Outcome::Success,
        1.0,
        StateDelta::default(),
        Some((Compromise::UserShell, false)),
    );
    let r = blue_reward(&ns, &[ev], true, &RewardWeights::default());
    assert!(close(r.tactical, 5.0));
    assert!(close(r.health, 0.99));
    assert!(close(r.economics, 0.05));
    assert!(close(r.cost, 1.0));
    assert!(close(r.total, 4.94), "total {}", r.total);
}

#[test]
fn false_positive_isolation_is_penalized() {
    let mut ns = nodes(100);
    ns[0].isolated = true;
    let ev = completed(
        AgentId::blue(0),
        EffectKind::Isolate,
        Outcome::Success,
        1.0,
        StateDelta::default(),
        Some((Compromise::Healthy, false)),
    );
    let r = blue_reward(&ns, &[ev], true, &RewardWeights::default());
    assert!(close(r.tactical, -2.0));
}

#[test]
fn cleanup_and_honeytoken_bonuses() {
    let ns = nodes(10);
    let w = RewardWeights::default();
    let clean = completed(AgentId::blue(0), EffectKind::Cleanup, Outcome::Success, 3.0, StateDelta::default(), Some((Compromise::Root, false)));
    let idle = completed(AgentId::blue(0), EffectKind::Cleanup, Outcome::Success, 3.0, StateDelta::default(), Some((Compromise::Healthy, false)));
    let trip = completed(
        AgentId::red(0),
        EffectKind::CredentialDump,
        Outcome::Success,
        1.0,
        StateDelta {
            mutations: vec![],
            honeytoken_tripped: true,
        },
        Some((Compromise::Root, false)),
    );
    assert!(close(blue_reward(&ns, &[clean.clone()], true, &w).tactical, 3.0));
    assert!(close(blue_reward(&ns, &[idle], true, &w).tactical, 0.0));
    assert!(close(blue_reward(&ns, &[trip.clone()], true, &w).tactical, 2.0));
    assert!(close(blue_reward(&ns, &[trip], false, &w).tactical, 0.0));
    let failed = completed(AgentId::blue(0), EffectKind::Cleanup, Outcome::Failure, 3.0, StateDelta::default(), None);
    let r = blue_reward(&ns, &[failed], true, &w);
    assert!(close(r.tactical, 0.0) && close(r.cost, 3.0));
    let nullified = CompletedEvent {
        outcome: Outcome::Nullified,
        ..clean
    };
    assert!(close(blue_reward(&ns, &[nullified], true, &w).cost, 0.0));
}

#[test]
fn red_reward_examples() {
    let w = RewardWeights::default();
    let r = red_reward(&nodes(100), &[], &w);
    assert_eq!(r.total, 0.0);

    let mut ns = nodes(100);
    for n in ns.iter_mut().take(25) {
        n.compromise = Compromise::UserShell;
        n.controller = Some(0);
    }
    assert!(close(red_reward(&ns, &[], &w).progression, 0.25));

    let mut ns = nodes(100);
    ns[7].compromise = Compromise::Root;
    ns[7].controller = Some(0);
    let root = completed(
        AgentId::red(0),
        EffectKind::PrivilegeEscalation,
        Outcome::Success,
        0.0,
        StateDelta {
            mutations: vec![Mutation::Compromise {
                node: 7,
                level: Compromise::Root,
                controller: Some(0),
                previous: Compromise::UserShell,
            }],
            honeytoken_tripped: false,
        },
        Some((Compromise::UserShell, false)),
    );
    let dump = completed(AgentId::red(0), EffectKind::CredentialDump, Outcome::Success, 1.0, StateDelta::default(), Some((Compromise::Root, false)));
    let r = red_reward(&ns, &[root, dump], &w);
    assert!(close(r.tactical, 5.0));
    assert!(close(r.progression, 0.01));
    assert!(close(r.cost, 1.0));
    assert!(close(r.total, 4.01), "total {}", r.total);
}

/// Recomputes the state-derived components from the node table after every
/// step of random episodes and checks the breakdown identities and bounds.
#[test]
fn breakdown_identity_holds_on_random_traces() {
    let mut cfg = ScenarioConfig::benchmark(30);
    cfg.horizon = 120.0;
    let env = EpisodeEnv::new(cfg).unwrap();
    for seed in 0..200 {
        run_episode_with(&env, "random", "random", seed, EpisodeOptions::default(), |sim, report, _| {
            let ns = &sim.state().nodes;
            let total = ns.len() as f64;
            let healthy = ns.iter().filter(|n| n.compromise == Compromise::Healthy && !n.isolated).count() as f64;
            let isolated = ns.iter().filter(|n| n.isolated).count() as f64;
            let compromised = ns.iter().filter(|n| n.compromise != Compromise::Healthy).count() as f64;
            let b = report.blue;
            let r = report.red;
            assert!(close(b.health, healthy / total));
            assert!(close(b.economics, 5.0 * isolated / total));
            assert!(close(r.progression, compromised / total));
            assert!(close(b.total, b.tactical + b.health - b.economics - b.cost));
            assert!(close(r.total, r.tactical + r.progression - r.cost));
            assert!((0.0..=1.0).contains(&b.health) && (0.0..=5.0).contains(&b.economics));
            assert!((0.0..=1.0).contains(&r.progression));
            let blue_cost: f64 = report
                .completed
                .iter()
                .filter(|c| c.event.actor.team == Team::Blue && matches!(c.outcome, Outcome::Success | Outcome::Failure))
                .map(|c| c.event.energy_committed)
                .sum();
            assert!(close(b.cost, blue_cost));
            Ok(())
        })
        .unwrap();
    }
}

#[test]
fn blanket_isolation_scores_below_the_healthy_baseline() {
    let w = RewardWeights::default();
    let mut ns = nodes(100);
    let baseline = blue_reward(&ns, &[], true, &w).total;
    for n in &mut ns {
        n.isolated = true;
    }
    let r = blue_reward(&ns, &[], true, &w);
    assert!(close(r.economics, 5.0));
    assert_eq!(r.health, 0.0);
    assert!(r.total < baseline);

    let reg = Registry::default();
    let mut s = sim(&quiet(20), reg.clone(), 0);
    let mut next = 0usize;
    let mut all_isolated_steps = 0;
    while !s.is_done() {
        let mut decisions = Vec::new();
        for b in 0..2 {
            let agent = AgentId::blue(b);
            if !s.queue().has_pending(agent) && next < 20 {
                decisions.push((agent, Some(act(&reg, "IsolateHost", next))));
                next += 1;
            }
        }
        s.decide(&decisions).unwrap();
        let Some(report) = s.advance().unwrap() else { break };
        if s.state().nodes.iter().all(|n| n.isolated) {
            all_isolated_steps += 1;
            assert!(report.blue.total < baseline, "step {} reward {}", report.step, report.blue.total);
        }
    }
    assert!(all_isolated_steps > 100);
}
