#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use netforge_core::actions::{AgentAction, Registry};
use netforge_core::rng::{stream, CORPUS};
use netforge_core::sim::Simulator;
use netforge_core::state::AgentId;
use netforge_core::telemetry::{generate_seed_corpus, EncoderModel};
use netforge_core::topology::benchmark_topology;
use netforge_core::ScenarioConfig;

/// Encoder fitted once per test binary on a 2,000-record benchmark corpus.
pub fn encoder() -> Arc<EncoderModel> {
    static MODEL: OnceLock<Arc<EncoderModel>> = OnceLock::new();
    MODEL
        .get_or_init(|| {
            let topo = benchmark_topology(100).unwrap();
            let corpus = generate_seed_corpus(&topo, 2_000, &mut stream(0, CORPUS)).unwrap();
            Arc::new(EncoderModel::fit(&corpus, 0).unwrap())
        })
        .clone()
}

pub fn sim(cfg: &ScenarioConfig, registry: Registry, seed: u64) -> Simulator {
    let topo = Arc::new(cfg.build_topology().unwrap());
    Simulator::new(cfg, topo, Arc::new(registry), None, seed).unwrap()
}

pub fn act(reg: &Registry, name: &str, target: usize) -> AgentAction {
    AgentAction::new(reg.id_of(name).unwrap(), target as u32)
}

pub fn one(agent: AgentId, action: AgentAction) -> Vec<(AgentId, Option<AgentAction>)> {
    vec![(agent, Some(action))]
}

/// A quiet benchmark: no jitter, no background noise.
pub fn quiet(n: usize) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::benchmark(n);
    cfg.jitter = 0.0;
    cfg.green.enabled = false;
    cfg
}
