//! Scenario files: topology description plus episode and agent settings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bridge::HypervisorMode;
use crate::error::{CoreError, Result};
use crate::topology::{benchmark_spec, build_topology, NodeId, Role, Service, Topology, Zone};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneSpec {
    pub name: Zone,
    #[serde(default)]
    pub cidr: Option<String>,
    /// Link every pair of hosts inside the zone.
    #[serde(default = "yes")]
    pub mesh: bool,
    #[serde(default)]
    pub internet_facing: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: NodeId,
    #[serde(default)]
    pub name: Option<String>,
    pub zone: Zone,
    #[serde(default)]
    pub role: Role,
    #[serde(default)]
    pub services: Vec<Service>,
    #[serde(default)]
    pub token: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSpec {
    pub from: Zone,
    pub to: Zone,
    pub token: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitTopology {
    pub zones: Vec<ZoneSpec>,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub edges: Vec<[NodeId; 2]>,
    #[serde(default)]
    pub directed_edges: Vec<[NodeId; 2]>,
    /// Complete bipartite links between two zones.
    #[serde(default)]
    pub zone_links: Vec<[Zone; 2]>,
    #[serde(default)]
    pub zone_gates: Vec<GateSpec>,
    #[serde(default)]
    pub tokens: Vec<String>,
    #[serde(default)]
    pub decoy_tokens: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologySpec {
    Benchmark { node_count: usize },
    Explicit(ExplicitTopology),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GreenConfig {
    pub enabled: bool,
    pub lambda_day: f64,
    pub lambda_night: f64,
    /// First hour of the business day, inclusive.
    pub day_start: u32,
    /// Last hour of the business day, exclusive.
    pub day_end: u32,
}

impl Default for GreenConfig {
    fn default() -> Self {
        GreenConfig {
            enabled: true,
            lambda_day: 5.0,
            lambda_night: 0.5,
            day_start: 8,
            day_end: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub horizon: f64,
    pub energy_budget: f64,
    pub jitter: f64,
    pub heartbeat: f64,
    pub blue_cap: usize,
    pub blue_agents: usize,
    pub red_agents: usize,
    pub honeytokens: bool,
    pub honeytoken_bonus: bool,
    pub green: GreenConfig,
    pub registry: Option<PathBuf>,
    pub encoder: Option<PathBuf>,
    pub mode: HypervisorMode,
    pub transcript: Option<PathBuf>,
    pub topology: TopologySpec,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: "benchmark".into(),
            seed: 0,
            horizon: 500.0,
            energy_budget: 1000.0,
            jitter: 0.2,
            heartbeat: 1.0,
            blue_cap: 2,
            blue_agents: 3,
            red_agents: 1,
            honeytokens: true,
            honeytoken_bonus: true,
            green: GreenConfig::default(),
            registry: None,
            encoder: None,
            mode: HypervisorMode::Sim,
            transcript: None,
            topology: TopologySpec::Benchmark { node_count: 100 },
        }
    }
}

impl ScenarioConfig {
    pub fn benchmark(node_count: usize) -> Self {
        ScenarioConfig {
            topology: TopologySpec::Benchmark { node_count },
            ..Default::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a scenario file; relative registry, encoder and transcript
    /// paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.registry, &mut cfg.encoder, &mut cfg.transcript].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CoreError::Scenario(m.to_string()));
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return bad("horizon must be a finite non-negative tick count");
        }
        if !(self.energy_budget >= 0.0) {
            return bad("energy_budget must be non-negative");
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return bad("jitter must lie in [0, 1)");
        }
        if !(self.heartbeat > 0.0 && self.heartbeat.is_finite()) {
            return bad("heartbeat period must be positive");
        }
        if self.red_agents == 0 && self.blue_agents == 0 {
            return bad("scenario declares no agents");
        }
        let g = &self.green;
        if g.lambda_day < 0.0 || g.lambda_night < 0.0 || !g.lambda_day.is_finite() || !g.lambda_night.is_finite() {
            return bad("green rates must be finite and non-negative");
        }
        if g.day_start > 24 || g.day_end > 24 {
            return bad("business hours must lie in [0, 24]");
        }
        Ok(())
    }

    pub fn explicit_topology(&self) -> Result<ExplicitTopology> {
        match &self.topology {
            TopologySpec::Benchmark { node_count } => benchmark_spec(*node_count),
            TopologySpec::Explicit(t) => Ok(t.clone()),
        }
    }

    pub fn build_topology(&self) -> Result<Topology> {
        build_topology(&self.explicit_topology()?)
    }
}

fn yes() -> bool {
    true
}
