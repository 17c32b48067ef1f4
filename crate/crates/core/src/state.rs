//! Ground-truth world state and zero-trust routing.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use netforge_kernels::MASK_BLOCKED;
use serde::{Deserialize, Serialize};

use crate::topology::{NodeId, TokenId, Topology, Zone};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
pub enum Compromise {
    #[default]
    Healthy,
    UserShell,
    Root,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Team {
    Red,
    Blue,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentId {
    pub team: Team,
    pub index: usize,
}

impl AgentId {
    pub fn red(index: usize) -> Self {
        AgentId { team: Team::Red, index }
    }

    pub fn blue(index: usize) -> Self {
        AgentId { team: Team::Blue, index }
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.team {
            Team::Red => write!(f, "red{}", self.index),
            Team::Blue => write!(f, "blue{}", self.index),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentInventory {
    pub agent: AgentId,
    pub tokens: BTreeSet<TokenId>,
    pub energy: f64,
}

impl AgentInventory {
    pub fn new(agent: AgentId, energy: f64) -> Self {
        AgentInventory {
            agent,
            tokens: BTreeSet::new(),
            energy,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub compromise: Compromise,
    /// Red agent holding the session; `None` whenever the host is Healthy.
    pub controller: Option<usize>,
    pub isolated: bool,
    pub vulns: Vec<String>,
    pub honeytoken: Option<TokenId>,
}

#[derive(Clone, Debug)]
pub struct WorldState {
    pub clock: f64,
    pub topology: Arc<Topology>,
    pub nodes: Vec<NodeState>,
    pub red: Vec<AgentInventory>,
    pub blue: Vec<AgentInventory>,
}

impl WorldState {
    pub fn new(topology: Arc<Topology>, red_agents: usize, blue_agents: usize, energy: f64) -> Self {
        let nodes = topology
            .nodes
            .iter()
            .map(|n| NodeState {
                compromise: Compromise::Healthy,
                controller: None,
                isolated: false,
                vulns: n.vulns().map(str::to_string).collect(),
                honeytoken: None,
            })
            .collect();
        WorldState {
            clock: 0.0,
            nodes,
            red: (0..red_agents).map(|i| AgentInventory::new(AgentId::red(i), energy)).collect(),
            blue: (0..blue_agents).map(|i| AgentInventory::new(AgentId::blue(i), energy)).collect(),
            topology,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn inventory(&self, agent: AgentId) -> &AgentInventory {
        match agent.team {
            Team::Red => &self.red[agent.index],
            Team::Blue => &self.blue[agent.index],
        }
    }

    pub fn inventory_mut(&mut self, agent: AgentId) -> &mut AgentInventory {
        match agent.team {
            Team::Red => &mut self.red[agent.index],
            Team::Blue => &mut self.blue[agent.index],
        }
    }

    pub fn zone_of(&self, node: NodeId) -> Zone {
        self.topology.nodes[node].zone
    }

    /// Edge present, both ends connected, and any zone gate satisfied by `tokens`.
    pub fn route_with(&self, src: NodeId, dst: NodeId, tokens: &BTreeSet<TokenId>) -> bool {
        let t = &self.topology;
        if !t.has_edge(src, dst) || self.nodes[src].isolated || self.nodes[dst].isolated {
            return false;
        }
        match t.gate(t.nodes[src].zone, t.nodes[dst].zone) {
            Some(required) => tokens.contains(&required),
            None => true,
        }
    }

    pub fn can_route(&self, src: NodeId, dst: NodeId, inv: &AgentInventory) -> bool {
        self.route_with(src, dst, &inv.tokens)
    }

    pub fn controls(&self, red: usize, node: NodeId) -> bool {
        let n = &self.nodes[node];
        n.compromise != Compromise::Healthy && n.controller == Some(red)
    }

    /// Hosts where `red` holds a live, connected session.
    pub fn footholds(&self, red: usize) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).filter(move |&i| self.controls(red, i) && !self.nodes[i].isolated)
    }

    /// Clears every Red token set. Blue inventories and decoys stay put.
    pub fn apply_token_flush(&mut self) {
        for inv in &mut self.red {
            inv.tokens.clear();
        }
    }

    /// Attention mask as seen by an observer holding no tokens: 0 where a
    /// route exists (and on the diagonal), `MASK_BLOCKED` elsewhere.
    pub fn topology_mask(&self) -> Array2<f64> {
        let n = self.nodes.len();
        let none = BTreeSet::new();
        Array2::from_shape_fn((n, n), |(i, j)| {
            if i == j || self.route_with(i, j, &none) {
                0.0
            } else {
                MASK_BLOCKED
            }
        })
    }

    pub fn compromised_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.compromise != Compromise::Healthy).count()
    }

    /// Hosts that are both clean and connected.
    pub fn healthy_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.compromise == Compromise::Healthy && !n.isolated)
            .count()
    }

    pub fn isolated_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.isolated).count()
    }

    pub fn honeytokens(&self) -> impl Iterator<Item = (NodeId, TokenId)> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.honeytoken.map(|t| (i, t)))
    }
}
