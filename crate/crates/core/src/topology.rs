//! Static network layout: zones, hosts, links and zero-trust gates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::scenario::{ExplicitTopology, NodeSpec, ZoneSpec};

pub const MAX_NODES: usize = 100;

pub type NodeId = usize;
pub type TokenId = usize;

pub const ENTERPRISE_ADMIN_TOKEN: &str = "Enterprise_Admin_Token";
pub const HONEY_ADMIN_TOKEN: &str = "Honey_Admin_Token";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Zone {
    #[serde(rename = "DMZ")]
    Dmz,
    Corporate,
    SecureVault,
    Internet,
}

impl Zone {
    /// Perimeter-inward order used by zone message passing and agent assignment.
    pub const CHAIN: [Zone; 3] = [Zone::Dmz, Zone::Corporate, Zone::SecureVault];

    pub fn name(self) -> &'static str {
        match self {
            Zone::Dmz => "DMZ",
            Zone::Corporate => "Corporate",
            Zone::SecureVault => "SecureVault",
            Zone::Internet => "Internet",
        }
    }

    pub fn default_cidr(self) -> &'static str {
        match self {
            Zone::Dmz => "10.0.0.0/24",
            Zone::Corporate => "10.0.2.0/24",
            Zone::SecureVault => "10.0.1.0/24",
            Zone::Internet => "0.0.0.0/0",
        }
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    #[default]
    Workstation,
    Server,
    WebServer,
    MailServer,
    DomainController,
    Database,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Workstation => "workstation",
            Role::Server => "server",
            Role::WebServer => "web_server",
            Role::MailServer => "mail_server",
            Role::DomainController => "domain_controller",
            Role::Database => "database",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Service {
    pub name: String,
    #[serde(default)]
    pub vulns: Vec<String>,
}

impl Service {
    pub fn new(name: &str, vulns: &[&str]) -> Self {
        Service {
            name: name.to_string(),
            vulns: vulns.iter().map(|v| v.to_string()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZoneInfo {
    pub zone: Zone,
    pub cidr: String,
    pub internet_facing: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub name: String,
    pub zone: Zone,
    pub address: Ipv4Addr,
    pub role: Role,
    pub services: Vec<Service>,
    pub token: Option<TokenId>,
}

impl Node {
    pub fn vulns(&self) -> impl Iterator<Item = &str> {
        self.services.iter().flat_map(|s| s.vulns.iter().map(String::as_str))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenInfo {
    pub name: String,
    pub decoy: bool,
}

#[derive(Clone, Debug)]
pub struct Topology {
    pub zones: Vec<ZoneInfo>,
    pub nodes: Vec<Node>,
    pub tokens: Vec<TokenInfo>,
    pub zone_gates: BTreeMap<(Zone, Zone), TokenId>,
    adjacency: Vec<u128>,
}

impl Topology {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn has_edge(&self, src: NodeId, dst: NodeId) -> bool {
        self.adjacency[src] >> dst & 1 == 1
    }

    pub fn neighbors(&self, node: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        let bits = self.adjacency[node];
        (0..self.nodes.len()).filter(move |j| bits >> j & 1 == 1)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn gate(&self, from: Zone, to: Zone) -> Option<TokenId> {
        self.zone_gates.get(&(from, to)).copied()
    }

    pub fn token_id(&self, name: &str) -> Option<TokenId> {
        self.tokens.iter().position(|t| t.name == name)
    }

    pub fn token_name(&self, id: TokenId) -> &str {
        &self.tokens[id].name
    }

    pub fn decoy_token(&self) -> Option<TokenId> {
        self.tokens.iter().position(|t| t.decoy)
    }

    pub fn zone_info(&self, zone: Zone) -> Option<&ZoneInfo> {
        self.zones.iter().find(|z| z.zone == zone)
    }

    /// Position of `zone` in the declared zone list.
    pub fn zone_index(&self, zone: Zone) -> Option<usize> {
        self.zones.iter().position(|z| z.zone == zone)
    }

    pub fn zone_nodes(&self, zone: Zone) -> Vec<NodeId> {
        self.nodes.iter().filter(|n| n.zone == zone).map(|n| n.id).collect()
    }

    pub fn internet_facing(&self, node: NodeId) -> bool {
        self.zone_info(self.nodes[node].zone).is_some_and(|z| z.internet_facing)
    }
}

/// Validates an explicit topology description and builds the routing tables.
pub fn build_topology(spec: &ExplicitTopology) -> Result<Topology> {
    if spec.nodes.len() > MAX_NODES {
        return Err(CoreError::TooManyNodes(spec.nodes.len()));
    }
    if spec.nodes.is_empty() {
        return Err(CoreError::Scenario("topology declares no nodes".into()));
    }

    let mut seen = BTreeSet::new();
    for n in &spec.nodes {
        if !seen.insert(n.id) {
            return Err(CoreError::DuplicateNode(n.id));
        }
    }
    if let Some(&bad) = seen.iter().find(|&&id| id >= spec.nodes.len()) {
        return Err(CoreError::Scenario(format!(
            "node id {bad} out of range: ids must cover 0..{}",
            spec.nodes.len()
        )));
    }

    let mut zones: Vec<ZoneInfo> = Vec::new();
    for z in &spec.zones {
        if z.name == Zone::Internet {
            return Err(CoreError::Scenario("the Internet zone is implicit and holds no nodes".into()));
        }
        if zones.iter().any(|known| known.zone == z.name) {
            return Err(CoreError::Scenario(format!("zone {} declared twice", z.name)));
        }
        zones.push(ZoneInfo {
            zone: z.name,
            cidr: z.cidr.clone().unwrap_or_else(|| z.name.default_cidr().to_string()),
            internet_facing: z.internet_facing.unwrap_or(z.name == Zone::Dmz),
        });
    }
    for z in &zones {
        if !spec.nodes.iter().any(|n| n.zone == z.zone) {
            return Err(CoreError::Scenario(format!("zone {} has no nodes", z.zone)));
        }
    }

    let mut tokens: Vec<TokenInfo> = Vec::new();
    for (name, decoy) in spec
        .tokens
        .iter()
        .map(|t| (t, false))
        .chain(spec.decoy_tokens.iter().map(|t| (t, true)))
    {
        if tokens.iter().any(|t| &t.name == name) {
            return Err(CoreError::Scenario(format!("token `{name}` declared twice")));
        }
        tokens.push(TokenInfo { name: name.clone(), decoy });
    }
    let token_of = |name: &str| tokens.iter().position(|t| t.name == name && !t.decoy);

    let mut ordered: Vec<&NodeSpec> = spec.nodes.iter().collect();
    ordered.sort_by_key(|n| n.id);
    let mut per_zone_count: BTreeMap<Zone, u32> = BTreeMap::new();
    let mut nodes = Vec::with_capacity(ordered.len());
    for n in ordered {
        let info = zones
            .iter()
            .find(|z| z.zone == n.zone)
            .ok_or_else(|| CoreError::Scenario(format!("node {} sits in undeclared zone {}", n.id, n.zone)))?;
        let k = per_zone_count.entry(n.zone).or_default();
        let address = host_address(&info.cidr, *k)?;
        *k += 1;
        let token = match &n.token {
            Some(name) => Some(
                token_of(name).ok_or_else(|| CoreError::Scenario(format!("node {} holds unknown token `{name}`", n.id)))?,
            ),
            None => None,
        };
        nodes.push(Node {
            id: n.id,
            name: n.name.clone().unwrap_or_else(|| format!("{}-{:02}", n.zone.name().to_lowercase(), n.id)),
            zone: n.zone,
            address,
            role: n.role,
            services: n.services.clone(),
            token,
        });
    }

    let count = nodes.len();
    let mut adjacency = vec![0u128; count];
    let mut link = |a: usize, b: usize, both: bool| -> Result<()> {
        if a >= count || b >= count {
            return Err(CoreError::Scenario(format!("edge [{a}, {b}] references a missing node")));
        }
        if a != b {
            adjacency[a] |= 1 << b;
            if both {
                adjacency[b] |= 1 << a;
            }
        }
        Ok(())
    };
    for [a, b] in &spec.edges {
        link(*a, *b, true)?;
    }
    for [a, b] in &spec.directed_edges {
        link(*a, *b, false)?;
    }
    for z in &spec.zones {
        if z.mesh {
            let members: Vec<usize> = nodes.iter().filter(|n| n.zone == z.name).map(|n| n.id).collect();
            for &a in &members {
                for &b in &members {
                    link(a, b, true)?;
                }
            }
        }
    }
    for [za, zb] in &spec.zone_links {
        for a in nodes.iter().filter(|n| n.zone == *za) {
            for b in nodes.iter().filter(|n| n.zone == *zb) {
                link(a.id, b.id, true)?;
            }
        }
    }

    let mut zone_gates = BTreeMap::new();
    for g in &spec.zone_gates {
        let id = token_of(&g.token).ok_or_else(|| CoreError::UnknownGateToken {
            from: g.from.to_string(),
            to: g.to.to_string(),
            token: g.token.clone(),
        })?;
        zone_gates.insert((g.from, g.to), id);
    }

    Ok(Topology {
        zones,
        nodes,
        tokens,
        zone_gates,
        adjacency,
    })
}

fn host_address(cidr: &str, offset: u32) -> Result<Ipv4Addr> {
    let (base, prefix) = cidr
        .split_once('/')
        .ok_or_else(|| CoreError::Scenario(format!("bad cidr `{cidr}`")))?;
    let base: Ipv4Addr = base
        .parse()
        .map_err(|_| CoreError::Scenario(format!("bad cidr `{cidr}`")))?;
    let prefix: u32 = prefix
        .parse()
        .ok()
        .filter(|p| *p <= 30)
        .ok_or_else(|| CoreError::Scenario(format!("bad cidr prefix in `{cidr}`")))?;
    let host_bits = 32 - prefix;
    if u64::from(offset) + 10 >= 1u64 << host_bits {
        return Err(CoreError::Scenario(format!("cidr `{cidr}` too small for its nodes")));
    }
    Ok(Ipv4Addr::from(u32::from(base) + 10 + offset))
}

/// The three-subnet benchmark layout scaled to `node_count` hosts.
///
/// The first fifth of the ids are DMZ web servers, the last fifth are vault
/// databases, and the Corporate block in between starts with the domain
/// controller that holds the enterprise admin token. Vault hosts are
/// micro-segmented: they only link to Corporate, through the token gate.
pub fn benchmark_spec(node_count: usize) -> Result<ExplicitTopology> {
    if node_count > MAX_NODES {
        return Err(CoreError::TooManyNodes(node_count));
    }
    if node_count < 3 {
        return Err(CoreError::Scenario("the benchmark layout needs at least 3 nodes".into()));
    }
    let n_dmz = (node_count / 5).max(1);
    let n_vault = (node_count / 5).max(1);
    let n_corp = node_count - n_dmz - n_vault;

    let mut nodes = Vec::with_capacity(node_count);
    for k in 0..n_dmz {
        let mut services = vec![Service::new(
            "apache-httpd",
            if k % 2 == 0 { &["CVE-2021-41773"] } else { &[] },
        )];
        if k % 3 == 0 {
            services.push(Service::new("java-app", &["CVE-2021-44228"]));
        }
        if k % 4 == 1 {
            services.push(Service::new("rdp", &["CVE-2019-0708"]));
        }
        if k % 5 == 2 {
            services.push(Service::new("smb", &["MS17-010"]));
        }
        nodes.push(NodeSpec {
            id: nodes.len(),
            name: Some(format!("dmz-web-{k:02}")),
            zone: Zone::Dmz,
            role: Role::WebServer,
            services,
            token: None,
        });
    }
    for k in 0..n_corp {
        let (name, role, services, token) = match k {
            0 => (
                format!("corp-dc-{k:02}"),
                Role::DomainController,
                vec![
                    Service::new("kerberos", &[]),
                    Service::new("ldap", &[]),
                    Service::new("smb", &["MS17-010"]),
                    Service::new("rdp", &["CVE-2019-0708"]),
                ],
                Some(ENTERPRISE_ADMIN_TOKEN.to_string()),
            ),
            1 => (
                format!("corp-mail-{k:02}"),
                Role::MailServer,
                vec![Service::new("exchange", &["CVE-2021-26855"]), Service::new("smb", &[])],
                None,
            ),
            _ => {
                let mut services = vec![Service::new("smb", if k % 2 == 0 { &["MS17-010"] } else { &[] })];
                if k % 3 == 0 {
                    services.push(Service::new("rdp", &["CVE-2019-0708"]));
                }
                (format!("corp-ws-{k:02}"), Role::Workstation, services, None)
            }
        };
        nodes.push(NodeSpec {
            id: nodes.len(),
            name: Some(name),
            zone: Zone::Corporate,
            role,
            services,
            token,
        });
    }
    for k in 0..n_vault {
        nodes.push(NodeSpec {
            id: nodes.len(),
            name: Some(format!("vault-db-{k:02}")),
            zone: Zone::SecureVault,
            role: Role::Database,
            services: vec![
                Service::new("mssql", &[]),
                Service::new("smb", if k % 2 == 0 { &["MS17-010"] } else { &[] }),
            ],
            token: None,
        });
    }

    let zone = |name: Zone, mesh: bool| ZoneSpec {
        name,
        cidr: Some(name.default_cidr().to_string()),
        mesh,
        internet_facing: Some(name == Zone::Dmz),
    };
    Ok(ExplicitTopology {
        zones: vec![zone(Zone::Dmz, true), zone(Zone::Corporate, true), zone(Zone::SecureVault, false)],
        nodes,
        edges: Vec::new(),
        directed_edges: Vec::new(),
        zone_links: vec![[Zone::Dmz, Zone::Corporate], [Zone::Corporate, Zone::SecureVault]],
        zone_gates: vec![
            crate::scenario::GateSpec {
                from: Zone::Corporate,
                to: Zone::SecureVault,
                token: ENTERPRISE_ADMIN_TOKEN.to_string(),
            },
            crate::scenario::GateSpec {
                from: Zone::SecureVault,
                to: Zone::Corporate,
                token: ENTERPRISE_ADMIN_TOKEN.to_string(),
            },
        ],
        tokens: vec![ENTERPRISE_ADMIN_TOKEN.to_string()],
        decoy_tokens: vec![HONEY_ADMIN_TOKEN.to_string()],
    })
}

pub fn benchmark_topology(node_count: usize) -> Result<Topology> {
    build_topology(&benchmark_spec(node_count)?)
}
