use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NUM_ACTION_TYPES;
use crate::error::{CoreError, Result};
use crate::state::Team;

const DEFAULT_REGISTRY: &str = include_str!("../../data/registry.toml");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    Scan,
    Exploit,
    PrivilegeEscalation,
    CredentialDump,
    LateralMove,
    Impact,
    Isolate,
    Reconnect,
    Cleanup,
    TokenRotate,
    Honeytoken,
    Patch,
    Analyze,
    CredentialReset,
    NoOp,
}

impl EffectKind {
    pub const ALL: [EffectKind; 15] = [
        EffectKind::Scan,
        EffectKind::Exploit,
        EffectKind::PrivilegeEscalation,
        EffectKind::CredentialDump,
        EffectKind::LateralMove,
        EffectKind::Impact,
        EffectKind::Isolate,
        EffectKind::Reconnect,
        EffectKind::Cleanup,
        EffectKind::TokenRotate,
        EffectKind::Honeytoken,
        EffectKind::Patch,
        EffectKind::Analyze,
        EffectKind::CredentialReset,
        EffectKind::NoOp,
    ];

    pub fn team(self) -> Team {
        use EffectKind::*;
        match self {
            Scan | Exploit | PrivilegeEscalation | CredentialDump | LateralMove | Impact => Team::Red,
            _ => Team::Blue,
        }
    }

    /// Acts on the whole identity plane rather than one host.
    pub fn is_global(self) -> bool {
        matches!(self, EffectKind::TokenRotate | EffectKind::NoOp)
    }

    /// Completing this defense aborts in-flight Red events through the host.
    pub fn preempts(self) -> bool {
        matches!(self, EffectKind::Isolate | EffectKind::Cleanup)
    }

    pub fn as_str(self) -> &'static str {
        use EffectKind::*;
        match self {
            Scan => "scan",
            Exploit => "exploit",
            PrivilegeEscalation => "privilege_escalation",
            CredentialDump => "credential_dump",
            LateralMove => "lateral_move",
            Impact => "impact",
            Isolate => "isolate",
            Reconnect => "reconnect",
            Cleanup => "cleanup",
            TokenRotate => "token_rotate",
            Honeytoken => "honeytoken",
            Patch => "patch",
            Analyze => "analyze",
            CredentialReset => "credential_reset",
            NoOp => "noop",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSpec {
    pub id: u32,
    pub name: String,
    pub team: Team,
    pub mitre: String,
    pub energy: f64,
    pub duration: f64,
    pub effect: EffectKind,
    #[serde(default)]
    pub vulns: Vec<String>,
}

impl ActionSpec {
    /// Whether a host with `present` vulnerabilities matches this spec's tags.
    pub fn matches_vuln(&self, present: &[String]) -> bool {
        self.vulns
            .iter()
            .any(|tag| if tag == "*" { !present.is_empty() } else { present.contains(tag) })
    }
}

#[derive(Deserialize)]
struct RegistryFile {
    action: Vec<ActionSpec>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Registry {
    specs: Vec<ActionSpec>,
}

impl Default for Registry {
    fn default() -> Self {
        Registry::from_toml(DEFAULT_REGISTRY).expect("bundled registry is valid")
    }
}

impl Registry {
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: RegistryFile = toml::from_str(text)?;
        Self::from_specs(file.action)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn from_specs(mut specs: Vec<ActionSpec>) -> Result<Self> {
        if specs.len() != NUM_ACTION_TYPES as usize {
            return Err(CoreError::Registry(format!(
                "expected {NUM_ACTION_TYPES} action types, found {}",
                specs.len()
            )));
        }
        specs.sort_by_key(|s| s.id);
        for (i, s) in specs.iter().enumerate() {
            if s.id as usize != i {
                return Err(CoreError::Registry(format!("type ids must cover 0..31 exactly, missing {i}")));
            }
            if !(s.energy >= 0.0 && s.duration > 0.0 && s.energy.is_finite() && s.duration.is_finite()) {
                return Err(CoreError::Registry(format!("{}: energy must be >= 0 and duration > 0", s.name)));
            }
            if s.effect != EffectKind::NoOp && s.effect.team() != s.team {
                return Err(CoreError::Registry(format!("{}: effect {} belongs to the other team", s.name, s.effect.as_str())));
            }
            if matches!(s.effect, EffectKind::Exploit | EffectKind::Patch) && s.vulns.is_empty() {
                return Err(CoreError::Registry(format!("{}: needs at least one vulnerability tag", s.name)));
            }
        }
        Ok(Registry { specs })
    }

    pub fn get(&self, type_id: u32) -> Option<&ActionSpec> {
        self.specs.get(type_id as usize)
    }

    pub fn by_name(&self, name: &str) -> Option<&ActionSpec> {
        self.specs.iter().find(|s| s.name == name)
    }

    pub fn id_of(&self, name: &str) -> Option<u32> {
        self.by_name(name).map(|s| s.id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ActionSpec> {
        self.specs.iter()
    }

    pub fn team_ids(&self, team: Team) -> Vec<u32> {
        self.specs.iter().filter(|s| s.team == team).map(|s| s.id).collect()
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_registry_has_32_types() {
        let r = Registry::default();
        assert_eq!(r.len(), 32);
        assert_eq!(r.team_ids(Team::Red).len(), 16);
        assert_eq!(r.team_ids(Team::Blue).len(), 16);
    }

    #[test]
    fn wildcard_tag_needs_some_vulnerability() {
        let r = Registry::default();
        let generic = r.by_name("ExploitRemoteService").unwrap();
        assert!(!generic.matches_vuln(&[]));
        assert!(generic.matches_vuln(&["MS17-010".to_string()]));
        let eb = r.by_name("ExploitEternalBlue").unwrap();
        assert!(!eb.matches_vuln(&["CVE-2019-0708".to_string()]));
    }

    #[test]
    fn short_registry_is_rejected() {
        let text = DEFAULT_REGISTRY.rsplit_once("[[action]]").unwrap().0;
        assert!(matches!(Registry::from_toml(text), Err(CoreError::Registry(_))));
    }
}
