use std::collections::BTreeSet;
use std::sync::Arc;

use netforge_core::state::{AgentId, Compromise, WorldState};
use netforge_core::topology::{benchmark_topology, Zone, ENTERPRISE_ADMIN_TOKEN, MAX_NODES};
use netforge_core::{CoreError, ScenarioConfig};
use netforge_kernels::MASK_BLOCKED;
use proptest::prelude::*;

fn bench(n: usize) -> WorldState {
    WorldState::new(Arc::new(benchmark_topology(n).unwrap()), 1, 3, 1000.0)
}

fn pick(s: &WorldState, zone: Zone) -> usize {
    s.topology.zone_nodes(zone)[0]
}

#[test]
fn benchmark_has_three_zones_and_a_vault_gate() {
    let t = benchmark_topology(100).unwrap();
    let zones: Vec<Zone> = t.zones.iter().map(|z| z.zone).collect();
    assert_eq!(zones, vec![Zone::Dmz, Zone::Corporate, Zone::SecureVault]);
    let admin = t.token_id(ENTERPRISE_ADMIN_TOKEN).unwrap();
    assert_eq!(t.gate(Zone::Corporate, Zone::SecureVault), Some(admin));
    assert_eq!(t.gate(Zone::Dmz, Zone::Corporate), None);
    let cidrs: Vec<&str> = t.zones.iter().map(|z| z.cidr.as_str()).collect();
    assert_eq!(cidrs, vec!["10.0.0.0/24", "10.0.2.0/24", "10.0.1.0/24"]);
    let holders: Vec<_> = t.nodes.iter().filter(|n| n.token == Some(admin)).collect();
    assert_eq!(holders.len(), 1);
    assert_eq!(holders[0].zone, Zone::Corporate);
}

#[test]
fn too_many_nodes_is_rejected() {
    assert!(matches!(benchmark_topology(MAX_NODES + 1), Err(CoreError::TooManyNodes(101))));
    let mut nodes = String::new();
    for i in 0..101 {
        nodes.push_str(&format!("{{ id = {i}, zone = \"Corporate\" }},"));
    }
    let text = format!("[topology]\nkind = \"explicit\"\nzones = [{{ name = \"Corporate\" }}]\nnodes = [{nodes}]\n");
    let cfg = ScenarioConfig::from_toml(&text).unwrap();
    assert!(matches!(cfg.build_topology(), Err(CoreError::TooManyNodes(_))));
}

#[test]
fn gate_routing_examples() {
    let mut s = bench(100);
    let corp = pick(&s, Zone::Corporate);
    let vault = pick(&s, Zone::SecureVault);
    let dmz = pick(&s, Zone::Dmz);
    let red = AgentId::red(0);
    assert!(!s.can_route(corp, vault, s.inventory(red)));
    assert!(s.can_route(dmz, corp, s.inventory(red)));
    let admin = s.topology.token_id(ENTERPRISE_ADMIN_TOKEN).unwrap();
    s.inventory_mut(red).tokens.insert(admin);
    assert!(s.can_route(corp, vault, s.inventory(red)));

    s.apply_token_flush();
    assert!(s.red[0].tokens.is_empty());
    assert!(!s.can_route(corp, vault, s.inventory(red)));
    s.apply_token_flush();
    assert!(s.red[0].tokens.is_empty());
}

#[test]
fn flush_leaves_blue_and_honeytokens_alone() {
    let mut s = bench(20);
    let admin = s.topology.token_id(ENTERPRISE_ADMIN_TOKEN).unwrap();
    let decoy = s.topology.decoy_token().unwrap();
    s.inventory_mut(AgentId::blue(1)).tokens.insert(admin);
    s.nodes[3].honeytoken = Some(decoy);
    s.inventory_mut(AgentId::red(0)).tokens.extend([admin, decoy]);
    s.apply_token_flush();
    assert!(s.red[0].tokens.is_empty());
    assert!(s.blue[1].tokens.contains(&admin));
    assert_eq!(s.nodes[3].honeytoken, Some(decoy));
}

#[test]
fn mask_examples() {
    let mut s = bench(30);
    let n = s.node_count();
    let iso = pick(&s, Zone::Corporate);
    s.nodes[iso].isolated = true;
    let m = s.topology_mask();
    for j in 0..n {
        let expect = if j == iso { 0.0 } else { MASK_BLOCKED };
        assert_eq!(m[[iso, j]], expect);
        assert_eq!(m[[j, iso]], expect);
    }
    s.nodes[iso].isolated = false;
    let m = s.topology_mask();
    for c in s.topology.zone_nodes(Zone::Corporate) {
        for v in s.topology.zone_nodes(Zone::SecureVault) {
            assert_eq!(m[[c, v]], MASK_BLOCKED);
            assert_eq!(m[[v, c]], MASK_BLOCKED);
        }
    }

    let cfg = ScenarioConfig::from_toml(
        r#"
        [topology]
        kind = "explicit"
        zones = [{ name = "DMZ" }]
        nodes = [{ id = 0, zone = "DMZ" }, { id = 1, zone = "DMZ" }]
        "#,
    )
    .unwrap();
    let two = WorldState::new(Arc::new(cfg.build_topology().unwrap()), 1, 1, 10.0);
    assert!(two.topology_mask().iter().all(|&v| v == 0.0));
}

#[test]
fn directed_edges_route_one_way() {
    let cfg = ScenarioConfig::from_toml(
        r#"
        [topology]
        kind = "explicit"
        zones = [{ name = "DMZ", mesh = false }]
        nodes = [{ id = 0, zone = "DMZ" }, { id = 1, zone = "DMZ" }]
        directed_edges = [[0, 1]]
        "#,
    )
    .unwrap();
    let s = WorldState::new(Arc::new(cfg.build_topology().unwrap()), 1, 1, 10.0);
    let none = BTreeSet::new();
    assert!(s.route_with(0, 1, &none));
    assert!(!s.route_with(1, 0, &none));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mask_matches_routes_and_isolation_severs(n in 3usize..=40, isolated in proptest::collection::vec(any::<bool>(), 40)) {
        let mut s = bench(n);
        for (k, flag) in isolated.iter().take(n).enumerate() {
            s.nodes[k].isolated = *flag;
        }
        let m = s.topology_mask();
        let none = BTreeSet::new();
        for i in 0..n {
            prop_assert_eq!(m[[i, i]], 0.0);
            for j in 0..n {
                if i == j {
                    continue;
                }
                let open = m[[i, j]] == 0.0;
                prop_assert_eq!(open, s.route_with(i, j, &none));
                if s.nodes[i].isolated || s.nodes[j].isolated {
                    prop_assert!(!open);
                }
            }
        }
    }

    #[test]
    fn compromise_lattice_is_ordered(a in 0u8..3, b in 0u8..3) {
        let level = |x: u8| [Compromise::Healthy, Compromise::UserShell, Compromise::Root][x as usize];
        prop_assert_eq!(level(a) < level(b), a < b);
    }
}
