use std::collections::BTreeSet;

use proptest::prelude::*;

use qfly_core::linkmodel::{link_timing, logical_pair_timing};
use qfly_core::routing::{find_paths, route_round, Request};
use qfly_core::switch_loss::{
    end_to_end_loss, group_loss, min_crossings, overhead_factor, path_loss, LinkLossParams, PathKind, SwitchTechnology,
};
use qfly_core::topology::{build_topology, NodeId, QFlyTopology, Variant};
use qfly_core::workload::{qft_circuit, GateKind, Placement, PlacementPolicy};

fn variant() -> impl Strategy<Value = Variant> {
    prop::sample::select(Variant::ALL.to_vec())
}

fn dual_path() -> impl Strategy<Value = Variant> {
    prop::sample::select(vec![Variant::DualPathHalfDuplex, Variant::DualPathFullDuplex])
}

/// A legal small topology.
fn topology() -> impl Strategy<Value = QFlyTopology> {
    (variant(), 3usize..9, 1usize..5).prop_map(|(v, g, half)| build_topology(v, g, 2 * half).unwrap())
}

fn tech() -> impl Strategy<Value = SwitchTechnology> {
    prop_oneof![
        (0.0f64..2.0).prop_map(|x_2x2| SwitchTechnology::Benes { x_2x2 }),
        (0.0f64..5.0, 0.0f64..1.0).prop_map(|(x_coupling, x_cell)| SwitchTechnology::PlanarChip { x_coupling, x_cell }),
        (0.0f64..5.0).prop_map(|x_kxk| SwitchTechnology::Monolithic { x_kxk }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn build_then_validate(v in variant(), g in 3usize..14, half in 1usize..7) {
        let t = build_topology(v, g, 2 * half).unwrap();
        t.validate().unwrap();
        let s = t.summary();
        prop_assert_eq!(s.d, 4 * s.b * s.g);
        if !v.is_full_duplex() {
            prop_assert_eq!(s.d, 2 * s.p * s.g);
        }
        prop_assert_eq!(s.n, s.g * s.p);
        prop_assert_eq!(s.k, v.radix(g, 2 * half));
    }

    #[test]
    fn fiber_pattern(t in topology()) {
        let g = t.groups();
        for i in 0..g {
            for j in 0..g {
                if i == j {
                    continue;
                }
                let fwd = t.fiber_between(i, j).is_some();
                let back = t.fiber_between(j, i).is_some();
                if t.variant().is_dual_path() {
                    prop_assert!(fwd && back);
                } else {
                    prop_assert!(fwd != back, "groups {} and {} need exactly one fiber", i, j);
                }
                prop_assert_eq!(t.inter_group_distance(i, j).unwrap().hops, 1);
            }
        }
    }

    #[test]
    fn dual_path_survives_one_fiber_cut(v in dual_path(), g in 3usize..8, half in 1usize..4) {
        let t = build_topology(v, g, 2 * half).unwrap();
        let p = t.nodes_per_group();
        for cut in t.inter_group_fibers() {
            let (u, w) = (NodeId(cut.src * p), NodeId(cut.dst * p));
            let paths = find_paths(&t, u, w, 0).unwrap();
            let hops = paths.iter().map(|x| x.inter_group_hops).min().unwrap();
            prop_assert!(paths
                .iter()
                .any(|x| x.inter_group_hops == hops && x.fibers().all(|f| f != cut.id)));
        }
    }

    #[test]
    fn dual_path_has_two_disjoint_families(v in dual_path(), g in 3usize..7, half in 1usize..3) {
        let t = build_topology(v, g, 2 * half).unwrap();
        let p = t.nodes_per_group();
        for a in 0..g {
            for b in 0..g {
                if a == b {
                    continue;
                }
                let paths = find_paths(&t, NodeId(a * p), NodeId(b * p + p - 1), 0).unwrap();
                let sets: Vec<BTreeSet<_>> = paths.iter().map(|x| x.fibers().collect()).collect();
                let disjoint = sets
                    .iter()
                    .enumerate()
                    .any(|(i, x)| sets[i + 1..].iter().any(|y| x.is_disjoint(y)));
                prop_assert!(disjoint, "groups {} and {}", a, b);
            }
        }
    }

    #[test]
    fn lone_request_gets_table_loss(t in topology(), u in 0usize..64, v in 0usize..64, x in 0.0f64..1.0) {
        let n = t.node_count();
        let (u, v) = (u % n, v % n);
        prop_assume!(u != v);
        let assignment = route_round(&t, &[Request::new(0, NodeId(u), NodeId(v))], 0).unwrap();
        let path = &assignment.granted[&0];
        let kind = if u / t.nodes_per_group() == v / t.nodes_per_group() {
            PathKind::IntraGroup
        } else {
            PathKind::InterGroup
        };
        let tech = SwitchTechnology::Benes { x_2x2: x };
        let params = LinkLossParams::with_tech(tech);
        let loss = end_to_end_loss(&t, path, &params).unwrap();
        let table = path_loss(t.variant(), kind, &tech, t.radix()).unwrap();
        prop_assert!((loss.switch_term - table).abs() < 1e-12);
        prop_assert_eq!(path.switch_crossings, min_crossings(t.variant(), kind));
    }

    #[test]
    fn rounds_never_share_resources(t in topology(), pairs in prop::collection::vec((0usize..64, 0usize..64), 1..12), extra in 0usize..3) {
        let n = t.node_count();
        let mut used = BTreeSet::new();
        let mut requests = Vec::new();
        for (a, b) in pairs {
            let (a, b) = (a % n, b % n);
            if a == b || used.contains(&a) || used.contains(&b) {
                continue;
            }
            used.insert(a);
            used.insert(b);
            requests.push(Request::new(requests.len(), NodeId(a), NodeId(b)));
        }
        prop_assume!(!requests.is_empty());
        let first = route_round(&t, &requests, extra).unwrap();
        first.validate(&t).unwrap();
        prop_assert!(first.granted.contains_key(&0));
        prop_assert_eq!(first.granted.len() + first.blocked.len(), requests.len());
        let again = route_round(&t, &requests, extra).unwrap();
        prop_assert_eq!(first, again);
    }

    #[test]
    fn group_loss_shape(t in tech(), k in 2usize..600) {
        let here = group_loss(&t, k).unwrap();
        let next = group_loss(&t, k + 1).unwrap();
        prop_assert!(next >= here);
        match t {
            SwitchTechnology::Monolithic { .. } => prop_assert_eq!(here, next),
            SwitchTechnology::Benes { .. } => {
                let pow2 = k.next_power_of_two();
                prop_assert_eq!(here, group_loss(&t, pow2).unwrap());
            }
            SwitchTechnology::PlanarChip { .. } => {}
        }
    }

    #[test]
    fn loss_decomposes(top in topology(), t in tech(), km in 0.0f64..5.0, u in 0usize..64, v in 0usize..64, extra in 0usize..2) {
        let n = top.node_count();
        let (u, v) = (u % n, v % n);
        prop_assume!(u != v);
        let params = LinkLossParams { fiber_length_km: km, ..LinkLossParams::with_tech(t) };
        let gl = group_loss(&t, top.radix()).unwrap();
        for path in find_paths(&top, NodeId(u), NodeId(v), extra).unwrap() {
            let b = end_to_end_loss(&top, &path, &params).unwrap();
            let rest = b.total - b.fiber_term - 10.0 * 2f64.log10();
            prop_assert!((rest - path.switch_crossings as f64 * gl).abs() < 1e-9);
        }
    }

    #[test]
    fn full_duplex_saves_one_group_loss(t in tech(), k in 2usize..300) {
        let gl = group_loss(&t, k).unwrap();
        for kind in [PathKind::IntraGroup, PathKind::InterGroup] {
            let hd = path_loss(Variant::DualPathHalfDuplex, kind, &t, k).unwrap();
            let fd = path_loss(Variant::DualPathFullDuplex, kind, &t, k).unwrap();
            prop_assert!((hd - fd - gl).abs() < 1e-9);
        }
    }

    #[test]
    fn overhead_is_multiplicative(a in 0.0f64..30.0, b in 0.0f64..30.0) {
        let lhs = overhead_factor(a + b);
        let rhs = overhead_factor(a) * overhead_factor(b);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs);
    }

    #[test]
    fn pair_rate_falls_with_loss_and_reconfiguration(loss in 0.0f64..20.0, dl in 0.01f64..5.0, t_gs in 0.0f64..1e-2, dt in 1e-6f64..1e-2) {
        let base = link_timing(1e-9, loss, t_gs, 80.0);
        prop_assert!(link_timing(1e-9, loss + dl, t_gs, 80.0).r_leg < base.r_leg);
        prop_assert!(link_timing(1e-9, loss, t_gs + dt, 80.0).r_leg < base.r_leg);
        prop_assert!((base.t_leg / base.t_peg - 80.0).abs() < 1e-12);
        let t = logical_pair_timing(base.t_peg, t_gs);
        prop_assert_eq!(t.t_leg, base.t_leg);
    }

    #[test]
    fn cnot_count_ignores_placement(n in 1usize..20, nodes in 1usize..20, rr in any::<bool>()) {
        let c = qft_circuit(n);
        prop_assert_eq!(c.count(GateKind::Cnot), n * (n - 1));
        let q = n.div_ceil(nodes);
        let policy = if rr { PlacementPolicy::RoundRobin } else { PlacementPolicy::Block };
        let pl = Placement::generic(n, nodes, q, policy).unwrap();
        pl.validate().unwrap();
        prop_assert!(pl.remote_cnot_count(&c) <= c.count(GateKind::Cnot));
        if nodes == 1 {
            prop_assert_eq!(pl.remote_cnot_count(&c), 0);
        }
    }
}
