mod common;

use proptest::prelude::*;

use qfly_core::routing::RoutingOptions;
use qfly_core::scheduler::{
    lattice_baseline, schedule, validate_lattice_schedule, validate_schedule, LatticeConfig, LatticeGrid,
    ScheduleConfig, TimingConfig,
};
use qfly_core::switch_loss::SwitchTechnology;
use qfly_core::topology::{build_topology, QFlyTopology, Variant};
use qfly_core::workload::{place_qubits, qft_circuit, Placement, PlacementPolicy};

#[derive(Debug, Clone)]
struct Case {
    topology: QFlyTopology,
    n: usize,
    q: usize,
    policy: PlacementPolicy,
    t_gs: f64,
    x_2x2: f64,
}

fn case() -> impl Strategy<Value = Case> {
    (
        prop::sample::select(Variant::ALL.to_vec()),
        3usize..7,
        1usize..4,
        2usize..14,
        1usize..4,
        any::<bool>(),
        prop::sample::select(vec![0.0, 1e-7, 1e-5]),
        0.0f64..1.5,
    )
        .prop_map(|(v, g, half, n, q, rr, t_gs, x_2x2)| {
            let topology = build_topology(v, g, 2 * half).unwrap();
            let n = n.min(topology.node_count() * q);
            Case {
                topology,
                n,
                q,
                policy: if rr {
                    PlacementPolicy::RoundRobin
                } else {
                    PlacementPolicy::Block
                },
                t_gs,
                x_2x2,
            }
        })
}

impl Case {
    fn placement(&self) -> Placement {
        place_qubits(self.n, &self.topology, self.q, self.policy).unwrap()
    }

    fn config(&self) -> ScheduleConfig {
        let mut cfg = ScheduleConfig::new(self.t_gs);
        cfg.loss.tech = SwitchTechnology::Benes { x_2x2: self.x_2x2 };
        cfg
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn schedules_validate(c in case()) {
        let circuit = qft_circuit(c.n);
        let pl = c.placement();
        let cfg = c.config();
        let s = schedule(&circuit, &pl, &c.topology, &cfg).unwrap();
        validate_schedule(&s, &circuit, &pl, &c.topology, &cfg).unwrap();
        prop_assert_eq!(s.remote_gate_count, pl.remote_cnot_count(&circuit));
    }

    #[test]
    fn identical_inputs_give_identical_bytes(c in case()) {
        let circuit = qft_circuit(c.n);
        let pl = c.placement();
        let cfg = c.config();
        let a = schedule(&circuit, &pl, &c.topology, &cfg).unwrap();
        let b = schedule(&circuit, &pl, &c.topology, &cfg).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        prop_assert_eq!(a.to_trace_jsonl(), b.to_trace_jsonl());
    }

    #[test]
    fn more_bsas_never_hurt(c in case()) {
        // full-duplex BSAs are owned by nodes, so only shared pools can be capped
        prop_assume!(!c.topology.variant().is_full_duplex());
        let circuit = qft_circuit(c.n);
        let pl = c.placement();
        let mut previous = f64::INFINITY;
        for usable in 1..=c.topology.bsas_per_group() {
            let mut cfg = c.config();
            cfg.routing.usable_bsas = Some(usable);
            let s = schedule(&circuit, &pl, &c.topology, &cfg).unwrap();
            prop_assert!(
                s.makespan_slots <= previous * (1.0 + 1e-12),
                "usable BSAs {} gave {} after {}", usable, s.makespan_slots, previous
            );
            previous = s.makespan_slots;
        }
    }

    #[test]
    fn more_detours_never_hurt(c in case()) {
        let circuit = qft_circuit(c.n);
        let pl = c.placement();
        let mut previous = f64::INFINITY;
        for extra in 0..=2 {
            let mut cfg = c.config();
            cfg.routing = RoutingOptions { max_extra_hops: extra, usable_bsas: None };
            let s = schedule(&circuit, &pl, &c.topology, &cfg).unwrap();
            prop_assert!(
                s.makespan_slots <= previous * (1.0 + 1e-12),
                "max_extra_hops {} gave {} after {}", extra, s.makespan_slots, previous
            );
            previous = s.makespan_slots;
        }
    }

    #[test]
    fn ideal_single_group_matches_layer_count(v in prop::sample::select(Variant::ALL.to_vec()), half in 1usize..5, n in 1usize..10) {
        let p = 2 * half;
        let n = n.min(p);
        let t = build_topology(v, 3, p).unwrap();
        let pl = place_qubits(n, &t, 1, PlacementPolicy::Block).unwrap();
        let mut cfg = ScheduleConfig::new(0.0);
        cfg.loss.tech = SwitchTechnology::Monolithic { x_kxk: 0.0 };
        let circuit = qft_circuit(n);
        let s = schedule(&circuit, &pl, &t, &cfg).unwrap();
        let nodes: Vec<usize> = (0..n).collect();
        let layers = common::alternating_layers(&circuit, &nodes);
        prop_assert!((s.makespan_slots - layers as f64).abs() < 1e-9, "{} vs {}", s.makespan_slots, layers);
    }

    #[test]
    fn lattice_schedules_validate(n in 2usize..12, q in 1usize..3, t_gs in prop::sample::select(vec![0.0, 1e-7])) {
        let nodes = n.div_ceil(q);
        let grid = LatticeGrid::for_nodes(nodes);
        let cfg = LatticeConfig::new(grid, TimingConfig::new(t_gs));
        let circuit = qft_circuit(n);
        let pl = Placement::generic(n, nodes, q, PlacementPolicy::Block).unwrap();
        let s = lattice_baseline(&circuit, &pl, &cfg).unwrap();
        validate_lattice_schedule(&s, &circuit, &pl, &cfg).unwrap();
    }
}

#[test]
fn brute_force_reference_on_four_node_group() {
    // qft(4), one qubit per node, all in one group of four (two BSAs)
    let t = build_topology(Variant::SinglePathHalfDuplex, 3, 4).unwrap();
    assert_eq!(t.bsas_per_group(), 2);
    let pl = place_qubits(4, &t, 1, PlacementPolicy::Block).unwrap();
    let circuit = qft_circuit(4);
    let cfg = ScheduleConfig::new(0.0);
    let s = schedule(&circuit, &pl, &t, &cfg).unwrap();
    let inst = common::Instance {
        circuit: &circuit,
        node_of: vec![0, 1, 2, 3],
        topology: &t,
        loss: cfg.loss,
        routing: cfg.routing,
        t_attempt: cfg.timing.t_attempt,
        t_gs: 0.0,
    };
    let (best, rounds) = common::exhaustive_best(&inst);
    assert_eq!(s.round_count(), rounds);
    assert!((s.makespan_slots - best).abs() < 1e-9 * best);
}
