//! Independent reference schedulers used as oracles by several test targets.

#![allow(dead_code)]

use std::collections::BTreeSet;

use qfly_core::routing::{route_round_with, ArbitrationPolicy, Request, RoutingOptions, SwitchPairing};
use qfly_core::switch_loss::LinkLossParams;
use qfly_core::topology::{NodeId, QFlyTopology};
use qfly_core::workload::{Circuit, GateKind};

/// Routes requests in a fixed, caller-chosen order.
struct Fixed(Vec<usize>);

impl ArbitrationPolicy for Fixed {
    fn order(&self, _requests: &[Request]) -> Vec<usize> {
        self.0.clone()
    }
}

pub struct Instance<'a> {
    pub circuit: &'a Circuit,
    pub node_of: Vec<usize>,
    pub topology: &'a QFlyTopology,
    pub loss: LinkLossParams,
    pub routing: RoutingOptions,
    pub t_attempt: f64,
    pub t_gs: f64,
}

impl Instance<'_> {
    fn slot(&self) -> f64 {
        80.0 * self.t_attempt * 2.0
    }

    fn pair_time(&self, loss_db: f64) -> f64 {
        80.0 * self.t_attempt * 10f64.powf(loss_db / 10.0)
    }

    fn remote(&self, g: usize) -> bool {
        let ops = &self.circuit.gates[g].operands;
        ops.len() == 2 && self.node_of[ops[0]] != self.node_of[ops[1]]
    }

    /// Gates whose predecessors on every operand are done.
    fn ready(&self, done: &[bool]) -> Vec<usize> {
        let n = self.circuit.n;
        let mut next: Vec<Option<usize>> = vec![None; n];
        for g in &self.circuit.gates {
            if done[g.id] {
                continue;
            }
            for &q in &g.operands {
                if next[q].is_none() {
                    next[q] = Some(g.id);
                }
            }
        }
        let mut out: Vec<usize> = self
            .circuit
            .gates
            .iter()
            .filter(|g| !done[g.id] && g.operands.iter().all(|&q| next[q] == Some(g.id)))
            .map(|g| g.id)
            .collect();
        out.sort();
        out
    }
}

#[derive(Clone)]
struct State {
    done: Vec<bool>,
    held: BTreeSet<SwitchPairing>,
    time: f64,
    rounds: usize,
}

/// Best `(makespan_slots, rounds)` over every order in which each round's
/// ready remote requests can be presented to the router, and over every
/// routing allowance no larger than the instance's. Batching rule and cost
/// model match the production scheduler.
pub fn exhaustive_best(inst: &Instance) -> (f64, usize) {
    let bsas = inst.topology.bsas_per_group();
    let top = inst.routing.usable_bsas.unwrap_or(bsas).min(bsas);
    let low = if inst.topology.variant().is_full_duplex() {
        top
    } else {
        1
    };
    let mut best = (f64::INFINITY, usize::MAX);
    for usable in low..=top {
        for extra in 0..=inst.routing.max_extra_hops {
            let narrowed = Instance {
                circuit: inst.circuit,
                node_of: inst.node_of.clone(),
                topology: inst.topology,
                loss: inst.loss,
                routing: RoutingOptions {
                    max_extra_hops: extra,
                    usable_bsas: Some(usable),
                },
                t_attempt: inst.t_attempt,
                t_gs: inst.t_gs,
            };
            let start = State {
                done: vec![false; inst.circuit.gates.len()],
                held: BTreeSet::new(),
                time: 0.0,
                rounds: 0,
            };
            search(&narrowed, start, &mut best);
        }
    }
    (best.0 / inst.slot(), best.1)
}

fn search(inst: &Instance, mut s: State, best: &mut (f64, usize)) {
    if s.done.iter().all(|&d| d) {
        if s.time < best.0 * (1.0 - 1e-12) || (s.time <= best.0 * (1.0 + 1e-12) && s.rounds < best.1) {
            *best = (s.time, s.rounds);
        }
        return;
    }
    if s.time >= best.0 * (1.0 + 1e-12) {
        return;
    }
    // local layer
    let local: Vec<usize> = inst.ready(&s.done).into_iter().filter(|&g| !inst.remote(g)).collect();
    if !local.is_empty() {
        let mut longest: f64 = 0.0;
        for &g in &local {
            s.done[g] = true;
            longest = longest.max(match inst.circuit.gates[g].kind {
                GateKind::LocalRotationSlot | GateKind::H | GateKind::Cnot => 1.0,
            });
        }
        s.time += longest * inst.slot();
    }
    let remote: Vec<usize> = inst.ready(&s.done).into_iter().filter(|&g| inst.remote(g)).collect();
    if remote.is_empty() {
        search(inst, s, best);
        return;
    }
    for order in permutations(&remote) {
        let mut busy = BTreeSet::new();
        let mut requests = Vec::new();
        for &g in &order {
            let ops = &inst.circuit.gates[g].operands;
            let (a, b) = (inst.node_of[ops[0]], inst.node_of[ops[1]]);
            if busy.contains(&a) || busy.contains(&b) {
                continue;
            }
            busy.insert(a);
            busy.insert(b);
            requests.push(Request::new(g, NodeId(a), NodeId(b)));
        }
        let policy = Fixed((0..requests.len()).collect());
        let assignment = route_round_with(inst.topology, &requests, &inst.routing, &policy).unwrap();
        let mut next = s.clone();
        let mut longest: f64 = 0.0;
        for (&g, path) in &assignment.granted {
            next.done[g] = true;
            let loss = inst
                .loss
                .budget(path.count_switch_elements(), inst.topology.radix())
                .unwrap()
                .total;
            longest = longest.max(inst.pair_time(loss));
        }
        let state = assignment.switch_state();
        if state != next.held {
            longest += inst.t_gs;
        }
        next.held = state;
        next.time += longest;
        next.rounds += 1;
        search(inst, next, best);
    }
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Count of alternating layers: a layer of every ready single-node gate,
/// then a layer of every ready two-node CNOT, repeated; empty layers are not
/// counted. With ideal links every layer costs one slot.
pub fn alternating_layers(circuit: &Circuit, node_of: &[usize]) -> usize {
    let remote = |g: usize| {
        let ops = &circuit.gates[g].operands;
        ops.len() == 2 && node_of[ops[0]] != node_of[ops[1]]
    };
    let mut last_layer: Vec<isize> = vec![-1; circuit.n];
    // layer index of each gate; layers alternate local (even) / remote (odd)
    let mut layers = BTreeSet::new();
    for g in &circuit.gates {
        let after = g.operands.iter().map(|&q| last_layer[q]).max().unwrap();
        let want_odd = remote(g.id);
        let mut layer = after + 1;
        if (layer % 2 == 1) != want_odd {
            layer += 1;
        }
        for &q in &g.operands {
            last_layer[q] = layer;
        }
        layers.insert(layer);
    }
    layers.len()
}
