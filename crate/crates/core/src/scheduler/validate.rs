//! Replays a schedule and checks it against the circuit and the network.

use std::collections::BTreeSet;

use super::{resolve_nodes, ChainAssignment, LatticeConfig, Schedule, ScheduleConfig, StepRef, TimingConfig};
use crate::error::ScheduleError;
use crate::topology::{NodeId, QFlyTopology};
use crate::workload::{Circuit, Placement};

const REL_TOL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs()).max(1e-300)
}

/// Like [`close`], for quantities derived from absolute times up to `horizon`.
fn close_within(a: f64, b: f64, horizon: f64) -> bool {
    close(a, b) || (a - b).abs() <= REL_TOL * 1e-3 * horizon
}

fn invalid(msg: String) -> ScheduleError {
    ScheduleError::Invalid(msg)
}

/// Checks every dependency, per-round resource invariant, duration and
/// reconfiguration charge of a Q-Fly schedule.
pub fn validate_schedule(
    schedule: &Schedule,
    circuit: &Circuit,
    placement: &Placement,
    topology: &QFlyTopology,
    config: &ScheduleConfig,
) -> Result<(), ScheduleError> {
    let nodes = resolve_nodes(circuit, placement, topology.node_count())?;
    validate_common(schedule, circuit, &nodes, &config.timing)?;
    let k = topology.radix();
    let mut held = BTreeSet::new();
    for round in &schedule.rounds {
        let a = &round.assignment;
        a.validate(topology)
            .map_err(|e| invalid(format!("round {}: {e}", round.index)))?;
        let granted: Vec<usize> = a.granted.keys().copied().collect();
        if granted != round.active_gates {
            return Err(invalid(format!(
                "round {}: active gates differ from grants",
                round.index
            )));
        }
        let mut max_loss = f64::MIN;
        for (&gate, path) in &a.granted {
            let ops = &circuit.gates[gate].operands;
            let want = [NodeId(nodes[ops[0]]), NodeId(nodes[ops[1]])];
            let got = [path.endpoints.0, path.endpoints.1];
            if want != got && want != [got[1], got[0]] {
                return Err(invalid(format!(
                    "round {}: gate {gate} routed between wrong nodes",
                    round.index
                )));
            }
            let loss = config.loss.budget(path.count_switch_elements(), k)?.total;
            max_loss = max_loss.max(loss);
        }
        let state = a.switch_state();
        let changed = state != held;
        held = state;
        check_round_timing(
            round.index,
            round.duration,
            round.switch_state_changed,
            changed,
            max_loss,
            &config.timing,
        )?;
    }
    Ok(())
}

/// Lattice counterpart of [`validate_schedule`].
pub fn validate_lattice_schedule(
    schedule: &Schedule<ChainAssignment>,
    circuit: &Circuit,
    placement: &Placement,
    config: &LatticeConfig,
) -> Result<(), ScheduleError> {
    let nodes = resolve_nodes(circuit, placement, config.grid.len())?;
    validate_common(schedule, circuit, &nodes, &config.timing)?;
    let grid = config.grid;
    let mut held = BTreeSet::new();
    for round in &schedule.rounds {
        let mut reserved = BTreeSet::new();
        let mut links = BTreeSet::new();
        let mut max_loss = f64::MIN;
        for chain in &round.assignment.chains {
            let ops = &circuit.gates[chain.request].operands;
            let (a, b) = (nodes[ops[0]], nodes[ops[1]]);
            let ends = (chain.nodes[0], *chain.nodes.last().unwrap());
            if ends != (a, b) {
                return Err(invalid(format!(
                    "round {}: chain for {} has wrong ends",
                    round.index, chain.request
                )));
            }
            if chain.links() != grid.manhattan(a, b) {
                return Err(invalid(format!(
                    "round {}: chain for {} is not shortest",
                    round.index, chain.request
                )));
            }
            for w in chain.nodes.windows(2) {
                if grid.manhattan(w[0], w[1]) != 1 {
                    return Err(invalid(format!(
                        "round {}: chain hop {}-{} is not a link",
                        round.index, w[0], w[1]
                    )));
                }
                links.insert((w[0].min(w[1]), w[0].max(w[1])));
            }
            for &n in &chain.nodes {
                if !reserved.insert(n) {
                    return Err(invalid(format!("round {}: node {n} reserved twice", round.index)));
                }
            }
            max_loss = max_loss.max(chain.links() as f64 * config.link_loss_db);
        }
        let changed = links != held;
        held = links;
        check_round_timing(
            round.index,
            round.duration,
            round.switch_state_changed,
            changed,
            max_loss,
            &config.timing,
        )?;
    }
    Ok(())
}

fn check_round_timing(
    index: usize,
    duration: f64,
    flagged: bool,
    changed: bool,
    max_loss: f64,
    timing: &TimingConfig,
) -> Result<(), ScheduleError> {
    if flagged != changed {
        return Err(invalid(format!("round {index}: reconfiguration flag is wrong")));
    }
    let mut expected = timing.logical_pair_time(max_loss);
    if changed {
        expected += timing.t_gs;
    }
    if !close(duration, expected) {
        return Err(invalid(format!(
            "round {index}: duration {duration} but expected {expected}"
        )));
    }
    Ok(())
}

/// Checks that hold for any network: each gate runs once, in a step of the
/// right kind, after its predecessors, and steps never overlap.
fn validate_common<A>(
    schedule: &Schedule<A>,
    circuit: &Circuit,
    nodes: &[usize],
    timing: &TimingConfig,
) -> Result<(), ScheduleError> {
    if schedule.circuit_fingerprint != circuit.fingerprint() {
        return Err(ScheduleError::MismatchedCircuits(
            schedule.circuit_fingerprint.clone(),
            circuit.fingerprint(),
        ));
    }
    if schedule.gate_times.len() != circuit.gates.len() {
        return Err(invalid("gate time table has the wrong length".into()));
    }
    let t_slot = timing.slot_seconds();
    let horizon = schedule.makespan_seconds;
    let is_remote = |g: usize| {
        let ops = &circuit.gates[g].operands;
        ops.len() == 2 && nodes[ops[0]] != nodes[ops[1]]
    };

    // every gate appears in exactly one step, matching its recorded step
    let mut seen = vec![false; circuit.gates.len()];
    let mut mark = |g: usize, step: StepRef| -> Result<(), ScheduleError> {
        if g >= seen.len() || seen[g] {
            return Err(invalid(format!("gate {g} scheduled twice or unknown")));
        }
        seen[g] = true;
        if schedule.gate_times[g].step != step {
            return Err(invalid(format!("gate {g} recorded in the wrong step")));
        }
        Ok(())
    };
    let mut intervals = Vec::new();
    for e in &schedule.local_epochs {
        intervals.push((e.start, e.start + e.duration));
        let mut used = BTreeSet::new();
        for (&node, gates) in &e.nodes {
            for &g in gates {
                mark(g, StepRef::Epoch(e.index))?;
                if is_remote(g) {
                    return Err(invalid(format!("remote gate {g} in a local epoch")));
                }
                if nodes[circuit.gates[g].operands[0]] != node {
                    return Err(invalid(format!("gate {g} listed under the wrong node")));
                }
                for &q in &circuit.gates[g].operands {
                    if !used.insert(q) {
                        return Err(invalid(format!("qubit {q} used twice in epoch {}", e.index)));
                    }
                }
                let t = schedule.gate_times[g];
                let weight = timing.local_weight(circuit.gates[g].kind);
                if !close(t.start, e.start) || !close_within(t.end - t.start, weight * t_slot, horizon) {
                    return Err(invalid(format!("gate {g} timing does not match epoch {}", e.index)));
                }
                if t.end > e.start + e.duration * (1.0 + REL_TOL) {
                    return Err(invalid(format!("gate {g} outlasts epoch {}", e.index)));
                }
            }
        }
    }
    for r in &schedule.rounds {
        intervals.push((r.start, r.start + r.duration));
        let mut busy = BTreeSet::new();
        for req in &r.requests {
            for n in [req.a, req.b] {
                if !busy.insert(n) {
                    return Err(invalid(format!("round {}: {n} requested twice", r.index)));
                }
            }
        }
        for &g in &r.active_gates {
            mark(g, StepRef::Round(r.index))?;
            if !is_remote(g) {
                return Err(invalid(format!("local gate {g} in round {}", r.index)));
            }
            if !r.requests.iter().any(|q| q.id == g) {
                return Err(invalid(format!("gate {g} granted without a request")));
            }
            let t = schedule.gate_times[g];
            if !close(t.start, r.start) || !close(t.end, r.start + r.duration) {
                return Err(invalid(format!("gate {g} timing does not match round {}", r.index)));
            }
        }
        if !close(r.duration_slots, r.duration / t_slot) {
            return Err(invalid(format!("round {}: slot duration is inconsistent", r.index)));
        }
    }
    if let Some(g) = seen.iter().position(|s| !s) {
        return Err(invalid(format!("gate {g} never runs")));
    }

    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in intervals.windows(2) {
        if w[1].0 < w[0].1 * (1.0 - REL_TOL) {
            return Err(invalid(format!("steps overlap at t={}", w[1].0)));
        }
    }

    for (g, preds) in circuit.predecessors().iter().enumerate() {
        for &p in preds {
            let (before, after) = (schedule.gate_times[p], schedule.gate_times[g]);
            if after.start < before.end * (1.0 - REL_TOL) {
                return Err(invalid(format!("gate {g} starts before its predecessor {p} ends")));
            }
        }
    }

    let end = intervals.last().map(|i| i.1).unwrap_or(0.0);
    if !close(schedule.makespan_seconds, end) || !close(schedule.makespan_slots, end / t_slot) {
        return Err(invalid("makespan does not match the last step".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheduler::schedule;
    use crate::topology::{build_topology, Variant};
    use crate::workload::{place_qubits, qft_circuit, PlacementPolicy};

    #[test]
    fn produced_schedules_validate_and_tampering_is_caught() {
        let t = build_topology(Variant::SinglePathHalfDuplex, 5, 2).unwrap();
        let c = qft_circuit(6);
        let pl = place_qubits(6, &t, 1, PlacementPolicy::Block).unwrap();
        let cfg = ScheduleConfig::new(1e-6);
        let s = schedule(&c, &pl, &t, &cfg).unwrap();
        validate_schedule(&s, &c, &pl, &t, &cfg).unwrap();

        let mut bad = s.clone();
        bad.rounds[0].duration *= 0.5;
        assert!(validate_schedule(&bad, &c, &pl, &t, &cfg).is_err());

        let mut bad = s.clone();
        let flag = &mut bad.rounds[1].switch_state_changed;
        *flag = !*flag;
        assert!(validate_schedule(&bad, &c, &pl, &t, &cfg).is_err());

        let mut bad = s.clone();
        let remote = s.rounds[0].active_gates[0];
        bad.gate_times.swap(0, remote);
        assert!(validate_schedule(&bad, &c, &pl, &t, &cfg).is_err());

        let mut bad = s.clone();
        bad.rounds[0].active_gates.clear();
        assert!(validate_schedule(&bad, &c, &pl, &t, &cfg).is_err());

        assert!(validate_schedule(&s, &qft_circuit(5), &pl, &t, &cfg).is_err());
    }
}
