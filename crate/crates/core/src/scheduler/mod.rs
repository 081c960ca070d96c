//! Round-based execution of a placed circuit.
//!
//! Execution alternates between two kinds of steps until every gate is done:
//!
//! * a local epoch, where every ready gate that stays inside one node runs
//!   (one layer, at most one gate per qubit);
//! * a round, where the ready remote CNOTs are batched, routed through the
//!   network, and each granted connection yields one logical Bell pair that
//!   the CNOT consumes.
//!
//! Either step is skipped when it has nothing to do. Nodes never run local
//! gates during a round, since the two kinds of step never overlap in time.
//! Ties are broken by gate index everywhere, so the result is a pure
//! function of the inputs.

mod lattice;
mod validate;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::ScheduleError;
use crate::linkmodel::{DEFAULT_T_ATTEMPT, PURIFICATION_FACTOR};
use crate::routing::{route_round_with, InOrder, Request, RoundAssignment, RoutingOptions, SwitchPairing};
use crate::switch_loss::{overhead_factor, probability_to_db, LinkLossParams, BSA_IDEAL_SUCCESS};
use crate::topology::{NodeId, QFlyTopology};
use crate::workload::{Circuit, GateKind, Placement};

pub use lattice::{
    lattice_baseline, ChainAssignment, LatticeChain, LatticeConfig, LatticeGrid, DEFAULT_LATTICE_LINK_DB,
};
pub use validate::{validate_lattice_schedule, validate_schedule};

pub const TRACE_FORMAT: &str = "qfly-schedule-trace/1";

/// Clock and cost parameters shared by every scheduler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingConfig {
    pub t_attempt: f64,
    /// Switch reconfiguration time, charged on rounds that change the
    /// switch state.
    pub t_gs: f64,
    /// Length of one logical gate slot. `None` means `t_leg` of a
    /// switchless connection.
    pub t_slot: Option<f64>,
    pub purification_factor: f64,
    /// Slots taken by one `LocalRotationSlot`.
    pub rotation_slot_weight: f64,
}

impl TimingConfig {
    pub fn new(t_gs: f64) -> Self {
        TimingConfig {
            t_attempt: DEFAULT_T_ATTEMPT,
            t_gs,
            t_slot: None,
            purification_factor: PURIFICATION_FACTOR,
            rotation_slot_weight: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        let positive = [
            ("t_attempt", self.t_attempt),
            ("purification_factor", self.purification_factor),
            ("rotation_slot_weight", self.rotation_slot_weight),
            ("t_slot", self.t_slot.unwrap_or(1.0)),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ScheduleError::Timing(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.t_gs.is_finite() && self.t_gs >= 0.0) {
            return Err(ScheduleError::Timing(format!(
                "t_gs must be non-negative, got {}",
                self.t_gs
            )));
        }
        Ok(())
    }

    /// Seconds per slot.
    pub fn slot_seconds(&self) -> f64 {
        self.t_slot
            .unwrap_or_else(|| self.logical_pair_time(probability_to_db(BSA_IDEAL_SUCCESS)))
    }

    /// `t_leg` of a connection with the given total loss.
    pub fn logical_pair_time(&self, loss_db: f64) -> f64 {
        self.purification_factor * self.t_attempt * overhead_factor(loss_db)
    }

    /// Slots taken by a gate running inside one node.
    pub fn local_weight(&self, kind: GateKind) -> f64 {
        match kind {
            GateKind::LocalRotationSlot => self.rotation_slot_weight,
            GateKind::H | GateKind::Cnot => 1.0,
        }
    }
}

/// Everything [`schedule`] needs besides the circuit and its placement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub timing: TimingConfig,
    pub loss: LinkLossParams,
    pub routing: RoutingOptions,
}

impl ScheduleConfig {
    pub fn new(t_gs: f64) -> Self {
        ScheduleConfig {
            timing: TimingConfig::new(t_gs),
            loss: LinkLossParams::default(),
            routing: RoutingOptions::default(),
        }
    }
}

/// Where a gate was executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", content = "index", rename_all = "snake_case")]
pub enum StepRef {
    Epoch(usize),
    Round(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateTime {
    pub start: f64,
    pub end: f64,
    pub step: StepRef,
}

/// Local gate activity between two rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalEpoch {
    pub index: usize,
    pub start: f64,
    pub duration: f64,
    pub duration_slots: f64,
    /// Gate ids run by each node, keyed by node index.
    pub nodes: BTreeMap<usize, Vec<usize>>,
}

impl LocalEpoch {
    pub fn gates(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.values().flatten().copied()
    }
}

/// One switch configuration period producing one logical Bell pair per
/// granted connection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round<A = RoundAssignment> {
    pub index: usize,
    pub start: f64,
    /// Requests submitted to the router, in submission order. Request ids
    /// are gate ids.
    pub requests: Vec<Request>,
    pub assignment: A,
    pub switch_state_changed: bool,
    pub active_gates: Vec<usize>,
    /// Highest loss among the granted connections.
    pub max_loss_db: f64,
    pub duration: f64,
    pub duration_slots: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule<A = RoundAssignment> {
    pub circuit_fingerprint: String,
    pub t_slot: f64,
    pub rounds: Vec<Round<A>>,
    pub local_epochs: Vec<LocalEpoch>,
    /// Indexed by gate id.
    pub gate_times: Vec<GateTime>,
    pub makespan_seconds: f64,
    pub makespan_slots: f64,
    pub remote_gate_count: usize,
    /// Request-rounds lost to routing conflicts.
    pub blocked_retry_count: usize,
    /// Request-rounds held back because an endpoint node was already taken.
    pub deferred_count: usize,
    /// Routing allowance of the pass that produced this schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub routing: Option<RoutingOptions>,
}

impl<A> Schedule<A> {
    pub fn round_count(&self) -> usize {
        self.rounds.len()
    }

    /// Number of rounds with each count of granted connections.
    pub fn concurrency_histogram(&self) -> BTreeMap<usize, usize> {
        let mut hist = BTreeMap::new();
        for r in &self.rounds {
            *hist.entry(r.active_gates.len()).or_insert(0) += 1;
        }
        hist
    }

    pub fn max_concurrency(&self) -> usize {
        self.rounds.iter().map(|r| r.active_gates.len()).max().unwrap_or(0)
    }

    pub fn reconfiguration_count(&self) -> usize {
        self.rounds.iter().filter(|r| r.switch_state_changed).count()
    }
}

/// Assignment types that can describe themselves in a trace record.
pub trait TraceAssignment {
    fn trace_value(&self) -> serde_json::Value;
}

impl TraceAssignment for RoundAssignment {
    fn trace_value(&self) -> serde_json::Value {
        let record = self.trace_record(0);
        serde_json::json!({ "grants": record.grants, "blocked": record.blocked })
    }
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum TraceRecord<'a> {
    Header {
        format: &'static str,
        circuit: &'a str,
        t_slot: f64,
        rounds: usize,
        local_epochs: usize,
        makespan_slots: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        routing: Option<RoutingOptions>,
    },
    Epoch(&'a LocalEpoch),
    Round {
        index: usize,
        start: f64,
        duration: f64,
        duration_slots: f64,
        switch_state_changed: bool,
        max_loss_db: f64,
        requests: &'a [Request],
        routing: serde_json::Value,
    },
}

impl<A: TraceAssignment> Schedule<A> {
    /// Line-delimited JSON: a header, then epoch and round records in time
    /// order.
    pub fn to_trace_jsonl(&self) -> String {
        let mut lines = vec![TraceRecord::Header {
            format: TRACE_FORMAT,
            circuit: &self.circuit_fingerprint,
            t_slot: self.t_slot,
            rounds: self.rounds.len(),
            local_epochs: self.local_epochs.len(),
            makespan_slots: self.makespan_slots,
            routing: self.routing,
        }];
        let mut epochs = self.local_epochs.iter().peekable();
        let mut rounds = self.rounds.iter().peekable();
        loop {
            let take_epoch = match (epochs.peek(), rounds.peek()) {
                (Some(e), Some(r)) => e.start <= r.start,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => break,
            };
            if take_epoch {
                lines.push(TraceRecord::Epoch(epochs.next().unwrap()));
            } else {
                let r = rounds.next().unwrap();
                lines.push(TraceRecord::Round {
                    index: r.index,
                    start: r.start,
                    duration: r.duration,
                    duration_slots: r.duration_slots,
                    switch_state_changed: r.switch_state_changed,
                    max_loss_db: r.max_loss_db,
                    requests: &r.requests,
                    routing: r.assignment.trace_value(),
                });
            }
        }
        let mut out = String::new();
        for line in lines {
            out.push_str(&serde_json::to_string(&line).expect("trace records serialize"));
            out.push('\n');
        }
        out
    }
}

/// Result of routing one batch of requests, independent of the network.
pub(crate) struct Routed<A, S> {
    pub assignment: A,
    /// Granted request ids with the loss of their connection.
    pub granted: Vec<(usize, f64)>,
    pub blocked: Vec<usize>,
    pub state: S,
}

/// A network that can serve a batch of node-disjoint requests.
pub(crate) trait RoundRouter {
    type Assignment;
    type State: Default + PartialEq;

    fn route(&self, requests: &[Request]) -> Result<Routed<Self::Assignment, Self::State>, ScheduleError>;
}

struct QFlyRouter<'a> {
    topology: &'a QFlyTopology,
    config: &'a ScheduleConfig,
}

impl RoundRouter for QFlyRouter<'_> {
    type Assignment = RoundAssignment;
    type State = BTreeSet<SwitchPairing>;

    fn route(&self, requests: &[Request]) -> Result<Routed<RoundAssignment, Self::State>, ScheduleError> {
        let assignment = route_round_with(self.topology, requests, &self.config.routing, &InOrder)?;
        let k = self.topology.radix();
        let mut granted = Vec::with_capacity(assignment.granted.len());
        for (&id, path) in &assignment.granted {
            let loss = self.config.loss.budget(path.count_switch_elements(), k)?.total;
            granted.push((id, loss));
        }
        Ok(Routed {
            granted,
            blocked: assignment.blocked.iter().copied().collect(),
            state: assignment.switch_state(),
            assignment,
        })
    }
}

/// Runs `circuit` on a Q-Fly network.
///
/// Greedy batching is not monotone in routing freedom: granting one more
/// request, or granting it over a lossier detour, can delay later rounds. So
/// every allowance up to the configured one (fewer usable BSAs, fewer extra
/// hops) is scheduled and the shortest result kept. Allowances nest, so more
/// BSAs or more permitted hops never lengthen the makespan. Ties go to the
/// larger allowance.
pub fn schedule(
    circuit: &Circuit,
    placement: &Placement,
    topology: &QFlyTopology,
    config: &ScheduleConfig,
) -> Result<Schedule, ScheduleError> {
    let mut best: Option<Schedule> = None;
    for routing in allowances(topology, &config.routing) {
        let candidate = schedule_greedy(circuit, placement, topology, &ScheduleConfig { routing, ..*config })?;
        if best
            .as_ref()
            .is_none_or(|b| candidate.makespan_slots < b.makespan_slots)
        {
            best = Some(candidate);
        }
    }
    Ok(best.expect("at least one allowance"))
}

/// One greedy pass with exactly the configured routing allowance.
pub fn schedule_greedy(
    circuit: &Circuit,
    placement: &Placement,
    topology: &QFlyTopology,
    config: &ScheduleConfig,
) -> Result<Schedule, ScheduleError> {
    config.loss.validate()?;
    let nodes = resolve_nodes(circuit, placement, topology.node_count())?;
    let router = QFlyRouter { topology, config };
    let mut s = run(circuit, &nodes, &config.timing, &router)?;
    s.routing = Some(config.routing);
    Ok(s)
}

/// Allowances dominated by `limit`, largest first. Full-duplex BSAs belong
/// to single nodes, so their count is never reduced.
fn allowances(topology: &QFlyTopology, limit: &RoutingOptions) -> Vec<RoutingOptions> {
    let bsas = topology.bsas_per_group();
    let top = limit.usable_bsas.unwrap_or(bsas).min(bsas);
    let low = if topology.variant().is_full_duplex() {
        top
    } else {
        1.min(top)
    };
    let mut out = Vec::new();
    for usable in (low..=top).rev() {
        for max_extra_hops in (0..=limit.max_extra_hops).rev() {
            let usable_bsas = if usable == bsas && limit.usable_bsas.is_none() {
                None
            } else {
                Some(usable)
            };
            out.push(RoutingOptions {
                max_extra_hops,
                usable_bsas,
            });
        }
    }
    out
}

pub(crate) fn resolve_nodes(
    circuit: &Circuit,
    placement: &Placement,
    node_count: usize,
) -> Result<Vec<usize>, ScheduleError> {
    (0..circuit.n)
        .map(|q| {
            let NodeId(node) = placement.node_of(q).ok_or(ScheduleError::Unplaced(q))?;
            if node >= node_count {
                return Err(ScheduleError::PlacementOutOfRange {
                    node,
                    nodes: node_count,
                });
            }
            Ok(node)
        })
        .collect()
}

/// The shared epoch/round loop.
pub(crate) fn run<R: RoundRouter>(
    circuit: &Circuit,
    node_of: &[usize],
    timing: &TimingConfig,
    router: &R,
) -> Result<Schedule<R::Assignment>, ScheduleError> {
    timing.validate()?;
    circuit.validate().map_err(|e| ScheduleError::Invalid(e.to_string()))?;
    let t_slot = timing.slot_seconds();
    let order = circuit.per_qubit_order();
    let mut cursor = vec![0usize; circuit.n];
    let is_remote = |gate: usize| {
        let ops = &circuit.gates[gate].operands;
        ops.len() == 2 && node_of[ops[0]] != node_of[ops[1]]
    };
    let remote_gate_count = (0..circuit.gates.len()).filter(|&g| is_remote(g)).count();
    let retry_bound = 10 * remote_gate_count.max(1);

    let mut gate_times: Vec<Option<GateTime>> = vec![None; circuit.gates.len()];
    let mut rounds = Vec::new();
    let mut local_epochs = Vec::new();
    let mut blocked_for = vec![0usize; circuit.gates.len()];
    let mut blocked_retry_count = 0;
    let mut deferred_count = 0;
    let mut held_state = R::State::default();
    let mut remaining = circuit.gates.len();
    let mut now = 0.0f64;

    // a gate is ready when it is next in line on every operand
    let ready = |cursor: &[usize]| -> Vec<usize> {
        let mut out = BTreeSet::new();
        for (q, &c) in cursor.iter().enumerate() {
            if let Some(&g) = order[q].get(c) {
                if circuit.gates[g]
                    .operands
                    .iter()
                    .all(|&o| order[o].get(cursor[o]) == Some(&g))
                {
                    out.insert(g);
                }
            }
        }
        out.into_iter().collect()
    };
    let complete = |cursor: &mut [usize], gate: usize| {
        for &q in &circuit.gates[gate].operands {
            cursor[q] += 1;
        }
    };

    while remaining > 0 {
        let local: Vec<usize> = ready(&cursor).into_iter().filter(|&g| !is_remote(g)).collect();
        if !local.is_empty() {
            let index = local_epochs.len();
            let mut nodes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            let mut longest = 0.0f64;
            for &g in &local {
                let gate = &circuit.gates[g];
                let weight = timing.local_weight(gate.kind);
                longest = longest.max(weight);
                nodes.entry(node_of[gate.operands[0]]).or_default().push(g);
                gate_times[g] = Some(GateTime {
                    start: now,
                    end: now + weight * t_slot,
                    step: StepRef::Epoch(index),
                });
                complete(&mut cursor, g);
            }
            remaining -= local.len();
            let duration = longest * t_slot;
            local_epochs.push(LocalEpoch {
                index,
                start: now,
                duration,
                duration_slots: longest,
                nodes,
            });
            now += duration;
        }

        let remote: Vec<usize> = ready(&cursor).into_iter().filter(|&g| is_remote(g)).collect();
        if remote.is_empty() {
            continue;
        }
        let mut busy = BTreeSet::new();
        let mut requests = Vec::new();
        for &g in &remote {
            let ops = &circuit.gates[g].operands;
            let (a, b) = (node_of[ops[0]], node_of[ops[1]]);
            if busy.contains(&a) || busy.contains(&b) {
                deferred_count += 1;
                bump(&mut blocked_for, g, retry_bound)?;
                continue;
            }
            busy.insert(a);
            busy.insert(b);
            requests.push(Request::new(g, NodeId(a), NodeId(b)));
        }
        let routed = router.route(&requests)?;
        if routed.granted.is_empty() {
            return Err(ScheduleError::Invalid(format!(
                "round {} granted no request out of {}",
                rounds.len(),
                requests.len()
            )));
        }
        for &g in &routed.blocked {
            blocked_retry_count += 1;
            bump(&mut blocked_for, g, retry_bound)?;
        }
        let max_loss_db = routed.granted.iter().map(|&(_, l)| l).fold(f64::MIN, f64::max);
        let switch_state_changed = routed.state != held_state;
        let mut duration = timing.logical_pair_time(max_loss_db);
        if switch_state_changed {
            duration += timing.t_gs;
        }
        held_state = routed.state;
        let index = rounds.len();
        let mut active_gates = Vec::with_capacity(routed.granted.len());
        for &(g, _) in &routed.granted {
            gate_times[g] = Some(GateTime {
                start: now,
                end: now + duration,
                step: StepRef::Round(index),
            });
            blocked_for[g] = 0;
            complete(&mut cursor, g);
            active_gates.push(g);
        }
        remaining -= active_gates.len();
        rounds.push(Round {
            index,
            start: now,
            requests,
            assignment: routed.assignment,
            switch_state_changed,
            active_gates,
            max_loss_db,
            duration,
            duration_slots: duration / t_slot,
        });
        now += duration;
    }

    let gate_times: Vec<GateTime> = gate_times.into_iter().map(|t| t.expect("every gate ran")).collect();
    Ok(Schedule {
        circuit_fingerprint: circuit.fingerprint(),
        t_slot,
        rounds,
        local_epochs,
        gate_times,
        makespan_seconds: now,
        makespan_slots: now / t_slot,
        remote_gate_count,
        blocked_retry_count,
        deferred_count,
        routing: None,
    })
}

fn bump(blocked_for: &mut [usize], gate: usize, bound: usize) -> Result<(), ScheduleError> {
    blocked_for[gate] += 1;
    if blocked_for[gate] > bound {
        return Err(ScheduleError::Unroutable {
            gate,
            rounds: blocked_for[gate],
        });
    }
    Ok(())
}

/// Makespan in slots with every qubit in one machine: each gate takes its
/// slot weight and any gates on disjoint qubits run concurrently.
pub fn monolithic_baseline(circuit: &Circuit, timing: &TimingConfig) -> f64 {
    let mut qubit_free = vec![0.0f64; circuit.n];
    let mut makespan = 0.0f64;
    for gate in &circuit.gates {
        let start = gate.operands.iter().map(|&q| qubit_free[q]).fold(0.0, f64::max);
        let end = start + timing.local_weight(gate.kind);
        for &q in &gate.operands {
            qubit_free[q] = end;
        }
        makespan = makespan.max(end);
    }
    makespan
}
