//! QFT workload generation and logical-qubit placement.
//!
//! The QFT template is the textbook one: for every target qubit `j`, a
//! Hadamard followed by controlled-phase rotations controlled by each later
//! qubit. The final swap network is omitted; on a switched interconnect the
//! output permutation is a relabeling.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::WorkloadError;
use crate::topology::{NodeId, QFlyTopology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    H,
    /// Unit-cost stand-in for a compiled single-qubit rotation sequence.
    LocalRotationSlot,
    Cnot,
}

impl GateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::LocalRotationSlot => "RZ_SLOT",
            GateKind::Cnot => "CNOT",
        }
    }
}

/// Where a gate came from in the QFT template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GateOrigin {
    /// Target qubit index of the QFT layer.
    pub layer: usize,
    /// `(control, target)` of the controlled phase this gate expands.
    pub pair: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Gate {
    pub id: usize,
    pub kind: GateKind,
    /// One operand for single-qubit kinds, `[control, target]` for CNOT.
    pub operands: Vec<usize>,
    pub origin: GateOrigin,
}

impl Gate {
    pub fn is_two_qubit(&self) -> bool {
        self.kind == GateKind::Cnot
    }
}

/// A dependency-ordered gate list over `n` logical qubits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Circuit {
    pub n: usize,
    pub gates: Vec<Gate>,
}

pub const CIRCUIT_HEADER: &str = "# qfly-circuit v1";

impl Circuit {
    pub fn new(n: usize, gates: Vec<Gate>) -> Result<Self, WorkloadError> {
        let circuit = Circuit { n, gates };
        circuit.validate()?;
        Ok(circuit)
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        for (i, gate) in self.gates.iter().enumerate() {
            let bad = |reason: String| Err(WorkloadError::BadGate { gate: i, reason });
            if gate.id != i {
                return bad(format!("id {} out of sequence", gate.id));
            }
            let arity = if gate.is_two_qubit() { 2 } else { 1 };
            if gate.operands.len() != arity {
                return bad(format!("{} takes {arity} operands", gate.kind.as_str()));
            }
            if let Some(&q) = gate.operands.iter().find(|&&q| q >= self.n) {
                return bad(format!("operand {q} outside [0, {})", self.n));
            }
            if arity == 2 && gate.operands[0] == gate.operands[1] {
                return bad("CNOT operands coincide".to_string());
            }
        }
        Ok(())
    }

    pub fn count(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind == kind).count()
    }

    /// Gate ids touching each qubit, in program order.
    pub fn per_qubit_order(&self) -> Vec<Vec<usize>> {
        let mut order = vec![Vec::new(); self.n];
        for gate in &self.gates {
            for &q in &gate.operands {
                order[q].push(gate.id);
            }
        }
        order
    }

    /// Immediate predecessors of every gate (previous gate on each operand).
    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut last: Vec<Option<usize>> = vec![None; self.n];
        let mut preds = Vec::with_capacity(self.gates.len());
        for gate in &self.gates {
            let mut p: Vec<usize> = gate.operands.iter().filter_map(|&q| last[q]).collect();
            p.dedup();
            preds.push(p);
            for &q in &gate.operands {
                last[q] = Some(gate.id);
            }
        }
        preds
    }

    /// Short identity used to check that several schedules share a circuit.
    pub fn fingerprint(&self) -> String {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.gates.hash(&mut h);
        format!("n={} gates={} h={:016x}", self.n, self.gates.len(), h.finish())
    }

    /// One gate per line: `id,kind,operands,layer,pair`.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{CIRCUIT_HEADER}\n# n={} final_swaps=omitted\nid,kind,operands,layer,pair\n",
            self.n
        );
        for g in &self.gates {
            let ops: Vec<String> = g.operands.iter().map(|q| q.to_string()).collect();
            let pair = g.origin.pair.map(|(c, t)| format!("{c}-{t}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                g.id,
                g.kind.as_str(),
                ops.join(" "),
                g.origin.layer,
                pair
            ));
        }
        out
    }
}

/// A step of a controlled-phase expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateStep {
    SlotOnControl,
    SlotOnTarget,
    Cnot,
}

/// How a controlled-phase rotation is expanded into the gate alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecompositionPolicy {
    /// `slot(c), slot(t), CNOT, slot(t), CNOT`.
    #[default]
    Standard,
    /// `CNOT, CNOT`, for ablations without local rotation cost.
    CnotOnly,
}

impl FromStr for DecompositionPolicy {
    type Err = WorkloadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(DecompositionPolicy::Standard),
            "cnot-only" => Ok(DecompositionPolicy::CnotOnly),
            other => Err(WorkloadError::UnknownPolicy {
                what: "decomposition policy",
                value: other.to_string(),
            }),
        }
    }
}

impl DecompositionPolicy {
    pub fn template(self) -> &'static [TemplateStep] {
        use TemplateStep::*;
        match self {
            DecompositionPolicy::Standard => &[SlotOnControl, SlotOnTarget, Cnot, SlotOnTarget, Cnot],
            DecompositionPolicy::CnotOnly => &[Cnot, Cnot],
        }
    }
}

/// The default controlled-phase expansion.
pub fn decompose_cphase() -> &'static [TemplateStep] {
    DecompositionPolicy::Standard.template()
}

/// A QFT operation before decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QftOp {
    Hadamard(usize),
    ControlledPhase { control: usize, target: usize },
}

/// The undecomposed QFT: `n` Hadamards and `n(n-1)/2` controlled phases.
pub fn qft_ops(n: usize) -> Vec<QftOp> {
    let mut ops = Vec::with_capacity(n + n * n.saturating_sub(1) / 2);
    for target in 0..n {
        ops.push(QftOp::Hadamard(target));
        for control in target + 1..n {
            ops.push(QftOp::ControlledPhase { control, target });
        }
    }
    ops
}

/// QFT over `n` qubits with the default decomposition.
pub fn qft_circuit(n: usize) -> Circuit {
    qft_circuit_with(n, DecompositionPolicy::Standard)
}

pub fn qft_circuit_with(n: usize, policy: DecompositionPolicy) -> Circuit {
    let mut gates = Vec::new();
    let mut push = |kind, operands: Vec<usize>, origin| {
        let id = gates.len();
        gates.push(Gate {
            id,
            kind,
            operands,
            origin,
        });
    };
    for op in qft_ops(n) {
        match op {
            QftOp::Hadamard(t) => push(GateKind::H, vec![t], GateOrigin { layer: t, pair: None }),
            QftOp::ControlledPhase { control, target } => {
                let origin = GateOrigin {
                    layer: target,
                    pair: Some((control, target)),
                };
                for step in policy.template() {
                    match step {
                        TemplateStep::SlotOnControl => push(GateKind::LocalRotationSlot, vec![control], origin),
                        TemplateStep::SlotOnTarget => push(GateKind::LocalRotationSlot, vec![target], origin),
                        TemplateStep::Cnot => push(GateKind::Cnot, vec![control, target], origin),
                    }
                }
            }
        }
    }
    Circuit { n, gates }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlacementPolicy {
    /// Qubit `i` goes to node `i / q`.
    #[default]
    Block,
    /// Qubit `i` goes to node `i mod N`.
    RoundRobin,
}

impl FromStr for PlacementPolicy {
    type Err = WorkloadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "block" => Ok(PlacementPolicy::Block),
            "round-robin" => Ok(PlacementPolicy::RoundRobin),
            other => Err(WorkloadError::UnknownPolicy {
                what: "placement policy",
                value: other.to_string(),
            }),
        }
    }
}

impl fmt::Display for PlacementPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlacementPolicy::Block => "block",
            PlacementPolicy::RoundRobin => "round-robin",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitSite {
    pub group: usize,
    pub node: NodeId,
    pub slot: usize,
}

/// Logical qubit to end-node assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub q: usize,
    pub assignment: Vec<QubitSite>,
}

impl Placement {
    /// Places `n` qubits on `nodes` machines of capacity `q`, without any
    /// group structure (every node is its own group).
    pub fn generic(n: usize, nodes: usize, q: usize, policy: PlacementPolicy) -> Result<Self, WorkloadError> {
        Self::with_groups(n, nodes, q, policy, |node| node)
    }

    fn with_groups(
        n: usize,
        nodes: usize,
        q: usize,
        policy: PlacementPolicy,
        group_of: impl Fn(usize) -> usize,
    ) -> Result<Self, WorkloadError> {
        if q == 0 {
            return Err(WorkloadError::ZeroCapacity);
        }
        let capacity = nodes * q;
        if n > capacity {
            return Err(WorkloadError::CapacityExceeded { n, nodes, q, capacity });
        }
        let assignment = (0..n)
            .map(|i| {
                let (node, slot) = match policy {
                    PlacementPolicy::Block => (i / q, i % q),
                    PlacementPolicy::RoundRobin => (i % nodes, i / nodes),
                };
                QubitSite {
                    group: group_of(node),
                    node: NodeId(node),
                    slot,
                }
            })
            .collect();
        Ok(Placement { q, assignment })
    }

    pub fn node_of(&self, qubit: usize) -> Option<NodeId> {
        self.assignment.get(qubit).map(|s| s.node)
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Checks slot uniqueness and the per-node capacity.
    pub fn validate(&self) -> Result<(), String> {
        let mut seen = std::collections::BTreeSet::new();
        for (qubit, site) in self.assignment.iter().enumerate() {
            if site.slot >= self.q {
                return Err(format!("qubit {qubit} uses slot {} of {}", site.slot, self.q));
            }
            if !seen.insert((site.node, site.slot)) {
                return Err(format!("{} slot {} hosts two qubits", site.node, site.slot));
            }
        }
        Ok(())
    }

    /// Number of CNOTs in `circuit` whose operands sit on different nodes.
    pub fn remote_cnot_count(&self, circuit: &Circuit) -> usize {
        circuit
            .gates
            .iter()
            .filter(|g| g.is_two_qubit() && self.node_of(g.operands[0]) != self.node_of(g.operands[1]))
            .count()
    }
}

/// Places `n` logical qubits on the end nodes of `topology`, group-major.
pub fn place_qubits(
    n: usize,
    topology: &QFlyTopology,
    q: usize,
    policy: PlacementPolicy,
) -> Result<Placement, WorkloadError> {
    let p = topology.nodes_per_group();
    Placement::with_groups(n, topology.node_count(), q, policy, |node| node / p)
}
