use thiserror::Error;

use crate::topology::{NodeId, Variant};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("a Q-Fly needs g >= 3 groups, got g={g}")]
    TooFewGroups { g: usize },
    #[error("a group needs p >= 2 end nodes, got p={p}")]
    GroupTooSmall { p: usize },
    #[error("{variant} needs an even group size (2b = p), got p={p}")]
    OddHalfDuplexGroup { variant: Variant, p: usize },
    #[error("no legal {variant} configuration exists for radix k={k}")]
    NoConfiguration { variant: Variant, k: usize },
    #[error("group {group} out of range for g={g}")]
    GroupOutOfRange { group: usize, g: usize },
    #[error("groups {i} and {j} cannot reach a common BSA")]
    Disconnected { i: usize, j: usize },
    #[error("unknown topology variant {0:?} (expected sphd, dphd or dpfd)")]
    UnknownVariant(String),
    #[error("topology invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("switch radix must be >= 2, got k={0}")]
    RadixTooSmall(usize),
    #[error("loss parameter {name} must be finite and >= 0, got {value}")]
    NegativeParameter { name: &'static str, value: f64 },
    #[error("BSA success probability must be in (0, 1], got {0}")]
    BadSuccessProbability(f64),
    #[error("path references {0}, which is not part of the topology")]
    UnknownElement(String),
    #[error("switch catalog: {0}")]
    Catalog(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoutingError {
    #[error("{0} does not exist in the topology")]
    UnknownNode(NodeId),
    #[error("a connection needs two distinct end nodes, got {0} twice")]
    SelfConnection(NodeId),
    #[error("{0} appears in more than one request of the same round")]
    NodeReused(NodeId),
    #[error("every node owns its BSA in a full-duplex topology, so all {bsas} must stay usable (got {usable})")]
    BsaCapOnOwnedBsas { usable: usize, bsas: usize },
    #[error("usable BSAs must be at least 1")]
    NoUsableBsas,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorkloadError {
    #[error("placing {n} qubits needs {n} slots but only {capacity} exist ({nodes} nodes x q={q})")]
    CapacityExceeded {
        n: usize,
        nodes: usize,
        q: usize,
        capacity: usize,
    },
    #[error("q must be >= 1")]
    ZeroCapacity,
    #[error("gate {gate}: {reason}")]
    BadGate { gate: usize, reason: String },
    #[error("unknown {what} {value:?}")]
    UnknownPolicy { what: &'static str, value: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("logical qubit {0} has no placement")]
    Unplaced(usize),
    #[error("placement refers to node {node} but the machine has {nodes} nodes")]
    PlacementOutOfRange { node: usize, nodes: usize },
    #[error("remote gate {gate} stayed blocked for {rounds} rounds")]
    Unroutable { gate: usize, rounds: usize },
    #[error("placement uses node {0}, which lies outside the lattice grid")]
    GridTooSmall(usize),
    #[error("invalid timing configuration: {0}")]
    Timing(String),
    #[error("schedules derive from different circuits ({0} vs {1})")]
    MismatchedCircuits(String, String),
    #[error("schedule validation failed: {0}")]
    Invalid(String),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Loss(#[from] LossError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("configuration must set {0}")]
    Missing(&'static str),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}
