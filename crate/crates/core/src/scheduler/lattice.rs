//! Nearest-neighbour 2D lattice baseline.
//!
//! Nodes sit on a grid and each node links directly to its up to four
//! neighbours. A CNOT between non-neighbours is served by an entanglement
//! swapping chain along a shortest Manhattan route; every node on the chain
//! is reserved for the round. Without memories a chain only succeeds when
//! every link does, so its loss is the per-link loss times the link count.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{run, RoundRouter, Routed, Schedule, TimingConfig, TraceAssignment};
use crate::error::ScheduleError;
use crate::routing::Request;
use crate::workload::{Circuit, Placement};

/// Loss of one lattice link: the Bell measurement alone, no switches.
pub const DEFAULT_LATTICE_LINK_DB: f64 = 3.010_299_956_639_812;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeGrid {
    pub rows: usize,
    pub cols: usize,
}

impl LatticeGrid {
    /// Smallest near-square grid holding `nodes` nodes.
    pub fn for_nodes(nodes: usize) -> Self {
        let rows = (1..).find(|r| r * r >= nodes).unwrap_or(1).max(1);
        let cols = nodes.div_ceil(rows).max(1);
        LatticeGrid { rows, cols }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major coordinates of a node.
    pub fn coords(&self, node: usize) -> (usize, usize) {
        (node / self.cols, node % self.cols)
    }

    pub fn node_at(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn manhattan(&self, a: usize, b: usize) -> usize {
        let (ra, ca) = self.coords(a);
        let (rb, cb) = self.coords(b);
        ra.abs_diff(rb) + ca.abs_diff(cb)
    }

    /// Nodes from `a` to `b`, walking columns first when `columns_first`.
    pub fn route(&self, a: usize, b: usize, columns_first: bool) -> Vec<usize> {
        let (mut r, mut c) = self.coords(a);
        let (rb, cb) = self.coords(b);
        let mut nodes = vec![a];
        let step = |x: &mut usize, target: usize| {
            if *x < target {
                *x += 1
            } else {
                *x -= 1
            }
        };
        for phase in 0..2 {
            let horizontal = (phase == 0) == columns_first;
            if horizontal {
                while c != cb {
                    step(&mut c, cb);
                    nodes.push(self.node_at(r, c));
                }
            } else {
                while r != rb {
                    step(&mut r, rb);
                    nodes.push(self.node_at(r, c));
                }
            }
        }
        nodes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub grid: LatticeGrid,
    pub timing: TimingConfig,
    pub link_loss_db: f64,
}

impl LatticeConfig {
    pub fn new(grid: LatticeGrid, timing: TimingConfig) -> Self {
        LatticeConfig {
            grid,
            timing,
            link_loss_db: DEFAULT_LATTICE_LINK_DB,
        }
    }
}

/// A swapping chain serving one request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeChain {
    pub request: usize,
    /// Every node on the chain, endpoints included.
    pub nodes: Vec<usize>,
}

impl LatticeChain {
    pub fn links(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn intermediate(&self) -> &[usize] {
        &self.nodes[1..self.nodes.len() - 1]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainAssignment {
    pub chains: Vec<LatticeChain>,
    pub blocked: Vec<usize>,
}

impl TraceAssignment for ChainAssignment {
    fn trace_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("chains serialize")
    }
}

struct LatticeRouter<'a> {
    config: &'a LatticeConfig,
}

impl RoundRouter for LatticeRouter<'_> {
    type Assignment = ChainAssignment;
    /// Active links, smaller node first.
    type State = BTreeSet<(usize, usize)>;

    fn route(&self, requests: &[Request]) -> Result<Routed<ChainAssignment, Self::State>, ScheduleError> {
        let grid = self.config.grid;
        let mut reserved = BTreeSet::new();
        let mut out = Routed {
            assignment: ChainAssignment::default(),
            granted: Vec::new(),
            blocked: Vec::new(),
            state: BTreeSet::new(),
        };
        for r in requests {
            let chain = [true, false]
                .into_iter()
                .map(|columns_first| grid.route(r.a.0, r.b.0, columns_first))
                .find(|nodes| nodes.iter().all(|n| !reserved.contains(n)));
            match chain {
                Some(nodes) => {
                    reserved.extend(nodes.iter().copied());
                    for w in nodes.windows(2) {
                        out.state.insert((w[0].min(w[1]), w[0].max(w[1])));
                    }
                    let chain = LatticeChain { request: r.id, nodes };
                    out.granted
                        .push((r.id, chain.links() as f64 * self.config.link_loss_db));
                    out.assignment.chains.push(chain);
                }
                None => {
                    out.blocked.push(r.id);
                    out.assignment.blocked.push(r.id);
                }
            }
        }
        Ok(out)
    }
}

/// Runs `circuit` on a 2D lattice with the same epoch/round mechanics as
/// the Q-Fly scheduler. A change of the active link set is charged `t_gs`.
pub fn lattice_baseline(
    circuit: &Circuit,
    placement: &Placement,
    config: &LatticeConfig,
) -> Result<Schedule<ChainAssignment>, ScheduleError> {
    if !(config.link_loss_db.is_finite() && config.link_loss_db >= 0.0) {
        return Err(ScheduleError::Timing(format!(
            "lattice link loss must be non-negative, got {}",
            config.link_loss_db
        )));
    }
    let nodes = super::resolve_nodes(circuit, placement, usize::MAX)?;
    if let Some(&far) = nodes.iter().find(|&&n| n >= config.grid.len()) {
        return Err(ScheduleError::GridTooSmall(far));
    }
    run(circuit, &nodes, &config.timing, &LatticeRouter { config })
}
