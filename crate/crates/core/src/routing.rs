//! Two-arm optical paths and per-round connection assignment.
//!
//! A connection between end nodes `u` and `v` is a pair of arms, one per
//! node, that meet at the two input ports of one BSA. In the half-duplex
//! variants both arms enter the BSA through a group switch. In the full-duplex
//! variant a node's own BSA takes that node's direct fiber on port 0 and a
//! switched arm on port 1.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::RoutingError;
use crate::topology::{BsaId, FiberId, NodeId, QFlyTopology};

/// Default number of extra inter-group hops a bypass route may take.
pub const DEFAULT_MAX_EXTRA_HOPS: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InPort {
    Node { local: usize },
    Fiber { fiber: FiberId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OutPort {
    Bsa { index: usize, port: u8 },
    Fiber { fiber: FiberId },
}

/// One input-to-output connection inside a group switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SwitchPairing {
    pub group: usize,
    pub input: InPort,
    pub output: OutPort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PathElement {
    Switch {
        group: usize,
        input: InPort,
        output: OutPort,
    },
    Fiber {
        fiber: FiberId,
    },
    /// Full-duplex node fiber wired straight into the node's own BSA.
    Direct {
        node: NodeId,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub endpoints: (NodeId, NodeId),
    pub bsa: BsaId,
    /// Arm of `endpoints.0`, from the node to the BSA.
    pub arm_a: Vec<PathElement>,
    /// Arm of `endpoints.1`.
    pub arm_b: Vec<PathElement>,
    pub switch_crossings: usize,
    pub inter_group_hops: usize,
}

impl PathSpec {
    pub fn elements(&self) -> impl Iterator<Item = &PathElement> {
        self.arm_a.iter().chain(&self.arm_b)
    }

    pub fn count_switch_elements(&self) -> usize {
        self.elements()
            .filter(|e| matches!(e, PathElement::Switch { .. }))
            .count()
    }

    pub fn fibers(&self) -> impl Iterator<Item = FiberId> + '_ {
        self.elements().filter_map(|e| match e {
            PathElement::Fiber { fiber } => Some(*fiber),
            _ => None,
        })
    }

    pub fn pairings(&self) -> impl Iterator<Item = SwitchPairing> + '_ {
        self.elements().filter_map(|e| match *e {
            PathElement::Switch { group, input, output } => Some(SwitchPairing { group, input, output }),
            _ => None,
        })
    }

    /// `(node, interface)` pairs the path occupies.
    pub fn interfaces(&self, topology: &QFlyTopology) -> [(NodeId, u8); 2] {
        let iface = |arm: &[PathElement]| -> u8 {
            match arm.first() {
                Some(PathElement::Direct { .. }) => 0,
                _ if topology.variant().is_full_duplex() => 1,
                _ => 0,
            }
        };
        [
            (self.endpoints.0, iface(&self.arm_a)),
            (self.endpoints.1, iface(&self.arm_b)),
        ]
    }

    /// Walks both arms against the topology wiring.
    pub fn validate(&self, topology: &QFlyTopology) -> Result<(), String> {
        let mut seen_ports = BTreeSet::new();
        for (node, arm) in [(self.endpoints.0, &self.arm_a), (self.endpoints.1, &self.arm_b)] {
            let end = topology
                .node(node)
                .ok_or_else(|| format!("{node} is not in the topology"))?;
            let port = walk_arm(topology, end.group, end.local, node, arm, self.bsa)?;
            if !seen_ports.insert(port) {
                return Err(format!("both arms end on port {port} of {}", self.bsa));
            }
        }
        if self.switch_crossings != self.count_switch_elements() {
            return Err(format!(
                "switch_crossings={} but {} switch elements listed",
                self.switch_crossings,
                self.count_switch_elements()
            ));
        }
        let hops = self.fibers().count();
        if self.inter_group_hops != hops {
            return Err(format!("inter_group_hops={} but {hops} fibers", self.inter_group_hops));
        }
        let fibers: BTreeSet<_> = self.fibers().collect();
        if fibers.len() != hops {
            return Err("the arms share a fiber".to_string());
        }
        Ok(())
    }
}

/// Follows one arm and returns the BSA port it lands on.
fn walk_arm(
    topology: &QFlyTopology,
    group: usize,
    local: usize,
    node: NodeId,
    arm: &[PathElement],
    bsa: BsaId,
) -> Result<u8, String> {
    let full_duplex = topology.variant().is_full_duplex();
    if let [PathElement::Direct { node: direct }] = arm {
        if !full_duplex || *direct != node {
            return Err(format!("direct element for {direct} is not wired"));
        }
        if bsa.group != group || bsa.index != local {
            return Err(format!("{node} has no direct fiber to {bsa}"));
        }
        return Ok(0);
    }
    let mut current = group;
    let mut expected_in = InPort::Node { local };
    let mut elements = arm.iter().peekable();
    while let Some(element) = elements.next() {
        let PathElement::Switch {
            group: sw,
            input,
            output,
        } = *element
        else {
            return Err(format!(
                "expected a switch element in group {current}, found {element:?}"
            ));
        };
        if sw != current || input != expected_in {
            return Err(format!("switch {sw} entered through {input:?} out of sequence"));
        }
        match output {
            OutPort::Bsa { index, port } => {
                if elements.peek().is_some() {
                    return Err("elements after the BSA".to_string());
                }
                if sw != bsa.group || index != bsa.index {
                    return Err(format!("arm ends at bsa:{sw}.{index}, path names {bsa}"));
                }
                if index >= topology.bsas_per_group() {
                    return Err(format!("{bsa} does not exist"));
                }
                if full_duplex && port != 1 || port > 1 {
                    return Err(format!("port {port} of {bsa} is not switch-facing"));
                }
                return Ok(port);
            }
            OutPort::Fiber { fiber } => {
                let f = topology.fiber(fiber).ok_or_else(|| format!("{fiber} does not exist"))?;
                if f.src != current {
                    return Err(format!("{fiber} does not leave group {current}"));
                }
                match elements.next() {
                    Some(PathElement::Fiber { fiber: next }) if *next == fiber => {}
                    _ => return Err(format!("{fiber} missing after switch {sw}")),
                }
                current = f.dst;
                expected_in = InPort::Fiber { fiber };
            }
        }
    }
    Err("arm never reaches a BSA".to_string())
}

/// A path with its BSA index left open (half duplex) or fixed (full duplex).
#[derive(Debug, Clone, PartialEq, Eq)]
struct Family {
    bsa_group: usize,
    /// Full duplex: the BSA that is hard-wired to one endpoint.
    fixed_bsa: Option<usize>,
    direct_a: bool,
    direct_b: bool,
    route_a: Vec<FiberId>,
    route_b: Vec<FiberId>,
}

impl Family {
    fn hops(&self) -> usize {
        self.route_a.len() + self.route_b.len()
    }

    fn crossings(&self) -> usize {
        let arm = |direct: bool, route: &[FiberId]| if direct { 0 } else { route.len() + 1 };
        arm(self.direct_a, &self.route_a) + arm(self.direct_b, &self.route_b)
    }

    fn sort_key(&self) -> (usize, usize, usize, Option<usize>, Vec<FiberId>, Vec<FiberId>) {
        (
            self.crossings(),
            self.hops(),
            self.bsa_group,
            self.fixed_bsa,
            self.route_a.clone(),
            self.route_b.clone(),
        )
    }
}

fn build_arm(
    topology: &QFlyTopology,
    node: NodeId,
    direct: bool,
    route: &[FiberId],
    bsa: BsaId,
    port: u8,
) -> Vec<PathElement> {
    if direct {
        return vec![PathElement::Direct { node }];
    }
    let end = topology.node(node).expect("endpoint exists");
    let mut arm = Vec::with_capacity(2 * route.len() + 1);
    let mut group = end.group;
    let mut input = InPort::Node { local: end.local };
    for &fiber in route {
        arm.push(PathElement::Switch {
            group,
            input,
            output: OutPort::Fiber { fiber },
        });
        arm.push(PathElement::Fiber { fiber });
        group = topology.fiber(fiber).expect("route fiber exists").dst;
        input = InPort::Fiber { fiber };
    }
    arm.push(PathElement::Switch {
        group,
        input,
        output: OutPort::Bsa { index: bsa.index, port },
    });
    arm
}

fn make_path(topology: &QFlyTopology, u: NodeId, v: NodeId, family: &Family, index: usize) -> PathSpec {
    let bsa = BsaId {
        group: family.bsa_group,
        index,
    };
    let full_duplex = topology.variant().is_full_duplex();
    let (port_a, port_b) = match (full_duplex, family.direct_a) {
        (false, _) => (0, 1),
        (true, true) => (0, 1),
        (true, false) => (1, 0),
    };
    PathSpec {
        endpoints: (u, v),
        bsa,
        arm_a: build_arm(topology, u, family.direct_a, &family.route_a, bsa, port_a),
        arm_b: build_arm(topology, v, family.direct_b, &family.route_b, bsa, port_b),
        switch_crossings: family.crossings(),
        inter_group_hops: family.hops(),
    }
}

/// Simple directed group routes from `src` of at most `max_len` fibers,
/// keyed by the group they end in.
fn routes_from(topology: &QFlyTopology, src: usize, max_len: usize) -> BTreeMap<usize, Vec<Vec<FiberId>>> {
    fn dfs(
        topology: &QFlyTopology,
        at: usize,
        max_len: usize,
        visited: &mut Vec<bool>,
        route: &mut Vec<FiberId>,
        out: &mut BTreeMap<usize, Vec<Vec<FiberId>>>,
    ) {
        out.entry(at).or_default().push(route.clone());
        if route.len() == max_len {
            return;
        }
        for f in topology.outgoing(at) {
            if visited[f.dst] {
                continue;
            }
            visited[f.dst] = true;
            route.push(f.id);
            dfs(topology, f.dst, max_len, visited, route, out);
            route.pop();
            visited[f.dst] = false;
        }
    }
    let mut out = BTreeMap::new();
    let mut visited = vec![false; topology.groups()];
    visited[src] = true;
    dfs(topology, src, max_len, &mut visited, &mut Vec::new(), &mut out);
    out
}

fn min_hops(topology: &QFlyTopology, u: NodeId, v: NodeId) -> usize {
    let gu = topology.node(u).expect("endpoint exists").group;
    let gv = topology.node(v).expect("endpoint exists").group;
    if topology.variant().is_full_duplex() {
        let from_u = topology.hop_distances_from(gu)[gv];
        let from_v = topology.hop_distances_from(gv)[gu];
        match (from_u, from_v) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => usize::MAX,
        }
    } else {
        topology
            .inter_group_distance(gu, gv)
            .map(|d| d.hops)
            .unwrap_or(usize::MAX)
    }
}

/// Path families with `min_total <= hops <= max_total`, sorted.
fn families(topology: &QFlyTopology, u: NodeId, v: NodeId, min_total: usize, max_total: usize) -> Vec<Family> {
    let nu = *topology.node(u).expect("endpoint exists");
    let nv = *topology.node(v).expect("endpoint exists");
    let mut out = Vec::new();
    if topology.variant().is_full_duplex() {
        // BSA of u: u enters directly, v is switched into u's group, and vice versa.
        for (direct_is_a, owner, other) in [(true, nu, nv), (false, nv, nu)] {
            let routes = routes_from(topology, other.group, max_total);
            for route in routes.get(&owner.group).into_iter().flatten() {
                if route.len() < min_total {
                    continue;
                }
                let (route_a, route_b) = if direct_is_a {
                    (Vec::new(), route.clone())
                } else {
                    (route.clone(), Vec::new())
                };
                out.push(Family {
                    bsa_group: owner.group,
                    fixed_bsa: Some(owner.local),
                    direct_a: direct_is_a,
                    direct_b: !direct_is_a,
                    route_a,
                    route_b,
                });
            }
        }
    } else {
        let from_u = routes_from(topology, nu.group, max_total);
        let from_v = routes_from(topology, nv.group, max_total);
        for (&x, routes_a) in &from_u {
            let Some(routes_b) = from_v.get(&x) else {
                continue;
            };
            for ra in routes_a {
                for rb in routes_b {
                    let hops = ra.len() + rb.len();
                    if hops < min_total || hops > max_total || ra.iter().any(|f| rb.contains(f)) {
                        continue;
                    }
                    out.push(Family {
                        bsa_group: x,
                        fixed_bsa: None,
                        direct_a: false,
                        direct_b: false,
                        route_a: ra.clone(),
                        route_b: rb.clone(),
                    });
                }
            }
        }
    }
    out.sort_by_key(Family::sort_key);
    out
}

/// All valid paths between `u` and `v` using at most `max_extra_hops` more
/// inter-group fibers than the minimum, sorted by switch crossings, then
/// inter-group hops, then BSA.
pub fn find_paths(
    topology: &QFlyTopology,
    u: NodeId,
    v: NodeId,
    max_extra_hops: usize,
) -> Result<Vec<PathSpec>, RoutingError> {
    check_pair(topology, u, v)?;
    let min = min_hops(topology, u, v);
    if min == usize::MAX {
        return Ok(Vec::new());
    }
    let mut paths = Vec::new();
    for family in families(topology, u, v, min, min + max_extra_hops) {
        match family.fixed_bsa {
            Some(index) => paths.push(make_path(topology, u, v, &family, index)),
            None => {
                for index in 0..topology.bsas_per_group() {
                    paths.push(make_path(topology, u, v, &family, index));
                }
            }
        }
    }
    Ok(paths)
}

fn check_pair(topology: &QFlyTopology, u: NodeId, v: NodeId) -> Result<(), RoutingError> {
    for node in [u, v] {
        if topology.node(node).is_none() {
            return Err(RoutingError::UnknownNode(node));
        }
    }
    if u == v {
        return Err(RoutingError::SelfConnection(u));
    }
    Ok(())
}

/// A connection request between two end nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Request {
    pub id: usize,
    pub a: NodeId,
    pub b: NodeId,
}

impl Request {
    pub fn new(id: usize, a: NodeId, b: NodeId) -> Self {
        Request { id, a, b }
    }
}

/// Optical resources claimed by the granted paths of one round.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceUsage {
    pub bsas: BTreeSet<BsaId>,
    pub fibers: BTreeSet<FiberId>,
    pub pairings: BTreeSet<SwitchPairing>,
    pub node_interfaces: BTreeSet<(NodeId, u8)>,
}

impl ResourceUsage {
    fn conflicts(&self, topology: &QFlyTopology, path: &PathSpec) -> bool {
        if self.bsas.contains(&path.bsa) || path.fibers().any(|f| self.fibers.contains(&f)) {
            return true;
        }
        if path
            .interfaces(topology)
            .iter()
            .any(|i| self.node_interfaces.contains(i))
        {
            return true;
        }
        path.pairings().any(|p| {
            self.pairings
                .iter()
                .any(|q| q.group == p.group && (q.input == p.input || q.output == p.output))
        })
    }

    fn claim(&mut self, topology: &QFlyTopology, path: &PathSpec) {
        self.bsas.insert(path.bsa);
        self.fibers.extend(path.fibers());
        self.pairings.extend(path.pairings());
        self.node_interfaces.extend(path.interfaces(topology));
    }
}

/// Outcome of routing one round of requests.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoundAssignment {
    pub granted: BTreeMap<usize, PathSpec>,
    pub blocked: BTreeSet<usize>,
    pub resources_used: ResourceUsage,
}

impl RoundAssignment {
    /// Recomputes resource use from the granted paths and checks that no
    /// BSA, fiber, switch port or node interface is claimed twice.
    pub fn validate(&self, topology: &QFlyTopology) -> Result<(), String> {
        let mut bsas = BTreeSet::new();
        let mut fibers = BTreeSet::new();
        let mut inputs = BTreeSet::new();
        let mut outputs = BTreeSet::new();
        let mut interfaces = BTreeSet::new();
        let mut nodes = BTreeSet::new();
        for (id, path) in &self.granted {
            if self.blocked.contains(id) {
                return Err(format!("request {id} is both granted and blocked"));
            }
            path.validate(topology).map_err(|e| format!("request {id}: {e}"))?;
            if !bsas.insert(path.bsa) {
                return Err(format!("{} used twice", path.bsa));
            }
            for f in path.fibers() {
                if !fibers.insert(f) {
                    return Err(format!("{f} used twice"));
                }
            }
            for p in path.pairings() {
                if !inputs.insert((p.group, p.input)) {
                    return Err(format!("switch {} input {:?} used twice", p.group, p.input));
                }
                if !outputs.insert((p.group, p.output)) {
                    return Err(format!("switch {} output {:?} used twice", p.group, p.output));
                }
            }
            for i in path.interfaces(topology) {
                if !interfaces.insert(i) {
                    return Err(format!("{} interface {} used twice", i.0, i.1));
                }
            }
            for n in [path.endpoints.0, path.endpoints.1] {
                if !nodes.insert(n) {
                    return Err(format!("{n} serves two connections"));
                }
            }
        }
        Ok(())
    }

    /// All switch pairings of the round, i.e. the switch state it needs.
    pub fn switch_state(&self) -> BTreeSet<SwitchPairing> {
        self.resources_used.pairings.clone()
    }

    pub fn trace_record(&self, round: usize) -> RoundTrace<'_> {
        RoundTrace {
            round,
            grants: self
                .granted
                .iter()
                .map(|(&request, path)| GrantTrace { request, path })
                .collect(),
            blocked: self.blocked.iter().copied().collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct GrantTrace<'a> {
    pub request: usize,
    pub path: &'a PathSpec,
}

/// Serializable record of one routed round.
#[derive(Debug, Serialize)]
pub struct RoundTrace<'a> {
    pub round: usize,
    pub grants: Vec<GrantTrace<'a>>,
    pub blocked: Vec<usize>,
}

/// Decides the order in which a round's requests are considered.
pub trait ArbitrationPolicy {
    fn order(&self, requests: &[Request]) -> Vec<usize>;
}

/// Requests are served in the order they were submitted.
#[derive(Debug, Clone, Copy, Default)]
pub struct InOrder;

impl ArbitrationPolicy for InOrder {
    fn order(&self, requests: &[Request]) -> Vec<usize> {
        (0..requests.len()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingOptions {
    pub max_extra_hops: usize,
    /// Only the first `n` BSAs of every pool may be used.
    pub usable_bsas: Option<usize>,
}

impl Default for RoutingOptions {
    fn default() -> Self {
        RoutingOptions {
            max_extra_hops: DEFAULT_MAX_EXTRA_HOPS,
            usable_bsas: None,
        }
    }
}

/// Grants `requests` greedily in input order, giving each the cheapest
/// conflict-free path (lowest free BSA index first).
pub fn route_round(
    topology: &QFlyTopology,
    requests: &[Request],
    max_extra_hops: usize,
) -> Result<RoundAssignment, RoutingError> {
    let options = RoutingOptions {
        max_extra_hops,
        usable_bsas: None,
    };
    route_round_with(topology, requests, &options, &InOrder)
}

pub fn route_round_with(
    topology: &QFlyTopology,
    requests: &[Request],
    options: &RoutingOptions,
    policy: &dyn ArbitrationPolicy,
) -> Result<RoundAssignment, RoutingError> {
    let mut seen = BTreeSet::new();
    for r in requests {
        check_pair(topology, r.a, r.b)?;
        for n in [r.a, r.b] {
            if !seen.insert(n) {
                return Err(RoutingError::NodeReused(n));
            }
        }
    }
    let bsas = topology.bsas_per_group();
    let usable = options.usable_bsas.unwrap_or(usize::MAX).min(bsas);
    if usable == 0 {
        return Err(RoutingError::NoUsableBsas);
    }
    if topology.variant().is_full_duplex() && usable < bsas {
        return Err(RoutingError::BsaCapOnOwnedBsas { usable, bsas });
    }
    let mut assignment = RoundAssignment::default();
    for idx in policy.order(requests) {
        let r = requests[idx];
        match pick_path(topology, r, options.max_extra_hops, usable, &assignment.resources_used) {
            Some(path) => {
                assignment.resources_used.claim(topology, &path);
                assignment.granted.insert(r.id, path);
            }
            None => {
                assignment.blocked.insert(r.id);
            }
        }
    }
    Ok(assignment)
}

fn pick_path(
    topology: &QFlyTopology,
    r: Request,
    max_extra_hops: usize,
    usable: usize,
    used: &ResourceUsage,
) -> Option<PathSpec> {
    let min = min_hops(topology, r.a, r.b);
    if min == usize::MAX {
        return None;
    }
    let try_families = |lo: usize, hi: usize| {
        for family in families(topology, r.a, r.b, lo, hi) {
            let candidates: Vec<usize> = match family.fixed_bsa {
                Some(index) => vec![index],
                None => (0..usable).collect(),
            };
            for index in candidates {
                if index >= usable {
                    continue;
                }
                let path = make_path(topology, r.a, r.b, &family, index);
                if !used.conflicts(topology, &path) {
                    return Some(path);
                }
            }
        }
        None
    };
    try_families(min, min).or_else(|| {
        if max_extra_hops == 0 {
            None
        } else {
            try_families(min + 1, min + max_extra_hops)
        }
    })
}
