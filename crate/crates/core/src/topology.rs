//! Q-Fly topology construction.
//!
//! A Q-Fly places `g` groups on a circle. Every group owns one `k x k` optical
//! switch, `p` end nodes and a pool of `b` Bell state analyzers (BSAs). Groups
//! are joined by directed inter-group fibers whose pattern depends on the
//! [`Variant`]. Everything is a deterministic function of `(variant, g, p)`,
//! so two builds with the same parameters are identical.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::TopologyError;

/// The three Q-Fly wiring variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// One fiber per unordered group pair, one interface per end node.
    #[serde(rename = "sphd")]
    SinglePathHalfDuplex,
    /// One fiber per ordered group pair, one interface per end node.
    #[serde(rename = "dphd")]
    DualPathHalfDuplex,
    /// One fiber per ordered group pair, two interfaces per end node; one of
    /// them is wired straight into the node's own BSA.
    #[serde(rename = "dpfd")]
    DualPathFullDuplex,
}

impl Variant {
    pub const ALL: [Variant; 3] = [
        Variant::SinglePathHalfDuplex,
        Variant::DualPathHalfDuplex,
        Variant::DualPathFullDuplex,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            Variant::SinglePathHalfDuplex => "sphd",
            Variant::DualPathHalfDuplex => "dphd",
            Variant::DualPathFullDuplex => "dpfd",
        }
    }

    pub fn is_full_duplex(self) -> bool {
        matches!(self, Variant::DualPathFullDuplex)
    }

    pub fn is_dual_path(self) -> bool {
        !matches!(self, Variant::SinglePathHalfDuplex)
    }

    /// Radix of the group switch for `g` groups of `p` nodes.
    pub fn radix(self, g: usize, p: usize) -> usize {
        match self {
            Variant::SinglePathHalfDuplex => p + g / 2,
            Variant::DualPathHalfDuplex | Variant::DualPathFullDuplex => p + g - 1,
        }
    }

    /// BSAs per group for `p` nodes per group.
    pub fn bsas_per_group(self, p: usize) -> usize {
        if self.is_full_duplex() {
            p
        } else {
            p / 2
        }
    }

    /// Optical interfaces per end node.
    pub fn interfaces(self) -> u8 {
        if self.is_full_duplex() {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Variant {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sphd" | "single-path-half-duplex" | "singlepathhalfduplex" => Ok(Variant::SinglePathHalfDuplex),
            "dphd" | "dual-path-half-duplex" | "dualpathhalfduplex" => Ok(Variant::DualPathHalfDuplex),
            "dpfd" | "dual-path-full-duplex" | "dualpathfullduplex" => Ok(Variant::DualPathFullDuplex),
            other => Err(TopologyError::UnknownVariant(other.to_string())),
        }
    }
}

/// Global end-node index, `group * p + local`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node:{}", self.0)
    }
}

/// Group switch id; there is exactly one switch per group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SwitchId(pub usize);

impl fmt::Display for SwitchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "switch:{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BsaId {
    pub group: usize,
    pub index: usize,
}

impl fmt::Display for BsaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "bsa:{}.{}", self.group, self.index)
    }
}

/// Index into [`QFlyTopology::inter_group_fibers`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FiberId(pub usize);

impl fmt::Display for FiberId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "fiber:{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndNode {
    pub id: NodeId,
    pub group: usize,
    pub local: usize,
    pub interfaces: u8,
}

/// A directed switch-to-switch fiber.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterGroupFiber {
    pub id: FiberId,
    pub src: usize,
    pub dst: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    NodeToSwitch,
    SwitchToBsa,
    SwitchToSwitch,
    NodeToBsa,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::NodeToSwitch => "node_to_switch",
            EdgeKind::SwitchToBsa => "switch_to_bsa",
            EdgeKind::SwitchToSwitch => "switch_to_switch",
            EdgeKind::NodeToBsa => "node_to_bsa",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Endpoint {
    Node { node: NodeId, interface: u8 },
    Switch { switch: SwitchId },
    BsaPort { bsa: BsaId, port: u8 },
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Node { node, interface } => write!(f, "{node}/{interface}"),
            Endpoint::Switch { switch } => write!(f, "{switch}"),
            Endpoint::BsaPort { bsa, port } => write!(f, "{bsa}/{port}"),
        }
    }
}

/// One directed optical edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub kind: EdgeKind,
    pub from: Endpoint,
    pub to: Endpoint,
    /// Set for switch-to-switch edges.
    pub fiber: Option<FiberId>,
}

/// Scalar characteristics of one Q-Fly instance (one row of a scaling table).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologySummary {
    pub variant: Variant,
    pub k: usize,
    pub n: usize,
    pub g: usize,
    pub p: usize,
    pub b: usize,
    pub d: usize,
}

impl fmt::Display for TopologySummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}, {}, {}, {}, {}, {}",
            self.k, self.n, self.g, self.p, self.b, self.d
        )
    }
}

/// Shortest two-arm connection between two groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupDistance {
    /// Inter-group fibers traversed, summed over both arms.
    pub hops: usize,
    /// Group hosting the BSA of a shortest connection. For a one-hop
    /// connection this is the destination of the fiber that is used.
    pub bsa_group: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QFlyTopology {
    variant: Variant,
    g: usize,
    p: usize,
    k: usize,
    b: usize,
    nodes: Vec<EndNode>,
    switches: Vec<SwitchId>,
    inter_group_fibers: Vec<InterGroupFiber>,
    edges: Vec<Edge>,
    #[serde(skip)]
    fiber_matrix: Vec<Option<FiberId>>,
}

/// Constructs a Q-Fly of `g` groups with `p` end nodes each.
pub fn build_topology(variant: Variant, g: usize, p: usize) -> Result<QFlyTopology, TopologyError> {
    QFlyTopology::build(variant, g, p)
}

/// Largest Q-Fly (by end-node count) that a `k`-radix switch supports.
///
/// Group sizes are restricted to even values for every variant: the
/// half-duplex variants need `2b = p`, and the full-duplex scaling rows
/// reuse the same `(g, p)` pairs as the dual-path half-duplex ones. Ties in
/// `N` go to the larger `g`.
pub fn max_topology_for_radix(variant: Variant, k: usize) -> Result<TopologySummary, TopologyError> {
    let mut best: Option<(usize, usize)> = None;
    let mut g = 3;
    loop {
        let overhead = match variant {
            Variant::SinglePathHalfDuplex => g / 2,
            _ => g - 1,
        };
        if overhead + 2 > k {
            break;
        }
        let p = k - overhead;
        if p.is_multiple_of(2) {
            let n = g * p;
            match best {
                Some((bg, bp)) if bg * bp > n => {}
                _ => best = Some((g, p)),
            }
        }
        g += 1;
    }
    let (g, p) = best.ok_or(TopologyError::NoConfiguration { variant, k })?;
    Ok(summary_for(variant, g, p))
}

fn summary_for(variant: Variant, g: usize, p: usize) -> TopologySummary {
    let b = variant.bsas_per_group(p);
    TopologySummary {
        variant,
        k: variant.radix(g, p),
        n: g * p,
        g,
        p,
        b,
        d: 4 * b * g,
    }
}

/// Ordered `(src, dst)` list of the inter-group fibers for a variant.
fn inter_group_pairs(variant: Variant, g: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for src in 0..g {
        match variant {
            Variant::SinglePathHalfDuplex => {
                let reach = (g - 1) / 2;
                for offset in 1..=reach {
                    pairs.push((src, (src + offset) % g));
                }
                // even g: one diameter fiber per antipodal pair, lower index to antipode
                if g.is_multiple_of(2) && src < g / 2 {
                    pairs.push((src, src + g / 2));
                }
            }
            Variant::DualPathHalfDuplex | Variant::DualPathFullDuplex => {
                for offset in 1..g {
                    pairs.push((src, (src + offset) % g));
                }
            }
        }
    }
    pairs
}

impl QFlyTopology {
    fn build(variant: Variant, g: usize, p: usize) -> Result<Self, TopologyError> {
        if g < 3 {
            return Err(TopologyError::TooFewGroups { g });
        }
        if p < 2 {
            return Err(TopologyError::GroupTooSmall { p });
        }
        if !variant.is_full_duplex() && !p.is_multiple_of(2) {
            return Err(TopologyError::OddHalfDuplexGroup { variant, p });
        }
        let k = variant.radix(g, p);
        let b = variant.bsas_per_group(p);
        let interfaces = variant.interfaces();

        let nodes: Vec<EndNode> = (0..g)
            .flat_map(|group| {
                (0..p).map(move |local| EndNode {
                    id: NodeId(group * p + local),
                    group,
                    local,
                    interfaces,
                })
            })
            .collect();
        let switches: Vec<SwitchId> = (0..g).map(SwitchId).collect();

        let inter_group_fibers: Vec<InterGroupFiber> = inter_group_pairs(variant, g)
            .into_iter()
            .enumerate()
            .map(|(i, (src, dst))| InterGroupFiber {
                id: FiberId(i),
                src,
                dst,
            })
            .collect();
        let mut fiber_matrix = vec![None; g * g];
        for f in &inter_group_fibers {
            fiber_matrix[f.src * g + f.dst] = Some(f.id);
        }

        let mut edges = Vec::new();
        for node in &nodes {
            let switch = Endpoint::Switch {
                switch: SwitchId(node.group),
            };
            if variant.is_full_duplex() {
                edges.push(Edge {
                    kind: EdgeKind::NodeToBsa,
                    from: Endpoint::Node {
                        node: node.id,
                        interface: 0,
                    },
                    to: Endpoint::BsaPort {
                        bsa: BsaId {
                            group: node.group,
                            index: node.local,
                        },
                        port: 0,
                    },
                    fiber: None,
                });
                edges.push(Edge {
                    kind: EdgeKind::NodeToSwitch,
                    from: Endpoint::Node {
                        node: node.id,
                        interface: 1,
                    },
                    to: switch,
                    fiber: None,
                });
            } else {
                edges.push(Edge {
                    kind: EdgeKind::NodeToSwitch,
                    from: Endpoint::Node {
                        node: node.id,
                        interface: 0,
                    },
                    to: switch,
                    fiber: None,
                });
            }
        }
        for group in 0..g {
            for index in 0..b {
                let ports: &[u8] = if variant.is_full_duplex() { &[1] } else { &[0, 1] };
                for &port in ports {
                    edges.push(Edge {
                        kind: EdgeKind::SwitchToBsa,
                        from: Endpoint::Switch {
                            switch: SwitchId(group),
                        },
                        to: Endpoint::BsaPort {
                            bsa: BsaId { group, index },
                            port,
                        },
                        fiber: None,
                    });
                }
            }
        }
        for f in &inter_group_fibers {
            edges.push(Edge {
                kind: EdgeKind::SwitchToSwitch,
                from: Endpoint::Switch {
                    switch: SwitchId(f.src),
                },
                to: Endpoint::Switch {
                    switch: SwitchId(f.dst),
                },
                fiber: Some(f.id),
            });
        }

        let topology = QFlyTopology {
            variant,
            g,
            p,
            k,
            b,
            nodes,
            switches,
            inter_group_fibers,
            edges,
            fiber_matrix,
        };
        topology.validate()?;
        Ok(topology)
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn groups(&self) -> usize {
        self.g
    }

    pub fn nodes_per_group(&self) -> usize {
        self.p
    }

    pub fn radix(&self) -> usize {
        self.k
    }

    pub fn bsas_per_group(&self) -> usize {
        self.b
    }

    pub fn node_count(&self) -> usize {
        self.g * self.p
    }

    pub fn detector_count(&self) -> usize {
        4 * self.b * self.g
    }

    pub fn summary(&self) -> TopologySummary {
        summary_for(self.variant, self.g, self.p)
    }

    pub fn nodes(&self) -> &[EndNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Option<&EndNode> {
        self.nodes.get(id.0)
    }

    pub fn switches(&self) -> &[SwitchId] {
        &self.switches
    }

    pub fn inter_group_fibers(&self) -> &[InterGroupFiber] {
        &self.inter_group_fibers
    }

    pub fn fiber(&self, id: FiberId) -> Option<&InterGroupFiber> {
        self.inter_group_fibers.get(id.0)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// The directed fiber `src -> dst`, if one exists.
    pub fn fiber_between(&self, src: usize, dst: usize) -> Option<FiberId> {
        if src >= self.g || dst >= self.g {
            return None;
        }
        self.fiber_matrix[src * self.g + dst]
    }

    /// Fibers leaving group `src`, in fiber-id order.
    pub fn outgoing(&self, src: usize) -> impl Iterator<Item = &InterGroupFiber> + '_ {
        self.inter_group_fibers.iter().filter(move |f| f.src == src)
    }

    /// Directed inter-group hop counts from `src` to every group.
    pub fn hop_distances_from(&self, src: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.g];
        let mut queue = VecDeque::new();
        dist[src] = Some(0);
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            for f in self.outgoing(u) {
                if dist[f.dst].is_none() {
                    dist[f.dst] = Some(du + 1);
                    queue.push_back(f.dst);
                }
            }
        }
        dist
    }

    /// Minimum number of inter-group fibers, summed over both arms, needed to
    /// meet at a common BSA group. Ties prefer the lowest BSA group index.
    pub fn inter_group_distance(&self, i: usize, j: usize) -> Result<GroupDistance, TopologyError> {
        for group in [i, j] {
            if group >= self.g {
                return Err(TopologyError::GroupOutOfRange { group, g: self.g });
            }
        }
        if i == j {
            return Ok(GroupDistance { hops: 0, bsa_group: i });
        }
        let from_i = self.hop_distances_from(i);
        let from_j = self.hop_distances_from(j);
        let best = (0..self.g)
            .filter_map(|x| Some((from_i[x]? + from_j[x]?, x)))
            .min()
            .ok_or(TopologyError::Disconnected { i, j })?;
        Ok(GroupDistance {
            hops: best.0,
            bsa_group: best.1,
        })
    }

    /// Checks every structural invariant of the instance.
    pub fn validate(&self) -> Result<(), TopologyError> {
        let fail = |msg: String| Err(TopologyError::Invariant(msg));
        let (g, p, k, b) = (self.g, self.p, self.k, self.b);
        if self.nodes.len() != g * p {
            return fail(format!("expected {} end nodes, found {}", g * p, self.nodes.len()));
        }
        if self.switches.len() != g {
            return fail(format!("expected {g} switches, found {}", self.switches.len()));
        }
        if k != self.variant.radix(g, p) {
            return fail(format!("radix {k} does not match the {} rule", self.variant));
        }
        if self.variant.is_full_duplex() {
            if b != p {
                return fail(format!("full duplex needs b = p, got b={b}, p={p}"));
            }
        } else if 2 * b != p {
            return fail(format!("half duplex needs 2b = p, got b={b}, p={p}"));
        }
        for node in &self.nodes {
            if node.interfaces != self.variant.interfaces() {
                return fail(format!("{} has {} interfaces", node.id, node.interfaces));
            }
            if node.id.0 != node.group * p + node.local {
                return fail(format!("{} has inconsistent numbering", node.id));
            }
        }

        // inter-group fiber pattern
        let mut count = vec![0usize; g * g];
        for f in &self.inter_group_fibers {
            if f.src == f.dst || f.src >= g || f.dst >= g {
                return fail(format!("fiber {} joins {} -> {}", f.id, f.src, f.dst));
            }
            count[f.src * g + f.dst] += 1;
        }
        for i in 0..g {
            for j in 0..g {
                if i == j {
                    continue;
                }
                let forward = count[i * g + j];
                if self.variant.is_dual_path() {
                    if forward != 1 {
                        return fail(format!("{forward} fibers {i} -> {j}, expected 1"));
                    }
                } else if i < j {
                    let both = forward + count[j * g + i];
                    if both != 1 {
                        return fail(format!("{both} fibers between {i} and {j}, expected 1"));
                    }
                }
            }
        }

        // port counts
        let mut ins = vec![0usize; g];
        let mut outs = vec![0usize; g];
        let mut bsa_ins = vec![0usize; g * b];
        for e in &self.edges {
            if let Endpoint::Switch { switch } = e.to {
                ins[switch.0] += 1;
            }
            if let Endpoint::Switch { switch } = e.from {
                outs[switch.0] += 1;
            }
            if let Endpoint::BsaPort { bsa, .. } = e.to {
                if bsa.group >= g || bsa.index >= b {
                    return fail(format!("edge into unknown {bsa}"));
                }
                bsa_ins[bsa.group * b + bsa.index] += 1;
            }
        }
        let odd_sphd = !self.variant.is_dual_path() && g % 2 == 0;
        for s in 0..g {
            let ok = if odd_sphd {
                // one diameter fiber per antipodal pair leaves one port idle
                ins[s] <= k && outs[s] <= k && ins[s] + outs[s] == 2 * k - 1
            } else {
                ins[s] == k && outs[s] == k
            };
            if !ok {
                return fail(format!(
                    "switch {s} has {} inputs and {} outputs for radix {k}",
                    ins[s], outs[s]
                ));
            }
        }
        if let Some(i) = bsa_ins.iter().position(|&c| c != 2) {
            return fail(format!(
                "bsa:{}.{} has {} inputs",
                i / b.max(1),
                i % b.max(1),
                bsa_ins[i]
            ));
        }
        if self.detector_count() != 4 * b * g {
            return fail("detector count mismatch".to_string());
        }
        Ok(())
    }

    /// Structured JSON export of the node and edge lists.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Export<'a> {
            format: &'static str,
            summary: TopologySummary,
            nodes: &'a [EndNode],
            switches: &'a [SwitchId],
            inter_group_fibers: &'a [InterGroupFiber],
            edges: &'a [Edge],
        }
        let export = Export {
            format: TOPOLOGY_JSON_FORMAT,
            summary: self.summary(),
            nodes: &self.nodes,
            switches: &self.switches,
            inter_group_fibers: &self.inter_group_fibers,
            edges: &self.edges,
        };
        serde_json::to_string_pretty(&export).expect("topology serializes")
    }

    /// Edge-list CSV with a version header line.
    pub fn to_edge_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(TOPOLOGY_CSV_HEADER);
        out.push('\n');
        out.push_str("kind,from,to,fiber\n");
        for e in &self.edges {
            let fiber = e.fiber.map(|f| f.0.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", e.kind.as_str(), e.from, e.to, fiber));
        }
        out
    }
}

pub const TOPOLOGY_JSON_FORMAT: &str = "qfly-topology/1";
pub const TOPOLOGY_CSV_HEADER: &str = "# qfly-topology-edges v1";
