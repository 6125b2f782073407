//! Mesh backhaul network graphs.
//!
//! A [`Network`] holds nodes (gateways and client nodes), undirected edges and
//! the directed links derived from them. Edge `e` expands to link `2e`
//! (lower id to higher id) and link `2e + 1` (the reverse), so the reverse of
//! link `l` is always `l ^ 1`.

mod cluster;
mod generate;

use std::collections::{HashSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use cluster::{
    cluster_by_gateway, cluster_groups, partition_by_gateway, partition_groups, split_gateways_by_x,
};
pub use generate::{generate_suburban, generate_urban_grid, GenParams, UrbanParams};

/// Largest undirected degree allowed for any node.
pub const MAX_DEGREE: usize = 6;

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("edge ({0}, {1}) is a self-loop or a duplicate")]
    DuplicateOrSelfLoop(usize, usize),
    #[error("edge references unknown node {0}")]
    UnknownNode(usize),
    #[error("node {0} has no path to a gateway")]
    DisconnectedNetwork(usize),
    #[error("node {node} has degree {degree}, above the cap of {MAX_DEGREE}")]
    DegreeViolation { node: usize, degree: usize },
    #[error("invalid node {id}: {reason}")]
    InvalidNode { id: usize, reason: String },
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("topology generation failed for seed {seed}: {reason}")]
    GenerationFailure { seed: u64, reason: String },
    #[error("clustering needs at least 2 gateways, found {0}")]
    TooFewGateways(usize),
    #[error("network file: {0}")]
    Io(#[from] std::io::Error),
    #[error("network file is not valid: {0}")]
    Format(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub height: f64,
    pub is_gateway: bool,
    /// Street canyons this node stands in (urban networks only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub canyons: Vec<usize>,
}

impl Node {
    pub fn distance(&self, other: &Node) -> f64 {
        let (dx, dy, dz) = (
            self.x - other.x,
            self.y - other.y,
            self.height - other.height,
        );
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn ground_distance(&self, other: &Node) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: usize,
    pub tx: usize,
    pub rx: usize,
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Environment {
    Suburban,
    Urban,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Street runs along x; walls at constant y.
    Horizontal,
    /// Street runs along y; walls at constant x.
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Canyon {
    pub id: usize,
    pub axis: Axis,
    /// Coordinate of the street center line (y for horizontal, x for vertical).
    pub center: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreetGeometry {
    pub street_width: f64,
    pub block_x: f64,
    pub block_y: f64,
    pub canyons: Vec<Canyon>,
}

impl StreetGeometry {
    /// Canyon shared by two nodes, if any (lowest id first).
    pub fn shared_canyon(&self, a: &Node, b: &Node) -> Option<&Canyon> {
        a.canyons
            .iter()
            .find(|c| b.canyons.contains(c))
            .map(|&c| &self.canyons[c])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    /// Undirected edges, each stored with the lower node id first.
    pub edges: Vec<(usize, usize)>,
    pub environment: Environment,
    pub streets: Option<StreetGeometry>,
    pub seed: Option<u64>,
    in_links: Vec<Vec<usize>>,
    out_links: Vec<Vec<usize>>,
}

/// Build a network from nodes and undirected edges, checking every invariant.
pub fn build_network(nodes: Vec<Node>, edges: &[(usize, usize)]) -> Result<Network, NetError> {
    build_network_in(nodes, edges, Environment::Suburban, None, None)
}

pub(crate) fn build_network_in(
    nodes: Vec<Node>,
    edges: &[(usize, usize)],
    environment: Environment,
    streets: Option<StreetGeometry>,
    seed: Option<u64>,
) -> Result<Network, NetError> {
    for (i, n) in nodes.iter().enumerate() {
        if n.id != i {
            return Err(NetError::InvalidNode {
                id: n.id,
                reason: format!("expected contiguous id {i}"),
            });
        }
        if !(n.x.is_finite() && n.y.is_finite()) {
            return Err(NetError::InvalidNode {
                id: i,
                reason: "position is not finite".into(),
            });
        }
        if !(n.height > 0.0 && n.height.is_finite()) {
            return Err(NetError::InvalidNode {
                id: i,
                reason: format!("height {} is not positive", n.height),
            });
        }
    }
    let mut seen = HashSet::new();
    let mut norm = Vec::with_capacity(edges.len());
    for &(a, b) in edges {
        for v in [a, b] {
            if v >= nodes.len() {
                return Err(NetError::UnknownNode(v));
            }
        }
        let e = (a.min(b), a.max(b));
        if a == b || !seen.insert(e) {
            return Err(NetError::DuplicateOrSelfLoop(a, b));
        }
        norm.push(e);
    }
    let mut degree = vec![0usize; nodes.len()];
    for &(a, b) in &norm {
        degree[a] += 1;
        degree[b] += 1;
    }
    if let Some((node, &degree)) = degree.iter().enumerate().find(|(_, &d)| d > MAX_DEGREE) {
        return Err(NetError::DegreeViolation { node, degree });
    }

    let mut links = Vec::with_capacity(2 * norm.len());
    let mut in_links = vec![Vec::new(); nodes.len()];
    let mut out_links = vec![Vec::new(); nodes.len()];
    for &(a, b) in &norm {
        let length = nodes[a].distance(&nodes[b]);
        for (tx, rx) in [(a, b), (b, a)] {
            let id = links.len();
            links.push(Link { id, tx, rx, length });
            out_links[tx].push(id);
            in_links[rx].push(id);
        }
    }
    let net = Network {
        nodes,
        links,
        edges: norm,
        environment,
        streets,
        seed,
        in_links,
        out_links,
    };
    if let Some(v) = net.first_unreachable() {
        return Err(NetError::DisconnectedNetwork(v));
    }
    Ok(net)
}

impl Network {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    /// Number of non-gateway nodes (N).
    pub fn num_clients(&self) -> usize {
        self.nodes.iter().filter(|n| !n.is_gateway).count()
    }

    pub fn gateways(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|n| n.is_gateway)
            .map(|n| n.id)
            .collect()
    }

    /// Non-gateway node ids in increasing order.
    pub fn clients(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|n| !n.is_gateway)
            .map(|n| n.id)
            .collect()
    }

    pub fn in_links(&self, node: usize) -> &[usize] {
        &self.in_links[node]
    }

    pub fn out_links(&self, node: usize) -> &[usize] {
        &self.out_links[node]
    }

    pub fn reverse(&self, link: usize) -> usize {
        link ^ 1
    }

    pub fn degree(&self, node: usize) -> usize {
        self.out_links[node].len()
    }

    /// Half-duplex conflict: one link's transmitter is the other's receiver.
    pub fn conflict(&self, k: usize, l: usize) -> bool {
        let (a, b) = (&self.links[k], &self.links[l]);
        a.tx == b.rx || a.rx == b.tx
    }

    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.out_links[node].iter().map(|&l| self.links[l].rx)
    }

    /// Hop distance from the nearest gateway for each node (`usize::MAX` if unreachable).
    pub fn gateway_hops(&self) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.nodes.len()];
        let mut queue = VecDeque::new();
        for g in self.gateways() {
            dist[g] = 0;
            queue.push_back(g);
        }
        while let Some(v) = queue.pop_front() {
            for w in self.neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    fn first_unreachable(&self) -> Option<usize> {
        // Every edge is bidirectional, so reachability in one direction implies the other.
        self.gateway_hops().iter().position(|&d| d == usize::MAX)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&NetworkFile::from(self)).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Network, NetError> {
        let f: NetworkFile = serde_json::from_str(text)?;
        f.into_network()
    }

    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Network, NetError> {
        Network::from_json(&std::fs::read_to_string(path)?)
    }
}

/// On-disk schema of a network.
#[derive(Debug, Serialize, Deserialize)]
struct NetworkFile {
    format: String,
    environment: Environment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    streets: Option<StreetGeometry>,
    nodes: Vec<Node>,
    edges: Vec<(usize, usize)>,
}

const FORMAT: &str = "backhaul-network/1";

impl From<&Network> for NetworkFile {
    fn from(n: &Network) -> Self {
        NetworkFile {
            format: FORMAT.into(),
            environment: n.environment,
            seed: n.seed,
            streets: n.streets.clone(),
            nodes: n.nodes.clone(),
            edges: n.edges.clone(),
        }
    }
}

impl NetworkFile {
    fn into_network(self) -> Result<Network, NetError> {
        if self.format != FORMAT {
            return Err(NetError::InvalidParams(format!(
                "unsupported network format '{}'",
                self.format
            )));
        }
        build_network_in(
            self.nodes,
            &self.edges,
            self.environment,
            self.streets,
            self.seed,
        )
    }
}

#[cfg(test)]
pub(crate) fn test_node(id: usize, x: f64, y: f64, gw: bool) -> Node {
    Node {
        id,
        x,
        y,
        height: 6.0,
        is_gateway: gw,
        canyons: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_node_network() {
        let net = build_network(
            vec![test_node(0, 0.0, 0.0, true), test_node(1, 50.0, 0.0, false)],
            &[(0, 1)],
        )
        .unwrap();
        assert_eq!(net.num_links(), 2);
        assert_eq!(net.num_clients(), 1);
        assert_eq!(net.reverse(0), 1);
        assert!(net.conflict(0, 1));
    }

    #[test]
    fn chain_network() {
        let nodes = vec![
            test_node(0, 0.0, 0.0, true),
            test_node(1, 50.0, 0.0, false),
            test_node(2, 100.0, 0.0, false),
        ];
        let net = build_network(nodes, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(net.num_links(), 4);
        assert_eq!(net.num_clients(), 2);
        assert_eq!(net.in_links(1), &[0, 3]);
        assert_eq!(net.out_links(1), &[1, 2]);
    }

    #[test]
    fn self_loop_and_duplicate_rejected() {
        let nodes = vec![test_node(0, 0.0, 0.0, true), test_node(1, 50.0, 0.0, false)];
        assert!(matches!(
            build_network(nodes.clone(), &[(0, 0)]),
            Err(NetError::DuplicateOrSelfLoop(0, 0))
        ));
        assert!(matches!(
            build_network(nodes, &[(0, 1), (1, 0)]),
            Err(NetError::DuplicateOrSelfLoop(1, 0))
        ));
    }

    #[test]
    fn disconnected_client_rejected() {
        let nodes = vec![
            test_node(0, 0.0, 0.0, true),
            test_node(1, 50.0, 0.0, false),
            test_node(2, 90.0, 0.0, false),
        ];
        assert!(matches!(
            build_network(nodes, &[(0, 1)]),
            Err(NetError::DisconnectedNetwork(2))
        ));
    }

    #[test]
    fn degree_cap_enforced() {
        let mut nodes = vec![test_node(0, 0.0, 0.0, true)];
        let mut edges = Vec::new();
        for i in 1..=7 {
            nodes.push(test_node(i, 20.0 * i as f64, 5.0, false));
            edges.push((0, i));
        }
        assert!(matches!(
            build_network(nodes, &edges),
            Err(NetError::DegreeViolation { node: 0, degree: 7 })
        ));
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let nodes = vec![
            test_node(0, 0.1, 0.2, true),
            test_node(1, 50.123456789012345, 1.0 / 3.0, false),
        ];
        let net = build_network(nodes, &[(0, 1)]).unwrap();
        let back = Network::from_json(&net.to_json()).unwrap();
        assert_eq!(net, back);
        assert_eq!(net.to_json(), back.to_json());
    }
}
