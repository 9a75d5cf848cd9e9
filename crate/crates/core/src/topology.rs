//! Geometric model of the wired data plane and AP wireless coverage.
//!
//! Every node carries a 2-D position and a role. Links are undirected and
//! each endpoint sees the link through a local port; ports are numbered from
//! 1 per node in link-declaration order. Port 0 is reserved for the wireless
//! interface of access points.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Node label, unique within a topology. Vehicles use the same id space for
/// their unicast addresses but are not topology nodes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A 2-D coordinate or direction, in abstract length units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;

    fn sub(self, other: Vec2) -> Vec2 {
        Vec2::new(self.x - other.x, self.y - other.y)
    }
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn is_zero(self) -> bool {
        self.x == 0.0 && self.y == 0.0
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| Vec2::new(self.x / n, self.y / n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Switch,
    Ap,
    Camera,
    Server,
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "switch" => Ok(Role::Switch),
            "ap" => Ok(Role::Ap),
            "camera" => Ok(Role::Camera),
            "server" => Ok(Role::Server),
            other => Err(format!("unknown role `{other}`")),
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Switch => "switch",
            Role::Ap => "ap",
            Role::Camera => "camera",
            Role::Server => "server",
        })
    }
}

/// Local port number on a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Port(pub u16);

impl Port {
    /// The wireless interface of an access point.
    pub const WIRELESS: Port = Port(0);

    pub fn is_wireless(self) -> bool {
        self == Port::WIRELESS
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_wireless() {
            f.write_str("wl")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Dense index of a node inside one [`Topology`].
pub type NodeIx = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub position: Vec2,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub latency_ms: f64,
    pub port_a: Port,
    pub port_b: Port,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Adjacent {
    peer: NodeIx,
    port: Port,
    link: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("duplicate node `{0}`")]
    DuplicateNode(NodeId),
    #[error("empty node id")]
    EmptyId,
    #[error("node `{0}` has a non-finite position")]
    BadPosition(NodeId),
    #[error("link from `{0}` to itself")]
    SelfLoop(NodeId),
    #[error("parallel link between `{0}` and `{1}`")]
    ParallelLink(NodeId, NodeId),
    #[error("link `{0}`-`{1}` has invalid latency {2}")]
    BadLatency(NodeId, NodeId, f64),
    #[error("invalid AP range {0}")]
    BadRange(f64),
    #[error("direction vector is zero")]
    ZeroDirection,
    #[error("nodes `{0}` and `{1}` share a position")]
    CoincidentNodes(NodeId, NodeId),
    #[error("no path from `{0}` to `{1}`")]
    Unreachable(NodeId, NodeId),
}

/// Accumulates nodes and links, then validates them into a [`Topology`].
#[derive(Debug, Clone, Default)]
pub struct TopologyBuilder {
    nodes: Vec<Node>,
    links: Vec<(NodeId, NodeId, f64)>,
    ap_range: f64,
}

impl TopologyBuilder {
    pub fn new(ap_range: f64) -> Self {
        TopologyBuilder {
            ap_range,
            ..Default::default()
        }
    }

    pub fn ap_range(&mut self, range: f64) -> &mut Self {
        self.ap_range = range;
        self
    }

    pub fn node(&mut self, id: impl Into<NodeId>, x: f64, y: f64, role: Role) -> &mut Self {
        self.nodes.push(Node {
            id: id.into(),
            position: Vec2::new(x, y),
            role,
        });
        self
    }

    pub fn link(&mut self, a: impl Into<NodeId>, b: impl Into<NodeId>, latency_ms: f64) -> &mut Self {
        self.links.push((a.into(), b.into(), latency_ms));
        self
    }

    pub fn build(&self) -> Result<Topology, TopologyError> {
        if !(self.ap_range.is_finite() && self.ap_range >= 0.0) {
            return Err(TopologyError::BadRange(self.ap_range));
        }
        let mut index = HashMap::with_capacity(self.nodes.len());
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id.as_str().is_empty() {
                return Err(TopologyError::EmptyId);
            }
            if !n.position.is_finite() {
                return Err(TopologyError::BadPosition(n.id.clone()));
            }
            if index.insert(n.id.clone(), i).is_some() {
                return Err(TopologyError::DuplicateNode(n.id.clone()));
            }
        }
        let mut adj: Vec<Vec<Adjacent>> = vec![Vec::new(); self.nodes.len()];
        let mut links = Vec::with_capacity(self.links.len());
        for (a, b, latency) in &self.links {
            let ia = *index.get(a).ok_or_else(|| TopologyError::UnknownNode(a.clone()))?;
            let ib = *index.get(b).ok_or_else(|| TopologyError::UnknownNode(b.clone()))?;
            if ia == ib {
                return Err(TopologyError::SelfLoop(a.clone()));
            }
            if !(latency.is_finite() && *latency >= 0.0) {
                return Err(TopologyError::BadLatency(a.clone(), b.clone(), *latency));
            }
            if adj[ia].iter().any(|x| x.peer == ib) {
                return Err(TopologyError::ParallelLink(a.clone(), b.clone()));
            }
            let port_a = Port(adj[ia].len() as u16 + 1);
            let port_b = Port(adj[ib].len() as u16 + 1);
            let link = links.len();
            adj[ia].push(Adjacent {
                peer: ib,
                port: port_a,
                link,
            });
            adj[ib].push(Adjacent {
                peer: ia,
                port: port_b,
                link,
            });
            links.push(Link {
                a: a.clone(),
                b: b.clone(),
                latency_ms: *latency,
                port_a,
                port_b,
            });
        }
        Ok(Topology {
            nodes: self.nodes.clone(),
            index,
            links,
            adj,
            ap_range: self.ap_range,
        })
    }
}

/// Immutable network graph. Safe to share across concurrent simulations.
#[derive(Debug, Clone)]
pub struct Topology {
    nodes: Vec<Node>,
    index: HashMap<NodeId, NodeIx>,
    links: Vec<Link>,
    adj: Vec<Vec<Adjacent>>,
    ap_range: f64,
}

impl PartialEq for Topology {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.links == other.links && self.ap_range == other.ap_range
    }
}

impl Topology {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn ap_range(&self) -> f64 {
        self.ap_range
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, id: &NodeId) -> Result<NodeIx, TopologyError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| TopologyError::UnknownNode(id.clone()))
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.index.contains_key(id)
    }

    pub fn node(&self, id: &NodeId) -> Result<&Node, TopologyError> {
        Ok(&self.nodes[self.index_of(id)?])
    }

    pub fn node_at(&self, ix: NodeIx) -> &Node {
        &self.nodes[ix]
    }

    pub fn euclidean_distance(&self, a: &NodeId, b: &NodeId) -> Result<f64, TopologyError> {
        Ok(self.node(a)?.position.distance(self.node(b)?.position))
    }

    /// True iff the angle between `v` and the vector `from -> to` is strictly
    /// below 90 degrees.
    pub fn direction_compatible(&self, v: Vec2, from: &NodeId, to: &NodeId) -> Result<bool, TopologyError> {
        if v.is_zero() {
            return Err(TopologyError::ZeroDirection);
        }
        let pf = self.node(from)?.position;
        let pt = self.node(to)?.position;
        if pf == pt {
            return Err(TopologyError::CoincidentNodes(from.clone(), to.clone()));
        }
        Ok(v.dot(pt - pf) > 0.0)
    }

    /// Minimum number of links between two nodes (breadth-first).
    pub fn hop_distance(&self, a: &NodeId, b: &NodeId) -> Result<usize, TopologyError> {
        let ia = self.index_of(a)?;
        let ib = self.index_of(b)?;
        self.hop_distance_ix(ia, ib)
            .ok_or_else(|| TopologyError::Unreachable(a.clone(), b.clone()))
    }

    pub fn hop_distance_ix(&self, a: NodeIx, b: NodeIx) -> Option<usize> {
        let mut dist = vec![usize::MAX; self.nodes.len()];
        let mut queue = VecDeque::from([a]);
        dist[a] = 0;
        while let Some(u) = queue.pop_front() {
            if u == b {
                return Some(dist[u]);
            }
            for e in &self.adj[u] {
                if dist[e.peer] == usize::MAX {
                    dist[e.peer] = dist[u] + 1;
                    queue.push_back(e.peer);
                }
            }
        }
        None
    }

    /// Neighbors with the local port leading to each, sorted by port.
    pub fn neighbors(&self, n: &NodeId) -> Result<Vec<(NodeId, Port)>, TopologyError> {
        let ix = self.index_of(n)?;
        Ok(self.adj[ix]
            .iter()
            .map(|e| (self.nodes[e.peer].id.clone(), e.port))
            .collect())
    }

    pub fn neighbor_ixs(&self, ix: NodeIx) -> impl Iterator<Item = (NodeIx, Port)> + '_ {
        self.adj[ix].iter().map(|e| (e.peer, e.port))
    }

    /// Local port on `from` that leads to the adjacent node `to`.
    pub fn port_towards(&self, from: NodeIx, to: NodeIx) -> Option<Port> {
        self.adj[from].iter().find(|e| e.peer == to).map(|e| e.port)
    }

    /// Peer node and link latency behind a wired port.
    pub fn peer(&self, at: NodeIx, port: Port) -> Option<(NodeIx, f64)> {
        self.adj[at]
            .iter()
            .find(|e| e.port == port)
            .map(|e| (e.peer, self.links[e.link].latency_ms))
    }

    /// Whether `port` exists on the node: a wired port, or the wireless
    /// interface of an AP.
    pub fn has_port(&self, at: NodeIx, port: Port) -> bool {
        if port.is_wireless() {
            self.nodes[at].role == Role::Ap
        } else {
            self.adj[at].iter().any(|e| e.port == port)
        }
    }

    /// Canonical shortest path by hop count.
    ///
    /// Ties between equal-length paths are broken by comparing the sets of
    /// link indices as binary numbers (the path avoiding the highest-indexed
    /// link wins). This makes every shortest path unique, so the subpath of a
    /// canonical path is itself canonical, the paths from one source form a
    /// tree, and `shortest_path(b, a)` is the reverse of `shortest_path(a, b)`.
    pub fn shortest_path(&self, from: &NodeId, to: &NodeId) -> Result<Vec<NodeId>, TopologyError> {
        let a = self.index_of(from)?;
        let b = self.index_of(to)?;
        self.shortest_path_ix(a, b)
            .map(|p| p.into_iter().map(|i| self.nodes[i].id.clone()).collect())
            .ok_or_else(|| TopologyError::Unreachable(from.clone(), to.clone()))
    }

    pub fn shortest_path_ix(&self, from: NodeIx, to: NodeIx) -> Option<Vec<NodeIx>> {
        let words = self.links.len() / 64 + 1;
        let mut best: Vec<Option<PathCost>> = vec![None; self.nodes.len()];
        let mut parent = vec![usize::MAX; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        let start = PathCost {
            hops: 0,
            links: vec![0; words],
        };
        best[from] = Some(start.clone());
        heap.push(HeapEntry {
            cost: start,
            node: from,
        });
        while let Some(HeapEntry { cost, node }) = heap.pop() {
            if best[node].as_ref() != Some(&cost) {
                continue;
            }
            if node == to {
                break;
            }
            for e in &self.adj[node] {
                let next = cost.extend(e.link);
                if best[e.peer].as_ref().is_none_or(|c| next < *c) {
                    best[e.peer] = Some(next.clone());
                    parent[e.peer] = node;
                    heap.push(HeapEntry {
                        cost: next,
                        node: e.peer,
                    });
                }
            }
        }
        best[to].as_ref()?;
        let mut path = vec![to];
        let mut cur = to;
        while cur != from {
            cur = parent[cur];
            path.push(cur);
        }
        path.reverse();
        Some(path)
    }

    /// Access points whose coverage disk contains `pos`, nearest first, ties by id.
    pub fn aps_in_range(&self, pos: Vec2) -> Vec<NodeIx> {
        let mut aps: Vec<(f64, NodeIx)> = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.role == Role::Ap)
            .map(|(i, n)| (n.position.distance(pos), i))
            .filter(|(d, _)| *d <= self.ap_range)
            .collect();
        aps.sort_by(|x, y| {
            x.0.partial_cmp(&y.0)
                .unwrap_or(Ordering::Equal)
                .then_with(|| self.nodes[x.1].id.cmp(&self.nodes[y.1].id))
        });
        aps.into_iter().map(|(_, i)| i).collect()
    }

    /// Nearest in-range AP, ties by id.
    pub fn nearest_ap(&self, pos: Vec2) -> Option<NodeIx> {
        self.aps_in_range(pos).into_iter().next()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct PathCost {
    hops: u32,
    /// Bitset of link indices, least significant word first.
    links: Vec<u64>,
}

impl PathCost {
    fn extend(&self, link: usize) -> PathCost {
        let mut links = self.links.clone();
        links[link / 64] |= 1u64 << (link % 64);
        PathCost {
            hops: self.hops + 1,
            links,
        }
    }
}

impl Ord for PathCost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.hops
            .cmp(&other.hops)
            .then_with(|| self.links.iter().rev().cmp(other.links.iter().rev()))
    }
}

impl PartialOrd for PathCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, PartialEq, Eq)]
struct HeapEntry {
    cost: PathCost,
    node: NodeIx,
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on cost
        other.cost.cmp(&self.cost).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
