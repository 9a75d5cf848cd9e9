//! Greedy geometric prediction of the path a vehicle is about to drive.
//!
//! Starting from the vehicle's current node, only neighbors lying less than
//! 90 degrees off the vehicle heading are considered as the first hop. After
//! that the walk repeatedly picks, among the unvisited neighbors of the last
//! chosen node, the one minimizing `D(last, n) + D(n, dest)` (Euclidean), and
//! stops as soon as the destination shows up among the candidates.

use std::collections::HashSet;

use thiserror::Error;

use crate::topology::{NodeId, NodeIx, Topology, TopologyError, Vec2};

#[derive(Debug, Clone, PartialEq)]
pub struct PathQuery {
    pub start: NodeId,
    pub dest: NodeId,
    pub heading: Vec2,
}

impl PathQuery {
    pub fn new(start: impl Into<NodeId>, dest: impl Into<NodeId>, heading: Vec2) -> Self {
        PathQuery {
            start: start.into(),
            dest: dest.into(),
            heading,
        }
    }
}

/// Node sequence from the start node to the destination, both inclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictedPath {
    nodes: Vec<NodeId>,
}

impl PredictedPath {
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn into_nodes(self) -> Vec<NodeId> {
        self.nodes
    }
}

impl From<Vec<NodeId>> for PredictedPath {
    fn from(nodes: Vec<NodeId>) -> Self {
        PredictedPath { nodes }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathFindError {
    #[error("no neighbor of `{0}` lies ahead of the heading")]
    NoForwardChild(NodeId),
    #[error("candidates exhausted before reaching `{dest}` from `{start}`")]
    PathNotFound { start: NodeId, dest: NodeId },
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

impl PathFindError {
    /// Short class name, as printed by the CLI.
    pub fn class(&self) -> &'static str {
        match self {
            PathFindError::NoForwardChild(_) => "NoForwardChild",
            PathFindError::PathNotFound { .. } => "PathNotFound",
            PathFindError::Topology(_) => "TopologyError",
        }
    }
}

pub fn path_find(q: &PathQuery, topo: &Topology) -> Result<PredictedPath, PathFindError> {
    let s = topo.index_of(&q.start)?;
    let d = topo.index_of(&q.dest)?;
    if q.heading.is_zero() {
        return Err(TopologyError::ZeroDirection.into());
    }
    if s == d {
        return Ok(PredictedPath {
            nodes: vec![q.start.clone()],
        });
    }

    let mut seen: HashSet<NodeIx> = HashSet::from([s]);
    let mut result = vec![s];
    let mut candidates = Vec::new();
    for (c, _) in topo.neighbor_ixs(s) {
        if topo.direction_compatible(q.heading, &q.start, &topo.node_at(c).id)? {
            candidates.push(c);
        }
    }
    if candidates.is_empty() {
        return Err(PathFindError::NoForwardChild(q.start.clone()));
    }

    let dest_pos = topo.node_at(d).position;
    let mut last = s;
    loop {
        seen.insert(last);
        if candidates.contains(&d) {
            result.push(d);
            break;
        }
        // every candidate is consumed this round; only the winner's children survive
        let last_pos = topo.node_at(last).position;
        let mut best: Option<(f64, NodeIx)> = None;
        for &n in &candidates {
            seen.insert(n);
            let pos = topo.node_at(n).position;
            let score = last_pos.distance(pos) + pos.distance(dest_pos);
            let better = match best {
                None => true,
                Some((b, bi)) => score < b || (score == b && topo.node_at(n).id < topo.node_at(bi).id),
            };
            if better {
                best = Some((score, n));
            }
        }
        let Some((_, chosen)) = best else {
            return Err(PathFindError::PathNotFound {
                start: q.start.clone(),
                dest: q.dest.clone(),
            });
        };
        result.push(chosen);
        candidates = topo
            .neighbor_ixs(chosen)
            .map(|(c, _)| c)
            .filter(|c| !seen.contains(c))
            .collect();
        last = chosen;
    }

    Ok(PredictedPath {
        nodes: result.into_iter().map(|i| topo.node_at(i).id.clone()).collect(),
    })
}

/// Prediction with the plain shortest path as fallback when the greedy walk fails.
pub fn predict_or_shortest(q: &PathQuery, topo: &Topology) -> Result<PredictedPath, TopologyError> {
    match path_find(q, topo) {
        Ok(p) => Ok(p),
        Err(PathFindError::Topology(TopologyError::UnknownNode(n))) => Err(TopologyError::UnknownNode(n)),
        Err(_) => topo.shortest_path(&q.start, &q.dest).map(PredictedPath::from),
    }
}
