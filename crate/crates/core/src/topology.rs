//! Node placement and the unit-disk neighbor graph.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a node in the scenario's node table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance_sq(&self, other: &Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(&self, other: &Position) -> f64 {
        self.distance_sq(other).sqrt()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("radio radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("position of node {0} is not finite")]
    NonFinite(usize),
    #[error("nodes {0} and {1} share the same position")]
    Duplicate(usize, usize),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
}

/// Symmetric, irreflexive adjacency under the inclusive unit-disk rule.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    adjacency: Vec<Vec<NodeId>>,
    radius: f64,
}

impl NeighborGraph {
    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.index() < self.adjacency.len()
    }

    pub fn neighbors(&self, node: NodeId) -> Result<&[NodeId], TopologyError> {
        self.adjacency
            .get(node.index())
            .map(Vec::as_slice)
            .ok_or(TopologyError::UnknownNode(node))
    }

    pub fn degree(&self, node: NodeId) -> Result<usize, TopologyError> {
        self.neighbors(node).map(<[NodeId]>::len)
    }

    pub fn is_adjacent(&self, a: NodeId, b: NodeId) -> bool {
        self.adjacency
            .get(a.index())
            .is_some_and(|n| n.binary_search(&b).is_ok())
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// Builds the neighbor graph: `u ~ v` iff `|u - v| <= radius`.
pub fn build_graph(positions: &[Position], radius: f64) -> Result<NeighborGraph, TopologyError> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(TopologyError::BadRadius(radius));
    }
    if let Some(i) = positions.iter().position(|p| !p.is_finite()) {
        return Err(TopologyError::NonFinite(i));
    }
    let r2 = radius * radius;
    let mut adjacency = vec![Vec::new(); positions.len()];
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            if positions[i] == positions[j] {
                return Err(TopologyError::Duplicate(i, j));
            }
            if positions[i].distance_sq(&positions[j]) <= r2 {
                adjacency[i].push(NodeId(j as u32));
                adjacency[j].push(NodeId(i as u32));
            }
        }
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }
    Ok(NeighborGraph { adjacency, radius })
}

/// Uniform placement in `[0, width) x [0, height)`.
pub fn uniform_positions<R: Rng>(rng: &mut R, count: usize, width: f64, height: f64) -> Vec<Position> {
    (0..count)
        .map(|_| Position::new(rng.random::<f64>() * width, rng.random::<f64>() * height))
        .collect()
}
