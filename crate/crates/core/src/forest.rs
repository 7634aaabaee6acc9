use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::graph::{EdgeId, FiniteGraph, VertexId};
use crate::partition::BoundaryPartition;
use crate::unionfind::DisjointSets;

/// True iff `edges` stays acyclic after identifying the classes of `phi`.
pub fn extends(host: &FiniteGraph, phi: &BoundaryPartition, edges: &[bool]) -> bool {
    let mut ds = seeded_sets(host, phi);
    host.edges()
        .iter()
        .zip(edges)
        .filter(|(_, &on)| on)
        .all(|(&(a, b), _)| ds.union(a, b))
}

/// Union-find over host vertices with the classes of `phi` already merged.
pub fn seeded_sets(host: &FiniteGraph, phi: &BoundaryPartition) -> DisjointSets {
    let mut ds = DisjointSets::new(host.vertex_count());
    for (v, r) in phi.identifications() {
        ds.union(v, r);
    }
    ds
}

/// An edge set of a host graph that extends a boundary partition.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    host: Arc<FiniteGraph>,
    phi: BoundaryPartition,
    edges: Vec<bool>,
}

impl ForestConfig {
    pub fn new(host: Arc<FiniteGraph>, phi: BoundaryPartition, edges: Vec<bool>) -> Result<Self> {
        if edges.len() != host.edge_count() {
            return invalid("edge mask length does not match host graph");
        }
        if phi.ground_set().iter().any(|&v| v >= host.vertex_count()) {
            return invalid("boundary partition is not inside the host graph");
        }
        if !extends(&host, &phi, &edges) {
            return invalid("edge set closes a cycle in the quotient");
        }
        Ok(ForestConfig { host, phi, edges })
    }

    pub fn empty(host: Arc<FiniteGraph>, phi: BoundaryPartition) -> Result<Self> {
        let m = host.edge_count();
        ForestConfig::new(host, phi, vec![false; m])
    }

    pub fn from_ids(host: Arc<FiniteGraph>, phi: BoundaryPartition, ids: &[EdgeId]) -> Result<Self> {
        let mut edges = vec![false; host.edge_count()];
        for &e in ids {
            if e >= edges.len() {
                return invalid(format!("edge {e} not in host"));
            }
            edges[e] = true;
        }
        ForestConfig::new(host, phi, edges)
    }

    /// Skips the acyclicity check; callers guarantee it.
    pub(crate) fn from_parts_unchecked(host: Arc<FiniteGraph>, phi: BoundaryPartition, edges: Vec<bool>) -> Self {
        debug_assert!(extends(&host, &phi, &edges));
        ForestConfig { host, phi, edges }
    }

    pub fn host(&self) -> &Arc<FiniteGraph> {
        &self.host
    }

    pub fn phi(&self) -> &BoundaryPartition {
        &self.phi
    }

    pub fn edges(&self) -> &[bool] {
        &self.edges
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.edges[e]
    }

    pub fn edge_ids(&self) -> Vec<EdgeId> {
        (0..self.edges.len()).filter(|&e| self.edges[e]).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().filter(|&&b| b).count()
    }

    /// Bitmask of the edge set; hosts with more than 64 edges are rejected.
    pub fn mask(&self) -> Option<u64> {
        (self.edges.len() <= 64).then(|| {
            self.edges
                .iter()
                .enumerate()
                .fold(0u64, |m, (e, &on)| if on { m | (1 << e) } else { m })
        })
    }

    /// Forest degree of `v` (boundary identifications are not edges).
    pub fn degree(&self, v: VertexId) -> usize {
        self.host.neighbors(v).iter().filter(|&&(_, e)| self.edges[e]).count()
    }
}
