//! Augmented subgraphs restricted to a finite window.
//!
//! A window stores its edge set and the relation on its ambient boundary
//! recording connections made outside it. Relations on smaller windows are
//! always derived on demand with [`derive_inner`], never stored.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::{EdgeId, FiniteGraph, Subgraph, VertexId, VertexPartition};
use crate::partition::{derive_inner, BoundaryPartition};
use crate::unionfind::DisjointSets;

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedWindow {
    window: Arc<FiniteGraph>,
    s_edges: Vec<bool>,
    outer_relation: BoundaryPartition,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindowDocument {
    graph: String,
    s_edges: Vec<EdgeId>,
    outer_relation: BoundaryPartition,
}

impl AugmentedWindow {
    pub fn new(window: Arc<FiniteGraph>, s_edges: Vec<bool>, outer_relation: BoundaryPartition) -> Result<Self> {
        if s_edges.len() != window.edge_count() {
            return invalid("edge mask length does not match window");
        }
        if outer_relation.ground_set().iter().any(|&v| v >= window.vertex_count()) {
            return invalid("outer relation lives outside the window");
        }
        Ok(AugmentedWindow { window, s_edges, outer_relation })
    }

    pub fn window(&self) -> &Arc<FiniteGraph> {
        &self.window
    }

    pub fn s_edges(&self) -> &[bool] {
        &self.s_edges
    }

    pub fn outer_relation(&self) -> &BoundaryPartition {
        &self.outer_relation
    }

    /// Relation on the boundary of a sub-window `h`, derived from the stored data.
    pub fn inner_relation(&self, h: &Subgraph) -> Result<BoundaryPartition> {
        if !h.fits(&self.window) {
            return invalid("sub-window does not belong to this window");
        }
        derive_inner(&self.window, &self.outer_relation, &self.s_edges, &Subgraph::full(&self.window), h)
    }

    /// Writes `{graph, s_edges, outer_relation}`; the graph is stored by reference.
    pub fn to_json(&self, graph_ref: &str) -> String {
        let doc = WindowDocument {
            graph: graph_ref.to_string(),
            s_edges: (0..self.s_edges.len()).filter(|&e| self.s_edges[e]).collect(),
            outer_relation: self.outer_relation.clone(),
        };
        serde_json::to_string(&doc).expect("window documents always serialize")
    }

    /// Reads a document written by [`AugmentedWindow::to_json`], returning the graph reference.
    pub fn from_json(text: &str, window: Arc<FiniteGraph>) -> Result<(Self, String)> {
        let doc: WindowDocument = serde_json::from_str(text)?;
        let mut mask = vec![false; window.edge_count()];
        for e in doc.s_edges {
            if e >= mask.len() {
                return invalid(format!("edge {e} not in window"));
            }
            mask[e] = true;
        }
        Ok((AugmentedWindow::new(window, mask, doc.outer_relation)?, doc.graph))
    }
}

/// Vertices connected in `s_edges` once the outer classes are identified.
pub fn augmented_classes(aw: &AugmentedWindow) -> VertexPartition {
    let g = &aw.window;
    let mut ds = DisjointSets::new(g.vertex_count());
    for (v, r) in aw.outer_relation.identifications() {
        ds.union(v, r);
    }
    for (e, &(a, b)) in g.edges().iter().enumerate() {
        if aw.s_edges[e] {
            ds.union(a, b);
        }
    }
    VertexPartition::from_labels(ds.min_labels())
}

fn ambient(window: &FiniteGraph) -> Vec<VertexId> {
    window.ambient_boundary().unwrap_or_default()
}

/// No connections beyond the window.
pub fn free_augmentation(window: Arc<FiniteGraph>, s_edges: Vec<bool>) -> Result<AugmentedWindow> {
    let boundary = ambient(&window);
    AugmentedWindow::new(window, s_edges, BoundaryPartition::free(boundary))
}

/// Wires together the boundary vertices of every `s_edges` component that
/// meets the window boundary, standing in for membership of an infinite
/// component. A boundary vertex always meets the boundary itself, so the
/// whole boundary ends up as one class whatever `s_edges` is.
pub fn wired_augmentation(window: Arc<FiniteGraph>, s_edges: Vec<bool>) -> Result<AugmentedWindow> {
    let Some(boundary) = window.ambient_boundary() else {
        return invalid("window has no ambient boundary designation");
    };
    AugmentedWindow::new(window, s_edges, BoundaryPartition::wired(boundary))
}

/// `(S ∪ add) \ remove` with the outer relation unchanged.
pub fn edit(aw: &AugmentedWindow, add: &[EdgeId], remove: &[EdgeId]) -> Result<AugmentedWindow> {
    let m = aw.window.edge_count();
    if add.iter().chain(remove).any(|&e| e >= m) {
        return invalid("edited edge is outside the window");
    }
    if add.iter().any(|e| remove.contains(e)) {
        return invalid("an edge cannot be both added and removed");
    }
    let mut s = aw.s_edges.clone();
    for &e in add {
        s[e] = true;
    }
    for &e in remove {
        s[e] = false;
    }
    Ok(AugmentedWindow { window: aw.window.clone(), s_edges: s, outer_relation: aw.outer_relation.clone() })
}
