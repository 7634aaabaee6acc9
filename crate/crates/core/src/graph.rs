//! Immutable finite graphs, lattice windows, traces and quotients.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::partition::BoundaryPartition;
use crate::unionfind::DisjointSets;

pub type VertexId = usize;
pub type EdgeId = usize;

/// Largest lattice window `build_lattice_window` will materialise.
pub const MAX_WINDOW_VERTICES: usize = 1 << 24;

/// Integer coordinates of every vertex in `Z^d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Embedding {
    dim: usize,
    coords: Vec<i64>,
    torus_side: Option<i64>,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coord(&self, v: VertexId) -> &[i64] {
        &self.coords[v * self.dim..(v + 1) * self.dim]
    }

    pub fn torus_side(&self) -> Option<i64> {
        self.torus_side
    }

    /// Per-axis displacement `b - a`, taking the minimal representative on a torus.
    pub fn axis_offset(&self, a: i64, b: i64) -> i64 {
        let mut d = b - a;
        if let Some(side) = self.torus_side {
            d = d.rem_euclid(side);
            if 2 * d > side {
                d -= side;
            }
        }
        d
    }

    pub fn sup_distance(&self, u: VertexId, v: VertexId) -> i64 {
        self.coord(u)
            .iter()
            .zip(self.coord(v))
            .map(|(&a, &b)| self.axis_offset(a, b).abs())
            .max()
            .unwrap_or(0)
    }
}

/// Finite simple graph with dense vertex and edge ids.
///
/// Adjacency is stored in compressed rows; each entry is `(neighbor, edge)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteGraph {
    vertex_count: usize,
    edges: Vec<(VertexId, VertexId)>,
    offsets: Vec<usize>,
    adjacency: Vec<(VertexId, EdgeId)>,
    embedding: Option<Embedding>,
}

impl FiniteGraph {
    pub fn new(vertex_count: usize, edges: Vec<(VertexId, VertexId)>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edges.len());
        for &(u, v) in &edges {
            if u >= vertex_count || v >= vertex_count {
                return invalid(format!("edge ({u},{v}) out of range"));
            }
            if u == v {
                return invalid(format!("self-loop at vertex {u}"));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return invalid(format!("duplicate edge ({u},{v})"));
            }
        }
        let mut degree = vec![0usize; vertex_count];
        for &(u, v) in &edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(vertex_count + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..vertex_count].to_vec();
        let mut adjacency = vec![(0, 0); 2 * edges.len()];
        for (e, &(u, v)) in edges.iter().enumerate() {
            adjacency[fill[u]] = (v, e);
            fill[u] += 1;
            adjacency[fill[v]] = (u, e);
            fill[v] += 1;
        }
        Ok(FiniteGraph {
            vertex_count,
            edges,
            offsets,
            adjacency,
            embedding: None,
        })
    }

    /// Attaches coordinates. Every edge must join points at sup-distance 1, and
    /// the map must be injective on each component unless `torus` is set.
    pub fn with_embedding(mut self, dim: usize, coords: Vec<Vec<i64>>, torus: bool) -> Result<Self> {
        if coords.len() != self.vertex_count {
            return invalid("embedding must give one point per vertex");
        }
        if dim == 0 || coords.iter().any(|c| c.len() != dim) {
            return invalid("embedding points must all have the graph dimension");
        }
        let flat: Vec<i64> = coords.into_iter().flatten().collect();
        let torus_side = if torus {
            let side = flat.iter().copied().max().map_or(1, |m| m + 1);
            if flat.iter().any(|&c| c < 0) || side < 3 {
                return invalid("torus coordinates must lie in 0..side with side >= 3");
            }
            Some(side)
        } else {
            None
        };
        let emb = Embedding { dim, coords: flat, torus_side };
        for &(u, v) in &self.edges {
            if emb.sup_distance(u, v) != 1 {
                return invalid(format!("edge ({u},{v}) does not join lattice neighbours"));
            }
        }
        if !torus {
            let labels = components(&self, &vec![true; self.edge_count()]);
            let mut seen = HashSet::new();
            for v in 0..self.vertex_count {
                if !seen.insert((labels.label(v), emb.coord(v).to_vec())) {
                    return invalid("embedding is not injective on a component");
                }
            }
        }
        self.embedding = Some(emb);
        Ok(self)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn endpoints(&self, e: EdgeId) -> (VertexId, VertexId) {
        self.edges[e]
    }

    pub fn edges(&self) -> &[(VertexId, VertexId)] {
        &self.edges
    }

    pub fn neighbors(&self, v: VertexId) -> &[(VertexId, EdgeId)] {
        &self.adjacency[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn embedding(&self) -> Option<&Embedding> {
        self.embedding.as_ref()
    }

    pub fn dimension(&self) -> Option<usize> {
        self.embedding.as_ref().map(|e| e.dim)
    }

    pub fn is_torus(&self) -> bool {
        self.embedding.as_ref().is_some_and(|e| e.torus_side.is_some())
    }

    /// Inner boundary with respect to the ambient lattice: vertices with fewer
    /// than `2d` neighbours. Tori have an empty boundary; unembedded graphs have none.
    pub fn ambient_boundary(&self) -> Option<Vec<VertexId>> {
        let emb = self.embedding.as_ref()?;
        if emb.torus_side.is_some() {
            return Some(Vec::new());
        }
        Some(
            (0..self.vertex_count)
                .filter(|&v| self.degree(v) < 2 * emb.dim)
                .collect(),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&GraphDocument::from(self)).expect("graph serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphDocument = serde_json::from_str(text)?;
        doc.try_into()
    }
}

/// On-disk graph format.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDocument {
    vertex_count: usize,
    edges: Vec<[VertexId; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedding: Option<Vec<Vec<i64>>>,
    #[serde(default)]
    torus: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dimension: Option<usize>,
}

impl From<&FiniteGraph> for GraphDocument {
    fn from(g: &FiniteGraph) -> Self {
        GraphDocument {
            vertex_count: g.vertex_count,
            edges: g.edges.iter().map(|&(u, v)| [u, v]).collect(),
            embedding: g.embedding.as_ref().map(|e| {
                (0..g.vertex_count).map(|v| e.coord(v).to_vec()).collect()
            }),
            torus: g.is_torus(),
            dimension: g.dimension(),
        }
    }
}

impl TryFrom<GraphDocument> for FiniteGraph {
    type Error = Error;

    fn try_from(doc: GraphDocument) -> Result<Self> {
        let g = FiniteGraph::new(doc.vertex_count, doc.edges.iter().map(|e| (e[0], e[1])).collect())?;
        match (doc.embedding, doc.dimension) {
            (Some(coords), dim) => {
                let dim = dim.or_else(|| coords.first().map(Vec::len)).unwrap_or(1);
                g.with_embedding(dim, coords, doc.torus)
            }
            (None, _) if doc.torus => invalid("torus flag requires an embedding"),
            (None, _) => Ok(g),
        }
    }
}

/// `{0..side-1}^d` with nearest-neighbour edges, optionally wrapped into a torus.
pub fn build_lattice_window(dim: usize, side: usize, torus: bool) -> Result<FiniteGraph> {
    if !(1..=5).contains(&dim) {
        return invalid(format!("dimension {dim} outside 1..=5"));
    }
    if side == 0 {
        return invalid("side must be at least 1");
    }
    if torus && side < 3 {
        return invalid("torus side must be at least 3");
    }
    let n = side
        .checked_pow(dim as u32)
        .filter(|&n| n <= MAX_WINDOW_VERTICES)
        .ok_or_else(|| Error::ResourceLimit(format!("{side}^{dim} vertices")))?;
    let mut edges = Vec::with_capacity(n * dim);
    let mut coords = Vec::with_capacity(n);
    for v in 0..n {
        let mut c = Vec::with_capacity(dim);
        let mut rest = v;
        let mut stride = 1;
        for _ in 0..dim {
            let x = rest % side;
            rest /= side;
            if x + 1 < side {
                edges.push((v, v + stride));
            } else if torus {
                edges.push((v, v + stride - side * stride));
            }
            c.push(x as i64);
            stride *= side;
        }
        coords.push(c);
    }
    FiniteGraph::new(n, edges)?.with_embedding(dim, coords, torus)
}

/// A subgraph of a fixed host, as vertex and edge membership masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgraph {
    vertices: Vec<bool>,
    edges: Vec<bool>,
}

impl Subgraph {
    pub fn full(host: &FiniteGraph) -> Self {
        Subgraph {
            vertices: vec![true; host.vertex_count()],
            edges: vec![true; host.edge_count()],
        }
    }

    /// The trace of `vertices`: all host edges with both endpoints inside.
    pub fn induced(host: &FiniteGraph, vertices: &[VertexId]) -> Self {
        let mut vmask = vec![false; host.vertex_count()];
        for &v in vertices {
            vmask[v] = true;
        }
        let edges = host.edges().iter().map(|&(a, b)| vmask[a] && vmask[b]).collect();
        Subgraph { vertices: vmask, edges }
    }

    pub fn from_parts(host: &FiniteGraph, vertices: &[VertexId], edges: &[EdgeId]) -> Result<Self> {
        let mut vmask = vec![false; host.vertex_count()];
        for &v in vertices {
            if v >= host.vertex_count() {
                return invalid(format!("vertex {v} not in host"));
            }
            vmask[v] = true;
        }
        let mut emask = vec![false; host.edge_count()];
        for &e in edges {
            if e >= host.edge_count() {
                return invalid(format!("edge {e} not in host"));
            }
            let (a, b) = host.endpoints(e);
            if !vmask[a] || !vmask[b] {
                return invalid(format!("edge {e} has an endpoint outside the vertex set"));
            }
            emask[e] = true;
        }
        Ok(Subgraph { vertices: vmask, edges: emask })
    }

    /// Vertices are the endpoints of `edges`.
    pub fn spanned_by_edges(host: &FiniteGraph, edges: &[EdgeId]) -> Result<Self> {
        let mut verts = Vec::new();
        for &e in edges {
            if e >= host.edge_count() {
                return invalid(format!("edge {e} not in host"));
            }
            let (a, b) = host.endpoints(e);
            verts.extend([a, b]);
        }
        Subgraph::from_parts(host, &verts, edges)
    }

    pub fn fits(&self, host: &FiniteGraph) -> bool {
        self.vertices.len() == host.vertex_count() && self.edges.len() == host.edge_count()
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        self.vertices[v]
    }

    pub fn contains_edge(&self, e: EdgeId) -> bool {
        self.edges[e]
    }

    pub fn vertex_ids(&self) -> Vec<VertexId> {
        (0..self.vertices.len()).filter(|&v| self.vertices[v]).collect()
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.edges.len()).filter(|&e| self.edges[e])
    }

    pub fn edge_mask(&self) -> &[bool] {
        &self.edges
    }

    pub fn is_subgraph_of(&self, other: &Subgraph) -> bool {
        self.vertices.len() == other.vertices.len()
            && self.edges.len() == other.edges.len()
            && self.vertices.iter().zip(&other.vertices).all(|(&a, &b)| !a || b)
            && self.edges.iter().zip(&other.edges).all(|(&a, &b)| !a || b)
    }

    /// Materialises the subgraph with local ids assigned in increasing host order.
    pub fn extract(&self, host: &FiniteGraph) -> Extracted {
        let vertices = self.vertex_ids();
        let mut local = vec![usize::MAX; host.vertex_count()];
        for (i, &v) in vertices.iter().enumerate() {
            local[v] = i;
        }
        let edges: Vec<EdgeId> = self.edge_ids().collect();
        let local_edges = edges
            .iter()
            .map(|&e| {
                let (a, b) = host.endpoints(e);
                (local[a], local[b])
            })
            .collect();
        let mut graph = FiniteGraph::new(vertices.len(), local_edges).expect("subgraph of a simple graph");
        if let Some(emb) = host.embedding() {
            graph.embedding = Some(Embedding {
                dim: emb.dim,
                coords: vertices.iter().flat_map(|&v| emb.coord(v).to_vec()).collect(),
                torus_side: emb.torus_side,
            });
        }
        Extracted { graph, vertices, edges, local }
    }
}

/// A subgraph copied out of its host, with id translation tables.
#[derive(Debug, Clone)]
pub struct Extracted {
    pub graph: FiniteGraph,
    /// Host vertex id of each local vertex.
    pub vertices: Vec<VertexId>,
    /// Host edge id of each local edge.
    pub edges: Vec<EdgeId>,
    local: Vec<usize>,
}

impl Extracted {
    pub fn local_vertex(&self, host_vertex: VertexId) -> Option<VertexId> {
        self.local.get(host_vertex).copied().filter(|&l| l != usize::MAX)
    }

    /// Translates a partition on host ids to local ids, dropping vertices outside the subgraph.
    pub fn localize(&self, phi: &BoundaryPartition) -> BoundaryPartition {
        phi.restrict(&self.vertices).relabel(|v| self.local[v])
    }

    /// Lifts a local edge set back to a host-sized mask.
    pub fn lift_edges(&self, local_edges: &[bool], host_edge_count: usize) -> Vec<bool> {
        let mut out = vec![false; host_edge_count];
        for (l, &on) in local_edges.iter().enumerate() {
            if on {
                out[self.edges[l]] = true;
            }
        }
        out
    }
}

/// Trace of `s` in `g`.
pub fn induced_subgraph(g: &FiniteGraph, s: &[VertexId]) -> Extracted {
    Subgraph::induced(g, s).extract(g)
}

/// Vertices of `h` incident to an edge of `g` that is not in `h`.
pub fn inner_boundary(g: &FiniteGraph, h: &Subgraph) -> Result<Vec<VertexId>> {
    if !h.fits(g) {
        return invalid("subgraph does not belong to this graph");
    }
    let mut out: Vec<VertexId> = g
        .edges()
        .iter()
        .enumerate()
        .filter(|&(e, _)| !h.contains_edge(e))
        .flat_map(|(_, &(a, b))| [a, b])
        .filter(|&v| h.contains_vertex(v))
        .collect();
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Partition of the vertex set, each vertex labelled by the minimum member of its class.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VertexPartition {
    labels: Vec<VertexId>,
}

impl VertexPartition {
    pub fn from_labels(labels: Vec<VertexId>) -> Self {
        VertexPartition { labels }
    }

    pub fn label(&self, v: VertexId) -> VertexId {
        self.labels[v]
    }

    pub fn labels(&self) -> &[VertexId] {
        &self.labels
    }

    pub fn same(&self, u: VertexId, v: VertexId) -> bool {
        self.labels[u] == self.labels[v]
    }

    pub fn class_count(&self) -> usize {
        self.labels.iter().enumerate().filter(|&(v, &l)| v == l).count()
    }

    pub fn class_of(&self, v: VertexId) -> Vec<VertexId> {
        let l = self.labels[v];
        (0..self.labels.len()).filter(|&u| self.labels[u] == l).collect()
    }

    pub fn classes(&self) -> Vec<Vec<VertexId>> {
        let mut by: BTreeMap<VertexId, Vec<VertexId>> = BTreeMap::new();
        for (v, &l) in self.labels.iter().enumerate() {
            by.entry(l).or_default().push(v);
        }
        by.into_values().collect()
    }

    /// True iff every class of `self` lies inside a class of `other`.
    pub fn refines(&self, other: &VertexPartition) -> bool {
        self.labels.len() == other.labels.len()
            && (0..self.labels.len()).all(|v| other.labels[v] == other.labels[self.labels[v]])
    }
}

/// Connected components of the spanning subgraph `(V, active_edges)`.
pub fn components(g: &FiniteGraph, active_edges: &[bool]) -> VertexPartition {
    let mut ds = DisjointSets::new(g.vertex_count());
    for (e, &(a, b)) in g.edges().iter().enumerate() {
        if active_edges[e] {
            ds.union(a, b);
        }
    }
    VertexPartition::from_labels(ds.min_labels())
}

/// `H/φ`: classes of `φ` collapsed, self-loops removed, parallel edges kept.
#[derive(Debug, Clone)]
pub struct QuotientGraph {
    class_of: Vec<usize>,
    representatives: Vec<VertexId>,
    quotient_edges: Vec<(usize, usize, EdgeId)>,
    offsets: Vec<usize>,
    adjacency: Vec<(usize, EdgeId)>,
}

impl QuotientGraph {
    pub fn class_count(&self) -> usize {
        self.representatives.len()
    }

    /// Class index of a base vertex. Classes are numbered by increasing representative.
    pub fn class_of(&self, v: VertexId) -> usize {
        self.class_of[v]
    }

    pub fn representative(&self, class: usize) -> VertexId {
        self.representatives[class]
    }

    pub fn quotient_edges(&self) -> &[(usize, usize, EdgeId)] {
        &self.quotient_edges
    }

    pub fn neighbors(&self, class: usize) -> &[(usize, EdgeId)] {
        &self.adjacency[self.offsets[class]..self.offsets[class + 1]]
    }

    pub fn degree(&self, class: usize) -> usize {
        self.offsets[class + 1] - self.offsets[class]
    }

    /// Base edges that do not become self-loops.
    pub fn surviving_edge_mask(&self, base_edge_count: usize) -> Vec<bool> {
        let mut out = vec![false; base_edge_count];
        for &(_, _, e) in &self.quotient_edges {
            out[e] = true;
        }
        out
    }
}

pub fn quotient(h: &FiniteGraph, phi: &BoundaryPartition) -> Result<QuotientGraph> {
    if phi.ground_set().iter().any(|&v| v >= h.vertex_count()) {
        return invalid("partition ground set is not inside the graph");
    }
    let n = h.vertex_count();
    let mut rep: Vec<VertexId> = (0..n).collect();
    for (v, r) in phi.identifications() {
        rep[v] = r;
    }
    let mut class_index = vec![usize::MAX; n];
    let mut representatives = Vec::new();
    for v in 0..n {
        if rep[v] == v {
            class_index[v] = representatives.len();
            representatives.push(v);
        }
    }
    let class_of: Vec<usize> = (0..n).map(|v| class_index[rep[v]]).collect();
    let quotient_edges: Vec<(usize, usize, EdgeId)> = h
        .edges()
        .iter()
        .enumerate()
        .filter_map(|(e, &(a, b))| {
            let (ca, cb) = (class_of[a], class_of[b]);
            (ca != cb).then_some((ca, cb, e))
        })
        .collect();
    let k = representatives.len();
    let mut degree = vec![0usize; k];
    for &(a, b, _) in &quotient_edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    let mut offsets = vec![0usize; k + 1];
    for c in 0..k {
        offsets[c + 1] = offsets[c] + degree[c];
    }
    let mut fill = offsets[..k].to_vec();
    let mut adjacency = vec![(0, 0); offsets[k]];
    for &(a, b, e) in &quotient_edges {
        adjacency[fill[a]] = (b, e);
        fill[a] += 1;
        adjacency[fill[b]] = (a, e);
        fill[b] += 1;
    }
    Ok(QuotientGraph {
        class_of,
        representatives,
        quotient_edges,
        offsets,
        adjacency,
    })
}
