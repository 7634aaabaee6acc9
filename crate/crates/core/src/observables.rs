//! Finite-size cluster observables on torus windows. These are surrogates
//! for infinite-volume statements and are labelled as such in outputs.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::graph::{FiniteGraph, VertexId};
use crate::unionfind::DisjointSets;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusterObservables {
    pub largest_fraction: f64,
    pub crossing_trees: u64,
    pub trifurcation_density: f64,
    pub two_sided_cut_density: f64,
    pub edge_density: f64,
}

impl ClusterObservables {
    pub const NAMES: [&'static str; 5] =
        ["largest_fraction", "crossing_trees", "trifurcation_density", "two_sided_cut_density", "edge_density"];

    pub fn values(&self) -> [f64; 5] {
        [
            self.largest_fraction,
            self.crossing_trees as f64,
            self.trifurcation_density,
            self.two_sided_cut_density,
            self.edge_density,
        ]
    }
}

/// Default observable scale on a side-`l` torus.
pub fn default_scale(side: usize) -> usize {
    (side / 4).max(1)
}

struct ForestAdjacency {
    offsets: Vec<usize>,
    targets: Vec<VertexId>,
}

impl ForestAdjacency {
    fn new(g: &FiniteGraph, edges: &[bool]) -> Self {
        let n = g.vertex_count();
        let mut offsets = vec![0usize; n + 1];
        for (e, &(a, b)) in g.edges().iter().enumerate() {
            if edges[e] {
                offsets[a + 1] += 1;
                offsets[b + 1] += 1;
            }
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0; offsets[n]];
        for (e, &(a, b)) in g.edges().iter().enumerate() {
            if edges[e] {
                targets[fill[a]] = b;
                fill[a] += 1;
                targets[fill[b]] = a;
                fill[b] += 1;
            }
        }
        ForestAdjacency { offsets, targets }
    }

    fn neighbors(&self, v: VertexId) -> &[VertexId] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }
}

/// Depth-first search of the branch entered through `start` from `from`
/// (which is never crossed), stopping as soon as `far` holds somewhere.
fn branch_reaches(adj: &ForestAdjacency, start: VertexId, from: VertexId, far: &dyn Fn(VertexId) -> bool, stack: &mut Vec<(VertexId, VertexId)>) -> bool {
    stack.clear();
    stack.push((start, from));
    while let Some((v, parent)) = stack.pop() {
        if far(v) {
            return true;
        }
        for &w in adj.neighbors(v) {
            if w != parent {
                stack.push((w, v));
            }
        }
    }
    false
}

/// Observables of the forest `edges` on the torus `g` at scale `r`.
pub fn cluster_observables(g: &FiniteGraph, edges: &[bool], r: usize) -> Result<ClusterObservables> {
    let Some(emb) = g.embedding() else {
        return invalid("cluster observables need an embedded torus window");
    };
    let Some(side) = emb.torus_side() else {
        return invalid("cluster observables need a torus window");
    };
    if r == 0 || 2 * r as i64 >= side {
        return invalid(format!("scale {r} must satisfy 0 < r < side/2 = {}", side as f64 / 2.0));
    }
    if edges.len() != g.edge_count() {
        return invalid("edge mask length does not match graph");
    }
    let n = g.vertex_count();
    let r = r as i64;
    let mut ds = DisjointSets::new(n);
    let mut present = 0usize;
    for (e, &(a, b)) in g.edges().iter().enumerate() {
        if edges[e] {
            present += 1;
            if !ds.union(a, b) {
                return invalid("edge set contains a cycle");
            }
        }
    }
    let mut size = vec![0usize; n];
    for v in 0..n {
        size[ds.find(v)] += 1;
    }
    let largest = size.iter().copied().max().unwrap_or(0);

    let mid = side / 2;
    let center = (0..n)
        .find(|&v| emb.coord(v).iter().all(|&x| x == mid))
        .unwrap_or(0);
    let mut in_box = vec![false; n];
    let mut far = vec![false; n];
    for v in 0..n {
        let d = emb.sup_distance(center, v);
        if 2 * d <= r {
            in_box[ds.find(v)] = true;
        }
        if d >= 2 * r {
            far[ds.find(v)] = true;
        }
    }
    let crossing = (0..n).filter(|&c| in_box[c] && far[c]).count() as u64;

    let adj = ForestAdjacency::new(g, edges);
    let mut stack = Vec::new();
    let mut trifurcations = 0usize;
    for v in 0..n {
        let nb = adj.neighbors(v);
        if nb.len() < 3 {
            continue;
        }
        let reach = |w: VertexId| emb.sup_distance(v, w) >= r;
        let mut long = 0;
        for &w in nb {
            if branch_reaches(&adj, w, v, &reach, &mut stack) {
                long += 1;
                if long == 3 {
                    trifurcations += 1;
                    break;
                }
            }
        }
    }
    let mut cuts = 0usize;
    for (e, &(a, b)) in g.edges().iter().enumerate() {
        if !edges[e] {
            continue;
        }
        let reach = |w: VertexId| emb.sup_distance(a, w).min(emb.sup_distance(b, w)) >= r;
        if branch_reaches(&adj, a, b, &reach, &mut stack) && branch_reaches(&adj, b, a, &reach, &mut stack) {
            cuts += 1;
        }
    }
    Ok(ClusterObservables {
        largest_fraction: largest as f64 / n as f64,
        crossing_trees: crossing,
        trifurcation_density: trifurcations as f64 / n as f64,
        two_sided_cut_density: if present == 0 { 0.0 } else { cuts as f64 / present as f64 },
        edge_density: if g.edge_count() == 0 { 0.0 } else { present as f64 / g.edge_count() as f64 },
    })
}
