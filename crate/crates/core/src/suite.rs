//! Small graphs used by the exact validation checks, each with a designated
//! boundary set for boundary conditions.

use std::sync::Arc;

use crate::graph::{build_lattice_window, FiniteGraph, Subgraph, VertexId};
use crate::partition::BoundaryPartition;

#[derive(Debug, Clone)]
pub struct SuiteGraph {
    pub name: &'static str,
    pub graph: Arc<FiniteGraph>,
    pub boundary: Vec<VertexId>,
}

impl SuiteGraph {
    fn new(name: &'static str, n: usize, edges: &[(usize, usize)], boundary: &[VertexId]) -> Self {
        SuiteGraph {
            name,
            graph: Arc::new(FiniteGraph::new(n, edges.to_vec()).expect("suite graphs are simple")),
            boundary: boundary.to_vec(),
        }
    }

    /// Every partition of the boundary set.
    pub fn boundary_partitions(&self) -> Vec<BoundaryPartition> {
        BoundaryPartition::all_partitions(&self.boundary)
    }

    /// Free, wired and one two-class partition of the boundary.
    pub fn standard_partitions(&self) -> Vec<(&'static str, BoundaryPartition)> {
        let b = &self.boundary;
        let split = b.len() / 2;
        let two = BoundaryPartition::from_classes(vec![b[..split].to_vec(), b[split..].to_vec()])
            .expect("halves of the boundary are disjoint");
        vec![
            ("free", BoundaryPartition::free(b.iter().copied())),
            ("wired", BoundaryPartition::wired(b.iter().copied())),
            ("two-class", two),
        ]
    }

    /// Sub-windows for conditioning checks: every single edge, every
    /// induced closed neighbourhood and, on graphs with at most five
    /// vertices, every induced subgraph on two or more vertices.
    pub fn windows(&self) -> Vec<Subgraph> {
        let g = &self.graph;
        let n = g.vertex_count();
        let mut out: Vec<Subgraph> = Vec::new();
        for (e, &(a, b)) in g.edges().iter().enumerate() {
            out.push(Subgraph::from_parts(g, &[a, b], &[e]).expect("edge endpoints"));
        }
        if n <= 5 {
            for set in 1u32..(1 << n) {
                if set.count_ones() >= 2 {
                    let vs: Vec<VertexId> = (0..n).filter(|&v| set >> v & 1 == 1).collect();
                    out.push(Subgraph::induced(g, &vs));
                }
            }
        } else {
            for v in 0..n {
                let mut vs: Vec<VertexId> = g.neighbors(v).iter().map(|&(w, _)| w).collect();
                vs.push(v);
                out.push(Subgraph::induced(g, &vs));
            }
            out.push(Subgraph::full(g));
        }
        out
    }
}

fn grid(name: &'static str, width: usize, height: usize, boundary: &[VertexId]) -> SuiteGraph {
    let mut edges = Vec::new();
    for y in 0..height {
        for x in 0..width {
            let v = y * width + x;
            if x + 1 < width {
                edges.push((v, v + 1));
            }
            if y + 1 < height {
                edges.push((v, v + width));
            }
        }
    }
    let coords = (0..width * height).map(|v| vec![(v % width) as i64, (v / width) as i64]).collect();
    let graph = FiniteGraph::new(width * height, edges)
        .and_then(|g| g.with_embedding(2, coords, false))
        .expect("grid is a lattice graph");
    SuiteGraph { name, graph: Arc::new(graph), boundary: boundary.to_vec() }
}

pub fn single_edge() -> SuiteGraph {
    SuiteGraph::new("edge", 2, &[(0, 1)], &[0, 1])
}

pub fn path4() -> SuiteGraph {
    SuiteGraph::new("P4", 4, &[(0, 1), (1, 2), (2, 3)], &[0, 3])
}

pub fn cycle3() -> SuiteGraph {
    SuiteGraph::new("C3", 3, &[(0, 1), (1, 2), (0, 2)], &[0, 1, 2])
}

pub fn cycle4() -> SuiteGraph {
    SuiteGraph::new("C4", 4, &[(0, 1), (1, 2), (2, 3), (0, 3)], &[0, 1, 2, 3])
}

pub fn k4() -> SuiteGraph {
    SuiteGraph::new("K4", 4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)], &[0, 1, 2])
}

pub fn grid2x3() -> SuiteGraph {
    grid("grid2x3", 3, 2, &[0, 2, 3, 5])
}

pub fn grid3x3() -> SuiteGraph {
    let g = build_lattice_window(2, 3, false).expect("3x3 window");
    SuiteGraph { name: "grid3x3", graph: Arc::new(g), boundary: vec![0, 2, 6, 8] }
}

pub fn suite() -> Vec<SuiteGraph> {
    vec![single_edge(), path4(), cycle3(), cycle4(), k4(), grid2x3(), grid3x3()]
}

pub fn by_name(name: &str) -> Option<SuiteGraph> {
    suite().into_iter().find(|s| s.name.eq_ignore_ascii_case(name))
}
