//! Component resampling: redraw the tree of a marked vertex's class as a
//! uniform spanning tree of the class trace, and check that this leaves the
//! arboreal gas invariant.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::beta::Beta;
use crate::error::{invalid, Error, Result};
use crate::forest::{seeded_sets, ForestConfig};
use crate::graph::{induced_subgraph, quotient, EdgeId, FiniteGraph, VertexId};
use crate::oracle::{self, EdgeMask, ExactLaw};
use crate::partition::BoundaryPartition;
use crate::sampler::{sample_map, wilson_with_rng, SamplingPlan};
use crate::stats::{chi_square_homogeneity, histogram_tv, ChiSquareResult, Histogram};

#[derive(Debug, Clone, PartialEq)]
pub struct ResampleOutcome {
    pub before: ForestConfig,
    pub class_vertices: Vec<VertexId>,
    pub after: ForestConfig,
    pub redraw_tree_edges: Vec<EdgeId>,
}

fn class_members(host: &FiniteGraph, phi: &BoundaryPartition, edges: &[bool], o: VertexId) -> Vec<VertexId> {
    let mut ds = seeded_sets(host, phi);
    for (e, &(a, b)) in host.edges().iter().enumerate() {
        if edges[e] {
            ds.union(a, b);
        }
    }
    let root = ds.find(o);
    (0..host.vertex_count()).filter(|&v| ds.find(v) == root).collect()
}

/// Vertices connected to `o` in `f` once the classes of `phi` are identified.
pub fn component_of(f: &ForestConfig, o: VertexId) -> Result<Vec<VertexId>> {
    if o >= f.host().vertex_count() {
        return invalid(format!("vertex {o} not in host"));
    }
    Ok(class_members(f.host(), f.phi(), f.edges(), o))
}

/// The redraw space for class `members`: its trace, the boundary relation
/// restricted to it, and the base edge of each trace edge.
fn class_trace(host: &FiniteGraph, phi: &BoundaryPartition, members: &[VertexId]) -> (FiniteGraph, BoundaryPartition, Vec<EdgeId>) {
    let trace = induced_subgraph(host, members);
    let local_phi = trace.localize(phi);
    (trace.graph, local_phi, trace.edges)
}

fn redraw_edges<R: Rng + ?Sized>(host: &FiniteGraph, phi: &BoundaryPartition, edges: &mut [bool], o: VertexId, rng: &mut R) -> (Vec<VertexId>, Vec<EdgeId>) {
    let members = class_members(host, phi, edges, o);
    let (trace, local_phi, base) = class_trace(host, phi, &members);
    for &e in &base {
        edges[e] = false;
    }
    let q = quotient(&trace, &local_phi).expect("restricted relation lives in the trace");
    let tree: Vec<EdgeId> = wilson_with_rng(&q, rng).into_iter().map(|l| base[l]).collect();
    for &e in &tree {
        edges[e] = true;
    }
    (members, tree)
}

/// Deletes the tree of `o`'s class and inserts a uniform maximal spanning
/// forest of the class trace modulo the restricted boundary relation.
pub fn resample_component<R: Rng + ?Sized>(f: &ForestConfig, o: VertexId, rng: &mut R) -> Result<ResampleOutcome> {
    if o >= f.host().vertex_count() {
        return invalid(format!("vertex {o} not in host"));
    }
    let mut edges = f.edges().to_vec();
    let (class_vertices, mut redraw_tree_edges) = redraw_edges(f.host(), f.phi(), &mut edges, o, rng);
    redraw_tree_edges.sort_unstable();
    let after = ForestConfig::from_parts_unchecked(f.host().clone(), f.phi().clone(), edges);
    Ok(ResampleOutcome { before: f.clone(), class_vertices, after, redraw_tree_edges })
}

/// Exact image of `law` under the resampling kernel at `o`.
pub fn resample_push_forward(h: &FiniteGraph, phi: &BoundaryPartition, law: &ExactLaw, o: VertexId) -> Result<ExactLaw> {
    if o >= h.vertex_count() {
        return invalid(format!("vertex {o} not in host"));
    }
    let m = h.edge_count();
    let mut out: BTreeMap<EdgeMask, f64> = BTreeMap::new();
    for (mask, p) in law.iter() {
        let edges = oracle::mask_to_bools(mask, m);
        let members = class_members(h, phi, &edges, o);
        let (trace, local_phi, base) = class_trace(h, phi, &members);
        let kept = base.iter().fold(mask, |acc, &e| acc & !(1 << e));
        let redraw = oracle::exact_pmf(&trace, &local_phi, Beta::Infinite)?;
        for (local, q) in redraw.iter() {
            let lifted = oracle::mask_to_ids(local).into_iter().fold(kept, |acc, l| acc | (1 << base[l]));
            *out.entry(lifted).or_default() += p * q;
        }
    }
    ExactLaw::from_weights(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    ComponentSizeOfO,
    EdgeCount,
    FullConfiguration,
    /// Forest degree of the marked vertex. Unlike the class size and the
    /// edge count it is not preserved sample by sample.
    DegreeOfO,
}

impl Observable {
    pub const ALL: [Observable; 4] =
        [Observable::ComponentSizeOfO, Observable::EdgeCount, Observable::FullConfiguration, Observable::DegreeOfO];

    pub fn name(self) -> &'static str {
        match self {
            Observable::ComponentSizeOfO => "component-size-of-o",
            Observable::EdgeCount => "edge-count",
            Observable::FullConfiguration => "full-configuration",
            Observable::DegreeOfO => "degree-of-o",
        }
    }

    pub fn evaluate(self, host: &FiniteGraph, phi: &BoundaryPartition, edges: &[bool], o: VertexId) -> u64 {
        match self {
            Observable::ComponentSizeOfO => class_members(host, phi, edges, o).len() as u64,
            Observable::EdgeCount => edges.iter().filter(|&&b| b).count() as u64,
            Observable::FullConfiguration => oracle::bools_to_mask(edges),
            Observable::DegreeOfO => host.neighbors(o).iter().filter(|&&(_, e)| edges[e]).count() as u64,
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Observable::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown observable {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub observable: Observable,
    pub samples: usize,
    pub tv: f64,
    pub chi_square: ChiSquareResult,
    pub before: Histogram<u64>,
    pub after: Histogram<u64>,
}

/// Samples `P^phi_{h,beta}`, resamples the class of `o` in every sample and
/// compares the observable before and after.
#[allow(clippy::too_many_arguments)]
pub fn invariance_statistic(
    h: &Arc<FiniteGraph>,
    phi: &BoundaryPartition,
    beta: Beta,
    o: VertexId,
    plan: SamplingPlan,
    observable: Observable,
    seed: u64,
) -> Result<InvarianceReport> {
    if plan.samples == 0 {
        return invalid("need at least one sample");
    }
    if o >= h.vertex_count() {
        return invalid(format!("vertex {o} not in host"));
    }
    if observable == Observable::FullConfiguration && h.edge_count() > 64 {
        return invalid("full-configuration needs at most 64 edges");
    }
    let (pairs, _) = sample_map(h, phi, beta, plan, seed, |edges, rng| {
        let before = observable.evaluate(h, phi, edges, o);
        let mut after_edges = edges.to_vec();
        redraw_edges(h, phi, &mut after_edges, o, rng);
        (before, observable.evaluate(h, phi, &after_edges, o))
    })?;
    let before: Histogram<u64> = pairs.iter().map(|p| p.0).collect();
    let after: Histogram<u64> = pairs.iter().map(|p| p.1).collect();
    Ok(InvarianceReport {
        observable,
        samples: plan.samples,
        tv: histogram_tv(&before, &after),
        chi_square: chi_square_homogeneity(&before, &after)?,
        before,
        after,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{exact_pmf, total_variation};
    use crate::rng;

    fn graph(n: usize, edges: &[(usize, usize)]) -> Arc<FiniteGraph> {
        Arc::new(FiniteGraph::new(n, edges.to_vec()).unwrap())
    }

    #[test]
    fn component_examples() {
        let p4 = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        let free = BoundaryPartition::free([0, 3]);
        let empty = ForestConfig::empty(p4.clone(), free.clone()).unwrap();
        assert_eq!(component_of(&empty, 2).unwrap(), vec![2]);
        let ab = ForestConfig::from_ids(p4.clone(), free, &[0]).unwrap();
        assert_eq!(component_of(&ab, 0).unwrap(), vec![0, 1]);
        let wired = ForestConfig::from_ids(p4, BoundaryPartition::wired([0, 3]), &[0]).unwrap();
        assert_eq!(component_of(&wired, 0).unwrap(), vec![0, 1, 3]);
    }

    #[test]
    fn singleton_class_is_unchanged() {
        let p4 = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        let f = ForestConfig::from_ids(p4, BoundaryPartition::free([]), &[0]).unwrap();
        let out = resample_component(&f, 3, &mut rng::from_seed(1)).unwrap();
        assert_eq!(out.after, f);
        assert!(out.redraw_tree_edges.is_empty());
    }

    #[test]
    fn triangle_class_redraws_uniform_tree() {
        let c3 = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        let f = ForestConfig::from_ids(c3, BoundaryPartition::free([]), &[0, 1]).unwrap();
        let mut r = rng::from_seed(5);
        let mut counts = [0u32; 3];
        for _ in 0..6000 {
            let out = resample_component(&f, 0, &mut r).unwrap();
            assert_eq!(out.class_vertices, vec![0, 1, 2]);
            assert_eq!(out.after.edge_count(), 2);
            let missing = (0..3).find(|&e| !out.after.contains(e)).unwrap();
            counts[missing] += 1;
        }
        assert!(counts.iter().all(|&c| (1850..2150).contains(&c)), "{counts:?}");
    }

    #[test]
    fn exact_invariance_on_small_graphs() {
        let c3 = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        let c4 = graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        for (g, phi) in [(c3, BoundaryPartition::free([])), (c4, BoundaryPartition::wired([0, 2]))] {
            let law = exact_pmf(&g, &phi, Beta::Finite(1.0)).unwrap();
            for o in 0..g.vertex_count() {
                let pushed = resample_push_forward(&g, &phi, &law, o).unwrap();
                assert!(total_variation(&law, &pushed) < 1e-10);
            }
        }
    }

    #[test]
    fn observable_names() {
        for o in Observable::ALL {
            assert_eq!(o.name().parse::<Observable>().unwrap(), o);
        }
        assert!("size".parse::<Observable>().is_err());
    }

    #[test]
    fn statistical_invariance_and_empty_run() {
        let c4 = graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        let phi = BoundaryPartition::free([]);
        let r = invariance_statistic(&c4, &phi, Beta::Finite(1.0), 0, SamplingPlan::new(20_000), Observable::DegreeOfO, 3).unwrap();
        assert!(r.tv < 0.03, "{}", r.tv);
        assert!(r.chi_square.p_value > 1e-3);
        let none = SamplingPlan { samples: 0, ..SamplingPlan::new(1) };
        assert!(invariance_statistic(&c4, &phi, Beta::Finite(1.0), 0, none, Observable::EdgeCount, 3).is_err());
    }
}
