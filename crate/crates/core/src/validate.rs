//! Exact finite-volume checks over the built-in suite.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::beta::Beta;
use crate::error::Result;
use crate::graph::{FiniteGraph, Subgraph, VertexId};
use crate::oracle::{self, EdgeMask, ExactLaw};
use crate::partition::{derive_inner, BoundaryPartition};
use crate::rng;
use crate::sampler::heat_bath_kernel;
use crate::suite::{self, SuiteGraph};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub cases: u64,
    /// Largest deviation seen, in the check's own units.
    pub worst: f64,
}

impl CheckResult {
    fn new(name: &str) -> Self {
        CheckResult { name: name.to_string(), passed: true, cases: 0, worst: 0.0 }
    }

    fn observe(&mut self, deviation: f64, tolerance: f64) {
        self.cases += 1;
        if deviation.is_nan() || deviation > self.worst {
            self.worst = deviation;
        }
        if deviation.is_nan() || deviation > tolerance {
            self.passed = false;
        }
    }

    fn fail_unless(&mut self, ok: bool) {
        self.observe(if ok { 0.0 } else { 1.0 }, 0.0);
    }
}

pub const SUITE_BETAS: [f64; 3] = [0.5, 1.0, 2.0];

fn window_mask(h: &Subgraph) -> EdgeMask {
    h.edge_ids().fold(0, |m, e| m | (1 << e))
}

/// Largest TV distance, over outside configurations of positive probability,
/// between the conditional law of the window edges and the window law with
/// the derived boundary relation.
pub fn gibbs_identity_deviation(g: &FiniteGraph, phi: &BoundaryPartition, beta: Beta, h: &Subgraph) -> Result<f64> {
    let law = oracle::exact_pmf(g, phi, beta)?;
    let inside = window_mask(h);
    let mut groups: BTreeMap<EdgeMask, Vec<(EdgeMask, f64)>> = BTreeMap::new();
    for (mask, p) in law.iter() {
        groups.entry(mask & !inside).or_default().push((mask & inside, p));
    }
    let local = h.extract(g);
    let m = g.edge_count();
    let mut worst: f64 = 0.0;
    for (outside, atoms) in groups {
        let conditional = ExactLaw::from_weights(atoms)?;
        let psi = derive_inner(g, phi, &oracle::mask_to_bools(outside, m), &Subgraph::full(g), h)?;
        let window_law = oracle::exact_pmf(&local.graph, &local.localize(&psi), beta)?;
        let lifted = window_law.push_forward(|l| oracle::mask_to_ids(l).into_iter().fold(0, |acc, i| acc | (1 << local.edges[i])));
        worst = worst.max(oracle::total_variation(&conditional, &lifted));
    }
    Ok(worst)
}

/// Enumeration agrees with the matrix-tree count, and closed forms hold.
pub fn oracle_self_consistency(graphs: &[SuiteGraph]) -> Result<CheckResult> {
    let mut c = CheckResult::new("oracle-self-consistency");
    for s in graphs {
        for phi in s.boundary_partitions() {
            let forests = oracle::enumerate_forests(&s.graph, &phi)?;
            let top = forests.iter().map(|f| f.count_ones()).max().unwrap_or(0);
            let maximal = forests.iter().filter(|f| f.count_ones() == top).count() as u128;
            c.fail_unless(maximal == oracle::count_maximal_forests(&s.graph, &phi)?);
        }
    }
    let p4 = suite::path4();
    for b in SUITE_BETAS {
        let z = oracle::partition_function(&p4.graph, &BoundaryPartition::free([]), b)?;
        c.observe((z - (1.0 + b).powi(3)).abs(), 1e-12);
    }
    let c3 = suite::cycle3();
    let law = oracle::exact_pmf(&c3.graph, &BoundaryPartition::free([]), Beta::Finite(1.0))?;
    c.fail_unless(law.len() == 7);
    for &p in law.probs() {
        c.observe((p - 1.0 / 7.0).abs(), 1e-12);
    }
    Ok(c)
}

pub fn gibbs_identity(graphs: &[SuiteGraph]) -> Result<CheckResult> {
    let mut c = CheckResult::new("finite-gibbs-identity");
    for s in graphs {
        let windows = s.windows();
        for (_, phi) in s.standard_partitions() {
            for b in SUITE_BETAS {
                for h in &windows {
                    c.observe(gibbs_identity_deviation(&s.graph, &phi, Beta::Finite(b), h)?, 1e-10);
                }
            }
        }
    }
    Ok(c)
}

/// Detailed balance of the heat-bath kernel, plus irreducibility from the
/// empty forest and a positive holding probability.
pub fn heat_bath_balance(graphs: &[SuiteGraph]) -> Result<CheckResult> {
    let mut c = CheckResult::new("heat-bath-detailed-balance");
    for s in graphs.iter().filter(|s| s.graph.edge_count() <= 9) {
        for (_, phi) in s.standard_partitions() {
            for b in SUITE_BETAS {
                let (states, k) = heat_bath_kernel(&s.graph, &phi, b)?;
                let law = oracle::exact_pmf(&s.graph, &phi, Beta::Finite(b))?;
                let pi: Vec<f64> = states.iter().map(|&m| law.prob(m)).collect();
                let mut worst: f64 = 0.0;
                for i in 0..states.len() {
                    for j in 0..states.len() {
                        worst = worst.max((pi[i] * k[i][j] - pi[j] * k[j][i]).abs());
                    }
                }
                c.observe(worst, 1e-12);
                let mut seen = vec![false; states.len()];
                let mut stack = vec![0usize];
                seen[0] = true;
                while let Some(i) = stack.pop() {
                    for j in 0..states.len() {
                        if k[i][j] > 0.0 && !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
                c.fail_unless(seen.iter().all(|&x| x) && k[0][0] > 0.0);
            }
        }
    }
    Ok(c)
}

/// At `beta = inf`, refining the boundary partition never lowers an edge marginal.
pub fn refinement_monotonicity(graphs: &[SuiteGraph]) -> Result<CheckResult> {
    let mut c = CheckResult::new("refinement-monotonicity");
    for s in graphs {
        let parts = s.boundary_partitions();
        let marginals: Vec<Vec<f64>> = parts
            .iter()
            .map(|phi| {
                let law = oracle::exact_pmf(&s.graph, phi, Beta::Infinite)?;
                Ok((0..s.graph.edge_count()).map(|e| oracle::edge_marginal(&law, e)).collect())
            })
            .collect::<Result<_>>()?;
        for (i, fine) in parts.iter().enumerate() {
            for (j, coarse) in parts.iter().enumerate() {
                if i != j && fine.refines(coarse)? {
                    for e in 0..s.graph.edge_count() {
                        c.observe((marginals[j][e] - marginals[i][e]).max(0.0), 1e-12);
                    }
                }
            }
        }
    }
    Ok(c)
}

fn random_subgraph_within<R: Rng + ?Sized>(g: &FiniteGraph, outer: &Subgraph, rng: &mut R) -> Subgraph {
    let vs: Vec<VertexId> = outer.vertex_ids().into_iter().filter(|_| rng.random_bool(0.7)).collect();
    let es: Vec<usize> = outer
        .edge_ids()
        .filter(|&e| {
            let (a, b) = g.endpoints(e);
            vs.contains(&a) && vs.contains(&b) && rng.random_bool(0.8)
        })
        .collect();
    Subgraph::from_parts(g, &vs, &es).expect("edges chosen inside the vertex set")
}

/// Deriving `H` from `G` directly equals deriving it through an intermediate `K`.
pub fn con_transitivity(trials: usize, seed: u64) -> Result<CheckResult> {
    let mut c = CheckResult::new("con-transitivity");
    let mut r = rng::from_seed(seed);
    let graphs = suite::suite();
    for _ in 0..trials {
        let s = &graphs[r.random_range(0..graphs.len())];
        let g = &s.graph;
        let parts = s.boundary_partitions();
        let phi = &parts[r.random_range(0..parts.len())];
        let edges: Vec<bool> = (0..g.edge_count()).map(|_| r.random_bool(0.5)).collect();
        let full = Subgraph::full(g);
        let k = random_subgraph_within(g, &full, &mut r);
        let h = random_subgraph_within(g, &k, &mut r);
        let direct = derive_inner(g, phi, &edges, &full, &h)?;
        let via = derive_inner(g, phi, &edges, &full, &k)?;
        let nested = derive_inner(g, &via, &edges, &k, &h)?;
        c.fail_unless(direct == nested);
    }
    Ok(c)
}

/// Conditional presence of each edge given the rest: zero when the derived
/// relation joins its endpoints, `beta / (1 + beta)` otherwise.
pub fn edge_conditional_law(graphs: &[SuiteGraph]) -> Result<CheckResult> {
    let mut c = CheckResult::new("edge-conditional-law");
    let free = oracle::exact_pmf(&suite::single_edge().graph, &BoundaryPartition::free([0, 1]), Beta::Finite(1.0))?;
    c.observe((oracle::edge_marginal(&free, 0) - 0.5).abs(), 0.0);
    let wired = oracle::exact_pmf(&suite::single_edge().graph, &BoundaryPartition::wired([0, 1]), Beta::Finite(1.0))?;
    c.observe(oracle::edge_marginal(&wired, 0), 0.0);
    for s in graphs {
        let g = &s.graph;
        let m = g.edge_count();
        for (_, phi) in s.standard_partitions() {
            for b in SUITE_BETAS {
                let law = oracle::exact_pmf(g, &phi, Beta::Finite(b))?;
                for e in 0..m {
                    let (x, y) = g.endpoints(e);
                    let window = Subgraph::from_parts(g, &[x, y], &[e])?;
                    let mut by_rest: BTreeMap<EdgeMask, (f64, f64)> = BTreeMap::new();
                    for (mask, p) in law.iter() {
                        let slot = by_rest.entry(mask & !(1 << e)).or_default();
                        slot.0 += p;
                        if mask >> e & 1 == 1 {
                            slot.1 += p;
                        }
                    }
                    for (rest, (total, on)) in by_rest {
                        let psi = derive_inner(g, &phi, &oracle::mask_to_bools(rest, m), &Subgraph::full(g), &window)?;
                        let expected = if psi.related(x, y) { 0.0 } else { b / (1.0 + b) };
                        c.observe((on / total - expected).abs(), 1e-12);
                    }
                }
            }
        }
    }
    Ok(c)
}

/// Exact n-step transition probabilities of simple random walk.
pub fn walk_matrix_power(g: &FiniteGraph, n: usize) -> Vec<Vec<f64>> {
    let k = g.vertex_count();
    let mut p = vec![vec![0.0; k]; k];
    for (v, row) in p.iter_mut().enumerate() {
        let d = g.degree(v);
        if d == 0 {
            row[v] = 1.0;
            continue;
        }
        for &(w, _) in g.neighbors(v) {
            row[w] += 1.0 / d as f64;
        }
    }
    let mut out: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _ in 0..n {
        out = (0..k)
            .map(|i| (0..k).map(|j| (0..k).map(|l| out[i][l] * p[l][j]).sum()).collect())
            .collect();
    }
    out
}

/// `deg(u) P_u(Y_n = v) = deg(v) P_v(Y_n = u)` for `n <= 6`.
pub fn degree_reversibility(graphs: &[SuiteGraph]) -> CheckResult {
    let mut c = CheckResult::new("degree-biased-reversibility");
    for s in graphs {
        let g = &s.graph;
        for n in 0..=6 {
            let pn = walk_matrix_power(g, n);
            for u in 0..g.vertex_count() {
                for v in 0..g.vertex_count() {
                    let lhs = g.degree(u) as f64 * pn[u][v];
                    let rhs = g.degree(v) as f64 * pn[v][u];
                    c.observe((lhs - rhs).abs(), 1e-12);
                }
            }
        }
    }
    c
}

/// Exact resampling-kernel invariance on C3, C4 and P4.
pub fn resample_invariance() -> Result<CheckResult> {
    let mut c = CheckResult::new("resample-kernel-invariance");
    for s in [suite::cycle3(), suite::cycle4(), suite::path4()] {
        for (_, phi) in s.standard_partitions() {
            for b in SUITE_BETAS {
                let law = oracle::exact_pmf(&s.graph, &phi, Beta::Finite(b))?;
                for o in 0..s.graph.vertex_count() {
                    let pushed = crate::resample::resample_push_forward(&s.graph, &phi, &law, o)?;
                    c.observe(oracle::total_variation(&law, &pushed), 1e-10);
                }
            }
        }
    }
    Ok(c)
}

/// All exact checks over the suite.
pub fn run_all(seed: u64) -> Result<Vec<CheckResult>> {
    let graphs = suite::suite();
    Ok(vec![
        oracle_self_consistency(&graphs)?,
        gibbs_identity(&graphs)?,
        heat_bath_balance(&graphs)?,
        resample_invariance()?,
        refinement_monotonicity(&graphs)?,
        con_transitivity(10_000, seed)?,
        edge_conditional_law(&graphs)?,
        degree_reversibility(&graphs),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_graphs_pass() {
        let graphs = vec![suite::single_edge(), suite::path4(), suite::cycle3(), suite::cycle4()];
        for c in [
            oracle_self_consistency(&graphs).unwrap(),
            gibbs_identity(&graphs).unwrap(),
            heat_bath_balance(&graphs).unwrap(),
            refinement_monotonicity(&graphs).unwrap(),
            con_transitivity(500, 1).unwrap(),
            edge_conditional_law(&graphs).unwrap(),
            degree_reversibility(&graphs),
        ] {
            assert!(c.passed, "{c:?}");
            assert!(c.cases > 0);
        }
    }

    #[test]
    fn triangle_window_conditioning() {
        // Given the other two edges of C3, the third edge is forced absent
        // and the identity still holds.
        let s = suite::cycle3();
        let phi = BoundaryPartition::free([]);
        let h = Subgraph::from_parts(&s.graph, &[0, 2], &[2]).unwrap();
        let law = oracle::exact_pmf(&s.graph, &phi, Beta::Finite(1.0)).unwrap();
        assert_eq!(law.iter().filter(|(m, _)| m & 0b011 == 0b011).count(), 1);
        assert!(gibbs_identity_deviation(&s.graph, &phi, Beta::Finite(1.0), &h).unwrap() < 1e-12);
    }

    #[test]
    fn walk_matrix_rows() {
        let g = suite::grid3x3();
        let p = walk_matrix_power(&g.graph, 4);
        for row in p {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
