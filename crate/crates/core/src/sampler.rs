//! Monte Carlo samplers for the arboreal gas.
//!
//! Finite `beta` uses a single-edge heat-bath chain; `beta = inf` uses
//! Wilson's algorithm on the quotient graph.

use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::beta::Beta;
use crate::error::{invalid, Result};
use crate::forest::ForestConfig;
use crate::graph::{quotient, EdgeId, FiniteGraph, QuotientGraph, Subgraph};
use crate::linkcut::LinkCutForest;
use crate::oracle::{self, EdgeMask};
use crate::par::{self, REPLICA_STREAMS};
use crate::partition::{derive_inner, BoundaryPartition};
use crate::rng;

/// Heat-bath chain state. Connectivity of the forest in the quotient is
/// tracked by a link-cut forest over quotient classes.
#[derive(Debug, Clone)]
pub struct ChainState {
    host: Arc<FiniteGraph>,
    phi: BoundaryPartition,
    class_of: Vec<usize>,
    edges: Vec<bool>,
    links: LinkCutForest,
    sweep_count: u64,
    rng: rng::Rng,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    /// Endpoints already connected without the edge.
    ForcedAbsent,
    Present,
    Absent,
}

/// Proposal counters; they sum to the number of heat-bath steps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StepCounts {
    pub forced_absent: u64,
    pub set_present: u64,
    pub set_absent: u64,
}

impl StepCounts {
    pub fn record(&mut self, o: StepOutcome) {
        match o {
            StepOutcome::ForcedAbsent => self.forced_absent += 1,
            StepOutcome::Present => self.set_present += 1,
            StepOutcome::Absent => self.set_absent += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.forced_absent + self.set_present + self.set_absent
    }

    pub fn merge(&mut self, o: &StepCounts) {
        self.forced_absent += o.forced_absent;
        self.set_present += o.set_present;
        self.set_absent += o.set_absent;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplerReport {
    pub samples_drawn: u64,
    pub steps: StepCounts,
    pub seed: u64,
    pub wall_time: f64,
}

impl ChainState {
    pub fn new(host: Arc<FiniteGraph>, phi: BoundaryPartition, rng: rng::Rng) -> Result<Self> {
        let q = quotient(&host, &phi)?;
        let class_of = (0..host.vertex_count()).map(|v| q.class_of(v)).collect();
        let m = host.edge_count();
        Ok(ChainState {
            links: LinkCutForest::new(q.class_count()),
            host,
            phi,
            class_of,
            edges: vec![false; m],
            sweep_count: 0,
            rng,
        })
    }

    /// Chain started at `forest` instead of the empty configuration.
    pub fn from_forest(forest: &ForestConfig, rng: rng::Rng) -> Result<Self> {
        let mut s = ChainState::new(forest.host().clone(), forest.phi().clone(), rng)?;
        for e in forest.edge_ids() {
            let (a, b) = s.classes(e);
            s.links.link(a, b);
            s.edges[e] = true;
        }
        Ok(s)
    }

    fn classes(&self, e: EdgeId) -> (usize, usize) {
        let (a, b) = self.host.endpoints(e);
        (self.class_of[a], self.class_of[b])
    }

    pub fn edges(&self) -> &[bool] {
        &self.edges
    }

    pub fn sweep_count(&self) -> u64 {
        self.sweep_count
    }

    pub fn host(&self) -> &Arc<FiniteGraph> {
        &self.host
    }

    pub fn forest(&self) -> ForestConfig {
        ForestConfig::from_parts_unchecked(self.host.clone(), self.phi.clone(), self.edges.clone())
    }

    /// Conditional probability that `e` is present given the rest of the
    /// configuration: 0 if its endpoints are joined without it, else `p_open`.
    pub fn conditional_open_probability(&mut self, e: EdgeId, p_open: f64) -> f64 {
        if self.edges[e] {
            // A present edge is a bridge of the forest.
            return p_open;
        }
        let (a, b) = self.classes(e);
        if self.links.connected(a, b) {
            0.0
        } else {
            p_open
        }
    }

    fn set_edge(&mut self, e: EdgeId, on: bool) {
        if self.edges[e] == on {
            return;
        }
        let (a, b) = self.classes(e);
        if on {
            self.links.link(a, b);
        } else {
            self.links.cut(a, b);
        }
        self.edges[e] = on;
    }

    fn update(&mut self, e: EdgeId, p_open: f64) -> StepOutcome {
        let p = self.conditional_open_probability(e, p_open);
        if p == 0.0 {
            return StepOutcome::ForcedAbsent;
        }
        let on = self.rng.random::<f64>() < p;
        self.set_edge(e, on);
        if on {
            StepOutcome::Present
        } else {
            StepOutcome::Absent
        }
    }

    /// `|E|` heat-bath steps at uniformly chosen edges.
    pub fn sweep(&mut self, p_open: f64, counts: &mut StepCounts) {
        let m = self.edges.len();
        if m > 0 {
            for _ in 0..m {
                let e = self.rng.random_range(0..m);
                counts.record(self.update(e, p_open));
            }
        }
        self.sweep_count += 1;
    }

    pub fn rng_mut(&mut self) -> &mut rng::Rng {
        &mut self.rng
    }
}

fn finite_beta(beta: f64) -> Result<f64> {
    if beta.is_nan() || beta <= 0.0 || beta.is_infinite() {
        return invalid(format!("heat-bath needs 0 < beta < inf, got {beta}"));
    }
    Ok(beta / (1.0 + beta))
}

/// One heat-bath update of `edge`.
pub fn heat_bath_step(state: &mut ChainState, beta: f64, edge: EdgeId) -> Result<StepOutcome> {
    let p = finite_beta(beta)?;
    if edge >= state.edges.len() {
        return invalid(format!("edge {edge} not in host"));
    }
    Ok(state.update(edge, p))
}

/// Runs `sweeps * |E|` uniform-edge steps from the empty forest.
pub fn sample_arboreal(
    host: Arc<FiniteGraph>,
    phi: BoundaryPartition,
    beta: f64,
    sweeps: u64,
    seed: u64,
) -> Result<(ForestConfig, SamplerReport)> {
    let p = finite_beta(beta)?;
    if sweeps == 0 {
        return invalid("need at least one sweep");
    }
    let start = Instant::now();
    let mut state = ChainState::new(host, phi, rng::from_seed(seed))?;
    let mut steps = StepCounts::default();
    for _ in 0..sweeps {
        state.sweep(p, &mut steps);
    }
    let report = SamplerReport { samples_drawn: 1, steps, seed, wall_time: start.elapsed().as_secs_f64() };
    Ok((state.forest(), report))
}

/// Uniform maximal spanning forest of `q` by Wilson's algorithm, as base edge ids.
pub fn wilson_with_rng<R: Rng + ?Sized>(q: &QuotientGraph, rng: &mut R) -> Vec<EdgeId> {
    let k = q.class_count();
    let mut in_tree = vec![false; k];
    let mut next: Vec<(usize, EdgeId)> = vec![(usize::MAX, usize::MAX); k];
    let mut seen = vec![false; k];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for root in 0..k {
        if seen[root] {
            continue;
        }
        // Classes are visited in increasing id, so `root` is the lowest id
        // of its component.
        let mut members = vec![root];
        seen[root] = true;
        stack.push(root);
        while let Some(c) = stack.pop() {
            for &(d, _) in q.neighbors(c) {
                if !seen[d] {
                    seen[d] = true;
                    members.push(d);
                    stack.push(d);
                }
            }
        }
        members.sort_unstable();
        in_tree[root] = true;
        for &start in &members {
            let mut c = start;
            while !in_tree[c] {
                let nb = q.neighbors(c);
                next[c] = nb[rng.random_range(0..nb.len())];
                c = next[c].0;
            }
            let mut c = start;
            while !in_tree[c] {
                in_tree[c] = true;
                out.push(next[c].1);
                c = next[c].0;
            }
        }
    }
    out.sort_unstable();
    out
}

pub fn wilson_maximal_forest(q: &QuotientGraph, seed: u64) -> Vec<EdgeId> {
    wilson_with_rng(q, &mut rng::from_seed(seed))
}

/// Burn-in used when a caller gives none.
pub const DEFAULT_BURN_IN_SWEEPS: u64 = 1000;
pub const DEFAULT_THIN_SWEEPS: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SamplingPlan {
    pub samples: usize,
    pub burn_in: u64,
    pub thin: u64,
}

impl SamplingPlan {
    pub fn new(samples: usize) -> Self {
        SamplingPlan { samples, burn_in: DEFAULT_BURN_IN_SWEEPS, thin: DEFAULT_THIN_SWEEPS }
    }
}

/// Draws `plan.samples` configurations and maps each through `f`, which also
/// receives the generator of the chain that produced the sample.
///
/// Finite `beta` runs up to [`REPLICA_STREAMS`] independent chains from the
/// empty forest, each burned in and then thinned; `beta = inf` draws
/// independent Wilson samples; `beta = 0` returns the empty forest. Output
/// order is chain by chain, so results do not depend on the thread count.
pub fn sample_map<T, F>(
    host: &Arc<FiniteGraph>,
    phi: &BoundaryPartition,
    beta: Beta,
    plan: SamplingPlan,
    seed: u64,
    f: F,
) -> Result<(Vec<T>, SamplerReport)>
where
    T: Send,
    F: Fn(&[bool], &mut rng::Rng) -> T + Sync + Send,
{
    if plan.samples == 0 {
        return invalid("need at least one sample");
    }
    let start = Instant::now();
    let q = quotient(host, phi)?;
    let batches = par::batch_sizes(plan.samples, REPLICA_STREAMS);
    let m = host.edge_count();
    let chunks = par::map_replicas(batches.len(), |b| -> Result<(Vec<T>, StepCounts)> {
        let mut rng = rng::stream(seed, b as u64);
        let mut counts = StepCounts::default();
        let mut out = Vec::with_capacity(batches[b]);
        match beta {
            Beta::Finite(x) if x == 0.0 => {
                let empty = vec![false; m];
                for _ in 0..batches[b] {
                    out.push(f(&empty, &mut rng));
                }
            }
            Beta::Finite(x) => {
                let p = finite_beta(x)?;
                let mut state = ChainState::new(host.clone(), phi.clone(), rng)?;
                for _ in 0..plan.burn_in {
                    state.sweep(p, &mut counts);
                }
                for i in 0..batches[b] {
                    if i > 0 {
                        for _ in 0..plan.thin.max(1) {
                            state.sweep(p, &mut counts);
                        }
                    }
                    out.push(f(&state.edges, &mut state.rng));
                }
            }
            Beta::Infinite => {
                let mut mask = vec![false; m];
                for _ in 0..batches[b] {
                    mask.iter_mut().for_each(|x| *x = false);
                    for e in wilson_with_rng(&q, &mut rng) {
                        mask[e] = true;
                    }
                    out.push(f(&mask, &mut rng));
                }
            }
        }
        Ok((out, counts))
    });
    let mut all = Vec::with_capacity(plan.samples);
    let mut steps = StepCounts::default();
    for c in chunks {
        let (v, counts) = c?;
        all.extend(v);
        steps.merge(&counts);
    }
    let report = SamplerReport {
        samples_drawn: all.len() as u64,
        steps,
        seed,
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok((all, report))
}

/// One configuration from `P^phi_{h,beta}`: exact oracle sampling under the
/// enumeration guard, Wilson at `beta = inf`, MCMC otherwise.
pub fn draw_one<R: Rng + ?Sized>(h: &FiniteGraph, phi: &BoundaryPartition, beta: Beta, rng: &mut R) -> Result<Vec<bool>> {
    let m = h.edge_count();
    match beta {
        Beta::Finite(x) if x == 0.0 => Ok(vec![false; m]),
        Beta::Infinite => {
            let q = quotient(h, phi)?;
            Ok(oracle::mask_from_ids(&wilson_with_rng(&q, rng), m))
        }
        Beta::Finite(x) if m <= oracle::ENUMERATION_GUARD => {
            finite_beta(x)?;
            let law = oracle::exact_pmf(h, phi, beta)?;
            Ok(oracle::mask_to_bools(law.sample(rng), m))
        }
        Beta::Finite(x) => {
            let p = finite_beta(x)?;
            let mut state = ChainState::new(Arc::new(h.clone()), phi.clone(), rng::from_seed(rng.random()))?;
            let mut counts = StepCounts::default();
            for _ in 0..DEFAULT_BURN_IN_SWEEPS {
                state.sweep(p, &mut counts);
            }
            Ok(state.edges.clone())
        }
    }
}

/// Relation induced on the boundary of `h_prime` by `f` outside it.
pub fn window_boundary(f: &ForestConfig, h_prime: &Subgraph) -> Result<BoundaryPartition> {
    let host = f.host();
    if !h_prime.fits(host) {
        return invalid("window does not belong to the host graph");
    }
    derive_inner(host, f.phi(), f.edges(), &Subgraph::full(host), h_prime)
}

/// Replaces `f` inside `h_prime` by a fresh draw from the conditional law
/// given the configuration outside.
pub fn resample_window<R: Rng + ?Sized>(
    f: &ForestConfig,
    h_prime: &Subgraph,
    beta: Beta,
    rng: &mut R,
) -> Result<ForestConfig> {
    let psi = window_boundary(f, h_prime)?;
    let host = f.host();
    let local = h_prime.extract(host);
    let fresh = draw_one(&local.graph, &local.localize(&psi), beta, rng)?;
    let mut edges = f.edges().to_vec();
    for e in h_prime.edge_ids() {
        edges[e] = false;
    }
    for (l, &on) in fresh.iter().enumerate() {
        if on {
            edges[local.edges[l]] = true;
        }
    }
    Ok(ForestConfig::from_parts_unchecked(host.clone(), f.phi().clone(), edges))
}

/// Exact heat-bath kernel over the enumerated state space: states sorted by
/// mask and a dense row-stochastic matrix for the uniform-edge kernel.
pub fn heat_bath_kernel(h: &FiniteGraph, phi: &BoundaryPartition, beta: f64) -> Result<(Vec<EdgeMask>, Vec<Vec<f64>>)> {
    let p = finite_beta(beta)?;
    let states = oracle::enumerate_forests(h, phi)?;
    let m = h.edge_count();
    let host = Arc::new(h.clone());
    let index = |mask: EdgeMask| states.binary_search(&mask).expect("kernel stays in the state space");
    let mut matrix = vec![vec![0.0; states.len()]; states.len()];
    for (i, &s) in states.iter().enumerate() {
        if m == 0 {
            matrix[i][i] = 1.0;
            continue;
        }
        let forest = ForestConfig::new(host.clone(), phi.clone(), oracle::mask_to_bools(s, m))?;
        let mut chain = ChainState::from_forest(&forest, rng::from_seed(0))?;
        for e in 0..m {
            let q = chain.conditional_open_probability(e, p);
            let on = s | (1 << e);
            let off = s & !(1 << e);
            if q > 0.0 {
                matrix[i][index(on)] += q / m as f64;
            }
            matrix[i][index(off)] += (1.0 - q) / m as f64;
        }
    }
    Ok((states, matrix))
}
