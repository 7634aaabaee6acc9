//! Random walks and intersection diagnostics.
//!
//! Walks run on anything implementing [`WalkSpace`]: materialised graphs,
//! quotient graphs (classes as states, parallel edges counted with
//! multiplicity) and [`LatticeBox`], an implicit box of `Z^d` too large to
//! store. Scaling diagnostics additionally need coordinates, provided by
//! [`Embedded`].

use std::collections::HashMap;
use std::ops::Range;

use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::graph::{FiniteGraph, QuotientGraph, VertexId};
use crate::par::{self, REPLICA_STREAMS};
use crate::rng;
use crate::stats::Moments;

pub trait WalkSpace: Sync {
    fn vertex_count(&self) -> usize;
    fn degree(&self, v: VertexId) -> usize;
    fn neighbor(&self, v: VertexId, k: usize) -> VertexId;

    /// Index of a uniformly chosen incident edge, or `None` at an isolated vertex.
    fn random_step_index<R: Rng + ?Sized>(&self, v: VertexId, rng: &mut R) -> Option<usize> {
        match self.degree(v) {
            0 => None,
            d => Some(rng.random_range(0..d)),
        }
    }

    fn random_neighbor<R: Rng + ?Sized>(&self, v: VertexId, rng: &mut R) -> Option<VertexId> {
        self.random_step_index(v, rng).map(|k| self.neighbor(v, k))
    }
}

impl WalkSpace for FiniteGraph {
    fn vertex_count(&self) -> usize {
        FiniteGraph::vertex_count(self)
    }
    fn degree(&self, v: VertexId) -> usize {
        FiniteGraph::degree(self, v)
    }
    fn neighbor(&self, v: VertexId, k: usize) -> VertexId {
        self.neighbors(v)[k].0
    }
}

impl WalkSpace for QuotientGraph {
    fn vertex_count(&self) -> usize {
        self.class_count()
    }
    fn degree(&self, c: usize) -> usize {
        QuotientGraph::degree(self, c)
    }
    fn neighbor(&self, c: usize, k: usize) -> usize {
        self.neighbors(c)[k].0
    }
}

/// Coordinates in `Z^d` for scaling diagnostics.
pub trait Embedded: WalkSpace {
    fn dim(&self) -> usize;
    fn coord_into(&self, v: VertexId, out: &mut [i64]);
    /// Sup-norm distance, using the minimal image on tori.
    fn sup_distance(&self, u: VertexId, v: VertexId) -> i64;
    /// True if `v` lies on a face of the window, where the walk would feel
    /// the artificial boundary.
    fn on_window_face(&self, v: VertexId) -> bool;
}

/// Bounding box of an embedded graph, used to locate window faces.
#[derive(Debug, Clone)]
pub struct EmbeddedGraph<'a> {
    graph: &'a FiniteGraph,
    lo: Vec<i64>,
    hi: Vec<i64>,
}

impl<'a> EmbeddedGraph<'a> {
    pub fn new(graph: &'a FiniteGraph) -> Result<Self> {
        let Some(emb) = graph.embedding() else {
            return invalid("graph has no lattice embedding");
        };
        let d = emb.dim();
        let mut lo = vec![i64::MAX; d];
        let mut hi = vec![i64::MIN; d];
        for v in 0..graph.vertex_count() {
            for (a, &x) in emb.coord(v).iter().enumerate() {
                lo[a] = lo[a].min(x);
                hi[a] = hi[a].max(x);
            }
        }
        Ok(EmbeddedGraph { graph, lo, hi })
    }

    pub fn graph(&self) -> &FiniteGraph {
        self.graph
    }
}

impl WalkSpace for EmbeddedGraph<'_> {
    fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }
    fn degree(&self, v: VertexId) -> usize {
        self.graph.degree(v)
    }
    fn neighbor(&self, v: VertexId, k: usize) -> VertexId {
        self.graph.neighbors(v)[k].0
    }
}

impl Embedded for EmbeddedGraph<'_> {
    fn dim(&self) -> usize {
        self.lo.len()
    }
    fn coord_into(&self, v: VertexId, out: &mut [i64]) {
        out.copy_from_slice(self.graph.embedding().unwrap().coord(v));
    }
    fn sup_distance(&self, u: VertexId, v: VertexId) -> i64 {
        self.graph.embedding().unwrap().sup_distance(u, v)
    }
    fn on_window_face(&self, v: VertexId) -> bool {
        let emb = self.graph.embedding().unwrap();
        if emb.torus_side().is_some() {
            return false;
        }
        emb.coord(v)
            .iter()
            .enumerate()
            .any(|(a, &x)| x == self.lo[a] || x == self.hi[a])
    }
}

/// Implicit box `{0..side-1}^d` of `Z^d` with open boundary. Vertex ids are
/// mixed-radix indices with axis 0 fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeBox {
    dim: usize,
    side: usize,
    strides: [usize; 5],
}

impl LatticeBox {
    pub fn new(dim: usize, side: usize) -> Result<Self> {
        if !(1..=5).contains(&dim) {
            return invalid(format!("dimension {dim} outside 1..=5"));
        }
        if side < 2 {
            return invalid("lattice box side must be at least 2");
        }
        let mut strides = [0usize; 5];
        let mut s = 1usize;
        for stride in strides.iter_mut().take(dim) {
            *stride = s;
            s = s
                .checked_mul(side)
                .ok_or_else(|| crate::Error::ResourceLimit(format!("{side}^{dim} overflows")))?;
        }
        Ok(LatticeBox { dim, side, strides })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn axis(&self, v: VertexId, a: usize) -> usize {
        (v / self.strides[a]) % self.side
    }

    /// The vertex with every coordinate equal to `side / 2`.
    pub fn center(&self) -> VertexId {
        (0..self.dim).map(|a| (self.side / 2) * self.strides[a]).sum()
    }

    pub fn vertex_at(&self, coords: &[usize]) -> VertexId {
        coords.iter().enumerate().map(|(a, &x)| x * self.strides[a]).sum()
    }
}

impl WalkSpace for LatticeBox {
    fn vertex_count(&self) -> usize {
        self.strides[self.dim - 1] * self.side
    }

    fn degree(&self, v: VertexId) -> usize {
        (0..self.dim)
            .map(|a| {
                let x = self.axis(v, a);
                usize::from(x > 0) + usize::from(x + 1 < self.side)
            })
            .sum()
    }

    fn neighbor(&self, v: VertexId, k: usize) -> VertexId {
        let mut k = k;
        for a in 0..self.dim {
            let x = self.axis(v, a);
            if x > 0 {
                if k == 0 {
                    return v - self.strides[a];
                }
                k -= 1;
            }
            if x + 1 < self.side {
                if k == 0 {
                    return v + self.strides[a];
                }
                k -= 1;
            }
        }
        panic!("neighbor index out of range")
    }

    fn random_neighbor<R: Rng + ?Sized>(&self, v: VertexId, rng: &mut R) -> Option<VertexId> {
        // Rejection over the 2d directions is uniform over existing neighbours.
        loop {
            let dir = rng.random_range(0..2 * self.dim);
            let a = dir >> 1;
            let x = self.axis(v, a);
            if dir & 1 == 0 {
                if x > 0 {
                    return Some(v - self.strides[a]);
                }
            } else if x + 1 < self.side {
                return Some(v + self.strides[a]);
            }
        }
    }
}

impl Embedded for LatticeBox {
    fn dim(&self) -> usize {
        self.dim
    }
    fn coord_into(&self, v: VertexId, out: &mut [i64]) {
        for (a, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = self.axis(v, a) as i64;
        }
    }
    fn sup_distance(&self, u: VertexId, v: VertexId) -> i64 {
        (0..self.dim)
            .map(|a| (self.axis(u, a) as i64 - self.axis(v, a) as i64).abs())
            .max()
            .unwrap_or(0)
    }
    fn on_window_face(&self, v: VertexId) -> bool {
        (0..self.dim).any(|a| {
            let x = self.axis(v, a);
            x == 0 || x + 1 == self.side
        })
    }
}

/// Time-indexed vertex sequence. Index `t` of a two-sided walk lives at
/// position `t - start_time`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WalkTrajectory {
    vertices: Vec<VertexId>,
    start_time: i64,
}

impl WalkTrajectory {
    pub fn new(vertices: Vec<VertexId>, start_time: i64) -> Self {
        assert!(!vertices.is_empty(), "a trajectory visits at least one vertex");
        WalkTrajectory { vertices, start_time }
    }

    pub fn start_time(&self) -> i64 {
        self.start_time
    }

    /// One past the last time index.
    pub fn end_time(&self) -> i64 {
        self.start_time + self.vertices.len() as i64
    }

    pub fn times(&self) -> Range<i64> {
        self.start_time..self.end_time()
    }

    pub fn at(&self, t: i64) -> VertexId {
        self.vertices[(t - self.start_time) as usize]
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn slice(&self, r: &Range<i64>) -> Result<&[VertexId]> {
        if r.start > r.end {
            return invalid("time range is reversed");
        }
        if r.start < self.start_time || r.end > self.end_time() {
            return invalid(format!(
                "time range {r:?} outside trajectory domain {:?}",
                self.times()
            ));
        }
        let lo = (r.start - self.start_time) as usize;
        let hi = (r.end - self.start_time) as usize;
        Ok(&self.vertices[lo..hi])
    }
}

/// Simple random walk of `steps` steps, uniform over incident edges.
pub fn simple_walk<S: WalkSpace, R: Rng + ?Sized>(
    space: &S,
    start: VertexId,
    steps: usize,
    rng: &mut R,
) -> Result<WalkTrajectory> {
    if start >= space.vertex_count() {
        return invalid(format!("start vertex {start} not in graph"));
    }
    let mut vertices = Vec::with_capacity(steps + 1);
    vertices.push(start);
    let mut v = start;
    for _ in 0..steps {
        v = match space.random_neighbor(v, rng) {
            Some(w) => w,
            None => return invalid(format!("vertex {v} is isolated")),
        };
        vertices.push(v);
    }
    Ok(WalkTrajectory::new(vertices, 0))
}

/// Two independent one-sided walks glued at time 0: `X_n = X+_n` for
/// `n >= 0` and `X_n = X-_{-n}` for `n <= 0`.
pub fn two_sided_walk<S: WalkSpace, R: Rng + ?Sized>(
    space: &S,
    start: VertexId,
    forward: usize,
    backward: usize,
    rng: &mut R,
) -> Result<WalkTrajectory> {
    let plus = simple_walk(space, start, forward, rng)?;
    let minus = simple_walk(space, start, backward, rng)?;
    let mut vertices: Vec<VertexId> = minus.vertices.iter().rev().copied().collect();
    vertices.extend_from_slice(&plus.vertices[1..]);
    Ok(WalkTrajectory::new(vertices, -(backward as i64)))
}

/// Chronological loop erasure of a vertex sequence.
pub fn loop_erase(path: &[VertexId]) -> Vec<VertexId> {
    let mut out: Vec<VertexId> = Vec::new();
    let mut position: HashMap<VertexId, usize> = HashMap::new();
    for &v in path {
        if let Some(&i) = position.get(&v) {
            for u in out.drain(i + 1..) {
                position.remove(&u);
            }
        } else {
            position.insert(v, out.len());
            out.push(v);
        }
    }
    out
}

fn reachable<S: WalkSpace>(space: &S, start: VertexId, target: &dyn Fn(VertexId) -> bool) -> bool {
    let mut seen = vec![false; space.vertex_count()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(v) = stack.pop() {
        if target(v) {
            return true;
        }
        for k in 0..space.degree(v) {
            let w = space.neighbor(v, k);
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    false
}

/// Walks from `start` until the target set is hit, erasing loops as they close.
pub fn loop_erased_walk<S: WalkSpace, R: Rng + ?Sized>(
    space: &S,
    start: VertexId,
    target: &[VertexId],
    rng: &mut R,
) -> Result<Vec<VertexId>> {
    if target.is_empty() {
        return invalid("target set is empty");
    }
    if start >= space.vertex_count() || target.iter().any(|&t| t >= space.vertex_count()) {
        return invalid("vertex outside the graph");
    }
    let mut in_target = vec![false; space.vertex_count()];
    for &t in target {
        in_target[t] = true;
    }
    if !reachable(space, start, &|v| in_target[v]) {
        return invalid("target is unreachable from the start vertex");
    }
    let mut path = vec![start];
    let mut position: HashMap<VertexId, usize> = HashMap::from([(start, 0)]);
    let mut v = start;
    while !in_target[v] {
        v = space.random_neighbor(v, rng).expect("reachable vertices have neighbours");
        if let Some(&i) = position.get(&v) {
            for u in path.drain(i + 1..) {
                position.remove(&u);
            }
        } else {
            position.insert(v, path.len());
            path.push(v);
        }
    }
    Ok(path)
}

/// Number of index pairs `(i, j)` in the ranges with `x_i = y_j`.
pub fn intersection_count(
    x: &WalkTrajectory,
    y: &WalkTrajectory,
    i_range: Range<i64>,
    j_range: Range<i64>,
) -> Result<u64> {
    let xs = x.slice(&i_range)?;
    let ys = y.slice(&j_range)?;
    let mut visits: HashMap<VertexId, u64> = HashMap::with_capacity(xs.len());
    for &v in xs {
        *visits.entry(v).or_default() += 1;
    }
    Ok(ys.iter().map(|v| visits.get(v).copied().unwrap_or(0)).sum())
}

/// `L_A(v)`: visits to each vertex during the time window `a`.
pub fn local_times(walk: &WalkTrajectory, a: Range<i64>) -> Result<HashMap<VertexId, u64>> {
    let mut out = HashMap::new();
    for &v in walk.slice(&a)? {
        *out.entry(v).or_default() += 1;
    }
    Ok(out)
}

/// Local times of `walk` on `a` together with a Monte Carlo partial Green's
/// function `G_A(v)`, the mean of `L_A(v)` over `mc_walks` fresh walks from `start`.
pub fn local_time_and_green<S: WalkSpace, R: Rng + ?Sized>(
    space: &S,
    start: VertexId,
    a: Range<i64>,
    walk: &WalkTrajectory,
    mc_walks: usize,
    rng: &mut R,
) -> Result<(HashMap<VertexId, u64>, HashMap<VertexId, f64>)> {
    if mc_walks == 0 {
        return invalid("need at least one Monte Carlo walk");
    }
    if a.start < 0 {
        return invalid("time window must be nonnegative for one-sided walks");
    }
    let local = local_times(walk, a.clone())?;
    let mut green: HashMap<VertexId, f64> = HashMap::new();
    let steps = a.end.max(0) as usize;
    for _ in 0..mc_walks {
        let fresh = simple_walk(space, start, steps.saturating_sub(1), rng)?;
        for (v, n) in local_times(&fresh, a.clone())? {
            *green.entry(v).or_default() += n as f64;
        }
    }
    green.values_mut().for_each(|g| *g /= mc_walks as f64);
    Ok((local, green))
}

/// Per-scale output of [`dyadic_profile`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleRow {
    pub n: u32,
    pub t_n: u64,
    pub r_n: u64,
    /// Mean of `sum over the box of G * L` on the window `[t_{n-1}, t_n)`.
    pub intersections: f64,
    pub stderr: f64,
    /// Fraction of retained walks confined to the box up to `t_n`.
    pub confinement_frac: f64,
    /// Fraction of pairs discarded because a walk reached a window face before `t_n`.
    pub attrition: f64,
    pub b_n: f64,
    /// `b_n (t_n - t_{n-1}) / 2`.
    pub reference_level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleProfile {
    pub dim: usize,
    pub c1: f64,
    pub c2: f64,
    pub pairs: usize,
    pub rows: Vec<ScaleRow>,
}

impl ScaleProfile {
    pub fn row(&self, n: u32) -> Option<&ScaleRow> {
        self.rows.iter().find(|r| r.n == n)
    }
}

pub fn dyadic_time(n: u32) -> u64 {
    4u64.pow(n)
}

pub fn dyadic_radius(n: u32, c1: f64) -> u64 {
    (c1 * 2f64.powi(n as i32)).ceil() as u64
}

/// Smallest admissible window side for a profile up to `n_max`: odd and at least `4 r_{n_max}`.
pub fn profile_window_side(n_max: u32, c1: f64) -> usize {
    let s = 4 * dyadic_radius(n_max, c1) as usize + 1;
    s | 1
}

pub const MAX_PROFILE_SCALE: u32 = 7;

#[derive(Debug, Clone, Default)]
struct PairTally {
    stat: Vec<Moments>,
    confined: Vec<u64>,
    retained: Vec<u64>,
    discarded: Vec<u64>,
}

impl PairTally {
    fn new(scales: usize) -> Self {
        PairTally {
            stat: vec![Moments::default(); scales],
            confined: vec![0; scales],
            retained: vec![0; scales],
            discarded: vec![0; scales],
        }
    }

    fn merge(&mut self, o: &PairTally) {
        for s in 0..self.stat.len() {
            self.stat[s].merge(&o.stat[s]);
            self.confined[s] += o.confined[s];
            self.retained[s] += o.retained[s];
            self.discarded[s] += o.discarded[s];
        }
    }
}

/// Dyadic-scale intersection profile around `rho`.
///
/// For each pair of independent walks `X`, `Y` from `rho` and each scale
/// `n = 1..=n_max`, the statistic is
/// `sum over v in the box [-r_n, r_n]^d of L^X_A(v) L^Y_A(v)` with
/// `A = [t_{n-1}, t_n)`. Since `X` is independent of `Y`, `L^X_A` is an
/// unbiased single-walk estimate of `G_A`, so the mean estimates
/// `E[sum G_A L_A]`.
#[allow(clippy::too_many_arguments)]
pub fn dyadic_profile<S: Embedded>(
    space: &S,
    rho: VertexId,
    n_max: u32,
    c1: f64,
    c2: f64,
    mc_pairs: usize,
    seed: u64,
) -> Result<ScaleProfile> {
    if n_max == 0 || n_max > MAX_PROFILE_SCALE {
        return invalid(format!("n_max must be in 1..={MAX_PROFILE_SCALE}"));
    }
    if !(c1 > 0.0) || !(c2 > 0.0) {
        return invalid("c1 and c2 must be positive");
    }
    if mc_pairs == 0 {
        return invalid("need at least one walk pair");
    }
    if rho >= space.vertex_count() {
        return invalid("root vertex not in graph");
    }
    let scales = n_max as usize;
    let radii: Vec<i64> = (1..=n_max).map(|n| dyadic_radius(n, c1) as i64).collect();
    let steps = dyadic_time(n_max) as usize;
    let batches = par::batch_sizes(mc_pairs, REPLICA_STREAMS);
    let tallies = par::map_replicas(batches.len(), |b| -> Result<PairTally> {
        let mut rng = rng::stream(seed, b as u64);
        let mut tally = PairTally::new(scales);
        let mut visits: HashMap<VertexId, u64> = HashMap::new();
        for _ in 0..batches[b] {
            let x = simple_walk(space, rho, steps, &mut rng)?;
            let y = simple_walk(space, rho, steps, &mut rng)?;
            let first_face = |w: &WalkTrajectory| {
                w.vertices.iter().position(|&v| space.on_window_face(v)).unwrap_or(usize::MAX)
            };
            let face = first_face(&x).min(first_face(&y));
            let y_exit = y
                .vertices
                .iter()
                .map(|&v| space.sup_distance(rho, v))
                .scan(0i64, |m, d| {
                    *m = (*m).max(d);
                    Some(*m)
                })
                .collect::<Vec<_>>();
            for s in 0..scales {
                let n = s as u32 + 1;
                let (lo, hi) = (dyadic_time(n - 1) as usize, dyadic_time(n) as usize);
                if face <= hi {
                    tally.discarded[s] += 1;
                    continue;
                }
                tally.retained[s] += 1;
                if y_exit[hi] <= radii[s] {
                    tally.confined[s] += 1;
                }
                visits.clear();
                for &v in &x.vertices[lo..hi] {
                    if space.sup_distance(rho, v) <= radii[s] {
                        *visits.entry(v).or_default() += 1;
                    }
                }
                let stat: u64 = y.vertices[lo..hi]
                    .iter()
                    .map(|v| visits.get(v).copied().unwrap_or(0))
                    .sum();
                tally.stat[s].push(stat as f64);
            }
        }
        Ok(tally)
    });
    let mut total = PairTally::new(scales);
    for t in tallies {
        total.merge(&t?);
    }
    let d = space.dim() as i32;
    let rows = (0..scales)
        .map(|s| {
            let n = s as u32 + 1;
            let t_n = dyadic_time(n);
            let b_n = 2f64.powi(-(n as i32) * (d - 2)) / (4.0 * c2 * (4.0 * c1).powi(d));
            let retained = total.retained[s];
            ScaleRow {
                n,
                t_n,
                r_n: radii[s] as u64,
                intersections: total.stat[s].mean,
                stderr: total.stat[s].stderr(),
                confinement_frac: if retained == 0 { 0.0 } else { total.confined[s] as f64 / retained as f64 },
                attrition: total.discarded[s] as f64 / mc_pairs as f64,
                b_n,
                reference_level: b_n * (t_n - dyadic_time(n - 1)) as f64 / 2.0,
            }
        })
        .collect();
    Ok(ScaleProfile { dim: space.dim(), c1, c2, pairs: mc_pairs, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Monte Carlo `E[max_{i<=n} |Y_i - Y_0|_inf^2] / n` for walks from `rho`.
pub fn max_displacement_ratio<S: Embedded>(
    space: &S,
    rho: VertexId,
    n: usize,
    mc_walks: usize,
    seed: u64,
) -> Result<Estimate> {
    if n == 0 {
        return invalid("need at least one step");
    }
    if mc_walks == 0 {
        return invalid("need at least one walk");
    }
    if rho >= space.vertex_count() || space.degree(rho) == 0 {
        return invalid("root must be a non-isolated vertex");
    }
    let batches = par::batch_sizes(mc_walks, REPLICA_STREAMS);
    let parts = par::map_replicas(batches.len(), |b| {
        let mut rng = rng::stream(seed, b as u64);
        let mut m = Moments::default();
        for _ in 0..batches[b] {
            let mut v = rho;
            let mut best = 0i64;
            for _ in 0..n {
                v = space.random_neighbor(v, &mut rng).expect("connected root");
                best = best.max(space.sup_distance(rho, v));
            }
            m.push((best * best) as f64 / n as f64);
        }
        m
    });
    let mut total = Moments::default();
    parts.iter().for_each(|p| total.merge(p));
    Ok(Estimate { mean: total.mean, stderr: total.stderr() })
}

/// `C0` estimate: square root of the largest displacement ratio over `ns`.
pub fn estimate_c0<S: Embedded>(space: &S, rho: VertexId, ns: &[usize], mc_walks: usize, seed: u64) -> Result<f64> {
    let mut best: f64 = 0.0;
    for (i, &n) in ns.iter().enumerate() {
        let r = max_displacement_ratio(space, rho, n, mc_walks, seed.wrapping_add(i as u64))?;
        best = best.max(r.mean);
    }
    Ok(best.sqrt())
}

/// Default confinement tolerance.
pub const DEFAULT_EPSILON: f64 = 0.25;

/// `c1 = sqrt(2 C0 / eps)` and `c2 = 2 / eps`.
pub fn profile_constants(c0: f64, epsilon: f64) -> (f64, f64) {
    ((2.0 * c0 / epsilon).sqrt(), 2.0 / epsilon)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReversalEstimate {
    /// `deg(u) P_u(Y_n = v)`.
    pub forward: Estimate,
    /// `deg(v) P_v(Y_n = u)`.
    pub backward: Estimate,
}

impl ReversalEstimate {
    pub fn pooled_stderr(&self) -> f64 {
        self.forward.stderr.hypot(self.backward.stderr)
    }
}

fn hit_probability<S: WalkSpace>(space: &S, from: VertexId, to: VertexId, n: usize, mc: usize, seed: u64) -> Estimate {
    let batches = par::batch_sizes(mc, REPLICA_STREAMS);
    let hits: Vec<u64> = par::map_replicas(batches.len(), |b| {
        let mut rng = rng::stream(seed, b as u64);
        let mut hits = 0u64;
        for _ in 0..batches[b] {
            let mut v = from;
            for _ in 0..n {
                v = space.random_neighbor(v, &mut rng).expect("non-isolated");
            }
            hits += u64::from(v == to);
        }
        hits
    });
    let p = hits.iter().sum::<u64>() as f64 / mc as f64;
    let d = space.degree(from) as f64;
    Estimate { mean: d * p, stderr: d * (p * (1.0 - p) / mc as f64).sqrt() }
}

/// Monte Carlo estimates of both sides of `deg(u) P_u(Y_n = v) = deg(v) P_v(Y_n = u)`.
pub fn reversal_check<S: WalkSpace>(space: &S, u: VertexId, v: VertexId, n: usize, mc: usize, seed: u64) -> Result<ReversalEstimate> {
    if u >= space.vertex_count() || v >= space.vertex_count() {
        return invalid("vertex outside the graph");
    }
    if mc == 0 {
        return invalid("need at least one walk");
    }
    if n > 0 && (space.degree(u) == 0 || space.degree(v) == 0) {
        return invalid("walk endpoints must not be isolated");
    }
    let forward = hit_probability(space, u, v, n, mc, seed);
    let backward = if u == v { forward } else { hit_probability(space, v, u, n, mc, seed ^ 0x9e37_79b9_7f4a_7c15) };
    Ok(ReversalEstimate { forward, backward })
}

/// Site percolation on a box: sites open with probability `p`; returns the
/// largest open cluster as an embedded graph and its vertex closest to the centre.
pub fn percolation_cluster(dim: usize, side: usize, p: f64, seed: u64) -> Result<(FiniteGraph, VertexId)> {
    if !(0.0..=1.0).contains(&p) {
        return invalid("site probability must be in [0, 1]");
    }
    let lattice = crate::graph::build_lattice_window(dim, side, false)?;
    let mut rng = rng::from_seed(seed);
    let open: Vec<bool> = (0..lattice.vertex_count()).map(|_| rng.random::<f64>() < p).collect();
    let active: Vec<bool> = lattice.edges().iter().map(|&(a, b)| open[a] && open[b]).collect();
    let comps = crate::graph::components(&lattice, &active);
    let mut sizes: HashMap<VertexId, usize> = HashMap::new();
    for v in (0..lattice.vertex_count()).filter(|&v| open[v]) {
        *sizes.entry(comps.label(v)).or_default() += 1;
    }
    let Some((&label, _)) = sizes.iter().max_by_key(|&(&l, &s)| (s, std::cmp::Reverse(l))) else {
        return invalid("no open sites");
    };
    let members: Vec<VertexId> = (0..lattice.vertex_count())
        .filter(|&v| open[v] && comps.label(v) == label)
        .collect();
    let cluster = crate::graph::induced_subgraph(&lattice, &members);
    let emb = cluster.graph.embedding().expect("lattice is embedded");
    let mid = (side / 2) as i64;
    let rho = (0..cluster.graph.vertex_count())
        .min_by_key(|&v| emb.coord(v).iter().map(|&x| (x - mid).abs()).max().unwrap_or(0))
        .expect("nonempty cluster");
    Ok((cluster.graph, rho))
}
