//! Exact finite-volume laws on small graphs.
//!
//! Forests are enumerated as edge bitmasks (bit `e` set iff edge `e` is
//! present), so host graphs are limited to the enumeration guard.
//! Spanning-forest counts come from the matrix-tree theorem with
//! fraction-free integer elimination and serve as an independent check on
//! the enumeration.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::beta::Beta;
use crate::error::{invalid, Error, Result};
use crate::graph::{quotient, EdgeId, FiniteGraph};
use crate::partition::{BoundaryMixture, BoundaryPartition};
use crate::unionfind::DisjointSets;

pub type EdgeMask = u64;

/// Default cap on host edges for exhaustive enumeration.
pub const ENUMERATION_GUARD: usize = 25;
/// Largest quotient handled by the determinant route.
pub const MAX_QUOTIENT_CLASSES: usize = 64;
pub const LAW_TOLERANCE: f64 = 1e-12;

pub fn mask_to_ids(mask: EdgeMask) -> Vec<EdgeId> {
    (0..64).filter(|&e| mask >> e & 1 == 1).collect()
}

pub fn ids_to_mask(ids: &[EdgeId]) -> EdgeMask {
    ids.iter().fold(0, |m, &e| m | (1 << e))
}

pub fn mask_to_bools(mask: EdgeMask, edge_count: usize) -> Vec<bool> {
    (0..edge_count).map(|e| mask >> e & 1 == 1).collect()
}

/// Host-sized boolean mask with the given edge ids set.
pub fn mask_from_ids(ids: &[EdgeId], edge_count: usize) -> Vec<bool> {
    let mut out = vec![false; edge_count];
    for &e in ids {
        out[e] = true;
    }
    out
}

pub fn bools_to_mask(edges: &[bool]) -> EdgeMask {
    edges
        .iter()
        .enumerate()
        .fold(0, |m, (e, &on)| if on { m | (1 << e) } else { m })
}

/// Compensated sum.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for x in values {
        let y = x - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

/// A finitely supported law on edge sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactLaw {
    support: Vec<EdgeMask>,
    probs: Vec<f64>,
}

impl ExactLaw {
    /// Builds a law from weighted atoms. Weights are normalised; repeated atoms merge.
    pub fn from_weights<I: IntoIterator<Item = (EdgeMask, f64)>>(atoms: I) -> Result<Self> {
        let mut acc: BTreeMap<EdgeMask, Vec<f64>> = BTreeMap::new();
        for (m, w) in atoms {
            if !(w >= 0.0) || !w.is_finite() {
                return invalid(format!("weight {w} is not a nonnegative number"));
            }
            acc.entry(m).or_default().push(w);
        }
        let merged: Vec<(EdgeMask, f64)> = acc.into_iter().map(|(m, ws)| (m, kahan_sum(ws))).collect();
        let total = kahan_sum(merged.iter().map(|a| a.1));
        if !(total > 0.0) {
            return invalid("law has no mass");
        }
        let (support, probs) = merged
            .into_iter()
            .filter(|&(_, w)| w > 0.0)
            .map(|(m, w)| (m, w / total))
            .unzip();
        Ok(ExactLaw { support, probs })
    }

    pub fn point_mass(mask: EdgeMask) -> Self {
        ExactLaw { support: vec![mask], probs: vec![1.0] }
    }

    pub fn support(&self) -> &[EdgeMask] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (EdgeMask, f64)> + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn prob(&self, mask: EdgeMask) -> f64 {
        self.support
            .binary_search(&mask)
            .map_or(0.0, |i| self.probs[i])
    }

    /// Draws one atom by inversion.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> EdgeMask {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (m, p) in self.iter() {
            acc += p;
            if u < acc {
                return m;
            }
        }
        *self.support.last().expect("law is nonempty")
    }

    /// Law of `f(F)` for `F` drawn from this law.
    pub fn push_forward(&self, f: impl Fn(EdgeMask) -> EdgeMask) -> ExactLaw {
        ExactLaw::from_weights(self.iter().map(|(m, p)| (f(m), p))).expect("push-forward of a law")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&LawDocument {
            support: self.support.iter().map(|&m| mask_to_ids(m)).collect(),
            probs: self.probs.clone(),
        })
        .expect("law serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: LawDocument = serde_json::from_str(text)?;
        if doc.support.len() != doc.probs.len() {
            return invalid("support and probs differ in length");
        }
        if doc.support.iter().flatten().any(|&e| e >= 64) {
            return invalid("edge ids in exact laws must be below 64");
        }
        let law = ExactLaw::from_weights(
            doc.support.iter().map(|ids| ids_to_mask(ids)).zip(doc.probs.iter().copied()),
        )?;
        if (kahan_sum(doc.probs.iter().copied()) - 1.0).abs() > LAW_TOLERANCE {
            return invalid("probabilities do not sum to 1");
        }
        Ok(law)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LawDocument {
    support: Vec<Vec<EdgeId>>,
    probs: Vec<f64>,
}

fn check_guard(h: &FiniteGraph, guard: usize) -> Result<()> {
    if h.edge_count() > guard.min(63) {
        return Err(Error::ResourceLimit(format!(
            "{} edges exceed the enumeration guard of {}",
            h.edge_count(),
            guard.min(63)
        )));
    }
    Ok(())
}

fn check_phi(h: &FiniteGraph, phi: &BoundaryPartition) -> Result<()> {
    if phi.ground_set().iter().any(|&v| v >= h.vertex_count()) {
        return invalid("boundary partition is not inside the graph");
    }
    Ok(())
}

/// Union-find without path compression, so unions can be undone.
struct RollbackSets {
    parent: Vec<usize>,
    size: Vec<usize>,
    history: Vec<Option<(usize, usize)>>,
}

impl RollbackSets {
    fn new(n: usize) -> Self {
        RollbackSets { parent: (0..n).collect(), size: vec![1; n], history: Vec::new() }
    }

    fn root(&self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.root(a), self.root(b));
        if ra == rb {
            self.history.push(None);
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        self.history.push(Some((ra, rb)));
        true
    }

    fn undo(&mut self) {
        if let Some(Some((ra, rb))) = self.history.pop() {
            self.parent[rb] = rb;
            self.size[ra] -= self.size[rb];
        }
    }
}

/// Every edge set of `h` that is acyclic in `h/phi`, in increasing bitmask order.
pub fn enumerate_forests(h: &FiniteGraph, phi: &BoundaryPartition) -> Result<Vec<EdgeMask>> {
    enumerate_forests_with_guard(h, phi, ENUMERATION_GUARD)
}

pub fn enumerate_forests_with_guard(
    h: &FiniteGraph,
    phi: &BoundaryPartition,
    guard: usize,
) -> Result<Vec<EdgeMask>> {
    check_guard(h, guard)?;
    check_phi(h, phi)?;
    let mut sets = RollbackSets::new(h.vertex_count());
    for (v, r) in phi.identifications() {
        sets.union(v, r);
    }
    sets.history.clear();
    let mut out = Vec::new();
    fn rec(e: usize, mask: EdgeMask, h: &FiniteGraph, sets: &mut RollbackSets, out: &mut Vec<EdgeMask>) {
        if e == h.edge_count() {
            out.push(mask);
            return;
        }
        rec(e + 1, mask, h, sets, out);
        let (a, b) = h.endpoints(e);
        if sets.union(a, b) {
            rec(e + 1, mask | (1 << e), h, sets, out);
        }
        sets.undo();
    }
    rec(0, 0, h, &mut sets, &mut out);
    out.sort_unstable();
    Ok(out)
}

/// Size of a maximal spanning forest of `h/phi`: classes minus quotient components.
pub fn maximal_forest_size(h: &FiniteGraph, phi: &BoundaryPartition) -> Result<usize> {
    check_phi(h, phi)?;
    let q = quotient(h, phi)?;
    let mut ds = DisjointSets::new(q.class_count());
    for &(a, b, _) in q.quotient_edges() {
        ds.union(a, b);
    }
    Ok(q.class_count() - ds.component_count())
}

/// Number of forests extending `phi`, grouped by edge count.
pub fn forest_size_counts(h: &FiniteGraph, phi: &BoundaryPartition) -> Result<Vec<u64>> {
    let forests = enumerate_forests(h, phi)?;
    let mut counts = vec![0u64; h.edge_count() + 1];
    for m in forests {
        counts[m.count_ones() as usize] += 1;
    }
    Ok(counts)
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + kahan_sum(terms.iter().map(|t| (t - max).exp())).ln()
}

/// `ln Z` where `Z = sum over extending forests of beta^|F|`, evaluated in log space.
pub fn log_partition_function(h: &FiniteGraph, phi: &BoundaryPartition, beta: f64) -> Result<f64> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return invalid("partition function needs a finite nonnegative beta");
    }
    let counts = forest_size_counts(h, phi)?;
    if beta == 0.0 {
        return Ok(0.0);
    }
    let terms: Vec<f64> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, &c)| (c as f64).ln() + k as f64 * beta.ln())
        .collect();
    Ok(log_sum_exp(&terms))
}

pub fn partition_function(h: &FiniteGraph, phi: &BoundaryPartition, beta: f64) -> Result<f64> {
    log_partition_function(h, phi, beta).map(f64::exp)
}

/// The finite-volume arboreal gas law on `h` with boundary condition `phi`.
pub fn exact_pmf(h: &FiniteGraph, phi: &BoundaryPartition, beta: Beta) -> Result<ExactLaw> {
    let forests = enumerate_forests(h, phi)?;
    match beta {
        Beta::Finite(b) if b == 0.0 => Ok(ExactLaw::point_mass(0)),
        Beta::Finite(b) => {
            if !(b > 0.0) || !b.is_finite() {
                return invalid(format!("beta {b} is not a valid weight"));
            }
            let log_z = log_partition_function(h, phi, b)?;
            let probs: Vec<f64> = forests
                .iter()
                .map(|m| (m.count_ones() as f64 * b.ln() - log_z).exp())
                .collect();
            let total = kahan_sum(probs.iter().copied());
            let probs = probs.into_iter().map(|p| p / total).collect();
            Ok(ExactLaw { support: forests, probs })
        }
        Beta::Infinite => {
            let top = forests.iter().map(|m| m.count_ones()).max().unwrap_or(0);
            let support: Vec<EdgeMask> = forests.into_iter().filter(|m| m.count_ones() == top).collect();
            let p = 1.0 / support.len() as f64;
            let probs = vec![p; support.len()];
            Ok(ExactLaw { support, probs })
        }
    }
}

pub fn edge_marginal(law: &ExactLaw, e: EdgeId) -> f64 {
    kahan_sum(law.iter().filter(|(m, _)| m >> e & 1 == 1).map(|(_, p)| p))
}

/// Half the L1 distance between two laws.
pub fn total_variation(a: &ExactLaw, b: &ExactLaw) -> f64 {
    let mut diff: BTreeMap<EdgeMask, f64> = BTreeMap::new();
    for (m, p) in a.iter() {
        *diff.entry(m).or_default() += p;
    }
    for (m, p) in b.iter() {
        *diff.entry(m).or_default() -= p;
    }
    (0.5 * kahan_sum(diff.values().map(|d| d.abs()))).clamp(0.0, 1.0)
}

/// Law obtained by first drawing a boundary condition from `nu`.
pub fn mixture_pmf(h: &FiniteGraph, nu: &BoundaryMixture, beta: Beta) -> Result<ExactLaw> {
    let mut atoms = Vec::new();
    for (phi, w) in nu.atoms() {
        let law = exact_pmf(h, phi, beta)?;
        atoms.extend(law.iter().map(|(m, p)| (m, p * w)));
    }
    ExactLaw::from_weights(atoms)
}

/// Determinant of an integer matrix by Bareiss elimination; `None` on overflow.
pub fn bareiss_determinant(mut m: Vec<Vec<i128>>) -> Option<i128> {
    let n = m.len();
    if n == 0 {
        return Some(1);
    }
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if m[k][k] == 0 {
            match (k + 1..n).find(|&i| m[i][k] != 0) {
                Some(i) => {
                    m.swap(i, k);
                    sign = -sign;
                }
                None => return Some(0),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = m[i][j]
                    .checked_mul(m[k][k])?
                    .checked_sub(m[i][k].checked_mul(m[k][j])?)?;
                m[i][j] = num / prev;
            }
        }
        prev = m[k][k];
    }
    m[n - 1][n - 1].checked_mul(sign)
}

/// Number of maximal spanning forests of `h/phi`: the product over quotient
/// components of a reduced-Laplacian determinant.
pub fn count_maximal_forests(h: &FiniteGraph, phi: &BoundaryPartition) -> Result<u128> {
    check_phi(h, phi)?;
    let q = quotient(h, phi)?;
    let k = q.class_count();
    if k > MAX_QUOTIENT_CLASSES {
        return Err(Error::ResourceLimit(format!("{k} quotient classes exceed {MAX_QUOTIENT_CLASSES}")));
    }
    let mut ds = DisjointSets::new(k);
    for &(a, b, _) in q.quotient_edges() {
        ds.union(a, b);
    }
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for c in 0..k {
        members.entry(ds.find(c)).or_default().push(c);
    }
    let overflow = || Error::ResourceLimit("spanning-tree count overflows i128".into());
    let mut total: u128 = 1;
    for classes in members.values() {
        // Drop the first class of the component to form the reduced Laplacian.
        let index: BTreeMap<usize, usize> = classes.iter().skip(1).enumerate().map(|(i, &c)| (c, i)).collect();
        let n = index.len();
        let mut lap = vec![vec![0i128; n]; n];
        for &(a, b, _) in q.quotient_edges() {
            if ds.find(a) != ds.find(classes[0]) {
                continue;
            }
            let (ia, ib) = (index.get(&a), index.get(&b));
            if let Some(&i) = ia {
                lap[i][i] += 1;
            }
            if let Some(&j) = ib {
                lap[j][j] += 1;
            }
            if let (Some(&i), Some(&j)) = (ia, ib) {
                lap[i][j] -= 1;
                lap[j][i] -= 1;
            }
        }
        let det = bareiss_determinant(lap).ok_or_else(overflow)?;
        let det = u128::try_from(det).map_err(|_| overflow())?;
        total = total.checked_mul(det).ok_or_else(overflow)?;
    }
    Ok(total)
}
