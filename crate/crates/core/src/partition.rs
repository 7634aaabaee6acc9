//! Boundary partitions: equivalence relations on a boundary vertex set.
//!
//! A partition is stored in canonical form, with each vertex of the sorted
//! ground set mapped to the minimum member of its class. Equality and
//! hashing therefore compare relations, not encodings.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Result};
use crate::graph::{FiniteGraph, Subgraph, VertexId};
use crate::unionfind::DisjointSets;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoundaryPartition {
    ground: Vec<VertexId>,
    reps: Vec<VertexId>,
}

impl BoundaryPartition {
    /// All-singletons partition.
    pub fn free<I: IntoIterator<Item = VertexId>>(boundary: I) -> Self {
        let ground = sorted_unique(boundary);
        let reps = ground.clone();
        BoundaryPartition { ground, reps }
    }

    /// One class holding every boundary vertex.
    pub fn wired<I: IntoIterator<Item = VertexId>>(boundary: I) -> Self {
        let ground = sorted_unique(boundary);
        let reps = match ground.first() {
            Some(&min) => vec![min; ground.len()],
            None => Vec::new(),
        };
        BoundaryPartition { ground, reps }
    }

    pub fn from_classes(classes: Vec<Vec<VertexId>>) -> Result<Self> {
        let mut pairs = Vec::new();
        for class in &classes {
            let Some(&min) = class.iter().min() else {
                return invalid("partition classes must be nonempty");
            };
            pairs.extend(class.iter().map(|&v| (v, min)));
        }
        pairs.sort_unstable();
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return invalid("partition classes must be disjoint");
        }
        let (ground, reps) = pairs.into_iter().unzip();
        Ok(BoundaryPartition { ground, reps })
    }

    /// Builds a partition from arbitrary per-vertex labels; vertices sharing a label are related.
    pub fn from_labels<L: Ord>(ground: &[VertexId], label: impl Fn(VertexId) -> L) -> Self {
        let ground = sorted_unique(ground.iter().copied());
        let mut min_for: BTreeMap<L, VertexId> = BTreeMap::new();
        for &v in &ground {
            min_for.entry(label(v)).or_insert(v);
        }
        let reps = ground.iter().map(|&v| min_for[&label(v)]).collect();
        BoundaryPartition { ground, reps }
    }

    pub fn ground_set(&self) -> &[VertexId] {
        &self.ground
    }

    pub fn is_empty(&self) -> bool {
        self.ground.is_empty()
    }

    /// Representative (minimum member) of `v`'s class, if `v` is in the ground set.
    pub fn representative(&self, v: VertexId) -> Option<VertexId> {
        self.ground.binary_search(&v).ok().map(|i| self.reps[i])
    }

    pub fn related(&self, u: VertexId, v: VertexId) -> bool {
        match (self.representative(u), self.representative(v)) {
            (Some(a), Some(b)) => a == b,
            _ => u == v,
        }
    }

    /// `(vertex, representative)` pairs; uniting each pair seeds a union-find with this relation.
    pub fn identifications(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.ground.iter().copied().zip(self.reps.iter().copied())
    }

    pub fn class_count(&self) -> usize {
        self.ground
            .iter()
            .zip(&self.reps)
            .filter(|(v, r)| v == r)
            .count()
    }

    /// Classes sorted by representative, members ascending.
    pub fn classes(&self) -> Vec<Vec<VertexId>> {
        let mut by_rep: BTreeMap<VertexId, Vec<VertexId>> = BTreeMap::new();
        for (&v, &r) in self.ground.iter().zip(&self.reps) {
            by_rep.entry(r).or_default().push(v);
        }
        by_rep.into_values().collect()
    }

    pub fn is_free(&self) -> bool {
        self.ground == self.reps
    }

    pub fn is_wired(&self) -> bool {
        self.class_count() <= 1
    }

    /// True iff every class of `self` lies inside a class of `other`.
    pub fn refines(&self, other: &BoundaryPartition) -> Result<bool> {
        if self.ground != other.ground {
            return invalid("refinement needs partitions over the same ground set");
        }
        let mut image: BTreeMap<VertexId, VertexId> = BTreeMap::new();
        for (&mine, &theirs) in self.reps.iter().zip(&other.reps) {
            match image.insert(mine, theirs) {
                Some(prev) if prev != theirs => return Ok(false),
                _ => {}
            }
        }
        Ok(true)
    }

    /// Restriction to `ground ∩ subset`.
    pub fn restrict(&self, subset: &[VertexId]) -> BoundaryPartition {
        let keep = sorted_unique(subset.iter().copied());
        let ground: Vec<VertexId> = self
            .ground
            .iter()
            .copied()
            .filter(|v| keep.binary_search(v).is_ok())
            .collect();
        BoundaryPartition::from_labels(&ground, |v| self.representative(v).unwrap())
    }

    /// Renames vertices through `map`; the map must be injective on the ground set.
    pub fn relabel(&self, map: impl Fn(VertexId) -> VertexId) -> BoundaryPartition {
        let ground: Vec<VertexId> = self.ground.iter().map(|&v| map(v)).collect();
        let labels: BTreeMap<VertexId, VertexId> = self
            .ground
            .iter()
            .map(|&v| (map(v), self.representative(v).unwrap()))
            .collect();
        BoundaryPartition::from_labels(&ground, |v| labels[&v])
    }

    /// Every set partition of `ground`, enumerated by restricted growth strings.
    pub fn all_partitions(ground: &[VertexId]) -> Vec<BoundaryPartition> {
        let ground = sorted_unique(ground.iter().copied());
        let n = ground.len();
        let mut out = Vec::new();
        let mut labels = vec![0usize; n];
        fn rec(
            i: usize,
            max_label: usize,
            labels: &mut Vec<usize>,
            ground: &[VertexId],
            out: &mut Vec<BoundaryPartition>,
        ) {
            if i == ground.len() {
                let idx = |v: VertexId| labels[ground.binary_search(&v).unwrap()];
                out.push(BoundaryPartition::from_labels(ground, idx));
                return;
            }
            for l in 0..=max_label {
                labels[i] = l;
                let next = if l == max_label { max_label + 1 } else { max_label };
                rec(i + 1, next, labels, ground, out);
            }
        }
        if n == 0 {
            out.push(BoundaryPartition::free(std::iter::empty()));
        } else {
            labels[0] = 0;
            rec(1, 1, &mut labels, &ground, &mut out);
        }
        out
    }
}

fn sorted_unique<I: IntoIterator<Item = VertexId>>(it: I) -> Vec<VertexId> {
    let mut v: Vec<VertexId> = it.into_iter().collect();
    v.sort_unstable();
    v.dedup();
    v
}

impl Serialize for BoundaryPartition {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.classes().serialize(s)
    }
}

impl<'de> Deserialize<'de> for BoundaryPartition {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let classes = Vec::<Vec<VertexId>>::deserialize(d)?;
        BoundaryPartition::from_classes(classes).map_err(serde::de::Error::custom)
    }
}

/// Finitely supported law on boundary partitions of a common ground set.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMixture {
    atoms: Vec<(BoundaryPartition, f64)>,
}

pub const MIXTURE_TOLERANCE: f64 = 1e-12;

impl BoundaryMixture {
    /// Duplicate atoms are merged by summing their weights.
    pub fn new(atoms: Vec<(BoundaryPartition, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return invalid("mixture needs at least one atom");
        }
        let ground = atoms[0].0.ground_set().to_vec();
        let mut merged: Vec<(BoundaryPartition, f64)> = Vec::new();
        let mut total = 0.0;
        for (phi, p) in atoms {
            if phi.ground_set() != ground.as_slice() {
                return invalid("mixture atoms must share a ground set");
            }
            if !(p >= 0.0) || !p.is_finite() {
                return invalid(format!("mixture weight {p} is not a probability"));
            }
            total += p;
            match merged.iter_mut().find(|(q, _)| *q == phi) {
                Some(slot) => slot.1 += p,
                None => merged.push((phi, p)),
            }
        }
        if (total - 1.0).abs() > MIXTURE_TOLERANCE {
            return invalid(format!("mixture weights sum to {total}, not 1"));
        }
        Ok(BoundaryMixture { atoms: merged })
    }

    pub fn point(phi: BoundaryPartition) -> Self {
        BoundaryMixture { atoms: vec![(phi, 1.0)] }
    }

    pub fn atoms(&self) -> &[(BoundaryPartition, f64)] {
        &self.atoms
    }
}

#[derive(Serialize, Deserialize)]
struct MixtureAtom {
    classes: BoundaryPartition,
    prob: f64,
}

impl Serialize for BoundaryMixture {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let atoms: Vec<MixtureAtom> = self
            .atoms
            .iter()
            .map(|(phi, p)| MixtureAtom { classes: phi.clone(), prob: *p })
            .collect();
        atoms.serialize(s)
    }
}

impl<'de> Deserialize<'de> for BoundaryMixture {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let atoms = Vec::<MixtureAtom>::deserialize(d)?;
        BoundaryMixture::new(atoms.into_iter().map(|a| (a.classes, a.prob)).collect())
            .map_err(serde::de::Error::custom)
    }
}

/// Boundary of `h` seen from inside `k`: vertices of `h` with a `k`-edge
/// leaving `h`, plus the vertices of `h` in `k`'s own boundary set.
pub fn relative_boundary(
    host: &FiniteGraph,
    k: &Subgraph,
    k_boundary: &[VertexId],
    h: &Subgraph,
) -> Vec<VertexId> {
    let mut out: Vec<VertexId> = k_boundary
        .iter()
        .copied()
        .filter(|&v| h.contains_vertex(v))
        .collect();
    for e in k.edge_ids() {
        if h.contains_edge(e) {
            continue;
        }
        let (a, b) = host.endpoints(e);
        for v in [a, b] {
            if h.contains_vertex(v) {
                out.push(v);
            }
        }
    }
    sorted_unique(out)
}

/// Derives the relation on the boundary of `h` from the relation `outer` on
/// the boundary of `k` and the edge set `s_edges`.
///
/// Two boundary vertices of `h` are related iff they are connected in the
/// graph with edges `s_edges ∩ E[k] \ E[h]` once the classes of `outer` are
/// identified. The boundary of `h` is its inner boundary inside `k` together
/// with the vertices of `h` that lie on `outer`'s ground set.
pub fn derive_inner(
    host: &FiniteGraph,
    outer: &BoundaryPartition,
    s_edges: &[bool],
    k: &Subgraph,
    h: &Subgraph,
) -> Result<BoundaryPartition> {
    if s_edges.len() != host.edge_count() {
        return invalid("edge set does not match host graph");
    }
    if !h.is_subgraph_of(k) {
        return invalid("inner subgraph is not contained in the outer one");
    }
    if outer.ground_set().iter().any(|&v| !k.contains_vertex(v)) {
        return invalid("outer relation lives outside the outer subgraph");
    }
    let mut ds = DisjointSets::new(host.vertex_count());
    for (v, r) in outer.identifications() {
        ds.union(v, r);
    }
    for e in k.edge_ids() {
        if s_edges[e] && !h.contains_edge(e) {
            let (a, b) = host.endpoints(e);
            ds.union(a, b);
        }
    }
    let boundary = relative_boundary(host, k, outer.ground_set(), h);
    let labels = ds.min_labels();
    Ok(BoundaryPartition::from_labels(&boundary, |v| labels[v]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_lattice_window, FiniteGraph};

    #[test]
    fn free_and_wired_shapes() {
        let f = BoundaryPartition::free([2, 0, 1]);
        assert_eq!(f.classes(), vec![vec![0], vec![1], vec![2]]);
        let w = BoundaryPartition::wired([2, 0, 1]);
        assert_eq!(w.classes(), vec![vec![0, 1, 2]]);
        assert!(BoundaryPartition::free([]).classes().is_empty());
        assert!(BoundaryPartition::wired([]).classes().is_empty());
        assert_eq!(BoundaryPartition::wired([4]), BoundaryPartition::free([4]));
    }

    #[test]
    fn refinement_examples() {
        let free = BoundaryPartition::free([0, 1, 2]);
        let wired = BoundaryPartition::wired([0, 1, 2]);
        assert!(free.refines(&wired).unwrap());
        assert!(!wired.refines(&free).unwrap());
        let ab = BoundaryPartition::from_classes(vec![vec![0, 1], vec![2]]).unwrap();
        let bc = BoundaryPartition::from_classes(vec![vec![0], vec![1, 2]]).unwrap();
        assert!(!ab.refines(&bc).unwrap());
        assert!(!bc.refines(&ab).unwrap());
        assert!(free.refines(&BoundaryPartition::free([0, 1])).is_err());
    }

    #[test]
    fn bell_numbers() {
        let counts: Vec<usize> = (0..=5)
            .map(|n| BoundaryPartition::all_partitions(&(0..n).collect::<Vec<_>>()).len())
            .collect();
        assert_eq!(counts, vec![1, 1, 2, 5, 15, 52]);
    }

    #[test]
    fn refinement_is_partial_order() {
        let all = BoundaryPartition::all_partitions(&[3, 5, 8, 9]);
        assert_eq!(all.len(), 15);
        let free = BoundaryPartition::free([3, 5, 8, 9]);
        let wired = BoundaryPartition::wired([3, 5, 8, 9]);
        for a in &all {
            assert!(a.refines(a).unwrap());
            assert!(free.refines(a).unwrap());
            assert!(a.refines(&wired).unwrap());
            for b in &all {
                if a.refines(b).unwrap() && b.refines(a).unwrap() {
                    assert_eq!(a, b);
                }
                for c in &all {
                    if a.refines(b).unwrap() && b.refines(c).unwrap() {
                        assert!(a.refines(c).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn from_classes_rejects_overlap() {
        assert!(BoundaryPartition::from_classes(vec![vec![0, 1], vec![1]]).is_err());
        assert!(BoundaryPartition::from_classes(vec![vec![]]).is_err());
    }

    #[test]
    fn json_is_sorted_classes() {
        let p = BoundaryPartition::from_classes(vec![vec![7, 2], vec![5], vec![3, 9]]).unwrap();
        assert_eq!(serde_json::to_string(&p).unwrap(), "[[2,7],[3,9],[5]]");
        let back: BoundaryPartition = serde_json::from_str("[[9,3],[5],[2,7]]").unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn mixture_merges_duplicates() {
        let f = BoundaryPartition::free([0, 1]);
        let w = BoundaryPartition::wired([0, 1]);
        let m = BoundaryMixture::new(vec![(f.clone(), 0.25), (w.clone(), 0.5), (f.clone(), 0.25)]).unwrap();
        assert_eq!(m.atoms().len(), 2);
        assert_eq!(m.atoms()[0], (f.clone(), 0.5));
        assert!(BoundaryMixture::new(vec![(f.clone(), 0.5)]).is_err());
        assert!(BoundaryMixture::new(vec![(f, 0.5), (BoundaryPartition::free([0]), 0.5)]).is_err());
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, r#"[{"classes":[[0],[1]],"prob":0.5},{"classes":[[0,1]],"prob":0.5}]"#);
        let back: BoundaryMixture = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn restrict_and_relabel() {
        let p = BoundaryPartition::from_classes(vec![vec![1, 4, 6], vec![2, 3]]).unwrap();
        let r = p.restrict(&[3, 4, 6, 10]);
        assert_eq!(r.classes(), vec![vec![3], vec![4, 6]]);
        let moved = p.relabel(|v| 10 - v);
        assert_eq!(moved.classes(), vec![vec![4, 6, 9], vec![7, 8]]);
    }

    fn path(n: usize) -> FiniteGraph {
        FiniteGraph::new(n, (0..n - 1).map(|i| (i, i + 1)).collect()).unwrap()
    }

    #[test]
    fn derive_free_without_edges() {
        let g = build_lattice_window(2, 3, false).unwrap();
        let k = Subgraph::full(&g);
        let h = Subgraph::induced(&g, &[0, 1, 3, 4]);
        let outer = BoundaryPartition::free([]);
        let inner = derive_inner(&g, &outer, &vec![false; g.edge_count()], &k, &h).unwrap();
        assert!(inner.is_free());
        assert_eq!(inner.ground_set(), &[1, 3, 4]);
    }

    #[test]
    fn derive_through_outside_path() {
        // C4 a=0, b=1, c=2, d=3; edges ab, bc, cd, da.
        let g = FiniteGraph::new(4, vec![(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let k = Subgraph::full(&g);
        let h = Subgraph::from_parts(&g, &[0, 3], &[]).unwrap();
        let s = vec![true, true, true, false];
        let inner = derive_inner(&g, &BoundaryPartition::free([]), &s, &k, &h).unwrap();
        assert_eq!(inner.ground_set(), &[0, 3]);
        assert!(inner.related(0, 3));
    }

    #[test]
    fn derive_on_path_keeps_classes_apart() {
        let g = path(3);
        let k = Subgraph::full(&g);
        let h = Subgraph::from_parts(&g, &[1, 2], &[1]).unwrap();
        let outer = BoundaryPartition::free([0, 2]);
        let inner = derive_inner(&g, &outer, &[true, false], &k, &h).unwrap();
        assert_eq!(inner.ground_set(), &[1, 2]);
        assert!(!inner.related(1, 2));
    }

    #[test]
    fn derive_rejects_non_nested() {
        let g = path(4);
        let k = Subgraph::induced(&g, &[0, 1]);
        let h = Subgraph::induced(&g, &[2, 3]);
        let r = derive_inner(&g, &BoundaryPartition::free([]), &[false; 3], &k, &h);
        assert!(r.is_err());
    }
}
