//! Link-cut trees for connectivity queries on a changing forest.

const NIL: u32 = u32::MAX;

/// Dynamic forest over `0..n` supporting link, cut and connectivity in
/// amortized logarithmic time. Callers keep the structure a forest: `link`
/// must join different trees and `cut` must name an existing edge.
#[derive(Debug, Clone)]
pub struct LinkCutForest {
    child: Vec<[u32; 2]>,
    parent: Vec<u32>,
    flip: Vec<bool>,
    stack: Vec<u32>,
}

impl LinkCutForest {
    pub fn new(n: usize) -> Self {
        assert!(n < NIL as usize, "too many nodes");
        LinkCutForest { child: vec![[NIL; 2]; n], parent: vec![NIL; n], flip: vec![false; n], stack: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    fn is_splay_root(&self, x: u32) -> bool {
        let p = self.parent[x as usize];
        p == NIL || (self.child[p as usize][0] != x && self.child[p as usize][1] != x)
    }

    fn push(&mut self, x: u32) {
        let xi = x as usize;
        if self.flip[xi] {
            self.child[xi].swap(0, 1);
            for c in self.child[xi] {
                if c != NIL {
                    self.flip[c as usize] ^= true;
                }
            }
            self.flip[xi] = false;
        }
    }

    fn rotate(&mut self, x: u32) {
        let p = self.parent[x as usize];
        let g = self.parent[p as usize];
        let dir = usize::from(self.child[p as usize][1] == x);
        if !self.is_splay_root(p) {
            let side = usize::from(self.child[g as usize][1] == p);
            self.child[g as usize][side] = x;
        }
        self.parent[x as usize] = g;
        let b = self.child[x as usize][1 - dir];
        self.child[p as usize][dir] = b;
        if b != NIL {
            self.parent[b as usize] = p;
        }
        self.child[x as usize][1 - dir] = p;
        self.parent[p as usize] = x;
    }

    fn splay(&mut self, x: u32) {
        let mut path = std::mem::take(&mut self.stack);
        path.clear();
        path.push(x);
        let mut y = x;
        while !self.is_splay_root(y) {
            y = self.parent[y as usize];
            path.push(y);
        }
        for &z in path.iter().rev() {
            self.push(z);
        }
        self.stack = path;
        while !self.is_splay_root(x) {
            let p = self.parent[x as usize];
            if !self.is_splay_root(p) {
                let g = self.parent[p as usize];
                let zigzig = (self.child[g as usize][0] == p) == (self.child[p as usize][0] == x);
                self.rotate(if zigzig { p } else { x });
            }
            self.rotate(x);
        }
    }

    fn access(&mut self, x: u32) {
        let mut last = NIL;
        let mut y = x;
        while y != NIL {
            self.splay(y);
            self.child[y as usize][1] = last;
            last = y;
            y = self.parent[y as usize];
        }
        self.splay(x);
    }

    fn make_root(&mut self, x: u32) {
        self.access(x);
        self.flip[x as usize] ^= true;
    }

    fn find_root(&mut self, x: u32) -> u32 {
        self.access(x);
        let mut r = x;
        loop {
            self.push(r);
            let l = self.child[r as usize][0];
            if l == NIL {
                break;
            }
            r = l;
        }
        self.splay(r);
        r
    }

    pub fn connected(&mut self, u: usize, v: usize) -> bool {
        u == v || self.find_root(u as u32) == self.find_root(v as u32)
    }

    pub fn link(&mut self, u: usize, v: usize) {
        debug_assert!(!self.connected(u, v), "link would close a cycle");
        self.make_root(u as u32);
        self.parent[u] = v as u32;
    }

    pub fn cut(&mut self, u: usize, v: usize) {
        self.make_root(u as u32);
        self.access(v as u32);
        debug_assert_eq!(self.child[v][0], u as u32, "cut of a missing edge");
        self.child[v][0] = NIL;
        self.parent[u] = NIL;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unionfind::DisjointSets;
    use proptest::prelude::*;

    #[test]
    fn path_link_and_cut() {
        let mut f = LinkCutForest::new(5);
        for i in 0..4 {
            f.link(i, i + 1);
        }
        assert!(f.connected(0, 4));
        f.cut(2, 3);
        assert!(f.connected(0, 2));
        assert!(!f.connected(1, 4));
        f.link(4, 0);
        assert!(f.connected(3, 1));
    }

    proptest! {
        #[test]
        fn agrees_with_rebuilt_union_find(ops in proptest::collection::vec((0usize..12, 0usize..12), 1..200)) {
            let n = 12;
            let mut lct = LinkCutForest::new(n);
            let mut edges: Vec<(usize, usize)> = Vec::new();
            for (a, b) in ops {
                if a == b {
                    continue;
                }
                if let Some(i) = edges.iter().position(|&e| e == (a, b) || e == (b, a)) {
                    edges.swap_remove(i);
                    lct.cut(a, b);
                } else if !lct.connected(a, b) {
                    edges.push((a, b));
                    lct.link(a, b);
                }
                let mut ds = DisjointSets::new(n);
                for &(x, y) in &edges {
                    ds.union(x, y);
                }
                for u in 0..n {
                    for v in 0..n {
                        prop_assert_eq!(lct.connected(u, v), ds.same(u, v));
                    }
                }
            }
        }
    }
}
