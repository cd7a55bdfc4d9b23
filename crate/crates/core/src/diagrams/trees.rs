use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_TREE_LEAVES: usize = 8;

/// Tree with leaves `0..=n` and internal vertices `n+1..=2n-1`, every
/// internal vertex of degree three.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeDiagram {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl TreeDiagram {
    pub fn n_vertices(&self) -> usize {
        2 * self.n
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vertices()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Checks connectivity, edge count and the degree pattern.
    pub fn is_valid(&self) -> bool {
        let nv = self.n_vertices();
        if self.edges.len() + 1 != nv {
            return false;
        }
        let adj = self.adjacency();
        for (v, nb) in adj.iter().enumerate() {
            let want = if v <= self.n { 1 } else { 3 };
            if nb.len() != want {
                return false;
            }
        }
        let (order, _) = self.rooted();
        order.len() == nv
    }

    /// Vertices in breadth-first order from leaf 0, with parent pointers.
    pub fn rooted(&self) -> (Vec<usize>, Vec<Option<usize>>) {
        let adj = self.adjacency();
        let mut parent = vec![None; self.n_vertices()];
        let mut seen = vec![false; self.n_vertices()];
        let mut order = vec![0];
        seen[0] = true;
        let mut i = 0;
        while i < order.len() {
            let v = order[i];
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some(v);
                    order.push(w);
                }
            }
            i += 1;
        }
        (order, parent)
    }

    /// Nested-parenthesis code rooted at leaf 0, children sorted. Two trees
    /// are isomorphic under leaf-label-preserving maps iff their codes agree.
    pub fn canonical_code(&self) -> String {
        let adj = self.adjacency();
        fn code(v: usize, from: usize, n: usize, adj: &[Vec<usize>]) -> String {
            if v <= n {
                return v.to_string();
            }
            let mut kids: Vec<String> = adj[v].iter().filter(|&&w| w != from).map(|&w| code(w, v, n, adj)).collect();
            kids.sort();
            format!("({})", kids.join(","))
        }
        code(adj[0][0], 0, self.n, &adj)
    }
}

/// One representative per isomorphism class of trees with leaves `0..=n`.
///
/// Leaf `k+1` is attached by subdividing one of the `2k-1` edges of a tree on
/// leaves `0..=k`; every tree arises exactly once, giving `(2n-3)!!` trees.
pub fn enumerate_trees(n: usize) -> Result<Vec<TreeDiagram>> {
    if n == 0 {
        return Err(Error::domain("trees need at least one non-root leaf"));
    }
    if n > MAX_TREE_LEAVES {
        return Err(Error::Size {
            what: "tree leaves",
            got: n,
            limit: MAX_TREE_LEAVES,
        });
    }
    // Build with internal vertices labelled n+1, n+2, ... in insertion order.
    let mut trees: Vec<Vec<(usize, usize)>> = vec![vec![(0, 1)]];
    for k in 1..n {
        let internal = n + k;
        let leaf = k + 1;
        let mut next = Vec::with_capacity(trees.len() * (2 * k - 1));
        for t in &trees {
            for e in 0..t.len() {
                let (a, b) = t[e];
                let mut u = t.clone();
                u[e] = (a, internal);
                u.push((internal, b));
                u.push((internal, leaf));
                next.push(u);
            }
        }
        trees = next;
    }
    Ok(trees.into_iter().map(|edges| TreeDiagram { n, edges }).collect())
}

/// Edges of the unique path between vertices `i` and `j`, in order from `i`.
pub fn leaf_path(tree: &TreeDiagram, i: usize, j: usize) -> Result<Vec<(usize, usize)>> {
    let nv = tree.n_vertices();
    if i >= nv || j >= nv || i == j {
        return Err(Error::domain(format!("path endpoints {i}, {j} invalid")));
    }
    let adj = tree.adjacency();
    let mut prev = vec![usize::MAX; nv];
    prev[i] = i;
    let mut queue = std::collections::VecDeque::from([i]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if prev[w] == usize::MAX {
                prev[w] = v;
                queue.push_back(w);
            }
        }
    }
    let mut path = Vec::new();
    let mut v = j;
    while v != i {
        path.push((prev[v], v));
        v = prev[v];
    }
    path.reverse();
    Ok(path)
}

/// Distinct canonical codes of a tree list.
pub fn distinct_codes(trees: &[TreeDiagram]) -> usize {
    trees.iter().map(|t| t.canonical_code()).collect::<BTreeSet<_>>().len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagrams::double_factorial_f64;

    #[test]
    fn counts_are_double_factorials() {
        assert_eq!(enumerate_trees(1).unwrap().len(), 1);
        assert_eq!(enumerate_trees(1).unwrap()[0].edges, vec![(0, 1)]);
        assert_eq!(enumerate_trees(3).unwrap().len(), 3);
        assert_eq!(enumerate_trees(5).unwrap().len(), 105);
        for n in 1..=8 {
            assert_eq!(enumerate_trees(n).unwrap().len() as f64, double_factorial_f64(2 * n as i64 - 3));
        }
        assert!(enumerate_trees(9).is_err());
        assert!(enumerate_trees(0).is_err());
    }

    #[test]
    fn trees_are_valid_and_pairwise_distinct() {
        for n in 1..=6 {
            let ts = enumerate_trees(n).unwrap();
            assert!(ts.iter().all(|t| t.is_valid()));
            assert_eq!(distinct_codes(&ts), ts.len());
        }
    }

    #[test]
    fn paths() {
        let t = &enumerate_trees(1).unwrap()[0];
        assert_eq!(leaf_path(t, 0, 1).unwrap(), vec![(0, 1)]);
        let t = &enumerate_trees(2).unwrap()[0];
        let p = leaf_path(t, 1, 2).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].1, 3);
        for n in 1..=6 {
            for t in enumerate_trees(n).unwrap() {
                for i in 0..=n {
                    for j in 0..=n {
                        if i != j {
                            let p = leaf_path(&t, i, j).unwrap();
                            assert!(p.len() <= n);
                            assert_eq!(p.first().unwrap().0, i);
                            assert_eq!(p.last().unwrap().1, j);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn cherry_code() {
        let t = &enumerate_trees(2).unwrap()[0];
        assert_eq!(t.canonical_code(), "(1,2)");
    }
}
