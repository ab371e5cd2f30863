//! Finite rewrite systems on nullary states `s0`, `s1`, ..., one rule per
//! directed edge, with reachability answered by set iteration and by
//! explicit walk enumeration.

use std::collections::BTreeSet;
use std::fmt::Write;

use fieldsearch::expr::{Expr, Symmetry, TensorHead};
use rand::rngs::StdRng;
use rand::RngExt;

#[derive(Clone, Debug)]
pub struct Graph {
    pub name: String,
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Graph {
    fn new(name: &str, n: usize, mut edges: Vec<(usize, usize)>) -> Self {
        edges.retain(|(a, b)| a != b);
        edges.sort();
        edges.dedup();
        Graph { name: name.to_string(), n, edges }
    }

    /// `s0 -> s1 -> ... -> s(n-1)`.
    pub fn chain(n: usize) -> Self {
        Graph::new(&format!("chain-{n}"), n, (1..n).map(|i| (i - 1, i)).collect())
    }

    pub fn two_cycle() -> Self {
        Graph::new("two-cycle", 2, vec![(0, 1), (1, 0)])
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).collect();
        Graph::new(&format!("complete-{n}"), n, edges)
    }

    /// Heap-numbered binary tree: `s(i) -> s(2i+1)` and `s(i) -> s(2i+2)`.
    pub fn binary_tree(n: usize) -> Self {
        let edges = (0..n).flat_map(|i| [(i, 2 * i + 1), (i, 2 * i + 2)]).filter(|&(_, j)| j < n).collect();
        Graph::new(&format!("tree-{n}"), n, edges)
    }

    pub fn random(rng: &mut StdRng, n: usize, p: f64) -> Self {
        let mut edges = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if rng.random_bool(p) {
                    edges.push((a, b));
                }
            }
        }
        Graph::new(&format!("random-{n}"), n, edges)
    }

    /// One rule `eK: sA -> sB` per edge.
    pub fn rules_text(&self) -> String {
        let mut out = String::new();
        for (k, (a, b)) in self.edges.iter().enumerate() {
            writeln!(out, "e{k}: s{a} -> s{b}").unwrap();
        }
        out
    }

    pub fn state(i: usize) -> Expr {
        Expr::tensor(TensorHead::new(&format!("s{i}"), 0, Symmetry::None), Vec::new())
    }

    pub fn edge_of_rule(&self, rule: &str) -> Option<(usize, usize)> {
        let k: usize = rule.strip_prefix('e')?.parse().ok()?;
        self.edges.get(k).copied()
    }

    /// Distance from `start` to every state, computed by growing the
    /// reached set one edge layer at a time.
    pub fn distances(&self, start: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        dist[start] = Some(0);
        let mut layer = BTreeSet::from([start]);
        let mut d = 0;
        while !layer.is_empty() {
            d += 1;
            let next: BTreeSet<usize> = self
                .edges
                .iter()
                .filter(|(a, b)| layer.contains(a) && dist[*b].is_none())
                .map(|&(_, b)| b)
                .collect();
            for &b in &next {
                dist[b] = Some(d);
            }
            layer = next;
        }
        dist
    }

    pub fn reachable(&self, start: usize) -> usize {
        self.distances(start).iter().filter(|d| d.is_some()).count()
    }

    /// Length of the shortest walk from `start` to `goal`, found by
    /// enumerating every walk of each length in turn.
    pub fn shortest_walk(&self, start: usize, goal: usize, max_len: usize) -> Option<usize> {
        fn walks(g: &Graph, at: usize, goal: usize, left: usize) -> bool {
            if left == 0 {
                return at == goal;
            }
            g.edges.iter().filter(|(a, _)| *a == at).any(|&(_, b)| walks(g, b, goal, left - 1))
        }
        (0..=max_len).find(|&len| walks(self, start, goal, len))
    }
}
