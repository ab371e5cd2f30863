//! Seeded random expressions over `A`, `F`, `eta`, a symmetric `S` and
//! the scalars `B`, `C`.

use std::sync::Arc;

use fieldsearch::expr::{check_well_formed, Expr, Index, Rational, Registry, Symmetry, TensorHead, Variance};
use rand::rngs::StdRng;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::RngExt;

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub max_nodes: usize,
    /// Contracted pairs added per term.
    pub max_dummy_pairs: usize,
    /// Nesting depth for sums and derivatives of products.
    pub depth: usize,
    pub sums: bool,
    /// Allow `S`, `B` and `C` besides `A`, `F` and `eta`.
    pub extra_heads: bool,
    /// Longest derivative chain on a field, with `F` counting as one.
    pub max_deriv_depth: usize,
    pub free: Vec<Index>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_nodes: 12,
            max_dummy_pairs: 2,
            depth: 1,
            sums: true,
            extra_heads: true,
            max_deriv_depth: 2,
            free: Vec::new(),
        }
    }
}

pub struct Heads {
    pub a: Arc<TensorHead>,
    pub f: Arc<TensorHead>,
    pub eta: Arc<TensorHead>,
    pub s: Arc<TensorHead>,
    pub b: Arc<TensorHead>,
    pub c: Arc<TensorHead>,
}

impl Heads {
    pub fn new() -> Self {
        let r = registry();
        let get = |n: &str| r.get(n).unwrap().clone();
        Heads { a: get("A"), f: get("F"), eta: get("eta"), s: get("S"), b: get("B"), c: get("C") }
    }
}

impl Default for Heads {
    fn default() -> Self {
        Self::new()
    }
}

/// A registry that parses generated expressions back with the right
/// slot symmetries.
pub fn registry() -> Registry {
    let mut r = Registry::new();
    r.declare("S", 2, Symmetry::Symmetric).unwrap();
    r.declare("B", 0, Symmetry::None).unwrap();
    r.declare("C", 0, Symmetry::None).unwrap();
    r
}

pub struct Generator {
    pub rng: StdRng,
    heads: Heads,
    counter: usize,
    extra_heads: bool,
}

impl Generator {
    pub fn new(rng: StdRng) -> Self {
        Generator { rng, heads: Heads::new(), counter: 0, extra_heads: true }
    }

    /// A well-formed expression whose free indices are `cfg.free`.
    pub fn expr(&mut self, cfg: &GenConfig) -> Expr {
        loop {
            self.counter = 0;
            self.extra_heads = cfg.extra_heads;
            let e = self.attempt(cfg);
            if e.node_count() <= cfg.max_nodes
                && deriv_depth(&e) <= cfg.max_deriv_depth
                && check_well_formed(&e).is_ok()
            {
                return e;
            }
        }
    }

    fn attempt(&mut self, cfg: &GenConfig) -> Expr {
        let n = if cfg.sums { self.rng.random_range(1..=3) } else { 1 };
        Expr::sum((0..n).map(|_| self.term(&cfg.free, cfg.max_dummy_pairs, cfg.depth)).collect())
    }

    fn coefficient(&mut self) -> Rational {
        let choices = [(1, 1), (1, 1), (1, 1), (-1, 1), (2, 1), (-3, 1), (1, 2), (-1, 4)];
        let (n, d) = *choices.choose(&mut self.rng).unwrap();
        Rational::new(n, d)
    }

    fn fresh(&mut self) -> String {
        self.counter += 1;
        format!("i{}", self.counter)
    }

    fn term(&mut self, free: &[Index], max_pairs: usize, depth: usize) -> Expr {
        let mut slots = free.to_vec();
        for _ in 0..self.rng.random_range(0..=max_pairs) {
            let name = self.fresh();
            slots.push(Index::upper(&name));
            slots.push(Index::lower(&name));
        }
        slots.shuffle(&mut self.rng);
        let mut factors = Vec::new();
        while !slots.is_empty() {
            let k = self.rng.random_range(1..=slots.len().min(3));
            let group: Vec<Index> = slots.drain(..k).collect();
            factors.push(self.factor(group, depth));
        }
        if factors.is_empty() || self.rng.random_bool(0.2) {
            factors.push(self.factor(Vec::new(), depth));
        }
        Expr::product(self.coefficient(), factors)
    }

    fn factor(&mut self, mut slots: Vec<Index>, depth: usize) -> Expr {
        let h = &self.heads;
        if depth > 0 && self.rng.random_bool(0.15) {
            let n = self.rng.random_range(2..=3);
            return Expr::Sum((0..n).map(|_| self.term(&slots, 0, depth - 1)).collect());
        }
        match slots.len() {
            0 if self.extra_heads => {
                Expr::tensor(if self.rng.random_bool(0.5) { h.b.clone() } else { h.c.clone() }, slots)
            }
            0 => {
                let k = self.fresh();
                Expr::product(
                    Rational::from_integer(1),
                    vec![Expr::tensor(self.heads.a.clone(), vec![Index::upper(&k)]), Expr::tensor(self.heads.a.clone(), vec![Index::lower(&k)])],
                )
            }
            1 if self.rng.random_bool(0.7) => Expr::tensor(h.a.clone(), slots),
            2 if self.rng.random_bool(0.6) => {
                let n = if self.extra_heads { 4 } else { 3 };
                let head = [&h.f, &h.f, &h.eta, &h.s][self.rng.random_range(0..n)].clone();
                Expr::tensor(head, slots)
            }
            _ => {
                let i = slots.remove(0);
                let inner = if depth > 0 && self.rng.random_bool(0.3) {
                    self.term(&slots, 0, depth - 1)
                } else {
                    self.factor(slots, 0)
                };
                Expr::partial(i, inner)
            }
        }
    }
}

/// Longest derivative chain on a field, with `F` counting as one.
pub fn deriv_depth(e: &Expr) -> usize {
    match e {
        Expr::Partial(_, x) => 1 + deriv_depth(x),
        Expr::Tensor(t) if &*t.head.name == "F" => 1,
        _ => e.children().iter().map(deriv_depth).max().unwrap_or(0),
    }
}

/// One of `^mu`, `_nu`, ... at random.
pub fn random_index(rng: &mut StdRng) -> Index {
    let names = ["mu", "nu", "rho"];
    let name = names.choose(rng).unwrap();
    Index::new((*name).into(), if rng.random_bool(0.5) { Variance::Upper } else { Variance::Lower })
}
