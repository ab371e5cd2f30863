//! Canonical form.
//!
//! An expression is expanded into a sum of monomial terms (products are
//! distributed over sums, derivatives over sums, and constant factors are
//! pulled out of derivatives). Each term is then normalized on its own:
//! metric and Kronecker factors are contracted away where they share an
//! index with the rest of the term, and the dummy indices are relabelled
//! `d0, d1, ...`. The relabelling is the lexicographically smallest sorted
//! factor list over every assignment of dummy names and every choice of
//! which member of a dummy pair is raised, so two terms that differ only by
//! a renaming of dummies always land on the same representative. Like terms
//! are merged last.

use std::collections::BTreeMap;

use itertools::Itertools;
use num_traits::{One, Zero};

use super::{fresh_names, rat, Expr, Index, Rational, Symbol, Symmetry, Tensor, Variance, DELTA, ETA};

/// Above this many dummy pairs in one term the relabelling falls back to a
/// single greedy assignment instead of the exhaustive minimum.
const EXHAUSTIVE_DUMMY_LIMIT: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Canonicalizer {
    pub dimension: u32,
}

impl Default for Canonicalizer {
    fn default() -> Self {
        Canonicalizer { dimension: 4 }
    }
}

/// Canonical form in four spacetime dimensions.
pub fn canonicalize(e: &Expr) -> Expr {
    Canonicalizer::default().canonicalize(e)
}

struct RawTerm {
    coeff: Rational,
    factors: Vec<Expr>,
}

impl Canonicalizer {
    pub fn new(dimension: u32) -> Self {
        Canonicalizer { dimension }
    }

    pub fn canonicalize(&self, e: &Expr) -> Expr {
        let mut merged: BTreeMap<Vec<Expr>, Rational> = BTreeMap::new();
        for t in expand(e) {
            if let Some((c, fs)) = self.canon_term(t.coeff, t.factors) {
                *merged.entry(fs).or_insert_with(Rational::zero) += c;
            }
        }
        let terms: Vec<Expr> = merged
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(fs, c)| Expr::product(c, fs))
            .collect();
        Expr::sum(terms)
    }

    fn canon_term(&self, mut coeff: Rational, mut factors: Vec<Expr>) -> Option<(Rational, Vec<Expr>)> {
        if !self.contract_metrics(&mut coeff, &mut factors) {
            return None;
        }
        for f in factors.iter_mut() {
            if let Expr::Tensor(t) = f {
                if t.head.is_metric() {
                    let mixed = t.indices[0].variance != t.indices[1].variance;
                    t.head = if mixed { DELTA.clone() } else { ETA.clone() };
                }
            }
        }

        let (dummies, taken) = dummy_names(&factors);
        let names = fresh_names("d", dummies.len(), &taken);

        if dummies.is_empty() {
            let (sign, fs) = normalize_all(&factors, &[])?;
            return Some((if sign { -coeff } else { coeff }, fs));
        }

        if dummies.len() > EXHAUSTIVE_DUMMY_LIMIT {
            let plan: Vec<_> = dummies.iter().cloned().zip(names.iter().cloned()).map(|(a, b)| (a, b, false)).collect();
            let (sign, fs) = normalize_all(&factors, &plan)?;
            return Some((if sign { -coeff } else { coeff }, fs));
        }

        let k = dummies.len();
        let mut best: Option<(bool, Vec<Expr>)> = None;
        let mut plan = Vec::with_capacity(k);
        for perm in (0..k).permutations(k) {
            for flips in 0u32..(1 << k) {
                plan.clear();
                for (slot, &target) in perm.iter().enumerate() {
                    plan.push((dummies[slot].clone(), names[target].clone(), flips & (1 << slot) != 0));
                }
                let (sign, fs) = normalize_all(&factors, &plan)?;
                match &best {
                    None => best = Some((sign, fs)),
                    Some((best_sign, best_fs)) => match fs.cmp(best_fs) {
                        std::cmp::Ordering::Less => best = Some((sign, fs)),
                        std::cmp::Ordering::Equal if sign != *best_sign => return None,
                        _ => {}
                    },
                }
            }
        }
        let (sign, fs) = best?;
        Some((if sign { -coeff } else { coeff }, fs))
    }

    /// Removes `eta`/`delta` factors that share an index with the rest of
    /// the term (or with themselves). Returns `false` if the term vanished.
    fn contract_metrics(&self, coeff: &mut Rational, factors: &mut Vec<Expr>) -> bool {
        'outer: loop {
            for m in 0..factors.len() {
                let Expr::Tensor(t) = &factors[m] else { continue };
                if !t.head.is_metric() || t.indices.iter().any(|i| i.is_pattern) {
                    continue;
                }
                let (s0, s1) = (t.indices[0].clone(), t.indices[1].clone());
                if let (Some(a), Some(b)) = (s0.concrete_value(), s1.concrete_value()) {
                    factors.remove(m);
                    let v = metric_component(a, b, s0.variance, s1.variance);
                    if v == 0 {
                        return false;
                    }
                    *coeff *= rat(v);
                    continue 'outer;
                }
                if !s0.is_concrete() && s0.name == s1.name {
                    factors.remove(m);
                    *coeff *= rat(self.dimension as i64);
                    continue 'outer;
                }
                for (this, other) in [(&s0, &s1), (&s1, &s0)] {
                    if this.is_concrete() {
                        continue;
                    }
                    let mut count = 0;
                    for (j, f) in factors.iter().enumerate() {
                        if j != m {
                            f.for_each_index(&mut |i| {
                                if !i.is_pattern && i.name == this.name {
                                    count += 1;
                                }
                            });
                        }
                    }
                    if count == 1 {
                        factors.remove(m);
                        for f in factors.iter_mut() {
                            *f = f.map_indices(&mut |i| {
                                if !i.is_pattern && i.name == this.name {
                                    other.clone()
                                } else {
                                    i.clone()
                                }
                            });
                        }
                        continue 'outer;
                    }
                }
            }
            return true;
        }
    }
}

fn metric_component(a: u32, b: u32, va: Variance, vb: Variance) -> i64 {
    if a != b {
        0
    } else if va != vb || a == 0 {
        1
    } else {
        -1
    }
}

/// Dummy names in first-occurrence order, and every other name in the
/// term (which fresh dummy names must avoid).
fn dummy_names(factors: &[Expr]) -> (Vec<Symbol>, std::collections::BTreeSet<Symbol>) {
    let mut order: Vec<Symbol> = Vec::new();
    let mut counts: BTreeMap<Symbol, usize> = BTreeMap::new();
    for f in factors {
        f.for_each_index(&mut |i| {
            if i.is_concrete() || i.is_pattern {
                return;
            }
            let c = counts.entry(i.name.clone()).or_insert(0);
            if *c == 0 {
                order.push(i.name.clone());
            }
            *c += 1;
        });
    }
    let dummies: Vec<Symbol> = order.into_iter().filter(|n| counts[n] == 2).collect();
    let taken = counts.into_iter().filter(|(_, c)| *c != 2).map(|(n, _)| n).collect();
    (dummies, taken)
}

/// Applies a relabelling plan and normalizes every factor. Returns the
/// accumulated sign (`true` = negated) and the sorted factor list, or
/// `None` if some factor vanishes by antisymmetry.
fn normalize_all(factors: &[Expr], plan: &[(Symbol, Symbol, bool)]) -> Option<(bool, Vec<Expr>)> {
    let mut sign = false;
    let mut out = Vec::with_capacity(factors.len());
    for f in factors {
        let renamed = if plan.is_empty() {
            f.clone()
        } else {
            f.map_indices(&mut |i| relabel(i, plan))
        };
        out.push(normalize_factor(&renamed, &mut sign)?);
    }
    out.sort();
    Some((sign, out))
}

fn relabel(i: &Index, plan: &[(Symbol, Symbol, bool)]) -> Index {
    if i.is_pattern {
        return i.clone();
    }
    for (from, to, flip) in plan {
        if *from == i.name {
            let variance = if *flip { i.variance.flip() } else { i.variance };
            return Index { name: to.clone(), variance, is_pattern: false };
        }
    }
    i.clone()
}

pub(crate) fn normalize_factor(e: &Expr, sign: &mut bool) -> Option<Expr> {
    match e {
        Expr::Tensor(t) => normalize_slots(t, sign).map(Expr::Tensor),
        Expr::Partial(..) => {
            let mut chain = Vec::new();
            let mut cur = e;
            while let Expr::Partial(i, x) = cur {
                chain.push(i.clone());
                cur = x;
            }
            let mut acc = normalize_factor(cur, sign)?;
            chain.sort();
            for i in chain.into_iter().rev() {
                acc = Expr::Partial(i, Box::new(acc));
            }
            Some(acc)
        }
        Expr::Product(c, fs) => {
            let mut out = Vec::with_capacity(fs.len());
            for f in fs {
                out.push(normalize_factor(f, sign)?);
            }
            out.sort();
            Some(Expr::Product(*c, out))
        }
        other => Some(other.clone()),
    }
}

fn normalize_slots(t: &Tensor, sign: &mut bool) -> Option<Tensor> {
    match t.head.symmetry {
        Symmetry::None => Some(t.clone()),
        Symmetry::Symmetric => {
            let mut indices = t.indices.clone();
            indices.sort();
            Some(Tensor { head: t.head.clone(), indices })
        }
        Symmetry::Antisymmetric => {
            let mut indices = t.indices.clone();
            // insertion sort, counting transpositions for the sign
            for i in 1..indices.len() {
                let mut j = i;
                while j > 0 && indices[j - 1] > indices[j] {
                    indices.swap(j - 1, j);
                    *sign = !*sign;
                    j -= 1;
                }
            }
            if indices.windows(2).any(|w| w[0].name == w[1].name) {
                return None;
            }
            Some(Tensor { head: t.head.clone(), indices })
        }
    }
}

fn expand(e: &Expr) -> Vec<RawTerm> {
    match e {
        Expr::Num(q) if q.is_zero() => Vec::new(),
        Expr::Num(q) => vec![RawTerm { coeff: *q, factors: Vec::new() }],
        Expr::Sum(ts) => ts.iter().flat_map(expand).collect(),
        Expr::Product(c, fs) => {
            if c.is_zero() {
                return Vec::new();
            }
            let mut acc = vec![RawTerm { coeff: *c, factors: Vec::new() }];
            for f in fs {
                let parts = expand(f);
                let mut next = Vec::with_capacity(acc.len() * parts.len());
                for a in &acc {
                    for p in &parts {
                        let mut factors = a.factors.clone();
                        factors.extend(p.factors.iter().cloned());
                        next.push(RawTerm { coeff: a.coeff * p.coeff, factors });
                    }
                }
                acc = next;
                if acc.is_empty() {
                    break;
                }
            }
            acc
        }
        Expr::Partial(i, x) => expand(x)
            .into_iter()
            .filter_map(|t| {
                let (mut constants, mut varying): (Vec<Expr>, Vec<Expr>) =
                    t.factors.into_iter().partition(is_constant);
                let inner = match varying.len() {
                    0 => return None,
                    1 => varying.pop().unwrap(),
                    _ => Expr::Product(Rational::one(), varying),
                };
                constants.push(Expr::Partial(i.clone(), Box::new(inner)));
                Some(RawTerm { coeff: t.coeff, factors: constants })
            })
            .collect(),
        other => vec![RawTerm { coeff: Rational::one(), factors: vec![other.clone()] }],
    }
}

fn is_constant(e: &Expr) -> bool {
    matches!(e, Expr::Tensor(t) if t.head.is_constant())
}
