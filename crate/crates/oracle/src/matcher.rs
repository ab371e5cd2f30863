//! Brute-force matching: enumerate every assignment of pattern variables
//! from a finite candidate domain and keep those whose plain substitution
//! is structurally equal to the subject.
//!
//! The domains encode the pattern language. A variable standing as a
//! product factor takes one subject factor. A sequence variable in a
//! product takes a coefficient and a subset of factors. A sequence
//! variable in a sum takes a subset of terms. A variable under a
//! derivative chain takes the chain of the remaining derivatives. A
//! variable standing as a sum term takes one subject term. Any other
//! variable takes any subterm. An index variable takes a subject
//! index name, flipped or not.

use std::collections::{BTreeMap, BTreeSet};

use fieldsearch::expr::{Expr, Rational, Symbol};
use fieldsearch::pattern::{Binding, IndexBinding};
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::RngExt;

use crate::normal::{merge_free, normal, substitute};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Context {
    Factor,
    ProductRest,
    SumRest,
    Term,
    Anywhere,
}

fn contexts(p: &Expr, ctx: Context, out: &mut BTreeMap<Symbol, Context>) {
    match p {
        Expr::Var(x) => {
            out.entry(x.clone()).or_insert(ctx);
        }
        Expr::SeqVar(x) => {
            let c = match ctx {
                Context::Factor => Context::ProductRest,
                Context::ProductRest | Context::SumRest => ctx,
                Context::Term | Context::Anywhere => Context::Anywhere,
            };
            out.entry(x.clone()).or_insert(c);
        }
        Expr::Product(_, fs) => {
            for f in fs {
                contexts(f, Context::Factor, out);
            }
        }
        Expr::Sum(ts) => {
            for t in ts {
                let c = match t {
                    Expr::SeqVar(_) => Context::SumRest,
                    Expr::Var(_) => Context::Term,
                    _ => Context::Anywhere,
                };
                contexts(t, c, out);
            }
        }
        Expr::Partial(_, x) => contexts(x, Context::Anywhere, out),
        _ => {}
    }
}

fn subterms(e: &Expr, out: &mut Vec<Expr>) {
    out.push(e.clone());
    for c in e.children() {
        subterms(c, out);
    }
}

fn index_vars(p: &Expr) -> BTreeSet<Symbol> {
    let mut out = BTreeSet::new();
    p.for_each_index(&mut |i| {
        if i.is_pattern {
            out.insert(i.name.clone());
        }
    });
    out
}

fn coefficients(e: &Expr, out: &mut BTreeSet<Rational>) {
    match e {
        Expr::Num(q) | Expr::Product(q, _) => {
            out.insert(*q);
        }
        _ => {}
    }
    for c in e.children() {
        coefficients(c, out);
    }
}

fn subsets<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    (0..1u32 << items.len())
        .map(|mask| items.iter().enumerate().filter(|(k, _)| mask & (1 << k) != 0).map(|(_, x)| x.clone()).collect())
        .collect()
}

/// Every binding under which `pattern` equals `subject` up to the
/// structural normal form.
pub fn brute_force_matches(pattern: &Expr, subject: &Expr) -> BTreeSet<Binding> {
    let mut ctx = BTreeMap::new();
    contexts(pattern, Context::Anywhere, &mut ctx);

    let mut all = Vec::new();
    subterms(subject, &mut all);
    all.sort();
    all.dedup();

    let mut chains = Vec::new();
    for s in &all {
        if let Expr::Partial(..) = s {
            let mut idx = Vec::new();
            let mut cur = s;
            while let Expr::Partial(i, x) = cur {
                idx.push(i.clone());
                cur = x;
            }
            for keep in subsets(&idx) {
                chains.push(keep.into_iter().rev().fold((*cur).clone(), |acc, i| Expr::partial(i, acc)));
            }
        }
    }

    let mut subject_coeffs = BTreeSet::from([Rational::from_integer(1)]);
    coefficients(subject, &mut subject_coeffs);
    let mut pattern_coeffs = BTreeSet::from([Rational::from_integer(1)]);
    coefficients(pattern, &mut pattern_coeffs);
    let mut coeffs = BTreeSet::new();
    for c in &subject_coeffs {
        for cp in &pattern_coeffs {
            coeffs.insert(*c / *cp);
            coeffs.insert(-*c / *cp);
        }
    }

    let mut product_values = BTreeSet::new();
    let mut sum_values = BTreeSet::new();
    for s in &all {
        let factors: Vec<Expr> = match s {
            Expr::Product(_, fs) => fs.clone(),
            Expr::Num(_) => Vec::new(),
            other => vec![other.clone()],
        };
        for subset in subsets(&factors) {
            for c in &coeffs {
                product_values.insert(Expr::product(*c, subset.clone()));
            }
        }
        if let Expr::Sum(ts) = s {
            for subset in subsets(ts) {
                sum_values.insert(Expr::sum(subset));
            }
        }
    }
    if !matches!(subject, Expr::Sum(_)) {
        sum_values.insert(Expr::zero());
        sum_values.insert(subject.clone());
    }

    let domain = |c: Context| -> Vec<Expr> {
        match c {
            Context::Factor => {
                all.iter().filter(|e| !matches!(e, Expr::Product(..) | Expr::Num(_) | Expr::Sum(_))).cloned().collect()
            }
            Context::ProductRest => product_values.iter().cloned().collect(),
            Context::SumRest => sum_values.iter().cloned().collect(),
            Context::Term => all.iter().filter(|e| !matches!(e, Expr::Sum(_))).cloned().collect(),
            Context::Anywhere => {
                let mut v: Vec<Expr> = all.iter().chain(&chains).cloned().collect();
                v.sort();
                v.dedup();
                v
            }
        }
    };
    let vars: Vec<(Symbol, Vec<Expr>)> = ctx.into_iter().map(|(x, c)| (x, domain(c))).collect();

    let names: Vec<Symbol> = subject.index_names().into_iter().collect();
    let index_choices: Vec<IndexBinding> = names
        .iter()
        .flat_map(|n| [false, true].map(|flipped| IndexBinding { name: n.clone(), flipped }))
        .collect();
    let ivars: Vec<Symbol> = index_vars(pattern).into_iter().collect();

    let target = normal(subject);
    let mut out = BTreeSet::new();
    let mut b = Binding::default();
    assign_exprs(pattern, &target, &vars, 0, &ivars, &index_choices, &mut b, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn assign_exprs(
    pattern: &Expr,
    target: &Expr,
    vars: &[(Symbol, Vec<Expr>)],
    k: usize,
    ivars: &[Symbol],
    choices: &[IndexBinding],
    b: &mut Binding,
    out: &mut BTreeSet<Binding>,
) {
    if k == vars.len() {
        assign_indices(pattern, target, ivars, 0, choices, b, out);
        return;
    }
    let (name, domain) = &vars[k];
    for v in domain {
        b.exprs.insert(name.clone(), v.clone());
        assign_exprs(pattern, target, vars, k + 1, ivars, choices, b, out);
    }
    b.exprs.remove(name);
}

fn assign_indices(
    pattern: &Expr,
    target: &Expr,
    ivars: &[Symbol],
    k: usize,
    choices: &[IndexBinding],
    b: &mut Binding,
    out: &mut BTreeSet<Binding>,
) {
    if k == ivars.len() {
        if let Some(e) = substitute(pattern, b) {
            if !vanishing_item(&e) && merge_free(&e) && normal(&e) == *target {
                out.insert(b.clone());
            }
        }
        return;
    }
    for c in choices {
        b.indices.insert(ivars[k].clone(), c.clone());
        assign_indices(pattern, target, ivars, k + 1, choices, b, out);
    }
    b.indices.remove(&ivars[k]);
}

fn vanishing_item(e: &Expr) -> bool {
    match e {
        Expr::Tensor(_) | Expr::Partial(..) if normal(e).is_zero() => true,
        _ => e.children().iter().any(vanishing_item),
    }
}

/// A pattern obtained from `subject` by abstracting some subterms into
/// variables and some index names into index variables, occasionally
/// perturbed so that it no longer matches.
pub fn abstract_pattern(subject: &Expr, rng: &mut StdRng) -> Expr {
    let mut renames: BTreeMap<Symbol, (Symbol, bool)> = BTreeMap::new();
    for (n, name) in subject.index_names().into_iter().enumerate() {
        if rng.random_bool(0.6) {
            renames.insert(name, (Symbol::from(format!("p{n}")), rng.random_bool(0.3)));
        }
    }
    let mut st = Abstractor { rng, vars: 0, seq_used: false };
    let p = st.go(subject, true);
    let mut p = p.map_indices(&mut |i| match renames.get(&i.name) {
        Some((v, flip)) => {
            let mut j = i.with_name(v.clone());
            j.is_pattern = true;
            if *flip {
                j.variance = j.variance.flip();
            }
            j
        }
        None => i.clone(),
    });
    if st.rng.random_bool(0.15) {
        let mut flipped = false;
        p = p.map_indices(&mut |i| {
            if !flipped {
                flipped = true;
                return i.flipped();
            }
            i.clone()
        });
    }
    p
}

struct Abstractor<'r> {
    rng: &'r mut StdRng,
    vars: usize,
    seq_used: bool,
}

impl Abstractor<'_> {
    fn var(&mut self) -> Expr {
        self.vars += 1;
        Expr::Var(Symbol::from(["x", "y", "z", "w"][(self.vars - 1) % 4]))
    }

    fn go(&mut self, e: &Expr, root: bool) -> Expr {
        if !root && self.vars < 2 && self.rng.random_bool(0.25) && !matches!(e, Expr::Num(_)) {
            return self.var();
        }
        match e {
            Expr::Product(c, fs) => {
                let mut out = Vec::new();
                let mut coeff = *c;
                if !self.seq_used && self.rng.random_bool(0.3) {
                    self.seq_used = true;
                    coeff = Rational::from_integer(1);
                    out.push(Expr::SeqVar(Symbol::from("xs")));
                    for f in fs {
                        if self.rng.random_bool(0.5) {
                            out.push(self.go(f, false));
                        }
                    }
                } else {
                    for f in fs {
                        out.push(self.go(f, false));
                    }
                    if self.rng.random_bool(0.1) {
                        coeff = *[Rational::from_integer(2), -coeff].choose(self.rng).unwrap();
                    }
                }
                Expr::Product(coeff, out)
            }
            Expr::Sum(ts) => {
                let mut out = Vec::new();
                if !self.seq_used && self.rng.random_bool(0.3) {
                    self.seq_used = true;
                    out.push(Expr::SeqVar(Symbol::from("xs")));
                    for t in ts {
                        if self.rng.random_bool(0.5) {
                            out.push(self.go(t, false));
                        }
                    }
                } else {
                    for t in ts {
                        out.push(self.go(t, false));
                    }
                }
                Expr::Sum(out)
            }
            Expr::Partial(i, x) => Expr::partial(i.clone(), self.go(x, false)),
            other => other.clone(),
        }
    }
}
