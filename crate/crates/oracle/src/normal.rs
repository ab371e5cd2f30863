//! A structural normal form: products and sums are flattened, sorted and
//! merged, symmetric slots are sorted, antisymmetric slots are sorted with
//! a sign, and derivative chains are sorted. The sign of a coefficient
//! inside a derivative moves out; its magnitude stays. Dummy names, index
//! variance and metric contraction are left alone.

use std::collections::BTreeMap;

use fieldsearch::expr::{Expr, Index, Rational, Symmetry, Tensor};
use fieldsearch::pattern::Binding;

pub fn normal(e: &Expr) -> Expr {
    Expr::sum(merged(e).into_iter().map(|(fs, c)| Expr::product(c, fs)).collect())
}

/// Nonzero monomials of `e` after merging like terms.
fn merged(e: &Expr) -> BTreeMap<Vec<Expr>, Rational> {
    let mut terms: BTreeMap<Vec<Expr>, Rational> = BTreeMap::new();
    for (c, fs) in monomials(e) {
        *terms.entry(fs).or_insert_with(|| Rational::from_integer(0)) += c;
    }
    terms.retain(|_, c| *c.numer() != 0);
    terms
}

/// True when no sum in `e` has two terms that merge or cancel under
/// [`normal`].
pub fn merge_free(e: &Expr) -> bool {
    // counted before the sum constructor can splice a lone sum factor back in
    if matches!(e, Expr::Sum(_)) && monomials(e).len() != merged(e).len() {
        return false;
    }
    e.children().iter().all(merge_free)
}

/// `e` as a list of (coefficient, sorted factors), without distributing
/// products over sums.
fn monomials(e: &Expr) -> Vec<(Rational, Vec<Expr>)> {
    match e {
        Expr::Sum(ts) => ts.iter().flat_map(monomials).collect(),
        other => monomial(other).into_iter().collect(),
    }
}

fn monomial(e: &Expr) -> Option<(Rational, Vec<Expr>)> {
    let one = Rational::from_integer(1);
    match e {
        Expr::Num(q) if *q.numer() == 0 => None,
        Expr::Num(q) => Some((*q, Vec::new())),
        Expr::Sum(_) => {
            let n = normal(e);
            match n {
                Expr::Sum(ref ts) if ts.is_empty() => None,
                Expr::Sum(_) => Some((one, vec![n])),
                single => monomial(&single),
            }
        }
        Expr::Product(c, fs) => {
            let mut coeff = *c;
            let mut factors = Vec::new();
            for f in fs {
                let (fc, ffs) = monomial(f)?;
                coeff *= fc;
                factors.extend(ffs);
            }
            factors.sort();
            Some((coeff, factors))
        }
        Expr::Tensor(t) => {
            let (sign, t) = tensor(t)?;
            Some((Rational::from_integer(sign), vec![Expr::Tensor(t)]))
        }
        Expr::Partial(..) => {
            let mut idx: Vec<Index> = Vec::new();
            let mut cur = e;
            while let Expr::Partial(i, x) = cur {
                idx.push(i.clone());
                cur = x;
            }
            idx.sort();
            let (sign, base) = match normal(cur) {
                b if b.is_zero() => return None,
                Expr::Num(_) => return None,
                Expr::Product(c, fs) if c < Rational::from_integer(0) => (-one, Expr::product(-c, fs)),
                b => (one, b),
            };
            let chain = idx.into_iter().rev().fold(base, |acc, i| Expr::partial(i, acc));
            Some((sign, vec![chain]))
        }
        Expr::Var(_) | Expr::SeqVar(_) => Some((one, vec![e.clone()])),
    }
}

fn tensor(t: &Tensor) -> Option<(i64, Tensor)> {
    let mut idx = t.indices.clone();
    let mut sign = 1;
    match t.head.symmetry {
        Symmetry::None => {}
        Symmetry::Symmetric => idx.sort(),
        Symmetry::Antisymmetric => {
            for i in 0..idx.len() {
                for j in 0..idx.len() - 1 - i {
                    if idx[j] > idx[j + 1] {
                        idx.swap(j, j + 1);
                        sign = -sign;
                    }
                }
            }
            if idx.windows(2).any(|w| w[0].name == w[1].name) {
                return None;
            }
        }
    }
    Some((sign, Tensor { head: t.head.clone(), indices: idx }))
}

/// Plain substitution of a binding into a pattern: no renaming of any
/// kind. `None` if some variable is unbound.
pub fn substitute(p: &Expr, b: &Binding) -> Option<Expr> {
    let index = |i: &Index| -> Option<Index> {
        if !i.is_pattern {
            return Some(i.clone());
        }
        let v = b.indices.get(&i.name)?;
        let variance = if v.flipped { i.variance.flip() } else { i.variance };
        Some(Index::new(v.name.clone(), variance))
    };
    Some(match p {
        Expr::Var(x) | Expr::SeqVar(x) => b.exprs.get(x)?.clone(),
        Expr::Num(q) => Expr::Num(*q),
        Expr::Tensor(t) => Expr::Tensor(Tensor {
            head: t.head.clone(),
            indices: t.indices.iter().map(index).collect::<Option<_>>()?,
        }),
        Expr::Partial(i, x) => Expr::partial(index(i)?, substitute(x, b)?),
        Expr::Product(c, fs) => Expr::Product(*c, fs.iter().map(|f| substitute(f, b)).collect::<Option<_>>()?),
        Expr::Sum(ts) => Expr::Sum(ts.iter().map(|t| substitute(t, b)).collect::<Option<_>>()?),
    })
}
