//! Pattern matching of rule left-hand sides against canonical subjects, and
//! template instantiation.
//!
//! Products are matched modulo commutativity: each ordinary pattern factor
//! takes one distinct subject factor, and a sequence variable (`xs??`)
//! takes whatever is left, coefficient included. Head slot symmetries are
//! honoured, so an antisymmetric pattern atom may match a permuted subject
//! at the cost of a sign. Index variables bind a name together with a
//! variance flip: `_a?` matches `^mu` with the flip recorded, and every
//! other occurrence of `a?` must be flipped the same way. Lowering or
//! raising a whole pattern index consistently is an identity in Lorentz
//! tensor algebra, so rules apply regardless of index placement.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use num_traits::One;
use thiserror::Error;

use crate::expr::{
    canonicalize, check_well_formed, classify_indices, fresh_names, Expr, Index, IndexError,
    IndexKind, Rational, Symbol, Symmetry,
};

/// What an index variable is bound to: a subject index name, and whether
/// the subject occurrence has the opposite variance from the pattern.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IndexBinding {
    pub name: Symbol,
    pub flipped: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Binding {
    pub exprs: BTreeMap<Symbol, Expr>,
    pub indices: BTreeMap<Symbol, IndexBinding>,
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (k, v) in &self.indices {
            let mark = if v.flipped { "~" } else { "" };
            parts.push(format!("{k}?->{mark}{}", v.name));
        }
        for (k, v) in &self.exprs {
            parts.push(format!("{k}?->{v}"));
        }
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Path from the root: a term index in a sum, a factor index in a product,
/// or `0` for the operand of a derivative.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Position(pub Vec<usize>);

impl Position {
    pub fn root() -> Self {
        Position(Vec::new())
    }

    pub fn child(&self, i: usize) -> Self {
        let mut p = self.0.clone();
        p.push(i);
        Position(p)
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("root");
        }
        f.write_str(&self.0.iter().map(usize::to_string).join("."))
    }
}

impl FromStr for Position {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "root" {
            return Ok(Position::root());
        }
        s.split('.')
            .map(|p| p.parse::<usize>().map_err(|e| format!("bad position `{s}`: {e}")))
            .collect::<Result<_, _>>()
            .map(Position)
    }
}

pub fn subexpr_at<'a>(e: &'a Expr, p: &Position) -> Option<&'a Expr> {
    let mut cur = e;
    for &i in &p.0 {
        cur = cur.children().get(i)?;
    }
    Some(cur)
}

/// `e` with the subexpression at `p` replaced; `None` if `p` is stale.
pub fn replace_at(e: &Expr, p: &Position, new: Expr) -> Option<Expr> {
    fn go(e: &Expr, path: &[usize], new: Expr) -> Option<Expr> {
        let Some((&i, rest)) = path.split_first() else {
            return Some(new);
        };
        match e {
            Expr::Sum(ts) => {
                let mut ts = ts.clone();
                let slot = ts.get_mut(i)?;
                *slot = go(slot, rest, new)?;
                Some(Expr::Sum(ts))
            }
            Expr::Product(c, fs) => {
                let mut fs = fs.clone();
                let slot = fs.get_mut(i)?;
                *slot = go(slot, rest, new)?;
                Some(Expr::Product(*c, fs))
            }
            Expr::Partial(idx, x) if i == 0 => Some(Expr::partial(idx.clone(), go(x, rest, new)?)),
            _ => None,
        }
    }
    go(e, &p.0, new)
}

/// Every position in `e`, root first, then children left to right
/// (pre-order).
pub fn positions(e: &Expr) -> Vec<Position> {
    fn go(e: &Expr, here: Position, out: &mut Vec<Position>) {
        for (i, c) in e.children().iter().enumerate() {
            let p = here.child(i);
            out.push(p.clone());
            go(c, p, out);
        }
    }
    let mut out = vec![Position::root()];
    go(e, Position::root(), &mut out);
    out
}

/// All bindings under which `pattern` instantiates to exactly `subject`
/// (after canonicalization). `subject` should be canonical.
///
/// Matching is level by level: each pattern item takes its own nonzero
/// subject item. Signs propagate through every level, but the magnitude
/// of a coefficient is matched where it stands and never crosses a
/// derivative, so `2*d[_a](xs??)` does not match `d[_a](A[^b]*A[_b])`
/// although `xs = 1/2*A[^b]*A[_b]` would instantiate to it.
pub fn match_pattern(pattern: &Expr, subject: &Expr) -> Vec<Binding> {
    match_signed(pattern, subject)
        .into_iter()
        .filter(|(_, negated)| !negated)
        .map(|(b, _)| b)
        .dedup()
        .collect()
}

/// Like [`match_pattern`], but also returns bindings under which the
/// pattern instantiates to the *negation* of the subject (flag `true`).
/// Rewriting with such a binding replaces the subject by the negated
/// right-hand side.
pub fn match_signed(pattern: &Expr, subject: &Expr) -> Vec<(Binding, bool)> {
    let mut out = matches(pattern, subject, &Binding::default());
    out.sort();
    out.dedup();
    out
}

type Found = Vec<(Binding, bool)>;

fn matches(p: &Expr, s: &Expr, b: &Binding) -> Found {
    match p {
        Expr::Var(x) | Expr::SeqVar(x) => bind_expr(x, s, b).into_iter().map(|b| (b, false)).collect(),
        Expr::Num(q) => match s {
            Expr::Num(r) if q == r => vec![(b.clone(), false)],
            Expr::Num(r) if *q == -*r => vec![(b.clone(), true)],
            _ => Vec::new(),
        },
        Expr::Tensor(pt) => {
            let Expr::Tensor(st) = s else { return Vec::new() };
            if pt.head.name != st.head.name || pt.indices.len() != st.indices.len() {
                return Vec::new();
            }
            let n = pt.indices.len();
            let mut out = Vec::new();
            let perms: Vec<Vec<usize>> = match st.head.symmetry {
                Symmetry::None => vec![(0..n).collect()],
                _ => (0..n).permutations(n).collect(),
            };
            for perm in perms {
                let negated = st.head.symmetry == Symmetry::Antisymmetric && odd(&perm);
                let mut cur = Some(b.clone());
                for (i, &j) in perm.iter().enumerate() {
                    cur = cur.and_then(|b| bind_index(&pt.indices[i], &st.indices[j], &b));
                }
                if let Some(b) = cur {
                    out.push((b, negated));
                }
            }
            out
        }
        Expr::Partial(..) => match_chain(p, s, b),
        Expr::Product(cp, pfs) => match_product(*cp, pfs, s, b),
        Expr::Sum(pts) => match_sum(pts, s, b),
    }
}

fn odd(perm: &[usize]) -> bool {
    let mut inversions = 0;
    for i in 0..perm.len() {
        for j in i + 1..perm.len() {
            if perm[i] > perm[j] {
                inversions += 1;
            }
        }
    }
    inversions % 2 == 1
}

fn bind_expr(x: &Symbol, s: &Expr, b: &Binding) -> Option<Binding> {
    match b.exprs.get(x) {
        Some(v) if v == s => Some(b.clone()),
        Some(_) => None,
        None => {
            let mut b = b.clone();
            b.exprs.insert(x.clone(), s.clone());
            Some(b)
        }
    }
}

fn bind_index(p: &Index, s: &Index, b: &Binding) -> Option<Binding> {
    if s.is_pattern {
        return None;
    }
    if !p.is_pattern {
        return (p == s).then(|| b.clone());
    }
    let flipped = p.variance != s.variance;
    match b.indices.get(&p.name) {
        Some(v) if v.name == s.name && v.flipped == flipped => Some(b.clone()),
        Some(_) => None,
        None => {
            let mut b = b.clone();
            b.indices.insert(p.name.clone(), IndexBinding { name: s.name.clone(), flipped });
            Some(b)
        }
    }
}

fn chain(e: &Expr) -> (Vec<&Index>, &Expr) {
    let mut idx = Vec::new();
    let mut cur = e;
    while let Expr::Partial(i, x) = cur {
        idx.push(i);
        cur = x;
    }
    (idx, cur)
}

/// Derivative chains commute, so the pattern's derivative indices may take
/// any of the subject's chain indices in any order. A variable base binds
/// the chain of the remaining indices, in subject order, over the subject
/// base.
fn match_chain(p: &Expr, s: &Expr, b: &Binding) -> Found {
    let (pidx, pbase) = chain(p);
    let (sidx, sbase) = chain(s);
    let k = pidx.len();
    let var_base = matches!(pbase, Expr::Var(_) | Expr::SeqVar(_));
    if sidx.len() < k || (!var_base && sidx.len() != k) {
        return Vec::new();
    }
    let mut out = Vec::new();
    for pick in (0..sidx.len()).permutations(k) {
        let base_results = if var_base {
            let inner = sidx
                .iter()
                .enumerate()
                .rev()
                .filter(|(j, _)| !pick.contains(j))
                .fold(sbase.clone(), |acc, (_, i)| Expr::partial((*i).clone(), acc));
            matches(pbase, &inner, b)
        } else {
            matches(pbase, sbase, b)
        };
        for (b0, negated) in base_results {
            let mut cur = Some(b0);
            for (i, &j) in pick.iter().enumerate() {
                cur = cur.and_then(|b| bind_index(pidx[i], sidx[j], &b));
            }
            if let Some(b) = cur {
                out.push((b, negated));
            }
        }
    }
    out
}

fn match_product(cp: Rational, pfs: &[Expr], s: &Expr, b: &Binding) -> Found {
    let (c, sfs): (Rational, &[Expr]) = match s {
        Expr::Product(c, fs) => (*c, fs),
        Expr::Num(q) => (*q, &[]),
        other => (Rational::one(), std::slice::from_ref(other)),
    };
    let seq: Vec<&Symbol> = pfs
        .iter()
        .filter_map(|f| if let Expr::SeqVar(x) = f { Some(x) } else { None })
        .collect();
    if seq.len() > 1 {
        return Vec::new();
    }
    let fixed: Vec<&Expr> = pfs.iter().filter(|f| !matches!(f, Expr::SeqVar(_))).collect();
    if fixed.len() > sfs.len() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut used = vec![false; sfs.len()];
    assign(&fixed, sfs, 0, &mut used, b.clone(), false, &mut |b, used, negated| {
        let rest: Vec<Expr> =
            sfs.iter().zip(used).filter(|(_, u)| !**u).map(|(f, _)| f.clone()).collect();
        let sign = if negated { -Rational::one() } else { Rational::one() };
        match seq.first() {
            // the sequence variable may carry the sign or leave it to the caller
            Some(x) => {
                let value = Expr::product(c / (cp * sign), rest);
                if let Some(b) = bind_expr(x, &value.clone().neg(), &b) {
                    out.push((b, true));
                }
                if let Some(b) = bind_expr(x, &value, &b) {
                    out.push((b, false));
                }
            }
            None if rest.is_empty() => {
                let ratio = c / (cp * sign);
                if ratio.is_one() {
                    out.push((b, false));
                } else if (-ratio).is_one() {
                    out.push((b, true));
                }
            }
            None => {}
        }
    });
    out
}

/// Injective assignment of pattern items to subject items, threading the
/// binding and sign through; `done` sees every complete assignment.
fn assign(
    pats: &[&Expr],
    subjects: &[Expr],
    i: usize,
    used: &mut Vec<bool>,
    b: Binding,
    negated: bool,
    done: &mut dyn FnMut(Binding, &[bool], bool),
) {
    if i == pats.len() {
        done(b, used, negated);
        return;
    }
    for j in 0..subjects.len() {
        if used[j] {
            continue;
        }
        for (b2, n2) in matches(pats[i], &subjects[j], &b) {
            used[j] = true;
            assign(pats, subjects, i + 1, used, b2, negated ^ n2, done);
            used[j] = false;
        }
    }
}

fn match_sum(pts: &[Expr], s: &Expr, b: &Binding) -> Found {
    let sts: &[Expr] = match s {
        Expr::Sum(ts) => ts,
        other => std::slice::from_ref(other),
    };
    let seq: Vec<&Symbol> = pts
        .iter()
        .filter_map(|t| if let Expr::SeqVar(x) = t { Some(x) } else { None })
        .collect();
    if seq.len() > 1 {
        return Vec::new();
    }
    let fixed: Vec<&Expr> = pts.iter().filter(|t| !matches!(t, Expr::SeqVar(_))).collect();
    if fixed.len() > sts.len() {
        return Vec::new();
    }
    let mut out = Vec::new();
    // every term must agree on the overall sign
    for overall in [false, true] {
        let mut used = vec![false; sts.len()];
        assign_uniform(&fixed, sts, 0, &mut used, b.clone(), overall, &mut |b, used| {
            let rest: Vec<Expr> =
                sts.iter().zip(used).filter(|(_, u)| !**u).map(|(t, _)| t.clone()).collect();
            match seq.first() {
                Some(x) => {
                    let value = Expr::sum(rest);
                    let value = if overall { value.neg() } else { value };
                    if let Some(b) = bind_expr(x, &value, &b) {
                        out.push((b, overall));
                    }
                }
                None if rest.is_empty() => out.push((b, overall)),
                None => {}
            }
        });
        if fixed.is_empty() {
            break;
        }
    }
    out
}

fn assign_uniform(
    pats: &[&Expr],
    subjects: &[Expr],
    i: usize,
    used: &mut Vec<bool>,
    b: Binding,
    sign: bool,
    done: &mut dyn FnMut(Binding, &[bool]),
) {
    if i == pats.len() {
        done(b, used);
        return;
    }
    for j in 0..subjects.len() {
        if used[j] {
            continue;
        }
        for (b2, n2) in matches(pats[i], &subjects[j], &b) {
            if n2 != sign {
                continue;
            }
            used[j] = true;
            assign_uniform(pats, subjects, i + 1, used, b2, sign, done);
            used[j] = false;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum InstantiateError {
    #[error("variable `{0}?` is not bound")]
    UnboundVar(Symbol),
    #[error("index variable `{0}?` is not bound")]
    UnboundIndex(Symbol),
    #[error("instantiated expression is ill-formed: {0}")]
    IllFormed(#[from] IndexError),
}

/// Substitutes `b` into `template` and canonicalizes.
pub fn instantiate(template: &Expr, b: &Binding) -> Result<Expr, InstantiateError> {
    Ok(canonicalize(&instantiate_raw(template, b, &BTreeSet::new())?))
}

/// Substitution without canonicalization. Dummy indices introduced by the
/// template, and the internal dummies of every repeated use of a bound
/// value, are renamed to names outside `avoid` and outside every name in
/// the binding.
pub fn instantiate_raw(
    template: &Expr,
    b: &Binding,
    avoid: &BTreeSet<Symbol>,
) -> Result<Expr, InstantiateError> {
    let mut used: BTreeSet<Symbol> = avoid.clone();
    for v in b.exprs.values() {
        used.extend(v.index_names());
    }
    used.extend(b.indices.values().map(|i| i.name.clone()));
    used.extend(template.index_names());

    let local: BTreeSet<Symbol> = classify_indices(template)?
        .into_iter()
        .filter(|(i, k)| *k == IndexKind::Dummy && !i.is_pattern)
        .map(|(i, _)| i.name)
        .collect();
    let fresh = fresh_names("t", local.len(), &used);
    used.extend(fresh.iter().cloned());
    let local: BTreeMap<Symbol, Symbol> = local.into_iter().zip(fresh).collect();

    let mut st = Subst { b, local: &local, used, uses: BTreeMap::new() };
    let out = st.go(template)?;
    check_well_formed(&out)?;
    Ok(out)
}

struct Subst<'a> {
    b: &'a Binding,
    local: &'a BTreeMap<Symbol, Symbol>,
    used: BTreeSet<Symbol>,
    uses: BTreeMap<Symbol, usize>,
}

impl Subst<'_> {
    fn index(&self, i: &Index) -> Result<Index, InstantiateError> {
        if i.is_pattern {
            let v = self.b.indices.get(&i.name).ok_or_else(|| InstantiateError::UnboundIndex(i.name.clone()))?;
            let variance = if v.flipped { i.variance.flip() } else { i.variance };
            return Ok(Index { name: v.name.clone(), variance, is_pattern: false });
        }
        Ok(match self.local.get(&i.name) {
            Some(n) => i.with_name(n.clone()),
            None => i.clone(),
        })
    }

    fn value(&mut self, x: &Symbol) -> Result<Expr, InstantiateError> {
        let v = self.b.exprs.get(x).ok_or_else(|| InstantiateError::UnboundVar(x.clone()))?;
        let n = self.uses.entry(x.clone()).or_insert(0);
        *n += 1;
        if *n == 1 {
            return Ok(v.clone());
        }
        let internal = internal_dummies(v);
        if internal.is_empty() {
            return Ok(v.clone());
        }
        let fresh = fresh_names("t", internal.len(), &self.used);
        self.used.extend(fresh.iter().cloned());
        let map: BTreeMap<Symbol, Symbol> = internal.into_iter().zip(fresh).collect();
        Ok(v.map_indices(&mut |i| match map.get(&i.name) {
            Some(n) if !i.is_pattern => i.with_name(n.clone()),
            _ => i.clone(),
        }))
    }

    fn go(&mut self, t: &Expr) -> Result<Expr, InstantiateError> {
        Ok(match t {
            Expr::Var(x) | Expr::SeqVar(x) => self.value(x)?,
            Expr::Num(q) => Expr::Num(*q),
            Expr::Tensor(tt) => {
                let indices = tt.indices.iter().map(|i| self.index(i)).collect::<Result<_, _>>()?;
                Expr::tensor(tt.head.clone(), indices)
            }
            Expr::Partial(i, x) => {
                let i = self.index(i)?;
                Expr::partial(i, self.go(x)?)
            }
            Expr::Product(c, fs) => {
                let fs = fs.iter().map(|f| self.go(f)).collect::<Result<_, _>>()?;
                Expr::Product(*c, fs)
            }
            Expr::Sum(ts) => Expr::Sum(ts.iter().map(|x| self.go(x)).collect::<Result<_, _>>()?),
        })
    }
}

/// Names paired entirely inside `v`.
fn internal_dummies(v: &Expr) -> BTreeSet<Symbol> {
    classify_indices(v)
        .map(|ks| {
            let mut counts: BTreeMap<Symbol, usize> = BTreeMap::new();
            for (i, k) in ks {
                if k == IndexKind::Dummy {
                    *counts.entry(i.name).or_insert(0) += 1;
                }
            }
            counts.into_iter().filter(|(_, c)| *c % 2 == 0).map(|(n, _)| n).collect()
        })
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expr, parse_pattern};

    fn p(s: &str) -> Expr {
        parse_pattern(s).unwrap()
    }

    fn g(s: &str) -> Expr {
        canonicalize(&parse_expr(s).unwrap())
    }

    fn ib(name: &str) -> IndexBinding {
        IndexBinding { name: crate::expr::sym(name), flipped: false }
    }

    #[test]
    fn antisymmetric_atom_binds_in_slot_order() {
        let bs = match_pattern(&p("F[_a?,_b?]"), &g("F[_mu,_nu]"));
        assert_eq!(bs.len(), 1);
        assert_eq!(bs[0].indices["a"], ib("mu"));
        assert_eq!(bs[0].indices["b"], ib("nu"));
        let signed = match_signed(&p("F[_a?,_b?]"), &g("F[_mu,_nu]"));
        assert_eq!(signed.len(), 2);
        assert!(signed.iter().any(|(b, neg)| *neg && b.indices["a"] == ib("nu")));
    }

    #[test]
    fn symmetric_head_gives_both_orders() {
        let bs = match_pattern(&p("x? * eta[^a?,^b?]"), &g("A[_lam] * eta[^mu,^nu]"));
        assert_eq!(bs.len(), 2);
        for b in &bs {
            assert_eq!(b.exprs["x"], g("A[_lam]"));
            assert_eq!(instantiate(&p("x? * eta[^a?,^b?]"), b).unwrap(), g("A[_lam] * eta[^mu,^nu]"));
        }
    }

    #[test]
    fn head_mismatch_is_empty() {
        assert!(match_pattern(&p("d[_a?](x?)"), &g("F[_mu,_nu]")).is_empty());
    }

    #[test]
    fn variance_flip_is_consistent() {
        let bs = match_pattern(&p("d[_a?](F[^a?,^b?])"), &parse_expr("d[^mu](F[_mu,^nu])").unwrap());
        assert!(!bs.is_empty());
        for b in &bs {
            assert!(b.indices["a"].flipped);
            assert!(!b.indices["b"].flipped);
        }
        assert!(match_pattern(&p("d[_a?](F[^a?,^b?])"), &g("d[_mu](F[_nu,^lam])")).is_empty());
    }

    #[test]
    fn sequence_variable_takes_rest_with_coefficient() {
        let bs = match_pattern(&p("A[_a?] * xs??"), &g("3*A[_mu]*B*C"));
        assert_eq!(bs.len(), 1);
        assert_eq!(bs[0].exprs["xs"], g("3*B*C"));
    }

    #[test]
    fn chain_binds_inner_subtree() {
        let s = g("d[_l](d[_m](A[_n]))");
        let bs = match_pattern(&p("d[_a?](x?)"), &s);
        let inner: Vec<String> = bs.iter().map(|b| b.exprs["x"].to_string()).collect();
        assert_eq!(inner, ["d[_l](A[_n])", "d[_m](A[_n])"]);
        let two = match_pattern(&p("d[_a?](d[_b?](A[_c?]))"), &s);
        assert_eq!(two.len(), 2);
    }

    #[test]
    fn sum_pattern_matches_field_strength_expansion() {
        let pat = p("d[_a?](A[_b?]) - d[_b?](A[_a?])");
        let bs = match_pattern(&pat, &g("d[_mu](A[_nu]) - d[_nu](A[_mu])"));
        assert_eq!(bs.len(), 1);
        assert_eq!(bs[0].indices["a"], ib("mu"));
        let signed = match_signed(&pat, &g("d[_nu](A[_mu]) - d[_mu](A[_nu])"));
        assert!(signed.iter().any(|(_, n)| !n));
    }

    #[test]
    fn instantiate_field_strength() {
        let mut b = Binding::default();
        b.indices.insert(crate::expr::sym("a"), ib("mu"));
        b.indices.insert(crate::expr::sym("b"), ib("nu"));
        let e = instantiate(&p("d[_a?](A[_b?]) - d[_b?](A[_a?])"), &b).unwrap();
        assert_eq!(e, g("d[_mu](A[_nu]) - d[_nu](A[_mu])"));
    }

    #[test]
    fn instantiate_product_of_values() {
        let mut b = Binding::default();
        b.exprs.insert(crate::expr::sym("x"), Expr::num(2));
        b.exprs.insert(crate::expr::sym("y"), g("A[_mu]"));
        assert_eq!(instantiate(&p("x? * y?"), &b).unwrap(), g("2*A[_mu]"));
    }

    #[test]
    fn template_dummies_are_renamed_apart() {
        let mut b = Binding::default();
        b.exprs.insert(crate::expr::sym("x"), parse_expr("F[_k,^k]").unwrap());
        let raw = instantiate_raw(&p("x? * F[_k,^k]"), &b, &BTreeSet::new()).unwrap();
        check_well_formed(&raw).unwrap();
        assert_eq!(raw.to_string(), "F[_k,^k]*F[_t0,^t0]");
        assert!(canonicalize(&raw).is_zero());
    }

    #[test]
    fn repeated_value_gets_fresh_internal_dummies() {
        let mut b = Binding::default();
        b.exprs.insert(crate::expr::sym("x"), parse_expr("A[_k]*A[^k]").unwrap());
        let raw = instantiate_raw(&p("x? * x?"), &b, &BTreeSet::new()).unwrap();
        check_well_formed(&raw).unwrap();
        assert_eq!(canonicalize(&raw), g("A[_a]*A[^a]*A[_b]*A[^b]"));
    }

    #[test]
    fn unbound_variable_is_an_error() {
        assert_eq!(
            instantiate(&p("y?"), &Binding::default()),
            Err(InstantiateError::UnboundVar(crate::expr::sym("y")))
        );
    }

    #[test]
    fn positions_are_preorder() {
        let e = g("F[_a,_b]*d[_c](A[^c]) + B[_a,_b]");
        let ps: Vec<String> = positions(&e).iter().map(ToString::to_string).collect();
        assert_eq!(ps[0], "root");
        for q in positions(&e) {
            assert!(subexpr_at(&e, &q).is_some());
            assert_eq!(replace_at(&e, &q, subexpr_at(&e, &q).unwrap().clone()).unwrap(), e);
        }
        assert!(replace_at(&e, &Position(vec![7]), Expr::num(1)).is_none());
    }
}
