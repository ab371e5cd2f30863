//! Component expansion: evaluates an expression for every concrete
//! assignment of its free indices, summing dummies explicitly over
//! `0..D` with the metric `diag(+1,-1,-1,-1,...)`. Each tensor component
//! becomes a formal symbol (`A_{1}`, `dA_{0,1}` for the derivative
//! `∂_0 A_1`, `ddA_{0,1,2}`), so the result is an exact multivariate
//! polynomial per entry.
//!
//! This is deliberately a different route from the canonicalizer: it walks
//! the raw tree and never relies on contraction, relabelling or symmetry
//! normalization of the symbolic form.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use super::indices::{free_indices, IndexError};
use super::{parse_pattern, rat, sym, Expr, Index, Rational, Symbol, Symmetry, Tensor, Variance};

const MAX_DERIVATIVE_DEPTH: usize = 2;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ComponentError {
    #[error("pattern variables cannot be expanded")]
    Pattern,
    #[error("derivatives deeper than {MAX_DERIVATIVE_DEPTH} are not supported")]
    DerivativeDepth,
    #[error("index `{0}` is not bound")]
    Unbound(Symbol),
    #[error(transparent)]
    Index(#[from] IndexError),
}

/// A formal tensor component with all slots lowered.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ComponentSymbol {
    pub head: Symbol,
    /// Derivative directions, sorted (partials commute).
    pub derivs: Vec<u32>,
    pub slots: Vec<u32>,
    /// Constant symbols have vanishing derivatives.
    pub constant: bool,
}

impl fmt::Display for ComponentSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for _ in &self.derivs {
            f.write_str("d")?;
        }
        f.write_str(&self.head)?;
        let all: Vec<String> = self.derivs.iter().chain(&self.slots).map(u32::to_string).collect();
        if !all.is_empty() {
            write!(f, "_{{{}}}", all.join(","))?;
        }
        Ok(())
    }
}

type Monomial = Vec<(ComponentSymbol, u32)>;

/// Exact polynomial over component symbols.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, Rational>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial::default()
    }

    pub fn constant(q: Rational) -> Self {
        let mut p = Polynomial::zero();
        if !q.is_zero() {
            p.terms.insert(Vec::new(), q);
        }
        p
    }

    pub fn symbol(s: ComponentSymbol) -> Self {
        let mut p = Polynomial::zero();
        p.terms.insert(vec![(s, 1)], Rational::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(m).or_insert_with(Rational::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
    }

    pub fn add(&mut self, other: &Polynomial) {
        for (m, c) in &other.terms {
            self.add_term(m.clone(), *c);
        }
    }

    pub fn scale(&self, q: Rational) -> Polynomial {
        if q.is_zero() {
            return Polynomial::zero();
        }
        Polynomial { terms: self.terms.iter().map(|(m, c)| (m.clone(), *c * q)).collect() }
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.add_term(mul_monomials(m1, m2), *c1 * *c2);
            }
        }
        out
    }

    /// Partial derivative along coordinate direction `dir`.
    pub fn derivative(&self, dir: u32) -> Result<Polynomial, ComponentError> {
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            for (k, (s, power)) in m.iter().enumerate() {
                if s.constant {
                    continue;
                }
                let mut ds = s.clone();
                ds.derivs.push(dir);
                ds.derivs.sort_unstable();
                if ds.derivs.len() > MAX_DERIVATIVE_DEPTH {
                    return Err(ComponentError::DerivativeDepth);
                }
                let mut rest = m.clone();
                if *power == 1 {
                    rest.remove(k);
                } else {
                    rest[k].1 -= 1;
                }
                let term = mul_monomials(&rest, &[(ds, 1)]);
                out.add_term(term, *c * rat(*power as i64));
            }
        }
        Ok(out)
    }
}

fn mul_monomials(a: &[(ComponentSymbol, u32)], b: &[(ComponentSymbol, u32)]) -> Monomial {
    let mut map: BTreeMap<ComponentSymbol, u32> = a.iter().cloned().collect();
    for (s, p) in b {
        *map.entry(s.clone()).or_insert(0) += p;
    }
    map.into_iter().collect()
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let mag = c.abs();
            match (i, c.is_negative()) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            let mut parts: Vec<String> = Vec::new();
            if !mag.is_one() || m.is_empty() {
                parts.push(mag.to_string());
            }
            for (s, p) in m {
                if *p == 1 {
                    parts.push(s.to_string());
                } else {
                    parts.push(format!("{s}^{p}"));
                }
            }
            f.write_str(&parts.join("*"))?;
        }
        Ok(())
    }
}

/// One polynomial per assignment of the free indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentTable {
    pub dimension: u32,
    /// Free indices in sorted order; entry keys follow this order.
    pub free: Vec<Index>,
    pub entries: BTreeMap<Vec<u32>, Polynomial>,
}

impl ComponentTable {
    pub fn get(&self, key: &[u32]) -> Option<&Polynomial> {
        self.entries.get(key)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.values().all(Polynomial::is_zero)
    }
}

impl fmt::Display for ComponentTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, p) in &self.entries {
            let key: Vec<String> = k.iter().map(u32::to_string).collect();
            writeln!(f, "({}): {}", key.join(","), p)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct Definition {
    params: Vec<Index>,
    body: Expr,
}

/// Expands expressions into component tables. Heads with a definition are
/// replaced by their body; every other head becomes a formal symbol.
#[derive(Clone, Debug)]
pub struct ComponentExpander {
    pub dimension: u32,
    definitions: BTreeMap<Symbol, Definition>,
}

impl Default for ComponentExpander {
    fn default() -> Self {
        Self::new(4)
    }
}

/// Component table of `e` in `dimension` dimensions, with the field
/// strength expanded as `F_{ab} = ∂_a A_b - ∂_b A_a`.
pub fn expand_components(e: &Expr, dimension: u32) -> Result<ComponentTable, ComponentError> {
    ComponentExpander::new(dimension).expand(e)
}

type Env = Vec<(Symbol, u32)>;

impl ComponentExpander {
    pub fn new(dimension: u32) -> Self {
        let mut x = ComponentExpander { dimension, definitions: BTreeMap::new() };
        let body = parse_pattern("d[_a](A[_b]) - d[_b](A[_a])").expect("field strength definition");
        x.define("F", vec![Index::lower("a"), Index::lower("b")], body);
        x
    }

    /// Registers `head[params] := body`.
    pub fn define(&mut self, head: &str, params: Vec<Index>, body: Expr) {
        self.definitions.insert(sym(head), Definition { params, body });
    }

    pub fn expand(&self, e: &Expr) -> Result<ComponentTable, ComponentError> {
        if e.is_pattern() {
            return Err(ComponentError::Pattern);
        }
        let free: Vec<Index> = free_indices(e)?.into_iter().collect();
        let mut entries = BTreeMap::new();
        for key in assignments(free.len(), self.dimension) {
            let mut env: Env = free.iter().map(|i| i.name.clone()).zip(key.iter().copied()).collect();
            let p = self.eval(e, &mut env)?;
            entries.insert(key, p);
        }
        Ok(ComponentTable { dimension: self.dimension, free, entries })
    }

    fn eval(&self, e: &Expr, env: &mut Env) -> Result<Polynomial, ComponentError> {
        match e {
            Expr::Sum(ts) => {
                let mut acc = Polynomial::zero();
                for t in ts {
                    acc.add(&self.eval(t, env)?);
                }
                Ok(acc)
            }
            Expr::Num(q) => Ok(Polynomial::constant(*q)),
            _ => {
                let mut names = Vec::new();
                term_names(e, &mut names);
                names.retain(|n| !env.iter().any(|(b, _)| b == n));
                names.sort();
                names.dedup();
                let mut acc = Polynomial::zero();
                for values in assignments(names.len(), self.dimension) {
                    let base = env.len();
                    env.extend(names.iter().cloned().zip(values));
                    let p = self.eval_bound(e, env);
                    env.truncate(base);
                    acc.add(&p?);
                }
                Ok(acc)
            }
        }
    }

    fn eval_bound(&self, e: &Expr, env: &mut Env) -> Result<Polynomial, ComponentError> {
        match e {
            Expr::Num(q) => Ok(Polynomial::constant(*q)),
            Expr::Sum(_) => self.eval(e, env),
            Expr::Product(c, fs) => {
                let mut acc = Polynomial::constant(*c);
                for f in fs {
                    if acc.is_zero() {
                        break;
                    }
                    acc = acc.mul(&self.eval_bound(f, env)?);
                }
                Ok(acc)
            }
            Expr::Tensor(t) => self.component(t, env),
            Expr::Partial(i, x) => {
                let dir = value(i, env)?;
                let inner = self.eval_bound(x, env)?.derivative(dir)?;
                Ok(inner.scale(raise_sign(i.variance, dir)))
            }
            Expr::Var(_) | Expr::SeqVar(_) => Err(ComponentError::Pattern),
        }
    }

    fn component(&self, t: &Tensor, env: &Env) -> Result<Polynomial, ComponentError> {
        let values: Vec<u32> = t.indices.iter().map(|i| value(i, env)).collect::<Result<_, _>>()?;
        if t.head.is_metric() {
            let (a, b) = (values[0], values[1]);
            let v = if a != b {
                0
            } else if t.indices[0].variance != t.indices[1].variance || a == 0 {
                1
            } else {
                -1
            };
            return Ok(Polynomial::constant(rat(v)));
        }
        if let Some(def) = self.definitions.get(&t.head.name) {
            let mut sign = Rational::one();
            let mut env: Env = Vec::new();
            for ((p, actual), v) in def.params.iter().zip(&t.indices).zip(&values) {
                if p.variance != actual.variance {
                    sign *= metric_sign(*v);
                }
                env.push((p.name.clone(), *v));
            }
            return Ok(self.eval(&def.body, &mut env)?.scale(sign));
        }
        let mut sign = Rational::one();
        for (i, v) in t.indices.iter().zip(&values) {
            if i.variance == Variance::Upper {
                sign *= metric_sign(*v);
            }
        }
        let mut slots = values;
        match t.head.symmetry {
            Symmetry::None => {}
            Symmetry::Symmetric => slots.sort_unstable(),
            Symmetry::Antisymmetric => {
                for i in 1..slots.len() {
                    let mut j = i;
                    while j > 0 && slots[j - 1] > slots[j] {
                        slots.swap(j - 1, j);
                        sign = -sign;
                        j -= 1;
                    }
                }
                if slots.windows(2).any(|w| w[0] == w[1]) {
                    return Ok(Polynomial::zero());
                }
            }
        }
        let s = ComponentSymbol { head: t.head.name.clone(), derivs: Vec::new(), slots, constant: t.head.constant };
        Ok(Polynomial::symbol(s).scale(sign))
    }
}

fn metric_sign(v: u32) -> Rational {
    if v == 0 {
        Rational::one()
    } else {
        -Rational::one()
    }
}

fn raise_sign(variance: Variance, dir: u32) -> Rational {
    match variance {
        Variance::Lower => Rational::one(),
        Variance::Upper => metric_sign(dir),
    }
}

fn value(i: &Index, env: &Env) -> Result<u32, ComponentError> {
    if let Some(v) = i.concrete_value() {
        return Ok(v);
    }
    env.iter()
        .rev()
        .find(|(n, _)| *n == i.name)
        .map(|(_, v)| *v)
        .ok_or_else(|| ComponentError::Unbound(i.name.clone()))
}

/// Index names used at this term's level, not descending into nested sums.
fn term_names(e: &Expr, out: &mut Vec<Symbol>) {
    match e {
        Expr::Tensor(t) => {
            out.extend(t.indices.iter().filter(|i| !i.is_concrete()).map(|i| i.name.clone()))
        }
        Expr::Partial(i, x) => {
            if !i.is_concrete() {
                out.push(i.name.clone());
            }
            term_names(x, out);
        }
        Expr::Product(_, fs) => fs.iter().for_each(|f| term_names(f, out)),
        _ => {}
    }
}

/// All tuples in `0..dim` of length `n`, in lexicographic order.
fn assignments(n: usize, dim: u32) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..dim).map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    fn table(s: &str) -> ComponentTable {
        expand_components(&parse_expr(s).unwrap(), 4).unwrap()
    }

    fn sym_d(head: &str, derivs: &[u32], slots: &[u32]) -> Polynomial {
        Polynomial::symbol(ComponentSymbol { head: sym(head), derivs: derivs.to_vec(), slots: slots.to_vec(), constant: false })
    }

    #[test]
    fn trace_of_metric_is_four() {
        let t = table("eta[^mu,_mu]");
        assert_eq!(t.entries.len(), 1);
        assert_eq!(t.get(&[]).unwrap(), &Polynomial::constant(rat(4)));
    }

    #[test]
    fn field_strength_component() {
        let t = table("F[_0,_1]");
        let mut expected = sym_d("A", &[0], &[1]);
        expected.add(&sym_d("A", &[1], &[0]).scale(rat(-1)));
        assert_eq!(t.get(&[]).unwrap(), &expected);
        assert_eq!(t.get(&[]).unwrap().to_string(), "dA_{0,1} - dA_{1,0}");
    }

    #[test]
    fn raising_spatial_index_flips_sign() {
        let t = table("A[^mu]");
        assert_eq!(t.get(&[0]).unwrap(), &sym_d("A", &[], &[0]));
        assert_eq!(t.get(&[2]).unwrap(), &sym_d("A", &[], &[2]).scale(rat(-1)));
    }

    #[test]
    fn second_derivatives_commute() {
        let a = table("d[_0](d[_1](A[_2]))");
        let b = table("d[_1](d[_0](A[_2]))");
        assert_eq!(a, b);
        assert_eq!(a.get(&[]).unwrap().to_string(), "ddA_{0,1,2}");
    }

    #[test]
    fn third_derivative_is_rejected() {
        let e = parse_expr("d[_0](d[_1](d[_2](A[_3])))").unwrap();
        assert_eq!(expand_components(&e, 4), Err(ComponentError::DerivativeDepth));
    }

    #[test]
    fn product_rule_in_components() {
        let t = table("d[_0](A[_1]*A[_1])");
        assert_eq!(t.get(&[]).unwrap().to_string(), "2*A_{1}*dA_{0,1}");
    }

    #[test]
    fn dummies_inside_nested_sums_are_scoped() {
        let a = table("d[_mu](A[^mu]*B + A[^mu]*C)");
        let b = table("d[_mu](A[^mu]*B) + d[_nu](A[^nu]*C)");
        assert_eq!(a, b);
    }

    #[test]
    fn lagrangian_is_scalar_polynomial() {
        let t = table("-1/4*F[_mu,_nu]*F[^mu,^nu]");
        let p = t.get(&[]).unwrap();
        // E^2/2 - B^2/2 in potentials: 1/2 (dA_{0,1} - dA_{1,0})^2 appears with +,
        // spatial-spatial pieces with -.
        let e1 = {
            let mut x = sym_d("A", &[0], &[1]);
            x.add(&sym_d("A", &[1], &[0]).scale(rat(-1)));
            x
        };
        let mut probe = e1.mul(&e1).scale(Rational::new(1, 2));
        let b3 = {
            let mut x = sym_d("A", &[1], &[2]);
            x.add(&sym_d("A", &[2], &[1]).scale(rat(-1)));
            x
        };
        probe.add(&b3.mul(&b3).scale(Rational::new(-1, 2)));
        for (m, c) in probe.terms() {
            assert_eq!(p.terms.get(m), Some(c), "{}", p);
        }
    }
}
