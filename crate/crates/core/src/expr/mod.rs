//! Tensor expressions: indices, heads, the expression tree, and the
//! operations defined directly on it (parsing, printing, canonical form,
//! index analysis and component expansion).

mod canon;
mod components;
mod indices;
mod parse;
mod print;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, LazyLock};

use num_rational::Ratio;
use num_traits::{One, Zero};

pub use canon::{canonicalize, Canonicalizer};
pub use components::{
    expand_components, ComponentError, ComponentExpander, ComponentSymbol, ComponentTable,
    Polynomial,
};
pub use indices::{check_well_formed, classify_indices, free_indices, IndexError};
pub use parse::{parse_expr, parse_pattern, ParseError, ParseErrorKind, Parser};

/// Exact rational coefficient.
pub type Rational = Ratio<i64>;

/// Interned-ish identifier. Cloning is a reference-count bump.
pub type Symbol = Arc<str>;

pub fn sym(s: &str) -> Symbol {
    Arc::from(s)
}

pub(crate) fn rat(n: i64) -> Rational {
    Rational::from_integer(n)
}

/// Position of an index: contravariant (`^mu`) or covariant (`_mu`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub enum Variance {
    Lower,
    Upper,
}

impl Variance {
    pub fn flip(self) -> Self {
        match self {
            Variance::Lower => Variance::Upper,
            Variance::Upper => Variance::Lower,
        }
    }
}

/// Role of an index within an expression. Free and dummy are contextual
/// (they depend on the enclosing term); see [`classify_indices`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IndexKind {
    Free,
    Dummy,
    Pattern,
}

/// A Lorentz index slot. Names made only of digits are concrete component
/// values (`F[_0,_1]`) and take no part in contraction.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Index {
    pub name: Symbol,
    pub variance: Variance,
    pub is_pattern: bool,
}

impl Index {
    pub fn upper(name: &str) -> Self {
        Index { name: sym(name), variance: Variance::Upper, is_pattern: false }
    }

    pub fn lower(name: &str) -> Self {
        Index { name: sym(name), variance: Variance::Lower, is_pattern: false }
    }

    pub fn new(name: Symbol, variance: Variance) -> Self {
        Index { name, variance, is_pattern: false }
    }

    pub fn pattern(name: &str, variance: Variance) -> Self {
        Index { name: sym(name), variance, is_pattern: true }
    }

    pub fn is_concrete(&self) -> bool {
        !self.is_pattern && is_concrete_name(&self.name)
    }

    pub fn concrete_value(&self) -> Option<u32> {
        if self.is_concrete() {
            self.name.parse().ok()
        } else {
            None
        }
    }

    pub fn flipped(&self) -> Self {
        Index { variance: self.variance.flip(), ..self.clone() }
    }

    pub fn with_name(&self, name: Symbol) -> Self {
        Index { name, ..self.clone() }
    }
}

pub(crate) fn is_concrete_name(name: &str) -> bool {
    !name.is_empty() && name.bytes().all(|b| b.is_ascii_digit())
}

/// Permutation symmetry of a head over all of its slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symmetry {
    None,
    Symmetric,
    Antisymmetric,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TensorHead {
    pub name: Symbol,
    pub arity: usize,
    pub symmetry: Symmetry,
    /// Constant heads have vanishing derivatives.
    pub constant: bool,
}

impl TensorHead {
    pub fn new(name: &str, arity: usize, symmetry: Symmetry) -> Arc<Self> {
        Arc::new(TensorHead { name: sym(name), arity, symmetry, constant: false })
    }

    pub fn new_constant(name: &str, arity: usize, symmetry: Symmetry) -> Arc<Self> {
        Arc::new(TensorHead { name: sym(name), arity, symmetry, constant: true })
    }

    pub fn is_constant(&self) -> bool {
        self.constant || self.is_metric()
    }

    /// `eta` and `delta` are the same object with different index
    /// placement; both are constant under differentiation.
    pub fn is_metric(&self) -> bool {
        &*self.name == "eta" || &*self.name == "delta"
    }
}

pub(crate) static ETA: LazyLock<Arc<TensorHead>> =
    LazyLock::new(|| TensorHead::new("eta", 2, Symmetry::Symmetric));
pub(crate) static DELTA: LazyLock<Arc<TensorHead>> =
    LazyLock::new(|| TensorHead::new("delta", 2, Symmetry::Symmetric));
pub(crate) static FIELD_STRENGTH: LazyLock<Arc<TensorHead>> =
    LazyLock::new(|| TensorHead::new("F", 2, Symmetry::Antisymmetric));
pub(crate) static GAUGE_FIELD: LazyLock<Arc<TensorHead>> =
    LazyLock::new(|| TensorHead::new("A", 1, Symmetry::None));

/// Known tensor heads. Parsing consults the registry for arity and slot
/// symmetry; heads not yet known are declared on first use with no
/// symmetry.
#[derive(Clone, Debug)]
pub struct Registry {
    heads: BTreeMap<Symbol, Arc<TensorHead>>,
}

impl Default for Registry {
    fn default() -> Self {
        let mut heads = BTreeMap::new();
        for h in [&*ETA, &*DELTA, &*FIELD_STRENGTH, &*GAUGE_FIELD] {
            heads.insert(h.name.clone(), h.clone());
        }
        Registry { heads }
    }
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a user head. Re-declaring an existing head with a
    /// different shape is rejected.
    pub fn declare(
        &mut self,
        name: &str,
        arity: usize,
        symmetry: Symmetry,
    ) -> Result<Arc<TensorHead>, String> {
        self.insert(TensorHead::new(name, arity, symmetry))
    }

    /// Registers a head whose derivatives vanish, such as a mass.
    pub fn declare_constant(
        &mut self,
        name: &str,
        arity: usize,
        symmetry: Symmetry,
    ) -> Result<Arc<TensorHead>, String> {
        self.insert(TensorHead::new_constant(name, arity, symmetry))
    }

    fn insert(&mut self, head: Arc<TensorHead>) -> Result<Arc<TensorHead>, String> {
        if &*head.name == "d" && head.arity > 0 {
            return Err("`d` is reserved for partial derivatives".into());
        }
        match self.heads.get(&head.name) {
            Some(h) if *h == head => Ok(h.clone()),
            Some(h) => Err(format!(
                "head `{}` already declared with arity {}, {:?} symmetry{}",
                h.name,
                h.arity,
                h.symmetry,
                if h.constant { " as a constant" } else { "" }
            )),
            None => {
                self.heads.insert(head.name.clone(), head.clone());
                Ok(head)
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&Arc<TensorHead>> {
        self.heads.get(name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tensor {
    pub head: Arc<TensorHead>,
    pub indices: Vec<Index>,
}

/// Tensor expression tree.
///
/// The derived ordering (variant tag, then head, then indices, then
/// children) is the total order used by the canonicalizer.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Num(Rational),
    Tensor(Tensor),
    Partial(Index, Box<Expr>),
    Product(Rational, Vec<Expr>),
    Sum(Vec<Expr>),
    /// Pattern variable `x?`, matching one expression.
    Var(Symbol),
    /// Sequence variable `xs??`, matching the remaining factors of a
    /// product (or the remaining terms of a sum).
    SeqVar(Symbol),
}

impl Expr {
    pub fn zero() -> Self {
        Expr::Sum(Vec::new())
    }

    pub fn num(n: i64) -> Self {
        Expr::Num(rat(n))
    }

    pub fn tensor(head: Arc<TensorHead>, indices: Vec<Index>) -> Self {
        Expr::Tensor(Tensor { head, indices })
    }

    pub fn partial(index: Index, operand: Expr) -> Self {
        Expr::Partial(index, Box::new(operand))
    }

    pub fn eta(a: Index, b: Index) -> Self {
        Expr::tensor(ETA.clone(), vec![a, b])
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Expr::Sum(ts) => ts.is_empty(),
            Expr::Num(q) => q.is_zero(),
            _ => false,
        }
    }

    /// Builds `coeff * factors` without canonicalizing, collapsing the
    /// trivial cases.
    pub fn product(coeff: Rational, mut factors: Vec<Expr>) -> Self {
        if coeff.is_zero() {
            return Expr::zero();
        }
        if factors.is_empty() {
            return Expr::Num(coeff);
        }
        if coeff.is_one() && factors.len() == 1 {
            return factors.pop().unwrap();
        }
        Expr::Product(coeff, factors)
    }

    pub fn sum(mut terms: Vec<Expr>) -> Self {
        if terms.len() == 1 {
            return terms.pop().unwrap();
        }
        Expr::Sum(terms)
    }

    pub fn scale(self, c: Rational) -> Self {
        match self {
            Expr::Num(q) => Expr::Num(q * c),
            Expr::Product(q, fs) => Expr::product(q * c, fs),
            other => Expr::product(c, vec![other]),
        }
    }

    pub fn neg(self) -> Self {
        self.scale(rat(-1))
    }

    pub fn children(&self) -> &[Expr] {
        match self {
            Expr::Sum(ts) => ts,
            Expr::Product(_, fs) => fs,
            Expr::Partial(_, x) => std::slice::from_ref(&**x),
            _ => &[],
        }
    }

    pub fn is_pattern(&self) -> bool {
        match self {
            Expr::Var(_) | Expr::SeqVar(_) => true,
            Expr::Tensor(t) => t.indices.iter().any(|i| i.is_pattern),
            Expr::Partial(i, x) => i.is_pattern || x.is_pattern(),
            _ => self.children().iter().any(Expr::is_pattern),
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(Expr::node_count).sum::<usize>()
    }

    /// Calls `f` on every index in the tree, in traversal order.
    pub fn for_each_index(&self, f: &mut impl FnMut(&Index)) {
        match self {
            Expr::Tensor(t) => t.indices.iter().for_each(&mut *f),
            Expr::Partial(i, x) => {
                f(i);
                x.for_each_index(f);
            }
            _ => self.children().iter().for_each(|c| c.for_each_index(f)),
        }
    }

    /// Rebuilds the tree with every index passed through `f`.
    pub fn map_indices(&self, f: &mut impl FnMut(&Index) -> Index) -> Expr {
        match self {
            Expr::Tensor(t) => Expr::Tensor(Tensor {
                head: t.head.clone(),
                indices: t.indices.iter().map(&mut *f).collect(),
            }),
            Expr::Partial(i, x) => {
                let i = f(i);
                Expr::Partial(i, Box::new(x.map_indices(f)))
            }
            Expr::Product(c, fs) => Expr::Product(*c, fs.iter().map(|e| e.map_indices(f)).collect()),
            Expr::Sum(ts) => Expr::Sum(ts.iter().map(|e| e.map_indices(f)).collect()),
            other => other.clone(),
        }
    }

    /// Every index name used anywhere in the tree.
    pub fn index_names(&self) -> std::collections::BTreeSet<Symbol> {
        let mut out = std::collections::BTreeSet::new();
        self.for_each_index(&mut |i| {
            out.insert(i.name.clone());
        });
        out
    }
}

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = match self.variance {
            Variance::Upper => '^',
            Variance::Lower => '_',
        };
        write!(f, "{}{}{}", mark, self.name, if self.is_pattern { "?" } else { "" })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_expr(f, self)
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expr(s)
    }
}

/// Picks `count` names of the form `{prefix}{n}` not present in `taken`.
pub(crate) fn fresh_names(
    prefix: &str,
    count: usize,
    taken: &std::collections::BTreeSet<Symbol>,
) -> Vec<Symbol> {
    let mut out = Vec::with_capacity(count);
    let mut n = 0usize;
    while out.len() < count {
        let candidate = format!("{prefix}{n}");
        if !taken.contains(candidate.as_str()) {
            out.push(sym(&candidate));
        }
        n += 1;
    }
    out
}
