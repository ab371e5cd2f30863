//! Classical field theories: Lagrangians, the canonical energy-momentum
//! tensor, its conservation and its symmetrization.
//!
//! Every on-shell step goes through [`search`] with explicit rules. The
//! equations of motion are never substituted silently.
//!
//! A theory file has one directive per line, `#` starting a comment:
//!
//! ```text
//! field A[1]
//! constant m
//! define F[_a,_b] := d[_a](A[_b]) - d[_b](A[_a])
//! lagrangian -1/4 * F[_mu,_nu]*F[^mu,^nu]
//! eom-rule eom: d[_a?](F[^a?,^b?]) -> 0
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_traits::One;
use thiserror::Error;

use crate::expr::{
    fresh_names, free_indices, sym, Canonicalizer, Expr, Index, IndexError, ParseError, Parser, Rational,
    Registry, Symbol, Symmetry, Tensor, TensorHead,
};
use crate::rules::{load_rules, parse_rule_line, Rule, RuleError, RuleSet};
use crate::search::{search, BudgetLimit, DerivationState, Goal, SearchBudget, SearchOutcome, Statistics};

/// Upper free index names carried by every energy-momentum tensor.
pub const MU: &str = "mu";
pub const NU: &str = "nu";

/// `head[params] := body`, for example the field strength in terms of the
/// potential.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Definition {
    pub head: Arc<TensorHead>,
    pub params: Vec<Index>,
    pub body: Expr,
}

impl Definition {
    /// The directed rule `head[params?] -> body`.
    pub fn rule(&self) -> Rule {
        let names: BTreeSet<Symbol> = self.params.iter().map(|i| i.name.clone()).collect();
        let as_pattern = |e: &Expr| {
            e.map_indices(&mut |i| Index { is_pattern: names.contains(&i.name), ..i.clone() })
        };
        Rule {
            name: format!("expand{}", self.head.name),
            lhs: as_pattern(&Expr::tensor(self.head.clone(), self.params.clone())),
            rhs: as_pattern(&self.body),
            bidirectional: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TheoryError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Parse { line: usize, source: ParseError },
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("the Lagrangian must be a scalar: {0}")]
    NotScalar(String),
    #[error("field `{0}` does not appear in the Lagrangian")]
    UnusedField(String),
    #[error("no Lagrangian given")]
    MissingLagrangian,
}

/// A classical field theory.
#[derive(Clone, Debug)]
pub struct FieldTheory {
    pub name: String,
    /// Dynamical fields.
    pub fields: Vec<Arc<TensorHead>>,
    pub lagrangian: Expr,
    pub definitions: Vec<Definition>,
    /// Equations of motion as rewrite rules.
    pub eom_rules: RuleSet,
    /// Heads declared by the theory, for parsing further input.
    pub registry: Registry,
}

impl FieldTheory {
    /// Builds a theory, checking that the Lagrangian is a scalar and that
    /// every field occurs in it, directly or through a definition.
    pub fn new(
        name: &str,
        fields: Vec<Arc<TensorHead>>,
        lagrangian: Expr,
        definitions: Vec<Definition>,
        eom_rules: RuleSet,
        registry: Registry,
    ) -> Result<Self, TheoryError> {
        let free = free_indices(&lagrangian).map_err(|e| TheoryError::NotScalar(e.to_string()))?;
        if !free.is_empty() {
            return Err(TheoryError::NotScalar(lagrangian.to_string()));
        }
        let theory = FieldTheory { name: name.to_string(), fields, lagrangian, definitions, eom_rules, registry };
        let expanded = theory.expanded_lagrangian();
        for f in &theory.fields {
            if !mentions(&expanded, &f.name) {
                return Err(TheoryError::UnusedField(f.name.to_string()));
            }
        }
        Ok(theory)
    }

    /// Parses a theory file.
    pub fn parse(name: &str, text: &str) -> Result<Self, TheoryError> {
        let mut registry = Registry::default();
        let mut fields = Vec::new();
        let mut definitions = Vec::new();
        let mut lagrangian = None;
        let mut eom_rules = RuleSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |message: String| TheoryError::Syntax { line: line_no, message };
            let parse_err = |source| TheoryError::Parse { line: line_no, source };
            let (word, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let rest = rest.trim();
            match word {
                "field" => fields.push(parse_head(rest, &mut registry, false).map_err(syntax)?),
                "constant" => {
                    parse_head(rest, &mut registry, true).map_err(syntax)?;
                }
                "define" => {
                    let (lhs, rhs) = rest.split_once(":=").ok_or_else(|| syntax("expected `:=`".into()))?;
                    let head = Parser::new(&mut registry).ground(lhs.trim()).map_err(parse_err)?;
                    let body = Parser::new(&mut registry).ground(rhs.trim()).map_err(parse_err)?;
                    definitions.push(make_definition(head, body).map_err(syntax)?);
                }
                "lagrangian" => {
                    lagrangian = Some(Parser::new(&mut registry).ground(rest).map_err(parse_err)?);
                }
                "eom-rule" => {
                    for rule in parse_rule_line(rest, line_no, &mut registry)? {
                        eom_rules.push(rule)?;
                    }
                }
                other => return Err(syntax(format!("unknown directive `{other}`"))),
            }
        }
        let lagrangian = lagrangian.ok_or(TheoryError::MissingLagrangian)?;
        FieldTheory::new(name, fields, lagrangian, definitions, eom_rules, registry)
    }

    /// The seed rules followed by the theory's equations of motion.
    pub fn rules(&self) -> Result<RuleSet, RuleError> {
        let mut rs = RuleSet::seed();
        rs.merge(&self.eom_rules)?;
        Ok(rs)
    }

    /// The Lagrangian with defined heads expanded and derivatives of
    /// products distributed.
    pub fn expanded_lagrangian(&self) -> Expr {
        self.expand(&self.lagrangian)
    }

    fn expand(&self, e: &Expr) -> Expr {
        let mut rs = load_rules("leibniz: d[_a?](x? * ys??) -> d[_a?](x?)*ys?? + x?*d[_a?](ys??)")
            .expect("product rule");
        for d in &self.definitions {
            rs.push(d.rule()).expect("definition rules are valid");
        }
        rewrite_to_fixpoint(e, &rs)
    }

    fn field(&self, name: &str) -> Option<&Arc<TensorHead>> {
        self.fields.iter().find(|f| &*f.name == name)
    }

    /// Definitions of the form `G[_a,_b] := ∂_a φ_b - ∂_b φ_a`, as
    /// (G, φ) pairs.
    fn field_strengths(&self) -> Vec<(Arc<TensorHead>, Arc<TensorHead>)> {
        let canon = Canonicalizer::default();
        let mut out = Vec::new();
        for d in &self.definitions {
            let [a, b] = d.params.as_slice() else { continue };
            for f in self.fields.iter().filter(|f| f.arity == 1) {
                let curl = Expr::sum(vec![
                    Expr::partial(a.clone(), Expr::tensor(f.clone(), vec![b.clone()])),
                    Expr::partial(b.clone(), Expr::tensor(f.clone(), vec![a.clone()])).neg(),
                ]);
                if canon.canonicalize(&curl) == canon.canonicalize(&d.body) {
                    out.push((d.head.clone(), f.clone()));
                }
            }
        }
        out
    }
}

fn parse_head(text: &str, registry: &mut Registry, constant: bool) -> Result<Arc<TensorHead>, String> {
    let (name, arity) = match text.split_once('[') {
        Some((name, rest)) => {
            let digits = rest.strip_suffix(']').ok_or("expected `name[arity]`")?;
            (name.trim(), digits.trim().parse::<usize>().map_err(|_| format!("bad arity `{digits}`"))?)
        }
        None => (text.trim(), 0),
    };
    if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
        return Err(format!("bad head name `{name}`"));
    }
    let symmetry = registry.get(name).map_or(Symmetry::None, |h| h.symmetry);
    if constant {
        registry.declare_constant(name, arity, symmetry)
    } else {
        registry.declare(name, arity, symmetry)
    }
}

fn make_definition(head: Expr, body: Expr) -> Result<Definition, String> {
    let Expr::Tensor(Tensor { head, indices }) = head else {
        return Err("left side of a definition must be a single tensor".into());
    };
    let params: BTreeSet<Index> = indices.iter().cloned().collect();
    if params.len() != indices.len() || indices.iter().any(Index::is_concrete) {
        return Err("definition parameters must be distinct index names".into());
    }
    let free = free_indices(&body).map_err(|e| e.to_string())?;
    if free != params {
        return Err(format!("definition body of `{}` has different free indices", head.name));
    }
    Ok(Definition { head, params: indices, body })
}

fn mentions(e: &Expr, head: &str) -> bool {
    match e {
        Expr::Tensor(t) => &*t.head.name == head,
        other => other.children().iter().any(|c| mentions(c, head)),
    }
}

/// Applies the first rewrite that changes `e` until none does.
fn rewrite_to_fixpoint(e: &Expr, rs: &RuleSet) -> Expr {
    let mut cur = rs.canonicalizer().canonicalize(e);
    loop {
        let next = crate::rules::successors(&cur, rs).into_iter().map(|(x, _)| x).find(|x| *x != cur);
        match next {
            Some(x) => cur = x,
            None => return cur,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum PhysicsError {
    #[error("`{0}` is not a field of the theory")]
    UnknownField(String),
    #[error("fields with {0} indices are not supported")]
    UnsupportedArity(usize),
    #[error("the Lagrangian must be a scalar")]
    NotScalar,
    #[error("the tensor is already symmetrized")]
    AlreadySymmetrized,
    #[error("the theory has no vector field with a field strength, so no improvement term is known")]
    NoImprovement,
    #[error("the symmetrization search did not reach a symmetric form ({0})")]
    SymmetrizationFailed(Statistics),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

/// `∂L/∂(∂_μ φ_ν)` with free indices `^mu` (and `^nu` for a vector
/// field), treating each `∂_α φ_β` as an independent variable. Defined
/// heads in `L` are expanded first, and the result is folded back into
/// field strengths where possible.
pub fn variational_derivative(l: &Expr, field: &TensorHead, theory: &FieldTheory) -> Result<Expr, PhysicsError> {
    let names = [Index::upper(MU), Index::upper(NU)];
    variational_derivative_named(l, field, theory, &names)
}

fn variational_derivative_named(
    l: &Expr,
    field: &TensorHead,
    theory: &FieldTheory,
    names: &[Index],
) -> Result<Expr, PhysicsError> {
    let head = theory.field(&field.name).ok_or_else(|| PhysicsError::UnknownField(field.name.to_string()))?;
    if head.arity > 1 {
        return Err(PhysicsError::UnsupportedArity(head.arity));
    }
    if !free_indices(l).map_err(|_| PhysicsError::NotScalar)?.is_empty() {
        return Err(PhysicsError::NotScalar);
    }
    let canon = Canonicalizer::default();
    let expanded = theory.expand(l);
    let mut out = Vec::new();
    for term in terms(&expanded) {
        let (c, factors) = split_term(term);
        for (k, f) in factors.iter().enumerate() {
            let Expr::Partial(alpha, inner) = f else { continue };
            let Expr::Tensor(t) = inner.as_ref() else { continue };
            if t.head != *head {
                continue;
            }
            let mut rest: Vec<Expr> = factors.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, x)| x.clone()).collect();
            rest.push(Expr::eta(names[0].clone(), alpha.clone()));
            if let Some(beta) = t.indices.first() {
                rest.push(Expr::eta(names[1].clone(), beta.clone()));
            }
            out.push(Expr::product(c, rest));
        }
    }
    let mut result = canon.canonicalize(&Expr::sum(out));
    for (strength, potential) in theory.field_strengths() {
        result = fold_field_strength(&result, &strength, &potential, &canon);
    }
    Ok(result)
}

fn terms(e: &Expr) -> Vec<&Expr> {
    match e {
        Expr::Sum(ts) => ts.iter().collect(),
        other => vec![other],
    }
}

fn split_term(e: &Expr) -> (Rational, Vec<Expr>) {
    match e {
        Expr::Product(c, fs) => (*c, fs.clone()),
        Expr::Num(q) => (*q, Vec::new()),
        other => (Rational::one(), vec![other.clone()]),
    }
}

/// Rewrites pairs of terms `X·∂_a φ_b` and `-X·∂_b φ_a` as `X·G_ab`,
/// where `G_ab = ∂_a φ_b - ∂_b φ_a`, until no pair remains. The result is
/// equal to the input.
pub fn fold_field_strength(e: &Expr, strength: &Arc<TensorHead>, field: &Arc<TensorHead>, canon: &Canonicalizer) -> Expr {
    let mut cur = canon.canonicalize(e);
    'fold: loop {
        let table: BTreeMap<Vec<Expr>, Rational> =
            terms(&cur).into_iter().map(|t| {
                let (c, fs) = split_term(t);
                (fs, c)
            }).collect();
        for (factors, c) in &table {
            for (k, f) in factors.iter().enumerate() {
                let Expr::Partial(a, inner) = f else { continue };
                let Expr::Tensor(t) = inner.as_ref() else { continue };
                if t.head != *field || t.indices.len() != 1 {
                    continue;
                }
                let b = &t.indices[0];
                let with = |x: Expr| {
                    let mut fs = factors.clone();
                    fs[k] = x;
                    Expr::product(*c, fs)
                };
                let y = canon.canonicalize(&with(Expr::partial(b.clone(), Expr::tensor(field.clone(), vec![a.clone()]))));
                if y.is_zero() {
                    continue;
                }
                let (cy, my) = split_term(&y);
                if my == *factors || table.get(&my) != Some(&-cy) {
                    continue;
                }
                let x = Expr::product(*c, factors.clone());
                let z = with(Expr::tensor(strength.clone(), vec![a.clone(), b.clone()]));
                cur = canon.canonicalize(&Expr::sum(vec![cur.clone(), x.neg(), y, z]));
                continue 'fold;
            }
        }
        return cur;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TemVariant {
    Canonical,
    Symmetrized,
}

impl fmt::Display for TemVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TemVariant::Canonical => "canonical",
            TemVariant::Symmetrized => "symmetrized",
        })
    }
}

/// An energy-momentum tensor with free indices `^mu`, `^nu`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TEMResult {
    pub tensor: Expr,
    pub variant: TemVariant,
    /// The derivation that produced the tensor, when a search was involved.
    pub derivation: Option<DerivationState>,
}

impl TEMResult {
    /// Wraps a tensor whose free indices are exactly `^mu`, `^nu`.
    pub fn new(tensor: Expr, variant: TemVariant) -> Result<Self, IndexError> {
        let free = free_indices(&tensor)?;
        let expected = BTreeSet::from([Index::upper(MU), Index::upper(NU)]);
        if free != expected {
            let found = free.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
            return Err(IndexError::Inconsistent { left: "^mu,^nu".into(), right: found });
        }
        Ok(TEMResult { tensor, variant, derivation: None })
    }
}

/// `T^{μν} = Σ ∂L/∂(∂_μ φ_a) ∂^ν φ^a - η^{μν} L`, canonicalized.
pub fn canonical_tem(theory: &FieldTheory) -> Result<TEMResult, PhysicsError> {
    let canon = Canonicalizer::default();
    let l = &canon.canonicalize(&theory.lagrangian);
    let mut taken = l.index_names();
    taken.extend([sym(MU), sym(NU)]);
    let lam = Index::upper(&fresh_names("s", 1, &taken)[0]);
    let mut parts = Vec::new();
    for field in &theory.fields {
        let (momentum, flow) = match field.arity {
            0 => (
                variational_derivative_named(l, field, theory, &[Index::upper(MU)])?,
                Expr::partial(Index::upper(NU), Expr::tensor(field.clone(), vec![])),
            ),
            1 => (
                variational_derivative_named(l, field, theory, &[Index::upper(MU), lam.clone()])?,
                Expr::partial(Index::upper(NU), Expr::tensor(field.clone(), vec![lam.flipped()])),
            ),
            n => return Err(PhysicsError::UnsupportedArity(n)),
        };
        parts.push(Expr::product(Rational::one(), vec![momentum, flow]));
    }
    parts.push(Expr::product(-Rational::one(), vec![Expr::eta(Index::upper(MU), Index::upper(NU)), l.clone()]));
    let tensor = canon.canonicalize(&Expr::sum(parts));
    Ok(TEMResult::new(tensor, TemVariant::Canonical)?)
}

/// Result of a conservation check. `NotShown` reports that the search
/// stopped without reaching zero; it is not a proof of non-conservation.
#[derive(Clone, Debug, PartialEq)]
pub enum Conservation {
    Conserved(DerivationState, Statistics),
    NotShown(Statistics, Option<BudgetLimit>),
}

/// The divergence `∂_μ T^{μν}` that [`check_conservation`] reduces.
pub fn divergence(t: &TEMResult) -> Expr {
    Canonicalizer::default().canonicalize(&Expr::partial(Index::lower(MU), t.tensor.clone()))
}

/// Searches for a derivation of `∂_μ T^{μν} = 0` with `rules`.
pub fn check_conservation(t: &TEMResult, rules: &RuleSet, budget: &SearchBudget) -> Conservation {
    match search(&divergence(t), rules, &Goal::IsZero, budget) {
        SearchOutcome::Found(d, s) => Conservation::Conserved(d, s),
        SearchOutcome::Exhausted(s) => Conservation::NotShown(s, None),
        SearchOutcome::BudgetExceeded(s, limit) => Conservation::NotShown(s, Some(limit)),
    }
}

/// The improvement term `∂_λ(G^{μλ} φ^ν)` for a vector field `φ` with
/// field strength `G`.
pub fn improvement_term(theory: &FieldTheory, avoid: &BTreeSet<Symbol>) -> Result<Expr, PhysicsError> {
    let (strength, field) = theory.field_strengths().into_iter().next().ok_or(PhysicsError::NoImprovement)?;
    let mut taken = avoid.clone();
    taken.extend([sym(MU), sym(NU)]);
    let lam = fresh_names("s", 1, &taken).remove(0);
    Ok(Expr::partial(
        Index::lower(&lam),
        Expr::product(
            Rational::one(),
            vec![
                Expr::tensor(strength, vec![Index::upper(MU), Index::upper(&lam)]),
                Expr::tensor(field, vec![Index::upper(NU)]),
            ],
        ),
    ))
}

/// Adds the improvement term to a canonical tensor and searches, with the
/// theory's rules and the default budget, for a form symmetric in μ and ν.
pub fn symmetrize_tem(t: &TEMResult, theory: &FieldTheory) -> Result<TEMResult, PhysicsError> {
    symmetrize_tem_with(t, theory, &theory.rules()?, &SearchBudget::default())
}

pub fn symmetrize_tem_with(
    t: &TEMResult,
    theory: &FieldTheory,
    rules: &RuleSet,
    budget: &SearchBudget,
) -> Result<TEMResult, PhysicsError> {
    if t.variant == TemVariant::Symmetrized {
        return Err(PhysicsError::AlreadySymmetrized);
    }
    let canon = rules.canonicalizer();
    let start = canon.canonicalize(&Expr::sum(vec![t.tensor.clone(), improvement_term(theory, &t.tensor.index_names())?]));
    let goal = Goal::SymmetricIn(Index::upper(MU), Index::upper(NU));
    let d = match search(&start, rules, &goal, budget) {
        SearchOutcome::Found(d, _) => d,
        other => return Err(PhysicsError::SymmetrizationFailed(other.statistics().clone())),
    };
    let mut tensor = d.expr.clone();
    for (strength, potential) in theory.field_strengths() {
        tensor = fold_field_strength(&tensor, &strength, &potential, &canon);
    }
    let mut out = TEMResult::new(tensor, TemVariant::Symmetrized)?;
    out.derivation = Some(d);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{canonicalize, parse_expr};

    fn em() -> FieldTheory {
        FieldTheory::parse("free-em", include_str!("../data/free-em.theory")).unwrap()
    }

    #[test]
    fn parses_both_bundled_theories() {
        let t = em();
        assert_eq!(t.fields.len(), 1);
        assert_eq!(t.definitions.len(), 1);
        assert_eq!(t.eom_rules.len(), 1);
        assert_eq!(t.rules().unwrap().len(), 4);
        let s = FieldTheory::parse("scalar", include_str!("../data/free-scalar.theory")).unwrap();
        assert_eq!(s.fields[0].arity, 0);
    }

    #[test]
    fn theory_errors() {
        assert!(matches!(FieldTheory::parse("x", "field A[1]"), Err(TheoryError::MissingLagrangian)));
        assert!(matches!(
            FieldTheory::parse("x", "field A[1]\nlagrangian A[_mu]"),
            Err(TheoryError::NotScalar(_))
        ));
        assert!(matches!(
            FieldTheory::parse("x", "field B[1]\nlagrangian A[_mu]*A[^mu]"),
            Err(TheoryError::UnusedField(_))
        ));
        assert!(matches!(FieldTheory::parse("x", "fields A[1]"), Err(TheoryError::Syntax { line: 1, .. })));
    }

    #[test]
    fn maxwell_momentum_is_minus_field_strength() {
        let t = em();
        let pi = variational_derivative(&t.lagrangian, &t.fields[0], &t).unwrap();
        assert_eq!(pi, canonicalize(&parse_expr("-F[^mu,^nu]").unwrap()));
    }

    #[test]
    fn no_derivatives_means_zero_momentum() {
        let t = FieldTheory::parse("x", "field A[1]\nlagrangian A[_mu]*A[^mu]").unwrap();
        assert!(variational_derivative(&t.lagrangian, &t.fields[0], &t).unwrap().is_zero());
    }

    #[test]
    fn fold_recovers_field_strength_products() {
        let canon = Canonicalizer::default();
        let f = crate::expr::FIELD_STRENGTH.clone();
        let a = crate::expr::GAUGE_FIELD.clone();
        let e = parse_expr("F[^mu,^lam]*F[_lam,^nu]").unwrap();
        let expanded = em().expand(&e);
        assert_ne!(expanded, canon.canonicalize(&e));
        assert_eq!(fold_field_strength(&expanded, &f, &a, &canon), canon.canonicalize(&e));
    }

    #[test]
    fn symmetrizing_twice_is_an_error() {
        let t = TEMResult::new(parse_expr("eta[^mu,^nu]").unwrap(), TemVariant::Symmetrized).unwrap();
        assert_eq!(symmetrize_tem(&t, &em()), Err(PhysicsError::AlreadySymmetrized));
    }

    #[test]
    fn scalar_theory_has_no_improvement_recipe() {
        let s = FieldTheory::parse("scalar", include_str!("../data/free-scalar.theory")).unwrap();
        let t = canonical_tem(&s).unwrap();
        assert_eq!(symmetrize_tem(&t, &s), Err(PhysicsError::NoImprovement));
    }

    #[test]
    fn tem_requires_mu_nu() {
        assert!(TEMResult::new(parse_expr("A[^mu]").unwrap(), TemVariant::Canonical).is_err());
    }
}
