//! Rewrite rules, rule files, and one-step successor generation.
//!
//! A rule file holds one rule per line, `name: LHS -> RHS` or
//! `name: LHS <-> RHS`, with `#` starting a comment. A bidirectional rule
//! becomes two directed rules named `name:fwd` and `name:rev`.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use thiserror::Error;

use crate::expr::{free_indices, Canonicalizer, Expr, IndexError, ParseError, Parser, Registry, Symbol};
use crate::pattern::{
    instantiate_raw, match_signed, positions, replace_at, subexpr_at, Binding, InstantiateError,
    Position,
};

const SEED: &str = include_str!("../data/seed.rules");

/// A directed rewrite `lhs -> rhs`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub name: String,
    pub lhs: Expr,
    pub rhs: Expr,
    /// Set when the rule is one half of a `<->` declaration.
    pub bidirectional: bool,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} -> {}", self.name, self.lhs, self.rhs)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Parse { line: usize, source: ParseError },
    #[error("rule `{rule}`: {reason}")]
    Invalid { rule: String, reason: String },
    #[error("rule `{rule}`: {source}")]
    IllFormed { rule: String, source: IndexError },
    #[error("duplicate rule name `{0}`")]
    Duplicate(String),
    #[error("no rule named `{0}`")]
    UnknownRule(String),
    #[error("position {0} does not exist")]
    StalePosition(Position),
    #[error("rule `{rule}` does not match at {position} with the given binding")]
    NotAMatch { rule: String, position: Position },
    #[error(transparent)]
    Instantiate(#[from] InstantiateError),
}

/// An ordered collection of directed rules. Order fixes successor order.
#[derive(Clone, Debug)]
pub struct RuleSet {
    rules: Vec<Rule>,
    /// Spacetime dimension used when canonicalizing rewritten expressions.
    pub dimension: u32,
}

impl Default for RuleSet {
    fn default() -> Self {
        RuleSet { rules: Vec::new(), dimension: 4 }
    }
}

impl RuleSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// The built-in rules: `expandF` (both directions), `eom` and `leibniz`.
    pub fn seed() -> Self {
        load_rules(SEED).expect("built-in rule file is valid")
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn get(&self, name: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.name == name)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Validates and appends a rule.
    pub fn push(&mut self, rule: Rule) -> Result<(), RuleError> {
        if self.get(&rule.name).is_some() {
            return Err(RuleError::Duplicate(rule.name));
        }
        validate(&rule)?;
        self.rules.push(rule);
        Ok(())
    }

    /// Appends every rule of `other`. A rule whose name is already present
    /// is skipped when identical and rejected otherwise.
    pub fn merge(&mut self, other: &RuleSet) -> Result<(), RuleError> {
        for r in &other.rules {
            match self.get(&r.name) {
                Some(existing) if existing.lhs == r.lhs && existing.rhs == r.rhs => {}
                Some(_) => return Err(RuleError::Duplicate(r.name.clone())),
                None => self.rules.push(r.clone()),
            }
        }
        Ok(())
    }

    pub fn canonicalizer(&self) -> Canonicalizer {
        Canonicalizer::new(self.dimension)
    }
}

/// Parses a rule file with the built-in head registry.
pub fn load_rules(text: &str) -> Result<RuleSet, RuleError> {
    load_rules_with(text, &mut Registry::default())
}

/// Parses a rule file, declaring unknown heads in `registry`.
pub fn load_rules_with(text: &str, registry: &mut Registry) -> Result<RuleSet, RuleError> {
    let mut set = RuleSet::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        for rule in parse_rule_line(line, n + 1, registry)? {
            set.push(rule)?;
        }
    }
    Ok(set)
}

/// Parses a single `name: LHS -> RHS` or `name: LHS <-> RHS` declaration.
pub fn parse_rule_line(line: &str, line_no: usize, registry: &mut Registry) -> Result<Vec<Rule>, RuleError> {
    let syntax = |message: &str| RuleError::Syntax { line: line_no, message: message.into() };
    let (name, body) = line.split_once(':').ok_or_else(|| syntax("expected `name: LHS -> RHS`"))?;
    let name = name.trim();
    if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-') {
        return Err(syntax("rule name must be a non-empty identifier"));
    }
    let (lhs, rhs, both) = match body.split_once("<->") {
        Some((l, r)) => (l, r, true),
        None => {
            let (l, r) = body.split_once("->").ok_or_else(|| syntax("missing `->` or `<->`"))?;
            (l, r, false)
        }
    };
    let mut parse = |s: &str| {
        Parser::new(registry).pattern(s.trim()).map_err(|source| RuleError::Parse { line: line_no, source })
    };
    let (lhs, rhs) = (parse(lhs)?, parse(rhs)?);
    Ok(if both {
        vec![
            Rule { name: format!("{name}:fwd"), lhs: lhs.clone(), rhs: rhs.clone(), bidirectional: true },
            Rule { name: format!("{name}:rev"), lhs: rhs, rhs: lhs, bidirectional: true },
        ]
    } else {
        vec![Rule { name: name.to_string(), lhs, rhs, bidirectional: false }]
    })
}

fn variables(e: &Expr, exprs: &mut BTreeSet<Symbol>, indices: &mut BTreeSet<Symbol>) {
    match e {
        Expr::Var(v) | Expr::SeqVar(v) => {
            exprs.insert(v.clone());
        }
        other => {
            if let Expr::Tensor(t) = other {
                indices.extend(t.indices.iter().filter(|i| i.is_pattern).map(|i| i.name.clone()));
            }
            if let Expr::Partial(i, _) = other {
                if i.is_pattern {
                    indices.insert(i.name.clone());
                }
            }
            for c in other.children() {
                variables(c, exprs, indices);
            }
        }
    }
}

fn validate(rule: &Rule) -> Result<(), RuleError> {
    let invalid = |reason: String| RuleError::Invalid { rule: rule.name.clone(), reason };
    let ill = |source| RuleError::IllFormed { rule: rule.name.clone(), source };
    match &rule.lhs {
        Expr::Var(_) | Expr::SeqVar(_) => return Err(invalid("left side is a bare variable".into())),
        Expr::Num(_) => return Err(invalid("left side is a number".into())),
        e if e.is_zero() => return Err(invalid("left side is zero".into())),
        _ => {}
    }
    let (mut lv, mut li) = Default::default();
    variables(&rule.lhs, &mut lv, &mut li);
    let (mut rv, mut ri) = Default::default();
    variables(&rule.rhs, &mut rv, &mut ri);
    if let Some(v) = rv.difference(&lv).next() {
        return Err(invalid(format!("`{v}?` on the right side is not bound by the left side")));
    }
    if let Some(v) = ri.difference(&li).next() {
        return Err(invalid(format!("index `{v}?` on the right side is not bound by the left side")));
    }
    let lf = free_indices(&rule.lhs).map_err(ill)?;
    let rf = free_indices(&rule.rhs).map_err(ill)?;
    if !rule.rhs.is_zero() && lf != rf {
        let show = |s: &BTreeSet<_>| s.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        return Err(invalid(format!("free indices differ: {{{}}} vs {{{}}}", show(&lf), show(&rf))));
    }
    Ok(())
}

/// One rewrite: which rule fired where, with which binding. `negated`
/// records that the left side matched the negation of the subterm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub rule: String,
    pub position: Position,
    pub binding: Binding,
    pub negated: bool,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} @ {}", self.rule, self.position)
    }
}

/// Rewrites the subterm of `e` at `position` with `rule` under `binding`,
/// then canonicalizes the whole expression. The binding must be one that
/// matching produces at that position.
pub fn apply_at(
    rule: &Rule,
    e: &Expr,
    position: &Position,
    binding: &Binding,
    negated: bool,
    canon: &Canonicalizer,
) -> Result<Expr, RuleError> {
    let sub = subexpr_at(e, position).ok_or_else(|| RuleError::StalePosition(position.clone()))?;
    let found = match_signed(&rule.lhs, sub);
    if found.binary_search(&(binding.clone(), negated)).is_err() {
        return Err(RuleError::NotAMatch { rule: rule.name.clone(), position: position.clone() });
    }
    rewrite(rule, e, position, binding, negated, canon)
}

fn rewrite(
    rule: &Rule,
    e: &Expr,
    position: &Position,
    binding: &Binding,
    negated: bool,
    canon: &Canonicalizer,
) -> Result<Expr, RuleError> {
    let mut new = instantiate_raw(&rule.rhs, binding, &e.index_names())?;
    if negated {
        new = new.neg();
    }
    let replaced = replace_at(e, position, new).ok_or_else(|| RuleError::StalePosition(position.clone()))?;
    Ok(canon.canonicalize(&replaced))
}

/// Applies a recorded step by rule name.
pub fn replay(step: &Step, e: &Expr, rules: &RuleSet) -> Result<Expr, RuleError> {
    let rule = rules.get(&step.rule).ok_or_else(|| RuleError::UnknownRule(step.rule.clone()))?;
    apply_at(rule, e, &step.position, &step.binding, step.negated, &rules.canonicalizer())
}

/// Every distinct canonical expression reachable from `e` in one rewrite.
///
/// Order is deterministic: positions in pre-order, then rules in set order,
/// then bindings in sorted order. A result reachable in several ways keeps
/// the first. A rewrite that returns `e` itself is included.
pub fn successors(e: &Expr, rules: &RuleSet) -> Vec<(Expr, Step)> {
    let canon = rules.canonicalizer();
    let mut seen: HashSet<Expr> = HashSet::new();
    let mut out = Vec::new();
    for position in positions(e) {
        let Some(sub) = subexpr_at(e, &position) else { continue };
        for rule in &rules.rules {
            for (binding, negated) in match_signed(&rule.lhs, sub) {
                let Ok(next) = rewrite(rule, e, &position, &binding, negated, &canon) else { continue };
                if seen.insert(next.clone()) {
                    out.push((next, Step { rule: rule.name.clone(), position: position.clone(), binding, negated }));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{canonicalize, parse_expr};

    fn c(s: &str) -> Expr {
        canonicalize(&parse_expr(s).unwrap())
    }

    fn apply_first(rules: &RuleSet, name: &str, e: &Expr, p: &str) -> Expr {
        let rule = rules.get(name).unwrap();
        let pos: Position = p.parse().unwrap();
        let (b, neg) = match_signed(&rule.lhs, subexpr_at(e, &pos).unwrap()).remove(0);
        apply_at(rule, e, &pos, &b, neg, &rules.canonicalizer()).unwrap()
    }

    #[test]
    fn seed_rules_load() {
        let rs = RuleSet::seed();
        let names: Vec<_> = rs.rules().iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["expandF:fwd", "expandF:rev", "eom", "leibniz"]);
    }

    #[test]
    fn expand_field_strength_at_root() {
        let rs = RuleSet::seed();
        let out = apply_first(&rs, "expandF:fwd", &c("F[_mu,_nu]"), "root");
        assert_eq!(out, c("d[_mu](A[_nu]) - d[_nu](A[_mu])"));
    }

    #[test]
    fn equation_of_motion_kills_divergence() {
        let rs = RuleSet::seed();
        assert!(apply_first(&rs, "eom", &c("d[_mu](F[^mu,^nu])"), "root").is_zero());
    }

    #[test]
    fn product_rule_inside_derivative() {
        let rs = RuleSet::seed();
        let e = c("d[_lam](A[_mu]*A[^mu])");
        let out = apply_first(&rs, "leibniz", &e, "root");
        assert_eq!(out, c("2*A[^mu]*d[_lam](A[_mu])"));
    }

    #[test]
    fn lone_field_strength_has_one_successor() {
        let succ = successors(&c("F[_mu,_nu]"), &RuleSet::seed());
        assert_eq!(succ.len(), 1);
        assert_eq!(succ[0].1.rule, "expandF:fwd");
    }

    #[test]
    fn zero_has_no_successors() {
        assert!(successors(&Expr::zero(), &RuleSet::seed()).is_empty());
    }

    #[test]
    fn stale_binding_is_rejected() {
        let rs = RuleSet::seed();
        let rule = rs.get("eom").unwrap();
        let e = c("F[_mu,_nu]");
        let err = apply_at(rule, &e, &Position::root(), &Binding::default(), false, &rs.canonicalizer());
        assert!(matches!(err, Err(RuleError::NotAMatch { .. })));
        let err = apply_at(rule, &e, &"0.1".parse().unwrap(), &Binding::default(), false, &rs.canonicalizer());
        assert!(matches!(err, Err(RuleError::StalePosition(_))));
    }

    #[test]
    fn invalid_rules_are_rejected() {
        for text in [
            "bad: x? -> a",
            "bad: A[_a?] -> B[_b?]",
            "bad: A[_a?] -> x?",
            "bad: A[_a?] -> B[^a?]",
            "bad A[_a?] -> B[_a?]",
            "bad: A[_a?] B[_a?]",
        ] {
            assert!(load_rules(text).is_err(), "{text}");
        }
        assert!(matches!(load_rules("r: a -> b\nr: b -> a"), Err(RuleError::Duplicate(_))));
        assert!(load_rules("kill: d[_a?](F[^a?,^b?]) -> 0").is_ok());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match load_rules("# header\n\nr: a -> b\nq: F[_a?] -> b") {
            Err(RuleError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn merge_skips_identical_and_rejects_conflicts() {
        let mut rs = RuleSet::seed();
        rs.merge(&load_rules("eom: d[_a?](F[^a?,^b?]) -> 0").unwrap()).unwrap();
        assert_eq!(rs.len(), 4);
        assert!(rs.merge(&load_rules("eom: F[_a?,_b?] -> 0").unwrap()).is_err());
    }
}
