//! Breadth-first derivation search with cycle control.
//!
//! Every derivation in the crate goes through [`search`]: a start
//! expression, a rule set and a goal predicate go in, and either a
//! shortest derivation or a report of why none was found comes out.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::expr::{free_indices, Canonicalizer, Expr, Index, IndexError, ParseError, Parser, Registry};
use crate::pattern::match_pattern;
use crate::rules::{replay, successors, RuleError, RuleSet, Step};

/// Success condition of a search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Goal {
    /// The pattern matches the whole expression.
    MatchesPattern(Expr),
    /// The expression is canonically equal to the target.
    EqualsCanonical(Expr),
    IsZero,
    /// Swapping the two free indices (by name) leaves the expression
    /// unchanged.
    SymmetricIn(Index, Index),
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Goal::MatchesPattern(p) => write!(f, "matches {p}"),
            Goal::EqualsCanonical(t) => write!(f, "equals {t}"),
            Goal::IsZero => f.write_str("is-zero"),
            Goal::SymmetricIn(i, j) => write!(f, "symmetric-in {} {}", i.name, j.name),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GoalError {
    #[error("`{0}` is not a free index of the expression")]
    NotFree(String),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("unknown goal `{0}`; expected is-zero, equals <expr>, matches <pattern> or symmetric-in <i> <j>")]
    Unknown(String),
    #[error("goal expression: {0}")]
    Parse(#[from] ParseError),
}

impl Goal {
    /// Parses the textual goal language: `is-zero`, `equals <expr>`,
    /// `matches <pattern>`, `symmetric-in <i> <j>`. Index names may carry
    /// a `^` or `_` prefix, which is ignored.
    pub fn parse(text: &str, registry: &mut Registry) -> Result<Goal, GoalError> {
        let text = text.trim();
        let (word, rest) = text.split_once(char::is_whitespace).unwrap_or((text, ""));
        let rest = rest.trim();
        match word {
            "is-zero" if rest.is_empty() => Ok(Goal::IsZero),
            "equals" => Ok(Goal::EqualsCanonical(Parser::new(registry).ground(rest)?)),
            "matches" => Ok(Goal::MatchesPattern(Parser::new(registry).pattern(rest)?)),
            "symmetric-in" => {
                let names: Vec<&str> = rest.split_whitespace().collect();
                match names.as_slice() {
                    [i, j] => {
                        let bare = |s: &str| s.trim_start_matches(['^', '_']).to_string();
                        Ok(Goal::SymmetricIn(Index::upper(&bare(i)), Index::upper(&bare(j))))
                    }
                    _ => Err(GoalError::Unknown(text.to_string())),
                }
            }
            _ => Err(GoalError::Unknown(text.to_string())),
        }
    }
}

/// Evaluates `goal` on a canonical expression.
pub fn eval_goal(goal: &Goal, e: &Expr) -> Result<bool, GoalError> {
    eval_goal_with(goal, e, &Canonicalizer::default())
}

pub fn eval_goal_with(goal: &Goal, e: &Expr, canon: &Canonicalizer) -> Result<bool, GoalError> {
    Ok(match goal {
        Goal::IsZero => e.is_zero(),
        Goal::EqualsCanonical(t) => canon.canonicalize(t) == canon.canonicalize(e),
        Goal::MatchesPattern(p) => !match_pattern(p, e).is_empty(),
        Goal::SymmetricIn(i, j) => {
            let free = free_indices(e)?;
            for k in [i, j] {
                if !free.iter().any(|f| f.name == k.name) {
                    return Err(GoalError::NotFree(k.name.to_string()));
                }
            }
            let swapped = e.map_indices(&mut |x| {
                if x.name == i.name {
                    x.with_name(j.name.clone())
                } else if x.name == j.name {
                    x.with_name(i.name.clone())
                } else {
                    x.clone()
                }
            });
            canon.canonicalize(e) == canon.canonicalize(&swapped)
        }
    })
}

/// Limits on one search. All must be positive.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchBudget {
    pub max_depth: usize,
    pub max_states: usize,
    pub max_seconds: f64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { max_depth: 12, max_states: 200_000, max_seconds: 60.0 }
    }
}

/// Counters describing a finished search. Wall-clock time is deliberately
/// absent so that equal inputs give equal statistics.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Statistics {
    /// States whose successors were enqueued.
    pub states_expanded: usize,
    /// Distinct canonical forms discovered, start included.
    pub states_visited: usize,
    pub frontier_peak: usize,
    /// Deepest level dequeued.
    pub depth_reached: usize,
}

impl fmt::Display for Statistics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "states expanded: {}, states visited: {}, frontier peak: {}, depth reached: {}",
            self.states_expanded, self.states_visited, self.frontier_peak, self.depth_reached
        )
    }
}

/// Which limit cut a search short.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetLimit {
    Depth,
    States,
    Time,
}

impl fmt::Display for BudgetLimit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BudgetLimit::Depth => "max depth",
            BudgetLimit::States => "max states",
            BudgetLimit::Time => "max seconds",
        })
    }
}

/// A reached expression with the rewrite steps leading to it from the
/// canonical start.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DerivationState {
    pub expr: Expr,
    pub path: Vec<Step>,
    pub depth: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SearchOutcome {
    Found(DerivationState, Statistics),
    /// Every reachable state was examined.
    Exhausted(Statistics),
    /// Some state was left unexamined because of `limit`.
    BudgetExceeded(Statistics, BudgetLimit),
}

impl SearchOutcome {
    pub fn statistics(&self) -> &Statistics {
        match self {
            SearchOutcome::Found(_, s) | SearchOutcome::Exhausted(s) | SearchOutcome::BudgetExceeded(s, _) => s,
        }
    }

    pub fn found(&self) -> Option<&DerivationState> {
        match self {
            SearchOutcome::Found(d, _) => Some(d),
            _ => None,
        }
    }
}

struct Node {
    expr: Expr,
    parent: Option<usize>,
    step: Option<Step>,
    depth: usize,
}

/// Breadth-first search from `start` for a state satisfying `goal`.
///
/// The start is canonicalized first. The goal is tested when a state is
/// dequeued, so a start that already satisfies it is found at depth 0. A
/// canonical form is enqueued at most once. A goal that cannot be
/// evaluated on a state counts as not satisfied there.
pub fn search(start: &Expr, rules: &RuleSet, goal: &Goal, budget: &SearchBudget) -> SearchOutcome {
    let canon = rules.canonicalizer();
    let clock = Instant::now();
    let time_limit = Duration::from_secs_f64(budget.max_seconds.max(0.0));

    let mut arena = vec![Node { expr: canon.canonicalize(start), parent: None, step: None, depth: 0 }];
    let mut visited: HashMap<Expr, usize> = HashMap::from([(arena[0].expr.clone(), 0)]);
    let mut queue = VecDeque::from([0usize]);
    let mut stats = Statistics { states_visited: 1, frontier_peak: 1, ..Statistics::default() };
    let mut cut: Option<BudgetLimit> = None;

    while let Some(id) = queue.pop_front() {
        let depth = arena[id].depth;
        stats.depth_reached = stats.depth_reached.max(depth);
        if eval_goal_with(goal, &arena[id].expr, &canon).unwrap_or(false) {
            return SearchOutcome::Found(trace(&arena, id), stats);
        }
        if clock.elapsed() > time_limit {
            return SearchOutcome::BudgetExceeded(stats, BudgetLimit::Time);
        }
        if cut == Some(BudgetLimit::States) {
            continue;
        }
        let next = successors(&arena[id].expr, rules);
        if depth >= budget.max_depth {
            if next.iter().any(|(e, _)| !visited.contains_key(e)) {
                cut.get_or_insert(BudgetLimit::Depth);
            }
            continue;
        }
        stats.states_expanded += 1;
        for (expr, step) in next {
            if visited.contains_key(&expr) {
                continue;
            }
            if visited.len() >= budget.max_states {
                cut = Some(BudgetLimit::States);
                break;
            }
            let child = arena.len();
            visited.insert(expr.clone(), child);
            arena.push(Node { expr, parent: Some(id), step: Some(step), depth: depth + 1 });
            queue.push_back(child);
        }
        stats.states_visited = visited.len();
        stats.frontier_peak = stats.frontier_peak.max(queue.len());
    }
    match cut {
        Some(limit) => SearchOutcome::BudgetExceeded(stats, limit),
        None => SearchOutcome::Exhausted(stats),
    }
}

fn trace(arena: &[Node], mut id: usize) -> DerivationState {
    let expr = arena[id].expr.clone();
    let depth = arena[id].depth;
    let mut path = Vec::with_capacity(depth);
    while let (Some(parent), Some(step)) = (arena[id].parent, &arena[id].step) {
        path.push(step.clone());
        id = parent;
    }
    path.reverse();
    DerivationState { expr, path, depth }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ExplainError {
    #[error("step {step} does not replay: {source}")]
    Replay { step: usize, source: RuleError },
    #[error("replay ends in `{got}` instead of `{expected}`")]
    Mismatch { expected: String, got: String },
}

/// One line of a derivation transcript.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TranscriptLine {
    pub depth: usize,
    /// `canonical` for the start line, otherwise the rule name.
    pub rule: String,
    /// `None` on the start line.
    pub position: Option<String>,
    pub expr: String,
}

/// A replay-checked listing of a derivation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transcript {
    pub lines: Vec<TranscriptLine>,
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.lines.iter().map(|l| label(l).len()).max().unwrap_or(0);
        for l in &self.lines {
            writeln!(f, "{:>2}  {:<width$}  {}", l.depth, label(l), l.expr)?;
        }
        Ok(())
    }
}

fn label(l: &TranscriptLine) -> String {
    match &l.position {
        Some(p) => format!("{} @ {}", l.rule, p),
        None => l.rule.clone(),
    }
}

/// Replays `d` from `start` and lists every intermediate expression.
pub fn explain(d: &DerivationState, start: &Expr, rules: &RuleSet) -> Result<Transcript, ExplainError> {
    let mut e = rules.canonicalizer().canonicalize(start);
    let mut lines =
        vec![TranscriptLine { depth: 0, rule: "canonical".into(), position: None, expr: e.to_string() }];
    for (n, step) in d.path.iter().enumerate() {
        e = replay(step, &e, rules).map_err(|source| ExplainError::Replay { step: n + 1, source })?;
        lines.push(TranscriptLine {
            depth: n + 1,
            rule: step.rule.clone(),
            position: Some(step.position.to_string()),
            expr: e.to_string(),
        });
    }
    if e != d.expr {
        return Err(ExplainError::Mismatch { expected: d.expr.to_string(), got: e.to_string() });
    }
    Ok(Transcript { lines })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::rules::load_rules;

    fn toy() -> RuleSet {
        load_rules(include_str!("../data/toy.rules")).unwrap()
    }

    fn goal(s: &str) -> Goal {
        Goal::parse(s, &mut Registry::default()).unwrap()
    }

    #[test]
    fn canonicalization_alone_can_reach_zero() {
        let start = parse_expr("F[_mu,_nu]*F[^nu,^mu] + F[_mu,_nu]*F[^mu,^nu]").unwrap();
        let out = search(&start, &RuleSet::seed(), &Goal::IsZero, &SearchBudget::default());
        let d = out.found().unwrap();
        assert_eq!(d.depth, 0);
        let t = explain(d, &start, &RuleSet::seed()).unwrap();
        assert_eq!(t.lines.len(), 1);
        assert_eq!(t.lines[0].rule, "canonical");
    }

    #[test]
    fn divergence_of_field_strength_vanishes_in_one_step() {
        let start = parse_expr("d[_mu](F[^mu,^nu])").unwrap();
        let rs = RuleSet::seed();
        let out = search(&start, &rs, &Goal::IsZero, &SearchBudget::default());
        let d = out.found().unwrap();
        assert_eq!(d.depth, 1);
        let t = explain(d, &start, &rs).unwrap();
        assert_eq!(t.lines.len(), 2);
        assert_eq!(t.lines[1].rule, "eom");
        assert_eq!(t.lines[1].expr, "0");
    }

    #[test]
    fn toy_path_goes_through_b() {
        let out = search(&parse_expr("a").unwrap(), &toy(), &goal("equals c"), &SearchBudget::default());
        let d = out.found().unwrap();
        let names: Vec<_> = d.path.iter().map(|s| s.rule.as_str()).collect();
        assert_eq!(names, ["r1", "r3"]);
        let t = explain(d, &parse_expr("a").unwrap(), &toy()).unwrap();
        assert_eq!(t.to_string(), " 0  canonical  a\n 1  r1 @ root  b\n 2  r3 @ root  c\n");
    }

    #[test]
    fn closed_toy_space_is_exhausted() {
        let out = search(&parse_expr("a").unwrap(), &toy(), &goal("equals d"), &SearchBudget::default());
        match out {
            SearchOutcome::Exhausted(s) => {
                assert_eq!(s.states_visited, 3);
                assert_eq!(s.states_expanded, 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn depth_limit_is_reported() {
        let budget = SearchBudget { max_depth: 1, ..SearchBudget::default() };
        let out = search(&parse_expr("a").unwrap(), &toy(), &goal("equals d"), &budget);
        assert!(matches!(out, SearchOutcome::BudgetExceeded(_, BudgetLimit::Depth)));
        let budget = SearchBudget { max_states: 2, ..SearchBudget::default() };
        let out = search(&parse_expr("a").unwrap(), &toy(), &goal("equals d"), &budget);
        assert!(matches!(out, SearchOutcome::BudgetExceeded(_, BudgetLimit::States)));
    }

    #[test]
    fn symmetric_goal_swaps_free_names() {
        let g = goal("symmetric-in mu nu");
        assert!(eval_goal(&g, &parse_expr("eta[^mu,^nu]").unwrap()).unwrap());
        assert!(eval_goal(&g, &parse_expr("A[^mu]*A[^nu]").unwrap()).unwrap());
        assert!(!eval_goal(&g, &parse_expr("F[^mu,^nu]").unwrap()).unwrap());
        assert!(!eval_goal(&g, &parse_expr("A[^mu]*d[^nu](A[^lam])*A[_lam]").unwrap()).unwrap());
        assert!(matches!(eval_goal(&g, &parse_expr("A[^mu]").unwrap()), Err(GoalError::NotFree(_))));
    }

    #[test]
    fn pattern_goal_matches_at_root() {
        let g = goal("matches xs?? * F[_a?,_b?]");
        assert!(eval_goal(&g, &parse_expr("2*A[^mu]*F[_mu,_nu]").unwrap()).unwrap());
        assert!(!eval_goal(&g, &parse_expr("A[_nu]").unwrap()).unwrap());
    }

    #[test]
    fn goal_text_errors() {
        for bad in ["zero", "symmetric-in mu", "equals F[_mu"] {
            assert!(Goal::parse(bad, &mut Registry::default()).is_err(), "{bad}");
        }
    }

    #[test]
    fn explain_rejects_foreign_paths() {
        let start = parse_expr("a").unwrap();
        let d = search(&start, &toy(), &goal("equals c"), &SearchBudget::default()).found().cloned().unwrap();
        assert!(explain(&d, &parse_expr("c").unwrap(), &toy()).is_err());
    }
}
