use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{Expr, Index, IndexKind, Symbol};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum IndexError {
    #[error("index `{name}` appears {count} times in one term")]
    Repeated { name: Symbol, count: usize },
    #[error("index pair `{name}` must have one upper and one lower occurrence")]
    SameVariance { name: Symbol },
    #[error("sum terms disagree on free indices: {{{left}}} vs {{{right}}}")]
    Inconsistent { left: String, right: String },
    #[error("`{head}` expects {expected} indices, got {found}")]
    Arity { head: Symbol, expected: usize, found: usize },
}

fn show(set: &BTreeSet<Index>) -> String {
    set.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Index occurrences visible at the level of one product term. Nested sums
/// contribute only their free indices.
fn term_occurrences(e: &Expr, out: &mut Vec<Index>) -> Result<(), IndexError> {
    match e {
        Expr::Tensor(t) => {
            if t.indices.len() != t.head.arity {
                return Err(IndexError::Arity {
                    head: t.head.name.clone(),
                    expected: t.head.arity,
                    found: t.indices.len(),
                });
            }
            out.extend(t.indices.iter().cloned());
        }
        Expr::Partial(i, x) => {
            out.push(i.clone());
            term_occurrences(x, out)?;
        }
        Expr::Product(_, fs) => {
            for f in fs {
                term_occurrences(f, out)?;
            }
        }
        Expr::Sum(_) => out.extend(free_indices(e)?),
        Expr::Num(_) | Expr::Var(_) | Expr::SeqVar(_) => {}
    }
    Ok(())
}

fn group(occ: &[Index]) -> BTreeMap<(&Symbol, bool), Vec<&Index>> {
    let mut by_name: BTreeMap<(&Symbol, bool), Vec<&Index>> = BTreeMap::new();
    for i in occ.iter().filter(|i| !i.is_concrete()) {
        by_name.entry((&i.name, i.is_pattern)).or_default().push(i);
    }
    by_name
}

fn term_free(e: &Expr) -> Result<BTreeSet<Index>, IndexError> {
    let mut occ = Vec::new();
    term_occurrences(e, &mut occ)?;
    let mut free = BTreeSet::new();
    for ((name, _), uses) in group(&occ) {
        match uses.len() {
            1 => {
                free.insert(uses[0].clone());
            }
            2 if uses[0].variance != uses[1].variance => {}
            2 => return Err(IndexError::SameVariance { name: name.clone() }),
            count => return Err(IndexError::Repeated { name: name.clone(), count }),
        }
    }
    Ok(free)
}

/// Free (unpaired) indices of `e`. For a sum every term must agree.
/// Concrete component indices are not reported.
pub fn free_indices(e: &Expr) -> Result<BTreeSet<Index>, IndexError> {
    match e {
        Expr::Sum(ts) => {
            let mut common: Option<BTreeSet<Index>> = None;
            for t in ts {
                if t.is_zero() {
                    continue;
                }
                let f = term_free(t)?;
                match &common {
                    None => common = Some(f),
                    Some(c) if *c == f => {}
                    Some(c) => {
                        return Err(IndexError::Inconsistent { left: show(c), right: show(&f) })
                    }
                }
            }
            Ok(common.unwrap_or_default())
        }
        other => term_free(other),
    }
}

/// Checks index structure and head arities throughout `e`.
pub fn check_well_formed(e: &Expr) -> Result<(), IndexError> {
    free_indices(e).map(|_| ())
}

/// Classifies every index occurrence of `e`, in traversal order.
pub fn classify_indices(e: &Expr) -> Result<Vec<(Index, IndexKind)>, IndexError> {
    let mut out = Vec::new();
    classify_into(e, &BTreeSet::new(), &mut out)?;
    Ok(out)
}

fn classify_into(
    e: &Expr,
    paired_outside: &BTreeSet<Symbol>,
    out: &mut Vec<(Index, IndexKind)>,
) -> Result<(), IndexError> {
    if let Expr::Sum(ts) = e {
        for t in ts {
            classify_into(t, paired_outside, out)?;
        }
        return Ok(());
    }
    let mut occ = Vec::new();
    term_occurrences(e, &mut occ)?;
    let mut dummies: BTreeSet<Symbol> = paired_outside.clone();
    for ((name, pattern), uses) in group(&occ) {
        if uses.len() == 2 && !pattern {
            dummies.insert(name.clone());
        }
    }
    walk_term(e, &dummies, out)
}

fn walk_term(
    e: &Expr,
    dummies: &BTreeSet<Symbol>,
    out: &mut Vec<(Index, IndexKind)>,
) -> Result<(), IndexError> {
    let kind = |i: &Index| {
        if i.is_pattern {
            IndexKind::Pattern
        } else if dummies.contains(&i.name) {
            IndexKind::Dummy
        } else {
            IndexKind::Free
        }
    };
    match e {
        Expr::Tensor(t) => out.extend(t.indices.iter().map(|i| (i.clone(), kind(i)))),
        Expr::Partial(i, x) => {
            out.push((i.clone(), kind(i)));
            walk_term(x, dummies, out)?;
        }
        Expr::Product(_, fs) => {
            for f in fs {
                walk_term(f, dummies, out)?;
            }
        }
        Expr::Sum(_) => classify_into(e, dummies, out)?,
        _ => {}
    }
    Ok(())
}
