use std::fmt::{self, Write};

use num_traits::{One, Signed};

use super::{Expr, Rational};

pub(super) fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        Expr::Sum(ts) if ts.is_empty() => f.write_char('0'),
        Expr::Sum(ts) => {
            for (i, t) in ts.iter().enumerate() {
                let (negative, magnitude) = split_sign(t);
                match (i, negative) {
                    (0, true) => f.write_char('-')?,
                    (0, false) => {}
                    (_, true) => f.write_str(" - ")?,
                    (_, false) => f.write_str(" + ")?,
                }
                write_term(f, &magnitude)?;
            }
            Ok(())
        }
        other => write_term(f, other),
    }
}

/// Splits a leading negative coefficient off a sum term so it can be
/// printed as subtraction.
fn split_sign(t: &Expr) -> (bool, Expr) {
    match t {
        Expr::Num(q) if q.is_negative() => (true, Expr::Num(-q)),
        Expr::Product(c, fs) if c.is_negative() => (true, Expr::Product(-c, fs.clone())),
        other => (false, other.clone()),
    }
}

fn write_term(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        Expr::Product(c, fs) => {
            let mut first = true;
            if *c == -Rational::one() {
                f.write_char('-')?;
            } else if !c.is_one() {
                write_rational(f, c)?;
                first = false;
            }
            for x in fs {
                if !first {
                    f.write_char('*')?;
                }
                first = false;
                write_factor(f, x)?;
            }
            Ok(())
        }
        other => write_factor(f, other),
    }
}

fn write_factor(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        Expr::Num(q) if q.is_negative() => {
            f.write_char('(')?;
            write_rational(f, q)?;
            f.write_char(')')
        }
        Expr::Num(q) => write_rational(f, q),
        Expr::Tensor(t) => {
            f.write_str(&t.head.name)?;
            if !t.indices.is_empty() {
                f.write_char('[')?;
                for (i, idx) in t.indices.iter().enumerate() {
                    if i > 0 {
                        f.write_char(',')?;
                    }
                    write!(f, "{idx}")?;
                }
                f.write_char(']')?;
            }
            Ok(())
        }
        Expr::Partial(i, x) => {
            write!(f, "d[{i}](")?;
            write_expr(f, x)?;
            f.write_char(')')
        }
        Expr::Var(v) => write!(f, "{v}?"),
        Expr::SeqVar(v) => write!(f, "{v}??"),
        Expr::Sum(ts) if ts.is_empty() => f.write_char('0'),
        Expr::Sum(_) | Expr::Product(..) => {
            f.write_char('(')?;
            write_expr(f, e)?;
            f.write_char(')')
        }
    }
}

fn write_rational(f: &mut fmt::Formatter<'_>, q: &Rational) -> fmt::Result {
    if q.is_integer() {
        write!(f, "{}", q.numer())
    } else {
        write!(f, "{}/{}", q.numer(), q.denom())
    }
}
