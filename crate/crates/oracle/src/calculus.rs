//! Field-theory calculus done directly on component polynomials: each
//! field derivative is a formal symbol, the Lagrangian is written out by
//! hand in components, and every index sum is an explicit loop.
//!
//! The metric is `diag(+1,-1,-1,...)` and all symbols carry lowered slots,
//! so raising an index is multiplication by `eta(a)`.

use std::collections::BTreeMap;

use fieldsearch::expr::{ComponentSymbol, Polynomial, Rational};

pub fn eta(a: u32) -> Rational {
    Rational::from_integer(if a == 0 { 1 } else { -1 })
}

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

pub fn symbol(head: &str, derivs: &[u32], slots: &[u32]) -> ComponentSymbol {
    let mut derivs = derivs.to_vec();
    derivs.sort();
    ComponentSymbol { head: head.into(), derivs, slots: slots.to_vec(), constant: false }
}

pub fn constant(head: &str) -> ComponentSymbol {
    ComponentSymbol { head: head.into(), derivs: Vec::new(), slots: Vec::new(), constant: true }
}

fn var(s: ComponentSymbol) -> Polynomial {
    Polynomial::symbol(s)
}

/// `∂_a A_b`.
pub fn da(a: u32, b: u32) -> Polynomial {
    var(symbol("A", &[a], &[b]))
}

/// `F_ab = ∂_a A_b - ∂_b A_a`.
pub fn f(a: u32, b: u32) -> Polynomial {
    let mut p = da(a, b);
    p.add(&da(b, a).scale(q(-1, 1)));
    p
}

fn monomial(factors: &[(ComponentSymbol, u32)], c: Rational) -> Polynomial {
    let mut p = Polynomial::constant(c);
    for (s, k) in factors {
        for _ in 0..*k {
            p = p.mul(&var(s.clone()));
        }
    }
    p
}

pub fn partial_by_symbol(p: &Polynomial, s: &ComponentSymbol) -> Polynomial {
    let mut out = Polynomial::zero();
    for (m, c) in p.terms() {
        let Some(pos) = m.iter().position(|(t, _)| t == s) else { continue };
        let mut m = m.clone();
        let k = m[pos].1;
        m[pos].1 -= 1;
        out.add(&monomial(&m, *c * Rational::from_integer(i64::from(k))));
    }
    out
}

/// `p` with `s` replaced by `value`.
pub fn substitute(p: &Polynomial, s: &ComponentSymbol, value: &Polynomial) -> Polynomial {
    let mut out = Polynomial::zero();
    for (m, c) in p.terms() {
        let mut term = Polynomial::constant(*c);
        for (t, k) in m {
            let base = if t == s { value.clone() } else { var(t.clone()) };
            for _ in 0..*k {
                term = term.mul(&base);
            }
        }
        out.add(&term);
    }
    out
}

/// Solves `equation = 0` for `s`, which must occur linearly, and
/// substitutes the solution into `p`.
fn eliminate(p: &Polynomial, s: &ComponentSymbol, equation: &Polynomial) -> Polynomial {
    let coeff = partial_by_symbol(equation, s);
    let c = coeff.terms().next().map(|(_, c)| *c).expect("symbol occurs in the equation");
    let rest = substitute(equation, s, &Polynomial::zero());
    substitute(p, s, &rest.scale(-Rational::from_integer(1) / c))
}

/// `-1/4 F_ab F^ab`.
pub fn maxwell_lagrangian(dim: u32) -> Polynomial {
    let mut l = Polynomial::zero();
    for a in 0..dim {
        for b in 0..dim {
            l.add(&f(a, b).mul(&f(a, b)).scale(eta(a) * eta(b) * q(-1, 4)));
        }
    }
    l
}

/// `1/2 ∂_a phi ∂^a phi - 1/2 m^2 phi^2`.
pub fn scalar_lagrangian(dim: u32) -> Polynomial {
    let mut l = Polynomial::zero();
    for a in 0..dim {
        let d = var(symbol("phi", &[a], &[]));
        l.add(&d.mul(&d).scale(eta(a) * q(1, 2)));
    }
    let m = var(constant("m"));
    let phi = var(symbol("phi", &[], &[]));
    l.add(&m.mul(&m).mul(&phi).mul(&phi).scale(q(-1, 2)));
    l
}

/// Table keyed by `(m, n)` for a tensor with both slots upper.
pub type Table2 = BTreeMap<(u32, u32), Polynomial>;

/// `T^mn = ∂L/∂(∂_m A_a) ∂^n A_a - eta^mn L` for a vector field `A`.
pub fn canonical_tem_vector(l: &Polynomial, dim: u32) -> Table2 {
    let mut t = Table2::new();
    for m in 0..dim {
        for n in 0..dim {
            let mut entry = Polynomial::zero();
            for a in 0..dim {
                let pi = partial_by_symbol(l, &symbol("A", &[m], &[a]));
                entry.add(&pi.mul(&da(n, a)).scale(eta(n)));
            }
            if m == n {
                entry.add(&l.scale(-eta(m)));
            }
            t.insert((m, n), entry);
        }
    }
    t
}

/// `T^mn = ∂L/∂(∂_m phi) ∂^n phi - eta^mn L` for a scalar field `phi`.
pub fn canonical_tem_scalar(l: &Polynomial, dim: u32) -> Table2 {
    let mut t = Table2::new();
    for m in 0..dim {
        for n in 0..dim {
            let pi = partial_by_symbol(l, &symbol("phi", &[m], &[]));
            let mut entry = pi.mul(&var(symbol("phi", &[n], &[]))).scale(eta(n));
            if m == n {
                entry.add(&l.scale(-eta(m)));
            }
            t.insert((m, n), entry);
        }
    }
    t
}

/// `-F^ma ∂^n A_a + 1/4 eta^mn F_ab F^ab`, written out directly.
pub fn canonical_maxwell_tem(dim: u32) -> Table2 {
    let l = maxwell_lagrangian(dim);
    let mut t = Table2::new();
    for m in 0..dim {
        for n in 0..dim {
            let mut entry = Polynomial::zero();
            for a in 0..dim {
                entry.add(&f(m, a).mul(&da(n, a)).scale(-eta(m) * eta(a) * eta(n)));
            }
            if m == n {
                entry.add(&l.scale(-eta(m)));
            }
            t.insert((m, n), entry);
        }
    }
    t
}

/// `F^ma F_a^n + 1/4 eta^mn F_ab F^ab`.
pub fn symmetric_maxwell_tem(dim: u32) -> Table2 {
    let l = maxwell_lagrangian(dim);
    let mut t = Table2::new();
    for m in 0..dim {
        for n in 0..dim {
            let mut entry = Polynomial::zero();
            for a in 0..dim {
                entry.add(&f(m, a).mul(&f(a, n)).scale(eta(m) * eta(a) * eta(n)));
            }
            if m == n {
                entry.add(&l.scale(-eta(m)));
            }
            t.insert((m, n), entry);
        }
    }
    t
}

/// `E^n = ∂L/∂A_n - ∂_m ∂L/∂(∂_m A_n)`, index up.
pub fn euler_lagrange_vector(l: &Polynomial, dim: u32) -> Vec<Polynomial> {
    (0..dim)
        .map(|n| {
            let mut e = partial_by_symbol(l, &symbol("A", &[], &[n]));
            for m in 0..dim {
                let pi = partial_by_symbol(l, &symbol("A", &[m], &[n]));
                e.add(&pi.derivative(m).expect("second derivatives").scale(q(-1, 1)));
            }
            e
        })
        .collect()
}

pub fn euler_lagrange_scalar(l: &Polynomial, dim: u32) -> Polynomial {
    let mut e = partial_by_symbol(l, &symbol("phi", &[], &[]));
    for m in 0..dim {
        let pi = partial_by_symbol(l, &symbol("phi", &[m], &[]));
        e.add(&pi.derivative(m).expect("second derivatives").scale(q(-1, 1)));
    }
    e
}

/// `∂_m T^mn` for each `n`.
pub fn divergence(t: &Table2, dim: u32) -> Vec<Polynomial> {
    (0..dim)
        .map(|n| {
            let mut out = Polynomial::zero();
            for m in 0..dim {
                out.add(&t[&(m, n)].derivative(m).expect("second derivatives"));
            }
            out
        })
        .collect()
}

/// Reduces `p` modulo `∂_m F^mn = 0` by eliminating `∂_0 ∂_0 A_n` for
/// `n > 0` and `∂_1 ∂_1 A_0` for `n = 0`.
pub fn maxwell_on_shell(p: &Polynomial, dim: u32) -> Polynomial {
    let mut out = p.clone();
    for n in 0..dim {
        let mut eom = Polynomial::zero();
        for m in 0..dim {
            eom.add(&var(symbol("A", &[m, m], &[n])).scale(eta(m)));
            eom.add(&var(symbol("A", &[m, n], &[m])).scale(-eta(m)));
        }
        let target = if n == 0 { symbol("A", &[1, 1], &[0]) } else { symbol("A", &[0, 0], &[n]) };
        out = eliminate(&out, &target, &eom);
    }
    out
}

/// Reduces `p` modulo `∂_m ∂^m phi + m^2 phi = 0` by eliminating
/// `∂_0 ∂_0 phi`.
pub fn klein_gordon_on_shell(p: &Polynomial, dim: u32) -> Polynomial {
    let mut eom = Polynomial::zero();
    for a in 0..dim {
        eom.add(&var(symbol("phi", &[a, a], &[])).scale(eta(a)));
    }
    let m = var(constant("m"));
    eom.add(&m.mul(&m).mul(&var(symbol("phi", &[], &[]))));
    eliminate(p, &symbol("phi", &[0, 0], &[]), &eom)
}
