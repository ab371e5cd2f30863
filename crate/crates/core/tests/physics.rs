//! The field-theory layer against hand-written component calculus.

use std::collections::BTreeSet;

use fieldsearch::expr::{canonicalize, expand_components, free_indices, Expr, Index, Parser};
use fieldsearch::physics::{
    canonical_tem, check_conservation, divergence, symmetrize_tem, variational_derivative, Conservation,
    FieldTheory, TEMResult, TemVariant, MU, NU,
};
use fieldsearch::search::{eval_goal, search, Goal, SearchBudget};
use fieldsearch_oracle::calculus::{self, eta, symbol, Table2};

const DIM: u32 = 4;

fn theory(name: &str, text: &str) -> FieldTheory {
    FieldTheory::parse(name, text).unwrap()
}

fn em() -> FieldTheory {
    theory("free-em", include_str!("../data/free-em.theory"))
}

fn scalar() -> FieldTheory {
    theory("free-scalar", include_str!("../data/free-scalar.theory"))
}

fn parse_in(t: &FieldTheory, text: &str) -> Expr {
    let mut registry = t.registry.clone();
    Parser::new(&mut registry).ground(text).unwrap()
}

/// Component table of a tensor whose free indices are `^mu` then `^nu`.
fn table2(e: &Expr) -> Table2 {
    let t = expand_components(e, DIM).unwrap();
    let free: Vec<&str> = t.free.iter().map(|i| &*i.name).collect();
    assert_eq!(free, [MU, NU], "{e}");
    t.entries.into_iter().map(|(k, p)| ((k[0], k[1]), p)).collect()
}

fn table1(e: &Expr) -> Vec<fieldsearch::expr::Polynomial> {
    let t = expand_components(e, DIM).unwrap();
    assert_eq!(t.free.len(), 1, "{e}");
    (0..DIM).map(|n| t.entries[&vec![n]].clone()).collect()
}

fn upper_mu_nu() -> BTreeSet<Index> {
    BTreeSet::from([Index::upper(MU), Index::upper(NU)])
}

#[test]
fn maxwell_momentum_against_components() {
    let t = em();
    let pi = variational_derivative(&t.lagrangian, &t.fields[0], &t).unwrap();
    assert_eq!(pi, canonicalize(&parse_in(&t, "-F[^mu,^nu]")));
    let l = calculus::maxwell_lagrangian(DIM);
    let engine = table2(&pi);
    for m in 0..DIM {
        for n in 0..DIM {
            // the derivative by a lowered symbol carries upper indices already
            let oracle = calculus::partial_by_symbol(&l, &symbol("A", &[m], &[n]));
            assert_eq!(engine[&(m, n)], oracle, "entry ({m},{n})");
        }
    }
}

#[test]
fn scalar_momentum_against_components() {
    let t = theory("kinetic", "field phi[0]\nlagrangian 1/2 * d[_mu](phi)*d[^mu](phi)");
    let pi = variational_derivative(&t.lagrangian, &t.fields[0], &t).unwrap();
    assert_eq!(pi, canonicalize(&parse_in(&t, "d[^mu](phi)")));
    let mut l = fieldsearch::expr::Polynomial::zero();
    for a in 0..DIM {
        let d = fieldsearch::expr::Polynomial::symbol(symbol("phi", &[a], &[]));
        l.add(&d.mul(&d).scale(eta(a) * fieldsearch::expr::Rational::new(1, 2)));
    }
    let engine = table1(&pi);
    for m in 0..DIM {
        let oracle = calculus::partial_by_symbol(&l, &symbol("phi", &[m], &[]));
        assert_eq!(engine[m as usize], oracle, "entry {m}");
    }
}

#[test]
fn momentum_without_derivatives_is_zero() {
    let t = theory("mass", "field A[1]\nlagrangian A[_mu]*A[^mu]");
    assert!(variational_derivative(&t.lagrangian, &t.fields[0], &t).unwrap().is_zero());
}

#[test]
fn lagrangians_and_invariants_are_scalars() {
    let t = em();
    assert!(free_indices(&t.lagrangian).unwrap().is_empty());
    assert!(free_indices(&parse_in(&t, "F[_lam,_sig]*F[^lam,^sig]")).unwrap().is_empty());
    assert!(free_indices(&scalar().lagrangian).unwrap().is_empty());
}

#[test]
fn maxwell_tem_against_components() {
    let t = canonical_tem(&em()).unwrap();
    assert_eq!(t.variant, TemVariant::Canonical);
    assert_eq!(free_indices(&t.tensor).unwrap(), upper_mu_nu());
    let oracle = calculus::canonical_tem_vector(&calculus::maxwell_lagrangian(DIM), DIM);
    assert_eq!(oracle, calculus::canonical_maxwell_tem(DIM));
    assert_eq!(table2(&t.tensor), oracle);
    let expected = parse_in(&em(), "-F[^mu,_lam]*d[^nu](A[^lam]) + 1/4*eta[^mu,^nu]*F[_lam,_sig]*F[^lam,^sig]");
    assert_eq!(t.tensor, canonicalize(&expected));
    let sym = Goal::SymmetricIn(Index::upper(MU), Index::upper(NU));
    assert_eq!(eval_goal(&sym, &t.tensor), Ok(false));
}

#[test]
fn scalar_tem_against_components() {
    let s = scalar();
    let t = canonical_tem(&s).unwrap();
    assert_eq!(free_indices(&t.tensor).unwrap(), upper_mu_nu());
    let oracle = calculus::canonical_tem_scalar(&calculus::scalar_lagrangian(DIM), DIM);
    assert_eq!(table2(&t.tensor), oracle);
    let expected = parse_in(&s, "d[^mu](phi)*d[^nu](phi) - eta[^mu,^nu]*(1/2 * d[_a](phi)*d[^a](phi) - 1/2 * m*m*phi*phi)");
    assert_eq!(t.tensor, canonicalize(&expected));
}

#[test]
fn constant_lagrangian_gives_minus_eta_times_it() {
    let t = theory("vacuum", "constant m\nlagrangian m*m");
    let tem = canonical_tem(&t).unwrap();
    assert_eq!(tem.tensor, canonicalize(&parse_in(&t, "-1*eta[^mu,^nu]*m*m")));
}

#[test]
fn equations_of_motion_are_the_euler_lagrange_expressions() {
    let t = em();
    let lhs = parse_in(&t, "d[_a](F[^a,^nu])");
    assert_eq!(table1(&lhs), calculus::euler_lagrange_vector(&calculus::maxwell_lagrangian(DIM), DIM));

    let s = scalar();
    let kg = parse_in(&s, "d[_a](d[^a](phi)) + m*m*phi");
    let t = expand_components(&kg, DIM).unwrap();
    let e = calculus::euler_lagrange_scalar(&calculus::scalar_lagrangian(DIM), DIM);
    assert_eq!(t.entries[&vec![]], e.scale((-1).into()));
}

#[test]
fn maxwell_divergences_vanish_on_shell() {
    let em = em();
    let rules = em.rules().unwrap();
    let t = canonical_tem(&em).unwrap();
    let s = symmetrize_tem(&t, &em).unwrap();
    for x in [&t, &s] {
        for p in calculus::divergence(&table2(&x.tensor), DIM) {
            assert!(!p.is_zero(), "the divergence should need the field equations");
            assert!(calculus::maxwell_on_shell(&p, DIM).is_zero());
        }
        let Conservation::Conserved(d, _) = check_conservation(x, &rules, &SearchBudget::default()) else {
            panic!("{} not shown conserved", x.variant)
        };
        assert!(d.path.iter().any(|step| step.rule == "eom"));
        assert!(d.expr.is_zero());
    }
}

#[test]
fn scalar_divergence_vanishes_on_shell() {
    let s = scalar();
    let t = canonical_tem(&s).unwrap();
    for p in calculus::divergence(&table2(&t.tensor), DIM) {
        assert!(calculus::klein_gordon_on_shell(&p, DIM).is_zero());
    }
    let rules = s.rules().unwrap();
    let Conservation::Conserved(d, _) = check_conservation(&t, &rules, &SearchBudget::default()) else {
        panic!("scalar tensor not shown conserved")
    };
    assert!(d.path.iter().any(|step| step.rule == "klein-gordon"));
}

#[test]
fn conservation_examples() {
    let em = em();
    let rules = em.rules().unwrap();
    let eta = TEMResult::new(parse_in(&em, "eta[^mu,^nu]"), TemVariant::Canonical).unwrap();
    assert!(divergence(&eta).is_zero());
    match check_conservation(&eta, &rules, &SearchBudget::default()) {
        Conservation::Conserved(d, _) => assert_eq!(d.depth, 0),
        other => panic!("{other:?}"),
    }
    let aa = TEMResult::new(parse_in(&em, "A[^mu]*A[^nu]"), TemVariant::Canonical).unwrap();
    assert!(matches!(check_conservation(&aa, &rules, &SearchBudget::default()), Conservation::NotShown(..)));
}

/// `T1^{00}` of the symmetrized Maxwell tensor, from
/// `calculus::symmetric_maxwell_tem`.
const SYMMETRIZED_00: &str = "-dA_{0,1}*dA_{1,0} + 1/2*dA_{0,1}^2 - dA_{0,2}*dA_{2,0} + 1/2*dA_{0,2}^2 \
- dA_{0,3}*dA_{3,0} + 1/2*dA_{0,3}^2 + 1/2*dA_{1,0}^2 - dA_{1,2}*dA_{2,1} + 1/2*dA_{1,2}^2 \
- dA_{1,3}*dA_{3,1} + 1/2*dA_{1,3}^2 + 1/2*dA_{2,0}^2 + 1/2*dA_{2,1}^2 - dA_{2,3}*dA_{3,2} \
+ 1/2*dA_{2,3}^2 + 1/2*dA_{3,0}^2 + 1/2*dA_{3,1}^2 + 1/2*dA_{3,2}^2";

#[test]
fn symmetrized_maxwell_tem() {
    let em = em();
    let t = canonical_tem(&em).unwrap();
    let s = symmetrize_tem(&t, &em).unwrap();
    assert_eq!(s.variant, TemVariant::Symmetrized);
    assert_eq!(free_indices(&s.tensor).unwrap(), upper_mu_nu());
    assert_eq!(eval_goal(&Goal::SymmetricIn(Index::upper(MU), Index::upper(NU)), &s.tensor), Ok(true));

    let oracle = calculus::symmetric_maxwell_tem(DIM);
    assert_eq!(oracle[&(0, 0)].to_string(), SYMMETRIZED_00);
    let engine = table2(&s.tensor);
    assert_eq!(engine[&(0, 0)].to_string(), SYMMETRIZED_00);
    assert_eq!(engine, oracle);
    let expected = parse_in(&em, "F[^mu,^lam]*F[_lam,^nu] + 1/4*eta[^mu,^nu]*F[_lam,_sig]*F[^lam,^sig]");
    assert_eq!(s.tensor, canonicalize(&expected));
}

#[test]
fn symmetrized_minus_canonical_is_the_improvement_on_shell() {
    let em = em();
    let rules = em.rules().unwrap();
    let t = canonical_tem(&em).unwrap();
    let s = symmetrize_tem(&t, &em).unwrap();
    let on_shell_part = parse_in(&em, "F[^mu,^lam]*d[_lam](A[^nu])");
    let rest = canonicalize(&Expr::sum(vec![s.tensor.clone(), t.tensor.clone().neg(), on_shell_part.clone().neg()]));
    let found = search(&rest, &rules, &Goal::IsZero, &SearchBudget::default());
    assert!(found.found().is_some(), "{rest}: {found:?}");

    let (t1, t0, x) = (table2(&s.tensor), table2(&t.tensor), table2(&on_shell_part));
    let improvement = table2(&parse_in(&em, "d[_lam](F[^mu,^lam]*A[^nu])"));
    for key in t1.keys() {
        let mut d = t1[key].clone();
        d.add(&t0[key].scale((-1).into()));
        assert_eq!(calculus::maxwell_on_shell(&d, DIM), calculus::maxwell_on_shell(&x[key], DIM), "{key:?}");
        let mut e = d.clone();
        e.add(&improvement[key].scale((-1).into()));
        assert!(calculus::maxwell_on_shell(&e, DIM).is_zero(), "{key:?}");
    }
}
