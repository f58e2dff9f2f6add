//! Algebraic properties of sparse polynomials, checked by evaluation.

use std::collections::HashMap;

use proptest::prelude::*;
use stochastic_barrier::poly::{gaussian_moment, Monomial, Polynomial, Var};

fn vars() -> [Var; 3] {
    [Var::new("x"), Var::new("y"), Var::new("z")]
}

fn poly() -> impl Strategy<Value = Polynomial> {
    prop::collection::vec(((0u32..3, 0u32..3, 0u32..3), -3.0f64..3.0), 0..6).prop_map(|terms| {
        let [x, y, z] = vars();
        Polynomial::from_terms(
            terms.into_iter().map(|((a, b, c), k)| (Monomial::from_powers([(x, a), (y, b), (z, c)]), k)),
        )
    })
}

fn point() -> impl Strategy<Value = [f64; 3]> {
    [-1.5f64..1.5, -1.5f64..1.5, -1.5f64..1.5]
}

fn ev(p: &Polynomial, at: &[f64; 3]) -> f64 {
    p.evaluate_at(&vars(), at).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn ring_operations_commute_with_evaluation(p in poly(), q in poly(), r in poly(), at in point()) {
        let (a, b, c) = (ev(&p, &at), ev(&q, &at), ev(&r, &at));
        prop_assert!(close(ev(&(&p + &q), &at), a + b));
        prop_assert!(close(ev(&(&p - &q), &at), a - b));
        prop_assert!(close(ev(&(&p * &q), &at), a * b));
        prop_assert!(close(ev(&(&p * &(&q + &r)), &at), a * (b + c)));
        prop_assert!(close(ev(&(&p * &q), &at), ev(&(&q * &p), &at)));
        prop_assert!((&p - &p).is_zero());
    }

    #[test]
    fn degree_of_product(p in poly(), q in poly()) {
        let pq = &p * &q;
        if !p.is_zero() && !q.is_zero() && !pq.is_zero() {
            prop_assert!(pq.degree() <= p.degree() + q.degree());
        }
    }

    #[test]
    fn product_rule(p in poly(), q in poly(), at in point()) {
        let x = vars()[0];
        let lhs = (&p * &q).differentiate(x);
        let rhs = &(&p.differentiate(x) * &q) + &(&p * &q.differentiate(x));
        prop_assert!(close(ev(&lhs, &at), ev(&rhs, &at)));
    }

    #[test]
    fn derivative_matches_finite_difference(p in poly(), at in point()) {
        let y = vars()[1];
        let h = 1e-5;
        let (mut lo, mut hi) = (at, at);
        lo[1] -= h;
        hi[1] += h;
        let fd = (ev(&p, &hi) - ev(&p, &lo)) / (2.0 * h);
        prop_assert!((ev(&p.differentiate(y), &at) - fd).abs() <= 1e-5 * (1.0 + fd.abs()));
    }

    #[test]
    fn substitution_is_composition(p in poly(), q in poly(), at in point()) {
        let [x, y, z] = vars();
        let map: HashMap<Var, Polynomial> = [(x, q.clone())].into_iter().collect();
        let composed = p.substitute(&map);
        let inner = [ev(&q, &at), at[1], at[2]];
        prop_assert!(close(ev(&composed, &at), ev(&p, &inner)));
        let _ = (y, z);
    }

    #[test]
    fn display_parse_round_trip(p in poly(), at in point()) {
        let back: Polynomial = p.to_string().parse().unwrap();
        prop_assert!(close(ev(&back, &at), ev(&p, &at)));
    }
}

#[test]
fn gaussian_moments() {
    let want = [1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0, 0.0, 105.0];
    for (n, w) in want.iter().enumerate() {
        assert_eq!(gaussian_moment(n as u32), *w);
    }
}

#[test]
fn parse_errors_report_position() {
    assert!("x + * y".parse::<Polynomial>().is_err());
    assert!("(x + 1".parse::<Polynomial>().is_err());
}
