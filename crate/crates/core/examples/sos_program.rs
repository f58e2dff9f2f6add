//! A hand-built SOS program: the largest c such that f - c is a sum of
//! squares, a certified lower bound on f = x^4 - 2x^2 + x + 1.

use stochastic_barrier::poly::{Polynomial, Var};
use stochastic_barrier::sosprog::{Dec, LinExpr, PolyExpr, SosProgram};
use sbarrier_sdp::{InteriorPoint, Settings};

fn main() {
    let x = Var::new("x");
    let f: Polynomial = "x^4 - 2*x^2 + x + 1".parse().unwrap();
    let mut prog = SosProgram::new(&[x]);
    let c = prog.scalar("c", None, None);
    let mut e = PolyExpr::from_poly(&f);
    e.add_scaled_poly(&Polynomial::constant(1.0), &LinExpr::term(Dec::Scalar(c), -1.0));
    prog.add_sos("f - c", e);
    prog.objective = LinExpr::term(Dec::Scalar(c), -1.0);

    let sol = prog.solve(&InteriorPoint, &Settings::default()).expect("feasible");
    let bound = sol.scalar(c);
    let grid_min = (0..=4000)
        .map(|k| -2.0 + k as f64 * 1e-3)
        .map(|v| f.evaluate_at(&[x], &[v]).unwrap())
        .fold(f64::INFINITY, f64::min);
    println!("SOS lower bound {bound:.6}, grid minimum {grid_min:.6}");
    println!("Gram matrix of f - c:\n{:.4}", sol.constraint_grams[0]);
    println!("lifted SDP:\n{}", prog.export_sdp());
}
