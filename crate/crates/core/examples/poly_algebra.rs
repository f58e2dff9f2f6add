//! Polynomial parsing, arithmetic, calculus and Gaussian expectations.

use std::collections::HashMap;

use stochastic_barrier::poly::{NoiseSpec, Polynomial, Var};

fn main() {
    let (x, y, xi) = (Var::new("x"), Var::new("y"), Var::new("xi"));
    let p: Polynomial = "x^2*y - 3*x + 0.5".parse().unwrap();
    let q: Polynomial = "y - x".parse().unwrap();

    println!("p        = {p}");
    println!("q        = {q}");
    println!("p * q    = {}", &p * &q);
    println!("q^3      = {}", q.pow(3));
    println!("dp/dx    = {}", p.differentiate(x));
    println!("grad p   = {:?}", p.gradient(&[x, y]).iter().map(|g| g.to_string()).collect::<Vec<_>>());

    // Substitute x -> x + 0.1 xi and average over xi ~ N(0, 1).
    let shifted = p.substitute(&HashMap::from([(x, "x + 0.1*xi".parse().unwrap())]));
    let noise = NoiseSpec::new(vec![xi]).unwrap();
    println!("E[p(x + 0.1 xi)] = {}", shifted.gaussian_expectation(&noise));

    println!("p(1, 2)  = {}", p.evaluate_at(&[x, y], &[1.0, 2.0]).unwrap());
    let fast = p.compile(&[x, y]).unwrap();
    println!("compiled = {}", fast.eval(&[1.0, 2.0]));
}
