//! Independent sampling oracles shared by integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use stochastic_barrier::model::{bounding_box, SafetyProblem};
use stochastic_barrier::poly::{Polynomial, Var};

/// Test barrier of degree 4 mixing every state variable.
pub fn test_barrier(vars: &[Var]) -> Polynomial {
    let sum = vars.iter().fold(Polynomial::zero(), |acc, &v| &acc + &Polynomial::var(v));
    let first = Polynomial::var(vars[0]);
    &(&sum.pow(4).scale(0.1) + &first.pow(2)) + &Polynomial::constant(0.5)
}

/// Exact `E[B(F(x) + G(x) xi)]` as a polynomial in the state.
pub fn exact_expectation(problem: &SafetyProblem, b: &Polynomial) -> Polynomial {
    let next = problem.successor().unwrap();
    let map: HashMap<Var, Polynomial> = problem.state().iter().copied().zip(next).collect();
    b.substitute(&map).gaussian_expectation(&problem.system.noise())
}

/// Sample mean and standard error of `B(F(x) + G(x) xi)` at a fixed state.
pub fn sampled_expectation(problem: &SafetyProblem, b: &Polynomial, x: &[f64], draws: usize, seed: u64) -> (f64, f64) {
    let noise = problem.system.noise();
    let mut vars: Vec<Var> = problem.state().to_vec();
    vars.extend_from_slice(noise.vars());
    let next: Vec<_> = problem.successor().unwrap().iter().map(|p| p.compile(&vars).unwrap()).collect();
    let bc = b.compile(problem.state()).unwrap();
    let m = noise.vars().len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = x.to_vec();
    buf.resize(x.len() + m, 0.0);
    let mut y = vec![0.0; x.len()];
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..draws {
        for k in 0..m {
            buf[x.len() + k] = rng.sample(StandardNormal);
        }
        for (yi, f) in y.iter_mut().zip(&next) {
            *yi = f.eval(&buf);
        }
        let v = bc.eval(&y);
        sum += v;
        sq += v * v;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = (sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Uniform states in the domain's bounding box.
pub fn random_states(problem: &SafetyProblem, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let bbox = bounding_box(&problem.domain, problem.state()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| bbox.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect()).collect()
}
