//! Discrete-time verification of the population model with a degree-8
//! barrier, next to a Monte Carlo estimate from the preset start point.

use stochastic_barrier::engine::{verify, VerifyConfig};
use stochastic_barrier::montecarlo::{simulate, SimConfig};
use stochastic_barrier::presets;

fn main() {
    let template = presets::load("dt-pop").unwrap().unwrap();
    let x0 = template.initial_point.clone().unwrap();
    for sigma in [0.1, 0.2, 0.3] {
        let problem = template.with_sigma(sigma);
        let v = verify(&problem, &VerifyConfig::new(problem.time(), 8)).expect("certificate");
        let mc = simulate(&problem, &x0, &SimConfig::new(5000, 11)).unwrap();
        let b = v.certificate.bound;
        println!(
            "sigma {sigma}: bound {:.4} (raw {:.4}, alpha~ {}), MC {:.4} [{:.4}, {:.4}]",
            b.value, b.raw, v.certificate.alpha, mc.estimate, mc.ci_low, mc.ci_high
        );
    }
}
