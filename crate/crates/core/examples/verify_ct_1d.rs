//! Continuous-time verification of the shipped one-dimensional preset:
//! the full decay-rate line search against the decay-free (alpha = 0)
//! baseline, plus sampling soundness checks.
//!
//! `cargo run --release --example verify_ct_1d -- 1.5`

use stochastic_barrier::engine::{verify, Grid, VerifyConfig};
use stochastic_barrier::presets;

fn main() {
    let sigma: f64 = std::env::args().nth(1).map_or(1.0, |s| s.parse().expect("sigma"));
    let problem = presets::load("ct-1d").unwrap().unwrap().with_sigma(sigma);

    let cfg = VerifyConfig::new(problem.time(), 16);
    let full = verify(&problem, &cfg).expect("certificate");
    let base = verify(&problem, &VerifyConfig { grid: Grid::single(0.0), ..cfg }).expect("certificate");

    let c = &full.certificate;
    println!("sigma {sigma}: {} of {} grid points solved", full.solved, full.trace.len());
    println!("  line search  bound {:.4} ({}, alpha {}, beta {:.4}, gamma {:.4})", c.bound.value, c.bound.branch, c.alpha, c.beta, c.gamma);
    println!("  alpha = 0    bound {:.4} (raw {:.4})", base.certificate.bound.value, base.certificate.bound.raw);
    println!("  B(x) = {}", c.barrier);

    let report = full.soundness(&problem, 10_000, 7).unwrap();
    for chk in &report.checks {
        println!("  check {:<9} worst slack {:+.2e} ({})", chk.name, chk.worst, if chk.passed { "ok" } else { "FAIL" });
    }
}
