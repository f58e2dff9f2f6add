//! Controller synthesis with an affine barrier on the discrete-time
//! population model, followed by an independent closed-loop verify.

use stochastic_barrier::engine::{synthesize, verify, Grid, SynthesisConfig, VerifyConfig};
use stochastic_barrier::presets;

fn main() {
    let problem = presets::load("dt-pop-linear").unwrap().unwrap().with_sigma(1.0);
    let vcfg = VerifyConfig::new(problem.time(), 1);
    let scfg = SynthesisConfig::new(0.10, 2.0, 2);
    let r = synthesize(&problem, &scfg, &vcfg).expect("controller");
    for t in &r.trace {
        println!("iter {:>2}: beta {:?} bound {:?} c {:?} {}", t.iteration.unwrap_or(0), t.beta, t.bound, t.c, t.status);
    }
    println!("c* = {:.4}, u = {}", r.c, r.controller[0]);

    let closed = problem.with_controller(r.controller.clone()).unwrap();
    let check = verify(&closed, &VerifyConfig { grid: Grid::single(2.0), ..vcfg }).unwrap();
    println!("re-verified bound {:.4}", check.certificate.reported().value);
}
