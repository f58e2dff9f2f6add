//! Smallest linear feedback gain u = -k x meeting a probability goal on the
//! one-dimensional preset, for several barrier degrees.

use stochastic_barrier::engine::{gain_search, GainConfig, Grid, VerifyConfig};
use stochastic_barrier::presets;

fn main() {
    let problem = presets::load("ct-1d").unwrap().unwrap().with_sigma(1.0);
    for deg in [8, 12, 16] {
        let mut cfg = VerifyConfig::new(problem.time(), deg);
        // A coarser decay-rate grid keeps the example quick.
        cfg.grid = Grid::new(0.0, 5.0, 0.25).unwrap();
        match gain_search(&problem, &GainConfig::new(0.30), &cfg) {
            Ok(g) => println!("degree {deg:>2}: k* = {:.2} (bound {:.4}, {} verifies)", g.k, g.certificate.reported().value, g.trace.len()),
            Err(e) => println!("degree {deg:>2}: {e}"),
        }
    }
}
