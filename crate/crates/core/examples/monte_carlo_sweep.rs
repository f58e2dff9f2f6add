//! Monte Carlo failure estimates over a sigma range, written as CSV, plus
//! one recorded stopped trajectory.

use stochastic_barrier::montecarlo::{sweep, trajectory, write_csv, SimConfig};
use stochastic_barrier::presets;

fn main() {
    let template = presets::load("ct-1d").unwrap().unwrap();
    let x0 = template.initial_point.clone().unwrap();
    let cfg = SimConfig::new(5000, 3);
    let sigmas = [0.5, 1.0, 1.5, 2.0];
    let rows = sweep(&template, &x0, &sigmas, &cfg).unwrap();
    write_csv(std::io::stdout(), &rows).unwrap();

    let path = trajectory(&template.with_sigma(1.5), &x0, &cfg, 0).unwrap();
    match path.stopped_at {
        Some(k) => println!(
            "trial 0 stopped at step {k} (t = {:.3}) at x = {:.4}, failed: {}",
            k as f64 * cfg.dt,
            path.states[k][0],
            path.failed
        ),
        None => println!("trial 0 stayed inside X; final x = {:.4}", path.states.last().unwrap()[0]),
    }
}
