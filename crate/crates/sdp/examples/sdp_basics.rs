//! Builds a small SDP by hand, solves it, and round-trips it through the
//! sparse debug text format.
//!
//! Run with `cargo run -p sbarrier-sdp --example sdp_basics`.

use sbarrier_sdp::{solve, text, SdpProblem, Settings, VarRef};

fn main() {
    // Smallest eigenvalue of C = [[2, 1], [1, 3]] as max t s.t. C - t I ⪰ 0,
    // written as min -t with X = C - t I, X ⪰ 0.
    let mut p = SdpProblem::new();
    let t = p.add_free();
    let x = p.add_block(2);
    p.add_row(vec![(VarRef::psd(x, 0, 0), 1.0), (t, 1.0)], 2.0);
    p.add_row(vec![(VarRef::psd(x, 1, 1), 1.0), (t, 1.0)], 3.0);
    p.add_row(vec![(VarRef::psd(x, 0, 1), 1.0)], 1.0);
    p.objective.push((t, -1.0));

    let sol = solve(&p, &Settings::default());
    let exact = (5.0 - 5f64.sqrt()) / 2.0;
    println!("status      {:?} after {} iterations", sol.status, sol.iterations);
    println!("lambda_min  {:.10} (exact {exact:.10})", sol.value(t));
    println!("residuals   primal {:.1e}, dual {:.1e}, gap {:.1e}", sol.primal_residual, sol.dual_residual, sol.gap);

    let dump = text::write(&p);
    println!("\n{dump}");
    let back = text::read(&dump).expect("the writer's output parses");
    assert_eq!(back, p);
}
