//! Writing a problem file by hand, binding the `sigma` placeholder and
//! verifying it. The same text works with `sbarrier verify <file>`.

use stochastic_barrier::engine::{verify, VerifyConfig};
use stochastic_barrier::model::parse_problem;

const SOURCE: &str = "
# Noisy decay toward the origin in the plane.
[system]
time = continuous
state = x, y
drift = -x + y; -x - y
input = 0; 0
diffusion = sigma, 0; 0, sigma

[sets]
domain = 4 - x^2 - y^2
initial = 0.25 - x^2 - y^2
unsafe = x^2 + y^2 - 2.25

[horizon]
T = 1

[params]
sigma = 0.4
";

fn main() {
    let template = parse_problem(SOURCE).unwrap_or_else(|e| panic!("{e}"));
    let problem = template.bind_sigma(None).unwrap();
    let v = verify(&problem, &VerifyConfig::new(problem.time(), 6)).unwrap();
    let c = &v.certificate;
    println!("bound {:.4} at alpha {} ({})", c.bound.value, c.alpha, c.bound.branch);
    println!("normalized file:\n{}", problem.to_file_string());
}
