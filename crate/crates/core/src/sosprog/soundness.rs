//! Pointwise sampling checks of a solved barrier against its defining
//! inequalities, independent of the SOS machinery.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{SosError, UnsafeComplement};
use crate::model::{partial_box, sample_sets, SafetyProblem, SemialgebraicSet, SetRole, TimeDomain};
use crate::poly::Polynomial;

/// Smallest accepted slack for each sampled inequality.
pub const SOUNDNESS_SLACK: f64 = -1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub samples: usize,
    /// Minimum of the slack (should be >= 0) over the samples.
    pub worst: f64,
    pub worst_point: Vec<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoundnessReport {
    pub checks: Vec<Check>,
}

impl SoundnessReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn run_check(
    name: &'static str,
    problem: &SafetyProblem,
    sets: &[&SemialgebraicSet],
    slack: &Polynomial,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Check, SosError> {
    let vars = problem.state();
    let dom = problem.domain_box()?;
    let mut bbox = dom.clone();
    for s in sets {
        for (b, p) in bbox.iter_mut().zip(partial_box(s, vars)) {
            if let Some((lo, hi)) = p {
                *b = (b.0.max(lo), b.1.min(hi));
            }
        }
    }
    let mut all: Vec<&SemialgebraicSet> = vec![&problem.domain];
    all.extend_from_slice(sets);
    let points = if bbox.iter().any(|(lo, hi)| lo > hi) {
        Vec::new()
    } else {
        sample_sets(rng, vars, &bbox, &all, count, count.saturating_mul(2000))
    };
    let f = slack.compile(vars).map_err(|e| SosError::Precondition(e.to_string()))?;
    let (mut worst, mut worst_point) = (f64::INFINITY, Vec::new());
    for x in &points {
        let v = f.eval(x);
        if v < worst || v.is_nan() {
            worst = v;
            worst_point = x.clone();
        }
    }
    Ok(Check { name, samples: points.len(), worst, worst_point, passed: !(worst < SOUNDNESS_SLACK) && !worst.is_nan() })
}

/// Samples `count` points from each of X, Xu, X0 and the dynamics region
/// and evaluates the four barrier conditions there.
///
/// `B >= 0` on X, `B >= 1` on Xu, `B <= gamma` on X0, and the dynamics
/// condition on X \ Xu (single unsafe inequality) or on X.
#[allow(clippy::too_many_arguments)]
pub fn check_certificate(
    problem: &SafetyProblem,
    barrier: &Polynomial,
    alpha: f64,
    beta: f64,
    gamma: f64,
    complement: UnsafeComplement,
    count: usize,
    seed: u64,
) -> Result<SoundnessReport, SosError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let one = Polynomial::constant(1.0);
    let dynamics = match problem.time() {
        TimeDomain::Continuous => {
            &(&problem.generator(barrier)?.scale(-1.0) - &barrier.scale(alpha)) + &Polynomial::constant(beta)
        }
        TimeDomain::Discrete => {
            &(&problem.step_expectation(barrier)?.scale(-1.0) + &barrier.scale(1.0 / alpha)) + &Polynomial::constant(beta)
        }
    };
    let outside = SemialgebraicSet {
        role: SetRole::Domain,
        inequalities: problem.unsafe_set.inequalities.iter().map(|s| s.scale(-1.0)).collect(),
    };
    let dyn_sets: Vec<&SemialgebraicSet> = match complement {
        UnsafeComplement::Multiplier => vec![&outside],
        UnsafeComplement::WholeDomain => vec![],
    };
    let checks = vec![
        run_check("domain", problem, &[], barrier, count, &mut rng)?,
        run_check("unsafe", problem, &[&problem.unsafe_set], &(barrier - &one), count, &mut rng)?,
        run_check(
            "initial",
            problem,
            &[&problem.initial],
            &(&Polynomial::constant(gamma) - barrier),
            count,
            &mut rng,
        )?,
        run_check("dynamics", problem, &dyn_sets, &dynamics, count, &mut rng)?,
    ];
    Ok(SoundnessReport { checks })
}
