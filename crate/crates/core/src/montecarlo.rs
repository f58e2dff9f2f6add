//! Monte Carlo estimation of failure probabilities for the stopped process.
//!
//! Each trial starts at `x0`, steps the closed-loop system (Euler–Maruyama in
//! continuous time, exact recursion in discrete time) and stops at the first
//! sampled state outside the interior of X. A trial fails when a sampled
//! state lies in Xu. Crossings between continuous-time samples are not
//! detected, so the estimate is biased slightly low.
//!
//! Trial `k` draws from its own ChaCha8 stream (`seed`, stream `k`), so the
//! failure count does not depend on scheduling or thread count.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::inv_beta_reg;
use thiserror::Error;

use crate::model::{Horizon, ModelError, SafetyProblem, TimeDomain};
use crate::poly::CompiledPoly;

/// Membership slack for the `x0 in X0` precondition.
pub const X0_SLACK: f64 = 1e-9;

/// Name of the random generator, recorded in run metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.3), one stream per trial";

#[derive(Debug, Error)]
pub enum McError {
    #[error("x0 = {0:?} is not in the initial set")]
    NotInitial(Vec<f64>),
    #[error("invalid simulation settings: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub trials: usize,
    /// Euler–Maruyama step; ignored in discrete time.
    pub dt: f64,
    pub seed: u64,
    /// Two-sided confidence level of the Clopper–Pearson interval.
    pub confidence: f64,
}

impl SimConfig {
    pub fn new(trials: usize, seed: u64) -> Self {
        SimConfig { trials, dt: 1e-3, seed, confidence: 0.99 }
    }

    fn check(&self, horizon: Horizon) -> Result<(), McError> {
        if self.trials == 0 {
            return Err(McError::Config("trials must be >= 1".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(McError::Config(format!("confidence {} not in (0, 1)", self.confidence)));
        }
        if let Horizon::Time(t) = horizon {
            if !(self.dt > 0.0 && self.dt <= t) {
                return Err(McError::Config(format!("dt = {} must lie in (0, T = {t}]", self.dt)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub failures: usize,
    pub trials: usize,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

impl McEstimate {
    pub fn new(failures: usize, trials: usize, confidence: f64, seed: u64) -> Self {
        let (ci_low, ci_high) = clopper_pearson(failures, trials, confidence);
        McEstimate { failures, trials, estimate: failures as f64 / trials as f64, ci_low, ci_high, seed }
    }
}

/// Exact binomial interval for `k` successes in `n` trials.
pub fn clopper_pearson(k: usize, n: usize, confidence: f64) -> (f64, f64) {
    assert!(k <= n && n > 0, "need 0 <= k <= n and n > 0");
    let tail = (1.0 - confidence) / 2.0;
    let (kf, nf) = (k as f64, n as f64);
    let low = if k == 0 {
        0.0
    } else {
        inv_beta_reg(kf, nf - kf + 1.0, tail)
    };
    let high = if k == n {
        1.0
    } else {
        inv_beta_reg(kf + 1.0, nf - kf, 1.0 - tail)
    };
    (low, high)
}

/// One simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Sampled states, starting with `x0`; one entry per step, frozen after
    /// the stopping step.
    pub states: Vec<Vec<f64>>,
    pub failed: bool,
    /// Index into `states` of the first sample outside Int(X) or in Xu.
    pub stopped_at: Option<usize>,
}

/// The closed-loop system compiled for fast stepping.
struct Stepper {
    time: TimeDomain,
    steps: usize,
    h: f64,
    drift: Vec<CompiledPoly>,
    diffusion: Vec<Vec<CompiledPoly>>,
    domain: Vec<CompiledPoly>,
    unsafe_set: Vec<CompiledPoly>,
    noise_dim: usize,
}

enum Event {
    Continue,
    Exit,
    Fail,
}

impl Stepper {
    fn new(problem: &SafetyProblem, dt: f64) -> Result<Self, McError> {
        if problem.uses_sigma() {
            return Err(ModelError::UnboundSigma.into());
        }
        problem.validate()?;
        let vars = problem.state();
        let compile = |p: &crate::poly::Polynomial| {
            p.compile(vars).map_err(|e| McError::Model(ModelError::Invalid(e.to_string())))
        };
        let (steps, h) = match problem.horizon {
            Horizon::Time(t) => {
                let steps = ((t / dt) - 1e-9).ceil().max(1.0) as usize;
                (steps, t / steps as f64)
            }
            Horizon::Steps(n) => (n as usize, 1.0),
        };
        Ok(Stepper {
            time: problem.time(),
            steps,
            h,
            drift: problem.closed_loop_drift()?.iter().map(compile).collect::<Result<_, _>>()?,
            diffusion: problem
                .system
                .diffusion
                .iter()
                .map(|row| row.iter().map(compile).collect::<Result<Vec<_>, _>>())
                .collect::<Result<_, _>>()?,
            domain: problem.domain.inequalities.iter().map(compile).collect::<Result<_, _>>()?,
            unsafe_set: problem.unsafe_set.inequalities.iter().map(compile).collect::<Result<_, _>>()?,
            noise_dim: problem.system.noise_dim(),
        })
    }

    fn classify(&self, x: &[f64]) -> Event {
        if self.unsafe_set.iter().all(|s| s.eval(x) >= 0.0) {
            Event::Fail
        } else if self.domain.iter().any(|s| !(s.eval(x) > 0.0)) {
            Event::Exit
        } else {
            Event::Continue
        }
    }

    fn advance(&self, x: &[f64], noise: &[f64], out: &mut [f64]) {
        let sqrt_h = self.h.sqrt();
        for (i, o) in out.iter_mut().enumerate() {
            let f = self.drift[i].eval(x);
            let g: f64 = self.diffusion[i].iter().zip(noise).map(|(s, xi)| s.eval(x) * xi).sum();
            *o = match self.time {
                TimeDomain::Continuous => x[i] + f * self.h + g * sqrt_h,
                TimeDomain::Discrete => f + g,
            };
        }
    }

    fn rng(seed: u64, trial: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        rng
    }

    /// Runs one trial; `record` receives every sampled state.
    fn trial(&self, x0: &[f64], seed: u64, trial: u64, mut record: impl FnMut(&[f64], Option<bool>)) -> bool {
        let mut rng = Self::rng(seed, trial);
        let mut x = x0.to_vec();
        let mut next = vec![0.0; x.len()];
        let mut noise = vec![0.0; self.noise_dim];
        // x0 itself may sit on the boundary of X or in Xu.
        match self.classify(&x) {
            Event::Fail => {
                record(&x, Some(true));
                return true;
            }
            Event::Exit => {
                record(&x, Some(false));
                return false;
            }
            Event::Continue => record(&x, None),
        }
        for _ in 0..self.steps {
            for v in noise.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            self.advance(&x, &noise, &mut next);
            std::mem::swap(&mut x, &mut next);
            match self.classify(&x) {
                Event::Fail => {
                    record(&x, Some(true));
                    return true;
                }
                Event::Exit => {
                    record(&x, Some(false));
                    return false;
                }
                Event::Continue => record(&x, None),
            }
        }
        false
    }
}

fn check_x0(problem: &SafetyProblem, x0: &[f64]) -> Result<(), McError> {
    if x0.len() != problem.state().len() || !problem.initial.contains(problem.state(), x0, X0_SLACK) {
        return Err(McError::NotInitial(x0.to_vec()));
    }
    Ok(())
}

fn run(problem: &SafetyProblem, x0: &[f64], cfg: &SimConfig) -> Result<McEstimate, McError> {
    cfg.check(problem.horizon)?;
    check_x0(problem, x0)?;
    let stepper = Stepper::new(problem, cfg.dt)?;
    let failures = (0..cfg.trials as u64)
        .into_par_iter()
        .filter(|&k| stepper.trial(x0, cfg.seed, k, |_, _| {}))
        .count();
    Ok(McEstimate::new(failures, cfg.trials, cfg.confidence, cfg.seed))
}

/// Euler–Maruyama estimate for a continuous-time problem.
pub fn simulate_ct(problem: &SafetyProblem, x0: &[f64], cfg: &SimConfig) -> Result<McEstimate, McError> {
    if problem.time() != TimeDomain::Continuous {
        return Err(ModelError::WrongTimeDomain { op: "simulate_ct", expected: TimeDomain::Continuous }.into());
    }
    run(problem, x0, cfg)
}

/// Exact-recursion estimate for a discrete-time problem.
pub fn simulate_dt(problem: &SafetyProblem, x0: &[f64], cfg: &SimConfig) -> Result<McEstimate, McError> {
    if problem.time() != TimeDomain::Discrete {
        return Err(ModelError::WrongTimeDomain { op: "simulate_dt", expected: TimeDomain::Discrete }.into());
    }
    run(problem, x0, cfg)
}

/// Dispatches on the problem's time domain.
pub fn simulate(problem: &SafetyProblem, x0: &[f64], cfg: &SimConfig) -> Result<McEstimate, McError> {
    match problem.time() {
        TimeDomain::Continuous => simulate_ct(problem, x0, cfg),
        TimeDomain::Discrete => simulate_dt(problem, x0, cfg),
    }
}

/// The path of trial `trial`, identical to the one counted by [`simulate`]
/// with the same seed. Padded with the frozen state up to the horizon.
pub fn trajectory(
    problem: &SafetyProblem,
    x0: &[f64],
    cfg: &SimConfig,
    trial: u64,
) -> Result<Trajectory, McError> {
    cfg.check(problem.horizon)?;
    check_x0(problem, x0)?;
    let stepper = Stepper::new(problem, cfg.dt)?;
    let mut states = Vec::with_capacity(stepper.steps + 1);
    let mut stopped_at = None;
    let failed = stepper.trial(x0, cfg.seed, trial, |x, stop| {
        if stop.is_some() {
            stopped_at = Some(states.len());
        }
        states.push(x.to_vec());
    });
    let last = states.last().cloned().expect("x0 is always recorded");
    states.resize(stepper.steps + 1, last);
    Ok(Trajectory { states, failed, stopped_at })
}

/// Seed of the `index`-th sweep entry.
pub fn sweep_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(index as u64)
}

/// One estimate per sigma on a template with the `sigma` placeholder; entry
/// `i` uses seed [`sweep_seed`]`(cfg.seed, i)`.
pub fn sweep(
    template: &SafetyProblem,
    x0: &[f64],
    sigmas: &[f64],
    cfg: &SimConfig,
) -> Result<Vec<(f64, McEstimate)>, McError> {
    sigmas
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let c = SimConfig { seed: sweep_seed(cfg.seed, i), ..*cfg };
            simulate(&template.with_sigma(s), x0, &c).map(|e| (s, e))
        })
        .collect()
}

#[derive(Serialize)]
struct CsvRow {
    sigma: f64,
    trials: usize,
    failures: usize,
    estimate: f64,
    ci_low: f64,
    ci_high: f64,
    seed: u64,
}

/// Writes `sigma,trials,failures,estimate,ci_low,ci_high,seed` rows.
pub fn write_csv<W: Write>(out: W, rows: &[(f64, McEstimate)]) -> Result<(), McError> {
    let mut w = csv::Writer::from_writer(out);
    for &(sigma, e) in rows {
        w.serialize(CsvRow {
            sigma,
            trials: e.trials,
            failures: e.failures,
            estimate: e.estimate,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            seed: e.seed,
        })?;
    }
    if rows.is_empty() {
        w.write_record(["sigma", "trials", "failures", "estimate", "ci_low", "ci_high", "seed"])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn clopper_pearson_edges() {
        assert_eq!(clopper_pearson(0, 1, 0.99).0, 0.0);
        assert_eq!(clopper_pearson(1, 1, 0.99).1, 1.0);
        let (lo, hi) = clopper_pearson(0, 10, 0.95);
        // (alpha / 2)^(1/n) closed form at k = 0
        assert!((hi - (1.0 - 0.025f64.powf(0.1))).abs() < 1e-10, "{hi} vs {}", 1.0 - 0.025f64.powf(0.1));
        assert_eq!(lo, 0.0);
        let (lo, hi) = clopper_pearson(5, 10, 0.95);
        assert!(lo < 0.5 && 0.5 < hi && (lo + hi - 1.0).abs() < 1e-10);
    }

    #[test]
    fn noiseless_decay_never_fails() {
        let p = presets::load("ct-1d").unwrap().unwrap().with_sigma(0.0);
        let e = simulate_ct(&p, &[0.2], &SimConfig::new(50, 1)).unwrap();
        assert_eq!(e.failures, 0);
    }

    #[test]
    fn preconditions() {
        let p = presets::load("ct-1d").unwrap().unwrap().with_sigma(1.0);
        assert!(matches!(simulate(&p, &[0.5], &SimConfig::new(10, 1)), Err(McError::NotInitial(_))));
        assert!(matches!(simulate(&p, &[0.1], &SimConfig::new(0, 1)), Err(McError::Config(_))));
        let mut c = SimConfig::new(10, 1);
        c.dt = 2.0;
        assert!(matches!(simulate(&p, &[0.1], &c), Err(McError::Config(_))));
        assert!(simulate_dt(&p, &[0.1], &SimConfig::new(10, 1)).is_err());
    }

    #[test]
    fn csv_columns() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[(0.5, McEstimate::new(3, 10, 0.99, 7))]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("sigma,trials,failures,estimate,ci_low,ci_high,seed\n0.5,10,3,0.3,"));
        assert!(text.trim_end().ends_with(",7"));
    }
}
