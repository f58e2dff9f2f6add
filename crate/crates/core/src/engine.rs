//! Verification by line search over the decay rate, alternating controller
//! synthesis, and the linear-gain binary search.
//!
//! All SOS programs are solved in normalized coordinates (the domain's
//! bounding box mapped onto `[-1, 1]^n`) and certificates are mapped back to
//! the original state before bounds are evaluated or reported.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use sbarrier_sdp::{InteriorPoint, SdpBackend, Settings};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{BoundError, Certificate};
use crate::model::{AffineMap, ModelError, SafetyProblem, TimeDomain};
use crate::poly::{Polynomial, Var};
use crate::sosprog::{
    build_controller_program_with_basis, build_ct_program, build_dt_program, check_certificate, controller_basis,
    Degrees, SoundnessReport, SosError, UnsafeComplement,
};

/// Defect tolerance for controller candidates.
const CANDIDATE_TOL: f64 = 1e-2;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("no certificate on any of {tried} grid points (last failure: {last})")]
    AllInfeasible { tried: usize, last: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Sos(#[from] SosError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error("no controller reached the goal after {iterations} iterations (best bound {best_bound:.4})")]
    NoControllerFound { iterations: usize, best_bound: f64, trace: Vec<TraceRecord> },
    #[error("goal not achievable with gains up to {k_max}")]
    NotAchievable { k_max: f64 },
}

/// Inclusive grid `lower, lower + step, ..., upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lower: f64,
    pub upper: f64,
    pub step: f64,
}

impl Grid {
    pub fn new(lower: f64, upper: f64, step: f64) -> Result<Self, EngineError> {
        let g = Grid { lower, upper, step };
        g.check()?;
        Ok(g)
    }

    pub fn single(alpha: f64) -> Self {
        Grid { lower: alpha, upper: alpha, step: 1.0 }
    }

    /// `[0, 5]` step 0.05 in continuous time, `[1, 3]` step 0.05 in discrete time.
    pub fn default_for(time: TimeDomain) -> Self {
        match time {
            TimeDomain::Continuous => Grid { lower: 0.0, upper: 5.0, step: 0.05 },
            TimeDomain::Discrete => Grid { lower: 1.0, upper: 3.0, step: 0.05 },
        }
    }

    fn check(&self) -> Result<(), EngineError> {
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower <= self.upper) {
            return Err(EngineError::Config(format!("grid bounds {}..{} are not ordered", self.lower, self.upper)));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(EngineError::Config(format!("grid step must be positive, got {}", self.step)));
        }
        Ok(())
    }

    /// Points computed as `lower + k * step` to avoid drift.
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.upper - self.lower) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.lower + k as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub grid: Grid,
    pub degrees: Degrees,
    pub settings: Settings,
    /// Upper limit on gamma in the barrier program, when tighter than the
    /// default open limit below 1.
    pub gamma_max: Option<f64>,
}

impl VerifyConfig {
    pub fn new(time: TimeDomain, deg_b: u32) -> Self {
        VerifyConfig {
            grid: Grid::default_for(time),
            degrees: Degrees::new(deg_b),
            settings: Settings::default(),
            gamma_max: None,
        }
    }
}

/// One line of the JSON-lines trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub stage: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iteration: Option<usize>,
    pub alpha: f64,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub bound: Option<f64>,
    pub c: Option<f64>,
    pub status: String,
    pub wall_ms: f64,
}

impl TraceRecord {
    fn new(stage: &str, alpha: f64) -> Self {
        TraceRecord {
            stage: stage.into(),
            iteration: None,
            alpha,
            beta: None,
            gamma: None,
            bound: None,
            c: None,
            status: String::new(),
            wall_ms: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Verification {
    pub certificate: Certificate,
    pub complement: UnsafeComplement,
    pub trace: Vec<TraceRecord>,
    /// Grid points that produced a certificate.
    pub solved: usize,
}

impl Verification {
    /// Sampling checks of the certificate against the original problem.
    pub fn soundness(&self, problem: &SafetyProblem, samples: usize, seed: u64) -> Result<SoundnessReport, SosError> {
        let c = &self.certificate;
        check_certificate(problem, &c.barrier, c.alpha, c.beta, c.gamma, self.complement, samples, seed)
    }
}

struct PointResult {
    certificate: Certificate,
    complement: UnsafeComplement,
}

fn solve_point(
    normalized: &SafetyProblem,
    map: &AffineMap,
    original: &SafetyProblem,
    alpha: f64,
    cfg: &VerifyConfig,
    backend: &dyn SdpBackend,
) -> Result<PointResult, EngineError> {
    let mut bp = match normalized.time() {
        TimeDomain::Continuous => build_ct_program(normalized, alpha, &cfg.degrees)?,
        TimeDomain::Discrete => build_dt_program(normalized, alpha, &cfg.degrees)?,
    };
    if let Some(cap) = cfg.gamma_max {
        let g = &mut bp.program.scalars[bp.gamma];
        g.upper = Some(g.upper.map_or(cap, |u| u.min(cap)));
    }
    let sol = bp.program.solve(backend, &cfg.settings)?;
    let cert = bp.certified(&sol);
    let certificate = Certificate::new(
        map.push(&cert.barrier),
        original.state().to_vec(),
        alpha,
        cert.beta,
        cert.gamma,
        original.horizon,
    )?;
    Ok(PointResult { certificate, complement: bp.complement })
}

/// Solves the barrier program at every grid point and keeps the smallest
/// bound; ties go to the smaller decay rate. Failed points are skipped.
pub fn verify(problem: &SafetyProblem, cfg: &VerifyConfig) -> Result<Verification, EngineError> {
    verify_with(problem, cfg, &InteriorPoint)
}

pub fn verify_with(
    problem: &SafetyProblem,
    cfg: &VerifyConfig,
    backend: &dyn SdpBackend,
) -> Result<Verification, EngineError> {
    cfg.grid.check()?;
    if problem.uses_sigma() {
        return Err(ModelError::UnboundSigma.into());
    }
    problem.validate()?;
    let (normalized, map) = problem.normalized()?;
    let points = cfg.grid.points();
    let results: Vec<(TraceRecord, Result<PointResult, EngineError>)> = points
        .par_iter()
        .map(|&alpha| {
            let t0 = Instant::now();
            let r = solve_point(&normalized, &map, problem, alpha, cfg, backend);
            let mut rec = TraceRecord::new("verify", alpha);
            rec.wall_ms = t0.elapsed().as_secs_f64() * 1e3;
            match &r {
                Ok(p) => {
                    let c = &p.certificate;
                    rec.beta = Some(c.beta);
                    rec.gamma = Some(c.gamma);
                    rec.bound = Some(c.bound.value);
                    rec.status = "ok".into();
                }
                Err(e) => {
                    log::debug!("alpha = {alpha}: {e}");
                    rec.status = e.to_string();
                }
            }
            (rec, r)
        })
        .collect();

    // Precondition failures are the same at every point; surface them.
    if let Some((_, Err(e))) = results.first() {
        let structural =
            matches!(e, EngineError::Sos(SosError::Precondition(_) | SosError::DegreeOverflow { .. } | SosError::OddDegree(_)));
        if structural && results.iter().all(|(_, r)| r.is_err()) {
            let (_, r) = results.into_iter().next().expect("nonempty");
            return Err(r.err().expect("error"));
        }
    }

    let mut best: Option<PointResult> = None;
    let mut trace = Vec::with_capacity(results.len());
    let mut solved = 0;
    let mut last = String::from("none");
    for (rec, r) in results {
        trace.push(rec);
        match r {
            Ok(p) => {
                solved += 1;
                let key = (p.certificate.bound.value, p.certificate.bound.raw);
                let better = best.as_ref().is_none_or(|b| {
                    let bk = (b.certificate.bound.value, b.certificate.bound.raw);
                    key.0 < bk.0 || (key.0 == bk.0 && key.1 < bk.1)
                });
                if better {
                    best = Some(p);
                }
            }
            Err(e) => last = e.to_string(),
        }
    }
    let best = best.ok_or(EngineError::AllInfeasible { tried: points.len(), last })?;
    let mut certificate = best.certificate;
    if problem.pointwise {
        if let Some(x0) = &problem.initial_point {
            certificate = certificate.with_pointwise(x0)?;
        }
    }
    Ok(Verification { certificate, complement: best.complement, trace, solved })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub p_goal: f64,
    pub epsilon: f64,
    pub deg_u: u32,
    pub a_inc: f64,
    pub a_dec: f64,
    pub max_iterations: usize,
    /// Fixed decay rate (`alpha~` in discrete time).
    pub alpha: f64,
    /// Optional upper limit on gamma in every barrier step. A system whose
    /// open loop fails almost surely otherwise seeds the loop with a barrier
    /// at gamma ~ 1.
    pub gamma_max: Option<f64>,
}

impl SynthesisConfig {
    pub fn new(p_goal: f64, alpha: f64, deg_u: u32) -> Self {
        SynthesisConfig {
            p_goal,
            epsilon: 0.02,
            deg_u,
            a_inc: 1.5,
            a_dec: 0.5,
            max_iterations: 30,
            alpha,
            gamma_max: None,
        }
    }

    fn check(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::Config(m.into()));
        if !(self.p_goal > 0.0 && self.p_goal < 1.0) {
            return bad("P_goal must lie in (0, 1)");
        }
        if !(self.epsilon >= 0.0) {
            return bad("epsilon must be >= 0");
        }
        if !(self.a_inc > 1.0) {
            return bad("a_inc must exceed 1");
        }
        if !(self.a_dec > 0.0 && self.a_dec < 1.0) {
            return bad("a_dec must lie in (0, 1)");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive");
        }
        Ok(())
    }
}

/// Initial value for the best controller cost.
pub const C_STAR_INIT: f64 = 1e9;

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub controller: Vec<Polynomial>,
    pub c: f64,
    /// Per input, the symmetric `Q_j` with `u_j = z^T Q_j z`.
    pub q: Vec<DMatrix<f64>>,
    pub z: Vec<Polynomial>,
    pub certificate: Certificate,
    pub complement: UnsafeComplement,
    pub trace: Vec<TraceRecord>,
    pub iterations: usize,
}

struct ControllerStep {
    u: Vec<Polynomial>,
    c: f64,
    q: Vec<DMatrix<f64>>,
}

fn compute_controller(
    problem: &SafetyProblem,
    barrier: &Polynomial,
    alpha: f64,
    beta: f64,
    deg_u: u32,
    cfg: &VerifyConfig,
    backend: &dyn SdpBackend,
) -> Result<ControllerStep, EngineError> {
    let (normalized, map) = problem.normalized()?;
    let z_x = controller_basis(deg_u, problem.state());
    let z_y: Vec<Polynomial> = z_x.iter().map(|z| map.pull(z)).collect();
    let b_y = map.pull(barrier);
    let cp = build_controller_program_with_basis(&normalized, &b_y, alpha, beta, z_y, &cfg.degrees)?;
    // The controller is only a candidate; the closed-loop verify that
    // follows certifies it, so a rough solve is enough here.
    let sol = cp.program.solve_with_tol(backend, &cfg.settings, CANDIDATE_TOL)?;
    log::debug!(
        "controller step: status {:?}, defect {:.2e}, gap {:.2e}, c {:.4}",
        sol.status,
        sol.max_residual,
        sol.gap,
        sol.scalar(cp.c)
    );
    let u: Vec<Polynomial> = cp.controller(&sol).iter().map(|u| map.push(u)).collect();
    let k = z_x.len();
    let q = cp
        .q
        .iter()
        .map(|entries| {
            let mut m = DMatrix::zeros(k, k);
            for &(a, b, id) in entries {
                m[(a, b)] = sol.scalar(id);
                m[(b, a)] = sol.scalar(id);
            }
            m
        })
        .collect();
    Ok(ControllerStep { u, c: sol.scalar(cp.c), q })
}

/// Alternates controller and barrier programs at a fixed decay rate,
/// rescaling `beta` toward the goal after each barrier solve.
///
/// Iteration 1 verifies the open loop (`u = 0`). Each later iteration solves
/// for the cheapest controller (entry bound `c`) meeting the dynamics
/// condition with the current `B` and rescaled `beta`, then re-verifies with
/// that controller. The cheapest controller whose bound is below `P_goal` is
/// kept. Stops when the kept bound is within `epsilon` of the goal or after
/// `max_iterations`.
pub fn synthesize(
    problem: &SafetyProblem,
    cfg: &SynthesisConfig,
    verify_cfg: &VerifyConfig,
) -> Result<SynthesisResult, EngineError> {
    synthesize_with(problem, cfg, verify_cfg, &InteriorPoint)
}

pub fn synthesize_with(
    problem: &SafetyProblem,
    cfg: &SynthesisConfig,
    verify_cfg: &VerifyConfig,
    backend: &dyn SdpBackend,
) -> Result<SynthesisResult, EngineError> {
    cfg.check()?;
    let p = problem.system.inputs();
    if p == 0 {
        return Err(EngineError::Config("the system has no control inputs".into()));
    }
    if problem.time() == TimeDomain::Discrete && verify_cfg.degrees.barrier > 1 {
        return Err(SosError::Nonconvex(format!(
            "discrete-time synthesis needs an affine barrier, got degree {}",
            verify_cfg.degrees.barrier
        ))
        .into());
    }
    let vcfg = VerifyConfig { grid: Grid::single(cfg.alpha), gamma_max: cfg.gamma_max, ..*verify_cfg };
    let open = problem.with_controller(vec![Polynomial::zero(); p])?;
    let mut trace = Vec::new();

    let first = verify_with(&open, &vcfg, backend)?;
    let mut rec = first.trace[0].clone();
    rec.stage = "synthesize".into();
    rec.iteration = Some(1);
    rec.c = Some(0.0);
    trace.push(rec);

    let k = controller_basis(cfg.deg_u, problem.state()).len();
    let zero_q = vec![DMatrix::zeros(k, k); p];
    let z = controller_basis(cfg.deg_u, problem.state());
    let bound_of = |v: &Verification| v.certificate.reported().value;
    if bound_of(&first) < cfg.p_goal {
        return Ok(SynthesisResult {
            controller: open.controller.clone(),
            c: 0.0,
            q: zero_q,
            z,
            certificate: first.certificate,
            complement: first.complement,
            trace,
            iterations: 1,
        });
    }

    let mut best: Option<(ControllerStep, Verification)> = None;
    let (mut p_star, mut c_star) = (1.0, C_STAR_INIT);
    let mut barrier = first.certificate.barrier.clone();
    let mut beta = first.certificate.beta;
    let mut bound = bound_of(&first);
    let mut iterations = 1;
    while (best.is_none() || (p_star - cfg.p_goal).abs() > cfg.epsilon) && iterations < cfg.max_iterations {
        iterations += 1;
        beta *= if bound > cfg.p_goal { cfg.a_dec } else { cfg.a_inc };
        let t0 = Instant::now();
        let mut rec = TraceRecord::new("synthesize", cfg.alpha);
        rec.iteration = Some(iterations);
        let step = match compute_controller(problem, &barrier, cfg.alpha, beta, cfg.deg_u, &vcfg, backend) {
            Ok(s) => s,
            Err(e) => {
                // Too small a beta can make the controller program infeasible;
                // back off and try again.
                log::debug!("controller step {iterations} failed: {e}");
                rec.beta = Some(beta);
                rec.status = format!("controller: {e}");
                rec.wall_ms = t0.elapsed().as_secs_f64() * 1e3;
                trace.push(rec);
                bound = 0.0;
                continue;
            }
        };
        rec.c = Some(step.c);
        let closed = problem.with_controller(step.u.clone())?;
        match verify_with(&closed, &vcfg, backend) {
            Ok(v) => {
                let c = &v.certificate;
                barrier = c.barrier.clone();
                beta = c.beta;
                bound = bound_of(&v);
                rec.beta = Some(c.beta);
                rec.gamma = Some(c.gamma);
                rec.bound = Some(bound);
                rec.status = "ok".into();
                if bound < cfg.p_goal && step.c < c_star {
                    p_star = bound;
                    c_star = step.c;
                    best = Some((step, v));
                }
            }
            Err(e) => {
                log::debug!("barrier step {iterations} failed: {e}");
                rec.status = format!("barrier: {e}");
            }
        }
        rec.wall_ms = t0.elapsed().as_secs_f64() * 1e3;
        trace.push(rec);
    }
    match best {
        Some((step, v)) => Ok(SynthesisResult {
            controller: step.u,
            c: step.c,
            q: step.q,
            z,
            certificate: v.certificate,
            complement: v.complement,
            trace,
            iterations,
        }),
        None => Err(EngineError::NoControllerFound { iterations, best_bound: p_star, trace }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainConfig {
    pub p_goal: f64,
    pub k_max: f64,
    pub resolution: f64,
}

impl GainConfig {
    pub fn new(p_goal: f64) -> Self {
        GainConfig { p_goal, k_max: 20.0, resolution: 0.01 }
    }
}

#[derive(Debug, Clone)]
pub struct GainResult {
    pub k: f64,
    pub certificate: Certificate,
    pub trace: Vec<TraceRecord>,
}

/// Smallest `k` on the lattice `resolution * Z` in `[0, k_max]` for which
/// `u = -k x` verifies with reported bound `<= P_goal`, found by bisection
/// (assumes the certified bound is nonincreasing in `k`).
pub fn gain_search(
    problem: &SafetyProblem,
    gcfg: &GainConfig,
    verify_cfg: &VerifyConfig,
) -> Result<GainResult, EngineError> {
    let x: Var = match (problem.state(), problem.system.inputs()) {
        ([x], 1) => *x,
        _ => return Err(EngineError::Config("gain search needs a scalar state and a scalar input".into())),
    };
    if !(gcfg.resolution > 0.0 && gcfg.k_max >= 0.0) {
        return Err(EngineError::Config("gain search needs resolution > 0 and k_max >= 0".into()));
    }
    let mut trace = Vec::new();
    let mut attempt = |step: i64| -> Result<Option<Certificate>, EngineError> {
        let k = step as f64 * gcfg.resolution;
        let closed = problem.with_controller(vec![Polynomial::var(x).scale(-k)])?;
        let t0 = Instant::now();
        let mut rec = TraceRecord::new("gain", f64::NAN);
        rec.c = Some(k);
        let out = match verify(&closed, verify_cfg) {
            Ok(v) => {
                let b = v.certificate.reported().value;
                rec.alpha = v.certificate.alpha;
                rec.beta = Some(v.certificate.beta);
                rec.gamma = Some(v.certificate.gamma);
                rec.bound = Some(b);
                rec.status = "ok".into();
                (b <= gcfg.p_goal).then_some(v.certificate)
            }
            Err(EngineError::AllInfeasible { .. }) => {
                rec.status = "infeasible".into();
                None
            }
            Err(e) => return Err(e),
        };
        rec.wall_ms = t0.elapsed().as_secs_f64() * 1e3;
        trace.push(rec);
        Ok(out)
    };
    if let Some(c) = attempt(0)? {
        return Ok(GainResult { k: 0.0, certificate: c, trace });
    }
    let mut hi = (gcfg.k_max / gcfg.resolution).round() as i64;
    let mut hi_cert = attempt(hi)?.ok_or(EngineError::NotAchievable { k_max: gcfg.k_max })?;
    let mut lo = 0i64;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        match attempt(mid)? {
            Some(c) => {
                hi = mid;
                hi_cert = c;
            }
            None => lo = mid,
        }
    }
    Ok(GainResult { k: hi as f64 * gcfg.resolution, certificate: hi_cert, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points() {
        let g = Grid::new(0.0, 5.0, 0.05).unwrap();
        let p = g.points();
        assert_eq!(p.len(), 101);
        assert_eq!(p[0], 0.0);
        assert!((p[100] - 5.0).abs() < 1e-12);
        assert_eq!(Grid::single(1.3).points(), vec![1.3]);
        assert!(Grid::new(1.0, 0.0, 0.1).is_err());
        assert!(Grid::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn synthesis_config_checks() {
        let mut c = SynthesisConfig::new(0.1, 1.0, 2);
        assert!(c.check().is_ok());
        c.a_dec = 1.2;
        assert!(c.check().is_err());
    }
}
