//! Closed-form failure-probability bounds for certified barriers.
//!
//! Continuous time, horizon `T`:
//!
//! | branch   | applies when          | bound                                   |
//! |----------|-----------------------|-----------------------------------------|
//! | `bound1` | `a > 0`, `b/a <= 1`   | `1 - (1 - g) e^{-bT}`                   |
//! | `bound2` | `a > 0`, `b/a >= 1`   | `(g + (e^{bT} - 1) b/a) / e^{bT}`       |
//! | `bound3` | `a = 0`               | `g + bT`                                |
//!
//! Discrete time, `N` steps:
//!
//! | branch      | applies when                     | bound                                      |
//! |-------------|----------------------------------|--------------------------------------------|
//! | `disbound1` | `a > 1`, `b a / (a - 1) <= 1`    | `1 - (1 - g)(1 - b)^N`                     |
//! | `disbound2` | `a > 1`, `b a / (a - 1) > 1`     | `g a^{-N} + (1 - a^{-N}) a b / (a - 1)`    |
//! | `disbound3` | `a = 1`                          | `g + bN`                                   |
//!
//! Values above 1 are clamped and flagged as trivial.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::model::{Horizon, TimeDomain};
use crate::poly::{Polynomial, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("parameter out of range: {0}")]
    Range(String),
    #[error("horizon does not match the time domain")]
    Horizon,
    #[error("cannot evaluate the barrier at x0: {0}")]
    Evaluate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Bound1,
    Bound2,
    Bound3,
    DisBound1,
    DisBound2,
    DisBound3,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Bound1 => "bound1",
            Branch::Bound2 => "bound2",
            Branch::Bound3 => "bound3",
            Branch::DisBound1 => "disbound1",
            Branch::DisBound2 => "disbound2",
            Branch::DisBound3 => "disbound3",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundValue {
    /// Clamped to `[0, 1]`.
    pub value: f64,
    /// Before clamping.
    pub raw: f64,
    pub branch: Branch,
    /// True when `raw >= 1`, i.e. the bound says nothing.
    pub trivial: bool,
}

impl BoundValue {
    fn new(raw: f64, branch: Branch) -> Self {
        BoundValue { value: raw.clamp(0.0, 1.0), raw, branch, trivial: raw >= 1.0 }
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), BoundError> {
    if cond {
        Ok(())
    } else {
        Err(BoundError::Range(msg()))
    }
}

fn check_gamma(gamma: f64) -> Result<(), BoundError> {
    check((0.0..1.0).contains(&gamma), || format!("gamma = {gamma} not in [0, 1)"))
}

pub fn bound1(beta: f64, gamma: f64, t: f64) -> f64 {
    1.0 - (1.0 - gamma) * (-beta * t).exp()
}

pub fn bound2(alpha: f64, beta: f64, gamma: f64, t: f64) -> f64 {
    let e = (beta * t).exp();
    (gamma + (e - 1.0) * beta / alpha) / e
}

pub fn bound3(beta: f64, gamma: f64, t: f64) -> f64 {
    gamma + beta * t
}

pub fn ct_bound(alpha: f64, beta: f64, gamma: f64, t: f64) -> Result<BoundValue, BoundError> {
    check(alpha >= 0.0 && alpha.is_finite(), || format!("alpha = {alpha} must be >= 0"))?;
    check(beta >= 0.0 && beta.is_finite(), || format!("beta = {beta} must be >= 0"))?;
    check(t >= 0.0 && t.is_finite(), || format!("T = {t} must be >= 0"))?;
    check_gamma(gamma)?;
    if alpha == 0.0 {
        return Ok(BoundValue::new(bound3(beta, gamma, t), Branch::Bound3));
    }
    let ratio = beta / alpha;
    let out = if ratio < 1.0 {
        BoundValue::new(bound1(beta, gamma, t), Branch::Bound1)
    } else if ratio > 1.0 {
        BoundValue::new(bound2(alpha, beta, gamma, t), Branch::Bound2)
    } else {
        let (b1, b2) = (bound1(beta, gamma, t), bound2(alpha, beta, gamma, t));
        if b1 <= b2 {
            BoundValue::new(b1, Branch::Bound1)
        } else {
            BoundValue::new(b2, Branch::Bound2)
        }
    };
    Ok(out)
}

pub fn disbound1(beta: f64, gamma: f64, n: u32) -> f64 {
    1.0 - (1.0 - gamma) * (1.0 - beta).powi(n as i32)
}

pub fn disbound2(alpha: f64, beta: f64, gamma: f64, n: u32) -> f64 {
    let an = alpha.powi(-(n as i32));
    gamma * an + (1.0 - an) * alpha * beta / (alpha - 1.0)
}

pub fn disbound3(beta: f64, gamma: f64, n: u32) -> f64 {
    gamma + beta * n as f64
}

pub fn dt_bound(alpha: f64, beta: f64, gamma: f64, n: u32) -> Result<BoundValue, BoundError> {
    check(alpha >= 1.0 && alpha.is_finite(), || format!("alpha = {alpha} must be >= 1"))?;
    check((0.0..1.0).contains(&beta), || format!("beta = {beta} not in [0, 1)"))?;
    check_gamma(gamma)?;
    if alpha == 1.0 {
        return Ok(BoundValue::new(disbound3(beta, gamma, n), Branch::DisBound3));
    }
    if beta * alpha / (alpha - 1.0) <= 1.0 {
        Ok(BoundValue::new(disbound1(beta, gamma, n), Branch::DisBound1))
    } else {
        Ok(BoundValue::new(disbound2(alpha, beta, gamma, n), Branch::DisBound2))
    }
}

/// Dispatches on the horizon kind.
pub fn bound(alpha: f64, beta: f64, gamma: f64, horizon: Horizon) -> Result<BoundValue, BoundError> {
    match horizon {
        Horizon::Time(t) => ct_bound(alpha, beta, gamma, t),
        Horizon::Steps(n) => dt_bound(alpha, beta, gamma, n),
    }
}

/// The bound with `gamma` replaced by `B(x0)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointwiseBound {
    pub x0: Vec<f64>,
    pub barrier_at_x0: f64,
    pub bound: BoundValue,
    /// `B(x0) >= 1`: the certificate says nothing about this point.
    pub uncertified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub time: TimeDomain,
    pub barrier: Polynomial,
    #[serde(skip)]
    pub state: Vec<Var>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    #[serde(skip)]
    pub horizon: Horizon,
    pub bound: BoundValue,
    pub pointwise: Option<PointwiseBound>,
}

impl Certificate {
    pub fn new(
        barrier: Polynomial,
        state: Vec<Var>,
        alpha: f64,
        beta: f64,
        gamma: f64,
        horizon: Horizon,
    ) -> Result<Self, BoundError> {
        let time = match horizon {
            Horizon::Time(_) => TimeDomain::Continuous,
            Horizon::Steps(_) => TimeDomain::Discrete,
        };
        // A barrier may legitimately certify nothing (gamma >= 1, or a
        // discrete beta >= 1); record it as a trivial bound.
        let saturated = gamma >= 1.0 || (time == TimeDomain::Discrete && beta >= 1.0);
        let bound = if saturated && gamma.is_finite() && beta.is_finite() {
            let probe = bound(alpha, if time == TimeDomain::Discrete { beta.min(0.5) } else { beta }, 0.0, horizon)?;
            BoundValue { value: 1.0, raw: gamma.max(1.0), branch: probe.branch, trivial: true }
        } else {
            bound(alpha, beta, gamma, horizon)?
        };
        Ok(Certificate { time, barrier, state, alpha, beta, gamma, horizon, bound, pointwise: None })
    }

    /// Pointwise bound when one was computed, set-wise otherwise.
    pub fn reported(&self) -> BoundValue {
        self.pointwise.as_ref().map_or(self.bound, |p| p.bound)
    }

    pub fn with_pointwise(mut self, x0: &[f64]) -> Result<Self, BoundError> {
        self.pointwise = Some(pointwise_bound(&self, x0)?);
        Ok(self)
    }
}

/// Re-evaluates the certificate's bound with `gamma <- B(x0)`.
pub fn pointwise_bound(cert: &Certificate, x0: &[f64]) -> Result<PointwiseBound, BoundError> {
    let point: HashMap<Var, f64> = cert.state.iter().copied().zip(x0.iter().copied()).collect();
    let b0 = cert.barrier.evaluate(&point).map_err(|e| BoundError::Evaluate(e.to_string()))?;
    if b0 >= 1.0 {
        log::warn!("B(x0) = {b0} >= 1; x0 is not certified by this barrier");
        let branch = cert.bound.branch;
        return Ok(PointwiseBound {
            x0: x0.to_vec(),
            barrier_at_x0: b0,
            bound: BoundValue { value: 1.0, raw: b0, branch, trivial: true },
            uncertified: true,
        });
    }
    // A barrier is nonnegative on X; tiny negative values are solver round-off.
    let gamma = b0.max(0.0);
    let bound = bound(cert.alpha, cert.beta, gamma, cert.horizon)?;
    Ok(PointwiseBound { x0: x0.to_vec(), barrier_at_x0: b0, bound, uncertified: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        let b = ct_bound(0.0, 0.05, 0.1, 1.0).unwrap();
        assert_eq!(b.branch, Branch::Bound3);
        assert!((b.value - 0.15).abs() < 1e-12);
        let b = ct_bound(1.0, 1.0, 0.0, 1.0).unwrap();
        assert!((b.value - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        let b = ct_bound(1.0, 0.0, 0.2, 5.0).unwrap();
        assert_eq!(b.branch, Branch::Bound1);
        assert!((b.value - 0.2).abs() < 1e-12);
        let b = dt_bound(1.0, 0.02, 0.1, 3).unwrap();
        assert_eq!(b.branch, Branch::DisBound3);
        assert!((b.value - 0.16).abs() < 1e-12);
        let b = dt_bound(2.0, 0.1, 0.2, 2).unwrap();
        assert_eq!(b.branch, Branch::DisBound1);
        assert!((b.value - 0.352).abs() < 1e-12);
        let b = dt_bound(2.0, 0.6, 0.0, 1).unwrap();
        assert_eq!(b.branch, Branch::DisBound2);
        assert!((b.value - 0.6).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_parameters_are_rejected() {
        assert!(ct_bound(-1.0, 0.0, 0.0, 1.0).is_err());
        assert!(ct_bound(1.0, -0.1, 0.0, 1.0).is_err());
        assert!(ct_bound(1.0, 0.1, 1.0, 1.0).is_err());
        assert!(dt_bound(0.5, 0.1, 0.0, 1).is_err());
        assert!(dt_bound(2.0, 1.0, 0.0, 1).is_err());
    }

    #[test]
    fn large_values_are_clamped_and_flagged() {
        let b = ct_bound(0.0, 2.0, 0.5, 1.0).unwrap();
        assert_eq!(b.value, 1.0);
        assert_eq!(b.raw, 2.5);
        assert!(b.trivial);
    }

    #[test]
    fn pointwise_examples() {
        let x = Var::new("x");
        let barrier: Polynomial = "x^2".parse().unwrap();
        let cert = Certificate::new(barrier, vec![x], 0.0, 0.05, 0.3, Horizon::Time(1.0)).unwrap();
        let pw = pointwise_bound(&cert, &[0.05f64.sqrt()]).unwrap();
        assert!((pw.bound.value - 0.10).abs() < 1e-12);
        let zero = Certificate::new("x^2".parse().unwrap(), vec![x], 0.0, 0.0, 0.3, Horizon::Time(1.0)).unwrap();
        assert_eq!(pointwise_bound(&zero, &[0.0]).unwrap().bound.value, 0.0);
        let far = pointwise_bound(&cert, &[2.0]).unwrap();
        assert!(far.uncertified);
        assert_eq!(far.bound.value, 1.0);
    }
}
