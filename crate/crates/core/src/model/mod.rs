//! Safety problems: dynamics, semialgebraic sets and horizon, plus the
//! generator (continuous time) and one-step expectation (discrete time)
//! applied to candidate barriers.

mod file;
mod geometry;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::poly::{NoiseSpec, Polynomial, Var};

pub use file::{parse_problem, FileError};
pub use geometry::{bounding_box, partial_box, sample_sets, AffineMap};

/// Name of the run-time noise-scale placeholder usable in problem files.
pub const SIGMA: &str = "sigma";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{op} requires a {expected} problem")]
    WrongTimeDomain { op: &'static str, expected: TimeDomain },
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("the `sigma` placeholder is unbound; pass a noise level")]
    UnboundSigma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeDomain {
    Continuous,
    Discrete,
}

impl fmt::Display for TimeDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TimeDomain::Continuous => "continuous",
            TimeDomain::Discrete => "discrete",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetRole {
    Domain,
    Initial,
    Unsafe,
}

impl fmt::Display for SetRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SetRole::Domain => "domain",
            SetRole::Initial => "initial",
            SetRole::Unsafe => "unsafe",
        })
    }
}

/// `{x : s_i(x) >= 0 for every i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemialgebraicSet {
    pub role: SetRole,
    pub inequalities: Vec<Polynomial>,
}

impl SemialgebraicSet {
    pub fn new(role: SetRole, inequalities: Vec<Polynomial>) -> Result<Self, ModelError> {
        if inequalities.is_empty() {
            return Err(ModelError::Invalid(format!("{role} set needs at least one inequality")));
        }
        Ok(SemialgebraicSet { role, inequalities })
    }

    /// Membership with `>= -slack` on every inequality.
    pub fn contains(&self, vars: &[Var], x: &[f64], slack: f64) -> bool {
        self.inequalities
            .iter()
            .all(|s| s.evaluate_at(vars, x).map(|v| v >= -slack).unwrap_or(false))
    }
}

/// `dx = (f + g u) dt + sigma dw` or `x+ = f + g u + sigma xi`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticSystem {
    pub time: TimeDomain,
    pub state: Vec<Var>,
    pub drift: Vec<Polynomial>,
    /// n rows of p entries.
    pub input: Vec<Vec<Polynomial>>,
    /// n rows of m entries; m is the noise dimension.
    pub diffusion: Vec<Vec<Polynomial>>,
}

impl StochasticSystem {
    pub fn n(&self) -> usize {
        self.state.len()
    }

    pub fn inputs(&self) -> usize {
        self.input.first().map_or(0, Vec::len)
    }

    pub fn noise_dim(&self) -> usize {
        self.diffusion.first().map_or(0, Vec::len)
    }

    /// Internal standard-normal variables used by the discrete-time
    /// expectation. Their names cannot be written in problem files.
    pub fn noise(&self) -> NoiseSpec {
        NoiseSpec::new((0..self.noise_dim()).map(|k| Var::new(&format!("xi#{k}"))).collect())
            .expect("distinct by construction")
    }

    fn validate(&self) -> Result<(), ModelError> {
        let n = self.n();
        if n == 0 {
            return Err(ModelError::Invalid("no state variables".into()));
        }
        for (i, v) in self.state.iter().enumerate() {
            if self.state[..i].contains(v) {
                return Err(ModelError::Invalid(format!("state variable `{v}` declared twice")));
            }
            if &*v.name() == SIGMA {
                return Err(ModelError::Invalid("`sigma` is reserved".into()));
            }
        }
        if self.drift.len() != n {
            return Err(ModelError::Dimension(format!("drift has {} entries, state has {n}", self.drift.len())));
        }
        for (what, m) in [("input map", &self.input), ("diffusion", &self.diffusion)] {
            if m.len() != n {
                return Err(ModelError::Dimension(format!("{what} has {} rows, state has {n}", m.len())));
            }
            if m.iter().any(|r| r.len() != m[0].len()) {
                return Err(ModelError::Dimension(format!("{what} rows differ in length")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    /// Seconds, continuous time.
    Time(f64),
    /// Steps, discrete time.
    Steps(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafetyProblem {
    pub system: StochasticSystem,
    pub domain: SemialgebraicSet,
    pub initial: SemialgebraicSet,
    pub unsafe_set: SemialgebraicSet,
    pub horizon: Horizon,
    /// One entry per input; all zero when absent from the file.
    pub controller: Vec<Polynomial>,
    /// Simulation start and, with `pointwise`, the point for the
    /// `gamma <- B(x0)` refinement.
    pub initial_point: Option<Vec<f64>>,
    pub pointwise: bool,
    /// Default value for the `sigma` placeholder.
    pub sigma_default: Option<f64>,
}

impl SafetyProblem {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.system.validate()?;
        let n = self.system.n();
        match (self.system.time, self.horizon) {
            (TimeDomain::Continuous, Horizon::Time(t)) if t > 0.0 && t.is_finite() => {}
            (TimeDomain::Discrete, Horizon::Steps(k)) if k > 0 => {}
            (TimeDomain::Continuous, _) => return Err(ModelError::Invalid("continuous time needs T > 0".into())),
            (TimeDomain::Discrete, _) => return Err(ModelError::Invalid("discrete time needs N >= 1".into())),
        }
        if self.controller.len() != self.system.inputs() {
            return Err(ModelError::Dimension(format!(
                "controller has {} entries, input map has {} columns",
                self.controller.len(),
                self.system.inputs()
            )));
        }
        if let Some(x0) = &self.initial_point {
            if x0.len() != n {
                return Err(ModelError::Dimension(format!("x0 has {} entries, state has {n}", x0.len())));
            }
        }
        if self.pointwise && self.initial_point.is_none() {
            return Err(ModelError::Invalid("pointwise bound requested without x0".into()));
        }
        let allowed = |p: &Polynomial| {
            p.variables().into_iter().all(|v| self.system.state.contains(&v) || &*v.name() == SIGMA)
        };
        let sets = [&self.domain, &self.initial, &self.unsafe_set];
        for s in sets {
            if let Some(bad) = s.inequalities.iter().find(|p| !allowed(p)) {
                return Err(ModelError::Invalid(format!("{} set uses a non-state variable: {bad}", s.role)));
            }
        }
        Ok(())
    }

    pub fn time(&self) -> TimeDomain {
        self.system.time
    }

    pub fn state(&self) -> &[Var] {
        &self.system.state
    }

    fn polys(&self) -> impl Iterator<Item = &Polynomial> {
        let s = &self.system;
        s.drift
            .iter()
            .chain(s.input.iter().flatten())
            .chain(s.diffusion.iter().flatten())
            .chain(&self.domain.inequalities)
            .chain(&self.initial.inequalities)
            .chain(&self.unsafe_set.inequalities)
            .chain(&self.controller)
    }

    fn polys_mut(&mut self) -> impl Iterator<Item = &mut Polynomial> {
        let s = &mut self.system;
        s.drift
            .iter_mut()
            .chain(s.input.iter_mut().flatten())
            .chain(s.diffusion.iter_mut().flatten())
            .chain(self.domain.inequalities.iter_mut())
            .chain(self.initial.inequalities.iter_mut())
            .chain(self.unsafe_set.inequalities.iter_mut())
            .chain(self.controller.iter_mut())
    }

    pub fn uses_sigma(&self) -> bool {
        let sigma = Var::new(SIGMA);
        self.polys().any(|p| p.variables().contains(&sigma))
    }

    /// Copy with the `sigma` placeholder replaced by `value`.
    pub fn with_sigma(&self, value: f64) -> SafetyProblem {
        let map = HashMap::from([(Var::new(SIGMA), Polynomial::constant(value))]);
        let mut out = self.clone();
        for p in out.polys_mut() {
            *p = p.substitute(&map);
        }
        out
    }

    /// Binds `sigma` from `value` or the file default; errors if the
    /// placeholder is used and neither is available.
    pub fn bind_sigma(&self, value: Option<f64>) -> Result<SafetyProblem, ModelError> {
        match value.or(self.sigma_default) {
            Some(s) => Ok(self.with_sigma(s)),
            None if self.uses_sigma() => Err(ModelError::UnboundSigma),
            None => Ok(self.clone()),
        }
    }

    pub fn with_controller(&self, u: Vec<Polynomial>) -> Result<SafetyProblem, ModelError> {
        let mut out = self.clone();
        out.controller = u;
        out.validate()?;
        Ok(out)
    }

    /// `F = f + g u` with the problem's controller.
    pub fn closed_loop_drift(&self) -> Result<Vec<Polynomial>, ModelError> {
        self.closed_loop_drift_with(&self.controller)
    }

    pub fn closed_loop_drift_with(&self, u: &[Polynomial]) -> Result<Vec<Polynomial>, ModelError> {
        let s = &self.system;
        if u.len() != s.inputs() {
            return Err(ModelError::Dimension(format!("controller has {} entries, expected {}", u.len(), s.inputs())));
        }
        Ok(s.drift
            .iter()
            .zip(&s.input)
            .map(|(f, g)| g.iter().zip(u).fold(f.clone(), |acc, (gij, uj)| acc + gij * uj))
            .collect())
    }

    /// `sigma sigma^T` as an n x n matrix of polynomials.
    pub fn diffusion_covariance(&self) -> Vec<Vec<Polynomial>> {
        let d = &self.system.diffusion;
        let n = d.len();
        let mut out = vec![vec![Polynomial::zero(); n]; n];
        for i in 0..n {
            for j in i..n {
                let v = d[i].iter().zip(&d[j]).fold(Polynomial::zero(), |acc, (a, b)| acc + a * b);
                out[j][i] = v.clone();
                out[i][j] = v;
            }
        }
        out
    }

    /// `A B = sum_i F_i dB/dx_i + 1/2 sum_ij (sigma sigma^T)_ij d2B/dx_i dx_j`.
    pub fn generator(&self, b: &Polynomial) -> Result<Polynomial, ModelError> {
        if self.time() != TimeDomain::Continuous {
            return Err(ModelError::WrongTimeDomain { op: "generator", expected: TimeDomain::Continuous });
        }
        let f = self.closed_loop_drift()?;
        let x = self.state();
        let mut out = Polynomial::zero();
        for (fi, gi) in f.iter().zip(b.gradient(x)) {
            out += &(fi * &gi);
        }
        let cov = self.diffusion_covariance();
        let hess = b.hessian(x);
        for i in 0..x.len() {
            for j in 0..x.len() {
                if !cov[i][j].is_zero() && !hess[i][j].is_zero() {
                    out += &(&cov[i][j] * &hess[i][j]).scale(0.5);
                }
            }
        }
        Ok(out)
    }

    /// Successor map `F(x) + sigma(x) xi` over the internal noise variables.
    pub fn successor(&self) -> Result<Vec<Polynomial>, ModelError> {
        let f = self.closed_loop_drift()?;
        let noise = self.system.noise();
        Ok(f.iter()
            .zip(&self.system.diffusion)
            .map(|(fi, row)| {
                row.iter()
                    .zip(noise.vars())
                    .fold(fi.clone(), |acc, (s, &xi)| acc + s * &Polynomial::var(xi))
            })
            .collect())
    }

    /// `E[B(F(x) + sigma(x) xi) | x]` for standard-normal `xi`.
    pub fn step_expectation(&self, b: &Polynomial) -> Result<Polynomial, ModelError> {
        if self.time() != TimeDomain::Discrete {
            return Err(ModelError::WrongTimeDomain { op: "step_expectation", expected: TimeDomain::Discrete });
        }
        let next = self.successor()?;
        let map: HashMap<Var, Polynomial> = self.state().iter().copied().zip(next).collect();
        Ok(b.substitute(&map).gaussian_expectation(&self.system.noise()))
    }

    /// Renders the problem in the file grammar; parsing the output yields
    /// an equal problem.
    pub fn to_file_string(&self) -> String {
        file::write_problem(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Polynomial {
        s.parse().unwrap()
    }

    const CT_1D: &str = "[system]\ntime = continuous\nstate = x\ndrift = -x\ninput = 1\ndiffusion = sigma\n\
        [sets]\ndomain = (2 - x)*(x + 2)\ninitial = 0.04 - x^2\nunsafe = x^2 - 1\n[horizon]\nT = 1\n";

    const VDP: &str = "[system]\ntime = continuous\nstate = x1, x2\ndrift = x2; -x1 - x2 - x1^3\n\
        input = 0; 1\ndiffusion = 0; sigma\n[sets]\ndomain = (x1 + 3)*(2 - x1); (x2 + 2)*(3 - x2)\n\
        initial = 0.01 - (x1 + 2)^2 - x2^2\nunsafe = x2 - 2.25\n[horizon]\nT = 2\n";

    const POP: &str = "[system]\ntime = discrete\nstate = x1, x2\ndrift = 0.5*x2; 0.5*x1 + 0.95*x2\n\
        input = 1; 0\ndiffusion = 0; sigma\n[sets]\ndomain = 9 - x1^2; 9 - x2^2\n\
        initial = 1.5 - x1^2 - x2^2\nunsafe = x1^2 + x2^2 - 2\n[horizon]\nN = 2\n";

    #[test]
    fn closed_loop_drift_examples() {
        let prob = parse_problem(CT_1D).unwrap();
        assert_eq!(prob.closed_loop_drift().unwrap(), vec![p("-x")]);
        assert_eq!(prob.closed_loop_drift_with(&[p("-3*x")]).unwrap(), vec![p("-4*x")]);
        let vdp = parse_problem(VDP).unwrap();
        assert_eq!(vdp.closed_loop_drift().unwrap(), vec![p("x2"), p("-x1 - x2 - x1^3")]);
        assert!(vdp.closed_loop_drift_with(&[]).is_err());
    }

    #[test]
    fn generator_examples() {
        let prob = parse_problem(CT_1D).unwrap().with_sigma(0.5);
        assert_eq!(prob.generator(&p("x^2")).unwrap(), p("-2*x^2 + 0.25"));
        assert!(prob.generator(&p("5")).unwrap().is_zero());
        let vdp = parse_problem(VDP).unwrap().with_sigma(1.2);
        let g = vdp.generator(&p("x1^2 + x2^2")).unwrap();
        assert!((g - p("-2*x2^2 - 2*x1^3*x2 + 1.44")).max_abs_coefficient() < 1e-12);
    }

    #[test]
    fn step_expectation_examples() {
        let pop = parse_problem(POP).unwrap().with_sigma(0.3);
        let e = pop.step_expectation(&p("x2^2")).unwrap();
        assert!((e - p("(0.5*x1 + 0.95*x2)^2 + 0.09")).max_abs_coefficient() < 1e-12);
        assert_eq!(pop.step_expectation(&p("4")).unwrap(), p("4"));
        assert_eq!(pop.step_expectation(&p("x1")).unwrap(), p("0.5*x2"));
    }

    #[test]
    fn wrong_time_domain_is_rejected() {
        let ct = parse_problem(CT_1D).unwrap().with_sigma(1.0);
        let dt = parse_problem(POP).unwrap().with_sigma(1.0);
        assert!(matches!(ct.step_expectation(&p("x")), Err(ModelError::WrongTimeDomain { .. })));
        assert!(matches!(dt.generator(&p("x1")), Err(ModelError::WrongTimeDomain { .. })));
    }

    #[test]
    fn zero_diffusion_gives_lie_derivative() {
        let vdp = parse_problem(VDP).unwrap().with_sigma(0.0);
        let b = p("x1^4 + x1*x2 + 3*x2^2");
        let lie = vdp
            .closed_loop_drift()
            .unwrap()
            .iter()
            .zip(b.gradient(vdp.state()))
            .fold(Polynomial::zero(), |acc, (f, g)| acc + f * &g);
        assert_eq!(vdp.generator(&b).unwrap(), lie);
    }

    #[test]
    fn sigma_binding() {
        let prob = parse_problem(CT_1D).unwrap();
        assert!(prob.uses_sigma());
        assert_eq!(prob.bind_sigma(None), Err(ModelError::UnboundSigma));
        let bound = prob.bind_sigma(Some(0.5)).unwrap();
        assert!(!bound.uses_sigma());
        assert_eq!(bound.system.diffusion, vec![vec![p("0.5")]]);
    }
}
