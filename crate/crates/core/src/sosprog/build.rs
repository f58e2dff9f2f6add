//! Barrier and controller programs.
//!
//! Barrier program, with `B` free of degree `deg_B` and SOS multipliers `l`:
//!
//! | constraint | expression in SOS                                 |
//! |------------|---------------------------------------------------|
//! | domain     | `B - sum l_k sX_k`                                |
//! | unsafe     | `B - 1 - sum l_k sXu_k`                           |
//! | initial    | `gamma - B - sum l_k sX0_k`                       |
//! | dynamics   | `D(B) - sum l_k sX_k (+ l sXu)`                   |
//!
//! where `D(B) = -A B - alpha B + beta` in continuous time and
//! `D(B) = -E[B(F)] + B / alpha + beta` in discrete time. The `+ l sXu` term
//! restricts the dynamics condition to `X \ Xu` and is used when the unsafe
//! set is a single inequality; otherwise the condition is imposed on all of
//! `X`. Objective: `min gamma + beta`.

use crate::model::{SafetyProblem, TimeDomain};
use crate::poly::{Monomial, Polynomial, Var};

use super::{monomials_upto, Dec, DecisionPoly, LinExpr, PolyExpr, SosError, SosProgram};

/// Upper limit for `gamma` and the discrete `beta`, standing in for `< 1`.
pub const OPEN_UPPER: f64 = 1.0 - 1e-6;
pub const DEFAULT_MAX_DEGREE: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Degrees {
    pub barrier: u32,
    /// Multiplier degree; chosen per constraint when `None`.
    pub multiplier: Option<u32>,
    /// Largest constraint degree accepted.
    pub max: u32,
}

impl Degrees {
    pub fn new(barrier: u32) -> Self {
        Degrees { barrier, multiplier: None, max: DEFAULT_MAX_DEGREE }
    }
}

/// How the dynamics condition handles the unsafe set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnsafeComplement {
    /// `X \ Xu` via a sign-flipped multiplier on the single unsafe inequality.
    Multiplier,
    /// Imposed on all of `X`.
    WholeDomain,
}

#[derive(Debug, Clone)]
pub struct BarrierProgram {
    pub program: SosProgram,
    pub barrier: DecisionPoly,
    pub gamma: usize,
    pub beta: usize,
    pub alpha: f64,
    pub time: TimeDomain,
    pub complement: UnsafeComplement,
    pub multipliers: Vec<(String, DecisionPoly)>,
}

/// Barrier values with the solver's defects absorbed.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedBarrier {
    pub barrier: Polynomial,
    pub gamma: f64,
    pub beta: f64,
    /// Constant added to the solved barrier.
    pub shift: f64,
}

impl BarrierProgram {
    /// Turns a solved program into values that satisfy the barrier
    /// conditions exactly on the unit box, given the per-constraint defects
    /// `d`: B is raised by `max(d_domain, d_unsafe)`, gamma by that plus
    /// `d_initial`, and beta by the shift's effect on the dynamics term plus
    /// `d_dynamics`. Only meaningful when the domain lies in `[-1, 1]^n`.
    pub fn certified(&self, sol: &super::SosSolution) -> CertifiedBarrier {
        let defect = |name: &str| {
            self.program
                .constraints
                .iter()
                .zip(&sol.defects)
                .find(|(c, _)| c.name == name)
                .map_or(0.0, |(_, &d)| d)
        };
        let shift = defect("domain").max(defect("unsafe"));
        let drift = match self.time {
            TimeDomain::Continuous => self.alpha * shift,
            TimeDomain::Discrete => (1.0 - 1.0 / self.alpha) * shift,
        };
        CertifiedBarrier {
            barrier: &sol.decision_poly(&self.barrier) + &Polynomial::constant(shift),
            gamma: sol.scalar(self.gamma) + shift + defect("initial"),
            beta: sol.scalar(self.beta) + drift + defect("dynamics"),
            shift,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ControllerProgram {
    pub program: SosProgram,
    /// Per input, the upper-triangle entries `(a, b, scalar id)` of `Q_j`.
    pub q: Vec<Vec<(usize, usize, usize)>>,
    pub c: usize,
    pub z: Vec<Polynomial>,
}

impl ControllerProgram {
    /// `u_j = z^T Q_j z` from solved scalars.
    pub fn controller(&self, sol: &super::SosSolution) -> Vec<Polynomial> {
        self.q
            .iter()
            .map(|entries| {
                entries.iter().fold(Polynomial::zero(), |acc, &(a, b, id)| {
                    let w = if a == b { 1.0 } else { 2.0 };
                    acc + (&self.z[a] * &self.z[b]).scale(w * sol.scalar(id))
                })
            })
            .collect()
    }
}

fn even_ceil(d: u32) -> u32 {
    d + d % 2
}

/// Subtracts `sum_k l_k s_k` from `base` with fresh SOS multipliers and
/// registers the constraint. `flip` holds inequalities whose multiplier
/// term is added instead.
struct Constraint<'a> {
    name: &'a str,
    base: PolyExpr,
    base_degree: u32,
    minus: &'a [Polynomial],
    plus: &'a [Polynomial],
}

fn add_constraint(
    prog: &mut SosProgram,
    deg: &Degrees,
    c: Constraint<'_>,
    multipliers: &mut Vec<(String, DecisionPoly)>,
) -> Result<(), SosError> {
    let sets = c.minus.iter().map(|s| (s, -1.0)).chain(c.plus.iter().map(|s| (s, 1.0)));
    let max_s = c.minus.iter().chain(c.plus).map(Polynomial::degree).max().unwrap_or(0);
    let target = match deg.multiplier {
        Some(l) if l % 2 == 1 => return Err(SosError::OddDegree(l)),
        Some(l) => even_ceil(c.base_degree.max(l + max_s)),
        None => even_ceil(c.base_degree.max(max_s)),
    };
    if target > deg.max {
        return Err(SosError::DegreeOverflow { degree: target, max: deg.max });
    }
    let mut expr = c.base;
    for (k, (s, sign)) in sets.enumerate() {
        let d = match deg.multiplier {
            Some(l) => l,
            None => {
                let room = target.saturating_sub(s.degree());
                room - room % 2
            }
        };
        let name = format!("lambda_{}[{k}]", c.name);
        let lam = prog.sos_poly(&name, d)?;
        expr.add_scaled(&lam.expr().mul_poly(s), sign);
        multipliers.push((name, lam));
    }
    prog.add_sos(c.name, expr);
    Ok(())
}

fn check_problem(problem: &SafetyProblem, time: TimeDomain, op: &'static str) -> Result<(), SosError> {
    if problem.time() != time {
        return Err(crate::model::ModelError::WrongTimeDomain { op, expected: time }.into());
    }
    if problem.uses_sigma() {
        return Err(crate::model::ModelError::UnboundSigma.into());
    }
    problem.validate()?;
    Ok(())
}

/// Barrier program for a fixed `alpha` (continuous) or `alpha~` (discrete).
fn build_barrier(problem: &SafetyProblem, alpha: f64, deg: &Degrees) -> Result<BarrierProgram, SosError> {
    let time = problem.time();
    let vars: Vec<Var> = problem.state().to_vec();
    let mut prog = SosProgram::new(&vars);
    let basis = monomials_upto(deg.barrier, &vars);
    let barrier = prog.free_poly("B", basis.clone());
    let gamma = prog.scalar("gamma", Some(0.0), Some(OPEN_UPPER));
    let beta = match time {
        TimeDomain::Continuous => prog.scalar("beta", Some(0.0), None),
        TimeDomain::Discrete => prog.scalar("beta", Some(0.0), Some(OPEN_UPPER)),
    };
    prog.objective = LinExpr::dec(Dec::Scalar(gamma)) + &LinExpr::dec(Dec::Scalar(beta));

    let b = barrier.expr();
    let one = Polynomial::constant(1.0);
    let mut multipliers = Vec::new();

    add_constraint(
        &mut prog,
        deg,
        Constraint { name: "domain", base: b.clone(), base_degree: deg.barrier, minus: &problem.domain.inequalities, plus: &[] },
        &mut multipliers,
    )?;
    let mut unsafe_base = b.clone();
    unsafe_base.add_scaled_poly(&one, &LinExpr::constant(-1.0));
    add_constraint(
        &mut prog,
        deg,
        Constraint {
            name: "unsafe",
            base: unsafe_base,
            base_degree: deg.barrier,
            minus: &problem.unsafe_set.inequalities,
            plus: &[],
        },
        &mut multipliers,
    )?;
    let mut init_base = b.scale(-1.0);
    init_base.add_scaled_poly(&one, &LinExpr::dec(Dec::Scalar(gamma)));
    add_constraint(
        &mut prog,
        deg,
        Constraint {
            name: "initial",
            base: init_base,
            base_degree: deg.barrier,
            minus: &problem.initial.inequalities,
            plus: &[],
        },
        &mut multipliers,
    )?;

    // The dynamics operator is linear in B, so apply it per basis monomial.
    let DecisionPoly::Free { ids, .. } = &barrier else { unreachable!("barrier is a free polynomial") };
    let mut dyn_expr = PolyExpr::zero();
    for (m, &id) in basis.iter().zip(ids) {
        let mp = Polynomial::from_terms([(m.clone(), 1.0)]);
        let image = match time {
            TimeDomain::Continuous => &problem.generator(&mp)?.scale(-1.0) - &mp.scale(alpha),
            TimeDomain::Discrete => &problem.step_expectation(&mp)?.scale(-1.0) + &mp.scale(1.0 / alpha),
        };
        dyn_expr.add_scaled_poly(&image, &LinExpr::dec(Dec::Scalar(id)));
    }
    dyn_expr.add_scaled_poly(&one, &LinExpr::dec(Dec::Scalar(beta)));
    let dyn_degree = dyn_expr.degree().max(deg.barrier);

    let complement = if problem.unsafe_set.inequalities.len() == 1 {
        UnsafeComplement::Multiplier
    } else {
        UnsafeComplement::WholeDomain
    };
    let plus: &[Polynomial] = match complement {
        UnsafeComplement::Multiplier => &problem.unsafe_set.inequalities,
        UnsafeComplement::WholeDomain => &[],
    };
    add_constraint(
        &mut prog,
        deg,
        Constraint { name: "dynamics", base: dyn_expr, base_degree: dyn_degree, minus: &problem.domain.inequalities, plus },
        &mut multipliers,
    )?;

    Ok(BarrierProgram { program: prog, barrier, gamma, beta, alpha, time, complement, multipliers })
}

/// Continuous-time barrier program at fixed `alpha >= 0`.
pub fn build_ct_program(problem: &SafetyProblem, alpha: f64, deg: &Degrees) -> Result<BarrierProgram, SosError> {
    check_problem(problem, TimeDomain::Continuous, "build_ct_program")?;
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(SosError::Precondition(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    build_barrier(problem, alpha, deg)
}

/// Discrete-time barrier program at fixed `alpha~ >= 1`.
pub fn build_dt_program(problem: &SafetyProblem, alpha: f64, deg: &Degrees) -> Result<BarrierProgram, SosError> {
    check_problem(problem, TimeDomain::Discrete, "build_dt_program")?;
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(SosError::Precondition(format!("alpha~ must be finite and >= 1, got {alpha}")));
    }
    build_barrier(problem, alpha, deg)
}

/// `z`: every monomial of degree `<= ceil(deg_u / 2)`, constant included.
pub fn controller_basis(deg_u: u32, vars: &[Var]) -> Vec<Polynomial> {
    monomials_upto(deg_u.div_ceil(2), vars)
        .into_iter()
        .map(|m: Monomial| Polynomial::from_terms([(m, 1.0)]))
        .collect()
}

/// Controller program with `u_j = z^T Q_j z` over [`controller_basis`].
pub fn build_controller_program(
    problem: &SafetyProblem,
    barrier: &Polynomial,
    alpha: f64,
    beta: f64,
    deg_u: u32,
    deg: &Degrees,
) -> Result<ControllerProgram, SosError> {
    let z = controller_basis(deg_u, problem.state());
    build_controller_program_with_basis(problem, barrier, alpha, beta, z, deg)
}

/// Controller program over an explicit vector `z` of polynomials. Used when
/// solving in normalized coordinates with `z` pulled back from the original
/// ones, so that the entry bound `c` keeps its meaning.
///
/// Minimizes `c` subject to `-c <= Q_ab <= c` and the dynamics condition on
/// `X` (or `X \ Xu`) with `B`, `alpha` and `beta` fixed. In discrete time the
/// condition is affine in `u` only for affine `B`.
pub fn build_controller_program_with_basis(
    problem: &SafetyProblem,
    barrier: &Polynomial,
    alpha: f64,
    beta: f64,
    z: Vec<Polynomial>,
    deg: &Degrees,
) -> Result<ControllerProgram, SosError> {
    let time = problem.time();
    check_problem(problem, time, "build_controller_program")?;
    let vars: Vec<Var> = problem.state().to_vec();
    let p = problem.system.inputs();
    if p == 0 {
        return Err(SosError::Precondition("the system has no control inputs".into()));
    }
    match time {
        TimeDomain::Continuous if !(alpha >= 0.0 && alpha.is_finite()) => {
            return Err(SosError::Precondition(format!("alpha must be finite and >= 0, got {alpha}")))
        }
        TimeDomain::Discrete if !(alpha >= 1.0 && alpha.is_finite()) => {
            return Err(SosError::Precondition(format!("alpha~ must be finite and >= 1, got {alpha}")))
        }
        TimeDomain::Discrete if barrier.degree() > 1 => {
            return Err(SosError::Nonconvex(format!(
                "E[B(f + g u + sigma xi)] is nonconvex in the controller for a degree-{} barrier; \
                 discrete-time synthesis needs an affine barrier",
                barrier.degree()
            )))
        }
        _ => {}
    }

    let mut prog = SosProgram::new(&vars);
    let c = prog.scalar("c", Some(0.0), None);
    prog.objective = LinExpr::dec(Dec::Scalar(c));
    let mut q = Vec::with_capacity(p);
    for j in 0..p {
        let mut entries = Vec::new();
        for a in 0..z.len() {
            for b in a..z.len() {
                let id = prog.scalar(&format!("Q{j}[{a},{b}]"), None, None);
                let (cd, qd) = (LinExpr::dec(Dec::Scalar(c)), Dec::Scalar(id));
                prog.add_ge(&format!("c - Q{j}[{a},{b}]"), cd.clone() + &LinExpr::term(qd, -1.0));
                prog.add_ge(&format!("c + Q{j}[{a},{b}]"), cd + &LinExpr::term(qd, 1.0));
                entries.push((a, b, id));
            }
        }
        q.push(entries);
    }

    let zero_u = vec![Polynomial::zero(); p];
    let open = problem.with_controller(zero_u)?;
    // Sensitivity of the dynamics term to u_j, a fixed polynomial h_j.
    let (base, h): (Polynomial, Vec<Polynomial>) = match time {
        TimeDomain::Continuous => {
            let grad = barrier.gradient(&vars);
            let h = (0..p)
                .map(|j| {
                    problem.system.input.iter().zip(&grad).fold(Polynomial::zero(), |acc, (row, g)| acc + &row[j] * g)
                })
                .collect();
            let base = &(&open.generator(barrier)?.scale(-1.0) - &barrier.scale(alpha)) + &Polynomial::constant(beta);
            (base, h)
        }
        TimeDomain::Discrete => {
            let lin: Vec<f64> = vars.iter().map(|&v| barrier.coefficient(&Monomial::var(v))).collect();
            let h = (0..p)
                .map(|j| {
                    problem
                        .system
                        .input
                        .iter()
                        .zip(&lin)
                        .fold(Polynomial::zero(), |acc, (row, &bi)| acc + row[j].scale(bi))
                })
                .collect();
            let base =
                &(&open.step_expectation(barrier)?.scale(-1.0) + &barrier.scale(1.0 / alpha)) + &Polynomial::constant(beta);
            (base, h)
        }
    };
    let mut expr = PolyExpr::from_poly(&base);
    let mut degree = base.degree();
    for (hj, entries) in h.iter().zip(&q) {
        for &(a, b, id) in entries {
            let w = if a == b { 1.0 } else { 2.0 };
            let term = &(hj * &z[a]) * &z[b];
            degree = degree.max(term.degree());
            expr.add_scaled_poly(&term, &LinExpr::term(Dec::Scalar(id), -w));
        }
    }
    let plus: &[Polynomial] =
        if problem.unsafe_set.inequalities.len() == 1 { &problem.unsafe_set.inequalities } else { &[] };
    let mut multipliers = Vec::new();
    add_constraint(
        &mut prog,
        deg,
        Constraint { name: "dynamics", base: expr, base_degree: degree, minus: &problem.domain.inequalities, plus },
        &mut multipliers,
    )?;
    Ok(ControllerProgram { program: prog, q, c, z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_problem;
    use crate::sosprog::SosSolution;
    use sbarrier_sdp::{InteriorPoint, Settings};

    const CT1: &str = "
[system]
time = continuous
state = x
drift = -x
input = 1
diffusion = sigma
[sets]
domain = (2 - x)*(x + 2)
initial = 0.04 - x^2
unsafe = x^2 - 1
[horizon]
T = 1
";

    fn ct1(sigma: f64) -> SafetyProblem {
        parse_problem(CT1).unwrap().with_sigma(sigma)
    }

    #[test]
    fn one_dimensional_program_shape() {
        let bp = build_ct_program(&ct1(0.5), 1.0, &Degrees::new(4)).unwrap();
        assert_eq!(bp.program.constraints.len(), 4);
        assert_eq!(bp.multipliers.len(), 5);
        assert_eq!(bp.complement, UnsafeComplement::Multiplier);
        // gamma, beta and the five coefficients of B
        assert_eq!(bp.program.scalars.len(), 2 + 5);
    }

    #[test]
    fn preconditions() {
        let p = ct1(0.5);
        assert!(matches!(build_ct_program(&p, -1.0, &Degrees::new(4)), Err(SosError::Precondition(_))));
        assert!(matches!(build_ct_program(&p, 1.0, &Degrees::new(22)), Err(SosError::DegreeOverflow { .. })));
        assert!(matches!(build_dt_program(&p, 1.5, &Degrees::new(4)), Err(SosError::Model(_))));
        let unbound = parse_problem(CT1).unwrap();
        assert!(matches!(
            build_ct_program(&unbound, 1.0, &Degrees::new(4)),
            Err(SosError::Model(crate::model::ModelError::UnboundSigma))
        ));
        let mut odd = Degrees::new(4);
        odd.multiplier = Some(3);
        assert_eq!(build_ct_program(&p, 1.0, &odd).err(), Some(SosError::OddDegree(3)));
    }

    #[test]
    fn programs_are_affine_in_decisions() {
        // Every coefficient is a LinExpr by construction; check no decision
        // id is out of range, which would betray a malformed product.
        let bp = build_ct_program(&ct1(0.5), 0.5, &Degrees::new(6)).unwrap();
        let (ns, ng) = (bp.program.scalars.len(), bp.program.grams.len());
        for c in &bp.program.constraints {
            for (_, e) in c.expr.terms() {
                for d in e.terms.keys() {
                    match *d {
                        Dec::Scalar(k) => assert!(k < ns),
                        Dec::Gram { gram, i, j } => {
                            assert!(gram < ng && i <= j && j < bp.program.grams[gram].basis.len())
                        }
                    }
                }
            }
        }
    }

    fn solve_ct(p: &SafetyProblem, alpha: f64, d: u32) -> (BarrierProgram, SosSolution) {
        let bp = build_ct_program(p, alpha, &Degrees::new(d)).unwrap();
        let sol = bp.program.solve(&InteriorPoint, &Settings::default()).unwrap();
        (bp, sol)
    }

    #[test]
    fn one_dimensional_certificate_is_consistent() {
        let (bp, sol) = solve_ct(&ct1(0.5), 1.0, 6);
        let b = sol.decision_poly(&bp.barrier);
        let gamma = sol.scalar(bp.gamma);
        let beta = sol.scalar(bp.beta);
        assert!((0.0..1.0).contains(&gamma) && beta >= 0.0);
        // B <= gamma on X0 and B >= 1 on Xu at a few points
        for x in [-0.2, 0.0, 0.2] {
            assert!(b.evaluate_at(&[Var::new("x")], &[x]).unwrap() <= gamma + 1e-6);
        }
        for x in [-2.0, -1.0, 1.0, 1.5, 2.0] {
            assert!(b.evaluate_at(&[Var::new("x")], &[x]).unwrap() >= 1.0 - 1e-6);
        }
    }

    const DT_LIN: &str = "
[system]
time = discrete
state = x1, x2
drift = 0.5*x2; 0.5*x1 + 0.95*x2
input = 0; 1
diffusion = 0; sigma
[sets]
domain = (4 - x1)*(x1 + 4); (4 - x2)*(x2 + 4)
initial = 1 - x1^2 - x2^2
unsafe = x1 - 3
[horizon]
N = 2
";

    #[test]
    fn dt_controller_requires_affine_barrier() {
        let p = parse_problem(DT_LIN).unwrap().with_sigma(1.0);
        let b: Polynomial = "x1^2 + x2^2".parse().unwrap();
        let r = build_controller_program(&p, &b, 1.2, 0.1, 1, &Degrees::new(2));
        assert!(matches!(r, Err(SosError::Nonconvex(_))), "{r:?}");
        let b: Polynomial = "0.1*x1 + 0.2".parse().unwrap();
        let cp = build_controller_program(&p, &b, 1.2, 0.1, 1, &Degrees::new(1)).unwrap();
        // z = (1, x1, x2), 6 upper-triangle entries for the single input
        assert_eq!(cp.q[0].len(), 6);
        assert_eq!(cp.program.linear.len(), 12);
    }

    #[test]
    fn ct_controller_stabilizes() {
        // B = x^2 / 1 with -A B - alpha B + beta >= 0 needs u pushing toward 0
        // when the open loop is unstable: dx = x + u.
        let src = CT1.replace("drift = -x", "drift = x");
        let p = parse_problem(&src).unwrap().with_sigma(0.0);
        let b: Polynomial = "x^2".parse().unwrap();
        let cp = build_controller_program(&p, &b, 0.0, 0.0, 1, &Degrees::new(2)).unwrap();
        let sol = cp.program.solve(&InteriorPoint, &Settings::default()).unwrap();
        let u = cp.controller(&sol);
        let x = Var::new("x");
        // u(x) x <= -x^2 on X, so u at x=1 is <= -1
        assert!(u[0].evaluate_at(&[x], &[1.0]).unwrap() <= -1.0 + 1e-5, "{}", u[0]);
        assert!(sol.scalar(cp.c) > 0.0);
    }
}
