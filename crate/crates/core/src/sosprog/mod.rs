//! Sum-of-squares programs and their Gram-matrix lift to semidefinite programs.
//!
//! A [`SosProgram`] holds scalar decisions (with optional bounds), SOS
//! decision polynomials (each backed by a PSD Gram block), linear
//! inequalities, and constraints "`expr` is a sum of squares" where `expr`
//! is a [`PolyExpr`]: a polynomial whose coefficients are affine in the
//! decisions. Affinity holds by construction, so no bilinear check is needed
//! at lift time.
//!
//! Lifting gives every SOS constraint its own Gram block over the monomial
//! half-basis and adds one coefficient-matching row per monomial. Each
//! constraint is divided by its largest coefficient before lifting; the
//! factor is undone on extraction.

mod build;
mod soundness;

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use sbarrier_sdp::{SdpBackend, SdpProblem, SdpSolution, Settings, Status, VarRef};
use thiserror::Error;

use crate::model::ModelError;
use crate::poly::{Monomial, Polynomial, Var};

pub use build::{
    build_controller_program, build_controller_program_with_basis, build_ct_program, build_dt_program,
    controller_basis, BarrierProgram, CertifiedBarrier, ControllerProgram, Degrees, UnsafeComplement, DEFAULT_MAX_DEGREE,
    OPEN_UPPER,
};
pub use soundness::{check_certificate, Check, SoundnessReport, SOUNDNESS_SLACK};

/// Gram matrices may dip this far below zero (relative to their largest
/// entry) before extraction gives up; smaller dips are clipped away.
pub const EIGEN_TOL: f64 = 1e-6;
/// Largest accepted constraint defect (see [`SosSolution::defects`]), in
/// scaled units.
pub const MATCH_TOL: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SosError {
    #[error("odd degree {0} where an even degree is required")]
    OddDegree(u32),
    #[error("degree {degree} exceeds the configured maximum {max}")]
    DegreeOverflow { degree: u32, max: u32 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("nonconvex program: {0}")]
    Nonconvex(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("infeasible ({status} after {iterations} iterations)")]
    Infeasible { status: Status, iterations: usize },
    #[error("solver returned {status}: residual {residual:.3e}, min eigenvalue {min_eigenvalue:.3e}")]
    Solver { status: Status, residual: f64, min_eigenvalue: f64 },
}

/// A decision variable: a scalar or one upper-triangle entry of a Gram block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dec {
    Scalar(usize),
    Gram { gram: usize, i: usize, j: usize },
}

/// `constant + sum coef * decision`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub constant: f64,
    pub terms: BTreeMap<Dec, f64>,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        LinExpr { constant: c, terms: BTreeMap::new() }
    }

    pub fn dec(d: Dec) -> Self {
        Self::term(d, 1.0)
    }

    pub fn term(d: Dec, c: f64) -> Self {
        LinExpr { constant: 0.0, terms: BTreeMap::from([(d, c)]) }
    }

    pub fn add_scaled(&mut self, other: &LinExpr, k: f64) {
        self.constant += k * other.constant;
        for (d, c) in &other.terms {
            *self.terms.entry(*d).or_insert(0.0) += k * c;
        }
    }

    pub fn scale(&self, k: f64) -> LinExpr {
        let mut out = LinExpr::default();
        out.add_scaled(self, k);
        out
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.terms.values().all(|c| *c == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(self.constant.abs(), |a, c| a.max(c.abs()))
    }
}

impl std::ops::Add<&LinExpr> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: &LinExpr) -> LinExpr {
        self.add_scaled(rhs, 1.0);
        self
    }
}

/// Polynomial in the state with [`LinExpr`] coefficients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolyExpr {
    terms: BTreeMap<Monomial, LinExpr>,
}

impl PolyExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_poly(p: &Polynomial) -> Self {
        Self::scaled_poly(p, &LinExpr::constant(1.0))
    }

    /// `coef * p` for a numeric polynomial `p`.
    pub fn scaled_poly(p: &Polynomial, coef: &LinExpr) -> Self {
        let mut out = Self::zero();
        out.add_scaled_poly(p, coef);
        out
    }

    pub fn add_scaled_poly(&mut self, p: &Polynomial, coef: &LinExpr) {
        for (m, a) in p.terms() {
            self.terms.entry(m.clone()).or_default().add_scaled(coef, a);
        }
    }

    pub fn add_scaled(&mut self, other: &PolyExpr, k: f64) {
        for (m, e) in &other.terms {
            self.terms.entry(m.clone()).or_default().add_scaled(e, k);
        }
    }

    pub fn scale(&self, k: f64) -> PolyExpr {
        let mut out = Self::zero();
        out.add_scaled(self, k);
        out
    }

    pub fn mul_poly(&self, p: &Polynomial) -> PolyExpr {
        let mut out = Self::zero();
        for (m, e) in &self.terms {
            for (mp, a) in p.terms() {
                out.terms.entry(m.mul(mp)).or_default().add_scaled(e, a);
            }
        }
        out
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &LinExpr)> {
        self.terms.iter()
    }

    /// Largest degree carrying a nonzero coefficient.
    pub fn degree(&self) -> u32 {
        self.terms.iter().filter(|(_, e)| !e.is_zero()).map(|(m, _)| m.degree()).max().unwrap_or(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |a, e| a.max(e.max_abs()))
    }
}

impl std::ops::Add<&PolyExpr> for PolyExpr {
    type Output = PolyExpr;
    fn add(mut self, rhs: &PolyExpr) -> PolyExpr {
        self.add_scaled(rhs, 1.0);
        self
    }
}

impl std::ops::Sub<&PolyExpr> for PolyExpr {
    type Output = PolyExpr;
    fn sub(mut self, rhs: &PolyExpr) -> PolyExpr {
        self.add_scaled(rhs, -1.0);
        self
    }
}

/// Monomials of total degree `<= max_degree` in graded order, with earlier
/// variables in `vars` taking precedence within a degree.
pub fn monomials_upto(max_degree: u32, vars: &[Var]) -> Vec<Monomial> {
    fn rec(vars: &[Var], left: u32, acc: &mut Vec<(Var, u32)>, out: &mut Vec<Monomial>) {
        match vars.split_first() {
            None => {
                if left == 0 {
                    out.push(Monomial::from_powers(acc.iter().copied()));
                }
            }
            Some((&v, rest)) => {
                for e in (0..=left).rev() {
                    acc.push((v, e));
                    rec(rest, left - e, acc, out);
                    acc.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    for d in 0..=max_degree {
        rec(vars, d, &mut Vec::new(), &mut out);
    }
    out
}

/// Gram basis for a polynomial of even degree `degree`.
pub fn half_basis(degree: u32, vars: &[Var]) -> Result<Vec<Monomial>, SosError> {
    if degree % 2 == 1 {
        return Err(SosError::OddDegree(degree));
    }
    Ok(monomials_upto(degree / 2, vars))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVar {
    pub name: String,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramVar {
    pub name: String,
    pub basis: Vec<Monomial>,
}

/// A polynomial whose coefficients are decisions.
#[derive(Debug, Clone, PartialEq)]
pub enum DecisionPoly {
    /// Unconstrained coefficients, one scalar per basis monomial.
    Free { basis: Vec<Monomial>, ids: Vec<usize> },
    /// `z^T G z` with `G` PSD.
    Sos { gram: usize, basis: Vec<Monomial> },
}

impl DecisionPoly {
    pub fn expr(&self) -> PolyExpr {
        match self {
            DecisionPoly::Free { basis, ids } => {
                let mut out = PolyExpr::zero();
                for (m, &id) in basis.iter().zip(ids) {
                    out.terms.entry(m.clone()).or_default().add_scaled(&LinExpr::dec(Dec::Scalar(id)), 1.0);
                }
                out
            }
            DecisionPoly::Sos { gram, basis } => gram_expr(*gram, basis),
        }
    }

    pub fn degree(&self) -> u32 {
        match self {
            DecisionPoly::Free { basis, .. } => basis.iter().map(Monomial::degree).max().unwrap_or(0),
            DecisionPoly::Sos { basis, .. } => 2 * basis.iter().map(Monomial::degree).max().unwrap_or(0),
        }
    }
}

fn gram_expr(gram: usize, basis: &[Monomial]) -> PolyExpr {
    let mut out = PolyExpr::zero();
    for i in 0..basis.len() {
        for j in i..basis.len() {
            let w = if i == j { 1.0 } else { 2.0 };
            out.terms
                .entry(basis[i].mul(&basis[j]))
                .or_default()
                .add_scaled(&LinExpr::term(Dec::Gram { gram, i, j }, w), 1.0);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SosConstraint {
    pub name: String,
    pub expr: PolyExpr,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SosProgram {
    pub vars: Vec<Var>,
    pub scalars: Vec<ScalarVar>,
    pub grams: Vec<GramVar>,
    pub constraints: Vec<SosConstraint>,
    /// `expr >= 0`.
    pub linear: Vec<(String, LinExpr)>,
    /// Minimized.
    pub objective: LinExpr,
}

impl SosProgram {
    pub fn new(vars: &[Var]) -> Self {
        SosProgram { vars: vars.to_vec(), ..Default::default() }
    }

    pub fn scalar(&mut self, name: &str, lower: Option<f64>, upper: Option<f64>) -> usize {
        self.scalars.push(ScalarVar { name: name.into(), lower, upper });
        self.scalars.len() - 1
    }

    pub fn free_poly(&mut self, name: &str, basis: Vec<Monomial>) -> DecisionPoly {
        let ids = (0..basis.len()).map(|k| self.scalar(&format!("{name}[{k}]"), None, None)).collect();
        DecisionPoly::Free { basis, ids }
    }

    /// SOS decision polynomial of even degree `degree`.
    pub fn sos_poly(&mut self, name: &str, degree: u32) -> Result<DecisionPoly, SosError> {
        let basis = half_basis(degree, &self.vars)?;
        self.grams.push(GramVar { name: name.into(), basis: basis.clone() });
        Ok(DecisionPoly::Sos { gram: self.grams.len() - 1, basis })
    }

    pub fn add_sos(&mut self, name: &str, expr: PolyExpr) {
        self.constraints.push(SosConstraint { name: name.into(), expr });
    }

    pub fn add_ge(&mut self, name: &str, expr: LinExpr) {
        self.linear.push((name.into(), expr));
    }

    /// Builds the standard-form SDP and the bookkeeping needed to read it back.
    pub fn to_sdp(&self) -> Lifted {
        let mut sdp = SdpProblem::new();
        let scalar_refs: Vec<VarRef> = self
            .scalars
            .iter()
            .map(|s| match (s.lower, s.upper) {
                (Some(0.0), None) => sdp.add_nonneg(),
                _ => sdp.add_free(),
            })
            .collect();
        for (s, &r) in self.scalars.iter().zip(&scalar_refs) {
            let nonneg_direct = matches!(r, VarRef::NonNeg(_));
            if let (Some(l), false) = (s.lower, nonneg_direct) {
                let slack = sdp.add_nonneg();
                sdp.add_row(vec![(r, 1.0), (slack, -1.0)], l);
            }
            if let Some(u) = s.upper {
                let slack = sdp.add_nonneg();
                sdp.add_row(vec![(r, 1.0), (slack, 1.0)], u);
            }
        }
        let gram_blocks: Vec<usize> = self.grams.iter().map(|g| sdp.add_block(g.basis.len())).collect();
        let resolve = |d: &Dec| match *d {
            Dec::Scalar(k) => scalar_refs[k],
            Dec::Gram { gram, i, j } => VarRef::psd(gram_blocks[gram], i, j),
        };
        let mut lifts = Vec::with_capacity(self.constraints.len());
        for c in &self.constraints {
            let deg = c.expr.degree();
            let basis = monomials_upto(deg.div_ceil(2), &self.vars);
            let block = sdp.add_block(basis.len());
            let scale = match c.expr.max_abs() {
                s if s > 0.0 => s,
                _ => 1.0,
            };
            let mut rows: BTreeMap<Monomial, Vec<(VarRef, f64)>> = BTreeMap::new();
            let mut rhs: BTreeMap<Monomial, f64> = BTreeMap::new();
            for i in 0..basis.len() {
                for j in i..basis.len() {
                    let w = if i == j { 1.0 } else { 2.0 };
                    rows.entry(basis[i].mul(&basis[j])).or_default().push((VarRef::psd(block, i, j), w));
                }
            }
            for (m, e) in c.expr.terms() {
                let row = rows.entry(m.clone()).or_default();
                for (d, coef) in &e.terms {
                    if *coef != 0.0 {
                        row.push((resolve(d), -coef / scale));
                    }
                }
                *rhs.entry(m.clone()).or_insert(0.0) += e.constant / scale;
            }
            let mut first_row = None;
            for (m, row) in rows {
                let r = sdp.add_row(row, rhs.get(&m).copied().unwrap_or(0.0));
                first_row.get_or_insert(r);
            }
            lifts.push(ConstraintLift { block, basis, scale });
        }
        for (_, e) in &self.linear {
            let slack = sdp.add_nonneg();
            let mut row: Vec<(VarRef, f64)> = e.terms.iter().map(|(d, c)| (resolve(d), *c)).collect();
            row.push((slack, -1.0));
            sdp.add_row(row, -e.constant);
        }
        sdp.objective = self.objective.terms.iter().map(|(d, c)| (resolve(d), *c)).collect();
        Lifted { sdp, scalar_refs, gram_blocks, constraints: lifts }
    }

    /// Lifts, solves and extracts.
    pub fn solve(&self, backend: &dyn SdpBackend, settings: &Settings) -> Result<SosSolution, SosError> {
        self.solve_with_tol(backend, settings, MATCH_TOL)
    }

    /// As [`SosProgram::solve`] with a custom defect tolerance, for callers
    /// that only need a candidate and certify it separately.
    pub fn solve_with_tol(
        &self,
        backend: &dyn SdpBackend,
        settings: &Settings,
        match_tol: f64,
    ) -> Result<SosSolution, SosError> {
        let lifted = self.to_sdp();
        let sol = backend.solve(&lifted.sdp, settings);
        lifted.extract_with_tol(self, sol, match_tol)
    }

    /// The lifted SDP in the sparse debug text format.
    pub fn export_sdp(&self) -> String {
        sbarrier_sdp::text::write(&self.to_sdp().sdp)
    }
}

#[derive(Debug, Clone)]
pub struct ConstraintLift {
    pub block: usize,
    pub basis: Vec<Monomial>,
    pub scale: f64,
}

#[derive(Debug, Clone)]
pub struct Lifted {
    pub sdp: SdpProblem,
    scalar_refs: Vec<VarRef>,
    gram_blocks: Vec<usize>,
    pub constraints: Vec<ConstraintLift>,
}

fn quadratic_form(g: &DMatrix<f64>, basis: &[Monomial]) -> Polynomial {
    let mut terms = Vec::with_capacity(basis.len() * basis.len());
    for i in 0..basis.len() {
        for j in 0..basis.len() {
            terms.push((basis[i].mul(&basis[j]), g[(i, j)]));
        }
    }
    Polynomial::from_terms(terms)
}

impl Lifted {
    /// Reads decisions back and checks the lift: every Gram block PSD to
    /// [`EIGEN_TOL`] and every coefficient-matching equation within
    /// [`MATCH_TOL`]. A non-optimal status is accepted when these checks
    /// pass, since a feasible point is all a certificate needs.
    pub fn extract(&self, program: &SosProgram, sol: SdpSolution) -> Result<SosSolution, SosError> {
        self.extract_with_tol(program, sol, MATCH_TOL)
    }

    pub fn extract_with_tol(
        &self,
        program: &SosProgram,
        sol: SdpSolution,
        match_tol: f64,
    ) -> Result<SosSolution, SosError> {
        if matches!(sol.status, Status::Infeasible | Status::Unbounded) {
            return Err(SosError::Infeasible { status: sol.status, iterations: sol.iterations });
        }
        let scalars: Vec<f64> = program
            .scalars
            .iter()
            .zip(&self.scalar_refs)
            .map(|(s, &r)| {
                let v = sol.value(r);
                v.max(s.lower.unwrap_or(f64::NEG_INFINITY)).min(s.upper.unwrap_or(f64::INFINITY))
            })
            .collect();
        let raw_grams: Vec<DMatrix<f64>> = self.gram_blocks.iter().map(|&b| sol.blocks[b].clone()).collect();
        if !sol.blocks.iter().all(|b| b.iter().all(|v| v.is_finite())) {
            return Err(SosError::Solver { status: sol.status, residual: f64::NAN, min_eigenvalue: f64::NAN });
        }
        let mut out = SosSolution {
            status: sol.status,
            scalars,
            grams: raw_grams.iter().map(psd_clip).collect(),
            constraint_grams: Vec::new(),
            defects: Vec::new(),
            max_residual: 0.0,
            min_eigenvalue: f64::INFINITY,
            objective: 0.0,
            iterations: sol.iterations,
            primal_residual: sol.primal_residual,
            gap: sol.gap,
        };
        out.min_eigenvalue = sol
            .blocks
            .iter()
            .map(|b| b.clone().symmetric_eigenvalues().min() / b.amax().max(1.0))
            .fold(f64::INFINITY, f64::min);
        for (c, lift) in program.constraints.iter().zip(&self.constraints) {
            let g = psd_clip(&sol.blocks[lift.block].scale(lift.scale));
            let expr = out.poly(&c.expr);
            let defect = (&expr - &quadratic_form(&g, &lift.basis)).l1_norm();
            out.max_residual = out.max_residual.max(defect / lift.scale);
            out.defects.push(defect);
            out.constraint_grams.push(g);
        }
        out.objective = out.value(&program.objective);
        if out.max_residual > match_tol || out.min_eigenvalue < -EIGEN_TOL {
            return Err(SosError::Solver {
                status: sol.status,
                residual: out.max_residual,
                min_eigenvalue: out.min_eigenvalue,
            });
        }
        Ok(out)
    }
}

/// Nearest PSD matrix in Frobenius norm: negative eigenvalues set to zero.
fn psd_clip(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    if eig.eigenvalues.min() >= 0.0 {
        return sym;
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0)));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SosSolution {
    pub status: Status,
    pub scalars: Vec<f64>,
    /// Gram matrices of SOS decision polynomials.
    pub grams: Vec<DMatrix<f64>>,
    /// Gram matrices of the constraints, in unscaled units.
    pub constraint_grams: Vec<DMatrix<f64>>,
    /// Per constraint, the l1 norm of `expr - z^T G z` after every Gram
    /// matrix is clipped to PSD. On the unit box the constraint polynomial
    /// is at least `-defect` wherever its multipliers' sets hold.
    pub defects: Vec<f64>,
    /// Worst defect over constraints, scaled units.
    pub max_residual: f64,
    pub min_eigenvalue: f64,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub gap: f64,
}

impl SosSolution {
    fn dec(&self, d: &Dec) -> f64 {
        match *d {
            Dec::Scalar(k) => self.scalars[k],
            Dec::Gram { gram, i, j } => self.grams[gram][(i, j)],
        }
    }

    pub fn value(&self, e: &LinExpr) -> f64 {
        e.terms.iter().fold(e.constant, |acc, (d, c)| acc + c * self.dec(d))
    }

    pub fn scalar(&self, id: usize) -> f64 {
        self.scalars[id]
    }

    pub fn poly(&self, e: &PolyExpr) -> Polynomial {
        Polynomial::from_terms(e.terms().map(|(m, c)| (m.clone(), self.value(c))))
    }

    pub fn decision_poly(&self, p: &DecisionPoly) -> Polynomial {
        self.poly(&p.expr())
    }
}

/// Decision values by name, for reports and debugging.
pub fn named_scalars(program: &SosProgram, sol: &SosSolution) -> HashMap<String, f64> {
    program.scalars.iter().zip(&sol.scalars).map(|(s, v)| (s.name.clone(), *v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use sbarrier_sdp::InteriorPoint;

    fn p(s: &str) -> Polynomial {
        s.parse().unwrap()
    }

    #[test]
    fn half_basis_examples() {
        let (x, y) = (Var::new("x"), Var::new("y"));
        let show = |b: Vec<Monomial>| b.iter().map(|m| m.to_string()).collect::<Vec<_>>();
        assert_eq!(show(half_basis(2, &[x]).unwrap()), ["1", "x"]);
        assert_eq!(show(half_basis(4, &[x, y]).unwrap()), ["1", "x", "y", "x^2", "x*y", "y^2"]);
        let (x1, x2) = (Var::new("x1"), Var::new("x2"));
        assert_eq!(show(half_basis(2, &[x1, x2]).unwrap()), ["1", "x1", "x2"]);
        assert_eq!(half_basis(3, &[x]), Err(SosError::OddDegree(3)));
        // declared order wins over interning order
        assert_eq!(show(half_basis(2, &[y, x]).unwrap()), ["1", "y", "x"]);
    }

    #[test]
    fn shift_to_make_square_is_zero() {
        let x = Var::new("x");
        let mut prog = SosProgram::new(&[x]);
        let c = prog.scalar("c", None, None);
        let mut e = PolyExpr::from_poly(&p("x^2"));
        e.add_scaled_poly(&p("1"), &LinExpr::dec(Dec::Scalar(c)));
        prog.add_sos("shifted", e);
        prog.objective = LinExpr::dec(Dec::Scalar(c));
        let lifted = prog.to_sdp();
        assert_eq!(lifted.sdp.blocks, vec![2]);
        let sol = prog.solve(&InteriorPoint, &Settings::default()).unwrap();
        assert!(sol.scalar(c).abs() < 1e-6, "{}", sol.scalar(c));
    }

    #[test]
    fn odd_leading_term_is_infeasible() {
        let x = Var::new("x");
        let mut prog = SosProgram::new(&[x]);
        let c = prog.scalar("c", None, None);
        let mut e = PolyExpr::from_poly(&p("x"));
        e.add_scaled_poly(&p("1"), &LinExpr::dec(Dec::Scalar(c)));
        prog.add_sos("odd", e);
        prog.objective = LinExpr::dec(Dec::Scalar(c));
        let r = prog.solve(&InteriorPoint, &Settings::default());
        assert!(matches!(r, Err(SosError::Infeasible { .. }) | Err(SosError::Solver { .. })), "{r:?}");
    }

    #[test]
    fn explicit_square_recovers_gram() {
        let x = Var::new("x");
        let mut prog = SosProgram::new(&[x]);
        prog.add_sos("square", PolyExpr::from_poly(&p("(x - 1)^2")));
        let sol = prog.solve(&InteriorPoint, &Settings::default()).unwrap();
        let g = &sol.constraint_grams[0];
        let want = [[1.0, -1.0], [-1.0, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((g[(i, j)] - want[i][j]).abs() < 1e-6, "{g}");
            }
        }
    }

    #[test]
    fn sos_decision_poly_and_bounds() {
        // min t s.t. x^4 + t - lambda(x) (1 - x^2) is SOS, lambda SOS deg 2,
        // t in [-5, 5]. Optimum: t = 0 (x^4 >= 0 is already SOS).
        let x = Var::new("x");
        let mut prog = SosProgram::new(&[x]);
        let t = prog.scalar("t", Some(-5.0), Some(5.0));
        let lam = prog.sos_poly("lambda", 2).unwrap();
        let mut e = PolyExpr::from_poly(&p("x^4"));
        e.add_scaled_poly(&p("1"), &LinExpr::dec(Dec::Scalar(t)));
        let e = e - &lam.expr().mul_poly(&p("1 - x^2"));
        prog.add_sos("c", e);
        prog.objective = LinExpr::dec(Dec::Scalar(t));
        let sol = prog.solve(&InteriorPoint, &Settings::default()).unwrap();
        // on [-1, 1] min x^4 = 0 so t* = 0; the multiplier cannot help below 0
        assert!(sol.scalar(t).abs() < 1e-5, "t = {}", sol.scalar(t));
        assert!(sol.max_residual <= MATCH_TOL);
    }

    #[test]
    fn debug_export_round_trips() {
        let x = Var::new("x");
        let mut prog = SosProgram::new(&[x]);
        let c = prog.scalar("c", Some(0.0), None);
        let mut e = PolyExpr::from_poly(&p("x^2 - 2*x"));
        e.add_scaled_poly(&p("1"), &LinExpr::dec(Dec::Scalar(c)));
        prog.add_sos("s", e);
        prog.add_ge("c<=3", LinExpr::constant(3.0) + &LinExpr::term(Dec::Scalar(c), -1.0));
        prog.objective = LinExpr::dec(Dec::Scalar(c));
        let text = prog.export_sdp();
        let back = sbarrier_sdp::text::read(&text).unwrap();
        assert_eq!(back, prog.to_sdp().sdp);
        let sol = prog.solve(&InteriorPoint, &Settings::default()).unwrap();
        assert!((sol.scalar(c) - 1.0).abs() < 1e-6);
    }
}
