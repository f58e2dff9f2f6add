//! Bounding boxes, rejection sampling and affine state normalization.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::Rng;

use super::{Horizon, ModelError, SafetyProblem, SemialgebraicSet, TimeDomain};
use crate::poly::{Monomial, Polynomial, Var};

/// Real roots of `sum_k c[k] t^k`, sorted ascending.
fn real_roots(c: &[f64]) -> Vec<f64> {
    let mut c = c.to_vec();
    while c.last().is_some_and(|v| *v == 0.0) {
        c.pop();
    }
    let d = c.len().saturating_sub(1);
    if d == 0 {
        return Vec::new();
    }
    let lead = c[d];
    let mut m = DMatrix::<f64>::zeros(d, d);
    for i in 1..d {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..d {
        m[(i, d - 1)] = -c[i] / lead;
    }
    let mut out: Vec<f64> = m
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= 1e-7 * (1.0 + z.re.abs()))
        .map(|z| polish(&c, z.re))
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

fn horner(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * t + a)
}

fn polish(c: &[f64], mut t: f64) -> f64 {
    let dc: Vec<f64> = c.iter().enumerate().skip(1).map(|(k, &a)| a * k as f64).collect();
    for _ in 0..3 {
        let d = horner(&dc, t);
        if d == 0.0 {
            break;
        }
        let step = horner(c, t) / d;
        if !step.is_finite() {
            break;
        }
        t -= step;
    }
    t
}

/// Univariate coefficient vector if `p` depends on `v` alone (constant excluded).
fn univariate(p: &Polynomial, v: Var) -> Vec<f64> {
    let mut c = vec![0.0; p.degree() as usize + 1];
    for (m, a) in p.terms() {
        let e = m.exponent(v);
        if e > 0 {
            c[e as usize] += a;
        }
    }
    c
}

/// `sup_t sum_{k>=1} c[k] t^k`, if finite.
fn supremum(c: &[f64]) -> Option<f64> {
    let deg = c.iter().rposition(|a| *a != 0.0);
    let Some(d) = deg else { return Some(0.0) };
    if d % 2 == 1 || c[d] > 0.0 {
        return None;
    }
    let dc: Vec<f64> = c.iter().enumerate().skip(1).map(|(k, &a)| a * k as f64).collect();
    real_roots(&dc).into_iter().map(|t| horner(c, t)).reduce(f64::max)
}

/// Outer box for `{x : s(x) >= 0}` when `s` has no cross terms. Each
/// coordinate is bounded using the supremum of the other coordinates' parts.
fn separable_box(s: &Polynomial, vars: &[Var]) -> Vec<Option<(f64, f64)>> {
    let mut out = vec![None; vars.len()];
    let separable = s.terms().all(|(m, _)| m.powers().len() <= 1)
        && s.variables().iter().all(|v| vars.contains(v));
    if !separable {
        return out;
    }
    let parts: Vec<Vec<f64>> = vars.iter().map(|&v| univariate(s, v)).collect();
    let sups: Vec<Option<f64>> = parts.iter().map(|c| supremum(c)).collect();
    let c0 = s.coefficient(&Monomial::one());
    for i in 0..vars.len() {
        let others: Option<f64> = (0..vars.len()).filter(|&j| j != i).map(|j| sups[j]).sum();
        let Some(others) = others else { continue };
        let mut q = parts[i].clone();
        q[0] += c0 + others;
        let d = q.iter().rposition(|a| *a != 0.0).unwrap_or(0);
        if d == 0 || d % 2 == 1 || q[d] > 0.0 {
            continue;
        }
        let roots = real_roots(&q);
        if let (Some(&lo), Some(&hi)) = (roots.first(), roots.last()) {
            let pad = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
            out[i] = Some((lo - pad, hi + pad));
        } else {
            // q < 0 everywhere: the set is empty
            out[i] = Some((0.0, 0.0));
        }
    }
    out
}

/// Intersected per-inequality boxes; `None` if some coordinate stays unbounded.
pub fn bounding_box(set: &SemialgebraicSet, vars: &[Var]) -> Option<Vec<(f64, f64)>> {
    partial_box(set, vars).into_iter().collect()
}

/// Per-coordinate bounds derivable from separable inequalities.
pub fn partial_box(set: &SemialgebraicSet, vars: &[Var]) -> Vec<Option<(f64, f64)>> {
    let mut acc: Vec<Option<(f64, f64)>> = vec![None; vars.len()];
    for s in &set.inequalities {
        for (a, b) in acc.iter_mut().zip(separable_box(s, vars)) {
            *a = match (*a, b) {
                (Some((l1, h1)), Some((l2, h2))) => Some((l1.max(l2), h1.min(h2))),
                (x, None) => x,
                (None, y) => y,
            };
        }
    }
    acc
}

/// Uniform samples from `{x in box : every set contains x}` by rejection.
/// Returns fewer than `count` points if `max_draws` is exhausted.
pub fn sample_sets<R: Rng>(
    rng: &mut R,
    vars: &[Var],
    bbox: &[(f64, f64)],
    sets: &[&SemialgebraicSet],
    count: usize,
    max_draws: usize,
) -> Vec<Vec<f64>> {
    let compiled: Vec<_> = sets
        .iter()
        .flat_map(|s| s.inequalities.iter())
        .map(|p| p.compile(vars).expect("set polynomials use state variables"))
        .collect();
    let mut out = Vec::with_capacity(count);
    let mut x = vec![0.0; vars.len()];
    for _ in 0..max_draws {
        if out.len() == count {
            break;
        }
        for (xi, &(lo, hi)) in x.iter_mut().zip(bbox) {
            *xi = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        }
        if compiled.iter().all(|c| c.eval(&x) >= 0.0) {
            out.push(x.clone());
        }
    }
    out
}

/// `x = center + half_width * y`, coordinate-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub vars: Vec<Var>,
    pub center: Vec<f64>,
    pub half_width: Vec<f64>,
}

impl AffineMap {
    pub fn identity(vars: &[Var]) -> Self {
        AffineMap { vars: vars.to_vec(), center: vec![0.0; vars.len()], half_width: vec![1.0; vars.len()] }
    }

    pub fn from_box(vars: &[Var], bbox: &[(f64, f64)]) -> Self {
        AffineMap {
            vars: vars.to_vec(),
            center: bbox.iter().map(|(l, h)| 0.5 * (l + h)).collect(),
            half_width: bbox.iter().map(|(l, h)| (0.5 * (h - l)).max(f64::MIN_POSITIVE)).collect(),
        }
    }

    /// `p(x)` rewritten as a polynomial in `y`.
    pub fn pull(&self, p: &Polynomial) -> Polynomial {
        let map: HashMap<Var, Polynomial> = self
            .vars
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, &Polynomial::constant(self.center[i]) + &Polynomial::var(v).scale(self.half_width[i])))
            .collect();
        p.substitute(&map)
    }

    /// `q(y)` rewritten as a polynomial in `x`.
    pub fn push(&self, q: &Polynomial) -> Polynomial {
        let map: HashMap<Var, Polynomial> = self
            .vars
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let h = self.half_width[i];
                (v, &Polynomial::var(v).scale(1.0 / h) - &Polynomial::constant(self.center[i] / h))
            })
            .collect();
        q.substitute(&map)
    }

    pub fn to_y(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.center).zip(&self.half_width).map(|((x, c), h)| (x - c) / h).collect()
    }

    pub fn to_x(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.center).zip(&self.half_width).map(|((y, c), h)| c + h * y).collect()
    }
}

impl SafetyProblem {
    /// Bounding box of the domain set.
    pub fn domain_box(&self) -> Result<Vec<(f64, f64)>, ModelError> {
        bounding_box(&self.domain, self.state()).ok_or_else(|| {
            ModelError::Invalid(
                "cannot derive a bounding box for the domain; give each state variable a \
                 separable bound such as (2 - x)*(x + 2)"
                    .into(),
            )
        })
    }

    /// The same problem in coordinates `y` with `x = c + h y`, where the
    /// domain's bounding box maps onto `[-1, 1]^n`. Variable names are kept.
    pub fn normalized(&self) -> Result<(SafetyProblem, AffineMap), ModelError> {
        let map = AffineMap::from_box(self.state(), &self.domain_box()?);
        Ok((self.transformed(&map), map))
    }

    pub fn transformed(&self, map: &AffineMap) -> SafetyProblem {
        let mut out = self.clone();
        let sys = &mut out.system;
        for (i, f) in sys.drift.iter_mut().enumerate() {
            let mut g = map.pull(f);
            if sys.time == TimeDomain::Discrete {
                g = &g - &Polynomial::constant(map.center[i]);
            }
            *f = g.scale(1.0 / map.half_width[i]);
        }
        for rows in [&mut sys.input, &mut sys.diffusion] {
            for (i, row) in rows.iter_mut().enumerate() {
                for e in row.iter_mut() {
                    *e = map.pull(e).scale(1.0 / map.half_width[i]);
                }
            }
        }
        for set in [&mut out.domain, &mut out.initial, &mut out.unsafe_set] {
            for s in set.inequalities.iter_mut() {
                *s = map.pull(s);
            }
        }
        for u in out.controller.iter_mut() {
            *u = map.pull(u);
        }
        if let Some(x0) = &out.initial_point {
            out.initial_point = Some(map.to_y(x0));
        }
        debug_assert!(matches!(
            (out.system.time, out.horizon),
            (TimeDomain::Continuous, Horizon::Time(_)) | (TimeDomain::Discrete, Horizon::Steps(_))
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_problem, SetRole};
    use rand::SeedableRng;

    fn set(ineqs: &[&str]) -> SemialgebraicSet {
        SemialgebraicSet::new(SetRole::Domain, ineqs.iter().map(|s| s.parse().unwrap()).collect()).unwrap()
    }

    #[test]
    fn roots_of_quadratic() {
        let r = real_roots(&[-4.0, 0.0, 1.0]);
        assert!((r[0] + 2.0).abs() < 1e-12 && (r[1] - 2.0).abs() < 1e-12);
        assert!(real_roots(&[1.0, 0.0, 1.0]).is_empty());
    }

    #[test]
    fn boxes_from_separable_inequalities() {
        let (a, b) = (Var::new("ga"), Var::new("gb"));
        let bx = bounding_box(&set(&["(ga + 3)*(2 - ga)", "(gb + 2)*(3 - gb)"]), &[a, b]).unwrap();
        assert!((bx[0].0 + 3.0).abs() < 1e-6 && (bx[0].1 - 2.0).abs() < 1e-6);
        assert!((bx[1].0 + 2.0).abs() < 1e-6 && (bx[1].1 - 3.0).abs() < 1e-6);
        let disc = bounding_box(&set(&["0.01 - (ga + 2)^2 - gb^2"]), &[a, b]).unwrap();
        assert!((disc[0].0 + 2.1).abs() < 1e-6 && (disc[0].1 + 1.9).abs() < 1e-6);
        assert!((disc[1].1 - 0.1).abs() < 1e-6);
        assert!(bounding_box(&set(&["ga - 1"]), &[a, b]).is_none());
        assert!(bounding_box(&set(&["1 - ga*gb"]), &[a, b]).is_none());
    }

    #[test]
    fn samples_lie_in_the_set() {
        let (a, b) = (Var::new("ga"), Var::new("gb"));
        let s = set(&["1 - ga^2 - gb^2"]);
        let bx = bounding_box(&s, &[a, b]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let pts = sample_sets(&mut rng, &[a, b], &bx, &[&s], 500, 100_000);
        assert_eq!(pts.len(), 500);
        assert!(pts.iter().all(|p| p[0] * p[0] + p[1] * p[1] <= 1.0));
    }

    const DT: &str = "[system]\ntime = discrete\nstate = x1, x2\ndrift = 0.5*x2; 0.5*x1 + 0.95*x2\n\
        input = 1; 0\ndiffusion = 0; 0.3\n[sets]\ndomain = x1*(4 - x1); x2*(4 - x2)\n\
        initial = 1 - x1^2 - x2^2\nunsafe = x1^2 + x2^2 - 2\n[horizon]\nN = 2\n[controller]\nu = -0.1*x1\n";

    #[test]
    fn normalization_preserves_barrier_quantities() {
        let prob = parse_problem(DT).unwrap();
        let (norm, map) = prob.normalized().unwrap();
        assert_eq!(map.center, vec![2.0, 2.0]);
        let b: Polynomial = "x1^2 + 0.3*x1*x2 + x2 + 1".parse().unwrap();
        let by = map.pull(&b);
        let ex = prob.step_expectation(&b).unwrap();
        let ey = norm.step_expectation(&by).unwrap();
        assert!((map.pull(&ex) - ey).max_abs_coefficient() < 1e-9);
        assert!((map.push(&by) - b).max_abs_coefficient() < 1e-9);
        let x = [0.7, 3.1];
        let y = map.to_y(&x);
        assert!((map.to_x(&y)[1] - 3.1).abs() < 1e-15);
        let s = &prob.domain.inequalities[0];
        let sy = &norm.domain.inequalities[0];
        let vars = prob.state();
        assert!((s.evaluate_at(vars, &x).unwrap() - sy.evaluate_at(vars, &y).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn normalization_commutes_with_generator() {
        let text = "[system]\ntime = continuous\nstate = x1, x2\ndrift = x2; -x1 - x2 - x1^3\ninput = 0; 1\n\
            diffusion = 0; 0.8\n[sets]\ndomain = (x1 + 3)*(2 - x1); (x2 + 2)*(3 - x2)\n\
            initial = 0.01 - (x1 + 2)^2 - x2^2\nunsafe = x2 - 2.25\n[horizon]\nT = 2\n[controller]\nu = 0.2*x1*x2\n";
        let prob = parse_problem(text).unwrap();
        let (norm, map) = prob.normalized().unwrap();
        let b: Polynomial = "x1^4 + x1*x2^2 + x2".parse().unwrap();
        let gx = prob.generator(&b).unwrap();
        let gy = norm.generator(&map.pull(&b)).unwrap();
        assert!((map.pull(&gx) - gy).max_abs_coefficient() < 1e-9);
    }
}
