//! Sparse multivariate polynomials with `f64` coefficients.
//!
//! Variables are process-wide interned names ([`Var`]). Monomials are kept in
//! graded order (lower total degree first, then larger exponents on earlier
//! variables first), so `[1, x, y, x^2, x*y, y^2]` is sorted.
//!
//! ```
//! use stochastic_barrier::poly::Polynomial;
//!
//! let p: Polynomial = "(x + y)^2".parse().unwrap();
//! assert_eq!(p, "x^2 + 2*x*y + y^2".parse().unwrap());
//! ```

mod compiled;
mod parse;
mod var;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use compiled::CompiledPoly;
pub use parse::{parse_with, ParseError};
pub use var::Var;

/// Coefficients whose magnitude falls below this after arithmetic are dropped.
pub const DROP_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("no value for variable `{0}`")]
    MissingVariable(String),
    #[error("noise variable `{0}` listed twice")]
    DuplicateNoise(String),
}

/// A product of variable powers; exponents are positive and sorted by variable.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(Var, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: Var) -> Self {
        Monomial(vec![(v, 1)])
    }

    pub fn from_powers(powers: impl IntoIterator<Item = (Var, u32)>) -> Self {
        let mut acc: BTreeMap<Var, u32> = BTreeMap::new();
        for (v, e) in powers {
            *acc.entry(v).or_default() += e;
        }
        Monomial(acc.into_iter().filter(|&(_, e)| e > 0).collect())
    }

    pub fn powers(&self) -> &[(Var, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    pub fn exponent(&self, v: Var) -> u32 {
        self.0.iter().find(|&&(w, _)| w == v).map_or(0, |&(_, e)| e)
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    /// Splits into the part over `vars` and the remainder.
    pub fn split(&self, vars: &[Var]) -> (Monomial, Monomial) {
        let (inside, outside): (Vec<_>, Vec<_>) = self.0.iter().partition(|(v, _)| vars.contains(v));
        (Monomial(inside), Monomial(outside))
    }

    pub fn evaluate(&self, mut value: impl FnMut(Var) -> Option<f64>) -> Result<f64, PolyError> {
        let mut acc = 1.0;
        for &(v, e) in &self.0 {
            let x = value(v).ok_or_else(|| PolyError::MissingVariable(v.name().to_string()))?;
            acc *= x.powi(e as i32);
        }
        Ok(acc)
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {}
            o => return o,
        }
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        loop {
            match (a.get(i), b.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Less,
                (None, Some(_)) => return Ordering::Greater,
                (Some(&(va, ea)), Some(&(vb, eb))) => match va.cmp(&vb) {
                    Ordering::Less => return Ordering::Less,
                    Ordering::Greater => return Ordering::Greater,
                    Ordering::Equal => {
                        if ea != eb {
                            return eb.cmp(&ea);
                        }
                        i += 1;
                        j += 1;
                    }
                },
            }
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for (k, &(v, e)) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str("*")?;
            }
            if e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, PartialEq, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::from_terms([(Monomial::one(), c)])
    }

    pub fn var(v: Var) -> Self {
        Self::from_terms([(Monomial::var(v), 1.0)])
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, f64)>) -> Self {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p.prune();
        p
    }

    fn add_term(&mut self, m: Monomial, c: f64) {
        *self.terms.entry(m).or_insert(0.0) += c;
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| c.abs() >= DROP_TOL);
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, f64)> + '_ {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// `Some(c)` if the polynomial is the constant `c`.
    pub fn as_constant(&self) -> Option<f64> {
        match self.terms.len() {
            0 => Some(0.0),
            1 => self.terms.get(&Monomial::one()).copied(),
            _ => None,
        }
    }

    pub fn variables(&self) -> BTreeSet<Var> {
        self.terms.keys().flat_map(|m| m.0.iter().map(|&(v, _)| v)).collect()
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    /// Sum of absolute coefficients; bounds `|p|` on the unit box `[-1, 1]^n`.
    pub fn l1_norm(&self) -> f64 {
        self.terms().map(|(_, c)| c.abs()).sum()
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::from_terms(self.terms.iter().map(|(m, &c)| (m.clone(), c * k)))
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Polynomial::constant(1.0);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    pub fn differentiate(&self, v: Var) -> Self {
        let mut out = Self::zero();
        for (m, &c) in &self.terms {
            let e = m.exponent(v);
            if e == 0 {
                continue;
            }
            let powers = m.0.iter().map(|&(w, k)| (w, if w == v { k - 1 } else { k }));
            out.add_term(Monomial::from_powers(powers), c * e as f64);
        }
        out.prune();
        out
    }

    pub fn gradient(&self, vars: &[Var]) -> Vec<Polynomial> {
        vars.iter().map(|&v| self.differentiate(v)).collect()
    }

    /// Matrix of second partials; entry (j, i) is a clone of entry (i, j).
    pub fn hessian(&self, vars: &[Var]) -> Vec<Vec<Polynomial>> {
        let n = vars.len();
        let grad = self.gradient(vars);
        let mut h = vec![vec![Polynomial::zero(); n]; n];
        for i in 0..n {
            for j in i..n {
                let d = grad[i].differentiate(vars[j]);
                h[j][i] = d.clone();
                h[i][j] = d;
            }
        }
        h
    }

    /// Replaces each variable in `assignment` by its polynomial; other
    /// variables are left in place.
    pub fn substitute(&self, assignment: &HashMap<Var, Polynomial>) -> Self {
        let mut powers: HashMap<(Var, u32), Polynomial> = HashMap::new();
        let mut out = Self::zero();
        for (m, &c) in &self.terms {
            let mut term = Polynomial::constant(c);
            let mut kept = Vec::new();
            for &(v, e) in &m.0 {
                match assignment.get(&v) {
                    Some(q) => {
                        let qe = powers.entry((v, e)).or_insert_with(|| q.pow(e));
                        term = &term * &*qe;
                    }
                    None => kept.push((v, e)),
                }
            }
            let rest = Monomial(kept);
            for (tm, tc) in term.terms {
                out.add_term(tm.mul(&rest), tc);
            }
        }
        out.prune();
        out
    }

    /// Expectation over independent standard-normal noise variables.
    pub fn gaussian_expectation(&self, noise: &NoiseSpec) -> Self {
        let mut out = Self::zero();
        for (m, &c) in &self.terms {
            let (nm, rest) = m.split(&noise.vars);
            let moment: f64 = nm.0.iter().map(|&(_, e)| gaussian_moment(e)).product();
            if moment != 0.0 {
                out.add_term(rest, c * moment);
            }
        }
        out.prune();
        out
    }

    pub fn evaluate(&self, point: &HashMap<Var, f64>) -> Result<f64, PolyError> {
        self.evaluate_with(|v| point.get(&v).copied())
    }

    /// Evaluates with `values[k]` bound to `vars[k]`.
    pub fn evaluate_at(&self, vars: &[Var], values: &[f64]) -> Result<f64, PolyError> {
        self.evaluate_with(|v| vars.iter().position(|&w| w == v).map(|k| values[k]))
    }

    pub fn evaluate_with(&self, mut value: impl FnMut(Var) -> Option<f64>) -> Result<f64, PolyError> {
        let mut acc = 0.0;
        for (m, &c) in &self.terms {
            acc += c * m.evaluate(&mut value)?;
        }
        Ok(acc)
    }

    pub fn compile(&self, vars: &[Var]) -> Result<CompiledPoly, PolyError> {
        CompiledPoly::new(self, vars)
    }
}

/// E[xi^n] for a standard normal xi: 0 for odd n, (n-1)!! for even n.
pub fn gaussian_moment(n: u32) -> f64 {
    if n % 2 == 1 {
        return 0.0;
    }
    (1..n).step_by(2).map(|k| k as f64).product()
}

/// Independent standard-normal noise variables.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    vars: Vec<Var>,
}

impl NoiseSpec {
    pub fn new(vars: Vec<Var>) -> Result<Self, PolyError> {
        for (i, v) in vars.iter().enumerate() {
            if vars[..i].contains(v) {
                return Err(PolyError::DuplicateNoise(v.name().to_string()));
            }
        }
        Ok(NoiseSpec { vars })
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

impl From<f64> for Polynomial {
    fn from(c: f64) -> Self {
        Polynomial::constant(c)
    }
}

impl From<Var> for Polynomial {
    fn from(v: Var) -> Self {
        Polynomial::var(v)
    }
}

impl AddAssign<&Polynomial> for Polynomial {
    fn add_assign(&mut self, rhs: &Polynomial) {
        for (m, &c) in &rhs.terms {
            self.add_term(m.clone(), c);
        }
        self.prune();
    }
}

impl Add<&Polynomial> for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub<&Polynomial> for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, &c) in &rhs.terms {
            out.add_term(m.clone(), -c);
        }
        out.prune();
        out
    }
}

impl Mul<&Polynomial> for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out.prune();
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

macro_rules! owned_ops {
    ($($tr:ident $f:ident),*) => {$(
        impl $tr<Polynomial> for Polynomial {
            type Output = Polynomial;
            fn $f(self, rhs: Polynomial) -> Polynomial { (&self).$f(&rhs) }
        }
        impl $tr<&Polynomial> for Polynomial {
            type Output = Polynomial;
            fn $f(self, rhs: &Polynomial) -> Polynomial { (&self).$f(rhs) }
        }
        impl $tr<Polynomial> for &Polynomial {
            type Output = Polynomial;
            fn $f(self, rhs: Polynomial) -> Polynomial { self.$f(&rhs) }
        }
    )*};
}
owned_ops!(Add add, Sub sub, Mul mul);

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

/// Prints highest-degree terms first in a form [`str::parse`] accepts.
impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (m, &c)) in self.terms.iter().rev().enumerate() {
            let mag = c.abs();
            if k == 0 {
                if c < 0.0 {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if c < 0.0 { " - " } else { " + " })?;
            }
            if m.is_one() {
                write!(f, "{mag}")?;
            } else if mag == 1.0 {
                write!(f, "{m}")?;
            } else {
                write!(f, "{mag}*{m}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial({self})")
    }
}

/// Parses the infix grammar, interning every identifier as a variable.
impl std::str::FromStr for Polynomial {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, ParseError> {
        parse_with(s, &|name| Some(Polynomial::var(Var::new(name))))
    }
}

impl Serialize for Polynomial {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Polynomial {
        s.parse().unwrap()
    }

    #[test]
    fn graded_order_matches_half_basis_listing() {
        let (x, y) = (Var::new("x"), Var::new("y"));
        let mut ms = [
            Monomial::from_powers([(y, 2)]),
            Monomial::from_powers([(x, 1), (y, 1)]),
            Monomial::one(),
            Monomial::from_powers([(x, 2)]),
            Monomial::var(y),
            Monomial::var(x),
        ];
        ms.sort();
        let shown: Vec<String> = ms.iter().map(|m| m.to_string()).collect();
        assert_eq!(shown, ["1", "x", "y", "x^2", "x*y", "y^2"]);
    }

    #[test]
    fn arithmetic_examples() {
        assert_eq!(p("(x + 1) + (-x)"), p("1"));
        assert_eq!(p("x^2") + p("2*x^2"), p("3*x^2"));
        assert_eq!(p("(x-1)*(x+1)"), p("x^2 - 1"));
        assert_eq!(p("x + y").pow(2), p("x^2 + 2*x*y + y^2"));
        assert!((p("x") - p("x")).is_zero());
    }

    #[test]
    fn calculus_examples() {
        let (x, y) = (Var::new("x"), Var::new("y"));
        assert_eq!(p("x^3").differentiate(x), p("3*x^2"));
        assert!(p("y^2").differentiate(x).is_zero());
        assert_eq!(p("x^2*y").differentiate(x), p("2*x*y"));
        assert_eq!(p("x^2").hessian(&[x]), vec![vec![p("2")]]);
        assert_eq!(p("x*y").hessian(&[x, y]), vec![vec![p("0"), p("1")], vec![p("1"), p("0")]]);
        assert_eq!(p("x^4").hessian(&[x]), vec![vec![p("12*x^2")]]);
    }

    #[test]
    fn substitution_examples() {
        let x = Var::new("x");
        let sub = |q: &str| HashMap::from([(x, p(q))]);
        assert_eq!(p("x^2").substitute(&sub("x + 1")), p("x^2 + 2*x + 1"));
        assert_eq!(p("x").substitute(&sub("y")), p("y"));
        let expanded = p("x^2").substitute(&sub("0.5*x1 + 0.95*x2 + s*xi"));
        let expected = p("0.25*x1^2 + 0.95*x1*x2 + 0.9025*x2^2 + x1*s*xi + 1.9*x2*s*xi + s^2*xi^2");
        assert!((expanded - expected).max_abs_coefficient() < 1e-12);
    }

    #[test]
    fn expectation_examples() {
        let noise = NoiseSpec::new(vec![Var::new("xi")]).unwrap();
        assert_eq!(p("xi^2").gaussian_expectation(&noise), p("1"));
        assert!(p("x*xi^3").gaussian_expectation(&noise).is_zero());
        assert_eq!(p("xi^4 + x*xi^2 + x^2").gaussian_expectation(&noise), p("3 + x + x^2"));
        assert_eq!(gaussian_moment(6), 15.0);
        assert_eq!(gaussian_moment(0), 1.0);
    }

    #[test]
    fn duplicate_noise_is_rejected() {
        let v = Var::new("xi");
        assert!(matches!(NoiseSpec::new(vec![v, v]), Err(PolyError::DuplicateNoise(_))));
    }

    #[test]
    fn evaluation_examples() {
        let (x, x1, x2) = (Var::new("x"), Var::new("x1"), Var::new("x2"));
        assert_eq!(p("x^2 - 1").evaluate(&HashMap::from([(x, 2.0)])).unwrap(), 3.0);
        assert_eq!(p("7").evaluate(&HashMap::new()).unwrap(), 7.0);
        assert_eq!(p("x1^2 + x2^2").evaluate_at(&[x1, x2], &[3.0, 4.0]).unwrap(), 25.0);
        assert_eq!(p("x").evaluate(&HashMap::new()), Err(PolyError::MissingVariable("x".into())));
    }

    #[test]
    fn display_round_trips() {
        for s in ["0", "-3", "x^2 - 2*x*y + 0.1", "-x1^3*x2 + 1e-7*x2", "2.5*a*b^4 - a"] {
            let q = p(s);
            assert_eq!(p(&q.to_string()), q, "{s} -> {q}");
        }
        assert_eq!(p("1 - 2*x + x^2").to_string(), "x^2 - 2*x + 1");
    }

    #[test]
    fn tiny_coefficients_are_dropped() {
        let q = p("x + 1e-13*y");
        assert_eq!(q.num_terms(), 1);
    }
}
