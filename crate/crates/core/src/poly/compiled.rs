use super::{PolyError, Polynomial};
use super::var::Var;

/// A polynomial with variables resolved to slice positions, for hot loops.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledPoly {
    terms: Vec<(f64, Vec<(usize, i32)>)>,
}

impl CompiledPoly {
    pub(super) fn new(p: &Polynomial, vars: &[Var]) -> Result<Self, PolyError> {
        let mut terms = Vec::with_capacity(p.num_terms());
        for (m, c) in p.terms() {
            let mut powers = Vec::with_capacity(m.powers().len());
            for &(v, e) in m.powers() {
                let k = vars
                    .iter()
                    .position(|&w| w == v)
                    .ok_or_else(|| PolyError::MissingVariable(v.name().to_string()))?;
                powers.push((k, e as i32));
            }
            terms.push((c, powers));
        }
        Ok(CompiledPoly { terms })
    }

    /// Panics if `x` is shorter than the variable list used to compile.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, powers)| powers.iter().fold(*c, |acc, &(k, e)| acc * x[k].powi(e)))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_interpreted_evaluation() {
        let (a, b) = (Var::new("a"), Var::new("b"));
        let p: Polynomial = "a^3*b - 2*b^2 + 0.5".parse().unwrap();
        let c = p.compile(&[a, b]).unwrap();
        let x = [1.3, -0.7];
        assert!((c.eval(&x) - p.evaluate_at(&[a, b], &x).unwrap()).abs() < 1e-14);
        assert!(p.compile(&[a]).is_err());
    }
}
