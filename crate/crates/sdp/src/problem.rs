use std::fmt;

use thiserror::Error;

/// Address of a single scalar inside the SDP variable space.
///
/// `Psd` entries always refer to the upper triangle (`row <= col`); a
/// coefficient `c` on `Psd { row, col }` contributes `c * X[row][col]`
/// to the linear functional, with the entry counted once even when it is
/// off-diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarRef {
    Free(usize),
    NonNeg(usize),
    Psd { block: usize, row: usize, col: usize },
}

impl VarRef {
    /// Builds a PSD reference, normalizing to the upper triangle.
    pub fn psd(block: usize, i: usize, j: usize) -> Self {
        let (row, col) = if i <= j { (i, j) } else { (j, i) };
        VarRef::Psd { block, row, col }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("row {row} references {var:?}, which is not declared")]
    UndeclaredVariable { row: usize, var: VarRef },
    #[error("objective references {0:?}, which is not declared")]
    UndeclaredObjectiveVariable(VarRef),
    #[error("block {0} has dimension zero")]
    EmptyBlock(usize),
    #[error("{rows} equality rows but {rhs} right-hand side entries")]
    RhsLength { rows: usize, rhs: usize },
    #[error("non-finite coefficient in row {0}")]
    NonFinite(usize),
}

/// A standard-form semidefinite program.
///
/// ```text
/// minimize    <objective, x>
/// subject to  <rows[i], x> = rhs[i]
///             x = (free, nonneg >= 0, X_1 ⪰ 0, ..., X_k ⪰ 0)
/// ```
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SdpProblem {
    pub n_free: usize,
    pub n_nonneg: usize,
    pub blocks: Vec<usize>,
    pub rows: Vec<Vec<(VarRef, f64)>>,
    pub rhs: Vec<f64>,
    pub objective: Vec<(VarRef, f64)>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_free(&mut self) -> VarRef {
        self.n_free += 1;
        VarRef::Free(self.n_free - 1)
    }

    pub fn add_nonneg(&mut self) -> VarRef {
        self.n_nonneg += 1;
        VarRef::NonNeg(self.n_nonneg - 1)
    }

    /// Declares a PSD block of dimension `dim` and returns its index.
    pub fn add_block(&mut self, dim: usize) -> usize {
        self.blocks.push(dim);
        self.blocks.len() - 1
    }

    /// Appends the equality row `<coeffs, x> = rhs` and returns its index.
    pub fn add_row(&mut self, coeffs: Vec<(VarRef, f64)>, rhs: f64) -> usize {
        self.rows.push(coeffs);
        self.rhs.push(rhs);
        self.rows.len() - 1
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    fn declared(&self, v: &VarRef) -> bool {
        match *v {
            VarRef::Free(i) => i < self.n_free,
            VarRef::NonNeg(i) => i < self.n_nonneg,
            VarRef::Psd { block, row, col } => {
                block < self.blocks.len() && row <= col && col < self.blocks[block]
            }
        }
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        if self.rows.len() != self.rhs.len() {
            return Err(ProblemError::RhsLength { rows: self.rows.len(), rhs: self.rhs.len() });
        }
        if let Some(k) = self.blocks.iter().position(|&d| d == 0) {
            return Err(ProblemError::EmptyBlock(k));
        }
        for (i, row) in self.rows.iter().enumerate() {
            for (v, c) in row {
                if !self.declared(v) {
                    return Err(ProblemError::UndeclaredVariable { row: i, var: *v });
                }
                if !c.is_finite() {
                    return Err(ProblemError::NonFinite(i));
                }
            }
            if !self.rhs[i].is_finite() {
                return Err(ProblemError::NonFinite(i));
            }
        }
        for (v, _) in &self.objective {
            if !self.declared(v) {
                return Err(ProblemError::UndeclaredObjectiveVariable(*v));
            }
        }
        Ok(())
    }
}

impl fmt::Display for SdpProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SDP: {} rows, {} free, {} nonneg, blocks {:?}",
            self.rows.len(),
            self.n_free,
            self.n_nonneg,
            self.blocks
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psd_refs_normalize_to_upper_triangle() {
        assert_eq!(VarRef::psd(0, 2, 1), VarRef::Psd { block: 0, row: 1, col: 2 });
    }

    #[test]
    fn validation_catches_undeclared_refs() {
        let mut p = SdpProblem::new();
        let b = p.add_block(2);
        p.add_row(vec![(VarRef::psd(b, 0, 2), 1.0)], 1.0);
        assert!(matches!(p.validate(), Err(ProblemError::UndeclaredVariable { row: 0, .. })));

        let mut p = SdpProblem::new();
        p.add_free();
        p.objective.push((VarRef::NonNeg(0), 1.0));
        assert_eq!(p.validate(), Err(ProblemError::UndeclaredObjectiveVariable(VarRef::NonNeg(0))));
    }

    #[test]
    fn zero_dimension_blocks_are_rejected() {
        let mut p = SdpProblem::new();
        p.add_block(0);
        assert_eq!(p.validate(), Err(ProblemError::EmptyBlock(0)));
    }
}
