//! Standard-form semidefinite programming.
//!
//! [`SdpProblem`] describes `min <c, x>` subject to sparse linear equalities
//! over free scalars, nonnegative scalars and symmetric PSD blocks.
//! [`solve`] runs a dense primal-dual interior-point method and returns an
//! [`SdpSolution`] whose status is backed by the reported residuals.
//!
//! ```
//! use sbarrier_sdp::{solve, SdpProblem, Settings, Status, VarRef};
//!
//! // min t  s.t.  [[t, 1], [1, t]] ⪰ 0
//! let mut p = SdpProblem::new();
//! let t = p.add_free();
//! let b = p.add_block(2);
//! p.add_row(vec![(VarRef::psd(b, 0, 0), 1.0), (t, -1.0)], 0.0);
//! p.add_row(vec![(VarRef::psd(b, 1, 1), 1.0), (t, -1.0)], 0.0);
//! p.add_row(vec![(VarRef::psd(b, 0, 1), 1.0)], 1.0);
//! p.objective.push((t, 1.0));
//! let sol = solve(&p, &Settings::default());
//! assert_eq!(sol.status, Status::Optimal);
//! assert!((sol.value(t) - 1.0).abs() < 1e-6);
//! ```

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod problem;
mod solver;
pub mod text;

pub use problem::{ProblemError, SdpProblem, VarRef};
pub use solver::{solve, SdpSolution, Settings, Status};

/// Backend seam: anything that can turn an [`SdpProblem`] into an
/// [`SdpSolution`] honoring the same status/residual contract.
pub trait SdpBackend: Send + Sync {
    fn solve(&self, problem: &SdpProblem, settings: &Settings) -> SdpSolution;
}

/// The built-in interior-point solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct InteriorPoint;

impl SdpBackend for InteriorPoint {
    fn solve(&self, problem: &SdpProblem, settings: &Settings) -> SdpSolution {
        solve(problem, settings)
    }
}
