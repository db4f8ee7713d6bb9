//! Pieces shared by the on- and off-policy learners.

use alloc::vec::Vec;

/// Stopping rule on the change of the weight vector between iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Convergence {
    /// `‖W₊ − W‖₂ ≤ tol`.
    Absolute(f64),
    /// `‖W₊ − W‖₂ ≤ tol · max(1, ‖W₊‖₂)`.
    Relative(f64),
}

impl Convergence {
    pub fn is_met(&self, change: f64, norm: f64) -> bool {
        match *self {
            Convergence::Absolute(tol) => change <= tol,
            Convergence::Relative(tol) => change <= tol * norm.max(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Iterate<W> {
    pub weights: W,
    /// Euclidean norm of the change from the previous iterate.
    pub change: f64,
    /// Condition number of the regression that produced `weights`.
    pub condition: f64,
    /// Whether that regression needed the ridge fallback.
    pub ridged: bool,
}

/// Outcome of an iteration loop. A run that hits its iteration cap is not an
/// error; it is reported with `converged == false`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<W> {
    pub weights: W,
    pub history: Vec<Iterate<W>>,
    pub converged: bool,
}

impl<W> SolveReport<W> {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    /// Whether the final regression was solved without the ridge fallback.
    pub fn well_posed(&self) -> bool {
        self.history.last().is_some_and(|it| !it.ridged)
    }
}
