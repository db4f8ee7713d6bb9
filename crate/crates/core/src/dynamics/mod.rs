//! Control-affine systems `ẋ = f(x) + g(x)u + k(x)w`, fixed-step
//! integration and window quadrature.

mod engagement;
mod integrate;
mod quadrature;
mod systems;

pub use engagement::{step_engagement, EngagementState, Step, R_GUARD};
pub use integrate::{integrate_substeps, integrate_window, SampleWindow};
pub use quadrature::{composite_weights, integrate_samples, quadrature_over_window, quadrature_over_window_vec};
pub use systems::{make_example_a, make_linear_game, ExampleA, LinearGame, LosDynamics};

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// A system affine in its control and disturbance inputs together with the
/// state penalty `Q(x) = ‖z‖²`.
///
/// Implementations assume `x` has [`state_dim`](Self::state_dim) entries;
/// public entry points validate with [`check_state`].
pub trait AffineDynamics: Send + Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn disturbance_dim(&self) -> usize;

    /// `f(x)`, an n-vector.
    fn drift(&self, x: &DVector<f64>) -> DVector<f64>;
    /// `g(x)`, n×m.
    fn control_gain(&self, x: &DVector<f64>) -> DMatrix<f64>;
    /// `k(x)`, n×q.
    fn disturbance_gain(&self, x: &DVector<f64>) -> DMatrix<f64>;
    /// `Q(x) ≥ 0`.
    fn state_cost(&self, x: &DVector<f64>) -> f64;

    fn vector_field(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        self.drift(x) + self.control_gain(x) * u + self.disturbance_gain(x) * w
    }
}

pub fn check_state(dynamics: &dyn AffineDynamics, x: &DVector<f64>) -> Result<()> {
    check_len("state", dynamics.state_dim(), x.len())
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { what, expected, found })
    }
}
