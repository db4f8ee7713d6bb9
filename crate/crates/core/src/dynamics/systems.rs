use nalgebra::{DMatrix, DVector};

use super::{AffineDynamics, EngagementState};
use crate::linalg::is_symmetric;
use crate::{Error, Result};

/// Two-state benchmark:
///
/// ```text
/// ẋ₁ = −x₁ + x₂
/// ẋ₂ = −0.5x₁ − 0.5x₂ + 0.5x₂ sin²(x₁) + sin(x₁) u + cos(x₁) w
/// ```
///
/// with `z = x`, so `Q(x) = x₁² + x₂²`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExampleA;

pub fn make_example_a() -> ExampleA {
    ExampleA
}

impl AffineDynamics for ExampleA {
    fn state_dim(&self) -> usize {
        2
    }
    fn control_dim(&self) -> usize {
        1
    }
    fn disturbance_dim(&self) -> usize {
        1
    }

    fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        let (x1, x2) = (x[0], x[1]);
        let s = libm::sin(x1);
        DVector::from_vec(alloc::vec![-x1 + x2, -0.5 * x1 - 0.5 * x2 + 0.5 * x2 * s * s])
    }

    fn control_gain(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 1, &[0.0, libm::sin(x[0])])
    }

    fn disturbance_gain(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 1, &[0.0, libm::cos(x[0])])
    }

    fn state_cost(&self, x: &DVector<f64>) -> f64 {
        x.norm_squared()
    }
}

/// Linear game `ẋ = Ax + Bu + Dw` with `Q(x) = xᵀ Qm x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGame {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub qm: DMatrix<f64>,
}

pub fn make_linear_game(
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    d: DMatrix<f64>,
    qm: DMatrix<f64>,
) -> Result<LinearGame> {
    let n = a.nrows();
    let mismatch = |what, found| Error::DimensionMismatch { what, expected: n, found };
    if a.ncols() != n {
        return Err(mismatch("A columns", a.ncols()));
    }
    if b.nrows() != n {
        return Err(mismatch("B rows", b.nrows()));
    }
    if d.nrows() != n {
        return Err(mismatch("D rows", d.nrows()));
    }
    if qm.shape() != (n, n) {
        return Err(mismatch("Qm size", qm.nrows()));
    }
    if !is_symmetric(&qm, 1e-10) {
        return Err(Error::NotSymmetricPsd);
    }
    let sym = (&qm + qm.transpose()) * 0.5;
    let min_eig = sym.clone().symmetric_eigenvalues().min();
    if min_eig < -1e-10 * (1.0 + qm.amax()) {
        return Err(Error::NotSymmetricPsd);
    }
    Ok(LinearGame { a, b, d, qm: sym })
}

impl AffineDynamics for LinearGame {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    fn control_dim(&self) -> usize {
        self.b.ncols()
    }
    fn disturbance_dim(&self) -> usize {
        self.d.ncols()
    }
    fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x
    }
    fn control_gain(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.b.clone()
    }
    fn disturbance_gain(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.d.clone()
    }
    fn state_cost(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.qm * x))
    }
}

/// Line-of-sight dynamics of a planar engagement with state
/// `(x₁, x₂) = (θ, θ̇)`:
///
/// ```text
/// ẋ₁ = x₂
/// ẋ₂ = −(2V_r/r) x₂ + (cos(η−θ)/r) a_M − (cos(β−θ)/r) a_T
/// ```
///
/// The coefficients are frozen at one engagement state. The cost is
/// `Q = q₁x₁² + q₂x₂²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LosDynamics {
    pub range: f64,
    pub closing_velocity: f64,
    pub cos_missile: f64,
    pub cos_target: f64,
    pub q1: f64,
    pub q2: f64,
}

impl LosDynamics {
    pub fn frozen_at(s: &EngagementState, q1: f64, q2: f64) -> Self {
        Self {
            range: s.r,
            closing_velocity: s.closing_velocity(),
            cos_missile: libm::cos(s.eta - s.theta),
            cos_target: libm::cos(s.beta - s.theta),
            q1,
            q2,
        }
    }
}

impl AffineDynamics for LosDynamics {
    fn state_dim(&self) -> usize {
        2
    }
    fn control_dim(&self) -> usize {
        1
    }
    fn disturbance_dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(alloc::vec![x[1], -2.0 * self.closing_velocity / self.range * x[1]])
    }
    fn control_gain(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 1, &[0.0, self.cos_missile / self.range])
    }
    fn disturbance_gain(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 1, &[0.0, -self.cos_target / self.range])
    }
    fn state_cost(&self, x: &DVector<f64>) -> f64 {
        self.q1 * x[0] * x[0] + self.q2 * x[1] * x[1]
    }
}
