//! Ground truth for linear-quadratic zero-sum games.
//!
//! With `ẋ = Ax + Bu + Dw` and `V = xᵀPx` the HJI equation becomes the game
//! algebraic Riccati equation
//!
//! ```text
//! AᵀP + PA + Qm − PBR⁻¹BᵀP + γ⁻²PDDᵀP = 0.
//! ```
//!
//! [`solve_gare`] runs the simultaneous policy update in matrix form (one
//! Lyapunov solve per step) starting from the ordinary Riccati solution,
//! which [`solve_are`] computes with the matrix sign function.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::linalg::{is_symmetric, solve_lyapunov};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GareSolution {
    pub p: DMatrix<f64>,
    /// `K = R⁻¹BᵀP`, so `u* = −Kx`.
    pub control_gain: DMatrix<f64>,
    /// `L = γ⁻²DᵀP`, so `w* = Lx`.
    pub disturbance_gain: DMatrix<f64>,
    /// Lyapunov steps taken from the Riccati start.
    pub iterations: usize,
}

/// `AᵀP + PA + Qm − PBR⁻¹BᵀP + γ⁻²PDDᵀP`.
pub fn gare_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    d: &DMatrix<f64>,
    qm: &DMatrix<f64>,
    r: &DMatrix<f64>,
    gamma: f64,
    p: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let rinv = r.clone().try_inverse().ok_or(Error::NotSymmetricPsd)?;
    Ok(a.transpose() * p + p * a + qm - p * b * rinv * b.transpose() * p
        + p * d * d.transpose() * p / (gamma * gamma))
}

fn check_shapes(a: &DMatrix<f64>, b: &DMatrix<f64>, d: &DMatrix<f64>, qm: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<()> {
    let n = a.nrows();
    let mismatch = |what, expected, found| Err(Error::DimensionMismatch { what, expected, found });
    if a.ncols() != n {
        return mismatch("A columns", n, a.ncols());
    }
    if b.nrows() != n {
        return mismatch("B rows", n, b.nrows());
    }
    if d.nrows() != n {
        return mismatch("D rows", n, d.nrows());
    }
    if qm.shape() != (n, n) {
        return mismatch("Qm size", n, qm.nrows());
    }
    if r.shape() != (b.ncols(), b.ncols()) {
        return mismatch("R size", b.ncols(), r.nrows());
    }
    Ok(())
}

/// Matrix sign function by scaled Newton iteration.
fn matrix_sign(h: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let dim = h.nrows();
    let mut z = h.clone();
    for _ in 0..100 {
        let inv = z.clone().try_inverse()?;
        let det = z.determinant().abs();
        let c = if det > 0.0 && det.is_finite() {
            libm::pow(det, -1.0 / dim as f64)
        } else {
            1.0
        };
        let next = (&z * c + inv / c) * 0.5;
        let change = (&next - &z).norm();
        z = next;
        if !z.iter().all(|v| v.is_finite()) {
            return None;
        }
        if change <= 1e-13 * z.norm() {
            return Some(z);
        }
    }
    Some(z)
}

/// Stabilizing solution of `AᵀP + PA + Qm − PGP = 0` from the sign of the
/// Hamiltonian matrix `[[A, −G], [−Qm, −Aᵀ]]`.
fn riccati_by_sign(a: &DMatrix<f64>, g: &DMatrix<f64>, qm: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-qm));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));
    let s = matrix_sign(&h)?;
    let eye = DMatrix::<f64>::identity(n, n);
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&s.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n)).copy_from(&(s.view((n, n), (n, n)) + &eye));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(s.view((0, 0), (n, n)) + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-s.view((n, 0), (n, n))));
    let p = lhs.svd(true, true).solve(&rhs, 1e-14).ok()?;
    let p = (&p + p.transpose()) * 0.5;
    p.iter().all(|v| v.is_finite()).then_some(p)
}

/// Stabilizing solution of the ordinary Riccati equation
/// `AᵀP + PA + Qm − PBR⁻¹BᵀP = 0`.
pub fn solve_are(a: &DMatrix<f64>, b: &DMatrix<f64>, qm: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = DMatrix::zeros(a.nrows(), 0);
    check_shapes(a, b, &d, qm, r)?;
    let rinv = r.clone().try_inverse().ok_or(Error::NotSymmetricPsd)?;
    let g = b * rinv * b.transpose();
    let p = riccati_by_sign(a, &g, qm).ok_or(Error::GammaTooSmall)?;
    let res = a.transpose() * &p + &p * a + qm - &p * &g * &p;
    if res.norm() > 1e-8 * (1.0 + p.norm() + qm.norm()) {
        return Err(Error::GammaTooSmall);
    }
    Ok(p)
}

/// Real parts of the eigenvalues of a square matrix.
pub fn eigen_real_parts(m: &DMatrix<f64>) -> Vec<f64> {
    m.clone().complex_eigenvalues().iter().map(|z| z.re).collect()
}

pub fn is_hurwitz(m: &DMatrix<f64>) -> bool {
    eigen_real_parts(m).iter().all(|re| *re < 0.0)
}

/// Solves the game algebraic Riccati equation.
pub fn solve_gare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    d: &DMatrix<f64>,
    qm: &DMatrix<f64>,
    r: &DMatrix<f64>,
    gamma: f64,
) -> Result<GareSolution> {
    check_shapes(a, b, d, qm, r)?;
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(alloc::format!("gamma must be positive, got {gamma}")));
    }
    if !is_symmetric(qm, 1e-10) || !is_symmetric(r, 1e-10) {
        return Err(Error::NotSymmetricPsd);
    }
    let rinv = r.clone().try_inverse().ok_or(Error::NotSymmetricPsd)?;
    let g2 = gamma * gamma;
    let brb = b * &rinv * b.transpose();
    let ddt = d * d.transpose() / g2;

    let mut p = solve_are(a, b, qm, r)?;
    let mut iterations = 0;
    let scale = 1.0 + p.norm();
    loop {
        let closed = a - &brb * &p + &ddt * &p;
        let rhs = -(qm + &p * &brb * &p - &p * &ddt * &p);
        let next = solve_lyapunov(&closed, &rhs).map_err(|_| Error::GammaTooSmall)?;
        iterations += 1;
        if !next.iter().all(|v| v.is_finite()) || next.norm() > 1e12 * scale {
            return Err(Error::GammaTooSmall);
        }
        let change = (&next - &p).norm();
        p = next;
        if change <= 1e-14 * (1.0 + p.norm()) {
            break;
        }
        if iterations >= 200 {
            return Err(Error::GammaTooSmall);
        }
    }

    let res = gare_residual(a, b, d, qm, r, gamma, &p)?;
    let closed = a - &brb * &p + &ddt * &p;
    if res.norm() > 1e-8 * (1.0 + p.norm()) || !is_hurwitz(&closed) {
        return Err(Error::GammaTooSmall);
    }
    let control_gain = &rinv * b.transpose() * &p;
    let disturbance_gain = d.transpose() * &p / g2;
    Ok(GareSolution {
        p,
        control_gain,
        disturbance_gain,
        iterations,
    })
}

/// Weights of `xᵀPx` in the degree-2 monomial basis
/// (`BasisSet::quadratic`): `Pᵢᵢ` for `xᵢ²`, `2Pᵢⱼ` for `xᵢxⱼ`.
pub fn quadratic_weights(p: &DMatrix<f64>) -> DVector<f64> {
    let n = p.nrows();
    let mut w = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            w.push(if i == j { p[(i, i)] } else { p[(i, j)] + p[(j, i)] });
        }
    }
    DVector::from_vec(w)
}

/// Inverse of [`quadratic_weights`].
pub fn quadratic_matrix(n: usize, w: &DVector<f64>) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            if i == j {
                p[(i, i)] = w[k];
            } else {
                p[(i, j)] = 0.5 * w[k];
                p[(j, i)] = 0.5 * w[k];
            }
            k += 1;
        }
    }
    p
}
