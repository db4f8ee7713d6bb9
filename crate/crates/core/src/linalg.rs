//! Dense least squares and Lyapunov solves shared by the learners and the
//! Riccati oracle.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Condition number above which the ridge fallback is used.
pub const RIDGE_CONDITION: f64 = 1e12;
/// Ridge strength relative to `trace(AᵀA) / rows`.
pub const RIDGE_SCALE: f64 = 1e-10;

/// Outcome of [`solve_least_squares`].
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub solution: DVector<f64>,
    /// Smallest singular value of the excited columns after equilibration.
    pub smallest_singular_value: f64,
    /// Condition number of the excited columns after equilibration.
    pub condition: f64,
    /// Ridge parameter, when the fallback was taken.
    pub ridge: Option<f64>,
    /// Number of identically zero columns; their weights are set to zero.
    pub unexcited: usize,
    /// `‖A x − b‖∞` at the returned solution.
    pub residual_inf: f64,
}

/// Thin singular value decomposition `a = U diag(s) Vᵀ`.
///
/// `U` has the shape of `a`; columns belonging to zero singular values are
/// left at zero. Values are not sorted.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

/// One-sided Jacobi SVD. It rotates column pairs of `a` until they are
/// mutually orthogonal, which yields small singular values to full
/// relative accuracy; nalgebra's bidiagonal solver can stop early on
/// ill-conditioned inputs and leave errors far above rounding.
pub fn jacobi_svd(a: &DMatrix<f64>) -> ThinSvd {
    const MAX_SWEEPS: usize = 80;
    let (rows, cols) = a.shape();
    let mut u = a.clone();
    let mut v = DMatrix::identity(cols, cols);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = u.column(p).norm_squared();
                let beta = u.column(q).norm_squared();
                let gamma = u.column(p).dot(&u.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                for m in [&mut u, &mut v] {
                    for i in 0..m.nrows() {
                        let (x, y) = (m[(i, p)], m[(i, q)]);
                        m[(i, p)] = c * x - s * y;
                        m[(i, q)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let s = DVector::from_iterator(cols, u.column_iter().map(|c| c.norm()));
    for (j, sj) in s.iter().enumerate() {
        if *sj > 0.0 {
            u.column_mut(j).unscale_mut(*sj);
        }
    }
    debug_assert_eq!(u.nrows(), rows);
    ThinSvd { u, s, v }
}

/// Minimises `‖A x − b‖₂` with an SVD of the column-equilibrated matrix.
///
/// Identically zero columns carry no information; they are dropped and get
/// zero weight. The remaining columns are scaled to unit norm. When the
/// scaled matrix has condition number above [`RIDGE_CONDITION`] the Tikhonov
/// solution with `λ = 1e-10 · trace(AᵀA) / rows` is returned instead. A
/// matrix with no nonzero entries cannot be rescued and yields
/// [`Error::ExcitationInsufficient`].
pub fn solve_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<LeastSquares> {
    let (rows, cols) = a.shape();
    if b.len() != rows {
        return Err(Error::DimensionMismatch {
            what: "least-squares target",
            expected: rows,
            found: b.len(),
        });
    }
    if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
        return Err(Error::ExcitationInsufficient {
            smallest_singular_value: f64::NAN,
        });
    }
    let excited: Vec<usize> = (0..cols).filter(|&j| a.column(j).iter().any(|v| *v != 0.0)).collect();
    if rows == 0 || excited.is_empty() {
        return Err(Error::ExcitationInsufficient {
            smallest_singular_value: 0.0,
        });
    }

    let k = excited.len();
    let scale = DVector::from_iterator(k, excited.iter().map(|&j| 1.0 / a.column(j).norm()));
    let scaled = DMatrix::from_fn(rows, k, |i, j| a[(i, excited[j])] * scale[j]);

    let ThinSvd { u, s, v } = jacobi_svd(&scaled);
    let s_max = s.max();
    // A wide matrix has a nontrivial null space even if all values are > 0.
    let s_min = if rows < k { 0.0 } else { s.min() };
    let condition = s_max / s_min;

    let utb = u.transpose() * b;
    let (coeffs, ridge) = if condition <= RIDGE_CONDITION {
        (utb.component_div(&s), None)
    } else {
        let lambda = RIDGE_SCALE * s.iter().map(|v| v * v).sum::<f64>() / rows as f64;
        let filtered =
            DVector::from_iterator(s.len(), s.iter().zip(utb.iter()).map(|(si, ci)| si * ci / (si * si + lambda)));
        (filtered, Some(lambda))
    };
    let y = v * coeffs;
    let mut solution = DVector::zeros(cols);
    for (idx, &j) in excited.iter().enumerate() {
        solution[j] = y[idx] * scale[idx];
    }
    if !solution.iter().all(|v| v.is_finite()) {
        return Err(Error::ExcitationInsufficient {
            smallest_singular_value: s_min,
        });
    }
    let residual_inf = (a * &solution - b).amax();
    Ok(LeastSquares {
        solution,
        smallest_singular_value: s_min,
        condition,
        ridge,
        unexcited: cols - k,
        residual_inf,
    })
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Solves `AᵀX + XA = C` for `X` through the vectorised linear system
/// `(I ⊗ Aᵀ + Aᵀ ⊗ I) vec(X) = vec(C)`.
///
/// The result is symmetrised when `C` is symmetric.
pub fn solve_lyapunov(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "Lyapunov matrix columns",
            expected: n,
            found: a.ncols(),
        });
    }
    if c.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            what: "Lyapunov right-hand side",
            expected: n,
            found: c.nrows(),
        });
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    let op = kron(&eye, &at) + kron(&at, &eye);
    let sv = op.clone().singular_values();
    let s_max = sv.max();
    if !(s_max > 0.0) || sv.min() <= s_max * 1e-13 {
        return Err(Error::SingularLyapunov);
    }
    let rhs = DVector::from_column_slice(c.as_slice());
    let x = op.lu().solve(&rhs).ok_or(Error::SingularLyapunov)?;
    let x = DMatrix::from_column_slice(n, n, x.as_slice());
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::SingularLyapunov);
    }
    if is_symmetric(c, 0.0) {
        Ok((&x + x.transpose()) * 0.5)
    } else {
        Ok(x)
    }
}

/// `true` when `|m - mᵀ|` is entrywise at most `tol · (1 + max|m|)`.
pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let bound = tol * (1.0 + m.amax());
    (m - m.transpose()).amax() <= bound
}
