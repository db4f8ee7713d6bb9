use alloc::vec::Vec;

use nalgebra::DVector;

use super::SampleWindow;
use crate::{Error, Result};

/// Weights `c_k` with `∫ y ≈ h · Σ c_k y_k` for `intervals` equal intervals.
///
/// Composite Simpson when `intervals` is even; otherwise Simpson on the
/// leading intervals and the 3/8 rule on the last three. Both are exact for
/// cubics.
pub fn composite_weights(intervals: usize) -> Result<Vec<f64>> {
    if intervals < 2 {
        return Err(Error::InsufficientResolution { states: intervals + 1 });
    }
    let mut c = alloc::vec![0.0; intervals + 1];
    let simpson = if intervals.is_multiple_of(2) { intervals } else { intervals - 3 };
    for k in (0..simpson).step_by(2) {
        c[k] += 1.0 / 3.0;
        c[k + 1] += 4.0 / 3.0;
        c[k + 2] += 1.0 / 3.0;
    }
    if simpson < intervals {
        let s = simpson;
        c[s] += 3.0 / 8.0;
        c[s + 1] += 9.0 / 8.0;
        c[s + 2] += 9.0 / 8.0;
        c[s + 3] += 3.0 / 8.0;
    }
    Ok(c)
}

/// Integrates uniformly spaced samples with spacing `h`.
pub fn integrate_samples(values: &[f64], h: f64) -> Result<f64> {
    if values.len() < 3 {
        return Err(Error::InsufficientResolution { states: values.len() });
    }
    let c = composite_weights(values.len() - 1)?;
    Ok(h * c.iter().zip(values).map(|(c, v)| c * v).sum::<f64>())
}

/// `∫ integrand(x(s)) ds` over the window, evaluated on its stored states.
pub fn quadrature_over_window<F>(win: &SampleWindow, mut integrand: F) -> Result<f64>
where
    F: FnMut(&DVector<f64>) -> f64,
{
    let n = win.substep_states.len();
    if n < 3 {
        return Err(Error::InsufficientResolution { states: n });
    }
    let c = composite_weights(n - 1)?;
    let h = win.dt / (n - 1) as f64;
    Ok(h * win.substep_states.iter().zip(&c).map(|(x, c)| c * integrand(x)).sum::<f64>())
}

/// Componentwise version of [`quadrature_over_window`] for a `len`-vector
/// integrand.
pub fn quadrature_over_window_vec<F>(win: &SampleWindow, len: usize, mut integrand: F) -> Result<DVector<f64>>
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let n = win.substep_states.len();
    if n < 3 {
        return Err(Error::InsufficientResolution { states: n });
    }
    let c = composite_weights(n - 1)?;
    let h = win.dt / (n - 1) as f64;
    let mut acc = DVector::zeros(len);
    for (x, c) in win.substep_states.iter().zip(&c) {
        acc.axpy(*c, &integrand(x), 1.0);
    }
    Ok(acc * h)
}

#[cfg(test)]
mod tests {
    use alloc::vec;
    use super::*;
    use crate::dynamics::{integrate_window, make_example_a, make_linear_game};
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn ramp_window(substeps: usize) -> SampleWindow {
        // ẋ₁ = u = 1
        let sys = make_linear_game(
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let one = DVector::from_element(1, 1.0);
        let zero = DVector::zeros(1);
        integrate_window(&sys, 0.0, &zero, &one, &zero, 0.1, substeps).unwrap()
    }

    #[test]
    fn constant_integrand() {
        let win = ramp_window(10);
        let mut w = win.clone();
        w.dt = 0.05;
        assert!((quadrature_over_window(&w, |_| 1.0).unwrap() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn linear_integrand_closed_form() {
        for substeps in [2, 3, 4, 5, 7, 10] {
            let win = ramp_window(substeps);
            let v = quadrature_over_window(&win, |x| x[0]).unwrap();
            assert!((v - 0.005).abs() < 1e-15, "substeps {substeps}: {v}");
        }
    }

    #[test]
    fn cubic_is_exact_for_every_interval_count() {
        for n in 2..12 {
            let h = 1.0 / n as f64;
            let vals: Vec<f64> = (0..=n).map(|k| (k as f64 * h).powi(3)).collect();
            assert!((integrate_samples(&vals, h).unwrap() - 0.25).abs() < 1e-14, "n = {n}");
        }
    }

    #[test]
    fn too_few_states() {
        let mut win = ramp_window(2);
        win.substep_states.truncate(2);
        assert_eq!(
            quadrature_over_window(&win, |_| 1.0),
            Err(Error::InsufficientResolution { states: 2 })
        );
    }

    #[test]
    fn example_a_reward_against_finer_window() {
        let sys = make_example_a();
        let x0 = DVector::from_vec(vec![0.4, 0.5]);
        let u = DVector::from_element(1, 0.7);
        let w = DVector::from_element(1, -0.4);
        let gamma2 = 4.0;
        let reward = |win: &SampleWindow| {
            let fixed = u[0] * u[0] - gamma2 * w[0] * w[0];
            quadrature_over_window(win, |x| sys.state_cost(x) + fixed).unwrap()
        };
        use crate::dynamics::AffineDynamics;
        let coarse = integrate_window(&sys, 0.0, &x0, &u, &w, 0.05, 10).unwrap();
        let fine = integrate_window(&sys, 0.0, &x0, &u, &w, 0.05, 100).unwrap();
        assert!((reward(&coarse) - reward(&fine)).abs() < 1e-9);
    }

    #[test]
    fn vector_integrand_is_componentwise() {
        let win = ramp_window(6);
        let v = quadrature_over_window_vec(&win, 2, |x| DVector::from_vec(vec![1.0, x[0]])).unwrap();
        assert!((v[0] - 0.1).abs() < 1e-15);
        assert!((v[1] - 0.005).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn linear_in_integrand(a in -5.0f64..5.0, b in -5.0f64..5.0, n in 2usize..12) {
            let win = ramp_window(n);
            let f = |x: &DVector<f64>| x[0] * x[0];
            let g = |x: &DVector<f64>| (3.0 * x[0]).sin();
            let lhs = quadrature_over_window(&win, |x| a * f(x) + b * g(x)).unwrap();
            let rhs = a * quadrature_over_window(&win, f).unwrap() + b * quadrature_over_window(&win, g).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn additive_over_adjacent_windows(n in 2usize..12) {
            let whole = ramp_window(2 * n);
            let mut left = whole.clone();
            left.dt = 0.05;
            left.substep_states.truncate(n + 1);
            let mut right = whole.clone();
            right.t_start = 0.05;
            right.dt = 0.05;
            right.substep_states.drain(..n);
            let f = |x: &DVector<f64>| x[0].powi(2);
            let sum = quadrature_over_window(&left, f).unwrap() + quadrature_over_window(&right, f).unwrap();
            let total = quadrature_over_window(&whole, f).unwrap();
            prop_assert!((sum - total).abs() <= 1e-12 * total.abs());
        }
    }
}
