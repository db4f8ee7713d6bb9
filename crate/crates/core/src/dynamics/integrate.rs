use alloc::format;
use alloc::vec::Vec;

use nalgebra::DVector;

use super::{check_len, check_state, AffineDynamics};
use crate::{Error, Result};

/// One integration window `[t, t + dt]` with its uniformly spaced sub-step
/// states and the inputs held over it.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWindow {
    pub t_start: f64,
    pub dt: f64,
    /// States at `t_start + k·dt/substeps`, `k = 0..=substeps`.
    pub substep_states: Vec<DVector<f64>>,
    pub behavior_control: DVector<f64>,
    pub behavior_disturbance: DVector<f64>,
}

impl SampleWindow {
    pub fn start(&self) -> &DVector<f64> {
        &self.substep_states[0]
    }

    pub fn end(&self) -> &DVector<f64> {
        self.substep_states.last().expect("window has states")
    }

    pub fn substeps(&self) -> usize {
        self.substep_states.len().saturating_sub(1)
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.dt
    }
}

/// Classical RK4 over `substeps` equal steps covering `[t0, t0 + dt]`.
///
/// `inputs(t, x)` supplies `(u, w)` at every stage, so it can be a held
/// value, a state feedback or a time signal. Returns all sub-step states,
/// `x0` first.
pub fn integrate_substeps<F>(
    dynamics: &dyn AffineDynamics,
    x0: &DVector<f64>,
    t0: f64,
    dt: f64,
    substeps: usize,
    mut inputs: F,
) -> Result<Vec<DVector<f64>>>
where
    F: FnMut(f64, &DVector<f64>) -> (DVector<f64>, DVector<f64>),
{
    check_state(dynamics, x0)?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("window length must be positive, got {dt}")));
    }
    if substeps == 0 {
        return Err(Error::InvalidParameter("at least one sub-step is required".into()));
    }
    let h = dt / substeps as f64;
    let mut field = |t: f64, x: &DVector<f64>| {
        let (u, w) = inputs(t, x);
        dynamics.vector_field(x, &u, &w)
    };

    let mut states = Vec::with_capacity(substeps + 1);
    states.push(x0.clone());
    let mut x = x0.clone();
    for k in 0..substeps {
        let t = t0 + k as f64 * h;
        let k1 = field(t, &x);
        let k2 = field(t + 0.5 * h, &(&x + &k1 * (0.5 * h)));
        let k3 = field(t + 0.5 * h, &(&x + &k2 * (0.5 * h)));
        let k4 = field(t + h, &(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::IntegrationBlowup { time: t + h });
        }
        states.push(x.clone());
    }
    Ok(states)
}

/// Integrates one window with `u` and `w` held constant.
pub fn integrate_window(
    dynamics: &dyn AffineDynamics,
    t_start: f64,
    x0: &DVector<f64>,
    u: &DVector<f64>,
    w: &DVector<f64>,
    dt: f64,
    substeps: usize,
) -> Result<SampleWindow> {
    check_len("control", dynamics.control_dim(), u.len())?;
    check_len("disturbance", dynamics.disturbance_dim(), w.len())?;
    if substeps < 2 {
        return Err(Error::InvalidParameter(format!(
            "a window needs at least 2 sub-steps, got {substeps}"
        )));
    }
    let substep_states = integrate_substeps(dynamics, x0, t_start, dt, substeps, |_, _| (u.clone(), w.clone()))?;
    Ok(SampleWindow {
        t_start,
        dt,
        substep_states,
        behavior_control: u.clone(),
        behavior_disturbance: w.clone(),
    })
}

#[cfg(test)]
mod tests {
    use alloc::vec;
    use super::*;
    use crate::dynamics::{make_example_a, make_linear_game};
    use nalgebra::DMatrix;

    fn scalar_growth() -> impl AffineDynamics {
        // ẋ = x, with dummy zero input channels
        make_linear_game(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap()
    }

    fn zero1() -> DVector<f64> {
        DVector::zeros(1)
    }

    #[test]
    fn zero_dynamics_keep_state() {
        let sys = make_linear_game(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(2, 1),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let x0 = DVector::from_vec(vec![1.0, 2.0]);
        let win = integrate_window(&sys, 0.0, &x0, &zero1(), &zero1(), 0.3, 4).unwrap();
        assert_eq!(win.substep_states.len(), 5);
        assert!(win.substep_states.iter().all(|x| *x == x0));
    }

    #[test]
    fn exponential_growth_matches_closed_form() {
        let sys = scalar_growth();
        let x0 = DVector::from_element(1, 1.0);
        let win = integrate_window(&sys, 0.0, &x0, &zero1(), &zero1(), 0.1, 10).unwrap();
        assert!((win.end()[0] - 0.1f64.exp()).abs() < 1e-9);
        assert_eq!(win.start(), &x0);
    }

    #[test]
    fn fourth_order_convergence() {
        let sys = scalar_growth();
        let x0 = DVector::from_element(1, 1.0);
        let exact = 1.0f64.exp();
        let err = |n| {
            let s = integrate_substeps(&sys, &x0, 0.0, 1.0, n, |_, _| (zero1(), zero1())).unwrap();
            (s[n][0] - exact).abs()
        };
        for n in [4, 8, 16] {
            assert!(err(n) / err(2 * n) >= 8.0, "n = {n}");
        }
    }

    #[test]
    fn example_a_window_against_refined_integration() {
        let sys = make_example_a();
        let x0 = DVector::from_vec(vec![0.4, 0.5]);
        let coarse = integrate_window(&sys, 0.0, &x0, &zero1(), &zero1(), 0.05, 8).unwrap();
        let fine = integrate_substeps(&sys, &x0, 0.0, 0.05, 1000, |_, _| (zero1(), zero1())).unwrap();
        assert!((coarse.end() - &fine[1000]).amax() < 1e-8);
    }

    #[test]
    fn blowup_reports_time() {
        let sys = scalar_growth();
        let x0 = DVector::from_element(1, 1e303);
        match integrate_window(&sys, 2.0, &x0, &zero1(), &zero1(), 1000.0, 4) {
            Err(Error::IntegrationBlowup { time }) => assert_eq!(time, 2.0 + 250.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let sys = scalar_growth();
        let x0 = DVector::from_element(1, 1.0);
        assert!(integrate_window(&sys, 0.0, &x0, &zero1(), &zero1(), 0.0, 4).is_err());
        assert!(integrate_window(&sys, 0.0, &x0, &zero1(), &zero1(), 0.1, 1).is_err());
        let bad = DVector::from_element(2, 1.0);
        assert!(matches!(
            integrate_window(&sys, 0.0, &bad, &zero1(), &zero1(), 0.1, 4),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
