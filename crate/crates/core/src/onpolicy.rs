//! On-policy α-PI: every iteration rolls the plant out under the saddle
//! policies of the current critic and fits the next critic to the
//! integrated generalized Bellman equation
//!
//! ```text
//! W₊ᵀ(ρ(x_s) − ρ(x_e)) = (1−α)Wᵢᵀ(ρ(x_s) − ρ(x_e)) + α∫(Q + uᵢᵀRuᵢ − γ²wᵢᵀwᵢ)
//! ```
//!
//! over windows `[t_s, t_e]` of length `dt`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::BasisSet;
use crate::dynamics::{check_len, check_state, integrate_substeps, quadrature_over_window, LinearGame, SampleWindow};
use crate::hji::{check_alpha, extract_policies, CriticFunction, GameSpec, PolicyPair};
use crate::learner::{Convergence, Iterate, SolveReport};
use crate::linalg::{solve_least_squares, solve_lyapunov, LeastSquares};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OnPolicyConfig {
    pub alpha: f64,
    /// Window length, s.
    pub dt: f64,
    /// Windows per iteration; must exceed the critic basis size.
    pub windows_per_iteration: usize,
    /// Starting points of the rollouts. Windows are split evenly among them
    /// and each rollout is one continuous trajectory.
    pub init_states: Vec<DVector<f64>>,
    /// RK4 sub-steps per window (also the quadrature resolution).
    pub substeps: usize,
    /// Bound on `‖W₊ − W‖₂`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Seed used by [`jittered_grid`] when the caller builds `init_states`
    /// from it; recorded for reproducibility.
    pub seed: u64,
}

impl OnPolicyConfig {
    pub fn validate(&self, spec: &GameSpec, basis: &BasisSet) -> Result<()> {
        check_alpha(self.alpha)?;
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("window length must be positive, got {}", self.dt)));
        }
        if self.substeps < 2 {
            return Err(Error::InvalidParameter("a window needs at least 2 sub-steps".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        if self.init_states.is_empty() {
            return Err(Error::InvalidParameter("no initial states given".into()));
        }
        for x in &self.init_states {
            check_state(spec.dynamics.as_ref(), x)?;
        }
        check_len("critic basis", spec.state_dim(), basis.state_dim())?;
        if self.windows_per_iteration <= basis.len() {
            return Err(Error::InsufficientData {
                samples: self.windows_per_iteration,
                unknowns: basis.len(),
            });
        }
        Ok(())
    }
}

/// `per_axis` points per coordinate on the box `[lower, upper]`, each moved
/// by up to `jitter` times the grid spacing in every coordinate.
pub fn jittered_grid(lower: &[f64], upper: &[f64], per_axis: usize, jitter: f64, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = crate::hji::grid_points(lower, upper, per_axis);
    let spacing: Vec<f64> = lower
        .iter()
        .zip(upper)
        .map(|(l, u)| if per_axis > 1 { (u - l) / (per_axis - 1) as f64 } else { u - l })
        .collect();
    for p in &mut points {
        for (v, h) in p.iter_mut().zip(&spacing) {
            *v += jitter * h * rng.random_range(-1.0..=1.0);
        }
    }
    points
}

/// Rolls out `count` consecutive windows from `x0` with state feedback
/// `policy` applied at every integration stage. The recorded inputs of a
/// window are the policy outputs at its first state.
pub fn rollout<P: PolicyPair + ?Sized>(
    spec: &GameSpec,
    policy: &P,
    x0: &DVector<f64>,
    count: usize,
    dt: f64,
    substeps: usize,
) -> Result<Vec<SampleWindow>> {
    let dynamics = spec.dynamics.as_ref();
    let mut windows = Vec::with_capacity(count);
    let mut x = x0.clone();
    for k in 0..count {
        let t_start = k as f64 * dt;
        let states =
            integrate_substeps(dynamics, &x, t_start, dt, substeps, |_, s| (policy.control(s), policy.disturbance(s)))?;
        let next = states.last().expect("at least one sub-step").clone();
        windows.push(SampleWindow {
            t_start,
            dt,
            behavior_control: policy.control(&x),
            behavior_disturbance: policy.disturbance(&x),
            substep_states: states,
        });
        x = next;
    }
    Ok(windows)
}

/// Windows for one iteration: `windows_per_iteration` in total, dealt out
/// round-robin over the initial states and rolled out under the saddle
/// policies of `critic`.
pub fn collect_onpolicy(spec: &GameSpec, cfg: &OnPolicyConfig, critic: &CriticFunction) -> Result<Vec<SampleWindow>> {
    let policy = extract_policies(spec, critic)?;
    let starts = cfg.init_states.len();
    let mut windows = Vec::with_capacity(cfg.windows_per_iteration);
    for (i, x0) in cfg.init_states.iter().enumerate() {
        let count = cfg.windows_per_iteration / starts + usize::from(i < cfg.windows_per_iteration % starts);
        windows.extend(rollout(spec, &policy, x0, count, cfg.dt, cfg.substeps)?);
    }
    Ok(windows)
}

/// Regression matrix (one row per window) and targets for the critic
/// weights `W₊`, given windows generated under the saddle policies of the
/// critic `(basis, w_i)`.
pub fn assemble_onpolicy(
    spec: &GameSpec,
    basis: &BasisSet,
    w_i: &DVector<f64>,
    windows: &[SampleWindow],
    alpha: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_alpha(alpha)?;
    let critic = CriticFunction::new(basis.clone(), w_i.clone())?;
    let policy = extract_policies(spec, &critic)?;
    let l1 = basis.len();
    let mut x = DMatrix::zeros(windows.len(), l1);
    let mut y = DVector::zeros(windows.len());
    for (k, win) in windows.iter().enumerate() {
        check_state(spec.dynamics.as_ref(), win.start())?;
        let row = basis.eval(win.start())? - basis.eval(win.end())?;
        let reward = quadrature_over_window(win, |s| spec.running_cost(s, &policy.control(s), &policy.disturbance(s)))?;
        y[k] = (1.0 - alpha) * row.dot(w_i) + alpha * reward;
        x.set_row(k, &row.transpose());
    }
    Ok((x, y))
}

/// One on-policy iteration from the critic weights `w_i`. The full
/// least-squares report is returned; its `solution` is `W₊`.
pub fn onpolicy_iterate(
    spec: &GameSpec,
    cfg: &OnPolicyConfig,
    basis: &BasisSet,
    w_i: &DVector<f64>,
) -> Result<LeastSquares> {
    cfg.validate(spec, basis)?;
    check_len("critic weights", basis.len(), w_i.len())?;
    if !w_i.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidParameter("critic weights must be finite".into()));
    }
    let critic = CriticFunction::new(basis.clone(), w_i.clone())?;
    let windows = collect_onpolicy(spec, cfg, &critic)?;
    let (x, y) = assemble_onpolicy(spec, basis, w_i, &windows, cfg.alpha)?;
    solve_least_squares(&x, &y)
}

/// Repeats [`onpolicy_iterate`] from `w0` until the weight change is within
/// `cfg.tolerance` or `cfg.max_iterations` iterations have run.
pub fn onpolicy_solve(
    spec: &GameSpec,
    cfg: &OnPolicyConfig,
    basis: &BasisSet,
    w0: &DVector<f64>,
) -> Result<SolveReport<DVector<f64>>> {
    cfg.validate(spec, basis)?;
    check_len("critic weights", basis.len(), w0.len())?;
    let stop = Convergence::Absolute(cfg.tolerance);
    let mut w = w0.clone();
    let mut history = Vec::new();
    for _ in 0..cfg.max_iterations {
        let fit = onpolicy_iterate(spec, cfg, basis, &w)?;
        let next = fit.solution;
        let change = (&next - &w).norm();
        history.push(Iterate {
            weights: next.clone(),
            change,
            condition: fit.condition,
            ridged: fit.ridge.is_some(),
        });
        let norm = next.norm();
        w = next;
        if stop.is_met(change, norm) {
            return Ok(SolveReport {
                weights: w,
                history,
                converged: true,
            });
        }
    }
    Ok(SolveReport {
        weights: w,
        history,
        converged: false,
    })
}

/// The generalized Bellman step for a linear game and a quadratic critic
/// `V = xᵀPx`. With `A_c = A − BR⁻¹BᵀPᵢ + γ⁻²DDᵀPᵢ`, solves
///
/// ```text
/// A_cᵀP₊ + P₊A_c = (1−α)(A_cᵀPᵢ + PᵢA_c) − α(Qm + PᵢBR⁻¹BᵀPᵢ − γ⁻²PᵢDDᵀPᵢ)
/// ```
pub fn damped_newton_matrix_step(
    game: &LinearGame,
    r: &DMatrix<f64>,
    gamma: f64,
    p_i: &DMatrix<f64>,
    alpha: f64,
) -> Result<DMatrix<f64>> {
    check_alpha(alpha)?;
    let n = game.a.nrows();
    if p_i.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            what: "P size",
            expected: n,
            found: p_i.nrows(),
        });
    }
    let m = game.b.ncols();
    if r.shape() != (m, m) {
        return Err(Error::DimensionMismatch {
            what: "R size",
            expected: m,
            found: r.nrows(),
        });
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let r_inv = r.clone().try_inverse().ok_or(Error::NotSymmetricPsd)?;
    let g2 = gamma * gamma;
    let s = &game.b * &r_inv * game.b.transpose();
    let dd = &game.d * game.d.transpose() / g2;
    let a_c = &game.a - &s * p_i + &dd * p_i;
    let lyap_i = a_c.transpose() * p_i + p_i * &a_c;
    let cost = &game.qm + p_i * &s * p_i - p_i * &dd * p_i;
    let rhs = lyap_i * (1.0 - alpha) - cost * alpha;
    solve_lyapunov(&a_c, &rhs)
}
