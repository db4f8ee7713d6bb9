//! Off-policy α-PI. Data are collected once under arbitrary behavior
//! inputs; each iteration then fits critic, actor and disturbance weights
//! jointly from the same stored windows.
//!
//! With policies `uᵢ = W_aᵢᵀφ`, `wᵢ = W_dᵢᵀϕ`, corrections `μ = u − uᵢ`,
//! `ν = w − wᵢ` and running cost `rᵢ = Q + uᵢᵀRuᵢ − γ²wᵢᵀwᵢ`, every window
//! contributes one equation `W₊ᵀω = λ` where
//!
//! ```text
//! ω = [ρ(x_e) − ρ(x_s);  2r_j ∫φ μ_j;  −2γ² ∫ϕ ν_k]
//! λ = −α∫rᵢ + (1−α) Wᵢᵀω
//! ```
//!
//! and `W = [W_c; W_a columns; W_d columns]`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{BasisSet, Bases};
use crate::dynamics::{check_len, check_state, integrate_window, quadrature_over_window_vec, SampleWindow};
use crate::hji::{check_alpha, GameSpec, PolicyPair};
use crate::learner::{Convergence, Iterate, SolveReport};
use crate::linalg::{jacobi_svd, solve_least_squares, LeastSquares, ThinSvd};
use crate::{Error, Result};

/// Dimensions and timing a data set was recorded with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fingerprint {
    pub state_dim: usize,
    pub control_dim: usize,
    pub disturbance_dim: usize,
    pub dt: f64,
    pub substeps: usize,
}

/// Windows of one continuous trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    pub windows: Vec<SampleWindow>,
    pub fingerprint: Fingerprint,
    pub seed: u64,
}

impl DataSet {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Checks the recorded dimensions against `spec` and the windows against
    /// the recorded timing.
    pub fn check(&self, spec: &GameSpec) -> Result<()> {
        let fp = &self.fingerprint;
        let dims = (spec.state_dim(), spec.control_dim(), spec.disturbance_dim());
        if (fp.state_dim, fp.control_dim, fp.disturbance_dim) != dims {
            return Err(Error::StaleData(format!(
                "data recorded for (n, m, q) = ({}, {}, {}), game has {:?}",
                fp.state_dim, fp.control_dim, fp.disturbance_dim, dims
            )));
        }
        for (i, w) in self.windows.iter().enumerate() {
            let consistent = w.dt == fp.dt
                && w.substeps() == fp.substeps
                && w.substep_states.iter().all(|x| x.len() == fp.state_dim)
                && w.behavior_control.len() == fp.control_dim
                && w.behavior_disturbance.len() == fp.disturbance_dim;
            if !consistent {
                return Err(Error::StaleData(format!("window {i} does not match the data set header")));
            }
        }
        Ok(())
    }
}

/// Behavior inputs for [`collect`], held constant over each window.
pub enum Behavior<'a> {
    /// Independent draws from `U[−a, a]` per channel and window.
    Uniform { control: f64, disturbance: f64 },
    /// A state feedback sampled at the start of each window.
    Policy(&'a dyn PolicyPair),
}

/// Records `windows` consecutive windows of length `dt` from `x0`.
pub fn collect(
    spec: &GameSpec,
    x0: &DVector<f64>,
    windows: usize,
    dt: f64,
    substeps: usize,
    behavior: Behavior<'_>,
    seed: u64,
) -> Result<DataSet> {
    if windows == 0 {
        return Err(Error::InvalidParameter("at least one window is required".into()));
    }
    check_state(spec.dynamics.as_ref(), x0)?;
    let (m, q) = (spec.control_dim(), spec.disturbance_dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(windows);
    let mut x = x0.clone();
    for k in 0..windows {
        let (u, w) = match &behavior {
            Behavior::Uniform { control, disturbance } => (
                DVector::from_fn(m, |_, _| *control * rng.random_range(-1.0..=1.0)),
                DVector::from_fn(q, |_, _| *disturbance * rng.random_range(-1.0..=1.0)),
            ),
            Behavior::Policy(p) => (p.control(&x), p.disturbance(&x)),
        };
        let win = integrate_window(spec.dynamics.as_ref(), k as f64 * dt, &x, &u, &w, dt, substeps)?;
        x = win.end().clone();
        out.push(win);
    }
    Ok(DataSet {
        windows: out,
        fingerprint: Fingerprint {
            state_dim: spec.state_dim(),
            control_dim: m,
            disturbance_dim: q,
            dt,
            substeps,
        },
        seed,
    })
}

/// Critic weights with the actor (`L₂ × m`) and disturbance (`L₃ × q`)
/// weights, one column per input channel.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedWeights {
    pub critic: DVector<f64>,
    pub actor: DMatrix<f64>,
    pub disturbance: DMatrix<f64>,
}

impl StackedWeights {
    pub fn zeros(bases: &Bases, control_dim: usize, disturbance_dim: usize) -> Self {
        Self {
            critic: DVector::zeros(bases.critic.len()),
            actor: DMatrix::zeros(bases.actor.len(), control_dim),
            disturbance: DMatrix::zeros(bases.disturbance.len(), disturbance_dim),
        }
    }

    pub fn len(&self) -> usize {
        self.critic.len() + self.actor.len() + self.disturbance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `[W_c; W_a,1; …; W_a,m; W_d,1; …; W_d,q]`.
    pub fn stack(&self) -> DVector<f64> {
        let parts = [self.critic.as_slice(), self.actor.as_slice(), self.disturbance.as_slice()];
        DVector::from_iterator(self.len(), parts.into_iter().flatten().copied())
    }

    /// Inverse of [`stack`](Self::stack) for the given shapes.
    pub fn unstack(v: &DVector<f64>, bases: &Bases, control_dim: usize, disturbance_dim: usize) -> Result<Self> {
        let (l1, l2, l3) = (bases.critic.len(), bases.actor.len(), bases.disturbance.len());
        let total = l1 + l2 * control_dim + l3 * disturbance_dim;
        check_len("stacked weights", total, v.len())?;
        let s = v.as_slice();
        Ok(Self {
            critic: DVector::from_column_slice(&s[..l1]),
            actor: DMatrix::from_column_slice(l2, control_dim, &s[l1..l1 + l2 * control_dim]),
            disturbance: DMatrix::from_column_slice(l3, disturbance_dim, &s[l1 + l2 * control_dim..]),
        })
    }

    fn check_shapes(&self, bases: &Bases, control_dim: usize, disturbance_dim: usize) -> Result<()> {
        check_len("critic weights", bases.critic.len(), self.critic.len())?;
        check_len("actor weight rows", bases.actor.len(), self.actor.nrows())?;
        check_len("actor weight columns", control_dim, self.actor.ncols())?;
        check_len("disturbance weight rows", bases.disturbance.len(), self.disturbance.nrows())?;
        check_len("disturbance weight columns", disturbance_dim, self.disturbance.ncols())
    }
}

/// The policies `u = W_aᵀφ(x)`, `w = W_dᵀϕ(x)`.
#[derive(Debug, Clone, Copy)]
pub struct ActorPolicy<'a> {
    pub actor_basis: &'a BasisSet,
    pub disturbance_basis: &'a BasisSet,
    pub weights: &'a StackedWeights,
}

impl<'a> ActorPolicy<'a> {
    pub fn new(bases: &'a Bases, weights: &'a StackedWeights) -> Self {
        Self {
            actor_basis: &bases.actor,
            disturbance_basis: &bases.disturbance,
            weights,
        }
    }
}

impl PolicyPair for ActorPolicy<'_> {
    fn control(&self, x: &DVector<f64>) -> DVector<f64> {
        let phi = self.actor_basis.eval(x).expect("state dimension checked by caller");
        self.weights.actor.tr_mul(&phi)
    }

    fn disturbance(&self, x: &DVector<f64>) -> DVector<f64> {
        let phi = self.disturbance_basis.eval(x).expect("state dimension checked by caller");
        self.weights.disturbance.tr_mul(&phi)
    }
}

fn check_bases(spec: &GameSpec, bases: &Bases) -> Result<()> {
    let n = spec.state_dim();
    check_len("critic basis", n, bases.critic.state_dim())?;
    check_len("actor basis", n, bases.actor.state_dim())?;
    check_len("disturbance basis", n, bases.disturbance.state_dim())
}

/// Relative projection residual below which a recorded behavior signal is
/// treated as a feedback of the state.
pub const EXCITATION_FLOOR: f64 = 1e-9;

/// Which input channels carry information beyond state feedback.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Excitation {
    pub control: Vec<bool>,
    pub disturbance: Vec<bool>,
}

impl Excitation {
    pub fn all_excited(&self) -> bool {
        self.control.iter().chain(&self.disturbance).all(|e| *e)
    }
}

/// `‖b − P b‖ / ‖b‖` with `P` the orthogonal projector onto the span of the
/// columns of `a`; zero for `b = 0`.
fn unexplained_fraction(a: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    let b_norm = b.norm();
    if b_norm == 0.0 {
        return 0.0;
    }
    let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    let scaled = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| if norms[j] > 0.0 { a[(i, j)] / norms[j] } else { 0.0 });
    let ThinSvd { u, s, .. } = jacobi_svd(&scaled);
    let cutoff = s.max() * f64::EPSILON * a.nrows().max(a.ncols()) as f64;
    let mut rest = b.clone();
    for (k, sk) in s.iter().enumerate() {
        if *sk > cutoff {
            let uk = u.column(k);
            rest -= uk * uk.dot(b);
        }
    }
    rest.norm() / b_norm
}

/// A behavior channel that is an exact combination of its own basis at the
/// window starts (in particular one that is identically zero) adds nothing
/// to the regression: its weights cannot be told apart from the critic's.
pub fn channel_excitation(data: &DataSet, bases: &Bases) -> Result<Excitation> {
    let starts: Vec<&DVector<f64>> = data.windows.iter().map(|w| w.start()).collect();
    let design = |basis: &BasisSet| -> Result<DMatrix<f64>> {
        let mut a = DMatrix::zeros(starts.len(), basis.len());
        for (i, x) in starts.iter().enumerate() {
            a.set_row(i, &basis.eval(x)?.transpose());
        }
        Ok(a)
    };
    let (phi, psi) = (design(&bases.actor)?, design(&bases.disturbance)?);
    let fp = &data.fingerprint;
    let excited = |a: &DMatrix<f64>, channel: &dyn Fn(&SampleWindow) -> f64| {
        let b = DVector::from_iterator(data.len(), data.windows.iter().map(channel));
        unexplained_fraction(a, &b) > EXCITATION_FLOOR
    };
    Ok(Excitation {
        control: (0..fp.control_dim).map(|j| excited(&phi, &|w| w.behavior_control[j])).collect(),
        disturbance: (0..fp.disturbance_dim).map(|k| excited(&psi, &|w| w.behavior_disturbance[k])).collect(),
    })
}

/// Feature matrix (one row `ωᵀ` per window) and targets `λ`.
pub fn assemble_features(
    spec: &GameSpec,
    data: &DataSet,
    bases: &Bases,
    w_i: &StackedWeights,
    alpha: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_alpha(alpha)?;
    data.check(spec)?;
    check_bases(spec, bases)?;
    let (m, q) = (spec.control_dim(), spec.disturbance_dim());
    w_i.check_shapes(bases, m, q)?;
    let (l1, l2, l3) = (bases.critic.len(), bases.actor.len(), bases.disturbance.len());
    let cols = l1 + l2 * m + l3 * q;
    let policy = ActorPolicy::new(bases, w_i);
    let g2 = spec.gamma * spec.gamma;
    let w_stacked = w_i.stack();

    let mut pi = DMatrix::zeros(data.len(), cols);
    let mut lambda = DVector::zeros(data.len());
    for (row, win) in data.windows.iter().enumerate() {
        let (u, w) = (&win.behavior_control, &win.behavior_disturbance);
        // [∫φμ_1; …; ∫φμ_m; ∫ϕν_1; …; ∫ϕν_q; ∫rᵢ]
        let integrals = quadrature_over_window_vec(win, l2 * m + l3 * q + 1, |x| {
            let phi = bases.actor.eval(x).expect("dimension checked");
            let psi = bases.disturbance.eval(x).expect("dimension checked");
            let (ui, wi) = (policy.control(x), policy.disturbance(x));
            let mut v = DVector::zeros(l2 * m + l3 * q + 1);
            for j in 0..m {
                v.rows_mut(j * l2, l2).copy_from(&(&phi * (u[j] - ui[j])));
            }
            for k in 0..q {
                v.rows_mut(l2 * m + k * l3, l3).copy_from(&(&psi * (w[k] - wi[k])));
            }
            v[l2 * m + l3 * q] = spec.running_cost(x, &ui, &wi);
            v
        })?;

        let mut omega = DVector::zeros(cols);
        omega.rows_mut(0, l1).copy_from(&(bases.critic.eval(win.end())? - bases.critic.eval(win.start())?));
        for j in 0..m {
            omega.rows_mut(l1 + j * l2, l2).copy_from(&(integrals.rows(j * l2, l2) * (2.0 * spec.r_diag[j])));
        }
        for k in 0..q {
            omega.rows_mut(l1 + l2 * m + k * l3, l3).copy_from(&(integrals.rows(l2 * m + k * l3, l3) * (-2.0 * g2)));
        }
        lambda[row] = -alpha * integrals[l2 * m + l3 * q] + (1.0 - alpha) * w_stacked.dot(&omega);
        pi.set_row(row, &omega.transpose());
    }
    Ok((pi, lambda))
}

/// One off-policy iteration. Returns the next weights and the least-squares
/// report they came from.
///
/// Weights of channels that [`channel_excitation`] finds unexcited keep
/// their current values; the regression solves for the rest.
pub fn offpolicy_iterate(
    spec: &GameSpec,
    data: &DataSet,
    bases: &Bases,
    w_i: &StackedWeights,
    alpha: f64,
) -> Result<(StackedWeights, LeastSquares)> {
    let unknowns = w_i.len();
    if data.len() <= unknowns {
        return Err(Error::InsufficientData {
            samples: data.len(),
            unknowns,
        });
    }
    let (pi, lambda) = assemble_features(spec, data, bases, w_i, alpha)?;
    let excitation = channel_excitation(data, bases)?;
    let (l1, l2, l3) = (bases.critic.len(), bases.actor.len(), bases.disturbance.len());
    let mut free: Vec<usize> = (0..l1).collect();
    for (j, e) in excitation.control.iter().enumerate() {
        if *e {
            free.extend(l1 + j * l2..l1 + (j + 1) * l2);
        }
    }
    let offset = l1 + l2 * spec.control_dim();
    for (k, e) in excitation.disturbance.iter().enumerate() {
        if *e {
            free.extend(offset + k * l3..offset + (k + 1) * l3);
        }
    }

    let mut pinned = w_i.stack();
    for &c in &free {
        pinned[c] = 0.0;
    }
    let target = &lambda - &pi * &pinned;
    let sub = pi.select_columns(&free);
    let mut ls = solve_least_squares(&sub, &target)?;
    let mut full = pinned;
    for (idx, &c) in free.iter().enumerate() {
        full[c] = ls.solution[idx];
    }
    ls.solution = full;
    ls.unexcited += unknowns - free.len();
    let next = StackedWeights::unstack(&ls.solution, bases, spec.control_dim(), spec.disturbance_dim())?;
    Ok((next, ls))
}

/// Iterates on the same data until the stacked weights settle under `stop`
/// or `cap` iterations have run.
pub fn offpolicy_solve(
    spec: &GameSpec,
    data: &DataSet,
    bases: &Bases,
    w0: &StackedWeights,
    alpha: f64,
    stop: Convergence,
    cap: usize,
) -> Result<SolveReport<StackedWeights>> {
    check_alpha(alpha)?;
    w0.check_shapes(bases, spec.control_dim(), spec.disturbance_dim())?;
    let mut w = w0.clone();
    let mut history = Vec::new();
    for _ in 0..cap {
        let (next, fit) = offpolicy_iterate(spec, data, bases, &w, alpha)?;
        let next_stacked = next.stack();
        let change = (&next_stacked - w.stack()).norm();
        history.push(Iterate {
            weights: next.clone(),
            change,
            condition: fit.condition,
            ridged: fit.ridge.is_some(),
        });
        w = next;
        if stop.is_met(change, next_stacked.norm()) {
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{reference_bases, ReferenceProblem};
    use crate::dynamics::{make_example_a, make_linear_game, quadrature_over_window, LinearGame};
    use crate::hji::{generalized_bellman_residual, grid_points, CriticFunction, ZeroPolicy};
    use crate::onpolicy::assemble_onpolicy;
    use crate::oracle::{quadratic_weights, solve_gare};
    use alloc::sync::Arc;
    use alloc::vec;

    fn game() -> LinearGame {
        make_linear_game(
            DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, -0.5, -2.0]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(2, 1, &[1.0, 0.5]),
            DMatrix::identity(2, 2),
        )
        .unwrap()
    }

    fn linear_bases() -> Bases {
        Bases {
            critic: BasisSet::quadratic(2),
            actor: BasisSet::linear(2),
            disturbance: BasisSet::linear(2),
        }
    }

    fn spec_a() -> GameSpec {
        GameSpec::new(Arc::new(make_example_a()), 2.0, DVector::from_element(1, 1.0)).unwrap()
    }

    fn linear_spec() -> GameSpec {
        GameSpec::new(Arc::new(game()), 2.0, DVector::from_element(1, 1.0)).unwrap()
    }

    fn linear_data() -> DataSet {
        let x0 = DVector::from_vec(vec![1.0, -1.0]);
        let behavior = Behavior::Uniform {
            control: 1.0,
            disturbance: 1.0,
        };
        collect(&linear_spec(), &x0, 80, 0.05, 10, behavior, 3).unwrap()
    }

    fn example_data(seed: u64) -> DataSet {
        let x0 = DVector::from_vec(vec![0.4, 0.5]);
        let behavior = Behavior::Uniform {
            control: 1.0,
            disturbance: 1.0,
        };
        collect(&spec_a(), &x0, 50, 0.05, 10, behavior, seed).unwrap()
    }

    #[test]
    fn collect_spans_the_horizon_and_is_seeded() {
        let data = example_data(1);
        assert_eq!(data.len(), 50);
        assert_eq!(data.windows[0].t_start, 0.0);
        assert!((data.windows[49].t_end() - 2.5).abs() < 1e-12);
        for pair in data.windows.windows(2) {
            assert_eq!(pair[0].end(), pair[1].start());
        }
        assert_eq!(data, example_data(1));
        assert_ne!(data, example_data(2));
        assert!(data.windows.iter().all(|w| w.behavior_control[0].abs() <= 1.0));
    }

    #[test]
    fn stacking_round_trip_and_order() {
        let bases = reference_bases(ReferenceProblem::ExampleA);
        let mut w = StackedWeights::zeros(&bases, 1, 1);
        w.critic[0] = 1.0;
        w.actor[(0, 0)] = 2.0;
        w.disturbance[(8, 0)] = 3.0;
        let s = w.stack();
        assert_eq!(s.len(), 23);
        assert_eq!((s[0], s[5], s[22]), (1.0, 2.0, 3.0));
        assert_eq!(StackedWeights::unstack(&s, &bases, 1, 1).unwrap(), w);
        assert!(StackedWeights::unstack(&DVector::zeros(22), &bases, 1, 1).is_err());
    }

    #[test]
    fn zero_policies_full_step_targets() {
        let spec = spec_a();
        let data = example_data(4);
        let bases = reference_bases(ReferenceProblem::ExampleA);
        let w0 = StackedWeights::zeros(&bases, 1, 1);
        let (_, lambda) = assemble_features(&spec, &data, &bases, &w0, 1.0).unwrap();
        for (win, l) in data.windows.iter().zip(lambda.iter()) {
            let q = quadrature_over_window(win, |x| x.norm_squared()).unwrap();
            assert_eq!(*l, -q);
        }
    }

    #[test]
    fn constant_state_window_in_closed_form() {
        // A window whose stored states never move: ∫ of anything is dt × value.
        let spec = spec_a();
        let bases = reference_bases(ReferenceProblem::ExampleA);
        let x = DVector::from_vec(vec![0.3, -0.2]);
        let win = SampleWindow {
            t_start: 0.0,
            dt: 0.1,
            substep_states: vec![x.clone(); 5],
            behavior_control: DVector::from_element(1, 0.7),
            behavior_disturbance: DVector::from_element(1, -0.4),
        };
        let data = DataSet {
            windows: vec![win],
            fingerprint: Fingerprint {
                state_dim: 2,
                control_dim: 1,
                disturbance_dim: 1,
                dt: 0.1,
                substeps: 4,
            },
            seed: 0,
        };
        let mut w = StackedWeights::zeros(&bases, 1, 1);
        w.actor[(0, 0)] = 0.5;
        w.disturbance[(1, 0)] = -0.25;
        let alpha = 0.4;
        let (pi, lambda) = assemble_features(&spec, &data, &bases, &w, alpha).unwrap();

        let phi = bases.actor.eval(&x).unwrap();
        let psi = bases.disturbance.eval(&x).unwrap();
        let ui = w.actor.tr_mul(&phi)[0];
        let wi = w.disturbance.tr_mul(&psi)[0];
        let mut omega = DVector::zeros(23);
        omega.rows_mut(5, 9).copy_from(&(&phi * (2.0 * 0.1 * (0.7 - ui))));
        omega.rows_mut(14, 9).copy_from(&(&psi * (-2.0 * 4.0 * 0.1 * (-0.4 - wi))));
        let reward = 0.1 * (x.norm_squared() + ui * ui - 4.0 * wi * wi);
        let expected = -alpha * reward + (1.0 - alpha) * w.stack().dot(&omega);
        assert!((pi.row(0).transpose() - &omega).amax() < 1e-12);
        assert!((lambda[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn full_step_matches_separate_irl_update() {
        let spec = linear_spec();
        let data = linear_data();
        let bases = linear_bases();
        let mut w = StackedWeights::zeros(&bases, 1, 1);
        w.critic = DVector::from_vec(vec![0.4, 0.1, 0.3]);
        w.actor = DMatrix::from_column_slice(2, 1, &[-0.1, -0.3]);
        w.disturbance = DMatrix::from_column_slice(2, 1, &[0.1, 0.05]);
        let (next, _) = offpolicy_iterate(&spec, &data, &bases, &w, 1.0).unwrap();

        // V₊(x_e) − V₊(x_s) + 2∫u₊Rμ − 2γ²∫w₊ν = −∫rᵢ, written out per window.
        let mut a = DMatrix::zeros(data.len(), 7);
        let mut b = DVector::zeros(data.len());
        for (row, win) in data.windows.iter().enumerate() {
            let (u, d) = (win.behavior_control[0], win.behavior_disturbance[0]);
            let h = win.dt / win.substeps() as f64;
            let c = crate::dynamics::composite_weights(win.substeps()).unwrap();
            let mut acc = [0.0; 5];
            for (x, ck) in win.substep_states.iter().zip(&c) {
                let ui = w.actor[(0, 0)] * x[0] + w.actor[(1, 0)] * x[1];
                let di = w.disturbance[(0, 0)] * x[0] + w.disturbance[(1, 0)] * x[1];
                acc[0] += ck * h * x[0] * (u - ui);
                acc[1] += ck * h * x[1] * (u - ui);
                acc[2] += ck * h * x[0] * (d - di);
                acc[3] += ck * h * x[1] * (d - di);
                acc[4] += ck * h * (x.norm_squared() + ui * ui - 4.0 * di * di);
            }
            let (s, e) = (win.start(), win.end());
            a[(row, 0)] = e[0] * e[0] - s[0] * s[0];
            a[(row, 1)] = e[0] * e[1] - s[0] * s[1];
            a[(row, 2)] = e[1] * e[1] - s[1] * s[1];
            a[(row, 3)] = 2.0 * acc[0];
            a[(row, 4)] = 2.0 * acc[1];
            a[(row, 5)] = -8.0 * acc[2];
            a[(row, 6)] = -8.0 * acc[3];
            b[row] = -acc[4];
        }
        let irl = solve_least_squares(&a, &b).unwrap().solution;
        assert!((next.stack() - irl).amax() < 1e-9);
    }

    #[test]
    fn converges_to_riccati_solution_for_every_alpha() {
        let spec = linear_spec();
        let data = linear_data();
        let bases = linear_bases();
        let g = game();
        let sol = solve_gare(&g.a, &g.b, &g.d, &g.qm, &DMatrix::identity(1, 1), 2.0).unwrap();
        let p_weights = quadratic_weights(&sol.p);
        let w0 = StackedWeights::zeros(&bases, 1, 1);
        let mut finals = Vec::new();
        for alpha in [0.3, 0.6, 1.0] {
            let rep = offpolicy_solve(&spec, &data, &bases, &w0, alpha, Convergence::Absolute(1e-10), 300).unwrap();
            assert!(rep.converged, "alpha {alpha}");
            for (a, b) in rep.weights.critic.iter().zip(p_weights.iter()) {
                assert!((a - b).abs() <= 1e-3 * b.abs(), "alpha {alpha}: {a} vs {b}");
            }
            let k = -&sol.control_gain;
            for (a, b) in rep.weights.actor.iter().zip(k.iter()) {
                assert!((a - b).abs() <= 1e-3 * b.abs().max(1e-2));
            }
            for (a, b) in rep.weights.disturbance.iter().zip(sol.disturbance_gain.iter()) {
                assert!((a - b).abs() <= 1e-3 * b.abs().max(1e-2));
            }
            finals.push(rep);
        }
        assert!(finals[0].iterations() > finals[2].iterations());
        let reference = finals[2].weights.stack();
        for rep in &finals[..2] {
            assert!((rep.weights.stack() - &reference).norm() <= 1e-3 * (1.0 + reference.norm()));
        }
    }

    #[test]
    fn in_span_regression_is_consistent() {
        let spec = linear_spec();
        let data = linear_data();
        let bases = linear_bases();
        let mut w = StackedWeights::zeros(&bases, 1, 1);
        w.actor = DMatrix::from_column_slice(2, 1, &[-0.2, -0.4]);
        let (_, ls) = offpolicy_iterate(&spec, &data, &bases, &w, 0.5).unwrap();
        assert!(ls.residual_inf <= 1e-8, "residual {}", ls.residual_inf);
    }

    #[test]
    fn data_are_not_modified() {
        let spec = spec_a();
        let data = example_data(5);
        let copy = data.clone();
        let bases = reference_bases(ReferenceProblem::ExampleA);
        let w0 = StackedWeights::zeros(&bases, 1, 1);
        offpolicy_solve(&spec, &data, &bases, &w0, 0.3, Convergence::Absolute(1e-7), 5).unwrap();
        assert_eq!(data, copy);
    }

    #[test]
    fn matches_onpolicy_when_behavior_is_the_evaluated_policy() {
        // Zero critic, zero actors, zero behavior: μ = ν = 0 on every window.
        let spec = spec_a();
        let zero = ZeroPolicy {
            control_dim: 1,
            disturbance_dim: 1,
        };
        let x0 = DVector::from_vec(vec![0.8, -0.6]);
        let data = collect(&spec, &x0, 40, 0.05, 10, Behavior::Policy(&zero), 0).unwrap();
        let bases = reference_bases(ReferenceProblem::ExampleA);
        let w0 = StackedWeights::zeros(&bases, 1, 1);
        let (pi, _) = assemble_features(&spec, &data, &bases, &w0, 0.3).unwrap();
        assert_eq!(pi.columns(5, 18).amax(), 0.0);
        let (next, _) = offpolicy_iterate(&spec, &data, &bases, &w0, 0.3).unwrap();

        let (x, y) = assemble_onpolicy(&spec, &bases.critic, &w0.critic, &data.windows, 0.3).unwrap();
        let on = solve_least_squares(&x, &y).unwrap().solution;
        assert!((next.critic - on).amax() < 1e-6);
    }

    #[test]
    fn converged_weights_satisfy_generalized_bellman() {
        let spec = linear_spec();
        let data = linear_data();
        let bases = linear_bases();
        let w0 = StackedWeights::zeros(&bases, 1, 1);
        let rep = offpolicy_solve(&spec, &data, &bases, &w0, 0.6, Convergence::Absolute(1e-10), 300).unwrap();
        let v = CriticFunction::new(bases.critic.clone(), rep.weights.critic.clone()).unwrap();
        for x in grid_points(&[-1.0, -1.0], &[1.0, 1.0], 7) {
            let r = generalized_bellman_residual(&spec, &v, &v, 0.6, &x).unwrap();
            let q = spec.dynamics.state_cost(&x);
            assert!(r.abs() <= 1e-3 * (1.0 + q), "residual {r} at {x:?}");
        }
    }

    #[test]
    fn equilibrium_data_have_no_excitation() {
        let spec = spec_a();
        let zero = ZeroPolicy {
            control_dim: 1,
            disturbance_dim: 1,
        };
        let data = collect(&spec, &DVector::zeros(2), 50, 0.05, 10, Behavior::Policy(&zero), 0).unwrap();
        let bases = reference_bases(ReferenceProblem::ExampleA);
        let w0 = StackedWeights::zeros(&bases, 1, 1);
        assert!(matches!(
            offpolicy_iterate(&spec, &data, &bases, &w0, 0.3),
            Err(Error::ExcitationInsufficient { .. })
        ));
    }

    #[test]
    fn rejects_short_or_stale_data() {
        let spec = spec_a();
        let bases = reference_bases(ReferenceProblem::ExampleA);
        let w0 = StackedWeights::zeros(&bases, 1, 1);
        let mut data = example_data(6);
        data.windows.truncate(23);
        assert!(matches!(
            offpolicy_iterate(&spec, &data, &bases, &w0, 0.3),
            Err(Error::InsufficientData { samples: 23, unknowns: 23 })
        ));
        let mut data = example_data(6);
        data.fingerprint.state_dim = 3;
        assert!(matches!(assemble_features(&spec, &data, &bases, &w0, 0.3), Err(Error::StaleData(_))));
    }

    #[test]
    fn example_settings_converge() {
        let spec = spec_a();
        let bases = reference_bases(ReferenceProblem::ExampleA);
        let w0 = StackedWeights::zeros(&bases, 1, 1);
        let rep =
            offpolicy_solve(&spec, &example_data(1), &bases, &w0, 0.3, Convergence::Absolute(1e-7), 100).unwrap();
        assert!(rep.converged);
        // g(0) = 0, so the quadratic part of the value solves the Riccati
        // equation of the linearization with the disturbance channel only.
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, -0.5, -0.5]);
        let d = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let lin = solve_gare(&a, &DMatrix::zeros(2, 1), &d, &DMatrix::identity(2, 2), &DMatrix::identity(1, 1), 2.0)
            .unwrap()
            .p;
        let c = &rep.weights.critic;
        let expected = [lin[(0, 0)], lin[(1, 1)], 2.0 * lin[(0, 1)]];
        for (w, e) in c.iter().zip(expected) {
            assert!((w - e).abs() < 0.05, "{w} vs {e}");
        }
    }
}
