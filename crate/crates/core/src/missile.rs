//! Planar interception with guidance re-learned every cycle.
//!
//! The missile flies for `windows_per_cycle · dt` seconds with its current
//! actor (plus exploration noise early on), recording the line-of-sight state
//! `(θ, θ̇)`. At the end of each cycle off-policy α-PI runs on the recorded
//! windows and its actor becomes the guidance law of the next cycle. The
//! line-of-sight angle is measured from its value at the start of the
//! cycle when it carries no cost.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{reference_bases, Bases, ReferenceProblem};
use crate::dynamics::{step_engagement, EngagementState, LosDynamics, SampleWindow, Step};
use crate::hji::{GameSpec, PolicyPair};
use crate::learner::Convergence;
use crate::offpolicy::{offpolicy_solve, ActorPolicy, DataSet, Fingerprint, StackedWeights};
use crate::{Error, Result, G0};

/// Target lateral acceleration program: zero before `onset`, then
/// `peak · sin(2π(t − onset)/period)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maneuver {
    pub enabled: bool,
    /// s.
    pub onset: f64,
    /// m/s².
    pub peak: f64,
    /// s.
    pub period: f64,
}

impl Default for Maneuver {
    fn default() -> Self {
        Self {
            enabled: true,
            onset: 1.5,
            peak: 9.0 * G0,
            period: 2.0,
        }
    }
}

pub fn target_maneuver(t: f64, maneuver: &Maneuver) -> f64 {
    if !maneuver.enabled || t < maneuver.onset {
        return 0.0;
    }
    maneuver.peak * libm::sin(2.0 * core::f64::consts::PI * (t - maneuver.onset) / maneuver.period)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngagementConfig {
    pub initial: EngagementState,
    pub q1: f64,
    pub q2: f64,
    pub r: f64,
    pub gamma: f64,
    /// Window length, s.
    pub dt: f64,
    pub windows_per_cycle: usize,
    /// Kinematic integration steps per window.
    pub substeps: usize,
    pub alpha: f64,
    /// Relative bound on the stacked weight change.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Start every solve from the full previous weights. Otherwise the
    /// critic and disturbance weights start at zero and only the actor is
    /// carried over.
    pub warm_start: bool,
    /// Navigation constant `N` of the actor `a_M = −N|V_r|θ̇` that the
    /// first solve starts from. Iterating from a non-stabilizing actor
    /// (such as zero, since the line-of-sight rate is open-loop unstable)
    /// converges to the anti-stabilizing game solution.
    pub navigation_gain: f64,
    /// Amplitude of the uniform noise added to the commanded acceleration, m/s².
    pub exploration: f64,
    /// Number of leading cycles that carry exploration noise.
    pub exploration_cycles: usize,
    /// Bound on `|a_M|`, m/s².
    pub saturation: f64,
    pub maneuver: Maneuver,
    /// Simulation stops here if neither termination condition has fired, s.
    pub max_time: f64,
    pub seed: u64,
}

impl Default for EngagementConfig {
    fn default() -> Self {
        Self {
            initial: EngagementState::table1(),
            q1: 0.0,
            q2: 1e8,
            r: 1.0,
            gamma: 10.0,
            dt: 0.005,
            windows_per_cycle: 100,
            substeps: 5,
            alpha: 0.3,
            tolerance: 1e-7,
            max_iterations: 200,
            warm_start: false,
            navigation_gain: 3.0,
            exploration: 20.0,
            exploration_cycles: 2,
            saturation: 30.0 * G0,
            maneuver: Maneuver::default(),
            max_time: 40.0,
            seed: 0,
        }
    }
}

impl EngagementConfig {
    pub fn cycle_period(&self) -> f64 {
        self.dt * self.windows_per_cycle as f64
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt", self.dt),
            ("r", self.r),
            ("gamma", self.gamma),
            ("tolerance", self.tolerance),
            ("saturation", self.saturation),
            ("max_time", self.max_time),
            ("maneuver period", self.maneuver.period),
            ("navigation gain", self.navigation_gain),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.q1 < 0.0 || self.q2 < 0.0 || self.exploration < 0.0 {
            return Err(Error::InvalidParameter("weights and noise amplitude must be nonnegative".into()));
        }
        if self.substeps < 2 {
            return Err(Error::InvalidParameter("a window needs at least 2 sub-steps".into()));
        }
        crate::hji::check_alpha(self.alpha)?;
        if !(self.initial.r > crate::dynamics::R_GUARD) {
            return Err(Error::InvalidParameter("initial range is inside the guard".into()));
        }
        Ok(())
    }
}

/// One recorded window start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngagementSample {
    pub t: f64,
    pub state: EngagementState,
    /// Missile acceleration held over the following window, m/s².
    pub a_m: f64,
    /// Target acceleration held over the following window, m/s².
    pub a_t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleReport {
    /// Time at which the solve ran, s.
    pub t: f64,
    pub weights: StackedWeights,
    pub iterations: usize,
    pub converged: bool,
    /// Weight change and regression condition number of the last
    /// iteration, if any ran.
    pub final_change: Option<f64>,
    pub condition: Option<f64>,
    /// Whether these weights became the guidance law. Only converged solves
    /// whose final regression needed no ridge fallback are adopted.
    /// Without exploration the actor weights are held at their previous
    /// values by the solver, since such data cannot identify them.
    pub adopted: bool,
    /// Windows the solve was fitted on.
    pub data: DataSet,
    /// Set when the solve failed outright; the previous actor stays in use.
    pub error: Option<Error>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The range rate turned nonnegative.
    Receding,
    /// The range fell below the guard.
    Guard,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngagementResult {
    pub samples: Vec<EngagementSample>,
    pub cycles: Vec<CycleReport>,
    /// Minimum range, m, interpolated between integration steps.
    pub miss_distance: f64,
    /// Time of minimum range, s.
    pub intercept_time: f64,
    pub termination: Termination,
}

impl EngagementResult {
    pub fn max_iterations(&self) -> usize {
        self.cycles.iter().map(|c| c.iterations).max().unwrap_or(0)
    }
}

fn los_state(s: &EngagementState, theta_ref: f64) -> DVector<f64> {
    DVector::from_vec(alloc::vec![s.theta - theta_ref, s.theta_dot])
}

/// Minimum of `r²` through three equally spaced samples `h` apart, centred
/// on the smallest. Exact when the relative velocity is constant.
fn interpolate_minimum(t_mid: f64, h: f64, r2: [f64; 3]) -> (f64, f64) {
    let curvature = r2[0] - 2.0 * r2[1] + r2[2];
    if curvature <= 0.0 {
        return (libm::sqrt(r2[1]), t_mid);
    }
    let offset = 0.5 * (r2[0] - r2[2]) / curvature;
    let min_r2 = r2[1] - 0.25 * (r2[0] - r2[2]) * offset;
    (libm::sqrt(min_r2.max(0.0)), t_mid + offset * h)
}

pub fn run_engagement(cfg: &EngagementConfig) -> Result<EngagementResult> {
    cfg.validate()?;
    let bases: Bases = reference_bases(ReferenceProblem::Missile);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let h = cfg.dt / cfg.substeps as f64;

    // guidance in force; zero until a solve converges
    let mut actor = StackedWeights::zeros(&bases, 1, 1);
    let mut learned = false;
    let mut state = cfg.initial;
    let mut t = 0.0;
    let mut samples = Vec::new();
    let mut cycles = Vec::new();
    // (t, r²) at every integration step
    let mut ranges: Vec<(f64, f64)> = alloc::vec![(0.0, state.r * state.r)];
    let mut termination = Termination::Timeout;

    'flight: for cycle in 0.. {
        let noise = if cycle < cfg.exploration_cycles { cfg.exploration } else { 0.0 };
        let mut windows = Vec::with_capacity(cfg.windows_per_cycle);
        // With q₁ = 0 nothing depends on θ itself, so each cycle measures it
        // from its own start. That keeps the x₁ monomials from becoming
        // near-copies of the x₂ ones, which they are when θ barely moves.
        let theta_ref = if cfg.q1 == 0.0 { state.theta } else { 0.0 };
        for _ in 0..cfg.windows_per_cycle {
            let t_start = t;
            let x0 = los_state(&state, theta_ref);
            let policy = ActorPolicy::new(&bases, &actor);
            let mut a_m = policy.control(&x0)[0];
            if noise > 0.0 {
                a_m += noise * rng.random_range(-1.0..=1.0);
            }
            let a_m = a_m.clamp(-cfg.saturation, cfg.saturation);
            let a_t = target_maneuver(t, &cfg.maneuver);
            samples.push(EngagementSample {
                t,
                state,
                a_m,
                a_t,
            });

            let mut states = Vec::with_capacity(cfg.substeps + 1);
            states.push(x0);
            for j in 0..cfg.substeps {
                let step = step_engagement(&state, a_m, a_t, h)?;
                state = *step.state();
                t = t_start + (j + 1) as f64 * h;
                ranges.push((t, state.r * state.r));
                states.push(los_state(&state, theta_ref));
                if matches!(step, Step::Terminal(_)) {
                    termination = Termination::Guard;
                    break 'flight;
                }
                if state.closing_velocity() >= 0.0 {
                    termination = Termination::Receding;
                    break 'flight;
                }
            }
            windows.push(SampleWindow {
                t_start,
                dt: cfg.dt,
                substep_states: states,
                behavior_control: DVector::from_element(1, a_m),
                behavior_disturbance: DVector::from_element(1, a_t),
            });
            if t >= cfg.max_time {
                break 'flight;
            }
        }

        let data = DataSet {
            windows,
            fingerprint: Fingerprint {
                state_dim: 2,
                control_dim: 1,
                disturbance_dim: 1,
                dt: cfg.dt,
                substeps: cfg.substeps,
            },
            seed: cfg.seed,
        };
        let los = LosDynamics::frozen_at(&state, cfg.q1, cfg.q2);
        let spec = GameSpec::new(Arc::new(los), cfg.gamma, DVector::from_element(1, cfg.r))?;
        let w0 = if learned && cfg.warm_start {
            actor.clone()
        } else {
            let mut w0 = StackedWeights::zeros(&bases, 1, 1);
            if learned {
                w0.actor.copy_from(&actor.actor);
            } else {
                w0.actor[(0, 0)] = -cfg.navigation_gain * libm::fabs(state.closing_velocity());
            }
            w0
        };
        let stop = Convergence::Relative(cfg.tolerance);
        match offpolicy_solve(&spec, &data, &bases, &w0, cfg.alpha, stop, cfg.max_iterations) {
            Ok(report) => {
                let adopted = report.converged && report.well_posed();
                if adopted {
                    actor = report.weights.clone();
                    learned = true;
                }
                let last = report.history.last();
                cycles.push(CycleReport {
                    t,
                    final_change: last.map(|it| it.change),
                    condition: last.map(|it| it.condition),
                    iterations: report.iterations(),
                    converged: report.converged,
                    adopted,
                    weights: report.weights,
                    data,
                    error: None,
                });
            }
            Err(e) => cycles.push(CycleReport {
                t,
                weights: actor.clone(),
                iterations: 0,
                converged: false,
                final_change: None,
                condition: None,
                adopted: false,
                data,
                error: Some(e),
            }),
        }
    }

    let (i_min, _) = ranges
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("ranges start non-empty");
    let (miss_distance, intercept_time) = if i_min == 0 || i_min + 1 >= ranges.len() {
        (libm::sqrt(ranges[i_min].1), ranges[i_min].0)
    } else {
        let r2 = [ranges[i_min - 1].1, ranges[i_min].1, ranges[i_min + 1].1];
        interpolate_minimum(ranges[i_min].0, h, r2)
    };
    Ok(EngagementResult {
        samples,
        cycles,
        miss_distance,
        intercept_time,
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maneuver_profile() {
        let m = Maneuver::default();
        assert_eq!(target_maneuver(1.0, &m), 0.0);
        assert!((target_maneuver(1.5 + 0.5, &m) - 9.0 * 9.81).abs() < 1e-9);
        for k in 0..2000 {
            assert!(target_maneuver(k as f64 * 0.01, &m).abs() <= 9.0 * 9.81);
        }
        let off = Maneuver { enabled: false, ..m };
        assert_eq!(target_maneuver(2.0, &off), 0.0);
    }

    #[test]
    fn parabola_minimum_of_straight_pass() {
        // relative motion p(t) = (3, 900 t): r² = 9 + 810000 t²
        let r2 = |t: f64| 9.0 + 810_000.0 * t * t;
        let h = 0.001;
        let (miss, when) = interpolate_minimum(0.0004, h, [r2(-0.0006), r2(0.0004), r2(0.0014)]);
        assert!((miss - 3.0).abs() < 1e-9);
        assert!(when.abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = EngagementConfig {
            dt: 0.0,
            ..EngagementConfig::default()
        };
        assert!(run_engagement(&cfg).is_err());
    }
}
