//! Runs behind the CLI subcommands, kept separate from file output so tests
//! can inspect the numbers directly.

use hinf_core::basis::{format_term, reference_bases, Bases, BasisSet, ReferenceProblem};
use hinf_core::dynamics::integrate_substeps;
use hinf_core::hji::{GameSpec, PolicyPair};
use hinf_core::learner::{Convergence, SolveReport};
use hinf_core::missile::{run_engagement, EngagementResult};
use hinf_core::offpolicy::{collect, offpolicy_solve, ActorPolicy, Behavior, DataSet, StackedWeights};
use hinf_core::oracle::{solve_gare, GareSolution};
use hinf_core::{DMatrix, DVector};

use crate::config::{ExperimentConfig, MissileConfig, ReplaySection};
use crate::error::Result;

/// Records the configured number of windows under uniform behavior inputs.
pub fn collect_data(cfg: &ExperimentConfig) -> Result<DataSet> {
    let l = &cfg.learner;
    let behavior = Behavior::Uniform {
        control: l.control_amplitude,
        disturbance: l.disturbance_amplitude,
    };
    Ok(collect(&cfg.spec()?, &cfg.x0(), l.windows, l.dt, l.substeps, behavior, l.seed)?)
}

/// Off-policy iteration from zero weights on `data`.
pub fn solve(cfg: &ExperimentConfig, data: &DataSet) -> Result<SolveReport<StackedWeights>> {
    let spec = cfg.spec()?;
    let bases = cfg.bases()?;
    let l = &cfg.learner;
    let w0 = StackedWeights::zeros(&bases, spec.control_dim(), spec.disturbance_dim());
    Ok(offpolicy_solve(
        &spec,
        data,
        &bases,
        &w0,
        l.alpha,
        Convergence::Absolute(l.tolerance),
        l.max_iterations,
    )?)
}

/// Closed-loop run under the learned actor and a decaying disturbance.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub t: Vec<f64>,
    pub x: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    pub w: Vec<DVector<f64>>,
    /// `√(∫(Q + uᵀRu) / ∫wᵀw)` from the start of the replay, undefined
    /// while no disturbance energy has entered.
    pub attenuation: Vec<Option<f64>>,
}

impl Replay {
    pub fn final_attenuation(&self) -> Option<f64> {
        self.attenuation.last().copied().flatten()
    }
}

pub fn replay_disturbance(r: &ReplaySection, t0: f64, t: f64) -> f64 {
    let s = t - t0;
    r.amplitude * (-r.decay * s).exp() * (r.frequency * s).cos()
}

/// Integrates from `x_start` at `t0` for `r.horizon` seconds in steps of
/// `dt / substeps`, with `u` from `weights` and every disturbance channel
/// driven by [`replay_disturbance`].
#[allow(clippy::too_many_arguments)]
pub fn replay(
    spec: &GameSpec,
    bases: &Bases,
    weights: &StackedWeights,
    x_start: &DVector<f64>,
    t0: f64,
    dt: f64,
    substeps: usize,
    r: &ReplaySection,
) -> Result<Replay> {
    let policy = ActorPolicy::new(bases, weights);
    let q = spec.disturbance_dim();
    let signal = |t: f64| DVector::from_element(q, replay_disturbance(r, t0, t));
    let windows = (r.horizon / dt).round() as usize;
    let h = dt / substeps as f64;

    let mut t = vec![t0];
    let mut x = vec![x_start.clone()];
    for k in 0..windows {
        let start = t0 + k as f64 * dt;
        let states = integrate_substeps(spec.dynamics.as_ref(), x.last().unwrap(), start, dt, substeps, |s, y| {
            (policy.control(y), signal(s))
        })?;
        for (j, state) in states.into_iter().enumerate().skip(1) {
            t.push(start + j as f64 * h);
            x.push(state);
        }
    }
    let u: Vec<DVector<f64>> = x.iter().map(|y| policy.control(y)).collect();
    let w: Vec<DVector<f64>> = t.iter().map(|&s| signal(s)).collect();

    // running trapezoid sums
    let output = |k: usize| {
        let ru: f64 = u[k].iter().zip(spec.r_diag.iter()).map(|(u, r)| r * u * u).sum();
        spec.dynamics.state_cost(&x[k]) + ru
    };
    let mut attenuation = vec![None];
    let (mut num, mut den) = (0.0, 0.0);
    for k in 1..t.len() {
        let step = t[k] - t[k - 1];
        num += 0.5 * step * (output(k - 1) + output(k));
        den += 0.5 * step * (w[k - 1].norm_squared() + w[k].norm_squared());
        attenuation.push((den > 0.0).then(|| (num / den).sqrt()));
    }
    Ok(Replay {
        t,
        x,
        u,
        w,
        attenuation,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleAOutcome {
    pub data: DataSet,
    pub report: SolveReport<StackedWeights>,
    pub replay: Replay,
}

/// Collect, solve, then replay from where collection ended.
pub fn example_a(cfg: &ExperimentConfig) -> Result<ExampleAOutcome> {
    let replay_cfg = cfg.replay()?;
    let spec = cfg.spec()?;
    let bases = cfg.bases()?;
    let data = collect_data(cfg)?;
    let report = solve(cfg, &data)?;
    let last = data.windows.last().expect("collect returns at least one window");
    let replay = replay(
        &spec,
        &bases,
        &report.weights,
        last.end(),
        last.t_end(),
        cfg.learner.dt,
        cfg.learner.substeps,
        replay_cfg,
    )?;
    Ok(ExampleAOutcome { data, report, replay })
}

/// One learned weight next to the value the Riccati solution implies.
#[derive(Debug, Clone, PartialEq)]
pub struct Delta {
    /// `critic`, `actor` or `disturbance`.
    pub block: &'static str,
    /// Input channel, 0 for the critic.
    pub channel: usize,
    pub term: Vec<u32>,
    pub oracle: f64,
    pub learned: f64,
}

impl Delta {
    /// Relative error, or absolute error where the oracle value is zero.
    pub fn error(&self) -> f64 {
        let diff = (self.learned - self.oracle).abs();
        if self.oracle == 0.0 {
            diff
        } else {
            diff / self.oracle.abs()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    pub gare: GareSolution,
    pub report: SolveReport<StackedWeights>,
    pub deltas: Vec<Delta>,
}

impl OracleOutcome {
    pub fn max_error(&self, block: &str) -> f64 {
        self.deltas
            .iter()
            .filter(|d| d.block == block)
            .map(Delta::error)
            .fold(0.0, f64::max)
    }
}

/// Coefficient of `term` in `xᵀPx`.
fn quadratic_coefficient(p: &DMatrix<f64>, term: &[u32]) -> f64 {
    let support: Vec<usize> = (0..term.len()).filter(|&i| term[i] > 0).collect();
    match (support.as_slice(), term.iter().sum::<u32>()) {
        ([i], 2) => p[(*i, *i)],
        ([i, j], 2) => p[(*i, *j)] + p[(*j, *i)],
        _ => 0.0,
    }
}

/// Coefficient of `term` in the linear function `gain · x`.
fn linear_coefficient(gain_row: &[f64], term: &[u32]) -> f64 {
    let support: Vec<usize> = (0..term.len()).filter(|&i| term[i] > 0).collect();
    match (support.as_slice(), term.iter().sum::<u32>()) {
        ([i], 1) => gain_row[*i],
        _ => 0.0,
    }
}

fn block_deltas(
    block: &'static str,
    basis: &BasisSet,
    learned: &DMatrix<f64>,
    expected: impl Fn(usize, &[u32]) -> f64,
) -> Vec<Delta> {
    let mut out = Vec::new();
    for channel in 0..learned.ncols() {
        for (k, term) in basis.terms().iter().enumerate() {
            out.push(Delta {
                block,
                channel,
                term: term.clone(),
                oracle: expected(channel, term),
                learned: learned[(k, channel)],
            });
        }
    }
    out
}

/// Solves the game Riccati equation of a linear instance and compares the
/// off-policy weights with it.
pub fn oracle(cfg: &ExperimentConfig) -> Result<OracleOutcome> {
    let game = cfg.linear_game()?;
    let r = DMatrix::from_diagonal(&DVector::from_vec(cfg.game.r.clone()));
    let gare = solve_gare(&game.a, &game.b, &game.d, &game.qm, &r, cfg.game.gamma)?;
    let bases = cfg.bases()?;
    let data = collect_data(cfg)?;
    let report = solve(cfg, &data)?;

    let w = &report.weights;
    let critic = DMatrix::from_column_slice(w.critic.len(), 1, w.critic.as_slice());
    let row = |m: &DMatrix<f64>, j: usize| -> Vec<f64> { m.row(j).iter().copied().collect() };
    let mut deltas = block_deltas("critic", &bases.critic, &critic, |_, t| quadratic_coefficient(&gare.p, t));
    // u = −Kx, w = Lx
    deltas.extend(block_deltas("actor", &bases.actor, &w.actor, |j, t| {
        -linear_coefficient(&row(&gare.control_gain, j), t)
    }));
    deltas.extend(block_deltas("disturbance", &bases.disturbance, &w.disturbance, |j, t| {
        linear_coefficient(&row(&gare.disturbance_gain, j), t)
    }));
    Ok(OracleOutcome { gare, report, deltas })
}

pub fn missile(cfg: &MissileConfig) -> Result<EngagementResult> {
    Ok(run_engagement(&cfg.engagement())?)
}

/// Bases the engagement learns with; fixed by the library.
pub fn missile_bases() -> Bases {
    reference_bases(ReferenceProblem::Missile)
}

/// `2 0` → `2_0`, for column names.
pub fn term_label(term: &[u32]) -> String {
    format_term(term).replace(' ', "_")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficients_of_quadratic_and_linear_forms() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.25, 0.25, 3.0]);
        assert_eq!(quadratic_coefficient(&p, &[2, 0]), 1.0);
        assert_eq!(quadratic_coefficient(&p, &[0, 2]), 3.0);
        assert_eq!(quadratic_coefficient(&p, &[1, 1]), 0.5);
        assert_eq!(quadratic_coefficient(&p, &[4, 0]), 0.0);
        assert_eq!(linear_coefficient(&[2.0, -1.0], &[0, 1]), -1.0);
        assert_eq!(linear_coefficient(&[2.0, -1.0], &[1, 1]), 0.0);
    }

    #[test]
    fn replay_signal_and_ratio() {
        let r = ReplaySection {
            horizon: 1.0,
            amplitude: 5.0,
            decay: 0.2,
            frequency: 1.0,
        };
        assert_eq!(replay_disturbance(&r, 2.5, 2.5), 5.0);
        let cfg = ExperimentConfig::example_a();
        let spec = cfg.spec().unwrap();
        let bases = cfg.bases().unwrap();
        let zero = StackedWeights::zeros(&bases, 1, 1);
        let rep = replay(&spec, &bases, &zero, &DVector::zeros(2), 2.5, 0.05, 10, &r).unwrap();
        assert_eq!(rep.t.len(), 201);
        assert!((rep.t[200] - 3.5).abs() < 1e-12);
        assert_eq!(rep.attenuation[0], None);
        assert!(rep.u.iter().all(|u| u[0] == 0.0));
        // from rest the output energy starts at zero and grows
        let a = rep.final_attenuation().unwrap();
        assert!(a > 0.0 && a < 1.0, "{a}");
    }
}
