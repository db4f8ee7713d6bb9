//! Run configuration. Files are TOML with `[game]`, `[learner]`, `[bases]`
//! and `[scenario]` sections; every key is required so a file alone pins
//! down a run. A manifest written by a run is itself a valid configuration
//! (its `[run]` section is ignored on load).

use std::path::Path;
use std::sync::Arc;

use hinf_core::basis::{format_term, parse_term, reference_bases, Bases, BasisSet, ReferenceProblem};
use hinf_core::dynamics::{make_example_a, make_linear_game, AffineDynamics, EngagementState, LinearGame};
use hinf_core::hji::GameSpec;
use hinf_core::missile::{EngagementConfig, Maneuver};
use hinf_core::{DMatrix, DVector, G0};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reads a configuration or manifest file.
pub fn load<C: DeserializeOwned>(path: &Path) -> Result<C> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    parse(&text).map_err(|source| Error::ConfigSyntax {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses configuration text, dropping a manifest's `[run]` table first.
pub fn parse<C: DeserializeOwned>(text: &str) -> std::result::Result<C, toml::de::Error> {
    let mut table: toml::Table = toml::from_str(text)?;
    table.remove("run");
    table.try_into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum System {
    /// The two-state nonlinear benchmark.
    ExampleA,
    /// `ẋ = Ax + Bu + Dw` with `Q(x) = xᵀQx`; needs `a`, `b`, `d`, `q`.
    Linear,
}

/// Matrices are written as lists of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    pub system: System,
    pub gamma: f64,
    /// Diagonal of `R`, one entry per control channel.
    pub r: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSection {
    pub alpha: f64,
    /// Window length, s.
    pub dt: f64,
    /// Number of recorded windows.
    pub windows: usize,
    /// RK4 steps per window, also the quadrature resolution.
    pub substeps: usize,
    /// Bound on the stacked weight change between iterations.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
    /// Behavior inputs are drawn from `U[−a, a]` per channel and window.
    pub control_amplitude: f64,
    pub disturbance_amplitude: f64,
}

/// Basis terms as exponent lists, e.g. `"2 0"` for `x₁²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasesSection {
    pub critic: Vec<String>,
    pub actor: Vec<String>,
    pub disturbance: Vec<String>,
}

impl BasesSection {
    pub fn from_bases(bases: &Bases) -> Self {
        let terms = |b: &BasisSet| b.terms().iter().map(|t| format_term(t)).collect();
        Self {
            critic: terms(&bases.critic),
            actor: terms(&bases.actor),
            disturbance: terms(&bases.disturbance),
        }
    }

    pub fn build(&self, state_dim: usize) -> Result<Bases> {
        let set = |lines: &[String]| -> Result<BasisSet> {
            let terms = lines.iter().map(|l| parse_term(l)).collect::<hinf_core::Result<Vec<_>>>()?;
            Ok(BasisSet::new(state_dim, terms)?)
        };
        Ok(Bases {
            critic: set(&self.critic)?,
            actor: set(&self.actor)?,
            disturbance: set(&self.disturbance)?,
        })
    }
}

/// Closed-loop replay after learning, under
/// `w(t) = amplitude · exp(−decay (t − t₀)) · cos(frequency (t − t₀))`
/// where `t₀` is the end of data collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplaySection {
    /// s.
    pub horizon: f64,
    pub amplitude: f64,
    /// 1/s.
    pub decay: f64,
    /// rad/s.
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub x0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay: Option<ReplaySection>,
}

/// Configuration of `example-a`, `oracle`, `collect` and `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameSection,
    pub learner: LearnerSection,
    pub bases: BasesSection,
    pub scenario: ScenarioSection,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(name: &str, rows: &Option<Vec<Vec<f64>>>) -> Result<DMatrix<f64>> {
    let rows = rows
        .as_ref()
        .ok_or_else(|| Error::Config(format!("linear system needs game.{name}")))?;
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config(format!("game.{name} must be a non-empty list of equal-length rows")));
    }
    Ok(DMatrix::from_row_iterator(nrows, ncols, rows.iter().flatten().copied()))
}

impl ExperimentConfig {
    /// The nonlinear benchmark with the reference learning settings.
    pub fn example_a() -> Self {
        Self {
            game: GameSection {
                system: System::ExampleA,
                gamma: 2.0,
                r: vec![1.0],
                a: None,
                b: None,
                d: None,
                q: None,
            },
            learner: LearnerSection {
                alpha: 0.3,
                dt: 0.05,
                windows: 50,
                substeps: 10,
                tolerance: 1e-7,
                max_iterations: 100,
                seed: 1,
                control_amplitude: 1.0,
                disturbance_amplitude: 1.0,
            },
            bases: BasesSection::from_bases(&reference_bases(ReferenceProblem::ExampleA)),
            scenario: ScenarioSection {
                x0: vec![0.4, 0.5],
                replay: Some(ReplaySection {
                    horizon: 10.0,
                    amplitude: 5.0,
                    decay: 0.2,
                    frequency: 1.0,
                }),
            },
        }
    }

    /// A two-state linear game with quadratic critic and linear policies.
    pub fn linear_oracle() -> Self {
        let two_state = BasisSet::quadratic(2);
        let linear = BasisSet::linear(2);
        Self {
            game: GameSection {
                system: System::Linear,
                gamma: 2.0,
                r: vec![1.0],
                a: Some(vec![vec![-1.0, 1.0], vec![-0.5, -2.0]]),
                b: Some(vec![vec![0.0], vec![1.0]]),
                d: Some(vec![vec![1.0], vec![0.5]]),
                q: Some(vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            },
            learner: LearnerSection {
                alpha: 0.3,
                dt: 0.05,
                windows: 80,
                substeps: 10,
                tolerance: 1e-10,
                max_iterations: 300,
                seed: 3,
                control_amplitude: 1.0,
                disturbance_amplitude: 1.0,
            },
            bases: BasesSection::from_bases(&Bases {
                critic: two_state,
                actor: linear.clone(),
                disturbance: linear,
            }),
            scenario: ScenarioSection {
                x0: vec![1.0, -1.0],
                replay: None,
            },
        }
    }

    /// `(A, B, D, Q)` of a linear system.
    pub fn linear_game(&self) -> Result<LinearGame> {
        if self.game.system != System::Linear {
            return Err(Error::Config("game.system must be \"linear\" here".into()));
        }
        let g = &self.game;
        Ok(make_linear_game(
            matrix("a", &g.a)?,
            matrix("b", &g.b)?,
            matrix("d", &g.d)?,
            matrix("q", &g.q)?,
        )?)
    }

    pub fn dynamics(&self) -> Result<Arc<dyn AffineDynamics>> {
        Ok(match self.game.system {
            System::ExampleA => Arc::new(make_example_a()),
            System::Linear => Arc::new(self.linear_game()?),
        })
    }

    pub fn spec(&self) -> Result<GameSpec> {
        let r = DVector::from_vec(self.game.r.clone());
        Ok(GameSpec::new(self.dynamics()?, self.game.gamma, r)?)
    }

    pub fn bases(&self) -> Result<Bases> {
        self.bases.build(self.scenario.x0.len())
    }

    pub fn x0(&self) -> DVector<f64> {
        DVector::from_vec(self.scenario.x0.clone())
    }

    pub fn replay(&self) -> Result<&ReplaySection> {
        self.scenario
            .replay
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs a [scenario.replay] section".into()))
    }

    pub fn set_linear(&mut self, a: &DMatrix<f64>, b: &DMatrix<f64>, d: &DMatrix<f64>, q: &DMatrix<f64>) {
        self.game.system = System::Linear;
        self.game.a = Some(rows(a));
        self.game.b = Some(rows(b));
        self.game.d = Some(rows(d));
        self.game.q = Some(rows(q));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissileGame {
    /// Weight on the line-of-sight angle.
    pub q1: f64,
    /// Weight on the line-of-sight rate.
    pub q2: f64,
    pub r: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissileLearner {
    pub alpha: f64,
    /// Window length, s.
    pub dt: f64,
    pub windows_per_cycle: usize,
    pub substeps: usize,
    /// Relative bound on the stacked weight change.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub warm_start: bool,
    /// Navigation constant of the actor the first solve starts from.
    pub navigation_gain: f64,
    /// Exploration noise amplitude, m/s².
    pub exploration: f64,
    pub exploration_cycles: usize,
    pub seed: u64,
}

/// Positions in m, headings in degrees, speeds in m/s, accelerations in g.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissileScenario {
    pub missile_position: [f64; 2],
    pub missile_heading_deg: f64,
    pub missile_speed: f64,
    pub target_position: [f64; 2],
    pub target_heading_deg: f64,
    pub target_speed: f64,
    pub saturation_g: f64,
    pub maneuver: bool,
    /// s.
    pub maneuver_onset: f64,
    pub maneuver_peak_g: f64,
    /// s.
    pub maneuver_period: f64,
    /// s.
    pub max_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissileConfig {
    pub game: MissileGame,
    pub learner: MissileLearner,
    pub scenario: MissileScenario,
}

impl Default for MissileConfig {
    fn default() -> Self {
        let e = EngagementConfig::default();
        Self {
            game: MissileGame {
                q1: e.q1,
                q2: e.q2,
                r: e.r,
                gamma: e.gamma,
            },
            learner: MissileLearner {
                alpha: e.alpha,
                dt: e.dt,
                windows_per_cycle: e.windows_per_cycle,
                substeps: e.substeps,
                tolerance: e.tolerance,
                max_iterations: e.max_iterations,
                warm_start: e.warm_start,
                navigation_gain: e.navigation_gain,
                exploration: e.exploration,
                exploration_cycles: e.exploration_cycles,
                seed: e.seed,
            },
            scenario: MissileScenario {
                missile_position: e.initial.missile_pos,
                missile_heading_deg: 0.0,
                missile_speed: e.initial.vm,
                target_position: e.initial.target_pos,
                target_heading_deg: 170.0,
                target_speed: e.initial.vt,
                saturation_g: 30.0,
                maneuver: e.maneuver.enabled,
                maneuver_onset: e.maneuver.onset,
                maneuver_peak_g: 9.0,
                maneuver_period: e.maneuver.period,
                max_time: e.max_time,
            },
        }
    }
}

impl MissileConfig {
    pub fn engagement(&self) -> EngagementConfig {
        let (g, l, s) = (&self.game, &self.learner, &self.scenario);
        EngagementConfig {
            initial: EngagementState::new(
                s.missile_position,
                s.missile_heading_deg.to_radians(),
                s.missile_speed,
                s.target_position,
                s.target_heading_deg.to_radians(),
                s.target_speed,
            ),
            q1: g.q1,
            q2: g.q2,
            r: g.r,
            gamma: g.gamma,
            dt: l.dt,
            windows_per_cycle: l.windows_per_cycle,
            substeps: l.substeps,
            alpha: l.alpha,
            tolerance: l.tolerance,
            max_iterations: l.max_iterations,
            warm_start: l.warm_start,
            navigation_gain: l.navigation_gain,
            exploration: l.exploration,
            exploration_cycles: l.exploration_cycles,
            saturation: s.saturation_g * G0,
            maneuver: Maneuver {
                enabled: s.maneuver,
                onset: s.maneuver_onset,
                peak: s.maneuver_peak_g * G0,
                period: s.maneuver_period,
            },
            max_time: s.max_time,
            seed: l.seed,
        }
    }
}
