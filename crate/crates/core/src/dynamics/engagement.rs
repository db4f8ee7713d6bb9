use alloc::format;

use crate::{Error, Result};

/// Range below which the `1/r` terms of the line-of-sight dynamics are not
/// evaluated and the engagement ends.
pub const R_GUARD: f64 = 0.1;

/// Planar missile–target geometry.
///
/// Angles are measured from the x axis. Lateral accelerations act
/// perpendicular to the velocity, positive clockwise (`η̇ = −a_M/V_M`,
/// `β̇ = −a_T/V_T`), which is the convention under which
/// `θ̈ = −(2V_r/r)θ̇ + (cos(η−θ)/r)a_M − (cos(β−θ)/r)a_T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngagementState {
    /// Range, m.
    pub r: f64,
    /// Line-of-sight angle, rad.
    pub theta: f64,
    /// Line-of-sight rate, rad/s.
    pub theta_dot: f64,
    /// Missile flight-path angle, rad.
    pub eta: f64,
    /// Target flight-path angle, rad.
    pub beta: f64,
    pub vm: f64,
    pub vt: f64,
    pub missile_pos: [f64; 2],
    pub target_pos: [f64; 2],
}

impl EngagementState {
    /// Builds the state from positions, headings and speeds; range and
    /// line-of-sight quantities are derived from the geometry.
    pub fn new(missile_pos: [f64; 2], eta: f64, vm: f64, target_pos: [f64; 2], beta: f64, vt: f64) -> Self {
        let dx = target_pos[0] - missile_pos[0];
        let dz = target_pos[1] - missile_pos[1];
        let r = libm::hypot(dx, dz);
        let theta = libm::atan2(dz, dx);
        let theta_dot = (vt * libm::sin(beta - theta) - vm * libm::sin(eta - theta)) / r;
        Self {
            r,
            theta,
            theta_dot,
            eta,
            beta,
            vm,
            vt,
            missile_pos,
            target_pos,
        }
    }

    /// Initial conditions of the reference interception scenario: missile
    /// at the origin heading 0° at 600 m/s, target at (10 km, 0) heading
    /// 170° at 300 m/s.
    pub fn table1() -> Self {
        Self::new([0.0, 0.0], 0.0, 600.0, [10_000.0, 0.0], 170f64.to_radians(), 300.0)
    }

    /// Range rate `V_r = V_T cos(β−θ) − V_M cos(η−θ)`; negative while closing.
    pub fn closing_velocity(&self) -> f64 {
        self.vt * libm::cos(self.beta - self.theta) - self.vm * libm::cos(self.eta - self.theta)
    }
}

/// Result of [`step_engagement`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Continue(EngagementState),
    /// Range reached [`R_GUARD`]; the engagement is over.
    Terminal(EngagementState),
}

impl Step {
    pub fn state(&self) -> &EngagementState {
        match self {
            Step::Continue(s) | Step::Terminal(s) => s,
        }
    }
}

/// Advances the planar kinematics by one RK4 step with both accelerations
/// held, then recomputes `r`, `θ`, `θ̇` from the geometry.
pub fn step_engagement(s: &EngagementState, a_m: f64, a_t: f64, dt: f64) -> Result<Step> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("engagement step must be positive, got {dt}")));
    }
    if s.r <= R_GUARD {
        return Ok(Step::Terminal(*s));
    }
    let (vm, vt) = (s.vm, s.vt);
    let field = |y: &[f64; 6]| -> [f64; 6] {
        [
            vm * libm::cos(y[4]),
            vm * libm::sin(y[4]),
            vt * libm::cos(y[5]),
            vt * libm::sin(y[5]),
            -a_m / vm,
            -a_t / vt,
        ]
    };
    let axpy = |y: &[f64; 6], k: &[f64; 6], h: f64| -> [f64; 6] { core::array::from_fn(|i| y[i] + h * k[i]) };

    let y0 = [s.missile_pos[0], s.missile_pos[1], s.target_pos[0], s.target_pos[1], s.eta, s.beta];
    let k1 = field(&y0);
    let k2 = field(&axpy(&y0, &k1, 0.5 * dt));
    let k3 = field(&axpy(&y0, &k2, 0.5 * dt));
    let k4 = field(&axpy(&y0, &k3, dt));
    let y: [f64; 6] = core::array::from_fn(|i| y0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));

    let next = EngagementState::new([y[0], y[1]], y[4], vm, [y[2], y[3]], y[5], vt);
    if !(next.r.is_finite() && next.theta_dot.is_finite()) {
        return Err(Error::IntegrationBlowup { time: dt });
    }
    if next.r <= R_GUARD {
        Ok(Step::Terminal(next))
    } else {
        Ok(Step::Continue(next))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{AffineDynamics, LosDynamics};
    use core::f64::consts::PI;
    use nalgebra::DVector;

    fn advance(s: &EngagementState, a_m: f64, a_t: f64, dt: f64) -> EngagementState {
        *step_engagement(s, a_m, a_t, dt).unwrap().state()
    }

    #[test]
    fn table1_initial_geometry() {
        let s = EngagementState::table1();
        assert_eq!(s.theta, 0.0);
        assert_eq!(s.r, 10_000.0);
        assert!((s.theta_dot - 300.0 * (170f64.to_radians()).sin() / 10_000.0).abs() < 1e-15);
    }

    #[test]
    fn head_on_closes_at_sum_of_speeds() {
        let s = EngagementState::new([0.0, 0.0], 0.0, 600.0, [10_000.0, 0.0], PI, 300.0);
        assert!((s.closing_velocity() + 900.0).abs() < 1e-12);
        assert!(s.theta_dot.abs() < 1e-15);
        let next = advance(&s, 0.0, 0.0, 0.01);
        assert!((s.r - next.r - 9.0).abs() < 1e-9);
        assert!(next.theta_dot.abs() < 1e-12);
    }

    #[test]
    fn collision_triangle_keeps_line_of_sight() {
        // V_T sin(β−θ) = V_M sin(η−θ) with θ = 0
        let beta = 150f64.to_radians();
        let eta = libm::asin(300.0 * libm::sin(beta) / 600.0);
        let s = EngagementState::new([0.0, 0.0], eta, 600.0, [8_000.0, 0.0], beta, 300.0);
        assert!(s.theta_dot.abs() < 1e-15);
        let next = advance(&s, 0.0, 0.0, 0.005);
        assert!(next.theta_dot.abs() < 1e-9);
    }

    #[test]
    fn speeds_are_conserved_and_range_is_geometric() {
        let mut s = EngagementState::table1();
        for k in 0..400 {
            let a_m = 50.0 * libm::sin(k as f64 * 0.1);
            s = advance(&s, a_m, -30.0, 0.005);
            assert_eq!(s.vm, 600.0);
            assert_eq!(s.vt, 300.0);
            let dx = s.target_pos[0] - s.missile_pos[0];
            let dz = s.target_pos[1] - s.missile_pos[1];
            assert!((s.r - libm::hypot(dx, dz)).abs() <= 1e-9 * s.r);
        }
    }

    #[test]
    fn line_of_sight_acceleration_matches_frozen_model() {
        let s = EngagementState::new([0.0, 0.0], 0.1, 600.0, [5_000.0, 800.0], 2.9, 300.0);
        let (a_m, a_t) = (40.0, -60.0);
        let h = 1e-4;
        let one = advance(&s, a_m, a_t, h).theta_dot;
        let two = advance(&s, a_m, a_t, 2.0 * h).theta_dot;
        let theta_ddot = (-3.0 * s.theta_dot + 4.0 * one - two) / (2.0 * h);
        let los = LosDynamics::frozen_at(&s, 0.0, 1.0);
        let x = DVector::from_vec(alloc::vec![s.theta, s.theta_dot]);
        let u = DVector::from_element(1, a_m);
        let w = DVector::from_element(1, a_t);
        let model = los.vector_field(&x, &u, &w);
        assert!((model[0] - s.theta_dot).abs() < 1e-15);
        assert!((theta_ddot - model[1]).abs() < 1e-6 * (1.0 + model[1].abs()));
    }

    #[test]
    fn guard_range_is_terminal() {
        let mut s = EngagementState::table1();
        s.r = R_GUARD;
        assert!(matches!(step_engagement(&s, 0.0, 0.0, 0.005), Ok(Step::Terminal(_))));
        assert!(step_engagement(&EngagementState::table1(), 0.0, 0.0, 0.0).is_err());
    }
}
