//! Value functions, saddle-point policies and HJI residuals.
//!
//! For a critic `V`, the residual map is
//!
//! ```text
//! 𝒢(V) = Q + ∇Vᵀf − ¼ ∇Vᵀ g R⁻¹ gᵀ ∇V + (1/4γ²) ∇Vᵀ k kᵀ ∇V
//! ```
//!
//! whose zero is the HJI solution. Its Fréchet differential in direction
//! `Z` reduces to `(∇Z)ᵀ(f + g u_V + k w_V)`, and a damped Newton step of
//! length `α` on `𝒢` is the generalized Bellman equation checked by
//! [`generalized_bellman_residual`].

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::basis::BasisSet;
use crate::dynamics::{check_len, check_state, AffineDynamics};
use crate::{Error, Result};

/// A zero-sum game: dynamics, attenuation level `γ` and diagonal `R`.
#[derive(Clone)]
pub struct GameSpec {
    pub dynamics: Arc<dyn AffineDynamics>,
    pub gamma: f64,
    pub r_diag: DVector<f64>,
}

impl core::fmt::Debug for GameSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("GameSpec")
            .field("n", &self.dynamics.state_dim())
            .field("m", &self.dynamics.control_dim())
            .field("q", &self.dynamics.disturbance_dim())
            .field("gamma", &self.gamma)
            .field("r_diag", &self.r_diag.as_slice())
            .finish()
    }
}

impl GameSpec {
    pub fn new(dynamics: Arc<dyn AffineDynamics>, gamma: f64, r_diag: DVector<f64>) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        check_len("R diagonal", dynamics.control_dim(), r_diag.len())?;
        if !r_diag.iter().all(|r| *r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter("R diagonal entries must be positive".into()));
        }
        Ok(Self {
            dynamics,
            gamma,
            r_diag,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.dynamics.state_dim()
    }

    pub fn control_dim(&self) -> usize {
        self.dynamics.control_dim()
    }

    pub fn disturbance_dim(&self) -> usize {
        self.dynamics.disturbance_dim()
    }

    /// `Q(x) + uᵀRu − γ²wᵀw`.
    pub fn running_cost(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let uru: f64 = u.iter().zip(self.r_diag.iter()).map(|(ui, ri)| ri * ui * ui).sum();
        self.dynamics.state_cost(x) + uru - self.gamma * self.gamma * w.norm_squared()
    }
}

/// `V(x) = Wᵀρ(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticFunction {
    pub basis: BasisSet,
    pub weights: DVector<f64>,
}

impl CriticFunction {
    pub fn new(basis: BasisSet, weights: DVector<f64>) -> Result<Self> {
        check_len("critic weights", basis.len(), weights.len())?;
        Ok(Self { basis, weights })
    }

    pub fn zero(basis: BasisSet) -> Self {
        let weights = DVector::zeros(basis.len());
        Self { basis, weights }
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.weights.dot(&self.basis.eval(x)?))
    }

    /// `∇V(x) = (∇ρ)ᵀW`.
    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.basis.eval_gradient(x)?.tr_mul(&self.weights))
    }
}

/// A control policy `u(x)` together with a disturbance policy `w(x)`.
///
/// Callers pass states of the right dimension.
pub trait PolicyPair {
    fn control(&self, x: &DVector<f64>) -> DVector<f64>;
    fn disturbance(&self, x: &DVector<f64>) -> DVector<f64>;
}

/// `u ≡ 0`, `w ≡ 0`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroPolicy {
    pub control_dim: usize,
    pub disturbance_dim: usize,
}

impl PolicyPair for ZeroPolicy {
    fn control(&self, _x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.control_dim)
    }
    fn disturbance(&self, _x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.disturbance_dim)
    }
}

/// Saddle-point policies of a critic:
/// `u = −½R⁻¹gᵀ∇V`, `w = (1/2γ²)kᵀ∇V`.
#[derive(Debug, Clone, Copy)]
pub struct SaddlePolicies<'a> {
    spec: &'a GameSpec,
    critic: &'a CriticFunction,
}

pub fn extract_policies<'a>(spec: &'a GameSpec, critic: &'a CriticFunction) -> Result<SaddlePolicies<'a>> {
    check_len("critic basis", spec.state_dim(), critic.basis.state_dim())?;
    Ok(SaddlePolicies { spec, critic })
}

impl SaddlePolicies<'_> {
    fn control_from_gradient(&self, x: &DVector<f64>, grad: &DVector<f64>) -> DVector<f64> {
        let gt = self.spec.dynamics.control_gain(x).tr_mul(grad);
        DVector::from_iterator(gt.len(), gt.iter().zip(self.spec.r_diag.iter()).map(|(v, r)| -0.5 * v / r))
    }

    fn disturbance_from_gradient(&self, x: &DVector<f64>, grad: &DVector<f64>) -> DVector<f64> {
        let g2 = self.spec.gamma * self.spec.gamma;
        self.spec.dynamics.disturbance_gain(x).tr_mul(grad) / (2.0 * g2)
    }
}

impl PolicyPair for SaddlePolicies<'_> {
    fn control(&self, x: &DVector<f64>) -> DVector<f64> {
        let grad = self.critic.gradient(x).expect("state dimension checked by caller");
        self.control_from_gradient(x, &grad)
    }

    fn disturbance(&self, x: &DVector<f64>) -> DVector<f64> {
        let grad = self.critic.gradient(x).expect("state dimension checked by caller");
        self.disturbance_from_gradient(x, &grad)
    }
}

fn check_critic(spec: &GameSpec, critic: &CriticFunction, x: &DVector<f64>) -> Result<()> {
    check_state(spec.dynamics.as_ref(), x)?;
    check_len("critic basis", spec.state_dim(), critic.basis.state_dim())
}

/// `H(x, u, w, ∇V) = Q + uᵀRu − γ²wᵀw + ∇Vᵀ(f + gu + kw)`.
pub fn hamiltonian(
    spec: &GameSpec,
    critic: &CriticFunction,
    x: &DVector<f64>,
    u: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<f64> {
    check_critic(spec, critic, x)?;
    check_len("control", spec.control_dim(), u.len())?;
    check_len("disturbance", spec.disturbance_dim(), w.len())?;
    let grad = critic.gradient(x)?;
    Ok(spec.running_cost(x, u, w) + grad.dot(&spec.dynamics.vector_field(x, u, w)))
}

/// `𝒢(V)(x)`.
pub fn g_residual(spec: &GameSpec, critic: &CriticFunction, x: &DVector<f64>) -> Result<f64> {
    check_critic(spec, critic, x)?;
    let dynamics = &spec.dynamics;
    let grad = critic.gradient(x)?;
    let gt = dynamics.control_gain(x).tr_mul(&grad);
    let kt = dynamics.disturbance_gain(x).tr_mul(&grad);
    let g_term: f64 = gt.iter().zip(spec.r_diag.iter()).map(|(v, r)| v * v / r).sum();
    let g2 = spec.gamma * spec.gamma;
    Ok(dynamics.state_cost(x) + grad.dot(&dynamics.drift(x)) - 0.25 * g_term + kt.norm_squared() / (4.0 * g2))
}

/// `𝒢′(V)Z` at `x`, from the term-by-term expansion of the differential.
pub fn frechet_apply(spec: &GameSpec, v: &CriticFunction, z: &CriticFunction, x: &DVector<f64>) -> Result<f64> {
    check_critic(spec, v, x)?;
    check_critic(spec, z, x)?;
    let dynamics = &spec.dynamics;
    let gv = v.gradient(x)?;
    let gz = z.gradient(x)?;
    let g = dynamics.control_gain(x);
    let k = dynamics.disturbance_gain(x);
    let (gtv, gtz) = (g.tr_mul(&gv), g.tr_mul(&gz));
    let (ktv, ktz) = (k.tr_mul(&gv), k.tr_mul(&gz));
    let rinv = |a: &DVector<f64>, b: &DVector<f64>| -> f64 {
        a.iter().zip(b.iter()).zip(spec.r_diag.iter()).map(|((a, b), r)| a * b / r).sum()
    };
    let g2 = spec.gamma * spec.gamma;
    Ok(gz.dot(&dynamics.drift(x)) - 0.25 * rinv(&gtz, &gtv) - 0.25 * rinv(&gtv, &gtz)
        + ktv.dot(&ktz) / (4.0 * g2)
        + ktz.dot(&ktv) / (4.0 * g2))
}

/// `𝒢′(V)Z` at `x` as `(∇Z)ᵀ(f + g u_V + k w_V)` with the saddle policies
/// of `V`.
pub fn frechet_apply_closed_loop(
    spec: &GameSpec,
    v: &CriticFunction,
    z: &CriticFunction,
    x: &DVector<f64>,
) -> Result<f64> {
    check_critic(spec, v, x)?;
    check_critic(spec, z, x)?;
    let pol = extract_policies(spec, v)?;
    let closed = spec.dynamics.vector_field(x, &pol.control(x), &pol.disturbance(x));
    Ok(z.gradient(x)?.dot(&closed))
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha must lie in (0, 1], got {alpha}")))
    }
}

/// Residual of the generalized Bellman equation at `x`:
///
/// ```text
/// ∇V₊ᵀF − (1−α)∇Vᵢᵀ F + α(Q + uᵢᵀRuᵢ − γ²wᵢᵀwᵢ),   F = f + g uᵢ + k wᵢ
/// ```
///
/// with `(uᵢ, wᵢ)` the saddle policies of `V_cur`.
pub fn generalized_bellman_residual(
    spec: &GameSpec,
    v_next: &CriticFunction,
    v_cur: &CriticFunction,
    alpha: f64,
    x: &DVector<f64>,
) -> Result<f64> {
    check_alpha(alpha)?;
    check_critic(spec, v_next, x)?;
    check_critic(spec, v_cur, x)?;
    let pol = extract_policies(spec, v_cur)?;
    let (u, w) = (pol.control(x), pol.disturbance(x));
    let field = spec.dynamics.vector_field(x, &u, &w);
    Ok(v_next.gradient(x)?.dot(&field) - (1.0 - alpha) * v_cur.gradient(x)?.dot(&field)
        + alpha * spec.running_cost(x, &u, &w))
}

/// Residual of the plain Bellman equation used by simultaneous policy
/// update: `Q + uᵢᵀRuᵢ − γ²wᵢᵀwᵢ + ∇V₊ᵀ(f + g uᵢ + k wᵢ)`.
pub fn bellman_residual(
    spec: &GameSpec,
    v_next: &CriticFunction,
    v_cur: &CriticFunction,
    x: &DVector<f64>,
) -> Result<f64> {
    check_critic(spec, v_next, x)?;
    check_critic(spec, v_cur, x)?;
    let pol = extract_policies(spec, v_cur)?;
    let (u, w) = (pol.control(x), pol.disturbance(x));
    hamiltonian(spec, v_next, x, &u, &w)
}

/// Tensor grid with `per_axis` points on each `[lower_i, upper_i]`.
pub fn grid_points(lower: &[f64], upper: &[f64], per_axis: usize) -> Vec<DVector<f64>> {
    let n = lower.len();
    assert_eq!(n, upper.len(), "grid bounds differ in length");
    if per_axis == 0 || n == 0 {
        return Vec::new();
    }
    let coord = |i: usize, k: usize| {
        if per_axis == 1 {
            0.5 * (lower[i] + upper[i])
        } else {
            lower[i] + (upper[i] - lower[i]) * k as f64 / (per_axis - 1) as f64
        }
    };
    let total = per_axis.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            DVector::from_fn(n, |i, _| {
                let k = idx % per_axis;
                idx /= per_axis;
                coord(i, k)
            })
        })
        .collect()
}

/// `max |𝒢(V)(x)|` over `points`.
pub fn max_g_residual(spec: &GameSpec, critic: &CriticFunction, points: &[DVector<f64>]) -> Result<f64> {
    points
        .iter()
        .try_fold(0.0f64, |acc, x| Ok(acc.max(libm::fabs(g_residual(spec, critic, x)?))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{reference_bases, ReferenceProblem};
    use crate::dynamics::{make_example_a, make_linear_game};
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn example_a_spec() -> GameSpec {
        GameSpec::new(Arc::new(make_example_a()), 2.0, DVector::from_element(1, 1.0)).unwrap()
    }

    fn critic_a(w: &[f64]) -> CriticFunction {
        CriticFunction::new(reference_bases(ReferenceProblem::ExampleA).critic, DVector::from_column_slice(w)).unwrap()
    }

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn zero_weights_give_zero_policies() {
        let spec = example_a_spec();
        let c = critic_a(&[0.0; 5]);
        let pol = extract_policies(&spec, &c).unwrap();
        let x = v(&[0.3, -0.7]);
        assert_eq!(pol.control(&x), DVector::zeros(1));
        assert_eq!(pol.disturbance(&x), DVector::zeros(1));
    }

    #[test]
    fn x1_squared_critic_is_annihilated_by_input_channels() {
        let spec = example_a_spec();
        let c = critic_a(&[1.0, 0.0, 0.0, 0.0, 0.0]);
        let pol = extract_policies(&spec, &c).unwrap();
        for x in grid_points(&[-1.0, -1.0], &[1.0, 1.0], 7) {
            assert_eq!(pol.control(&x)[0], 0.0);
            assert_eq!(pol.disturbance(&x)[0], 0.0);
        }
    }

    #[test]
    fn zero_critic_residuals_reduce_to_state_cost() {
        let spec = example_a_spec();
        let c = critic_a(&[0.0; 5]);
        let x = v(&[0.4, 0.5]);
        let zero = DVector::zeros(1);
        assert_eq!(hamiltonian(&spec, &c, &x, &zero, &zero).unwrap(), spec.dynamics.state_cost(&x));
        assert_eq!(g_residual(&spec, &c, &x).unwrap(), spec.dynamics.state_cost(&x));
    }

    #[test]
    fn frechet_special_cases() {
        let spec = example_a_spec();
        let x = v(&[0.4, -0.2]);
        let vv = critic_a(&[0.5, 1.0, 0.2, -0.1, 0.3]);
        let zero = critic_a(&[0.0; 5]);
        assert_eq!(frechet_apply(&spec, &vv, &zero, &x).unwrap(), 0.0);
        let z = critic_a(&[0.1, 0.2, -0.3, 0.4, 0.5]);
        let expect = z.gradient(&x).unwrap().dot(&spec.dynamics.drift(&x));
        assert!((frechet_apply(&spec, &zero, &z, &x).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn zero_policy_generalized_bellman() {
        let spec = example_a_spec();
        let x = v(&[0.4, 0.5]);
        let next = critic_a(&[0.3, 0.1, -0.2, 0.05, 0.4]);
        let cur = critic_a(&[0.0; 5]);
        let got = generalized_bellman_residual(&spec, &next, &cur, 0.3, &x).unwrap();
        let expect = next.gradient(&x).unwrap().dot(&spec.dynamics.drift(&x)) + 0.3 * spec.dynamics.state_cost(&x);
        assert!((got - expect).abs() < 1e-15);
        assert!(generalized_bellman_residual(&spec, &next, &cur, 0.0, &x).is_err());
        assert!(generalized_bellman_residual(&spec, &next, &cur, 1.5, &x).is_err());
    }

    #[test]
    fn spec_validation() {
        let dynamics: Arc<dyn AffineDynamics> = Arc::new(make_example_a());
        assert!(GameSpec::new(dynamics.clone(), 0.0, v(&[1.0])).is_err());
        assert!(GameSpec::new(dynamics.clone(), 1.0, v(&[-1.0])).is_err());
        assert!(GameSpec::new(dynamics, 1.0, v(&[1.0, 1.0])).is_err());
        let spec = example_a_spec();
        let c = CriticFunction::zero(crate::basis::BasisSet::linear(3));
        assert!(g_residual(&spec, &c, &v(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn grid_covers_box() {
        let pts = grid_points(&[-1.0, -1.0], &[1.0, 1.0], 21);
        assert_eq!(pts.len(), 441);
        assert_eq!(pts[0], v(&[-1.0, -1.0]));
        assert_eq!(pts[440], v(&[1.0, 1.0]));
        assert!(pts.contains(&v(&[0.0, 0.0])));
    }

    fn linear_spec() -> GameSpec {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let d = DMatrix::from_row_slice(2, 1, &[1.0, 0.5]);
        let game = make_linear_game(a, b, d, DMatrix::identity(2, 2)).unwrap();
        GameSpec::new(Arc::new(game), 3.0, v(&[0.5])).unwrap()
    }

    fn arb_w5() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-2.0f64..2.0, 5)
    }

    proptest! {
        #[test]
        fn saddle_identity(w in arb_w5(), x1 in -1.0f64..1.0, x2 in -1.0f64..1.0) {
            let spec = example_a_spec();
            let c = critic_a(&w);
            let x = v(&[x1, x2]);
            let pol = extract_policies(&spec, &c).unwrap();
            let h = hamiltonian(&spec, &c, &x, &pol.control(&x), &pol.disturbance(&x)).unwrap();
            let g = g_residual(&spec, &c, &x).unwrap();
            prop_assert!((h - g).abs() <= 1e-12 * (1.0 + g.abs()));
        }

        #[test]
        fn frechet_forms_agree(wv in arb_w5(), wz in arb_w5(), x1 in -1.0f64..1.0, x2 in -1.0f64..1.0) {
            let spec = example_a_spec();
            let (cv, cz) = (critic_a(&wv), critic_a(&wz));
            let x = v(&[x1, x2]);
            let a = frechet_apply(&spec, &cv, &cz, &x).unwrap();
            let b = frechet_apply_closed_loop(&spec, &cv, &cz, &x).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn frechet_is_linear_in_direction(wv in arb_w5(), z1 in arb_w5(), z2 in arb_w5(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let spec = example_a_spec();
            let cv = critic_a(&wv);
            let (c1, c2) = (critic_a(&z1), critic_a(&z2));
            let combo = CriticFunction::new(c1.basis.clone(), &c1.weights * a + &c2.weights * b).unwrap();
            let x = v(&[0.3, -0.6]);
            let lhs = frechet_apply(&spec, &cv, &combo, &x).unwrap();
            let rhs = a * frechet_apply(&spec, &cv, &c1, &x).unwrap() + b * frechet_apply(&spec, &cv, &c2, &x).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn frechet_matches_directional_difference(wv in arb_w5(), wz in arb_w5(), x1 in -1.0f64..1.0, x2 in -1.0f64..1.0) {
            let spec = example_a_spec();
            let (cv, cz) = (critic_a(&wv), critic_a(&wz));
            let x = v(&[x1, x2]);
            let h = 1e-5;
            let plus = CriticFunction::new(cv.basis.clone(), &cv.weights + &cz.weights * h).unwrap();
            let minus = CriticFunction::new(cv.basis.clone(), &cv.weights - &cz.weights * h).unwrap();
            let fd = (g_residual(&spec, &plus, &x).unwrap() - g_residual(&spec, &minus, &x).unwrap()) / (2.0 * h);
            let exact = frechet_apply(&spec, &cv, &cz, &x).unwrap();
            prop_assert!((fd - exact).abs() <= 1e-6 * (1.0 + exact.abs()));
        }

        #[test]
        fn unit_alpha_is_plain_bellman(w1 in arb_w5(), w2 in arb_w5(), x1 in -1.0f64..1.0, x2 in -1.0f64..1.0) {
            let spec = example_a_spec();
            let (next, cur) = (critic_a(&w1), critic_a(&w2));
            let x = v(&[x1, x2]);
            let gen = generalized_bellman_residual(&spec, &next, &cur, 1.0, &x).unwrap();
            let plain = bellman_residual(&spec, &next, &cur, &x).unwrap();
            prop_assert!((gen - plain).abs() <= 1e-12 * (1.0 + plain.abs()));
        }

        #[test]
        fn saddle_identity_linear(p in proptest::collection::vec(-2.0f64..2.0, 3), x1 in -1.0f64..1.0, x2 in -1.0f64..1.0) {
            let spec = linear_spec();
            let c = CriticFunction::new(crate::basis::BasisSet::quadratic(2), DVector::from_vec(p)).unwrap();
            let x = v(&[x1, x2]);
            let pol = extract_policies(&spec, &c).unwrap();
            let h = hamiltonian(&spec, &c, &x, &pol.control(&x), &pol.disturbance(&x)).unwrap();
            let g = g_residual(&spec, &c, &x).unwrap();
            prop_assert!((h - g).abs() <= 1e-12 * (1.0 + g.abs()));
        }
    }
}
