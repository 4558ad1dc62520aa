//! Variance-scheduled PD feedback with GP feedforward, the baseline PD law,
//! and the ultimate-bound diagnostics of the closed loop.

use nalgebra::{Matrix2, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::AttitudeState;
use crate::error::{Error, Result};
use crate::linalg::{sym3_eig_range, sym3_sqrt};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gain {
    Proportional,
    Derivative,
}

/// `ζ(k̆, Σ) = J^{1/2} (k̆ I + c·min(Σ^{1/2}, clamp)) J^{1/2}`.
///
/// For a diagonal nominal inertia this is `J (k̆ + c Σ^{1/2})`; the symmetric
/// square-root form keeps `ζ` symmetric positive definite for any `J`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainSchedule {
    pub k_p: f64,
    pub k_d: f64,
    pub c_p: f64,
    pub c_d: f64,
    pub j_nominal: Matrix3<f64>,
    /// Cap on the predictive standard deviation entering the gains.
    pub clamp: f64,
}

impl GainSchedule {
    pub fn new(k_p: f64, k_d: f64, c_p: f64, c_d: f64, j_nominal: Matrix3<f64>, clamp: f64) -> Result<Self> {
        let s = Self { k_p, k_d, c_p, c_d, j_nominal, clamp };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_p > 0.0 && self.k_d > 0.0) {
            return Err(Error::invalid("base gains must be positive"));
        }
        if !(self.c_p >= 0.0 && self.c_d >= 0.0 && self.clamp >= 0.0) || !self.clamp.is_finite() {
            return Err(Error::invalid("variance coefficients and clamp must be nonnegative and finite"));
        }
        let (lo, _) = sym3_eig_range(&self.j_nominal);
        if !(lo > 0.0) {
            return Err(Error::invalid("nominal inertia must be positive definite"));
        }
        Ok(())
    }

    fn coeffs(&self, which: Gain) -> (f64, f64) {
        match which {
            Gain::Proportional => (self.k_p, self.c_p),
            Gain::Derivative => (self.k_d, self.c_d),
        }
    }

    /// Gain matrix for the diagonal predictive variance `sigma`.
    pub fn zeta(&self, which: Gain, sigma: &Vector3<f64>) -> Result<Matrix3<f64>> {
        if sigma.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid(format!("variance must be nonnegative, got {sigma:?}")));
        }
        let (k, c) = self.coeffs(which);
        let inner = Matrix3::from_diagonal(&sigma.map(|v| k + c * v.sqrt().min(self.clamp)));
        if is_diagonal(&self.j_nominal) {
            return Ok(self.j_nominal * inner);
        }
        let r = sym3_sqrt(&self.j_nominal);
        let z = r * inner * r;
        Ok(0.5 * (z + z.transpose()))
    }

    /// `(ζ_min, ζ_max)`: eigenvalue bounds of `ζ` over all admissible `Σ`.
    pub fn bounds(&self, which: Gain) -> (f64, f64) {
        let (lo, hi) = sym3_eig_range(&self.j_nominal);
        let (k, c) = self.coeffs(which);
        (lo * k, hi * (k + c * self.clamp))
    }
}

fn is_diagonal(m: &Matrix3<f64>) -> bool {
    (0..3).all(|i| (0..3).all(|j| i == j || m[(i, j)] == 0.0))
}

/// `u = −ζ_p q_e − ζ_d ω − J μ + ω × J ω` for an error state.
pub fn control(
    x: &AttitudeState,
    mu: &Vector3<f64>,
    sigma: &Vector3<f64>,
    schedule: &GainSchedule,
) -> Result<Vector3<f64>> {
    let zp = schedule.zeta(Gain::Proportional, sigma)?;
    let zd = schedule.zeta(Gain::Derivative, sigma)?;
    let j = &schedule.j_nominal;
    let w = &x.omega;
    let u = -zp * x.attitude.vector() - zd * w - j * mu + w.cross(&(j * w));
    if !u.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("control torque is not finite".into()));
    }
    Ok(u)
}

/// `u = −K_p q_e − K_d ω`.
pub fn baseline_pd(x: &AttitudeState, k_p: &Matrix3<f64>, k_d: &Matrix3<f64>) -> Vector3<f64> {
    -k_p * x.attitude.vector() - k_d * x.omega
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundConfig {
    /// Cross-coupling weight ν of the Lyapunov candidate.
    pub nu: f64,
    pub delta: f64,
    /// Assumed RKHS norm of each uncertainty component.
    pub rkhs_norm: [f64; 3],
    /// Upper bound on `λ_max(J)`; `None` uses the nominal inertia.
    pub lambda_j: Option<f64>,
    /// Lower bound on `λ_min(J)`; `None` uses the nominal inertia.
    pub lambda_c: Option<f64>,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self { nu: 0.01, delta: 0.05, rkhs_norm: [1.0; 3], lambda_j: None, lambda_c: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UltimateBounds {
    /// Tighter of the two attitude bounds (and never above 1).
    pub q_bound: f64,
    /// `s1 / sqrt(ζ̄_p + ν ζ̄_d)`.
    pub q_bound_direct: f64,
    /// `sqrt(1 − (1 − s1² / (2(ζ̄_p + ν ζ̄_d)))²)`, or 1 when the inner term
    /// leaves `[0, 1]`.
    pub q_bound_scalar_part: f64,
    pub omega_bound: f64,
    pub s1: f64,
    pub s2: f64,
}

/// Ultimate bounds on `‖q_e‖` and `‖ω‖` for a model-error level `epsilon`
/// (`ε ≥ ‖β‖ sup ‖Σ^{1/2}‖`).
pub fn ultimate_bounds(cfg: &BoundConfig, schedule: &GainSchedule, epsilon: f64) -> Result<UltimateBounds> {
    if !(epsilon >= 0.0) {
        return Err(Error::invalid("epsilon must be nonnegative"));
    }
    if !(cfg.nu > 0.0) {
        return Err(Error::invalid("nu must be positive"));
    }
    let (jlo, jhi) = sym3_eig_range(&schedule.j_nominal);
    let lambda_j = cfg.lambda_j.unwrap_or(jhi);
    let lambda_c = cfg.lambda_c.unwrap_or(jlo);
    if !(lambda_c > 0.0 && lambda_j >= lambda_c) {
        return Err(Error::invalid("inertia bounds must satisfy 0 < λ_c ≤ λ_J"));
    }
    let nu = cfg.nu;
    let (zp_min, zp_max) = schedule.bounds(Gain::Proportional);
    let (zd_min, zd_max) = schedule.bounds(Gain::Derivative);
    let m_l = Matrix2::new(nu * zp_min, 0.0, 0.0, zd_min - 0.5 * nu * lambda_j);
    let l_min = m_l[(0, 0)].min(m_l[(1, 1)]);
    if !(l_min > 0.0) {
        return Err(Error::invalid(format!(
            "M_l is not positive definite: need ζ_d,min − ν λ_J / 2 > 0 (ζ_d,min = {zd_min}, ν = {nu}, λ_J = {lambda_j})"
        )));
    }
    let z = zp_max + nu * zd_max;
    let m_s = Matrix2::new(2.0 * z, 0.5 * nu * lambda_j, 0.5 * nu * lambda_j, 0.5 * lambda_j);
    let s_max = m_s.symmetric_eigenvalues().max();
    let theta = (1.0 / (2.0 * lambda_c)).sqrt() + nu * (1.0 / (2.0 * z)).sqrt();
    let s1 = 2f64.sqrt() * lambda_j * epsilon * theta * s_max / l_min;
    let s2 = l_min / (2.0 * s_max);
    let q_direct = s1 / z.sqrt();
    let a = s1 * s1 / (2.0 * z);
    let q_scalar = if a <= 1.0 { (1.0 - (1.0 - a).powi(2)).sqrt() } else { 1.0 };
    Ok(UltimateBounds {
        q_bound: q_direct.min(q_scalar).min(1.0),
        q_bound_direct: q_direct,
        q_bound_scalar_part: q_scalar,
        omega_bound: (2.0 / lambda_c).sqrt() * s1,
        s1,
        s2,
    })
}

/// `‖β‖ · max ‖Σ^{1/2}‖` over a set of predictive variances.
pub fn epsilon_from(beta: &[f64], variances: &[Vector3<f64>]) -> f64 {
    let bn = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
    let smax = variances.iter().map(|v| v.amax().max(0.0).sqrt()).fold(0.0, f64::max);
    bn * smax
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::UnitQuaternion;

    fn j0() -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(600.0, 450.0, 600.0))
    }

    fn schedule() -> GainSchedule {
        GainSchedule::new(0.02, 0.05, 0.1, 0.2, j0(), 1.0).unwrap()
    }

    fn err_state(q: [f64; 3], w: [f64; 3]) -> AttitudeState {
        let v = Vector3::from(q);
        let q0 = (1.0 - v.norm_squared()).sqrt();
        AttitudeState::new(UnitQuaternion::new(q0, v).unwrap(), Vector3::from(w))
    }

    #[test]
    fn zero_variance_gain() {
        let z = schedule().zeta(Gain::Proportional, &Vector3::zeros()).unwrap();
        assert_eq!(z, Matrix3::from_diagonal(&Vector3::new(12.0, 9.0, 12.0)));
    }

    #[test]
    fn gain_grows_then_saturates() {
        let s = schedule();
        let z0 = s.zeta(Gain::Derivative, &Vector3::zeros()).unwrap();
        let z1 = s.zeta(Gain::Derivative, &Vector3::repeat(0.25)).unwrap();
        let expected = j0() * (0.05 + 0.2 * 0.5);
        assert!((z1 - expected).amax() < 1e-12);
        assert!((z1 - z0).symmetric_eigenvalues().min() > 0.0);
        let big = s.zeta(Gain::Derivative, &Vector3::repeat(100.0)).unwrap();
        assert!((big - j0() * (0.05 + 0.2 * 1.0)).amax() < 1e-12);
        assert!(s.zeta(Gain::Proportional, &Vector3::new(-1e-3, 0.0, 0.0)).is_err());
    }

    #[test]
    fn non_diagonal_inertia_gives_symmetric_gain() {
        let j = Matrix3::new(600.0, 20.0, -5.0, 20.0, 450.0, 10.0, -5.0, 10.0, 620.0);
        let s = GainSchedule::new(0.02, 0.05, 0.1, 0.2, j, 1.0).unwrap();
        let z = s.zeta(Gain::Proportional, &Vector3::new(0.1, 0.4, 0.9)).unwrap();
        assert!((z - z.transpose()).amax() < 1e-12);
        let (lo, hi) = s.bounds(Gain::Proportional);
        let e = z.symmetric_eigenvalues();
        assert!(e.min() >= lo - 1e-9 && e.max() <= hi + 1e-9);
    }

    #[test]
    fn control_cases() {
        let s = schedule();
        let eq = err_state([0.0; 3], [0.0; 3]);
        assert_eq!(control(&eq, &Vector3::zeros(), &Vector3::zeros(), &s).unwrap(), Vector3::zeros());
        let m = Vector3::new(1e-3, -2e-3, 5e-4);
        assert_eq!(control(&eq, &m, &Vector3::zeros(), &s).unwrap(), -j0() * m);
        let u = control(&err_state([0.1, 0.0, 0.0], [0.0; 3]), &Vector3::zeros(), &Vector3::zeros(), &s).unwrap();
        assert!((u - Vector3::new(-1.2, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn control_without_learning_is_pd_plus_gyroscopic() {
        let s = schedule();
        let x = err_state([0.05, -0.02, 0.1], [0.01, 0.02, -0.01]);
        let u = control(&x, &Vector3::zeros(), &Vector3::zeros(), &s).unwrap();
        let pd = baseline_pd(&x, &(j0() * 0.02), &(j0() * 0.05));
        let w = x.omega;
        assert!((u - (pd + w.cross(&(j0() * w)))).norm() < 1e-14);
    }

    #[test]
    fn baseline_cases() {
        let kd = j0() * 0.3;
        let x = err_state([0.0; 3], [0.01, 0.02, -0.01]);
        let u = baseline_pd(&x, &(j0() * 0.1), &kd);
        assert!((u - Vector3::new(-1.8, -2.7, 1.8)).norm() < 1e-12);
        assert_eq!((j0() * 0.1).diagonal(), Vector3::new(60.0, 45.0, 60.0));
    }

    #[test]
    fn bounds_vanish_with_perfect_model_and_grow_with_error() {
        let s = schedule();
        let cfg = BoundConfig::default();
        let b0 = ultimate_bounds(&cfg, &s, 0.0).unwrap();
        assert_eq!((b0.s1, b0.q_bound, b0.omega_bound), (0.0, 0.0, 0.0));
        let mut prev = b0;
        for eps in [1e-4, 1e-3, 0.01, 0.1, 1.0] {
            let b = ultimate_bounds(&cfg, &s, eps).unwrap();
            assert!(b.s1 >= prev.s1 && b.q_bound >= prev.q_bound && b.omega_bound >= prev.omega_bound);
            assert!(b.q_bound_scalar_part <= b.q_bound_direct + 1e-15 || b.q_bound_direct > 1.0);
            prev = b;
        }
    }

    #[test]
    fn m_l_must_be_positive_definite() {
        let cfg = BoundConfig { nu: 1.0, ..Default::default() };
        let err = ultimate_bounds(&cfg, &schedule(), 0.1).unwrap_err();
        assert!(err.to_string().contains("M_l"));
    }
}
