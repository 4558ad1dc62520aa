//! Rigid-body plant with hidden inertia error, external disturbance torque and
//! the captured target's own attitude controller.

use nalgebra::{Matrix3, SVector, Vector3};
use serde::{Deserialize, Serialize};

use super::quaternion::{quat_error, UnitQuaternion};
use crate::error::{Error, Result};
use crate::linalg::sym3_eig_range;

/// Attitude relative to some reference frame plus body angular velocity.
///
/// The plant integrates the attitude with respect to the inertial frame; the
/// controller sees the same type expressed relative to the desired frame
/// (see [`AttitudeState::relative_to`]).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttitudeState {
    pub attitude: UnitQuaternion,
    /// rad/s, body frame
    pub omega: Vector3<f64>,
}

impl AttitudeState {
    pub fn new(attitude: UnitQuaternion, omega: Vector3<f64>) -> Self {
        Self { attitude, omega }
    }

    /// Error state with respect to `desired` (sign-normalized, `q_e0 ≥ 0`).
    pub fn relative_to(&self, desired: &UnitQuaternion) -> Result<AttitudeState> {
        Ok(AttitudeState {
            attitude: quat_error(desired, &self.attitude)?,
            omega: self.omega,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.attitude.scalar().is_finite()
            && self.attitude.vector().iter().all(|v| v.is_finite())
            && self.omega.iter().all(|v| v.is_finite())
    }
}

/// GP regression input `x̃ = vec(q_e, ω, u)`.
pub type StateInput = SVector<f64, 9>;

pub fn state_input(error_state: &AttitudeState, u: &Vector3<f64>) -> StateInput {
    let q = error_state.attitude.vector();
    let w = &error_state.omega;
    StateInput::from_column_slice(&[q[0], q[1], q[2], w[0], w[1], w[2], u[0], u[1], u[2]])
}

/// One training observation: input `x̃`, uncertainty observation `y` (rad/s²).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledPair {
    pub x_tilde: StateInput,
    pub y: Vector3<f64>,
    pub t: f64,
}

/// Which algebraic form of the lumped uncertainty `d(ω, u)` the plant uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UncertaintyForm {
    /// The closed-form expression with `J̃*` in every inertia-error slot.
    #[default]
    AsPrinted,
    /// Same, without the `−J0 J̃* ω×J̃* ω` term.
    AsPrintedNoQuadratic,
    /// Exact rigid-body residual: `J_c⁻¹(−ω×J_c ω + u + τ) − f_ω(ω, u)`.
    RigidBody,
}

/// Sinusoidal external torque `τ_d,i(t) = a_i sin(w_i t + φ_i)`, active for
/// `t ≥ onset` when enabled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Disturbance {
    pub enabled: bool,
    /// N·m
    pub amplitude: [f64; 3],
    /// rad/s
    pub frequency: [f64; 3],
    pub phase: [f64; 3],
    /// s
    pub onset: f64,
}

impl Default for Disturbance {
    fn default() -> Self {
        Self {
            enabled: false,
            amplitude: [0.5, -1.0, 1.5],
            frequency: [0.1, 0.15, -0.15],
            phase: [0.0, 0.0, 1.5],
            onset: 150.0,
        }
    }
}

impl Disturbance {
    pub fn torque(&self, t: f64) -> Vector3<f64> {
        if !self.enabled || t < self.onset {
            return Vector3::zeros();
        }
        Vector3::from_fn(|i, _| self.amplitude[i] * (self.frequency[i] * t + self.phase[i]).sin())
    }
}

/// The captured target's attitude-hold controller `u_t = −K_pt q_et − K_dt ω_t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetManeuver {
    pub k_p: Matrix3<f64>,
    pub k_d: Matrix3<f64>,
    /// Attitude the target tries to hold (its own initial attitude).
    pub reference: UnitQuaternion,
    /// Fixed rotation of the target body frame relative to the combined frame.
    pub mount: UnitQuaternion,
}

impl TargetManeuver {
    /// Target torque in the target frame given the target's own attitude and rate.
    pub fn torque(&self, target_attitude: &UnitQuaternion, omega_t: &Vector3<f64>) -> Result<Vector3<f64>> {
        let q_et = quat_error(&self.reference, target_attitude)?;
        Ok(target_torque(q_et.vector(), omega_t, &self.k_p, &self.k_d))
    }

    /// Torque on the combined body (body frame) for a combined-body state
    /// expressed in the inertial frame.
    pub fn body_torque(&self, state: &AttitudeState) -> Result<Vector3<f64>> {
        let c_mount = self.mount.rotation_matrix();
        let target_attitude = state.attitude.product(&self.mount)?;
        let omega_t = c_mount * state.omega;
        Ok(c_mount.transpose() * self.torque(&target_attitude, &omega_t)?)
    }
}

/// PD form of the target's active control law.
pub fn target_torque(
    q_et: &Vector3<f64>,
    omega_t: &Vector3<f64>,
    k_p: &Matrix3<f64>,
    k_d: &Matrix3<f64>,
) -> Vector3<f64> {
    -k_p * q_et - k_d * omega_t
}

/// Everything about the plant the controller does not know.
#[derive(Clone, Debug)]
pub struct PlantTruth {
    j_nominal: Matrix3<f64>,
    j_tilde: Matrix3<f64>,
    pub disturbance: Disturbance,
    pub target: Option<TargetManeuver>,
    pub form: UncertaintyForm,
    lambda_j: f64,
    lambda_c: f64,
    // cached
    j_nominal_inv: Matrix3<f64>,
    j_star: Matrix3<f64>,
    j_true: Matrix3<f64>,
    j_true_inv: Matrix3<f64>,
}

impl PlantTruth {
    /// Validates the inertia data. `bounds = (λ_J, λ_c)` defaults to the
    /// extreme eigenvalues of `j_nominal`.
    pub fn new(
        j_nominal: Matrix3<f64>,
        j_tilde: Matrix3<f64>,
        bounds: Option<(f64, f64)>,
    ) -> Result<Self> {
        if !j_nominal.iter().chain(j_tilde.iter()).all(|v| v.is_finite()) {
            return Err(Error::Config("inertia matrices must be finite".into()));
        }
        if (j_nominal - j_nominal.transpose()).norm() > 1e-9 * j_nominal.norm() {
            return Err(Error::Config("nominal inertia must be symmetric".into()));
        }
        if (j_tilde - j_tilde.transpose()).norm() > 1e-9 * (1.0 + j_tilde.norm()) {
            return Err(Error::Config("inertia deviation must be symmetric".into()));
        }
        let (eig_min, eig_max) = sym3_eig_range(&j_nominal);
        let (lambda_j, lambda_c) = bounds.unwrap_or((eig_max, eig_min));
        if !(lambda_c > 0.0) || eig_min < lambda_c * (1.0 - 1e-12) || eig_max > lambda_j * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "nominal inertia eigenvalues [{eig_min}, {eig_max}] violate bounds λ_c = {lambda_c}, λ_J = {lambda_j}"
            )));
        }
        let j_nominal_inv = j_nominal
            .try_inverse()
            .ok_or_else(|| Error::Config("nominal inertia is singular".into()))?;
        let coupling = Matrix3::identity() + j_nominal_inv * j_tilde;
        let coupling_inv = coupling
            .try_inverse()
            .filter(|_| coupling.determinant().abs() > 1e-12)
            .ok_or_else(|| Error::Config("I + J_c0⁻¹ J̃ is not invertible".into()))?;
        let j_star = -coupling_inv * j_nominal_inv * j_tilde * j_nominal_inv;
        let j_true = j_nominal + j_tilde;
        let j_true_inv = j_nominal_inv + j_star;
        Ok(Self {
            j_nominal,
            j_tilde,
            disturbance: Disturbance::default(),
            target: None,
            form: UncertaintyForm::default(),
            lambda_j,
            lambda_c,
            j_nominal_inv,
            j_star,
            j_true,
            j_true_inv,
        })
    }

    pub fn j_nominal(&self) -> &Matrix3<f64> {
        &self.j_nominal
    }
    pub fn j_nominal_inv(&self) -> &Matrix3<f64> {
        &self.j_nominal_inv
    }
    pub fn j_tilde(&self) -> &Matrix3<f64> {
        &self.j_tilde
    }
    /// `J̃* = J_c⁻¹ − J_c0⁻¹`.
    pub fn j_star(&self) -> &Matrix3<f64> {
        &self.j_star
    }
    pub fn j_true(&self) -> &Matrix3<f64> {
        &self.j_true
    }
    pub fn lambda_j(&self) -> f64 {
        self.lambda_j
    }
    pub fn lambda_c(&self) -> f64 {
        self.lambda_c
    }

    /// External torque acting on the combined body at `t`: the disturbance
    /// plus, when enabled, the target's counter-torque.
    pub fn external_torque(&self, state: &AttitudeState, t: f64) -> Result<Vector3<f64>> {
        let mut tau = self.disturbance.torque(t);
        if let Some(target) = &self.target {
            tau += target.body_torque(state)?;
        }
        Ok(tau)
    }

    /// Lumped uncertainty torque `d(ω, u)` for a given external torque.
    pub fn lumped_torque(&self, omega: &Vector3<f64>, u: &Vector3<f64>, tau: &Vector3<f64>) -> Vector3<f64> {
        let j0 = &self.j_nominal;
        let js = &self.j_star;
        let j0js = j0 * js;
        let w = omega;
        let gyro_nominal = w.cross(&(j0 * w));
        match self.form {
            UncertaintyForm::AsPrinted | UncertaintyForm::AsPrintedNoQuadratic => {
                let mut d = -j0js * gyro_nominal - w.cross(&(js * w)) + j0js * u + (Matrix3::identity() + j0js) * tau;
                if self.form == UncertaintyForm::AsPrinted {
                    d -= j0js * w.cross(&(js * w));
                }
                d
            }
            UncertaintyForm::RigidBody => {
                // J_c0 (J_c⁻¹(−ω×J_c ω + u + τ) + J_c0⁻¹ ω×J_c0 ω − J_c0⁻¹ u)
                let wdot = self.j_true_inv * (-w.cross(&(self.j_true * w)) + u + tau);
                j0 * wdot + gyro_nominal - u
            }
        }
    }
}

/// `Δ̆ = J_c0⁻¹ d(ω, u, t)` for a state expressed in the inertial frame.
pub fn true_uncertainty(
    state: &AttitudeState,
    u: &Vector3<f64>,
    t: f64,
    plant: &PlantTruth,
) -> Result<Vector3<f64>> {
    let tau = plant.external_torque(state, t)?;
    Ok(plant.j_nominal_inv * plant.lumped_torque(&state.omega, u, &tau))
}

/// Known part of the dynamics, `[½(q0 I + q×)ω ; −J_c0⁻¹ ω×J_c0 ω + J_c0⁻¹ u]`.
pub fn nominal_dynamics(
    x: &AttitudeState,
    u: &Vector3<f64>,
    j_nominal: &Matrix3<f64>,
) -> Result<SVector<f64, 6>> {
    let j_inv = j_nominal
        .try_inverse()
        .ok_or_else(|| Error::invalid("nominal inertia is singular"))?;
    let qdot = attitude_rate(&x.attitude, &x.omega);
    let wdot = nominal_angular_accel(&x.omega, u, j_nominal, &j_inv);
    Ok(SVector::<f64, 6>::from_iterator(qdot.1.iter().chain(wdot.iter()).cloned()))
}

pub(crate) fn nominal_angular_accel(
    omega: &Vector3<f64>,
    u: &Vector3<f64>,
    j_nominal: &Matrix3<f64>,
    j_nominal_inv: &Matrix3<f64>,
) -> Vector3<f64> {
    j_nominal_inv * (u - omega.cross(&(j_nominal * omega)))
}

/// `(q̇0, q̇)` for body rate `omega`.
fn attitude_rate(q: &UnitQuaternion, omega: &Vector3<f64>) -> (f64, Vector3<f64>) {
    let v = q.vector();
    let q0 = q.scalar();
    (-0.5 * v.dot(omega), 0.5 * (q0 * omega + v.cross(omega)))
}

type Packed = SVector<f64, 7>;

fn pack(q0: f64, q: &Vector3<f64>, w: &Vector3<f64>) -> Packed {
    Packed::from_column_slice(&[q0, q[0], q[1], q[2], w[0], w[1], w[2]])
}

/// Fixed-step RK4 integrator for the true plant under a zero-order-hold input.
#[derive(Clone, Debug)]
pub struct Plant {
    pub truth: PlantTruth,
    /// RK4 substeps per sampling period.
    pub substeps: usize,
}

impl Plant {
    pub fn new(truth: PlantTruth) -> Self {
        Self { truth, substeps: 10 }
    }

    fn derivative(&self, y: &Packed, u: &Vector3<f64>, t: f64) -> Result<Packed> {
        let v = Vector3::new(y[1], y[2], y[3]);
        let w = Vector3::new(y[4], y[5], y[6]);
        // The unnormalized stage quaternion is only used for its direction in
        // the target-torque evaluation.
        let q = UnitQuaternion::new(y[0], v).map_err(|_| Error::Divergence { time: t })?;
        let state = AttitudeState::new(q, w);
        let delta = true_uncertainty(&state, u, t, &self.truth).map_err(|_| Error::Divergence { time: t })?;
        let wdot = nominal_angular_accel(&w, u, &self.truth.j_nominal, &self.truth.j_nominal_inv) + delta;
        let (q0dot, qdot) = (-0.5 * v.dot(&w), 0.5 * (y[0] * w + v.cross(&w)));
        Ok(pack(q0dot, &qdot, &wdot))
    }

    /// Advances `state` (inertial attitude) by one sampling period `ts` with
    /// the input held at `u`.
    pub fn step(&self, state: &AttitudeState, u: &Vector3<f64>, t: f64, ts: f64) -> Result<AttitudeState> {
        if !(ts > 0.0) {
            return Err(Error::invalid("sampling time must be positive"));
        }
        if !u.iter().all(|v| v.is_finite()) || !state.is_finite() {
            return Err(Error::Divergence { time: t });
        }
        let n = self.substeps.max(1);
        let h = ts / n as f64;
        let mut y = pack(state.attitude.scalar(), state.attitude.vector(), &state.omega);
        for i in 0..n {
            let ti = t + i as f64 * h;
            let k1 = self.derivative(&y, u, ti)?;
            let k2 = self.derivative(&(y + 0.5 * h * k1), u, ti + 0.5 * h)?;
            let k3 = self.derivative(&(y + 0.5 * h * k2), u, ti + 0.5 * h)?;
            let k4 = self.derivative(&(y + h * k3), u, ti + h)?;
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if !y.iter().all(|v| v.is_finite()) {
                return Err(Error::Divergence { time: ti + h });
            }
        }
        let q = UnitQuaternion::new(y[0], Vector3::new(y[1], y[2], y[3]))
            .map_err(|_| Error::Divergence { time: t + ts })?;
        Ok(AttitudeState::new(q, Vector3::new(y[4], y[5], y[6])))
    }

    /// Free-rotation check quantity: angular momentum in the inertial frame,
    /// `C(Q)ᵀ J ω`, with `J` the true inertia.
    pub fn inertial_momentum(&self, state: &AttitudeState) -> Vector3<f64> {
        state.attitude.rotation_matrix().transpose() * (self.truth.j_true * state.omega)
    }
}

/// Inertia of the combined assembly about its centre of mass.
///
/// The target is treated as a rigid body docked at `offset` (servicer CoM to
/// target CoM, body frame) and rotated by `mount`; the manipulator arms are a
/// fixed lumped inertia.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assembly {
    pub servicer_inertia: Matrix3<f64>,
    pub servicer_mass: f64,
    pub target_inertia: Matrix3<f64>,
    pub target_mass: f64,
    pub offset: Vector3<f64>,
    pub arm_inertia: Matrix3<f64>,
}

impl Assembly {
    pub fn inertia(&self, mount: &UnitQuaternion) -> Matrix3<f64> {
        let c = mount.rotation_matrix();
        let target_body = c.transpose() * self.target_inertia * c;
        let total = self.servicer_mass + self.target_mass;
        let reduced = if total > 0.0 {
            self.servicer_mass * self.target_mass / total
        } else {
            0.0
        };
        let r = &self.offset;
        let parallel = reduced * (r.norm_squared() * Matrix3::identity() - r * r.transpose());
        let j = self.servicer_inertia + target_body + parallel + self.arm_inertia;
        0.5 * (j + j.transpose())
    }
}
