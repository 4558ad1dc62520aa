//! Unit quaternions `Q = [q0, q]` with scalar-first storage.
//!
//! The product follows the Hamilton convention
//! `Qi ⊗ Qj = [qi0 qj0 − qiᵀqj, qi0 qj + qj0 qi + qi × qj]`, and a quaternion
//! describes the rotation of the body frame with respect to a reference frame.

use std::fmt;

use nalgebra::{Matrix3, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::skew;

/// Inputs to the product must be unit-norm within this tolerance.
pub const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct UnitQuaternion {
    q0: f64,
    q: Vector3<f64>,
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion {
        q0: 1.0,
        q: Vector3::new(0.0, 0.0, 0.0),
    };

    /// Builds a unit quaternion by normalizing `[q0, q]`.
    pub fn new(q0: f64, q: Vector3<f64>) -> Result<Self> {
        if !q0.is_finite() || !q.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("quaternion has non-finite components"));
        }
        let n = (q0 * q0 + q.norm_squared()).sqrt();
        if n < 1e-12 {
            return Err(Error::invalid("cannot normalize a zero quaternion"));
        }
        Ok(Self { q0: q0 / n, q: q / n })
    }

    pub fn from_array(a: [f64; 4]) -> Result<Self> {
        Self::new(a[0], Vector3::new(a[1], a[2], a[3]))
    }

    /// Rotation of `angle` radians about `axis`.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Result<Self> {
        let n = axis.norm();
        if n < 1e-15 {
            return Err(Error::invalid("rotation axis is zero"));
        }
        let (s, c) = (0.5 * angle).sin_cos();
        Self::new(c, axis / n * s)
    }

    /// Z-Y-X intrinsic Euler angles given as `[roll, pitch, yaw]` in degrees:
    /// `Q = Qz(yaw) ⊗ Qy(pitch) ⊗ Qx(roll)`.
    pub fn from_euler_zyx_deg(angles: [f64; 3]) -> Result<Self> {
        let [roll, pitch, yaw] = angles.map(f64::to_radians);
        let qx = Self::from_axis_angle(&Vector3::x(), roll)?;
        let qy = Self::from_axis_angle(&Vector3::y(), pitch)?;
        let qz = Self::from_axis_angle(&Vector3::z(), yaw)?;
        qz.product(&qy)?.product(&qx)
    }

    #[inline]
    pub fn scalar(&self) -> f64 {
        self.q0
    }

    #[inline]
    pub fn vector(&self) -> &Vector3<f64> {
        &self.q
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.q0, self.q[0], self.q[1], self.q[2]]
    }

    pub fn as_vector4(&self) -> Vector4<f64> {
        Vector4::new(self.q0, self.q[0], self.q[1], self.q[2])
    }

    pub fn norm(&self) -> f64 {
        (self.q0 * self.q0 + self.q.norm_squared()).sqrt()
    }

    pub fn conjugate(&self) -> Self {
        Self { q0: self.q0, q: -self.q }
    }

    pub fn negated(&self) -> Self {
        Self { q0: -self.q0, q: -self.q }
    }

    /// `self ⊗ other`, renormalized.
    pub fn product(&self, other: &Self) -> Result<Self> {
        for (name, v) in [("left", self), ("right", other)] {
            if !v.q0.is_finite() || !v.q.iter().all(|c| c.is_finite()) {
                return Err(Error::invalid(format!("{name} operand is not finite")));
            }
            if (v.norm() - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::invalid(format!(
                    "{name} operand is not unit-norm (|Q| = {})",
                    v.norm()
                )));
            }
        }
        let q0 = self.q0 * other.q0 - self.q.dot(&other.q);
        let q = self.q0 * other.q + other.q0 * self.q + self.q.cross(&other.q);
        Self::new(q0, q)
    }

    /// Rotation matrix `C(Q) = I − 2 q0 q× + 2 q× q×`, mapping reference-frame
    /// components into body-frame components.
    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        let qx = skew(&self.q);
        Matrix3::identity() - 2.0 * self.q0 * qx + 2.0 * qx * qx
    }

    /// Flips the sign so that the scalar part is non-negative.
    pub fn shortest(&self) -> Self {
        if self.q0 < 0.0 {
            self.negated()
        } else {
            *self
        }
    }

    /// Principal rotation angle in radians, in `[0, π]`.
    pub fn angle(&self) -> f64 {
        2.0 * self.q.norm().atan2(self.q0.abs())
    }
}

/// Attitude error `Q_e = Q_d* ⊗ Q`, sign-normalized so that `q_e0 ≥ 0`.
pub fn quat_error(desired: &UnitQuaternion, actual: &UnitQuaternion) -> Result<UnitQuaternion> {
    Ok(desired.conjugate().product(actual)?.shortest())
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl TryFrom<[f64; 4]> for UnitQuaternion {
    type Error = Error;
    fn try_from(a: [f64; 4]) -> Result<Self> {
        Self::from_array(a)
    }
}

impl From<UnitQuaternion> for [f64; 4] {
    fn from(q: UnitQuaternion) -> Self {
        q.to_array()
    }
}

impl fmt::Display for UnitQuaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{:.6}, {:.6}, {:.6}, {:.6}]",
            self.q0, self.q[0], self.q[1], self.q[2]
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn q(a: [f64; 4]) -> UnitQuaternion {
        UnitQuaternion::from_array(a).unwrap()
    }

    fn close(a: &UnitQuaternion, b: [f64; 4], tol: f64) -> bool {
        a.to_array().iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn identity_is_neutral() {
        let a = q([0.3, -0.4, 0.5, 0.7]);
        let p = UnitQuaternion::IDENTITY.product(&a).unwrap();
        assert!(close(&p, a.to_array(), 1e-15));
    }

    #[test]
    fn conjugate_is_inverse() {
        let a = q([0.3, -0.4, 0.5, 0.7]);
        let p = a.product(&a.conjugate()).unwrap();
        assert!(close(&p, [1.0, 0.0, 0.0, 0.0], 1e-15));
    }

    #[test]
    fn two_quarter_turns_about_x() {
        // [cos45, sin45, 0, 0] ⊗ itself: q0 = c² − s² = 0, q = 2cs·x = x
        let h = q([FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0, 0.0]);
        let p = h.product(&h).unwrap();
        assert!(close(&p, [0.0, 1.0, 0.0, 0.0], 1e-15));
    }

    #[test]
    fn non_unit_or_non_finite_operands_are_rejected() {
        let bad = UnitQuaternion { q0: 2.0, q: Vector3::zeros() };
        assert!(bad.product(&UnitQuaternion::IDENTITY).is_err());
        let nan = UnitQuaternion { q0: f64::NAN, q: Vector3::zeros() };
        assert!(UnitQuaternion::IDENTITY.product(&nan).is_err());
        assert!(UnitQuaternion::new(f64::INFINITY, Vector3::zeros()).is_err());
    }

    #[test]
    fn error_of_equal_attitudes_is_identity() {
        let a = q([0.3, -0.4, 0.5, 0.7]);
        assert!(close(&quat_error(&a, &a).unwrap(), [1.0, 0.0, 0.0, 0.0], 1e-15));
    }

    #[test]
    fn error_against_identity_is_the_attitude_up_to_sign() {
        let a = q([-0.3, -0.4, 0.5, 0.7]);
        let e = quat_error(&UnitQuaternion::IDENTITY, &a).unwrap();
        assert!(close(&e, a.negated().to_array(), 1e-15));
    }

    #[test]
    fn error_on_the_sign_boundary() {
        // conj([0,1,0,0]) ⊗ [1,0,0,0] = [0,-1,0,0]; q_e0 = 0 is kept as is
        let e = quat_error(&q([0.0, 1.0, 0.0, 0.0]), &UnitQuaternion::IDENTITY).unwrap();
        assert!(close(&e, [0.0, -1.0, 0.0, 0.0], 1e-15));
        assert!(e.scalar() >= 0.0);
    }

    #[test]
    fn rotation_matrix_cases() {
        assert_eq!(UnitQuaternion::IDENTITY.rotation_matrix(), Matrix3::identity());
        let c = q([0.0, 1.0, 0.0, 0.0]).rotation_matrix();
        let expected = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0));
        assert!((c - expected).norm() < 1e-15);
    }

    #[test]
    fn euler_single_axis() {
        let e = UnitQuaternion::from_euler_zyx_deg([0.0, 0.0, 90.0]).unwrap();
        assert!(close(&e, [FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2], 1e-15));
    }

    #[test]
    fn serde_uses_scalar_first_array() {
        let a = q([0.5, 0.5, 0.5, 0.5]);
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, "[0.5,0.5,0.5,0.5]");
        let b: UnitQuaternion = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);
    }
}
