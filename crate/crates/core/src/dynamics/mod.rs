//! Combined-spacecraft attitude plant: quaternion kinematics, rigid-body
//! dynamics with hidden uncertainty, and zero-order-hold integration.

mod plant;
mod quaternion;

pub use plant::{
    nominal_dynamics, state_input, target_torque, true_uncertainty, Assembly, AttitudeState,
    Disturbance, Plant, PlantTruth, SampledPair, StateInput, TargetManeuver, UncertaintyForm,
};
pub(crate) use plant::nominal_angular_accel;
pub use quaternion::{quat_error, UnitQuaternion, UNIT_TOLERANCE};

/// `Qi ⊗ Qj`.
pub fn quat_product(qi: &UnitQuaternion, qj: &UnitQuaternion) -> crate::Result<UnitQuaternion> {
    qi.product(qj)
}

/// `C(Q)`.
pub fn rotation_matrix(q: &UnitQuaternion) -> nalgebra::Matrix3<f64> {
    q.rotation_matrix()
}
