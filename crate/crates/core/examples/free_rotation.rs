//! Torque-free tumbling of a rigid body: the integrator keeps the attitude
//! on the unit sphere and conserves angular momentum in the inertial frame.
//!
//! `cargo run --release --example free_rotation`

use gp_takeover::dynamics::{quat_error, AttitudeState, Plant, PlantTruth, UncertaintyForm, UnitQuaternion};
use nalgebra::{Matrix3, Vector3};

fn main() -> gp_takeover::Result<()> {
    let j0 = Matrix3::from_diagonal(&Vector3::new(600.0, 450.0, 600.0));
    let j_tilde = Matrix3::from_diagonal(&Vector3::new(133.0, 36.0, 165.0));
    let mut truth = PlantTruth::new(j0, j_tilde, None)?;
    truth.form = UncertaintyForm::RigidBody;
    let plant = Plant::new(truth);

    let q0 = UnitQuaternion::from_euler_zyx_deg([15.0, 5.0, -20.0])?;
    let mut x = AttitudeState::new(q0, Vector3::new(0.1, 0.2, -0.1));
    let h0 = plant.inertial_momentum(&x);
    println!("{:>6} {:>12} {:>12} {:>14}", "t (s)", "angle (deg)", "|Q| - 1", "|H - H0|");
    for k in 0..=1000 {
        if k % 100 == 0 {
            let t = 0.1 * k as f64;
            let angle = quat_error(&q0, &x.attitude)?.angle().to_degrees();
            let dh = (plant.inertial_momentum(&x) - h0).norm();
            println!("{t:6.1} {angle:12.3} {:12.1e} {dh:14.2e}", x.attitude.norm() - 1.0);
        }
        x = plant.step(&x, &Vector3::zeros(), 0.1 * k as f64, 0.1)?;
    }
    Ok(())
}
