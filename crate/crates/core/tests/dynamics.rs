use gp_takeover::dynamics::{
    nominal_dynamics, quat_error, quat_product, rotation_matrix, true_uncertainty, AttitudeState, Plant, PlantTruth,
    UncertaintyForm, UnitQuaternion,
};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

fn j0() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(600.0, 450.0, 600.0))
}

fn j_tilde() -> Matrix3<f64> {
    Matrix3::new(133.0, 4.0, -2.0, 4.0, 36.0, 6.0, -2.0, 6.0, 165.0)
}

fn free_plant(form: UncertaintyForm, tilde: Matrix3<f64>) -> Plant {
    let mut truth = PlantTruth::new(j0(), tilde, None).unwrap();
    truth.form = form;
    Plant::new(truth)
}

fn tumbling() -> AttitudeState {
    AttitudeState::new(
        UnitQuaternion::from_euler_zyx_deg([15.0, 5.0, -20.0]).unwrap(),
        Vector3::new(0.1, 0.2, -0.1),
    )
}

fn quat(a: [f64; 4]) -> UnitQuaternion {
    UnitQuaternion::from_array(a).unwrap()
}

#[test]
fn torque_free_rotation_conserves_inertial_momentum() {
    for (form, tilde) in [
        (UncertaintyForm::AsPrinted, Matrix3::zeros()),
        (UncertaintyForm::RigidBody, j_tilde()),
    ] {
        let plant = free_plant(form, tilde);
        let mut x = tumbling();
        let h0 = plant.inertial_momentum(&x);
        let mut worst = 0.0f64;
        for k in 0..1000 {
            let t = 0.1 * k as f64;
            let before = x.attitude;
            x = plant.step(&x, &Vector3::zeros(), t, 0.1).unwrap();
            assert!((x.attitude.norm() - 1.0).abs() < 1e-9, "norm drift at step {k}");
            assert!(x.attitude != before);
            worst = worst.max((plant.inertial_momentum(&x) - h0).norm());
        }
        assert!(worst < 1e-6, "{form:?}: momentum drift {worst:e}");
    }
}

#[test]
fn rigid_body_form_also_conserves_kinetic_energy() {
    let plant = free_plant(UncertaintyForm::RigidBody, j_tilde());
    let j = plant.truth.j_true();
    let energy = |x: &AttitudeState| 0.5 * x.omega.dot(&(j * x.omega));
    let mut x = tumbling();
    let e0 = energy(&x);
    for k in 0..1000 {
        x = plant.step(&x, &Vector3::zeros(), 0.1 * k as f64, 0.1).unwrap();
    }
    assert!((energy(&x) - e0).abs() < 1e-9 * e0);
}

#[test]
fn substeps_converge_at_fourth_order() {
    let plant_with = |n| {
        let mut p = free_plant(UncertaintyForm::RigidBody, j_tilde());
        p.substeps = n;
        p
    };
    let run = |p: &Plant| {
        let mut x = tumbling();
        for k in 0..100 {
            x = p.step(&x, &Vector3::new(1.0, -0.5, 0.3), 0.1 * k as f64, 0.1).unwrap();
        }
        x
    };
    let reference = run(&plant_with(80));
    let err = |n| {
        let x = run(&plant_with(n));
        (x.omega - reference.omega).norm() + (x.attitude.as_vector4() - reference.attitude.as_vector4()).norm()
    };
    let (e1, e2) = (err(2), err(4));
    let ratio = e1 / e2;
    assert!(ratio > 10.0 && ratio < 24.0, "halving the substep changed the error by {ratio}");
}

#[test]
fn zero_order_hold_over_one_period() {
    // Pure rotation about a principal axis with constant torque: ω grows linearly.
    let plant = free_plant(UncertaintyForm::AsPrinted, Matrix3::zeros());
    let x = AttitudeState::new(UnitQuaternion::IDENTITY, Vector3::zeros());
    let u = Vector3::new(0.0, 0.0, 6.0);
    let y = plant.step(&x, &u, 0.0, 0.1).unwrap();
    assert!((y.omega - Vector3::new(0.0, 0.0, 1e-3)).norm() < 1e-15);
    let angle: f64 = 0.5 * 1e-2 * 0.1 * 0.1;
    assert!((y.attitude.vector()[2] - (0.5 * angle).sin()).abs() < 1e-14);
}

#[test]
fn nominal_plus_uncertainty_is_the_rigid_body_acceleration() {
    let mut truth = PlantTruth::new(j0(), j_tilde(), None).unwrap();
    truth.form = UncertaintyForm::RigidBody;
    let x = tumbling();
    let u = Vector3::new(0.4, -1.2, 2.0);
    let f = nominal_dynamics(&x, &u, &j0()).unwrap();
    let wdot = Vector3::new(f[3], f[4], f[5]) + true_uncertainty(&x, &u, 0.0, &truth).unwrap();
    let j = j0() + j_tilde();
    let direct = j.try_inverse().unwrap() * (u - x.omega.cross(&(j * x.omega)));
    assert!((wdot - direct).norm() < 1e-14);
}

#[test]
fn known_products() {
    let i = quat([0.0, 1.0, 0.0, 0.0]);
    let j = quat([0.0, 0.0, 1.0, 0.0]);
    let k = quat_product(&i, &j).unwrap();
    assert_eq!(k.to_array(), [0.0, 0.0, 0.0, 1.0]);
    assert_eq!(quat_product(&i, &i).unwrap().to_array(), [-1.0, 0.0, 0.0, 0.0]);
    let half_z = UnitQuaternion::from_axis_angle(&Vector3::z(), std::f64::consts::FRAC_PI_2).unwrap();
    // Body frame rotated +90° about z: the reference x axis reads as −y in the body.
    let c = rotation_matrix(&half_z);
    assert!((c * Vector3::x() - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-15);
}

#[test]
fn degenerate_quaternions_are_rejected() {
    assert!(UnitQuaternion::from_array([0.0; 4]).is_err());
    assert!(UnitQuaternion::from_array([f64::NAN, 0.0, 0.0, 0.0]).is_err());
}

#[test]
fn error_of_equal_attitudes_is_identity() {
    let q = UnitQuaternion::from_euler_zyx_deg([30.0, -10.0, 100.0]).unwrap();
    assert!((quat_error(&q, &q).unwrap().as_vector4() - UnitQuaternion::IDENTITY.as_vector4()).norm() < 1e-15);
    assert!((quat_error(&q, &q.negated()).unwrap().as_vector4() - UnitQuaternion::IDENTITY.as_vector4()).norm() < 1e-15);
}

fn unit_quat() -> impl Strategy<Value = UnitQuaternion> {
    proptest::array::uniform4(-1.0f64..1.0)
        .prop_filter("not too small", |a| a.iter().map(|v| v * v).sum::<f64>() > 1e-3)
        .prop_map(|a| UnitQuaternion::from_array(a).unwrap())
}

proptest! {
    #[test]
    fn product_is_associative(a in unit_quat(), b in unit_quat(), c in unit_quat()) {
        let l = quat_product(&quat_product(&a, &b).unwrap(), &c).unwrap();
        let r = quat_product(&a, &quat_product(&b, &c).unwrap()).unwrap();
        prop_assert!((l.as_vector4() - r.as_vector4()).norm() < 1e-14);
    }

    #[test]
    fn rotation_matrix_is_orthonormal_and_composes(a in unit_quat(), b in unit_quat()) {
        let ca = rotation_matrix(&a);
        prop_assert!((ca * ca.transpose() - Matrix3::identity()).amax() < 1e-14);
        prop_assert!((ca.determinant() - 1.0).abs() < 1e-14);
        let cab = rotation_matrix(&quat_product(&a, &b).unwrap());
        prop_assert!((cab - rotation_matrix(&b) * ca).amax() < 1e-14);
        prop_assert!((rotation_matrix(&a.negated()) - ca).amax() < 1e-15);
    }

    #[test]
    fn error_has_nonnegative_scalar_and_recovers_actual(d in unit_quat(), q in unit_quat()) {
        let e = quat_error(&d, &q).unwrap();
        prop_assert!(e.scalar() >= 0.0);
        prop_assert!((e.norm() - 1.0).abs() < 1e-15);
        let back = quat_product(&d, &e).unwrap();
        let same = (back.as_vector4() - q.as_vector4()).norm().min((back.as_vector4() + q.as_vector4()).norm());
        prop_assert!(same < 1e-14);
    }

    #[test]
    fn step_keeps_unit_norm(w in proptest::array::uniform3(-0.5f64..0.5), u in proptest::array::uniform3(-10.0f64..10.0), q in unit_quat()) {
        let plant = free_plant(UncertaintyForm::AsPrinted, j_tilde());
        let x = AttitudeState::new(q, Vector3::from(w));
        let y = plant.step(&x, &Vector3::from(u), 0.0, 0.1).unwrap();
        prop_assert!((y.attitude.norm() - 1.0).abs() < 1e-9);
    }
}
