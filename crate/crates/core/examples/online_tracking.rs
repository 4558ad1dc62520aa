//! Recursive update of a sparse GP's weights. When the target function
//! jumps, the forgetting factor decides how fast the old fit is discarded.
//! Printed: mean absolute error of the first output at four probe inputs.
//!
//! `cargo run --release --example online_tracking`

use std::sync::Arc;

use gp_takeover::gp::{rosgp_init, spgp_fit, Dataset, RosgpOptions, RosgpState, SparseOptions};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> gp_takeover::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x: DMatrix<f64> = DMatrix::from_fn(300, 1, |_, _| rng.random_range(-3.0..3.0));
    let y = DMatrix::from_fn(300, 3, |i, j| (x[(i, 0)] + j as f64).sin());
    let model = Arc::new(spgp_fit(&Dataset::new(x, y)?, &SparseOptions { num_inducing: 20, ..Default::default() })?);

    // The outputs match the trained model for 1000 steps, then shift up by 0.5.
    let truth = |x: f64, j: usize, k: usize| (x + j as f64).sin() + if k < 1000 { 0.0 } else { 0.5 };
    let probes = [-2.0, -0.5, 1.0, 2.5];
    let error = |s: &RosgpState, k: usize| {
        probes.iter().map(|p| (s.predict(&[*p]).0[0] - truth(*p, 0, k)).abs()).sum::<f64>() / probes.len() as f64
    };
    let report = [0, 999, 1000, 1010, 1050, 1200, 1500, 2000];

    print!("{:<8}", "step");
    for k in report {
        print!("{k:>8}");
    }
    println!();
    for lambda in [1.0, 0.999, 0.99] {
        let mut s = rosgp_init(model.clone(), &RosgpOptions { lambda, ..Default::default() })?;
        print!("{:<8}", format!("λ {lambda}"));
        for k in 0..=2000 {
            if report.contains(&k) {
                print!("{:>8.4}", error(&s, k));
            }
            let x = rng.random_range(-3.0..3.0);
            s.update(&[x], &[truth(x, 0, k), truth(x, 1, k), truth(x, 2, k)])?;
        }
        println!();
    }
    Ok(())
}
