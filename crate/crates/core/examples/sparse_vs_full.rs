//! FITC sparse GP against the exact GP on the same data: accuracy, fit time
//! and prediction cost as the number of inducing inputs grows.
//!
//! `cargo run --release --example sparse_vs_full`

use std::time::Instant;

use gp_takeover::gp::{gp_fit, spgp_fit, Dataset, FitOptions, SparseOptions};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn f(x: &[f64]) -> f64 {
    (1.5 * x[0]).sin() * (0.5 * x[1]).cos() + 0.3 * x[2]
}

fn main() -> gp_takeover::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 600;
    let x: DMatrix<f64> = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-2.0..2.0));
    let y = DMatrix::from_fn(n, 1, |i, _| {
        let r: Vec<f64> = x.row(i).iter().cloned().collect();
        f(&r) + 0.05 * rng.sample::<f64, _>(StandardNormal)
    });
    let data = Dataset::new(x, y)?;
    let tests: Vec<[f64; 3]> = (0..500).map(|_| [0; 3].map(|_| rng.random_range(-2.0..2.0))).collect();

    let rmse = |predict: &dyn Fn(&[f64]) -> f64| {
        (tests.iter().map(|x| (predict(x) - f(x)).powi(2)).sum::<f64>() / tests.len() as f64).sqrt()
    };
    let per_call = |predict: &dyn Fn(&[f64]) -> f64| {
        let t0 = Instant::now();
        for x in &tests {
            std::hint::black_box(predict(x));
        }
        1e6 * t0.elapsed().as_secs_f64() / tests.len() as f64
    };

    let t0 = Instant::now();
    let full = gp_fit(&data, None, &FitOptions::default())?;
    let fit = t0.elapsed().as_secs_f64();
    let p = |x: &[f64]| full.dims[0].predict_mean(x);
    println!("{:>10} {:>10} {:>10} {:>12}", "model", "rmse", "fit (s)", "predict (us)");
    println!("{:>10} {:>10.4} {:>10.2} {:>12.1}", format!("full {n}"), rmse(&p), fit, per_call(&p));

    for m in [10, 25, 50, 100] {
        let opts = SparseOptions { num_inducing: m, seed: 1, ..Default::default() };
        let t0 = Instant::now();
        let sparse = spgp_fit(&data, &opts)?;
        let fit = t0.elapsed().as_secs_f64();
        let p = |x: &[f64]| sparse.dims[0].predict_mean(x);
        println!("{:>10} {:>10.4} {:>10.2} {:>12.1}", format!("fitc {m}"), rmse(&p), fit, per_call(&p));
    }
    Ok(())
}
