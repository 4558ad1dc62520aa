//! Exact GP regression with automatic relevance determination: the fitted
//! lengthscale of an input the target ignores grows large.
//!
//! `cargo run --release --example gp_regression`

use gp_takeover::gp::{gp_fit, Dataset, FitOptions};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> gp_takeover::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 200;
    // y depends on x0 only; x1 is a distractor.
    let x: DMatrix<f64> = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-3.0..3.0));
    let y = DMatrix::from_fn(n, 1, |i, _| x[(i, 0)].sin() + 0.05 * rng.sample::<f64, _>(StandardNormal));
    let data = Dataset::new(x, y)?;

    let model = gp_fit(&data, None, &FitOptions::default())?;
    let gp = &model.dims[0];
    let h = &gp.hyperparams;
    let d = &gp.diagnostics;
    println!("log marginal likelihood {:.2} -> {:.2} in {} iterations", d.lml_init, d.lml_final, d.iterations);
    println!("noise var {:.2e}, signal var {:.3}, lengthscales {:.2} / {:.2}", h.sigma_eps2, h.sigma_f2, h.lengthscales[0], h.lengthscales[1]);

    println!("{:>6} {:>9} {:>9} {:>9}", "x0", "mean", "std", "sin(x0)");
    for i in 0..=8 {
        let x0 = -4.0 + i as f64;
        let (mean, var) = gp.predict(&[x0, 0.0]);
        println!("{x0:6.1} {mean:9.4} {:9.4} {:9.4}", var.sqrt(), x0.sin());
    }
    Ok(())
}
