//! Ultimate bounds of the closed loop: how the guaranteed attitude and rate
//! balls shrink with the model error level, and the level implied by the
//! trained sparse GP.
//!
//! `cargo run --release --example ultimate_bounds`

use gp_takeover::controller::{epsilon_from, ultimate_bounds};
use gp_takeover::gp::beta_bound;
use gp_takeover::sim::{Experiment, Mode, ScenarioConfig};

fn main() -> gp_takeover::Result<()> {
    let cfg = ScenarioConfig::stabilization();
    let bounds_cfg = cfg.bound_config();
    let schedule = cfg.schedule(1.0)?;

    println!("{:>10} {:>12} {:>12}", "epsilon", "|q_e| bound", "|w| bound");
    for eps in [1e-6, 1e-5, 1e-4, 1e-3, 1e-2] {
        let b = ultimate_bounds(&bounds_cfg, &schedule, eps)?;
        println!("{eps:>10.0e} {:>12.3e} {:>12.3e}", b.q_bound, b.omega_bound);
    }

    let exp = Experiment::prepare(&cfg, &[Mode::FrozenGp])?;
    let model = exp.models.full.as_ref().expect("trained above");
    let gamma: Vec<f64> = model.info_gain().iter().cloned().collect();
    let beta = beta_bound(&bounds_cfg.rkhs_norm, &gamma, exp.dataset.len(), bounds_cfg.delta)?;
    let variances: Vec<_> = (0..exp.dataset.len())
        .map(|i| model.predict3(exp.dataset.x.row(i).transpose().as_slice()).1)
        .collect();
    let eps = epsilon_from(&beta, &variances);
    let sf = model.dims.iter().map(|g| g.hyperparams.sigma_f2).fold(0.0, f64::max).sqrt();
    let b = ultimate_bounds(&bounds_cfg, &cfg.schedule(sf)?, eps)?;
    println!("\ninformation gain {gamma:.3?}, beta {beta:.2?}");
    println!("epsilon over the training inputs {eps:.3e}: |q_e| <= {:.3e}, |w| <= {:.3e}", b.q_bound, b.omega_bound);
    Ok(())
}
