//! Attitude stabilization after capture: baseline PD, frozen full GP and
//! online sparse GP on the same collection phase.
//!
//! `cargo run --release --example stabilization`

use gp_takeover::sim::{summarize, Experiment, Mode, ScenarioConfig};

fn main() -> gp_takeover::Result<()> {
    let cfg = ScenarioConfig::stabilization();
    let exp = Experiment::prepare(&cfg, &Mode::ALL)?;
    println!("training set: {} samples, hash {}", exp.dataset.len(), &exp.dataset.hash()[..12]);
    println!(
        "{:<10} {:>10} {:>10} {:>10} {:>30} {:>10}",
        "mode", "ss |q_e|", "ss |w|", "mse q_e", "est. error (final 50 s)", "ms/cycle"
    );
    for mode in Mode::ALL {
        let log = exp.run(mode)?;
        let m = summarize(&log, &cfg.metrics)?;
        println!(
            "{:<10} {:>10.2e} {:>10.2e} {:>10.2e} {:>30} {:>10.4}",
            mode.as_str(),
            m.steady_q,
            m.steady_omega,
            m.mse_q,
            format!("{:.1e} {:.1e} {:.1e}", m.estimation_error[0], m.estimation_error[1], m.estimation_error[2]),
            1e3 * m.compute_time_online
        );
    }
    Ok(())
}
