//! Re-maneuver with an external disturbance: at 150 s the desired attitude
//! changes and a sinusoidal torque switches on. The frozen model keeps its
//! offline fit; the online model follows the new uncertainty.
//!
//! `cargo run --release --example remaneuver`

use gp_takeover::sim::metrics::mean_error_norm;
use gp_takeover::sim::{summarize, Experiment, Mode, ScenarioConfig};

fn main() -> gp_takeover::Result<()> {
    let cfg = ScenarioConfig::remaneuver();
    let exp = Experiment::prepare(&cfg, &Mode::ALL)?;
    println!("{:<10} {:>16} {:>12} {:>30}", "mode", "|q_e| last 100 s", "effort", "est. error (final 100 s)");
    for mode in Mode::ALL {
        let log = exp.run(mode)?;
        let m = summarize(&log, &cfg.metrics)?;
        println!(
            "{:<10} {:>16.3e} {:>12.1} {:>30}",
            mode.as_str(),
            mean_error_norm(&log, 100.0)?,
            m.control_effort,
            format!("{:.1e} {:.1e} {:.1e}", m.estimation_error[0], m.estimation_error[1], m.estimation_error[2]),
        );
    }

    // Attitude error around the retarget, online model only.
    let log = exp.run(Mode::Rosgp)?;
    println!("\nrosgp |q_e|:");
    for r in log.records.iter().filter(|r| ((r.t * 10.0).round() as usize).is_multiple_of(250)) {
        println!("  t = {:5.0} s  {:.3e}", r.t, r.error_norm());
    }
    Ok(())
}
