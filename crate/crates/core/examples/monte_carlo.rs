//! Randomized sweep over target mass and inertia, initial state, baseline
//! gains, prior covariance, target controller gains and disturbance
//! amplitude. Prints one line per run and the success rate.
//!
//! `cargo run --release --example monte_carlo -- [runs]`

use gp_takeover::sim::{monte_carlo, ScenarioConfig};

fn main() -> gp_takeover::Result<()> {
    let base = ScenarioConfig::stabilization();
    let mut mc = base.montecarlo.clone();
    if let Some(n) = std::env::args().nth(1) {
        mc.runs = n.parse().expect("runs must be a number");
    }
    let s = monte_carlo(&base, &mc)?;
    println!("{:>4} {:>10} {:>10} {:>10} {:>8} {:>9} {:>6}", "run", "ss |q_e|", "ss |w|", "mse q_e", "m_t", "K_pt/J_t", "ok");
    for r in &s.runs {
        match &r.metrics {
            Some(m) => println!(
                "{:>4} {:>10.2e} {:>10.2e} {:>10.2e} {:>8.1} {:>9.3} {:>6}",
                r.index, m.steady_q, m.steady_omega, m.mse_q, r.draw.target_mass, r.draw.target_kp, r.converged
            ),
            None => println!("{:>4} error: {}", r.index, r.error.as_deref().unwrap_or("")),
        }
    }
    println!(
        "\n{:.0} % of {} runs within steady < {:.0e} and MSE < {:.0e}; median steady |q_e| {:.2e}, median MSE {:.2e}; {:.1} s",
        100.0 * s.success_rate,
        s.runs.len(),
        mc.steady_tol,
        mc.mse_tol,
        s.steady_q_median,
        s.mse_q_median,
        s.wall_time
    );
    Ok(())
}
