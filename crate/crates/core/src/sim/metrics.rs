//! Run metrics: steady-state error, MSE, GP estimation error and per-cycle
//! compute time.

use serde::{Deserialize, Serialize};

use super::config::MetricsConfig;
use super::harness::{Phase, RunLog, StepRecord};
use crate::error::{Error, Result};

/// Rows with `t ≥ t_end − window`.
pub fn final_window(log: &RunLog, window: f64) -> Result<&[StepRecord]> {
    let last = log.records.last().ok_or_else(|| Error::invalid("run log is empty"))?;
    if !(window > 0.0) {
        return Err(Error::invalid(format!("window must be positive, got {window}")));
    }
    let start = last.t - window - 1e-9;
    let i = log.records.partition_point(|r| r.t < start);
    Ok(&log.records[i..])
}

fn mean(it: impl Iterator<Item = f64>) -> Result<f64> {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        return Err(Error::invalid("empty averaging window"));
    }
    Ok(s / n as f64)
}

/// Mean `‖q_e‖` and `‖ω‖` over the final `window` seconds.
pub fn steady_state(log: &RunLog, window: f64) -> Result<(f64, f64)> {
    let w = final_window(log, window)?;
    Ok((mean(w.iter().map(StepRecord::error_norm))?, mean(w.iter().map(StepRecord::omega_norm))?))
}

/// Mean of `‖q_e‖²` and `‖ω‖²` over the rows from `from` on.
pub fn mse(log: &RunLog, from: f64) -> Result<(f64, f64)> {
    let i = log.records.partition_point(|r| r.t < from - 1e-9);
    let w = &log.records[i..];
    Ok((
        mean(w.iter().map(|r| r.error_vector().norm_squared()))?,
        mean(w.iter().map(|r| r.omega_norm().powi(2)))?,
    ))
}

/// `|μ_j − Δ̆_j|` per row.
pub fn estimation_error_series(log: &RunLog) -> Vec<[f64; 3]> {
    log.records.iter().map(estimation_error).collect()
}

fn estimation_error(r: &StepRecord) -> [f64; 3] {
    [0, 1, 2].map(|j| (r.mu[j] - r.delta_true[j]).abs())
}

/// Mean `|μ_j − Δ̆_j|` over the final `window` seconds, per dimension.
pub fn mean_estimation_error(log: &RunLog, window: f64) -> Result<[f64; 3]> {
    let w = final_window(log, window)?;
    let mut out = [0.0; 3];
    for (j, o) in out.iter_mut().enumerate() {
        *o = mean(w.iter().map(|r| estimation_error(r)[j]))?;
    }
    Ok(out)
}

/// Mean `‖q_e‖` over the final `window` seconds.
pub fn mean_error_norm(log: &RunLog, window: f64) -> Result<f64> {
    mean(final_window(log, window)?.iter().map(StepRecord::error_norm))
}

/// Mean per-cycle compute time (s) of the rows in `phase`.
pub fn mean_compute_time(log: &RunLog, phase: Phase) -> Result<f64> {
    mean(log.records.iter().filter(|r| r.phase == phase).map(|r| r.compute_time))
}

/// `∫ ‖u‖ dt` over the rows from `from` on (rectangle rule, ZOH exact).
pub fn control_effort(log: &RunLog, from: f64) -> f64 {
    log.records
        .iter()
        .filter(|r| r.t >= from - 1e-9)
        .map(|r| r.u_vec().norm() * log.sample_time)
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Mean `‖q_e‖` over the steady-state window.
    pub steady_q: f64,
    /// Mean `‖ω‖` (rad/s) over the steady-state window.
    pub steady_omega: f64,
    /// Mean `‖q_e‖²` after the controller switch.
    pub mse_q: f64,
    pub mse_omega: f64,
    /// Mean `|μ_j − Δ̆_j|` over the estimation window.
    pub estimation_error: [f64; 3],
    /// Mean per-cycle compute time (s) in each phase.
    pub compute_time_collect: f64,
    pub compute_time_online: f64,
    /// `∫ ‖u‖ dt` after the switch (N·m·s).
    pub control_effort: f64,
    /// Mean gain norm after the switch.
    pub mean_gain_norm: f64,
    pub steady_window: f64,
    pub estimation_window: f64,
    pub diverged: bool,
}

impl Metrics {
    /// Steady-state `‖q_e‖`, `‖ω‖` below `tol` and `‖q_e‖` MSE below `mse_tol`.
    pub fn converged(&self, tol: f64, mse_tol: f64) -> bool {
        !self.diverged && self.steady_q < tol && self.steady_omega < tol && self.mse_q < mse_tol
    }
}

/// All metrics of a run; the steady-state window is the configured fraction
/// of the run length.
pub fn summarize(log: &RunLog, cfg: &MetricsConfig) -> Result<Metrics> {
    let last = log.records.last().ok_or_else(|| Error::invalid("run log is empty"))?;
    let steady_window = cfg.steady_fraction * last.t;
    let (steady_q, steady_omega) = steady_state(log, steady_window)?;
    let online = log.collect_end;
    let (mse_q, mse_omega) = if last.t >= online { mse(log, online)? } else { (f64::NAN, f64::NAN) };
    let online_rows = log.records.iter().filter(|r| r.phase == Phase::Online);
    Ok(Metrics {
        steady_q,
        steady_omega,
        mse_q,
        mse_omega,
        estimation_error: mean_estimation_error(log, cfg.estimation_window)?,
        compute_time_collect: mean_compute_time(log, Phase::Collect).unwrap_or(f64::NAN),
        compute_time_online: mean_compute_time(log, Phase::Online).unwrap_or(f64::NAN),
        control_effort: control_effort(log, online),
        mean_gain_norm: mean(online_rows.map(|r| r.gain_norm)).unwrap_or(f64::NAN),
        steady_window,
        estimation_window: cfg.estimation_window,
        diverged: log.diverged_at.is_some(),
    })
}
