//! Run logs as CSV plus a TOML summary, Monte Carlo tables, and the
//! plotting scripts that read them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::harness::{Mode, Phase, RunLog, StepRecord};
use super::metrics::Metrics;
use super::montecarlo::McSummary;
use crate::error::{Error, Result};

/// Column order of a run CSV. `phase` is `collect` or `online`; every other
/// column is a float written in shortest round-trip form.
pub const RUN_COLUMNS: [&str; 27] = [
    "t", "phase", "q0", "q1", "q2", "q3", "qe0", "qe1", "qe2", "qe3", "w1", "w2", "w3", "u1", "u2", "u3", "mu1",
    "mu2", "mu3", "var1", "var2", "var3", "delta1", "delta2", "delta3", "gain_norm", "compute_s",
];

/// Everything about a run that is not per-step, plus its metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub seed: u64,
    pub sample_time: f64,
    pub collect_end: f64,
    pub steps: usize,
    pub diverged_at: Option<f64>,
    pub dataset_hash: Option<String>,
    /// [`RunLog::digest`] of the log.
    pub digest: String,
    pub metrics: Option<Metrics>,
}

impl RunSummary {
    pub fn new(log: &RunLog, metrics: Option<Metrics>) -> Self {
        Self {
            mode: log.mode,
            seed: log.seed,
            sample_time: log.sample_time,
            collect_end: log.collect_end,
            steps: log.records.len(),
            diverged_at: log.diverged_at,
            dataset_hash: log.dataset_hash.clone(),
            digest: log.digest(),
            metrics,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, toml::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(toml::from_str(&std::fs::read_to_string(path)?)?)
    }
}

fn phase_str(p: Phase) -> &'static str {
    match p {
        Phase::Collect => "collect",
        Phase::Online => "online",
    }
}

pub fn write_run_csv(log: &RunLog, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RUN_COLUMNS)?;
    for r in &log.records {
        let mut row = vec![format!("{:?}", r.t), phase_str(r.phase).to_string()];
        let tail = [r.gain_norm, r.compute_time];
        let vals = r
            .attitude
            .iter()
            .chain(&r.error)
            .chain(&r.omega)
            .chain(&r.u)
            .chain(&r.mu)
            .chain(&r.variance)
            .chain(&r.delta_true)
            .chain(&tail);
        row.extend(vals.map(|v| format!("{v:?}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the rows of a run CSV written by [`write_run_csv`].
pub fn read_run_csv(path: &Path) -> Result<Vec<StepRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.iter().ne(RUN_COLUMNS) {
        return Err(Error::invalid(format!("unexpected run header in {}: {header:?}", path.display())));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let phase = match &rec[1] {
            "collect" => Phase::Collect,
            "online" => Phase::Online,
            other => return Err(Error::invalid(format!("unknown phase {other:?}"))),
        };
        let v: Vec<f64> = rec
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != 1)
            .map(|(_, s)| s.parse::<f64>().map_err(|e| Error::invalid(format!("bad number {s:?}: {e}"))))
            .collect::<Result<_>>()?;
        let a = |i: usize| -> [f64; 3] { [v[i], v[i + 1], v[i + 2]] };
        out.push(StepRecord {
            t: v[0],
            phase,
            attitude: [v[1], v[2], v[3], v[4]],
            error: [v[5], v[6], v[7], v[8]],
            omega: a(9),
            u: a(12),
            mu: a(15),
            variance: a(18),
            delta_true: a(21),
            gain_norm: v[24],
            compute_time: v[25],
        });
    }
    Ok(out)
}

/// `<dir>/<stem>.csv` and `<dir>/<stem>.summary.toml`.
pub fn run_paths(dir: &Path, stem: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{stem}.csv")), dir.join(format!("{stem}.summary.toml")))
}

/// Writes the CSV and summary of a run; returns their paths.
pub fn write_run(dir: &Path, stem: &str, log: &RunLog, metrics: Option<Metrics>) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let (csv, summary) = run_paths(dir, stem);
    write_run_csv(log, &csv)?;
    RunSummary::new(log, metrics).save(&summary)?;
    Ok((csv, summary))
}

/// Reassembles a run from its CSV and summary and checks the digest.
pub fn read_run(dir: &Path, stem: &str) -> Result<(RunLog, RunSummary)> {
    let (csv, summary) = run_paths(dir, stem);
    let s = RunSummary::load(&summary)?;
    let log = RunLog {
        mode: s.mode,
        seed: s.seed,
        sample_time: s.sample_time,
        collect_end: s.collect_end,
        records: read_run_csv(&csv)?,
        diverged_at: s.diverged_at,
        dataset_hash: s.dataset_hash.clone(),
    };
    if log.digest() != s.digest {
        return Err(Error::Mismatch(format!("{} does not match its summary digest", csv.display())));
    }
    Ok((log, s))
}

/// Column order of the Monte Carlo table.
pub const MC_COLUMNS: [&str; 27] = [
    "index", "converged", "steady_q", "steady_w", "mse_q", "mse_w", "target_mass", "jt1", "jt2", "jt3", "q0_0",
    "q0_1", "q0_2", "q0_3", "w0_1", "w0_2", "w0_3", "baseline_kp", "baseline_kd", "p0", "target_kp", "target_kd",
    "tau1", "tau2", "tau3", "wall_s", "error",
];

/// One row per run; metrics of failed runs are `NaN`.
pub fn write_montecarlo_csv(s: &McSummary, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(MC_COLUMNS)?;
    for r in &s.runs {
        let d = &r.draw;
        let m = r.metrics.as_ref();
        let metric = |f: fn(&Metrics) -> f64| m.map_or(f64::NAN, f);
        let nums = [metric(|m| m.steady_q), metric(|m| m.steady_omega), metric(|m| m.mse_q), metric(|m| m.mse_omega)]
            .into_iter()
            .chain([d.target_mass])
            .chain(d.target_inertia)
            .chain(d.attitude)
            .chain(d.omega)
            .chain([d.baseline_kp, d.baseline_kd, d.p0, d.target_kp, d.target_kd])
            .chain(d.disturbance_amplitude)
            .chain([r.wall_time]);
        let mut row = vec![r.index.to_string(), r.converged.to_string()];
        row.extend(nums.map(|v| format!("{v:?}")));
        row.push(r.error.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Aggregate figures of a sweep, without the per-run rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McOverview {
    pub runs: usize,
    pub converged: usize,
    pub failed: usize,
    pub success_rate: f64,
    pub steady_q_median: f64,
    pub steady_q_max: f64,
    pub mse_q_median: f64,
    pub mse_q_max: f64,
    pub wall_time: f64,
}

impl From<&McSummary> for McOverview {
    fn from(s: &McSummary) -> Self {
        Self {
            runs: s.runs.len(),
            converged: s.runs.iter().filter(|r| r.converged).count(),
            failed: s.failed,
            success_rate: s.success_rate,
            steady_q_median: s.steady_q_median,
            steady_q_max: s.steady_q_max,
            mse_q_median: s.mse_q_median,
            mse_q_max: s.mse_q_max,
            wall_time: s.wall_time,
        }
    }
}

/// `<dir>/montecarlo.csv` and `<dir>/montecarlo.summary.toml`.
pub fn write_montecarlo(dir: &Path, s: &McSummary) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let csv = dir.join("montecarlo.csv");
    let summary = dir.join("montecarlo.summary.toml");
    write_montecarlo_csv(s, &csv)?;
    std::fs::write(&summary, toml::to_string_pretty(&McOverview::from(s))?)?;
    Ok((csv, summary))
}

const PLOT_RUN: &str = r#"#!/usr/bin/env python3
"""Plot one or more run CSVs: attitude error, rate, torque, gain norm and
GP estimation error.

usage: plot_run.py RUN.csv [RUN.csv ...] [--out DIR]
"""
import argparse
import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def load(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    cols = {k: np.array([float(r[k]) for r in rows]) for k in rows[0] if k != "phase"}
    cols["online"] = np.array([r["phase"] == "online" for r in rows])
    return cols


def norm(c, keys):
    return np.sqrt(sum(c[k] ** 2 for k in keys))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("runs", nargs="+")
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    out = args.out or os.path.dirname(os.path.abspath(args.runs[0]))
    os.makedirs(out, exist_ok=True)
    runs = [(os.path.splitext(os.path.basename(p))[0], load(p)) for p in args.runs]

    fig, ax = plt.subplots(4, 1, figsize=(8, 11), sharex=True)
    for name, c in runs:
        ax[0].semilogy(c["t"], norm(c, ["qe1", "qe2", "qe3"]), label=name)
        ax[1].semilogy(c["t"], norm(c, ["w1", "w2", "w3"]), label=name)
        ax[2].plot(c["t"], norm(c, ["u1", "u2", "u3"]), label=name)
        ax[3].plot(c["t"], c["gain_norm"], label=name)
    for a, lab in zip(ax, ["|q_e|", "|omega| (rad/s)", "|u| (N m)", "gain norm"]):
        a.set_ylabel(lab)
        a.grid(True, which="both", alpha=0.3)
    ax[0].legend()
    ax[-1].set_xlabel("t (s)")
    fig.tight_layout()
    fig.savefig(os.path.join(out, "states.png"), dpi=150)

    fig, ax = plt.subplots(3, 1, figsize=(8, 8), sharex=True)
    for name, c in runs:
        for j in range(3):
            e = np.abs(c[f"mu{j + 1}"] - c[f"delta{j + 1}"])
            m = c["online"]
            ax[j].semilogy(c["t"][m], e[m], label=name)
    for j in range(3):
        ax[j].set_ylabel(f"|mu_{j + 1} - delta_{j + 1}|")
        ax[j].grid(True, which="both", alpha=0.3)
    ax[0].legend()
    ax[-1].set_xlabel("t (s)")
    fig.tight_layout()
    fig.savefig(os.path.join(out, "estimation_error.png"), dpi=150)


if __name__ == "__main__":
    main()
"#;

const PLOT_MC: &str = r#"#!/usr/bin/env python3
"""Scatter the steady-state error and MSE of a Monte Carlo table.

usage: plot_montecarlo.py montecarlo.csv [--out DIR]
"""
import argparse
import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("table")
    ap.add_argument("--out", default=None)
    ap.add_argument("--tol", type=float, default=1e-2)
    ap.add_argument("--mse-tol", type=float, default=1e-4)
    args = ap.parse_args()
    out = args.out or os.path.dirname(os.path.abspath(args.table))
    with open(args.table, newline="") as f:
        rows = [r for r in csv.DictReader(f) if not r["error"]]
    col = lambda k: np.array([float(r[k]) for r in rows])

    fig, ax = plt.subplots(1, 2, figsize=(11, 4.5))
    ax[0].loglog(col("steady_q"), col("steady_w"), "*")
    ax[0].axvline(args.tol, color="k", ls="--")
    ax[0].axhline(args.tol, color="k", ls="--")
    ax[0].set_xlabel("steady-state |q_e|")
    ax[0].set_ylabel("steady-state |omega| (rad/s)")
    ax[1].loglog(col("mse_q"), col("mse_w"), "*")
    ax[1].axvline(args.mse_tol, color="k", ls="--")
    ax[1].set_xlabel("MSE q_e")
    ax[1].set_ylabel("MSE omega")
    for a in ax:
        a.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(os.path.join(out, "montecarlo.png"), dpi=150)


if __name__ == "__main__":
    main()
"#;

/// Writes `plot_run.py` and `plot_montecarlo.py` into `dir`.
pub fn write_plot_scripts(dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for (name, body) in [("plot_run.py", PLOT_RUN), ("plot_montecarlo.py", PLOT_MC)] {
        let p = dir.join(name);
        std::fs::write(&p, body)?;
        out.push(p);
    }
    Ok(out)
}
