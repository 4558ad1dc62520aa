//! Randomized sweeps of the rosgp scenario over plant, target and gain
//! parameters.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::harness::{derive_seed, Experiment, Mode};
use super::metrics::{summarize, Metrics};
use crate::error::{Error, Result};

/// Closed interval `[lo, hi]`; `lo == hi` pins the value.
pub type Range = [f64; 2];

/// Sampling ranges. A `None` entry keeps the base scenario's value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McRanges {
    /// Target mass (kg). Default [50, 100].
    pub target_mass: Option<Range>,
    /// Each diagonal entry of J_t (kg·m²). Default [0, 100].
    pub target_inertia: Option<Range>,
    /// Initial attitude uniform on the unit quaternions. Default true.
    pub random_attitude: bool,
    /// Each component of ω₀ (rad/s). Default [−0.1, 0.1].
    pub omega: Option<Range>,
    /// Baseline `K_p / J_c0`. Default [0.08, 0.25].
    pub baseline_kp: Option<Range>,
    /// Baseline `K_d / J_c0`. Default [0.28, 0.55].
    pub baseline_kd: Option<Range>,
    /// Diagonal of `P[0]` (ς = 1/p). Default [1, 1000].
    pub p0: Option<Range>,
    /// `K_pt / J_t`. Default [0.01, 0.3].
    pub target_kp: Option<Range>,
    /// `K_dt / J_t`. Default [0.02, 0.8].
    pub target_kd: Option<Range>,
    /// Each component of the disturbance amplitude (N·m). Default [−0.5, 0.5].
    pub disturbance_amplitude: Option<Range>,
}

impl Default for McRanges {
    fn default() -> Self {
        Self {
            target_mass: Some([50.0, 100.0]),
            target_inertia: Some([0.0, 100.0]),
            random_attitude: true,
            omega: Some([-0.1, 0.1]),
            baseline_kp: Some([0.08, 0.25]),
            baseline_kd: Some([0.28, 0.55]),
            p0: Some([1.0, 1000.0]),
            target_kp: Some([0.01, 0.3]),
            target_kd: Some([0.02, 0.8]),
            disturbance_amplitude: Some([-0.5, 0.5]),
        }
    }
}

impl McRanges {
    /// Nothing randomized: every run is the base scenario.
    pub fn none() -> Self {
        Self {
            target_mass: None,
            target_inertia: None,
            random_attitude: false,
            omega: None,
            baseline_kp: None,
            baseline_kd: None,
            p0: None,
            target_kp: None,
            target_kd: None,
            disturbance_amplitude: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let named = [
            ("target_mass", self.target_mass),
            ("target_inertia", self.target_inertia),
            ("omega", self.omega),
            ("baseline_kp", self.baseline_kp),
            ("baseline_kd", self.baseline_kd),
            ("p0", self.p0),
            ("target_kp", self.target_kp),
            ("target_kd", self.target_kd),
            ("disturbance_amplitude", self.disturbance_amplitude),
        ];
        for (name, r) in named {
            if let Some([lo, hi]) = r {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::invalid(format!("range {name} = [{lo}, {hi}] is not an interval")));
                }
            }
        }
        let positive = [("target_mass", self.target_mass), ("p0", self.p0)];
        for (name, r) in positive {
            if matches!(r, Some([lo, _]) if lo <= 0.0) {
                return Err(Error::invalid(format!("range {name} must be positive")));
            }
        }
        if matches!(self.target_inertia, Some([lo, _]) if lo < 0.0) {
            return Err(Error::invalid("target inertia range must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloConfig {
    /// Number of runs. Default 50.
    pub runs: usize,
    /// Simulated time of every run (s); `None` keeps the base scenario's.
    /// Default 400.
    pub total: Option<f64>,
    /// Disturbance onset in the randomized runs (s). Default 150.
    pub disturbance_onset: f64,
    /// Steady-state threshold on `‖q_e‖` and `‖ω‖`. Default 1e-2.
    pub steady_tol: f64,
    /// Threshold on the `q_e` MSE. Default 1e-4.
    pub mse_tol: f64,
    pub ranges: McRanges,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self { runs: 50, total: Some(400.0), disturbance_onset: 150.0, steady_tol: 1e-2, mse_tol: 1e-4, ranges: McRanges::default() }
    }
}

/// Parameters actually used by one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McDraw {
    pub target_mass: f64,
    pub target_inertia: [f64; 3],
    pub attitude: [f64; 4],
    pub omega: [f64; 3],
    pub baseline_kp: f64,
    pub baseline_kd: f64,
    pub p0: f64,
    pub target_kp: f64,
    pub target_kd: f64,
    pub disturbance_amplitude: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McRun {
    pub index: usize,
    pub draw: McDraw,
    /// Missing when collection, training or the run itself failed.
    pub metrics: Option<Metrics>,
    pub error: Option<String>,
    pub converged: bool,
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub runs: Vec<McRun>,
    /// Fraction of runs meeting the steady-state and MSE thresholds.
    pub success_rate: f64,
    pub failed: usize,
    pub steady_q_median: f64,
    pub steady_q_max: f64,
    pub mse_q_median: f64,
    pub mse_q_max: f64,
    pub wall_time: f64,
}

fn uniform(rng: &mut ChaCha8Rng, r: Range) -> f64 {
    r[0] + (r[1] - r[0]) * rng.random::<f64>()
}

fn pick(rng: &mut ChaCha8Rng, r: Option<Range>, base: f64) -> f64 {
    r.map_or(base, |r| uniform(rng, r))
}

fn pick3(rng: &mut ChaCha8Rng, r: Option<Range>, base: [f64; 3]) -> [f64; 3] {
    match r {
        Some(r) => [0; 3].map(|_| uniform(rng, r)),
        None => base,
    }
}

/// Stream offset keeping the per-run draws apart from the scenario's own
/// noise streams.
const DRAW_STREAM: u64 = 1 << 32;

/// Scenario and parameters of run `index`: a pure function of the base
/// seed and the index.
pub fn draw_scenario(base: &ScenarioConfig, mc: &MonteCarloConfig, index: usize) -> Result<(ScenarioConfig, McDraw)> {
    let r = &mc.ranges;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(base.seed, DRAW_STREAM + index as u64));
    let mut cfg = base.clone();
    if let Some(t) = mc.total {
        cfg.phases.total = t;
    }
    let asm = &base.plant.assembly;
    let attitude = if r.random_attitude {
        let v: [f64; 4] = [0; 4].map(|_| rng.sample(StandardNormal));
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.map(|x| x / n)
    } else {
        cfg.initial_attitude()?.to_array()
    };
    let draw = McDraw {
        target_mass: pick(&mut rng, r.target_mass, asm.target_mass),
        target_inertia: pick3(&mut rng, r.target_inertia, asm.target_inertia),
        attitude,
        omega: pick3(&mut rng, r.omega, base.initial.omega),
        baseline_kp: pick(&mut rng, r.baseline_kp, base.baseline.kp_ratio),
        baseline_kd: pick(&mut rng, r.baseline_kd, base.baseline.kd_ratio),
        p0: pick(&mut rng, r.p0, 1.0 / base.rosgp.varsigma),
        target_kp: pick(&mut rng, r.target_kp, base.plant.target.kp_ratio),
        target_kd: pick(&mut rng, r.target_kd, base.plant.target.kd_ratio),
        disturbance_amplitude: pick3(&mut rng, r.disturbance_amplitude, base.plant.disturbance.amplitude),
    };
    cfg.plant.assembly.target_mass = draw.target_mass;
    cfg.plant.assembly.target_inertia = draw.target_inertia;
    cfg.initial.quaternion = Some(draw.attitude);
    cfg.initial.omega = draw.omega;
    cfg.baseline.kp_ratio = draw.baseline_kp;
    cfg.baseline.kd_ratio = draw.baseline_kd;
    if r.p0.is_some() {
        cfg.rosgp.varsigma = 1.0 / draw.p0;
    }
    cfg.plant.target.kp_ratio = draw.target_kp;
    cfg.plant.target.kd_ratio = draw.target_kd;
    if r.disturbance_amplitude.is_some() {
        cfg.plant.disturbance.enabled = true;
        cfg.plant.disturbance.onset = mc.disturbance_onset;
    }
    cfg.plant.disturbance.amplitude = draw.disturbance_amplitude;
    Ok((cfg, draw))
}

fn run_one(base: &ScenarioConfig, mc: &MonteCarloConfig, index: usize) -> Result<McRun> {
    let t0 = Instant::now();
    let (cfg, draw) = draw_scenario(base, mc, index)?;
    let outcome = Experiment::prepare(&cfg, &[Mode::Rosgp])
        .and_then(|e| e.run(Mode::Rosgp))
        .and_then(|log| summarize(&log, &cfg.metrics));
    let (metrics, error) = match outcome {
        Ok(m) => (Some(m), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let converged = metrics.as_ref().is_some_and(|m| m.converged(mc.steady_tol, mc.mse_tol));
    Ok(McRun { index, draw, metrics, error, converged, wall_time: t0.elapsed().as_secs_f64() })
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs `mc.runs` randomized rosgp scenarios in parallel. Runs that fail are
/// recorded with their error and count as not converged.
pub fn monte_carlo(base: &ScenarioConfig, mc: &MonteCarloConfig) -> Result<McSummary> {
    base.validate()?;
    mc.ranges.validate()?;
    if mc.runs == 0 {
        return Err(Error::invalid("Monte Carlo needs at least one run"));
    }
    let t0 = Instant::now();
    let runs = (0..mc.runs).into_par_iter().map(|i| run_one(base, mc, i)).collect::<Result<Vec<_>>>()?;
    let ok: Vec<&Metrics> = runs.iter().filter_map(|r| r.metrics.as_ref()).collect();
    let steady: Vec<f64> = ok.iter().map(|m| m.steady_q).collect();
    let mse: Vec<f64> = ok.iter().map(|m| m.mse_q).collect();
    let max = |v: &[f64]| v.iter().cloned().fold(f64::NAN, f64::max);
    Ok(McSummary {
        success_rate: runs.iter().filter(|r| r.converged).count() as f64 / runs.len() as f64,
        failed: runs.iter().filter(|r| r.metrics.is_none()).count(),
        steady_q_median: median(steady.clone()),
        steady_q_max: max(&steady),
        mse_q_median: median(mse.clone()),
        mse_q_max: max(&mse),
        wall_time: t0.elapsed().as_secs_f64(),
        runs,
    })
}
