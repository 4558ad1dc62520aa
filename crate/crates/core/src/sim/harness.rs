//! Closed-loop runs: data collection under the baseline PD law, offline
//! training, then the selected controller with optional online adaptation.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use crate::controller::{baseline_pd, control, Gain, GainSchedule};
use crate::dynamics::{nominal_angular_accel, state_input, true_uncertainty, AttitudeState, Plant};
use crate::error::{Error, Result};
use crate::gp::{gp_fit, rosgp_init, spgp_fit, Dataset, FitOptions, GpModel, RosgpState, SparseOptions, SpgpModel};

const NOISE_STREAM: u64 = 1;
const INDUCING_STREAM: u64 = 2;
const ONLINE_NOISE_STREAM: u64 = 3;

/// Independent 64-bit seed for one consumer of the scenario seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.random()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Baseline PD law throughout.
    Baseline,
    /// Variance-scheduled law with the offline full GP, no online update.
    FrozenGp,
    /// Variance-scheduled law with the sparse GP adapted online.
    Rosgp,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Baseline, Mode::FrozenGp, Mode::Rosgp];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::FrozenGp => "frozen-gp",
            Mode::Rosgp => "rosgp",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown mode {s:?} (expected baseline, frozen-gp or rosgp)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Collect,
    Online,
}

/// One sample of a run. The regression input of the row is
/// `(error vector part, omega, previous torque)`; `mu`, `variance` and
/// `delta_true` are all evaluated there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub phase: Phase,
    /// Inertial attitude `Q`.
    pub attitude: [f64; 4],
    /// Error quaternion `Q_e` with respect to the current desired attitude.
    pub error: [f64; 4],
    pub omega: [f64; 3],
    /// Torque applied over `[t, t + T_s)`.
    pub u: [f64; 3],
    pub mu: [f64; 3],
    pub variance: [f64; 3],
    pub delta_true: [f64; 3],
    /// `sqrt(‖ζ_p‖² + ‖ζ_d‖²)` (Frobenius) of the gains in use.
    pub gain_norm: f64,
    /// Wall-clock seconds spent on prediction, update and control.
    pub compute_time: f64,
}

impl StepRecord {
    pub fn error_vector(&self) -> Vector3<f64> {
        Vector3::new(self.error[1], self.error[2], self.error[3])
    }
    pub fn error_norm(&self) -> f64 {
        self.error_vector().norm()
    }
    pub fn omega_norm(&self) -> f64 {
        Vector3::from(self.omega).norm()
    }
    pub fn u_vec(&self) -> Vector3<f64> {
        Vector3::from(self.u)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub mode: Mode,
    pub seed: u64,
    pub sample_time: f64,
    pub collect_end: f64,
    pub records: Vec<StepRecord>,
    /// Time at which the plant diverged; the log stops there.
    pub diverged_at: Option<f64>,
    /// Hash of the training set the models were fitted on.
    pub dataset_hash: Option<String>,
}

impl RunLog {
    /// SHA-256 over every field except the wall-clock timings.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.mode.as_str());
        h.update(self.seed.to_le_bytes());
        h.update(self.sample_time.to_le_bytes());
        h.update(self.collect_end.to_le_bytes());
        h.update(self.diverged_at.unwrap_or(f64::NAN).to_le_bytes());
        h.update(self.dataset_hash.as_deref().unwrap_or(""));
        for r in &self.records {
            h.update([r.phase as u8]);
            let vals = [r.t]
                .iter()
                .chain(&r.attitude)
                .chain(&r.error)
                .chain(&r.omega)
                .chain(&r.u)
                .chain(&r.mu)
                .chain(&r.variance)
                .chain(&r.delta_true)
                .chain(std::iter::once(&r.gain_norm))
                .map(|v| v.to_le_bytes())
                .collect::<Vec<_>>();
            for v in vals {
                h.update(v);
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn collection_records(&self) -> &[StepRecord] {
        let n = self.records.iter().take_while(|r| r.phase == Phase::Collect).count();
        &self.records[..n]
    }
}

/// Builds the training set from the collection-phase rows: central
/// differences for `ω̇` inside the window, one-sided at its ends, minus the
/// nominal acceleration, plus seeded Gaussian noise.
pub fn dataset_from_records(cfg: &ScenarioConfig, records: &[StepRecord]) -> Result<Dataset> {
    let n = records.len();
    if n < 3 {
        return Err(Error::Scenario(format!("need at least three collection samples, got {n}")));
    }
    let ts = cfg.sample_time;
    let j0 = cfg.j_nominal();
    let j0_inv = j0.try_inverse().ok_or_else(|| Error::Config("nominal inertia is singular".into()))?;
    let w = |k: usize| Vector3::from(records[k].omega);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, NOISE_STREAM));
    let mut x = DMatrix::zeros(n, 9);
    let mut y = DMatrix::zeros(n, 3);
    let mut t = Vec::with_capacity(n);
    for k in 0..n {
        let wdot = if k == 0 {
            (w(1) - w(0)) / ts
        } else if k == n - 1 {
            (w(n - 1) - w(n - 2)) / ts
        } else {
            (w(k + 1) - w(k - 1)) / (2.0 * ts)
        };
        let r = &records[k];
        let u = r.u_vec();
        let resid = wdot - nominal_angular_accel(&w(k), &u, &j0, &j0_inv);
        let ev = r.error_vector();
        for (c, v) in ev.iter().chain(r.omega.iter()).chain(u.iter()).enumerate() {
            x[(k, c)] = *v;
        }
        for j in 0..3 {
            let e: f64 = rng.sample(StandardNormal);
            y[(k, j)] = resid[j] + cfg.gp.noise_std * e;
        }
        t.push(r.t);
    }
    Dataset::with_times(x, y, t)
}

/// Runs the collection phase and returns the training set.
pub fn collect_training_data(cfg: &ScenarioConfig) -> Result<Dataset> {
    cfg.validate()?;
    let log = simulate(cfg, Mode::Baseline, &Models::default(), Some(cfg.collect_steps()))?;
    if let Some(t) = log.diverged_at {
        return Err(Error::Scenario(format!("plant diverged during data collection at t = {t}")));
    }
    dataset_from_records(cfg, log.collection_records())
}

/// Offline models shared by the GP modes.
#[derive(Clone, Debug, Default)]
pub struct Models {
    pub full: Option<Arc<GpModel>>,
    pub sparse: Option<Arc<SpgpModel>>,
}

pub fn train_full(data: &Dataset) -> Result<GpModel> {
    gp_fit(data, None, &FitOptions::default())
}

pub fn sparse_options(cfg: &ScenarioConfig) -> SparseOptions {
    SparseOptions {
        num_inducing: cfg.gp.num_inducing,
        mode: cfg.gp.inducing_mode,
        seed: derive_seed(cfg.seed, INDUCING_STREAM),
        fit: FitOptions::default(),
    }
}

pub fn train_sparse(cfg: &ScenarioConfig, data: &Dataset) -> Result<SpgpModel> {
    spgp_fit(data, &sparse_options(cfg))
}

/// Seconds spent fitting each offline model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingTimes {
    pub full: Option<f64>,
    pub sparse: Option<f64>,
}

/// A scenario with its training set and the offline models its modes need.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub cfg: ScenarioConfig,
    pub dataset: Dataset,
    pub models: Models,
    pub training_times: TrainingTimes,
}

impl Experiment {
    /// Collects data and trains the models required by `modes`.
    pub fn prepare(cfg: &ScenarioConfig, modes: &[Mode]) -> Result<Self> {
        let dataset = collect_training_data(cfg)?;
        let mut models = Models::default();
        let mut times = TrainingTimes::default();
        if modes.contains(&Mode::FrozenGp) {
            let t0 = Instant::now();
            models.full = Some(Arc::new(train_full(&dataset)?));
            times.full = Some(t0.elapsed().as_secs_f64());
        }
        if modes.contains(&Mode::Rosgp) {
            let t0 = Instant::now();
            models.sparse = Some(Arc::new(train_sparse(cfg, &dataset)?));
            times.sparse = Some(t0.elapsed().as_secs_f64());
        }
        Ok(Self { cfg: cfg.clone(), dataset, models, training_times: times })
    }

    /// Uses already-trained models; they must have been fitted on this
    /// scenario's collection phase.
    pub fn with_models(cfg: &ScenarioConfig, models: Models) -> Result<Self> {
        let dataset = collect_training_data(cfg)?;
        let hash = dataset.hash();
        let hashes = models
            .full
            .iter()
            .map(|m| &m.dataset_hash)
            .chain(models.sparse.iter().map(|m| &m.dataset_hash));
        for h in hashes {
            if *h != hash {
                return Err(Error::Mismatch("model was trained on a different collection phase".into()));
            }
        }
        Ok(Self { cfg: cfg.clone(), dataset, models, training_times: TrainingTimes::default() })
    }

    /// Same models, different scenario (e.g. a later retarget); the
    /// collection phases must coincide.
    pub fn for_config(&self, cfg: &ScenarioConfig) -> Result<Self> {
        let mut e = Self::with_models(cfg, self.models.clone())?;
        e.training_times = self.training_times.clone();
        Ok(e)
    }

    pub fn run(&self, mode: Mode) -> Result<RunLog> {
        let mut log = simulate(&self.cfg, mode, &self.models, None)?;
        if mode != Mode::Baseline {
            log.dataset_hash = Some(self.dataset.hash());
        }
        Ok(log)
    }
}

/// Collects, trains what `mode` needs, and runs it.
pub fn run_scenario(cfg: &ScenarioConfig, mode: Mode) -> Result<RunLog> {
    Experiment::prepare(cfg, &[mode])?.run(mode)
}

enum Learner<'a> {
    None,
    Frozen(&'a GpModel),
    Online(RosgpState),
}

impl Learner<'_> {
    fn predict(&self, x: &[f64]) -> (Vector3<f64>, Vector3<f64>) {
        match self {
            Learner::None => (Vector3::zeros(), Vector3::zeros()),
            Learner::Frozen(m) => m.predict3(x),
            Learner::Online(s) => s.predict3(x),
        }
    }
}

fn gain_norm(kp: &Matrix3<f64>, kd: &Matrix3<f64>) -> f64 {
    (kp.norm_squared() + kd.norm_squared()).sqrt()
}

fn max_prior_std(sf2: impl Iterator<Item = f64>) -> f64 {
    sf2.fold(0.0, f64::max).sqrt()
}

/// The control loop. `stop_after` limits the run to that many samples.
fn simulate(cfg: &ScenarioConfig, mode: Mode, models: &Models, stop_after: Option<usize>) -> Result<RunLog> {
    cfg.validate()?;
    let truth = cfg.plant_truth()?;
    let mut plant = Plant::new(truth);
    plant.substeps = cfg.substeps;
    let ts = cfg.sample_time;
    let n_collect = cfg.collect_steps();
    let n_total = stop_after.unwrap_or(cfg.total_steps() + 1);
    let (kp0, kd0) = cfg.baseline_gains();
    let j0 = cfg.j_nominal();
    let j0_inv = *plant.truth.j_nominal_inv();

    let schedule: Option<GainSchedule> = match mode {
        Mode::Baseline => None,
        Mode::FrozenGp => {
            let m = models.full.as_ref().ok_or_else(|| Error::Scenario("frozen-gp mode needs a full GP".into()))?;
            Some(cfg.schedule(max_prior_std(m.dims.iter().map(|g| g.hyperparams.sigma_f2)))?)
        }
        Mode::Rosgp => {
            let m = models.sparse.as_ref().ok_or_else(|| Error::Scenario("rosgp mode needs a sparse GP".into()))?;
            Some(cfg.schedule(max_prior_std(m.dims.iter().map(|g| g.hyperparams.sigma_f2)))?)
        }
    };
    let mut online_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, ONLINE_NOISE_STREAM));

    let mut learner = Learner::None;
    let mut state = cfg.initial_state()?;
    let mut records = Vec::with_capacity(n_total);
    let mut diverged_at = None;
    let mut u_prev = Vector3::zeros();
    // previous sample: (error state, torque applied after it)
    let mut prev: Option<(AttitudeState, Vector3<f64>)> = None;

    for k in 0..n_total {
        let t = k as f64 * ts;
        let desired = cfg.desired_at_step(k)?;
        let err = state.relative_to(&desired)?;
        let x_in = state_input(&err, &u_prev);
        let phase = if k < n_collect { Phase::Collect } else { Phase::Online };
        let clock = Instant::now();

        let step = (|| -> Result<(Vector3<f64>, Vector3<f64>, Vector3<f64>, f64)> {
            if phase == Phase::Collect || schedule.is_none() {
                return Ok((baseline_pd(&err, &kp0, &kd0), Vector3::zeros(), Vector3::zeros(), gain_norm(&kp0, &kd0)));
            }
            let schedule = schedule.as_ref().expect("checked above");
            if matches!(learner, Learner::None) {
                learner = match mode {
                    Mode::FrozenGp => Learner::Frozen(models.full.as_deref().expect("checked above")),
                    Mode::Rosgp => Learner::Online(rosgp_init(
                        models.sparse.clone().expect("checked above"),
                        &cfg.rosgp.options(),
                    )?),
                    Mode::Baseline => unreachable!(),
                };
            }
            if let (Learner::Online(s), Some((e_prev, u_applied))) = (&mut learner, &prev) {
                let dw = (state.omega - e_prev.omega) / ts;
                let mut y = dw - nominal_angular_accel(&e_prev.omega, u_applied, &j0, &j0_inv);
                if cfg.rosgp.online_noise_std > 0.0 {
                    for v in y.iter_mut() {
                        let e: f64 = online_rng.sample(StandardNormal);
                        *v += cfg.rosgp.online_noise_std * e;
                    }
                }
                let x_prev = state_input(e_prev, u_applied);
                s.update(x_prev.as_slice(), y.as_slice())?;
            }
            let (mu, var) = learner.predict(x_in.as_slice());
            let var = var.map(|v| v.max(0.0));
            let u = control(&err, &mu, &var, schedule)?;
            let g = gain_norm(&schedule.zeta(Gain::Proportional, &var)?, &schedule.zeta(Gain::Derivative, &var)?);
            Ok((u, mu, var, g))
        })();
        let compute_time = clock.elapsed().as_secs_f64();
        let (u, mu, var, g) = match step {
            Ok(v) => v,
            Err(Error::Numerical(_)) => {
                diverged_at = Some(t);
                break;
            }
            Err(e) => return Err(e),
        };
        let delta = true_uncertainty(&state, &u_prev, t, &plant.truth).unwrap_or(Vector3::repeat(f64::NAN));
        records.push(StepRecord {
            t,
            phase,
            attitude: state.attitude.to_array(),
            error: err.attitude.to_array(),
            omega: state.omega.into(),
            u: u.into(),
            mu: mu.into(),
            variance: var.into(),
            delta_true: delta.into(),
            gain_norm: g,
            compute_time,
        });
        if k + 1 == n_total {
            break;
        }
        match plant.step(&state, &u, t, ts) {
            Ok(next) => state = next,
            Err(Error::Divergence { time }) => {
                diverged_at = Some(time);
                break;
            }
            Err(e) => return Err(e),
        }
        prev = Some((err, u));
        u_prev = u;
    }
    Ok(RunLog {
        mode,
        seed: cfg.seed,
        sample_time: ts,
        collect_end: cfg.phases.collect_end,
        records,
        diverged_at,
        dataset_hash: None,
    })
}
