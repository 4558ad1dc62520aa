//! Scenario description read from TOML. Every field has a default; an empty
//! file is the attitude stabilization scenario.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::controller::{BoundConfig, GainSchedule};
use crate::dynamics::{
    Assembly, AttitudeState, Disturbance, PlantTruth, TargetManeuver, UncertaintyForm, UnitQuaternion,
};
use super::montecarlo::MonteCarloConfig;
use crate::error::{Error, Result};
use crate::gp::{FeatureScale, InducingMode, RosgpOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Seeds the training noise and the inducing-point draw. Default 1.
    pub seed: u64,
    /// Sampling (and control) period T_s in seconds. Default 0.1.
    pub sample_time: f64,
    /// RK4 substeps per sampling period. Default 10.
    pub substeps: usize,
    pub phases: Phases,
    pub initial: InitialCondition,
    pub plant: PlantConfig,
    pub baseline: BaselineGains,
    pub gp: GpConfig,
    pub rosgp: RosgpConfig,
    pub controller: ControllerConfig,
    pub metrics: MetricsConfig,
    pub montecarlo: MonteCarloConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            sample_time: 0.1,
            substeps: 10,
            phases: Phases::default(),
            initial: InitialCondition::default(),
            plant: PlantConfig::default(),
            baseline: BaselineGains::default(),
            gp: GpConfig::default(),
            rosgp: RosgpConfig::default(),
            controller: ControllerConfig::default(),
            metrics: MetricsConfig::default(),
            montecarlo: MonteCarloConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Phases {
    /// End of the data-collection phase under the baseline controller (s).
    /// Default 50.
    pub collect_end: f64,
    /// Time at which the desired attitude switches to `retarget_desired`
    /// (s). Default: none.
    pub retarget_time: Option<f64>,
    /// Simulated duration (s). Default 150.
    pub total: f64,
    /// Desired attitude before the retarget. Default identity.
    pub desired: [f64; 4],
    /// Desired attitude after the retarget. Default [0.899, −0.30, 0.20, −0.10].
    pub retarget_desired: [f64; 4],
}

impl Default for Phases {
    fn default() -> Self {
        Self {
            collect_end: 50.0,
            retarget_time: None,
            total: 150.0,
            desired: [1.0, 0.0, 0.0, 0.0],
            retarget_desired: [0.899, -0.30, 0.20, -0.10],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialCondition {
    /// Z-Y-X Euler angles `[roll, pitch, yaw]` in degrees. Default [15, 5, −20].
    pub euler_deg: [f64; 3],
    /// Overrides `euler_deg` when set (scalar-first quaternion).
    pub quaternion: Option<[f64; 4]>,
    /// Body rate (rad/s). Default [0.01, 0.02, −0.01].
    pub omega: [f64; 3],
}

impl Default for InitialCondition {
    fn default() -> Self {
        Self { euler_deg: [15.0, 5.0, -20.0], quaternion: None, omega: [0.01, 0.02, -0.01] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    /// Nominal inertia J_c0 (kg·m², rows). Default diag(600, 450, 600).
    pub j_nominal: [[f64; 3]; 3],
    /// Inertia error J̃_c. Default: none, derived from `assembly`.
    pub j_tilde: Option<[[f64; 3]; 3]>,
    /// Upper bound λ_J on λ_max(J_c0). Default: λ_max(J_c0).
    pub lambda_j: Option<f64>,
    /// Lower bound λ_c on λ_min(J_c0). Default: λ_min(J_c0).
    pub lambda_c: Option<f64>,
    /// Algebraic form of the lumped uncertainty. Default `as-printed`.
    pub form: UncertaintyForm,
    pub assembly: AssemblyConfig,
    pub target: TargetConfig,
    /// External disturbance torque. Default disabled, onset 150 s.
    pub disturbance: Disturbance,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            j_nominal: rows(&Matrix3::from_diagonal(&Vector3::new(600.0, 450.0, 600.0))),
            j_tilde: None,
            lambda_j: None,
            lambda_c: None,
            form: UncertaintyForm::default(),
            assembly: AssemblyConfig::default(),
            target: TargetConfig::default(),
            disturbance: Disturbance::default(),
        }
    }
}

/// Lumped mass properties of the servicer + arms + target stack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssemblyConfig {
    /// Servicer principal inertia (kg·m²). Default [405, 405, 405].
    pub servicer_inertia: [f64; 3],
    /// Default 1080 kg.
    pub servicer_mass: f64,
    /// Target principal inertia J_t (kg·m²). Default [36.8, 37.5, 36.8].
    pub target_inertia: [f64; 3],
    /// Default 75 kg.
    pub target_mass: f64,
    /// Servicer CoM to target CoM in the body frame (m). Default [0.2, 2.0, 0.1].
    pub offset: [f64; 3],
    /// Manipulator arms as a fixed diagonal inertia (kg·m²). Default [10, 40, 40].
    pub arm_inertia: [f64; 3],
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        Self {
            servicer_inertia: [405.0; 3],
            servicer_mass: 1080.0,
            target_inertia: [36.8, 37.5, 36.8],
            target_mass: 75.0,
            offset: [0.2, 2.0, 0.1],
            arm_inertia: [10.0, 40.0, 40.0],
        }
    }
}

impl AssemblyConfig {
    pub fn assembly(&self) -> Assembly {
        Assembly {
            servicer_inertia: diag(self.servicer_inertia),
            servicer_mass: self.servicer_mass,
            target_inertia: diag(self.target_inertia),
            target_mass: self.target_mass,
            offset: Vector3::from(self.offset),
            arm_inertia: diag(self.arm_inertia),
        }
    }
}

/// The captured target's attitude-hold loop, `K_pt = kp_ratio · J_t`,
/// `K_dt = kd_ratio · J_t`. It holds its own initial attitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetConfig {
    /// Default true.
    pub enabled: bool,
    /// Default 0.02.
    pub kp_ratio: f64,
    /// Default 0.05.
    pub kd_ratio: f64,
    /// Target body frame relative to the combined frame. Default identity.
    pub mount: [f64; 4],
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self { enabled: true, kp_ratio: 0.02, kd_ratio: 0.05, mount: [1.0, 0.0, 0.0, 0.0] }
    }
}

/// Baseline PD gains as multiples of J_c0: `K_p = kp_ratio · J_c0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineGains {
    /// Default 0.1.
    pub kp_ratio: f64,
    /// Default 0.3.
    pub kd_ratio: f64,
}

impl Default for BaselineGains {
    fn default() -> Self {
        Self { kp_ratio: 0.1, kd_ratio: 0.3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    /// Training-set size N; must equal `collect_end / sample_time`. Default 500.
    pub n: usize,
    /// Inducing inputs M of the sparse model. Default 50.
    pub num_inducing: usize,
    /// Standard deviation of the noise added to training outputs (rad/s²).
    /// Default 0.05.
    pub noise_std: f64,
    /// `fixed-subset` (default) or `optimized`.
    pub inducing_mode: InducingMode,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self { n: 500, num_inducing: 50, noise_std: 0.05, inducing_mode: InducingMode::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RosgpConfig {
    /// Forgetting factor λ. Default 0.999.
    pub lambda: f64,
    /// Prior precision scale ς, `P[0] = ς⁻¹ I`. Default 0.01.
    pub varsigma: f64,
    /// `unit` (default) or `kernel`, see [`FeatureScale`].
    pub features: FeatureScale,
    /// Noise added to the online observations (rad/s²). Default 0.
    pub online_noise_std: f64,
}

impl Default for RosgpConfig {
    fn default() -> Self {
        let o = RosgpOptions::default();
        Self { lambda: o.lambda, varsigma: o.varsigma, features: o.features, online_noise_std: 0.0 }
    }
}

impl RosgpConfig {
    pub fn options(&self) -> RosgpOptions {
        RosgpOptions { lambda: self.lambda, varsigma: self.varsigma, features: self.features }
    }
}

/// Gain schedule `ζ = J_c0 (k̆ + c Σ^{1/2})` and bound-diagnostic settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    /// k̆_p. Default 0.02.
    pub k_p: f64,
    /// k̆_d. Default 0.05.
    pub k_d: f64,
    /// c_p. Default 0.1.
    pub c_p: f64,
    /// c_d. Default 0.2.
    pub c_d: f64,
    /// Cap on Σ^{1/2} in the schedule. Default: the largest prior standard
    /// deviation σ_f of the trained model, which the variance never exceeds.
    pub clamp: Option<f64>,
    /// ν, δ and RKHS norms for the ultimate-bound diagnostics.
    pub bounds: BoundConfig,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self { k_p: 0.02, k_d: 0.05, c_p: 0.1, c_d: 0.2, clamp: None, bounds: BoundConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Steady-state window as a fraction of the run. Default 0.2.
    pub steady_fraction: f64,
    /// Window (s, counted back from the end) for the estimation-error
    /// averages. Default 50.
    pub estimation_window: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { steady_fraction: 0.2, estimation_window: 50.0 }
    }
}

fn diag(d: [f64; 3]) -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::from(d))
}

fn rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    [0, 1, 2].map(|i| [0, 1, 2].map(|j| m[(i, j)]))
}

fn matrix(r: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| r[i][j])
}

impl ScenarioConfig {
    /// Attitude stabilization from the default initial condition, 150 s,
    /// with forgetting factor 0.995.
    pub fn stabilization() -> Self {
        let mut c = Self::default();
        c.rosgp.lambda = 0.995;
        c
    }

    /// Stabilization for 150 s, then a retarget to a new attitude with the
    /// sinusoidal disturbance switched on, 400 s in total.
    pub fn remaneuver() -> Self {
        let mut c = Self::stabilization();
        c.phases.retarget_time = Some(150.0);
        c.phases.total = 400.0;
        c.plant.disturbance.enabled = true;
        c.plant.disturbance.onset = 150.0;
        c.metrics.estimation_window = 100.0;
        c
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.sample_time > 0.0) || !self.sample_time.is_finite() {
            return bad(format!("sample_time must be positive, got {}", self.sample_time));
        }
        if self.substeps == 0 {
            return bad("substeps must be at least 1".into());
        }
        let p = &self.phases;
        if !(p.collect_end > 0.0 && p.collect_end < p.total) {
            return bad(format!("need 0 < collect_end < total, got {} and {}", p.collect_end, p.total));
        }
        if let Some(r) = p.retarget_time {
            if !(r > p.collect_end && r < p.total) {
                return bad(format!("retarget_time {r} must lie strictly between collect_end and total"));
            }
        }
        if self.collect_steps() != self.gp.n {
            return bad(format!(
                "gp.n = {} does not match collect_end / sample_time = {}",
                self.gp.n,
                self.collect_steps()
            ));
        }
        if self.gp.n < 3 {
            return bad("need at least three training samples".into());
        }
        if self.gp.num_inducing == 0 || self.gp.num_inducing > self.gp.n {
            return bad(format!("num_inducing must lie in 1..={}", self.gp.n));
        }
        if !(self.gp.noise_std >= 0.0) || !(self.rosgp.online_noise_std >= 0.0) {
            return bad("noise levels must be nonnegative".into());
        }
        if !(self.metrics.steady_fraction > 0.0 && self.metrics.steady_fraction <= 1.0) {
            return bad("metrics.steady_fraction must lie in (0, 1]".into());
        }
        self.desired_at(0.0)?;
        self.desired_at(f64::INFINITY)?;
        self.initial_state()?;
        self.plant_truth()?;
        UnitQuaternion::from_array(self.plant.target.mount)?;
        Ok(())
    }

    /// Number of samples in the collection phase.
    pub fn collect_steps(&self) -> usize {
        (self.phases.collect_end / self.sample_time).round() as usize
    }

    /// Number of sampling periods in the whole run.
    pub fn total_steps(&self) -> usize {
        (self.phases.total / self.sample_time).round() as usize
    }

    pub fn retarget_step(&self) -> Option<usize> {
        self.phases.retarget_time.map(|r| (r / self.sample_time).round() as usize)
    }

    pub fn desired_at(&self, t: f64) -> Result<UnitQuaternion> {
        let q = match self.phases.retarget_time {
            Some(r) if t >= r - 1e-9 => self.phases.retarget_desired,
            _ => self.phases.desired,
        };
        UnitQuaternion::from_array(q)
    }

    /// Desired attitude at sample `k` (switches exactly on the retarget sample).
    pub fn desired_at_step(&self, k: usize) -> Result<UnitQuaternion> {
        let q = match self.retarget_step() {
            Some(r) if k >= r => self.phases.retarget_desired,
            _ => self.phases.desired,
        };
        UnitQuaternion::from_array(q)
    }

    pub fn initial_attitude(&self) -> Result<UnitQuaternion> {
        match self.initial.quaternion {
            Some(q) => UnitQuaternion::from_array(q),
            None => UnitQuaternion::from_euler_zyx_deg(self.initial.euler_deg),
        }
    }

    pub fn initial_state(&self) -> Result<AttitudeState> {
        Ok(AttitudeState::new(self.initial_attitude()?, Vector3::from(self.initial.omega)))
    }

    pub fn j_nominal(&self) -> Matrix3<f64> {
        matrix(&self.plant.j_nominal)
    }

    /// `J_c − J_c0`: the explicit override, or the assembly inertia minus
    /// the nominal one.
    pub fn j_tilde(&self) -> Result<Matrix3<f64>> {
        if let Some(jt) = &self.plant.j_tilde {
            return Ok(matrix(jt));
        }
        let mount = UnitQuaternion::from_array(self.plant.target.mount)?;
        Ok(self.plant.assembly.assembly().inertia(&mount) - self.j_nominal())
    }

    pub fn plant_truth(&self) -> Result<PlantTruth> {
        let bounds = match (self.plant.lambda_j, self.plant.lambda_c) {
            (None, None) => None,
            (lj, lc) => {
                let (lo, hi) = crate::linalg::sym3_eig_range(&self.j_nominal());
                Some((lj.unwrap_or(hi), lc.unwrap_or(lo)))
            }
        };
        let mut truth = PlantTruth::new(self.j_nominal(), self.j_tilde()?, bounds)?;
        truth.form = self.plant.form;
        truth.disturbance = self.plant.disturbance.clone();
        let t = &self.plant.target;
        if t.enabled {
            let jt = diag(self.plant.assembly.target_inertia);
            let mount = UnitQuaternion::from_array(t.mount)?;
            truth.target = Some(TargetManeuver {
                k_p: jt * t.kp_ratio,
                k_d: jt * t.kd_ratio,
                reference: self.initial_attitude()?.product(&mount)?,
                mount,
            });
        }
        Ok(truth)
    }

    /// `(K_p0, K_d0)` of the baseline PD law.
    pub fn baseline_gains(&self) -> (Matrix3<f64>, Matrix3<f64>) {
        let j = self.j_nominal();
        (j * self.baseline.kp_ratio, j * self.baseline.kd_ratio)
    }

    /// Gain schedule with the configured clamp, or `default_clamp` when none
    /// is configured.
    pub fn schedule(&self, default_clamp: f64) -> Result<GainSchedule> {
        let c = &self.controller;
        GainSchedule::new(c.k_p, c.k_d, c.c_p, c.c_d, self.j_nominal(), c.clamp.unwrap_or(default_clamp))
    }

    /// Bound configuration with the plant's λ_J, λ_c filled in when unset.
    pub fn bound_config(&self) -> BoundConfig {
        let mut b = self.controller.bounds.clone();
        b.lambda_j = b.lambda_j.or(self.plant.lambda_j);
        b.lambda_c = b.lambda_c.or(self.plant.lambda_c);
        b
    }
}
