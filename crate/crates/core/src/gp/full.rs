//! Exact GP regression, one independent model per output dimension.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{std_dev, Dataset};
use super::kernel::{gram, kernel_vector, Hyperparams};
use super::optimizer::{minimize_bounded, OptimizerOptions, Termination};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_jitter, half_log_det, spd_inverse_from_lower};

/// Box half-widths (in log space) around the initial hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub optimizer: OptimizerOptions,
    /// Allowed excursion of `ln σ_ε²` below / above its initial value.
    pub noise_range: (f64, f64),
    /// Allowed excursion of `ln σ_f²` below / above its initial value.
    pub signal_range: (f64, f64),
    /// Allowed excursion of each `ln λ_d` below / above its initial value.
    pub lengthscale_range: (f64, f64),
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            optimizer: OptimizerOptions::default(),
            noise_range: (16.0, 10.0),
            signal_range: (10.0, 10.0),
            lengthscale_range: (0.5, 7.0),
        }
    }
}

impl FitOptions {
    pub(crate) fn bounds(&self, init: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let n = init.len();
        let range = |i: usize| match i {
            0 => self.noise_range,
            1 => self.signal_range,
            _ => self.lengthscale_range,
        };
        (
            DVector::from_fn(n, |i, _| init[i] - range(i).0),
            DVector::from_fn(n, |i, _| init[i] + range(i).1),
        )
    }
}

/// What the hyperparameter search did for one output dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub lml_init: f64,
    pub lml_final: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Option<Termination>,
    /// Set when the optimizer could not improve on the initialization.
    pub warning: Option<String>,
    /// Absolute diagonal jitter that the final factorization needed.
    pub jitter: f64,
}

impl FitDiagnostics {
    fn unfitted() -> Self {
        Self {
            lml_init: f64::NAN,
            lml_final: f64::NAN,
            iterations: 0,
            evaluations: 0,
            termination: None,
            warning: None,
            jitter: 0.0,
        }
    }
}

/// Data-driven starting point: noise std = std(Y)/10, signal std = std(Y),
/// lengthscale_d = std(X_d). Degenerate spreads are floored.
pub fn initial_hyperparams(x: &DMatrix<f64>, y: &DVector<f64>) -> Hyperparams {
    let sy = std_dev(y.iter()).max(1e-6);
    let lengthscales = (0..x.ncols())
        .map(|d| {
            let s = std_dev(x.column(d).iter());
            if s > 1e-12 {
                s
            } else {
                1.0
            }
        })
        .collect();
    Hyperparams {
        sigma_eps2: (sy / 10.0).powi(2),
        sigma_f2: sy * sy,
        lengthscales,
    }
}

/// `ln p(y | X, θ)` and its gradient with respect to
/// `[ln σ_ε², ln σ_f², ln λ_1, …, ln λ_D]`.
pub fn log_marginal_likelihood(h: &Hyperparams, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    let (lml, grad, _) = lml_impl(h, x, y, true)?;
    Ok((lml, grad.expect("gradient requested")))
}

/// Value only; skips the `O(N³)` inverse.
pub fn log_marginal_likelihood_value(h: &Hyperparams, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    Ok(lml_impl(h, x, y, false)?.0)
}

fn lml_impl(
    h: &Hyperparams,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    with_grad: bool,
) -> Result<(f64, Option<DVector<f64>>, f64)> {
    h.validate()?;
    let n = x.nrows();
    if y.len() != n || x.ncols() != h.dim() {
        return Err(Error::invalid("data shape does not match hyperparameters"));
    }
    let k = gram(x, h);
    let mut ky = k.clone();
    for i in 0..n {
        ky[(i, i)] += h.sigma_eps2;
    }
    let f = cholesky_with_jitter(&ky, h.sigma_f2)?;
    let alpha = f.chol.solve(y);
    let lml = -0.5 * y.dot(&alpha) - half_log_det(f.chol.l_dirty()) - 0.5 * n as f64 * (2.0 * PI).ln();
    if !with_grad {
        return Ok((lml, None, f.jitter));
    }
    let kinv = spd_inverse_from_lower(&f.chol.l());
    let dim = h.dim();
    let inv_l2 = h.inv_sq_lengthscales();
    let xt = x.transpose();
    let mut g = DVector::zeros(2 + dim);
    let mut acc = vec![0.0; dim];
    let mut tr_w = 0.0;
    let mut wk = 0.0;
    // column-major walk over the strict upper triangle (i < j)
    for j in 0..n {
        let wjj = alpha[j] * alpha[j] - kinv[(j, j)];
        tr_w += wjj;
        wk += wjj * k[(j, j)];
        let xj = xt.column(j);
        let (kc, kic) = (k.column(j), kinv.column(j));
        for i in 0..j {
            let wij = 2.0 * (alpha[i] * alpha[j] - kic[i]) * kc[i];
            wk += wij;
            let xi = xt.column(i);
            for d in 0..dim {
                let diff = xi[d] - xj[d];
                acc[d] += wij * diff * diff;
            }
        }
    }
    g[0] = 0.5 * h.sigma_eps2 * tr_w;
    g[1] = 0.5 * wk;
    for d in 0..dim {
        g[2 + d] = 0.5 * acc[d] * inv_l2[d];
    }
    Ok((lml, Some(g), f.jitter))
}

/// Exact GP posterior for a single output.
#[derive(Clone, Debug)]
pub struct FullGp {
    pub hyperparams: Hyperparams,
    pub diagnostics: FitDiagnostics,
    x: DMatrix<f64>,
    l: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
}

impl FullGp {
    /// Conditions on `(x, y)` at fixed hyperparameters.
    pub fn condition(x: &DMatrix<f64>, y: &DVector<f64>, hyperparams: Hyperparams) -> Result<Self> {
        hyperparams.validate()?;
        if y.len() != x.nrows() || x.ncols() != hyperparams.dim() {
            return Err(Error::invalid("data shape does not match hyperparameters"));
        }
        let mut ky = gram(x, &hyperparams);
        for i in 0..x.nrows() {
            ky[(i, i)] += hyperparams.sigma_eps2;
        }
        let f = cholesky_with_jitter(&ky, hyperparams.sigma_f2)?;
        let alpha = f.chol.solve(y);
        let l = f.chol.l();
        let mut diagnostics = FitDiagnostics::unfitted();
        diagnostics.jitter = f.jitter;
        Ok(Self { hyperparams, diagnostics, x: x.clone(), l, alpha, jitter: f.jitter })
    }

    /// Maximizes the marginal likelihood from `init` (or the data-driven
    /// initialization) and conditions on the data.
    pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>, init: Option<Hyperparams>, opts: &FitOptions) -> Result<Self> {
        if x.nrows() < 2 {
            return Err(Error::invalid("fitting needs at least two samples"));
        }
        let init = init.unwrap_or_else(|| initial_hyperparams(x, y));
        init.validate()?;
        let p0 = init.to_log();
        let (lo, hi) = opts.bounds(&p0);
        let lml_init = log_marginal_likelihood_value(&init, x, y)?;
        let objective = |p: &DVector<f64>| -> Result<(f64, DVector<f64>)> {
            let h = Hyperparams::from_log(p.as_slice())?;
            let (v, g) = log_marginal_likelihood(&h, x, y)?;
            Ok((-v, -g))
        };
        let res = minimize_bounded(objective, &p0, &lo, &hi, &opts.optimizer)?;
        let (hyp, warning) = if -res.f > lml_init {
            (Hyperparams::from_log(res.x.as_slice())?, None)
        } else {
            log::warn!("marginal likelihood did not improve from its initialization");
            (init, Some("optimizer did not improve on the initialization".to_string()))
        };
        let lml_final = if warning.is_some() { lml_init } else { -res.f };
        let mut gp = Self::condition(x, y, hyp)?;
        gp.diagnostics = FitDiagnostics {
            lml_init,
            lml_final,
            iterations: res.iterations,
            evaluations: res.evaluations,
            termination: Some(res.termination),
            warning,
            jitter: gp.jitter,
        };
        Ok(gp)
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn predict_mean(&self, xs: &[f64]) -> f64 {
        kernel_vector(&self.x, xs, &self.hyperparams).dot(&self.alpha)
    }

    /// Posterior mean and variance, variance clamped to `[0, σ_f²]`.
    pub fn predict(&self, xs: &[f64]) -> (f64, f64) {
        let k = kernel_vector(&self.x, xs, &self.hyperparams);
        let mean = k.dot(&self.alpha);
        let v = self
            .l
            .solve_lower_triangular(&k)
            .expect("cholesky factor has a nonzero diagonal");
        let sf2 = self.hyperparams.sigma_f2;
        (mean, (sf2 - v.norm_squared()).clamp(0.0, sf2))
    }

    /// `½ ln |I + σ_ε⁻² K_N|` on the training inputs.
    pub fn info_gain(&self) -> f64 {
        let n = self.len() as f64;
        (half_log_det(&self.l) - 0.5 * n * self.hyperparams.sigma_eps2.ln()).max(0.0)
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }
}

/// Independent exact GPs, one per output column of the training set.
#[derive(Clone, Debug)]
pub struct GpModel {
    pub dims: Vec<FullGp>,
    pub dataset_hash: String,
}

/// Fits every output dimension (in parallel) by marginal-likelihood ascent.
pub fn gp_fit(data: &Dataset, init: Option<&[Hyperparams]>, opts: &FitOptions) -> Result<GpModel> {
    if data.len() < 2 {
        return Err(Error::invalid("fitting needs at least two samples"));
    }
    if let Some(init) = init {
        if init.len() != data.output_dim() {
            return Err(Error::invalid("one initial hyperparameter set per output is required"));
        }
    }
    let dims = (0..data.output_dim())
        .into_par_iter()
        .map(|j| FullGp::fit(&data.x, &data.output(j), init.map(|h| h[j].clone()), opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(GpModel { dims, dataset_hash: data.hash() })
}

impl GpModel {
    /// Conditions on `data` with given hyperparameters (no optimization).
    pub fn with_hyperparams(data: &Dataset, hyps: &[Hyperparams]) -> Result<Self> {
        if hyps.len() != data.output_dim() {
            return Err(Error::invalid("one hyperparameter set per output is required"));
        }
        let dims = hyps
            .iter()
            .enumerate()
            .map(|(j, h)| FullGp::condition(&data.x, &data.output(j), h.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dims, dataset_hash: data.hash() })
    }

    pub fn predict(&self, xs: &[f64]) -> (DVector<f64>, DVector<f64>) {
        let (m, v): (Vec<f64>, Vec<f64>) = self.dims.iter().map(|g| g.predict(xs)).unzip();
        (DVector::from_vec(m), DVector::from_vec(v))
    }

    /// Three-output convenience form used by the controller.
    pub fn predict3(&self, xs: &[f64]) -> (Vector3<f64>, Vector3<f64>) {
        let (m, v) = self.predict(xs);
        (Vector3::from_iterator(m.iter().cloned()), Vector3::from_iterator(v.iter().cloned()))
    }

    pub fn info_gain(&self) -> DVector<f64> {
        DVector::from_iterator(self.dims.len(), self.dims.iter().map(|g| g.info_gain()))
    }

    pub fn hyperparams(&self) -> Vec<Hyperparams> {
        self.dims.iter().map(|g| g.hyperparams.clone()).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = SavedGp {
            kind: "full-gp".into(),
            dataset_hash: self.dataset_hash.clone(),
            n: self.dims.first().map_or(0, |g| g.len()),
            dims: self
                .dims
                .iter()
                .map(|g| SavedDim { hyperparams: g.hyperparams.clone(), diagnostics: g.diagnostics.clone() })
                .collect(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    /// Reloads a saved model and re-conditions it on `data`, which must be
    /// the same training set (checked by hash).
    pub fn load(path: &Path, data: &Dataset) -> Result<Self> {
        let file: SavedGp = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if file.kind != "full-gp" {
            return Err(Error::Mismatch(format!("expected a full-gp model file, found {:?}", file.kind)));
        }
        if file.dataset_hash != data.hash() {
            return Err(Error::Mismatch("dataset hash differs from the one the model was trained on".into()));
        }
        let hyps: Vec<Hyperparams> = file.dims.iter().map(|d| d.hyperparams.clone()).collect();
        let mut model = Self::with_hyperparams(data, &hyps)?;
        for (g, d) in model.dims.iter_mut().zip(file.dims) {
            g.diagnostics = d.diagnostics;
        }
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct SavedDim {
    hyperparams: Hyperparams,
    diagnostics: FitDiagnostics,
}

#[derive(Serialize, Deserialize)]
struct SavedGp {
    kind: String,
    dataset_hash: String,
    n: usize,
    dims: Vec<SavedDim>,
}

/// Confidence scaling `β_j = sqrt(2‖Δ̆_j‖²_H + 300 γ_j ln³((N+1)/δ))`.
pub fn beta_bound(rkhs_norm: &[f64], gamma: &[f64], n: usize, delta: f64) -> Result<Vec<f64>> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    if rkhs_norm.len() != gamma.len() {
        return Err(Error::invalid("rkhs_norm and gamma lengths differ"));
    }
    if rkhs_norm.iter().chain(gamma).any(|v| !(*v >= 0.0)) {
        return Err(Error::invalid("rkhs_norm and gamma must be nonnegative"));
    }
    let l3 = ((n as f64 + 1.0) / delta).ln().powi(3);
    Ok(rkhs_norm
        .iter()
        .zip(gamma)
        .map(|(b, g)| (2.0 * b * b + 300.0 * g * l3).sqrt())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_lml_closed_form() {
        let h = Hyperparams::new(0.3, 1.7, vec![1.0]).unwrap();
        let x = DMatrix::from_element(1, 1, 0.4);
        let y = DVector::from_element(1, 0.0);
        let v = log_marginal_likelihood_value(&h, &x, &y).unwrap();
        assert!((v - (-0.5 * (2.0 * PI * 2.0).ln())).abs() < 1e-12);
    }

    #[test]
    fn single_point_posterior_mean() {
        let h = Hyperparams::new(0.2, 1.5, vec![0.7]).unwrap();
        let x = DMatrix::from_element(1, 1, 0.3);
        let y = DVector::from_element(1, 2.0);
        let gp = FullGp::condition(&x, &y, h.clone()).unwrap();
        let xs = [1.1];
        let k = super::super::kernel::kernel_seard(&[0.3], &xs, &h);
        let expected = k * 2.0 / (1.5 + 0.2);
        assert!((gp.predict_mean(&xs) - expected).abs() < 1e-12);
    }

    #[test]
    fn single_point_info_gain() {
        let h = Hyperparams::new(0.2, 1.5, vec![0.7]).unwrap();
        let gp = FullGp::condition(&DMatrix::from_element(1, 1, 0.3), &DVector::from_element(1, 1.0), h).unwrap();
        assert!((gp.info_gain() - 0.5 * (1.0 + 1.5 / 0.2f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn beta_bound_cases() {
        assert_eq!(beta_bound(&[0.0], &[0.0], 10, 0.5).unwrap(), vec![0.0]);
        let b = beta_bound(&[1.0], &[1.0], 499, 0.05).unwrap()[0];
        let expected = (2.0 + 300.0 * (500.0f64 / 0.05).ln().powi(3)).sqrt();
        assert!((b - expected).abs() < 1e-12 * expected);
        assert!(beta_bound(&[1.0], &[1.0], 10, 1.0).is_err());
        assert!(beta_bound(&[1.0], &[1.0], 10, 0.0).is_err());
    }
}
