//! FITC sparse GP with `M` inducing inputs per output dimension.
//!
//! With `V = L_M⁻¹ K_MN`, `Γ = diag(K_N − VᵀV)`, `Λ = Γ + σ_ε² I` and
//! `B = I + V Λ⁻¹ Vᵀ`, the training covariance is `Q_N + Λ` and
//! `Q_M = K_M + K_MN Λ⁻¹ K_NM = L_M B L_Mᵀ`. Everything is evaluated through
//! `L_M` and `L_B`; `K_M⁻¹` and `Q_M⁻¹` are never formed.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{std_dev, Dataset};
use super::full::{initial_hyperparams, FitDiagnostics, FitOptions};
use super::kernel::{cross_kernel, gram, kernel_vector, Hyperparams};
use super::optimizer::minimize_bounded;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_jitter, half_log_det};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InducingMode {
    /// Seeded random subset of the training inputs; only θ is optimized.
    #[default]
    FixedSubset,
    /// Inducing inputs are optimized together with θ, starting from the subset.
    Optimized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SparseOptions {
    pub num_inducing: usize,
    pub mode: InducingMode,
    /// Seed for the inducing subset draw.
    pub seed: u64,
    pub fit: FitOptions,
}

impl Default for SparseOptions {
    fn default() -> Self {
        Self { num_inducing: 50, mode: InducingMode::FixedSubset, seed: 0, fit: FitOptions::default() }
    }
}

struct Factor {
    l_m: DMatrix<f64>,
    l_b: DMatrix<f64>,
    gamma: DVector<f64>,
    lambda: DVector<f64>,
    /// `L_M⁻¹ K_MN`
    v: DMatrix<f64>,
    /// `L_B⁻¹ V Λ⁻¹ y`
    beta: DVector<f64>,
    jitter: f64,
}

fn factor(h: &Hyperparams, x: &DMatrix<f64>, y: &DVector<f64>, xu: &DMatrix<f64>) -> Result<(Factor, DMatrix<f64>, DMatrix<f64>)> {
    let n = x.nrows();
    let km = gram(xu, h);
    let kmn = cross_kernel(xu, x, h);
    let fm = cholesky_with_jitter(&km, h.sigma_f2)?;
    let l_m = fm.chol.l();
    let v = l_m
        .solve_lower_triangular(&kmn)
        .ok_or_else(|| Error::Numerical("inducing factor is singular".into()))?;
    let gamma = DVector::from_fn(n, |i, _| (h.sigma_f2 - v.column(i).norm_squared()).max(0.0));
    let lambda = gamma.add_scalar(h.sigma_eps2);
    let mut vl = v.clone();
    for i in 0..n {
        vl.column_mut(i).scale_mut(1.0 / lambda[i].sqrt());
    }
    let mut b = &vl * vl.transpose();
    for i in 0..b.nrows() {
        b[(i, i)] += 1.0;
    }
    let fb = cholesky_with_jitter(&b, 1.0)?;
    let l_b = fb.chol.l();
    let ylam = y.component_div(&lambda);
    let beta = l_b
        .solve_lower_triangular(&(&v * &ylam))
        .ok_or_else(|| Error::Numerical("FITC factor is singular".into()))?;
    Ok((Factor { l_m, l_b, gamma, lambda, v, beta, jitter: fm.jitter }, km, kmn))
}

fn lml_from(f: &Factor, y: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    let quad = y.iter().zip(f.lambda.iter()).map(|(a, l)| a * a / l).sum::<f64>() - f.beta.norm_squared();
    let logdet = f.lambda.iter().map(|l| l.ln()).sum::<f64>() + 2.0 * half_log_det(&f.l_b);
    -0.5 * quad - 0.5 * logdet - 0.5 * n * (2.0 * PI).ln()
}

/// FITC log marginal likelihood `ln N(y | 0, Q_N + Γ + σ_ε² I)`.
pub fn fitc_log_likelihood(h: &Hyperparams, x: &DMatrix<f64>, y: &DVector<f64>, xu: &DMatrix<f64>) -> Result<f64> {
    h.validate()?;
    Ok(lml_from(&factor(h, x, y, xu)?.0, y))
}

/// FITC log likelihood and its gradient. The first `2 + D` entries are
/// with respect to the log-hyperparameters; when `with_inducing` is set the
/// gradient with respect to the inducing coordinates follows, row-major
/// (`∂/∂x_u[m, d]` at index `2 + D + m·D + d`).
pub fn fitc_log_likelihood_grad(
    h: &Hyperparams,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    xu: &DMatrix<f64>,
    with_inducing: bool,
) -> Result<(f64, DVector<f64>)> {
    h.validate()?;
    let (f, km, kmn) = factor(h, x, y, xu)?;
    let lml = lml_from(&f, y);
    let (n, m, dim) = (x.nrows(), xu.nrows(), h.dim());

    // K_y⁻¹ = Λ⁻¹ − UᵀU with U = L_B⁻¹ V Λ⁻¹
    let mut vlam = f.v.clone();
    for i in 0..n {
        vlam.column_mut(i).scale_mut(1.0 / f.lambda[i]);
    }
    let u = f.l_b.solve_lower_triangular(&vlam).expect("checked in factor");
    let ut_beta = u.transpose() * &f.beta;
    let alpha = DVector::from_fn(n, |i, _| y[i] / f.lambda[i] - ut_beta[i]);
    let w_diag = DVector::from_fn(n, |i, _| alpha[i] * alpha[i] - (1.0 / f.lambda[i] - u.column(i).norm_squared()));

    // R = K_M⁻¹ K_MN = L_M⁻ᵀ V
    let r = f.l_m.transpose().solve_upper_triangular(&f.v).expect("checked in factor");
    let ra = &r * &alpha;
    let mut rlam = r.clone();
    for i in 0..n {
        rlam.column_mut(i).scale_mut(1.0 / f.lambda[i]);
    }
    // R W0 = (Rα)αᵀ − R K_y⁻¹ − R diag(w)
    let mut rw0 = &ra * alpha.transpose() - (rlam - (&r * u.transpose()) * &u);
    for i in 0..n {
        let wi = w_diag[i];
        rw0.column_mut(i).axpy(-wi, &r.column(i), 1.0);
    }
    let c = &rw0 * r.transpose();
    let sum_w: f64 = w_diag.sum();

    let nparams = 2 + dim + if with_inducing { m * dim } else { 0 };
    let mut g = DVector::zeros(nparams);
    g[0] = 0.5 * h.sigma_eps2 * sum_w;
    g[1] = 0.5 * (2.0 * kmn.component_mul(&rw0).sum() - km.component_mul(&c).sum() + h.sigma_f2 * sum_w);
    let inv_l2 = h.inv_sq_lengthscales();
    for d in 0..dim {
        let mut a = 0.0;
        for i in 0..n {
            for mm in 0..m {
                let diff = xu[(mm, d)] - x[(i, d)];
                a += kmn[(mm, i)] * diff * diff * rw0[(mm, i)];
            }
        }
        let mut b = 0.0;
        for j in 0..m {
            for mm in 0..m {
                let diff = xu[(mm, d)] - xu[(j, d)];
                b += km[(mm, j)] * diff * diff * c[(mm, j)];
            }
        }
        g[2 + d] = 0.5 * inv_l2[d] * (2.0 * a - b);
    }
    if with_inducing {
        for mm in 0..m {
            for d in 0..dim {
                let mut a = 0.0;
                for i in 0..n {
                    a += rw0[(mm, i)] * kmn[(mm, i)] * (x[(i, d)] - xu[(mm, d)]);
                }
                let mut b = 0.0;
                for j in 0..m {
                    b += c[(mm, j)] * km[(mm, j)] * (xu[(j, d)] - xu[(mm, d)]);
                }
                g[2 + dim + mm * dim + d] = 0.5 * inv_l2[d] * (2.0 * a - 2.0 * b);
            }
        }
    }
    Ok((lml, g))
}

/// Fitted FITC model for one output dimension.
#[derive(Clone, Debug)]
pub struct SparseGp {
    pub hyperparams: Hyperparams,
    pub diagnostics: FitDiagnostics,
    inducing: DMatrix<f64>,
    l_m: DMatrix<f64>,
    l_b: DMatrix<f64>,
    gamma: DVector<f64>,
    alpha0: DVector<f64>,
}

impl SparseGp {
    /// Conditions on `(x, y)` with fixed hyperparameters and inducing inputs.
    pub fn condition(x: &DMatrix<f64>, y: &DVector<f64>, inducing: DMatrix<f64>, hyperparams: Hyperparams) -> Result<Self> {
        hyperparams.validate()?;
        if y.len() != x.nrows() || x.ncols() != hyperparams.dim() || inducing.ncols() != hyperparams.dim() {
            return Err(Error::invalid("data shape does not match hyperparameters"));
        }
        if inducing.nrows() == 0 || inducing.nrows() > x.nrows() {
            return Err(Error::invalid(format!(
                "need 1 ≤ M ≤ N inducing inputs, got M = {}, N = {}",
                inducing.nrows(),
                x.nrows()
            )));
        }
        let (f, _, _) = factor(&hyperparams, x, y, &inducing)?;
        // α0 = Q_M⁻¹ K_MN Λ⁻¹ y = L_M⁻ᵀ L_B⁻ᵀ β
        let tmp = f.l_b.transpose().solve_upper_triangular(&f.beta).expect("checked in factor");
        let alpha0 = f.l_m.transpose().solve_upper_triangular(&tmp).expect("checked in factor");
        let mut diagnostics = FitDiagnostics {
            lml_init: f64::NAN,
            lml_final: lml_from(&f, y),
            iterations: 0,
            evaluations: 0,
            termination: None,
            warning: None,
            jitter: f.jitter,
        };
        diagnostics.lml_init = diagnostics.lml_final;
        Ok(Self { hyperparams, diagnostics, inducing, l_m: f.l_m, l_b: f.l_b, gamma: f.gamma, alpha0 })
    }

    pub fn fit(
        x: &DMatrix<f64>,
        y: &DVector<f64>,
        inducing: DMatrix<f64>,
        init: Option<Hyperparams>,
        mode: InducingMode,
        opts: &FitOptions,
    ) -> Result<Self> {
        if inducing.nrows() == 0 || inducing.nrows() > x.nrows() {
            return Err(Error::invalid(format!(
                "need 1 ≤ M ≤ N inducing inputs, got M = {}, N = {}",
                inducing.nrows(),
                x.nrows()
            )));
        }
        let init = init.unwrap_or_else(|| initial_hyperparams(x, y));
        init.validate()?;
        let dim = init.dim();
        let m = inducing.nrows();
        let hp0 = init.to_log();
        let (hlo, hhi) = opts.bounds(&hp0);
        let lml_init = fitc_log_likelihood(&init, x, y, &inducing)?;
        let with_inducing = mode == InducingMode::Optimized;

        let mut p0 = hp0.as_slice().to_vec();
        let mut lo = hlo.as_slice().to_vec();
        let mut hi = hhi.as_slice().to_vec();
        if with_inducing {
            for mm in 0..m {
                for d in 0..dim {
                    let col = x.column(d);
                    let s = std_dev(col.iter()).max(1e-12);
                    p0.push(inducing[(mm, d)]);
                    lo.push(col.min() - 2.0 * s);
                    hi.push(col.max() + 2.0 * s);
                }
            }
        }
        let unpack = |p: &DVector<f64>| -> Result<(Hyperparams, DMatrix<f64>)> {
            let h = Hyperparams::from_log(&p.as_slice()[..2 + dim])?;
            let xu = if with_inducing {
                DMatrix::from_row_slice(m, dim, &p.as_slice()[2 + dim..])
            } else {
                inducing.clone()
            };
            Ok((h, xu))
        };
        let objective = |p: &DVector<f64>| -> Result<(f64, DVector<f64>)> {
            let (h, xu) = unpack(p)?;
            let (v, g) = fitc_log_likelihood_grad(&h, x, y, &xu, with_inducing)?;
            Ok((-v, -g))
        };
        let res = minimize_bounded(
            objective,
            &DVector::from_vec(p0),
            &DVector::from_vec(lo),
            &DVector::from_vec(hi),
            &opts.optimizer,
        )?;
        let improved = -res.f > lml_init;
        let (hyp, xu) = if improved { unpack(&res.x)? } else { (init, inducing) };
        let mut gp = Self::condition(x, y, xu, hyp)?;
        gp.diagnostics.lml_init = lml_init;
        gp.diagnostics.iterations = res.iterations;
        gp.diagnostics.evaluations = res.evaluations;
        gp.diagnostics.termination = Some(res.termination);
        if !improved {
            log::warn!("FITC likelihood did not improve from its initialization");
            gp.diagnostics.warning = Some("optimizer did not improve on the initialization".into());
        }
        Ok(gp)
    }

    pub fn num_inducing(&self) -> usize {
        self.inducing.nrows()
    }

    pub fn inducing(&self) -> &DMatrix<f64> {
        &self.inducing
    }

    /// Weight vector `α0` with `μ(x*) = α0ᵀ k_M(x*)`.
    pub fn alpha0(&self) -> &DVector<f64> {
        &self.alpha0
    }

    /// Diagonal FITC correction `Γ` on the training inputs.
    pub fn gamma(&self) -> &DVector<f64> {
        &self.gamma
    }

    /// `[κ(x_u,m, x*)]_m`.
    pub fn kernel_slice(&self, xs: &[f64]) -> DVector<f64> {
        kernel_vector(&self.inducing, xs, &self.hyperparams)
    }

    /// `k** − k*ᵀ(K_M⁻¹ − Q_M⁻¹)k*` for a precomputed kernel slice, clamped
    /// to `[0, σ_f²]`.
    pub fn variance_from_slice(&self, k: &DVector<f64>) -> f64 {
        let a = self.l_m.solve_lower_triangular(k).expect("nonzero diagonal");
        let b = self.l_b.solve_lower_triangular(&a).expect("nonzero diagonal");
        let sf2 = self.hyperparams.sigma_f2;
        (sf2 - a.norm_squared() + b.norm_squared()).clamp(0.0, sf2)
    }

    pub fn predict_mean(&self, xs: &[f64]) -> f64 {
        self.kernel_slice(xs).dot(&self.alpha0)
    }

    pub fn predict(&self, xs: &[f64]) -> (f64, f64) {
        let k = self.kernel_slice(xs);
        (k.dot(&self.alpha0), self.variance_from_slice(&k))
    }
}

/// Per-dimension FITC models sharing one training set.
#[derive(Clone, Debug)]
pub struct SpgpModel {
    pub dims: Vec<SparseGp>,
    pub mode: InducingMode,
    pub dataset_hash: String,
}

/// Seeded draw of `m` distinct training rows, in ascending index order.
pub fn random_subset(x: &DMatrix<f64>, m: usize, seed: u64) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    if m == 0 || m > n {
        return Err(Error::invalid(format!("need 1 ≤ M ≤ N, got M = {m}, N = {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, m).into_vec();
    idx.sort_unstable();
    Ok(x.select_rows(idx.iter()))
}

pub fn spgp_fit(data: &Dataset, opts: &SparseOptions) -> Result<SpgpModel> {
    let m = opts.num_inducing;
    if m == 0 || m > data.len() {
        return Err(Error::invalid(format!("need 1 ≤ M ≤ N, got M = {m}, N = {}", data.len())));
    }
    let xu = random_subset(&data.x, m, opts.seed)?;
    let dims = (0..data.output_dim())
        .into_par_iter()
        .map(|j| SparseGp::fit(&data.x, &data.output(j), xu.clone(), None, opts.mode, &opts.fit))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpgpModel { dims, mode: opts.mode, dataset_hash: data.hash() })
}

impl SpgpModel {
    pub fn num_inducing(&self) -> usize {
        self.dims.first().map_or(0, |d| d.num_inducing())
    }

    pub fn predict(&self, xs: &[f64]) -> (DVector<f64>, DVector<f64>) {
        let (m, v): (Vec<f64>, Vec<f64>) = self.dims.iter().map(|g| g.predict(xs)).unzip();
        (DVector::from_vec(m), DVector::from_vec(v))
    }

    pub fn predict3(&self, xs: &[f64]) -> (Vector3<f64>, Vector3<f64>) {
        let (m, v) = self.predict(xs);
        (Vector3::from_iterator(m.iter().cloned()), Vector3::from_iterator(v.iter().cloned()))
    }

    pub fn hyperparams(&self) -> Vec<Hyperparams> {
        self.dims.iter().map(|g| g.hyperparams.clone()).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = SavedSpgp {
            kind: "spgp".into(),
            mode: self.mode,
            dataset_hash: self.dataset_hash.clone(),
            dims: self
                .dims
                .iter()
                .map(|g| SavedSparseDim {
                    hyperparams: g.hyperparams.clone(),
                    diagnostics: g.diagnostics.clone(),
                    inducing: g.inducing.row_iter().map(|r| r.iter().cloned().collect()).collect(),
                    alpha0: g.alpha0.iter().cloned().collect(),
                })
                .collect(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    /// Reloads a saved model against its training set (checked by hash).
    /// The stored `α0` is kept verbatim.
    pub fn load(path: &Path, data: &Dataset) -> Result<Self> {
        let file: SavedSpgp = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if file.kind != "spgp" {
            return Err(Error::Mismatch(format!("expected an spgp model file, found {:?}", file.kind)));
        }
        if file.dataset_hash != data.hash() {
            return Err(Error::Mismatch("dataset hash differs from the one the model was trained on".into()));
        }
        if file.dims.len() != data.output_dim() {
            return Err(Error::Mismatch("output dimension count differs".into()));
        }
        let dims = file
            .dims
            .into_iter()
            .enumerate()
            .map(|(j, d)| {
                let m = d.inducing.len();
                let flat: Vec<f64> = d.inducing.iter().flatten().cloned().collect();
                if m == 0 || flat.len() != m * data.input_dim() || d.alpha0.len() != m {
                    return Err(Error::Mismatch("inducing set or alpha0 has the wrong shape".into()));
                }
                let xu = DMatrix::from_row_slice(m, data.input_dim(), &flat);
                let mut g = SparseGp::condition(&data.x, &data.output(j), xu, d.hyperparams)?;
                g.alpha0 = DVector::from_vec(d.alpha0);
                g.diagnostics = d.diagnostics;
                Ok(g)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dims, mode: file.mode, dataset_hash: file.dataset_hash })
    }
}

#[derive(Serialize, Deserialize)]
struct SavedSparseDim {
    hyperparams: Hyperparams,
    diagnostics: FitDiagnostics,
    inducing: Vec<Vec<f64>>,
    alpha0: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SavedSpgp {
    kind: String,
    mode: InducingMode,
    dataset_hash: String,
    dims: Vec<SavedSparseDim>,
}
