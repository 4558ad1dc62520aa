//! Recursive online sparse GP: exponentially-weighted recursive least squares
//! on the inducing-kernel features of a frozen FITC model.
//!
//! Each step minimizes
//! `W(α) = Σ_i λ^{k−i} (y_i − αᵀk_i)² + ς λ^k ‖α − α[0]‖²`
//! without refactorizing anything; hyperparameters, inducing inputs and the
//! predictive variance stay those of the offline model.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::sparse::SpgpModel;
use crate::error::{Error, Result};
use crate::linalg::symmetrize;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RosgpOptions {
    /// Forgetting factor λ ∈ (0, 1].
    pub lambda: f64,
    /// Prior precision scale ς; `P[0] = ς⁻¹ I`.
    pub varsigma: f64,
    /// Scaling of the regression features the weights act on.
    pub features: FeatureScale,
}

impl Default for RosgpOptions {
    fn default() -> Self {
        Self { lambda: 0.999, varsigma: 0.01, features: FeatureScale::default() }
    }
}

/// Features of the recursive regression.
///
/// `Kernel` uses the kernel slice `k_M(x̃)` itself. `Unit` uses
/// `k_M(x̃) / σ_f²`, acting on the weights `σ_f² α`, so the predictor is
/// unchanged while `P = ς⁻¹ I` is measured in output units regardless of
/// the fitted signal variance. `α` itself is always stored in kernel units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureScale {
    Kernel,
    #[default]
    Unit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RosgpDim {
    /// Kernel weights; the mean is `αᵀ k_M(x̃)`.
    pub alpha: DVector<f64>,
    /// Inverse information of the regression features (see [`FeatureScale`]).
    pub p: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct RosgpState {
    model: Arc<SpgpModel>,
    pub dims: Vec<RosgpDim>,
    pub lambda: f64,
    pub varsigma: f64,
    pub features: FeatureScale,
    /// Number of applied updates.
    pub k: u64,
    /// Number of updates skipped because the measurement was not finite.
    pub skipped: u64,
}

/// `α = α0`, `P = ς⁻¹ I`, `k = 0`.
pub fn rosgp_init(model: Arc<SpgpModel>, opts: &RosgpOptions) -> Result<RosgpState> {
    if !(opts.varsigma > 0.0) || !opts.varsigma.is_finite() {
        return Err(Error::invalid(format!("varsigma must be positive, got {}", opts.varsigma)));
    }
    if opts.varsigma > 1.0 {
        log::warn!("varsigma = {} lies above 1", opts.varsigma);
    }
    if !(opts.lambda > 0.0 && opts.lambda <= 1.0) {
        return Err(Error::invalid(format!("forgetting factor must lie in (0, 1], got {}", opts.lambda)));
    }
    let dims = model
        .dims
        .iter()
        .map(|g| {
            let m = g.num_inducing();
            RosgpDim { alpha: g.alpha0().clone(), p: DMatrix::identity(m, m) / opts.varsigma }
        })
        .collect();
    Ok(RosgpState {
        model,
        dims,
        lambda: opts.lambda,
        varsigma: opts.varsigma,
        features: opts.features,
        k: 0,
        skipped: 0,
    })
}

fn feature_scale(f: FeatureScale, sigma_f2: f64) -> f64 {
    match f {
        FeatureScale::Kernel => 1.0,
        FeatureScale::Unit => sigma_f2,
    }
}

/// Rank-one RLS step on one output: returns the prior residual `y − αᵀk`.
pub fn rls_step(alpha: &mut DVector<f64>, p: &mut DMatrix<f64>, k: &DVector<f64>, y: f64, lambda: f64) -> f64 {
    scaled_rls_step(alpha, p, k, 1.0, y, lambda)
}

/// RLS step on the features `k / s` and weights `s α`, written in terms of `α`.
fn scaled_rls_step(alpha: &mut DVector<f64>, p: &mut DMatrix<f64>, k: &DVector<f64>, s: f64, y: f64, lambda: f64) -> f64 {
    let phi = k / s;
    let pk = &*p * &phi;
    let denom = lambda + phi.dot(&pk);
    let gain = &pk / denom;
    p.ger(-1.0, &gain, &pk, 1.0);
    *p /= lambda;
    symmetrize(p);
    let r = y - alpha.dot(k);
    alpha.axpy(r / s, &gain, 1.0);
    r
}

impl RosgpState {
    pub fn model(&self) -> &Arc<SpgpModel> {
        &self.model
    }

    fn scale(&self, j: usize) -> f64 {
        feature_scale(self.features, self.model.dims[j].hyperparams.sigma_f2)
    }

    /// Regression features of output `j` at `x_tilde`.
    pub fn features(&self, j: usize, x_tilde: &[f64]) -> DVector<f64> {
        self.model.dims[j].kernel_slice(x_tilde) / self.scale(j)
    }

    /// Weights acting on [`Self::features`]; `P` is their inverse information.
    pub fn feature_weights(&self, j: usize) -> DVector<f64> {
        &self.dims[j].alpha * self.scale(j)
    }

    /// Absorbs one measurement. Returns `false` (state untouched apart from
    /// the skip counter) when any component of `y` is not finite.
    pub fn update(&mut self, x_tilde: &[f64], y: &[f64]) -> Result<bool> {
        if y.len() != self.dims.len() {
            return Err(Error::invalid("measurement dimension does not match the model"));
        }
        if !y.iter().all(|v| v.is_finite()) || !x_tilde.iter().all(|v| v.is_finite()) {
            self.skipped += 1;
            return Ok(false);
        }
        for j in 0..self.dims.len() {
            let k = self.model.dims[j].kernel_slice(x_tilde);
            let s = self.scale(j);
            let d = &mut self.dims[j];
            scaled_rls_step(&mut d.alpha, &mut d.p, &k, s, y[j], self.lambda);
        }
        self.k += 1;
        Ok(true)
    }

    /// Mean `αᵀ k_M(x̃)` and the offline FITC variance.
    pub fn predict(&self, x_tilde: &[f64]) -> (DVector<f64>, DVector<f64>) {
        let (m, v): (Vec<f64>, Vec<f64>) = self
            .dims
            .iter()
            .zip(&self.model.dims)
            .map(|(d, g)| {
                let k = g.kernel_slice(x_tilde);
                (d.alpha.dot(&k), g.variance_from_slice(&k))
            })
            .unzip();
        (DVector::from_vec(m), DVector::from_vec(v))
    }

    pub fn predict3(&self, x_tilde: &[f64]) -> (Vector3<f64>, Vector3<f64>) {
        let (m, v) = self.predict(x_tilde);
        (Vector3::from_iterator(m.iter().cloned()), Vector3::from_iterator(v.iter().cloned()))
    }

    /// Writes `(α, P, k, λ, ς)` in a little-endian binary layout:
    /// magic, dims, M, k, skipped, feature scale (0 kernel, 1 unit), λ, ς,
    /// then per dimension α followed by P
    /// (column-major). The model's dataset hash is stored for checking.
    pub fn save_snapshot(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(SNAPSHOT_MAGIC);
        let hash = self.model.dataset_hash.as_bytes();
        buf.extend_from_slice(&(hash.len() as u64).to_le_bytes());
        buf.extend_from_slice(hash);
        let m = self.dims.first().map_or(0, |d| d.alpha.len());
        let fs = match self.features {
            FeatureScale::Kernel => 0,
            FeatureScale::Unit => 1,
        };
        for v in [self.dims.len() as u64, m as u64, self.k, self.skipped, fs] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in [self.lambda, self.varsigma] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for d in &self.dims {
            for v in d.alpha.iter().chain(d.p.iter()) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        std::fs::File::create(path)?.write_all(&buf)?;
        Ok(())
    }

    /// Restores a snapshot on top of the model it was taken from.
    pub fn load_snapshot(path: &Path, model: Arc<SpgpModel>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut rd = ByteReader { bytes: &bytes, pos: 0 };
        if rd.take(SNAPSHOT_MAGIC.len())? != SNAPSHOT_MAGIC {
            return Err(Error::Mismatch("not a ROSGP snapshot".into()));
        }
        let hlen = rd.u64()? as usize;
        let hash = String::from_utf8_lossy(rd.take(hlen)?).into_owned();
        if hash != model.dataset_hash {
            return Err(Error::Mismatch("snapshot was taken on a different model".into()));
        }
        let (ndim, m, k, skipped) = (rd.u64()? as usize, rd.u64()? as usize, rd.u64()?, rd.u64()?);
        let features = match rd.u64()? {
            0 => FeatureScale::Kernel,
            1 => FeatureScale::Unit,
            other => return Err(Error::Mismatch(format!("unknown feature scale tag {other}"))),
        };
        if ndim != model.dims.len() || m != model.num_inducing() {
            return Err(Error::Mismatch("snapshot shape does not match the model".into()));
        }
        let (lambda, varsigma) = (rd.f64()?, rd.f64()?);
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            let alpha = DVector::from_iterator(m, (0..m).map(|_| rd.f64()).collect::<Result<Vec<_>>>()?);
            let p = DMatrix::from_iterator(m, m, (0..m * m).map(|_| rd.f64()).collect::<Result<Vec<_>>>()?);
            dims.push(RosgpDim { alpha, p });
        }
        if rd.pos != bytes.len() {
            return Err(Error::Mismatch("trailing bytes in snapshot".into()));
        }
        Ok(Self { model, dims, lambda, varsigma, features, k, skipped })
    }
}

const SNAPSHOT_MAGIC: &[u8] = b"ROSGPSN1";

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Mismatch("truncated snapshot".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_residual_keeps_weights_and_contracts_p() {
        let mut alpha = DVector::from_vec(vec![0.3, -0.2]);
        let mut p = DMatrix::identity(2, 2) * 100.0;
        let k = DVector::from_vec(vec![0.5, 0.8]);
        let y = alpha.dot(&k);
        let before = alpha.clone();
        let p0 = p.clone();
        let r = rls_step(&mut alpha, &mut p, &k, y, 1.0);
        assert_eq!(r, 0.0);
        assert_eq!(alpha, before);
        assert!(k.dot(&(&p * &k)) < k.dot(&(&p0 * &k)));
    }

    #[test]
    fn scalar_two_step_closed_form() {
        // W(a) = (y1 − a k1)² + (y2 − a k2)² + ς (a − a0)², λ = 1
        let (k1, k2, y1, y2, s, a0) = (0.7, -0.4, 1.3, 0.2, 0.05, 0.25);
        let mut alpha = DVector::from_element(1, a0);
        let mut p = DMatrix::from_element(1, 1, 1.0 / s);
        rls_step(&mut alpha, &mut p, &DVector::from_element(1, k1), y1, 1.0);
        rls_step(&mut alpha, &mut p, &DVector::from_element(1, k2), y2, 1.0);
        let expected = (k1 * y1 + k2 * y2 + s * a0) / (k1 * k1 + k2 * k2 + s);
        assert!((alpha[0] - expected).abs() < 1e-14);
        assert!((p[(0, 0)] - 1.0 / (k1 * k1 + k2 * k2 + s)).abs() < 1e-14);
    }
}
