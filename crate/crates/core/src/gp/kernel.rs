//! Squared-exponential ARD kernel and its hyperparameters.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel hyperparameters for one output dimension.
///
/// The optimizer works on `[ln σ_ε², ln σ_f², ln λ_1, …, ln λ_D]`; see
/// [`Hyperparams::to_log`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub sigma_eps2: f64,
    pub sigma_f2: f64,
    pub lengthscales: Vec<f64>,
}

impl Hyperparams {
    pub fn new(sigma_eps2: f64, sigma_f2: f64, lengthscales: Vec<f64>) -> Result<Self> {
        let h = Self { sigma_eps2, sigma_f2, lengthscales };
        h.validate()?;
        Ok(h)
    }

    pub fn isotropic(sigma_eps2: f64, sigma_f2: f64, lengthscale: f64, dim: usize) -> Result<Self> {
        Self::new(sigma_eps2, sigma_f2, vec![lengthscale; dim])
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.sigma_eps2) || !ok(self.sigma_f2) || !self.lengthscales.iter().all(|&l| ok(l)) {
            return Err(Error::invalid(format!("hyperparameters must be finite and positive: {self:?}")));
        }
        if self.lengthscales.is_empty() {
            return Err(Error::invalid("at least one lengthscale is required"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn to_log(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(2 + self.dim());
        v.push(self.sigma_eps2.ln());
        v.push(self.sigma_f2.ln());
        v.extend(self.lengthscales.iter().map(|l| l.ln()));
        DVector::from_vec(v)
    }

    pub fn from_log(p: &[f64]) -> Result<Self> {
        if p.len() < 3 {
            return Err(Error::invalid("log-hyperparameter vector too short"));
        }
        Self::new(p[0].exp(), p[1].exp(), p[2..].iter().map(|v| v.exp()).collect())
    }

    pub(crate) fn inv_sq_lengthscales(&self) -> Vec<f64> {
        self.lengthscales.iter().map(|l| 1.0 / (l * l)).collect()
    }
}

/// `σ_f² exp(−½ Σ_d (x_d − x'_d)² / λ_d²)`.
pub fn kernel_seard(x: &[f64], x2: &[f64], h: &Hyperparams) -> f64 {
    debug_assert_eq!(x.len(), h.dim());
    debug_assert_eq!(x2.len(), h.dim());
    let r2: f64 = x
        .iter()
        .zip(x2)
        .zip(&h.lengthscales)
        .map(|((a, b), l)| {
            let d = (a - b) / l;
            d * d
        })
        .sum();
    h.sigma_f2 * (-0.5 * r2).exp()
}

#[inline]
pub(crate) fn sqdist_scaled(a: impl Iterator<Item = f64>, b: impl Iterator<Item = f64>, inv_l2: &[f64]) -> f64 {
    a.zip(b).zip(inv_l2).map(|((x, y), w)| (x - y) * (x - y) * w).sum()
}

/// Kernel matrix between the rows of `xa` (n×D) and the rows of `xb` (m×D).
pub fn cross_kernel(xa: &DMatrix<f64>, xb: &DMatrix<f64>, h: &Hyperparams) -> DMatrix<f64> {
    let w = h.inv_sq_lengthscales();
    let (n, m) = (xa.nrows(), xb.nrows());
    DMatrix::from_fn(n, m, |i, j| {
        let r2 = sqdist_scaled(xa.row(i).iter().cloned(), xb.row(j).iter().cloned(), &w);
        h.sigma_f2 * (-0.5 * r2).exp()
    })
}

/// Gram matrix `K_N` over the rows of `x`; exactly symmetric, diagonal `σ_f²`.
pub fn gram(x: &DMatrix<f64>, h: &Hyperparams) -> DMatrix<f64> {
    let w = h.inv_sq_lengthscales();
    let n = x.nrows();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = h.sigma_f2;
        for j in 0..i {
            let r2 = sqdist_scaled(x.row(i).iter().cloned(), x.row(j).iter().cloned(), &w);
            let v = h.sigma_f2 * (-0.5 * r2).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Kernel vector `[κ(x_i, x*)]_i` over the rows of `x`.
pub fn kernel_vector(x: &DMatrix<f64>, xs: &[f64], h: &Hyperparams) -> DVector<f64> {
    let w = h.inv_sq_lengthscales();
    DVector::from_fn(x.nrows(), |i, _| {
        let r2 = sqdist_scaled(x.row(i).iter().cloned(), xs.iter().cloned(), &w);
        h.sigma_f2 * (-0.5 * r2).exp()
    })
}
