//! Box-constrained L-BFGS minimizer used for hyperparameter fitting.
//!
//! Projected two-loop recursion with a backtracking Armijo line search along
//! the projected path. Objective failures (e.g. a factorization that does not
//! succeed at a trial point) are treated as `+∞` and trigger backtracking.

use std::collections::VecDeque;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerOptions {
    pub max_iter: usize,
    /// Stop when the projected gradient's infinity norm drops below this.
    pub grad_tol: f64,
    /// Stop when the relative objective decrease stays below this for
    /// three consecutive iterations.
    pub f_rel_tol: f64,
    pub memory: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self { max_iter: 200, grad_tol: 1e-6, f_rel_tol: 1e-12, memory: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    GradientTolerance,
    ObjectiveStalled,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct OptimizeResult {
    pub x: DVector<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

fn project(x: &mut DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

fn projected_gradient(x: &DVector<f64>, g: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| {
        if (x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0) {
            0.0
        } else {
            g[i]
        }
    })
}

/// Minimizes `f` over the box `[lo, hi]` starting from `x0` (projected onto
/// the box). `f` returns the value and gradient.
pub fn minimize_bounded<F>(
    mut f: F,
    x0: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    opts: &OptimizerOptions,
) -> Result<OptimizeResult>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    let mut x = x0.clone();
    project(&mut x, lo, hi);
    let (mut fx, mut g) = f(&x)?;
    let mut evals = 1;
    let mut hist: VecDeque<(DVector<f64>, DVector<f64>, f64)> = VecDeque::new();
    let mut stalled = 0;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    for iter in 0..opts.max_iter {
        iterations = iter;
        let pg = projected_gradient(&x, &g, lo, hi);
        if pg.amax() < opts.grad_tol {
            termination = Termination::GradientTolerance;
            break;
        }
        // variables pinned at a bound with the gradient pointing outward stay fixed
        let free: Vec<bool> = (0..x.len()).map(|i| pg[i] != 0.0 || g[i] == 0.0).collect();
        let mask = |v: &DVector<f64>| DVector::from_fn(v.len(), |i, _| if free[i] { v[i] } else { 0.0 });

        // two-loop recursion on the free subspace
        let mut q = mask(&g);
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * s.dot(&q);
            q -= a * y;
            alphas.push(a);
        }
        let gamma = hist
            .back()
            .map(|(s, y, _)| s.dot(y) / y.dot(y))
            .filter(|v| v.is_finite() && *v > 0.0)
            .unwrap_or_else(|| 1.0 / pg.norm().max(1.0));
        let mut r = q * gamma;
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * y.dot(&r);
            r += (a - b) * s;
        }
        let mut d = -mask(&r);
        if g.dot(&d) >= 0.0 {
            hist.clear();
            d = -pg.clone() / pg.norm().max(1.0);
        }

        // backtracking along the projected path
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut xt = &x + t * &d;
            project(&mut xt, lo, hi);
            let step = &xt - &x;
            if step.amax() == 0.0 {
                break;
            }
            evals += 1;
            if let Ok((ft, gt)) = f(&xt) {
                if ft.is_finite() && gt.iter().all(|v| v.is_finite()) && ft <= fx + 1e-4 * g.dot(&step) {
                    accepted = Some((xt, ft, gt));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else {
            if !hist.is_empty() {
                // retry once from steepest descent before giving up
                hist.clear();
                continue;
            }
            termination = Termination::LineSearchFailed;
            break;
        };

        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * y.norm_squared().max(f64::MIN_POSITIVE) {
            hist.push_back((s, y, 1.0 / sy));
            if hist.len() > opts.memory {
                hist.pop_front();
            }
        }
        let rel = (fx - fnew).abs() / fx.abs().max(fnew.abs()).max(1.0);
        x = xn;
        fx = fnew;
        g = gn;
        iterations = iter + 1;
        if rel < opts.f_rel_tol {
            stalled += 1;
            if stalled >= 3 {
                termination = Termination::ObjectiveStalled;
                break;
            }
        } else {
            stalled = 0;
        }
    }
    Ok(OptimizeResult { x, f: fx, iterations, evaluations: evals, termination })
}
