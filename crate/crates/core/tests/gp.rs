use std::sync::Arc;

use gp_takeover::gp::{
    fitc_log_likelihood, fitc_log_likelihood_grad, gp_fit, gram, initial_hyperparams, kernel_seard,
    log_marginal_likelihood, log_marginal_likelihood_value, random_subset, rosgp_init, spgp_fit, Dataset,
    FitOptions, FullGp, GpModel, Hyperparams, InducingMode, FeatureScale, RosgpOptions, SparseGp, SparseOptions, SpgpModel,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_data(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (DMatrix<f64>, DVector<f64>) {
    let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0));
    let y = DVector::from_fn(n, |i, _| f64::sin(x.row(i).sum()) + 0.1 * rng.sample::<f64, _>(StandardNormal));
    (x, y)
}

fn random_hyp(rng: &mut ChaCha8Rng, d: usize) -> Hyperparams {
    Hyperparams::new(
        rng.random_range(0.01..0.5),
        rng.random_range(0.3..3.0),
        (0..d).map(|_| rng.random_range(0.4..3.0)).collect(),
    )
    .unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

#[test]
fn lml_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let (x, y) = random_data(&mut rng, 10, 3);
        let h = random_hyp(&mut rng, 3);
        let (_, g) = log_marginal_likelihood(&h, &x, &y).unwrap();
        let p = h.to_log();
        for i in 0..p.len() {
            let step = 1e-5;
            let mut pp = p.clone();
            pp[i] += step;
            let fp = log_marginal_likelihood_value(&Hyperparams::from_log(pp.as_slice()).unwrap(), &x, &y).unwrap();
            pp[i] -= 2.0 * step;
            let fm = log_marginal_likelihood_value(&Hyperparams::from_log(pp.as_slice()).unwrap(), &x, &y).unwrap();
            let fd = (fp - fm) / (2.0 * step);
            assert!(rel_err(g[i], fd) < 1e-5, "param {i}: analytic {} vs fd {fd}", g[i]);
        }
    }
}

#[test]
fn fitc_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let (x, y) = random_data(&mut rng, 30, 2);
        let h = random_hyp(&mut rng, 2);
        let xu = random_subset(&x, 6, rng.random()).unwrap();
        let (_, g) = fitc_log_likelihood_grad(&h, &x, &y, &xu, true).unwrap();
        let p = h.to_log();
        let step = 1e-5;
        for i in 0..p.len() {
            let mut pp = p.clone();
            pp[i] += step;
            let fp = fitc_log_likelihood(&Hyperparams::from_log(pp.as_slice()).unwrap(), &x, &y, &xu).unwrap();
            pp[i] -= 2.0 * step;
            let fm = fitc_log_likelihood(&Hyperparams::from_log(pp.as_slice()).unwrap(), &x, &y, &xu).unwrap();
            let fd = (fp - fm) / (2.0 * step);
            assert!(rel_err(g[i], fd) < 1e-5, "hyper {i}: analytic {} vs fd {fd}", g[i]);
        }
        for m in 0..xu.nrows() {
            for d in 0..2 {
                let mut a = xu.clone();
                a[(m, d)] += step;
                let fp = fitc_log_likelihood(&h, &x, &y, &a).unwrap();
                a[(m, d)] -= 2.0 * step;
                let fm = fitc_log_likelihood(&h, &x, &y, &a).unwrap();
                let fd = (fp - fm) / (2.0 * step);
                let an = g[p.len() + m * 2 + d];
                assert!((an - fd).abs() < 1e-5 * an.abs().max(1e-3), "inducing ({m},{d}): {an} vs {fd}");
            }
        }
    }
}

#[test]
fn zero_targets_leave_only_the_complexity_term() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (x, _) = random_data(&mut rng, 8, 2);
    let y = DVector::zeros(8);
    let h = random_hyp(&mut rng, 2);
    let v = log_marginal_likelihood_value(&h, &x, &y).unwrap();
    let mut ky = gram(&x, &h);
    for i in 0..8 {
        ky[(i, i)] += h.sigma_eps2;
    }
    let logdet = ky.determinant().ln();
    let expected = -0.5 * logdet - 4.0 * (2.0 * std::f64::consts::PI).ln();
    assert!((v - expected).abs() < 1e-10);
}

#[test]
fn fit_never_lowers_the_likelihood() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (x, y) = random_data(&mut rng, 40, 2);
    let init = initial_hyperparams(&x, &y);
    let l0 = log_marginal_likelihood_value(&init, &x, &y).unwrap();
    let gp = FullGp::fit(&x, &y, None, &FitOptions::default()).unwrap();
    assert!(gp.diagnostics.lml_final >= l0);
    assert_eq!(gp.diagnostics.lml_init, l0);
}

#[test]
fn ard_prunes_irrelevant_inputs() {
    // draw from a SEARD prior that only depends on the first two inputs
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = 100;
    let x = DMatrix::from_fn(n, 4, |_, _| rng.random_range(-2.0..2.0));
    let active = x.columns(0, 2).into_owned();
    let truth = Hyperparams::new(1e-6, 1.0, vec![0.8, 0.8]).unwrap();
    let mut k = gram(&active, &truth);
    for i in 0..n {
        k[(i, i)] += 1e-8;
    }
    let l = k.cholesky().unwrap().l();
    let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = &l * z + DVector::from_fn(n, |_, _| 0.01 * rng.sample::<f64, _>(StandardNormal));
    let gp = FullGp::fit(&x, &y, None, &FitOptions::default()).unwrap();
    let ls = &gp.hyperparams.lengthscales;
    let max_active = ls[0].max(ls[1]).ln();
    let min_inactive = ls[2].min(ls[3]).ln();
    assert!(min_inactive > max_active, "lengthscales {ls:?}");
}

#[test]
fn duplicate_inputs_force_noise() {
    let x = DMatrix::from_element(2, 1, 0.5);
    let y = DVector::from_vec(vec![1.0, -1.0]);
    let init = Hyperparams::new(0.01, 1.0, vec![1.0]).unwrap();
    let gp = FullGp::fit(&x, &y, Some(init), &FitOptions::default()).unwrap();
    // any explanation of two different values at one input needs noise ≈ half the squared gap
    assert!(gp.hyperparams.sigma_eps2 > 0.5, "{:?}", gp.hyperparams);
}

#[test]
fn prior_reversion_far_from_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (x, y) = random_data(&mut rng, 15, 2);
    let h = Hyperparams::new(0.1, 1.3, vec![0.5, 0.5]).unwrap();
    let gp = FullGp::condition(&x, &y, h).unwrap();
    let (m, v) = gp.predict(&[20.0, -20.0]);
    assert!(m.abs() < 1e-6);
    assert!((v - 1.3).abs() < 1e-6);
}

#[test]
fn interpolation_limit() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (x, y) = random_data(&mut rng, 6, 2);
    let h = Hyperparams::new(1e-12, 1.0, vec![0.7, 0.7]).unwrap();
    let gp = FullGp::condition(&x, &y, h).unwrap();
    for i in 0..6 {
        let xi: Vec<f64> = x.row(i).iter().cloned().collect();
        assert!((gp.predict_mean(&xi) - y[i]).abs() < 1e-4);
    }
}

#[test]
fn adding_data_never_increases_variance_or_decreases_information() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (x, y) = random_data(&mut rng, 20, 2);
    let h = Hyperparams::new(0.05, 1.0, vec![0.9, 1.2]).unwrap();
    let tests: Vec<[f64; 2]> = (0..10).map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
    let mut prev_var = vec![f64::INFINITY; tests.len()];
    let mut prev_gain = -1.0;
    for n in 1..=20 {
        let gp = FullGp::condition(&x.rows(0, n).into_owned(), &y.rows(0, n).into_owned(), h.clone()).unwrap();
        for (t, pv) in tests.iter().zip(prev_var.iter_mut()) {
            let (_, v) = gp.predict(t);
            assert!(v <= *pv + 1e-12);
            assert!(v <= 1.0 + 1e-9);
            *pv = v;
        }
        let g = gp.info_gain();
        assert!(g >= prev_gain - 1e-12);
        prev_gain = g;
    }
}

#[test]
fn zero_signal_means_no_information() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (x, y) = random_data(&mut rng, 10, 2);
    let gp = FullGp::condition(&x, &y, Hyperparams::new(0.1, 1e-14, vec![1.0, 1.0]).unwrap()).unwrap();
    assert!(gp.info_gain() < 1e-10);
}

#[test]
fn mean_is_linear_in_targets() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (x, y) = random_data(&mut rng, 12, 2);
    let h = Hyperparams::new(0.1, 1.0, vec![0.8, 0.8]).unwrap();
    let a = FullGp::condition(&x, &y, h.clone()).unwrap();
    let b = FullGp::condition(&x, &(&y * 2.0), h.clone()).unwrap();
    let xu = random_subset(&x, 5, 0).unwrap();
    let sa = SparseGp::condition(&x, &y, xu.clone(), h.clone()).unwrap();
    let sb = SparseGp::condition(&x, &(&y * 2.0), xu, h).unwrap();
    for _ in 0..5 {
        let xs = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        assert_eq!(2.0 * a.predict_mean(&xs), b.predict_mean(&xs));
        assert!((2.0 * sa.predict_mean(&xs) - sb.predict_mean(&xs)).abs() <= 1e-15 * sb.predict_mean(&xs).abs().max(1.0));
    }
}

#[test]
fn fitc_collapses_to_exact_gp() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for n in [5, 20, 50] {
        let (x, y) = random_data(&mut rng, n, 3);
        let h = Hyperparams::new(0.1, 1.2, vec![1.0, 1.5, 2.0]).unwrap();
        let full = FullGp::condition(&x, &y, h.clone()).unwrap();
        let sparse = SparseGp::condition(&x, &y, x.clone(), h).unwrap();
        assert!(sparse.gamma().amax() < 1e-8, "Γ max {}", sparse.gamma().amax());
        for _ in 0..20 {
            let xs: Vec<f64> = (0..3).map(|_| rng.random_range(-2.5..2.5)).collect();
            let (mf, vf) = full.predict(&xs);
            let (ms, vs) = sparse.predict(&xs);
            assert!((mf - ms).abs() < 1e-6, "mean {mf} vs {ms}");
            assert!((vf - vs).abs() < 1e-6, "var {vf} vs {vs}");
        }
    }
}

#[test]
fn fitc_variance_reduction_is_nonnegative_and_prior_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (x, y) = random_data(&mut rng, 60, 2);
    let h = Hyperparams::new(0.05, 0.9, vec![0.7, 0.9]).unwrap();
    let g = SparseGp::condition(&x, &y, random_subset(&x, 8, 2).unwrap(), h).unwrap();
    for _ in 0..50 {
        let xs = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let (_, v) = g.predict(&xs);
        assert!((0.0..=0.9).contains(&v));
    }
    let (m, v) = g.predict(&[40.0, 40.0]);
    assert!(m.abs() < 1e-12 && (v - 0.9).abs() < 1e-12);
}

fn synthetic_dataset(seed: u64, n: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, 9, |_, _| rng.random_range(-1.0..1.0));
    let y = DMatrix::from_fn(n, 3, |i, j| {
        f64::sin(x[(i, j)] + 0.5 * x[(i, j + 3)]) + 0.05 * rng.sample::<f64, _>(StandardNormal)
    });
    Dataset::new(x, y).unwrap()
}

#[test]
fn spgp_fit_shape_and_ascent() {
    let data = synthetic_dataset(1, 500);
    let model = spgp_fit(&data, &SparseOptions::default()).unwrap();
    assert_eq!(model.num_inducing(), 50);
    for g in &model.dims {
        assert_eq!(g.alpha0().len(), 50);
        assert!(g.diagnostics.lml_final >= g.diagnostics.lml_init);
    }
}

#[test]
fn optimized_inducing_mode_improves_on_the_subset() {
    let data = synthetic_dataset(2, 120);
    let fixed = spgp_fit(&data, &SparseOptions { num_inducing: 8, ..Default::default() }).unwrap();
    let opt = spgp_fit(&data, &SparseOptions { num_inducing: 8, mode: InducingMode::Optimized, ..Default::default() })
        .unwrap();
    for (a, b) in fixed.dims.iter().zip(&opt.dims) {
        assert!(b.diagnostics.lml_final >= a.diagnostics.lml_final - 1e-9);
    }
}

#[test]
fn model_files_round_trip() {
    let data = synthetic_dataset(3, 80);
    let dir = tempfile::tempdir().unwrap();
    let gp = gp_fit(&data, None, &FitOptions::default()).unwrap();
    let p = dir.path().join("gp.json");
    gp.save(&p).unwrap();
    let back = GpModel::load(&p, &data).unwrap();
    for (a, b) in gp.hyperparams().iter().zip(back.hyperparams()) {
        assert_eq!(a.to_log().as_slice(), b.to_log().as_slice());
        assert_eq!(a.sigma_eps2.to_bits(), b.sigma_eps2.to_bits());
        assert_eq!(a.sigma_f2.to_bits(), b.sigma_f2.to_bits());
        assert!(a.lengthscales.iter().zip(&b.lengthscales).all(|(u, v)| u.to_bits() == v.to_bits()));
    }
    let xs = [0.1; 9];
    assert_eq!(gp.predict(&xs), back.predict(&xs));

    let sp = spgp_fit(&data, &SparseOptions { num_inducing: 10, ..Default::default() }).unwrap();
    let ps = dir.path().join("spgp.json");
    sp.save(&ps).unwrap();
    let sback = SpgpModel::load(&ps, &data).unwrap();
    assert_eq!(sp.hyperparams(), sback.hyperparams());
    for (a, b) in sp.dims.iter().zip(&sback.dims) {
        assert_eq!(a.alpha0(), b.alpha0());
        assert_eq!(a.inducing(), b.inducing());
    }

    let other = synthetic_dataset(4, 80);
    assert!(GpModel::load(&p, &other).is_err());
    assert!(SpgpModel::load(&ps, &other).is_err());
}

// ---------------------------------------------------------------- ROSGP

/// Tiny FITC model over 1-d inputs with `m` inducing points, used to drive
/// the recursive update with explicit kernel features.
fn tiny_model(m: usize, seed: u64) -> Arc<SpgpModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 3 * m;
    let x = DMatrix::from_fn(n, 1, |_, _| rng.random_range(-3.0..3.0));
    let y = DMatrix::from_fn(n, 3, |i, j| (x[(i, 0)] * (j as f64 + 1.0)).sin());
    let data = Dataset::new(x, y).unwrap();
    let xu = random_subset(&data.x, m, seed).unwrap();
    let h = Hyperparams::new(0.01, 1.0, vec![0.9]).unwrap();
    let dims = (0..3)
        .map(|j| SparseGp::condition(&data.x, &data.output(j), xu.clone(), h.clone()).unwrap())
        .collect();
    Arc::new(SpgpModel { dims, mode: InducingMode::FixedSubset, dataset_hash: data.hash() })
}

/// Direct normal-equation solve of the exponentially weighted, regularized
/// least-squares problem with information matrix
/// `Φ = ς λ^k I + Σ λ^{k−i} k_i k_iᵀ`.
fn batch_oracle(
    feats: &[DVector<f64>],
    ys: &[f64],
    alpha0: &DVector<f64>,
    lambda: f64,
    varsigma: f64,
) -> (DVector<f64>, DMatrix<f64>) {
    let m = alpha0.len();
    let k = feats.len() as i32;
    let mut phi = DMatrix::identity(m, m) * (varsigma * lambda.powi(k));
    let mut rho = alpha0 * (varsigma * lambda.powi(k));
    for (i, (f, y)) in feats.iter().zip(ys).enumerate() {
        let w = lambda.powi(k - 1 - i as i32);
        phi += w * f * f.transpose();
        rho += w * *y * f;
    }
    let alpha = phi.clone().lu().solve(&rho).unwrap();
    (alpha, phi)
}

#[test]
fn recursive_weights_equal_batch_minimizer_and_p_inverts_phi() {
    let cases = [(1, 2, 1.0, 1), (4, 50, 1.0, 2), (10, 200, 1.0, 3), (6, 150, 0.98, 4), (10, 200, 0.995, 5)];
    for ((m, len, lambda, seed), features) in cases.into_iter().flat_map(|c| [(c, FeatureScale::Unit), (c, FeatureScale::Kernel)]) {
        let model = tiny_model(m, seed);
        let opts = RosgpOptions { lambda, varsigma: 0.01, features };
        let mut st = rosgp_init(model.clone(), &opts).unwrap();
        let alpha0: Vec<DVector<f64>> = (0..3).map(|j| st.feature_weights(j)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let mut feats = vec![Vec::new(); 3];
        let mut ys = vec![Vec::new(); 3];
        for _ in 0..len {
            let x: [f64; 1] = [rng.random_range(-3.0..3.0)];
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            for j in 0..3 {
                feats[j].push(st.features(j, &x));
                ys[j].push(y[j]);
            }
            st.update(&x, &y).unwrap();
        }
        assert_eq!(st.k, len as u64);
        for j in 0..3 {
            let (alpha, phi) = batch_oracle(&feats[j], &ys[j], &alpha0[j], lambda, 0.01);
            let got = st.feature_weights(j);
            let rel = (&got - &alpha).norm() / alpha.norm().max(1e-12);
            assert!(rel < 1e-8, "m={m} len={len} λ={lambda} {features:?}: α rel err {rel:e}");
            let eye = &st.dims[j].p * &phi;
            let dev = (eye - DMatrix::identity(m, m)).amax();
            assert!(dev < 1e-6, "PΦ − I = {dev:e}");
            let p = &st.dims[j].p;
            assert!((p - p.transpose()).amax() < 1e-9 * p.amax());
        }
    }
}

#[test]
fn large_prior_variance_reduces_to_plain_recursive_least_squares() {
    let model = tiny_model(3, 9);
    let mut st = rosgp_init(model.clone(), &RosgpOptions { lambda: 1.0, varsigma: 1e-9, ..Default::default() }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut a = DMatrix::zeros(0, 3);
    let mut b = Vec::new();
    for i in 0..40 {
        let x: [f64; 1] = [rng.random_range(-3.0..3.0)];
        let y = [f64::cos(x[0]), 0.0, 0.0];
        st.update(&x, &y).unwrap();
        a = a.insert_row(i, 0.0);
        a.row_mut(i).copy_from(&st.features(0, &x).transpose());
        b.push(y[0]);
    }
    let b = DVector::from_vec(b);
    let ls = (a.transpose() * &a).lu().solve(&(a.transpose() * b)).unwrap();
    let rel = (st.feature_weights(0) - &ls).norm() / ls.norm();
    assert!(rel < 1e-5, "{rel:e}");
}

#[test]
fn init_copies_alpha0_and_matches_sparse_prediction() {
    let model = tiny_model(5, 12);
    let st = rosgp_init(model.clone(), &RosgpOptions::default()).unwrap();
    for (d, g) in st.dims.iter().zip(&model.dims) {
        assert_eq!(&d.alpha, g.alpha0());
        assert!((&d.p - DMatrix::identity(5, 5) * 100.0).amax() == 0.0);
    }
    let x = [0.37];
    let (ms, vs) = model.predict(&x);
    let (mr, vr) = st.predict(&x);
    assert!((ms - mr).amax() < 1e-12);
    assert_eq!(vs, vr);
}

#[test]
fn init_rejects_bad_parameters() {
    let model = tiny_model(2, 1);
    assert!(rosgp_init(model.clone(), &RosgpOptions { lambda: 0.99, varsigma: 0.0, ..Default::default() }).is_err());
    assert!(rosgp_init(model.clone(), &RosgpOptions { lambda: 0.0, varsigma: 0.1, ..Default::default() }).is_err());
    assert!(rosgp_init(model, &RosgpOptions { lambda: 1.01, varsigma: 0.1, ..Default::default() }).is_err());
}

#[test]
fn variance_is_frozen_and_non_finite_measurements_are_skipped() {
    let model = tiny_model(5, 14);
    let mut st = rosgp_init(model, &RosgpOptions::default()).unwrap();
    let x = [0.2];
    let (_, v0) = st.predict(&x);
    st.update(&[1.0], &[0.5, 0.1, -0.3]).unwrap();
    assert_eq!(st.predict(&x).1, v0);
    let before = st.dims.clone();
    assert!(!st.update(&[1.0], &[f64::NAN, 0.0, 0.0]).unwrap());
    assert_eq!(st.dims, before);
    assert_eq!((st.k, st.skipped), (1, 1));
}

#[test]
fn forgetting_tracks_a_shifted_function() {
    let model = tiny_model(8, 15);
    let frozen = rosgp_init(model.clone(), &RosgpOptions { lambda: 0.98, varsigma: 0.01, ..Default::default() }).unwrap();
    let mut online = frozen.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let (mut err_online, mut err_frozen) = (0.0, 0.0);
    for _ in 0..400 {
        let x: [f64; 1] = [rng.random_range(-2.5..2.5)];
        let truth: Vec<f64> = (0..3).map(|j| (x[0] * (j as f64 + 1.0)).sin() + 0.4).collect();
        let (mo, _) = online.predict(&x);
        let (mf, _) = frozen.predict(&x);
        err_online += (0..3).map(|j| (mo[j] - truth[j]).abs()).sum::<f64>();
        err_frozen += (0..3).map(|j| (mf[j] - truth[j]).abs()).sum::<f64>();
        online.update(&x, &truth).unwrap();
    }
    assert!(err_online < err_frozen, "{err_online} vs {err_frozen}");
}

#[test]
fn snapshot_round_trip_is_binary_exact() {
    let model = tiny_model(6, 18);
    let mut st = rosgp_init(model.clone(), &RosgpOptions { lambda: 0.97, varsigma: 0.03, ..Default::default() }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for _ in 0..25 {
        let x: [f64; 1] = [rng.random_range(-3.0..3.0)];
        st.update(&x, &[rng.random(), rng.random(), rng.random()]).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.bin");
    st.save_snapshot(&p).unwrap();
    let back = gp_takeover::gp::RosgpState::load_snapshot(&p, model).unwrap();
    assert_eq!(back.k, st.k);
    assert_eq!(back.lambda.to_bits(), st.lambda.to_bits());
    assert_eq!(back.varsigma.to_bits(), st.varsigma.to_bits());
    for (a, b) in st.dims.iter().zip(&back.dims) {
        assert!(a.alpha.iter().zip(b.alpha.iter()).all(|(u, v)| u.to_bits() == v.to_bits()));
        assert!(a.p.iter().zip(b.p.iter()).all(|(u, v)| u.to_bits() == v.to_bits()));
    }
    assert!(gp_takeover::gp::RosgpState::load_snapshot(&p, tiny_model(6, 99)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_symmetric(a in proptest::collection::vec(-5.0f64..5.0, 3),
                           b in proptest::collection::vec(-5.0f64..5.0, 3),
                           ls in proptest::collection::vec(0.1f64..4.0, 3),
                           sf2 in 0.01f64..10.0) {
        let h = Hyperparams::new(0.1, sf2, ls).unwrap();
        prop_assert_eq!(kernel_seard(&a, &b, &h), kernel_seard(&b, &a, &h));
        prop_assert!(kernel_seard(&a, &b, &h) <= sf2);
    }

    #[test]
    fn gram_is_numerically_psd(seed in 0u64..1000, n in 1usize..25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
        let h = Hyperparams::new(0.1, 2.0, vec![0.5, 1.5]).unwrap();
        let k = gram(&x, &h);
        let min_eig = k.symmetric_eigen().eigenvalues.min();
        prop_assert!(min_eig >= -1e-10 * 2.0);
    }

    #[test]
    fn hyperparams_json_round_trip_is_bit_exact(a in 1e-12f64..1e6, b in 1e-12f64..1e6,
                                               ls in proptest::collection::vec(1e-6f64..1e6, 1..10)) {
        let h = Hyperparams::new(a, b, ls).unwrap();
        let s = serde_json::to_string(&h).unwrap();
        let back: Hyperparams = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(h, back);
    }
}

#[test]
fn duplicated_points_make_a_singular_block() {
    let x = DMatrix::from_row_slice(2, 2, &[0.3, 0.3, 0.3, 0.3]);
    let h = Hyperparams::new(0.1, 1.0, vec![1.0, 1.0]).unwrap();
    let k = gram(&x, &h);
    assert!(k.determinant().abs() < 1e-12);
}
