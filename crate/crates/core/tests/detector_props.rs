// SPDX-License-Identifier: Apache-2.0
use agetrojan::detector::{
    default_gamma, fit_ocsvm, gradient_check, train, vote, Autoencoder, DetectorConfig, DetectorModel, Verdict,
};
use agetrojan::features::{bin_tensors, Bin, FeatureTensor};
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const DIMS: [usize; 3] = [5, 3, 4];

/// Error-count-like tensor: more flips at short clocks and high duty, scaled
/// by a per-input sensitivity.
fn synthetic(rng: &mut ChaCha8Rng) -> FeatureTensor {
    let s: f64 = rng.random_range(0.5..1.5);
    let mut t = FeatureTensor::zeros(DIMS[0], DIMS[1]);
    for i in 0..DIMS[0] {
        for j in 0..DIMS[1] {
            let lam = s * (DIMS[0] - i) as f64 * (1.0 + 0.4 * j as f64);
            let rise = (lam * rng.random_range(0.5..1.5)).round();
            let fall = (lam * rng.random_range(0.5..1.5)).round();
            let base = (i * DIMS[1] + j) * 4;
            t.values[base] = rise;
            t.values[base + 1] = fall;
            t.values[base + 2] = (rise * rng.random_range(8.0..64.0)).round();
            t.values[base + 3] = (fall * rng.random_range(8.0..64.0)).round();
        }
    }
    t
}

fn bins(n: usize, k: usize, seed: u64) -> Vec<Bin> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t: Vec<FeatureTensor> = (0..n * k).map(|_| synthetic(&mut rng)).collect();
    bin_tensors(&t, k).unwrap()
}

fn small_cfg() -> DetectorConfig {
    DetectorConfig { h1: 24, h2: 8, ..DetectorConfig::default() }
}

fn quantile(v: &[f64], q: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s[((s.len() - 1) as f64 * q).round() as usize]
}

fn trained() -> (DetectorModel, agetrojan::detector::TrainReport, Vec<Bin>) {
    let b = bins(300, 1, 1);
    let (m, r) = train(&b, &small_cfg(), 1, 9).unwrap();
    (m, r, b)
}

#[test]
fn training_is_deterministic() {
    let b = bins(250, 2, 4);
    let (m1, r1) = train(&b, &small_cfg(), 3, 17).unwrap();
    let (m2, r2) = train(&b, &small_cfg(), 3, 17).unwrap();
    assert_eq!(m1.to_json(), m2.to_json());
    assert_eq!(r1.loss_history, r2.loss_history);
    let (m3, _) = train(&b, &small_cfg(), 3, 18).unwrap();
    assert_ne!(m1.to_json(), m3.to_json());
}

#[test]
fn training_reduces_reconstruction_error() {
    let (_, r, _) = trained();
    assert!(r.mse_final < r.mse_initial, "{} -> {}", r.mse_initial, r.mse_final);
}

#[test]
fn training_outliers_within_nu() {
    let (m, r, b) = trained();
    assert!(r.train_outlier_fraction <= m.svm.nu + 0.02, "{}", r.train_outlier_fraction);
    let s = m.scores(&b).unwrap();
    assert_eq!(s, r.train_scores);
}

#[test]
fn fresh_clean_bins_score_as_inliers() {
    let (m, r, _) = trained();
    let spread = quantile(&r.train_scores, 0.95) - quantile(&r.train_scores, 0.05);
    let med = quantile(&r.train_scores, 0.5);
    let fresh = m.scores(&bins(200, 1, 77)).unwrap();
    assert!(quantile(&fresh, 0.5) > med - spread);
    let flagged = fresh.iter().filter(|&&s| s < 0.0).count() as f64 / fresh.len() as f64;
    assert!(flagged < 0.2, "{flagged}");
}

#[test]
fn all_zero_bin_is_an_outlier() {
    let (m, r, _) = trained();
    let zero = Bin { k: 1, tensor: FeatureTensor::zeros(DIMS[0], DIMS[1]) };
    let s = m.score(&zero).unwrap();
    assert!(s < quantile(&r.train_scores, 0.05), "{s}");
    assert_eq!(m.classify(&[zero]).unwrap(), Verdict::Trojaned);
}

#[test]
fn score_ignores_order_within_bin() {
    let b = bins(250, 4, 5);
    let (m, _) = train(&b, &small_cfg(), 1, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut t: Vec<FeatureTensor> = (0..4).map(|_| synthetic(&mut rng)).collect();
    let a = bin_tensors(&t, 4).unwrap();
    t.shuffle(&mut rng);
    let c = bin_tensors(&t, 4).unwrap();
    assert_eq!(m.score(&a[0]).unwrap(), m.score(&c[0]).unwrap());
}

#[test]
fn model_json_roundtrip_keeps_scores() {
    let (m, _, b) = trained();
    let back = DetectorModel::from_json(&m.to_json()).unwrap();
    assert_eq!(back.scores(&b[..20]).unwrap(), m.scores(&b[..20]).unwrap());
    assert_eq!(back.to_json(), m.to_json());
}

#[test]
fn too_few_bins_rejected() {
    assert!(train(&bins(150, 1, 2), &small_cfg(), 1, 0).is_err());
}

#[test]
fn vote_examples() {
    assert_eq!(vote(&[1.0, 2.0, -1.0]).unwrap(), Verdict::Clean);
    assert_eq!(vote(&[1.0, -1.0]).unwrap(), Verdict::Trojaned);
    assert_eq!(vote(&[-0.1]).unwrap(), Verdict::Trojaned);
    assert_eq!(vote(&[0.1]).unwrap(), Verdict::Clean);
    assert!(vote(&[]).is_err());
}

#[test]
fn evaluate_roc_is_monotone_with_fixed_ends() {
    let (m, _, b) = trained();
    let zero = Bin { k: 1, tensor: FeatureTensor::zeros(DIMS[0], DIMS[1]) };
    let mut labeled: Vec<(Vec<Bin>, Verdict)> = b[..40].iter().map(|x| (vec![x.clone()], Verdict::Clean)).collect();
    labeled.extend((0..10).map(|_| (vec![zero.clone()], Verdict::Trojaned)));
    let r = m.evaluate(&labeled).unwrap();
    let first = r.roc.first().unwrap();
    let last = r.roc.last().unwrap();
    assert_eq!((first.fpr, first.tpr, last.fpr, last.tpr), (0.0, 0.0, 1.0, 1.0));
    assert!(r.roc.windows(2).all(|w| w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr));
    assert_eq!(r.recall, 1.0);
}

/// Five random models of different shapes, five Gaussian samples each.
/// Biases are randomized too: with zero biases a dead hidden layer leaves
/// the next pre-activation exactly on the ReLU kink.
#[test]
fn gradient_check_five_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for (d, h1, h2) in [(6, 5, 3), (12, 8, 4), (20, 16, 6), (60, 64, 16), (9, 3, 2)] {
        let mut m = Autoencoder::new(d, h1, h2, &mut rng);
        for l in &mut m.layers {
            l.b.mapv_inplace(|_| 0.1 * normal.sample(&mut rng));
        }
        for _ in 0..5 {
            let x = Array1::from_shape_fn(d, |_| normal.sample(&mut rng));
            worst = worst.max(gradient_check(&m, x.view()));
        }
    }
    assert!(worst < 1e-4, "{worst}");
}

fn svm_data(kind: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    match kind {
        0 => Array2::from_shape_fn((300, 4), |_| normal.sample(rng)),
        1 => Array2::from_shape_fn((250, 2), |(i, _)| if i % 2 == 0 { 3.0 } else { -3.0 } + 0.3 * normal.sample(rng)),
        // mostly repeated rows
        _ => Array2::from_shape_fn((240, 3), |(i, j)| if i % 5 == 0 { normal.sample(rng) } else { j as f64 }),
    }
}

#[test]
fn svm_kkt_feasibility_and_nu_property() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for kind in 0..3 {
        let x = svm_data(kind, &mut rng);
        for nu in [0.05, 0.1, 0.3] {
            let (m, info) = fit_ocsvm(x.view(), nu, default_gamma(x.view()), 1e-7, 10_000_000);
            assert!(info.kkt_gap < 1e-6, "kind {kind} nu {nu}: gap {}", info.kkt_gap);
            let sum: f64 = info.alpha_all.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-9, "{sum}");
            assert!(info.alpha_all.iter().all(|&a| a >= 0.0 && a <= info.upper * (1.0 + 1e-12)));
            let out = m.decisions(x.view()).iter().filter(|&&s| s < 0.0).count() as f64 / x.nrows() as f64;
            assert!(out <= nu + 0.02, "kind {kind} nu {nu}: outliers {out}");
        }
    }
}
