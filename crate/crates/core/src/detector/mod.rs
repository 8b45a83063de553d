// SPDX-License-Identifier: Apache-2.0
//! One-class detector: z-score scaler, autoencoder bottleneck, one-class SVM
//! on the bottleneck, and majority voting over batches of bins.

mod autoencoder;
mod metrics;
mod ocsvm;

use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::Bin;

pub use autoencoder::{gradient_check, Autoencoder, Diverged, Layer, LayerDoc, TrainConfig};
pub use metrics::{auc, evaluate_scores, roc_curve, Confusion, EvalReport, RocPoint};
pub use ocsvm::{default_gamma, fit as fit_ocsvm, rbf_matrix, OcSvm, SolveInfo};

pub const MIN_TRAIN_BINS: usize = 200;
const STD_FLOOR: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("need at least {MIN_TRAIN_BINS} training bins, got {0}")]
    TooFewBins(usize),
    #[error("dimension mismatch: model expects {expected:?}, got {got:?}")]
    Dims { expected: [usize; 3], got: [usize; 3] },
    #[error("autoencoder diverged at epoch {} (loss {})", .0.epoch, .0.loss)]
    Diverged(Diverged),
    #[error("empty batch")]
    EmptyBatch,
    #[error("bad model: {0}")]
    BadModel(String),
    #[error("bad config: {0}")]
    BadConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Clean,
    Trojaned,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub h1: usize,
    pub h2: usize,
    pub train: TrainConfig,
    pub nu: f64,
    pub svm_tol: f64,
    pub svm_max_iter: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { h1: 64, h2: 16, train: TrainConfig::default(), nu: 0.05, svm_tol: 1e-6, svm_max_iter: 10_000_000 }
    }
}

impl DetectorConfig {
    pub fn check(&self) -> Result<(), DetectorError> {
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(DetectorError::BadConfig(format!("nu = {} not in (0, 1]", self.nu)));
        }
        if self.h1 == 0 || self.h2 == 0 {
            return Err(DetectorError::BadConfig("hidden widths must be positive".into()));
        }
        if !(self.train.lr > 0.0) || self.train.batch == 0 {
            return Err(DetectorError::BadConfig("lr and minibatch must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn fit(x: ArrayView2<f64>) -> Self {
        let mean = x.mean_axis(Axis(0)).expect("non-empty").to_vec();
        let std = x.std_axis(Axis(0), 0.0).iter().map(|&s| s.max(STD_FLOOR)).collect();
        Self { mean, std }
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut y = x.to_owned();
        for mut row in y.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        y
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorModel {
    pub dims: [usize; 3],
    pub scaler: Scaler,
    pub ae: Autoencoder,
    pub svm: OcSvm,
    pub k: usize,
    pub batch: usize,
    pub seed: u64,
}

/// What training produced besides the model.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub loss_history: Vec<f64>,
    pub mse_initial: f64,
    pub mse_final: f64,
    pub svm: SolveInfo,
    pub train_scores: Vec<f64>,
    pub train_outlier_fraction: f64,
}

fn stack(bins: &[Bin]) -> Array2<f64> {
    let d = bins[0].tensor.len();
    let mut x = Array2::zeros((bins.len(), d));
    for (mut row, b) in x.rows_mut().into_iter().zip(bins) {
        row.assign(&ndarray::ArrayView1::from(&b.tensor.values));
    }
    x
}

/// Fits the scaler, trains the autoencoder, and solves the one-class SVM on
/// the bottleneck activations of the training bins.
pub fn train(
    bins: &[Bin],
    cfg: &DetectorConfig,
    batch: usize,
    seed: u64,
) -> Result<(DetectorModel, TrainReport), DetectorError> {
    cfg.check()?;
    if bins.len() < MIN_TRAIN_BINS {
        return Err(DetectorError::TooFewBins(bins.len()));
    }
    if batch == 0 {
        return Err(DetectorError::BadConfig("vote batch size must be >= 1".into()));
    }
    let dims = bins[0].tensor.dims;
    if let Some(b) = bins.iter().find(|b| b.tensor.dims != dims) {
        return Err(DetectorError::Dims { expected: dims, got: b.tensor.dims });
    }
    let raw = stack(bins);
    let scaler = Scaler::fit(raw.view());
    let x = scaler.apply(raw.view());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ae = Autoencoder::new(x.ncols(), cfg.h1, cfg.h2, &mut rng);
    let mse_initial = ae.mse(x.view());
    let loss_history = ae.train(x.view(), &cfg.train, &mut rng).map_err(DetectorError::Diverged)?;
    let mse_final = ae.mse(x.view());
    log::info!("autoencoder mse {mse_initial:.4} -> {mse_final:.4}");

    let z = ae.encode(x.view());
    let gamma = default_gamma(z.view());
    let (svm, info) = fit_ocsvm(z.view(), cfg.nu, gamma, cfg.svm_tol, cfg.svm_max_iter);
    log::info!("ocsvm: {} iterations, gap {:.2e}, {} support vectors", info.iterations, info.kkt_gap, svm.sv.len());
    let train_scores = svm.decisions(z.view());
    let out = train_scores.iter().filter(|&&s| s < 0.0).count();
    let model = DetectorModel { dims, scaler, ae, svm, k: bins[0].k, batch, seed };
    let report = TrainReport {
        loss_history,
        mse_initial,
        mse_final,
        svm: info,
        train_outlier_fraction: out as f64 / bins.len() as f64,
        train_scores,
    };
    Ok((model, report))
}

impl DetectorModel {
    fn check_dims(&self, b: &Bin) -> Result<(), DetectorError> {
        if b.tensor.dims != self.dims {
            return Err(DetectorError::Dims { expected: self.dims, got: b.tensor.dims });
        }
        Ok(())
    }

    /// SVM decision value per bin; positive means inlier (clean).
    pub fn scores(&self, bins: &[Bin]) -> Result<Vec<f64>, DetectorError> {
        if bins.is_empty() {
            return Ok(Vec::new());
        }
        for b in bins {
            self.check_dims(b)?;
        }
        let x = self.scaler.apply(stack(bins).view());
        let z = self.ae.encode(x.view());
        Ok(self.svm.decisions(z.view()))
    }

    pub fn score(&self, bin: &Bin) -> Result<f64, DetectorError> {
        Ok(self.scores(std::slice::from_ref(bin))?[0])
    }

    pub fn classify(&self, bins: &[Bin]) -> Result<Verdict, DetectorError> {
        vote(&self.scores(bins)?)
    }

    /// Scores every batch, then counts and metrics with TROJANED positive.
    pub fn evaluate(&self, labeled: &[(Vec<Bin>, Verdict)]) -> Result<EvalReport, DetectorError> {
        let scored = labeled
            .iter()
            .map(|(bins, truth)| Ok((self.scores(bins)?, *truth)))
            .collect::<Result<Vec<_>, DetectorError>>()?;
        evaluate_scores(&scored)
    }
}

/// Majority vote of per-bin signs; a tie counts as TROJANED.
pub fn vote(scores: &[f64]) -> Result<Verdict, DetectorError> {
    if scores.is_empty() {
        return Err(DetectorError::EmptyBatch);
    }
    let clean = scores.iter().filter(|&&s| s >= 0.0).count();
    Ok(if 2 * clean > scores.len() { Verdict::Clean } else { Verdict::Trojaned })
}

#[derive(Serialize, Deserialize)]
struct SvmDoc {
    sv: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    gamma: f64,
    rho: f64,
    nu: f64,
}

/// On-disk model document.
#[derive(Serialize, Deserialize)]
pub struct ModelDoc {
    dims: [usize; 3],
    scaler: Scaler,
    ae_layers: Vec<LayerDoc>,
    svm: SvmDoc,
    k: usize,
    #[serde(rename = "B")]
    batch: usize,
    seed: u64,
}

impl DetectorModel {
    pub fn to_json(&self) -> String {
        let doc = ModelDoc {
            dims: self.dims,
            scaler: self.scaler.clone(),
            ae_layers: self.ae.to_docs(),
            svm: SvmDoc {
                sv: self.svm.sv.clone(),
                alpha: self.svm.alpha.clone(),
                gamma: self.svm.gamma,
                rho: self.svm.rho,
                nu: self.svm.nu,
            },
            k: self.k,
            batch: self.batch,
            seed: self.seed,
        };
        serde_json::to_string(&doc).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, DetectorError> {
        let doc: ModelDoc = serde_json::from_str(s).map_err(|e| DetectorError::BadModel(e.to_string()))?;
        let ae = Autoencoder::from_docs(&doc.ae_layers).map_err(DetectorError::BadModel)?;
        let d: usize = doc.dims.iter().product();
        if ae.dim() != d || doc.scaler.mean.len() != d || doc.scaler.std.len() != d {
            return Err(DetectorError::BadModel("dims disagree with layer shapes".into()));
        }
        if doc.svm.sv.len() != doc.svm.alpha.len() || doc.svm.sv.iter().any(|v| v.len() != ae.latent_dim()) {
            return Err(DetectorError::BadModel("support vectors do not match latent width".into()));
        }
        Ok(Self {
            dims: doc.dims,
            scaler: doc.scaler,
            ae,
            svm: OcSvm { sv: doc.svm.sv, alpha: doc.svm.alpha, gamma: doc.svm.gamma, rho: doc.svm.rho, nu: doc.svm.nu },
            k: doc.k,
            batch: doc.batch,
            seed: doc.seed,
        })
    }
}
