// SPDX-License-Identifier: Apache-2.0
//! Confusion counts and ROC over batch verdicts. TROJANED is the positive
//! class; every ratio with a zero denominator is reported as 0.

use serde::{Deserialize, Serialize};

use super::{vote, DetectorError, Verdict};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl Confusion {
    pub fn add(&mut self, predicted: Verdict, truth: Verdict) {
        match (predicted, truth) {
            (Verdict::Trojaned, Verdict::Trojaned) => self.tp += 1,
            (Verdict::Trojaned, Verdict::Clean) => self.fp += 1,
            (Verdict::Clean, Verdict::Clean) => self.tn += 1,
            (Verdict::Clean, Verdict::Trojaned) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// A batch is flagged when its mean score is `<=` this value.
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub confusion: Confusion,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub roc: Vec<RocPoint>,
    pub auc: f64,
}

/// Sweeps a threshold over the mean batch score. Starts at (0, 0) with a
/// threshold below every mean and ends with every batch flagged.
pub fn roc_curve(means: &[(f64, Verdict)]) -> Vec<RocPoint> {
    let pos = means.iter().filter(|m| m.1 == Verdict::Trojaned).count();
    let neg = means.len() - pos;
    let mut sorted: Vec<(f64, Verdict)> = means.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let start = sorted.first().map_or(0.0, |m| m.0 - 1.0);
    let mut out = vec![RocPoint { fpr: 0.0, tpr: 0.0, threshold: start }];
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < sorted.len() {
        let thr = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == thr {
            match sorted[i].1 {
                Verdict::Trojaned => tp += 1,
                Verdict::Clean => fp += 1,
            }
            i += 1;
        }
        out.push(RocPoint { fpr: ratio(fp, neg), tpr: ratio(tp, pos), threshold: thr });
    }
    out
}

/// Trapezoidal area under an ROC curve ordered by increasing fpr.
pub fn auc(roc: &[RocPoint]) -> f64 {
    roc.windows(2).map(|w| (w[1].fpr - w[0].fpr) * 0.5 * (w[0].tpr + w[1].tpr)).sum()
}

/// Votes each batch of bin scores and accumulates counts against the truth.
pub fn evaluate_scores(batches: &[(Vec<f64>, Verdict)]) -> Result<EvalReport, DetectorError> {
    let mut c = Confusion::default();
    let mut means = Vec::with_capacity(batches.len());
    for (scores, truth) in batches {
        c.add(vote(scores)?, *truth);
        means.push((scores.iter().sum::<f64>() / scores.len() as f64, *truth));
    }
    let roc = roc_curve(&means);
    Ok(EvalReport {
        confusion: c,
        accuracy: c.accuracy(),
        precision: c.precision(),
        recall: c.recall(),
        f1: c.f1(),
        auc: auc(&roc),
        roc,
    })
}
