// SPDX-License-Identifier: Apache-2.0
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::detector::{evaluate_scores, vote, EvalReport, RocPoint, Verdict};
use crate::features::{mean_tensor, FeatureTensor};

use super::{at, ExperimentError, NetlistSummary, ReportInputs, Stage, TrainSummary};

/// Per-bin decision values of one vote batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchScore {
    pub instance: String,
    pub netlist: String,
    pub batch: usize,
    pub truth: Verdict,
    pub scores: Vec<f64>,
}

impl BatchScore {
    pub fn verdict(&self) -> Verdict {
        vote(&self.scores).expect("batches are non-empty")
    }

    pub fn mean(&self) -> f64 {
        self.scores.iter().sum::<f64>() / self.scores.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CleanStats {
    pub batches: usize,
    pub flagged: usize,
    pub false_positive_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrojanResult {
    pub netlist: String,
    pub report: EvalReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub instance: String,
    pub clean_batches: usize,
    pub clean_flagged: usize,
    pub trojan_batches: usize,
    pub trojan_detected: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    pub patterns: u64,
    pub split: u64,
    pub train: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternCounts {
    pub generated: usize,
    pub excluded: usize,
    pub train: usize,
    pub test: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub seeds: Seeds,
    pub t_cp_ps: f64,
    pub clocks_ps: Vec<f64>,
    pub duties: Vec<u32>,
    pub k: usize,
    #[serde(rename = "B")]
    pub batch: usize,
    pub patterns: PatternCounts,
    pub netlists: Vec<NetlistSummary>,
    pub train: TrainSummary,
    pub clean: CleanStats,
    /// Clean batches against the first Trojan; absent without Trojans.
    pub primary: Option<EvalReport>,
    pub trojans: Vec<TrojanResult>,
    pub instances: Vec<InstanceResult>,
}

pub(super) fn evaluate_pair(scores: &[BatchScore], trojan: &str) -> Option<EvalReport> {
    let pairs: Vec<(Vec<f64>, Verdict)> = scores
        .iter()
        .filter(|b| b.netlist == "clean" || b.netlist == trojan)
        .map(|b| (b.scores.clone(), b.truth))
        .collect();
    if !pairs.iter().any(|p| p.1 == Verdict::Trojaned) {
        return None;
    }
    Some(evaluate_scores(&pairs).expect("batches are non-empty"))
}

pub(super) fn build(r: &ReportInputs) -> Result<Report, ExperimentError> {
    let cfg = r.cfg;
    let clean: Vec<&BatchScore> = r.scores.iter().filter(|b| b.netlist == "clean").collect();
    let flagged = clean.iter().filter(|b| b.verdict() == Verdict::Trojaned).count();
    let fpr = if clean.is_empty() { 0.0 } else { flagged as f64 / clean.len() as f64 };
    let trojans: Vec<TrojanResult> = cfg
        .netlist_names()
        .into_iter()
        .skip(1)
        .filter_map(|n| evaluate_pair(r.scores, &n).map(|report| TrojanResult { netlist: n, report }))
        .collect();
    let instances = cfg
        .instance_names()
        .into_iter()
        .map(|inst| {
            let of = |net: &str| r.scores.iter().filter(|b| b.instance == inst && b.netlist == net).collect::<Vec<_>>();
            let c = of("clean");
            let t = of("trojan0");
            let cf = c.iter().filter(|b| b.verdict() == Verdict::Trojaned).count();
            let td = t.iter().filter(|b| b.verdict() == Verdict::Trojaned).count();
            let total = c.len() + t.len();
            InstanceResult {
                instance: inst,
                clean_batches: c.len(),
                clean_flagged: cf,
                trojan_batches: t.len(),
                trojan_detected: td,
                accuracy: if total == 0 { 0.0 } else { (c.len() - cf + td) as f64 / total as f64 },
            }
        })
        .collect();
    if r.scores.is_empty() {
        return Err(at(Stage::Report)(std::io::Error::other("no test batches were scored")));
    }
    Ok(Report {
        name: cfg.name.clone(),
        seeds: Seeds {
            master: cfg.seed,
            patterns: cfg.pattern_seed(),
            split: cfg.split_seed(),
            train: cfg.train_seed(),
        },
        t_cp_ps: r.design.t_cp_ps,
        clocks_ps: r.design.clocks_ps.clone(),
        duties: cfg.duties.clone(),
        k: cfg.k,
        batch: cfg.batch,
        patterns: PatternCounts {
            generated: r.patterns.generated,
            excluded: r.patterns.excluded.len(),
            train: r.patterns.train.len(),
            test: r.patterns.test.len(),
        },
        netlists: r.design.netlists.clone(),
        train: r.train.clone(),
        clean: CleanStats { batches: clean.len(), flagged, false_positive_rate: fpr },
        primary: trojans.first().map(|t| t.report.clone()),
        trojans,
        instances,
    })
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Clean => "CLEAN",
        Verdict::Trojaned => "TROJANED",
    }
}

pub fn scores_csv(s: &[BatchScore]) -> String {
    let mut out = String::from("instance,netlist,batch,truth,verdict,mean_score,bin_scores\n");
    for b in s {
        let bins: Vec<String> = b.scores.iter().map(|v| v.to_string()).collect();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            b.instance,
            b.netlist,
            b.batch,
            verdict_str(b.truth),
            verdict_str(b.verdict()),
            b.mean(),
            bins.join(";")
        )
        .unwrap();
    }
    out
}

pub fn parse_scores_csv(text: &str) -> Result<Vec<BatchScore>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.starts_with("instance,netlist,batch,truth") => {}
        _ => return Err("missing scores header".into()),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(format!("line {}: expected 7 fields", i + 2));
            }
            let truth = match f[3] {
                "CLEAN" => Verdict::Clean,
                "TROJANED" => Verdict::Trojaned,
                o => return Err(format!("line {}: bad truth {o}", i + 2)),
            };
            let scores = f[6]
                .split(';')
                .map(|v| v.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 2)))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(BatchScore {
                instance: f[0].to_string(),
                netlist: f[1].to_string(),
                batch: f[2].parse().map_err(|e| format!("line {}: {e}", i + 2))?,
                truth,
                scores,
            })
        })
        .collect()
}

pub fn roc_csv(roc: &[RocPoint]) -> String {
    let mut out = String::from("fpr,tpr,threshold\n");
    for p in roc {
        writeln!(out, "{},{},{}", p.fpr, p.tpr, p.threshold).unwrap();
    }
    out
}

/// Mean f1..f4 per (set, clock, duty).
pub fn heatmap_csv(clocks_ps: &[f64], fractions: &[f64], duties: &[u32], sets: &[(String, &[FeatureTensor])]) -> String {
    let mut out = String::from("set,clock_fraction,clock_ps,duty,f1,f2,f3,f4\n");
    for (name, t) in sets {
        let Some(m) = mean_tensor(t) else { continue };
        for (i, (c, f)) in clocks_ps.iter().zip(fractions).enumerate() {
            for (j, d) in duties.iter().enumerate() {
                writeln!(
                    out,
                    "{name},{f},{c},{d},{},{},{},{}",
                    m.get(i, j, 0),
                    m.get(i, j, 1),
                    m.get(i, j, 2),
                    m.get(i, j, 3)
                )
                .unwrap();
            }
        }
    }
    out
}
