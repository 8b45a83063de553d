// SPDX-License-Identifier: Apache-2.0
//! End-to-end harness: benchmark, Trojan insertion, annotation, sweep,
//! features, detector training and testing, report.
//!
//! Every stage is a function over in-memory values plus a persisted
//! artifact under the output directory, so any single stage can be rerun
//! from the files written upstream of it.

mod config;
mod report;

use std::fmt;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::{gen_patterns, generate};
use crate::bits::Bits;
use crate::detector::{self, DetectorModel, EvalReport, TrainReport, Verdict};
use crate::features::{bin_tensors, grid_tensors, read_tensors_jsonl, write_tensors_jsonl, FeatureTensor};
use crate::netlist::{parse_netlist, serialize_netlist, Netlist};
use crate::sim::{read_grid_jsonl, sweep, write_grid_jsonl, OutputGrid};
use crate::timing::{annotate, critical_path, AgingState, DelayAnnotation};
use crate::trojan::{area_fraction, insert_trojan};

pub use config::{default_fractions, ExperimentConfig, PatternConfig};
pub use report::{
    heatmap_csv, parse_scores_csv, roc_csv, scores_csv, BatchScore, CleanStats, InstanceResult, Report,
    TrojanResult,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    GenBench,
    InsertTrojan,
    Annotate,
    Sweep,
    Features,
    Train,
    Test,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::GenBench => "gen-bench",
            Stage::InsertTrojan => "insert-trojan",
            Stage::Annotate => "annotate",
            Stage::Sweep => "sweep",
            Stage::Features => "features",
            Stage::Train => "train",
            Stage::Test => "test",
            Stage::Report => "report",
        })
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{}: {msg}", path.display())]
    Data { path: PathBuf, msg: String },
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

fn at<E: std::error::Error + Send + Sync + 'static>(stage: Stage) -> impl FnOnce(E) -> ExperimentError {
    move |e| ExperimentError::Stage { stage, source: Box::new(e) }
}

fn data<E: fmt::Display>(path: &Path) -> impl FnOnce(E) -> ExperimentError + '_ {
    move |e| ExperimentError::Data { path: path.to_path_buf(), msg: e.to_string() }
}

/// File layout under the output directory.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub root: PathBuf,
}

impl Artifacts {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn netlist(&self, name: &str) -> PathBuf {
        self.root.join("netlists").join(format!("{name}.net"))
    }

    pub fn design(&self) -> PathBuf {
        self.root.join("netlists").join("summary.json")
    }

    pub fn patterns(&self) -> PathBuf {
        self.root.join("patterns.json")
    }

    pub fn annotation(&self, instance: &str, netlist: &str, duty: AgingState) -> PathBuf {
        self.root.join("annotations").join(instance).join(netlist).join(format!("duty{:03}.json", duty.duty()))
    }

    pub fn grid(&self, set: &str) -> PathBuf {
        self.root.join("grids").join(format!("{set}.jsonl"))
    }

    pub fn features(&self, set: &str) -> PathBuf {
        self.root.join("features").join(format!("{set}.jsonl"))
    }

    pub fn model(&self) -> PathBuf {
        self.root.join("model.json")
    }

    pub fn train_summary(&self) -> PathBuf {
        self.root.join("train_report.json")
    }

    pub fn scores(&self) -> PathBuf {
        self.root.join("scores.csv")
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report.json")
    }

    pub fn roc(&self) -> PathBuf {
        self.root.join("roc.csv")
    }

    pub fn heatmap(&self) -> PathBuf {
        self.root.join("heatmap.csv")
    }
}

fn write_bytes(path: &Path, stage: Stage, bytes: &[u8]) -> Result<(), ExperimentError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(at(stage))?;
    }
    fs::write(path, bytes).map_err(at(stage))
}

fn write_json<T: Serialize>(path: &Path, stage: Stage, v: &T) -> Result<(), ExperimentError> {
    let mut s = serde_json::to_string_pretty(v).map_err(at(stage))?;
    s.push('\n');
    write_bytes(path, stage, s.as_bytes())
}

fn read_text(path: &Path) -> Result<String, ExperimentError> {
    fs::read_to_string(path).map_err(data(path))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ExperimentError> {
    serde_json::from_str(&read_text(path)?).map_err(data(path))
}

fn with_writer(
    path: &Path,
    stage: Stage,
    f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
) -> Result<(), ExperimentError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(at(stage))?;
    }
    let mut w = BufWriter::new(fs::File::create(path).map_err(at(stage))?);
    f(&mut w).and_then(|_| w.flush()).map_err(at(stage))
}

/// Per-netlist facts recorded after insertion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetlistSummary {
    pub name: String,
    pub gates: usize,
    pub dffs: usize,
    pub critical_path_ps: f64,
    pub area_fraction: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSummary {
    /// Clean, unaged, variation-free critical path.
    pub t_cp_ps: f64,
    pub clocks_ps: Vec<f64>,
    pub netlists: Vec<NetlistSummary>,
}

/// Generated patterns after trigger exclusion, split into disjoint halves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternSplit {
    pub width: usize,
    pub generated: usize,
    pub excluded: Vec<Bits>,
    pub train: Vec<Bits>,
    pub test: Vec<Bits>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub bins: usize,
    pub dims: [usize; 3],
    pub mse_initial: f64,
    pub mse_final: f64,
    pub final_loss: Option<f64>,
    pub kkt_gap: f64,
    pub svm_iterations: usize,
    pub support_vectors: usize,
    pub gamma: f64,
    pub rho: f64,
    pub outlier_fraction: f64,
}

impl TrainSummary {
    fn new(m: &DetectorModel, r: &TrainReport, bins: usize) -> Self {
        Self {
            bins,
            dims: m.dims,
            mse_initial: r.mse_initial,
            mse_final: r.mse_final,
            final_loss: r.loss_history.last().copied(),
            kkt_gap: r.svm.kkt_gap,
            svm_iterations: r.svm.iterations,
            support_vectors: m.svm.sv.len(),
            gamma: m.svm.gamma,
            rho: m.svm.rho,
            outlier_fraction: r.train_outlier_fraction,
        }
    }
}

/// Annotations of one netlist on one IC, one per aging state.
pub struct AnnotationSet {
    pub instance: String,
    pub netlist: String,
    pub per_duty: Vec<DelayAnnotation>,
}

/// The `test_<instance>_<netlist>` sets, in report order.
pub fn test_sets(cfg: &ExperimentConfig) -> Vec<(String, String)> {
    let mut v = Vec::new();
    for i in cfg.instance_names() {
        for n in cfg.netlist_names() {
            v.push((i.clone(), n));
        }
    }
    v
}

pub fn set_name(instance: &str, netlist: &str) -> String {
    format!("test_{instance}_{netlist}")
}

pub const TRAIN_SET: &str = "train";

pub fn gen_bench(cfg: &ExperimentConfig) -> Result<Netlist, ExperimentError> {
    generate(&cfg.bench).map_err(at(Stage::GenBench))
}

/// Structured and random patterns minus every trigger match, shuffled and
/// split; the train and test halves never share an input.
pub fn make_patterns(cfg: &ExperimentConfig) -> PatternSplit {
    let w = cfg.bench.width_in();
    let mut set = gen_patterns(w, cfg.patterns.n_random, cfg.pattern_seed());
    let generated = set.len();
    let excluded: Vec<Bits> = set.inputs.iter().copied().filter(|x| cfg.trojans.iter().any(|t| t.fires(x))).collect();
    for x in &excluded {
        set.exclude(x);
    }
    let mut inputs = set.inputs;
    inputs.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.split_seed()));
    let n_train = ((inputs.len() as f64) * cfg.train_fraction).round() as usize;
    let test = inputs.split_off(n_train);
    PatternSplit { width: w, generated, excluded, train: inputs, test }
}

pub fn insert_trojans(cfg: &ExperimentConfig, clean: &Netlist) -> Result<Vec<Netlist>, ExperimentError> {
    let fresh = annotate(clean, &cfg.lib, &cfg.aging, AgingState::FRESH, None).map_err(at(Stage::InsertTrojan))?;
    cfg.trojans.iter().map(|t| insert_trojan(clean, t, &fresh).map_err(at(Stage::InsertTrojan))).collect()
}

pub fn design_summary(
    cfg: &ExperimentConfig,
    clean: &Netlist,
    trojaned: &[Netlist],
) -> Result<DesignSummary, ExperimentError> {
    let mut netlists = Vec::new();
    let mut t_cp = 0.0;
    for (name, n) in cfg.netlist_names().iter().zip(std::iter::once(clean).chain(trojaned)) {
        let a = annotate(n, &cfg.lib, &cfg.aging, AgingState::FRESH, None).map_err(at(Stage::InsertTrojan))?;
        let cp = critical_path(n, &a).map_err(at(Stage::InsertTrojan))?.delay;
        let area = if std::ptr::eq(n, clean) {
            t_cp = cp;
            None
        } else {
            Some(area_fraction(clean, n).map_err(at(Stage::InsertTrojan))?)
        };
        let st = n.stats();
        netlists.push(NetlistSummary {
            name: name.clone(),
            gates: st.gate_count,
            dffs: st.dff_count,
            critical_path_ps: cp,
            area_fraction: area,
        });
    }
    let clocks_ps = cfg.clock_fractions.iter().map(|f| f * t_cp).collect();
    Ok(DesignSummary { t_cp_ps: t_cp, clocks_ps, netlists })
}

/// Annotation sets needed downstream: the golden clean model for training
/// and every netlist on every IC under test.
pub fn annotate_all(cfg: &ExperimentConfig, nets: &[(String, &Netlist)]) -> Result<Vec<AnnotationSet>, ExperimentError> {
    let mut combos = vec![("golden".to_string(), "clean".to_string())];
    for (i, n) in test_sets(cfg) {
        if !combos.contains(&(i.clone(), n.clone())) {
            combos.push((i, n));
        }
    }
    combos
        .into_iter()
        .map(|(inst, net)| {
            let n = nets.iter().find(|(name, _)| *name == net).map(|(_, n)| *n).expect("netlist present");
            let v = cfg.instance_variation(&inst);
            let per_duty = cfg
                .aging_states()
                .into_iter()
                .map(|s| annotate(n, &cfg.lib, &cfg.aging, s, v).map_err(at(Stage::Annotate)))
                .collect::<Result<_, _>>()?;
            Ok(AnnotationSet { instance: inst, netlist: net, per_duty })
        })
        .collect()
}

fn read_cycle(n: &Netlist, stage: Stage) -> Result<usize, ExperimentError> {
    n.n_read().ok_or_else(|| ExperimentError::Stage { stage, source: "netlist has no read cycle".into() })
}

pub fn sweep_set(
    n: &Netlist,
    anns: &[DelayAnnotation],
    clocks: &[f64],
    inputs: &[Bits],
) -> Result<OutputGrid, ExperimentError> {
    let g = sweep(n, anns, clocks, inputs, read_cycle(n, Stage::Sweep)?).map_err(at(Stage::Sweep))?;
    if g.failures() > 0 {
        log::warn!("{} simulations failed and count as missing cells", g.failures());
    }
    Ok(g)
}

pub fn tensors_of(g: &OutputGrid) -> Result<Vec<FeatureTensor>, ExperimentError> {
    grid_tensors(g).map_err(at(Stage::Features))
}

pub fn train_detector(
    cfg: &ExperimentConfig,
    tensors: &[FeatureTensor],
) -> Result<(DetectorModel, TrainSummary), ExperimentError> {
    let bins = bin_tensors(tensors, cfg.k).map_err(at(Stage::Train))?;
    let (m, r) = detector::train(&bins, &cfg.detector, cfg.batch, cfg.train_seed()).map_err(at(Stage::Train))?;
    let s = TrainSummary::new(&m, &r, bins.len());
    Ok((m, s))
}

/// Bins one test set and scores it batch by batch.
pub fn score_set(
    cfg: &ExperimentConfig,
    m: &DetectorModel,
    instance: &str,
    netlist: &str,
    tensors: &[FeatureTensor],
) -> Result<Vec<BatchScore>, ExperimentError> {
    let bins = bin_tensors(tensors, cfg.k).map_err(at(Stage::Test))?;
    let scores = m.scores(&bins).map_err(at(Stage::Test))?;
    let truth = if netlist == "clean" { Verdict::Clean } else { Verdict::Trojaned };
    Ok(scores
        .chunks_exact(cfg.batch)
        .enumerate()
        .map(|(i, s)| BatchScore {
            instance: instance.to_string(),
            netlist: netlist.to_string(),
            batch: i,
            truth,
            scores: s.to_vec(),
        })
        .collect())
}

/// Everything the report stage consumes.
pub struct ReportInputs<'a> {
    pub cfg: &'a ExperimentConfig,
    pub design: &'a DesignSummary,
    pub patterns: &'a PatternSplit,
    pub train: &'a TrainSummary,
    pub scores: &'a [BatchScore],
    /// Mean-feature heat map sources: (set name, tensors).
    pub heat: Vec<(String, &'a [FeatureTensor])>,
}

pub fn write_report(art: &Artifacts, r: &ReportInputs) -> Result<Report, ExperimentError> {
    let rep = report::build(r)?;
    write_json(&art.report(), Stage::Report, &rep)?;
    let roc = rep.primary.as_ref().map(|p| p.roc.as_slice()).unwrap_or(&[]);
    write_bytes(&art.roc(), Stage::Report, roc_csv(roc).as_bytes())?;
    let heat = heatmap_csv(&r.design.clocks_ps, &r.cfg.clock_fractions, &r.cfg.duties, &r.heat);
    write_bytes(&art.heatmap(), Stage::Report, heat.as_bytes())?;
    Ok(rep)
}

/// Persisting and loading of each artifact.
impl Artifacts {
    pub fn save_netlist(&self, name: &str, n: &Netlist, stage: Stage) -> Result<(), ExperimentError> {
        write_bytes(&self.netlist(name), stage, serialize_netlist(n).as_bytes())
    }

    pub fn load_netlist(&self, name: &str) -> Result<Netlist, ExperimentError> {
        let p = self.netlist(name);
        parse_netlist(&read_text(&p)?).map_err(data(&p))
    }

    pub fn load_netlists(&self, cfg: &ExperimentConfig) -> Result<Vec<(String, Netlist)>, ExperimentError> {
        cfg.netlist_names().into_iter().map(|n| Ok((n.clone(), self.load_netlist(&n)?))).collect()
    }

    pub fn save_patterns(&self, p: &PatternSplit) -> Result<(), ExperimentError> {
        write_json(&self.patterns(), Stage::GenBench, p)
    }

    pub fn load_patterns(&self) -> Result<PatternSplit, ExperimentError> {
        read_json(&self.patterns())
    }

    pub fn save_design(&self, d: &DesignSummary) -> Result<(), ExperimentError> {
        write_json(&self.design(), Stage::InsertTrojan, d)
    }

    pub fn load_design(&self) -> Result<DesignSummary, ExperimentError> {
        read_json(&self.design())
    }

    pub fn save_annotations(&self, a: &AnnotationSet) -> Result<(), ExperimentError> {
        for d in &a.per_duty {
            write_json(&self.annotation(&a.instance, &a.netlist, d.duty), Stage::Annotate, d)?;
        }
        Ok(())
    }

    pub fn load_annotations(
        &self,
        cfg: &ExperimentConfig,
        instance: &str,
        netlist: &str,
    ) -> Result<Vec<DelayAnnotation>, ExperimentError> {
        cfg.aging_states().into_iter().map(|s| read_json(&self.annotation(instance, netlist, s))).collect()
    }

    pub fn save_grid(&self, set: &str, g: &OutputGrid) -> Result<(), ExperimentError> {
        with_writer(&self.grid(set), Stage::Sweep, |w| write_grid_jsonl(g, w))
    }

    pub fn load_grid(&self, set: &str, width_in: usize, width_out: usize) -> Result<OutputGrid, ExperimentError> {
        let p = self.grid(set);
        let f = fs::File::open(&p).map_err(data(&p))?;
        read_grid_jsonl(BufReader::new(f), width_in, width_out).map_err(data(&p))
    }

    pub fn save_features(&self, set: &str, inputs: &[Bits], t: &[FeatureTensor]) -> Result<(), ExperimentError> {
        with_writer(&self.features(set), Stage::Features, |w| write_tensors_jsonl(inputs, t, w))
    }

    pub fn load_features(&self, set: &str, width_in: usize) -> Result<Vec<FeatureTensor>, ExperimentError> {
        let p = self.features(set);
        let f = fs::File::open(&p).map_err(data(&p))?;
        Ok(read_tensors_jsonl(BufReader::new(f), width_in).map_err(data(&p))?.1)
    }

    pub fn save_model(&self, m: &DetectorModel, s: &TrainSummary) -> Result<(), ExperimentError> {
        write_bytes(&self.model(), Stage::Train, m.to_json().as_bytes())?;
        write_json(&self.train_summary(), Stage::Train, s)
    }

    pub fn load_model(&self) -> Result<(DetectorModel, TrainSummary), ExperimentError> {
        let p = self.model();
        let m = DetectorModel::from_json(&read_text(&p)?).map_err(data(&p))?;
        Ok((m, read_json(&self.train_summary())?))
    }

    pub fn save_scores(&self, s: &[BatchScore]) -> Result<(), ExperimentError> {
        write_bytes(&self.scores(), Stage::Test, scores_csv(s).as_bytes())
    }

    pub fn load_scores(&self) -> Result<Vec<BatchScore>, ExperimentError> {
        let p = self.scores();
        parse_scores_csv(&read_text(&p)?).map_err(data(&p))
    }
}

/// Stage entry points shared by `run` and the single-stage subcommands.
/// Each reads its inputs from the artifact directory and writes its own.
pub mod stages {
    use super::*;

    pub fn gen_bench(cfg: &ExperimentConfig, art: &Artifacts) -> Result<(), ExperimentError> {
        let n = super::gen_bench(cfg)?;
        art.save_netlist("clean", &n, Stage::GenBench)?;
        art.save_patterns(&make_patterns(cfg))?;
        write_bytes(&art.config(), Stage::GenBench, format!("{}\n", cfg.clone().resolved().to_json()).as_bytes())
    }

    pub fn insert_trojan(cfg: &ExperimentConfig, art: &Artifacts) -> Result<(), ExperimentError> {
        let clean = art.load_netlist("clean")?;
        let tj = insert_trojans(cfg, &clean)?;
        for (name, n) in cfg.netlist_names().iter().skip(1).zip(&tj) {
            art.save_netlist(name, n, Stage::InsertTrojan)?;
        }
        art.save_design(&design_summary(cfg, &clean, &tj)?)
    }

    pub fn annotate(cfg: &ExperimentConfig, art: &Artifacts) -> Result<(), ExperimentError> {
        let nets = art.load_netlists(cfg)?;
        let refs: Vec<(String, &Netlist)> = nets.iter().map(|(s, n)| (s.clone(), n)).collect();
        for a in annotate_all(cfg, &refs)? {
            art.save_annotations(&a)?;
        }
        Ok(())
    }

    pub fn sweep(cfg: &ExperimentConfig, art: &Artifacts) -> Result<(), ExperimentError> {
        let nets = art.load_netlists(cfg)?;
        let design = art.load_design()?;
        let pats = art.load_patterns()?;
        let clean = &nets[0].1;
        let anns = art.load_annotations(cfg, "golden", "clean")?;
        art.save_grid(TRAIN_SET, &sweep_set(clean, &anns, &design.clocks_ps, &pats.train)?)?;
        for (inst, net) in test_sets(cfg) {
            let n = &nets.iter().find(|(s, _)| *s == net).expect("listed").1;
            let anns = art.load_annotations(cfg, &inst, &net)?;
            art.save_grid(&set_name(&inst, &net), &sweep_set(n, &anns, &design.clocks_ps, &pats.test)?)?;
        }
        Ok(())
    }

    pub fn features(cfg: &ExperimentConfig, art: &Artifacts) -> Result<(), ExperimentError> {
        let clean = art.load_netlist("clean")?;
        let sets = std::iter::once(TRAIN_SET.to_string()).chain(test_sets(cfg).into_iter().map(|(i, n)| set_name(&i, &n)));
        for set in sets {
            let g = art.load_grid(&set, clean.width_in(), clean.width_out())?;
            let inputs: Vec<Bits> = g.rows.iter().map(|r| r.input).collect();
            art.save_features(&set, &inputs, &tensors_of(&g)?)?;
        }
        Ok(())
    }

    pub fn train(cfg: &ExperimentConfig, art: &Artifacts) -> Result<(), ExperimentError> {
        let t = art.load_features(TRAIN_SET, cfg.bench.width_in())?;
        let (m, s) = train_detector(cfg, &t)?;
        art.save_model(&m, &s)
    }

    pub fn test(cfg: &ExperimentConfig, art: &Artifacts) -> Result<(), ExperimentError> {
        let (m, _) = art.load_model()?;
        let mut all = Vec::new();
        for (inst, net) in test_sets(cfg) {
            let t = art.load_features(&set_name(&inst, &net), cfg.bench.width_in())?;
            all.extend(score_set(cfg, &m, &inst, &net, &t)?);
        }
        art.save_scores(&all)
    }

    pub fn report(cfg: &ExperimentConfig, art: &Artifacts) -> Result<Report, ExperimentError> {
        let design = art.load_design()?;
        let patterns = art.load_patterns()?;
        let (_, train) = art.load_model()?;
        let scores = art.load_scores()?;
        let first = &cfg.instance_names()[0];
        let mut heat_sets = Vec::new();
        for net in cfg.netlist_names() {
            let set = set_name(first, &net);
            heat_sets.push((set.clone(), art.load_features(&set, cfg.bench.width_in())?));
        }
        let heat = heat_sets.iter().map(|(s, t)| (s.clone(), t.as_slice())).collect();
        write_report(art, &ReportInputs { cfg, design: &design, patterns: &patterns, train: &train, scores: &scores, heat })
    }
}

/// Runs every stage in memory, persisting artifacts as it goes.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<Report, ExperimentError> {
    cfg.check()?;
    let cfg = &cfg.clone().resolved();
    let art = Artifacts::new(out);
    write_bytes(&art.config(), Stage::GenBench, format!("{}\n", cfg.to_json()).as_bytes())?;

    let clean = gen_bench(cfg)?;
    art.save_netlist("clean", &clean, Stage::GenBench)?;
    let patterns = make_patterns(cfg);
    art.save_patterns(&patterns)?;
    log::info!(
        "patterns: {} generated, {} excluded, {} train, {} test",
        patterns.generated,
        patterns.excluded.len(),
        patterns.train.len(),
        patterns.test.len()
    );

    let trojaned = insert_trojans(cfg, &clean)?;
    let names = cfg.netlist_names();
    for (name, n) in names.iter().skip(1).zip(&trojaned) {
        art.save_netlist(name, n, Stage::InsertTrojan)?;
    }
    let design = design_summary(cfg, &clean, &trojaned)?;
    art.save_design(&design)?;
    log::info!("t_cp = {} ps", design.t_cp_ps);

    let nets: Vec<(String, &Netlist)> =
        names.iter().cloned().zip(std::iter::once(&clean).chain(trojaned.iter())).collect();
    let anns = annotate_all(cfg, &nets)?;
    for a in &anns {
        art.save_annotations(a)?;
    }
    let find_ann = |inst: &str, net: &str| {
        &anns.iter().find(|a| a.instance == inst && a.netlist == net).expect("annotated").per_duty
    };
    let find_net = |net: &str| nets.iter().find(|(s, _)| s == net).expect("listed").1;

    let featurize = |set: &str, n: &Netlist, a: &[DelayAnnotation], inputs: &[Bits]| {
        log::info!("sweeping {set}: {} inputs", inputs.len());
        let g = sweep_set(n, a, &design.clocks_ps, inputs)?;
        if cfg.keep_grids {
            art.save_grid(set, &g)?;
        }
        let t = tensors_of(&g)?;
        art.save_features(set, inputs, &t)?;
        Ok::<_, ExperimentError>(t)
    };

    let train_t = featurize(TRAIN_SET, &clean, find_ann("golden", "clean"), &patterns.train)?;
    let (model, train) = train_detector(cfg, &train_t)?;
    drop(train_t);
    art.save_model(&model, &train)?;
    log::info!("trained on {} bins; training outlier fraction {}", train.bins, train.outlier_fraction);

    let mut scores = Vec::new();
    let first = cfg.instance_names()[0].clone();
    let mut heat_sets = Vec::new();
    for (inst, net) in test_sets(cfg) {
        let set = set_name(&inst, &net);
        let t = featurize(&set, find_net(&net), find_ann(&inst, &net), &patterns.test)?;
        scores.extend(score_set(cfg, &model, &inst, &net, &t)?);
        if inst == first {
            heat_sets.push((set, t));
        }
    }
    art.save_scores(&scores)?;

    let heat = heat_sets.iter().map(|(s, t)| (s.clone(), t.as_slice())).collect();
    write_report(
        &art,
        &ReportInputs { cfg, design: &design, patterns: &patterns, train: &train, scores: &scores, heat },
    )
}

/// The primary comparison alone: clean batches against the first Trojan.
pub fn primary_eval(scores: &[BatchScore]) -> Option<EvalReport> {
    report::evaluate_pair(scores, "trojan0")
}
