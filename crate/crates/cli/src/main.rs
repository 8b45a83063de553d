// SPDX-License-Identifier: Apache-2.0
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use agetrojan::experiment::{run_experiment, stages, Artifacts, ExperimentConfig, ExperimentError, Report};
use clap::{Parser, Subcommand};

/// Trojan detection from bit-error fingerprints under aging and over-clocking.
#[derive(Parser, Debug)]
#[command(name = "agetrojan", version)]
struct Cli {
    /// Experiment config (JSON). Defaults to <out>/config.json.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the master seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the sweep stage.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Generate the clean netlist and the pattern split.
    GenBench,
    /// Insert the configured Trojans into the clean netlist.
    InsertTrojan,
    /// Write delay annotations for every netlist, IC and aging state.
    Annotate,
    /// Simulate every pattern over the clock and aging grid.
    Sweep,
    /// Extract feature tensors from the output grids.
    Features,
    /// Train the detector on clean training features.
    Train,
    /// Score the test sets batch by batch.
    Test,
    /// Compute metrics and write report files.
    Report,
    /// Run the full pipeline.
    Run,
}

enum Failure {
    Usage(String),
    Data(String),
    Stage(String),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        let msg = format!("{e}");
        match e {
            ExperimentError::Config(_) | ExperimentError::Data { .. } => Failure::Data(msg),
            ExperimentError::Stage { .. } => Failure::Stage(msg),
        }
    }
}

fn load_config(cli: &Cli, out: Option<&Path>) -> Result<ExperimentConfig, Failure> {
    let path = match (&cli.config, out) {
        (Some(p), _) => p.clone(),
        (None, Some(o)) => Artifacts::new(o).config(),
        (None, None) => return Err(Failure::Usage("--config or --out is required".into())),
    };
    let text = std::fs::read_to_string(&path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn summarize(r: &Report) {
    println!("{}: t_cp {:.1} ps, {} clean batches, false positive rate {:.4}", r.name, r.t_cp_ps, r.clean.batches, r.clean.false_positive_rate);
    for t in &r.trojans {
        let e = &t.report;
        println!(
            "  {}: accuracy {:.4} precision {:.4} recall {:.4} f1 {:.4} auc {:.4} (tp {} fp {} tn {} fn {})",
            t.netlist, e.accuracy, e.precision, e.recall, e.f1, e.auc, e.confusion.tp, e.confusion.fp, e.confusion.tn, e.confusion.fn_
        );
    }
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Failure::Usage("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Stage(format!("worker pool: {e}")))?;
    }
    let cfg = load_config(cli, cli.out.as_deref())?;
    let out = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let art = Artifacts::new(&out);
    match cli.cmd {
        Cmd::GenBench => stages::gen_bench(&cfg, &art)?,
        Cmd::InsertTrojan => stages::insert_trojan(&cfg, &art)?,
        Cmd::Annotate => stages::annotate(&cfg, &art)?,
        Cmd::Sweep => stages::sweep(&cfg, &art)?,
        Cmd::Features => stages::features(&cfg, &art)?,
        Cmd::Train => stages::train(&cfg, &art)?,
        Cmd::Test => stages::test(&cfg, &art)?,
        Cmd::Report => summarize(&stages::report(&cfg, &art)?),
        Cmd::Run => summarize(&run_experiment(&cfg, &out)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Stage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
