//! Command-line entry point for the anomaly-detection pipeline.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use atyp_cli::config::RunConfig;
use atyp_cli::pipeline::{self, files, DetectMethod, RunPaths, StageTimer};
use atyp_cli::report;
use atyp_core::io as artifacts_io;
use atyp_core::series::GroundTruth;

#[derive(Parser)]
#[command(
    name = "atyp",
    version,
    about = "Cluster bivariate signal segments and flag atypical curves"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Detector selection on the command line.
#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Ct,
    Cq,
    Both,
}

impl From<MethodArg> for DetectMethod {
    fn from(value: MethodArg) -> Self {
        match value {
            MethodArg::Ct => DetectMethod::Ct,
            MethodArg::Cq => DetectMethod::Cq,
            MethodArg::Both => DetectMethod::Both,
        }
    }
}

/// Configuration source plus per-field overrides. Flags beat the config
/// file; the file beats built-in defaults.
#[derive(Debug, Clone, Default, Args)]
struct ConfigArgs {
    /// TOML run configuration (built-in defaults apply when omitted).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; generator, SOM, and medoid seeds derive from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Quantile level for tubes and CQ tables, in (0,1).
    #[arg(long)]
    alpha: Option<f64>,
    /// Longest-run share that flags a curve under the tube detector.
    #[arg(long)]
    ct_run_threshold: Option<f64>,
    /// Violation share that flags a curve under the quantile detector.
    #[arg(long)]
    cq_violation_threshold: Option<f64>,
    /// Equal-frequency bin count for the CQ lag tables.
    #[arg(long)]
    cq_bins: Option<usize>,
    /// Minimum transition pairs per CQ bin.
    #[arg(long)]
    cq_min_bin_count: Option<usize>,
    /// Explained-variance level that picks the cluster count.
    #[arg(long)]
    explained_variance_threshold: Option<f64>,
    /// Fixed cluster count (bypasses the explained-variance criterion).
    #[arg(long)]
    forced_k: Option<usize>,
    /// Curves sampled per cluster when hunting the medoid (0 = all).
    #[arg(long)]
    medoid_sample_cap: Option<usize>,
    /// SOM grid rows.
    #[arg(long)]
    som_rows: Option<usize>,
    /// SOM grid columns.
    #[arg(long)]
    som_cols: Option<usize>,
    /// SOM training epochs.
    #[arg(long)]
    som_epochs: Option<usize>,
    /// SOM initial learning rate.
    #[arg(long)]
    som_learning_rate: Option<f64>,
    /// SOM initial neighborhood radius.
    #[arg(long)]
    som_radius: Option<f64>,
    /// Number of segments the generator simulates.
    #[arg(long)]
    n_signals: Option<usize>,
    /// Number of those segments that receive an injected anomaly.
    #[arg(long)]
    n_anomalies: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.ct_run_threshold {
            cfg.ct_run_threshold = v;
        }
        if let Some(v) = self.cq_violation_threshold {
            cfg.cq_violation_threshold = v;
        }
        if let Some(v) = self.cq_bins {
            cfg.cq_bins = v;
        }
        if let Some(v) = self.cq_min_bin_count {
            cfg.cq_min_bin_count = v;
        }
        if let Some(v) = self.explained_variance_threshold {
            cfg.explained_variance_threshold = v;
        }
        if let Some(v) = self.forced_k {
            cfg.forced_k = Some(v);
        }
        if let Some(v) = self.medoid_sample_cap {
            cfg.medoid_sample_cap = v;
        }
        if let Some(v) = self.som_rows {
            cfg.som.grid_rows = v;
        }
        if let Some(v) = self.som_cols {
            cfg.som.grid_cols = v;
        }
        if let Some(v) = self.som_epochs {
            cfg.som.epochs = v;
        }
        if let Some(v) = self.som_learning_rate {
            cfg.som.initial_learning_rate = v;
        }
        if let Some(v) = self.som_radius {
            cfg.som.initial_radius = v;
        }
        if let Some(v) = self.n_signals {
            cfg.generator.n_signals = v;
        }
        if let Some(v) = self.n_anomalies {
            cfg.generator.n_anomalies = v;
        }
        let cfg = cfg.with_derived_seeds();
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and write segments.csv + labels.csv.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Run directory to create.
        #[arg(long)]
        out: PathBuf,
    },
    /// Execute the full pipeline: simulate (or load), cluster, align,
    /// detect, and (when labels exist) evaluate.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Segments CSV to analyse instead of simulating.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Run directory to create.
        #[arg(long)]
        out: PathBuf,
        /// Detector(s) to apply.
        #[arg(long, value_enum, default_value = "both")]
        method: MethodArg,
    },
    /// Extract features, train the map, and assign superclusters.
    Cluster {
        #[command(flatten)]
        config: ConfigArgs,
        /// Segments CSV to cluster.
        #[arg(long = "in")]
        input: PathBuf,
        /// Run directory to create.
        #[arg(long)]
        out: PathBuf,
    },
    /// Pick medoid references and realign members (needs a run directory
    /// holding segments.csv and model.toml).
    Align {
        #[command(flatten)]
        config: ConfigArgs,
        /// Run directory with prior-stage artifacts.
        #[arg(long)]
        run: PathBuf,
    },
    /// Fit detectors on aligned curves and write verdicts (needs
    /// aligned.csv in the run directory).
    Detect {
        #[command(flatten)]
        config: ConfigArgs,
        /// Run directory with prior-stage artifacts.
        #[arg(long)]
        run: PathBuf,
        /// Detector(s) to apply.
        #[arg(long, value_enum, default_value = "both")]
        method: MethodArg,
    },
    /// Cross-tabulate verdicts against ground-truth labels.
    Evaluate {
        /// Run directory holding verdicts.csv.
        #[arg(long)]
        run: PathBuf,
        /// Labels CSV (defaults to labels.csv inside the run directory).
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Render report.txt and per-cluster plot CSVs from a completed run.
    Report {
        /// Run directory holding the pipeline artifacts.
        #[arg(long)]
        run: PathBuf,
    },
}

fn count_injected(dataset: &atyp_core::series::Dataset) -> usize {
    dataset
        .segments()
        .iter()
        .filter(|s| s.ground_truth().is_some_and(|g| g != GroundTruth::Normal))
        .count()
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate { config, out } => {
            let cfg = config.resolve()?;
            let run = RunPaths::new(out)?;
            std::fs::write(run.file(files::CONFIG), cfg.to_toml()?)
                .context("persisting config")?;
            let mut timer = StageTimer::default();
            let dataset = timer.time("simulate", || pipeline::simulate_stage(&cfg, &run))?;
            pipeline::write_manifest(&cfg, &timer, &[], &run)?;
            println!(
                "simulated {} segments ({} anomalous) into {}",
                dataset.len(),
                count_injected(&dataset),
                run.root().display()
            );
        }
        Command::Run {
            config,
            input,
            out,
            method,
        } => {
            let cfg = config.resolve()?;
            let run = RunPaths::new(out)?;
            let outcome = pipeline::run_pipeline(&cfg, input.as_deref(), method.into(), &run)?;
            println!(
                "analysed {} segments in {} clusters; {} verdicts written to {}",
                outcome.n_segments,
                outcome.n_clusters,
                outcome.verdicts.len(),
                run.root().display()
            );
            for note in &outcome.skipped {
                println!("skipped: {note}");
            }
            if let Some(matrices) = &outcome.matrices {
                let mut totals: BTreeMap<&str, usize> = BTreeMap::new();
                for m in matrices {
                    if matches!(m.scope, atyp_core::detect::Scope::X | atyp_core::detect::Scope::Y)
                    {
                        *totals.entry(m.method.as_str()).or_insert(0) += m.na_d;
                    }
                }
                for (method, n) in totals {
                    println!("false alarms over X+Y channels  {method}: {n}");
                }
            }
        }
        Command::Cluster { config, input, out } => {
            let cfg = config.resolve()?;
            let run = RunPaths::new(out)?;
            std::fs::write(run.file(files::CONFIG), cfg.to_toml()?)
                .context("persisting config")?;
            let mut timer = StageTimer::default();
            let dataset = timer.time("load", || pipeline::load_stage(&input))?;
            timer.time("persist-segments", || {
                let w = std::fs::File::create(run.file(files::SEGMENTS))?;
                artifacts_io::write_segments_csv(std::io::BufWriter::new(w), &dataset, true)?;
                Ok(())
            })?;
            let model = timer.time("cluster", || pipeline::cluster_stage(&cfg, &dataset, &run))?;
            pipeline::write_manifest(&cfg, &timer, &[], &run)?;
            println!(
                "assigned {} segments to {} clusters in {}",
                dataset.len(),
                model.assignment.n_clusters(),
                run.root().display()
            );
        }
        Command::Align { config, run } => {
            let cfg = config.resolve()?;
            let run = RunPaths::new(run)?;
            let dataset = pipeline::load_stage(&run.file(files::SEGMENTS))?;
            let model = artifacts_io::read_model(run.open(files::MODEL)?)
                .context("reading model.toml")?;
            let mut timer = StageTimer::default();
            let (references, aligned) =
                timer.time("align", || pipeline::align_stage(&cfg, &dataset, &model, &run))?;
            println!(
                "aligned {} segments against {} reference curves in {}",
                aligned.len(),
                references.len(),
                run.root().display()
            );
        }
        Command::Detect { config, run, method } => {
            let cfg = config.resolve()?;
            let run = RunPaths::new(run)?;
            let aligned = artifacts_io::read_aligned_csv(run.open(files::ALIGNED)?)
                .context("reading aligned.csv")?;
            let mut timer = StageTimer::default();
            let outcome =
                timer.time("detect", || pipeline::detect_stage(&cfg, &aligned, method.into(), &run))?;
            println!(
                "wrote {} verdicts to {}",
                outcome.verdicts.len(),
                run.root().display()
            );
            for note in &outcome.skipped {
                println!("skipped: {note}");
            }
        }
        Command::Evaluate { run, labels } => {
            let run = RunPaths::new(run)?;
            let labels_path = labels.unwrap_or_else(|| run.file(files::LABELS));
            let f = std::fs::File::open(&labels_path)
                .with_context(|| format!("opening {}", labels_path.display()))?;
            let records = artifacts_io::read_labels_csv(std::io::BufReader::new(f))?;
            let labels: BTreeMap<String, GroundTruth> = records
                .into_iter()
                .map(|r| (r.id, r.ground_truth))
                .collect();
            let verdicts = artifacts_io::read_verdicts_csv(run.open(files::VERDICTS)?)
                .context("reading verdicts.csv")?;
            let matrices = pipeline::evaluate_stage(&verdicts, &labels, &run)?;
            println!("wrote {} confusion matrices to {}", matrices.len(), run.root().display());
        }
        Command::Report { run } => {
            let run = RunPaths::new(run)?;
            let rep = report::build_report(&run)?;
            report::write_report(&run, &rep)?;
            print!("{}", rep.text);
        }
    }
    Ok(())
}
