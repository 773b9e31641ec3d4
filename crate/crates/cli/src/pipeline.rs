//! Staged pipeline with file-based handoff between stages.
//!
//! Every stage persists its artifacts into the run directory as it
//! completes, so a failing stage leaves the earlier outputs in place and
//! the `cluster`/`align`/`detect`/`evaluate` subcommands can resume from
//! them. A run ends with `manifest.toml` (config hash, seed, executed
//! stages, artifact checksums — byte-identical across identical runs) and
//! `timings.toml` (wall-clock per stage, intentionally kept out of the
//! manifest so the manifest stays reproducible).

use std::collections::BTreeMap;
use std::fs;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use atyp_core::align::{realign_all, reference_curve, AlignedSegment, MedoidPolicy, ReferenceCurve};
use atyp_core::cluster::assign;
use atyp_core::detect::{
    detect_cq, detect_ct, fit_cq, fit_ct, Channel, ConditionalQuantileTable, ConfidenceTube,
    DetectionVerdict, Method, Scope,
};
use atyp_core::error::CoreError;
use atyp_core::features::{extract_features, standardize, FeatureVector};
use atyp_core::io as artifacts_io;
use atyp_core::io::{TrainedModel, VerdictRecord};
use atyp_core::series::{Dataset, GroundTruth};
use atyp_core::simgen::generate;
use atyp_core::som::{choose_k, hac_superclusters, train_som};

use crate::config::RunConfig;
use crate::evaluate::{evaluate, write_confusion_csv, ConfusionMatrix};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

/// Artifact file names inside a run directory.
pub mod files {
    pub const CONFIG: &str = "config.toml";
    pub const SEGMENTS: &str = "segments.csv";
    pub const LABELS: &str = "labels.csv";
    pub const FEATURES: &str = "features.csv";
    pub const MODEL: &str = "model.toml";
    pub const CLUSTERS: &str = "clusters.csv";
    pub const REFERENCE_CURVES: &str = "reference_curves.csv";
    pub const ALIGNED: &str = "aligned.csv";
    pub const TUBES: &str = "tubes.csv";
    pub const CQ_TABLES: &str = "cq_tables.csv";
    pub const VERDICTS: &str = "verdicts.csv";
    pub const CONFUSION: &str = "confusion.csv";
    pub const MANIFEST: &str = "manifest.toml";
    pub const TIMINGS: &str = "timings.toml";

    /// Data artifacts checksummed in the manifest, in manifest order.
    pub const CHECKSUMMED: &[&str] = &[
        CONFIG,
        SEGMENTS,
        LABELS,
        FEATURES,
        MODEL,
        CLUSTERS,
        REFERENCE_CURVES,
        ALIGNED,
        TUBES,
        CQ_TABLES,
        VERDICTS,
        CONFUSION,
    ];
}

/// Which detectors a `detect` stage runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectMethod {
    Ct,
    Cq,
    Both,
}

impl DetectMethod {
    pub fn methods(self) -> &'static [Method] {
        match self {
            DetectMethod::Ct => &[Method::Ct],
            DetectMethod::Cq => &[Method::Cq],
            DetectMethod::Both => &[Method::Ct, Method::Cq],
        }
    }
}

/// A run directory.
#[derive(Debug, Clone)]
pub struct RunPaths {
    root: PathBuf,
}

impl RunPaths {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)
            .with_context(|| format!("creating run directory {}", root.display()))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.file(name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(BufWriter::new(f))
    }

    pub fn open(&self, name: &str) -> Result<BufReader<File>> {
        let path = self.file(name);
        let f = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
        Ok(BufReader::new(f))
    }
}

/// Wall-clock accounting, persisted separately from the manifest.
#[derive(Debug, Default)]
pub struct StageTimer {
    executed: Vec<(String, u128)>,
}

impl StageTimer {
    pub fn time<T>(
        &mut self,
        stage: &str,
        f: impl FnOnce() -> Result<T>,
    ) -> Result<T> {
        let start = Instant::now();
        let out = f().with_context(|| format!("stage `{stage}` failed"))?;
        self.executed.push((stage.to_string(), start.elapsed().as_millis()));
        Ok(out)
    }

    pub fn stages(&self) -> Vec<String> {
        self.executed.iter().map(|(s, _)| s.clone()).collect()
    }
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

/// Generates the dataset and persists `segments.csv` and `labels.csv`.
pub fn simulate_stage(config: &RunConfig, out: &RunPaths) -> Result<Dataset> {
    let dataset = generate(&config.generator)?;
    artifacts_io::write_segments_csv(out.create(files::SEGMENTS)?, &dataset, true)?;
    artifacts_io::write_labels_csv(out.create(files::LABELS)?, &dataset)?;
    Ok(dataset)
}

/// Loads a long-format segments CSV produced elsewhere.
pub fn load_stage(path: &Path) -> Result<Dataset> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let dataset = artifacts_io::read_segments_csv(BufReader::new(f))?;
    if dataset.is_empty() {
        bail!("input dataset {} contains no segments", path.display());
    }
    Ok(dataset)
}

fn write_features_csv(out: &RunPaths, ids: &[&str], features: &[FeatureVector]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out.create(files::FEATURES)?);
    w.write_record([
        "id",
        "length",
        "midpoint",
        "median",
        "mean",
        "variance",
        "mean_first_half",
        "mean_second_half",
        "variance_first_half",
        "variance_second_half",
    ])?;
    for (id, f) in ids.iter().zip(features) {
        let mut record = vec![id.to_string()];
        record.extend(f.as_slice().iter().map(|v| format!("{v}")));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Feature extraction of the key variable, SOM training, Ward
/// superclustering, and segment assignment. Persists `features.csv`,
/// `model.toml`, and `clusters.csv`.
pub fn cluster_stage(config: &RunConfig, dataset: &Dataset, out: &RunPaths) -> Result<TrainedModel> {
    let ids: Vec<&str> = dataset.segments().iter().map(|s| s.id()).collect();
    let raw: Vec<FeatureVector> = dataset
        .segments()
        .iter()
        .map(|s| extract_features(s.x()))
        .collect::<atyp_core::Result<_>>()?;
    write_features_csv(out, &ids, &raw)?;

    let (scaled, scaling) = standardize(&raw)?;
    let codebook = train_som(&scaled, &config.som)?;
    let k = match config.forced_k {
        Some(k) => k.min(codebook.units()),
        None => choose_k(&codebook, config.explained_variance_threshold)?,
    };
    let unit_labels = hac_superclusters(&codebook, k)?;
    let assignment = assign(&ids, &scaled, &codebook, &unit_labels)?;

    let model = TrainedModel {
        som_config: config.som,
        scaling,
        codebook,
        assignment,
    };
    artifacts_io::write_model(out.create(files::MODEL)?, &model)?;
    artifacts_io::write_clusters_csv(out.create(files::CLUSTERS)?, &model.assignment)?;
    Ok(model)
}

/// Medoid reference curve per cluster, then realignment of every member's
/// two channels at the member's best X offset. Persists
/// `reference_curves.csv` and `aligned.csv`.
pub fn align_stage(
    config: &RunConfig,
    dataset: &Dataset,
    model: &TrainedModel,
    out: &RunPaths,
) -> Result<(Vec<ReferenceCurve>, Vec<AlignedSegment>)> {
    let policy = MedoidPolicy {
        sample_cap: config.medoid_sample_cap,
        seed: config.medoid_seed(),
    };
    let mut references = Vec::new();
    let mut pairs = Vec::new();
    for (&label, member_ids) in &model.assignment.members_by_cluster() {
        let members: Vec<(&str, &atyp_core::series::Curve)> = member_ids
            .iter()
            .map(|id| {
                let segment = dataset
                    .get(id)
                    .ok_or_else(|| anyhow!("cluster {label} lists unknown segment `{id}`"))?;
                Ok((*id, segment.x()))
            })
            .collect::<Result<_>>()?;
        let reference = reference_curve(label, &members, &policy)?;
        references.push(reference);
        for id in member_ids {
            pairs.push((dataset.get(id).expect("member exists"), label));
        }
    }
    let items: Vec<(&atyp_core::series::BivariateSegment, &ReferenceCurve)> = pairs
        .iter()
        .map(|(segment, label)| {
            let reference = references
                .iter()
                .find(|r| r.cluster_label() == *label)
                .expect("reference exists for every cluster");
            (*segment, reference)
        })
        .collect();
    let aligned = realign_all(&items);

    artifacts_io::write_reference_curves_csv(out.create(files::REFERENCE_CURVES)?, &references)?;
    artifacts_io::write_aligned_csv(out.create(files::ALIGNED)?, &aligned)?;
    Ok((references, aligned))
}

/// Detection results plus the clusters each detector had to skip.
#[derive(Debug)]
pub struct DetectOutcome {
    pub verdicts: Vec<VerdictRecord>,
    pub tubes: Vec<ConfidenceTube>,
    pub tables: Vec<ConditionalQuantileTable>,
    /// Deterministic notes like "CQ cluster 7: too few transition pairs".
    pub skipped: Vec<String>,
}

fn conjunction_row(x: &DetectionVerdict, y: &DetectionVerdict) -> VerdictRecord {
    VerdictRecord {
        segment_id: x.segment_id.clone(),
        cluster_label: x.cluster_label,
        scope: Scope::Both,
        method: x.method,
        // min preserves the decision rule for both detectors: the pair
        // passes the method's threshold iff both channel scores do.
        score: x.score.min(y.score),
        is_anomaly: x.is_anomaly && y.is_anomaly,
    }
}

/// Fits CT tubes and/or CQ tables per cluster and channel on the aligned
/// curves and scores every member. Emits per-channel verdicts plus the
/// both-channel conjunction rows. Persists `tubes.csv`, `cq_tables.csv`,
/// and `verdicts.csv`.
pub fn detect_stage(
    config: &RunConfig,
    aligned: &[AlignedSegment],
    method: DetectMethod,
    out: &RunPaths,
) -> Result<DetectOutcome> {
    let mut by_cluster: BTreeMap<usize, Vec<&AlignedSegment>> = BTreeMap::new();
    for segment in aligned {
        by_cluster.entry(segment.cluster_label()).or_default().push(segment);
    }

    let mut outcome = DetectOutcome {
        verdicts: Vec::new(),
        tubes: Vec::new(),
        tables: Vec::new(),
        skipped: Vec::new(),
    };

    for (&label, members) in &by_cluster {
        if members.len() < 2 {
            outcome
                .skipped
                .push(format!("cluster {label}: only {} member(s)", members.len()));
            continue;
        }
        let xs: Vec<&atyp_core::series::Curve> = members.iter().map(|m| m.x()).collect();
        let ys: Vec<&atyp_core::series::Curve> = members.iter().map(|m| m.y()).collect();

        for &m in method.methods() {
            match m {
                Method::Ct => {
                    let tube_x = fit_ct(label, Channel::X, &xs, config.alpha)?;
                    let tube_y = fit_ct(label, Channel::Y, &ys, config.alpha)?;
                    for member in members {
                        let vx = detect_ct(
                            member.segment_id(),
                            member.x(),
                            &tube_x,
                            config.ct_run_threshold,
                        )?;
                        let vy = detect_ct(
                            member.segment_id(),
                            member.y(),
                            &tube_y,
                            config.ct_run_threshold,
                        )?;
                        outcome.verdicts.push((&vx).into());
                        outcome.verdicts.push((&vy).into());
                        outcome.verdicts.push(conjunction_row(&vx, &vy));
                    }
                    outcome.tubes.push(tube_x);
                    outcome.tubes.push(tube_y);
                }
                Method::Cq => {
                    let fitted = fit_cq(
                        label,
                        Channel::X,
                        &xs,
                        config.alpha,
                        config.cq_bins,
                        config.cq_min_bin_count,
                    )
                    .and_then(|tx| {
                        let ty = fit_cq(
                            label,
                            Channel::Y,
                            &ys,
                            config.alpha,
                            config.cq_bins,
                            config.cq_min_bin_count,
                        )?;
                        Ok((tx, ty))
                    });
                    let (table_x, table_y) = match fitted {
                        Ok(tables) => tables,
                        Err(CoreError::InsufficientClusterData { label, reason }) => {
                            outcome.skipped.push(format!("CQ cluster {label}: {reason}"));
                            continue;
                        }
                        Err(e) => return Err(e.into()),
                    };
                    for member in members {
                        let vx = detect_cq(
                            member.segment_id(),
                            member.x(),
                            &table_x,
                            config.cq_violation_threshold,
                        )?;
                        let vy = detect_cq(
                            member.segment_id(),
                            member.y(),
                            &table_y,
                            config.cq_violation_threshold,
                        )?;
                        outcome.verdicts.push((&vx).into());
                        outcome.verdicts.push((&vy).into());
                        outcome.verdicts.push(conjunction_row(&vx, &vy));
                    }
                    outcome.tables.push(table_x);
                    outcome.tables.push(table_y);
                }
            }
        }
    }

    artifacts_io::write_tubes_csv(out.create(files::TUBES)?, &outcome.tubes)?;
    artifacts_io::write_cq_tables_csv(out.create(files::CQ_TABLES)?, &outcome.tables)?;
    artifacts_io::write_verdicts_csv(out.create(files::VERDICTS)?, &outcome.verdicts)?;
    Ok(outcome)
}

/// Cross-tabulates verdicts against ground truth and persists
/// `confusion.csv`.
pub fn evaluate_stage(
    verdicts: &[VerdictRecord],
    labels: &BTreeMap<String, GroundTruth>,
    out: &RunPaths,
) -> Result<Vec<ConfusionMatrix>> {
    let matrices = evaluate(verdicts, labels)?;
    write_confusion_csv(out.create(files::CONFUSION)?, &matrices)?;
    Ok(matrices)
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub executed: Vec<String>,
    pub skipped: Vec<String>,
    /// File name → SHA-256 of the artifact's bytes.
    pub artifacts: BTreeMap<String, String>,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Writes `manifest.toml`: config hash, seed, executed stages, skipped
/// detector notes, and checksums of every data artifact present. Every
/// field is a pure function of config + seed, so identical runs write
/// byte-identical manifests. Wall-clock goes to `timings.toml` instead.
pub fn write_manifest(
    config: &RunConfig,
    timer: &StageTimer,
    skipped: &[String],
    out: &RunPaths,
) -> Result<()> {
    let mut artifacts = BTreeMap::new();
    for name in files::CHECKSUMMED {
        let path = out.file(name);
        if path.exists() {
            artifacts.insert(name.to_string(), sha256_file(&path)?);
        }
    }
    let manifest = Manifest {
        format_version: MANIFEST_FORMAT_VERSION,
        config_hash: config.hash()?,
        seed: config.seed,
        executed: timer.stages(),
        skipped: skipped.to_vec(),
        artifacts,
    };
    let text = toml::to_string_pretty(&manifest).context("serializing manifest")?;
    fs::write(out.file(files::MANIFEST), text).context("writing manifest")?;

    let mut timings = String::from("[timings_ms]\n");
    for (stage, ms) in &timer.executed {
        timings.push_str(&format!("\"{stage}\" = {ms}\n"));
    }
    fs::write(out.file(files::TIMINGS), timings).context("writing timings")?;
    Ok(())
}

pub fn read_manifest(out: &RunPaths) -> Result<Manifest> {
    let text = fs::read_to_string(out.file(files::MANIFEST)).context("reading manifest")?;
    toml::from_str(&text).context("parsing manifest")
}

// ---------------------------------------------------------------------------
// Whole-run orchestration
// ---------------------------------------------------------------------------

/// What a completed `run` produced (artifacts are on disk; this carries
/// the in-memory results the caller usually wants next).
#[derive(Debug)]
pub struct RunOutcome {
    pub n_segments: usize,
    pub n_clusters: usize,
    pub verdicts: Vec<VerdictRecord>,
    pub matrices: Option<Vec<ConfusionMatrix>>,
    pub skipped: Vec<String>,
}

fn ground_truth_map(dataset: &Dataset) -> Option<BTreeMap<String, GroundTruth>> {
    let mut labels = BTreeMap::new();
    for segment in dataset.segments() {
        labels.insert(segment.id().to_string(), segment.ground_truth()?);
    }
    Some(labels)
}

/// Executes every stage in order. `input`: path to a segments CSV, or
/// `None` to simulate from the config's generator section. Evaluation runs
/// when every segment carries a ground-truth label.
pub fn run_pipeline(
    config: &RunConfig,
    input: Option<&Path>,
    method: DetectMethod,
    out: &RunPaths,
) -> Result<RunOutcome> {
    config.validate()?;
    fs::write(out.file(files::CONFIG), config.to_toml()?).context("persisting config")?;

    let mut timer = StageTimer::default();
    let dataset = match input {
        None => timer.time("simulate", || simulate_stage(config, out))?,
        Some(path) => timer.time("load", || load_stage(path))?,
    };
    let model = timer.time("cluster", || cluster_stage(config, &dataset, out))?;
    let (_references, aligned) =
        timer.time("align", || align_stage(config, &dataset, &model, out))?;
    let detect = timer.time("detect", || detect_stage(config, &aligned, method, out))?;

    let matrices = match ground_truth_map(&dataset) {
        Some(labels) => {
            Some(timer.time("evaluate", || evaluate_stage(&detect.verdicts, &labels, out))?)
        }
        None => None,
    };

    write_manifest(config, &timer, &detect.skipped, out)?;
    Ok(RunOutcome {
        n_segments: dataset.len(),
        n_clusters: model.assignment.n_clusters(),
        verdicts: detect.verdicts,
        matrices,
        skipped: detect.skipped,
    })
}
