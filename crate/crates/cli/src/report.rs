//! Human-readable run summary plus plot-ready per-cluster exports.
//!
//! `build_report` reads a completed run directory and produces one section
//! per cluster (size, reference length, detection and false-alarm counts);
//! `write_report` persists the text as `report.txt` and emits, per cluster,
//! `plots/cluster_<label>_curves.csv` (aligned curves with per-segment
//! anomaly flags) and `plots/cluster_<label>_tubes.csv` (tube overlays).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;

use anyhow::{Context, Result};

use atyp_core::detect::{Method, Scope};
use atyp_core::io as artifacts_io;
use atyp_core::io::VerdictRecord;

use crate::config::RunConfig;
use crate::evaluate::{read_confusion_csv, ConfusionMatrix};
use crate::pipeline::{files, RunPaths};

/// Flag column order in the curves plot file.
const FLAG_COLUMNS: [(Method, Scope); 6] = [
    (Method::Ct, Scope::X),
    (Method::Ct, Scope::Y),
    (Method::Ct, Scope::Both),
    (Method::Cq, Scope::X),
    (Method::Cq, Scope::Y),
    (Method::Cq, Scope::Both),
];

/// Summary of one cluster.
#[derive(Debug, Clone)]
pub struct ClusterReport {
    pub label: usize,
    pub size: usize,
    pub reference_length: usize,
    /// Segments flagged, per detector and scope. Missing key = detector
    /// did not run on this cluster.
    pub detections: BTreeMap<(Method, Scope), usize>,
    /// Normal segments flagged (confusion (D, NA) cell), when ground
    /// truth was available.
    pub false_alarms: Option<BTreeMap<(Method, Scope), usize>>,
}

/// Whole-run summary with the rendered text.
#[derive(Debug, Clone)]
pub struct Report {
    pub clusters: Vec<ClusterReport>,
    pub n_segments: usize,
    /// Per-method false alarms summed over clusters and the two channel
    /// scopes, when ground truth was available.
    pub channel_false_alarms: Option<BTreeMap<Method, usize>>,
    pub text: String,
}

fn count_flags(
    verdicts: &[VerdictRecord],
) -> BTreeMap<usize, BTreeMap<(Method, Scope), usize>> {
    let mut counts: BTreeMap<usize, BTreeMap<(Method, Scope), usize>> = BTreeMap::new();
    for v in verdicts {
        let per_cluster = counts.entry(v.cluster_label).or_default();
        let cell = per_cluster.entry((v.method, v.scope)).or_insert(0);
        if v.is_anomaly {
            *cell += 1;
        }
    }
    counts
}

fn false_alarm_table(
    matrices: &[ConfusionMatrix],
) -> BTreeMap<usize, BTreeMap<(Method, Scope), usize>> {
    let mut table: BTreeMap<usize, BTreeMap<(Method, Scope), usize>> = BTreeMap::new();
    for m in matrices {
        table
            .entry(m.cluster)
            .or_default()
            .insert((m.method, m.scope), m.na_d);
    }
    table
}

fn method_block(
    label: &str,
    counts: &BTreeMap<(Method, Scope), usize>,
    method: Method,
) -> Option<String> {
    let cells: Vec<String> = Scope::ALL
        .iter()
        .filter_map(|&s| counts.get(&(method, s)).map(|n| format!("{s}: {n}")))
        .collect();
    if cells.is_empty() {
        None
    } else {
        Some(format!("    {label} {}  {}\n", method.as_str(), cells.join("  ")))
    }
}

/// Reads a completed run directory into a [`Report`].
pub fn build_report(run: &RunPaths) -> Result<Report> {
    let assignment_by_id = artifacts_io::read_clusters_csv(run.open(files::CLUSTERS)?)
        .context("reading cluster assignment")?;
    let references = artifacts_io::read_reference_curves_csv(run.open(files::REFERENCE_CURVES)?)
        .context("reading reference curves")?;
    let verdicts = artifacts_io::read_verdicts_csv(run.open(files::VERDICTS)?)
        .context("reading verdicts")?;
    let matrices = if run.file(files::CONFUSION).exists() {
        Some(read_confusion_csv(run.open(files::CONFUSION)?).context("reading confusion matrices")?)
    } else {
        None
    };

    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for cluster in assignment_by_id.values() {
        *sizes.entry(*cluster).or_insert(0) += 1;
    }
    let reference_lengths: BTreeMap<usize, usize> = references
        .iter()
        .map(|r| (r.cluster_label(), r.len()))
        .collect();
    let detections = count_flags(&verdicts);
    let false_alarms = matrices.as_deref().map(false_alarm_table);

    let mut clusters = Vec::new();
    for (&label, &size) in &sizes {
        clusters.push(ClusterReport {
            label,
            size,
            reference_length: reference_lengths.get(&label).copied().unwrap_or(0),
            detections: detections.get(&label).cloned().unwrap_or_default(),
            false_alarms: false_alarms
                .as_ref()
                .map(|t| t.get(&label).cloned().unwrap_or_default()),
        });
    }

    let channel_false_alarms = false_alarms.as_ref().map(|table| {
        let mut totals: BTreeMap<Method, usize> = BTreeMap::new();
        for per_cluster in table.values() {
            for (&(method, scope), &n) in per_cluster {
                if matches!(scope, Scope::X | Scope::Y) {
                    *totals.entry(method).or_insert(0) += n;
                }
            }
        }
        totals
    });

    let n_segments = assignment_by_id.len();
    let text = render_text(&clusters, n_segments, channel_false_alarms.as_ref());
    Ok(Report {
        clusters,
        n_segments,
        channel_false_alarms,
        text,
    })
}

fn render_text(
    clusters: &[ClusterReport],
    n_segments: usize,
    channel_false_alarms: Option<&BTreeMap<Method, usize>>,
) -> String {
    let mut out = String::new();
    out.push_str("anomaly detection run report\n");
    out.push_str("============================\n");
    let _ = writeln!(out, "segments: {n_segments}    clusters: {}\n", clusters.len());

    for c in clusters {
        let _ = writeln!(out, "cluster {}", c.label);
        let _ = writeln!(out, "  members: {}", c.size);
        let _ = writeln!(out, "  reference length: {}", c.reference_length);
        if c.detections.is_empty() {
            out.push_str("  detectors skipped (too few members)\n\n");
            continue;
        }
        out.push_str("  detections (segments flagged):\n");
        for method in [Method::Ct, Method::Cq] {
            if let Some(line) = method_block("", &c.detections, method) {
                out.push_str(&line);
            }
        }
        match &c.false_alarms {
            Some(fa) => {
                out.push_str("  false alarms (normal segments flagged):\n");
                for method in [Method::Ct, Method::Cq] {
                    if let Some(line) = method_block("", fa, method) {
                        out.push_str(&line);
                    }
                }
            }
            None => out.push_str("  false alarms: ground truth unavailable\n"),
        }
        out.push('\n');
    }

    if let Some(totals) = channel_false_alarms {
        out.push_str("totals\n");
        for (method, n) in totals {
            let _ = writeln!(out, "  false alarms over X+Y channels  {}: {n}", method.as_str());
        }
    }
    out
}

/// Persists `report.txt` and the per-cluster plot CSVs.
pub fn write_report(run: &RunPaths, report: &Report) -> Result<()> {
    fs::write(run.file("report.txt"), &report.text).context("writing report.txt")?;

    let config = RunConfig::load(&run.file(files::CONFIG)).context("reading run config")?;
    let aligned = artifacts_io::read_aligned_csv(run.open(files::ALIGNED)?)
        .context("reading aligned curves")?;
    let tubes = artifacts_io::read_tubes_csv(run.open(files::TUBES)?, config.alpha)
        .context("reading tubes")?;
    let verdicts = artifacts_io::read_verdicts_csv(run.open(files::VERDICTS)?)
        .context("reading verdicts")?;

    let mut flags: BTreeMap<&str, BTreeMap<(Method, Scope), bool>> = BTreeMap::new();
    for v in &verdicts {
        flags
            .entry(v.segment_id.as_str())
            .or_default()
            .insert((v.method, v.scope), v.is_anomaly);
    }

    let plots = run.file("plots");
    fs::create_dir_all(&plots).context("creating plots directory")?;

    let mut by_cluster: BTreeMap<usize, Vec<&atyp_core::align::AlignedSegment>> = BTreeMap::new();
    for segment in &aligned {
        by_cluster.entry(segment.cluster_label()).or_default().push(segment);
    }

    for (label, members) in &by_cluster {
        let path = plots.join(format!("cluster_{label}_curves.csv"));
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        w.write_record([
            "id", "t", "x", "y", "ct_x", "ct_y", "ct_both", "cq_x", "cq_y", "cq_both",
        ])?;
        for member in members {
            let segment_flags = flags.get(member.segment_id());
            let flag_cells: Vec<String> = FLAG_COLUMNS
                .iter()
                .map(|key| match segment_flags.and_then(|f| f.get(key)) {
                    Some(flag) => flag.to_string(),
                    None => String::new(),
                })
                .collect();
            for (i, (&x, &y)) in member.x().values().iter().zip(member.y().values()).enumerate() {
                let mut record = vec![
                    member.segment_id().to_string(),
                    (i + 1).to_string(),
                    format!("{x}"),
                    format!("{y}"),
                ];
                record.extend(flag_cells.iter().cloned());
                w.write_record(&record)?;
            }
        }
        w.flush()?;

        let path = plots.join(format!("cluster_{label}_tubes.csv"));
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        w.write_record(["channel", "t", "lower", "upper"])?;
        for tube in tubes.iter().filter(|t| t.cluster_label() == *label) {
            for (i, (&lo, &hi)) in tube.lower().iter().zip(tube.upper()).enumerate() {
                w.write_record([
                    tube.channel().as_str(),
                    &(i + 1).to_string(),
                    &format!("{lo}"),
                    &format!("{hi}"),
                ])?;
            }
        }
        w.flush()?;
    }
    Ok(())
}
