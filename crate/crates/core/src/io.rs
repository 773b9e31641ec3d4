//! CSV and TOML artifact formats.
//!
//! Every writer emits rows in a deterministic order (sorted by id and/or
//! cluster) and formats floats with Rust's shortest round-trip notation,
//! so equal in-memory artifacts produce byte-identical files.
//!
//! Formats:
//! - segments: `id,t,x,y[,label]`, `t` starting at 1 per segment, rows
//!   sorted by (id, t); `label` holds ground-truth enum names
//! - labels: `id,ground_truth,anomaly_type`
//! - cluster labels: `id,cluster`
//! - reference curves: `cluster,t,value`
//! - aligned curves: `id,cluster,t,x,y`
//! - tubes: `cluster,channel,t,lower,upper`
//! - CQ tables: `cluster,channel,bin_lo,bin_hi,lower,upper,count`
//! - verdicts: `id,cluster,channel,method,score,is_anomaly` (channel may
//!   also be `Both` for the two-channel conjunction)
//! - trained model: versioned TOML (`version`, `[som]`, `[scaling]`,
//!   `[codebook]`, `[clusters]`, `[assignment]`)

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::align::{AlignedSegment, ReferenceCurve};
use crate::cluster::ClusterAssignment;
use crate::detect::{Channel, ConditionalQuantileTable, ConfidenceTube, CqBin, DetectionVerdict, Method, Scope};
use crate::error::{CoreError, Result};
use crate::features::{FeatureScaling, FeatureVector, FEATURE_DIM};
use crate::series::{BivariateSegment, Curve, Dataset, GroundTruth};
use crate::som::{Codebook, SomConfig};

/// Version tag of the trained-model TOML format.
pub const MODEL_FORMAT_VERSION: u32 = 1;

fn fmt_f64(v: f64) -> String {
    // Rust's Display for f64 is the shortest representation that parses
    // back to the same bits, which keeps round-trips exact.
    format!("{v}")
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn malformed(record: &csv::StringRecord, reason: impl Into<String>) -> CoreError {
    CoreError::MalformedRecord {
        line: record_line(record),
        reason: reason.into(),
    }
}

fn parse_f64(record: &csv::StringRecord, field: usize, name: &str) -> Result<f64> {
    let raw = record.get(field).unwrap_or("");
    raw.parse::<f64>()
        .map_err(|_| malformed(record, format!("{name} `{raw}` is not a number")))
}

fn parse_usize(record: &csv::StringRecord, field: usize, name: &str) -> Result<usize> {
    let raw = record.get(field).unwrap_or("");
    raw.parse::<usize>()
        .map_err(|_| malformed(record, format!("{name} `{raw}` is not a non-negative integer")))
}

fn expect_header(reader: &mut csv::Reader<impl Read>, options: &[&[&str]]) -> Result<usize> {
    let headers = reader.headers().map_err(CoreError::from)?.clone();
    let got: Vec<&str> = headers.iter().collect();
    for (i, want) in options.iter().enumerate() {
        if got == *want {
            return Ok(i);
        }
    }
    Err(CoreError::MalformedRecord {
        line: 1,
        reason: format!("unexpected header {got:?}"),
    })
}

fn csv_writer<W: Write>(writer: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(writer)
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).from_reader(reader)
}

// ---------------------------------------------------------------------------
// Segments (long format)
// ---------------------------------------------------------------------------

/// Writes a dataset in long format, rows sorted by (id, t). With
/// `include_labels`, a `label` column carries the ground-truth enum name
/// (empty for unlabeled segments).
pub fn write_segments_csv<W: Write>(
    writer: W,
    dataset: &Dataset,
    include_labels: bool,
) -> Result<()> {
    let mut w = csv_writer(writer);
    if include_labels {
        w.write_record(["id", "t", "x", "y", "label"])?;
    } else {
        w.write_record(["id", "t", "x", "y"])?;
    }
    let mut segments: Vec<&BivariateSegment> = dataset.segments().iter().collect();
    segments.sort_by_key(|s| s.id().to_string());
    for segment in segments {
        let label = segment.ground_truth().map(|g| g.as_str()).unwrap_or("");
        for (i, (x, y)) in segment
            .x()
            .values()
            .iter()
            .zip(segment.y().values())
            .enumerate()
        {
            let t = (i + 1).to_string();
            if include_labels {
                w.write_record([segment.id(), &t, &fmt_f64(*x), &fmt_f64(*y), label])?;
            } else {
                w.write_record([segment.id(), &t, &fmt_f64(*x), &fmt_f64(*y)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the long format back. Each segment's rows must be contiguous with
/// `t = 1..=L` in order; the `label` column is optional and must be
/// constant within a segment (empty means unlabeled).
pub fn read_segments_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut r = csv_reader(reader);
    let with_labels =
        expect_header(&mut r, &[&["id", "t", "x", "y"], &["id", "t", "x", "y", "label"]])? == 1;

    struct Pending {
        id: String,
        xs: Vec<f64>,
        ys: Vec<f64>,
        label: Option<GroundTruth>,
    }

    fn flush(pending: Pending, out: &mut Vec<BivariateSegment>) -> Result<()> {
        let segment = BivariateSegment::new(
            pending.id,
            Curve::new(pending.xs)?,
            Curve::new(pending.ys)?,
            pending.label,
        )?;
        out.push(segment);
        Ok(())
    }

    let mut segments = Vec::new();
    let mut pending: Option<Pending> = None;
    for record in r.records() {
        let record = record.map_err(CoreError::from)?;
        let id = record
            .get(0)
            .ok_or_else(|| malformed(&record, "missing id field"))?
            .to_string();
        let t = parse_usize(&record, 1, "t")?;
        let x = parse_f64(&record, 2, "x")?;
        let y = parse_f64(&record, 3, "y")?;
        let label = if with_labels {
            match record.get(4).unwrap_or("") {
                "" => None,
                raw => Some(raw.parse::<GroundTruth>().map_err(|_| {
                    malformed(&record, format!("unknown ground-truth label `{raw}`"))
                })?),
            }
        } else {
            None
        };

        let start_new = pending.as_ref().map(|p| p.id != id).unwrap_or(true);
        if start_new {
            if let Some(done) = pending.take() {
                flush(done, &mut segments)?;
            }
            pending = Some(Pending {
                id,
                xs: Vec::new(),
                ys: Vec::new(),
                label,
            });
        }
        let p = pending.as_mut().expect("pending segment exists");
        let expected_t = p.xs.len() + 1;
        if t != expected_t {
            return Err(malformed(
                &record,
                format!("segment `{}`: expected t={expected_t}, found t={t}", p.id),
            ));
        }
        if p.label != label {
            return Err(malformed(
                &record,
                format!("segment `{}`: inconsistent label", p.id),
            ));
        }
        p.xs.push(x);
        p.ys.push(y);
    }
    if let Some(done) = pending.take() {
        flush(done, &mut segments)?;
    }
    Dataset::new(segments)
}

// ---------------------------------------------------------------------------
// Ground-truth labels
// ---------------------------------------------------------------------------

/// One row of the label file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRecord {
    pub id: String,
    pub ground_truth: GroundTruth,
    /// Injected anomaly shape name, when the generator recorded one.
    pub anomaly_type: Option<String>,
}

/// Writes `id,ground_truth,anomaly_type`, sorted by id. The anomaly type is
/// taken from the dataset metadata the generator leaves behind
/// (`anomaly_shape.<id>`); unlabeled segments are skipped.
pub fn write_labels_csv<W: Write>(writer: W, dataset: &Dataset) -> Result<()> {
    let mut w = csv_writer(writer);
    w.write_record(["id", "ground_truth", "anomaly_type"])?;
    let mut segments: Vec<&BivariateSegment> = dataset.segments().iter().collect();
    segments.sort_by_key(|s| s.id().to_string());
    for segment in segments {
        let Some(truth) = segment.ground_truth() else {
            continue;
        };
        let shape = dataset
            .metadata()
            .get(&format!("anomaly_shape.{}", segment.id()))
            .map(String::as_str)
            .unwrap_or("");
        w.write_record([segment.id(), truth.as_str(), shape])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the label file written by [`write_labels_csv`].
pub fn read_labels_csv<R: Read>(reader: R) -> Result<Vec<LabelRecord>> {
    let mut r = csv_reader(reader);
    expect_header(&mut r, &[&["id", "ground_truth", "anomaly_type"]])?;
    let mut out = Vec::new();
    for record in r.records() {
        let record = record.map_err(CoreError::from)?;
        let id = record
            .get(0)
            .ok_or_else(|| malformed(&record, "missing id field"))?
            .to_string();
        let raw = record.get(1).unwrap_or("");
        let ground_truth = raw
            .parse::<GroundTruth>()
            .map_err(|_| malformed(&record, format!("unknown ground-truth label `{raw}`")))?;
        let anomaly_type = match record.get(2).unwrap_or("") {
            "" => None,
            s => Some(s.to_string()),
        };
        out.push(LabelRecord {
            id,
            ground_truth,
            anomaly_type,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Cluster labels
// ---------------------------------------------------------------------------

/// Writes `id,cluster`, sorted by id.
pub fn write_clusters_csv<W: Write>(writer: W, assignment: &ClusterAssignment) -> Result<()> {
    let mut w = csv_writer(writer);
    w.write_record(["id", "cluster"])?;
    for (id, &unit) in assignment.unit_of_segment() {
        let cluster = assignment.supercluster_of_unit()[unit];
        w.write_record([id.as_str(), &cluster.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `id,cluster` into an id → cluster map.
pub fn read_clusters_csv<R: Read>(reader: R) -> Result<BTreeMap<String, usize>> {
    let mut r = csv_reader(reader);
    expect_header(&mut r, &[&["id", "cluster"]])?;
    let mut out = BTreeMap::new();
    for record in r.records() {
        let record = record.map_err(CoreError::from)?;
        let id = record
            .get(0)
            .ok_or_else(|| malformed(&record, "missing id field"))?
            .to_string();
        let cluster = parse_usize(&record, 1, "cluster")?;
        if out.insert(id.clone(), cluster).is_some() {
            return Err(malformed(&record, format!("duplicate id `{id}`")));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Reference and aligned curves
// ---------------------------------------------------------------------------

/// Writes `cluster,t,value`, sorted by cluster, `t = 1..=L`.
pub fn write_reference_curves_csv<W: Write>(
    writer: W,
    references: &[ReferenceCurve],
) -> Result<()> {
    let mut w = csv_writer(writer);
    w.write_record(["cluster", "t", "value"])?;
    let mut refs: Vec<&ReferenceCurve> = references.iter().collect();
    refs.sort_by_key(|r| r.cluster_label());
    for reference in refs {
        let cluster = reference.cluster_label().to_string();
        for (i, v) in reference.curve().values().iter().enumerate() {
            w.write_record([&cluster, &(i + 1).to_string(), &fmt_f64(*v)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads reference curves back. The medoid's segment id is not part of the
/// interchange format, so loaded references carry an empty id.
pub fn read_reference_curves_csv<R: Read>(reader: R) -> Result<Vec<ReferenceCurve>> {
    let mut r = csv_reader(reader);
    expect_header(&mut r, &[&["cluster", "t", "value"]])?;
    let mut out: Vec<ReferenceCurve> = Vec::new();
    let mut current: Option<(usize, Vec<f64>)> = None;
    for record in r.records() {
        let record = record.map_err(CoreError::from)?;
        let cluster = parse_usize(&record, 0, "cluster")?;
        let t = parse_usize(&record, 1, "t")?;
        let value = parse_f64(&record, 2, "value")?;
        let start_new = current.as_ref().map(|(c, _)| *c != cluster).unwrap_or(true);
        if start_new {
            if let Some((label, values)) = current.take() {
                out.push(ReferenceCurve::new(label, "", Curve::new(values)?));
            }
            current = Some((cluster, Vec::new()));
        }
        let (_, values) = current.as_mut().expect("current curve exists");
        if t != values.len() + 1 {
            return Err(malformed(
                &record,
                format!("cluster {cluster}: expected t={}, found t={t}", values.len() + 1),
            ));
        }
        values.push(value);
    }
    if let Some((label, values)) = current.take() {
        out.push(ReferenceCurve::new(label, "", Curve::new(values)?));
    }
    Ok(out)
}

/// Writes `id,cluster,t,x,y`, sorted by id, `t = 1..=L_i`.
pub fn write_aligned_csv<W: Write>(writer: W, aligned: &[AlignedSegment]) -> Result<()> {
    let mut w = csv_writer(writer);
    w.write_record(["id", "cluster", "t", "x", "y"])?;
    let mut rows: Vec<&AlignedSegment> = aligned.iter().collect();
    rows.sort_by_key(|a| a.segment_id().to_string());
    for segment in rows {
        let cluster = segment.cluster_label().to_string();
        for (i, (x, y)) in segment
            .x()
            .values()
            .iter()
            .zip(segment.y().values())
            .enumerate()
        {
            w.write_record([
                segment.segment_id(),
                &cluster,
                &(i + 1).to_string(),
                &fmt_f64(*x),
                &fmt_f64(*y),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads aligned curves back. The alignment offset is not part of the
/// interchange format; loaded segments report offset 0.
pub fn read_aligned_csv<R: Read>(reader: R) -> Result<Vec<AlignedSegment>> {
    let mut r = csv_reader(reader);
    expect_header(&mut r, &[&["id", "cluster", "t", "x", "y"]])?;

    struct Pending {
        id: String,
        cluster: usize,
        xs: Vec<f64>,
        ys: Vec<f64>,
    }
    fn flush(p: Pending, out: &mut Vec<AlignedSegment>) -> Result<()> {
        out.push(AlignedSegment::new(
            p.id,
            p.cluster,
            Curve::new(p.xs)?,
            Curve::new(p.ys)?,
            0,
        )?);
        Ok(())
    }

    let mut out = Vec::new();
    let mut pending: Option<Pending> = None;
    for record in r.records() {
        let record = record.map_err(CoreError::from)?;
        let id = record
            .get(0)
            .ok_or_else(|| malformed(&record, "missing id field"))?
            .to_string();
        let cluster = parse_usize(&record, 1, "cluster")?;
        let t = parse_usize(&record, 2, "t")?;
        let x = parse_f64(&record, 3, "x")?;
        let y = parse_f64(&record, 4, "y")?;
        let start_new = pending.as_ref().map(|p| p.id != id).unwrap_or(true);
        if start_new {
            if let Some(done) = pending.take() {
                flush(done, &mut out)?;
            }
            pending = Some(Pending {
                id,
                cluster,
                xs: Vec::new(),
                ys: Vec::new(),
            });
        }
        let p = pending.as_mut().expect("pending segment exists");
        if p.cluster != cluster {
            return Err(malformed(
                &record,
                format!("segment `{}`: inconsistent cluster", p.id),
            ));
        }
        if t != p.xs.len() + 1 {
            return Err(malformed(
                &record,
                format!("segment `{}`: expected t={}, found t={t}", p.id, p.xs.len() + 1),
            ));
        }
        p.xs.push(x);
        p.ys.push(y);
    }
    if let Some(done) = pending.take() {
        flush(done, &mut out)?;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Detector artifacts
// ---------------------------------------------------------------------------

/// Writes `cluster,channel,t,lower,upper`, sorted by (cluster, channel).
pub fn write_tubes_csv<W: Write>(writer: W, tubes: &[ConfidenceTube]) -> Result<()> {
    let mut w = csv_writer(writer);
    w.write_record(["cluster", "channel", "t", "lower", "upper"])?;
    let mut rows: Vec<&ConfidenceTube> = tubes.iter().collect();
    rows.sort_by_key(|t| (t.cluster_label(), t.channel()));
    for tube in rows {
        let cluster = tube.cluster_label().to_string();
        for (i, (lo, hi)) in tube.lower().iter().zip(tube.upper()).enumerate() {
            w.write_record([
                cluster.as_str(),
                tube.channel().as_str(),
                &(i + 1).to_string(),
                &fmt_f64(*lo),
                &fmt_f64(*hi),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads tubes back; `alpha` is not stored in the CSV and must be supplied.
pub fn read_tubes_csv<R: Read>(reader: R, alpha: f64) -> Result<Vec<ConfidenceTube>> {
    let mut r = csv_reader(reader);
    expect_header(&mut r, &[&["cluster", "channel", "t", "lower", "upper"]])?;
    let mut out = Vec::new();
    let mut current: Option<(usize, Channel, Vec<f64>, Vec<f64>)> = None;
    for record in r.records() {
        let record = record.map_err(CoreError::from)?;
        let cluster = parse_usize(&record, 0, "cluster")?;
        let raw_channel = record.get(1).unwrap_or("");
        let channel = raw_channel
            .parse::<Channel>()
            .map_err(|_| malformed(&record, format!("unknown channel `{raw_channel}`")))?;
        let t = parse_usize(&record, 2, "t")?;
        let lower = parse_f64(&record, 3, "lower")?;
        let upper = parse_f64(&record, 4, "upper")?;
        let start_new = current
            .as_ref()
            .map(|(c, ch, _, _)| (*c, *ch) != (cluster, channel))
            .unwrap_or(true);
        if start_new {
            if let Some((c, ch, lo, hi)) = current.take() {
                out.push(ConfidenceTube::from_parts(c, ch, alpha, lo, hi)?);
            }
            current = Some((cluster, channel, Vec::new(), Vec::new()));
        }
        let (_, _, lo, hi) = current.as_mut().expect("current tube exists");
        if t != lo.len() + 1 {
            return Err(malformed(
                &record,
                format!("cluster {cluster}: expected t={}, found t={t}", lo.len() + 1),
            ));
        }
        lo.push(lower);
        hi.push(upper);
    }
    if let Some((c, ch, lo, hi)) = current.take() {
        out.push(ConfidenceTube::from_parts(c, ch, alpha, lo, hi)?);
    }
    Ok(out)
}

/// Writes `cluster,channel,bin_lo,bin_hi,lower,upper,count`, bins in order,
/// tables sorted by (cluster, channel).
pub fn write_cq_tables_csv<W: Write>(
    writer: W,
    tables: &[ConditionalQuantileTable],
) -> Result<()> {
    let mut w = csv_writer(writer);
    w.write_record(["cluster", "channel", "bin_lo", "bin_hi", "lower", "upper", "count"])?;
    let mut rows: Vec<&ConditionalQuantileTable> = tables.iter().collect();
    rows.sort_by_key(|t| (t.cluster_label(), t.channel()));
    for table in rows {
        let cluster = table.cluster_label().to_string();
        for bin in table.bins() {
            w.write_record([
                cluster.as_str(),
                table.channel().as_str(),
                &fmt_f64(bin.lag_lo),
                &fmt_f64(bin.lag_hi),
                &fmt_f64(bin.lower),
                &fmt_f64(bin.upper),
                &bin.count.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads CQ tables back; `alpha` must be supplied (not stored in the CSV).
pub fn read_cq_tables_csv<R: Read>(
    reader: R,
    alpha: f64,
) -> Result<Vec<ConditionalQuantileTable>> {
    let mut r = csv_reader(reader);
    expect_header(
        &mut r,
        &[&["cluster", "channel", "bin_lo", "bin_hi", "lower", "upper", "count"]],
    )?;
    let mut out = Vec::new();
    let mut current: Option<(usize, Channel, Vec<CqBin>)> = None;
    for record in r.records() {
        let record = record.map_err(CoreError::from)?;
        let cluster = parse_usize(&record, 0, "cluster")?;
        let raw_channel = record.get(1).unwrap_or("");
        let channel = raw_channel
            .parse::<Channel>()
            .map_err(|_| malformed(&record, format!("unknown channel `{raw_channel}`")))?;
        let bin = CqBin {
            lag_lo: parse_f64(&record, 2, "bin_lo")?,
            lag_hi: parse_f64(&record, 3, "bin_hi")?,
            lower: parse_f64(&record, 4, "lower")?,
            upper: parse_f64(&record, 5, "upper")?,
            count: parse_usize(&record, 6, "count")?,
        };
        let start_new = current
            .as_ref()
            .map(|(c, ch, _)| (*c, *ch) != (cluster, channel))
            .unwrap_or(true);
        if start_new {
            if let Some((c, ch, bins)) = current.take() {
                out.push(ConditionalQuantileTable::from_parts(c, ch, alpha, bins)?);
            }
            current = Some((cluster, channel, Vec::new()));
        }
        current.as_mut().expect("current table exists").2.push(bin);
    }
    if let Some((c, ch, bins)) = current.take() {
        out.push(ConditionalQuantileTable::from_parts(c, ch, alpha, bins)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Verdicts
// ---------------------------------------------------------------------------

/// One verdict row: a per-channel detector verdict, or the derived
/// both-channel conjunction (scope `Both`).
#[derive(Debug, Clone, PartialEq)]
pub struct VerdictRecord {
    pub segment_id: String,
    pub cluster_label: usize,
    pub scope: Scope,
    pub method: Method,
    pub score: f64,
    pub is_anomaly: bool,
}

impl From<&DetectionVerdict> for VerdictRecord {
    fn from(v: &DetectionVerdict) -> Self {
        VerdictRecord {
            segment_id: v.segment_id.clone(),
            cluster_label: v.cluster_label,
            scope: v.channel.into(),
            method: v.method,
            score: v.score,
            is_anomaly: v.is_anomaly,
        }
    }
}

/// Writes `id,cluster,channel,method,score,is_anomaly`, sorted by
/// (id, channel, method). The channel column holds the scope name, so the
/// `Both` conjunction rows use `Both`.
pub fn write_verdicts_csv<W: Write>(writer: W, verdicts: &[VerdictRecord]) -> Result<()> {
    let mut w = csv_writer(writer);
    w.write_record(["id", "cluster", "channel", "method", "score", "is_anomaly"])?;
    let mut rows: Vec<&VerdictRecord> = verdicts.iter().collect();
    rows.sort_by(|a, b| {
        (a.segment_id.as_str(), a.scope, a.method).cmp(&(b.segment_id.as_str(), b.scope, b.method))
    });
    for v in rows {
        w.write_record([
            v.segment_id.as_str(),
            &v.cluster_label.to_string(),
            v.scope.as_str(),
            v.method.as_str(),
            &fmt_f64(v.score),
            if v.is_anomaly { "true" } else { "false" },
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads verdict rows back.
pub fn read_verdicts_csv<R: Read>(reader: R) -> Result<Vec<VerdictRecord>> {
    let mut r = csv_reader(reader);
    expect_header(&mut r, &[&["id", "cluster", "channel", "method", "score", "is_anomaly"]])?;
    let mut out = Vec::new();
    for record in r.records() {
        let record = record.map_err(CoreError::from)?;
        let segment_id = record
            .get(0)
            .ok_or_else(|| malformed(&record, "missing id field"))?
            .to_string();
        let cluster_label = parse_usize(&record, 1, "cluster")?;
        let raw_scope = record.get(2).unwrap_or("");
        let scope = raw_scope
            .parse::<Scope>()
            .map_err(|_| malformed(&record, format!("unknown channel `{raw_scope}`")))?;
        let raw_method = record.get(3).unwrap_or("");
        let method = raw_method
            .parse::<Method>()
            .map_err(|_| malformed(&record, format!("unknown method `{raw_method}`")))?;
        let score = parse_f64(&record, 4, "score")?;
        let is_anomaly = match record.get(5).unwrap_or("") {
            "true" => true,
            "false" => false,
            other => return Err(malformed(&record, format!("bad is_anomaly `{other}`"))),
        };
        out.push(VerdictRecord {
            segment_id,
            cluster_label,
            scope,
            method,
            score,
            is_anomaly,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Trained model (TOML)
// ---------------------------------------------------------------------------

/// Everything needed to reproduce cluster assignments: the training
/// configuration, the feature scaling, the trained codebook, and the
/// unit → supercluster and segment → unit maps.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub som_config: SomConfig,
    pub scaling: FeatureScaling,
    pub codebook: Codebook,
    pub assignment: ClusterAssignment,
}

#[derive(Serialize, Deserialize)]
struct ScalingDoc {
    means: Vec<f64>,
    scales: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CodebookDoc {
    grid_rows: usize,
    grid_cols: usize,
    vectors: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ClustersDoc {
    n_clusters: usize,
    /// Supercluster of each map unit, row-major.
    unit_labels: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct AssignmentDoc {
    segment_ids: Vec<String>,
    units: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    version: u32,
    som: SomConfig,
    scaling: ScalingDoc,
    codebook: CodebookDoc,
    clusters: ClustersDoc,
    assignment: AssignmentDoc,
}

fn fixed_width(values: &[f64], what: &'static str) -> Result<[f64; FEATURE_DIM]> {
    <[f64; FEATURE_DIM]>::try_from(values).map_err(|_| CoreError::LengthMismatch {
        what,
        expected: FEATURE_DIM,
        got: values.len(),
    })
}

/// Serializes a trained model to the versioned TOML format.
pub fn write_model<W: Write>(mut writer: W, model: &TrainedModel) -> Result<()> {
    let (segment_ids, units): (Vec<String>, Vec<usize>) = model
        .assignment
        .unit_of_segment()
        .iter()
        .map(|(id, &unit)| (id.clone(), unit))
        .unzip();
    let doc = ModelDoc {
        version: MODEL_FORMAT_VERSION,
        som: model.som_config,
        scaling: ScalingDoc {
            means: model.scaling.means().to_vec(),
            scales: model.scaling.scales().to_vec(),
        },
        codebook: CodebookDoc {
            grid_rows: model.codebook.grid_rows(),
            grid_cols: model.codebook.grid_cols(),
            vectors: model
                .codebook
                .vectors()
                .iter()
                .map(|v| v.as_slice().to_vec())
                .collect(),
        },
        clusters: ClustersDoc {
            n_clusters: model.assignment.n_clusters(),
            unit_labels: model.assignment.supercluster_of_unit().to_vec(),
        },
        assignment: AssignmentDoc { segment_ids, units },
    };
    let text = toml::to_string_pretty(&doc)
        .map_err(|e| CoreError::ModelFile(format!("serialization failed: {e}")))?;
    writer.write_all(text.as_bytes())?;
    Ok(())
}

/// Parses and validates the versioned TOML model format.
pub fn read_model<R: Read>(mut reader: R) -> Result<TrainedModel> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let doc: ModelDoc =
        toml::from_str(&text).map_err(|e| CoreError::ModelFile(format!("parse failed: {e}")))?;
    if doc.version != MODEL_FORMAT_VERSION {
        return Err(CoreError::ModelFile(format!(
            "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
            doc.version
        )));
    }
    doc.som.validate()?;
    let scaling = FeatureScaling::from_parts(
        fixed_width(&doc.scaling.means, "scaling means")?,
        fixed_width(&doc.scaling.scales, "scaling scales")?,
    );
    let vectors = doc
        .codebook
        .vectors
        .iter()
        .map(|v| Ok(FeatureVector(fixed_width(v, "code vector")?)))
        .collect::<Result<Vec<_>>>()?;
    let codebook = Codebook::from_parts(doc.codebook.grid_rows, doc.codebook.grid_cols, vectors)?;
    if doc.assignment.segment_ids.len() != doc.assignment.units.len() {
        return Err(CoreError::LengthMismatch {
            what: "assignment units",
            expected: doc.assignment.segment_ids.len(),
            got: doc.assignment.units.len(),
        });
    }
    let unit_of_segment: BTreeMap<String, usize> = doc
        .assignment
        .segment_ids
        .into_iter()
        .zip(doc.assignment.units)
        .collect();
    let assignment = ClusterAssignment::from_parts(
        unit_of_segment,
        doc.clusters.unit_labels,
        doc.clusters.n_clusters,
    )?;
    if assignment.supercluster_of_unit().len() != codebook.units() {
        return Err(CoreError::LengthMismatch {
            what: "unit labels",
            expected: codebook.units(),
            got: assignment.supercluster_of_unit().len(),
        });
    }
    Ok(TrainedModel {
        som_config: doc.som,
        scaling,
        codebook,
        assignment,
    })
}
