//! Confusion-matrix evaluation of verdicts against ground-truth labels.
//!
//! One matrix per (method, cluster, scope). Scopes map ground truth as:
//! X counts {AnomalousX, AnomalousBoth} as atypical, Y counts
//! {AnomalousY, AnomalousBoth}, Both counts only {AnomalousBoth}.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use anyhow::{anyhow, bail, Context, Result};

use atyp_core::detect::{Method, Scope};
use atyp_core::io::VerdictRecord;
use atyp_core::series::GroundTruth;

/// Detection × truth cross-tabulation for one cluster and scope.
/// Cell naming: `a_*` rows are truly atypical segments, `na_*` truly
/// normal; `*_d` columns were detected, `*_nd` not detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub method: Method,
    pub cluster: usize,
    pub scope: Scope,
    pub a_d: usize,
    pub a_nd: usize,
    pub na_d: usize,
    pub na_nd: usize,
}

impl ConfusionMatrix {
    pub fn atypical_total(&self) -> usize {
        self.a_d + self.a_nd
    }

    pub fn normal_total(&self) -> usize {
        self.na_d + self.na_nd
    }

    pub fn detected_total(&self) -> usize {
        self.a_d + self.na_d
    }

    pub fn not_detected_total(&self) -> usize {
        self.a_nd + self.na_nd
    }

    pub fn grand_total(&self) -> usize {
        self.a_d + self.a_nd + self.na_d + self.na_nd
    }

    /// Normal segments flagged anyway.
    pub fn false_alarms(&self) -> usize {
        self.na_d
    }

    /// Detected fraction of the truly atypical, if any exist.
    pub fn recall(&self) -> Option<f64> {
        let a = self.atypical_total();
        (a > 0).then(|| self.a_d as f64 / a as f64)
    }
}

/// Cross-tabulates verdicts against labels. Every verdict's segment must
/// be labeled; matrices come out sorted by (method, cluster, scope).
pub fn evaluate(
    verdicts: &[VerdictRecord],
    labels: &BTreeMap<String, GroundTruth>,
) -> Result<Vec<ConfusionMatrix>> {
    let mut cells: BTreeMap<(Method, usize, Scope), [usize; 4]> = BTreeMap::new();
    for v in verdicts {
        let truth = labels
            .get(&v.segment_id)
            .ok_or_else(|| anyhow!("segment `{}` has a verdict but no label", v.segment_id))?;
        let atypical = v.scope.expects_anomaly(*truth);
        let cell = match (atypical, v.is_anomaly) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        };
        cells.entry((v.method, v.cluster_label, v.scope)).or_default()[cell] += 1;
    }
    Ok(cells
        .into_iter()
        .map(|((method, cluster, scope), [a_d, a_nd, na_d, na_nd])| ConfusionMatrix {
            method,
            cluster,
            scope,
            a_d,
            a_nd,
            na_d,
            na_nd,
        })
        .collect())
}

/// Writes `method,cluster,scope,a_d,a_nd,na_d,na_nd` (stable order).
pub fn write_confusion_csv<W: Write>(writer: W, matrices: &[ConfusionMatrix]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(["method", "cluster", "scope", "a_d", "a_nd", "na_d", "na_nd"])?;
    for m in matrices {
        w.write_record([
            m.method.as_str(),
            &m.cluster.to_string(),
            m.scope.as_str(),
            &m.a_d.to_string(),
            &m.a_nd.to_string(),
            &m.na_d.to_string(),
            &m.na_nd.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the confusion CSV back (for `report`).
pub fn read_confusion_csv<R: Read>(reader: R) -> Result<Vec<ConfusionMatrix>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    {
        let headers = r.headers().context("reading confusion header")?;
        let expected = ["method", "cluster", "scope", "a_d", "a_nd", "na_d", "na_nd"];
        if headers.iter().collect::<Vec<_>>() != expected {
            bail!("unexpected confusion header {headers:?}");
        }
    }
    let mut out = Vec::new();
    for record in r.records() {
        let record = record.context("reading confusion row")?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let parse = |i: usize| -> Result<usize> {
            field(i)
                .parse::<usize>()
                .with_context(|| format!("bad count `{}`", field(i)))
        };
        out.push(ConfusionMatrix {
            method: field(0).parse().map_err(|_| anyhow!("bad method `{}`", field(0)))?,
            cluster: parse(1)?,
            scope: field(2).parse().map_err(|_| anyhow!("bad scope `{}`", field(2)))?,
            a_d: parse(3)?,
            a_nd: parse(4)?,
            na_d: parse(5)?,
            na_nd: parse(6)?,
        });
    }
    Ok(out)
}
