//! The two per-cluster anomaly detectors over aligned curves.
//!
//! **CT (confidence tube)**: per sampling instant, an empirical
//! `[α/2, 1−α/2]` quantile interval across the cluster. A curve is anomalous
//! when its longest *consecutive* run outside the tube reaches `P·L` points.
//!
//! **CQ (conditional quantiles)**: all lag-1 transition pairs
//! `(v(t−1), v(t))` of the cluster are pooled; the lagged coordinate is
//! discretized into equal-frequency bins and per bin an `[α/2, 1−α/2]`
//! quantile interval of the successor values is kept. A curve is anomalous
//! when the *fraction* of its transitions that violate their bin's interval
//! strictly exceeds the threshold. The differing rules (run vs count) are
//! intentional.
//!
//! Quantiles use the nearest-rank rule throughout: quantile `p` of `n`
//! sorted values is the value at 1-based rank `⌈p·n⌉`. No interpolation, so
//! results are exactly reproducible.
//!
//! Scored curves are typically members of the training cluster; no
//! leave-one-out correction is applied.

use std::fmt;
use std::str::FromStr;

use crate::error::{CoreError, Result};
use crate::series::{Curve, GroundTruth};

/// Which channel of a segment a tube/table/verdict refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    X,
    Y,
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Channel::X => "X",
            Channel::Y => "Y",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "X" => Ok(Channel::X),
            "Y" => Ok(Channel::Y),
            other => Err(CoreError::UnknownLabel {
                value: other.to_string(),
            }),
        }
    }
}

/// Evaluation scope of a verdict: one channel, or the conjunction that
/// flags a segment only when both of its channels are flagged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scope {
    X,
    Y,
    Both,
}

impl Scope {
    pub const ALL: [Scope; 3] = [Scope::X, Scope::Y, Scope::Both];

    pub fn as_str(self) -> &'static str {
        match self {
            Scope::X => "X",
            Scope::Y => "Y",
            Scope::Both => "Both",
        }
    }

    /// Whether a ground-truth label counts as anomalous in this scope:
    /// per-channel scopes admit the matching single-channel label and
    /// `AnomalousBoth`; the `Both` scope admits only `AnomalousBoth`.
    pub fn expects_anomaly(self, truth: GroundTruth) -> bool {
        match self {
            Scope::X => truth.affects_x(),
            Scope::Y => truth.affects_y(),
            Scope::Both => truth.affects_x() && truth.affects_y(),
        }
    }
}

impl From<Channel> for Scope {
    fn from(channel: Channel) -> Self {
        match channel {
            Channel::X => Scope::X,
            Channel::Y => Scope::Y,
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scope {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "X" => Ok(Scope::X),
            "Y" => Ok(Scope::Y),
            "Both" => Ok(Scope::Both),
            other => Err(CoreError::UnknownLabel {
                value: other.to_string(),
            }),
        }
    }
}

/// Which detector produced a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Ct,
    Cq,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ct => "CT",
            Method::Cq => "CQ",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "CT" => Ok(Method::Ct),
            "CQ" => Ok(Method::Cq),
            other => Err(CoreError::UnknownLabel {
                value: other.to_string(),
            }),
        }
    }
}

/// Nearest-rank quantile of already-sorted values: 1-based rank ⌈p·n⌉,
/// clamped into the valid range for p at the extremes.
fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = (p * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CoreError::InvalidParameter {
            name: "alpha",
            reason: format!("must be in (0, 1), got {alpha}"),
        });
    }
    Ok(())
}

fn validate_threshold(name: &'static str, value: f64) -> Result<()> {
    if !(value > 0.0 && value < 1.0) {
        return Err(CoreError::InvalidParameter {
            name,
            reason: format!("must be in (0, 1), got {value}"),
        });
    }
    Ok(())
}

/// Pointwise empirical quantile tube of one cluster/channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceTube {
    cluster_label: usize,
    channel: Channel,
    alpha: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ConfidenceTube {
    /// Rebuilds a tube from stored bounds (artifact loading).
    pub fn from_parts(
        cluster_label: usize,
        channel: Channel,
        alpha: f64,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self> {
        validate_alpha(alpha)?;
        if lower.is_empty() {
            return Err(CoreError::EmptyInput { what: "tube bounds" });
        }
        if lower.len() != upper.len() {
            return Err(CoreError::LengthMismatch {
                what: "tube bounds",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(CoreError::InvalidParameter {
                name: "tube bounds",
                reason: "lower bound exceeds upper bound".into(),
            });
        }
        Ok(Self {
            cluster_label,
            channel,
            alpha,
            lower,
            upper,
        })
    }

    pub fn cluster_label(&self) -> usize {
        self.cluster_label
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Fits the per-instant `[α/2, 1−α/2]` nearest-rank tube over the cluster's
/// aligned curves. Order of the curves does not matter.
pub fn fit_ct(
    cluster_label: usize,
    channel: Channel,
    curves: &[&Curve],
    alpha: f64,
) -> Result<ConfidenceTube> {
    validate_alpha(alpha)?;
    if curves.len() < 2 {
        return Err(CoreError::InsufficientClusterData {
            label: cluster_label,
            reason: format!("confidence tube needs at least 2 curves, got {}", curves.len()),
        });
    }
    let len = curves[0].len();
    for c in curves {
        if c.len() != len {
            return Err(CoreError::LengthMismatch {
                what: "aligned curve",
                expected: len,
                got: c.len(),
            });
        }
    }
    let mut lower = Vec::with_capacity(len);
    let mut upper = Vec::with_capacity(len);
    let mut column = vec![0.0; curves.len()];
    for t in 0..len {
        for (slot, c) in column.iter_mut().zip(curves) {
            *slot = c.values()[t];
        }
        column.sort_by(f64::total_cmp);
        lower.push(nearest_rank(&column, alpha / 2.0));
        upper.push(nearest_rank(&column, 1.0 - alpha / 2.0));
    }
    Ok(ConfidenceTube {
        cluster_label,
        channel,
        alpha,
        lower,
        upper,
    })
}

/// Outcome of scoring one curve with one detector.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionVerdict {
    pub segment_id: String,
    pub cluster_label: usize,
    pub channel: Channel,
    pub method: Method,
    /// CT: longest out-of-tube run over L. CQ: violating transitions over L−1.
    pub score: f64,
    pub is_anomaly: bool,
    /// CT: per instant. CQ: per transition (length L−1).
    pub violation_mask: Vec<bool>,
}

fn longest_run(mask: &[bool]) -> usize {
    let mut best = 0;
    let mut current = 0;
    for &v in mask {
        if v {
            current += 1;
            best = best.max(current);
        } else {
            current = 0;
        }
    }
    best
}

/// Scores a curve against a tube: anomaly iff the longest consecutive
/// out-of-tube run reaches the fraction `run_threshold` of the length
/// (`score ≥ run_threshold`, equivalently `run ≥ ⌈P·L⌉` points).
pub fn detect_ct(
    segment_id: &str,
    curve: &Curve,
    tube: &ConfidenceTube,
    run_threshold: f64,
) -> Result<DetectionVerdict> {
    validate_threshold("run_threshold", run_threshold)?;
    if curve.len() != tube.len() {
        return Err(CoreError::LengthMismatch {
            what: "curve vs tube",
            expected: tube.len(),
            got: curve.len(),
        });
    }
    let violation_mask: Vec<bool> = curve
        .values()
        .iter()
        .zip(tube.lower().iter().zip(tube.upper()))
        .map(|(v, (l, u))| v < l || v > u)
        .collect();
    let score = longest_run(&violation_mask) as f64 / curve.len() as f64;
    Ok(DetectionVerdict {
        segment_id: segment_id.to_string(),
        cluster_label: tube.cluster_label(),
        channel: tube.channel(),
        method: Method::Ct,
        score,
        is_anomaly: score >= run_threshold,
        violation_mask,
    })
}

/// One equal-frequency bin of the lag-1 conditional table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CqBin {
    /// Smallest lagged value observed in the bin.
    pub lag_lo: f64,
    /// Largest lagged value observed in the bin.
    pub lag_hi: f64,
    /// Nearest-rank α/2 quantile of the successor values.
    pub lower: f64,
    /// Nearest-rank 1−α/2 quantile of the successor values.
    pub upper: f64,
    /// Number of training pairs in the bin.
    pub count: usize,
}

/// Discretized lag-1 conditional quantile table of one cluster/channel.
///
/// Lookup is total: a lagged value between two bins belongs to the right
/// bin of the midpoint boundary, and values outside the training range
/// clamp to the extreme bins.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalQuantileTable {
    cluster_label: usize,
    channel: Channel,
    alpha: f64,
    bins: Vec<CqBin>,
}

impl ConditionalQuantileTable {
    /// Rebuilds a table from stored bins (artifact loading). Bins must be
    /// in ascending, non-overlapping lag order.
    pub fn from_parts(
        cluster_label: usize,
        channel: Channel,
        alpha: f64,
        bins: Vec<CqBin>,
    ) -> Result<Self> {
        validate_alpha(alpha)?;
        if bins.is_empty() {
            return Err(CoreError::EmptyInput { what: "CQ bins" });
        }
        for b in &bins {
            if !(b.lag_lo <= b.lag_hi && b.lower <= b.upper) || b.count == 0 {
                return Err(CoreError::InvalidParameter {
                    name: "CQ bin",
                    reason: format!("degenerate bin {b:?}"),
                });
            }
        }
        if bins.windows(2).any(|w| w[0].lag_hi >= w[1].lag_lo) {
            return Err(CoreError::InvalidParameter {
                name: "CQ bins",
                reason: "bins must be strictly ascending in lag".into(),
            });
        }
        Ok(Self {
            cluster_label,
            channel,
            alpha,
            bins,
        })
    }

    pub fn cluster_label(&self) -> usize {
        self.cluster_label
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn bins(&self) -> &[CqBin] {
        &self.bins
    }

    /// Bin boundaries: observed extremes outside, midpoints between
    /// adjacent bins inside (`bins.len() + 1` edges).
    pub fn bin_edges(&self) -> Vec<f64> {
        let mut edges = Vec::with_capacity(self.bins.len() + 1);
        edges.push(self.bins[0].lag_lo);
        for w in self.bins.windows(2) {
            edges.push((w[0].lag_hi + w[1].lag_lo) / 2.0);
        }
        edges.push(self.bins[self.bins.len() - 1].lag_hi);
        edges
    }

    /// Index of the bin responsible for a lagged value (total, clamping).
    pub fn bin_index(&self, lag: f64) -> usize {
        let edges = self.bin_edges();
        let interior = &edges[1..edges.len() - 1];
        interior.partition_point(|e| lag >= *e)
    }
}

/// Fits the lag-1 conditional quantile table of a cluster/channel.
///
/// All transition pairs `(v(t−1), v(t))` of the cluster are pooled and
/// sorted by lagged value. Equal-frequency cut points at `⌊j·N/n_bins⌋` are
/// snapped right past ties (equal lags never split across bins), then
/// undersized bins are merged with their right neighbour (the last bin
/// merges left) until every bin holds at least `min_bin_count` pairs.
pub fn fit_cq(
    cluster_label: usize,
    channel: Channel,
    curves: &[&Curve],
    alpha: f64,
    n_bins: usize,
    min_bin_count: usize,
) -> Result<ConditionalQuantileTable> {
    validate_alpha(alpha)?;
    if n_bins == 0 {
        return Err(CoreError::InvalidParameter {
            name: "n_bins",
            reason: "must be positive".into(),
        });
    }
    if min_bin_count == 0 {
        return Err(CoreError::InvalidParameter {
            name: "min_bin_count",
            reason: "must be positive".into(),
        });
    }
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for c in curves {
        let v = c.values();
        for t in 1..v.len() {
            pairs.push((v[t - 1], v[t]));
        }
    }
    let n = pairs.len();
    if n < 2 * min_bin_count {
        return Err(CoreError::InsufficientClusterData {
            label: cluster_label,
            reason: format!(
                "conditional quantiles need at least {} transition pairs, got {n}",
                2 * min_bin_count
            ),
        });
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    // Equal-frequency cuts, snapped right so ties stay together.
    let mut cuts: Vec<usize> = Vec::with_capacity(n_bins + 1);
    cuts.push(0);
    for j in 1..n_bins {
        let mut c = j * n / n_bins;
        while c > 0 && c < n && pairs[c].0 == pairs[c - 1].0 {
            c += 1;
        }
        if c > *cuts.last().expect("cuts non-empty") && c < n {
            cuts.push(c);
        }
    }
    cuts.push(n);

    // (start, end) index ranges of the provisional bins.
    let mut ranges: Vec<(usize, usize)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();

    // Merge undersized bins: leftmost offender joins its right neighbour,
    // the last bin joins its left one.
    while ranges.len() > 1 {
        let Some(i) = ranges
            .iter()
            .position(|(s, e)| e - s < min_bin_count)
        else {
            break;
        };
        if i + 1 < ranges.len() {
            let (_, e) = ranges.remove(i + 1);
            ranges[i].1 = e;
        } else {
            let (_, e) = ranges.remove(i);
            ranges[i - 1].1 = e;
        }
    }

    let mut bins = Vec::with_capacity(ranges.len());
    let mut seconds = Vec::new();
    for (s, e) in ranges {
        seconds.clear();
        seconds.extend(pairs[s..e].iter().map(|p| p.1));
        seconds.sort_by(f64::total_cmp);
        bins.push(CqBin {
            lag_lo: pairs[s].0,
            lag_hi: pairs[e - 1].0,
            lower: nearest_rank(&seconds, alpha / 2.0),
            upper: nearest_rank(&seconds, 1.0 - alpha / 2.0),
            count: e - s,
        });
    }
    Ok(ConditionalQuantileTable {
        cluster_label,
        channel,
        alpha,
        bins,
    })
}

/// Scores a curve against a conditional quantile table: anomaly iff the
/// fraction of violating transitions strictly exceeds `threshold`.
/// A curve with fewer than two points has no transitions and scores 0.
pub fn detect_cq(
    segment_id: &str,
    curve: &Curve,
    table: &ConditionalQuantileTable,
    threshold: f64,
) -> Result<DetectionVerdict> {
    validate_threshold("violation_threshold", threshold)?;
    let v = curve.values();
    let mut violation_mask = Vec::with_capacity(v.len().saturating_sub(1));
    for t in 1..v.len() {
        let bin = &table.bins()[table.bin_index(v[t - 1])];
        violation_mask.push(v[t] < bin.lower || v[t] > bin.upper);
    }
    let violations = violation_mask.iter().filter(|&&b| b).count();
    let score = if violation_mask.is_empty() {
        0.0
    } else {
        violations as f64 / violation_mask.len() as f64
    };
    Ok(DetectionVerdict {
        segment_id: segment_id.to_string(),
        cluster_label: table.cluster_label(),
        channel: table.channel(),
        method: Method::Cq,
        score,
        is_anomaly: score > threshold,
        violation_mask,
    })
}
