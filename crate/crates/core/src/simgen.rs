//! Deterministic generator of the synthetic two-regime benchmark.
//!
//! Normal signals are piecewise linear with one breakpoint: one of four
//! shapes (the sign/steepness patterns of the two slopes), length,
//! breakpoint and slopes drawn uniformly from configured ranges, plus
//! centered Gaussian noise and a global least-squares degree-5 polynomial
//! smoothing (the emitted curve is the fitted polynomial). The Y channel is
//! built at X's exact length with its own breakpoint and with slopes equal
//! to this segment's X slopes times an independent jitter factor, so the
//! two channels of a segment share their coarse shape.
//!
//! A configured number of segments get one channel (or both) replaced by an
//! atypical shape before noise and smoothing: a sinusoid, a hat (triangle
//! with apex near mid-length), or a plain line. All three swing between
//! `center ± amplitude` around the midpoint of the replaced channel's
//! normal value range, with the amplitude a drawn multiple (default
//! 0.8–1.6×) of the typical half-segment sweep `typical_slope · (len−1)/2`,
//! and all three start and end at one of the two extremes — an atypical
//! curve is atypical from its very first sample, and its per-sample motion
//! is fast relative to any normal ramp of the population.
//!
//! Randomness is counter-based: stream 0 of the seeded generator plans
//! which segments are anomalous (and how), stream `i + 1` drives segment
//! `i`'s content. A segment's data therefore never depends on generation
//! order, and `generate` is embarrassingly parallel.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::series::{BivariateSegment, Curve, Dataset, GroundTruth};

/// Atypical replacement shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AnomalyShape {
    Sinusoidal,
    Hat,
    Linear,
}

impl AnomalyShape {
    pub fn as_str(self) -> &'static str {
        match self {
            AnomalyShape::Sinusoidal => "Sinusoidal",
            AnomalyShape::Hat => "Hat",
            AnomalyShape::Linear => "Linear",
        }
    }
}

impl fmt::Display for AnomalyShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnomalyShape {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Sinusoidal" => Ok(AnomalyShape::Sinusoidal),
            "Hat" => Ok(AnomalyShape::Hat),
            "Linear" => Ok(AnomalyShape::Linear),
            other => Err(CoreError::UnknownLabel {
                value: other.to_string(),
            }),
        }
    }
}

/// Which channel(s) an injected anomaly replaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AnomalyChannel {
    X,
    Y,
    Both,
}

impl AnomalyChannel {
    fn ground_truth(self) -> GroundTruth {
        match self {
            AnomalyChannel::X => GroundTruth::AnomalousX,
            AnomalyChannel::Y => GroundTruth::AnomalousY,
            AnomalyChannel::Both => GroundTruth::AnomalousBoth,
        }
    }
}

/// Benchmark generator settings. Defaults reproduce the full study scale
/// (2000 signals, 50 anomalies); shrink `n_signals`/`n_anomalies` for a
/// desk-scale run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_signals: usize,
    pub n_anomalies: usize,
    /// Segment lengths, inclusive bounds (samples).
    pub length_range: (usize, usize),
    /// Breakpoint position as a fraction of the length.
    pub breakpoint_range: (f64, f64),
    pub ascending_slope_range: (f64, f64),
    pub descending_slope_range: (f64, f64),
    /// Gaussian noise variance (signal units squared); (0, 0) disables noise.
    pub noise_variance_range: (f64, f64),
    /// Y's slopes are X's slopes times factors drawn from this range
    /// ("more or less in the same range" as the X slopes).
    pub y_slope_jitter_range: (f64, f64),
    /// Degree of the global least-squares smoothing polynomial.
    pub smoothing_degree: usize,
    /// Test hook: emit the noisy (or noiseless) curve without smoothing.
    pub smoothing: bool,
    pub anomaly_shapes: Vec<AnomalyShape>,
    pub anomaly_channels: Vec<AnomalyChannel>,
    /// Sine periods over an anomalous segment; draws snap to the nearest
    /// half-integer so the oscillation ends at an extreme.
    pub sine_periods_range: (f64, f64),
    /// Anomaly amplitude as a multiple of the typical half-segment sweep
    /// (`typical_slope · (len − 1) / 2`); applies to every shape.
    pub amplitude_factor_range: (f64, f64),
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_signals: 2000,
            n_anomalies: 50,
            length_range: (500, 3000),
            breakpoint_range: (1.0 / 3.0, 2.0 / 3.0),
            ascending_slope_range: (0.5, 4.0),
            descending_slope_range: (-4.0, -0.5),
            noise_variance_range: (10.0, 100.0),
            y_slope_jitter_range: (0.75, 1.25),
            smoothing_degree: 5,
            smoothing: true,
            // The sinusoid is listed twice so it gets double weight in
            // the deterministic shape cycle.
            anomaly_shapes: vec![
                AnomalyShape::Sinusoidal,
                AnomalyShape::Sinusoidal,
                AnomalyShape::Hat,
                AnomalyShape::Linear,
            ],
            anomaly_channels: vec![
                AnomalyChannel::X,
                AnomalyChannel::Y,
                AnomalyChannel::Both,
            ],
            sine_periods_range: (1.5, 2.0),
            amplitude_factor_range: (0.8, 1.6),
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        fn ordered(name: &'static str, (lo, hi): (f64, f64)) -> Result<()> {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(CoreError::InvalidParameter {
                    name,
                    reason: format!("range ({lo}, {hi}) must be finite and ordered"),
                });
            }
            Ok(())
        }
        if self.n_signals == 0 {
            return Err(CoreError::InvalidParameter {
                name: "n_signals",
                reason: "must be positive".into(),
            });
        }
        if self.n_anomalies > self.n_signals {
            return Err(CoreError::InvalidParameter {
                name: "n_anomalies",
                reason: format!(
                    "{} anomalies exceed {} signals",
                    self.n_anomalies, self.n_signals
                ),
            });
        }
        if self.length_range.0 < 3 || self.length_range.0 > self.length_range.1 {
            return Err(CoreError::InvalidParameter {
                name: "length_range",
                reason: format!(
                    "bounds {:?} must satisfy 3 ≤ lo ≤ hi (a breakpoint needs an interior sample)",
                    self.length_range
                ),
            });
        }
        ordered("breakpoint_range", self.breakpoint_range)?;
        if !(self.breakpoint_range.0 > 0.0 && self.breakpoint_range.1 < 1.0) {
            return Err(CoreError::InvalidParameter {
                name: "breakpoint_range",
                reason: "fractions must lie strictly inside (0, 1)".into(),
            });
        }
        ordered("ascending_slope_range", self.ascending_slope_range)?;
        if self.ascending_slope_range.0 <= 0.0 {
            return Err(CoreError::InvalidParameter {
                name: "ascending_slope_range",
                reason: "slopes must be positive".into(),
            });
        }
        ordered("descending_slope_range", self.descending_slope_range)?;
        if self.descending_slope_range.1 >= 0.0 {
            return Err(CoreError::InvalidParameter {
                name: "descending_slope_range",
                reason: "slopes must be negative".into(),
            });
        }
        ordered("noise_variance_range", self.noise_variance_range)?;
        if self.noise_variance_range.0 < 0.0 {
            return Err(CoreError::InvalidParameter {
                name: "noise_variance_range",
                reason: "variance cannot be negative".into(),
            });
        }
        ordered("y_slope_jitter_range", self.y_slope_jitter_range)?;
        if self.y_slope_jitter_range.0 <= 0.0 {
            return Err(CoreError::InvalidParameter {
                name: "y_slope_jitter_range",
                reason: "factors must be positive".into(),
            });
        }
        ordered("sine_periods_range", self.sine_periods_range)?;
        ordered("amplitude_factor_range", self.amplitude_factor_range)?;
        if self.amplitude_factor_range.0 <= 0.0 || self.sine_periods_range.0 <= 0.0 {
            return Err(CoreError::InvalidParameter {
                name: "anomaly ranges",
                reason: "periods and amplitude factors must be positive".into(),
            });
        }
        if self.smoothing && self.smoothing_degree == 0 {
            return Err(CoreError::InvalidParameter {
                name: "smoothing_degree",
                reason: "must be positive when smoothing is enabled".into(),
            });
        }
        if self.n_anomalies > 0
            && (self.anomaly_shapes.is_empty() || self.anomaly_channels.is_empty())
        {
            return Err(CoreError::InvalidParameter {
                name: "anomaly_shapes",
                reason: "anomalies requested but shape or channel mix is empty".into(),
            });
        }
        Ok(())
    }
}

/// Uniform draw from a possibly degenerate range.
fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// The four normal shapes: sign/steepness patterns of (first, second) slope.
fn normal_slopes(rng: &mut ChaCha8Rng, config: &GeneratorConfig, shape: usize) -> (f64, f64) {
    let asc = config.ascending_slope_range;
    let desc = config.descending_slope_range;
    match shape {
        // Up, then up steeper.
        0 => {
            let (a, b) = (uniform(rng, asc), uniform(rng, asc));
            (a.min(b), a.max(b))
        }
        // Up, then down.
        1 => (uniform(rng, asc), uniform(rng, desc)),
        // Down, then up.
        2 => (uniform(rng, desc), uniform(rng, asc)),
        // Down, then down steeper (more negative).
        _ => {
            let (a, b) = (uniform(rng, desc), uniform(rng, desc));
            (a.max(b), a.min(b))
        }
    }
}

fn piecewise_linear(len: usize, breakpoint: usize, s1: f64, s2: f64) -> Vec<f64> {
    let mut v = Vec::with_capacity(len);
    for u in 0..len {
        if u <= breakpoint {
            v.push(s1 * u as f64);
        } else {
            v.push(s1 * breakpoint as f64 + s2 * (u - breakpoint) as f64);
        }
    }
    v
}

fn draw_breakpoint(rng: &mut ChaCha8Rng, config: &GeneratorConfig, len: usize) -> usize {
    let frac = uniform(rng, config.breakpoint_range);
    let raw = (frac * (len - 1) as f64).round() as usize;
    raw.clamp(1, len - 2)
}

fn dynamic_range(values: &[f64]) -> f64 {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

/// The generator's typical per-sample rate: the midpoint of the ascending
/// slope range averaged with the midpoint of the descending range's
/// magnitudes. Anomaly amplitudes are expressed against the swing a ramp at
/// this rate accumulates over half a segment, so an atypical curve is
///"comparable to the normal dynamic range" of its *population* peers at the
/// same length rather than to its own (possibly shallow) base curve.
fn typical_slope(config: &GeneratorConfig) -> f64 {
    let asc = (config.ascending_slope_range.0 + config.ascending_slope_range.1) / 2.0;
    let desc = (config.descending_slope_range.0.abs() + config.descending_slope_range.1.abs()) / 2.0;
    (asc + desc) / 2.0
}

/// Replacement curve for an anomalous channel. All three shapes swing
/// between `center − amplitude` and `center + amplitude`, where `center`
/// is the midpoint of the replaced channel's normal value range and the
/// amplitude is a drawn multiple of the typical half-segment sweep
/// (`typical_slope · (len − 1) / 2`). Every shape starts *and* ends at one
/// of the two extremes, so an atypical curve is atypical from its very
/// first sample — in particular, the constant pads it contributes during
/// realignment are atypical levels rather than plausible mid-range values.
fn anomaly_curve(
    rng: &mut ChaCha8Rng,
    config: &GeneratorConfig,
    shape: AnomalyShape,
    len: usize,
    normal_base: &[f64],
) -> Vec<f64> {
    let range = dynamic_range(normal_base);
    let lo = normal_base.iter().cloned().fold(f64::INFINITY, f64::min);
    let center = lo + range / 2.0;
    let half_sweep = typical_slope(config) * (len - 1) as f64 / 2.0;
    let amplitude = uniform(rng, config.amplitude_factor_range) * half_sweep;
    let last = (len - 1) as f64;
    match shape {
        AnomalyShape::Sinusoidal => {
            // Half-integer period counts keep the final sample at an
            // extreme; a fair draw picks crest-first or trough-first.
            let periods =
                ((2.0 * uniform(rng, config.sine_periods_range)).round() / 2.0).max(0.5);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            (0..len)
                .map(|u| {
                    let t = u as f64 / last;
                    center + sign * amplitude * (std::f64::consts::TAU * periods * t).cos()
                })
                .collect()
        }
        AnomalyShape::Hat => {
            let apex = draw_breakpoint(rng, config, len);
            (0..len)
                .map(|u| {
                    let leg = if u <= apex {
                        u as f64 / apex as f64
                    } else {
                        (len - 1 - u) as f64 / (len - 1 - apex) as f64
                    };
                    center - amplitude + 2.0 * amplitude * leg
                })
                .collect()
        }
        AnomalyShape::Linear => {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            (0..len)
                .map(|u| center + sign * amplitude * (2.0 * u as f64 / last - 1.0))
                .collect()
        }
    }
}

/// Adds centered Gaussian noise in place (no-op for zero variance).
fn add_noise(rng: &mut ChaCha8Rng, values: &mut [f64], variance: f64) {
    if variance <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0, variance.sqrt()).expect("finite std");
    for v in values.iter_mut() {
        *v += normal.sample(rng);
    }
}

/// Least-squares polynomial fit evaluated at the sample positions.
///
/// The abscissa is mapped to [−1, 1] and the power basis orthonormalised by
/// modified Gram–Schmidt (two passes) before projecting, which keeps the
/// fit stable for lengths in the thousands at degree 5.
pub(crate) fn polynomial_fit(values: &[f64], degree: usize) -> Vec<f64> {
    let n = values.len();
    let degree = degree.min(n - 1);
    let u: Vec<f64> = (0..n)
        .map(|i| {
            if n == 1 {
                0.0
            } else {
                2.0 * i as f64 / (n - 1) as f64 - 1.0
            }
        })
        .collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(degree + 1);
    let mut power = vec![1.0; n];
    for d in 0..=degree {
        if d > 0 {
            for (p, x) in power.iter_mut().zip(&u) {
                *p *= x;
            }
        }
        let mut q = power.clone();
        // Two orthogonalisation passes against the accepted basis.
        for _ in 0..2 {
            for b in &basis {
                let dot: f64 = q.iter().zip(b).map(|(a, c)| a * c).sum();
                for (qi, bi) in q.iter_mut().zip(b) {
                    *qi -= dot * bi;
                }
            }
        }
        let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for qi in q.iter_mut() {
                *qi /= norm;
            }
            basis.push(q);
        }
    }
    let mut fitted = vec![0.0; n];
    for b in &basis {
        let coeff: f64 = b.iter().zip(values).map(|(bi, yi)| bi * yi).sum();
        for (f, bi) in fitted.iter_mut().zip(b) {
            *f += coeff * bi;
        }
    }
    fitted
}

struct SegmentPlan {
    anomaly: Option<(AnomalyShape, AnomalyChannel)>,
}

fn build_plan(config: &GeneratorConfig) -> Vec<SegmentPlan> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(0);
    let mut indices: Vec<usize> = (0..config.n_signals).collect();
    indices.shuffle(&mut rng);
    let mut plans: Vec<SegmentPlan> = (0..config.n_signals)
        .map(|_| SegmentPlan { anomaly: None })
        .collect();
    for &idx in indices.iter().take(config.n_anomalies) {
        let shape = config.anomaly_shapes[rng.random_range(0..config.anomaly_shapes.len())];
        let channel =
            config.anomaly_channels[rng.random_range(0..config.anomaly_channels.len())];
        plans[idx].anomaly = Some((shape, channel));
    }
    plans
}

fn segment_id(index: usize) -> String {
    format!("sig{:05}", index + 1)
}

/// Builds segment `index` from its dedicated random substream.
fn build_segment(config: &GeneratorConfig, plan: &SegmentPlan, index: usize) -> BivariateSegment {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64 + 1);

    // Fixed draw order; every segment consumes the same leading draws.
    let shape = rng.random_range(0..4usize);
    let len = rng.random_range(config.length_range.0..=config.length_range.1);
    let x_break = draw_breakpoint(&mut rng, config, len);
    let (s1, s2) = normal_slopes(&mut rng, config, shape);
    let x_variance = uniform(&mut rng, config.noise_variance_range);
    let y_break = draw_breakpoint(&mut rng, config, len);
    let t1 = s1 * uniform(&mut rng, config.y_slope_jitter_range);
    let t2 = s2 * uniform(&mut rng, config.y_slope_jitter_range);
    let y_variance = uniform(&mut rng, config.noise_variance_range);

    let x_base = piecewise_linear(len, x_break, s1, s2);
    let y_base = piecewise_linear(len, y_break, t1, t2);

    let mut x = x_base.clone();
    let mut y = y_base.clone();
    if let Some((shape, channel)) = plan.anomaly {
        if matches!(channel, AnomalyChannel::X | AnomalyChannel::Both) {
            x = anomaly_curve(&mut rng, config, shape, len, &x_base);
        }
        if matches!(channel, AnomalyChannel::Y | AnomalyChannel::Both) {
            y = anomaly_curve(&mut rng, config, shape, len, &y_base);
        }
    }

    add_noise(&mut rng, &mut x, x_variance);
    add_noise(&mut rng, &mut y, y_variance);
    if config.smoothing {
        x = polynomial_fit(&x, config.smoothing_degree);
        y = polynomial_fit(&y, config.smoothing_degree);
    }

    let ground_truth = plan
        .anomaly
        .map(|(_, channel)| channel.ground_truth())
        .unwrap_or(GroundTruth::Normal);
    BivariateSegment::new(
        segment_id(index),
        Curve::new(x).expect("generated curve is finite"),
        Curve::new(y).expect("generated curve is finite"),
        Some(ground_truth),
    )
    .expect("channels share their length by construction")
}

fn assemble(config: &GeneratorConfig, plans: &[SegmentPlan], segments: Vec<BivariateSegment>) -> Result<Dataset> {
    let mut dataset = Dataset::new(segments)?;
    let meta = dataset.metadata_mut();
    meta.insert("seed".into(), config.seed.to_string());
    meta.insert("n_signals".into(), config.n_signals.to_string());
    meta.insert("n_anomalies".into(), config.n_anomalies.to_string());
    let mut anomaly_ids = Vec::new();
    for (i, plan) in plans.iter().enumerate() {
        if let Some((shape, _)) = plan.anomaly {
            let id = segment_id(i);
            meta.insert(format!("anomaly_shape.{id}"), shape.to_string());
            anomaly_ids.push(id);
        }
    }
    meta.insert("anomaly_ids".into(), anomaly_ids.join(","));
    Ok(dataset)
}

/// Generates the benchmark dataset. Deterministic given the config (seed
/// included); dispatches to the parallel builder when available.
pub fn generate(config: &GeneratorConfig) -> Result<Dataset> {
    #[cfg(feature = "parallel")]
    {
        generate_par(config)
    }
    #[cfg(not(feature = "parallel"))]
    {
        generate_seq(config)
    }
}

/// Sequential generation; reference implementation for the benches.
pub fn generate_seq(config: &GeneratorConfig) -> Result<Dataset> {
    config.validate()?;
    let plans = build_plan(config);
    let segments = plans
        .iter()
        .enumerate()
        .map(|(i, p)| build_segment(config, p, i))
        .collect();
    assemble(config, &plans, segments)
}

/// Rayon generation: segments are pure functions of (seed, index), so the
/// result is identical to the sequential builder.
#[cfg(feature = "parallel")]
pub fn generate_par(config: &GeneratorConfig) -> Result<Dataset> {
    config.validate()?;
    let plans = build_plan(config);
    let segments = plans
        .par_iter()
        .enumerate()
        .map(|(i, p)| build_segment(config, p, i))
        .collect();
    assemble(config, &plans, segments)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> GeneratorConfig {
        GeneratorConfig {
            n_signals: 40,
            n_anomalies: 6,
            length_range: (30, 60),
            noise_variance_range: (1.0, 4.0),
            seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn respects_counts_lengths_and_labels() {
        let config = small_config();
        let ds = generate(&config).unwrap();
        assert_eq!(ds.len(), 40);
        let anomalous: Vec<_> = ds
            .segments()
            .iter()
            .filter(|s| s.ground_truth() != Some(GroundTruth::Normal))
            .collect();
        assert_eq!(anomalous.len(), 6);
        for s in ds.segments() {
            assert!((30..=60).contains(&s.len()));
            assert_eq!(s.x().len(), s.y().len());
        }
        // Metadata lists exactly the anomalous ids, each with a shape note.
        let listed: Vec<&str> = ds.metadata()["anomaly_ids"].split(',').collect();
        assert_eq!(listed.len(), 6);
        for s in &anomalous {
            assert!(listed.contains(&s.id()));
            assert!(ds.metadata().contains_key(&format!("anomaly_shape.{}", s.id())));
        }
    }

    #[test]
    fn same_seed_is_bit_identical_and_seeds_differ() {
        let config = small_config();
        let a = generate(&config).unwrap();
        let b = generate(&config).unwrap();
        assert_eq!(a, b);
        let mut other = config.clone();
        other.seed = 8;
        let c = generate(&other).unwrap();
        assert_ne!(a, c);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_and_sequential_builders_agree() {
        let config = small_config();
        assert_eq!(generate_seq(&config).unwrap(), generate_par(&config).unwrap());
    }

    /// Exhaustive two-segment least-squares breakpoint fit (test oracle).
    fn recover_breakpoint(values: &[f64]) -> usize {
        fn line_sse(pts: &[(f64, f64)]) -> f64 {
            let n = pts.len() as f64;
            let sx: f64 = pts.iter().map(|p| p.0).sum();
            let sy: f64 = pts.iter().map(|p| p.1).sum();
            let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
            let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
            let denom = n * sxx - sx * sx;
            let (a, b) = if denom.abs() < 1e-12 {
                (0.0, sy / n)
            } else {
                let a = (n * sxy - sx * sy) / denom;
                (a, (sy - a * sx) / n)
            };
            pts.iter().map(|p| (p.1 - (a * p.0 + b)).powi(2)).sum()
        }
        let pts: Vec<(f64, f64)> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (i as f64, v))
            .collect();
        (2..values.len() - 2)
            .min_by(|&a, &b| {
                let sa = line_sse(&pts[..=a]) + line_sse(&pts[a..]);
                let sb = line_sse(&pts[..=b]) + line_sse(&pts[b..]);
                sa.total_cmp(&sb)
            })
            .unwrap()
    }

    #[test]
    fn noiseless_unsmoothed_signals_are_piecewise_linear() {
        let config = GeneratorConfig {
            n_signals: 6,
            n_anomalies: 0,
            length_range: (60, 100),
            noise_variance_range: (0.0, 0.0),
            smoothing: false,
            seed: 3,
            ..Default::default()
        };
        let ds = generate(&config).unwrap();
        for s in ds.segments() {
            let v = s.x().values();
            // Second differences vanish except at the single breakpoint.
            let mut kinks = 0;
            for w in v.windows(3) {
                let dd = w[2] - 2.0 * w[1] + w[0];
                if dd.abs() > 1e-9 {
                    kinks += 1;
                }
            }
            assert_eq!(kinks, 1, "expected exactly one breakpoint in {}", s.id());
            // The exhaustive two-line fit recovers it.
            let recovered = recover_breakpoint(v);
            let true_kink = v
                .windows(3)
                .position(|w| (w[2] - 2.0 * w[1] + w[0]).abs() > 1e-9)
                .unwrap()
                + 1;
            assert!(
                recovered.abs_diff(true_kink) <= 2,
                "{}: recovered {recovered}, true {true_kink}",
                s.id()
            );
            // Y follows X's coarse shape: its first and last slopes are
            // X's times a factor within the jitter range.
            let w = s.y().values();
            let n = v.len();
            let pairs = [
                (w[1] - w[0], v[1] - v[0]),
                (w[n - 1] - w[n - 2], v[n - 1] - v[n - 2]),
            ];
            for (ys, xs) in pairs {
                let ratio = ys / xs;
                assert!(
                    (0.75..=1.25).contains(&ratio),
                    "{}: slope ratio {ratio} outside jitter range",
                    s.id()
                );
            }
        }
    }

    #[test]
    fn smoothed_noiseless_output_is_a_degree_five_polynomial() {
        let config = GeneratorConfig {
            n_signals: 4,
            n_anomalies: 2,
            length_range: (40, 80),
            noise_variance_range: (0.0, 0.0),
            seed: 5,
            ..Default::default()
        };
        let ds = generate(&config).unwrap();
        for s in ds.segments() {
            for v in [s.x().values(), s.y().values()] {
                let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
                // 6th-order finite differences of a degree-5 polynomial are
                // zero up to accumulated rounding.
                for w in v.windows(7) {
                    let d6 = w[0] - 6.0 * w[1] + 15.0 * w[2] - 20.0 * w[3] + 15.0 * w[4]
                        - 6.0 * w[5]
                        + w[6];
                    assert!(
                        d6.abs() <= 1e-6 * scale,
                        "sixth difference {d6} too large for scale {scale}"
                    );
                }
            }
        }
    }

    #[test]
    fn polynomial_fit_reproduces_low_degree_data() {
        let n = 50;
        let data: Vec<f64> = (0..n)
            .map(|i| {
                let u = 2.0 * i as f64 / (n - 1) as f64 - 1.0;
                3.0 - 2.0 * u + 0.5 * u * u * u
            })
            .collect();
        let fitted = polynomial_fit(&data, 5);
        for (f, d) in fitted.iter().zip(&data) {
            assert!((f - d).abs() < 1e-9, "fit {f} vs data {d}");
        }
        let constant = vec![4.25; 10];
        for f in polynomial_fit(&constant, 5) {
            assert!((f - 4.25).abs() < 1e-12);
        }
    }

    #[test]
    fn anomalous_channels_follow_the_plan() {
        let config = GeneratorConfig {
            n_signals: 30,
            n_anomalies: 30,
            anomaly_channels: vec![AnomalyChannel::Both],
            anomaly_shapes: vec![AnomalyShape::Sinusoidal],
            length_range: (30, 40),
            seed: 9,
            ..Default::default()
        };
        let ds = generate(&config).unwrap();
        for s in ds.segments() {
            assert_eq!(s.ground_truth(), Some(GroundTruth::AnomalousBoth));
            assert_eq!(
                ds.metadata()[&format!("anomaly_shape.{}", s.id())],
                "Sinusoidal"
            );
        }
    }

    #[test]
    fn anomalous_curves_start_and_end_at_their_extremes() {
        for shape in [
            AnomalyShape::Sinusoidal,
            AnomalyShape::Hat,
            AnomalyShape::Linear,
        ] {
            let config = GeneratorConfig {
                n_signals: 12,
                n_anomalies: 12,
                anomaly_channels: vec![AnomalyChannel::Both],
                anomaly_shapes: vec![shape],
                length_range: (50, 90),
                noise_variance_range: (0.0, 0.0),
                smoothing: false,
                seed: 11,
                ..Default::default()
            };
            let ds = generate(&config).unwrap();
            for s in ds.segments() {
                for v in [s.x().values(), s.y().values()] {
                    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
                    assert!(hi > lo, "{}: flat anomalous curve", s.id());
                    let eps = 1e-9 * (hi - lo);
                    for edge in [v[0], v[v.len() - 1]] {
                        assert!(
                            (edge - hi).abs() <= eps || (edge - lo).abs() <= eps,
                            "{}: edge {edge} is not an extreme of [{lo}, {hi}]",
                            s.id()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = small_config();
        c.n_anomalies = 100;
        assert!(generate(&c).is_err());
        let mut c = small_config();
        c.length_range = (10, 5);
        assert!(generate(&c).is_err());
        let mut c = small_config();
        c.breakpoint_range = (0.0, 0.5);
        assert!(generate(&c).is_err());
        let mut c = small_config();
        c.descending_slope_range = (-1.0, 1.0);
        assert!(generate(&c).is_err());
        let mut c = small_config();
        c.anomaly_shapes.clear();
        assert!(generate(&c).is_err());
    }
}
