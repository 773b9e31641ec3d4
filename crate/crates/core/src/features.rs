//! Fixed-length summary of a curve, plus column-wise standardization.
//!
//! Curves in a collection have different lengths, so the map stage cannot
//! consume them directly. Each curve is summarised by nine scalars; the
//! two-regime structure of the benchmark signals is captured by the
//! half-curve statistics (a rising first half and falling second half, say,
//! separate cleanly from two rising halves).
//!
//! Feature order is part of the model-file contract and must not change:
//!
//! | index | feature                                   |
//! |-------|-------------------------------------------|
//! | 0     | length                                    |
//! | 1     | value at the midpoint instant ⌈l/2⌉       |
//! | 2     | median                                    |
//! | 3     | mean                                      |
//! | 4     | variance                                  |
//! | 5     | mean of the first half (instants 1..⌊l/2⌋)|
//! | 6     | mean of the second half                   |
//! | 7     | variance of the first half                |
//! | 8     | variance of the second half               |
//!
//! All variances are population variances (divide by the count, not count−1).

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::series::Curve;

/// Number of per-curve features.
pub const FEATURE_DIM: usize = 9;

/// A point in feature space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance: mean squared deviation from the mean.
fn population_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Computes the nine summary features of a curve.
///
/// Requires at least two points so that both halves are non-empty.
pub fn extract_features(curve: &Curve) -> Result<FeatureVector> {
    let v = curve.values();
    let l = v.len();
    if l < 2 {
        return Err(CoreError::CurveTooShort { min: 2, got: l });
    }
    // Midpoint instant ⌈l/2⌉ in 1-based indexing.
    let midpoint = v[(l - 1) / 2];
    let half = l / 2;
    let (first, second) = (&v[..half], &v[half..]);
    Ok(FeatureVector([
        l as f64,
        midpoint,
        median(v),
        mean(v),
        population_variance(v),
        mean(first),
        mean(second),
        population_variance(first),
        population_variance(second),
    ]))
}

/// Column-wise location/scale parameters fitted by [`standardize`].
///
/// `scales` holds population standard deviations; a zero entry marks a
/// zero-variance column, whose standardized values are defined as 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaling {
    means: [f64; FEATURE_DIM],
    scales: [f64; FEATURE_DIM],
}

impl FeatureScaling {
    pub fn means(&self) -> &[f64; FEATURE_DIM] {
        &self.means
    }

    pub fn scales(&self) -> &[f64; FEATURE_DIM] {
        &self.scales
    }

    /// Rebuilds a scaling from stored parameters (model-file loading).
    pub fn from_parts(means: [f64; FEATURE_DIM], scales: [f64; FEATURE_DIM]) -> Self {
        Self { means, scales }
    }

    /// Applies the fitted transform to one vector.
    pub fn apply(&self, v: &FeatureVector) -> FeatureVector {
        let mut out = [0.0; FEATURE_DIM];
        for (slot, ((&value, &mean), &scale)) in
            out.iter_mut().zip(v.0.iter().zip(&self.means).zip(&self.scales))
        {
            if scale > 0.0 {
                *slot = (value - mean) / scale;
            }
        }
        FeatureVector(out)
    }
}

/// Z-scores each column over the collection and returns the transformed
/// vectors with the fitted parameters. Zero-variance columns map to zeros.
pub fn standardize(features: &[FeatureVector]) -> Result<(Vec<FeatureVector>, FeatureScaling)> {
    if features.is_empty() {
        return Err(CoreError::EmptyInput {
            what: "feature collection",
        });
    }
    let n = features.len() as f64;
    let mut means = [0.0; FEATURE_DIM];
    let mut scales = [0.0; FEATURE_DIM];
    for (j, mean) in means.iter_mut().enumerate() {
        *mean = features.iter().map(|f| f.0[j]).sum::<f64>() / n;
    }
    for j in 0..FEATURE_DIM {
        let var = features
            .iter()
            .map(|f| (f.0[j] - means[j]) * (f.0[j] - means[j]))
            .sum::<f64>()
            / n;
        scales[j] = var.sqrt();
    }
    let scaling = FeatureScaling { means, scales };
    let standardized = features.iter().map(|f| scaling.apply(f)).collect();
    Ok((standardized, scaling))
}
