//! Base data model: curves, labelled bivariate segments, and datasets.
//!
//! A [`Curve`] is guaranteed non-empty and finite at construction, so the
//! numeric code downstream never has to re-check for NaN or empty input.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// One channel of one segment: at least two finite samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve(Vec<f64>);

impl Curve {
    /// Validates and wraps raw samples. Rejects curves shorter than two
    /// points and any non-finite value.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(CoreError::CurveTooShort {
                min: 2,
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::NonFiniteValue { index });
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; present to satisfy the usual `len`/`is_empty` pairing.
    pub fn is_empty(&self) -> bool {
        false
    }
}

impl AsRef<[f64]> for Curve {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Curve {
    type Error = CoreError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

/// Which channel(s) of a segment were injected with an anomaly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroundTruth {
    Normal,
    AnomalousX,
    AnomalousY,
    AnomalousBoth,
}

impl GroundTruth {
    pub fn as_str(self) -> &'static str {
        match self {
            GroundTruth::Normal => "Normal",
            GroundTruth::AnomalousX => "AnomalousX",
            GroundTruth::AnomalousY => "AnomalousY",
            GroundTruth::AnomalousBoth => "AnomalousBoth",
        }
    }

    /// True if the given channel is anomalous under this label.
    pub fn affects_x(self) -> bool {
        matches!(self, GroundTruth::AnomalousX | GroundTruth::AnomalousBoth)
    }

    pub fn affects_y(self) -> bool {
        matches!(self, GroundTruth::AnomalousY | GroundTruth::AnomalousBoth)
    }
}

impl fmt::Display for GroundTruth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroundTruth {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Normal" => Ok(GroundTruth::Normal),
            "AnomalousX" => Ok(GroundTruth::AnomalousX),
            "AnomalousY" => Ok(GroundTruth::AnomalousY),
            "AnomalousBoth" => Ok(GroundTruth::AnomalousBoth),
            other => Err(CoreError::UnknownLabel {
                value: other.to_string(),
            }),
        }
    }
}

/// A record of two synchronous channels, sampled at the same instants.
/// `x` is the key variable used for clustering; `y` tags along through
/// alignment and is monitored by the same detectors.
#[derive(Debug, Clone, PartialEq)]
pub struct BivariateSegment {
    id: String,
    x: Curve,
    y: Curve,
    ground_truth: Option<GroundTruth>,
}

impl BivariateSegment {
    pub fn new(
        id: impl Into<String>,
        x: Curve,
        y: Curve,
        ground_truth: Option<GroundTruth>,
    ) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(CoreError::EmptySegmentId);
        }
        if x.len() != y.len() {
            return Err(CoreError::ChannelLengthMismatch {
                id,
                x_len: x.len(),
                y_len: y.len(),
            });
        }
        Ok(Self {
            id,
            x,
            y,
            ground_truth,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn x(&self) -> &Curve {
        &self.x
    }

    pub fn y(&self) -> &Curve {
        &self.y
    }

    pub fn ground_truth(&self) -> Option<GroundTruth> {
        self.ground_truth
    }

    pub fn set_ground_truth(&mut self, ground_truth: Option<GroundTruth>) {
        self.ground_truth = ground_truth;
    }

    /// Number of sampling instants (both channels share it).
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A collection of segments with unique ids plus free-form metadata
/// (seed, generator settings, injected-anomaly notes, ...).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    segments: Vec<BivariateSegment>,
    metadata: std::collections::BTreeMap<String, String>,
}

impl Dataset {
    pub fn new(segments: Vec<BivariateSegment>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for seg in &segments {
            if !seen.insert(seg.id().to_string()) {
                return Err(CoreError::DuplicateSegmentId {
                    id: seg.id().to_string(),
                });
            }
        }
        Ok(Self {
            segments,
            metadata: Default::default(),
        })
    }

    pub fn segments(&self) -> &[BivariateSegment] {
        &self.segments
    }

    pub fn get(&self, id: &str) -> Option<&BivariateSegment> {
        self.segments.iter().find(|s| s.id() == id)
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn metadata(&self) -> &std::collections::BTreeMap<String, String> {
        &self.metadata
    }

    pub fn metadata_mut(&mut self) -> &mut std::collections::BTreeMap<String, String> {
        &mut self.metadata
    }
}
