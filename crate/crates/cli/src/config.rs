//! Run configuration: one TOML file covering every stage, each default
//! overridable by a CLI flag. A single top-level seed drives all seeded
//! stages deterministically.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use atyp_core::simgen::GeneratorConfig;
use atyp_core::som::SomConfig;

/// Full pipeline configuration. Serialized form is the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; the generator, SOM, and medoid sampling seeds are
    /// derived from it (their own seed fields are overwritten).
    pub seed: u64,
    /// Tube/table coverage parameter α.
    pub alpha: f64,
    /// CT: anomaly iff longest out-of-tube run ≥ this fraction of length.
    pub ct_run_threshold: f64,
    /// CQ: anomaly iff violating-transition fraction strictly exceeds this.
    pub cq_violation_threshold: f64,
    /// Number of equal-frequency bins for the CQ lag discretization.
    pub cq_bins: usize,
    /// Bins below this count are merged with a neighbour.
    pub cq_min_bin_count: usize,
    /// Smallest k whose explained variance reaches this threshold.
    pub explained_variance_threshold: f64,
    /// Fixed cluster count; overrides the explained-variance rule.
    pub forced_k: Option<usize>,
    /// Medoid search samples at most this many members per cluster
    /// (0 = no cap).
    pub medoid_sample_cap: usize,
    pub som: SomConfig,
    pub generator: GeneratorConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            alpha: 0.05,
            ct_run_threshold: 0.10,
            cq_violation_threshold: 0.10,
            cq_bins: 20,
            cq_min_bin_count: 30,
            explained_variance_threshold: 0.80,
            forced_k: None,
            medoid_sample_cap: 1000,
            som: SomConfig {
                grid_rows: 10,
                grid_cols: 10,
                epochs: 20,
                initial_learning_rate: 0.5,
                initial_radius: SomConfig::default_radius(10, 10),
                seed: 0,
            },
            generator: GeneratorConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).context("parsing config file")?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        Self::from_toml(&text)
    }

    /// Pushes the master seed into the seeded sub-configs. Call once after
    /// loading and applying flag overrides; all stages then derive their
    /// randomness from `seed` alone.
    pub fn with_derived_seeds(mut self) -> Self {
        self.generator.seed = self.seed;
        self.som.seed = self.seed.wrapping_add(1);
        self
    }

    /// Seed for the medoid subsampler (one more derived stream).
    pub fn medoid_seed(&self) -> u64 {
        self.seed.wrapping_add(2)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("ct_run_threshold", self.ct_run_threshold),
            ("cq_violation_threshold", self.cq_violation_threshold),
            ("explained_variance_threshold", self.explained_variance_threshold),
        ] {
            if !(v > 0.0 && v < 1.0) && !(name == "explained_variance_threshold" && v == 1.0) {
                bail!("{name} must lie in (0, 1), got {v}");
            }
        }
        if self.cq_bins == 0 || self.cq_min_bin_count == 0 {
            bail!("cq_bins and cq_min_bin_count must be positive");
        }
        if self.forced_k == Some(0) {
            bail!("forced_k must be positive");
        }
        self.som.validate().context("som config")?;
        self.generator.validate().context("generator config")?;
        Ok(())
    }

    /// Canonical serialized form; also what the config hash covers.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).context("serializing config")
    }

    /// SHA-256 of the canonical serialization of the *effective* config
    /// (after flag overrides and seed derivation), hex-encoded.
    pub fn hash(&self) -> Result<String> {
        let canonical = self.to_toml()?;
        Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let config = RunConfig::default().with_derived_seeds();
        config.validate().unwrap();
        let text = config.to_toml().unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn hash_tracks_every_field() {
        let base = RunConfig::default().with_derived_seeds();
        let mut other = base.clone();
        other.cq_bins = 21;
        assert_ne!(base.hash().unwrap(), other.hash().unwrap());
        let mut reseeded = base.clone();
        reseeded.seed = 9;
        let reseeded = reseeded.with_derived_seeds();
        assert_ne!(base.hash().unwrap(), reseeded.hash().unwrap());
        assert_eq!(base.hash().unwrap(), base.clone().hash().unwrap());
    }

    #[test]
    fn derived_seeds_follow_the_master() {
        let mut config = RunConfig {
            seed: 7,
            ..RunConfig::default()
        };
        config.generator.seed = 999;
        config.som.seed = 999;
        let config = config.with_derived_seeds();
        assert_eq!(config.generator.seed, 7);
        assert_eq!(config.som.seed, 8);
        assert_eq!(config.medoid_seed(), 9);
    }

    #[test]
    fn partial_toml_uses_defaults_and_unknown_keys_fail() {
        let config = RunConfig::from_toml("seed = 3\nalpha = 0.1\n").unwrap();
        assert_eq!(config.seed, 3);
        assert_eq!(config.alpha, 0.1);
        assert_eq!(config.cq_bins, RunConfig::default().cq_bins);
        assert!(RunConfig::from_toml("alhpa = 0.1\n").is_err());
    }

    #[test]
    fn validation_rejects_bad_thresholds() {
        let config = RunConfig {
            alpha: 0.0,
            ..RunConfig::default()
        };
        assert!(config.validate().is_err());
        let config = RunConfig {
            ct_run_threshold: 1.0,
            ..RunConfig::default()
        };
        assert!(config.validate().is_err());
        let config = RunConfig {
            explained_variance_threshold: 1.0,
            ..RunConfig::default()
        };
        assert!(config.validate().is_ok(), "threshold 1.0 is allowed");
        let config = RunConfig {
            forced_k: Some(0),
            ..RunConfig::default()
        };
        assert!(config.validate().is_err());
    }
}
