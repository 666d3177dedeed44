//! Experiment configuration, its validation and the figure presets.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{EcoError, Result};
use crate::evolution::EvolutionParams;
use crate::model::MAX_ATTRIBUTES;
use crate::userbase::DistributionSpec;

/// Everything that determines an experiment. Field names are the JSON keys;
/// missing keys take their defaults and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub habitats: usize,
    pub base_degree: usize,
    pub rewire_p: f64,
    /// Assign communities to contiguous stretches of the ring instead of
    /// scattering them at random.
    pub community_aligned: bool,
    pub attribute_space: usize,
    pub communities: usize,
    pub community_pool_size: usize,
    pub evolution: EvolutionParams,
    pub threshold_fraction: f64,
    pub eta: f64,
    pub delta: f64,
    pub cache_capacity: usize,
    pub length_spec: DistributionSpec,
    pub modularity_spec: DistributionSpec,
    pub request_rate: f64,
    pub creation_rate: f64,
    /// Agents created in every habitat before the first step.
    pub bootstrap_agents: usize,
    pub time_steps: usize,
    pub runs: usize,
    pub base_seed: u64,
    pub measurement_window_fraction: f64,
    /// Merge adjacent histogram bins expecting fewer observations than this
    /// before the chi-squared test. Off when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub merge_below: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            habitats: 100,
            base_degree: 4,
            rewire_p: 0.1,
            community_aligned: true,
            attribute_space: 64,
            communities: 10,
            community_pool_size: 16,
            evolution: EvolutionParams::default(),
            threshold_fraction: 0.1,
            eta: 0.1,
            delta: 0.01,
            cache_capacity: 100,
            length_spec: DistributionSpec::uniform(2, 18),
            modularity_spec: DistributionSpec::uniform(2, 12),
            request_rate: 0.1,
            creation_rate: 0.05,
            bootstrap_agents: 20,
            time_steps: 1000,
            runs: 10_000,
            base_seed: 1,
            measurement_window_fraction: 0.2,
            merge_below: None,
            output_dir: None,
        }
    }
}

fn unit_interval(out: &mut Vec<String>, name: &str, v: f64) {
    if !(0.0..=1.0).contains(&v) {
        out.push(format!("{name} must lie in [0, 1] (got {v})"));
    }
}

impl ExperimentConfig {
    /// Every violated constraint, one message per problem.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        let k = self.base_degree;
        if k < 2 || !k.is_multiple_of(2) {
            out.push(format!("base_degree must be an even number >= 2 (got {k})"));
        }
        if self.habitats <= k {
            out.push(format!(
                "habitats ({}) must exceed base_degree ({k})",
                self.habitats
            ));
        }
        unit_interval(&mut out, "rewire_p", self.rewire_p);
        if !(2..=MAX_ATTRIBUTES).contains(&self.attribute_space) {
            out.push(format!(
                "attribute_space must lie in [2, {MAX_ATTRIBUTES}] (got {})",
                self.attribute_space
            ));
        }
        if self.communities == 0 {
            out.push("communities must be >= 1".into());
        }
        if self.community_pool_size == 0 || self.community_pool_size > self.attribute_space {
            out.push(format!(
                "community_pool_size must lie in [1, attribute_space] (got {})",
                self.community_pool_size
            ));
        }
        out.extend(self.evolution.diagnostics("evolution"));
        unit_interval(&mut out, "threshold_fraction", self.threshold_fraction);
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            out.push(format!("eta must be > 0 (got {})", self.eta));
        }
        unit_interval(&mut out, "delta", self.delta);
        out.extend(self.length_spec.diagnostics("length_spec"));
        out.extend(self.modularity_spec.diagnostics("modularity_spec"));
        if self.modularity_spec.hi > self.attribute_space as i64 {
            out.push(format!(
                "modularity_spec.hi ({}) exceeds attribute_space ({})",
                self.modularity_spec.hi, self.attribute_space
            ));
        }
        unit_interval(&mut out, "request_rate", self.request_rate);
        unit_interval(&mut out, "creation_rate", self.creation_rate);
        if self.time_steps == 0 {
            out.push("time_steps must be >= 1".into());
        }
        if self.runs == 0 {
            out.push("runs must be >= 1".into());
        }
        let w = self.measurement_window_fraction;
        if !(w > 0.0 && w <= 1.0) {
            out.push(format!(
                "measurement_window_fraction must lie in (0, 1] (got {w})"
            ));
        }
        if let Some(m) = self.merge_below {
            if !(m > 0.0) {
                out.push(format!("merge_below must be > 0 (got {m})"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let diags = self.diagnostics();
        if diags.is_empty() {
            Ok(())
        } else {
            Err(EcoError::Config(diags.join("; ")))
        }
    }

    /// First time step (0-based) inside the measurement window.
    pub fn window_start(&self) -> usize {
        let len = (self.measurement_window_fraction * self.time_steps as f64).ceil() as usize;
        self.time_steps.saturating_sub(len.max(1))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self =
            serde_json::from_str(text).map_err(|e| EcoError::Config(format!("config parse: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| EcoError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Reads a config file and lists every problem with it. Parse failures
/// (including unknown keys) come back as a single diagnostic.
pub fn validate_config(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| EcoError::io(path, e))?;
    Ok(match serde_json::from_str::<ExperimentConfig>(&text) {
        Ok(config) => config.diagnostics(),
        Err(e) => vec![format!("parse error: {e}")],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// 200 runs of 300 steps.
    Desk,
    /// 10,000 runs of 1,000 steps.
    Full,
}

impl std::str::FromStr for Profile {
    type Err = EcoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            other => Err(EcoError::Usage(format!(
                "unknown profile {other:?} (expected desk or full)"
            ))),
        }
    }
}

impl ExperimentConfig {
    pub fn profile(profile: Profile) -> Self {
        let (runs, time_steps) = match profile {
            Profile::Desk => (200, 300),
            Profile::Full => (10_000, 1000),
        };
        Self {
            runs,
            time_steps,
            ..Self::default()
        }
    }
}

/// Request length range of the length experiments.
pub const LENGTH_RANGE: (i64, i64) = (2, 18);
/// Modularity range of the modularity experiments.
pub const MODULARITY_RANGE: (i64, i64) = (2, 12);

/// Preset for one of the six distribution experiments. Figures 5-7 vary
/// request length (uniform, gaussian, power law) at fixed modularity;
/// figures 8-10 vary modularity at fixed length.
pub fn figure_config(figure: u32, profile: Profile) -> Result<ExperimentConfig> {
    let base = ExperimentConfig::profile(profile);
    let (lo, hi) = LENGTH_RANGE;
    let (mlo, mhi) = MODULARITY_RANGE;
    let fixed_modularity = DistributionSpec::uniform(FIXED_MODULARITY, FIXED_MODULARITY);
    let fixed_length = DistributionSpec::uniform(FIXED_LENGTH, FIXED_LENGTH);
    let config = match figure {
        5 => ExperimentConfig {
            length_spec: DistributionSpec::uniform(lo, hi),
            modularity_spec: fixed_modularity,
            ..base
        },
        6 => ExperimentConfig {
            length_spec: DistributionSpec::gaussian(lo, hi),
            modularity_spec: fixed_modularity,
            ..base
        },
        7 => ExperimentConfig {
            length_spec: DistributionSpec::power_law(lo, hi),
            modularity_spec: fixed_modularity,
            ..base
        },
        8 => ExperimentConfig {
            length_spec: fixed_length,
            modularity_spec: DistributionSpec::uniform(mlo, mhi),
            ..base
        },
        9 => ExperimentConfig {
            length_spec: fixed_length,
            modularity_spec: DistributionSpec::gaussian(mlo, mhi),
            ..base
        },
        10 => ExperimentConfig {
            length_spec: fixed_length,
            modularity_spec: DistributionSpec::power_law(mlo, mhi),
            ..base
        },
        other => {
            return Err(EcoError::Usage(format!(
                "unknown figure {other}; expected 5 through 10"
            )))
        }
    };
    Ok(config)
}

/// Modularity held fixed while request length varies.
pub const FIXED_MODULARITY: i64 = 1;
/// Request length held fixed while modularity varies.
pub const FIXED_LENGTH: i64 = 1;
