//! Experiment configuration as read from JSON.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridfn::{Grid, GridSpec};
use crate::kernel::builtin;
use crate::metric::AnisotropyProfile;
use crate::spaces::{Weight, WeightSpec};

/// Every field but `experiment` is optional; experiments fill in their own
/// defaults for anything left out.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<WeightSpec>,
    /// Exponents `α_i`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Truncation radii as multiples of the largest grid spacing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_multiples: Option<Vec<f64>>,
    /// Expansion degree `M`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    /// Report destination. The JSON and CSV reports are written next to
    /// each other with extensions `.json` and `.csv`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: impl Into<String>) -> Self {
        ExperimentConfig {
            experiment: experiment.into(),
            ..Default::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Resolves every name and checks every number, without running anything.
    pub fn validate(&self) -> Result<()> {
        if !super::EXPERIMENTS.iter().any(|(name, _)| *name == self.experiment) {
            return Err(Error::UnknownExperiment(self.experiment.clone()));
        }
        if let Some(k) = &self.kernel {
            builtin(k)?;
        }
        if let Some(w) = &self.weight {
            Weight::from_spec(w)?;
        }
        if let Some(p) = &self.profile {
            AnisotropyProfile::new(p.clone())?;
        }
        if let Some(g) = &self.grid {
            Grid::try_from(g.clone())?;
        }
        if let Some(p) = self.p {
            if !(p > 1.0 && p.is_finite()) {
                return Err(Error::invalid(format!("p must lie in (1, inf), got {p}")));
            }
        }
        if let Some(e) = &self.epsilon_multiples {
            if e.is_empty() || e.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::invalid("epsilon multiples must be positive and finite"));
            }
        }
        if let Some(m) = self.max_degree {
            if m < 2 {
                return Err(Error::invalid(format!("max_degree must be >= 2, got {m}")));
            }
        }
        if let Some(r) = &self.radii {
            if r.is_empty() || r.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::invalid("radii must be positive and finite"));
            }
        }
        Ok(())
    }

    pub(crate) fn profile_or(&self, default: &[f64]) -> Result<AnisotropyProfile> {
        AnisotropyProfile::new(self.profile.clone().unwrap_or_else(|| default.to_vec()))
    }

    pub(crate) fn grid_or(&self, default: Grid) -> Result<Grid> {
        match &self.grid {
            Some(g) => Grid::try_from(g.clone()),
            None => Ok(default),
        }
    }

    pub(crate) fn weight_or(&self, default: WeightSpec) -> Result<Weight> {
        Weight::from_spec(self.weight.as_ref().unwrap_or(&default))
    }
}
