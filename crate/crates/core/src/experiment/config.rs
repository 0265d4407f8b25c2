use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{MarketError, Result};
use crate::model::{Alpha, ScenarioSpec};
use crate::scenarios::{seven_cell_preset, LoadModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Market equilibrium.
    Me,
    /// Social optimum.
    So,
    /// Static proportional share.
    Ss,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Me => "ME",
            Scheme::So => "SO",
            Scheme::Ss => "SS",
        })
    }
}

impl std::str::FromStr for Scheme {
    type Err = MarketError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "me" => Ok(Scheme::Me),
            "so" => Ok(Scheme::So),
            "ss" => Ok(Scheme::Ss),
            _ => Err(MarketError::InvalidScenario(format!("unknown scheme {s:?}, expected me, so or ss"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioSource {
    /// The built-in seven-cell, three-provider scenario.
    Preset,
    File(PathBuf),
}

impl ScenarioSource {
    pub fn load(&self) -> Result<ScenarioSpec> {
        match self {
            ScenarioSource::Preset => Ok(seven_cell_preset()),
            ScenarioSource::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| MarketError::InvalidScenario(format!("{}: {e}", path.display())))?;
                ScenarioSpec::from_json(&text)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetSweepConfig {
    /// Index of the provider whose budget share is varied.
    pub sp: usize,
    pub fractions: Vec<f64>,
    pub alphas: Vec<Alpha>,
}

impl Default for BudgetSweepConfig {
    fn default() -> Self {
        BudgetSweepConfig {
            sp: 0,
            fractions: (1..=9).map(|i| i as f64 / 10.0).collect(),
            alphas: vec![Alpha::Finite(1.0), Alpha::Finite(2.0), Alpha::Finite(3.0)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSource,
    /// `None` runs the scenario as given, once.
    pub load_model: Option<LoadModel>,
    pub alphas: Vec<Alpha>,
    pub instances: usize,
    pub schemes: Vec<Scheme>,
    pub budget_sweep: Option<BudgetSweepConfig>,
    pub output_dir: PathBuf,
    /// Seeds the load model; overrides `load_model.seed`.
    pub seed: u64,
    pub jobs: usize,
    pub convergence_trace: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: ScenarioSource::Preset,
            load_model: Some(LoadModel::default()),
            alphas: (0..=10).map(|i| Alpha::Finite(i as f64 / 2.0)).collect(),
            instances: 100,
            schemes: vec![Scheme::Me, Scheme::So, Scheme::Ss],
            budget_sweep: Some(BudgetSweepConfig::default()),
            output_dir: PathBuf::from("results"),
            seed: 0,
            jobs: 1,
            convergence_trace: true,
        }
    }
}

fn invalid(field: &str, msg: impl fmt::Display) -> MarketError {
    MarketError::InvalidScenario(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    /// Parse a JSON config. Errors name the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(if path == "." { "config" } else { &path }, e.inner())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(&path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, a) in self.alphas.iter().enumerate() {
            a.validate().map_err(|e| invalid(&format!("alphas[{i}]"), e))?;
        }
        if self.schemes.is_empty() {
            return Err(invalid("schemes", "at least one scheme is required"));
        }
        if self.load_model.is_some() && self.instances == 0 {
            return Err(invalid("instances", "must be at least 1"));
        }
        if let Some(load) = &self.load_model {
            load.validate()?;
        }
        if self.jobs == 0 {
            return Err(invalid("jobs", "must be at least 1"));
        }
        if let Some(bs) = &self.budget_sweep {
            for (i, f) in bs.fractions.iter().enumerate() {
                if !(*f > 0.0 && *f < 1.0) {
                    return Err(invalid(&format!("budget_sweep.fractions[{i}]"), format!("{f} is outside (0, 1)")));
                }
            }
            for (i, a) in bs.alphas.iter().enumerate() {
                a.validate().map_err(|e| invalid(&format!("budget_sweep.alphas[{i}]"), e))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
        assert_eq!(cfg.alphas.len(), 11);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"alphas": [1, "inf"], "instances": 3, "schemes": ["me", "ss"]}"#).unwrap();
        assert_eq!(cfg.alphas, vec![Alpha::Finite(1.0), Alpha::Infinite]);
        assert_eq!(cfg.schemes, vec![Scheme::Me, Scheme::Ss]);
        assert_eq!(cfg.jobs, 1);
    }

    #[test]
    fn errors_name_the_field() {
        let err = ExperimentConfig::from_json(r#"{"load_model": {"mean": 100, "sigma": 3}}"#).unwrap_err();
        assert!(err.to_string().contains("load_model"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"alphas": [1, -2]}"#).unwrap_err();
        assert!(err.to_string().contains("alphas[1]"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"budget_sweep": {"fractions": [0.5, 1.5]}}"#).unwrap_err();
        assert!(err.to_string().contains("budget_sweep.fractions[1]"), "{err}");
    }

    #[test]
    fn scheme_names() {
        assert_eq!("SO".parse::<Scheme>().unwrap(), Scheme::So);
        assert_eq!(Scheme::Ss.to_string(), "SS");
        assert!("xx".parse::<Scheme>().is_err());
    }
}
