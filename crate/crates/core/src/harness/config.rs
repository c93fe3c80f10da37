use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::auditors::Theorem;
use crate::environments::{Distribution, Script, StreamSpec};
use crate::grid::Grid;
use crate::groups::GroupSpec;
use crate::learners::RegularizerConfig;
use crate::pinball::Rate;
use crate::{Error, Result};

/// One experiment: stream, groups, learner, audit selection and output place.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub stream: StreamSpec,
    /// Empty means "use the stream's own groups".
    #[serde(default)]
    pub groups: Vec<GroupSpec>,
    pub learner: LearnerConfig,
    #[serde(default)]
    pub audit: AuditConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    /// Number of groups the learner sees; must match the group list.
    pub k: usize,
    pub q: f64,
    #[serde(flatten)]
    pub algorithm: Algorithm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum Algorithm {
    Gcaci {
        eta: f64,
    },
    /// Context-free threshold; group weights are recorded but not used.
    Aci {
        eta: f64,
    },
    Ftrl {
        regularizer: RegularizerConfig,
    },
    Swap {
        n: usize,
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<u64>,
    },
    Scripted {
        script: Script,
    },
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Gcaci { .. } => "gcaci",
            Algorithm::Aci { .. } => "aci",
            Algorithm::Ftrl { .. } => "ftrl",
            Algorithm::Swap { .. } => "swap",
            Algorithm::Scripted { .. } => "scripted",
        }
    }

    /// Step size of learners that have one.
    pub fn eta(&self) -> Option<f64> {
        match self {
            Algorithm::Gcaci { eta } | Algorithm::Aci { eta } => Some(*eta),
            Algorithm::Ftrl { regularizer } => regularizer.euclidean_eta(),
            _ => None,
        }
    }

    /// Replace the step size; errors for learners without one.
    pub fn set_eta(&mut self, value: f64) -> Result<()> {
        match self {
            Algorithm::Gcaci { eta } | Algorithm::Aci { eta } => *eta = value,
            Algorithm::Ftrl { regularizer } => match regularizer {
                RegularizerConfig::Euclidean { eta } | RegularizerConfig::Pnorm { eta, .. } => *eta = value,
            },
            other => {
                return Err(Error::config(format!("the {} learner has no step size", other.name())));
            }
        }
        Ok(())
    }
}

fn default_grid() -> usize {
    20
}

fn default_r() -> usize {
    20
}

fn default_min_size() -> f64 {
    1.0
}

fn default_convergence_epsilon() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    /// Grid resolution `n`; levels are `0, 1/n, ..., 1`.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Smoothness resolution.
    #[serde(default = "default_r")]
    pub r: usize,
    /// Bound checks to run; empty selects the identity check matching the learner.
    #[serde(default)]
    pub theorems: Vec<Theorem>,
    #[serde(default = "default_min_size")]
    pub min_size: f64,
    #[serde(default)]
    pub epsilon: f64,
    /// Tolerance for convergence times.
    #[serde(default = "default_convergence_epsilon")]
    pub convergence_epsilon: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            grid: default_grid(),
            r: default_r(),
            theorems: Vec::new(),
            min_size: default_min_size(),
            epsilon: 0.0,
            convergence_epsilon: default_convergence_epsilon(),
        }
    }
}

impl AuditConfig {
    pub fn validate(&self) -> Result<()> {
        Grid::new(self.grid)?;
        if self.r == 0 {
            return Err(Error::config("audit.r must be at least 1"));
        }
        if !(self.min_size >= 0.0) || !(self.epsilon >= 0.0) {
            return Err(Error::config("audit.min_size and audit.epsilon must be nonnegative"));
        }
        if !(self.convergence_epsilon > 0.0) {
            return Err(Error::config("audit.convergence_epsilon must be positive"));
        }
        Ok(())
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Also write cumulative within-group coverage at every group step.
    #[serde(default)]
    pub coverage_curves: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            coverage_curves: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Override every seed in the config.
    pub fn set_seed(&mut self, seed: u64) {
        self.stream.set_seed(seed);
        if let Algorithm::Swap { seed: s, .. } = &mut self.learner.algorithm {
            *s = seed;
        }
    }

    /// The configured groups, or the stream's defaults when none are given.
    pub fn resolved_groups(&self) -> Result<Vec<GroupSpec>> {
        if self.groups.is_empty() {
            self.stream.default_groups()
        } else {
            Ok(self.groups.clone())
        }
    }

    /// Check everything that can be checked before the first round.
    pub fn validate(&self) -> Result<Vec<GroupSpec>> {
        self.stream.validate()?;
        let groups = self.resolved_groups()?;
        let mut names = HashSet::new();
        for g in &groups {
            g.validate()?;
            if !names.insert(g.name.as_str()) {
                return Err(Error::config(format!("duplicate group name `{}`", g.name)));
            }
        }
        let l = &self.learner;
        if l.k != groups.len() {
            return Err(Error::config(format!(
                "learner.k = {} but {} groups are configured",
                l.k,
                groups.len()
            )));
        }
        Rate::new(l.q).map_err(|e| Error::config(e.to_string()))?;
        match &l.algorithm {
            Algorithm::Gcaci { eta } | Algorithm::Aci { eta } => {
                if !(*eta > 0.0 && *eta <= 1.0) {
                    return Err(Error::config(format!("eta = {eta} must lie in (0, 1]")));
                }
            }
            Algorithm::Ftrl { regularizer } => {
                regularizer.build()?;
            }
            Algorithm::Swap { n, horizon, .. } => {
                Grid::new(*n)?;
                if *horizon == Some(0) {
                    return Err(Error::config("swap horizon must be positive"));
                }
            }
            Algorithm::Scripted { script: Script::Example2 } => {
                if !matches!(self.stream, StreamSpec::Example2 { .. } | StreamSpec::Csv { .. }) {
                    return Err(Error::config("the example2 script needs an A/B context stream"));
                }
            }
            Algorithm::Scripted { .. } => {}
        }
        self.audit.validate()?;
        Ok(groups)
    }

    /// A complete config with every default spelled out.
    pub fn template() -> Self {
        RunConfig {
            stream: StreamSpec::Iid {
                horizon: 10_000,
                distribution: Distribution::Uniform { a: 0.0, b: 1.0 },
                seed: 1,
            },
            groups: vec![GroupSpec::all("all"), GroupSpec::modular(2), GroupSpec::modular(3)],
            learner: LearnerConfig {
                k: 3,
                q: 0.9,
                algorithm: Algorithm::Gcaci { eta: 0.1 },
            },
            audit: AuditConfig {
                theorems: vec![Theorem::GcaciCoverage, Theorem::ThresholdCalibrated],
                ..AuditConfig::default()
            },
            output: OutputConfig::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_round_trips_and_validates() {
        let t = RunConfig::template();
        let back = RunConfig::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back.learner, t.learner);
        assert_eq!(back.audit, t.audit);
        assert_eq!(back.validate().unwrap().len(), 3);
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = RunConfig::from_json(
            r#"{"stream":{"kind":"example1","horizon":10},
                "learner":{"k":1,"q":0.5,"algorithm":"scripted","script":"example1"}}"#,
        )
        .unwrap();
        assert_eq!(cfg.audit.grid, 20);
        assert_eq!(cfg.validate().unwrap()[0].name, "all");
    }

    #[test]
    fn group_count_must_match_k() {
        let mut cfg = RunConfig::template();
        cfg.learner.k = 2;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_bad_eta_and_unknown_fields() {
        let mut cfg = RunConfig::template();
        cfg.learner.algorithm = Algorithm::Gcaci { eta: 1.5 };
        assert!(cfg.validate().is_err());
        let text = RunConfig::template().to_json().unwrap().replacen("\"audit\"", "\"bogus\": 1, \"audit\"", 1);
        assert!(RunConfig::from_json(&text).is_err());
    }

    #[test]
    fn seed_override_reaches_stream_and_swap() {
        let mut cfg = RunConfig::template();
        cfg.learner.algorithm = Algorithm::Swap { n: 10, seed: 0, horizon: None };
        cfg.set_seed(77);
        assert_eq!(cfg.stream.seed(), Some(77));
        assert_eq!(cfg.learner.algorithm, Algorithm::Swap { n: 10, seed: 77, horizon: None });
    }
}
