//! Scenario files: a TOML document with `source`, `channel`, `grids`,
//! `tolerances` and `simulation` sections. Unknown keys are rejected.
//!
//! ```toml
//! seed = 0
//! source.preset = "correlated-binary"
//! channel.kind = "bsc"
//! channel.param = 0.025
//! grids.rate_step = 0.001
//! ```

use std::path::Path;

use jscsi::{ConditionalDistribution, JointDistribution};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Name of the built-in correlated binary source.
pub const CORRELATED_BINARY: &str = "correlated-binary";

/// The built-in source: `A = B` with probability 0.95, and `A = 0` forces `B = 0`.
pub fn correlated_binary() -> Vec<Vec<f64>> {
    vec![vec![0.50, 0.00], vec![0.05, 0.45]]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    pub source: SourceSpec,
    pub channel: ChannelSpec,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub simulation: Simulation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Rows indexed by `a`, columns by `b`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    Bsc,
    Bec,
    Identity,
    Matrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub kind: ChannelKind,
    /// Crossover or erasure probability.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<f64>,
    /// Alphabet size of the identity channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    /// Rows indexed by `x`, columns by `y`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grids {
    pub rate_step: f64,
    pub simplex_step: f64,
    pub refinement_levels: u32,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            rate_step: 1e-3,
            simplex_step: 0.05,
            refinement_levels: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Largest gap between the two flat bounds reported as matched.
    pub matching: f64,
    /// Largest nested/flat disagreement reported as agreeing.
    pub agreement: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            matching: jscsi::joint::MATCHING_TOL,
            agreement: 1e-2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Optimized,
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Simulation {
    pub rule: Rule,
    pub max_blocklength: usize,
}

impl Default for Simulation {
    fn default() -> Self {
        Self {
            rule: Rule::Optimized,
            max_blocklength: jscsi::sim::MAX_BLOCKLENGTH,
        }
    }
}

impl Scenario {
    /// The correlated binary source over a BSC with crossover 0.025.
    pub fn reference() -> Self {
        Self {
            seed: 0,
            source: SourceSpec {
                preset: Some(CORRELATED_BINARY.into()),
                matrix: None,
            },
            channel: ChannelSpec {
                kind: ChannelKind::Bsc,
                param: Some(0.025),
                size: None,
                matrix: None,
            },
            grids: Grids::default(),
            tolerances: Tolerances::default(),
            simulation: Simulation::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let scenario: Scenario =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario fields are representable in TOML")
    }

    pub fn source_distribution(&self) -> Result<JointDistribution, CliError> {
        let matrix = match (&self.source.preset, &self.source.matrix) {
            (Some(name), None) if name == CORRELATED_BINARY => correlated_binary(),
            (Some(name), None) => {
                return Err(CliError::Config(format!("unknown source preset `{name}`")))
            }
            (None, Some(m)) => m.clone(),
            _ => {
                return Err(CliError::Config(
                    "source needs exactly one of `preset` and `matrix`".into(),
                ))
            }
        };
        JointDistribution::new(matrix).map_err(|e| CliError::Config(format!("source: {e}")))
    }

    pub fn channel_distribution(&self) -> Result<ConditionalDistribution, CliError> {
        let c = &self.channel;
        let bad = |msg: &str| CliError::Config(format!("channel: {msg}"));
        let only = |param: bool, size: bool, matrix: bool| {
            c.param.is_some() == param && c.size.is_some() == size && c.matrix.is_some() == matrix
        };
        let w = match c.kind {
            ChannelKind::Bsc | ChannelKind::Bec => {
                if !only(true, false, false) {
                    return Err(bad("bsc and bec take only `param`"));
                }
                let eps = c.param.unwrap();
                if c.kind == ChannelKind::Bsc {
                    if !(0.0..=0.5).contains(&eps) {
                        return Err(bad(&format!(
                            "bsc crossover must lie in [0, 0.5], got {eps}"
                        )));
                    }
                    ConditionalDistribution::bsc(eps)
                } else {
                    if !(0.0..=1.0).contains(&eps) {
                        return Err(bad(&format!(
                            "bec erasure probability must lie in [0, 1], got {eps}"
                        )));
                    }
                    ConditionalDistribution::bec(eps)
                }
            }
            ChannelKind::Identity => {
                if !(c.param.is_none() && c.matrix.is_none()) {
                    return Err(bad("identity takes only `size`"));
                }
                let size = c.size.unwrap_or(2);
                if size == 0 {
                    return Err(bad("identity size must be positive"));
                }
                Ok(ConditionalDistribution::identity(size))
            }
            ChannelKind::Matrix => {
                if !only(false, false, true) {
                    return Err(bad("matrix takes only `matrix`"));
                }
                ConditionalDistribution::new(c.matrix.clone().unwrap())
            }
        };
        w.map_err(|e| bad(&e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.source_distribution()?;
        self.channel_distribution()?;
        let g = &self.grids;
        if !(g.rate_step > 0.0 && g.rate_step <= 0.5) {
            return Err(CliError::Config(format!(
                "grids.rate_step must lie in (0, 0.5], got {}",
                g.rate_step
            )));
        }
        if !(g.simplex_step > 0.0 && g.simplex_step <= 0.5) {
            return Err(CliError::Config(format!(
                "grids.simplex_step must lie in (0, 0.5], got {}",
                g.simplex_step
            )));
        }
        let t = &self.tolerances;
        if !(t.matching > 0.0 && t.agreement > 0.0) {
            return Err(CliError::Config("tolerances must be positive".into()));
        }
        Ok(())
    }

    pub fn grid_options(&self) -> jscsi::joint::GridOptions {
        jscsi::joint::GridOptions {
            rate_step: self.grids.rate_step,
            simplex_step: self.grids.simplex_step,
            refinement_levels: self.grids.refinement_levels,
        }
    }
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Scenario::from_toml(&text)
}
