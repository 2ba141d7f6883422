//! Experiment configuration: one JSON document that fully determines a run.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use ergodic_counts::error::{Error, Result};
use ergodic_counts::lindblad::{stationary_state, DensityMatrix};
use ergodic_counts::model_io::{self, ModelDocument};
use ergodic_counts::observables::ResponseFunction;
use ergodic_counts::unraveling::{unravel, QuadratureControls, Unraveling};

/// Detector response parameters as written in the config file.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResponseConfig {
    Exponential { amplitude: f64, decay_time: f64 },
    Rectangular { amplitude: f64, width: f64 },
}

impl ResponseConfig {
    pub fn build(&self) -> Result<ResponseFunction> {
        match *self {
            Self::Exponential {
                amplitude,
                decay_time,
            } => ResponseFunction::exponential(amplitude, decay_time),
            Self::Rectangular { amplitude, width } => {
                ResponseFunction::rectangular(amplitude, width)
            }
        }
    }
}

fn default_horizon() -> f64 {
    100.0
}
fn default_tau() -> f64 {
    10_000.0
}
fn default_burn_in() -> f64 {
    8.0
}
fn default_dt() -> f64 {
    0.01
}
fn default_n_traj() -> usize {
    20_000
}
fn default_n_max() -> usize {
    8
}
fn default_quad_nodes() -> usize {
    16
}
fn default_seed() -> u64 {
    42
}
fn default_times() -> Vec<f64> {
    vec![0.0, 5.0]
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_block_length() -> f64 {
    50.0
}
fn default_lag_step() -> f64 {
    1.5
}
fn default_lag_count() -> usize {
    21
}
fn default_initial_state() -> String {
    "stationary".into()
}
fn default_response() -> ResponseConfig {
    ResponseConfig::Exponential {
        amplitude: 1.0,
        decay_time: 0.5,
    }
}

/// The experiment configuration as serialized in the config file. Field
/// defaults make short configs workable; the effective (fully resolved)
/// config is echoed into every result file.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Value,
    #[serde(default = "default_response")]
    pub response: ResponseConfig,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Defaults to `0.01 · min(response time, 1)` when absent.
    #[serde(default)]
    pub dt_int: Option<f64>,
    #[serde(default = "default_n_traj")]
    pub n_traj: usize,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_quad_nodes")]
    pub quad_nodes: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Block length (time units) for bootstrap errors of time averages.
    #[serde(default = "default_block_length")]
    pub block_length: f64,
    #[serde(default = "default_lag_step")]
    pub lag_step: f64,
    #[serde(default = "default_lag_count")]
    pub lag_count: usize,
    /// `stationary`, `maximally_mixed`, or `basis:<k>`.
    #[serde(default = "default_initial_state")]
    pub initial_state: String,
    /// Named tolerance overrides; sorted serialization keeps echoes stable.
    #[serde(default)]
    pub tolerances: std::collections::BTreeMap<String, f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("config JSON: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("horizon", self.horizon),
            ("tau", self.tau),
            ("dt", self.dt),
            ("epsilon", self.epsilon),
            ("block_length", self.block_length),
            ("lag_step", self.lag_step),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.burn_in < 0.0 {
            return Err(Error::Config("burn_in must be nonnegative".into()));
        }
        if let Some(dt_int) = self.dt_int {
            if !(dt_int > 0.0) {
                return Err(Error::Config("dt_int must be positive".into()));
            }
        }
        if self.dt >= self.horizon {
            return Err(Error::Config("dt must be smaller than the horizon".into()));
        }
        if self.n_traj < 2 {
            return Err(Error::Config("n_traj must be at least 2".into()));
        }
        if self.quad_nodes == 0 {
            return Err(Error::Config("quad_nodes must be at least 1".into()));
        }
        if self.lag_count < 2 {
            return Err(Error::Config("lag_count must be at least 2".into()));
        }
        if self.times.is_empty() {
            return Err(Error::Config("at least one probe time is required".into()));
        }
        let mut prev = 0.0f64;
        for &t in &self.times {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::Config(format!("probe time {t} must be nonnegative")));
            }
            if t < prev {
                return Err(Error::Config("probe times must be nondecreasing".into()));
            }
            prev = t;
        }
        Ok(())
    }

    /// The integration step, defaulting to a hundredth of the shortest
    /// response/relaxation scale.
    pub fn dt_int(&self) -> f64 {
        self.dt_int.unwrap_or_else(|| {
            let response_time = match self.response {
                ResponseConfig::Exponential { decay_time, .. } => decay_time,
                ResponseConfig::Rectangular { width, .. } => width,
            };
            0.01 * response_time.min(1.0)
        })
    }

    pub fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }

    pub fn quad_controls(&self) -> QuadratureControls {
        QuadratureControls {
            nodes_per_box: self.quad_nodes,
            n_max: self.n_max,
            ..QuadratureControls::default()
        }
    }

    /// Effective JSON echoed into result headers; reparses to this config.
    pub fn echo(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// A config resolved against its model document.
pub struct ResolvedExperiment {
    pub config: ExperimentConfig,
    pub document: ModelDocument,
}

impl ResolvedExperiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        let document = model_io::parse_model_value(&config.model)?;
        Ok(Self { config, document })
    }

    pub fn unraveling(&self) -> Result<Unraveling> {
        Ok(unravel(self.document.require_lindblad()?))
    }

    /// Resolve the configured initial state against a continuous-time model.
    pub fn initial_state(&self, u: &Unraveling) -> Result<DensityMatrix> {
        resolve_state(&self.config.initial_state, u.dim(), || {
            stationary_state(u.full(), 1e-8)
        })
    }
}

/// Parse `stationary` / `maximally_mixed` / `basis:<k>` state names.
pub fn resolve_state(
    name: &str,
    dim: usize,
    stationary: impl FnOnce() -> Result<DensityMatrix>,
) -> Result<DensityMatrix> {
    match name {
        "stationary" => stationary(),
        "maximally_mixed" => Ok(DensityMatrix::maximally_mixed(dim)),
        other => {
            if let Some(k) = other.strip_prefix("basis:") {
                let k: usize = k
                    .parse()
                    .map_err(|_| Error::Config(format!("bad basis index in state {other:?}")))?;
                if k >= dim {
                    return Err(Error::Config(format!(
                        "basis state {k} out of range for dimension {dim}"
                    )));
                }
                Ok(DensityMatrix::basis_state(dim, k))
            } else {
                Err(Error::Config(format!(
                    "unknown initial state {other:?} (use stationary, maximally_mixed, basis:<k>)"
                )))
            }
        }
    }
}
