use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::burn_in_steps;
use crate::lattice::BoxLattice;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Isolation,
    Localization,
    Speed,
    EmptyPivotal,
    StpValidity,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Isolation,
        ExperimentKind::Localization,
        ExperimentKind::Speed,
        ExperimentKind::EmptyPivotal,
        ExperimentKind::StpValidity,
    ];

    /// Name used in configs and on the command line.
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Isolation => "isolation",
            ExperimentKind::Localization => "localization",
            ExperimentKind::Speed => "speed",
            ExperimentKind::EmptyPivotal => "empty-pivotal",
            ExperimentKind::StpValidity => "stp-validity",
        }
    }

    /// Prefix of output file names.
    pub fn file_prefix(self) -> &'static str {
        match self {
            ExperimentKind::Isolation => "isolation",
            ExperimentKind::Localization => "localization",
            ExperimentKind::Speed => "speed",
            ExperimentKind::EmptyPivotal => "empty_pivotal",
            ExperimentKind::StpValidity => "stp_validity",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s || k.file_prefix() == s)
            .ok_or_else(|| {
                let names: Vec<_> = ExperimentKind::ALL.iter().map(|k| k.as_str()).collect();
                format!("unknown experiment `{s}` (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("invalid field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

/// One experiment run. Zero or empty values of `cadence`, `ell_grid`, `lags`
/// and `max_lookback` select defaults that depend on the box; see
/// [`ExperimentConfig::normalized`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub d: usize,
    #[serde(rename = "L")]
    pub side: usize,
    pub p: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    /// Samples (or windows, for `speed`) per replica.
    #[serde(default = "default_samples")]
    pub samples: u64,
    /// Burn-in multiplier `c_b`, at least 1.
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    /// Steps between measurements; 0 means one sweep (`N_E` steps).
    #[serde(default)]
    pub cadence: u64,
    /// Tail thresholds: absolute for `isolation` and `speed`, multiples of
    /// `ln|Λ|` and `ln²|Λ|` for `localization`.
    #[serde(default)]
    pub ell_grid: Vec<f64>,
    /// Lags `s` at which `speed` reports `d_H(P_t, P_{t+s})`.
    #[serde(default)]
    pub lags: Vec<u64>,
    /// Union window `W = window_c · N_E · ln N_E` for `speed`.
    #[serde(default = "default_window_c")]
    pub window_c: f64,
    /// Sampled `(e, t, s)` triples per replica for `stp-validity`.
    #[serde(default = "default_trials")]
    pub trials: u64,
    /// Largest `t − s` for `stp-validity`; 0 means `⌈N_E ln N_E⌉`.
    #[serde(default)]
    pub max_lookback: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_replicas() -> u64 {
    1
}
fn default_samples() -> u64 {
    1000
}
fn default_burn_in() -> f64 {
    2.0
}
fn default_window_c() -> f64 {
    1.0
}
fn default_trials() -> u64 {
    100
}

/// Key of the table a manifest adds next to the configuration.
pub const MANIFEST_TABLE: &str = "manifest";

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, d: usize, side: usize, p: f64) -> Self {
        ExperimentConfig {
            experiment,
            d,
            side,
            p,
            seed: 0,
            replicas: default_replicas(),
            samples: default_samples(),
            burn_in: default_burn_in(),
            cadence: 0,
            ell_grid: Vec::new(),
            lags: Vec::new(),
            window_c: default_window_c(),
            trials: default_trials(),
            max_lookback: 0,
            output: None,
        }
    }

    /// Parses a TOML document; a `[manifest]` table is accepted and ignored
    /// so that manifests can be fed back in.
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let parse_err = |message: String| ConfigError::Parse {
            path: origin.to_string(),
            message: message.trim_end().to_string(),
        };
        let mut table: toml::Table = toml::from_str(text).map_err(|e| parse_err(e.to_string()))?;
        table.remove(MANIFEST_TABLE);
        let cfg: ExperimentConfig = table.try_into().map_err(|e: toml::de::Error| parse_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn lattice(&self) -> Result<BoxLattice, ConfigError> {
        BoxLattice::new(self.d, self.side).map_err(|e| invalid("L", e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(invalid("p", format!("must lie in (0, 1), got {}", self.p)));
        }
        if self.d < 2 {
            return Err(invalid("d", format!("must be at least 2, got {}", self.d)));
        }
        if self.side < 1 {
            return Err(invalid("L", "must be at least 1"));
        }
        self.lattice()?;
        if self.replicas < 1 {
            return Err(invalid("replicas", "must be at least 1"));
        }
        if self.samples < 1 {
            return Err(invalid("samples", "must be at least 1"));
        }
        if !(self.burn_in >= 1.0 && self.burn_in.is_finite()) {
            return Err(invalid("burn_in", format!("must be a finite number at least 1, got {}", self.burn_in)));
        }
        if let Some(x) = self.ell_grid.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(invalid("ell_grid", format!("thresholds must be finite and non-negative, got {x}")));
        }
        if self.lags.contains(&0) {
            return Err(invalid("lags", "lags must be positive"));
        }
        if !(self.window_c > 0.0 && self.window_c.is_finite()) {
            return Err(invalid("window_c", format!("must be positive, got {}", self.window_c)));
        }
        if self.trials < 1 {
            return Err(invalid("trials", "must be at least 1"));
        }
        Ok(())
    }

    /// The configuration with every box-dependent default filled in.
    pub fn normalized(&self) -> Result<Self, ConfigError> {
        self.validate()?;
        let lat = self.lattice()?;
        let n = lat.edge_count();
        let mut out = self.clone();
        if out.cadence == 0 {
            out.cadence = n as u64;
        }
        if out.ell_grid.is_empty() {
            out.ell_grid = match out.experiment {
                ExperimentKind::Localization => vec![0.125, 0.25, 0.5, 1.0, 2.0],
                _ => (0..=self.side.div_ceil(2) + 1).map(|k| k as f64).collect(),
            };
        }
        if out.lags.is_empty() {
            out.lags = std::iter::successors(Some(1u64), |&s| Some(s * 2))
                .take_while(|&s| s < n as u64)
                .chain([n as u64])
                .collect();
        }
        if out.max_lookback == 0 {
            out.max_lookback = burn_in_steps(n, 1.0).max(1);
        }
        Ok(out)
    }

    /// `{exp}_{d}d_L{L}_p{p}_seed{seed}`.
    pub fn file_stem(&self) -> String {
        format!(
            "{}_{}d_L{}_p{}_seed{}",
            self.experiment.file_prefix(),
            self.d,
            self.side,
            self.p,
            self.seed
        )
    }
}
