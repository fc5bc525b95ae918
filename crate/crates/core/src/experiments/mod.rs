//! Statistical experiments on the coupled chain: replica management, record
//! streams, summaries and their on-disk form.
//!
//! Replica `r` of a run drives its chain from `RngStream::for_replica(seed, r)`,
//! so replicas are independent, can run on any number of workers, and are
//! merged in replica order.

pub mod config;
mod runners;
pub mod schema;
pub mod stats;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use thiserror::Error;

pub use config::{ConfigError, ExperimentConfig, ExperimentKind, MANIFEST_TABLE};
pub use runners::localization_envelope;
pub use schema::{all_schemas, columns, header, ExperimentSchema, SCHEMA_VERSION};

use crate::dynamics::{DynamicsError, RNG_ALGORITHM};
use crate::lattice::alpha;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// How replica streams derive from the master seed.
pub const SEED_RULE: &str = "replica r uses ChaCha8Rng::seed_from_u64(seed) with stream r";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

/// One CSV cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i128),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Float(v) => write!(f, "{v}"),
            Cell::Bool(v) => f.write_str(if *v { "1" } else { "0" }),
            Cell::Text(v) => f.write_str(v),
        }
    }
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Float(v) => Some(*v),
            Cell::Bool(v) => Some(f64::from(u8::from(*v))),
            Cell::Text(_) => None,
        }
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(i128::from(v))
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i128)
    }
}
impl From<u128> for Cell {
    fn from(v: u128) -> Self {
        Cell::Int(v as i128)
    }
}
impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

pub type Row = Vec<Cell>;

/// Records and summary of one run, before anything touches the disk.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    /// The normalized configuration that produced the run.
    pub config: ExperimentConfig,
    pub header: Vec<&'static str>,
    pub rows: Vec<Row>,
    pub summary: Map<String, Value>,
}

impl ExperimentOutput {
    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.header.iter().position(|h| *h == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    /// A numeric column; text cells become `NaN`.
    pub fn column_f64(&self, name: &str) -> Option<Vec<f64>> {
        Some(
            self.column(name)?
                .into_iter()
                .map(|c| c.as_f64().unwrap_or(f64::NAN))
                .collect(),
        )
    }

    pub fn csv_bytes(&self) -> Result<Vec<u8>, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::to_string))?;
        }
        w.into_inner().map_err(|e| e.into_error().into())
    }
}

/// Runs the experiment named in `cfg`, filling box-dependent defaults first.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    let cfg = cfg.normalized()?;
    let lattice = cfg.lattice()?;
    let run = runners::run(&cfg, &lattice)?;
    let log_volume = (lattice.vertex_count() as f64).ln();
    let regime = (1.0 - cfg.p) * alpha(cfg.d) as f64;
    let mut summary = Map::new();
    summary.insert("experiment".into(), json!(cfg.experiment.as_str()));
    summary.insert("schema_version".into(), json!(SCHEMA_VERSION));
    summary.insert("code_version".into(), json!(CODE_VERSION));
    summary.insert("config".into(), serde_json::to_value(&cfg).expect("config serializes"));
    summary.insert(
        "lattice".into(),
        json!({
            "d": cfg.d,
            "L": cfg.side,
            "vertex_count": lattice.vertex_count(),
            "edge_count": lattice.edge_count(),
        }),
    );
    summary.insert("log_volume".into(), json!(log_volume));
    summary.insert(
        "burn_in_steps".into(),
        json!(crate::dynamics::burn_in_steps(lattice.edge_count(), cfg.burn_in)),
    );
    summary.insert("records".into(), json!(run.rows.len()));
    summary.insert(
        "regime".into(),
        json!({"parameter": regime, "out_of_regime": regime >= 1.0}),
    );
    summary.insert(
        "stationarity".into(),
        stationarity_summary(&run.pivotal_counts),
    );
    summary.insert(
        "rng".into(),
        json!({"algorithm": RNG_ALGORITHM, "seed": cfg.seed, "seed_rule": SEED_RULE}),
    );
    summary.insert("csv".into(), json!(format!("{}.csv", cfg.file_stem())));
    summary.extend(run.summary);
    Ok(ExperimentOutput {
        header: header(cfg.experiment),
        config: cfg,
        rows: run.rows,
        summary,
    })
}

/// Per-replica half comparison; any replica with `|z| > 3` flags the run.
fn stationarity_summary(streams: &[Vec<f64>]) -> Value {
    let per: Vec<stats::Stationarity> = streams.iter().map(|s| stats::stationarity(s)).collect();
    let max_abs_z = per.iter().map(|s| s.z.abs()).filter(|z| !z.is_nan()).fold(f64::NAN, f64::max);
    json!({
        "replicas": per,
        "max_abs_z": max_abs_z,
        "flagged": per.iter().any(|s| s.flagged),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputPaths {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub manifest: PathBuf,
}

/// File names written into `dir` for `cfg`.
pub fn output_paths(cfg: &ExperimentConfig, dir: &Path) -> OutputPaths {
    let stem = cfg.file_stem();
    OutputPaths {
        csv: dir.join(format!("{stem}.csv")),
        summary: dir.join(format!("{stem}.json")),
        manifest: dir.join(format!("{stem}.manifest.toml")),
    }
}

/// The configuration followed by a `[manifest]` table; loading it as a
/// config reproduces the run.
pub fn manifest_toml(cfg: &ExperimentConfig, paths: &OutputPaths) -> String {
    let file_name = |p: &Path| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut table = toml::Table::new();
    table.insert("code_version".into(), CODE_VERSION.into());
    table.insert("schema_version".into(), i64::from(SCHEMA_VERSION).into());
    table.insert("rng_algorithm".into(), RNG_ALGORITHM.into());
    table.insert("seed_rule".into(), SEED_RULE.into());
    table.insert("csv".into(), file_name(&paths.csv).into());
    table.insert("summary".into(), file_name(&paths.summary).into());
    let mut doc = toml::Table::new();
    doc.insert(MANIFEST_TABLE.into(), table.into());
    format!("{}\n{}", cfg.to_toml_string(), toml::to_string(&doc).expect("manifest serializes"))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ExperimentError> {
    let io = |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    Ok(())
}

/// Writes the CSV, the JSON summary and the manifest into `dir`, creating it
/// if needed.
pub fn write_outputs(out: &ExperimentOutput, dir: &Path) -> Result<OutputPaths, ExperimentError> {
    std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let paths = output_paths(&out.config, dir);
    let csv = out.csv_bytes().map_err(|source| ExperimentError::Csv {
        path: paths.csv.clone(),
        source,
    })?;
    write_file(&paths.csv, &csv)?;
    let mut json = serde_json::to_string_pretty(&out.summary).expect("summary serializes");
    json.push('\n');
    write_file(&paths.summary, json.as_bytes())?;
    write_file(&paths.manifest, manifest_toml(&out.config, &paths).as_bytes())?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(kind, 2, 4, 0.9);
        cfg.samples = 20;
        cfg.replicas = 2;
        cfg.trials = 10;
        cfg.seed = 11;
        cfg
    }

    #[test]
    fn every_kind_runs_and_matches_its_schema() {
        for kind in ExperimentKind::ALL {
            let out = run_experiment(&small(kind)).unwrap();
            assert_eq!(out.header, header(kind));
            assert!(!out.rows.is_empty(), "{kind}");
            for row in &out.rows {
                assert_eq!(row.len(), out.header.len(), "{kind}");
            }
            for key in schema::summary_keys(kind) {
                assert!(out.summary.contains_key(key.key), "{kind}: missing {}", key.key);
            }
        }
    }

    #[test]
    fn reruns_are_identical_and_manifest_reloads() {
        let cfg = small(ExperimentKind::Isolation);
        let a = run_experiment(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = write_outputs(&a, dir.path()).unwrap();
        let again = ExperimentConfig::load(&paths.manifest).unwrap();
        let b = run_experiment(&again).unwrap();
        assert_eq!(std::fs::read(&paths.csv).unwrap(), b.csv_bytes().unwrap());
    }

    #[test]
    fn cells_render() {
        assert_eq!(Cell::Float(f64::INFINITY).to_string(), "inf");
        assert_eq!(Cell::Float(f64::NAN).to_string(), "NaN");
        assert_eq!(Cell::Float(2.5).to_string(), "2.5");
        assert_eq!(Cell::Bool(true).to_string(), "1");
    }
}
