//! Drivers for the four studies: energy breakdown, throughput, memory
//! (batching and fusion) and the converter-reuse sweep.

pub mod bundled;
mod breakdown;
mod memory;
mod sweep;
mod throughput;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::evaluator::EvalError;
use crate::library::{builtin_library, CalibrationError, ProfileName};
use crate::mapper::{search, SearchConfig, SearchError, SearchResult};
use crate::spec::{load_specs, Architecture, Layer, Library, SpecError, SweepAxis, Workload};

pub use breakdown::{calibrated_library, run_breakdown};
pub use memory::{fuse, lift_batch, run_memory_experiment, FusionInfeasible, FusionPlan};
pub use sweep::{lift_along_axis, run_reuse_sweep};
pub use throughput::run_throughput;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Breakdown,
    Throughput,
    Memory,
    ReuseSweep,
}

impl std::str::FromStr for ExperimentKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "breakdown" => Ok(ExperimentKind::Breakdown),
            "throughput" => Ok(ExperimentKind::Throughput),
            "memory" => Ok(ExperimentKind::Memory),
            "reuse_sweep" => Ok(ExperimentKind::ReuseSweep),
            _ => Err(format!("unknown experiment `{s}`")),
        }
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExperimentKind::Breakdown => "breakdown",
            ExperimentKind::Throughput => "throughput",
            ExperimentKind::Memory => "memory",
            ExperimentKind::ReuseSweep => "reuse_sweep",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Architecture spec; the bundled Albireo spec when absent.
    pub arch: Option<PathBuf>,
    /// Workload specs; the experiment's bundled defaults when empty.
    pub workloads: Vec<PathBuf>,
    /// Profiles to evaluate; the memory study uses every listed profile,
    /// the other studies use the first.
    pub profiles: Vec<ProfileName>,
    pub batch_sizes: Vec<u64>,
    pub fusion: bool,
    pub sweep_axes: Vec<SweepAxis>,
    pub sweep_values: Vec<u64>,
    /// Also sweep all axes together at each value.
    pub sweep_combined: bool,
    pub reference: Option<PathBuf>,
    pub seed: u64,
    pub budget: u64,
    /// Grow the global buffer to fit fused intermediates, scaling its
    /// per-access energy by `(new / old) ^ buffer_energy_exponent`.
    pub auto_size_buffer: bool,
    pub buffer_energy_exponent: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::new(ExperimentKind::Breakdown)
    }
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        let profiles = match experiment {
            ExperimentKind::Memory => vec![ProfileName::Aggressive, ProfileName::Conservative],
            ExperimentKind::ReuseSweep => vec![ProfileName::Aggressive],
            _ => vec![ProfileName::Conservative],
        };
        ExperimentConfig {
            experiment,
            arch: None,
            workloads: Vec::new(),
            profiles,
            batch_sizes: vec![1, 16],
            fusion: true,
            sweep_axes: vec![SweepAxis::AoPerAeWeight, SweepAxis::AoInputFanout, SweepAxis::AeOutputFanout],
            sweep_values: vec![1, 2, 4, 8],
            sweep_combined: true,
            reference: None,
            seed: 7,
            budget: 10_000,
            auto_size_buffer: false,
            buffer_energy_exponent: 0.5,
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::BadConfig(m.to_string()));
        if self.profiles.is_empty() {
            return bad("profiles must be nonempty");
        }
        if self.budget == 0 {
            return bad("budget must be at least 1");
        }
        match self.experiment {
            ExperimentKind::Memory if self.batch_sizes.is_empty() || self.batch_sizes.contains(&0) => {
                bad("batch_sizes must be nonempty positive integers")
            }
            ExperimentKind::ReuseSweep if self.sweep_values.is_empty() || self.sweep_values.contains(&0) => {
                bad("sweep_values must be nonempty positive integers")
            }
            ExperimentKind::ReuseSweep if self.sweep_axes.is_empty() => bad("sweep_axes must be nonempty"),
            _ => Ok(()),
        }
    }

    pub fn profile(&self) -> ProfileName {
        self.profiles[0]
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("layer `{layer}`: {source}")]
    Search { layer: String, source: SearchError },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error("sweep point {axis}={value} has no valid mapping for layer `{layer}`")]
    SweepInfeasible { axis: String, value: u64, layer: String },
    #[error("architecture has no level for sweep axis {0}")]
    MissingAxis(SweepAxis),
    #[error("invalid experiment configuration: {0}")]
    BadConfig(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl ExperimentError {
    /// Infeasibility (no mapping, no sweep point) as opposed to bad input.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            ExperimentError::Search { source: SearchError::NoValidMapping, .. } | ExperimentError::SweepInfeasible { .. }
        )
    }
}

/// A tidy table destined for one CSV file.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Table {
        Table { name: name.to_string(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub config: ExperimentConfig,
    pub results: serde_json::Value,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl Report {
    fn new(cfg: &ExperimentConfig, results: serde_json::Value, tables: Vec<Table>) -> Report {
        Report { schema_version: REPORT_SCHEMA_VERSION, experiment: cfg.experiment, config: cfg.clone(), results, tables }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Write `report.json` and one CSV per table into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| ExperimentError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let mut written = Vec::new();
        let p = dir.join("report.json");
        std::fs::write(&p, self.to_json()).map_err(io(&p))?;
        written.push(p);
        for t in &self.tables {
            let p = dir.join(format!("{}.csv", t.name));
            std::fs::write(&p, t.to_csv()?).map_err(io(&p))?;
            written.push(p);
        }
        Ok(written)
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report, ExperimentError> {
    cfg.validate()?;
    let report = match cfg.experiment {
        ExperimentKind::Breakdown => run_breakdown(cfg)?,
        ExperimentKind::Throughput => run_throughput(cfg)?,
        ExperimentKind::Memory => run_memory_experiment(cfg)?,
        ExperimentKind::ReuseSweep => run_reuse_sweep(cfg)?,
    };
    if let Some(dir) = &cfg.output_dir {
        report.write(dir)?;
    }
    Ok(report)
}

// ---- shared plumbing ----

/// Architecture and library for `profile`, honoring `cfg.arch`.
pub(crate) fn load_arch(cfg: &ExperimentConfig, profile: ProfileName) -> Result<(Architecture, Library), ExperimentError> {
    let lib = builtin_library(profile);
    match &cfg.arch {
        None => Ok((bundled::albireo(&lib)?, lib)),
        Some(p) => {
            let spec = load_specs(std::slice::from_ref(p), &lib)?;
            let a = spec.architecture()?.clone();
            Ok((a, spec.library))
        }
    }
}

/// Workloads named in `cfg`, or `defaults` from the bundled set.
pub(crate) fn load_workloads(cfg: &ExperimentConfig, defaults: &[&str]) -> Result<Vec<Workload>, ExperimentError> {
    if cfg.workloads.is_empty() {
        return defaults.iter().map(|n| bundled::workload(n).map_err(Into::into)).collect();
    }
    let lib = Library::default();
    cfg.workloads
        .iter()
        .map(|p| Ok(load_specs(std::slice::from_ref(p), &lib)?.workload()?.clone()))
        .collect()
}

/// Best mapping per layer.
pub(crate) fn map_layers(
    a: &Architecture,
    lib: &Library,
    layers: &[Layer],
    scfg: &SearchConfig,
) -> Result<Vec<SearchResult>, ExperimentError> {
    layers
        .iter()
        .map(|l| search(a, lib, l, scfg).map_err(|source| ExperimentError::Search { layer: l.name.clone(), source }))
        .collect()
}

/// Sum per-component energy maps.
pub(crate) fn sum_energy<'a>(maps: impl IntoIterator<Item = &'a BTreeMap<String, f64>>) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for m in maps {
        for (k, v) in m {
            *out.entry(k.clone()).or_insert(0.0) += v;
        }
    }
    out
}

/// Energy of converter components in `energy`.
pub(crate) fn converter_energy(a: &Architecture, energy: &BTreeMap<String, f64>) -> f64 {
    let names: std::collections::BTreeSet<&str> = a.converters.iter().map(|c| c.component.as_str()).collect();
    names.iter().map(|n| energy.get(*n).copied().unwrap_or(0.0)).sum()
}

pub(crate) fn fmt(x: f64) -> String {
    format!("{x}")
}
