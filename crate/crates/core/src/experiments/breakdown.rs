use std::collections::BTreeMap;

use serde_json::json;

use crate::evaluator::{breakdown_error, evaluate};
use crate::library::{calibrate, Calibration, ReferenceBreakdown};
use crate::mapper::{Objective, SearchConfig, Strategy};
use crate::spec::{Architecture, Layer, Library, Mapping, PadMode};

use super::{bundled, fmt, load_arch, load_workloads, map_layers, sum_energy, ExperimentConfig, ExperimentError, Report, Table};

fn fractions(e: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let total: f64 = e.values().sum();
    e.iter().map(|(k, v)| (k.clone(), if total > 0.0 { v / total } else { 0.0 })).collect()
}

fn load_reference(cfg: &ExperimentConfig) -> Result<ReferenceBreakdown, ExperimentError> {
    match &cfg.reference {
        None => Ok(bundled::reference_breakdown()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| ExperimentError::Io { path: p.clone(), source })?;
            serde_json::from_str(&text).map_err(|e| ExperimentError::BadConfig(format!("{}: {e}", p.display())))
        }
    }
}

fn search_config(cfg: &ExperimentConfig) -> SearchConfig {
    SearchConfig {
        objective: Objective::Energy,
        budget: cfg.budget,
        seed: cfg.seed,
        strategy: Strategy::PrunedRandom,
        pad_mode: PadMode::Strict,
        no_dram: false,
        ..Default::default()
    }
}

/// Accelerator-scope energies: the outermost level and zero entries dropped.
fn accel(a: &Architecture, m: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let mut m = m.clone();
    m.remove(&a.levels[0].component);
    m.retain(|_, v| *v != 0.0);
    m
}

/// Calibration rounds before giving up on a fixed point.
pub const MAX_CALIBRATION_ROUNDS: usize = 8;

struct FixedPoint {
    calibration: Calibration,
    /// Mappings the calibration was fitted on.
    mappings: Vec<Mapping>,
    /// Accelerator-scope energies of `mappings` under the base library.
    modeled: BTreeMap<String, f64>,
    initial: BTreeMap<String, f64>,
    rounds: usize,
    converged: bool,
}

fn modeled_energy(
    a: &Architecture,
    lib: &Library,
    layers: &[Layer],
    maps: &[Mapping],
) -> Result<BTreeMap<String, f64>, ExperimentError> {
    let mut e = Vec::new();
    for (l, m) in layers.iter().zip(maps) {
        e.push(evaluate(a, lib, l, m)?.energy);
    }
    Ok(accel(a, &sum_energy(&e)))
}

fn best_mappings(
    a: &Architecture,
    lib: &Library,
    layers: &[Layer],
    scfg: &SearchConfig,
) -> Result<Vec<Mapping>, ExperimentError> {
    Ok(map_layers(a, lib, layers, scfg)?.into_iter().map(|r| r.best).collect())
}

/// Calibrate, remap under the calibrated library, and recalibrate on the
/// new mappings until the mapper's choice no longer changes.
fn calibrate_to_fixed_point(
    a: &Architecture,
    lib: &Library,
    layers: &[Layer],
    reference: &ReferenceBreakdown,
    scfg: &SearchConfig,
) -> Result<FixedPoint, ExperimentError> {
    let mut mappings = best_mappings(a, lib, layers, scfg)?;
    let initial = modeled_energy(a, lib, layers, &mappings)?;
    let mut modeled = initial.clone();
    let mut rounds = 0;
    loop {
        rounds += 1;
        let calibration = calibrate(reference, lib, &modeled)?;
        let next = best_mappings(a, &calibration.library, layers, scfg)?;
        let converged = next == mappings;
        if converged || rounds == MAX_CALIBRATION_ROUNDS {
            return Ok(FixedPoint { calibration, mappings, modeled, initial, rounds, converged });
        }
        mappings = next;
        modeled = modeled_energy(a, lib, layers, &mappings)?;
    }
}

/// Calibrate the configured library against the configured reference on
/// the first workload, iterating to a mapping fixed point.
pub fn calibrated_library(cfg: &ExperimentConfig) -> Result<Calibration, ExperimentError> {
    let (a, lib) = load_arch(cfg, cfg.profile())?;
    let wl = load_workloads(cfg, &["vgg16"])?.remove(0);
    let fp = calibrate_to_fixed_point(&a, &lib, &wl.layers, &load_reference(cfg)?, &search_config(cfg))?;
    Ok(fp.calibration)
}

pub fn run_breakdown(cfg: &ExperimentConfig) -> Result<Report, ExperimentError> {
    let profile = cfg.profile();
    let (a, lib) = load_arch(cfg, profile)?;
    let wl = load_workloads(cfg, &["vgg16"])?.remove(0);
    let reference = load_reference(cfg)?;
    let scfg = search_config(cfg);

    let fp = calibrate_to_fixed_point(&a, &lib, &wl.layers, &reference, &scfg)?;
    let cal = &fp.calibration;
    let ref_energy = reference.energies(fp.modeled.values().sum());

    // Fitted mappings under the calibrated library.
    let fixed_energy = modeled_energy(&a, &cal.library, &wl.layers, &fp.mappings)?;
    let fixed_error = breakdown_error(&fixed_energy, &ref_energy)?;

    // What the mapper picks under the calibrated library.
    let remapped = map_layers(&a, &cal.library, &wl.layers, &scfg)?;
    let remapped_energy = accel(&a, &sum_energy(remapped.iter().map(|r| &r.result.energy)));
    let error = breakdown_error(&remapped_energy, &ref_energy)?;

    let ref_frac = fractions(&ref_energy);
    let model_frac = fractions(&remapped_energy);
    let mut table = Table::new("breakdown", &["component", "reference_fraction", "modeled_fraction", "abs_error_pct"]);
    for (k, v) in &error.per_component_pct {
        table.push(vec![
            k.clone(),
            fmt(ref_frac.get(k).copied().unwrap_or(0.0)),
            fmt(model_frac.get(k).copied().unwrap_or(0.0)),
            fmt(*v),
        ]);
    }
    let results = json!({
        "workload": wl.name,
        "profile": profile,
        "reference_fractions": ref_frac,
        "uncalibrated_fractions": fractions(&fp.initial),
        "calibration_rounds": fp.rounds,
        "calibration_converged": fp.converged,
        "calibration_factors": cal.factors,
        "modeled_fractions": model_frac,
        "modeled_energy_pj": remapped_energy,
        "error": error,
        "fixed_mapping_error": fixed_error,
        "layers": wl.layers.iter().zip(&remapped).map(|(l, r)| json!({
            "layer": l.name, "mapping_digest": r.result.mapping_digest, "accelerator_energy_pj": r.result.accelerator_energy,
        })).collect::<Vec<_>>(),
    });
    Ok(Report::new(cfg, results, vec![table]))
}
