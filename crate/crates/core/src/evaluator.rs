//! Rolls access counts up into energy, latency, throughput and area.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::reuse::{analyze, AccessCounts};
use crate::spec::{ActionKind, Architecture, ComponentClass, ComponentSpec, Layer, Library, Mapping, Tensor};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("component `{0}` is not in the library")]
    UnknownComponent(String),
    #[error("reference breakdown sums to zero")]
    ZeroReference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Latency {
    pub compute_cycles: u64,
    /// Action-limited cycles per level (zero for non-storage levels).
    pub transfer_cycles: Vec<f64>,
    pub cycles: f64,
    pub utilization: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    /// Energy per library component, pJ.
    pub energy: BTreeMap<String, f64>,
    /// Energy per hierarchy element (level, converter site, static element), pJ.
    pub element_energy: BTreeMap<String, f64>,
    pub total_energy: f64,
    /// Total minus the outermost level.
    pub accelerator_energy: f64,
    pub cycles: f64,
    pub seconds: f64,
    pub macs_per_second: f64,
    pub inferences_per_second: f64,
    pub utilization: f64,
    pub area_um2: f64,
    pub latency: Latency,
    pub counts: AccessCounts,
    pub mapping_digest: String,
}

fn component<'a>(lib: &'a Library, name: &str) -> Result<&'a ComponentSpec, EvalError> {
    lib.get(name).ok_or_else(|| EvalError::UnknownComponent(name.to_string()))
}

/// Dynamic energy of one storage level.
fn storage_energy(c: &ComponentSpec, counts: &AccessCounts, w: &Layer, l: usize) -> f64 {
    let mut e = 0.0;
    for t in Tensor::ALL {
        let tc = counts.level(l, t);
        let scale = w.bits_of(t) as f64 / c.width_bits as f64;
        e += (tc.reads + tc.drains) as f64 * scale * c.energy(ActionKind::Read);
        e += tc.fills as f64 * scale * c.energy(ActionKind::Write);
        e += tc.updates as f64 * scale * c.energy(ActionKind::Update);
    }
    e
}

/// Dynamic energy per element, outermost level first, then converters.
/// Stops early (returning `None`) once the running sum exceeds `limit`.
fn dynamic_energy(
    a: &Architecture,
    lib: &Library,
    w: &Layer,
    counts: &AccessCounts,
    from: usize,
    limit: f64,
) -> Result<Option<Vec<(String, String, f64)>>, EvalError> {
    let mut out = Vec::with_capacity(a.num_levels() + a.converters.len());
    let mut sum = 0.0;
    for (l, lv) in a.levels.iter().enumerate().skip(from) {
        let c = component(lib, &lv.component)?;
        let e = match c.class {
            ComponentClass::Storage => storage_energy(c, counts, w, l),
            ComponentClass::Compute => {
                counts.real_macs as f64 * c.energy(ActionKind::Compute)
                    + (counts.macs - counts.real_macs) as f64 * c.energy(ActionKind::Idle)
            }
            _ => 0.0,
        };
        sum += e;
        out.push((lv.name.clone(), lv.component.clone(), e));
        if sum > limit {
            return Ok(None);
        }
    }
    for site in &a.converters {
        let c = component(lib, &site.component)?;
        let n: u64 = site.tensors.iter().map(|t| counts.conversions(site.edge, t)).sum();
        let e = n as f64 * c.energy(ActionKind::Convert);
        sum += e;
        out.push((site.name.clone(), site.component.clone(), e));
        if sum > limit {
            return Ok(None);
        }
    }
    Ok(Some(out))
}

/// Static power of every element in mW, as (element, component, mW).
fn static_power(a: &Architecture, lib: &Library) -> Result<Vec<(String, String, f64)>, EvalError> {
    let mut out = Vec::new();
    for (l, lv) in a.levels.iter().enumerate() {
        let c = component(lib, &lv.component)?;
        out.push((lv.name.clone(), lv.component.clone(), c.static_power_mw * a.instances(l) as f64));
    }
    for site in &a.converters {
        let c = component(lib, &site.component)?;
        out.push((site.name.clone(), site.component.clone(), c.static_power_mw * a.converter_instances(site) as f64));
    }
    for s in &a.statics {
        let c = component(lib, &s.component)?;
        out.push((s.name.clone(), s.component.clone(), c.static_power_mw * s.instances as f64));
    }
    Ok(out)
}

/// Per-component energy: dynamic counts times per-action energy, plus
/// static power over `latency_s`.
pub fn energy(
    counts: &AccessCounts,
    a: &Architecture,
    w: &Layer,
    lib: &Library,
    latency_s: f64,
) -> Result<BTreeMap<String, f64>, EvalError> {
    let (by_component, _) = energy_maps(counts, a, w, lib, latency_s)?;
    Ok(by_component)
}

type EnergyMaps = (BTreeMap<String, f64>, BTreeMap<String, f64>);

fn energy_maps(
    counts: &AccessCounts,
    a: &Architecture,
    w: &Layer,
    lib: &Library,
    latency_s: f64,
) -> Result<EnergyMaps, EvalError> {
    let dynamic = dynamic_energy(a, lib, w, counts, 0, f64::INFINITY)?.expect("no limit");
    let mut by_component = BTreeMap::new();
    let mut by_element = BTreeMap::new();
    for (el, comp, e) in dynamic {
        *by_component.entry(comp).or_insert(0.0) += e;
        *by_element.entry(el).or_insert(0.0) += e;
    }
    for (el, comp, mw) in static_power(a, lib)? {
        // mW * s = 1e-3 J = 1e9 pJ.
        let e = mw * latency_s * 1e9;
        *by_component.entry(comp).or_insert(0.0) += e;
        *by_element.entry(el).or_insert(0.0) += e;
    }
    Ok((by_component, by_element))
}

/// Cycle count as the maximum of compute iterations and per-level
/// bandwidth limits.
pub fn latency_and_utilization(
    counts: &AccessCounts,
    a: &Architecture,
    m: &Mapping,
    w: &Layer,
    lib: &Library,
) -> Result<Latency, EvalError> {
    let compute_cycles = counts.temporal_steps;
    let mut transfer_cycles = vec![0.0; a.num_levels()];
    for (l, lv) in a.levels.iter().enumerate() {
        if !lv.is_storage() {
            continue;
        }
        let c = component(lib, &lv.component)?;
        let actions: f64 = Tensor::ALL
            .iter()
            .map(|&t| counts.level(l, t).total() as f64 * w.bits_of(t) as f64 / c.width_bits as f64)
            .sum();
        transfer_cycles[l] = actions / (c.bandwidth * m.used_instances(l) as f64);
    }
    let cycles = transfer_cycles.iter().copied().fold(compute_cycles as f64, f64::max);
    let utilization = counts.real_macs as f64 / (a.peak_macs_per_cycle() as f64 * compute_cycles as f64);
    Ok(Latency { compute_cycles, transfer_cycles, cycles, utilization })
}

pub fn area(a: &Architecture, lib: &Library) -> Result<f64, EvalError> {
    let mut total = 0.0;
    for (l, lv) in a.levels.iter().enumerate() {
        total += a.instances(l) as f64 * component(lib, &lv.component)?.area_um2;
    }
    for site in &a.converters {
        total += a.converter_instances(site) as f64 * component(lib, &site.component)?.area_um2;
    }
    for s in &a.statics {
        total += s.instances as f64 * component(lib, &s.component)?.area_um2;
    }
    Ok(total)
}

/// Evaluate a valid mapping end to end.
pub fn evaluate(a: &Architecture, lib: &Library, w: &Layer, m: &Mapping) -> Result<EvaluationResult, EvalError> {
    let counts = analyze(a, w, m);
    evaluate_counts(a, lib, w, m, counts)
}

pub fn evaluate_counts(
    a: &Architecture,
    lib: &Library,
    w: &Layer,
    m: &Mapping,
    counts: AccessCounts,
) -> Result<EvaluationResult, EvalError> {
    let latency = latency_and_utilization(&counts, a, m, w, lib)?;
    let seconds = latency.cycles / a.clock_hz;
    let (energy, element_energy) = energy_maps(&counts, a, w, lib, seconds)?;
    let total_energy: f64 = energy.values().sum();
    let accelerator_energy = total_energy - element_energy.get(&a.levels[0].name).copied().unwrap_or(0.0);
    Ok(EvaluationResult {
        energy,
        element_energy,
        total_energy,
        accelerator_energy,
        cycles: latency.cycles,
        seconds,
        macs_per_second: counts.real_macs as f64 / seconds,
        inferences_per_second: 1.0 / seconds,
        utilization: latency.utilization,
        area_um2: area(a, lib)?,
        latency,
        counts,
        mapping_digest: m.digest(),
    })
}

/// Dynamic energy of levels `from..` and all converters if it stays within
/// `limit`, adding levels outermost first. Every partial sum is a lower
/// bound on the total, so evaluation stops as soon as one exceeds `limit`.
pub fn dynamic_energy_within(
    a: &Architecture,
    lib: &Library,
    w: &Layer,
    counts: &AccessCounts,
    from: usize,
    limit: f64,
) -> Result<Option<f64>, EvalError> {
    Ok(dynamic_energy(a, lib, w, counts, from, limit)?.map(|v| v.iter().map(|x| x.2).sum()))
}

pub fn ideal_macs_per_second(a: &Architecture) -> f64 {
    a.peak_macs_per_cycle() as f64 * a.clock_hz
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakdownError {
    /// Absolute difference of energy fractions, percentage points.
    pub per_component_pct: BTreeMap<String, f64>,
    pub overall_pct: f64,
}

/// Compare a modeled energy map to a reference one. Keys missing on either
/// side count as zero.
pub fn breakdown_error(
    modeled: &BTreeMap<String, f64>,
    reference: &BTreeMap<String, f64>,
) -> Result<BreakdownError, EvalError> {
    let rs: f64 = reference.values().sum();
    if rs == 0.0 {
        return Err(EvalError::ZeroReference);
    }
    let ms: f64 = modeled.values().sum();
    let mut per_component_pct = BTreeMap::new();
    for k in modeled.keys().chain(reference.keys()) {
        if per_component_pct.contains_key(k) {
            continue;
        }
        let m = modeled.get(k).copied();
        let r = reference.get(k).copied();
        if m.is_none() || r.is_none() {
            log::warn!("component `{k}` missing from one side of the breakdown; treating as zero");
        }
        let mf = if ms > 0.0 { m.unwrap_or(0.0) / ms } else { 0.0 };
        let rf = r.unwrap_or(0.0) / rs;
        per_component_pct.insert(k.clone(), (mf - rf).abs() * 100.0);
    }
    Ok(BreakdownError { per_component_pct, overall_pct: (ms - rs).abs() / rs * 100.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn breakdown_identity_and_scale() {
        let r = map(&[("a", 1.0), ("b", 3.0)]);
        let same = breakdown_error(&r, &r).unwrap();
        assert_eq!(same.overall_pct, 0.0);
        assert!(same.per_component_pct.values().all(|v| *v == 0.0));
        let double = map(&[("a", 2.0), ("b", 6.0)]);
        let e = breakdown_error(&double, &r).unwrap();
        assert!((e.overall_pct - 100.0).abs() < 1e-12);
        assert!(e.per_component_pct.values().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn breakdown_missing_keys_and_zero_reference() {
        let r = map(&[("a", 1.0)]);
        let m = map(&[("a", 1.0), ("b", 1.0)]);
        let e = breakdown_error(&m, &r).unwrap();
        assert!((e.per_component_pct["b"] - 50.0).abs() < 1e-12);
        assert_eq!(breakdown_error(&m, &map(&[("a", 0.0)])), Err(EvalError::ZeroReference));
    }
}
