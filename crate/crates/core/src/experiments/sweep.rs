use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::json;

use crate::mapper::{Objective, SearchConfig, Strategy};
use crate::reuse::analyze;
use crate::spec::{Architecture, Layer, Mapping, PadMode, SweepAxis};

use super::{
    converter_energy, fmt, load_arch, load_workloads, map_layers, sum_energy, ExperimentConfig, ExperimentError, Report,
    Table,
};

/// Move a factor of `ratio` from a temporal loop at a storage level above
/// the axis level into the axis level's spatial split, trying the innermost
/// such level first. Returns `m` unchanged when no move keeps the mapping
/// valid.
pub fn lift_along_axis(a: &Architecture, w: &Layer, m: &Mapping, axis: SweepAxis, ratio: u64) -> Mapping {
    let Some(j) = a.axis_level(axis) else { return m.clone() };
    if ratio <= 1 {
        return m.clone();
    }
    let dims = a.levels[j].spatial_dims.clone().unwrap_or_else(|| crate::spec::Dim::ALL.to_vec());
    for h in (0..j).rev().filter(|&l| a.levels[l].is_storage()) {
        for &d in &dims {
            if m.levels[h].temporal[d].is_multiple_of(ratio) {
                let mut out = m.clone();
                out.levels[h].temporal[d] /= ratio;
                out.levels[j].spatial[d] *= ratio;
                let out = out.canonical();
                if out.validate(w, a, PadMode::Pad).is_ok() {
                    return out;
                }
            }
        }
    }
    m.clone()
}

/// Point in the sweep: scale factor per axis.
type Point = BTreeMap<SweepAxis, u64>;

fn point_name(p: &Point) -> String {
    if p.values().all(|v| *v == 1) {
        return "baseline".into();
    }
    p.iter().filter(|(_, v)| **v != 1).map(|(a, v)| format!("{a}={v}")).collect::<Vec<_>>().join(",")
}

fn scaled_arch(a: &Architecture, p: &Point) -> Result<Architecture, ExperimentError> {
    let mut out = a.clone();
    for (axis, v) in p {
        out = out.with_axis_scaled(*axis, *v).ok_or(ExperimentError::MissingAxis(*axis))?;
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
struct PointResult {
    point: String,
    factors: Point,
    converter_energy_pj: f64,
    accelerator_energy_pj: f64,
    converter_reduction: f64,
    accelerator_reduction: f64,
    energy: BTreeMap<String, f64>,
    layer_mapping_digests: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
struct Monotonicity {
    axis: SweepAxis,
    /// Targeted conversions summed over layers and edges, per sweep value,
    /// under the baseline mappings lifted onto each point.
    conversions: Vec<(u64, u64)>,
    non_increasing: bool,
}

pub fn run_reuse_sweep(cfg: &ExperimentConfig) -> Result<Report, ExperimentError> {
    let profile = cfg.profile();
    let (a, lib) = load_arch(cfg, profile)?;
    let wl = load_workloads(cfg, &["vgg16"])?.remove(0);
    for axis in &cfg.sweep_axes {
        a.axis_level(*axis).ok_or(ExperimentError::MissingAxis(*axis))?;
    }
    let scfg = SearchConfig {
        objective: Objective::Energy,
        budget: cfg.budget,
        seed: cfg.seed,
        strategy: Strategy::PrunedRandom,
        pad_mode: PadMode::Strict,
        no_dram: false,
        ..Default::default()
    };
    let mut values = cfg.sweep_values.clone();
    values.sort_unstable();
    values.dedup();

    let base_point: Point = cfg.sweep_axes.iter().map(|x| (*x, 1)).collect();
    let mut points: Vec<Point> = vec![base_point.clone()];
    for axis in &cfg.sweep_axes {
        for &v in &values {
            let mut p = base_point.clone();
            p.insert(*axis, v);
            points.push(p);
        }
    }
    if cfg.sweep_combined {
        for &v in &values {
            points.push(cfg.sweep_axes.iter().map(|x| (*x, v)).collect());
        }
    }
    points.sort();
    points.dedup();

    let mut results = Vec::new();
    let mut base_maps: Vec<Mapping> = Vec::new();
    for p in &points {
        let pa = scaled_arch(&a, p)?;
        let rs = map_layers(&pa, &lib, &wl.layers, &scfg).map_err(|e| match e {
            ExperimentError::Search { layer, .. } => ExperimentError::SweepInfeasible {
                axis: point_name(p),
                value: p.values().copied().max().unwrap_or(1),
                layer,
            },
            other => other,
        })?;
        if p == &base_point {
            base_maps = rs.iter().map(|r| r.best.clone()).collect();
        }
        let energy = sum_energy(rs.iter().map(|r| &r.result.energy));
        results.push((p.clone(), pa, energy, rs.iter().map(|r| r.result.accelerator_energy).sum::<f64>(), rs));
    }
    let (_, ba, be, bacc, _) = results.iter().find(|r| r.0 == base_point).expect("baseline point present");
    let (base_conv, base_acc) = (converter_energy(ba, be), *bacc);

    let mut rows = Vec::new();
    let mut table = Table::new(
        "reuse_sweep",
        &["point", "converter_energy_pj", "accelerator_energy_pj", "converter_reduction", "accelerator_reduction"],
    );
    for (p, pa, energy, acc, rs) in &results {
        let conv = converter_energy(pa, energy);
        let r = PointResult {
            point: point_name(p),
            factors: p.clone(),
            converter_energy_pj: conv,
            accelerator_energy_pj: *acc,
            converter_reduction: 1.0 - conv / base_conv,
            accelerator_reduction: 1.0 - acc / base_acc,
            energy: energy.clone(),
            layer_mapping_digests: rs.iter().map(|r| r.result.mapping_digest.clone()).collect(),
        };
        table.push(vec![
            r.point.clone(),
            fmt(conv),
            fmt(*acc),
            fmt(r.converter_reduction),
            fmt(r.accelerator_reduction),
        ]);
        rows.push(r);
    }
    let best = rows
        .iter()
        .max_by(|x, y| x.accelerator_reduction.total_cmp(&y.accelerator_reduction).then_with(|| y.point.cmp(&x.point)))
        .expect("nonempty sweep");

    // Exact monotonicity along each axis on lifted baseline mappings.
    let mut mono = Vec::new();
    let mut mono_t = Table::new("reuse_sweep_monotonicity", &["axis", "value", "targeted_conversions"]);
    for axis in &cfg.sweep_axes {
        let mut maps = base_maps.clone();
        let mut prev = 1;
        let mut series = Vec::new();
        for &v in &values {
            let mut p = base_point.clone();
            p.insert(*axis, v);
            let pa = scaled_arch(&a, &p)?;
            if v % prev == 0 {
                maps = maps.iter().zip(&wl.layers).map(|(m, l)| lift_along_axis(&pa, l, m, *axis, v / prev)).collect();
            }
            prev = v;
            let t = axis.target();
            let total: u64 = maps
                .iter()
                .zip(&wl.layers)
                .map(|(m, l)| {
                    let c = analyze(&pa, l, m);
                    (0..pa.num_levels() - 1)
                        .filter(|&e| {
                            let (from, to) = pa.flow(e, t);
                            from != to
                        })
                        .map(|e| c.conversions(e, t))
                        .sum::<u64>()
                })
                .sum();
            mono_t.push(vec![axis.to_string(), v.to_string(), total.to_string()]);
            series.push((v, total));
        }
        let non_increasing = series.windows(2).all(|w| w[1].1 <= w[0].1);
        mono.push(Monotonicity { axis: *axis, conversions: series, non_increasing });
    }
    let results_json = json!({
        "profile": profile,
        "workload": wl.name,
        "baseline": { "converter_energy_pj": base_conv, "accelerator_energy_pj": base_acc },
        "points": rows,
        "best": best,
        "monotonicity": mono,
    });
    Ok(Report::new(cfg, results_json, vec![table, mono_t]))
}
