use serde::Serialize;
use serde_json::json;

use crate::evaluator::{evaluate, EvaluationResult};
use crate::library::ProfileName;
use crate::mapper::{Objective, SearchConfig, Strategy};
use crate::spec::{Architecture, Dim, Layer, Library, Mapping, PadMode, Tensor};

use super::{fmt, load_arch, load_workloads, map_layers, sum_energy, ExperimentConfig, ExperimentError, Report, Table};

/// A consecutive layer pair whose intermediate does not fit on chip.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, thiserror::Error)]
#[error("fusing `{first}` -> `{second}` needs {required_bits} bits of buffer, capacity is {capacity_bits}")]
pub struct FusionInfeasible {
    pub first: String,
    pub second: String,
    pub required_bits: u64,
    pub capacity_bits: u64,
}

/// Run `b` inferences back to back under `m`: the outermost level gains an
/// innermost N loop of `b`, so every tile below it is reused across the batch.
pub fn lift_batch(m: &Mapping, b: u64) -> Mapping {
    let mut out = m.clone();
    let top = &mut out.levels[0];
    top.temporal[Dim::N] *= b;
    let mut order: Vec<Dim> = top.loop_order().into_iter().filter(|d| *d != Dim::N).collect();
    order.push(Dim::N);
    top.permutation = order;
    out.canonical()
}

/// Outermost on-chip storage level that may keep `t`.
fn on_chip_level(a: &Architecture, t: Tensor) -> Option<usize> {
    (1..a.num_levels()).find(|&l| a.levels[l].is_storage() && a.levels[l].keeps.contains(t))
}

/// Keep `t` on chip instead of in the outermost level.
fn pin_on_chip(a: &Architecture, m: &mut Mapping, t: Tensor) -> Option<usize> {
    let g = on_chip_level(a, t)?;
    m.levels[0].bypass = m.levels[0].bypass.with(t);
    m.levels[g].bypass = m.levels[g].bypass.without(t);
    Some(g)
}

fn buffer_bits(a: &Architecture, w: &Layer, m: &Mapping, g: usize) -> u64 {
    Tensor::ALL.iter().filter(|t| m.holds(a, g, **t)).map(|t| m.occupancy_bits(w, a, g, *t)).sum()
}

/// Outcome of greedy pairwise fusion.
#[derive(Clone, Debug)]
pub struct FusionPlan {
    pub mappings: Vec<Mapping>,
    pub fused: Vec<(String, String)>,
    pub rejected: Vec<FusionInfeasible>,
    /// Largest on-chip footprint among accepted pairs.
    pub required_bits: u64,
}

/// Greedily fuse consecutive layers while the pinned intermediates fit:
/// the first layer's outputs and the second's inputs skip the outermost
/// level and stay in the outermost on-chip buffer.
pub fn fuse(a: &Architecture, layers: &[Layer], mappings: &[Mapping]) -> FusionPlan {
    let mut ms = mappings.to_vec();
    let mut fused = Vec::new();
    let mut rejected = Vec::new();
    let mut required_bits = 0;
    for i in 0..layers.len().saturating_sub(1) {
        let (mut m0, mut m1) = (ms[i].clone(), ms[i + 1].clone());
        let (Some(g0), Some(g1)) = (pin_on_chip(a, &mut m0, Tensor::Outputs), pin_on_chip(a, &mut m1, Tensor::Inputs))
        else {
            continue;
        };
        let need = buffer_bits(a, &layers[i], &m0, g0).max(buffer_bits(a, &layers[i + 1], &m1, g1));
        let ok0 = m0.validate(&layers[i], a, PadMode::Pad).is_ok();
        let ok1 = m1.validate(&layers[i + 1], a, PadMode::Pad).is_ok();
        if ok0 && ok1 {
            required_bits = required_bits.max(need);
            ms[i] = m0;
            ms[i + 1] = m1;
            fused.push((layers[i].name.clone(), layers[i + 1].name.clone()));
        } else {
            rejected.push(FusionInfeasible {
                first: layers[i].name.clone(),
                second: layers[i + 1].name.clone(),
                required_bits: need,
                capacity_bits: a.levels[g0].capacity_bits.unwrap_or(0),
            });
        }
    }
    FusionPlan { mappings: ms, fused, rejected, required_bits }
}

/// Architecture and library with the on-chip buffer grown to `bits`, its
/// per-access energy scaled by `(bits / old) ^ exponent`.
fn grown_buffer(a: &Architecture, lib: &Library, bits: u64, exponent: f64) -> (Architecture, Library) {
    let Some(g) = on_chip_level(a, Tensor::Outputs) else { return (a.clone(), lib.clone()) };
    let old = a.levels[g].capacity_bits.unwrap_or(bits);
    if bits <= old {
        return (a.clone(), lib.clone());
    }
    let mut a2 = a.clone();
    a2.levels[g].capacity_bits = Some(bits);
    let mut lib2 = lib.clone();
    let name = a.levels[g].component.clone();
    let scale = (bits as f64 / old as f64).powf(exponent);
    let mut c = lib.get(&name).expect("resolved component").scaled(scale);
    c.static_power_mw = lib.get(&name).expect("resolved component").static_power_mw;
    c.capacity_bits = Some(bits);
    lib2.insert(c);
    (a2, lib2)
}

#[derive(Clone, Debug, Serialize)]
struct ConfigResult {
    config: String,
    batch_size: u64,
    fusion: bool,
    energy_per_inference_pj: f64,
    dram_energy_per_inference_pj: f64,
    dram_share: f64,
    reduction_vs_baseline: f64,
    latency_per_batch_s: f64,
    latency_increase: f64,
    buffer_capacity_bits: u64,
    required_buffer_bits: u64,
    fused_pairs: Vec<(String, String)>,
    rejected: Vec<FusionInfeasible>,
    energy_per_inference: std::collections::BTreeMap<String, f64>,
    layer_mapping_digests: Vec<String>,
}

struct Evaluated {
    results: Vec<EvaluationResult>,
}

impl Evaluated {
    fn run(a: &Architecture, lib: &Library, layers: &[Layer], ms: &[Mapping]) -> Result<Evaluated, ExperimentError> {
        let results = layers.iter().zip(ms).map(|(l, m)| evaluate(a, lib, l, m)).collect::<Result<_, _>>()?;
        Ok(Evaluated { results })
    }
    fn energy(&self) -> f64 {
        self.results.iter().map(|r| r.total_energy).sum()
    }
    fn dram(&self, a: &Architecture) -> f64 {
        self.results.iter().map(|r| r.element_energy.get(&a.levels[0].name).copied().unwrap_or(0.0)).sum()
    }
    fn seconds(&self) -> f64 {
        self.results.iter().map(|r| r.seconds).sum()
    }
}

/// Per layer, the cheaper of the lifted baseline mapping and a fresh search
/// on the batched layer. Lifting alone keeps weights resident across the
/// batch but can lose input or output reuse at the outermost level.
fn batched_mappings(
    a: &Architecture,
    lib: &Library,
    layers: &[Layer],
    base: &[Mapping],
    b: u64,
    scfg: &SearchConfig,
) -> Result<Vec<Mapping>, ExperimentError> {
    if b == 1 {
        return Ok(base.to_vec());
    }
    let searched = map_layers(a, lib, layers, scfg)?;
    layers
        .iter()
        .zip(base)
        .zip(searched)
        .map(|((l, m), s)| {
            let lifted = lift_batch(m, b);
            let e = evaluate(a, lib, l, &lifted)?.total_energy;
            Ok(if s.result.total_energy < e { s.best } else { lifted })
        })
        .collect()
}

fn run_profile(cfg: &ExperimentConfig, profile: ProfileName) -> Result<serde_json::Value, ExperimentError> {
    let (a, lib) = load_arch(cfg, profile)?;
    let wl = load_workloads(cfg, &["vgg16"])?.remove(0);
    let scfg = SearchConfig {
        objective: Objective::Energy,
        budget: cfg.budget,
        seed: cfg.seed,
        strategy: Strategy::PrunedRandom,
        pad_mode: PadMode::Strict,
        no_dram: false,
        ..Default::default()
    };
    let base = map_layers(&a, &lib, &wl.layers, &scfg)?;
    let base_maps: Vec<Mapping> = base.iter().map(|r| r.best.clone()).collect();
    let baseline = Evaluated::run(&a, &lib, &wl.layers, &base_maps)?;
    let (e0, t0) = (baseline.energy(), baseline.seconds());
    let g = on_chip_level(&a, Tensor::Outputs);
    let cap0 = g.and_then(|g| a.levels[g].capacity_bits).unwrap_or(0);

    let mut configs = Vec::new();
    let mut batches = cfg.batch_sizes.clone();
    batches.sort_unstable();
    batches.dedup();
    for &b in &batches {
        let layers: Vec<Layer> = wl.layers.iter().map(|l| l.batched(b)).collect();
        let maps = batched_mappings(&a, &lib, &layers, &base_maps, b, &scfg)?;
        let mut variants = vec![(false, a.clone(), lib.clone(), maps.clone(), Vec::new(), Vec::new(), 0)];
        if cfg.fusion {
            let mut f = fuse(&a, &layers, &maps);
            let (mut fa, mut flib) = (a.clone(), lib.clone());
            if cfg.auto_size_buffer && !f.rejected.is_empty() {
                let need = f.rejected.iter().map(|r| r.required_bits).max().unwrap_or(0).max(f.required_bits);
                (fa, flib) = grown_buffer(&a, &lib, need, cfg.buffer_energy_exponent);
                f = fuse(&fa, &layers, &maps);
            }
            variants.push((true, fa, flib, f.mappings, f.fused, f.rejected, f.required_bits));
        }
        for (fusion, va, vlib, vmaps, fused, rejected, required) in variants {
            let ev = Evaluated::run(&va, &vlib, &layers, &vmaps)?;
            let per_inf = ev.energy() / b as f64;
            let dram = ev.dram(&va) / b as f64;
            let energy = sum_energy(ev.results.iter().map(|r| &r.energy))
                .into_iter()
                .map(|(k, v)| (k, v / b as f64))
                .collect();
            let name = match (b, fusion) {
                (1, false) => "baseline".to_string(),
                (1, true) => "fused".to_string(),
                (b, false) => format!("batch{b}"),
                (b, true) => format!("batch{b}+fused"),
            };
            configs.push(ConfigResult {
                config: name,
                batch_size: b,
                fusion,
                energy_per_inference_pj: per_inf,
                dram_energy_per_inference_pj: dram,
                dram_share: dram / per_inf,
                reduction_vs_baseline: e0 / per_inf,
                latency_per_batch_s: ev.seconds(),
                latency_increase: ev.seconds() / t0,
                buffer_capacity_bits: g.and_then(|g| va.levels[g].capacity_bits).unwrap_or(cap0),
                required_buffer_bits: required,
                fused_pairs: fused,
                rejected,
                energy_per_inference: energy,
                layer_mapping_digests: ev.results.iter().map(|r| r.mapping_digest.clone()).collect(),
            });
        }
    }
    Ok(json!({
        "profile": profile,
        "workload": wl.name,
        "baseline_energy_pj": e0,
        "baseline_dram_share": baseline.dram(&a) / e0,
        "configs": configs,
    }))
}

pub fn run_memory_experiment(cfg: &ExperimentConfig) -> Result<Report, ExperimentError> {
    let mut summary = Table::new(
        "memory",
        &[
            "profile",
            "config",
            "batch_size",
            "fusion",
            "energy_per_inference_pj",
            "dram_share",
            "reduction_vs_baseline",
            "latency_increase",
            "rejected_pairs",
        ],
    );
    let mut components = Table::new("memory_components", &["profile", "config", "component", "energy_per_inference_pj"]);
    let mut out = Vec::new();
    for &p in &cfg.profiles {
        let v = run_profile(cfg, p)?;
        for c in v["configs"].as_array().expect("configs") {
            summary.push(vec![
                p.to_string(),
                c["config"].as_str().unwrap_or_default().to_string(),
                c["batch_size"].to_string(),
                c["fusion"].to_string(),
                fmt(c["energy_per_inference_pj"].as_f64().unwrap_or(0.0)),
                fmt(c["dram_share"].as_f64().unwrap_or(0.0)),
                fmt(c["reduction_vs_baseline"].as_f64().unwrap_or(0.0)),
                fmt(c["latency_increase"].as_f64().unwrap_or(0.0)),
                c["rejected"].as_array().map_or(0, Vec::len).to_string(),
            ]);
            if let Some(e) = c["energy_per_inference"].as_object() {
                for (k, x) in e {
                    components.push(vec![
                        p.to_string(),
                        c["config"].as_str().unwrap_or_default().to_string(),
                        k.clone(),
                        fmt(x.as_f64().unwrap_or(0.0)),
                    ]);
                }
            }
        }
        out.push(v);
    }
    Ok(Report::new(cfg, json!({ "profiles": out }), vec![summary, components]))
}
