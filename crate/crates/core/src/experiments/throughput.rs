use serde_json::json;

use crate::evaluator::ideal_macs_per_second;
use crate::mapper::{Objective, SearchConfig, Strategy};
use crate::spec::PadMode;

use super::{fmt, load_arch, load_workloads, map_layers, ExperimentConfig, ExperimentError, Report, Table};

pub fn run_throughput(cfg: &ExperimentConfig) -> Result<Report, ExperimentError> {
    let profile = cfg.profile();
    let (a, lib) = load_arch(cfg, profile)?;
    let workloads = load_workloads(cfg, &["vgg16", "alexnet"])?;
    let scfg = SearchConfig {
        objective: Objective::Delay,
        budget: cfg.budget,
        seed: cfg.seed,
        strategy: Strategy::PrunedRandom,
        pad_mode: PadMode::Pad,
        no_dram: false,
        ..Default::default()
    };
    let ideal = ideal_macs_per_second(&a);
    let mut layers_t = Table::new(
        "throughput_layers",
        &["workload", "layer", "macs", "cycles", "utilization", "modeled_macs_per_s", "ideal_macs_per_s"],
    );
    let mut summary_t =
        Table::new("throughput", &["workload", "ideal_macs_per_s", "modeled_macs_per_s", "ratio", "inferences_per_s"]);
    let mut out = Vec::new();
    for wl in &workloads {
        let rs = map_layers(&a, &lib, &wl.layers, &scfg)?;
        let seconds: f64 = rs.iter().map(|r| r.result.seconds).sum();
        let macs: u64 = wl.layers.iter().map(|l| l.macs()).sum();
        let modeled = macs as f64 / seconds;
        for (l, r) in wl.layers.iter().zip(&rs) {
            layers_t.push(vec![
                wl.name.clone(),
                l.name.clone(),
                l.macs().to_string(),
                fmt(r.result.cycles),
                fmt(r.result.utilization),
                fmt(r.result.macs_per_second),
                fmt(ideal),
            ]);
        }
        summary_t.push(vec![wl.name.clone(), fmt(ideal), fmt(modeled), fmt(modeled / ideal), fmt(1.0 / seconds)]);
        out.push(json!({
            "workload": wl.name,
            "ideal_macs_per_s": ideal,
            "modeled_macs_per_s": modeled,
            "ratio": modeled / ideal,
            "inferences_per_s": 1.0 / seconds,
            "layers": wl.layers.iter().zip(&rs).map(|(l, r)| json!({
                "layer": l.name,
                "macs": l.macs(),
                "cycles": r.result.cycles,
                "utilization": r.result.utilization,
                "mapping_digest": r.result.mapping_digest,
            })).collect::<Vec<_>>(),
        }));
    }
    Ok(Report::new(cfg, json!({ "profile": profile, "workloads": out }), vec![summary_t, layers_t]))
}
