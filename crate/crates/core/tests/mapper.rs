mod common;

use common::*;
use photon_core::evaluator::evaluate;
use photon_core::mapper::{enumerate_factorizations, search, space_size, Objective, SearchConfig, SearchError, Strategy};
use photon_core::spec::{Dim, Layer, PadMode, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cfg(strategy: Strategy, budget: u64) -> SearchConfig {
    SearchConfig { strategy, budget, seed: 7, ..Default::default() }
}

#[test]
fn single_candidate_space() {
    let lib = toy_lib();
    let a = build_arch(&[level("dram", "backing", 1, &ALL), level("mac", "mac", 1, &[])], &lib);
    let w = Layer::conv("one", 1, 1, 1, (1, 1), (1, 1), (1, 1));
    for s in [Strategy::Exhaustive, Strategy::Random, Strategy::PrunedRandom] {
        let r = search(&a, &lib, &w, &cfg(s, 50)).unwrap();
        assert_eq!(r.visited, 1, "{s:?}");
        assert_eq!(r.best, photon_core::Mapping::identity(&a));
    }
}

#[test]
fn exhaustive_matches_full_enumeration() {
    let lib = toy_lib();
    let a = build_arch(
        &[level("dram", "backing", 1, &ALL), level("buf", "buffer", 1, &ALL).capacity(128), level("mac", "mac", 2, &[])],
        &lib,
    );
    let w = Layer::fully_connected("fc", 1, 4, 4);
    let r = search(&a, &lib, &w, &cfg(Strategy::Exhaustive, 1)).unwrap();
    let all = all_mappings(&a, &w);
    assert_eq!(r.visited, all.len() as u64);
    for m in &all {
        assert!(r.objective <= evaluate(&a, &lib, &w, m).unwrap().total_energy);
    }
    assert_eq!(Some(r.objective), brute_force_min_energy(&a, &lib, &w));
    r.best.validate(&w, &a, PadMode::Strict).unwrap();
}

#[test]
fn searches_are_deterministic() {
    let lib = toy_lib();
    let a = build_arch(
        &[level("dram", "backing", 1, &ALL), level("buf", "buffer", 2, &ALL).multicast(), level("mac", "mac", 4, &[])],
        &lib,
    );
    let w = Layer::conv("c", 1, 8, 6, (3, 3), (6, 6), (1, 1));
    for s in [Strategy::Random, Strategy::PrunedRandom] {
        let a1 = search(&a, &lib, &w, &cfg(s, 3000)).unwrap();
        let a2 = search(&a, &lib, &w, &cfg(s, 3000)).unwrap();
        assert_eq!(a1.best, a2.best);
        assert_eq!(a1.visited, a2.visited);
        assert_eq!(a1.objective, a2.objective);
    }
}

#[test]
fn argmin_invariant_under_energy_scaling() {
    let lib = toy_lib();
    let scaled = lib.scaled(3.5);
    let a = build_arch(
        &[level("dram", "backing", 1, &ALL), level("buf", "buffer", 1, &ALL).capacity(256), level("mac", "mac", 2, &[])],
        &lib,
    );
    let w = Layer::conv("c", 1, 4, 2, (2, 1), (4, 1), (1, 1));
    let c = cfg(Strategy::Exhaustive, 1);
    let r1 = search(&a, &lib, &w, &c).unwrap();
    let r2 = search(&a, &scaled, &w, &c).unwrap();
    assert_eq!(r1.result.counts, r2.result.counts);
    assert!((r2.objective / r1.objective - 3.5).abs() < 1e-9);
}

#[test]
fn weight_buffer_is_used_for_weight_heavy_layer() {
    let lib = toy_lib();
    let a = build_arch(
        &[level("dram", "backing", 1, &ALL), level("wbuf", "buffer", 1, &[Tensor::Weights]), level("mac", "mac", 1, &[])],
        &lib,
    );
    // Batch 4 reuses every weight four times.
    let w = Layer::fully_connected("fc", 4, 8, 8);
    let r = search(&a, &lib, &w, &cfg(Strategy::Exhaustive, 1)).unwrap();
    assert!(!r.best.levels[1].bypass.contains(Tensor::Weights));
    let mut bypassed = r.best.clone();
    bypassed.levels[1].bypass = bypassed.levels[1].bypass.with(Tensor::Weights);
    let e_by = evaluate(&a, &lib, &w, &bypassed).unwrap();
    assert!(e_by.counts.level(0, Tensor::Weights).reads > r.result.counts.level(0, Tensor::Weights).reads);
    assert!(e_by.total_energy > r.objective);
}

#[test]
fn exhaustive_refuses_large_spaces() {
    let lib = toy_lib();
    let a = build_arch(
        &[level("dram", "backing", 1, &ALL), level("buf", "buffer", 4, &ALL), level("mac", "mac", 4, &ALL)],
        &lib,
    );
    let w = Layer::conv("big", 4, 64, 64, (3, 3), (32, 32), (1, 1));
    let c = SearchConfig { exhaustive_bound: 10_000, ..cfg(Strategy::Exhaustive, 1) };
    assert_eq!(search(&a, &lib, &w, &c).unwrap_err(), SearchError::SpaceTooLarge { bound: 10_000 });
    assert_eq!(space_size(&a, &lib, &w, &c, 10_000), None);
}

#[test]
fn no_valid_mapping_reported() {
    let lib = toy_lib();
    let a = build_arch(&[level("dram", "backing", 1, &ALL).capacity(8), level("mac", "mac", 1, &[])], &lib);
    let w = Layer::fully_connected("fc", 1, 4, 4);
    for s in [Strategy::Exhaustive, Strategy::PrunedRandom] {
        assert_eq!(search(&a, &lib, &w, &cfg(s, 100)).unwrap_err(), SearchError::NoValidMapping);
    }
    assert_eq!(search(&a, &lib, &w, &cfg(Strategy::Random, 0)).unwrap_err(), SearchError::ZeroBudget);
}

#[test]
fn pruned_random_finds_exhaustive_optimum_on_toys() {
    let lib = toy_lib();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut hits = 0;
    let mut n = 0;
    while n < 15 {
        let (a, w) = toy_search_instance(&mut rng, &lib);
        let Some(size) = space_size(&a, &lib, &w, &cfg(Strategy::Exhaustive, 1), 2_000) else { continue };
        let Ok(ex) = search(&a, &lib, &w, &cfg(Strategy::Exhaustive, 1)) else { continue };
        n += 1;
        let pr = search(&a, &lib, &w, &cfg(Strategy::PrunedRandom, 30 * size)).unwrap();
        pr.best.validate(&w, &a, PadMode::Strict).unwrap();
        assert!(pr.objective >= ex.objective);
        hits += (pr.objective == ex.objective) as u32;
    }
    assert!(hits >= 14, "{hits}/15");
}

#[test]
fn delay_objective_prefers_parallel_mapping() {
    let lib = toy_lib();
    let a = build_arch(&[level("dram", "backing", 1, &ALL), level("mac", "mac", 4, &[])], &lib);
    let w = Layer::fully_connected("fc", 1, 8, 2);
    let c = SearchConfig { objective: Objective::Delay, ..cfg(Strategy::Exhaustive, 1) };
    let r = search(&a, &lib, &w, &c).unwrap();
    assert_eq!(r.best.levels[1].spatial.product(), 4);
    assert_eq!(r.result.latency.compute_cycles, 4);
}

#[test]
fn padded_search_fills_fanout() {
    let lib = toy_lib();
    let a = build_arch(&[level("dram", "backing", 1, &ALL), level("mac", "mac", 8, &[])], &lib);
    let w = Layer::fully_connected("fc", 1, 12, 1);
    let c = SearchConfig { objective: Objective::Delay, pad_mode: PadMode::Pad, ..cfg(Strategy::Exhaustive, 1) };
    let r = search(&a, &lib, &w, &c).unwrap();
    assert_eq!(r.result.latency.compute_cycles, 2);
    assert!((r.result.utilization - 0.75).abs() < 1e-12);
    assert!(r.best.padded_bound(Dim::K) >= 12);
}

#[test]
fn factorization_examples() {
    assert_eq!(enumerate_factorizations(4, 2).len(), 3);
    assert_eq!(enumerate_factorizations(6, 2).len(), 4);
}
