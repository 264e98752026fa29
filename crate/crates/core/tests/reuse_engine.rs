mod common;

use common::*;
use photon_core::reuse::{analyze, oracle_capacity, reuse_factors, simulate, DEFAULT_ORACLE_CAP};
use photon_core::spec::{Dim, Layer, MappingError, PadMode, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use Dim::*;
use Tensor::*;

fn both(a: &photon_core::Architecture, w: &Layer, m: &photon_core::Mapping) -> photon_core::AccessCounts {
    let an = analyze(a, w, m);
    let sim = simulate(a, w, m, DEFAULT_ORACLE_CAP).unwrap();
    assert_eq!(an, sim, "analyze vs simulate: {:#?}", an.diff(&sim));
    an
}

#[test]
fn unbuffered_fc_fetches_every_operand() {
    let lib = toy_lib();
    let a = build_arch(&[level("dram", "backing", 1, &ALL), level("mac", "mac", 1, &[])], &lib);
    let w = Layer::fully_connected("fc", 1, 2, 3);
    let m = mapping(&a, &[(&[(K, 2), (C, 3)], &[], &[K, C]), (&[], &[], &[])]);
    m.validate(&w, &a, PadMode::Strict).unwrap();
    let c = both(&a, &w, &m);
    assert_eq!(c.level(0, Weights).reads, 6);
    assert_eq!(c.level(0, Inputs).reads, 6);
    assert_eq!(c.macs, 6);
}

#[test]
fn weight_buffer_fills_each_weight_once() {
    let lib = toy_lib();
    let a = build_arch(
        &[level("dram", "backing", 1, &ALL), level("buf", "buffer", 1, &[Weights]), level("mac", "mac", 1, &[])],
        &lib,
    );
    let w = Layer::fully_connected("fc", 1, 2, 3);
    let m = mapping(&a, &[(&[], &[], &[]), (&[(K, 2), (C, 3)], &[], &[K, C]), (&[], &[], &[])]);
    m.validate(&w, &a, PadMode::Strict).unwrap();
    let c = both(&a, &w, &m);
    assert_eq!(c.level(0, Weights).reads, 6);
    assert_eq!(c.level(1, Weights).fills, 6);
    assert_eq!(c.level(1, Weights).reads, 6);
    // Bypassed tensors never touch the buffer.
    assert_eq!(c.level(1, Inputs), &Default::default());
    assert_eq!(c.level(0, Inputs).reads, 6);
}

#[test]
fn multicast_divides_input_conversions() {
    let lib = toy_lib();
    let a = build_arch(&[level("dram", "backing", 1, &ALL), level("amac", "amac", 4, &[]).multicast()], &lib);
    let w = Layer::conv("conv", 1, 4, 2, (3, 3), (4, 4), (1, 1));
    let m = mapping(
        &a,
        &[(&[(C, 2), (R, 3), (S, 3), (P, 4), (Q, 4)], &[], &[C, P, Q, R, S]), (&[], &[(K, 4)], &[])],
    );
    m.validate(&w, &a, PadMode::Strict).unwrap();
    let c = both(&a, &w, &m);
    let e = c.edges[0][Inputs];
    assert_eq!(e.conversions * 4, e.demand);
    // Frozen from the interpreter.
    assert_eq!(e.conversions, 288);
    assert_eq!(e.demand, 1152);
}

#[test]
fn degenerate_layer_single_iteration() {
    let lib = toy_lib();
    let a = build_arch(
        &[level("dram", "backing", 1, &ALL), level("buf", "buffer", 1, &ALL), level("mac", "mac", 1, &ALL)],
        &lib,
    );
    let w = Layer::conv("one", 1, 1, 1, (1, 1), (1, 1), (1, 1));
    let m = photon_core::Mapping::identity(&a);
    let c = both(&a, &w, &m);
    assert_eq!(c.macs, 1);
    for t in [Weights, Inputs] {
        assert_eq!(c.level(1, t).fills, 1);
        assert_eq!(c.level(2, t).fills, 1);
    }
    assert_eq!(c.level(2, Outputs).drains, 1);
    assert_eq!(c.level(1, Outputs).drains, 1);
    assert_eq!(c.level(0, Outputs).updates, 1);
    for e in 0..2 {
        for t in Tensor::ALL {
            assert_eq!(c.conversions(e, t), 1);
        }
    }
}

#[test]
fn padded_macs_reported_separately() {
    let lib = toy_lib();
    let a = build_arch(&[level("dram", "backing", 1, &ALL), level("mac", "mac", 4, &[])], &lib);
    let w = Layer::conv("s2", 1, 3, 1, (3, 3), (3, 3), (2, 2));
    // K padded 3 -> 4 over a fanout of 4.
    let m = mapping(&a, &[(&[(R, 3), (S, 3), (P, 3), (Q, 3)], &[], &[]), (&[], &[(K, 4)], &[])]);
    assert_eq!(m.validate(&w, &a, PadMode::Strict), Err(MappingError::FactorMismatch(K)));
    m.validate(&w, &a, PadMode::Pad).unwrap();
    let c = both(&a, &w, &m);
    assert_eq!(c.macs, 4 * 81);
    assert_eq!(c.real_macs, 3 * 81);
}

#[test]
fn spatial_reuse_of_weights_halves_conversions() {
    // P split temporally above the analog weight store; moving a factor of
    // it to the optical-side fanout lets copies share one converted weight.
    let lib = toy_lib();
    let build = |share: u64| {
        build_arch(
            &[
                level("dram", "backing", 1, &ALL),
                level("abuf", "abuffer", 1, &[Weights, Outputs]),
                level("share", "anoc", share, &[]).multicast().reduce(),
                level("amac", "amac", 1, &[Weights]),
            ],
            &lib,
        )
    };
    let w = Layer::conv("c", 1, 2, 2, (1, 1), (4, 1), (1, 1));
    let a1 = build(1);
    let m1 = mapping(&a1, &[(&[(P, 4), (K, 2), (C, 2)], &[], &[P, K, C]), (&[], &[], &[]), (&[], &[], &[]), (&[], &[], &[])]);
    let a2 = build(2);
    let m2 = mapping(
        &a2,
        &[(&[(P, 2), (K, 2), (C, 2)], &[], &[P, K, C]), (&[], &[], &[]), (&[], &[(P, 2)], &[]), (&[], &[], &[])],
    );
    let c1 = both(&a1, &w, &m1);
    let c2 = both(&a2, &w, &m2);
    assert_eq!(c2.conversions(0, Weights) * 2, c1.conversions(0, Weights));
}

#[test]
fn reuse_factor_examples() {
    let lib = toy_lib();
    let a = build_arch(&[level("dram", "backing", 1, &ALL), level("amac", "amac", 4, &[]).multicast()], &lib);
    let w = Layer::conv("c", 4, 2, 2, (1, 1), (1, 1), (1, 1));
    let mut m = mapping(&a, &[(&[(K, 2), (C, 2)], &[], &[]), (&[], &[(N, 4)], &[])]);
    m.validate(&w, &a, PadMode::Strict).unwrap();
    let c = both(&a, &w, &m);
    let r = reuse_factors(&c, &a, &m);
    assert_eq!(r.get(0, Weights).spatial_multicast, 4);
    assert!(r.consistent_with(&c));

    let a = build_arch(&[level("dram", "backing", 1, &ALL), level("amac", "amac", 2, &[]).multicast()], &lib);
    m = mapping(&a, &[(&[(K, 2), (N, 4)], &[], &[]), (&[], &[(C, 2)], &[])]);
    m.validate(&w, &a, PadMode::Strict).unwrap();
    let c = both(&a, &w, &m);
    let r = reuse_factors(&c, &a, &m);
    assert_eq!(r.get(0, Inputs).spatial_multicast, 1);
    assert_eq!(r.get(0, Weights).spatial_multicast, 1);
    assert!(r.consistent_with(&c));
}

#[test]
fn oracle_cap_is_enforced() {
    let lib = toy_lib();
    let a = build_arch(&[level("dram", "backing", 1, &ALL), level("mac", "mac", 1, &[])], &lib);
    let w = Layer::fully_connected("fc", 1, 10, 10);
    let m = mapping(&a, &[(&[(K, 10), (C, 10)], &[], &[]), (&[], &[], &[])]);
    assert!(simulate(&a, &w, &m, 99).is_err());
    assert!(simulate(&a, &w, &m, 100).is_ok());
}

#[test]
fn capacity_error_on_overflowing_weight_tile() {
    let lib = toy_lib();
    let a = build_arch(
        &[level("dram", "backing", 1, &ALL), level("buf", "buffer", 1, &[Weights]).capacity(4096), level("mac", "mac", 1, &[])],
        &lib,
    );
    // 1024 weights x 8 bits = 8192 bits > 4096.
    let w = Layer::fully_connected("fc", 1, 32, 32);
    let m = mapping(&a, &[(&[], &[], &[]), (&[(K, 32), (C, 32)], &[], &[]), (&[], &[], &[])]);
    assert_eq!(
        m.validate(&w, &a, PadMode::Strict),
        Err(MappingError::CapacityExceeded { level: "buf".into(), tensor: Weights })
    );
}

#[test]
fn validate_examples() {
    let lib = toy_lib();
    let a = build_arch(&[level("dram", "backing", 1, &ALL), level("mac", "mac", 4, &[])], &lib);
    let w = Layer::fully_connected("fc", 1, 8, 1);
    let ok = mapping(&a, &[(&[(K, 2)], &[], &[]), (&[], &[(K, 4)], &[])]);
    assert_eq!(ok.validate(&w, &a, PadMode::Strict), Ok(()));
    let bad = mapping(&a, &[(&[(K, 2)], &[], &[]), (&[], &[(K, 3)], &[])]);
    assert_eq!(bad.validate(&w, &a, PadMode::Strict), Err(MappingError::FactorMismatch(K)));
    let over = mapping(&a, &[(&[(K, 1)], &[], &[]), (&[], &[(K, 8)], &[])]);
    assert_eq!(over.validate(&w, &a, PadMode::Strict), Err(MappingError::FanoutExceeded("mac".into())));
}

#[test]
fn randomized_oracle_equivalence_quick() {
    let lib = toy_lib();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..60 {
        let inst = random_instance(&mut rng, &lib, 4, 4, 5_000);
        let an = analyze(&inst.arch, &inst.layer, &inst.mapping);
        let sim = simulate(&inst.arch, &inst.layer, &inst.mapping, DEFAULT_ORACLE_CAP).unwrap();
        assert_eq!(an, sim, "instance {i}: {:#?}\n{:?}\n{}", an.diff(&sim), inst.layer, inst.mapping.canonical_key());
        let r = reuse_factors(&an, &inst.arch, &inst.mapping);
        assert!(r.consistent_with(&an), "instance {i}");
    }
}

#[test]
fn validate_agrees_with_tile_enumerator() {
    let lib = toy_lib();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut rejected = 0;
    for _ in 0..150 {
        let a = random_arch(&mut rng, &lib, 4, Some(256));
        let w = random_layer(&mut rng, 5, 20_000);
        let m = random_mapping(&mut rng, &a, &w, PadMode::Strict);
        let v = m.validate(&w, &a, PadMode::Strict);
        let o = oracle_capacity(&a, &w, &m);
        assert_eq!(v.is_ok(), o.is_ok(), "{v:?} vs {o:?}");
        if let (Err(MappingError::CapacityExceeded { level, tensor }), Err((l, t))) = (&v, &o) {
            assert_eq!(*level, a.levels[*l].name);
            assert_eq!(tensor, t);
        }
        rejected += v.is_err() as u32;
    }
    assert!(rejected > 10 && rejected < 140, "{rejected}");
}
