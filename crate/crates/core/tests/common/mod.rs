#![allow(dead_code)]

use photon_core::spec::{
    ActionKind, Architecture, ComponentClass, ComponentSpec, Dim, DimMap, Domain, Layer, LayerKind, Library,
    LevelMapping, Mapping, PadMode, Tensor, TensorSet,
};
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::json;

pub fn component(name: &str, class: ComponentClass, from: Domain, to: Domain, epa: &[(ActionKind, f64)]) -> ComponentSpec {
    ComponentSpec {
        name: name.into(),
        class,
        domain_in: from,
        domain_out: to,
        energy_per_action: epa.iter().copied().collect(),
        static_power_mw: 0.0,
        area_um2: 1.0,
        capacity_bits: (class == ComponentClass::Storage).then_some(1 << 40),
        width_bits: 8,
        bandwidth: 1.0,
        provenance: String::new(),
    }
}

/// Small library: storages, computes and converters in DE and AE.
pub fn toy_lib() -> Library {
    use ActionKind::{Convert, Read, Update, Write};
    use ComponentClass::{Converter, Network, Storage};
    use Domain::*;
    let mut lib: Library = [
        component("backing", Storage, DE, DE, &[(Read, 10.0), (Write, 10.0), (Update, 10.0)]),
        component("buffer", Storage, DE, DE, &[(Read, 1.0), (Write, 1.0), (Update, 1.0)]),
        component("abuffer", Storage, AE, AE, &[(Read, 0.5), (Write, 0.5), (Update, 0.5)]),
        component("mac", ComponentClass::Compute, DE, DE, &[(ActionKind::Compute, 0.2)]),
        component("amac", ComponentClass::Compute, AE, AE, &[(ActionKind::Compute, 0.05)]),
        component("noc", Network, DE, DE, &[]),
        component("anoc", Network, AE, AE, &[]),
        component("dac", Converter, DE, AE, &[(Convert, 2.0)]),
        component("adc", Converter, AE, DE, &[(Convert, 3.0)]),
    ]
    .into_iter()
    .collect();
    lib.get_mut("backing").unwrap().bandwidth = 64.0;
    lib.get_mut("buffer").unwrap().capacity_bits = Some(4096);
    lib.get_mut("abuffer").unwrap().capacity_bits = Some(4096);
    lib
}

#[derive(Clone, Debug)]
pub struct LevelDesc {
    pub name: String,
    pub component: String,
    pub fanout: u64,
    pub keeps: Vec<Tensor>,
    pub multicast: bool,
    pub reduce: bool,
    pub capacity: Option<u64>,
    pub spatial_dims: Option<Vec<Dim>>,
}

pub fn level(name: &str, component: &str, fanout: u64, keeps: &[Tensor]) -> LevelDesc {
    LevelDesc {
        name: name.into(),
        component: component.into(),
        fanout,
        keeps: keeps.to_vec(),
        multicast: false,
        reduce: false,
        capacity: None,
        spatial_dims: None,
    }
}

impl LevelDesc {
    pub fn multicast(mut self) -> Self {
        self.multicast = true;
        self
    }
    pub fn reduce(mut self) -> Self {
        self.reduce = true;
        self
    }
    pub fn capacity(mut self, bits: u64) -> Self {
        self.capacity = Some(bits);
        self
    }
}

pub const ALL: [Tensor; 3] = Tensor::ALL;

/// Build and resolve an architecture against `lib`, adding a converter for
/// every domain crossing.
pub fn build_arch(levels: &[LevelDesc], lib: &Library) -> Architecture {
    let lv: Vec<_> = levels
        .iter()
        .map(|l| {
            let mut v = json!({
                "name": l.name, "component": l.component, "fanout": l.fanout,
                "keeps": l.keeps, "may_multicast": l.multicast, "may_reduce": l.reduce,
            });
            if let Some(c) = l.capacity {
                v["capacity_bits"] = json!(c);
            }
            if let Some(ds) = &l.spatial_dims {
                v["spatial_dims"] = json!(ds);
            }
            v
        })
        .collect();
    let mut converters = Vec::new();
    for e in 0..levels.len() - 1 {
        let d0 = lib.get(&levels[e].component).unwrap().domain_in;
        let d1 = lib.get(&levels[e + 1].component).unwrap().domain_in;
        if d0 == Domain::DE && d1 == Domain::AE {
            converters.push(json!({"name": format!("dac{e}"), "after": levels[e].name, "component": "dac", "tensors": ["Weights", "Inputs"]}));
            converters.push(json!({"name": format!("adc{e}"), "after": levels[e].name, "component": "adc", "tensors": ["Outputs"]}));
        } else if d0 == Domain::AE && d1 == Domain::DE {
            converters.push(json!({"name": format!("adc{e}"), "after": levels[e].name, "component": "adc", "tensors": ["Weights", "Inputs"]}));
            converters.push(json!({"name": format!("dac{e}"), "after": levels[e].name, "component": "dac", "tensors": ["Outputs"]}));
        }
    }
    let doc = json!({"name": "toy", "clock_hz": 1e9, "levels": lv, "converters": converters});
    let mut a: Architecture = serde_json::from_value(doc).unwrap();
    a.resolve(lib, "architecture").unwrap();
    a
}

/// Mapping from per-level (temporal, spatial, permutation) descriptions.
pub fn mapping(a: &Architecture, spec: &[(&[(Dim, u64)], &[(Dim, u64)], &[Dim])]) -> Mapping {
    let mut m = Mapping::identity(a);
    for (lm, (t, s, p)) in m.levels.iter_mut().zip(spec) {
        for (d, f) in t.iter() {
            lm.temporal[*d] = *f;
        }
        for (d, f) in s.iter() {
            lm.spatial[*d] = *f;
        }
        lm.permutation = p.to_vec();
    }
    m
}

// ---- random instances ----

fn random_factorization<R: Rng>(rng: &mut R, bound: u64, slots: usize) -> Vec<u64> {
    let mut out = vec![1u64; slots];
    let mut rest = bound;
    // Split off prime factors one at a time into random slots.
    let mut p = 2;
    while rest > 1 {
        while rest.is_multiple_of(p) {
            let i = rng.gen_range(0..slots);
            out[i] *= p;
            rest /= p;
        }
        p += 1;
    }
    out
}

pub struct Instance {
    pub arch: Architecture,
    pub layer: Layer,
    pub mapping: Mapping,
    pub mode: PadMode,
}

pub fn random_layer<R: Rng>(rng: &mut R, max_dim: u64, max_macs: u64) -> Layer {
    loop {
        let fc = rng.gen_bool(0.2);
        let mut dims = DimMap::from_fn(|_| rng.gen_range(1..=max_dim));
        if fc {
            for d in [Dim::R, Dim::S, Dim::P, Dim::Q] {
                dims[d] = 1;
            }
        }
        let is_fc = [Dim::R, Dim::S, Dim::P, Dim::Q].iter().all(|d| dims[*d] == 1);
        if dims.product() > max_macs {
            continue;
        }
        return Layer {
            name: "rand".into(),
            kind: if is_fc { LayerKind::FullyConnected } else { LayerKind::Conv },
            dims,
            stride: (rng.gen_range(1..=3), rng.gen_range(1..=2)),
            bits: Default::default(),
        };
    }
}

pub fn random_arch<R: Rng>(rng: &mut R, lib: &Library, max_levels: usize, capacity: Option<u64>) -> Architecture {
    let n = rng.gen_range(2..=max_levels);
    let analog = rng.gen_bool(0.5);
    let mut levels = vec![level("L0", "backing", 1, &ALL)];
    for i in 1..n - 1 {
        let storage = rng.gen_bool(0.75);
        let comp = match (storage, analog && i == n - 2) {
            (true, true) => "abuffer",
            (true, false) => "buffer",
            (false, true) => "anoc",
            (false, false) => "noc",
        };
        let keeps: Vec<Tensor> = if storage { ALL.into_iter().filter(|_| rng.gen_bool(0.6)).collect() } else { vec![] };
        let mut l = level(&format!("L{i}"), comp, rng.gen_range(1..=4), &keeps);
        l.multicast = rng.gen_bool(0.5);
        l.reduce = rng.gen_bool(0.5);
        if storage {
            l.capacity = Some(capacity.unwrap_or(1 << 40));
        }
        levels.push(l);
    }
    let keeps: Vec<Tensor> = ALL.into_iter().filter(|_| rng.gen_bool(0.4)).collect();
    let mut c = level(&format!("L{}", n - 1), if analog { "amac" } else { "mac" }, rng.gen_range(1..=4), &keeps);
    c.multicast = rng.gen_bool(0.5);
    c.reduce = rng.gen_bool(0.5);
    levels.push(c);
    build_arch(&levels, lib)
}

/// A random mapping that satisfies factor, fanout and placement rules
/// (capacity is not enforced).
pub fn random_mapping<R: Rng>(rng: &mut R, a: &Architecture, w: &Layer, mode: PadMode) -> Mapping {
    loop {
        let mut m = Mapping::identity(a);
        for d in Dim::ALL {
            let bound = match mode {
                PadMode::Strict => w.bound(d),
                PadMode::Pad => w.bound(d) + rng.gen_range(0..=2),
            };
            // Slots: temporal at storage levels, spatial wherever fanout > 1.
            let mut slots: Vec<(usize, bool)> = Vec::new();
            for (l, lv) in a.levels.iter().enumerate() {
                if lv.is_storage() {
                    slots.push((l, false));
                }
                if lv.allows_spatial(d) {
                    slots.push((l, true));
                }
            }
            let f = random_factorization(rng, bound, slots.len());
            for ((l, sp), f) in slots.into_iter().zip(f) {
                if sp {
                    m.levels[l].spatial[d] = f;
                } else {
                    m.levels[l].temporal[d] = f;
                }
            }
        }
        for (l, lm) in m.levels.iter_mut().enumerate() {
            let mut p = Dim::ALL.to_vec();
            p.shuffle(rng);
            lm.permutation = p;
            if a.levels[l].is_storage() || l == a.compute_level() {
                let mut by = TensorSet::EMPTY;
                for t in a.levels[l].keeps.iter() {
                    if rng.gen_bool(0.2) {
                        by = by.with(t);
                    }
                }
                lm.bypass = by;
            }
        }
        match m.validate(w, a, mode) {
            Ok(()) => return m,
            Err(photon_core::spec::MappingError::CapacityExceeded { .. }) => return m,
            Err(_) => continue,
        }
    }
}

pub fn random_instance<R: Rng>(rng: &mut R, lib: &Library, max_dim: u64, max_levels: usize, max_macs: u64) -> Instance {
    let arch = random_arch(rng, lib, max_levels, None);
    let layer = random_layer(rng, max_dim, max_macs);
    let mode = if rng.gen_bool(0.25) { PadMode::Pad } else { PadMode::Strict };
    let mapping = random_mapping(rng, &arch, &layer, mode);
    Instance { arch, layer, mapping, mode }
}

pub fn identity_level(name: &str) -> LevelMapping {
    LevelMapping::identity(name)
}

// ---- independent mapping enumeration ----

fn divisors(n: u64) -> Vec<u64> {
    (1..=n).filter(|d| n.is_multiple_of(*d)).collect()
}

fn perms(dims: Vec<Dim>) -> Vec<Vec<Dim>> {
    if dims.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for i in 0..dims.len() {
        let mut rest = dims.clone();
        let d = rest.remove(i);
        for mut p in perms(rest) {
            p.insert(0, d);
            out.push(p);
        }
    }
    out
}

/// Every valid strict mapping (loop orders only over dims with a temporal
/// factor above 1, no bypass at the outermost level).
pub fn all_mappings(a: &Architecture, w: &Layer) -> Vec<Mapping> {
    // (level, dim, spatial) slots; factors assigned by recursive division.
    let mut slots = Vec::new();
    for d in Dim::ALL {
        for (l, lv) in a.levels.iter().enumerate() {
            if lv.is_storage() {
                slots.push((l, d, false));
            }
            if lv.allows_spatial(d) {
                slots.push((l, d, true));
            }
        }
    }
    let mut factor_maps: Vec<Mapping> = Vec::new();
    fn rec(
        w: &Layer,
        slots: &[(usize, Dim, bool)],
        i: usize,
        m: &mut Mapping,
        out: &mut Vec<Mapping>,
    ) {
        if i == slots.len() {
            if Dim::ALL.iter().all(|d| m.padded_bound(*d) == w.bound(*d)) {
                out.push(m.clone());
            }
            return;
        }
        let (l, d, sp) = slots[i];
        let used = m.padded_bound(d);
        for f in divisors(w.bound(d) / used) {
            if sp {
                m.levels[l].spatial[d] = f;
            } else {
                m.levels[l].temporal[d] = f;
            }
            rec(w, slots, i + 1, m, out);
            if sp {
                m.levels[l].spatial[d] = 1;
            } else {
                m.levels[l].temporal[d] = 1;
            }
        }
    }
    rec(w, &slots, 0, &mut Mapping::identity(a), &mut factor_maps);
    let mut out = Vec::new();
    for base in factor_maps {
        let mut partial = vec![base];
        for l in 0..a.num_levels() {
            let mut next = Vec::new();
            for m in partial {
                let dims: Vec<Dim> = Dim::ALL.into_iter().filter(|d| m.levels[l].temporal[*d] > 1).collect();
                let keep = a.levels[l].keeps.to_vec();
                let bypass_ok = l > 0 && (a.levels[l].is_storage() || l == a.compute_level());
                let n_by = if bypass_ok { 1 << keep.len() } else { 1 };
                for p in perms(dims.clone()) {
                    for mask in 0..n_by {
                        let mut m2 = m.clone();
                        m2.levels[l].permutation = p.clone();
                        let mut by = TensorSet::EMPTY;
                        for (i, t) in keep.iter().enumerate() {
                            if mask & (1 << i) != 0 {
                                by = by.with(*t);
                            }
                        }
                        m2.levels[l].bypass = by;
                        next.push(m2);
                    }
                }
            }
            partial = next;
        }
        out.extend(partial.into_iter().filter(|m| m.validate(w, a, PadMode::Strict).is_ok()));
    }
    out
}

/// Minimum total energy over [`all_mappings`].
pub fn brute_force_min_energy(a: &Architecture, lib: &Library, w: &Layer) -> Option<f64> {
    all_mappings(a, w)
        .iter()
        .map(|m| photon_core::evaluate(a, lib, w, m).unwrap().total_energy)
        .min_by(|x, y| x.total_cmp(y))
}

/// A small random architecture/layer pair suited to exhaustive search.
pub fn toy_search_instance<R: Rng>(rng: &mut R, lib: &Library) -> (Architecture, Layer) {
    let mut levels = vec![level("L0", "backing", 1, &ALL)];
    if rng.gen_bool(0.7) {
        let keeps: Vec<Tensor> = ALL.into_iter().filter(|_| rng.gen_bool(0.6)).collect();
        let mut b = level("L1", "buffer", rng.gen_range(1..=2), &keeps);
        b.capacity = Some(rng.gen_range(4..=32) * 8);
        b.multicast = rng.gen_bool(0.5);
        levels.push(b);
    }
    let mut c = level("MAC", "mac", rng.gen_range(1..=4), &[]);
    c.multicast = rng.gen_bool(0.5);
    c.reduce = rng.gen_bool(0.5);
    levels.push(c);
    let a = build_arch(&levels, lib);
    let pick = |rng: &mut R| [1, 2, 3, 4][rng.gen_range(0..4)];
    let layer = if rng.gen_bool(0.5) {
        Layer::fully_connected("fc", pick(rng), pick(rng), pick(rng))
    } else {
        Layer::conv("conv", 1, pick(rng), pick(rng), (pick(rng).min(3), 1), (pick(rng), 1), (1, 1))
    };
    (a, layer)
}
