//! Per-level tiling, loop order, spatial split and bypass choices, plus the
//! validity checks a mapping must pass before it can be analyzed.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::architecture::Architecture;
use super::component::ComponentClass;
use super::domain::{Dim, DimMap, Tensor, TensorSet};
use super::workload::Layer;

/// How factor products relate to layer bounds.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PadMode {
    /// Products must equal the bounds exactly.
    #[default]
    Strict,
    /// Products may exceed the bounds; the excess iterations are padding.
    Pad,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LevelMapping {
    pub level: String,
    pub temporal: DimMap<u64>,
    pub spatial: DimMap<u64>,
    /// Temporal loop order, outermost first. Dims not listed are innermost in
    /// canonical order.
    pub permutation: Vec<Dim>,
    pub bypass: TensorSet,
}

impl LevelMapping {
    pub fn identity(level: &str) -> Self {
        LevelMapping {
            level: level.to_string(),
            temporal: DimMap::ones(),
            spatial: DimMap::ones(),
            permutation: Vec::new(),
            bypass: TensorSet::EMPTY,
        }
    }

    /// Full loop order (outermost first) over all seven dims.
    pub fn loop_order(&self) -> Vec<Dim> {
        let mut order: Vec<Dim> = Vec::with_capacity(7);
        for d in &self.permutation {
            if !order.contains(d) {
                order.push(*d);
            }
        }
        for d in Dim::ALL {
            if !order.contains(&d) {
                order.push(d);
            }
        }
        order
    }

    /// Temporal loops with factor > 1, outermost first.
    pub fn temporal_loops(&self) -> impl Iterator<Item = (Dim, u64)> + '_ {
        self.loop_order()
            .into_iter()
            .map(|d| (d, self.temporal[d]))
            .filter(|(_, f)| *f > 1)
    }

    pub fn spatial_product(&self) -> u64 {
        self.spatial.product()
    }

    fn canonicalize(&mut self) {
        let mut perm: Vec<Dim> = self.loop_order().into_iter().filter(|d| self.temporal[*d] > 1).collect();
        perm.dedup();
        self.permutation = perm;
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mapping {
    pub levels: Vec<LevelMapping>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MappingError {
    #[error("factors of {0} do not multiply to its bound")]
    FactorMismatch(Dim),
    #[error("spatial factors exceed the fanout of level `{0}`")]
    FanoutExceeded(String),
    #[error("tiles kept at level `{level}` overflow its capacity when adding {tensor}")]
    CapacityExceeded { level: String, tensor: Tensor },
    #[error("level `{level}` may not be split spatially along {dim}")]
    DisallowedSpatial { level: String, dim: Dim },
    #[error("non-storage level `{0}` has temporal factors")]
    NonStorageTemporal(String),
    #[error("mapping levels do not match the architecture: {0}")]
    LevelMismatch(String),
    #[error("no storage level holds {0}")]
    NoHolder(Tensor),
    #[error("level `{level}` cannot bypass {tensor}: it does not keep it")]
    BadBypass { level: String, tensor: Tensor },
    #[error("outputs resident at `{0}` are split across copies along a reduced dimension")]
    UnreducedResidentOutputs(String),
    #[error("factor of zero")]
    ZeroFactor,
}

impl Mapping {
    /// All factors 1, one entry per architecture level.
    pub fn identity(a: &Architecture) -> Mapping {
        Mapping { levels: a.levels.iter().map(|l| LevelMapping::identity(&l.name)).collect() }
    }

    pub fn padded_bound(&self, d: Dim) -> u64 {
        self.levels.iter().map(|l| l.temporal[d] * l.spatial[d]).product()
    }

    pub fn padded_bounds(&self) -> DimMap<u64> {
        DimMap::from_fn(|d| self.padded_bound(d))
    }

    pub fn padded_macs(&self) -> u64 {
        self.padded_bounds().product()
    }

    /// Whether level `l` holds `t` under this mapping.
    pub fn holds(&self, a: &Architecture, l: usize, t: Tensor) -> bool {
        a.levels[l].keeps.contains(t) && !self.levels[l].bypass.contains(t)
    }

    /// Levels holding `t`, outermost first. The compute level is always the
    /// last entry, whether or not it registers the operand.
    pub fn holders(&self, a: &Architecture, t: Tensor) -> Vec<usize> {
        let last = a.compute_level();
        let mut hs: Vec<usize> = (0..last).filter(|&l| a.levels[l].is_storage() && self.holds(a, l, t)).collect();
        hs.push(last);
        hs
    }

    /// Extents of the tile held by one instance of level `h`.
    pub fn tile_extents(&self, h: usize) -> DimMap<u64> {
        DimMap::from_fn(|d| {
            let inner: u64 = self.levels[h + 1..].iter().map(|l| l.spatial[d] * l.temporal[d]).product();
            self.levels[h].temporal[d] * inner
        })
    }

    /// Extents of everything one instance of level `h` ever sees.
    pub fn resident_extents(&self, h: usize) -> DimMap<u64> {
        DimMap::from_fn(|d| {
            let outer_spatial: u64 = self.levels[..=h].iter().map(|l| l.spatial[d]).product();
            self.padded_bound(d) / outer_spatial
        })
    }

    /// Copies of level `h` actually used by this mapping.
    pub fn used_instances(&self, h: usize) -> u64 {
        self.levels[..=h].iter().map(LevelMapping::spatial_product).product()
    }

    pub fn canonicalize(&mut self) {
        for l in &mut self.levels {
            l.canonicalize();
        }
    }

    pub fn canonical(&self) -> Mapping {
        let mut m = self.clone();
        m.canonicalize();
        m
    }

    /// Stable textual identity; ties in the mapper break on this string.
    pub fn canonical_key(&self) -> String {
        let m = self.canonical();
        let mut s = String::new();
        for l in &m.levels {
            let _ = write!(s, "{}[T:", l.level);
            for d in l.loop_order() {
                if l.temporal[d] > 1 {
                    let _ = write!(s, "{}{}", d, l.temporal[d]);
                }
            }
            s.push_str("|S:");
            for (d, f) in l.spatial.iter() {
                if f > 1 {
                    let _ = write!(s, "{d}{f}");
                }
            }
            s.push_str("|B:");
            for t in l.bypass.iter() {
                s.push(t.name().as_bytes()[0] as char);
            }
            s.push(']');
        }
        s
    }

    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical_key().as_bytes());
        hex::encode(&hash[..8])
    }

    /// Check every mapping invariant against the architecture and layer.
    pub fn validate(&self, w: &Layer, a: &Architecture, mode: PadMode) -> Result<(), MappingError> {
        if self.levels.len() != a.num_levels() {
            return Err(MappingError::LevelMismatch(format!(
                "{} mapping levels for {} architecture levels",
                self.levels.len(),
                a.num_levels()
            )));
        }
        for (lm, lv) in self.levels.iter().zip(&a.levels) {
            if lm.level != lv.name {
                return Err(MappingError::LevelMismatch(format!("expected `{}`, found `{}`", lv.name, lm.level)));
            }
            if lm.temporal.0.contains(&0) || lm.spatial.0.contains(&0) {
                return Err(MappingError::ZeroFactor);
            }
        }
        for d in Dim::ALL {
            let p = self.padded_bound(d);
            let ok = match mode {
                PadMode::Strict => p == w.bound(d),
                PadMode::Pad => p >= w.bound(d),
            };
            if !ok {
                return Err(MappingError::FactorMismatch(d));
            }
        }
        for (lm, lv) in self.levels.iter().zip(&a.levels) {
            for (d, f) in lm.spatial.iter() {
                if f > 1 && !lv.allows_spatial(d) {
                    return Err(MappingError::DisallowedSpatial { level: lv.name.clone(), dim: d });
                }
            }
            if lm.spatial_product() > lv.fanout {
                return Err(MappingError::FanoutExceeded(lv.name.clone()));
            }
            if lv.class() != ComponentClass::Storage && lm.temporal.product() > 1 {
                return Err(MappingError::NonStorageTemporal(lv.name.clone()));
            }
            for t in lm.bypass.iter() {
                if !lv.keeps.contains(t) {
                    return Err(MappingError::BadBypass { level: lv.name.clone(), tensor: t });
                }
            }
        }
        for t in Tensor::ALL {
            let hs = self.holders(a, t);
            if hs.len() < 2 {
                return Err(MappingError::NoHolder(t));
            }
            if t == Tensor::Outputs {
                let first = hs[0];
                let scattered = self.levels[..=first]
                    .iter()
                    .any(|l| Dim::ALL.iter().any(|d| !t.is_relevant(*d) && l.spatial[*d] > 1));
                if scattered {
                    return Err(MappingError::UnreducedResidentOutputs(a.levels[first].name.clone()));
                }
            }
        }
        self.check_capacity(w, a)
    }

    fn check_capacity(&self, w: &Layer, a: &Architecture) -> Result<(), MappingError> {
        for (l, lv) in a.levels.iter().enumerate() {
            if !lv.is_storage() {
                continue;
            }
            let cap = lv.capacity_bits.unwrap_or(u64::MAX);
            let mut used: u64 = 0;
            for t in Tensor::ALL {
                if !self.holds(a, l, t) {
                    continue;
                }
                used = used.saturating_add(self.occupancy_bits(w, a, l, t));
                if used > cap {
                    return Err(MappingError::CapacityExceeded { level: lv.name.clone(), tensor: t });
                }
            }
        }
        Ok(())
    }

    /// Bits of `t` one instance of storage level `l` holds.
    pub fn occupancy_bits(&self, w: &Layer, a: &Architecture, l: usize, t: Tensor) -> u64 {
        let first = self.holders(a, t)[0] == l;
        let ext = if first { self.resident_extents(l) } else { self.tile_extents(l) };
        w.footprint(t, &ext).saturating_mul(w.bits_of(t) as u64)
    }
}

// ---- document form ----

#[derive(Clone, Debug, Serialize, Deserialize)]
struct LevelMappingDoc {
    level: String,
    #[serde(default)]
    temporal: BTreeMap<Dim, u64>,
    #[serde(default)]
    spatial: BTreeMap<Dim, u64>,
    #[serde(default)]
    permutation: Vec<Dim>,
    #[serde(default)]
    bypass: TensorSet,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub(crate) struct MappingDoc {
    levels: Vec<LevelMappingDoc>,
}

fn to_map(d: &DimMap<u64>) -> BTreeMap<Dim, u64> {
    d.iter().filter(|(_, f)| *f != 1).collect()
}

fn from_map(m: &BTreeMap<Dim, u64>) -> DimMap<u64> {
    DimMap::from_fn(|d| m.get(&d).copied().unwrap_or(1))
}

impl From<&Mapping> for MappingDoc {
    fn from(m: &Mapping) -> Self {
        let m = m.canonical();
        MappingDoc {
            levels: m
                .levels
                .iter()
                .map(|l| LevelMappingDoc {
                    level: l.level.clone(),
                    temporal: to_map(&l.temporal),
                    spatial: to_map(&l.spatial),
                    permutation: l.permutation.clone(),
                    bypass: l.bypass,
                })
                .collect(),
        }
    }
}

impl From<MappingDoc> for Mapping {
    fn from(d: MappingDoc) -> Self {
        Mapping {
            levels: d
                .levels
                .into_iter()
                .map(|l| LevelMapping {
                    level: l.level,
                    temporal: from_map(&l.temporal),
                    spatial: from_map(&l.spatial),
                    permutation: l.permutation,
                    bypass: l.bypass,
                })
                .collect(),
        }
    }
}

impl Serialize for Mapping {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        MappingDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mapping {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        MappingDoc::deserialize(d).map(Mapping::from)
    }
}

/// Network-level schedule: per-layer mappings plus batching and fusion choices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub batch_size: u64,
    /// Groups of consecutive layer indices whose intermediates stay on chip.
    pub fusion_groups: Vec<Vec<usize>>,
    pub layers: Vec<Mapping>,
}
