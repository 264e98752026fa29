//! DNN layers as bounded seven-dimensional loop nests.

use serde::{Deserialize, Serialize};

use super::domain::{Dim, DimMap, Tensor, TensorMap};
use super::error::SpecError;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv,
    FullyConnected,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bits {
    pub weights: u32,
    pub inputs: u32,
    pub outputs: u32,
}

impl Default for Bits {
    fn default() -> Self {
        Bits { weights: 8, inputs: 8, outputs: 8 }
    }
}

impl Bits {
    pub fn as_map(&self) -> TensorMap<u32> {
        TensorMap([self.weights, self.inputs, self.outputs])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "LayerDoc", into = "LayerDoc")]
pub struct Layer {
    pub name: String,
    pub kind: LayerKind,
    pub dims: DimMap<u64>,
    pub stride: (u64, u64),
    pub bits: Bits,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct LayerDoc {
    name: String,
    kind: LayerKind,
    dims: std::collections::BTreeMap<Dim, u64>,
    #[serde(default = "unit_stride")]
    stride: (u64, u64),
    #[serde(default)]
    bits: Bits,
}

fn unit_stride() -> (u64, u64) {
    (1, 1)
}

impl From<LayerDoc> for Layer {
    fn from(d: LayerDoc) -> Self {
        // Missing dims default to 1; zero is caught by `validate`.
        let dims = DimMap::from_fn(|dim| d.dims.get(&dim).copied().unwrap_or(1));
        Layer { name: d.name, kind: d.kind, dims, stride: d.stride, bits: d.bits }
    }
}

impl From<Layer> for LayerDoc {
    fn from(l: Layer) -> Self {
        LayerDoc {
            name: l.name,
            kind: l.kind,
            dims: l.dims.iter().collect(),
            stride: l.stride,
            bits: l.bits,
        }
    }
}

impl Layer {
    pub fn conv(name: &str, n: u64, k: u64, c: u64, rs: (u64, u64), pq: (u64, u64), stride: (u64, u64)) -> Layer {
        Layer {
            name: name.to_string(),
            kind: LayerKind::Conv,
            dims: DimMap([n, k, c, rs.0, rs.1, pq.0, pq.1]),
            stride,
            bits: Bits::default(),
        }
    }

    pub fn fully_connected(name: &str, n: u64, k: u64, c: u64) -> Layer {
        Layer {
            name: name.to_string(),
            kind: LayerKind::FullyConnected,
            dims: DimMap([n, k, c, 1, 1, 1, 1]),
            stride: (1, 1),
            bits: Bits::default(),
        }
    }

    pub fn macs(&self) -> u64 {
        self.dims.product()
    }

    pub fn bound(&self, d: Dim) -> u64 {
        self.dims[d]
    }

    /// Same layer with the batch dimension multiplied by `batch`.
    pub fn batched(&self, batch: u64) -> Layer {
        let mut l = self.clone();
        l.dims[Dim::N] *= batch;
        l
    }

    pub fn bits_of(&self, t: Tensor) -> u32 {
        self.bits.as_map()[t]
    }

    /// Number of distinct values of `t` for the given per-dimension extents.
    pub fn footprint(&self, t: Tensor, ext: &DimMap<u64>) -> u64 {
        footprint(t, ext, self.stride)
    }

    pub fn tensor_size(&self, t: Tensor) -> u64 {
        self.footprint(t, &self.dims)
    }

    pub fn validate(&self, root: &str) -> Result<(), SpecError> {
        for (d, v) in self.dims.iter() {
            if v == 0 {
                return Err(SpecError::BadBound { path: format!("{root}.dims.{d}"), detail: "bound must be at least 1".into() });
            }
        }
        if self.stride.0 == 0 || self.stride.1 == 0 {
            return Err(SpecError::BadBound { path: format!("{root}.stride"), detail: "stride must be at least 1".into() });
        }
        if self.bits.weights == 0 || self.bits.inputs == 0 || self.bits.outputs == 0 {
            return Err(SpecError::BadBound { path: format!("{root}.bits"), detail: "bit widths must be positive".into() });
        }
        let fc_shape = [Dim::R, Dim::S, Dim::P, Dim::Q].iter().all(|d| self.dims[*d] == 1);
        if (self.kind == LayerKind::FullyConnected) != fc_shape {
            return Err(SpecError::BadBound {
                path: format!("{root}.kind"),
                detail: "fully_connected layers are exactly those with R=S=P=Q=1".into(),
            });
        }
        Ok(())
    }
}

/// Sliding-window extent along one spatial axis: `p` output positions,
/// `r` filter taps, stride `s`.
pub fn window_extent(p: u64, r: u64, s: u64) -> u64 {
    if r >= s {
        (p - 1) * s + r
    } else {
        p * r
    }
}

pub fn footprint(t: Tensor, ext: &DimMap<u64>, stride: (u64, u64)) -> u64 {
    use Dim::*;
    match t {
        Tensor::Weights => ext[K] * ext[C] * ext[R] * ext[S],
        Tensor::Outputs => ext[N] * ext[K] * ext[P] * ext[Q],
        Tensor::Inputs => {
            ext[N] * ext[C] * window_extent(ext[P], ext[R], stride.0) * window_extent(ext[Q], ext[S], stride.1)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub name: String,
    pub layers: Vec<Layer>,
}

impl Workload {
    pub fn validate(&self, root: &str) -> Result<(), SpecError> {
        if self.layers.is_empty() {
            return Err(SpecError::InvalidStructure { path: format!("{root}.layers"), detail: "no layers".into() });
        }
        for (i, l) in self.layers.iter().enumerate() {
            l.validate(&format!("{root}.layers[{i}]"))?;
        }
        Ok(())
    }

    pub fn macs(&self) -> u64 {
        self.layers.iter().map(Layer::macs).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn brute_window(p: u64, r: u64, s: u64) -> u64 {
        let mut set = HashSet::new();
        for pi in 0..p {
            for ri in 0..r {
                set.insert(pi * s + ri);
            }
        }
        set.len() as u64
    }

    #[test]
    fn window_extent_matches_enumeration() {
        for p in 1..8 {
            for r in 1..8 {
                for s in 1..5 {
                    assert_eq!(window_extent(p, r, s), brute_window(p, r, s), "p={p} r={r} s={s}");
                }
            }
        }
    }

    #[test]
    fn macs_is_product() {
        let l = Layer::conv("c", 1, 4, 2, (3, 3), (4, 4), (1, 1));
        assert_eq!(l.macs(), 4 * 2 * 9 * 16);
        assert_eq!(l.tensor_size(Tensor::Inputs), 2 * 6 * 6);
        assert_eq!(l.tensor_size(Tensor::Weights), 72);
        assert_eq!(l.tensor_size(Tensor::Outputs), 64);
    }

    #[test]
    fn fc_shape_enforced() {
        let mut l = Layer::fully_connected("fc", 1, 2, 3);
        assert!(l.validate("l").is_ok());
        l.dims[Dim::P] = 2;
        assert!(matches!(l.validate("l"), Err(SpecError::BadBound { .. })));
        let mut c = Layer::conv("c", 1, 1, 1, (1, 1), (1, 1), (1, 1));
        assert!(c.validate("l").is_err());
        c.kind = LayerKind::FullyConnected;
        assert!(c.validate("l").is_ok());
    }

    #[test]
    fn zero_bound_names_path() {
        let mut l = Layer::fully_connected("fc", 1, 2, 3);
        l.dims[Dim::K] = 0;
        let err = l.validate("workload.layers[0]").unwrap_err();
        assert_eq!(err.path(), "workload.layers[0].dims.K");
    }
}
