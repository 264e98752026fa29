//! Signal domains, loop dimensions, tensors and small fixed-size maps over them.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Signal domain a component operates in.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    /// Digital electrical.
    DE,
    /// Analog electrical.
    AE,
    /// Digital optical. Representable, unused by the bundled architectures.
    DO,
    /// Analog optical.
    AO,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Domain::DE => "DE",
            Domain::AE => "AE",
            Domain::DO => "DO",
            Domain::AO => "AO",
        };
        f.write_str(s)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Read,
    Write,
    Update,
    Convert,
    Compute,
    Idle,
}

impl ActionKind {
    pub const ALL: [ActionKind; 6] = [
        ActionKind::Read,
        ActionKind::Write,
        ActionKind::Update,
        ActionKind::Convert,
        ActionKind::Compute,
        ActionKind::Idle,
    ];
}

/// The seven loop dimensions of a convolution layer.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dim {
    N,
    K,
    C,
    R,
    S,
    P,
    Q,
}

impl Dim {
    pub const ALL: [Dim; 7] = [Dim::N, Dim::K, Dim::C, Dim::R, Dim::S, Dim::P, Dim::Q];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Dim::N => "N",
            Dim::K => "K",
            Dim::C => "C",
            Dim::R => "R",
            Dim::S => "S",
            Dim::P => "P",
            Dim::Q => "Q",
        }
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dim {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dim::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| format!("unknown dimension `{s}`"))
    }
}

/// Operand and result tensors of a layer.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tensor {
    Weights,
    Inputs,
    Outputs,
}

impl Tensor {
    pub const ALL: [Tensor; 3] = [Tensor::Weights, Tensor::Inputs, Tensor::Outputs];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Whether `dim` indexes this tensor. Inputs are indexed through the
    /// sliding-window coordinates, so R and S count as relevant.
    pub fn is_relevant(self, dim: Dim) -> bool {
        use Dim::*;
        match self {
            Tensor::Weights => matches!(dim, K | C | R | S),
            Tensor::Inputs => matches!(dim, N | C | P | Q | R | S),
            Tensor::Outputs => matches!(dim, N | K | P | Q),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Tensor::Weights => "Weights",
            Tensor::Inputs => "Inputs",
            Tensor::Outputs => "Outputs",
        }
    }
}

impl fmt::Display for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Dense map keyed by [`Dim`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct DimMap<T>(pub [T; 7]);

impl<T: Copy> DimMap<T> {
    pub fn splat(value: T) -> Self {
        DimMap([value; 7])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Dim, T)> + '_ {
        Dim::ALL.into_iter().map(move |d| (d, self.0[d.index()]))
    }
}

impl<T> DimMap<T> {
    pub fn from_fn(mut f: impl FnMut(Dim) -> T) -> Self {
        DimMap(Dim::ALL.map(&mut f))
    }
}

impl DimMap<u64> {
    pub fn ones() -> Self {
        DimMap([1; 7])
    }

    pub fn product(&self) -> u64 {
        self.0.iter().product()
    }
}

impl<T> Index<Dim> for DimMap<T> {
    type Output = T;
    fn index(&self, d: Dim) -> &T {
        &self.0[d.index()]
    }
}

impl<T> IndexMut<Dim> for DimMap<T> {
    fn index_mut(&mut self, d: Dim) -> &mut T {
        &mut self.0[d.index()]
    }
}

/// Dense map keyed by [`Tensor`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct TensorMap<T>(pub [T; 3]);

impl<T: Copy> TensorMap<T> {
    pub fn splat(value: T) -> Self {
        TensorMap([value; 3])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Tensor, T)> + '_ {
        Tensor::ALL.into_iter().map(move |t| (t, self.0[t.index()]))
    }
}

impl<T> TensorMap<T> {
    pub fn from_fn(f: impl FnMut(Tensor) -> T) -> Self {
        TensorMap(Tensor::ALL.map(f))
    }
}

impl<T> Index<Tensor> for TensorMap<T> {
    type Output = T;
    fn index(&self, t: Tensor) -> &T {
        &self.0[t.index()]
    }
}

impl<T> IndexMut<Tensor> for TensorMap<T> {
    fn index_mut(&mut self, t: Tensor) -> &mut T {
        &mut self.0[t.index()]
    }
}

/// A subset of {Weights, Inputs, Outputs}.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct TensorSet(u8);

impl TensorSet {
    pub const EMPTY: TensorSet = TensorSet(0);
    pub const ALL: TensorSet = TensorSet(0b111);

    pub fn contains(self, t: Tensor) -> bool {
        self.0 & (1 << t.index()) != 0
    }

    pub fn with(self, t: Tensor) -> Self {
        TensorSet(self.0 | (1 << t.index()))
    }

    pub fn without(self, t: Tensor) -> Self {
        TensorSet(self.0 & !(1 << t.index()))
    }

    pub fn complement(self) -> Self {
        TensorSet(!self.0 & 0b111)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Tensor> {
        Tensor::ALL.into_iter().filter(move |t| self.contains(*t))
    }

    pub fn to_vec(self) -> Vec<Tensor> {
        self.iter().collect()
    }
}

impl FromIterator<Tensor> for TensorSet {
    fn from_iter<I: IntoIterator<Item = Tensor>>(iter: I) -> Self {
        iter.into_iter().fold(TensorSet::EMPTY, TensorSet::with)
    }
}

impl Serialize for TensorSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_vec().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TensorSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = Vec::<Tensor>::deserialize(deserializer)?;
        Ok(v.into_iter().collect())
    }
}
