use serde::{Deserialize, Serialize};

use crate::spec::{Tensor, TensorMap};

/// Value-granularity traffic of one tensor at one level.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorCounts {
    /// Values read out (to children, or for read-modify-write accumulation of outputs).
    pub reads: u64,
    /// Values written in from the parent.
    pub fills: u64,
    /// Partial outputs accumulated in from children.
    pub updates: u64,
    /// Partial outputs sent up to the parent.
    pub drains: u64,
}

impl TensorCounts {
    pub fn total(&self) -> u64 {
        self.reads + self.fills + self.updates + self.drains
    }
}

/// Traffic of one tensor across the edge below a level.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeCounts {
    /// Values crossing the edge (converted, if the edge changes domain).
    pub conversions: u64,
    /// Values the inner holder would receive with no temporal reuse.
    pub demand: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessCounts {
    /// Indexed by level, outermost first.
    pub levels: Vec<TensorMap<TensorCounts>>,
    /// `edges[e]` is the edge between level `e` and level `e + 1`.
    pub edges: Vec<TensorMap<EdgeCounts>>,
    /// MACs including padding.
    pub macs: u64,
    pub real_macs: u64,
    /// Temporal iterations of the whole nest.
    pub temporal_steps: u64,
}

impl AccessCounts {
    pub fn zeroed(levels: usize) -> Self {
        AccessCounts {
            levels: vec![TensorMap::default(); levels],
            edges: vec![TensorMap::default(); levels.saturating_sub(1)],
            macs: 0,
            real_macs: 0,
            temporal_steps: 0,
        }
    }

    pub fn level(&self, l: usize, t: Tensor) -> &TensorCounts {
        &self.levels[l][t]
    }

    pub fn conversions(&self, edge: usize, t: Tensor) -> u64 {
        self.edges[edge][t].conversions
    }

    /// Field-by-field differences, for diagnostics.
    pub fn diff(&self, other: &AccessCounts) -> Vec<String> {
        let mut out = Vec::new();
        for (l, (a, b)) in self.levels.iter().zip(&other.levels).enumerate() {
            for t in Tensor::ALL {
                if a[t] != b[t] {
                    out.push(format!("level {l} {t}: {:?} vs {:?}", a[t], b[t]));
                }
            }
        }
        for (e, (a, b)) in self.edges.iter().zip(&other.edges).enumerate() {
            for t in Tensor::ALL {
                if a[t] != b[t] {
                    out.push(format!("edge {e} {t}: {:?} vs {:?}", a[t], b[t]));
                }
            }
        }
        for (name, a, b) in [
            ("macs", self.macs, other.macs),
            ("real_macs", self.real_macs, other.real_macs),
            ("temporal_steps", self.temporal_steps, other.temporal_steps),
        ] {
            if a != b {
                out.push(format!("{name}: {a} vs {b}"));
            }
        }
        out
    }
}
