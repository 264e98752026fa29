use serde::{Deserialize, Serialize};

use crate::spec::{Architecture, Mapping, Tensor, TensorMap};

use super::analysis::{shared_copies, sharing_flag, temporal_above, tile_loads};
use super::counts::AccessCounts;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeReuse {
    /// Inner copies served by one crossing value.
    pub spatial_multicast: u64,
    /// Consecutive uses of a crossed value held by the inner holder.
    pub temporal_reuse: u64,
}

impl Default for EdgeReuse {
    fn default() -> Self {
        EdgeReuse { spatial_multicast: 1, temporal_reuse: 1 }
    }
}

/// Per edge and tensor reuse, such that
/// `conversions * spatial_multicast * temporal_reuse == demand`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReuseFactor {
    pub edges: Vec<TensorMap<EdgeReuse>>,
}

impl ReuseFactor {
    pub fn get(&self, edge: usize, t: Tensor) -> EdgeReuse {
        self.edges[edge][t]
    }

    /// Check the reuse identity against `counts`.
    pub fn consistent_with(&self, counts: &AccessCounts) -> bool {
        self.edges.iter().zip(&counts.edges).all(|(r, c)| {
            Tensor::ALL.iter().all(|&t| {
                c[t].conversions * r[t].spatial_multicast * r[t].temporal_reuse == c[t].demand
            })
        })
    }
}

/// Spatial multicast and temporal reuse across every edge. Spatial
/// multicast is the product of spatial factors on dims absent from the
/// tensor below the edge (where the level shares content); temporal reuse is
/// the product of the collapsed temporal loops above the inner holder.
pub fn reuse_factors(_counts: &AccessCounts, a: &Architecture, m: &Mapping) -> ReuseFactor {
    let n = a.num_levels();
    let last = n - 1;
    let mut edges = vec![TensorMap::splat(EdgeReuse::default()); n - 1];
    for t in Tensor::ALL {
        let flag = sharing_flag(t);
        for pair in m.holders(a, t).windows(2) {
            let (parent, h) = (pair[0], pair[1]);
            let loops = temporal_above(m, h);
            let all: u64 = loops.iter().map(|(_, f)| f).product();
            let registered = h != last || m.holds(a, last, t);
            let loads = if registered { tile_loads(&loops, t) } else { all };
            for (e, edge) in edges.iter_mut().enumerate().take(h).skip(parent) {
                edge[t] = EdgeReuse {
                    spatial_multicast: shared_copies(a, m, t, e, h, flag),
                    temporal_reuse: all / loads,
                };
            }
        }
    }
    ReuseFactor { edges }
}
