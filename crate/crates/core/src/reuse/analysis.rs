//! Closed-form access counting.
//!
//! The loop nest is, outermost first, `S0 T0 S1 T1 ... S(L-1) T(L-1)` where
//! `Sl` are level `l`'s spatial loops (selecting one of its copies) and `Tl`
//! its temporal loops. A copy of level `h` holds the tile spanned by every
//! loop inside `Sh`. Its tile changes each time a relevant temporal loop
//! above it advances; irrelevant loops inside the innermost relevant one are
//! collapsed by temporal reuse.

use crate::spec::{Architecture, Dim, Layer, Mapping, Tensor};

use super::counts::AccessCounts;

/// Temporal loop factors above level `h`, outermost first.
pub(crate) fn temporal_above(m: &Mapping, h: usize) -> Vec<(Dim, u64)> {
    m.levels[..h].iter().flat_map(|l| l.temporal_loops().collect::<Vec<_>>()).collect()
}

/// Tile changes per copy, given the loops above and the tensor.
pub(crate) fn tile_loads(loops: &[(Dim, u64)], t: Tensor) -> u64 {
    match loops.iter().rposition(|(d, _)| t.is_relevant(*d)) {
        Some(last) => loops[..=last].iter().map(|(_, f)| f).product(),
        None => 1,
    }
}

/// Product of spatial factors on dims irrelevant to `t` at levels in
/// `(outer, inner]` whose `flag` is set.
pub(crate) fn shared_copies(
    a: &Architecture,
    m: &Mapping,
    t: Tensor,
    outer: usize,
    inner: usize,
    flag: impl Fn(&crate::spec::Level) -> bool,
) -> u64 {
    (outer + 1..=inner)
        .filter(|&j| flag(&a.levels[j]))
        .map(|j| {
            Dim::ALL
                .iter()
                .filter(|d| !t.is_relevant(**d))
                .map(|d| m.levels[j].spatial[*d])
                .product::<u64>()
        })
        .product()
}

pub(crate) fn sharing_flag(t: Tensor) -> fn(&crate::spec::Level) -> bool {
    match t {
        Tensor::Outputs => |l| l.may_reduce,
        _ => |l| l.may_multicast,
    }
}

/// Analytical access, conversion and MAC counts. The mapping must be valid.
pub fn analyze(a: &Architecture, w: &Layer, m: &Mapping) -> AccessCounts {
    let n = a.num_levels();
    let last = n - 1;
    let mut counts = AccessCounts::zeroed(n);
    counts.macs = m.padded_macs();
    counts.real_macs = w.macs();
    counts.temporal_steps = m.levels.iter().map(|l| l.temporal.product()).product();

    for t in Tensor::ALL {
        let holders = m.holders(a, t);
        let flag = sharing_flag(t);
        // Values first written into each holder's sessions (outputs only).
        let mut first_writes = vec![0u64; n];

        let first = holders[0];
        first_writes[first] = m.used_instances(first) * w.footprint(t, &m.resident_extents(first));

        for pair in holders.windows(2) {
            let (parent, h) = (pair[0], pair[1]);
            let loops = temporal_above(m, h);
            let all: u64 = loops.iter().map(|(_, f)| f).product();
            let registered = h != last || m.holds(a, last, t);
            let loads = if registered { tile_loads(&loops, t) } else { all };
            let tile = if h == last { 1 } else { w.footprint(t, &m.tile_extents(h)) };
            let inst = m.used_instances(h);
            let delivered = inst * loads * tile;
            first_writes[h] = delivered;

            let upstream = delivered / shared_copies(a, m, t, parent, h, flag);
            match t {
                Tensor::Outputs => {
                    counts.levels[h][t].drains = delivered;
                    counts.levels[parent][t].updates += upstream;
                }
                _ => {
                    counts.levels[h][t].fills = delivered;
                    counts.levels[parent][t].reads += upstream;
                }
            }
            for e in parent..h {
                let edge = &mut counts.edges[e][t];
                edge.conversions = delivered / shared_copies(a, m, t, e, h, flag);
                edge.demand = inst * all * tile;
            }
        }
        if t == Tensor::Outputs {
            for &h in &holders[..holders.len() - 1] {
                let c = &mut counts.levels[h][t];
                c.reads = c.updates - first_writes[h];
            }
        }
        counts.levels[last][t].reads = counts.macs;
    }
    counts
}
