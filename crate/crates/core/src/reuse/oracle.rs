//! Brute-force loop-nest interpreter. Walks every temporal iteration,
//! tracks the tile held by every copy of every holder, materializes tile
//! contents as coordinate sets and counts each event one by one. It shares
//! no counting formulas with [`super::analyze`].

use std::collections::{HashMap, HashSet};

use crate::spec::{Architecture, Dim, DimMap, Layer, Mapping, Tensor};

use super::counts::AccessCounts;

pub const DEFAULT_ORACLE_CAP: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("{macs} MACs exceed the oracle cap of {cap}")]
    OracleCapExceeded { macs: u64, cap: u64 },
}

#[derive(Clone, Copy, Debug)]
struct Loop {
    level: usize,
    dim: Dim,
    factor: u64,
    /// Index weight within its dimension.
    weight: u64,
}

type Coord = [u64; 4];
/// Relevant per-dim origins, plus a step stamp for unregistered operands.
type TileId = [u64; 8];

fn coord(t: Tensor, idx: &DimMap<u64>, stride: (u64, u64)) -> Coord {
    use Dim::*;
    match t {
        Tensor::Weights => [idx[K], idx[C], idx[R], idx[S]],
        Tensor::Outputs => [idx[N], idx[K], idx[P], idx[Q]],
        Tensor::Inputs => [idx[N], idx[C], idx[P] * stride.0 + idx[R], idx[Q] * stride.1 + idx[S]],
    }
}

/// Every coordinate of `t` touched by the box `[origin, origin + ext)`.
fn materialize(t: Tensor, origin: &DimMap<u64>, ext: &DimMap<u64>, stride: (u64, u64)) -> HashSet<Coord> {
    let dims: Vec<Dim> = Dim::ALL.into_iter().filter(|d| t.is_relevant(*d)).collect();
    let mut set = HashSet::new();
    let mut idx = *origin;
    let mut off = vec![0u64; dims.len()];
    loop {
        for (i, d) in dims.iter().enumerate() {
            idx[*d] = origin[*d] + off[i];
        }
        set.insert(coord(t, &idx, stride));
        let mut i = 0;
        loop {
            if i == dims.len() {
                return set;
            }
            off[i] += 1;
            if off[i] < ext[dims[i]] {
                break;
            }
            off[i] = 0;
            i += 1;
        }
    }
}

struct Nest {
    spatial: Vec<Loop>,
    temporal: Vec<Loop>,
}

fn build_nest(m: &Mapping) -> Nest {
    let mut loops: Vec<(bool, usize, Dim, u64)> = Vec::new();
    for (l, lm) in m.levels.iter().enumerate() {
        for d in Dim::ALL {
            if lm.spatial[d] > 1 {
                loops.push((true, l, d, lm.spatial[d]));
            }
        }
        for d in lm.loop_order() {
            if lm.temporal[d] > 1 {
                loops.push((false, l, d, lm.temporal[d]));
            }
        }
    }
    // Index weight: product of the factors of same-dim loops nested inside.
    let mut weights = vec![0u64; loops.len()];
    for i in 0..loops.len() {
        weights[i] = loops[i + 1..].iter().filter(|x| x.2 == loops[i].2).map(|x| x.3).product();
    }
    let mut nest = Nest { spatial: Vec::new(), temporal: Vec::new() };
    for (i, (sp, level, dim, factor)) in loops.into_iter().enumerate() {
        let lp = Loop { level, dim, factor, weight: weights[i] };
        if sp {
            nest.spatial.push(lp);
        } else {
            nest.temporal.push(lp);
        }
    }
    nest
}

/// All index vectors of `loops`.
fn odometer(loops: &[Loop]) -> Vec<Vec<u64>> {
    let total: u64 = loops.iter().map(|l| l.factor).product();
    let mut out = Vec::with_capacity(total as usize);
    let mut cur = vec![0u64; loops.len()];
    for _ in 0..total {
        out.push(cur.clone());
        for i in (0..loops.len()).rev() {
            cur[i] += 1;
            if cur[i] < loops[i].factor {
                break;
            }
            cur[i] = 0;
        }
    }
    out
}

struct Session {
    id: TileId,
    coords: HashSet<Coord>,
}

struct HolderSim {
    tensor: Tensor,
    level: usize,
    parent: usize,
    registered: bool,
    /// Number of spatial loops selecting a copy of this holder.
    n_spatial: usize,
    /// Number of temporal loops above this holder.
    n_temporal: usize,
    ext: DimMap<u64>,
    current: HashMap<Vec<u64>, Session>,
}

struct Sim<'a> {
    a: &'a Architecture,
    nest: Nest,
    counts: AccessCounts,
    /// Outputs written per copy of each output holder in its current session.
    written: HashMap<(usize, Vec<u64>), HashSet<Coord>>,
}

impl Sim<'_> {
    fn tile_id(&self, h: &HolderSim, sidx: &[u64], tidx: &[u64], step: u64) -> TileId {
        let mut id = [0u64; 8];
        for (i, lp) in self.nest.spatial.iter().enumerate().take(h.n_spatial) {
            if h.tensor.is_relevant(lp.dim) {
                id[lp.dim.index()] += sidx[i] * lp.weight;
            }
        }
        for (i, lp) in self.nest.temporal.iter().enumerate().take(h.n_temporal) {
            if h.tensor.is_relevant(lp.dim) {
                id[lp.dim.index()] += tidx[i] * lp.weight;
            }
        }
        if !h.registered {
            id[7] = step;
        }
        id
    }

    /// Copy coordinates with the loops whose copies share content erased.
    fn group_key(&self, h: &HolderSim, outer: usize, sidx: &[u64], id: &TileId) -> (Vec<u64>, TileId) {
        let flag_set = |lvl: usize| match h.tensor {
            Tensor::Outputs => self.a.levels[lvl].may_reduce,
            _ => self.a.levels[lvl].may_multicast,
        };
        let key = self.nest.spatial[..h.n_spatial]
            .iter()
            .zip(sidx)
            .map(|(lp, &i)| {
                let shared = lp.level > outer && lp.level <= h.level && flag_set(lp.level) && !h.tensor.is_relevant(lp.dim);
                if shared {
                    u64::MAX
                } else {
                    i
                }
            })
            .collect();
        (key, *id)
    }

    fn origin(id: &TileId) -> DimMap<u64> {
        DimMap::from_fn(|d| id[d.index()])
    }

    /// Send a finished output session to its parent.
    fn drain(&mut self, h: &HolderSim, events: &[(Vec<u64>, Session)]) {
        let t = h.tensor;
        let mut upstream: HashSet<(Vec<u64>, TileId)> = HashSet::new();
        for (sidx, sess) in events {
            self.counts.levels[h.level][t].drains += sess.coords.len() as u64;
            let key = self.group_key(h, h.parent, sidx, &sess.id);
            if upstream.insert(key) {
                let parent_copy: Vec<u64> = sidx[..self.parent_spatial(h.parent)].to_vec();
                let set = self.written.entry((h.parent, parent_copy)).or_default();
                for c in &sess.coords {
                    self.counts.levels[h.parent][t].updates += 1;
                    if !set.insert(*c) {
                        self.counts.levels[h.parent][t].reads += 1;
                    }
                }
            }
        }
        for e in h.parent..h.level {
            let mut seen: HashSet<(Vec<u64>, TileId)> = HashSet::new();
            for (sidx, sess) in events {
                if seen.insert(self.group_key(h, e, sidx, &sess.id)) {
                    self.counts.edges[e][t].conversions += sess.coords.len() as u64;
                }
            }
        }
    }

    fn parent_spatial(&self, parent: usize) -> usize {
        self.nest.spatial.iter().filter(|l| l.level <= parent).count()
    }
}

/// Execute the mapped loop nest concretely and count every event.
pub fn simulate(a: &Architecture, w: &Layer, m: &Mapping, cap: u64) -> Result<AccessCounts, OracleError> {
    let macs = m.padded_macs();
    if macs > cap {
        return Err(OracleError::OracleCapExceeded { macs, cap });
    }
    let n = a.num_levels();
    let last = n - 1;
    let nest = build_nest(m);
    let mut sim = Sim { a, nest, counts: AccessCounts::zeroed(n), written: HashMap::new() };

    let mut holders: Vec<HolderSim> = Vec::new();
    for t in Tensor::ALL {
        let hs = m.holders(a, t);
        for pair in hs.windows(2) {
            let h = pair[1];
            let ext = if h == last { DimMap::ones() } else { m.tile_extents(h) };
            holders.push(HolderSim {
                tensor: t,
                level: h,
                parent: pair[0],
                registered: h != last || m.holds(a, last, t),
                n_spatial: sim.nest.spatial.iter().filter(|l| l.level <= h).count(),
                n_temporal: sim.nest.temporal.iter().filter(|l| l.level < h).count(),
                ext,
                current: HashMap::new(),
            });
        }
    }
    // Innermost holders first, so partial outputs reach a parent before the
    // parent itself drains.
    holders.sort_by_key(|h| std::cmp::Reverse(h.level));

    let spatial_points = odometer(&sim.nest.spatial);
    let temporal_points = odometer(&sim.nest.temporal);
    let copies: Vec<Vec<Vec<u64>>> = holders
        .iter()
        .map(|h| {
            let mut v: Vec<Vec<u64>> = spatial_points.iter().map(|p| p[..h.n_spatial].to_vec()).collect();
            v.dedup();
            v
        })
        .collect();

    let mut prev: Option<&Vec<u64>> = None;
    for (step, tidx) in temporal_points.iter().enumerate() {
        let changed_at = match prev {
            None => 0,
            Some(p) => p.iter().zip(tidx).position(|(x, y)| x != y).unwrap_or(tidx.len()),
        };
        prev = Some(tidx);

        // Which copies see a new tile at this step.
        let mut pending: Vec<Vec<(Vec<u64>, TileId)>> = vec![Vec::new(); holders.len()];
        for (hi, h) in holders.iter().enumerate() {
            if step > 0 && changed_at >= h.n_temporal && h.registered {
                continue;
            }
            for sidx in &copies[hi] {
                let id = sim.tile_id(h, sidx, tidx, step as u64);
                let same = h.current.get(sidx).is_some_and(|s| s.id == id);
                if !same {
                    pending[hi].push((sidx.clone(), id));
                }
            }
        }
        // Drains of ending output sessions, innermost first.
        for hi in 0..holders.len() {
            if holders[hi].tensor != Tensor::Outputs || pending[hi].is_empty() {
                continue;
            }
            let mut h = std::mem::replace(&mut holders[hi], placeholder());
            let ended: Vec<(Vec<u64>, Session)> = pending[hi]
                .iter()
                .filter_map(|(sidx, _)| h.current.remove(sidx).map(|s| (sidx.clone(), s)))
                .collect();
            if !ended.is_empty() {
                for (sidx, _) in &ended {
                    sim.written.remove(&(h.level, sidx.clone()));
                }
                sim.drain(&h, &ended);
            }
            holders[hi] = std::mem::replace(&mut h, placeholder());
        }
        // Loads, outermost first.
        for hi in (0..holders.len()).rev() {
            let h = &holders[hi];
            let t = h.tensor;
            let mut loads: Vec<(Vec<u64>, Session)> = Vec::new();
            for (sidx, id) in &pending[hi] {
                let coords = materialize(t, &Sim::origin(id), &h.ext, w.stride);
                loads.push((sidx.clone(), Session { id: *id, coords }));
            }
            if t != Tensor::Outputs {
                let mut upstream: HashSet<(Vec<u64>, TileId)> = HashSet::new();
                for (sidx, s) in &loads {
                    let size = s.coords.len() as u64;
                    sim.counts.levels[h.level][t].fills += size;
                    if upstream.insert(sim.group_key(h, h.parent, sidx, &s.id)) {
                        sim.counts.levels[h.parent][t].reads += size;
                    }
                }
                for e in h.parent..h.level {
                    let mut seen: HashSet<(Vec<u64>, TileId)> = HashSet::new();
                    for (sidx, s) in &loads {
                        if seen.insert(sim.group_key(h, e, sidx, &s.id)) {
                            sim.counts.edges[e][t].conversions += s.coords.len() as u64;
                        }
                    }
                }
            }
            let h = &mut holders[hi];
            for (sidx, s) in loads {
                h.current.insert(sidx, s);
            }
            // Every copy requests its tile whenever the loops above it move.
            if step == 0 || changed_at < h.n_temporal || !h.registered {
                let requested: u64 = copies[hi].iter().map(|c| h.current[c].coords.len() as u64).sum();
                for e in h.parent..h.level {
                    sim.counts.edges[e][t].demand += requested;
                }
            }
        }
        // MACs at this step across every compute copy.
        for sidx in &spatial_points {
            sim.counts.macs += 1;
            let mut idx = DimMap::splat(0u64);
            for (i, lp) in sim.nest.spatial.iter().enumerate() {
                idx[lp.dim] += sidx[i] * lp.weight;
            }
            for (i, lp) in sim.nest.temporal.iter().enumerate() {
                idx[lp.dim] += tidx[i] * lp.weight;
            }
            if Dim::ALL.iter().all(|d| idx[*d] < w.bound(*d)) {
                sim.counts.real_macs += 1;
            }
        }
        sim.counts.temporal_steps += 1;
    }
    // Flush the last output sessions.
    for hi in 0..holders.len() {
        if holders[hi].tensor != Tensor::Outputs {
            continue;
        }
        let mut h = std::mem::replace(&mut holders[hi], placeholder());
        let mut ended: Vec<(Vec<u64>, Session)> = h.current.drain().collect();
        ended.sort_by(|x, y| x.0.cmp(&y.0));
        sim.drain(&h, &ended);
        holders[hi] = h;
    }
    for t in Tensor::ALL {
        sim.counts.levels[last][t].reads = sim.counts.macs;
    }
    Ok(sim.counts)
}

fn placeholder() -> HolderSim {
    HolderSim {
        tensor: Tensor::Weights,
        level: 0,
        parent: 0,
        registered: true,
        n_spatial: 0,
        n_temporal: 0,
        ext: DimMap::ones(),
        current: HashMap::new(),
    }
}

/// Occupancy check by materializing the tile every storage copy holds.
/// Returns the first (level, tensor) that overflows.
pub fn oracle_capacity(a: &Architecture, w: &Layer, m: &Mapping) -> Result<(), (usize, Tensor)> {
    for (l, lv) in a.levels.iter().enumerate() {
        if !lv.is_storage() {
            continue;
        }
        let cap = lv.capacity_bits.unwrap_or(u64::MAX);
        let mut used = 0u64;
        for t in Tensor::ALL {
            if !m.holds(a, l, t) {
                continue;
            }
            let first = m.holders(a, t)[0] == l;
            let ext = if first { m.resident_extents(l) } else { m.tile_extents(l) };
            let n = materialize(t, &DimMap::splat(0), &ext, w.stride).len() as u64;
            used += n * w.bits_of(t) as u64;
            if used > cap {
                return Err((l, t));
            }
        }
    }
    Ok(())
}
