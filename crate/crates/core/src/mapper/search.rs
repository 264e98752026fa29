//! Mapping search: exhaustive enumeration, random sampling, and random
//! sampling with capacity-aware bypass selection and lower-bound pruning.

use std::cmp::Ordering;
use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::evaluator::{dynamic_energy_within, evaluate_counts, EvalError, EvaluationResult};
use crate::reuse::analyze;
use crate::spec::{Architecture, Dim, DimMap, Layer, Library, Mapping, PadMode, Tensor, TensorSet};

use super::factor::{enumerate_factorizations, enumerate_padded};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    Energy,
    Delay,
    EnergyDelayProduct,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Exhaustive,
    Random,
    #[default]
    PrunedRandom,
}

macro_rules! from_str_snake {
    ($ty:ty, $($s:literal => $v:expr),+) => {
        impl std::str::FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($s => Ok($v),)+
                    _ => Err(format!("unknown value `{s}`")),
                }
            }
        }
    };
}

from_str_snake!(Objective, "energy" => Objective::Energy, "delay" => Objective::Delay,
    "energy_delay_product" => Objective::EnergyDelayProduct, "edp" => Objective::EnergyDelayProduct);
from_str_snake!(Strategy, "exhaustive" => Strategy::Exhaustive, "random" => Strategy::Random,
    "pruned_random" => Strategy::PrunedRandom);

pub const DEFAULT_EXHAUSTIVE_BOUND: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub objective: Objective,
    /// Candidate draws for the random strategies.
    pub budget: u64,
    pub seed: u64,
    pub strategy: Strategy,
    pub pad_mode: PadMode,
    /// Leave the outermost level out of the energy objective.
    pub no_dram: bool,
    pub exhaustive_bound: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            objective: Objective::Energy,
            budget: 10_000,
            seed: 0,
            strategy: Strategy::PrunedRandom,
            pad_mode: PadMode::Strict,
            no_dram: false,
            exhaustive_bound: DEFAULT_EXHAUSTIVE_BOUND,
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SearchError {
    #[error("no valid mapping found")]
    NoValidMapping,
    #[error("mapping space has more than {bound} candidates; exhaustive search refused")]
    SpaceTooLarge { bound: u64 },
    #[error("search budget must be at least 1")]
    ZeroBudget,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchResult {
    pub best: Mapping,
    pub objective: f64,
    pub result: EvaluationResult,
    /// Distinct valid candidates evaluated.
    pub visited: u64,
}

#[derive(Clone, Debug)]
struct Candidate {
    value: f64,
    key: String,
    mapping: Mapping,
}

fn better(a: Candidate, b: Candidate) -> Candidate {
    match a.value.total_cmp(&b.value) {
        Ordering::Less => a,
        Ordering::Greater => b,
        Ordering::Equal => {
            if a.key <= b.key {
                a
            } else {
                b
            }
        }
    }
}

fn merge(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
    match (a, b) {
        (Some(a), Some(b)) => Some(better(a, b)),
        (a, None) => a,
        (None, b) => b,
    }
}

enum Outcome {
    Invalid,
    Pruned,
    Scored(f64),
}

/// Per-dim slot: level index and whether the factor is spatial.
#[derive(Copy, Clone, Debug)]
struct Slot {
    level: usize,
    spatial: bool,
}

/// The mapping space of one layer on one architecture.
pub struct Space<'a> {
    a: &'a Architecture,
    lib: &'a Library,
    w: &'a Layer,
    cfg: &'a SearchConfig,
    slots: DimMap<Vec<Slot>>,
    tuples: DimMap<Vec<Vec<u64>>>,
    /// Bypass choices per level (index `0` is never bypassed).
    bypass: Vec<Vec<TensorSet>>,
}

fn subsets(keeps: TensorSet) -> Vec<TensorSet> {
    let items = keeps.to_vec();
    (0..1u32 << items.len())
        .map(|mask| {
            items
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .fold(TensorSet::EMPTY, |s, (_, t)| s.with(*t))
        })
        .collect()
}

fn permutations(dims: &[Dim]) -> Vec<Vec<Dim>> {
    if dims.len() <= 1 {
        return vec![dims.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..dims.len() {
        let mut rest = dims.to_vec();
        let d = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, d);
            out.push(p);
        }
    }
    out
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

impl<'a> Space<'a> {
    pub fn new(a: &'a Architecture, lib: &'a Library, w: &'a Layer, cfg: &'a SearchConfig) -> Space<'a> {
        let slots = DimMap::from_fn(|d| {
            let mut v = Vec::new();
            for (l, lv) in a.levels.iter().enumerate() {
                if lv.is_storage() {
                    v.push(Slot { level: l, spatial: false });
                }
                if lv.allows_spatial(d) {
                    v.push(Slot { level: l, spatial: true });
                }
            }
            v
        });
        let filter_fanout = cfg.strategy != Strategy::Random;
        let tuples = DimMap::from_fn(|d| {
            let s: &Vec<Slot> = &slots[d];
            let mut ts = match cfg.pad_mode {
                PadMode::Strict => enumerate_factorizations(w.bound(d), s.len()),
                PadMode::Pad => {
                    let lim: Vec<Option<u64>> =
                        s.iter().map(|x| x.spatial.then_some(a.levels[x.level].fanout)).collect();
                    enumerate_padded(w.bound(d), &lim)
                }
            };
            if filter_fanout {
                ts.retain(|t| t.iter().zip(s).all(|(f, x)| !x.spatial || *f <= a.levels[x.level].fanout));
            }
            ts
        });
        let bypass = a
            .levels
            .iter()
            .enumerate()
            .map(|(l, lv)| {
                if l == 0 || !(lv.is_storage() || l == a.compute_level()) {
                    vec![TensorSet::EMPTY]
                } else {
                    subsets(lv.keeps)
                }
            })
            .collect();
        Space { a, lib, w, cfg, slots, tuples, bypass }
    }

    /// Mapping with the chosen factor tuples, canonical loop order and no bypass.
    fn assemble(&self, picks: &DimMap<usize>) -> Mapping {
        let mut m = Mapping::identity(self.a);
        for d in Dim::ALL {
            let t = &self.tuples[d][picks[d]];
            for (f, s) in t.iter().zip(&self.slots[d]) {
                if s.spatial {
                    m.levels[s.level].spatial[d] = *f;
                } else {
                    m.levels[s.level].temporal[d] = *f;
                }
            }
        }
        m
    }

    fn permutable(m: &Mapping, l: usize) -> Vec<Dim> {
        Dim::ALL.into_iter().filter(|d| m.levels[l].temporal[*d] > 1).collect()
    }

    fn fanout_ok(&self, spatial: &[u64]) -> bool {
        spatial.iter().zip(&self.a.levels).all(|(s, lv)| *s <= lv.fanout)
    }

    /// Factor-tuple choices whose joint spatial products fit every fanout,
    /// in lexicographic order of tuple indices.
    fn factor_combos(&self, limit: u64) -> Result<Vec<(DimMap<usize>, u64)>, SearchError> {
        let mut out = Vec::new();
        let mut total = 0u64;
        let mut picks = DimMap::splat(0usize);
        let mut spatial = vec![1u64; self.a.num_levels()];
        self.combo_rec(0, &mut picks, &mut spatial, &mut out, &mut total, limit)?;
        Ok(out)
    }

    fn combo_rec(
        &self,
        di: usize,
        picks: &mut DimMap<usize>,
        spatial: &mut Vec<u64>,
        out: &mut Vec<(DimMap<usize>, u64)>,
        total: &mut u64,
        limit: u64,
    ) -> Result<(), SearchError> {
        if di == Dim::ALL.len() {
            let m = self.assemble(picks);
            let mut weight = 1u64;
            for (l, opts) in self.bypass.iter().enumerate() {
                let perms = if self.a.levels[l].is_storage() { factorial(Self::permutable(&m, l).len()) } else { 1 };
                weight = weight.saturating_mul(perms).saturating_mul(opts.len() as u64);
            }
            *total = total.saturating_add(weight);
            if *total > limit {
                return Err(SearchError::SpaceTooLarge { bound: limit });
            }
            out.push((*picks, weight));
            return Ok(());
        }
        let d = Dim::ALL[di];
        for (i, t) in self.tuples[d].iter().enumerate() {
            let saved = spatial.clone();
            for (f, s) in t.iter().zip(&self.slots[d]) {
                if s.spatial {
                    spatial[s.level] *= f;
                }
            }
            if self.fanout_ok(spatial) {
                picks[d] = i;
                self.combo_rec(di + 1, picks, spatial, out, total, limit)?;
            }
            *spatial = saved;
        }
        Ok(())
    }

    /// Number of candidates exhaustive search would enumerate, if at most `limit`.
    pub fn size(&self, limit: u64) -> Option<u64> {
        self.factor_combos(limit).ok().map(|v| v.iter().map(|(_, w)| w).sum())
    }

    fn objective(&self, r: &EvaluationResult) -> f64 {
        let e = if self.cfg.no_dram { r.accelerator_energy } else { r.total_energy };
        match self.cfg.objective {
            Objective::Energy => e,
            Objective::Delay => r.seconds,
            Objective::EnergyDelayProduct => e * r.seconds,
        }
    }

    fn score(&self, m: &Mapping, limit: f64, prune: bool) -> Result<Outcome, EvalError> {
        if m.validate(self.w, self.a, self.cfg.pad_mode).is_err() {
            return Ok(Outcome::Invalid);
        }
        let counts = analyze(self.a, self.w, m);
        if prune && self.cfg.objective == Objective::Energy && limit.is_finite() {
            let from = usize::from(self.cfg.no_dram);
            if dynamic_energy_within(self.a, self.lib, self.w, &counts, from, limit)?.is_none() {
                return Ok(Outcome::Pruned);
            }
        }
        let r = evaluate_counts(self.a, self.lib, self.w, m, counts)?;
        Ok(Outcome::Scored(self.objective(&r)))
    }

    fn exhaustive(&self) -> Result<(Option<Candidate>, u64), SearchError> {
        let combos = self.factor_combos(self.cfg.exhaustive_bound)?;
        let results: Vec<Result<(Option<Candidate>, u64), EvalError>> = combos
            .par_iter()
            .map(|(picks, _)| {
                let base = self.assemble(picks);
                let mut best = None;
                let mut visited = 0;
                self.for_each_variant(&base, &mut |m| {
                    if let Outcome::Scored(v) = self.score(&m, f64::INFINITY, false)? {
                        visited += 1;
                        let key = m.canonical_key();
                        best = merge(best.take(), Some(Candidate { value: v, key, mapping: m }));
                    }
                    Ok(())
                })?;
                Ok((best, visited))
            })
            .collect();
        let mut best = None;
        let mut visited = 0;
        for r in results {
            let (b, v) = r?;
            best = merge(best, b);
            visited += v;
        }
        Ok((best, visited))
    }

    /// Every permutation and bypass variant of a factor assignment.
    fn for_each_variant(
        &self,
        base: &Mapping,
        f: &mut dyn FnMut(Mapping) -> Result<(), EvalError>,
    ) -> Result<(), EvalError> {
        let n = self.a.num_levels();
        let perms: Vec<Vec<Vec<Dim>>> = (0..n)
            .map(|l| {
                if self.a.levels[l].is_storage() {
                    permutations(&Self::permutable(base, l))
                } else {
                    vec![vec![]]
                }
            })
            .collect();
        let mut idx = vec![0usize; 2 * n];
        let radix: Vec<usize> = perms.iter().map(Vec::len).chain(self.bypass.iter().map(Vec::len)).collect();
        loop {
            let mut m = base.clone();
            for l in 0..n {
                m.levels[l].permutation = perms[l][idx[l]].clone();
                m.levels[l].bypass = self.bypass[l][idx[n + l]];
            }
            f(m)?;
            let mut k = 0;
            loop {
                if k == idx.len() {
                    return Ok(());
                }
                idx[k] += 1;
                if idx[k] < radix[k] {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng, capacity_aware: bool) -> Option<Mapping> {
        let mut picks = DimMap::splat(0usize);
        for d in Dim::ALL {
            let n = self.tuples[d].len();
            if n == 0 {
                return None;
            }
            picks[d] = rng.gen_range(0..n);
        }
        let mut m = self.assemble(&picks);
        for l in 0..self.a.num_levels() {
            if self.a.levels[l].is_storage() {
                let mut p = Self::permutable(&m, l);
                p.shuffle(rng);
                m.levels[l].permutation = p;
            }
        }
        for l in 0..self.a.num_levels() {
            let opts = &self.bypass[l];
            let choice = if capacity_aware && self.a.levels[l].is_storage() && l > 0 {
                let cap = self.a.levels[l].capacity_bits.unwrap_or(u64::MAX);
                let fits: Vec<TensorSet> = opts
                    .iter()
                    .copied()
                    .filter(|b| {
                        let held: u64 = Tensor::ALL
                            .iter()
                            .filter(|t| self.a.levels[l].keeps.contains(**t) && !b.contains(**t))
                            .map(|t| self.w.footprint(*t, &m.tile_extents(l)) * self.w.bits_of(*t) as u64)
                            .sum();
                        held <= cap
                    })
                    .collect();
                if fits.is_empty() {
                    return None;
                }
                fits[rng.gen_range(0..fits.len())]
            } else {
                opts[rng.gen_range(0..opts.len())]
            };
            m.levels[l].bypass = choice;
        }
        Some(m)
    }

    fn random(&self) -> Result<(Option<Candidate>, u64), SearchError> {
        let (best, visited, _) = self.random_phase(false, self.cfg.budget)?;
        Ok((best, visited))
    }

    fn random_phase(
        &self,
        prune: bool,
        budget: u64,
    ) -> Result<(Option<Candidate>, u64, HashSet<String>), SearchError> {
        const BATCH: u64 = 512;
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        let mut seen: HashSet<String> = HashSet::new();
        let mut best: Option<Candidate> = None;
        let mut visited = 0u64;
        let mut drawn = 0u64;
        while drawn < budget {
            let n = BATCH.min(budget - drawn);
            drawn += n;
            let mut batch = Vec::with_capacity(n as usize);
            for _ in 0..n {
                if let Some(m) = self.sample(&mut rng, prune) {
                    let key = m.canonical_key();
                    if seen.insert(key.clone()) {
                        batch.push((key, m));
                    }
                }
            }
            let limit = best.as_ref().map_or(f64::INFINITY, |c| c.value);
            let scored: Vec<Result<(Option<Candidate>, u64), EvalError>> = batch
                .into_par_iter()
                .map(|(key, m)| match self.score(&m, limit, prune)? {
                    Outcome::Invalid => Ok((None, 0)),
                    Outcome::Pruned => Ok((None, 1)),
                    Outcome::Scored(v) => Ok((Some(Candidate { value: v, key, mapping: m }), 1)),
                })
                .collect();
            for r in scored {
                let (c, v) = r?;
                best = merge(best, c);
                visited += v;
            }
        }
        Ok((best, visited, seen))
    }

    /// Single-step variations of `m`: one prime factor moved between two
    /// slots of a dim, a small dim's factors reassigned wholesale, one loop
    /// moved within a level's order, or one bypass toggled.
    fn neighbors(&self, m: &Mapping) -> Vec<Mapping> {
        const RETUPLE_LIMIT: usize = 64;
        let mut out = Vec::new();
        for d in Dim::ALL {
            if self.tuples[d].len() <= RETUPLE_LIMIT {
                for t in &self.tuples[d] {
                    let mut n = m.clone();
                    for (f, s) in t.iter().zip(&self.slots[d]) {
                        if s.spatial {
                            n.levels[s.level].spatial[d] = *f;
                        } else {
                            n.levels[s.level].temporal[d] = *f;
                        }
                    }
                    out.push(n);
                }
            }
            let slots = &self.slots[d];
            let get = |m: &Mapping, s: Slot| {
                if s.spatial {
                    m.levels[s.level].spatial[d]
                } else {
                    m.levels[s.level].temporal[d]
                }
            };
            for (i, &src) in slots.iter().enumerate() {
                let f = get(m, src);
                for p in prime_factors(f) {
                    for (j, &dst) in slots.iter().enumerate() {
                        if i == j {
                            continue;
                        }
                        let mut n = m.clone();
                        let set = |n: &mut Mapping, s: Slot, v: u64| {
                            if s.spatial {
                                n.levels[s.level].spatial[d] = v;
                            } else {
                                n.levels[s.level].temporal[d] = v;
                            }
                        };
                        set(&mut n, src, f / p);
                        let g = get(&n, dst);
                        set(&mut n, dst, g * p);
                        out.push(n);
                    }
                }
            }
        }
        for l in 0..self.a.num_levels() {
            if !self.a.levels[l].is_storage() {
                continue;
            }
            let order = Self::permutable(m, l);
            let order: Vec<Dim> = m.levels[l].loop_order().into_iter().filter(|d| order.contains(d)).collect();
            for i in 0..order.len() {
                for j in 0..order.len() {
                    if i != j {
                        let mut o = order.clone();
                        let d = o.remove(i);
                        o.insert(j, d);
                        let mut n = m.clone();
                        n.levels[l].permutation = o;
                        out.push(n);
                    }
                }
            }
        }
        for (l, opts) in self.bypass.iter().enumerate() {
            if opts.len() > 1 {
                for t in self.a.levels[l].keeps.iter() {
                    let mut n = m.clone();
                    let b = n.levels[l].bypass;
                    n.levels[l].bypass = if b.contains(t) { b.without(t) } else { b.with(t) };
                    out.push(n);
                }
            }
        }
        out
    }

    /// Steepest descent from `start` over `neighbors`, spending at most
    /// `budget` fresh candidates.
    fn refine(
        &self,
        start: Candidate,
        budget: u64,
        seen: &mut HashSet<String>,
    ) -> Result<(Candidate, u64), SearchError> {
        let mut best = start;
        let mut drawn = 0u64;
        let mut visited = 0u64;
        while drawn < budget {
            let mut batch = Vec::new();
            for n in self.neighbors(&best.mapping) {
                if drawn == budget {
                    break;
                }
                let key = n.canonical_key();
                if seen.insert(key.clone()) {
                    drawn += 1;
                    batch.push((key, n));
                }
            }
            if batch.is_empty() {
                break;
            }
            let limit = best.value;
            let scored: Vec<Result<(Option<Candidate>, u64), EvalError>> = batch
                .into_par_iter()
                .map(|(key, m)| match self.score(&m, limit, true)? {
                    Outcome::Invalid => Ok((None, 0)),
                    Outcome::Pruned => Ok((None, 1)),
                    Outcome::Scored(v) => Ok((Some(Candidate { value: v, key, mapping: m }), 1)),
                })
                .collect();
            let mut step: Option<Candidate> = None;
            for r in scored {
                let (c, v) = r?;
                step = merge(step, c);
                visited += v;
            }
            match step {
                Some(c) if c.value < best.value => best = c,
                _ => break,
            }
        }
        Ok((best, visited))
    }

    /// Random sampling on part of the budget, then local refinement of the
    /// incumbent on the rest.
    fn pruned_random(&self) -> Result<(Option<Candidate>, u64), SearchError> {
        let sample_budget = self.cfg.budget.div_ceil(2);
        let (best, visited, mut seen) = self.random_phase(true, sample_budget)?;
        match best {
            None => Ok((None, visited)),
            Some(b) => {
                let (b, v) = self.refine(b, self.cfg.budget - sample_budget, &mut seen)?;
                Ok((Some(b), visited + v))
            }
        }
    }
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            out.push(p);
            while n.is_multiple_of(p) {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Find the objective-minimal mapping of `w` on `a` among the candidates the
/// configured strategy visits.
pub fn search(a: &Architecture, lib: &Library, w: &Layer, cfg: &SearchConfig) -> Result<SearchResult, SearchError> {
    if cfg.budget == 0 {
        return Err(SearchError::ZeroBudget);
    }
    let space = Space::new(a, lib, w, cfg);
    let (best, visited) = match cfg.strategy {
        Strategy::Exhaustive => space.exhaustive()?,
        Strategy::Random => space.random()?,
        Strategy::PrunedRandom => space.pruned_random()?,
    };
    let best = best.ok_or(SearchError::NoValidMapping)?;
    let mapping = best.mapping.canonical();
    let result = evaluate_counts(a, lib, w, &mapping, analyze(a, w, &mapping))?;
    Ok(SearchResult { best: mapping, objective: best.value, result, visited })
}

/// Size of the exhaustive space, or `None` if it exceeds `limit`.
pub fn space_size(a: &Architecture, lib: &Library, w: &Layer, cfg: &SearchConfig, limit: u64) -> Option<u64> {
    let mut c = cfg.clone();
    c.strategy = Strategy::Exhaustive;
    Space::new(a, lib, w, &c).size(limit)
}
