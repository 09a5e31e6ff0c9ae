//! Block-model simulator for dynamic one-dimensional range indexes.
//!
//! A structure maintains a memory buffer of at most `M` keys and a set of
//! disk blocks of at most `B` keys each; queries are only charged for the
//! blocks covering their answer. Three policies are provided:
//!
//! * `SortedRunBaseline` — a single sorted run, rewriting one block per
//!   insert and splitting on overflow; no buffering.
//! * `LsmLogarithmic` — the logarithmic method: levels of capacity
//!   `ell^i * M`; a flush rebuilds the first non-full level from the memory
//!   payload plus every level below it.
//! * `SteppedMerge` — the memory buffer flushes as an independent level-1
//!   run; `ell` runs at a level merge into one run a level up, cascading.
//!
//! Costs are charged per Definition-style transition accounting: the number
//! of blocks (and the keys inside them) differing between consecutive
//! snapshots.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cover::min_cover;

pub type Key = u64;
/// A disk block: sorted keys, at most `B` of them.
pub type Block = Vec<Key>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Structure {
    SortedRunBaseline,
    LsmLogarithmic,
    SteppedMerge,
}

impl Structure {
    pub fn name(&self) -> &'static str {
        match self {
            Structure::SortedRunBaseline => "sorted_run",
            Structure::LsmLogarithmic => "lsm",
            Structure::SteppedMerge => "stepped_merge",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sorted_run" | "sorted_run_baseline" | "baseline" => Some(Structure::SortedRunBaseline),
            "lsm" | "lsm_logarithmic" => Some(Structure::LsmLogarithmic),
            "stepped_merge" | "stepped" => Some(Structure::SteppedMerge),
            _ => None,
        }
    }

    pub const ALL: [Structure; 3] = [
        Structure::SortedRunBaseline,
        Structure::LsmLogarithmic,
        Structure::SteppedMerge,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexConfig {
    pub structure: Structure,
    /// Block capacity B.
    pub block_capacity: usize,
    /// Memory capacity M.
    pub memory_capacity: usize,
    /// Fanout parameter ell, `2 <= ell <= B`.
    pub fanout: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("fanout must satisfy 2 <= ell <= B, got ell = {ell}, B = {b}")]
    BadFanout { ell: usize, b: usize },
    #[error("block capacity must be at least 1")]
    BadBlockCapacity,
    #[error("{0:?} requires a memory buffer (M >= 1)")]
    NeedsMemory(Structure),
    #[error("duplicate key {0}")]
    DuplicateKey(Key),
}

impl IndexConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.block_capacity == 0 {
            return Err(SimError::BadBlockCapacity);
        }
        if self.fanout < 2 || self.fanout > self.block_capacity {
            return Err(SimError::BadFanout {
                ell: self.fanout,
                b: self.block_capacity,
            });
        }
        if self.structure != Structure::SortedRunBaseline && self.memory_capacity == 0 {
            return Err(SimError::NeedsMemory(self.structure));
        }
        Ok(())
    }
}

/// One exported round snapshot. Field order keeps the JSON keys sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub blocks: Vec<Vec<Key>>,
    pub memory: Vec<Key>,
    pub round: u64,
}

/// Transition cost between two snapshots recomputed from scratch, as
/// (blocks differing, keys inside differing blocks).
pub fn snapshot_transition_cost(a: &SnapshotRecord, b: &SnapshotRecord) -> (u64, u64) {
    let left: BTreeSet<&Vec<Key>> = a.blocks.iter().collect();
    let right: BTreeSet<&Vec<Key>> = b.blocks.iter().collect();
    let mut blocks = 0u64;
    let mut elements = 0u64;
    for blk in left.symmetric_difference(&right) {
        blocks += 1;
        elements += blk.len() as u64;
    }
    (blocks, elements)
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct IndexMetrics {
    pub structure: String,
    pub block_capacity: usize,
    pub memory_capacity: usize,
    pub fanout: usize,
    pub inserted: u64,
    /// Max over snapshots of B * |blocks| / N.
    pub redundancy: f64,
    /// Max over executed queries of blocks_used / ceil(K/B).
    pub access_overhead: f64,
    /// False when any query cover came from the greedy fallback, making the
    /// access overhead an upper bound.
    pub access_overhead_exact: bool,
    pub transition_cost_total: u64,
    pub element_transition_cost_total: u64,
    /// Transition cost normalized per B insertions.
    pub update_cost_u: f64,
    /// Element transition cost normalized per B insertions.
    pub element_update_cost: f64,
    pub queries_run: u64,
    pub avg_blocks_per_unit: f64,
}

#[derive(Debug, Clone)]
enum Inner {
    Baseline {
        blocks: Vec<Block>,
    },
    /// levels[i] is the single run of level i+1 (empty = absent).
    Lsm {
        levels: Vec<Vec<Block>>,
    },
    /// levels[i] holds up to `ell` runs of level i+1.
    Stepped {
        levels: Vec<Vec<Vec<Block>>>,
    },
}

#[derive(Debug)]
pub struct Simulator {
    cfg: IndexConfig,
    memory: BTreeSet<Key>,
    inner: Inner,
    inserted: u64,
    live_blocks: usize,
    transition_total: u64,
    element_total: u64,
    max_redundancy: f64,
    seen: BTreeSet<Key>,
}

/// Result of one range query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryOutcome {
    pub result: BTreeSet<Key>,
    pub blocks_used: usize,
    pub exact: bool,
}

fn pack_run(keys: &[Key], block_capacity: usize) -> Vec<Block> {
    keys.chunks(block_capacity).map(|c| c.to_vec()).collect()
}

impl Simulator {
    pub fn new(cfg: IndexConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let inner = match cfg.structure {
            Structure::SortedRunBaseline => Inner::Baseline { blocks: Vec::new() },
            Structure::LsmLogarithmic => Inner::Lsm { levels: Vec::new() },
            Structure::SteppedMerge => Inner::Stepped { levels: Vec::new() },
        };
        Ok(Self {
            cfg,
            memory: BTreeSet::new(),
            inner,
            inserted: 0,
            live_blocks: 0,
            transition_total: 0,
            element_total: 0,
            max_redundancy: 0.0,
            seen: BTreeSet::new(),
        })
    }

    pub fn config(&self) -> &IndexConfig {
        &self.cfg
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn transition_cost_total(&self) -> u64 {
        self.transition_total
    }

    pub fn element_transition_cost_total(&self) -> u64 {
        self.element_total
    }

    pub fn max_redundancy(&self) -> f64 {
        self.max_redundancy
    }

    /// Number of live runs (the baseline counts as one).
    pub fn live_runs(&self) -> usize {
        match &self.inner {
            Inner::Baseline { blocks } => usize::from(!blocks.is_empty()),
            Inner::Lsm { levels } => levels.iter().filter(|l| !l.is_empty()).count(),
            Inner::Stepped { levels } => levels.iter().map(|l| l.len()).sum(),
        }
    }

    /// Runs at a given 1-indexed level (stepped merge invariant checks).
    pub fn runs_at_level(&self, level: usize) -> usize {
        match &self.inner {
            Inner::Stepped { levels } => levels.get(level - 1).map_or(0, |l| l.len()),
            Inner::Lsm { levels } => {
                usize::from(levels.get(level - 1).is_some_and(|l| !l.is_empty()))
            }
            Inner::Baseline { .. } => 0,
        }
    }

    fn for_each_block<F: FnMut(&Block)>(&self, mut f: F) {
        match &self.inner {
            Inner::Baseline { blocks } => blocks.iter().for_each(&mut f),
            Inner::Lsm { levels } => levels.iter().flatten().for_each(&mut f),
            Inner::Stepped { levels } => levels.iter().flatten().flatten().for_each(&mut f),
        }
    }

    /// Insert a key, applying the structure's policy and accumulating the
    /// transition costs.
    pub fn insert(&mut self, key: Key) -> Result<(), SimError> {
        if !self.seen.insert(key) {
            return Err(SimError::DuplicateKey(key));
        }
        let b = self.cfg.block_capacity;
        let (removed, added) = match (&mut self.inner, self.cfg.structure) {
            (Inner::Baseline { blocks }, _) => Self::insert_baseline(blocks, key, b),
            (Inner::Lsm { levels }, _) => {
                if self.memory.len() < self.cfg.memory_capacity {
                    self.memory.insert(key);
                    (Vec::new(), Vec::new())
                } else {
                    let mut payload: Vec<Key> = self.memory.iter().copied().collect();
                    payload.push(key);
                    self.memory.clear();
                    Self::flush_lsm(levels, payload, b, self.cfg.memory_capacity, self.cfg.fanout)
                }
            }
            (Inner::Stepped { levels }, _) => {
                if self.memory.len() < self.cfg.memory_capacity {
                    self.memory.insert(key);
                    (Vec::new(), Vec::new())
                } else {
                    let payload: Vec<Key> = self.memory.iter().copied().collect();
                    self.memory.clear();
                    self.memory.insert(key);
                    Self::flush_stepped(levels, payload, b, self.cfg.fanout)
                }
            }
        };
        self.inserted += 1;
        self.account(removed, added);
        Ok(())
    }

    /// Cancel blocks appearing on both sides (they exist in both snapshots or
    /// in neither), then accumulate the net transition.
    fn account(&mut self, removed: Vec<Block>, added: Vec<Block>) {
        let mut counts: HashMap<Block, i64> = HashMap::new();
        for blk in removed {
            *counts.entry(blk).or_insert(0) -= 1;
        }
        for blk in added {
            *counts.entry(blk).or_insert(0) += 1;
        }
        let mut delta_blocks = 0i64;
        for (blk, c) in counts {
            if c != 0 {
                self.transition_total += c.unsigned_abs();
                self.element_total += c.unsigned_abs() * blk.len() as u64;
                delta_blocks += c;
            }
        }
        self.live_blocks = (self.live_blocks as i64 + delta_blocks) as usize;
        let r = self.cfg.block_capacity as f64 * self.live_blocks as f64 / self.inserted as f64;
        if r > self.max_redundancy {
            self.max_redundancy = r;
        }
    }

    fn insert_baseline(blocks: &mut Vec<Block>, key: Key, b: usize) -> (Vec<Block>, Vec<Block>) {
        if blocks.is_empty() {
            blocks.push(vec![key]);
            return (Vec::new(), vec![vec![key]]);
        }
        let pos = blocks.partition_point(|blk| blk[0] <= key);
        let idx = pos.saturating_sub(1);
        let old = blocks[idx].clone();
        let mut grown = old.clone();
        let at = grown.partition_point(|&k| k < key);
        grown.insert(at, key);
        if grown.len() <= b {
            blocks[idx] = grown.clone();
            (vec![old], vec![grown])
        } else {
            let cut = grown.len().div_ceil(2);
            let right = grown.split_off(cut);
            blocks[idx] = grown.clone();
            blocks.insert(idx + 1, right.clone());
            (vec![old], vec![grown, right])
        }
    }

    fn flush_lsm(
        levels: &mut Vec<Vec<Block>>,
        payload: Vec<Key>,
        b: usize,
        m: usize,
        ell: usize,
    ) -> (Vec<Block>, Vec<Block>) {
        // Smallest level with spare capacity ell^i * M absorbs everything
        // below it.
        let mut target = 0usize;
        loop {
            if target >= levels.len() {
                levels.push(Vec::new());
                break;
            }
            let size: usize = levels[target].iter().map(|blk| blk.len()).sum();
            let cap = (ell as u128).saturating_pow(target as u32 + 1) * m as u128;
            if (size as u128) < cap {
                break;
            }
            target += 1;
        }
        let mut keys = payload;
        let mut removed = Vec::new();
        for level in levels[..=target].iter_mut() {
            for blk in level.drain(..) {
                keys.extend_from_slice(&blk);
                removed.push(blk);
            }
        }
        keys.sort_unstable();
        let run = pack_run(&keys, b);
        levels[target] = run.clone();
        (removed, run)
    }

    fn flush_stepped(
        levels: &mut Vec<Vec<Vec<Block>>>,
        payload: Vec<Key>,
        b: usize,
        ell: usize,
    ) -> (Vec<Block>, Vec<Block>) {
        let mut removed = Vec::new();
        let mut added = Vec::new();
        let run = pack_run(&payload, b);
        added.extend(run.iter().cloned());
        if levels.is_empty() {
            levels.push(Vec::new());
        }
        levels[0].push(run);
        let mut lvl = 0usize;
        while levels[lvl].len() >= ell {
            let mut keys: Vec<Key> = Vec::new();
            for run in levels[lvl].drain(..) {
                for blk in run {
                    keys.extend_from_slice(&blk);
                    removed.push(blk);
                }
            }
            keys.sort_unstable();
            let merged = pack_run(&keys, b);
            added.extend(merged.iter().cloned());
            if lvl + 1 >= levels.len() {
                levels.push(Vec::new());
            }
            levels[lvl + 1].push(merged);
            lvl += 1;
        }
        (removed, added)
    }

    /// Answer `[lo, hi]`, counting the minimum number of blocks needed to
    /// cover the part of the answer not resident in memory.
    pub fn range_query(&self, lo: Key, hi: Key) -> QueryOutcome {
        let mut result: BTreeSet<Key> = self.memory.range(lo..=hi).copied().collect();
        let mut candidates: Vec<BTreeSet<Key>> = Vec::new();
        self.for_each_block(|blk| {
            let inside: BTreeSet<Key> = blk
                .iter()
                .copied()
                .filter(|&k| lo <= k && k <= hi)
                .collect();
            if !inside.is_empty() {
                candidates.push(inside);
            }
        });
        for c in &candidates {
            result.extend(c.iter().copied());
        }
        let needed: BTreeSet<Key> = result
            .iter()
            .copied()
            .filter(|k| !self.memory.contains(k))
            .collect();
        if needed.is_empty() {
            return QueryOutcome {
                result,
                blocks_used: 0,
                exact: true,
            };
        }
        let cover = min_cover(&needed, &candidates).expect("blocks cover every stored key");
        QueryOutcome {
            result,
            blocks_used: cover.chosen.len(),
            exact: cover.exact,
        }
    }

    pub fn snapshot(&self, round: u64) -> SnapshotRecord {
        let mut blocks: Vec<Vec<Key>> = Vec::with_capacity(self.live_blocks);
        self.for_each_block(|blk| blocks.push(blk.clone()));
        blocks.sort_unstable();
        SnapshotRecord {
            blocks,
            memory: self.memory.iter().copied().collect(),
            round,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct WorkloadOptions {
    /// Run one query (cycling through the list) after this many inserts.
    pub query_every: usize,
    /// Record a trace snapshot after this many inserts.
    pub trace_every: usize,
    pub record_trace: bool,
}

impl WorkloadOptions {
    pub fn for_config(cfg: &IndexConfig) -> Self {
        Self {
            query_every: cfg.block_capacity,
            trace_every: cfg.block_capacity,
            record_trace: false,
        }
    }
}

/// Insert `keys` in order, interleaving `queries` per the schedule, and
/// accumulate the model metrics. Returns the metrics and the recorded
/// per-round trace (empty unless requested).
pub fn run_workload(
    cfg: &IndexConfig,
    keys: &[Key],
    queries: &[(Key, Key)],
    opts: &WorkloadOptions,
) -> Result<(IndexMetrics, Vec<SnapshotRecord>), SimError> {
    let mut sim = Simulator::new(*cfg)?;
    let mut trace = Vec::new();
    let mut next_query = 0usize;
    let mut a_max = 0.0f64;
    let mut ratio_sum = 0.0f64;
    let mut ratio_count = 0u64;
    let mut exact = true;
    for (i, &key) in keys.iter().enumerate() {
        sim.insert(key)?;
        let done = i + 1;
        if opts.record_trace && done % opts.trace_every == 0 {
            trace.push(sim.snapshot((done / opts.trace_every) as u64));
        }
        if !queries.is_empty() && done % opts.query_every == 0 {
            let (lo, hi) = queries[next_query % queries.len()];
            next_query += 1;
            let out = sim.range_query(lo, hi);
            let k = out.result.len() as u64;
            if k >= 1 {
                let units = k.div_ceil(sim.cfg.block_capacity as u64) as f64;
                let ratio = out.blocks_used as f64 / units;
                ratio_sum += ratio;
                ratio_count += 1;
                if ratio > a_max {
                    a_max = ratio;
                }
                exact &= out.exact;
            }
        }
    }
    let n = sim.inserted() as f64;
    let b = cfg.block_capacity as f64;
    let metrics = IndexMetrics {
        structure: cfg.structure.name().to_string(),
        block_capacity: cfg.block_capacity,
        memory_capacity: cfg.memory_capacity,
        fanout: cfg.fanout,
        inserted: sim.inserted(),
        redundancy: sim.max_redundancy(),
        access_overhead: a_max,
        access_overhead_exact: exact,
        transition_cost_total: sim.transition_cost_total(),
        element_transition_cost_total: sim.element_transition_cost_total(),
        update_cost_u: sim.transition_cost_total() as f64 * b / n,
        element_update_cost: sim.element_transition_cost_total() as f64 * b / n,
        queries_run: ratio_count,
        avg_blocks_per_unit: if ratio_count > 0 {
            ratio_sum / ratio_count as f64
        } else {
            0.0
        },
    };
    Ok((metrics, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(structure: Structure, b: usize, m: usize, ell: usize) -> IndexConfig {
        IndexConfig {
            structure,
            block_capacity: b,
            memory_capacity: m,
            fanout: ell,
        }
    }

    #[test]
    fn lsm_first_flush_costs_two_blocks() {
        // M=2, ell=2, B=2: two keys buffer in memory, the third flushes a
        // 3-key run of 2 blocks.
        let mut sim = Simulator::new(cfg(Structure::LsmLogarithmic, 2, 2, 2)).unwrap();
        sim.insert(1).unwrap();
        sim.insert(2).unwrap();
        assert_eq!(sim.transition_cost_total(), 0);
        sim.insert(3).unwrap();
        assert_eq!(sim.transition_cost_total(), 2);
        assert_eq!(sim.element_transition_cost_total(), 3);
    }

    #[test]
    fn baseline_split_costs_three() {
        let mut sim = Simulator::new(cfg(Structure::SortedRunBaseline, 2, 0, 2)).unwrap();
        sim.insert(10).unwrap(); // create: cost 1
        sim.insert(20).unwrap(); // rewrite: cost 2
        assert_eq!(sim.transition_cost_total(), 3);
        sim.insert(15).unwrap(); // split: 1 removed + 2 added
        assert_eq!(sim.transition_cost_total(), 6);
        let snap = sim.snapshot(0);
        assert_eq!(snap.blocks, vec![vec![10, 15], vec![20]]);
    }

    #[test]
    fn fanout_outside_block_capacity_is_rejected() {
        let err = Simulator::new(cfg(Structure::SteppedMerge, 1, 1, 2)).unwrap_err();
        assert!(matches!(err, SimError::BadFanout { .. }));
    }

    #[test]
    fn stepped_merge_small_sequence() {
        // M=1, ell=2, B=2: two single-key flushes, then the two level-1
        // runs merge into one level-2 run. The merge's transition cost is
        // the removed runs' blocks plus the written run's blocks; the run
        // flushed and consumed within the same insert nets out.
        let mut sim = Simulator::new(cfg(Structure::SteppedMerge, 2, 1, 2)).unwrap();
        sim.insert(5).unwrap(); // memory
        assert_eq!(sim.transition_cost_total(), 0);
        sim.insert(9).unwrap(); // flush {5} as a level-1 run
        assert_eq!(sim.runs_at_level(1), 1);
        assert_eq!(sim.transition_cost_total(), 1);
        sim.insert(7).unwrap(); // flush {9}, cascade: merge both level-1 runs
        assert_eq!(sim.runs_at_level(1), 0);
        assert_eq!(sim.runs_at_level(2), 1);
        // Net: block {5} removed, block {5,9} added.
        assert_eq!(sim.transition_cost_total(), 1 + 2);
        let snap = sim.snapshot(0);
        assert_eq!(snap.blocks, vec![vec![5, 9]]);
        assert_eq!(snap.memory, vec![7]);
    }

    #[test]
    fn net_accounting_matches_snapshot_difference() {
        for structure in Structure::ALL {
            let c = cfg(structure, 4, 4, 2);
            let mut sim = Simulator::new(c).unwrap();
            let mut prev = sim.snapshot(0);
            let mut recomputed = 0u64;
            let mut recomputed_elems = 0u64;
            for key in [13u64, 2, 77, 41, 5, 29, 61, 8, 99, 34, 50, 18, 70, 25, 90, 3] {
                sim.insert(key).unwrap();
                let cur = sim.snapshot(0);
                let (blocks, elems) = snapshot_transition_cost(&prev, &cur);
                recomputed += blocks;
                recomputed_elems += elems;
                prev = cur;
            }
            assert_eq!(
                sim.transition_cost_total(),
                recomputed,
                "{structure:?} incremental vs recomputed"
            );
            assert_eq!(sim.element_transition_cost_total(), recomputed_elems);
            // Element cost never exceeds B times the block cost.
            assert!(
                sim.element_transition_cost_total() <= 4 * sim.transition_cost_total()
            );
        }
    }

    #[test]
    fn coverage_after_every_insert() {
        for structure in Structure::ALL {
            let mut sim = Simulator::new(cfg(structure, 2, 2, 2)).unwrap();
            let keys = [9u64, 4, 17, 1, 12, 6, 20, 3, 15, 8];
            for (i, &k) in keys.iter().enumerate() {
                sim.insert(k).unwrap();
                let snap = sim.snapshot(0);
                let mut stored: BTreeSet<Key> = snap.memory.iter().copied().collect();
                for blk in &snap.blocks {
                    assert!(blk.len() <= 2, "block over capacity");
                    stored.extend(blk.iter().copied());
                }
                for &inserted in &keys[..=i] {
                    assert!(stored.contains(&inserted), "{structure:?} lost {inserted}");
                }
                assert!(snap.memory.len() <= 2);
            }
        }
    }

    #[test]
    fn query_matches_brute_force() {
        for structure in Structure::ALL {
            let mut sim = Simulator::new(cfg(structure, 3, 2, 2)).unwrap();
            let keys: Vec<Key> = vec![42, 7, 19, 88, 3, 56, 21, 64, 11, 30, 75, 50];
            for (i, &k) in keys.iter().enumerate() {
                sim.insert(k).unwrap();
                for (lo, hi) in [(0, 100), (10, 30), (55, 60), (90, 99), (21, 21)] {
                    let out = sim.range_query(lo, hi);
                    let expected: BTreeSet<Key> = keys[..=i]
                        .iter()
                        .copied()
                        .filter(|&k| lo <= k && k <= hi)
                        .collect();
                    assert_eq!(out.result, expected, "{structure:?} [{lo},{hi}]");
                }
            }
        }
    }

    #[test]
    fn aligned_run_query_uses_two_blocks() {
        // Keys 1..8 in one aligned run with B = 2; [3,6] hits exactly two
        // blocks. With M = 7 all eight keys land in a single flush.
        let mut sim = Simulator::new(cfg(Structure::LsmLogarithmic, 2, 7, 2)).unwrap();
        for k in 1..=8u64 {
            sim.insert(k).unwrap();
        }
        let snap = sim.snapshot(0);
        assert_eq!(
            snap.blocks,
            vec![vec![1, 2], vec![3, 4], vec![5, 6], vec![7, 8]]
        );
        let out = sim.range_query(3, 6);
        assert_eq!(out.result.len(), 4);
        assert_eq!(out.blocks_used, 2);
        assert!(out.exact);
    }

    #[test]
    fn empty_range_uses_no_blocks() {
        let mut sim = Simulator::new(cfg(Structure::SortedRunBaseline, 2, 0, 2)).unwrap();
        sim.insert(10).unwrap();
        let out = sim.range_query(50, 60);
        assert!(out.result.is_empty());
        assert_eq!(out.blocks_used, 0);
    }

    #[test]
    fn memory_resident_answers_are_free() {
        let mut sim = Simulator::new(cfg(Structure::LsmLogarithmic, 2, 4, 2)).unwrap();
        sim.insert(5).unwrap();
        sim.insert(6).unwrap();
        let out = sim.range_query(5, 6);
        assert_eq!(out.result.len(), 2);
        assert_eq!(out.blocks_used, 0);
    }

    #[test]
    fn all_in_memory_workload_has_zero_update_cost() {
        let c = cfg(Structure::LsmLogarithmic, 2, 8, 2);
        let keys: Vec<Key> = (0..8).collect();
        let opts = WorkloadOptions::for_config(&c);
        let (metrics, _) = run_workload(&c, &keys, &[], &opts).unwrap();
        assert_eq!(metrics.transition_cost_total, 0);
        assert_eq!(metrics.update_cost_u, 0.0);
    }

    #[test]
    fn lsm_run_count_stays_logarithmic() {
        let c = cfg(Structure::LsmLogarithmic, 2, 2, 2);
        let mut sim = Simulator::new(c).unwrap();
        for k in 0..256u64 {
            sim.insert(k).unwrap();
            let n_over_m = (sim.inserted() as f64 / 2.0).max(1.0);
            let bound = n_over_m.log2() + 1.0;
            assert!(
                sim.live_runs() as f64 <= bound.max(1.0),
                "runs = {} at n = {}",
                sim.live_runs(),
                sim.inserted()
            );
        }
    }

    #[test]
    fn stepped_levels_cap_at_fanout() {
        let c = cfg(Structure::SteppedMerge, 2, 1, 2);
        let mut sim = Simulator::new(c).unwrap();
        for k in 0..64u64 {
            sim.insert(k).unwrap();
            for lvl in 1..=8 {
                assert!(sim.runs_at_level(lvl) <= 2);
            }
        }
        let c3 = cfg(Structure::SteppedMerge, 4, 2, 3);
        let mut sim = Simulator::new(c3).unwrap();
        for k in 0..300u64 {
            sim.insert(k).unwrap();
            for lvl in 1..=8 {
                assert!(sim.runs_at_level(lvl) <= 3, "level {lvl} overflow");
            }
        }
    }

    #[test]
    fn redundancy_is_at_least_one_without_memory() {
        let mut sim = Simulator::new(cfg(Structure::SortedRunBaseline, 2, 0, 2)).unwrap();
        for k in 0..32u64 {
            sim.insert(k).unwrap();
        }
        assert!(sim.max_redundancy() >= 1.0);
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let mut sim = Simulator::new(cfg(Structure::SortedRunBaseline, 2, 0, 2)).unwrap();
        sim.insert(1).unwrap();
        assert_eq!(sim.insert(1), Err(SimError::DuplicateKey(1)));
    }

    #[test]
    fn stepped_beats_lsm_on_updates_and_loses_on_queries() {
        let keys: Vec<Key> = (0..2048u64).map(|i| i * 7 % 2048).collect();
        let queries: Vec<(Key, Key)> = (0..32).map(|i| (i * 60, i * 60 + 120)).collect();
        let base = IndexConfig {
            structure: Structure::LsmLogarithmic,
            block_capacity: 8,
            memory_capacity: 16,
            fanout: 4,
        };
        let opts = WorkloadOptions::for_config(&base);
        let (lsm, _) = run_workload(&base, &keys, &queries, &opts).unwrap();
        let stepped_cfg = IndexConfig {
            structure: Structure::SteppedMerge,
            ..base
        };
        let (stepped, _) = run_workload(&stepped_cfg, &keys, &queries, &opts).unwrap();
        assert!(
            stepped.update_cost_u <= lsm.update_cost_u,
            "stepped u = {}, lsm u = {}",
            stepped.update_cost_u,
            lsm.update_cost_u
        );
        assert!(
            stepped.avg_blocks_per_unit >= lsm.avg_blocks_per_unit,
            "stepped q = {}, lsm q = {}",
            stepped.avg_blocks_per_unit,
            lsm.avg_blocks_per_unit
        );
    }
}
