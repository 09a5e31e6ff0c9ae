//! From an indexing trace to a ball-shuffling solution.
//!
//! The grouped workload inserts `2MB` groups of `B` keys each, one key per
//! group per round, with group `j`'s keys strictly inside `(j, j+1)`. Given
//! the per-round snapshots of any indexing scheme run on that workload, an
//! uncontaminated group (one that never has a key in the memory buffer) is
//! covered by at most `A` blocks every round; treating the covering sets as
//! bins yields a legal shuffle schedule for `B` balls and `A` bins whose cost
//! is bounded by the group's element transition cost.
//!
//! Keys are scaled integers: group `j`'s rank-`r` key `j + r/(B+1)` is stored
//! as `j*(B+1) + r`, which keeps the construction exact.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::game::{apply_shuffle, GameError, GameState, ReplayError, ShuffleOp};
use crate::sim::{
    run_workload, IndexConfig, IndexMetrics, Key, SimError, SnapshotRecord, WorkloadOptions,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupedWorkload {
    pub block_capacity: usize,
    pub memory_capacity: usize,
    /// `group_keys[j][i]` is group `j`'s key inserted at round `i`.
    pub group_keys: Vec<Vec<Key>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReductionError {
    #[error("grouped workload needs B >= 2 and M >= 1 (got B = {b}, M = {m})")]
    WorkloadShape { b: usize, m: usize },
    #[error("trace has {got} round snapshots, workload expects {expected}")]
    TraceShape { expected: usize, got: usize },
    #[error("group {group} is not covered by blocks at round {round}")]
    CoverMissing { group: usize, round: usize },
    #[error("group {group} needs {need} blocks at round {round}, limit {limit}")]
    TooManyBins {
        group: usize,
        round: usize,
        need: usize,
        limit: usize,
    },
    #[error("every group is contaminated")]
    NoCleanGroup,
    #[error("ball allocation infeasible at round {round} (cover sets too small)")]
    Infeasible { round: usize },
    #[error("shuffle construction produced an illegal op: {0}")]
    Game(#[from] GameError),
}

/// Deterministic grouped workload; `seed` shuffles the per-group insertion
/// order of ranks.
pub fn build_grouped_workload(
    b: usize,
    m: usize,
    seed: u64,
) -> Result<GroupedWorkload, ReductionError> {
    if b < 2 || m < 1 {
        return Err(ReductionError::WorkloadShape { b, m });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let num_groups = 2 * m * b;
    let mut group_keys = Vec::with_capacity(num_groups);
    for j in 0..num_groups {
        let mut ranks: Vec<u64> = (1..=b as u64).collect();
        ranks.shuffle(&mut rng);
        group_keys.push(
            ranks
                .into_iter()
                .map(|r| (j as u64) * (b as u64 + 1) + r)
                .collect(),
        );
    }
    Ok(GroupedWorkload {
        block_capacity: b,
        memory_capacity: m,
        group_keys,
    })
}

impl GroupedWorkload {
    pub fn num_groups(&self) -> usize {
        self.group_keys.len()
    }

    pub fn rounds(&self) -> usize {
        self.block_capacity
    }

    pub fn total_keys(&self) -> usize {
        self.num_groups() * self.rounds()
    }

    pub fn group_of(&self, key: Key) -> Option<usize> {
        let j = (key / (self.block_capacity as u64 + 1)) as usize;
        (j < self.num_groups()).then_some(j)
    }

    /// Round-major insertion order: round `i` adds one key to every group.
    pub fn insertion_order(&self) -> Vec<Key> {
        let mut keys = Vec::with_capacity(self.total_keys());
        for i in 0..self.rounds() {
            for group in &self.group_keys {
                keys.push(group[i]);
            }
        }
        keys
    }

    /// Group `j`'s points present after round `i` (0-based).
    fn points_at(&self, group: usize, round: usize) -> BTreeSet<Key> {
        self.group_keys[group][..=round].iter().copied().collect()
    }
}

fn check_trace(trace: &[SnapshotRecord], wl: &GroupedWorkload) -> Result<(), ReductionError> {
    if trace.len() != wl.rounds() {
        return Err(ReductionError::TraceShape {
            expected: wl.rounds(),
            got: trace.len(),
        });
    }
    Ok(())
}

/// Groups with at least one key in some round snapshot's memory. For a legal
/// trace on the grouped workload at most `MB` groups can be contaminated
/// (the memory holds at most `M` keys at each of the `B` snapshots).
pub fn contaminated_groups(
    trace: &[SnapshotRecord],
    wl: &GroupedWorkload,
) -> Result<BTreeSet<usize>, ReductionError> {
    check_trace(trace, wl)?;
    let mut out = BTreeSet::new();
    for snap in trace {
        for &key in &snap.memory {
            if let Some(g) = wl.group_of(key) {
                out.insert(g);
            }
        }
    }
    Ok(out)
}

/// Per-round covering sets for one group: each round's minimum block cover,
/// restricted to the group's current points.
fn group_covers(
    trace: &[SnapshotRecord],
    wl: &GroupedWorkload,
    group: usize,
    max_bins: Option<usize>,
) -> Result<Vec<Vec<BTreeSet<Key>>>, ReductionError> {
    check_trace(trace, wl)?;
    let mut covers = Vec::with_capacity(trace.len());
    for (round, snap) in trace.iter().enumerate() {
        let points = wl.points_at(group, round);
        let candidates: Vec<BTreeSet<Key>> = snap
            .blocks
            .iter()
            .map(|blk| {
                blk.iter()
                    .copied()
                    .filter(|k| points.contains(k))
                    .collect::<BTreeSet<Key>>()
            })
            .filter(|s| !s.is_empty())
            .collect();
        let cover = crate::cover::min_cover(&points, &candidates)
            .ok_or(ReductionError::CoverMissing { group, round })?;
        if let Some(limit) = max_bins {
            if cover.chosen.len() > limit {
                return Err(ReductionError::TooManyBins {
                    group,
                    round,
                    need: cover.chosen.len(),
                    limit,
                });
            }
        }
        covers.push(cover.chosen.into_iter().map(|i| candidates[i].clone()).collect());
    }
    Ok(covers)
}

/// Element transition cost of a cover sequence: per transition (including the
/// initial one from the empty cover), the distinct keys inside sets that
/// appear on exactly one side.
fn element_cost_of_covers(covers: &[Vec<BTreeSet<Key>>]) -> u64 {
    let mut cost = 0u64;
    let empty: Vec<BTreeSet<Key>> = Vec::new();
    let mut rounds: Vec<&Vec<BTreeSet<Key>>> = vec![&empty];
    rounds.extend(covers.iter());
    for w in rounds.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut counts: BTreeMap<&BTreeSet<Key>, i64> = BTreeMap::new();
        for s in a {
            *counts.entry(s).or_insert(0) -= 1;
        }
        for s in b {
            *counts.entry(s).or_insert(0) += 1;
        }
        let mut changed: BTreeSet<Key> = BTreeSet::new();
        for (s, c) in counts {
            if c != 0 {
                changed.extend(s.iter().copied());
            }
        }
        cost += changed.len() as u64;
    }
    cost
}

/// Element transition cost of one (uncontaminated) group across the trace.
pub fn group_element_cost(
    trace: &[SnapshotRecord],
    wl: &GroupedWorkload,
    group: usize,
) -> Result<u64, ReductionError> {
    let covers = group_covers(trace, wl, group, None)?;
    Ok(element_cost_of_covers(&covers))
}

/// The extracted shuffle schedule for the cheapest clean group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionCertificate {
    pub group_id: usize,
    /// Bin count the schedule is valid for (the access bound A).
    pub bins: usize,
    /// Balls placed (the workload's B).
    pub balls: u64,
    pub shuffle_ops: Vec<ShuffleOp>,
    pub shuffle_cost: u64,
    pub element_transition_cost: u64,
}

struct VBin {
    set: BTreeSet<Key>,
    balls: u64,
    slot: Option<usize>,
}

/// Build the shuffle schedule from one group's cover sequence. Bins whose
/// sets persist across a transition are untouched; the rest are collected
/// together with the new ball and redistributed into the added sets, largest
/// first, never exceeding a set's size.
fn ops_from_covers(
    covers: &[Vec<BTreeSet<Key>>],
    bins: usize,
) -> Result<(Vec<ShuffleOp>, u64), ReductionError> {
    let mut vbins: Vec<VBin> = Vec::new();
    let mut state = GameState::new(bins);
    let mut ops = Vec::with_capacity(covers.len());
    for (round, cur_sets) in covers.iter().enumerate() {
        let mut need: BTreeMap<&BTreeSet<Key>, usize> = BTreeMap::new();
        for s in cur_sets {
            *need.entry(s).or_insert(0) += 1;
        }
        // Persist matching sets, preferring the heaviest bins.
        let mut buckets: BTreeMap<BTreeSet<Key>, Vec<VBin>> = BTreeMap::new();
        for vb in vbins.drain(..) {
            buckets.entry(vb.set.clone()).or_default().push(vb);
        }
        let mut persisted: Vec<VBin> = Vec::new();
        let mut removed: Vec<VBin> = Vec::new();
        for (set, mut bucket) in buckets {
            bucket.sort_by_key(|vb| std::cmp::Reverse(vb.balls));
            let keep = need.get(&set).copied().unwrap_or(0).min(bucket.len());
            if keep > 0 {
                *need.get_mut(&set).unwrap() -= keep;
            }
            for (k, vb) in bucket.into_iter().enumerate() {
                if k < keep {
                    persisted.push(vb);
                } else {
                    removed.push(vb);
                }
            }
        }
        let collected: BTreeSet<usize> = removed.iter().filter_map(|vb| vb.slot).collect();
        let collected_balls: u64 = removed.iter().map(|vb| vb.balls).sum();
        let mut to_place = collected_balls + 1;
        let mut added: Vec<BTreeSet<Key>> = Vec::new();
        for (set, count) in need {
            for _ in 0..count {
                added.push(set.clone());
            }
        }
        added.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        let mut allocation: Vec<u64> = Vec::new();
        let mut alloc_sets: Vec<BTreeSet<Key>> = Vec::new();
        let mut empty_sets: Vec<BTreeSet<Key>> = Vec::new();
        for set in added {
            let take = to_place.min(set.len() as u64);
            if take > 0 {
                allocation.push(take);
                alloc_sets.push(set);
                to_place -= take;
            } else {
                empty_sets.push(set);
            }
        }
        if to_place > 0 {
            return Err(ReductionError::Infeasible { round });
        }
        let op = ShuffleOp {
            collected,
            allocation,
        };
        let slots = state.allocation_slots(&op)?;
        state = apply_shuffle(&state, &op)?;
        vbins = persisted;
        for ((set, &balls), &slot) in alloc_sets.iter().zip(&op.allocation).zip(&slots) {
            vbins.push(VBin {
                set: set.clone(),
                balls,
                slot: Some(slot),
            });
        }
        for set in empty_sets {
            vbins.push(VBin {
                set,
                balls: 0,
                slot: None,
            });
        }
        ops.push(op);
    }
    Ok((ops, state.total_cost()))
}

/// Max over clean groups and rounds of the minimum cover size — the measured
/// access bound the certificates are built against.
pub fn required_bins(
    trace: &[SnapshotRecord],
    wl: &GroupedWorkload,
    groups: &BTreeSet<usize>,
) -> Result<usize, ReductionError> {
    let mut worst = 0usize;
    for &g in groups {
        let covers = group_covers(trace, wl, g, None)?;
        for round in &covers {
            worst = worst.max(round.len());
        }
    }
    Ok(worst.max(1))
}

/// Extract the certificate: pick the uncontaminated group with the smallest
/// element transition cost whose every-round cover fits in `bins` blocks, and
/// build its shuffle schedule.
pub fn extract_certificate(
    trace: &[SnapshotRecord],
    wl: &GroupedWorkload,
    bins: usize,
) -> Result<ReductionCertificate, ReductionError> {
    check_trace(trace, wl)?;
    let contaminated = contaminated_groups(trace, wl)?;
    let mut best: Option<(u64, usize, Vec<Vec<BTreeSet<Key>>>)> = None;
    let mut last_err = ReductionError::NoCleanGroup;
    for group in 0..wl.num_groups() {
        if contaminated.contains(&group) {
            continue;
        }
        match group_covers(trace, wl, group, Some(bins)) {
            Ok(covers) => {
                let cost = element_cost_of_covers(&covers);
                if best.as_ref().map_or(true, |(c, g, _)| (cost, group) < (*c, *g)) {
                    best = Some((cost, group, covers));
                }
            }
            Err(e) => last_err = e,
        }
    }
    let (element_cost, group_id, covers) = best.ok_or(last_err)?;
    let (shuffle_ops, shuffle_cost) = ops_from_covers(&covers, bins)?;
    Ok(ReductionCertificate {
        group_id,
        bins,
        balls: wl.rounds() as u64,
        shuffle_ops,
        shuffle_cost,
        element_transition_cost: element_cost,
    })
}

/// Why a certificate failed verification.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum VerifyIssue {
    #[error("schedule does not replay: {0}")]
    Illegal(#[from] ReplayError),
    #[error("schedule places {got} balls, certificate claims {expected}")]
    WrongBallCount { expected: u64, got: u64 },
    #[error("schedule replays to cost {replayed}, certificate claims {declared}")]
    CostMismatch { replayed: u64, declared: u64 },
    #[error("shuffle cost {shuffle} exceeds element transition cost {element}")]
    CostAboveElementCost { shuffle: u64, element: u64 },
}

pub fn verify_certificate_detailed(cert: &ReductionCertificate) -> Result<(), VerifyIssue> {
    let (state, _) = crate::game::replay(cert.bins, &cert.shuffle_ops)?;
    if state.balls_placed() != cert.balls {
        return Err(VerifyIssue::WrongBallCount {
            expected: cert.balls,
            got: state.balls_placed(),
        });
    }
    if state.total_cost() != cert.shuffle_cost {
        return Err(VerifyIssue::CostMismatch {
            replayed: state.total_cost(),
            declared: cert.shuffle_cost,
        });
    }
    if cert.shuffle_cost > cert.element_transition_cost {
        return Err(VerifyIssue::CostAboveElementCost {
            shuffle: cert.shuffle_cost,
            element: cert.element_transition_cost,
        });
    }
    Ok(())
}

pub fn verify_certificate(cert: &ReductionCertificate) -> bool {
    verify_certificate_detailed(cert).is_ok()
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
}

/// End-to-end result of simulating an index on the grouped workload and
/// extracting a certificate from its trace.
#[derive(Debug)]
pub struct ReductionReport {
    pub metrics: IndexMetrics,
    pub contaminated: BTreeSet<usize>,
    pub bins_required: usize,
    pub certificate: ReductionCertificate,
    pub verified: bool,
}

/// Run the full pipeline: grouped workload, simulation, trace, certificate.
pub fn run_reduction(cfg: &IndexConfig, seed: u64) -> Result<ReductionReport, PipelineError> {
    let wl = build_grouped_workload(cfg.block_capacity, cfg.memory_capacity, seed)?;
    let keys = wl.insertion_order();
    let opts = WorkloadOptions {
        query_every: cfg.block_capacity,
        trace_every: wl.num_groups(),
        record_trace: true,
    };
    let (metrics, trace) = run_workload(cfg, &keys, &[], &opts)?;
    let contaminated = contaminated_groups(&trace, &wl)?;
    let clean: BTreeSet<usize> =
        (0..wl.num_groups()).filter(|g| !contaminated.contains(g)).collect();
    let bins_required = required_bins(&trace, &wl, &clean)?;
    let certificate = extract_certificate(&trace, &wl, bins_required)?;
    let verified = verify_certificate(&certificate);
    Ok(ReductionReport {
        metrics,
        contaminated,
        bins_required,
        certificate,
        verified,
    })
}
