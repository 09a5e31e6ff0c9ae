//! Minimum block cover for query answers and group snapshots.
//!
//! Small instances are solved exactly with branch and bound; larger ones fall
//! back to the greedy heuristic, in which case the result is only an upper
//! bound and is flagged as such. Elements covered by a single candidate force
//! that candidate, which keeps the common disjoint-block case linear.

use std::collections::{BTreeMap, BTreeSet};

/// Exact search is attempted when at most this many candidates remain after
/// forced selections.
pub const EXACT_CANDIDATE_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverResult {
    /// Indices into the caller's candidate list, ascending.
    pub chosen: Vec<usize>,
    /// False when the greedy fallback decided part of the cover.
    pub exact: bool,
}

/// Choose a minimum-cardinality subfamily of `candidates` covering `universe`.
///
/// Returns `None` if some element of the universe is in no candidate.
/// Candidates are considered in order of their restriction to the universe
/// (larger first, lexicographically smaller first among equals), which makes
/// tie-breaking deterministic.
pub fn min_cover(universe: &BTreeSet<u64>, candidates: &[BTreeSet<u64>]) -> Option<CoverResult> {
    if universe.is_empty() {
        return Some(CoverResult {
            chosen: Vec::new(),
            exact: true,
        });
    }
    // Restrict candidates to the universe and drop useless ones.
    let mut useful: Vec<(usize, BTreeSet<u64>)> = candidates
        .iter()
        .enumerate()
        .filter_map(|(i, c)| {
            let r: BTreeSet<u64> = c.intersection(universe).copied().collect();
            (!r.is_empty()).then_some((i, r))
        })
        .collect();

    let mut covered: BTreeSet<u64> = BTreeSet::new();
    let mut chosen: Vec<usize> = Vec::new();

    // Forced candidates: sole owners of some element.
    loop {
        let mut owner: BTreeMap<u64, Vec<usize>> = universe
            .iter()
            .filter(|x| !covered.contains(x))
            .map(|&x| (x, Vec::new()))
            .collect();
        for (pos, (_, r)) in useful.iter().enumerate() {
            for &x in r {
                if let Some(owners) = owner.get_mut(&x) {
                    owners.push(pos);
                }
            }
        }
        if owner.values().any(|owners| owners.is_empty()) {
            return None;
        }
        if owner.is_empty() {
            break;
        }
        let forced: BTreeSet<usize> = owner
            .values()
            .filter(|owners| owners.len() == 1)
            .map(|owners| owners[0])
            .collect();
        if forced.is_empty() {
            break;
        }
        for &pos in &forced {
            chosen.push(useful[pos].0);
            covered.extend(useful[pos].1.iter().copied());
        }
        useful = useful
            .into_iter()
            .enumerate()
            .filter(|(pos, _)| !forced.contains(pos))
            .map(|(_, c)| c)
            .collect();
        if covered.len() == universe.len() {
            chosen.sort_unstable();
            return Some(CoverResult {
                chosen,
                exact: true,
            });
        }
    }

    let remaining: BTreeSet<u64> = universe.difference(&covered).copied().collect();
    // Re-restrict to what is still uncovered.
    let mut pool: Vec<(usize, BTreeSet<u64>)> = useful
        .into_iter()
        .filter_map(|(i, r)| {
            let rr: BTreeSet<u64> = r.intersection(&remaining).copied().collect();
            (!rr.is_empty()).then_some((i, rr))
        })
        .collect();
    pool.sort_by(|a, b| {
        b.1.len()
            .cmp(&a.1.len())
            .then_with(|| a.1.cmp(&b.1))
            .then_with(|| a.0.cmp(&b.0))
    });

    let exact = pool.len() <= EXACT_CANDIDATE_LIMIT;
    let picked = if exact {
        exact_cover(&remaining, &pool)?
    } else {
        greedy_cover(&remaining, &pool)?
    };
    chosen.extend(picked);
    chosen.sort_unstable();
    Some(CoverResult { chosen, exact })
}

fn exact_cover(universe: &BTreeSet<u64>, pool: &[(usize, BTreeSet<u64>)]) -> Option<Vec<usize>> {
    let mut best: Option<Vec<usize>> = None;
    let mut current: Vec<usize> = Vec::new();
    let max_size = pool.iter().map(|(_, r)| r.len()).max()?;

    fn recurse(
        universe: &BTreeSet<u64>,
        pool: &[(usize, BTreeSet<u64>)],
        covered: &BTreeSet<u64>,
        current: &mut Vec<usize>,
        best: &mut Option<Vec<usize>>,
        max_size: usize,
    ) {
        let uncovered_count = universe.len() - covered.len();
        if uncovered_count == 0 {
            if best.as_ref().map_or(true, |b| current.len() < b.len()) {
                *best = Some(current.clone());
            }
            return;
        }
        let floor = current.len() + uncovered_count.div_ceil(max_size);
        if let Some(b) = best {
            if floor >= b.len() {
                return;
            }
        }
        // Branch on the smallest uncovered element.
        let pivot = *universe.iter().find(|x| !covered.contains(x)).unwrap();
        for (pos, (_, r)) in pool.iter().enumerate() {
            if current.contains(&pos) || !r.contains(&pivot) {
                continue;
            }
            let mut next_covered = covered.clone();
            next_covered.extend(r.iter().copied());
            current.push(pos);
            recurse(universe, pool, &next_covered, current, best, max_size);
            current.pop();
        }
    }

    recurse(
        universe,
        pool,
        &BTreeSet::new(),
        &mut current,
        &mut best,
        max_size,
    );
    best.map(|positions| positions.into_iter().map(|p| pool[p].0).collect())
}

fn greedy_cover(universe: &BTreeSet<u64>, pool: &[(usize, BTreeSet<u64>)]) -> Option<Vec<usize>> {
    let mut covered: BTreeSet<u64> = BTreeSet::new();
    let mut out = Vec::new();
    let mut used = vec![false; pool.len()];
    while covered.len() < universe.len() {
        let mut best_pos = None;
        let mut best_gain = 0usize;
        for (pos, (_, r)) in pool.iter().enumerate() {
            if used[pos] {
                continue;
            }
            let gain = r.iter().filter(|x| !covered.contains(x)).count();
            if gain > best_gain {
                best_gain = gain;
                best_pos = Some(pos);
            }
        }
        let pos = best_pos?;
        used[pos] = true;
        covered.extend(pool[pos].1.iter().copied());
        out.push(pool[pos].0);
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[u64]) -> BTreeSet<u64> {
        xs.iter().copied().collect()
    }

    /// Independent oracle: enumerate every subset of candidates.
    fn brute_force_size(universe: &BTreeSet<u64>, candidates: &[BTreeSet<u64>]) -> Option<usize> {
        let n = candidates.len();
        let mut best: Option<usize> = None;
        for mask in 0u32..1 << n {
            let mut covered = BTreeSet::new();
            for (i, c) in candidates.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    covered.extend(c.iter().copied());
                }
            }
            if universe.iter().all(|x| covered.contains(x)) {
                let size = mask.count_ones() as usize;
                if best.map_or(true, |b| size < b) {
                    best = Some(size);
                }
            }
        }
        best
    }

    #[test]
    fn disjoint_blocks_force_everything() {
        let universe = set(&[1, 2, 3, 4]);
        let candidates = vec![set(&[1, 2]), set(&[3]), set(&[4, 9]), set(&[7])];
        let r = min_cover(&universe, &candidates).unwrap();
        assert_eq!(r.chosen, vec![0, 1, 2]);
        assert!(r.exact);
    }

    #[test]
    fn overlapping_candidates_match_brute_force() {
        let cases: Vec<(BTreeSet<u64>, Vec<BTreeSet<u64>>)> = vec![
            (
                set(&[1, 2, 3, 4, 5]),
                vec![set(&[1, 2, 3]), set(&[3, 4]), set(&[4, 5]), set(&[1, 5])],
            ),
            (
                set(&[1, 2, 3, 4, 5, 6]),
                vec![
                    set(&[1, 2]),
                    set(&[2, 3]),
                    set(&[3, 4]),
                    set(&[4, 5]),
                    set(&[5, 6]),
                    set(&[1, 6]),
                    set(&[1, 3, 5]),
                    set(&[2, 4, 6]),
                ],
            ),
            (
                set(&[10, 20, 30]),
                vec![set(&[10, 20, 30]), set(&[10]), set(&[20]), set(&[30])],
            ),
        ];
        for (universe, candidates) in cases {
            let expected = brute_force_size(&universe, &candidates).unwrap();
            let got = min_cover(&universe, &candidates).unwrap();
            assert_eq!(got.chosen.len(), expected);
            assert!(got.exact);
            let mut covered = BTreeSet::new();
            for &i in &got.chosen {
                covered.extend(candidates[i].iter().copied());
            }
            assert!(universe.iter().all(|x| covered.contains(x)));
        }
    }

    #[test]
    fn uncoverable_universe_is_reported() {
        let r = min_cover(&set(&[1, 2]), &[set(&[1])]);
        assert!(r.is_none());
    }

    #[test]
    fn empty_universe_needs_nothing() {
        let r = min_cover(&BTreeSet::new(), &[set(&[1])]).unwrap();
        assert!(r.chosen.is_empty());
    }

    #[test]
    fn greedy_kicks_in_past_the_limit() {
        // 30 pairwise-overlapping candidates around a chain of 40 elements.
        let universe: BTreeSet<u64> = (0..40).collect();
        let candidates: Vec<BTreeSet<u64>> = (0..30)
            .map(|i| set(&[i as u64, i as u64 + 1, (i as u64 + 20) % 40]))
            .collect();
        if let Some(r) = min_cover(&universe, &candidates) {
            let mut covered = BTreeSet::new();
            for &i in &r.chosen {
                covered.extend(candidates[i].iter().copied());
            }
            assert!(universe.iter().all(|x| covered.contains(x)));
        }
    }
}
