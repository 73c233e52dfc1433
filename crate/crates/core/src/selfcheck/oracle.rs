//! Brute-force references that work on explicit compartments rather than
//! aggregated counts.

use std::collections::{BTreeMap, BTreeSet};

use crate::allocation::{count_windows_oracle, WindowWeights};
use crate::domain::{ArrivalLaw, LockerOccupancy, PendingOrders, PickupLaw, ProblemConfig, Request};

/// A parcel that needs one compartment over epochs `start..=end`.
#[derive(Debug, Clone, Copy)]
struct Block {
    /// Smallest admissible compartment size.
    min_size: usize,
    /// Size of a parcel already in the locker.
    fixed: Option<usize>,
    start: usize,
    end: usize,
}

fn worst_case_blocks(cfg: &ProblemConfig, l: &LockerOccupancy, o: &PendingOrders) -> Vec<Block> {
    let (b, horizon) = (cfg.max_storage, cfg.horizon());
    let mut blocks = Vec::new();
    for (delta, _, h, n) in l.cells() {
        for _ in 0..n {
            blocks.push(Block {
                min_size: delta,
                fixed: Some(delta),
                start: 1,
                end: (b - h).min(horizon),
            });
        }
    }
    for (d, _, f, n) in o.cells() {
        for _ in 0..n {
            blocks.push(Block {
                min_size: d,
                fixed: None,
                start: f,
                end: (f + b - 1).min(horizon),
            });
        }
    }
    blocks.sort_by_key(|x| (x.fixed.is_none(), x.start, std::cmp::Reverse(x.min_size)));
    blocks
}

fn row_sizes(cfg: &ProblemConfig) -> Vec<usize> {
    cfg.compartments
        .iter()
        .enumerate()
        .flat_map(|(d, &q)| std::iter::repeat_n(d, q as usize))
        .collect()
}

/// Visits every assignment of blocks to compartment rows without overlaps.
/// Empty rows of one size are interchangeable, so only the first is tried.
fn for_each_packing(sizes: &[usize], blocks: &[Block], visit: &mut dyn FnMut(&[Vec<(usize, usize)>]) -> bool) -> bool {
    fn go(
        k: usize,
        sizes: &[usize],
        blocks: &[Block],
        rows: &mut Vec<Vec<(usize, usize)>>,
        visit: &mut dyn FnMut(&[Vec<(usize, usize)>]) -> bool,
    ) -> bool {
        if k == blocks.len() {
            return visit(rows);
        }
        let b = blocks[k];
        let mut tried_empty = BTreeSet::new();
        for r in 0..sizes.len() {
            let size = sizes[r];
            let ok_size = match b.fixed {
                Some(s) => s == size,
                None => size >= b.min_size,
            };
            if !ok_size || rows[r].iter().any(|&(s, e)| s <= b.end && b.start <= e) {
                continue;
            }
            if rows[r].is_empty() && !tried_empty.insert(size) {
                continue;
            }
            rows[r].push((b.start, b.end));
            let stop = go(k + 1, sizes, blocks, rows, visit);
            rows[r].pop();
            if stop {
                return true;
            }
        }
        false
    }
    let mut rows = vec![Vec::new(); sizes.len()];
    go(0, sizes, blocks, &mut rows, visit)
}

/// Whether the locker parcels and the pending orders (plus `request`) can
/// be placed in explicit compartments when everyone stays the maximum time.
pub fn feasible_by_enumeration(cfg: &ProblemConfig, l: &LockerOccupancy, o: &PendingOrders, request: Option<&Request>) -> bool {
    let orders = match request {
        Some(r) if r.lead == 0 || r.lead > cfg.horizon() || r.size >= cfg.sizes() => return false,
        Some(r) => o.with_request(r),
        None => o.clone(),
    };
    let blocks = worst_case_blocks(cfg, l, &orders);
    for_each_packing(&row_sizes(cfg), &blocks, &mut |_| true)
}

/// Window counts keyed by `(size, length)`.
pub type WindowMultiset = BTreeMap<(usize, usize), u32>;

/// Scores window counts as `(primary, secondary)`.
pub fn window_score(weights: &WindowWeights, counts: &WindowMultiset) -> (i64, i64) {
    let mut p = 0;
    let mut s = 0;
    for (&(delta, len), &n) in counts {
        p += weights.primary[delta][len - 1] * n as i64;
        s += weights.secondary[delta][len - 1] * n as i64;
    }
    (p, s)
}

/// Lexicographically best `(primary, secondary)` window score over all
/// explicit packings, with every window multiset attaining it.
pub fn best_window_packings(
    cfg: &ProblemConfig,
    l: &LockerOccupancy,
    o: &PendingOrders,
    weights: &WindowWeights,
) -> Option<((i64, i64), BTreeSet<WindowMultiset>)> {
    let sizes = row_sizes(cfg);
    let blocks = worst_case_blocks(cfg, l, o);
    let horizon = cfg.horizon();
    let mut best: Option<((i64, i64), BTreeSet<WindowMultiset>)> = None;
    for_each_packing(&sizes, &blocks, &mut |rows| {
        let grid: Vec<(usize, Vec<bool>)> = rows
            .iter()
            .zip(&sizes)
            .map(|(blocks, &size)| {
                let mut busy = vec![false; horizon];
                for &(s, e) in blocks {
                    for f in s..=e {
                        busy[f - 1] = true;
                    }
                }
                (size, busy)
            })
            .collect();
        let counts = count_windows_oracle(&grid);
        let score = window_score(weights, &counts);
        match &mut best {
            Some((b, set)) if *b == score => {
                set.insert(counts);
            }
            Some((b, _)) if *b > score => {}
            _ => best = Some((score, BTreeSet::from([counts]))),
        }
        false
    });
    best
}

/// Two sizes with one compartment each, one customer type, three slots,
/// two-day storage and lead times up to two days.
pub fn tiny_config() -> ProblemConfig {
    ProblemConfig {
        compartments: vec![1, 1],
        priority: vec![1.0],
        max_lead: 2,
        max_storage: 2,
        slots: 3,
        arrival: ArrivalLaw {
            customer: vec![0.8],
            size: vec![vec![0.6, 0.4]],
            lead: vec![vec![0.5, 0.5]],
        },
        pickup: PickupLaw {
            day: vec![vec![0.7, 0.3]],
        },
    }
}

/// Small enough for window enumeration yet with upgrades and overlaps.
pub fn window_config() -> ProblemConfig {
    ProblemConfig {
        compartments: vec![2, 2],
        priority: vec![1.0],
        max_lead: 3,
        max_storage: 2,
        slots: 4,
        arrival: ArrivalLaw {
            customer: vec![0.9],
            size: vec![vec![0.5, 0.5]],
            lead: vec![vec![0.4, 0.3, 0.3]],
        },
        pickup: PickupLaw {
            day: vec![vec![0.6, 0.4]],
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::{cfa_coefficients, CfaScheme};

    #[test]
    fn configs_validate() {
        tiny_config().validate().unwrap();
        window_config().validate().unwrap();
    }

    #[test]
    fn enumeration_blocks_worst_case_stay() {
        let cfg = tiny_config();
        let mut l = LockerOccupancy::empty(&cfg);
        l.set(0, 0, 1, 1);
        let o = PendingOrders::empty(&cfg);
        let small = Request { customer: 0, size: 0, lead: 1 };
        let large = Request { customer: 0, size: 1, lead: 1 };
        // The small compartment is taken today; the large one is free.
        assert!(feasible_by_enumeration(&cfg, &l, &o, Some(&small)));
        assert!(feasible_by_enumeration(&cfg, &l, &o, Some(&large)));
        l.set(1, 0, 1, 1);
        assert!(!feasible_by_enumeration(&cfg, &l, &o, Some(&small)));
        let later = Request { customer: 0, size: 1, lead: 2 };
        assert!(feasible_by_enumeration(&cfg, &l, &o, Some(&later)));
    }

    #[test]
    fn empty_locker_has_full_windows() {
        let cfg = window_config();
        let w = cfa_coefficients(CfaScheme::DL, &cfg).unwrap();
        let (score, sets) = best_window_packings(&cfg, &LockerOccupancy::empty(&cfg), &PendingOrders::empty(&cfg), &w).unwrap();
        assert_eq!(sets.len(), 1);
        let only = sets.into_iter().next().unwrap();
        assert_eq!(only, BTreeMap::from([((0, 3), 2), ((1, 3), 2)]));
        assert_eq!(score, (2 * 3 + 2 * 6, 4 * 5));
    }
}
