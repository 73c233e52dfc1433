//! Capacity-window accounting shared by the allocation and feature models,
//! plus explicit per-compartment plan helpers.

use std::collections::BTreeMap;

use locker_optim::{IntModel, Sense, VarId};

/// Deliberate model defects, used to confirm the self-test suites notice
/// them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Window-end rule looks one epoch too late.
    WindowEndOffByOne,
    /// Secondary objective scaled by 1 instead of its upper bound.
    WrongUpperBound,
}

#[derive(Debug, Clone)]
pub struct WindowVars {
    /// `free[δ][f-1]`: free compartments of size δ at epoch f.
    pub free: Vec<Vec<VarId>>,
    /// `starts[δ]`: `(start, length, var)` for every window variable.
    pub starts: Vec<Vec<(usize, usize, VarId)>>,
    /// `total[δ][λ-1]`: windows of length λ, summed over start epochs.
    pub total: Vec<Vec<VarId>>,
}

/// Per-size occupancy description handed to [`add_window_accounting`].
pub(crate) struct Occupancy<'a> {
    /// Terms and constant occupying size δ at epoch f (1-based).
    pub at: &'a dyn Fn(usize, usize) -> (Vec<(VarId, i64)>, i64),
    /// Terms for blocks that start at epoch f in size δ.
    pub starting: &'a dyn Fn(usize, usize) -> Vec<(VarId, i64)>,
}

/// Adds free-capacity and window variables over epochs `1..=horizon`.
///
/// Windows ending before `end_rule_limit` must be followed by a block
/// starting in the same size; windows may not end in
/// `forbidden_end` (inclusive range), if given.
pub(crate) fn add_window_accounting(
    model: &mut IntModel,
    capacity: &[u32],
    horizon: usize,
    occ: &Occupancy,
    end_rule_limit: usize,
    forbidden_end: Option<(usize, usize)>,
    fault: Option<Fault>,
) -> WindowVars {
    let nd = capacity.len();
    let mut free = Vec::with_capacity(nd);
    let mut starts = Vec::with_capacity(nd);
    let mut total = Vec::with_capacity(nd);
    for delta in 0..nd {
        let q = capacity[delta] as i64;
        let s: Vec<VarId> = (1..=horizon)
            .map(|f| model.add_var(format!("s_{}_{f}", delta + 1), 0, q, 0.0))
            .collect();
        for f in 1..=horizon {
            let (mut terms, constant) = (occ.at)(delta, f);
            terms.push((s[f - 1], 1));
            model.add_constraint(format!("cap_{}_{f}", delta + 1), terms, Sense::Eq, q - constant);
        }
        let mut w = Vec::new();
        for j in 1..=horizon {
            for len in 1..=horizon - j + 1 {
                let id = model.add_var(format!("w_{}_{len}_{j}", delta + 1), 0, q, 0.0);
                w.push((j, len, id));
            }
        }
        for f in 1..=horizon {
            let terms: Vec<(VarId, i64)> = w
                .iter()
                .filter(|&&(j, len, _)| j <= f && j + len > f)
                .map(|&(_, _, id)| (id, 1))
                .chain(std::iter::once((s[f - 1], -1)))
                .collect();
            model.add_constraint(format!("s_to_w_{}_{f}", delta + 1), terms, Sense::Eq, 0);
        }
        for f in 2..=end_rule_limit.min(horizon) {
            let end = match fault {
                Some(Fault::WindowEndOffByOne) => f,
                _ => f - 1,
            };
            let mut terms: Vec<(VarId, i64)> = w
                .iter()
                .filter(|&&(j, len, _)| j + len - 1 == end)
                .map(|&(_, _, id)| (id, 1))
                .collect();
            terms.extend((occ.starting)(delta, f).into_iter().map(|(id, a)| (id, -a)));
            model.add_constraint(format!("w_end_{}_{f}", delta + 1), terms, Sense::Le, 0);
        }
        if let Some((lo, hi)) = forbidden_end {
            let terms: Vec<(VarId, i64)> = w
                .iter()
                .filter(|&&(j, len, _)| (lo..=hi).contains(&(j + len - 1)))
                .map(|&(_, _, id)| (id, 1))
                .collect();
            if !terms.is_empty() {
                model.add_constraint(format!("to_end_{}", delta + 1), terms, Sense::Eq, 0);
            }
        }
        let agg: Vec<VarId> = (1..=horizon)
            .map(|len| {
                // k windows of length len need k·len + k - 1 epochs in one row.
                let per_row = ((horizon + 1) / (len + 1)) as i64;
                let id = model.add_var(format!("W_{}_{len}", delta + 1), 0, q * per_row, 0.0);
                let mut terms: Vec<(VarId, i64)> = w
                    .iter()
                    .filter(|&&(_, l, _)| l == len)
                    .map(|&(_, _, wid)| (wid, 1))
                    .collect();
                terms.push((id, -1));
                model.add_constraint(format!("wf_to_w_{}_{len}", delta + 1), terms, Sense::Eq, 0);
                id
            })
            .collect();
        free.push(s);
        starts.push(w);
        total.push(agg);
    }
    WindowVars { free, starts, total }
}

/// Maximal free runs per compartment row, keyed by `(size, length)`.
/// `rows` holds `(size, occupied per epoch)`.
pub fn count_windows_oracle(rows: &[(usize, Vec<bool>)]) -> BTreeMap<(usize, usize), u32> {
    let mut out = BTreeMap::new();
    for (size, occupied) in rows {
        let mut run = 0;
        for &busy in occupied.iter().chain(std::iter::once(&true)) {
            if busy {
                if run > 0 {
                    *out.entry((*size, run)).or_insert(0) += 1;
                }
                run = 0;
            } else {
                run += 1;
            }
        }
    }
    out
}

/// Assigns closed epoch intervals to `rows` compartments so that no two
/// overlap in a row, processing blocks by start epoch and taking the
/// lowest free row. Returns the row of each block, or `None` if some
/// epoch needs more than `rows` compartments.
pub fn assign_rows(rows: usize, blocks: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut order: Vec<usize> = (0..blocks.len()).collect();
    order.sort_by_key(|&i| (blocks[i].0, blocks[i].1));
    let mut busy_until = vec![0usize; rows];
    let mut out = vec![usize::MAX; blocks.len()];
    for i in order {
        let (start, end) = blocks[i];
        let r = (0..rows).find(|&r| busy_until[r] < start)?;
        busy_until[r] = end;
        out[i] = r;
    }
    Some(out)
}

/// Builds the occupied/free grid of one size from assigned blocks.
pub fn plan_grid(size: usize, rows: usize, horizon: usize, blocks: &[(usize, usize)]) -> Option<Vec<(usize, Vec<bool>)>> {
    let assignment = assign_rows(rows, blocks)?;
    let mut grid = vec![(size, vec![false; horizon]); rows];
    for (&(start, end), &r) in blocks.iter().zip(&assignment) {
        for f in start..=end.min(horizon) {
            grid[r].1[f - 1] = true;
        }
    }
    Some(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_row_window_bound_is_tight() {
        for horizon in 1..=11usize {
            let mut most = vec![0u32; horizon + 1];
            for mask in 0u32..1 << horizon {
                let row: Vec<bool> = (0..horizon).map(|f| mask >> f & 1 == 1).collect();
                for ((_, len), n) in count_windows_oracle(&[(0, row)]) {
                    most[len] = most[len].max(n);
                }
            }
            for len in 1..=horizon {
                assert_eq!(most[len] as usize, (horizon + 1) / (len + 1), "horizon {horizon} length {len}");
            }
        }
    }

    #[test]
    fn free_grid_has_full_windows() {
        let rows = vec![(0, vec![false; 6]), (0, vec![false; 6]), (1, vec![false; 6])];
        let w = count_windows_oracle(&rows);
        assert_eq!(w.get(&(0, 6)), Some(&2));
        assert_eq!(w.get(&(1, 6)), Some(&1));
        assert_eq!(w.len(), 2);
    }

    #[test]
    fn runs_split_by_blocks() {
        let rows = vec![(1, vec![true, true, false, true, true, true])];
        let w = count_windows_oracle(&rows);
        assert_eq!(w.into_iter().collect::<Vec<_>>(), vec![((1, 1), 1)]);
    }

    #[test]
    fn interval_assignment_respects_capacity() {
        let blocks = [(1, 2), (1, 1), (2, 4), (3, 5)];
        let rows = assign_rows(2, &blocks).unwrap();
        for i in 0..blocks.len() {
            for j in i + 1..blocks.len() {
                if rows[i] == rows[j] {
                    assert!(blocks[i].1 < blocks[j].0 || blocks[j].1 < blocks[i].0);
                }
            }
        }
        assert!(assign_rows(1, &blocks).is_none());
    }
}
