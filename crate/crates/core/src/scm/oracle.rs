//! Exhaustive enforcement for small instances.

use super::{RbGrid, ScmError, SlicePolicy};
use crate::metrics::column_partially_shared;
use crate::topology::InterferenceGraph;
use crate::MnoId;

/// Largest number of grid labelings [`oracle_enforce`] will enumerate.
pub const ORACLE_MAX_LABELINGS: u64 = 1_000_000;

/// Number of grids consistent with the policy's per-station counts: the
/// product over stations of the multinomial arrangement counts.
pub fn arrangement_count(policy: &SlicePolicy) -> f64 {
    policy
        .capacities()
        .keys()
        .map(|&b| {
            let mut counts: Vec<u32> = policy.grants_at(b).map(|(_, c)| c).collect();
            counts.push(policy.capacity(b) - policy.allocated_at(b));
            multinomial(&counts)
        })
        .product()
}

fn multinomial(counts: &[u32]) -> f64 {
    let mut result = 1.0f64;
    let mut n = 0u32;
    for &k in counts {
        for i in 1..=k {
            n += 1;
            result = result * n as f64 / i as f64;
        }
    }
    result.round()
}

/// Next lexicographic permutation in place; false once the last one is reached.
fn next_permutation<T: Ord>(v: &mut [T]) -> bool {
    let Some(i) = v.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = v.iter().rposition(|x| *x > v[i]).expect("pivot has a successor");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

fn row_labelings(policy: &SlicePolicy, bs: crate::BsId) -> Vec<Vec<Option<MnoId>>> {
    let mut row: Vec<Option<MnoId>> = Vec::with_capacity(policy.capacity(bs) as usize);
    for (m, c) in policy.grants_at(bs) {
        row.extend(std::iter::repeat_n(Some(m), c as usize));
    }
    row.resize(policy.capacity(bs) as usize, None);
    row.sort();
    let mut out = vec![row.clone()];
    while next_permutation(&mut row) {
        out.push(row.clone());
    }
    out
}

/// Enumerates every labeling consistent with the policy and returns one that
/// maximizes the partially shared RB count, with that count. Among optimal
/// grids the lexicographically smallest is returned (unallocated sorts
/// before any MNO).
pub fn oracle_enforce(
    policy: &SlicePolicy,
    graph: &InterferenceGraph,
) -> Result<(RbGrid, usize), ScmError> {
    if !graph.bs_ids().iter().copied().eq(policy.capacities().keys().copied()) {
        return Err(ScmError::PolicyInvariantViolation(
            "policy stations differ from the interference graph stations".into(),
        ));
    }
    let labelings = arrangement_count(policy);
    if labelings > ORACLE_MAX_LABELINGS as f64 {
        return Err(ScmError::InstanceTooLarge {
            labelings,
            limit: ORACLE_MAX_LABELINGS,
        });
    }

    let choices: Vec<Vec<Vec<Option<MnoId>>>> = graph
        .bs_ids()
        .iter()
        .map(|&b| row_labelings(policy, b))
        .collect();
    let edges: Vec<_> = graph.edges().collect();
    let rows_of = |idx: &[usize]| {
        RbGrid::from_rows(
            graph
                .bs_ids()
                .iter()
                .zip(idx)
                .enumerate()
                .map(|(i, (&b, &k))| (b, choices[i][k].clone()))
                .collect(),
        )
    };

    let n = choices.len();
    let mut idx = vec![0usize; n];
    let mut grid = rows_of(&idx);
    let width = grid.width();
    let mut best: Option<(usize, Vec<usize>)> = None;
    loop {
        let shared = (0..width)
            .filter(|&r| column_partially_shared(&grid, &edges, r))
            .count();
        if best.as_ref().is_none_or(|(s, _)| shared > *s) {
            best = Some((shared, idx.clone()));
        }

        // Odometer: the last station varies fastest, giving lexicographic order.
        let mut i = n;
        loop {
            if i == 0 {
                let (shared, at) = best.expect("at least one labeling");
                return Ok((rows_of(&at), shared));
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < choices[i].len() {
                grid.rows[i].clone_from(&choices[i][idx[i]]);
                break;
            }
            idx[i] = 0;
            grid.rows[i].clone_from(&choices[i][0]);
        }
    }
}
