//! Placement of granted RB counts onto concrete RB indices.
//!
//! Every strategy lays out each MNO's grant at a station as one contiguous
//! block, blocks packed from RB 0, unallocated RBs at the tail. Strategies
//! differ only in the order of blocks at each station.

use std::collections::BTreeMap;

use super::{EnforcementStrategy, RbGrid, ScmError, SlicePolicy};
use crate::metrics::{column_partially_shared, partial_shared_count};
use crate::topology::InterferenceGraph;
use crate::MnoId;

/// Block order per grid row; row `i` is the graph's `i`-th station.
pub type BlockOrder = Vec<Vec<MnoId>>;

/// Places the contiguous blocks of `orders` into a grid over the graph's stations.
pub fn layout_blocks(policy: &SlicePolicy, graph: &InterferenceGraph, orders: &BlockOrder) -> RbGrid {
    let rows = graph
        .bs_ids()
        .iter()
        .zip(orders)
        .map(|(&b, order)| {
            let mut row = Vec::with_capacity(policy.capacity(b) as usize);
            for &m in order {
                row.extend(std::iter::repeat_n(Some(m), policy.grant(b, m) as usize));
            }
            row.resize(policy.capacity(b) as usize, None);
            (b, row)
        })
        .collect();
    RbGrid::from_rows(rows)
}

/// The block orders a strategy starts from before any local search.
///
/// For `CoordinationAware` this is the canonical global order: MNOs by total
/// granted RBs descending, ties to the lower id, the same at every station.
pub fn initial_block_orders(
    policy: &SlicePolicy,
    graph: &InterferenceGraph,
    strategy: EnforcementStrategy,
    request_order: &[MnoId],
) -> BlockOrder {
    let global: Vec<MnoId> = match strategy {
        EnforcementStrategy::Fcfs => {
            let mut seen = Vec::new();
            for &m in request_order {
                if !seen.contains(&m) {
                    seen.push(m);
                }
            }
            seen
        }
        EnforcementStrategy::CoordinationAware => {
            let mut mnos = policy.mnos();
            mnos.sort_by_key(|&m| (std::cmp::Reverse(policy.total_granted(m)), m));
            mnos
        }
        EnforcementStrategy::Greedy => Vec::new(),
    };
    graph
        .bs_ids()
        .iter()
        .map(|&b| match strategy {
            EnforcementStrategy::Greedy => {
                let mut local: Vec<(MnoId, u32)> = policy.grants_at(b).collect();
                local.sort_by_key(|&(m, c)| (std::cmp::Reverse(c), m));
                local.into_iter().map(|(m, _)| m).collect()
            }
            _ => global
                .iter()
                .copied()
                .filter(|&m| policy.grant(b, m) > 0)
                .collect(),
        })
        .collect()
}

fn check_inputs(
    policy: &SlicePolicy,
    graph: &InterferenceGraph,
    request_order: &[MnoId],
) -> Result<(), ScmError> {
    if !graph.bs_ids().iter().copied().eq(policy.capacities().keys().copied()) {
        return Err(ScmError::PolicyInvariantViolation(
            "policy stations differ from the interference graph stations".into(),
        ));
    }
    if let Some(m) = policy.mnos().into_iter().find(|m| !request_order.contains(m)) {
        return Err(ScmError::PolicyInvariantViolation(format!(
            "MNO {m} holds RBs but is missing from the request order"
        )));
    }
    Ok(())
}

/// Enforces `policy` on the RB grid under `strategy`.
///
/// `request_order` lists MNOs by request timestamp and must cover every MNO
/// in the policy. The coordination-aware strategy starts from whichever of
/// the canonical global order, the FCFS layout and the greedy layout shares
/// the most RBs, then hill-climbs by swapping adjacent blocks at one station
/// while the partially shared RB count strictly increases.
pub fn enforce_slicing(
    policy: &SlicePolicy,
    graph: &InterferenceGraph,
    strategy: EnforcementStrategy,
    request_order: &[MnoId],
) -> Result<RbGrid, ScmError> {
    check_inputs(policy, graph, request_order)?;
    if strategy != EnforcementStrategy::CoordinationAware {
        let orders = initial_block_orders(policy, graph, strategy, request_order);
        return Ok(layout_blocks(policy, graph, &orders));
    }

    let mut best: Option<(usize, BlockOrder)> = None;
    for start in [
        EnforcementStrategy::CoordinationAware,
        EnforcementStrategy::Fcfs,
        EnforcementStrategy::Greedy,
    ] {
        let orders = initial_block_orders(policy, graph, start, request_order);
        let shared = partial_shared_count(&layout_blocks(policy, graph, &orders), graph);
        if best.as_ref().is_none_or(|(s, _)| shared > *s) {
            best = Some((shared, orders));
        }
    }
    let (_, orders) = best.expect("three candidates");
    Ok(BlockSwapSearch::new(policy, graph, orders).run())
}

struct BlockSwapSearch<'a> {
    graph: &'a InterferenceGraph,
    edges: Vec<(usize, usize)>,
    grants: Vec<BTreeMap<MnoId, u32>>,
    orders: BlockOrder,
    grid: RbGrid,
    shared: Vec<bool>,
}

impl<'a> BlockSwapSearch<'a> {
    fn new(policy: &SlicePolicy, graph: &'a InterferenceGraph, orders: BlockOrder) -> Self {
        let grid = layout_blocks(policy, graph, &orders);
        let edges: Vec<_> = graph.edges().collect();
        let shared = (0..grid.width())
            .map(|r| column_partially_shared(&grid, &edges, r))
            .collect();
        let grants = graph
            .bs_ids()
            .iter()
            .map(|&b| policy.grants_at(b).collect())
            .collect();
        Self {
            graph,
            edges,
            grants,
            orders,
            grid,
            shared,
        }
    }

    fn block_start(&self, row: usize, pos: usize) -> usize {
        self.orders[row][..pos]
            .iter()
            .map(|m| self.grants[row][m] as usize)
            .sum()
    }

    fn write_blocks(&mut self, row: usize, start: usize, blocks: [MnoId; 2]) {
        let mut r = start;
        for m in blocks {
            let len = self.grants[row][&m] as usize;
            for cell in &mut self.grid.rows[row][r..r + len] {
                *cell = Some(m);
            }
            r += len;
        }
    }

    /// Swaps blocks `pos` and `pos + 1` at `row` if that strictly increases
    /// the shared count.
    fn try_swap(&mut self, row: usize, pos: usize) -> bool {
        let (a, b) = (self.orders[row][pos], self.orders[row][pos + 1]);
        let start = self.block_start(row, pos);
        let span = start..start + (self.grants[row][&a] + self.grants[row][&b]) as usize;

        self.write_blocks(row, start, [b, a]);
        let mut delta = 0i64;
        let mut flags = Vec::with_capacity(span.len());
        for r in span.clone() {
            let now = column_partially_shared(&self.grid, &self.edges, r);
            delta += now as i64 - self.shared[r] as i64;
            flags.push(now);
        }
        if delta > 0 {
            self.orders[row].swap(pos, pos + 1);
            self.shared[span].copy_from_slice(&flags);
            true
        } else {
            self.write_blocks(row, start, [a, b]);
            false
        }
    }

    fn run(mut self) -> RbGrid {
        if self.edges.is_empty() {
            return self.grid;
        }
        loop {
            let mut improved = false;
            for row in 0..self.graph.n() {
                for pos in 0..self.orders[row].len().saturating_sub(1) {
                    improved |= self.try_swap(row, pos);
                }
            }
            if !improved {
                return self.grid;
            }
        }
    }
}
