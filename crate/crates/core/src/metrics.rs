//! Coordination metrics over an enforced RB grid and cross-run statistics.
//!
//! RB index `r` is *fully coordinated* when a single MNO owns `r` at every
//! station of the cluster, and *partially coordinated* when some MNO owns `r`
//! at two stations joined by an interference edge. Percentages are taken over
//! the widest station's RB count; shorter rows read as unallocated.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::scm::RbGrid;
use crate::topology::InterferenceGraph;
use crate::MnoId;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("grid stations {grid:?} do not match graph stations {graph:?}")]
    GridGraphMismatch { grid: usize, graph: usize },
    #[error("no values to aggregate")]
    EmptyInput,
    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidConfidence(f64),
}

/// Which stations must agree for full coordination.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FullScope {
    /// Every station in the cluster.
    #[default]
    Cluster,
    /// Every station within each connected component of the interference graph.
    ConnectedComponent,
}

/// Which station pairs count for partial coordination.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartialScope {
    /// Only pairs joined by an interference edge.
    #[default]
    Interfering,
    /// Any two stations; sensitivity analysis only.
    AnyPair,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricOptions {
    pub full_scope: FullScope,
    pub partial_scope: PartialScope,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MnoShare {
    pub full: usize,
    pub partial: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharedRbStats {
    pub num_rbs: usize,
    pub full_count: usize,
    pub partial_count: usize,
    pub full_pct: f64,
    pub partial_pct: f64,
    pub per_mno: BTreeMap<MnoId, MnoShare>,
}

impl SharedRbStats {
    /// Grid-global percentages averaged per MNO instead of over the grid.
    pub fn per_mno_pct(&self) -> BTreeMap<MnoId, (f64, f64)> {
        let pct = |c: usize| 100.0 * c as f64 / self.num_rbs.max(1) as f64;
        self.per_mno
            .iter()
            .map(|(&m, s)| (m, (pct(s.full), pct(s.partial))))
            .collect()
    }
}

/// True when some MNO owns RB `r` at both ends of one of `edges`.
pub(crate) fn column_partially_shared(grid: &RbGrid, edges: &[(usize, usize)], r: usize) -> bool {
    edges.iter().any(|&(a, b)| {
        let owner = grid.cell(a, r);
        owner.is_some() && owner == grid.cell(b, r)
    })
}

/// Number of partially coordinated RB indices (interference edges only).
pub fn partial_shared_count(grid: &RbGrid, graph: &InterferenceGraph) -> usize {
    let edges: Vec<_> = graph.edges().collect();
    (0..grid.width())
        .filter(|&r| column_partially_shared(grid, &edges, r))
        .count()
}

fn single_owner(grid: &RbGrid, rows: &[usize], r: usize) -> Option<MnoId> {
    let first = grid.cell(*rows.first()?, r)?;
    rows.iter()
        .all(|&i| grid.cell(i, r) == Some(first))
        .then_some(first)
}

pub fn shared_rb_stats(
    grid: &RbGrid,
    graph: &InterferenceGraph,
    opts: &MetricOptions,
) -> Result<SharedRbStats, MetricsError> {
    if grid.bs_ids() != graph.bs_ids() {
        return Err(MetricsError::GridGraphMismatch {
            grid: grid.bs_ids().len(),
            graph: graph.n(),
        });
    }
    let n = graph.n();
    let pairs: Vec<(usize, usize)> = match opts.partial_scope {
        PartialScope::Interfering => graph.edges().collect(),
        PartialScope::AnyPair => (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .collect(),
    };
    let groups: Vec<Vec<usize>> = match opts.full_scope {
        FullScope::Cluster => vec![(0..n).collect()],
        FullScope::ConnectedComponent => graph.components(),
    };

    let width = grid.width();
    let mut per_mno: BTreeMap<MnoId, MnoShare> = BTreeMap::new();
    for row in grid.rows() {
        for m in row.iter().flatten() {
            per_mno.entry(*m).or_default();
        }
    }
    let (mut full_count, mut partial_count) = (0, 0);
    for r in 0..width {
        let mut partial_owners: Vec<MnoId> = pairs
            .iter()
            .filter_map(|&(a, b)| {
                let o = grid.cell(a, r)?;
                (grid.cell(b, r) == Some(o)).then_some(o)
            })
            .collect();
        partial_owners.sort();
        partial_owners.dedup();
        if !partial_owners.is_empty() {
            partial_count += 1;
        }
        for m in partial_owners {
            per_mno.entry(m).or_default().partial += 1;
        }

        let owners: Option<Vec<MnoId>> = groups
            .iter()
            .map(|g| single_owner(grid, g, r))
            .collect();
        if let Some(mut owners) = owners.filter(|o| !o.is_empty()) {
            full_count += 1;
            owners.sort();
            owners.dedup();
            for m in owners {
                per_mno.entry(m).or_default().full += 1;
            }
        }
    }

    let pct = |c: usize| {
        if width == 0 {
            0.0
        } else {
            100.0 * c as f64 / width as f64
        }
    };
    Ok(SharedRbStats {
        num_rbs: width,
        full_count,
        partial_count,
        full_pct: pct(full_count),
        partial_pct: pct(partial_count),
        per_mno,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub n_runs: usize,
    pub mean: f64,
    pub ci_halfwidth: f64,
    pub confidence: f64,
}

/// Two-sided Student-t quantile `t((1 + confidence) / 2, dof)`.
pub fn t_quantile(confidence: f64, dof: f64) -> f64 {
    StudentsT::new(0.0, 1.0, dof)
        .expect("positive degrees of freedom")
        .inverse_cdf((1.0 + confidence) / 2.0)
}

/// Mean and Student-t confidence half-width of per-run values.
pub fn aggregate_runs(values: &[f64], confidence: f64) -> Result<AggregateStats, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(MetricsError::InvalidConfidence(confidence));
    }
    let n = values.len();
    let constant = values.iter().all(|&v| v == values[0]);
    let mean = if constant {
        values[0]
    } else {
        values.iter().sum::<f64>() / n as f64
    };
    let ci_halfwidth = if n == 1 || constant {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        t_quantile(confidence, (n - 1) as f64) * var.sqrt() / (n as f64).sqrt()
    };
    Ok(AggregateStats {
        n_runs: n,
        mean,
        ci_halfwidth,
        confidence,
    })
}
