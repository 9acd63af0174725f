//! Slicing computation module of the infrastructure provider.
//!
//! The three procedures run in sequence on the collected requests:
//! [`admission_control`] filters unfeasible or over-budget requests,
//! [`allocate_slices`] turns demands into per-(BS, MNO) RB counts, and
//! [`enforce_slicing`] places those counts on concrete RB indices.
//! [`oracle_enforce`] solves small enforcement instances exactly.

mod admission;
mod allocation;
mod enforcement;
mod oracle;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{BsId, MnoId, RbCounts};

pub use admission::{admission_control, AdmissionOutcome};
pub use allocation::allocate_slices;
pub use enforcement::{enforce_slicing, initial_block_orders, layout_blocks, BlockOrder};
pub use oracle::{arrangement_count, oracle_enforce, ORACLE_MAX_LABELINGS};

#[derive(Debug, Error)]
pub enum ScmError {
    #[error("slice policy invariant violated: {0}")]
    PolicyInvariantViolation(String),
    #[error("instance too large for exhaustive search: {labelings} labelings (limit {limit})")]
    InstanceTooLarge { labelings: f64, limit: u64 },
    #[error("unknown enforcement strategy `{0}` (expected fcfs, greedy or coordination-aware)")]
    UnknownStrategy(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed policy: {0}")]
    Json(#[from] serde_json::Error),
}

/// Per-(BS, MNO) RB counts granted by the allocation step, together with
/// the capacity of each station.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlicePolicy {
    capacities: RbCounts,
    grants: BTreeMap<BsId, BTreeMap<MnoId, u32>>,
}

impl SlicePolicy {
    pub fn new(
        capacities: RbCounts,
        grants: BTreeMap<BsId, BTreeMap<MnoId, u32>>,
    ) -> Result<Self, ScmError> {
        let mut grants = grants;
        for (bs, per_mno) in grants.iter_mut() {
            let Some(&cap) = capacities.get(bs) else {
                return Err(ScmError::PolicyInvariantViolation(format!(
                    "grant at unknown base station {bs}"
                )));
            };
            per_mno.retain(|_, c| *c > 0);
            let total: u64 = per_mno.values().map(|&c| c as u64).sum();
            if total > cap as u64 {
                return Err(ScmError::PolicyInvariantViolation(format!(
                    "base station {bs} grants {total} RBs but has {cap}"
                )));
            }
        }
        grants.retain(|_, m| !m.is_empty());
        Ok(Self { capacities, grants })
    }

    /// Parses the `{bs_id: {mno_id: count}}` JSON form; capacities come
    /// from the topology.
    pub fn from_json(json: &str, capacities: RbCounts) -> Result<Self, ScmError> {
        let grants: BTreeMap<BsId, BTreeMap<MnoId, u32>> = serde_json::from_str(json)?;
        Self::new(capacities, grants)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.grants).expect("policy maps serialize")
    }

    pub fn capacities(&self) -> &RbCounts {
        &self.capacities
    }

    pub fn capacity(&self, bs: BsId) -> u32 {
        self.capacities.get(&bs).copied().unwrap_or(0)
    }

    pub fn grants(&self) -> &BTreeMap<BsId, BTreeMap<MnoId, u32>> {
        &self.grants
    }

    pub fn grants_at(&self, bs: BsId) -> impl Iterator<Item = (MnoId, u32)> + '_ {
        self.grants
            .get(&bs)
            .into_iter()
            .flat_map(|m| m.iter().map(|(&k, &v)| (k, v)))
    }

    pub fn grant(&self, bs: BsId, mno: MnoId) -> u32 {
        self.grants
            .get(&bs)
            .and_then(|m| m.get(&mno))
            .copied()
            .unwrap_or(0)
    }

    /// MNOs holding at least one RB, ascending.
    pub fn mnos(&self) -> Vec<MnoId> {
        let mut v: Vec<MnoId> = self.grants.values().flat_map(|m| m.keys().copied()).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn total_granted(&self, mno: MnoId) -> u64 {
        self.grants
            .values()
            .filter_map(|m| m.get(&mno))
            .map(|&c| c as u64)
            .sum()
    }

    pub fn granted_to(&self, mno: MnoId) -> RbCounts {
        self.grants
            .iter()
            .filter_map(|(&b, m)| m.get(&mno).map(|&c| (b, c)))
            .collect()
    }

    pub fn allocated_at(&self, bs: BsId) -> u32 {
        self.grants_at(bs).map(|(_, c)| c).sum()
    }
}

/// Owner of every RB at every station; `None` marks an unallocated RB.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RbGrid {
    bs_ids: Vec<BsId>,
    rows: Vec<Vec<Option<MnoId>>>,
}

impl RbGrid {
    /// Fully unallocated grid, stations in ascending id order.
    pub fn new(capacities: &RbCounts) -> Self {
        Self {
            bs_ids: capacities.keys().copied().collect(),
            rows: capacities.values().map(|&c| vec![None; c as usize]).collect(),
        }
    }

    pub fn from_rows(rows: Vec<(BsId, Vec<Option<MnoId>>)>) -> Self {
        let (bs_ids, rows) = rows.into_iter().unzip();
        Self { bs_ids, rows }
    }

    pub fn bs_ids(&self) -> &[BsId] {
        &self.bs_ids
    }

    pub fn rows(&self) -> &[Vec<Option<MnoId>>] {
        &self.rows
    }

    pub fn row(&self, bs: BsId) -> Option<&[Option<MnoId>]> {
        let i = self.bs_ids.iter().position(|&b| b == bs)?;
        Some(&self.rows[i])
    }

    pub fn row_mut(&mut self, bs: BsId) -> Option<&mut Vec<Option<MnoId>>> {
        let i = self.bs_ids.iter().position(|&b| b == bs)?;
        Some(&mut self.rows[i])
    }

    /// Longest row; shorter rows read as unallocated past their end.
    pub fn width(&self) -> usize {
        self.rows.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn cell(&self, row: usize, rb: usize) -> Option<MnoId> {
        self.rows[row].get(rb).copied().flatten()
    }

    pub fn counts(&self, row: usize) -> BTreeMap<MnoId, u32> {
        let mut out = BTreeMap::new();
        for m in self.rows[row].iter().flatten() {
            *out.entry(*m).or_default() += 1;
        }
        out
    }

    pub fn allocated_counts(&self) -> RbCounts {
        self.bs_ids
            .iter()
            .zip(&self.rows)
            .map(|(&b, row)| (b, row.iter().filter(|c| c.is_some()).count() as u32))
            .collect()
    }

    pub fn rb_indices(&self, mno: MnoId) -> BTreeMap<BsId, Vec<u32>> {
        self.bs_ids
            .iter()
            .zip(&self.rows)
            .filter_map(|(&b, row)| {
                let idx: Vec<u32> = row
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| **c == Some(mno))
                    .map(|(r, _)| r as u32)
                    .collect();
                (!idx.is_empty()).then_some((b, idx))
            })
            .collect()
    }

    /// True when every (BS, MNO) cell count equals the policy grant and every
    /// row has the policy's capacity.
    pub fn conforms_to(&self, policy: &SlicePolicy) -> bool {
        if self.bs_ids.len() != policy.capacities().len() {
            return false;
        }
        self.bs_ids.iter().enumerate().all(|(i, &b)| {
            let expected: BTreeMap<MnoId, u32> = policy.grants_at(b).collect();
            self.rows[i].len() == policy.capacity(b) as usize && self.counts(i) == expected
        })
    }

    /// CSV with a `bs_id,0,1,...` header; one row per station, owner id or
    /// `-1` per RB. RB positions beyond a shorter station's capacity are empty.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(w);
        let width = self.width();
        write!(w, "bs_id")?;
        for r in 0..width {
            write!(w, ",{r}")?;
        }
        writeln!(w)?;
        for (b, row) in self.bs_ids.iter().zip(&self.rows) {
            write!(w, "{b}")?;
            for r in 0..width {
                match row.get(r) {
                    Some(Some(m)) => write!(w, ",{m}")?,
                    Some(None) => write!(w, ",-1")?,
                    None => write!(w, ",")?,
                }
            }
            writeln!(w)?;
        }
        w.flush()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnforcementStrategy {
    /// Contiguous blocks in request-submission order at every station.
    Fcfs,
    /// Contiguous blocks, largest local grant first, ranked per station.
    Greedy,
    /// Shared global block order refined by block-swap local search.
    CoordinationAware,
}

impl EnforcementStrategy {
    pub const ALL: [EnforcementStrategy; 3] = [Self::Fcfs, Self::Greedy, Self::CoordinationAware];

    pub fn name(self) -> &'static str {
        match self {
            Self::Fcfs => "fcfs",
            Self::Greedy => "greedy",
            Self::CoordinationAware => "coordination-aware",
        }
    }
}

impl fmt::Display for EnforcementStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnforcementStrategy {
    type Err = ScmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "fcfs" => Ok(Self::Fcfs),
            "greedy" => Ok(Self::Greedy),
            "coordination-aware" | "coordination" | "coord" => Ok(Self::CoordinationAware),
            _ => Err(ScmError::UnknownStrategy(s.to_string())),
        }
    }
}
