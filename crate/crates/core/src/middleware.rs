//! I/O middleware between MNOs and the infrastructure provider.
//!
//! * [`snapshot_dvi`] exposes the public view of the RAN database: stations,
//!   prices and congestion, never which MNO holds what.
//! * [`ClassBuffers`] is the submission interface and request collector: one
//!   FIFO buffer per QoS class, drained in priority order.
//! * [`MessageBroker`] carries admit/reject notifications back to each MNO.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scm::RbGrid;
use crate::topology::{LatLon, Topology};
use crate::{BsId, MnoId, RbCounts};

#[derive(Debug, Error)]
pub enum MiddlewareError {
    #[error("invalid request from MNO {mno_id}: {reason}")]
    InvalidRequest { mno_id: MnoId, reason: String },
    #[error("cannot read request batch: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed request batch: {0}")]
    Json(#[from] serde_json::Error),
}

/// Public per-BS record of the database view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DviRecord {
    pub bs_id: BsId,
    pub location: LatLon,
    pub price_per_rb: f64,
    pub num_rbs: u32,
    pub rbs_currently_allocated: u32,
    /// `rbs_currently_allocated / num_rbs`.
    pub congestion: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DviSnapshot {
    pub records: Vec<DviRecord>,
}

impl DviSnapshot {
    /// View built from cumulative per-BS allocated counts. Counts above
    /// capacity are clamped; stations missing from `loads` read as idle.
    pub fn from_loads(topology: &Topology, loads: &RbCounts) -> Self {
        let records = topology
            .stations()
            .iter()
            .map(|s| {
                let allocated = loads.get(&s.bs_id).copied().unwrap_or(0).min(s.num_rbs);
                DviRecord {
                    bs_id: s.bs_id,
                    location: s.location,
                    price_per_rb: s.price_per_rb,
                    num_rbs: s.num_rbs,
                    rbs_currently_allocated: allocated,
                    congestion: allocated as f64 / s.num_rbs as f64,
                }
            })
            .collect();
        Self { records }
    }

    pub fn record(&self, bs_id: BsId) -> Option<&DviRecord> {
        self.records.iter().find(|r| r.bs_id == bs_id)
    }

    pub fn allocated(&self) -> RbCounts {
        self.records
            .iter()
            .map(|r| (r.bs_id, r.rbs_currently_allocated))
            .collect()
    }

    pub fn capacities(&self) -> RbCounts {
        self.records.iter().map(|r| (r.bs_id, r.num_rbs)).collect()
    }

    pub fn prices(&self) -> BTreeMap<BsId, f64> {
        self.records
            .iter()
            .map(|r| (r.bs_id, r.price_per_rb))
            .collect()
    }

    pub fn mean_congestion(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| r.congestion).sum::<f64>() / self.records.len() as f64
    }
}

/// Builds the database view; without a grid every station reads as idle.
pub fn snapshot_dvi(topology: &Topology, current_grid: Option<&RbGrid>) -> DviSnapshot {
    let loads = current_grid.map(RbGrid::allocated_counts).unwrap_or_default();
    DviSnapshot::from_loads(topology, &loads)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceRequest {
    pub mno_id: MnoId,
    pub class_id: u32,
    pub timestamp: u64,
    pub demanded: RbCounts,
    pub max_price: f64,
}

impl SliceRequest {
    pub fn validate(&self) -> Result<(), MiddlewareError> {
        let invalid = |reason: &str| MiddlewareError::InvalidRequest {
            mno_id: self.mno_id,
            reason: reason.to_string(),
        };
        if self.demanded.is_empty() {
            return Err(invalid("empty demand map"));
        }
        if self.demanded.values().all(|&c| c == 0) {
            return Err(invalid("all demanded counts are zero"));
        }
        if !(self.max_price >= 0.0) {
            return Err(invalid("max_price must be non-negative"));
        }
        Ok(())
    }

    pub fn total_demand(&self) -> u64 {
        self.demanded.values().map(|&c| c as u64).sum()
    }

    /// Price of the request if every demanded RB were granted.
    pub fn full_price(&self, prices: &BTreeMap<BsId, f64>) -> f64 {
        self.demanded
            .iter()
            .map(|(b, &c)| c as f64 * prices.get(b).copied().unwrap_or(0.0))
            .sum()
    }
}

/// Reads a JSON array of slice requests.
pub fn read_request_batch(path: impl AsRef<Path>) -> Result<Vec<SliceRequest>, MiddlewareError> {
    let text = fs::read_to_string(path)?;
    let requests: Vec<SliceRequest> = serde_json::from_str(&text)?;
    for r in &requests {
        r.validate()?;
    }
    Ok(requests)
}

/// Monotone submission counter stamping requests as they reach the
/// submission interface. The first tick is 1.
#[derive(Clone, Debug, Default)]
pub struct SubmissionClock {
    last: u64,
}

impl SubmissionClock {
    pub fn tick(&mut self) -> u64 {
        self.last += 1;
        self.last
    }
}

/// Per-class FIFO buffers of pending requests.
#[derive(Clone, Debug, Default)]
pub struct ClassBuffers {
    buffers: BTreeMap<u32, VecDeque<SliceRequest>>,
    window_timestamps: BTreeSet<u64>,
    submitted: BTreeMap<u32, u64>,
    collected: BTreeMap<u32, u64>,
}

impl ClassBuffers {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the request to its class buffer; the receipt is its timestamp.
    pub fn submit_request(&mut self, request: SliceRequest) -> Result<u64, MiddlewareError> {
        request.validate()?;
        if !self.window_timestamps.insert(request.timestamp) {
            return Err(MiddlewareError::InvalidRequest {
                mno_id: request.mno_id,
                reason: format!("timestamp {} already used in this window", request.timestamp),
            });
        }
        let receipt = request.timestamp;
        *self.submitted.entry(request.class_id).or_default() += 1;
        self.buffers
            .entry(request.class_id)
            .or_default()
            .push_back(request);
        Ok(receipt)
    }

    pub fn buffered(&self, class_id: u32) -> usize {
        self.buffers.get(&class_id).map_or(0, VecDeque::len)
    }

    pub fn len(&self) -> usize {
        self.buffers.values().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn classes(&self) -> impl Iterator<Item = u32> + '_ {
        self.buffers.keys().copied()
    }

    pub fn submitted(&self, class_id: u32) -> u64 {
        self.submitted.get(&class_id).copied().unwrap_or(0)
    }

    pub fn collected(&self, class_id: u32) -> u64 {
        self.collected.get(&class_id).copied().unwrap_or(0)
    }

    /// Drains every buffer. Lower `class_id` first, then ascending
    /// timestamp; closes the current slicing window.
    pub fn collect_requests(&mut self) -> Vec<SliceRequest> {
        let mut out = Vec::with_capacity(self.len());
        for (class, buf) in self.buffers.iter_mut() {
            *self.collected.entry(*class).or_default() += buf.len() as u64;
            out.extend(buf.drain(..));
        }
        out.sort_by_key(|r| (r.class_id, r.timestamp));
        self.window_timestamps.clear();
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// Demand exceeds a station's capacity.
    Unfeasible,
    /// Full-grant price exceeds the MNO budget.
    OverBudget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Admitted {
        granted: RbCounts,
        /// Concrete RB indices per station, once enforcement has run.
        rb_indices: BTreeMap<BsId, Vec<u32>>,
        price: f64,
    },
    Rejected {
        reason: RejectReason,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Notification {
    pub mno_id: MnoId,
    pub decision: Decision,
}

/// Per-MNO outboxes; each notification is delivered exactly once, in send order.
#[derive(Clone, Debug, Default)]
pub struct MessageBroker {
    outboxes: BTreeMap<MnoId, VecDeque<Notification>>,
}

impl MessageBroker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn notify(&mut self, n: Notification) -> bool {
        self.outboxes.entry(n.mno_id).or_default().push_back(n);
        true
    }

    pub fn poll(&mut self, mno_id: MnoId) -> Option<Notification> {
        self.outboxes.get_mut(&mno_id)?.pop_front()
    }

    pub fn pending(&self, mno_id: MnoId) -> usize {
        self.outboxes.get(&mno_id).map_or(0, VecDeque::len)
    }
}
