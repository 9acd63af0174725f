use std::collections::BTreeMap;

use crate::middleware::{RejectReason, SliceRequest};
use crate::{BsId, RbCounts};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdmissionOutcome {
    pub admitted: Vec<SliceRequest>,
    pub rejected: Vec<(SliceRequest, RejectReason)>,
}

/// Judges each request on its own, in the given order.
///
/// A request is unfeasible when it asks a station for more RBs than the
/// station has (or names a station that does not exist), and over budget when
/// its full-grant price exceeds `max_price`. Oversubscription across requests
/// is left to [`allocate_slices`](super::allocate_slices).
pub fn admission_control(
    requests: &[SliceRequest],
    capacities: &RbCounts,
    prices: &BTreeMap<BsId, f64>,
) -> AdmissionOutcome {
    let mut out = AdmissionOutcome::default();
    for req in requests {
        let unfeasible = req
            .demanded
            .iter()
            .any(|(b, &c)| c > 0 && c > capacities.get(b).copied().unwrap_or(0));
        if unfeasible {
            out.rejected.push((req.clone(), RejectReason::Unfeasible));
        } else if req.full_price(prices) > req.max_price {
            out.rejected.push((req.clone(), RejectReason::OverBudget));
        } else {
            out.admitted.push(req.clone());
        }
    }
    out
}
