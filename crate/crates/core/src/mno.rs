//! MNO tier: slice request generation, the resource pool, and per-TTI
//! scheduling of the MNO's own users.
//!
//! Each MNO pays `p_b` per RB and dislikes congestion at the stations it
//! uses. Requests minimize
//!
//! ```text
//! sum_b  p_b * x_b + lambda * ((L_b + x_b) / C_b)^2
//! ```
//!
//! where `L_b` is the load held by everyone else at station `b`. The cost is
//! separable and convex in `x`, so adding one RB at a time to the station
//! with the cheapest marginal cost is exact.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::middleware::{Decision, DviSnapshot, SliceRequest, SubmissionClock};
use crate::topology::LatLon;
use crate::{BsId, MnoId, MuId, RbCounts};

/// LTE resource block width.
pub const DEFAULT_RB_BANDWIDTH_HZ: f64 = 180_000.0;

#[derive(Debug, Error, PartialEq)]
pub enum MnoError {
    #[error("MNO {mno_id} needs {demand} RBs but only {available} are free")]
    InsufficientCapacity {
        mno_id: MnoId,
        demand: u64,
        available: u64,
    },
    #[error("no price published for base station {0}")]
    MissingPrice(BsId),
    #[error("base station {0} is not in the database view")]
    UnknownStation(BsId),
    #[error("invalid MNO profile {mno_id}: {reason}")]
    InvalidProfile { mno_id: MnoId, reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobileUser {
    pub mu_id: MuId,
    pub location: LatLon,
    /// bits/s/Hz obtained on one RB.
    pub spectral_efficiency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MnoProfile {
    pub mno_id: MnoId,
    pub class_id: u32,
    /// RBs needed per slicing window.
    pub demand_rbs: u32,
    pub lambda_congestion: f64,
    pub max_price: f64,
    pub mus: Vec<MobileUser>,
}

impl MnoProfile {
    pub fn validate(&self) -> Result<(), MnoError> {
        let invalid = |reason: &str| MnoError::InvalidProfile {
            mno_id: self.mno_id,
            reason: reason.into(),
        };
        if self.demand_rbs == 0 {
            return Err(invalid("demand_rbs must be at least 1"));
        }
        if !(self.lambda_congestion >= 0.0) {
            return Err(invalid("lambda_congestion must be non-negative"));
        }
        if self.mus.iter().any(|u| !(u.spectral_efficiency > 0.0)) {
            return Err(invalid("spectral efficiency must be positive"));
        }
        Ok(())
    }
}

/// Request cost `sum_b p_b x_b + lambda ((L_b + x_b) / C_b)^2`.
pub fn request_cost(
    lambda: f64,
    prices: &BTreeMap<BsId, f64>,
    capacities: &RbCounts,
    others_load: &RbCounts,
    request: &RbCounts,
) -> f64 {
    capacities
        .iter()
        .map(|(b, &cap)| {
            let x = request.get(b).copied().unwrap_or(0) as f64;
            let load = others_load.get(b).copied().unwrap_or(0) as f64 + x;
            prices.get(b).copied().unwrap_or(0.0) * x + lambda * (load / cap as f64).powi(2)
        })
        .sum()
}

/// Cost-minimizing request for `profile.demand_rbs` RBs given everyone
/// else's load. The result lists every station in `capacities`, zeros included.
pub fn best_response(
    profile: &MnoProfile,
    prices: &BTreeMap<BsId, f64>,
    capacities: &RbCounts,
    others_load: &RbCounts,
) -> Result<RbCounts, MnoError> {
    struct Slot {
        bs: BsId,
        price: f64,
        cap: f64,
        load: u32,
        free: u32,
    }
    let mut slots = Vec::with_capacity(capacities.len());
    for (&bs, &cap) in capacities {
        let price = *prices.get(&bs).ok_or(MnoError::MissingPrice(bs))?;
        let load = others_load.get(&bs).copied().unwrap_or(0);
        slots.push(Slot {
            bs,
            price,
            cap: cap as f64,
            load,
            free: cap.saturating_sub(load),
        });
    }
    let available: u64 = slots.iter().map(|s| s.free as u64).sum();
    let overloaded = others_load
        .iter()
        .any(|(b, &l)| l > capacities.get(b).copied().unwrap_or(0));
    if overloaded || available < profile.demand_rbs as u64 {
        return Err(MnoError::InsufficientCapacity {
            mno_id: profile.mno_id,
            demand: profile.demand_rbs as u64,
            available,
        });
    }

    let lambda = profile.lambda_congestion;
    let mut take = vec![0u32; slots.len()];
    for _ in 0..profile.demand_rbs {
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in slots.iter().enumerate() {
            if take[i] == s.free {
                continue;
            }
            let occupied = (s.load + take[i]) as f64;
            let marginal = s.price + lambda * (2.0 * occupied + 1.0) / (s.cap * s.cap);
            // Strict comparison keeps the lower bs_id on ties.
            if best.is_none_or(|(_, m)| marginal < m) {
                best = Some((i, marginal));
            }
        }
        let (i, _) = best.expect("free capacity checked above");
        take[i] += 1;
    }
    Ok(slots.iter().zip(take).map(|(s, x)| (s.bs, x)).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicsOutcome {
    pub requests: BTreeMap<MnoId, RbCounts>,
    pub converged: bool,
    /// Rounds executed.
    pub rounds: u32,
}

fn total_load(requests: &BTreeMap<MnoId, RbCounts>) -> RbCounts {
    let mut load = RbCounts::new();
    for r in requests.values() {
        for (&b, &x) in r {
            *load.entry(b).or_default() += x;
        }
    }
    load
}

fn others_of(load: &RbCounts, own: &RbCounts) -> RbCounts {
    load.iter()
        .map(|(&b, &l)| (b, l - own.get(&b).copied().unwrap_or(0)))
        .collect()
}

/// Round-robin best-response dynamics in `mno_id` order, from empty requests.
///
/// Each MNO only sees the cumulative load of the others. Stops once every
/// MNO's request is a best response to the rest (a pure Nash equilibrium of
/// the request game) or after `max_rounds` rounds.
pub fn run_best_response_dynamics(
    profiles: &[MnoProfile],
    prices: &BTreeMap<BsId, f64>,
    capacities: &RbCounts,
    max_rounds: u32,
) -> Result<DynamicsOutcome, MnoError> {
    let mut order: Vec<&MnoProfile> = profiles.iter().collect();
    order.sort_by_key(|p| p.mno_id);

    let demand: u64 = order.iter().map(|p| p.demand_rbs as u64).sum();
    let capacity: u64 = capacities.values().map(|&c| c as u64).sum();
    if demand > capacity {
        return Err(MnoError::InsufficientCapacity {
            mno_id: order.first().map_or(MnoId(0), |p| p.mno_id),
            demand,
            available: capacity,
        });
    }

    let mut requests: BTreeMap<MnoId, RbCounts> =
        order.iter().map(|p| (p.mno_id, RbCounts::new())).collect();
    let mut load = RbCounts::new();
    for round in 1..=max_rounds {
        let mut changed = false;
        for p in &order {
            let own = &requests[&p.mno_id];
            let next = best_response(p, prices, capacities, &others_of(&load, own))?;
            if &next != own {
                changed = true;
                requests.insert(p.mno_id, next);
                load = total_load(&requests);
            }
        }
        let stable = !changed
            || order.iter().try_fold(true, |acc, p| {
                let own = &requests[&p.mno_id];
                Ok::<_, MnoError>(
                    acc && &best_response(p, prices, capacities, &others_of(&load, own))? == own,
                )
            })?;
        if stable {
            return Ok(DynamicsOutcome {
                requests,
                converged: true,
                rounds: round,
            });
        }
    }
    Ok(DynamicsOutcome {
        requests,
        converged: false,
        rounds: max_rounds,
    })
}

/// RBs assigned to one MNO's slice.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResourcePool {
    pub mno_id: MnoId,
    pub granted: RbCounts,
    pub rb_indices: BTreeMap<BsId, Vec<u32>>,
    pub price_paid: f64,
}

impl ResourcePool {
    pub fn empty(mno_id: MnoId) -> Self {
        Self {
            mno_id,
            ..Default::default()
        }
    }

    pub fn total_rbs(&self) -> usize {
        self.rb_indices.values().map(Vec::len).sum()
    }

    /// True when indices are populated and match the granted counts.
    pub fn is_consistent(&self) -> bool {
        self.granted.iter().all(|(b, &c)| {
            c == 0 || self.rb_indices.get(b).is_some_and(|v| v.len() == c as usize)
        }) && self
            .rb_indices
            .iter()
            .all(|(b, v)| self.granted.get(b).copied().unwrap_or(0) as usize == v.len())
    }
}

/// One MNO's side of the slicing loop: request generation and the pool of
/// granted resources.
#[derive(Clone, Debug)]
pub struct MnoAgent {
    pub profile: MnoProfile,
    pub pool: ResourcePool,
    last_timestamp: u64,
    pub rejections: u32,
}

impl MnoAgent {
    pub fn new(profile: MnoProfile) -> Self {
        let pool = ResourcePool::empty(profile.mno_id);
        Self {
            profile,
            pool,
            last_timestamp: 0,
            rejections: 0,
        }
    }

    pub fn last_timestamp(&self) -> u64 {
        self.last_timestamp
    }

    /// Builds a request from the public database view only. The others' load
    /// at each station is the view's allocated count minus `own_holding`.
    pub fn generate_request(
        &mut self,
        snapshot: &DviSnapshot,
        own_holding: &RbCounts,
        clock: &mut SubmissionClock,
    ) -> Result<SliceRequest, MnoError> {
        if let Some(b) = own_holding.keys().find(|&&b| snapshot.record(b).is_none()) {
            return Err(MnoError::UnknownStation(*b));
        }
        let capacities = snapshot.capacities();
        let others: RbCounts = snapshot
            .allocated()
            .into_iter()
            .map(|(b, a)| (b, a.saturating_sub(own_holding.get(&b).copied().unwrap_or(0))))
            .collect();
        let demanded = best_response(&self.profile, &snapshot.prices(), &capacities, &others)?;
        let timestamp = clock.tick().max(self.last_timestamp + 1);
        self.last_timestamp = timestamp;
        Ok(SliceRequest {
            mno_id: self.profile.mno_id,
            class_id: self.profile.class_id,
            timestamp,
            demanded,
            max_price: self.profile.max_price,
        })
    }

    /// Applies a broker notification to the resource pool.
    pub fn receive(&mut self, decision: &Decision) {
        match decision {
            Decision::Admitted {
                granted,
                rb_indices,
                price,
            } => {
                self.pool.granted = granted.clone();
                self.pool.rb_indices = rb_indices.clone();
                self.pool.price_paid = *price;
            }
            Decision::Rejected { .. } => {
                self.pool = ResourcePool::empty(self.profile.mno_id);
                self.rejections += 1;
            }
        }
    }
}

/// High-level scheduling objective set by the MNO.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Directive {
    #[default]
    RoundRobin,
    MaxRate,
    /// Round-robin until every user reaches `floor_bps`, then max-rate.
    MinRateGuarantee { floor_bps: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub bs_id: BsId,
    pub rb_index: u32,
    pub mu_id: MuId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TtiSchedule {
    pub tti_index: u64,
    pub assignments: Vec<Assignment>,
    /// bit/s per user in this TTI.
    pub throughput: BTreeMap<MuId, f64>,
}

impl TtiSchedule {
    pub fn total_throughput(&self) -> f64 {
        self.throughput.values().sum()
    }
}

/// Assigns every RB of the pool to one of the MNO's users for a single TTI.
///
/// Users are ordered by `mu_id`. Round-robin starts each station's RB list at
/// user `tti_index mod |users|`; max-rate gives everything to the most
/// efficient user (lower id on ties).
pub fn schedule_tti(
    pool: &ResourcePool,
    mus: &[MobileUser],
    directive: Directive,
    tti_index: u64,
    rb_bandwidth_hz: f64,
) -> TtiSchedule {
    let mut users: Vec<&MobileUser> = mus.iter().collect();
    users.sort_by_key(|u| u.mu_id);
    let mut throughput: BTreeMap<MuId, f64> = users.iter().map(|u| (u.mu_id, 0.0)).collect();
    let mut assignments = Vec::with_capacity(pool.total_rbs());
    if users.is_empty() {
        return TtiSchedule {
            tti_index,
            assignments,
            throughput,
        };
    }

    let n = users.len();
    let offset = (tti_index % n as u64) as usize;
    let best = users
        .iter()
        .enumerate()
        .fold(0, |b, (i, u)| if u.spectral_efficiency > users[b].spectral_efficiency { i } else { b });
    let rate = |i: usize| users[i].spectral_efficiency * rb_bandwidth_hz;

    let mut cursor = offset;
    for (&bs_id, indices) in &pool.rb_indices {
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        for (k, &rb_index) in sorted.iter().enumerate() {
            let who = match directive {
                Directive::RoundRobin => (offset + k) % n,
                Directive::MaxRate => best,
                Directive::MinRateGuarantee { floor_bps } => {
                    let needy = (0..n)
                        .map(|s| (cursor + s) % n)
                        .find(|&i| throughput[&users[i].mu_id] < floor_bps);
                    match needy {
                        Some(i) => {
                            cursor = (i + 1) % n;
                            i
                        }
                        None => best,
                    }
                }
            };
            *throughput.get_mut(&users[who].mu_id).expect("known user") += rate(who);
            assignments.push(Assignment {
                bs_id,
                rb_index,
                mu_id: users[who].mu_id,
            });
        }
    }
    TtiSchedule {
        tti_index,
        assignments,
        throughput,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(id: u32, demand: u32, lambda: f64) -> MnoProfile {
        MnoProfile {
            mno_id: MnoId(id),
            class_id: 0,
            demand_rbs: demand,
            lambda_congestion: lambda,
            max_price: f64::MAX,
            mus: Vec::new(),
        }
    }

    fn counts(v: &[u32]) -> RbCounts {
        v.iter()
            .enumerate()
            .map(|(i, &c)| (BsId(i as u32 + 1), c))
            .collect()
    }

    fn prices(v: &[f64]) -> BTreeMap<BsId, f64> {
        v.iter()
            .enumerate()
            .map(|(i, &p)| (BsId(i as u32 + 1), p))
            .collect()
    }

    fn user(id: u32, se: f64) -> MobileUser {
        MobileUser {
            mu_id: MuId(id),
            location: LatLon::new(42.36, -71.06).unwrap(),
            spectral_efficiency: se,
        }
    }

    fn pool(indices: &[(u32, &[u32])]) -> ResourcePool {
        ResourcePool {
            mno_id: MnoId(1),
            granted: indices.iter().map(|&(b, v)| (BsId(b), v.len() as u32)).collect(),
            rb_indices: indices.iter().map(|&(b, v)| (BsId(b), v.to_vec())).collect(),
            price_paid: 0.0,
        }
    }

    #[test]
    fn best_response_examples() {
        let one = best_response(&profile(1, 5, 1.0), &prices(&[1.0]), &counts(&[50]), &counts(&[0]));
        assert_eq!(one.unwrap(), counts(&[5]));

        let r = best_response(
            &profile(1, 4, 1.0),
            &prices(&[1.0, 1.0]),
            &counts(&[10, 10]),
            &counts(&[5, 0]),
        )
        .unwrap();
        assert_eq!(r, counts(&[0, 4]));

        let r = best_response(
            &profile(1, 2, 1.0),
            &prices(&[1.0, 1.0]),
            &counts(&[10, 10]),
            &counts(&[0, 0]),
        )
        .unwrap();
        assert_eq!(r, counts(&[1, 1]));
    }

    #[test]
    fn best_response_capacity_errors() {
        let err = best_response(
            &profile(3, 6, 1.0),
            &prices(&[1.0, 1.0]),
            &counts(&[5, 5]),
            &counts(&[3, 2]),
        )
        .unwrap_err();
        assert_eq!(
            err,
            MnoError::InsufficientCapacity {
                mno_id: MnoId(3),
                demand: 6,
                available: 5
            }
        );
        assert!(best_response(&profile(1, 1, 1.0), &prices(&[1.0]), &counts(&[5]), &counts(&[6])).is_err());
        assert_eq!(
            best_response(&profile(1, 1, 1.0), &prices(&[]), &counts(&[5]), &counts(&[0])),
            Err(MnoError::MissingPrice(BsId(1)))
        );
    }

    #[test]
    fn dynamics_examples() {
        let p = prices(&[1.0, 1.0]);
        let c = counts(&[10, 10]);

        let out = run_best_response_dynamics(&[profile(1, 5, 1.0)], &p, &c, 10).unwrap();
        assert!(out.converged);
        assert_eq!(out.rounds, 1);
        let alone = best_response(&profile(1, 5, 1.0), &p, &c, &counts(&[0, 0])).unwrap();
        assert_eq!(out.requests[&MnoId(1)], alone);

        let out =
            run_best_response_dynamics(&[profile(2, 4, 1.0), profile(1, 4, 1.0)], &p, &c, 100)
                .unwrap();
        assert!(out.converged);
        assert_eq!(out.requests[&MnoId(1)], counts(&[2, 2]));
        assert_eq!(out.requests[&MnoId(2)], counts(&[2, 2]));

        let out = run_best_response_dynamics(&[profile(1, 4, 1.0)], &p, &c, 0).unwrap();
        assert!(!out.converged);

        assert!(matches!(
            run_best_response_dynamics(&[profile(1, 15, 1.0), profile(2, 6, 1.0)], &p, &c, 5),
            Err(MnoError::InsufficientCapacity { .. })
        ));
    }

    #[test]
    fn requests_come_from_the_public_view() {
        let topo = crate::topology::Topology::new(vec![
            crate::topology::BaseStation::new(BsId(1), 42.36, -71.06, 50, 1.0).unwrap(),
            crate::topology::BaseStation::new(BsId(2), 42.36, -71.05, 50, 1.0).unwrap(),
        ])
        .unwrap();
        let snap = crate::middleware::snapshot_dvi(&topo, None);
        let mut agent = MnoAgent::new(profile(1, 10, 1.0));
        let mut clock = SubmissionClock::default();
        let r1 = agent.generate_request(&snap, &RbCounts::new(), &mut clock).unwrap();
        let direct = best_response(&agent.profile, &topo.prices(), &topo.capacities(), &counts(&[0, 0]))
            .unwrap();
        assert_eq!(r1.demanded, direct);
        assert_eq!(r1.demanded.values().sum::<u32>(), 10);
        let r2 = agent.generate_request(&snap, &RbCounts::new(), &mut clock).unwrap();
        assert!(r2.timestamp > r1.timestamp);

        let bad: RbCounts = [(BsId(9), 1)].into();
        assert_eq!(
            agent.generate_request(&snap, &bad, &mut clock),
            Err(MnoError::UnknownStation(BsId(9)))
        );
    }

    #[test]
    fn admitted_notification_fills_pool() {
        let mut agent = MnoAgent::new(profile(1, 25, 1.0));
        agent.receive(&Decision::Admitted {
            granted: [(BsId(3), 25)].into(),
            rb_indices: [(BsId(3), (0..25).collect())].into(),
            price: 25.0,
        });
        assert_eq!(agent.pool.granted[&BsId(3)], 25);
        assert!(agent.pool.is_consistent());
        agent.receive(&Decision::Rejected {
            reason: crate::middleware::RejectReason::OverBudget,
        });
        assert_eq!(agent.pool.total_rbs(), 0);
        assert_eq!(agent.rejections, 1);
    }

    #[test]
    fn schedule_edge_cases() {
        let s = schedule_tti(&pool(&[]), &[user(1, 1.0)], Directive::RoundRobin, 0, 180e3);
        assert!(s.assignments.is_empty());
        let s = schedule_tti(&pool(&[(1, &[0, 1])]), &[], Directive::MaxRate, 0, 180e3);
        assert!(s.assignments.is_empty());
    }

    #[test]
    fn round_robin_splits_evenly() {
        let users = [user(1, 1.0), user(2, 2.0)];
        let s = schedule_tti(&pool(&[(1, &[0, 1, 2, 3])]), &users, Directive::RoundRobin, 0, 180e3);
        let per: Vec<usize> = [1, 2]
            .iter()
            .map(|&u| s.assignments.iter().filter(|a| a.mu_id == MuId(u)).count())
            .collect();
        assert_eq!(per, vec![2, 2]);
        assert_eq!(s.assignments[0].mu_id, MuId(1));
        let s = schedule_tti(&pool(&[(1, &[0, 1, 2, 3])]), &users, Directive::RoundRobin, 1, 180e3);
        assert_eq!(s.assignments[0].mu_id, MuId(2));
        assert!((s.throughput[&MuId(2)] - 2.0 * 2.0 * 180e3).abs() < 1e-9);
    }

    #[test]
    fn max_rate_picks_best_user() {
        let users = [user(1, 2.0), user(2, 1.0)];
        let s = schedule_tti(&pool(&[(1, &[4, 5, 6])]), &users, Directive::MaxRate, 7, 180e3);
        assert!(s.assignments.iter().all(|a| a.mu_id == MuId(1)));
        assert_eq!(s.assignments.len(), 3);
        assert!((s.total_throughput() - 3.0 * 2.0 * 180e3).abs() < 1e-9);
    }

    #[test]
    fn min_rate_guarantee_then_max_rate() {
        let users = [user(1, 1.0), user(2, 4.0), user(3, 0.5)];
        // Floor needs 2 RBs for user 3 (0.5 * 180k = 90k per RB).
        let floor = 180e3;
        let s = schedule_tti(
            &pool(&[(1, &[0, 1, 2, 3, 4, 5, 6, 7])]),
            &users,
            Directive::MinRateGuarantee { floor_bps: floor },
            0,
            180e3,
        );
        assert!(s.throughput.values().all(|&t| t >= floor));
        let by_user = |u| s.assignments.iter().filter(|a| a.mu_id == MuId(u)).count();
        assert_eq!((by_user(1), by_user(3)), (1, 2));
        assert_eq!(by_user(2), 5);
    }
}
