#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use ranslice::mno::{request_cost, MnoProfile};
use ranslice::scm::SlicePolicy;
use ranslice::topology::InterferenceGraph;
use ranslice::{BsId, MnoId, RbCounts};

pub fn profile(id: u32, demand: u32, lambda: f64) -> MnoProfile {
    MnoProfile {
        mno_id: MnoId(id),
        class_id: 0,
        demand_rbs: demand,
        lambda_congestion: lambda,
        max_price: f64::MAX,
        mus: Vec::new(),
    }
}

/// Random graph over `n` stations with ids `1..=n`, each edge kept with probability `p`.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, p: f64) -> InterferenceGraph {
    let ids = (1..=n as u32).map(BsId).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    InterferenceGraph::from_edges(ids, &edges)
}

/// Random policy over stations `1..=n_bs` with capacities in `cap` and up
/// to `n_mno` MNOs; grants at a station never exceed its capacity.
pub fn random_policy<R: Rng>(
    rng: &mut R,
    n_bs: usize,
    n_mno: u32,
    cap: std::ops::RangeInclusive<u32>,
) -> SlicePolicy {
    let mut capacities = RbCounts::new();
    let mut grants = BTreeMap::new();
    for b in 1..=n_bs as u32 {
        let c = rng.gen_range(cap.clone());
        capacities.insert(BsId(b), c);
        let mut left = c;
        let mut per_mno = BTreeMap::new();
        for m in 1..=n_mno {
            if left == 0 {
                break;
            }
            let g = rng.gen_range(0..=left);
            left -= g;
            per_mno.insert(MnoId(m), g);
        }
        grants.insert(BsId(b), per_mno);
    }
    SlicePolicy::new(capacities, grants).expect("valid by construction")
}

/// Minimum request cost over every integer split of `demand` respecting
/// the free capacity, by exhaustive enumeration.
pub fn brute_force_min_cost(
    lambda: f64,
    prices: &BTreeMap<BsId, f64>,
    capacities: &RbCounts,
    others: &RbCounts,
    demand: u32,
) -> Option<f64> {
    let ids: Vec<BsId> = capacities.keys().copied().collect();
    let free: Vec<u32> = ids
        .iter()
        .map(|b| capacities[b].saturating_sub(others.get(b).copied().unwrap_or(0)))
        .collect();
    let mut best: Option<f64> = None;
    let mut x = vec![0u32; ids.len()];
    fn rec(
        k: usize,
        left: u32,
        x: &mut Vec<u32>,
        free: &[u32],
        eval: &mut dyn FnMut(&[u32]),
    ) {
        if k + 1 == x.len() {
            if left <= free[k] {
                x[k] = left;
                eval(x);
            }
            return;
        }
        for v in 0..=left.min(free[k]) {
            x[k] = v;
            rec(k + 1, left - v, x, free, eval);
        }
    }
    let mut eval = |x: &[u32]| {
        let req: RbCounts = ids.iter().copied().zip(x.iter().copied()).collect();
        let c = request_cost(lambda, prices, capacities, others, &req);
        if best.is_none_or(|b| c < b) {
            best = Some(c);
        }
    };
    rec(0, demand, &mut x, &free, &mut eval);
    best
}
