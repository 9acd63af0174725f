use std::collections::BTreeMap;

use super::SlicePolicy;
use crate::middleware::SliceRequest;
use crate::{BsId, MnoId, RbCounts};

/// Proportional RB allocation with largest-remainder rounding.
///
/// Per station, demands that fit are granted in full. Otherwise each MNO gets
/// `floor(d * C / D)` and the leftover RBs go one each to the largest
/// fractional remainders, ties to the lower MNO id. Multiple admitted
/// requests from one MNO are merged first.
pub fn allocate_slices(admitted: &[SliceRequest], capacities: &RbCounts) -> SlicePolicy {
    let mut demand: BTreeMap<BsId, BTreeMap<MnoId, u64>> = BTreeMap::new();
    for req in admitted {
        for (&b, &c) in &req.demanded {
            if c > 0 && capacities.contains_key(&b) {
                *demand.entry(b).or_default().entry(req.mno_id).or_default() += c as u64;
            }
        }
    }

    let mut grants = BTreeMap::new();
    for (b, per_mno) in demand {
        let cap = capacities[&b] as u64;
        let total: u64 = per_mno.values().sum();
        let granted: BTreeMap<MnoId, u32> = if total <= cap {
            per_mno.iter().map(|(&m, &d)| (m, d as u32)).collect()
        } else {
            apportion(&per_mno, cap, total)
        };
        grants.insert(b, granted);
    }
    SlicePolicy::new(capacities.clone(), grants).expect("apportionment respects capacity")
}

fn apportion(demand: &BTreeMap<MnoId, u64>, cap: u64, total: u64) -> BTreeMap<MnoId, u32> {
    // Exact share d*cap/total = quotient + remainder/total.
    let mut shares: Vec<(MnoId, u64, u64)> = demand
        .iter()
        .map(|(&m, &d)| {
            let num = d as u128 * cap as u128;
            (
                m,
                (num / total as u128) as u64,
                (num % total as u128) as u64,
            )
        })
        .collect();
    let floor_sum: u64 = shares.iter().map(|s| s.1).sum();
    let mut leftover = cap - floor_sum;

    let mut by_remainder: Vec<usize> = (0..shares.len()).collect();
    by_remainder.sort_by(|&a, &b| shares[b].2.cmp(&shares[a].2).then(shares[a].0.cmp(&shares[b].0)));
    for i in by_remainder {
        if leftover == 0 {
            break;
        }
        shares[i].1 += 1;
        leftover -= 1;
    }
    shares.into_iter().map(|(m, g, _)| (m, g as u32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(mno: u32, demanded: &[(u32, u32)]) -> SliceRequest {
        SliceRequest {
            mno_id: MnoId(mno),
            class_id: 0,
            timestamp: mno as u64,
            demanded: demanded.iter().map(|&(b, c)| (BsId(b), c)).collect(),
            max_price: f64::MAX,
        }
    }

    #[test]
    fn oversubscribed_station_uses_largest_remainder() {
        let caps: RbCounts = [(BsId(1), 50)].into();
        let p = allocate_slices(&[req(1, &[(1, 30)]), req(2, &[(1, 40)])], &caps);
        assert_eq!(p.grant(BsId(1), MnoId(1)), 21);
        assert_eq!(p.grant(BsId(1), MnoId(2)), 29);
    }

    #[test]
    fn fitting_demand_is_granted_exactly() {
        let caps: RbCounts = (1..=3).map(|b| (BsId(b), 50)).collect();
        let p = allocate_slices(&[req(1, &[(3, 25)])], &caps);
        assert_eq!(p.grant(BsId(3), MnoId(1)), 25);

        let p = allocate_slices(&[req(1, &[(1, 10), (2, 50), (3, 25)])], &caps);
        let pct: Vec<f64> = (1..=3)
            .map(|b| 100.0 * p.grant(BsId(b), MnoId(1)) as f64 / 50.0)
            .collect();
        assert_eq!(pct, vec![20.0, 100.0, 50.0]);
    }

    #[test]
    fn equal_remainders_favour_lower_mno_id() {
        let caps: RbCounts = [(BsId(1), 10)].into();
        let p = allocate_slices(
            &[req(3, &[(1, 5)]), req(1, &[(1, 5)]), req(2, &[(1, 5)])],
            &caps,
        );
        // 10/3 each: floors 3,3,3, one leftover to MNO 1.
        assert_eq!(
            (1..=3).map(|m| p.grant(BsId(1), MnoId(m))).collect::<Vec<_>>(),
            vec![4, 3, 3]
        );
    }

    #[test]
    fn repeated_requests_from_one_mno_merge() {
        let caps: RbCounts = [(BsId(1), 50)].into();
        let p = allocate_slices(&[req(1, &[(1, 10)]), req(1, &[(1, 5)])], &caps);
        assert_eq!(p.grant(BsId(1), MnoId(1)), 15);
    }
}
