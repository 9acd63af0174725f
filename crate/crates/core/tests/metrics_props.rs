use proptest::prelude::*;
use ranslice::metrics::{
    aggregate_runs, partial_shared_count, shared_rb_stats, MetricOptions, PartialScope,
};
use ranslice::scm::RbGrid;
use ranslice::topology::InterferenceGraph;
use ranslice::{BsId, MnoId};

fn grid_and_edges() -> impl Strategy<Value = (RbGrid, Vec<(usize, usize)>, Vec<(usize, usize)>)> {
    (2usize..=6, 1usize..=20).prop_flat_map(|(n, w)| {
        let pairs: Vec<(usize, usize)> =
            (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let m = pairs.len();
        (
            prop::collection::vec(prop::collection::vec(prop::option::of(1u32..=4), w), n),
            prop::collection::vec(any::<bool>(), m),
            prop::collection::vec(any::<bool>(), m),
            Just(pairs),
        )
            .prop_map(|(rows, keep, extra, pairs)| {
                let grid = RbGrid::from_rows(
                    rows.into_iter()
                        .enumerate()
                        .map(|(i, r)| (BsId(i as u32 + 1), r.into_iter().map(|c| c.map(MnoId)).collect()))
                        .collect(),
                );
                let small: Vec<_> = pairs.iter().zip(&keep).filter(|(_, &k)| k).map(|(p, _)| *p).collect();
                let large: Vec<_> = pairs
                    .iter()
                    .zip(keep.iter().zip(&extra))
                    .filter(|(_, (&k, &e))| k || e)
                    .map(|(p, _)| *p)
                    .collect();
                (grid, small, large)
            })
    })
}

fn graph_for(grid: &RbGrid, edges: &[(usize, usize)]) -> InterferenceGraph {
    InterferenceGraph::from_edges(grid.bs_ids().to_vec(), edges)
}

proptest! {
    #[test]
    fn more_edges_never_reduce_sharing((grid, small, large) in grid_and_edges()) {
        let gs = graph_for(&grid, &small);
        let gl = graph_for(&grid, &large);
        prop_assert!(partial_shared_count(&grid, &gs) <= partial_shared_count(&grid, &gl));
        let any = shared_rb_stats(
            &grid,
            &gs,
            &MetricOptions { partial_scope: PartialScope::AnyPair, ..Default::default() },
        ).unwrap();
        prop_assert!(partial_shared_count(&grid, &gl) <= any.partial_count);
    }

    #[test]
    fn metrics_ignore_operator_labels(
        (grid, edges, _) in grid_and_edges(),
        perm in Just(vec![1u32, 2, 3, 4]).prop_shuffle(),
    ) {
        let g = graph_for(&grid, &edges);
        let relabeled = RbGrid::from_rows(
            grid.bs_ids()
                .iter()
                .zip(grid.rows())
                .map(|(&b, r)| (b, r.iter().map(|c| c.map(|m| MnoId(perm[m.0 as usize - 1]))).collect()))
                .collect(),
        );
        let a = shared_rb_stats(&grid, &g, &MetricOptions::default()).unwrap();
        let b = shared_rb_stats(&relabeled, &g, &MetricOptions::default()).unwrap();
        prop_assert_eq!(a.full_count, b.full_count);
        prop_assert_eq!(a.partial_count, b.partial_count);
        prop_assert_eq!(a.num_rbs, b.num_rbs);
    }

    #[test]
    fn full_implies_partial_when_connected((grid, edges, _) in grid_and_edges()) {
        let g = graph_for(&grid, &edges);
        let s = shared_rb_stats(&grid, &g, &MetricOptions::default()).unwrap();
        prop_assert!((0.0..=100.0).contains(&s.partial_pct));
        prop_assert!((0.0..=100.0).contains(&s.full_pct));
        if !edges.is_empty() {
            prop_assert!(s.full_count <= s.partial_count);
        }
    }

    #[test]
    fn aggregate_is_order_and_scale_invariant(
        values in prop::collection::vec(0.0f64..100.0, 1..50).prop_shuffle(),
        k in 0.1f64..10.0,
    ) {
        let a = aggregate_runs(&values, 0.95).unwrap();
        let mut rev = values.clone();
        rev.reverse();
        let b = aggregate_runs(&rev, 0.95).unwrap();
        prop_assert!((a.mean - b.mean).abs() <= 1e-9 * a.mean.abs().max(1.0));
        prop_assert!((a.ci_halfwidth - b.ci_halfwidth).abs() <= 1e-9 * a.ci_halfwidth.max(1.0));

        let scaled: Vec<f64> = values.iter().map(|v| v * k).collect();
        let c = aggregate_runs(&scaled, 0.95).unwrap();
        prop_assert!((c.mean - k * a.mean).abs() <= 1e-9 * (k * a.mean).abs().max(1.0));
        prop_assert!((c.ci_halfwidth - k * a.ci_halfwidth).abs() <= 1e-9 * (k * a.ci_halfwidth).max(1.0));
        prop_assert!(a.ci_halfwidth >= 0.0);
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(a.mean >= lo - 1e-9 && a.mean <= hi + 1e-9);
    }
}

#[test]
fn wider_confidence_widens_the_interval() {
    let v = [0.1, 0.5, 0.4, 0.9, 0.3];
    let a = aggregate_runs(&v, 0.90).unwrap();
    let b = aggregate_runs(&v, 0.99).unwrap();
    assert!(b.ci_halfwidth > a.ci_halfwidth);
    assert!(aggregate_runs(&[], 0.95).is_err());
    assert!(aggregate_runs(&v, 1.0).is_err());
}
