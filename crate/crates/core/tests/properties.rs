//! Randomized invariants over the whole public surface: indexing
//! round-trips, kernel laws, posterior bounds, selection and merge
//! contracts. Each property runs over proptest-generated inputs with the
//! default deterministic RNG.

mod common;

use std::collections::HashSet;

use common::test_space;
use pibo_core::{
    ei_score, fit, matern52, merge_datasets, select_next, AcquisitionConfig, AcquisitionKind,
    Dataset, KernelParams, RunTrace, Phase,
};
use proptest::prelude::*;

fn cards_strategy() -> impl Strategy<Value = [u32; 6]> {
    prop::array::uniform6(1u32..=8)
}

/// Cardinalities whose product stays comfortably enumerable.
fn small_cards_strategy() -> impl Strategy<Value = [u32; 6]> {
    cards_strategy().prop_filter("keep spaces enumerable", |c| {
        c.iter().map(|&x| x as u64).product::<u64>() <= 2_000
    })
}

fn unit_point() -> impl Strategy<Value = [f64; 6]> {
    prop::array::uniform6(0.0f64..=1.0)
}

proptest! {
    #[test]
    fn linear_index_roundtrips(cards in cards_strategy(), picks in prop::array::uniform6(0u32..1000)) {
        let space = test_space(cards);
        let indices: [u32; 6] = std::array::from_fn(|i| picks[i] % cards[i]);
        let linear = space.linear_index(&indices);
        prop_assert!(linear < space.total_count());
        let point = space.point_from_linear(linear);
        prop_assert_eq!(point.indices(), &indices);
        let rebuilt = space.point_from_indices(indices).unwrap();
        prop_assert_eq!(&point, &rebuilt);
    }

    #[test]
    fn normalized_coordinates_stay_in_the_unit_cube(
        cards in cards_strategy(),
        picks in prop::array::uniform6(0u32..1000),
    ) {
        let space = test_space(cards);
        let indices: [u32; 6] = std::array::from_fn(|i| picks[i] % cards[i]);
        let point = space.point_from_indices(indices).unwrap();
        for (axis, &u) in point.unit().iter().enumerate() {
            prop_assert!((0.0..=1.0).contains(&u), "axis {} left the cube: {}", axis, u);
            if cards[axis] == 1 {
                prop_assert_eq!(u, 0.0);
            }
        }
    }

    #[test]
    fn kernel_laws(x in unit_point(), y in unit_point(), theta in 0.05f64..3.0) {
        prop_assert_eq!(matern52(&x, &x, theta), 1.0);
        prop_assert_eq!(matern52(&x, &y, theta).to_bits(), matern52(&y, &x, theta).to_bits());
        let k = matern52(&x, &y, theta);
        prop_assert!(k > 0.0 && k <= 1.0, "kernel value {} out of (0, 1]", k);
    }

    #[test]
    fn expected_improvement_is_nonnegative(
        mean in -1e3f64..1e3,
        stddev in 0.0f64..1e3,
        best in -1e3f64..1e3,
        xi in 0.0f64..10.0,
    ) {
        prop_assert!(ei_score(mean, stddev, best, xi) >= 0.0);
    }

    #[test]
    fn constant_shifts_move_the_posterior_mean(
        cards in small_cards_strategy(),
        seed in 0u64..1000,
        shift in -500.0f64..500.0,
    ) {
        let space = test_space(cards);
        let n = 8.min(space.total_count() as usize);
        let dataset = common::random_dataset(&space, n, seed);
        let shifted = Dataset::from_pairs(
            dataset.iter().map(|(p, v)| (p.clone(), v + shift)),
        ).unwrap();

        let base = fit(&dataset, KernelParams::default()).unwrap();
        let moved = fit(&shifted, KernelParams::default()).unwrap();
        let queries = 5.min(space.total_count() as usize);
        for point in space.sample_uniform(queries, seed ^ 0xF00).unwrap() {
            let a = base.posterior(&point);
            let b = moved.posterior(&point);
            prop_assert!((b.mean - (a.mean + shift)).abs() <= 1e-9 * (1.0 + a.mean.abs() + shift.abs()));
            // The shifted data's standardization constants are recomputed,
            // so the variance matches only up to rounding of mean and std.
            prop_assert!((b.variance - a.variance).abs() <= 1e-9 * (1.0 + a.variance.abs()));
        }
    }

    #[test]
    fn posterior_variance_is_bounded_by_the_prior(
        cards in small_cards_strategy(),
        seed in 0u64..1000,
    ) {
        let space = test_space(cards);
        let n = 10.min(space.total_count() as usize);
        let dataset = common::random_dataset(&space, n, seed);
        let model = fit(&dataset, KernelParams::default()).unwrap();
        let prior = model.y_std() * model.y_std();
        let queries = 8.min(space.total_count() as usize);
        for point in space.sample_uniform(queries, seed ^ 0xAB).unwrap() {
            let post = model.posterior(&point);
            prop_assert!(post.variance >= 0.0);
            prop_assert!(post.variance <= prior * (1.0 + 1e-9), "{} > {}", post.variance, prior);
        }
    }

    #[test]
    fn selection_avoids_visited_points(
        cards in small_cards_strategy(),
        seed in 0u64..1000,
        kind in 0u8..3,
        tau in 0.0f64..4.0,
    ) {
        let space = test_space(cards);
        let total = space.total_count() as usize;
        prop_assume!(total >= 2);
        let n = (total / 2).clamp(1, 12);
        let dataset = common::random_dataset(&space, n, seed);
        let visited: HashSet<[u32; 6]> = dataset.points().iter().map(|p| *p.indices()).collect();
        let model = fit(&dataset, KernelParams::default()).unwrap();
        let config = match kind {
            0 => AcquisitionConfig::lcb(tau),
            1 => AcquisitionConfig { kind: AcquisitionKind::Pi, tau: 0.0, xi: 0.01 },
            _ => AcquisitionConfig { kind: AcquisitionKind::Ei, tau: 0.0, xi: 0.0 },
        };
        let picked = select_next(&model, &space, &visited, &config, seed).unwrap();
        prop_assert!(!visited.contains(picked.indices()));
        prop_assert!(space.linear_index(picked.indices()) < space.total_count());
    }

    #[test]
    fn merging_is_idempotent_and_order_free(
        cards in small_cards_strategy(),
        seed in 0u64..1000,
        split in 1usize..10,
    ) {
        let space = test_space(cards);
        let total = space.total_count() as usize;
        let n = total.clamp(1, 30);
        let dataset = common::random_dataset(&space, n, seed);

        // Partition into overlapping shards, in two different orders.
        let pairs: Vec<_> = dataset.iter().map(|(p, v)| (p.clone(), v)).collect();
        let cut = split.min(pairs.len());
        let a = Dataset::from_pairs(pairs[..cut].iter().cloned()).unwrap();
        let b = Dataset::from_pairs(pairs[cut.saturating_sub(1)..].iter().cloned()).unwrap();

        let forward = merge_datasets(&[a.clone(), b.clone()]).unwrap();
        let backward = merge_datasets(&[b, a]).unwrap();
        prop_assert_eq!(forward.points(), backward.points());
        prop_assert_eq!(forward.len(), n);

        let again = merge_datasets(&[forward.clone(), forward.clone()]).unwrap();
        prop_assert_eq!(forward.points(), again.points());
        let bits = |d: &Dataset| d.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&forward), bits(&again));
    }

    #[test]
    fn uniform_samples_are_distinct_and_in_range(
        cards in small_cards_strategy(),
        seed in 0u64..1000,
    ) {
        let space = test_space(cards);
        let n = (space.total_count() as usize).min(50);
        let points = space.sample_uniform(n, seed).unwrap();
        prop_assert_eq!(points.len(), n);
        let distinct: HashSet<[u32; 6]> = points.iter().map(|p| *p.indices()).collect();
        prop_assert_eq!(distinct.len(), n);
        for point in &points {
            for (axis, &i) in point.indices().iter().enumerate() {
                prop_assert!(i < cards[axis]);
            }
        }
    }

    #[test]
    fn trace_incumbents_are_prefix_minima(values in prop::collection::vec(-1e6f64..1e6, 1..60)) {
        let space = test_space([8, 8, 1, 1, 1, 1]);
        let mut trace = RunTrace::default();
        for (i, &v) in values.iter().enumerate() {
            let point = space.point_from_linear((i % 64) as u64);
            trace.push_eval(0, Phase::Acquire, point, v);
        }
        let mut running = f64::INFINITY;
        for (record, &v) in trace.records().iter().zip(&values) {
            running = running.min(v);
            prop_assert_eq!(record.incumbent_best_value, running);
            prop_assert_eq!(record.objective_value, v);
        }
    }
}
