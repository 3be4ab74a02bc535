//! The release gate: one test per numbered criterion, each printing a
//! single PASS line with its measured quantities (visible with
//! `cargo test --test acceptance -- --nocapture`).
//!
//! Runtime bounds are asserted as stated; the statistical suites use the
//! fixed seed lists documented in the README.

mod common;

use std::collections::HashSet;
use std::time::{Duration, Instant};

use common::*;
use nalgebra::DMatrix;
use pibo_core::{
    benchmark, brute_force, compare_solo_vs_pibo, ei_score, fit, lcb_score, matern52,
    objective_from_metrics, pi_score, run_pibo_with, select_next, split_budget, AcquisitionConfig,
    AcquisitionKind, AxisSpec, Dataset, KernelParams, LineMetrics, ObjectiveSpec, PiboConfig,
    SearchSpace, SeedOutcome, WorkerExecution, AXIS_NAMES,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn finish(criterion: u32, detail: String, elapsed: Duration, bound: Duration) {
    assert!(
        elapsed < bound,
        "criterion {criterion:02} exceeded its runtime bound: {elapsed:?} >= {bound:?} ({detail})"
    );
    println!("criterion {criterion:02} PASS: {detail} [{elapsed:.2?} < {bound:?}]");
}

#[test]
fn criterion_01_grid_cardinality() {
    let space = stripline_space();
    let start = Instant::now();
    let total = space.total_count();
    let elapsed = start.elapsed();
    assert_eq!(total, 99_225);
    finish(1, format!("corrected grid has {total} points"), elapsed, Duration::from_millis(1));
}

#[test]
fn criterion_02_gp_matches_dense_inverse() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6F02);
    let mut worst_mean = 0.0f64;
    let mut worst_var = 0.0f64;
    let mut worst_interp = 0.0f64;
    for case in 0..100u64 {
        let cards: [u32; 6] = std::array::from_fn(|_| rng.random_range(4..=8));
        let space = test_space(cards);
        let n = rng.random_range(5..=30);
        let dataset = random_dataset(&space, n, 0x2000 + case);
        let model = fit(&dataset, KernelParams::default()).unwrap();
        let dense = DenseGp::fit(&dataset, model.theta(), model.jitter());

        for query in space.sample_uniform(20, 0x3000 + case).unwrap() {
            let post = model.posterior(&query);
            let (ref_mean, ref_var) = dense.mean_var(query.unit());
            worst_mean = worst_mean.max((post.mean - ref_mean).abs());
            worst_var = worst_var.max((post.variance - ref_var).abs());
        }
        for (point, value) in dataset.iter() {
            let post = model.posterior(point);
            worst_interp = worst_interp.max((post.mean - value).abs() / model.y_std());
        }
    }
    assert!(worst_mean < 1e-6, "posterior mean deviates by {worst_mean:.3e}");
    assert!(worst_var < 1e-6, "posterior variance deviates by {worst_var:.3e}");
    assert!(worst_interp < 1e-6, "training-point interpolation off by {worst_interp:.3e} y_std");
    finish(
        2,
        format!(
            "100 datasets: |dmean| <= {worst_mean:.2e}, |dvar| <= {worst_var:.2e}, \
             interpolation <= {worst_interp:.2e} y_std"
        ),
        start.elapsed(),
        Duration::from_secs(10),
    );
}

#[test]
fn criterion_03_kernel_properties() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6F03);
    let sample = |rng: &mut ChaCha8Rng| -> [f64; 6] { std::array::from_fn(|_| rng.random()) };

    for _ in 0..500 {
        let x = sample(&mut rng);
        let y = sample(&mut rng);
        let theta = rng.random_range(0.1..2.0);
        assert_eq!(matern52(&x, &x, theta), 1.0, "k(x,x) must be exactly 1");
        assert_eq!(
            matern52(&x, &y, theta).to_bits(),
            matern52(&y, &x, theta).to_bits(),
            "kernel symmetry must hold to the bit"
        );
    }

    let mut min_eig = f64::INFINITY;
    for _ in 0..200 {
        let n = rng.random_range(5..=40);
        let theta = rng.random_range(0.2..1.5);
        let xs: Vec<[f64; 6]> = (0..n).map(|_| sample(&mut rng)).collect();
        let gram = DMatrix::from_fn(n, n, |i, j| matern52(&xs[i], &xs[j], theta));
        let eig = gram.symmetric_eigenvalues();
        min_eig = min_eig.min(eig.min());
    }
    assert!(min_eig >= -1e-8, "Gram matrix eigenvalue {min_eig:.3e} below -1e-8");
    finish(
        3,
        format!("k(x,x)=1, 0-ulp symmetry, 200 Grams with min eigenvalue {min_eig:.2e}"),
        start.elapsed(),
        Duration::from_secs(10),
    );
}

#[test]
fn criterion_04_acquisition_matches_exhaustive_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6F04);
    let mut mean_argmin_checks = 0usize;

    for case in 0..1000u64 {
        let cards: [u32; 6] = std::array::from_fn(|i| {
            if i < 3 {
                rng.random_range(2..=6)
            } else {
                rng.random_range(1..=3)
            }
        });
        let space = test_space(cards);
        let n = rng.random_range(3..=20).min(space.total_count() as usize - 1);
        let dataset = random_dataset(&space, n, 0x4000 + case);
        let model = fit(&dataset, KernelParams::default()).unwrap();
        let visited: HashSet<[u32; 6]> = dataset.points().iter().map(|p| *p.indices()).collect();
        let config = match case % 5 {
            0 => AcquisitionConfig::lcb(0.0),
            1 => AcquisitionConfig::lcb(0.5),
            2 => AcquisitionConfig::lcb(2.0),
            3 => AcquisitionConfig { kind: AcquisitionKind::Pi, tau: 0.0, xi: 0.01 },
            _ => AcquisitionConfig { kind: AcquisitionKind::Ei, tau: 0.0, xi: 0.0 },
        };

        let picked = select_next(&model, &space, &visited, &config, case).unwrap();
        assert!(!visited.contains(picked.indices()), "case {case} returned a visited point");

        // Exhaustive oracle: score every unvisited point through the plain
        // posterior path, smallest (key, linear index) wins.
        let best_observed = model.best_observed().1;
        let mut oracle: Option<(f64, u64)> = None;
        let mut mean_oracle: Option<(f64, u64)> = None;
        for (linear, point) in space.enumerate_all().enumerate() {
            if visited.contains(point.indices()) {
                continue;
            }
            let post = model.posterior(&point);
            let key = match config.kind {
                AcquisitionKind::Lcb => lcb_score(post.mean, post.stddev(), config.tau),
                AcquisitionKind::Pi => -pi_score(post.mean, post.stddev(), best_observed, config.xi),
                AcquisitionKind::Ei => -ei_score(post.mean, post.stddev(), best_observed, config.xi),
            };
            let key = (key, linear as u64);
            if oracle.is_none_or(|b| key < b) {
                oracle = Some(key);
            }
            let mean_key = (post.mean, linear as u64);
            if mean_oracle.is_none_or(|b| mean_key < b) {
                mean_oracle = Some(mean_key);
            }
        }
        let expected = space.point_from_linear(oracle.unwrap().1);
        assert_eq!(picked, expected, "case {case} disagrees with the exhaustive oracle");

        if config.kind == AcquisitionKind::Lcb && config.tau == 0.0 {
            let mean_pick = space.point_from_linear(mean_oracle.unwrap().1);
            assert_eq!(picked, mean_pick, "case {case}: tau=0 is not the posterior-mean argmin");
            mean_argmin_checks += 1;
        }
    }
    finish(
        4,
        format!("1000 fixtures match; {mean_argmin_checks} tau=0 cases equal the mean argmin"),
        start.elapsed(),
        Duration::from_secs(30),
    );
}

#[test]
fn criterion_05_small_grid_optimality() {
    let start = Instant::now();
    let objective = stripline_objective();
    let full = stripline_space();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6F05);
    let seeds: Vec<u64> = (0..100).collect();

    let mut total_runs = 0usize;
    let mut total_hits = 0usize;
    let mut min_space_rate = f64::INFINITY;
    for _ in 0..20 {
        let space = reduced_space(&full, &mut rng);
        let total = space.total_count();
        assert!(total <= 500, "reduced space too large: {total}");
        let budget = (total as f64 * 0.3).floor() as usize;
        let config = split_budget(budget, 2, 5).unwrap();
        assert!(config.max_evaluations() <= (total as f64 * 0.3) as u64);

        let report = benchmark(&space, &objective, &config, &seeds).unwrap();
        let aggregates = report.aggregates.expect("all seeds complete");
        let hits = (aggregates.exact_hit_rate * seeds.len() as f64).round() as usize;
        total_hits += hits;
        total_runs += seeds.len();
        min_space_rate = min_space_rate.min(aggregates.exact_hit_rate);
    }
    let rate = total_hits as f64 / total_runs as f64;
    assert!(rate >= 0.95, "global-optimum rate {rate:.3} below 0.95");
    finish(
        5,
        format!(
            "{total_hits}/{total_runs} runs found the exhaustive optimum \
             (rate {rate:.3}, worst space {min_space_rate:.2})"
        ),
        start.elapsed(),
        Duration::from_secs(300),
    );
}

/// A random 3-varying-axis sub-grid of the corrected production grid with
/// at most 500 points. The other three axes are pinned to one of their
/// grid values, so every point stays inside the valid geometry domain.
fn reduced_space(full: &SearchSpace, rng: &mut ChaCha8Rng) -> SearchSpace {
    // T and er have only 3 values; varying axes come from {W, S, H1, H2}.
    let mut candidates = [0usize, 1, 3, 4];
    candidates.shuffle(rng);
    let varying = &candidates[..3];

    let axes: [AxisSpec; 6] = std::array::from_fn(|i| {
        let axis = &full.axes()[i];
        if varying.contains(&i) {
            let max_card = axis.cardinality().min(10);
            let card = rng.random_range(4..=max_card.max(4));
            let start = rng.random_range(0..=axis.cardinality() - card);
            let min = axis.value(start);
            let max = axis.value(start + card - 1);
            AxisSpec::new(AXIS_NAMES[i], min, max, axis.step()).unwrap()
        } else {
            let pin = axis.value(rng.random_range(0..axis.cardinality()));
            AxisSpec::new(AXIS_NAMES[i], pin, pin, axis.step()).unwrap()
        }
    });
    let space = SearchSpace::new(axes).unwrap();
    if space.total_count() <= 500 {
        space
    } else {
        reduced_space(full, rng)
    }
}

#[test]
fn criterion_06_paper_scale_convergence() {
    let space = stripline_space();
    let objective = stripline_objective();

    let brute_start = Instant::now();
    let oracle = brute_force(&space, &objective, true).unwrap();
    let brute_elapsed = brute_start.elapsed();
    assert!(
        brute_elapsed < Duration::from_secs(10),
        "exhaustive search took {brute_elapsed:?}, bound 10s"
    );

    if std::env::var_os("REGEN_GOLDENS").is_some() {
        save_brute_fixture(&space, &oracle.best_point, oracle.best_value);
    }
    let fixture = load_brute_fixture();
    assert_eq!(oracle.best_point.indices(), &fixture.indices, "optimum moved off the fixture");
    let rel = (oracle.best_value - fixture.objective).abs() / fixture.objective;
    assert!(rel < 1e-9, "optimum value drifted {rel:.2e} from the fixture");

    // Top-1% objective quantile over the whole grid, for the phase-1 claim.
    let mut table = oracle.table.clone().unwrap();
    table.sort_by(f64::total_cmp);
    let top1 = table[(table.len() as f64 * 0.01) as usize];

    let start = Instant::now();
    let seeds: Vec<u64> = (0..50).collect();
    let config = PiboConfig::with_master_seed(0);
    let report = benchmark(&space, &objective, &config, &seeds).unwrap();
    let aggregates = report.aggregates.expect("all seeds complete");

    let mut phase1_in_band = 0usize;
    for record in &report.records {
        let SeedOutcome::Completed { phase1_best, total_evaluations, .. } = &record.outcome else {
            panic!("seed {} failed", record.seed);
        };
        assert_eq!(*total_evaluations, 260);
        if *phase1_best <= top1 {
            phase1_in_band += 1;
        }
    }
    let phase1_rate = phase1_in_band as f64 / seeds.len() as f64;

    assert!(
        aggregates.within_tol_rate >= 0.90,
        "within-1% rate {:.2} below 0.90",
        aggregates.within_tol_rate
    );
    assert!(
        aggregates.exact_hit_rate >= 0.60,
        "exact-hit rate {:.2} below 0.60",
        aggregates.exact_hit_rate
    );
    assert!(phase1_rate >= 0.90, "phase-1 top-1% rate {phase1_rate:.2} below 0.90");
    finish(
        6,
        format!(
            "50 seeds x 260 evals: within-1% {:.0}%, exact {:.0}%, phase-1 top-1% {:.0}%, \
             median evals to 1% {:?} (exhaustive scan {brute_elapsed:.2?})",
            aggregates.within_tol_rate * 100.0,
            aggregates.exact_hit_rate * 100.0,
            phase1_rate * 100.0,
            aggregates.median_evals_to_tol,
        ),
        start.elapsed(),
        Duration::from_secs(900),
    );
}

#[test]
fn criterion_07_schedule_independence() {
    let start = Instant::now();
    let space = stripline_space();
    let objective = stripline_objective();

    let serialize = |dataset: &Dataset| -> Vec<u8> {
        let mut out = Vec::new();
        for (point, value) in dataset.iter() {
            let i = point.indices();
            out.extend_from_slice(
                format!("{},{},{},{},{},{}:{:016x}\n", i[0], i[1], i[2], i[3], i[4], i[5], value.to_bits())
                    .as_bytes(),
            );
        }
        out
    };

    for seed in 0..10u64 {
        let config = PiboConfig::with_master_seed(seed);
        let seq = run_pibo_with(&space, &objective, &config, WorkerExecution::Sequential).unwrap();
        let conc = run_pibo_with(&space, &objective, &config, WorkerExecution::Concurrent).unwrap();
        assert_eq!(
            serialize(&seq.dataset),
            serialize(&conc.dataset),
            "seed {seed}: serialized datasets differ between schedules"
        );
        assert_eq!(seq.best_point, conc.best_point, "seed {seed}: incumbent point differs");
        assert_eq!(
            seq.best_value.to_bits(),
            conc.best_value.to_bits(),
            "seed {seed}: incumbent value differs"
        );
        assert_eq!(seq.trace, conc.trace, "seed {seed}: traces differ");
    }
    finish(
        7,
        "10 seeds: sequential and concurrent schedules byte-identical".into(),
        start.elapsed(),
        Duration::from_secs(300),
    );
}

#[test]
fn criterion_08_repeatability_variance() {
    let start = Instant::now();
    let space = stripline_space();
    let objective = stripline_objective();
    let seeds: Vec<u64> = (0..50).collect();

    let report = compare_solo_vs_pibo(&space, &objective, 260, &seeds).unwrap();
    assert!(
        report.pibo_variance <= report.solo_variance,
        "parallel-init variance {:.4} exceeds solo variance {:.4}",
        report.pibo_variance,
        report.solo_variance
    );
    finish(
        8,
        format!(
            "50 seeds at 260 evals: variance {:.4} (parallel) <= {:.4} (solo); \
             means {:.3} vs {:.3}; wins {}/{}/{}",
            report.pibo_variance,
            report.solo_variance,
            report.pibo_mean,
            report.solo_mean,
            report.pibo_wins,
            report.ties,
            report.solo_wins
        ),
        start.elapsed(),
        Duration::from_secs(1800),
    );
}

#[test]
fn criterion_09_objective_arithmetic_and_shape() {
    let start = Instant::now();
    let spec = ObjectiveSpec::default();

    // Unit arithmetic, exact.
    let examples = [
        (90.0, 0.5, 55.0),
        (85.0, 0.5, 50.0),
        (80.0, 1.0, 105.0),
    ];
    for (z_diff, loss, expected) in examples {
        let value = objective_from_metrics(&LineMetrics { z_diff, loss }, &spec);
        assert_eq!(value, expected, "objective({z_diff}, {loss})");
    }
    let max_spec = ObjectiveSpec::for_mode(pibo_core::ObjectiveMode::MaximizeLoss);
    assert_eq!(objective_from_metrics(&LineMetrics { z_diff: 85.0, loss: 0.5 }, &max_spec), 80.0);

    // Shape censuses across every full axis line of the corrected grid.
    let space = stripline_space();
    let cards: Vec<u32> = space.axes().iter().map(|a| a.cardinality()).collect();
    let metrics_at = |indices: [u32; 6]| -> LineMetrics {
        pibo_core::line_metrics(&space.point_from_indices(indices).unwrap(), &spec).unwrap()
    };

    let mut lines = 0usize;
    for_each_line(&cards, 0, |line| {
        let sweep: Vec<LineMetrics> = (0..cards[0]).map(|i| metrics_at(line(i))).collect();
        for pair in sweep.windows(2) {
            assert!(pair[1].z_diff < pair[0].z_diff, "z_diff must fall as W grows");
        }
        assert_unimodal(&sweep.iter().map(|m| m.loss).collect::<Vec<_>>(), "loss along W");
        lines += 1;
    });
    for_each_line(&cards, 1, |line| {
        let sweep: Vec<LineMetrics> = (0..cards[1]).map(|i| metrics_at(line(i))).collect();
        for pair in sweep.windows(2) {
            assert!(pair[1].z_diff > pair[0].z_diff, "z_diff must rise as S grows");
        }
        lines += 1;
    });
    for_each_line(&cards, 4, |line| {
        let sweep: Vec<LineMetrics> = (0..cards[4]).map(|i| metrics_at(line(i))).collect();
        for pair in sweep.windows(2) {
            assert!(pair[1].z_diff > pair[0].z_diff, "z_diff must rise as H2 grows");
        }
        lines += 1;
    });
    for_each_line(&cards, 5, |line| {
        let sweep: Vec<LineMetrics> = (0..cards[5]).map(|i| metrics_at(line(i))).collect();
        for pair in sweep.windows(2) {
            assert!(pair[1].z_diff < pair[0].z_diff, "z_diff must fall as er grows");
            assert!(pair[1].loss > pair[0].loss, "loss must rise with er");
        }
        lines += 1;
    });

    finish(
        9,
        format!("unit examples exact; {lines} full-axis sweeps hold"),
        start.elapsed(),
        Duration::from_secs(10),
    );
}

/// Calls `check` once per grid line along `axis`, passing a closure that
/// maps a position on that axis to a full index tuple.
fn for_each_line(cards: &[u32], axis: usize, mut check: impl FnMut(&dyn Fn(u32) -> [u32; 6])) {
    let others: Vec<usize> = (0..6).filter(|&i| i != axis).collect();
    let mut fixed = [0u32; 6];
    loop {
        {
            let line = |i: u32| {
                let mut indices = fixed;
                indices[axis] = i;
                indices
            };
            check(&line);
        }
        // Odometer increment over the non-swept axes.
        let mut k = others.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            let idx = others[k];
            fixed[idx] += 1;
            if fixed[idx] < cards[idx] {
                break;
            }
            fixed[idx] = 0;
        }
    }
}

/// Strictly falls to a single minimum, then strictly rises (either side may
/// be empty).
fn assert_unimodal(values: &[f64], what: &str) {
    let mut rising = false;
    for pair in values.windows(2) {
        if pair[1] > pair[0] {
            rising = true;
        } else {
            assert!(pair[1] < pair[0], "{what}: plateau at {}", pair[0]);
            assert!(!rising, "{what}: fell again after rising");
        }
    }
}

#[test]
fn criterion_10_solver_dependent_figures_documented() {
    let start = Instant::now();
    let readme = std::fs::read_to_string(
        std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../README.md"),
    )
    .expect("README.md exists at the workspace root");
    assert!(
        readme.contains("not acceptance targets"),
        "README must state that solver-dependent figures are not acceptance targets"
    );
    assert!(
        readme.to_lowercase().contains("field solver"),
        "README must attribute the excluded figures to the missing field solver"
    );
    finish(
        10,
        "README documents the solver-dependent optimum and wall-clock as out of scope".into(),
        start.elapsed(),
        Duration::from_secs(1),
    );
}
