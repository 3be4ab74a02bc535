//! Shared fixtures for the criterion benchmarks.

use pibo_core::{
    Dataset, ObjectiveSpec, Objective, SearchSpace, StriplineObjective,
};

/// The reference grid and objective used by every benchmark.
pub fn fixture() -> (SearchSpace, StriplineObjective) {
    let space = SearchSpace::default_stripline_grid();
    let objective = StriplineObjective::new(ObjectiveSpec::default())
        .expect("default objective parameters are valid");
    (space, objective)
}

/// A seeded dataset of `n` distinct evaluated grid points.
pub fn sampled_dataset(n: usize, seed: u64) -> Dataset {
    let (space, objective) = fixture();
    let mut dataset = Dataset::new();
    for point in space.sample_uniform(n, seed).expect("n is far below the grid size") {
        let value = objective.evaluate(&point).expect("grid geometry is physical");
        dataset.push(point, value).expect("sampled points are distinct");
    }
    dataset
}
