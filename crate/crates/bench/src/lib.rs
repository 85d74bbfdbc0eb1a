//! Fixtures shared by the kernel benchmarks.

use emcmc_core::io::grid_instance;
use emcmc_core::oracle::DEFAULT_BUDGET;
use emcmc_core::{enumerate_feasible, BalanceMode, ConstraintConfig, Partition, SpatialGraph};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Fixture {
    pub graph: SpatialGraph,
    pub constraints: ConstraintConfig,
    /// Distinct feasible states drawn from the exact catalog.
    pub states: Vec<Partition>,
}

/// A unit-weight `side x side` lattice split into `k` zones with a
/// range-over-sum tolerance of `epsilon`.
pub fn lattice(side: usize, k: u32, epsilon: f64, count: usize, seed: u64) -> Fixture {
    let graph = grid_instance(side, side, None)
        .and_then(|doc| doc.to_graph())
        .expect("lattice instance");
    let constraints =
        ConstraintConfig::new(k, epsilon, BalanceMode::RangeOverSum).expect("constraints");
    let catalog = enumerate_feasible(&graph, &constraints, DEFAULT_BUDGET).expect("catalog");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = catalog
        .entries
        .choose_multiple(&mut rng, count)
        .cloned()
        .collect();
    Fixture {
        graph,
        constraints,
        states,
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
