//! Evolutionary Markov chain Monte Carlo over contiguous, weight-balanced
//! partitions of a spatial adjacency graph.
//!
//! Two kernels drive the population: a single- or multi-unit boundary
//! mutation accepted by Metropolis-Hastings, and a path-relinking crossover
//! accepted by Multiple-Try Metropolis. [`oracle`] enumerates small
//! instances exhaustively so sampler output can be checked against the
//! exact uniform distribution.

pub mod constraints;
pub mod ecmut;
pub mod energy;
pub mod engine;
pub mod graph;
pub mod io;
pub mod oracle;
pub mod partition;
pub mod prcrx;

pub use constraints::{
    balance_score, is_feasible, violation, zone_weights, BalanceMode, ConstraintConfig,
    ConstraintError, ExtraPredicate, Violation, ZoneWeights,
};
pub use ecmut::{feasible_moves, propose_ecmut, step_ecmut, MutationProposal};
pub use energy::{dissimilarity, energy, EnergyConfig, EnergyError, EnergyTerm, Objective};
pub use engine::{
    run, ChainState, EngineConfig, EngineError, Kernel, KernelStats, RunOutput, RunReport,
    SampleRecord,
};
pub use graph::{GraphError, Move, SpatialGraph, Unit};
pub use io::{ConfigDoc, FormatError, InstanceDoc};
pub use oracle::{
    ecmut_reachability, enumerate_contiguous, enumerate_feasible, stirling2, tv_distance,
    FeasibleCatalog, OracleError,
};
pub use partition::{CanonicalId, Partition, PartitionError};
pub use prcrx::{step_prcrx, PrcrxSettings, TransitionSemantics};
