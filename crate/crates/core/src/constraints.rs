//! Feasibility predicates: non-empty zones, contiguity, weight balance and
//! an optional list of caller-supplied predicates.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::SpatialGraph;
use crate::partition::Partition;

#[derive(Debug, Error, PartialEq)]
pub enum ConstraintError {
    #[error("total zone weight is zero; balance is undefined")]
    ZeroTotal,
    #[error("epsilon must be non-negative, got {0}")]
    NegativeEpsilon(f64),
}

/// How zone weight spread is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceMode {
    /// `(max w - min w) / sum w`
    #[default]
    RangeOverSum,
    /// `max |w - mean| / mean`
    MaxDeviation,
}

type PredicateFn = dyn Fn(&SpatialGraph, &Partition) -> bool + Send + Sync;

/// A named extra feasibility rule.
#[derive(Clone)]
pub struct ExtraPredicate {
    pub name: String,
    check: Arc<PredicateFn>,
}

impl ExtraPredicate {
    pub fn new<F>(name: impl Into<String>, check: F) -> Self
    where
        F: Fn(&SpatialGraph, &Partition) -> bool + Send + Sync + 'static,
    {
        ExtraPredicate {
            name: name.into(),
            check: Arc::new(check),
        }
    }

    pub fn holds(&self, graph: &SpatialGraph, partition: &Partition) -> bool {
        (self.check)(graph, partition)
    }
}

impl fmt::Debug for ExtraPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("ExtraPredicate").field(&self.name).finish()
    }
}

#[derive(Debug, Clone)]
pub struct ConstraintConfig {
    pub k: u32,
    /// Balance tolerance; `f64::INFINITY` disables the balance check.
    pub epsilon: f64,
    pub balance_mode: BalanceMode,
    pub extra: Vec<ExtraPredicate>,
}

impl ConstraintConfig {
    pub fn new(k: u32, epsilon: f64, balance_mode: BalanceMode) -> Result<Self, ConstraintError> {
        if epsilon.is_nan() || epsilon < 0.0 {
            return Err(ConstraintError::NegativeEpsilon(epsilon));
        }
        Ok(ConstraintConfig {
            k,
            epsilon,
            balance_mode,
            extra: Vec::new(),
        })
    }

    /// Contiguity only.
    pub fn unbalanced(k: u32) -> Self {
        ConstraintConfig {
            k,
            epsilon: f64::INFINITY,
            balance_mode: BalanceMode::default(),
            extra: Vec::new(),
        }
    }

    pub fn with_extra(mut self, predicate: ExtraPredicate) -> Self {
        self.extra.push(predicate);
        self
    }

    pub fn balance_active(&self) -> bool {
        self.epsilon.is_finite()
    }

    /// Strict `score < epsilon`; an all-zero weight vector counts as balanced.
    pub fn balance_ok(&self, weights: &ZoneWeights) -> bool {
        if !self.balance_active() {
            return true;
        }
        match balance_score(weights, self.balance_mode) {
            Ok(score) => score < self.epsilon,
            Err(_) => true,
        }
    }
}

/// Aggregated zone weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneWeights {
    pub w: Vec<f64>,
    pub total: f64,
}

impl ZoneWeights {
    pub fn from_weights(w: Vec<f64>) -> Self {
        let total = w.iter().sum();
        ZoneWeights { w, total }
    }
}

/// Sums unit weights per zone in ascending unit order.
pub fn zone_weights(graph: &SpatialGraph, partition: &Partition) -> ZoneWeights {
    zone_weights_of(graph, partition.labels(), partition.k())
}

pub(crate) fn zone_weights_of(graph: &SpatialGraph, labels: &[u32], k: u32) -> ZoneWeights {
    let mut w = vec![0.0; k as usize];
    for (u, &l) in labels.iter().enumerate() {
        w[l as usize - 1] += graph.unit(u).weight;
    }
    ZoneWeights::from_weights(w)
}

pub fn balance_score(weights: &ZoneWeights, mode: BalanceMode) -> Result<f64, ConstraintError> {
    if weights.total <= 0.0 || weights.w.is_empty() {
        return Err(ConstraintError::ZeroTotal);
    }
    let max = weights.w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = weights.w.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(match mode {
        BalanceMode::RangeOverSum => (max - min) / weights.total,
        BalanceMode::MaxDeviation => {
            let mean = weights.total / weights.w.len() as f64;
            (max - mean).max(mean - min) / mean
        }
    })
}

/// First failing rule of `is_feasible`, in check order.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Dimensions,
    EmptyZone(u32),
    Disconnected(u32),
    Balance(f64),
    Extra(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Dimensions => write!(f, "partition does not match graph/zone count"),
            Violation::EmptyZone(z) => write!(f, "zone {z} is empty"),
            Violation::Disconnected(z) => write!(f, "zone {z} is not contiguous"),
            Violation::Balance(s) => write!(f, "weight balance {s:.6} exceeds epsilon"),
            Violation::Extra(name) => write!(f, "extra predicate `{name}` fails"),
        }
    }
}

pub fn violation(
    graph: &SpatialGraph,
    partition: &Partition,
    config: &ConstraintConfig,
) -> Option<Violation> {
    if partition.len() != graph.n() || partition.k() != config.k {
        return Some(Violation::Dimensions);
    }
    let labels = partition.labels();
    if let Some(z) = partition.zone_sizes().iter().position(|&s| s == 0) {
        return Some(Violation::EmptyZone(z as u32 + 1));
    }
    for zone in 1..=config.k {
        if !graph.zone_connected_without(labels, zone, &|_| false) {
            return Some(Violation::Disconnected(zone));
        }
    }
    if config.balance_active() {
        let weights = zone_weights(graph, partition);
        if !config.balance_ok(&weights) {
            let score = balance_score(&weights, config.balance_mode).unwrap_or(0.0);
            return Some(Violation::Balance(score));
        }
    }
    config
        .extra
        .iter()
        .find(|p| !p.holds(graph, partition))
        .map(|p| Violation::Extra(p.name.clone()))
}

pub fn is_feasible(graph: &SpatialGraph, partition: &Partition, config: &ConstraintConfig) -> bool {
    violation(graph, partition, config).is_none()
}

/// Balance and extra predicates only; contiguity and non-emptiness are the
/// caller's responsibility.
pub(crate) fn soft_constraints_hold(
    graph: &SpatialGraph,
    labels: &[u32],
    config: &ConstraintConfig,
) -> bool {
    if config.balance_active() && !config.balance_ok(&zone_weights_of(graph, labels, config.k)) {
        return false;
    }
    if config.extra.is_empty() {
        return true;
    }
    let p = Partition::from_raw(labels.to_vec(), config.k);
    config.extra.iter().all(|e| e.holds(graph, &p))
}
