//! Energy `H` of a feasible partition (target density `exp(-H)`) and the
//! weighted dissimilarity index used to summarise partitions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{balance_score, zone_weights, BalanceMode};
use crate::graph::SpatialGraph;
use crate::partition::Partition;

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("dissimilarity undefined: overall characteristic share is {0}")]
    UndefinedShare(f64),
    #[error("unknown objective `{0}`")]
    UnknownObjective(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Range-over-sum balance score.
    BalanceScore,
    BalanceScoreMaxDeviation,
    Dissimilarity,
    /// Number of adjacent unit pairs split between zones.
    CutEdges,
}

impl Objective {
    pub fn parse(name: &str) -> Result<Self, EnergyError> {
        match name {
            "balance_score" => Ok(Objective::BalanceScore),
            "balance_score_max_deviation" => Ok(Objective::BalanceScoreMaxDeviation),
            "dissimilarity" => Ok(Objective::Dissimilarity),
            "cut_edges" => Ok(Objective::CutEdges),
            other => Err(EnergyError::UnknownObjective(other.to_string())),
        }
    }

    fn evaluate(self, graph: &SpatialGraph, partition: &Partition) -> f64 {
        match self {
            Objective::BalanceScore => {
                balance_score(&zone_weights(graph, partition), BalanceMode::RangeOverSum)
                    .unwrap_or(0.0)
            }
            Objective::BalanceScoreMaxDeviation => {
                balance_score(&zone_weights(graph, partition), BalanceMode::MaxDeviation)
                    .unwrap_or(0.0)
            }
            Objective::Dissimilarity => dissimilarity(graph, partition).unwrap_or(0.0),
            Objective::CutEdges => {
                let labels = partition.labels();
                graph
                    .edges()
                    .iter()
                    .filter(|&&(a, b)| labels[a] != labels[b])
                    .count() as f64
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyTerm {
    pub objective: Objective,
    pub weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub enum EnergyConfig {
    /// `H = 0` on every feasible state.
    #[default]
    Uniform,
    WeightedObjectives(Vec<EnergyTerm>),
}

impl EnergyConfig {
    pub fn is_uniform(&self) -> bool {
        match self {
            EnergyConfig::Uniform => true,
            EnergyConfig::WeightedObjectives(terms) => terms.iter().all(|t| t.weight == 0.0),
        }
    }

    /// Rejects configurations whose objectives are undefined on `graph`.
    pub fn check(&self, graph: &SpatialGraph) -> Result<(), EnergyError> {
        if let EnergyConfig::WeightedObjectives(terms) = self {
            if terms
                .iter()
                .any(|t| t.objective == Objective::Dissimilarity)
            {
                characteristic_share(graph)?;
            }
        }
        Ok(())
    }
}

pub fn energy(graph: &SpatialGraph, partition: &Partition, config: &EnergyConfig) -> f64 {
    match config {
        EnergyConfig::Uniform => 0.0,
        EnergyConfig::WeightedObjectives(terms) => terms
            .iter()
            .map(|t| t.weight * t.objective.evaluate(graph, partition))
            .sum(),
    }
}

fn characteristic_share(graph: &SpatialGraph) -> Result<f64, EnergyError> {
    let total: f64 = graph.total_weight();
    let chars: f64 = graph.units().iter().map(|u| u.characteristic).sum();
    let share = if total > 0.0 { chars / total } else { f64::NAN };
    if share > 0.0 && share < 1.0 {
        Ok(share)
    } else {
        Err(EnergyError::UndefinedShare(share))
    }
}

/// Weighted dissimilarity index
/// `f = 1/2 * sum_i (w_i / W) * |r_i - R| / (R (1 - R))`
/// where `r_i` is zone `i`'s characteristic share and `R` the overall share.
pub fn dissimilarity(graph: &SpatialGraph, partition: &Partition) -> Result<f64, EnergyError> {
    let share = characteristic_share(graph)?;
    let k = partition.k() as usize;
    let mut w = vec![0.0; k];
    let mut c = vec![0.0; k];
    for (u, &l) in partition.labels().iter().enumerate() {
        let unit = graph.unit(u);
        w[l as usize - 1] += unit.weight;
        c[l as usize - 1] += unit.characteristic;
    }
    let total: f64 = w.iter().sum();
    let spread = share * (1.0 - share);
    let sum: f64 = w
        .iter()
        .zip(&c)
        .filter(|(&wi, _)| wi > 0.0)
        .map(|(&wi, &ci)| (wi / total) * (ci / wi - share).abs() / spread)
        .sum();
    Ok(0.5 * sum)
}
