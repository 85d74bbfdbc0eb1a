//! File formats: instance and config documents, catalog files, sample
//! streams, analysis reports, and synthetic instance generators.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::constraints::{
    balance_score, zone_weights, BalanceMode, ConstraintConfig, ConstraintError,
};
use crate::energy::{dissimilarity, EnergyConfig, EnergyError, EnergyTerm, Objective};
use crate::engine::{EngineConfig, Kernel, SampleRecord, STREAM_HEADER};
use crate::graph::{grid_edges, GraphError, SpatialGraph, Unit};
use crate::oracle::{ecmut_reachability, enumerate_contiguous, FeasibleCatalog, OracleError};
use crate::partition::{CanonicalId, Partition, PartitionError};
use crate::prcrx::{PrcrxSettings, TransitionSemantics};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("invalid instance: {0}")]
    Instance(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("generator gave up after {0} attempts")]
    RetryCapExhausted(usize),
    #[error("{count} stream ids are not in the catalog (first: {first})")]
    UnknownIds { count: u64, first: CanonicalId },
    #[error("catalog is empty")]
    EmptyCatalog,
}

// ---------------------------------------------------------------- instance

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub id: usize,
    pub weight: f64,
    pub characteristic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub n: usize,
    pub units: Vec<UnitRecord>,
    pub edges: Vec<[usize; 2]>,
}

impl InstanceDoc {
    pub fn from_graph(graph: &SpatialGraph) -> Self {
        InstanceDoc {
            n: graph.n(),
            units: graph
                .units()
                .iter()
                .enumerate()
                .map(|(id, u)| UnitRecord {
                    id,
                    weight: u.weight,
                    characteristic: u.characteristic,
                })
                .collect(),
            edges: graph.edges().into_iter().map(|(a, b)| [a, b]).collect(),
        }
    }

    /// Units sorted by id, edges oriented low-high, sorted, deduplicated.
    pub fn normalized(&self) -> Result<InstanceDoc, FormatError> {
        let mut units = self.units.clone();
        units.sort_by_key(|u| u.id);
        if units.len() != self.n {
            return Err(FormatError::Instance(format!(
                "n = {} but {} units listed",
                self.n,
                units.len()
            )));
        }
        for (i, u) in units.iter().enumerate() {
            if u.id != i {
                return Err(FormatError::Instance(format!(
                    "unit ids must be 0..{} without gaps or repeats (found {} at position {i})",
                    self.n, u.id
                )));
            }
        }
        let mut edges: Vec<[usize; 2]> = self
            .edges
            .iter()
            .map(|&[a, b]| [a.min(b), a.max(b)])
            .collect();
        edges.sort_unstable();
        edges.dedup();
        Ok(InstanceDoc {
            n: self.n,
            units,
            edges,
        })
    }

    pub fn to_graph(&self) -> Result<SpatialGraph, FormatError> {
        let doc = self.normalized()?;
        let units = doc
            .units
            .iter()
            .map(|u| Unit {
                weight: u.weight,
                characteristic: u.characteristic,
            })
            .collect();
        let edges: Vec<(usize, usize)> = doc.edges.iter().map(|&[a, b]| (a, b)).collect();
        Ok(SpatialGraph::new(units, &edges)?)
    }

    /// SHA-256 of the normalized document's compact JSON, hex encoded.
    pub fn checksum(&self) -> Result<String, FormatError> {
        let json = serde_json::to_string(&self.normalized()?)?;
        Ok(hex_digest(json.as_bytes()))
    }

    pub fn to_json(&self) -> Result<String, FormatError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

// ---------------------------------------------------------------- config

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyMode {
    #[default]
    Uniform,
    WeightedObjectives,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTermDoc {
    pub objective: String,
    pub weight: f64,
}

/// Every tunable of a run, as read from a config file. Absent fields take
/// their defaults; `epsilon` accepts a number, `null` or `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigDoc {
    pub k: u32,
    #[serde(serialize_with = "ser_epsilon", deserialize_with = "de_epsilon")]
    pub epsilon: f64,
    pub balance_mode: BalanceMode,
    pub energy_mode: EnergyMode,
    pub energy_terms: Vec<EnergyTermDoc>,
    pub ecmut_p: usize,
    pub mtm_m: usize,
    pub t_semantics: TransitionSemantics,
    pub target_pool_capacity: usize,
    pub q: usize,
    pub iterations: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub p_m: f64,
    pub seed: u64,
    /// Node budget for oracle enumeration.
    pub budget: u64,
}

impl Default for ConfigDoc {
    fn default() -> Self {
        let engine = EngineConfig::default();
        ConfigDoc {
            k: 2,
            epsilon: f64::INFINITY,
            balance_mode: BalanceMode::default(),
            energy_mode: EnergyMode::default(),
            energy_terms: Vec::new(),
            ecmut_p: engine.ecmut_p,
            mtm_m: engine.prcrx.m,
            t_semantics: engine.prcrx.semantics,
            target_pool_capacity: engine.target_pool_capacity,
            q: engine.q,
            iterations: engine.iterations,
            burn_in: engine.burn_in,
            thin: engine.thin,
            p_m: engine.p_m,
            seed: engine.seed,
            budget: crate::oracle::DEFAULT_BUDGET,
        }
    }
}

fn ser_epsilon<S: Serializer>(eps: &f64, s: S) -> Result<S::Ok, S::Error> {
    if eps.is_finite() {
        s.serialize_f64(*eps)
    } else {
        s.serialize_none()
    }
}

fn de_epsilon<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Eps {
        Num(f64),
        Text(String),
    }
    match Option::<Eps>::deserialize(d)? {
        None => Ok(f64::INFINITY),
        Some(Eps::Num(x)) => Ok(x),
        Some(Eps::Text(t)) => match t.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "none" => Ok(f64::INFINITY),
            other => other
                .parse()
                .map_err(|_| serde::de::Error::custom(format!("bad epsilon `{t}`"))),
        },
    }
}

impl ConfigDoc {
    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String, FormatError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn constraints(&self) -> Result<ConstraintConfig, FormatError> {
        Ok(ConstraintConfig::new(
            self.k,
            self.epsilon,
            self.balance_mode,
        )?)
    }

    pub fn energy(&self) -> Result<EnergyConfig, FormatError> {
        match self.energy_mode {
            EnergyMode::Uniform => Ok(EnergyConfig::Uniform),
            EnergyMode::WeightedObjectives => {
                let terms = self
                    .energy_terms
                    .iter()
                    .map(|t| {
                        Ok(EnergyTerm {
                            objective: Objective::parse(&t.objective)?,
                            weight: t.weight,
                        })
                    })
                    .collect::<Result<Vec<_>, EnergyError>>()?;
                Ok(EnergyConfig::WeightedObjectives(terms))
            }
        }
    }

    pub fn engine(&self, workers: usize) -> EngineConfig {
        EngineConfig {
            q: self.q,
            iterations: self.iterations,
            p_m: self.p_m,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: self.seed,
            ecmut_p: self.ecmut_p,
            prcrx: PrcrxSettings {
                m: self.mtm_m,
                semantics: self.t_semantics,
            },
            target_pool_capacity: self.target_pool_capacity,
            workers,
            ..EngineConfig::default()
        }
    }
}

// ---------------------------------------------------------------- catalog

/// One line per grouping, `<id> <labels>`, sorted by id.
pub fn write_catalog<W: Write>(mut out: W, catalog: &FeasibleCatalog) -> std::io::Result<()> {
    for (id, p) in catalog.ids.iter().zip(&catalog.entries) {
        writeln!(out, "{id} {}", p.to_label_string())?;
    }
    Ok(())
}

/// Reads a catalog file back. Counts other than `feasible` are unknown and
/// left at the feasible size.
pub fn read_catalog<R: BufRead>(input: R) -> Result<FeasibleCatalog, FormatError> {
    let mut entries = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| FormatError::Line {
            line: i + 1,
            message,
        };
        let (id, labels) = line
            .split_once(' ')
            .ok_or_else(|| bad("expected `<id> <labels>`".into()))?;
        let labels: Vec<u32> = labels
            .split(',')
            .map(|s| s.trim().parse::<u32>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(format!("bad label: {e}")))?;
        let k = labels.iter().copied().max().unwrap_or(0);
        let p = Partition::new(labels, k)?;
        let id: CanonicalId = id.parse().map_err(|e| bad(format!("bad id: {e}")))?;
        if p.canonical_id() != id {
            return Err(bad(format!("id {id} does not match labels")));
        }
        entries.push(p);
    }
    let size = entries.len() as u64;
    let counts = crate::oracle::CatalogCounts {
        unconstrained: num_bigint::BigUint::from(0u32),
        contiguous: size,
        feasible: size,
    };
    Ok(FeasibleCatalog::from_entries(entries, counts))
}

// ---------------------------------------------------------------- stream

pub fn write_stream<W: Write>(mut out: W, records: &[SampleRecord]) -> std::io::Result<()> {
    writeln!(out, "{STREAM_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.to_line())?;
    }
    Ok(())
}

pub fn parse_record(line: &str) -> Result<SampleRecord, String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 7 {
        return Err(format!("expected 7 fields, found {}", fields.len()));
    }
    let float = |s: &str| -> Result<f64, String> {
        if s == "nan" {
            Ok(f64::NAN)
        } else {
            s.parse().map_err(|e| format!("bad number `{s}`: {e}"))
        }
    };
    Ok(SampleRecord {
        iteration: fields[0]
            .parse()
            .map_err(|e| format!("bad iteration: {e}"))?,
        chain: fields[1].parse().map_err(|e| format!("bad chain: {e}"))?,
        canonical_id: fields[2].parse().map_err(|e| format!("bad id: {e}"))?,
        dissimilarity: float(fields[3])?,
        energy: float(fields[4])?,
        kernel: match fields[5] {
            "ecmut" => Kernel::Ecmut,
            "prcrx" => Kernel::Prcrx,
            other => return Err(format!("unknown kernel `{other}`")),
        },
        accepted: match fields[6] {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(format!("bad accepted flag `{other}`")),
        },
    })
}

pub fn read_stream<R: BufRead>(input: R) -> Result<Vec<SampleRecord>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line == STREAM_HEADER {
            continue;
        }
        out.push(parse_record(line).map_err(|message| FormatError::Line {
            line: i + 1,
            message,
        })?);
    }
    Ok(out)
}

// ---------------------------------------------------------------- analysis

pub const HISTOGRAM_BINS: usize = 50;

/// Counts of `values` in 50 equal bins over `[0, 1]`; the last bin is
/// closed. Non-finite or out-of-range values are skipped.
pub fn dissimilarity_histogram<I: IntoIterator<Item = f64>>(values: I) -> Vec<u64> {
    let mut bins = vec![0u64; HISTOGRAM_BINS];
    for v in values {
        if !(0.0..=1.0).contains(&v) {
            continue;
        }
        let b = ((v * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
        bins[b] += 1;
    }
    bins
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub records: u64,
    pub catalog_size: usize,
    pub tv: f64,
    pub threshold: f64,
    /// `(id, count)` for every catalog state.
    pub frequencies: Vec<(CanonicalId, u64)>,
    pub sample_histogram: Vec<u64>,
    /// Histogram of `f(X)` over the catalog itself, when the instance is known.
    pub oracle_histogram: Option<Vec<u64>>,
}

impl Analysis {
    pub fn passed(&self) -> bool {
        self.tv < self.threshold
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let n = self.catalog_size as f64;
        let _ = writeln!(s, "# tv_distance {:.6}", self.tv);
        let _ = writeln!(s, "# tv_threshold {}", self.threshold);
        let _ = writeln!(
            s,
            "# verdict {}",
            if self.passed() { "pass" } else { "fail" }
        );
        let _ = writeln!(s, "# records {}", self.records);
        let _ = writeln!(s, "# catalog_size {}", self.catalog_size);
        let _ = writeln!(s, "[frequency]");
        let _ = writeln!(s, "canonical_id,count,frequency,uniform");
        for (id, c) in &self.frequencies {
            let f = if self.records > 0 {
                *c as f64 / self.records as f64
            } else {
                0.0
            };
            let _ = writeln!(s, "{id},{c},{f:.6},{:.6}", 1.0 / n);
        }
        let _ = writeln!(s, "[histogram]");
        let edges: Vec<String> = (0..=HISTOGRAM_BINS)
            .map(|i| format!("{}", i as f64 / HISTOGRAM_BINS as f64))
            .collect();
        let _ = writeln!(s, "# bin_edges {}", edges.join(","));
        let _ = writeln!(s, "bin,lower,upper,sample_count,oracle_count");
        for (i, c) in self.sample_histogram.iter().enumerate() {
            let oracle = self
                .oracle_histogram
                .as_ref()
                .map_or_else(|| "".to_string(), |h| h[i].to_string());
            let _ = writeln!(
                s,
                "{i},{},{},{c},{oracle}",
                i as f64 / HISTOGRAM_BINS as f64,
                (i + 1) as f64 / HISTOGRAM_BINS as f64
            );
        }
        s
    }
}

/// Compares a sample stream against a catalog. Fails on ids the catalog
/// does not contain, since those mean the stream came from another instance
/// or constraint set.
pub fn analyze(
    records: &[SampleRecord],
    catalog: &FeasibleCatalog,
    graph: Option<&SpatialGraph>,
    threshold: f64,
) -> Result<Analysis, FormatError> {
    if catalog.is_empty() {
        return Err(FormatError::EmptyCatalog);
    }
    let mut counts = vec![0u64; catalog.len()];
    let mut unknown = 0u64;
    let mut first_unknown = None;
    for r in records {
        match catalog.index_of(r.canonical_id) {
            Some(i) => counts[i] += 1,
            None => {
                unknown += 1;
                first_unknown.get_or_insert(r.canonical_id);
            }
        }
    }
    if let Some(first) = first_unknown {
        return Err(FormatError::UnknownIds {
            count: unknown,
            first,
        });
    }
    let hist: BTreeMap<CanonicalId, u64> = catalog
        .ids
        .iter()
        .copied()
        .zip(counts.iter().copied())
        .filter(|&(_, c)| c > 0)
        .collect();
    let tv = if records.is_empty() {
        1.0
    } else {
        crate::oracle::tv_distance(&hist, catalog)?
    };
    let oracle_histogram = graph.map(|g| {
        dissimilarity_histogram(
            catalog
                .entries
                .iter()
                .map(|p| dissimilarity(g, p).unwrap_or(f64::NAN)),
        )
    });
    Ok(Analysis {
        records: records.len() as u64,
        catalog_size: catalog.len(),
        tv,
        threshold,
        frequencies: catalog.ids.iter().copied().zip(counts).collect(),
        sample_histogram: dissimilarity_histogram(records.iter().map(|r| r.dissimilarity)),
        oracle_histogram,
    })
}

// ---------------------------------------------------------------- generators

/// `rows x cols` lattice. Unit weights are 1 unless `weights` gives one per
/// unit; each unit's characteristic share rises linearly from west to east
/// so that zones differ in composition.
pub fn grid_instance(
    rows: usize,
    cols: usize,
    weights: Option<&[f64]>,
) -> Result<InstanceDoc, FormatError> {
    if rows == 0 || cols == 0 {
        return Err(FormatError::Instance(
            "rows and cols must be at least 1".into(),
        ));
    }
    let n = rows * cols;
    if let Some(w) = weights {
        if w.len() != n {
            return Err(FormatError::Instance(format!(
                "{} weights given for {n} units",
                w.len()
            )));
        }
    }
    let units = (0..n)
        .map(|id| {
            let weight = weights.map_or(1.0, |w| w[id]);
            let col = id % cols;
            let share = (col as f64 + 0.5) / cols as f64;
            UnitRecord {
                id,
                weight,
                characteristic: weight * share,
            }
        })
        .collect();
    let edges = grid_edges(rows, cols)
        .into_iter()
        .map(|(a, b)| [a, b])
        .collect();
    let doc = InstanceDoc { n, units, edges };
    doc.to_graph()?;
    Ok(doc)
}

/// A verified disconnection instance: its feasible set splits into at
/// least two classes under single-unit moves.
#[derive(Debug, Clone)]
pub struct DisconnectionDemo {
    pub instance: InstanceDoc,
    pub config: ConfigDoc,
    pub components: Vec<Vec<usize>>,
    pub catalog: FeasibleCatalog,
}

/// Draws random integer weights on a `rows x cols` grid and picks a tight
/// balance tolerance between two consecutive achievable scores, retrying
/// until the oracle confirms at least two single-move components, one of
/// which holds more than one state.
pub fn disconnection_demo(
    rows: usize,
    cols: usize,
    k: u32,
    seed: u64,
    max_attempts: usize,
) -> Result<DisconnectionDemo, FormatError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rows * cols;
    let mode = BalanceMode::RangeOverSum;
    for _ in 0..max_attempts {
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=12) as f64).collect();
        let mut doc = grid_instance(rows, cols, Some(&weights))?;
        for u in &mut doc.units {
            u.characteristic = (u.weight * rng.gen_range(0.05..0.95) * 100.0).round() / 100.0;
        }
        let graph = doc.to_graph()?;
        let contiguous = enumerate_contiguous(&graph, k, crate::oracle::DEFAULT_BUDGET)?;
        let mut scores: Vec<f64> = contiguous
            .iter()
            .filter_map(|p| balance_score(&zone_weights(&graph, p), mode).ok())
            .collect();
        scores.sort_by(f64::total_cmp);
        scores.dedup();
        if scores.len() < 6 {
            continue;
        }
        let cut = rng.gen_range(3..scores.len().min(12));
        let epsilon = 0.5 * (scores[cut - 1] + scores[cut]);
        let constraints = ConstraintConfig::new(k, epsilon, mode)?;
        let catalog =
            crate::oracle::enumerate_feasible(&graph, &constraints, crate::oracle::DEFAULT_BUDGET)?;
        let components = ecmut_reachability(&catalog, &graph, &constraints);
        if components.len() >= 2 && components.iter().any(|c| c.len() >= 2) {
            let config = ConfigDoc {
                k,
                epsilon,
                balance_mode: mode,
                ..ConfigDoc::default()
            };
            return Ok(DisconnectionDemo {
                instance: doc,
                config,
                components,
                catalog,
            });
        }
    }
    Err(FormatError::RetryCapExhausted(max_attempts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{enumerate_feasible, DEFAULT_BUDGET};

    #[test]
    fn grid_examples() {
        let doc = grid_instance(2, 2, None).unwrap();
        assert_eq!(doc.n, 4);
        assert_eq!(doc.edges.len(), 4);
        let doc = grid_instance(4, 4, None).unwrap();
        assert_eq!(doc.edges.len(), 2 * 4 * 4 - 4 - 4);
        assert!(grid_instance(0, 3, None).is_err());
    }

    #[test]
    fn instance_round_trip() {
        let doc = grid_instance(3, 2, Some(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0])).unwrap();
        let back = InstanceDoc::from_json(&doc.to_json().unwrap()).unwrap();
        assert_eq!(back.normalized().unwrap(), doc.normalized().unwrap());
        let again = InstanceDoc::from_graph(&back.to_graph().unwrap());
        assert_eq!(again.normalized().unwrap(), doc.normalized().unwrap());
        assert_eq!(again.checksum().unwrap(), doc.checksum().unwrap());
    }

    #[test]
    fn checksum_ignores_order() {
        let doc = grid_instance(2, 2, None).unwrap();
        let mut shuffled = doc.clone();
        shuffled.units.reverse();
        shuffled.edges.reverse();
        for e in &mut shuffled.edges {
            e.reverse();
        }
        assert_eq!(doc.checksum().unwrap(), shuffled.checksum().unwrap());
        let mut heavier = doc.clone();
        heavier.units[0].weight = 2.0;
        assert_ne!(doc.checksum().unwrap(), heavier.checksum().unwrap());
    }

    #[test]
    fn instance_rejects_bad_ids() {
        let mut doc = grid_instance(1, 3, None).unwrap();
        doc.units[2].id = 7;
        assert!(doc.to_graph().is_err());
        let mut doc = grid_instance(1, 3, None).unwrap();
        doc.edges.push([0, 9]);
        assert!(doc.to_graph().is_err());
    }

    #[test]
    fn config_epsilon_forms() {
        let c = ConfigDoc::from_json(r#"{"k": 3}"#).unwrap();
        assert!(c.epsilon.is_infinite());
        assert_eq!(c.mtm_m, 8);
        assert_eq!(c.t_semantics, TransitionSemantics::Probability);
        assert_eq!(c.target_pool_capacity, 64);
        assert_eq!(c.ecmut_p, 1);
        let c = ConfigDoc::from_json(r#"{"epsilon": null}"#).unwrap();
        assert!(c.epsilon.is_infinite());
        let c = ConfigDoc::from_json(r#"{"epsilon": "inf"}"#).unwrap();
        assert!(c.epsilon.is_infinite());
        let c = ConfigDoc::from_json(r#"{"epsilon": 0.1, "balance_mode": "max_deviation", "t_semantics": "falling_factorial"}"#).unwrap();
        assert_eq!(c.epsilon, 0.1);
        assert_eq!(c.balance_mode, BalanceMode::MaxDeviation);
        assert_eq!(c.t_semantics, TransitionSemantics::FallingFactorial);
        assert!(ConfigDoc::from_json(r#"{"epsilon": "wide"}"#).is_err());
        assert!(ConfigDoc::from_json(r#"{"unknown_field": 1}"#).is_err());
        let back = ConfigDoc::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn config_energy_terms() {
        let c = ConfigDoc::from_json(
            r#"{"energy_mode": "weighted_objectives", "energy_terms": [{"objective": "cut_edges", "weight": 0.5}]}"#,
        )
        .unwrap();
        assert_eq!(
            c.energy().unwrap(),
            EnergyConfig::WeightedObjectives(vec![EnergyTerm {
                objective: Objective::CutEdges,
                weight: 0.5
            }])
        );
        let bad = ConfigDoc {
            energy_mode: EnergyMode::WeightedObjectives,
            energy_terms: vec![EnergyTermDoc {
                objective: "area".into(),
                weight: 1.0,
            }],
            ..ConfigDoc::default()
        };
        assert!(bad.energy().is_err());
    }

    #[test]
    fn catalog_round_trip() {
        let g = SpatialGraph::grid(2, 3).unwrap();
        let cat = enumerate_feasible(&g, &ConstraintConfig::unbalanced(2), DEFAULT_BUDGET).unwrap();
        let mut buf = Vec::new();
        write_catalog(&mut buf, &cat).unwrap();
        let back = read_catalog(buf.as_slice()).unwrap();
        assert_eq!(back.ids, cat.ids);
        assert_eq!(back.entries, cat.entries);
        assert!(read_catalog("0000000000000001 1,2,2\n".as_bytes()).is_err());
    }

    #[test]
    fn stream_round_trip() {
        let recs = vec![
            SampleRecord {
                iteration: 0,
                chain: 2,
                canonical_id: CanonicalId(u64::MAX),
                dissimilarity: 0.25,
                energy: 0.0,
                kernel: Kernel::Ecmut,
                accepted: false,
            },
            SampleRecord {
                iteration: 5,
                chain: 0,
                canonical_id: CanonicalId(7),
                dissimilarity: f64::NAN,
                energy: 1.5,
                kernel: Kernel::Prcrx,
                accepted: true,
            },
        ];
        let mut buf = Vec::new();
        write_stream(&mut buf, &recs).unwrap();
        let back = read_stream(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0], recs[0]);
        assert!(back[1].dissimilarity.is_nan());
        assert_eq!(back[1].kernel, Kernel::Prcrx);
        assert!(read_stream("1,2,3\n".as_bytes()).is_err());
    }

    fn one_pass(cat: &FeasibleCatalog) -> Vec<SampleRecord> {
        cat.ids
            .iter()
            .enumerate()
            .map(|(i, &id)| SampleRecord {
                iteration: i as u64,
                chain: 0,
                canonical_id: id,
                dissimilarity: 0.5,
                energy: 0.0,
                kernel: Kernel::Ecmut,
                accepted: true,
            })
            .collect()
    }

    #[test]
    fn analysis_examples() {
        let g = grid_instance(2, 3, None).unwrap().to_graph().unwrap();
        let cat = enumerate_feasible(&g, &ConstraintConfig::unbalanced(2), DEFAULT_BUDGET).unwrap();
        let a = analyze(&one_pass(&cat), &cat, Some(&g), 0.05).unwrap();
        assert_eq!(a.tv, 0.0);
        assert!(a.passed());
        assert_eq!(a.sample_histogram[25], cat.len() as u64);
        assert_eq!(
            a.oracle_histogram.as_ref().unwrap().iter().sum::<u64>(),
            cat.len() as u64
        );
        let report = a.render();
        assert!(report.starts_with("# tv_distance 0.000000"));
        assert!(report.contains("# verdict pass"));

        let mut recs = one_pass(&cat);
        recs[0].canonical_id = CanonicalId(12345);
        match analyze(&recs, &cat, None, 0.05) {
            Err(FormatError::UnknownIds { count, .. }) => assert_eq!(count, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn histogram_edges() {
        let h = dissimilarity_histogram([0.0, 0.019, 0.02, 1.0, f64::NAN, -0.1]);
        assert_eq!(h[0], 2);
        assert_eq!(h[1], 1);
        assert_eq!(h[49], 1);
        assert_eq!(h.iter().sum::<u64>(), 4);
    }

    #[test]
    fn disconnection_demo_is_verified() {
        let demo = disconnection_demo(2, 3, 2, 7, 500).unwrap();
        assert!(demo.components.len() >= 2);
        let graph = demo.instance.to_graph().unwrap();
        let cons = demo.config.constraints().unwrap();
        let cat = enumerate_feasible(&graph, &cons, DEFAULT_BUDGET).unwrap();
        assert_eq!(cat.ids, demo.catalog.ids);
        assert_eq!(ecmut_reachability(&cat, &graph, &cons), demo.components);
    }
}
