//! Brute-force ground truth for small instances: exact enumeration of
//! contiguous and feasible partitions, Stirling numbers, single-move
//! reachability and total-variation distance to the uniform law.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::constraints::{is_feasible, ConstraintConfig};
use crate::ecmut::feasible_moves;
use crate::graph::SpatialGraph;
use crate::partition::{CanonicalId, Partition};

pub const DEFAULT_BUDGET: u64 = 100_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("k = {k} exceeds n = {n}")]
    TooManyZones { n: u32, k: u32 },
    #[error("enumeration exceeded its budget of {0} expansions")]
    BudgetExceeded(u64),
    #[error("no observations")]
    EmptyObservations,
    #[error("catalog is empty")]
    EmptyCatalog,
}

/// Stirling number of the second kind via `S(n,k) = k S(n-1,k) + S(n-1,k-1)`.
pub fn stirling2(n: u32, k: u32) -> Result<BigUint, OracleError> {
    if k > n {
        return Err(OracleError::TooManyZones { n, k });
    }
    // row[j] holds S(i, j) for the current i
    let mut row = vec![BigUint::zero(); k as usize + 1];
    row[0] = BigUint::one();
    for i in 1..=n as usize {
        for j in (1..=k.min(i as u32) as usize).rev() {
            let carried = std::mem::take(&mut row[j]) * BigUint::from(j as u64);
            row[j] = carried + &row[j - 1];
        }
        row[0] = BigUint::zero();
    }
    Ok(row[k as usize].clone())
}

/// `k!` as a big integer.
pub fn factorial(k: u32) -> BigUint {
    (1..=k as u64).fold(BigUint::one(), |acc, i| acc * BigUint::from(i))
}

struct Search<'a> {
    graph: &'a SpatialGraph,
    k: u32,
    labels: Vec<u32>,
    budget: u64,
    spent: u64,
    out: Vec<Partition>,
}

impl Search<'_> {
    fn tick(&mut self) -> Result<(), OracleError> {
        self.spent += 1;
        if self.spent > self.budget {
            Err(OracleError::BudgetExceeded(self.budget))
        } else {
            Ok(())
        }
    }

    fn unassigned(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == 0)
            .map(|(u, _)| u)
    }

    /// Zones `zone..=k` still to place; fill zone `zone` with every connected
    /// set containing the lowest free unit.
    fn place(&mut self, zone: u32) -> Result<(), OracleError> {
        self.tick()?;
        let free: Vec<usize> = self.unassigned().collect();
        if zone == self.k {
            if self.graph.is_connected(&free).unwrap_or(false) {
                for &u in &free {
                    self.labels[u] = zone;
                }
                self.out
                    .push(Partition::from_raw(self.labels.clone(), self.k));
                for &u in &free {
                    self.labels[u] = 0;
                }
            }
            return Ok(());
        }
        let root = free[0];
        let max_size = free.len() - (self.k - zone) as usize;
        self.labels[root] = zone;
        let mut banned = vec![false; self.graph.n()];
        banned[root] = true;
        let frontier: Vec<usize> = self
            .graph
            .neighbors(root)
            .iter()
            .copied()
            .filter(|&v| self.labels[v] == 0)
            .collect();
        for &v in &frontier {
            banned[v] = true;
        }
        let result = self.grow(zone, 1, max_size, frontier, &mut banned);
        self.labels[root] = 0;
        result
    }

    /// Include/exclude branching on the frontier; every leaf is a distinct
    /// connected set. `banned` marks units already in the set, on the
    /// frontier, or excluded.
    fn grow(
        &mut self,
        zone: u32,
        size: usize,
        max_size: usize,
        mut frontier: Vec<usize>,
        banned: &mut Vec<bool>,
    ) -> Result<(), OracleError> {
        self.tick()?;
        let Some(w) = frontier.pop() else {
            return self.close_zone(zone);
        };
        // exclude w
        self.grow(zone, size, max_size, frontier.clone(), banned)?;
        // include w
        if size < max_size {
            self.labels[w] = zone;
            let mut added = Vec::new();
            for &v in self.graph.neighbors(w) {
                if self.labels[v] == 0 && !banned[v] {
                    banned[v] = true;
                    added.push(v);
                    frontier.push(v);
                }
            }
            let result = self.grow(zone, size + 1, max_size, frontier, banned);
            for v in added {
                banned[v] = false;
            }
            self.labels[w] = 0;
            result?;
        }
        Ok(())
    }

    fn close_zone(&mut self, zone: u32) -> Result<(), OracleError> {
        let free: Vec<usize> = self.unassigned().collect();
        let remaining_zones = (self.k - zone) as usize;
        if free.len() < remaining_zones {
            return Ok(());
        }
        if self.graph.connected_components(&free).len() > remaining_zones {
            return Ok(());
        }
        self.place(zone + 1)
    }
}

/// Every grouping of the units into exactly `k` non-empty connected zones,
/// in first-appearance labelling, sorted by canonical id.
pub fn enumerate_contiguous(
    graph: &SpatialGraph,
    k: u32,
    budget: u64,
) -> Result<Vec<Partition>, OracleError> {
    let n = graph.n() as u32;
    if k > n || k == 0 {
        return Err(OracleError::TooManyZones { n, k });
    }
    let mut search = Search {
        graph,
        k,
        labels: vec![0; graph.n()],
        budget,
        spent: 0,
        out: Vec::new(),
    };
    search.place(1)?;
    let mut out = search.out;
    out.sort_by_cached_key(|p| p.canonical_id());
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogCounts {
    /// `S(n, k)`: all groupings into `k` non-empty zones.
    pub unconstrained: BigUint,
    pub contiguous: u64,
    pub feasible: u64,
}

/// Feasible groupings of one instance, sorted by canonical id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleCatalog {
    pub entries: Vec<Partition>,
    pub ids: Vec<CanonicalId>,
    pub counts: CatalogCounts,
}

impl FeasibleCatalog {
    pub fn from_entries(entries: Vec<Partition>, counts: CatalogCounts) -> Self {
        let mut entries: Vec<Partition> = entries.iter().map(Partition::canonical).collect();
        entries.sort_by_cached_key(|p| p.canonical_id());
        entries.dedup();
        let ids = entries.iter().map(Partition::canonical_id).collect();
        FeasibleCatalog {
            entries,
            ids,
            counts,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, id: CanonicalId) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    /// Labelled counts: each grouping into `k` non-empty zones has `k!`
    /// distinct labellings.
    pub fn labeled_counts(&self, k: u32) -> (BigUint, BigUint) {
        let f = factorial(k);
        (
            BigUint::from(self.counts.contiguous) * &f,
            BigUint::from(self.counts.feasible) * f,
        )
    }
}

pub fn enumerate_feasible(
    graph: &SpatialGraph,
    config: &ConstraintConfig,
    budget: u64,
) -> Result<FeasibleCatalog, OracleError> {
    let contiguous = enumerate_contiguous(graph, config.k, budget)?;
    let contiguous_count = contiguous.len() as u64;
    let feasible: Vec<Partition> = contiguous
        .into_iter()
        .filter(|p| is_feasible(graph, p, config))
        .collect();
    let counts = CatalogCounts {
        unconstrained: stirling2(graph.n() as u32, config.k)?,
        contiguous: contiguous_count,
        feasible: feasible.len() as u64,
    };
    Ok(FeasibleCatalog::from_entries(feasible, counts))
}

/// Connected components of the graph on catalog states joined by one
/// feasible single-unit move. Each component lists catalog indices
/// ascending; components are ordered by their first index.
pub fn ecmut_reachability(
    catalog: &FeasibleCatalog,
    graph: &SpatialGraph,
    config: &ConstraintConfig,
) -> Vec<Vec<usize>> {
    let n = catalog.len();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, state) in catalog.entries.iter().enumerate() {
        for mv in feasible_moves(graph, state, config) {
            let next = Partition::from_raw(state.with_move(mv.unit, mv.to), state.k());
            if let Some(j) = catalog.index_of(next.canonical_id()) {
                adjacency[i].push(j);
            }
        }
    }
    let mut component = vec![usize::MAX; n];
    let mut out = Vec::new();
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        component[start] = id;
        let mut members = vec![start];
        let mut head = 0;
        while head < members.len() {
            let u = members[head];
            head += 1;
            for &v in &adjacency[u] {
                if component[v] == usize::MAX {
                    component[v] = id;
                    members.push(v);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// `1/2 sum |p_hat - 1/N|` over catalog states, plus the mass observed on
/// ids outside the catalog.
pub fn tv_distance(
    observed: &BTreeMap<CanonicalId, u64>,
    catalog: &FeasibleCatalog,
) -> Result<f64, OracleError> {
    if catalog.is_empty() {
        return Err(OracleError::EmptyCatalog);
    }
    let total: u64 = observed.values().sum();
    if total == 0 {
        return Err(OracleError::EmptyObservations);
    }
    let uniform = 1.0 / catalog.len() as f64;
    let total = total as f64;
    let mut sum = 0.0;
    for id in &catalog.ids {
        let p = observed.get(id).copied().unwrap_or(0) as f64 / total;
        sum += (p - uniform).abs();
    }
    for (id, &count) in observed {
        if catalog.index_of(*id).is_none() {
            sum += count as f64 / total;
        }
    }
    Ok(0.5 * sum)
}

/// Histogram of canonical ids.
pub fn histogram<I: IntoIterator<Item = CanonicalId>>(ids: I) -> BTreeMap<CanonicalId, u64> {
    let mut out = BTreeMap::new();
    for id in ids {
        *out.entry(id).or_insert(0) += 1;
    }
    out
}

/// States in catalog order mapped to their component index.
pub fn component_lookup(components: &[Vec<usize>]) -> HashMap<usize, usize> {
    components
        .iter()
        .enumerate()
        .flat_map(|(c, members)| members.iter().map(move |&m| (m, c)))
        .collect()
}
