//! Immutable unit-adjacency graph and the connectivity primitives shared by
//! every kernel.

use std::collections::VecDeque;

use thiserror::Error;

use crate::partition::Partition;

/// One spatial unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unit {
    pub weight: f64,
    /// Portion of `weight` carrying the characteristic of interest.
    pub characteristic: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("graph has no units")]
    Empty,
    #[error("unit id out of range: {id} (n = {n})")]
    UnitOutOfRange { id: usize, n: usize },
    #[error("self loop on unit {0}")]
    SelfLoop(usize),
    #[error("unit {id} has invalid weight {weight}")]
    InvalidWeight { id: usize, weight: f64 },
    #[error("unit {id} has characteristic {characteristic} outside [0, weight {weight}]")]
    InvalidCharacteristic {
        id: usize,
        weight: f64,
        characteristic: f64,
    },
    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },
    #[error("subset is empty")]
    EmptySubset,
}

/// A single-unit reassignment `unit -> zone` (zone labels are 1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Move {
    pub unit: usize,
    pub to: u32,
}

/// Validated, immutable spatial graph.
///
/// Adjacency lists are sorted ascending and free of duplicates, so every
/// traversal visits neighbours in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGraph {
    units: Vec<Unit>,
    adjacency: Vec<Vec<usize>>,
    edge_count: usize,
}

impl SpatialGraph {
    pub fn new(units: Vec<Unit>, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let n = units.len();
        if n == 0 {
            return Err(GraphError::Empty);
        }
        for (id, u) in units.iter().enumerate() {
            if !(u.weight.is_finite() && u.weight >= 0.0) {
                return Err(GraphError::InvalidWeight {
                    id,
                    weight: u.weight,
                });
            }
            if !(u.characteristic.is_finite()
                && u.characteristic >= 0.0
                && u.characteristic <= u.weight)
            {
                return Err(GraphError::InvalidCharacteristic {
                    id,
                    weight: u.weight,
                    characteristic: u.characteristic,
                });
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            for id in [a, b] {
                if id >= n {
                    return Err(GraphError::UnitOutOfRange { id, n });
                }
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        let mut edge_count = 0;
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
            edge_count += list.len();
        }
        let graph = SpatialGraph {
            units,
            adjacency,
            edge_count: edge_count / 2,
        };
        let all: Vec<usize> = (0..n).collect();
        let components = graph.connected_components(&all).len();
        if components != 1 {
            return Err(GraphError::Disconnected { components });
        }
        Ok(graph)
    }

    /// Unit-weight grid with 4-neighbour adjacency, row-major ids.
    pub fn grid(rows: usize, cols: usize) -> Result<Self, GraphError> {
        let units = vec![
            Unit {
                weight: 1.0,
                characteristic: 0.0
            };
            rows * cols
        ];
        Self::new(units, &grid_edges(rows, cols))
    }

    pub fn n(&self) -> usize {
        self.units.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn unit(&self, id: usize) -> &Unit {
        &self.units[id]
    }

    pub fn neighbors(&self, id: usize) -> &[usize] {
        &self.adjacency[id]
    }

    /// Edges as `(a, b)` with `a < b`, ascending.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for (a, list) in self.adjacency.iter().enumerate() {
            out.extend(list.iter().filter(|&&b| b > a).map(|&b| (a, b)));
        }
        out
    }

    pub fn total_weight(&self) -> f64 {
        self.units.iter().map(|u| u.weight).sum()
    }

    pub fn is_connected(&self, subset: &[usize]) -> Result<bool, GraphError> {
        let first = *subset.first().ok_or(GraphError::EmptySubset)?;
        self.check_ids(subset)?;
        let mut member = vec![false; self.n()];
        for &u in subset {
            member[u] = true;
        }
        let target = member.iter().filter(|&&m| m).count();
        Ok(self.reach_count(first, |v| member[v]) == target)
    }

    /// Maximal connected pieces of `subset`, ordered by their minimum unit
    /// id; each piece is sorted ascending.
    pub fn connected_components(&self, subset: &[usize]) -> Vec<Vec<usize>> {
        let mut member = vec![false; self.n()];
        for &u in subset {
            member[u] = true;
        }
        let mut seen = vec![false; self.n()];
        let mut out = Vec::new();
        for start in 0..self.n() {
            if !member[start] || seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut head = 0;
            while head < comp.len() {
                let u = comp[head];
                head += 1;
                for &v in &self.adjacency[u] {
                    if member[v] && !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Number of units reachable from `start` through units accepted by
    /// `allowed` (`start` itself is counted unconditionally).
    pub(crate) fn reach_count<F: Fn(usize) -> bool>(&self, start: usize, allowed: F) -> usize {
        let mut seen = vec![false; self.n()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if !seen[v] && allowed(v) {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count
    }

    /// Whether the units of `zone`, minus any unit flagged in `removed`,
    /// form a non-empty connected set.
    pub(crate) fn zone_connected_without(
        &self,
        labels: &[u32],
        zone: u32,
        removed: &dyn Fn(usize) -> bool,
    ) -> bool {
        let mut start = None;
        let mut size = 0;
        for (u, &l) in labels.iter().enumerate() {
            if l == zone && !removed(u) {
                size += 1;
                start.get_or_insert(u);
            }
        }
        match start {
            None => false,
            Some(s) => self.reach_count(s, |v| labels[v] == zone && !removed(v)) == size,
        }
    }

    /// All `(unit, zone)` pairs where the unit sits outside `zone` but
    /// touches it. Ordered by unit, then zone.
    pub fn boundary_moves(&self, partition: &Partition) -> Vec<Move> {
        let labels = partition.labels();
        let mut out = Vec::new();
        let mut targets: Vec<u32> = Vec::new();
        for u in 0..self.n() {
            targets.clear();
            targets.extend(
                self.adjacency[u]
                    .iter()
                    .map(|&v| labels[v])
                    .filter(|&z| z != labels[u]),
            );
            targets.sort_unstable();
            targets.dedup();
            out.extend(targets.iter().map(|&to| Move { unit: u, to }));
        }
        out
    }

    fn check_ids(&self, subset: &[usize]) -> Result<(), GraphError> {
        match subset.iter().find(|&&id| id >= self.n()) {
            Some(&id) => Err(GraphError::UnitOutOfRange { id, n: self.n() }),
            None => Ok(()),
        }
    }
}

/// Edges of an `rows x cols` lattice, row-major ids; `2rc - r - c` of them.
pub fn grid_edges(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let u = r * cols + c;
            if c + 1 < cols {
                edges.push((u, u + 1));
            }
            if r + 1 < rows {
                edges.push((u, u + cols));
            }
        }
    }
    edges
}
