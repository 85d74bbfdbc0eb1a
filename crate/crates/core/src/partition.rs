//! Zone assignments and their label-invariant identifiers.

use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PartitionError {
    #[error("zone count must be at least 1")]
    NoZones,
    #[error("unit {unit} has label {label} outside [1, {k}]")]
    LabelOutOfRange { unit: usize, label: u32, k: u32 },
    #[error("zone {0} is empty")]
    EmptyZone(u32),
    #[error("partition covers {got} units, graph has {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Assignment of every unit to one of `k` zones. Labels are 1-based and
/// every label in `1..=k` is used.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    labels: Vec<u32>,
    k: u32,
}

impl Partition {
    pub fn new(labels: Vec<u32>, k: u32) -> Result<Self, PartitionError> {
        if k == 0 {
            return Err(PartitionError::NoZones);
        }
        let mut used = vec![false; k as usize];
        for (unit, &label) in labels.iter().enumerate() {
            if label == 0 || label > k {
                return Err(PartitionError::LabelOutOfRange { unit, label, k });
            }
            used[label as usize - 1] = true;
        }
        if let Some(z) = used.iter().position(|&u| !u) {
            return Err(PartitionError::EmptyZone(z as u32 + 1));
        }
        Ok(Partition { labels, k })
    }

    /// Builds without validation; callers guarantee the invariants.
    pub(crate) fn from_raw(labels: Vec<u32>, k: u32) -> Self {
        debug_assert!(Partition::new(labels.clone(), k).is_ok());
        Partition { labels, k }
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn zone_of(&self, unit: usize) -> u32 {
        self.labels[unit]
    }

    /// Units of `zone`, ascending.
    pub fn members(&self, zone: u32) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&u| self.labels[u] == zone)
            .collect()
    }

    pub fn zone_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k as usize];
        for &l in &self.labels {
            sizes[l as usize - 1] += 1;
        }
        sizes
    }

    /// Copy with `unit` moved to `zone`; may leave a zone empty, so only for
    /// internal use where the caller checks.
    pub(crate) fn with_move(&self, unit: usize, zone: u32) -> Vec<u32> {
        let mut labels = self.labels.clone();
        labels[unit] = zone;
        labels
    }

    /// Relabels zones in order of first appearance over ascending unit ids.
    pub fn canonical(&self) -> Partition {
        let mut map = vec![0u32; self.k as usize + 1];
        let mut next = 0;
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                if map[l as usize] == 0 {
                    next += 1;
                    map[l as usize] = next;
                }
                map[l as usize]
            })
            .collect();
        Partition { labels, k: self.k }
    }

    pub fn canonical_id(&self) -> CanonicalId {
        canonical_id(self)
    }

    /// Comma-separated labels, e.g. `1,1,2`.
    pub fn to_label_string(&self) -> String {
        let parts: Vec<String> = self.labels.iter().map(|l| l.to_string()).collect();
        parts.join(",")
    }
}

/// Label-invariant identifier of a partition's unit grouping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalId(pub u64);

impl fmt::Display for CanonicalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl std::str::FromStr for CanonicalId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        u64::from_str_radix(s, 16).map(CanonicalId)
    }
}

/// SHA-256 over the first-appearance relabelling, truncated to 64 bits.
pub fn canonical_id(partition: &Partition) -> CanonicalId {
    let canon = partition.canonical();
    let mut hasher = Sha256::new();
    hasher.update((canon.labels.len() as u64).to_le_bytes());
    for &l in &canon.labels {
        hasher.update(l.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    CanonicalId(u64::from_be_bytes(head))
}
