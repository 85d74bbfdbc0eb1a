//! Spatial path-relinking crossover run as a Multiple-Try Metropolis kernel.
//!
//! The current and target partitions are overlaid; every connected run of
//! units sharing one (current zone, target zone) label pair is a group. A
//! relinking walk moves groups whose labels differ to their target zone one
//! at a time, only ever choosing a group whose move keeps every zone
//! connected and non-empty. Intermediate states along one walk form the
//! proposal set.
//!
//! Candidate `y` carries the selection weight `pi(y) T(y -> x)`, with
//! `T(y -> x)` taken from a relinking walk from `y` back toward `x`. After
//! one candidate is chosen, a second set of `m - 1` states is drawn along
//! the walk from `y` toward `x`, and the move is accepted with
//! `min(1, sum w(forward) / (w(x) + sum w(reverse)))`.

use log::debug;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{soft_constraints_hold, ConstraintConfig};
use crate::energy::{energy, EnergyConfig};
use crate::graph::SpatialGraph;
use crate::partition::Partition;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PrcrxError {
    #[error("groups moved ({c}) must lie in 1..={len}")]
    StepOutOfRange { c: usize, len: usize },
    #[error("choice counts must be positive")]
    ZeroChoiceCount,
}

/// How a walk prefix is turned into a transition term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionSemantics {
    /// Probability of the realised ordered group sequence.
    #[default]
    Probability,
    /// Falling factorial `C (C-1) ... (C-c+1)` over the movable-group count.
    FallingFactorial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrcrxSettings {
    /// Proposal-set size.
    pub m: usize,
    pub semantics: TransitionSemantics,
}

impl Default for PrcrxSettings {
    fn default() -> Self {
        PrcrxSettings {
            m: 8,
            semantics: TransitionSemantics::Probability,
        }
    }
}

/// Connected run of units sharing one source label and one target label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapGroup {
    pub units: Vec<usize>,
    pub source_zone: u32,
    pub target_zone: u32,
}

impl OverlapGroup {
    pub fn is_movable(&self) -> bool {
        self.source_zone != self.target_zone
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapDecomposition {
    /// Ordered by minimum unit id; together they cover every unit once.
    pub groups: Vec<OverlapGroup>,
}

impl OverlapDecomposition {
    /// Number of groups that must move (`C`).
    pub fn movable_count(&self) -> usize {
        self.groups.iter().filter(|g| g.is_movable()).count()
    }

    /// Units that must move (`d`).
    pub fn distance(&self) -> usize {
        self.groups
            .iter()
            .filter(|g| g.is_movable())
            .map(|g| g.units.len())
            .sum()
    }
}

pub fn overlap_decompose(
    graph: &SpatialGraph,
    source: &Partition,
    target: &Partition,
) -> OverlapDecomposition {
    let (src, tgt) = (source.labels(), target.labels());
    let n = graph.n();
    let mut seen = vec![false; n];
    let mut groups = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let key = (src[start], tgt[start]);
        seen[start] = true;
        let mut units = vec![start];
        let mut head = 0;
        while head < units.len() {
            let u = units[head];
            head += 1;
            for &v in graph.neighbors(u) {
                if !seen[v] && (src[v], tgt[v]) == key {
                    seen[v] = true;
                    units.push(v);
                }
            }
        }
        units.sort_unstable();
        groups.push(OverlapGroup {
            units,
            source_zone: key.0,
            target_zone: key.1,
        });
    }
    OverlapDecomposition { groups }
}

/// One group index per target zone `1..=k`: the largest group already
/// carrying that label, else the largest group headed there. Ties go to
/// the lower minimum unit id.
pub fn seed_groups(decomposition: &OverlapDecomposition, k: u32) -> Vec<usize> {
    let pick = |zone: u32, same_label: bool| {
        decomposition
            .groups
            .iter()
            .enumerate()
            .filter(|(_, g)| g.target_zone == zone && (!same_label || g.source_zone == zone))
            // groups are already in min-id order; max_by_key keeps the last
            // maximum, so compare on (size, reverse index)
            .max_by_key(|(i, g)| (g.units.len(), std::cmp::Reverse(*i)))
            .map(|(i, _)| i)
    };
    (1..=k)
        .map(|zone| {
            pick(zone, true)
                .or_else(|| pick(zone, false))
                .unwrap_or_else(|| panic!("no group targets zone {zone}"))
        })
        .collect()
}

/// One state along a relinking walk.
#[derive(Debug, Clone, PartialEq)]
pub struct PathStep {
    pub state: Partition,
    /// Full feasibility (balance and extras); contiguity always holds.
    pub feasible: bool,
    /// Number of groups that could legally move at this step.
    pub choices: usize,
    /// Index of the moved group in the decomposition.
    pub group: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelinkPath {
    pub decomposition: OverlapDecomposition,
    pub steps: Vec<PathStep>,
}

impl RelinkPath {
    pub fn choice_counts(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.choices).collect()
    }

    /// Whether the walk moved every movable group.
    pub fn is_complete(&self) -> bool {
        self.steps.len() == self.decomposition.movable_count()
    }
}

fn group_move_keeps_contiguity(
    graph: &SpatialGraph,
    labels: &[u32],
    in_group: &[bool],
    group: &OverlapGroup,
) -> bool {
    let (from, to) = (group.source_zone, group.target_zone);
    if !graph.zone_connected_without(labels, from, &|v| in_group[v]) {
        return false;
    }
    // target zone plus the group must be one piece
    let start = group.units[0];
    let target_size = labels.iter().filter(|&&l| l == to).count() + group.units.len();
    graph.reach_count(start, |v| labels[v] == to || in_group[v]) == target_size
}

/// Walks from `source` toward `target`, moving one movable group per step.
///
/// Movable seed groups go first, in ascending target-zone order, whenever
/// their move keeps contiguity; after that the next group is drawn
/// uniformly among the groups whose move keeps every zone connected and
/// non-empty. The walk stops when all groups have moved or none can.
pub fn walk_path<R: Rng + ?Sized>(
    graph: &SpatialGraph,
    source: &Partition,
    target: &Partition,
    config: &ConstraintConfig,
    rng: &mut R,
) -> RelinkPath {
    let decomposition = overlap_decompose(graph, source, target);
    let k = source.k();
    let mut labels = source.labels().to_vec();
    let mut pending: Vec<usize> = (0..decomposition.groups.len())
        .filter(|&i| decomposition.groups[i].is_movable())
        .collect();
    let mut masks: Vec<Vec<bool>> = Vec::with_capacity(decomposition.groups.len());
    for g in &decomposition.groups {
        let mut mask = vec![false; graph.n()];
        for &u in &g.units {
            mask[u] = true;
        }
        masks.push(mask);
    }
    let mut forced: Vec<usize> = if pending.is_empty() {
        Vec::new()
    } else {
        seed_groups(&decomposition, k)
            .into_iter()
            .filter(|&i| decomposition.groups[i].is_movable())
            .collect()
    };
    forced.dedup();

    let mut steps = Vec::new();
    let apply = |labels: &mut Vec<u32>, gi: usize, choices: usize, steps: &mut Vec<PathStep>| {
        let g = &decomposition.groups[gi];
        for &u in &g.units {
            labels[u] = g.target_zone;
        }
        steps.push(PathStep {
            state: Partition::from_raw(labels.clone(), k),
            feasible: soft_constraints_hold(graph, labels, config),
            choices,
            group: gi,
        });
    };

    for gi in forced {
        let g = &decomposition.groups[gi];
        if group_move_keeps_contiguity(graph, &labels, &masks[gi], g) {
            apply(&mut labels, gi, 1, &mut steps);
            pending.retain(|&p| p != gi);
        }
    }
    let mut options = Vec::with_capacity(pending.len());
    while !pending.is_empty() {
        options.clear();
        options.extend(pending.iter().copied().filter(|&gi| {
            group_move_keeps_contiguity(graph, &labels, &masks[gi], &decomposition.groups[gi])
        }));
        if options.is_empty() {
            break;
        }
        let gi = options[rng.gen_range(0..options.len())];
        apply(&mut labels, gi, options.len(), &mut steps);
        pending.retain(|&p| p != gi);
    }
    RelinkPath {
        decomposition,
        steps,
    }
}

/// Transition term for a walk prefix of `c` steps.
///
/// Probability semantics: `prod 1 / counts[i]` over the first `c` steps.
/// Falling-factorial semantics: `C (C-1) ... (C-c+1)` with `C = movable_groups`.
pub fn transition_prob(
    c: usize,
    step_choice_counts: &[usize],
    movable_groups: usize,
    semantics: TransitionSemantics,
) -> Result<f64, PrcrxError> {
    if c == 0 || c > step_choice_counts.len() {
        return Err(PrcrxError::StepOutOfRange {
            c,
            len: step_choice_counts.len(),
        });
    }
    let prefix = &step_choice_counts[..c];
    if prefix.contains(&0) {
        return Err(PrcrxError::ZeroChoiceCount);
    }
    Ok(match semantics {
        TransitionSemantics::Probability => prefix.iter().map(|&n| 1.0 / n as f64).product(),
        TransitionSemantics::FallingFactorial => (0..c)
            .map(|i| movable_groups.saturating_sub(i) as f64)
            .product(),
    })
}

/// Transition term `T(from -> goal)` from a simulated walk toward `goal`.
///
/// When the walk stalls before reaching `goal`, the realised counts are
/// used as they stand.
pub fn relink_transition<R: Rng + ?Sized>(
    graph: &SpatialGraph,
    from: &Partition,
    goal: &Partition,
    config: &ConstraintConfig,
    semantics: TransitionSemantics,
    rng: &mut R,
) -> f64 {
    let path = walk_path(graph, from, goal, config, rng);
    if path.steps.is_empty() {
        debug!("relink walk toward goal stalled at its first step");
        return 1.0;
    }
    if !path.is_complete() {
        debug!(
            "relink walk stalled after {} of {} groups",
            path.steps.len(),
            path.decomposition.movable_count()
        );
    }
    let counts = path.choice_counts();
    transition_prob(
        counts.len(),
        &counts,
        path.decomposition.movable_count(),
        semantics,
    )
    .expect("non-empty walk")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub state: Partition,
    /// Groups moved to reach this state.
    pub c: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProposalSet {
    pub candidates: Vec<Candidate>,
    pub chosen_index: Option<usize>,
}

impl ProposalSet {
    pub fn total_weight(&self) -> f64 {
        self.candidates.iter().map(|c| c.weight).sum()
    }

    /// Draws a candidate with probability proportional to its weight.
    pub fn choose<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<&Candidate> {
        let total = self.total_weight();
        if total.is_nan() || total <= 0.0 {
            return None;
        }
        let mut ticket = rng.gen::<f64>() * total;
        let mut chosen = None;
        for (i, c) in self.candidates.iter().enumerate() {
            if c.weight <= 0.0 {
                continue;
            }
            chosen = Some(i);
            if ticket < c.weight {
                break;
            }
            ticket -= c.weight;
        }
        self.chosen_index = chosen;
        chosen.map(|i| &self.candidates[i])
    }
}

/// Unnormalised density relative to `h_ref`: `exp(-(H(s) - h_ref))`.
fn relative_density(
    graph: &SpatialGraph,
    state: &Partition,
    energy_config: &EnergyConfig,
    h_ref: f64,
) -> f64 {
    if energy_config.is_uniform() {
        1.0
    } else {
        (-(energy(graph, state, energy_config) - h_ref)).exp()
    }
}

/// Draws `count` states along one walk from `from` toward `toward`; each
/// candidate is weighted by `pi(state) T(state -> anchor)`, zero if
/// infeasible.
#[allow(clippy::too_many_arguments)]
fn proposals_along<R: Rng + ?Sized>(
    graph: &SpatialGraph,
    from: &Partition,
    toward: &Partition,
    anchor: &Partition,
    count: usize,
    settings: &PrcrxSettings,
    config: &ConstraintConfig,
    energy_config: &EnergyConfig,
    h_ref: f64,
    rng: &mut R,
) -> (ProposalSet, RelinkPath) {
    let path = walk_path(graph, from, toward, config, rng);
    let mut set = ProposalSet::default();
    if path.steps.is_empty() {
        return (set, path);
    }
    let mut cache: Vec<Option<f64>> = vec![None; path.steps.len()];
    for _ in 0..count {
        let idx = rng.gen_range(0..path.steps.len());
        let step = &path.steps[idx];
        let weight = if !step.feasible {
            0.0
        } else if let Some(w) = cache[idx] {
            w
        } else {
            let t = relink_transition(graph, &step.state, anchor, config, settings.semantics, rng);
            let w = relative_density(graph, &step.state, energy_config, h_ref) * t;
            cache[idx] = Some(w);
            w
        };
        set.candidates.push(Candidate {
            state: step.state.clone(),
            c: idx + 1,
            weight,
        });
    }
    (set, path)
}

/// Forward proposal set: one walk from `current` toward `target`, `m`
/// uniform draws along it.
#[allow(clippy::too_many_arguments)]
pub fn generate_proposals<R: Rng + ?Sized>(
    graph: &SpatialGraph,
    current: &Partition,
    target: &Partition,
    settings: &PrcrxSettings,
    config: &ConstraintConfig,
    energy_config: &EnergyConfig,
    rng: &mut R,
) -> ProposalSet {
    let h_ref = if energy_config.is_uniform() {
        0.0
    } else {
        energy(graph, current, energy_config)
    };
    proposals_along(
        graph,
        current,
        target,
        current,
        settings.m,
        settings,
        config,
        energy_config,
        h_ref,
        rng,
    )
    .0
}

/// Generalised Metropolis-Hastings acceptance probability for one
/// Multiple-Try step.
pub fn mtm_ratio(forward: &ProposalSet, reverse: &ProposalSet, current_weight: f64) -> f64 {
    let numerator = forward.total_weight();
    if numerator.is_nan() || numerator <= 0.0 {
        return 0.0;
    }
    let denominator = current_weight + reverse.total_weight();
    if denominator.is_nan() || denominator <= 0.0 {
        debug!("reverse weights vanish with positive forward weight; rejecting");
        return 0.0;
    }
    (numerator / denominator).min(1.0)
}

/// Why a crossover step ended where it did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrcrxOutcome {
    Accepted,
    Rejected,
    /// Target equals the current state.
    NothingToRelink,
    /// No group could move from the current state.
    DeadEnd,
    /// Every forward candidate was infeasible.
    NoFeasibleCandidate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrcrxStep {
    pub next: Partition,
    pub accepted: bool,
    pub outcome: PrcrxOutcome,
}

/// Relabels `target`'s zones to agree with `current` as much as possible
/// (greedy on overlap counts). The grouping is unchanged.
pub fn align_labels(current: &Partition, target: &Partition) -> Partition {
    let k = current.k() as usize;
    let mut overlap = vec![vec![0usize; k]; k];
    for (&a, &b) in current.labels().iter().zip(target.labels()) {
        overlap[b as usize - 1][a as usize - 1] += 1;
    }
    let mut pairs: Vec<(usize, usize, usize)> = Vec::with_capacity(k * k);
    for (b, row) in overlap.iter().enumerate() {
        for (a, &count) in row.iter().enumerate() {
            pairs.push((count, b, a));
        }
    }
    // most overlap first; ties by target zone then current zone
    pairs.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut map = vec![0u32; k];
    let mut used = vec![false; k];
    for (_, b, a) in pairs {
        if map[b] == 0 && !used[a] {
            map[b] = a as u32 + 1;
            used[a] = true;
        }
    }
    let labels = target
        .labels()
        .iter()
        .map(|&b| map[b as usize - 1])
        .collect();
    Partition::from_raw(labels, current.k())
}

/// One crossover transition of `current` toward `target`.
pub fn step_prcrx<R: Rng + ?Sized>(
    graph: &SpatialGraph,
    current: &Partition,
    target: &Partition,
    settings: &PrcrxSettings,
    config: &ConstraintConfig,
    energy_config: &EnergyConfig,
    rng: &mut R,
) -> PrcrxStep {
    let stay = |outcome| PrcrxStep {
        next: current.clone(),
        accepted: false,
        outcome,
    };
    let target = align_labels(current, target);
    if target.labels() == current.labels() {
        return stay(PrcrxOutcome::NothingToRelink);
    }
    let h_ref = if energy_config.is_uniform() {
        0.0
    } else {
        energy(graph, current, energy_config)
    };
    let (mut forward, path) = proposals_along(
        graph,
        current,
        &target,
        current,
        settings.m,
        settings,
        config,
        energy_config,
        h_ref,
        rng,
    );
    if path.steps.is_empty() {
        debug!("crossover walk dead-ended at the current state");
        return stay(PrcrxOutcome::DeadEnd);
    }
    let Some(chosen) = forward.choose(rng).cloned() else {
        return stay(PrcrxOutcome::NoFeasibleCandidate);
    };
    let y = chosen.state;
    let (reverse, _) = proposals_along(
        graph,
        &y,
        current,
        &y,
        settings.m.saturating_sub(1),
        settings,
        config,
        energy_config,
        h_ref,
        rng,
    );
    let current_weight = relink_transition(graph, current, &y, config, settings.semantics, rng);
    let ratio = mtm_ratio(&forward, &reverse, current_weight);
    if ratio >= 1.0 || rng.gen::<f64>() < ratio {
        PrcrxStep {
            next: y,
            accepted: true,
            outcome: PrcrxOutcome::Accepted,
        }
    } else {
        stay(PrcrxOutcome::Rejected)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{is_feasible, BalanceMode};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn part(labels: &[u32], k: u32) -> Partition {
        Partition::new(labels.to_vec(), k).unwrap()
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn identical_partitions_have_zero_distance() {
        let g = SpatialGraph::grid(3, 3).unwrap();
        let x = part(&[1, 1, 2, 1, 2, 2, 3, 3, 3], 3);
        let d = overlap_decompose(&g, &x, &x);
        assert_eq!((d.movable_count(), d.distance()), (0, 0));
        assert_eq!(d.groups.len(), 3);
        assert_eq!(seed_groups(&d, 3), vec![0, 1, 2]);
    }

    #[test]
    fn path_of_four_decomposition() {
        let g = SpatialGraph::grid(1, 4).unwrap();
        let d = overlap_decompose(&g, &part(&[1, 1, 2, 2], 2), &part(&[1, 2, 2, 2], 2));
        let view: Vec<(Vec<usize>, u32, u32)> = d
            .groups
            .iter()
            .map(|g| (g.units.clone(), g.source_zone, g.target_zone))
            .collect();
        assert_eq!(
            view,
            vec![(vec![0], 1, 1), (vec![1], 1, 2), (vec![2, 3], 2, 2)]
        );
        assert_eq!((d.movable_count(), d.distance()), (1, 1));
        let seeds = seed_groups(&d, 2);
        assert_eq!(seeds, vec![0, 2]);
    }

    #[test]
    fn fallback_seeds() {
        let g = SpatialGraph::grid(1, 3).unwrap();
        let d = overlap_decompose(&g, &part(&[1, 1, 2], 2), &part(&[2, 2, 1], 2));
        // no group keeps its label: {0,1} heads to 2, {2} heads to 1
        assert_eq!(seed_groups(&d, 2), vec![1, 0]);
    }

    #[test]
    fn four_zone_overlay_uses_at_most_sixteen_label_pairs() {
        let g = SpatialGraph::grid(4, 4).unwrap();
        let a = part(&[1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4], 4);
        let b = part(&[1, 2, 2, 2, 1, 1, 2, 4, 1, 3, 3, 4, 3, 3, 4, 4], 4);
        let d = overlap_decompose(&g, &a, &b);
        let mut pairs: Vec<(u32, u32)> = d
            .groups
            .iter()
            .map(|g| (g.source_zone, g.target_zone))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        assert!(pairs.len() <= 16);
        let covered: usize = d.groups.iter().map(|g| g.units.len()).sum();
        assert_eq!(covered, 16);
    }

    #[test]
    fn single_group_walk() {
        let g = SpatialGraph::grid(1, 4).unwrap();
        let x = part(&[1, 1, 2, 2], 2);
        let z = part(&[1, 2, 2, 2], 2);
        let path = walk_path(&g, &x, &z, &ConstraintConfig::unbalanced(2), &mut rng(1));
        assert_eq!(path.steps.len(), 1);
        assert_eq!(path.steps[0].state, z);
        assert!(path.steps[0].feasible);
        let strict = ConstraintConfig::new(2, 0.1, BalanceMode::RangeOverSum).unwrap();
        let path = walk_path(&g, &x, &z, &strict, &mut rng(1));
        assert!(!path.steps[0].feasible);
    }

    #[test]
    fn blocked_walk_is_empty() {
        // swapping the two zones of a path needs an intermediate empty zone
        let g = SpatialGraph::grid(1, 3).unwrap();
        let x = part(&[1, 1, 2], 2);
        let z = part(&[2, 2, 1], 2);
        let path = walk_path(&g, &x, &z, &ConstraintConfig::unbalanced(2), &mut rng(3));
        assert!(path.steps.is_empty());
    }

    #[test]
    fn transition_examples() {
        let p = TransitionSemantics::Probability;
        let pc = TransitionSemantics::FallingFactorial;
        let free5 = [5, 4, 3, 2, 1];
        assert_eq!(transition_prob(2, &free5, 5, pc).unwrap(), 20.0);
        assert_abs_diff_eq!(transition_prob(2, &free5, 5, p).unwrap(), 1.0 / 20.0);
        let free3 = [3, 2, 1];
        assert_eq!(transition_prob(3, &free3, 3, pc).unwrap(), 6.0);
        assert_abs_diff_eq!(transition_prob(3, &free3, 3, p).unwrap(), 1.0 / 6.0);
        assert_abs_diff_eq!(transition_prob(2, &[3, 1], 3, p).unwrap(), 1.0 / 3.0);
        assert_eq!(
            transition_prob(3, &[3, 1], 3, p),
            Err(PrcrxError::StepOutOfRange { c: 3, len: 2 })
        );
        assert!(transition_prob(0, &[3, 1], 3, p).is_err());
    }

    #[test]
    fn ratio_examples() {
        let set = |ws: &[f64]| ProposalSet {
            candidates: ws
                .iter()
                .map(|&w| Candidate {
                    state: part(&[1, 2], 2),
                    c: 1,
                    weight: w,
                })
                .collect(),
            chosen_index: None,
        };
        assert_eq!(mtm_ratio(&set(&[1.0, 1.0]), &set(&[1.0]), 1.0), 1.0);
        assert_eq!(mtm_ratio(&set(&[0.0, 0.0]), &set(&[1.0]), 1.0), 0.0);
        assert_eq!(mtm_ratio(&set(&[1.0]), &set(&[0.0]), 0.0), 0.0);
        assert_abs_diff_eq!(mtm_ratio(&set(&[0.5]), &set(&[0.5]), 1.0), 1.0 / 3.0);
    }

    #[test]
    fn single_step_proposals_on_path_of_four() {
        // one movable group: every candidate is the target; the walk back is
        // one forced step, so each weight is pi * 1 = 1 under uniform energy
        let g = SpatialGraph::grid(1, 4).unwrap();
        let x = part(&[1, 1, 2, 2], 2);
        let z = part(&[1, 2, 2, 2], 2);
        let settings = PrcrxSettings {
            m: 2,
            semantics: TransitionSemantics::Probability,
        };
        let open = ConstraintConfig::unbalanced(2);
        let set = generate_proposals(
            &g,
            &x,
            &z,
            &settings,
            &open,
            &EnergyConfig::Uniform,
            &mut rng(5),
        );
        assert_eq!(set.candidates.len(), 2);
        for c in &set.candidates {
            assert_eq!((&c.state, c.c, c.weight), (&z, 1, 1.0));
        }
        // reverse: walking z back to x is again one group, m - 1 = 1
        // candidate of weight 1, and x's own weight T(x -> z) = 1
        let step = step_prcrx(
            &g,
            &x,
            &z,
            &settings,
            &open,
            &EnergyConfig::Uniform,
            &mut rng(5),
        );
        assert!(step.accepted);
        assert_eq!(step.next, z);

        let m3 = PrcrxSettings { m: 3, ..settings };
        let set = generate_proposals(&g, &x, &z, &m3, &open, &EnergyConfig::Uniform, &mut rng(9));
        assert_eq!(set.total_weight(), 3.0);
    }

    #[test]
    fn infeasible_candidates_force_rejection() {
        let g = SpatialGraph::grid(1, 4).unwrap();
        let x = part(&[1, 1, 2, 2], 2);
        let z = part(&[1, 2, 2, 2], 2);
        let tight = ConstraintConfig::new(2, 0.1, BalanceMode::RangeOverSum).unwrap();
        let settings = PrcrxSettings::default();
        let set = generate_proposals(
            &g,
            &x,
            &z,
            &settings,
            &tight,
            &EnergyConfig::Uniform,
            &mut rng(2),
        );
        assert_eq!(set.total_weight(), 0.0);
        let step = step_prcrx(
            &g,
            &x,
            &z,
            &settings,
            &tight,
            &EnergyConfig::Uniform,
            &mut rng(2),
        );
        assert_eq!(
            (step.accepted, step.outcome),
            (false, PrcrxOutcome::NoFeasibleCandidate)
        );
    }

    #[test]
    fn same_state_is_no_move() {
        let g = SpatialGraph::grid(2, 2).unwrap();
        let x = part(&[1, 1, 2, 2], 2);
        let relabeled = part(&[2, 2, 1, 1], 2);
        let step = step_prcrx(
            &g,
            &x,
            &relabeled,
            &PrcrxSettings::default(),
            &ConstraintConfig::unbalanced(2),
            &EnergyConfig::Uniform,
            &mut rng(0),
        );
        assert_eq!(step.outcome, PrcrxOutcome::NothingToRelink);
        assert_eq!(step.next, x);
    }

    #[test]
    fn alignment_keeps_grouping() {
        let x = part(&[1, 1, 2, 2, 3, 3], 3);
        let z = part(&[3, 3, 1, 2, 2, 2], 3);
        let aligned = align_labels(&x, &z);
        assert_eq!(aligned.labels(), &[1, 1, 2, 3, 3, 3]);
        assert_eq!(aligned.canonical_id(), z.canonical_id());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn walks_stay_contiguous_and_reach_target(seed in any::<u64>()) {
            let g = SpatialGraph::grid(4, 4).unwrap();
            let open = ConstraintConfig::unbalanced(3);
            let balanced = ConstraintConfig::new(3, 0.3, BalanceMode::RangeOverSum).unwrap();
            let mut r = rng(seed);
            // two random contiguous 3-zone states from ecmut walks
            let mut a = part(&[1, 1, 2, 2, 1, 1, 2, 2, 1, 3, 3, 2, 3, 3, 3, 3], 3);
            let mut b = a.clone();
            for _ in 0..40 {
                a = crate::ecmut::step_ecmut(&g, &a, 1, &open, &EnergyConfig::Uniform, &mut r).0;
                b = crate::ecmut::step_ecmut(&g, &b, 1, &open, &EnergyConfig::Uniform, &mut r).0;
            }
            let d = overlap_decompose(&g, &a, &b);
            prop_assert_eq!(d.distance() == 0, a == b);
            for cfg in [&open, &balanced] {
                let path = walk_path(&g, &a, &b, cfg, &mut r);
                for step in &path.steps {
                    prop_assert!(is_feasible(&g, &step.state, &open));
                    prop_assert_eq!(step.feasible, is_feasible(&g, &step.state, cfg));
                }
                if path.is_complete() {
                    let end = path.steps.last().map(|s| s.state.clone()).unwrap_or(a.clone());
                    prop_assert_eq!(end, b.clone());
                }
            }
        }

        #[test]
        fn weights_vanish_only_on_infeasible(seed in any::<u64>()) {
            let g = SpatialGraph::grid(3, 4).unwrap();
            let cfg = ConstraintConfig::new(2, 0.2, BalanceMode::RangeOverSum).unwrap();
            let x = part(&[1, 1, 2, 2, 1, 1, 2, 2, 1, 1, 2, 2], 2);
            let z = part(&[1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2], 2);
            let mut r = rng(seed);
            let set = generate_proposals(&g, &x, &z, &PrcrxSettings::default(), &cfg, &EnergyConfig::Uniform, &mut r);
            for c in &set.candidates {
                prop_assert_eq!(c.weight == 0.0, !is_feasible(&g, &c.state, &cfg));
            }
            let step = step_prcrx(&g, &x, &z, &PrcrxSettings::default(), &cfg, &EnergyConfig::Uniform, &mut r);
            prop_assert!(is_feasible(&g, &step.next, &cfg));
        }
    }
}
