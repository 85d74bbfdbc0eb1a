//! Ejection-chain mutation: `p` successive single-unit boundary moves, each
//! drawn uniformly from the moves that keep the partition feasible, accepted
//! with the exact asymmetric Metropolis-Hastings ratio.
//!
//! A move is a `(unit, target zone)` pair, so a unit touching two foreign
//! zones contributes two moves. With `M_s` feasible moves at state `s`, a
//! single-move proposal has probability `1 / M_x` and its reversal
//! `1 / M_y`, giving the ratio `(M_x / M_y) exp(-(H(y) - H(x)))`.
//!
//! For `p > 1` the proposal is the realised move sequence; acceptance
//! compares its probability with that of the reversed sequence replayed
//! from the result.

use rand::Rng;

use crate::constraints::{soft_constraints_hold, ConstraintConfig};
use crate::energy::{energy, EnergyConfig};
use crate::graph::{Move, SpatialGraph};
use crate::partition::Partition;

/// One applied reassignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnitMove {
    pub unit: usize,
    pub from: u32,
    pub to: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MutationProposal {
    pub moves: Vec<UnitMove>,
    pub result: Partition,
    /// `sum -ln M` over the forward intermediates.
    pub forward_log_prob: f64,
    /// `sum -ln M` over the replayed reversal.
    pub reverse_log_prob: f64,
}

/// Boundary moves whose application leaves the partition feasible. The
/// length of the result is `M` for this state.
///
/// `partition` must already be feasible under `config`.
pub fn feasible_moves(
    graph: &SpatialGraph,
    partition: &Partition,
    config: &ConstraintConfig,
) -> Vec<Move> {
    let labels = partition.labels();
    let sizes = partition.zone_sizes();
    let soft = config.balance_active() || !config.extra.is_empty();
    let mut scratch = labels.to_vec();
    let mut targets: Vec<u32> = Vec::with_capacity(4);
    let mut out = Vec::new();
    for u in 0..graph.n() {
        let from = labels[u];
        targets.clear();
        targets.extend(
            graph
                .neighbors(u)
                .iter()
                .map(|&v| labels[v])
                .filter(|&z| z != from),
        );
        if targets.is_empty() || sizes[from as usize - 1] == 1 {
            continue;
        }
        targets.sort_unstable();
        targets.dedup();
        if !graph.zone_connected_without(labels, from, &|v| v == u) {
            continue;
        }
        for &to in &targets {
            if soft {
                scratch[u] = to;
                let ok = soft_constraints_hold(graph, &scratch, config);
                scratch[u] = from;
                if !ok {
                    continue;
                }
            }
            out.push(Move { unit: u, to });
        }
    }
    out
}

/// Draws `p` successive uniform feasible moves. `None` when some
/// intermediate state has no feasible move.
pub fn propose_ecmut<R: Rng + ?Sized>(
    graph: &SpatialGraph,
    state: &Partition,
    p: usize,
    config: &ConstraintConfig,
    rng: &mut R,
) -> Option<MutationProposal> {
    assert!(p >= 1, "ecmut needs at least one move");
    let mut current = state.clone();
    let mut moves = Vec::with_capacity(p);
    let mut forward_log_prob = 0.0;
    for _ in 0..p {
        let options = feasible_moves(graph, &current, config);
        if options.is_empty() {
            return None;
        }
        let m = options[rng.gen_range(0..options.len())];
        forward_log_prob -= (options.len() as f64).ln();
        moves.push(UnitMove {
            unit: m.unit,
            from: current.zone_of(m.unit),
            to: m.to,
        });
        current = Partition::from_raw(current.with_move(m.unit, m.to), current.k());
    }
    let result = current.clone();
    let mut reverse_log_prob = 0.0;
    for mv in moves.iter().rev() {
        let options = feasible_moves(graph, &current, config);
        debug_assert!(options.contains(&Move {
            unit: mv.unit,
            to: mv.from
        }));
        reverse_log_prob -= (options.len() as f64).ln();
        current = Partition::from_raw(current.with_move(mv.unit, mv.from), current.k());
    }
    debug_assert_eq!(&current, state);
    Some(MutationProposal {
        moves,
        result,
        forward_log_prob,
        reverse_log_prob,
    })
}

/// `exp(reverse - forward) * exp(-(H(y) - H(x)))`; for one move this is
/// `(M_x / M_y) exp(-(H(y) - H(x)))`.
pub fn mh_ratio_ecmut(
    x_energy: f64,
    y_energy: f64,
    forward_log_prob: f64,
    reverse_log_prob: f64,
) -> f64 {
    (reverse_log_prob - forward_log_prob - (y_energy - x_energy)).exp()
}

/// One Metropolis-Hastings step. A missing proposal counts as a rejection.
pub fn step_ecmut<R: Rng + ?Sized>(
    graph: &SpatialGraph,
    state: &Partition,
    p: usize,
    config: &ConstraintConfig,
    energy_config: &EnergyConfig,
    rng: &mut R,
) -> (Partition, bool) {
    let Some(proposal) = propose_ecmut(graph, state, p, config, rng) else {
        return (state.clone(), false);
    };
    let (hx, hy) = if energy_config.is_uniform() {
        (0.0, 0.0)
    } else {
        (
            energy(graph, state, energy_config),
            energy(graph, &proposal.result, energy_config),
        )
    };
    let ratio = mh_ratio_ecmut(hx, hy, proposal.forward_log_prob, proposal.reverse_log_prob);
    if ratio >= 1.0 || rng.gen::<f64>() < ratio {
        (proposal.result, true)
    } else {
        (state.clone(), false)
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

    #[test]
    fn feasible_move_examples() {
        let path = SpatialGraph::grid(1, 3).unwrap();
        let open = ConstraintConfig::unbalanced(2);
        assert_eq!(
            feasible_moves(&path, &part(&[1, 1, 2], 2), &open),
            vec![Move { unit: 1, to: 2 }]
        );
        let square = SpatialGraph::grid(2, 2).unwrap();
        assert_eq!(
            feasible_moves(&square, &part(&[1, 1, 2, 2], 2), &open).len(),
            4
        );
        assert!(feasible_moves(
            &path,
            &part(&[1, 1, 1], 1),
            &ConstraintConfig::unbalanced(1)
        )
        .is_empty());
    }

    #[test]
    fn single_move_probabilities() {
        let square = SpatialGraph::grid(2, 2).unwrap();
        let open = ConstraintConfig::unbalanced(2);
        let x = part(&[1, 1, 2, 2], 2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let prop = propose_ecmut(&square, &x, 1, &open, &mut rng).unwrap();
            assert_abs_diff_eq!(prop.forward_log_prob, -(4f64).ln());
            let my = feasible_moves(&square, &prop.result, &open).len();
            // every 3+1 split of the 4-cycle: the singleton cannot move, and
            // each of the two units next to it can join it
            assert_eq!(my, 2);
            assert_abs_diff_eq!(prop.reverse_log_prob, -(my as f64).ln());
        }
    }

    #[test]
    fn forced_double_move_returns_home() {
        let path = SpatialGraph::grid(1, 3).unwrap();
        let open = ConstraintConfig::unbalanced(2);
        let x = part(&[1, 1, 2], 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let prop = propose_ecmut(&path, &x, 2, &open, &mut rng).unwrap();
        assert_eq!(
            prop.moves[0],
            UnitMove {
                unit: 1,
                from: 1,
                to: 2
            }
        );
        assert_eq!(prop.result, x);
        assert_abs_diff_eq!(prop.forward_log_prob, 0.0);
        assert_abs_diff_eq!(prop.reverse_log_prob, 0.0);
    }

    #[test]
    fn no_move_state() {
        let path = SpatialGraph::grid(1, 2).unwrap();
        let open = ConstraintConfig::unbalanced(2);
        let x = part(&[1, 2], 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(propose_ecmut(&path, &x, 1, &open, &mut rng).is_none());
        let (next, accepted) = step_ecmut(&path, &x, 1, &open, &EnergyConfig::Uniform, &mut rng);
        assert_eq!((next, accepted), (x, false));
    }

    #[test]
    fn ratio_examples() {
        let ln = |m: f64| -m.ln();
        assert_abs_diff_eq!(mh_ratio_ecmut(0.0, 0.0, ln(3.0), ln(3.0)), 1.0);
        assert_abs_diff_eq!(
            mh_ratio_ecmut(0.0, 0.0, ln(4.0), ln(2.0)),
            2.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            mh_ratio_ecmut(0.0, 0.0, ln(1.0), ln(3.0)),
            1.0 / 3.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(mh_ratio_ecmut(1.0, 2.0, 0.0, 0.0), (-1f64).exp());
    }

    #[test]
    fn symmetric_state_always_accepts() {
        // 1x4 path [1,1,2,2]: M_x = 2; both results [1,2,2,2] and [1,1,1,2] have M_y = 1, so r = 2
        let g = SpatialGraph::grid(1, 4).unwrap();
        let open = ConstraintConfig::unbalanced(2);
        let x = part(&[1, 1, 2, 2], 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (_, accepted) = step_ecmut(&g, &x, 1, &open, &EnergyConfig::Uniform, &mut rng);
            assert!(accepted);
        }
    }

    #[test]
    fn two_state_chain_is_uniform() {
        let path = SpatialGraph::grid(1, 3).unwrap();
        let open = ConstraintConfig::unbalanced(2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut state = part(&[1, 1, 2], 2);
        let a = state.canonical_id();
        let steps = 20_000;
        let mut hits = 0usize;
        for _ in 0..steps {
            state = step_ecmut(&path, &state, 1, &open, &EnergyConfig::Uniform, &mut rng).0;
            if state.canonical_id() == a {
                hits += 1;
            }
        }
        let freq = hits as f64 / steps as f64;
        let sigma = (0.25 / steps as f64).sqrt();
        assert!((freq - 0.5).abs() < 3.0 * sigma, "freq {freq}");
    }

    #[test]
    fn balance_limits_moves() {
        let g = SpatialGraph::grid(2, 2).unwrap();
        // 1+3 splits score 0.5 and are excluded
        let cfg = ConstraintConfig::new(2, 0.1, BalanceMode::RangeOverSum).unwrap();
        assert!(feasible_moves(&g, &part(&[1, 1, 2, 2], 2), &cfg).is_empty());
    }

    proptest! {
        #[test]
        fn moves_match_full_feasibility(seed in any::<u64>(), eps in prop_oneof![Just(f64::INFINITY), 0.05f64..0.6]) {
            let g = SpatialGraph::grid(3, 4).unwrap();
            let cfg = ConstraintConfig::new(3, eps, BalanceMode::RangeOverSum).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // random walk through contiguous states, checking the mutable-move
            // filter against full feasibility of each boundary move
            let mut state = part(&[1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 3, 3], 3);
            let open = ConstraintConfig::unbalanced(3);
            for _ in 0..10 {
                let fast = feasible_moves(&g, &state, &cfg);
                if is_feasible(&g, &state, &cfg) {
                    let slow: Vec<Move> = g
                        .boundary_moves(&state)
                        .into_iter()
                        .filter(|m| {
                            Partition::new(state.with_move(m.unit, m.to), 3)
                                .map(|y| is_feasible(&g, &y, &cfg))
                                .unwrap_or(false)
                        })
                        .collect();
                    prop_assert_eq!(&fast, &slow);
                }
                state = step_ecmut(&g, &state, 1, &open, &EnergyConfig::Uniform, &mut rng).0;
            }
        }

        #[test]
        fn reversal_replays_to_source(seed in any::<u64>(), p in 1usize..5) {
            let g = SpatialGraph::grid(4, 4).unwrap();
            let cfg = ConstraintConfig::unbalanced(3);
            let x = part(&[1, 1, 2, 2, 1, 1, 2, 2, 1, 3, 3, 2, 3, 3, 3, 3], 3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            if let Some(prop) = propose_ecmut(&g, &x, p, &cfg, &mut rng) {
                let mut s = prop.result.clone();
                for mv in prop.moves.iter().rev() {
                    s = Partition::new(s.with_move(mv.unit, mv.from), 3).unwrap();
                    prop_assert!(is_feasible(&g, &s, &cfg));
                }
                prop_assert_eq!(&s, &x);
                if p == 1 {
                    let mx = feasible_moves(&g, &x, &cfg).len() as f64;
                    prop_assert!((prop.forward_log_prob + mx.ln()).abs() < 1e-12);
                }
            }
        }
    }
}
