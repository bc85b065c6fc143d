//! Agreement of optimal actions between a learned and a generating model.
//!
//! For each configuration label `C`, `Act(C)` is the set of inputs whose
//! expected reward at `C` is within a tolerance of the best. The score is
//! `Σ_C P^max(◇C) · |Act_learned(C) ∩ Act_generating(C)| / |Act_learned(C)|`,
//! with `P^max` taken in the generating model and actions matched by name.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{expected_reward_values, reach_values, reward_q_values, LabelPredicate, Opt, RewardQuery};
use crate::error::Result;
use crate::model::{Lmdp, StateId};

#[derive(Debug, Clone)]
pub struct AccuracyOptions {
    pub stop: LabelPredicate,
    /// Treat states without enabled inputs as the end of the game.
    pub deadlocks_terminal: bool,
    pub tie_tolerance: f64,
}

impl Default for AccuracyOptions {
    fn default() -> Self {
        AccuracyOptions {
            stop: LabelPredicate::labels(["stop"]),
            deadlocks_terminal: true,
            tie_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigAccuracy {
    pub config: String,
    pub weight: f64,
    pub learned: Vec<String>,
    pub generating: Vec<String>,
    pub overlap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub accuracy: f64,
    /// `Σ_C P^max(◇C)`, the score of a perfect model.
    pub total_weight: f64,
    pub configs: Vec<ConfigAccuracy>,
    pub diagnostics: Vec<String>,
}

/// Optimal input names at the states labeled `config`.
///
/// When several states share the label, their Q-values are averaged with
/// weights `P^max(◇q)` from the initial state.
fn optimal_actions(
    m: &Lmdp,
    values: &[f64],
    config: &str,
    tol: f64,
) -> std::result::Result<Vec<String>, String> {
    let states = m.states_labeled(config);
    if states.is_empty() {
        return Err("label absent".into());
    }
    let weights: Vec<f64> = if states.len() == 1 {
        vec![1.0]
    } else {
        let w: Vec<f64> = states.iter().map(|&q| reach_state(m, q)).collect();
        if w.iter().sum::<f64>() > 0.0 {
            w
        } else {
            vec![1.0; states.len()]
        }
    };
    let mut common: Option<BTreeSet<usize>> = None;
    let mut per_state: Vec<(f64, Vec<(usize, f64)>)> = Vec::new();
    for (&q, &w) in states.iter().zip(&weights) {
        let qs = reward_q_values(m, values, q);
        let ins: BTreeSet<usize> = qs.iter().map(|&(a, _)| a).collect();
        common = Some(match common {
            None => ins,
            Some(c) => c.intersection(&ins).copied().collect(),
        });
        if w > 0.0 {
            per_state.push((w, qs));
        }
    }
    let common = common.unwrap_or_default();
    let total: f64 = per_state.iter().map(|(w, _)| w).sum();
    let scored: Vec<(usize, f64)> = common
        .iter()
        .map(|&a| {
            let v: f64 = per_state
                .iter()
                .map(|(w, qs)| w * qs.iter().find(|&&(b, _)| b == a).map_or(f64::NAN, |&(_, v)| v))
                .sum();
            (a, v / total)
        })
        .filter(|(_, v)| v.is_finite())
        .collect();
    let best = scored.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return Err("no input with a defined expected reward".into());
    }
    Ok(scored
        .into_iter()
        .filter(|&(_, v)| v >= best - tol)
        .map(|(a, _)| m.inputs().symbol(a).to_string())
        .collect())
}

fn reach_state(m: &Lmdp, q: StateId) -> f64 {
    let mut target = vec![false; m.num_states()];
    target[q] = true;
    reach_values(m, &target, Opt::Max, None).value_at_initial
}

/// Optimal-action accuracy of `learned` against `generating` over `configs`.
///
/// Both models need state rewards. A configuration missing from the learned
/// model, or without a well-defined optimal action there, contributes 0 and
/// is listed in the diagnostics.
pub fn optimal_action_accuracy(
    learned: &Lmdp,
    generating: &Lmdp,
    configs: &[String],
    opts: &AccuracyOptions,
) -> Result<AccuracyReport> {
    let rq = RewardQuery {
        stop: opts.stop.clone(),
        deadlocks_terminal: opts.deadlocks_terminal,
    };
    let vl = expected_reward_values(learned, &rq)?.values;
    let vg = expected_reward_values(generating, &rq)?.values;

    let rows: Vec<(ConfigAccuracy, Vec<String>)> = configs
        .par_iter()
        .map(|c| {
            let mut notes = Vec::new();
            let target: Vec<bool> = (0..generating.num_states())
                .map(|q| generating.label_str(q) == c)
                .collect();
            let weight = if target.iter().any(|&t| t) {
                reach_values(generating, &target, Opt::Max, None).value_at_initial
            } else {
                0.0
            };
            let generating_set = optimal_actions(generating, &vg, c, opts.tie_tolerance)
                .unwrap_or_else(|why| {
                    notes.push(format!("{c}: generating model: {why}"));
                    Vec::new()
                });
            let learned_set = optimal_actions(learned, &vl, c, opts.tie_tolerance)
                .unwrap_or_else(|why| {
                    notes.push(format!("{c}: learned model: {why}"));
                    Vec::new()
                });
            let overlap = learned_set.iter().filter(|a| generating_set.contains(a)).count();
            let row = ConfigAccuracy {
                config: c.clone(),
                weight,
                learned: learned_set,
                generating: generating_set,
                overlap,
            };
            (row, notes)
        })
        .collect();

    let mut accuracy = 0.0;
    let mut total_weight = 0.0;
    let mut configs_out = Vec::with_capacity(rows.len());
    let mut diagnostics = Vec::new();
    for (row, notes) in rows {
        total_weight += row.weight;
        if !row.learned.is_empty() {
            accuracy += row.weight * row.overlap as f64 / row.learned.len() as f64;
        }
        diagnostics.extend(notes);
        configs_out.push(row);
    }
    Ok(AccuracyReport {
        accuracy,
        total_weight,
        configs: configs_out,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::mdp;
    use super::*;
    use crate::model::{Alphabet, StateRecord, Successor};

    /// Start → `c` with probability `pc`; at `c` each of four inputs leads to
    /// a prize state paying `prizes[i]`, then to stop.
    fn game(pc: f64, prizes: [f64; 4]) -> Lmdp {
        let outputs = Alphabet::outputs(["s", "c", "x", "p0", "p1", "p2", "p3", "stop"]).unwrap();
        let labels = ["s", "c", "x", "p0", "p1", "p2", "p3", "stop"];
        let states = labels
            .iter()
            .enumerate()
            .map(|(i, l)| StateRecord {
                id: i as u64,
                label: outputs.index_of(l).unwrap(),
                reward: (3..7).contains(&i).then(|| prizes[i - 3]),
            })
            .collect();
        let inputs = Alphabet::new(["w", "x", "y", "z"]).unwrap();
        let mut m = Lmdp::new(inputs, outputs, 0, states).unwrap();
        m.add_successor(0, 0, Successor::new(1, pc)).unwrap();
        m.add_successor(0, 0, Successor::new(2, 1.0 - pc)).unwrap();
        m.add_successor(2, 0, Successor::new(7, 1.0)).unwrap();
        for a in 0..4 {
            m.add_successor(1, a, Successor::new(3 + a, 1.0)).unwrap();
            m.add_successor(3 + a, 0, Successor::new(7, 1.0)).unwrap();
        }
        m.add_successor(7, 0, Successor::new(7, 1.0)).unwrap();
        assert!(m.validate().is_empty());
        m
    }

    #[test]
    fn identical_models_score_total_weight() {
        let g = game(0.4, [1.0, 5.0, 2.0, 0.0]);
        let r = optimal_action_accuracy(&g, &g, &["c".to_string()], &AccuracyOptions::default()).unwrap();
        assert!((r.accuracy - 0.4).abs() < 1e-12);
        assert_eq!(r.total_weight, r.accuracy);
        assert_eq!(r.configs[0].generating, vec!["x"]);
        assert!(r.diagnostics.is_empty());
    }

    #[test]
    fn all_tied_learner_scores_a_quarter() {
        let g = game(0.4, [1.0, 5.0, 2.0, 0.0]);
        let l = game(0.7, [3.0; 4]);
        let r = optimal_action_accuracy(&l, &g, &["c".to_string()], &AccuracyOptions::default()).unwrap();
        assert_eq!(r.configs[0].learned.len(), 4);
        assert!((r.accuracy - 0.25 * 0.4).abs() < 1e-12);
    }

    #[test]
    fn missing_label_is_reported() {
        let g = game(0.4, [1.0, 5.0, 2.0, 0.0]);
        let l = mdp(&["s", "stop"], &[(0, 0, 1, 1.0), (1, 0, 1, 1.0)]);
        let r = optimal_action_accuracy(&l, &g, &["c".to_string()], &AccuracyOptions::default()).unwrap();
        assert_eq!(r.accuracy, 0.0);
        assert_eq!(r.diagnostics.len(), 1);
        assert!(r.diagnostics[0].contains("learned"));
    }
}
