//! State-merging learner for deterministic labeled MDPs.
//!
//! Two copies of the prefix tree are kept: a frozen one answering every
//! compatibility question, and a working one that absorbs merges. Nodes are
//! processed in the red/blue scheme: red nodes become states of the output
//! model, blue nodes are their not-yet-red children. The shortlex-least blue
//! node is merged into the first compatible red node, or promoted to red when
//! none is compatible.

mod compat;
mod merge;
mod score;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpta::{Iofpta, NodeId};
use crate::model::{Alphabet, Lmdp, StateRecord, Successor};
use crate::tracegen::Dataset;

pub use compat::{compatible, hoeffding, hoeffding_bound};
pub use merge::merge;
pub use score::{bic, golden_section_search, log_likelihood, Probe, SearchConfig, SearchResult};

/// Significance parameter of the compatibility test, in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Epsilon(f64);

impl Epsilon {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value <= 1.0 {
            Ok(Epsilon(value))
        } else {
            Err(Error::InvalidEpsilon(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `√(½ ln(2/ε))`.
    pub fn confidence_factor(self) -> f64 {
        (0.5 * (2.0 / self.0).ln()).sqrt()
    }
}

impl TryFrom<f64> for Epsilon {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Epsilon::new(v)
    }
}

impl From<Epsilon> for f64 {
    fn from(e: Epsilon) -> f64 {
        e.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnOptions {
    /// Disable inputs whose observations at a state are all `err` instead of
    /// keeping a probability-one err loop.
    pub drop_pure_err: bool,
}

impl Default for LearnOptions {
    fn default() -> Self {
        LearnOptions {
            drop_pure_err: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LearnResult {
    pub model: Lmdp,
    pub epsilon: Epsilon,
    pub bic: f64,
    pub red_count: usize,
    pub merge_count: usize,
}

/// Learns a deterministic model from `d` with significance `eps`.
pub fn ioalergia(d: &Dataset, eps: Epsilon) -> Result<LearnResult> {
    let t = Iofpta::build(d)?;
    ioalergia_on(&t, d, eps, LearnOptions::default())
}

/// [`ioalergia`] on an already built tree of `d`.
pub fn ioalergia_on(t: &Iofpta, d: &Dataset, eps: Epsilon, opts: LearnOptions) -> Result<LearnResult> {
    let (a, red, merge_count) = red_blue(t, eps)?;
    let model = normalize(&a, &red, &d.inputs, &d.outputs, opts)?;
    let bic = bic(&model, d)?;
    Ok(LearnResult {
        model,
        epsilon: eps,
        bic,
        red_count: red.len(),
        merge_count,
    })
}

/// Runs the red/blue loop; returns the merged tree, the sorted red nodes and
/// the number of merges.
pub(crate) fn red_blue(t: &Iofpta, eps: Epsilon) -> Result<(Iofpta, Vec<NodeId>, usize)> {
    let mut a = t.clone();
    let mut is_red = vec![false; t.len()];
    is_red[Iofpta::ROOT] = true;
    let mut red_by_label: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
    red_by_label.insert(t.node(Iofpta::ROOT).label, vec![Iofpta::ROOT]);
    let mut blue: BTreeSet<NodeId> = a
        .node(Iofpta::ROOT)
        .children
        .iter()
        .map(|&(_, c)| c)
        .collect();
    let mut merges = 0;

    while let Some(qb) = blue.pop_first() {
        let label = t.node(qb).label;
        let target = red_by_label
            .get(&label)
            .and_then(|reds| reds.iter().copied().find(|&qr| compatible(t, qr, qb, eps)));
        match target {
            Some(qr) => {
                merge::merge_tracking(&mut a, qr, qb, |parent, child| {
                    if is_red[parent] && !is_red[child] {
                        blue.insert(child);
                    }
                })?;
                merges += 1;
            }
            None => {
                is_red[qb] = true;
                let reds = red_by_label.entry(label).or_default();
                let pos = reds.partition_point(|&r| r < qb);
                reds.insert(pos, qb);
                blue.extend(
                    a.node(qb)
                        .children
                        .iter()
                        .map(|&(_, c)| c)
                        .filter(|&c| !is_red[c]),
                );
            }
        }
    }
    let red = (0..t.len()).filter(|&n| is_red[n]).collect();
    Ok((a, red, merges))
}

/// Turns the counts of `nodes` in `a` into a model; every child of a listed
/// node must itself be listed.
pub fn normalize(
    a: &Iofpta,
    nodes: &[NodeId],
    inputs: &Alphabet,
    outputs: &Alphabet,
    opts: LearnOptions,
) -> Result<Lmdp> {
    let mut index = vec![usize::MAX; a.len()];
    for (i, &n) in nodes.iter().enumerate() {
        index[n] = i;
    }
    let states = nodes
        .iter()
        .enumerate()
        .map(|(i, &n)| StateRecord {
            id: i as u64,
            label: a.node(n).label,
            reward: None,
        })
        .collect();
    let root = index[Iofpta::ROOT];
    if root == usize::MAX {
        return Err(Error::InvalidModel("root is not a state".into()));
    }
    let mut model = Lmdp::new(inputs.clone(), outputs.clone(), root, states)?;
    let err = a.err_index();
    for (q, &n) in nodes.iter().enumerate() {
        let node = a.node(n);
        for input in 0..a.num_inputs() {
            let total = node.totals[input];
            if total == 0 {
                continue;
            }
            let mut err_count = 0;
            for &(step, count) in node.freq_for(input) {
                if step.1 == err {
                    err_count = count;
                    continue;
                }
                let child = node.child(step).map(|c| index[c]);
                match child {
                    Some(c) if c != usize::MAX => {
                        model.add_successor(q, input, Successor::new(c, count as f64 / total as f64))?
                    }
                    _ => {
                        return Err(Error::InvalidModel(format!(
                            "node {n} has a step without a state successor"
                        )))
                    }
                }
            }
            if err_count > 0 && !(opts.drop_pure_err && err_count == total) {
                model.add_successor(q, input, Successor::err_loop(q, err_count as f64 / total as f64))?;
            }
        }
    }
    Ok(model)
}

/// The unmerged tree read as a model.
pub fn fpta_model(t: &Iofpta, d: &Dataset, opts: LearnOptions) -> Result<Lmdp> {
    let all: Vec<NodeId> = (0..t.len()).collect();
    normalize(t, &all, &d.inputs, &d.outputs, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::IoString;

    fn dataset(inputs: &[&str], outputs: &[&str], lines: &[&str]) -> Dataset {
        let i = Alphabet::new(inputs.iter().copied()).unwrap();
        let o = Alphabet::outputs(outputs.iter().copied()).unwrap();
        let seqs = lines
            .iter()
            .map(|l| IoString::parse(l, &i, &o).unwrap())
            .collect();
        Dataset::new(i, o, seqs)
    }

    #[test]
    fn epsilon_range() {
        assert!(Epsilon::new(0.0).is_err());
        assert!(Epsilon::new(1.5).is_err());
        assert!(Epsilon::new(f64::NAN).is_err());
        assert!(Epsilon::new(1.0).is_ok());
    }

    #[test]
    fn empty_dataset_fails() {
        let d = dataset(&["a"], &["A"], &[]);
        assert!(matches!(
            ioalergia(&d, Epsilon::new(0.5).unwrap()),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn one_state_source() {
        let d = dataset(
            &["a", "b"],
            &["A"],
            &["A a A b A a A", "A b A", "A a A a A a A", "A b A b A"],
        );
        let r = ioalergia(&d, Epsilon::new(0.5).unwrap()).unwrap();
        assert_eq!(r.model.num_states(), 1);
        assert_eq!(r.red_count, 1);
        assert!(r.model.is_deterministic());
        assert!(r.model.validate().is_empty());
        assert!(r.model.is_enabled(0, 0) && r.model.is_enabled(0, 1));
    }

    #[test]
    fn err_post_processing() {
        // at B, input b is always err; at A, input b is mixed
        let lines = ["A a B b err", "A b err", "A b A", "A a B a B"];
        let d = dataset(&["a", "b"], &["A", "B"], &lines);
        let t = Iofpta::build(&d).unwrap();
        let eps = Epsilon::new(1.0).unwrap();
        let dropped = ioalergia_on(&t, &d, eps, LearnOptions::default()).unwrap();
        let kept = ioalergia_on(&t, &d, eps, LearnOptions { drop_pure_err: false }).unwrap();
        let b_state = |m: &Lmdp| m.states_labeled("B")[0];
        let m = &dropped.model;
        assert!(!m.is_enabled(b_state(m), 1));
        assert!(m.successors(m.initial(), 1).iter().any(|s| s.err && (s.prob - 0.5).abs() < 1e-12));
        let m = &kept.model;
        assert!(m.is_enabled(b_state(m), 1));
        assert!(m.successors(b_state(m), 1)[0].err);
        for r in [&dropped, &kept] {
            for s in &d.sequences {
                assert!(r.model.string_probability(s).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn fpta_model_keeps_every_node() {
        let d = dataset(&["a", "b"], &["A", "B", "C"], &["A a B", "A b C"]);
        let t = Iofpta::build(&d).unwrap();
        let m = fpta_model(&t, &d, LearnOptions::default()).unwrap();
        assert_eq!(m.num_states(), 3);
        assert!(m.validate().is_empty());
    }
}
