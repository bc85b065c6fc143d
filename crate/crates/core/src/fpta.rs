//! Input/output frequency prefix tree acceptor.
//!
//! Every node stands for one observed prefix and records how often each
//! `(input, output)` step followed it. `err` steps are folded: they are
//! counted on the node itself and never create a child. Node ids follow
//! breadth-first shortlex order of the access strings, so comparing ids
//! compares access strings.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{Alphabet, IoString};
use crate::tracegen::Dataset;

pub type NodeId = usize;

/// `(input index, output index)`.
pub type Step = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct FptaNode {
    pub label: usize,
    /// Parent and the step leading here; `None` for the root.
    pub parent: Option<(NodeId, Step)>,
    /// Sorted by step; never keyed by `err`.
    pub children: Vec<(Step, NodeId)>,
    /// Sorted by step; positive entries only, `err` included.
    pub freq: Vec<(Step, u64)>,
    /// Per-input totals of `freq`.
    pub totals: Vec<u64>,
}

impl FptaNode {
    fn new(label: usize, parent: Option<(NodeId, Step)>, n_inputs: usize) -> Self {
        FptaNode {
            label,
            parent,
            children: Vec::new(),
            freq: Vec::new(),
            totals: vec![0; n_inputs],
        }
    }

    pub fn child(&self, step: Step) -> Option<NodeId> {
        self.children
            .binary_search_by_key(&step, |&(k, _)| k)
            .ok()
            .map(|i| self.children[i].1)
    }

    pub(crate) fn set_child(&mut self, step: Step, node: NodeId) {
        match self.children.binary_search_by_key(&step, |&(k, _)| k) {
            Ok(i) => self.children[i].1 = node,
            Err(i) => self.children.insert(i, (step, node)),
        }
    }

    pub fn freq(&self, step: Step) -> u64 {
        self.freq
            .binary_search_by_key(&step, |&(k, _)| k)
            .map_or(0, |i| self.freq[i].1)
    }

    pub(crate) fn add_freq(&mut self, step: Step, count: u64) {
        match self.freq.binary_search_by_key(&step, |&(k, _)| k) {
            Ok(i) => self.freq[i].1 += count,
            Err(i) => self.freq.insert(i, (step, count)),
        }
        self.totals[step.0] += count;
    }

    /// Frequency entries for one input, in output order.
    pub fn freq_for(&self, input: usize) -> &[(Step, u64)] {
        let lo = self.freq.partition_point(|&((a, _), _)| a < input);
        let hi = self.freq.partition_point(|&((a, _), _)| a <= input);
        &self.freq[lo..hi]
    }

    pub fn children_for(&self, input: usize) -> &[(Step, NodeId)] {
        let lo = self.children.partition_point(|&((a, _), _)| a < input);
        let hi = self.children.partition_point(|&((a, _), _)| a <= input);
        &self.children[lo..hi]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Iofpta {
    pub(crate) nodes: Vec<FptaNode>,
    pub(crate) n_inputs: usize,
    pub(crate) err: usize,
}

impl Iofpta {
    pub const ROOT: NodeId = 0;

    /// Builds the tree from a non-empty dataset.
    pub fn build(d: &Dataset) -> Result<Self> {
        d.check()?;
        let first = d.sequences.first().ok_or(Error::EmptyDataset)?;
        let err = d.outputs.err_index().expect("dataset outputs carry err");
        let n_inputs = d.inputs.len();
        let mut nodes = vec![FptaNode::new(first.initial, None, n_inputs)];
        for s in &d.sequences {
            let mut cur = 0;
            for &step in &s.steps {
                nodes[cur].add_freq(step, 1);
                if step.1 == err {
                    continue;
                }
                cur = match nodes[cur].child(step) {
                    Some(c) => c,
                    None => {
                        let id = nodes.len();
                        nodes.push(FptaNode::new(step.1, Some((cur, step)), n_inputs));
                        nodes[cur].set_child(step, id);
                        id
                    }
                };
            }
        }
        Ok(Iofpta {
            nodes: renumber_shortlex(nodes),
            n_inputs,
            err,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &FptaNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[FptaNode] {
        &self.nodes
    }

    pub fn num_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn err_index(&self) -> usize {
        self.err
    }

    /// Node reached by `s`, following `err` steps in place.
    pub fn node_by_string(&self, s: &IoString) -> Option<NodeId> {
        if self.nodes.first()?.label != s.initial {
            return None;
        }
        let mut cur = Self::ROOT;
        for &step in &s.steps {
            if step.1 == self.err {
                continue;
            }
            cur = self.nodes[cur].child(step)?;
        }
        Some(cur)
    }

    /// Shortest (and shortlex-minimal) string leading to `id`.
    pub fn access_string(&self, id: NodeId) -> IoString {
        let mut steps = Vec::new();
        let mut cur = id;
        while let Some((p, step)) = self.nodes[cur].parent {
            steps.push(step);
            cur = p;
        }
        steps.reverse();
        IoString {
            initial: self.nodes[cur].label,
            steps,
        }
    }

    /// Sum of all recorded input steps over nodes reachable from the root.
    pub fn total_steps(&self) -> u64 {
        self.reachable()
            .iter()
            .map(|&n| self.nodes[n].totals.iter().sum::<u64>())
            .sum()
    }

    /// Nodes reachable from the root along child edges (loops allowed).
    pub fn reachable(&self) -> Vec<NodeId> {
        let mut seen = vec![false; self.nodes.len()];
        let mut out = Vec::new();
        let mut stack = vec![Self::ROOT];
        seen[Self::ROOT] = true;
        while let Some(n) = stack.pop() {
            out.push(n);
            for &(_, c) in &self.nodes[n].children {
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Graphviz rendering with `input:output (count)` edges and err counts
    /// on nodes.
    pub fn to_dot(&self, inputs: &Alphabet, outputs: &Alphabet) -> String {
        let mut out = String::from("digraph iofpta {\n");
        for (id, n) in self.nodes.iter().enumerate() {
            let errs: Vec<String> = (0..self.n_inputs)
                .filter_map(|a| {
                    let c = n.freq((a, self.err));
                    (c > 0).then(|| format!("{}:err ({c})", inputs.symbol(a)))
                })
                .collect();
            let extra = if errs.is_empty() {
                String::new()
            } else {
                format!("\\n{}", errs.join("\\n"))
            };
            let _ = writeln!(
                out,
                "  n{id} [label=\"{}{extra}\"];",
                outputs.symbol(n.label)
            );
            for &((a, o), c) in &n.children {
                let _ = writeln!(
                    out,
                    "  n{id} -> n{c} [label=\"{}:{} ({})\"];",
                    inputs.symbol(a),
                    outputs.symbol(o),
                    n.freq((a, o))
                );
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Reassigns ids in breadth-first order with children visited by step.
fn renumber_shortlex(nodes: Vec<FptaNode>) -> Vec<FptaNode> {
    let mut order = Vec::with_capacity(nodes.len());
    let mut queue = VecDeque::from([0usize]);
    while let Some(n) = queue.pop_front() {
        order.push(n);
        queue.extend(nodes[n].children.iter().map(|&(_, c)| c));
    }
    let mut new_id = vec![0; nodes.len()];
    for (i, &old) in order.iter().enumerate() {
        new_id[old] = i;
    }
    let mut slots: Vec<Option<FptaNode>> = nodes.into_iter().map(Some).collect();
    order
        .iter()
        .map(|&old| {
            let mut n = slots[old].take().expect("each node visited once");
            n.parent = n.parent.map(|(p, s)| (new_id[p], s));
            for (_, c) in &mut n.children {
                *c = new_id[*c];
            }
            n
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alphabets() -> (Alphabet, Alphabet) {
        (
            Alphabet::new(["alpha", "beta"]).unwrap(),
            Alphabet::outputs(["A", "B", "C"]).unwrap(),
        )
    }

    fn dataset(lines: &[&str]) -> Dataset {
        let (i, o) = alphabets();
        let seqs = lines
            .iter()
            .map(|l| IoString::parse(l, &i, &o).unwrap())
            .collect();
        Dataset::new(i, o, seqs)
    }

    #[test]
    fn single_root() {
        let t = Iofpta::build(&dataset(&["A"])).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.node(0).label, 0);
        assert!(t.node(0).freq.is_empty());
        assert_eq!(t.node(0).totals, vec![0, 0]);
    }

    #[test]
    fn empty_and_mixed_datasets_fail() {
        assert!(matches!(
            Iofpta::build(&dataset(&[])),
            Err(Error::EmptyDataset)
        ));
        assert!(matches!(
            Iofpta::build(&dataset(&["A", "B"])),
            Err(Error::InconsistentInitialLabel { .. })
        ));
    }

    #[test]
    fn example_frequencies() {
        let mut lines = vec!["A alpha B"; 15];
        lines.extend(vec!["A alpha C beta err"; 7]);
        let d = dataset(&lines);
        let t = Iofpta::build(&d).unwrap();
        let root = t.node(0);
        assert_eq!(root.freq((0, 1)), 15);
        assert_eq!(root.freq((0, 2)), 7);
        assert_eq!(root.totals[0], 22);
        let c = t.node_by_string(&IoString::parse("A alpha C", &d.inputs, &d.outputs).unwrap());
        let c = c.unwrap();
        assert_eq!(t.node(c).freq((1, 3)), 7);
        assert!(t.node(c).children.is_empty());
    }

    #[test]
    fn err_is_folded() {
        let d = dataset(&["A beta err alpha B"]);
        let t = Iofpta::build(&d).unwrap();
        // naive oracle: the distinct non-err prefixes are "A" and "A alpha B"
        assert_eq!(t.len(), 2);
        let root = t.node(0);
        assert_eq!(root.freq((1, 3)), 1);
        assert_eq!(root.freq((0, 1)), 1);
        assert_eq!(root.children, vec![((0, 1), 1)]);

        let folded = IoString::parse("A beta err", &d.inputs, &d.outputs).unwrap();
        assert_eq!(t.node_by_string(&folded), Some(0));
        let with = IoString::parse("A beta err alpha B", &d.inputs, &d.outputs).unwrap();
        let without = IoString::parse("A alpha B", &d.inputs, &d.outputs).unwrap();
        assert_eq!(t.node_by_string(&with), t.node_by_string(&without));
        let absent = IoString::parse("A beta B", &d.inputs, &d.outputs).unwrap();
        assert_eq!(t.node_by_string(&absent), None);
        assert_eq!(t.node_by_string(&IoString::new(0)), Some(0));
    }

    #[test]
    fn ids_follow_shortlex() {
        let d = dataset(&[
            "A beta C alpha A",
            "A alpha B beta B",
            "A alpha C",
            "A beta A",
        ]);
        let t = Iofpta::build(&d).unwrap();
        let strings: Vec<IoString> = (0..t.len()).map(|n| t.access_string(n)).collect();
        for w in strings.windows(2) {
            let key = |s: &IoString| (s.len(), s.steps.clone());
            assert!(key(&w[0]) < key(&w[1]));
        }
        for (n, s) in strings.iter().enumerate() {
            assert_eq!(t.node_by_string(s), Some(n));
        }
    }

    #[test]
    fn dot_mentions_err_counts() {
        let d = dataset(&["A beta err alpha B"]);
        let t = Iofpta::build(&d).unwrap();
        let dot = t.to_dot(&d.inputs, &d.outputs);
        assert!(dot.contains("beta:err (1)"));
        assert!(dot.contains("alpha:B (1)"));
    }
}
