//! Labeled Markov decision processes.
//!
//! An [`Lmdp`] has a single initial state, per-state output labels and, for
//! every `(state, input)` pair, a successor distribution that either sums to
//! one (the input is enabled) or is empty (the input is disabled). Learned
//! models may additionally carry an *err loop*: a successor flagged as
//! emitting `err` that stays in the current state.

mod json;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use json::ModelFile;

/// Reserved output emitted when a disabled input is attempted.
pub const ERR: &str = "err";

/// Absolute tolerance for distribution sums.
pub const SUM_TOLERANCE: f64 = 1e-9;

pub type StateId = usize;

/// Ordered set of distinct tokens; the position of a token is its index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl Alphabet {
    pub fn new<I, S>(symbols: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out = Alphabet {
            symbols: Vec::new(),
            index: HashMap::new(),
        };
        for s in symbols {
            out.push(s.into())?;
        }
        Ok(out)
    }

    /// Output alphabet: like [`Alphabet::new`] but guarantees `err` is present
    /// (appended last when missing).
    pub fn outputs<I, S>(symbols: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out = Self::new(symbols)?;
        out.ensure_err();
        Ok(out)
    }

    fn push(&mut self, token: String) -> Result<usize> {
        if token.is_empty() {
            return Err(Error::InvalidAlphabet("empty token".into()));
        }
        if token.chars().any(char::is_whitespace) {
            return Err(Error::InvalidAlphabet(format!(
                "token `{token}` contains whitespace"
            )));
        }
        if self.index.contains_key(&token) {
            return Err(Error::InvalidAlphabet(format!("duplicate token `{token}`")));
        }
        let idx = self.symbols.len();
        self.index.insert(token.clone(), idx);
        self.symbols.push(token);
        Ok(idx)
    }

    pub(crate) fn ensure_err(&mut self) -> usize {
        match self.index_of(ERR) {
            Some(i) => i,
            None => self.push(ERR.to_string()).expect("err is a valid token"),
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn lookup(&self, token: &str) -> Result<usize> {
        self.index_of(token)
            .ok_or_else(|| Error::UnknownToken(token.to_string()))
    }

    pub fn symbol(&self, idx: usize) -> &str {
        &self.symbols[idx]
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn err_index(&self) -> Option<usize> {
        self.index_of(ERR)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateRecord {
    /// Identifier used in model files. Internally states are addressed by
    /// their position.
    pub id: u64,
    /// Index into the output alphabet.
    pub label: usize,
    pub reward: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Successor {
    pub to: StateId,
    pub prob: f64,
    /// The step emits `err` and stays put (`to` is the source state).
    pub err: bool,
}

impl Successor {
    pub fn new(to: StateId, prob: f64) -> Self {
        Successor {
            to,
            prob,
            err: false,
        }
    }

    pub fn err_loop(state: StateId, prob: f64) -> Self {
        Successor {
            to: state,
            prob,
            err: true,
        }
    }
}

/// Alternating string `σ0 α1 σ1 … αn σn` stored as alphabet indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IoString {
    pub initial: usize,
    /// `(input, output)` pairs.
    pub steps: Vec<(usize, usize)>,
}

impl IoString {
    pub fn new(initial: usize) -> Self {
        IoString {
            initial,
            steps: Vec::new(),
        }
    }

    pub fn push(&mut self, input: usize, output: usize) {
        self.steps.push((input, output));
    }

    /// Number of input steps.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Number of tokens, counting outputs and inputs.
    pub fn num_symbols(&self) -> usize {
        1 + 2 * self.steps.len()
    }

    pub fn parse(text: &str, inputs: &Alphabet, outputs: &Alphabet) -> Result<Self> {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.is_empty() {
            return Err(Error::MalformedTrace("empty string".into()));
        }
        if tokens.len() % 2 == 0 {
            return Err(Error::MalformedTrace(format!(
                "`{text}` does not end with an output"
            )));
        }
        let mut s = IoString::new(outputs.lookup(tokens[0])?);
        for pair in tokens[1..].chunks(2) {
            let input = inputs.lookup(pair[0])?;
            let output = outputs.lookup(pair[1])?;
            s.push(input, output);
        }
        Ok(s)
    }

    pub fn display<'a>(&'a self, inputs: &'a Alphabet, outputs: &'a Alphabet) -> impl fmt::Display + 'a {
        DisplayIo {
            s: self,
            inputs,
            outputs,
        }
    }
}

struct DisplayIo<'a> {
    s: &'a IoString,
    inputs: &'a Alphabet,
    outputs: &'a Alphabet,
}

impl fmt::Display for DisplayIo<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.outputs.symbol(self.s.initial))?;
        for &(a, o) in &self.s.steps {
            write!(f, " {} {}", self.inputs.symbol(a), self.outputs.symbol(o))?;
        }
        Ok(())
    }
}

/// Maps states to the input chosen there.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemorylessScheduler {
    pub choice: BTreeMap<StateId, usize>,
}

impl MemorylessScheduler {
    pub fn get(&self, q: StateId) -> Option<usize> {
        self.choice.get(&q).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub state: Option<StateId>,
    pub input: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.state, self.input) {
            (Some(q), Some(a)) => write!(f, "state {q}, input {a}: {}", self.message),
            (Some(q), None) => write!(f, "state {q}: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lmdp {
    inputs: Alphabet,
    outputs: Alphabet,
    initial: StateId,
    states: Vec<StateRecord>,
    /// Indexed `[state][input]`.
    transitions: Vec<Vec<Vec<Successor>>>,
}

impl Lmdp {
    /// Creates a model with the given states and no transitions. `err` is
    /// added to the output alphabet when missing.
    pub fn new(
        inputs: Alphabet,
        mut outputs: Alphabet,
        initial: StateId,
        states: Vec<StateRecord>,
    ) -> Result<Self> {
        outputs.ensure_err();
        if initial >= states.len() {
            return Err(Error::InvalidModel(format!(
                "initial state {initial} out of range"
            )));
        }
        if let Some(s) = states.iter().find(|s| s.label >= outputs.len()) {
            return Err(Error::InvalidModel(format!(
                "state {} has a label outside the output alphabet",
                s.id
            )));
        }
        let transitions = vec![vec![Vec::new(); inputs.len()]; states.len()];
        Ok(Lmdp {
            inputs,
            outputs,
            initial,
            states,
            transitions,
        })
    }

    pub fn add_successor(&mut self, from: StateId, input: usize, succ: Successor) -> Result<()> {
        let row = self
            .transitions
            .get_mut(from)
            .ok_or(Error::UnknownState(from))?;
        let slot = row
            .get_mut(input)
            .ok_or_else(|| Error::InvalidModel(format!("input index {input} out of range")))?;
        slot.push(succ);
        Ok(())
    }

    pub fn inputs(&self) -> &Alphabet {
        &self.inputs
    }

    pub fn outputs(&self) -> &Alphabet {
        &self.outputs
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[StateRecord] {
        &self.states
    }

    pub fn state(&self, q: StateId) -> Result<&StateRecord> {
        self.states.get(q).ok_or(Error::UnknownState(q))
    }

    pub fn label(&self, q: StateId) -> usize {
        self.states[q].label
    }

    pub fn label_str(&self, q: StateId) -> &str {
        self.outputs.symbol(self.states[q].label)
    }

    pub fn reward(&self, q: StateId) -> f64 {
        self.states[q].reward.unwrap_or(0.0)
    }

    pub fn set_reward(&mut self, q: StateId, reward: Option<f64>) {
        self.states[q].reward = reward;
    }

    /// States carrying the given label token.
    pub fn states_labeled(&self, token: &str) -> Vec<StateId> {
        match self.outputs.index_of(token) {
            Some(l) => (0..self.states.len())
                .filter(|&q| self.states[q].label == l)
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn successors(&self, q: StateId, input: usize) -> &[Successor] {
        &self.transitions[q][input]
    }

    /// Number of positive-probability `(state, input, successor)` entries.
    pub fn num_transitions(&self) -> usize {
        self.transitions
            .iter()
            .flatten()
            .flatten()
            .filter(|s| s.prob > 0.0)
            .count()
    }

    fn dist_sum(&self, q: StateId, input: usize) -> f64 {
        self.transitions[q][input].iter().map(|s| s.prob).sum()
    }

    pub fn is_enabled(&self, q: StateId, input: usize) -> bool {
        (self.dist_sum(q, input) - 1.0).abs() <= SUM_TOLERANCE
    }

    /// Inputs whose successor distribution sums to one.
    pub fn enabled_actions(&self, q: StateId) -> Result<Vec<usize>> {
        if q >= self.states.len() {
            return Err(Error::UnknownState(q));
        }
        Ok((0..self.inputs.len())
            .filter(|&a| self.is_enabled(q, a))
            .collect())
    }

    pub(crate) fn enabled_iter(&self, q: StateId) -> impl Iterator<Item = usize> + '_ {
        (0..self.inputs.len()).filter(move |&a| self.is_enabled(q, a))
    }

    /// Checks every structural invariant and reports each violation.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.states.len();
        if self.initial >= n {
            out.push(Violation {
                state: None,
                input: None,
                message: format!("initial state {} out of range", self.initial),
            });
        }
        let err_idx = self.outputs.err_index();
        for q in 0..n {
            if self.states[q].label >= self.outputs.len() {
                out.push(Violation {
                    state: Some(q),
                    input: None,
                    message: "label outside output alphabet".into(),
                });
            }
            for a in 0..self.inputs.len() {
                let mut sum = 0.0;
                for s in &self.transitions[q][a] {
                    sum += s.prob;
                    if !(0.0..=1.0).contains(&s.prob) {
                        out.push(Violation {
                            state: Some(q),
                            input: Some(a),
                            message: format!("probability {} outside [0, 1]", s.prob),
                        });
                    }
                    if s.to >= n {
                        out.push(Violation {
                            state: Some(q),
                            input: Some(a),
                            message: format!("unknown successor {}", s.to),
                        });
                    }
                    if s.err && s.to != q {
                        out.push(Violation {
                            state: Some(q),
                            input: Some(a),
                            message: format!("err loop leads to state {}", s.to),
                        });
                    }
                    if !s.err && err_idx.is_some() && self.states.get(s.to).map(|r| r.label) == err_idx {
                        out.push(Violation {
                            state: Some(q),
                            input: Some(a),
                            message: "successor labeled err".into(),
                        });
                    }
                }
                if (sum - 1.0).abs() > SUM_TOLERANCE && sum.abs() > SUM_TOLERANCE {
                    out.push(Violation {
                        state: Some(q),
                        input: Some(a),
                        message: format!("distribution sum {sum} ≠ 1 and ≠ 0"),
                    });
                }
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        match report.first() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidModel(format!(
                "{v} ({} violation(s))",
                report.len()
            ))),
        }
    }

    fn successor_label(&self, s: &Successor) -> usize {
        if s.err {
            self.outputs.err_index().expect("output alphabet carries err")
        } else {
            self.states[s.to].label
        }
    }

    /// At most one positive-probability successor per `(state, input, label)`.
    pub fn is_deterministic(&self) -> bool {
        let mut seen = Vec::new();
        for row in &self.transitions {
            for dist in row {
                seen.clear();
                for s in dist.iter().filter(|s| s.prob > 0.0) {
                    let l = self.successor_label(s);
                    if seen.contains(&l) {
                        return false;
                    }
                    seen.push(l);
                }
            }
        }
        true
    }

    /// One observed step `(input, output)` from `q`: the reached state and the
    /// step probability, or `None` when the step is impossible.
    ///
    /// An `err` output at a disabled input stays in `q` with probability 1; at
    /// an enabled input it follows the explicit err loop, if any.
    pub fn step(&self, q: StateId, input: usize, output: usize) -> Option<(StateId, f64)> {
        let dist = &self.transitions[q][input];
        if Some(output) == self.outputs.err_index() {
            if !self.is_enabled(q, input) {
                return Some((q, 1.0));
            }
            return dist
                .iter()
                .find(|s| s.err && s.prob > 0.0)
                .map(|s| (q, s.prob));
        }
        dist.iter()
            .find(|s| !s.err && s.prob > 0.0 && self.states[s.to].label == output)
            .map(|s| (s.to, s.prob))
    }

    /// The unique state reached by `s`, or `None` if `s` cannot be produced.
    pub fn run_string(&self, s: &IoString) -> Result<Option<StateId>> {
        if !self.is_deterministic() {
            return Err(Error::NotDeterministic);
        }
        Ok(self.run_unchecked(s).map(|(q, _)| q))
    }

    /// Probability of observing `s` when its inputs are supplied in order.
    pub fn string_probability(&self, s: &IoString) -> Result<f64> {
        if !self.is_deterministic() {
            return Err(Error::NotDeterministic);
        }
        Ok(self.run_unchecked(s).map_or(0.0, |(_, p)| p))
    }

    /// Natural-log probability of `s`; skips the determinism check.
    pub(crate) fn log_probability_unchecked(&self, s: &IoString) -> f64 {
        if self.states[self.initial].label != s.initial {
            return f64::NEG_INFINITY;
        }
        let mut q = self.initial;
        let mut lp = 0.0;
        for &(a, o) in &s.steps {
            match self.step(q, a, o) {
                Some((next, p)) => {
                    lp += p.ln();
                    q = next;
                }
                None => return f64::NEG_INFINITY,
            }
        }
        lp
    }

    fn run_unchecked(&self, s: &IoString) -> Option<(StateId, f64)> {
        if self.states[self.initial].label != s.initial {
            return None;
        }
        let mut q = self.initial;
        let mut prob = 1.0;
        for &(a, o) in &s.steps {
            let (next, p) = self.step(q, a, o)?;
            prob *= p;
            q = next;
        }
        Some((q, prob))
    }
}
