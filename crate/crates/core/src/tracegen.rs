//! Sampling observation traces under a fair uniform scheduler.
//!
//! Every sequence starts in the initial state. At each step an input is drawn
//! uniformly from the whole input alphabet; a disabled input yields `err` and
//! leaves the state unchanged. Lengths are geometric on `{1, 2, …}`. Sequence
//! `i` draws from its own ChaCha stream `(seed, i)`, so output does not depend
//! on thread count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Alphabet, IoString, Lmdp, StateId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub num_sequences: usize,
    /// Success probability of the length distribution; mean length is `1/p`.
    pub geometric_p: f64,
    pub seed: u64,
    /// Stop a sequence as soon as a state with this label is reached.
    pub stop_label: Option<String>,
}

impl GenConfig {
    pub fn new(num_sequences: usize, geometric_p: f64, seed: u64) -> Self {
        GenConfig {
            num_sequences,
            geometric_p,
            seed,
            stop_label: None,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.num_sequences == 0 {
            return Err(Error::InvalidConfig("num_sequences must be at least 1".into()));
        }
        if !(self.geometric_p > 0.0 && self.geometric_p < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "geometric_p must lie in (0, 1), got {}",
                self.geometric_p
            )));
        }
        Ok(())
    }
}

/// A materialised sample of observation sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Alphabet,
    /// Always contains `err`.
    pub outputs: Alphabet,
    pub sequences: Vec<IoString>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub num_sequences: usize,
    pub num_symbols: usize,
    /// Mean number of input steps per sequence (0 for an empty dataset).
    pub mean_length: f64,
    pub action_histogram: BTreeMap<String, u64>,
}

impl Dataset {
    pub fn new(inputs: Alphabet, mut outputs: Alphabet, sequences: Vec<IoString>) -> Self {
        outputs.ensure_err();
        Dataset {
            inputs,
            outputs,
            sequences,
        }
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn num_symbols(&self) -> usize {
        self.sequences.iter().map(IoString::num_symbols).sum()
    }

    pub fn num_steps(&self) -> usize {
        self.sequences.iter().map(IoString::len).sum()
    }

    pub fn stats(&self) -> DatasetStats {
        let mut counts = vec![0u64; self.inputs.len()];
        for s in &self.sequences {
            for &(a, _) in &s.steps {
                counts[a] += 1;
            }
        }
        let action_histogram = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(a, &c)| (self.inputs.symbol(a).to_string(), c))
            .collect();
        let mean_length = if self.sequences.is_empty() {
            0.0
        } else {
            self.num_steps() as f64 / self.sequences.len() as f64
        };
        DatasetStats {
            num_sequences: self.sequences.len(),
            num_symbols: self.num_symbols(),
            mean_length,
            action_histogram,
        }
    }

    /// Checks alternation indices and that all sequences share one initial
    /// label.
    pub fn check(&self) -> Result<()> {
        let mut initial = None;
        for s in &self.sequences {
            if s.initial >= self.outputs.len()
                || s.steps
                    .iter()
                    .any(|&(a, o)| a >= self.inputs.len() || o >= self.outputs.len())
            {
                return Err(Error::MalformedTrace("token index out of range".into()));
            }
            if Some(s.initial) == self.outputs.err_index() {
                return Err(Error::MalformedTrace("sequence starts with err".into()));
            }
            match initial {
                None => initial = Some(s.initial),
                Some(i) if i != s.initial => {
                    return Err(Error::InconsistentInitialLabel {
                        expected: self.outputs.symbol(i).to_string(),
                        found: self.outputs.symbol(s.initial).to_string(),
                    })
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Text form: alphabet headers, then one sequence per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "#inputs: {}", self.inputs.symbols().join(" "));
        let _ = writeln!(out, "#outputs: {}", self.outputs.symbols().join(" "));
        for s in &self.sequences {
            let _ = writeln!(out, "{}", s.display(&self.inputs, &self.outputs));
        }
        out
    }

    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let mut inputs = None;
        let mut outputs = None;
        let mut raw = Vec::new();
        for (lineno, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if let Some(rest) = trimmed.strip_prefix("#inputs:") {
                inputs = Some(Alphabet::new(rest.split_whitespace())?);
            } else if let Some(rest) = trimmed.strip_prefix("#outputs:") {
                outputs = Some(Alphabet::outputs(rest.split_whitespace())?);
            } else if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            } else {
                raw.push((lineno + 1, line));
            }
        }
        let inputs = inputs.ok_or_else(|| Error::MalformedTrace("missing #inputs header".into()))?;
        let outputs =
            outputs.ok_or_else(|| Error::MalformedTrace("missing #outputs header".into()))?;
        let mut sequences = Vec::with_capacity(raw.len());
        for (lineno, line) in raw {
            let s = IoString::parse(&line, &inputs, &outputs).map_err(|e| {
                Error::MalformedTrace(format!("line {lineno}: {e}"))
            })?;
            sequences.push(s);
        }
        let d = Dataset::new(inputs, outputs, sequences);
        d.check()?;
        Ok(d)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Dataset::from_reader(std::fs::File::open(path)?)
    }
}

/// RNG for sequence `index` of a run seeded with `seed`.
pub fn sequence_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Samples `cfg.num_sequences` traces from `model`.
pub fn generate(model: &Lmdp, cfg: &GenConfig) -> Result<Dataset> {
    cfg.check()?;
    model.ensure_valid()?;
    let stop = match &cfg.stop_label {
        Some(tok) => Some(model.outputs().lookup(tok)?),
        None => None,
    };
    let lengths = Geometric::new(cfg.geometric_p)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let err = model.outputs().err_index().expect("model outputs carry err");
    let sequences = (0..cfg.num_sequences as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sequence_rng(cfg.seed, i);
            let len = 1 + lengths.sample(&mut rng);
            sample_sequence(model, len, stop, err, &mut rng)
        })
        .collect();
    Ok(Dataset::new(
        model.inputs().clone(),
        model.outputs().clone(),
        sequences,
    ))
}

fn sample_sequence(
    model: &Lmdp,
    len: u64,
    stop: Option<usize>,
    err: usize,
    rng: &mut impl Rng,
) -> IoString {
    let mut q: StateId = model.initial();
    let mut s = IoString::new(model.label(q));
    let n_inputs = model.inputs().len();
    for _ in 0..len {
        if stop == Some(model.label(q)) {
            break;
        }
        let a = rng.random_range(0..n_inputs);
        if !model.is_enabled(q, a) {
            s.push(a, err);
            continue;
        }
        let dist = model.successors(q, a);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        // falls back to the last positive entry if rounding leaves u uncovered
        let mut chosen = dist.iter().rev().find(|x| x.prob > 0.0).copied();
        for succ in dist {
            acc += succ.prob;
            if u < acc && succ.prob > 0.0 {
                chosen = Some(*succ);
                break;
            }
        }
        let succ = chosen.expect("enabled input has a successor");
        if succ.err {
            s.push(a, err);
        } else {
            q = succ.to;
            s.push(a, model.label(q));
        }
    }
    s
}
