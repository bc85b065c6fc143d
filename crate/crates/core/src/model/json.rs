//! JSON model files.
//!
//! ```json
//! {
//!   "input_alphabet": ["a", "b"],
//!   "output_alphabet": ["A", "B", "err"],
//!   "initial": 0,
//!   "states": [{"id": 0, "label": "A", "reward": 1.0}, {"id": 1, "label": "B"}],
//!   "transitions": [{"from": 0, "input": "a", "to": 1, "prob": 1.0},
//!                   {"from": 1, "input": "a", "to": 1, "prob": 0.25, "err": true}]
//! }
//! ```
//!
//! Reals are written with 17 significant digits so that every value reads
//! back to the same bits. `"err": true` marks a learned err loop.

use std::collections::HashMap;
use std::path::Path;

use serde::de::Error as _;
use serde::ser::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use super::{Alphabet, Lmdp, StateRecord, Successor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub input_alphabet: Vec<String>,
    pub output_alphabet: Vec<String>,
    pub initial: u64,
    pub states: Vec<StateEntry>,
    pub transitions: Vec<TransitionEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateEntry {
    pub id: u64,
    pub label: String,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        serialize_with = "ser_opt_real",
        deserialize_with = "de_opt_real"
    )]
    pub reward: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionEntry {
    pub from: u64,
    pub input: String,
    pub to: u64,
    #[serde(serialize_with = "ser_real")]
    pub prob: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub err: bool,
}

pub(crate) fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn ser_real<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if !x.is_finite() {
        return Err(S::Error::custom(format!("non-finite real {x}")));
    }
    RawValue::from_string(format_real(*x))
        .map_err(S::Error::custom)?
        .serialize(s)
}

fn ser_opt_real<S: Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => ser_real(v, s),
        None => s.serialize_none(),
    }
}

fn de_opt_real<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    let v = Option::<f64>::deserialize(d)?;
    if v.is_some_and(|x| !x.is_finite()) {
        return Err(D::Error::custom("non-finite reward"));
    }
    Ok(v)
}

impl From<&Lmdp> for ModelFile {
    fn from(m: &Lmdp) -> Self {
        let mut transitions = Vec::new();
        for (q, row) in m.transitions.iter().enumerate() {
            for (a, dist) in row.iter().enumerate() {
                for s in dist {
                    transitions.push(TransitionEntry {
                        from: m.states[q].id,
                        input: m.inputs.symbol(a).to_string(),
                        to: m.states.get(s.to).map_or(s.to as u64, |r| r.id),
                        prob: s.prob,
                        err: s.err,
                    });
                }
            }
        }
        ModelFile {
            input_alphabet: m.inputs.symbols().to_vec(),
            output_alphabet: m.outputs.symbols().to_vec(),
            initial: m.states[m.initial].id,
            states: m
                .states
                .iter()
                .map(|s| StateEntry {
                    id: s.id,
                    label: m.outputs.symbol(s.label).to_string(),
                    reward: s.reward,
                })
                .collect(),
            transitions,
        }
    }
}

impl TryFrom<ModelFile> for Lmdp {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        let inputs = Alphabet::new(f.input_alphabet)?;
        let outputs = Alphabet::outputs(f.output_alphabet)?;
        let mut index = HashMap::with_capacity(f.states.len());
        let mut states = Vec::with_capacity(f.states.len());
        for (i, s) in f.states.into_iter().enumerate() {
            if index.insert(s.id, i).is_some() {
                return Err(Error::InvalidModel(format!("duplicate state id {}", s.id)));
            }
            states.push(StateRecord {
                id: s.id,
                label: outputs.lookup(&s.label)?,
                reward: s.reward,
            });
        }
        let resolve = |id: u64| {
            index
                .get(&id)
                .copied()
                .ok_or_else(|| Error::InvalidModel(format!("unknown state id {id}")))
        };
        let initial = resolve(f.initial)?;
        let mut m = Lmdp::new(inputs, outputs, initial, states)?;
        for t in f.transitions {
            let from = resolve(t.from)?;
            let to = resolve(t.to)?;
            let input = m.inputs.lookup(&t.input)?;
            m.add_successor(
                from,
                input,
                Successor {
                    to,
                    prob: t.prob,
                    err: t.err,
                },
            )?;
        }
        Ok(m)
    }
}

impl Lmdp {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        Lmdp::try_from(file)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Lmdp::from_json(&std::fs::read_to_string(path)?)
    }
}
