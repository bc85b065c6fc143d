use thiserror::Error;

use crate::model::{MemorylessScheduler, StateId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown state {0}")]
    UnknownState(StateId),

    #[error("operation requires a deterministic labeled MDP")]
    NotDeterministic,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("unknown token `{0}`")]
    UnknownToken(String),

    #[error("malformed trace: {0}")]
    MalformedTrace(String),

    #[error("inconsistent initial label: expected `{expected}`, found `{found}`")]
    InconsistentInitialLabel { expected: String, found: String },

    #[error("malformed counts: f = {f} exceeds n = {n}")]
    MalformedCounts { f: u64, n: u64 },

    #[error("epsilon must lie in (0, 1], got {0}")]
    InvalidEpsilon(f64),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("model does not generate training data (sequence {0} has probability 0)")]
    ZeroLikelihood(usize),

    #[error("cannot merge nodes with different labels ({0} and {1})")]
    LabelMismatch(usize, usize),

    #[error("target not almost-surely reachable (min probability {probability} from the initial state)")]
    NotAlmostSure {
        probability: f64,
        witness: MemorylessScheduler,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot parse query `{query}`: {reason}")]
    QueryParse { query: String, reason: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
