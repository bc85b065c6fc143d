//! Slot-machine case studies.
//!
//! Three reels show one of lemon, grape, cherry, bar or apple; inputs `sp1`,
//! `sp2`, `sp3` spin one reel and `pay` cashes out. A game allows `N` spins,
//! every reel must be spun at least once (a spin is only enabled if enough
//! spins remain for the reels still unspun) and `pay` is enabled once all
//! reels show a symbol. `pay` leads to a state labeled by the prize, then to
//! an absorbing `stop` state.
//!
//! Configuration states are labeled `r1_r2_r3_k` (`ns` for a reel not yet
//! spun, `k` spins used), prize states `prizeP`, and the final state `stop`.
//!
//! In the hooked machine reel 2 carries two physically different bars that
//! both display as `bar`; reel distributions depend on the other reels, and
//! three bars pay 20.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::analysis::{reach_probability_bounded_from, Opt};
use crate::error::{Error, Result};
use crate::model::{Alphabet, Lmdp, StateId, StateRecord, Successor};

pub const INPUTS: [&str; 4] = ["sp1", "sp2", "sp3", "pay"];
pub const SYMBOLS: [&str; 5] = ["lemon", "grape", "cherry", "bar", "apple"];
pub const NOT_SPUN: &str = "ns";
pub const STOP: &str = "stop";

const PAY: usize = 3;

const LEMON: u8 = 0;
const GRAPE: u8 = 1;
const CHERRY: u8 = 2;
const BAR: u8 = 3;
const APPLE: u8 = 4;

/// Reel distributions of the plain machine, indexed like [`SYMBOLS`].
pub const REEL_DIST: [[f64; 5]; 3] = [
    [0.2, 0.2, 0.1, 0.3, 0.2],
    [0.2, 0.1, 0.3, 0.2, 0.2],
    [0.2, 0.3, 0.2, 0.1, 0.2],
];

/// Hooked reel 1 given reel 2 shows bar 1, bar 2, anything else.
pub const HOOKED_REEL1: [[f64; 5]; 3] = [
    [0.2, 0.2, 0.1, 0.3, 0.2],
    [0.3, 0.2, 0.1, 0.05, 0.35],
    [0.25, 0.2, 0.1, 0.15, 0.3],
];

/// Hooked reel 3 given reel 2 shows bar 1, bar 2, anything else.
pub const HOOKED_REEL3: [[f64; 5]; 3] = [
    [0.2, 0.3, 0.2, 0.05, 0.25],
    [0.1, 0.3, 0.2, 0.3, 0.1],
    [0.2, 0.3, 0.2, 0.15, 0.15],
];

/// Hooked reel 2 over (lemon, grape, cherry, bar 1, bar 2, apple) given
/// reel 1 bar only, reel 3 bar only, both bar, neither.
pub const HOOKED_REEL2: [[f64; 6]; 4] = [
    [0.2, 0.1, 0.3, 0.18, 0.02, 0.2],
    [0.2, 0.1, 0.3, 0.02, 0.18, 0.2],
    [0.26, 0.1, 0.3, 0.02, 0.02, 0.3],
    [0.2, 0.1, 0.3, 0.1, 0.1, 0.2],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Deterministic,
    Hooked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotConfig {
    pub n_spins: u32,
    pub variant: Variant,
}

impl SlotConfig {
    pub fn new(n_spins: u32, variant: Variant) -> Self {
        SlotConfig { n_spins, variant }
    }
}

/// Reel contents; `None` is not spun. Reel 2 of the hooked machine uses
/// 3 for bar 1 and 5 for bar 2, other values as in [`SYMBOLS`].
type Reels = [Option<u8>; 3];

const HOOKED_BAR2: u8 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Slot {
    Config { reels: Reels, spins: u32 },
    Prize(u32),
    Stop,
}

fn shown(v: u8) -> u8 {
    if v == HOOKED_BAR2 {
        BAR
    } else {
        v
    }
}

/// Prize for the displayed symbols.
pub fn prize(shown: [u8; 3], hooked: bool) -> u32 {
    let [r1, r2, r3] = shown;
    if r1 == r2 && r2 == r3 && matches!(r1, BAR | CHERRY | GRAPE) {
        if hooked && r1 == BAR {
            20
        } else {
            10
        }
    } else if r2 == BAR && r3 == BAR {
        5
    } else if r1 == CHERRY && r3 == CHERRY {
        5
    } else if r1 == GRAPE && r2 == GRAPE {
        5
    } else if r3 == BAR {
        2
    } else if r3 == CHERRY {
        1
    } else {
        0
    }
}

/// Prize for symbol names, e.g. `["cherry", "cherry", "cherry"]`.
pub fn prize_of(names: [&str; 3], hooked: bool) -> Result<u32> {
    let mut idx = [0u8; 3];
    for (slot, name) in idx.iter_mut().zip(names) {
        *slot = SYMBOLS
            .iter()
            .position(|s| *s == name)
            .ok_or_else(|| Error::UnknownToken(name.to_string()))? as u8;
    }
    Ok(prize(idx, hooked))
}

fn label(slot: &Slot) -> String {
    match slot {
        Slot::Config { reels, spins } => {
            let name = |r: Option<u8>| r.map_or(NOT_SPUN, |v| SYMBOLS[shown(v) as usize]);
            format!("{}_{}_{}_{}", name(reels[0]), name(reels[1]), name(reels[2]), spins)
        }
        Slot::Prize(p) => format!("prize{p}"),
        Slot::Stop => STOP.to_string(),
    }
}

/// Distribution of the new symbol when `reel` is spun in `reels`.
fn spin_outcomes(reels: &Reels, reel: usize, hooked: bool) -> Vec<(u8, f64)> {
    if !hooked {
        return (0..5u8).map(|s| (s, REEL_DIST[reel][s as usize])).collect();
    }
    match reel {
        0 | 2 => {
            let row = match reels[1] {
                Some(BAR) => 0,
                Some(HOOKED_BAR2) => 1,
                _ => 2,
            };
            let table = if reel == 0 { &HOOKED_REEL1 } else { &HOOKED_REEL3 };
            (0..5u8).map(|s| (s, table[row][s as usize])).collect()
        }
        _ => {
            let bar1 = reels[0] == Some(BAR);
            let bar3 = reels[2] == Some(BAR);
            let row = match (bar1, bar3) {
                (true, false) => 0,
                (false, true) => 1,
                (true, true) => 2,
                (false, false) => 3,
            };
            // column order: lemon, grape, cherry, bar 1, bar 2, apple
            let codes = [LEMON, GRAPE, CHERRY, BAR, HOOKED_BAR2, APPLE];
            codes
                .iter()
                .zip(HOOKED_REEL2[row])
                .map(|(&c, p)| (c, p))
                .collect()
        }
    }
}

fn moves(slot: &Slot, input: usize, n: u32, hooked: bool) -> Vec<(Slot, f64)> {
    match *slot {
        Slot::Config { reels, spins } => {
            if input == PAY {
                if reels.iter().all(Option::is_some) {
                    let shown_syms = reels.map(|r| shown(r.expect("all spun")));
                    return vec![(Slot::Prize(prize(shown_syms, hooked)), 1.0)];
                }
                return Vec::new();
            }
            if spins >= n {
                return Vec::new();
            }
            let unspun_after = reels
                .iter()
                .enumerate()
                .filter(|&(i, r)| i != input && r.is_none())
                .count() as u32;
            if unspun_after > n - spins - 1 {
                return Vec::new();
            }
            spin_outcomes(&reels, input, hooked)
                .into_iter()
                .filter(|&(_, p)| p > 0.0)
                .map(|(s, p)| {
                    let mut next = reels;
                    next[input] = Some(s);
                    (
                        Slot::Config {
                            reels: next,
                            spins: spins + 1,
                        },
                        p,
                    )
                })
                .collect()
        }
        Slot::Prize(_) | Slot::Stop if input == PAY => vec![(Slot::Stop, 1.0)],
        _ => Vec::new(),
    }
}

fn build(cfg: SlotConfig) -> Result<Lmdp> {
    if cfg.n_spins < 3 {
        return Err(Error::InvalidConfig(format!(
            "a slot machine needs at least 3 spins, got {}",
            cfg.n_spins
        )));
    }
    let hooked = cfg.variant == Variant::Hooked;
    let start = Slot::Config {
        reels: [None; 3],
        spins: 0,
    };
    let mut ids: HashMap<Slot, StateId> = HashMap::from([(start, 0)]);
    let mut slots = vec![start];
    let mut edges: Vec<(StateId, usize, StateId, f64)> = Vec::new();
    let mut queue = VecDeque::from([0]);
    while let Some(q) = queue.pop_front() {
        for input in 0..INPUTS.len() {
            for (next, p) in moves(&slots[q], input, cfg.n_spins, hooked) {
                let id = *ids.entry(next).or_insert_with(|| {
                    slots.push(next);
                    queue.push_back(slots.len() - 1);
                    slots.len() - 1
                });
                edges.push((q, input, id, p));
            }
        }
    }

    let labels: Vec<String> = slots.iter().map(label).collect();
    let mut distinct: Vec<&str> = Vec::new();
    let mut seen = HashMap::new();
    for l in &labels {
        if seen.insert(l.as_str(), ()).is_none() {
            distinct.push(l);
        }
    }
    let outputs = Alphabet::outputs(distinct)?;
    let states = slots
        .iter()
        .zip(&labels)
        .enumerate()
        .map(|(i, (slot, l))| StateRecord {
            id: i as u64,
            label: outputs.index_of(l).expect("label registered"),
            reward: match slot {
                Slot::Prize(p) => Some(*p as f64),
                _ => None,
            },
        })
        .collect();
    let mut m = Lmdp::new(Alphabet::new(INPUTS)?, outputs, 0, states)?;
    for (from, input, to, p) in edges {
        m.add_successor(from, input, Successor::new(to, p))?;
    }
    Ok(m)
}

/// The plain slot machine.
pub fn build_slot_machine(cfg: SlotConfig) -> Result<Lmdp> {
    if cfg.variant != Variant::Deterministic {
        return Err(Error::InvalidConfig("expected the deterministic variant".into()));
    }
    build(cfg)
}

/// The hooked slot machine; not deterministic in the labeled sense because
/// the two bars of reel 2 share a label.
pub fn build_hooked_slot_machine(cfg: SlotConfig) -> Result<Lmdp> {
    if cfg.variant != Variant::Hooked {
        return Err(Error::InvalidConfig("expected the hooked variant".into()));
    }
    build(cfg)
}

/// Builds either variant.
pub fn build_machine(cfg: SlotConfig) -> Result<Lmdp> {
    build(cfg)
}

/// Prize amount encoded in a `prizeP` label.
pub fn prize_value(label: &str) -> Option<f64> {
    label.strip_prefix("prize")?.parse().ok()
}

/// Sets each state's reward to the prize its label encodes (0 elsewhere).
/// Learned models carry labels but no rewards.
pub fn attach_prize_rewards(model: &mut Lmdp) {
    for q in 0..model.num_states() {
        let r = prize_value(model.label_str(q));
        model.set_reward(q, r);
    }
}

/// Labels of the 125 configurations where each reel has been spun once.
pub fn spun_once_configs() -> Vec<String> {
    let mut out = Vec::with_capacity(125);
    for a in SYMBOLS {
        for b in SYMBOLS {
            for c in SYMBOLS {
                out.push(format!("{a}_{b}_{c}_3"));
            }
        }
    }
    out
}

/// Maximal probability of showing three bars right after the next spin,
/// starting from a state labeled `config`; the maximum is also taken over
/// all states sharing that label. `None` if no state carries the label.
pub fn three_bars_after_next_spin(model: &Lmdp, config: &str) -> Option<f64> {
    let starts = model.states_labeled(config);
    if starts.is_empty() {
        return None;
    }
    let target: Vec<bool> = (0..model.num_states())
        .map(|q| {
            let l = model.label_str(q);
            l.starts_with("bar_bar_bar_")
        })
        .collect();
    let values = reach_probability_bounded_from(model, &target, Opt::Max, 1);
    starts.iter().map(|&q| values[q]).reduce(f64::max)
}

/// A three-state model over outputs `{A, B, C}` and inputs `{a, b}`; `b` is
/// disabled in the `C` state.
pub fn toy_model() -> Lmdp {
    let outputs = Alphabet::outputs(["A", "B", "C"]).expect("static alphabet");
    let states = (0..3)
        .map(|i| StateRecord {
            id: i as u64,
            label: i,
            reward: None,
        })
        .collect();
    let mut m = Lmdp::new(Alphabet::new(["a", "b"]).expect("static alphabet"), outputs, 0, states)
        .expect("static model");
    let edges = [
        (0, 0, 1, 0.7),
        (0, 0, 2, 0.3),
        (0, 1, 0, 0.6),
        (0, 1, 1, 0.4),
        (1, 0, 2, 0.5),
        (1, 0, 0, 0.5),
        (1, 1, 1, 0.8),
        (1, 1, 2, 0.2),
        (2, 0, 0, 1.0),
    ];
    for (q, a, t, p) in edges {
        m.add_successor(q, a, Successor::new(t, p)).expect("static model");
    }
    m
}
