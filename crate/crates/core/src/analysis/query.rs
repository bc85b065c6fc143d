//! Textual queries.
//!
//! ```text
//! query := ("Pmax" | "Pmin") "F" ["<=" k] pred
//!        | "Rmax" "F" pred ["or deadlock"]
//! pred  := "label in {" tok ("," tok)* "}"
//!        | "label ~ /" regex "/"
//!        | "prize >= " number
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use regex::Regex;

use super::Opt;
use crate::benchmarks::prize_value;
use crate::error::{Error, Result};
use crate::model::Lmdp;

/// A set of output labels.
#[derive(Debug, Clone)]
pub enum LabelPredicate {
    Labels(BTreeSet<String>),
    /// Labels of the form `prizeP` with `P ≥` the bound.
    PrizeAtLeast(f64),
    /// Labels matching the whole pattern.
    Pattern(Regex),
}

impl LabelPredicate {
    pub fn labels<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        LabelPredicate::Labels(tokens.into_iter().map(Into::into).collect())
    }

    pub fn pattern(re: &str) -> Result<Self> {
        Regex::new(&format!("^(?:{re})$"))
            .map(LabelPredicate::Pattern)
            .map_err(|e| Error::QueryParse {
                query: re.to_string(),
                reason: e.to_string(),
            })
    }

    pub fn matches(&self, label: &str) -> bool {
        match self {
            LabelPredicate::Labels(set) => set.contains(label),
            LabelPredicate::PrizeAtLeast(l) => prize_value(label).is_some_and(|p| p >= *l),
            LabelPredicate::Pattern(re) => re.is_match(label),
        }
    }

    /// One flag per state of `m`.
    pub fn mark(&self, m: &Lmdp) -> Vec<bool> {
        (0..m.num_states())
            .map(|q| self.matches(m.label_str(q)))
            .collect()
    }
}

impl fmt::Display for LabelPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelPredicate::Labels(set) => {
                let toks: Vec<&str> = set.iter().map(String::as_str).collect();
                write!(f, "label in {{{}}}", toks.join(","))
            }
            LabelPredicate::PrizeAtLeast(l) => write!(f, "prize >= {l}"),
            LabelPredicate::Pattern(re) => {
                let s = re.as_str();
                write!(f, "label ~ /{}/", &s[4..s.len() - 2])
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReachQuery {
    pub target: LabelPredicate,
    pub opt: Opt,
    pub step_bound: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct RewardQuery {
    pub stop: LabelPredicate,
    /// Also stop in states without enabled inputs.
    pub deadlocks_terminal: bool,
}

#[derive(Debug, Clone)]
pub enum Query {
    Reach(ReachQuery),
    Reward(RewardQuery),
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::Reach(q) => {
                let op = match q.opt {
                    Opt::Max => "Pmax",
                    Opt::Min => "Pmin",
                };
                match q.step_bound {
                    Some(k) => write!(f, "{op} F<={k} {}", q.target),
                    None => write!(f, "{op} F {}", q.target),
                }
            }
            Query::Reward(q) => {
                write!(f, "Rmax F {}", q.stop)?;
                if q.deadlocks_terminal {
                    f.write_str(" or deadlock")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Query {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let fail = |reason: &str| Error::QueryParse {
            query: text.to_string(),
            reason: reason.to_string(),
        };
        let s = text.trim();
        let (op, rest) = s.split_once(char::is_whitespace).ok_or_else(|| fail("missing operand"))?;
        let rest = rest.trim_start();
        let rest = rest.strip_prefix('F').ok_or_else(|| fail("expected F after the operator"))?;
        let (step_bound, rest) = match rest.trim_start().strip_prefix("<=") {
            Some(r) => {
                let r = r.trim_start();
                let end = r.find(|c: char| !c.is_ascii_digit()).unwrap_or(r.len());
                let k = r[..end].parse().map_err(|_| fail("step bound is not an integer"))?;
                if k == 0 {
                    return Err(fail("step bound must be positive"));
                }
                (Some(k), &r[end..])
            }
            None => {
                if !rest.starts_with(char::is_whitespace) {
                    return Err(fail("expected whitespace after F"));
                }
                (None, rest)
            }
        };
        let pred_text = rest.trim();
        match op {
            "Pmax" | "Pmin" => Ok(Query::Reach(ReachQuery {
                target: parse_predicate(pred_text).map_err(|r| fail(&r))?,
                opt: if op == "Pmax" { Opt::Max } else { Opt::Min },
                step_bound,
            })),
            "Rmax" => {
                if step_bound.is_some() {
                    return Err(fail("reward queries take no step bound"));
                }
                let (pred_text, deadlocks) = match pred_text.strip_suffix("or deadlock") {
                    Some(p) => (p.trim_end(), true),
                    None => (pred_text, false),
                };
                Ok(Query::Reward(RewardQuery {
                    stop: parse_predicate(pred_text).map_err(|r| fail(&r))?,
                    deadlocks_terminal: deadlocks,
                }))
            }
            _ => Err(fail("operator must be Pmax, Pmin or Rmax")),
        }
    }
}

fn parse_predicate(s: &str) -> std::result::Result<LabelPredicate, String> {
    if let Some(r) = s.strip_prefix("label") {
        let r = r.trim_start();
        if let Some(set) = r.strip_prefix("in") {
            let inner = set
                .trim()
                .strip_prefix('{')
                .and_then(|x| x.strip_suffix('}'))
                .ok_or("label set must be written {a,b,...}")?;
            let toks: BTreeSet<String> = inner
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(String::from)
                .collect();
            if toks.is_empty() {
                return Err("empty label set".into());
            }
            return Ok(LabelPredicate::Labels(toks));
        }
        if let Some(re) = r.strip_prefix('~') {
            let re = re
                .trim()
                .strip_prefix('/')
                .and_then(|x| x.strip_suffix('/'))
                .ok_or("pattern must be written /regex/")?;
            return LabelPredicate::pattern(re).map_err(|e| e.to_string());
        }
        return Err("expected `in` or `~` after label".into());
    }
    if let Some(r) = s.strip_prefix("prize") {
        let bound = r
            .trim_start()
            .strip_prefix(">=")
            .ok_or("expected >= after prize")?
            .trim();
        return bound
            .parse()
            .map(LabelPredicate::PrizeAtLeast)
            .map_err(|_| format!("`{bound}` is not a number"));
    }
    Err(format!("unknown predicate `{s}`"))
}

/// Parses one query per line; blank lines and `#` comments are skipped.
pub fn parse_suite(text: &str) -> Result<Vec<Query>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::parse)
        .collect()
}
