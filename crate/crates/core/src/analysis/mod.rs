//! Quantitative analysis of labeled MDPs by value iteration.
//!
//! Reachability is optimised over all schedulers (`max` or `min`), with an
//! optional step bound. Expected rewards are accumulated on entering a state
//! and maximised until an absorbing stop set is reached.

mod accuracy;
mod compare;
mod query;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Lmdp, MemorylessScheduler, StateId};

pub use accuracy::{optimal_action_accuracy, AccuracyOptions, AccuracyReport, ConfigAccuracy};
pub use compare::{compare_models, rows_to_tsv, CompareRow};
pub use query::{parse_suite, LabelPredicate, Query, ReachQuery, RewardQuery};

/// Absolute residual at which value iteration stops.
pub const TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 1_000_000;

// Q-values closer than this to the optimum count as optimal when a scheduler
// is read off converged values.
const CHOICE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Opt {
    Max,
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueResult {
    pub value_at_initial: f64,
    pub values: Vec<f64>,
    pub scheduler: MemorylessScheduler,
    pub iterations: usize,
    pub residual: f64,
}

struct Action {
    input: usize,
    succ: Vec<(StateId, f64)>,
}

/// Enabled actions with their positive-probability successors.
pub(crate) struct Compiled {
    actions: Vec<Vec<Action>>,
}

impl Compiled {
    pub(crate) fn new(m: &Lmdp) -> Self {
        let actions = (0..m.num_states())
            .map(|q| {
                m.enabled_iter(q)
                    .map(|a| Action {
                        input: a,
                        succ: m
                            .successors(q, a)
                            .iter()
                            .filter(|s| s.prob > 0.0)
                            .map(|s| (s.to, s.prob))
                            .collect(),
                    })
                    .collect()
            })
            .collect();
        Compiled { actions }
    }

    fn len(&self) -> usize {
        self.actions.len()
    }

    fn predecessors(&self) -> Vec<Vec<StateId>> {
        let mut pred = vec![Vec::new(); self.len()];
        for (q, acts) in self.actions.iter().enumerate() {
            for act in acts {
                for &(s, _) in &act.succ {
                    pred[s].push(q);
                }
            }
        }
        pred
    }

    fn q_value(act: &Action, values: &[f64]) -> f64 {
        act.succ.iter().map(|&(s, p)| p * values[s]).sum()
    }

    fn optimum(&self, q: StateId, values: &[f64], opt: Opt) -> f64 {
        let qs = self.actions[q].iter().map(|a| Self::q_value(a, values));
        match opt {
            Opt::Max => qs.fold(f64::NEG_INFINITY, f64::max),
            Opt::Min => qs.fold(f64::INFINITY, f64::min),
        }
    }

    /// Smallest input whose Q-value is within [`CHOICE_SLACK`] of the optimum.
    fn argopt(&self, q: StateId, values: &[f64], opt: Opt) -> Option<usize> {
        let best = self.optimum(q, values, opt);
        self.actions[q]
            .iter()
            .find(|a| {
                let v = Self::q_value(a, values);
                match opt {
                    Opt::Max => v >= best - CHOICE_SLACK,
                    Opt::Min => v <= best + CHOICE_SLACK,
                }
            })
            .map(|a| a.input)
    }
}

/// States from which `target` is reachable in the transition graph.
fn can_reach(c: &Compiled, target: &[bool], through: impl Fn(StateId) -> bool) -> Vec<bool> {
    let pred = c.predecessors();
    let mut seen = target.to_vec();
    let mut stack: Vec<StateId> = (0..c.len()).filter(|&q| target[q]).collect();
    while let Some(s) = stack.pop() {
        for &p in &pred[s] {
            if !seen[p] && through(p) {
                seen[p] = true;
                stack.push(p);
            }
        }
    }
    seen
}

/// States where some scheduler avoids `target` forever.
fn avoidable(c: &Compiled, target: &[bool]) -> Vec<bool> {
    let mut z: Vec<bool> = target.iter().map(|&t| !t).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for q in 0..c.len() {
            if z[q]
                && !c.actions[q].is_empty()
                && !c.actions[q].iter().any(|a| a.succ.iter().all(|&(s, _)| z[s]))
            {
                z[q] = false;
                changed = true;
            }
        }
    }
    z
}

/// States where some scheduler reaches `target` with probability 1.
fn surely_reachable(c: &Compiled, target: &[bool]) -> Vec<bool> {
    let mut u = vec![true; c.len()];
    loop {
        // states of `u` that can be driven towards the target without leaving `u`
        let mut r = target.to_vec();
        let mut changed = true;
        while changed {
            changed = false;
            for q in 0..c.len() {
                if !r[q]
                    && u[q]
                    && c.actions[q].iter().any(|a| {
                        a.succ.iter().all(|&(s, _)| u[s]) && a.succ.iter().any(|&(s, _)| r[s])
                    })
                {
                    r[q] = true;
                    changed = true;
                }
            }
        }
        if r == u {
            return u;
        }
        u = r;
    }
}

/// States where every scheduler reaches `target` with probability 1.
fn certainly_reached(c: &Compiled, target: &[bool]) -> Vec<bool> {
    let escape = avoidable(c, target);
    can_reach(c, &escape, |p| !target[p]).iter().map(|&r| !r).collect()
}

/// Reachability of `target` (one flag per state) on a model assumed valid.
pub fn reach_values(m: &Lmdp, target: &[bool], opt: Opt, step_bound: Option<u32>) -> ValueResult {
    let c = Compiled::new(m);
    match step_bound {
        Some(k) => bounded(&c, m.initial(), target, opt, k),
        None => unbounded(&c, m.initial(), target, opt),
    }
}

/// Per-state values of [`reach_values`] with a step bound.
pub fn reach_probability_bounded_from(m: &Lmdp, target: &[bool], opt: Opt, k: u32) -> Vec<f64> {
    reach_values(m, target, opt, Some(k)).values
}

/// Evaluates a reachability query.
pub fn reach_probability(m: &Lmdp, q: &ReachQuery) -> Result<ValueResult> {
    m.ensure_valid()?;
    let target = q.target.mark(m);
    Ok(reach_values(m, &target, q.opt, q.step_bound))
}

fn bounded(c: &Compiled, init: StateId, target: &[bool], opt: Opt, k: u32) -> ValueResult {
    let mut values: Vec<f64> = target.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
    let mut residual = 0.0;
    let mut previous = values.clone();
    for _ in 0..k {
        previous.clone_from(&values);
        residual = 0.0f64;
        for q in 0..c.len() {
            if target[q] || c.actions[q].is_empty() {
                continue;
            }
            let v = c.optimum(q, &previous, opt);
            residual = residual.max((v - previous[q]).abs());
            values[q] = v;
        }
    }
    let mut scheduler = MemorylessScheduler::default();
    for q in 0..c.len() {
        let basis = if target[q] || k == 0 { &values } else { &previous };
        if let Some(a) = c.argopt(q, basis, opt) {
            scheduler.choice.insert(q, a);
        }
    }
    ValueResult {
        value_at_initial: values[init],
        values,
        scheduler,
        iterations: k as usize,
        residual,
    }
}

fn unbounded(c: &Compiled, init: StateId, target: &[bool], opt: Opt) -> ValueResult {
    let zero = match opt {
        Opt::Max => can_reach(c, target, |_| true).iter().map(|&r| !r).collect(),
        Opt::Min => avoidable(c, target),
    };
    let one = match opt {
        Opt::Max => surely_reachable(c, target),
        Opt::Min => certainly_reached(c, target),
    };
    let free: Vec<StateId> = (0..c.len())
        .filter(|&q| !one[q] && !zero[q] && !c.actions[q].is_empty())
        .collect();
    let mut values: Vec<f64> = one.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
    let mut next = values.clone();
    let mut iterations = 0;
    let mut residual = 0.0f64;
    while iterations < MAX_ITERATIONS {
        residual = 0.0;
        for &q in &free {
            let v = c.optimum(q, &values, opt);
            residual = residual.max((v - values[q]).abs());
            next[q] = v;
        }
        std::mem::swap(&mut values, &mut next);
        iterations += 1;
        if residual < TOLERANCE {
            break;
        }
    }
    let scheduler = match opt {
        Opt::Max => max_scheduler(c, target, &values),
        Opt::Min => min_scheduler(c, &zero, &values),
    };
    ValueResult {
        value_at_initial: values[init],
        values,
        scheduler,
        iterations,
        residual,
    }
}

/// Optimal actions alone may cycle without progress (e.g. a self-loop ties
/// with a move to the target), so choices are fixed outward from the target:
/// a state picks the smallest optimal input with a successor already decided.
fn max_scheduler(c: &Compiled, target: &[bool], values: &[f64]) -> MemorylessScheduler {
    let mut sched = MemorylessScheduler::default();
    let mut done = target.to_vec();
    let mut changed = true;
    while changed {
        changed = false;
        for q in 0..c.len() {
            if done[q] || values[q] <= 0.0 {
                continue;
            }
            let best = c.optimum(q, values, Opt::Max);
            let pick = c.actions[q].iter().find(|a| {
                Compiled::q_value(a, values) >= best - CHOICE_SLACK
                    && a.succ.iter().any(|&(s, _)| done[s])
            });
            if let Some(a) = pick {
                sched.choice.insert(q, a.input);
                done[q] = true;
                changed = true;
            }
        }
    }
    for q in 0..c.len() {
        if !sched.choice.contains_key(&q) {
            if let Some(a) = c.argopt(q, values, Opt::Max) {
                sched.choice.insert(q, a);
            }
        }
    }
    sched
}

/// States that can avoid the target keep doing so; elsewhere the argmin.
fn min_scheduler(c: &Compiled, avoid: &[bool], values: &[f64]) -> MemorylessScheduler {
    let mut sched = MemorylessScheduler::default();
    for q in 0..c.len() {
        let stay = avoid[q]
            .then(|| {
                c.actions[q]
                    .iter()
                    .find(|a| a.succ.iter().all(|&(s, _)| avoid[s]))
                    .map(|a| a.input)
            })
            .flatten();
        if let Some(a) = stay.or_else(|| c.argopt(q, values, Opt::Min)) {
            sched.choice.insert(q, a);
        }
    }
    sched
}

/// States where the stop set of `q` is entered.
pub(crate) fn terminal_states(m: &Lmdp, c: &Compiled, q: &RewardQuery) -> Vec<bool> {
    (0..m.num_states())
        .map(|s| q.stop.matches(m.label_str(s)) || (q.deadlocks_terminal && c.actions[s].is_empty()))
        .collect()
}

/// Maximal expected reward collected before stopping, for every state from
/// which stopping is certain under all schedulers; other states get NaN.
/// Unlike [`max_expected_reward`] the initial state is not required to stop
/// almost surely.
pub fn expected_reward_values(m: &Lmdp, q: &RewardQuery) -> Result<ValueResult> {
    m.ensure_valid()?;
    let c = Compiled::new(m);
    let terminal = terminal_states(m, &c, q);
    Ok(reward_iteration(m, &c, &terminal, q)?.0)
}

fn reward_iteration(
    m: &Lmdp,
    c: &Compiled,
    terminal: &[bool],
    q: &RewardQuery,
) -> Result<(ValueResult, Vec<bool>)> {
    for s in (0..m.num_states()).filter(|&s| q.stop.matches(m.label_str(s))) {
        let leaves = c.actions[s]
            .iter()
            .any(|a| a.succ.iter().any(|&(t, _)| !q.stop.matches(m.label_str(t))));
        if leaves {
            return Err(Error::InvalidModel(format!(
                "stop state {s} ({}) is not absorbing",
                m.label_str(s)
            )));
        }
    }
    let certain = certainly_reached(c, terminal);
    let free: Vec<StateId> = (0..c.len())
        .filter(|&s| certain[s] && !terminal[s])
        .collect();
    let rewards: Vec<f64> = (0..m.num_states()).map(|s| m.reward(s)).collect();
    let gain = |act: &Action, v: &[f64]| -> f64 {
        act.succ.iter().map(|&(t, p)| p * (rewards[t] + v[t])).sum()
    };

    let mut values: Vec<f64> = (0..c.len())
        .map(|s| if certain[s] { 0.0 } else { f64::NAN })
        .collect();
    let mut next = values.clone();
    let mut iterations = 0;
    let mut residual = 0.0f64;
    while iterations < MAX_ITERATIONS && !free.is_empty() {
        residual = 0.0;
        for &s in &free {
            let v = c.actions[s]
                .iter()
                .map(|a| gain(a, &values))
                .fold(f64::NEG_INFINITY, f64::max);
            residual = residual.max((v - values[s]).abs());
            next[s] = v;
        }
        std::mem::swap(&mut values, &mut next);
        iterations += 1;
        if residual < TOLERANCE {
            break;
        }
    }
    let mut scheduler = MemorylessScheduler::default();
    for &s in &free {
        let qs: Vec<f64> = c.actions[s].iter().map(|a| gain(a, &values)).collect();
        let best = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if let Some(i) = qs.iter().position(|&v| v >= best - CHOICE_SLACK) {
            scheduler.choice.insert(s, c.actions[s][i].input);
        }
    }
    let result = ValueResult {
        value_at_initial: values[m.initial()],
        values,
        scheduler,
        iterations,
        residual,
    };
    Ok((result, certain))
}

/// Maximal expected reward collected until the stop set is entered.
///
/// Fails with [`Error::NotAlmostSure`] when some scheduler avoids the stop set
/// with positive probability from the initial state; the error carries the
/// minimising scheduler.
pub fn max_expected_reward(m: &Lmdp, q: &RewardQuery) -> Result<ValueResult> {
    m.ensure_valid()?;
    let c = Compiled::new(m);
    let terminal = terminal_states(m, &c, q);
    let (result, certain) = reward_iteration(m, &c, &terminal, q)?;
    if !certain[m.initial()] {
        let min = unbounded(&c, m.initial(), &terminal, Opt::Min);
        return Err(Error::NotAlmostSure {
            probability: min.value_at_initial,
            witness: min.scheduler,
        });
    }
    Ok(result)
}

/// `Σ τ(q, α, q′)·(r(q′) + V(q′))` for each enabled input `α` of `q`.
pub fn reward_q_values(m: &Lmdp, values: &[f64], q: StateId) -> Vec<(usize, f64)> {
    m.enabled_iter(q)
        .map(|a| {
            let v = m
                .successors(q, a)
                .iter()
                .filter(|s| s.prob > 0.0)
                .map(|s| s.prob * (m.reward(s.to) + values[s.to]))
                .sum();
            (a, v)
        })
        .collect()
}
