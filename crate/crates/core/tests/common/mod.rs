#![allow(dead_code)]

use mdplearn::analysis::{max_expected_reward, reach_values, LabelPredicate, Opt, RewardQuery};
use mdplearn::fpta::Iofpta;
use mdplearn::learner::{compatible, ioalergia, merge, Epsilon};
use mdplearn::tracegen::{generate, GenConfig};
use mdplearn::{Alphabet, Error, Lmdp, MemorylessScheduler, StateRecord, Successor};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LABELS: [&str; 4] = ["A", "B", "C", "T"];

fn random_split(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

fn states_with(outputs: &Alphabet, labels: &[usize], rng: &mut ChaCha8Rng) -> Vec<StateRecord> {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| StateRecord {
            id: i as u64,
            label: outputs.index_of(LABELS[l]).unwrap(),
            reward: Some(rng.random_range(0..5) as f64),
        })
        .collect()
}

/// Up to 5 states, inputs a and b, arbitrary successors; state 0 is initial.
pub fn random_mdp(seed: u64) -> Lmdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=5usize);
    let outputs = Alphabet::outputs(LABELS).unwrap();
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..LABELS.len())).collect();
    let states = states_with(&outputs, &labels, &mut rng);
    let mut m = Lmdp::new(Alphabet::new(["a", "b"]).unwrap(), outputs, 0, states).unwrap();
    for q in 0..n {
        for a in 0..2 {
            if rng.random_bool(0.25) {
                continue;
            }
            let k = rng.random_range(1..=n.min(3));
            let mut targets: Vec<usize> = (0..n).collect();
            for i in 0..k {
                let j = rng.random_range(i..n);
                targets.swap(i, j);
            }
            for (t, p) in targets[..k].iter().zip(random_split(&mut rng, k)) {
                m.add_successor(q, a, Successor::new(*t, p)).unwrap();
            }
        }
    }
    m
}

/// Like [`random_mdp`] but the last state is an absorbing `stop` and
/// successors never lead backwards, so most schedulers stop surely.
pub fn random_stopping_mdp(seed: u64) -> Lmdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let n = rng.random_range(2..=5usize);
    let outputs = Alphabet::outputs(["A", "B", "C", "T", "stop"]).unwrap();
    let mut states: Vec<StateRecord> = (0..n)
        .map(|i| StateRecord {
            id: i as u64,
            label: rng.random_range(0..4),
            reward: Some(rng.random_range(0..5) as f64),
        })
        .collect();
    states[n - 1].label = outputs.index_of("stop").unwrap();
    states[n - 1].reward = None;
    let mut m = Lmdp::new(Alphabet::new(["a", "b"]).unwrap(), outputs, 0, states).unwrap();
    m.add_successor(n - 1, 0, Successor::new(n - 1, 1.0)).unwrap();
    for q in 0..n - 1 {
        for a in 0..2 {
            if a == 1 && rng.random_bool(0.3) {
                continue;
            }
            let pool: Vec<usize> = (q..n).collect();
            let k = rng.random_range(1..=pool.len().min(3));
            let mut pool = pool;
            for i in 0..k {
                let j = rng.random_range(i..pool.len());
                pool.swap(i, j);
            }
            for (t, p) in pool[..k].iter().zip(random_split(&mut rng, k)) {
                m.add_successor(q, a, Successor::new(*t, p)).unwrap();
            }
        }
    }
    m
}

/// A deterministic model: successors of each `(q, α)` carry distinct labels.
pub fn random_dlmdp(seed: u64) -> Lmdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=5usize);
    let outputs = Alphabet::outputs(["A", "B", "C"]).unwrap();
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
    let states = states_with(&outputs, &labels, &mut rng);
    let mut m = Lmdp::new(Alphabet::new(["a", "b"]).unwrap(), outputs, 0, states).unwrap();
    for q in 0..n {
        for a in 0..2 {
            if rng.random_bool(0.2) {
                continue;
            }
            // one candidate state per label
            let mut chosen: Vec<usize> = Vec::new();
            for l in 0..3 {
                let with_label: Vec<usize> = (0..n).filter(|&s| labels[s] == l).collect();
                if !with_label.is_empty() && rng.random_bool(0.6) {
                    chosen.push(with_label[rng.random_range(0..with_label.len())]);
                }
            }
            if chosen.is_empty() {
                chosen.push(rng.random_range(0..n));
            }
            let mut probs = random_split(&mut rng, chosen.len() + 1);
            // occasionally an explicit err loop takes some mass
            let err_mass = if rng.random_bool(0.2) { probs.pop().unwrap() } else { 0.0 };
            let scale = 1.0 - err_mass;
            let total: f64 = probs.iter().take(chosen.len()).sum();
            for (t, p) in chosen.iter().zip(&probs) {
                m.add_successor(q, a, Successor::new(*t, p / total * scale)).unwrap();
            }
            if err_mass > 0.0 {
                m.add_successor(q, a, Successor::err_loop(q, err_mass)).unwrap();
            }
        }
    }
    m
}

/// Every memoryless scheduler over the enabled inputs.
pub fn all_schedulers(m: &Lmdp) -> Vec<MemorylessScheduler> {
    let acts: Vec<Vec<usize>> = (0..m.num_states()).map(|q| m.enabled_actions(q).unwrap()).collect();
    let mut out = vec![MemorylessScheduler::default()];
    for (q, a) in acts.iter().enumerate() {
        if a.is_empty() {
            continue;
        }
        out = out
            .into_iter()
            .flat_map(|s| {
                a.iter().map(move |&x| {
                    let mut s = s.clone();
                    s.choice.insert(q, x);
                    s
                })
            })
            .collect();
    }
    out
}

/// Transition matrix of the chain induced by `s`; deadlocks have empty rows.
pub fn induced_chain(m: &Lmdp, s: &MemorylessScheduler) -> DMatrix<f64> {
    let n = m.num_states();
    let mut p = DMatrix::zeros(n, n);
    for q in 0..n {
        if let Some(a) = s.get(q) {
            for succ in m.successors(q, a) {
                p[(q, succ.to)] += succ.prob;
            }
        }
    }
    p
}

/// Reachability probabilities of `target` in the chain `p`, by a linear solve
/// over the states that reach the target with positive probability.
pub fn chain_reach(p: &DMatrix<f64>, target: &[bool]) -> Vec<f64> {
    let n = target.len();
    let mut can = target.to_vec();
    let mut changed = true;
    while changed {
        changed = false;
        for q in 0..n {
            if !can[q] && (0..n).any(|s| p[(q, s)] > 0.0 && can[s]) {
                can[q] = true;
                changed = true;
            }
        }
    }
    let idx: Vec<usize> = (0..n).filter(|&q| can[q] && !target[q]).collect();
    let mut x = vec![0.0; n];
    for q in 0..n {
        if target[q] {
            x[q] = 1.0;
        }
    }
    if idx.is_empty() {
        return x;
    }
    let k = idx.len();
    let mut a = DMatrix::<f64>::identity(k, k);
    let mut b = DVector::<f64>::zeros(k);
    for (i, &q) in idx.iter().enumerate() {
        for (j, &s) in idx.iter().enumerate() {
            a[(i, j)] -= p[(q, s)];
        }
        b[i] = (0..n).filter(|&s| target[s]).map(|s| p[(q, s)]).sum();
    }
    let sol = a.lu().solve(&b).expect("nonsingular reach system");
    for (i, &q) in idx.iter().enumerate() {
        x[q] = sol[i];
    }
    x
}

/// Expected reward accrued on entering states until `stop`, from the initial
/// state; `None` if the chain does not stop surely.
pub fn chain_reward(m: &Lmdp, p: &DMatrix<f64>, stop: &[bool]) -> Option<f64> {
    let n = stop.len();
    let reach = chain_reach(p, stop);
    // states visited from the initial state
    let mut seen = vec![false; n];
    let mut stack = vec![m.initial()];
    seen[m.initial()] = true;
    while let Some(q) = stack.pop() {
        if stop[q] {
            continue;
        }
        for s in 0..n {
            if p[(q, s)] > 0.0 && !seen[s] {
                seen[s] = true;
                stack.push(s);
            }
        }
    }
    if (0..n).any(|q| seen[q] && reach[q] < 1.0 - 1e-9) {
        return None;
    }
    let idx: Vec<usize> = (0..n).filter(|&q| seen[q] && !stop[q]).collect();
    if idx.is_empty() {
        return Some(0.0);
    }
    let k = idx.len();
    let mut a = DMatrix::<f64>::identity(k, k);
    let mut b = DVector::<f64>::zeros(k);
    for (i, &q) in idx.iter().enumerate() {
        for (j, &s) in idx.iter().enumerate() {
            a[(i, j)] -= p[(q, s)];
        }
        b[i] = (0..n).map(|s| p[(q, s)] * m.reward(s)).sum();
    }
    let sol = a.lu().solve(&b).expect("nonsingular reward system");
    let pos = idx.iter().position(|&q| q == m.initial()).unwrap();
    Some(sol[pos])
}

pub fn marks(m: &Lmdp, label: &str) -> Vec<bool> {
    (0..m.num_states()).map(|q| m.label_str(q) == label).collect()
}

/// Compares value iteration with scheduler enumeration on one model; returns
/// a description of the first disagreement.
pub fn check_against_enumeration(seed: u64) -> Result<(), String> {
    let m = random_mdp(seed);
    let target = marks(&m, "T");
    let scheds = all_schedulers(&m);
    let per: Vec<Vec<f64>> = scheds
        .iter()
        .map(|s| chain_reach(&induced_chain(&m, s), &target))
        .collect();
    for opt in [Opt::Max, Opt::Min] {
        let vi = reach_values(&m, &target, opt, None);
        for q in 0..m.num_states() {
            let brute = per.iter().map(|v| v[q]);
            let brute = match opt {
                Opt::Max => brute.fold(f64::NEG_INFINITY, f64::max),
                Opt::Min => brute.fold(f64::INFINITY, f64::min),
            };
            if (vi.values[q] - brute).abs() > 1e-6 {
                return Err(format!("seed {seed} {opt:?} state {q}: vi {} brute {brute}", vi.values[q]));
            }
        }
        let witness = chain_reach(&induced_chain(&m, &vi.scheduler), &target)[m.initial()];
        if (witness - vi.value_at_initial).abs() > 1e-6 {
            return Err(format!("seed {seed} {opt:?}: scheduler gives {witness}, value {}", vi.value_at_initial));
        }
    }

    let m = random_stopping_mdp(seed);
    let stop = marks(&m, "stop");
    let rq = RewardQuery {
        stop: LabelPredicate::labels(["stop"]),
        deadlocks_terminal: false,
    };
    let rewards: Vec<Option<f64>> = all_schedulers(&m)
        .iter()
        .map(|s| chain_reward(&m, &induced_chain(&m, s), &stop))
        .collect();
    match max_expected_reward(&m, &rq) {
        Ok(r) => {
            if rewards.iter().any(Option::is_none) {
                return Err(format!("seed {seed}: a scheduler never stops but reward was computed"));
            }
            let brute = rewards.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
            if (r.value_at_initial - brute).abs() > 1e-6 {
                return Err(format!("seed {seed} Rmax: vi {} brute {brute}", r.value_at_initial));
            }
            let witness = chain_reward(&m, &induced_chain(&m, &r.scheduler), &stop);
            if witness.map_or(true, |w| (w - r.value_at_initial).abs() > 1e-6) {
                return Err(format!("seed {seed} Rmax: witness {witness:?}"));
            }
        }
        Err(Error::NotAlmostSure { witness, .. }) => {
            if rewards.iter().all(Option::is_some) {
                return Err(format!("seed {seed}: every scheduler stops but reward was refused"));
            }
            let p = chain_reach(&induced_chain(&m, &witness), &stop)[m.initial()];
            if p >= 1.0 - 1e-9 {
                return Err(format!("seed {seed}: witness stops surely"));
            }
        }
        Err(e) => return Err(format!("seed {seed}: {e}")),
    }
    Ok(())
}

/// Structural checks of the learner on one small random data set.
pub fn check_learner_properties(seed: u64, n_seqs: usize, eps: f64) -> Result<(), String> {
    let source = random_dlmdp(seed);
    let cfg = GenConfig::new(n_seqs, 0.25, seed);
    let d = generate(&source, &cfg).map_err(|e| e.to_string())?;
    let eps = Epsilon::new(eps).unwrap();
    let r = ioalergia(&d, eps).map_err(|e| e.to_string())?;
    let m = &r.model;
    if !m.is_deterministic() {
        return Err("learned model is not deterministic".into());
    }
    if let Some(v) = m.validate().first() {
        return Err(format!("invalid learned model: {v}"));
    }
    if r.red_count != m.num_states() {
        return Err("red count differs from state count".into());
    }
    for (i, s) in d.sequences.iter().enumerate() {
        if m.string_probability(s).unwrap() <= 0.0 {
            return Err(format!("training sequence {i} has probability 0"));
        }
    }

    let t = Iofpta::build(&d).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    for _ in 0..10 {
        let x = rng.random_range(0..t.len());
        let y = rng.random_range(0..t.len());
        if !compatible(&t, x, x, eps) {
            return Err(format!("node {x} not compatible with itself"));
        }
        if compatible(&t, x, y, eps) != compatible(&t, y, x, eps) {
            return Err(format!("compatibility of {x} and {y} is not symmetric"));
        }
    }
    let root_label = t.node(Iofpta::ROOT).label;
    if let Some(qb) = (1..t.len()).find(|&n| t.node(n).label == root_label) {
        let mut a = t.clone();
        let before = a.total_steps();
        merge(&mut a, Iofpta::ROOT, qb).map_err(|e| e.to_string())?;
        if a.total_steps() != before {
            return Err(format!("merge changed total frequency {before} → {}", a.total_steps()));
        }
    }
    Ok(())
}

/// Learns the toy model back from 100k traces and compares it with the source.
/// Returns a one-line summary on success.
pub fn check_toy_recovery() -> Result<String, String> {
    use mdplearn::benchmarks::toy_model;
    use mdplearn::learner::{bic, fpta_model, golden_section_search, ioalergia_on, LearnOptions, SearchConfig};

    let src = toy_model();
    let d = generate(&src, &GenConfig::new(100_000, 0.1, 7)).map_err(|e| e.to_string())?;
    let t = Iofpta::build(&d).map_err(|e| e.to_string())?;
    let opts = LearnOptions::default();
    let learn = |eps: f64| {
        ioalergia_on(&t, &d, Epsilon::new(eps).unwrap(), opts).map_err(|e| e.to_string())
    };
    let r = learn(0.05)?;
    let m = &r.model;
    if m.num_states() != 3 {
        return Err(format!("learned {} states, expected 3", m.num_states()));
    }
    let mut by_label = [usize::MAX; 3];
    for q in 0..3 {
        let l = src.outputs().lookup(m.label_str(q)).map_err(|e| e.to_string())?;
        if l > 2 || by_label[l] != usize::MAX {
            return Err(format!("label {} appears twice or is unknown", m.label_str(q)));
        }
        by_label[l] = q;
    }
    if m.label_str(m.initial()) != "A" {
        return Err("initial state is not labeled A".into());
    }
    let mut worst: f64 = 0.0;
    for s in 0..3 {
        for a in 0..2 {
            let q = by_label[s];
            if src.is_enabled(s, a) != m.is_enabled(q, a) {
                return Err(format!("input {a} enabled mismatch at {}", m.label_str(q)));
            }
            for t_src in 0..3 {
                let p_src: f64 = src.successors(s, a).iter().filter(|x| x.to == t_src).map(|x| x.prob).sum();
                let p_m: f64 = m
                    .successors(q, a)
                    .iter()
                    .filter(|x| !x.err && x.to == by_label[t_src])
                    .map(|x| x.prob)
                    .sum();
                worst = worst.max((p_src - p_m).abs());
            }
        }
    }
    if worst > 0.02 {
        return Err(format!("probability error {worst:.4} exceeds 0.02"));
    }

    let tree = fpta_model(&t, &d, opts).map_err(|e| e.to_string())?;
    let tree_bic = bic(&tree, &d).map_err(|e| e.to_string())?;
    if r.bic <= tree_bic {
        return Err(format!("learned BIC {} not above tree BIC {tree_bic}", r.bic));
    }

    let small = learn(1e-4)?.model.num_states();
    let large = learn(0.9)?.model.num_states();
    if small > large {
        return Err(format!("|Q| at 1e-4 is {small}, at 0.9 is {large}"));
    }

    let search = golden_section_search(&d, &SearchConfig::default()).map_err(|e| e.to_string())?;
    let mut grid_best = f64::NEG_INFINITY;
    for eps in [0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0] {
        grid_best = grid_best.max(learn(eps)?.bic);
    }
    if search.best.bic < grid_best - 1e-9 * grid_best.abs() {
        return Err(format!("search BIC {} below grid best {grid_best}", search.best.bic));
    }
    Ok(format!(
        "3 states, max |Δp| {worst:.4}, BIC {:.1} > tree {tree_bic:.1}, search {:.1} >= grid {grid_best:.1}",
        r.bic, search.best.bic
    ))
}
