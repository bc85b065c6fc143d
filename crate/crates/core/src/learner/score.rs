//! Model selection: BIC scoring and golden-section search over ε.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ioalergia_on, Epsilon, LearnOptions, LearnResult};
use crate::error::{Error, Result};
use crate::fpta::Iofpta;
use crate::model::Lmdp;
use crate::tracegen::Dataset;

/// Natural-log likelihood of every sequence of `d` under `model`.
pub fn log_likelihood(model: &Lmdp, d: &Dataset) -> Result<f64> {
    if !model.is_deterministic() {
        return Err(Error::NotDeterministic);
    }
    // summed sequentially so the result does not depend on thread count
    let per_seq: Vec<f64> = d
        .sequences
        .par_iter()
        .map(|s| model.log_probability_unchecked(s))
        .collect();
    let mut total = 0.0;
    for (i, lp) in per_seq.into_iter().enumerate() {
        if lp == f64::NEG_INFINITY {
            return Err(Error::ZeroLikelihood(i));
        }
        total += lp;
    }
    Ok(total)
}

/// `ln P(d) − ½ · |Q|·|Σ_I|·|Σ_O| · ln N` with `N` the symbol count of `d`
/// and `Σ_O` including `err`.
pub fn bic(model: &Lmdp, d: &Dataset) -> Result<f64> {
    let ll = log_likelihood(model, d)?;
    let params = (model.num_states() * d.inputs.len() * d.outputs.len()) as f64;
    let n = d.num_symbols() as f64;
    Ok(ll - 0.5 * params * n.ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub lo: f64,
    pub hi: f64,
    /// Stop once the bracket is narrower than this in ln ε.
    pub tol: f64,
    pub max_iter: usize,
    pub options: LearnOptions,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            lo: 1e-6,
            hi: 1.0,
            tol: 0.05,
            max_iter: 25,
            options: LearnOptions::default(),
        }
    }
}

/// One evaluation of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub epsilon: f64,
    pub bic: f64,
    pub states: usize,
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best: LearnResult,
    /// Final bracket in ε.
    pub eps_interval: (f64, f64),
    pub iterations: usize,
    pub probes: Vec<Probe>,
    pub fpta_nodes: usize,
    pub fpta_time: Duration,
}

impl SearchResult {
    pub fn mean_probe_time(&self) -> Duration {
        if self.probes.is_empty() {
            return Duration::ZERO;
        }
        self.probes.iter().map(|p| p.elapsed).sum::<Duration>() / self.probes.len() as u32
    }
}

/// Golden-section maximisation of `ε ↦ BIC(ioalergia(d, ε))` over
/// `ln ε ∈ [ln lo, ln hi]`. Returns the best model seen at any probe.
pub fn golden_section_search(d: &Dataset, cfg: &SearchConfig) -> Result<SearchResult> {
    let lo = Epsilon::new(cfg.lo)?;
    let hi = Epsilon::new(cfg.hi)?;
    if lo.value() >= hi.value() {
        return Err(Error::InvalidConfig(format!(
            "search bracket [{}, {}] is empty",
            cfg.lo, cfg.hi
        )));
    }
    if !(cfg.tol > 0.0) {
        return Err(Error::InvalidConfig("tolerance must be positive".into()));
    }
    let start = Instant::now();
    let t = Iofpta::build(d)?;
    let fpta_time = start.elapsed();

    let eval = |x: f64| -> Result<(LearnResult, Probe)> {
        let began = Instant::now();
        let eps = Epsilon::new(x.exp().min(1.0))?;
        let r = ioalergia_on(&t, d, eps, cfg.options)?;
        let probe = Probe {
            epsilon: eps.value(),
            bic: r.bic,
            states: r.red_count,
            elapsed: began.elapsed(),
        };
        Ok((r, probe))
    };

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo.value().ln(), hi.value().ln());
    let mut c = b - inv_phi * (b - a);
    let mut e = a + inv_phi * (b - a);
    let (rc, re) = rayon::join(|| eval(c), || eval(e));
    let (rc, pc) = rc?;
    let (re, pe) = re?;
    let mut probes = vec![pc, pe];
    let (mut fc, mut fe) = (rc.bic, re.bic);
    let mut best = if fe > fc { re } else { rc };

    let mut iterations = 0;
    while b - a >= cfg.tol && iterations < cfg.max_iter {
        // ties move towards smaller ε
        let keep_left = fc >= fe;
        let x = if keep_left {
            b = e;
            e = c;
            fe = fc;
            c = b - inv_phi * (b - a);
            c
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + inv_phi * (b - a);
            e
        };
        let (r, p) = eval(x)?;
        probes.push(p);
        if keep_left {
            fc = r.bic;
        } else {
            fe = r.bic;
        }
        if r.bic > best.bic {
            best = r;
        }
        iterations += 1;
    }

    Ok(SearchResult {
        best,
        eps_interval: (a.exp(), b.exp().min(1.0)),
        iterations,
        probes,
        fpta_nodes: t.len(),
        fpta_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Alphabet, IoString};

    fn dataset(lines: &[&str]) -> Dataset {
        let i = Alphabet::new(["a", "b"]).unwrap();
        let o = Alphabet::outputs(["A", "B", "C"]).unwrap();
        let seqs = lines
            .iter()
            .map(|l| IoString::parse(l, &i, &o).unwrap())
            .collect();
        Dataset::new(i, o, seqs)
    }

    #[test]
    fn bic_zero_for_certain_single_symbol() {
        let d = dataset(&["A"]);
        let r = super::super::ioalergia(&d, Epsilon::new(0.5).unwrap()).unwrap();
        assert_eq!(log_likelihood(&r.model, &d).unwrap(), 0.0);
        assert_eq!(bic(&r.model, &d).unwrap(), 0.0);
    }

    #[test]
    fn duplicated_dataset_doubles_likelihood() {
        let lines = ["A a B a C", "A a C b err", "A a B b A", "A b err a B"];
        let d = dataset(&lines);
        let r = super::super::ioalergia(&d, Epsilon::new(0.5).unwrap()).unwrap();
        let mut doubled = d.clone();
        doubled.sequences.extend(d.sequences.clone());
        let ll = log_likelihood(&r.model, &d).unwrap();
        let params = (r.model.num_states() * 2 * 4) as f64;
        let n2 = doubled.num_symbols() as f64;
        let expected = 2.0 * ll - 0.5 * params * n2.ln();
        assert!((bic(&r.model, &doubled).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn zero_likelihood_is_an_error() {
        let d = dataset(&["A a B"]);
        let r = super::super::ioalergia(&d, Epsilon::new(0.5).unwrap()).unwrap();
        let other = dataset(&["A a C"]);
        assert!(matches!(bic(&r.model, &other), Err(Error::ZeroLikelihood(0))));
    }

    #[test]
    fn constant_objective() {
        // distinct labels everywhere: no merge is ever possible
        let d = dataset(&["A a B", "A b C"]);
        let cfg = SearchConfig::default();
        let r = golden_section_search(&d, &cfg).unwrap();
        assert_eq!(r.best.model.num_states(), 3);
        let first = r.probes[0].bic;
        assert!(r.probes.iter().all(|p| p.bic == first));
        let (lo, hi) = r.eps_interval;
        assert!(lo >= cfg.lo && hi <= cfg.hi && lo < hi);
        assert!(hi.ln() - lo.ln() < cfg.tol || r.iterations == cfg.max_iter);
        assert!(r.iterations < 25);
    }

    #[test]
    fn bad_brackets() {
        let d = dataset(&["A"]);
        let mut cfg = SearchConfig::default();
        cfg.lo = 0.5;
        cfg.hi = 0.1;
        assert!(golden_section_search(&d, &cfg).is_err());
        cfg = SearchConfig::default();
        cfg.tol = 0.0;
        assert!(golden_section_search(&d, &cfg).is_err());
    }
}
