//! End-to-end runs: model → traces → learned model → comparison.
//!
//! Every artifact lands in the spec's output directory as soon as it is
//! produced: `generating.json`, `traces.txt`, `learned.json`, `report.json`
//! (no timings, reproducible byte for byte), `timing.json`, `report.tsv`,
//! `compare.tsv` and `accuracy.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::analysis::{
    compare_models, optimal_action_accuracy, parse_suite, rows_to_tsv, AccuracyOptions,
    AccuracyReport, CompareRow, Query,
};
use crate::benchmarks::{attach_prize_rewards, build_machine, spun_once_configs, toy_model, SlotConfig, Variant};
use crate::error::{Error, Result};
use crate::fpta::Iofpta;
use crate::learner::{golden_section_search, ioalergia_on, Epsilon, LearnOptions, SearchConfig};
use crate::model::Lmdp;
use crate::tracegen::{generate, GenConfig};

/// Mean sequence-length parameter used for the slot-machine data sets.
pub const SLOT_GEOMETRIC_P: f64 = 0.076;

/// Sequence counts giving roughly 160k, 640k and 1.28M symbols on the N = 4
/// slot machines.
pub const SLOT_DATASET_SIZES: [(&str, usize); 3] = [("160k", 5832), ("640k", 23246), ("1280k", 46374)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSource {
    Slot { n_spins: u32, variant: Variant },
    Toy,
    File { path: PathBuf },
}

impl ModelSource {
    pub fn load(&self) -> Result<Lmdp> {
        match self {
            ModelSource::Slot { n_spins, variant } => build_machine(SlotConfig::new(*n_spins, *variant)),
            ModelSource::Toy => Ok(toy_model()),
            ModelSource::File { path } => Lmdp::read_file(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LearnerSpec {
    Fixed { epsilon: f64 },
    Search(SearchConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub model: ModelSource,
    pub num_sequences: usize,
    pub geometric_p: f64,
    #[serde(default)]
    pub stop_label: Option<String>,
    pub seed: u64,
    pub learner: LearnerSpec,
    #[serde(default)]
    pub queries: Vec<String>,
    /// Score optimal actions over the slot-machine configurations.
    #[serde(default)]
    pub accuracy: bool,
    #[serde(default)]
    pub keep_err_loops: bool,
    pub output_dir: PathBuf,
}

impl ExperimentSpec {
    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn gen_config(&self) -> GenConfig {
        GenConfig {
            num_sequences: self.num_sequences,
            geometric_p: self.geometric_p,
            seed: self.seed,
            stop_label: self.stop_label.clone(),
        }
    }

    fn parsed_queries(&self) -> Result<Vec<Query>> {
        parse_suite(&self.queries.join("\n"))
    }

    pub fn check(&self) -> Result<()> {
        self.gen_config().check()?;
        self.parsed_queries()?;
        if let ModelSource::File { path } = &self.model {
            if !path.is_file() {
                return Err(Error::InvalidConfig(format!("model file {} not found", path.display())));
            }
        }
        if let LearnerSpec::Fixed { epsilon } = self.learner {
            Epsilon::new(epsilon)?;
        }
        Ok(())
    }
}

/// The reproducible part of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub symbols: usize,
    pub sequences: usize,
    pub fpta_nodes: usize,
    pub epsilon: f64,
    pub eps_interval: Option<(f64, f64)>,
    pub search_iterations: usize,
    pub learned_states: usize,
    pub learned_transitions: usize,
    pub bic: f64,
    pub comparisons: Vec<CompareRow>,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub fpta_build_s: f64,
    pub mean_iteration_s: f64,
    pub learn_total_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub timing: Timing,
    pub generating: Lmdp,
    pub learned: Lmdp,
    pub accuracy: Option<AccuracyReport>,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name,
        source: Box::new(e),
    })
}

fn write_json<T: Serialize>(path: PathBuf, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Header of [`ExperimentOutcome::tsv_row`].
pub const TSV_HEADER: &str =
    "name\tsymbols\tsequences\tfpta_nodes\tfpta_time_s\titer_time_s\teps_lo\teps_hi\tstates\taccuracy";

impl ExperimentOutcome {
    pub fn tsv_row(&self) -> String {
        let r = &self.report;
        let (lo, hi) = r.eps_interval.unwrap_or((r.epsilon, r.epsilon));
        let acc = r.accuracy.map_or("-".to_string(), |a| format!("{a:.4}"));
        format!(
            "{}\t{}\t{}\t{}\t{:.3}\t{:.3}\t{:.3e}\t{:.3e}\t{}\t{}",
            r.name,
            r.symbols,
            r.sequences,
            r.fpta_nodes,
            self.timing.fpta_build_s,
            self.timing.mean_iteration_s,
            lo,
            hi,
            r.learned_states,
            acc
        )
    }
}

/// Runs the whole pipeline described by `spec`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    let began = Instant::now();
    stage("spec", spec.check())?;
    let queries = spec.parsed_queries()?;
    let dir = &spec.output_dir;
    stage("output", fs::create_dir_all(dir).map_err(Error::from))?;

    let generating = stage("model", spec.model.load().and_then(|m| m.ensure_valid().map(|_| m)))?;
    stage("model", generating.write_file(dir.join("generating.json")))?;

    let data = stage("simulate", generate(&generating, &spec.gen_config()))?;
    stage("simulate", data.write_file(dir.join("traces.txt")))?;

    let opts = LearnOptions {
        drop_pure_err: !spec.keep_err_loops,
    };
    let learn_began = Instant::now();
    let (result, fpta_nodes, fpta_time, interval, iterations, mean_iter) = stage("learn", {
        match &spec.learner {
            LearnerSpec::Fixed { epsilon } => (|| {
                let t0 = Instant::now();
                let t = Iofpta::build(&data)?;
                let fpta_time = t0.elapsed();
                let t1 = Instant::now();
                let r = ioalergia_on(&t, &data, Epsilon::new(*epsilon)?, opts)?;
                Ok((r, t.len(), fpta_time, None, 0, t1.elapsed()))
            })(),
            LearnerSpec::Search(cfg) => {
                let mut cfg = *cfg;
                cfg.options = opts;
                golden_section_search(&data, &cfg).map(|s| {
                    let mean = s.mean_probe_time();
                    (s.best, s.fpta_nodes, s.fpta_time, Some(s.eps_interval), s.iterations, mean)
                })
            }
        }
    })?;
    let learn_total = learn_began.elapsed();
    let learned = result.model;
    stage("learn", learned.write_file(dir.join("learned.json")))?;

    let mut learned_rewarded = learned.clone();
    attach_prize_rewards(&mut learned_rewarded);
    let comparisons = stage("compare", compare_models(&learned_rewarded, &generating, &queries))?;
    if !comparisons.is_empty() {
        stage("compare", fs::write(dir.join("compare.tsv"), rows_to_tsv(&comparisons)).map_err(Error::from))?;
    }

    let accuracy = if spec.accuracy {
        let acc = stage(
            "accuracy",
            optimal_action_accuracy(
                &learned_rewarded,
                &generating,
                &spun_once_configs(),
                &AccuracyOptions::default(),
            ),
        )?;
        stage("accuracy", write_json(dir.join("accuracy.json"), &acc))?;
        Some(acc)
    } else {
        None
    };

    let report = ExperimentReport {
        name: spec.name.clone(),
        symbols: data.num_symbols(),
        sequences: data.len(),
        fpta_nodes,
        epsilon: result.epsilon.value(),
        eps_interval: interval,
        search_iterations: iterations,
        learned_states: learned.num_states(),
        learned_transitions: learned.num_transitions(),
        bic: result.bic,
        comparisons,
        accuracy: accuracy.as_ref().map(|a| a.accuracy),
    };
    let secs = |d: Duration| d.as_secs_f64();
    let timing = Timing {
        fpta_build_s: secs(fpta_time),
        mean_iteration_s: secs(mean_iter),
        learn_total_s: secs(learn_total),
        total_s: secs(began.elapsed()),
    };
    let outcome = ExperimentOutcome {
        report,
        timing,
        generating,
        learned,
        accuracy,
    };
    stage("write", write_json(dir.join("report.json"), &outcome.report))?;
    stage("write", write_json(dir.join("timing.json"), &outcome.timing))?;
    stage(
        "write",
        fs::write(dir.join("report.tsv"), format!("{TSV_HEADER}\n{}\n", outcome.tsv_row())).map_err(Error::from),
    )?;
    Ok(outcome)
}

/// Queries comparing prize reachability and expected winnings.
pub fn slot_queries(variant: Variant) -> Vec<String> {
    let mut prizes = vec![0, 1, 2, 5, 10];
    if variant == Variant::Hooked {
        prizes.push(20);
    }
    let mut qs: Vec<String> = prizes
        .iter()
        .map(|p| format!("Pmax F prize >= {p}"))
        .collect();
    qs.push("Rmax F label in {stop} or deadlock".to_string());
    qs
}

/// Both N = 4 machines at roughly 160k and 640k symbols, with ε searched.
pub fn paper_suite(output_dir: &Path, seed: u64) -> Vec<ExperimentSpec> {
    let mut specs = Vec::new();
    for variant in [Variant::Deterministic, Variant::Hooked] {
        let tag = match variant {
            Variant::Deterministic => "slot",
            Variant::Hooked => "hooked",
        };
        for (size, n) in &SLOT_DATASET_SIZES[..2] {
            let name = format!("{tag}-n4-{size}");
            specs.push(ExperimentSpec {
                output_dir: output_dir.join(&name),
                name,
                model: ModelSource::Slot { n_spins: 4, variant },
                num_sequences: *n,
                geometric_p: SLOT_GEOMETRIC_P,
                stop_label: None,
                seed,
                learner: LearnerSpec::Search(SearchConfig::default()),
                queries: slot_queries(variant),
                accuracy: true,
                keep_err_loops: false,
            });
        }
    }
    specs
}
