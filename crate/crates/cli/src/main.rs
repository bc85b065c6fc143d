use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mdplearn::analysis::{
    compare_models, max_expected_reward, optimal_action_accuracy, parse_suite, reach_probability,
    rows_to_tsv, AccuracyOptions, LabelPredicate, Query, RewardQuery, ValueResult,
};
use mdplearn::benchmarks::{attach_prize_rewards, build_machine, spun_once_configs, SlotConfig, Variant};
use mdplearn::experiment::{paper_suite, run_experiment, ExperimentSpec, TSV_HEADER};
use mdplearn::learner::{golden_section_search, ioalergia_on, Epsilon, LearnOptions, SearchConfig};
use mdplearn::tracegen::{generate, Dataset, GenConfig};
use mdplearn::fpta::Iofpta;
use mdplearn::{Error, Lmdp};

/// Learn deterministic labeled MDPs from traces and check them.
#[derive(Parser)]
#[command(name = "mdplearn", version)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a slot-machine model.
    GenModel(GenModelArgs),
    /// Sample traces from a model.
    Simulate(SimulateArgs),
    /// Learn a model from traces.
    Learn(LearnArgs),
    /// Evaluate one query on a model.
    Check(CheckArgs),
    /// Evaluate a query suite on a learned and a generating model.
    Compare(CompareArgs),
    /// Optimal-action accuracy over the 125 slot configurations.
    Accuracy(AccuracyArgs),
    /// Check a model file for structural errors.
    Validate(ValidateArgs),
    /// Run a full experiment from a spec file, or the built-in suite.
    Run(RunArgs),
}

#[derive(Args)]
struct GenModelArgs {
    /// Build the slot machine (the only built-in model).
    #[arg(long, required = true)]
    slot: bool,
    /// Number of spins per game (at least 3).
    #[arg(long, default_value_t = 4)]
    n: u32,
    /// Build the hooked variant.
    #[arg(long)]
    hooked: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    num_seqs: usize,
    /// Length parameter; sequences have mean length 1/p.
    #[arg(long, default_value_t = 0.076)]
    geometric_p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// End a sequence once this label is observed.
    #[arg(long)]
    stop_label: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long)]
    traces: PathBuf,
    /// Fixed significance level in (0, 1].
    #[arg(long, conflicts_with = "search")]
    epsilon: Option<f64>,
    /// Pick ε by maximising BIC with golden-section search.
    #[arg(long)]
    search: bool,
    #[arg(long, default_value_t = 1e-6, requires = "search")]
    eps_lo: f64,
    #[arg(long, default_value_t = 1.0, requires = "search")]
    eps_hi: f64,
    /// Bracket width in ln ε at which the search stops.
    #[arg(long, default_value_t = 0.05, requires = "search")]
    tol: f64,
    #[arg(long, default_value_t = 25, requires = "search")]
    max_iter: usize,
    /// Keep probability-one err loops instead of disabling the input.
    #[arg(long)]
    keep_err_loops: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Tsv,
    Json,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    model: PathBuf,
    /// e.g. "Pmax F label in {prize10}"
    #[arg(long, required_unless_present = "reward", conflicts_with = "reward")]
    query: Option<String>,
    /// Override the step bound of a reachability query.
    #[arg(long)]
    steps: Option<u32>,
    /// Maximal expected reward until a stop label.
    #[arg(long)]
    reward: bool,
    #[arg(long, default_value = "stop", requires = "reward")]
    stop: String,
    /// Also end the game in states without enabled inputs.
    #[arg(long, requires = "reward")]
    deadlocks_terminal: bool,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    format: Format,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    learned: PathBuf,
    #[arg(long)]
    generating: PathBuf,
    /// Query file, one query per line.
    #[arg(long)]
    suite: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    format: Format,
}

#[derive(Args)]
struct AccuracyArgs {
    #[arg(long)]
    learned: PathBuf,
    #[arg(long)]
    generating: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    format: Format,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment spec (JSON).
    #[arg(long, required_unless_present = "paper_suite", conflicts_with = "paper_suite")]
    spec: Option<PathBuf>,
    /// Both N = 4 slot machines at about 160k and 640k symbols.
    #[arg(long)]
    paper_suite: bool,
    /// Output directory for the suite.
    #[arg(long, env = "MDPLEARN_OUT", default_value = "mdplearn-out")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

enum Failure {
    Invalid(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match cli.command {
        Command::GenModel(a) => gen_model(a),
        Command::Simulate(a) => simulate(a),
        Command::Learn(a) => learn(a),
        Command::Check(a) => check(a),
        Command::Compare(a) => compare(a),
        Command::Accuracy(a) => accuracy(a),
        Command::Validate(a) => validate(a),
        Command::Run(a) => run(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn print_json(value: &impl Serialize) -> CliResult {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn gen_model(a: GenModelArgs) -> CliResult {
    let variant = if a.hooked { Variant::Hooked } else { Variant::Deterministic };
    let m = build_machine(SlotConfig::new(a.n, variant))?;
    m.write_file(&a.out)?;
    println!("states\t{}\ntransitions\t{}", m.num_states(), m.num_transitions());
    Ok(())
}

fn simulate(a: SimulateArgs) -> CliResult {
    let m = Lmdp::read_file(&a.model)?;
    let cfg = GenConfig {
        num_sequences: a.num_seqs,
        geometric_p: a.geometric_p,
        seed: a.seed,
        stop_label: a.stop_label,
    };
    let d = generate(&m, &cfg)?;
    d.write_file(&a.out)?;
    let stats = d.stats();
    println!(
        "sequences\t{}\nsymbols\t{}\nmean_length\t{:.3}",
        stats.num_sequences, stats.num_symbols, stats.mean_length
    );
    Ok(())
}

#[derive(Serialize)]
struct LearnSidecar {
    epsilon_used: f64,
    eps_interval: Option<(f64, f64)>,
    bic: f64,
    states: usize,
    iterations: usize,
    fpta_nodes: usize,
    wall_time_ms: u128,
}

fn learn(a: LearnArgs) -> CliResult {
    let began = Instant::now();
    let d = Dataset::read_file(&a.traces)?;
    let options = LearnOptions {
        drop_pure_err: !a.keep_err_loops,
    };
    let (result, interval, iterations, fpta_nodes) = match (a.epsilon, a.search) {
        (Some(e), false) => {
            let t = Iofpta::build(&d)?;
            let r = ioalergia_on(&t, &d, Epsilon::new(e)?, options)?;
            (r, None, 0, t.len())
        }
        (None, true) => {
            let cfg = SearchConfig {
                lo: a.eps_lo,
                hi: a.eps_hi,
                tol: a.tol,
                max_iter: a.max_iter,
                options,
            };
            let s = golden_section_search(&d, &cfg)?;
            (s.best, Some(s.eps_interval), s.iterations, s.fpta_nodes)
        }
        _ => {
            return Err(Failure::Runtime(Error::InvalidConfig(
                "give exactly one of --epsilon and --search".into(),
            )))
        }
    };
    result.model.write_file(&a.out)?;
    let sidecar = LearnSidecar {
        epsilon_used: result.epsilon.value(),
        eps_interval: interval,
        bic: result.bic,
        states: result.model.num_states(),
        iterations,
        fpta_nodes,
        wall_time_ms: began.elapsed().as_millis(),
    };
    write_json(&a.out.with_extension("meta.json"), &sidecar)?;
    println!(
        "states\t{}\nepsilon\t{}\nbic\t{:.3}",
        sidecar.states, sidecar.epsilon_used, sidecar.bic
    );
    Ok(())
}

#[derive(Serialize)]
struct CheckOutput<'a> {
    query: String,
    value: f64,
    iterations: usize,
    residual: f64,
    scheduler: &'a mdplearn::MemorylessScheduler,
}

fn check(a: CheckArgs) -> CliResult {
    let m = Lmdp::read_file(&a.model)?;
    let query = if a.reward {
        Query::Reward(RewardQuery {
            stop: LabelPredicate::labels([a.stop.clone()]),
            deadlocks_terminal: a.deadlocks_terminal,
        })
    } else {
        let mut q: Query = a.query.as_deref().unwrap_or_default().parse()?;
        if let (Query::Reach(r), Some(k)) = (&mut q, a.steps) {
            r.step_bound = Some(k);
        }
        q
    };
    let r: ValueResult = match &query {
        Query::Reach(q) => reach_probability(&m, q)?,
        Query::Reward(q) => max_expected_reward(&m, q)?,
    };
    match a.format {
        Format::Tsv => println!(
            "query\tvalue\titerations\tresidual\n{}\t{:.10}\t{}\t{:.3e}",
            query, r.value_at_initial, r.iterations, r.residual
        ),
        Format::Json => print_json(&CheckOutput {
            query: query.to_string(),
            value: r.value_at_initial,
            iterations: r.iterations,
            residual: r.residual,
            scheduler: &r.scheduler,
        })?,
    }
    Ok(())
}

fn compare(a: CompareArgs) -> CliResult {
    let mut learned = Lmdp::read_file(&a.learned)?;
    attach_prize_rewards(&mut learned);
    let generating = Lmdp::read_file(&a.generating)?;
    let queries = parse_suite(&fs::read_to_string(&a.suite)?)?;
    let rows = compare_models(&learned, &generating, &queries)?;
    match a.format {
        Format::Tsv => print!("{}", rows_to_tsv(&rows)),
        Format::Json => print_json(&rows)?,
    }
    Ok(())
}

fn accuracy(a: AccuracyArgs) -> CliResult {
    let mut learned = Lmdp::read_file(&a.learned)?;
    attach_prize_rewards(&mut learned);
    let generating = Lmdp::read_file(&a.generating)?;
    let r = optimal_action_accuracy(
        &learned,
        &generating,
        &spun_once_configs(),
        &AccuracyOptions::default(),
    )?;
    match a.format {
        Format::Tsv => {
            println!("accuracy\t{:.6}\ntotal_weight\t{:.6}", r.accuracy, r.total_weight);
            for d in &r.diagnostics {
                eprintln!("note: {d}");
            }
        }
        Format::Json => print_json(&r)?,
    }
    Ok(())
}

fn validate(a: ValidateArgs) -> CliResult {
    let m = Lmdp::read_file(&a.model)?;
    let report = m.validate();
    if report.is_empty() {
        println!(
            "ok\t{} states\t{} transitions\tdeterministic={}",
            m.num_states(),
            m.num_transitions(),
            m.is_deterministic()
        );
        return Ok(());
    }
    let lines: Vec<String> = report.iter().map(ToString::to_string).collect();
    Err(Failure::Invalid(lines.join("\n")))
}

fn run(a: RunArgs) -> CliResult {
    let (specs, summary_dir) = match &a.spec {
        Some(path) => (vec![ExperimentSpec::read_file(path)?], None),
        None => (paper_suite(&a.out, a.seed), Some(a.out.clone())),
    };
    let mut tsv = format!("{TSV_HEADER}\n");
    println!("{TSV_HEADER}");
    for spec in &specs {
        let outcome = run_experiment(spec)?;
        let row = outcome.tsv_row();
        println!("{row}");
        tsv.push_str(&row);
        tsv.push('\n');
    }
    if let Some(dir) = summary_dir {
        fs::write(dir.join("suite.tsv"), tsv)?;
    }
    Ok(())
}
