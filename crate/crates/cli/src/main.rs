//! `semloss` — compile propositional constraints to arithmetic circuits,
//! evaluate the semantic loss and its gradient, generate datasets, and run
//! the training tasks.
//!
//! Exit codes: 0 success, 1 failed property checks, 2 usage errors,
//! 3 input errors, 4 compute errors.

mod io;
mod training;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use semloss::bdd::{compile, VarOrder, DEFAULT_NODE_CAP};
use semloss::circuit::Circuit;
use semloss::encoders::{exactly_one, grid_simple_path, total_order, GridSpec};
use semloss::engine::{self, axioms, LossConfig};
use semloss::fuzzy::{fuzzy_eval, FuzzyNorm};
use semloss::logic::ProbVector;

use io::{compute, input, CliError, Manifest};

#[derive(Parser)]
#[command(name = "semloss", version, about = "Semantic loss over compiled constraint circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a constraint file into a circuit (writes circuit.json)
    Compile(CompileArgs),
    /// Exact model count of a circuit or constraint file
    Count(CountArgs),
    /// Weighted model count of a circuit at a probability vector
    Wmc(EvalArgs),
    /// Semantic loss of a circuit at a probability vector
    Loss(EvalArgs),
    /// Gradient of the semantic loss at a probability vector
    Grad(EvalArgs),
    /// Emit a built-in constraint circuit (writes circuit.json)
    Encode(EncodeArgs),
    /// Generate or ingest a dataset (writes dataset.csv)
    GenData(GenDataArgs),
    /// Train the grid shortest-path task
    TrainGrid(training::TrainGridArgs),
    /// Train the preference-ranking task
    TrainPref(training::TrainPrefArgs),
    /// Train the semi-supervised 2D toy task
    TrainToy(training::TrainToyArgs),
    /// Evaluate fuzzy relaxations; compare the two one-hot encodings
    Fuzzy(FuzzyArgs),
    /// Run the loss-axiom property suite
    Axioms(AxiomArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OrderChoice {
    Natural,
    FirstOccurrence,
}

#[derive(Args)]
struct CompileArgs {
    /// Constraint file: DIMACS CNF or S-expression
    #[arg(long)]
    formula: PathBuf,
    #[arg(long, value_enum, default_value_t = io::FormulaFormat::Auto)]
    format: io::FormulaFormat,
    #[arg(long, value_enum, default_value_t = OrderChoice::Natural)]
    order: OrderChoice,
    /// Extend the declared universe to at least this many variables
    #[arg(long)]
    universe: Option<usize>,
    /// Node-table cap before compilation aborts
    #[arg(long, default_value_t = DEFAULT_NODE_CAP)]
    cap: usize,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct CountArgs {
    /// Circuit JSON produced by compile/encode
    #[arg(long, conflicts_with = "formula")]
    circuit: Option<PathBuf>,
    /// Constraint file to compile and count
    #[arg(long)]
    formula: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = io::FormulaFormat::Auto)]
    format: io::FormulaFormat,
    #[arg(long)]
    universe: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    /// Circuit JSON file
    #[arg(long, default_value = "circuit.json")]
    circuit: PathBuf,
    /// Probabilities: inline `0.5,0.5,0.5` or a CSV file path
    #[arg(long)]
    p: String,
    /// When given, also write the result under this directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EncodeKind {
    ExactlyOne,
    TotalOrder,
    GridPath,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long, value_enum)]
    kind: EncodeKind,
    /// Count for exactly-one / total-order
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DataKind {
    Grid,
    Pref,
    PrefSynth,
    Toy,
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long, value_enum)]
    kind: DataKind,
    #[arg(long, default_value_t = 4)]
    rows: usize,
    #[arg(long, default_value_t = 4)]
    cols: usize,
    /// Examples to generate (grid) or individuals (pref-synth)
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// PrefLib SOC file to ingest (kind=pref)
    #[arg(long)]
    soc: Option<PathBuf>,
    /// Download the SOC file from this URL when it is missing
    #[arg(long)]
    url: Option<String>,
    /// Expected SHA-256 of the downloaded file
    #[arg(long)]
    sha256: Option<String>,
    /// JSON config supplying soc/url/sha256 (flags win)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    n_labeled: usize,
    #[arg(long, default_value_t = 200)]
    n_unlabeled: usize,
    /// Archetype count for the synthetic preference population
    #[arg(long, default_value_t = 6)]
    archetypes: usize,
    /// Maximum adjacent swaps of noise per synthetic individual
    #[arg(long, default_value_t = 3)]
    max_swaps: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct FuzzyArgs {
    /// Formula file to evaluate (single-value mode)
    #[arg(long)]
    formula: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = io::FormulaFormat::Auto)]
    format: io::FormulaFormat,
    /// Probabilities: inline list or CSV path
    #[arg(long)]
    p: Option<String>,
    /// Compare the two one-hot encodings over this many variables
    #[arg(long)]
    compare_n: Option<usize>,
    /// Sample count for compare mode
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AxiomArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Sampled instances per axiom
    #[arg(long, default_value_t = 100)]
    instances: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are not usage errors.
            let benign = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if benign { ExitCode::SUCCESS } else { ExitCode::from(2) };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Compile(args) => cmd_compile(args),
        Command::Count(args) => cmd_count(args),
        Command::Wmc(args) => cmd_eval(args, EvalMode::Wmc),
        Command::Loss(args) => cmd_eval(args, EvalMode::Loss),
        Command::Grad(args) => cmd_eval(args, EvalMode::Grad),
        Command::Encode(args) => cmd_encode(args),
        Command::GenData(args) => cmd_gen_data(args),
        Command::TrainGrid(args) => training::train_grid(args),
        Command::TrainPref(args) => training::train_pref(args),
        Command::TrainToy(args) => training::train_toy(args),
        Command::Fuzzy(args) => cmd_fuzzy(args),
        Command::Axioms(args) => cmd_axioms(args),
    }
}

fn cmd_compile(args: CompileArgs) -> Result<ExitCode, CliError> {
    let mut formula = io::read_formula(&args.formula, args.format)?;
    if let Some(n) = args.universe {
        formula = formula.declare_universe(n);
    }
    let order = match args.order {
        OrderChoice::Natural => VarOrder::natural(formula.universe()),
        OrderChoice::FirstOccurrence => VarOrder::first_occurrence(&formula),
    };
    let mut mgr = semloss::bdd::BddManager::with_cap(order, args.cap);
    let root = mgr.build(formula.root()).map_err(compute)?;
    let circuit = mgr.to_circuit(root);
    let mut manifest = Manifest::new("compile");
    manifest.record_input(&args.formula)?;
    io::write_artifact(&args.out, "circuit.json", circuit.to_json().as_bytes(), &mut manifest)?;
    manifest.write(&args.out)?;
    println!(
        "universe {} | bdd nodes {} | circuit nodes {} | models {}",
        formula.universe(),
        mgr.node_count(),
        circuit.node_count(),
        mgr.model_count(root)
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_count(args: CountArgs) -> Result<ExitCode, CliError> {
    let count = match (&args.circuit, &args.formula) {
        (Some(path), None) => {
            let circuit = io::read_circuit(path)?;
            circuit.model_count().map_err(compute)?
        }
        (None, Some(path)) => {
            let mut formula = io::read_formula(path, args.format)?;
            if let Some(n) = args.universe {
                formula = formula.declare_universe(n);
            }
            let (mgr, root) =
                compile(&formula, VarOrder::natural(formula.universe())).map_err(compute)?;
            mgr.model_count(root)
        }
        _ => {
            return Err(CliError::Input(
                "count needs exactly one of --circuit or --formula".into(),
            ))
        }
    };
    println!("{count}");
    Ok(ExitCode::SUCCESS)
}

enum EvalMode {
    Wmc,
    Loss,
    Grad,
}

fn cmd_eval(args: EvalArgs, mode: EvalMode) -> Result<ExitCode, CliError> {
    let circuit = io::read_circuit(&args.circuit)?;
    let p = io::read_probs(&args.p, circuit.universe_size())?;
    let cfg = LossConfig::default();
    let (name, text) = match mode {
        EvalMode::Wmc => {
            let v = engine::wmc(&circuit, &p).map_err(compute)?;
            ("wmc.txt", format!("{v}"))
        }
        EvalMode::Loss => {
            let v = engine::semantic_loss(&circuit, &p, &cfg).map_err(compute)?;
            ("loss.txt", format!("{v}"))
        }
        EvalMode::Grad => {
            let g = engine::semantic_loss_grad(&circuit, &p, &cfg).map_err(compute)?;
            let fields: Vec<String> = g.iter().map(|v| format!("{v}")).collect();
            ("grad.csv", fields.join(","))
        }
    };
    println!("{text}");
    if let Some(out) = &args.out {
        let mut manifest = Manifest::new("eval");
        manifest.record_input(&args.circuit)?;
        io::write_artifact(out, name, format!("{text}\n").as_bytes(), &mut manifest)?;
        manifest.write(out)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_encode(args: EncodeArgs) -> Result<ExitCode, CliError> {
    let (circuit, desc) = match args.kind {
        EncodeKind::ExactlyOne => {
            let n = args.n.ok_or_else(|| CliError::Input("--n is required".into()))?;
            (exactly_one(n).map_err(compute)?, format!("exactly-one({n})"))
        }
        EncodeKind::TotalOrder => {
            let n = args.n.ok_or_else(|| CliError::Input("--n is required".into()))?;
            (total_order(n).map_err(compute)?, format!("total-order({n})"))
        }
        EncodeKind::GridPath => {
            let (rows, cols) = (
                args.rows.ok_or_else(|| CliError::Input("--rows is required".into()))?,
                args.cols.ok_or_else(|| CliError::Input("--cols is required".into()))?,
            );
            let g = GridSpec::new(rows, cols).map_err(input)?;
            (grid_simple_path(&g).map_err(compute)?, format!("grid-path({rows}x{cols})"))
        }
    };
    let mut manifest = Manifest::new("encode");
    io::write_artifact(&args.out, "circuit.json", circuit.to_json().as_bytes(), &mut manifest)?;
    manifest.write(&args.out)?;
    println!(
        "{desc}: universe {} | circuit nodes {} | models {}",
        circuit.universe_size(),
        circuit.node_count(),
        circuit.model_count().map_err(compute)?
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen_data(args: GenDataArgs) -> Result<ExitCode, CliError> {
    let mut manifest = Manifest::new("gen-data");
    manifest.seed = Some(args.seed);
    let dataset = match args.kind {
        DataKind::Grid => {
            let g = GridSpec::new(args.rows, args.cols).map_err(input)?;
            let count = args.count.unwrap_or(1600);
            semloss::data::gen_grid_dataset(&g, count, args.seed).map_err(compute)?
        }
        DataKind::Toy => {
            semloss::data::gen_toy_2d(args.seed, args.n_labeled, args.n_unlabeled)
        }
        DataKind::Pref => {
            let soc_path = io::resolve_soc_source(&args, &mut manifest)?;
            manifest.record_input(&soc_path)?;
            semloss::data::preflib::load_preflib_soc(&soc_path, args.seed).map_err(input)?
        }
        DataKind::PrefSynth => {
            let count = args.count.unwrap_or(5000);
            let soc = semloss::data::preflib::gen_synthetic_preferences_soc(
                args.seed,
                count,
                args.archetypes,
                args.max_swaps,
            );
            io::write_artifact(&args.out, "pref.soc", soc.as_bytes(), &mut manifest)?;
            let rankings = semloss::data::preflib::parse_soc(&soc).map_err(input)?;
            semloss::data::preflib::sushi_dataset(&rankings, args.seed).map_err(input)?
        }
    };
    io::write_artifact(&args.out, "dataset.csv", dataset.to_csv().as_bytes(), &mut manifest)?;
    manifest.write(&args.out)?;
    println!(
        "rows {} | features {} | labels {}",
        dataset.len(),
        dataset.n_features(),
        dataset.n_labels()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_fuzzy(args: FuzzyArgs) -> Result<ExitCode, CliError> {
    match (&args.formula, args.compare_n) {
        (Some(path), None) => {
            let formula = io::read_formula(path, args.format)?;
            let spec = args
                .p
                .as_ref()
                .ok_or_else(|| CliError::Input("--p is required with --formula".into()))?;
            let p = io::read_probs(spec, formula.universe())?;
            let v = fuzzy_eval(&formula, &p, FuzzyNorm::Lukasiewicz).map_err(compute)?;
            println!("{v}");
            Ok(ExitCode::SUCCESS)
        }
        (None, Some(n)) => cmd_fuzzy_compare(n, &args),
        _ => Err(CliError::Input(
            "fuzzy needs either --formula with --p, or --compare-n".into(),
        )),
    }
}

/// Samples probability vectors and reports, per sample, the fuzzy value of
/// the disjunctive and clause encodings of exactly-one next to the (shared)
/// semantic loss, which is syntax-independent.
fn cmd_fuzzy_compare(n: usize, args: &FuzzyArgs) -> Result<ExitCode, CliError> {
    use rand::{Rng, SeedableRng};
    let dnf = semloss::encoders::exactly_one_dnf(n);
    let cnf = semloss::encoders::exactly_one_cnf(n);
    let circuit = exactly_one(n).map_err(compute)?;
    let cfg = LossConfig::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    let mut report = String::from("sample_id,enc1,enc2,semantic_loss\n");
    let mut diverging = 0usize;
    for i in 0..args.samples {
        let p = ProbVector::new((0..n).map(|_| rng.gen()).collect()).expect("in range");
        let v1 = fuzzy_eval(&dnf, &p, FuzzyNorm::Lukasiewicz).map_err(compute)?;
        let v2 = fuzzy_eval(&cnf, &p, FuzzyNorm::Lukasiewicz).map_err(compute)?;
        let loss = engine::semantic_loss(&circuit, &p, &cfg).map_err(compute)?;
        if (v1 - v2).abs() > 1e-9 {
            diverging += 1;
        }
        report.push_str(&format!("{i},{v1},{v2},{loss}\n"));
    }
    println!(
        "samples {} | encodings disagree on {} | fuzzy is syntax-sensitive: {}",
        args.samples,
        diverging,
        diverging > 0
    );
    if let Some(out) = &args.out {
        let mut manifest = Manifest::new("fuzzy");
        manifest.seed = Some(args.seed);
        io::write_artifact(out, "fuzzy_report.csv", report.as_bytes(), &mut manifest)?;
        manifest.write(out)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_axioms(args: AxiomArgs) -> Result<ExitCode, CliError> {
    let report = axioms::run_axiom_suite(args.seed, args.instances);
    for o in &report.outcomes {
        println!(
            "{} {:<30} instances {:>4} failures {:>3} max_err {:.3e}",
            if o.passed() { "PASS" } else { "FAIL" },
            o.name,
            o.instances,
            o.failures,
            o.max_error
        );
    }
    if report.all_passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}

/// Shared handle so training code can reuse the circuit loader.
pub(crate) fn load_circuit(path: &std::path::Path) -> Result<Circuit, CliError> {
    io::read_circuit(path)
}
