use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use adrem::adapt::{AdremConfig, DEFAULT_SEED};
use adrem::harness::{
    load_problem, read_target_labels, run_task, run_toy_task, sweep, write_sweep_csv, SweepAxis,
};
use adrem::io::{self, LabelColumn};
use adrem::preprocess::apply_recipe;
use adrem::select::{select_c, CvPlan, DEFAULT_GRID};
use adrem::toy::write_trace_csv;
use adrem::{CChoice, FitPopulation, LearnerKind, Recipe, TaskSpec, ToyProblem};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "adrem",
    version,
    about = "Domain adaptation by class-balanced randomized EM"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Adapt a labeled source to an unlabeled target and write a report.
    Run(RunArgs),
    /// Final accuracy over repeated seeds for several ensemble sizes or iteration counts.
    Sweep(SweepArgs),
    /// Run a built-in toy problem and write its trace.
    Toy(ToyArgs),
    /// Cross-validate C on the source alone.
    Cv(CvArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Labeled source data (svmlight, or CSV when the name ends in .csv).
    #[arg(long)]
    source: PathBuf,
    /// Target data; any labels in it are ignored.
    #[arg(long)]
    target: PathBuf,
    /// CSV label column, by name or 0-based index (default: `label`).
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long, default_value = "none")]
    recipe: Recipe,
    /// Rows the preprocessing statistics are fit on: pooled or source-only.
    #[arg(long, default_value = "pooled", value_parser = parse_population)]
    fit_population: FitPopulation,
}

#[derive(Args)]
struct AdaptArgs {
    /// Fixed SVM cost; without it C is cross-validated on the source.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = 3)]
    folds: usize,
    /// Comma-separated C grid for cross-validation.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Number of EM iterations M.
    #[arg(long, default_value_t = 20)]
    iterations: usize,
    /// Number of ensemble members m.
    #[arg(long, default_value_t = 11)]
    ensemble_size: usize,
    #[arg(long, default_value = "svm")]
    learner: LearnerKind,
    /// Subsample uniformly instead of per class.
    #[arg(long)]
    no_balance: bool,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

impl AdaptArgs {
    fn config(&self) -> AdremConfig {
        AdremConfig {
            c: self.c.unwrap_or(1.0),
            iterations: self.iterations,
            ensemble_size: self.ensemble_size,
            learner: self.learner,
            balance: !self.no_balance,
            base_seed: self.seed,
            ..AdremConfig::default()
        }
    }

    fn plan(&self) -> CvPlan {
        CvPlan {
            n_folds: self.folds,
            grid: self.grid.clone().unwrap_or_else(|| DEFAULT_GRID.to_vec()),
            stratified: true,
            seed: self.seed,
        }
    }

    fn c_choice(&self) -> CChoice {
        match self.c {
            Some(c) => CChoice::Fixed(c),
            None => CChoice::Cv(self.plan()),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    adapt: AdaptArgs,
    /// True target labels, used only to report accuracy.
    #[arg(long)]
    target_labels: Option<PathBuf>,
    /// Keep per-iteration losses of every member in the report.
    #[arg(long)]
    trace: bool,
    /// Report file; printed to stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Write predicted labels, one per line.
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    adapt: AdaptArgs,
    #[arg(long)]
    target_labels: PathBuf,
    /// ensemble-size or iterations.
    #[arg(long)]
    axis: SweepAxis,
    /// Comma-separated, strictly increasing values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// CSV output; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ToyArgs {
    /// arcs or clusters.
    #[arg(default_value = "arcs")]
    problem: ToyProblem,
    /// Seed of the generated data.
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// SVM cost; defaults to the problem's own value.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = 20)]
    iterations: usize,
    #[arg(long, default_value_t = 11)]
    ensemble_size: usize,
    #[arg(long)]
    no_balance: bool,
    /// Trace CSV of the first member (it,accuracy,loss,lossbal).
    #[arg(long, default_value = "trace.csv")]
    trace_csv: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    label_column: Option<String>,
    /// Fit on the source alone.
    #[arg(long, default_value = "none")]
    recipe: Recipe,
    #[arg(long, default_value_t = 3)]
    folds: usize,
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long)]
    unstratified: bool,
    #[arg(long, default_value = "svm")]
    learner: LearnerKind,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

fn parse_population(s: &str) -> Result<FitPopulation, String> {
    match s {
        "pooled" => Ok(FitPopulation::Pooled),
        "source-only" => Ok(FitPopulation::SourceOnly),
        other => Err(format!(
            "unknown fit population `{other}` (pooled, source-only)"
        )),
    }
}

fn label_column(arg: &Option<String>) -> Option<LabelColumn> {
    arg.as_ref().map(|s| match s.parse() {
        Ok(i) => LabelColumn::Index(i),
        Err(_) => LabelColumn::Name(s.clone()),
    })
}

fn task(data: &DataArgs, adapt: &AdaptArgs, target_labels: Option<PathBuf>) -> TaskSpec {
    TaskSpec {
        source_path: data.source.clone(),
        target_path: data.target.clone(),
        target_labels_path: target_labels,
        label_column: label_column(&data.label_column),
        recipe: data.recipe,
        fit_population: data.fit_population,
        adrem: adapt.config(),
        c: adapt.c_choice(),
    }
}

fn run(args: RunArgs) -> Result<()> {
    let mut spec = task(&args.data, &args.adapt, args.target_labels);
    spec.adrem.record_trace = args.trace;
    let report = run_task(&spec)?;
    if let Some(path) = &args.predictions {
        io::write_label_file(path, &report.predictions)?;
    }
    match &args.output {
        Some(path) => report.write(path)?,
        None => print!("{}", report.to_text()?),
    }
    if let Some(acc) = report.accuracy {
        eprintln!("accuracy: {acc:.4}");
    }
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let spec = task(&args.data, &args.adapt, Some(args.target_labels.clone()));
    let (problem, _, _, _) = load_problem(&spec)?;
    let truth = read_target_labels(
        &args.target_labels,
        spec.label_column.as_ref(),
        &problem.label_names,
    )?;
    let mut cfg = spec.adrem.clone();
    cfg.c = match &spec.c {
        CChoice::Fixed(c) => *c,
        CChoice::Cv(plan) => select_c(&problem.source, plan, cfg.learner)?.c,
    };
    let rows = sweep(
        &problem.source,
        &problem.target,
        &truth,
        &cfg,
        args.axis,
        &args.values,
        args.repeats,
    )?;
    match &args.output {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_sweep_csv(&rows, args.axis, BufWriter::new(file))?;
        }
        None => write_sweep_csv(&rows, args.axis, std::io::stdout().lock())?,
    }
    Ok(())
}

fn run_toy(args: ToyArgs) -> Result<()> {
    let cfg = AdremConfig {
        iterations: args.iterations,
        ensemble_size: args.ensemble_size,
        balance: !args.no_balance,
        ..args.problem.default_config(args.seed)
    };
    let c = CChoice::Fixed(args.c.unwrap_or_else(|| args.problem.default_c()));
    let report = run_toy_task(args.problem, args.data_seed, &cfg, &c)?;
    let traces = report.member_traces.as_deref().unwrap_or(&[]);
    let file = File::create(&args.trace_csv)
        .with_context(|| format!("creating {}", args.trace_csv.display()))?;
    write_trace_csv(
        traces.first().map(Vec::as_slice).unwrap_or(&[]),
        BufWriter::new(file),
    )?;
    if let Some(path) = &args.report {
        report.write(path)?;
    }
    println!(
        "{} final accuracy: {:.4}",
        args.problem,
        report.accuracy.unwrap_or(f64::NAN)
    );
    Ok(())
}

fn run_cv(args: CvArgs) -> Result<()> {
    let loaded = io::load_labeled(
        &args.source,
        label_column(&args.label_column).as_ref(),
        None,
    )?;
    let x = loaded.dataset.features();
    let prepared = apply_recipe(args.recipe, FitPopulation::SourceOnly, x, x)?;
    let source = loaded.dataset.with_features(prepared.source)?;
    let plan = CvPlan {
        n_folds: args.folds,
        grid: args.grid.unwrap_or_else(|| DEFAULT_GRID.to_vec()),
        stratified: !args.unstratified,
        seed: args.seed,
    };
    let result = select_c(&source, &plan, args.learner)?;
    for p in &result.table {
        println!("c={} mean_accuracy={:.6}", p.c, p.mean_accuracy);
    }
    if !result.small_classes.is_empty() {
        eprintln!(
            "warning: classes {:?} have fewer rows than folds",
            result.small_classes
        );
    }
    println!("selected c={}", result.c);
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => {
            if a.values.is_empty() {
                bail!("--values needs at least one entry");
            }
            run_sweep(a)
        }
        Command::Toy(a) => run_toy(a),
        Command::Cv(a) => run_cv(a),
    }
}
