//! End-to-end tasks: load, preprocess, choose `C`, adapt, evaluate.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adapt::{ensemble_adrem, member_seed, AdremConfig};
use crate::data::{LabeledDataset, UnlabeledDataset};
use crate::error::{Error, Result};
use crate::io::{self, LabelColumn};
use crate::metrics::{accuracy, mean_std};
use crate::preprocess::{apply_recipe, FitPopulation, Recipe};
use crate::report::{CSelection, RunReport, TaskEcho, Timings};
use crate::select::{select_c_with, CvPlan};
use crate::toy::ToyProblem;

/// `C` given directly or chosen by cross-validation on the source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CChoice {
    Fixed(f64),
    Cv(CvPlan),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub source_path: PathBuf,
    pub target_path: PathBuf,
    /// Only read to compute the reported accuracy.
    pub target_labels_path: Option<PathBuf>,
    /// Label column for CSV inputs (default: a column named `label`).
    pub label_column: Option<LabelColumn>,
    pub recipe: Recipe,
    pub fit_population: FitPopulation,
    /// `adrem.c` is ignored when `c` is a cross-validation plan.
    pub adrem: AdremConfig,
    pub c: CChoice,
}

/// In-memory inputs to a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub source: LabeledDataset,
    pub target: UnlabeledDataset,
    pub label_names: Vec<String>,
    pub echo: TaskEcho,
}

fn seconds(since: Instant) -> f64 {
    since.elapsed().as_secs_f64()
}

/// Target labels from a file holding one label per line, or from a labeled
/// data file (svmlight or CSV). Names are resolved through the source's
/// label names.
pub fn read_target_labels(
    path: &std::path::Path,
    label: Option<&LabelColumn>,
    names: &[String],
) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let one_per_line = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .all(|l| !l.contains(|c: char| c.is_whitespace() || c == ',' || c == ':'));
    if one_per_line {
        return io::read_label_file(path, names);
    }
    let loaded = io::load_labeled(path, label, None)?;
    loaded
        .dataset
        .labels()
        .iter()
        .map(|&l| {
            let name = &loaded.label_names[l];
            names.iter().position(|n| n == name).ok_or_else(|| {
                Error::invalid(format!(
                    "target label `{name}` does not occur in the source"
                ))
            })
        })
        .collect()
}

/// Load and preprocess source and target; target labels are not touched.
pub fn load_problem(task: &TaskSpec) -> Result<(Problem, (Vec<usize>, Vec<usize>), f64, f64)> {
    let t0 = Instant::now();
    let loaded = io::load_labeled(&task.source_path, task.label_column.as_ref(), None)?;
    let target = io::load_unlabeled(&task.target_path, task.label_column.as_ref(), None)?;
    // svmlight widths are inferred per file; align them
    let d = loaded.dataset.n_cols().max(target.n_cols());
    let source = loaded
        .dataset
        .with_features(loaded.dataset.features().with_n_cols(d)?)?;
    let target = UnlabeledDataset::new(target.features().with_n_cols(d)?);
    let load = seconds(t0);

    let t1 = Instant::now();
    let prepared = apply_recipe(
        task.recipe,
        task.fit_population,
        source.features(),
        target.features(),
    )
    .map_err(|e| e.in_stage("preprocess"))?;
    let source = source.with_features(prepared.source)?;
    let target = UnlabeledDataset::new(prepared.target);
    let preprocess = seconds(t1);
    let echo = TaskEcho {
        source: task.source_path.display().to_string(),
        target: task.target_path.display().to_string(),
        target_labels: task
            .target_labels_path
            .as_ref()
            .map(|p| p.display().to_string()),
        recipe: task.recipe,
        fit_population: task.fit_population,
    };
    Ok((
        Problem {
            source,
            target,
            label_names: loaded.label_names,
            echo,
        },
        (
            prepared.zero_mean_source_rows,
            prepared.zero_mean_target_rows,
        ),
        load,
        preprocess,
    ))
}

/// Choose `C` (source only), adapt, and score against `truth` when given.
///
/// `truth` only feeds the reported accuracy and the traces' accuracy column;
/// selection and adaptation never read it.
pub fn run_problem(
    problem: &Problem,
    cfg: &AdremConfig,
    c: &CChoice,
    truth: Option<&[usize]>,
) -> Result<RunReport> {
    if let Some(t) = truth {
        if t.len() != problem.target.n_rows() {
            return Err(Error::LengthMismatch {
                expected: problem.target.n_rows(),
                actual: t.len(),
            }
            .in_stage("evaluate"));
        }
    }
    let t0 = Instant::now();
    let mut cfg = cfg.clone();
    let c_selection = match c {
        CChoice::Fixed(v) => {
            cfg.c = *v;
            CSelection::Fixed
        }
        CChoice::Cv(plan) => {
            let template = cfg.solver(plan.seed);
            let r = select_c_with(&problem.source, plan, cfg.learner, &template)
                .map_err(|e| e.in_stage("select_c"))?;
            cfg.c = r.c;
            CSelection::Cv {
                plan: plan.clone(),
                table: r.table,
                small_classes: r.small_classes,
            }
        }
    };
    let select_c = seconds(t0);

    let t1 = Instant::now();
    let run = ensemble_adrem(&problem.source, &problem.target, &cfg, truth)
        .map_err(|e| e.in_stage("adapt"))?;
    let adapt = seconds(t1);
    let accuracy = truth.map(|t| accuracy(&run.labels, t));
    let member_traces = cfg.record_trace.then_some(run.member_traces);
    Ok(RunReport {
        task: problem.echo.clone(),
        member_seeds: (0..cfg.ensemble_size)
            .map(|j| member_seed(cfg.base_seed, j))
            .collect(),
        config: cfg,
        c_selection,
        predictions: run.labels,
        label_names: problem.label_names.clone(),
        accuracy,
        degenerate_members: run.degenerate_members,
        member_traces,
        zero_mean_rows: (Vec::new(), Vec::new()),
        timings: Timings {
            select_c,
            adapt,
            ..Timings::default()
        },
    })
}

/// The full file-based pipeline.
pub fn run_task(task: &TaskSpec) -> Result<RunReport> {
    let t0 = Instant::now();
    let (problem, zero_mean_rows, load, preprocess) = load_problem(task).map_err(|e| match e {
        Error::Stage { .. } => e,
        other => other.in_stage("load"),
    })?;
    let mut report = run_problem(&problem, &task.adrem, &task.c, None)?;
    if let Some(path) = &task.target_labels_path {
        let truth = read_target_labels(path, task.label_column.as_ref(), &problem.label_names)
            .map_err(|e| e.in_stage("evaluate"))?;
        if truth.len() != report.predictions.len() {
            return Err(Error::LengthMismatch {
                expected: report.predictions.len(),
                actual: truth.len(),
            }
            .in_stage("evaluate"));
        }
        report.accuracy = Some(accuracy(&report.predictions, &truth));
    }
    report.zero_mean_rows = zero_mean_rows;
    report.timings.load = load;
    report.timings.preprocess = preprocess;
    report.timings.total = seconds(t0);
    Ok(report)
}

/// A generated toy problem as a run: the true labels score the result.
pub fn run_toy_task(
    problem: ToyProblem,
    data_seed: u64,
    cfg: &AdremConfig,
    c: &CChoice,
) -> Result<RunReport> {
    let t0 = Instant::now();
    let data = problem.generate(data_seed)?;
    let p = Problem {
        source: data.source,
        target: data.target,
        label_names: vec!["0".into(), "1".into()],
        echo: TaskEcho {
            source: format!("toy:{problem}:seed={data_seed}"),
            target: format!("toy:{problem}:seed={data_seed}"),
            target_labels: Some(format!("toy:{problem}:seed={data_seed}")),
            recipe: Recipe::None,
            fit_population: FitPopulation::Pooled,
        },
    };
    let load = seconds(t0);
    let mut report = run_problem(&p, cfg, c, Some(&data.target_labels))?;
    report.timings.load = load;
    report.timings.total = seconds(t0);
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    EnsembleSize,
    Iterations,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ensemble-size" | "ensemble_size" | "m" => Ok(SweepAxis::EnsembleSize),
            "iterations" | "M" => Ok(SweepAxis::Iterations),
            other => Err(Error::invalid(format!("unknown sweep axis `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: usize,
    pub mean_acc: f64,
    pub std_acc: f64,
    pub accuracies: Vec<f64>,
}

/// Base seed of sweep repeat `r`; repeat 0 keeps the configured seed.
pub fn repeat_seed(base_seed: u64, repeat: usize) -> u64 {
    base_seed.wrapping_add(repeat as u64)
}

/// Final accuracy for each value of the swept parameter over `repeats`
/// seeds. `cfg.c` must already be chosen.
pub fn sweep(
    source: &LabeledDataset,
    target: &UnlabeledDataset,
    truth: &[usize],
    cfg: &AdremConfig,
    axis: SweepAxis,
    values: &[usize],
    repeats: usize,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() || values.contains(&0) {
        return Err(Error::invalid("sweep values must be positive"));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("sweep values must be strictly increasing"));
    }
    if repeats == 0 {
        return Err(Error::invalid("at least one repeat is needed"));
    }
    if truth.len() != target.n_rows() {
        return Err(Error::LengthMismatch {
            expected: target.n_rows(),
            actual: truth.len(),
        });
    }
    values
        .iter()
        .map(|&v| {
            let accuracies = (0..repeats)
                .into_par_iter()
                .map(|r| {
                    let mut c = cfg.clone();
                    c.record_trace = false;
                    c.base_seed = repeat_seed(cfg.base_seed, r);
                    match axis {
                        SweepAxis::EnsembleSize => c.ensemble_size = v,
                        SweepAxis::Iterations => c.iterations = v,
                    }
                    let run = ensemble_adrem(source, target, &c, None)?;
                    Ok(accuracy(&run.labels, truth))
                })
                .collect::<Result<Vec<_>>>()?;
            let (mean_acc, std_acc) = mean_std(&accuracies);
            Ok(SweepRow {
                value: v,
                mean_acc,
                std_acc,
                accuracies,
            })
        })
        .collect()
}

/// `size,mean_acc,std_acc` for ensemble sweeps, `num_iterations,mean_acc`
/// for iteration sweeps.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], axis: SweepAxis, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    match axis {
        SweepAxis::EnsembleSize => {
            w.write_record(["size", "mean_acc", "std_acc"])?;
            for r in rows {
                w.write_record([
                    r.value.to_string(),
                    r.mean_acc.to_string(),
                    r.std_acc.to_string(),
                ])?;
            }
        }
        SweepAxis::Iterations => {
            w.write_record(["num_iterations", "mean_acc"])?;
            for r in rows {
                w.write_record([r.value.to_string(), r.mean_acc.to_string()])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("sweep csv", e))?;
    Ok(())
}
