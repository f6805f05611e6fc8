//! Choosing `C` by k-fold cross-validation on the labeled source only.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::linear::{self, LearnerKind, SolverConfig};
use crate::metrics::accuracy;

pub const DEFAULT_GRID: [f64; 7] = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    pub n_folds: usize,
    /// Strictly increasing candidate values of `C`.
    pub grid: Vec<f64>,
    pub stratified: bool,
    pub seed: u64,
}

impl Default for CvPlan {
    fn default() -> Self {
        Self {
            n_folds: 3,
            grid: DEFAULT_GRID.to_vec(),
            stratified: true,
            seed: crate::adapt::DEFAULT_SEED,
        }
    }
}

impl CvPlan {
    pub fn validate(&self) -> Result<()> {
        if self.n_folds < 2 {
            return Err(Error::invalid("cross-validation needs at least 2 folds"));
        }
        if self.grid.is_empty() {
            return Err(Error::invalid("empty C grid"));
        }
        if self.grid.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::invalid("grid values must be positive and finite"));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("grid must be strictly increasing"));
        }
        Ok(())
    }
}

/// Fold index per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Folds {
    pub assignment: Vec<usize>,
    pub n_folds: usize,
    /// Non-empty classes with fewer members than folds; some folds hold none
    /// of them.
    pub small_classes: Vec<usize>,
}

impl Folds {
    pub fn fold_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn training_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }
}

fn check_fold_count(n_rows: usize, n_folds: usize) -> Result<()> {
    if n_folds < 2 {
        return Err(Error::invalid("cross-validation needs at least 2 folds"));
    }
    if n_folds > n_rows {
        return Err(Error::invalid(format!(
            "{n_folds} folds over {n_rows} rows"
        )));
    }
    Ok(())
}

/// Stratified assignment: each class is shuffled, then dealt round-robin with
/// a counter that carries over from one class to the next. Per-class counts
/// across folds differ by at most one, and so do fold sizes.
pub fn stratified_folds(ds: &LabeledDataset, n_folds: usize, seed: u64) -> Result<Folds> {
    check_fold_count(ds.n_rows(), n_folds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); ds.n_classes()];
    for (i, &y) in ds.labels().iter().enumerate() {
        members[y].push(i);
    }
    let mut assignment = vec![0; ds.n_rows()];
    let mut small_classes = Vec::new();
    let mut next = 0;
    for (class, rows) in members.iter_mut().enumerate() {
        if !rows.is_empty() && rows.len() < n_folds {
            small_classes.push(class);
        }
        rows.shuffle(&mut rng);
        for &i in rows.iter() {
            assignment[i] = next % n_folds;
            next += 1;
        }
    }
    Ok(Folds {
        assignment,
        n_folds,
        small_classes,
    })
}

/// Unstratified assignment: a seeded permutation dealt round-robin.
pub fn random_folds(n_rows: usize, n_folds: usize, seed: u64) -> Result<Folds> {
    check_fold_count(n_rows, n_folds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.shuffle(&mut rng);
    let mut assignment = vec![0; n_rows];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % n_folds;
    }
    Ok(Folds {
        assignment,
        n_folds,
        small_classes: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub c: f64,
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub c: f64,
    pub table: Vec<CvPoint>,
    pub small_classes: Vec<usize>,
}

pub fn make_folds(ds: &LabeledDataset, plan: &CvPlan) -> Result<Folds> {
    if plan.stratified {
        stratified_folds(ds, plan.n_folds, plan.seed)
    } else {
        random_folds(ds.n_rows(), plan.n_folds, plan.seed)
    }
}

/// Held-out accuracy of every fold for one value of `C`.
pub fn fold_accuracies(
    ds: &LabeledDataset,
    folds: &Folds,
    learner: LearnerKind,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    (0..folds.n_folds)
        .map(|f| {
            let train = ds.select_rows(&folds.training_rows(f))?;
            let held = ds.select_rows(&folds.fold_rows(f))?;
            let model = linear::train(learner, &train, None, cfg)?;
            Ok(accuracy(&model.predict(held.features())?, held.labels()))
        })
        .collect()
}

/// Grid value with the best mean held-out accuracy; ties go to the smallest.
pub fn select_c(ds: &LabeledDataset, plan: &CvPlan, learner: LearnerKind) -> Result<CvResult> {
    select_c_with(
        ds,
        plan,
        learner,
        &SolverConfig::new(1.0).with_seed(plan.seed),
    )
}

/// As [`select_c`], with tolerance, pass limit and seed taken from `template`.
pub fn select_c_with(
    ds: &LabeledDataset,
    plan: &CvPlan,
    learner: LearnerKind,
    template: &SolverConfig,
) -> Result<CvResult> {
    plan.validate()?;
    if ds.n_rows() < plan.n_folds {
        return Err(Error::invalid(format!(
            "{} source rows cannot fill {} folds",
            ds.n_rows(),
            plan.n_folds
        )));
    }
    if ds.class_counts().iter().filter(|&&n| n > 0).count() < 2 {
        return Err(Error::invalid(
            "cross-validation needs two non-empty classes",
        ));
    }
    let folds = make_folds(ds, plan)?;
    let table = plan
        .grid
        .par_iter()
        .map(|&c| {
            let mut cfg = template.clone();
            cfg.c = c;
            cfg.lambda = 1.0 / (2.0 * c);
            let fold_accuracies = fold_accuracies(ds, &folds, learner, &cfg)?;
            let mean_accuracy = fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
            Ok(CvPoint {
                c,
                mean_accuracy,
                fold_accuracies,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, p) in table.iter().enumerate() {
        if p.mean_accuracy > table[best].mean_accuracy {
            best = i;
        }
    }
    Ok(CvResult {
        c: table[best].c,
        table,
        small_classes: folds.small_classes,
    })
}
