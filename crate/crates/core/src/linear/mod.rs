//! Linear classifiers: L2-regularized hinge-loss SVM and logistic regression.
//!
//! Both learners fit an unregularized bias. Binary models store one weight row
//! scoring class 1 as `w·x + b` and class 0 as its negation; multiclass models
//! store one row per class.

mod logreg;
mod loss;
mod svm;

use serde::{Deserialize, Serialize};

pub use logreg::{train_logreg, LogRegProblem};
pub use loss::{balanced_da_loss, svm_da_loss};
pub use svm::{svm_primal_objective, train_svm};

use crate::data::{FeatureMatrix, LabeledDataset};
use crate::error::{Error, Result};

/// Score given to classes that had no training rows in a multinomial model.
pub const ABSENT_CLASS_BIAS: f64 = -1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Svm,
    Logreg,
}

impl std::fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LearnerKind::Svm => "svm",
            LearnerKind::Logreg => "logreg",
        })
    }
}

impl std::str::FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svm" => Ok(LearnerKind::Svm),
            "logreg" | "lr" => Ok(LearnerKind::Logreg),
            other => Err(Error::invalid(format!("unknown learner {other:?}"))),
        }
    }
}

/// Solver settings shared by both learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// SVM cost on the hinge terms.
    pub c: f64,
    /// Ridge weight for logistic regression.
    pub lambda: f64,
    /// SVM: maximal KKT violation. LR: gradient 2-norm.
    pub tolerance: f64,
    pub max_passes: usize,
    pub seed: u64,
}

impl SolverConfig {
    /// Settings for cost `c`; the ridge weight is tied to it as `1 / (2c)`.
    pub fn new(c: f64) -> Self {
        Self {
            c,
            lambda: 1.0 / (2.0 * c),
            tolerance: 1e-4,
            max_passes: 1000,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::invalid(format!(
                "C must be positive, got {}",
                self.c
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_passes == 0 {
            return Err(Error::invalid("max_passes must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    n_classes: usize,
    n_features: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
    kind: LearnerKind,
    degenerate: bool,
}

impl LinearModel {
    /// Assemble a model from raw parameters. `weights` is row-major with one
    /// row for binary models and `n_classes` rows otherwise.
    pub fn from_parts(
        kind: LearnerKind,
        n_classes: usize,
        n_features: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
    ) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::invalid("a classifier needs at least two classes"));
        }
        let rows = weight_rows(n_classes);
        if weights.len() != rows * n_features {
            return Err(Error::LengthMismatch {
                expected: rows * n_features,
                actual: weights.len(),
            });
        }
        if biases.len() != rows {
            return Err(Error::LengthMismatch {
                expected: rows,
                actual: biases.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("model weights must be finite"));
        }
        Ok(Self {
            n_classes,
            n_features,
            weights,
            biases,
            kind,
            degenerate: false,
        })
    }

    pub fn zeros(kind: LearnerKind, n_classes: usize, n_features: usize) -> Self {
        let rows = weight_rows(n_classes.max(2));
        Self {
            n_classes: n_classes.max(2),
            n_features,
            weights: vec![0.0; rows * n_features],
            biases: vec![0.0; rows],
            kind,
            degenerate: false,
        }
    }

    pub(crate) fn flag_degenerate(mut self, flag: bool) -> Self {
        self.degenerate = flag;
        self
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn kind(&self) -> LearnerKind {
        self.kind
    }

    /// Set when the training data held fewer than two usable classes.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn n_weight_rows(&self) -> usize {
        self.biases.len()
    }

    pub fn weight_row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.n_features..(r + 1) * self.n_features]
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// Sum of squared weights over all rows, bias excluded.
    pub fn weight_norm_sq(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    /// Multiply every weight and bias by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.weights.iter_mut().for_each(|w| *w *= alpha);
        out.biases.iter_mut().for_each(|b| *b *= alpha);
        out
    }

    /// Raw per-row scores `w_r·x + b_r` for one feature row.
    fn raw_scores(&self, x: crate::data::Row<'_>, out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = x.dot(self.weight_row(r)) + self.biases[r];
        }
    }

    fn check_dims(&self, x: &FeatureMatrix) -> Result<()> {
        if x.n_cols() != self.n_features {
            return Err(Error::DimensionMismatch {
                left: x.n_cols(),
                right: self.n_features,
            });
        }
        Ok(())
    }

    /// Per-class scores, `n_rows × n_classes`.
    pub fn decision_values(&self, x: &FeatureMatrix) -> Result<Scores> {
        self.check_dims(x)?;
        let k = self.n_classes;
        let mut values = vec![0.0; x.n_rows() * k];
        let mut raw = vec![0.0; self.n_weight_rows()];
        for (i, row) in x.rows().enumerate() {
            self.raw_scores(row, &mut raw);
            let out = &mut values[i * k..(i + 1) * k];
            if k == 2 {
                out[0] = -raw[0];
                out[1] = raw[0];
            } else {
                out.copy_from_slice(&raw);
            }
        }
        Ok(Scores {
            n_rows: x.n_rows(),
            n_classes: k,
            values,
        })
    }

    /// Argmax of the decision values; ties go to the lowest class index.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<usize>> {
        Ok(self.decision_values(x)?.argmax())
    }
}

fn weight_rows(n_classes: usize) -> usize {
    if n_classes == 2 {
        1
    } else {
        n_classes
    }
}

/// Row-major `n_rows × n_classes` score matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    n_rows: usize,
    n_classes: usize,
    values: Vec<f64>,
}

impl Scores {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub fn get(&self, i: usize, c: usize) -> f64 {
        self.values[i * self.n_classes + c]
    }

    pub fn argmax(&self) -> Vec<usize> {
        (0..self.n_rows)
            .map(|i| argmax_lowest(self.row(i)))
            .collect()
    }
}

/// Index of the maximum; the first one wins ties.
pub fn argmax_lowest(xs: &[f64]) -> usize {
    let mut best = 0;
    for (c, &v) in xs.iter().enumerate().skip(1) {
        if v > xs[best] {
            best = c;
        }
    }
    best
}

/// Train either learner.
pub fn train(
    kind: LearnerKind,
    ds: &LabeledDataset,
    instance_weights: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<LinearModel> {
    match kind {
        LearnerKind::Svm => train_svm(ds, instance_weights, cfg),
        LearnerKind::Logreg => train_logreg(ds, instance_weights, cfg),
    }
}

/// Shared argument checks. Returns per-row weights (all ones by default).
pub(crate) fn check_training_input(
    ds: &LabeledDataset,
    instance_weights: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if ds.n_rows() == 0 {
        return Err(Error::Empty("training set has no rows".into()));
    }
    if ds.n_classes() < 2 {
        return Err(Error::invalid("training needs n_classes >= 2"));
    }
    if let Some(row) = ds.features().first_non_finite_row() {
        return Err(Error::NonFinite { row });
    }
    match instance_weights {
        None => Ok(vec![1.0; ds.n_rows()]),
        Some(w) => {
            if w.len() != ds.n_rows() {
                return Err(Error::LengthMismatch {
                    expected: ds.n_rows(),
                    actual: w.len(),
                });
            }
            if let Some(bad) = w.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::invalid(format!(
                    "instance weights must be finite and non-negative, got {bad}"
                )));
            }
            Ok(w.to_vec())
        }
    }
}
