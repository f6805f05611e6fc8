//! Unsupervised domain adaptation by class-balanced randomized EM.
//!
//! The crate trains linear classifiers on a labeled source domain and adapts
//! them to an unlabeled target domain by repeatedly pseudo-labeling the
//! target, drawing class-balanced subsamples of growing size, and retraining.
//! Independent runs are combined by majority vote.

pub mod adapt;
pub mod data;
pub mod error;
pub mod harness;
pub mod io;
pub mod linear;
pub mod metrics;
pub mod preprocess;
pub mod report;
pub mod select;
pub mod toy;

pub use adapt::{ensemble_adrem, single_adrem, AdremConfig, EnsembleRun, IterationTrace};
pub use data::{FeatureMatrix, LabeledDataset, UnlabeledDataset};
pub use error::{Error, Result};
pub use harness::{run_task, CChoice, TaskSpec};
pub use linear::{LearnerKind, LinearModel, SolverConfig};
pub use preprocess::{FitPopulation, Recipe};
pub use report::RunReport;
pub use select::{select_c, CvPlan};
pub use toy::ToyProblem;
