//! Domain-adaptation SVM losses evaluated with target pseudo-labels.
//!
//! Multiclass models use the one-vs-rest hinge: a row labeled `y` pays
//! `Σ_c max(0, 1 − s_c·z_c)` with `s_c = +1` for `c = y` and `−1` otherwise.

use super::{LinearModel, Scores};
use crate::data::{FeatureMatrix, LabeledDataset};
use crate::error::{Error, Result};

fn hinge(scores: &Scores, i: usize, label: usize) -> f64 {
    let k = scores.n_classes();
    if k == 2 {
        return (1.0 - scores.get(i, label)).max(0.0);
    }
    (0..k)
        .map(|c| {
            let sign = if c == label { 1.0 } else { -1.0 };
            (1.0 - sign * scores.get(i, c)).max(0.0)
        })
        .sum()
}

fn check(
    model: &LinearModel,
    source: &LabeledDataset,
    target: &FeatureMatrix,
    target_labels: &[usize],
) -> Result<()> {
    if target_labels.len() != target.n_rows() {
        return Err(Error::LengthMismatch {
            expected: target.n_rows(),
            actual: target_labels.len(),
        });
    }
    if source.n_cols() != target.n_cols() {
        return Err(Error::DimensionMismatch {
            left: source.n_cols(),
            right: target.n_cols(),
        });
    }
    if let Some(&label) = target_labels.iter().find(|&&l| l >= model.n_classes()) {
        return Err(Error::LabelOutOfRange {
            label,
            n_classes: model.n_classes(),
        });
    }
    Ok(())
}

fn source_hinge(model: &LinearModel, source: &LabeledDataset) -> Result<f64> {
    let scores = model.decision_values(source.features())?;
    Ok(source
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &y)| hinge(&scores, i, y))
        .sum())
}

/// `C Σ_S hinge + C Σ_T hinge + ‖w‖²` with target pseudo-labels.
pub fn svm_da_loss(
    model: &LinearModel,
    source: &LabeledDataset,
    target: &FeatureMatrix,
    target_labels: &[usize],
    c: f64,
) -> Result<f64> {
    check(model, source, target, target_labels)?;
    let src = source_hinge(model, source)?;
    let scores = model.decision_values(target)?;
    let tgt: f64 = target_labels
        .iter()
        .enumerate()
        .map(|(i, &y)| hinge(&scores, i, y))
        .sum();
    Ok(c * src + c * tgt + model.weight_norm_sq())
}

/// Class-balanced variant: target rows of class `c` are weighted
/// `(C/K)·|T|/|T_c|`, so every class carries the same total weight.
///
/// A class with no pseudo-labeled rows still carries its share `C·|T|/K`,
/// spread evenly over every target row as if each were labeled with it:
/// `(C/K)·Σ_T hinge(x, c)`. Collapsing the target onto fewer classes is
/// therefore never cheaper under this loss than under the plain one.
pub fn balanced_da_loss(
    model: &LinearModel,
    source: &LabeledDataset,
    target: &FeatureMatrix,
    target_labels: &[usize],
    c: f64,
    n_classes: usize,
) -> Result<f64> {
    check(model, source, target, target_labels)?;
    let src = source_hinge(model, source)?;
    let scores = model.decision_values(target)?;
    let mut counts = vec![0usize; n_classes];
    for &y in target_labels {
        counts[y] += 1;
    }
    // |T| / (K·|T_c|), exactly 1 when the classes are even
    let ratio: Vec<f64> = counts
        .iter()
        .map(|&n| target_labels.len() as f64 / (n_classes * n.max(1)) as f64)
        .collect();
    let mut tgt: f64 = target_labels
        .iter()
        .enumerate()
        .map(|(i, &y)| ratio[y] * hinge(&scores, i, y))
        .sum();
    let k = n_classes as f64;
    for cls in (0..n_classes).filter(|&cls| counts[cls] == 0) {
        let spread: f64 = (0..target_labels.len())
            .map(|i| hinge(&scores, i, cls))
            .sum();
        tgt += spread / k;
    }
    Ok(c * src + c * tgt + model.weight_norm_sq())
}
