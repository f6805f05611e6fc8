//! Feature scalers and the named recipes that chain them.
//!
//! Statistics are fit on one or more matrices at once (source and target
//! pooled by default) and applied to each separately.

use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};

/// Standard deviations below this are treated as 1 when applied.
pub const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalerKind {
    /// `(x − mean) / std`, dense output.
    Standardize,
    /// `x / std`, keeps sparsity.
    StdOnly,
    /// `max(0, x)`.
    Rectify,
    /// Each row divided by its own mean.
    InstanceMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerStats {
    pub kind: ScalerKind,
    pub mean: Option<Vec<f64>>,
    /// Population standard deviation, stored as computed.
    pub std: Option<Vec<f64>>,
}

/// Column means and population standard deviations over all rows of all
/// matrices, implicit sparse zeros included.
fn column_moments(matrices: &[&FeatureMatrix]) -> Result<(Vec<f64>, Vec<f64>)> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::Empty("no matrices to fit".into()))?;
    let d = first.n_cols();
    if let Some(m) = matrices.iter().find(|m| m.n_cols() != d) {
        return Err(Error::DimensionMismatch {
            left: d,
            right: m.n_cols(),
        });
    }
    let n: usize = matrices.iter().map(|m| m.n_rows()).sum();
    if n == 0 {
        return Err(Error::Empty("cannot fit a scaler on zero rows".into()));
    }
    let mut sum = vec![0.0; d];
    for m in matrices {
        for row in m.rows() {
            row.for_each(|j, v| sum[j] += v);
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    // squared deviations of stored entries, then the implicit zeros
    let mut ss = vec![0.0; d];
    let mut stored = vec![0usize; d];
    for m in matrices {
        for row in m.rows() {
            row.for_each(|j, v| {
                ss[j] += (v - mean[j]) * (v - mean[j]);
                stored[j] += 1;
            });
        }
    }
    let std = (0..d)
        .map(|j| {
            let zeros = (n - stored[j]) as f64;
            ((ss[j] + zeros * mean[j] * mean[j]) / n as f64).sqrt()
        })
        .collect();
    Ok((mean, std))
}

pub fn fit_scaler(kind: ScalerKind, matrices: &[&FeatureMatrix]) -> Result<ScalerStats> {
    let (mean, std) = match kind {
        ScalerKind::Standardize => {
            let (m, s) = column_moments(matrices)?;
            (Some(m), Some(s))
        }
        ScalerKind::StdOnly => (None, Some(column_moments(matrices)?.1)),
        ScalerKind::Rectify | ScalerKind::InstanceMean => {
            if matrices.iter().map(|m| m.n_rows()).sum::<usize>() == 0 {
                return Err(Error::Empty("cannot fit a scaler on zero rows".into()));
            }
            (None, None)
        }
    };
    Ok(ScalerStats { kind, mean, std })
}

fn guarded(s: f64) -> f64 {
    if s < STD_FLOOR {
        1.0
    } else {
        s
    }
}

fn check_width(stats: &[f64], x: &FeatureMatrix) -> Result<()> {
    if stats.len() != x.n_cols() {
        return Err(Error::DimensionMismatch {
            left: stats.len(),
            right: x.n_cols(),
        });
    }
    Ok(())
}

/// Apply fitted statistics. Also returns the rows an instance-mean scaler
/// left unscaled because their mean was zero.
pub fn apply_scaler_flagged(
    stats: &ScalerStats,
    x: &FeatureMatrix,
) -> Result<(FeatureMatrix, Vec<usize>)> {
    match stats.kind {
        ScalerKind::Standardize => {
            let (mean, std) = match (&stats.mean, &stats.std) {
                (Some(m), Some(s)) => (m, s),
                _ => return Err(Error::invalid("standardize scaler is missing statistics")),
            };
            check_width(mean, x)?;
            let d = x.n_cols();
            let mut values = Vec::with_capacity(x.n_rows() * d);
            for row in x.rows() {
                let dense = row.to_dense(d);
                values.extend((0..d).map(|j| (dense[j] - mean[j]) / guarded(std[j])));
            }
            Ok((FeatureMatrix::dense(x.n_rows(), d, values)?, Vec::new()))
        }
        ScalerKind::StdOnly => {
            let std = stats
                .std
                .as_ref()
                .ok_or_else(|| Error::invalid("std scaler is missing statistics"))?;
            check_width(std, x)?;
            Ok((x.map_entries(|j, v| v / guarded(std[j])), Vec::new()))
        }
        ScalerKind::Rectify => Ok((x.map_entries(|_, v| v.max(0.0)), Vec::new())),
        ScalerKind::InstanceMean => {
            let d = x.n_cols().max(1) as f64;
            let mut flagged = Vec::new();
            let factors: Vec<f64> = x
                .rows()
                .enumerate()
                .map(|(i, row)| {
                    let mut s = 0.0;
                    row.for_each(|_, v| s += v);
                    let mean = s / d;
                    if mean.abs() < STD_FLOOR {
                        flagged.push(i);
                        1.0
                    } else {
                        1.0 / mean
                    }
                })
                .collect();
            Ok((x.scale_rows(&factors)?, flagged))
        }
    }
}

pub fn apply_scaler(stats: &ScalerStats, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    let (out, flagged) = apply_scaler_flagged(stats, x)?;
    if !flagged.is_empty() {
        log::warn!("{} rows with zero mean were left unscaled", flagged.len());
    }
    Ok(out)
}

/// Which rows the statistics are fit on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitPopulation {
    #[default]
    Pooled,
    SourceOnly,
}

/// Named preprocessing pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Recipe {
    #[default]
    None,
    /// Standardize.
    Amazon400,
    /// Divide by the standard deviation only, keeping sparsity.
    AmazonAll,
    /// Instance mean, then standardize.
    Surf,
    /// Rectify, then divide by the standard deviation.
    DecafRectified,
}

impl Recipe {
    pub const ALL: [Recipe; 5] = [
        Recipe::None,
        Recipe::Amazon400,
        Recipe::AmazonAll,
        Recipe::Surf,
        Recipe::DecafRectified,
    ];

    pub fn steps(self) -> &'static [ScalerKind] {
        match self {
            Recipe::None => &[],
            Recipe::Amazon400 => &[ScalerKind::Standardize],
            Recipe::AmazonAll => &[ScalerKind::StdOnly],
            Recipe::Surf => &[ScalerKind::InstanceMean, ScalerKind::Standardize],
            Recipe::DecafRectified => &[ScalerKind::Rectify, ScalerKind::StdOnly],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Recipe::None => "none",
            Recipe::Amazon400 => "amazon400",
            Recipe::AmazonAll => "amazon-all",
            Recipe::Surf => "surf",
            Recipe::DecafRectified => "decaf-rectified",
        }
    }
}

impl std::fmt::Display for Recipe {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Recipe::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown preprocessing recipe `{s}`")))
    }
}

/// Source and target after a recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub source: FeatureMatrix,
    pub target: FeatureMatrix,
    /// Rows that an instance-mean step could not scale, per domain.
    pub zero_mean_source_rows: Vec<usize>,
    pub zero_mean_target_rows: Vec<usize>,
}

/// Run every step of `recipe`, fitting each on the output of the previous one.
pub fn apply_recipe(
    recipe: Recipe,
    population: FitPopulation,
    source: &FeatureMatrix,
    target: &FeatureMatrix,
) -> Result<Prepared> {
    if source.n_cols() != target.n_cols() {
        return Err(Error::DimensionMismatch {
            left: source.n_cols(),
            right: target.n_cols(),
        });
    }
    let mut out = Prepared {
        source: source.clone(),
        target: target.clone(),
        zero_mean_source_rows: Vec::new(),
        zero_mean_target_rows: Vec::new(),
    };
    for &kind in recipe.steps() {
        let stats = match population {
            FitPopulation::Pooled => fit_scaler(kind, &[&out.source, &out.target])?,
            FitPopulation::SourceOnly => fit_scaler(kind, &[&out.source])?,
        };
        let (s, fs) = apply_scaler_flagged(&stats, &out.source)?;
        let (t, ft) = apply_scaler_flagged(&stats, &out.target)?;
        out.source = s;
        out.target = t;
        out.zero_mean_source_rows.extend(fs);
        out.zero_mean_target_rows.extend(ft);
    }
    Ok(out)
}
