//! Randomized hard-EM domain adaptation.
//!
//! A single run trains on the source, pseudo-labels the target, then for
//! `k = 1..=M` retrains on the source plus a class-balanced target subsample
//! of size `round(k/M · |T|)` drawn under the previous pseudo-labels. The
//! ensemble repeats this with independent seeds and takes a majority vote.

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{class_counts, LabeledDataset, UnlabeledDataset};
use crate::error::{Error, Result};
use crate::linear::{self, balanced_da_loss, svm_da_loss, LearnerKind, SolverConfig};
use crate::metrics::accuracy;

/// Seed used whenever the caller does not pick one.
pub const DEFAULT_SEED: u64 = 0x5eed_ad7e;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdremConfig {
    pub c: f64,
    /// Number of EM iterations `M`.
    pub iterations: usize,
    /// Number of ensemble members `m`.
    pub ensemble_size: usize,
    pub learner: LearnerKind,
    /// Class-balanced subsampling; off gives plain uniform subsamples.
    pub balance: bool,
    pub base_seed: u64,
    pub record_trace: bool,
    /// Expected class count; checked against the source when set.
    pub n_classes: Option<usize>,
    pub tolerance: f64,
    pub max_passes: usize,
}

impl Default for AdremConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            iterations: 20,
            ensemble_size: 11,
            learner: LearnerKind::Svm,
            balance: true,
            base_seed: DEFAULT_SEED,
            record_trace: false,
            n_classes: None,
            tolerance: 1e-4,
            max_passes: 1000,
        }
    }
}

impl AdremConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be at least 1"));
        }
        if self.ensemble_size == 0 {
            return Err(Error::invalid("ensemble size must be at least 1"));
        }
        self.solver(0).validate()
    }

    pub fn solver(&self, seed: u64) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.c).with_seed(seed);
        cfg.tolerance = self.tolerance;
        cfg.max_passes = self.max_passes;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub k: usize,
    /// Target subsample size used to train this iteration's model.
    pub n_k: usize,
    pub svm_loss: f64,
    pub balanced_loss: f64,
    /// Only present when true target labels were supplied for diagnostics.
    pub accuracy: Option<f64>,
}

/// Target subsample size at iteration `k` of `iterations`, rounded half away
/// from zero.
pub fn schedule(k: usize, iterations: usize, n_target: usize) -> usize {
    let (k, m, t) = (k as u128, iterations as u128, n_target as u128);
    (((2 * k * t + m) / (2 * m)) as usize).min(n_target)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subsample {
    pub indices: Vec<usize>,
    /// Every pseudo-label was the same class.
    pub degenerate: bool,
}

/// Draw `n` target indices with equal quotas for every class present in
/// `pseudo_labels`.
///
/// Quotas are `n / P` for `P` present classes; the remainder goes one each to
/// the most populous classes (lowest index on ties). A class smaller than its
/// quota contributes all of its members plus draws with replacement.
pub fn balanced_subsample<R: Rng + ?Sized>(
    pseudo_labels: &[usize],
    n: usize,
    n_classes: usize,
    rng: &mut R,
) -> Result<Subsample> {
    if n_classes < 2 {
        return Err(Error::invalid(
            "balanced sampling needs at least two classes",
        ));
    }
    if n > pseudo_labels.len() {
        return Err(Error::invalid(format!(
            "subsample of {n} from {} rows",
            pseudo_labels.len()
        )));
    }
    if let Some(&label) = pseudo_labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::LabelOutOfRange { label, n_classes });
    }
    let counts = class_counts(pseudo_labels, n_classes);
    let present: Vec<usize> = (0..n_classes).filter(|&c| counts[c] > 0).collect();
    let degenerate = present.len() == 1;
    if n == 0 {
        return Ok(Subsample {
            indices: Vec::new(),
            degenerate,
        });
    }

    let mut quota = vec![0usize; n_classes];
    let base = n / present.len();
    let mut by_size = present.clone();
    by_size.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    for &c in &present {
        quota[c] = base;
    }
    for &c in by_size.iter().take(n % present.len()) {
        quota[c] += 1;
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in pseudo_labels.iter().enumerate() {
        members[l].push(i);
    }

    let mut indices = Vec::with_capacity(n);
    for &c in &present {
        let pool = &members[c];
        let q = quota[c];
        if q <= pool.len() {
            indices.extend(
                index::sample(rng, pool.len(), q)
                    .into_iter()
                    .map(|p| pool[p]),
            );
        } else {
            let mut all = pool.clone();
            all.shuffle(rng);
            indices.extend(all);
            for _ in pool.len()..q {
                indices.push(pool[rng.random_range(0..pool.len())]);
            }
        }
    }
    Ok(Subsample {
        indices,
        degenerate,
    })
}

/// `n` distinct indices drawn uniformly from `0..len`.
pub fn uniform_subsample<R: Rng + ?Sized>(len: usize, n: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n > len {
        return Err(Error::invalid(format!("subsample of {n} from {len} rows")));
    }
    Ok(index::sample(rng, len, n).into_vec())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdremRun {
    pub labels: Vec<usize>,
    /// One row per iteration `0..=M` when tracing was requested.
    pub trace: Vec<IterationTrace>,
    /// Some iteration saw a single pseudo-label class or one-class training data.
    pub degenerate: bool,
}

fn check_inputs(
    source: &LabeledDataset,
    target: &UnlabeledDataset,
    cfg: &AdremConfig,
    true_labels: Option<&[usize]>,
) -> Result<()> {
    cfg.validate()?;
    if source.n_rows() == 0 {
        return Err(Error::Empty("source dataset".into()));
    }
    if target.n_rows() == 0 {
        return Err(Error::Empty("target dataset".into()));
    }
    if source.n_cols() != target.n_cols() {
        return Err(Error::DimensionMismatch {
            left: source.n_cols(),
            right: target.n_cols(),
        });
    }
    if let Some(k) = cfg.n_classes {
        if k != source.n_classes() {
            return Err(Error::ClassCountMismatch {
                left: source.n_classes(),
                right: k,
            });
        }
    }
    if let Some(t) = true_labels {
        if t.len() != target.n_rows() {
            return Err(Error::LengthMismatch {
                expected: target.n_rows(),
                actual: t.len(),
            });
        }
    }
    Ok(())
}

/// One randomized EM run. `true_labels` only feed the trace's accuracy column.
pub fn single_adrem<R: RngCore + ?Sized>(
    source: &LabeledDataset,
    target: &UnlabeledDataset,
    cfg: &AdremConfig,
    rng: &mut R,
    true_labels: Option<&[usize]>,
) -> Result<AdremRun> {
    check_inputs(source, target, cfg, true_labels)?;
    let k_classes = source.n_classes();
    let n_target = target.n_rows();
    let mut trace = Vec::new();

    let record = |k: usize,
                  n_k: usize,
                  model: &linear::LinearModel,
                  labels: &[usize],
                  trace: &mut Vec<IterationTrace>|
     -> Result<()> {
        if !cfg.record_trace {
            return Ok(());
        }
        let t = target.features();
        trace.push(IterationTrace {
            k,
            n_k,
            svm_loss: svm_da_loss(model, source, t, labels, cfg.c)?,
            balanced_loss: balanced_da_loss(model, source, t, labels, cfg.c, k_classes)?,
            accuracy: true_labels.map(|truth| accuracy(labels, truth)),
        });
        Ok(())
    };

    let model = linear::train(cfg.learner, source, None, &cfg.solver(rng.next_u64()))?;
    let mut degenerate = model.is_degenerate();
    let mut labels = model.predict(target.features())?;
    record(0, 0, &model, &labels, &mut trace)?;

    for k in 1..=cfg.iterations {
        let n_k = schedule(k, cfg.iterations, n_target);
        let picked = if cfg.balance {
            let s = balanced_subsample(&labels, n_k, k_classes, rng)?;
            degenerate |= s.degenerate;
            s.indices
        } else {
            uniform_subsample(n_target, n_k, rng)?
        };
        let batch = target
            .select_rows(&picked)?
            .with_labels(picked.iter().map(|&i| labels[i]).collect(), k_classes)?;
        let train_set = source.concat(&batch)?;
        let model = linear::train(cfg.learner, &train_set, None, &cfg.solver(rng.next_u64()))?;
        degenerate |= model.is_degenerate();
        labels = model.predict(target.features())?;
        record(k, n_k, &model, &labels, &mut trace)?;
    }

    Ok(AdremRun {
        labels,
        trace,
        degenerate,
    })
}

/// Seed of ensemble member `j`: a SplitMix64 step over `(base_seed, j)`.
pub fn member_seed(base_seed: u64, member: usize) -> u64 {
    let mut z = base_seed.wrapping_add(
        (member as u64)
            .wrapping_add(1)
            .wrapping_mul(0x9e37_79b9_7f4a_7c15),
    );
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn member_rng(base_seed: u64, member: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(member_seed(base_seed, member))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRun {
    pub labels: Vec<usize>,
    pub member_labels: Vec<Vec<usize>>,
    pub member_traces: Vec<Vec<IterationTrace>>,
    /// Members whose run was flagged degenerate. They still vote.
    pub degenerate_members: Vec<usize>,
}

/// `m` independent single runs (in parallel) combined by majority vote.
pub fn ensemble_adrem(
    source: &LabeledDataset,
    target: &UnlabeledDataset,
    cfg: &AdremConfig,
    true_labels: Option<&[usize]>,
) -> Result<EnsembleRun> {
    check_inputs(source, target, cfg, true_labels)?;
    let runs = (0..cfg.ensemble_size)
        .into_par_iter()
        .map(|j| {
            let mut rng = member_rng(cfg.base_seed, j);
            single_adrem(source, target, cfg, &mut rng, true_labels)
        })
        .collect::<Result<Vec<_>>>()?;

    let degenerate_members = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.degenerate)
        .map(|(j, _)| j)
        .collect();
    let mut member_labels = Vec::with_capacity(runs.len());
    let mut member_traces = Vec::with_capacity(runs.len());
    for run in runs {
        member_labels.push(run.labels);
        member_traces.push(run.trace);
    }
    let labels = majority_vote(&member_labels)?;
    Ok(EnsembleRun {
        labels,
        member_labels,
        member_traces,
        degenerate_members,
    })
}

/// Per-column mode of an `m × n` vote matrix; ties go to the lowest label.
pub fn majority_vote(votes: &[Vec<usize>]) -> Result<Vec<usize>> {
    let first = votes
        .first()
        .ok_or_else(|| Error::Empty("majority vote over zero members".into()))?;
    let n = first.len();
    if let Some(bad) = votes.iter().find(|v| v.len() != n) {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: bad.len(),
        });
    }
    let n_labels = votes.iter().flatten().max().map_or(0, |&m| m + 1);
    let mut counts = vec![0usize; n_labels];
    Ok((0..n)
        .map(|i| {
            counts.iter_mut().for_each(|c| *c = 0);
            for v in votes {
                counts[v[i]] += 1;
            }
            let mut best = 0;
            for (label, &c) in counts.iter().enumerate() {
                if c > counts[best] {
                    best = label;
                }
            }
            best
        })
        .collect())
}
