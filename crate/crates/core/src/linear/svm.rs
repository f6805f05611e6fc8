//! Linear SVM with hinge loss and an unregularized bias.
//!
//! Minimizes `½‖w‖² + Σ C·sᵢ·max(0, 1 − yᵢ(w·xᵢ + b))` through its dual.
//! The free bias adds the equality constraint `Σ αᵢyᵢ = 0`, so updates move
//! two dual variables at a time. Each pass sorts the rows that can still move
//! by their margin gap and pairs the largest raisable gaps with the smallest
//! lowerable ones; the pass order among equal gaps is a seeded shuffle. A
//! pass that fails to halve the worst violation is followed by steps on the
//! most violating pair.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_training_input, LearnerKind, LinearModel, SolverConfig};
use crate::data::{FeatureMatrix, LabeledDataset};
use crate::error::Result;

/// Train a binary separator (two classes) or one-vs-rest separators.
pub fn train_svm(
    ds: &LabeledDataset,
    instance_weights: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<LinearModel> {
    let weights = check_training_input(ds, instance_weights, cfg)?;
    let k = ds.n_classes();
    let d = ds.n_cols();
    if k == 2 {
        let (w, b, degenerate) = fit_one_vs_rest(ds, &weights, 1, cfg);
        let model = LinearModel::from_parts(LearnerKind::Svm, 2, d, w, vec![b])?;
        return Ok(model.flag_degenerate(degenerate));
    }
    let mut all_w = Vec::with_capacity(k * d);
    let mut all_b = Vec::with_capacity(k);
    let mut any_degenerate = false;
    for c in 0..k {
        let (w, b, degenerate) = fit_one_vs_rest(ds, &weights, c, cfg);
        any_degenerate |= degenerate;
        all_w.extend(w);
        all_b.push(b);
    }
    let model = LinearModel::from_parts(LearnerKind::Svm, k, d, all_w, all_b)?;
    Ok(model.flag_degenerate(any_degenerate))
}

/// Separator for `positive` against every other class.
pub(crate) fn fit_one_vs_rest(
    ds: &LabeledDataset,
    weights: &[f64],
    positive: usize,
    cfg: &SolverConfig,
) -> (Vec<f64>, f64, bool) {
    let d = ds.n_cols();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut upper = Vec::new();
    for (i, (&label, &s)) in ds.labels().iter().zip(weights).enumerate() {
        if s > 0.0 {
            rows.push(i);
            y.push(if label == positive { 1.0 } else { -1.0 });
            upper.push(cfg.c * s);
        }
    }
    let n_pos = y.iter().filter(|&&v| v > 0.0).count();
    if n_pos == 0 || n_pos == y.len() {
        // One-sided data: the optimum is w = 0 with the bias on the unit margin.
        let b = if n_pos == 0 { -1.0 } else { 1.0 };
        return (vec![0.0; d], b, true);
    }
    let (w, b) = solve_dual(ds.features(), &rows, &y, &upper, cfg);
    (w, b, false)
}

struct DualState<'a> {
    x: &'a FeatureMatrix,
    rows: &'a [usize],
    y: &'a [f64],
    upper: &'a [f64],
    sq_norms: Vec<f64>,
    alpha: Vec<f64>,
    w: Vec<f64>,
}

impl DualState<'_> {
    /// `yᵢ − w·xᵢ`; the bias value that puts row i exactly on its margin.
    #[inline]
    fn margin_gap(&self, i: usize) -> f64 {
        self.y[i] - self.x.row(self.rows[i]).dot(&self.w)
    }

    /// α can move in the direction that raises `yᵢαᵢ`.
    #[inline]
    fn can_raise(&self, i: usize) -> bool {
        if self.y[i] > 0.0 {
            self.alpha[i] < self.upper[i]
        } else {
            self.alpha[i] > 0.0
        }
    }

    #[inline]
    fn can_lower(&self, i: usize) -> bool {
        if self.y[i] > 0.0 {
            self.alpha[i] > 0.0
        } else {
            self.alpha[i] < self.upper[i]
        }
    }

    /// Shift `t` of `yα` mass from `j` to `i` along the optimal step.
    fn update_pair(&mut self, i: usize, j: usize, gi: f64, gj: f64) {
        if i == j {
            return;
        }
        let (xi, xj) = (self.x.row(self.rows[i]), self.x.row(self.rows[j]));
        let curvature = (self.sq_norms[i] + self.sq_norms[j] - 2.0 * xi.dot_row(&xj)).max(1e-12);
        let mut t = (gi - gj) / curvature;
        let room_i = if self.y[i] > 0.0 {
            self.upper[i] - self.alpha[i]
        } else {
            self.alpha[i]
        };
        let room_j = if self.y[j] > 0.0 {
            self.alpha[j]
        } else {
            self.upper[j] - self.alpha[j]
        };
        t = t.min(room_i).min(room_j);
        if t <= 0.0 {
            return;
        }
        self.alpha[i] = clamp_to_box(self.alpha[i] + self.y[i] * t, self.upper[i]);
        self.alpha[j] = clamp_to_box(self.alpha[j] - self.y[j] * t, self.upper[j]);
        xi.axpy(t, &mut self.w);
        xj.axpy(-t, &mut self.w);
    }

    /// Largest raisable gap and smallest lowerable gap over all rows.
    fn extremes(&self, gaps: &[f64]) -> (f64, usize, f64, usize) {
        let (mut hi, mut hi_at) = (f64::NEG_INFINITY, usize::MAX);
        let (mut lo, mut lo_at) = (f64::INFINITY, usize::MAX);
        for (i, &g) in gaps.iter().enumerate() {
            if self.can_raise(i) && g > hi {
                hi = g;
                hi_at = i;
            }
            if self.can_lower(i) && g < lo {
                lo = g;
                lo_at = i;
            }
        }
        (hi, hi_at, lo, lo_at)
    }
}

fn clamp_to_box(v: f64, upper: f64) -> f64 {
    let eps = 1e-12 * upper.max(1.0);
    if v < eps {
        0.0
    } else if v > upper - eps {
        upper
    } else {
        v
    }
}

fn refresh(state: &DualState<'_>, gaps: &mut [f64]) {
    for (i, g) in gaps.iter_mut().enumerate() {
        *g = state.margin_gap(i);
    }
}

fn solve_dual(
    x: &FeatureMatrix,
    rows: &[usize],
    y: &[f64],
    upper: &[f64],
    cfg: &SolverConfig,
) -> (Vec<f64>, f64) {
    let n = rows.len();
    let mut state = DualState {
        x,
        rows,
        y,
        upper,
        sq_norms: rows.iter().map(|&r| x.row(r).squared_norm()).collect(),
        alpha: vec![0.0; n],
        w: vec![0.0; x.n_cols()],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut gaps = vec![0.0; n];
    let mut raise = Vec::with_capacity(n);
    let mut lower = Vec::with_capacity(n);
    let tol = cfg.tolerance;

    for _ in 0..cfg.max_passes {
        refresh(&state, &mut gaps);
        let (hi, hi_at, lo, lo_at) = state.extremes(&gaps);
        if hi_at == usize::MAX || lo_at == usize::MAX || hi - lo <= tol {
            break;
        }
        // Match raisable rows with large gaps against lowerable rows with small
        // gaps, walking both lists from their extreme ends.
        raise.clear();
        lower.clear();
        raise.extend((0..n).filter(|&i| state.can_raise(i) && gaps[i] - lo > tol));
        lower.extend((0..n).filter(|&i| state.can_lower(i) && hi - gaps[i] > tol));
        raise.shuffle(&mut rng);
        lower.shuffle(&mut rng);
        raise.sort_by(|&a, &b| gaps[b].total_cmp(&gaps[a]));
        lower.sort_by(|&a, &b| gaps[a].total_cmp(&gaps[b]));
        let (mut a, mut z) = (0, 0);
        while a < raise.len() && z < lower.len() {
            let (i, j) = (raise[a], lower[z]);
            if i == j || !state.can_raise(i) {
                a += 1;
                continue;
            }
            if !state.can_lower(j) {
                z += 1;
                continue;
            }
            let (gi, gj) = (state.margin_gap(i), state.margin_gap(j));
            if gi - gj <= tol {
                if gaps[i] - gaps[j] <= tol {
                    break;
                }
                a += 1;
                z += 1;
                continue;
            }
            state.update_pair(i, j, gi, gj);
            let (ri, lj) = (state.can_raise(i), state.can_lower(j));
            if !ri {
                a += 1;
            }
            if !lj {
                z += 1;
            }
            if ri && lj {
                a += 1;
                z += 1;
            }
        }
        // When the sweep made little headway, fall back to stepping on the
        // most violating pair, which always makes progress.
        refresh(&state, &mut gaps);
        let (h2, h2_at, l2, l2_at) = state.extremes(&gaps);
        if h2_at != usize::MAX && l2_at != usize::MAX && h2 - l2 > 0.5 * (hi - lo) {
            let (mut hi, mut hi_at, mut lo, mut lo_at) = (h2, h2_at, l2, l2_at);
            for _ in 0..n {
                if hi_at == usize::MAX || lo_at == usize::MAX || hi - lo <= tol {
                    break;
                }
                state.update_pair(hi_at, lo_at, hi, lo);
                refresh(&state, &mut gaps);
                (hi, hi_at, lo, lo_at) = state.extremes(&gaps);
            }
        }
    }

    for (i, g) in gaps.iter_mut().enumerate() {
        *g = state.margin_gap(i);
    }
    let b = bias_from_gaps(&state, &gaps);
    (state.w, b)
}

/// Average gap over free variables, else the midpoint of the feasible interval.
fn bias_from_gaps(state: &DualState<'_>, gaps: &[f64]) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for (i, &g) in gaps.iter().enumerate() {
        if state.alpha[i] > 0.0 && state.alpha[i] < state.upper[i] {
            sum += g;
            count += 1;
        }
    }
    if count > 0 {
        return sum / count as f64;
    }
    let (hi, hi_at, lo, lo_at) = state.extremes(gaps);
    match (hi_at != usize::MAX, lo_at != usize::MAX) {
        (true, true) => 0.5 * (hi + lo),
        (true, false) => hi,
        (false, true) => lo,
        (false, false) => 0.0,
    }
}

/// Primal SVM objective `½‖w‖² + C Σ sᵢ·hinge` summed over all weight rows
/// (one-vs-rest problems for multiclass models).
pub fn svm_primal_objective(
    model: &LinearModel,
    ds: &LabeledDataset,
    instance_weights: Option<&[f64]>,
    c: f64,
) -> Result<f64> {
    let scores = model.decision_values(ds.features())?;
    let k = model.n_classes();
    let mut hinge = 0.0;
    for (i, &label) in ds.labels().iter().enumerate() {
        let s = instance_weights.map_or(1.0, |w| w[i]);
        if k == 2 {
            hinge += s * (1.0 - scores.get(i, label)).max(0.0);
        } else {
            for cls in 0..k {
                let sign = if cls == label { 1.0 } else { -1.0 };
                hinge += s * (1.0 - sign * scores.get(i, cls)).max(0.0);
            }
        }
    }
    Ok(0.5 * model.weight_norm_sq() + c * hinge)
}
