//! L2-regularized logistic regression.
//!
//! Two classes use the binary logistic model; more classes use the multinomial
//! (softmax) model over the classes that actually occur in the training data.
//! The objective is `λ‖W‖² + Σ sᵢ·NLLᵢ` with unpenalized biases, minimized by
//! L-BFGS until the gradient 2-norm drops below the tolerance.

use std::collections::VecDeque;

use super::{check_training_input, LearnerKind, LinearModel, SolverConfig, ABSENT_CLASS_BIAS};
use crate::data::{FeatureMatrix, LabeledDataset};
use crate::error::Result;

const HISTORY: usize = 10;

pub fn train_logreg(
    ds: &LabeledDataset,
    instance_weights: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<LinearModel> {
    let weights = check_training_input(ds, instance_weights, cfg)?;
    let k = ds.n_classes();
    let d = ds.n_cols();

    let mut class_mass = vec![0.0; k];
    for (&l, &s) in ds.labels().iter().zip(&weights) {
        class_mass[l] += s;
    }
    let present: Vec<usize> = (0..k).filter(|&c| class_mass[c] > 0.0).collect();

    if present.len() < 2 {
        let only = present.first().copied().unwrap_or(0);
        let biases = if k == 2 {
            vec![if only == 1 { 1.0 } else { -1.0 }]
        } else {
            (0..k).map(|c| if c == only { 1.0 } else { -1.0 }).collect()
        };
        let rows = biases.len();
        let model =
            LinearModel::from_parts(LearnerKind::Logreg, k, d, vec![0.0; rows * d], biases)?;
        return Ok(model.flag_degenerate(true));
    }

    let problem = LogRegProblem::new(ds, &weights, cfg.lambda, &present);
    let start = vec![0.0; problem.n_params()];
    let fit = minimize_lbfgs(&problem, start, cfg.tolerance, cfg.max_passes);
    let degenerate = present.len() < k;
    let model = problem.into_model(&fit.params, k)?;
    Ok(model.flag_degenerate(degenerate))
}

/// The smooth objective minimized by [`train_logreg`], exposed so callers can
/// inspect gradients at a returned model.
pub struct LogRegProblem<'a> {
    x: &'a FeatureMatrix,
    rows: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    lambda: f64,
    /// Class ids of the softmax outputs; empty for the binary model.
    classes: Vec<usize>,
    n_rows_w: usize,
}

impl<'a> LogRegProblem<'a> {
    /// `present` lists the classes with positive total weight, ascending.
    pub fn new(ds: &'a LabeledDataset, weights: &[f64], lambda: f64, present: &[usize]) -> Self {
        let binary = ds.n_classes() == 2;
        let mut rows = Vec::new();
        let mut targets = Vec::new();
        let mut w = Vec::new();
        for (i, (&l, &s)) in ds.labels().iter().zip(weights).enumerate() {
            if s > 0.0 {
                rows.push(i);
                targets.push(if binary {
                    l
                } else {
                    present
                        .iter()
                        .position(|&c| c == l)
                        .expect("label is present")
                });
                w.push(s);
            }
        }
        let (classes, n_rows_w) = if binary {
            (Vec::new(), 1)
        } else {
            (present.to_vec(), present.len())
        };
        Self {
            x: ds.features(),
            rows,
            targets,
            weights: w,
            lambda,
            classes,
            n_rows_w,
        }
    }

    /// Problem for an existing model over all classes of `ds`.
    pub fn for_model(ds: &'a LabeledDataset, weights: Option<&[f64]>, lambda: f64) -> Self {
        let ones = vec![1.0; ds.n_rows()];
        let present: Vec<usize> = (0..ds.n_classes()).collect();
        Self::new(ds, weights.unwrap_or(&ones), lambda, &present)
    }

    pub fn n_params(&self) -> usize {
        self.n_rows_w * (self.x.n_cols() + 1)
    }

    fn d(&self) -> usize {
        self.x.n_cols()
    }

    /// Flatten a model's parameters into this problem's layout.
    pub fn params_of(&self, model: &LinearModel) -> Vec<f64> {
        let d = self.d();
        let mut p = vec![0.0; self.n_params()];
        let bias_at = self.n_rows_w * d;
        if self.classes.is_empty() {
            p[..d].copy_from_slice(model.weight_row(0));
            p[bias_at] = model.biases()[0];
        } else {
            for (r, &c) in self.classes.iter().enumerate() {
                p[r * d..(r + 1) * d].copy_from_slice(model.weight_row(c));
                p[bias_at + r] = model.biases()[c];
            }
        }
        p
    }

    pub fn objective(&self, params: &[f64]) -> f64 {
        let mut scratch = vec![0.0; params.len()];
        self.value_and_gradient(params, &mut scratch)
    }

    /// Objective value; writes the gradient into `grad`.
    pub fn value_and_gradient(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.d();
        let r_count = self.n_rows_w;
        let (wparams, bparams) = params.split_at(r_count * d);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut value = 0.0;
        let mut z = vec![0.0; r_count];
        let mut dz = vec![0.0; r_count];

        for ((&row, &t), &s) in self.rows.iter().zip(&self.targets).zip(&self.weights) {
            let x = self.x.row(row);
            for r in 0..r_count {
                z[r] = x.dot(&wparams[r * d..(r + 1) * d]) + bparams[r];
            }
            if self.classes.is_empty() {
                let y = if t == 1 { 1.0 } else { -1.0 };
                let m = y * z[0];
                value += s * log1p_exp(-m);
                dz[0] = -s * y * sigmoid(-m);
            } else {
                let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = z.iter().map(|v| (v - zmax).exp()).sum();
                let lse = zmax + sum.ln();
                value += s * (lse - z[t]);
                for r in 0..r_count {
                    let p = (z[r] - lse).exp();
                    dz[r] = s * (p - if r == t { 1.0 } else { 0.0 });
                }
            }
            let (gw, gb) = grad.split_at_mut(r_count * d);
            for r in 0..r_count {
                if dz[r] != 0.0 {
                    x.axpy(dz[r], &mut gw[r * d..(r + 1) * d]);
                }
                gb[r] += dz[r];
            }
        }

        let mut norm = 0.0;
        for (g, &w) in grad[..r_count * d].iter_mut().zip(wparams) {
            norm += w * w;
            *g += 2.0 * self.lambda * w;
        }
        value + self.lambda * norm
    }

    fn into_model(&self, params: &[f64], n_classes: usize) -> Result<LinearModel> {
        let d = self.d();
        let bias_at = self.n_rows_w * d;
        if self.classes.is_empty() {
            return LinearModel::from_parts(
                LearnerKind::Logreg,
                2,
                d,
                params[..d].to_vec(),
                vec![params[bias_at]],
            );
        }
        // Biases are only defined up to a shared shift; center them.
        let mean_b = params[bias_at..].iter().sum::<f64>() / self.n_rows_w as f64;
        let mut weights = vec![0.0; n_classes * d];
        let mut biases = vec![ABSENT_CLASS_BIAS; n_classes];
        for (r, &c) in self.classes.iter().enumerate() {
            weights[c * d..(c + 1) * d].copy_from_slice(&params[r * d..(r + 1) * d]);
            biases[c] = params[bias_at + r] - mean_b;
        }
        LinearModel::from_parts(LearnerKind::Logreg, n_classes, d, weights, biases)
    }
}

#[inline]
fn log1p_exp(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

#[inline]
fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

struct Fit {
    params: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn minimize_lbfgs(problem: &LogRegProblem<'_>, mut x: Vec<f64>, tol: f64, max_iter: usize) -> Fit {
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut f = problem.value_and_gradient(&x, &mut g);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(HISTORY);
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];

    for iter in 0..max_iter {
        let gnorm = dot(&g, &g).sqrt();
        if gnorm <= tol {
            break;
        }

        // two-loop recursion
        let mut dir: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &dir);
            dir.iter_mut().zip(y).for_each(|(d, yv)| *d -= a * yv);
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            dir.iter_mut().for_each(|d| *d *= gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &dir);
            dir.iter_mut().zip(s).for_each(|(d, sv)| *d += (a - b) * sv);
        }
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            history.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }

        let mut step = if iter == 0 && history.is_empty() {
            (1.0 / gnorm).min(1.0)
        } else {
            1.0
        };
        let mut accepted = false;
        for _ in 0..60 {
            for ((xn, xv), dv) in x_new.iter_mut().zip(&x).zip(&dir) {
                *xn = xv + step * dv;
            }
            let f_new = problem.value_and_gradient(&x_new, &mut g_new);
            if f_new <= f + 1e-4 * step * slope {
                let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
                    if history.len() == HISTORY {
                        history.pop_front();
                    }
                    history.push_back((s, y, 1.0 / sy));
                }
                std::mem::swap(&mut x, &mut x_new);
                std::mem::swap(&mut g, &mut g_new);
                f = f_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if history.is_empty() {
                // no descent possible along -g at machine precision
                break;
            }
            history.clear();
        }
    }
    Fit { params: x }
}
