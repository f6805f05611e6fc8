//! Acceptance suite. Every test prints one `criterion N: PASS|FAIL ...` line
//! (run with `--nocapture` to see them) and then asserts.
//!
//! Heavy tests share one lock so wall-clock limits are measured without
//! competing work from the other tests in this binary.

use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use adrem::adapt::{
    balanced_subsample, ensemble_adrem, majority_vote, member_rng, schedule, single_adrem,
    AdremConfig,
};
use adrem::data::{class_counts, FeatureMatrix, LabeledDataset, UnlabeledDataset};
use adrem::harness::{run_problem, run_task, sweep, CChoice, Problem, SweepAxis, TaskSpec};
use adrem::io::{
    parse_dense_csv, parse_svmlight, write_dense_csv_to, write_svmlight, write_svmlight_to,
    CsvOptions, LabelColumn, SvmlightOptions,
};
use adrem::linear::{
    balanced_da_loss, svm_da_loss, svm_primal_objective, train_logreg, train_svm, LearnerKind,
    LinearModel, LogRegProblem, SolverConfig,
};
use adrem::preprocess::{FitPopulation, Recipe};
use adrem::report::{machine_block_of, TaskEcho};
use adrem::select::{select_c, stratified_folds, CvPlan};
use adrem::toy::{run_toy, ToyProblem, ToyRun};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOY_RUNS: u64 = 50;
const TIME_LIMIT: Duration = Duration::from_secs(10);

static HEAVY: Mutex<()> = Mutex::new(());

fn heavy() -> MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|p| p.into_inner())
}

fn report(n: usize, ok: bool, detail: &str) {
    println!(
        "criterion {n}: {} {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
}

fn toy_runs(problem: ToyProblem, balance: bool) -> (Vec<ToyRun>, Duration) {
    let t0 = Instant::now();
    let runs = (0..TOY_RUNS)
        .map(|seed| {
            let data = problem.generate(seed).unwrap();
            let cfg = AdremConfig {
                balance,
                ..problem.default_config(seed)
            };
            run_toy(&data, &cfg).unwrap()
        })
        .collect();
    (runs, t0.elapsed())
}

fn arcs() -> &'static (Vec<ToyRun>, Duration) {
    static ARCS: OnceLock<(Vec<ToyRun>, Duration)> = OnceLock::new();
    ARCS.get_or_init(|| {
        let _g = heavy();
        toy_runs(ToyProblem::Arcs, true)
    })
}

fn frac(hits: usize, of: usize) -> f64 {
    hits as f64 / of as f64
}

#[test]
fn criterion_01_arcs() {
    let (runs, elapsed) = arcs();
    let n = runs.len();
    let good = runs.iter().filter(|r| r.final_accuracy >= 0.99).count();
    let it0: Vec<f64> = runs
        .iter()
        .map(|r| r.trace()[0].accuracy.unwrap())
        .collect();
    let mean0 = it0.iter().sum::<f64>() / n as f64;
    let in_band = it0.iter().filter(|a| (0.55..=0.75).contains(*a)).count();
    let ok = frac(good, n) >= 0.9
        && (0.55..=0.75).contains(&mean0)
        && frac(in_band, n) >= 0.9
        && *elapsed <= TIME_LIMIT;
    report(
        1,
        ok,
        &format!(
            "final>=0.99 in {good}/{n}, iteration-0 mean {mean0:.3} with {in_band}/{n} in [0.55,0.75], {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_02_balance_ablation() {
    let _g = heavy();
    let (off, t_off) = toy_runs(ToyProblem::Clusters, false);
    let (on, t_on) = toy_runs(ToyProblem::Clusters, true);
    let n = off.len();
    let collapsed = off
        .iter()
        .filter(|r| {
            r.final_accuracy <= 0.55 && r.ensemble.labels.iter().all(|&l| l == r.ensemble.labels[0])
        })
        .count();
    let ratio = off
        .iter()
        .filter(|r| {
            let last = &r.trace()[20];
            last.balanced_loss >= 10.0 * last.svm_loss
        })
        .count();
    let on_good = on.iter().filter(|r| r.final_accuracy >= 0.99).count();
    let ok = frac(collapsed, n) >= 0.9
        && frac(ratio, n) >= 0.9
        && on_good == on.len()
        && t_off <= TIME_LIMIT
        && t_on <= TIME_LIMIT;
    report(
        2,
        ok,
        &format!(
            "off: collapsed {collapsed}/{n}, balanced>=10x plain at it 20 in {ratio}/{n} ({:.2}s); on: >=0.99 in {on_good}/{} ({:.2}s)",
            t_off.as_secs_f64(),
            on.len(),
            t_on.as_secs_f64()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_03_loss_goes_down() {
    let (runs, _) = arcs();
    let down = runs
        .iter()
        .filter(|r| r.trace()[20].svm_loss < r.trace()[0].svm_loss)
        .count();
    let ok = frac(down, runs.len()) >= 0.95;
    report(
        3,
        ok,
        &format!("loss at it 20 below it 0 in {down}/{}", runs.len()),
    );
    assert!(ok);
}

// ---- criterion 4 -------------------------------------------------------

fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize, k: usize) -> LabeledDataset {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    // every class appears at least once
    let mut labels: Vec<usize> = (0..n)
        .map(|i| if i < k { i } else { rng.random_range(0..k) })
        .collect();
    for i in (1..n).rev() {
        labels.swap(i, rng.random_range(0..=i));
    }
    LabeledDataset::new(FeatureMatrix::from_dense_rows(d, &rows).unwrap(), labels, k).unwrap()
}

/// Binary SVM dual by accelerated projected gradient.
///
/// Maximizes `Σα − ½ αᵀQα` over `0 ≤ αᵢ ≤ uᵢ`, `Σ yᵢαᵢ = 0`. Returns the best
/// primal value found (bias minimized exactly) and the dual value.
fn oracle_binary(x: &[Vec<f64>], y: &[f64], upper: &[f64]) -> (f64, f64) {
    let n = x.len();
    let d = x[0].len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| y[i] * y[j] * dot(&x[i], &x[j])).collect())
        .collect();
    let lip = (0..n).map(|i| q[i][i]).sum::<f64>().max(1e-12);

    let project = |v: &[f64]| -> Vec<f64> {
        let at = |mu: f64| -> Vec<f64> {
            (0..n)
                .map(|i| (v[i] - mu * y[i]).clamp(0.0, upper[i]))
                .collect()
        };
        let balance = |a: &[f64]| (0..n).map(|i| y[i] * a[i]).sum::<f64>();
        let (mut lo, mut hi) = (-1e6, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if balance(&at(mid)) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        at(0.5 * (lo + hi))
    };
    let dual = |a: &[f64]| {
        let mut v = a.iter().sum::<f64>();
        for i in 0..n {
            for j in 0..n {
                v -= 0.5 * a[i] * a[j] * q[i][j];
            }
        }
        v
    };
    let primal = |a: &[f64]| {
        let mut w = vec![0.0; d];
        for i in 0..n {
            for (wj, xj) in w.iter_mut().zip(&x[i]) {
                *wj += a[i] * y[i] * xj;
            }
        }
        let z: Vec<f64> = x.iter().map(|r| dot(r, &w)).collect();
        let loss = |b: f64| -> f64 {
            (0..n)
                .map(|i| upper[i] * (1.0 - y[i] * (z[i] + b)).max(0.0))
                .sum::<f64>()
        };
        // piecewise linear in b: the minimum sits on a breakpoint
        let best = (0..n)
            .map(|i| loss(y[i] - z[i]))
            .fold(f64::INFINITY, f64::min);
        0.5 * dot(&w, &w) + best
    };

    let mut a = vec![0.0; n];
    let mut prev = a.clone();
    let mut t = 1.0_f64;
    for _ in 0..60_000 {
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        let v: Vec<f64> = (0..n).map(|i| a[i] + beta * (a[i] - prev[i])).collect();
        let grad: Vec<f64> = (0..n).map(|i| 1.0 - dot(&q[i], &v)).collect();
        let step: Vec<f64> = (0..n).map(|i| v[i] + grad[i] / lip).collect();
        prev = std::mem::replace(&mut a, project(&step));
        t = t_next;
    }
    (primal(&a), dual(&a))
}

/// One-vs-rest sum of binary oracle problems, matching the solver's layout.
fn oracle_svm(ds: &LabeledDataset, weights: &[f64], c: f64) -> (f64, f64) {
    let d = ds.n_cols();
    let x: Vec<Vec<f64>> = ds.features().rows().map(|r| r.to_dense(d)).collect();
    let upper: Vec<f64> = weights.iter().map(|s| c * s).collect();
    let problems: Vec<usize> = if ds.n_classes() == 2 {
        vec![1]
    } else {
        (0..ds.n_classes()).collect()
    };
    let mut total = (0.0, 0.0);
    for pos in problems {
        let y: Vec<f64> = ds
            .labels()
            .iter()
            .map(|&l| if l == pos { 1.0 } else { -1.0 })
            .collect();
        let (p, dv) = oracle_binary(&x, &y, &upper);
        total.0 += p;
        total.1 += dv;
    }
    total
}

#[test]
fn criterion_04_solvers() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_svm = 0.0_f64;
    let mut svm_ok = true;
    for inst in 0..20 {
        let n = rng.random_range(6..=30);
        let d = rng.random_range(1..=10);
        let k = if inst % 2 == 0 { 2 } else { 3 };
        let ds = random_dataset(&mut rng, n, d, k);
        let weights: Vec<f64> = if inst % 4 < 2 {
            vec![1.0; n]
        } else {
            (0..n).map(|_| rng.random_range(0.2..2.0)).collect()
        };
        let c = 10f64.powf(rng.random_range(-2.0..2.0));
        let model = train_svm(&ds, Some(&weights), &SolverConfig::new(c).with_seed(inst)).unwrap();
        let got = svm_primal_objective(&model, &ds, Some(&weights), c).unwrap();
        let (oracle, dual) = oracle_svm(&ds, &weights, c);
        let rel = (got - oracle).abs() / oracle.abs().max(1e-12);
        // the oracle itself must be converged, and nothing beats its dual
        let oracle_gap = (oracle - dual) / oracle.abs().max(1e-12);
        svm_ok &= rel <= 1e-3 && oracle_gap <= 1e-6 && got >= dual - 1e-9 * dual.abs();
        worst_svm = worst_svm.max(rel);
    }

    let mut worst_grad = 0.0_f64;
    let mut worst_fd = 0.0_f64;
    for inst in 0..20 {
        let n = rng.random_range(6..=30);
        let d = rng.random_range(1..=10);
        let k = [2, 3, 4][inst % 3];
        let ds = random_dataset(&mut rng, n, d, k);
        let weights: Option<Vec<f64>> =
            (inst % 2 == 1).then(|| (0..n).map(|_| rng.random_range(0.2..2.0)).collect());
        let c = 10f64.powf(rng.random_range(-2.0..1.0));
        let cfg = SolverConfig::new(c).with_seed(inst as u64);
        let model = train_logreg(&ds, weights.as_deref(), &cfg).unwrap();
        let problem = LogRegProblem::for_model(&ds, weights.as_deref(), cfg.lambda);
        let p = problem.params_of(&model);
        let mut g = vec![0.0; p.len()];
        problem.value_and_gradient(&p, &mut g);
        worst_grad = worst_grad.max(g.iter().map(|v| v * v).sum::<f64>().sqrt());
        let h = 1e-5;
        for j in 0..p.len() {
            let mut up = p.clone();
            let mut dn = p.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (problem.objective(&up) - problem.objective(&dn)) / (2.0 * h);
            worst_fd = worst_fd.max((fd - g[j]).abs());
        }
    }
    let ok = svm_ok && worst_grad <= 1e-4 && worst_fd <= 1e-5;
    report(
        4,
        ok,
        &format!("svm worst relative gap {worst_svm:.2e}; logreg worst |grad| {worst_grad:.2e}, worst fd error {worst_fd:.2e}"),
    );
    assert!(ok);
}

// ---- criterion 5 -------------------------------------------------------

fn random_model(rng: &mut ChaCha8Rng, k: usize, d: usize) -> LinearModel {
    let rows = if k == 2 { 1 } else { k };
    let w = (0..rows * d).map(|_| rng.random_range(-1.5..1.5)).collect();
    let b = (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect();
    LinearModel::from_parts(LearnerKind::Svm, k, d, w, b).unwrap()
}

/// Hinge of `x` under label `y`, one-vs-rest for more than two classes.
fn naive_hinge(model: &LinearModel, x: &[f64], y: usize) -> f64 {
    let z = |r: usize| {
        model
            .weight_row(r)
            .iter()
            .zip(x)
            .map(|(w, v)| w * v)
            .sum::<f64>()
            + model.biases()[r]
    };
    if model.n_classes() == 2 {
        let sign = if y == 1 { 1.0 } else { -1.0 };
        return (1.0 - sign * z(0)).max(0.0);
    }
    (0..model.n_classes())
        .map(|c| (1.0 - if c == y { 1.0 } else { -1.0 } * z(c)).max(0.0))
        .sum()
}

fn naive_balanced(
    model: &LinearModel,
    s: &LabeledDataset,
    t: &[Vec<f64>],
    y: &[usize],
    c: f64,
) -> f64 {
    let d = s.n_cols();
    let k = model.n_classes();
    let norm: f64 = (0..model.n_weight_rows())
        .map(|r| model.weight_row(r).iter().map(|w| w * w).sum::<f64>())
        .sum();
    let mut total = norm;
    for (row, &label) in s.features().rows().zip(s.labels()) {
        total += c * naive_hinge(model, &row.to_dense(d), label);
    }
    for cls in 0..k {
        let members: Vec<usize> = (0..t.len()).filter(|&i| y[i] == cls).collect();
        if members.is_empty() {
            // an empty class keeps its share, spread over every target row
            let share = c * t.len() as f64 / k as f64;
            for x in t {
                total += share / t.len() as f64 * naive_hinge(model, x, cls);
            }
        } else {
            let weight = c * t.len() as f64 / (k as f64 * members.len() as f64);
            for i in members {
                total += weight * naive_hinge(model, &t[i], cls);
            }
        }
    }
    total
}

#[test]
fn criterion_05_balanced_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut exact = true;
    let mut worst = 0.0_f64;
    for inst in 0..20 {
        let k = [2, 3, 4][inst % 3];
        let d = rng.random_range(1..=6);
        let n_s = rng.random_range(k..=12);
        let s = random_dataset(&mut rng, n_s, d, k);
        let per = rng.random_range(1..=5);
        let model = random_model(&mut rng, k, d);
        let c = 10f64.powf(rng.random_range(-2.0..1.0));

        // balanced labeling: `per` rows of each class, shuffled
        let n_t = per * k;
        let t_rows: Vec<Vec<f64>> = (0..n_t)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let t = FeatureMatrix::from_dense_rows(d, &t_rows).unwrap();
        let mut even: Vec<usize> = (0..n_t).map(|i| i % k).collect();
        for i in (1..n_t).rev() {
            even.swap(i, rng.random_range(0..=i));
        }
        let plain = svm_da_loss(&model, &s, &t, &even, c).unwrap();
        let bal = balanced_da_loss(&model, &s, &t, &even, c, k).unwrap();
        exact &= plain.to_bits() == bal.to_bits();

        // arbitrary labeling, sometimes with absent classes
        let used = if inst % 4 == 0 { 1 } else { k };
        let any: Vec<usize> = (0..n_t).map(|_| rng.random_range(0..used)).collect();
        let got = balanced_da_loss(&model, &s, &t, &any, c, k).unwrap();
        let want = naive_balanced(&model, &s, &t_rows, &any, c);
        worst = worst.max((got - want).abs());
    }
    let ok = exact && worst <= 1e-12;
    report(
        5,
        ok,
        &format!(
            "balanced==plain bitwise on even labelings: {exact}; worst oracle error {worst:.2e}"
        ),
    );
    assert!(ok);
}

// ---- criterion 6 -------------------------------------------------------

#[test]
fn criterion_06_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut violations = 0;
    for _ in 0..10_000 {
        let k = rng.random_range(2..=5);
        let len = rng.random_range(1..=60);
        let labels: Vec<usize> = (0..len).map(|_| rng.random_range(0..k)).collect();
        let n = rng.random_range(0..=len);
        let s = balanced_subsample(&labels, n, k, &mut rng).unwrap();
        let present: Vec<usize> = (0..k).filter(|&c| labels.contains(&c)).collect();
        let drawn = class_counts(&s.indices.iter().map(|&i| labels[i]).collect::<Vec<_>>(), k);
        let counts: Vec<usize> = present.iter().map(|&c| drawn[c]).collect();
        let spread = counts.iter().max().unwrap() - counts.iter().min().unwrap();
        if s.indices.len() != n
            || spread > 1
            || (0..k).any(|c| !present.contains(&c) && drawn[c] > 0)
        {
            violations += 1;
        }
    }
    let mut bad_schedule = 0;
    for m in 1..=25 {
        for t in 1..=200 {
            let sizes: Vec<usize> = (0..=m).map(|k| schedule(k, m, t)).collect();
            if sizes.windows(2).any(|w| w[0] > w[1]) || sizes[m] != t {
                bad_schedule += 1;
            }
        }
    }
    let ok = violations == 0 && bad_schedule == 0;
    report(
        6,
        ok,
        &format!(
            "subsample violations {violations}/10000; schedule violations {bad_schedule}/5000"
        ),
    );
    assert!(ok);
}

// ---- criterion 7 -------------------------------------------------------

fn toy_task_files(dir: &std::path::Path) -> TaskSpec {
    let data = ToyProblem::Arcs.generate(3).unwrap();
    let src = dir.join("source.svm");
    let tgt = dir.join("target.svm");
    write_svmlight(&src, data.source.features(), Some(data.source.labels())).unwrap();
    write_svmlight(&tgt, data.target.features(), None).unwrap();
    TaskSpec {
        source_path: src,
        target_path: tgt,
        target_labels_path: None,
        label_column: None,
        recipe: Recipe::None,
        fit_population: FitPopulation::Pooled,
        adrem: AdremConfig {
            ensemble_size: 3,
            record_trace: true,
            ..AdremConfig::default()
        },
        c: CChoice::Cv(CvPlan::default()),
    }
}

#[test]
fn criterion_07_determinism_and_votes() {
    let dir = tempfile::tempdir().unwrap();
    let task = toy_task_files(dir.path());
    let a = run_task(&task).unwrap();
    let b = run_task(&task).unwrap();
    let (ta, tb) = (a.to_text().unwrap(), b.to_text().unwrap());
    let identical =
        machine_block_of(&ta).is_some() && machine_block_of(&ta) == machine_block_of(&tb);

    let data = ToyProblem::Arcs.generate(8).unwrap();
    let cfg = AdremConfig {
        c: ToyProblem::Arcs.default_c(),
        ensemble_size: 1,
        base_seed: 77,
        record_trace: true,
        ..AdremConfig::default()
    };
    let ens = ensemble_adrem(&data.source, &data.target, &cfg, None).unwrap();
    let single = single_adrem(
        &data.source,
        &data.target,
        &cfg,
        &mut member_rng(77, 0),
        None,
    )
    .unwrap();
    let m1_equal = ens.labels == single.labels && ens.member_traces[0] == single.trace;

    let mut odd_ties = 0;
    for m in (1..=11).step_by(2) {
        let cols = 1usize << m;
        let votes: Vec<Vec<usize>> = (0..m)
            .map(|j| (0..cols).map(|c| (c >> j) & 1).collect())
            .collect();
        let out = majority_vote(&votes).unwrap();
        for (c, &o) in out.iter().enumerate() {
            let ones = (c as u32).count_ones() as usize;
            if ones * 2 == m || o != usize::from(ones * 2 > m) {
                odd_ties += 1;
            }
        }
    }

    let mut wrong = 0;
    let mut cases = 0;
    for m in 1..=5u32 {
        for k in 2..=4usize {
            let cols = k.pow(m);
            let votes: Vec<Vec<usize>> = (0..m)
                .map(|j| (0..cols).map(|c| c / k.pow(j) % k).collect())
                .collect();
            let out = majority_vote(&votes).unwrap();
            for (c, &o) in out.iter().enumerate() {
                let mut counts = vec![0; k];
                for v in &votes {
                    counts[v[c]] += 1;
                }
                let top = *counts.iter().max().unwrap();
                let expected = counts.iter().position(|&n| n == top).unwrap();
                wrong += usize::from(o != expected);
                cases += 1;
            }
        }
    }
    let ok = identical && m1_equal && odd_ties == 0 && wrong == 0;
    report(
        7,
        ok,
        &format!(
            "identical reports {identical}; m=1 equals single run {m1_equal}; odd-m binary ties {odd_ties}; tie-break errors {wrong}/{cases}"
        ),
    );
    assert!(ok);
}

// ---- criterion 8 -------------------------------------------------------

#[test]
fn criterion_08_sensitivity() {
    let _g = heavy();
    let data = ToyProblem::Arcs.generate(0).unwrap();
    let cfg = ToyProblem::Arcs.default_config(1000);
    let by_m = sweep(
        &data.source,
        &data.target,
        &data.target_labels,
        &cfg,
        SweepAxis::EnsembleSize,
        &[1, 11],
        200,
    )
    .unwrap();
    let by_iter = sweep(
        &data.source,
        &data.target,
        &data.target_labels,
        &cfg,
        SweepAxis::Iterations,
        &[1, 20],
        200,
    )
    .unwrap();
    let ok = by_m[1].mean_acc >= by_m[0].mean_acc
        && by_m[1].std_acc <= by_m[0].std_acc
        && by_iter[1].mean_acc >= by_iter[0].mean_acc;
    report(
        8,
        ok,
        &format!(
            "m=1 mean {:.4} std {:.4}, m=11 mean {:.4} std {:.4}; M=1 mean {:.4}, M=20 mean {:.4}",
            by_m[0].mean_acc,
            by_m[0].std_acc,
            by_m[1].mean_acc,
            by_m[1].std_acc,
            by_iter[0].mean_acc,
            by_iter[1].mean_acc
        ),
    );
    assert!(ok);
}

// ---- criterion 9 -------------------------------------------------------

#[test]
fn criterion_09_cv() {
    let data = ToyProblem::Clusters.generate(2).unwrap();
    let plan = CvPlan::default();
    let echo = TaskEcho {
        source: "s".into(),
        target: "t".into(),
        target_labels: None,
        recipe: Recipe::None,
        fit_population: FitPopulation::Pooled,
    };
    let problem = |target: UnlabeledDataset| Problem {
        source: data.source.clone(),
        target,
        label_names: vec!["0".into(), "1".into()],
        echo: echo.clone(),
    };
    let cfg = AdremConfig {
        ensemble_size: 1,
        iterations: 2,
        ..AdremConfig::default()
    };
    // a different target, and one with no rows in common, must not move the selection
    let other = ToyProblem::Arcs.generate(5).unwrap().target;
    let r1 = run_problem(
        &problem(data.target.clone()),
        &cfg,
        &CChoice::Cv(plan.clone()),
        None,
    )
    .unwrap();
    let r2 = run_problem(&problem(other), &cfg, &CChoice::Cv(plan.clone()), None).unwrap();
    let label_free =
        r1.c_selection == r2.c_selection && r1.config.c == r2.config.c && r1.accuracy.is_none();

    let a = select_c(&data.source, &plan, LearnerKind::Svm).unwrap();
    let b = select_c(&data.source, &plan, LearnerKind::Svm).unwrap();
    let reproducible = a == b;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0;
    for seed in 0..200 {
        let k = rng.random_range(2..=5);
        let n = rng.random_range(3..=80);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let ds = LabeledDataset::new(
            FeatureMatrix::dense(n, 1, vec![0.0; n]).unwrap(),
            labels.clone(),
            k,
        )
        .unwrap();
        let folds = stratified_folds(&ds, 3, seed).unwrap();
        for cls in 0..k {
            let per: Vec<usize> = (0..3)
                .map(|f| {
                    (0..n)
                        .filter(|&i| labels[i] == cls && folds.assignment[i] == f)
                        .count()
                })
                .collect();
            worst = worst.max(per.iter().max().unwrap() - per.iter().min().unwrap());
        }
    }
    let ok = label_free && reproducible && worst <= 1;
    report(
        9,
        ok,
        &format!("target-independent selection {label_free}; reproducible {reproducible}; worst per-class fold spread {worst}"),
    );
    assert!(ok);
}

// ---- criterion 10 ------------------------------------------------------

#[test]
fn criterion_10_io_round_trips() {
    let _g = heavy();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (n, d, k) = (1000, 10_000, 4);
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|_| {
            let nnz = rng.random_range(0..=30);
            (0..nnz)
                .map(|_| {
                    let scale = 10f64.powi(rng.random_range(-12..12));
                    (rng.random_range(0..d), rng.random_range(-1.0..1.0) * scale)
                })
                .collect()
        })
        .collect();
    let x = FeatureMatrix::sparse(d, rows).unwrap();
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    let origin = std::path::Path::new("memory");

    let mut buf = Vec::new();
    write_svmlight_to(&mut buf, &x, Some(&labels)).unwrap();
    let opts = SvmlightOptions {
        n_cols: Some(d),
        n_classes: Some(k),
    };
    let back = parse_svmlight(buf.as_slice(), origin)
        .unwrap()
        .into_labeled(&opts, origin)
        .unwrap();
    let svm_ok = back.features() == &x && back.labels() == labels.as_slice();

    let mut unl = Vec::new();
    write_svmlight_to(&mut unl, &x, None).unwrap();
    let back_u = parse_svmlight(unl.as_slice(), origin)
        .unwrap()
        .into_unlabeled(&opts)
        .unwrap();
    let svm_unlabeled_ok = back_u.features() == &x;

    let names: Vec<String> = (0..k).map(|c| c.to_string()).collect();
    let mut csv = Vec::new();
    write_dense_csv_to(&mut csv, &x, Some((&labels, &names))).unwrap();
    let parsed = parse_dense_csv(
        csv.as_slice(),
        origin,
        &CsvOptions {
            has_header: None,
            label: Some(LabelColumn::Name("label".into())),
        },
    )
    .unwrap();
    let mut worst = 0.0_f64;
    let mut shape_ok = parsed.features.n_rows() == n && parsed.features.n_cols() == d;
    for (a, b) in parsed.features.rows().zip(x.rows()) {
        let (a, b) = (a.to_dense(d), b.to_dense(d));
        for (p, q) in a.iter().zip(&b) {
            shape_ok &= (*p == 0.0) == (*q == 0.0);
            worst = worst.max((p - q).abs());
        }
    }
    let csv_ok = shape_ok && worst <= 1e-15 && parsed.labels.as_deref() == Some(labels.as_slice());
    let ok = svm_ok && svm_unlabeled_ok && csv_ok;
    report(
        10,
        ok,
        &format!("svmlight labeled {svm_ok}, unlabeled {svm_unlabeled_ok}; csv structure {shape_ok}, worst value error {worst:.1e}"),
    );
    assert!(ok);
}
