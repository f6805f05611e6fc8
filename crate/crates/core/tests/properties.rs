use adrem::adapt::{balanced_subsample, majority_vote, schedule};
use adrem::data::{class_counts, FeatureMatrix, LabeledDataset};
use adrem::io::{parse_svmlight, write_svmlight_to, SvmlightOptions};
use adrem::linear::{
    balanced_da_loss, svm_da_loss, train_svm, LearnerKind, LinearModel, SolverConfig,
};
use adrem::preprocess::{apply_scaler, fit_scaler, ScalerKind};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = FeatureMatrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(n, d)| {
        prop::collection::vec(prop_oneof![Just(0.0), -5.0..5.0f64], n * d)
            .prop_map(move |v| FeatureMatrix::dense(n, d, v).unwrap())
    })
}

fn labeled(max_rows: usize, max_cols: usize, k: usize) -> impl Strategy<Value = LabeledDataset> {
    matrix(max_rows, max_cols).prop_flat_map(move |x| {
        let n = x.n_rows();
        prop::collection::vec(0..k, n)
            .prop_map(move |y| LabeledDataset::new(x.clone(), y, k).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn select_rows_composes(x in matrix(12, 5), a in prop::collection::vec(0usize..1000, 0..15), b in prop::collection::vec(0usize..1000, 0..15)) {
        let a: Vec<usize> = a.into_iter().map(|i| i % x.n_rows()).collect();
        let b: Vec<usize> = if a.is_empty() { Vec::new() } else { b.into_iter().map(|i| i % a.len()).collect() };
        let composed: Vec<usize> = b.iter().map(|&i| a[i]).collect();
        prop_assert_eq!(x.select_rows(&a).unwrap().select_rows(&b).unwrap(), x.select_rows(&composed).unwrap());
        let s = x.to_sparse();
        prop_assert_eq!(s.select_rows(&a).unwrap().select_rows(&b).unwrap(), s.select_rows(&composed).unwrap());
    }

    #[test]
    fn sparse_and_dense_rows_agree(x in matrix(10, 8), w in prop::collection::vec(-3.0..3.0f64, 8)) {
        let s = x.to_sparse();
        prop_assert_eq!(s.to_dense(), x.clone());
        for (a, b) in x.rows().zip(s.rows()) {
            let w = &w[..x.n_cols()];
            prop_assert!((a.dot(w) - b.dot(w)).abs() <= 1e-12);
            prop_assert!((a.squared_norm() - b.squared_norm()).abs() <= 1e-12);
        }
    }

    #[test]
    fn svm_on_sparse_storage_matches_dense(ds in labeled(16, 4, 2), seed in any::<u64>()) {
        let cfg = SolverConfig::new(1.0).with_seed(seed);
        let sparse = ds.with_features(ds.features().to_sparse()).unwrap();
        let a = train_svm(&ds, None, &cfg).unwrap();
        let b = train_svm(&sparse, None, &cfg).unwrap();
        let (pa, pb) = (a.decision_values(ds.features()).unwrap(), b.decision_values(ds.features()).unwrap());
        for i in 0..ds.n_rows() {
            prop_assert!((pa.get(i, 1) - pb.get(i, 1)).abs() <= 1e-6);
        }
    }

    #[test]
    fn losses_scale_with_c_except_the_norm(ds in labeled(10, 3, 3), t in matrix(10, 3), w in prop::collection::vec(-1.0..1.0f64, 9), c in 0.01..10.0f64) {
        prop_assume!(t.n_cols() == ds.n_cols());
        let d = ds.n_cols();
        let model = LinearModel::from_parts(LearnerKind::Svm, 3, d, w[..3 * d].to_vec(), vec![0.1, -0.2, 0.3]).unwrap();
        let y: Vec<usize> = (0..t.n_rows()).map(|i| i % 3).collect();
        let norm = model.weight_norm_sq();
        let base = svm_da_loss(&model, &ds, &t, &y, 1.0).unwrap() - norm;
        let scaled = svm_da_loss(&model, &ds, &t, &y, c).unwrap() - norm;
        prop_assert!((scaled - c * base).abs() <= 1e-9 * (1.0 + c * base.abs()));
        let bal = balanced_da_loss(&model, &ds, &t, &y, c, 3).unwrap();
        prop_assert!(bal >= norm);
    }

    #[test]
    fn schedule_is_monotone_and_ends_at_all(m in 1usize..200, t in 1usize..100_000) {
        let mut prev = 0;
        for k in 0..=m {
            let n = schedule(k, m, t);
            prop_assert!(n >= prev && n <= t);
            prev = n;
        }
        prop_assert_eq!(schedule(0, m, t), 0);
        prop_assert_eq!(schedule(m, m, t), t);
    }

    #[test]
    fn balanced_draws_have_even_quotas(labels in prop::collection::vec(0usize..4, 1..80), frac in 0.0..=1.0f64, seed in any::<u64>()) {
        let n = (frac * labels.len() as f64) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = balanced_subsample(&labels, n, 4, &mut rng).unwrap();
        prop_assert_eq!(s.indices.len(), n);
        let present: Vec<usize> = (0..4).filter(|c| labels.contains(c)).collect();
        prop_assert_eq!(s.degenerate, present.len() == 1);
        let drawn = class_counts(&s.indices.iter().map(|&i| labels[i]).collect::<Vec<_>>(), 4);
        let got: Vec<usize> = present.iter().map(|&c| drawn[c]).collect();
        prop_assert!(got.iter().max().unwrap() - got.iter().min().unwrap() <= 1);
        prop_assert_eq!(got.iter().sum::<usize>(), n);
    }

    #[test]
    fn vote_is_a_mode_and_ignores_member_order(votes in (1usize..8, 1usize..20).prop_flat_map(|(m, n)| prop::collection::vec(prop::collection::vec(0usize..4, n), m))) {
        let out = majority_vote(&votes).unwrap();
        let mut reversed = votes.clone();
        reversed.reverse();
        prop_assert_eq!(&majority_vote(&reversed).unwrap(), &out);
        for (i, &o) in out.iter().enumerate() {
            let count = |l: usize| votes.iter().filter(|v| v[i] == l).count();
            for l in 0..4 {
                prop_assert!(count(o) > count(l) || (count(o) == count(l) && o <= l));
            }
        }
    }

    #[test]
    fn svmlight_round_trip(ds in labeled(20, 12, 3)) {
        let mut buf = Vec::new();
        write_svmlight_to(&mut buf, ds.features(), Some(ds.labels())).unwrap();
        let opts = SvmlightOptions { n_cols: Some(ds.n_cols()), n_classes: Some(3) };
        let origin = std::path::Path::new("mem");
        let back = parse_svmlight(buf.as_slice(), origin).unwrap().into_labeled(&opts, origin).unwrap();
        prop_assert_eq!(back.features(), &ds.features().to_sparse());
        prop_assert_eq!(back.labels(), ds.labels());
    }

    #[test]
    fn standardized_columns_have_zero_mean_unit_std(x in matrix(20, 5)) {
        prop_assume!(x.n_rows() >= 2);
        let stats = fit_scaler(ScalerKind::Standardize, &[&x]).unwrap();
        let z = apply_scaler(&stats, &x).unwrap();
        let n = x.n_rows() as f64;
        for j in 0..x.n_cols() {
            let col: Vec<f64> = x.rows().map(|r| r.to_dense(x.n_cols())[j]).collect();
            let zc: Vec<f64> = z.rows().map(|r| r.to_dense(x.n_cols())[j]).collect();
            let spread = col.iter().cloned().fold(f64::MIN, f64::max) - col.iter().cloned().fold(f64::MAX, f64::min);
            let mean = zc.iter().sum::<f64>() / n;
            prop_assert!(mean.abs() <= 1e-9);
            if spread > 1e-6 {
                let var = zc.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                prop_assert!((var - 1.0).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn binary_prediction_follows_the_sign(x in matrix(10, 3), w in prop::collection::vec(-2.0..2.0f64, 3), b in -1.0..1.0f64) {
        let d = x.n_cols();
        let model = LinearModel::from_parts(LearnerKind::Svm, 2, d, w[..d].to_vec(), vec![b]).unwrap();
        let scores = model.decision_values(&x).unwrap();
        let pred = model.predict(&x).unwrap();
        for (i, row) in x.rows().enumerate() {
            let z = row.dot(&w[..d]) + b;
            prop_assert!((scores.get(i, 1) - z).abs() <= 1e-12);
            prop_assert_eq!(pred[i], usize::from(z > 0.0));
        }
    }
}
