use rand::Rng;
use rand_distr::StandardNormal;
use superlearner::benchmark::{
    outer_cv_with_folds, run_bench, run_bench_datasets, BenchConfig, DatasetManifest, ManifestEntry,
};
use superlearner::cv::SL_LABEL;
use superlearner::{make_folds, Dataset, Execution, LearnerKind, LearnerSpec, Matrix, RngStream};

fn linear(n: usize, seed: u64) -> Dataset {
    let mut r = RngStream::new(seed).rng();
    let x: Vec<f64> = (0..n).map(|_| r.random::<f64>() * 4.0 - 2.0).collect();
    let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 0.1 * r.sample::<f64, _>(StandardNormal)).collect();
    Dataset::new(Matrix::from_vec(n, 1, x).unwrap(), y, vec!["x".into()]).unwrap()
}

fn ols() -> LearnerSpec {
    LearnerSpec::new(LearnerKind::Ols, "ols")
}

fn config(library: Vec<LearnerSpec>) -> BenchConfig {
    let mut c = BenchConfig::new(library);
    c.v_folds = 5;
    c
}

#[test]
fn poisoned_outer_fold_leaves_its_super_learner_predictions_unchanged() {
    let data = linear(120, 1);
    let cfg =
        config(vec![ols(), LearnerSpec::new(LearnerKind::Tree, "tree"), LearnerSpec::new(LearnerKind::Knn, "knn")]);
    let folds = make_folds(120, 10, &RngStream::new(2)).unwrap();
    let rng = RngStream::new(3);
    let clean = outer_cv_with_folds(&cfg, &data, &folds, &rng).unwrap();
    for v in [0, 4, 9] {
        let mut y = data.y().to_vec();
        for i in folds.validation(v) {
            y[i] = -1e6 + i as f64;
        }
        let dirty = outer_cv_with_folds(&cfg, &data.with_response(y).unwrap(), &folds, &rng).unwrap();
        for i in folds.validation(v) {
            assert_eq!(clean.sl[i], dirty.sl[i], "fold {v} unit {i}");
            assert_eq!(clean.base.z.row(i), dirty.base.z.row(i));
        }
        let other = folds.validation((v + 1) % 10)[0];
        assert_ne!(clean.sl[other], dirty.sl[other]);
    }
}

#[test]
fn ols_only_library_gives_sl_relative_mse_one() {
    let cfg = config(vec![ols()]);
    let result = run_bench_datasets(&cfg, &[("a".into(), linear(80, 4)), ("b".into(), linear(50, 5))]).unwrap();
    for d in &result.datasets {
        for r in &d.rows {
            assert_eq!(r.relative_mse, 1.0, "{} {}", d.id, r.algorithm);
        }
    }
    assert!(result.summary.iter().all(|s| s.geometric_mean == 1.0));
    let labels: Vec<&str> = result.summary.iter().map(|s| s.algorithm.as_str()).collect();
    assert_eq!(labels, [SL_LABEL, "ols"]);
}

#[test]
fn nearest_neighbour_loses_to_ols_on_linear_data() {
    let data = linear(300, 6);
    let cfg = config(vec![ols(), LearnerSpec::new(LearnerKind::Knn, "knn1").with("k", 1.0)]);
    let result = run_bench_datasets(&cfg, &[("lin".into(), data.clone())]).unwrap();
    let row = |a: &str| result.datasets[0].rows.iter().find(|r| r.algorithm == a).unwrap().clone();

    // Independent recomputation under the same outer folds.
    let folds =
        make_folds(300, 10, &RngStream::new(cfg.master_seed).child("dataset", 0).child("outer_folds", 0)).unwrap();
    let (x, y) = (data.x().column(0), data.y());
    let (mut se_ols, mut se_nn) = (0.0, 0.0);
    for i in 0..300 {
        let train: Vec<usize> = (0..300).filter(|&j| folds.fold_of(j) != folds.fold_of(i)).collect();
        let k = train.len() as f64;
        let mx = train.iter().map(|&j| x[j]).sum::<f64>() / k;
        let my = train.iter().map(|&j| y[j]).sum::<f64>() / k;
        let b = train.iter().map(|&j| (x[j] - mx) * (y[j] - my)).sum::<f64>()
            / train.iter().map(|&j| (x[j] - mx).powi(2)).sum::<f64>();
        se_ols += (y[i] - (my + b * (x[i] - mx))).powi(2);
        let nn = *train.iter().min_by(|&&a, &&c| (x[a] - x[i]).abs().total_cmp(&(x[c] - x[i]).abs())).unwrap();
        se_nn += (y[i] - y[nn]).powi(2);
    }
    let (mse_ols, mse_nn) = (se_ols / 300.0, se_nn / 300.0);
    assert!((row("ols").cvmse - mse_ols).abs() <= 1e-10 * mse_ols);
    assert!((row("knn1").cvmse - mse_nn).abs() <= 1e-10 * mse_nn);
    assert_eq!(row("ols").relative_mse, 1.0);
    assert!(row("knn1").relative_mse > 1.0);
    assert!((row("knn1").relative_mse - mse_nn / mse_ols).abs() <= 1e-9);
}

#[test]
fn failed_learner_is_excluded_and_counted() {
    let cfg = config(vec![ols(), LearnerSpec::new(LearnerKind::Knn, "knn100").with("k", 100.0)]);
    let result =
        run_bench_datasets(&cfg, &[("small".into(), linear(60, 7)), ("large".into(), linear(400, 8))]).unwrap();
    let small = &result.datasets[0];
    assert!(small.rows.iter().all(|r| r.algorithm != "knn100"));
    assert_eq!(small.failed.len(), 1);
    assert_eq!(small.failed[0].label, "knn100");
    let knn = result.summary.iter().find(|s| s.algorithm == "knn100").unwrap();
    assert_eq!(knn.n_datasets, 1);
    let sl = result.summary.iter().find(|s| s.algorithm == SL_LABEL).unwrap();
    assert_eq!(sl.n_datasets, 2);
}

#[test]
fn deterministic_from_manifest_and_parallel_matches_serial() {
    let dir = tempfile::tempdir().unwrap();
    let mut entries = Vec::new();
    for k in 0..2u64 {
        let d = linear(70, 20 + k);
        let mut s = String::from("x,y\n");
        for i in 0..d.n() {
            s.push_str(&format!("{},{}\n", d.x().get(i, 0), d.y()[i]));
        }
        let path = dir.path().join(format!("d{k}.csv"));
        std::fs::write(&path, s).unwrap();
        entries.push(ManifestEntry {
            id: format!("d{k}"),
            csv_path: path,
            target_column: "y".into(),
            drop_columns: vec![],
            expected_n: Some(70),
            expected_p: Some(1),
        });
    }
    let manifest = DatasetManifest { entries };
    let lib = vec![
        ols(),
        LearnerSpec::new(LearnerKind::Tree, "tree"),
        LearnerSpec::new(LearnerKind::Bagging, "bag").with("n_trees", 10.0),
    ];
    let mut cfg = config(lib);
    let a = run_bench(&manifest, &cfg).unwrap();
    let b = run_bench(&manifest, &cfg).unwrap();
    cfg.execution = Execution::Serial;
    let c = run_bench(&manifest, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
}
