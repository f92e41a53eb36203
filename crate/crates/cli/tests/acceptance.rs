//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL line
//! per criterion and exits nonzero if any failed.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use gaprf::data::{generate_synthetic, Dataset, NoiseProfile, RawTable, SyntheticConfig};
use gaprf::eval::improvement_pct;
use gaprf::explain::{neighbors_needed, ExplainOptions, ExplanationReport, Explainer};
use gaprf::forest::Node;
use gaprf::proximity::{
    breiman_proximity_row, gap_proximity_row, gap_proximity_train_rows, reconstruct, verify_reconstruction,
};
use gaprf::{BagCounts, Forest, ForestParams, MaxFeatures, Task};
use gaprf_cli::{cmd_eval, cmd_explain, cmd_train, EvalArgs, ExplainArgs, TaskKind, TrainArgs};
use ndarray::{array, s, Array2};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn synthetic(n_rows: usize, noise: NoiseProfile, seed: u64) -> Dataset {
    generate_synthetic(&SyntheticConfig {
        n_rows,
        n_numeric: 5,
        n_categorical: 1,
        noise,
        seed,
    })
    .unwrap()
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> (T, Duration) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let out = pool.install(f);
    (out, start.elapsed())
}

/// Class ids from tertiles of a continuous target.
fn tertile_classes(y: &[f64]) -> Vec<f64> {
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (a, b) = (sorted[y.len() / 3], sorted[2 * y.len() / 3]);
    y.iter().map(|&v| if v < a { 0.0 } else if v < b { 1.0 } else { 2.0 }).collect()
}

fn exact_reconstruction() -> Outcome {
    let ds = synthetic(2500, NoiseProfile::Homoscedastic { sigma: 0.5 }, 101);
    let train = ds.slice_rows(0..2000);
    let queries = ds.features.slice(s![2000.., ..]).to_owned();
    let mut details = Vec::new();
    let mut pass = true;
    let mut check = |label: String, task: Task, labels: &[f64], leaf: usize| {
        let params = ForestParams {
            n_estimators: 100,
            min_samples_leaf: leaf,
            max_features: MaxFeatures::Sqrt,
            seed: 7,
            ..ForestParams::default()
        };
        let (report, elapsed) = single_threaded(|| {
            let forest = Forest::fit_arrays(train.features_view(), labels, task, &params).unwrap();
            verify_reconstruction(&forest, queries.view(), 1e-9).unwrap()
        });
        let ok = report.n_queries == 500 && report.max_abs_gap_error <= 1e-9 && elapsed.as_secs_f64() <= 60.0;
        pass &= ok;
        details.push(format!(
            "{label}: max err {:.2e} in {:.1}s",
            report.max_abs_gap_error,
            elapsed.as_secs_f64()
        ));
    };
    for leaf in [1, 5] {
        check(format!("regression leaf={leaf}"), Task::Regression, &train.target, leaf);
    }
    let classes = tertile_classes(&train.target);
    check("3-class leaf=1".into(), Task::Classification { n_classes: 3 }, &classes, 1);
    outcome(pass, details.join("; "))
}

fn oob_reconstruction() -> Outcome {
    let ds = synthetic(2000, NoiseProfile::Homoscedastic { sigma: 0.5 }, 102);
    let mut details = Vec::new();
    let mut pass = true;
    for leaf in [1, 5] {
        let params = ForestParams {
            n_estimators: 100,
            min_samples_leaf: leaf,
            max_features: MaxFeatures::Sqrt,
            seed: 8,
            ..ForestParams::default()
        };
        let ((max_err, checked, never), elapsed) = single_threaded(|| {
            let forest = Forest::fit(&ds, Task::Regression, &params).unwrap();
            let indices: Vec<usize> = (0..forest.n_train()).collect();
            let rows = gap_proximity_train_rows(&forest, &indices);
            let (mut max_err, mut checked, mut never) = (0.0f64, 0, 0);
            for (i, row) in rows.into_iter().enumerate() {
                if !forest.is_ever_oob(i) {
                    never += 1;
                    assert!(row.is_err());
                    continue;
                }
                let rec = reconstruct(&forest, &row.unwrap()).unwrap()[0];
                let oob = forest.predict_oob(i).unwrap()[0];
                max_err = max_err.max((rec - oob).abs());
                checked += 1;
            }
            (max_err, checked, never)
        });
        let ok = max_err <= 1e-9 && checked > 0 && elapsed.as_secs_f64() <= 60.0;
        pass &= ok;
        details.push(format!(
            "leaf={leaf}: {checked} OOB rows ({never} never OOB), max err {max_err:.2e} in {:.1}s",
            elapsed.as_secs_f64()
        ));
    }
    outcome(pass, details.join("; "))
}

fn breiman_inexactness() -> Outcome {
    let mut min_of_max = f64::INFINITY;
    let mut diverging = 0;
    let mut debug_max = 0.0f64;
    let n_forests = 20;
    for seed in 0..n_forests {
        let ds = synthetic(80, NoiseProfile::Homoscedastic { sigma: 0.5 }, 200 + seed);
        let train = ds.slice_rows(0..60);
        let queries = ds.features.slice(s![60.., ..]).to_owned();
        let params = ForestParams {
            n_estimators: 25,
            min_samples_leaf: 5,
            seed,
            ..ForestParams::default()
        };
        let forest = Forest::fit(&train, Task::Regression, &params).unwrap();
        let report = verify_reconstruction(&forest, queries.view(), 1e-9).unwrap();
        if report.max_abs_breiman_error > 1e-6 {
            diverging += 1;
        }
        min_of_max = min_of_max.min(report.max_abs_breiman_error);

        let debug = Forest::fit(&train, Task::Regression, &ForestParams { bootstrap: false, ..params }).unwrap();
        let report = verify_reconstruction(&debug, queries.view(), 1e-9).unwrap();
        debug_max = debug_max.max(report.max_abs_breiman_error);
    }
    outcome(
        diverging == n_forests && debug_max <= 1e-9,
        format!(
            "{diverging}/{n_forests} bootstrapped forests diverge (smallest max err {min_of_max:.3e}); \
             all-ones bags max err {debug_max:.2e}"
        ),
    )
}

fn hand_forest() -> Forest {
    let split = |threshold| {
        vec![
            Node::Split { feature: 0, threshold, left: 1, right: 2 },
            Node::Leaf { leaf_id: 0 },
            Node::Leaf { leaf_id: 1 },
        ]
    };
    let x = array![[1.0], [2.0], [3.0], [4.0]];
    Forest::from_structure(
        Task::Regression,
        x.view(),
        &[1.0, 2.0, 3.0, 4.0],
        vec![split(2.5), split(3.5)],
        vec![BagCounts(vec![2, 1, 1, 0]), BagCounts(vec![0, 2, 1, 1])],
    )
    .unwrap()
}

fn rows_match(got: &[f64], want: &[f64]) -> bool {
    got.iter().zip(want).all(|(a, b)| (a - b).abs() <= 1e-12)
}

fn hand_oracle() -> Outcome {
    let forest = hand_forest();
    let q = array![0.0];
    let gap = gap_proximity_row(&forest, q.view()).unwrap();
    let breiman = breiman_proximity_row(&forest, q.view()).unwrap();
    let gap_dense = gap.to_dense(4);
    let breiman_dense = breiman.to_dense(4);
    let gap_pred = reconstruct(&forest, &gap).unwrap()[0];
    let breiman_rec = reconstruct(&forest, &breiman).unwrap()[0];

    let checks = [
        ("GAP row (1/3, 1/2, 1/6, 0)", rows_match(&gap_dense, &[1.0 / 3.0, 0.5, 1.0 / 6.0, 0.0])),
        ("Breiman row (1/4, 5/12, 1/6, 0)", rows_match(&breiman_dense, &[0.25, 5.0 / 12.0, 1.0 / 6.0, 0.0])),
        ("GAP prediction 2.0", (gap_pred - 2.0).abs() <= 1e-12),
        ("Breiman reconstruction 1.5833", (breiman_rec - 1.5833).abs() <= 1e-4),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    outcome(
        failed.is_empty(),
        format!(
            "GAP row {gap_dense:?}, GAP prediction {gap_pred:.6}, Breiman row {breiman_dense:?}, \
             Breiman reconstruction {breiman_rec:.6}; mismatched: {failed:?}"
        ),
    )
}

fn row_stochasticity() -> Outcome {
    let ds = synthetic(10_000, NoiseProfile::Homoscedastic { sigma: 0.5 }, 105);
    let train = ds.slice_rows(0..5000);
    let queries = ds.features.slice(s![5000.., ..]).to_owned();
    let params = ForestParams {
        n_estimators: 100,
        min_samples_leaf: 2,
        max_features: MaxFeatures::Sqrt,
        seed: 5,
        ..ForestParams::default()
    };
    let forest = Forest::fit(&train, Task::Regression, &params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let query_ids = sample(&mut rng, queries.nrows(), 5000).into_vec();
    let train_ids = sample(&mut rng, train.n_rows(), 5000).into_vec();

    let (mut n_rows, mut max_dev, mut bad_entries, mut self_weight) = (0usize, 0.0f64, 0usize, 0.0f64);
    let mut inspect = |row: &gaprf::proximity::ProximityRow| {
        n_rows += 1;
        max_dev = max_dev.max((row.sum() - 1.0).abs());
        bad_entries += row.entries.iter().filter(|e| !(0.0..=1.0).contains(&e.1)).count();
    };
    for &q in &query_ids {
        inspect(&gap_proximity_row(&forest, queries.row(q)).unwrap());
    }
    let mut never = 0;
    for (&i, row) in train_ids.iter().zip(gap_proximity_train_rows(&forest, &train_ids)) {
        match row {
            Ok(row) => {
                self_weight = self_weight.max(row.weight(i));
                inspect(&row);
            }
            Err(_) => never += 1,
        }
    }
    outcome(
        n_rows + never == 10_000 && max_dev <= 1e-12 && bad_entries == 0 && self_weight == 0.0,
        format!(
            "{n_rows} rows ({never} sampled training rows never OOB), max |sum - 1| {max_dev:.2e}, \
             entries outside [0,1]: {bad_entries}, max k_ii {self_weight}"
        ),
    )
}

fn neighbor_counts() -> Outcome {
    let ds = synthetic(6000, NoiseProfile::Homoscedastic { sigma: 0.5 }, 106);
    let train = ds.slice_rows(0..5000);
    let test = ds.features.slice(s![5000.., ..]).to_owned();
    let params = ForestParams {
        n_estimators: 200,
        min_samples_leaf: 5,
        max_features: MaxFeatures::Sqrt,
        seed: 6,
        ..ForestParams::default()
    };
    let forest = Forest::fit(&train, Task::Regression, &params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let ids = sample(&mut rng, test.nrows(), 50).into_vec();
    let queries: Array2<f64> = test.select(ndarray::Axis(0), &ids);
    let needed = neighbors_needed(&forest, queries.view(), &[1.0]).unwrap();
    let curves_ok = needed.curves.iter().all(|c| {
        c.cumulative.windows(2).all(|w| w[0] <= w[1]) && c.weights.windows(2).all(|w| w[0] >= w[1])
    });
    let limit = train.n_rows() as f64 / 5.0;
    outcome(
        needed.mean[0] < limit && curves_ok,
        format!(
            "mean neighbors for weight 1.0: {:.1} (limit {limit}), median {:.1}; curves monotone with nonincreasing increments: {curves_ok}",
            needed.mean[0], needed.median[0]
        ),
    )
}

fn heteroscedastic_split() -> (Dataset, Dataset) {
    let ds = synthetic(7000, NoiseProfile::Heteroscedastic { low: 0.1, high: 2.0 }, 107);
    (ds.slice_rows(0..5000), ds.slice_rows(5000..7000))
}

fn confidence_correlation() -> Outcome {
    let start = Instant::now();
    let (train, test) = heteroscedastic_split();
    let params = ForestParams {
        n_estimators: 200,
        min_samples_leaf: 5,
        max_features: MaxFeatures::Sqrt,
        seed: 7,
        ..ForestParams::default()
    };
    let forest = Forest::fit(&train, Task::Regression, &params).unwrap();
    let explainer = Explainer::new(&forest, ExplainOptions::default());
    let table = gaprf::explain::confidence_vs_error(&explainer, test.features_view(), &test.target, 10).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let per_point = table.pearson_per_point.unwrap_or(f64::NAN);
    let deciles = table.pearson_decile_means.unwrap_or(f64::NAN);
    let bottom = table.deciles.first().unwrap().mean_abs_error;
    let top = table.deciles.last().unwrap().mean_abs_error;
    outcome(
        per_point > 0.2 && deciles > 0.8 && top >= 2.0 * bottom && top > bottom && elapsed <= 300.0,
        format!(
            "pearson per point {per_point:.3}, over decile means {deciles:.3}; \
             top/bottom decile mean error {top:.3}/{bottom:.3} = {:.2}x; {elapsed:.1}s",
            top / bottom
        ),
    )
}

fn write_rows(raw: &RawTable, rows: &[usize], path: &Path) {
    let table = RawTable {
        header: raw.header.clone(),
        rows: rows.iter().map(|&r| raw.rows[r].clone()).collect(),
    };
    table.write_csv(path).unwrap();
}

fn train_args(data: &Path, model: &Path) -> TrainArgs {
    TrainArgs {
        data: Some(data.to_path_buf()),
        synthetic_config: None,
        target: Some("y".into()),
        timestamp: Some("t".into()),
        task: TaskKind::Regression,
        trees: 200,
        max_depth: None,
        max_features: "sqrt".into(),
        min_samples_leaf: 5,
        no_bootstrap: false,
        search_config: None,
        seed: 11,
        train_fraction: Some(5.0 / 7.0 + 1e-9),
        test_out: Some(model.with_extension("test.csv")),
        model: model.to_path_buf(),
    }
}

fn explain_args(model: &Path, data: &Path, out: &Path) -> ExplainArgs {
    ExplainArgs {
        model: model.to_path_buf(),
        data: data.to_path_buf(),
        threshold: 0.95,
        sample: None,
        seed: 0,
        in_bag_errors: false,
        out: out.to_path_buf(),
    }
}

fn read_report(path: &Path) -> ExplanationReport {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn interval_coverage(dir: &Path) -> Outcome {
    let data = dir.join("hetero.csv");
    let ds = synthetic(7000, NoiseProfile::Heteroscedastic { low: 0.1, high: 2.0 }, 108);
    ds.write_csv(&data).unwrap();
    let model = dir.join("model.json");
    let trained = cmd_train(&train_args(&data, &model)).unwrap();
    assert_eq!((trained.n_train, trained.n_test), (5000, 2000));

    let test_path = model.with_extension("test.csv");
    let eval = cmd_eval(&EvalArgs {
        model: model.clone(),
        data: test_path.clone(),
        baseline: None,
        deciles: 10,
        in_bag_errors: false,
        out: dir.join("eval"),
    })
    .unwrap();
    let mut order: Vec<usize> = (0..eval.points.len()).collect();
    order.sort_by(|&a, &b| eval.points[b].abs_error.total_cmp(&eval.points[a].abs_error));
    let highest: Vec<usize> = order[..5].to_vec();
    let lowest: Vec<usize> = order[order.len() - 5..].to_vec();

    let raw = RawTable::read_csv(&test_path).unwrap();
    let queries = dir.join("extremes.csv");
    write_rows(&raw, &[highest.clone(), lowest.clone()].concat(), &queries);
    let out = dir.join("explain_extremes");
    let explained = cmd_explain(&explain_args(&model, &queries, &out)).unwrap();
    assert_eq!(explained.reports.len(), 10);

    let contains = |i: usize| read_report(&out.join(format!("report_{i}.json"))).neighbor_label_interval.contains_realized.unwrap();
    let outside_high = (0..5).filter(|&i| !contains(i)).count();
    let inside_low = (5..10).filter(|&i| contains(i)).count();
    outcome(
        outside_high >= 3 && inside_low >= 4,
        format!("highest-error points outside the 95% interval: {outside_high}/5; lowest-error points inside: {inside_low}/5"),
    )
}

fn metric_formula() -> Outcome {
    let pct = improvement_pct(0.345, 0.310);
    outcome((pct - 10.13).abs() <= 0.05, format!("improvement_pct(0.345, 0.310) = {pct:.4}"))
}

fn dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism(dir: &Path) -> Outcome {
    let data = dir.join("det.csv");
    synthetic(1400, NoiseProfile::Heteroscedastic { low: 0.1, high: 2.0 }, 110)
        .write_csv(&data)
        .unwrap();
    let run = |tag: &str| {
        let model = dir.join(format!("model_{tag}.json"));
        let mut args = train_args(&data, &model);
        args.trees = 50;
        cmd_train(&args).unwrap();
        let out = dir.join(format!("explain_{tag}"));
        let mut ex = explain_args(&model, &model.with_extension("test.csv"), &out);
        ex.sample = Some(20);
        cmd_explain(&ex).unwrap();
        let eval_out = dir.join(format!("eval_{tag}"));
        cmd_eval(&EvalArgs {
            model: model.clone(),
            data: model.with_extension("test.csv"),
            baseline: None,
            deciles: 10,
            in_bag_errors: false,
            out: eval_out.clone(),
        })
        .unwrap();
        (fs::read(&model).unwrap(), dir_files(&out), dir_files(&eval_out))
    };
    let (model_a, explain_a, eval_a) = run("a");
    let (model_b, explain_b, eval_b) = run("b");
    let models = model_a == model_b;
    let explains = explain_a == explain_b;
    let evals = eval_a == eval_b;
    outcome(
        models && explains && evals,
        format!(
            "model files identical: {models} ({} bytes); {} explain outputs identical: {explains}; eval outputs identical: {evals}",
            model_a.len(),
            explain_a.len()
        ),
    )
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("1 exact GAP reconstruction", Box::new(exact_reconstruction)),
        ("2 OOB reconstruction", Box::new(oob_reconstruction)),
        ("3 Breiman inexactness", Box::new(breiman_inexactness)),
        ("4 hand oracle", Box::new(hand_oracle)),
        ("5 row stochasticity", Box::new(row_stochasticity)),
        ("6 neighbors needed", Box::new(neighbor_counts)),
        ("7 confidence vs test error", Box::new(confidence_correlation)),
        ("8 neighbor label intervals", Box::new(|| interval_coverage(dir.path()))),
        ("9 improvement formula", Box::new(metric_formula)),
        ("10 determinism", Box::new(|| determinism(dir.path()))),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let result = run();
        println!("[{}] criterion {name}: {}", if result.pass { "PASS" } else { "FAIL" }, result.detail);
        failed += usize::from(!result.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
