//! Command behavior: artifacts, determinism, exit codes.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

use qkernel::cli::{
    cmd_baselines, cmd_convergence, cmd_fixed_kernel, cmd_metric_ablation, cmd_search,
    read_circuit_arg, DatasetSpec, RunConfig,
};
use qkernel::metrics::ConfusionCounts;

fn toy_config(out_dir: PathBuf) -> RunConfig {
    let mut config = RunConfig::default();
    config.seed = 42;
    config.out_dir = out_dir;
    config.dataset = DatasetSpec::Adhoc {
        n: 2,
        gap: 0.3,
        count: 150,
        scaling: None,
    };
    config.split.n_train = 30;
    config.split.n_valid = 30;
    config.search.k = 3;
    config.search.m = 1;
    config.search.l_max = 2;
    config.search.bo.n_init = 6;
    config.search.bo.iterations = Some(2);
    config.baselines.gamma = vec![0.5, 1.0];
    config.baselines.coef0 = vec![0.0];
    config.baselines.c = vec![1.0];
    config
}

#[test]
fn search_writes_artifacts_and_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config_a = toy_config(dir.path().join("a"));
    let config_b = toy_config(dir.path().join("b"));
    cmd_search(&config_a).unwrap();
    cmd_search(&config_b).unwrap();

    for file in ["search.json", "search.csv"] {
        let a = fs::read(config_a.out_dir.join(file)).unwrap();
        let b = fs::read(config_b.out_dir.join(file)).unwrap();
        // The configs differ only in out_dir; strip it before comparing.
        let a = String::from_utf8(a).unwrap().replace(
            config_a.out_dir.to_str().unwrap(),
            "OUT",
        );
        let b = String::from_utf8(b).unwrap().replace(
            config_b.out_dir.to_str().unwrap(),
            "OUT",
        );
        assert_eq!(a, b, "{file} differs between reruns");
    }
}

#[test]
fn search_output_is_internally_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = toy_config(dir.path().to_path_buf());
    config.dump_gram = true;
    let output = cmd_search(&config).unwrap();
    assert_eq!(output.layers.len(), 2);
    for layer in &output.layers {
        assert!(layer.beam.len() <= config.search.k);
        for model in &layer.beam {
            // The reported BIC always satisfies its defining identity.
            let expected =
                -2.0 * model.log_likelihood + model.d as f64 * (model.n_eval as f64).ln();
            assert!((model.bic - expected).abs() < 1e-10);
        }
    }
    // Best BIC never rises with depth.
    let best: Vec<f64> = output
        .layers
        .iter()
        .map(|l| l.beam[0].bic)
        .collect();
    for pair in best.windows(2) {
        assert!(pair[1] <= pair[0]);
    }
    assert!(config.out_dir.join("gram_train.csv").exists());

    // The CSV carries one record per beam entry; descriptor cells hold
    // embedded newlines inside quotes, so parse it properly.
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(config.out_dir.join("search.csv"))
        .unwrap();
    let records: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    let rows: usize = output.layers.iter().map(|l| l.beam.len()).sum();
    assert_eq!(records.len(), rows);
    for record in &records {
        let descriptor = qkernel::circuit::CircuitDescriptor::from_text(&record[2]).unwrap();
        let d: usize = record[3].parse().unwrap();
        assert_eq!(descriptor.param_count(), d);
    }
}

#[test]
fn baselines_share_the_split_and_predictions_recompute() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_config(dir.path().to_path_buf());
    let search = cmd_search(&config).unwrap();
    let baselines = cmd_baselines(&config).unwrap();
    assert_eq!(search.split_digest, baselines.split_digest);
    assert_eq!(baselines.entries.len(), 4);

    // Recompute the test metrics from the saved predictions.
    let prepared = qkernel::cli::prepare_data(&config).unwrap();
    for entry in &baselines.entries {
        let confusion =
            ConfusionCounts::from_labels(&prepared.test.y, &entry.test_predictions).unwrap();
        let report = confusion.report::<f64>().unwrap();
        assert!((report.balanced_accuracy - entry.test_metrics.balanced_accuracy).abs() < 1e-12);
        assert!((report.f1 - entry.test_metrics.f1).abs() < 1e-12);
    }
}

#[test]
fn convergence_rows_match_standalone_search_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_config(dir.path().join("sweep"));
    let sweep = cmd_convergence(&config, &[3], &[0, 1]).unwrap();
    assert_eq!(sweep.rows.len(), 2);

    // The (K=3, M=1) row equals a plain search at the same seed.
    let mut single = toy_config(dir.path().join("single"));
    single.search.k = 3;
    single.search.m = 1;
    let search = cmd_search(&single).unwrap();
    let row = &sweep.rows[1];
    assert_eq!(row.k, 3);
    assert_eq!(row.m, 1);
    assert_eq!(
        row.test_metrics.lowest_class_accuracy,
        search.test_metrics.lowest_class_accuracy
    );

    assert!(cmd_convergence(&config, &[2], &[3]).is_err());
    let csv = fs::read_to_string(config.out_dir.join("convergence.csv")).unwrap();
    assert_eq!(
        csv.lines().filter(|l| !l.starts_with('#')).count(),
        1 + sweep.rows.len()
    );
}

#[test]
fn metric_ablation_emits_three_series_and_bic_matches_search() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_config(dir.path().to_path_buf());
    let ablation = cmd_metric_ablation(&config).unwrap();
    assert_eq!(ablation.series.len(), 3);
    let names: Vec<&str> = ablation.series.iter().map(|s| s.metric.as_str()).collect();
    assert_eq!(names, ["bic", "validation_accuracy", "f1"]);

    let search = cmd_search(&config).unwrap();
    let bic_series = &ablation.series[0];
    for ((layer, model, _), search_layer) in bic_series.per_layer.iter().zip(&search.layers) {
        assert_eq!(*layer, search_layer.layer);
        assert_eq!(model.bic, search_layer.beam[0].bic);
        assert_eq!(model.descriptor, search_layer.beam[0].descriptor);
    }
    // The BIC series is non-increasing per the growth guarantee.
    for pair in bic_series.per_layer.windows(2) {
        assert!(pair[1].1.bic <= pair[0].1.bic);
    }
}

#[test]
fn fixed_kernel_scales_and_validates_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_config(dir.path().to_path_buf());
    let descriptor = read_circuit_arg("1,2/0,0").unwrap();
    let output = cmd_fixed_kernel(&config, &descriptor, &[20, 40]).unwrap();
    assert_eq!(output.rows.len(), 2);
    for row in &output.rows {
        assert!(row.test_metrics.tpr >= 0.0 && row.test_metrics.tpr <= 1.0);
        assert!(row.test_metrics.tnr >= 0.0 && row.test_metrics.tnr <= 1.0);
    }
    // 30 train + 30 validation samples are available.
    let err = cmd_fixed_kernel(&config, &descriptor, &[61]).unwrap_err();
    assert!(err.is_usage());
    // Wrong qubit count for the dataset.
    let three_qubit = read_circuit_arg("1/1/1").unwrap();
    assert!(cmd_fixed_kernel(&config, &three_qubit, &[20]).is_err());
}

#[test]
fn binary_reports_usage_errors_with_exit_code_two() {
    let exe = env!("CARGO_BIN_EXE_qkernel");
    let dir = tempfile::tempdir().unwrap();

    // Missing dataset file.
    let config_path = dir.path().join("bad.json");
    fs::write(
        &config_path,
        r#"{"dataset": {"kind": "csv", "path": "/nonexistent/q.csv",
            "label_column": "label", "feature_columns": ["a", "b"]}}"#,
    )
    .unwrap();
    let output = Command::new(exe)
        .args(["search", "--config"])
        .arg(&config_path)
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("/nonexistent/q.csv"), "stderr: {stderr}");

    // Bad circuit text.
    let output = Command::new(exe)
        .args(["fixed-kernel", "--circuit", "7,7/7,7", "--train-sizes", "20"])
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn binary_runs_a_toy_search_end_to_end() {
    let exe = env!("CARGO_BIN_EXE_qkernel");
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("toy.json");
    let config = toy_config(dir.path().to_path_buf());
    fs::write(&config_path, serde_json::to_string(&config).unwrap()).unwrap();
    let output = Command::new(exe)
        .args(["search", "--config"])
        .arg(&config_path)
        .args(["--threads", "2"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("final test"));
    assert!(dir.path().join("search.json").exists());
}
