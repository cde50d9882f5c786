//! End-to-end pipeline through the binary: gen → gt → build → encode →
//! search → bench → tuners.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vicinity"))
}

fn run(args: &[&str]) -> (String, String) {
    let out = bin().args(args).output().expect("binary runs");
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(
        out.status.success(),
        "command {args:?} failed\nstdout: {stdout}\nstderr: {stderr}"
    );
    (stdout, stderr)
}

fn path_str(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let base = path_str(dir.path(), "base.fvecs");
    let queries = path_str(dir.path(), "queries.fvecs");
    let gt = path_str(dir.path(), "gt.ivecs");
    let index = path_str(dir.path(), "index.vsgi");
    let codes = path_str(dir.path(), "codes.vsqc");

    run(&[
        "gen", "--out", &base, "--n", "1200", "--dim", "12", "--seed", "7", "--mode", "clustered",
        "--clusters", "8",
    ]);
    run(&[
        "gen", "--out", &queries, "--n", "24", "--dim", "12", "--seed", "8", "--mode", "uniform",
    ]);
    run(&[
        "gt", "--base", &base, "--queries", &queries, "--out", &gt, "--k", "10",
    ]);
    run(&[
        "build",
        "--base",
        &base,
        "--out",
        &index,
        "--max-degree",
        "16",
        "--ef-construction",
        "64",
        "--pruning-rates",
        "1.0,1.5,2.0",
    ]);
    run(&[
        "encode", "--base", &base, "--out", &codes, "--bits", "8", "--quantile", "0.99",
    ]);

    // full-precision search with recall
    let (stdout, _) = run(&[
        "search", "--index", &index, "--base", &base, "--queries", &queries, "--gt", &gt, "--k",
        "10", "--ef", "80",
    ]);
    let recall_line = stdout
        .lines()
        .find(|l| l.starts_with("recall@10:"))
        .expect("recall printed");
    let recall: f64 = recall_line.split(':').nth(1).unwrap().trim().parse().unwrap();
    assert!(recall >= 0.9, "pipeline recall {recall}");

    // quantized search with redundant storage
    let (stdout_q, _) = run(&[
        "search",
        "--index",
        &index,
        "--base",
        &base,
        "--queries",
        &queries,
        "--codes",
        &codes,
        "--gt",
        &gt,
        "--k",
        "10",
        "--ef",
        "80",
        "--redundancy-ratio",
        "0.5",
        "--stride",
        "4",
        "--depth",
        "2",
    ]);
    assert!(stdout_q.contains("recall@10:"));

    // environment tuner emits a JSON object with both knobs
    let (elp_out, _) = run(&[
        "tune-elp", "--index", &index, "--base", &base, "--strides", "0,2", "--depths", "1",
        "--samples", "8", "--repetitions", "3", "--ef", "40",
    ]);
    let elp: serde_json::Value = serde_json::from_str(elp_out.trim()).unwrap();
    assert!(elp.get("prefetch_stride").is_some());
    assert!(elp.get("prefetch_depth").is_some());

    // index-parameter sweep: every evaluated config reported, frontier
    // non-empty, selection present
    let (ilp_out, _) = run(&[
        "tune-ilp",
        "--index",
        &index,
        "--base",
        &base,
        "--queries",
        &queries,
        "--gt",
        &gt,
        "--degree-limits",
        "8,16",
        "--pruning-rates",
        "1.0,2.0",
        "--ef",
        "40",
        "--k",
        "10",
        "--min-recall",
        "0.0",
    ]);
    let ilp: serde_json::Value = serde_json::from_str(&ilp_out).unwrap();
    assert_eq!(ilp["evaluated"].as_array().unwrap().len(), 4);
    assert!(!ilp["frontier"].as_array().unwrap().is_empty());
    assert!(ilp["selection"].is_object());

    // decision-model training emits valid model JSON
    let model_path = path_str(dir.path(), "model.json");
    run(&[
        "train-qlp",
        "--index",
        &index,
        "--base",
        &base,
        "--queries",
        &queries,
        "--gt",
        &gt,
        "--k",
        "10",
        "--target-recall",
        "0.9",
        "--ef-low",
        "20",
        "--ef-high",
        "80",
        "--checkpoint-hop",
        "5",
        "--out",
        &model_path,
    ]);
    let model_json = std::fs::read_to_string(&model_path).unwrap();
    assert!(vicinity::tune::DecisionModel::from_json(&model_json).is_ok());
}

#[test]
fn bench_subcommand_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let base = path_str(dir.path(), "base.fvecs");
    let queries = path_str(dir.path(), "queries.fvecs");
    run(&[
        "gen", "--out", &base, "--n", "600", "--dim", "8", "--seed", "11", "--mode", "clustered",
        "--clusters", "6",
    ]);
    run(&[
        "gen", "--out", &queries, "--n", "10", "--dim", "8", "--seed", "12", "--mode", "uniform",
    ]);

    let config = serde_json::json!({
        "dataset": base,
        "queries": queries,
        "build": {
            "max_degree": 12,
            "ef_construction": 48,
            "pruning_rates": [1.0, 1.5, 2.0]
        },
        "search_grid": {
            "ef_search": [20, 40],
            "degree_limit": [12],
            "pruning_rate": [1.0, 2.0]
        },
        "quantizer": { "bits": 8, "quantile": 0.99 },
        "redundancy_ratio": 0.5,
        "k": 5,
        "output": path_str(dir.path(), "report")
    });
    let config_path = dir.path().join("bench.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();

    let (stdout, _) = run(&["bench", "--config", config_path.to_str().unwrap()]);
    let mut lines = stdout.lines();
    assert_eq!(
        lines.next().unwrap(),
        "ef_s,m_s,alpha_s,recall_at_k,qps,mean_hops,n_lp,n_hp,t_lp,t_hp"
    );
    assert_eq!(lines.count(), 4, "2 ef × 1 degree × 2 rates");

    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv, stdout);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 4);

    // determinism: identical config and seed reproduce identical recalls
    let (stdout2, _) = run(&["bench", "--config", config_path.to_str().unwrap()]);
    let recalls = |s: &str| -> Vec<String> {
        s.lines()
            .skip(1)
            .map(|l| l.split(',').nth(3).unwrap().to_owned())
            .collect()
    };
    assert_eq!(recalls(&stdout), recalls(&stdout2));
}

#[test]
fn rejects_missing_and_corrupt_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let missing = path_str(dir.path(), "nope.fvecs");
    let out = bin()
        .args(["build", "--base", &missing, "--out", &path_str(dir.path(), "x.vsgi")])
        .output()
        .unwrap();
    assert!(!out.status.success());

    let garbage = dir.path().join("bad.vsgi");
    std::fs::write(&garbage, b"not an index").unwrap();
    let out = bin()
        .args([
            "search",
            "--index",
            garbage.to_str().unwrap(),
            "--base",
            &missing,
            "--queries",
            &missing,
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("index"), "unhelpful error: {stderr}");
}
