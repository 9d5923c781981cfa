//! End-to-end checks of the `seqrec` binary: exit codes, CSV output, and
//! agreement with the library.

use std::path::Path;
use std::process::{Command, Output};

use seqrec::estimator;
use seqrec::fixture::{parse_fixture_str, TABLE1};
use seqrec::similarity::SmoothingPsi;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_seqrec"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("utf-8 stdout")
}

/// Data rows of a CSV output (comments and header stripped).
fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .skip(1)
        .map(|l| l.split(',').map(|f| f.to_string()).collect())
        .collect()
}

fn write_table1(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("table1.csv");
    std::fs::write(&path, TABLE1).unwrap();
    path
}

#[test]
fn version_prints_rng_id() {
    let out = run(&["version"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("seqrec"));
    assert!(text.contains("chacha8-splitmix64/v1"));
}

#[test]
fn unknown_subcommand_exits_2() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_exits_2() {
    let out = run(&["rates", "--config", "/nonexistent.cfg", "--out", "/tmp/x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_config_value_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "model.d = 5\nmodel.s = 10\nreveal.p = 1.5\n").unwrap();
    let out = run(&["consistency", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr).to_string();
    assert!(err.contains("reveal.p"), "{err}");
}

#[test]
fn similarity_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = write_table1(dir.path());
    let out = run(&["similarity", "--fixture", fixture.to_str().unwrap()]);
    assert!(out.status.success());
    let rows = data_rows(&stdout(&out));
    let snapshot = parse_fixture_str(TABLE1).unwrap();
    assert_eq!(rows.len(), snapshot.n());
    for row in rows {
        let i: usize = row[1].parse().unwrap();
        let sbar: f64 = row[2].parse().unwrap();
        let penalty: f64 = row[3].parse().unwrap();
        let s: f64 = row[4].parse().unwrap();
        let expect_sbar = seqrec::similarity::sbar(snapshot.query(), snapshot.row(i));
        assert_eq!(sbar, expect_sbar);
        assert_eq!(penalty, snapshot.penalty(i));
        assert_eq!(s, penalty * expect_sbar);
    }
}

#[test]
fn estimate_matches_brute_force_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = write_table1(dir.path());
    let out = run(&[
        "estimate",
        "--fixture",
        fixture.to_str().unwrap(),
        "--k",
        "2",
    ]);
    assert!(out.status.success());
    let rows = data_rows(&stdout(&out));
    let value: f64 = rows[0][6].parse().unwrap();
    assert_eq!(rows[0][0], "estimate");
    assert_eq!(rows[1][0], "degenerate");
    assert_eq!(rows[1][6], "none");

    let snapshot = parse_fixture_str(TABLE1).unwrap();
    let oracle =
        seqrec::experiments::brute_force_estimate(&snapshot, 2, SmoothingPsi::Identity).unwrap();
    assert!((value - oracle.value).abs() <= 1e-12);
    let neighbor_ids: Vec<usize> = rows[2..].iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(neighbor_ids, oracle.selection.indices());
}

#[test]
fn estimate_degenerate_tag_for_large_k() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = write_table1(dir.path());
    let out = run(&[
        "estimate",
        "--fixture",
        fixture.to_str().unwrap(),
        "--k",
        "9",
    ]);
    assert!(out.status.success());
    let rows = data_rows(&stdout(&out));
    assert_eq!(rows[0][6], "0");
    assert_eq!(rows[1][6], "reveal_set_smaller_than_k");
    let snapshot = parse_fixture_str(TABLE1).unwrap();
    let est = estimator::estimate(&snapshot, 9, SmoothingPsi::Identity).unwrap();
    assert_eq!(est.degenerate_tag(), "reveal_set_smaller_than_k");
}

#[test]
fn validate_alpha_matches_closed_form_column() {
    let out = run(&[
        "validate-alpha",
        "--d",
        "6",
        "--n",
        "8",
        "--trials",
        "2000",
        "--seed",
        "5",
    ]);
    assert!(out.status.success());
    let rows = data_rows(&stdout(&out));
    assert_eq!(rows.len(), 8);
    for row in rows {
        let i: usize = row[0].parse().unwrap();
        let closed: f64 = row[1].parse().unwrap();
        let expect = seqrec::theory::alpha_example2(8, i, 6).unwrap();
        assert_eq!(closed, expect);
    }
}

#[test]
fn rates_writes_files_with_manifests_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    std::fs::write(
        &cfg,
        "model.d = 5\nmodel.s = 10\nexperiment.n_values = 30,60,120\nrun.trials = 40\nrun.seed = 11\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let keep = dir.path().join("first");
    std::fs::create_dir_all(&keep).unwrap();
    let args = [
        "rates",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--reproducible",
    ];
    // Same command line twice: outputs must be byte-identical.
    let out = run(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in ["mae.csv", "ratefit.csv", "mae.dat"] {
        std::fs::copy(out_dir.join(name), keep.join(name)).unwrap();
    }
    let out = run(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in ["mae.csv", "ratefit.csv", "mae.dat"] {
        let a = std::fs::read(keep.join(name)).unwrap();
        let b = std::fs::read(out_dir.join(name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{name} not byte-identical");
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("# seqrec v"), "{name} lacks manifest");
        assert!(text.contains("# config: model.d = 5"));
    }
}

#[test]
fn consistency_passes_on_healthy_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("good.cfg");
    std::fs::write(
        &cfg,
        "model.d = 5\nmodel.s = 10\nexperiment.n_values = 50,800\nrun.trials = 80\nrun.seed = 3\n",
    )
    .unwrap();
    let out = run(&["consistency", "--config", cfg.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stdout: {} stderr: {}",
        stdout(&out),
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = data_rows(&stdout(&out));
    assert_eq!(rows[0][5], "true");
}

#[test]
fn consistency_fails_when_k_grows_like_n() {
    // k_n = n keeps averaging over everyone: the estimate converges to a
    // biased global mean and the error plateaus.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("broken.cfg");
    std::fs::write(
        &cfg,
        "model.d = 5\nmodel.s = 10\nexperiment.schedule = power\nexperiment.exponent = 1.0\n\
         experiment.n_values = 100,400\nrun.trials = 60\nrun.seed = 3\n",
    )
    .unwrap();
    let out = run(&["consistency", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "stdout: {}", stdout(&out));
}
