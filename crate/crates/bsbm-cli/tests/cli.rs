//! End-to-end tests of the `bsbm` binary: exit codes, file formats, and the
//! byte-identical-rerun contract.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bsbm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bsbm"))
}

fn run(args: &[&str]) -> Output {
    bsbm().args(args).output().expect("binary runs")
}

fn stderr_line(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).trim().to_string()
}

fn generate_fixture(dir: &Path, p: &str, seed: &str) -> (String, String, String) {
    let matrix = dir.join("a.mtx").to_str().unwrap().to_string();
    let labels1 = dir.join("l1.txt").to_str().unwrap().to_string();
    let labels2 = dir.join("l2.txt").to_str().unwrap().to_string();
    let out = run(&[
        "generate",
        "--n1",
        "60",
        "--n2",
        "400",
        "--gamma2",
        "0.5",
        "--delta",
        "0.5",
        "--p",
        p,
        "--seed",
        seed,
        "--out-matrix",
        &matrix,
        "--out-labels1",
        &labels1,
        "--out-labels2",
        &labels2,
    ]);
    assert!(out.status.success(), "{}", stderr_line(&out));
    (matrix, labels1, labels2)
}

#[test]
fn generate_writes_parseable_matrix_market() {
    let dir = tempfile::tempdir().unwrap();
    let (matrix, labels1, _) = generate_fixture(dir.path(), "0.08", "7");
    let text = fs::read_to_string(&matrix).unwrap();
    assert!(text.starts_with("%%MatrixMarket matrix coordinate pattern general\n"));
    let labels = fs::read_to_string(&labels1).unwrap();
    assert_eq!(labels.lines().count(), 60);
    assert!(labels.lines().all(|l| l == "+1" || l == "-1"));
}

#[test]
fn generate_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    let (m1, ..) = generate_fixture(dir.path(), "0.08", "7");
    let (m2, ..) = generate_fixture(dir2.path(), "0.08", "7");
    assert_eq!(fs::read(&m1).unwrap(), fs::read(&m2).unwrap());
    let dir3 = tempfile::tempdir().unwrap();
    let (m3, ..) = generate_fixture(dir3.path(), "0.08", "8");
    assert_ne!(fs::read(&m1).unwrap(), fs::read(&m3).unwrap());
}

#[test]
fn generate_rejects_out_of_range_edge_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "generate",
        "--n1",
        "4",
        "--n2",
        "4",
        "--delta",
        "1.0",
        "--p",
        "0.5",
        "--seed",
        "1",
        "--out-matrix",
        dir.path().join("a.mtx").to_str().unwrap(),
        "--out-labels1",
        dir.path().join("l1.txt").to_str().unwrap(),
        "--out-labels2",
        dir.path().join("l2.txt").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_line(&out);
    assert!(
        err.contains("(0, 1/2)"),
        "message should name the bound: {err}"
    );
}

#[test]
fn recover_hollowed_lloyd_is_exact_at_high_intensity() {
    let dir = tempfile::tempdir().unwrap();
    // p ten times above the transition scale for this geometry.
    let (matrix, labels1, _) = generate_fixture(dir.path(), "0.2", "11");
    let est = dir.path().join("est.txt");
    let out = run(&[
        "recover",
        "--matrix",
        &matrix,
        "--method",
        "HL",
        "--seed",
        "3",
        "--out",
        est.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let est_labels: Vec<i8> = fs::read_to_string(&est)
        .unwrap()
        .lines()
        .map(|l| if l == "+1" { 1 } else { -1 })
        .collect();
    let truth: Vec<i8> = fs::read_to_string(&labels1)
        .unwrap()
        .lines()
        .map(|l| if l == "+1" { 1 } else { -1 })
        .collect();
    let mismatches = est_labels
        .iter()
        .zip(&truth)
        .filter(|(a, b)| a != b)
        .count();
    let loss = 2 * mismatches.min(truth.len() - mismatches);
    assert_eq!(loss, 0, "HL should recover exactly at p = 0.2");
}

#[test]
fn recover_supervised_flag_contract() {
    let dir = tempfile::tempdir().unwrap();
    let (matrix, labels1, labels2) = generate_fixture(dir.path(), "0.08", "7");
    let est = dir.path().join("est.txt");
    let est_str = est.to_str().unwrap();

    // Oracle without its truth inputs.
    let out = run(&[
        "recover", "--matrix", &matrix, "--method", "O", "--seed", "1", "--out", est_str,
    ]);
    assert_eq!(out.status.code(), Some(2));

    // Unsupervised method must not receive truth inputs.
    let out = run(&[
        "recover",
        "--matrix",
        &matrix,
        "--method",
        "HL",
        "--labels1",
        &labels1,
        "--seed",
        "1",
        "--out",
        est_str,
    ]);
    assert_eq!(out.status.code(), Some(2));

    // Unknown method name.
    let out = run(&[
        "recover", "--matrix", &matrix, "--method", "magic", "--seed", "1", "--out", est_str,
    ]);
    assert_eq!(out.status.code(), Some(2));

    // A full DS invocation works and reports the loss.
    let out = run(&[
        "recover",
        "--matrix",
        &matrix,
        "--method",
        "DS",
        "--labels1",
        &labels1,
        "--labels2",
        &labels2,
        "--p",
        "0.08",
        "--delta",
        "0.5",
        "--seed",
        "1",
        "--out",
        est_str,
    ]);
    assert!(out.status.success(), "{}", stderr_line(&out));
    let summary = String::from_utf8_lossy(&out.stdout);
    assert!(summary.contains("\"loss_r\""));
    assert!(summary.contains("\"exact\""));
}

#[test]
fn recover_empty_matrix_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = dir.path().join("empty.mtx");
    fs::write(
        &matrix,
        "%%MatrixMarket matrix coordinate pattern general\n4 6 0\n",
    )
    .unwrap();
    let out = run(&[
        "recover",
        "--matrix",
        matrix.to_str().unwrap(),
        "--method",
        "HL",
        "--seed",
        "1",
        "--out",
        dir.path().join("est.txt").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr_line(&out).contains("degenerate-input"));
}

#[test]
fn recover_is_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let (matrix, ..) = generate_fixture(dir.path(), "0.08", "7");
    let est1 = dir.path().join("est1.txt");
    let est2 = dir.path().join("est2.txt");
    for est in [&est1, &est2] {
        let out = run(&[
            "recover",
            "--matrix",
            &matrix,
            "--method",
            "SVD",
            "--seed",
            "9",
            "--out",
            est.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(fs::read(&est1).unwrap(), fs::read(&est2).unwrap());
}

#[test]
fn concentration_oracle_impossibility_mode() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("oracle.toml");
    fs::write(
        &config,
        "n1_list = [20]\ndelta = 0.1\nsamples = 60\nmaster_seed = 5\n",
    )
    .unwrap();
    let csv = dir.path().join("oracle.csv");
    let out = run(&[
        "concentration",
        "--mode",
        "oracle-impossibility",
        "--config",
        config.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_line(&out));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("oracle-impossibility"));
    assert!(text.ends_with("PASS\n"));
}

#[test]
fn recover_missing_matrix_is_io_failure() {
    let out = run(&[
        "recover",
        "--matrix",
        "/nonexistent/a.mtx",
        "--method",
        "HL",
        "--seed",
        "1",
        "--out",
        "/tmp/x.txt",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

fn tiny_experiment_config(threads: usize) -> String {
    format!(
        r#"
n1 = 40
gamma1 = 0.0
gamma2 = 0.5
delta = 0.5
b_values = [0.5]
a_min = 2.0
a_max = 30.0
a_points = 3
replications = 4
methods = ["HL", "O"]
master_seed = 11
threads = {threads}
timing = false
"#
    )
}

#[test]
fn experiment_writes_csv_and_is_thread_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("grid.toml");
    fs::write(&config, tiny_experiment_config(1)).unwrap();
    let csv1 = dir.path().join("out1.csv");
    let out = run(&[
        "experiment",
        "--config",
        config.to_str().unwrap(),
        "--out",
        csv1.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_line(&out));
    let text = fs::read_to_string(&csv1).unwrap();
    assert!(text.starts_with(
        "b,a,p,n2,method,replications,exact_rate,mean_fraction,mean_lloyd_iters,wall_ms\n"
    ));
    assert_eq!(text.lines().count(), 1 + 3 * 2);

    // Same config at four threads through the --threads flag.
    let csv4 = dir.path().join("out4.csv");
    let out = run(&[
        "experiment",
        "--config",
        config.to_str().unwrap(),
        "--out",
        csv4.to_str().unwrap(),
        "--threads",
        "4",
    ]);
    assert!(out.status.success());
    assert_eq!(fs::read(&csv1).unwrap(), fs::read(&csv4).unwrap());

    // And through the environment fallback.
    let csv_env = dir.path().join("out_env.csv");
    let out = bsbm()
        .args([
            "experiment",
            "--config",
            config.to_str().unwrap(),
            "--out",
            csv_env.to_str().unwrap(),
        ])
        .env("BSBM_THREADS", "3")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read(&csv1).unwrap(), fs::read(&csv_env).unwrap());
}

#[test]
fn experiment_rejects_unknown_method_names() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("grid.toml");
    fs::write(
        &config,
        tiny_experiment_config(1).replace("\"HL\"", "\"nope\""),
    )
    .unwrap();
    let out = run(&[
        "experiment",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("out.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_line(&out).contains("unknown method name"));
}

#[test]
fn concentration_binomial_mode_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("binomial.toml");
    fs::write(
        &config,
        "n_values = [10, 20]\np_values = [0.1, 0.2]\nt_points = 3\n",
    )
    .unwrap();
    let csv = dir.path().join("tails.csv");
    let out = run(&[
        "concentration",
        "--mode",
        "binomial-tail",
        "--config",
        config.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_line(&out));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with(
        "check_name,config_json,t_or_n1,empirical,bound_or_reference,slack,verdict\n"
    ));
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 3);
    assert!(text.lines().skip(1).all(|l| l.ends_with("PASS")));
}

#[test]
fn concentration_bernstein_and_hollow_modes() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bern.toml");
    fs::write(
        &config,
        "n1 = 10\nn2 = 50\ndelta = 0.5\np = 0.1\nt_points = 4\nsamples = 1000\nmaster_seed = 3\n",
    )
    .unwrap();
    let csv = dir.path().join("bern.csv");
    let out = run(&[
        "concentration",
        "--mode",
        "bernstein",
        "--config",
        config.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_line(&out));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 4);
    assert!(text.contains("bernstein"));

    let config = dir.path().join("hvd.toml");
    fs::write(
        &config,
        "n1 = 10\nn2 = 400\ndelta = 0.5\nsamples = 80\nmaster_seed = 4\n",
    )
    .unwrap();
    let csv = dir.path().join("hvd.csv");
    let out = run(&[
        "concentration",
        "--mode",
        "hollow-vs-debias",
        "--config",
        config.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_line(&out));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 3);
    assert!(text.contains("hollow-vs-debias-ordering"));
    assert!(text.contains("row-variance-floor"));
}

#[test]
fn plot_emits_one_polyline_per_series() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rows.csv");
    fs::write(
        &csv,
        "b,a,p,n2,method,replications,exact_rate,mean_fraction,mean_lloyd_iters,wall_ms\n\
         0.1,1,0.01,100,HL,5,0.2,0.1,3,0\n\
         0.1,2,0.02,100,HL,5,0.8,0.05,3,0\n",
    )
    .unwrap();
    let svg = dir.path().join("chart.svg");
    let out = run(&[
        "plot",
        "--in",
        csv.to_str().unwrap(),
        "--out",
        svg.to_str().unwrap(),
        "--x",
        "a",
        "--y",
        "exact_rate",
        "--series",
        "method",
        "--facet",
        "b",
    ]);
    assert!(out.status.success(), "{}", stderr_line(&out));
    let text = fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<polyline").count(), 1);

    // Malformed rows are reported with their line number.
    fs::write(
        &csv,
        "b,a,p,n2,method,replications,exact_rate,mean_fraction,mean_lloyd_iters,wall_ms\n\
         0.1,oops,0.01,100,HL,5,0.2,0.1,3,0\n",
    )
    .unwrap();
    let out = run(&[
        "plot",
        "--in",
        csv.to_str().unwrap(),
        "--out",
        svg.to_str().unwrap(),
        "--x",
        "a",
        "--y",
        "exact_rate",
        "--series",
        "method",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_line(&out).contains("line 2"));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("tails.csv");
    let out = run(&[
        "concentration",
        "--mode",
        "binomial-tail",
        "--config",
        root.join("configs/bench_binomial.toml").to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_line(&out));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 1 + 200);
}
