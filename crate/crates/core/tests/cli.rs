//! Command-line behavior: exit-code contract, config diagnostics, artifact
//! layout, flag overrides.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use num_complex::Complex64;

use bolab::state::BirkhoffState;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_bolab")
}

struct TempDir(PathBuf);

impl TempDir {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!(
            "bolab_cli_{tag}_{}_{:?}",
            std::process::id(),
            std::thread::current().id()
        ));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        TempDir(dir)
    }

    fn path(&self) -> &Path {
        &self.0
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary spawns")
}

#[test]
fn healthy_invariance_run_exits_zero_with_report() {
    let dir = TempDir::new("inv_ok");
    let out = run_in(
        dir.path(),
        &[
            "invariance",
            "--seed",
            "42",
            "--n",
            "8",
            "--t",
            "1.7",
            "--samples",
            "5000",
            "--out",
            "report.json",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(json["seed"], 42);
    assert!(json["runtime_ms"].is_number());
    assert!(json["config_echo"].as_str().unwrap().contains("subcommand = invariance"));
    let rows = json["per_functional"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    for row in rows {
        assert_eq!(row["verdict"], true);
        assert!(row["z"].as_f64().unwrap().abs() <= 3.0);
        for field in ["id", "mean_before", "mean_after", "std_error"] {
            assert!(!row[field].is_null(), "missing field {field}");
        }
    }
    assert!(dir.path().join("report.json.manifest.json").exists());
}

#[test]
fn negative_control_exits_two() {
    let dir = TempDir::new("inv_bad");
    let out = run_in(
        dir.path(),
        &[
            "invariance",
            "--seed",
            "42",
            "--n",
            "8",
            "--t",
            "1.7",
            "--samples",
            "20000",
            "--negative-control",
            "--out",
            "report.json",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let report = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&report).unwrap();
    let f2 = &json["per_functional"][1];
    assert_eq!(f2["id"], "F2");
    assert_eq!(f2["verdict"], false);
}

#[test]
fn renormalized_invariance_runs_clean() {
    let dir = TempDir::new("inv_renorm");
    let out = run_in(
        dir.path(),
        &[
            "invariance",
            "--seed",
            "4",
            "--n",
            "16",
            "--t",
            "-2.5",
            "--samples",
            "5000",
            "--renormalized",
            "--out",
            "report.json",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_seed_is_a_usage_error() {
    let dir = TempDir::new("seedless");
    let out = run_in(dir.path(), &["sample", "--n", "4"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("seed"), "stderr: {stderr}");
}

#[test]
fn config_violations_are_all_reported() {
    let dir = TempDir::new("badcfg");
    std::fs::write(
        dir.path().join("cfg.txt"),
        "subcommand = invariance\nbogus = 1\nn = 4\nn = 8\n",
    )
    .unwrap();
    let out = run_in(dir.path(), &["invariance", "cfg.txt"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("unknown key `bogus`"), "stderr: {stderr}");
    assert!(
        stderr.contains("duplicate key `n`") && stderr.contains("line 3"),
        "stderr: {stderr}"
    );
}

#[test]
fn renorm_rejects_convergent_amplitudes() {
    let dir = TempDir::new("renorm_bad");
    let out = run_in(
        dir.path(),
        &["renorm", "--seed", "1", "--alpha-p", "2.0"],
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Σ|α_n|²"), "stderr: {stderr}");
}

#[test]
fn unwritable_out_path_is_a_usage_error() {
    let dir = TempDir::new("nowrite");
    let out = run_in(
        dir.path(),
        &[
            "tailmass",
            "--n",
            "16",
            "--out",
            "/nonexistent_dir/very/deep/data.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = TempDir::new("nosub");
    let out = run_in(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn flow_round_trips_a_state_file() {
    let dir = TempDir::new("flow");
    let state = BirkhoffState::new(vec![
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.5),
    ])
    .unwrap();
    std::fs::write(dir.path().join("state.csv"), state.to_csv()).unwrap();
    let out = run_in(
        dir.path(),
        &[
            "flow",
            "--state",
            "state.csv",
            "--n",
            "2",
            "--t",
            "0.0",
            "--out",
            "evolved.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let evolved =
        BirkhoffState::from_csv(&std::fs::read_to_string(dir.path().join("evolved.csv")).unwrap())
            .unwrap();
    assert_eq!(evolved, state);
}

#[test]
fn flow_profile_reaches_zero_at_support() {
    let dir = TempDir::new("flowprof");
    let state = BirkhoffState::new(vec![
        Complex64::new(1.0, 0.0),
        Complex64::new(0.5, 0.0),
    ])
    .unwrap();
    std::fs::write(dir.path().join("state.csv"), state.to_csv()).unwrap();
    let out = run_in(
        dir.path(),
        &[
            "flow",
            "--state",
            "state.csv",
            "--n",
            "2",
            "--t",
            "1.0",
            "--profile",
            "1,2",
            "--s",
            "0.0",
            "--out",
            "evolved.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let profile = std::fs::read_to_string(dir.path().join("evolved.csv.profile.csv")).unwrap();
    let last = profile.lines().last().unwrap();
    let err: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(err, 0.0);
}

#[test]
fn sample_summary_reports_law_moments() {
    let dir = TempDir::new("sample");
    let out = run_in(
        dir.path(),
        &[
            "sample",
            "--seed",
            "5",
            "--n",
            "8",
            "--samples",
            "2000",
            "--out",
            "draws.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("draws.csv.summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["law"], "gaussian");
    assert_eq!(summary["n"], 8);
    let second = summary["moments"]["empirical_second"].as_f64().unwrap();
    assert!((second - 1.0).abs() < 0.05, "E|g|² = {second}");
    let body = std::fs::read_to_string(dir.path().join("draws.csv")).unwrap();
    assert!(body.starts_with("sample,n,re,im"));
}

#[test]
fn tailmass_json_format_carries_products() {
    let dir = TempDir::new("tailmass");
    let out = run_in(
        dir.path(),
        &[
            "tailmass",
            "--n",
            "64",
            "--sigma",
            "1.0",
            "--format",
            "json",
            "--out",
            "tm.json",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("tm.json")).unwrap())
            .unwrap();
    assert_eq!(json["classification"], "diverges");
    let products = json["product_values"].as_array().unwrap();
    let (last_n, last_p) = (
        products.last().unwrap()[0].as_u64().unwrap(),
        products.last().unwrap()[1].as_f64().unwrap(),
    );
    assert_eq!(last_n, 64);
    assert!(last_p < 1e-6);
}

#[test]
fn renorm_run_emits_ratio_table() {
    let dir = TempDir::new("renorm");
    let out = run_in(
        dir.path(),
        &[
            "renorm",
            "--seed",
            "6",
            "--alpha-p",
            "0.5",
            "--n",
            "1",
            "--grid",
            "32,64,128",
            "--samples",
            "4000",
            "--dump-trajectories",
            "--out",
            "renorm.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("renorm.csv")).unwrap();
    assert!(table.starts_with("N,empirical_var,predicted_var,ratio"));
    assert_eq!(table.lines().count(), 3); // header + two windows
    let trajectories =
        std::fs::read_to_string(dir.path().join("renorm.csv.trajectories.csv")).unwrap();
    assert_eq!(trajectories.lines().count(), 1 + 3 * 4000);
}

#[test]
fn gibbs_degenerate_weights_exit_two_with_diagnostic() {
    let dir = TempDir::new("gibbs_degen");
    let out = run_in(
        dir.path(),
        &[
            "gibbs",
            "--seed",
            "7",
            "--n",
            "16",
            "--samples",
            "20000",
            "--cutoff-width",
            "1000000",
            "--out",
            "gibbs.json",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("gibbs.json")).unwrap())
            .unwrap();
    assert!(json["error"]
        .as_str()
        .unwrap()
        .contains("effective sample size"));
}

#[test]
fn gibbs_healthy_run_reports_ess() {
    let dir = TempDir::new("gibbs_ok");
    let out = run_in(
        dir.path(),
        &[
            "gibbs",
            "--seed",
            "8",
            "--n",
            "16",
            "--t",
            "1.7",
            "--samples",
            "20000",
            "--cutoff-width",
            "0.5",
            "--out",
            "gibbs.json",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("gibbs.json")).unwrap())
            .unwrap();
    assert!(json["effective_sample_size"].as_f64().unwrap() > 50.0);
    assert_eq!(json["per_functional"].as_array().unwrap().len(), 5);
}

#[test]
fn weakconv_reports_stabilization() {
    let dir = TempDir::new("weakconv");
    let out = run_in(
        dir.path(),
        &[
            "weakconv",
            "--seed",
            "9",
            "--grid",
            "1,2,4",
            "--n-ref",
            "16",
            "--samples",
            "5000",
            "--functional",
            "F2",
            "--out",
            "wc.json",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("wc.json")).unwrap())
            .unwrap();
    assert_eq!(json["stabilized_from"], 1);
    assert_eq!(json["functional"], "F2");
}

#[test]
fn config_file_plus_flag_override() {
    let dir = TempDir::new("override");
    std::fs::write(
        dir.path().join("cfg.txt"),
        "subcommand = tailmass\nn = 16\nsigma = 1.0\nout = a.csv\n",
    )
    .unwrap();
    let out = run_in(dir.path(), &["tailmass", "cfg.txt", "--sigma", "0.4"]);
    assert_eq!(out.status.code(), Some(0));
    let manifest =
        std::fs::read_to_string(dir.path().join("a.csv.manifest.json")).unwrap();
    assert!(
        manifest.contains("sigma = 4.0000000000000002e-1"),
        "override missing from echo: {manifest}"
    );
}

#[test]
fn help_exits_zero() {
    let dir = TempDir::new("help");
    let out = run_in(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    for sub in ["flow", "sample", "tailmass", "renorm", "invariance", "weakconv", "gibbs"] {
        assert!(stdout.contains(sub), "help lacks {sub}");
    }
}
