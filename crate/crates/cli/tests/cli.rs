use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn difftd() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_difftd"));
    c.env_remove("DIFFTD_OUT");
    c
}

fn repo(path: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(path)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

const SMOKE: &str = r#"schema_version = 1

[[experiment]]
env = { kind = "diagnostic", name = "corridor(2)" }
algorithm = "diff_q"
alphas = [0.5]
etas = [0.1]
gamma = 0.9
num_steps = 300
num_runs = 4
"#;

#[test]
fn verify_defaults_succeed() {
    let o = difftd().arg("verify").output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    for name in ["shaping_invariance", "equivalence_harness", "return_identity", "b_star_consistency"] {
        assert!(text.contains(name), "{text}");
    }
    assert!(!text.contains("FAILED"));
}

#[test]
fn shipped_verify_config_succeeds() {
    let o = difftd().args(["verify", "--config"]).arg(repo("configs/verify.toml")).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn bias_only_oracle_prints_scaled_reward() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "schema_version = 1\n[oracle]\nchain = { p = [[0.3, 0.7], [1.0, 0.0]], r = [2.5, 2.5] }\ngamma = 0.9\n",
    );
    let o = difftd().args(["oracle-check", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("fixed point: b = 25.0000000000"), "{}", stdout(&o));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("oracle.json")).unwrap()).unwrap();
    let b = json["fixed_point"]["weights"][0].as_f64().unwrap();
    assert!((b - 25.0).abs() < 1e-9);
}

#[test]
fn shipped_oracle_configs_pass() {
    for name in ["configs/oracle_bias_only.toml", "configs/oracle_corridor.toml"] {
        let o = difftd().args(["oracle-check", "--config"]).arg(repo(name)).output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
    }
}

#[test]
fn singular_oracle_system_exits_one_and_names_the_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "schema_version = 1\n[oracle]\nchain = { p = [[0.5, 0.5], [0.5, 0.5]], r = [1.0, 0.0] }\ngamma = 1.0\n",
    );
    let o = difftd().args(["oracle-check", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("negative_definiteness"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_a_config_error_with_a_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "schema_version = 1\n\n[[experiment]]\nalgorithmm = \"q\"\n");
    let o = difftd().args(["sweep", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("config.toml:4:"), "{err}");
    assert!(err.contains("algorithmm"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(difftd().arg("run").output().unwrap().status.code(), Some(2));
    assert_eq!(difftd().arg("frobnicate").output().unwrap().status.code(), Some(2));
    assert_eq!(difftd().args(["export-mdp", "corridor(0)"]).output().unwrap().status.code(), Some(2));
    assert_eq!(difftd().args(["verify", "--jobs", "0"]).output().unwrap().status.code(), Some(2));
}

#[test]
fn help_documents_the_flags() {
    let o = difftd().arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for flag in ["--config", "--out", "--seed", "--jobs", "DIFFTD_OUT"] {
        assert!(text.contains(flag), "{text}");
    }
}

#[test]
fn export_mdp_matches_the_golden_file() {
    let o = difftd().args(["export-mdp", "random(5,2,7)"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let golden = fs::read_to_string(repo("crates/core/tests/golden/random_5_2_7.json")).unwrap();
    assert_eq!(stdout(&o).trim_end(), golden.trim_end());
}

#[test]
fn run_writes_exports_to_the_env_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMOKE);
    let out = dir.path().join("results");
    let o = difftd().args(["run", "--config"]).arg(&cfg).env("DIFFTD_OUT", &out).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["runs.csv", "sweep.csv", "summary_corridor_2.csv", "figure_corridor_2.svg"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
}

#[test]
fn run_rejects_multi_setting_experiments() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMOKE.replace("alphas = [0.5]", "alphas = [0.5, 1.0]"));
    let o = difftd().args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("config.toml:3:"), "{}", stderr(&o));
}

fn sweep_runs(cfg: &Path, out: &Path, extra: &[&str]) -> String {
    let o = difftd().args(["sweep", "--config"]).arg(cfg).arg("--out").arg(out).args(extra).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    fs::read_to_string(out.join("runs.csv")).unwrap()
}

#[test]
fn sweep_is_deterministic_across_thread_counts_and_follows_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMOKE.replace("alphas = [0.5]", "alphas = [0.5, 1.0]"));
    let one = sweep_runs(&cfg, &dir.path().join("a"), &["--jobs", "1"]);
    let many = sweep_runs(&cfg, &dir.path().join("b"), &["--jobs", "3"]);
    assert_eq!(one, many);
    let reseeded = sweep_runs(&cfg, &dir.path().join("c"), &["--seed", "1000"]);
    assert_ne!(one, reseeded);
    assert!(reseeded.lines().nth(1).unwrap().contains(",1000,"));
}
