use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use onebit_mimo::harness::{emit_config, parse_config, ExperimentConfig, Noise, CSV_HEADER};

fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::desk();
    cfg.lambdas = vec![1.0];
    cfg.sample_sizes = vec![20, 80];
    cfg.geometries = 1;
    cfg.groups = 2;
    cfg.channel_draws = 4;
    cfg
}

fn write(dir: &Path, name: &str, cfg: &ExperimentConfig) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, emit_config(cfg).unwrap()).unwrap();
    path
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_onebit-mimo")).args(args).output().unwrap()
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config();
    cfg.noise = Noise::N0(0.05);
    cfg.grid_size = Some(48);
    let path = write(dir.path(), "cfg.toml", &cfg);
    assert_eq!(parse_config(&path).unwrap(), cfg);
}

#[test]
fn unknown_key_in_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let text = emit_config(&small_config()).unwrap().replace("channel_draws", "chanel_draws");
    fs::write(&path, text).unwrap();
    let err = format!("{:#}", parse_config(&path).unwrap_err());
    assert!(err.contains("chanel_draws"), "{err}");

    let out = cli(&["cov-exp", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("chanel_draws"));
}

#[test]
fn cli_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write(dir.path(), "cfg.toml", &small_config());
    let cfg = cfg_path.to_str().unwrap();
    for sub in ["cov-exp", "chan-exp", "rate-exp"] {
        let a = dir.path().join(format!("{sub}-a.csv"));
        let b = dir.path().join(format!("nested/{sub}-b.csv"));
        for (out, workers) in [(&a, "1"), (&b, "3")] {
            let o = cli(&[sub, "--config", cfg, "--seed", "99", "--workers", workers, "--out", out.to_str().unwrap()]);
            assert!(o.status.success(), "{sub}: {}", String::from_utf8_lossy(&o.stderr));
        }
        let (ta, tb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
        assert_eq!(ta, tb, "{sub}");
        let text = String::from_utf8(ta).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
        assert!(text.lines().skip(1).all(|l| l.contains(",99,")));
    }
}

#[test]
fn failed_cells_set_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config();
    cfg.cond_cap = 1.0 + 1e-9;
    let cfg_path = write(dir.path(), "cfg.toml", &cfg);
    let out_path = dir.path().join("rate.csv");
    let args = ["rate-exp", "--config", cfg_path.to_str().unwrap(), "--out", out_path.to_str().unwrap()];

    let strict = cli(&args);
    assert_eq!(strict.status.code(), Some(1), "{}", String::from_utf8_lossy(&strict.stderr));
    assert!(out_path.exists());

    let partial = cli(&[&args[..], &["--allow-partial"]].concat());
    assert_eq!(partial.status.code(), Some(0));
}

#[test]
fn preset_and_config_conflict() {
    let out = cli(&["cov-exp", "--preset", "desk", "--config", "x.toml"]);
    assert!(!out.status.success());
    let printed = cli(&["config", "--preset", "paper"]);
    assert!(printed.status.success());
    let text = String::from_utf8(printed.stdout).unwrap();
    assert_eq!(onebit_mimo::harness::config_from_str(&text).unwrap(), ExperimentConfig::paper());
}
