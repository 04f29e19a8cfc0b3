use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use varcons::cli;

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

fn small_config(dir: &Path) -> PathBuf {
    let out = dir.join("out");
    write_config(
        dir,
        &format!(
            r#"{{
  "run": {{ "output_dir": "{}" }},
  "mesh": {{ "nt": 8, "nx": 8 }},
  "data": {{ "u_left": 1.0, "u_right": -1.0 }},
  "descent": {{ "max_iters": 5, "backend": "banded" }}
}}"#,
            out.display()
        ),
    )
}

fn run(args: &[&str]) -> i32 {
    cli::run(std::iter::once("varcons").chain(args.iter().copied()))
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn solve_writes_artifacts_with_headers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    assert_eq!(run(&["solve", "--config", cfg.to_str().unwrap()]), 0);
    let out = tmp.path().join("out");
    assert_eq!(header(&out.join("history.csv")), "iter,E,grad_norm,step,halvings");
    assert_eq!(header(&out.join("field_final.csv")), "t,x,u");
    assert_eq!(header(&out.join("comparison.csv")), "t,x,u,u_exact,abs_err");
    let history = fs::read_to_string(out.join("history.csv")).unwrap();
    let row: Vec<&str> = history.lines().nth(1).unwrap().split(',').collect();
    // 17 significant digits
    assert_eq!(row[1].split('e').next().unwrap().trim_start_matches('-').len(), 18);
    assert!(out.join("heatmap.pgm").exists());
    assert!(fs::read_to_string(out.join("run_summary.txt")).unwrap().contains("final_energy"));
}

#[test]
fn constant_state_converges_immediately() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let code = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--data.u_left",
        "0.3",
        "--data.u_right=0.3",
        "--descent.init",
        "data",
    ]);
    assert_eq!(code, 0);
    let history = fs::read_to_string(tmp.path().join("out/history.csv")).unwrap();
    let rows: Vec<&str> = history.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    let e: f64 = rows[0].split(',').nth(1).unwrap().parse().unwrap();
    assert!(e <= 1e-20, "{e:e}");
}

#[test]
fn configuration_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let cfg = cfg.to_str().unwrap();
    assert_eq!(run(&["solve", "--config", cfg, "--mesh.nt", "0"]), 1);
    assert_eq!(run(&["solve", "--config", cfg, "--nosuch.key", "1"]), 1);
    assert_eq!(run(&["solve", "--config", "/nonexistent/varcons.json"]), 1);
    assert_eq!(run(&["solve"]), 1);
    assert_eq!(run(&["frobnicate", "--config", cfg]), 1);
    let bad = write_config(tmp.path(), "{ not json");
    assert_eq!(run(&["solve", "--config", bad.to_str().unwrap()]), 1);
}

#[test]
fn failed_checks_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let cfg = cfg.to_str().unwrap();
    assert_eq!(run(&["commutation-check", "--config", cfg]), 0);
    let code = run(&[
        "commutation-check",
        "--config",
        cfg,
        "--checks.commutation_cases",
        r#"["anticommuting"]"#,
    ]);
    assert_eq!(code, 2);
}

#[test]
fn check_subcommands_pass_on_small_meshes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let cfg = cfg.to_str().unwrap();
    assert_eq!(run(&["gradient-check", "--config", cfg, "--checks.gradient_pairs", "3"]), 0);
    assert_eq!(run(&["oracle-check", "--config", cfg]), 0);
    assert_eq!(run(&["mesh-sweep", "--config", cfg, "--checks.sweep_sizes", "[8,16]"]), 0);
    assert_eq!(header(&tmp.path().join("out/mesh_sweep.csv")), "n,E");
    assert_eq!(run(&["ym-report", "--config", cfg, "--descent.record_every", "1"]), 0);
    assert!(tmp.path().join("out/measure.csv").exists());
}

#[test]
fn binary_is_deterministic_with_one_thread() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let dir = tmp.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_varcons"))
            .args(["solve", "--config", cfg.to_str().unwrap(), "--run.output_dir"])
            .arg(&dir)
            .env("VARCONS_THREADS", "1")
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(
            ["history.csv", "field_final.csv", "defect_final.csv"]
                .map(|f| fs::read(dir.join(f)).unwrap()),
        );
    }
    assert_eq!(outputs[0], outputs[1]);

    let status = Command::new(env!("CARGO_BIN_EXE_varcons"))
        .args(["solve", "--config", cfg.to_str().unwrap()])
        .env("VARCONS_THREADS", "zero")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}
