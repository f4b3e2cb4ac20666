use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn saddle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_saddle"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_config(dir: &TempDir, name: &str, json: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, json).unwrap();
    path
}

struct Row {
    accepted: bool,
    lower: f64,
    mid: f64,
    upper: f64,
}

fn read_trace(path: &Path) -> (String, Vec<Row>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            assert_eq!(f.len(), 9, "row {i}: {line}");
            assert_eq!(f[0].parse::<usize>().unwrap(), i);
            let num = |k: usize| f[k].parse::<f64>().unwrap();
            Row {
                accepted: match f[8] {
                    "1" => true,
                    "0" => false,
                    other => panic!("accepted column {other}"),
                },
                lower: num(4),
                mid: num(5),
                upper: num(6),
            }
        })
        .collect();
    (header, rows)
}

fn summary_steps(text: &str) -> usize {
    let field = text
        .split_whitespace()
        .find_map(|w| w.strip_prefix("steps="))
        .expect("summary has steps");
    field.parse().unwrap()
}

#[test]
fn bilinear_config_converges_in_three_rows() {
    let dir = TempDir::new().unwrap();
    let trace = dir.path().join("bilinear.csv");
    let cfg = write_config(
        &dir,
        "bilinear.json",
        &format!(
            r#"{{"problem": {{"name": "bilinear_xy"}},
                "solver": {{"mu0": 1e7}},
                "init": {{"point": [1.0, 1.0]}},
                "output": {{"trace": {:?}}}}}"#,
            trace
        ),
    );
    let out = saddle(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("status=Converged"));
    let (header, rows) = read_trace(&trace);
    assert_eq!(
        header,
        "step,mu,eta,grad_norm,L_lower,L_mid,L_upper,halvings,accepted"
    );
    assert!(!rows.is_empty() && rows.len() <= 3);
    assert!(dir.path().join("bilinear.solution.json").exists());
}

#[test]
fn missing_problem_name_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "bad.json", r#"{"problem": {"seed": 4}}"#);
    let out = saddle(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("name"));
}

#[test]
fn unknown_problem_and_bad_solver_values_exit_2() {
    let out = saddle(&["run", "--problem", "no_such_problem"]);
    assert_eq!(code(&out), 2);
    let out = saddle(&["run", "--problem", "quad_saddle", "--alpha", "0.5"]);
    assert_eq!(code(&out), 2);
    let out = saddle(&["run", "--config", "/nonexistent/config.json"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn bowl_diverges_as_expected() {
    let dir = TempDir::new().unwrap();
    let trace = dir.path().join("bowl.csv");
    let cfg = write_config(
        &dir,
        "bowl.json",
        r#"{"problem": {"name": "quad_bowl"}, "init": {"point": [1.0, 0.001]}}"#,
    );
    let base = [
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--max-steps",
        "1000000",
        "--out",
        trace.to_str().unwrap(),
    ];
    let out = saddle(&[&base[..], &["--expect-divergence"]].concat());
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("status=Diverged"));
    let out = saddle(&base);
    assert_eq!(code(&out), 3);
}

#[test]
fn max_steps_exits_3() {
    let dir = TempDir::new().unwrap();
    let trace = dir.path().join("t.csv");
    let out = saddle(&[
        "run",
        "--problem",
        "gauss_bump_saddle",
        "--fixed-eta",
        "0.05",
        "--max-steps",
        "20",
        "--out",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3);
    assert!(stdout(&out).starts_with("status=MaxSteps"));
    assert_eq!(read_trace(&trace).1.len(), 20);
}

#[test]
fn check_grad_passes_on_lp_and_ot() {
    let dir = TempDir::new().unwrap();
    let lp = write_config(
        &dir,
        "lp.json",
        r#"{"problem": {"name": "lp", "n_x": 6, "n_y": 4, "seed": 9},
            "constraint": {"mode": "squared"}}"#,
    );
    let ot = write_config(
        &dir,
        "ot.json",
        r#"{"problem": {"name": "ot", "n": 15, "m": 10, "bumps_per_axis": 3, "seed": 2}}"#,
    );
    for cfg in [lp, ot] {
        let out = saddle(&["check-grad", "--config", cfg.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", stdout(&out));
        assert!(stdout(&out).starts_with("PASS"));
    }
}

#[test]
fn check_grad_catches_corrupted_gradient() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "biased.json",
        r#"{"problem": {"name": "gauss_bump_saddle", "gradient_bias": 0.01}}"#,
    );
    let out = saddle(&["check-grad", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).starts_with("FAIL"));
}

#[test]
fn lp_demo_small_instance_satisfies_kkt() {
    let dir = TempDir::new().unwrap();
    let trace = dir.path().join("lp.csv");
    let out = saddle(&[
        "lp-demo",
        "--seed",
        "5",
        "--n-x",
        "3",
        "--n-y",
        "2",
        "--out",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let kkt: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("kkt_residual="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(kkt < 1e-6, "kkt {kkt}");
    assert_eq!(read_trace(&trace).1.len(), summary_steps(&text));
    let sol: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("lp.solution.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(sol["x"].as_array().unwrap().len(), 3);
    assert_eq!(sol["y"].as_array().unwrap().len(), 2);
}

#[test]
fn ot_demo_matched_single_stage_reaches_minus_one() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("ot.csv");
    let out = saddle(&[
        "ot-demo",
        "--matched",
        "--stages",
        "1",
        "--n",
        "30",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let obj: f64 = stdout(&out)
        .lines()
        .find_map(|l| l.strip_prefix("final objective="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((obj + 1.0).abs() < 1e-3, "objective {obj}");
    let stages = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(stages.lines().count(), 2);
}

#[test]
fn identical_runs_write_identical_traces() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "lp.json",
        r#"{"problem": {"name": "lp", "n_x": 8, "n_y": 6},
            "constraint": {"mode": "squared"}}"#,
    );
    let mut traces = Vec::new();
    for k in 0..2 {
        let trace = dir.path().join(format!("run{k}.csv"));
        let out = saddle(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "11",
            "--out",
            trace.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
        traces.push(std::fs::read(&trace).unwrap());
    }
    assert_eq!(traces[0], traces[1]);

    let other = dir.path().join("other.csv");
    saddle(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "12",
        "--out",
        other.to_str().unwrap(),
    ]);
    assert_ne!(std::fs::read(&other).unwrap(), traces[0]);
}

#[test]
fn rows_match_steps_and_accepted_rows_are_ordered() {
    let dir = TempDir::new().unwrap();
    let cases = [
        vec!["--problem", "gauss_bump_saddle"],
        vec!["--problem", "gauss_bump_saddle", "--method", "qn"],
        vec![
            "--problem",
            "quad_saddle",
            "--method",
            "explicit",
            "--max-steps",
            "300",
        ],
    ];
    for (k, extra) in cases.iter().enumerate() {
        let trace = dir.path().join(format!("t{k}.csv"));
        let mut args = vec!["run", "--out", trace.to_str().unwrap()];
        args.extend(extra);
        let out = saddle(&args);
        assert!(matches!(code(&out), 0 | 3), "{extra:?}");
        let (_, rows) = read_trace(&trace);
        assert_eq!(rows.len(), summary_steps(&stdout(&out)));
        for r in rows.iter().filter(|r| r.accepted) {
            let tol = 1e-12 * (1.0 + r.mid.abs());
            assert!(r.lower <= r.mid + tol && r.mid <= r.upper + tol);
        }
    }
}

#[test]
fn flags_override_config_values() {
    let dir = TempDir::new().unwrap();
    let trace = dir.path().join("t.csv");
    let cfg = write_config(
        &dir,
        "c.json",
        r#"{"problem": {"name": "quad_saddle"}, "solver": {"max_steps": 1, "method": "explicit"}}"#,
    );
    let run = |extra: &[&str]| {
        let mut args = vec![
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            trace.to_str().unwrap(),
        ];
        args.extend(extra);
        code(&saddle(&args))
    };
    assert_eq!(run(&[]), 3);
    assert_eq!(run(&["--max-steps", "500", "--method", "implicit"]), 0);
}

#[test]
fn barrier_run_on_tiny_lp() {
    let dir = TempDir::new().unwrap();
    let trace = dir.path().join("b.csv");
    let cfg = write_config(
        &dir,
        "b.json",
        r#"{"problem": {"name": "lp", "n_x": 3, "n_y": 2, "seed": 1},
            "constraint": {"mode": "barrier", "t_schedule": [1, 10, 100, 1000]}}"#,
    );
    let out = saddle(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let sol: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("b.solution.json")).unwrap())
            .unwrap();
    assert!(sol["kkt_residual"].as_f64().unwrap() < 1e-2);
}
