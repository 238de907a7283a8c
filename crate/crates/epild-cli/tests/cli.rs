//! End-to-end checks of the command-line surface: exit codes, output
//! schemas, config precedence, and the seed fallback.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_epild"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("epild-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn missing_required_setting_is_a_usage_error() {
    let out = bin()
        .args(["simulate", "--model", "sirs", "--beta", "2", "--gamma", "1", "--nu", "1", "--t", "5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing required setting `n`"), "stderr: {err}");
    assert!(err.to_lowercase().contains("usage"), "stderr: {err}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = bin().args(["simulate", "--frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_model_is_a_usage_error() {
    let out = bin()
        .args(["rate", "--model", "sis", "-x", "0.1", "-y", "0.2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_one() {
    // A state outside the simplex is a runtime (domain) error, not usage.
    let out = bin()
        .args([
            "rate", "--model", "sirs", "--beta", "2", "--gamma", "1", "--nu", "1",
            "-x", "0.9,0.9", "-y", "0,0",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn rate_prints_the_closed_form() {
    let out = bin().args(["rate", "--oned", "-x", "0.5", "-y", "1"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let value: f64 = text
        .lines()
        .find(|l| l.starts_with("L(x,y):"))
        .and_then(|l| l.split_whitespace().last())
        .unwrap()
        .parse()
        .unwrap();
    assert!((value - (0.5 - 1.0 - 0.5f64.ln())).abs() < 1e-9);
}

#[test]
fn rate_csv_schema() {
    let dir = scratch("ratecsv");
    let csv_path = dir.join("rate.csv");
    let out = bin()
        .args([
            "rate", "--model", "sirs", "--beta", "2", "--gamma", "1", "--nu", "1",
            "-x", "0.25,0.25", "-y", "0,0", "--out",
        ])
        .arg(&csv_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x_1,x_2,y_1,y_2,value,status,dual_gap");
    let row = lines.next().unwrap();
    assert!(row.starts_with("0.25,0.25,0,0,0,finite,"), "row: {row}");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn infeasible_velocity_reports_inf_status() {
    let out = bin()
        .args([
            "rate", "--model", "sirs", "--beta", "2", "--gamma", "1", "--nu", "1",
            "-x", "0,0.5", "-y", "0,1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("L(x,y):   inf"), "{text}");
    assert!(text.contains("infinite_zero_rate"), "{text}");
}

#[test]
fn path_rate_reads_knot_csv() {
    let dir = scratch("pathrate");
    let psi = dir.join("psi.csv");
    std::fs::write(&psi, "t,y_1\n0,1\n0.5,1.5\n1,2\n").unwrap();
    let out = bin().args(["path-rate", "--oned", "--path"]).arg(&psi).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let value: f64 = text
        .lines()
        .find(|l| l.starts_with("action:"))
        .and_then(|l| l.split_whitespace().last())
        .unwrap()
        .parse()
        .unwrap();
    assert!((value - (1.5 - 2.0 * 2.0f64.ln())).abs() < 1e-9, "action {value}");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn trajectory_csv_schema_and_grid() {
    let dir = scratch("traj");
    let out = bin()
        .args([
            "simulate", "--model", "sirs", "--beta", "2", "--gamma", "1", "--nu", "1",
            "--n", "40", "--x0", "endemic", "--t", "1", "--replicas", "1", "--seed", "9", "--out",
        ])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.join("traj_00000.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,reaction,x_1,x_2");
    let mut prev_t = 0.0;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 4);
        let t: f64 = fields[0].parse().unwrap();
        let reaction: usize = fields[1].parse().unwrap();
        assert!(t > prev_t);
        assert!((1..=3).contains(&reaction));
        for f in &fields[2..] {
            let v: f64 = f.parse().unwrap();
            let c = v * 40.0;
            assert!((c - c.round()).abs() < 1e-9, "off-grid state {v}");
        }
        prev_t = t;
    }
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = scratch("config");
    std::fs::write(
        dir.join("run.cfg"),
        "[model]\nname = sirs\nbeta = 2\ngamma = 1\nnu = 1\n\n[simulate]\nn = 40\nt = 1\nreplicas = 2\nseed = 11\n",
    )
    .unwrap();
    let out_dir = dir.join("out");
    let out = bin()
        .args(["simulate", "--config"])
        .arg(dir.join("run.cfg"))
        .args(["--replicas", "3", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    // The flag overrode the config's replica count; the rest came from the
    // config file.
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["config"]["replicas"], "3");
    assert_eq!(manifest["config"]["n"], "40");
    assert_eq!(manifest["seed"], 11);
    assert_eq!(
        std::fs::read_dir(&out_dir)
            .unwrap()
            .filter(|e| {
                e.as_ref()
                    .unwrap()
                    .file_name()
                    .to_string_lossy()
                    .starts_with("traj_")
            })
            .count(),
        3
    );
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = scratch("envseed");
    let out = bin()
        .args([
            "simulate", "--model", "sirs", "--beta", "2", "--gamma", "1", "--nu", "1",
            "--n", "30", "--x0", "endemic", "--t", "0.5", "--out",
        ])
        .arg(&dir)
        .env("EPILD_SEED", "12345")
        .output()
        .unwrap();
    assert!(out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 12345);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn outputs_are_independent_of_thread_count() {
    let dir = scratch("threads");
    let mut outs = Vec::new();
    for threads in ["1", "4"] {
        let out_dir = dir.join(format!("t{threads}"));
        let out = bin()
            .args([
                "simulate", "--threads", threads, "--model", "sirs", "--beta", "2",
                "--gamma", "1", "--nu", "1", "--n", "60", "--x0", "endemic", "--t", "2",
                "--replicas", "6", "--seed", "21", "--out",
            ])
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(out.status.success());
        outs.push(out_dir);
    }
    for i in 0..6 {
        let name = format!("traj_{i:05}.csv");
        let a = std::fs::read(outs[0].join(&name)).unwrap();
        let b = std::fs::read(outs[1].join(&name)).unwrap();
        assert_eq!(a, b, "{name} differs across thread counts");
    }
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn importance_summary_schema() {
    let dir = scratch("imp");
    let out = bin()
        .args([
            "importance", "--model", "const", "--rate", "1", "--tilt-rate", "1.4",
            "--n", "30", "--t", "1", "--x0", "0", "--threshold", "40",
            "--replicas-direct", "2000", "--replicas-tilted", "1000", "--seed", "3", "--out",
        ])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.join("importance.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "estimator,replicas,estimate,se");
    assert!(lines.next().unwrap().starts_with("direct,2000,"));
    assert!(lines.next().unwrap().starts_with("tilted,1000,"));
    let _ = std::fs::remove_dir_all(&dir);
}
