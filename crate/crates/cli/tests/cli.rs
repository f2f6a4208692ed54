//! Behavior of the `uclab` binary: exit codes, config files, and record
//! reproducibility across runs and thread counts.

use std::process::Command;

fn uclab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uclab"))
}

#[test]
fn exit_code_zero_on_pass() {
    let out = uclab()
        .args([
            "observe",
            "--bc",
            "neumann",
            "--lambda-max",
            "100",
            "--delta",
            "0.1",
            "--class",
            "B",
            "--kappa",
            "49",
            "--ln-d",
            "1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn kappa_g_violation_exits_2_and_names_the_relation() {
    // variant A requires G strictly below kappa/(18e√d); G = 1 = kappa/(18e)
    let kappa = format!("{}", 18.0 * std::f64::consts::E);
    let out = uclab()
        .args([
            "observe",
            "--bc",
            "neumann",
            "--lambda-max",
            "50",
            "--delta",
            "0.1",
            "--class",
            "A",
            "--kappa",
            &kappa,
            "--ln-d",
            "0",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("18e"), "stderr: {stderr}");
}

#[test]
fn identical_configs_reproduce_records_bitwise() {
    let run = || {
        uclab()
            .args(["verify", "--quick", "--seed", "11"])
            .output()
            .unwrap()
    };
    let a = run();
    let b = run();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn thread_count_does_not_change_sweep_output() {
    let run = |threads: &str| {
        uclab()
            .args([
                "sweep",
                "--bc",
                "neumann",
                "--lambda-max",
                "100",
                "--class",
                "B",
                "--kappa",
                "49",
                "--ln-d",
                "1",
                "--param",
                "delta",
                "--values",
                "0.05,0.1,0.2,0.3",
                "--fit",
                "--seed",
                "9",
                "--threads",
                threads,
            ])
            .output()
            .unwrap()
    };
    let a = run("1");
    let b = run("4");
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8_lossy(&a.stdout);
    assert!(text.starts_with("param,value,sharp_lower"));
    assert_eq!(text.lines().count(), 5); // header + 4 rows
}

#[test]
fn config_file_round_trip() {
    let dir = std::env::temp_dir().join(format!("uclab-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg_path = dir.join("config.json");
    let cfg = serde_json::json!({
        "command": {
            "subcommand": "constants",
            "d": 1, "g": 1.0, "delta": 0.1, "kappa": 50.0,
            "ln_d_a": 0.0, "ln_d_b": 1.0,
            "v_inf": 0.0, "v_plus": 0.0, "v_minus": 0.0,
            "n_a": 1.0, "n_b": 1.0
        },
        "seed": 0
    });
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let out = uclab().args(["--config", cfg_path.to_str().unwrap()]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let record: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(record["status"], "complete");
    assert!(record["results"]["derived"]["r"] == 51);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn sweep_writes_csv_to_out() {
    let dir = std::env::temp_dir().join(format!("uclab-csv-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let csv_path = dir.join("sweep.csv");
    let out = uclab()
        .args([
            "sweep",
            "--bc",
            "neumann",
            "--lambda-max",
            "80",
            "--subspace",
            "2",
            "--param",
            "delta",
            "--values",
            "0.1,0.2",
            "--out",
            csv_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("param,value,"));
    assert_eq!(csv.lines().count(), 3);
    // the record goes to stdout for provenance
    let record: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(record["results"]["rows"].as_array().unwrap().len(), 2);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn bad_arguments_exit_2() {
    let out = uclab().args(["observe", "--delta", "0.1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
