use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_hardy-kpz");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("HARDY_KPZ_OUT_DIR")
        .env_remove("HARDY_KPZ_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn assert_same_tree(a: &Path, b: &Path) {
    let mut names: Vec<_> = fs::read_dir(a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let mut other: Vec<_> = fs::read_dir(b)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    other.sort();
    assert_eq!(names, other);
    for name in names {
        assert_eq!(
            fs::read(a.join(&name)).unwrap(),
            fs::read(b.join(&name)).unwrap(),
            "{name:?} differs"
        );
    }
}

/// Runs `args` into `<tmp>/first`, reruns from the emitted config into
/// `<tmp>/second` and compares every output file byte for byte.
fn rerun_is_identical(tmp: &Path, args: &[&str]) {
    let first = tmp.join("first");
    let second = tmp.join("second");
    let mut a: Vec<&str> = args.to_vec();
    a.extend(["--out", first.to_str().unwrap()]);
    let out = run(&a);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let cfg = first.join("config.json");
    let b = [
        args[0],
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ];
    let out = run(&b);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_same_tree(&first, &second);
}

const SOLVE: &str = r#"{"problem":{"N":3,"s":0.75,"lambda":0.2232147999812825,"p":1.2709560829942758,"mu":0.001},
 "source":{"type":"power","exponent":1.5,"constant":1.0}}"#;

#[test]
fn constants_prints_reference_values() {
    let out = run(&["constants", "--N", "3", "--s", "0.75"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["Lambda_Ns"].as_f64().unwrap() - 0.446_429_599_962_565).abs() < 1e-13);
}

#[test]
fn domain_and_usage_errors_exit_two() {
    assert_eq!(code(&run(&["constants", "--N", "3", "--s", "1.5"])), 2);
    assert_eq!(
        code(&run(&[
            "exponents",
            "--N",
            "3",
            "--s",
            "0.75",
            "--lambda",
            "0.5"
        ])),
        2
    );
    assert_eq!(code(&run(&["exponents", "--N", "3", "--s", "0.75"])), 2);
    assert_eq!(code(&run(&["solve"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
}

#[test]
fn bad_config_key_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.json",
        &SOLVE.replace("\"mu\":0.001", "\"mu\":0.001,\"nu\":1"),
    );
    let out = run(&[
        "solve",
        "--config",
        &cfg,
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("problem.nu"));
    let damped_only = write(
        tmp.path(),
        "d.json",
        &SOLVE.replace("\"source\"", "\"alpha_damp\":1.0,\"source\""),
    );
    assert_eq!(code(&run(&["solve", "--config", &damped_only])), 2);
}

#[test]
fn oracle_exit_code_follows_tolerance() {
    let pass = run(&[
        "oracle",
        "--N",
        "3",
        "--s",
        "0.75",
        "--lambda",
        "0.2232147999812825",
    ]);
    assert_eq!(code(&pass), 0, "{}", String::from_utf8_lossy(&pass.stdout));
    let fail = run(&["oracle", "--N", "3", "--s", "0.75", "--theta", "1.2"]);
    assert_eq!(code(&fail), 1);
}

#[test]
fn blow_up_is_a_successful_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "blow.json",
        &SOLVE.replace("1.2709560829942758", "1.5533907681041148"),
    );
    let dir = tmp.path().join("o");
    let out = run(&["solve", "--config", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "BlowUp");
}

#[test]
fn solve_rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "solve.json", SOLVE);
    rerun_is_identical(tmp.path(), &["solve", "--config", &cfg]);
    for name in [
        "config.json",
        "config.sha256",
        "report.json",
        "trace.csv",
        "field.csv",
    ] {
        assert!(tmp.path().join("first").join(name).exists(), "{name}");
    }
}

#[test]
fn damped_rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SOLVE
        .replace("1.2709560829942758", "1.45")
        .replace("0.001", "0.03")
        .replace("\"source\"", "\"alpha_damp\":1.0,\"source\"");
    let cfg = write(tmp.path(), "damped.json", &text);
    rerun_is_identical(tmp.path(), &["damped", "--config", &cfg]);
}

#[test]
fn sweep_rerun_and_resume_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = r#"{"problem":{"N":3,"s":0.75,"lambda":0.2232147999812825,"p":1.4,"mu":0.001},
 "axes":[{"param":"p","start":0.9,"stop":1.1,"steps":5,"scale":"p-plus"}],
 "grid":{"R":0.5,"M":80,"g":2.0},
 "source":{"type":"power","exponent":1.5,"constant":1.0}}"#;
    let cfg = write(tmp.path(), "sweep.json", plan);
    rerun_is_identical(tmp.path(), &["sweep", "--config", &cfg]);
    let resumed = tmp.path().join("resumed");
    let r = resumed.to_str().unwrap();
    assert_eq!(
        code(&run(&[
            "sweep",
            "--config",
            &cfg,
            "--out",
            r,
            "--run-limit",
            "2"
        ])),
        0
    );
    assert_eq!(
        code(&run(&[
            "--threads",
            "1",
            "sweep",
            "--config",
            &cfg,
            "--out",
            r
        ])),
        0
    );
    assert_same_tree(&tmp.path().join("first"), &resumed);
}

#[test]
fn probe_and_flag_commands_rerun_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "probe.json", SOLVE);
    rerun_is_identical(&tmp.path().join("probe"), &["probe", "--config", &cfg]);
    rerun_is_identical(
        &tmp.path().join("oracle"),
        &[
            "oracle", "--N", "3", "--s", "0.75", "--theta", "0.3", "--M", "64",
        ],
    );
    rerun_is_identical(
        &tmp.path().join("constants"),
        &["constants", "--N", "4", "--s", "0.6"],
    );
    rerun_is_identical(
        &tmp.path().join("table"),
        &[
            "exponents",
            "--N",
            "3",
            "--s",
            "0.75",
            "--table",
            "0.1:1.1:5",
            "--relative",
        ],
    );
}

#[test]
fn out_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("env-out");
    let out = Command::new(BIN)
        .args(["constants", "--N", "3", "--s", "0.75"])
        .env("HARDY_KPZ_OUT_DIR", &dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.join("constants.json").exists());
}
