use std::path::Path;
use std::process::{Command, Output};

fn ifrepair(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ifrepair"))
        .current_dir(dir)
        .env("IFREPAIR_OUT_DIR", dir.join("out"))
        .args(args)
        .output()
        .expect("run ifrepair")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = ifrepair(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const FILES: [&str; 6] = [
    "--model",
    "out/model.txt",
    "--data",
    "out/data.csv",
    "--schema",
    "out/schema.txt",
];

#[test]
fn full_pipeline_from_the_command_line() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(
        dir,
        &[
            "gen-data", "--seed", "2", "--inputs", "5", "--hidden", "6", "--rows", "300",
        ],
    );
    for f in ["schema.txt", "data.csv", "model.txt"] {
        assert!(dir.join("out").join(f).exists(), "{f} missing");
    }
    ok(
        dir,
        &[
            "train",
            "--data",
            "out/data.csv",
            "--schema",
            "out/schema.txt",
            "--hidden",
            "6",
            "--epochs",
            "50",
            "--out",
            "out/retrained.txt",
        ],
    );
    let bounds = ok(
        dir,
        &[
            "bounds",
            "--model",
            "out/model.txt",
            "--schema",
            "out/schema.txt",
            "--point",
            "1,5,5,5,5",
        ],
    );
    assert!(bounds.contains("interval") && bounds.contains("symbolic") && bounds.contains("exact"));

    let mut args = vec![
        "repair",
        "--mode",
        "naive",
        "--export-lp",
        "out/naive.lp",
        "--n-repair",
        "6",
    ];
    args.extend(FILES);
    let report = ok(dir, &args);
    assert!(report.contains("CUR"), "{report}");
    for f in ["naive.lp", "repaired.txt", "report.csv", "calibration.csv"] {
        assert!(dir.join("out").join(f).exists(), "{f} missing");
    }
    let csv = std::fs::read_to_string(dir.join("out/report.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "post_cur,0"), "{csv}");

    let listing = ok(
        dir,
        &[
            "verify",
            "--model",
            "out/repaired.txt",
            "--schema",
            "out/schema.txt",
            "--data",
            "out/data.csv",
            "--limit",
            "3",
        ],
    );
    assert!(listing.contains("certified fair"), "{listing}");
    // The biased baseline has unfair rows, so demanding fairness must fail.
    let strict = ifrepair(
        dir,
        &[
            "verify",
            "--model",
            "out/model.txt",
            "--schema",
            "out/schema.txt",
            "--data",
            "out/data.csv",
            "--limit",
            "20",
            "--require-fair",
        ],
    );
    assert!(!strict.status.success());
    let mut m = vec![
        "metrics",
        "--mode",
        "sample",
        "--k",
        "100",
        "--seed",
        "7",
        "--csv",
        "out/m1.csv",
        "--n-repair",
        "6",
    ];
    m.extend([
        "--model",
        "out/repaired.txt",
        "--data",
        "out/data.csv",
        "--schema",
        "out/schema.txt",
    ]);
    let first = ok(dir, &m);
    m[8] = "out/m2.csv";
    let second = ok(dir, &m);
    assert_eq!(first, second);
    assert_eq!(
        std::fs::read(dir.join("out/m1.csv")).unwrap(),
        std::fs::read(dir.join("out/m2.csv")).unwrap()
    );
    assert!(first.contains("CUR            0.0000"), "{first}");

    let mut e = vec!["export-lp", "--iters", "0", "--out", "out/sym.lp"];
    e.extend(FILES);
    ok(dir, &e);
    let lp = ifrepair::solver::read_lp_file(dir.join("out/sym.lp")).unwrap();
    assert!(!lp.binaries().is_empty());
}

#[test]
fn bad_arguments_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ifrepair(tmp.path(), &["repair", "--bogus"]);
    assert!(!out.status.success());
    let out = ifrepair(
        tmp.path(),
        &[
            "bounds",
            "--model",
            "missing.txt",
            "--schema",
            "missing.txt",
            "--point",
            "0",
        ],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.txt"));
    let help = ifrepair(tmp.path(), &["repair", "--help"]);
    assert!(String::from_utf8_lossy(&help.stdout).contains("--delta-max"));
}

#[test]
fn infeasible_delta_box_exits_nonzero_without_a_model() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(
        dir,
        &[
            "gen-data", "--seed", "1", "--inputs", "4", "--hidden", "5", "--rows", "200", "--epochs", "100",
        ],
    );
    let mut args = vec!["repair", "--delta-max", "0", "--iters", "0"];
    args.extend(FILES);
    let out = ifrepair(dir, &args);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--delta-max"));
    assert!(!dir.join("out/repaired.txt").exists());
}
