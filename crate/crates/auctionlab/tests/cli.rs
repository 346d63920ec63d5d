//! Black-box tests of the command-line binary: serialization round trips,
//! exit codes, and byte-identical output under a fixed seed.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_auctionlab"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("binary runs")
}

#[test]
fn gen_check_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cover.json");
    let out = run(
        &["gen", "cover", "--m", "10", "--k", "4", "--l", "4", "--seed", "3", "--out",
          path.to_str().unwrap()],
        dir.path(),
    );
    assert!(out.status.success(), "gen failed: {}", String::from_utf8_lossy(&out.stderr));

    let out = run(&["check", "--valuation", path.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "check failed: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["monotone"], true);
    assert_eq!(report["subadditive"], true);

    // The generated file parses back to the same JSON it was written from.
    let text = std::fs::read_to_string(&path).unwrap();
    let wire: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(wire["kind"], "cover");
}

#[test]
fn check_rejects_corrupted_collection() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    // Two sets that union to the whole ground set: not 4-sparse.
    let bad = serde_json::json!({
        "kind": "cover",
        "l": 4,
        "collection": {"m": 6, "sets": [[0, 1, 2], [3, 4, 5], [0, 2, 4]]},
    });
    std::fs::write(&path, bad.to_string()).unwrap();
    let out = run(&["check", "--valuation", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn check_rejects_malformed_json_with_schema_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("garbage.json");
    std::fs::write(&path, "{\"kind\": \"cover\"").unwrap();
    let out = run(&["check", "--valuation", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fixed_seed_gives_byte_identical_csv() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for (dir, jobs) in [(&dir_a, "1"), (&dir_b, "4")] {
        let out = run(
            &["run", "lp-check", "--m", "5", "--trials", "10", "--seed", "42", "--jobs", jobs,
              "--out", "."],
            dir.path(),
        );
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(dir_a.path().join("lp-check.csv")).unwrap();
    let b = std::fs::read(dir_b.path().join("lp-check.csv")).unwrap();
    assert_eq!(a, b, "CSV output must not depend on the job count");
}

#[test]
fn gap_experiment_reports_exact_half() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run", "gap", "--mph2", "--out", "."], dir.path());
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("gap.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert!(row.starts_with("mph2,2,1,1/2,true"), "unexpected row: {row}");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("gap.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["pass"], true);
}

#[test]
fn solve_lp_and_round_agree_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for (path, seed) in [(&a, "1"), (&b, "2")] {
        let out = run(
            &["gen", "mph2", "--m", "6", "--seed", seed, "--out", path.to_str().unwrap()],
            dir.path(),
        );
        assert!(out.status.success());
    }
    let out = run(
        &["solve-lp", "--valuation-a", a.to_str().unwrap(), "--valuation-b", b.to_str().unwrap()],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], true);

    let out = run(
        &["round", "--valuation-a", a.to_str().unwrap(), "--valuation-b", b.to_str().unwrap(),
          "--k", "2", "--seed", "7"],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], true);
    assert!(report["ratio"].as_f64().unwrap() >= 0.625 - 1e-9);
}
