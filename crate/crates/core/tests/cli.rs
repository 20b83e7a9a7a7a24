use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_planelike"))
}

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

/// Fresh scratch directory under the target dir, removed first if left over.
fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().arg("--output-dir").arg(out).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn out_of_range_exponent_is_a_validation_error() {
    let dir = scratch("bad_s1");
    let text = std::fs::read_to_string(repo("configs/validate_kernel.toml")).unwrap();
    let cfg = dir.join("bad.toml");
    std::fs::write(&cfg, text.replace("s1 = 0.25", "s1 = 0.6")).unwrap();
    let o = run(&["validate-kernel", cfg.to_str().unwrap()], &dir.join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kernel.s1"), "{}", stderr(&o));
    assert!(stderr(&o).contains("(0, 1/2)"), "{}", stderr(&o));
    assert!(!dir.join("out").exists(), "no artifacts on validation failure");
}

#[test]
fn missing_kernel_table_is_a_validation_error() {
    let dir = scratch("missing_table");
    let cfg = dir.join("tab.toml");
    std::fs::write(
        &cfg,
        "seed = 0\n[kernel]\nkind = \"tabulated\"\ndim = 1\ns1 = 0.25\ns2 = 0.75\ndelta = 0.5\ntable = \"absent.csv\"\n\
         [grid]\nm = 16\n[experiment]\nkind = \"validate-kernel\"\n",
    )
    .unwrap();
    let o = run(&["validate-kernel", cfg.to_str().unwrap()], &dir.join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kernel.table"), "{}", stderr(&o));
}

#[test]
fn unknown_criterion_is_a_usage_error() {
    let dir = scratch("unknown_criterion");
    let o = run(&["check", "bogus"], &dir);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = bin().arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_criterion_check_writes_one_outcome() {
    let dir = scratch("check_coarea");
    let o = run(&["check", "coarea", "--suite", "1d"], &dir);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.join("acceptance.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["format_version"], 1);
    let outcomes = v["outcomes"].as_array().unwrap();
    assert_eq!(outcomes.len(), 1);
    assert_eq!(outcomes[0]["key"], "coarea");
    assert_eq!(outcomes[0]["status"], "pass");

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["passed"], true);
    assert_eq!(manifest["config_hash"], v["config_hash"]);
}

#[test]
fn repeated_runs_write_identical_tables() {
    let dir = scratch("determinism");
    let cfg = repo("configs/solve_cell_1d.toml");
    for run_dir in ["a", "b"] {
        let o = run(&["solve-cell", cfg.to_str().unwrap()], &dir.join(run_dir));
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for file in ["profile.csv", "checkpoints.csv"] {
        let a = std::fs::read(dir.join("a").join(file)).unwrap();
        let b = std::fs::read(dir.join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between runs");
    }
}

#[test]
fn csv_rows_carry_version_and_hash() {
    let dir = scratch("csv_columns");
    let cfg = repo("configs/validate_kernel.toml");
    let o = run(&["validate-kernel", cfg.to_str().unwrap()], &dir);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut reader = csv::Reader::from_path(dir.join("kernel_samples.csv")).unwrap();
    let head = reader.headers().unwrap().clone();
    assert_eq!(&head[0], "format_version");
    assert_eq!(&head[1], "config_hash");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("kernel_report.json")).unwrap()).unwrap();
    for row in reader.records().take(5) {
        let row = row.unwrap();
        assert_eq!(&row[0], "1");
        assert_eq!(&row[1], report["config_hash"].as_str().unwrap());
    }
}

#[test]
fn one_dimensional_suite_passes() {
    let dir = scratch("check_1d");
    let cfg = repo("configs/check_1d.toml");
    let o = bin().arg("--output-dir").arg(&dir).arg("run").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}\n{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
    assert!(dir.join("acceptance.csv").exists());
}
