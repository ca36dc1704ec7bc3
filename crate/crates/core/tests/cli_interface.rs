//! End-to-end checks of the command line surface: exit codes, emitted
//! files, reproducibility and the conforming-ring audit column.

use obstacle_fem::cli::{self, RunConfig};
use std::path::PathBuf;

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("obstacle-fem-test-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn config(json: &str) -> RunConfig {
    serde_json::from_str(json).unwrap()
}

#[test]
fn solve_writes_expected_files_and_csv_row() {
    let dir = temp_dir("solve");
    let cfg = config(
        r#"{"method": "mixed", "degree": 1, "mesh": {"initial_h": 0.8, "levels": 1}}"#,
    );
    cli::run_solve(&cfg, &dir).unwrap();
    for name in ["u.vtk", "lambda.vtk", "table.csv", "report.txt"] {
        assert!(dir.join(name).exists(), "{name} missing");
    }
    let csv = std::fs::read_to_string(dir.join("table.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2, "header plus exactly one data row");
    assert!(lines[0].starts_with("level,h,ndof_u,ndof_lambda"));
    // u.vtk must be a legacy ascii vtk with point data
    let vtk = std::fs::read_to_string(dir.join("u.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version 2.0"));
    assert!(vtk.contains("POINT_DATA"));
    let lam = std::fs::read_to_string(dir.join("lambda.vtk")).unwrap();
    assert!(lam.contains("CELL_DATA"));
    assert!(lam.contains("SCALARS lambda"));
    assert!(lam.contains("SCALARS indicator"));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn identical_configs_give_byte_identical_csv() {
    let cfg = config(
        r#"{"method": "stabilized", "degree": 1, "solver": {"tol": 1e-10},
            "mesh": {"initial_h": 0.7, "levels": 2}}"#,
    );
    let d1 = temp_dir("repro1");
    let d2 = temp_dir("repro2");
    cli::run_converge(&cfg, &d1).unwrap();
    cli::run_converge(&cfg, &d2).unwrap();
    let a = std::fs::read(d1.join("table.csv")).unwrap();
    let b = std::fs::read(d2.join("table.csv")).unwrap();
    assert_eq!(a, b, "reruns must be byte-identical");
    let _ = std::fs::remove_dir_all(&d1);
    let _ = std::fs::remove_dir_all(&d2);
}

#[test]
fn converge_emits_per_level_files_and_rates() {
    let dir = temp_dir("conv");
    let cfg = config(
        r#"{"method": "stabilized", "degree": 1, "mesh": {"initial_h": 0.8, "levels": 3}}"#,
    );
    cli::run_converge(&cfg, &dir).unwrap();
    for level in 0..3 {
        assert!(dir.join(format!("u_{level:03}.vtk")).exists());
        assert!(dir.join(format!("lambda_{level:03}.vtk")).exists());
    }
    assert!(dir.join("plot.gp").exists());
    let csv = std::fs::read_to_string(dir.join("table.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4, "three data rows");
    // first row has no rate entries, later rows do
    let first: Vec<&str> = lines[1].split(',').collect();
    let last: Vec<&str> = lines[3].split(',').collect();
    assert!(first[10].is_empty() && first[11].is_empty());
    assert!(!last[10].is_empty() && !last[11].is_empty());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn conforming_family_reports_ring_vertices() {
    let dir = temp_dir("ring");
    let cfg = config(
        r#"{"method": "stabilized", "degree": 1,
            "mesh": {"family": "conforming", "initial_h": 0.7, "levels": 2}}"#,
    );
    cli::run_converge(&cfg, &dir).unwrap();
    let csv = std::fs::read_to_string(dir.join("table.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let ring: usize = line.split(',').nth(5).unwrap().parse().unwrap();
        assert!(ring > 0, "conforming meshes must carry the snapped ring");
    }
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn adapt_respects_small_budget() {
    let dir = temp_dir("adapt-budget");
    let cfg = config(
        r#"{"method": "stabilized", "degree": 2, "dof_budget": 10,
            "mesh": {"initial_h": 0.8, "levels": 1}}"#,
    );
    cli::run_adapt(&cfg, &dir).unwrap();
    let csv = std::fs::read_to_string(dir.join("table.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2, "single row when the budget is already exhausted");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn adapt_requires_stabilized_method() {
    let dir = temp_dir("adapt-method");
    let cfg = config(r#"{"method": "mixed", "degree": 1}"#);
    let err = cli::run_adapt(&cfg, &dir).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn non_convergence_exits_with_code_two() {
    let dir = temp_dir("noconv");
    let cfg = config(
        r#"{"method": "stabilized", "degree": 1,
            "solver": {"max_iter": 1, "tol": 1e-14},
            "mesh": {"initial_h": 0.5, "levels": 1}}"#,
    );
    let err = cli::run_solve(&cfg, &dir).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn check_records_alpha_range_warning() {
    let dir = temp_dir("check-alpha");
    let cfg = config(r#"{"method": "stabilized", "degree": 2, "alpha": 1000.0}"#);
    // the out-of-range parameter may or may not break the solve check; the
    // warning must be recorded either way
    let _ = cli::run_check(&cfg, &dir);
    let report = std::fs::read_to_string(dir.join("check_report.txt")).unwrap();
    assert!(
        report.contains("alpha-range warning"),
        "warning missing from report:\n{report}"
    );
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn check_passes_for_default_configs() {
    for (tag, json) in [
        ("mixed", r#"{"method": "mixed", "degree": 1}"#),
        ("stab1", r#"{"method": "stabilized", "degree": 1}"#),
        ("nitsche", r#"{"method": "nitsche", "degree": 1}"#),
    ] {
        let dir = temp_dir(&format!("check-{tag}"));
        let cfg = config(json);
        cli::run_check(&cfg, &dir).unwrap();
        let report = std::fs::read_to_string(dir.join("check_report.txt")).unwrap();
        assert!(report.contains("PASS"));
        assert!(!report.contains("FAIL"));
        // the inf-sup diagnostic rows are always present
        assert!(report.contains("inf-sup (bubble pair)"));
        let _ = std::fs::remove_dir_all(&dir);
    }
}

#[test]
fn full_cli_dispatch_happy_path() {
    let dir = temp_dir("dispatch");
    let cfg_path = dir.join("config.json");
    std::fs::write(
        &cfg_path,
        r#"{"method": "stabilized", "degree": 1, "mesh": {"initial_h": 0.8, "levels": 1}}"#,
    )
    .unwrap();
    let out = dir.join("results");
    cli::run(&[
        "solve".to_string(),
        "--config".to_string(),
        cfg_path.to_string_lossy().into_owned(),
        "--out".to_string(),
        out.to_string_lossy().into_owned(),
    ])
    .unwrap();
    assert!(out.join("table.csv").exists());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn cli_argument_errors() {
    let err = cli::run(&[]).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    let err = cli::run(&["explode".to_string()]).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    let err = cli::run(&["solve".to_string()]).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}
