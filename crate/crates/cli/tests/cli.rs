use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use screenclean::simulation::{ModelKind, SimModel};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_screenclean"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Writes a model-B-like dataset with a strong signal on x1..x3.
fn write_dataset(path: &Path, n: usize, seed: u64) {
    let draw = SimModel::new(ModelKind::B, n, 20)
        .with_delta(1.0)
        .generate(seed)
        .unwrap();
    draw.data.write_csv(fs::File::create(path).unwrap()).unwrap();
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect()
}

#[test]
fn analyze_writes_report_with_nested_sets() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("data.csv");
    write_dataset(&input, 150, 1);
    let out_dir = dir.path().join("report");
    let out = run(&[
        "analyze",
        "--input",
        input.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--seed",
        "3",
        "--emit-intermediate",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for f in ["clean_table.csv", "summary.json", "screen_path.csv", "cv_curve.csv"] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }
    let table = fs::read_to_string(out_dir.join("clean_table.csv")).unwrap();
    let first = table.lines().next().unwrap();
    assert!(first.starts_with("# screenclean ") && first.contains("seed=3") && first.contains("config="));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    let screened: Vec<u64> = summary["screened"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    let cleaned: Vec<u64> = summary["cleaned"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    assert!(cleaned.iter().all(|j| screened.contains(j)));
    assert!(!cleaned.is_empty());
}

#[test]
fn missing_response_column_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    let mut text = String::from("a,b\n");
    for i in 0..20 {
        text.push_str(&format!("{},{}\n", i, i * i % 7));
    }
    fs::write(&input, text).unwrap();
    let out = run(&["analyze", "-i", input.to_str().unwrap(), "-o", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("`y`"), "{}", stderr(&out));
}

#[test]
fn constant_column_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("const.csv");
    let mut text = String::from("y,x1,x2\n");
    for i in 0..30 {
        text.push_str(&format!("{},{},5\n", (i as f64).sin(), (i as f64).cos()));
    }
    fs::write(&input, text).unwrap();
    let out = run(&["analyze", "-i", input.to_str().unwrap(), "-o", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("column 1 is constant"), "{}", stderr(&out));
}

#[test]
fn bad_flags_and_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("data.csv");
    write_dataset(&input, 60, 2);
    let d = dir.path().to_str().unwrap();
    let i = input.to_str().unwrap();
    assert_eq!(code(&run(&["analyze", "-i", i, "-o", d, "--alpha", "1.5"])), 2);
    assert_eq!(code(&run(&["analyze", "-i", i, "-o", d, "--screener", "ridge"])), 2);
    assert_eq!(code(&run(&["analyze", "-o", d])), 2);
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "alpah = 0.1\n").unwrap();
    assert_eq!(code(&run(&["analyze", "-i", i, "-o", d, "--config", cfg.to_str().unwrap()])), 2);
    assert_eq!(code(&run(&["tables", "--table", "3", "-o", d])), 2);
    assert_eq!(code(&run(&["tables", "--table", "1", "--replicates", "5", "-o", d])), 2);
    assert_eq!(
        code(&run(&["tables", "--table", "1", "--replicates", "10", "--cells", "3,100,50,B", "-o", d])),
        2
    );
}

#[test]
fn config_file_applies_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("data.csv");
    write_dataset(&input, 90, 4);
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        format!("input = {:?}\nscreener = \"marginal\"\nalpha = 0.2\nseed = 11\n", input.to_str().unwrap()),
    )
    .unwrap();
    let a = dir.path().join("a");
    let out = run(&["analyze", "--config", cfg.to_str().unwrap(), "-o", a.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["screener"], "marginal");
    assert_eq!(s["alpha"], 0.2);
    assert_eq!(s["seed"], 11);

    let b = dir.path().join("b");
    let out = run(&[
        "analyze",
        "--config",
        cfg.to_str().unwrap(),
        "-o",
        b.to_str().unwrap(),
        "--alpha",
        "0.05",
        "--screener",
        "lasso",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(b.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["screener"], "lasso");
    assert_eq!(s["alpha"], 0.05);
    assert_eq!(s["seed"], 11);
}

#[test]
fn table_one_cell_has_one_row_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (d, threads) in [(&a, "1"), (&b, "4")] {
        let out = run(&[
            "tables",
            "--table",
            "1",
            "--replicates",
            "10",
            "--seed",
            "5",
            "--cells",
            "3,100,100,B",
            "--threads",
            threads,
            "-o",
            d.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let ta = fs::read(a.join("table1.csv")).unwrap();
    assert_eq!(ta, fs::read(b.join("table1.csv")).unwrap());
    let lines = data_lines(&a.join("table1.csv"));
    assert_eq!(lines.len(), 2);
    let header: Vec<&str> = lines[0].split(',').collect();
    let row: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(&row[..4], &["3", "100", "100", "B"]);
    let size_cols = header.iter().filter(|h| h.starts_with("size_") && !h.starts_with("size_se")).count();
    let power_cols = header.iter().filter(|h| h.starts_with("power_") && !h.starts_with("power_se")).count();
    assert_eq!((size_cols, power_cols), (3, 3));
}

#[test]
fn table_two_lists_eight_rows() {
    let dir = tempfile::tempdir().unwrap();
    // A full run is slow; check the layout through the filter and the
    // unfiltered cell list separately.
    let out = run(&[
        "tables",
        "--table",
        "2",
        "--replicates",
        "10",
        "--cells",
        "100,100,A;100,100,B",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let lines = data_lines(&dir.path().join("table2.csv"));
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("n,p,model,replicates,size,power,fpr"));
    let models = screenclean::simulation::table_models();
    assert_eq!(screenclean::simulation::table2_cells(&models).len(), 8);
}

#[test]
fn simulate_reports_each_method() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "simulate",
        "--model",
        "B",
        "--n",
        "100",
        "--p",
        "30",
        "--replicates",
        "10",
        "--method",
        "lasso,marginal",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let lines = data_lines(&dir.path().join("simulation.csv"));
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("lasso,3,100,30,B,10,"));
    assert!(lines[2].starts_with("marginal,3,"));
}

fn gap_rows(dir: &Path) -> Vec<(usize, f64)> {
    data_lines(&dir.join("persistence_gaps.csv"))
        .iter()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect()
}

#[test]
fn persistence_gaps_are_nonnegative() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "persistence",
        "--n",
        "100,400",
        "--replicates",
        "5",
        "--grid",
        "15",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = gap_rows(dir.path());
    assert_eq!(rows.iter().map(|r| r.0).collect::<Vec<_>>(), vec![100, 400]);
    assert!(rows.iter().all(|r| r.1 >= 0.0));
    let curve = data_lines(&dir.path().join("persistence_curve.csv"));
    assert_eq!(curve[0], "n,radius,empirical_risk,population_risk,l1_norm");
    assert_eq!(curve.len(), 1 + 2 * 15);
}

#[test]
fn noiseless_persistence_gap_vanishes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "persistence",
        "--n",
        "100,400",
        "--sigma",
        "0",
        "--replicates",
        "3",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for (n, gap) in gap_rows(dir.path()) {
        assert!(gap <= 1e-6, "n = {n}: gap {gap}");
    }
}
