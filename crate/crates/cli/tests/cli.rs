use std::process::{Command, Output};

fn nipg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nipg")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn table_preset_markdown() {
    let o = nipg(&["table1", "--n", "8,16", "--eps", "1e-5"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("| 8 | 0.696E-1 | 1.96 |"), "{text}");
    assert!(text.contains("gamma = 1.5"));
}

#[test]
fn csv_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let o = nipg(&[
        "run",
        "--k",
        "2",
        "--eps",
        "1e-6",
        "--n",
        "8..32x2",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("k,eps,N,error,rate,cond_flag"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    std::fs::write(&cfg, r#"{"ks": [1], "eps": [1e-4], "ns": [8, 16], "norm": "energy", "jobs": 2}"#).unwrap();
    let o = nipg(&["run", "--config", cfg.to_str().unwrap(), "--norm", "interp", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().contains(",interp,"));
}

#[test]
fn expression_problem() {
    let o = nipg(&[
        "run",
        "--problem",
        "expr",
        "--eps",
        "1e-3",
        "--n",
        "16,32",
        "--b",
        "3 - x",
        "--c",
        "1",
        "--f",
        "3 + exp(-2*(1-x)/eps) - 2*x*(1-x)*exp(-2*(1-x)/eps)/eps",
        "--u",
        "x - x*exp(-2*(1-x)/eps)",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("| 16 |"));
}

#[test]
fn invalid_configs_exit_2() {
    for args in [
        vec!["run", "--n", "7"],
        vec!["run", "--eps", "0"],
        vec!["run", "--penalty", "big"],
        vec!["run", "--norm", "sup"],
        vec!["run", "--format", "xml"],
        vec!["run", "--problem", "expr", "--b", "2*^3", "--c", "1", "--f", "1", "--u", "x"],
        vec!["run", "--config", "/nonexistent/sweep.json"],
        vec!["mesh-dump", "--eps", "0.5", "--n", "8", "--k", "3"],
        vec!["check", "--suite", "bogus"],
    ] {
        let o = nipg(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn mesh_dump_csv() {
    let o = nipg(&["mesh-dump", "--eps", "1e-6", "--n", "8"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "j,x_j,h_j");
    assert_eq!(rows.len(), 10);
    assert!(rows[1].starts_with("0,0e0,"));
    assert!(rows[9].starts_with("8,1e0,"));
}

#[test]
fn check_suites() {
    let o = nipg(&["check", "--suite", "mesh,solver"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("PASS mesh") && text.contains("PASS solver"), "{text}");
}
