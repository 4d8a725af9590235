use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_margmod"))
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("bad json ({e}): {}\nstderr: {}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const MH_TABLE: &str = "A,B,count\n1,1,20\n1,2,35\n2,1,12\n2,2,40\n";
const MH_MODEL: &str = r#"{"marginals": ["A", "B", "AB"], "equality_constraints": [["A@A[2]", "B@B[2]"]]}"#;

const FOUR_BINARY: &str = r#""levels": {"A": ["1", "2"], "B": ["1", "2"], "C": ["1", "2"], "D": ["1", "2"]}"#;

#[test]
fn marginal_homogeneity_fit_has_one_degree_of_freedom() {
    let d = TempDir::new().unwrap();
    let t = write(&d, "t.csv", MH_TABLE);
    let m = write(&d, "m.json", MH_MODEL);
    for alg in ["lagrangian", "scoring"] {
        let out = run(&["fit", "--table", s(&t), "--model", s(&m), "--algorithm", alg]);
        assert_eq!(out.status.code(), Some(0));
        let v = json(&out);
        assert_eq!(v["df"], 1);
        assert_eq!(v["convergence"]["converged"], true);
        let fitted: Vec<f64> = v["m_hat"].as_array().unwrap().iter().map(|c| c["fitted"].as_f64().unwrap()).collect();
        assert!((fitted[1] - 23.5).abs() < 1e-6 && (fitted[2] - 23.5).abs() < 1e-6);
        let labels: Vec<&str> = v["lambda_hat"].as_array().unwrap().iter().map(|c| c["label"].as_str().unwrap()).collect();
        assert_eq!(labels, vec!["A@A[2]", "B@B[2]", "AB@AB[2,2]"]);
        assert!(v["p_value"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn saturated_fit_has_zero_deviance() {
    let d = TempDir::new().unwrap();
    let t = write(&d, "t.csv", MH_TABLE);
    let m = write(&d, "m.json", "{}");
    let out = run(&["fit", "--table", s(&t), "--model", s(&m)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["g2"].as_f64().unwrap().abs() < 1e-8);
    assert_eq!(v["df"], 0);
}

#[test]
fn dag_model_on_simulated_data_has_five_degrees_of_freedom() {
    let d = TempDir::new().unwrap();
    let model = format!(r#"{{{FOUR_BINARY}, "dag": {{"edges": [["A","C"],["A","D"],["B","C"],["B","D"]]}}}}"#);
    let m = write(&d, "dag.json", &model);
    let t = d.path().join("sim.csv");
    let out = run(&["simulate", "--model", s(&m), "--n", "5000", "--seed", "3", "--out", s(&t)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["fit", "--table", s(&t), "--model", s(&m)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["df"], 5);
}

#[test]
fn path_model_compilation_lists_remaining_effects() {
    let d = TempDir::new().unwrap();
    let m = write(
        &d,
        "path.json",
        r#"{"levels": {"F": [0, 1], "G": [0, 1], "E": [0, 1], "O": [0, 1], "I": [0, 1]},
            "dag": {"edges": [["F","E"],["F","G"],["G","E"],["G","O"],["E","O"],["E","I"],["O","I"]]},
            "path": true}"#,
    );
    let out = run(&["compile", "--model", s(&m)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["n_components"], 32);
    assert_eq!(v["path"]["graphical_zeros"], 16);
    assert_eq!(v["path"]["remaining_count"], 13);
    let mut rem: Vec<String> =
        v["path"]["remaining"].as_array().unwrap().iter().map(|x| x.as_str().unwrap().to_string()).collect();
    rem.sort();
    let mut want: Vec<String> =
        ["∅", "F", "G", "E", "O", "FG", "FE", "GE", "GO", "EO", "I", "EI", "OI"].iter().map(|x| x.to_string()).collect();
    want.sort();
    assert_eq!(rem, want);
}

#[test]
fn empty_statement_list_compiles_to_saturated() {
    let d = TempDir::new().unwrap();
    let m = write(&d, "m.json", &format!(r#"{{{FOUR_BINARY}, "independences": []}}"#));
    let out = run(&["compile", "--model", s(&m)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["df"], 0);
    assert_eq!(v["zeroed_effects"].as_array().unwrap().len(), 0);
    assert_eq!(v["n_components"], 15);
}

#[test]
fn infeasible_statements_exit_with_code_three() {
    let d = TempDir::new().unwrap();
    let m = write(
        &d,
        "m.json",
        r#"{"levels": {"1": ["a","b"], "2": ["a","b"], "3": ["a","b"], "4": ["a","b"]},
            "independences": [{"a": ["1"], "b": ["2"], "given": ["3"]},
                              {"a": ["2"], "b": ["3"], "given": ["4"]},
                              {"a": ["2"], "b": ["4"], "given": ["1"]}]}"#,
    );
    let out = run(&["compile", "--model", s(&m)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no admissible ordering"));
}

#[test]
fn check_reports_decomposability() {
    let ok = run(&["check", "--marginals", "AB,AC,ABC"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(json(&ok)["ordered_decomposable"], true);
    let full = run(&["check", "--marginals", "ABC"]);
    assert_eq!(json(&full)["ordered_decomposable"], true);
    let bad = run(&["check", "--marginals", "AB,AC,BC,ABC"]);
    assert_eq!(bad.status.code(), Some(0));
    let v = json(&bad);
    assert_eq!(v["ordered_decomposable"], false);
    assert_eq!(v["failing_prefix"], 3);
    assert_eq!(v["failing_marginal"], "BC");
    assert_eq!(v["variation_independent"], false);
}

fn counts(csv: &str) -> Vec<f64> {
    csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect()
}

#[test]
fn simulate_edge_cases_and_determinism() {
    let d = TempDir::new().unwrap();
    let m = write(&d, "m.json", &format!("{{{FOUR_BINARY}}}"));
    let zero = run(&["simulate", "--model", s(&m), "--n", "0"]);
    assert_eq!(zero.status.code(), Some(0));
    let z = counts(&String::from_utf8(zero.stdout).unwrap());
    assert_eq!(z.len(), 16);
    assert!(z.iter().all(|c| *c == 0.0));

    let big = run(&["simulate", "--model", s(&m), "--n", "1000000", "--seed", "11"]);
    let c = counts(&String::from_utf8(big.stdout.clone()).unwrap());
    let (n, k): (f64, f64) = (1e6, 16.0);
    let sd = (n / k * (1.0 - 1.0 / k)).sqrt();
    assert!(c.iter().all(|x| (x - n / k).abs() < 5.0 * sd));
    assert_eq!(c.iter().sum::<f64>(), n);

    let again = run(&["simulate", "--model", s(&m), "--n", "1000000", "--seed", "11"]);
    assert_eq!(big.stdout, again.stdout);
    let other = run(&["simulate", "--model", s(&m), "--n", "1000000", "--seed", "12"]);
    assert_ne!(big.stdout, other.stdout);
}

#[test]
fn input_errors_exit_with_code_one_and_point_at_the_line() {
    let d = TempDir::new().unwrap();
    let t = write(&d, "t.csv", "A,B,count\n1,1,20\n1,2,x\n");
    let m = write(&d, "m.json", MH_MODEL);
    let out = run(&["fit", "--table", s(&t), "--model", s(&m)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("count"), "{err}");

    let bad_json = write(&d, "bad.json", "{\n  \"marginals\": [\"A\",\n}");
    let t = write(&d, "t2.csv", MH_TABLE);
    let out = run(&["fit", "--table", s(&t), "--model", s(&bad_json)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let unknown = write(&d, "u.json", r#"{"marginal": ["A"]}"#);
    let out = run(&["fit", "--table", s(&t), "--model", s(&unknown)]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["fit", "--table", s(&t)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unlisted_cells_are_zero_and_pinned_levels_fix_order() {
    let d = TempDir::new().unwrap();
    let t = write(&d, "t.csv", "A,B,count\nhi,lo,4\nlo,hi,6\nhi,hi,5\n");
    let m = write(&d, "m.json", r#"{"levels": {"A": ["lo", "hi"], "B": ["lo", "hi"]}}"#);
    let out = run(&["fit", "--table", s(&t), "--model", s(&m)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let obs: Vec<f64> = v["m_hat"].as_array().unwrap().iter().map(|c| c["observed"].as_f64().unwrap()).collect();
    assert_eq!(obs, vec![0.0, 6.0, 4.0, 5.0]);
    assert_eq!(v["m_hat"][0]["cell"], serde_json::json!(["lo", "lo"]));
    assert_eq!(v["convergence"]["epsilon_cells"], 1);
}

#[test]
fn simulate_from_fitted_model_and_refit_recovers_parameters() {
    let d = TempDir::new().unwrap();
    let t = write(&d, "t.csv", "A,B,count\n1,1,120\n1,2,60\n1,3,20\n2,1,40\n2,2,150\n2,3,30\n3,1,40\n3,2,10\n3,3,130\n");
    let m = write(
        &d,
        "m.json",
        r#"{"marginals": ["A", "B", "AB"], "equality_constraints": [["A@A[2]", "B@B[2]"], ["A@A[3]", "B@B[3]"]]}"#,
    );
    let fitted = json(&run(&["fit", "--table", s(&t), "--model", s(&m)]));
    let sim = d.path().join("sim.csv");
    let out = run(&["simulate", "--model", s(&m), "--table", s(&t), "--n", "20000", "--seed", "5", "--out", s(&sim)]);
    assert_eq!(out.status.code(), Some(0));
    let refit = json(&run(&["fit", "--table", s(&sim), "--model", s(&m)]));
    let a = fitted["lambda_hat"].as_array().unwrap();
    let b = refit["lambda_hat"].as_array().unwrap();
    for (x, y) in a.iter().zip(b) {
        let diff = (x["value"].as_f64().unwrap() - y["value"].as_f64().unwrap()).abs();
        assert!(diff < 3.0 * y["se"].as_f64().unwrap() + 1e-12, "{}: {diff}", x["label"]);
    }
}

#[test]
fn gee_fit_through_the_command_line() {
    let d = TempDir::new().unwrap();
    let t = write(&d, "t.csv", MH_TABLE);
    let m = write(&d, "m.json", MH_MODEL);
    let out = run(&["fit", "--table", s(&t), "--model", s(&m), "--algorithm", "gee"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["algorithm"], "gee");
    assert_eq!(v["df"], 1);
    let margins = v["mu_tilde"].as_array().unwrap();
    assert_eq!(margins.len(), 2);
    let a = margins[0]["cells"][0]["fitted"].as_f64().unwrap();
    let b = margins[1]["cells"][0]["fitted"].as_f64().unwrap();
    assert!((a - b).abs() < 1e-6);
    assert_eq!(v["sandwich_se"].as_array().unwrap().len(), v["beta_tilde"].as_array().unwrap().len());
}

#[test]
fn output_file_is_written() {
    let d = TempDir::new().unwrap();
    let t = write(&d, "t.csv", MH_TABLE);
    let m = write(&d, "m.json", MH_MODEL);
    let o = d.path().join("result.json");
    let out = run(&["fit", "--table", s(&t), "--model", s(&m), "--out", s(&o)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&o).unwrap()).unwrap();
    assert_eq!(v["df"], 1);
}
