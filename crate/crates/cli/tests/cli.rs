use std::path::Path;
use std::process::{Command, Output};

use mepkit::io::{read_json, write_json};
use mepkit::{fit_chain, Alphabet, ConstraintSystem, JointTable, Method, SolveResult};
use serde_json::Value;
use tempfile::TempDir;

const STEP: [[f64; 2]; 2] = [[0.9, 0.1], [0.2, 0.8]];

fn mepkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mepkit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Stationary three-step chain: p(1) = (2/3, 1/3).
fn stationary_markov() -> JointTable {
    let p1 = [2.0 / 3.0, 1.0 / 3.0];
    JointTable::from_fn(vec![1, 2, 3], Alphabet::new(2).unwrap(), |x| {
        p1[x[0]] * STEP[x[0]][x[1]] * STEP[x[1]][x[2]]
    })
    .unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_recovers_markov_joint() {
    let dir = TempDir::new().unwrap();
    let truth_path = dir.path().join("truth.json");
    let out_path = dir.path().join("result.json");
    write_json(&truth_path, &stationary_markov()).unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "method = \"mep_t\"\nT = 1\n[source]\nkind = \"file\"\npath = \"truth.json\"\n",
    )
    .unwrap();
    let out = mepkit(&["solve", "--config", path_str(&cfg), "--out", path_str(&out_path)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r: SolveResult = read_json(&out_path).unwrap();
    assert!(r.converged);
    assert!(r.joint.max_abs_diff(&stationary_markov()).unwrap() < 1e-8);
}

#[test]
fn solve_synthetic_markov_source() {
    let out = mepkit(&["solve", "--config", "/dev/null", "--method", "mep_t", "--T", "2"]);
    assert_eq!(code(&out), 0);
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("m.toml");
    std::fs::write(&cfg, "[source]\nkind = \"synthetic_markov\"\nseed = 4\norder = 1\n").unwrap();
    let out = mepkit(&["solve", "--config", path_str(&cfg)]);
    assert_eq!(code(&out), 0);
    let r: SolveResult = serde_json::from_str(&stdout(&out)).unwrap();
    // An order-1 chain is exactly the maxent joint of its contiguous pairs.
    let chain = fit_chain(&r.joint, 1).unwrap().joint();
    assert!(r.joint.max_abs_diff(&chain).unwrap() < 1e-8);
}

#[test]
fn solve_smep_t3() {
    let out = mepkit(&["solve", "--method", "smep", "--T", "3", "--alphabet", "2", "--seed", "7"]);
    assert_eq!(code(&out), 0);
    let r: SolveResult = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(r.residuals.iter().all(|&x| x <= 1e-10));
    assert_eq!(r.joint.vars(), &[-3, -2, -1, 0, 1, 2, 3]);
}

#[test]
fn solve_refuses_over_budget() {
    let out = mepkit(&["solve", "--method", "mep_t", "--T", "13"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));
}

#[test]
fn solve_reports_non_convergence() {
    let out = mepkit(&["solve", "--T", "2", "--strategy", "multiplicative", "--max-iters", "1"]);
    assert_eq!(code(&out), 2);
    let r: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(r["converged"], Value::Bool(false));
}

#[test]
fn solve_rejects_inconsistent_file() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("bad.json");
    let text = r#"{"full_vars":[1,2],"alphabet_size":2,"method":"CUSTOM","constraints":[
        {"vars":[1],"values":[0.5,0.5]},{"vars":[1,2],"values":[0.1,0.1,0.4,0.4]}]}"#;
    std::fs::write(&p, text).unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "method = \"custom\"\n[source]\nkind = \"file\"\npath = \"bad.json\"\n").unwrap();
    let out = mepkit(&["solve", "--config", path_str(&cfg)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("inconsistent"));
}

#[test]
fn file_constraints_match_in_process_build() {
    let dir = TempDir::new().unwrap();
    let truth = mepkit::sample::dirichlet_joint(vec![1, 2, 3, 4], Alphabet::new(2).unwrap(), &mut mepkit::seeded_rng(0))
        .unwrap();
    let system = ConstraintSystem::from_truth(Method::Gmep, 4, &truth).unwrap();
    let sys_path = dir.path().join("sys.json");
    write_json(&sys_path, &system).unwrap();
    let cfg = dir.path().join("f.toml");
    std::fs::write(&cfg, "method = \"gmep\"\nT = 4\n[source]\nkind = \"file\"\npath = \"sys.json\"\n").unwrap();
    let from_file = mepkit(&["solve", "--config", path_str(&cfg)]);
    let synthetic = mepkit(&["solve", "--method", "gmep", "--T", "4", "--seed", "0"]);
    assert_eq!(code(&from_file), 0);
    let a: SolveResult = serde_json::from_str(&stdout(&from_file)).unwrap();
    let b: SolveResult = serde_json::from_str(&stdout(&synthetic)).unwrap();
    assert_eq!(a.joint, b.joint);
    assert_eq!(a.iterations, b.iterations);
}

#[test]
fn verify_random_joints() {
    let out = mepkit(&["verify", "--trials", "1000", "--vars", "3", "--alphabet", "3", "--seed", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let s: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(s["joints"], 1000);
    assert_eq!(s["passed"], Value::Bool(true));
    assert_eq!(s["pairwise_spread"]["failed"], 0);
}

#[test]
fn verify_usage_errors() {
    assert_eq!(code(&mepkit(&["verify", "--vars", "2"])), 1);
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("neg.json");
    std::fs::write(&p, r#"{"vars":[1,2,3],"alphabet_size":2,"values":[0.5,-0.1,0.1,0.1,0.1,0.1,0.1,0.1]}"#)
        .unwrap();
    let cfg = dir.path().join("v.toml");
    std::fs::write(&cfg, "[source]\nkind = \"file\"\npath = \"neg.json\"\n").unwrap();
    assert_eq!(code(&mepkit(&["verify", "--config", path_str(&cfg)])), 1);
    let missing = dir.path().join("m.toml");
    std::fs::write(&missing, "[source]\nkind = \"file\"\npath = \"nope.json\"\n").unwrap();
    assert_eq!(code(&mepkit(&["verify", "--config", path_str(&missing)])), 1);
}

fn benchmark_dims(args: &[&str]) -> Vec<usize> {
    let out = mepkit(args);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("method,T,I,dual_dimension,wall_time_ms,iterations"));
    lines.map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect()
}

#[test]
fn benchmark_dual_dimensions() {
    assert_eq!(
        benchmark_dims(&["benchmark", "--method", "gmep", "--t-min", "2", "--t-max", "6", "--alphabet", "2"]),
        vec![4, 12, 24, 40, 60]
    );
    assert_eq!(
        benchmark_dims(&["benchmark", "--method", "mep_t", "--t-min", "1", "--t-max", "3"]),
        vec![12, 24, 48]
    );
    assert_eq!(
        benchmark_dims(&["benchmark", "--method", "smep", "--t-min", "1", "--t-max", "3"]),
        vec![16, 48, 128]
    );
}

#[test]
fn benchmark_json_rows() {
    let out = mepkit(&["benchmark", "--method", "gmep", "--T", "3", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let rows: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(rows[0]["method"], "GMEP");
    assert_eq!(rows[0]["dual_dimension"], 12);
}

fn solved_markov(dir: &TempDir) -> std::path::PathBuf {
    let tp = dir.path().join("t.json");
    write_json(&tp, &stationary_markov()).unwrap();
    let cfg = dir.path().join("g.toml");
    std::fs::write(&cfg, "method = \"mep_t\"\nT = 1\n[source]\nkind = \"file\"\npath = \"t.json\"\n").unwrap();
    let rp = dir.path().join("r.json");
    assert_eq!(code(&mepkit(&["solve", "--config", path_str(&cfg), "--out", path_str(&rp)])), 0);
    rp
}

#[test]
fn generate_bigrams_follow_transitions() {
    let dir = TempDir::new().unwrap();
    let rp = solved_markov(&dir);
    let gp = dir.path().join("seq.json");
    let out = mepkit(&[
        "generate", "--input", path_str(&rp), "--length", "100000", "--seed", "11", "--out", path_str(&gp),
    ]);
    assert_eq!(code(&out), 0);
    let g: Value = read_json(&gp).unwrap();
    let seq: Vec<usize> = g["sequence"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as usize).collect();
    assert_eq!(seq.len(), 100_000);
    let mut counts = [[0f64; 2]; 2];
    for w in seq.windows(2) {
        counts[w[0]][w[1]] += 1.0;
    }
    for (row, step) in counts.iter().zip(STEP) {
        let n: f64 = row.iter().sum();
        for (c, p) in row.iter().zip(step) {
            assert!((c / n - p).abs() < 0.01, "{c} / {n} vs {p}");
        }
    }
}

#[test]
fn generate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let rp = solved_markov(&dir);
    let run = |seed: &str| stdout(&mepkit(&["generate", "--input", path_str(&rp), "--length", "50", "--seed", seed]));
    assert_eq!(run("3"), run("3"));
    assert_ne!(run("3"), run("4"));
    // Greedy decoding of the chain stays in the more likely state 0.
    let cold = stdout(&mepkit(&[
        "generate", "--input", path_str(&rp), "--length", "8", "--temperature", "0", "--format", "csv",
    ]));
    let symbols: Vec<&str> = cold.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(symbols, vec!["0"; 8]);
}

#[test]
fn geometric_table() {
    let out = mepkit(&["geometric", "--mu", "2,10"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "mu,H_closed,H_numeric,spread");
    let row: Vec<f64> = lines[1].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(row[0], 2.0);
    assert!((row[1] - 2.0 * 2f64.ln()).abs() < 1e-12);
    assert!((row[1] - row[2]).abs() < 1e-9);
    assert_eq!(row[3], 0.5);
    assert_eq!(code(&mepkit(&["geometric", "--mu", "0.5"])), 1);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&mepkit(&["frobnicate"])), 1);
    assert_eq!(code(&mepkit(&["solve", "--method", "nope"])), 1);
    assert_eq!(code(&mepkit(&["--help"])), 0);
}
