use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const RUNS_HEADER: &str =
    "algorithm,sampler,batch_size,seed,epoch,V_lambda,V_lambda_normalized,dist_sq,grad_phi_sq,status";

fn sgda(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgda"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_game(dir: &Path, name: &str, extra: &str) -> PathBuf {
    let cfg = dir.join(format!("{name}.cfg"));
    fs::write(&cfg, format!("n = 12\nd = 4\nrank_deficiency = 1\n{extra}")).unwrap();
    let out = sgda(dir, &["gen", cfg.to_str().unwrap(), "--out", name]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    dir.join(name)
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn gen_default_and_reproducible() {
    let dir = TempDir::new().unwrap();
    let out = sgda(dir.path(), &["gen", "--seed", "5", "--out", "a.game"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("kappa2"));
    let text = fs::read_to_string(dir.path().join("a.game")).unwrap();
    assert!(text.contains("\nn = 100\n") && text.contains("\nd = 25\n"));
    sgda(dir.path(), &["gen", "--seed", "5", "--out", "b.game"]);
    assert_eq!(text, fs::read_to_string(dir.path().join("b.game")).unwrap());
}

#[test]
fn gen_zero_delta_has_no_linear_terms() {
    let dir = TempDir::new().unwrap();
    let game = small_game(dir.path(), "g", "delta = 0\n");
    let text = fs::read_to_string(game).unwrap();
    let linear: Vec<&str> = text.lines().filter(|l| l.starts_with("u[") || l.starts_with("v[")).collect();
    assert_eq!(linear.len(), 24);
    for line in linear {
        let values = line.split_once('=').unwrap().1;
        assert!(values.split_whitespace().all(|v| v.parse::<f64>().unwrap() == 0.0), "{line}");
    }
}

#[test]
fn gen_config_errors_name_the_line() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.cfg"), "n = 12\n# comment\nmu_C = -1\n").unwrap();
    let out = sgda(dir.path(), &["gen", "bad.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("config line 3"), "{}", stderr(&out));
    fs::write(dir.path().join("typo.cfg"), "n = 12\nmuC = 1\n").unwrap();
    let out = sgda(dir.path(), &["gen", "typo.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2: unknown key `muC`"), "{}", stderr(&out));
}

#[test]
fn run_row_count_and_normalization() {
    let dir = TempDir::new().unwrap();
    small_game(dir.path(), "g", "");
    let out = sgda(
        dir.path(),
        &["run", "--game", "g", "--algorithms", "sim", "--epochs", "3", "--seeds", "4,9", "--batch-sizes", "3"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = stdout(&out);
    assert!(csv.lines().any(|l| l == RUNS_HEADER));
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 8);
    for r in rows.iter().filter(|r| r[4] == "0") {
        assert_eq!(r[6].parse::<f64>().unwrap(), 1.0);
    }
}

#[test]
fn run_from_config_file() {
    let dir = TempDir::new().unwrap();
    small_game(dir.path(), "g", "");
    fs::write(
        dir.path().join("grid.cfg"),
        "game = g\nalgorithms = sim, agda\nsamplers = RR\nbatch_sizes = 1\nepochs = 2\nseeds = 1\nc0 = 0.1\nc1 = 0.5\n",
    )
    .unwrap();
    let out = sgda(dir.path(), &["run", "--config", "grid.cfg"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(data_rows(&stdout(&out)).len(), 6);
    fs::write(dir.path().join("dup.cfg"), "game = g\nseeds = 1, 1\n").unwrap();
    let out = sgda(dir.path(), &["run", "--config", "dup.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("distinct"));
}

#[test]
fn shared_seeds_share_schedules_and_jobs_do_not_matter() {
    let dir = TempDir::new().unwrap();
    small_game(dir.path(), "g", "");
    let args = |jobs: &'static str| {
        vec![
            "run", "--game", "g", "--algorithms", "sim,alt", "--samplers", "RR,WR", "--epochs", "4", "--seeds", "1,2,3",
            "--debug-schedules", "--jobs", jobs,
        ]
    };
    let one = stdout(&sgda(dir.path(), &args("1")));
    let many = stdout(&sgda(dir.path(), &args("3")));
    assert_eq!(one, many);
    let rows = data_rows(&one);
    let digest = |alg: &str, seed: &str, epoch: &str| {
        rows.iter()
            .find(|r| r[0] == alg && r[1] == "RR" && r[3] == seed && r[4] == epoch)
            .map(|r| r[10].clone())
            .unwrap()
    };
    assert_eq!(digest("simSGDA", "2", "1"), digest("altSGDA", "2", "1"));
    assert_ne!(digest("simSGDA", "2", "1"), digest("simSGDA", "3", "1"));
}

#[test]
fn divergence_is_recorded() {
    let dir = TempDir::new().unwrap();
    small_game(dir.path(), "g", "");
    let out = sgda(
        dir.path(),
        &["run", "--game", "g", "--algorithms", "gda-sim", "--alpha", "50", "--beta", "50", "--epochs", "200"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = data_rows(&stdout(&out));
    assert!(rows.iter().all(|r| r[9] == "Diverged"));
    assert!(rows.len() < 201);
}

#[test]
fn aggregate_single_run_and_svg() {
    let dir = TempDir::new().unwrap();
    small_game(dir.path(), "g", "");
    let out = sgda(dir.path(), &["run", "--game", "g", "--epochs", "5", "--out", "runs.csv"]);
    assert_eq!(out.status.code(), Some(0));
    let out = sgda(dir.path(), &["aggregate", "runs.csv", "--svg", "plot.svg", "--out", "agg.csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let agg = fs::read_to_string(dir.path().join("agg.csv")).unwrap();
    assert_eq!(
        agg.lines().next().unwrap(),
        "algorithm,sampler,batch_size,epoch,mean_norm_V,ci_low,ci_high,num_runs"
    );
    for r in data_rows(&agg) {
        assert_eq!(r[4], r[5]);
        assert_eq!(r[4], r[6]);
        assert_eq!(r[7], "1");
    }
    let svg = fs::read_to_string(dir.path().join("plot.svg")).unwrap();
    assert!(svg.contains(r#"viewBox="0 0 800 500""#));
}

#[test]
fn aggregate_rejects_empty_and_mixed_inputs() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("empty.csv"), "").unwrap();
    let out = sgda(dir.path(), &["aggregate", "empty.csv", "--out", "agg.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("agg.csv").exists());

    small_game(dir.path(), "g1", "seed = 1\n");
    small_game(dir.path(), "g2", "seed = 2\n");
    sgda(dir.path(), &["run", "--game", "g1", "--epochs", "2", "--out", "r1.csv"]);
    sgda(dir.path(), &["run", "--game", "g2", "--epochs", "2", "--out", "r2.csv"]);
    let out = sgda(dir.path(), &["aggregate", "r1.csv", "r2.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("different games"), "{}", stderr(&out));
    let joined = fs::read_to_string(dir.path().join("r1.csv")).unwrap() + &fs::read_to_string(dir.path().join("r2.csv")).unwrap();
    fs::write(dir.path().join("joined.csv"), joined).unwrap();
    let out = sgda(dir.path(), &["aggregate", "joined.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_fresh_corrupted_and_single_component() {
    let dir = TempDir::new().unwrap();
    let game = small_game(dir.path(), "g", "");
    let out = sgda(dir.path(), &["validate", "g"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));

    let text = fs::read_to_string(&game).unwrap();
    let corrupted: String = text
        .lines()
        .map(|l| {
            if l.starts_with("C[1] =") {
                let vals: Vec<String> = (0..16).map(|k| if k % 5 == 0 { "-100.0" } else { "0.0" }.to_string()).collect();
                format!("C[1] = {}", vals.join(" "))
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(dir.path().join("bad"), corrupted + "\n").unwrap();
    let out = sgda(dir.path(), &["validate", "bad"]);
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
    let report = stdout(&out);
    assert!(report.contains("FAIL  y-side PL"), "{report}");
    assert!(report.contains("witness"), "{report}");

    fs::write(dir.path().join("one.cfg"), "n = 1\nd = 3\nrank_deficiency = 1\ndelta = 0\nperturb_fraction = 0\n").unwrap();
    sgda(dir.path(), &["gen", "one.cfg", "--out", "one"]);
    let out = sgda(dir.path(), &["validate", "one"]);
    assert!(stdout(&out).contains("variance constants: A = 0, B = 0"), "{}", stdout(&out));
}

#[test]
fn lowerbound_rows_and_regime_errors() {
    let dir = TempDir::new().unwrap();
    let out = sgda(dir.path(), &["lowerbound", "--case", "3", "--r", "10"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("predicted: Omega(kappa1 r log(1/eps))"));
    let out = sgda(dir.path(), &["lowerbound", "--case", "1", "--r", "2", "--betas", "1.0"]);
    assert_eq!(out.status.code(), Some(0));
    let table = stdout(&out);
    let row = table.lines().find(|l| l.trim_start().starts_with("1.0000000000000000e0")).unwrap();
    assert!(row.ends_with("DIVERGED"), "{row}");
    let rho: f64 = row.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(rho >= 1.0);
    let out = sgda(dir.path(), &["lowerbound", "--case", "3", "--r", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("[5, inf]"), "{}", stderr(&out));
}

#[test]
fn variance_exact_table() {
    let dir = TempDir::new().unwrap();
    let out = sgda(dir.path(), &["variance", "--n", "6", "--b", "3", "--k", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let tau2: f64 = text.split("tau2 = ").nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    let row: Vec<f64> = text
        .lines()
        .last()
        .unwrap()
        .split_whitespace()
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((row[1] - tau2 / 5.0).abs() < 1e-15);
    assert!((row[2] - tau2 / 5.0).abs() < 1e-12);
}
