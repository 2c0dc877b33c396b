//! End-to-end checks of the command-line interface: schema validation with
//! row numbers, deterministic reruns, and the shape of every output table.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_causal-hr"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn simulate_dataset(dir: &Path, config_extra: &str) -> std::path::PathBuf {
    let cfg = dir.join("sim.cfg");
    write(
        &cfg,
        &format!(
            "[scenario]\n{config_extra}\n[output]\ndir = {}\n[run]\nseed = 11\n",
            dir.join("sim").display()
        ),
    );
    let out = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("sim").join("dataset.csv")
}

#[test]
fn malformed_event_row_exits_with_line_number() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("bad.csv");
    write(
        &data,
        "id,time,event,treatment\n1,1.0,1,0\n2,2.0,1,1\n3,3.0,2,0\n",
    );
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "estimate",
        "--input",
        data.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--method",
        "cox",
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 4"), "{stderr}");
    assert!(stderr.contains("error"), "{stderr}");
}

#[test]
fn unknown_config_key_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    write(&cfg, "[scenario]\nscenario = ia\ntau = 0.5\nn = 100\ncensoring_fraction = 0.2\nbogus = 1\n");
    let out = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("bogus"),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn simulate_outputs_dataset_hidden_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = simulate_dataset(
        tmp.path(),
        "scenario = ia\ntau = 0.5\nn = 200\ncensoring_fraction = 0.2",
    );
    let text = read(&dataset);
    assert!(text.starts_with("# run "));
    assert!(text.lines().nth(1).unwrap().starts_with("id,time,event,treatment"));
    assert_eq!(text.lines().count(), 202);
    let hidden = read(&dataset.parent().unwrap().join("hidden.csv"));
    assert!(hidden.lines().nth(1).unwrap().starts_with("id,v,t0,t1,c"));
    let truth = read(&dataset.parent().unwrap().join("truth.csv"));
    assert!(truth.lines().nth(1).unwrap().starts_with("t,hrc_true"));
    let manifest = read(&dataset.parent().unwrap().join("manifest.json"));
    assert!(manifest.contains("\"command\": \"simulate\""));
}

#[test]
fn estimate_writes_curves_ph_report_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = simulate_dataset(
        tmp.path(),
        "scenario = ia\ntau = 0.5\nn = 400\ncensoring_fraction = 0.2",
    );
    let cfg = tmp.path().join("est.cfg");
    let out_dir = tmp.path().join("est");
    write(
        &cfg,
        &format!(
            "[input]\npath = {}\n[output]\ndir = {}\n[estimate]\nmethod = cox\nfamilies = gamma\ntaus = 0.3,0.7\n[grid]\nn_points = 21\n[run]\nseed = 5\n",
            dataset.display(),
            out_dir.display()
        ),
    );
    let out = run(&["estimate", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let curves = read(&out_dir.join("hrc_curves.csv"));
    let mut lines = curves.lines();
    let run_line = lines.next().unwrap();
    assert!(run_line.starts_with("# run "));
    assert_eq!(
        lines.next().unwrap(),
        "family,tau,theta,method,t,estimate,flag,se,ci_lo,ci_hi"
    );
    // 2 taus x 21 grid points
    assert_eq!(curves.lines().count(), 2 + 42);
    let ph = read(&out_dir.join("ph_test.csv"));
    assert!(ph.contains("global,"));
    let manifest = read(&out_dir.join("manifest.json"));
    assert!(manifest.contains(run_line.trim_start_matches("# run ").trim()));
}

#[test]
fn estimate_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = simulate_dataset(
        tmp.path(),
        "scenario = ia\ntau = 0.5\nn = 300\ncensoring_fraction = 0.2",
    );
    let mut texts = Vec::new();
    for name in ["a", "b"] {
        let cfg = tmp.path().join(format!("{name}.cfg"));
        let out_dir = tmp.path().join(name);
        write(
            &cfg,
            &format!(
                "[input]\npath = {}\n[output]\ndir = {}\n[estimate]\nmethod = kernel\ntaus = 0.5\n[grid]\nn_points = 11\n[bootstrap]\nreplications = 15\n[run]\nseed = 9\n",
                dataset.display(),
                out_dir.display()
            ),
        );
        let out = run(&["estimate", "--config", cfg.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        texts.push(read(&out_dir.join("hrc_curves.csv")));
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn estimate_with_weighting_writes_balance() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = simulate_dataset(
        tmp.path(),
        "scenario = ii\ntau = 0.5\nn = 3000\nbeta_z = -0.7\nevent_rate = 0.3",
    );
    let cfg = tmp.path().join("est.cfg");
    let out_dir = tmp.path().join("est");
    write(
        &cfg,
        &format!(
            "[input]\npath = {}\n[output]\ndir = {}\n[estimate]\nmethod = kernel\ntaus = 0.5\n[grid]\nt_min = 0\nt_max = 10\nn_points = 11\n[weighting]\nenabled = true\nstabilized = true\ntruncation = 0.99\n[run]\nseed = 3\n",
            dataset.display(),
            out_dir.display()
        ),
    );
    let out = run(&["estimate", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let balance = read(&out_dir.join("balance.csv"));
    assert!(balance.lines().nth(1).unwrap().starts_with("covariate,smd_unweighted,smd_weighted"));
    assert!(balance.lines().count() >= 3);
}

#[test]
fn study_summary_shape_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for name in ["s1", "s2"] {
        let cfg = tmp.path().join(format!("{name}.cfg"));
        let out_dir = tmp.path().join(name);
        write(
            &cfg,
            &format!(
                "[scenario]\nscenario = ia\ntau = 0.5\nn = 300\ncensoring_fraction = 0.2\n[estimate]\nmethod = cox\ntaus = 0.5\n[grid]\nn_points = 11\n[study]\nreplications = 6\n[output]\ndir = {}\n[run]\nseed = 21\n",
                out_dir.display()
            ),
        );
        let out = run(&["study", "--config", cfg.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        texts.push(read(&out_dir.join("study_summary.csv")));
    }
    assert_eq!(texts[0], texts[1]);
    let header = texts[0].lines().nth(1).unwrap();
    assert_eq!(
        header,
        "family,tau,method,t,true_hrc,n_ok,mean_est,bias,rel_bias,emp_sd,mean_se,se_ratio,coverage,naive_cox_rel_bias"
    );
    assert_eq!(texts[0].lines().count(), 2 + 11);
}

#[test]
fn single_replication_study_leaves_spread_empty() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = tmp.path().join("s.cfg");
    write(
        &cfg,
        &format!(
            "[scenario]\nscenario = ia\ntau = 0.5\nn = 300\ncensoring_fraction = 0.2\n[estimate]\nmethod = cox\ntaus = 0.5\n[grid]\nn_points = 5\n[study]\nreplications = 1\n[output]\ndir = {}\n[run]\nseed = 2\n",
            out_dir.display()
        ),
    );
    let out = run(&["study", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = read(&out_dir.join("study_summary.csv"));
    for line in text.lines().skip(2) {
        let fields: Vec<&str> = line.split(',').collect();
        // emp_sd and se_ratio columns are empty
        assert_eq!(fields[9], "");
        assert_eq!(fields[11], "");
    }
}

#[test]
fn balance_command_outputs_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = simulate_dataset(
        tmp.path(),
        "scenario = ii\ntau = 0.5\nn = 2000\nbeta_z = -0.7\nevent_rate = 0.3",
    );
    let out_dir = tmp.path().join("bal");
    let out = run(&[
        "balance",
        "--input",
        dataset.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let balance = read(&out_dir.join("balance.csv"));
    assert!(balance.contains("z1,"));
    let logrank = read(&out_dir.join("logrank.csv"));
    assert!(logrank.contains("false,") && logrank.contains("true,"));
    let km = read(&out_dir.join("km_curves.csv"));
    assert!(km.lines().nth(1).unwrap().starts_with("arm,weighted,t,survival"));
    // survival values are non-increasing within each (arm, weighted) block
    let mut last: Option<(String, f64)> = None;
    for line in km.lines().skip(2) {
        let f: Vec<&str> = line.split(',').collect();
        let key = format!("{},{}", f[0], f[1]);
        let s: f64 = f[3].parse().unwrap();
        if let Some((k, prev)) = &last {
            if *k == key {
                assert!(s <= *prev + 1e-12);
            }
        }
        last = Some((key, s));
    }
}

#[test]
fn missing_method_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = simulate_dataset(
        tmp.path(),
        "scenario = ia\ntau = 0.5\nn = 200\ncensoring_fraction = 0.2",
    );
    let out = run(&[
        "estimate",
        "--input",
        dataset.to_str().unwrap(),
        "--out",
        tmp.path().join("x").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("estimate.method"),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
