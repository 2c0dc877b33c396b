//! Command-line front end: ingest survival CSV files, run the causal
//! hazard ratio sensitivity analysis with optional IPTW and bootstrap,
//! generate synthetic scenarios, run replication studies, and export
//! covariate-balance diagnostics. Every run writes a manifest and stamps
//! its outputs with the manifest id, so identical configurations reproduce
//! byte-identical files.

mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use causal_hr::bootstrap::{bootstrap_curves_on_grid, BootstrapConfig};
use causal_hr::cox::{fit_cox, ph_score_test, CovariateSpec, TimeTransform};
use causal_hr::csvio;
use causal_hr::frailty::FrailtyFamily;
use causal_hr::sensitivity::{
    curves_from_prepared, prepare_arms, resolve_grid, GridRule, Method, SensitivityRequest,
    Weighting,
};
use causal_hr::simulate::{
    generate_resolved, resolve, Censoring, Scenario, ScenarioSpec,
};
use causal_hr::study::{run_study, StudyBootstrap, StudyConfig};
use causal_hr::survival::{kaplan_meier, logrank_test, SurvivalSample};
use causal_hr::weights::{balance_diagnostics, compute_weights, fit_logistic, truncate_weights};
use causal_hr::{Error, Result};

use config::RawConfig;

#[derive(Parser)]
#[command(
    name = "causal-hr",
    version,
    about = "Sensitivity analysis for the causal hazard ratio in survival data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct CommonOverrides {
    /// Configuration file ([section] key = value).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input CSV (overrides input.path).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Top-level seed (overrides run.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Estimation method: cox or kernel (overrides estimate.method).
    #[arg(long)]
    method: Option<String>,
    /// Replication count (overrides study.replications / bootstrap.replications).
    #[arg(long)]
    replications: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate sensitivity curves from an input CSV.
    Estimate(CommonOverrides),
    /// Generate a synthetic scenario dataset with its latent sidecar.
    Simulate(CommonOverrides),
    /// Run a replication study over a synthetic scenario.
    Study(CommonOverrides),
    /// Propensity weights and covariate balance diagnostics.
    Balance(CommonOverrides),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Estimate(o) => cmd_estimate(o),
        Command::Simulate(o) => cmd_simulate(o),
        Command::Study(o) => cmd_study(o),
        Command::Balance(o) => cmd_balance(o),
    };
    if let Err(err) = result {
        eprintln!("{}", serde_json::json!({ "error": err.to_string() }));
        std::process::exit(1);
    }
}

// ── Shared resolution ───────────────────────────────────────────────────────

fn load_config(overrides: &CommonOverrides, command: &str) -> Result<RawConfig> {
    let mut cfg = match &overrides.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    if let Some(p) = &overrides.input {
        cfg.set("input", "path", p.display().to_string());
    }
    if let Some(p) = &overrides.out {
        cfg.set("output", "dir", p.display().to_string());
    }
    if let Some(s) = overrides.seed {
        cfg.set("run", "seed", s.to_string());
    }
    if let Some(m) = &overrides.method {
        cfg.set("estimate", "method", m.clone());
    }
    if let Some(r) = overrides.replications {
        match command {
            "study" => cfg.set("study", "replications", r.to_string()),
            _ => cfg.set("bootstrap", "replications", r.to_string()),
        }
    }
    Ok(cfg)
}

const GRID_KEYS: (&str, &[&str]) = ("grid", &["n_points", "min_at_risk", "t_min", "t_max"]);
const WEIGHTING_KEYS: (&str, &[&str]) = ("weighting", &["enabled", "stabilized", "truncation"]);
const BOOTSTRAP_KEYS: (&str, &[&str]) = (
    "bootstrap",
    &["replications", "confidence_level", "reselect_bandwidths"],
);
const ESTIMATE_KEYS: (&str, &[&str]) = ("estimate", &["method", "families", "taus"]);
const SCENARIO_KEYS: (&str, &[&str]) = (
    "scenario",
    &[
        "scenario",
        "tau",
        "n",
        "censoring_fraction",
        "admin_time",
        "beta",
        "beta_z",
        "event_rate",
    ],
);

fn required<'a>(cfg: &'a RawConfig, section: &str, key: &str) -> Result<&'a str> {
    cfg.get(section, key)
        .ok_or_else(|| Error::InvalidInput(format!("config {section}.{key} is required")))
}

fn seed_of(cfg: &RawConfig) -> Result<u64> {
    Ok(cfg.get_u64("run", "seed")?.unwrap_or(0))
}

fn grid_rule(cfg: &RawConfig) -> Result<GridRule> {
    let n_points = cfg.get_usize("grid", "n_points")?.unwrap_or(51);
    let min_at_risk = cfg.get_usize("grid", "min_at_risk")?.unwrap_or(10);
    let t_min = cfg.get_f64("grid", "t_min")?;
    let t_max = cfg.get_f64("grid", "t_max")?;
    match (t_min, t_max) {
        (Some(lo), Some(hi)) => Ok(GridRule::Fixed {
            t_min: lo,
            t_max: hi,
            n_points,
        }),
        (None, None) => Ok(GridRule::FromData {
            n_points,
            min_at_risk,
        }),
        _ => Err(Error::InvalidInput(
            "grid.t_min and grid.t_max must be given together".to_string(),
        )),
    }
}

fn weighting(cfg: &RawConfig) -> Result<Weighting> {
    if cfg.get_bool("weighting", "enabled")?.unwrap_or(false) {
        Ok(Weighting::Iptw {
            stabilized: cfg.get_bool("weighting", "stabilized")?.unwrap_or(true),
            truncation: cfg.get_f64("weighting", "truncation")?,
        })
    } else {
        Ok(Weighting::None)
    }
}

fn estimation_request(cfg: &RawConfig) -> Result<SensitivityRequest> {
    let method = Method::parse(required(cfg, "estimate", "method")?)?;
    let families = cfg
        .get("estimate", "families")
        .unwrap_or("gamma")
        .split(',')
        .map(FrailtyFamily::parse)
        .collect::<Result<Vec<_>>>()?;
    let taus = cfg
        .get("estimate", "taus")
        .unwrap_or("0.1,0.3,0.5,0.7")
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("estimate.taus: cannot parse '{s}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SensitivityRequest {
        method,
        families,
        taus,
        grid: grid_rule(cfg)?,
        weighting: weighting(cfg)?,
    })
}

fn scenario_spec(cfg: &RawConfig) -> Result<ScenarioSpec> {
    let scenario = Scenario::parse(required(cfg, "scenario", "scenario")?)?;
    let tau = required(cfg, "scenario", "tau")?
        .parse::<f64>()
        .map_err(|_| Error::InvalidInput("scenario.tau: not a number".to_string()))?;
    let n = cfg
        .get_usize("scenario", "n")?
        .ok_or_else(|| Error::InvalidInput("config scenario.n is required".to_string()))?;
    let mut spec = match scenario {
        Scenario::Ia | Scenario::Ib => {
            let frac = cfg
                .get_f64("scenario", "censoring_fraction")?
                .ok_or_else(|| {
                    Error::InvalidInput(
                        "config scenario.censoring_fraction is required for ia/ib".to_string(),
                    )
                })?;
            if scenario == Scenario::Ia {
                ScenarioSpec::ia(tau, n, frac)
            } else {
                ScenarioSpec::ib(tau, n, frac)
            }
        }
        Scenario::II => {
            let beta_z = cfg.get_f64("scenario", "beta_z")?.ok_or_else(|| {
                Error::InvalidInput("config scenario.beta_z is required for ii".to_string())
            })?;
            let event_rate = cfg.get_f64("scenario", "event_rate")?.ok_or_else(|| {
                Error::InvalidInput("config scenario.event_rate is required for ii".to_string())
            })?;
            let mut s = ScenarioSpec::ii(tau, n, beta_z, event_rate);
            if let Some(t) = cfg.get_f64("scenario", "admin_time")? {
                s.censoring = Censoring::Administrative(t);
            }
            s
        }
    };
    if let Some(beta) = cfg.get_f64("scenario", "beta")? {
        spec.beta = beta;
    }
    Ok(spec)
}

fn bootstrap_settings(cfg: &RawConfig, seed: u64) -> Result<Option<BootstrapConfig>> {
    let reps = cfg.get_usize("bootstrap", "replications")?.unwrap_or(0);
    if reps == 0 {
        return Ok(None);
    }
    Ok(Some(BootstrapConfig {
        replications: reps,
        seed,
        confidence_level: cfg.get_f64("bootstrap", "confidence_level")?.unwrap_or(0.95),
        reselect_bandwidths: cfg
            .get_bool("bootstrap", "reselect_bandwidths")?
            .unwrap_or(true),
    }))
}

// ── Manifest ────────────────────────────────────────────────────────────────

#[derive(serde::Serialize)]
struct Manifest {
    run_id: String,
    command: String,
    package_version: String,
    config: BTreeMap<String, String>,
    input_sha256: Option<String>,
    outputs: Vec<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn build_manifest(
    command: &str,
    cfg: &RawConfig,
    input: Option<&Path>,
    outputs: &[&str],
) -> Result<Manifest> {
    let input_sha256 = match input {
        Some(path) => Some(sha256_hex(&std::fs::read(path)?)),
        None => None,
    };
    let mut hasher = Sha256::new();
    hasher.update(command.as_bytes());
    hasher.update(b"\n");
    hasher.update(cfg.canonical().as_bytes());
    hasher.update(b"\n");
    hasher.update(env!("CARGO_PKG_VERSION").as_bytes());
    hasher.update(b"\n");
    if let Some(h) = &input_sha256 {
        hasher.update(h.as_bytes());
    }
    let run_id = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    Ok(Manifest {
        run_id,
        command: command.to_string(),
        package_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.entries(),
        input_sha256,
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
    })
}

fn out_dir(cfg: &RawConfig) -> PathBuf {
    PathBuf::from(cfg.get("output", "dir").unwrap_or("."))
}

fn write_manifest(manifest: &Manifest, dir: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::InvalidInput(format!("manifest serialization: {e}")))?;
    std::fs::write(dir.join("manifest.json"), json + "\n")?;
    Ok(())
}

fn create_file(dir: &Path, name: &str) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(
        dir.join(name),
    )?))
}

// ── estimate ────────────────────────────────────────────────────────────────

fn cmd_estimate(overrides: &CommonOverrides) -> Result<()> {
    let cfg = load_config(overrides, "estimate")?;
    cfg.check_schema(&[
        ("input", &["path"]),
        ("output", &["dir"]),
        ("run", &["seed"]),
        ESTIMATE_KEYS,
        GRID_KEYS,
        WEIGHTING_KEYS,
        BOOTSTRAP_KEYS,
    ])?;
    let input = PathBuf::from(required(&cfg, "input", "path")?);
    let dir = out_dir(&cfg);
    std::fs::create_dir_all(&dir)?;
    let seed = seed_of(&cfg)?;
    let request = estimation_request(&cfg)?;
    request.validate()?;
    let sample = csvio::read_sample_path(&input)?;

    let weighted = !matches!(request.weighting, Weighting::None);
    let with_balance = weighted && sample.n_covariates() > 0;
    let mut outputs = vec!["hrc_curves.csv", "ph_test.csv"];
    if with_balance {
        outputs.push("balance.csv");
    }
    outputs.push("manifest.json");
    let manifest = build_manifest("estimate", &cfg, Some(&input), &outputs)?;

    let grid = resolve_grid(&sample, &request)?;
    let curves = match bootstrap_settings(&cfg, seed)? {
        Some(bs) => bootstrap_curves_on_grid(&sample, &request, &grid, &bs)?,
        None => {
            let prepared = prepare_arms(&sample, &request, &grid, None)?;
            curves_from_prepared(&prepared, &request)?
        }
    };
    csvio::write_curves(&curves, create_file(&dir, "hrc_curves.csv")?, Some(&manifest.run_id))?;

    // weights for diagnostics mirror the estimation weighting
    let wv = match request.weighting {
        Weighting::None => None,
        Weighting::Iptw {
            stabilized,
            truncation,
        } => {
            let model = fit_logistic(&sample)?;
            let mut wv = compute_weights(&model, &sample, stabilized)?;
            if let Some(p) = truncation {
                wv = truncate_weights(&wv, p)?;
            }
            Some(wv)
        }
    };
    if with_balance {
        let rows = balance_diagnostics(&sample, wv.as_ref())?;
        csvio::write_balance(&rows, create_file(&dir, "balance.csv")?, Some(&manifest.run_id))?;
    }

    write_ph_report(
        &sample,
        wv.as_ref().map(|w| w.weights.as_slice()),
        &dir,
        &manifest.run_id,
    )?;
    write_manifest(&manifest, &dir)
}

/// Marginal Cox PH diagnostic; failures are recorded in the report rather
/// than aborting the estimation run.
fn write_ph_report(
    sample: &SurvivalSample,
    weights: Option<&[f64]>,
    dir: &Path,
    run_id: &str,
) -> Result<()> {
    use std::io::Write as _;
    let mut w = create_file(dir, "ph_test.csv")?;
    writeln!(w, "# run {run_id}")?;
    writeln!(w, "scope,statistic,p_value")?;
    let outcome = fit_cox(sample, &CovariateSpec::treatment_only(), weights)
        .and_then(|fit| ph_score_test(&fit, sample, weights, TimeTransform::KmRank));
    match outcome {
        Ok(res) => {
            writeln!(w, "global,{},{}", res.statistic, res.p_value)?;
            for (i, (stat, p)) in res.per_covariate.iter().enumerate() {
                let name = if i == 0 { "treatment" } else { "covariate" };
                writeln!(w, "{name},{stat},{p}")?;
            }
        }
        Err(err) => {
            writeln!(w, "# error: {err}")?;
        }
    }
    Ok(())
}

// ── simulate ────────────────────────────────────────────────────────────────

fn cmd_simulate(overrides: &CommonOverrides) -> Result<()> {
    let cfg = load_config(overrides, "simulate")?;
    cfg.check_schema(&[
        ("output", &["dir"]),
        ("run", &["seed"]),
        SCENARIO_KEYS,
        GRID_KEYS,
    ])?;
    let dir = out_dir(&cfg);
    std::fs::create_dir_all(&dir)?;
    let seed = seed_of(&cfg)?;
    let spec = scenario_spec(&cfg)?;
    let manifest = build_manifest(
        "simulate",
        &cfg,
        None,
        &["dataset.csv", "hidden.csv", "truth.csv", "manifest.json"],
    )?;

    let resolved = resolve(&spec)?;
    let ds = generate_resolved(&resolved, seed)?;
    csvio::write_sample(&ds.sample, create_file(&dir, "dataset.csv")?, Some(&manifest.run_id))?;
    csvio::write_hidden(
        &ds.sample,
        &ds.hidden,
        create_file(&dir, "hidden.csv")?,
        Some(&manifest.run_id),
    )?;
    let rule = match grid_rule(&cfg)? {
        GridRule::FromData { n_points, .. } if spec.scenario == Scenario::II => GridRule::Fixed {
            t_min: 0.0,
            t_max: 10.0,
            n_points,
        },
        rule => rule,
    };
    let probe = SensitivityRequest {
        method: Method::Cox,
        families: vec![FrailtyFamily::Gamma],
        taus: vec![spec.tau],
        grid: rule,
        weighting: Weighting::None,
    };
    let grid = resolve_grid(&ds.sample, &probe)?;
    csvio::write_truth(&spec, &grid, create_file(&dir, "truth.csv")?, Some(&manifest.run_id))?;
    write_manifest(&manifest, &dir)
}

// ── study ───────────────────────────────────────────────────────────────────

fn cmd_study(overrides: &CommonOverrides) -> Result<()> {
    let cfg = load_config(overrides, "study")?;
    cfg.check_schema(&[
        ("output", &["dir"]),
        ("run", &["seed"]),
        ("study", &["replications", "naive_conditional_cox"]),
        SCENARIO_KEYS,
        ESTIMATE_KEYS,
        GRID_KEYS,
        WEIGHTING_KEYS,
        BOOTSTRAP_KEYS,
    ])?;
    let dir = out_dir(&cfg);
    std::fs::create_dir_all(&dir)?;
    let seed = seed_of(&cfg)?;
    let scenario = scenario_spec(&cfg)?;
    let mut request = estimation_request(&cfg)?;
    // scenario II defaults to its administrative window when no explicit grid
    if scenario.scenario == Scenario::II {
        if let GridRule::FromData { n_points, .. } = request.grid {
            if cfg.get("grid", "t_min").is_none() {
                request.grid = GridRule::Fixed {
                    t_min: 0.0,
                    t_max: 10.0,
                    n_points,
                };
            }
        }
    }
    let replications = cfg
        .get_usize("study", "replications")?
        .ok_or_else(|| Error::InvalidInput("config study.replications is required".to_string()))?;
    let naive = cfg
        .get_bool("study", "naive_conditional_cox")?
        .unwrap_or(false);
    let bootstrap = bootstrap_settings(&cfg, seed)?.map(|b| StudyBootstrap {
        replications: b.replications,
        confidence_level: b.confidence_level,
        reselect_bandwidths: b.reselect_bandwidths,
    });
    let manifest = build_manifest(
        "study",
        &cfg,
        None,
        &["study_summary.csv", "manifest.json"],
    )?;

    let summary = run_study(&StudyConfig {
        scenario,
        request,
        replications,
        bootstrap,
        naive_conditional_cox: naive,
        seed,
    })?;
    csvio::write_study_rows(
        &summary.rows,
        summary.naive_cox.as_ref(),
        create_file(&dir, "study_summary.csv")?,
        Some(&manifest.run_id),
    )?;
    write_manifest(&manifest, &dir)
}

// ── balance ─────────────────────────────────────────────────────────────────

fn cmd_balance(overrides: &CommonOverrides) -> Result<()> {
    let cfg = load_config(overrides, "balance")?;
    cfg.check_schema(&[
        ("input", &["path"]),
        ("output", &["dir"]),
        ("run", &["seed"]),
        WEIGHTING_KEYS,
    ])?;
    let input = PathBuf::from(required(&cfg, "input", "path")?);
    let dir = out_dir(&cfg);
    std::fs::create_dir_all(&dir)?;
    let sample = csvio::read_sample_path(&input)?;
    let manifest = build_manifest(
        "balance",
        &cfg,
        Some(&input),
        &["balance.csv", "logrank.csv", "km_curves.csv", "manifest.json"],
    )?;

    let stabilized = cfg.get_bool("weighting", "stabilized")?.unwrap_or(true);
    let truncation = cfg.get_f64("weighting", "truncation")?;
    let model = fit_logistic(&sample)?;
    let mut wv = compute_weights(&model, &sample, stabilized)?;
    if let Some(p) = truncation {
        wv = truncate_weights(&wv, p)?;
    }

    let rows = balance_diagnostics(&sample, Some(&wv))?;
    csvio::write_balance(&rows, create_file(&dir, "balance.csv")?, Some(&manifest.run_id))?;

    {
        use std::io::Write as _;
        let mut w = create_file(&dir, "logrank.csv")?;
        writeln!(w, "# run {}", manifest.run_id)?;
        writeln!(w, "weighted,statistic,p_value")?;
        let plain = logrank_test(&sample, None)?;
        writeln!(w, "false,{},{}", plain.statistic, plain.p_value)?;
        let weighted = logrank_test(&sample, Some(&wv.weights))?;
        writeln!(w, "true,{},{}", weighted.statistic, weighted.p_value)?;
    }
    {
        use std::io::Write as _;
        let mut w = create_file(&dir, "km_curves.csv")?;
        writeln!(w, "# run {}", manifest.run_id)?;
        writeln!(w, "arm,weighted,t,survival")?;
        for arm in [0u8, 1u8] {
            for (weighted, weights) in [(false, None), (true, Some(wv.weights.as_slice()))] {
                let km = kaplan_meier(&sample, arm, weights)?;
                writeln!(w, "{arm},{weighted},0,1")?;
                for (t, _) in km.jumps() {
                    writeln!(w, "{arm},{weighted},{t},{}", km.survival(t))?;
                }
            }
        }
    }
    write_manifest(&manifest, &dir)
}
