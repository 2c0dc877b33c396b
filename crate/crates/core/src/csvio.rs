//! CSV schemas: sample ingestion (`id,time,event,treatment,z1,...,zk`),
//! latent-column sidecars, long-format curve exports, and diagnostic
//! tables. Readers accept `#`-prefixed comment lines; writers emit an
//! optional leading `# run <id>` line tying every output to a run manifest.

use std::io::{Read, Write};
use std::path::Path;

use crate::sensitivity::SensitivityCurve;
use crate::simulate::HiddenColumns;
use crate::survival::{SubjectRecord, SurvivalSample};
use crate::weights::BalanceRow;
use crate::{Error, Result};

fn fmt(x: f64) -> String {
    // shortest round-trip representation; deterministic across runs
    format!("{x}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

// ── Sample ingestion ────────────────────────────────────────────────────────

/// Read a survival sample, validating the header and every row.
///
/// Errors name the 1-based line in the file (the header is line 1).
pub fn read_sample(reader: impl Read) -> Result<SurvivalSample> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv(format!("cannot read header: {e}")))?
        .clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 4 || cols[0] != "id" || cols[1] != "time" || cols[2] != "event" || cols[3] != "treatment"
    {
        return Err(Error::Csv(format!(
            "header must start with id,time,event,treatment (line 1), got {}",
            cols.join(",")
        )));
    }
    for (k, name) in cols[4..].iter().enumerate() {
        let expect = format!("z{}", k + 1);
        if *name != expect {
            return Err(Error::Csv(format!(
                "covariate column {} must be named {expect} (line 1), got {name}",
                k + 5
            )));
        }
    }
    let n_cov = cols.len() - 4;
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Csv(format!("malformed row: {e}")))?;
        let line = rec
            .position()
            .map(|p| p.line())
            .unwrap_or(records.len() as u64 + 2);
        if rec.len() != cols.len() {
            return Err(Error::Csv(format!(
                "line {line}: expected {} fields, got {}",
                cols.len(),
                rec.len()
            )));
        }
        let parse_f64 = |field: &str, name: &str| -> Result<f64> {
            field.parse::<f64>().map_err(|_| {
                Error::Csv(format!("line {line}: {name} '{field}' is not a number"))
            })
        };
        let time = parse_f64(&rec[1], "time")?;
        if !time.is_finite() || time < 0.0 {
            return Err(Error::Csv(format!(
                "line {line}: time must be finite and >= 0, got {time}"
            )));
        }
        let event = match &rec[2] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Csv(format!(
                    "line {line}: event must be 0 or 1, got '{other}'"
                )))
            }
        };
        let treatment = match &rec[3] {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(Error::Csv(format!(
                    "line {line}: treatment must be 0 or 1, got '{other}'"
                )))
            }
        };
        let mut covariates = Vec::with_capacity(n_cov);
        for k in 0..n_cov {
            covariates.push(parse_f64(&rec[4 + k], &format!("z{}", k + 1))?);
        }
        records.push(SubjectRecord::new(&rec[0], time, event, treatment, covariates));
    }
    SurvivalSample::new(records)
}

pub fn read_sample_path(path: impl AsRef<Path>) -> Result<SurvivalSample> {
    let file = std::fs::File::open(path.as_ref())?;
    read_sample(std::io::BufReader::new(file))
}

/// Write a sample in the ingestion schema.
pub fn write_sample(sample: &SurvivalSample, mut w: impl Write, run_id: Option<&str>) -> Result<()> {
    if let Some(id) = run_id {
        writeln!(w, "# run {id}")?;
    }
    let n_cov = sample.n_covariates();
    let mut header = "id,time,event,treatment".to_string();
    for k in 1..=n_cov {
        header.push_str(&format!(",z{k}"));
    }
    writeln!(w, "{header}")?;
    for r in sample.records() {
        let mut line = format!(
            "{},{},{},{}",
            r.id,
            fmt(r.time),
            u8::from(r.event),
            r.treatment
        );
        for z in &r.covariates {
            line.push(',');
            line.push_str(&fmt(*z));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Sidecar with the latent simulation columns, for oracle checks only.
pub fn write_hidden(
    sample: &SurvivalSample,
    hidden: &HiddenColumns,
    mut w: impl Write,
    run_id: Option<&str>,
) -> Result<()> {
    if let Some(id) = run_id {
        writeln!(w, "# run {id}")?;
    }
    writeln!(w, "id,v,t0,t1,c")?;
    for (i, r) in sample.records().iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.id,
            fmt(hidden.v[i]),
            fmt(hidden.t0[i]),
            fmt(hidden.t1[i]),
            fmt(hidden.c[i])
        )?;
    }
    Ok(())
}

// ── Result exports ──────────────────────────────────────────────────────────

/// Long-format curve export:
/// `family,tau,theta,method,t,estimate,flag,se,ci_lo,ci_hi`.
pub fn write_curves(
    curves: &[SensitivityCurve],
    mut w: impl Write,
    run_id: Option<&str>,
) -> Result<()> {
    if let Some(id) = run_id {
        writeln!(w, "# run {id}")?;
    }
    writeln!(w, "family,tau,theta,method,t,estimate,flag,se,ci_lo,ci_hi")?;
    for c in curves {
        for p in &c.points {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                c.family.label(),
                fmt(c.tau),
                fmt(c.theta),
                c.method.label(),
                fmt(p.t),
                fmt_opt(p.estimate),
                p.flag.label(),
                fmt_opt(p.se),
                fmt_opt(p.ci.map(|ci| ci.0)),
                fmt_opt(p.ci.map(|ci| ci.1)),
            )?;
        }
    }
    Ok(())
}

/// Balance table export: `covariate,smd_unweighted,smd_weighted`.
pub fn write_balance(rows: &[BalanceRow], mut w: impl Write, run_id: Option<&str>) -> Result<()> {
    if let Some(id) = run_id {
        writeln!(w, "# run {id}")?;
    }
    writeln!(w, "covariate,smd_unweighted,smd_weighted")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{}",
            r.covariate,
            fmt(r.smd_unweighted),
            fmt(r.smd_weighted)
        )?;
    }
    Ok(())
}

/// Per-grid-point study summary export.
pub fn write_study_rows(
    rows: &[crate::study::StudyRow],
    naive: Option<&crate::study::NaiveCoxSummary>,
    mut w: impl Write,
    run_id: Option<&str>,
) -> Result<()> {
    if let Some(id) = run_id {
        writeln!(w, "# run {id}")?;
    }
    writeln!(
        w,
        "family,tau,method,t,true_hrc,n_ok,mean_est,bias,rel_bias,emp_sd,mean_se,se_ratio,coverage,naive_cox_rel_bias"
    )?;
    let naive_rb = naive.map(|n| n.rel_bias);
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.family.label(),
            fmt(r.tau),
            r.method.label(),
            fmt(r.t),
            fmt(r.true_hrc),
            r.n_ok,
            fmt_opt(r.mean_est),
            fmt_opt(r.bias),
            fmt_opt(r.rel_bias),
            fmt_opt(r.emp_sd),
            fmt_opt(r.mean_se),
            fmt_opt(r.se_ratio),
            fmt_opt(r.coverage),
            fmt_opt(naive_rb),
        )?;
    }
    Ok(())
}

/// True-curve export for a simulated scenario.
pub fn write_truth(
    spec: &crate::simulate::ScenarioSpec,
    grid: &crate::survival::TimeGrid,
    mut w: impl Write,
    run_id: Option<&str>,
) -> Result<()> {
    if let Some(id) = run_id {
        writeln!(w, "# run {id}")?;
    }
    writeln!(w, "t,hrc_true")?;
    for &t in grid.points() {
        writeln!(w, "{},{}", fmt(t), fmt(crate::simulate::true_hrc(spec, t)?))?;
    }
    Ok(())
}
