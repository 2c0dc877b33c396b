//! Replication harness over the synthetic scenarios: generates datasets on
//! independent seed substreams, runs the sensitivity pipeline on a grid
//! frozen from the first dataset, and summarizes bias, spread, standard
//! error calibration, and interval coverage per grid point.

use rayon::prelude::*;

use crate::bootstrap::{bootstrap_curves_on_grid, BootstrapConfig};
use crate::cox::{fit_cox, CovariateSpec};
use crate::frailty::FrailtyFamily;
use crate::numeric::{derive_seed, mean, sample_sd};
use crate::sensitivity::{
    curves_from_prepared, prepare_arms, resolve_grid, Method, PointFlag, SensitivityCurve,
    SensitivityRequest,
};
use crate::simulate::{generate_resolved, resolve, true_hrc, Scenario, ScenarioSpec};
use crate::survival::TimeGrid;
use crate::{Error, Result};

const TAG_SIM: u64 = 1;
const TAG_BOOT: u64 = 2;

/// Bootstrap settings inside a study; the per-replication seed is derived
/// from the study seed.
#[derive(Debug, Clone, Copy)]
pub struct StudyBootstrap {
    pub replications: usize,
    pub confidence_level: f64,
    pub reselect_bandwidths: bool,
}

/// One simulation study: scenario, estimation request, replication count.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub scenario: ScenarioSpec,
    pub request: SensitivityRequest,
    pub replications: usize,
    pub bootstrap: Option<StudyBootstrap>,
    /// Also fit the conditional Cox model with the confounder as covariate
    /// (scenario II comparator).
    pub naive_conditional_cox: bool,
    pub seed: u64,
}

/// Per-grid-point replication summary for one (family, tau, method).
#[derive(Debug, Clone)]
pub struct StudyRow {
    pub family: FrailtyFamily,
    pub tau: f64,
    pub method: Method,
    pub t: f64,
    pub true_hrc: f64,
    /// Replicates whose point estimate was usable.
    pub n_ok: usize,
    pub mean_est: Option<f64>,
    pub bias: Option<f64>,
    pub rel_bias: Option<f64>,
    pub emp_sd: Option<f64>,
    /// Mean bootstrap standard error across replicates.
    pub mean_se: Option<f64>,
    /// mean_se / emp_sd.
    pub se_ratio: Option<f64>,
    /// Fraction of replicate intervals covering the truth.
    pub coverage: Option<f64>,
}

/// Summary of the conditional Cox comparator.
#[derive(Debug, Clone)]
pub struct NaiveCoxSummary {
    pub mean_hr: f64,
    pub rel_bias: f64,
    pub n_fits: usize,
}

#[derive(Debug, Clone)]
pub struct StudySummary {
    pub grid: TimeGrid,
    pub rows: Vec<StudyRow>,
    pub naive_cox: Option<NaiveCoxSummary>,
}

struct ReplicateOutput {
    curves: Vec<SensitivityCurve>,
    naive_hr: Option<f64>,
}

/// Run a study. The grid is resolved once from the first generated dataset
/// and reused everywhere, so curves are comparable across replications.
pub fn run_study(cfg: &StudyConfig) -> Result<StudySummary> {
    if cfg.replications == 0 {
        return Err(Error::InvalidInput(
            "study needs at least one replication".to_string(),
        ));
    }
    cfg.request.validate()?;
    let resolved = resolve(&cfg.scenario)?;
    let first = generate_resolved(&resolved, derive_seed(cfg.seed, TAG_SIM, 0))?;
    let grid = resolve_grid(&first.sample, &cfg.request)?;

    let outputs: Vec<Result<ReplicateOutput>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let ds = generate_resolved(&resolved, derive_seed(cfg.seed, TAG_SIM, rep as u64))?;
            let curves = match cfg.bootstrap {
                Some(bs) => bootstrap_curves_on_grid(
                    &ds.sample,
                    &cfg.request,
                    &grid,
                    &BootstrapConfig {
                        replications: bs.replications,
                        seed: derive_seed(cfg.seed, TAG_BOOT, rep as u64),
                        confidence_level: bs.confidence_level,
                        reselect_bandwidths: bs.reselect_bandwidths,
                    },
                )?,
                None => {
                    let prepared = prepare_arms(&ds.sample, &cfg.request, &grid, None)?;
                    curves_from_prepared(&prepared, &cfg.request)?
                }
            };
            let naive_hr = if cfg.naive_conditional_cox {
                let fit = fit_cox(&ds.sample, &CovariateSpec::with_covariates(vec![0]), None)?;
                Some(fit.beta[0].exp())
            } else {
                None
            };
            Ok(ReplicateOutput { curves, naive_hr })
        })
        .collect();

    let mut ok_outputs = Vec::with_capacity(cfg.replications);
    for out in outputs {
        ok_outputs.push(out?);
    }

    let n_curves = ok_outputs[0].curves.len();
    let mut rows = Vec::with_capacity(n_curves * grid.len());
    for ci in 0..n_curves {
        let template = &ok_outputs[0].curves[ci];
        for (pi, &t) in grid.points().iter().enumerate() {
            let truth = true_hrc(&cfg.scenario, t)?;
            let mut estimates = Vec::new();
            let mut ses = Vec::new();
            let mut covered = 0usize;
            let mut with_ci = 0usize;
            for out in &ok_outputs {
                let p = &out.curves[ci].points[pi];
                if p.flag == PointFlag::Ok {
                    if let Some(e) = p.estimate {
                        estimates.push(e);
                    }
                    if let Some(se) = p.se {
                        ses.push(se);
                    }
                    if let Some((lo, hi)) = p.ci {
                        with_ci += 1;
                        if lo <= truth && truth <= hi {
                            covered += 1;
                        }
                    }
                }
            }
            let n_ok = estimates.len();
            let mean_est = (n_ok > 0).then(|| mean(&estimates));
            let bias = mean_est.map(|m| m - truth);
            let rel_bias = bias.map(|b| b / truth);
            let emp_sd = (n_ok >= 2).then(|| sample_sd(&estimates));
            let mean_se = (!ses.is_empty()).then(|| mean(&ses));
            let se_ratio = match (mean_se, emp_sd) {
                (Some(se), Some(sd)) if sd > 0.0 => Some(se / sd),
                _ => None,
            };
            let coverage = (with_ci > 0).then(|| covered as f64 / with_ci as f64);
            rows.push(StudyRow {
                family: template.family,
                tau: template.tau,
                method: template.method,
                t,
                true_hrc: truth,
                n_ok,
                mean_est,
                bias,
                rel_bias,
                emp_sd,
                mean_se,
                se_ratio,
                coverage,
            });
        }
    }

    let naive_cox = if cfg.naive_conditional_cox {
        let hrs: Vec<f64> = ok_outputs.iter().filter_map(|o| o.naive_hr).collect();
        let truth = cfg.scenario.beta.exp();
        let mean_hr = mean(&hrs);
        Some(NaiveCoxSummary {
            mean_hr,
            rel_bias: (mean_hr - truth) / truth,
            n_fits: hrs.len(),
        })
    } else {
        None
    };

    Ok(StudySummary {
        grid,
        rows,
        naive_cox,
    })
}

/// Convenience: scenario-appropriate default grid rule.
pub fn default_grid_rule(scenario: Scenario) -> crate::sensitivity::GridRule {
    match scenario {
        Scenario::Ia | Scenario::Ib => crate::sensitivity::GridRule::FromData {
            n_points: 51,
            min_at_risk: 10,
        },
        Scenario::II => crate::sensitivity::GridRule::Fixed {
            t_min: 0.0,
            t_max: 10.0,
            n_points: 51,
        },
    }
}
