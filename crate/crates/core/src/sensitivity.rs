//! Assembly of causal hazard ratio curves: a request sweeps frailty
//! families and Kendall's tau values through either estimation backend
//! (Cox-based or kernel-based), with optional IPTW adjustment.

use crate::cox::{self, CovariateSpec};
use crate::frailty::{tau_to_theta, theta_to_tau, FrailtyFamily, FrailtySpec};
use crate::kernel::{self, ArmEvents, BandwidthPlan, KernelSpec, SmoothedHazard};
use crate::survival::{build_time_grid, nelson_aalen, GridOptions, StepFunction, SurvivalSample, TimeGrid};
use crate::weights::{compute_weights, fit_logistic, truncate_weights};
use crate::{Error, Result};

/// Estimation backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Cox,
    Kernel,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Cox => "cox",
            Method::Kernel => "kernel",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cox" => Ok(Method::Cox),
            "kernel" => Ok(Method::Kernel),
            other => Err(Error::InvalidInput(format!(
                "unknown method '{other}' (expected cox or kernel)"
            ))),
        }
    }
}

/// Whether and how to reweight the sample before estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weighting {
    None,
    Iptw {
        stabilized: bool,
        /// Pooled truncation percentile in (0, 1], e.g. 0.99.
        truncation: Option<f64>,
    },
}

/// How the estimation grid is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridRule {
    /// First pooled event time up to the latest time with `min_at_risk`
    /// subjects at risk in both arms.
    FromData { n_points: usize, min_at_risk: usize },
    /// Fixed user-supplied bounds.
    Fixed { t_min: f64, t_max: f64, n_points: usize },
}

impl GridRule {
    fn to_options(self) -> GridOptions {
        match self {
            GridRule::FromData {
                n_points,
                min_at_risk,
            } => GridOptions {
                n_points,
                min_at_risk,
                fixed_bounds: None,
            },
            GridRule::Fixed {
                t_min,
                t_max,
                n_points,
            } => GridOptions {
                n_points,
                min_at_risk: 0,
                fixed_bounds: Some((t_min, t_max)),
            },
        }
    }
}

/// A full sensitivity-analysis request.
#[derive(Debug, Clone)]
pub struct SensitivityRequest {
    pub method: Method,
    pub families: Vec<FrailtyFamily>,
    pub taus: Vec<f64>,
    pub grid: GridRule,
    pub weighting: Weighting,
}

impl SensitivityRequest {
    /// Check list shapes and that every tau is representable by every
    /// requested family.
    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() || self.taus.is_empty() {
            return Err(Error::InvalidInput(
                "request needs at least one family and one tau".to_string(),
            ));
        }
        for &family in &self.families {
            let (lo, hi) = family.tau_range();
            for &tau in &self.taus {
                if !(tau > lo && tau < hi) {
                    return Err(Error::InvalidInput(format!(
                        "tau {} outside the valid range ({}, {}) for the {} family",
                        tau,
                        lo,
                        hi,
                        family.label()
                    )));
                }
            }
        }
        if let Weighting::Iptw {
            truncation: Some(p),
            ..
        } = self.weighting
        {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidInput(format!(
                    "truncation percentile must lie in (0, 1], got {p}"
                )));
            }
        }
        Ok(())
    }
}

/// Reliability flag of one curve point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointFlag {
    Ok,
    /// Denominator is positive but negligibly small relative to the curve.
    Unstable,
    /// The estimate is undefined at this point (e.g. zero denominator).
    Unavailable,
}

impl PointFlag {
    pub fn label(&self) -> &'static str {
        match self {
            PointFlag::Ok => "ok",
            PointFlag::Unstable => "unstable",
            PointFlag::Unavailable => "unavailable",
        }
    }
}

/// One grid point of a sensitivity curve.
#[derive(Debug, Clone)]
pub struct CurvePoint {
    pub t: f64,
    /// `None` when the point is unavailable.
    pub estimate: Option<f64>,
    pub flag: PointFlag,
    /// Bootstrap standard error, once filled.
    pub se: Option<f64>,
    /// Percentile confidence interval, once filled.
    pub ci: Option<(f64, f64)>,
    /// Set when too many bootstrap replicates failed at this point.
    pub ci_flagged: bool,
}

impl CurvePoint {
    pub(crate) fn new(t: f64, estimate: Option<f64>, flag: PointFlag) -> Self {
        Self {
            t,
            estimate,
            flag,
            se: None,
            ci: None,
            ci_flagged: false,
        }
    }
}

/// `HR^C(t)` estimates for one (family, tau) pair.
#[derive(Debug, Clone)]
pub struct SensitivityCurve {
    pub family: FrailtyFamily,
    pub tau: f64,
    pub theta: f64,
    pub method: Method,
    pub points: Vec<CurvePoint>,
}

// ── Kernel-backend curve ────────────────────────────────────────────────────

/// Relative threshold below which a positive denominator hazard is flagged.
const UNSTABLE_REL_THRESHOLD: f64 = 1e-8;

/// Plug-in curve from two smoothed hazards and the pre-smoothed cumulative
/// hazards of the same arms.
///
/// At each grid point the estimate is
/// `(lambda1 / lambda0) * varphi(Lambda1(t), Lambda0(t), theta)` where the
/// cumulative hazards are the Nelson-Aalen step functions evaluated at the
/// grid point, not integrals of the smoothed hazards. Points where the
/// denominator hazard vanishes are `unavailable`; points where either
/// hazard is negligibly small relative to its curve maximum are `unstable`.
pub fn kernel_hrc(
    sh1: &SmoothedHazard,
    sh0: &SmoothedHazard,
    na1: &StepFunction,
    na0: &StepFunction,
    spec: &FrailtySpec,
) -> Result<SensitivityCurve> {
    if sh1.grid != sh0.grid {
        return Err(Error::InvalidInput(
            "smoothed hazards live on different grids".to_string(),
        ));
    }
    let max0 = sh0.values.iter().cloned().fold(0.0, f64::max);
    let max1 = sh1.values.iter().cloned().fold(0.0, f64::max);
    let mut points = Vec::with_capacity(sh1.grid.len());
    for (i, &t) in sh1.grid.points().iter().enumerate() {
        let l1 = sh1.values[i];
        let l0 = sh0.values[i];
        if l0 == 0.0 {
            points.push(CurvePoint::new(t, None, PointFlag::Unavailable));
            continue;
        }
        let cum1 = na1.value(t);
        let cum0 = na0.value(t);
        let estimate = match spec.varphi(cum1, cum0) {
            Ok(phi) => (l1 / l0) * phi,
            // PS multiplier undefined before the first event
            Err(_) => {
                points.push(CurvePoint::new(t, None, PointFlag::Unavailable));
                continue;
            }
        };
        let flag = if l0 < UNSTABLE_REL_THRESHOLD * max0
            || (max1 > 0.0 && l1 < UNSTABLE_REL_THRESHOLD * max1)
            || estimate <= 0.0
        {
            PointFlag::Unstable
        } else {
            PointFlag::Ok
        };
        points.push(CurvePoint::new(t, Some(estimate), flag));
    }
    Ok(SensitivityCurve {
        family: spec.family,
        tau: theta_to_tau(spec)?,
        theta: spec.theta,
        method: Method::Kernel,
        points,
    })
}

// ── Full pipeline ───────────────────────────────────────────────────────────

/// Per-arm inputs resolved once per sample and reused across curves.
pub struct PreparedArms {
    pub weights: Option<Vec<f64>>,
    pub grid: TimeGrid,
    /// Nelson-Aalen cumulative hazard per arm, indexed by arm.
    pub na: [StepFunction; 2],
    /// Kernel-smoothed hazards per arm (kernel backend only).
    pub smoothed: Option<[SmoothedHazard; 2]>,
    /// Fitted Cox curve inputs (cox backend only).
    pub cox_fit: Option<cox::CoxFit>,
}

/// Resolve the estimation grid for a request without running estimation.
pub fn resolve_grid(sample: &SurvivalSample, req: &SensitivityRequest) -> Result<TimeGrid> {
    build_time_grid(sample, &req.grid.to_options())
}

/// Resolve IPTW weights for a request, if any.
pub fn resolve_weights(sample: &SurvivalSample, req: &SensitivityRequest) -> Result<Option<Vec<f64>>> {
    match req.weighting {
        Weighting::None => Ok(None),
        Weighting::Iptw {
            stabilized,
            truncation,
        } => {
            let model = fit_logistic(sample)?;
            let mut wv = compute_weights(&model, sample, stabilized)?;
            if let Some(p) = truncation {
                wv = truncate_weights(&wv, p)?;
            }
            Ok(Some(wv.weights))
        }
    }
}

/// Run the estimation pipeline once (weights, per-arm hazards, backend fit)
/// on a fixed grid, optionally reusing previously selected bandwidth plans.
pub fn prepare_arms(
    sample: &SurvivalSample,
    req: &SensitivityRequest,
    grid: &TimeGrid,
    fixed_plans: Option<&[BandwidthPlan; 2]>,
) -> Result<PreparedArms> {
    req.validate()?;
    let weights = resolve_weights(sample, req)?;
    let wref = weights.as_deref();
    let na = [
        nelson_aalen(sample, 0, wref)?,
        nelson_aalen(sample, 1, wref)?,
    ];
    let mut smoothed = None;
    let mut cox_fit = None;
    match req.method {
        Method::Kernel => {
            let kspec = KernelSpec::new(grid.min(), grid.max())?;
            let mut per_arm = Vec::with_capacity(2);
            for arm in [0u8, 1u8] {
                let events = ArmEvents::collect(sample, arm, wref);
                let plan = match fixed_plans {
                    Some(plans) => plans[arm as usize].clone(),
                    None => {
                        let candidates = kernel::default_candidates(&kspec);
                        kernel::select_bandwidths(
                            &na[arm as usize],
                            &kspec,
                            grid,
                            &candidates,
                            &events,
                        )?
                    }
                };
                per_arm.push(kernel::smooth_hazard(
                    &na[arm as usize],
                    &kspec,
                    &plan,
                    events.len(),
                )?);
            }
            let a1 = per_arm.pop().unwrap();
            let a0 = per_arm.pop().unwrap();
            smoothed = Some([a0, a1]);
        }
        Method::Cox => {
            cox_fit = Some(cox::fit_cox(
                sample,
                &CovariateSpec::treatment_only(),
                wref,
            )?);
        }
    }
    Ok(PreparedArms {
        weights,
        grid: grid.clone(),
        na,
        smoothed,
        cox_fit,
    })
}

/// Curves for every (family, tau) pair of a request given prepared inputs.
pub fn curves_from_prepared(
    prepared: &PreparedArms,
    req: &SensitivityRequest,
) -> Result<Vec<SensitivityCurve>> {
    let mut curves = Vec::with_capacity(req.families.len() * req.taus.len());
    for &family in &req.families {
        for &tau in &req.taus {
            let spec = tau_to_theta(family, tau)?;
            let mut curve = match req.method {
                Method::Cox => {
                    let fit = prepared.cox_fit.as_ref().expect("cox backend prepared");
                    cox::cox_hrc(fit, &spec, &prepared.grid)?
                }
                Method::Kernel => {
                    let sm = prepared.smoothed.as_ref().expect("kernel backend prepared");
                    kernel_hrc(&sm[1], &sm[0], &prepared.na[1], &prepared.na[0], &spec)?
                }
            };
            curve.tau = tau;
            curves.push(curve);
        }
    }
    Ok(curves)
}

/// The full sensitivity pipeline: optional weights, per-arm Nelson-Aalen,
/// backend estimation, one curve per (family, tau) in request order.
pub fn run_sensitivity(
    sample: &SurvivalSample,
    req: &SensitivityRequest,
) -> Result<Vec<SensitivityCurve>> {
    req.validate()?;
    let grid = resolve_grid(sample, req)?;
    let prepared = prepare_arms(sample, req, &grid, None)?;
    curves_from_prepared(&prepared, req)
}
