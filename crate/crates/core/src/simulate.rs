//! Synthetic survival scenarios with frailty-correlated potential outcomes
//! and closed-form true causal hazard ratios.
//!
//! Three generators share one skeleton: a Gamma frailty `V` with mean 1 and
//! variance `theta`, conditional hazards of the form `v exp(a0 + a1 t)`
//! inverted in closed form, shared censoring across the two counterfactual
//! worlds, and SUTVA-consistent observed columns.
//!
//! - `Ia`: conditional hazard `V exp{beta a + theta e^{beta a} t}`; the
//!   marginal hazard follows a proportional-hazards model and the true
//!   `HR^C(t)` declines over time.
//! - `Ib`: conditional hazard `V exp{1.5 t + beta a}`; the marginal model is
//!   not proportional while `HR^C(t) = exp(beta)` for all `t`.
//! - `II`: conditional hazard `V gamma exp{beta a + beta_z Z}` with a
//!   confounder `Z ~ N(0,1)` driving treatment assignment and
//!   administrative censoring at `t = 10`; `HR^C(t) = exp(beta)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma};

use crate::frailty::{tau_to_theta, FrailtyFamily};
use crate::survival::{SubjectRecord, SurvivalSample};
use crate::{Error, Result};

/// Censoring mechanism.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Censoring {
    /// Exponential censoring with the rate calibrated to this fraction of
    /// censored subjects.
    RateTargeted(f64),
    /// Fixed administrative censoring at this time.
    Administrative(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Ia,
    Ib,
    II,
}

impl Scenario {
    pub fn label(&self) -> &'static str {
        match self {
            Scenario::Ia => "ia",
            Scenario::Ib => "ib",
            Scenario::II => "ii",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ia" => Ok(Scenario::Ia),
            "ib" => Ok(Scenario::Ib),
            "ii" => Ok(Scenario::II),
            other => Err(Error::InvalidInput(format!(
                "unknown scenario '{other}' (expected ia, ib, or ii)"
            ))),
        }
    }
}

/// Full description of one data-generating mechanism.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    /// Kendall's tau between the potential event times.
    pub tau: f64,
    pub n: usize,
    pub censoring: Censoring,
    /// Treatment log hazard ratio in the conditional model.
    pub beta: f64,
    /// Confounder coefficient (scenario II only).
    pub beta_z: f64,
    /// Target fraction of observed events (scenario II only).
    pub event_rate_target: f64,
}

impl ScenarioSpec {
    pub fn ia(tau: f64, n: usize, censoring_fraction: f64) -> Self {
        Self {
            scenario: Scenario::Ia,
            tau,
            n,
            censoring: Censoring::RateTargeted(censoring_fraction),
            beta: 0.5f64.ln(),
            beta_z: 0.0,
            event_rate_target: 0.0,
        }
    }

    pub fn ib(tau: f64, n: usize, censoring_fraction: f64) -> Self {
        Self {
            scenario: Scenario::Ib,
            tau,
            n,
            censoring: Censoring::RateTargeted(censoring_fraction),
            beta: 0.5f64.ln(),
            beta_z: 0.0,
            event_rate_target: 0.0,
        }
    }

    pub fn ii(tau: f64, n: usize, beta_z: f64, event_rate_target: f64) -> Self {
        Self {
            scenario: Scenario::II,
            tau,
            n,
            censoring: Censoring::Administrative(10.0),
            beta: 0.5f64.ln(),
            beta_z,
            event_rate_target,
        }
    }

    pub fn theta(&self) -> Result<f64> {
        Ok(tau_to_theta(FrailtyFamily::Gamma, self.tau)?.theta)
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidInput("scenario needs n >= 2".to_string()));
        }
        if let Censoring::RateTargeted(f) = self.censoring {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::InvalidInput(format!(
                    "censoring fraction must lie in [0, 1), got {f}"
                )));
            }
        }
        if self.scenario == Scenario::II && !(self.event_rate_target > 0.0 && self.event_rate_target < 1.0)
        {
            return Err(Error::InvalidInput(format!(
                "event rate target must lie in (0, 1), got {}",
                self.event_rate_target
            )));
        }
        Ok(())
    }
}

/// Per-subject latent columns kept for oracle tests.
#[derive(Debug, Clone)]
pub struct HiddenColumns {
    pub v: Vec<f64>,
    pub t0: Vec<f64>,
    pub t1: Vec<f64>,
    pub c: Vec<f64>,
}

/// A generated sample plus its latent columns.
#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    pub sample: SurvivalSample,
    pub hidden: HiddenColumns,
}

/// A scenario with its calibrated nuisance constants resolved, so repeated
/// generation does not repeat the calibration searches.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub spec: ScenarioSpec,
    pub theta: f64,
    /// Exponential censoring rate (rate-targeted censoring only).
    pub censoring_rate: Option<f64>,
    /// Baseline hazard scale `gamma` (scenario II only).
    pub event_scale: Option<f64>,
}

/// Intercept/slope of the conditional log hazard `a0 + a1 t` for one arm.
fn hazard_coefficients(spec: &ScenarioSpec, theta: f64, arm: u8, z: f64, gamma: f64) -> (f64, f64) {
    let a = arm as f64;
    match spec.scenario {
        Scenario::Ia => (spec.beta * a, theta * (spec.beta * a).exp()),
        Scenario::Ib => (spec.beta * a, 1.5),
        Scenario::II => (gamma.ln() + spec.beta * a + spec.beta_z * z, 0.0),
    }
}

/// Invert the conditional cumulative hazard of `v exp(a0 + a1 t)` at an
/// Exp(1) draw.
fn invert_event_time(v: f64, a0: f64, a1: f64, e: f64) -> f64 {
    let base = v * a0.exp();
    if a1 == 0.0 {
        e / base
    } else {
        (1.0 + a1 * e / base).ln() / a1
    }
}

fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn standard_normal(rng: &mut ChaCha12Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// One subject's latent draw: frailty, confounder, treatment, both
/// potential times, and the standard-exponential censoring seed.
struct LatentDraw {
    v: f64,
    z: f64,
    a: u8,
    t0: f64,
    t1: f64,
    /// Exp(1) variate turned into a censoring time by dividing by the rate.
    ce: f64,
}

fn draw_latent(spec: &ScenarioSpec, theta: f64, gamma: f64, rng: &mut ChaCha12Rng) -> LatentDraw {
    let frailty = Gamma::new(1.0 / theta, theta).expect("valid gamma parameters");
    let v = frailty.sample(rng);
    let z = if spec.scenario == Scenario::II {
        standard_normal(rng)
    } else {
        0.0
    };
    let p_treat = if spec.scenario == Scenario::II {
        expit(0.5f64.ln() * z)
    } else {
        0.5
    };
    let a = u8::from(rng.gen::<f64>() < p_treat);
    let mut times = [0.0f64; 2];
    for arm in [0u8, 1u8] {
        let (a0, a1) = hazard_coefficients(spec, theta, arm, z, gamma);
        let e = -rng.gen::<f64>().max(1e-300).ln();
        times[arm as usize] = invert_event_time(v, a0, a1, e);
    }
    let ce = -rng.gen::<f64>().max(1e-300).ln();
    LatentDraw {
        v,
        z,
        a,
        t0: times[0],
        t1: times[1],
        ce,
    }
}

// ── Calibration ─────────────────────────────────────────────────────────────

const PILOT_N: usize = 100_000;
const PILOT_SEED: u64 = 0x5eed_ca11_b4a7_e001;
const CALIBRATION_TOL: f64 = 0.005;

/// Result of a rate calibration.
#[derive(Debug, Clone, Copy)]
pub struct CalibratedRate {
    pub rate: f64,
    /// Set when the search stopped at a bracket edge instead of the target.
    pub at_bracket_edge: bool,
}

/// Exponential censoring rate yielding the target censoring fraction,
/// found by bisection of the Monte-Carlo censoring fraction on a frozen
/// pilot sample of 1e5 subjects (tolerance 0.5 percentage points).
pub fn calibrate_censoring_rate(spec: &ScenarioSpec) -> Result<CalibratedRate> {
    spec.validate()?;
    let target = match spec.censoring {
        Censoring::RateTargeted(f) => f,
        Censoring::Administrative(_) => {
            return Err(Error::InvalidInput(
                "censoring is administrative; no rate to calibrate".to_string(),
            ))
        }
    };
    let theta = spec.theta()?;
    let gamma = match spec.scenario {
        Scenario::II => calibrate_event_scale(spec)?,
        _ => 1.0,
    };
    let mut rng = ChaCha12Rng::seed_from_u64(PILOT_SEED);
    // censored  <=>  C < T  <=>  ce / rate < T  <=>  rate > ce / T
    let thresholds: Vec<f64> = (0..PILOT_N)
        .map(|_| {
            let d = draw_latent(spec, theta, gamma, &mut rng);
            let t = if d.a == 1 { d.t1 } else { d.t0 };
            d.ce / t
        })
        .collect();
    let fraction = |rate: f64| {
        thresholds.iter().filter(|&&r| r < rate).count() as f64 / PILOT_N as f64
    };
    let (mut lo, mut hi) = (1e-12, 1e12);
    if target <= fraction(lo) {
        return Ok(CalibratedRate {
            rate: lo,
            at_bracket_edge: true,
        });
    }
    if target >= fraction(hi) {
        return Ok(CalibratedRate {
            rate: hi,
            at_bracket_edge: true,
        });
    }
    for _ in 0..200 {
        let mid = ((lo.ln() + hi.ln()) / 2.0).exp();
        let f = fraction(mid);
        if (f - target).abs() <= CALIBRATION_TOL {
            return Ok(CalibratedRate {
                rate: mid,
                at_bracket_edge: false,
            });
        }
        if f < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NonConvergence(format!(
        "censoring calibration did not reach target {target} (bracket [{lo}, {hi}])"
    )))
}

/// Baseline scale `gamma` for scenario II yielding the target event
/// fraction under administrative censoring, by the same frozen-pilot
/// bisection as the censoring calibration.
pub fn calibrate_event_scale(spec: &ScenarioSpec) -> Result<f64> {
    spec.validate()?;
    if spec.scenario != Scenario::II {
        return Err(Error::InvalidInput(
            "event-scale calibration applies to scenario II only".to_string(),
        ));
    }
    let admin_time = match spec.censoring {
        Censoring::Administrative(t) => t,
        Censoring::RateTargeted(_) => {
            return Err(Error::InvalidInput(
                "scenario II uses administrative censoring".to_string(),
            ))
        }
    };
    let theta = spec.theta()?;
    let mut rng = ChaCha12Rng::seed_from_u64(PILOT_SEED ^ 0xf00d);
    // event  <=>  T <= admin  with T = e / (v gamma exp(beta a + beta_z z)),
    // so      gamma >= e / (admin v exp(...))
    let thresholds: Vec<f64> = (0..PILOT_N)
        .map(|_| {
            let d = draw_with_unit_gamma(spec, theta, &mut rng);
            d.0 / (admin_time * d.1)
        })
        .collect();
    let fraction = |gamma: f64| {
        thresholds.iter().filter(|&&g| g <= gamma).count() as f64 / PILOT_N as f64
    };
    let target = spec.event_rate_target;
    let (mut lo, mut hi) = (1e-12, 1e12);
    if target <= fraction(lo) || target >= fraction(hi) {
        return Err(Error::Estimation(format!(
            "event-rate target {target} unreachable within the gamma bracket"
        )));
    }
    for _ in 0..200 {
        let mid = ((lo.ln() + hi.ln()) / 2.0).exp();
        let f = fraction(mid);
        if (f - target).abs() <= CALIBRATION_TOL {
            return Ok(mid);
        }
        if f < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NonConvergence(format!(
        "event-scale calibration did not reach target {target}"
    )))
}

/// (Exp(1) draw, v * exp(beta a + beta_z z)) for the actually assigned arm.
fn draw_with_unit_gamma(spec: &ScenarioSpec, theta: f64, rng: &mut ChaCha12Rng) -> (f64, f64) {
    let frailty = Gamma::new(1.0 / theta, theta).expect("valid gamma parameters");
    let v: f64 = frailty.sample(rng);
    let z = standard_normal(rng);
    let a = u8::from(rng.gen::<f64>() < expit(0.5f64.ln() * z));
    let e0 = -rng.gen::<f64>().max(1e-300).ln();
    let e1 = -rng.gen::<f64>().max(1e-300).ln();
    let e = if a == 1 { e1 } else { e0 };
    (e, v * (spec.beta * a as f64 + spec.beta_z * z).exp())
}

/// Calibrate every scenario constant once.
pub fn resolve(spec: &ScenarioSpec) -> Result<ResolvedScenario> {
    spec.validate()?;
    let theta = spec.theta()?;
    let event_scale = match spec.scenario {
        Scenario::II => Some(calibrate_event_scale(spec)?),
        _ => None,
    };
    let censoring_rate = match spec.censoring {
        Censoring::RateTargeted(_) => Some(calibrate_censoring_rate(spec)?.rate),
        Censoring::Administrative(_) => None,
    };
    Ok(ResolvedScenario {
        spec: spec.clone(),
        theta,
        censoring_rate,
        event_scale,
    })
}

/// Generate a dataset from a resolved scenario.
pub fn generate_resolved(resolved: &ResolvedScenario, seed: u64) -> Result<SimulatedDataset> {
    let spec = &resolved.spec;
    let gamma = resolved.event_scale.unwrap_or(1.0);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n = spec.n;
    let mut records = Vec::with_capacity(n);
    let mut hidden = HiddenColumns {
        v: Vec::with_capacity(n),
        t0: Vec::with_capacity(n),
        t1: Vec::with_capacity(n),
        c: Vec::with_capacity(n),
    };
    for i in 0..n {
        let d = draw_latent(spec, resolved.theta, gamma, &mut rng);
        let c = match spec.censoring {
            Censoring::RateTargeted(_) => d.ce / resolved.censoring_rate.expect("resolved rate"),
            Censoring::Administrative(t) => t,
        };
        let t_assigned = if d.a == 1 { d.t1 } else { d.t0 };
        let x = t_assigned.min(c);
        let event = t_assigned <= c;
        let covariates = if spec.scenario == Scenario::II {
            vec![d.z]
        } else {
            vec![]
        };
        records.push(SubjectRecord::new(
            (i + 1).to_string(),
            x,
            event,
            d.a,
            covariates,
        ));
        hidden.v.push(d.v);
        hidden.t0.push(d.t0);
        hidden.t1.push(d.t1);
        hidden.c.push(c);
    }
    Ok(SimulatedDataset {
        sample: SurvivalSample::new(records)?,
        hidden,
    })
}

/// Calibrate and generate in one call.
pub fn generate(spec: &ScenarioSpec, seed: u64) -> Result<SimulatedDataset> {
    generate_resolved(&resolve(spec)?, seed)
}

/// Closed-form true causal hazard ratio of a scenario at time `t`.
pub fn true_hrc(spec: &ScenarioSpec, t: f64) -> Result<f64> {
    let theta = spec.theta()?;
    Ok(match spec.scenario {
        Scenario::Ia => (spec.beta + theta * t * (spec.beta.exp() - 1.0)).exp(),
        Scenario::Ib | Scenario::II => spec.beta.exp(),
    })
}
