//! Nonparametric bootstrap standard errors and percentile confidence
//! intervals for sensitivity curves.
//!
//! Whole subject rows are resampled with replacement and everything
//! downstream of the raw data is re-estimated inside each replicate:
//! propensity weights, bandwidth selection (unless disabled), and the Cox
//! fit. Each replicate draws from its own ChaCha substream keyed by
//! `(seed, replicate index)`, so results do not depend on the parallel
//! schedule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::kernel::BandwidthPlan;
use crate::numeric::{quantile_sorted, sample_sd};
use crate::sensitivity::{
    curves_from_prepared, prepare_arms, resolve_grid, Method, PointFlag, SensitivityCurve,
    SensitivityRequest,
};
use crate::survival::{SurvivalSample, TimeGrid};
use crate::{Error, Result};

/// Bootstrap settings.
#[derive(Debug, Clone, Copy)]
pub struct BootstrapConfig {
    pub replications: usize,
    pub seed: u64,
    pub confidence_level: f64,
    /// Re-select kernel bandwidths inside each replicate (honest variance
    /// propagation); disable to reuse the full-sample plans for speed.
    pub reselect_bandwidths: bool,
}

impl BootstrapConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            replications: 500,
            seed,
            confidence_level: 0.95,
            reselect_bandwidths: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(Error::InvalidInput(
                "bootstrap needs at least 2 replications".to_string(),
            ));
        }
        if !(self.confidence_level > 0.0 && self.confidence_level < 1.0) {
            return Err(Error::InvalidInput(format!(
                "confidence level must lie in (0, 1), got {}",
                self.confidence_level
            )));
        }
        Ok(())
    }
}

/// Fraction of failed replicates at a point above which its interval is
/// flagged.
const CI_FAILURE_FRACTION: f64 = 0.1;

fn resample(sample: &SurvivalSample, rng: &mut ChaCha12Rng) -> Result<SurvivalSample> {
    let n = sample.len();
    let records = (0..n)
        .map(|_| sample.records()[rng.gen_range(0..n)].clone())
        .collect();
    SurvivalSample::new(records)
}

/// Bootstrap a request on a fixed grid; point estimates come from the full
/// sample, standard errors and percentile intervals from the replicates.
pub fn bootstrap_curves_on_grid(
    sample: &SurvivalSample,
    req: &SensitivityRequest,
    grid: &TimeGrid,
    cfg: &BootstrapConfig,
) -> Result<Vec<SensitivityCurve>> {
    cfg.validate()?;
    req.validate()?;
    let prepared = prepare_arms(sample, req, grid, None)?;
    let mut curves = curves_from_prepared(&prepared, req)?;

    let fixed_plans: Option<[BandwidthPlan; 2]> =
        if req.method == Method::Kernel && !cfg.reselect_bandwidths {
            prepared
                .smoothed
                .as_ref()
                .map(|sm| [sm[0].plan.clone(), sm[1].plan.clone()])
        } else {
            None
        };

    let replicate_curves: Vec<Option<Vec<SensitivityCurve>>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
            rng.set_stream(1 + rep as u64);
            let resampled = match resample(sample, &mut rng) {
                Ok(s) => s,
                Err(_) => return None,
            };
            let prepared = prepare_arms(&resampled, req, grid, fixed_plans.as_ref()).ok()?;
            curves_from_prepared(&prepared, req).ok()
        })
        .collect();

    let n_failed_replicates = replicate_curves.iter().filter(|c| c.is_none()).count();
    if n_failed_replicates == cfg.replications {
        return Err(Error::Estimation(
            "all bootstrap replicates failed".to_string(),
        ));
    }

    let alpha = 1.0 - cfg.confidence_level;
    for (ci_idx, curve) in curves.iter_mut().enumerate() {
        for (pt_idx, point) in curve.points.iter_mut().enumerate() {
            let mut draws: Vec<f64> = Vec::with_capacity(cfg.replications);
            for rep in replicate_curves.iter().flatten() {
                let p = &rep[ci_idx].points[pt_idx];
                if p.flag == PointFlag::Ok {
                    if let Some(e) = p.estimate {
                        draws.push(e);
                    }
                }
            }
            let failures = cfg.replications - draws.len();
            point.ci_flagged = (failures as f64) > CI_FAILURE_FRACTION * cfg.replications as f64;
            if draws.len() >= 2 {
                point.se = Some(sample_sd(&draws));
                draws.sort_by(f64::total_cmp);
                point.ci = Some((
                    quantile_sorted(&draws, alpha / 2.0),
                    quantile_sorted(&draws, 1.0 - alpha / 2.0),
                ));
            }
        }
    }
    Ok(curves)
}

/// Bootstrap a request, resolving the grid from the full sample.
pub fn bootstrap_curves(
    sample: &SurvivalSample,
    req: &SensitivityRequest,
    cfg: &BootstrapConfig,
) -> Result<Vec<SensitivityCurve>> {
    let grid = resolve_grid(sample, req)?;
    bootstrap_curves_on_grid(sample, req, &grid, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frailty::FrailtyFamily;
    use crate::sensitivity::{GridRule, Weighting};
    use crate::simulate::{generate, ScenarioSpec};

    fn small_request() -> SensitivityRequest {
        SensitivityRequest {
            method: Method::Cox,
            families: vec![FrailtyFamily::Gamma],
            taus: vec![0.5],
            grid: GridRule::FromData {
                n_points: 11,
                min_at_risk: 10,
            },
            weighting: Weighting::None,
        }
    }

    #[test]
    fn two_replicates_se_is_half_gap_times_sqrt2() {
        let ds = generate(&ScenarioSpec::ia(0.5, 300, 0.2), 1).unwrap();
        let cfg = BootstrapConfig {
            replications: 2,
            seed: 42,
            confidence_level: 0.95,
            reselect_bandwidths: true,
        };
        let curves = bootstrap_curves(&ds.sample, &small_request(), &cfg).unwrap();
        // reproduce the two replicate estimates by hand
        let grid = resolve_grid(&ds.sample, &small_request()).unwrap();
        let mut reps = Vec::new();
        for rep in 0..2u64 {
            let mut rng = ChaCha12Rng::seed_from_u64(42);
            rng.set_stream(1 + rep);
            let resampled = resample(&ds.sample, &mut rng).unwrap();
            let prepared = prepare_arms(&resampled, &small_request(), &grid, None).unwrap();
            reps.push(curves_from_prepared(&prepared, &small_request()).unwrap());
        }
        for (i, point) in curves[0].points.iter().enumerate() {
            let a = reps[0][0].points[i].estimate.unwrap();
            let b = reps[1][0].points[i].estimate.unwrap();
            let expect = (a - b).abs() / std::f64::consts::SQRT_2;
            assert!(
                (point.se.unwrap() - expect).abs() < 1e-12,
                "point {i}: {} vs {expect}",
                point.se.unwrap()
            );
        }
    }

    #[test]
    fn same_seed_is_reproducible() {
        let ds = generate(&ScenarioSpec::ia(0.5, 250, 0.2), 2).unwrap();
        let cfg = BootstrapConfig {
            replications: 20,
            seed: 7,
            confidence_level: 0.9,
            reselect_bandwidths: true,
        };
        let a = bootstrap_curves(&ds.sample, &small_request(), &cfg).unwrap();
        let b = bootstrap_curves(&ds.sample, &small_request(), &cfg).unwrap();
        for (ca, cb) in a.iter().zip(&b) {
            for (pa, pb) in ca.points.iter().zip(&cb.points) {
                assert_eq!(pa.estimate, pb.estimate);
                assert_eq!(pa.se, pb.se);
                assert_eq!(pa.ci, pb.ci);
            }
        }
    }

    #[test]
    fn interval_brackets_replicate_median() {
        let ds = generate(&ScenarioSpec::ia(0.5, 400, 0.2), 3).unwrap();
        let cfg = BootstrapConfig {
            replications: 40,
            seed: 11,
            confidence_level: 0.95,
            reselect_bandwidths: true,
        };
        let req = small_request();
        let curves = bootstrap_curves(&ds.sample, &req, &cfg).unwrap();
        // recompute the replicate estimates to locate their median
        let grid = resolve_grid(&ds.sample, &req).unwrap();
        let mut draws: Vec<Vec<f64>> = vec![Vec::new(); grid.len()];
        for rep in 0..cfg.replications {
            let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
            rng.set_stream(1 + rep as u64);
            let resampled = resample(&ds.sample, &mut rng).unwrap();
            let prepared = prepare_arms(&resampled, &req, &grid, None).unwrap();
            let cs = curves_from_prepared(&prepared, &req).unwrap();
            for (i, p) in cs[0].points.iter().enumerate() {
                if p.flag == PointFlag::Ok {
                    draws[i].push(p.estimate.unwrap());
                }
            }
        }
        for (i, p) in curves[0].points.iter().enumerate() {
            let (lo, hi) = p.ci.unwrap();
            let median = crate::numeric::quantile(&draws[i], 0.5);
            assert!(lo <= median && median <= hi, "point {i}: [{lo}, {hi}] vs {median}");
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let ds = generate(&ScenarioSpec::ia(0.5, 100, 0.2), 4).unwrap();
        let mut cfg = BootstrapConfig::new(1);
        cfg.replications = 1;
        assert!(bootstrap_curves(&ds.sample, &small_request(), &cfg).is_err());
        let mut cfg = BootstrapConfig::new(1);
        cfg.confidence_level = 1.0;
        assert!(bootstrap_curves(&ds.sample, &small_request(), &cfg).is_err());
    }
}
