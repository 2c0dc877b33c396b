//! Cox proportional-hazards fitting (optionally weighted), the Breslow
//! baseline cumulative hazard, the Schoenfeld-residual score test of the PH
//! assumption, and the Cox-based causal hazard ratio curve.
//!
//! Ties are pooled Breslow-style throughout, matching the counting-process
//! increments in [`crate::survival`].

use crate::frailty::{theta_to_tau, FrailtyFamily, FrailtySpec};
use crate::numeric::{invert, solve_linear};
use crate::sensitivity::{CurvePoint, Method, PointFlag, SensitivityCurve};
use crate::survival::{chi_squared_upper_tail, kaplan_meier, StepFunction, SurvivalSample, TimeGrid};
use crate::{Error, Result};

/// Which columns form the regression design.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CovariateSpec {
    pub include_treatment: bool,
    /// Indices into each record's covariate vector.
    pub covariate_columns: Vec<usize>,
}

impl CovariateSpec {
    /// The marginal structural model: treatment indicator only.
    pub fn treatment_only() -> Self {
        Self {
            include_treatment: true,
            covariate_columns: Vec::new(),
        }
    }

    /// Treatment plus the given covariate columns.
    pub fn with_covariates(columns: Vec<usize>) -> Self {
        Self {
            include_treatment: true,
            covariate_columns: columns,
        }
    }

    pub fn dim(&self) -> usize {
        usize::from(self.include_treatment) + self.covariate_columns.len()
    }

    fn row(&self, sample: &SurvivalSample, i: usize) -> Vec<f64> {
        let r = &sample.records()[i];
        let mut x = Vec::with_capacity(self.dim());
        if self.include_treatment {
            x.push(r.treatment as f64);
        }
        for &c in &self.covariate_columns {
            x.push(r.covariates[c]);
        }
        x
    }

    fn validate(&self, sample: &SurvivalSample) -> Result<()> {
        if self.dim() == 0 {
            return Err(Error::InvalidInput(
                "Cox design has no columns".to_string(),
            ));
        }
        for &c in &self.covariate_columns {
            if c >= sample.n_covariates() {
                return Err(Error::InvalidInput(format!(
                    "covariate column {c} out of range (sample has {})",
                    sample.n_covariates()
                )));
            }
        }
        Ok(())
    }
}

/// A converged Cox fit.
#[derive(Debug, Clone)]
pub struct CoxFit {
    /// Log hazard ratios, one per design column.
    pub beta: Vec<f64>,
    /// Model-based standard errors from the inverse observed information.
    /// Bootstrap standard errors supersede these for `HR^C(t)` inference.
    pub beta_se: Vec<f64>,
    /// Breslow baseline cumulative hazard.
    pub baseline_cumhaz: StepFunction,
    /// Log partial likelihood at the optimum.
    pub loglik: f64,
    pub weighted: bool,
    pub iterations: usize,
    /// Inverse observed information (row-major), kept for the PH test.
    pub covariance: Vec<f64>,
    pub spec: CovariateSpec,
}

const MAX_ITER: usize = 50;
const SCORE_TOL: f64 = 1e-9;
const LOGLIK_REL_TOL: f64 = 1e-12;
const SEPARATION_BOUND: f64 = 50.0;

/// Ordered per-subject views plus pooled event-time blocks.
struct CoxData {
    /// Subject indices in ascending canonical time order.
    order: Vec<usize>,
    /// Design rows aligned with `order`.
    rows: Vec<Vec<f64>>,
    /// Weights aligned with `order`.
    w: Vec<f64>,
    /// Times aligned with `order`.
    times: Vec<f64>,
    /// (time, positions into `order` of the events at that time), ascending.
    event_blocks: Vec<(f64, Vec<usize>)>,
    p: usize,
}

impl CoxData {
    fn build(
        sample: &SurvivalSample,
        spec: &CovariateSpec,
        weights: Option<&[f64]>,
    ) -> Result<Self> {
        spec.validate(sample)?;
        if let Some(w) = weights {
            if w.len() != sample.len() {
                return Err(Error::InvalidInput(format!(
                    "weights length {} does not match sample size {}",
                    w.len(),
                    sample.len()
                )));
            }
            if w.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                return Err(Error::InvalidInput(
                    "weights must be positive and finite".to_string(),
                ));
            }
        }
        if sample.n_events() == 0 {
            return Err(Error::InvalidInput("no events observed".to_string()));
        }
        let order = sample.canonical_order(weights);
        let rows: Vec<Vec<f64>> = order.iter().map(|&i| spec.row(sample, i)).collect();
        let w: Vec<f64> = order
            .iter()
            .map(|&i| weights.map_or(1.0, |w| w[i]))
            .collect();
        let times: Vec<f64> = order.iter().map(|&i| sample.records()[i].time).collect();
        let mut event_blocks: Vec<(f64, Vec<usize>)> = Vec::new();
        for (pos, &i) in order.iter().enumerate() {
            if sample.records()[i].event {
                let t = sample.records()[i].time;
                match event_blocks.last_mut() {
                    Some((bt, block)) if *bt == t => block.push(pos),
                    _ => event_blocks.push((t, vec![pos])),
                }
            }
        }
        Ok(Self {
            order,
            rows,
            w,
            times,
            event_blocks,
            p: spec.dim(),
        })
    }

    /// Weighted Breslow log partial likelihood with score and information.
    ///
    /// One reverse sweep: risk-set accumulators `S0`, `S1`, `S2` grow as the
    /// event time decreases.
    fn loglik_score_info(&self, beta: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let p = self.p;
        let n = self.order.len();
        let mut ll = 0.0;
        let mut score = vec![0.0; p];
        let mut info = vec![0.0; p * p];
        let mut s0 = 0.0;
        let mut s1 = vec![0.0; p];
        let mut s2 = vec![0.0; p * p];
        let mut right = n;
        for (t, block) in self.event_blocks.iter().rev() {
            while right > 0 && self.times[right - 1] >= *t {
                right -= 1;
                let x = &self.rows[right];
                let eta: f64 = x.iter().zip(beta).map(|(xi, bi)| xi * bi).sum();
                let r = self.w[right] * eta.exp();
                s0 += r;
                for j in 0..p {
                    s1[j] += x[j] * r;
                    for k in 0..p {
                        s2[j * p + k] += x[j] * x[k] * r;
                    }
                }
            }
            let mut dw = 0.0;
            for &pos in block {
                let x = &self.rows[pos];
                let wi = self.w[pos];
                dw += wi;
                let eta: f64 = x.iter().zip(beta).map(|(xi, bi)| xi * bi).sum();
                ll += wi * eta;
                for j in 0..p {
                    score[j] += wi * x[j];
                }
            }
            ll -= dw * s0.ln();
            for j in 0..p {
                score[j] -= dw * s1[j] / s0;
                for k in 0..p {
                    info[j * p + k] += dw * (s2[j * p + k] / s0 - s1[j] * s1[k] / (s0 * s0));
                }
            }
        }
        (ll, score, info)
    }
}

/// Fit a (weighted) Cox model by Newton-Raphson on the Breslow partial
/// likelihood, starting from zero coefficients.
///
/// Convergence: maximum absolute score component below 1e-9, or relative
/// log-likelihood change below 1e-12, within 50 iterations. Monotone
/// likelihoods are reported as separation once a coefficient passes 50 in
/// magnitude.
pub fn fit_cox(
    sample: &SurvivalSample,
    spec: &CovariateSpec,
    weights: Option<&[f64]>,
) -> Result<CoxFit> {
    let data = CoxData::build(sample, spec, weights)?;
    let p = data.p;
    let mut beta = vec![0.0; p];
    let (mut ll, mut score, mut info) = data.loglik_score_info(&beta);
    let mut trace = vec![format!("iter 0: loglik {ll:.6}")];
    let mut iterations = 0;
    let mut converged = false;
    let mut last_rel_change = f64::INFINITY;
    for iter in 1..=MAX_ITER {
        let step = solve_linear(&info, &score, p).map_err(|_| {
            Error::Estimation(
                "singular information matrix; design may be rank deficient on the event set"
                    .to_string(),
            )
        })?;
        // converged once a stopping criterion fires AND the Newton step has
        // shrunk; a monotone likelihood meets the score criterion while the
        // parameter is still drifting, so it keeps iterating toward the
        // separation bound instead
        let max_score = score.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        let max_step = step.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        if max_step < 1e-6 && (max_score < SCORE_TOL || last_rel_change < LOGLIK_REL_TOL) {
            converged = true;
            break;
        }
        // step-halving keeps the likelihood non-decreasing
        let mut scale = 1.0;
        let (candidate, new_ll, new_score, new_info) = loop {
            let candidate: Vec<f64> = beta
                .iter()
                .zip(&step)
                .map(|(b, s)| b + scale * s)
                .collect();
            let (new_ll, new_score, new_info) = data.loglik_score_info(&candidate);
            if new_ll + 1e-12 >= ll || scale < 1e-4 {
                break (candidate, new_ll, new_score, new_info);
            }
            scale *= 0.5;
        };
        last_rel_change = (new_ll - ll).abs() / (1.0 + ll.abs());
        beta = candidate;
        ll = new_ll;
        score = new_score;
        info = new_info;
        iterations = iter;
        trace.push(format!(
            "iter {iter}: loglik {ll:.6}, max|score| {:.3e}",
            score.iter().fold(0.0f64, |m, s| m.max(s.abs()))
        ));
        if beta.iter().any(|b| b.abs() > SEPARATION_BOUND) {
            return Err(Error::Estimation(format!(
                "separation detected: |beta| exceeded {SEPARATION_BOUND} at iteration {iter}"
            )));
        }
    }
    if !converged {
        let max_score = score.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        return Err(Error::NonConvergence(format!(
            "Cox fit did not converge in {MAX_ITER} iterations (max|score| {max_score:.3e}); trace:\n{}",
            trace.join("\n")
        )));
    }
    let covariance = invert(&info, p).map_err(|_| {
        Error::Estimation("singular information matrix at the optimum".to_string())
    })?;
    let beta_se: Vec<f64> = (0..p).map(|j| covariance[j * p + j].sqrt()).collect();
    if beta_se.iter().any(|s| !s.is_finite() || *s <= 0.0) {
        return Err(Error::Estimation(
            "non-positive variance estimate at the optimum".to_string(),
        ));
    }
    let baseline_cumhaz = breslow_from_parts(&data, &beta)?;
    Ok(CoxFit {
        beta,
        beta_se,
        baseline_cumhaz,
        loglik: ll,
        weighted: weights.is_some(),
        iterations,
        covariance,
        spec: spec.clone(),
    })
}

fn breslow_from_parts(data: &CoxData, beta: &[f64]) -> Result<StepFunction> {
    let n = data.order.len();
    let mut s0 = 0.0;
    let mut right = n;
    let mut jumps: Vec<(f64, f64)> = Vec::with_capacity(data.event_blocks.len());
    for (t, block) in data.event_blocks.iter().rev() {
        while right > 0 && data.times[right - 1] >= *t {
            right -= 1;
            let eta: f64 = data.rows[right]
                .iter()
                .zip(beta)
                .map(|(xi, bi)| xi * bi)
                .sum();
            s0 += data.w[right] * eta.exp();
        }
        let dw: f64 = block.iter().map(|&pos| data.w[pos]).sum();
        jumps.push((*t, dw / s0));
    }
    jumps.reverse();
    StepFunction::from_jumps(jumps)
}

/// Breslow baseline cumulative hazard at the fitted coefficients: the
/// increment at each event time is the weighted event count over the
/// risk-set sum of `w exp(beta' x)`.
pub fn breslow_baseline(
    fit: &CoxFit,
    sample: &SurvivalSample,
    weights: Option<&[f64]>,
) -> Result<StepFunction> {
    let data = CoxData::build(sample, &fit.spec, weights)?;
    breslow_from_parts(&data, &fit.beta)
}

// ── PH score test ───────────────────────────────────────────────────────────

/// Time transform for the PH score test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeTransform {
    Identity,
    /// `1 - KM(t)` on the pooled sample; robust to the censoring pattern.
    #[default]
    KmRank,
}

/// Result of the proportional-hazards score test.
#[derive(Debug, Clone)]
pub struct PhTestResult {
    /// Global chi-squared statistic on `p` degrees of freedom.
    pub statistic: f64,
    pub p_value: f64,
    /// Per-covariate (statistic, p-value) pairs on one degree of freedom.
    pub per_covariate: Vec<(f64, f64)>,
}

/// Score test of slope zero in scaled Schoenfeld residuals regressed on
/// transformed time.
///
/// With weights, residuals and the transform mean are weight-scaled so the
/// unweighted case reduces exactly to the classical statistic.
pub fn ph_score_test(
    fit: &CoxFit,
    sample: &SurvivalSample,
    weights: Option<&[f64]>,
    transform: TimeTransform,
) -> Result<PhTestResult> {
    let data = CoxData::build(sample, &fit.spec, weights)?;
    let p = data.p;
    let d: usize = data.event_blocks.iter().map(|(_, b)| b.len()).sum();
    if d < 2 {
        return Err(Error::InvalidInput(
            "insufficient events for the PH test (need at least 2)".to_string(),
        ));
    }

    // Schoenfeld residuals w_i (x_i - xbar(t)) per event, reverse sweep.
    let n = data.order.len();
    let mut s0 = 0.0;
    let mut s1 = vec![0.0; p];
    let mut right = n;
    // rows: (event time, weight, residual vector)
    let mut residuals: Vec<(f64, f64, Vec<f64>)> = Vec::with_capacity(d);
    for (t, block) in data.event_blocks.iter().rev() {
        while right > 0 && data.times[right - 1] >= *t {
            right -= 1;
            let x = &data.rows[right];
            let eta: f64 = x.iter().zip(&fit.beta).map(|(xi, bi)| xi * bi).sum();
            let r = data.w[right] * eta.exp();
            s0 += r;
            for j in 0..p {
                s1[j] += x[j] * r;
            }
        }
        for &pos in block {
            let x = &data.rows[pos];
            let wi = data.w[pos];
            let res: Vec<f64> = (0..p).map(|j| wi * (x[j] - s1[j] / s0)).collect();
            residuals.push((*t, wi, res));
        }
    }
    residuals.reverse();

    // transformed times
    let g: Vec<f64> = match transform {
        TimeTransform::Identity => residuals.iter().map(|(t, _, _)| *t).collect(),
        TimeTransform::KmRank => {
            let km = pooled_km(sample, weights)?;
            residuals
                .iter()
                .map(|(t, _, _)| 1.0 - km.survival(*t))
                .collect()
        }
    };
    let w_total: f64 = residuals.iter().map(|(_, w, _)| w).sum();
    let g_mean = residuals
        .iter()
        .zip(&g)
        .map(|((_, w, _), gi)| w * gi)
        .sum::<f64>()
        / w_total;

    let mut u = vec![0.0; p];
    let mut gss = 0.0;
    for ((_, w, res), gi) in residuals.iter().zip(&g) {
        let x = gi - g_mean;
        gss += w * x * x;
        for j in 0..p {
            u[j] += x * res[j];
        }
    }
    if gss <= 0.0 {
        return Err(Error::Estimation(
            "degenerate time transform: all events share one transformed time".to_string(),
        ));
    }

    // global statistic: (W / sum w (g - gbar)^2) u' Vhat u
    let vu: Vec<f64> = (0..p)
        .map(|j| (0..p).map(|k| fit.covariance[j * p + k] * u[k]).sum())
        .collect();
    let quad: f64 = u.iter().zip(&vu).map(|(a, b)| a * b).sum();
    let statistic = w_total * quad / gss;
    if !statistic.is_finite() || statistic < 0.0 {
        return Err(Error::Estimation(
            "singular residual covariance in the PH test".to_string(),
        ));
    }
    let per_covariate: Vec<(f64, f64)> = (0..p)
        .map(|j| {
            let z = w_total * vu[j] * vu[j] / (fit.covariance[j * p + j] * gss);
            (z, chi_squared_upper_tail(z, 1.0))
        })
        .collect();
    Ok(PhTestResult {
        statistic,
        p_value: chi_squared_upper_tail(statistic, p as f64),
        per_covariate,
    })
}

/// Pooled Kaplan-Meier over both arms, used by the KM-rank transform.
fn pooled_km(sample: &SurvivalSample, weights: Option<&[f64]>) -> Result<StepFunction> {
    let pooled = SurvivalSample::new(
        sample
            .records()
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.treatment = 0;
                r
            })
            .collect(),
    )?;
    kaplan_meier(&pooled, 0, weights)
}

// ── Cox-based HR^C(t) ───────────────────────────────────────────────────────

/// Cox-based causal hazard ratio curve on a grid.
///
/// Gamma uses the closed form
/// `exp(beta) exp{theta Lambda0(t) [exp(beta) - 1]}`; the other families go
/// through the identification multiplier with hazard ratio `exp(beta)` and
/// cumulative hazards `Lambda0 exp(beta)` and `Lambda0`. Requires the
/// treatment-only marginal model.
pub fn cox_hrc(fit: &CoxFit, spec: &FrailtySpec, grid: &TimeGrid) -> Result<SensitivityCurve> {
    hrc_curve(fit, spec, grid, false)
}

/// Same curve as [`cox_hrc`] but always routed through the generic
/// multiplier, including for Gamma. Kept separate so the closed form has an
/// independent evaluation path.
pub fn cox_hrc_generic(
    fit: &CoxFit,
    spec: &FrailtySpec,
    grid: &TimeGrid,
) -> Result<SensitivityCurve> {
    hrc_curve(fit, spec, grid, true)
}

fn hrc_curve(
    fit: &CoxFit,
    spec: &FrailtySpec,
    grid: &TimeGrid,
    force_generic: bool,
) -> Result<SensitivityCurve> {
    if fit.spec != CovariateSpec::treatment_only() {
        return Err(Error::InvalidInput(
            "Cox-based HR^C requires the treatment-only marginal model".to_string(),
        ));
    }
    let beta = fit.beta[0];
    let hr = beta.exp();
    let mut points = Vec::with_capacity(grid.len());
    for &t in grid.points() {
        let l0 = fit.baseline_cumhaz.value(t);
        let estimate = if spec.family == FrailtyFamily::Gamma && !force_generic {
            Some(beta.exp() * (spec.theta * l0 * (beta.exp() - 1.0)).exp())
        } else {
            match spec.varphi(l0 * hr, l0) {
                Ok(phi) => Some(hr * phi),
                Err(_) => None,
            }
        };
        match estimate {
            Some(e) if e > 0.0 && e.is_finite() => {
                points.push(CurvePoint::new(t, Some(e), PointFlag::Ok));
            }
            _ => points.push(CurvePoint::new(t, None, PointFlag::Unavailable)),
        }
    }
    Ok(SensitivityCurve {
        family: spec.family,
        tau: theta_to_tau(spec)?,
        theta: spec.theta,
        method: Method::Cox,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::SubjectRecord;

    fn rec(id: &str, time: f64, event: bool, arm: u8, z: Vec<f64>) -> SubjectRecord {
        SubjectRecord::new(id, time, event, arm, z)
    }

    /// Deterministic 20-subject dataset with overlap between arms.
    fn toy_sample() -> SurvivalSample {
        let times = [
            1.3, 2.1, 2.1, 3.0, 3.7, 4.2, 5.0, 5.8, 6.6, 7.1, 0.9, 1.8, 2.6, 3.3, 4.8, 5.5, 6.1,
            7.7, 8.4, 9.2,
        ];
        let events = [
            true, true, false, true, true, false, true, true, true, false, true, true, true,
            false, true, true, false, true, true, true,
        ];
        let arms = [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1];
        let recs = (0..20)
            .map(|i| rec(&format!("s{i}"), times[i], events[i], arms[i], vec![]))
            .collect();
        SurvivalSample::new(recs).unwrap()
    }

    fn breslow_loglik(sample: &SurvivalSample, beta: f64) -> f64 {
        // independent textbook evaluation over event times
        let mut ll = 0.0;
        for r in sample.records().iter().filter(|r| r.event) {
            let risk: f64 = sample
                .records()
                .iter()
                .filter(|s| s.time >= r.time)
                .map(|s| (beta * s.treatment as f64).exp())
                .sum();
            ll += beta * r.treatment as f64 - risk.ln();
        }
        ll
    }

    #[test]
    fn fit_matches_grid_search_oracle() {
        let sample = toy_sample();
        let fit = fit_cox(&sample, &CovariateSpec::treatment_only(), None).unwrap();
        // brute-force maximization over a fine beta grid
        let mut best = (f64::NEG_INFINITY, 0.0);
        let mut b = -3.0;
        while b <= 3.0 {
            let ll = breslow_loglik(&sample, b);
            if ll > best.0 {
                best = (ll, b);
            }
            b += 2e-5;
        }
        assert!(
            (fit.beta[0] - best.1).abs() < 1e-4,
            "newton {} vs grid {}",
            fit.beta[0],
            best.1
        );
        assert!((fit.loglik - best.0).abs() < 1e-6);
    }

    #[test]
    fn score_vanishes_and_local_max_probe() {
        let sample = toy_sample();
        let fit = fit_cox(&sample, &CovariateSpec::treatment_only(), None).unwrap();
        let ll_hat = breslow_loglik(&sample, fit.beta[0]);
        assert!(ll_hat >= breslow_loglik(&sample, 0.0));
        assert!(ll_hat >= breslow_loglik(&sample, fit.beta[0] + 0.1));
        assert!(ll_hat >= breslow_loglik(&sample, fit.beta[0] - 0.1));
        // central-difference gradient is ~zero at the optimum
        let h = 1e-5;
        let grad =
            (breslow_loglik(&sample, fit.beta[0] + h) - breslow_loglik(&sample, fit.beta[0] - h))
                / (2.0 * h);
        assert!(grad.abs() < 1e-4, "gradient {grad}");
    }

    #[test]
    fn symmetric_arms_give_zero_beta() {
        let mut recs = Vec::new();
        for i in 0..8 {
            let t = 1.0 + i as f64;
            let ev = i % 3 != 2;
            recs.push(rec(&format!("a{i}"), t, ev, 0, vec![]));
            recs.push(rec(&format!("b{i}"), t, ev, 1, vec![]));
        }
        let sample = SurvivalSample::new(recs).unwrap();
        let fit = fit_cox(&sample, &CovariateSpec::treatment_only(), None).unwrap();
        assert_eq!(fit.beta[0], 0.0);
    }

    #[test]
    fn unit_weights_match_unweighted() {
        let sample = toy_sample();
        let plain = fit_cox(&sample, &CovariateSpec::treatment_only(), None).unwrap();
        let ones = vec![1.0; sample.len()];
        let weighted = fit_cox(&sample, &CovariateSpec::treatment_only(), Some(&ones)).unwrap();
        assert_eq!(plain.beta[0], weighted.beta[0]);
        assert_eq!(plain.baseline_cumhaz, weighted.baseline_cumhaz);
    }

    #[test]
    fn separation_is_detected() {
        // perfectly ordered arms: monotone likelihood
        let mut recs = Vec::new();
        for i in 0..6 {
            recs.push(rec(&format!("a{i}"), 1.0 + i as f64, true, 0, vec![]));
            recs.push(rec(&format!("b{i}"), 10.0 + i as f64, true, 1, vec![]));
        }
        let sample = SurvivalSample::new(recs).unwrap();
        let err = fit_cox(&sample, &CovariateSpec::treatment_only(), None).unwrap_err();
        assert!(err.to_string().contains("separation"), "{err}");
    }

    // ── Breslow baseline ────────────────────────────────────────────────

    #[test]
    fn baseline_at_zero_beta_equals_pooled_nelson_aalen() {
        let mut recs = Vec::new();
        for i in 0..8 {
            let t = 1.0 + i as f64;
            let ev = i % 4 != 3;
            recs.push(rec(&format!("a{i}"), t, ev, 0, vec![]));
            recs.push(rec(&format!("b{i}"), t, ev, 1, vec![]));
        }
        let sample = SurvivalSample::new(recs).unwrap();
        let fit = fit_cox(&sample, &CovariateSpec::treatment_only(), None).unwrap();
        assert_eq!(fit.beta[0], 0.0);
        let pooled = SurvivalSample::new(
            sample
                .records()
                .iter()
                .map(|r| {
                    let mut r = r.clone();
                    r.treatment = 0;
                    r
                })
                .collect(),
        )
        .unwrap();
        let na = crate::survival::nelson_aalen(&pooled, 0, None).unwrap();
        assert_eq!(fit.baseline_cumhaz, na);
    }

    #[test]
    fn baseline_matches_hand_enumeration() {
        // three subjects, one covariate-free arm structure with known sums
        let sample = SurvivalSample::new(vec![
            rec("a", 1.0, true, 1, vec![]),
            rec("b", 2.0, true, 0, vec![]),
            rec("c", 3.0, false, 1, vec![]),
        ])
        .unwrap();
        let fit = fit_cox(&sample, &CovariateSpec::treatment_only(), None).unwrap();
        let b = fit.beta[0];
        let e = b.exp();
        // at t=1: risk {a,b,c}: e^b + 1 + e^b ; at t=2: {b,c}: 1 + e^b
        let expect1 = 1.0 / (2.0 * e + 1.0);
        let expect2 = expect1 + 1.0 / (1.0 + e);
        assert!((fit.baseline_cumhaz.value(1.0) - expect1).abs() < 1e-12);
        assert!((fit.baseline_cumhaz.value(2.5) - expect2).abs() < 1e-12);
    }

    #[test]
    fn baseline_invariant_to_weight_scaling() {
        let sample = toy_sample();
        let w1: Vec<f64> = (0..sample.len()).map(|i| 1.0 + (i % 5) as f64 * 0.25).collect();
        let w2: Vec<f64> = w1.iter().map(|w| w * 2.0).collect();
        let f1 = fit_cox(&sample, &CovariateSpec::treatment_only(), Some(&w1)).unwrap();
        let b2 = breslow_baseline(&f1, &sample, Some(&w2)).unwrap();
        let b1 = &f1.baseline_cumhaz;
        for (x, y) in b1.increments().iter().zip(b2.increments()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    // ── PH test ─────────────────────────────────────────────────────────

    #[test]
    fn ph_test_insufficient_events_errors() {
        let fit = fit_cox(&toy_sample(), &CovariateSpec::treatment_only(), None).unwrap();
        // two subjects, one event: below the minimum for the score test
        let tiny = SurvivalSample::new(vec![
            rec("a", 1.0, true, 0, vec![]),
            rec("b", 2.0, false, 1, vec![]),
        ])
        .unwrap();
        let err = ph_score_test(&fit, &tiny, None, TimeTransform::KmRank).unwrap_err();
        assert!(err.to_string().contains("insufficient events"), "{err}");
    }

    #[test]
    fn ph_test_runs_on_toy_data() {
        let sample = toy_sample();
        let fit = fit_cox(&sample, &CovariateSpec::treatment_only(), None).unwrap();
        for tr in [TimeTransform::Identity, TimeTransform::KmRank] {
            let res = ph_score_test(&fit, &sample, None, tr).unwrap();
            assert!(res.statistic >= 0.0);
            assert!((0.0..=1.0).contains(&res.p_value));
            assert_eq!(res.per_covariate.len(), 1);
        }
    }

    // ── HR^C curve ──────────────────────────────────────────────────────

    #[test]
    fn hrc_zero_theta_limit_equals_plain_hr() {
        let sample = toy_sample();
        let fit = fit_cox(&sample, &CovariateSpec::treatment_only(), None).unwrap();
        let grid = TimeGrid::new(1.0, 7.0, 13).unwrap();
        let spec = FrailtySpec::new(FrailtyFamily::Gamma, 1e-12).unwrap();
        let curve = cox_hrc(&fit, &spec, &grid).unwrap();
        let hr = fit.beta[0].exp();
        for p in &curve.points {
            assert!((p.estimate.unwrap() - hr).abs() < 1e-9);
        }
    }

    #[test]
    fn hrc_gamma_closed_form_declines_with_linear_baseline() {
        // synthetic fit with beta = log 0.5 and Lambda0(t) = t
        let sample = toy_sample();
        let mut fit = fit_cox(&sample, &CovariateSpec::treatment_only(), None).unwrap();
        fit.beta = vec![0.5f64.ln()];
        fit.baseline_cumhaz = StepFunction::from_jumps(
            (1..=1000).map(|i| (i as f64 * 1e-2, 1e-2)).collect(),
        )
        .unwrap();
        let spec = crate::frailty::tau_to_theta(FrailtyFamily::Gamma, 0.7).unwrap();
        let grid = TimeGrid::new(0.5, 2.0, 4).unwrap();
        let curve = cox_hrc(&fit, &spec, &grid).unwrap();
        let mut prev = f64::INFINITY;
        for p in &curve.points {
            let t = fit.baseline_cumhaz.value(p.t);
            let expect = (0.5f64.ln() + spec.theta * t * (0.5 - 1.0)).exp();
            let got = p.estimate.unwrap();
            assert!((got - expect).abs() < 1e-12);
            assert!(got < prev);
            prev = got;
        }
    }

    #[test]
    fn hrc_zero_beta_is_unit_curve() {
        let mut recs = Vec::new();
        for i in 0..8 {
            let t = 1.0 + i as f64;
            recs.push(rec(&format!("a{i}"), t, true, 0, vec![]));
            recs.push(rec(&format!("b{i}"), t, true, 1, vec![]));
        }
        let sample = SurvivalSample::new(recs).unwrap();
        let fit = fit_cox(&sample, &CovariateSpec::treatment_only(), None).unwrap();
        let grid = TimeGrid::new(1.0, 8.0, 8).unwrap();
        for family in [
            FrailtyFamily::Gamma,
            FrailtyFamily::InverseGaussian,
            FrailtyFamily::PositiveStable,
        ] {
            let spec = crate::frailty::tau_to_theta(family, 0.3).unwrap();
            let curve = cox_hrc(&fit, &spec, &grid).unwrap();
            for p in &curve.points {
                assert!((p.estimate.unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hrc_ps_unavailable_before_first_event() {
        let sample = toy_sample();
        let fit = fit_cox(&sample, &CovariateSpec::treatment_only(), None).unwrap();
        let spec = FrailtySpec::new(FrailtyFamily::PositiveStable, 0.5).unwrap();
        let grid = TimeGrid::new(0.1, 5.0, 8).unwrap();
        let curve = cox_hrc(&fit, &spec, &grid).unwrap();
        // grid points before the first event time have Lambda0 = 0
        assert_eq!(curve.points[0].flag, PointFlag::Unavailable);
        assert!(curve.points.last().unwrap().estimate.is_some());
    }

    #[test]
    fn hrc_requires_marginal_model() {
        let mut recs = Vec::new();
        for i in 0..12 {
            let z = (i % 4) as f64;
            recs.push(rec(
                &format!("s{i}"),
                1.0 + i as f64 + 0.3 * z,
                i % 3 != 2,
                (i % 2) as u8,
                vec![z],
            ));
        }
        let sample = SurvivalSample::new(recs).unwrap();
        let fit = fit_cox(&sample, &CovariateSpec::with_covariates(vec![0]), None).unwrap();
        let spec = FrailtySpec::new(FrailtyFamily::Gamma, 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 5.0, 3).unwrap();
        assert!(cox_hrc(&fit, &spec, &grid).is_err());
    }
}
