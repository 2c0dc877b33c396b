//! Propensity-score estimation, inverse-probability-of-treatment weights
//! with optional stabilization and percentile truncation, and standardized
//! mean difference balance diagnostics.

use crate::numeric::{quantile, solve_linear};
use crate::survival::SurvivalSample;
use crate::{Error, Result};

const IRLS_MAX_ITER: usize = 100;
const IRLS_SCORE_TOL: f64 = 1e-9;
const SEPARATION_BOUND: f64 = 30.0;

/// A fitted logistic propensity model: intercept plus one slope per
/// covariate.
#[derive(Debug, Clone)]
pub struct PropensityModel {
    pub coefficients: Vec<f64>,
    /// Model-based standard errors from the inverse Fisher information.
    pub coefficient_se: Vec<f64>,
    /// Fitted treatment probabilities, aligned with the sample.
    pub fitted: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Maximum-likelihood logistic regression of treatment on the covariates by
/// iteratively reweighted least squares.
///
/// With no covariates the intercept-only solution is closed form: every
/// fitted probability is the empirical treated fraction.
pub fn fit_logistic(sample: &SurvivalSample) -> Result<PropensityModel> {
    let n = sample.len();
    let n1 = sample.arm_size(1);
    if n1 == 0 || n1 == n {
        return Err(Error::InvalidInput(
            "both treatment values must be present".to_string(),
        ));
    }
    let k = sample.n_covariates();
    if k == 0 {
        let p_hat = n1 as f64 / n as f64;
        return Ok(PropensityModel {
            coefficients: vec![(p_hat / (1.0 - p_hat)).ln()],
            coefficient_se: vec![(1.0 / (n as f64 * p_hat * (1.0 - p_hat))).sqrt()],
            fitted: vec![p_hat; n],
            converged: true,
            iterations: 0,
        });
    }

    let p = k + 1;
    let row = |i: usize, j: usize| -> f64 {
        if j == 0 {
            1.0
        } else {
            sample.records()[i].covariates[j - 1]
        }
    };
    let y: Vec<f64> = sample
        .records()
        .iter()
        .map(|r| r.treatment as f64)
        .collect();

    let mut beta = vec![0.0; p];
    let mut iterations = 0;
    let mut converged = false;
    for iter in 1..=IRLS_MAX_ITER {
        iterations = iter;
        let mu: Vec<f64> = (0..n)
            .map(|i| expit((0..p).map(|j| beta[j] * row(i, j)).sum()))
            .collect();
        let mut score = vec![0.0; p];
        let mut info = vec![0.0; p * p];
        for i in 0..n {
            let r = y[i] - mu[i];
            let w = mu[i] * (1.0 - mu[i]);
            for j in 0..p {
                score[j] += row(i, j) * r;
                for l in 0..p {
                    info[j * p + l] += row(i, j) * row(i, l) * w;
                }
            }
        }
        if score.iter().all(|s| s.abs() < IRLS_SCORE_TOL) {
            converged = true;
            iterations = iter - 1;
            break;
        }
        let step = solve_linear(&info, &score, p).map_err(|_| {
            Error::Estimation("singular design in the propensity model".to_string())
        })?;
        for j in 0..p {
            beta[j] += step[j];
        }
        if beta.iter().any(|b| b.abs() > SEPARATION_BOUND) {
            return Err(Error::Estimation("propensity separation".to_string()));
        }
    }
    if !converged {
        return Err(Error::NonConvergence(format!(
            "logistic IRLS did not converge in {IRLS_MAX_ITER} iterations"
        )));
    }

    let fitted: Vec<f64> = (0..n)
        .map(|i| expit((0..p).map(|j| beta[j] * row(i, j)).sum()))
        .collect();
    // standard errors from the inverse information at the optimum
    let mut info = vec![0.0; p * p];
    for i in 0..n {
        let w = fitted[i] * (1.0 - fitted[i]);
        for j in 0..p {
            for l in 0..p {
                info[j * p + l] += row(i, j) * row(i, l) * w;
            }
        }
    }
    let cov = crate::numeric::invert(&info, p)
        .map_err(|_| Error::Estimation("singular information in the propensity model".to_string()))?;
    let coefficient_se = (0..p).map(|j| cov[j * p + j].sqrt()).collect();
    Ok(PropensityModel {
        coefficients: beta,
        coefficient_se,
        fitted,
        converged,
        iterations,
    })
}

/// Per-subject IPTW weights.
#[derive(Debug, Clone)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub stabilized: bool,
    pub truncation_percentile: Option<f64>,
}

/// Inverse-probability weights from a fitted propensity model.
///
/// Unstabilized: `A / pi + (1 - A) / (1 - pi)`. Stabilized weights multiply
/// each arm by its empirical treatment share, which shrinks the mean weight
/// to one.
pub fn compute_weights(
    model: &PropensityModel,
    sample: &SurvivalSample,
    stabilized: bool,
) -> Result<WeightVector> {
    if !model.converged {
        return Err(Error::InvalidInput(
            "propensity model did not converge".to_string(),
        ));
    }
    if model.fitted.len() != sample.len() {
        return Err(Error::InvalidInput(
            "propensity model fitted on a different sample size".to_string(),
        ));
    }
    let n = sample.len();
    let p1 = sample.arm_size(1) as f64 / n as f64;
    let mut weights = Vec::with_capacity(n);
    for (r, &pi) in sample.records().iter().zip(&model.fitted) {
        if pi <= 0.0 || pi >= 1.0 {
            return Err(Error::Estimation(format!(
                "fitted propensity for id {} is numerically {} ",
                r.id,
                if pi <= 0.0 { 0 } else { 1 }
            )));
        }
        let w = if r.treatment == 1 {
            if stabilized {
                p1 / pi
            } else {
                1.0 / pi
            }
        } else if stabilized {
            (1.0 - p1) / (1.0 - pi)
        } else {
            1.0 / (1.0 - pi)
        };
        weights.push(w);
    }
    Ok(WeightVector {
        weights,
        stabilized,
        truncation_percentile: None,
    })
}

/// Cap weights at a pooled empirical percentile (linear-interpolation
/// quantile); weights at or below the threshold are untouched.
pub fn truncate_weights(wv: &WeightVector, percentile: f64) -> Result<WeightVector> {
    if !(percentile > 0.0 && percentile <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "truncation percentile must lie in (0, 1], got {percentile}"
        )));
    }
    let cap = quantile(&wv.weights, percentile);
    Ok(WeightVector {
        weights: wv.weights.iter().map(|&w| w.min(cap)).collect(),
        stabilized: wv.stabilized,
        truncation_percentile: Some(percentile),
    })
}

/// One covariate's standardized mean difference, weighted and unweighted.
#[derive(Debug, Clone)]
pub struct BalanceRow {
    pub covariate: String,
    pub smd_unweighted: f64,
    pub smd_weighted: f64,
    /// Set when a pooled standard deviation was zero and the SMD was
    /// reported as zero.
    pub degenerate: bool,
}

fn weighted_smd(
    xs: &[(f64, u8)], // (covariate value, arm)
    weights: &[f64],
) -> (f64, bool) {
    let mut stats = [(0.0f64, 0.0f64); 2]; // (sum w, sum w x)
    for ((x, arm), w) in xs.iter().zip(weights) {
        stats[*arm as usize].0 += w;
        stats[*arm as usize].1 += w * x;
    }
    let mean = [stats[0].1 / stats[0].0, stats[1].1 / stats[1].0];
    // scale-invariant weighted variance (reduces to the n-1 form at unit weights)
    let mut var = [0.0f64; 2];
    for arm in 0..2 {
        let mut sq = 0.0;
        let mut sw = 0.0;
        let mut sw2 = 0.0;
        for ((x, a), w) in xs.iter().zip(weights) {
            if *a as usize == arm {
                let d = x - mean[arm];
                sq += w * d * d;
                sw += w;
                sw2 += w * w;
            }
        }
        let denom = sw - sw2 / sw;
        var[arm] = if denom > 0.0 { sq / denom } else { 0.0 };
    }
    let pooled = (0.5 * (var[0] + var[1])).sqrt();
    if pooled > 0.0 {
        ((mean[1] - mean[0]) / pooled, false)
    } else {
        (0.0, true)
    }
}

/// Standardized mean differences for every covariate: `(mean1 - mean0)`
/// over the pooled standard deviation, with and without the given weights.
pub fn balance_diagnostics(
    sample: &SurvivalSample,
    weights: Option<&WeightVector>,
) -> Result<Vec<BalanceRow>> {
    let k = sample.n_covariates();
    if k == 0 {
        return Err(Error::InvalidInput(
            "balance diagnostics need at least one covariate".to_string(),
        ));
    }
    if sample.arm_size(0) == 0 || sample.arm_size(1) == 0 {
        return Err(Error::InvalidInput("empty treatment arm".to_string()));
    }
    if let Some(wv) = weights {
        if wv.weights.len() != sample.len() {
            return Err(Error::InvalidInput(
                "weights length does not match sample".to_string(),
            ));
        }
    }
    let ones = vec![1.0; sample.len()];
    let mut rows = Vec::with_capacity(k);
    for c in 0..k {
        let xs: Vec<(f64, u8)> = sample
            .records()
            .iter()
            .map(|r| (r.covariates[c], r.treatment))
            .collect();
        let (unw, deg_u) = weighted_smd(&xs, &ones);
        let (w, deg_w) = match weights {
            Some(wv) => weighted_smd(&xs, &wv.weights),
            None => (unw, deg_u),
        };
        rows.push(BalanceRow {
            covariate: format!("z{}", c + 1),
            smd_unweighted: unw,
            smd_weighted: w,
            degenerate: deg_u || deg_w,
        });
    }
    Ok(rows)
}
