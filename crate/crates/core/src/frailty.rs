//! Frailty families for the sensitivity model: Laplace transforms, the
//! multiplier `varphi` that carries the identification formula, and the
//! conversion between the frailty variance `theta` and Kendall's tau.
//!
//! All three families are parameterized by a single positive `theta`. For
//! Gamma and inverse Gaussian it is the frailty variance (mean fixed at 1).
//! The positive stable family has infinite variance; there `theta` in (0, 1)
//! is the stability exponent and the same field carries it.

use crate::numeric::{adaptive_simpson, bisect};
use crate::{Error, Result};

/// The supported frailty distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrailtyFamily {
    Gamma,
    InverseGaussian,
    PositiveStable,
}

impl FrailtyFamily {
    pub fn label(&self) -> &'static str {
        match self {
            FrailtyFamily::Gamma => "gamma",
            FrailtyFamily::InverseGaussian => "ig",
            FrailtyFamily::PositiveStable => "ps",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gamma" => Ok(FrailtyFamily::Gamma),
            "ig" | "inverse-gaussian" | "inverse_gaussian" => Ok(FrailtyFamily::InverseGaussian),
            "ps" | "positive-stable" | "positive_stable" => Ok(FrailtyFamily::PositiveStable),
            other => Err(Error::InvalidInput(format!(
                "unknown frailty family '{other}' (expected gamma, ig, or ps)"
            ))),
        }
    }

    /// Open interval of Kendall's tau values the family can represent.
    pub fn tau_range(&self) -> (f64, f64) {
        match self {
            FrailtyFamily::Gamma => (0.0, 1.0),
            FrailtyFamily::InverseGaussian => (0.0, 0.5),
            FrailtyFamily::PositiveStable => (0.0, 1.0),
        }
    }
}

/// A frailty family together with its parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrailtySpec {
    pub family: FrailtyFamily,
    pub theta: f64,
}

impl FrailtySpec {
    pub fn new(family: FrailtyFamily, theta: f64) -> Result<Self> {
        if !theta.is_finite() || theta <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "frailty theta must be positive and finite, got {theta}"
            )));
        }
        if family == FrailtyFamily::PositiveStable && theta >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "positive stable exponent must lie in (0, 1), got {theta}"
            )));
        }
        Ok(Self { family, theta })
    }

    /// Laplace transform of the frailty distribution at `u >= 0`.
    pub fn laplace(&self, u: f64) -> Result<f64> {
        if !u.is_finite() || u < 0.0 {
            return Err(Error::InvalidInput(format!(
                "laplace argument must be finite and >= 0, got {u}"
            )));
        }
        let th = self.theta;
        Ok(match self.family {
            FrailtyFamily::Gamma => (1.0 + th * u).powf(-1.0 / th),
            FrailtyFamily::InverseGaussian => ((1.0 - (1.0 + 2.0 * th * u).sqrt()) / th).exp(),
            FrailtyFamily::PositiveStable => (-u.powf(th)).exp(),
        })
    }

    /// The identification multiplier `varphi(Lambda1, Lambda0, theta)`.
    ///
    /// Gamma: `exp{theta (L1 - L0)}`; inverse Gaussian:
    /// `(1 + theta L1) / (1 + theta L0)`; positive stable:
    /// `(L1 / L0)^{1/theta - 1}` (undefined when either cumulative hazard
    /// is zero).
    pub fn varphi(&self, lambda1_cum: f64, lambda0_cum: f64) -> Result<f64> {
        for (name, l) in [("Lambda1", lambda1_cum), ("Lambda0", lambda0_cum)] {
            if !l.is_finite() || l < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite and >= 0, got {l}"
                )));
            }
        }
        let th = self.theta;
        match self.family {
            FrailtyFamily::Gamma => Ok((th * (lambda1_cum - lambda0_cum)).exp()),
            FrailtyFamily::InverseGaussian => {
                Ok((1.0 + th * lambda1_cum) / (1.0 + th * lambda0_cum))
            }
            FrailtyFamily::PositiveStable => {
                if lambda1_cum <= 0.0 || lambda0_cum <= 0.0 {
                    Err(Error::Estimation(
                        "PS multiplier undefined at zero cumulative hazard".to_string(),
                    ))
                } else {
                    Ok((lambda1_cum / lambda0_cum).powf(1.0 / th - 1.0))
                }
            }
        }
    }

    /// Copula generator `g(s) = Phi_V^{-1}(s)` over its ratio to the
    /// derivative, the integrand of the Archimedean Kendall-tau formula
    /// `tau = 1 + 4 \int_0^1 g(s)/g'(s) ds`. Vanishes at both endpoints.
    fn generator_ratio(&self, s: f64) -> f64 {
        if s <= 0.0 || s >= 1.0 {
            return 0.0;
        }
        let th = self.theta;
        match self.family {
            FrailtyFamily::Gamma => -s * (1.0 - s.powf(th)) / th,
            FrailtyFamily::InverseGaussian => {
                // g(s) = ((1 - th ln s)^2 - 1) / (2 th); g'(s) = -(1 - th ln s)/s
                let r = 1.0 - th * s.ln();
                -s * (r * r - 1.0) / (2.0 * th * r)
            }
            FrailtyFamily::PositiveStable => th * s * s.ln(),
        }
    }
}

/// Kendall's tau implied by a frailty spec.
///
/// Gamma (`theta/(theta+2)`) and positive stable (`1 - theta`) use closed
/// forms; inverse Gaussian evaluates the generic Archimedean integral by
/// adaptive quadrature with endpoint splitting.
pub fn theta_to_tau(spec: &FrailtySpec) -> Result<f64> {
    match spec.family {
        FrailtyFamily::Gamma => Ok(spec.theta / (spec.theta + 2.0)),
        FrailtyFamily::PositiveStable => Ok(1.0 - spec.theta),
        FrailtyFamily::InverseGaussian => theta_to_tau_quadrature(spec),
    }
}

/// The generic Archimedean Kendall-tau integral, usable for any family.
///
/// Exposed so the Gamma closed form can be validated against it.
pub fn theta_to_tau_quadrature(spec: &FrailtySpec) -> Result<f64> {
    // generator derivatives blow up at the endpoints; split the unit
    // interval so the adaptive rule never straddles a singular edge
    let cuts = [
        0.0, 1e-8, 1e-4, 1e-2, 0.5, 1.0 - 1e-2, 1.0 - 1e-4, 1.0 - 1e-8, 1.0,
    ];
    let f = |s: f64| spec.generator_ratio(s);
    let mut integral = 0.0;
    for w in cuts.windows(2) {
        integral += adaptive_simpson(&f, w[0], w[1], 1e-10 / (cuts.len() - 1) as f64)?;
    }
    let tau = 1.0 + 4.0 * integral;
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::Estimation(format!(
            "Kendall tau quadrature left the unit interval: {tau}"
        )));
    }
    Ok(tau)
}

/// Frailty spec whose Kendall's tau equals `tau`.
///
/// Gamma and positive stable invert in closed form; inverse Gaussian is
/// solved by a bracketing search on `theta` to absolute tau tolerance 1e-8.
pub fn tau_to_theta(family: FrailtyFamily, tau: f64) -> Result<FrailtySpec> {
    let (lo, hi) = family.tau_range();
    if !(tau > lo && tau < hi) {
        return Err(Error::InvalidInput(format!(
            "tau {} outside the valid range ({}, {}) for the {} family",
            tau,
            lo,
            hi,
            family.label()
        )));
    }
    match family {
        FrailtyFamily::Gamma => FrailtySpec::new(family, 2.0 * tau / (1.0 - tau)),
        FrailtyFamily::PositiveStable => FrailtySpec::new(family, 1.0 - tau),
        FrailtyFamily::InverseGaussian => {
            let objective = |theta: f64| {
                let spec = FrailtySpec {
                    family: FrailtyFamily::InverseGaussian,
                    theta,
                };
                theta_to_tau_quadrature(&spec).unwrap_or(f64::NAN) - tau
            };
            let theta = bisect(objective, 1e-6, 1e6, 1e-8, 0.0)?;
            FrailtySpec::new(family, theta)
        }
    }
}
