//! Boundary-kernel smoothing of Nelson-Aalen increments with a local,
//! MSE-minimizing bandwidth per grid point.
//!
//! The smoother is the Epanechnikov boundary kernel on a finite support
//! `[beg, end]`: interior points use the symmetric kernel on `[-1, 1]`,
//! points within one bandwidth of an edge switch to an asymmetric variant
//! whose support is cut at the edge. The local bandwidth minimizes an
//! estimated mean squared error combining a quadrature variance estimate
//! (IPTW-aware) and a Richardson bias estimate.

use crate::survival::{StepFunction, SurvivalSample, TimeGrid};
use crate::{Error, Result};

// ── Kernel ──────────────────────────────────────────────────────────────────

/// Finite support of the possible event times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub beg: f64,
    pub end: f64,
}

impl KernelSpec {
    pub fn new(beg: f64, end: f64) -> Result<Self> {
        if !beg.is_finite() || !end.is_finite() || beg >= end {
            return Err(Error::InvalidInput(format!(
                "kernel support must be a finite interval, got [{beg}, {end}]"
            )));
        }
        Ok(Self { beg, end })
    }

    pub fn width(&self) -> f64 {
        self.end - self.beg
    }
}

/// Epanechnikov boundary kernel `K(u; q)` on `[-1, q]`, zero outside.
///
/// The interior case `q = 1` reduces to `0.75 (1 - u^2)` on `[-1, 1]`;
/// smaller `q` tilts the mass so that every `q` keeps a unit integral over
/// the truncated support.
pub fn boundary_kernel(u: f64, q: f64) -> f64 {
    if !(-1.0..=q).contains(&u) {
        return 0.0;
    }
    let one_plus_q = 1.0 + q;
    12.0 / (one_plus_q * one_plus_q * one_plus_q * one_plus_q)
        * (u + 1.0)
        * (u * (1.0 - 2.0 * q) + (3.0 * q * q - 2.0 * q + 1.0) / 2.0)
}

/// Which kernel variant applies at evaluation point `t` with bandwidth `b`.
#[derive(Debug, Clone, Copy)]
enum Branch {
    Interior,
    Left(f64),
    Right(f64),
}

impl Branch {
    fn at(t: f64, b: f64, spec: &KernelSpec) -> Branch {
        let left = t - spec.beg;
        let right = spec.end - t;
        if left >= b && right >= b {
            Branch::Interior
        } else if left < b && right >= b {
            Branch::Left(left / b)
        } else if right < b && left >= b {
            Branch::Right(right / b)
        } else {
            // bandwidth reaches both edges (only possible for the doubled
            // bandwidth of the bias estimate); take the nearer edge's branch
            if left <= right {
                Branch::Left(left / b)
            } else {
                Branch::Right(right / b)
            }
        }
    }

    fn eval(&self, u: f64) -> f64 {
        match *self {
            Branch::Interior => boundary_kernel(u, 1.0),
            Branch::Left(q) => boundary_kernel(u, q),
            Branch::Right(q) => boundary_kernel(-u, q),
        }
    }

    /// Range of `u = (t - T) / b` on which the kernel may be nonzero.
    fn u_support(&self) -> (f64, f64) {
        match *self {
            Branch::Interior => (-1.0, 1.0),
            Branch::Left(q) => (-1.0, q),
            Branch::Right(q) => (-q, 1.0),
        }
    }
}

/// Kernel estimate of the hazard at a single point: the kernel-weighted sum
/// of increments in the window, divided by the bandwidth, floored at zero.
fn estimate_at(increments: &StepFunction, spec: &KernelSpec, t: f64, b: f64) -> f64 {
    let branch = Branch::at(t, b, spec);
    let (u_lo, u_hi) = branch.u_support();
    // u in [u_lo, u_hi]  <=>  T in [t - u_hi b, t - u_lo b]
    let t_lo = t - u_hi * b;
    let t_hi = t - u_lo * b;
    let times = increments.jump_times();
    let start = times.partition_point(|&x| x < t_lo);
    let stop = times.partition_point(|&x| x <= t_hi);
    let mut sum = 0.0;
    for i in start..stop {
        let u = (t - times[i]) / b;
        sum += branch.eval(u) * increments.increments()[i];
    }
    (sum / b).max(0.0)
}

// ── Per-arm event context ───────────────────────────────────────────────────

/// Event times of one arm with their (possibly IPTW) weights, sorted.
#[derive(Debug, Clone)]
pub struct ArmEvents {
    times: Vec<f64>,
    /// Running sums of weights rescaled to total the event count, so every
    /// quantity built from them is invariant to a common weight scaling.
    cum_weights: Vec<f64>,
}

impl ArmEvents {
    pub fn collect(sample: &SurvivalSample, arm: u8, weights: Option<&[f64]>) -> Self {
        let mut pairs: Vec<(f64, f64)> = sample
            .records()
            .iter()
            .enumerate()
            .filter(|(_, r)| r.treatment == arm && r.event)
            .map(|(i, r)| (r.time, weights.map_or(1.0, |w| w[i])))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let m = pairs.len() as f64;
        let total: f64 = pairs.iter().map(|(_, w)| w).sum();
        let scale = if total > 0.0 { m / total } else { 1.0 };
        let times: Vec<f64> = pairs.iter().map(|(t, _)| *t).collect();
        let mut cum_weights = Vec::with_capacity(pairs.len());
        let mut acc = 0.0;
        for (_, w) in &pairs {
            acc += w * scale;
            cum_weights.push(acc);
        }
        Self { times, cum_weights }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Weighted empirical survival of the uncensored observations,
    /// `1 - (sum of event weights at times <= t) / (m + 1)`; always positive.
    fn event_survival(&self, t: f64) -> f64 {
        let m = self.len() as f64;
        let cum = match self.times.partition_point(|&x| x <= t).checked_sub(1) {
            Some(i) => self.cum_weights[i],
            None => 0.0,
        };
        1.0 - cum / (m + 1.0)
    }
}

// ── Bandwidth selection ─────────────────────────────────────────────────────

/// Local bandwidths on a grid plus the candidate set they were chosen from.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthPlan {
    pub grid: TimeGrid,
    pub local_bandwidth: Vec<f64>,
    pub candidate_set: Vec<f64>,
}

/// Estimated local mean squared error at one (t, b).
#[derive(Debug, Clone, Copy)]
pub struct LocalMse {
    pub variance: f64,
    pub bias: f64,
    pub mse: f64,
    /// Set when the survival denominator had to be clamped.
    pub clamped: bool,
}

/// Default candidate bandwidths: 21 geometrically spaced values from
/// `width/50` to `width/2`.
pub fn default_candidates(spec: &KernelSpec) -> Vec<f64> {
    let lo = spec.width() / 50.0;
    let hi = spec.width() / 2.0;
    let n = 21;
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

/// Estimated local variance and bias of the kernel hazard at `(t, b)`.
///
/// The variance is `(b m)^{-1} \int K_t(y)^2 lambda(t - by) / L(t - by) dy`
/// with `L` the weighted empirical survival of the uncensored observations,
/// evaluated by 64-point quadrature over the kernel support. The bias is the
/// Richardson estimate `(4/3) [lambda_b(t) - lambda_{b/2}(t)]`, exact to
/// leading order for a second-order kernel; the halved companion bandwidth
/// keeps both evaluations inside the support for every admissible `b`.
pub fn estimate_local_mse(
    t: f64,
    b: f64,
    increments: &StepFunction,
    spec: &KernelSpec,
    events: &ArmEvents,
) -> LocalMse {
    let m = events.len() as f64;
    let branch = Branch::at(t, b, spec);
    let (u_lo, u_hi) = branch.u_support();
    let mut clamped = false;
    let min_survival = 1.0 / (m + 1.0);
    let mut variance = 0.0;
    {
        let c = 0.5 * (u_lo + u_hi);
        let h = 0.5 * (u_hi - u_lo);
        for &(x, w) in crate::numeric::gauss_legendre_64() {
            let y = c + h * x;
            let k = branch.eval(y);
            if k == 0.0 {
                continue;
            }
            let s = t - b * y;
            let mut surv = events.event_survival(s);
            if surv <= 0.0 {
                surv = min_survival;
                clamped = true;
            }
            variance += w * k * k * estimate_at(increments, spec, s, b) / surv;
        }
        variance *= h;
    }
    variance /= b * m;
    let bias = 4.0 / 3.0
        * (estimate_at(increments, spec, t, b) - estimate_at(increments, spec, t, 0.5 * b));
    LocalMse {
        variance,
        bias,
        mse: variance + bias * bias,
        clamped,
    }
}

/// Choose the local bandwidth at every grid point by minimizing the
/// estimated MSE over the candidates (ties toward the smaller bandwidth),
/// then stabilize the selected sequence with a running median of window 5
/// followed by kernel smoothing at a fixed pilot bandwidth.
pub fn select_bandwidths(
    increments: &StepFunction,
    spec: &KernelSpec,
    grid: &TimeGrid,
    candidates: &[f64],
    events: &ArmEvents,
) -> Result<BandwidthPlan> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("empty candidate set".to_string()));
    }
    let half = spec.width() / 2.0;
    if candidates.iter().any(|&b| !(b > 0.0) || b > half * (1.0 + 1e-12)) {
        return Err(Error::InvalidInput(format!(
            "candidate bandwidths must lie in (0, {half}]"
        )));
    }
    if events.is_empty() {
        return Err(Error::Estimation(
            "no events in arm; cannot select bandwidths".to_string(),
        ));
    }
    check_grid_support(grid, spec)?;
    let mut sorted: Vec<f64> = candidates.to_vec();
    sorted.sort_by(f64::total_cmp);

    let mut selected = Vec::with_capacity(grid.len());
    for &t in grid.points() {
        let mut best: Option<(f64, f64)> = None;
        for &b in &sorted {
            let mse = estimate_local_mse(t, b, increments, spec, events).mse;
            if !mse.is_finite() {
                continue;
            }
            // strict improvement keeps the smaller bandwidth on ties
            if best.map_or(true, |(_, m)| mse < m) {
                best = Some((b, mse));
            }
        }
        match best {
            Some((b, _)) => selected.push(b),
            None => {
                return Err(Error::Estimation(format!(
                    "no valid candidate bandwidth at t = {t}"
                )))
            }
        }
    }

    let medianed = running_median5(&selected);
    let pilot = spec.width() / 8.0;
    let points = grid.points();
    let lo = sorted[0];
    let hi = *sorted.last().unwrap();
    let smoothed: Vec<f64> = points
        .iter()
        .map(|&t| {
            let branch = Branch::at(t, pilot, spec);
            let mut num = 0.0;
            let mut den = 0.0;
            for (j, &tj) in points.iter().enumerate() {
                let k = branch.eval((t - tj) / pilot);
                num += k * medianed[j];
                den += k;
            }
            let v = if den > 0.0 { num / den } else { medianed[0] };
            v.clamp(lo, hi)
        })
        .collect();

    Ok(BandwidthPlan {
        grid: grid.clone(),
        local_bandwidth: smoothed,
        candidate_set: sorted,
    })
}

fn running_median5(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 3).min(n);
            let mut window: Vec<f64> = xs[lo..hi].to_vec();
            window.sort_by(f64::total_cmp);
            window[window.len() / 2]
        })
        .collect()
}

fn check_grid_support(grid: &TimeGrid, spec: &KernelSpec) -> Result<()> {
    let eps = 1e-9 * spec.width();
    for &t in grid.points() {
        if t < spec.beg - eps || t > spec.end + eps {
            return Err(Error::InvalidInput(format!(
                "grid point {t} outside the kernel support [{}, {}]",
                spec.beg, spec.end
            )));
        }
    }
    Ok(())
}

// ── Smoothed hazard ─────────────────────────────────────────────────────────

/// Hazard values on a grid with the bandwidth plan that produced them and
/// the trapezoid-integrated cumulative hazard.
#[derive(Debug, Clone)]
pub struct SmoothedHazard {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub plan: BandwidthPlan,
    pub cumulative: Vec<f64>,
    /// Number of observed events behind the increments.
    pub arm_event_count: usize,
}

/// Smooth Nelson-Aalen increments over the plan's grid.
pub fn smooth_hazard(
    increments: &StepFunction,
    spec: &KernelSpec,
    plan: &BandwidthPlan,
    arm_event_count: usize,
) -> Result<SmoothedHazard> {
    check_grid_support(&plan.grid, spec)?;
    if plan.local_bandwidth.len() != plan.grid.len() {
        return Err(Error::InvalidInput(
            "bandwidth plan does not match its grid".to_string(),
        ));
    }
    let points = plan.grid.points();
    let values: Vec<f64> = points
        .iter()
        .zip(&plan.local_bandwidth)
        .map(|(&t, &b)| estimate_at(increments, spec, t, b))
        .collect();
    let mut cumulative = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    cumulative.push(0.0);
    for i in 1..values.len() {
        acc += 0.5 * (values[i] + values[i - 1]) * (points[i] - points[i - 1]);
        cumulative.push(acc);
    }
    Ok(SmoothedHazard {
        grid: plan.grid.clone(),
        values,
        plan: plan.clone(),
        cumulative,
        arm_event_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::adaptive_simpson;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn plan_fixed(grid: &TimeGrid, b: f64) -> BandwidthPlan {
        BandwidthPlan {
            grid: grid.clone(),
            local_bandwidth: vec![b; grid.len()],
            candidate_set: vec![b],
        }
    }

    // ── Kernel function ─────────────────────────────────────────────────

    #[test]
    fn interior_kernel_is_epanechnikov() {
        assert!((boundary_kernel(0.0, 1.0) - 0.75).abs() < 1e-15);
        assert_eq!(boundary_kernel(1.0, 1.0), 0.0);
        assert_eq!(boundary_kernel(-1.0, 1.0), 0.0);
        for u in [-0.9, -0.3, 0.2, 0.8] {
            assert!((boundary_kernel(u, 1.0) - 0.75 * (1.0 - u * u)).abs() < 1e-15);
        }
    }

    #[test]
    fn kernel_vanishes_outside_support() {
        assert_eq!(boundary_kernel(-1.1, 1.0), 0.0);
        assert_eq!(boundary_kernel(0.6, 0.5), 0.0);
        assert_eq!(boundary_kernel(2.0, 1.0), 0.0);
    }

    #[test]
    fn kernel_moment_zero_is_one() {
        // quadrature oracle over the truncated support
        for q in [0.25, 0.5, 1.0] {
            let v = adaptive_simpson(&|u| boundary_kernel(u, q), -1.0, q, 1e-12).unwrap();
            assert!((v - 1.0).abs() < 1e-10, "q={q}: {v}");
        }
        for k in 0..=20 {
            let q = 0.05 + 0.95 * k as f64 / 20.0;
            let v = adaptive_simpson(&|u| boundary_kernel(u, q), -1.0, q, 1e-12).unwrap();
            assert!((v - 1.0).abs() < 1e-8, "q={q}: {v}");
        }
    }

    // ── Single-point smoothing ──────────────────────────────────────────

    #[test]
    fn compact_support_misses_far_increment() {
        let spec = KernelSpec::new(0.0, 10.0).unwrap();
        let inc = StepFunction::from_jumps(vec![(7.0, 0.2)]).unwrap();
        let grid = TimeGrid::new(4.0, 5.0, 2).unwrap();
        let sh = smooth_hazard(&inc, &spec, &plan_fixed(&grid, 1.0), 1).unwrap();
        assert_eq!(sh.values, vec![0.0, 0.0]);
    }

    #[test]
    fn single_increment_at_interior_point() {
        let spec = KernelSpec::new(0.0, 10.0).unwrap();
        let inc = StepFunction::from_jumps(vec![(5.0, 0.1)]).unwrap();
        let grid = TimeGrid::new(4.5, 5.0, 2).unwrap();
        let b = 1.25;
        let sh = smooth_hazard(&inc, &spec, &plan_fixed(&grid, b), 1).unwrap();
        // K(0;1) = 0.75, single term
        assert!((sh.values[1] - 0.75 * 0.1 / b).abs() < 1e-15);
    }

    #[test]
    fn split_increment_invariance() {
        let spec = KernelSpec::new(0.0, 10.0).unwrap();
        let one = StepFunction::from_jumps(vec![(3.0, 0.25), (6.0, 0.1)]).unwrap();
        let split =
            StepFunction::from_jumps(vec![(3.0, 0.125), (3.0, 0.125), (6.0, 0.1)]).unwrap();
        let grid = TimeGrid::new(1.0, 9.0, 17).unwrap();
        let a = smooth_hazard(&one, &spec, &plan_fixed(&grid, 2.0), 2).unwrap();
        let b = smooth_hazard(&split, &spec, &plan_fixed(&grid, 2.0), 2).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn grid_outside_support_errors() {
        let spec = KernelSpec::new(2.0, 10.0).unwrap();
        let inc = StepFunction::from_jumps(vec![(5.0, 0.1)]).unwrap();
        let grid = TimeGrid::new(1.0, 9.0, 3).unwrap();
        assert!(smooth_hazard(&inc, &spec, &plan_fixed(&grid, 1.0), 1).is_err());
    }

    #[test]
    fn cumulative_is_non_decreasing() {
        let spec = KernelSpec::new(0.0, 10.0).unwrap();
        let inc =
            StepFunction::from_jumps(vec![(1.0, 0.2), (4.0, 0.15), (8.0, 0.3)]).unwrap();
        let grid = TimeGrid::new(0.0, 10.0, 21).unwrap();
        let sh = smooth_hazard(&inc, &spec, &plan_fixed(&grid, 2.0), 3).unwrap();
        for w in sh.cumulative.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert!(sh.values.iter().all(|&v| v >= 0.0));
    }

    // ── Monte Carlo against a known rate ────────────────────────────────

    fn exponential_arm(n: usize, rate: f64, seed: u64) -> (StepFunction, ArmEvents) {
        use crate::survival::{SubjectRecord, SurvivalSample};
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let recs: Vec<SubjectRecord> = (0..n)
            .map(|i| {
                let u: f64 = rng.gen::<f64>();
                let t = -u.ln() / rate;
                SubjectRecord::new(format!("s{i}"), t, true, 0, vec![])
            })
            .collect();
        let sample = SurvivalSample::new(recs).unwrap();
        let na = crate::survival::nelson_aalen(&sample, 0, None).unwrap();
        let events = ArmEvents::collect(&sample, 0, None);
        (na, events)
    }

    #[test]
    fn constant_hazard_recovered_within_ten_percent() {
        let rate = 0.8;
        let (na, _) = exponential_arm(20_000, rate, 7);
        let spec = KernelSpec::new(0.0, 2.0).unwrap();
        let grid = TimeGrid::new(0.0, 2.0, 21).unwrap();
        let sh = smooth_hazard(&na, &spec, &plan_fixed(&grid, 0.4), 20_000).unwrap();
        for (i, &t) in grid.points().iter().enumerate() {
            if t < 0.4 || t > 1.6 {
                continue; // interior points only
            }
            let rel = (sh.values[i] - rate).abs() / rate;
            assert!(rel < 0.10, "t={t}: {} vs {rate}", sh.values[i]);
        }
    }

    // ── Local MSE ───────────────────────────────────────────────────────

    #[test]
    fn variance_is_weight_scale_invariant() {
        use crate::survival::{SubjectRecord, SurvivalSample};
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let recs: Vec<SubjectRecord> = (0..400)
            .map(|i| {
                let u: f64 = rng.gen();
                SubjectRecord::new(format!("s{i}"), -u.ln(), true, 0, vec![])
            })
            .collect();
        let sample = SurvivalSample::new(recs).unwrap();
        let w1: Vec<f64> = (0..400).map(|i| 1.0 + (i % 7) as f64 * 0.3).collect();
        let w2: Vec<f64> = w1.iter().map(|w| w * 2.0).collect();
        let spec = KernelSpec::new(0.0, 2.0).unwrap();
        let na1 = crate::survival::nelson_aalen(&sample, 0, Some(&w1)).unwrap();
        let na2 = crate::survival::nelson_aalen(&sample, 0, Some(&w2)).unwrap();
        let e1 = ArmEvents::collect(&sample, 0, Some(&w1));
        let e2 = ArmEvents::collect(&sample, 0, Some(&w2));
        for (t, b) in [(0.5, 0.3), (1.0, 0.5), (0.1, 0.2)] {
            let m1 = estimate_local_mse(t, b, &na1, &spec, &e1);
            let m2 = estimate_local_mse(t, b, &na2, &spec, &e2);
            assert!(
                (m1.variance - m2.variance).abs() <= 1e-10 * m1.variance.max(1.0),
                "t={t} b={b}: {} vs {}",
                m1.variance,
                m2.variance
            );
        }
    }

    #[test]
    fn variance_decreases_with_bandwidth() {
        let (na, events) = exponential_arm(5_000, 1.0, 3);
        let spec = KernelSpec::new(0.0, 2.0).unwrap();
        let cands = default_candidates(&spec);
        let t = 1.0;
        let vars: Vec<f64> = cands
            .iter()
            .map(|&b| estimate_local_mse(t, b, &na, &spec, &events).variance)
            .collect();
        assert!(vars.last().unwrap() < &vars[0]);
        for w in vars.windows(2) {
            assert!(w[1] <= w[0] * 1.05, "variance rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn linear_hazard_has_negligible_richardson_bias() {
        use crate::survival::{SubjectRecord, SurvivalSample};
        // hazard 0.5 (1 + t): Lambda = 0.5 (t + t^2 / 2); invert by quadratic
        let mut rng = ChaCha12Rng::seed_from_u64(19);
        let recs: Vec<SubjectRecord> = (0..40_000)
            .map(|i| {
                let u: f64 = rng.gen();
                let e = -u.ln();
                let t = (1.0f64 + 4.0 * e).sqrt() - 1.0;
                SubjectRecord::new(format!("s{i}"), t, true, 0, vec![])
            })
            .collect();
        let sample = SurvivalSample::new(recs).unwrap();
        let na = crate::survival::nelson_aalen(&sample, 0, None).unwrap();
        let events = ArmEvents::collect(&sample, 0, None);
        let spec = KernelSpec::new(0.0, 3.0).unwrap();
        for t in [1.0, 1.5] {
            let truth = 0.5 * (1.0 + t);
            let mse = estimate_local_mse(t, 0.45, &na, &spec, &events);
            assert!(
                mse.bias.abs() < 0.05 * truth,
                "t={t}: bias {} vs hazard {truth}",
                mse.bias
            );
        }
    }

    // ── Bandwidth selection ─────────────────────────────────────────────

    #[test]
    fn constant_hazard_prefers_wide_bandwidths() {
        let (na, events) = exponential_arm(3_000, 1.0, 23);
        let spec = KernelSpec::new(0.0, 2.0).unwrap();
        let grid = TimeGrid::new(0.0, 2.0, 21).unwrap();
        let cands = default_candidates(&spec);
        let plan = select_bandwidths(&na, &spec, &grid, &cands, &events).unwrap();
        let median = cands[cands.len() / 2];
        let interior: Vec<(usize, f64)> = grid
            .points()
            .iter()
            .cloned()
            .enumerate()
            .filter(|&(_, t)| t >= 0.4 && t <= 1.6)
            .collect();
        let wide = interior
            .iter()
            .filter(|&&(i, _)| plan.local_bandwidth[i] >= median)
            .count();
        assert!(
            wide * 10 >= interior.len() * 6,
            "only {wide} of {} interior points chose a wide bandwidth",
            interior.len()
        );
    }

    #[test]
    fn single_candidate_used_everywhere() {
        let (na, events) = exponential_arm(500, 1.0, 29);
        let spec = KernelSpec::new(0.0, 2.0).unwrap();
        let grid = TimeGrid::new(0.0, 2.0, 11).unwrap();
        let plan = select_bandwidths(&na, &spec, &grid, &[0.5], &events).unwrap();
        assert!(plan.local_bandwidth.iter().all(|&b| b == 0.5));
    }

    #[test]
    fn selection_is_deterministic() {
        let (na, events) = exponential_arm(800, 1.2, 31);
        let spec = KernelSpec::new(0.0, 2.0).unwrap();
        let grid = TimeGrid::new(0.0, 2.0, 15).unwrap();
        let cands = default_candidates(&spec);
        let a = select_bandwidths(&na, &spec, &grid, &cands, &events).unwrap();
        let b = select_bandwidths(&na, &spec, &grid, &cands, &events).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oversized_candidates_rejected() {
        let (na, events) = exponential_arm(100, 1.0, 37);
        let spec = KernelSpec::new(0.0, 2.0).unwrap();
        let grid = TimeGrid::new(0.0, 2.0, 5).unwrap();
        assert!(select_bandwidths(&na, &spec, &grid, &[1.5], &events).is_err());
    }
}
