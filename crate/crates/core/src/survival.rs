//! Observed-data model and the nonparametric building blocks: risk sets,
//! (weighted) Nelson-Aalen increments, Kaplan-Meier curves, the two-sample
//! log-rank test, and the estimation time grid.
//!
//! Samples are immutable after construction; every estimator here is a pure
//! function of its inputs. Tied events are pooled into a single increment,
//! and subjects censored at an event time remain in the risk set at that
//! time (`Y(t) = I{X >= t}`).

use crate::{Error, Result};

// ── Data model ──────────────────────────────────────────────────────────────

/// One subject: follow-up time, event indicator, treatment arm, covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub id: String,
    /// Follow-up time `X`; nonnegative and finite.
    pub time: f64,
    /// `true` when the event was observed at `time`, `false` when censored.
    pub event: bool,
    /// Treatment arm, 0 or 1.
    pub treatment: u8,
    /// Baseline covariates; the same length for every record in a sample.
    pub covariates: Vec<f64>,
}

impl SubjectRecord {
    pub fn new(
        id: impl Into<String>,
        time: f64,
        event: bool,
        treatment: u8,
        covariates: Vec<f64>,
    ) -> Self {
        Self {
            id: id.into(),
            time,
            event,
            treatment,
            covariates,
        }
    }
}

/// An immutable collection of subject records.
#[derive(Debug, Clone)]
pub struct SurvivalSample {
    records: Vec<SubjectRecord>,
    n_covariates: usize,
}

impl SurvivalSample {
    /// Validate and freeze a set of records.
    pub fn new(records: Vec<SubjectRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidInput("empty sample".to_string()));
        }
        let n_covariates = records[0].covariates.len();
        for (i, r) in records.iter().enumerate() {
            if !r.time.is_finite() || r.time < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "record {} (id {}): time must be finite and >= 0, got {}",
                    i, r.id, r.time
                )));
            }
            if r.treatment > 1 {
                return Err(Error::InvalidInput(format!(
                    "record {} (id {}): treatment must be 0 or 1, got {}",
                    i, r.id, r.treatment
                )));
            }
            if r.covariates.len() != n_covariates {
                return Err(Error::InvalidInput(format!(
                    "record {} (id {}): expected {} covariates, got {}",
                    i,
                    r.id,
                    n_covariates,
                    r.covariates.len()
                )));
            }
            if r.covariates.iter().any(|z| !z.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "record {} (id {}): non-finite covariate",
                    i, r.id
                )));
            }
        }
        Ok(Self {
            records,
            n_covariates,
        })
    }

    pub fn records(&self) -> &[SubjectRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_covariates(&self) -> usize {
        self.n_covariates
    }

    pub fn arm_size(&self, arm: u8) -> usize {
        self.records.iter().filter(|r| r.treatment == arm).count()
    }

    pub fn n_events(&self) -> usize {
        self.records.iter().filter(|r| r.event).count()
    }

    /// Number of observed events in one arm.
    pub fn arm_event_count(&self, arm: u8) -> usize {
        self.records
            .iter()
            .filter(|r| r.treatment == arm && r.event)
            .count()
    }

    /// Indices sorted by a key built only from record values (and the paired
    /// weight), so every downstream accumulation is invariant to the order in
    /// which records were supplied.
    pub(crate) fn canonical_order(&self, weights: Option<&[f64]>) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.records.len()).collect();
        idx.sort_by(|&a, &b| {
            let ra = &self.records[a];
            let rb = &self.records[b];
            ra.time
                .total_cmp(&rb.time)
                .then(rb.event.cmp(&ra.event))
                .then(ra.treatment.cmp(&rb.treatment))
                .then_with(|| {
                    for (za, zb) in ra.covariates.iter().zip(&rb.covariates) {
                        let c = za.total_cmp(zb);
                        if c != std::cmp::Ordering::Equal {
                            return c;
                        }
                    }
                    std::cmp::Ordering::Equal
                })
                .then_with(|| match weights {
                    Some(w) => w[a].total_cmp(&w[b]),
                    None => std::cmp::Ordering::Equal,
                })
                .then_with(|| ra.id.cmp(&rb.id))
        });
        idx
    }
}

fn validate_weights(sample: &SurvivalSample, weights: Option<&[f64]>) -> Result<()> {
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
    Ok(())
}

// ── Step functions ──────────────────────────────────────────────────────────

/// A right-continuous piecewise-constant function with `value(0) = 0`,
/// represented by strictly increasing jump times and their increments.
///
/// Cumulative hazards have nonnegative increments. Product-limit survival
/// curves are stored through their drops, with `survival(t) = 1 + value(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    jump_times: Vec<f64>,
    increments: Vec<f64>,
    cumulative: Vec<f64>,
}

impl StepFunction {
    /// Build from (time, increment) pairs. Times must be positive and finite;
    /// increments at identical times are merged into one jump.
    pub fn from_jumps(mut jumps: Vec<(f64, f64)>) -> Result<Self> {
        jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut jump_times: Vec<f64> = Vec::with_capacity(jumps.len());
        let mut increments: Vec<f64> = Vec::with_capacity(jumps.len());
        for (t, d) in jumps {
            if !t.is_finite() || t <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "step function jump times must be positive and finite, got {t}"
                )));
            }
            if Some(&t) == jump_times.last() {
                *increments.last_mut().unwrap() += d;
            } else {
                jump_times.push(t);
                increments.push(d);
            }
        }
        let mut cumulative = Vec::with_capacity(increments.len());
        let mut acc = 0.0;
        for &d in &increments {
            acc += d;
            cumulative.push(acc);
        }
        Ok(Self {
            jump_times,
            increments,
            cumulative,
        })
    }

    pub fn empty() -> Self {
        Self {
            jump_times: Vec::new(),
            increments: Vec::new(),
            cumulative: Vec::new(),
        }
    }

    /// Sum of increments at jump times `<= t`.
    pub fn value(&self, t: f64) -> f64 {
        match self
            .jump_times
            .partition_point(|&jt| jt <= t)
            .checked_sub(1)
        {
            Some(i) => self.cumulative[i],
            None => 0.0,
        }
    }

    /// Survival-curve reading of the step function: `1 + value(t)`.
    pub fn survival(&self, t: f64) -> f64 {
        1.0 + self.value(t)
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn len(&self) -> usize {
        self.jump_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jump_times.is_empty()
    }

    /// Iterate `(jump_time, increment)` pairs in time order.
    pub fn jumps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.jump_times
            .iter()
            .copied()
            .zip(self.increments.iter().copied())
    }
}

// ── Time grid ───────────────────────────────────────────────────────────────

/// An equally spaced estimation grid with at least two points.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(t_min: f64, t_max: f64, n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::InvalidInput(
                "time grid needs at least 2 points".to_string(),
            ));
        }
        if !t_min.is_finite() || !t_max.is_finite() || t_min < 0.0 {
            return Err(Error::InvalidInput(
                "time grid bounds must be finite and nonnegative".to_string(),
            ));
        }
        if t_max <= t_min {
            return Err(Error::InvalidInput(format!(
                "degenerate grid: t_max {t_max} <= t_min {t_min}"
            )));
        }
        let step = (t_max - t_min) / (n_points - 1) as f64;
        let mut points: Vec<f64> = (0..n_points).map(|i| t_min + i as f64 * step).collect();
        // keep the last point exactly on the upper bound
        points[n_points - 1] = t_max;
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        *self.points.last().unwrap()
    }

    pub fn spacing(&self) -> f64 {
        (self.max() - self.min()) / (self.len() - 1) as f64
    }
}

/// Settings for [`build_time_grid`].
#[derive(Debug, Clone)]
pub struct GridOptions {
    pub n_points: usize,
    /// The grid extends to the latest time at which this many subjects
    /// remain at risk in every arm.
    pub min_at_risk: usize,
    /// Fixed `[t_min, t_max]` overriding the data-driven bounds.
    pub fixed_bounds: Option<(f64, f64)>,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            n_points: 51,
            min_at_risk: 10,
            fixed_bounds: None,
        }
    }
}

/// Build the estimation grid: equally spaced from the first pooled event
/// time to the latest time at which at least `min_at_risk` subjects remain
/// at risk in both arms, unless fixed bounds are supplied.
pub fn build_time_grid(sample: &SurvivalSample, opts: &GridOptions) -> Result<TimeGrid> {
    if let Some((lo, hi)) = opts.fixed_bounds {
        return TimeGrid::new(lo, hi, opts.n_points);
    }
    let t_min = sample
        .records()
        .iter()
        .filter(|r| r.event)
        .map(|r| r.time)
        .fold(f64::INFINITY, f64::min);
    if !t_min.is_finite() {
        return Err(Error::InvalidInput("no events observed".to_string()));
    }
    let mut t_max = f64::INFINITY;
    for arm in [0u8, 1u8] {
        let mut times: Vec<f64> = sample
            .records()
            .iter()
            .filter(|r| r.treatment == arm)
            .map(|r| r.time)
            .collect();
        if times.len() <= opts.min_at_risk {
            return Err(Error::InvalidInput(format!(
                "arm {arm} has {} subjects; more than {} required for the grid",
                times.len(),
                opts.min_at_risk
            )));
        }
        times.sort_by(f64::total_cmp);
        // Y(t) = #{X >= t} >= k holds up to the k-th largest time.
        let kth_largest = times[times.len() - opts.min_at_risk];
        t_max = t_max.min(kth_largest);
    }
    if t_max <= t_min {
        return Err(Error::InvalidInput(format!(
            "degenerate grid: t_max {t_max} <= t_min {t_min}"
        )));
    }
    TimeGrid::new(t_min, t_max, opts.n_points)
}

// ── Nelson-Aalen / Kaplan-Meier ─────────────────────────────────────────────

struct ArmScan {
    /// (time, weighted events, weighted at-risk) at each distinct event time.
    rows: Vec<(f64, f64, f64)>,
}

/// One pass over an arm in reverse canonical order, accumulating weighted
/// risk-set totals and pooled weighted event counts at each event time.
fn scan_arm(sample: &SurvivalSample, arm: u8, weights: Option<&[f64]>) -> Result<ArmScan> {
    validate_weights(sample, weights)?;
    let order = sample.canonical_order(weights);
    let arm_indices: Vec<usize> = order
        .into_iter()
        .filter(|&i| sample.records()[i].treatment == arm)
        .collect();
    if arm_indices.is_empty() {
        return Err(Error::InvalidInput("empty treatment arm".to_string()));
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    let mut at_risk = 0.0;
    let mut pos = arm_indices.len();
    while pos > 0 {
        let t = sample.records()[arm_indices[pos - 1]].time;
        let mut events_here = 0.0;
        while pos > 0 && sample.records()[arm_indices[pos - 1]].time == t {
            let i = arm_indices[pos - 1];
            at_risk += w(i);
            if sample.records()[i].event {
                events_here += w(i);
            }
            pos -= 1;
        }
        if events_here > 0.0 {
            rows.push((t, events_here, at_risk));
        }
    }
    rows.reverse();
    Ok(ArmScan { rows })
}

/// Weighted Nelson-Aalen estimator of the cumulative hazard in one arm.
///
/// The increment at each distinct event time is the weighted event count
/// divided by the weighted number at risk; omitting `weights` is identical
/// to unit weights.
pub fn nelson_aalen(
    sample: &SurvivalSample,
    arm: u8,
    weights: Option<&[f64]>,
) -> Result<StepFunction> {
    let scan = scan_arm(sample, arm, weights)?;
    let jumps = scan
        .rows
        .into_iter()
        .map(|(t, d, y)| (t, d / y))
        .collect();
    StepFunction::from_jumps(jumps)
}

/// Weighted Kaplan-Meier product-limit estimator in one arm.
///
/// The returned step function stores the drops of the survival curve; read
/// it through [`StepFunction::survival`].
pub fn kaplan_meier(
    sample: &SurvivalSample,
    arm: u8,
    weights: Option<&[f64]>,
) -> Result<StepFunction> {
    let scan = scan_arm(sample, arm, weights)?;
    let mut s = 1.0;
    let mut jumps = Vec::with_capacity(scan.rows.len());
    for (t, d, y) in scan.rows {
        let s_next = s * (1.0 - d / y);
        jumps.push((t, s_next - s));
        s = s_next;
    }
    StepFunction::from_jumps(jumps)
}

/// Result of the two-sample log-rank test.
#[derive(Debug, Clone)]
pub struct LogrankResult {
    /// Chi-squared statistic on one degree of freedom.
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample (optionally weighted) log-rank test comparing the arms.
///
/// With weights, event and at-risk counts are replaced by weighted totals in
/// both the observed-minus-expected sum and the hypergeometric variance.
pub fn logrank_test(sample: &SurvivalSample, weights: Option<&[f64]>) -> Result<LogrankResult> {
    validate_weights(sample, weights)?;
    if sample.arm_size(0) == 0 || sample.arm_size(1) == 0 {
        return Err(Error::InvalidInput("empty treatment arm".to_string()));
    }
    if sample.n_events() == 0 {
        return Err(Error::InvalidInput("no events observed".to_string()));
    }
    let order = sample.canonical_order(weights);
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);

    let mut observed_minus_expected = 0.0;
    let mut variance = 0.0;
    let mut at_risk = [0.0f64; 2];
    let mut pos = order.len();
    while pos > 0 {
        let t = sample.records()[order[pos - 1]].time;
        let mut events = [0.0f64; 2];
        while pos > 0 && sample.records()[order[pos - 1]].time == t {
            let i = order[pos - 1];
            let r = &sample.records()[i];
            at_risk[r.treatment as usize] += w(i);
            if r.event {
                events[r.treatment as usize] += w(i);
            }
            pos -= 1;
        }
        let d = events[0] + events[1];
        let n = at_risk[0] + at_risk[1];
        if d > 0.0 && at_risk[0] > 0.0 && at_risk[1] > 0.0 {
            let p1 = at_risk[1] / n;
            observed_minus_expected += events[1] - d * p1;
            if n > 1.0 {
                variance += d * p1 * (1.0 - p1) * (n - d) / (n - 1.0);
            }
        }
    }
    if variance <= 0.0 {
        // all events fall where one arm is exhausted; no comparison possible
        return Err(Error::Estimation(
            "log-rank variance is zero; arms are never simultaneously at risk at an event"
                .to_string(),
        ));
    }
    let statistic = observed_minus_expected * observed_minus_expected / variance;
    Ok(LogrankResult {
        statistic,
        p_value: chi_squared_upper_tail(statistic, 1.0),
    })
}

/// Upper tail of the chi-squared distribution.
pub(crate) fn chi_squared_upper_tail(x: f64, df: f64) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    if x <= 0.0 {
        return 1.0;
    }
    let dist = ChiSquared::new(df).expect("valid degrees of freedom");
    dist.sf(x).clamp(0.0, 1.0)
}
