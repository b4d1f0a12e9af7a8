//! Agreement statistics between an estimated and a reference elevation trace:
//! resampling, peak normalized cross-correlation, RMSE and average absolute
//! error, and per-task report assembly.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("range error: {0}")]
    Range(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("correlation undefined: signal constant over the overlap")]
    UndefinedCorrelation,
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
}

/// Elevation time series, radians.
#[derive(Debug, Clone, PartialEq)]
pub struct ElevationTrace {
    pub samples: Vec<(f64, f64)>,
    /// Nominal rate, Hz.
    pub rate: f64,
}

impl ElevationTrace {
    pub fn new(samples: Vec<(f64, f64)>, rate: f64) -> Result<Self, MetricsError> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(MetricsError::InvalidTrace(format!("rate must be positive, got {rate}")));
        }
        if let Some(i) = samples.windows(2).position(|w| w[1].0 <= w[0].0) {
            return Err(MetricsError::InvalidTrace(format!(
                "timestamps not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(Self { samples, rate })
    }

    /// Builds a trace whose nominal rate is inferred from the mean step.
    pub fn from_samples(samples: Vec<(f64, f64)>) -> Result<Self, MetricsError> {
        if samples.len() < 2 {
            return Err(MetricsError::InvalidTrace("need at least two samples".into()));
        }
        let span = samples[samples.len() - 1].0 - samples[0].0;
        let rate = (samples.len() - 1) as f64 / span;
        Self::new(samples, rate)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.0)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.1)
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.samples.first()?.0, self.samples.last()?.0))
    }

    pub fn peak_to_peak(&self) -> f64 {
        let (lo, hi) = self
            .values()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if lo.is_finite() {
            hi - lo
        } else {
            0.0
        }
    }

    /// Linear interpolation at `t`; `None` outside the span.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let (t0, t1) = self.span()?;
        if t < t0 || t > t1 {
            return None;
        }
        let i = self.samples.partition_point(|s| s.0 <= t);
        if i == 0 {
            return Some(self.samples[0].1);
        }
        if i == self.samples.len() {
            return Some(self.samples[i - 1].1);
        }
        let (ta, va) = self.samples[i - 1];
        let (tb, vb) = self.samples[i];
        if t == ta {
            return Some(va);
        }
        let u = (t - ta) / (tb - ta);
        Some(va + u * (vb - va))
    }
}

/// Tolerance (s) for grid points that land a hair outside a span.
const TIME_EPS: f64 = 1e-9;

/// Linear interpolation onto `t0 + k / target_rate` for every grid point up to `t1`.
pub fn resample(
    trace: &ElevationTrace,
    target_rate: f64,
    window: (f64, f64),
) -> Result<ElevationTrace, MetricsError> {
    let (t0, t1) = window;
    let (s0, s1) = trace
        .span()
        .ok_or_else(|| MetricsError::Range("empty trace".into()))?;
    if !(target_rate.is_finite() && target_rate > 0.0) {
        return Err(MetricsError::Range(format!("target rate must be positive, got {target_rate}")));
    }
    if t0 > t1 || t0 < s0 - TIME_EPS || t1 > s1 + TIME_EPS {
        return Err(MetricsError::Range(format!(
            "window [{t0}, {t1}] outside trace span [{s0}, {s1}]"
        )));
    }
    let n = ((t1 - t0) * target_rate + TIME_EPS * target_rate).floor() as usize + 1;
    let samples = (0..n)
        .map(|k| {
            let t = t0 + k as f64 / target_rate;
            let v = trace
                .value_at(t.clamp(s0, s1))
                .expect("grid point clamped into span");
            (t, v)
        })
        .collect();
    Ok(ElevationTrace {
        samples,
        rate: target_rate,
    })
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    if a.len() < 2 {
        return None;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    let flat = |v: &[f64]| {
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
        hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs())
    };
    if flat(a) || flat(b) || saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub r: f64,
    /// Seconds; positive when the estimate lags the reference.
    pub lag: f64,
}

/// Peak Pearson correlation over integer lags in `[−max_lag, +max_lag]`.
///
/// At lag `k` samples the estimate sample `i + k` is paired with reference
/// sample `i`, over the overlapping part only. Ties go to the smaller `|k|`.
pub fn cross_correlation(
    est: &ElevationTrace,
    reference: &ElevationTrace,
    max_lag: f64,
) -> Result<Correlation, MetricsError> {
    check_same_grid(est, reference)?;
    let a: Vec<f64> = est.values().collect();
    let b: Vec<f64> = reference.values().collect();
    let n = a.len();
    let max_k = ((max_lag * est.rate).round().max(0.0) as usize).min(n.saturating_sub(2));
    let mut best: Option<(f64, i64)> = None;
    let mut lags: Vec<i64> = vec![0];
    for k in 1..=max_k as i64 {
        lags.push(-k);
        lags.push(k);
    }
    for k in lags {
        let (ea, rb) = if k >= 0 {
            let k = k as usize;
            (&a[k..], &b[..n - k])
        } else {
            let k = (-k) as usize;
            (&a[..n - k], &b[k..])
        };
        if let Some(r) = pearson(ea, rb) {
            if best.is_none_or(|(br, _)| r > br) {
                best = Some((r, k));
            }
        }
    }
    let (r, k) = best.ok_or(MetricsError::UndefinedCorrelation)?;
    Ok(Correlation {
        r,
        lag: k as f64 / est.rate,
    })
}

fn check_same_grid(a: &ElevationTrace, b: &ElevationTrace) -> Result<(), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::Shape(format!(
            "traces have {} and {} samples",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(MetricsError::Shape("empty traces".into()));
    }
    let tol = 1e-6 / a.rate.max(b.rate);
    if let Some(i) = a
        .times()
        .zip(b.times())
        .position(|(ta, tb)| (ta - tb).abs() > tol)
    {
        return Err(MetricsError::Shape(format!("time grids differ at index {i}")));
    }
    Ok(())
}

pub fn rmse(est: &ElevationTrace, reference: &ElevationTrace) -> Result<f64, MetricsError> {
    check_same_grid(est, reference)?;
    let sq: f64 = est
        .values()
        .zip(reference.values())
        .map(|(e, r)| (e - r) * (e - r))
        .sum();
    Ok((sq / est.len() as f64).sqrt())
}

pub fn avg_abs_error(est: &ElevationTrace, reference: &ElevationTrace) -> Result<f64, MetricsError> {
    check_same_grid(est, reference)?;
    let s: f64 = est
        .values()
        .zip(reference.values())
        .map(|(e, r)| (e - r).abs())
        .sum();
    Ok(s / est.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportConfig {
    /// Lag search half-width, s. Zero gives plain Pearson r.
    pub max_lag: f64,
    /// References with smaller peak-to-peak (rad) get no correlation.
    pub quasi_static_threshold: f64,
    /// Shift the estimate by the correlation lag before computing errors.
    pub lag_compensated_errors: bool,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            max_lag: 0.5,
            quasi_static_threshold: 2f64.to_radians(),
            lag_compensated_errors: false,
        }
    }
}

/// One labelled estimate/reference pair.
#[derive(Debug, Clone)]
pub struct TaskPair {
    pub task: String,
    pub estimate: ElevationTrace,
    pub reference: ElevationTrace,
}

/// Statistics for one task, radians and seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskEntry {
    pub task: String,
    pub r: Option<f64>,
    pub lag: Option<f64>,
    pub rmse: f64,
    pub avg_abs_err: f64,
    pub n: usize,
    pub rate: f64,
    pub window: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub entries: Vec<TaskEntry>,
}

#[derive(Serialize)]
struct EntryJson<'a> {
    task: &'a str,
    r: Option<f64>,
    lag_s: Option<f64>,
    rmse_deg: f64,
    avg_abs_err_deg: f64,
    n: usize,
    rate_hz: f64,
    window_s: [f64; 2],
}

impl ValidationReport {
    pub fn entry(&self, task: &str) -> Option<&TaskEntry> {
        self.entries.iter().find(|e| e.task == task)
    }

    /// JSON in degrees (angles) and seconds (lag, window).
    pub fn to_json(&self) -> String {
        let rows: Vec<EntryJson> = self
            .entries
            .iter()
            .map(|e| EntryJson {
                task: &e.task,
                r: e.r,
                lag_s: e.lag,
                rmse_deg: e.rmse.to_degrees(),
                avg_abs_err_deg: e.avg_abs_err.to_degrees(),
                n: e.n,
                rate_hz: e.rate,
                window_s: [e.window.0, e.window.1],
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({ "tasks": rows }))
            .expect("report serializes")
    }

    /// Plain-text table: task, r, lag, RMSE and average absolute error.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<12} {:>8} {:>8} {:>10} {:>12} {:>8}",
            "task", "r", "lag(s)", "RMSE(°)", "AvgAbs(°)", "n"
        );
        for e in &self.entries {
            let r = e.r.map_or_else(|| "NA".to_string(), |r| format!("{r:.3}"));
            let lag = e.lag.map_or_else(|| "NA".to_string(), |l| format!("{l:.3}"));
            let _ = writeln!(
                out,
                "{:<12} {:>8} {:>8} {:>10.2} {:>12.2} {:>8}",
                e.task,
                r,
                lag,
                e.rmse.to_degrees(),
                e.avg_abs_err.to_degrees(),
                e.n
            );
        }
        out
    }
}

/// Shifts `est` by `k` samples against `reference` and returns the
/// overlapping parts as traces on the reference grid.
fn shifted_pair(est: &ElevationTrace, reference: &ElevationTrace, k: i64) -> (ElevationTrace, ElevationTrace) {
    let n = est.len();
    let ku = k.unsigned_abs() as usize;
    let (e, r) = if k >= 0 {
        (&est.samples[ku..], &reference.samples[..n - ku])
    } else {
        (&est.samples[..n - ku], &reference.samples[ku..])
    };
    let e = e.iter().zip(r).map(|(e, r)| (r.0, e.1)).collect();
    (
        ElevationTrace { samples: e, rate: est.rate },
        ElevationTrace { samples: r.to_vec(), rate: reference.rate },
    )
}

/// Aligns one pair on the lower of the two rates over the common window and
/// computes its statistics.
pub fn evaluate_pair(pair: &TaskPair, config: &ReportConfig) -> Result<TaskEntry, MetricsError> {
    let (e0, e1) = pair
        .estimate
        .span()
        .ok_or_else(|| MetricsError::Range("empty estimate".into()))?;
    let (r0, r1) = pair
        .reference
        .span()
        .ok_or_else(|| MetricsError::Range("empty reference".into()))?;
    let window = (e0.max(r0), e1.min(r1));
    if window.0 >= window.1 {
        return Err(MetricsError::Range(format!(
            "no overlap between estimate [{e0}, {e1}] and reference [{r0}, {r1}]"
        )));
    }
    let rate = pair.estimate.rate.min(pair.reference.rate);
    let est = resample(&pair.estimate, rate, window)?;
    let reference = resample(&pair.reference, rate, window)?;

    let correlation = if reference.peak_to_peak() < config.quasi_static_threshold {
        None
    } else {
        match cross_correlation(&est, &reference, config.max_lag) {
            Ok(c) => Some(c),
            Err(MetricsError::UndefinedCorrelation) => None,
            Err(e) => return Err(e),
        }
    };

    let (est_e, ref_e) = match correlation {
        Some(c) if config.lag_compensated_errors => {
            shifted_pair(&est, &reference, (c.lag * rate).round() as i64)
        }
        _ => (est, reference),
    };
    Ok(TaskEntry {
        task: pair.task.clone(),
        r: correlation.map(|c| c.r),
        lag: correlation.map(|c| c.lag),
        rmse: rmse(&est_e, &ref_e)?,
        avg_abs_err: avg_abs_error(&est_e, &ref_e)?,
        n: est_e.len(),
        rate,
        window,
    })
}

pub fn build_report(pairs: &[TaskPair], config: &ReportConfig) -> Result<ValidationReport, MetricsError> {
    let entries = pairs
        .iter()
        .map(|p| evaluate_pair(p, config))
        .collect::<Result<_, _>>()?;
    Ok(ValidationReport { entries })
}
