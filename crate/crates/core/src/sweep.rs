//! End-to-end reproduction runs: simulate → fuse → validate for every task,
//! rate and seed, aggregated as mean[SD] per task and rate.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::calibration::CalibrationConfig;
use crate::fusion::{run, split_calibration, FusionConfig, FusionError, DEFAULT_SLERP_ALPHA};
use crate::metrics::{evaluate_pair, ElevationTrace, MetricsError, ReportConfig, TaskEntry, TaskPair};
use crate::simulator::{synthesize_imu, trajectory, MotionProfile, NoiseModel, SimulationError, TASK_COUNT};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Settings shared by every run of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub noise: NoiseModel,
    /// Replace the task lever arm; `None` keeps the profile default.
    pub lever_arm: Option<f64>,
    pub duration: f64,
    pub slerp_alpha: f64,
    pub calibration: CalibrationConfig,
    pub report: ReportConfig,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            noise: NoiseModel::default(),
            lever_arm: None,
            duration: 30.0,
            slerp_alpha: DEFAULT_SLERP_ALPHA,
            calibration: CalibrationConfig::default(),
            report: ReportConfig::default(),
        }
    }
}

impl RunSettings {
    /// Noise-free, bias-free, pure-rotation signals.
    pub fn ideal() -> Self {
        Self {
            noise: NoiseModel::ideal(),
            lever_arm: Some(0.0),
            ..Self::default()
        }
    }

    pub fn profile(&self, task: u8) -> Result<MotionProfile, SimulationError> {
        let mut p = MotionProfile::task(task)?.with_duration(self.duration);
        if let Some(l) = self.lever_arm {
            p.lever_arm = l;
        }
        Ok(p)
    }
}

/// Stream seed for one (task, rate, seed) combination.
pub fn derive_seed(seed: u64, task: u8, rate: f64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((task as u64) << 48) ^ (rate.round() as u64)
}

/// Estimate and reference traces of one simulated run.
#[derive(Debug, Clone)]
pub struct RunTraces {
    pub estimate: ElevationTrace,
    pub reference: ElevationTrace,
}

pub fn simulate_and_fuse(
    task: u8,
    rate: f64,
    seed: u64,
    settings: &RunSettings,
) -> Result<RunTraces, SweepError> {
    let profile = settings.profile(task)?;
    let truth = trajectory(&profile, rate)?;
    let imu = synthesize_imu(&truth, &settings.noise.with_seed(derive_seed(seed, task, rate)));
    let (calib, stream) = split_calibration(&imu, profile.prelude_still);
    let fusion = FusionConfig::for_rate(rate).with_alpha(settings.slerp_alpha);
    let est = run(&fusion, &settings.calibration, calib, stream)?;
    let estimate = ElevationTrace::new(est.iter().map(|e| (e.t, e.elevation)).collect(), rate)?;
    let reference = ElevationTrace::new(truth.samples.iter().map(|s| (s.t, s.elevation)).collect(), rate)?;
    Ok(RunTraces { estimate, reference })
}

pub fn run_task(task: u8, rate: f64, seed: u64, settings: &RunSettings) -> Result<TaskEntry, SweepError> {
    let traces = simulate_and_fuse(task, rate, seed, settings)?;
    let pair = TaskPair {
        task: task.to_string(),
        estimate: traces.estimate,
        reference: traces.reference,
    };
    Ok(evaluate_pair(&pair, &settings.report)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub tasks: Vec<u8>,
    pub rates: Vec<f64>,
    pub seeds: u32,
    pub base_seed: u64,
    pub settings: RunSettings,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            tasks: (1..=TASK_COUNT).collect(),
            rates: vec![100.0, 500.0],
            seeds: 5,
            base_seed: 0,
            settings: RunSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, sd, n })
    }

    fn scaled(self, k: f64) -> Self {
        Self {
            mean: self.mean * k,
            sd: self.sd * k,
            n: self.n,
        }
    }
}

/// Aggregate for one task at one rate; angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateAggregate {
    pub rate_hz: f64,
    pub r: Option<MeanSd>,
    pub rmse_deg: MeanSd,
    pub avg_abs_err_deg: MeanSd,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskAggregate {
    pub task: u8,
    pub rates: Vec<RateAggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub seeds: u32,
    pub base_seed: u64,
    pub tasks: Vec<TaskAggregate>,
}

impl SweepReport {
    pub fn aggregate(&self, task: u8, rate: f64) -> Option<&RateAggregate> {
        self.tasks
            .iter()
            .find(|t| t.task == task)?
            .rates
            .iter()
            .find(|r| r.rate_hz == rate)
    }

    /// Mean of the per-task mean RMSE (degrees) over `tasks` at `rate`.
    pub fn mean_rmse_deg(&self, tasks: &[u8], rate: f64) -> Option<f64> {
        let v: Vec<f64> = tasks
            .iter()
            .map(|&t| self.aggregate(t, rate).map(|a| a.rmse_deg.mean))
            .collect::<Option<_>>()?;
        MeanSd::of(&v).map(|m| m.mean)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep report serializes")
    }

    /// One row per task; r, RMSE and average absolute error as mean[SD] per rate.
    pub fn to_table(&self) -> String {
        let rates: Vec<f64> = self
            .tasks
            .first()
            .map(|t| t.rates.iter().map(|r| r.rate_hz).collect())
            .unwrap_or_default();
        let mut out = String::new();
        let _ = write!(out, "{:<5}", "task");
        for r in &rates {
            let _ = write!(
                out,
                " | {:>15} {:>15} {:>15}",
                format!("r@{r}Hz"),
                format!("RMSE°@{r}Hz"),
                format!("AvgAbs°@{r}Hz")
            );
        }
        out.push('\n');
        for t in &self.tasks {
            let _ = write!(out, "{:<5}", t.task);
            for a in &t.rates {
                let r = a
                    .r
                    .map_or_else(|| "NA".to_string(), |m| format!("{:.3}[{:.3}]", m.mean, m.sd));
                let _ = write!(
                    out,
                    " | {:>15} {:>15} {:>15}",
                    r,
                    format!("{:.2}[{:.2}]", a.rmse_deg.mean, a.rmse_deg.sd),
                    format!("{:.2}[{:.2}]", a.avg_abs_err_deg.mean, a.avg_abs_err_deg.sd)
                );
            }
            out.push('\n');
        }
        let _ = writeln!(out, "seeds: {} (base {})", self.seeds, self.base_seed);
        out
    }
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepReport, SweepError> {
    let combos: Vec<(u8, f64, u64)> = config
        .tasks
        .iter()
        .flat_map(|&task| {
            config.rates.iter().flat_map(move |&rate| {
                (0..config.seeds as u64).map(move |s| (task, rate, config.base_seed + s))
            })
        })
        .collect();
    let entries: Vec<TaskEntry> = combos
        .par_iter()
        .map(|&(task, rate, seed)| run_task(task, rate, seed, &config.settings))
        .collect::<Result<_, _>>()?;

    let per_combo = config.seeds.max(1) as usize;
    let mut chunks = entries.chunks(per_combo);
    let mut tasks = Vec::with_capacity(config.tasks.len());
    for &task in &config.tasks {
        let mut rates = Vec::with_capacity(config.rates.len());
        for &rate in &config.rates {
            let runs = chunks.next().unwrap_or_default();
            let rs: Vec<f64> = runs.iter().filter_map(|e| e.r).collect();
            let rmse: Vec<f64> = runs.iter().map(|e| e.rmse).collect();
            let aae: Vec<f64> = runs.iter().map(|e| e.avg_abs_err).collect();
            let empty = MeanSd { mean: f64::NAN, sd: f64::NAN, n: 0 };
            rates.push(RateAggregate {
                rate_hz: rate,
                r: MeanSd::of(&rs),
                rmse_deg: MeanSd::of(&rmse).map_or(empty, |m| m.scaled(180.0 / std::f64::consts::PI)),
                avg_abs_err_deg: MeanSd::of(&aae).map_or(empty, |m| m.scaled(180.0 / std::f64::consts::PI)),
            });
        }
        tasks.push(TaskAggregate { task, rates });
    }
    Ok(SweepReport {
        seeds: config.seeds,
        base_seed: config.base_seed,
        tasks,
    })
}
