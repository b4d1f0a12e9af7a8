//! Streaming accelerometer/gyroscope fusion producing segment elevation.
//!
//! Per sample:
//! 1. low-pass the specific force;
//! 2. subtract the calibrated gyro bias, then band-pass the angular velocity;
//! 3. tilt-only orientation from the filtered specific force;
//! 4. gyro orientation by integrating from the last fused orientation;
//! 5. split both into world-Z twist and horizontal swing;
//! 6. Slerp from the gyro swing towards the accelerometer swing;
//! 7. recompose with the gyro twist (the accelerometer twist is meaningless);
//! 8. elevation of the calibrated vertical axis.

use nalgebra::Vector3;
use thiserror::Error;

use crate::calibration::{
    calibrate, orientation_from_accel, CalibrationConfig, CalibrationError, CalibrationResult,
};
use crate::filters::{FilterError, FilterSpec, FilterState};
use crate::rotmath::{
    decompose_z_xy, elevation_from_rotation, integrate_gyro, matrix_from_quat, quat_from_matrix,
    slerp, RotationError, RotationMatrix,
};
use crate::sample::SensorSample;
use crate::STANDARD_GRAVITY;

pub const ACCEL_LOW_PASS_HZ: f64 = 50.0;
pub const GYRO_BAND_LOW_HZ: f64 = 0.002;
pub const GYRO_BAND_HIGH_HZ: f64 = 50.0;

/// Default accelerometer weight per step at [`DEFAULT_ALPHA_REF_RATE`].
pub const DEFAULT_SLERP_ALPHA: f64 = 0.02;
pub const DEFAULT_ALPHA_REF_RATE: f64 = 100.0;

/// Samples whose `| |a| − g |` exceeds this fraction of g are flagged dynamic.
pub const DYNAMIC_ACCEL_FRACTION: f64 = 0.3;
/// A timestamp step longer than this many nominal periods is flagged as a gap.
pub const GAP_PERIODS: f64 = 3.0;
const ORTHONORMALIZE_EVERY: u32 = 1000;
/// Relative tolerance between calibration and configured sample rates.
const RATE_MISMATCH_TOL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error("stream error at t = {t}: {reason}")]
    Stream { t: f64, reason: String },
    #[error(transparent)]
    Rotation(#[from] RotationError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    pub accel_filter: FilterSpec,
    pub gyro_filter: FilterSpec,
    /// Accelerometer weight in `[0, 1]` for one step at `alpha_ref_rate`.
    pub slerp_alpha: f64,
    pub alpha_ref_rate: f64,
    pub sample_rate: f64,
}

impl FusionConfig {
    /// Default pipeline for a stream sampled at `sample_rate` Hz.
    pub fn for_rate(sample_rate: f64) -> Self {
        Self {
            accel_filter: FilterSpec::low_pass(ACCEL_LOW_PASS_HZ, sample_rate),
            gyro_filter: FilterSpec::band_pass(GYRO_BAND_LOW_HZ, GYRO_BAND_HIGH_HZ, sample_rate),
            slerp_alpha: DEFAULT_SLERP_ALPHA,
            alpha_ref_rate: DEFAULT_ALPHA_REF_RATE,
            sample_rate,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.slerp_alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        if !(self.slerp_alpha >= 0.0 && self.slerp_alpha <= 1.0) {
            return Err(FusionError::Config(format!(
                "slerp_alpha must lie in [0, 1], got {}",
                self.slerp_alpha
            )));
        }
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(FusionError::Config(format!(
                "sample_rate must be positive, got {}",
                self.sample_rate
            )));
        }
        if !(self.alpha_ref_rate.is_finite() && self.alpha_ref_rate > 0.0) {
            return Err(FusionError::Config(format!(
                "alpha_ref_rate must be positive, got {}",
                self.alpha_ref_rate
            )));
        }
        for spec in [&self.accel_filter, &self.gyro_filter] {
            if spec.sample_rate != self.sample_rate {
                return Err(FusionError::Config(format!(
                    "filter designed for {} Hz but stream is {} Hz",
                    spec.sample_rate, self.sample_rate
                )));
            }
        }
        Ok(())
    }

    /// Accelerometer weight for a step of `dt` seconds:
    /// `1 − (1 − α)^(dt · f_ref)`.
    pub fn alpha_for_dt(&self, dt: f64) -> f64 {
        1.0 - (1.0 - self.slerp_alpha).powf(dt * self.alpha_ref_rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SampleFlags {
    /// The accelerometer could not define gravity; the step was gyro-only.
    pub invalid_gravity: bool,
    /// Specific-force magnitude far from g (linear acceleration present).
    pub dynamic: bool,
    /// Time step longer than [`GAP_PERIODS`] nominal periods.
    pub gap: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElevationSample {
    pub t: f64,
    /// Radians, in `[0, π]`.
    pub elevation: f64,
    pub rotation: RotationMatrix,
    pub flags: SampleFlags,
}

#[derive(Debug, Clone)]
pub struct FusionState {
    config: FusionConfig,
    accel_filter: FilterState,
    gyro_filter: FilterState,
    gyro_bias: Vector3<f64>,
    rotation: RotationMatrix,
    v0: Vector3<f64>,
    last_t: Option<f64>,
    steps_since_orthonormalize: u32,
}

impl FusionState {
    pub fn init(config: &FusionConfig, calib: &CalibrationResult) -> Result<Self, FusionError> {
        config.validate()?;
        let calib_rate = calib.stats.sample_rate;
        if (calib_rate - config.sample_rate).abs() > RATE_MISMATCH_TOL * config.sample_rate {
            return Err(FusionError::Config(format!(
                "calibration window sampled at {calib_rate:.3} Hz, pipeline configured for {} Hz",
                config.sample_rate
            )));
        }
        let mut accel_filter = FilterState::from_spec(&config.accel_filter)?;
        let mut gyro_filter = FilterState::from_spec(&config.gyro_filter)?;
        // the stream continues from the still window
        accel_filter.precharge(calib.stats.accel_mean);
        gyro_filter.precharge(calib.stats.gyro_mean - calib.gyro_bias);
        Ok(Self {
            config: *config,
            accel_filter,
            gyro_filter,
            gyro_bias: calib.gyro_bias,
            rotation: calib.r0,
            v0: calib.v0,
            last_t: None,
            steps_since_orthonormalize: 0,
        })
    }

    pub fn config(&self) -> &FusionConfig {
        &self.config
    }

    pub fn rotation(&self) -> &RotationMatrix {
        &self.rotation
    }

    pub fn v0(&self) -> &Vector3<f64> {
        &self.v0
    }

    pub fn gyro_bias(&self) -> &Vector3<f64> {
        &self.gyro_bias
    }

    pub fn elevation(&self) -> f64 {
        elevation_from_rotation(&self.rotation, &self.v0)
    }

    pub fn step(&mut self, s: &SensorSample) -> Result<ElevationSample, FusionError> {
        if !s.is_finite() {
            return Err(FusionError::Stream {
                t: s.t,
                reason: "non-finite sample".into(),
            });
        }
        let nominal_dt = 1.0 / self.config.sample_rate;
        let dt = match self.last_t {
            Some(prev) if s.t <= prev => {
                return Err(FusionError::Stream {
                    t: s.t,
                    reason: format!("timestamp not after previous sample at {prev}"),
                })
            }
            Some(prev) => s.t - prev,
            None => nominal_dt,
        };
        let mut flags = SampleFlags {
            gap: dt > GAP_PERIODS * nominal_dt,
            ..SampleFlags::default()
        };

        let accel = self.accel_filter.step(s.accel);
        let gyro = self.gyro_filter.step(s.gyro - self.gyro_bias);
        flags.dynamic = (accel.norm() - STANDARD_GRAVITY).abs() > DYNAMIC_ACCEL_FRACTION * STANDARD_GRAVITY;

        let r_gyr = integrate_gyro(&self.rotation, &gyro, dt);
        let (rz_gyr, rxy_gyr) = decompose_z_xy(&r_gyr);

        let fused_swing = match orientation_from_accel(&accel) {
            Ok(r_acc) => {
                let (_rz_acc, rxy_acc) = decompose_z_xy(&r_acc);
                let q = slerp(
                    &quat_from_matrix(&rxy_gyr)?,
                    &quat_from_matrix(&rxy_acc)?,
                    self.config.alpha_for_dt(dt),
                );
                matrix_from_quat(&q)
            }
            Err(_) => {
                flags.invalid_gravity = true;
                rxy_gyr
            }
        };

        let mut rotation = rz_gyr * fused_swing;
        self.steps_since_orthonormalize += 1;
        if self.steps_since_orthonormalize >= ORTHONORMALIZE_EVERY {
            rotation = rotation.orthonormalized();
            self.steps_since_orthonormalize = 0;
        }
        self.rotation = rotation;
        self.last_t = Some(s.t);

        Ok(ElevationSample {
            t: s.t,
            elevation: elevation_from_rotation(&rotation, &self.v0),
            rotation,
            flags,
        })
    }
}

/// Calibrates on `calib_window`, then folds [`FusionState::step`] over `stream`.
pub fn run(
    config: &FusionConfig,
    calib_config: &CalibrationConfig,
    calib_window: &[SensorSample],
    stream: &[SensorSample],
) -> Result<Vec<ElevationSample>, FusionError> {
    let calib = calibrate(calib_window, calib_config)?;
    let mut state = FusionState::init(config, &calib)?;
    stream.iter().map(|s| state.step(s)).collect()
}

/// Splits a recording into its leading calibration window (`t − t₀ <
/// window`) and the remainder.
pub fn split_calibration(samples: &[SensorSample], window: f64) -> (&[SensorSample], &[SensorSample]) {
    let Some(first) = samples.first() else {
        return (samples, samples);
    };
    let t0 = first.t;
    // slack for timestamps that went through a text file
    let cut = samples
        .iter()
        .position(|s| s.t - t0 >= window - 1e-6)
        .unwrap_or(samples.len());
    samples.split_at(cut)
}
