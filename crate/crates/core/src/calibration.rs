//! Static calibration: gyro bias from the mean angular velocity of a still
//! window, and the initial orientation / vertical reference from gravity.

use nalgebra::Vector3;
use thiserror::Error;

use crate::rotmath::RotationMatrix;
use crate::sample::SensorSample;
use crate::STANDARD_GRAVITY;

/// Accelerations weaker than this fraction of g cannot define a tilt.
pub const MIN_GRAVITY_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("calibration window too short: {duration:.3} s of {required:.3} s required ({samples} samples)")]
    InsufficientData {
        duration: f64,
        required: f64,
        samples: usize,
    },
    #[error("sensor not still during calibration: gyro std [{:.4}, {:.4}, {:.4}] rad/s exceeds {threshold} rad/s", gyro_std.x, gyro_std.y, gyro_std.z)]
    NotStill {
        gyro_std: Vector3<f64>,
        threshold: f64,
    },
    #[error("acceleration magnitude {norm:.4} m/s² is too small to define gravity")]
    InvalidGravity { norm: f64 },
    #[error("calibration timestamps not strictly increasing at sample {index}")]
    NonMonotonic { index: usize },
    #[error("non-finite value in calibration sample {index}")]
    NonFinite { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationConfig {
    /// Minimum window duration in seconds.
    pub min_duration: f64,
    /// Stillness gate on the per-axis gyro standard deviation, rad/s.
    pub max_gyro_std: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            min_duration: 2.0,
            max_gyro_std: 0.05,
        }
    }
}

/// Per-axis mean and (population) standard deviation over the window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub samples: usize,
    pub duration: f64,
    pub sample_rate: f64,
    pub end_time: f64,
    pub accel_mean: Vector3<f64>,
    pub accel_std: Vector3<f64>,
    pub gyro_mean: Vector3<f64>,
    pub gyro_std: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationResult {
    pub gyro_bias: Vector3<f64>,
    /// Initial sensor-to-world orientation (yaw fixed to zero).
    pub r0: RotationMatrix,
    /// Sensor-frame unit axis that pointed up (against gravity) at rest.
    pub v0: Vector3<f64>,
    pub stats: WindowStats,
}

fn mean_std<'a>(it: impl Iterator<Item = &'a Vector3<f64>> + Clone, n: f64) -> (Vector3<f64>, Vector3<f64>) {
    let mean = it.clone().fold(Vector3::zeros(), |acc, v| acc + v) / n;
    let var = it.fold(Vector3::zeros(), |acc, v| {
        let d = v - mean;
        acc + d.component_mul(&d)
    }) / n;
    (mean, var.map(f64::sqrt))
}

/// Tilt-only orientation from a gravity-dominated specific-force reading:
/// roll = atan2(a_y, a_z), pitch = atan2(−a_x, √(a_y² + a_z²)), yaw = 0,
/// composed as `R = Ry(pitch) · Rx(roll)`.
///
/// Only the direction of `a` matters; rotation about world Z is unobservable
/// and always returned as zero.
pub fn orientation_from_accel(a: &Vector3<f64>) -> Result<RotationMatrix, CalibrationError> {
    let norm = a.norm();
    if !norm.is_finite() || norm <= MIN_GRAVITY_FRACTION * STANDARD_GRAVITY {
        return Err(CalibrationError::InvalidGravity { norm });
    }
    let roll = a.y.atan2(a.z);
    let pitch = (-a.x).atan2(a.y.hypot(a.z));
    Ok(RotationMatrix::rot_y(pitch) * RotationMatrix::rot_x(roll))
}

/// Processes a still window.
///
/// Window duration is `N · mean(dt)`, i.e. each sample accounts for one
/// sampling period.
pub fn calibrate(
    samples: &[SensorSample],
    config: &CalibrationConfig,
) -> Result<CalibrationResult, CalibrationError> {
    for (i, s) in samples.iter().enumerate() {
        if !s.is_finite() {
            return Err(CalibrationError::NonFinite { index: i });
        }
        if i > 0 && s.t <= samples[i - 1].t {
            return Err(CalibrationError::NonMonotonic { index: i });
        }
    }
    let n = samples.len();
    let duration = if n < 2 {
        0.0
    } else {
        let span = samples[n - 1].t - samples[0].t;
        span * n as f64 / (n - 1) as f64
    };
    // relative slack absorbs timestamp rounding in files
    if n < 2 || duration < config.min_duration * (1.0 - 1e-9) {
        return Err(CalibrationError::InsufficientData {
            duration,
            required: config.min_duration,
            samples: n,
        });
    }

    let nf = n as f64;
    let (accel_mean, accel_std) = mean_std(samples.iter().map(|s| &s.accel), nf);
    let (gyro_mean, gyro_std) = mean_std(samples.iter().map(|s| &s.gyro), nf);
    let stats = WindowStats {
        samples: n,
        duration,
        sample_rate: nf / duration,
        end_time: samples[n - 1].t,
        accel_mean,
        accel_std,
        gyro_mean,
        gyro_std,
    };

    if gyro_std.amax() > config.max_gyro_std {
        return Err(CalibrationError::NotStill {
            gyro_std,
            threshold: config.max_gyro_std,
        });
    }
    let r0 = orientation_from_accel(&accel_mean)?;
    Ok(CalibrationResult {
        gyro_bias: gyro_mean,
        r0,
        v0: accel_mean.normalize(),
        stats,
    })
}
