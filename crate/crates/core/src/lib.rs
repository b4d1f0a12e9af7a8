//! Arm (segment) elevation estimation from 3-axis accelerometer and gyroscope
//! data.
//!
//! The pipeline filters both streams, builds one orientation estimate from
//! gravity and one from gyro integration, splits each into a world-Z twist and
//! a horizontal-axis swing, blends the swings with Slerp and keeps the gyro's
//! twist. Elevation is the tilt of the calibrated vertical axis.
//!
//! Alongside the estimator the crate ships a synthetic motion simulator and
//! the validation statistics (cross-correlation, RMSE, average absolute error)
//! used to assess it, plus the `armelev` command line tool.

pub mod calibration;
pub mod cli;
pub mod csvio;
pub mod filters;
pub mod fusion;
pub mod metrics;
pub mod rotmath;
pub mod sample;
pub mod simulator;
pub mod sweep;

pub use calibration::{calibrate, orientation_from_accel, CalibrationConfig, CalibrationResult};
pub use fusion::{run, ElevationSample, FusionConfig, FusionState};
pub use rotmath::{Quaternion, RotationMatrix, TiltTorsion};
pub use sample::SensorSample;

/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.80665;
