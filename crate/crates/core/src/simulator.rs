//! Synthetic ground truth for the ten validation tasks and an inverse sensor
//! model turning it into IMU streams.
//!
//! World frame: X forward, Y left, Z up. The arm hangs along −Z in the
//! anatomical pose; `R_arm` rotates the arm from that pose. The sensor sits
//! `lever_arm` metres down the arm and is mounted with a fixed rotation, so
//! the sensor orientation is `R_true = R_arm · mounting`.
//!
//! A recording is laid out as
//! `[still prelude | lead-in from rest to the task's start pose | task motion]`.
//! Only the task motion is part of the validation reference.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::rotmath::{elevation_from_rotation, slerp, quat_from_matrix, matrix_from_quat, RotationMatrix};
use crate::sample::SensorSample;
use crate::STANDARD_GRAVITY;

pub const TASK_COUNT: u8 = 10;

/// Tasks whose elevation stays (nearly) constant.
pub const QUASI_STATIC_TASKS: [u8; 3] = [2, 5, 7];
pub const SLOW_TASKS: [u8; 7] = [1, 2, 4, 5, 7, 8, 9];
pub const FAST_TASKS: [u8; 3] = [3, 6, 10];

pub const DEFAULT_PRELUDE: f64 = 2.0;
const DEFAULT_DURATION: f64 = 30.0;
const DEFAULT_LEAD_IN: f64 = 1.5;
const DEFAULT_LEVER_ARM: f64 = 0.25;
/// Second-difference step for the sensor's linear acceleration.
const ACCEL_FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("unknown task id {0} (expected 1..=10)")]
    UnknownTask(u8),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionPlane {
    Flexion,
    Abduction,
    Compound,
}

/// Parameterized task trajectory.
///
/// `amplitude` and `frequency` are interpreted per task:
/// * 1, 3, 4, 6: elevation swing 0 → amplitude → 0 at `frequency`;
/// * 2, 5: twist about the arm axis (0 → amplitude → 0) while held at `hold_elevation`;
/// * 7: twist of ±amplitude while held at `hold_elevation` with a ±0.5° wobble;
/// * 8, 9: Z figures per second; amplitude is the Z half-width angle;
/// * 10: ±amplitude throw bursts of `burst_duration` around `hold_elevation`,
///   `repetitions` times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionProfile {
    pub task_id: u8,
    pub amplitude: f64,
    pub frequency: f64,
    pub duration: f64,
    pub plane: MotionPlane,
    pub prelude_still: f64,
    pub lead_in: f64,
    pub hold_elevation: f64,
    pub burst_duration: f64,
    pub repetitions: u32,
    /// Distance (m) from the shoulder pivot to the sensor; 0 gives pure rotation.
    pub lever_arm: f64,
    pub mounting: RotationMatrix,
}

fn raised_cosine(phase: f64) -> f64 {
    0.5 * (1.0 - phase.cos())
}

fn ease(u: f64) -> f64 {
    raised_cosine(PI * u.clamp(0.0, 1.0))
}

/// Sensor +X along the arm pointing distally, Z lateral.
fn default_mounting() -> RotationMatrix {
    RotationMatrix::rot_y(PI / 2.0)
}

impl MotionProfile {
    pub fn task(task_id: u8) -> Result<Self, SimulationError> {
        let base = Self {
            task_id,
            amplitude: 90f64.to_radians(),
            frequency: 1.0,
            duration: DEFAULT_DURATION,
            plane: MotionPlane::Flexion,
            prelude_still: DEFAULT_PRELUDE,
            lead_in: 0.0,
            hold_elevation: 0.0,
            burst_duration: 0.0,
            repetitions: 0,
            lever_arm: DEFAULT_LEVER_ARM,
            mounting: default_mounting(),
        };
        let p = match task_id {
            1 => base,
            3 => Self { frequency: 3.0, ..base },
            4 => Self { plane: MotionPlane::Abduction, ..base },
            6 => Self {
                plane: MotionPlane::Abduction,
                frequency: 3.0,
                ..base
            },
            2 | 5 => Self {
                plane: if task_id == 2 { MotionPlane::Flexion } else { MotionPlane::Abduction },
                hold_elevation: 90f64.to_radians(),
                lead_in: DEFAULT_LEAD_IN,
                ..base
            },
            7 => Self {
                amplitude: 20f64.to_radians(),
                frequency: 0.25,
                hold_elevation: 60f64.to_radians(),
                lead_in: DEFAULT_LEAD_IN,
                ..base
            },
            8 | 9 => Self {
                plane: MotionPlane::Compound,
                amplitude: 25f64.to_radians(),
                frequency: 0.4,
                lead_in: DEFAULT_LEAD_IN,
                ..base
            },
            10 => Self {
                plane: MotionPlane::Abduction,
                amplitude: 60f64.to_radians(),
                frequency: 9.0 / DEFAULT_DURATION,
                hold_elevation: 90f64.to_radians(),
                burst_duration: 0.3,
                repetitions: 9,
                lead_in: DEFAULT_LEAD_IN,
                ..base
            },
            other => return Err(SimulationError::UnknownTask(other)),
        };
        Ok(p)
    }

    /// Same motion with pure rotation about the sensor (no linear acceleration).
    pub fn rigid(self) -> Self {
        Self { lever_arm: 0.0, ..self }
    }

    pub fn with_duration(self, duration: f64) -> Self {
        Self { duration, ..self }
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        if !(1..=TASK_COUNT).contains(&self.task_id) {
            return Err(SimulationError::UnknownTask(self.task_id));
        }
        let bad = |what: &str| Err(SimulationError::InvalidProfile(what.to_string()));
        if !(self.frequency.is_finite() && self.frequency > 0.0) {
            return bad("frequency must be positive");
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad("duration must be positive");
        }
        if !(self.prelude_still.is_finite() && self.prelude_still > 0.0) || !(self.lead_in >= 0.0) {
            return bad("prelude must be positive and lead-in non-negative");
        }
        if !(self.lever_arm >= 0.0) {
            return bad("lever arm must be non-negative");
        }
        if self.task_id == 10 && (self.repetitions == 0 || !(self.burst_duration > 0.0)) {
            return bad("throw task needs repetitions and a burst duration");
        }
        Ok(())
    }

    /// Sensor-frame axis pointing up in the anatomical pose.
    pub fn v0(&self) -> Vector3<f64> {
        self.mounting.transpose().apply(&Vector3::z())
    }

    fn elevation_axis_rotation(&self, elevation: f64) -> RotationMatrix {
        match self.plane {
            MotionPlane::Abduction => RotationMatrix::rot_x(-elevation),
            // flexion swings the arm forward (+X)
            _ => RotationMatrix::rot_y(-elevation),
        }
    }

    /// Arm rotation at task time `tau` (seconds since the motion started).
    fn arm_pose(&self, tau: f64) -> RotationMatrix {
        let tau = tau.max(0.0);
        let w = 2.0 * PI * self.frequency;
        match self.task_id {
            1 | 3 | 4 | 6 => self.elevation_axis_rotation(self.amplitude * raised_cosine(w * tau)),
            2 | 5 => {
                // arm axis is body −Z, so twist about body Z
                let twist = self.amplitude * raised_cosine(w * tau);
                self.elevation_axis_rotation(self.hold_elevation) * RotationMatrix::rot_z(twist)
            }
            7 => {
                let wobble = 0.5f64.to_radians() * (w * tau).sin();
                let twist = self.amplitude * (w * tau).sin();
                self.elevation_axis_rotation(self.hold_elevation + wobble) * RotationMatrix::rot_z(twist)
            }
            8 | 9 => self.z_figure_pose(tau),
            10 => self.elevation_axis_rotation(self.hold_elevation + self.throw_offset(tau)),
            _ => RotationMatrix::identity(),
        }
    }

    /// Hand target moving along a Z drawn on a vertical plane one arm-length
    /// ahead; the arm points at the target with no twist.
    fn z_figure_pose(&self, tau: f64) -> RotationMatrix {
        let half_w = self.amplitude.tan();
        let (top, bottom) = (0.0, -0.6);
        let mut corners = [
            (half_w, top),
            (-half_w, top),
            (half_w, bottom),
            (-half_w, bottom),
        ];
        if self.task_id == 9 {
            corners.reverse();
        }
        let segments = 4.0;
        let phase = (tau * self.frequency).fract() * segments;
        let seg = (phase.floor() as usize).min(3);
        let u = ease(phase - seg as f64);
        let from = corners[seg];
        // fourth segment returns to the first corner
        let to = corners[(seg + 1) % 4];
        let y = from.0 + u * (to.0 - from.0);
        let z = from.1 + u * (to.1 - from.1);
        let dir = Vector3::new(1.0, y, z);
        RotationMatrix::between(&-Vector3::z(), &dir)
    }

    fn throw_offset(&self, tau: f64) -> f64 {
        let period = self.duration / self.repetitions as f64;
        let k = (tau / period).floor();
        if k >= self.repetitions as f64 {
            return 0.0;
        }
        let start = k * period + 0.5 * (period - self.burst_duration);
        let u = (tau - start) / self.burst_duration;
        if !(0.0..=1.0).contains(&u) {
            return 0.0;
        }
        // 2·sin³(πu)·cos(πu) peaks at 3√3/8
        let s = (PI * u).sin();
        let shape = 2.0 * s * s * s * (PI * u).cos();
        -self.amplitude * shape / (3.0 * 3f64.sqrt() / 8.0)
    }

    /// Arm rotation at time `t` measured from the end of the prelude,
    /// including the lead-in.
    fn arm_pose_with_lead_in(&self, t: f64) -> RotationMatrix {
        if t <= 0.0 {
            return RotationMatrix::identity();
        }
        if t < self.lead_in {
            let start = quat_from_matrix(&self.arm_pose(0.0)).expect("analytic pose is a rotation");
            let q = slerp(&crate::rotmath::Quaternion::IDENTITY, &start, ease(t / self.lead_in));
            return matrix_from_quat(&q);
        }
        self.arm_pose(t - self.lead_in)
    }

    fn sensor_position(&self, t: f64) -> Vector3<f64> {
        self.arm_pose_with_lead_in(t)
            .apply(&Vector3::new(0.0, 0.0, -self.lever_arm))
    }

    fn linear_accel(&self, t: f64) -> Vector3<f64> {
        if self.lever_arm == 0.0 {
            return Vector3::zeros();
        }
        let h = ACCEL_FD_STEP;
        (self.sensor_position(t + h) - self.sensor_position(t) * 2.0 + self.sensor_position(t - h)) / (h * h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthSample {
    pub t: f64,
    pub rotation: RotationMatrix,
    /// Radians.
    pub elevation: f64,
    /// World-frame linear acceleration of the sensor, m/s².
    pub linear_accel: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub rate: f64,
    pub v0: Vector3<f64>,
    /// Sensor orientation during the still prelude.
    pub rest: RotationMatrix,
    pub prelude_samples: usize,
    pub lead_in: Vec<TruthSample>,
    /// Task motion; the validation reference.
    pub samples: Vec<TruthSample>,
}

impl GroundTruth {
    /// Every post-prelude sample, lead-in first.
    pub fn all_samples(&self) -> impl Iterator<Item = &TruthSample> {
        self.lead_in.iter().chain(self.samples.iter())
    }

    pub fn motion_start(&self) -> f64 {
        self.samples.first().map_or(0.0, |s| s.t)
    }
}

/// Samples the analytic trajectory at `rate` Hz. Stream time `k / rate`
/// starts at the beginning of the prelude.
pub fn trajectory(profile: &MotionProfile, rate: f64) -> Result<GroundTruth, SimulationError> {
    profile.validate()?;
    if !(rate.is_finite() && rate > 0.0) {
        return Err(SimulationError::InvalidProfile(format!("rate must be positive, got {rate}")));
    }
    let n_pre = (profile.prelude_still * rate).round() as usize;
    let n_lead = (profile.lead_in * rate).round() as usize;
    let n_motion = (profile.duration * rate).round() as usize;
    // lead-in snapped to the sample grid so the motion starts on a sample
    let p = MotionProfile {
        lead_in: n_lead as f64 / rate,
        ..*profile
    };
    let v0 = p.v0();

    let sample_at = |k: usize| {
        let rel = (k - n_pre) as f64 / rate;
        let rotation = p.arm_pose_with_lead_in(rel) * p.mounting;
        TruthSample {
            t: k as f64 / rate,
            rotation,
            elevation: elevation_from_rotation(&rotation, &v0),
            linear_accel: p.linear_accel(rel),
        }
    };

    let lead_in = (n_pre..n_pre + n_lead).map(sample_at).collect();
    let samples = (n_pre + n_lead..n_pre + n_lead + n_motion).map(sample_at).collect();
    Ok(GroundTruth {
        rate,
        v0,
        rest: profile.mounting,
        prelude_samples: n_pre,
        lead_in,
        samples,
    })
}

/// Sensor imperfections added by [`synthesize_imu`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub accel_noise_sigma: f64,
    pub gyro_noise_sigma: f64,
    pub gyro_bias: Vector3<f64>,
    /// Linear bias growth, rad/s per second.
    pub gyro_bias_drift: Vector3<f64>,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            accel_noise_sigma: 0.02 * STANDARD_GRAVITY,
            gyro_noise_sigma: 0.005,
            gyro_bias: Vector3::repeat(0.01),
            gyro_bias_drift: Vector3::zeros(),
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn ideal() -> Self {
        Self {
            accel_noise_sigma: 0.0,
            gyro_noise_sigma: 0.0,
            gyro_bias: Vector3::zeros(),
            gyro_bias_drift: Vector3::zeros(),
            seed: 0,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Body-frame angular velocity that carries `prev` onto `next` in `dt`.
fn body_rate(prev: &RotationMatrix, next: &RotationMatrix, dt: f64) -> Vector3<f64> {
    if prev == next {
        return Vector3::zeros();
    }
    (prev.transpose() * *next).log() / dt
}

/// Inverse sensor model.
///
/// Specific force is `R_trueᵀ (g ẑ + p̈)`; angular velocity at sample k is the
/// log-map rate from sample k−1 to k, so exact integration of the ideal stream
/// reproduces the truth. Noise draws happen in a fixed order from a ChaCha8
/// generator seeded with `noise.seed`.
pub fn synthesize_imu(truth: &GroundTruth, noise: &NoiseModel) -> Vec<SensorSample> {
    let rate = truth.rate;
    let dt = 1.0 / rate;
    let gravity = Vector3::new(0.0, 0.0, STANDARD_GRAVITY);
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let accel_noise = Normal::new(0.0, noise.accel_noise_sigma.max(0.0)).expect("finite sigma");
    let gyro_noise = Normal::new(0.0, noise.gyro_noise_sigma.max(0.0)).expect("finite sigma");

    let prelude = (0..truth.prelude_samples).map(|k| (k as f64 / rate, truth.rest, Vector3::zeros()));
    let moving = truth
        .all_samples()
        .map(|s| (s.t, s.rotation, s.linear_accel));

    let mut prev = truth.rest;
    let mut out = Vec::with_capacity(truth.prelude_samples + truth.lead_in.len() + truth.samples.len());
    for (t, rotation, lin) in prelude.chain(moving) {
        let accel_clean = rotation.transpose().apply(&(gravity + lin));
        let gyro_clean = body_rate(&prev, &rotation, dt);
        prev = rotation;

        let na = Vector3::from_fn(|_, _| accel_noise.sample(&mut rng));
        let ng = Vector3::from_fn(|_, _| gyro_noise.sample(&mut rng));
        let bias = noise.gyro_bias + noise.gyro_bias_drift * t;
        out.push(SensorSample::new(t, accel_clean + na, gyro_clean + bias + ng));
    }
    out
}
