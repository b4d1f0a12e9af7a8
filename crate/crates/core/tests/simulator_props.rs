use std::f64::consts::PI;

use armelev::rotmath::{elevation_from_rotation, integrate_gyro};
use armelev::simulator::{synthesize_imu, trajectory, MotionProfile, NoiseModel, QUASI_STATIC_TASKS};
use armelev::STANDARD_GRAVITY;
use nalgebra::Vector3;

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[test]
fn noise_statistics_match_model() {
    let mut p = MotionProfile::task(2).unwrap().with_duration(1.0);
    p.prelude_still = 150.0;
    let truth = trajectory(&p, 100.0).unwrap();
    let noise = NoiseModel::default().with_seed(9);
    let imu = synthesize_imu(&truth, &noise);
    let rest = &imu[..truth.prelude_samples];
    assert!(rest.len() >= 10_000);
    let g_sensor = truth.rest.transpose().apply(&Vector3::new(0.0, 0.0, STANDARD_GRAVITY));
    for axis in 0..3 {
        let a: Vec<f64> = rest.iter().map(|s| s.accel[axis] - g_sensor[axis]).collect();
        let w: Vec<f64> = rest.iter().map(|s| s.gyro[axis]).collect();
        assert!((std_dev(&a) / noise.accel_noise_sigma - 1.0).abs() < 0.05);
        assert!((std_dev(&w) / noise.gyro_noise_sigma - 1.0).abs() < 0.05);
        let mean_w = w.iter().sum::<f64>() / w.len() as f64;
        assert!((mean_w - noise.gyro_bias[axis]).abs() < 4.0 * noise.gyro_noise_sigma / (w.len() as f64).sqrt());
    }
}

#[test]
fn ideal_gyro_integrates_back_to_truth() {
    for task in [1u8, 3, 5, 8, 10] {
        for rate in [100.0, 500.0] {
            let truth = trajectory(&MotionProfile::task(task).unwrap().with_duration(60.0), rate).unwrap();
            let imu = synthesize_imu(&truth, &NoiseModel::ideal());
            let mut r = truth.rest;
            let dt = 1.0 / rate;
            for (s, tr) in imu[truth.prelude_samples..].iter().zip(truth.all_samples()) {
                r = integrate_gyro(&r, &s.gyro, dt);
                assert!((s.t - tr.t).abs() < 1e-9);
            }
            let last = truth.samples.last().unwrap();
            let err = r.angle_to(&last.rotation).to_degrees();
            assert!(err < 0.1, "task {task} at {rate} Hz: {err}°");
        }
    }
}

#[test]
fn quasi_static_tasks_stay_within_two_degrees() {
    for task in QUASI_STATIC_TASKS {
        for rate in [100.0, 500.0] {
            let truth = trajectory(&MotionProfile::task(task).unwrap(), rate).unwrap();
            let (lo, hi) = truth
                .samples
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), s| (l.min(s.elevation), h.max(s.elevation)));
            assert!((hi - lo).to_degrees() < 2.0, "task {task}: {}", (hi - lo).to_degrees());
        }
    }
}

#[test]
fn stored_elevation_is_definitional() {
    for task in 1..=10u8 {
        let truth = trajectory(&MotionProfile::task(task).unwrap().with_duration(5.0), 100.0).unwrap();
        for s in truth.all_samples() {
            assert!((elevation_from_rotation(&s.rotation, &truth.v0) - s.elevation).abs() <= 1e-12);
        }
    }
}

#[test]
fn raised_cosine_endpoints() {
    let truth = trajectory(&MotionProfile::task(1).unwrap(), 100.0).unwrap();
    let t0 = truth.motion_start();
    assert!(truth.samples[0].elevation.abs() < 1e-12);
    let half = truth.samples.iter().find(|s| (s.t - t0 - 0.5).abs() < 1e-9).unwrap();
    assert!((half.elevation - PI / 2.0).abs() < 1e-9);
    let truth2 = trajectory(&MotionProfile::task(2).unwrap(), 100.0).unwrap();
    assert!(truth2.samples.iter().all(|s| (s.elevation - PI / 2.0).abs() < 1e-9));
}

#[test]
fn static_ideal_stream_is_exact() {
    let truth = trajectory(&MotionProfile::task(1).unwrap().with_duration(1.0), 100.0).unwrap();
    let imu = synthesize_imu(&truth, &NoiseModel::ideal());
    let g_sensor = truth.rest.transpose().apply(&Vector3::new(0.0, 0.0, STANDARD_GRAVITY));
    for s in &imu[..truth.prelude_samples] {
        assert_eq!(s.gyro, Vector3::zeros());
        assert!((s.accel - g_sensor).amax() < 1e-12);
    }
}

#[test]
fn seeded_streams_are_reproducible() {
    let truth = trajectory(&MotionProfile::task(6).unwrap().with_duration(3.0), 500.0).unwrap();
    let a = synthesize_imu(&truth, &NoiseModel::default().with_seed(3));
    let b = synthesize_imu(&truth, &NoiseModel::default().with_seed(3));
    let c = synthesize_imu(&truth, &NoiseModel::default().with_seed(4));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn sample_counts() {
    let truth = trajectory(&MotionProfile::task(1).unwrap(), 100.0).unwrap();
    let imu = synthesize_imu(&truth, &NoiseModel::default());
    assert_eq!(imu.len(), 100 * (30 + 2));
    assert_eq!(truth.samples.len(), 3000);
    let dt: Vec<f64> = imu.windows(2).map(|w| w[1].t - w[0].t).collect();
    assert!(dt.iter().all(|d| (d - 0.01).abs() < 1e-9));
}

#[test]
fn unknown_task_is_rejected() {
    assert!(MotionProfile::task(0).is_err());
    assert!(MotionProfile::task(11).is_err());
}
