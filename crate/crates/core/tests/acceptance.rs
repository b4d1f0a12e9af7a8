//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::sync::OnceLock;
use std::time::Instant;

use armelev::calibration::{calibrate, CalibrationConfig};
use armelev::filters::{design, FilterSpec, FilterState, FirstOrderSection};
use armelev::fusion::{run, FusionConfig};
use armelev::metrics::{
    avg_abs_error, cross_correlation, evaluate_pair, resample, rmse, ElevationTrace, TaskEntry,
    TaskPair,
};
use armelev::rotmath::{
    decompose_z_xy, elevation_from_rotation, matrix_from_quat, quat_from_matrix, tilt_torsion_from_rotation,
    Quaternion,
};
use armelev::simulator::{trajectory, MotionProfile, FAST_TASKS, QUASI_STATIC_TASKS, SLOW_TASKS};
use armelev::sweep::{run_sweep, simulate_and_fuse, RunSettings, SweepConfig, SweepReport};
use armelev::{SensorSample, STANDARD_GRAVITY};
use nalgebra::{Complex, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const IDEAL_RMSE_DEG: f64 = 1.0;
const IDEAL_R: f64 = 0.999;
const IDEAL_RUNTIME_S: f64 = 1.0;
const SLOW_TASK_RMSE_DEG: f64 = 5.0;
const FAST_TASK_RMSE_DEG: f64 = 15.0;
const DYNAMIC_R: f64 = 0.90;
const DRIFT_GYRO_ONLY_MIN_DEG: f64 = 45.0;
const DRIFT_FUSED_MAX_DEG: f64 = 2.0;
const QUASI_STATIC_P2P_DEG: f64 = 2.0;
const RATE_AGREEMENT_RMSE_DEG: f64 = 0.5;
const NOISY_SEEDS: u32 = 5;
/// Rate of the reference low-cost sensor column.
const JUDGED_RATE: f64 = 500.0;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn deg(x: f64) -> f64 {
    x.to_degrees()
}

fn noisy_sweep() -> &'static SweepReport {
    static REPORT: OnceLock<SweepReport> = OnceLock::new();
    REPORT.get_or_init(|| {
        run_sweep(&SweepConfig {
            seeds: NOISY_SEEDS,
            ..SweepConfig::default()
        })
        .expect("default sweep runs")
    })
}

fn ideal_entry(task: u8, rate: f64) -> TaskEntry {
    let settings = RunSettings::ideal();
    let traces = simulate_and_fuse(task, rate, 0, &settings).expect("ideal run");
    evaluate_pair(
        &TaskPair {
            task: task.to_string(),
            estimate: traces.estimate,
            reference: traces.reference,
        },
        &settings.report,
    )
    .expect("ideal evaluation")
}

fn criterion_1() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for task in [1u8, 4] {
        let start = Instant::now();
        let e = ideal_entry(task, 100.0);
        let secs = start.elapsed().as_secs_f64();
        let r = e.r.unwrap_or(f64::NAN);
        pass &= deg(e.rmse) <= IDEAL_RMSE_DEG && r >= IDEAL_R && secs < IDEAL_RUNTIME_S;
        parts.push(format!("task {task}: rmse {:.3}°, r {r:.5}, {secs:.2} s", deg(e.rmse)));
    }
    verdict(pass, parts.join("; "))
}

fn criterion_2() -> Verdict {
    let rep = noisy_sweep();
    let mut pass = true;
    let mut parts = Vec::new();
    for (task, limit) in [(1u8, SLOW_TASK_RMSE_DEG), (4, SLOW_TASK_RMSE_DEG), (3, FAST_TASK_RMSE_DEG), (6, FAST_TASK_RMSE_DEG)] {
        let a = rep.aggregate(task, JUDGED_RATE).expect("task aggregated");
        pass &= a.rmse_deg.mean <= limit;
        parts.push(format!("t{task} rmse {:.2}° (≤{limit})", a.rmse_deg.mean));
    }
    let mut worst: Option<(u8, f64)> = None;
    for task in (1..=10u8).filter(|t| !QUASI_STATIC_TASKS.contains(t)) {
        let r = rep
            .aggregate(task, JUDGED_RATE)
            .and_then(|a| a.r)
            .map_or(f64::NAN, |m| m.mean);
        if !(r >= DYNAMIC_R) {
            pass = false;
        }
        if worst.is_none_or(|(_, w)| r < w) {
            worst = Some((task, r));
        }
    }
    if let Some((t, r)) = worst {
        parts.push(format!("min dynamic r {r:.3} (task {t}, ≥{DYNAMIC_R})"));
    }
    let at100: Vec<String> = [1u8, 4, 3, 6]
        .iter()
        .map(|&t| format!("t{t} {:.2}°", rep.aggregate(t, 100.0).unwrap().rmse_deg.mean))
        .collect();
    parts.push(format!("[100 Hz: {}]", at100.join(", ")));
    verdict(pass, format!("{} Hz, {NOISY_SEEDS} seeds: {}", JUDGED_RATE, parts.join("; ")))
}

fn criterion_3() -> Verdict {
    let rep = noisy_sweep();
    let slow = rep.mean_rmse_deg(&SLOW_TASKS, JUDGED_RATE).unwrap();
    let fast = rep.mean_rmse_deg(&FAST_TASKS, JUDGED_RATE).unwrap();
    let slow100 = rep.mean_rmse_deg(&SLOW_TASKS, 100.0).unwrap();
    let fast100 = rep.mean_rmse_deg(&FAST_TASKS, 100.0).unwrap();
    verdict(
        slow < fast,
        format!("{JUDGED_RATE} Hz: slow {slow:.2}° < fast {fast:.2}° [100 Hz: {slow100:.2}° vs {fast100:.2}°]"),
    )
}

/// Static level sensor, calibrated without bias, then 60 s with an
/// uncorrected 1°/s bias about sensor X. Returns the elevation trace.
fn drift_run(alpha: f64) -> Vec<(f64, f64)> {
    let rate = 100.0;
    let a = Vector3::new(0.0, 0.0, STANDARD_GRAVITY);
    let calib: Vec<SensorSample> = (0..200)
        .map(|k| SensorSample::new(k as f64 / rate, a, Vector3::zeros()))
        .collect();
    let bias = Vector3::new(1f64.to_radians(), 0.0, 0.0);
    let stream: Vec<SensorSample> = (200..200 + 6000)
        .map(|k| SensorSample::new(k as f64 / rate, a, bias))
        .collect();
    let config = FusionConfig::for_rate(rate).with_alpha(alpha);
    run(&config, &CalibrationConfig::default(), &calib, &stream)
        .expect("drift run")
        .iter()
        .map(|e| (e.t, e.elevation))
        .collect()
}

fn criterion_4a() -> Verdict {
    let trace = drift_run(0.0);
    let terminal = deg(trace.last().unwrap().1);
    verdict(
        terminal >= DRIFT_GYRO_ONLY_MIN_DEG,
        format!("gyro-only terminal error after 60 s {terminal:.2}° (≥{DRIFT_GYRO_ONLY_MIN_DEG})"),
    )
}

fn criterion_4b() -> Verdict {
    let trace = drift_run(FusionConfig::for_rate(100.0).slerp_alpha);
    let t_end = trace.last().unwrap().0;
    let steady = trace
        .iter()
        .filter(|(t, _)| *t >= t_end - 10.0)
        .map(|(_, e)| deg(*e))
        .fold(0.0, f64::max);
    verdict(
        steady <= DRIFT_FUSED_MAX_DEG,
        format!("default fusion steady-state error (max over last 10 s) {steady:.3}° (≤{DRIFT_FUSED_MAX_DEG})"),
    )
}

fn criterion_5() -> Verdict {
    let rep = noisy_sweep();
    let mut pass = true;
    let mut parts = Vec::new();
    for task in QUASI_STATIC_TASKS {
        for rate in [100.0, 500.0] {
            let truth = trajectory(&MotionProfile::task(task).unwrap(), rate).unwrap();
            let (lo, hi) = truth
                .samples
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), s| (l.min(s.elevation), h.max(s.elevation)));
            let p2p = deg(hi - lo);
            let a = rep.aggregate(task, rate).unwrap();
            let ok = p2p < QUASI_STATIC_P2P_DEG && a.r.is_none() && a.rmse_deg.mean.is_finite();
            pass &= ok;
            if rate == 500.0 {
                parts.push(format!(
                    "t{task}: p2p {p2p:.2}°, r {}, rmse {:.2}°",
                    a.r.map_or("NA".to_string(), |m| format!("{:.3}", m.mean)),
                    a.rmse_deg.mean
                ));
            }
        }
    }
    verdict(pass, parts.join("; "))
}

fn random_quaternion(rng: &mut ChaCha8Rng) -> Quaternion {
    let n = Normal::new(0.0, 1.0).unwrap();
    Quaternion::new(n.sample(rng), n.sample(rng), n.sample(rng), n.sample(rng)).unwrap()
}

fn check_rotmath(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let z = Vector3::z();
    for i in 0..10_000 {
        let q = random_quaternion(rng);
        let r = matrix_from_quat(&q);
        let back = quat_from_matrix(&r).map_err(|e| e.to_string())?;
        let qc = q.canonical();
        let d = back
            .to_array()
            .iter()
            .zip(qc.to_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if d > 1e-12 {
            return Err(format!("quaternion round trip {d:e} at case {i}"));
        }
        let (rz, rxy) = decompose_z_xy(&r);
        let recomposed = (rz * rxy).into_matrix() - r.matrix();
        if recomposed.amax() > 1e-12 {
            return Err(format!("decomposition residual {:e}", recomposed.amax()));
        }
        let twist = quat_from_matrix(&rxy).map_err(|e| e.to_string())?.z().abs();
        if twist > 1e-12 {
            return Err(format!("swing twist {twist:e}"));
        }
        let tilt = tilt_torsion_from_rotation(&r).tilt;
        let elev = elevation_from_rotation(&r, &z);
        if (tilt - elev).abs() > 1e-9 {
            return Err(format!("elevation {elev} vs tilt {tilt}"));
        }
        let tt = tilt_torsion_from_rotation(&r).to_rotation();
        if (tt.into_matrix() - r.matrix()).amax() > 1e-9 {
            return Err("tilt-torsion recomposition".into());
        }
    }
    Ok(())
}

fn magnitude(s: &FirstOrderSection, f: f64, fs: f64) -> f64 {
    let zinv = Complex::from_polar(1.0, -2.0 * PI * f / fs);
    ((Complex::new(s.b0, 0.0) + zinv * s.b1) / (Complex::new(1.0, 0.0) + zinv * s.a1)).norm()
}

/// Steady-state gain of a sine at `f` through `filter`, by quadrature fit
/// over whole periods.
fn measured_gain(spec: &FilterSpec, f: f64) -> f64 {
    let fs = spec.sample_rate;
    let mut st = FilterState::from_spec(spec).unwrap();
    st.reset();
    let per = fs / f;
    let settle = (20.0 * per).ceil() as usize;
    let n = (200.0 * per).round() as usize;
    let (mut a, mut b) = (0.0, 0.0);
    for k in 0..settle + n {
        let ph = 2.0 * PI * f * k as f64 / fs;
        let y = st.step(Vector3::repeat(ph.sin())).x;
        if k >= settle {
            a += y * ph.sin();
            b += y * ph.cos();
        }
    }
    2.0 * (a * a + b * b).sqrt() / n as f64
}

fn check_filters() -> Result<(), String> {
    for fs in [100.0, 500.0] {
        let lp = design(&FilterSpec::low_pass(50.0, fs)).map_err(|e| e.to_string())?;
        let bp = design(&FilterSpec::band_pass(0.002, 50.0, fs)).map_err(|e| e.to_string())?;
        if (lp.dc_gain() - 1.0).abs() > 1e-12 || bp.dc_gain().abs() > 1e-12 {
            return Err(format!("DC gains {} / {} at {fs} Hz", lp.dc_gain(), bp.dc_gain()));
        }
        let fc = lp.effective_f_high();
        let g = magnitude(&lp.sections()[0], fc, fs);
        if (g - 0.5f64.sqrt()).abs() > 1e-12 {
            return Err(format!("analytic -3 dB gain {g} at {fc} Hz"));
        }
    }
    for (fc, fs) in [(5.0, 100.0), (50.0, 500.0), (20.0, 500.0)] {
        let g = measured_gain(&FilterSpec::low_pass(fc, fs), fc);
        if (g / 0.5f64.sqrt() - 1.0).abs() > 0.02 {
            return Err(format!("measured gain {g} at cutoff {fc} Hz / {fs} Hz"));
        }
    }
    Ok(())
}

fn check_calibration(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let sigma = 0.005;
    let bias = Vector3::new(0.01, -0.02, 0.005);
    let noise = Normal::new(0.0, sigma).unwrap();
    let rate = 100.0;
    let trials = 200;
    for n in [250usize, 1000, 4000] {
        let (mut sq, mut inside) = (0.0, 0usize);
        for _ in 0..trials {
            let samples: Vec<SensorSample> = (0..n)
                .map(|k| {
                    let w = bias + Vector3::from_fn(|_, _| noise.sample(rng));
                    SensorSample::new(k as f64 / rate, Vector3::new(0.0, 0.0, STANDARD_GRAVITY), w)
                })
                .collect();
            let c = calibrate(&samples, &CalibrationConfig::default()).map_err(|e| e.to_string())?;
            let err = c.gyro_bias - bias;
            sq += err.norm_squared();
            inside += err.iter().filter(|e| e.abs() <= 3.0 * sigma / (n as f64).sqrt()).count();
        }
        let rms = (sq / (3 * trials) as f64).sqrt();
        let ratio = rms * (n as f64).sqrt() / sigma;
        if !(0.85..=1.15).contains(&ratio) {
            return Err(format!("bias RMS·√N/σ = {ratio:.3} at N = {n}"));
        }
        if (inside as f64) < 0.99 * (3 * trials) as f64 {
            return Err(format!("only {inside} of {} axes within 3σ/√N at N = {n}", 3 * trials));
        }
    }
    Ok(())
}

fn brute_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn check_metrics(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let rate = 100.0;
    let trace = |v: Vec<f64>| ElevationTrace::new(v.into_iter().enumerate().map(|(i, x)| (i as f64 / rate, x)).collect(), rate).unwrap();
    for case in 0..200 {
        let n = rng.random_range(40..200);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let max_k = 10i64;
        let mut best = (f64::NEG_INFINITY, 0i64);
        for k in (0..=max_k).flat_map(|k| if k == 0 { vec![0] } else { vec![-k, k] }) {
            let (ea, rb) = if k >= 0 {
                (&a[k as usize..], &b[..n - k as usize])
            } else {
                (&a[..n - (-k) as usize], &b[(-k) as usize..])
            };
            let r = brute_pearson(ea, rb);
            if r > best.0 {
                best = (r, k);
            }
        }
        let c = cross_correlation(&trace(a.clone()), &trace(b.clone()), max_k as f64 / rate).map_err(|e| e.to_string())?;
        if ((c.r - best.0) / best.0.abs().max(1e-300)).abs() > 1e-12 || (c.lag * rate).round() as i64 != best.1 {
            return Err(format!("case {case}: r {} lag {} vs brute {} lag {}", c.r, c.lag, best.0, best.1));
        }
        let e: f64 = (a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n as f64).sqrt();
        let got = rmse(&trace(a), &trace(b)).map_err(|e| e.to_string())?;
        if ((got - e) / e).abs() > 1e-12 {
            return Err(format!("rmse {got} vs brute {e}"));
        }
    }
    for case in 0..10_000 {
        let n = rng.random_range(1..50);
        let scale = 10f64.powf(rng.random_range(-6.0..3.0));
        let a: Vec<f64> = (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        let (ta, tb) = (trace(a), trace(b));
        let r = rmse(&ta, &tb).map_err(|e| e.to_string())?;
        let m = avg_abs_error(&ta, &tb).map_err(|e| e.to_string())?;
        if r < m * (1.0 - 1e-12) {
            return Err(format!("case {case}: rmse {r} < avg abs {m}"));
        }
    }
    Ok(())
}

fn criterion_6() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let checks: [(&str, Result<(), String>); 4] = [
        ("rotmath", check_rotmath(&mut rng)),
        ("filters", check_filters()),
        ("calibration", check_calibration(&mut rng)),
        ("metrics", check_metrics(&mut rng)),
    ];
    let failed: Vec<String> = checks
        .iter()
        .filter_map(|(n, r)| r.as_ref().err().map(|e| format!("{n}: {e}")))
        .collect();
    if failed.is_empty() {
        verdict(true, "rotmath, filters, calibration, metrics property checks hold".into())
    } else {
        verdict(false, failed.join("; "))
    }
}

fn criterion_7() -> Verdict {
    let settings = RunSettings::ideal();
    let a = simulate_and_fuse(1, 100.0, 0, &settings).unwrap().estimate;
    let b = simulate_and_fuse(1, 500.0, 0, &settings).unwrap().estimate;
    let (a0, a1) = a.span().unwrap();
    let (b0, b1) = b.span().unwrap();
    let window = (a0.max(b0), a1.min(b1));
    let ra = resample(&a, 100.0, window).unwrap();
    let rb = resample(&b, 100.0, window).unwrap();
    let e = deg(rmse(&ra, &rb).unwrap());
    verdict(
        e <= RATE_AGREEMENT_RMSE_DEG,
        format!("ideal task 1, 100 Hz vs 500 Hz fused traces differ by {e:.3}° RMSE (≤{RATE_AGREEMENT_RMSE_DEG})"),
    )
}

fn criterion_8() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_armelev");
    let mut outputs = Vec::new();
    for i in 0..2 {
        let json = dir.path().join(format!("sweep{i}.json"));
        let table = dir.path().join(format!("sweep{i}.txt"));
        let out = Command::new(bin)
            .args(["sweep", "--seeds", "3", "--json"])
            .arg(&json)
            .arg("--table")
            .arg(&table)
            .env_remove("ARMELEV_CONFIG")
            .output()
            .expect("run sweep");
        if !out.status.success() {
            return verdict(false, format!("sweep exited with {}", out.status));
        }
        outputs.push((out.stdout, std::fs::read(&json).unwrap(), std::fs::read(&table).unwrap()));
    }
    let same = outputs[0] == outputs[1];
    verdict(
        same,
        format!("two `sweep --seeds 3` runs: JSON {} bytes, table {} bytes, identical = {same}", outputs[0].1.len(), outputs[0].2.len()),
    )
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let criteria: [(&str, &str, fn() -> Verdict); 9] = [
        ("1", "ideal round trip", criterion_1),
        ("2", "noisy comparability", criterion_2),
        ("3", "slow-vs-fast ordering", criterion_3),
        ("4a", "drift: gyro-only error", criterion_4a),
        ("4b", "drift: fused steady state", criterion_4b),
        ("5", "quasi-static convention", criterion_5),
        ("6", "property suites", criterion_6),
        ("7", "rate robustness", criterion_7),
        ("8", "determinism", criterion_8),
    ];
    let mut failures = 0;
    for (id, name, f) in criteria {
        let v = f();
        if !v.pass {
            failures += 1;
        }
        println!("acceptance {id:<2} {:<4} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
