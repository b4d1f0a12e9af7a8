//! Command-line front end: `simulate`, `fuse`, `validate` and `sweep`.
//!
//! Settings come from flags, then from a flat `key = value` file
//! (`--config`, or the path in `ARMELEV_CONFIG`), then from built-in defaults.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;
use thiserror::Error;

use crate::calibration::{calibrate, CalibrationConfig, CalibrationError};
use crate::csvio::{self, AngleUnit, CsvError};
use crate::fusion::{split_calibration, FusionConfig, FusionError, FusionState, DEFAULT_SLERP_ALPHA};
use crate::metrics::{build_report, ElevationTrace, MetricsError, ReportConfig, TaskPair};
use crate::simulator::{synthesize_imu, trajectory, MotionProfile, NoiseModel, SimulationError, DEFAULT_PRELUDE};
use crate::sweep::{run_sweep, RunSettings, SweepConfig, SweepError};

pub const CONFIG_ENV: &str = "ARMELEV_CONFIG";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_CALIBRATION: i32 = 4;
pub const EXIT_DATA: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("calibration error: {0}")]
    Calibration(String),
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
            CliError::Calibration(_) => EXIT_CALIBRATION,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

impl From<CsvError> for CliError {
    fn from(e: CsvError) -> Self {
        match e {
            CsvError::Io { .. } => CliError::Io(e.to_string()),
            CsvError::Malformed { .. } => CliError::Data(e.to_string()),
        }
    }
}

impl From<CalibrationError> for CliError {
    fn from(e: CalibrationError) -> Self {
        CliError::Calibration(e.to_string())
    }
}

impl From<FusionError> for CliError {
    fn from(e: FusionError) -> Self {
        match e {
            FusionError::Calibration(c) => c.into(),
            FusionError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SimulationError> for CliError {
    fn from(e: SimulationError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Simulation(s) => s.into(),
            SweepError::Fusion(f) => f.into(),
            SweepError::Metrics(m) => m.into(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "armelev", version, about = "Arm elevation from accelerometer and gyroscope data")]
pub struct Cli {
    /// Settings file (flat `key = value`); defaults to $ARMELEV_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic IMU recording and its ground truth.
    Simulate(SimulateArgs),
    /// Estimate elevation from an IMU recording.
    Fuse(FuseArgs),
    /// Compare an elevation estimate against a reference.
    Validate(ValidateArgs),
    /// Simulate, fuse and validate every task at 100 and 500 Hz.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Units {
    Deg,
    Rad,
}

impl From<Units> for AngleUnit {
    fn from(u: Units) -> Self {
        match u {
            Units::Deg => AngleUnit::Degrees,
            Units::Rad => AngleUnit::Radians,
        }
    }
}

impl FromStr for Units {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Units as ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Clone, Args)]
pub struct NoiseArgs {
    /// Produce noise-free, bias-free, pure-rotation signals.
    #[arg(long)]
    pub ideal: bool,
    /// Accelerometer white-noise sigma, m/s².
    #[arg(long)]
    pub accel_noise: Option<f64>,
    /// Gyroscope white-noise sigma, rad/s.
    #[arg(long)]
    pub gyro_noise: Option<f64>,
    /// Constant gyroscope bias, rad/s on every axis.
    #[arg(long)]
    pub gyro_bias: Option<f64>,
    /// Distance from the shoulder to the sensor, m.
    #[arg(long)]
    pub lever_arm: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=10))]
    pub task: u8,
    #[arg(long, default_value_t = 100.0)]
    pub rate: f64,
    /// Motion duration, s (a still calibration prelude is prepended).
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "imu.csv")]
    pub imu: PathBuf,
    #[arg(long, default_value = "truth.csv")]
    pub truth: PathBuf,
    #[command(flatten)]
    pub noise: NoiseArgs,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Leading still window used for calibration, s.
    #[arg(long)]
    pub calib_window: Option<f64>,
    /// Accelerometer weight per step at 100 Hz, in [0, 1].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Sample rate, Hz; estimated from the calibration window if omitted.
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long, value_enum)]
    pub units: Option<Units>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub estimate: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long, default_value = "1")]
    pub task: String,
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Line chart of estimate and reference.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Lag search half-width, s.
    #[arg(long)]
    pub max_lag: Option<f64>,
    /// Shift the estimate by the best lag before computing errors.
    #[arg(long)]
    pub lag_compensated: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub seeds: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub base_seed: u64,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[command(flatten)]
    pub noise: NoiseArgs,
}

const CONFIG_KEYS: &[&str] = &[
    "alpha",
    "calib_window",
    "units",
    "rate",
    "duration",
    "seeds",
    "accel_noise",
    "gyro_noise",
    "gyro_bias",
    "lever_arm",
    "max_lag",
];

/// Parsed `key = value` settings file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
            let k = k.trim();
            if !CONFIG_KEYS.contains(&k) {
                return Err(CliError::Usage(format!("config line {}: unknown key {k:?}", i + 1)));
            }
            values.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.values
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| CliError::Usage(format!("config key {key}: invalid value {v:?}")))
            })
            .transpose()
    }

    /// Flag value if given, else the file value, else `default`.
    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }
}

/// Settings resolved from flags, config file and defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub slerp_alpha: f64,
    pub calib_window: f64,
    pub units: AngleUnit,
    pub noise: NoiseModel,
    pub lever_arm: Option<f64>,
    pub duration: f64,
    pub max_lag: f64,
}

impl RunConfig {
    fn resolve_noise(file: &ConfigFile, n: &NoiseArgs) -> Result<(NoiseModel, Option<f64>), CliError> {
        let base = if n.ideal { NoiseModel::ideal() } else { NoiseModel::default() };
        let noise = NoiseModel {
            accel_noise_sigma: file.pick(n.accel_noise, "accel_noise", base.accel_noise_sigma)?,
            gyro_noise_sigma: file.pick(n.gyro_noise, "gyro_noise", base.gyro_noise_sigma)?,
            gyro_bias: match n.gyro_bias.map(Ok).or_else(|| file.get("gyro_bias").transpose()) {
                Some(b) => Vector3::repeat(b?),
                None => base.gyro_bias,
            },
            ..base
        };
        let lever = match n.lever_arm.map(Ok).or_else(|| file.get("lever_arm").transpose()) {
            Some(l) => Some(l?),
            None if n.ideal => Some(0.0),
            None => None,
        };
        if let Some(l) = lever {
            if !(l.is_finite() && l >= 0.0) {
                return Err(CliError::Usage(format!("lever arm must be non-negative, got {l}")));
            }
        }
        for (name, v) in [("accel noise", noise.accel_noise_sigma), ("gyro noise", noise.gyro_noise_sigma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CliError::Usage(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok((noise, lever))
    }
}

fn load_config(explicit: Option<&Path>) -> Result<ConfigFile, CliError> {
    match explicit {
        Some(p) => ConfigFile::load(p),
        None => match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => ConfigFile::load(Path::new(&p)),
            _ => Ok(ConfigFile::default()),
        },
    }
}

fn ensure_distinct(paths: &[&Path]) -> Result<(), CliError> {
    for (i, a) in paths.iter().enumerate() {
        for b in &paths[i + 1..] {
            if a == b {
                return Err(CliError::Usage(format!("path {} used twice", a.display())));
            }
        }
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("{name} must be positive, got {v}")))
    }
}

pub fn cmd_simulate(args: &SimulateArgs, file: &ConfigFile) -> Result<(), CliError> {
    let rate = positive("rate", args.rate)?;
    let duration = positive("duration", file.pick(args.duration, "duration", 30.0)?)?;
    let (noise, lever) = RunConfig::resolve_noise(file, &args.noise)?;
    let mut profile = MotionProfile::task(args.task)?.with_duration(duration);
    if let Some(l) = lever {
        profile.lever_arm = l;
    }
    let imu_path = args.out_dir.join(&args.imu);
    let truth_path = args.out_dir.join(&args.truth);
    ensure_distinct(&[&imu_path, &truth_path])?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.out_dir.display())))?;

    let truth = trajectory(&profile, rate)?;
    let imu = synthesize_imu(&truth, &noise.with_seed(args.seed));
    csvio::write_imu_csv(&imu_path, &imu)?;
    let reference: Vec<(f64, f64)> = truth.samples.iter().map(|s| (s.t, s.elevation)).collect();
    csvio::write_trace_csv(&truth_path, &reference, AngleUnit::Degrees)?;
    log::info!("wrote {} IMU rows and {} truth rows", imu.len(), reference.len());
    Ok(())
}

pub fn cmd_fuse(args: &FuseArgs, file: &ConfigFile) -> Result<(), CliError> {
    ensure_distinct(&[&args.input, &args.output])?;
    let calib_window = positive("calibration window", file.pick(args.calib_window, "calib_window", DEFAULT_PRELUDE)?)?;
    let alpha = file.pick(args.alpha, "alpha", DEFAULT_SLERP_ALPHA)?;
    let units: AngleUnit = file.pick(args.units, "units", Units::Deg)?.into();
    let rate_flag = args.rate.map(Ok).or_else(|| file.get::<f64>("rate").transpose()).transpose()?;

    let samples = csvio::read_imu_csv(&args.input)?;
    let (calib_samples, stream) = split_calibration(&samples, calib_window);
    let calib_config = CalibrationConfig {
        min_duration: calib_window,
        ..CalibrationConfig::default()
    };
    let calib = calibrate(calib_samples, &calib_config)?;
    log::info!(
        "calibrated on {} samples: gyro bias [{:.5}, {:.5}, {:.5}] rad/s",
        calib.stats.samples,
        calib.gyro_bias.x,
        calib.gyro_bias.y,
        calib.gyro_bias.z
    );
    let rate = match rate_flag {
        Some(r) => positive("rate", r)?,
        None => calib.stats.sample_rate.round().max(1.0),
    };
    let config = FusionConfig::for_rate(rate).with_alpha(alpha);
    let mut state = FusionState::init(&config, &calib)?;
    let mut out = Vec::with_capacity(stream.len());
    for s in stream {
        let e = state.step(s)?;
        out.push((e.t, e.elevation));
    }
    csvio::write_trace_csv(&args.output, &out, units)?;
    Ok(())
}

pub fn cmd_validate(args: &ValidateArgs, file: &ConfigFile) -> Result<(), CliError> {
    let mut outputs: Vec<&Path> = Vec::new();
    outputs.extend(args.json.as_deref());
    outputs.extend(args.table.as_deref());
    outputs.extend(args.svg.as_deref());
    // estimate and reference may be the same file
    for input in [&args.estimate, &args.reference] {
        let mut paths = outputs.clone();
        paths.push(input);
        ensure_distinct(&paths)?;
    }

    let config = ReportConfig {
        max_lag: file.pick(args.max_lag, "max_lag", ReportConfig::default().max_lag)?,
        lag_compensated_errors: args.lag_compensated,
        ..ReportConfig::default()
    };
    let estimate = ElevationTrace::from_samples(csvio::read_trace_csv(&args.estimate)?)?;
    let reference = ElevationTrace::from_samples(csvio::read_trace_csv(&args.reference)?)?;
    if let Some(svg) = &args.svg {
        write_text(svg, &render_svg(&estimate, &reference))?;
    }
    let report = build_report(
        &[TaskPair {
            task: args.task.clone(),
            estimate,
            reference,
        }],
        &config,
    )?;
    let table = report.to_table();
    print!("{table}");
    if let Some(p) = &args.json {
        write_text(p, &report.to_json())?;
    }
    if let Some(p) = &args.table {
        write_text(p, &table)?;
    }
    Ok(())
}

pub fn cmd_sweep(args: &SweepArgs, file: &ConfigFile) -> Result<(), CliError> {
    let mut outputs: Vec<&Path> = Vec::new();
    outputs.extend(args.json.as_deref());
    outputs.extend(args.table.as_deref());
    ensure_distinct(&outputs)?;

    let (noise, lever_arm) = RunConfig::resolve_noise(file, &args.noise)?;
    let settings = RunSettings {
        noise,
        lever_arm,
        duration: positive("duration", file.pick(args.duration, "duration", 30.0)?)?,
        slerp_alpha: file.pick(args.alpha, "alpha", DEFAULT_SLERP_ALPHA)?,
        ..RunSettings::default()
    };
    let seeds = file.pick(args.seeds, "seeds", 5)?;
    if seeds == 0 {
        return Err(CliError::Usage("seeds must be at least 1".into()));
    }
    let config = SweepConfig {
        seeds,
        base_seed: args.base_seed,
        settings,
        ..SweepConfig::default()
    };
    let report = run_sweep(&config)?;
    let table = report.to_table();
    print!("{table}");
    if let Some(p) = &args.json {
        write_text(p, &report.to_json())?;
    }
    if let Some(p) = &args.table {
        write_text(p, &table)?;
    }
    Ok(())
}

/// Estimate (solid) and reference (dashed) elevation in degrees against time.
pub fn render_svg(estimate: &ElevationTrace, reference: &ElevationTrace) -> String {
    const W: f64 = 800.0;
    const H: f64 = 300.0;
    const PAD: f64 = 40.0;
    let all: Vec<(f64, f64)> = estimate
        .samples
        .iter()
        .chain(&reference.samples)
        .map(|&(t, v)| (t, v.to_degrees()))
        .collect();
    let (t0, t1) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(t, _)| (a.min(t), b.max(t)));
    let (v0, v1) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(_, v)| (a.min(v), b.max(v)));
    let span_t = (t1 - t0).max(1e-9);
    let span_v = (v1 - v0).max(1.0);
    let x = |t: f64| PAD + (t - t0) / span_t * (W - 2.0 * PAD);
    let y = |v: f64| H - PAD - (v - v0) / span_v * (H - 2.0 * PAD);
    let path = |trace: &ElevationTrace| {
        let mut d = String::new();
        for (i, &(t, v)) in trace.samples.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, x(t), y(v.to_degrees()));
        }
        d
    };
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="{}" fill="none" stroke="gray" stroke-dasharray="4 3" stroke-width="1.5"/>"#,
        path(reference)
    );
    let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#, path(estimate));
    let _ = writeln!(s, r#"<text x="{PAD}" y="20" font-size="12">elevation {v0:.1}°..{v1:.1}°, t {t0:.2}..{t1:.2} s</text>"#);
    s.push_str("</svg>\n");
    s
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let file = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, &file),
        Command::Fuse(a) => cmd_fuse(a, &file),
        Command::Validate(a) => cmd_validate(a, &file),
        Command::Sweep(a) => cmd_sweep(a, &file),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("armelev: {e}");
            e.exit_code()
        }
    }
}
