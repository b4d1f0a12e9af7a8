//! CSV exchange formats.
//!
//! * IMU: `t,ax,ay,az,gx,gy,gz` (s, m/s², rad/s)
//! * elevation traces: `t,elevation_deg` (or `t,elevation_rad`)
//!
//! Numbers are written with nine significant digits.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::Vector3;
use thiserror::Error;

use crate::sample::SensorSample;

pub const IMU_HEADER: [&str; 7] = ["t", "ax", "ay", "az", "gx", "gy", "gz"];

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Malformed {
        path: String,
        line: u64,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AngleUnit {
    #[default]
    Degrees,
    Radians,
}

impl AngleUnit {
    pub fn column(&self) -> &'static str {
        match self {
            AngleUnit::Degrees => "elevation_deg",
            AngleUnit::Radians => "elevation_rad",
        }
    }

    pub fn from_rad(&self, v: f64) -> f64 {
        match self {
            AngleUnit::Degrees => v.to_degrees(),
            AngleUnit::Radians => v,
        }
    }

    pub fn to_rad(&self, v: f64) -> f64 {
        match self {
            AngleUnit::Degrees => v.to_radians(),
            AngleUnit::Radians => v,
        }
    }
}

/// Formats `v` with nine significant digits, `%g` style.
pub fn fmt_sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".to_string() } else { v.to_string() };
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        // a rounding carry can add one digit; harmless
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{v:.8e}")
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CsvError + '_ {
    move |source| CsvError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn malformed(path: &Path, line: u64, reason: impl Into<String>) -> CsvError {
    CsvError::Malformed {
        path: path.display().to_string(),
        line,
        reason: reason.into(),
    }
}

fn reader(path: &Path) -> Result<csv::Reader<Box<dyn Read>>, CsvError> {
    let file = File::open(path).map_err(io_err(path))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(Box::new(file) as Box<dyn Read>))
}

fn parse_record(path: &Path, rec: &csv::StringRecord, expected: usize) -> Result<Vec<f64>, CsvError> {
    let line = rec.position().map_or(0, |p| p.line());
    if rec.len() != expected {
        return Err(malformed(
            path,
            line,
            format!("expected {expected} fields, found {}", rec.len()),
        ));
    }
    rec.iter()
        .map(|f| {
            let v: f64 = f
                .parse()
                .map_err(|_| malformed(path, line, format!("not a number: {f:?}")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(malformed(path, line, format!("non-finite value {f:?}")))
            }
        })
        .collect()
}

fn csv_err(path: &Path, e: csv::Error) -> CsvError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CsvError::Io {
            path: path.display().to_string(),
            source,
        },
        other => malformed(path, line, format!("{other:?}")),
    }
}

pub fn read_imu_csv(path: &Path) -> Result<Vec<SensorSample>, CsvError> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != IMU_HEADER {
        return Err(malformed(
            path,
            1,
            format!("expected header {}", IMU_HEADER.join(",")),
        ));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let v = parse_record(path, &rec, 7)?;
        out.push(SensorSample::new(
            v[0],
            Vector3::new(v[1], v[2], v[3]),
            Vector3::new(v[4], v[5], v[6]),
        ));
    }
    Ok(out)
}

fn writer(path: &Path) -> Result<BufWriter<File>, CsvError> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

pub fn write_imu_csv(path: &Path, samples: &[SensorSample]) -> Result<(), CsvError> {
    let mut w = writer(path)?;
    let mut body = String::with_capacity(samples.len() * 96);
    body.push_str(&IMU_HEADER.join(","));
    body.push('\n');
    for s in samples {
        let fields = [
            s.t, s.accel.x, s.accel.y, s.accel.z, s.gyro.x, s.gyro.y, s.gyro.z,
        ];
        let row: Vec<String> = fields.iter().map(|v| fmt_sig9(*v)).collect();
        body.push_str(&row.join(","));
        body.push('\n');
    }
    w.write_all(body.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// Reads `t,elevation_deg` or `t,elevation_rad`; values are returned in radians.
pub fn read_trace_csv(path: &Path) -> Result<Vec<(f64, f64)>, CsvError> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let unit = match header.iter().collect::<Vec<_>>().as_slice() {
        ["t", "elevation_deg"] => AngleUnit::Degrees,
        ["t", "elevation_rad"] => AngleUnit::Radians,
        _ => {
            return Err(malformed(
                path,
                1,
                "expected header t,elevation_deg or t,elevation_rad",
            ))
        }
    };
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let v = parse_record(path, &rec, 2)?;
        out.push((v[0], unit.to_rad(v[1])));
    }
    Ok(out)
}

/// Writes a trace given in radians using `unit` for the file.
pub fn write_trace_csv(path: &Path, samples: &[(f64, f64)], unit: AngleUnit) -> Result<(), CsvError> {
    let mut w = writer(path)?;
    let mut body = format!("t,{}\n", unit.column());
    for (t, v) in samples {
        body.push_str(&fmt_sig9(*t));
        body.push(',');
        body.push_str(&fmt_sig9(unit.from_rad(*v)));
        body.push('\n');
    }
    w.write_all(body.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}
