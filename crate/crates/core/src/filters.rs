//! First-order IIR filters applied per axis to 3-vector sensor streams.
//!
//! Sections are discretized with the bilinear transform and frequency
//! pre-warping, so the analog corner frequency is preserved exactly.
//! A band-pass is a first-order high-pass cascaded with a first-order
//! low-pass.

use std::f64::consts::PI;

use nalgebra::Vector3;
use thiserror::Error;

/// Upper cutoffs are clamped to this fraction of the sample rate.
pub const NYQUIST_CLAMP: f64 = 0.45;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("filter configuration error: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    LowPass,
    BandPass,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub kind: FilterKind,
    /// High-pass corner (Hz); only used by [`FilterKind::BandPass`].
    pub f_low: f64,
    /// Low-pass corner (Hz).
    pub f_high: f64,
    pub sample_rate: f64,
}

impl FilterSpec {
    pub fn low_pass(f_high: f64, sample_rate: f64) -> Self {
        Self {
            kind: FilterKind::LowPass,
            f_low: 0.0,
            f_high,
            sample_rate,
        }
    }

    pub fn band_pass(f_low: f64, f_high: f64, sample_rate: f64) -> Self {
        Self {
            kind: FilterKind::BandPass,
            f_low,
            f_high,
            sample_rate,
        }
    }

    /// Upper corner after clamping to `NYQUIST_CLAMP · sample_rate`.
    pub fn effective_f_high(&self) -> f64 {
        self.f_high.min(NYQUIST_CLAMP * self.sample_rate)
    }
}

/// `y[n] = b0·x[n] + b1·x[n−1] − a1·y[n−1]`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderSection {
    pub b0: f64,
    pub b1: f64,
    pub a1: f64,
}

impl FirstOrderSection {
    fn prewarp(fc: f64, fs: f64) -> f64 {
        (PI * fc / fs).tan()
    }

    pub fn low_pass(fc: f64, fs: f64) -> Self {
        let k = Self::prewarp(fc, fs);
        let norm = 1.0 + k;
        Self {
            b0: k / norm,
            b1: k / norm,
            a1: (k - 1.0) / norm,
        }
    }

    pub fn high_pass(fc: f64, fs: f64) -> Self {
        let k = Self::prewarp(fc, fs);
        let norm = 1.0 + k;
        Self {
            b0: 1.0 / norm,
            b1: -1.0 / norm,
            a1: (k - 1.0) / norm,
        }
    }

    pub fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1) / (1.0 + self.a1)
    }

    /// Pole of the section; `|pole| < 1` for every valid design.
    pub fn pole(&self) -> f64 {
        -self.a1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterCoefficients {
    sections: Vec<FirstOrderSection>,
    effective_f_high: f64,
}

impl FilterCoefficients {
    pub fn sections(&self) -> &[FirstOrderSection] {
        &self.sections
    }

    pub fn effective_f_high(&self) -> f64 {
        self.effective_f_high
    }

    pub fn dc_gain(&self) -> f64 {
        self.sections.iter().map(FirstOrderSection::dc_gain).product()
    }
}

pub fn design(spec: &FilterSpec) -> Result<FilterCoefficients, FilterError> {
    let fs = spec.sample_rate;
    if !(fs.is_finite() && fs > 0.0) {
        return Err(FilterError::Config(format!("sample rate must be positive, got {fs}")));
    }
    if !(spec.f_high.is_finite() && spec.f_high > 0.0) {
        return Err(FilterError::Config(format!(
            "upper cutoff must be positive, got {}",
            spec.f_high
        )));
    }
    let f_high = spec.effective_f_high();
    if f_high < spec.f_high {
        // once per process; sweeps design hundreds of identical filters
        static WARNED: std::sync::atomic::AtomicBool = std::sync::atomic::AtomicBool::new(false);
        let level = if WARNED.swap(true, std::sync::atomic::Ordering::Relaxed) {
            log::Level::Debug
        } else {
            log::Level::Warn
        };
        log::log!(
            level,
            "cutoff {} Hz clamped to {} Hz at {} Hz sampling",
            spec.f_high,
            f_high,
            fs
        );
    }
    if f_high >= 0.5 * fs {
        return Err(FilterError::Config(format!(
            "cutoff {f_high} Hz is at or above Nyquist for {fs} Hz"
        )));
    }
    let mut sections = Vec::with_capacity(2);
    if spec.kind == FilterKind::BandPass {
        if !(spec.f_low.is_finite() && spec.f_low > 0.0 && spec.f_low < f_high) {
            return Err(FilterError::Config(format!(
                "band edges must satisfy 0 < f_low < f_high, got {} and {}",
                spec.f_low, f_high
            )));
        }
        sections.push(FirstOrderSection::high_pass(spec.f_low, fs));
    }
    sections.push(FirstOrderSection::low_pass(f_high, fs));
    Ok(FilterCoefficients {
        sections,
        effective_f_high: f_high,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct SectionHistory {
    x_prev: Vector3<f64>,
    y_prev: Vector3<f64>,
}

/// Per-axis delay line of a designed filter.
///
/// A fresh state pre-charges its history with the first sample it sees, as
/// if that value had been applied forever. [`FilterState::reset`] instead
/// clears the history to zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    coeffs: FilterCoefficients,
    history: Vec<SectionHistory>,
    primed: bool,
}

impl FilterState {
    pub fn new(coeffs: FilterCoefficients) -> Self {
        let history = vec![SectionHistory::default(); coeffs.sections.len()];
        Self {
            coeffs,
            history,
            primed: false,
        }
    }

    pub fn from_spec(spec: &FilterSpec) -> Result<Self, FilterError> {
        Ok(Self::new(design(spec)?))
    }

    pub fn coefficients(&self) -> &FilterCoefficients {
        &self.coeffs
    }

    pub fn reset(&mut self) {
        self.history.fill(SectionHistory::default());
        self.primed = true;
    }

    /// Loads the steady-state history for a constant input `x`.
    pub fn precharge(&mut self, x: Vector3<f64>) {
        let mut v = x;
        for (sec, h) in self.coeffs.sections.iter().zip(self.history.iter_mut()) {
            let y = v * sec.dc_gain();
            h.x_prev = v;
            h.y_prev = y;
            v = y;
        }
        self.primed = true;
    }

    pub fn step(&mut self, x: Vector3<f64>) -> Vector3<f64> {
        if !self.primed {
            self.precharge(x);
        }
        let mut v = x;
        for (sec, h) in self.coeffs.sections.iter().zip(self.history.iter_mut()) {
            let y = v * sec.b0 + h.x_prev * sec.b1 - h.y_prev * sec.a1;
            h.x_prev = v;
            h.y_prev = y;
            v = y;
        }
        v
    }
}
