//! Univariate signal primitives: analytic signal, instantaneous attributes
//! and the classic EMD sifting algorithm.

pub(crate) mod emd;
pub(crate) mod extrema;
mod hilbert;
pub mod spline;

pub use emd::{emd, sd_criterion, EmdParams, SdForm};
pub use extrema::{envelope_pair, find_extrema, imf_check, sift, zero_crossings, Extrema, ImfReport};
pub use hilbert::{analytic_signal, instantaneous_attributes};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("signal too short: {len} samples, need at least {min}")]
    SignalTooShort { len: usize, min: usize },
    #[error("non-finite sample at index {index}")]
    NonFiniteSample { index: usize },
    #[error("sample rate must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("amplitude vanishes over most of the signal; phase is meaningless")]
    DegenerateSignal,
    #[error("too few extrema for an envelope: {maxima} maxima, {minima} minima")]
    TooFewExtrema { maxima: usize, minima: usize },
    #[error("sifting did not converge: SD {sd} after {sifts} sifts")]
    NoConvergence { sd: f64, sifts: usize },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
}

pub type Result<T> = std::result::Result<T, SignalError>;

/// A uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    samples: Vec<f64>,
    rate: f64,
    start_time: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, rate: f64) -> Result<Self> {
        Self::with_start(samples, rate, 0.0)
    }

    pub fn with_start(samples: Vec<f64>, rate: f64, start_time: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(SignalError::BadRate(rate));
        }
        if samples.len() < 2 {
            return Err(SignalError::SignalTooShort { len: samples.len(), min: 2 });
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(SignalError::NonFiniteSample { index });
        }
        Ok(Self { samples, rate, start_time })
    }

    /// Samples `f(t)` at `t = k / rate` for `k in 0..len`.
    pub fn from_fn(len: usize, rate: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..len).map(|k| f(k as f64 / rate)).collect(), rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        (self.samples.len() - 1) as f64 / self.rate
    }

    /// Same rate and start, new samples.
    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self { samples, rate: self.rate, start_time: self.start_time }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticSignal {
    pub real_part: Vec<f64>,
    pub imag_part: Vec<f64>,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstantAttributes {
    pub amplitude: Vec<f64>,
    /// Hz; may be negative where the component is locally not monochromatic.
    pub frequency: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopePair {
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
}

impl EnvelopePair {
    pub fn mean(&self) -> Vec<f64> {
        self.upper.iter().zip(&self.lower).map(|(u, l)| 0.5 * (u + l)).collect()
    }
}

/// Provenance recorded alongside a decomposition.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecompositionMeta {
    pub source: String,
    pub sd_threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_channels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction_count: Option<usize>,
}

/// IMFs (index 0 = highest frequency) plus the residual trend.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub imfs: Vec<Vec<f64>>,
    pub trend: Vec<f64>,
    pub rate: f64,
    pub meta: DecompositionMeta,
}

impl Decomposition {
    /// Validates that every member series shares the trend's length.
    pub fn new(imfs: Vec<Vec<f64>>, trend: Vec<f64>, rate: f64, meta: DecompositionMeta) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(SignalError::BadRate(rate));
        }
        if let Some(imf) = imfs.iter().find(|c| c.len() != trend.len()) {
            return Err(SignalError::LengthMismatch(imf.len(), trend.len()));
        }
        Ok(Self { imfs, trend, rate, meta })
    }

    pub fn len(&self) -> usize {
        self.trend.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trend.is_empty()
    }

    pub fn imf_count(&self) -> usize {
        self.imfs.len()
    }

    /// Sum of all IMFs and the trend.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = self.trend.clone();
        for imf in &self.imfs {
            for (o, v) in out.iter_mut().zip(imf) {
                *o += v;
            }
        }
        out
    }
}

pub(crate) fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Index range excluding `frac` of the samples at each end.
pub(crate) fn interior(len: usize, frac: f64) -> std::ops::Range<usize> {
    let trim = (len as f64 * frac).floor() as usize;
    if 2 * trim >= len {
        0..len
    } else {
        trim..len - trim
    }
}
