//! Multivariate EMD by envelope averaging over projection directions on the
//! unit hypersphere, and the noise-assisted variant that appends white-noise
//! channels before decomposing.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::signal_core::emd::{is_monotone, polish_imf};
use crate::signal_core::extrema::{extrema_of, mirrored_spline};
use crate::signal_core::{rms, sd_criterion, Decomposition, DecompositionMeta, EmdParams, SignalError, TimeSeries};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MemdError {
    #[error("bad dimension: {0}")]
    BadDimension(String),
    #[error("projection on direction {direction} has too few extrema")]
    TooFewExtrema { direction: usize },
    #[error("channel layout mismatch: {0}")]
    ChannelMismatch(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

pub type Result<T> = std::result::Result<T, MemdError>;

/// Channels sharing one rate and length.
#[derive(Debug, Clone, PartialEq)]
pub struct MultivariateSeries {
    channels: Vec<Vec<f64>>,
    labels: Vec<String>,
    rate: f64,
}

impl MultivariateSeries {
    pub fn new(channels: Vec<Vec<f64>>, labels: Vec<String>, rate: f64) -> Result<Self> {
        if channels.is_empty() {
            return Err(MemdError::BadDimension("no channels".into()));
        }
        if labels.len() != channels.len() {
            return Err(MemdError::ChannelMismatch(format!(
                "{} labels for {} channels",
                labels.len(),
                channels.len()
            )));
        }
        // Validate each channel through TimeSeries rules.
        let len = channels[0].len();
        for c in &channels {
            if c.len() != len {
                return Err(SignalError::LengthMismatch(c.len(), len).into());
            }
            TimeSeries::new(c.clone(), rate)?;
        }
        Ok(Self { channels, labels, rate })
    }

    pub fn from_series(series: &[TimeSeries], labels: Vec<String>) -> Result<Self> {
        let rate = series.first().map(|s| s.rate()).unwrap_or(1.0);
        if series.iter().any(|s| s.rate() != rate) {
            return Err(MemdError::ChannelMismatch("channel rates differ".into()));
        }
        Self::new(series.iter().map(|s| s.samples().to_vec()).collect(), labels, rate)
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn channel(&self, i: usize) -> TimeSeries {
        TimeSeries::new(self.channels[i].clone(), self.rate).expect("validated on construction")
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels[0].is_empty()
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }
}

/// Unit vectors used to project a multivariate signal.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    vectors: Vec<Vec<f64>>,
    dims: usize,
}

impl DirectionSet {
    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn count(&self) -> usize {
        self.vectors.len()
    }
}

const PRIMES: [u32; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131,
];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    out
}

/// Low-discrepancy directions on the unit (n-1)-sphere.
///
/// Hammersley points in the unit n-cube, shifted by a seeded offset (mod 1),
/// become Gaussian coordinates through the Box-Muller map (the inverse normal
/// CDF for a leftover odd coordinate) and are normalized. The first angle
/// spans only a half turn, so the base points cover a hemisphere; each is
/// paired with its antipode, whose projection maxima are the base
/// projection's minima.
pub fn direction_set(n_dims: usize, count: usize, seed: u64) -> Result<DirectionSet> {
    if n_dims < 2 {
        return Err(MemdError::BadDimension(format!("need at least 2 dimensions, got {n_dims}")));
    }
    if n_dims > PRIMES.len() + 1 {
        return Err(MemdError::BadDimension(format!(
            "at most {} dimensions supported, got {n_dims}",
            PRIMES.len() + 1
        )));
    }
    if count < 2 * n_dims {
        return Err(MemdError::BadDimension(format!(
            "{count} directions are too few for {n_dims} dimensions (need {})",
            2 * n_dims
        )));
    }
    let normal = Normal::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..n_dims).map(|_| rng.random::<f64>()).collect();
    let base_count = count.div_ceil(2);
    let mut vectors = Vec::with_capacity(2 * base_count);
    for i in 0..base_count {
        let u: Vec<f64> = (0..n_dims)
            .map(|k| {
                let raw = if k == 0 {
                    (i as f64 + 0.5) / base_count as f64
                } else {
                    radical_inverse(i as u64, PRIMES[k - 1] as u64)
                };
                (raw + shift[k]).fract().clamp(1e-12, 1.0 - 1e-12)
            })
            .collect();
        let mut g = Vec::with_capacity(n_dims);
        for (j, pair) in u.chunks(2).enumerate() {
            match *pair {
                [ur, ua] => {
                    let r = (-2.0 * ur.ln()).sqrt();
                    let turn = if j == 0 { PI } else { 2.0 * PI };
                    g.push(r * (turn * ua).cos());
                    g.push(r * (turn * ua).sin());
                }
                [u_last] => g.push(normal.inverse_cdf(u_last)),
                _ => unreachable!(),
            }
        }
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let v: Vec<f64> = g.iter().map(|x| x / norm).collect();
        vectors.push(v.iter().map(|x| -x).collect());
        vectors.push(v);
    }
    vectors.truncate(count);
    Ok(DirectionSet { vectors, dims: n_dims })
}

/// Envelope through the full vector samples at the maxima of the projection
/// on `dir`. `None` when the projection has fewer than two maxima.
fn directional_envelope(channels: &[Vec<f64>], dir: &[f64]) -> Option<Vec<Vec<f64>>> {
    let n = channels[0].len();
    let mut proj = vec![0.0; n];
    for (c, w) in channels.iter().zip(dir) {
        for (p, v) in proj.iter_mut().zip(c) {
            *p += w * v;
        }
    }
    let maxima = extrema_of(&proj).maxima;
    if maxima.len() < 2 {
        return None;
    }
    Some(channels.iter().map(|c| mirrored_spline(c, &maxima)).collect())
}

/// Mean of the directional envelopes over the usable directions, in
/// direction order. Returns the mean and the number of usable directions.
fn lenient_mean_envelope(channels: &[Vec<f64>], dirs: &DirectionSet) -> (Vec<Vec<f64>>, usize) {
    let n = channels[0].len();
    let mut sum = vec![vec![0.0; n]; channels.len()];
    let mut used = 0usize;
    for dir in dirs.vectors() {
        if let Some(env) = directional_envelope(channels, dir) {
            for (s, e) in sum.iter_mut().zip(&env) {
                for (a, b) in s.iter_mut().zip(e) {
                    *a += b;
                }
            }
            used += 1;
        }
    }
    if used > 0 {
        let inv = 1.0 / used as f64;
        for s in &mut sum {
            for a in s.iter_mut() {
                *a *= inv;
            }
        }
    }
    (sum, used)
}

/// Average over all directions of the envelope through the signal at the
/// maxima of each directional projection.
pub fn multivariate_mean_envelope(x: &MultivariateSeries, dirs: &DirectionSet) -> Result<MultivariateSeries> {
    check_dims(x.channel_count(), dirs)?;
    let n = x.len();
    let mut sum = vec![vec![0.0; n]; x.channel_count()];
    for (k, dir) in dirs.vectors().iter().enumerate() {
        let env = directional_envelope(x.channels(), dir).ok_or(MemdError::TooFewExtrema { direction: k })?;
        for (s, e) in sum.iter_mut().zip(&env) {
            for (a, b) in s.iter_mut().zip(e) {
                *a += b;
            }
        }
    }
    let inv = 1.0 / dirs.count() as f64;
    for s in &mut sum {
        for a in s.iter_mut() {
            *a *= inv;
        }
    }
    MultivariateSeries::new(sum, x.labels().to_vec(), x.rate())
}

fn check_dims(channels: usize, dirs: &DirectionSet) -> Result<()> {
    if dirs.dims() != channels {
        return Err(MemdError::BadDimension(format!(
            "direction set is {}-dimensional but the signal has {channels} channels",
            dirs.dims()
        )));
    }
    Ok(())
}

/// Aligned per-channel decompositions.
#[derive(Debug, Clone, PartialEq)]
pub struct MultivariateDecomposition {
    pub per_channel: Vec<Decomposition>,
    pub labels: Vec<String>,
    pub meta: DecompositionMeta,
}

impl MultivariateDecomposition {
    /// Checks that every channel has the same rate, length and IMF count.
    pub fn new(per_channel: Vec<Decomposition>, labels: Vec<String>, meta: DecompositionMeta) -> Result<Self> {
        let Some(first) = per_channel.first() else {
            return Err(MemdError::BadDimension("no channels".into()));
        };
        if labels.len() != per_channel.len() {
            return Err(MemdError::ChannelMismatch(format!(
                "{} labels for {} channels",
                labels.len(),
                per_channel.len()
            )));
        }
        for d in &per_channel {
            if d.rate != first.rate || d.len() != first.len() || d.imf_count() != first.imf_count() {
                return Err(MemdError::ChannelMismatch(
                    "channels differ in rate, length or IMF count".into(),
                ));
            }
        }
        Ok(Self { per_channel, labels, meta })
    }

    pub fn imf_count(&self) -> usize {
        self.per_channel[0].imf_count()
    }

    pub fn rate(&self) -> f64 {
        self.per_channel[0].rate
    }

    pub fn len(&self) -> usize {
        self.per_channel[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_channel[0].is_empty()
    }

    pub fn channel_count(&self) -> usize {
        self.per_channel.len()
    }
}

fn stacked_rms(channels: &[Vec<f64>]) -> f64 {
    let n: usize = channels.iter().map(Vec::len).sum();
    (channels.iter().flatten().map(|v| v * v).sum::<f64>() / n as f64).sqrt()
}

fn stacked_sd(old: &[Vec<f64>], new: &[Vec<f64>], params: &EmdParams) -> f64 {
    let flat_old: Vec<f64> = old.iter().flatten().copied().collect();
    let flat_new: Vec<f64> = new.iter().flatten().copied().collect();
    sd_criterion(&flat_old, &flat_new, params.sd_form)
}

/// Multivariate EMD.
///
/// Sifting subtracts the multivariate mean envelope until the SD criterion,
/// taken over all channels and samples together, falls below the threshold
/// and the stacked mean envelope is small. Each channel of the candidate is
/// then sifted on its own until it meets the IMF conditions; whatever that
/// removes stays in the channel's residual. Every channel receives the same
/// number of IMFs.
pub fn memd(x: &MultivariateSeries, dirs: &DirectionSet, params: &EmdParams) -> Result<MultivariateDecomposition> {
    params.validate()?;
    check_dims(x.channel_count(), dirs)?;
    if x.len() < 4 {
        return Err(SignalError::SignalTooShort { len: x.len(), min: 4 }.into());
    }
    let input_rms = stacked_rms(x.channels());
    let mut residual: Vec<Vec<f64>> = x.channels().to_vec();
    let mut imfs: Vec<Vec<Vec<f64>>> = Vec::new();

    while imfs.len() < params.max_imfs {
        if residual.iter().all(|c| is_monotone(c)) || stacked_rms(&residual) <= params.residual_floor * input_rms {
            break;
        }
        let Some(imf) = extract_multivariate_imf(&residual, dirs, params)? else {
            break;
        };
        for (r, c) in residual.iter_mut().zip(&imf) {
            for (a, b) in r.iter_mut().zip(c) {
                *a -= b;
            }
        }
        imfs.push(imf);
    }

    let meta = DecompositionMeta {
        source: "memd".into(),
        sd_threshold: params.sd_threshold,
        direction_count: Some(dirs.count()),
        ..Default::default()
    };
    let per_channel = residual
        .into_iter()
        .enumerate()
        .map(|(ch, trend)| {
            let channel_imfs = imfs.iter().map(|imf| imf[ch].clone()).collect();
            Decomposition::new(channel_imfs, trend, x.rate(), meta.clone())
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    MultivariateDecomposition::new(per_channel, x.labels().to_vec(), meta)
}

/// Fewer than half the directions with usable projections ends extraction.
fn enough_directions(used: usize, dirs: &DirectionSet) -> bool {
    2 * used >= dirs.count()
}

fn extract_multivariate_imf(
    residual: &[Vec<f64>],
    dirs: &DirectionSet,
    params: &EmdParams,
) -> Result<Option<Vec<Vec<f64>>>> {
    let mut c: Vec<Vec<f64>> = residual.to_vec();
    let mut prev: Option<Vec<Vec<f64>>> = None;
    let mut sifts = 0;
    loop {
        let (mean, used) = lenient_mean_envelope(&c, dirs);
        if !enough_directions(used, dirs) {
            if prev.is_none() {
                return Ok(None);
            }
            break;
        }
        if let Some(p) = &prev {
            let sd = stacked_sd(p, &c, params);
            let centered = stacked_rms(&mean) <= params.mean_env_tol * stacked_rms(&c);
            if sd < params.sd_threshold && centered {
                break;
            }
            if sifts >= params.max_sifts {
                if sd > 10.0 * params.sd_threshold {
                    return Err(SignalError::NoConvergence { sd, sifts }.into());
                }
                break;
            }
        }
        let next: Vec<Vec<f64>> = c
            .iter()
            .zip(&mean)
            .map(|(ch, m)| ch.iter().zip(m).map(|(v, e)| v - e).collect())
            .collect();
        prev = Some(std::mem::replace(&mut c, next));
        sifts += 1;
    }
    let polished: Vec<Vec<f64>> = c.into_iter().map(|ch| polish_imf(ch, params)).collect();
    let oscillating = |ch: &[f64]| {
        let ext = extrema_of(ch);
        ext.maxima.len() >= 2 && ext.minima.len() >= 2
    };
    if !polished.iter().any(|ch| oscillating(ch)) {
        return Ok(None);
    }
    // A channel without a full oscillation keeps its content in the residual.
    Ok(Some(
        polished
            .into_iter()
            .map(|ch| if oscillating(&ch) { ch } else { vec![0.0; ch.len()] })
            .collect(),
    ))
}

/// Parameters of noise-assisted MEMD.
#[derive(Debug, Clone, PartialEq)]
pub struct NaMemdParams {
    pub emd: EmdParams,
    pub noise_channels: usize,
    /// Noise standard deviation relative to the mean channel RMS.
    pub noise_pct: f64,
    pub direction_count: usize,
    pub seed: u64,
}

impl Default for NaMemdParams {
    fn default() -> Self {
        Self { emd: EmdParams::default(), noise_channels: 1, noise_pct: 0.09, direction_count: 64, seed: 0 }
    }
}

/// Zero-mean Gaussian channels, one independent ChaCha stream per channel.
pub fn noise_channels(count: usize, len: usize, std_dev: f64, seed: u64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64 + 1);
            (0..len).map(|_| std_dev * rng.sample::<f64, _>(StandardNormal)).collect()
        })
        .collect()
}

/// Noise-assisted MEMD: appends white-noise channels, runs MEMD on the
/// extended signal and drops the noise channels from the result.
pub fn na_memd(x: &MultivariateSeries, params: &NaMemdParams) -> Result<MultivariateDecomposition> {
    if !(params.noise_pct > 0.0 && params.noise_pct < 1.0) {
        return Err(SignalError::BadParameter(format!("noise_pct must lie in (0, 1), got {}", params.noise_pct)).into());
    }
    let mean_rms = x.channels().iter().map(|c| rms(c)).sum::<f64>() / x.channel_count() as f64;
    let noise = noise_channels(params.noise_channels, x.len(), params.noise_pct * mean_rms, params.seed);

    let mut channels = x.channels().to_vec();
    channels.extend(noise);
    let mut labels = x.labels().to_vec();
    labels.extend((0..params.noise_channels).map(|k| format!("noise.{k}")));
    let extended = MultivariateSeries::new(channels, labels, x.rate())?;
    let dims = extended.channel_count();
    let dirs = direction_set(dims, params.direction_count.max(2 * dims), params.seed)?;

    let mut full = memd(&extended, &dirs, &params.emd)?;
    full.per_channel.truncate(x.channel_count());
    full.labels.truncate(x.channel_count());
    let meta = DecompositionMeta {
        source: "na-memd".into(),
        noise_pct: Some(params.noise_pct),
        noise_channels: Some(params.noise_channels),
        seed: Some(params.seed),
        ..full.meta
    };
    for d in &mut full.per_channel {
        d.meta = meta.clone();
    }
    full.meta = meta;
    Ok(full)
}
