//! Beat grids from a fixed tempo or from audio, and beat-aligned segmentation
//! of motion clips.
//!
//! Audio tracking follows the usual three stages: a spectral-flux onset
//! envelope at 100 Hz, a global tempo from its autocorrelation, and a dynamic
//! programme that places beats on strong onsets while penalizing deviations
//! from the tempo period.

mod wav;

pub use wav::{read_wav, write_wav_pcm16, WavFormat};

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mocap_io::MotionClip;
use crate::signal_core::TimeSeries;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeatError {
    #[error("tempo {0} BPM outside [20, 400] or too slow for the duration")]
    BadTempo(f64),
    #[error("audio too short: {0:.3} s, need at least 1 s")]
    AudioTooShort(f64),
    #[error("unusable audio: {0}")]
    BadAudio(String),
    #[error("onset envelope shows no periodicity")]
    NoPeriodicity,
    #[error("onset envelope is empty; no beats to track")]
    NoBeats,
    #[error("beat grid does not overlap the clip")]
    GridOutsideClip,
    #[error("invalid beat grid: {0}")]
    InvalidGrid(String),
}

pub type Result<T> = std::result::Result<T, BeatError>;

pub const MIN_BPM: f64 = 20.0;
pub const MAX_BPM: f64 = 400.0;
pub const DEFAULT_STRONG_PERIOD: usize = 4;
/// Onset envelope frame rate in Hz.
pub const ONSET_RATE: f64 = 100.0;
const WINDOW_SECONDS: f64 = 0.064;
const LOG_RANGE_DB: f64 = 80.0;
const MIN_AUDIO_RATE: f64 = 8000.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeatGrid {
    pub bpm: f64,
    pub beats: Vec<f64>,
    pub strong: Vec<bool>,
}

#[derive(Deserialize)]
struct RawGrid {
    bpm: f64,
    beats: Vec<f64>,
    strong: Vec<bool>,
}

impl<'de> Deserialize<'de> for BeatGrid {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = RawGrid::deserialize(de)?;
        BeatGrid::with_flags(raw.beats, raw.bpm, raw.strong).map_err(serde::de::Error::custom)
    }
}

impl BeatGrid {
    /// Marks every `strong_period`-th beat, starting with the first, as strong.
    pub fn new(beats: Vec<f64>, bpm: f64, strong_period: usize) -> Result<Self> {
        let period = strong_period.max(1);
        let strong = (0..beats.len()).map(|k| k % period == 0).collect();
        Self::with_flags(beats, bpm, strong)
    }

    pub fn with_flags(beats: Vec<f64>, bpm: f64, strong: Vec<bool>) -> Result<Self> {
        if !(bpm.is_finite() && bpm > 0.0) {
            return Err(BeatError::InvalidGrid(format!("bpm must be positive, got {bpm}")));
        }
        if strong.len() != beats.len() {
            return Err(BeatError::InvalidGrid(format!(
                "{} strong flags for {} beats",
                strong.len(),
                beats.len()
            )));
        }
        if beats.iter().any(|b| !b.is_finite()) {
            return Err(BeatError::InvalidGrid("non-finite beat time".into()));
        }
        let period = 60.0 / bpm;
        for (k, w) in beats.windows(2).enumerate() {
            let gap = w[1] - w[0];
            if gap <= 0.0 {
                return Err(BeatError::InvalidGrid(format!("beats {k} and {} are not ascending", k + 1)));
            }
            if (gap - period).abs() > 0.25 * period + 1e-9 {
                return Err(BeatError::InvalidGrid(format!(
                    "gap {gap:.4} s after beat {k} deviates more than 25% from {period:.4} s"
                )));
            }
        }
        Ok(Self { bpm, beats, strong })
    }

    pub fn len(&self) -> usize {
        self.beats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beats.is_empty()
    }
}

fn check_bpm(bpm: f64) -> Result<()> {
    if bpm.is_finite() && (MIN_BPM..=MAX_BPM).contains(&bpm) {
        Ok(())
    } else {
        Err(BeatError::BadTempo(bpm))
    }
}

/// Beats at `offset + k·60/bpm` strictly before `duration`.
pub fn fixed_grid(bpm: f64, duration: f64, offset: f64) -> Result<BeatGrid> {
    check_bpm(bpm)?;
    let period = 60.0 / bpm;
    if !(duration.is_finite() && duration > period) || !offset.is_finite() || offset < 0.0 {
        return Err(BeatError::BadTempo(bpm));
    }
    let beats: Vec<f64> = (0..)
        .map(|k| offset + k as f64 * period)
        .take_while(|&t| t < duration)
        .collect();
    BeatGrid::new(beats, bpm, DEFAULT_STRONG_PERIOD)
}

/// Half-wave-rectified spectral flux of the log-magnitude spectrogram
/// (64 ms Hann window, 10 ms hop), normalized to unit maximum, at 100 Hz.
///
/// Frame `k` is stamped `k/100` s and analyses the window ending at
/// `(k+1)/100` s, so an onset registers in the frame stamped at most one hop
/// before it. Frames whose window would reach before the start of the audio
/// are zero.
pub fn onset_envelope(audio: &TimeSeries) -> Result<TimeSeries> {
    let sr = audio.rate();
    if sr < MIN_AUDIO_RATE {
        return Err(BeatError::BadAudio(format!("sample rate {sr} Hz below {MIN_AUDIO_RATE} Hz")));
    }
    let seconds = audio.len() as f64 / sr;
    if seconds < 1.0 {
        return Err(BeatError::AudioTooShort(seconds));
    }
    let x = audio.samples();
    let win = (WINDOW_SECONDS * sr).round() as usize;
    let frames = (seconds * ONSET_RATE).floor() as usize;
    let hop = sr / ONSET_RATE;
    let bins = win / 2 + 1;
    let hann: Vec<f64> = (0..win)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / win as f64).cos())
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(win);
    let mut buf = vec![Complex::new(0.0, 0.0); win];

    // None marks frames without a full window.
    let mut spectra: Vec<Option<Vec<f64>>> = Vec::with_capacity(frames);
    let mut peak_db = f64::NEG_INFINITY;
    for k in 0..frames {
        let end = ((k + 1) as f64 * hop).round() as usize;
        if end < win || end > x.len() {
            spectra.push(None);
            continue;
        }
        for (b, (s, w)) in buf.iter_mut().zip(x[end - win..end].iter().zip(&hann)) {
            *b = Complex::new(s * w, 0.0);
        }
        fft.process(&mut buf);
        let db: Vec<f64> = buf[..bins].iter().map(|c| 20.0 * c.norm().max(1e-10).log10()).collect();
        peak_db = db.iter().copied().fold(peak_db, f64::max);
        spectra.push(Some(db));
    }
    let floor = peak_db - LOG_RANGE_DB;
    let mut flux = vec![0.0; frames];
    for k in 1..frames {
        if let (Some(prev), Some(cur)) = (&spectra[k - 1], &spectra[k]) {
            flux[k] = cur
                .iter()
                .zip(prev)
                .map(|(c, p)| (c.max(floor) - p.max(floor)).max(0.0))
                .sum();
        }
    }
    let max = flux.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        flux.iter_mut().for_each(|v| *v /= max);
    }
    if flux.len() < 2 {
        flux.resize(2, 0.0);
    }
    TimeSeries::new(flux, ONSET_RATE).map_err(|e| BeatError::BadAudio(e.to_string()))
}

/// Global tempo from the onset autocorrelation, weighted by a log-Gaussian
/// prior centred at 120 BPM with a one-octave standard deviation.
pub fn estimate_tempo(onset: &TimeSeries, bpm_range: (f64, f64)) -> Result<f64> {
    let (lo, hi) = bpm_range;
    if !(lo > 0.0 && hi > lo) {
        return Err(BeatError::BadTempo(lo));
    }
    let rate = onset.rate();
    let x = onset.samples();
    let n = x.len();
    let min_lag = ((60.0 * rate / hi).floor() as usize).max(1);
    let max_lag = ((60.0 * rate / lo).ceil() as usize).min(n.saturating_sub(2));
    let zero_lag: f64 = x.iter().map(|v| v * v).sum();
    if zero_lag <= 0.0 || min_lag + 2 > max_lag {
        return Err(BeatError::NoPeriodicity);
    }
    let ac = |lag: usize| -> f64 { x[..n - lag].iter().zip(&x[lag..]).map(|(a, b)| a * b).sum() };
    let center = 60.0 * rate / 120.0;
    let weight = |lag: f64| (-0.5 * (lag / center).log2().powi(2)).exp();
    let weighted: Vec<f64> = (min_lag - 1..=max_lag + 1).map(|l| weight(l as f64) * ac(l)).collect();
    let (best_i, &best) = weighted[1..weighted.len() - 1]
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i + 1, v))
        .expect("lag range is non-empty");
    if best < 0.1 * zero_lag {
        return Err(BeatError::NoPeriodicity);
    }
    let (y0, y1, y2) = (weighted[best_i - 1], best, weighted[best_i + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    let delta = if denom < 0.0 { (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    let lag = (min_lag - 1 + best_i) as f64 + delta;
    Ok((60.0 * rate / lag).clamp(lo, hi))
}

fn gaussian_smooth(x: &[f64], sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius).map(|i| (-0.5 * (i as f64 / sigma).powi(2)).exp()).collect();
    let n = x.len() as isize;
    (0..n)
        .map(|t| {
            kernel
                .iter()
                .enumerate()
                .map(|(j, w)| {
                    let s = t + j as isize - radius;
                    if (0..n).contains(&s) {
                        w * x[s as usize]
                    } else {
                        0.0
                    }
                })
                .sum()
        })
        .collect()
}

/// Dynamic-programming beat placement for a known tempo.
pub fn track_beats(onset: &TimeSeries, bpm: f64, tightness: f64) -> Result<BeatGrid> {
    check_bpm(bpm)?;
    let x = onset.samples();
    if x.iter().all(|&v| v == 0.0) {
        return Err(BeatError::NoBeats);
    }
    let rate = onset.rate();
    let period = 60.0 * rate / bpm;
    let smoothed = gaussian_smooth(x, (period / 32.0).max(0.5));
    let mean = smoothed.iter().sum::<f64>() / smoothed.len() as f64;
    let sd = (smoothed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / smoothed.len() as f64).sqrt();
    if sd <= 0.0 {
        return Err(BeatError::NoBeats);
    }
    let local: Vec<f64> = smoothed.iter().map(|v| v / sd).collect();

    let n = local.len();
    let lo = ((0.8 * period).round() as usize).max(1);
    let hi = ((1.2 * period).round() as usize).max(lo);
    let mut score = local.clone();
    let mut back: Vec<Option<usize>> = vec![None; n];
    for t in lo..n {
        let mut best: Option<(f64, usize)> = None;
        for gap in lo..=hi.min(t) {
            let p = t - gap;
            let s = score[p] - tightness * (gap as f64 / period).ln().powi(2);
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, p));
            }
        }
        if let Some((s, p)) = best {
            score[t] = local[t] + s;
            back[t] = Some(p);
        }
    }
    // Start from the last local maximum of the cumulative score that reaches
    // half the median local maximum.
    let peaks: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&t| score[t] > score[t - 1] && score[t] >= score[t + 1])
        .collect();
    let mut peak_scores: Vec<f64> = peaks.iter().map(|&t| score[t]).collect();
    peak_scores.sort_by(f64::total_cmp);
    let threshold = 0.5 * peak_scores.get(peak_scores.len() / 2).copied().unwrap_or(0.0);
    let mut t = peaks
        .iter()
        .rev()
        .find(|&&t| score[t] >= threshold)
        .copied()
        .unwrap_or_else(|| (0..n).max_by(|&a, &b| score[a].total_cmp(&score[b])).expect("non-empty envelope"));
    let mut frames = vec![t];
    while let Some(p) = back[t] {
        frames.push(p);
        t = p;
    }
    frames.reverse();
    // Drop leading and trailing beats that sit on weak onsets.
    let strength = (frames.iter().map(|&f| local[f].powi(2)).sum::<f64>() / frames.len() as f64).sqrt();
    let weak = |f: &usize| local[*f] < 0.5 * strength;
    let first = frames.iter().position(|f| !weak(f)).unwrap_or(frames.len());
    let last = frames.iter().rposition(|f| !weak(f)).map_or(first, |i| i + 1);
    let frames = &frames[first..last.max(first)];
    let beats: Vec<f64> = frames.iter().map(|&f| f as f64 / rate).collect();
    if beats.len() < 2 {
        return Err(BeatError::NoBeats);
    }
    let mut gaps: Vec<f64> = beats.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(f64::total_cmp);
    let mid = gaps.len() / 2;
    let median = if gaps.len() % 2 == 1 { gaps[mid] } else { 0.5 * (gaps[mid - 1] + gaps[mid]) };
    BeatGrid::new(beats, 60.0 / median, DEFAULT_STRONG_PERIOD)
}

/// Frames `[start_frame, end_frame)` spanning `beats_per_segment` beats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start_frame: usize,
    pub end_frame: usize,
    pub start_beat: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end_frame - self.start_frame
    }

    pub fn is_empty(&self) -> bool {
        self.end_frame == self.start_frame
    }
}

/// Splits the clip at every `beats_per_segment`-th beat inside it. Spans
/// before the first and after the last usable beat are dropped.
pub fn segment_by_beats(clip: &MotionClip, grid: &BeatGrid, beats_per_segment: usize) -> Result<Vec<Segment>> {
    segment_frames(clip.frame_count(), clip.frame_time(), grid, beats_per_segment)
}

/// Frame-count form of [`segment_by_beats`] for data without a skeleton.
pub fn segment_frames(
    frame_count: usize,
    frame_time: f64,
    grid: &BeatGrid,
    beats_per_segment: usize,
) -> Result<Vec<Segment>> {
    let per = beats_per_segment.max(1);
    let last = frame_count.saturating_sub(1);
    let inside: Vec<(usize, usize)> = grid
        .beats
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= -0.5 * frame_time && t <= (last as f64 + 0.5) * frame_time)
        .map(|(i, &t)| (i, ((t / frame_time).round().max(0.0) as usize).min(last)))
        .collect();
    if inside.len() < 2 {
        return Err(BeatError::GridOutsideClip);
    }
    Ok(inside
        .iter()
        .step_by(per)
        .zip(inside.iter().skip(per).step_by(per))
        .filter(|(a, b)| b.1 > a.1)
        .map(|(&(beat, start), &(_, end))| Segment { start_frame: start, end_frame: end, start_beat: beat })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn click_track(times: &[f64], seconds: f64, rate: f64) -> TimeSeries {
        let n = (seconds * rate) as usize;
        let mut x = vec![0.0; n];
        let burst = (0.005 * rate) as usize;
        for &t in times {
            let s = (t * rate).round() as usize;
            for j in 0..burst {
                if s + j < n {
                    let decay = (-(j as f64) / (0.3 * burst as f64)).exp();
                    x[s + j] = 0.8 * decay * if j % 2 == 0 { 1.0 } else { -1.0 };
                }
            }
        }
        TimeSeries::new(x, rate).unwrap()
    }

    #[test]
    fn fixed_grid_examples() {
        // 131 full periods fit in 60.5 s; the beat at t = 0 makes 132.
        let g = fixed_grid(130.0, 60.5, 0.0).unwrap();
        assert_eq!(g.len(), 132);
        assert!((g.beats[1] - 0.4615).abs() < 1e-4);
        assert!(*g.beats.last().unwrap() < 60.5);
        assert_eq!(g.strong.iter().filter(|&&s| s).count(), 33);
        let g = fixed_grid(60.0, 10.0, 0.5).unwrap();
        assert_eq!(g.len(), 10);
        assert!((g.beats[9] - 9.5).abs() < 1e-12);
        assert_eq!(fixed_grid(10.0, 60.0, 0.0), Err(BeatError::BadTempo(10.0)));
        assert!(fixed_grid(60.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn grid_json_validates() {
        let g = fixed_grid(120.0, 3.0, 0.0).unwrap();
        let json = serde_json::to_string(&g).unwrap();
        assert!(json.starts_with("{\"bpm\":120.0,\"beats\":["));
        assert_eq!(serde_json::from_str::<BeatGrid>(&json).unwrap(), g);
        let bad = r#"{"bpm":120,"beats":[0.0,0.5,1.5],"strong":[true,false,false]}"#;
        assert!(serde_json::from_str::<BeatGrid>(bad).is_err());
    }

    #[test]
    fn silence() {
        let audio = TimeSeries::new(vec![0.0; 16000], 8000.0).unwrap();
        let onset = onset_envelope(&audio).unwrap();
        assert_eq!(onset.rate(), 100.0);
        assert_eq!(onset.len(), 200);
        assert!(onset.samples().iter().all(|&v| v == 0.0));
        assert_eq!(estimate_tempo(&onset, (60.0, 240.0)), Err(BeatError::NoPeriodicity));
        assert_eq!(track_beats(&onset, 120.0, 400.0), Err(BeatError::NoBeats));
    }

    #[test]
    fn short_or_low_rate_audio() {
        let audio = TimeSeries::new(vec![0.0; 7999], 8000.0).unwrap();
        assert!(matches!(onset_envelope(&audio), Err(BeatError::AudioTooShort(_))));
        let audio = TimeSeries::new(vec![0.0; 8000], 4000.0).unwrap();
        assert!(matches!(onset_envelope(&audio), Err(BeatError::BadAudio(_))));
    }

    #[test]
    fn click_peaks_precede_clicks_by_at_most_one_hop() {
        let times: Vec<f64> = (0..10).map(|k| 0.25 + 0.5 * k as f64).collect();
        let onset = onset_envelope(&click_track(&times, 5.5, 8000.0)).unwrap();
        let x = onset.samples();
        for &t in &times {
            let k0 = ((t - 0.04) * 100.0) as usize;
            let peak = (k0..k0 + 8).max_by(|&a, &b| x[a].total_cmp(&x[b])).unwrap();
            let stamp = peak as f64 / 100.0;
            assert!(stamp <= t + 1e-9 && t - stamp <= 0.010 + 1e-9, "click {t} peak {stamp}");
        }
    }

    #[test]
    fn white_noise_has_no_dominant_peak() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..24000).map(|_| rng.random_range(-0.5..0.5)).collect();
            let onset = onset_envelope(&TimeSeries::new(x, 8000.0).unwrap()).unwrap();
            let mut active: Vec<f64> = onset.samples().iter().copied().filter(|&v| v > 0.0).collect();
            active.sort_by(f64::total_cmp);
            let median = active[active.len() / 2];
            assert!(1.0 <= 3.0 * median, "seed {seed}: median {median}");
        }
    }

    #[test]
    fn tempo_and_beats_from_clicks() {
        for bpm in [90.0, 130.0, 150.0] {
            let grid = fixed_grid(bpm, 20.0, 0.3).unwrap();
            let onset = onset_envelope(&click_track(&grid.beats, 20.0, 8000.0)).unwrap();
            let est = estimate_tempo(&onset, (60.0, 240.0)).unwrap();
            assert!((est - bpm).abs() <= 2.0, "{bpm}: {est}");
            let tracked = track_beats(&onset, est, 400.0).unwrap();
            assert!(tracked.len().abs_diff(grid.len()) <= 1);
            for &b in &tracked.beats {
                let err = grid.beats.iter().map(|g| (g - b).abs()).fold(f64::INFINITY, f64::min);
                assert!(err <= 0.015, "{bpm}: beat {b} off by {err}");
            }
        }
    }

    #[test]
    fn segments_tile_the_beat_span() {
        let grid = fixed_grid(60.0, 10.0, 0.0).unwrap();
        let segs = segment_frames(400, 0.025, &grid, 1).unwrap();
        assert_eq!(segs.len(), 9);
        for (k, s) in segs.iter().enumerate() {
            assert_eq!(s.len(), 40);
            assert_eq!(s.start_beat, k);
            if k > 0 {
                assert_eq!(segs[k - 1].end_frame, s.start_frame);
            }
        }
        assert_eq!(segment_frames(400, 0.025, &grid, 4).unwrap().len(), 2);
        let late = BeatGrid::new(vec![20.0, 21.0, 22.0], 60.0, 4).unwrap();
        assert_eq!(segment_frames(400, 0.025, &late, 1), Err(BeatError::GridOutsideClip));
    }
}
