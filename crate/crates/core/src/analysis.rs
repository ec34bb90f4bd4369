//! Time-frequency views of a decomposition: the Hilbert spectrum, energy
//! weighted average frequencies per segment, summary statistics, Fibonacci
//! relations between IMF frequencies and singular-IMF detection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beat::Segment;
use crate::memd::MultivariateDecomposition;
use crate::signal_core::{analytic_signal, instantaneous_attributes, Decomposition, SignalError, TimeSeries};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("invalid spectrum binning: {0}")]
    BadBinning(String),
    #[error("need at least 3 frequencies, got {0}")]
    TooFewFrequencies(usize),
    #[error("need at least 4 IMFs, got {0}")]
    TooFewIMFs(usize),
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

/// Instantaneous amplitude and frequency of one IMF. A component too weak to
/// carry a phase gets NaN frequencies so every consumer treats it as
/// excluded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImfTrace {
    pub amplitude: Vec<f64>,
    pub frequency: Vec<f64>,
}

pub fn imf_trace(imf: &[f64], rate: f64) -> Result<ImfTrace> {
    let z = analytic_signal(&TimeSeries::new(imf.to_vec(), rate)?)?;
    match instantaneous_attributes(&z) {
        Ok(a) => Ok(ImfTrace { amplitude: a.amplitude, frequency: a.frequency }),
        Err(SignalError::DegenerateSignal) => {
            let amplitude: Vec<f64> = z.real_part.iter().zip(&z.imag_part).map(|(r, i)| r.hypot(*i)).collect();
            let frequency = vec![f64::NAN; amplitude.len()];
            Ok(ImfTrace { amplitude, frequency })
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumParams {
    /// Seconds per time bin.
    pub time_bin: f64,
    /// Upper frequency edge in Hz; `None` means Nyquist.
    pub freq_max: Option<f64>,
    pub freq_bins: usize,
    pub keep_traces: bool,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        Self { time_bin: 0.05, freq_max: None, freq_bins: 100, keep_traces: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HilbertSpectrum {
    /// Bin edges in seconds, one more than the number of time bins.
    pub time_edges: Vec<f64>,
    /// Bin edges in Hz.
    pub freq_edges: Vec<f64>,
    /// `energy[t][f]`: summed squared amplitude.
    pub energy: Vec<Vec<f64>>,
    /// Energy of samples with negative, undefined or out-of-range frequency.
    pub overflow_energy: f64,
    pub overflow_samples: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub per_imf: Vec<ImfTrace>,
}

impl HilbertSpectrum {
    pub fn grid_energy(&self) -> f64 {
        self.energy.iter().flatten().sum()
    }

    /// Dense CSV with one row per cell, keyed by the lower bin edges.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_bin,freq_bin,energy\n");
        for (t, row) in self.energy.iter().enumerate() {
            for (f, e) in row.iter().enumerate() {
                out.push_str(&format!("{},{},{:e}\n", self.time_edges[t], self.freq_edges[f], e));
            }
        }
        out
    }

    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "time_edges": self.time_edges,
            "freq_edges": self.freq_edges,
            "overflow_energy": self.overflow_energy,
            "overflow_samples": self.overflow_samples,
            "grid_energy": self.grid_energy(),
        })
    }
}

pub fn hilbert_spectrum(d: &Decomposition, params: &SpectrumParams) -> Result<HilbertSpectrum> {
    let nyquist = d.rate / 2.0;
    let freq_max = params.freq_max.unwrap_or(nyquist);
    if !(params.time_bin.is_finite() && params.time_bin > 0.0) {
        return Err(AnalysisError::BadBinning(format!("time bin {} s", params.time_bin)));
    }
    if params.freq_bins == 0 {
        return Err(AnalysisError::BadBinning("zero frequency bins".into()));
    }
    if !(freq_max > 0.0 && freq_max <= nyquist) {
        return Err(AnalysisError::BadBinning(format!("freq_max {freq_max} Hz outside (0, {nyquist}]")));
    }
    let n = d.len();
    let last_t = n.saturating_sub(1) as f64 / d.rate;
    let time_count = (last_t / params.time_bin).floor() as usize + 1;
    let df = freq_max / params.freq_bins as f64;
    let mut spec = HilbertSpectrum {
        time_edges: (0..=time_count).map(|k| k as f64 * params.time_bin).collect(),
        freq_edges: (0..=params.freq_bins).map(|k| k as f64 * df).collect(),
        energy: vec![vec![0.0; params.freq_bins]; time_count],
        overflow_energy: 0.0,
        overflow_samples: 0,
        per_imf: Vec::new(),
    };
    for imf in &d.imfs {
        let trace = imf_trace(imf, d.rate)?;
        for (i, (a, f)) in trace.amplitude.iter().zip(&trace.frequency).enumerate() {
            let e = a * a;
            if !(*f >= 0.0 && *f <= freq_max) {
                spec.overflow_energy += e;
                spec.overflow_samples += 1;
                continue;
            }
            let tb = ((i as f64 / d.rate / params.time_bin).floor() as usize).min(time_count - 1);
            let fb = ((f / df).floor() as usize).min(params.freq_bins - 1);
            spec.energy[tb][fb] += e;
        }
        if params.keep_traces {
            spec.per_imf.push(trace);
        }
    }
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WafaReport {
    /// `[imf][segment]`, Hz.
    pub per_imf_per_segment: Vec<Vec<f64>>,
    pub per_imf_overall: Vec<f64>,
    /// Fraction of IMF samples dropped for non-positive or undefined
    /// frequency or negligible amplitude.
    pub excluded_fraction: f64,
    /// `(imf, segment)` cells, 0-based, whose weight sum was zero.
    pub empty_cells: Vec<(usize, usize)>,
}

#[derive(Default, Clone, Copy)]
struct Weighted {
    num: f64,
    den: f64,
}

impl Weighted {
    fn mean(self) -> Option<f64> {
        (self.den > 0.0).then(|| self.num / self.den)
    }
}

/// Energy weighted mean frequency per IMF and segment. An empty segment list
/// means one segment covering the whole clip.
pub fn wafa(d: &Decomposition, segments: &[Segment]) -> Result<WafaReport> {
    wafa_pooled(&[d], segments)
}

/// As [`wafa`], pooling the weights of every channel of a multivariate
/// decomposition so that each IMF gets one frequency.
pub fn wafa_multivariate(md: &MultivariateDecomposition, segments: &[Segment]) -> Result<WafaReport> {
    let refs: Vec<&Decomposition> = md.per_channel.iter().collect();
    wafa_pooled(&refs, segments)
}

fn wafa_pooled(decs: &[&Decomposition], segments: &[Segment]) -> Result<WafaReport> {
    let first = decs.first().ok_or_else(|| AnalysisError::BadParameter("no decompositions".into()))?;
    let n = first.len();
    let imf_count = first.imf_count();
    if decs.iter().any(|d| d.len() != n || d.imf_count() != imf_count) {
        return Err(AnalysisError::BadParameter("channels differ in length or IMF count".into()));
    }
    let whole = [Segment { start_frame: 0, end_frame: n, start_beat: 0 }];
    let segments = if segments.is_empty() { &whole[..] } else { segments };
    if let Some(s) = segments.iter().find(|s| s.end_frame > n || s.start_frame > s.end_frame) {
        return Err(AnalysisError::BadParameter(format!(
            "segment [{}, {}) outside clip of {n} frames",
            s.start_frame, s.end_frame
        )));
    }

    let mut cells = vec![vec![Weighted::default(); segments.len()]; imf_count];
    let mut overall = vec![Weighted::default(); imf_count];
    let mut excluded = 0usize;
    for d in decs {
        for (k, imf) in d.imfs.iter().enumerate() {
            let trace = imf_trace(imf, d.rate)?;
            let max_a = trace.amplitude.iter().copied().fold(0.0, f64::max);
            let usable: Vec<bool> = trace
                .amplitude
                .iter()
                .zip(&trace.frequency)
                .map(|(a, f)| *f > 0.0 && *a > 1e-9 * max_a)
                .collect();
            excluded += usable.iter().filter(|u| !**u).count();
            let contribution = |range: std::ops::Range<usize>| {
                let mut w = Weighted::default();
                for i in range.filter(|&i| usable[i]) {
                    let e = trace.amplitude[i].powi(2);
                    w.num += e * trace.frequency[i];
                    w.den += e;
                }
                w
            };
            let all = contribution(0..n);
            overall[k].num += all.num;
            overall[k].den += all.den;
            for (s, seg) in segments.iter().enumerate() {
                let w = contribution(seg.start_frame..seg.end_frame);
                cells[k][s].num += w.num;
                cells[k][s].den += w.den;
            }
        }
    }
    let mut empty_cells = Vec::new();
    let per_imf_per_segment = cells
        .iter()
        .enumerate()
        .map(|(k, row)| {
            row.iter()
                .enumerate()
                .map(|(s, w)| {
                    w.mean().unwrap_or_else(|| {
                        empty_cells.push((k, s));
                        0.0
                    })
                })
                .collect()
        })
        .collect();
    let total = decs.len() * imf_count * n;
    Ok(WafaReport {
        per_imf_per_segment,
        per_imf_overall: overall.iter().map(|w| w.mean().unwrap_or(0.0)).collect(),
        excluded_fraction: if total == 0 { 0.0 } else { excluded as f64 / total as f64 },
        empty_cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub imf_count: usize,
    /// `[min, max]` whole-clip weighted frequency over the IMFs listed in
    /// `range_imfs`.
    pub freq_range: [f64; 2],
    /// 1-based IMFs whose energy over the central 80% of the clip is at least
    /// [`RANGE_ENERGY_SHARE`] of the strongest IMF's. Components that live
    /// only in the boundary regions are sifting artefacts and are left out.
    pub range_imfs: Vec<usize>,
    pub trend_rms_fraction: f64,
}

pub const RANGE_ENERGY_SHARE: f64 = 0.01;

fn interior_energy(decs: &[&Decomposition], k: usize) -> f64 {
    decs.iter()
        .map(|d| {
            let n = d.len();
            let trim = n / 10;
            d.imfs[k][trim..n - trim].iter().map(|v| v * v).sum::<f64>()
        })
        .sum()
}

fn summary_from(decs: &[&Decomposition], report: &WafaReport) -> Summary {
    let imf_count = decs[0].imf_count();
    let energies: Vec<f64> = (0..imf_count).map(|k| interior_energy(decs, k)).collect();
    let strongest = energies.iter().copied().fold(0.0, f64::max);
    let range_imfs: Vec<usize> = (0..imf_count)
        .filter(|&k| {
            strongest > 0.0 && energies[k] >= RANGE_ENERGY_SHARE * strongest && report.per_imf_overall[k] > 0.0
        })
        .map(|k| k + 1)
        .collect();
    let (lo, hi) = range_imfs
        .iter()
        .map(|&k| report.per_imf_overall[k - 1])
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), f| (lo.min(f), hi.max(f)));
    let trend_sq: f64 = decs.iter().map(|d| sum_sq(&d.trend)).sum();
    let input_sq: f64 = decs.iter().map(|d| sum_sq(&d.reconstruct())).sum();
    Summary {
        imf_count,
        freq_range: if lo.is_finite() { [lo, hi] } else { [0.0, 0.0] },
        range_imfs,
        trend_rms_fraction: if input_sq > 0.0 { (trend_sq / input_sq).sqrt() } else { 0.0 },
    }
}

fn sum_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn summarize(d: &Decomposition) -> Result<Summary> {
    Ok(summary_from(&[d], &wafa(d, &[])?))
}

pub fn summarize_multivariate(md: &MultivariateDecomposition) -> Result<Summary> {
    let refs: Vec<&Decomposition> = md.per_channel.iter().collect();
    Ok(summary_from(&refs, &wafa_multivariate(md, &[])?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FibonacciTriple {
    /// 1-based index of the first IMF in the triple.
    pub n: usize,
    pub f_n: f64,
    pub f_n1: f64,
    pub f_n2: f64,
    pub residual: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FibonacciReport {
    pub triples: Vec<FibonacciTriple>,
    pub chain_length: usize,
    pub tolerance: f64,
}

/// Checks `f[n] ≈ f[n+1] + f[n+2]` on every consecutive triple.
pub fn fibonacci_relations(freqs: &[f64], tolerance: f64) -> Result<FibonacciReport> {
    if freqs.len() < 3 {
        return Err(AnalysisError::TooFewFrequencies(freqs.len()));
    }
    if !(tolerance.is_finite() && tolerance >= 0.0) {
        return Err(AnalysisError::BadParameter(format!("tolerance {tolerance}")));
    }
    // Relative slack absorbs rounding in the sum (0.1 + 0.2 != 0.3).
    let slack = 1e-9 * freqs.iter().fold(0.0f64, |m, f| m.max(f.abs()));
    let triples: Vec<FibonacciTriple> = freqs
        .windows(3)
        .enumerate()
        .map(|(i, w)| {
            let residual = (w[0] - (w[1] + w[2])).abs();
            FibonacciTriple {
                n: i + 1,
                f_n: w[0],
                f_n1: w[1],
                f_n2: w[2],
                residual,
                satisfied: residual <= tolerance + slack,
            }
        })
        .collect();
    let mut chain_length = 0;
    let mut run = 0;
    for t in &triples {
        run = if t.satisfied { run + 1 } else { 0 };
        chain_length = chain_length.max(run);
    }
    Ok(FibonacciReport { triples, chain_length, tolerance })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingularReport {
    /// 1-based IMF indices.
    pub flagged: Vec<usize>,
    /// 1-based indices of IMFs involved in order violations within the factor.
    pub warnings: Vec<usize>,
}

pub const SINGULAR_FACTOR: f64 = 1.5;

/// Flags IMFs whose whole-clip frequency breaks the descending order by more
/// than [`SINGULAR_FACTOR`]. Of the two IMFs around such a break, the one
/// further (in log frequency) from the geometric mean of its own neighbours
/// is the outlier.
pub fn detect_singular_imfs(report: &WafaReport) -> Result<SingularReport> {
    let f = &report.per_imf_overall;
    if f.len() < 4 {
        return Err(AnalysisError::TooFewIMFs(f.len()));
    }
    let lf: Vec<f64> = f.iter().map(|v| v.max(1e-12).ln()).collect();
    let deviation = |i: usize| {
        let mut neighbours = Vec::with_capacity(2);
        if i > 0 {
            neighbours.push(lf[i - 1]);
        }
        if i + 1 < lf.len() {
            neighbours.push(lf[i + 1]);
        }
        (lf[i] - neighbours.iter().sum::<f64>() / neighbours.len() as f64).abs()
    };
    let mut out = SingularReport::default();
    for k in 0..f.len() - 1 {
        if f[k + 1] <= f[k] {
            continue;
        }
        if f[k + 1] > SINGULAR_FACTOR * f[k] {
            let pick = if deviation(k + 1) >= deviation(k) { k + 1 } else { k };
            if !out.flagged.contains(&(pick + 1)) {
                out.flagged.push(pick + 1);
            }
        } else {
            for i in [k + 1, k + 2] {
                if !out.warnings.contains(&i) {
                    out.warnings.push(i);
                }
            }
        }
    }
    out.flagged.sort_unstable();
    out.warnings.retain(|i| !out.flagged.contains(i));
    out.warnings.sort_unstable();
    Ok(out)
}
