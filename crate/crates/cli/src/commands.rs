use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use hht_motion::analysis::{
    detect_singular_imfs, fibonacci_relations, hilbert_spectrum, summarize_multivariate, wafa_multivariate,
    AnalysisError, HilbertSpectrum, SpectrumParams,
};
use hht_motion::archive::Archive;
use hht_motion::beat::{
    estimate_tempo, fixed_grid, onset_envelope, read_wav, segment_frames, track_beats, BeatGrid,
    DEFAULT_STRONG_PERIOD,
};
use hht_motion::edit::{blend, synthesize_clip, BlendSpec};
use hht_motion::memd::{direction_set, memd, na_memd, MultivariateDecomposition, MultivariateSeries, NaMemdParams};
use hht_motion::mocap_io::{extract_channels, parse_bvh, resample, write_bvh, MotionClip};
use hht_motion::signal_core::{emd, Decomposition, EmdParams, TimeSeries};
use serde_json::json;

use crate::error::{code, CliError, CliResult};
use crate::manifest::{suffixed, write_atomic, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Emd,
    Memd,
    NaMemd,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Emd => "emd",
            Method::Memd => "memd",
            Method::NaMemd => "na-memd",
        }
    }
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// Input BVH file.
    pub bvh: PathBuf,
    /// Comma-separated channel labels such as `Hips.Zrotation`; all channels
    /// when omitted.
    #[arg(long, value_delimiter = ',')]
    pub channels: Vec<String>,
    #[arg(long, value_enum, default_value = "na-memd")]
    pub method: Method,
    #[arg(long, default_value_t = 0.25)]
    pub sd_threshold: f64,
    /// Projection directions (memd, na-memd).
    #[arg(long, default_value_t = 64)]
    pub directions: usize,
    /// Noise standard deviation relative to the mean channel RMS (na-memd).
    #[arg(long, default_value_t = 0.09)]
    pub noise_pct: f64,
    #[arg(long, default_value_t = 1)]
    pub noise_channels: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Resample the clip before decomposing.
    #[arg(long)]
    pub target_fps: Option<f64>,
    /// Output archive (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BeatsArgs {
    /// Music (WAV) to track beats in.
    #[arg(conflicts_with = "bpm", required_unless_present = "bpm")]
    pub wav: Option<PathBuf>,
    /// Fixed tempo instead of tracking.
    #[arg(long)]
    pub bpm: Option<f64>,
    /// Clip length in seconds for a fixed grid.
    #[arg(long, requires = "bpm")]
    pub duration: Option<f64>,
    /// Time of the first beat for a fixed grid.
    #[arg(long, default_value_t = 0.0, requires = "bpm")]
    pub offset: f64,
    #[arg(long, default_value_t = 60.0)]
    pub min_bpm: f64,
    #[arg(long, default_value_t = 240.0)]
    pub max_bpm: f64,
    /// Penalty on deviations from the estimated period.
    #[arg(long, default_value_t = 400.0)]
    pub tightness: f64,
    /// Every n-th beat is marked strong.
    #[arg(long, default_value_t = DEFAULT_STRONG_PERIOD)]
    pub strong_period: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub archive: PathBuf,
    /// Beat grid JSON; the whole clip is one segment when omitted.
    #[arg(long)]
    pub beats: Option<PathBuf>,
    /// Beats per segment.
    #[arg(long, default_value_t = DEFAULT_STRONG_PERIOD)]
    pub beats_per_segment: usize,
    /// Fibonacci tolerance in Hz.
    #[arg(long, default_value_t = 0.05)]
    pub fib_tolerance: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    pub archive: PathBuf,
    /// Restrict to one channel; channels are pooled otherwise.
    #[arg(long)]
    pub channel: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub time_bin: f64,
    #[arg(long, default_value_t = 100)]
    pub freq_bins: usize,
    /// Upper frequency edge in Hz; Nyquist when omitted.
    #[arg(long)]
    pub freq_max: Option<f64>,
    /// Output CSV; the bin edges go to `<out>.sidecar.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BlendArgs {
    /// Archive edited in place (the `a` side).
    pub a: PathBuf,
    /// Archive supplying swapped or blended components.
    pub b: PathBuf,
    #[arg(long)]
    pub spec: PathBuf,
    /// BVH whose skeleton and untouched channels frame the result.
    #[arg(long)]
    pub template: PathBuf,
    /// Alignment rate; overrides the spec's `target_rate`.
    #[arg(long)]
    pub target_fps: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

fn read(path: &Path, manifest: &mut RunManifest) -> CliResult<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    manifest.add_input(path, &bytes);
    Ok(bytes)
}

fn read_text(path: &Path, manifest: &mut RunManifest) -> CliResult<String> {
    String::from_utf8(read(path, manifest)?)
        .map_err(|_| CliError::new(code::PARSE, format!("{}: not UTF-8 text", path.display())))
}

fn read_archive(path: &Path, manifest: &mut RunManifest) -> CliResult<MultivariateDecomposition> {
    let archive = Archive::from_json(&read_text(path, manifest)?)
        .map_err(|e| CliError::from(e).context(path))?;
    archive.to_multivariate().map_err(|e| CliError::from(e).context(path))
}

fn read_clip(path: &Path, manifest: &mut RunManifest) -> CliResult<MotionClip> {
    parse_bvh(&read_text(path, manifest)?).map_err(|e| CliError::from(e).context(path))
}

fn json_bytes<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    text.into_bytes()
}

impl CliError {
    fn context(mut self, path: &Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }
}

/// Univariate EMD per channel, padded with zero IMFs to a common count.
fn emd_per_channel(x: &MultivariateSeries, params: &EmdParams) -> CliResult<MultivariateDecomposition> {
    let mut per_channel = x
        .channels()
        .iter()
        .map(|c| emd(&TimeSeries::new(c.clone(), x.rate())?, params))
        .collect::<Result<Vec<Decomposition>, _>>()?;
    let count = per_channel.iter().map(Decomposition::imf_count).max().unwrap_or(0);
    for d in &mut per_channel {
        let n = d.len();
        d.imfs.resize(count, vec![0.0; n]);
    }
    let meta = per_channel[0].meta.clone();
    Ok(MultivariateDecomposition::new(per_channel, x.labels().to_vec(), meta)?)
}

pub fn decompose(a: &DecomposeArgs, argv: &[String]) -> CliResult<()> {
    let mut manifest = RunManifest::new("decompose", argv);
    let mut clip = read_clip(&a.bvh, &mut manifest)?;
    if let Some(fps) = a.target_fps {
        clip = resample(&clip, fps)?;
    }
    let selection = if a.channels.is_empty() { clip.skeleton().channel_labels() } else { a.channels.clone() };
    let x = extract_channels(&clip, &selection)?;
    let emd_params = EmdParams { sd_threshold: a.sd_threshold, ..EmdParams::default() };
    let md = match a.method {
        Method::Emd => emd_per_channel(&x, &emd_params)?,
        Method::Memd => memd(&x, &direction_set(x.channel_count(), a.directions, a.seed)?, &emd_params)?,
        Method::NaMemd => na_memd(
            &x,
            &NaMemdParams {
                emd: emd_params,
                noise_channels: a.noise_channels,
                noise_pct: a.noise_pct,
                direction_count: a.directions,
                seed: a.seed,
            },
        )?,
    };
    let archive = Archive::from_multivariate(&md);
    let mut text = archive.to_json();
    text.push('\n');
    write_atomic(&a.out, text.as_bytes())?;

    manifest.parameters = json!({
        "method": a.method.name(),
        "channels": selection,
        "sd_threshold": a.sd_threshold,
        "directions": a.directions,
        "noise_pct": a.noise_pct,
        "noise_channels": a.noise_channels,
        "target_fps": a.target_fps,
    });
    manifest.seed = Some(a.seed);
    manifest.outputs = vec![a.out.display().to_string()];
    manifest.write_for(&a.out)?;

    let summary = summarize_multivariate(&md)?;
    println!("IMFs: {}", md.imf_count());
    println!("trend RMS fraction: {:.6}", summary.trend_rms_fraction);
    Ok(())
}

pub fn beats(a: &BeatsArgs, argv: &[String]) -> CliResult<()> {
    let mut manifest = RunManifest::new("beats", argv);
    let grid = match (&a.wav, a.bpm) {
        (Some(path), None) => {
            let audio = read_wav(&read(path, &mut manifest)?).map_err(|e| CliError::from(e).context(path))?;
            let onset = onset_envelope(&audio)?;
            let tempo = estimate_tempo(&onset, (a.min_bpm, a.max_bpm))?;
            track_beats(&onset, tempo, a.tightness)?
        }
        (None, Some(bpm)) => {
            let duration = a.duration.ok_or_else(|| CliError::usage("--bpm needs --duration"))?;
            fixed_grid(bpm, duration, a.offset)?
        }
        _ => return Err(CliError::usage("give exactly one of a WAV file or --bpm")),
    };
    let grid = if a.strong_period == DEFAULT_STRONG_PERIOD {
        grid
    } else {
        BeatGrid::new(grid.beats, grid.bpm, a.strong_period)?
    };
    write_atomic(&a.out, &json_bytes(&grid))?;

    manifest.parameters = json!({
        "bpm": a.bpm,
        "duration": a.duration,
        "offset": a.offset,
        "bpm_range": [a.min_bpm, a.max_bpm],
        "tightness": a.tightness,
        "strong_period": a.strong_period,
    });
    manifest.outputs = vec![a.out.display().to_string()];
    manifest.write_for(&a.out)?;
    println!("beats: {} at {:.2} BPM", grid.len(), grid.bpm);
    Ok(())
}

pub fn analyze(a: &AnalyzeArgs, argv: &[String]) -> CliResult<()> {
    let mut manifest = RunManifest::new("analyze", argv);
    let md = read_archive(&a.archive, &mut manifest)?;
    let segments = match &a.beats {
        Some(path) => {
            let grid: BeatGrid = serde_json::from_str(&read_text(path, &mut manifest)?)
                .map_err(|e| CliError::new(code::PARSE, format!("{}: {e}", path.display())))?;
            segment_frames(md.len(), 1.0 / md.rate(), &grid, a.beats_per_segment)?
        }
        None => Vec::new(),
    };
    let wafa = wafa_multivariate(&md, &segments)?;
    let summary = summarize_multivariate(&md)?;
    let mut warnings = Vec::new();
    let fibonacci = match fibonacci_relations(&wafa.per_imf_overall, a.fib_tolerance) {
        Ok(r) => Some(r),
        Err(e @ AnalysisError::TooFewFrequencies(_)) => {
            warnings.push(format!("fibonacci: {e}"));
            None
        }
        Err(e) => return Err(e.into()),
    };
    let singular = match detect_singular_imfs(&wafa) {
        Ok(r) => {
            if !r.flagged.is_empty() {
                warnings.push(format!("singular IMFs: {:?}", r.flagged));
            }
            Some(r)
        }
        Err(e @ AnalysisError::TooFewIMFs(_)) => {
            warnings.push(format!("singular IMFs: {e}"));
            None
        }
        Err(e) => return Err(e.into()),
    };
    let report = json!({
        "labels": md.labels,
        "segments": segments,
        "wafa": wafa,
        "fibonacci": fibonacci,
        "singular": singular,
        "summary": summary,
        "warnings": warnings,
    });
    write_atomic(&a.out, &json_bytes(&report))?;

    manifest.parameters = json!({ "beats_per_segment": a.beats_per_segment, "fib_tolerance": a.fib_tolerance });
    manifest.outputs = vec![a.out.display().to_string()];
    manifest.write_for(&a.out)?;

    let freqs: Vec<String> = wafa.per_imf_overall.iter().map(|f| format!("{f:.3}")).collect();
    println!("WAFA (Hz): {}", freqs.join(" "));
    if let Some(f) = &fibonacci {
        println!("fibonacci chain: {} of {} triples", f.chain_length, f.triples.len());
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

/// Sums spectra built on identical bin edges.
fn pool(mut acc: HilbertSpectrum, other: HilbertSpectrum) -> HilbertSpectrum {
    for (row, o) in acc.energy.iter_mut().zip(other.energy) {
        row.iter_mut().zip(o).for_each(|(e, x)| *e += x);
    }
    acc.overflow_energy += other.overflow_energy;
    acc.overflow_samples += other.overflow_samples;
    acc
}

pub fn spectrum(a: &SpectrumArgs, argv: &[String]) -> CliResult<()> {
    let mut manifest = RunManifest::new("spectrum", argv);
    let md = read_archive(&a.archive, &mut manifest)?;
    let params = SpectrumParams { time_bin: a.time_bin, freq_max: a.freq_max, freq_bins: a.freq_bins, keep_traces: false };
    let channels: Vec<&Decomposition> = match &a.channel {
        Some(label) => {
            let i = md.labels.iter().position(|l| l == label).ok_or_else(|| {
                CliError::new(code::CHANNELS, format!("unknown channel {label:?}; archive has {:?}", md.labels))
            })?;
            vec![&md.per_channel[i]]
        }
        None => md.per_channel.iter().collect(),
    };
    let mut pooled: Option<HilbertSpectrum> = None;
    for d in channels {
        let s = hilbert_spectrum(d, &params)?;
        pooled = Some(match pooled {
            Some(acc) => pool(acc, s),
            None => s,
        });
    }
    let spectrum = pooled.expect("archives have at least one channel");
    let sidecar_path = suffixed(&a.out, ".sidecar.json");
    write_atomic(&a.out, spectrum.to_csv().as_bytes())?;
    let mut sidecar = spectrum.sidecar();
    sidecar["channels"] = json!(a.channel.as_ref().map_or_else(|| md.labels.clone(), |c| vec![c.clone()]));
    write_atomic(&sidecar_path, &json_bytes(&sidecar))?;

    manifest.parameters = json!({
        "channel": a.channel,
        "time_bin": a.time_bin,
        "freq_bins": a.freq_bins,
        "freq_max": a.freq_max,
    });
    manifest.outputs = vec![a.out.display().to_string(), sidecar_path.display().to_string()];
    manifest.write_for(&a.out)?;
    println!(
        "spectrum: {} x {} bins, grid energy {:e}, overflow {:e}",
        spectrum.energy.len(),
        a.freq_bins,
        spectrum.grid_energy(),
        spectrum.overflow_energy
    );
    Ok(())
}

pub fn blend_cmd(a: &BlendArgs, argv: &[String]) -> CliResult<()> {
    let mut manifest = RunManifest::new("blend", argv);
    let mut spec = BlendSpec::from_json(&read_text(&a.spec, &mut manifest)?).map_err(|e| CliError::from(e).context(&a.spec))?;
    if a.target_fps.is_some() {
        spec.target_rate = a.target_fps;
    }
    let da = read_archive(&a.a, &mut manifest)?;
    let db = read_archive(&a.b, &mut manifest)?;
    let template = read_clip(&a.template, &mut manifest)?;
    let edited = blend(&da, &db, &spec)?;
    let clip = synthesize_clip(&template, &edited, &[])?;
    write_atomic(&a.out, write_bvh(&clip).as_bytes())?;

    manifest.parameters = json!({ "spec": spec, "target_fps": a.target_fps });
    manifest.outputs = vec![a.out.display().to_string()];
    manifest.write_for(&a.out)?;
    println!("blend: {} operations, {} channels, {} frames", spec.operations.len(), edited.channel_count(), clip.frame_count());
    Ok(())
}
