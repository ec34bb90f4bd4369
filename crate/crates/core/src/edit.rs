//! IMF algebra across two decompositions: alignment, merging and ordered
//! blend operations, plus reconstruction back into a motion clip.
//!
//! IMF indices in this module's public surface are 1-based, matching the
//! way IMFs are numbered from the highest frequency down.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memd::{MemdError, MultivariateDecomposition, MultivariateSeries};
use crate::mocap_io::{apply_channels, resample_series, resampled_len, MocapError, MotionClip, Skeleton};
use crate::signal_core::{Decomposition, SignalError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EditError {
    #[error("channel labels do not match: {labels:?}")]
    ChannelMismatch { labels: Vec<String> },
    #[error("IMF range [{i}, {j}] invalid for {count} IMFs")]
    BadRange { i: usize, j: usize, count: usize },
    #[error("operation {op}: {reason}")]
    SpecOutOfBounds { op: usize, reason: String },
    #[error("invalid blend spec: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Mocap(#[from] MocapError),
    #[error(transparent)]
    Memd(#[from] MemdError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

pub type Result<T> = std::result::Result<T, EditError>;

/// Two decompositions with identical rate, length, labels and IMF count.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair {
    pub a: MultivariateDecomposition,
    pub b: MultivariateDecomposition,
}

/// Relative rate difference below which two clips are treated as sampled on
/// the same grid (absorbs frame times printed with six decimals).
const RATE_TOLERANCE: f64 = 1e-4;

fn resample_decomposition(d: &Decomposition, target_rate: f64) -> Decomposition {
    if (d.rate / target_rate - 1.0).abs() <= RATE_TOLERANCE {
        return Decomposition { rate: target_rate, ..d.clone() };
    }
    let ratio = target_rate / d.rate;
    let count = resampled_len(d.len(), ratio);
    Decomposition {
        imfs: d.imfs.iter().map(|c| resample_series(c, ratio, count)).collect(),
        trend: resample_series(&d.trend, ratio, count),
        rate: target_rate,
        meta: d.meta.clone(),
    }
}

fn fit(d: &mut Decomposition, len: usize, imf_count: usize) {
    for c in &mut d.imfs {
        c.truncate(len);
    }
    d.trend.truncate(len);
    d.imfs.resize(imf_count, vec![0.0; len]);
}

/// Resamples both sides to `target_rate`, truncates to the shorter length and
/// pads the IMF lists with zero IMFs at the low-frequency end. `b`'s channels
/// are reordered to follow `a`.
pub fn align(a: &MultivariateDecomposition, b: &MultivariateDecomposition, target_rate: f64) -> Result<AlignedPair> {
    if !(target_rate.is_finite() && target_rate > 0.0) {
        return Err(SignalError::BadRate(target_rate).into());
    }
    let mut order = Vec::with_capacity(a.labels.len());
    for label in &a.labels {
        match b.labels.iter().position(|l| l == label) {
            Some(i) => order.push(i),
            None => break,
        }
    }
    if order.len() != a.labels.len() || a.labels.len() != b.labels.len() {
        let mut labels: Vec<String> = a
            .labels
            .iter()
            .filter(|l| !b.labels.contains(l))
            .chain(b.labels.iter().filter(|l| !a.labels.contains(l)))
            .cloned()
            .collect();
        labels.sort();
        return Err(EditError::ChannelMismatch { labels });
    }
    let mut da: Vec<Decomposition> = a.per_channel.iter().map(|d| resample_decomposition(d, target_rate)).collect();
    let mut db: Vec<Decomposition> =
        order.iter().map(|&i| resample_decomposition(&b.per_channel[i], target_rate)).collect();
    let len = da[0].len().min(db[0].len());
    let imf_count = a.imf_count().max(b.imf_count());
    for d in da.iter_mut().chain(db.iter_mut()) {
        fit(d, len, imf_count);
    }
    Ok(AlignedPair {
        a: MultivariateDecomposition::new(da, a.labels.clone(), a.meta.clone())?,
        b: MultivariateDecomposition::new(db, a.labels.clone(), b.meta.clone())?,
    })
}

/// Sums IMFs `i..=j` (1-based) into one.
pub fn merge_imfs(d: &Decomposition, i: usize, j: usize) -> Result<Decomposition> {
    let count = d.imf_count();
    if !(1 <= i && i < j && j <= count) {
        return Err(EditError::BadRange { i, j, count });
    }
    let mut imfs = d.imfs.clone();
    let tail = imfs.split_off(j);
    let merged_parts = imfs.split_off(i - 1);
    let mut merged = merged_parts[0].clone();
    for part in &merged_parts[1..] {
        for (m, v) in merged.iter_mut().zip(part) {
            *m += v;
        }
    }
    imfs.push(merged);
    imfs.extend(tail);
    Ok(Decomposition { imfs, ..d.clone() })
}

fn merge_multivariate(md: &MultivariateDecomposition, i: usize, j: usize) -> Result<MultivariateDecomposition> {
    let per_channel = md.per_channel.iter().map(|d| merge_imfs(d, i, j)).collect::<Result<Vec<_>>>()?;
    Ok(MultivariateDecomposition::new(per_channel, md.labels.clone(), md.meta.clone())?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Scale,
    Zero,
    Swap,
    Blend,
    TrendExchange,
    Merge,
}

/// Which decomposition, as it was before any operation ran, supplies data.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    #[serde(alias = "a")]
    A,
    #[default]
    #[serde(alias = "b")]
    B,
}

/// A single 1-based IMF index or an inclusive `[first, last]` range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ImfSelector {
    One(usize),
    Range([usize; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlendOp {
    pub kind: OpKind,
    /// Empty selects every IMF.
    #[serde(default)]
    pub imfs: Vec<ImfSelector>,
    /// Channel labels or joint names; empty selects every channel.
    #[serde(default)]
    pub channels: Vec<String>,
    /// Weight of the working copy in `blend`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Multiplier for `scale`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<f64>,
    #[serde(default)]
    pub source: Source,
    /// Also apply scale, zero, swap or blend to the trend.
    #[serde(default)]
    pub include_trend: bool,
}

impl BlendOp {
    pub fn new(kind: OpKind) -> Self {
        Self {
            kind,
            imfs: Vec::new(),
            channels: Vec::new(),
            alpha: None,
            factor: None,
            source: Source::B,
            include_trend: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlendSpec {
    /// Rate both decompositions are aligned to; defaults to `a`'s rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_rate: Option<f64>,
    #[serde(default)]
    pub operations: Vec<BlendOp>,
}

impl BlendSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| EditError::BadSpec(e.to_string()))?;
        spec.check_schema()?;
        Ok(spec)
    }

    /// Parameter checks that do not depend on the data.
    pub fn check_schema(&self) -> Result<()> {
        if let Some(r) = self.target_rate {
            if !(r.is_finite() && r > 0.0) {
                return Err(EditError::BadSpec(format!("target_rate {r}")));
            }
        }
        for (k, op) in self.operations.iter().enumerate() {
            let bad = |msg: &str| Err(EditError::BadSpec(format!("operation {k}: {msg}")));
            match op.kind {
                OpKind::Blend => match op.alpha {
                    Some(a) if (0.0..=1.0).contains(&a) => {}
                    _ => return bad("blend needs alpha in [0, 1]"),
                },
                OpKind::Scale => match op.factor {
                    Some(f) if f.is_finite() => {}
                    _ => return bad("scale needs a finite factor"),
                },
                OpKind::Merge => {
                    if !matches!(op.imfs.as_slice(), [ImfSelector::Range(_)]) {
                        return bad("merge needs exactly one [first, last] range");
                    }
                    if !op.channels.is_empty() {
                        return bad("merge applies to every channel");
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn select_imfs(op: &BlendOp, count: usize, k: usize) -> Result<Vec<usize>> {
    if op.imfs.is_empty() {
        return Ok((0..count).collect());
    }
    let mut out = Vec::new();
    for sel in &op.imfs {
        let (first, last) = match *sel {
            ImfSelector::One(i) => (i, i),
            ImfSelector::Range([i, j]) => (i, j),
        };
        if first == 0 || first > last || last > count {
            return Err(EditError::SpecOutOfBounds {
                op: k,
                reason: format!("IMF selection {first}..={last} outside 1..={count}"),
            });
        }
        out.extend(first - 1..last);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn select_channels(op: &BlendOp, labels: &[String], k: usize) -> Result<Vec<usize>> {
    if op.channels.is_empty() {
        return Ok((0..labels.len()).collect());
    }
    let mut out = Vec::new();
    for name in &op.channels {
        let before = out.len();
        let joint_prefix = format!("{name}.");
        out.extend(
            labels
                .iter()
                .enumerate()
                .filter(|(_, l)| *l == name || l.starts_with(&joint_prefix))
                .map(|(i, _)| i),
        );
        if out.len() == before {
            return Err(EditError::SpecOutOfBounds { op: k, reason: format!("no channel matches {name:?}") });
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Applies the operations in order to a working copy of `pair.a`. Data for
/// swap, blend and trend exchange come from the unedited side named by each
/// operation's `source`; merges are applied to both sides so that IMF
/// positions stay aligned.
pub fn apply_blend(pair: &AlignedPair, spec: &BlendSpec) -> Result<MultivariateDecomposition> {
    spec.check_schema()?;
    if pair.a.labels != pair.b.labels || pair.a.imf_count() != pair.b.imf_count() || pair.a.len() != pair.b.len() {
        return Err(EditError::ChannelMismatch { labels: pair.b.labels.clone() });
    }
    let mut work = pair.a.clone();
    let mut orig_a = pair.a.clone();
    let mut orig_b = pair.b.clone();
    for (k, op) in spec.operations.iter().enumerate() {
        if op.kind == OpKind::Merge {
            let [ImfSelector::Range([i, j])] = op.imfs[..] else { unreachable!("checked by schema") };
            let to_bounds = |e| match e {
                EditError::BadRange { .. } => EditError::SpecOutOfBounds { op: k, reason: e.to_string() },
                other => other,
            };
            work = merge_multivariate(&work, i, j).map_err(to_bounds)?;
            orig_a = merge_multivariate(&orig_a, i, j).map_err(to_bounds)?;
            orig_b = merge_multivariate(&orig_b, i, j).map_err(to_bounds)?;
            continue;
        }
        let imfs = select_imfs(op, work.imf_count(), k)?;
        let channels = select_channels(op, &work.labels, k)?;
        let source = match op.source {
            Source::A => &orig_a,
            Source::B => &orig_b,
        };
        for &ch in &channels {
            let src = &source.per_channel[ch];
            let dst = &mut work.per_channel[ch];
            let edit = |target: &mut Vec<f64>, from: &[f64]| match op.kind {
                OpKind::Scale => {
                    let f = op.factor.unwrap_or(1.0);
                    target.iter_mut().for_each(|v| *v *= f);
                }
                OpKind::Zero => target.iter_mut().for_each(|v| *v = 0.0),
                OpKind::Swap | OpKind::TrendExchange => target.copy_from_slice(from),
                OpKind::Blend => {
                    let alpha = op.alpha.unwrap_or(0.5);
                    for (t, s) in target.iter_mut().zip(from) {
                        *t = alpha * *t + (1.0 - alpha) * s;
                    }
                }
                OpKind::Merge => unreachable!(),
            };
            if op.kind != OpKind::TrendExchange {
                for &i in &imfs {
                    edit(&mut dst.imfs[i], &src.imfs[i]);
                }
            }
            if op.kind == OpKind::TrendExchange || op.include_trend {
                edit(&mut dst.trend, &src.trend);
            }
        }
    }
    Ok(work)
}

/// Aligns at the spec's target rate (or `a`'s rate) and applies it.
pub fn blend(a: &MultivariateDecomposition, b: &MultivariateDecomposition, spec: &BlendSpec) -> Result<MultivariateDecomposition> {
    spec.check_schema()?;
    let pair = align(a, b, spec.target_rate.unwrap_or_else(|| a.rate()))?;
    apply_blend(&pair, spec)
}

/// Per channel, the sum of all IMFs and the trend.
pub fn reconstruct(d: &MultivariateDecomposition) -> Result<MultivariateSeries> {
    let channels = d.per_channel.iter().map(Decomposition::reconstruct).collect();
    Ok(MultivariateSeries::new(channels, d.labels.clone(), d.rate())?)
}

/// Writes the reconstruction of the selected channels (all of `d`'s when
/// `selection` is empty) into a copy of `template`.
pub fn synthesize_clip(template: &MotionClip, d: &MultivariateDecomposition, selection: &[String]) -> Result<MotionClip> {
    if d.len() != template.frame_count() {
        return Err(MocapError::LengthMismatch { expected: template.frame_count(), found: d.len() }.into());
    }
    let full = reconstruct(d)?;
    if selection.is_empty() || selection == d.labels.as_slice() {
        return Ok(apply_channels(template, &full, &d.labels)?);
    }
    let mut channels = Vec::with_capacity(selection.len());
    for label in selection {
        let i = d
            .labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| EditError::ChannelMismatch { labels: vec![label.clone()] })?;
        channels.push(full.channels()[i].clone());
    }
    let series = MultivariateSeries::new(channels, selection.to_vec(), d.rate())?;
    Ok(apply_channels(template, &series, selection)?)
}

/// Names of the joints in the root's child subtrees that start above the
/// root (positive Y offset), i.e. the upper body of a Y-up skeleton.
pub fn upper_body_joints(skeleton: &Skeleton) -> Vec<String> {
    let joints = skeleton.joints();
    let mut out = Vec::new();
    for &child in &joints[0].children {
        if joints[child].offset[1] > 0.0 {
            out.push(joints[child].name.clone());
            out.extend(skeleton.descendants(child).into_iter().map(|j| joints[j].name.clone()));
        }
    }
    out
}
