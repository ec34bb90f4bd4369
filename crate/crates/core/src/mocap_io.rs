//! BVH motion-capture files: parsing, writing, joint-channel extraction and
//! frame-rate conversion.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::memd::{MemdError, MultivariateSeries};
use crate::signal_core::spline::{CubicSpline, EndCondition};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MocapError {
    #[error("line {line}: expected {expected}")]
    SyntaxError { line: usize, expected: String },
    #[error("header declares {declared} frames but {found} rows follow")]
    FrameCountMismatch { declared: usize, found: usize },
    #[error("line {line}: unknown channel name {name:?}")]
    UnknownChannelName { line: usize, name: String },
    #[error("unknown channel {name:?}")]
    UnknownChannel { name: String },
    #[error("length mismatch: expected {expected} frames, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid clip: {0}")]
    InvalidClip(String),
    #[error(transparent)]
    Series(#[from] MemdError),
}

pub type Result<T> = std::result::Result<T, MocapError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    Xposition,
    Yposition,
    Zposition,
    Xrotation,
    Yrotation,
    Zrotation,
}

impl ChannelKind {
    pub fn is_rotation(self) -> bool {
        matches!(self, Self::Xrotation | Self::Yrotation | Self::Zrotation)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Xposition => "Xposition",
            Self::Yposition => "Yposition",
            Self::Zposition => "Zposition",
            Self::Xrotation => "Xrotation",
            Self::Yrotation => "Yrotation",
            Self::Zrotation => "Zrotation",
        }
    }
}

impl FromStr for ChannelKind {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        Ok(match s {
            "Xposition" => Self::Xposition,
            "Yposition" => Self::Yposition,
            "Zposition" => Self::Zposition,
            "Xrotation" => Self::Xrotation,
            "Yrotation" => Self::Yrotation,
            "Zrotation" => Self::Zrotation,
            _ => return Err(()),
        })
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub offset: [f64; 3],
    pub channels: Vec<ChannelKind>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub end_sites: Vec<[f64; 3]>,
}

/// Joints in declaration order; index 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    joints: Vec<Joint>,
}

impl Skeleton {
    /// Checks for a single root at index 0, consistent parent links, unique
    /// names and 0, 3 or 6 channels per joint.
    pub fn new(joints: Vec<Joint>) -> Result<Self> {
        if joints.is_empty() {
            return Err(MocapError::InvalidClip("skeleton has no joints".into()));
        }
        let mut names = HashMap::new();
        for (i, j) in joints.iter().enumerate() {
            if (i == 0) != j.parent.is_none() {
                return Err(MocapError::InvalidClip("exactly one root, first in order, is required".into()));
            }
            if let Some(p) = j.parent {
                if p >= i || !joints[p].children.contains(&i) {
                    return Err(MocapError::InvalidClip(format!("joint {} has an inconsistent parent", j.name)));
                }
            }
            if ![0, 3, 6].contains(&j.channels.len()) {
                return Err(MocapError::InvalidClip(format!(
                    "joint {} declares {} channels",
                    j.name,
                    j.channels.len()
                )));
            }
            if names.insert(j.name.clone(), i).is_some() {
                return Err(MocapError::InvalidClip(format!("duplicate joint name {}", j.name)));
            }
        }
        Ok(Self { joints })
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn channel_count(&self) -> usize {
        self.joints.iter().map(|j| j.channels.len()).sum()
    }

    /// `joint.Channel` labels in column order.
    pub fn channel_labels(&self) -> Vec<String> {
        self.joints
            .iter()
            .flat_map(|j| j.channels.iter().map(move |c| format!("{}.{}", j.name, c)))
            .collect()
    }

    /// Column and kind of a `joint.Channel` label.
    pub fn find_channel(&self, label: &str) -> Option<(usize, ChannelKind)> {
        let mut col = 0;
        for j in &self.joints {
            for &c in &j.channels {
                if label.len() == j.name.len() + 1 + c.as_str().len()
                    && label.starts_with(j.name.as_str())
                    && label[j.name.len()..].starts_with('.')
                    && label.ends_with(c.as_str())
                {
                    return Some((col, c));
                }
                col += 1;
            }
        }
        None
    }

    /// Indices of every joint below `joint` in the hierarchy.
    pub fn descendants(&self, joint: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = self.joints[joint].children.clone();
        while let Some(j) = stack.pop() {
            out.push(j);
            stack.extend(self.joints[j].children.iter().copied());
        }
        out.sort_unstable();
        out
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionClip {
    skeleton: Skeleton,
    frames: Vec<Vec<f64>>,
    frame_time: f64,
}

impl MotionClip {
    pub fn new(skeleton: Skeleton, frames: Vec<Vec<f64>>, frame_time: f64) -> Result<Self> {
        if frames.len() < 2 {
            return Err(MocapError::InvalidClip(format!("need at least 2 frames, got {}", frames.len())));
        }
        if !(frame_time.is_finite() && frame_time > 0.0) {
            return Err(MocapError::InvalidClip(format!("frame time must be positive, got {frame_time}")));
        }
        let cols = skeleton.channel_count();
        if let Some(row) = frames.iter().position(|f| f.len() != cols) {
            return Err(MocapError::InvalidClip(format!(
                "frame {row} has {} values, skeleton declares {cols}",
                frames[row].len()
            )));
        }
        Ok(Self { skeleton, frames, frame_time })
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }

    pub fn frame_time(&self) -> f64 {
        self.frame_time
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn fps(&self) -> f64 {
        1.0 / self.frame_time
    }

    /// Playback length, `frame_count · frame_time`.
    pub fn duration(&self) -> f64 {
        self.frames.len() as f64 * self.frame_time
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.frames.iter().map(|f| f[col]).collect()
    }
}

struct Tokens<'a> {
    lines: Vec<(usize, Vec<&'a str>)>,
    line: usize,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
            .filter(|(_, t)| !t.is_empty())
            .collect();
        Self { lines, line: 0, pos: 0 }
    }

    fn line_no(&self) -> usize {
        self.lines
            .get(self.line)
            .or_else(|| self.lines.last())
            .map(|(n, _)| *n)
            .unwrap_or(1)
    }

    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.line).map(|(_, t)| t[self.pos])
    }

    fn next(&mut self) -> Option<&'a str> {
        let tok = self.peek()?;
        self.pos += 1;
        if self.pos >= self.lines[self.line].1.len() {
            self.line += 1;
            self.pos = 0;
        }
        Some(tok)
    }

    /// Remaining tokens of the current line, joined by single spaces.
    fn rest_of_line(&mut self) -> Option<String> {
        let (_, toks) = self.lines.get(self.line)?;
        let rest = toks[self.pos..].join(" ");
        self.line += 1;
        self.pos = 0;
        Some(rest)
    }

    fn err(&self, expected: impl Into<String>) -> MocapError {
        MocapError::SyntaxError { line: self.line_no(), expected: expected.into() }
    }

    fn expect(&mut self, word: &str) -> Result<()> {
        match self.next() {
            Some(t) if t == word => Ok(()),
            _ => Err(self.err(format!("{word:?}"))),
        }
    }

    fn number<T: FromStr>(&mut self, what: &str) -> Result<T> {
        let line = self.line_no();
        self.next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| MocapError::SyntaxError { line, expected: what.into() })
    }
}

fn parse_offset(tok: &mut Tokens) -> Result<[f64; 3]> {
    tok.expect("OFFSET")?;
    Ok([tok.number("offset x")?, tok.number("offset y")?, tok.number("offset z")?])
}

fn unique_name(base: String, taken: &mut HashMap<String, usize>) -> String {
    let mut name = base.clone();
    let mut k = 1;
    while taken.contains_key(&name) {
        k += 1;
        name = format!("{base}_{k}");
    }
    taken.insert(name.clone(), 0);
    name
}

fn parse_joint(
    tok: &mut Tokens,
    parent: Option<usize>,
    joints: &mut Vec<Joint>,
    taken: &mut HashMap<String, usize>,
) -> Result<()> {
    let raw = tok.rest_of_line().filter(|n| !n.is_empty()).ok_or_else(|| tok.err("joint name"))?;
    let name = unique_name(raw, taken);
    let index = joints.len();
    joints.push(Joint { name, offset: [0.0; 3], channels: Vec::new(), parent, children: Vec::new(), end_sites: Vec::new() });
    if let Some(p) = parent {
        joints[p].children.push(index);
    }
    tok.expect("{")?;
    joints[index].offset = parse_offset(tok)?;
    if tok.peek() == Some("CHANNELS") {
        tok.next();
        let n: usize = tok.number("channel count")?;
        for _ in 0..n {
            let line = tok.line_no();
            let name = tok.next().ok_or_else(|| tok.err("channel name"))?;
            let kind = name
                .parse()
                .map_err(|_| MocapError::UnknownChannelName { line, name: name.to_string() })?;
            joints[index].channels.push(kind);
        }
    }
    loop {
        match tok.next() {
            Some("JOINT") => parse_joint(tok, Some(index), joints, taken)?,
            Some("End") => {
                tok.expect("Site")?;
                tok.expect("{")?;
                let offset = parse_offset(tok)?;
                tok.expect("}")?;
                joints[index].end_sites.push(offset);
            }
            Some("}") => return Ok(()),
            _ => return Err(tok.err("\"JOINT\", \"End Site\" or \"}\"")),
        }
    }
}

/// Parses a BVH document. Channel order is kept exactly as declared.
pub fn parse_bvh(text: &str) -> Result<MotionClip> {
    let mut tok = Tokens::new(text);
    tok.expect("HIERARCHY")?;
    tok.expect("ROOT")?;
    let mut joints = Vec::new();
    let mut taken = HashMap::new();
    parse_joint(&mut tok, None, &mut joints, &mut taken)?;
    tok.expect("MOTION")?;
    tok.expect("Frames:")?;
    let declared: usize = tok.number("frame count")?;
    tok.expect("Frame")?;
    tok.expect("Time:")?;
    let frame_time: f64 = tok.number("frame time")?;

    let skeleton = Skeleton::new(joints)?;
    let cols = skeleton.channel_count();
    let mut frames = Vec::with_capacity(declared);
    while tok.line < tok.lines.len() {
        let (line, toks) = &tok.lines[tok.line];
        if toks.len() != cols {
            return Err(MocapError::SyntaxError { line: *line, expected: format!("{cols} channel values") });
        }
        let row = toks
            .iter()
            .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| MocapError::SyntaxError { line: *line, expected: "numeric channel values".into() })?;
        frames.push(row);
        tok.line += 1;
    }
    if frames.len() != declared {
        return Err(MocapError::FrameCountMismatch { declared, found: frames.len() });
    }
    MotionClip::new(skeleton, frames, frame_time)
}

fn write_joint(out: &mut String, skel: &Skeleton, index: usize, depth: usize) {
    let j = &skel.joints[index];
    let pad = "\t".repeat(depth);
    let keyword = if j.parent.is_none() { "ROOT" } else { "JOINT" };
    let _ = writeln!(out, "{pad}{keyword} {}", j.name);
    let _ = writeln!(out, "{pad}{{");
    let _ = writeln!(out, "{pad}\tOFFSET {:.6} {:.6} {:.6}", j.offset[0], j.offset[1], j.offset[2]);
    if !j.channels.is_empty() {
        let names: Vec<&str> = j.channels.iter().map(|c| c.as_str()).collect();
        let _ = writeln!(out, "{pad}\tCHANNELS {} {}", names.len(), names.join(" "));
    }
    for &c in &j.children {
        write_joint(out, skel, c, depth + 1);
    }
    for e in &j.end_sites {
        let _ = writeln!(out, "{pad}\tEnd Site");
        let _ = writeln!(out, "{pad}\t{{");
        let _ = writeln!(out, "{pad}\t\tOFFSET {:.6} {:.6} {:.6}", e[0], e[1], e[2]);
        let _ = writeln!(out, "{pad}\t}}");
    }
    let _ = writeln!(out, "{pad}}}");
}

/// Serializes a clip with six decimals for every number.
pub fn write_bvh(clip: &MotionClip) -> String {
    let mut out = String::from("HIERARCHY\n");
    write_joint(&mut out, &clip.skeleton, 0, 0);
    let _ = writeln!(out, "MOTION");
    let _ = writeln!(out, "Frames: {}", clip.frames.len());
    let _ = writeln!(out, "Frame Time: {:.6}", clip.frame_time);
    for row in &clip.frames {
        let values: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        let _ = writeln!(out, "{}", values.join(" "));
    }
    out
}

/// Maps an angle in degrees into (-180, 180].
pub fn wrap_degrees(v: f64) -> f64 {
    v - 360.0 * ((v - 180.0) / 360.0).ceil()
}

/// Removes jumps larger than 180 degrees between successive samples by
/// cumulative shifts of 360 degrees.
pub fn unwrap_degrees(x: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut offset = 0.0;
    for (i, &v) in x.iter().enumerate() {
        if i > 0 {
            let step = v - x[i - 1];
            if step > 180.0 {
                offset -= 360.0 * ((step - 180.0) / 360.0).ceil();
            } else if step < -180.0 {
                offset += 360.0 * ((-step - 180.0) / 360.0).ceil();
            }
        }
        out.push(v + offset);
    }
    out
}

fn resolve(clip: &MotionClip, selection: &[String]) -> Result<Vec<(usize, ChannelKind)>> {
    selection
        .iter()
        .map(|name| {
            clip.skeleton
                .find_channel(name)
                .ok_or_else(|| MocapError::UnknownChannel { name: name.clone() })
        })
        .collect()
}

/// Selected channels as continuous signals at the clip rate; rotations are
/// unwrapped.
pub fn extract_channels(clip: &MotionClip, selection: &[String]) -> Result<MultivariateSeries> {
    let cols = resolve(clip, selection)?;
    let channels = cols
        .iter()
        .map(|&(col, kind)| {
            let raw = clip.column(col);
            if kind.is_rotation() {
                unwrap_degrees(&raw)
            } else {
                raw
            }
        })
        .collect();
    Ok(MultivariateSeries::new(channels, selection.to_vec(), clip.fps())?)
}

/// Replaces the selected columns with `series`, wrapping rotations back into
/// (-180, 180]. Other columns are left untouched.
pub fn apply_channels(clip: &MotionClip, series: &MultivariateSeries, selection: &[String]) -> Result<MotionClip> {
    if series.len() != clip.frame_count() {
        return Err(MocapError::LengthMismatch { expected: clip.frame_count(), found: series.len() });
    }
    if series.labels() != selection {
        return Err(MocapError::InvalidClip(format!(
            "series labels {:?} do not match selection {:?}",
            series.labels(),
            selection
        )));
    }
    let cols = resolve(clip, selection)?;
    let mut frames = clip.frames.clone();
    for (&(col, kind), values) in cols.iter().zip(series.channels()) {
        for (row, &v) in frames.iter_mut().zip(values) {
            row[col] = if kind.is_rotation() { wrap_degrees(v) } else { v };
        }
    }
    MotionClip::new(clip.skeleton.clone(), frames, clip.frame_time)
}

/// Cubic (not-a-knot) resampling of every channel onto a uniform grid at
/// `target_fps` covering the same duration. Rotations are interpolated
/// unwrapped and wrapped again afterwards.
pub fn resample(clip: &MotionClip, target_fps: f64) -> Result<MotionClip> {
    if !(target_fps.is_finite() && target_fps > 0.0) {
        return Err(MocapError::InvalidClip(format!("target fps must be positive, got {target_fps}")));
    }
    let new_ft = 1.0 / target_fps;
    if (new_ft - clip.frame_time).abs() <= 1e-12 * clip.frame_time {
        return Ok(clip.clone());
    }
    let ratio = clip.frame_time * target_fps;
    let count = resampled_len(clip.frame_count(), ratio);
    if count < 2 {
        return Err(MocapError::InvalidClip("resampled clip would have fewer than 2 frames".into()));
    }
    let mut frames = vec![Vec::with_capacity(clip.skeleton.channel_count()); count];
    let mut col = 0;
    for joint in clip.skeleton.joints() {
        for &kind in &joint.channels {
            let raw = clip.column(col);
            let values = if kind.is_rotation() { unwrap_degrees(&raw) } else { raw };
            let resampled = resample_series(&values, ratio, count);
            for (row, v) in frames.iter_mut().zip(resampled) {
                row.push(if kind.is_rotation() { wrap_degrees(v) } else { v });
            }
            col += 1;
        }
    }
    MotionClip::new(clip.skeleton.clone(), frames, new_ft)
}

/// Number of samples when `len` samples are resampled by `ratio` (new rate
/// over old rate) over the same duration.
pub fn resampled_len(len: usize, ratio: f64) -> usize {
    (((len - 1) as f64 * ratio) + 1e-9).floor() as usize + 1
}

/// Evaluates a not-a-knot spline through `values` (unit spacing) at
/// positions `k / ratio` for `k in 0..count`.
pub fn resample_series(values: &[f64], ratio: f64, count: usize) -> Vec<f64> {
    let knots: Vec<f64> = (0..values.len()).map(|i| i as f64).collect();
    let spline = CubicSpline::new(knots, values.to_vec(), EndCondition::NotAKnot)
        .expect("unit-spaced knots are increasing");
    (0..count).map(|k| spline.eval(k as f64 / ratio)).collect()
}
