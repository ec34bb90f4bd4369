use serde::{Deserialize, Serialize};

use super::spline::{CubicSpline, EndCondition};
use super::{interior, rms, EnvelopePair, Result, SignalError, TimeSeries};

/// Sample indices of strict local maxima and minima.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Extrema {
    pub maxima: Vec<usize>,
    pub minima: Vec<usize>,
}

impl Extrema {
    pub fn count(&self) -> usize {
        self.maxima.len() + self.minima.len()
    }
}

pub fn find_extrema(x: &TimeSeries) -> Extrema {
    extrema_of(x.samples())
}

/// Three-point comparison. A flat run bounded by lower (higher) samples on
/// both sides is one maximum (minimum) at its floor midpoint. Endpoints are
/// never reported.
pub(crate) fn extrema_of(x: &[f64]) -> Extrema {
    let mut out = Extrema::default();
    let n = x.len();
    if n < 3 {
        return out;
    }
    let mut i = 1;
    while i < n - 1 {
        let rising = x[i] > x[i - 1];
        let falling = x[i] < x[i - 1];
        if !(rising || falling) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < n && x[j + 1] == x[i] {
            j += 1;
        }
        if j + 1 >= n {
            break;
        }
        let mid = (i + j) / 2;
        if rising && x[j + 1] < x[i] {
            out.maxima.push(mid);
        } else if falling && x[j + 1] > x[i] {
            out.minima.push(mid);
        }
        i = j + 1;
    }
    out
}

/// Sign changes, ignoring exact zeros between samples of opposite sign.
pub fn zero_crossings(x: &[f64]) -> usize {
    let mut count = 0;
    let mut last_sign = 0i8;
    for &v in x {
        let s = if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        };
        if s != 0 {
            if last_sign != 0 && s != last_sign {
                count += 1;
            }
            last_sign = s;
        }
    }
    count
}

/// Natural cubic spline through `idx` plus the two extrema nearest each end
/// reflected across the boundary sample, evaluated on `0..x.len()`.
pub(crate) fn mirrored_spline(x: &[f64], idx: &[usize]) -> Vec<f64> {
    let n = x.len();
    let last = (n - 1) as f64;
    let k = idx.len();
    let mut knots = Vec::with_capacity(k + 4);
    let mut values = Vec::with_capacity(k + 4);
    for &i in idx[..2].iter().rev() {
        knots.push(-(i as f64));
        values.push(x[i]);
    }
    for &i in idx {
        knots.push(i as f64);
        values.push(x[i]);
    }
    for &i in idx[k - 2..].iter().rev() {
        knots.push(2.0 * last - i as f64);
        values.push(x[i]);
    }
    CubicSpline::new(knots, values, EndCondition::Natural)
        .expect("extremum indices are strictly increasing and interior")
        .eval_grid(n)
}

pub(crate) fn envelopes_of(x: &[f64]) -> Result<EnvelopePair> {
    let ext = extrema_of(x);
    if ext.maxima.len() < 2 || ext.minima.len() < 2 {
        return Err(SignalError::TooFewExtrema { maxima: ext.maxima.len(), minima: ext.minima.len() });
    }
    Ok(EnvelopePair { upper: mirrored_spline(x, &ext.maxima), lower: mirrored_spline(x, &ext.minima) })
}

pub fn envelope_pair(x: &TimeSeries) -> Result<EnvelopePair> {
    envelopes_of(x.samples())
}

pub(crate) fn sift_slice(c: &[f64]) -> Result<Vec<f64>> {
    let env = envelopes_of(c)?;
    Ok(c.iter()
        .zip(env.upper.iter().zip(&env.lower))
        .map(|(v, (u, l))| v - 0.5 * (u + l))
        .collect())
}

/// One sifting step: subtracts the mean of the upper and lower envelopes.
pub fn sift(c: &TimeSeries) -> Result<TimeSeries> {
    Ok(c.with_samples(sift_slice(c.samples())?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImfReport {
    pub extrema_count: usize,
    pub zero_crossings: usize,
    pub count_ok: bool,
    /// RMS of the mean envelope over the central 80% of samples. Equals the
    /// signal RMS when no envelope can be formed.
    pub mean_env_rms: f64,
    pub mean_ok: bool,
}

pub(crate) fn imf_check_slice(c: &[f64], mean_env_tol: f64) -> ImfReport {
    let ext = extrema_of(c);
    let zc = zero_crossings(c);
    let signal_rms = rms(c);
    let mean_env_rms = match envelopes_of(c) {
        Ok(env) => {
            let mean = env.mean();
            rms(&mean[interior(c.len(), 0.1)])
        }
        Err(_) => signal_rms,
    };
    ImfReport {
        extrema_count: ext.count(),
        zero_crossings: zc,
        count_ok: ext.count().abs_diff(zc) <= 1,
        mean_env_rms,
        mean_ok: mean_env_rms <= mean_env_tol * signal_rms,
    }
}

/// Tests the two IMF conditions: extrema and zero-crossing counts differ by
/// at most one, and the mean envelope is small relative to the signal.
pub fn imf_check(c: &TimeSeries, mean_env_tol: f64) -> ImfReport {
    imf_check_slice(c.samples(), mean_env_tol)
}
