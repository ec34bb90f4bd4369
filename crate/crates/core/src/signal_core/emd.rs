use serde::{Deserialize, Serialize};

use super::extrema::{envelopes_of, extrema_of, zero_crossings};
use super::{interior, rms, Decomposition, DecompositionMeta, Result, SignalError, TimeSeries};

/// How consecutive sifting iterates are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdForm {
    /// `sum (old - new)^2 / sum old^2`.
    #[default]
    Normalized,
    /// `sum over samples of (old - new)^2 / old^2`, skipping samples with
    /// `|old| < 1e-10 * RMS(old)`. Grows with signal length and is dominated
    /// by samples near zero crossings.
    PerSample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmdParams {
    /// Sifting stops once the SD criterion drops below this value and the
    /// candidate satisfies the IMF conditions.
    pub sd_threshold: f64,
    pub sd_form: SdForm,
    /// Mean-envelope RMS, relative to the candidate RMS, a candidate must
    /// reach before sifting may stop.
    pub mean_env_tol: f64,
    pub max_sifts: usize,
    pub max_imfs: usize,
    /// Extraction stops once the residual RMS falls below this fraction of
    /// the input RMS.
    pub residual_floor: f64,
}

impl Default for EmdParams {
    fn default() -> Self {
        Self {
            sd_threshold: 0.25,
            sd_form: SdForm::Normalized,
            mean_env_tol: 0.05,
            max_sifts: 100,
            max_imfs: 16,
            residual_floor: 1e-3,
        }
    }
}

impl EmdParams {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.sd_threshold > 0.0 && self.sd_threshold < 1.0) {
            return Err(SignalError::BadParameter(format!(
                "sd_threshold must lie in (0, 1), got {}",
                self.sd_threshold
            )));
        }
        if self.max_sifts == 0 || self.max_imfs == 0 {
            return Err(SignalError::BadParameter("max_sifts and max_imfs must be positive".into()));
        }
        if !(self.mean_env_tol > 0.0) {
            return Err(SignalError::BadParameter("mean_env_tol must be positive".into()));
        }
        Ok(())
    }
}

/// SD between consecutive sifting iterates.
pub fn sd_criterion(old: &[f64], new: &[f64], form: SdForm) -> f64 {
    match form {
        SdForm::Normalized => {
            let num: f64 = old.iter().zip(new).map(|(o, n)| (o - n) * (o - n)).sum();
            let den: f64 = old.iter().map(|o| o * o).sum();
            if den == 0.0 {
                if num == 0.0 { 0.0 } else { f64::INFINITY }
            } else {
                num / den
            }
        }
        SdForm::PerSample => {
            let guard = 1e-10 * rms(old);
            old.iter()
                .zip(new)
                .filter(|(o, _)| o.abs() >= guard && **o != 0.0)
                .map(|(o, n)| (o - n) * (o - n) / (o * o))
                .sum()
        }
    }
}

pub(crate) fn is_monotone(x: &[f64]) -> bool {
    x.windows(2).all(|w| w[1] >= w[0]) || x.windows(2).all(|w| w[1] <= w[0])
}

/// IMF conditions on a candidate given its mean envelope.
pub(crate) fn satisfies_imf(c: &[f64], mean_env: &[f64], tol: f64) -> bool {
    let count = extrema_of(c).count();
    count.abs_diff(zero_crossings(c)) <= 1 && rms(&mean_env[interior(c.len(), 0.1)]) <= tol * rms(c)
}

/// Univariate sifting of an already sifted candidate until it meets the IMF
/// conditions, at most `params.max_sifts` times.
pub(crate) fn polish_imf(mut c: Vec<f64>, params: &EmdParams) -> Vec<f64> {
    for _ in 0..params.max_sifts {
        let Ok(env) = envelopes_of(&c) else {
            break;
        };
        let mean = env.mean();
        if satisfies_imf(&c, &mean, params.mean_env_tol) {
            break;
        }
        for (v, m) in c.iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    c
}

/// Empirical mode decomposition.
///
/// Each IMF is sifted until the SD between consecutive iterates falls below
/// `params.sd_threshold` while the candidate meets the IMF conditions, or
/// `max_sifts` is reached, and is then subtracted from the residual.
/// Extraction stops when the residual is monotone, has fewer than three
/// extrema, has negligible energy, or `max_imfs` IMFs exist; what remains
/// is the trend.
pub fn emd(x: &TimeSeries, params: &EmdParams) -> Result<Decomposition> {
    params.validate()?;
    if x.len() < 4 {
        return Err(SignalError::SignalTooShort { len: x.len(), min: 4 });
    }
    let input_rms = rms(x.samples());
    let mut residual = x.samples().to_vec();
    let mut imfs = Vec::new();

    while imfs.len() < params.max_imfs {
        if is_monotone(&residual)
            || extrema_of(&residual).count() < 3
            || rms(&residual) <= params.residual_floor * input_rms
        {
            break;
        }
        let Some(imf) = extract_imf(&residual, params)? else {
            break;
        };
        for (r, c) in residual.iter_mut().zip(&imf) {
            *r -= c;
        }
        imfs.push(imf);
    }

    let meta = DecompositionMeta {
        source: "emd".into(),
        sd_threshold: params.sd_threshold,
        ..Default::default()
    };
    Decomposition::new(imfs, residual, x.rate(), meta)
}

/// Sifts one IMF out of `residual`. `None` means no usable envelope could be
/// built, so the residual is the trend.
fn extract_imf(residual: &[f64], params: &EmdParams) -> Result<Option<Vec<f64>>> {
    let mut c = residual.to_vec();
    let mut prev: Option<Vec<f64>> = None;
    let mut sifts = 0;
    loop {
        let mean = match envelopes_of(&c) {
            Ok(env) => env.mean(),
            Err(SignalError::TooFewExtrema { .. }) if prev.is_none() => return Ok(None),
            Err(SignalError::TooFewExtrema { .. }) => break,
            Err(e) => return Err(e),
        };
        if let Some(p) = &prev {
            let sd = sd_criterion(p, &c, params.sd_form);
            if sd < params.sd_threshold && satisfies_imf(&c, &mean, params.mean_env_tol) {
                break;
            }
            if sifts >= params.max_sifts {
                if sd > 10.0 * params.sd_threshold {
                    return Err(SignalError::NoConvergence { sd, sifts });
                }
                break;
            }
        }
        let next: Vec<f64> = c.iter().zip(&mean).map(|(v, m)| v - m).collect();
        prev = Some(std::mem::replace(&mut c, next));
        sifts += 1;
    }
    let ext = extrema_of(&c);
    if ext.maxima.len() < 2 || ext.minima.len() < 2 {
        return Ok(None);
    }
    Ok(Some(c))
}
