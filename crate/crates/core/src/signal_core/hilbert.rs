use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{AnalyticSignal, InstantAttributes, Result, SignalError, TimeSeries};

/// Builds the analytic signal by zeroing negative frequencies.
///
/// The spectrum is multiplied by 1 at DC (and at Nyquist for even lengths),
/// by 2 on positive bins and by 0 on negative bins; the imaginary part of
/// the inverse transform is the discrete Hilbert transform of the input.
pub fn analytic_signal(x: &TimeSeries) -> Result<AnalyticSignal> {
    let n = x.len();
    if n < 4 {
        return Err(SignalError::SignalTooShort { len: n, min: 4 });
    }
    let mut buf: Vec<Complex<f64>> = x.samples().iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);

    let half = n / 2;
    let positive_end = if n % 2 == 0 { half } else { half + 1 };
    for v in &mut buf[1..positive_end] {
        *v *= 2.0;
    }
    for v in &mut buf[half + 1..] {
        *v = Complex::new(0.0, 0.0);
    }

    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    Ok(AnalyticSignal {
        real_part: x.samples().to_vec(),
        imag_part: buf.iter().map(|c| c.im * scale).collect(),
        rate: x.rate(),
    })
}

/// Amplitude and frequency (Hz) from the analytic signal.
///
/// Frequency is the derivative of the unwrapped phase, central differences
/// in the interior and one-sided differences at the ends.
pub fn instantaneous_attributes(z: &AnalyticSignal) -> Result<InstantAttributes> {
    let n = z.real_part.len();
    if z.imag_part.len() != n {
        return Err(SignalError::LengthMismatch(n, z.imag_part.len()));
    }
    if n < 2 {
        return Err(SignalError::SignalTooShort { len: n, min: 2 });
    }
    let amplitude: Vec<f64> = z
        .real_part
        .iter()
        .zip(&z.imag_part)
        .map(|(re, im)| re.hypot(*im))
        .collect();
    let vanishing = amplitude.iter().filter(|&&a| a < 1e-12).count();
    if 2 * vanishing > n {
        return Err(SignalError::DegenerateSignal);
    }

    let phase = unwrap_phase(z.real_part.iter().zip(&z.imag_part).map(|(re, im)| im.atan2(*re)));
    let to_hz = z.rate / (2.0 * PI);
    let mut frequency = Vec::with_capacity(n);
    frequency.push((phase[1] - phase[0]) * to_hz);
    for i in 1..n - 1 {
        frequency.push(0.5 * (phase[i + 1] - phase[i - 1]) * to_hz);
    }
    frequency.push((phase[n - 1] - phase[n - 2]) * to_hz);
    Ok(InstantAttributes { amplitude, frequency })
}

fn unwrap_phase(wrapped: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for p in wrapped {
        if let Some(q) = prev {
            let jump = p - q;
            if jump > PI {
                offset -= 2.0 * PI * ((jump + PI) / (2.0 * PI)).floor();
            } else if jump < -PI {
                offset += 2.0 * PI * ((-jump + PI) / (2.0 * PI)).floor();
            }
        }
        out.push(p + offset);
        prev = Some(p);
    }
    out
}
