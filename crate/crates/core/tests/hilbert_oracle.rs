mod common;

use std::f64::consts::PI;

use common::{rms, rng};
use hht_motion::signal_core::{analytic_signal, instantaneous_attributes, TimeSeries};
use rand::Rng;

/// Circular principal-value convolution with the discrete Hilbert kernel
/// `(2/N)·cot(πn/N)` on odd lags, zero on even lags (N even).
fn pv_hilbert(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    assert!(n % 2 == 0);
    let kernel: Vec<f64> = (0..n)
        .map(|m| if m % 2 == 1 { 2.0 / n as f64 / (PI * m as f64 / n as f64).tan() } else { 0.0 })
        .collect();
    (0..n).map(|i| (0..n).map(|j| kernel[(i + n - j) % n] * x[j]).sum()).collect()
}

fn interior(n: usize) -> std::ops::Range<usize> {
    n / 10..n - n / 10
}

#[test]
fn analytic_signal_matches_convolution_oracle() {
    let mut r = rng(11);
    for trial in 0..6 {
        let n = 2 * r.random_range(64..400);
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let z = analytic_signal(&TimeSeries::new(x.clone(), 50.0).unwrap()).unwrap();
        let oracle = pv_hilbert(&x);
        let diff: Vec<f64> = interior(n).map(|i| z.imag_part[i] - oracle[i]).collect();
        assert!(rms(&diff) < 1e-10, "trial {trial}: {}", rms(&diff));
        assert_eq!(z.real_part, x);
    }
}

#[test]
fn cosine_attributes_are_recovered() {
    for f in [0.5, 1.0, 2.0, 5.0] {
        let a = 1.7;
        let x = TimeSeries::from_fn(2000, 100.0, |t| a * (2.0 * PI * f * t).cos()).unwrap();
        let attrs = instantaneous_attributes(&analytic_signal(&x).unwrap()).unwrap();
        for i in interior(2000) {
            assert!((attrs.amplitude[i] - a).abs() <= 0.01 * a, "f {f} i {i}: {}", attrs.amplitude[i]);
            assert!((attrs.frequency[i] - f).abs() <= 0.02 * f, "f {f} i {i}: {}", attrs.frequency[i]);
        }
    }
}

#[test]
fn chirp_frequency_tracks_the_sweep() {
    let rate = 100.0;
    let (f0, f1, secs) = (1.0, 4.0, 30.0);
    let beta = (f1 - f0) / secs;
    let x = TimeSeries::from_fn((secs * rate) as usize, rate, |t| (2.0 * PI * (f0 * t + 0.5 * beta * t * t)).cos()).unwrap();
    let attrs = instantaneous_attributes(&analytic_signal(&x).unwrap()).unwrap();
    for i in interior(x.len()) {
        let want = f0 + beta * i as f64 / rate;
        assert!((attrs.frequency[i] - want).abs() < 0.1, "i {i}: {} vs {want}", attrs.frequency[i]);
    }
}

#[test]
fn modulated_amplitude_is_recovered() {
    let rate = 200.0;
    let env = |t: f64| 1.0 + 0.5 * (2.0 * PI * 0.25 * t).sin();
    let x = TimeSeries::from_fn(4000, rate, |t| env(t) * (2.0 * PI * 6.0 * t).cos()).unwrap();
    let attrs = instantaneous_attributes(&analytic_signal(&x).unwrap()).unwrap();
    for i in interior(4000) {
        let t = i as f64 / rate;
        assert!((attrs.amplitude[i] - env(t)).abs() < 0.02, "t {t}");
        assert!((attrs.frequency[i] - 6.0).abs() < 0.1, "t {t}");
    }
}
