//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use hht_motion::beat::write_wav_pcm16;
use hht_motion::memd::MultivariateSeries;
use hht_motion::mocap_io::{parse_bvh, MotionClip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

pub fn tone(n: usize, rate: f64, freq: f64, amp: f64, phase: f64) -> Vec<f64> {
    (0..n).map(|k| amp * (2.0 * PI * freq * k as f64 / rate + phase).sin()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Tones,
    Chirp,
    Mixture,
    Noise,
}

/// One randomized corpus signal: 2 channels, 5 to 60 s, 30 to 100 Hz.
pub struct CorpusSignal {
    pub kind: Kind,
    pub series: MultivariateSeries,
}

pub fn corpus_signal(index: u64) -> CorpusSignal {
    let mut r = rng(0xC0_4B05 + index);
    let kind = [Kind::Tones, Kind::Chirp, Kind::Mixture, Kind::Noise][(index % 4) as usize];
    let rate = r.random_range(30.0..100.0);
    let seconds = r.random_range(5.0..60.0);
    let n = (rate * seconds) as usize;
    let fmax = rate / 10.0;
    let channels: Vec<Vec<f64>> = (0..2)
        .map(|_| match kind {
            Kind::Tones => {
                let k = r.random_range(1..=3);
                let mut x = vec![0.0; n];
                for _ in 0..k {
                    let t = tone(n, rate, r.random_range(0.2..fmax), r.random_range(0.5..2.0), r.random_range(0.0..6.3));
                    x.iter_mut().zip(t).for_each(|(a, b)| *a += b);
                }
                x
            }
            Kind::Chirp => {
                let f0 = r.random_range(0.2..1.0);
                let f1 = r.random_range(f0 + 0.5..fmax);
                let beta = (f1 - f0) / seconds;
                (0..n)
                    .map(|k| {
                        let t = k as f64 / rate;
                        (2.0 * PI * (f0 * t + 0.5 * beta * t * t)).cos()
                    })
                    .collect()
            }
            Kind::Mixture => {
                let slope = r.random_range(-0.2..0.2);
                let a = tone(n, rate, r.random_range(0.3..1.0), 1.0, r.random_range(0.0..6.3));
                let b = tone(n, rate, r.random_range(2.0..fmax), 0.4, r.random_range(0.0..6.3));
                (0..n).map(|k| a[k] + b[k] + slope * k as f64 / rate + 3.0).collect()
            }
            Kind::Noise => (0..n).map(|_| r.sample::<f64, _>(StandardNormal)).collect(),
        })
        .collect();
    CorpusSignal {
        kind,
        series: MultivariateSeries::new(channels, vec!["c0".into(), "c1".into()], rate).unwrap(),
    }
}

/// Short percussive bursts starting at each time in `times`.
pub fn click_track(times: &[f64], seconds: f64, rate: f64) -> Vec<f64> {
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
    x
}

pub fn click_wav(times: &[f64], seconds: f64, rate: u32) -> Vec<u8> {
    write_wav_pcm16(&click_track(times, seconds, rate as f64), rate)
}

/// A small humanoid: Hips with a Y-up spine chain and two legs below it.
pub fn humanoid_header() -> &'static str {
    "HIERARCHY
ROOT Hips
{
\tOFFSET 0.000000 0.000000 0.000000
\tCHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
\tJOINT Spine
\t{
\t\tOFFSET 0.000000 10.000000 0.000000
\t\tCHANNELS 3 Zrotation Xrotation Yrotation
\t\tJOINT Head
\t\t{
\t\t\tOFFSET 0.000000 12.000000 0.000000
\t\t\tCHANNELS 3 Zrotation Xrotation Yrotation
\t\t\tEnd Site
\t\t\t{
\t\t\t\tOFFSET 0.000000 5.000000 0.000000
\t\t\t}
\t\t}
\t}
\tJOINT LeftLeg
\t{
\t\tOFFSET 5.000000 -8.000000 0.000000
\t\tCHANNELS 3 Zrotation Xrotation Yrotation
\t\tEnd Site
\t\t{
\t\t\tOFFSET 0.000000 -30.000000 0.000000
\t\t}
\t}
\tJOINT RightLeg
\t{
\t\tOFFSET -5.000000 -8.000000 0.000000
\t\tCHANNELS 3 Zrotation Xrotation Yrotation
\t\tEnd Site
\t\t{
\t\t\tOFFSET 0.000000 -30.000000 0.000000
\t\t}
\t}
}
"
}

/// Builds a humanoid clip whose 18 channels are `f(channel, t)`.
pub fn humanoid_clip(frames: usize, fps: f64, f: impl Fn(usize, f64) -> f64) -> MotionClip {
    let mut text = String::from(humanoid_header());
    text.push_str(&format!("MOTION\nFrames: {frames}\nFrame Time: {:.6}\n", 1.0 / fps));
    for k in 0..frames {
        let t = k as f64 / fps;
        let row: Vec<String> = (0..18).map(|c| format!("{:.6}", f(c, t))).collect();
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    parse_bvh(&text).unwrap()
}

/// BVH text for a random tree of `joints` joints with `frames` frames of
/// random channel values (rotations may exceed ±180).
pub fn random_bvh(seed: u64, joints: usize, frames: usize, fps: f64) -> String {
    let mut r = rng(seed);
    let mut parent = vec![None];
    for j in 1..joints {
        parent.push(Some(r.random_range(0..j)));
    }
    let children: Vec<Vec<usize>> = (0..joints).map(|j| (0..joints).filter(|&c| parent[c] == Some(j)).collect()).collect();
    let rot_orders = ["Zrotation Xrotation Yrotation", "Xrotation Yrotation Zrotation", "Yrotation Zrotation Xrotation"];
    let mut widths = vec![0; joints];
    let mut text = String::from("HIERARCHY\n");
    fn emit(
        j: usize,
        depth: usize,
        children: &[Vec<usize>],
        r: &mut ChaCha8Rng,
        widths: &mut [usize],
        rot_orders: &[&str],
        text: &mut String,
    ) {
        let pad = "  ".repeat(depth);
        let keyword = if j == 0 { "ROOT" } else { "JOINT" };
        text.push_str(&format!("{pad}{keyword} joint_{j}\n{pad}{{\n"));
        let off: Vec<String> = (0..3).map(|_| format!("{:.4}", r.random_range(-20.0..20.0))).collect();
        text.push_str(&format!("{pad}  OFFSET {}\n", off.join(" ")));
        let order = rot_orders[r.random_range(0..rot_orders.len())];
        if j == 0 || r.random_bool(0.2) {
            widths[j] = 6;
            text.push_str(&format!("{pad}  CHANNELS 6 Xposition Yposition Zposition {order}\n"));
        } else {
            widths[j] = 3;
            text.push_str(&format!("{pad}  CHANNELS 3 {order}\n"));
        }
        if children[j].is_empty() {
            text.push_str(&format!("{pad}  End Site\n{pad}  {{\n{pad}    OFFSET 0.0 {:.3} 0.0\n{pad}  }}\n", r.random_range(1.0..9.0)));
        }
        for &c in &children[j] {
            emit(c, depth + 1, children, r, widths, rot_orders, text);
        }
        text.push_str(&format!("{pad}}}\n"));
    }
    emit(0, 0, &children, &mut r, &mut widths, &rot_orders, &mut text);
    // Columns follow declaration (depth-first) order; widths are per joint so
    // only their total matters here.
    let columns: usize = widths.iter().sum();
    text.push_str(&format!("MOTION\nFrames: {frames}\nFrame Time: {:.6}\n", 1.0 / fps));
    for _ in 0..frames {
        let row: Vec<String> = (0..columns).map(|_| format!("{:.5}", r.random_range(-400.0..400.0))).collect();
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    text
}
