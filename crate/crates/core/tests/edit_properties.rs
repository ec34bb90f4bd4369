mod common;

use common::{humanoid_clip, rms, rng, tone};
use hht_motion::edit::{
    align, apply_blend, merge_imfs, reconstruct, synthesize_clip, upper_body_joints, AlignedPair, BlendOp, BlendSpec,
    EditError, ImfSelector, OpKind, Source,
};
use hht_motion::memd::{na_memd, MultivariateDecomposition, NaMemdParams};
use hht_motion::mocap_io::{extract_channels, MocapError};
use hht_motion::signal_core::{Decomposition, DecompositionMeta};
use proptest::prelude::*;
use rand::Rng;

fn random_md(seed: u64, imfs: usize, len: usize, labels: &[String]) -> MultivariateDecomposition {
    let mut r = rng(seed);
    let per_channel = labels
        .iter()
        .map(|_| {
            let imfs = (0..imfs).map(|_| (0..len).map(|_| r.random_range(-5.0..5.0)).collect()).collect();
            let trend = (0..len).map(|_| r.random_range(-50.0..50.0)).collect();
            Decomposition::new(imfs, trend, 40.0, DecompositionMeta::default()).unwrap()
        })
        .collect();
    MultivariateDecomposition::new(per_channel, labels.to_vec(), DecompositionMeta::default()).unwrap()
}

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("j{}.Xrotation", i)).collect()
}

fn op(kind: OpKind) -> BlendOp {
    BlendOp::new(kind)
}

fn spec(ops: Vec<BlendOp>) -> BlendSpec {
    BlendSpec { target_rate: None, operations: ops }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn identity_swap_involution_merge(seed in 0u64..1_000_000, k in 2usize..7, ch in 1usize..5, len in 16usize..200) {
        let l = labels(ch);
        let a = random_md(seed, k, len, &l);
        let b = random_md(seed + 1, k, len, &l);
        let pair = AlignedPair { a: a.clone(), b: b.clone() };

        prop_assert_eq!(&apply_blend(&pair, &BlendSpec::default()).unwrap(), &a);

        let mut total = op(OpKind::Swap);
        total.include_trend = true;
        prop_assert_eq!(apply_blend(&pair, &spec(vec![total])).unwrap().per_channel, b.per_channel.clone());

        let mut partial = op(OpKind::Swap);
        partial.imfs = vec![ImfSelector::Range([1, k / 2 + 1])];
        partial.channels = vec![l[seed as usize % ch].clone()];
        partial.include_trend = seed % 2 == 0;
        let s = spec(vec![partial]);
        let a1 = apply_blend(&pair, &s).unwrap();
        let b1 = apply_blend(&AlignedPair { a: b.clone(), b: a.clone() }, &s).unwrap();
        prop_assert_eq!(&apply_blend(&AlignedPair { a: a1, b: b1 }, &s).unwrap(), &a);

        let i = 1 + seed as usize % (k - 1);
        for d in &a.per_channel {
            let m = merge_imfs(d, i, k).unwrap();
            prop_assert_eq!(m.imf_count(), i);
            let scale = d.reconstruct().iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (x, y) in m.reconstruct().iter().zip(d.reconstruct()) {
                prop_assert!((x - y).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn linear_ops_reconstruct_linearly(seed in 0u64..1_000_000, alpha in 0.0f64..1.0, factor in -3.0f64..3.0) {
        let l = labels(2);
        let a = random_md(seed, 3, 50, &l);
        let b = random_md(seed + 7, 3, 50, &l);
        let mut scale = op(OpKind::Scale);
        scale.factor = Some(factor);
        scale.imfs = vec![ImfSelector::One(1)];
        let mut blend = op(OpKind::Blend);
        blend.alpha = Some(alpha);
        blend.imfs = vec![ImfSelector::One(2)];
        blend.include_trend = true;
        let mut zero = op(OpKind::Zero);
        zero.imfs = vec![ImfSelector::One(3)];
        let out = reconstruct(&apply_blend(&AlignedPair { a: a.clone(), b: b.clone() }, &spec(vec![scale, blend, zero])).unwrap())
            .unwrap();
        for c in 0..2 {
            let (da, db) = (&a.per_channel[c], &b.per_channel[c]);
            for i in 0..50 {
                let want = factor * da.imfs[0][i]
                    + alpha * da.imfs[1][i] + (1.0 - alpha) * db.imfs[1][i]
                    + alpha * da.trend[i] + (1.0 - alpha) * db.trend[i];
                prop_assert!((out.channels()[c][i] - want).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn trend_exchange_transplants_the_ramp() {
    let n = 400;
    let l = vec!["Hips.Yposition".to_string()];
    let shared = tone(n, 40.0, 2.0, 1.0, 0.0);
    let ramp = |s: f64| (0..n).map(|i| s * i as f64 / 40.0).collect::<Vec<f64>>();
    let mk = |trend: Vec<f64>| {
        MultivariateDecomposition::new(
            vec![Decomposition::new(vec![shared.clone()], trend, 40.0, DecompositionMeta::default()).unwrap()],
            l.clone(),
            DecompositionMeta::default(),
        )
        .unwrap()
    };
    let (a, b) = (mk(ramp(0.5)), mk(ramp(-2.0)));
    let out = apply_blend(&AlignedPair { a, b }, &spec(vec![op(OpKind::TrendExchange)])).unwrap();
    let rec = reconstruct(&out).unwrap();
    let got = &rec.channels()[0];
    for (i, g) in got.iter().enumerate() {
        assert!((g - (shared[i] - 2.0 * i as f64 / 40.0)).abs() < 1e-6);
    }
}

#[test]
fn align_common_duration() {
    let l = labels(2);
    let a = random_md(1, 3, 301, &l);
    let mut b = random_md(2, 4, 500, &l);
    for d in &mut b.per_channel {
        d.rate = 30.0;
    }
    let b = MultivariateDecomposition::new(b.per_channel, l.clone(), DecompositionMeta::default()).unwrap();
    let pair = align(&a, &b, 40.0).unwrap();
    // a: 301 frames at 40 fps (7.5 s span); b: 500 frames at 30 fps -> 666.
    assert_eq!(pair.a.len(), 301);
    assert_eq!(pair.b.len(), 301);
    assert_eq!(pair.a.imf_count(), 4);
    assert!(pair.a.per_channel[1].imfs[3].iter().all(|v| *v == 0.0));
    let other = random_md(3, 3, 301, &labels(3));
    assert!(matches!(align(&a, &other, 40.0), Err(EditError::ChannelMismatch { .. })));
}

#[test]
fn synthesized_clip_round_trips_and_smooths() {
    let clip = humanoid_clip(400, 40.0, |c, t| 5.0 * (c % 6 + 1) as f64 * (0.5 * t).sin() + 3.0 * (7.0 * t + c as f64).sin());
    let sel: Vec<String> = clip.skeleton().channel_labels().into_iter().filter(|l| l.contains("rotation")).collect();
    let x = extract_channels(&clip, &sel).unwrap();
    let d = na_memd(&x, &NaMemdParams { seed: 5, direction_count: 32, ..Default::default() }).unwrap();

    let same = synthesize_clip(&clip, &d, &[]).unwrap();
    let diff = same.frames().iter().flatten().zip(clip.frames().iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-6, "{diff}");

    let mut zero = op(OpKind::Zero);
    zero.imfs = vec![ImfSelector::One(1)];
    let smoothed = apply_blend(&AlignedPair { a: d.clone(), b: d.clone() }, &spec(vec![zero])).unwrap();
    let out = synthesize_clip(&clip, &smoothed, &[]).unwrap();
    let (col, _) = clip.skeleton().find_channel(&sel[2]).unwrap();
    let delta: Vec<f64> = out.column(col).iter().zip(clip.column(col)).map(|(a, b)| a - b).collect();
    assert!((rms(&delta) - rms(&d.per_channel[2].imfs[0])).abs() < 1e-6);

    let short = humanoid_clip(300, 40.0, |_, _| 0.0);
    assert!(matches!(
        synthesize_clip(&short, &d, &[]),
        Err(EditError::Mocap(MocapError::LengthMismatch { expected: 300, found: 400 }))
    ));
}

#[test]
fn upper_body_swap_spec() {
    let clip = humanoid_clip(10, 40.0, |_, _| 0.0);
    let upper = upper_body_joints(clip.skeleton());
    assert_eq!(upper, vec!["Spine".to_string(), "Head".to_string()]);
    let text = include_str!("../../../blends/upper_body_swap.json");
    let s = BlendSpec::from_json(text).unwrap();
    assert_eq!(s.operations[0].kind, OpKind::Swap);
    assert_eq!(s.operations[0].channels, upper);
    assert_eq!(s.operations[0].source, Source::B);
}
