mod common;

use common::*;
use ivcnav::localizer::*;
use ivcnav::model::{build_tiny_x3d, ModelSpec, Weights};
use ivcnav::tensor::{channel_l2_norm, FeatureMap, SaliencyVolume, VideoClip, Volume};
use proptest::prelude::*;
use rand::Rng;

const DIMS: [usize; 3] = [4, 64, 64];

fn cand(t: usize, h: usize, w: usize) -> Candidate {
    Candidate { t, h, w, value: 1.0 }
}

fn set(entries: Vec<Candidate>) -> CandidateSet {
    CandidateSet { entries }
}

fn sal(v: Volume<f64>) -> SaliencyVolume<f64> {
    SaliencyVolume::new(v).unwrap()
}

/// Every stage keeps channel 0 as a blurred, strided copy of the input: box
/// filters on the main branch, projection skip switched off, unit batch norm.
fn blob_detector() -> (ModelSpec, Weights<f32>) {
    let (spec, mut w) = build_tiny_x3d(DIMS, [2, 2, 2, 2], 0).unwrap();
    for (d, b) in spec.param_decls().iter().zip(w.blocks.iter_mut()) {
        let n = &d.name;
        b.data.fill(0.0);
        if n.ends_with(".gamma") || n.ends_with(".running_var") {
            b.data.fill(if n.contains("proj_bn") { 0.0 } else { 1.0 });
            if n.ends_with(".running_var") {
                b.data.fill(1.0);
            }
        } else if n == "stem.conv.weight" {
            b.data[13] = 1.0; // centre tap, channel 0 -> 0
        } else if n.ends_with(".conv1.weight") || n.ends_with(".conv2.weight") {
            b.data[..27].fill(1.0 / 27.0);
        } else if n == "head.bias" {
            b.data[0] = 5.0;
        }
    }
    (spec, w)
}

fn blob_clip(ch: f64, cw: f64, sigma: f64) -> VideoClip {
    let [t, h, w] = DIMS;
    let mut data = Vec::with_capacity(t * h * w);
    for _ in 0..t {
        for y in 0..h {
            for x in 0..w {
                let d2 = (y as f64 - ch).powi(2) + (x as f64 - cw).powi(2);
                data.push((-d2 / (2.0 * sigma * sigma)).exp() as f32);
            }
        }
    }
    VideoClip::from_frames(DIMS, data).unwrap()
}

#[test]
fn constructed_detector_finds_blob_within_two_pixels() {
    let (spec, w) = blob_detector();
    let config = LocalizerConfig {
        n_candidates: 100,
        ..Default::default()
    };
    for (ch, cw) in [(32.0, 24.0), (29.5, 21.0), (40.0, 44.3), (20.2, 37.7)] {
        let r = localize(&spec, &w, &blob_clip(ch, cw, 4.0), &config).unwrap();
        assert_eq!(r.status, LocalizationStatus::Located);
        let a = r.annotation.unwrap();
        let err = ((a.center_h - ch).powi(2) + (a.center_w - cw).powi(2)).sqrt();
        assert!(err <= 2.0, "blob ({ch}, {cw}) -> ({}, {}), off by {err}", a.center_h, a.center_w);
    }
}

#[test]
fn negative_bias_is_gated() {
    let (spec, mut w) = build_tiny_x3d(DIMS, [2, 2, 2, 2], 1).unwrap();
    w.get_mut("head.bias").unwrap().data[0] = -10.0;
    w.get_mut("head.weight").unwrap().data.fill(0.0);
    let clip = blob_clip(30.0, 30.0, 5.0);
    let r = localize(&spec, &w, &clip, &LocalizerConfig::default()).unwrap();
    assert_eq!(r.status, LocalizationStatus::GatedNegative);
    assert!(r.annotation.is_none() && r.survivors.is_empty());
    let frames = annotate(&clip, &r);
    for (i, f) in frames.iter().enumerate() {
        assert_eq!(f, &RgbFrame::from_gray(clip.frame(i), 64, 64));
    }
}

#[test]
fn unknown_tap_and_wrong_dims_are_errors() {
    let (spec, w) = blob_detector();
    let bad_tap = LocalizerConfig {
        tap_name: "stage9".into(),
        ..Default::default()
    };
    assert!(matches!(
        localize(&spec, &w, &blob_clip(1.0, 1.0, 1.0), &bad_tap),
        Err(ivcnav::Error::UnknownTap(_))
    ));
    let small = VideoClip::zeros([4, 32, 64]);
    assert!(matches!(
        localize(&spec, &w, &small, &LocalizerConfig::default()),
        Err(ivcnav::Error::Dimension { .. })
    ));
}

#[test]
fn top_n_examples() {
    let mut v = Volume::filled([1, 2, 3, 3], 0.5);
    v.set([0, 1, 2, 0], 0.9);
    let s = select_top_n(&sal(v), 1);
    assert_eq!((s.entries[0].t, s.entries[0].h, s.entries[0].w), (1, 2, 0));

    let s = select_top_n(&sal(Volume::filled([1, 2, 2, 2], 1.0)), 3);
    let coords: Vec<_> = s.entries.iter().map(|c| (c.t, c.h, c.w)).collect();
    assert_eq!(coords, vec![(0, 0, 0), (0, 0, 1), (0, 1, 0)]);

    let s = select_top_n(&sal(Volume::filled([1, 1, 2, 2], 1.0)), 10);
    assert_eq!(s.len(), 4);
}

#[test]
fn black_filter_examples() {
    let s = set(vec![cand(0, 0, 0), cand(1, 1, 1), cand(2, 0, 1)]);
    let ones = VideoClip::from_frames([4, 2, 2], vec![1.0; 16]).unwrap();
    assert_eq!(filter_black(&s, &ones, 0.0), s);

    // Column (0,0) black throughout; (1,1) black only in frame 0.
    let mut data = vec![0.5f32; 16];
    for t in 0..4 {
        data[t * 4] = 0.0;
    }
    data[3] = 0.0;
    let clip = VideoClip::from_frames([4, 2, 2], data).unwrap();
    let kept = filter_black(&s, &clip, 0.0);
    let coords: Vec<_> = kept.entries.iter().map(|c| (c.h, c.w)).collect();
    assert_eq!(coords, vec![(1, 1), (0, 1)]);
}

#[test]
fn outlier_filter_examples() {
    let same = set(vec![cand(0, 5, 5); 4]);
    assert_eq!(filter_outliers(&same, 40.0), same);

    let mut e = vec![cand(0, 10, 10); 9];
    e.push(cand(0, 200, 200));
    let kept = filter_outliers(&set(e), 40.0);
    assert_eq!(kept.len(), 9);
    assert!(kept.entries.iter().all(|c| (c.h, c.w) == (10, 10)));

    let pair = set(vec![cand(0, 0, 0), cand(0, 0, 100)]);
    assert!(filter_outliers(&pair, 40.0).is_empty());
    assert!(filter_outliers(&set(vec![]), 40.0).is_empty());
}

#[test]
fn disc_rasterization() {
    let a = Annotation {
        center_h: 5.0,
        center_w: 5.0,
        radius: 2.0,
    };
    assert_eq!(disc_pixels(&a, 10, 10).count(), 13);
    let corner = Annotation {
        center_h: 0.0,
        center_w: 0.0,
        radius: 3.0,
    };
    let px: Vec<_> = disc_pixels(&corner, 10, 10).collect();
    assert_eq!(px.len(), 11);
    assert!(px.iter().all(|&(h, w)| h < 10 && w < 10));
}

#[test]
fn annotate_blends_green_inside_disc_only() {
    let (spec, w) = blob_detector();
    let clip = blob_clip(30.0, 30.0, 4.0);
    let r = localize(&spec, &w, &clip, &LocalizerConfig::default()).unwrap();
    let a = r.annotation.unwrap();
    let frames = annotate(&clip, &r);
    let inside: std::collections::HashSet<_> = disc_pixels(&a, 64, 64).collect();
    for (t, f) in frames.iter().enumerate() {
        let gray = RgbFrame::from_gray(clip.frame(t), 64, 64);
        for h in 0..64 {
            for x in 0..64 {
                let [g, _, _] = gray.pixel(h, x);
                let p = f.pixel(h, x);
                if inside.contains(&(h, x)) {
                    let blend = |c: f32| (0.5 * (g as f32) + 0.5 * c).round() as i32;
                    assert!((p[1] as i32 - blend(255.0)).abs() <= 1 && (p[0] as i32 - blend(0.0)).abs() <= 1);
                } else {
                    assert_eq!(p, [g, g, g]);
                }
            }
        }
    }
}

#[test]
fn scaled_defaults_follow_clip_height() {
    let c = LocalizerConfig::default();
    assert_eq!(c.outlier_dist(224), 40.0);
    assert_eq!(c.annotation_radius(224), 20.0);
    assert!((c.annotation_radius(64) - 20.0 * 64.0 / 224.0).abs() < 1e-12);
    let abs = LocalizerConfig {
        annotation_radius_px: Some(7.0),
        ..Default::default()
    };
    assert_eq!(abs.annotation_radius(64), 7.0);
}

fn full_sort(v: &Volume<f64>, n: usize) -> Vec<(usize, usize, usize)> {
    let [_, t, h, w] = v.shape();
    let mut all: Vec<_> = (0..t)
        .flat_map(|a| (0..h).flat_map(move |b| (0..w).map(move |c| (a, b, c))))
        .map(|(a, b, c)| (v.get([0, a, b, c]), (a, b, c)))
        .collect();
    all.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)));
    let mut top: Vec<_> = all.into_iter().take(n).map(|x| x.1).collect();
    top.sort();
    top
}

fn coords(s: &CandidateSet) -> Vec<(usize, usize, usize)> {
    let mut c: Vec<_> = s.entries.iter().map(|c| (c.t, c.h, c.w)).collect();
    c.sort();
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn top_n_matches_full_sort(seed in any::<u64>(), n in 1usize..40, quantize in any::<bool>()) {
        let mut r = rng(seed);
        let v = Volume::from_fn([1, 4, 6, 6], |_| {
            let x: f64 = r.random_range(0.0..1.0);
            if quantize { (x * 4.0).floor() } else { x }
        });
        prop_assert_eq!(coords(&select_top_n(&sal(v.clone()), n)), full_sort(&v, n));
    }

    #[test]
    fn top_n_set_ignores_channel_scaling(seed in any::<u64>(), lambda in 0.05f64..20.0) {
        let mut r = rng(seed);
        let fm = random_volume(&mut r, [3, 2, 5, 5]);
        let a = channel_l2_norm(&FeatureMap::new(fm.clone()).unwrap());
        let b = channel_l2_norm(&FeatureMap::new(fm.map(|x| x * lambda)).unwrap());
        prop_assert_eq!(coords(&select_top_n(&a, 12)), coords(&select_top_n(&b, 12)));
    }

    #[test]
    fn pipeline_invariants_on_random_models(seed in any::<u64>(), bias in -3.0f32..3.0, n in 1usize..300) {
        let (spec, mut w) = build_tiny_x3d([4, 32, 32], [2, 2, 2, 2], seed).unwrap();
        w.get_mut("head.bias").unwrap().data[0] = bias;
        let mut r = rng(seed);
        let clip = random_clip(&mut r, [4, 32, 32]);
        let config = LocalizerConfig { n_candidates: n, ..Default::default() };
        let res = localize(&spec, &w, &clip, &config).unwrap();
        prop_assert_eq!(&res, &localize(&spec, &w, &clip, &config).unwrap());
        if res.prediction.logit <= 0.0 {
            prop_assert_eq!(res.status, LocalizationStatus::GatedNegative);
            prop_assert!(res.annotation.is_none() && res.survivors.is_empty());
            return Ok(());
        }
        let out = saliency(&spec, &w, &clip, "stage3").unwrap();
        let top = select_top_n(out.saliency.as_ref().unwrap(), n);
        let lit = filter_black(&top, &clip, 0.0);
        prop_assert!(lit.len() <= top.len() && res.survivors.len() <= lit.len());
        let top_c = coords(&top);
        prop_assert!(coords(&res.survivors).iter().all(|c| top_c.binary_search(c).is_ok()));
        match res.annotation {
            Some(a) => {
                prop_assert_eq!(res.status, LocalizationStatus::Located);
                let (mh, mw) = centre(&res.survivors.entries);
                prop_assert_eq!((a.center_h, a.center_w), (mh, mw));
                prop_assert!(a.center_h >= 0.0 && a.center_h < 32.0 && a.center_w >= 0.0 && a.center_w < 32.0);
            }
            None => {
                prop_assert_eq!(res.status, LocalizationStatus::EmptyAfterFiltering);
                prop_assert!(res.survivors.is_empty());
            }
        }
    }
}
