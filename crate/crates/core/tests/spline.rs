mod common;

use common::*;
use ivcnav::tensor::*;
use proptest::prelude::*;

fn sal(shape: [usize; 3], f: impl FnMut([usize; 4]) -> f64) -> SaliencyVolume<f64> {
    SaliencyVolume::new(Volume::from_fn([1, shape[0], shape[1], shape[2]], f)).unwrap()
}

#[test]
fn seeded_cases_against_oracles() {
    let s = spline_suite(11, 50);
    assert_eq!(s.lattice_mismatches, 0);
    assert!(s.linear_err <= 1e-6, "{s:?}");
    assert!(s.oracle_err <= 1e-6, "{s:?}");
}

#[test]
fn ramp_upsampled_by_two() {
    let v = sal([1, 1, 6], |[_, _, _, w]| 2.0 + 0.5 * w as f64);
    let out = spline_resize3d(&v, [1, 1, 12]);
    for i in 0..12 {
        let x = (i as f64 / 2.0).min(5.0);
        assert!((out.volume().data()[i] - (2.0 + 0.5 * x)).abs() <= 1e-6);
    }
}

#[test]
fn two_cubed_to_five_cubed_matches_separable_oracle() {
    let mut r = rng(21);
    for _ in 0..10 {
        let v = random_volume(&mut r, [1, 2, 2, 2]).map(f64::abs);
        let out = spline_resize3d(&SaliencyVolume::new(v.clone()).unwrap(), [5, 5, 5]);
        assert!(rel_inf(out.volume().data(), &spline_oracle(&v, [5, 5, 5])) <= 1e-6);
    }
}

#[test]
fn overshoot_is_clamped_at_zero() {
    // A spike next to zeros rings negative under Catmull-Rom.
    let v = sal([1, 1, 5], |[_, _, _, w]| if w == 2 { 1.0 } else { 0.0 });
    let out = spline_resize3d(&v, [1, 1, 20]);
    assert!(out.volume().data().iter().all(|&x| x >= 0.0));
    assert!(out.volume().data().contains(&0.0));
}

#[test]
fn stride_two_lattice_lines_up_with_receptive_fields() {
    // Feature o of a stride-2 pyramid sits at input 2^k * o.
    assert_eq!(source_coordinate(0, 8, 64), 0.0);
    assert_eq!(source_coordinate(24, 8, 64), 3.0);
    assert_eq!(source_coordinate(63, 8, 64), 7.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn constant_fields_are_reproduced(c in 0.0f64..10.0, d in (1usize..5, 1usize..6, 1usize..6), t in (1usize..9, 1usize..9, 1usize..9)) {
        let v = sal([d.0, d.1, d.2], |_| c);
        let out = spline_resize3d(&v, [t.0, t.1, t.2]);
        prop_assert!(out.volume().data().iter().all(|&x| (x - c).abs() <= 1e-9));
    }

    #[test]
    fn integer_upsampling_hits_source_lattice(seed in any::<u64>(), k in 1usize..4) {
        let mut r = rng(seed);
        let v = random_volume(&mut r, [1, 3, 4, 5]).map(f64::abs);
        let out = spline_resize3d(&SaliencyVolume::new(v.clone()).unwrap(), [3 * k, 4 * k, 5 * k]);
        for a in 0..3 { for b in 0..4 { for c in 0..5 {
            let got = out.volume().get([0, a * k, b * k, c * k]);
            prop_assert!((got - v.get([0, a, b, c])).abs() <= 1e-12);
        }}}
    }
}
