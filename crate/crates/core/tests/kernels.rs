mod common;

use common::*;
use ivcnav::tensor::*;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn kernels_match_brute_force_oracles() {
    let s = kernel_suite(1, 30);
    assert!(s.cases >= 100);
    assert!(s.worst() <= 1e-12, "{s:?}");
}

#[test]
fn relu_examples() {
    assert_eq!(relu(-1.0f64), 0.0);
    assert_eq!(relu(2.0f64), 2.0);
    let v = Volume::from_vec([1, 1, 1, 3], vec![-0.5f64, 0.0, 0.5]).unwrap();
    assert_eq!(relu_volume(&v).data(), &[0.0, 0.0, 0.5]);
}

#[test]
fn linear_identity_and_shape_error() {
    let x = vec![0.3, -1.2, 4.0];
    let mut id = vec![0.0; 9];
    for i in 0..3 {
        id[i * 3 + i] = 1.0;
    }
    assert_eq!(linear_forward(&x, &id, &[0.0; 3]).unwrap(), x);
    assert!(matches!(linear_forward(&x, &id[..8], &[0.0; 3]), Err(ivcnav::Error::Dimension { .. })));
}

#[test]
fn six_to_one_affine_matches_dot_product() {
    let mut r = rng(6);
    for _ in 0..20 {
        let x = random_vec(&mut r, 6);
        let w = random_vec(&mut r, 6);
        let b = random_vec(&mut r, 1);
        let y = linear_forward(&x, &w, &b).unwrap();
        assert!((y[0] - dot_oracle(&x, &w, &b)[0]).abs() <= 1e-6);
    }
}

#[test]
fn conv_identity_kernel_and_constant_sum() {
    let mut r = rng(2);
    let x = random_volume(&mut r, [1, 4, 5, 6]);
    let g = ConvGeometry::cubic(1, 1, 3, [1; 3], 1);
    let mut k = vec![0.0; 27];
    k[13] = 1.0;
    assert_eq!(conv3d_forward(&x, &k, &[], &g).unwrap(), x);

    let ones = Volume::filled([2, 3, 3, 3], 1.0f64);
    let g = ConvGeometry::cubic(2, 1, 3, [1; 3], 0);
    let y = conv3d_forward(&ones, &vec![1.0; 54], &[0.5], &g).unwrap();
    assert_eq!(y.data(), &[54.5]);
}

#[test]
fn conv_rejects_channel_mismatch() {
    let x = Volume::<f64>::zeros([2, 3, 3, 3]);
    let g = ConvGeometry::cubic(3, 1, 1, [1; 3], 0);
    assert!(matches!(conv3d_forward(&x, &[0.0; 3], &[], &g), Err(ivcnav::Error::Dimension { .. })));
}

#[test]
fn batchnorm_rejects_negative_variance() {
    let x = Volume::<f64>::zeros([1, 1, 1, 1]);
    let p = BatchNormParams {
        mean: &[0.0],
        var: &[-1.0],
        gamma: &[1.0],
        beta: &[0.0],
        eps: 1e-5,
    };
    assert!(batchnorm_infer(&x, p).is_err());
}

#[test]
fn global_pool_is_channel_mean() {
    let v = Volume::from_fn([2, 2, 2, 2], |[c, t, h, w]| (c * 100 + t * 4 + h * 2 + w) as f64);
    assert_eq!(global_avg_pool(&v).data(), &[3.5, 103.5]);
}

#[test]
fn f32_tracks_f64() {
    let mut r = rng(3);
    for _ in 0..20 {
        let g = ConvGeometry::cubic(3, 4, 3, [1, 2, 2], 1);
        let x = random_volume(&mut r, [3, 4, 8, 8]);
        let w = random_vec(&mut r, g.weight_len());
        let b = random_vec(&mut r, 4);
        let y64 = conv3d_forward(&x, &w, &b, &g).unwrap();
        let w32: Vec<f32> = w.iter().map(|&v| v as f32).collect();
        let b32: Vec<f32> = b.iter().map(|&v| v as f32).collect();
        let y32 = conv3d_forward(&x.cast::<f32>(), &w32, &b32, &g).unwrap();
        let y32: Vec<f64> = y32.data().iter().map(|&v| v as f64).collect();
        assert!(rel_inf(&y32, y64.data()) <= 1e-3);
    }
}

#[test]
fn kernels_are_bitwise_deterministic() {
    let mut r = rng(4);
    let g = ConvGeometry::cubic(2, 3, 3, [2, 1, 2], 1);
    let x = random_volume(&mut r, [2, 5, 6, 7]).cast::<f32>();
    let w: Vec<f32> = random_vec(&mut r, g.weight_len()).iter().map(|&v| v as f32).collect();
    let a = conv3d_forward(&x, &w, &[], &g).unwrap();
    let b = conv3d_forward(&x, &w, &[], &g).unwrap();
    let bits = |v: &Volume<f32>| v.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    let sa = spline_resize3d(&channel_l2_norm(&FeatureMap::new(a.clone()).unwrap()), [9, 11, 13]);
    let sb = spline_resize3d(&channel_l2_norm(&FeatureMap::new(b).unwrap()), [9, 11, 13]);
    assert_eq!(bits(sa.volume()), bits(sb.volume()));
}

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold(0, |best, (i, &x)| if x > v[best] { i } else { best })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv_is_linear_in_input(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut r = rng(seed);
        let g = ConvGeometry::cubic(2, 3, 3, [1, 2, 1], 1);
        let x = random_volume(&mut r, [2, 4, 5, 5]);
        let z = random_volume(&mut r, [2, 4, 5, 5]);
        let w = random_vec(&mut r, g.weight_len());
        let mix = Volume::from_vec(x.shape(), x.data().iter().zip(z.data()).map(|(p, q)| a * p + b * q).collect()).unwrap();
        let lhs = conv3d_forward(&mix, &w, &[], &g).unwrap();
        let fx = conv3d_forward(&x, &w, &[], &g).unwrap();
        let fz = conv3d_forward(&z, &w, &[], &g).unwrap();
        for ((l, p), q) in lhs.data().iter().zip(fx.data()).zip(fz.data()) {
            prop_assert!((l - (a * p + b * q)).abs() <= 1e-5);
        }
    }

    #[test]
    fn l2_argmax_survives_channel_scaling(seed in any::<u64>(), lambda in 0.01f64..100.0) {
        let mut r = rng(seed);
        let v = random_volume(&mut r, [4, 3, 5, 5]);
        let scaled = v.map(|x| x * lambda);
        let s = channel_l2_norm(&FeatureMap::new(v).unwrap());
        let t = channel_l2_norm(&FeatureMap::new(scaled).unwrap());
        prop_assert_eq!(argmax(s.volume().data()), argmax(t.volume().data()));
    }

    #[test]
    fn channel_norms_are_nonnegative(seed in any::<u64>()) {
        let mut r = rng(seed);
        let v = random_volume(&mut r, [3, 2, 4, 4]);
        let fm = FeatureMap::new(v).unwrap();
        for kind in [ChannelNorm::L2, ChannelNorm::L1, ChannelNorm::MaxAbs] {
            prop_assert!(channel_norm(&fm, kind).volume().data().iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn max_pool_dominates_average(seed in any::<u64>()) {
        let mut r = rng(seed);
        let v = random_volume(&mut r, [2, 4, 4, 4]);
        let win = [r.random_range(1..=4), r.random_range(1..=4), r.random_range(1..=4)];
        let mx = pool3d(&v, PoolMode::Max, win, [1; 3]).unwrap();
        let av = pool3d(&v, PoolMode::Average, win, [1; 3]).unwrap();
        prop_assert!(mx.data().iter().zip(av.data()).all(|(m, a)| m >= a));
    }
}
