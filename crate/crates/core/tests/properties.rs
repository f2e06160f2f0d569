mod common;

use std::path::Path;

use common::*;
use cpdtv::io::{decode_ct3, encode_ct3};
use cpdtv::tv::{tv_l1, TvAxis};
use cpdtv::{
    cpd_synthesize, fold, frobenius_norm, khatri_rao, normalize_factors, nrmse, psnr, unfold, Dims, Mode, Tensor3,
    Tensor3f32,
};
use num_complex::{Complex32, Complex64};
use proptest::prelude::*;

fn dims_strategy() -> impl Strategy<Value = Dims> {
    (1usize..=10, 1usize..=5, 1usize..=5).prop_map(|(n, e, t)| Dims::new(n, e, t).unwrap())
}

fn tensor_and_seed() -> impl Strategy<Value = (Tensor3, u64)> {
    (dims_strategy(), any::<u64>()).prop_map(|(d, s)| (random_tensor(&mut rng(s), d), s))
}

fn max_entry_diff(a: &Tensor3, b: &Tensor3) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fold_inverts_unfold((x, _) in tensor_and_seed()) {
        for mode in Mode::ALL {
            let back = fold(&unfold(&x, mode), mode, x.dims()).unwrap();
            prop_assert_eq!(back.data(), x.data());
        }
    }

    #[test]
    fn unfolding_preserves_entries((x, _) in tensor_and_seed()) {
        let d = x.dims();
        let m1 = unfold(&x, Mode::Space);
        let m2 = unfold(&x, Mode::Echo);
        let m3 = unfold(&x, Mode::Motion);
        for i in 0..d.n() {
            for j in 0..d.e() {
                for k in 0..d.t() {
                    let v = x.get(i, j, k);
                    prop_assert_eq!(m1[(i, j + d.e() * k)], v);
                    prop_assert_eq!(m2[(j, i + d.n() * k)], v);
                    prop_assert_eq!(m3[(k, i + d.n() * j)], v);
                }
            }
        }
    }

    #[test]
    fn unfolded_synthesis_is_factor_product(d in dims_strategy(), rank in 1usize..=4, seed in any::<u64>()) {
        let f = random_factors(&mut rng(seed), d, rank);
        let x = cpd_synthesize(&f);
        let scale = frobenius_norm(&x).max(1e-300);
        for mode in Mode::ALL {
            let (p, q) = f.others(mode);
            let kr = khatri_rao(p, q).unwrap();
            let prod = f.factor(mode).matmul(&kr.transpose()).unwrap();
            let diff = unfold(&x, mode).sub(&prod).unwrap().norm();
            prop_assert!(diff <= 1e-12 * scale, "mode {:?}: {:e}", mode, diff);
        }
    }

    #[test]
    fn khatri_rao_columns_are_kronecker_products(rows_p in 1usize..5, rows_q in 1usize..5, cols in 1usize..4, seed in any::<u64>()) {
        let mut g = rng(seed);
        let p = random_matrix(&mut g, rows_p, cols);
        let q = random_matrix(&mut g, rows_q, cols);
        let kr = khatri_rao(&p, &q).unwrap();
        prop_assert_eq!((kr.rows(), kr.cols()), (rows_p * rows_q, cols));
        for r in 0..cols {
            for a in 0..rows_p {
                for b in 0..rows_q {
                    prop_assert_eq!(kr[(a * rows_q + b, r)], p[(a, r)] * q[(b, r)]);
                }
            }
        }
    }

    #[test]
    fn normalization_keeps_the_model(d in dims_strategy(), rank in 1usize..=4, seed in any::<u64>()) {
        let f = random_factors(&mut rng(seed), d, rank);
        let g = normalize_factors(&f);
        for r in 0..rank {
            prop_assert!((g.a().col_norm(r) - 1.0).abs() < 1e-12);
            prop_assert!((g.b().col_norm(r) - 1.0).abs() < 1e-12);
        }
        let (x, y) = (cpd_synthesize(&f), cpd_synthesize(&g));
        prop_assert!(max_entry_diff(&x, &y) <= 1e-13 * frobenius_norm(&x));
    }

    #[test]
    fn tv_ignores_constant_offsets_along_its_axis((x, seed) in tensor_and_seed()) {
        let d = x.dims();
        let mut g = rng(seed ^ 1);
        let per_fiber: Vec<Complex64> = (0..d.n() * d.t()).map(|_| cnum(&mut g)).collect();
        let shifted = Tensor3::from_fn(d, |i, j, k| x.get(i, j, k) + per_fiber[i + d.n() * k]).unwrap();
        let before = tv_l1(&x, TvAxis::Echo);
        prop_assert!((tv_l1(&shifted, TvAxis::Echo) - before).abs() <= 1e-12 * (1.0 + before));
    }

    #[test]
    fn tv_is_absolutely_homogeneous((x, _) in tensor_and_seed(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let s = Complex64::new(re, im);
        for axis in [TvAxis::Echo, TvAxis::Motion] {
            let base = tv_l1(&x, axis);
            let scaled = tv_l1(&x.scale(s), axis);
            prop_assert!((scaled - s.norm() * base).abs() <= 1e-12 * (1.0 + scaled));
        }
    }

    #[test]
    fn nrmse_is_scale_invariant((x, seed) in tensor_and_seed(), re in 0.1f64..5.0, im in -5.0f64..5.0) {
        let y = random_tensor(&mut rng(seed ^ 2), x.dims());
        let s = Complex64::new(re, im);
        let a = nrmse(&x, &y).unwrap();
        let b = nrmse(&x.scale(s), &y.scale(s)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        prop_assert!(psnr(&y, &y).unwrap().is_infinite());
    }

    #[test]
    fn ct3_bytes_round_trip(d in dims_strategy(), seed in any::<u64>()) {
        let mut g = rng(seed);
        let x = Tensor3f32::from_fn(d, |_, _, _| {
            let z = cnum(&mut g) * 1e3;
            Complex32::new(z.re as f32, z.im as f32)
        }).unwrap();
        let bytes = encode_ct3(&x).unwrap();
        prop_assert_eq!(bytes.len(), 32 + 8 * d.len());
        let back: Tensor3f32 = decode_ct3(&bytes, Path::new("mem")).unwrap();
        prop_assert_eq!(back.data(), x.data());
        prop_assert_eq!(encode_ct3(&back).unwrap(), bytes);
    }
}
