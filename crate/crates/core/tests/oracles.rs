#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use cpdtv::tv::{tv_gradient, tv_smoothed};
use cpdtv::{
    cpd_synthesize, factor_gradient, objective, objective_terms, ComplexMatrix, Config, Dims, FactorSet, Mode,
    TvAxis, TvVariant,
};
use num_complex::Complex64;
use rand::RngCore;

fn fixed_instance() -> (cpdtv::Tensor3, FactorSet<f64>) {
    let c = Complex64::new;
    let a = ComplexMatrix::from_fn(3, 2, |i, r| c(0.5 * (i + 1 + r) as f64, 0.25 * (r as f64 - i as f64))).unwrap();
    let b = ComplexMatrix::from_fn(2, 2, |j, r| c(1.0 - 0.5 * j as f64, 0.5 * r as f64)).unwrap();
    let cm = ComplexMatrix::from_fn(2, 2, |k, r| c(0.3 * (k + r) as f64, 1.0 - k as f64)).unwrap();
    let y = cpdtv::Tensor3::from_fn(Dims::new(3, 2, 2).unwrap(), |i, j, k| {
        c(i as f64 - j as f64, k as f64 + 0.5 * i as f64)
    })
    .unwrap();
    (y, FactorSet::new(a, b, cm).unwrap())
}

// Values computed once with an einsum/diff evaluation in double precision.
const FROZEN_DATA: f64 = 17.799296875;
const FROZEN_TV_ECHO_SMOOTH: f64 = 5.689226020178307;
const FROZEN_TV_MOTION_SMOOTH: f64 = 12.476075954654128;
const FROZEN_TOTAL: f64 = 22.001279871984316;
const FROZEN_TV_ECHO_L1: f64 = 5.748823368288598;
const FROZEN_TV_MOTION_L1: f64 = 12.53590073303816;

#[test]
fn frozen_objective_values() {
    let (y, f) = fixed_instance();
    let cfg = Config { rank: 2, lambda_e: 0.3, lambda_t: 0.2, epsilon: Some(0.01), ..Default::default() };
    let terms = objective_terms(&y, &f, &cfg).unwrap();
    assert!(rel_close(terms.data, FROZEN_DATA, 1e-13));
    assert!(rel_close(terms.tv_echo, FROZEN_TV_ECHO_SMOOTH, 1e-13));
    assert!(rel_close(terms.tv_motion, FROZEN_TV_MOTION_SMOOTH, 1e-13));
    assert!(rel_close(terms.total, FROZEN_TOTAL, 1e-13));
    assert!(rel_close(objective_loops(&y, &f, 0.3, 0.2, 0.01), FROZEN_TOTAL, 1e-13));

    let x = cpd_synthesize(&f);
    assert!(rel_close(cpdtv::tv_echo(&x), FROZEN_TV_ECHO_L1, 1e-13));
    assert!(rel_close(cpdtv::tv_motion(&x), FROZEN_TV_MOTION_L1, 1e-13));

    let paper = Config { tv_variant: TvVariant::Paper, ..cfg };
    let want = FROZEN_DATA + 0.3 * FROZEN_TV_ECHO_L1 + 0.2 * FROZEN_TV_MOTION_L1;
    assert!(rel_close(objective(&y, &f, &paper).unwrap(), want, 1e-13));
}

#[test]
fn synthesis_matches_loops() {
    let mut g = rng(11);
    for _ in 0..20 {
        let d = random_dims(&mut g, (7, 4, 4));
        let f = random_factors(&mut g, d, 3);
        let x = cpd_synthesize(&f);
        let want = synth_loops(&f);
        for i in 0..d.n() {
            for j in 0..d.e() {
                for k in 0..d.t() {
                    assert!((x.get(i, j, k) - want[i][j][k]).norm() <= 1e-13);
                }
            }
        }
    }
}

#[test]
fn objective_matches_loops_for_random_instances() {
    let mut g = rng(12);
    for _ in 0..30 {
        let d = random_dims(&mut g, (8, 5, 5));
        let rank = 1 + (g.next_u64() % 4) as usize;
        let y = random_tensor(&mut g, d);
        let f = random_factors(&mut g, d, rank);
        let cfg = Config { rank, lambda_e: 0.4, lambda_t: 0.15, epsilon: Some(1e-3), ..Default::default() };
        let got = objective(&y, &f, &cfg).unwrap();
        assert!(rel_close(got, objective_loops(&y, &f, 0.4, 0.15, 1e-3), 1e-12));
    }
}

/// Central differences of `objective` in the real and imaginary part of
/// every entry of the `mode` factor.
fn fd_gradient(y: &cpdtv::Tensor3, f: &FactorSet<f64>, mode: Mode, cfg: &Config, h: f64) -> ComplexMatrix<f64> {
    let m = f.factor(mode);
    let mut out = ComplexMatrix::zeros(m.rows(), m.cols());
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            let part = |dir: Complex64| {
                let mut plus = f.clone();
                plus.factor_mut(mode)[(r, c)] += dir * h;
                let mut minus = f.clone();
                minus.factor_mut(mode)[(r, c)] -= dir * h;
                (objective(y, &plus, cfg).unwrap() - objective(y, &minus, cfg).unwrap()) / (2.0 * h)
            };
            out[(r, c)] = Complex64::new(part(Complex64::new(1.0, 0.0)), part(Complex64::new(0.0, 1.0)));
        }
    }
    out
}

#[test]
fn factor_gradient_matches_finite_differences() {
    let mut g = rng(13);
    for case in 0..10 {
        let d = random_dims(&mut g, (6, 4, 3));
        let rank = 1 + case % 3;
        let y = random_tensor(&mut g, d);
        let f = random_factors(&mut g, d, rank);
        let cfg = Config { rank, lambda_e: 0.1, lambda_t: 0.1, epsilon: Some(1e-2), ..Default::default() };
        for mode in Mode::ALL {
            let got = factor_gradient(&y, &f, mode, &cfg).unwrap();
            let want = fd_gradient(&y, &f, mode, &cfg, 1e-6);
            let err = got.sub(&want).unwrap().norm() / want.norm().max(1e-300);
            assert!(err <= 1e-6, "case {case} mode {mode:?}: rel err {err:e}");
        }
    }
}

#[test]
fn tv_gradient_matches_finite_differences() {
    let mut g = rng(14);
    let d = Dims::new(4, 4, 3).unwrap();
    let x = random_tensor(&mut g, d);
    let eps = 0.05;
    let h = 1e-6;
    for axis in [TvAxis::Echo, TvAxis::Motion] {
        let grad = tv_gradient(&x, axis, TvVariant::SmoothedL1, eps);
        for (idx, &gz) in grad.data().iter().enumerate() {
            let (i, rest) = (idx % d.n(), idx / d.n());
            let (j, k) = (rest % d.e(), rest / d.e());
            let mut fd = [0.0; 2];
            for (slot, dir) in [Complex64::new(h, 0.0), Complex64::new(0.0, h)].into_iter().enumerate() {
                let bump = |s: f64| {
                    cpdtv::Tensor3::from_fn(d, |a, b, c| {
                        let v = x.get(a, b, c);
                        if (a, b, c) == (i, j, k) { v + dir * s } else { v }
                    })
                    .unwrap()
                };
                fd[slot] = (tv_smoothed(&bump(1.0), axis, eps) - tv_smoothed(&bump(-1.0), axis, eps)) / (2.0 * h);
            }
            assert!((gz.re - fd[0]).abs() <= 1e-7 && (gz.im - fd[1]).abs() <= 1e-7, "{axis:?} at {idx}");
        }
    }
}
