//! Reference implementations shared by the integration tests. Everything
//! here is written with plain index loops and touches none of the library's
//! kernels beyond constructors and accessors.
#![allow(dead_code, clippy::needless_range_loop)]

use cpdtv::{ComplexMatrix, ComplexTensor3, Dims, FactorSet};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cnum(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_tensor(rng: &mut impl Rng, d: Dims) -> ComplexTensor3<f64> {
    ComplexTensor3::from_fn(d, |_, _, _| cnum(rng)).unwrap()
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix<f64> {
    ComplexMatrix::from_fn(rows, cols, |_, _| cnum(rng)).unwrap()
}

pub fn random_factors(rng: &mut impl Rng, d: Dims, rank: usize) -> FactorSet<f64> {
    let a = random_matrix(rng, d.n(), rank);
    let b = random_matrix(rng, d.e(), rank);
    let c = random_matrix(rng, d.t(), rank);
    FactorSet::new(a, b, c).unwrap()
}

pub fn random_dims(rng: &mut impl Rng, max: (usize, usize, usize)) -> Dims {
    Dims::new(rng.random_range(1..=max.0), rng.random_range(1..=max.1), rng.random_range(1..=max.2)).unwrap()
}

/// `X(i,j,k) = Σ_r A(i,r)·B(j,r)·C(k,r)`, as nested arrays `[i][j][k]`.
pub fn synth_loops(f: &FactorSet<f64>) -> Vec<Vec<Vec<Complex64>>> {
    let d = f.dims();
    let mut x = vec![vec![vec![Complex64::new(0.0, 0.0); d.t()]; d.e()]; d.n()];
    for (i, xi) in x.iter_mut().enumerate() {
        for (j, xij) in xi.iter_mut().enumerate() {
            for (k, v) in xij.iter_mut().enumerate() {
                for r in 0..f.rank() {
                    *v += f.a()[(i, r)] * f.b()[(j, r)] * f.c()[(k, r)];
                }
            }
        }
    }
    x
}

fn smoothed(z: Complex64, eps: f64) -> f64 {
    (z.norm_sqr() + eps * eps).sqrt() - eps
}

/// `½‖X − Y‖² + λe·TVe + λt·TVt` with smoothed TV, by direct enumeration.
pub fn objective_loops(y: &ComplexTensor3<f64>, f: &FactorSet<f64>, lambda_e: f64, lambda_t: f64, eps: f64) -> f64 {
    let x = synth_loops(f);
    let d = y.dims();
    let (mut data, mut tve, mut tvt) = (0.0, 0.0, 0.0);
    for i in 0..d.n() {
        for j in 0..d.e() {
            for k in 0..d.t() {
                data += (x[i][j][k] - y.get(i, j, k)).norm_sqr();
                if j + 1 < d.e() {
                    tve += smoothed(x[i][j + 1][k] - x[i][j][k], eps);
                }
                if k + 1 < d.t() {
                    tvt += smoothed(x[i][j][k + 1] - x[i][j][k], eps);
                }
            }
        }
    }
    0.5 * data + lambda_e * tve + lambda_t * tvt
}

/// Matrix product by the textbook triple loop.
pub fn matmul_loops(p: &ComplexMatrix<f64>, q: &ComplexMatrix<f64>) -> Vec<Vec<Complex64>> {
    let mut out = vec![vec![Complex64::new(0.0, 0.0); q.cols()]; p.rows()];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            for s in 0..p.cols() {
                *v += p[(r, s)] * q[(s, c)];
            }
        }
    }
    out
}

pub fn rel_close(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol * want.abs().max(f64::MIN_POSITIVE)
}
