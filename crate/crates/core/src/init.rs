//! Factor initialization and column normalization.

use nalgebra::DMatrix;
use num_complex::Complex;
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::InitStrategy;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::{cpd_synthesize, frobenius_norm, mttkrp_conj, unfold, ComplexMatrix, ComplexTensor3, FactorSet, Mode};

/// Mixes a seed so that nearby seeds give unrelated streams.
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn random_matrix<T: Real>(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix<T> {
    // Complex standard normal: E|z|² = 1.
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let data = (0..rows * cols)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex::new(T::lit(re * half), T::lit(im * half))
        })
        .collect();
    ComplexMatrix::from_raw(rows, cols, data)
}

fn normalize_columns<T: Real>(m: &mut ComplexMatrix<T>) {
    for c in 0..m.cols() {
        let n = m.col_norm(c);
        if n > T::zero() {
            m.col_mut(c).iter_mut().for_each(|z| *z /= n);
        }
    }
}

/// Builds a starting point for the solver. Deterministic in
/// `(y, rank, strategy, seed)`.
///
/// `SeededRandom` draws complex standard normal entries, normalizes every
/// column, then rescales `C` so that `‖synthesize(F)‖ = ‖Y‖`.
/// `SvdLeading` uses the leading left singular vectors of each unfolding
/// (random columns past the unfolding's rank) and fits each component's
/// scale to `Y` by projection.
pub fn initialize_factors<T: Real>(
    y: &ComplexTensor3<T>,
    rank: usize,
    strategy: InitStrategy,
    seed: u64,
) -> Result<FactorSet<T>> {
    if rank == 0 {
        return Err(Error::arg("rank must be at least 1"));
    }
    let d = y.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = random_matrix(&mut rng, d.n(), rank);
    let mut b = random_matrix(&mut rng, d.e(), rank);
    let mut c = random_matrix(&mut rng, d.t(), rank);

    match strategy {
        InitStrategy::SeededRandom => {
            for m in [&mut a, &mut b, &mut c] {
                normalize_columns(m);
            }
            let mut f = FactorSet::new(a, b, c)?;
            let target = frobenius_norm(y);
            let current = frobenius_norm(&cpd_synthesize(&f));
            if current > T::zero() {
                let s = target / current;
                f.factor_mut(Mode::Motion)
                    .data_mut()
                    .iter_mut()
                    .for_each(|z| *z *= s);
            }
            Ok(f)
        }
        InitStrategy::SvdLeading => {
            for (mode, m) in [(Mode::Space, &mut a), (Mode::Echo, &mut b), (Mode::Motion, &mut c)] {
                let u = leading_left_singular_vectors(&unfold(y, mode), rank);
                for (col, v) in u.iter().enumerate() {
                    m.col_mut(col).copy_from_slice(v);
                }
                normalize_columns(m);
            }
            let mut f = FactorSet::new(a, b, c)?;
            fit_component_scales(y, &mut f);
            Ok(f)
        }
    }
}

/// Up to `count` leading left singular vectors of `m`, strongest first.
fn leading_left_singular_vectors<T: Real>(m: &ComplexMatrix<T>, count: usize) -> Vec<Vec<Complex<T>>> {
    let mat = DMatrix::<Complex<f64>>::from_fn(m.rows(), m.cols(), |r, c| {
        let z = m[(r, c)];
        Complex::new(z.re.as_f64(), z.im.as_f64())
    });
    let svd = mat.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    order
        .into_iter()
        .take(count)
        .filter(|&i| svd.singular_values[i] > 0.0)
        .map(|i| {
            u.column(i)
                .iter()
                .map(|z| Complex::new(T::lit(z.re), T::lit(z.im)))
                .collect()
        })
        .collect()
}

/// Scales each `c_r` by the least-squares coefficient of its rank-1 term
/// against `y`, ignoring cross-terms.
fn fit_component_scales<T: Real>(y: &ComplexTensor3<T>, f: &mut FactorSet<T>) {
    let m = mttkrp_conj(y, f, Mode::Motion);
    for r in 0..f.rank() {
        let energy = f.a().col_norm(r).powi(2) * f.b().col_norm(r).powi(2) * f.c().col_norm(r).powi(2);
        if energy.is_zero() {
            continue;
        }
        let inner = (0..f.c().rows())
            .map(|k| f.c()[(k, r)].conj() * m[(k, r)])
            .fold(Complex::zero(), |acc, z| acc + z);
        let s = inner / energy;
        f.factor_mut(Mode::Motion)
            .col_mut(r)
            .iter_mut()
            .for_each(|z| *z *= s);
    }
}

/// Rescales each component so `a_r` and `b_r` have unit 2-norm, absorbing
/// the scale into `c_r`. Components whose `a_r` or `b_r` is zero are left
/// untouched.
pub fn normalize_factors<T: Real>(f: &FactorSet<T>) -> FactorSet<T> {
    let mut out = f.clone();
    for r in 0..f.rank() {
        let na = f.a().col_norm(r);
        let nb = f.b().col_norm(r);
        if na.is_zero() || nb.is_zero() {
            continue;
        }
        let (ia, ib, s) = (na.recip(), nb.recip(), na * nb);
        out.factor_mut(Mode::Space).col_mut(r).iter_mut().for_each(|z| *z *= ia);
        out.factor_mut(Mode::Echo).col_mut(r).iter_mut().for_each(|z| *z *= ib);
        out.factor_mut(Mode::Motion).col_mut(r).iter_mut().for_each(|z| *z *= s);
    }
    out
}
