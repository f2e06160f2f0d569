//! Total variation along the echo and motion axes, and its gradients.
//!
//! Differences are forward and non-circular: along echoes there are `E − 1`
//! difference slices, along motion states `T − 1`. The adjoint of the
//! forward difference is the negative divergence with zero-flux boundaries.

use num_complex::Complex;
use num_traits::Zero;

use crate::scalar::Real;
use crate::tensor::ComplexTensor3;

/// Axis a TV term acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TvAxis {
    Echo,
    Motion,
}

/// Which regularizer gradient the solver uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TvVariant {
    /// Normalized Laplacian `∇ᴴ∇X / ‖∇X‖₁`, paired with the plain L1 TV in
    /// the objective.
    Paper,
    /// Exact gradient of `Σ sqrt(|∇X|² + ε²) − ε`.
    #[default]
    SmoothedL1,
}

/// Visits every forward-difference pair `(lower, upper)` of spatial fibers
/// along `axis`, in a fixed order.
fn for_each_pair<T: Real>(
    x: &ComplexTensor3<T>,
    axis: TvAxis,
    mut visit: impl FnMut((usize, usize), (usize, usize)),
) {
    let d = x.dims();
    match axis {
        TvAxis::Echo => {
            for k in 0..d.t() {
                for j in 0..d.e().saturating_sub(1) {
                    visit((j, k), (j + 1, k));
                }
            }
        }
        TvAxis::Motion => {
            for k in 0..d.t().saturating_sub(1) {
                for j in 0..d.e() {
                    visit((j, k), (j, k + 1));
                }
            }
        }
    }
}

/// Sum of `penalty(∇X)` over all difference entries.
fn sum_over_diffs<T: Real>(x: &ComplexTensor3<T>, axis: TvAxis, penalty: impl Fn(Complex<T>) -> T) -> T {
    let mut total = T::zero();
    for_each_pair(x, axis, |(j0, k0), (j1, k1)| {
        total += x
            .fiber(j1, k1)
            .iter()
            .zip(x.fiber(j0, k0))
            .map(|(&hi, &lo)| penalty(hi - lo))
            .sum::<T>();
    });
    total
}

/// Number of entries in `∇X` along `axis`.
pub fn diff_count<T: Real>(x: &ComplexTensor3<T>, axis: TvAxis) -> usize {
    let d = x.dims();
    match axis {
        TvAxis::Echo => d.n() * (d.e() - 1) * d.t(),
        TvAxis::Motion => d.n() * d.e() * (d.t() - 1),
    }
}

/// L1 total variation along `axis`: `Σ |∇X|` with the complex modulus.
pub fn tv_l1<T: Real>(x: &ComplexTensor3<T>, axis: TvAxis) -> T {
    sum_over_diffs(x, axis, |z| z.norm())
}

/// L1 total variation along the echo axis. Zero when `E = 1`.
pub fn tv_echo<T: Real>(x: &ComplexTensor3<T>) -> T {
    tv_l1(x, TvAxis::Echo)
}

/// L1 total variation along the motion axis. Zero when `T = 1`.
pub fn tv_motion<T: Real>(x: &ComplexTensor3<T>) -> T {
    tv_l1(x, TvAxis::Motion)
}

/// Smoothed TV `Σ (sqrt(|∇X|² + ε²) − ε)`.
pub fn tv_smoothed<T: Real>(x: &ComplexTensor3<T>, axis: TvAxis, eps: T) -> T {
    let eps2 = eps * eps;
    sum_over_diffs(x, axis, |z| {
        let m2 = z.norm_sqr();
        // sqrt(m² + ε²) − ε, rewritten to avoid cancellation for |z| ≪ ε.
        m2 / ((m2 + eps2).sqrt() + eps)
    })
}

/// TV value consistent with `variant`: L1 for `Paper`, smoothed otherwise.
pub fn tv_value<T: Real>(x: &ComplexTensor3<T>, axis: TvAxis, variant: TvVariant, eps: T) -> T {
    match variant {
        TvVariant::Paper => tv_l1(x, axis),
        TvVariant::SmoothedL1 => tv_smoothed(x, axis, eps),
    }
}

/// Applies `∇ᴴ` to `phi(∇X)` entrywise, writing into `out` (accumulated).
fn adjoint_of_mapped_diffs<T: Real>(
    x: &ComplexTensor3<T>,
    axis: TvAxis,
    out: &mut ComplexTensor3<T>,
    phi: impl Fn(Complex<T>) -> Complex<T>,
) {
    let d = x.dims();
    let n = d.n();
    let mut buf = vec![Complex::zero(); n];
    let data = x.data();
    let mut pairs = Vec::new();
    for_each_pair(x, axis, |lo, hi| pairs.push((lo, hi)));
    let out_data = out.data_mut();
    for ((j0, k0), (j1, k1)) in pairs {
        let lo = d.offset(0, j0, k0);
        let hi = d.offset(0, j1, k1);
        for (i, b) in buf.iter_mut().enumerate() {
            *b = phi(data[hi + i] - data[lo + i]);
        }
        // (∇ᴴ D)(lo) −= D, (∇ᴴ D)(hi) += D
        for (i, &b) in buf.iter().enumerate() {
            out_data[lo + i] -= b;
            out_data[hi + i] += b;
        }
    }
}

/// Gradient of the TV term along `axis`, packed as `∂/∂Re + i·∂/∂Im`.
///
/// `Paper` returns `∇ᴴ∇X / ‖∇X‖₁`, or zeros when `‖∇X‖₁ = 0`.
/// `SmoothedL1` returns `∇ᴴ(∇X / sqrt(|∇X|² + ε²))`.
pub fn tv_gradient<T: Real>(x: &ComplexTensor3<T>, axis: TvAxis, variant: TvVariant, eps: T) -> ComplexTensor3<T> {
    let mut out = ComplexTensor3::zeros(x.dims());
    add_tv_gradient(x, axis, variant, eps, T::one(), &mut out);
    out
}

/// `out += weight · tv_gradient(x, axis, variant, eps)`.
pub(crate) fn add_tv_gradient<T: Real>(
    x: &ComplexTensor3<T>,
    axis: TvAxis,
    variant: TvVariant,
    eps: T,
    weight: T,
    out: &mut ComplexTensor3<T>,
) {
    if weight.is_zero() || diff_count(x, axis) == 0 {
        return;
    }
    match variant {
        TvVariant::Paper => {
            let l1 = tv_l1(x, axis);
            if l1.is_zero() {
                return;
            }
            let s = weight / l1;
            adjoint_of_mapped_diffs(x, axis, out, |z| z * s);
        }
        TvVariant::SmoothedL1 => {
            let eps2 = eps * eps;
            adjoint_of_mapped_diffs(x, axis, out, |z| z * (weight / (z.norm_sqr() + eps2).sqrt()));
        }
    }
}
