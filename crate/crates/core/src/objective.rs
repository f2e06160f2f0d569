//! The CPD-TV objective `½‖Y − X‖² + λe·TVe(X) + λt·TVt(X)` with
//! `X = Σ_r a_r ∘ b_r ∘ c_r`, and its gradients with respect to each factor.
//!
//! Gradients are packed as `∂f/∂Re + i·∂f/∂Im`, so a descent step is
//! `factor ← factor − α·gradient`.

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::{cpd_synthesize, mttkrp_conj, sum_sq, ComplexMatrix, ComplexTensor3, FactorSet, Mode};
use crate::tv::{add_tv_gradient, tv_value, TvAxis, TvVariant};

/// Individual terms of the objective at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerms<T> {
    /// `½‖Y − X‖²`
    pub data: T,
    /// Unweighted echo TV (smoothed when the variant is smoothed).
    pub tv_echo: T,
    pub tv_motion: T,
    pub total: T,
}

/// Objective bound to one data tensor and one set of weights.
#[derive(Debug, Clone)]
pub(crate) struct Problem<'a, T> {
    pub y: &'a ComplexTensor3<T>,
    pub lambda_e: T,
    pub lambda_t: T,
    pub variant: TvVariant,
    pub eps: T,
}

impl<'a, T: Real> Problem<'a, T> {
    pub fn new(y: &'a ComplexTensor3<T>, cfg: &SolverConfig<T>) -> Result<Self> {
        cfg.validate()?;
        Ok(Problem {
            y,
            lambda_e: cfg.lambda_e,
            lambda_t: cfg.lambda_t,
            variant: cfg.tv_variant,
            eps: cfg.resolved_epsilon(y),
        })
    }

    pub fn check(&self, f: &FactorSet<T>) -> Result<()> {
        if f.dims() != self.y.dims() {
            return Err(Error::dims(format!(
                "factors describe {} but data is {}",
                f.dims(),
                self.y.dims()
            )));
        }
        Ok(())
    }

    pub fn terms_at(&self, x: &ComplexTensor3<T>) -> ObjectiveTerms<T> {
        let data = self
            .y
            .data()
            .iter()
            .zip(x.data())
            .map(|(y, x)| (y - x).norm_sqr())
            .sum::<T>()
            * T::lit(0.5);
        let tv = |axis, weight: T| {
            if weight.is_zero() {
                T::zero()
            } else {
                tv_value(x, axis, self.variant, self.eps)
            }
        };
        let tv_echo = tv(TvAxis::Echo, self.lambda_e);
        let tv_motion = tv(TvAxis::Motion, self.lambda_t);
        ObjectiveTerms {
            data,
            tv_echo,
            tv_motion,
            total: data + self.lambda_e * tv_echo + self.lambda_t * tv_motion,
        }
    }

    #[inline]
    pub fn value_at(&self, x: &ComplexTensor3<T>) -> T {
        self.terms_at(x).total
    }

    /// Tensor-domain gradient `X − Y + λe·∇TVe(X) + λt·∇TVt(X)`.
    pub fn tensor_gradient(&self, x: &ComplexTensor3<T>) -> ComplexTensor3<T> {
        let mut w = x.sub(self.y).expect("dims checked by caller");
        add_tv_gradient(x, TvAxis::Echo, self.variant, self.eps, self.lambda_e, &mut w);
        add_tv_gradient(x, TvAxis::Motion, self.variant, self.eps, self.lambda_t, &mut w);
        w
    }

    /// Factor gradient at `f`, where `x` is `cpd_synthesize(f)`.
    pub fn gradient_at(&self, f: &FactorSet<T>, x: &ComplexTensor3<T>, mode: Mode) -> ComplexMatrix<T> {
        mttkrp_conj(&self.tensor_gradient(x), f, mode)
    }
}

/// Evaluates the objective at `f`.
pub fn objective<T: Real>(y: &ComplexTensor3<T>, f: &FactorSet<T>, cfg: &SolverConfig<T>) -> Result<T> {
    objective_terms(y, f, cfg).map(|t| t.total)
}

/// Evaluates the objective at `f`, returning each term.
pub fn objective_terms<T: Real>(
    y: &ComplexTensor3<T>,
    f: &FactorSet<T>,
    cfg: &SolverConfig<T>,
) -> Result<ObjectiveTerms<T>> {
    let p = Problem::new(y, cfg)?;
    p.check(f)?;
    Ok(p.terms_at(&cpd_synthesize(f)))
}

/// Gradient of the objective with respect to the factor of `mode`, the
/// other two held fixed. For mode 1 this is
/// `unfold(X − Y + G_tv, 1) · conj(C ⊙ B)`; modes 2 and 3 use `C ⊙ A` and
/// `B ⊙ A`.
pub fn factor_gradient<T: Real>(
    y: &ComplexTensor3<T>,
    f: &FactorSet<T>,
    mode: Mode,
    cfg: &SolverConfig<T>,
) -> Result<ComplexMatrix<T>> {
    let p = Problem::new(y, cfg)?;
    p.check(f)?;
    Ok(p.gradient_at(f, &cpd_synthesize(f), mode))
}

/// `½‖Y − X‖²` for an explicit estimate.
pub fn data_misfit<T: Real>(y: &ComplexTensor3<T>, x: &ComplexTensor3<T>) -> Result<T> {
    Ok(sum_sq(y.sub(x)?.data()) * T::lit(0.5))
}
