use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::ComplexTensor3;
use crate::tv::TvVariant;

/// Step-size rule for each factor update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepPolicy<T> {
    /// Plain gradient step with a constant `alpha`.
    Fixed { alpha: T },
    /// Armijo backtracking. `alpha0` is relative: the first trial of each
    /// update is `alpha0 · ‖g‖² / ‖D‖²`, the exact minimizer of the data
    /// term along the gradient `g` (`D` is the resulting change in `X`).
    Backtracking { alpha0: T, shrink: T, armijo_c: T },
}

impl<T: Real> StepPolicy<T> {
    pub fn backtracking() -> Self {
        StepPolicy::Backtracking {
            alpha0: T::one(),
            shrink: T::lit(0.5),
            armijo_c: T::lit(1e-4),
        }
    }
}

/// How the factor matrices are seeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum InitStrategy {
    #[default]
    SeededRandom,
    SvdLeading,
}

/// Solver settings. See [`SolverConfig::default`] for the defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    pub rank: usize,
    pub lambda_e: T,
    pub lambda_t: T,
    pub tv_variant: TvVariant,
    /// Smoothing for the `SmoothedL1` variant; `None` means
    /// `1e-8 × mean |Y|`, resolved against the data at solve time.
    pub epsilon: Option<T>,
    pub step_policy: StepPolicy<T>,
    pub max_outer_iters: usize,
    pub rel_tol: T,
    pub n_restarts: usize,
    pub seed: u64,
    pub init: InitStrategy,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            rank: 13,
            lambda_e: T::zero(),
            lambda_t: T::zero(),
            tv_variant: TvVariant::SmoothedL1,
            epsilon: None,
            step_policy: StepPolicy::backtracking(),
            max_outer_iters: 500,
            rel_tol: T::lit(1e-6),
            n_restarts: 1,
            seed: 0,
            init: InitStrategy::SeededRandom,
        }
    }
}

/// Relative smoothing applied when `epsilon` is left unset.
pub const EPSILON_DATA_SCALE: f64 = 1e-8;

/// Hard cap on backtracking shrinks before a zero step is accepted.
pub const MAX_SHRINKS: usize = 30;

impl<T: Real> SolverConfig<T> {
    pub fn with_rank(rank: usize) -> Self {
        SolverConfig {
            rank,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::arg("rank must be at least 1"));
        }
        let nonneg = |v: T| v.is_finite() && v >= T::zero();
        if !nonneg(self.lambda_e) || !nonneg(self.lambda_t) {
            return Err(Error::arg("regularization weights must be finite and nonnegative"));
        }
        if let Some(eps) = self.epsilon {
            if !(eps.is_finite() && eps > T::zero()) {
                return Err(Error::arg("epsilon must be positive"));
            }
        }
        if self.max_outer_iters == 0 {
            return Err(Error::arg("max_outer_iters must be at least 1"));
        }
        if !(self.rel_tol.is_finite() && self.rel_tol > T::zero()) {
            return Err(Error::arg("rel_tol must be positive"));
        }
        if self.n_restarts == 0 {
            return Err(Error::arg("n_restarts must be at least 1"));
        }
        match self.step_policy {
            StepPolicy::Fixed { alpha } => {
                if !(alpha.is_finite() && alpha > T::zero()) {
                    return Err(Error::arg("fixed step must be positive"));
                }
            }
            StepPolicy::Backtracking { alpha0, shrink, armijo_c } => {
                if !(alpha0.is_finite() && alpha0 > T::zero()) {
                    return Err(Error::arg("alpha0 must be positive"));
                }
                if !(shrink > T::zero() && shrink < T::one()) {
                    return Err(Error::arg("shrink must lie in (0, 1)"));
                }
                if !(armijo_c > T::zero() && armijo_c < T::one()) {
                    return Err(Error::arg("armijo_c must lie in (0, 1)"));
                }
            }
        }
        Ok(())
    }

    /// Smoothing parameter for `y`: the explicit value, else the data-scaled
    /// default (falling back to the bare scale factor for an all-zero `y`).
    pub fn resolved_epsilon(&self, y: &ComplexTensor3<T>) -> T {
        self.epsilon.unwrap_or_else(|| {
            let scale = T::lit(EPSILON_DATA_SCALE);
            let eps = scale * y.mean_modulus();
            if eps > T::zero() {
                eps
            } else {
                scale
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Dims;
    use num_complex::Complex;

    #[test]
    fn defaults_are_valid() {
        let cfg = SolverConfig::<f64>::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.rank, 13);
        assert_eq!(cfg.max_outer_iters, 500);
        assert_eq!(cfg.tv_variant, TvVariant::SmoothedL1);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            SolverConfig { rank: 0, ..SolverConfig::<f64>::default() },
            SolverConfig { lambda_e: -1.0, ..Default::default() },
            SolverConfig { epsilon: Some(0.0), ..Default::default() },
            SolverConfig { max_outer_iters: 0, ..Default::default() },
            SolverConfig { n_restarts: 0, ..Default::default() },
            SolverConfig { step_policy: StepPolicy::Fixed { alpha: 0.0 }, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn epsilon_tracks_data_scale() {
        let d = Dims::new(2, 2, 1).unwrap();
        let y = ComplexTensor3::new(d, vec![Complex::new(3.0, 4.0); 4]).unwrap();
        let cfg = SolverConfig::<f64>::default();
        assert!((cfg.resolved_epsilon(&y) - 5e-8).abs() < 1e-20);
        let zero = ComplexTensor3::zeros(d);
        assert_eq!(cfg.resolved_epsilon(&zero), EPSILON_DATA_SCALE);
    }
}
