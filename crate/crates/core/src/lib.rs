//! TV-regularized CANDECOMP/PARAFAC decomposition (CPD-TV) of complex
//! 3-way tensors indexed `(space, echo, motion state)`.
//!
//! A tensor `Y` is approximated by `X = Σ_r a_r ∘ b_r ∘ c_r` minimizing
//! `½‖Y − X‖² + λe·TVe(X) + λt·TVt(X)` with alternating gradient descent on
//! the factor matrices `A`, `B`, `C`. The crate also ships a synthetic
//! multi-echo phantom with retrospective k-space undersampling, metrics,
//! and the CT3 file format used by the `cpdtv` command-line tool.
//!
//! Every numerical type is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which the solver is tuned for.
//!
//! ```
//! use cpdtv::{solve_cpdtv, Dims, SolverConfig, Tensor3};
//! use num_complex::Complex;
//!
//! let y = Tensor3::from_fn(Dims::new(8, 3, 2).unwrap(), |i, j, k| {
//!     Complex::new((i + 1) as f64, 0.0) * Complex::new(1.0, j as f64) * (k + 1) as f64
//! })
//! .unwrap();
//! let sol = solve_cpdtv(&y, &SolverConfig { rank: 1, ..Default::default() }).unwrap();
//! assert!(sol.diagnostics.final_objective() < 1e-6);
//! ```

pub mod config;
pub mod error;
pub mod init;
pub mod io;
pub mod metrics;
pub mod objective;
pub mod phantom;
pub mod scalar;
pub mod solver;
pub mod tensor;
pub mod tv;

pub use config::{InitStrategy, SolverConfig, StepPolicy};
pub use error::{Error, Result};
pub use init::{initialize_factors, normalize_factors};
pub use io::{export_slice, read_ct3, read_sidecar, write_ct3, write_sidecar, Sidecar, Window};
pub use metrics::{nrmse, psnr, rank_sweep, SweepResult, SweepRow};
pub use objective::{factor_gradient, objective, objective_terms, ObjectiveTerms};
pub use phantom::{generate_phantom, inject_undersampling, Ellipse, Grid, PhantomConfig};
pub use scalar::Real;
pub use solver::{solve_cpdtv, Diagnostics, Solution, Termination};
pub use tensor::{cpd_synthesize, fold, frobenius_norm, khatri_rao, unfold, ComplexMatrix, ComplexTensor3, Dims, FactorSet, Mode};
pub use tv::{tv_echo, tv_gradient, tv_motion, TvAxis, TvVariant};

/// Double-precision tensor.
pub type Tensor3 = ComplexTensor3<f64>;
/// Double-precision matrix.
pub type Matrix = ComplexMatrix<f64>;
/// Double-precision factor set.
pub type Factors = FactorSet<f64>;
/// Double-precision solver configuration.
pub type Config = SolverConfig<f64>;
/// Single-precision tensor, matching the CT3 storage precision.
pub type Tensor3f32 = ComplexTensor3<f32>;
