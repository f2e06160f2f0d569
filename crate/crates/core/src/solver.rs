//! Alternating gradient descent for CPD-TV.
//!
//! Each outer round updates `A`, `B`, `C` in turn with one gradient step
//! and renormalizes the factors after every step. Restarts run from
//! independent initializations; the one with the lowest final objective is
//! returned.

use num_complex::Complex;

use crate::config::{InitStrategy, SolverConfig, StepPolicy, MAX_SHRINKS};
use crate::error::{Error, Result};
use crate::init::{initialize_factors, normalize_factors, splitmix64};
use crate::objective::Problem;
use crate::scalar::Real;
use crate::tensor::{cpd_synthesize, sum_sq, ComplexMatrix, ComplexTensor3, FactorSet, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    /// Relative objective change over one round fell below `rel_tol`.
    Converged,
    MaxIters,
    /// Every factor update in a round accepted a zero step.
    Stalled,
}

/// Convergence record for the returned restart.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics<T> {
    /// Objective after each completed outer round.
    pub objective_trace: Vec<T>,
    /// Accepted step for every factor update (three per round, A/B/C order).
    pub step_trace: Vec<T>,
    /// Objective at the initialization of the returned restart.
    pub initial_objective: T,
    pub termination: Termination,
    pub iterations: usize,
    pub best_restart: usize,
    /// Final objective of every restart, in restart order.
    pub restart_objectives: Vec<T>,
    /// Outer rounds summed over all restarts.
    pub total_iterations: usize,
}

impl<T: Real> Diagnostics<T> {
    pub fn final_objective(&self) -> T {
        self.objective_trace.last().copied().unwrap_or(self.initial_objective)
    }
}

#[derive(Debug, Clone)]
pub struct Solution<T> {
    pub factors: FactorSet<T>,
    /// `cpd_synthesize(factors)`
    pub estimate: ComplexTensor3<T>,
    pub diagnostics: Diagnostics<T>,
}

struct RestartOutcome<T> {
    factors: FactorSet<T>,
    objective_trace: Vec<T>,
    step_trace: Vec<T>,
    initial_objective: T,
    termination: Termination,
    iterations: usize,
}

/// Seed used for restart `index`.
pub fn restart_seed(seed: u64, index: usize) -> u64 {
    if index == 0 {
        seed
    } else {
        splitmix64(seed ^ splitmix64(index as u64))
    }
}

/// Fits a rank-`cfg.rank` CPD-TV model to `y`.
pub fn solve_cpdtv<T: Real>(y: &ComplexTensor3<T>, cfg: &SolverConfig<T>) -> Result<Solution<T>> {
    let problem = Problem::new(y, cfg)?;
    let mut best: Option<(usize, RestartOutcome<T>)> = None;
    let mut restart_objectives = Vec::with_capacity(cfg.n_restarts);
    let mut total_iterations = 0;

    for restart in 0..cfg.n_restarts {
        // Only the first restart can use the deterministic SVD start.
        let strategy = if restart == 0 { cfg.init } else { InitStrategy::SeededRandom };
        let init = initialize_factors(y, cfg.rank, strategy, restart_seed(cfg.seed, restart))?;
        let outcome = run_restart(&problem, cfg, normalize_factors(&init), restart)?;
        let final_obj = outcome
            .objective_trace
            .last()
            .copied()
            .unwrap_or(outcome.initial_objective);
        total_iterations += outcome.iterations;
        restart_objectives.push(final_obj);
        let better = match &best {
            None => true,
            Some((i, _)) => final_obj < restart_objectives[*i],
        };
        if better {
            best = Some((restart, outcome));
        }
    }

    let (best_restart, outcome) = best.expect("at least one restart");
    let estimate = cpd_synthesize(&outcome.factors);
    Ok(Solution {
        factors: outcome.factors,
        estimate,
        diagnostics: Diagnostics {
            objective_trace: outcome.objective_trace,
            step_trace: outcome.step_trace,
            initial_objective: outcome.initial_objective,
            termination: outcome.termination,
            iterations: outcome.iterations,
            best_restart,
            restart_objectives,
            total_iterations,
        },
    })
}

fn replace_factor<T: Real>(f: &FactorSet<T>, mode: Mode, m: ComplexMatrix<T>) -> FactorSet<T> {
    let mut out = f.clone();
    out.set_factor(mode, m).expect("same shape");
    out
}

fn axpy_factor<T: Real>(f: &ComplexMatrix<T>, alpha: T, g: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    let data = f.data().iter().zip(g.data()).map(|(&a, &d)| a - d * alpha).collect();
    ComplexMatrix::from_raw(f.rows(), f.cols(), data)
}

fn axpy_tensor<T: Real>(x: &ComplexTensor3<T>, alpha: T, d: &ComplexTensor3<T>) -> ComplexTensor3<T> {
    let data: Vec<Complex<T>> = x.data().iter().zip(d.data()).map(|(&a, &b)| a - b * alpha).collect();
    ComplexTensor3::from_raw(x.dims(), data)
}

fn run_restart<T: Real>(
    p: &Problem<'_, T>,
    cfg: &SolverConfig<T>,
    mut factors: FactorSet<T>,
    restart: usize,
) -> Result<RestartOutcome<T>> {
    let fail = |iteration| Error::NumericalFailure { iteration, restart };

    let mut x = cpd_synthesize(&factors);
    let mut current = p.value_at(&x);
    if !current.is_finite() {
        return Err(fail(0));
    }
    let initial_objective = current;
    let mut objective_trace = Vec::new();
    let mut step_trace = Vec::new();
    let mut termination = Termination::MaxIters;
    let mut iterations = 0;

    for iter in 1..=cfg.max_outer_iters {
        let previous = current;
        let mut moved = false;

        for mode in Mode::ALL {
            let grad = p.gradient_at(&factors, &x, mode);
            let gnorm2 = sum_sq(grad.data());

            let (alpha, new_factor, new_x, value) = match cfg.step_policy {
                StepPolicy::Fixed { alpha } => {
                    let nf = axpy_factor(factors.factor(mode), alpha, &grad);
                    let trial = replace_factor(&factors, mode, nf.clone());
                    let tx = cpd_synthesize(&trial);
                    let v = p.value_at(&tx);
                    if !v.is_finite() {
                        return Err(fail(iter));
                    }
                    (alpha, nf, tx, v)
                }
                StepPolicy::Backtracking { alpha0, shrink, armijo_c } => {
                    if gnorm2.is_zero() {
                        (T::zero(), factors.factor(mode).clone(), x.clone(), current)
                    } else {
                        // X is linear in the updated factor, so the trial
                        // estimate is X − α·synth(grad, others).
                        let direction = cpd_synthesize(&replace_factor(&factors, mode, grad.clone()));
                        // Exact minimizer of the data term along the gradient;
                        // the TV terms are handled by backtracking.
                        let curvature = sum_sq(direction.data());
                        let model_step = if curvature > T::zero() { gnorm2 / curvature } else { T::one() };
                        let mut alpha = alpha0 * model_step;
                        let mut accepted = None;
                        for _ in 0..=MAX_SHRINKS {
                            let tx = axpy_tensor(&x, alpha, &direction);
                            let v = p.value_at(&tx);
                            if v.is_finite() && v <= current - armijo_c * alpha * gnorm2 {
                                accepted = Some((alpha, tx, v));
                                break;
                            }
                            alpha *= shrink;
                        }
                        match accepted {
                            Some((a, tx, v)) => (a, axpy_factor(factors.factor(mode), a, &grad), tx, v),
                            None => (T::zero(), factors.factor(mode).clone(), x.clone(), current),
                        }
                    }
                }
            };

            step_trace.push(alpha);
            if alpha.is_zero() {
                continue;
            }
            moved = true;

            let stepped = replace_factor(&factors, mode, new_factor);
            let normalized = normalize_factors(&stepped);
            let nx = cpd_synthesize(&normalized);
            let nv = p.value_at(&nx);
            // Rescaling is exact in real arithmetic; keep whichever rounding is lower.
            if nv.is_finite() && nv <= value {
                factors = normalized;
                x = nx;
                current = nv;
            } else {
                factors = stepped;
                x = new_x;
                current = value;
            }
            if !current.is_finite() {
                return Err(fail(iter));
            }
        }

        iterations = iter;
        objective_trace.push(current);

        if !moved && matches!(cfg.step_policy, StepPolicy::Backtracking { .. }) {
            termination = Termination::Stalled;
            break;
        }
        let change = (previous - current).abs();
        if current.is_zero() || change <= cfg.rel_tol * previous.abs() {
            termination = Termination::Converged;
            break;
        }
    }

    Ok(RestartOutcome {
        factors,
        objective_trace,
        step_trace,
        initial_objective,
        termination,
        iterations,
    })
}
