//! Reconstruction quality metrics and the rank-sweep harness.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::solver::solve_cpdtv;
use crate::tensor::{frobenius_norm, sum_sq, ComplexTensor3};

/// `‖X̂ − X_ref‖_F / ‖X_ref‖_F`.
pub fn nrmse<T: Real>(estimate: &ComplexTensor3<T>, reference: &ComplexTensor3<T>) -> Result<T> {
    let denom = frobenius_norm(reference);
    if denom.is_zero() {
        return Err(Error::arg("nrmse reference has zero norm"));
    }
    Ok(frobenius_norm(&estimate.sub(reference)?) / denom)
}

/// `20·log10(max |X_ref| / RMSE)` on the complex difference, in dB.
/// Identical inputs give `+∞`.
pub fn psnr<T: Real>(estimate: &ComplexTensor3<T>, reference: &ComplexTensor3<T>) -> Result<T> {
    let diff = estimate.sub(reference)?;
    let mse = sum_sq(diff.data()) / T::from_count(diff.data().len());
    if mse.is_zero() {
        return Ok(T::infinity());
    }
    let peak = reference.data().iter().map(|z| z.norm()).fold(T::zero(), T::max);
    Ok(T::lit(20.0) * (peak / mse.sqrt()).log10())
}

/// Column order of the sweep table.
pub const SWEEP_HEADER: &str =
    "rank,lambda_e,lambda_t,nrmse_output,nrmse_input,psnr_output,iterations,wall_seconds,status";

#[derive(Debug, Clone, PartialEq)]
pub enum RowStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub rank: usize,
    pub lambda_e: f64,
    pub lambda_t: f64,
    pub nrmse_output: f64,
    pub nrmse_input: f64,
    pub psnr_output: f64,
    pub iterations: usize,
    pub wall_seconds: f64,
    pub status: RowStatus,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == RowStatus::Ok
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Comma-separated table with [`SWEEP_HEADER`] as its first line.
    /// Failed rows carry `NaN` metrics and `failed: <reason>` as status.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(SWEEP_HEADER);
        s.push('\n');
        for r in &self.rows {
            let status = match &r.status {
                RowStatus::Ok => "ok".to_string(),
                RowStatus::Failed(why) => format!("failed: {}", why.replace([',', '\n'], ";")),
            };
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{:.3},{}",
                r.rank,
                r.lambda_e,
                r.lambda_t,
                r.nrmse_output,
                r.nrmse_input,
                r.psnr_output,
                r.iterations,
                r.wall_seconds,
                status
            );
        }
        s
    }

    /// Successful row with the lowest output NRMSE.
    pub fn best(&self) -> Option<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| r.is_ok())
            .min_by(|a, b| a.nrmse_output.total_cmp(&b.nrmse_output))
    }
}

/// Solves once per `(rank, (λe, λt))` pair, in row-major order over
/// `ranks × lambdas`. Rows run in parallel; a failed solve marks its row
/// instead of aborting the sweep.
pub fn rank_sweep<T: Real>(
    y: &ComplexTensor3<T>,
    truth: &ComplexTensor3<T>,
    ranks: &[usize],
    lambdas: &[(T, T)],
    base: &SolverConfig<T>,
) -> Result<SweepResult> {
    if ranks.is_empty() {
        return Err(Error::arg("rank sweep needs at least one rank"));
    }
    let lambdas: Vec<(T, T)> = if lambdas.is_empty() {
        vec![(base.lambda_e, base.lambda_t)]
    } else {
        lambdas.to_vec()
    };
    let nrmse_input = nrmse(y, truth)?.as_f64();
    let jobs: Vec<(usize, T, T)> = ranks
        .iter()
        .flat_map(|&r| lambdas.iter().map(move |&(le, lt)| (r, le, lt)))
        .collect();

    let rows = jobs
        .into_par_iter()
        .map(|(rank, lambda_e, lambda_t)| {
            let cfg = SolverConfig { rank, lambda_e, lambda_t, ..base.clone() };
            let start = Instant::now();
            let solved = solve_cpdtv(y, &cfg).and_then(|sol| {
                let n = nrmse(&sol.estimate, truth)?;
                let p = psnr(&sol.estimate, truth)?;
                Ok((n.as_f64(), p.as_f64(), sol.diagnostics.iterations))
            });
            let wall_seconds = start.elapsed().as_secs_f64();
            let (nrmse_output, psnr_output, iterations, status) = match solved {
                Ok((n, p, it)) => (n, p, it, RowStatus::Ok),
                Err(e) => (f64::NAN, f64::NAN, 0, RowStatus::Failed(e.to_string())),
            };
            SweepRow {
                rank,
                lambda_e: lambda_e.as_f64(),
                lambda_t: lambda_t.as_f64(),
                nrmse_output,
                nrmse_input,
                psnr_output,
                iterations,
                wall_seconds,
                status,
            }
        })
        .collect();
    Ok(SweepResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Dims;
    use num_complex::Complex;

    fn sample() -> ComplexTensor3<f64> {
        ComplexTensor3::from_fn(Dims::new(5, 3, 2).unwrap(), |i, j, k| {
            Complex::new(1.0 + i as f64, (j * 2 + k) as f64 - 1.5)
        })
        .unwrap()
    }

    #[test]
    fn nrmse_definitions() {
        let x = sample();
        assert_eq!(nrmse(&x, &x).unwrap(), 0.0);
        let zero = ComplexTensor3::zeros(x.dims());
        assert!((nrmse(&zero, &x).unwrap() - 1.0).abs() < 1e-15);
        let twice = x.scale(Complex::new(2.0, 0.0));
        assert!((nrmse(&twice, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!(nrmse(&x, &zero).is_err());
    }

    #[test]
    fn psnr_definitions() {
        let x = sample();
        assert_eq!(psnr(&x, &x).unwrap(), f64::INFINITY);

        // Zero estimate against a unit impulse among n entries: 10·log10(n).
        let d = Dims::new(4, 3, 2).unwrap();
        let impulse = ComplexTensor3::from_fn(d, |i, j, k| {
            Complex::new(if (i, j, k) == (1, 2, 0) { 1.0 } else { 0.0 }, 0.0)
        })
        .unwrap();
        let got = psnr(&ComplexTensor3::zeros(d), &impulse).unwrap();
        assert!((got - 10.0 * 24f64.log10()).abs() < 1e-12);

        // Halving the error adds 20·log10(2) dB.
        let err = ComplexTensor3::from_fn(x.dims(), |i, _, _| Complex::new(0.0, 0.1 * i as f64)).unwrap();
        let p1 = psnr(&x.add(&err).unwrap(), &x).unwrap();
        let p2 = psnr(&x.add(&err.scale(Complex::new(0.5, 0.0))).unwrap(), &x).unwrap();
        assert!((p2 - p1 - 20.0 * 2f64.log10()).abs() < 1e-10);
        assert!((p2 - p1 - 6.02).abs() < 0.01);
    }

    #[test]
    fn csv_header_and_failure_marking() {
        let result = SweepResult {
            rows: vec![SweepRow {
                rank: 3,
                lambda_e: 0.1,
                lambda_t: 0.2,
                nrmse_output: f64::NAN,
                nrmse_input: 0.5,
                psnr_output: f64::NAN,
                iterations: 0,
                wall_seconds: 0.0,
                status: RowStatus::Failed("bad, thing".into()),
            }],
        };
        let csv = result.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(SWEEP_HEADER));
        let row = lines.next().unwrap();
        assert_eq!(row.split(',').count(), SWEEP_HEADER.split(',').count());
        assert!(row.ends_with("failed: bad; thing"));
        assert!(result.best().is_none());
    }

    #[test]
    fn sweep_rejects_empty_ranks() {
        let x = sample();
        assert!(rank_sweep(&x, &x, &[], &[], &SolverConfig::default()).is_err());
    }
}
