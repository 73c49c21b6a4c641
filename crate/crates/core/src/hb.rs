//! Harmonic balance with alternating frequency/time residual evaluation and
//! Newton iteration on AD Jacobians.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::ad::{jacobian_with_values, Scalar, Var};
use crate::error::{Error, Result};
use crate::fourier::{BasisTables, HarmonicSet, TimeGrid};
use crate::linalg::{norm2, Lu, Mat};
use crate::model::{residual_timeseries, SystemModel};

/// Default Newton tolerance on the Euclidean norm of the residual
/// coefficients.
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 50;

/// A model together with its harmonic set and time grid.
#[derive(Debug, Clone)]
pub struct HbProblem<'m, M> {
    model: &'m M,
    tables: BasisTables,
}

impl<'m, M: SystemModel> HbProblem<'m, M> {
    pub fn new(model: &'m M, set: &HarmonicSet, grid: TimeGrid) -> Result<Self> {
        Ok(Self {
            model,
            tables: BasisTables::build(set, grid)?,
        })
    }

    /// Uses the default grid for `set`.
    pub fn with_default_grid(model: &'m M, set: &HarmonicSet) -> Result<Self> {
        Self::new(model, set, TimeGrid::default_for(set))
    }

    pub fn model(&self) -> &'m M {
        self.model
    }

    pub fn tables(&self) -> &BasisTables {
        &self.tables
    }

    pub fn set(&self) -> &HarmonicSet {
        self.tables.set()
    }

    pub fn dofs(&self) -> usize {
        self.model.dofs()
    }

    /// Number of unknown coefficients.
    pub fn unknowns(&self) -> usize {
        self.dofs() * self.tables.coeffs_per_dof()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.unknowns() {
            return Err(Error::Shape {
                expected: self.unknowns(),
                got: len,
            });
        }
        Ok(())
    }

    /// Residual coefficients `B(A, w)`: evaluate `X, X', X''` on the grid,
    /// form the physical residual, project back onto the harmonic set.
    pub fn residual<S: Scalar>(&self, coeffs: &[S], omega: S) -> Result<Vec<S>> {
        self.check_len(coeffs.len())?;
        let n = self.dofs();
        let x0 = self.tables.evaluate(coeffs, n, 0)?;
        let x1 = self.tables.evaluate(coeffs, n, 1)?;
        let x2 = self.tables.evaluate(coeffs, n, 2)?;
        let r = residual_timeseries(self.model, &self.tables, &x2, &x1, &x0, omega)?;
        self.tables.dft(&r, n)
    }

    /// Value-only residual; non-finite output is reported as an error.
    pub fn assemble_residual(&self, coeffs: &[f64], omega: f64) -> Result<Vec<f64>> {
        let b = self.residual(coeffs, omega)?;
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NoConvergence("non-finite residual".into()));
        }
        Ok(b)
    }

    /// Residual and `dB/dA` from one taped evaluation.
    pub fn jacobian(&self, coeffs: &[f64], omega: f64) -> Result<(Vec<f64>, Mat)> {
        self.check_len(coeffs.len())?;
        jacobian_with_values(|a| self.residual(a, Var::constant(omega)), coeffs)
    }

    /// Residual and the augmented Jacobian `[dB/dA | dB/dw]`.
    pub fn jacobian_augmented(&self, coeffs: &[f64], omega: f64) -> Result<(Vec<f64>, Mat)> {
        self.check_len(coeffs.len())?;
        let mut point = coeffs.to_vec();
        point.push(omega);
        let m = coeffs.len();
        jacobian_with_values(|z| self.residual(&z[..m], z[m]), &point)
    }

    /// `dB/dw` at fixed coefficients.
    pub fn jacobian_domega(&self, coeffs: &[f64], omega: f64) -> Result<Vec<f64>> {
        self.check_len(coeffs.len())?;
        let j = jacobian_with_values(
            |w| {
                let a: Vec<Var<'_>> = coeffs.iter().map(|&c| Var::constant(c)).collect();
                self.residual(&a, w[0])
            },
            &[omega],
        )?
        .1;
        Ok(j.column(0))
    }

    /// One Newton step from zero; exact for linear models and a sensible
    /// warm start otherwise.
    pub fn linear_guess(&self, omega: f64) -> Result<Vec<f64>> {
        let zero = vec![0.0; self.unknowns()];
        let (b, j) = self.jacobian(&zero, omega)?;
        let step = Lu::factor(&j)?.solve(&b);
        Ok(step.iter().map(|s| -s).collect())
    }

    /// Newton–Raphson on `B(A) = 0` at fixed `omega`. Failures (singular
    /// Jacobian, model domain errors, iteration limit) are reported in the
    /// returned [`NewtonReport`], not as errors.
    pub fn newton_solve(
        &self,
        initial: &[f64],
        omega: f64,
        tol: f64,
        max_iter: usize,
    ) -> Result<(Vec<f64>, NewtonReport)> {
        self.check_len(initial.len())?;
        if !(tol > 0.0) {
            return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
        }
        let mut a = initial.to_vec();
        let mut report = NewtonReport::default();
        loop {
            let (b, j) = match self.jacobian(&a, omega) {
                Ok(v) => v,
                Err(e) => {
                    report.failure = Some(e.to_string());
                    return Ok((a, report));
                }
            };
            let norm = norm2(&b);
            report.residual_norms.push(norm);
            if !norm.is_finite() {
                report.failure = Some("non-finite residual".into());
                return Ok((a, report));
            }
            if norm < tol {
                report.converged = true;
                return Ok((a, report));
            }
            if report.iterations >= max_iter {
                report.failure = Some(format!("no convergence in {max_iter} iterations"));
                return Ok((a, report));
            }
            let lu = match Lu::factor(&j) {
                Ok(lu) => lu,
                Err(e) => {
                    report.failure = Some(e.to_string());
                    return Ok((a, report));
                }
            };
            report.condition = lu.condition_estimate();
            let step = lu.solve(&b);
            for (x, s) in a.iter_mut().zip(&step) {
                *x -= s;
            }
            report.iterations += 1;
        }
    }

    /// Peak `|x_i(tau)|` over the grid for every DOF.
    pub fn peak_amplitudes(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        let n = self.dofs();
        let x = self.tables.evaluate(coeffs, n, 0)?;
        let s = self.tables.samples();
        Ok((0..n)
            .map(|i| x[i * s..(i + 1) * s].iter().fold(0.0, |m: f64, v| m.max(v.abs())))
            .collect())
    }
}

/// Diagnostics of one Newton solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NewtonReport {
    /// Number of Newton updates applied.
    pub iterations: usize,
    /// `||B||_2` before each update and after the last one.
    pub residual_norms: Vec<f64>,
    pub converged: bool,
    /// 1-norm condition estimate of the last factored Jacobian.
    pub condition: f64,
    pub failure: Option<alloc::string::String>,
}

impl NewtonReport {
    pub fn final_norm(&self) -> f64 {
        self.residual_norms.last().copied().unwrap_or(f64::INFINITY)
    }
}

impl core::fmt::Display for NewtonReport {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "{} after {} iterations, |B| = {:e}",
            if self.converged { "converged" } else { "failed" },
            self.iterations,
            self.final_norm()
        )?;
        if let Some(reason) = &self.failure {
            write!(f, " ({reason})")?;
        }
        Ok(())
    }
}

impl From<&NewtonReport> for Error {
    fn from(r: &NewtonReport) -> Self {
        Error::NoConvergence(r.failure.clone().unwrap_or_else(|| r.to_string()))
    }
}
