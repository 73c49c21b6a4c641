//! Amplitude–frequency branches: natural-parameter sweeps with warm starts
//! and pseudo-arclength continuation through folds.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fourier::HarmonicCoefficients;
use crate::hb::{HbProblem, NewtonReport, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::linalg::{norm2, Lu, Mat};
use crate::model::SystemModel;
use crate::stability::{floquet, FloquetSettings, Stability};

/// A converged periodic solution.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint {
    pub coeffs: HarmonicCoefficients,
    pub omega: f64,
    /// Peak `|x_i(tau)|` over the time grid, per DOF.
    pub amplitudes: Vec<f64>,
    pub stability: Stability,
    /// Largest Floquet multiplier magnitude, when computed.
    pub max_multiplier: Option<f64>,
    pub report: NewtonReport,
}

/// A skipped frequency in a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Gap {
    pub omega: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    /// Indices `k` such that the frequency direction reverses between
    /// points `k - 1` and `k`.
    pub folds: Vec<usize>,
    pub gaps: Vec<Gap>,
    /// Why a trace stopped early, if it did.
    pub termination: Option<String>,
}

impl Branch {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_fold(&self, index: usize) -> bool {
        self.folds.contains(&index)
    }
}

/// Settings shared by sweeps and traces.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveSettings {
    pub tol: f64,
    pub max_iter: usize,
    /// `None` skips Floquet analysis (stability reported unknown).
    pub floquet: Option<FloquetSettings>,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            floquet: Some(FloquetSettings::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSettings {
    pub solve: SolveSettings,
    pub ds: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub max_points: usize,
    pub omega_min: f64,
    pub omega_max: f64,
    /// Corrector iteration limit.
    pub corrector_max_iter: usize,
    /// Step growth factor after fast convergence.
    pub growth: f64,
    /// Corrector iterations counted as fast convergence.
    pub fast_iterations: usize,
    /// Coefficient scale in the arclength norm; `None` uses the seed's
    /// largest coefficient magnitude.
    pub amplitude_scale: Option<f64>,
    /// Frequency scale in the arclength norm; `None` uses the seed
    /// frequency.
    pub omega_scale: Option<f64>,
    /// `+1` to start towards increasing frequency, `-1` towards decreasing.
    pub direction: f64,
}

impl Default for TraceSettings {
    fn default() -> Self {
        Self {
            solve: SolveSettings::default(),
            ds: 0.01,
            ds_min: 1e-6,
            ds_max: 0.05,
            max_points: 2000,
            omega_min: 0.0,
            omega_max: f64::INFINITY,
            corrector_max_iter: 8,
            growth: 1.3,
            fast_iterations: 3,
            amplitude_scale: None,
            omega_scale: None,
            direction: 1.0,
        }
    }
}

impl TraceSettings {
    fn validate(&self) -> Result<()> {
        let ok = self.ds_min > 0.0
            && self.ds_min <= self.ds
            && self.ds <= self.ds_max
            && self.growth >= 1.0
            && self.omega_min < self.omega_max
            && self.direction != 0.0
            && self.solve.tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid continuation settings: {self:?}")))
        }
    }
}

/// Builds a branch point from a converged solve.
pub fn make_point<M: SystemModel>(
    problem: &HbProblem<'_, M>,
    coeffs: Vec<f64>,
    omega: f64,
    report: NewtonReport,
    floquet_settings: Option<&FloquetSettings>,
) -> Result<BranchPoint> {
    let amplitudes = problem.peak_amplitudes(&coeffs)?;
    let (stability, max_multiplier) = match floquet_settings {
        Some(s) => {
            let r = floquet(problem, &coeffs, omega, s)?;
            let max = r.max_magnitude.is_finite().then_some(r.max_magnitude);
            let stab = if r.marginal { Stability::Unknown } else { r.classification };
            (stab, max)
        }
        None => (Stability::Unknown, None),
    };
    Ok(BranchPoint {
        coeffs: HarmonicCoefficients::from_flat(problem.set(), problem.dofs(), coeffs)?,
        omega,
        amplitudes,
        stability,
        max_multiplier,
        report,
    })
}

/// Natural-parameter sweep from `omega_start` towards `omega_end` in steps of
/// `d_omega`, each solve warm-started from the previous converged point.
/// When the warm start fails the point is retried from the linear guess;
/// if that fails too, the frequency is recorded as a gap.
pub fn sweep<M: SystemModel>(
    problem: &HbProblem<'_, M>,
    omega_start: f64,
    omega_end: f64,
    d_omega: f64,
    initial: &[f64],
    settings: &SolveSettings,
) -> Result<Branch> {
    if d_omega == 0.0 || !d_omega.is_finite() {
        return Err(Error::Config("sweep step must be nonzero".into()));
    }
    let span = omega_end - omega_start;
    if span != 0.0 && span.signum() != d_omega.signum() {
        return Err(Error::Config(format!(
            "sweep step {d_omega} points away from the end frequency {omega_end}"
        )));
    }
    let count = libm::floor(span / d_omega + 1e-9) as usize + 1;
    let mut branch = Branch::default();
    let mut guess = initial.to_vec();
    for k in 0..count {
        let omega = omega_start + k as f64 * d_omega;
        let (mut a, mut report) = problem.newton_solve(&guess, omega, settings.tol, settings.max_iter)?;
        if !report.converged {
            // the warm start was lost past a fold: jump to whichever solution
            // the linear response leads to
            if let Ok(cold) = problem.linear_guess(omega) {
                let (a_cold, r_cold) = problem.newton_solve(&cold, omega, settings.tol, settings.max_iter)?;
                if r_cold.converged {
                    log::info!("sweep jump at omega = {omega}");
                    (a, report) = (a_cold, r_cold);
                }
            }
        }
        if report.converged {
            guess.clone_from(&a);
            branch
                .points
                .push(make_point(problem, a, omega, report, settings.floquet.as_ref())?);
        } else {
            let reason = report.failure.unwrap_or_default();
            log::info!("sweep gap at omega = {omega}: {reason}");
            branch.gaps.push(Gap { omega, reason });
        }
    }
    if branch.points.is_empty() {
        return Err(Error::EmptyBranch);
    }
    resolve_marginal(&mut branch);
    Ok(branch)
}

/// Scaling of the augmented unknown `z = (A / a_s, w / w_s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scales {
    pub amplitude: f64,
    pub omega: f64,
}

impl Scales {
    fn to_z(self, coeffs: &[f64], omega: f64) -> Vec<f64> {
        let mut z: Vec<f64> = coeffs.iter().map(|a| a / self.amplitude).collect();
        z.push(omega / self.omega);
        z
    }

    fn from_z(self, z: &[f64]) -> (Vec<f64>, f64) {
        let m = z.len() - 1;
        (z[..m].iter().map(|v| v * self.amplitude).collect(), z[m] * self.omega)
    }

    /// Augmented Jacobian in scaled variables.
    fn scale_jacobian(self, ja: &Mat) -> Mat {
        let (rows, cols) = (ja.rows(), ja.cols());
        let mut out = ja.clone();
        for r in 0..rows {
            let row = out.row_mut(r);
            for v in &mut row[..cols - 1] {
                *v *= self.amplitude;
            }
            row[cols - 1] *= self.omega;
        }
        out
    }
}

fn bordered(js: &Mat, t: &[f64]) -> Mat {
    let (m, cols) = (js.rows(), js.cols());
    let mut data = Vec::with_capacity((m + 1) * cols);
    data.extend_from_slice(js.as_slice());
    data.extend_from_slice(t);
    Mat::from_vec(m + 1, cols, data)
}

fn tangent_from_scaled(js: &Mat, previous: &[f64]) -> Result<Vec<f64>> {
    let lu = Lu::factor(&bordered(js, previous)).map_err(|_| Error::RankDeficient)?;
    let mut rhs = vec![0.0; js.cols()];
    rhs[js.rows()] = 1.0;
    let mut t = lu.solve(&rhs);
    let norm = norm2(&t);
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::RankDeficient);
    }
    let sign = if t.iter().zip(previous).map(|(a, b)| a * b).sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    t.iter_mut().for_each(|v| *v *= sign / norm);
    Ok(t)
}

/// Unit tangent of the solution curve `B(A, w) = 0` at `(coeffs, omega)` in
/// scaled variables, oriented so that its inner product with `previous` is
/// positive.
pub fn tangent<M: SystemModel>(
    problem: &HbProblem<'_, M>,
    coeffs: &[f64],
    omega: f64,
    scales: Scales,
    previous: &[f64],
) -> Result<Vec<f64>> {
    if previous.len() != problem.unknowns() + 1 {
        return Err(Error::Shape {
            expected: problem.unknowns() + 1,
            got: previous.len(),
        });
    }
    let (_, ja) = problem.jacobian_augmented(coeffs, omega)?;
    tangent_from_scaled(&scales.scale_jacobian(&ja), previous)
}

enum Corrector {
    Converged { z: Vec<f64>, report: NewtonReport, js: Mat },
    Failed(String),
}

fn correct<M: SystemModel>(
    problem: &HbProblem<'_, M>,
    scales: Scales,
    z_pred: &[f64],
    t: &[f64],
    settings: &TraceSettings,
) -> Corrector {
    let mut z = z_pred.to_vec();
    let mut report = NewtonReport::default();
    let tol = settings.solve.tol;
    loop {
        let (a, w) = scales.from_z(&z);
        let (b, ja) = match problem.jacobian_augmented(&a, w) {
            Ok(v) => v,
            Err(e) => return Corrector::Failed(e.to_string()),
        };
        let norm = norm2(&b);
        let arc: f64 = t.iter().zip(z.iter().zip(z_pred)).map(|(ti, (zi, pi))| ti * (zi - pi)).sum();
        report.residual_norms.push(norm);
        if !norm.is_finite() {
            return Corrector::Failed("non-finite residual".into());
        }
        let js = scales.scale_jacobian(&ja);
        if norm < tol && arc.abs() < tol {
            report.converged = true;
            return Corrector::Converged { z, report, js };
        }
        if report.iterations >= settings.corrector_max_iter {
            return Corrector::Failed(format!("corrector: |B| = {norm:e} after {} iterations", report.iterations));
        }
        let lu = match Lu::factor(&bordered(&js, t)) {
            Ok(lu) => lu,
            Err(e) => return Corrector::Failed(e.to_string()),
        };
        report.condition = lu.condition_estimate();
        let mut rhs = b;
        rhs.push(arc);
        let step = lu.solve(&rhs);
        z.iter_mut().zip(&step).for_each(|(v, s)| *v -= s);
        report.iterations += 1;
    }
}

/// Pseudo-arclength continuation from a converged `seed`.
pub fn trace<M: SystemModel>(
    problem: &HbProblem<'_, M>,
    seed: &BranchPoint,
    settings: &TraceSettings,
) -> Result<Branch> {
    settings.validate()?;
    if !seed.report.converged {
        return Err(Error::Config("trace seed must be a converged solution".into()));
    }
    let a_seed = seed.coeffs.as_flat();
    let scales = Scales {
        amplitude: settings
            .amplitude_scale
            .unwrap_or_else(|| a_seed.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
            .max(f64::MIN_POSITIVE),
        omega: settings.omega_scale.unwrap_or(seed.omega.abs()).max(f64::MIN_POSITIVE),
    };
    let dim = problem.unknowns() + 1;
    let mut previous = vec![0.0; dim];
    previous[dim - 1] = settings.direction.signum();
    let mut t = tangent(problem, a_seed, seed.omega, scales, &previous)?;
    let mut z = scales.to_z(a_seed, seed.omega);
    let mut branch = Branch {
        points: vec![seed.clone()],
        ..Branch::default()
    };
    let mut ds = settings.ds;
    let floquet_settings = settings.solve.floquet.as_ref();

    while branch.points.len() < settings.max_points {
        let z_pred: Vec<f64> = z.iter().zip(&t).map(|(zi, ti)| zi + ds * ti).collect();
        let outcome = correct(problem, scales, &z_pred, &t, settings);
        let accepted = match outcome {
            Corrector::Converged { z: z_new, report, js } => {
                let dz: Vec<f64> = z_new.iter().zip(&z).map(|(a, b)| a - b).collect();
                match tangent_from_scaled(&js, &t) {
                    Ok(t_new) if norm2(&dz) <= 2.0 * settings.ds_max && dot(&t_new, &t) > 0.5 => {
                        Some((z_new, report, t_new))
                    }
                    Ok(_) => None,
                    Err(e) if ds <= settings.ds_min => {
                        branch.termination = Some(format!("{e} near omega = {}", z_new[dim - 1] * scales.omega));
                        break;
                    }
                    Err(_) => None,
                }
            }
            Corrector::Failed(reason) => {
                if ds <= settings.ds_min {
                    branch.termination = Some(format!("corrector failed at minimum step: {reason}"));
                    break;
                }
                None
            }
        };
        let Some((z_new, report, t_new)) = accepted else {
            if ds <= settings.ds_min {
                branch.termination = Some("step rejected at minimum step size".into());
                break;
            }
            ds = (0.5 * ds).max(settings.ds_min);
            continue;
        };
        let (a, w) = scales.from_z(&z_new);
        if w < settings.omega_min || w > settings.omega_max {
            break;
        }
        let index = branch.points.len();
        if t_new[dim - 1].signum() != t[dim - 1].signum() {
            branch.folds.push(index);
        }
        if report.iterations <= settings.fast_iterations {
            ds = (ds * settings.growth).min(settings.ds_max);
        }
        branch.points.push(make_point(problem, a, w, report, floquet_settings)?);
        z = z_new;
        t = t_new;
    }
    resolve_marginal(&mut branch);
    Ok(branch)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Points whose largest multiplier sits on the unit circle (folds) inherit
/// the classification of the neighbour on the same side of the fold.
fn resolve_marginal(branch: &mut Branch) {
    let n = branch.points.len();
    for k in 0..n {
        if branch.points[k].stability != Stability::Unknown || branch.points[k].max_multiplier.is_none() {
            continue;
        }
        let after_fold = branch.is_fold(k);
        let forward = (k + 1..n).find(|&j| branch.points[j].stability != Stability::Unknown && !branch.is_fold(j));
        let backward = (0..k).rev().find(|&j| branch.points[j].stability != Stability::Unknown);
        let pick = if after_fold { forward.or(backward) } else { backward.or(forward) };
        if let Some(j) = pick {
            branch.points[k].stability = branch.points[j].stability;
        }
    }
}
