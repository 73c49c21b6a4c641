//! Floquet stability of harmonic-balance solutions.
//!
//! The equation of motion is linearized about the periodic orbit with AD
//! partials of the nonlinear force, the variational system `Y' = Phi(t) Y`
//! is integrated over one response period with RK4 from the identity, and
//! the eigenvalues of the monodromy matrix `Y(T)` are the Floquet
//! multipliers.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::ad::{jacobian, Var};
use crate::error::{Error, Result};
use crate::fourier::evaluate_at;
use crate::hb::HbProblem;
use crate::linalg::{Lu, Mat};
use crate::model::SystemModel;

/// Half-width of the band around `|mu| = 1` inside which a multiplier is
/// treated as marginal.
pub const DEFAULT_FLOQUET_TOL: f64 = 1e-6;
pub const DEFAULT_SUBSTEPS: usize = 2000;
/// Largest `h * rho(Phi)` allowed before substeps are increased
/// automatically.
const MAX_STEP_SPECTRAL_PRODUCT: f64 = 0.05;
const MAX_SUBSTEPS: usize = 400_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    Unknown,
}

impl Stability {
    /// CSV encoding: 1 stable, 0 otherwise.
    pub fn flag(self) -> u8 {
        u8::from(self == Stability::Stable)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloquetSettings {
    /// RK4 steps per response period (a floor; stiff linearizations get
    /// more).
    pub substeps: usize,
    pub tol: f64,
}

impl Default for FloquetSettings {
    fn default() -> Self {
        Self {
            substeps: DEFAULT_SUBSTEPS,
            tol: DEFAULT_FLOQUET_TOL,
        }
    }
}

/// A complex Floquet multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Multiplier {
    pub re: f64,
    pub im: f64,
}

impl Multiplier {
    pub fn magnitude(&self) -> f64 {
        libm::hypot(self.re, self.im)
    }

    pub fn phase(&self) -> f64 {
        libm::atan2(self.im, self.re)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloquetResult {
    pub multipliers: Vec<Multiplier>,
    pub max_magnitude: f64,
    pub classification: Stability,
    /// `true` when `max_magnitude` lies within `tol` of 1.
    pub marginal: bool,
    /// `sum ln |mu_i|`.
    pub log_multiplier_product: f64,
    /// `int_0^T trace(Phi) dt`; equals the above by Liouville's formula.
    pub trace_integral: f64,
    /// RK4 steps actually used.
    pub substeps: usize,
    pub diagnostic: Option<String>,
}

impl FloquetResult {
    fn unknown(reason: String) -> Self {
        Self {
            multipliers: Vec::new(),
            max_magnitude: f64::NAN,
            classification: Stability::Unknown,
            marginal: false,
            log_multiplier_product: f64::NAN,
            trace_integral: f64::NAN,
            substeps: 0,
            diagnostic: Some(reason),
        }
    }

    /// Relative error of Liouville's identity
    /// `prod |mu_i| = exp(int trace Phi)`.
    pub fn liouville_error(&self) -> f64 {
        libm::expm1(self.log_multiplier_product - self.trace_integral).abs()
    }
}

/// Linearized first-order system matrix `Phi` at response phase `phase`.
fn system_matrix<M: SystemModel>(
    problem: &HbProblem<'_, M>,
    coeffs: &[f64],
    omega: f64,
    phase: f64,
) -> Result<Mat> {
    let model = problem.model();
    let n = model.dofs();
    let set = problem.set();
    let base = omega / model.period_divisor() as f64;
    let mut m_eff = model.mass().clone();
    let mut c_eff = model.damping_at(omega);
    let mut k_eff = model.stiffness().clone();
    if model.is_nonlinear() {
        let mut state = Vec::with_capacity(3 * n);
        for (order, scale) in [(2, base * base), (1, base), (0, 1.0)] {
            state.extend(evaluate_at(coeffs, set, n, phase, order).iter().map(|v| v * scale));
        }
        let partials = jacobian(
            |s| {
                let mut out = vec![Var::constant(0.0); n];
                model.nonlinear_force(&s[..n], &s[n..2 * n], &s[2 * n..], phase, Var::constant(omega), &mut out)?;
                Ok(out)
            },
            &state,
        )?;
        for i in 0..n {
            for j in 0..n {
                m_eff.row_mut(i)[j] += partials[(i, j)];
                c_eff.row_mut(i)[j] += partials[(i, n + j)];
                k_eff.row_mut(i)[j] += partials[(i, 2 * n + j)];
            }
        }
    }
    let lu = Lu::factor(&m_eff)?;
    let mut phi = Mat::zeros(2 * n, 2 * n);
    for i in 0..n {
        phi.row_mut(i)[n + i] = 1.0;
    }
    for j in 0..n {
        let kc = lu.solve(&k_eff.column(j));
        let cc = lu.solve(&c_eff.column(j));
        for i in 0..n {
            phi.row_mut(n + i)[j] = -kc[i];
            phi.row_mut(n + i)[n + j] = -cc[i];
        }
    }
    Ok(phi)
}

/// Bound on the spectral radius of `Phi = [[0, I], [-A, -B]]`: every
/// eigenvalue satisfies `|l|^2 <= |l| |B| + |A|`, so
/// `|l| <= sqrt(|A|) + |B|` in any induced norm.
fn spectral_bound(phi: &Mat, n: usize) -> f64 {
    let (mut a, mut b) = (0.0f64, 0.0f64);
    for j in 0..n {
        let (mut sa, mut sb) = (0.0, 0.0);
        for i in n..2 * n {
            sa += phi[(i, j)].abs();
            sb += phi[(i, n + j)].abs();
        }
        a = a.max(sa);
        b = b.max(sb);
    }
    libm::sqrt(a) + b
}

/// Floquet multipliers of the solution `coeffs` at drive frequency `omega`.
///
/// A singular effective mass yields classification [`Stability::Unknown`]
/// with a diagnostic instead of an error; shape and tape errors propagate.
pub fn floquet<M: SystemModel>(
    problem: &HbProblem<'_, M>,
    coeffs: &[f64],
    omega: f64,
    settings: &FloquetSettings,
) -> Result<FloquetResult> {
    if coeffs.len() != problem.unknowns() {
        return Err(Error::Shape {
            expected: problem.unknowns(),
            got: coeffs.len(),
        });
    }
    if !(omega > 0.0) || settings.substeps == 0 {
        return Err(Error::Config(format!(
            "Floquet analysis needs omega > 0 and substeps > 0 (omega = {omega})"
        )));
    }
    let n = problem.dofs();
    let q = problem.model().period_divisor() as f64;
    let period = 2.0 * core::f64::consts::PI * q / omega;
    let phase_of = |t: f64| omega / q * t;
    let phi_at = |t: f64| system_matrix(problem, coeffs, omega, phase_of(t));

    // coarse scan to size the step for stiff linearizations
    let probe = 64;
    let mut rho: f64 = 0.0;
    for k in 0..probe {
        match phi_at(period * k as f64 / probe as f64) {
            Ok(p) => rho = rho.max(spectral_bound(&p, n)),
            Err(Error::Singular { .. }) => {
                return Ok(FloquetResult::unknown("effective mass matrix is singular on the orbit".into()))
            }
            Err(e) => return Err(e),
        }
    }
    let needed = libm::ceil(period * rho / MAX_STEP_SPECTRAL_PRODUCT) as usize;
    let steps = settings.substeps.max(needed).min(MAX_SUBSTEPS);
    if needed > MAX_SUBSTEPS {
        log::warn!("Floquet substeps capped at {MAX_SUBSTEPS} (wanted {needed})");
    }
    let h = period / steps as f64;

    let dim = 2 * n;
    let mut y = Mat::identity(dim);
    let mut trace_integral = 0.0;
    let mut phi_start = match phi_at(0.0) {
        Ok(p) => p,
        Err(Error::Singular { .. }) => {
            return Ok(FloquetResult::unknown("effective mass matrix is singular on the orbit".into()))
        }
        Err(e) => return Err(e),
    };
    for k in 0..steps {
        let t = k as f64 * h;
        let (phi_mid, phi_end) = match (phi_at(t + 0.5 * h), phi_at(t + h)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(Error::Singular { .. }), _) | (_, Err(Error::Singular { .. })) => {
                return Ok(FloquetResult::unknown("effective mass matrix is singular on the orbit".into()))
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        let k1 = phi_start.matmul(&y);
        let k2 = phi_mid.matmul(&y.add(&k1.scaled(0.5 * h)));
        let k3 = phi_mid.matmul(&y.add(&k2.scaled(0.5 * h)));
        let k4 = phi_end.matmul(&y.add(&k3.scaled(h)));
        let incr = k1.add(&k2.scaled(2.0)).add(&k3.scaled(2.0)).add(&k4).scaled(h / 6.0);
        y = y.add(&incr);
        trace_integral += h / 6.0 * (phi_start.trace() + 4.0 * phi_mid.trace() + phi_end.trace());
        phi_start = phi_end;
    }
    if y.as_slice().iter().any(|v| !v.is_finite()) {
        return Ok(FloquetResult::unknown("monodromy matrix is not finite".into()));
    }

    let eig = nalgebra::DMatrix::from_row_slice(dim, dim, y.as_slice()).complex_eigenvalues();
    let multipliers: Vec<Multiplier> = eig.iter().map(|c| Multiplier { re: c.re, im: c.im }).collect();
    let max_magnitude = multipliers.iter().map(Multiplier::magnitude).fold(0.0, f64::max);
    let log_multiplier_product = multipliers.iter().map(|m| libm::log(m.magnitude())).sum();
    let classification = if max_magnitude < 1.0 + settings.tol {
        Stability::Stable
    } else {
        Stability::Unstable
    };
    Ok(FloquetResult {
        multipliers,
        max_magnitude,
        classification,
        marginal: (max_magnitude - 1.0).abs() <= settings.tol,
        log_multiplier_product,
        trace_integral,
        substeps: steps,
        diagnostic: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::HarmonicSet;
    use crate::hb::{DEFAULT_MAX_ITER, DEFAULT_TOL};
    use crate::model::{Duffing, LinearModel};

    #[test]
    fn damped_linear_multipliers_inside_unit_circle() {
        let m = LinearModel::two_dof();
        let p = HbProblem::with_default_grid(&m, &HarmonicSet::contiguous(1)).unwrap();
        let a = p.linear_guess(1.2).unwrap();
        let r = floquet(&p, &a, 1.2, &FloquetSettings::default()).unwrap();
        assert_eq!(r.classification, Stability::Stable);
        assert!(r.max_magnitude < 1.0);
        assert!(r.liouville_error() < 1e-8);
    }

    #[test]
    fn undamped_linear_multipliers_on_unit_circle() {
        let m = LinearModel::new(
            Mat::identity(2),
            Mat::zeros(2, 2),
            Mat::from_rows(&[[2.0, -1.0], [-1.0, 2.0]]),
            vec![1.0, 0.0],
        )
        .unwrap();
        let p = HbProblem::with_default_grid(&m, &HarmonicSet::contiguous(1)).unwrap();
        let a = p.linear_guess(0.7).unwrap();
        let r = floquet(&p, &a, 0.7, &FloquetSettings::default()).unwrap();
        for mu in &r.multipliers {
            assert!((mu.magnitude() - 1.0).abs() < 1e-6, "{mu:?}");
        }
        // exact multipliers exp(+-i w_n T), w_n = 1, sqrt 3
        let period = 2.0 * core::f64::consts::PI / 0.7;
        for wn in [1.0, libm::sqrt(3.0)] {
            let expect = Multiplier { re: libm::cos(wn * period), im: libm::sin(wn * period) };
            assert!(r
                .multipliers
                .iter()
                .any(|mu| libm::hypot(mu.re - expect.re, mu.im.abs() - expect.im.abs()) < 1e-6));
        }
    }

    #[test]
    fn damped_sdof_matches_closed_form() {
        // x'' + 2 z x' + x = cos(w t): multipliers exp(lambda T)
        let z = 0.1;
        let m = LinearModel::new(Mat::identity(1), Mat::from_diag(&[2.0 * z]), Mat::identity(1), vec![1.0]).unwrap();
        let p = HbProblem::with_default_grid(&m, &HarmonicSet::contiguous(1)).unwrap();
        let w = 1.3;
        let a = p.linear_guess(w).unwrap();
        let r = floquet(&p, &a, w, &FloquetSettings::default()).unwrap();
        let t = 2.0 * core::f64::consts::PI / w;
        let expect = libm::exp(-z * t);
        for mu in &r.multipliers {
            assert!((mu.magnitude() - expect).abs() < 1e-9);
        }
        assert!((r.trace_integral + 2.0 * z * t).abs() < 1e-12);
    }

    #[test]
    fn duffing_liouville_and_substep_convergence() {
        let m = Duffing::default();
        let p = HbProblem::with_default_grid(&m, &HarmonicSet::contiguous(5)).unwrap();
        let w = 0.8;
        let a0 = p.linear_guess(w).unwrap();
        let (a, rep) = p.newton_solve(&a0, w, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(rep.converged);
        let coarse = floquet(&p, &a, w, &FloquetSettings::default()).unwrap();
        let fine = floquet(&p, &a, w, &FloquetSettings { substeps: 4000, ..Default::default() }).unwrap();
        assert!(coarse.liouville_error() < 1e-4);
        assert!((coarse.max_magnitude - fine.max_magnitude).abs() < 1e-4);
        assert_eq!(coarse.classification, Stability::Stable);
    }

    #[test]
    fn spectral_bound_dominates_eigenvalues() {
        let mut seed = 7u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for n in 1..5 {
            for _ in 0..50 {
                let mut phi = Mat::zeros(2 * n, 2 * n);
                for i in 0..n {
                    phi.row_mut(i)[n + i] = 1.0;
                    for j in 0..2 * n {
                        phi.row_mut(n + i)[j] = 100.0 * next();
                    }
                }
                let bound = spectral_bound(&phi, n);
                let eig = nalgebra::DMatrix::from_row_slice(2 * n, 2 * n, phi.as_slice()).complex_eigenvalues();
                for l in eig.iter() {
                    assert!(libm::hypot(l.re, l.im) <= bound * (1.0 + 1e-12), "{l} vs {bound}");
                }
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let m = Duffing::default();
        let p = HbProblem::with_default_grid(&m, &HarmonicSet::contiguous(3)).unwrap();
        assert!(floquet(&p, &[0.0; 2], 1.0, &FloquetSettings::default()).is_err());
        assert!(floquet(&p, &vec![0.0; p.unknowns()], 0.0, &FloquetSettings::default()).is_err());
    }
}
