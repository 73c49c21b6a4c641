//! Reference time integrators in physical time: explicit RK4 and implicit
//! Newmark with a Newton inner loop on AD tangents.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::ad::{jacobian_with_values, Scalar, Var};
use crate::error::{Error, Result};
use crate::fourier::{BasisTables, Component, HarmonicCoefficients, HarmonicSet, TimeGrid};
use crate::linalg::{norm_inf, Lu};
use crate::model::SystemModel;

/// Default transient discard, in response periods.
pub const DEFAULT_DISCARD_PERIODS: usize = 200;
/// Default steps per response period.
pub const DEFAULT_STEPS_PER_PERIOD: usize = 500;

/// Uniformly sampled solution. Sample `k` is at `t = k * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dofs: usize,
    dt: f64,
    disp: Vec<f64>,
    vel: Vec<f64>,
}

impl Trajectory {
    fn new(dofs: usize, dt: f64, capacity: usize) -> Self {
        Self {
            dofs,
            dt,
            disp: Vec::with_capacity(capacity * dofs),
            vel: Vec::with_capacity(capacity * dofs),
        }
    }

    fn push(&mut self, x: &[f64], v: &[f64]) {
        self.disp.extend_from_slice(x);
        self.vel.extend_from_slice(v);
    }

    pub fn dofs(&self) -> usize {
        self.dofs
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.disp.len() / self.dofs
    }

    pub fn is_empty(&self) -> bool {
        self.disp.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn displacement(&self, k: usize) -> &[f64] {
        &self.disp[k * self.dofs..(k + 1) * self.dofs]
    }

    pub fn velocity(&self, k: usize) -> &[f64] {
        &self.vel[k * self.dofs..(k + 1) * self.dofs]
    }
}

fn check_inputs<M: SystemModel>(model: &M, x0: &[f64], v0: &[f64], t_end: f64, dt: f64) -> Result<usize> {
    let n = model.dofs();
    for s in [x0, v0] {
        if s.len() != n {
            return Err(Error::Shape { expected: n, got: s.len() });
        }
    }
    if !(dt > 0.0 && t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Config(format!("need dt > 0 and t_end >= 0 (dt = {dt}, t_end = {t_end})")));
    }
    Ok(libm::round(t_end / dt) as usize)
}

fn phase_of<M: SystemModel>(model: &M, omega: f64, t: f64) -> f64 {
    omega / model.period_divisor() as f64 * t
}

/// Right-hand side `F - C(w) v - K x - f_N` (acceleration-independent
/// models) evaluated on any scalar.
fn load<M: SystemModel, S: Scalar>(model: &M, x: &[S], v: &[S], a: &[S], phase: f64, omega: f64, out: &mut [S]) -> Result<()> {
    let n = model.dofs();
    let c = model.damping_at(omega);
    let k = model.stiffness();
    let mut f_ex = vec![S::zero(); n];
    model.excitation(phase, S::cst(omega), &mut f_ex);
    let mut f_n = vec![S::zero(); n];
    if model.is_nonlinear() {
        model.nonlinear_force(a, v, x, phase, S::cst(omega), &mut f_n)?;
    }
    for i in 0..n {
        out[i] = f_ex[i] - S::dot(c.row(i), v) - S::dot(k.row(i), x) - f_n[i];
    }
    Ok(())
}

/// Classical RK4 on the first-order form with `dt` fixed.
pub fn rk4<M: SystemModel>(model: &M, x0: &[f64], v0: &[f64], omega: f64, t_end: f64, dt: f64) -> Result<Trajectory> {
    let steps = check_inputs(model, x0, v0, t_end, dt)?;
    if model.acceleration_dependent() {
        return Err(Error::Config(
            "nonlinear force depends on acceleration: use the Newmark integrator".into(),
        ));
    }
    let n = model.dofs();
    let lu = Lu::factor(model.mass())?;
    let zeros = vec![0.0; n];
    let accel = |x: &[f64], v: &[f64], t: f64| -> Result<Vec<f64>> {
        let mut rhs = vec![0.0; n];
        load(model, x, v, &zeros, phase_of(model, omega, t), omega, &mut rhs)?;
        Ok(lu.solve(&rhs))
    };
    let axpy = |y: &[f64], s: f64, d: &[f64]| -> Vec<f64> { y.iter().zip(d).map(|(a, b)| a + s * b).collect() };

    let mut traj = Trajectory::new(n, dt, steps + 1);
    let mut x = x0.to_vec();
    let mut v = v0.to_vec();
    traj.push(&x, &v);
    for step in 0..steps {
        let t = step as f64 * dt;
        let h = 0.5 * dt;
        let a1 = accel(&x, &v, t)?;
        let (x2, v2) = (axpy(&x, h, &v), axpy(&v, h, &a1));
        let a2 = accel(&x2, &v2, t + h)?;
        let (x3, v3) = (axpy(&x, h, &v2), axpy(&v, h, &a2));
        let a3 = accel(&x3, &v3, t + h)?;
        let (x4, v4) = (axpy(&x, dt, &v3), axpy(&v, dt, &a3));
        let a4 = accel(&x4, &v4, t + dt)?;
        for i in 0..n {
            x[i] += dt / 6.0 * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]);
            v[i] += dt / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]);
        }
        if x.iter().chain(&v).any(|s| !s.is_finite()) {
            return Err(Error::NonFinite { step: step + 1 });
        }
        traj.push(&x, &v);
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewmarkSettings {
    pub beta: f64,
    pub gamma: f64,
    /// Smallest substep tried after inner-Newton failures.
    pub dt_min: f64,
    /// Relative tolerance on the acceleration update.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewmarkSettings {
    fn default() -> Self {
        Self {
            beta: 0.25,
            gamma: 0.5,
            dt_min: 1e-12,
            tol: 1e-10,
            max_iter: 20,
        }
    }
}

/// Solves `M a + C v + K x + f_N(a, v, x) = F` for `a`, with `x` and `v`
/// affine in `a`: `x = xp + bx a`, `v = vp + bv a`.
fn solve_acceleration<M: SystemModel>(
    model: &M,
    guess: &[f64],
    (xp, bx): (&[f64], f64),
    (vp, bv): (&[f64], f64),
    phase: f64,
    omega: f64,
    s: &NewmarkSettings,
) -> core::result::Result<Vec<f64>, alloc::string::String> {
    let n = model.dofs();
    let m = model.mass();
    let mut a = guess.to_vec();
    for _ in 0..s.max_iter {
        let (r, j) = jacobian_with_values(
            |av| {
                let x: Vec<Var<'_>> = av.iter().zip(xp).map(|(ai, p)| *ai * bx + *p).collect();
                let v: Vec<Var<'_>> = av.iter().zip(vp).map(|(ai, p)| *ai * bv + *p).collect();
                let mut out = vec![Var::constant(0.0); n];
                load(model, &x, &v, av, phase, omega, &mut out)?;
                Ok((0..n).map(|i| Var::dot(m.row(i), av) - out[i]).collect())
            },
            &a,
        )
        .map_err(|e| format!("{e}"))?;
        let step = Lu::factor(&j).map_err(|e| format!("{e}"))?.solve(&r);
        a.iter_mut().zip(&step).for_each(|(ai, d)| *ai -= d);
        if a.iter().any(|v| !v.is_finite()) {
            return Err("non-finite acceleration".into());
        }
        let scale = norm_inf(&a).max(f64::MIN_POSITIVE);
        if norm_inf(&step) <= s.tol * scale || step.iter().all(|d| *d == 0.0) {
            return Ok(a);
        }
    }
    Err(format!("inner Newton did not converge in {} iterations", s.max_iter))
}

/// Newmark-beta integration with `dt` fixed for the output samples. A step
/// whose inner Newton fails is retried as two half steps, recursively down
/// to `settings.dt_min`.
pub fn newmark<M: SystemModel>(
    model: &M,
    x0: &[f64],
    v0: &[f64],
    omega: f64,
    t_end: f64,
    dt: f64,
    settings: &NewmarkSettings,
) -> Result<Trajectory> {
    let steps = check_inputs(model, x0, v0, t_end, dt)?;
    if !(settings.beta > 0.0 && settings.gamma >= 0.5 && settings.dt_min > 0.0) {
        return Err(Error::Config(format!("invalid Newmark settings: {settings:?}")));
    }
    let n = model.dofs();
    let mut x = x0.to_vec();
    let mut v = v0.to_vec();
    let mut a = solve_acceleration(model, &vec![0.0; n], (&x, 0.0), (&v, 0.0), phase_of(model, omega, 0.0), omega, settings)
        .map_err(|reason| Error::StepFailure { time: 0.0, reason })?;
    let mut traj = Trajectory::new(n, dt, steps + 1);
    traj.push(&x, &v);
    for step in 0..steps {
        let t0 = step as f64 * dt;
        advance(model, &mut x, &mut v, &mut a, t0, dt, omega, settings)?;
        if x.iter().chain(&v).any(|s| !s.is_finite()) {
            return Err(Error::NonFinite { step: step + 1 });
        }
        traj.push(&x, &v);
    }
    Ok(traj)
}

#[allow(clippy::too_many_arguments)]
fn advance<M: SystemModel>(
    model: &M,
    x: &mut Vec<f64>,
    v: &mut Vec<f64>,
    a: &mut Vec<f64>,
    t0: f64,
    h: f64,
    omega: f64,
    s: &NewmarkSettings,
) -> Result<()> {
    let (beta, gamma) = (s.beta, s.gamma);
    let xp: Vec<f64> = (0..x.len()).map(|i| x[i] + h * v[i] + h * h * (0.5 - beta) * a[i]).collect();
    let vp: Vec<f64> = (0..x.len()).map(|i| v[i] + h * (1.0 - gamma) * a[i]).collect();
    let phase = phase_of(model, omega, t0 + h);
    match solve_acceleration(model, a, (&xp, beta * h * h), (&vp, gamma * h), phase, omega, s) {
        Ok(a_new) => {
            for i in 0..x.len() {
                x[i] = xp[i] + beta * h * h * a_new[i];
                v[i] = vp[i] + gamma * h * a_new[i];
            }
            *a = a_new;
            Ok(())
        }
        Err(reason) => {
            if 0.5 * h < s.dt_min {
                return Err(Error::StepFailure { time: t0, reason });
            }
            log::debug!("Newmark step at t = {t0} halved: {reason}");
            advance(model, x, v, a, t0, 0.5 * h, omega, s)?;
            advance(model, x, v, a, t0 + 0.5 * h, 0.5 * h, omega, s)
        }
    }
}

/// Harmonic content of the final response period of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    /// Coefficients referred to the absolute response phase `w t / q`.
    pub coeffs: HarmonicCoefficients,
    /// Peak `|x_i|` over the final period.
    pub amplitudes: Vec<f64>,
    /// RMS difference of the last two periods relative to the RMS of the
    /// last one.
    pub rms_change: f64,
    /// `false` when `rms_change` exceeds 1%.
    pub steady: bool,
}

/// Projects the last `period` of `traj` onto `set`. `period` must be an
/// integer multiple of the step and the trajectory must span at least
/// `discard_periods + 1` periods (and two periods in any case).
pub fn steady_state_extract(
    traj: &Trajectory,
    period: f64,
    discard_periods: usize,
    set: &HarmonicSet,
) -> Result<SteadyState> {
    let ratio = period / traj.dt();
    let per = libm::round(ratio) as usize;
    if per == 0 || (ratio - per as f64).abs() > 1e-6 * ratio {
        return Err(Error::Config(format!("period {period} is not a multiple of the step {}", traj.dt())));
    }
    let need = (discard_periods + 1).max(2) * per;
    if traj.len() < need + 1 {
        return Err(Error::Config(format!(
            "trajectory has {} samples; {} periods of {per} samples are required",
            traj.len(),
            need / per
        )));
    }
    let n = traj.dofs();
    let last = traj.len() - 1;
    let start = last - per;
    let tables = BasisTables::build(set, TimeGrid::new(per))?;
    let mut samples = vec![0.0; n * per];
    let (mut diff2, mut norm2) = (0.0, 0.0);
    let mut amplitudes = vec![0.0f64; n];
    for k in 0..per {
        let cur = traj.displacement(start + k);
        let prev = traj.displacement(start + k - per);
        for i in 0..n {
            samples[i * per + k] = cur[i];
            diff2 += (cur[i] - prev[i]) * (cur[i] - prev[i]);
            norm2 += cur[i] * cur[i];
            amplitudes[i] = amplitudes[i].max(cur[i].abs());
        }
    }
    let local = tables.dft(&samples, n)?;
    // rotate from the window-local phase to the absolute phase
    let tau0 = 2.0 * core::f64::consts::PI * (start as f64 / ratio);
    let mut coeffs = HarmonicCoefficients::zeros(set, n);
    let c = set.coeffs_per_dof();
    for i in 0..n {
        for &j in set.indices() {
            if j == 0 {
                coeffs.set_coeff(i, 0, Component::Cos, local[i * c])?;
                continue;
            }
            let a = local[i * c + set.position(j, Component::Cos).expect("index in set")];
            let b = local[i * c + set.position(j, Component::Sin).expect("index in set")];
            let (s, co) = (libm::sin(j as f64 * tau0), libm::cos(j as f64 * tau0));
            coeffs.set_coeff(i, j, Component::Cos, a * co - b * s)?;
            coeffs.set_coeff(i, j, Component::Sin, a * s + b * co)?;
        }
    }
    let rms_change = if norm2 > 0.0 { libm::sqrt(diff2 / norm2) } else { libm::sqrt(diff2) };
    Ok(SteadyState {
        coeffs,
        amplitudes,
        rms_change,
        steady: rms_change <= 0.01,
    })
}

/// Response period `2 pi q / w` of a model driven at `omega`.
pub fn response_period<M: SystemModel>(model: &M, omega: f64) -> f64 {
    2.0 * core::f64::consts::PI * model.period_divisor() as f64 / omega
}
