//! System definitions of the form
//!
//! ```text
//! M x'' + (C + w G) x' + K x + f_N(x'', x', x, tau) = F(tau, w)
//! ```
//!
//! in physical time, where `w` is the drive frequency (the continuation
//! parameter) and `tau` is the phase of the response period. A model whose
//! response period is `q` drive periods (dual-frequency excitation) reports
//! `q` from [`SystemModel::period_divisor`]; then `tau = (w / q) t`.

mod duffing;
mod dual_rotor;
mod hertz;
mod linear;
mod sfd;

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub use duffing::Duffing;
pub use dual_rotor::{DualRotor, DualRotorParams};
pub use hertz::HertzBearing;
pub use linear::LinearModel;
pub use sfd::{sfd_force, sommerfeld_integral, GaussLegendre, JournalState, SfdRotor, SfdRotorParams};

use crate::ad::Scalar;
use crate::error::{Error, Result};
use crate::fourier::BasisTables;
use crate::linalg::Mat;

/// A second-order dynamical system whose nonlinear force can be evaluated on
/// any [`Scalar`].
pub trait SystemModel {
    fn dofs(&self) -> usize;
    fn mass(&self) -> &Mat;
    /// Speed-independent damping.
    fn damping(&self) -> &Mat;
    /// Speed-proportional part `G` of the damping (gyroscopic coupling).
    fn gyroscopic(&self) -> Option<&Mat> {
        None
    }
    fn stiffness(&self) -> &Mat;

    /// Number of drive periods in one response period.
    fn period_divisor(&self) -> u32 {
        1
    }

    /// `false` when `f_N` is identically zero.
    fn is_nonlinear(&self) -> bool {
        true
    }

    /// `true` when `f_N` depends on accelerations.
    fn acceleration_dependent(&self) -> bool {
        false
    }

    /// Writes `f_N(acc, vel, disp, phase)` into `out`. Velocities and
    /// accelerations are physical time derivatives.
    fn nonlinear_force<S: Scalar>(
        &self,
        acc: &[S],
        vel: &[S],
        disp: &[S],
        phase: f64,
        omega: S,
        out: &mut [S],
    ) -> Result<()>;

    /// Writes the external force at response phase `phase` into `out`.
    fn excitation<S: Scalar>(&self, phase: f64, omega: S, out: &mut [S]);

    /// Full damping matrix `C + w G` at drive frequency `omega`.
    fn damping_at(&self, omega: f64) -> Mat {
        match self.gyroscopic() {
            Some(g) => self.damping().add(&g.scaled(omega)),
            None => self.damping().clone(),
        }
    }
}

/// Residual `R = M x_tt + (C + w G) x_t + K x + f_N - F` sampled on the grid,
/// given the tau-derivatives `x2 = X''`, `x1 = X'`, `x0 = X` (DOF-major, one
/// block of `N` samples per DOF).
pub fn residual_timeseries<M: SystemModel, S: Scalar>(
    model: &M,
    tables: &BasisTables,
    x2: &[S],
    x1: &[S],
    x0: &[S],
    omega: S,
) -> Result<Vec<S>> {
    let n = model.dofs();
    let samples = tables.samples();
    for s in [x2, x1, x0] {
        if s.len() != n * samples {
            return Err(Error::Shape {
                expected: n * samples,
                got: s.len(),
            });
        }
    }
    let base = omega / model.period_divisor() as f64;
    let base2 = base * base;
    let (m, c, k) = (model.mass(), model.damping(), model.stiffness());
    let g = model.gyroscopic();
    let nonlinear = model.is_nonlinear();

    let zero = S::zero();
    let mut acc = vec![zero; n];
    let mut vel = vec![zero; n];
    let mut disp = vec![zero; n];
    let mut f_n = vec![zero; n];
    let mut f_ex = vec![zero; n];
    let mut out = vec![zero; n * samples];
    for s in 0..samples {
        for i in 0..n {
            acc[i] = x2[i * samples + s] * base2;
            vel[i] = x1[i * samples + s] * base;
            disp[i] = x0[i * samples + s];
        }
        let phase = tables.grid().tau(s);
        if nonlinear {
            model
                .nonlinear_force(&acc, &vel, &disp, phase, omega, &mut f_n)
                .map_err(|e| Error::AtSample {
                    sample: s,
                    source: Box::new(e),
                })?;
        }
        model.excitation(phase, omega, &mut f_ex);
        for i in 0..n {
            let mut r = S::dot(m.row(i), &acc) + S::dot(c.row(i), &vel) + S::dot(k.row(i), &disp);
            if let Some(g) = g {
                r = r + S::dot(g.row(i), &vel) * omega;
            }
            if nonlinear {
                r = r + f_n[i];
            }
            out[i * samples + s] = r - f_ex[i];
        }
    }
    Ok(out)
}

/// Named parameter assignment used for configuration overrides.
pub trait Parameters {
    fn set_param(&mut self, key: &str, value: f64) -> Result<()>;
    fn validate(&self) -> Result<()>;
}

pub(crate) fn unknown_param(model: &str, key: &str) -> Error {
    Error::Config(format!("unknown parameter `{key}` for model `{model}`"))
}

pub(crate) fn require_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("parameter `{name}` must be positive, got {v}")))
    }
}

/// The bundled models.
#[derive(Debug, Clone)]
pub enum Builtin {
    Duffing(Duffing),
    Linear(LinearModel),
    SfdRotor(SfdRotor),
    DualRotor(DualRotor),
}

impl Builtin {
    pub const NAMES: [&'static str; 4] = ["duffing", "linear", "sfd_rotor", "dual_rotor"];

    /// Builds a bundled model with parameter overrides applied and validated.
    pub fn new(name: &str, overrides: &[(&str, f64)]) -> Result<Self> {
        match name {
            "duffing" => {
                let mut m = Duffing::default();
                for (k, v) in overrides {
                    m.set_param(k, *v)?;
                }
                m.validate()?;
                Ok(Self::Duffing(m))
            }
            "linear" => {
                let mut m = LinearModel::two_dof();
                for (k, v) in overrides {
                    m.set_param(k, *v)?;
                }
                m.validate()?;
                Ok(Self::Linear(m))
            }
            "sfd_rotor" => {
                let mut p = SfdRotorParams::default();
                for (k, v) in overrides {
                    p.set_param(k, *v)?;
                }
                Ok(Self::SfdRotor(SfdRotor::new(p)?))
            }
            "dual_rotor" => {
                let mut p = DualRotorParams::default();
                for (k, v) in overrides {
                    p.set_param(k, *v)?;
                }
                Ok(Self::DualRotor(DualRotor::new(p)?))
            }
            other => Err(Error::Config(format!("unknown model `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Duffing(_) => "duffing",
            Self::Linear(_) => "linear",
            Self::SfdRotor(_) => "sfd_rotor",
            Self::DualRotor(_) => "dual_rotor",
        }
    }
}

macro_rules! delegate {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            Builtin::Duffing($m) => $e,
            Builtin::Linear($m) => $e,
            Builtin::SfdRotor($m) => $e,
            Builtin::DualRotor($m) => $e,
        }
    };
}

impl SystemModel for Builtin {
    fn dofs(&self) -> usize {
        delegate!(self, m => m.dofs())
    }
    fn mass(&self) -> &Mat {
        delegate!(self, m => m.mass())
    }
    fn damping(&self) -> &Mat {
        delegate!(self, m => m.damping())
    }
    fn gyroscopic(&self) -> Option<&Mat> {
        delegate!(self, m => m.gyroscopic())
    }
    fn stiffness(&self) -> &Mat {
        delegate!(self, m => m.stiffness())
    }
    fn period_divisor(&self) -> u32 {
        delegate!(self, m => m.period_divisor())
    }
    fn is_nonlinear(&self) -> bool {
        delegate!(self, m => m.is_nonlinear())
    }
    fn acceleration_dependent(&self) -> bool {
        delegate!(self, m => m.acceleration_dependent())
    }
    fn nonlinear_force<S: Scalar>(
        &self,
        acc: &[S],
        vel: &[S],
        disp: &[S],
        phase: f64,
        omega: S,
        out: &mut [S],
    ) -> Result<()> {
        delegate!(self, m => m.nonlinear_force(acc, vel, disp, phase, omega, out))
    }
    fn excitation<S: Scalar>(&self, phase: f64, omega: S, out: &mut [S]) {
        delegate!(self, m => m.excitation(phase, omega, out))
    }
}
