use crate::ad::Scalar;
use crate::error::{Error, Result};
use crate::linalg::Mat;

use super::{unknown_param, Parameters, SystemModel};

/// Forced Duffing oscillator in normalized units:
/// `x'' + 2 zeta x' + x + kappa x^3 = force cos(w t)`.
#[derive(Debug, Clone)]
pub struct Duffing {
    zeta: f64,
    kappa: f64,
    force: f64,
    m: Mat,
    c: Mat,
    k: Mat,
}

impl Default for Duffing {
    fn default() -> Self {
        Self::new(0.05, 1.0, 0.4).expect("valid defaults")
    }
}

impl Duffing {
    pub fn new(zeta: f64, kappa: f64, force: f64) -> Result<Self> {
        let d = Self {
            zeta,
            kappa,
            force,
            m: Mat::from_diag(&[1.0]),
            c: Mat::from_diag(&[2.0 * zeta]),
            k: Mat::from_diag(&[1.0]),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn force(&self) -> f64 {
        self.force
    }
}

impl Parameters for Duffing {
    fn set_param(&mut self, key: &str, value: f64) -> Result<()> {
        match key {
            "zeta" => self.zeta = value,
            "kappa" => self.kappa = value,
            "force" => self.force = value,
            _ => return Err(unknown_param("duffing", key)),
        }
        self.c = Mat::from_diag(&[2.0 * self.zeta]);
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if !(self.zeta >= 0.0) || !self.kappa.is_finite() || !self.force.is_finite() {
            return Err(Error::Config(
                "duffing requires zeta >= 0 and finite kappa, force".into(),
            ));
        }
        Ok(())
    }
}

impl SystemModel for Duffing {
    fn dofs(&self) -> usize {
        1
    }
    fn mass(&self) -> &Mat {
        &self.m
    }
    fn damping(&self) -> &Mat {
        &self.c
    }
    fn stiffness(&self) -> &Mat {
        &self.k
    }
    fn is_nonlinear(&self) -> bool {
        self.kappa != 0.0
    }

    fn nonlinear_force<S: Scalar>(
        &self,
        _acc: &[S],
        _vel: &[S],
        disp: &[S],
        _phase: f64,
        _omega: S,
        out: &mut [S],
    ) -> Result<()> {
        let x = disp[0];
        out[0] = x * x * x * self.kappa;
        Ok(())
    }

    fn excitation<S: Scalar>(&self, phase: f64, _omega: S, out: &mut [S]) {
        out[0] = S::cst(self.force * libm::cos(phase));
    }
}
