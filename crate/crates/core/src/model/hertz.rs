use alloc::format;
use core::f64::consts::PI;

use crate::ad::Scalar;
use crate::error::{Error, Result};

use super::{require_positive, unknown_param, Parameters};

/// Rolling-element bearing with Hertzian contacts, radial clearance and
/// ball-passage stiffness modulation.
#[derive(Debug, Clone, PartialEq)]
pub struct HertzBearing {
    /// Contact stiffness `k_b` [N/m^exponent].
    pub stiffness: f64,
    /// Contact exponent: 3/2 for balls, 10/9 for rollers.
    pub exponent: f64,
    /// Radial clearance [m].
    pub clearance: f64,
    pub balls: u32,
    /// Cage speed as a fraction of the reference shaft speed.
    pub cage_ratio: f64,
    /// Relative amplitude of the stiffness modulation at ball-passage
    /// frequency.
    pub stiffness_variation: f64,
}

impl Default for HertzBearing {
    fn default() -> Self {
        Self {
            stiffness: 1.0e7,
            exponent: 1.5,
            clearance: 2.0e-4,
            balls: 8,
            cage_ratio: 0.4,
            stiffness_variation: 0.02,
        }
    }
}

impl HertzBearing {
    /// Force `(F_x, F_y)` transmitted for relative displacement `(dx, dy)`
    /// of the inner race with the cage at angle `cage_angle` [rad].
    pub fn force<S: Scalar>(&self, dx: S, dy: S, cage_angle: f64) -> (S, S) {
        let nb = self.balls as f64;
        let k = self.stiffness * (1.0 + self.stiffness_variation * libm::cos(nb * cage_angle));
        let mut fx = S::zero();
        let mut fy = S::zero();
        for i in 0..self.balls {
            let phi = cage_angle + 2.0 * PI * i as f64 / nb;
            let (c, s) = (libm::cos(phi), libm::sin(phi));
            let deflection = dx * c + dy * s - self.clearance;
            let contact = deflection.pos_part().powf(self.exponent) * k;
            fx = fx + contact * c;
            fy = fy + contact * s;
        }
        (fx, fy)
    }
}

impl Parameters for HertzBearing {
    fn set_param(&mut self, key: &str, value: f64) -> Result<()> {
        match key {
            "contact_stiffness" => self.stiffness = value,
            "contact_exponent" => self.exponent = value,
            "bearing_clearance" => self.clearance = value,
            "balls" => {
                if !(value >= 1.0 && value == libm::trunc(value)) {
                    return Err(Error::Config("balls must be a positive integer".into()));
                }
                self.balls = value as u32;
            }
            "cage_ratio" => self.cage_ratio = value,
            "stiffness_variation" => self.stiffness_variation = value,
            _ => return Err(unknown_param("hertz bearing", key)),
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        require_positive("contact_stiffness", self.stiffness)?;
        if !(self.exponent > 1.0) {
            return Err(Error::Config(format!(
                "contact exponent must exceed 1, got {}",
                self.exponent
            )));
        }
        if !(self.clearance >= 0.0) {
            return Err(Error::Config("bearing clearance must be >= 0".into()));
        }
        if !(self.stiffness_variation.abs() < 1.0) || !self.cage_ratio.is_finite() {
            return Err(Error::Config("stiffness variation must lie in (-1, 1)".into()));
        }
        Ok(())
    }
}
