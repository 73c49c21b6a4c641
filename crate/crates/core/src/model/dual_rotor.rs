use alloc::format;

use crate::ad::Scalar;
use crate::error::{Error, Result};
use crate::linalg::Mat;

use super::{require_positive, unknown_param, HertzBearing, Parameters, SystemModel};

/// Parameters of the reduced dual-rotor model. SI units.
///
/// The low-pressure (LP) rotor spins at `w` (the drive frequency) and the
/// high-pressure (HP) rotor at `w p / q`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualRotorParams {
    pub lp_disk_mass: f64,
    pub lp_journal_mass: f64,
    pub lp_support_stiffness: f64,
    pub lp_support_damping: f64,
    pub lp_eccentricity: f64,
    pub hp_disk_mass: f64,
    pub hp_journal_mass: f64,
    pub hp_support_stiffness: f64,
    pub hp_support_damping: f64,
    pub hp_eccentricity: f64,
    /// Disk-to-journal shaft stiffness (both rotors).
    pub shaft_stiffness: f64,
    pub shaft_damping: f64,
    /// Linear LP-disk to HP-disk coupling (shared casing path).
    pub coupling_stiffness: f64,
    pub coupling_damping: f64,
    /// Speed ratio numerator `p` (HP).
    pub p: u32,
    /// Speed ratio denominator `q` (LP).
    pub q: u32,
    pub bearing: HertzBearing,
}

impl Default for DualRotorParams {
    fn default() -> Self {
        Self {
            lp_disk_mass: 10.0,
            lp_journal_mass: 1.0,
            lp_support_stiffness: 2.6e5,
            lp_support_damping: 60.0,
            lp_eccentricity: 2.0e-5,
            hp_disk_mass: 8.0,
            hp_journal_mass: 1.0,
            hp_support_stiffness: 1.2e6,
            hp_support_damping: 50.0,
            hp_eccentricity: 1.0e-4,
            shaft_stiffness: 2.0e6,
            shaft_damping: 20.0,
            coupling_stiffness: 1.5e5,
            coupling_damping: 0.0,
            p: 6,
            q: 5,
            bearing: HertzBearing::default(),
        }
    }
}

fn integer(key: &str, value: f64) -> Result<u32> {
    if value >= 1.0 && value == libm::trunc(value) && value < u32::MAX as f64 {
        Ok(value as u32)
    } else {
        Err(Error::Config(format!("`{key}` must be a positive integer")))
    }
}

impl Parameters for DualRotorParams {
    fn set_param(&mut self, key: &str, value: f64) -> Result<()> {
        match key {
            "lp_disk_mass" => self.lp_disk_mass = value,
            "lp_journal_mass" => self.lp_journal_mass = value,
            "lp_support_stiffness" => self.lp_support_stiffness = value,
            "lp_support_damping" => self.lp_support_damping = value,
            "lp_eccentricity" => self.lp_eccentricity = value,
            "hp_disk_mass" => self.hp_disk_mass = value,
            "hp_journal_mass" => self.hp_journal_mass = value,
            "hp_support_stiffness" => self.hp_support_stiffness = value,
            "hp_support_damping" => self.hp_support_damping = value,
            "hp_eccentricity" => self.hp_eccentricity = value,
            "shaft_stiffness" => self.shaft_stiffness = value,
            "shaft_damping" => self.shaft_damping = value,
            "coupling_stiffness" => self.coupling_stiffness = value,
            "coupling_damping" => self.coupling_damping = value,
            "p" => self.p = integer(key, value)?,
            "q" => self.q = integer(key, value)?,
            other => {
                return self
                    .bearing
                    .set_param(other, value)
                    .map_err(|_| unknown_param("dual_rotor", key))
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lp_disk_mass", self.lp_disk_mass),
            ("lp_journal_mass", self.lp_journal_mass),
            ("lp_support_stiffness", self.lp_support_stiffness),
            ("lp_support_damping", self.lp_support_damping),
            ("hp_disk_mass", self.hp_disk_mass),
            ("hp_journal_mass", self.hp_journal_mass),
            ("hp_support_stiffness", self.hp_support_stiffness),
            ("hp_support_damping", self.hp_support_damping),
            ("shaft_stiffness", self.shaft_stiffness),
        ] {
            require_positive(name, v)?;
        }
        for (name, v) in [
            ("lp_eccentricity", self.lp_eccentricity),
            ("hp_eccentricity", self.hp_eccentricity),
            ("shaft_damping", self.shaft_damping),
            ("coupling_stiffness", self.coupling_stiffness),
            ("coupling_damping", self.coupling_damping),
        ] {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("`{name}` must be >= 0")));
            }
        }
        self.bearing.validate()?;
        // the ball pattern must repeat within one response period
        let turns = self.bearing.balls as f64 * self.bearing.cage_ratio * self.q as f64;
        if (turns - libm::round(turns)).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "balls x cage_ratio x q = {turns} must be an integer for a periodic response"
            )));
        }
        Ok(())
    }
}

/// Two coaxial Jeffcott rotors joined by an inter-shaft rolling bearing.
///
/// Nodes: LP disk, LP journal, HP disk, HP journal; DOFs are `(x, y)` per
/// node in that order. Each disk sits on a support spring; each journal is
/// tied to its disk by a shaft spring; the journals interact through a
/// [`HertzBearing`].
#[derive(Debug, Clone)]
pub struct DualRotor {
    params: DualRotorParams,
    m: Mat,
    c: Mat,
    k: Mat,
}

impl DualRotor {
    pub fn new(params: DualRotorParams) -> Result<Self> {
        params.validate()?;
        let p = &params;
        let mut m = Mat::zeros(8, 8);
        let mut c = Mat::zeros(8, 8);
        let mut k = Mat::zeros(8, 8);
        let masses = [p.lp_disk_mass, p.lp_journal_mass, p.hp_disk_mass, p.hp_journal_mass];
        for (node, mass) in masses.iter().enumerate() {
            for d in 0..2 {
                m[(2 * node + d, 2 * node + d)] = *mass;
            }
        }
        let ground = |mat: &mut Mat, node: usize, v: f64| {
            for d in 0..2 {
                mat[(2 * node + d, 2 * node + d)] += v;
            }
        };
        ground(&mut k, 0, p.lp_support_stiffness);
        ground(&mut c, 0, p.lp_support_damping);
        ground(&mut k, 2, p.hp_support_stiffness);
        ground(&mut c, 2, p.hp_support_damping);
        let link = |mat: &mut Mat, a: usize, b: usize, v: f64| {
            for d in 0..2 {
                let (i, j) = (2 * a + d, 2 * b + d);
                mat[(i, i)] += v;
                mat[(j, j)] += v;
                mat[(i, j)] -= v;
                mat[(j, i)] -= v;
            }
        };
        link(&mut k, 0, 1, p.shaft_stiffness);
        link(&mut c, 0, 1, p.shaft_damping);
        link(&mut k, 2, 3, p.shaft_stiffness);
        link(&mut c, 2, 3, p.shaft_damping);
        link(&mut k, 0, 2, p.coupling_stiffness);
        link(&mut c, 0, 2, p.coupling_damping);
        Ok(Self { params, m, c, k })
    }

    pub fn params(&self) -> &DualRotorParams {
        &self.params
    }

    /// HP-to-LP speed ratio `p / q`.
    pub fn speed_ratio(&self) -> f64 {
        self.params.p as f64 / self.params.q as f64
    }

    /// Cage angle at response phase `phase`.
    pub fn cage_angle(&self, phase: f64) -> f64 {
        self.params.bearing.cage_ratio * self.params.q as f64 * phase
    }
}

impl SystemModel for DualRotor {
    fn dofs(&self) -> usize {
        8
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
    fn period_divisor(&self) -> u32 {
        self.params.q
    }

    fn nonlinear_force<S: Scalar>(
        &self,
        _acc: &[S],
        _vel: &[S],
        disp: &[S],
        phase: f64,
        _omega: S,
        out: &mut [S],
    ) -> Result<()> {
        let dx = disp[2] - disp[6];
        let dy = disp[3] - disp[7];
        let (fx, fy) = self.params.bearing.force(dx, dy, self.cage_angle(phase));
        out.iter_mut().for_each(|o| *o = S::zero());
        out[2] = fx;
        out[3] = fy;
        out[6] = -fx;
        out[7] = -fy;
        Ok(())
    }

    fn excitation<S: Scalar>(&self, phase: f64, omega: S, out: &mut [S]) {
        let p = &self.params;
        let w2 = omega * omega;
        let lp = w2 * (p.lp_disk_mass * p.lp_eccentricity);
        let ratio = self.speed_ratio();
        let hp = w2 * (p.hp_disk_mass * p.hp_eccentricity * ratio * ratio);
        let (a_lp, a_hp) = (p.q as f64 * phase, p.p as f64 * phase);
        out.iter_mut().for_each(|o| *o = S::zero());
        out[0] = lp * libm::cos(a_lp);
        out[1] = lp * libm::sin(a_lp);
        out[4] = hp * libm::cos(a_hp);
        out[5] = hp * libm::sin(a_hp);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{BasisTables, Component, HarmonicSet, TimeGrid};
    use alloc::vec;
    use alloc::vec::Vec;

    #[test]
    fn excitation_lives_on_indices_q_and_p() {
        let rotor = DualRotor::new(DualRotorParams::default()).unwrap();
        assert!((rotor.speed_ratio() - 1.2).abs() < 1e-15);
        let set = HarmonicSet::contiguous(12);
        let t = BasisTables::build(&set, TimeGrid::default_for(&set)).unwrap();
        let n = t.samples();
        let mut samples = vec![0.0; 8 * n];
        let mut f = vec![0.0; 8];
        for k in 0..n {
            rotor.excitation(t.grid().tau(k), 150.0, &mut f);
            for i in 0..8 {
                samples[i * n + k] = f[i];
            }
        }
        let spec = t.dft(&samples, 8).unwrap();
        let c = set.coeffs_per_dof();
        let active: Vec<(usize, u32)> = (0..8)
            .flat_map(|i| (0..c).map(move |p| (i, p)))
            .filter(|&(i, p)| spec[i * c + p].abs() > 1e-9)
            .map(|(i, p)| (i, set.slot(p).0))
            .collect();
        for (dof, j) in &active {
            match dof {
                0 | 1 => assert_eq!(*j, 5),
                4 | 5 => assert_eq!(*j, 6),
                _ => panic!("unexpected excitation on dof {dof}"),
            }
        }
        let d = DualRotorParams::default();
        let lp = spec[set.position(5, Component::Cos).unwrap()];
        assert!((lp - d.lp_disk_mass * d.lp_eccentricity * 150.0 * 150.0).abs() < 1e-9);
        let hp = spec[4 * c + set.position(6, Component::Cos).unwrap()];
        let w2 = 150.0 * 1.2;
        assert!((hp - d.hp_disk_mass * d.hp_eccentricity * w2 * w2).abs() < 1e-9 * hp);
    }

    #[test]
    fn non_periodic_cage_is_rejected() {
        let mut p = DualRotorParams::default();
        p.bearing.cage_ratio = 0.41;
        assert!(DualRotor::new(p).is_err());
    }

    #[test]
    fn bearing_forces_are_equal_and_opposite() {
        let rotor = DualRotor::new(DualRotorParams::default()).unwrap();
        let mut disp = [0.0; 8];
        disp[2] = 5e-4;
        disp[7] = -2e-4;
        let mut out = [0.0; 8];
        rotor.nonlinear_force(&[0.0; 8], &[0.0; 8], &disp, 0.3, 150.0, &mut out).unwrap();
        assert!(out[2] > 0.0);
        assert_eq!(out[2], -out[6]);
        assert_eq!(out[3], -out[7]);
    }
}
