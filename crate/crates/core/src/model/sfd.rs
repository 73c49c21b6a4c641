use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::ad::Scalar;
use crate::error::{Error, Result};
use crate::linalg::Mat;

use super::{require_positive, unknown_param, Parameters, SystemModel};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        let n = order.max(1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let p = if n == 1 { x } else { p1 };
                let pm1 = if n == 1 { 1.0 } else { p0 };
                dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Sommerfeld integral
/// `I_3^{ln} = int_{theta1}^{theta1 + pi} sin^l cos^n / (1 + e cos)^3 dtheta`
/// by Gauss–Legendre quadrature, differentiable in `ratio` and `theta1`.
pub fn sommerfeld_integral<S: Scalar>(
    l: u32,
    n: u32,
    ratio: S,
    theta1: S,
    rule: &GaussLegendre,
) -> Result<S> {
    check_ratio(ratio.value())?;
    let mut acc = S::zero();
    for (xi, w) in rule.nodes().iter().zip(rule.weights()) {
        let theta = theta1 + 0.5 * PI * (xi + 1.0);
        let (s, c) = (theta.sin(), theta.cos());
        let d = c * ratio + 1.0;
        let mut num = S::cst(1.0);
        for _ in 0..l {
            num = num * s;
        }
        for _ in 0..n {
            num = num * c;
        }
        acc = acc + num / (d * d * d) * (0.5 * PI * w);
    }
    Ok(acc)
}

/// `(I_3^{11}, I_3^{02}, I_3^{20})` sharing one set of quadrature nodes.
fn sommerfeld_triplet<S: Scalar>(ratio: S, theta1: S, rule: &GaussLegendre) -> (S, S, S) {
    let (mut i11, mut i02, mut i20) = (S::zero(), S::zero(), S::zero());
    for (xi, w) in rule.nodes().iter().zip(rule.weights()) {
        let theta = theta1 + 0.5 * PI * (xi + 1.0);
        let (s, c) = (theta.sin(), theta.cos());
        let d = c * ratio + 1.0;
        let k = S::cst(0.5 * PI * w) / (d * d * d);
        i11 = i11 + s * c * k;
        i02 = i02 + c * c * k;
        i20 = i20 + s * s * k;
    }
    (i11, i02, i20)
}

fn check_ratio(r: f64) -> Result<()> {
    if !(r < 1.0) || r < 0.0 {
        return Err(Error::FilmRupture { ratio: r });
    }
    Ok(())
}

/// Position and velocity of the damper journal center.
#[derive(Debug, Clone, Copy)]
pub struct JournalState<S> {
    pub x: S,
    pub y: S,
    pub vx: S,
    pub vy: S,
}

impl<S: Scalar> JournalState<S> {
    /// Journal at distance `l1` from the disk of a rotor with state
    /// `(x, y, theta_x, theta_y)`.
    pub fn from_rotor(disp: &[S], vel: &[S], l1: f64) -> Self {
        Self {
            x: disp[0] + disp[3] * l1,
            y: disp[1] - disp[2] * l1,
            vx: vel[0] + vel[3] * l1,
            vy: vel[1] - vel[2] * l1,
        }
    }
}

/// Short-bearing squeeze-film force `(F_x, F_y)` on the journal.
///
/// `coefficient` is `mu R L^3 / delta_c^2`. The radial displacement is
/// regularized as `sqrt(r^2 + (1e-12 delta_c)^2)` so the centered state has
/// finite partials and zero force.
pub fn sfd_force<S: Scalar>(
    j: &JournalState<S>,
    coefficient: f64,
    clearance: f64,
    rule: &GaussLegendre,
) -> Result<(S, S)> {
    let eps = 1e-12 * clearance;
    let r2 = j.x * j.x + j.y * j.y;
    let radial = (r2 + eps * eps).sqrt();
    let ratio = radial / clearance;
    check_ratio(ratio.value())?;
    let cos_psi = j.x / radial;
    let sin_psi = j.y / radial;
    // precession rate and radial velocity
    let psi_dot = (j.x * j.vy - j.y * j.vx) / (radial * radial);
    let radial_dot = (j.x * j.vx + j.y * j.vy) / radial;
    let ratio_dot = radial_dot / clearance;

    // start of the positive-pressure half film
    let num = -radial_dot;
    let den = radial * psi_dot;
    let theta1 = if num.value() == 0.0 && den.value() == 0.0 {
        S::zero()
    } else {
        num.atan2(den)
    };

    let (i11, i02, i20) = sommerfeld_triplet(ratio, theta1, rule);
    let f_r = (i11 * psi_dot * ratio + i02 * ratio_dot) * coefficient;
    let f_t = (i20 * psi_dot * ratio + i11 * ratio_dot) * coefficient;
    let fx = f_r * cos_psi - f_t * sin_psi;
    let fy = f_r * sin_psi + f_t * cos_psi;
    Ok((fx, fy))
}

/// Parameters of the four-DOF rotor with a squeeze-film damper at the left
/// support. SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct SfdRotorParams {
    pub mass: f64,
    pub support_damping: f64,
    pub support_stiffness: f64,
    pub diametral_inertia: f64,
    pub polar_inertia: f64,
    pub l1: f64,
    pub l2: f64,
    pub eccentricity: f64,
    pub viscosity: f64,
    pub radius: f64,
    pub land_length: f64,
    pub clearance: f64,
    pub quadrature_order: usize,
}

impl Default for SfdRotorParams {
    fn default() -> Self {
        Self {
            mass: 10.0,
            support_damping: 100.0,
            support_stiffness: 5.0e5,
            diametral_inertia: 0.05,
            polar_inertia: 0.08,
            l1: 0.15,
            l2: 0.25,
            eccentricity: 2.0e-5,
            viscosity: 0.02,
            radius: 0.04,
            land_length: 0.015,
            clearance: 2.0e-4,
            quadrature_order: 32,
        }
    }
}

impl SfdRotorParams {
    /// `mu R L^3 / delta_c^2`.
    pub fn film_coefficient(&self) -> f64 {
        self.viscosity * self.radius * libm::pow(self.land_length, 3.0)
            / (self.clearance * self.clearance)
    }
}

impl Parameters for SfdRotorParams {
    fn set_param(&mut self, key: &str, value: f64) -> Result<()> {
        match key {
            "m" | "mass" => self.mass = value,
            "c" | "support_damping" => self.support_damping = value,
            "k" | "support_stiffness" => self.support_stiffness = value,
            "jd" | "diametral_inertia" => self.diametral_inertia = value,
            "jp" | "polar_inertia" => self.polar_inertia = value,
            "l1" => self.l1 = value,
            "l2" => self.l2 = value,
            "e" | "eccentricity" => self.eccentricity = value,
            "mu" | "viscosity" => self.viscosity = value,
            "r" | "radius" => self.radius = value,
            "land_length" => self.land_length = value,
            "delta_c" | "clearance" => self.clearance = value,
            "quadrature_order" => {
                if !(value >= 1.0 && value == libm::trunc(value)) {
                    return Err(Error::Config("quadrature_order must be a positive integer".into()));
                }
                self.quadrature_order = value as usize;
            }
            _ => return Err(unknown_param("sfd_rotor", key)),
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        require_positive("mass", self.mass)?;
        require_positive("support_damping", self.support_damping)?;
        require_positive("support_stiffness", self.support_stiffness)?;
        require_positive("diametral_inertia", self.diametral_inertia)?;
        require_positive("polar_inertia", self.polar_inertia)?;
        require_positive("l1", self.l1)?;
        require_positive("l2", self.l2)?;
        if !(self.eccentricity >= 0.0) {
            return Err(Error::Config("eccentricity must be >= 0".into()));
        }
        require_positive("viscosity", self.viscosity)?;
        require_positive("radius", self.radius)?;
        require_positive("land_length", self.land_length)?;
        require_positive("clearance", self.clearance)?;
        if self.polar_inertia >= 2.0 * self.diametral_inertia {
            return Err(Error::Config("polar inertia must be below 2 x diametral inertia".into()));
        }
        Ok(())
    }
}

/// Rigid rotor on two supports with an unbalanced disk and a squeeze-film
/// damper at the left support. DOFs: `(x, y, theta_x, theta_y)`.
#[derive(Debug, Clone)]
pub struct SfdRotor {
    params: SfdRotorParams,
    rule: GaussLegendre,
    m: Mat,
    c: Mat,
    g: Mat,
    k: Mat,
}

impl SfdRotor {
    pub fn new(params: SfdRotorParams) -> Result<Self> {
        params.validate()?;
        let p = &params;
        let (l1, l2) = (p.l1, p.l2);
        let sq = l1 * l1 + l2 * l2;
        let coupled = |s: f64, diag: f64| {
            Mat::from_rows(&[
                [diag * s, 0.0, 0.0, s * (l1 - l2)],
                [0.0, diag * s, s * (l2 - l1), 0.0],
                [0.0, s * (l2 - l1), s * sq, 0.0],
                [s * (l1 - l2), 0.0, 0.0, s * sq],
            ])
        };
        let c = coupled(p.support_damping, 2.0);
        let k = coupled(p.support_stiffness, 1.0);
        let mut g = Mat::zeros(4, 4);
        g[(2, 3)] = p.polar_inertia;
        g[(3, 2)] = -p.polar_inertia;
        let m = Mat::from_diag(&[p.mass, p.mass, p.diametral_inertia, p.diametral_inertia]);
        Ok(Self {
            rule: GaussLegendre::new(p.quadrature_order),
            params,
            m,
            c,
            g,
            k,
        })
    }

    pub fn params(&self) -> &SfdRotorParams {
        &self.params
    }

    pub fn rule(&self) -> &GaussLegendre {
        &self.rule
    }

    /// Film force at the damper journal for a rotor state.
    pub fn film_force<S: Scalar>(&self, disp: &[S], vel: &[S]) -> Result<(S, S)> {
        let j = JournalState::from_rotor(disp, vel, self.params.l1);
        sfd_force(&j, self.params.film_coefficient(), self.params.clearance, &self.rule)
    }
}

impl SystemModel for SfdRotor {
    fn dofs(&self) -> usize {
        4
    }
    fn mass(&self) -> &Mat {
        &self.m
    }
    fn damping(&self) -> &Mat {
        &self.c
    }
    fn gyroscopic(&self) -> Option<&Mat> {
        Some(&self.g)
    }
    fn stiffness(&self) -> &Mat {
        &self.k
    }

    fn nonlinear_force<S: Scalar>(
        &self,
        _acc: &[S],
        vel: &[S],
        disp: &[S],
        _phase: f64,
        _omega: S,
        out: &mut [S],
    ) -> Result<()> {
        let (fx, fy) = self.film_force(disp, vel)?;
        let l1 = self.params.l1;
        out[0] = fx;
        out[1] = fy;
        out[2] = -fy * l1;
        out[3] = fx * l1;
        Ok(())
    }

    fn excitation<S: Scalar>(&self, phase: f64, omega: S, out: &mut [S]) {
        let amp = omega * omega * (self.params.mass * self.params.eccentricity);
        out[0] = amp * libm::cos(phase);
        out[1] = amp * libm::sin(phase);
        out[2] = S::zero();
        out[3] = S::zero();
    }
}
