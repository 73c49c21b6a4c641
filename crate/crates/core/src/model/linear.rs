use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::ad::Scalar;
use crate::error::{Error, Result};
use crate::linalg::Mat;

use super::{unknown_param, Parameters, SystemModel};

/// Linear system `M x'' + C x' + K x = f cos(w t)` with a fixed forcing
/// amplitude per DOF.
#[derive(Debug, Clone)]
pub struct LinearModel {
    m: Mat,
    c: Mat,
    k: Mat,
    forcing: Vec<f64>,
}

impl LinearModel {
    pub fn new(m: Mat, c: Mat, k: Mat, forcing: Vec<f64>) -> Result<Self> {
        let model = Self { m, c, k, forcing };
        model.validate()?;
        Ok(model)
    }

    /// Two masses in a chain: `M = I`, `K = [[2, -1], [-1, 2]]`,
    /// `C = 0.05 K`, unit forcing on DOF 0.
    pub fn two_dof() -> Self {
        let k = Mat::from_rows(&[[2.0, -1.0], [-1.0, 2.0]]);
        Self {
            m: Mat::identity(2),
            c: k.scaled(0.05),
            k,
            forcing: vec![1.0, 0.0],
        }
    }

    pub fn forcing(&self) -> &[f64] {
        &self.forcing
    }
}

impl Parameters for LinearModel {
    fn set_param(&mut self, key: &str, value: f64) -> Result<()> {
        // keys: m<i>, c<i><j>, k<i><j> (0-based, symmetric), f<i>
        let n = self.forcing.len();
        let idx = |s: &str| -> Option<usize> { s.parse().ok().filter(|&i: &usize| i < n) };
        let bad = || unknown_param("linear", key);
        let (head, rest) = key.split_at(1.min(key.len()));
        match head {
            "m" => {
                let i = idx(rest).ok_or_else(bad)?;
                self.m[(i, i)] = value;
            }
            "f" => {
                let i = idx(rest).ok_or_else(bad)?;
                self.forcing[i] = value;
            }
            "c" | "k" if rest.len() == 2 => {
                let i = idx(&rest[..1]).ok_or_else(bad)?;
                let j = idx(&rest[1..]).ok_or_else(bad)?;
                let target = if head == "c" { &mut self.c } else { &mut self.k };
                target[(i, j)] = value;
                target[(j, i)] = value;
            }
            _ => return Err(bad()),
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let n = self.forcing.len();
        for (name, mat) in [("M", &self.m), ("C", &self.c), ("K", &self.k)] {
            if mat.rows() != n || mat.cols() != n {
                return Err(Error::Config(format!("{name} must be {n}x{n}")));
            }
        }
        if (0..n).any(|i| !(self.m[(i, i)] > 0.0)) {
            return Err(Error::Config("masses must be positive".into()));
        }
        Ok(())
    }
}

impl SystemModel for LinearModel {
    fn dofs(&self) -> usize {
        self.forcing.len()
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
        false
    }

    fn nonlinear_force<S: Scalar>(
        &self,
        _acc: &[S],
        _vel: &[S],
        _disp: &[S],
        _phase: f64,
        _omega: S,
        out: &mut [S],
    ) -> Result<()> {
        out.iter_mut().for_each(|o| *o = S::zero());
        Ok(())
    }

    fn excitation<S: Scalar>(&self, phase: f64, _omega: S, out: &mut [S]) {
        let c = libm::cos(phase);
        for (o, f) in out.iter_mut().zip(&self.forcing) {
            *o = S::cst(f * c);
        }
    }
}
