//! Truncated Fourier series over an explicit set of harmonic indices.
//!
//! A periodic signal in normalized time `tau` (period `2*pi`) is
//!
//! ```text
//! x(tau) = a_0 + sum_j (a_j cos(j tau) + b_j sin(j tau)),   j in indices \ {0}
//! ```
//!
//! Coefficients for one degree of freedom are laid out as
//! `[a_0, a_{j_1}, .., a_{j_m}, b_{j_1}, .., b_{j_m}]`, and several degrees of
//! freedom are concatenated DOF-major. Time series are stored the same way:
//! all samples of DOF 0, then all samples of DOF 1, and so on.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::ad::Scalar;
use crate::error::{Error, Result};

/// Strictly increasing harmonic indices starting with the DC term 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HarmonicSet {
    indices: Vec<u32>,
}

impl HarmonicSet {
    pub fn new(indices: Vec<u32>) -> Result<Self> {
        if indices.first() != Some(&0) {
            return Err(Error::Config("harmonic set must start with 0".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "harmonic indices must be strictly increasing".into(),
            ));
        }
        Ok(Self { indices })
    }

    /// `{0, 1, .., order}`.
    pub fn contiguous(order: u32) -> Self {
        Self {
            indices: (0..=order).collect(),
        }
    }

    /// Index set for two excitation frequencies `q * w_base` and
    /// `p * w_base` (speed ratio `p / q`): every `|a q + b p|` with
    /// `|a| + |b| <= order`.
    pub fn dual_frequency(p: u32, q: u32, order: u32) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::Config("dual-frequency p and q must be positive".into()));
        }
        let mut set = BTreeSet::new();
        let o = order as i64;
        for a in -o..=o {
            let rest = o - a.abs();
            for b in -rest..=rest {
                set.insert((a * q as i64 + b * p as i64).unsigned_abs() as u32);
            }
        }
        set.insert(0);
        Self::new(set.into_iter().collect())
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn k_max(&self) -> u32 {
        *self.indices.last().unwrap_or(&0)
    }

    /// Coefficients per degree of freedom: `2 |indices| - 1`.
    pub fn coeffs_per_dof(&self) -> usize {
        2 * self.indices.len() - 1
    }

    /// Harmonic index and kind of coefficient slot `p`.
    pub fn slot(&self, p: usize) -> (u32, Component) {
        let h = self.indices.len();
        if p == 0 {
            (0, Component::Cos)
        } else if p < h {
            (self.indices[p], Component::Cos)
        } else {
            (self.indices[p - h + 1], Component::Sin)
        }
    }

    /// Slot of the cosine (or sine) coefficient of harmonic `j`, if present.
    pub fn position(&self, j: u32, c: Component) -> Option<usize> {
        let i = self.indices.iter().position(|&x| x == j)?;
        match (i, c) {
            (0, Component::Cos) => Some(0),
            (0, Component::Sin) => None,
            (i, Component::Cos) => Some(i),
            (i, Component::Sin) => Some(self.indices.len() - 1 + i),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Cos,
    Sin,
}

/// `N` equispaced samples `tau_k = 2 pi k / N` over one normalized period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeGrid {
    samples: usize,
}

impl TimeGrid {
    pub fn new(samples: usize) -> Self {
        Self { samples }
    }

    /// Smallest power of two with at least `4 k_max` samples (minimum 4).
    pub fn default_for(set: &HarmonicSet) -> Self {
        let need = (4 * set.k_max() as usize).max(4);
        Self {
            samples: need.next_power_of_two(),
        }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn tau(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.samples as f64
    }
}

/// `(cos, sin)` of `2 pi m / n`, exact at quarter turns.
fn unit_circle(m: u64, n: u64) -> (f64, f64) {
    let m = m % n;
    if (4 * m) % n == 0 {
        return match 4 * m / n {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        };
    }
    let t = 2.0 * PI * m as f64 / n as f64;
    (libm::cos(t), libm::sin(t))
}

/// Sampled basis functions, their tau-derivatives, and the projection
/// weights that map samples back to coefficients.
#[derive(Debug, Clone)]
pub struct BasisTables {
    set: HarmonicSet,
    grid: TimeGrid,
    // synth[d] is N x C: d-th derivative of basis function p at sample k.
    synth: [Vec<f64>; 3],
    // C x N projection weights.
    proj: Vec<f64>,
}

impl BasisTables {
    pub fn build(set: &HarmonicSet, grid: TimeGrid) -> Result<Self> {
        let n = grid.samples();
        if n < 4 * set.k_max() as usize || n == 0 {
            return Err(Error::Config(format!(
                "time grid of {n} samples aliases harmonic {}; need at least {}",
                set.k_max(),
                4 * set.k_max()
            )));
        }
        let c = set.coeffs_per_dof();
        let mut synth = [vec![0.0; n * c], vec![0.0; n * c], vec![0.0; n * c]];
        let mut proj = vec![0.0; c * n];
        for p in 0..c {
            let (j, comp) = set.slot(p);
            let jf = j as f64;
            for k in 0..n {
                let (cs, sn) = unit_circle(j as u64 * k as u64, n as u64);
                let (f0, f1, f2) = match comp {
                    Component::Cos => (cs, -jf * sn, -jf * jf * cs),
                    Component::Sin => (sn, jf * cs, -jf * jf * sn),
                };
                synth[0][k * c + p] = f0;
                synth[1][k * c + p] = f1;
                synth[2][k * c + p] = f2;
                let w = if p == 0 { 1.0 } else { 2.0 };
                proj[p * n + k] = w * f0 / n as f64;
            }
        }
        Ok(Self {
            set: set.clone(),
            grid,
            synth,
            proj,
        })
    }

    pub fn set(&self) -> &HarmonicSet {
        &self.set
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn samples(&self) -> usize {
        self.grid.samples()
    }

    pub fn coeffs_per_dof(&self) -> usize {
        self.set.coeffs_per_dof()
    }

    /// Row `k` of the order-`d` synthesis table: the values at `tau_k` of
    /// the `d`-th derivative of every basis function.
    pub fn synthesis_row(&self, order: usize, k: usize) -> &[f64] {
        let c = self.coeffs_per_dof();
        &self.synth[order][k * c..(k + 1) * c]
    }

    /// Column of basis function `p` (order `d`) over all samples.
    pub fn synthesis_column(&self, order: usize, p: usize) -> Vec<f64> {
        (0..self.samples())
            .map(|k| self.synthesis_row(order, k)[p])
            .collect()
    }

    pub fn projection_row(&self, p: usize) -> &[f64] {
        let n = self.samples();
        &self.proj[p * n..(p + 1) * n]
    }

    /// Samples of the `order`-th tau-derivative of each DOF's series.
    pub fn evaluate<S: Scalar>(&self, coeffs: &[S], dofs: usize, order: usize) -> Result<Vec<S>> {
        let c = self.coeffs_per_dof();
        if coeffs.len() != dofs * c {
            return Err(Error::Shape {
                expected: dofs * c,
                got: coeffs.len(),
            });
        }
        if order > 2 {
            return Err(Error::Config(format!("derivative order {order} > 2")));
        }
        let n = self.samples();
        let mut out = Vec::with_capacity(dofs * n);
        for i in 0..dofs {
            let row = &coeffs[i * c..(i + 1) * c];
            for k in 0..n {
                out.push(S::dot(self.synthesis_row(order, k), row));
            }
        }
        Ok(out)
    }

    /// Projects DOF-major samples onto the harmonic set:
    /// `c_0 = (1/N) sum R`, `c_j = (2/N) sum R cos j tau`,
    /// `d_j = (2/N) sum R sin j tau`.
    pub fn dft<S: Scalar>(&self, samples: &[S], dofs: usize) -> Result<Vec<S>> {
        let n = self.samples();
        if samples.len() != dofs * n {
            return Err(Error::Shape {
                expected: dofs * n,
                got: samples.len(),
            });
        }
        let c = self.coeffs_per_dof();
        let mut out = Vec::with_capacity(dofs * c);
        for i in 0..dofs {
            let series = &samples[i * n..(i + 1) * n];
            for p in 0..c {
                out.push(S::dot(self.projection_row(p), series));
            }
        }
        Ok(out)
    }
}

/// Applies `d/dtau` `order` times in coefficient space.
pub fn differentiate(coeffs: &[f64], set: &HarmonicSet, order: usize) -> Vec<f64> {
    let c = set.coeffs_per_dof();
    let h = set.len();
    let mut cur = coeffs.to_vec();
    for _ in 0..order {
        let mut next = vec![0.0; cur.len()];
        for (dof_in, dof_out) in cur.chunks(c).zip(next.chunks_mut(c)) {
            for i in 1..h {
                let j = set.indices()[i] as f64;
                let (a, b) = (dof_in[i], dof_in[h - 1 + i]);
                // d/dtau (a cos + b sin) = j b cos - j a sin
                dof_out[i] = j * b;
                dof_out[h - 1 + i] = -j * a;
            }
        }
        cur = next;
    }
    cur
}

/// Evaluates the series (or its `order`-th tau-derivative) of every DOF at an
/// arbitrary phase `tau`.
pub fn evaluate_at(coeffs: &[f64], set: &HarmonicSet, dofs: usize, tau: f64, order: usize) -> Vec<f64> {
    let c = set.coeffs_per_dof();
    let h = set.len();
    let mut basis = vec![0.0; c];
    basis[0] = if order == 0 { 1.0 } else { 0.0 };
    for i in 1..h {
        let j = set.indices()[i] as f64;
        let (s, co) = (libm::sin(j * tau), libm::cos(j * tau));
        let (bc, bs) = match order {
            0 => (co, s),
            1 => (-j * s, j * co),
            _ => (-j * j * co, -j * j * s),
        };
        basis[i] = bc;
        basis[h - 1 + i] = bs;
    }
    (0..dofs)
        .map(|i| {
            coeffs[i * c..(i + 1) * c]
                .iter()
                .zip(&basis)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

/// Harmonic coefficient matrix: one row per degree of freedom, flattened
/// DOF-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicCoefficients {
    set: HarmonicSet,
    dofs: usize,
    data: Vec<f64>,
}

/// Residual coefficients share the layout of the unknowns.
pub type ResidualSpectrum = HarmonicCoefficients;

impl HarmonicCoefficients {
    pub fn zeros(set: &HarmonicSet, dofs: usize) -> Self {
        Self {
            set: set.clone(),
            dofs,
            data: vec![0.0; dofs * set.coeffs_per_dof()],
        }
    }

    pub fn from_flat(set: &HarmonicSet, dofs: usize, data: Vec<f64>) -> Result<Self> {
        let expected = dofs * set.coeffs_per_dof();
        if data.len() != expected {
            return Err(Error::Shape {
                expected,
                got: data.len(),
            });
        }
        Ok(Self {
            set: set.clone(),
            dofs,
            data,
        })
    }

    pub fn set(&self) -> &HarmonicSet {
        &self.set
    }

    pub fn dofs(&self) -> usize {
        self.dofs
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, dof: usize) -> &[f64] {
        let c = self.set.coeffs_per_dof();
        &self.data[dof * c..(dof + 1) * c]
    }

    /// Coefficient of harmonic `j` (cosine or sine part) on `dof`; zero if the
    /// harmonic is not in the set.
    pub fn get(&self, dof: usize, j: u32, comp: Component) -> f64 {
        self.set
            .position(j, comp)
            .map_or(0.0, |p| self.row(dof)[p])
    }

    pub fn set_coeff(&mut self, dof: usize, j: u32, comp: Component, value: f64) -> Result<()> {
        let p = self
            .set
            .position(j, comp)
            .ok_or_else(|| Error::Config(format!("harmonic {j} not in set")))?;
        let c = self.set.coeffs_per_dof();
        self.data[dof * c + p] = value;
        Ok(())
    }
}
