use core::ops::{Add, Div, Mul, Neg, Sub};

use super::tape::{OpKind, Var};

/// Below this magnitude the base of a fractional power is clamped so that
/// `x^a` with `a < 1` keeps a finite derivative.
pub const POW_BASE_FLOOR: f64 = 1e-14;

/// Real arithmetic shared by plain `f64` evaluation and taped [`Var`]s.
///
/// Model code is written once against this trait and is then usable both for
/// fast value-only evaluation and for Jacobian recording.
pub trait Scalar:
    Copy
    + core::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn cst(value: f64) -> Self;
    fn value(&self) -> f64;

    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn atan2(self, x: Self) -> Self;
    fn sqrt(self) -> Self;
    fn powf(self, exponent: f64) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    /// Absolute value; derivative 0 at the kink.
    fn abs(self) -> Self;
    /// `max(self, 0)`; derivative 0 at the kink.
    fn pos_part(self) -> Self;

    /// `sum_i weights[i] * xs[i]`.
    fn dot(weights: &[f64], xs: &[Self]) -> Self {
        let mut acc = Self::cst(0.0);
        for (w, x) in weights.iter().zip(xs) {
            if *w != 0.0 {
                acc = acc + *x * *w;
            }
        }
        acc
    }

    fn zero() -> Self {
        Self::cst(0.0)
    }
}

fn clamp_pow_base(x: f64, exponent: f64) -> f64 {
    if exponent < 1.0 && x < POW_BASE_FLOOR && x >= 0.0 {
        POW_BASE_FLOOR
    } else {
        x
    }
}

impl Scalar for f64 {
    fn cst(value: f64) -> Self {
        value
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sin(self) -> Self {
        libm::sin(self)
    }
    fn cos(self) -> Self {
        libm::cos(self)
    }
    fn atan2(self, x: Self) -> Self {
        libm::atan2(self, x)
    }
    fn sqrt(self) -> Self {
        libm::sqrt(self)
    }
    fn powf(self, exponent: f64) -> Self {
        libm::pow(clamp_pow_base(self, exponent), exponent)
    }
    fn exp(self) -> Self {
        libm::exp(self)
    }
    fn ln(self) -> Self {
        libm::log(self)
    }
    fn abs(self) -> Self {
        libm::fabs(self)
    }
    fn pos_part(self) -> Self {
        if self > 0.0 {
            self
        } else {
            0.0
        }
    }
    fn dot(weights: &[f64], xs: &[Self]) -> Self {
        weights.iter().zip(xs).map(|(w, x)| w * x).sum()
    }
}

impl<'t> Scalar for Var<'t> {
    fn cst(value: f64) -> Self {
        Var::constant(value)
    }

    fn value(&self) -> f64 {
        self.value
    }

    fn sin(self) -> Self {
        let (s, c) = (libm::sin(self.value), libm::cos(self.value));
        self.unary(OpKind::Sin, s, c)
    }

    fn cos(self) -> Self {
        let (s, c) = (libm::sin(self.value), libm::cos(self.value));
        self.unary(OpKind::Cos, c, -s)
    }

    fn atan2(self, x: Self) -> Self {
        let (yv, xv) = (self.value, x.value);
        let r2 = xv * xv + yv * yv;
        if r2 == 0.0 {
            return Var::violate(OpKind::Atan2, &[self.tape, x.tape]);
        }
        self.binary(x, OpKind::Atan2, libm::atan2(yv, xv), xv / r2, -yv / r2)
    }

    fn sqrt(self) -> Self {
        let v = self.value;
        if v < 0.0 {
            return Var::violate(OpKind::Sqrt, &[self.tape]);
        }
        let r = libm::sqrt(v);
        if r == 0.0 {
            // one-sided derivative is unbounded
            return Var::violate(OpKind::Sqrt, &[self.tape]);
        }
        self.unary(OpKind::Sqrt, r, 0.5 / r)
    }

    fn powf(self, exponent: f64) -> Self {
        let v = self.value;
        let integral = exponent == libm::trunc(exponent);
        if v < 0.0 && !integral {
            return Var::violate(OpKind::Powf, &[self.tape]);
        }
        let b = clamp_pow_base(v, exponent);
        let value = libm::pow(b, exponent);
        let partial = if exponent == 0.0 {
            0.0
        } else if b == 0.0 && exponent >= 1.0 {
            if exponent == 1.0 {
                1.0
            } else {
                0.0
            }
        } else {
            exponent * libm::pow(b, exponent - 1.0)
        };
        self.unary(OpKind::Powf, value, partial)
    }

    fn exp(self) -> Self {
        let e = libm::exp(self.value);
        self.unary(OpKind::Exp, e, e)
    }

    fn ln(self) -> Self {
        if self.value <= 0.0 {
            return Var::violate(OpKind::Ln, &[self.tape]);
        }
        self.unary(OpKind::Ln, libm::log(self.value), 1.0 / self.value)
    }

    fn abs(self) -> Self {
        let v = self.value;
        let d = if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.unary(OpKind::Abs, libm::fabs(v), d)
    }

    fn pos_part(self) -> Self {
        if self.value > 0.0 {
            self.unary(OpKind::PosPart, self.value, 1.0)
        } else {
            self.unary(OpKind::PosPart, 0.0, 0.0)
        }
    }

    fn dot(weights: &[f64], xs: &[Self]) -> Self {
        let mut value = 0.0;
        let mut tape = None;
        for (w, x) in weights.iter().zip(xs) {
            value += w * x.value;
            if *w != 0.0 && x.tape.is_some() {
                tape = x.tape;
            }
        }
        let Some(t) = tape else {
            return Var::constant(value);
        };
        let ops: alloc::vec::Vec<(u32, f64)> = weights
            .iter()
            .zip(xs)
            .filter(|(w, x)| **w != 0.0 && x.tape.is_some())
            .map(|(w, x)| (x.index, *w))
            .collect();
        Var {
            tape: Some(t),
            index: t.push(OpKind::Dot, &ops, value),
            value,
        }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.binary(rhs, OpKind::Add, self.value + rhs.value, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.binary(rhs, OpKind::Sub, self.value - rhs.value, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.binary(rhs, OpKind::Mul, self.value * rhs.value, rhs.value, self.value)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        if rhs.value == 0.0 {
            return Var::violate(OpKind::Div, &[self.tape, rhs.tape]);
        }
        let q = self.value / rhs.value;
        self.binary(rhs, OpKind::Div, q, 1.0 / rhs.value, -q / rhs.value)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(OpKind::Neg, -self.value, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Self;
    fn add(self, rhs: f64) -> Self {
        self.unary(OpKind::Add, self.value + rhs, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Self;
    fn sub(self, rhs: f64) -> Self {
        self.unary(OpKind::Sub, self.value - rhs, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.unary(OpKind::Mul, self.value * rhs, rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        if rhs == 0.0 {
            return Var::violate(OpKind::Div, &[self.tape]);
        }
        self.unary(OpKind::Div, self.value / rhs, 1.0 / rhs)
    }
}

impl<'t> Add<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        rhs + self
    }
}

impl<'t> Sub<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        rhs.unary(OpKind::Sub, self - rhs.value, -1.0)
    }
}

impl<'t> Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        rhs * self
    }
}

impl<'t> Div<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        Var::constant(self) / rhs
    }
}
