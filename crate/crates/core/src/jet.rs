//! Forward-mode jets over four input directions.
//!
//! [`Real`] is the scalar interface every field formula is written against, so the
//! same code evaluates plain values, first-order [`Dual`]s, second-order [`Jet`]s,
//! and jets whose coefficients are themselves jets (third and higher derivatives).

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

pub trait Real:
    Copy
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn cst(v: f64) -> Self;
    /// Primal value.
    fn re(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powf(self, p: f64) -> Self;
    fn atan2(self, x: Self) -> Self;
    /// True when every stored coefficient is finite.
    fn all_finite(&self) -> bool;

    fn zero() -> Self {
        Self::cst(0.0)
    }
    fn one() -> Self {
        Self::cst(1.0)
    }
    fn recip(self) -> Self {
        Self::one() / self
    }
    fn sq(self) -> Self {
        self * self
    }
    fn atan(self) -> Self {
        self.atan2(Self::one())
    }
}

impl Real for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn re(&self) -> f64 {
        *self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        if self <= 0.0 {
            f64::NAN
        } else {
            f64::ln(self)
        }
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}

/// Value plus gradient in four directions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<S> {
    pub v: S,
    pub g: [S; 4],
}

impl<S: Real> Dual<S> {
    pub fn constant(v: S) -> Self {
        Dual { v, g: [S::zero(); 4] }
    }
    pub fn var(v: S, i: usize) -> Self {
        let mut d = Self::constant(v);
        d.g[i] = S::one();
        d
    }
    /// Apply a scalar function given f(v) and f'(v).
    fn chain(self, f0: S, f1: S) -> Self {
        Dual { v: f0, g: self.g.map(|x| f1 * x) }
    }
}

/// Value, gradient and (symmetric) Hessian in four directions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<S> {
    pub v: S,
    pub g: [S; 4],
    pub h: [[S; 4]; 4],
}

pub type Jet2 = Jet<f64>;

impl<S: Real> Jet<S> {
    pub fn constant(v: S) -> Self {
        Jet { v, g: [S::zero(); 4], h: [[S::zero(); 4]; 4] }
    }
    pub fn var(v: S, i: usize) -> Self {
        let mut j = Self::constant(v);
        j.g[i] = S::one();
        j
    }
    /// Apply a scalar function given f(v), f'(v), f''(v).
    fn chain(self, f0: S, f1: S, f2: S) -> Self {
        let mut out = Jet { v: f0, g: [S::zero(); 4], h: [[S::zero(); 4]; 4] };
        for i in 0..4 {
            out.g[i] = f1 * self.g[i];
        }
        for i in 0..4 {
            for j in i..4 {
                let e = f1 * self.h[i][j] + f2 * self.g[i] * self.g[j];
                out.h[i][j] = e;
                out.h[j][i] = e;
            }
        }
        out
    }
}

/// Jets of `x` with each coordinate seeded as an independent direction.
pub fn seed_jet(x: &[f64; 4]) -> [Jet2; 4] {
    [0, 1, 2, 3].map(|i| Jet::var(x[i], i))
}

pub fn seed_dual(x: &[f64; 4]) -> [Dual<f64>; 4] {
    [0, 1, 2, 3].map(|i| Dual::var(x[i], i))
}

/// Jets whose coefficients are jets: outer and inner both differentiate in x.
pub fn seed_nested(x: &[f64; 4]) -> [Jet<Jet2>; 4] {
    [0, 1, 2, 3].map(|i| {
        let mut j = Jet::constant(Jet::var(x[i], i));
        j.g[i] = Jet::one();
        j
    })
}

macro_rules! impl_ops {
    ($T:ident) => {
        impl<S: Real> Add for $T<S> {
            type Output = Self;
            fn add(mut self, o: Self) -> Self {
                self += o;
                self
            }
        }
        impl<S: Real> Sub for $T<S> {
            type Output = Self;
            fn sub(mut self, o: Self) -> Self {
                self -= o;
                self
            }
        }
        impl<S: Real> Div for $T<S> {
            type Output = Self;
            fn div(self, o: Self) -> Self {
                self * o.recip_impl()
            }
        }
        impl<S: Real> MulAssign for $T<S> {
            fn mul_assign(&mut self, o: Self) {
                *self = *self * o;
            }
        }
        impl<S: Real> Add<f64> for $T<S> {
            type Output = Self;
            fn add(mut self, o: f64) -> Self {
                self.v = self.v + o;
                self
            }
        }
        impl<S: Real> Sub<f64> for $T<S> {
            type Output = Self;
            fn sub(mut self, o: f64) -> Self {
                self.v = self.v - o;
                self
            }
        }
        impl<S: Real> Div<f64> for $T<S> {
            type Output = Self;
            fn div(self, o: f64) -> Self {
                self * (1.0 / o)
            }
        }
    };
}

impl_ops!(Dual);
impl_ops!(Jet);

impl<S: Real> AddAssign for Dual<S> {
    fn add_assign(&mut self, o: Self) {
        self.v += o.v;
        for i in 0..4 {
            self.g[i] += o.g[i];
        }
    }
}
impl<S: Real> SubAssign for Dual<S> {
    fn sub_assign(&mut self, o: Self) {
        self.v -= o.v;
        for i in 0..4 {
            self.g[i] -= o.g[i];
        }
    }
}
impl<S: Real> Neg for Dual<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual { v: -self.v, g: self.g.map(|x| -x) }
    }
}
impl<S: Real> Mul for Dual<S> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut g = [S::zero(); 4];
        for i in 0..4 {
            g[i] = self.v * o.g[i] + self.g[i] * o.v;
        }
        Dual { v: self.v * o.v, g }
    }
}
impl<S: Real> Mul<f64> for Dual<S> {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Dual { v: self.v * k, g: self.g.map(|x| x * k) }
    }
}
impl<S: Real> Dual<S> {
    fn recip_impl(self) -> Self {
        let r = self.v.recip();
        self.chain(r, -(r * r))
    }
}

impl<S: Real> AddAssign for Jet<S> {
    fn add_assign(&mut self, o: Self) {
        self.v += o.v;
        for i in 0..4 {
            self.g[i] += o.g[i];
            for j in 0..4 {
                self.h[i][j] += o.h[i][j];
            }
        }
    }
}
impl<S: Real> SubAssign for Jet<S> {
    fn sub_assign(&mut self, o: Self) {
        self.v -= o.v;
        for i in 0..4 {
            self.g[i] -= o.g[i];
            for j in 0..4 {
                self.h[i][j] -= o.h[i][j];
            }
        }
    }
}
impl<S: Real> Neg for Jet<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Jet { v: -self.v, g: self.g.map(|x| -x), h: self.h.map(|r| r.map(|x| -x)) }
    }
}
impl<S: Real> Mul for Jet<S> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut out = Jet { v: self.v * o.v, g: [S::zero(); 4], h: [[S::zero(); 4]; 4] };
        for i in 0..4 {
            out.g[i] = self.v * o.g[i] + self.g[i] * o.v;
        }
        for i in 0..4 {
            for j in i..4 {
                let e = self.v * o.h[i][j]
                    + self.h[i][j] * o.v
                    + self.g[i] * o.g[j]
                    + self.g[j] * o.g[i];
                out.h[i][j] = e;
                out.h[j][i] = e;
            }
        }
        out
    }
}
impl<S: Real> Mul<f64> for Jet<S> {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Jet { v: self.v * k, g: self.g.map(|x| x * k), h: self.h.map(|r| r.map(|x| x * k)) }
    }
}
impl<S: Real> Jet<S> {
    fn recip_impl(self) -> Self {
        let r = self.v.recip();
        let r2 = r * r;
        self.chain(r, -r2, r2 * r * 2.0)
    }
}

impl<S: Real> Real for Dual<S> {
    fn cst(v: f64) -> Self {
        Dual::constant(S::cst(v))
    }
    fn re(&self) -> f64 {
        self.v.re()
    }
    fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.v.ln(), self.v.recip())
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, s.recip() * 0.5)
    }
    fn abs(self) -> Self {
        let r = self.v.re();
        if r > 0.0 {
            self
        } else if r < 0.0 {
            -self
        } else {
            self.chain(self.v.abs(), S::cst(f64::NAN))
        }
    }
    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Self::one();
        }
        self.chain(self.v.powi(n), self.v.powi(n - 1) * n as f64)
    }
    fn powf(self, p: f64) -> Self {
        self.chain(self.v.powf(p), self.v.powf(p - 1.0) * p)
    }
    fn atan2(self, x: Self) -> Self {
        let r2 = self.v * self.v + x.v * x.v;
        let mut g = [S::zero(); 4];
        for i in 0..4 {
            g[i] = (x.v * self.g[i] - self.v * x.g[i]) / r2;
        }
        Dual { v: self.v.atan2(x.v), g }
    }
    fn all_finite(&self) -> bool {
        self.v.all_finite() && self.g.iter().all(|x| x.all_finite())
    }
}

impl<S: Real> Real for Jet<S> {
    fn cst(v: f64) -> Self {
        Jet::constant(S::cst(v))
    }
    fn re(&self) -> f64 {
        self.v.re()
    }
    fn sin(self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.chain(c, -s, -c)
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }
    fn ln(self) -> Self {
        let r = self.v.recip();
        self.chain(self.v.ln(), r, -(r * r))
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        let d1 = s.recip() * 0.5;
        self.chain(s, d1, -(d1 / self.v) * 0.5)
    }
    fn abs(self) -> Self {
        let r = self.v.re();
        if r > 0.0 {
            self
        } else if r < 0.0 {
            -self
        } else {
            let nan = S::cst(f64::NAN);
            self.chain(self.v.abs(), nan, nan)
        }
    }
    fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::one(),
            1 => self,
            _ => self.chain(
                self.v.powi(n),
                self.v.powi(n - 1) * n as f64,
                self.v.powi(n - 2) * (n * (n - 1)) as f64,
            ),
        }
    }
    fn powf(self, p: f64) -> Self {
        self.chain(
            self.v.powf(p),
            self.v.powf(p - 1.0) * p,
            self.v.powf(p - 2.0) * (p * (p - 1.0)),
        )
    }
    fn atan2(self, x: Self) -> Self {
        // d atan2(y, x) = (x dy - y dx) / (x^2 + y^2), differentiated once more for the Hessian
        let y = self;
        let r2 = y.v * y.v + x.v * x.v;
        let mut out = Jet { v: y.v.atan2(x.v), g: [S::zero(); 4], h: [[S::zero(); 4]; 4] };
        let num: [S; 4] = [0, 1, 2, 3].map(|i| x.v * y.g[i] - y.v * x.g[i]);
        for i in 0..4 {
            out.g[i] = num[i] / r2;
        }
        for i in 0..4 {
            for j in i..4 {
                let dnum = x.g[j] * y.g[i] + x.v * y.h[i][j] - y.g[j] * x.g[i] - y.v * x.h[i][j];
                let dr2 = (x.v * x.g[j] + y.v * y.g[j]) * 2.0;
                let e = dnum / r2 - num[i] * dr2 / (r2 * r2);
                out.h[i][j] = e;
                out.h[j][i] = e;
            }
        }
        out
    }
    fn all_finite(&self) -> bool {
        self.v.all_finite()
            && self.g.iter().all(|x| x.all_finite())
            && self.h.iter().flatten().all(|x| x.all_finite())
    }
}

/// Second-order jet of a scalar field at `x`.
pub fn jet_scalar<F>(f: F, x: &[f64; 4]) -> Result<Jet2>
where
    F: Fn(&[Jet2; 4]) -> Jet2,
{
    let j = f(&seed_jet(x));
    if !j.all_finite() {
        return Err(Error::NonDifferentiable(format!("scalar field at {x:?}")));
    }
    Ok(j)
}

/// Third derivatives ∂_ρ∂_μ∂_ν f, indexed `[ρ][μ][ν]`.
pub fn jet_scalar3<F>(f: F, x: &[f64; 4]) -> Result<[[[f64; 4]; 4]; 4]>
where
    F: Fn(&[Jet<Jet2>; 4]) -> Jet<Jet2>,
{
    let j = f(&seed_nested(x));
    if !j.all_finite() {
        return Err(Error::NonDifferentiable(format!("scalar field at {x:?}")));
    }
    let mut out = [[[0.0; 4]; 4]; 4];
    for r in 0..4 {
        for m in 0..4 {
            for n in 0..4 {
                out[r][m][n] = j.h[m][n].g[r];
            }
        }
    }
    Ok(out)
}
