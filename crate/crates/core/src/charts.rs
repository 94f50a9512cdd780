//! Exact vacuum metrics, their flat backgrounds and distortions, and chart maps.
//!
//! Every formula is generic over [`Real`] so it can be fed plain values or jets.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Real;
use crate::tensor::{sym_pack, zeros4, Mat4, SymMetric};

/// Horizon exclusion margin for spherical Schwarzschild and Boyer–Lindquist charts.
pub const HORIZON_MARGIN: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChartId {
    SchwarzschildSpherical,
    SchwarzschildKS,
    SchwarzschildEF,
    KerrBL,
    KerrKS,
    KerrEF,
    GWCartesianTT,
    MinkowskiCartesian,
}

impl ChartId {
    pub const ALL: [ChartId; 8] = [
        ChartId::SchwarzschildSpherical,
        ChartId::SchwarzschildKS,
        ChartId::SchwarzschildEF,
        ChartId::KerrBL,
        ChartId::KerrKS,
        ChartId::KerrEF,
        ChartId::GWCartesianTT,
        ChartId::MinkowskiCartesian,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ChartId::SchwarzschildSpherical => "SchwarzschildSpherical",
            ChartId::SchwarzschildKS => "SchwarzschildKS",
            ChartId::SchwarzschildEF => "SchwarzschildEF",
            ChartId::KerrBL => "KerrBL",
            ChartId::KerrKS => "KerrKS",
            ChartId::KerrEF => "KerrEF",
            ChartId::GWCartesianTT => "GWCartesianTT",
            ChartId::MinkowskiCartesian => "MinkowskiCartesian",
        }
    }

    /// Angular charts carry (time, r, θ, φ); the rest are Cartesian-like.
    pub fn is_spherical(&self) -> bool {
        matches!(
            self,
            ChartId::SchwarzschildSpherical
                | ChartId::SchwarzschildEF
                | ChartId::KerrBL
                | ChartId::KerrEF
        )
    }

    pub fn is_kerr(&self) -> bool {
        matches!(self, ChartId::KerrBL | ChartId::KerrKS | ChartId::KerrEF)
    }
}

impl fmt::Display for ChartId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChartId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ChartId::ALL
            .iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .copied()
            .ok_or_else(|| Error::Invalid(format!("unknown chart '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricParams {
    #[serde(rename = "M")]
    pub m: f64,
    pub a: f64,
    pub h_plus: f64,
    pub h_cross: f64,
    pub omega: f64,
    /// Use (+h₊, −h₊) on the (xx, yy) diagonal instead of (+h₊, +h₊).
    pub standard_tt: bool,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams { m: 1.0, a: 0.0, h_plus: 0.0, h_cross: 0.0, omega: 1.0, standard_tt: false }
    }
}

impl MetricParams {
    pub fn schwarzschild(m: f64) -> Self {
        MetricParams { m, ..Default::default() }
    }

    pub fn kerr(m: f64, a: f64) -> Self {
        MetricParams { m, a, ..Default::default() }
    }

    pub fn gw(h_plus: f64, h_cross: f64, omega: f64, standard_tt: bool) -> Self {
        MetricParams { m: 0.0, a: 0.0, h_plus, h_cross, omega, standard_tt }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.m, self.a, self.h_plus, self.h_cross, self.omega];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::Params("non-finite parameter".into()));
        }
        if self.m < 0.0 {
            return Err(Error::Params(format!("M = {} must be non-negative", self.m)));
        }
        if self.a < 0.0 || self.a > self.m {
            return Err(Error::Params(format!("spin a = {} must satisfy 0 <= a <= M = {}", self.a, self.m)));
        }
        if self.h_plus.abs() > 1e-2 || self.h_cross.abs() > 1e-2 {
            return Err(Error::Params("strain amplitudes must be at most 1e-2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacetimePoint {
    pub x: [f64; 4],
    pub chart: ChartId,
}

impl SpacetimePoint {
    pub fn new(chart: ChartId, x: [f64; 4]) -> Self {
        SpacetimePoint { x, chart }
    }
}

fn domain_err(chart: ChartId, x: &[f64; 4], reason: impl Into<String>) -> Error {
    Error::Domain { chart: chart.name().into(), point: *x, reason: reason.into() }
}

/// Boyer–Lindquist / Kerr–Schild radius from Cartesian position.
pub fn ks_radius(x: f64, y: f64, z: f64, a: f64) -> Result<f64> {
    let rho2 = x * x + y * y;
    if z.abs() < 1e-14 && (rho2 - a * a).abs() < 1e-12 {
        return Err(Error::Invalid(format!("({x}, {y}, {z}) lies on the ring singularity")));
    }
    let r = ks_radius_generic(x, y, z, a);
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Invalid(format!("({x}, {y}, {z}) has no positive Kerr-Schild radius")));
    }
    Ok(r)
}

pub(crate) fn ks_radius_generic<S: Real>(x: S, y: S, z: S, a: f64) -> S {
    let b = x * x + y * y + z * z - a * a;
    let az2 = z * z * (a * a);
    let disc = (b * b * 0.25 + az2).sqrt();
    // pick the cancellation-free branch of the positive root of u² − b u − a²z² = 0
    let u = if b.re() >= 0.0 { b * 0.5 + disc } else { az2 / (disc - b * 0.5) };
    let mut r = u.sqrt();
    // one Newton polish on F(r) = r⁴ − b r² − a²z²
    let r2 = r * r;
    let f = r2 * r2 - b * r2 - az2;
    let df = r * (r2 * 4.0 - b * 2.0);
    if df.re().abs() > 0.0 {
        r = r - f / df;
    }
    r
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KerrRegions {
    pub r_plus: f64,
    pub r_minus: f64,
    m: f64,
    a: f64,
}

impl KerrRegions {
    pub fn r_ergo_outer(&self, theta: f64) -> f64 {
        self.m + (self.m * self.m - self.a * self.a * theta.cos().powi(2)).sqrt()
    }
    pub fn r_ergo_inner(&self, theta: f64) -> f64 {
        self.m - (self.m * self.m - self.a * self.a * theta.cos().powi(2)).sqrt()
    }
}

pub fn kerr_regions(p: &MetricParams) -> Result<KerrRegions> {
    if p.a > p.m || p.a < 0.0 {
        return Err(Error::Params(format!("spin a = {} exceeds M = {}", p.a, p.m)));
    }
    let s = (p.m * p.m - p.a * p.a).sqrt();
    Ok(KerrRegions { r_plus: p.m + s, r_minus: p.m - s, m: p.m, a: p.a })
}

/// Coordinate validity alone (no horizon exclusion).
pub fn check_coords(chart: ChartId, x: &[f64; 4]) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(domain_err(chart, x, "non-finite coordinate"));
    }
    if chart.is_spherical() && !(x[2] > 0.0 && x[2] < PI && x[1] > 0.0) {
        return Err(domain_err(chart, x, "need r > 0 and theta inside (0, pi)"));
    }
    Ok(())
}

/// Domain predicate for `chart` under `p`.
pub fn check_domain(chart: ChartId, p: &MetricParams, x: &[f64; 4]) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(domain_err(chart, x, "non-finite coordinate"));
    }
    if chart.is_spherical() {
        let (r, th) = (x[1], x[2]);
        if !(th > 0.0 && th < PI) {
            return Err(domain_err(chart, x, "theta must lie strictly inside (0, pi)"));
        }
        if r <= 0.0 {
            return Err(domain_err(chart, x, "r must be positive"));
        }
    }
    match chart {
        ChartId::SchwarzschildSpherical => {
            if x[1] < 2.0 * p.m + HORIZON_MARGIN && p.m > 0.0 {
                return Err(domain_err(chart, x, format!("r < 2M + {HORIZON_MARGIN} exclusion zone")));
            }
        }
        ChartId::KerrBL => {
            let rp = kerr_regions(p)?.r_plus;
            if p.m > 0.0 && x[1] <= rp + HORIZON_MARGIN {
                return Err(domain_err(chart, x, format!("r <= r_plus + {HORIZON_MARGIN} exclusion zone")));
            }
        }
        ChartId::SchwarzschildKS => {
            let rr = (x[1] * x[1] + x[2] * x[2] + x[3] * x[3]).sqrt();
            if rr < 1e-8 {
                return Err(domain_err(chart, x, "origin is singular"));
            }
        }
        ChartId::KerrKS => {
            let r = ks_radius(x[1], x[2], x[3], p.a).map_err(|e| domain_err(chart, x, e.to_string()))?;
            if r < 1e-8 {
                return Err(domain_err(chart, x, "inside the ring disk"));
            }
        }
        _ => {}
    }
    Ok(())
}

fn sym<S: Real>(m: &mut Mat4<S>, i: usize, j: usize, v: S) {
    m[i][j] = v;
    m[j][i] = v;
}

fn minkowski<S: Real>() -> Mat4<S> {
    let mut m = zeros4();
    m[0][0] = S::cst(-1.0);
    for i in 1..4 {
        m[i][i] = S::one();
    }
    m
}

/// Kerr–Schild null covector l and profile H for Kerr (Schwarzschild when a = 0).
fn ks_parts<S: Real>(p: &MetricParams, x: &[S; 4]) -> ([S; 4], S) {
    let a = p.a;
    let (xx, yy, zz) = (x[1], x[2], x[3]);
    let r = ks_radius_generic(xx, yy, zz, a);
    let r2 = r * r;
    let den = r2 + a * a;
    let l = [S::one(), (r * xx + yy * a) / den, (r * yy - xx * a) / den, zz / r];
    let h = r2 * r * (2.0 * p.m) / (r2 * r2 + zz * zz * (a * a));
    (l, h)
}

/// Flat metric in the coordinates of `chart`.
pub fn background_generic<S: Real>(chart: ChartId, p: &MetricParams, x: &[S; 4]) -> Mat4<S> {
    let mut g = zeros4();
    match chart {
        ChartId::SchwarzschildKS
        | ChartId::KerrKS
        | ChartId::GWCartesianTT
        | ChartId::MinkowskiCartesian => return minkowski(),
        ChartId::SchwarzschildSpherical => {
            let (r, s) = (x[1], x[2].sin());
            g[0][0] = S::cst(-1.0);
            g[1][1] = S::one();
            g[2][2] = r * r;
            g[3][3] = r * r * s * s;
        }
        ChartId::SchwarzschildEF => {
            let (r, s) = (x[1], x[2].sin());
            g[0][0] = S::cst(-1.0);
            sym(&mut g, 0, 1, S::one());
            g[2][2] = r * r;
            g[3][3] = r * r * s * s;
        }
        ChartId::KerrBL => {
            let a2 = p.a * p.a;
            let (r, s, c) = (x[1], x[2].sin(), x[2].cos());
            let sigma = r * r + c * c * a2;
            let ra = r * r + a2;
            g[0][0] = S::cst(-1.0);
            g[1][1] = sigma / ra;
            g[2][2] = sigma;
            g[3][3] = ra * s * s;
        }
        ChartId::KerrEF => {
            let a2 = p.a * p.a;
            let (r, s, c) = (x[1], x[2].sin(), x[2].cos());
            let s2 = s * s;
            g[0][0] = S::cst(-1.0);
            sym(&mut g, 0, 1, S::one());
            sym(&mut g, 1, 3, s2 * p.a);
            g[2][2] = r * r + c * c * a2;
            g[3][3] = (r * r + a2) * s2;
        }
    }
    g
}

/// Distortion Δ = g − background from its closed form.
pub fn distortion_generic<S: Real>(chart: ChartId, p: &MetricParams, x: &[S; 4]) -> Mat4<S> {
    let mut d = zeros4();
    let m = p.m;
    match chart {
        ChartId::MinkowskiCartesian => {}
        ChartId::SchwarzschildSpherical => {
            let r = x[1];
            d[0][0] = r.recip() * (2.0 * m);
            d[1][1] = (r - 2.0 * m).recip() * (2.0 * m);
        }
        ChartId::SchwarzschildEF => {
            d[0][0] = x[1].recip() * (2.0 * m);
        }
        ChartId::SchwarzschildKS | ChartId::KerrKS => {
            let (l, h) = ks_parts(p, x);
            for i in 0..4 {
                for j in i..4 {
                    sym(&mut d, i, j, h * l[i] * l[j]);
                }
            }
        }
        ChartId::KerrBL | ChartId::KerrEF => {
            let a = p.a;
            let (r, s, c) = (x[1], x[2].sin(), x[2].cos());
            let s2 = s * s;
            let sigma = r * r + c * c * (a * a);
            let mr = r * (2.0 * m) / sigma;
            d[0][0] = mr;
            d[3][3] = mr * s2 * s2 * (a * a);
            if chart == ChartId::KerrBL {
                sym(&mut d, 0, 3, -(mr * s2 * a));
                let delta = r * r - r * (2.0 * m) + a * a;
                d[1][1] = r * sigma * (2.0 * m) / (delta * (r * r + a * a));
            } else {
                sym(&mut d, 0, 3, mr * s2 * a);
            }
        }
        ChartId::GWCartesianTT => {
            let c = ((x[0] - x[3]) * p.omega).cos();
            d[1][1] = c * p.h_plus;
            d[2][2] = c * if p.standard_tt { -p.h_plus } else { p.h_plus };
            sym(&mut d, 1, 2, c * p.h_cross);
        }
    }
    d
}

/// Full metric written directly from the line element (independent of the split).
pub fn metric_generic<S: Real>(chart: ChartId, p: &MetricParams, x: &[S; 4]) -> Mat4<S> {
    let m = p.m;
    let mut g = zeros4();
    match chart {
        ChartId::SchwarzschildSpherical => {
            let (r, s) = (x[1], x[2].sin());
            let f = S::one() - r.recip() * (2.0 * m);
            g[0][0] = -f;
            g[1][1] = f.recip();
            g[2][2] = r * r;
            g[3][3] = r * r * s * s;
        }
        ChartId::SchwarzschildEF => {
            let (r, s) = (x[1], x[2].sin());
            g[0][0] = -(S::one() - r.recip() * (2.0 * m));
            sym(&mut g, 0, 1, S::one());
            g[2][2] = r * r;
            g[3][3] = r * r * s * s;
        }
        ChartId::KerrBL => {
            let a = p.a;
            let (r, s, c) = (x[1], x[2].sin(), x[2].cos());
            let s2 = s * s;
            let sigma = r * r + c * c * (a * a);
            let delta = r * r - r * (2.0 * m) + a * a;
            let mr = r * (2.0 * m) / sigma;
            g[0][0] = -(S::one() - mr);
            sym(&mut g, 0, 3, -(mr * s2 * a));
            g[1][1] = sigma / delta;
            g[2][2] = sigma;
            g[3][3] = (r * r + a * a + mr * s2 * (a * a)) * s2;
        }
        ChartId::KerrEF => {
            let a = p.a;
            let (r, s, c) = (x[1], x[2].sin(), x[2].cos());
            let s2 = s * s;
            let sigma = r * r + c * c * (a * a);
            let mr = r * (2.0 * m) / sigma;
            g[0][0] = -(S::one() - mr);
            sym(&mut g, 0, 1, S::one());
            sym(&mut g, 0, 3, mr * s2 * a);
            sym(&mut g, 1, 3, s2 * a);
            g[2][2] = sigma;
            g[3][3] = (r * r + a * a + mr * s2 * (a * a)) * s2;
        }
        ChartId::SchwarzschildKS | ChartId::KerrKS => {
            let (l, h) = ks_parts(p, x);
            g = minkowski();
            for i in 0..4 {
                for j in i..4 {
                    let e = g[i][j] + h * l[i] * l[j];
                    sym(&mut g, i, j, e);
                }
            }
        }
        ChartId::GWCartesianTT => {
            g = minkowski();
            let d = distortion_generic(chart, p, x);
            for i in 1..3 {
                for j in 1..3 {
                    g[i][j] += d[i][j];
                }
            }
        }
        ChartId::MinkowskiCartesian => g = minkowski(),
    }
    g
}

fn to_sym(m: &Mat4) -> Result<SymMetric> {
    Ok(sym_pack(m)?.0)
}

pub fn metric_eval(chart: ChartId, p: &MetricParams, x: &SpacetimePoint) -> Result<SymMetric> {
    p.validate()?;
    check_chart(chart, x)?;
    check_domain(chart, p, &x.x)?;
    to_sym(&metric_generic(chart, p, &x.x))
}

pub fn background_eval(chart: ChartId, p: &MetricParams, x: &SpacetimePoint) -> Result<SymMetric> {
    p.validate()?;
    check_chart(chart, x)?;
    check_domain(chart, p, &x.x)?;
    to_sym(&background_generic(chart, p, &x.x))
}

pub fn distortion_eval(chart: ChartId, p: &MetricParams, x: &SpacetimePoint) -> Result<SymMetric> {
    p.validate()?;
    check_chart(chart, x)?;
    check_domain(chart, p, &x.x)?;
    to_sym(&distortion_generic(chart, p, &x.x))
}

fn check_chart(chart: ChartId, x: &SpacetimePoint) -> Result<()> {
    if chart != x.chart {
        return Err(Error::Invalid(format!("point is tagged {} but {} was requested", x.chart, chart)));
    }
    Ok(())
}

fn wrap_angle(phi: f64) -> f64 {
    let w = (phi + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Tortoise-type integrals for Kerr outside r₊: (∫2Mr/Δ dr, ∫a/Δ dr), fixed so that
/// the Schwarzschild limit gives 2M ln|r/2M − 1|.
fn kerr_shifts(p: &MetricParams, r: f64) -> Result<(f64, f64)> {
    let reg = kerr_regions(p)?;
    let (rp, rm) = (reg.r_plus, reg.r_minus);
    let w = rp - rm;
    if w <= 0.0 {
        return Err(Error::Params("extremal spin has no closed-form chart shift".into()));
    }
    if r <= rp {
        return Err(Error::Invalid(format!("Delta vanishes on the path to r = {r} (r_plus = {rp})")));
    }
    let lp = ((r - rp) / w).ln();
    let lm = ((r - rm) / w).ln();
    let t_shift = 2.0 * p.m / w * (rp * lp - rm * lm);
    let phi_shift = p.a / w * (lp - lm);
    Ok((t_shift, phi_shift))
}

/// Maps an event between charts of the same geometry (or to the flat Cartesian chart
/// that the background of an angular chart is written in).
pub fn chart_transform(x: &SpacetimePoint, to: ChartId, p: &MetricParams) -> Result<SpacetimePoint> {
    use ChartId::*;
    p.validate()?;
    let from = x.chart;
    if from == to {
        return Ok(*x);
    }
    let unsupported = || Error::UnsupportedTransform { from: from.name().into(), to: to.name().into() };
    let [t, a1, a2, a3] = x.x;
    let out = match (from, to) {
        (SchwarzschildSpherical | KerrBL, MinkowskiCartesian) => {
            let rho = (a1 * a1 + p.a * p.a).sqrt();
            [t, rho * a2.sin() * a3.cos(), rho * a2.sin() * a3.sin(), a1 * a2.cos()]
        }
        (MinkowskiCartesian, SchwarzschildSpherical | KerrBL) => {
            let r = ks_radius(a1, a2, a3, p.a)?;
            [t, r, (a3 / r).clamp(-1.0, 1.0).acos(), a2.atan2(a1)]
        }
        (SchwarzschildSpherical, SchwarzschildKS) | (KerrBL, KerrKS) => {
            let (ts, ps) = kerr_shifts(p, a1)?;
            let phi = a3 + ps;
            let (s, c) = (a2.sin(), a2.cos());
            [
                t + ts,
                s * (a1 * phi.cos() - p.a * phi.sin()),
                s * (a1 * phi.sin() + p.a * phi.cos()),
                a1 * c,
            ]
        }
        (SchwarzschildKS, SchwarzschildSpherical) | (KerrKS, KerrBL) => {
            let r = ks_radius(a1, a2, a3, p.a)?;
            let (ts, ps) = kerr_shifts(p, r)?;
            let phi_bar = a2.atan2(a1) - p.a.atan2(r);
            [t - ts, r, (a3 / r).clamp(-1.0, 1.0).acos(), wrap_angle(phi_bar - ps)]
        }
        (SchwarzschildSpherical, SchwarzschildEF) | (KerrBL, KerrEF) => {
            let (ts, ps) = kerr_shifts(p, a1)?;
            let phi = if from == KerrBL { wrap_angle(-(a3 + ps)) } else { a3 };
            [t + ts + a1, a1, a2, phi]
        }
        (SchwarzschildEF, SchwarzschildSpherical) | (KerrEF, KerrBL) => {
            let (ts, ps) = kerr_shifts(p, a1)?;
            let phi = if from == KerrEF { wrap_angle(-a3 - ps) } else { a3 };
            [t - ts - a1, a1, a2, phi]
        }
        _ => return Err(unsupported()),
    };
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("transform {from} -> {to} at {:?}", x.x)));
    }
    Ok(SpacetimePoint::new(to, out))
}

/// Generic form of [`chart_transform`] for differentiating the map.
pub fn chart_transform_generic<S: Real>(from: ChartId, to: ChartId, p: &MetricParams, x: &[S; 4]) -> Result<[S; 4]> {
    use ChartId::*;
    let [t, a1, a2, a3] = *x;
    let unsupported = || Error::UnsupportedTransform { from: from.name().into(), to: to.name().into() };
    let shifts = |r: S| -> Result<(S, S)> {
        let reg = kerr_regions(p)?;
        let (rp, rm) = (reg.r_plus, reg.r_minus);
        let w = rp - rm;
        if r.re() <= rp || w <= 0.0 {
            return Err(Error::Invalid("Delta vanishes on the transform path".into()));
        }
        let lp = ((r - rp) / w).ln();
        let lm = ((r - rm) / w).ln();
        Ok(((lp * rp - lm * rm) * (2.0 * p.m / w), (lp - lm) * (p.a / w)))
    };
    Ok(match (from, to) {
        (SchwarzschildSpherical | KerrBL, MinkowskiCartesian) => {
            let rho = (a1 * a1 + p.a * p.a).sqrt();
            [t, rho * a2.sin() * a3.cos(), rho * a2.sin() * a3.sin(), a1 * a2.cos()]
        }
        (SchwarzschildSpherical, SchwarzschildKS) | (KerrBL, KerrKS) => {
            let (ts, ps) = shifts(a1)?;
            let phi = a3 + ps;
            let (s, c) = (a2.sin(), a2.cos());
            [
                t + ts,
                s * (a1 * phi.cos() - phi.sin() * p.a),
                s * (a1 * phi.sin() + phi.cos() * p.a),
                a1 * c,
            ]
        }
        (SchwarzschildSpherical, SchwarzschildEF) | (KerrBL, KerrEF) => {
            let (ts, ps) = shifts(a1)?;
            let phi = if from == KerrBL { -(a3 + ps) } else { a3 };
            [t + ts + a1, a1, a2, phi]
        }
        _ => return Err(unsupported()),
    })
}
