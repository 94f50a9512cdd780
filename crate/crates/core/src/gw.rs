//! Linearized-gravity observables on the plane-wave background.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::charts::{ChartId, MetricParams};
use crate::diffgeo::{curvature_bundle, tensor_rank4};
use crate::error::{Error, Result};
use crate::field::{metric_value, MetricField};
use crate::jet::{jet_scalar, Real};
use crate::tensor::Mat4;

/// Sign used when combining polarisations into one complex strain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrainConvention {
    /// h = h₊ − i h×
    #[default]
    MinusCross,
    /// h = h₊ + i h×
    PlusCross,
}

pub fn complex_strain(h_plus: f64, h_cross: f64, conv: StrainConvention) -> Complex64 {
    match conv {
        StrainConvention::MinusCross => Complex64::new(h_plus, -h_cross),
        StrainConvention::PlusCross => Complex64::new(h_plus, h_cross),
    }
}

/// Two real polarisation fields over spacetime.
pub trait StrainField {
    fn h_plus<S: Real>(&self, x: &[S; 4]) -> S;
    fn h_cross<S: Real>(&self, x: &[S; 4]) -> S;

    fn complex(&self, x: &[f64; 4], conv: StrainConvention) -> Complex64 {
        complex_strain(self.h_plus(x), self.h_cross(x), conv)
    }
}

/// Monochromatic wave travelling along +z: h = A cos(ω(t − z)).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneWave {
    pub amp_plus: f64,
    pub amp_cross: f64,
    pub omega: f64,
}

impl PlaneWave {
    pub fn from_params(p: &MetricParams) -> Self {
        PlaneWave { amp_plus: p.h_plus, amp_cross: p.h_cross, omega: p.omega }
    }
}

impl StrainField for PlaneWave {
    fn h_plus<S: Real>(&self, x: &[S; 4]) -> S {
        ((x[0] - x[3]) * self.omega).cos() * self.amp_plus
    }
    fn h_cross<S: Real>(&self, x: &[S; 4]) -> S {
        ((x[0] - x[3]) * self.omega).cos() * self.amp_cross
    }
}

/// First-order displacement of free particles at rest in the transverse plane.
pub fn ring_trajectories(ring: &[[f64; 2]], t: f64, z: f64, p: &MetricParams) -> Result<Vec<[f64; 2]>> {
    if p.h_plus.abs() > 1e-2 || p.h_cross.abs() > 1e-2 {
        return Err(Error::Params("strain amplitude exceeds 1e-2".into()));
    }
    let c = 0.5 * (p.omega * (t - z)).cos();
    Ok(ring
        .iter()
        .map(|&[x0, y0]| [x0 + c * (p.h_plus * x0 + p.h_cross * y0), y0 + c * (p.h_cross * x0 - p.h_plus * y0)])
        .collect())
}

/// Points evenly spaced on a circle of radius `r` in the transverse plane.
pub fn ring(r: f64, n: usize) -> Vec<[f64; 2]> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).map(|a| [r * a.cos(), r * a.sin()]).collect()
}

/// Proper transverse separation √G·(Sˣ, Sʸ), with G the x-y block of the metric.
pub fn transverse_proper(g: &Mat4, s: &[f64; 4]) -> [f64; 2] {
    let (a, b, d) = (g[1][1], g[1][2], g[2][2]);
    let sd = (a * d - b * b).sqrt();
    let k = 1.0 / (a + d + 2.0 * sd).sqrt();
    let r = [[(a + sd) * k, b * k], [b * k, (d + sd) * k]];
    [r[0][0] * s[1] + r[0][1] * s[2], r[1][0] * s[1] + r[1][1] * s[2]]
}

/// Ψ₄ = −∂²_t h₊ + i ∂²_t h×.
pub fn psi4_direct<F: StrainField>(strain: &F, x: &[f64; 4]) -> Result<Complex64> {
    let hp = jet_scalar(|y| strain.h_plus(y), x)?;
    let hx = jet_scalar(|y| strain.h_cross(y), x)?;
    Ok(Complex64::new(-hp.h[0][0], hx.h[0][0]))
}

/// Complex null tetrad (l, n, m, m̄).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tetrad {
    pub l: [Complex64; 4],
    pub n: [Complex64; 4],
    pub m: [Complex64; 4],
    pub mbar: [Complex64; 4],
}

fn bilinear(g: &Mat4, a: &[Complex64; 4], b: &[Complex64; 4]) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..4 {
        for j in 0..4 {
            s += a[i] * b[j] * g[i][j];
        }
    }
    s
}

fn real4(v: [f64; 4]) -> [Complex64; 4] {
    v.map(|x| Complex64::new(x, 0.0))
}

impl Tetrad {
    /// Flat transverse tetrad for a wave along z.
    pub fn flat_z() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let i = Complex64::new(0.0, s);
        let m = [0.0.into(), s.into(), i, 0.0.into()];
        Tetrad {
            l: real4([s, 0.0, 0.0, s]),
            n: real4([s, 0.0, 0.0, -s]),
            m,
            mbar: m.map(|c| c.conj()),
        }
    }

    /// Transverse tetrad built from a Gram–Schmidt frame of `g` in the order t, z, x, y.
    pub fn adapted(g: &Mat4) -> Result<Self> {
        let dot = |a: &[f64; 4], b: &[f64; 4]| -> f64 { (0..4).map(|i| (0..4).map(|j| g[i][j] * a[i] * b[j]).sum::<f64>()).sum() };
        let mut frame: Vec<([f64; 4], f64)> = Vec::new();
        for (axis, sign) in [(0usize, -1.0), (3, 1.0), (1, 1.0), (2, 1.0)] {
            let mut v = [0.0; 4];
            v[axis] = 1.0;
            for (e, se) in &frame {
                let c = dot(&v, e) * se;
                for k in 0..4 {
                    v[k] -= c * e[k];
                }
            }
            let nrm = dot(&v, &v) * sign;
            if !(nrm > 0.0) {
                return Err(Error::Invalid("metric does not admit a t,z,x,y orthonormal frame".into()));
            }
            frame.push((v.map(|c| c / nrm.sqrt()), sign));
        }
        let (et, ez, ex, ey) = (frame[0].0, frame[1].0, frame[2].0, frame[3].0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let comb = |a: [f64; 4], b: [f64; 4], sb: f64| real4(std::array::from_fn(|k| s * (a[k] + sb * b[k])));
        let m: [Complex64; 4] = std::array::from_fn(|k| Complex64::new(s * ex[k], s * ey[k]));
        Ok(Tetrad { l: comb(et, ez, 1.0), n: comb(et, ez, -1.0), m, mbar: m.map(|c| c.conj()) })
    }

    /// Largest violation of the null-tetrad normalisation under `g`.
    pub fn residual(&self, g: &Mat4) -> f64 {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let checks = [
            (bilinear(g, &self.l, &self.n), -one),
            (bilinear(g, &self.m, &self.mbar), one),
            (bilinear(g, &self.l, &self.l), zero),
            (bilinear(g, &self.n, &self.n), zero),
            (bilinear(g, &self.m, &self.m), zero),
            (bilinear(g, &self.mbar, &self.mbar), zero),
            (bilinear(g, &self.l, &self.m), zero),
            (bilinear(g, &self.l, &self.mbar), zero),
            (bilinear(g, &self.n, &self.m), zero),
            (bilinear(g, &self.n, &self.mbar), zero),
        ];
        checks.iter().map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn validate(&self, g: &Mat4) -> Result<()> {
        let r = self.residual(g);
        if r > 1e-10 {
            return Err(Error::Invalid(format!("tetrad is not null-normalised (residual {r:e})")));
        }
        Ok(())
    }
}

/// Ψ₄ = C_αβγδ n^α m̄^β n^γ m̄^δ.
pub fn psi4_weyl<F: MetricField>(field: &F, x: &[f64; 4], tetrad: &Tetrad) -> Result<Complex64> {
    tetrad.validate(&metric_value(field, x)?)?;
    let c = tensor_rank4(&curvature_bundle(field, x)?.weyl);
    let (n, mb) = (&tetrad.n, &tetrad.mbar);
    let mut s = Complex64::new(0.0, 0.0);
    for a in 0..4 {
        for b in 0..4 {
            let ab = n[a] * mb[b];
            for g in 0..4 {
                for d in 0..4 {
                    if c[a][b][g][d] != 0.0 {
                        s += ab * n[g] * mb[d] * c[a][b][g][d];
                    }
                }
            }
        }
    }
    Ok(s)
}

fn check_tt(field: &impl MetricField) -> Result<()> {
    if field.chart() != ChartId::GWCartesianTT {
        return Err(Error::Invalid(format!("Psi4 needs the TT plane-wave chart, got {}", field.chart())));
    }
    Ok(())
}

/// Ψ₄ by both routes on a (z, t) grid at x = y = 0.
#[derive(Clone, Debug)]
pub struct Psi4Row {
    pub z: f64,
    pub t: f64,
    pub direct: Complex64,
    pub weyl: Complex64,
}

pub fn psi4_grid<F: MetricField>(field: &F, wave: &PlaneWave, z: &[f64], t: &[f64]) -> Result<Vec<Psi4Row>> {
    check_tt(field)?;
    let mut rows = Vec::with_capacity(z.len() * t.len());
    for &zz in z {
        for &tt in t {
            let x = [tt, 0.0, 0.0, zz];
            let tet = Tetrad::adapted(&metric_value(field, &x)?)?;
            rows.push(Psi4Row { z: zz, t: tt, direct: psi4_direct(wave, &x)?, weyl: psi4_weyl(field, &x, &tet)? });
        }
    }
    Ok(rows)
}

pub fn write_psi4_csv(rows: &[Psi4Row], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["z", "t", "re_direct", "im_direct", "re_weyl", "im_weyl", "abs_err"])?;
    for r in rows {
        let vals = [r.z, r.t, r.direct.re, r.direct.im, r.weyl.re, r.weyl.im, (r.direct - r.weyl).norm()];
        out.write_record(vals.iter().map(|v| format!("{v:.17e}")))?;
    }
    out.flush()?;
    Ok(())
}

fn factorial(n: i64) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binomial(n: i64, k: i64) -> f64 {
    if k < 0 || k > n || n < 0 {
        return 0.0;
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Spin-weighted spherical harmonic ₛY_lm(θ, φ).
///
/// Each term sin^{2l}(θ/2)·cot^{k}(θ/2) is regrouped as sin^{2l−k}(θ/2)·cos^{k}(θ/2),
/// both exponents non-negative, so the poles need no special casing.
pub fn swsh(s: i64, l: i64, m: i64, theta: f64, phi: f64) -> Result<Complex64> {
    if l < s.abs() || m.abs() > l {
        return Err(Error::Invalid(format!("invalid spin-weighted harmonic (s, l, m) = ({s}, {l}, {m})")));
    }
    let pref = (-1f64).powi((l + m - s) as i32)
        * ((2 * l + 1) as f64 / (4.0 * PI) * factorial(l + m) * factorial(l - m) / (factorial(l + s) * factorial(l - s))).sqrt();
    let (sh, ch) = (0.5 * theta).sin_cos();
    let mut sum = 0.0;
    for r in 0..=(l - s) {
        let b = binomial(l - s, r) * binomial(l + s, r + s - m);
        if b == 0.0 {
            continue;
        }
        let k = 2 * r + s - m;
        sum += (-1f64).powi(r as i32) * b * sh.powi((2 * l - k) as i32) * ch.powi(k as i32);
    }
    Ok(Complex64::from_polar(pref * sum, m as f64 * phi))
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Product rule on the sphere: Gauss–Legendre in cos θ × trapezoid in φ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quadrature {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature { n_theta: 64, n_phi: 128 }
    }
}

impl Quadrature {
    pub fn validate(&self) -> Result<()> {
        if self.n_theta < 32 || self.n_phi < 64 {
            return Err(Error::Invalid(format!(
                "angular grid {}x{} is under-resolved (need at least 32x64)",
                self.n_theta, self.n_phi
            )));
        }
        Ok(())
    }

    /// (θ, φ, weight) triples.
    pub fn nodes(&self) -> Vec<(f64, f64, f64)> {
        let (x, w) = gauss_legendre(self.n_theta);
        let dphi = 2.0 * PI / self.n_phi as f64;
        let mut out = Vec::with_capacity(self.n_theta * self.n_phi);
        for (xi, wi) in x.iter().zip(&w) {
            let th = xi.acos();
            for k in 0..self.n_phi {
                out.push((th, k as f64 * dphi, wi * dphi));
            }
        }
        out
    }

    pub fn integrate(&self, f: impl Fn(f64, f64) -> Complex64) -> Complex64 {
        self.nodes().into_iter().map(|(th, ph, w)| f(th, ph) * w).sum()
    }
}

/// Gram matrix ⟨ₛY_i, ₛY_j⟩ over the given (l, m) list.
pub fn swsh_gram(s: i64, modes: &[(i64, i64)], q: &Quadrature) -> Result<Vec<Vec<Complex64>>> {
    q.validate()?;
    let nodes = q.nodes();
    let vals: Vec<Vec<Complex64>> = modes
        .iter()
        .map(|&(l, m)| nodes.iter().map(|&(th, ph, _)| swsh(s, l, m, th, ph)).collect())
        .collect::<Result<_>>()?;
    Ok(vals
        .iter()
        .map(|a| vals.iter().map(|b| a.iter().zip(b).zip(&nodes).map(|((u, v), n)| u * v.conj() * n.2).sum()).collect())
        .collect())
}

/// (r/M)·∮ h(t, r, θ, φ) ₋₂Ȳ_lm dΩ.
pub fn extract_mode(
    strain: impl Fn(f64, f64, f64, f64) -> Complex64,
    l: i64,
    m: i64,
    r: f64,
    t: f64,
    mass: f64,
    q: &Quadrature,
) -> Result<Complex64> {
    q.validate()?;
    if !(mass > 0.0) {
        return Err(Error::Params(format!("mass scale must be positive, got {mass}")));
    }
    swsh(-2, l, m, 0.0, 0.0)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for (th, ph, w) in q.nodes() {
        acc += strain(t, r, th, ph) * swsh(-2, l, m, th, ph)?.conj() * w;
    }
    Ok(acc * (r / mass))
}

pub fn write_mode_csv(series: &[(f64, Complex64)], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "re_h", "im_h"])?;
    for (t, h) in series {
        out.write_record([format!("{t:.17e}"), format!("{:.17e}", h.re), format!("{:.17e}", h.im)])?;
    }
    out.flush()?;
    Ok(())
}

/// dE/dt = ¼⟨ḣ₊² + ḣ×²⟩ = ω²(h₊² + h×²)/8, which is ω²A²/4 for equal amplitudes.
pub fn radiated_power(h_plus_amp: f64, h_cross_amp: f64, omega: f64) -> f64 {
    omega * omega * (h_plus_amp * h_plus_amp + h_cross_amp * h_cross_amp) / 8.0
}

/// ¼⟨ḣ₊² + ḣ×²⟩ by the trapezoid rule over one period of the plane wave at z = 0.
pub fn power_time_average(wave: &PlaneWave, samples: usize) -> Result<f64> {
    if samples < 3 || !(wave.omega > 0.0) {
        return Err(Error::Invalid("time average needs ω > 0 and at least 3 samples".into()));
    }
    let period = 2.0 * PI / wave.omega;
    let mut acc = 0.0;
    for k in 0..samples {
        let x = [period * k as f64 / samples as f64, 0.0, 0.0, 0.0];
        let hp = jet_scalar(|y| wave.h_plus(y), &x)?.g[0];
        let hx = jet_scalar(|y| wave.h_cross(y), &x)?.g[0];
        acc += hp * hp + hx * hx;
    }
    Ok(0.25 * acc / samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::AnalyticMetric;

    #[test]
    fn ring_examples() {
        let p = MetricParams::gw(1e-6, 0.0, 1.0, true);
        let out = ring_trajectories(&[[1.0, 0.0]], 3.0, 3.0, &p).unwrap();
        assert!((out[0][0] - 1.0000005).abs() < 1e-15);
        let p0 = MetricParams::gw(0.0, 0.0, 1.0, true);
        let r = ring(1.0, 16);
        assert_eq!(ring_trajectories(&r, 0.3, 0.0, &p0).unwrap(), r);
        assert!(ring_trajectories(&r, 0.0, 0.0, &MetricParams { h_plus: 0.02, ..p0 }).is_err());
    }

    #[test]
    fn proper_separation_square_root() {
        let mut g = crate::tensor::diag([-1.0, 1.3, 0.8, 1.0]);
        g[1][2] = 0.2;
        g[2][1] = 0.2;
        let s = [0.0, 0.7, -0.4, 0.0];
        let p = transverse_proper(&g, &s);
        let len2 = g[1][1] * s[1] * s[1] + 2.0 * g[1][2] * s[1] * s[2] + g[2][2] * s[2] * s[2];
        assert!((p[0] * p[0] + p[1] * p[1] - len2).abs() < 1e-14);
    }

    #[test]
    fn psi4_direct_example() {
        let w = PlaneWave { amp_plus: 1e-6, amp_cross: 1e-6, omega: 1.0 };
        let v = psi4_direct(&w, &[2.0, 0.0, 0.0, 2.0]).unwrap();
        assert!((v.re - 1e-6).abs() < 1e-20 && (v.im + 1e-6).abs() < 1e-20);
        let z = PlaneWave { amp_plus: 0.0, amp_cross: 0.0, omega: 1.0 };
        assert_eq!(psi4_direct(&z, &[1.0, 0.0, 0.0, 0.0]).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn tetrad_checks() {
        let eta = crate::tensor::diag([-1.0, 1.0, 1.0, 1.0]);
        assert!(Tetrad::flat_z().residual(&eta) < 1e-15);
        let mut bad = Tetrad::flat_z();
        bad.l[0] *= 2.0;
        assert!(bad.validate(&eta).is_err());
        let f = AnalyticMetric::new(ChartId::MinkowskiCartesian, MetricParams::default()).unwrap();
        assert!(psi4_weyl(&f, &[0.0; 4], &bad).is_err());
        assert_eq!(psi4_weyl(&f, &[0.3, 1.0, 2.0, 3.0], &Tetrad::flat_z()).unwrap().norm(), 0.0);
    }

    #[test]
    fn psi4_routes_agree() {
        let p = MetricParams::gw(1e-6, 5e-7, 1.0, true);
        let f = AnalyticMetric::new(ChartId::GWCartesianTT, p).unwrap();
        let rows = psi4_grid(&f, &PlaneWave::from_params(&p), &[0.0, 0.7], &[0.0, 1.3, 2.9]).unwrap();
        for r in rows {
            let rel = (r.direct - r.weyl).norm() / r.direct.norm();
            assert!(rel < 1e-5, "{rel:e} at z={} t={}", r.z, r.t);
        }
    }

    #[test]
    fn swsh_values_and_poles() {
        let c = 0.5 * (5.0 / PI).sqrt();
        assert!((swsh(-2, 2, 2, 0.0, 0.0).unwrap().re - c).abs() < 1e-14);
        assert!((c - 0.630783).abs() < 1e-6);
        for th in [0.0, 0.3, 1.2, 2.5, PI] {
            let v = swsh(-2, 2, 2, th, 0.4).unwrap();
            let o = Complex64::from_polar(0.125 * (5.0 / PI).sqrt() * (1.0 + th.cos()).powi(2), 0.8);
            assert!((v - o).norm() < 1e-14);
        }
        assert!(swsh(-2, 1, 0, 0.1, 0.0).is_err());
        assert!(swsh(0, 2, 3, 0.1, 0.0).is_err());
        // s = 0 reduces to the ordinary harmonic Y_10
        let y10 = swsh(0, 1, 0, 0.7, 0.0).unwrap().re;
        assert!((y10 - (3.0 / (4.0 * PI)).sqrt() * 0.7f64.cos()).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let (x, w) = gauss_legendre(8);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let i: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((i - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn gram_is_identity() {
        let modes: Vec<(i64, i64)> = (-2..=2).map(|m| (2, m)).collect();
        let g = swsh_gram(-2, &modes, &Quadrature::default()).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g[i][j] - e).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn mode_extraction() {
        let q = Quadrature::default();
        let c = Complex64::new(0.3, -1.7);
        let h = |_t: f64, _r: f64, th: f64, ph: f64| c * swsh(-2, 2, 2, th, ph).unwrap();
        let got = extract_mode(h, 2, 2, 10.0, 0.0, 1.0, &q).unwrap();
        assert!((got - c * 10.0).norm() < 1e-8);
        assert!(extract_mode(|_, _, _, _| 0.0.into(), 2, 2, 1.0, 0.0, 1.0, &q).unwrap().norm() == 0.0);
        for m in [-2, -1, 1, 2] {
            let v = extract_mode(|_, _, _, _| Complex64::new(1.0, 0.5), 2, m, 1.0, 0.0, 1.0, &q).unwrap();
            assert!(v.norm() < 1e-10, "m={m}: {v}");
        }
        assert!(extract_mode(h, 2, 2, 1.0, 0.0, 1.0, &Quadrature { n_theta: 16, n_phi: 128 }).is_err());
    }

    #[test]
    fn power() {
        assert!((radiated_power(1e-6, 1e-6, 1.0) - 2.5e-13).abs() < 1e-28);
        assert_eq!(radiated_power(0.0, 0.0, 2.0), 0.0);
        let w = PlaneWave { amp_plus: 2e-6, amp_cross: 5e-7, omega: 3.0 };
        let avg = power_time_average(&w, 64).unwrap();
        let exact = radiated_power(2e-6, 5e-7, 3.0);
        assert!(((avg - exact) / exact).abs() < 1e-10);
    }

    #[test]
    fn strain_conventions() {
        assert_eq!(complex_strain(1.0, 2.0, StrainConvention::MinusCross), Complex64::new(1.0, -2.0));
        assert_eq!(complex_strain(1.0, 2.0, StrainConvention::PlusCross), Complex64::new(1.0, 2.0));
    }
}
