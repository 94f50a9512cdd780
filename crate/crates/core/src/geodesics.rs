//! Geodesic and geodesic-deviation integration against any metric field.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::charts::{chart_transform, chart_transform_generic, kerr_regions, metric_generic, ChartId, MetricParams, SpacetimePoint};
use crate::diffgeo::{riemann, tensor_rank4};
use crate::error::{Error, Result};
use crate::jet::{seed_dual, Dual};
use crate::field::{christoffel_from, metric_dual, metric_value, MetricField};
use crate::ode::{integrate_ode, OdeOptions, OdeSolution, OdeStats};
use crate::tensor::Mat4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicState {
    pub x: [f64; 4],
    pub v: [f64; 4],
    pub tau: f64,
}

impl GeodesicState {
    pub fn to_vec(&self) -> Vec<f64> {
        self.x.iter().chain(&self.v).copied().collect()
    }
}

fn quad(g: &Mat4, a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let mut s = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            s += g[i][j] * a[i] * b[j];
        }
    }
    s
}

/// `(dx/dτ, dv/dτ)` with `dv^μ/dτ = −Γ^μ_ρσ v^ρ v^σ`.
pub fn geodesic_rhs<F: MetricField>(field: &F, x: &[f64; 4], v: &[f64; 4]) -> Result<([f64; 4], [f64; 4])> {
    let (g, dg) = metric_dual(field, x)?;
    let gam = christoffel_from(&g, &dg, x)?;
    let mut a = [0.0; 4];
    for (mu, am) in a.iter_mut().enumerate() {
        *am = -quad(&gam[mu], v, v);
    }
    Ok((*v, a))
}

/// Radius-independent `b₀` that makes the Schwarzschild initial data circular.
pub fn circular_b0(m: f64) -> f64 {
    m.sqrt()
}

/// Equatorial Schwarzschild initial data at `r₀ = a₀·r_s` with local speed
/// `v₀ = b₀/√(r₀ − r_s)` along φ.
pub fn schwarzschild_ic(a0: f64, b0: f64, m: f64) -> Result<GeodesicState> {
    if !(m > 0.0) {
        return Err(Error::Params(format!("mass must be positive, got {m}")));
    }
    let rs = 2.0 * m;
    let r0 = a0 * rs;
    if !(r0 > rs) {
        return Err(Error::Invalid(format!("r0 = {r0} is not outside the horizon")));
    }
    let v0 = b0 * (1.0 / (r0 - rs)).sqrt();
    if !(v0.abs() < 1.0) {
        return Err(Error::Invalid(format!("initial speed {v0} is not subluminal")));
    }
    let gamma2 = 1.0 - v0 * v0;
    let phi0: f64 = 0.0;
    Ok(GeodesicState {
        x: [0.0, r0, PI / 2.0, phi0],
        v: [1.0 / ((1.0 - rs / r0) * gamma2).sqrt(), 0.0, 0.0, v0 * phi0.cos() / (r0 * r0 * gamma2).sqrt()],
        tau: 0.0,
    })
}

/// Equatorial Boyer–Lindquist initial data from energy `e`, axial angular momentum
/// `lz` and radius `r0`; `v^r` follows from the timelike norm with the given sign.
pub fn kerr_ic(p: &MetricParams, e: f64, lz: f64, r0: f64, outward: bool) -> Result<GeodesicState> {
    let x = [0.0, r0, PI / 2.0, 0.0];
    crate::charts::check_domain(ChartId::KerrBL, p, &x)?;
    let g = metric_generic(ChartId::KerrBL, p, &x);
    let (gtt, gtp, gpp) = (g[0][0], g[0][3], g[3][3]);
    let det = gtt * gpp - gtp * gtp;
    // g_tt v^t + g_tφ v^φ = −E, g_tφ v^t + g_φφ v^φ = L
    let vt = (-e * gpp - lz * gtp) / det;
    let vp = (gtt * lz + gtp * e) / det;
    let rest = -1.0 - (gtt * vt * vt + 2.0 * gtp * vt * vp + gpp * vp * vp);
    let vr2 = rest / g[1][1];
    if vr2 < -1e-12 {
        return Err(Error::Invalid(format!("(E, L_z) = ({e}, {lz}) forbidden at r = {r0}")));
    }
    let vr = vr2.max(0.0).sqrt() * if outward { 1.0 } else { -1.0 };
    Ok(GeodesicState { x, v: [vt, vr, 0.0, vp], tau: 0.0 })
}

/// Energy and angular momentum of the equatorial circular Kerr orbit at BL radius `r`.
pub fn kerr_circular_el(p: &MetricParams, r: f64, prograde: bool) -> Result<(f64, f64)> {
    kerr_regions(p)?;
    let (m, a) = (p.m, if prograde { p.a } else { -p.a });
    let sr = r.sqrt();
    let den2 = r.powf(1.5) - 3.0 * m * sr + 2.0 * a * m.sqrt();
    if !(den2 > 0.0) {
        return Err(Error::Invalid(format!("no circular orbit at r = {r}")));
    }
    let den = r.powf(0.75) * den2.sqrt();
    let e = (r.powf(1.5) - 2.0 * m * sr + a * m.sqrt()) / den;
    let l = m.sqrt() * (r * r - 2.0 * a * (m * r).sqrt() + a * a) / den;
    Ok((e, if prograde { l } else { -l }))
}

/// Maps position and velocity into another chart through the transform Jacobian.
pub fn transform_state(s: &GeodesicState, from: ChartId, to: ChartId, p: &MetricParams) -> Result<GeodesicState> {
    if from == to {
        return Ok(*s);
    }
    let y: [Dual<f64>; 4] = chart_transform_generic(from, to, p, &seed_dual(&s.x))?;
    let v = std::array::from_fn(|m| (0..4).map(|a| y[m].g[a] * s.v[a]).sum());
    Ok(GeodesicState { x: y.map(|d| d.v), v, tau: s.tau })
}

/// Named Kerr initial data: energy, angular momentum, start radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KerrOrbit {
    pub name: String,
    pub e: f64,
    pub lz: f64,
    pub r0: f64,
    pub outward: bool,
}

/// Representative prograde, retrograde and eccentric bound orbits.
pub fn kerr_orbit_configs(p: &MetricParams) -> Result<Vec<KerrOrbit>> {
    let (ep, lp) = kerr_circular_el(p, 8.0, true)?;
    let (er, lr) = kerr_circular_el(p, 10.0, false)?;
    let (ee, le) = kerr_circular_el(p, 9.0, true)?;
    Ok(vec![
        KerrOrbit { name: "prograde".into(), e: ep, lz: lp, r0: 8.0, outward: true },
        KerrOrbit { name: "retrograde".into(), e: er, lz: lr, r0: 10.0, outward: true },
        KerrOrbit { name: "eccentric".into(), e: ee + 0.01, lz: le, r0: 9.0, outward: true },
    ])
}

/// Axial Killing vector ∂_φ expressed in the chart.
pub fn killing_phi(chart: ChartId, x: &[f64; 4]) -> [f64; 4] {
    match chart {
        ChartId::SchwarzschildSpherical | ChartId::SchwarzschildEF | ChartId::KerrBL => [0.0, 0.0, 0.0, 1.0],
        ChartId::KerrEF => [0.0, 0.0, 0.0, -1.0],
        _ => [0.0, -x[2], x[1], 0.0],
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Conserved {
    /// E = −g(∂_t, v)
    pub e: f64,
    /// L_z = g(∂_φ, v)
    pub lz: f64,
    /// g(v, v)
    pub norm: f64,
}

pub fn conserved<F: MetricField>(field: &F, x: &[f64; 4], v: &[f64; 4]) -> Result<Conserved> {
    let g = metric_value(field, x)?;
    Ok(Conserved {
        e: -quad(&g, &[1.0, 0.0, 0.0, 0.0], v),
        lz: quad(&g, &killing_phi(field.chart(), x), v),
        norm: quad(&g, v, v),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Drift {
    pub e: f64,
    pub lz: f64,
    pub norm: f64,
    pub e_rel: f64,
    pub lz_rel: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub chart: ChartId,
    pub sol: OdeSolution,
    /// Accepted states outside the field's training region.
    pub out_of_box: Vec<bool>,
}

impl Trajectory {
    pub fn tau(&self) -> &[f64] {
        &self.sol.t
    }

    pub fn len(&self) -> usize {
        self.sol.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sol.t.is_empty()
    }

    pub fn state(&self, k: usize) -> GeodesicState {
        let y = &self.sol.y[k];
        GeodesicState { x: [y[0], y[1], y[2], y[3]], v: [y[4], y[5], y[6], y[7]], tau: self.sol.t[k] }
    }

    pub fn interp(&self, tau: f64) -> Option<GeodesicState> {
        let y = self.sol.interp(tau)?;
        Some(GeodesicState { x: [y[0], y[1], y[2], y[3]], v: [y[4], y[5], y[6], y[7]], tau })
    }

    pub fn stats(&self) -> OdeStats {
        self.sol.stats
    }

    pub fn out_of_box_count(&self) -> usize {
        self.out_of_box.iter().filter(|&&b| b).count()
    }

    /// Largest deviation of E, L_z and g(v,v) from their initial values.
    pub fn drift<F: MetricField>(&self, field: &F) -> Result<Drift> {
        let s0 = self.state(0);
        let c0 = conserved(field, &s0.x, &s0.v)?;
        let mut d = Drift::default();
        for k in 1..self.len() {
            let s = self.state(k);
            let c = conserved(field, &s.x, &s.v)?;
            d.e = d.e.max((c.e - c0.e).abs());
            d.lz = d.lz.max((c.lz - c0.lz).abs());
            d.norm = d.norm.max((c.norm - c0.norm).abs());
        }
        d.e_rel = d.e / c0.e.abs().max(f64::MIN_POSITIVE);
        d.lz_rel = d.lz / c0.lz.abs().max(f64::MIN_POSITIVE);
        Ok(d)
    }

    /// CSV with τ, x⁰..x³, v⁰..v³, E, L_z, norm.
    pub fn write_csv<F: MetricField>(&self, field: &F, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["tau", "x0", "x1", "x2", "x3", "v0", "v1", "v2", "v3", "E", "L_z", "norm"])?;
        for k in 0..self.len() {
            let s = self.state(k);
            let c = conserved(field, &s.x, &s.v)?;
            let mut rec = vec![format!("{:.17e}", s.tau)];
            rec.extend(s.x.iter().chain(&s.v).map(|v| format!("{v:.17e}")));
            rec.extend([c.e, c.lz, c.norm].iter().map(|v| format!("{v:.17e}")));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn integrate<F: MetricField>(field: &F, ic: &GeodesicState, tau_end: f64, opts: &OdeOptions) -> Result<Trajectory> {
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let x = [y[0], y[1], y[2], y[3]];
        let v = [y[4], y[5], y[6], y[7]];
        let (dx, dv) = geodesic_rhs(field, &x, &v)?;
        dy[..4].copy_from_slice(&dx);
        dy[4..].copy_from_slice(&dv);
        Ok(())
    };
    let sol = integrate_ode(rhs, ic.tau, &ic.to_vec(), tau_end, opts)?;
    let out_of_box = sol.y.iter().map(|y| !field.in_training_box(&[y[0], y[1], y[2], y[3]])).collect();
    Ok(Trajectory { chart: field.chart(), sol, out_of_box })
}

/// Spatial position in the flat Cartesian frame associated with the chart.
pub fn spatial_cartesian(chart: ChartId, p: &MetricParams, x: &[f64; 4]) -> Result<[f64; 3]> {
    use ChartId::*;
    let pt = SpacetimePoint::new(chart, *x);
    let base = match chart {
        MinkowskiCartesian | GWCartesianTT | SchwarzschildKS | KerrKS => return Ok([x[1], x[2], x[3]]),
        SchwarzschildSpherical | KerrBL => pt,
        SchwarzschildEF => chart_transform(&pt, SchwarzschildSpherical, p)?,
        KerrEF => chart_transform(&pt, KerrBL, p)?,
    };
    let c = chart_transform(&base, MinkowskiCartesian, p)?;
    Ok([c.x[1], c.x[2], c.x[3]])
}

/// δr(τ) = ‖r_a(τ) − r_b(τ)‖ on `samples` uniform proper times over the common range.
pub fn rollout_deviation(a: &Trajectory, b: &Trajectory, p: &MetricParams, samples: usize) -> Result<Vec<(f64, f64)>> {
    let span = |t: &Trajectory| {
        let (s, e) = (t.tau()[0], *t.tau().last().unwrap());
        (s.min(e), s.max(e))
    };
    let (a0, a1) = span(a);
    let (b0, b1) = span(b);
    let (lo, hi) = (a0.max(b0), a1.min(b1));
    if !(hi > lo) || samples < 2 {
        return Err(Error::Invalid("trajectories have no overlapping proper-time range".into()));
    }
    (0..samples)
        .map(|k| {
            let tau = lo + (hi - lo) * k as f64 / (samples - 1) as f64;
            let sa = a.interp(tau).ok_or_else(|| Error::Invalid(format!("tau {tau} outside trajectory")))?;
            let sb = b.interp(tau).ok_or_else(|| Error::Invalid(format!("tau {tau} outside trajectory")))?;
            let ra = spatial_cartesian(a.chart, p, &sa.x)?;
            let rb = spatial_cartesian(b.chart, p, &sb.x)?;
            let d = ((ra[0] - rb[0]).powi(2) + (ra[1] - rb[1]).powi(2) + (ra[2] - rb[2]).powi(2)).sqrt();
            Ok((tau, d))
        })
        .collect()
}

pub fn write_deviation_csv(series: &[(f64, f64)], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["tau", "delta_r"])?;
    for (t, d) in series {
        out.write_record([format!("{t:.17e}"), format!("{d:.17e}")])?;
    }
    out.flush()?;
    Ok(())
}

/// Separation vector along a geodesic.
#[derive(Clone, Debug)]
pub struct DeviationSolution {
    pub sol: OdeSolution,
}

impl DeviationSolution {
    pub fn tau(&self) -> &[f64] {
        &self.sol.t
    }
    /// Geodesic state, separation `S` and coordinate rate `dS/dτ` at step `k`.
    pub fn at(&self, k: usize) -> (GeodesicState, [f64; 4], [f64; 4]) {
        let y = &self.sol.y[k];
        let dy = &self.sol.dy[k];
        let st = GeodesicState { x: [y[0], y[1], y[2], y[3]], v: [y[4], y[5], y[6], y[7]], tau: self.sol.t[k] };
        (st, [y[8], y[9], y[10], y[11]], [dy[8], dy[9], dy[10], dy[11]])
    }
    pub fn len(&self) -> usize {
        self.sol.t.len()
    }
    pub fn is_empty(&self) -> bool {
        self.sol.t.is_empty()
    }
}

/// Integrates `D²S/dτ² = R^μ_αβγ X^α X^β S^γ` along the geodesic that starts where
/// `traj` starts, over the same proper-time span. `ds0` is the coordinate rate dS/dτ.
/// The state carries (x, v, S, W) with W = DS/dτ.
pub fn geodesic_deviation<F: MetricField>(
    field: &F,
    traj: &Trajectory,
    s0: [f64; 4],
    ds0: [f64; 4],
    opts: &OdeOptions,
) -> Result<DeviationSolution> {
    let ic = traj.state(0);
    let tau_end = *traj.tau().last().unwrap();
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let x = [y[0], y[1], y[2], y[3]];
        let v = [y[4], y[5], y[6], y[7]];
        let s = [y[8], y[9], y[10], y[11]];
        let w = [y[12], y[13], y[14], y[15]];
        let rm = riemann(field, &x)?;
        let r = tensor_rank4(&rm.up);
        let gam = rm.gamma;
        for mu in 0..4 {
            let mut acc_v = 0.0;
            let mut acc_s = 0.0;
            let mut acc_w = 0.0;
            let mut tidal = 0.0;
            for a in 0..4 {
                for b in 0..4 {
                    acc_v += gam[mu][a][b] * v[a] * v[b];
                    acc_s += gam[mu][a][b] * v[a] * s[b];
                    acc_w += gam[mu][a][b] * v[a] * w[b];
                    for c in 0..4 {
                        tidal += r[mu][a][b][c] * v[a] * v[b] * s[c];
                    }
                }
            }
            dy[mu] = v[mu];
            dy[4 + mu] = -acc_v;
            dy[8 + mu] = w[mu] - acc_s;
            dy[12 + mu] = tidal - acc_w;
        }
        Ok(())
    };
    let (g, dg) = metric_dual(field, &ic.x)?;
    let gam = christoffel_from(&g, &dg, &ic.x)?;
    let mut y0 = ic.to_vec();
    y0.extend_from_slice(&s0);
    for mu in 0..4 {
        let mut w = ds0[mu];
        for a in 0..4 {
            for b in 0..4 {
                w += gam[mu][a][b] * ic.v[a] * s0[b];
            }
        }
        y0.push(w);
    }
    let sol = integrate_ode(rhs, ic.tau, &y0, tau_end, opts)?;
    Ok(DeviationSolution { sol })
}
