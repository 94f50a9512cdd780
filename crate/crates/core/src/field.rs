//! Metric-valued fields and their jets.

use crate::charts::{
    background_generic, check_coords, check_domain, distortion_generic, metric_generic, ChartId, MetricParams,
};
use crate::error::{Error, Result};
use crate::jet::{seed_dual, seed_jet, seed_nested, Dual, Jet, Jet2, Real};
use crate::tensor::{re4, sym_pack, Gamma, Mat4, SymMetric};

/// Anything that yields a symmetric metric at a point, for any scalar type.
pub trait MetricField: Sync {
    fn chart(&self) -> ChartId;
    fn eval<S: Real>(&self, x: &[S; 4]) -> Mat4<S>;
    fn check(&self, x: &[f64; 4]) -> Result<()>;
    /// False when `x` lies outside the region the field was fitted on.
    fn in_training_box(&self, _x: &[f64; 4]) -> bool {
        true
    }
}

/// Closed-form metric of a chart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticMetric {
    pub chart: ChartId,
    pub params: MetricParams,
    /// Sum background and distortion instead of evaluating the line element.
    pub split: bool,
}

impl AnalyticMetric {
    pub fn new(chart: ChartId, params: MetricParams) -> Result<Self> {
        params.validate()?;
        Ok(AnalyticMetric { chart, params, split: false })
    }
}

impl MetricField for AnalyticMetric {
    fn chart(&self) -> ChartId {
        self.chart
    }
    fn eval<S: Real>(&self, x: &[S; 4]) -> Mat4<S> {
        if self.split {
            let mut g = background_generic(self.chart, &self.params, x);
            let d = distortion_generic(self.chart, &self.params, x);
            for i in 0..4 {
                for j in 0..4 {
                    g[i][j] += d[i][j];
                }
            }
            g
        } else {
            metric_generic(self.chart, &self.params, x)
        }
    }
    fn check(&self, x: &[f64; 4]) -> Result<()> {
        check_domain(self.chart, &self.params, x)
    }
}

/// Flat background of a chart, as a field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BackgroundMetric {
    pub chart: ChartId,
    pub params: MetricParams,
}

impl MetricField for BackgroundMetric {
    fn chart(&self) -> ChartId {
        self.chart
    }
    fn eval<S: Real>(&self, x: &[S; 4]) -> Mat4<S> {
        background_generic(self.chart, &self.params, x)
    }
    fn check(&self, x: &[f64; 4]) -> Result<()> {
        check_coords(self.chart, x)
    }
}

impl<F: MetricField> MetricField for &F {
    fn chart(&self) -> ChartId {
        (**self).chart()
    }
    fn eval<S: Real>(&self, x: &[S; 4]) -> Mat4<S> {
        (**self).eval(x)
    }
    fn check(&self, x: &[f64; 4]) -> Result<()> {
        (**self).check(x)
    }
    fn in_training_box(&self, x: &[f64; 4]) -> bool {
        (**self).in_training_box(x)
    }
}

/// Metric, its Jacobian `jac[μ][α][β] = ∂_μ g_αβ` and Hessian `hess[μ][ν][α][β]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricJet<S = f64> {
    pub g: Mat4<S>,
    pub jac: [Mat4<S>; 4],
    pub hess: [[Mat4<S>; 4]; 4],
}

impl MetricJet<f64> {
    pub fn g_sym(&self) -> SymMetric {
        sym_pack(&self.g).map(|p| p.0).unwrap_or(SymMetric { packed: [f64::NAN; 10] })
    }
}

pub(crate) fn split_jets<S: Real>(m: &Mat4<Jet<S>>) -> MetricJet<S> {
    let z = S::zero();
    let mut out = MetricJet { g: [[z; 4]; 4], jac: [[[z; 4]; 4]; 4], hess: [[[[z; 4]; 4]; 4]; 4] };
    for a in 0..4 {
        for b in 0..4 {
            let e = &m[a][b];
            out.g[a][b] = e.v;
            for mu in 0..4 {
                out.jac[mu][a][b] = e.g[mu];
                for nu in 0..4 {
                    out.hess[mu][nu][a][b] = e.h[mu][nu];
                }
            }
        }
    }
    out
}

fn all_finite<S: Real>(m: &Mat4<S>) -> bool {
    m.iter().flatten().all(|x| x.all_finite())
}

pub fn metric_value<F: MetricField>(field: &F, x: &[f64; 4]) -> Result<Mat4> {
    field.check(x)?;
    let g = field.eval(x);
    if !all_finite(&g) {
        return Err(Error::NonFinite(format!("metric at {x:?}")));
    }
    Ok(g)
}

pub fn metric_jet<F: MetricField>(field: &F, x: &[f64; 4]) -> Result<MetricJet> {
    field.check(x)?;
    let m = field.eval(&seed_jet(x));
    if !all_finite(&m) {
        return Err(Error::NonDifferentiable(format!("metric jet at {x:?}")));
    }
    Ok(split_jets(&m))
}

/// Metric jet whose entries carry one further derivative: `∂_ρ` of every entry is
/// available as the inner gradient.
pub fn nested_metric_jet<F: MetricField>(field: &F, x: &[f64; 4]) -> Result<MetricJet<Jet2>> {
    field.check(x)?;
    let m = field.eval(&seed_nested(x));
    if !all_finite(&m) {
        return Err(Error::NonDifferentiable(format!("nested metric jet at {x:?}")));
    }
    Ok(split_jets(&m))
}

/// Third derivatives `d3[ρ][μ][ν][α][β] = ∂_ρ∂_μ∂_ν g_αβ`.
pub fn nested_jet<F: MetricField>(field: &F, x: &[f64; 4]) -> Result<Box<[[[Mat4; 4]; 4]; 4]>> {
    let nj = nested_metric_jet(field, x)?;
    let mut d3 = Box::new([[[[[0.0; 4]; 4]; 4]; 4]; 4]);
    for r in 0..4 {
        for mu in 0..4 {
            for nu in 0..4 {
                for a in 0..4 {
                    for b in 0..4 {
                        d3[r][mu][nu][a][b] = nj.hess[mu][nu][a][b].g[r];
                    }
                }
            }
        }
    }
    Ok(d3)
}

/// Metric and first derivatives only, the cheap path used by geodesic integration.
pub fn metric_dual<F: MetricField>(field: &F, x: &[f64; 4]) -> Result<(Mat4, [Mat4; 4])> {
    field.check(x)?;
    let m: Mat4<Dual<f64>> = field.eval(&seed_dual(x));
    if !all_finite(&m) {
        return Err(Error::NonDifferentiable(format!("metric at {x:?}")));
    }
    let mut jac = [[[0.0; 4]; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            for mu in 0..4 {
                jac[mu][a][b] = m[a][b].g[mu];
            }
        }
    }
    Ok((re4(&m), jac))
}

/// Christoffel symbols from the metric and its first derivatives.
pub fn christoffel_from<S: Real>(g: &Mat4<S>, dg: &[Mat4<S>; 4], x: &[f64; 4]) -> Result<Gamma<S>> {
    let gi = crate::tensor::inv4(g).map_err(|e| with_point(e, x))?;
    Ok(christoffel_with_inverse(&gi, dg))
}

pub(crate) fn with_point(e: Error, x: &[f64; 4]) -> Error {
    match e {
        Error::SingularMetric { det, .. } => Error::SingularMetric { point: *x, det },
        other => other,
    }
}

pub(crate) fn christoffel_with_inverse<S: Real>(gi: &Mat4<S>, dg: &[Mat4<S>; 4]) -> Gamma<S> {
    let z = S::zero();
    // first-kind symbols Γ_σμν
    let mut low = [[[z; 4]; 4]; 4];
    for s in 0..4 {
        for m in 0..4 {
            for n in m..4 {
                let v = (dg[m][s][n] + dg[n][s][m] - dg[s][m][n]) * 0.5;
                low[s][m][n] = v;
                low[s][n][m] = v;
            }
        }
    }
    let mut gam = [[[z; 4]; 4]; 4];
    for r in 0..4 {
        for m in 0..4 {
            for n in m..4 {
                let mut acc = z;
                for s in 0..4 {
                    acc += gi[r][s] * low[s][m][n];
                }
                gam[r][m][n] = acc;
                gam[r][n][m] = acc;
            }
        }
    }
    gam
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn schwarzschild_dr_gtt() {
        let f = AnalyticMetric::new(ChartId::SchwarzschildSpherical, MetricParams::schwarzschild(1.0)).unwrap();
        let j = metric_jet(&f, &[0.0, 4.0, PI / 2.0, 0.0]).unwrap();
        assert!((j.jac[1][0][0] + 0.125).abs() < 1e-15);
        assert!((j.jac[1][2][2] - 8.0).abs() < 1e-14);
    }

    #[test]
    fn minkowski_jets_vanish() {
        let f = AnalyticMetric::new(ChartId::MinkowskiCartesian, MetricParams::default()).unwrap();
        let j = metric_jet(&f, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(j.jac.iter().flatten().flatten().all(|&v| v == 0.0));
        assert!(j.hess.iter().flatten().flatten().flatten().all(|&v| v == 0.0));
        let d3 = nested_jet(&f, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(d3.iter().flatten().flatten().flatten().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn gw_time_derivative() {
        let p = MetricParams::gw(1e-6, 0.0, 1.0, false);
        let f = AnalyticMetric::new(ChartId::GWCartesianTT, p).unwrap();
        let x = [0.3, 0.0, 0.0, 0.3];
        let j = metric_jet(&f, &x).unwrap();
        assert!(j.jac[0][1][1].abs() < 1e-22);
        let x = [1.0, 0.0, 0.0, 0.2];
        let j = metric_jet(&f, &x).unwrap();
        assert!((j.jac[0][1][1] + 1e-6 * (0.8f64).sin()).abs() < 1e-20);
    }

    #[test]
    fn third_derivative_gtt() {
        // g_tt = −(1 − 2M/r), ∂³_r = −12M/r⁴ → −0.75 at r = 2; evaluated in the EF chart
        // where r = 2 is regular.
        let f = AnalyticMetric::new(ChartId::SchwarzschildEF, MetricParams::schwarzschild(1.0)).unwrap();
        let d3 = nested_jet(&f, &[0.0, 2.0, 1.0, 0.0]).unwrap();
        assert!((d3[1][1][1][0][0] + 0.75).abs() < 1e-13);
    }

    #[test]
    fn hessian_symmetric() {
        let f = AnalyticMetric::new(ChartId::KerrKS, MetricParams::kerr(1.0, 0.9)).unwrap();
        let j = metric_jet(&f, &[0.0, 2.1, -1.3, 0.7]).unwrap();
        for m in 0..4 {
            for n in 0..4 {
                for a in 0..4 {
                    for b in 0..4 {
                        assert!((j.hess[m][n][a][b] - j.hess[n][m][a][b]).abs() <= 1e-13);
                        assert_eq!(j.hess[m][n][a][b], j.hess[m][n][b][a]);
                    }
                }
            }
        }
    }

    #[test]
    fn domain_violation_propagates() {
        let f = AnalyticMetric::new(ChartId::SchwarzschildSpherical, MetricParams::schwarzschild(1.0)).unwrap();
        assert!(matches!(metric_jet(&f, &[0.0, 2.2, 1.0, 0.0]), Err(Error::Domain { .. })));
    }
}
