//! Finite-difference baselines, error metrics, tomographic slices and storage reports.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::charts::ChartId;
use crate::diffgeo::{christoffel_at, curvature_bundle};
use crate::error::{Error, Result};
use crate::field::{metric_dual, metric_value, MetricField};
use crate::nn::StorageReport;
use crate::tensor::PACKED;
use crate::training::GridSpec;

/// One-sided forward stencil order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FdOrder {
    Four,
    Six,
}

impl FdOrder {
    pub fn from_order(n: u32) -> Result<Self> {
        match n {
            4 => Ok(FdOrder::Four),
            6 => Ok(FdOrder::Six),
            _ => Err(Error::Invalid(format!("finite-difference order must be 4 or 6, got {n}"))),
        }
    }

    pub fn order(&self) -> u32 {
        match self {
            FdOrder::Four => 4,
            FdOrder::Six => 6,
        }
    }

    /// Weights of f(x + k h), k = 0..=order, for h·f'(x).
    pub fn coefficients(&self) -> &'static [f64] {
        match self {
            FdOrder::Four => &[-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -1.0 / 4.0],
            FdOrder::Six => &[-49.0 / 20.0, 6.0, -15.0 / 2.0, 20.0 / 3.0, -15.0 / 4.0, 6.0 / 5.0, -1.0 / 6.0],
        }
    }

    /// Distance the stencil reaches beyond `x` in units of h.
    pub fn reach(&self) -> usize {
        self.coefficients().len() - 1
    }
}

/// Forward-difference ∂f/∂x^axis. Any failing stencil evaluation is returned as the error.
pub fn fd_partial(f: impl Fn(&[f64; 4]) -> Result<f64>, x: &[f64; 4], axis: usize, h: f64, order: FdOrder) -> Result<f64> {
    if axis > 3 || !(h > 0.0) {
        return Err(Error::Invalid(format!("bad stencil: axis {axis}, h {h}")));
    }
    let mut acc = 0.0;
    for (k, c) in order.coefficients().iter().enumerate() {
        let mut y = *x;
        y[axis] += k as f64 * h;
        acc += c * f(&y)?;
    }
    Ok(acc / h)
}

/// Pulls `x` inward along `axis` so the forward stencil ends at or before `hi`.
pub fn fit_stencil(x: &[f64; 4], axis: usize, hi: f64, h: f64, order: FdOrder) -> [f64; 4] {
    let mut y = *x;
    y[axis] = y[axis].min(hi - order.reach() as f64 * h);
    y
}

/// ∂_μ g_αβ by forward differences, packed as `[μ][component]`.
pub fn fd_metric_jacobian<F: MetricField>(field: &F, x: &[f64; 4], h: f64, order: FdOrder) -> Result<[[f64; 10]; 4]> {
    let mut out = [[0.0; 10]; 4];
    let samples: Vec<_> = (0..4)
        .map(|mu| {
            (0..=order.reach())
                .map(|k| {
                    let mut y = *x;
                    y[mu] += k as f64 * h;
                    metric_value(field, &y)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    for mu in 0..4 {
        for (c, &(i, j)) in PACKED.iter().enumerate() {
            let s: f64 = order.coefficients().iter().zip(&samples[mu]).map(|(w, g)| w * g[i][j]).sum();
            out[mu][c] = s / h;
        }
    }
    Ok(out)
}

fn check_shapes(truth: &[f64], est: &[f64]) -> Result<()> {
    if truth.len() != est.len() {
        return Err(Error::Shape(format!("truth has {} entries, estimate {}", truth.len(), est.len())));
    }
    if truth.is_empty() {
        return Err(Error::Shape("empty series".into()));
    }
    Ok(())
}

/// (1/(m n)) Σ_i Σ_k |f_k(p_i) − f̂_k(p_i)| over flattened samples.
pub fn mae(truth: &[f64], est: &[f64]) -> Result<f64> {
    check_shapes(truth, est)?;
    Ok(truth.iter().zip(est).map(|(a, b)| (a - b).abs()).sum::<f64>() / truth.len() as f64)
}

/// √(Σ (f − f̂)²) / √(Σ f²).
pub fn rel_l2(truth: &[f64], est: &[f64]) -> Result<f64> {
    check_shapes(truth, est)?;
    let num: f64 = truth.iter().zip(est).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = truth.iter().map(|a| a * a).sum();
    if den == 0.0 {
        return Err(Error::Invalid("relative error undefined for zero-norm truth".into()));
    }
    Ok((num / den).sqrt())
}

/// Tensor quantity compared between fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Metric,
    Jacobian,
    Christoffel,
    Riemann,
    Kretschmann,
}

impl Quantity {
    pub const ALL: [Quantity; 5] =
        [Quantity::Metric, Quantity::Jacobian, Quantity::Christoffel, Quantity::Riemann, Quantity::Kretschmann];

    pub fn components(&self) -> usize {
        match self {
            Quantity::Metric => 10,
            Quantity::Jacobian => 40,
            Quantity::Christoffel => 64,
            Quantity::Riemann => 256,
            Quantity::Kretschmann => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Quantity::Metric => "metric",
            Quantity::Jacobian => "jacobian",
            Quantity::Christoffel => "christoffel",
            Quantity::Riemann => "riemann",
            Quantity::Kretschmann => "kretschmann",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Quantity::ALL
            .into_iter()
            .find(|q| q.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown quantity {s:?}")))
    }

    /// Flattened components of the quantity at `x`.
    pub fn eval<F: MetricField>(&self, field: &F, x: &[f64; 4]) -> Result<Vec<f64>> {
        Ok(match self {
            Quantity::Metric => {
                let g = metric_value(field, x)?;
                PACKED.iter().map(|&(i, j)| g[i][j]).collect()
            }
            Quantity::Jacobian => {
                let (_, dg) = metric_dual(field, x)?;
                dg.iter().flat_map(|d| PACKED.iter().map(move |&(i, j)| d[i][j])).collect()
            }
            Quantity::Christoffel => christoffel_at(field, x)?.gamma.iter().flatten().flatten().copied().collect(),
            Quantity::Riemann => curvature_bundle(field, x)?.riemann_down.data,
            Quantity::Kretschmann => vec![curvature_bundle(field, x)?.kretschmann],
        })
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub quantity: Quantity,
    pub mae: f64,
    pub rel_l2: f64,
    pub points: usize,
    pub components: usize,
    pub chart: ChartId,
}

/// Compares `est` against `truth` on `points`. `rel_l2` is NaN when the truth vanishes.
pub fn evaluate<A: MetricField, B: MetricField>(truth: &A, est: &B, points: &[[f64; 4]], q: Quantity) -> Result<EvalReport> {
    if points.is_empty() {
        return Err(Error::Shape("no evaluation points".into()));
    }
    let mut t = Vec::with_capacity(points.len() * q.components());
    let mut e = Vec::with_capacity(t.capacity());
    for x in points {
        t.extend(q.eval(truth, x)?);
        e.extend(q.eval(est, x)?);
    }
    let r = match rel_l2(&t, &e) {
        Ok(v) => v,
        Err(Error::Invalid(_)) => f64::NAN,
        Err(err) => return Err(err),
    };
    Ok(EvalReport { quantity: q, mae: mae(&t, &e)?, rel_l2: r, points: points.len(), components: q.components(), chart: truth.chart() })
}

/// CSV with one `#` header line naming the run.
pub fn write_reports_csv(header: &str, reports: &[EvalReport], w: impl Write) -> Result<()> {
    let mut w = w;
    writeln!(w, "# {header}")?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["quantity", "chart", "points", "components", "mae", "rel_l2"])?;
    for r in reports {
        out.write_record([
            r.quantity.to_string(),
            r.chart.to_string(),
            r.points.to_string(),
            r.components.to_string(),
            format!("{:.6e}", r.mae),
            format!("{:.6e}", r.rel_l2),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Cell midpoints of a grid, evenly subsampled to at most `limit` points.
pub fn validation_points(grid: &GridSpec, limit: usize) -> Vec<[f64; 4]> {
    let mid = grid.midpoints();
    let n = mid.len();
    if n <= limit || limit == 0 {
        return (0..n).map(|k| mid.point(k)).collect();
    }
    let stride = n as f64 / limit as f64;
    (0..limit).map(|k| mid.point((k as f64 * stride) as usize)).collect()
}

/// A 2-D slice: axes `u` and `v` vary, the rest are fixed at `origin`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub origin: [f64; 4],
    pub axes: [usize; 2],
    pub u_range: [f64; 2],
    pub v_range: [f64; 2],
    pub resolution: [usize; 2],
}

impl Plane {
    pub fn points(&self) -> Result<Vec<[f64; 4]>> {
        let [a, b] = self.axes;
        if a > 3 || b > 3 || a == b {
            return Err(Error::Invalid(format!("bad plane axes {:?}", self.axes)));
        }
        let [nu, nv] = self.resolution;
        if nu < 2 || nv < 2 {
            return Err(Error::Invalid("plane resolution must be at least 2x2".into()));
        }
        let lerp = |r: [f64; 2], k: usize, n: usize| r[0] + (r[1] - r[0]) * k as f64 / (n - 1) as f64;
        let mut out = Vec::with_capacity(nu * nv);
        for i in 0..nu {
            for j in 0..nv {
                let mut x = self.origin;
                x[a] = lerp(self.u_range, i, nu);
                x[b] = lerp(self.v_range, j, nv);
                out.push(x);
            }
        }
        Ok(out)
    }
}

/// Per-point absolute errors on a plane, `u`-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tomogram {
    pub plane: Plane,
    pub quantity: Quantity,
    pub points: Vec<[f64; 4]>,
    pub errors: Vec<Vec<f64>>,
}

impl Tomogram {
    pub fn shape(&self) -> [usize; 2] {
        self.plane.resolution
    }

    pub fn max_error(&self) -> f64 {
        self.errors.iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut w = w;
        writeln!(w, "# tomography quantity={} axes={:?} resolution={:?}", self.quantity, self.plane.axes, self.plane.resolution)?;
        let mut out = csv::Writer::from_writer(w);
        let [a, b] = self.plane.axes;
        let mut head = vec![format!("x{a}"), format!("x{b}")];
        head.extend((0..self.quantity.components()).map(|k| format!("err{k}")));
        out.write_record(&head)?;
        for (x, e) in self.points.iter().zip(&self.errors) {
            let mut rec = vec![format!("{:.10e}", x[a]), format!("{:.10e}", x[b])];
            rec.extend(e.iter().map(|v| format!("{v:.6e}")));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn tomography<A: MetricField, B: MetricField>(a: &A, b: &B, plane: &Plane, q: Quantity) -> Result<Tomogram> {
    let points = plane.points()?;
    let errors = points
        .iter()
        .map(|x| {
            let (u, v) = (q.eval(a, x)?, q.eval(b, x)?);
            Ok(u.iter().zip(&v).map(|(p, q)| (p - q).abs()).collect())
        })
        .collect::<Result<_>>()?;
    Ok(Tomogram { plane: plane.clone(), quantity: q, points, errors })
}

/// Model storage against the explicit grid it replaces.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionReport {
    pub params: usize,
    pub model_bytes: usize,
    pub grid_points: usize,
    pub components: usize,
    /// points × components × 4 bytes
    pub grid_bytes: usize,
    /// points × 4 bytes, one float per point
    pub grid_bytes_per_point: usize,
    pub ratio: f64,
}

pub fn compression_report(params: usize, grid: &GridSpec, components: usize) -> CompressionReport {
    let s = StorageReport::for_count(params);
    let pts = grid.len();
    let grid_bytes = pts * components * 4;
    CompressionReport {
        params,
        model_bytes: s.f32_bytes,
        grid_points: pts,
        components,
        grid_bytes,
        grid_bytes_per_point: pts * 4,
        ratio: grid_bytes as f64 / s.f32_bytes as f64,
    }
}

impl CompressionReport {
    pub fn model_kib(&self) -> f64 {
        self.model_bytes as f64 / 1024.0
    }
    pub fn grid_mib(&self) -> f64 {
        self.grid_bytes as f64 / (1024.0 * 1024.0)
    }
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut w = w;
        writeln!(w, "# compression report (float32 storage)")?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["params", "model_kib", "grid_points", "components", "grid_mib", "grid_mib_per_point", "ratio"])?;
        out.write_record([
            self.params.to_string(),
            format!("{:.3}", self.model_kib()),
            self.grid_points.to_string(),
            self.components.to_string(),
            format!("{:.3}", self.grid_mib()),
            format!("{:.3}", self.grid_bytes_per_point as f64 / (1024.0 * 1024.0)),
            format!("{:.3}", self.ratio),
        ])?;
        out.flush()?;
        Ok(())
    }
}

impl fmt::Display for CompressionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "model {} params = {:.1} KiB; grid {} pts x {} comps = {:.1} MiB ({:.1} MiB at one float per point); ratio {:.1}",
            self.params,
            self.model_kib(),
            self.grid_points,
            self.components,
            self.grid_mib(),
            self.grid_bytes_per_point as f64 / (1024.0 * 1024.0),
            self.ratio
        )
    }
}

/// Jet-derivative versus finite-difference error of the metric Jacobian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdComparison {
    pub h: f64,
    pub order: u32,
    pub mae: f64,
    pub max: f64,
}

pub fn ad_fd_compare<F: MetricField>(field: &F, points: &[[f64; 4]], h: f64, order: FdOrder) -> Result<FdComparison> {
    if points.is_empty() {
        return Err(Error::Shape("no comparison points".into()));
    }
    let (mut sum, mut max, mut n) = (0.0, 0.0f64, 0usize);
    for x in points {
        let (_, dg) = metric_dual(field, x)?;
        let fd = fd_metric_jacobian(field, x, h, order)?;
        for mu in 0..4 {
            for (c, &(i, j)) in PACKED.iter().enumerate() {
                let e = (dg[mu][i][j] - fd[mu][c]).abs();
                sum += e;
                max = max.max(e);
                n += 1;
            }
        }
    }
    Ok(FdComparison { h, order: order.order(), mae: sum / n as f64, max })
}

/// Observed convergence order between two step sizes.
pub fn observed_order(e_coarse: f64, e_fine: f64, h_coarse: f64, h_fine: f64) -> f64 {
    (e_coarse / e_fine).ln() / (h_coarse / h_fine).ln()
}
