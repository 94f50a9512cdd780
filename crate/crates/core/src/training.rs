//! Dataset generation, Sobolev losses with exact parameter gradients, GradNorm,
//! Adam and SOAP, and the training loop.

use std::f64::consts::PI;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::charts::{check_domain, distortion_generic, metric_generic, ChartId, MetricParams};
use crate::error::{Error, Result};
use crate::jet::{seed_jet, Real};
use crate::nn::{FieldModel, LayerView, Normalization, OutputMode, Target};
use crate::tensor::{Mat4, PACKED};

pub const DATASET_MAGIC: &[u8; 7] = b"EINF-DS";
const DATASET_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    /// Geometric node spacing (requires min > 0).
    #[serde(default)]
    pub log: bool,
    /// Period of an angular axis; zero for ordinary axes.
    #[serde(default)]
    pub period: f64,
}

impl GridAxis {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        GridAxis { min, max, count, log: false, period: 0.0 }
    }

    pub fn geometric(min: f64, max: f64, count: usize) -> Self {
        GridAxis { min, max, count, log: true, period: 0.0 }
    }

    pub fn fixed(v: f64) -> Self {
        GridAxis::new(v, v, 1)
    }

    /// `count` cell centres of the open interval `(lo, hi)`.
    pub fn open(lo: f64, hi: f64, count: usize) -> Self {
        let h = (hi - lo) / count as f64;
        GridAxis::new(lo + 0.5 * h, hi - 0.5 * h, count)
    }

    /// `count` nodes of the half-open interval `[lo, hi)`.
    pub fn periodic(lo: f64, hi: f64, count: usize) -> Self {
        GridAxis { period: hi - lo, ..GridAxis::new(lo, hi - (hi - lo) / count as f64, count) }
    }

    pub fn node(&self, i: usize) -> f64 {
        if self.count <= 1 {
            return self.min;
        }
        let f = i as f64 / (self.count - 1) as f64;
        if self.log {
            self.min * (self.max / self.min).powf(f)
        } else {
            self.min + (self.max - self.min) * f
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.node(i)).collect()
    }
}

/// Tensor-product grid over (t, x¹, x², x³), traversed row-major with x³ fastest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: [GridAxis; 4],
}

impl GridSpec {
    pub fn new(axes: [GridAxis; 4]) -> Self {
        GridSpec { axes }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, a) in self.axes.iter().enumerate() {
            if a.count == 0 || !a.min.is_finite() || !a.max.is_finite() || a.max < a.min || (a.log && a.min <= 0.0)
                || !(a.period == 0.0 || a.period >= a.max - a.min)
            {
                return Err(Error::Invalid(format!("bad grid axis {i}: {a:?}")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, mut k: usize) -> [f64; 4] {
        let mut x = [0.0; 4];
        for d in (0..4).rev() {
            let n = self.axes[d].count;
            x[d] = self.axes[d].node(k % n);
            k /= n;
        }
        x
    }

    pub fn bounds(&self) -> ([f64; 4], [f64; 4]) {
        (self.axes.map(|a| a.min), self.axes.map(|a| a.max))
    }

    /// Grid of cell midpoints, used as a held-out set.
    /// Input normalization onto the grid box, wrapping periodic axes.
    pub fn normalization(&self) -> Normalization {
        let (lo, hi) = self.bounds();
        let mut n = Normalization::from_box(lo, hi);
        n.period = self.axes.map(|a| a.period);
        n
    }

    pub fn midpoints(&self) -> GridSpec {
        GridSpec {
            axes: self.axes.map(|a| {
                if a.count <= 1 {
                    a
                } else if a.log {
                    let q = (a.max / a.min).powf(0.5 / (a.count - 1) as f64);
                    GridAxis::geometric(a.min * q, a.max / q, a.count - 1)
                } else {
                    let h = 0.5 * (a.max - a.min) / (a.count - 1) as f64;
                    GridAxis::new(a.min + h, a.max - h, a.count - 1)
                }
            }),
        }
    }

    /// Schwarzschild spherical grid: t = 0, r ∈ [2.5, 150], θ ∈ (0, π), φ ∈ [0, 2π).
    pub fn schwarzschild_spherical(n: usize) -> Self {
        GridSpec::new([
            GridAxis::fixed(0.0),
            GridAxis::new(2.5, 150.0, n),
            GridAxis::open(0.0, PI, n),
            GridAxis::periodic(0.0, 2.0 * PI, n),
        ])
    }

    /// As [`GridSpec::schwarzschild_spherical`] with geometric radial spacing, which
    /// resolves the steep near-horizon region on coarse grids.
    pub fn schwarzschild_spherical_log(n: usize) -> Self {
        let mut g = Self::schwarzschild_spherical(n);
        g.axes[1] = GridAxis::geometric(2.5, 150.0, n);
        g
    }

    /// Kerr Boyer–Lindquist grid: t = 0, r ∈ [3, 14], θ ∈ (0, π), φ ∈ [0, 2π).
    pub fn kerr_bl(n: usize) -> Self {
        GridSpec::new([
            GridAxis::fixed(0.0),
            GridAxis::new(3.0, 14.0, n),
            GridAxis::open(0.0, PI, n),
            GridAxis::periodic(0.0, 2.0 * PI, n),
        ])
    }

    /// Kerr–Schild grid: t = 0, x, y ∈ [−3, 3], z ∈ [0.1, 3].
    pub fn kerr_ks(n: usize) -> Self {
        GridSpec::new([
            GridAxis::fixed(0.0),
            GridAxis::new(-3.0, 3.0, n),
            GridAxis::new(-3.0, 3.0, n),
            GridAxis::new(0.1, 3.0, n),
        ])
    }

    /// Plane-wave grid: 140 × 10 × 10 × 140 nodes in (t, x, y, z).
    pub fn gw(nt: usize, nxy: usize, nz: usize) -> Self {
        GridSpec::new([
            GridAxis::new(0.0, 4.0 * PI, nt),
            GridAxis::new(-1.0, 1.0, nxy),
            GridAxis::new(-1.0, 1.0, nxy),
            GridAxis::new(0.0, 4.0 * PI, nz),
        ])
    }
}

pub fn sample_count(grid: &GridSpec) -> usize {
    grid.len()
}

/// Samples of the supervised target with optional derivative blocks. `hess[s][q][k]`
/// stores ∂_μ∂_ν of packed component `k` for the `q`-th pair (μ ≤ ν) in packed order.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub chart: ChartId,
    pub params: MetricParams,
    pub grid: GridSpec,
    pub target: Target,
    pub order: usize,
    pub x: Vec<[f64; 4]>,
    pub value: Vec<[f64; 10]>,
    pub jac: Vec<[[f64; 10]; 4]>,
    pub hess: Vec<[[f64; 10]; 10]>,
}

fn target_generic<S: Real>(target: Target, chart: ChartId, p: &MetricParams, x: &[S; 4]) -> Mat4<S> {
    match target {
        Target::Distortion => distortion_generic(chart, p, x),
        Target::Raw => metric_generic(chart, p, x),
    }
}

pub fn generate_dataset(chart: ChartId, params: &MetricParams, grid: &GridSpec, order: usize, target: Target) -> Result<Dataset> {
    params.validate()?;
    grid.validate()?;
    if order > 2 {
        return Err(Error::Invalid(format!("derivative order {order} not supported")));
    }
    let n = grid.len();
    let mut ds = Dataset {
        chart,
        params: *params,
        grid: *grid,
        target,
        order,
        x: Vec::with_capacity(n),
        value: Vec::with_capacity(n),
        jac: Vec::with_capacity(if order >= 1 { n } else { 0 }),
        hess: Vec::with_capacity(if order >= 2 { n } else { 0 }),
    };
    for k in 0..n {
        let x = grid.point(k);
        check_domain(chart, params, &x)?;
        ds.x.push(x);
        if order == 0 {
            let g = target_generic(target, chart, params, &x);
            let v = PACKED.map(|(i, j)| g[i][j]);
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite(format!("target at {x:?}")));
            }
            ds.value.push(v);
            continue;
        }
        let g = target_generic(target, chart, params, &seed_jet(&x));
        if g.iter().flatten().any(|e| !e.all_finite()) {
            return Err(Error::NonFinite(format!("target jet at {x:?}")));
        }
        ds.value.push(PACKED.map(|(i, j)| g[i][j].v));
        ds.jac.push(std::array::from_fn(|mu| PACKED.map(|(i, j)| g[i][j].g[mu])));
        if order == 2 {
            ds.hess.push(std::array::from_fn(|q| {
                let (mu, nu) = PACKED[q];
                PACKED.map(|(i, j)| g[i][j].h[mu][nu])
            }));
        }
    }
    Ok(ds)
}

#[derive(Serialize, Deserialize)]
struct DatasetHeader {
    chart: ChartId,
    params: MetricParams,
    grid: GridSpec,
    target: Target,
    order: usize,
    count: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn record_len(order: usize) -> usize {
        [14, 54, 154][order]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let header = DatasetHeader {
            chart: self.chart,
            params: self.params,
            grid: self.grid,
            target: self.target,
            order: self.order,
            count: self.len(),
        };
        let text = serde_json::to_string(&header).map_err(|e| Error::Io(e.to_string()))?;
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        w.write_all(DATASET_MAGIC)?;
        w.write_all(&DATASET_VERSION.to_le_bytes())?;
        w.write_all(&(text.len() as u32).to_le_bytes())?;
        w.write_all(text.as_bytes())?;
        let mut put = |v: f64| w.write_all(&v.to_le_bytes());
        for s in 0..self.len() {
            self.x[s].iter().chain(&self.value[s]).try_for_each(|&v| put(v))?;
            if self.order >= 1 {
                self.jac[s].iter().flatten().try_for_each(|&v| put(v))?;
            }
            if self.order >= 2 {
                self.hess[s].iter().flatten().try_for_each(|&v| put(v))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let bad = |s: String| Error::Io(format!("dataset: {s}"));
        let mut head = [0u8; 15];
        r.read_exact(&mut head).map_err(|_| bad("truncated preamble".into()))?;
        if &head[..7] != DATASET_MAGIC {
            return Err(bad("missing EINF-DS magic".into()));
        }
        let version = u32::from_le_bytes(head[7..11].try_into().unwrap());
        if version != DATASET_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let hlen = u32::from_le_bytes(head[11..15].try_into().unwrap()) as usize;
        let mut text = vec![0u8; hlen];
        r.read_exact(&mut text).map_err(|_| bad("truncated header".into()))?;
        let h: DatasetHeader = serde_json::from_slice(&text).map_err(|e| bad(e.to_string()))?;
        if h.order > 2 {
            return Err(bad(format!("order {}", h.order)));
        }
        let rec = Self::record_len(h.order);
        let mut buf = vec![0u8; 8 * rec];
        let mut ds = Dataset {
            chart: h.chart,
            params: h.params,
            grid: h.grid,
            target: h.target,
            order: h.order,
            x: Vec::with_capacity(h.count),
            value: Vec::with_capacity(h.count),
            jac: Vec::new(),
            hess: Vec::new(),
        };
        for _ in 0..h.count {
            r.read_exact(&mut buf).map_err(|_| bad("truncated payload".into()))?;
            let v: Vec<f64> = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            ds.x.push(v[0..4].try_into().unwrap());
            ds.value.push(v[4..14].try_into().unwrap());
            if h.order >= 1 {
                ds.jac.push(std::array::from_fn(|mu| v[14 + 10 * mu..24 + 10 * mu].try_into().unwrap()));
            }
            if h.order >= 2 {
                ds.hess.push(std::array::from_fn(|q| v[54 + 10 * q..64 + 10 * q].try_into().unwrap()));
            }
        }
        if !r.fill_buf()?.is_empty() {
            return Err(bad("trailing bytes".into()));
        }
        Ok(ds)
    }
}

fn channels(order: usize) -> usize {
    [1, 5, 15][order]
}

fn gemm(m: usize, k: usize, n: usize, a: (&[f64], usize, usize), b: (&[f64], usize, usize), c: &mut [f64], beta: f64) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(c.len() >= m * n);
    // SAFETY: callers pass slices covering every strided access for the given shapes.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.0.as_ptr(),
            a.1 as isize,
            a.2 as isize,
            b.0.as_ptr(),
            b.1 as isize,
            b.2 as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Forward state of a batch. Rows are `sample·C + channel`; channel 0 carries values,
/// 1..5 first derivatives, 5..15 packed second derivatives with respect to the inputs.
struct Pass {
    b: usize,
    c: usize,
    inputs: Vec<Vec<f64>>,
    zs: Vec<Vec<f64>>,
    ds: Vec<Vec<[f64; 3]>>,
    out: Vec<f64>,
}

fn forward_pass(m: &FieldModel, xs: &[[f64; 4]], order: usize) -> Pass {
    let c = channels(order);
    let b = xs.len();
    let rows = b * c;
    let mut a = vec![0.0; rows * 4];
    for (s, x) in xs.iter().enumerate() {
        let xn = m.norm.apply(x);
        a[s * c * 4..s * c * 4 + 4].copy_from_slice(&xn);
        if c > 1 {
            for mu in 0..4 {
                a[(s * c + 1 + mu) * 4 + mu] = m.norm.scale[mu];
            }
        }
    }
    let layers = m.layers();
    let last = layers.len() - 1;
    let act = m.arch.activation;
    let mut pass = Pass { b, c, inputs: Vec::new(), zs: Vec::new(), ds: Vec::new(), out: Vec::new() };
    for (k, l) in layers.iter().enumerate() {
        let w = l.n_out;
        let mut z = vec![0.0; rows * w];
        gemm(rows, l.n_in, w, (&a, l.n_in, 1), (&m.theta[l.w..l.b], 1, l.n_in), &mut z, 0.0);
        let bias = &m.theta[l.b..l.b + w];
        for s in 0..b {
            for (zj, bj) in z[s * c * w..s * c * w + w].iter_mut().zip(bias) {
                *zj += bj;
            }
        }
        pass.inputs.push(std::mem::take(&mut a));
        if k == last {
            pass.out = z;
            break;
        }
        let mut next = vec![0.0; rows * w];
        let mut ds = Vec::with_capacity(b * w);
        for s in 0..b {
            let r0 = s * c;
            for j in 0..w {
                let d = act.derivs(z[r0 * w + j]);
                next[r0 * w + j] = d[0];
                if c > 1 {
                    for mu in 0..4 {
                        next[(r0 + 1 + mu) * w + j] = d[1] * z[(r0 + 1 + mu) * w + j];
                    }
                }
                if c > 5 {
                    for (p, &(mu, nu)) in PACKED.iter().enumerate() {
                        next[(r0 + 5 + p) * w + j] =
                            d[1] * z[(r0 + 5 + p) * w + j] + d[2] * z[(r0 + 1 + mu) * w + j] * z[(r0 + 1 + nu) * w + j];
                    }
                }
                ds.push([d[1], d[2], d[3]]);
            }
        }
        pass.zs.push(z);
        pass.ds.push(ds);
        a = next;
    }
    pass
}

/// Parameter gradient for output cotangents `ybar` laid out with `cu` channels per
/// sample (`cu` is 1 or the forward channel count).
fn backward(m: &FieldModel, pass: &Pass, ybar: &[f64], cu: usize) -> Vec<f64> {
    let (b, c) = (pass.b, pass.c);
    debug_assert!(cu == 1 || cu == c);
    let stride = if cu == c { 1 } else { c };
    let rows = b * cu;
    let layers = m.layers();
    let mut grad = vec![0.0; m.theta.len()];
    let mut zbar = ybar.to_vec();
    for k in (0..layers.len()).rev() {
        let l: LayerView = layers[k];
        let (ni, no) = (l.n_in, l.n_out);
        gemm(no, rows, ni, (&zbar, 1, no), (&pass.inputs[k], stride * ni, 1), &mut grad[l.w..l.b], 0.0);
        for s in 0..b {
            for (g, z) in grad[l.b..l.b + no].iter_mut().zip(&zbar[s * cu * no..s * cu * no + no]) {
                *g += z;
            }
        }
        if k == 0 {
            break;
        }
        let mut abar = vec![0.0; rows * ni];
        gemm(rows, no, ni, (&zbar, no, 1), (&m.theta[l.w..l.b], ni, 1), &mut abar, 0.0);
        let (z, ds) = (&pass.zs[k - 1], &pass.ds[k - 1]);
        let w = ni;
        let mut nz = vec![0.0; rows * w];
        for s in 0..b {
            let (ru, rf) = (s * cu, s * c);
            for j in 0..w {
                let [s1, s2, s3] = ds[s * w + j];
                let mut z0 = s1 * abar[ru * w + j];
                if cu > 1 {
                    for mu in 0..4 {
                        let am = abar[(ru + 1 + mu) * w + j];
                        z0 += s2 * am * z[(rf + 1 + mu) * w + j];
                        nz[(ru + 1 + mu) * w + j] = s1 * am;
                    }
                }
                if cu > 5 {
                    for (p, &(mu, nu)) in PACKED.iter().enumerate() {
                        let ap = abar[(ru + 5 + p) * w + j];
                        if ap == 0.0 {
                            continue;
                        }
                        let (zm, zn) = (z[(rf + 1 + mu) * w + j], z[(rf + 1 + nu) * w + j]);
                        z0 += ap * (s2 * z[(rf + 5 + p) * w + j] + s3 * zm * zn);
                        nz[(ru + 1 + mu) * w + j] += s2 * ap * zn;
                        nz[(ru + 1 + nu) * w + j] += s2 * ap * zm;
                        nz[(ru + 5 + p) * w + j] = s1 * ap;
                    }
                }
                nz[ru * w + j] = z0;
            }
        }
        zbar = nz;
    }
    grad
}

/// Loss components and their output cotangents (full channel layout) for one batch.
struct Residuals {
    losses: [f64; 3],
    ybar: [Vec<f64>; 3],
}

fn residuals(m: &FieldModel, pass: &Pass, data: &Dataset, idx: &[usize], order: usize) -> Residuals {
    let (b, c) = (pass.b, pass.c);
    let od = m.arch.output.dim();
    let full = m.arch.output == OutputMode::Full16;
    let inv = 1.0 / b as f64;
    let mut losses = [0.0; 3];
    let mut ybar = [vec![0.0; b * c * od], vec![0.0; b * c * od], vec![0.0; b * c * od]];
    for (s, &i) in idx.iter().enumerate() {
        for ch in 0..c {
            let (j, tgt): (usize, &[f64; 10]) = match ch {
                0 => (0, &data.value[i]),
                1..=4 => (1, &data.jac[i][ch - 1]),
                _ => (2, &data.hess[i][ch - 5]),
            };
            let row = (s * c + ch) * od;
            let y = &pass.out[row..row + od];
            for (k, &(p, q)) in PACKED.iter().enumerate() {
                let pred = if full { 0.5 * (y[4 * p + q] + y[4 * q + p]) } else { y[k] };
                let r = pred - tgt[k];
                losses[j] += r * r * inv;
                let g = 2.0 * r * inv;
                if full {
                    ybar[j][row + 4 * p + q] += 0.5 * g;
                    ybar[j][row + 4 * q + p] += 0.5 * g;
                } else {
                    ybar[j][row + k] = g;
                }
            }
        }
    }
    let _ = order;
    Residuals { losses, ybar }
}

fn value_rows(ybar: &[f64], b: usize, c: usize, od: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(b * od);
    for s in 0..b {
        out.extend_from_slice(&ybar[s * c * od..s * c * od + od]);
    }
    out
}

fn check_batch(m: &FieldModel, data: &Dataset, idx: &[usize], order: usize) -> Result<()> {
    if idx.is_empty() {
        return Err(Error::Invalid("empty batch".into()));
    }
    if order > 2 {
        return Err(Error::Invalid(format!("Sobolev order {order} not supported")));
    }
    if data.order < order {
        return Err(Error::Invalid(format!("dataset carries derivatives up to order {}, loss needs {order}", data.order)));
    }
    if let Some(&i) = idx.iter().find(|&&i| i >= data.len()) {
        return Err(Error::Invalid(format!("sample index {i} out of range")));
    }
    if m.chart != data.chart {
        return Err(Error::Invalid(format!("model chart {} differs from dataset chart {}", m.chart, data.chart)));
    }
    Ok(())
}

/// Sobolev loss on the samples `idx`: returns the λ-weighted total and the
/// unweighted (value, Jacobian, Hessian) components. Components above `order` are zero.
pub fn sobolev_loss(m: &FieldModel, data: &Dataset, idx: &[usize], order: usize, lambda: [f64; 3]) -> Result<(f64, [f64; 3])> {
    check_batch(m, data, idx, order)?;
    let xs: Vec<[f64; 4]> = idx.iter().map(|&i| data.x[i]).collect();
    let pass = forward_pass(m, &xs, order);
    let r = residuals(m, &pass, data, idx, order);
    let total = (0..=order).map(|j| lambda[j] * r.losses[j]).sum();
    Ok((total, r.losses))
}

/// Per-component parameter gradients of the Sobolev loss. Entries above `order` are empty.
pub fn component_gradients(m: &FieldModel, data: &Dataset, idx: &[usize], order: usize) -> Result<([f64; 3], [Vec<f64>; 3])> {
    check_batch(m, data, idx, order)?;
    let xs: Vec<[f64; 4]> = idx.iter().map(|&i| data.x[i]).collect();
    let pass = forward_pass(m, &xs, order);
    let r = residuals(m, &pass, data, idx, order);
    let od = m.arch.output.dim();
    let mut g: [Vec<f64>; 3] = Default::default();
    g[0] = backward(m, &pass, &value_rows(&r.ybar[0], pass.b, pass.c, od), 1);
    for j in 1..=order {
        g[j] = backward(m, &pass, &r.ybar[j], pass.c);
    }
    Ok((r.losses, g))
}

/// Gradient of the λ-weighted Sobolev loss in one backward sweep.
pub fn loss_gradient(m: &FieldModel, data: &Dataset, idx: &[usize], order: usize, lambda: [f64; 3]) -> Result<(f64, [f64; 3], Vec<f64>)> {
    check_batch(m, data, idx, order)?;
    let xs: Vec<[f64; 4]> = idx.iter().map(|&i| data.x[i]).collect();
    let pass = forward_pass(m, &xs, order);
    let r = residuals(m, &pass, data, idx, order);
    let mut ybar = vec![0.0; r.ybar[0].len()];
    for j in 0..=order {
        for (y, v) in ybar.iter_mut().zip(&r.ybar[j]) {
            *y += lambda[j] * v;
        }
    }
    let total = (0..=order).map(|j| lambda[j] * r.losses[j]).sum();
    Ok((total, r.losses, backward(m, &pass, &ybar, pass.c)))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// GradNorm weights λ_j = 1/‖g_j‖; zero-norm components get 0. When every norm is
/// zero the identity weights are returned and the flag is set.
pub fn gradnorm_weights(norms: &[f64]) -> (Vec<f64>, bool) {
    if norms.iter().all(|&n| n == 0.0) {
        return (vec![1.0; norms.len()], true);
    }
    (norms.iter().map(|&n| if n > 0.0 { 1.0 / n } else { 0.0 }).collect(), false)
}

/// Optional exponential smoothing of GradNorm weights.
#[derive(Clone, Debug, Default)]
pub struct GradNorm {
    pub half_life: Option<f64>,
    prev: Option<Vec<f64>>,
}

impl GradNorm {
    pub fn new(half_life: Option<f64>) -> Self {
        GradNorm { half_life, prev: None }
    }

    pub fn update(&mut self, norms: &[f64]) -> (Vec<f64>, bool) {
        let (w, flag) = gradnorm_weights(norms);
        let w = match (self.half_life, &self.prev) {
            (Some(h), Some(p)) if h > 0.0 => {
                let a = 0.5f64.powf(1.0 / h);
                w.iter().zip(p).map(|(n, o)| a * o + (1.0 - a) * n).collect()
            }
            _ => w,
        };
        self.prev = Some(w.clone());
        (w, flag)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    Adam,
    Soap,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub kind: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub precondition_frequency: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig { kind: OptimizerKind::Soap, beta1: 0.95, beta2: 0.95, eps: 1e-8, weight_decay: 0.0, precondition_frequency: 1 }
    }
}

#[derive(Clone, Debug)]
pub struct Adam {
    pub cfg: OptimConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(cfg: OptimConfig, n: usize) -> Self {
        Adam { cfg, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) {
        let c = self.cfg;
        self.t += 1;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        for i in 0..theta.len() {
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * grad[i];
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            theta[i] -= lr * (mh / (vh.sqrt() + c.eps) + c.weight_decay * theta[i]);
        }
    }
}

struct SoapBlock {
    view: LayerView,
    l: DMatrix<f64>,
    r: DMatrix<f64>,
    ql: DMatrix<f64>,
    qr: DMatrix<f64>,
    m: DMatrix<f64>,
    v: DMatrix<f64>,
}

/// SOAP: Adam in the eigenbasis of Shampoo's Kronecker factors for each weight
/// matrix; biases use the same update without rotation.
pub struct Soap {
    pub cfg: OptimConfig,
    blocks: Vec<SoapBlock>,
    bias_m: Vec<f64>,
    bias_v: Vec<f64>,
    bias_idx: Vec<usize>,
    t: u64,
    started: bool,
}

fn eigenbasis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = nalgebra::SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..e.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| e.eigenvalues[b].total_cmp(&e.eigenvalues[a]));
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| e.eigenvectors[(i, order[j])])
}

impl Soap {
    pub fn new(cfg: OptimConfig, model: &FieldModel) -> Self {
        let mut blocks = Vec::new();
        let mut bias_idx = Vec::new();
        for l in model.layers() {
            let (o, i) = (l.n_out, l.n_in);
            blocks.push(SoapBlock {
                view: l,
                l: DMatrix::zeros(o, o),
                r: DMatrix::zeros(i, i),
                ql: DMatrix::identity(o, o),
                qr: DMatrix::identity(i, i),
                m: DMatrix::zeros(o, i),
                v: DMatrix::zeros(o, i),
            });
            bias_idx.extend(l.b..l.b + o);
        }
        let nb = bias_idx.len();
        Soap { cfg, blocks, bias_m: vec![0.0; nb], bias_v: vec![0.0; nb], bias_idx, t: 0, started: false }
    }

    fn grad_matrix(v: &LayerView, grad: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(v.n_out, v.n_in, &grad[v.w..v.b])
    }

    fn update_factors(&mut self, grad: &[f64], refresh: bool) {
        let beta = self.cfg.beta2;
        for blk in &mut self.blocks {
            let g = Self::grad_matrix(&blk.view, grad);
            blk.l = &blk.l * beta + (&g * g.transpose()) * (1.0 - beta);
            blk.r = &blk.r * beta + (g.transpose() * &g) * (1.0 - beta);
            if !self.started {
                blk.ql = eigenbasis(&blk.l);
                blk.qr = eigenbasis(&blk.r);
            } else if refresh {
                let (ql, perm_l) = refresh_basis(&blk.l, &blk.ql);
                let (qr, perm_r) = refresh_basis(&blk.r, &blk.qr);
                blk.v = DMatrix::from_fn(blk.v.nrows(), blk.v.ncols(), |i, j| blk.v[(perm_l[i], perm_r[j])]);
                blk.ql = ql;
                blk.qr = qr;
            }
        }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) {
        let c = self.cfg;
        if !self.started {
            self.update_factors(grad, false);
            self.started = true;
            return;
        }
        self.t += 1;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        let step = lr * bc2.sqrt() / bc1;
        for blk in &mut self.blocks {
            let g = Self::grad_matrix(&blk.view, grad);
            let gp = blk.ql.transpose() * &g * &blk.qr;
            blk.m = &blk.m * c.beta1 + &g * (1.0 - c.beta1);
            blk.v = &blk.v * c.beta2 + gp.component_mul(&gp) * (1.0 - c.beta2);
            let mp = blk.ql.transpose() * &blk.m * &blk.qr;
            let n = mp.zip_map(&blk.v, |a, b| a / (b.sqrt() + c.eps));
            let upd = &blk.ql * n * blk.qr.transpose();
            let v = blk.view;
            for o in 0..v.n_out {
                for i in 0..v.n_in {
                    let t = &mut theta[v.w + o * v.n_in + i];
                    *t -= step * upd[(o, i)];
                    *t -= lr * c.weight_decay * *t;
                }
            }
        }
        for (k, &i) in self.bias_idx.iter().enumerate() {
            self.bias_m[k] = c.beta1 * self.bias_m[k] + (1.0 - c.beta1) * grad[i];
            self.bias_v[k] = c.beta2 * self.bias_v[k] + (1.0 - c.beta2) * grad[i] * grad[i];
            theta[i] -= step * self.bias_m[k] / (self.bias_v[k].sqrt() + c.eps);
            theta[i] -= lr * c.weight_decay * theta[i];
        }
        let refresh = c.precondition_frequency > 0 && self.t % c.precondition_frequency as u64 == 0;
        self.update_factors(grad, refresh);
    }
}

/// One power iteration plus QR on `q` after sorting columns by the current
/// eigenvalue estimate; returns the new basis and the column permutation.
fn refresh_basis(m: &DMatrix<f64>, q: &DMatrix<f64>) -> (DMatrix<f64>, Vec<usize>) {
    let est = (q.transpose() * m * q).diagonal();
    let mut perm: Vec<usize> = (0..est.len()).collect();
    perm.sort_by(|&a, &b| est[b].total_cmp(&est[a]));
    let qs = DMatrix::from_fn(q.nrows(), q.ncols(), |i, j| q[(i, perm[j])]);
    let power = m * qs;
    (power.qr().q(), perm)
}

pub enum Optimizer {
    Adam(Adam),
    Soap(Box<Soap>),
}

impl Optimizer {
    pub fn new(cfg: OptimConfig, model: &FieldModel) -> Self {
        match cfg.kind {
            OptimizerKind::Adam => Optimizer::Adam(Adam::new(cfg, model.theta.len())),
            OptimizerKind::Soap => Optimizer::Soap(Box::new(Soap::new(cfg, model))),
        }
    }

    /// Apply one update; a non-finite gradient is rejected and leaves `theta` untouched.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
        if grad.len() != theta.len() {
            return Err(Error::Shape(format!("gradient length {} vs {} parameters", grad.len(), theta.len())));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient".into()));
        }
        match self {
            Optimizer::Adam(a) => a.step(theta, grad, lr),
            Optimizer::Soap(s) => s.step(theta, grad, lr),
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub init: f64,
    pub final_lr: f64,
    pub decay_steps: usize,
}

pub fn cosine_lr(step: usize, s: &LrSchedule) -> f64 {
    if s.decay_steps == 0 || step >= s.decay_steps {
        return s.final_lr;
    }
    let c = (PI * step as f64 / s.decay_steps as f64).cos();
    s.final_lr + 0.5 * (s.init - s.final_lr) * (1.0 + c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub sobolev_order: usize,
    pub lambda: [f64; 3],
    pub gradnorm: bool,
    pub gradnorm_half_life: Option<f64>,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub precondition_frequency: usize,
    pub epochs: usize,
    pub batches: usize,
    pub lr_init: f64,
    pub lr_final: f64,
    /// Defaults to epochs × batches.
    pub decay_steps: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            sobolev_order: 0,
            lambda: [1.0; 3],
            gradnorm: true,
            gradnorm_half_life: None,
            optimizer: OptimizerKind::Soap,
            beta1: 0.95,
            beta2: 0.95,
            eps: 1e-8,
            weight_decay: 0.0,
            precondition_frequency: 1,
            epochs: 100,
            batches: 100,
            lr_init: 1e-2,
            lr_final: 1e-5,
            decay_steps: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::Invalid(s));
        if self.sobolev_order > 2 {
            return bad(format!("sobolev_order {} not in 0..=2", self.sobolev_order));
        }
        if self.lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return bad(format!("lambda must be finite and non-negative: {:?}", self.lambda));
        }
        if !self.gradnorm && self.lambda[..=self.sobolev_order].iter().all(|&l| l == 0.0) {
            return bad("all active lambda weights are zero".into());
        }
        if !(self.lr_init > 0.0 && self.lr_final > 0.0 && self.lr_init.is_finite()) {
            return bad("learning rates must be positive".into());
        }
        for (n, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{n} must lie in [0, 1)"));
            }
        }
        if !(self.eps > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("eps must be positive and weight_decay non-negative".into());
        }
        if self.epochs == 0 || self.batches == 0 {
            return bad("epochs and batches must be positive".into());
        }
        if self.gradnorm_half_life.is_some_and(|h| !(h > 0.0)) {
            return bad("gradnorm_half_life must be positive".into());
        }
        Ok(())
    }

    pub fn optim(&self) -> OptimConfig {
        OptimConfig {
            kind: self.optimizer,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
            precondition_frequency: self.precondition_frequency,
        }
    }

    pub fn schedule(&self) -> LrSchedule {
        LrSchedule {
            init: self.lr_init,
            final_lr: self.lr_final,
            decay_steps: self.decay_steps.unwrap_or(self.epochs * self.batches),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss_value: f64,
    pub loss_jac: f64,
    pub loss_hess: f64,
    pub lr: f64,
    pub wallclock_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Unweighted loss sum of every optimizer step, in order.
    pub step_losses: Vec<f64>,
    /// Steps where every component gradient vanished.
    pub gradnorm_degenerate: usize,
    /// Set when training stopped on a non-finite loss; the returned model is the last good one.
    pub aborted: Option<String>,
}

impl TrainReport {
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["epoch", "loss_value", "loss_jac", "loss_hess", "lr", "wallclock_s"])?;
        for e in &self.epochs {
            out.write_record([
                e.epoch.to_string(),
                format!("{:e}", e.loss_value),
                format!("{:e}", e.loss_jac),
                format!("{:e}", e.loss_hess),
                format!("{:e}", e.lr),
                format!("{:.3}", e.wallclock_s),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.loss_value + e.loss_jac + e.loss_hess)
    }
}

fn split_batches(perm: &[usize], batches: usize) -> Vec<&[usize]> {
    let n = perm.len();
    let k = batches.min(n).max(1);
    let (base, extra) = (n / k, n % k);
    let mut out = Vec::with_capacity(k);
    let mut off = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        out.push(&perm[off..off + len]);
        off += len;
    }
    out
}

pub fn train(cfg: &TrainConfig, data: &Dataset, model: FieldModel) -> Result<(FieldModel, TrainReport)> {
    cfg.validate()?;
    let order = cfg.sobolev_order;
    if data.is_empty() {
        return Err(Error::Invalid("empty dataset".into()));
    }
    check_batch(&model, data, &[0], order)?;
    if model.target != data.target {
        return Err(Error::Invalid("model target kind differs from dataset".into()));
    }
    let mut model = model;
    let mut opt = Optimizer::new(cfg.optim(), &model);
    let mut gn = GradNorm::new(cfg.gradnorm_half_life);
    let sched = cfg.schedule();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut perm: Vec<usize> = (0..data.len()).collect();
    let mut report = TrainReport::default();
    let start = Instant::now();
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        perm.shuffle(&mut rng);
        let chunks = split_batches(&perm, cfg.batches);
        let mut acc = [0.0; 3];
        let mut lr = sched.init;
        for idx in &chunks {
            lr = cosine_lr(step, &sched);
            let (losses, grad) = if cfg.gradnorm {
                let (losses, g) = component_gradients(&model, data, idx, order)?;
                let norms: Vec<f64> = g[..=order].iter().map(|v| norm2(v)).collect();
                let (w, flag) = gn.update(&norms);
                report.gradnorm_degenerate += usize::from(flag);
                let mut total = vec![0.0; model.theta.len()];
                for (j, gj) in g[..=order].iter().enumerate() {
                    for (t, v) in total.iter_mut().zip(gj) {
                        *t += w[j] * v;
                    }
                }
                (losses, total)
            } else {
                let (_, losses, g) = loss_gradient(&model, data, idx, order, cfg.lambda)?;
                (losses, g)
            };
            let sum: f64 = losses.iter().sum();
            if !sum.is_finite() {
                report.aborted = Some(format!("non-finite loss at step {step}"));
                return Ok((model, report));
            }
            if let Err(e) = opt.step(&mut model.theta, &grad, lr) {
                report.aborted = Some(format!("step {step} rejected: {e}"));
                return Ok((model, report));
            }
            report.step_losses.push(sum);
            for j in 0..3 {
                acc[j] += losses[j] / chunks.len() as f64;
            }
            step += 1;
        }
        report.epochs.push(EpochRecord {
            epoch,
            loss_value: acc[0],
            loss_jac: acc[1],
            loss_hess: acc[2],
            lr,
            wallclock_s: start.elapsed().as_secs_f64(),
        });
    }
    model.meta.insert("sobolev_order".into(), order.to_string());
    model.meta.insert("optimizer".into(), format!("{:?}", cfg.optimizer));
    model.meta.insert("steps".into(), step.to_string());
    Ok((model, report))
}
