//! Coordinate MLP predicting metric distortions, evaluable on any [`Real`] scalar.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::charts::{background_generic, check_coords, ChartId, MetricParams};
use crate::error::{Error, Result};
use crate::field::MetricField;
use crate::jet::Real;
use crate::tensor::{Mat4, SymMetric, PACKED};

pub const MAGIC: &[u8; 4] = b"EINF";
pub const FORMAT_VERSION: u32 = 1;
const MAX_WIDTH: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Activation {
    Silu,
    Sine { zeta0: f64 },
    /// Real Gabor wavelet cos(ζ₀z)·exp(−(s₀z)²).
    Gabor { zeta0: f64, s0: f64 },
}

impl Activation {
    pub fn apply<S: Real>(&self, z: S) -> S {
        match *self {
            Activation::Silu => z / ((-z).exp() + 1.0),
            Activation::Sine { zeta0 } => (z * zeta0).sin(),
            Activation::Gabor { zeta0, s0 } => {
                let u = z * s0;
                (z * zeta0).cos() * (-(u * u)).exp()
            }
        }
    }

    /// σ and its first three derivatives at `z`.
    pub fn derivs(&self, z: f64) -> [f64; 4] {
        match *self {
            Activation::Silu => {
                let s = if z >= 0.0 { 1.0 / (1.0 + (-z).exp()) } else { let e = z.exp(); e / (1.0 + e) };
                let d = s * (1.0 - s);
                let q = 1.0 - 2.0 * s;
                [z * s, s + z * d, 2.0 * d + z * d * q, 3.0 * d * q + z * d * (q * q - 2.0 * d)]
            }
            Activation::Sine { zeta0: k } => {
                let (sn, cs) = (k * z).sin_cos();
                [sn, k * cs, -k * k * sn, -k * k * k * cs]
            }
            Activation::Gabor { zeta0: k, s0 } => {
                let (sn, cs) = (k * z).sin_cos();
                let c = [cs, -k * sn, -k * k * cs, k * k * k * sn];
                let s2 = s0 * s0;
                let e0 = (-s2 * z * z).exp();
                let e = [
                    e0,
                    -2.0 * s2 * z * e0,
                    (4.0 * s2 * s2 * z * z - 2.0 * s2) * e0,
                    (-8.0 * s2 * s2 * s2 * z * z * z + 12.0 * s2 * s2 * z) * e0,
                ];
                [
                    c[0] * e[0],
                    c[1] * e[0] + c[0] * e[1],
                    c[2] * e[0] + 2.0 * c[1] * e[1] + c[0] * e[2],
                    c[3] * e[0] + 3.0 * c[2] * e[1] + 3.0 * c[1] * e[2] + c[0] * e[3],
                ]
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputMode {
    Packed10,
    Full16,
}

impl OutputMode {
    pub fn dim(&self) -> usize {
        match self {
            OutputMode::Packed10 => 10,
            OutputMode::Full16 => 16,
        }
    }
}

/// What the network output stands for.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    /// Metric minus flat background; the background is added back on evaluation.
    #[default]
    Distortion,
    /// The full metric.
    Raw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arch {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub output: OutputMode,
}

impl Arch {
    pub fn new(depth: usize, width: usize, activation: Activation, output: OutputMode) -> Self {
        Arch { hidden: vec![width; depth], activation, output }
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![4];
        w.extend(&self.hidden);
        w.push(self.output.dim());
        w
    }

    pub fn param_count(&self) -> usize {
        self.widths().windows(2).map(|p| p[0] * p[1] + p[1]).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() {
            return Err(Error::Invalid("at least one hidden layer required".into()));
        }
        if let Some(w) = self.hidden.iter().find(|&&w| w == 0 || w > MAX_WIDTH) {
            return Err(Error::Invalid(format!("unsupported layer width {w}")));
        }
        match self.activation {
            Activation::Sine { zeta0 } | Activation::Gabor { zeta0, .. } if !(zeta0 > 0.0 && zeta0.is_finite()) => {
                Err(Error::Invalid(format!("zeta0 must be positive, got {zeta0}")))
            }
            Activation::Gabor { s0, .. } if !(s0 >= 0.0 && s0.is_finite()) => {
                Err(Error::Invalid(format!("s0 must be non-negative, got {s0}")))
            }
            _ => Ok(()),
        }
    }
}

/// Affine map `x ↦ scale·(x − center)` applied to inputs. A zero scale freezes an axis.
/// Axes with a positive period are first shifted by whole periods into
/// `[center − period/2, center + period/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub center: [f64; 4],
    pub scale: [f64; 4],
    #[serde(default)]
    pub period: [f64; 4],
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization { center: [0.0; 4], scale: [1.0; 4], period: [0.0; 4] }
    }
}

impl Normalization {
    /// Map the box `[lo, hi]` onto `[−1, 1]` per axis.
    pub fn from_box(lo: [f64; 4], hi: [f64; 4]) -> Self {
        let mut n = Normalization::default();
        for i in 0..4 {
            n.center[i] = 0.5 * (lo[i] + hi[i]);
            n.scale[i] = if hi[i] > lo[i] { 2.0 / (hi[i] - lo[i]) } else { 0.0 };
        }
        n
    }

    fn shift(&self, i: usize, v: f64) -> f64 {
        let p = self.period[i];
        if p > 0.0 {
            p * ((v - self.center[i]) / p + 0.5).floor()
        } else {
            0.0
        }
    }

    pub fn apply<S: Real>(&self, x: &[S; 4]) -> [S; 4] {
        std::array::from_fn(|i| (x[i] - self.center[i] - self.shift(i, x[i].re())) * self.scale[i])
    }

    /// True when `x` (after wrapping) falls inside the box the map was built from.
    pub fn contains(&self, x: &[f64; 4]) -> bool {
        (0..4).all(|i| {
            self.scale[i] == 0.0 || (self.scale[i] * (x[i] - self.center[i] - self.shift(i, x[i]))).abs() <= 1.0 + 1e-12
        })
    }
}

/// Offsets of one dense layer inside the flat parameter vector. Weights are
/// row-major `n_out × n_in`, followed by `n_out` biases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerView {
    pub w: usize,
    pub b: usize,
    pub n_in: usize,
    pub n_out: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldModel {
    pub arch: Arch,
    pub chart: ChartId,
    pub params: MetricParams,
    pub target: Target,
    pub norm: Normalization,
    pub theta: Vec<f64>,
    pub meta: BTreeMap<String, String>,
}

impl FieldModel {
    /// All-zero parameters: the field equals the background exactly.
    pub fn zeros(arch: Arch, chart: ChartId, params: MetricParams, norm: Normalization) -> Result<Self> {
        arch.validate()?;
        let n = arch.param_count();
        Ok(FieldModel { arch, chart, params, target: Target::Distortion, norm, theta: vec![0.0; n], meta: BTreeMap::new() })
    }

    /// Uniform fan-in initialisation; sine layers follow the SIREN scaling.
    pub fn init(arch: Arch, chart: ChartId, params: MetricParams, norm: Normalization, seed: u64) -> Result<Self> {
        let mut m = Self::zeros(arch, chart, params, norm)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let act = m.arch.activation;
        for (k, l) in m.layers().into_iter().enumerate() {
            let fan = l.n_in as f64;
            let bound = match act {
                Activation::Silu => 1.0 / fan.sqrt(),
                Activation::Sine { zeta0 } | Activation::Gabor { zeta0, .. } => {
                    if k == 0 {
                        1.0 / fan
                    } else {
                        (6.0 / fan).sqrt() / zeta0
                    }
                }
            };
            for v in &mut m.theta[l.w..l.b + l.n_out] {
                *v = rng.gen_range(-bound..bound);
            }
        }
        m.meta.insert("seed".into(), seed.to_string());
        Ok(m)
    }

    pub fn param_count(&self) -> usize {
        self.theta.len()
    }

    pub fn layers(&self) -> Vec<LayerView> {
        let w = self.arch.widths();
        let mut off = 0;
        w.windows(2)
            .map(|p| {
                let v = LayerView { w: off, b: off + p[0] * p[1], n_in: p[0], n_out: p[1] };
                off = v.b + p[1];
                v
            })
            .collect()
    }

    /// Raw network output at physical coordinates `x`.
    pub fn output<S: Real>(&self, x: &[S; 4]) -> Vec<S> {
        let mut a: Vec<S> = self.norm.apply(x).to_vec();
        let layers = self.layers();
        let last = layers.len() - 1;
        for (k, l) in layers.iter().enumerate() {
            let mut z = Vec::with_capacity(l.n_out);
            for o in 0..l.n_out {
                let row = &self.theta[l.w + o * l.n_in..l.w + (o + 1) * l.n_in];
                let mut acc = S::cst(self.theta[l.b + o]);
                for (wi, ai) in row.iter().zip(&a) {
                    if *wi != 0.0 {
                        acc += *ai * *wi;
                    }
                }
                z.push(if k == last { acc } else { self.arch.activation.apply(acc) });
            }
            a = z;
        }
        a
    }

    /// Network output as a symmetric matrix.
    pub fn output_mat<S: Real>(&self, x: &[S; 4]) -> Mat4<S> {
        let o = self.output(x);
        let mut m = [[S::zero(); 4]; 4];
        match self.arch.output {
            OutputMode::Packed10 => {
                for (k, &(i, j)) in PACKED.iter().enumerate() {
                    m[i][j] = o[k];
                    m[j][i] = o[k];
                }
            }
            OutputMode::Full16 => {
                for i in 0..4 {
                    for j in 0..4 {
                        m[i][j] = (o[4 * i + j] + o[4 * j + i]) * 0.5;
                    }
                }
            }
        }
        m
    }

    /// Predicted distortion (or raw metric, per [`Target`]) at `x`.
    pub fn forward(&self, x: &[f64; 4]) -> SymMetric {
        let m = self.output_mat(x);
        SymMetric { packed: PACKED.map(|(i, j)| m[i][j]) }
    }

    pub fn in_box(&self, x: &[f64; 4]) -> bool {
        self.norm.contains(x)
    }

    pub fn storage(&self) -> StorageReport {
        StorageReport::for_count(self.param_count())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            arch: self.arch.clone(),
            chart: self.chart,
            params: self.params,
            target: self.target,
            norm: self.norm,
            meta: self.meta.clone(),
            count: self.theta.len(),
        };
        let text = serde_json::to_string(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut out = Vec::with_capacity(12 + text.len() + 8 * self.theta.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(text.len() as u32).to_le_bytes());
        out.extend_from_slice(text.as_bytes());
        for v in &self.theta {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let bad = |s: &str| Error::Checkpoint(s.to_string());
        if buf.len() < 12 || &buf[..4] != MAGIC {
            return Err(bad("missing EINF magic"));
        }
        let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let hlen = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
        let text = buf.get(12..12 + hlen).ok_or_else(|| bad("truncated header"))?;
        let h: Header = serde_json::from_slice(text).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
        h.arch.validate()?;
        if h.count != h.arch.param_count() {
            return Err(Error::Checkpoint(format!("header count {} does not fit architecture", h.count)));
        }
        let blob = &buf[12 + hlen..];
        if blob.len() != 8 * h.count {
            return Err(Error::Checkpoint(format!("expected {} payload bytes, found {}", 8 * h.count, blob.len())));
        }
        let theta = blob.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(FieldModel { arch: h.arch, chart: h.chart, params: h.params, target: h.target, norm: h.norm, theta, meta: h.meta })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    arch: Arch,
    chart: ChartId,
    params: MetricParams,
    target: Target,
    norm: Normalization,
    meta: BTreeMap<String, String>,
    count: usize,
}

impl MetricField for FieldModel {
    fn chart(&self) -> ChartId {
        self.chart
    }
    fn eval<S: Real>(&self, x: &[S; 4]) -> Mat4<S> {
        let mut g = self.output_mat(x);
        if self.target == Target::Distortion {
            let b = background_generic(self.chart, &self.params, x);
            for i in 0..4 {
                for j in 0..4 {
                    g[i][j] += b[i][j];
                }
            }
        }
        g
    }
    fn check(&self, x: &[f64; 4]) -> Result<()> {
        check_coords(self.chart, x)
    }
    fn in_training_box(&self, x: &[f64; 4]) -> bool {
        self.in_box(x)
    }
}

/// Parameter storage under the 4-byte-per-float convention and the actual 8-byte payload.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StorageReport {
    pub count: usize,
    pub f32_bytes: usize,
    pub f64_bytes: usize,
}

impl StorageReport {
    pub fn for_count(count: usize) -> Self {
        StorageReport { count, f32_bytes: 4 * count, f64_bytes: 8 * count }
    }
    pub fn f32_kib(&self) -> f64 {
        self.f32_bytes as f64 / 1024.0
    }
    pub fn f64_kib(&self) -> f64 {
        self.f64_bytes as f64 / 1024.0
    }
}

impl fmt::Display for StorageReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} parameters: {:.2} KiB as float32, {:.2} KiB stored as float64",
            self.count,
            self.f32_kib(),
            self.f64_kib()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{metric_jet, BackgroundMetric};
    use crate::jet::jet_scalar;

    fn sph() -> (ChartId, MetricParams) {
        (ChartId::SchwarzschildSpherical, MetricParams::schwarzschild(1.0))
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(Arch::new(3, 64, Activation::Silu, OutputMode::Packed10).param_count(), 9290);
        // six hidden layers of 190 is the closest layout to the quoted 185K
        assert_eq!(Arch::new(6, 190, Activation::Silu, OutputMode::Full16).param_count(), 185_456);
        let (c, p) = sph();
        let m = FieldModel::init(Arch::new(3, 64, Activation::Silu, OutputMode::Packed10), c, p, Normalization::default(), 1)
            .unwrap();
        assert_eq!(m.theta.len(), 9290);
        let l = m.layers();
        assert_eq!(l.last().unwrap().b + 10, 9290);
    }

    #[test]
    fn zero_width_rejected() {
        let (c, p) = sph();
        let arch = Arch { hidden: vec![8, 0], activation: Activation::Silu, output: OutputMode::Packed10 };
        assert!(FieldModel::init(arch, c, p, Normalization::default(), 0).is_err());
    }

    #[test]
    fn init_deterministic() {
        let (c, p) = sph();
        let a = Arch::new(2, 16, Activation::Sine { zeta0: 30.0 }, OutputMode::Packed10);
        let m1 = FieldModel::init(a.clone(), c, p, Normalization::default(), 42).unwrap();
        let m2 = FieldModel::init(a.clone(), c, p, Normalization::default(), 42).unwrap();
        let m3 = FieldModel::init(a, c, p, Normalization::default(), 43).unwrap();
        assert_eq!(m1, m2);
        assert_ne!(m1.theta, m3.theta);
    }

    #[test]
    fn zero_model_is_background() {
        let (c, p) = sph();
        let m = FieldModel::zeros(Arch::new(3, 8, Activation::Silu, OutputMode::Full16), c, p, Normalization::default())
            .unwrap();
        let x = [0.3, 6.0, 1.1, 0.4];
        assert_eq!(m.forward(&x).packed, [0.0; 10]);
        let a = metric_jet(&m, &x).unwrap();
        let b = metric_jet(&BackgroundMetric { chart: c, params: p }, &x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn silu_at_zero() {
        let d = Activation::Silu.derivs(0.0);
        assert_eq!(d[0], 0.0);
        assert!((d[1] - 0.5).abs() < 1e-15);
        assert!((d[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn closed_form_derivatives_match_jets() {
        let acts = [Activation::Silu, Activation::Sine { zeta0: 3.0 }, Activation::Gabor { zeta0: 2.0, s0: 0.7 }];
        for act in acts {
            for &z in &[-3.1, -0.4, 0.0, 0.25, 1.7, 6.0] {
                let d = act.derivs(z);
                let j = jet_scalar(|x| act.apply(x[0]), &[z, 0.0, 0.0, 0.0]).unwrap();
                assert!((d[0] - j.v).abs() < 1e-14);
                assert!((d[1] - j.g[0]).abs() < 1e-13);
                assert!((d[2] - j.h[0][0]).abs() < 1e-12);
                let h = 1e-4;
                let fd3 = (act.derivs(z + h)[2] - act.derivs(z - h)[2]) / (2.0 * h);
                assert!((d[3] - fd3).abs() < 1e-6 * (1.0 + d[3].abs()), "{act:?} {z}");
            }
        }
    }

    #[test]
    fn sine_jets_scale_with_frequency() {
        let (c, p) = sph();
        for zeta in [1.0, 5.0, 30.0] {
            let arch = Arch { hidden: vec![1], activation: Activation::Sine { zeta0: zeta }, output: OutputMode::Packed10 };
            let mut m = FieldModel::zeros(arch, c, p, Normalization::default()).unwrap();
            let l = m.layers();
            m.theta[l[0].w] = 1.0;
            m.theta[l[1].w] = 1.0;
            let x0 = 0.013;
            let j = jet_scalar(|x| m.output(x)[0], &[x0, 0.0, 0.0, 0.0]).unwrap();
            assert!((j.g[0] - zeta * (zeta * x0).cos()).abs() < 1e-12 * zeta);
            assert!((j.h[0][0] + zeta * zeta * (zeta * x0).sin()).abs() < 1e-12 * zeta * zeta);
        }
    }

    #[test]
    fn periodic_axis_wraps_with_derivatives() {
        let (c, p) = sph();
        let mut norm = Normalization::from_box([0.0, 3.0, 0.5, 0.0], [0.0, 20.0, 2.5, 5.9]);
        norm.period[3] = 2.0 * std::f64::consts::PI;
        let m = FieldModel::init(Arch::new(2, 16, Activation::Silu, OutputMode::Packed10), c, p, norm, 3).unwrap();
        let x = [0.0, 7.0, 1.1, 0.4];
        let j0 = jet_scalar(|y| m.output(y)[3], &x).unwrap();
        for k in [-2.0, 1.0, 5.0] {
            let y = [x[0], x[1], x[2], x[3] + k * 2.0 * std::f64::consts::PI];
            let j = jet_scalar(|z| m.output(z)[3], &y).unwrap();
            assert!((j.v - j0.v).abs() < 1e-13 && (j.g[3] - j0.g[3]).abs() < 1e-12 && (j.h[3][3] - j0.h[3][3]).abs() < 1e-11);
            assert!(m.in_box(&y));
        }
        assert!(!m.in_box(&[0.0, 25.0, 1.1, 0.4]));
    }

    #[test]
    fn full16_symmetrised() {
        let (c, p) = sph();
        let m = FieldModel::init(Arch::new(2, 12, Activation::Silu, OutputMode::Full16), c, p, Normalization::default(), 5)
            .unwrap();
        let g = m.output_mat(&[0.1, 5.0, 1.0, 0.2]);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(g[i][j], g[j][i]);
            }
        }
    }

    #[test]
    fn jet_matches_finite_differences() {
        let (c, p) = sph();
        let norm = Normalization::from_box([0.0, 3.0, 0.5, -3.0], [1.0, 20.0, 2.5, 3.0]);
        let m = FieldModel::init(Arch::new(3, 24, Activation::Silu, OutputMode::Packed10), c, p, norm, 9).unwrap();
        let x = [0.4, 7.0, 1.2, 0.5];
        let j = metric_jet(&m, &x).unwrap();
        let mut errs = Vec::new();
        for h in [1e-2, 5e-3] {
            let mut e: f64 = 0.0;
            for mu in 0..4 {
                let mut xp = x;
                let mut xm = x;
                xp[mu] += h;
                xm[mu] -= h;
                let (gp, gm) = (m.eval(&xp), m.eval(&xm));
                for a in 0..4 {
                    for b in 0..4 {
                        e = e.max(((gp[a][b] - gm[a][b]) / (2.0 * h) - j.jac[mu][a][b]).abs());
                    }
                }
            }
            errs.push(e);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.8 && order < 2.2, "{errs:?}");
    }

    #[test]
    fn checkpoint_roundtrip_and_determinism() {
        let (c, p) = sph();
        let m = FieldModel::init(
            Arch::new(2, 10, Activation::Gabor { zeta0: 3.0, s0: 0.5 }, OutputMode::Packed10),
            c,
            p,
            Normalization::from_box([0.0, 2.5, 0.1, -3.0], [0.0, 150.0, 3.0, 3.0]),
            3,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.einf");
        m.save(&path).unwrap();
        let back = FieldModel::load(&path).unwrap();
        assert_eq!(back, m);
        assert!(back.theta.iter().zip(&m.theta).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(m.to_bytes().unwrap(), back.to_bytes().unwrap());
    }

    #[test]
    fn corrupt_checkpoints_rejected() {
        let (c, p) = sph();
        let m = FieldModel::init(Arch::new(1, 4, Activation::Silu, OutputMode::Packed10), c, p, Normalization::default(), 1)
            .unwrap();
        let bytes = m.to_bytes().unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(FieldModel::from_bytes(&bad).is_err());
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(FieldModel::from_bytes(&bad).is_err());
        let mut bad = bytes.clone();
        bad[14] = b'#';
        assert!(FieldModel::from_bytes(&bad).is_err());
        assert!(FieldModel::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn storage_convention() {
        let r = StorageReport::for_count(13_500);
        assert!((r.f32_kib() - 52.734375).abs() < 1e-12);
        assert_eq!(StorageReport::for_count(21_760).f32_kib(), 85.0);
    }
}
