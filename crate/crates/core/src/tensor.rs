//! Dense 4D tensors, packed symmetric metrics, and closed-form 4×4 inversion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Real;

pub type Mat4<S = f64> = [[S; 4]; 4];
pub type Gamma<S = f64> = [[[S; 4]; 4]; 4];
pub type Rank4<S = f64> = [[[[S; 4]; 4]; 4]; 4];

/// Packed index order (00,01,02,03,11,12,13,22,23,33).
pub const PACKED: [(usize, usize); 10] = [
    (0, 0),
    (0, 1),
    (0, 2),
    (0, 3),
    (1, 1),
    (1, 2),
    (1, 3),
    (2, 2),
    (2, 3),
    (3, 3),
];

pub fn packed_index(i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    match a {
        0 => b,
        1 => 3 + b,
        2 => 5 + b,
        _ => 9,
    }
}

pub fn zeros4<S: Real>() -> Mat4<S> {
    [[S::zero(); 4]; 4]
}

pub fn det4<S: Real>(m: &Mat4<S>) -> S {
    cofactor_inverse_parts(m).1
}

fn cofactor_inverse_parts<S: Real>(m: &Mat4<S>) -> (Mat4<S>, S) {
    // 2×2 minors of the top and bottom row pairs
    let s0 = m[0][0] * m[1][1] - m[1][0] * m[0][1];
    let s1 = m[0][0] * m[1][2] - m[1][0] * m[0][2];
    let s2 = m[0][0] * m[1][3] - m[1][0] * m[0][3];
    let s3 = m[0][1] * m[1][2] - m[1][1] * m[0][2];
    let s4 = m[0][1] * m[1][3] - m[1][1] * m[0][3];
    let s5 = m[0][2] * m[1][3] - m[1][2] * m[0][3];
    let c5 = m[2][2] * m[3][3] - m[3][2] * m[2][3];
    let c4 = m[2][1] * m[3][3] - m[3][1] * m[2][3];
    let c3 = m[2][1] * m[3][2] - m[3][1] * m[2][2];
    let c2 = m[2][0] * m[3][3] - m[3][0] * m[2][3];
    let c1 = m[2][0] * m[3][2] - m[3][0] * m[2][2];
    let c0 = m[2][0] * m[3][1] - m[3][0] * m[2][1];
    let det = s0 * c5 - s1 * c4 + s2 * c3 + s3 * c2 - s4 * c1 + s5 * c0;
    let adj = [
        [
            m[1][1] * c5 - m[1][2] * c4 + m[1][3] * c3,
            -(m[0][1] * c5) + m[0][2] * c4 - m[0][3] * c3,
            m[3][1] * s5 - m[3][2] * s4 + m[3][3] * s3,
            -(m[2][1] * s5) + m[2][2] * s4 - m[2][3] * s3,
        ],
        [
            -(m[1][0] * c5) + m[1][2] * c2 - m[1][3] * c1,
            m[0][0] * c5 - m[0][2] * c2 + m[0][3] * c1,
            -(m[3][0] * s5) + m[3][2] * s2 - m[3][3] * s1,
            m[2][0] * s5 - m[2][2] * s2 + m[2][3] * s1,
        ],
        [
            m[1][0] * c4 - m[1][1] * c2 + m[1][3] * c0,
            -(m[0][0] * c4) + m[0][1] * c2 - m[0][3] * c0,
            m[3][0] * s4 - m[3][1] * s2 + m[3][3] * s0,
            -(m[2][0] * s4) + m[2][1] * s2 - m[2][3] * s0,
        ],
        [
            -(m[1][0] * c3) + m[1][1] * c1 - m[1][2] * c0,
            m[0][0] * c3 - m[0][1] * c1 + m[0][2] * c0,
            -(m[3][0] * s3) + m[3][1] * s1 - m[3][2] * s0,
            m[2][0] * s3 - m[2][1] * s1 + m[2][2] * s0,
        ],
    ];
    (adj, det)
}

/// Cofactor inverse; fails when |det| < 1e-12.
pub fn inv4<S: Real>(m: &Mat4<S>) -> Result<Mat4<S>> {
    let (adj, det) = cofactor_inverse_parts(m);
    if !(det.re().abs() >= 1e-12) {
        return Err(Error::SingularMetric { point: [f64::NAN; 4], det: det.re() });
    }
    let r = det.recip();
    Ok(adj.map(|row| row.map(|x| x * r)))
}

pub fn matmul4<S: Real>(a: &Mat4<S>, b: &Mat4<S>) -> Mat4<S> {
    let mut c = zeros4();
    for i in 0..4 {
        for j in 0..4 {
            let mut s = S::zero();
            for k in 0..4 {
                s += a[i][k] * b[k][j];
            }
            c[i][j] = s;
        }
    }
    c
}

pub fn re4<S: Real>(m: &Mat4<S>) -> Mat4 {
    m.map(|r| r.map(|x| x.re()))
}

/// Symmetric 4×4 stored as its 10 independent entries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMetric {
    pub packed: [f64; 10],
}

impl SymMetric {
    pub fn from_packed(packed: [f64; 10]) -> Self {
        SymMetric { packed }
    }

    pub fn minkowski() -> Self {
        sym_pack(&diag([-1.0, 1.0, 1.0, 1.0])).unwrap().0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.packed[packed_index(i, j)]
    }

    pub fn to_mat(&self) -> Mat4 {
        sym_unpack(self)
    }

    pub fn inverse(&self) -> Result<Mat4> {
        inv4(&self.to_mat())
    }

    pub fn det(&self) -> f64 {
        det4(&self.to_mat())
    }

    /// Number of (negative, positive) eigenvalues.
    pub fn signature(&self) -> (usize, usize) {
        let m = nalgebra::Matrix4::from_fn(|i, j| self.get(i, j));
        let ev = m.symmetric_eigenvalues();
        let neg = ev.iter().filter(|&&e| e < 0.0).count();
        let pos = ev.iter().filter(|&&e| e > 0.0).count();
        (neg, pos)
    }

    pub fn is_lorentzian(&self) -> bool {
        self.signature() == (1, 3)
    }
}

pub fn diag(d: [f64; 4]) -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    for i in 0..4 {
        m[i][i] = d[i];
    }
    m
}

/// Packs a symmetric matrix, returning the max asymmetry that was averaged away.
pub fn sym_pack(m: &Mat4) -> Result<(SymMetric, f64)> {
    let mut asym: f64 = 0.0;
    for i in 0..4 {
        for j in i + 1..4 {
            asym = asym.max((m[i][j] - m[j][i]).abs());
        }
    }
    if asym > 1e-6 {
        return Err(Error::Asymmetric(asym));
    }
    let mut packed = [0.0; 10];
    for (k, &(i, j)) in PACKED.iter().enumerate() {
        packed[k] = if asym > 1e-12 { 0.5 * (m[i][j] + m[j][i]) } else { m[i][j] };
    }
    Ok((SymMetric { packed }, asym))
}

pub fn sym_unpack(s: &SymMetric) -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    for (k, &(i, j)) in PACKED.iter().enumerate() {
        m[i][j] = s.packed[k];
        m[j][i] = s.packed[k];
    }
    m
}

/// Dense tensor with a variance tag per slot (true = contravariant).
///
/// Constructors lay contravariant slots first. Raising or lowering flips a tag in
/// place, so slot positions never move.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4 {
    pub rank_up: usize,
    pub rank_down: usize,
    pub up: Vec<bool>,
    pub data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(rank_up: usize, rank_down: usize) -> Self {
        let rank = rank_up + rank_down;
        let mut up = vec![true; rank_up];
        up.extend(std::iter::repeat(false).take(rank_down));
        Tensor4 { rank_up, rank_down, up, data: vec![0.0; 4usize.pow(rank as u32)] }
    }

    pub fn from_data(rank_up: usize, rank_down: usize, data: Vec<f64>) -> Result<Self> {
        let mut t = Self::zeros(rank_up, rank_down);
        if data.len() != t.data.len() {
            return Err(Error::Shape(format!(
                "expected {} entries, got {}",
                t.data.len(),
                data.len()
            )));
        }
        t.data = data;
        Ok(t)
    }

    pub fn scalar(v: f64) -> Self {
        Tensor4 { rank_up: 0, rank_down: 0, up: vec![], data: vec![v] }
    }

    pub fn vector(v: [f64; 4]) -> Self {
        Self::from_data(1, 0, v.to_vec()).unwrap()
    }

    pub fn covector(v: [f64; 4]) -> Self {
        Self::from_data(0, 1, v.to_vec()).unwrap()
    }

    pub fn from_mat(m: &Mat4, rank_up: usize) -> Self {
        Self::from_data(rank_up, 2 - rank_up, m.iter().flatten().copied().collect()).unwrap()
    }

    pub fn delta() -> Self {
        Self::from_mat(&diag([1.0; 4]), 1)
    }

    pub fn rank(&self) -> usize {
        self.up.len()
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * 4 + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn scale(&self, k: f64) -> Self {
        let mut t = self.clone();
        t.data.iter_mut().for_each(|x| *x *= k);
        t
    }

    pub fn add(&self, o: &Tensor4) -> Result<Self> {
        if self.up != o.up {
            return Err(Error::Shape("variance patterns differ".into()));
        }
        let mut t = self.clone();
        for (a, b) in t.data.iter_mut().zip(&o.data) {
            *a += b;
        }
        Ok(t)
    }

    fn with_tags(up: Vec<bool>) -> Self {
        let rank_up = up.iter().filter(|&&u| u).count();
        let rank_down = up.len() - rank_up;
        Tensor4 { rank_up, rank_down, data: vec![0.0; 4usize.pow(up.len() as u32)], up }
    }
}

fn unravel(mut flat: usize, rank: usize, out: &mut [usize]) {
    for k in (0..rank).rev() {
        out[k] = flat % 4;
        flat /= 4;
    }
}

/// Contracts slot `sa` of `a` against slot `sb` of `b`. Remaining slots of `a`
/// precede those of `b`.
pub fn contract(a: &Tensor4, sa: usize, b: &Tensor4, sb: usize) -> Result<Tensor4> {
    if sa >= a.rank() {
        return Err(Error::SlotOutOfRange { slot: sa, rank: a.rank() });
    }
    if sb >= b.rank() {
        return Err(Error::SlotOutOfRange { slot: sb, rank: b.rank() });
    }
    if a.up[sa] == b.up[sb] {
        return Err(Error::SameVariance);
    }
    let mut tags: Vec<bool> =
        a.up.iter().enumerate().filter(|(i, _)| *i != sa).map(|(_, &u)| u).collect();
    tags.extend(b.up.iter().enumerate().filter(|(i, _)| *i != sb).map(|(_, &u)| u));
    let mut out = Tensor4::with_tags(tags);
    let (ra, rb) = (a.rank(), b.rank());
    let mut ia = vec![0usize; ra];
    let mut ib = vec![0usize; rb];
    let mut io = vec![0usize; out.rank()];
    for f in 0..out.data.len() {
        unravel(f, out.rank(), &mut io);
        let mut k = 0;
        for (s, slot) in ia.iter_mut().enumerate() {
            if s != sa {
                *slot = io[k];
                k += 1;
            }
        }
        for (s, slot) in ib.iter_mut().enumerate() {
            if s != sb {
                *slot = io[k];
                k += 1;
            }
        }
        let mut acc = 0.0;
        for c in 0..4 {
            ia[sa] = c;
            ib[sb] = c;
            acc += a.get(&ia) * b.get(&ib);
        }
        out.data[f] = acc;
    }
    Ok(out)
}

/// Trace over one contravariant and one covariant slot of the same tensor.
pub fn trace(t: &Tensor4, s1: usize, s2: usize) -> Result<Tensor4> {
    let r = t.rank();
    for s in [s1, s2] {
        if s >= r {
            return Err(Error::SlotOutOfRange { slot: s, rank: r });
        }
    }
    if s1 == s2 || t.up[s1] == t.up[s2] {
        return Err(Error::SameVariance);
    }
    let tags: Vec<bool> =
        t.up.iter().enumerate().filter(|(i, _)| *i != s1 && *i != s2).map(|(_, &u)| u).collect();
    let mut out = Tensor4::with_tags(tags);
    let mut it = vec![0usize; r];
    let mut io = vec![0usize; out.rank()];
    for f in 0..out.data.len() {
        unravel(f, out.rank(), &mut io);
        let mut k = 0;
        for (s, slot) in it.iter_mut().enumerate() {
            if s != s1 && s != s2 {
                *slot = io[k];
                k += 1;
            }
        }
        let mut acc = 0.0;
        for c in 0..4 {
            it[s1] = c;
            it[s2] = c;
            acc += t.get(&it);
        }
        out.data[f] = acc;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

/// Flips the variance of one slot using g (lowering) or g⁻¹ (raising).
pub fn raise_lower(t: &Tensor4, slot: usize, g: &SymMetric, dir: Direction) -> Result<Tensor4> {
    let r = t.rank();
    if slot >= r {
        return Err(Error::SlotOutOfRange { slot, rank: r });
    }
    let want_up = dir == Direction::Up;
    if t.up[slot] == want_up {
        return Err(Error::Invalid(format!("slot {slot} already has the requested variance")));
    }
    let m = match dir {
        Direction::Down => g.to_mat(),
        Direction::Up => {
            if g.det().abs() < 1e-12 {
                return Err(Error::SingularMetric { point: [f64::NAN; 4], det: g.det() });
            }
            g.inverse()?
        }
    };
    Ok(raise_lower_with(t, slot, &m))
}

pub(crate) fn raise_lower_with(t: &Tensor4, slot: usize, m: &Mat4) -> Tensor4 {
    let mut out = t.clone();
    out.up[slot] = !t.up[slot];
    out.rank_up = out.up.iter().filter(|&&u| u).count();
    out.rank_down = out.rank() - out.rank_up;
    let r = t.rank();
    let mut idx = vec![0usize; r];
    for f in 0..t.data.len() {
        unravel(f, r, &mut idx);
        let a = idx[slot];
        let mut acc = 0.0;
        for c in 0..4 {
            idx[slot] = c;
            acc += m[a][c] * t.get(&idx);
        }
        out.data[f] = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eta() -> SymMetric {
        SymMetric::minkowski()
    }

    #[test]
    fn delta_trace_is_four() {
        let t = trace(&Tensor4::delta(), 0, 1).unwrap();
        assert_eq!(t.data, vec![4.0]);
    }

    #[test]
    fn dot_product() {
        let v = Tensor4::vector([1.0, 0.0, 0.0, 0.0]);
        let w = Tensor4::covector([3.0, 0.0, 0.0, 0.0]);
        assert_eq!(contract(&v, 0, &w, 0).unwrap().data, vec![3.0]);
    }

    #[test]
    fn inverse_metric_contracts_to_delta() {
        let up = Tensor4::from_mat(&eta().inverse().unwrap(), 2);
        let down = Tensor4::from_mat(&eta().to_mat(), 0);
        let d = contract(&up, 1, &down, 0).unwrap();
        assert_eq!(d, Tensor4::delta());
    }

    #[test]
    fn same_variance_and_range_errors() {
        let v = Tensor4::vector([1.0; 4]);
        assert_eq!(contract(&v, 0, &v, 0), Err(Error::SameVariance));
        assert!(matches!(contract(&v, 1, &v, 0), Err(Error::SlotOutOfRange { .. })));
    }

    #[test]
    fn lower_with_minkowski_and_schwarzschild() {
        let v = Tensor4::vector([1.0, 0.0, 0.0, 0.0]);
        let l = raise_lower(&v, 0, &eta(), Direction::Down).unwrap();
        assert_eq!(l.data, vec![-1.0, 0.0, 0.0, 0.0]);
        assert!(!l.up[0]);
        let g = sym_pack(&diag([-0.5, 2.0, 16.0, 16.0])).unwrap().0;
        let v = Tensor4::vector([0.0, 1.0, 0.0, 0.0]);
        let l = raise_lower(&v, 0, &g, Direction::Down).unwrap();
        assert_eq!(l.data, vec![0.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn pack_examples() {
        let (s, asym) = sym_pack(&diag([-1.0, 1.0, 1.0, 1.0])).unwrap();
        assert_eq!(s.packed, [-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(asym, 0.0);
        let mut m = diag([1.0; 4]);
        m[0][1] = 1e-3;
        assert!(matches!(sym_pack(&m), Err(Error::Asymmetric(_))));
        m[0][1] = 1e-9;
        let (s, asym) = sym_pack(&m).unwrap();
        assert!((asym - 1e-9).abs() < 1e-20);
        assert_eq!(s.get(0, 1), 5e-10);
    }

    #[test]
    fn singular_raise_errors() {
        let g = sym_pack(&diag([0.0, 1.0, 1.0, 1.0])).unwrap().0;
        let v = Tensor4::covector([1.0; 4]);
        assert!(matches!(raise_lower(&v, 0, &g, Direction::Up), Err(Error::SingularMetric { .. })));
    }

    #[test]
    fn minkowski_lowering_flips_time_sign() {
        let t = Tensor4::from_data(2, 0, (0..16).map(|i| i as f64 + 1.0).collect()).unwrap();
        let l = raise_lower(&t, 0, &eta(), Direction::Down).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let s = if i == 0 { -1.0 } else { 1.0 };
                assert_eq!(l.get(&[i, j]), s * t.get(&[i, j]));
            }
        }
        let back = raise_lower(&l, 0, &eta(), Direction::Up).unwrap();
        assert_eq!(back, t);
    }

    fn sym_strategy() -> impl Strategy<Value = Mat4> {
        proptest::array::uniform10(-1.0f64..1.0).prop_map(|p| {
            let mut m = sym_unpack(&SymMetric::from_packed(p));
            // diagonally dominated Lorentzian-ish matrices keep |det| away from zero
            m[0][0] -= 4.0;
            for i in 1..4 {
                m[i][i] += 4.0;
            }
            m
        })
    }

    proptest! {
        #[test]
        fn pack_roundtrip(m in sym_strategy()) {
            let (s, _) = sym_pack(&m).unwrap();
            prop_assert_eq!(sym_unpack(&s), m);
            prop_assert_eq!(sym_pack(&sym_unpack(&s)).unwrap().0, s);
        }

        #[test]
        fn inverse_identity(m in sym_strategy()) {
            prop_assume!(det4(&m).abs() > 0.1);
            let p = matmul4(&inv4(&m).unwrap(), &m);
            for i in 0..4 {
                for j in 0..4 {
                    let e = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((p[i][j] - e).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn raise_lower_roundtrip(m in sym_strategy(), d in proptest::collection::vec(-2.0f64..2.0, 64), slot in 0usize..3) {
            let g = sym_pack(&m).unwrap().0;
            let t = Tensor4::from_data(1, 2, d).unwrap();
            let flipped = if t.up[slot] {
                raise_lower(&raise_lower(&t, slot, &g, Direction::Down).unwrap(), slot, &g, Direction::Up).unwrap()
            } else {
                raise_lower(&raise_lower(&t, slot, &g, Direction::Up).unwrap(), slot, &g, Direction::Down).unwrap()
            };
            for (a, b) in flipped.data.iter().zip(&t.data) {
                prop_assert!((a - b).abs() < 1e-13 * (1.0 + b.abs()) * 10.0);
            }
        }

        #[test]
        fn contract_bilinear(
            a in proptest::collection::vec(-1.0f64..1.0, 16),
            b in proptest::collection::vec(-1.0f64..1.0, 16),
            c in proptest::collection::vec(-1.0f64..1.0, 4),
            al in -3.0f64..3.0, be in -3.0f64..3.0,
        ) {
            let ta = Tensor4::from_data(1, 1, a).unwrap();
            let tb = Tensor4::from_data(1, 1, b).unwrap();
            let w = Tensor4::vector([c[0], c[1], c[2], c[3]]);
            let lhs = contract(&ta.scale(al).add(&tb.scale(be)).unwrap(), 1, &w, 0).unwrap();
            let rhs = contract(&ta, 1, &w, 0).unwrap().scale(al)
                .add(&contract(&tb, 1, &w, 0).unwrap().scale(be)).unwrap();
            for (x, y) in lhs.data.iter().zip(&rhs.data) {
                prop_assert!((x - y).abs() < 1e-13);
            }
        }
    }
}
