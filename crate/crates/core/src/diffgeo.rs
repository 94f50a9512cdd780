//! Christoffel → Riemann → Ricci → Einstein/Weyl → invariants, plus covariant and
//! Lie derivatives, parallel transport, and identity residuals.
//!
//! Riemann convention: R^ρ_{σμν} = ∂_μΓ^ρ_{νσ} − ∂_νΓ^ρ_{μσ} + Γ^ρ_{μλ}Γ^λ_{νσ} − Γ^ρ_{νλ}Γ^λ_{μσ},
//! Ricci R_{αβ} = R^γ_{αγβ}.

use crate::error::{Error, Result};
use crate::field::{
    christoffel_with_inverse, metric_dual, metric_jet, nested_metric_jet, with_point, MetricField,
    MetricJet,
};
use crate::jet::{seed_jet, Jet2, Real};
use crate::ode::{integrate_ode, OdeOptions};
use crate::tensor::{
    contract, det4, inv4, raise_lower_with, sym_pack, trace, Gamma, Mat4, Rank4, Tensor4,
};

/// Γ^ρ_{μν}, indexed `gamma[ρ][μ][ν]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Christoffel {
    pub gamma: Gamma,
}

fn check_conditioning(g: &Mat4, x: &[f64; 4]) -> Result<()> {
    let det = det4(g);
    if !(det.abs() >= 1e-12) {
        return Err(Error::SingularMetric { point: *x, det });
    }
    let gi = inv4(g).map_err(|e| with_point(e, x))?;
    let n = |m: &Mat4| m.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let cond = n(g) * n(&gi);
    if !(cond <= 1e12) {
        return Err(Error::SingularMetric { point: *x, det });
    }
    Ok(())
}

pub fn christoffel(mj: &MetricJet) -> Result<Christoffel> {
    let gi = inv4(&mj.g)?;
    Ok(Christoffel { gamma: christoffel_with_inverse(&gi, &mj.jac) })
}

/// Christoffel symbols of a field at `x`, using first derivatives only.
pub fn christoffel_at<F: MetricField>(field: &F, x: &[f64; 4]) -> Result<Christoffel> {
    let (g, dg) = metric_dual(field, x)?;
    check_conditioning(&g, x)?;
    let gi = inv4(&g).map_err(|e| with_point(e, x))?;
    Ok(Christoffel { gamma: christoffel_with_inverse(&gi, &dg) })
}

/// Γ, ∂Γ (indexed `dgam[λ][ρ][μ][ν] = ∂_λΓ^ρ_{μν}`), and g⁻¹ from a metric jet.
pub fn christoffel_and_derivative<S: Real>(mj: &MetricJet<S>) -> Result<(Gamma<S>, [Gamma<S>; 4], Mat4<S>)> {
    let z = S::zero();
    let gi = inv4(&mj.g)?;
    let gam = christoffel_with_inverse(&gi, &mj.jac);
    // ∂_λ g^{ρσ} = −g^{ρα} ∂_λ g_{αβ} g^{βσ}
    let mut dgi = [[[z; 4]; 4]; 4];
    for l in 0..4 {
        let mut tmp = [[z; 4]; 4];
        for a in 0..4 {
            for s in 0..4 {
                let mut acc = z;
                for b in 0..4 {
                    acc += mj.jac[l][a][b] * gi[b][s];
                }
                tmp[a][s] = acc;
            }
        }
        for r in 0..4 {
            for s in 0..4 {
                let mut acc = z;
                for a in 0..4 {
                    acc += gi[r][a] * tmp[a][s];
                }
                dgi[l][r][s] = -acc;
            }
        }
    }
    // first-kind symbols and their derivatives
    let mut low = [[[z; 4]; 4]; 4];
    let mut dlow = [[[[z; 4]; 4]; 4]; 4];
    for s in 0..4 {
        for m in 0..4 {
            for n in m..4 {
                let v = (mj.jac[m][s][n] + mj.jac[n][s][m] - mj.jac[s][m][n]) * 0.5;
                low[s][m][n] = v;
                low[s][n][m] = v;
                for l in 0..4 {
                    let dv = (mj.hess[l][m][s][n] + mj.hess[l][n][s][m] - mj.hess[l][s][m][n]) * 0.5;
                    dlow[l][s][m][n] = dv;
                    dlow[l][s][n][m] = dv;
                }
            }
        }
    }
    let mut dgam = [[[[z; 4]; 4]; 4]; 4];
    for l in 0..4 {
        for r in 0..4 {
            for m in 0..4 {
                for n in m..4 {
                    let mut acc = z;
                    for s in 0..4 {
                        acc += dgi[l][r][s] * low[s][m][n] + gi[r][s] * dlow[l][s][m][n];
                    }
                    dgam[l][r][m][n] = acc;
                    dgam[l][r][n][m] = acc;
                }
            }
        }
    }
    Ok((gam, dgam, gi))
}

/// Riemann R^ρ_{σμν} and R_{ασμν} from Γ and ∂Γ.
pub fn riemann_from<S: Real>(g: &Mat4<S>, gam: &Gamma<S>, dgam: &[Gamma<S>; 4]) -> (Rank4<S>, Rank4<S>) {
    let z = S::zero();
    let mut up = [[[[z; 4]; 4]; 4]; 4];
    for r in 0..4 {
        for s in 0..4 {
            for m in 0..4 {
                for n in m + 1..4 {
                    let mut v = dgam[m][r][n][s] - dgam[n][r][m][s];
                    for l in 0..4 {
                        v += gam[r][m][l] * gam[l][n][s] - gam[r][n][l] * gam[l][m][s];
                    }
                    up[r][s][m][n] = v;
                    up[r][s][n][m] = -v;
                }
            }
        }
    }
    let mut down = [[[[z; 4]; 4]; 4]; 4];
    for a in 0..4 {
        for s in 0..4 {
            for m in 0..4 {
                for n in 0..4 {
                    let mut acc = z;
                    for r in 0..4 {
                        acc += g[a][r] * up[r][s][m][n];
                    }
                    down[a][s][m][n] = acc;
                }
            }
        }
    }
    (up, down)
}

pub fn rank4_tensor(r: &Rank4, rank_up: usize) -> Tensor4 {
    let data: Vec<f64> = r.iter().flatten().flatten().flatten().copied().collect();
    Tensor4::from_data(rank_up, 4 - rank_up, data).expect("rank-4 layout")
}

pub fn tensor_rank4(t: &Tensor4) -> Rank4 {
    let mut r = [[[[0.0; 4]; 4]; 4]; 4];
    for (k, v) in t.data.iter().enumerate() {
        r[k / 64][(k / 16) % 4][(k / 4) % 4][k % 4] = *v;
    }
    r
}

#[derive(Clone, Debug, PartialEq)]
pub struct Riemann {
    /// R^ρ_{σμν}
    pub up: Tensor4,
    /// R_{ασμν}
    pub down: Tensor4,
    pub metric: Mat4,
    pub gamma: Gamma,
}

pub fn riemann_from_jet(mj: &MetricJet, x: &[f64; 4]) -> Result<Riemann> {
    check_conditioning(&mj.g, x)?;
    let (gam, dgam, _) = christoffel_and_derivative(mj).map_err(|e| with_point(e, x))?;
    let (up, down) = riemann_from(&mj.g, &gam, &dgam);
    Ok(Riemann { up: rank4_tensor(&up, 1), down: rank4_tensor(&down, 0), metric: mj.g, gamma: gam })
}

pub fn riemann<F: MetricField>(field: &F, x: &[f64; 4]) -> Result<Riemann> {
    let mj = metric_jet(field, x)?;
    riemann_from_jet(&mj, x)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureBundle {
    pub riemann_down: Tensor4,
    pub ricci: Tensor4,
    pub ricci_scalar: f64,
    pub einstein: Tensor4,
    pub weyl: Tensor4,
    pub kretschmann: f64,
}

pub fn curvature_bundle<F: MetricField>(field: &F, x: &[f64; 4]) -> Result<CurvatureBundle> {
    let mj = metric_jet(field, x)?;
    curvature_bundle_from_jet(&mj, x)
}

pub fn curvature_bundle_from_jet(mj: &MetricJet, x: &[f64; 4]) -> Result<CurvatureBundle> {
    let rm = riemann_from_jet(mj, x)?;
    let g = mj.g;
    let gi = inv4(&g).map_err(|e| with_point(e, x))?;
    let ricci = trace(&rm.up, 0, 2)?;
    let ricci_mixed = raise_lower_with(&ricci, 0, &gi);
    let ricci_scalar = trace(&ricci_mixed, 0, 1)?.data[0];
    let mut einstein = ricci.clone();
    for a in 0..4 {
        for b in 0..4 {
            einstein.set(&[a, b], ricci.get(&[a, b]) - 0.5 * ricci_scalar * g[a][b]);
        }
    }
    let mut weyl = rm.down.clone();
    let ric = |a: usize, b: usize| ricci.get(&[a, b]);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let v = rm.down.get(&[a, b, c, d])
                        - 0.5 * (g[a][c] * ric(b, d) - g[a][d] * ric(b, c) - g[b][c] * ric(a, d) + g[b][d] * ric(a, c))
                        + ricci_scalar / 6.0 * (g[a][c] * g[b][d] - g[a][d] * g[b][c]);
                    weyl.set(&[a, b, c, d], v);
                }
            }
        }
    }
    let mut all_up = rm.down.clone();
    for s in 0..4 {
        all_up = raise_lower_with(&all_up, s, &gi);
    }
    let mut k = contract(&all_up, 0, &rm.down, 0)?;
    // remaining slots: (β γ δ)^up then (β γ δ)_down
    for _ in 0..3 {
        let r = k.rank() / 2;
        k = trace(&k, 0, r)?;
    }
    Ok(CurvatureBundle {
        riemann_down: rm.down,
        ricci,
        ricci_scalar,
        einstein,
        weyl,
        kretschmann: k.data[0],
    })
}

/// Closed-form Kretschmann scalar of Schwarzschild, 48M²/r⁶.
pub fn kretschmann_schwarzschild(m: f64, r: f64) -> f64 {
    48.0 * m * m / r.powi(6)
}

/// Closed-form Kretschmann scalar of Kerr at Boyer–Lindquist (r, θ).
pub fn kretschmann_kerr(m: f64, a: f64, r: f64, theta: f64) -> f64 {
    let p = (a * theta.cos()).powi(2);
    let sigma = r * r + p;
    48.0 * m * m * (r * r - p) * (sigma * sigma - 16.0 * r * r * p) / sigma.powi(6)
}

/// Max |R_{αβγδ} + R_{αγδβ} + R_{αδβγ}| relative to max |R_{αβγδ}|.
pub fn bianchi1_residual(r: &Tensor4) -> f64 {
    let mut worst: f64 = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let v = r.get(&[a, b, c, d]) + r.get(&[a, c, d, b]) + r.get(&[a, d, b, c]);
                    worst = worst.max(v.abs());
                }
            }
        }
    }
    worst / r.max_abs().max(f64::MIN_POSITIVE)
}

/// Max relative violation of R_{αβγδ} = −R_{βαγδ} = −R_{αβδγ} = R_{γδαβ}.
pub fn riemann_symmetry_residual(r: &Tensor4) -> f64 {
    let mut worst: f64 = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let v = r.get(&[a, b, c, d]);
                    worst = worst
                        .max((v + r.get(&[b, a, c, d])).abs())
                        .max((v + r.get(&[a, b, d, c])).abs())
                        .max((v - r.get(&[c, d, a, b])).abs());
                }
            }
        }
    }
    worst / r.max_abs().max(f64::MIN_POSITIVE)
}

/// ∇_ρ R_{αβγδ} via third metric derivatives, indexed `[ρ][α][β][γ][δ]`.
pub fn covariant_riemann<F: MetricField>(field: &F, x: &[f64; 4]) -> Result<Box<[Rank4; 4]>> {
    let nj = nested_metric_jet(field, x)?;
    let (gam, dgam, _) = christoffel_and_derivative(&nj).map_err(|e| with_point(e, x))?;
    let (_, down) = riemann_from(&nj.g, &gam, &dgam);
    let r0 = down.map(|a| a.map(|b| b.map(|c| c.map(|d| d.v))));
    let g0: Gamma = gam.map(|a| a.map(|b| b.map(|c| c.v)));
    let mut out = Box::new([[[[[0.0; 4]; 4]; 4]; 4]; 4]);
    for rho in 0..4 {
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let mut v = down[a][b][c][d].g[rho];
                        for l in 0..4 {
                            v -= g0[l][rho][a] * r0[l][b][c][d]
                                + g0[l][rho][b] * r0[a][l][c][d]
                                + g0[l][rho][c] * r0[a][b][l][d]
                                + g0[l][rho][d] * r0[a][b][c][l];
                        }
                        out[rho][a][b][c][d] = v;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Max |∇_σR_{αβγδ} + ∇_αR_{βσγδ} + ∇_βR_{σαγδ}| relative to max |∇R|.
pub fn bianchi2_residual<F: MetricField>(field: &F, x: &[f64; 4]) -> Result<f64> {
    let dr = covariant_riemann(field, x)?;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for s in 0..4 {
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        scale = scale.max(dr[s][a][b][c][d].abs());
                        let v = dr[s][a][b][c][d] + dr[a][b][s][c][d] + dr[b][s][a][c][d];
                        worst = worst.max(v.abs());
                    }
                }
            }
        }
    }
    Ok(worst / scale.max(f64::MIN_POSITIVE))
}

/// A tensor-valued field of fixed type; components laid out as in [`Tensor4`].
pub trait TensorField: Sync {
    fn rank_up(&self) -> usize;
    fn rank_down(&self) -> usize;
    fn eval<S: Real>(&self, x: &[S; 4]) -> Vec<S>;
}

/// The metric of a field viewed as a (0,2) tensor field.
pub struct MetricTensorField<'a, F>(pub &'a F);

impl<F: MetricField> TensorField for MetricTensorField<'_, F> {
    fn rank_up(&self) -> usize {
        0
    }
    fn rank_down(&self) -> usize {
        2
    }
    fn eval<S: Real>(&self, x: &[S; 4]) -> Vec<S> {
        self.0.eval(x).iter().flatten().copied().collect()
    }
}

fn tensor_jet<T: TensorField>(t: &T, x: &[f64; 4]) -> Result<(Vec<f64>, Vec<[f64; 4]>)> {
    let comps: Vec<Jet2> = t.eval(&seed_jet(x));
    let want = 4usize.pow((t.rank_up() + t.rank_down()) as u32);
    if comps.len() != want {
        return Err(Error::Shape(format!("tensor field returned {} components, expected {want}", comps.len())));
    }
    if comps.iter().any(|c| !c.all_finite()) {
        return Err(Error::NonDifferentiable(format!("tensor field at {x:?}")));
    }
    Ok((comps.iter().map(|c| c.v).collect(), comps.iter().map(|c| c.g).collect()))
}

fn unravel(mut f: usize, rank: usize) -> Vec<usize> {
    let mut idx = vec![0; rank];
    for k in (0..rank).rev() {
        idx[k] = f % 4;
        f /= 4;
    }
    idx
}

fn ravel(idx: &[usize]) -> usize {
    idx.iter().fold(0, |a, &i| a * 4 + i)
}

/// ∇_μ T with the derivative index appended as the last (covariant) slot.
pub fn covariant_derivative<T: TensorField, F: MetricField>(t: &T, metric: &F, x: &[f64; 4]) -> Result<Tensor4> {
    let gam = christoffel_at(metric, x)?.gamma;
    let (vals, grads) = tensor_jet(t, x)?;
    let (nu, nd) = (t.rank_up(), t.rank_down());
    let rank = nu + nd;
    let mut out = Tensor4::zeros(nu, nd + 1);
    for f in 0..vals.len() {
        let idx = unravel(f, rank);
        for mu in 0..4 {
            let mut v = grads[f][mu];
            for s in 0..rank {
                let mut j = idx.clone();
                for l in 0..4 {
                    j[s] = l;
                    let tv = vals[ravel(&j)];
                    if s < nu {
                        v += gam[idx[s]][mu][l] * tv;
                    } else {
                        v -= gam[l][mu][idx[s]] * tv;
                    }
                }
            }
            out.data[f * 4 + mu] = v;
        }
    }
    Ok(out)
}

/// Lie derivative L_V T from partial derivatives.
pub fn lie_derivative<T: TensorField, V: TensorField>(t: &T, v: &V, x: &[f64; 4]) -> Result<Tensor4> {
    let (tv, tg) = tensor_jet(t, x)?;
    let (vv, vg) = vector_jet(v, x)?;
    let dv = |a: usize, m: usize| vg[a][m];
    let partial_t = |f: usize, m: usize| tg[f][m];
    Ok(assemble_lie(t.rank_up(), t.rank_down(), &tv, &vv, partial_t, dv))
}

/// Lie derivative with every partial replaced by the Levi-Civita covariant derivative.
pub fn lie_derivative_covariant<T: TensorField, V: TensorField, F: MetricField>(
    t: &T,
    v: &V,
    metric: &F,
    x: &[f64; 4],
) -> Result<Tensor4> {
    let nt = covariant_derivative(t, metric, x)?;
    let nv = covariant_derivative(v, metric, x)?;
    let (tv, _) = tensor_jet(t, x)?;
    let (vv, _) = vector_jet(v, x)?;
    let dv = |a: usize, m: usize| nv.data[a * 4 + m];
    let partial_t = |f: usize, m: usize| nt.data[f * 4 + m];
    Ok(assemble_lie(t.rank_up(), t.rank_down(), &tv, &vv, partial_t, dv))
}

fn vector_jet<V: TensorField>(v: &V, x: &[f64; 4]) -> Result<(Vec<f64>, Vec<[f64; 4]>)> {
    if v.rank_up() != 1 || v.rank_down() != 0 {
        return Err(Error::Shape("Lie derivative needs a vector field".into()));
    }
    tensor_jet(v, x)
}

fn assemble_lie(
    nu: usize,
    nd: usize,
    tv: &[f64],
    vv: &[f64],
    dt: impl Fn(usize, usize) -> f64,
    dv: impl Fn(usize, usize) -> f64,
) -> Tensor4 {
    let rank = nu + nd;
    let mut out = Tensor4::zeros(nu, nd);
    for f in 0..tv.len() {
        let idx = unravel(f, rank);
        let mut acc = 0.0;
        for c in 0..4 {
            acc += vv[c] * dt(f, c);
        }
        for s in 0..rank {
            let mut j = idx.clone();
            for c in 0..4 {
                j[s] = c;
                let t = tv[ravel(&j)];
                if s < nu {
                    acc -= t * dv(idx[s], c);
                } else {
                    acc += t * dv(c, idx[s]);
                }
            }
        }
        out.data[f] = acc;
    }
    out
}

/// Parallel-transports `tensor` along `curve(λ) = (x, dx/dλ)` from λ₀ to λ₁.
pub fn parallel_transport<F, C>(
    tensor: &Tensor4,
    curve: C,
    lambda: (f64, f64),
    field: &F,
    opts: &OdeOptions,
) -> Result<Tensor4>
where
    F: MetricField,
    C: Fn(f64) -> ([f64; 4], [f64; 4]),
{
    let rank = tensor.rank();
    let tags = tensor.up.clone();
    let rhs = |lam: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let (x, u) = curve(lam);
        let gam = christoffel_at(field, &x)?.gamma;
        for f in 0..y.len() {
            let idx = unravel(f, rank);
            let mut acc = 0.0;
            for s in 0..rank {
                let mut j = idx.clone();
                for l in 0..4 {
                    j[s] = l;
                    let tv = y[ravel(&j)];
                    for m in 0..4 {
                        if tags[s] {
                            acc -= gam[idx[s]][m][l] * u[m] * tv;
                        } else {
                            acc += gam[l][m][idx[s]] * u[m] * tv;
                        }
                    }
                }
            }
            dy[f] = acc;
        }
        Ok(())
    };
    let sol = integrate_ode(rhs, lambda.0, &tensor.data, lambda.1, opts)?;
    let mut out = tensor.clone();
    out.data = sol.last_state().to_vec();
    Ok(out)
}

/// Metric packed for convenience in reports.
pub fn metric_at<F: MetricField>(field: &F, x: &[f64; 4]) -> Result<crate::tensor::SymMetric> {
    Ok(sym_pack(&crate::field::metric_value(field, x)?)?.0)
}
