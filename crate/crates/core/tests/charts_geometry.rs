use std::f64::consts::PI;

use einfields::charts::*;
use einfields::diffgeo::curvature_bundle;
use einfields::field::{AnalyticMetric, MetricField};
use einfields::jet::{seed_dual, Dual};
use einfields::tensor::Mat4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pullback(from: ChartId, to: ChartId, p: &MetricParams, x: &[f64; 4]) -> Mat4 {
    let y: [Dual<f64>; 4] = chart_transform_generic(from, to, p, &seed_dual(x)).unwrap();
    let yv = y.map(|d| d.v);
    let tgt = if to == ChartId::MinkowskiCartesian {
        background_generic(to, p, &yv)
    } else {
        metric_generic(to, p, &yv)
    };
    let mut out = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            let mut s = 0.0;
            for m in 0..4 {
                for n in 0..4 {
                    s += y[m].g[a] * y[n].g[b] * tgt[m][n];
                }
            }
            out[a][b] = s;
        }
    }
    out
}

fn random_angular(rng: &mut ChaCha8Rng, rmin: f64) -> [f64; 4] {
    [rng.gen_range(-5.0..5.0), rng.gen_range(rmin..rmin + 20.0), rng.gen_range(0.2..PI - 0.2), rng.gen_range(-PI..PI)]
}

fn max_diff(a: &Mat4, b: &Mat4) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            m = m.max((a[i][j] - b[i][j]).abs() / (1.0 + b[i][j].abs()));
        }
    }
    m
}

#[test]
fn pullback_matches_target_metric() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases = [
        (ChartId::SchwarzschildSpherical, ChartId::SchwarzschildKS, MetricParams::schwarzschild(1.0)),
        (ChartId::SchwarzschildSpherical, ChartId::SchwarzschildEF, MetricParams::schwarzschild(1.0)),
        (ChartId::KerrBL, ChartId::KerrKS, MetricParams::kerr(1.0, 0.7)),
        (ChartId::KerrBL, ChartId::KerrEF, MetricParams::kerr(1.0, 0.7)),
        (ChartId::KerrBL, ChartId::KerrKS, MetricParams::kerr(1.0, 0.95)),
    ];
    for (from, to, p) in cases {
        let rp = kerr_regions(&p).unwrap().r_plus;
        for _ in 0..200 {
            let x = random_angular(&mut rng, rp + 0.6);
            let pb = pullback(from, to, &p, &x);
            let src = metric_generic(from, &p, &x);
            let d = max_diff(&pb, &src);
            assert!(d < 1e-9, "{from}->{to} at {x:?}: {d:e}");
        }
    }
}

#[test]
fn background_pulls_back_from_cartesian() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (chart, p) in [
        (ChartId::SchwarzschildSpherical, MetricParams::schwarzschild(1.0)),
        (ChartId::KerrBL, MetricParams::kerr(1.0, 0.7)),
    ] {
        for _ in 0..100 {
            let x = random_angular(&mut rng, 3.0);
            let pb = pullback(chart, ChartId::MinkowskiCartesian, &p, &x);
            let bg = background_generic(chart, &p, &x);
            assert!(max_diff(&pb, &bg) < 1e-10);
        }
    }
}

fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

#[test]
fn roundtrips() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let pairs = [
        (ChartId::KerrBL, ChartId::KerrKS, MetricParams::kerr(1.0, 0.7)),
        (ChartId::KerrBL, ChartId::KerrEF, MetricParams::kerr(1.0, 0.7)),
        (ChartId::SchwarzschildSpherical, ChartId::SchwarzschildKS, MetricParams::schwarzschild(1.0)),
        (ChartId::SchwarzschildSpherical, ChartId::SchwarzschildEF, MetricParams::schwarzschild(1.0)),
        (ChartId::KerrBL, ChartId::MinkowskiCartesian, MetricParams::kerr(1.0, 0.7)),
    ];
    for (a, b, p) in pairs {
        for _ in 0..200 {
            let x = random_angular(&mut rng, 3.0);
            let pt = SpacetimePoint::new(a, x);
            let y = chart_transform(&pt, b, &p).unwrap();
            let back = chart_transform(&y, a, &p).unwrap();
            for k in 0..3 {
                assert!((back.x[k] - x[k]).abs() < 1e-10 * (1.0 + x[k].abs()), "{a}->{b}: {x:?} vs {:?}", back.x);
            }
            assert!(angle_diff(back.x[3], x[3]) < 1e-10);
        }
    }
}

#[test]
fn split_matches_line_element_everywhere() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let params = [
        MetricParams::schwarzschild(1.0),
        MetricParams::kerr(1.0, 0.628),
        MetricParams::kerr(1.0, 0.95),
        MetricParams::gw(1e-3, 5e-4, 1.0, false),
        MetricParams::gw(1e-3, 5e-4, 2.0, true),
    ];
    for chart in ChartId::ALL {
        for p in params {
            let p = if chart == ChartId::GWCartesianTT || chart == ChartId::MinkowskiCartesian {
                if p.m > 0.0 { continue } else { p }
            } else if p.m == 0.0 || (!chart.is_kerr() && p.a > 0.0) {
                continue;
            } else {
                p
            };
            let f = AnalyticMetric::new(chart, p).unwrap();
            let mut n = 0;
            while n < 10_000 / 8 {
                let x = if chart.is_spherical() {
                    random_angular(&mut rng, 1.0)
                } else {
                    [rng.gen_range(-5.0..5.0), rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)]
                };
                if f.check(&x).is_err() {
                    continue;
                }
                n += 1;
                let g = metric_generic(chart, &p, &x);
                let b = background_generic(chart, &p, &x);
                let d = distortion_generic(chart, &p, &x);
                for i in 0..4 {
                    for j in 0..4 {
                        let e = (g[i][j] - b[i][j] - d[i][j]).abs();
                        assert!(e <= 1e-13 * (1.0 + g[i][j].abs()), "{chart} {x:?} ({i},{j}) {e:e}");
                    }
                }
                let s = metric_eval(chart, &p, &SpacetimePoint::new(chart, x)).unwrap();
                let outside_ergo = !chart.is_kerr() || x[1] > 2.0 * p.m + 0.5 || !chart.is_spherical();
                if outside_ergo && chart != ChartId::KerrKS && chart != ChartId::SchwarzschildKS {
                    assert!(s.is_lorentzian(), "{chart} {x:?}");
                }
            }
        }
    }
}

#[test]
fn kretschmann_agrees_across_charts() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let p = MetricParams::kerr(1.0, 0.7);
    let bl = AnalyticMetric::new(ChartId::KerrBL, p).unwrap();
    let ks = AnalyticMetric::new(ChartId::KerrKS, p).unwrap();
    let ef = AnalyticMetric::new(ChartId::KerrEF, p).unwrap();
    for _ in 0..50 {
        let x = random_angular(&mut rng, 2.3);
        let k_bl = curvature_bundle(&bl, &x).unwrap().kretschmann;
        for (chart, f) in [(ChartId::KerrKS, &ks), (ChartId::KerrEF, &ef)] {
            let y = chart_transform(&SpacetimePoint::new(ChartId::KerrBL, x), chart, &p).unwrap();
            let k = curvature_bundle(f, &y.x).unwrap().kretschmann;
            assert!(((k - k_bl) / k_bl).abs() < 1e-6, "{chart}: {k} vs {k_bl}");
        }
    }
}
