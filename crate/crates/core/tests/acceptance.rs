//! End-to-end acceptance checks. Runs as a plain binary so that every criterion
//! reports PASS or FAIL even when an earlier one fails.

use std::f64::consts::PI;
use std::time::Instant;

use einfields::charts::*;
use einfields::diffgeo::*;
use einfields::eval::*;
use einfields::field::{christoffel_from, metric_value, AnalyticMetric, MetricField};
use einfields::geodesics::*;
use einfields::gw::*;
use einfields::nn::{Activation, Arch, FieldModel, OutputMode, Target};
use einfields::ode::OdeOptions;
use einfields::tensor::{packed_index, Gamma, Mat4};
use einfields::training::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = einfields::Result<(bool, String)>;

const KERR_SPIN: f64 = 0.7;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Random exterior event in spherical / Boyer–Lindquist coordinates.
fn exterior_point(rng: &mut ChaCha8Rng, p: &MetricParams) -> [f64; 4] {
    let r_plus = if p.a == 0.0 { 2.0 * p.m } else { kerr_regions(p).unwrap().r_plus };
    let rmin = r_plus + HORIZON_MARGIN + 0.05;
    [rng.gen_range(-5.0..5.0), rng.gen_range(rmin..40.0), rng.gen_range(0.1..PI - 0.1), rng.gen_range(-PI..PI)]
}

/// `n` valid events in `chart`, drawn in the spherical / BL chart and mapped over.
fn chart_points(chart: ChartId, p: &MetricParams, n: usize, seed: u64) -> Vec<[f64; 4]> {
    let base = if chart.is_kerr() { ChartId::KerrBL } else { ChartId::SchwarzschildSpherical };
    let field = AnalyticMetric::new(chart, *p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x = exterior_point(&mut rng, p);
        let Ok(y) = chart_transform(&SpacetimePoint::new(base, x), chart, p) else { continue };
        if field.check(&y.x).is_ok() {
            out.push(y.x);
        }
    }
    out
}

fn black_hole_charts() -> Vec<(ChartId, MetricParams)> {
    let s = MetricParams::schwarzschild(1.0);
    let k = MetricParams::kerr(1.0, KERR_SPIN);
    vec![
        (ChartId::SchwarzschildSpherical, s),
        (ChartId::SchwarzschildKS, s),
        (ChartId::SchwarzschildEF, s),
        (ChartId::KerrBL, k),
        (ChartId::KerrKS, k),
        (ChartId::KerrEF, k),
    ]
}

fn c1_vacuum() -> Outcome {
    let mut worst_ratio: f64 = 0.0;
    let mut worst_scalar: f64 = 0.0;
    for (i, (chart, p)) in black_hole_charts().into_iter().enumerate() {
        let field = AnalyticMetric::new(chart, p)?;
        for x in chart_points(chart, &p, 1000, 100 + i as u64) {
            let b = curvature_bundle(&field, &x)?;
            worst_ratio = worst_ratio.max(b.ricci.max_abs() / b.riemann_down.max_abs());
            worst_scalar = worst_scalar.max(b.ricci_scalar.abs());
        }
    }
    let ok = worst_ratio <= 1e-8 && worst_scalar <= 1e-8;
    Ok((ok, format!("6 charts x 1000 points, max|Ric|/max|Riem| = {worst_ratio:.2e}, max|R| = {worst_scalar:.2e}")))
}

fn kerr_scale(p: &MetricParams, r: f64, theta: f64) -> f64 {
    // Magnitude of the individual terms of the closed form; the scalar itself has zeros.
    let sigma = r * r + (p.a * theta.cos()).powi(2);
    48.0 * p.m * p.m / sigma.powi(3)
}

fn c2_kretschmann() -> Outcome {
    let s = MetricParams::schwarzschild(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_s: f64 = 0.0;
    for _ in 0..500 {
        let r = (rng.gen_range(2.5f64.ln()..150f64.ln())).exp();
        let x = [rng.gen_range(-5.0..5.0), r, rng.gen_range(0.1..PI - 0.1), rng.gen_range(-PI..PI)];
        let exact = kretschmann_schwarzschild(s.m, r);
        for chart in [ChartId::SchwarzschildSpherical, ChartId::SchwarzschildKS] {
            let y = chart_transform(&SpacetimePoint::new(ChartId::SchwarzschildSpherical, x), chart, &s)?;
            let k = curvature_bundle(&AnalyticMetric::new(chart, s)?, &y.x)?.kretschmann;
            worst_s = worst_s.max(rel(k, exact));
        }
    }
    let k = MetricParams::kerr(1.0, KERR_SPIN);
    let mut worst_k: f64 = 0.0;
    for chart in [ChartId::KerrBL, ChartId::KerrKS] {
        let field = AnalyticMetric::new(chart, k)?;
        for x in chart_points(ChartId::KerrBL, &k, 300, 21) {
            let y = chart_transform(&SpacetimePoint::new(ChartId::KerrBL, x), chart, &k)?;
            let got = curvature_bundle(&field, &y.x)?.kretschmann;
            let exact = kretschmann_kerr(k.m, k.a, x[1], x[2]);
            worst_k = worst_k.max((got - exact).abs() / kerr_scale(&k, x[1], x[2]));
        }
    }
    let ok = worst_s <= 1e-8 && worst_k <= 1e-6;
    Ok((ok, format!("Schwarzschild r in [2.5, 150] rel {worst_s:.2e}; Kerr a={KERR_SPIN} BL/KS rel {worst_k:.2e}")))
}

/// Closed-form Christoffel symbols of Schwarzschild in (t, r, θ, φ).
fn schwarzschild_gamma(m: f64, x: &[f64; 4]) -> Gamma {
    let (r, th) = (x[1], x[2]);
    let f = 1.0 - 2.0 * m / r;
    let mut g = [[[0.0; 4]; 4]; 4];
    let mut set = |a: usize, b: usize, c: usize, v: f64| {
        g[a][b][c] = v;
        g[a][c][b] = v;
    };
    set(0, 0, 1, m / (r * r * f));
    set(1, 0, 0, m * f / (r * r));
    set(1, 1, 1, -m / (r * r * f));
    set(1, 2, 2, -r * f);
    set(1, 3, 3, -r * f * th.sin().powi(2));
    set(2, 1, 2, 1.0 / r);
    set(2, 3, 3, -th.sin() * th.cos());
    set(3, 1, 3, 1.0 / r);
    set(3, 2, 3, th.cos() / th.sin());
    g
}

fn gamma_err(a: &Gamma, b: &Gamma) -> f64 {
    let mut e: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                e = e.max((a[i][j][k] - b[i][j][k]).abs());
            }
        }
    }
    e
}

fn c3_ad_vs_fd() -> Outcome {
    let p = MetricParams::schwarzschild(1.0);
    let field = AnalyticMetric::new(ChartId::SchwarzschildSpherical, p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let steps = [0.1, 0.05, 0.025, 0.0125, 0.00625, 1e-3, 1e-4, 1e-5, 1e-6];
    // the forward stencil reaches 6h past the point, which must stay inside θ < π
    let pts: Vec<[f64; 4]> = (0..100)
        .map(|_| [0.0, rng.gen_range(4.0..20.0), rng.gen_range(0.5..PI - 0.7), rng.gen_range(-PI..PI)])
        .collect();
    let mut ad_err: f64 = 0.0;
    for x in &pts {
        ad_err = ad_err.max(gamma_err(&christoffel_at(&field, x)?.gamma, &schwarzschild_gamma(p.m, x)));
    }
    let mut fd_err = Vec::new();
    for &h in &steps {
        let mut e: f64 = 0.0;
        for x in &pts {
            let jac = fd_metric_jacobian(&field, x, h, FdOrder::Six)?;
            let mut dg: [Mat4; 4] = [[[0.0; 4]; 4]; 4];
            for (mu, d) in dg.iter_mut().enumerate() {
                for i in 0..4 {
                    for j in 0..4 {
                        d[i][j] = jac[mu][packed_index(i, j)];
                    }
                }
            }
            let g = metric_value(&field, x)?;
            e = e.max(gamma_err(&christoffel_from(&g, &dg, x)?, &schwarzschild_gamma(p.m, x)));
        }
        fd_err.push(e);
    }
    let rates: Vec<f64> = (0..4).map(|k| observed_order(fd_err[k], fd_err[k + 1], steps[k], steps[k + 1])).collect();
    let (imin, best) = fd_err.iter().copied().enumerate().fold((0, f64::INFINITY), |a, (i, e)| if e < a.1 { (i, e) } else { a });
    let sixth = rates.iter().any(|r| (5.0..=7.0).contains(r));
    let floor = imin + 1 < steps.len() && fd_err[steps.len() - 1] > 10.0 * best;
    let gap = best >= 10.0 * ad_err;
    let ok = sixth && floor && ad_err <= 1e-12 && gap;
    let rates_s: Vec<String> = rates.iter().map(|r| format!("{r:.2}")).collect();
    Ok((
        ok,
        format!(
            "AD max err {ad_err:.2e}; FD rates [{}]; best FD {best:.2e} at h={:.0e}, {:.2e} at h=1e-6",
            rates_s.join(", "),
            steps[imin],
            fd_err[steps.len() - 1]
        ),
    ))
}

fn tiny_problem(order: usize) -> einfields::Result<(FieldModel, Dataset)> {
    let grid = GridSpec::new([
        GridAxis::fixed(0.0),
        GridAxis::new(3.0, 12.0, 5),
        GridAxis::open(0.0, PI, 3),
        GridAxis::periodic(0.0, 2.0 * PI, 3),
    ]);
    let p = MetricParams::schwarzschild(1.0);
    let ds = generate_dataset(ChartId::SchwarzschildSpherical, &p, &grid, order, Target::Distortion)?;
    let arch = Arch::new(2, 8, Activation::Silu, OutputMode::Packed10);
    let m = FieldModel::init(arch, ChartId::SchwarzschildSpherical, p, grid.normalization(), 5)?;
    Ok((m, ds))
}

fn c5_gradients() -> Outcome {
    let mut msgs = Vec::new();
    let mut ok = true;
    for (order, tol) in [(0usize, 1e-5), (2, 1e-4)] {
        let (m, ds) = tiny_problem(order)?;
        let idx: Vec<usize> = (0..ds.len()).collect();
        let lambda = [1.0, 0.5, 0.25];
        let (_, _, g) = loss_gradient(&m, &ds, &idx, order, lambda)?;
        let mut rng = ChaCha8Rng::seed_from_u64(50 + order as u64);
        let mut worst: f64 = 0.0;
        for i in rand::seq::index::sample(&mut rng, m.theta.len(), 20) {
            let h = 1e-6 * (1.0 + m.theta[i].abs());
            let mut mp = m.clone();
            mp.theta[i] += h;
            let mut mm = m.clone();
            mm.theta[i] -= h;
            let fd = (sobolev_loss(&mp, &ds, &idx, order, lambda)?.0 - sobolev_loss(&mm, &ds, &idx, order, lambda)?.0) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-8));
        }
        ok &= worst <= tol;
        msgs.push(format!("N={order} max rel {worst:.2e} (tol {tol:.0e})"));
    }
    Ok((ok, msgs.join("; ")))
}

fn c7_gw() -> Outcome {
    let p = MetricParams::gw(1e-6, 5e-7, 1.0, true);
    let wave = PlaneWave::from_params(&p);
    let field = AnalyticMetric::new(ChartId::GWCartesianTT, p)?;
    let pts = ring(1.0, 12);
    let t_end = 4.0 * PI;
    let times: Vec<f64> = (0..40).map(|k| t_end * k as f64 / 39.0).collect();

    // closed form against the strain evaluated directly
    let mut closed_gap: f64 = 0.0;
    for &t in &times {
        let x = [t, 0.0, 0.0, 0.3];
        let (hp, hx) = (wave.h_plus(&x), wave.h_cross(&x));
        for (q, c) in pts.iter().zip(ring_trajectories(&pts, t, 0.3, &p)?) {
            let ex = q[0] + 0.5 * (hp * q[0] + hx * q[1]);
            let ey = q[1] + 0.5 * (hx * q[0] - hp * q[1]);
            closed_gap = closed_gap.max((ex - c[0]).abs()).max((ey - c[1]).abs());
        }
    }

    // closed form against the geodesic deviation equation, at two amplitudes
    let opts = OdeOptions::tol(1e-12, 1e-14);
    let dev_gap = |amp: f64| -> einfields::Result<f64> {
        let pp = MetricParams::gw(amp, 0.5 * amp, 1.0, true);
        let f = AnalyticMetric::new(ChartId::GWCartesianTT, pp)?;
        let start = GeodesicState { x: [0.0; 4], v: [1.0, 0.0, 0.0, 0.0], tau: 0.0 };
        let world = integrate(&f, &start, t_end, &opts)?;
        let mut worst: f64 = 0.0;
        for q in &pts {
            let d = geodesic_deviation(&f, &world, [0.0, q[0], q[1], 0.0], [0.0; 4], &opts)?;
            for &t in &times {
                let y = d.sol.interp(t).unwrap();
                let g = metric_value(&f, &[y[0], y[1], y[2], y[3]])?;
                let s = transverse_proper(&g, &[y[8], y[9], y[10], y[11]]);
                let c = ring_trajectories(std::slice::from_ref(q), t, 0.0, &pp)?[0];
                worst = worst.max((s[0] - c[0]).abs()).max((s[1] - c[1]).abs());
            }
        }
        Ok(worst)
    };
    let g_small = dev_gap(1e-6)?;
    let (g_a, g_b) = (dev_gap(2e-3)?, dev_gap(4e-3)?);
    let scaling = g_b / g_a;
    let dev_ok = g_small <= 10.0 * 1e-12 && (3.0..=5.0).contains(&scaling);

    // Ψ4 by both routes
    let lin: Vec<f64> = (0..12).map(|k| t_end * k as f64 / 11.0).collect();
    let rows = psi4_grid(&field, &wave, &lin, &lin)?;
    let psi_gap = rows.iter().map(|r| (r.weyl - r.direct).norm() / r.direct.norm().max(1e-300)).fold(0.0, f64::max);
    let psi_ok = psi_gap <= 10.0 * 1e-6;

    // radiated power
    let (a, w) = (3e-6, 1.7);
    let exact = w * w * a * a / 4.0;
    let p_closed = radiated_power(a, a, w);
    let p_num = power_time_average(&PlaneWave { amp_plus: a, amp_cross: a, omega: w }, 256)?;
    let power_ok = rel(p_closed, exact) <= 4.0 * f64::EPSILON && rel(p_num, exact) <= 1e-10;

    // SWSH orthonormality
    let modes: Vec<(i64, i64)> = (2..=4).flat_map(|l| (-l..=l).map(move |m| (l, m))).collect();
    let gram = swsh_gram(-2, &modes, &Quadrature::default())?;
    let mut gram_dev: f64 = 0.0;
    for (i, row) in gram.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            gram_dev = gram_dev.max((v - if i == j { 1.0 } else { 0.0 }).norm());
        }
    }
    let gram_ok = gram_dev <= 1e-6;

    let ok = closed_gap <= 1e-12 && dev_ok && psi_ok && power_ok && gram_ok;
    Ok((
        ok,
        format!(
            "ring closed {closed_gap:.1e}; deviation gap {g_small:.1e} at h=1e-6, doubling h scales gap x{scaling:.2}; \
             psi4 rel gap {psi_gap:.1e}; power rel {:.1e} / {:.1e}; Gram dev {gram_dev:.1e} ({} modes)",
            rel(p_closed, exact),
            rel(p_num, exact),
            modes.len()
        ),
    ))
}

fn c8_cross_chart() -> Outcome {
    let mut worst: f64 = 0.0;
    for a in [0.3, KERR_SPIN, 0.95] {
        let k = MetricParams::kerr(1.0, a);
        let bl = AnalyticMetric::new(ChartId::KerrBL, k)?;
        let ks = AnalyticMetric::new(ChartId::KerrKS, k)?;
        for x in chart_points(ChartId::KerrBL, &k, 200, 80) {
            let y = chart_transform(&SpacetimePoint::new(ChartId::KerrBL, x), ChartId::KerrKS, &k)?;
            let k_bl = curvature_bundle(&bl, &x)?.kretschmann;
            let k_ks = curvature_bundle(&ks, &y.x)?.kretschmann;
            worst = worst.max((k_bl - k_ks).abs() / kerr_scale(&k, x[1], x[2]));
        }
    }
    Ok((worst <= 1e-6, format!("a in {{0.3, 0.7, 0.95}}, 600 events, max rel {worst:.2e}")))
}

fn c9_bianchi() -> Outcome {
    let mut b1: f64 = 0.0;
    let mut b2: f64 = 0.0;
    let mut n2 = 0;
    for (i, (chart, p)) in black_hole_charts().into_iter().enumerate() {
        let field = AnalyticMetric::new(chart, p)?;
        for (k, x) in chart_points(chart, &p, 200, 900 + i as u64).iter().enumerate() {
            b1 = b1.max(bianchi1_residual(&riemann(&field, x)?.down));
            if k < 17 && n2 < 100 {
                b2 = b2.max(bianchi2_residual(&field, x)?);
                n2 += 1;
            }
        }
    }
    Ok((b1 <= 1e-10 && b2 <= 1e-8, format!("first {b1:.2e} over 1200 points; second {b2:.2e} over {n2} points")))
}

fn tiny_train(seed: u64) -> einfields::Result<(FieldModel, TrainReport, Trajectory)> {
    let (m, ds) = tiny_problem(1)?;
    let cfg = TrainConfig { sobolev_order: 1, epochs: 3, batches: 3, seed, ..TrainConfig::default() };
    let (m, rep) = train(&cfg, &ds, m)?;
    let ic = schwarzschild_ic(2.5, 1.0, 1.0)?;
    let traj = integrate(&m, &ic, 50.0, &OdeOptions::default())?;
    Ok((m, rep, traj))
}

fn c10_determinism() -> Outcome {
    let (ma, ra, ta) = tiny_train(7)?;
    let (mb, rb, tb) = tiny_train(7)?;
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let losses = bits(&ra.step_losses) == bits(&rb.step_losses);
    let params = bits(&ma.theta) == bits(&mb.theta);
    let traj = ta.sol.y.len() == tb.sol.y.len()
        && ta.sol.y.iter().zip(&tb.sol.y).all(|(a, b)| bits(a) == bits(b))
        && bits(&ta.sol.t) == bits(&tb.sol.t);
    let (_, rc, _) = tiny_train(8)?;
    let differs = bits(&rc.step_losses) != bits(&ra.step_losses);
    Ok((
        losses && params && traj && differs,
        format!(
            "{} step losses identical: {losses}; parameters identical: {params}; {} trajectory states identical: {traj}; other seed differs: {differs}",
            ra.step_losses.len(),
            ta.len()
        ),
    ))
}

struct Trained {
    model: FieldModel,
    report: TrainReport,
    metric_mae: f64,
    christoffel_mae: f64,
    seconds: f64,
    seed: u64,
}

fn train_desk(ds: &Dataset, held_out: &[[f64; 4]], order: usize, optimizer: OptimizerKind, seed: u64) -> einfields::Result<Trained> {
    let t = Instant::now();
    let arch = Arch::new(3, 64, Activation::Silu, OutputMode::Packed10);
    let m = FieldModel::init(arch, ds.chart, ds.params, ds.grid.normalization(), seed)?;
    let cfg = TrainConfig { sobolev_order: order, optimizer, seed, ..TrainConfig::default() };
    let (model, report) = train(&cfg, ds, m)?;
    let truth = AnalyticMetric::new(ds.chart, ds.params)?;
    let metric_mae = evaluate(&truth, &model, held_out, Quantity::Metric)?.mae;
    let christoffel_mae = evaluate(&truth, &model, held_out, Quantity::Christoffel)?.mae;
    Ok(Trained { model, report, metric_mae, christoffel_mae, seconds: t.elapsed().as_secs_f64(), seed })
}

fn c4_training(keep: &mut Option<FieldModel>) -> Outcome {
    let grid = GridSpec::schwarzschild_spherical_log(32);
    let ds = generate_dataset(ChartId::SchwarzschildSpherical, &MetricParams::schwarzschild(1.0), &grid, 1, Target::Distortion)?;
    let held_out = validation_points(&grid, 2000);
    let mut runs = Vec::new();
    for seed in 0..3 {
        let r = train_desk(&ds, &held_out, 1, OptimizerKind::Soap, seed)?;
        println!(
            "  seed {seed}: held-out metric MAE {:.3e}, Christoffel MAE {:.3e}, final loss {:.3e}, {:.0} s",
            r.metric_mae,
            r.christoffel_mae,
            r.report.final_loss().unwrap_or(f64::NAN),
            r.seconds
        );
        runs.push(r);
    }
    runs.sort_by(|a, b| a.metric_mae.total_cmp(&b.metric_mae));
    let median = runs.swap_remove(1);
    let seed = median.seed;
    let value_only = train_desk(&ds, &held_out, 0, OptimizerKind::Soap, seed)?;
    let adam = train_desk(&ds, &held_out, 1, OptimizerKind::Adam, seed)?;
    let soap_loss = median.report.final_loss().unwrap_or(f64::NAN);
    let adam_loss = adam.report.final_loss().unwrap_or(f64::NAN);
    let target = median.metric_mae <= 1e-5;
    let jac_helps = median.christoffel_mae < value_only.christoffel_mae;
    let soap_wins = soap_loss <= adam_loss;
    let detail = format!(
        "median held-out MAE {:.3e} (target 1e-5): {}; Christoffel MAE N=1 {:.3e} vs N=0 {:.3e}: {}; final loss SOAP {:.3e} vs Adam {:.3e}: {}",
        median.metric_mae,
        word(target),
        median.christoffel_mae,
        value_only.christoffel_mae,
        word(jac_helps),
        soap_loss,
        adam_loss,
        word(soap_wins)
    );
    *keep = Some(median.model);
    Ok((target && jac_helps && soap_wins, detail))
}

fn word(b: bool) -> &'static str {
    if b {
        "met"
    } else {
        "missed"
    }
}

fn c6_geodesics(model: Option<&FieldModel>) -> Outcome {
    let p = MetricParams::schwarzschild(1.0);
    let field = AnalyticMetric::new(ChartId::SchwarzschildSpherical, p)?;
    let opts = OdeOptions::tol(1e-12, 1e-14);

    // (a) circular orbit, three periods
    let ic = schwarzschild_ic(3.85, circular_b0(p.m), p.m)?;
    let r0 = ic.x[1];
    let period_tau = 2.0 * PI * r0.powf(1.5) / p.m.sqrt() * (1.0 - 3.0 * p.m / r0).sqrt();
    let circ = integrate(&field, &ic, 3.0 * period_tau, &opts)?;
    let mut radius_dev: f64 = 0.0;
    for k in 0..=3000 {
        let s = circ.interp(3.0 * period_tau * k as f64 / 3000.0).unwrap();
        radius_dev = radius_dev.max(rel(s.x[1], r0));
    }
    for k in 0..circ.len() {
        radius_dev = radius_dev.max(rel(circ.state(k).x[1], r0));
    }
    let a_ok = radius_dev <= 1e-6;

    // (b) conserved quantities over τ = 1000
    let ecc_ic = schwarzschild_ic(5.0, 1.1, p.m)?;
    let ecc = integrate(&field, &ecc_ic, 1000.0, &opts)?;
    let d = ecc.drift(&field)?;
    let analytic_drift = d.e.max(d.lz).max(d.norm);
    let mut b_ok = analytic_drift <= 1e-9;
    let mut detail_b = format!("analytic drift {analytic_drift:.2e}");

    // (c) δr(τ) between analytic and learned rollouts
    let mut c_ok = false;
    let mut detail_c = "no trained model".to_string();
    if let Some(m) = model {
        let circ_m = integrate(m, &schwarzschild_ic(3.85, circular_b0(p.m), p.m)?, 1000.0, &opts)?;
        let dm = circ_m.drift(m)?;
        let learned_drift = dm.e.max(dm.lz).max(dm.norm);
        b_ok &= learned_drift <= 1e-5;
        detail_b += &format!(", learned-model drift {learned_drift:.2e} (E {:.1e}, L_z {:.1e}, norm {:.1e})", dm.e, dm.lz, dm.norm);

        let ecc_m = integrate(m, &ecc_ic, 1000.0, &opts)?;
        let series = rollout_deviation(&ecc, &ecc_m, &p, 400)?;
        let finite = series.iter().all(|(t, d)| t.is_finite() && d.is_finite());
        let q = series.len() / 4;
        let mean = |s: &[(f64, f64)]| s.iter().map(|v| v.1).sum::<f64>() / s.len() as f64;
        let (early, late) = (mean(&series[..q]), mean(&series[series.len() - q..]));
        c_ok = finite && late > early;
        detail_c = format!(
            "eccentric δr mean first quarter {early:.2e}, last quarter {late:.2e}, {} of {} learned states out of box",
            ecc_m.out_of_box_count(),
            ecc_m.len()
        );
    }
    Ok((
        a_ok && b_ok && c_ok,
        format!("(a) radius rel dev {radius_dev:.2e} over 3 orbits; (b) {detail_b}; (c) {detail_c}"),
    ))
}

/// `ACCEPTANCE_ONLY=1,7` restricts the run to the listed criteria.
fn selected() -> Vec<usize> {
    match std::env::var("ACCEPTANCE_ONLY") {
        Ok(s) => s.split(',').filter_map(|t| t.trim().parse().ok()).collect(),
        Err(_) => (1..=10).collect(),
    }
}

fn main() {
    let only = selected();
    let mut failed = Vec::new();
    let mut model = None;
    for n in 1..=10 {
        if !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let (name, res) = match n {
            1 => ("vacuum identity", c1_vacuum()),
            2 => ("Kretschmann closed forms", c2_kretschmann()),
            3 => ("AD versus FD", c3_ad_vs_fd()),
            4 => ("desk-scale training", c4_training(&mut model)),
            5 => ("gradient correctness", c5_gradients()),
            6 => ("geodesics", c6_geodesics(model.as_ref())),
            7 => ("gravitational waves", c7_gw()),
            8 => ("cross-chart invariance", c8_cross_chart()),
            9 => ("Bianchi identities", c9_bianchi()),
            _ => ("determinism", c10_determinism()),
        };
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok((true, d)) => println!("criterion {n} ({name}): PASS [{secs:.1} s] {d}"),
            Ok((false, d)) => {
                println!("criterion {n} ({name}): FAIL [{secs:.1} s] {d}");
                failed.push(n);
            }
            Err(e) => {
                println!("criterion {n} ({name}): FAIL [{secs:.1} s] error: {e}");
                failed.push(n);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: {} criteria PASS", only.len());
    } else {
        println!("acceptance: FAIL for criteria {failed:?}");
        std::process::exit(1);
    }
}
