use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use einfields::charts::{chart_transform, ChartId, SpacetimePoint};
use einfields::diffgeo::{curvature_bundle, kretschmann_kerr, kretschmann_schwarzschild};
use einfields::eval::{
    ad_fd_compare, compression_report, fit_stencil, mae, rel_l2, tomography, validation_points, write_reports_csv,
    EvalReport, FdOrder, Quantity,
};
use einfields::field::{metric_value, AnalyticMetric, MetricField};
use einfields::geodesics::{
    circular_b0, geodesic_deviation, integrate, kerr_ic, kerr_orbit_configs, rollout_deviation, schwarzschild_ic,
    spatial_cartesian, transform_state, write_deviation_csv, GeodesicState, Trajectory,
};
use einfields::gw::{
    extract_mode, psi4_grid, ring, ring_trajectories, swsh, swsh_gram, transverse_proper, write_mode_csv,
    write_psi4_csv, PlaneWave,
};
use einfields::nn::{FieldModel, Target};
use einfields::training::{generate_dataset, train, Dataset, GridSpec};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::json;

use crate::config::RunConfig;
use crate::field::AnyField;
use crate::{Cmd, CliError};

pub struct Ctx {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub strict: bool,
}

impl Ctx {
    fn file(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }

    fn finite(&self, vals: &[f64], what: &str) -> Result<(), CliError> {
        if self.strict && vals.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Runtime(format!("non-finite value in {what}")));
        }
        Ok(())
    }

    fn summary(&self, v: serde_json::Value) -> Result<(), CliError> {
        std::fs::write(self.out.join("summary.json"), serde_json::to_string_pretty(&v)?)?;
        Ok(())
    }

    fn analytic(&self) -> Result<AnalyticMetric, CliError> {
        Ok(AnalyticMetric::new(self.cfg.chart, self.cfg.params)?)
    }

    fn checkpoint(&self, flag: &Option<PathBuf>) -> Option<PathBuf> {
        flag.clone().or_else(|| self.cfg.checkpoint.clone())
    }

    /// The checkpoint when given, else the analytic field.
    fn field(&self, ckpt: &Option<PathBuf>) -> Result<AnyField, CliError> {
        match self.checkpoint(ckpt) {
            Some(p) => Ok(AnyField::Model(Box::new(FieldModel::load(&p)?))),
            None => Ok(AnyField::Analytic(self.analytic()?)),
        }
    }

    /// The configured grid, falling back to the grid a checkpoint was trained on.
    fn grid_for(&self, f: &AnyField) -> GridSpec {
        if self.cfg.grid.is_none() {
            if let AnyField::Model(m) = f {
                if let Some(g) = m.meta.get("grid").and_then(|s| serde_json::from_str(s).ok()) {
                    return g;
                }
            }
        }
        self.cfg.grid_spec()
    }
}

pub fn run(cmd: &Cmd, ctx: &Ctx) -> Result<(), CliError> {
    match cmd {
        Cmd::Gen { dry_run } => gen(ctx, *dry_run),
        Cmd::Train { dataset } => train_cmd(ctx, dataset),
        Cmd::Eval { checkpoint } => eval_cmd(ctx, checkpoint),
        Cmd::Curvature { checkpoint } => curvature_cmd(ctx, checkpoint),
        Cmd::Geodesic { circular, checkpoint } => geodesic_cmd(ctx, *circular, checkpoint),
        Cmd::GwRing => gw_ring(ctx),
        Cmd::Psi4 => psi4_cmd(ctx),
        Cmd::SwshModes => swsh_modes(ctx),
        Cmd::FdCompare { checkpoint } => fd_compare(ctx, checkpoint),
        Cmd::Report { checkpoint } => report(ctx, checkpoint),
    }
}

fn gen(ctx: &Ctx, dry_run: bool) -> Result<(), CliError> {
    let grid = ctx.cfg.grid_spec();
    let order = ctx.cfg.train.sobolev_order;
    println!("samples: {}", grid.len());
    if dry_run {
        return ctx.summary(json!({ "samples": grid.len(), "order": order, "written": false }));
    }
    let t = Instant::now();
    let data = generate_dataset(ctx.cfg.chart, &ctx.cfg.params, &grid, order, Target::Distortion)?;
    let path = ctx.out.join("dataset.einfds");
    data.save(&path)?;
    println!("wrote {} ({:.1} s)", path.display(), t.elapsed().as_secs_f64());
    ctx.summary(json!({ "samples": data.len(), "order": order, "written": true, "path": path }))
}

fn load_or_generate(ctx: &Ctx, flag: &Option<PathBuf>) -> Result<Dataset, CliError> {
    match flag.clone().or_else(|| ctx.cfg.dataset.clone()) {
        Some(p) => {
            let d = Dataset::load(&p)?;
            if d.order < ctx.cfg.train.sobolev_order {
                return Err(CliError::Config(format!(
                    "dataset holds derivatives to order {} but training asks for {}",
                    d.order, ctx.cfg.train.sobolev_order
                )));
            }
            Ok(d)
        }
        None => Ok(generate_dataset(
            ctx.cfg.chart,
            &ctx.cfg.params,
            &ctx.cfg.grid_spec(),
            ctx.cfg.train.sobolev_order,
            Target::Distortion,
        )?),
    }
}

fn train_cmd(ctx: &Ctx, dataset: &Option<PathBuf>) -> Result<(), CliError> {
    let data = load_or_generate(ctx, dataset)?;
    let arch = ctx.cfg.model.arch();
    let mut model = FieldModel::init(arch, data.chart, data.params, data.grid.normalization(), ctx.cfg.train.seed)?;
    model.meta.insert("grid".into(), serde_json::to_string(&data.grid)?);
    println!("training {} params on {} samples", model.param_count(), data.len());
    let t = Instant::now();
    let (model, rep) = train(&ctx.cfg.train, &data, model)?;
    let secs = t.elapsed().as_secs_f64();
    model.save(&ctx.out.join("model.einf"))?;
    rep.write_csv(ctx.file("losses.csv")?)?;
    let truth = AnalyticMetric::new(data.chart, data.params)?;
    let pts = validation_points(&data.grid, ctx.cfg.eval.points);
    let r = eval_parallel(&truth, &model, &pts, Quantity::Metric)?;
    write_reports_csv("held-out metric error at grid cell midpoints", std::slice::from_ref(&r), ctx.file("eval.csv")?)?;
    println!("final loss {:.3e}, held-out metric MAE {:.3e}, {:.1} s", rep.final_loss().unwrap_or(f64::NAN), r.mae, secs);
    if let Some(msg) = &rep.aborted {
        eprintln!("training stopped early: {msg}");
    }
    ctx.finite(&[r.mae], "held-out error")?;
    ctx.summary(json!({
        "params": model.param_count(),
        "samples": data.len(),
        "final_loss": rep.final_loss(),
        "heldout_mae": r.mae,
        "heldout_rel_l2": r.rel_l2,
        "seconds": secs,
        "aborted": rep.aborted,
        "gradnorm_degenerate": rep.gradnorm_degenerate,
    }))
}

/// Same as `einfields::eval::evaluate`, spread over the worker pool.
fn eval_parallel<A: MetricField, B: MetricField>(truth: &A, est: &B, pts: &[[f64; 4]], q: Quantity) -> Result<EvalReport, CliError> {
    let rows: Vec<(Vec<f64>, Vec<f64>)> =
        pts.par_iter().map(|x| Ok((q.eval(truth, x)?, q.eval(est, x)?))).collect::<einfields::Result<_>>()?;
    let t: Vec<f64> = rows.iter().flat_map(|r| r.0.iter().copied()).collect();
    let e: Vec<f64> = rows.iter().flat_map(|r| r.1.iter().copied()).collect();
    let rl = rel_l2(&t, &e).unwrap_or(f64::NAN);
    Ok(EvalReport { quantity: q, mae: mae(&t, &e)?, rel_l2: rl, points: pts.len(), components: q.components(), chart: truth.chart() })
}

fn eval_cmd(ctx: &Ctx, ckpt: &Option<PathBuf>) -> Result<(), CliError> {
    let est = ctx.field(ckpt)?;
    let truth = AnalyticMetric::new(est.chart(), est.params())?;
    let grid = ctx.grid_for(&est);
    let pts = validation_points(&grid, ctx.cfg.eval.points);
    let mut reports = Vec::new();
    for q in &ctx.cfg.eval.quantities {
        let r = eval_parallel(&truth, &est, &pts, *q)?;
        println!("{:<12} MAE {:.3e}  rel-L2 {:.3e}", q.name(), r.mae, r.rel_l2);
        ctx.finite(&[r.mae], q.name())?;
        reports.push(r);
    }
    write_reports_csv(&format!("{} vs analytic, chart {}", est.label(), est.chart()), &reports, ctx.file("eval.csv")?)?;
    if let Some(plane) = &ctx.cfg.eval.plane {
        let q = *ctx.cfg.eval.quantities.first().unwrap_or(&Quantity::Metric);
        let tomo = tomography(&truth, &est, plane, q)?;
        tomo.write_csv(ctx.file("tomography.csv")?)?;
        println!("tomography max error {:.3e}", tomo.max_error());
    }
    ctx.summary(json!({ "field": est.label(), "points": pts.len(), "reports": reports }))
}

/// Closed-form Kretschmann scalar at `x` when the geometry has one.
fn exact_kretschmann(chart: ChartId, p: &einfields::charts::MetricParams, x: &[f64; 4]) -> Option<f64> {
    if p.m <= 0.0 {
        return None;
    }
    let base = if chart.is_kerr() { ChartId::KerrBL } else { ChartId::SchwarzschildSpherical };
    if matches!(chart, ChartId::GWCartesianTT | ChartId::MinkowskiCartesian) {
        return None;
    }
    let y = chart_transform(&SpacetimePoint::new(chart, *x), base, p).ok()?;
    Some(if chart.is_kerr() { kretschmann_kerr(p.m, p.a, y.x[1], y.x[2]) } else { kretschmann_schwarzschild(p.m, y.x[1]) })
}

fn curvature_cmd(ctx: &Ctx, ckpt: &Option<PathBuf>) -> Result<(), CliError> {
    let f = ctx.field(ckpt)?;
    let pts = match &ctx.cfg.eval.plane {
        Some(p) => p.points()?,
        None => validation_points(&ctx.grid_for(&f), ctx.cfg.eval.points),
    };
    let (chart, params) = (f.chart(), f.params());
    let rows: Vec<[f64; 8]> = pts
        .par_iter()
        .map(|x| {
            let b = curvature_bundle(&f, x)?;
            let exact = exact_kretschmann(chart, &params, x).unwrap_or(f64::NAN);
            Ok([x[0], x[1], x[2], x[3], b.ricci_scalar, b.kretschmann, exact, ((b.kretschmann - exact) / exact).abs()])
        })
        .collect::<einfields::Result<_>>()?;
    let mut w = ctx.file("curvature.csv")?;
    writeln!(w, "x0,x1,x2,x3,ricci_scalar,kretschmann,kretschmann_exact,rel_err")?;
    let mut worst: f64 = 0.0;
    for r in &rows {
        ctx.finite(&r[4..6], "curvature invariants")?;
        if r[7].is_finite() {
            worst = worst.max(r[7]);
        }
        writeln!(w, "{}", r.iter().map(|v| format!("{v:.12e}")).collect::<Vec<_>>().join(","))?;
    }
    w.flush()?;
    println!("{} points, max Kretschmann relative error {:.3e}", rows.len(), worst);
    ctx.summary(json!({ "points": rows.len(), "max_kretschmann_rel_err": worst }))
}

fn initial_state(ctx: &Ctx, chart: ChartId, circular: bool) -> Result<GeodesicState, CliError> {
    let p = ctx.cfg.params;
    let g = &ctx.cfg.geodesic;
    if chart.is_kerr() {
        let name = g.kerr_orbit.as_deref().unwrap_or("prograde");
        let orbits = kerr_orbit_configs(&p)?;
        let o = orbits
            .iter()
            .find(|o| o.name == name)
            .ok_or_else(|| CliError::Config(format!("unknown Kerr orbit {name:?}")))?;
        let s = kerr_ic(&p, o.e, o.lz, o.r0, o.outward)?;
        return Ok(transform_state(&s, ChartId::KerrBL, chart, &p)?);
    }
    if matches!(chart, ChartId::GWCartesianTT | ChartId::MinkowskiCartesian) {
        return Err(CliError::Config(format!("no geodesic initial data for chart {chart}")));
    }
    let b0 = if circular { circular_b0(p.m) } else { g.b0.unwrap_or_else(|| circular_b0(p.m)) };
    let s = schwarzschild_ic(g.a0, b0, p.m).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(transform_state(&s, ChartId::SchwarzschildSpherical, chart, &p)?)
}

fn radius_range(t: &Trajectory, p: &einfields::charts::MetricParams) -> Result<(f64, f64), CliError> {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for k in 0..t.len() {
        let c = spatial_cartesian(t.chart, p, &t.state(k).x)?;
        let r = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

fn geodesic_cmd(ctx: &Ctx, circular: bool, ckpt: &Option<PathBuf>) -> Result<(), CliError> {
    let analytic = ctx.analytic()?;
    let ic = initial_state(ctx, analytic.chart, circular)?;
    let tau_end = ctx.cfg.geodesic.tau_end;
    let ta = integrate(&analytic, &ic, tau_end, &ctx.cfg.ode)?;
    ta.write_csv(&analytic, ctx.file("trajectory.csv")?)?;
    let drift = ta.drift(&analytic)?;
    let (rmin, rmax) = radius_range(&ta, &ctx.cfg.params)?;
    ctx.finite(&[drift.e, drift.lz, drift.norm], "conserved quantities")?;
    println!(
        "analytic: {} steps, r in [{rmin:.9}, {rmax:.9}], drift E {:.2e} L {:.2e} norm {:.2e}",
        ta.len(),
        drift.e,
        drift.lz,
        drift.norm
    );
    let mut summary = json!({
        "initial_state": ic,
        "steps": ta.len(),
        "r_min": rmin,
        "r_max": rmax,
        "drift": { "e": drift.e, "lz": drift.lz, "norm": drift.norm, "e_rel": drift.e_rel, "lz_rel": drift.lz_rel },
    });
    if let Some(path) = ctx.checkpoint(ckpt) {
        let model = FieldModel::load(&path)?;
        if model.chart != analytic.chart {
            return Err(CliError::Config(format!("checkpoint chart {} differs from configured chart {}", model.chart, analytic.chart)));
        }
        let tm = integrate(&model, &ic, tau_end, &ctx.cfg.ode)?;
        tm.write_csv(&model, ctx.file("trajectory_model.csv")?)?;
        let dev = rollout_deviation(&ta, &tm, &ctx.cfg.params, ctx.cfg.geodesic.samples)?;
        write_deviation_csv(&dev, ctx.file("deviation.csv")?)?;
        let final_dev = dev.last().map(|d| d.1).unwrap_or(f64::NAN);
        let oob = tm.out_of_box_count();
        println!("model: {} steps, final deviation {final_dev:.3e}, {oob} states outside the training box", tm.len());
        summary["model_steps"] = json!(tm.len());
        summary["final_deviation"] = json!(final_dev);
        summary["out_of_box"] = json!(oob);
    }
    ctx.summary(summary)
}

fn gw_ring(ctx: &Ctx) -> Result<(), CliError> {
    let g = &ctx.cfg.gw;
    let p = g.params;
    let field = AnalyticMetric::new(ChartId::GWCartesianTT, p)?;
    let pts = ring(g.ring_radius, g.ring_points);
    let times: Vec<f64> = (0..g.t_samples).map(|k| g.t_end * k as f64 / (g.t_samples - 1) as f64).collect();
    let start = GeodesicState { x: [0.0, 0.0, 0.0, g.z], v: [1.0, 0.0, 0.0, 0.0], tau: 0.0 };
    let worldline = integrate(&field, &start, g.t_end, &ctx.cfg.ode)?;
    let devs = pts
        .par_iter()
        .map(|q| geodesic_deviation(&field, &worldline, [0.0, q[0], q[1], 0.0], [0.0; 4], &ctx.cfg.ode))
        .collect::<einfields::Result<Vec<_>>>()?;
    let mut w = ctx.file("ring.csv")?;
    writeln!(w, "t,k,x0,y0,x_closed,y_closed,x_deviation,y_deviation")?;
    let mut worst: f64 = 0.0;
    for &t in &times {
        let closed = ring_trajectories(&pts, t, g.z, &p)?;
        for (k, (q, c)) in pts.iter().zip(&closed).enumerate() {
            let y = devs[k].sol.interp(t).ok_or_else(|| CliError::Runtime(format!("t = {t} outside integration")))?;
            let gm = metric_value(&field, &[y[0], y[1], y[2], y[3]])?;
            let d = transverse_proper(&gm, &[y[8], y[9], y[10], y[11]]);
            worst = worst.max((d[0] - c[0]).abs()).max((d[1] - c[1]).abs());
            writeln!(w, "{t:.10e},{k},{:.10e},{:.10e},{:.16e},{:.16e},{:.16e},{:.16e}", q[0], q[1], c[0], c[1], d[0], d[1])?;
        }
    }
    w.flush()?;
    println!("ring of {} particles over {} times; closed form vs deviation equation max gap {worst:.3e}", pts.len(), times.len());
    ctx.summary(json!({ "particles": pts.len(), "times": times.len(), "max_gap": worst }))
}

fn psi4_cmd(ctx: &Ctx) -> Result<(), CliError> {
    let g = &ctx.cfg.gw;
    let field = AnalyticMetric::new(ChartId::GWCartesianTT, g.params)?;
    let lin = |n: usize| -> Vec<f64> { (0..n).map(|k| g.t_end * k as f64 / n.max(2).saturating_sub(1) as f64).collect() };
    let rows = psi4_grid(&field, &PlaneWave::from_params(&g.params), &lin(g.psi4_nz), &lin(g.psi4_nt))?;
    write_psi4_csv(&rows, ctx.file("psi4.csv")?)?;
    let worst = rows.iter().map(|r| (r.direct - r.weyl).norm()).fold(0.0, f64::max);
    let scale = rows.iter().map(|r| r.direct.norm()).fold(0.0, f64::max);
    ctx.finite(&[worst, scale], "psi4")?;
    println!("{} grid points, max |psi4_weyl - psi4_direct| = {worst:.3e} (max |psi4| = {scale:.3e})", rows.len());
    ctx.summary(json!({ "points": rows.len(), "max_abs_gap": worst, "max_abs_psi4": scale }))
}

fn swsh_modes(ctx: &Ctx) -> Result<(), CliError> {
    let g = &ctx.cfg.gw;
    let l = g.l;
    let modes: Vec<(i64, i64)> = (-l..=l).map(|m| (l, m)).collect();
    let gram = swsh_gram(-2, &modes, &g.quadrature)?;
    let mut w = ctx.file("gram.csv")?;
    writeln!(w, "m1,m2,re,im")?;
    let mut off: f64 = 0.0;
    for (i, row) in gram.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let e = if i == j { 1.0 } else { 0.0 };
            off = off.max((v - e).norm());
            writeln!(w, "{},{},{:.16e},{:.16e}", modes[i].1, modes[j].1, v.re, v.im)?;
        }
    }
    w.flush()?;
    // Synthetic strain made of the two m = ±l modes of a monochromatic source.
    let (amp, omega) = (g.params.h_plus.max(g.params.h_cross), g.params.omega);
    let coeff = |m: i64, t: f64| -> Complex64 {
        match m {
            m if m == l => Complex64::from_polar(amp, -omega * t),
            m if m == -l => Complex64::from_polar(amp, omega * t),
            _ => Complex64::new(0.0, 0.0),
        }
    };
    let (r, mass) = (g.r, g.mass);
    let times: Vec<f64> = (0..g.t_samples).map(|k| g.t_end * k as f64 / (g.t_samples - 1) as f64).collect();
    let mut table = ctx.file("modes.csv")?;
    writeln!(table, "t,l,m,re,im,re_expected,im_expected")?;
    let mut series = Vec::new();
    let mut worst: f64 = 0.0;
    for &t in &times {
        let strain = |_t: f64, _r: f64, th: f64, ph: f64| -> Complex64 {
            [l, -l].iter().map(|&m| coeff(m, t) * swsh(-2, l, m, th, ph).unwrap_or_default()).sum::<Complex64>() * (mass / r)
        };
        for m in -l..=l {
            let h = extract_mode(strain, l, m, r, t, mass, &g.quadrature)?;
            let e = coeff(m, t);
            worst = worst.max((h - e).norm());
            writeln!(table, "{t:.10e},{l},{m},{:.16e},{:.16e},{:.16e},{:.16e}", h.re, h.im, e.re, e.im)?;
            if m == l {
                series.push((t, h));
            }
        }
    }
    table.flush()?;
    write_mode_csv(&series, ctx.file(&format!("h{l}{l}.csv"))?)?;
    println!("Gram matrix max deviation from identity {off:.3e}; mode recovery max error {worst:.3e}");
    ctx.summary(json!({ "gram_max_dev": off, "mode_max_err": worst, "times": times.len() }))
}

fn fd_compare(ctx: &Ctx, ckpt: &Option<PathBuf>) -> Result<(), CliError> {
    let f = ctx.field(ckpt)?;
    let grid = ctx.grid_for(&f);
    let (_, hi) = grid.bounds();
    let hmax = ctx.cfg.eval.fd_steps.iter().copied().fold(0.0, f64::max);
    let pts: Vec<[f64; 4]> = validation_points(&grid, ctx.cfg.eval.fd_points)
        .into_iter()
        .map(|x| (1..4).fold(x, |y, ax| fit_stencil(&y, ax, hi[ax], hmax, FdOrder::Six)))
        .collect();
    let mut w = ctx.file("fd_compare.csv")?;
    writeln!(w, "# {} metric Jacobian, automatic vs forward differences, {} points", f.label(), pts.len())?;
    writeln!(w, "order,h,mae,max")?;
    let mut rows = Vec::new();
    for &o in &ctx.cfg.eval.fd_orders {
        let order = FdOrder::from_order(o)?;
        for &h in &ctx.cfg.eval.fd_steps {
            let c = ad_fd_compare(&f, &pts, h, order)?;
            writeln!(w, "{o},{h:e},{:.6e},{:.6e}", c.mae, c.max)?;
            println!("order {o} h {h:>8.1e}: MAE {:.3e} max {:.3e}", c.mae, c.max);
            rows.push(c);
        }
    }
    w.flush()?;
    ctx.summary(json!({ "points": pts.len(), "rows": rows }))
}

fn report(ctx: &Ctx, ckpt: &Option<PathBuf>) -> Result<(), CliError> {
    let (params, comps) = match ctx.checkpoint(ckpt) {
        Some(p) => {
            let m = FieldModel::load(Path::new(&p))?;
            (m.param_count(), m.arch.output.dim())
        }
        None => (ctx.cfg.model.arch().param_count(), ctx.cfg.model.output.dim()),
    };
    let grid = match &ctx.cfg.grid {
        Some(g) => g.spec(),
        None => GridSpec::schwarzschild_spherical(128),
    };
    let r = compression_report(params, &grid, comps.min(10));
    r.write_csv(ctx.file("compression.csv")?)?;
    println!("{r}");
    ctx.summary(serde_json::to_value(r)?)
}
