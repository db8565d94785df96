//! The pipelines, one function per figure-level data product.

use std::f64::consts::{FRAC_PI_4, PI};

use xplab_core::device::{
    ats_dressing, effective_coupling, floquet_effective_hamiltonian, measured_second_chern, nonadiabatic_curvature,
    spectroscopy::{k_path, spectroscopy_scan, SpectroscopySource},
    FloquetOptions,
};
use xplab_core::fit::linear_fit;
use xplab_core::model::{
    bloch_to_couplings, bloch_vector, monopole_positions, spectrum_numeric, symmetry_report, Momentum, ModelParams, Valley,
};
use xplab_core::pme::{
    default_ax_sweep, magnetic_field_closed, monopole_shift_vs_ax, pseudo_electric_field, yang_charge, GaugeProfile,
    ResponseRecord, SeparationSchedule, U_MAX,
};
use xplab_core::topo::{
    chern_form_closed, chern_form_field, second_chern_closed, second_chern_full4d_extrapolated, second_chern_reduced,
    second_chern_reduced_extrapolated, valley_chern, winding3_sphere, CurvatureField,
};
use xplab_core::{Exec, Result};

use crate::config::{Mode, Pipeline, RunConfig, Source};
use crate::output::{Cell, Table};
use crate::plot::{edges, Figure, Heatmap, Panel, Series};
use crate::row;
use crate::run::{Products, RunError, Runner};

pub fn run(r: &mut Runner) -> std::result::Result<(), RunError> {
    match r.cfg.pipeline {
        Pipeline::Fig2 => fig2(r),
        Pipeline::Fig3Gauge => fig3_gauge(r),
        Pipeline::Fig3Efield => fig3_efield(r),
        Pipeline::Fig4Chernform => fig4_chernform(r),
        Pipeline::Fig4C2Sweep => fig4_c2sweep(r),
        Pipeline::Fig4Current => fig4_current(r),
        Pipeline::Invariants => invariants(r),
        Pipeline::Device => device(r),
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn opt(x: Option<f64>) -> Cell {
    match x {
        Some(v) => Cell::F(v),
        None => Cell::S(String::new()),
    }
}

fn valley_name(v: Valley) -> &'static str {
    match v {
        Valley::Plus => "+",
        Valley::Minus => "-",
    }
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Ideal => "ideal",
        Mode::Closed => "closed",
        Mode::Open => "open",
    }
}

/// Second Chern number of `p` by the configured method.
fn second_chern(cfg: &RunConfig, p: &ModelParams, exec: Exec) -> Result<f64> {
    let g = &cfg.grid;
    let [n_q, n_theta] = cfg.sweep.protocol_grid;
    match cfg.sweep.mode {
        Mode::Ideal => Ok(second_chern_reduced(p, g.q_cut, g.hopf(), exec)?.value),
        Mode::Closed => Ok(measured_second_chern(p, g.q_cut, n_q, n_theta, &cfg.protocol, None, exec)?.value),
        Mode::Open => {
            Ok(measured_second_chern(p, g.q_cut, n_q, n_theta, &cfg.protocol, Some(&cfg.device.decoherence), exec)?.value)
        }
    }
}

fn fig2(r: &mut Runner) -> std::result::Result<(), RunError> {
    r.stage("spectrum-grid", |cfg, exec| {
        let n = cfg.sweep.n_k;
        let ks = linspace(-PI, PI, n);
        let mut t = Table::new("spectrum_grid", &["a", "k_w", "k_x", "e1", "e2", "e3", "e4"]);
        let mut maps = Vec::new();
        for &a in &cfg.sweep.a_values {
            let p = ModelParams { a, ..cfg.model };
            p.validate()?;
            let e = exec.map(n * n, |i| spectrum_numeric(&Momentum([ks[i % n], 0.0, 0.0, ks[i / n]]), &p));
            for (i, ev) in e.iter().enumerate() {
                t.push(row![a, ks[i / n], ks[i % n], ev[0], ev[1], ev[2], ev[3]]);
            }
            maps.push(Heatmap {
                title: format!("upper band, a = {a}"),
                x_label: "k_w".into(),
                y_label: "k_x".into(),
                x_edges: edges(&ks),
                y_edges: edges(&ks),
                values: e.iter().map(|v| v[3]).collect(),
            });
        }
        Ok(((), Products::new().table(t).figure(Figure::Heat { name: "fig2_upper_band".into(), maps })))
    })?;

    r.stage("spectrum-cut", |cfg, exec| {
        let path = k_path(Momentum([0.0, 0.0, 0.0, -PI]), Momentum([0.0, 0.0, 0.0, PI]), cfg.sweep.n_path)?;
        let device = cfg.sweep.source == Source::Device;
        let source = if device { "device" } else { "effective" };
        let mut t = Table::new("spectrum_cut", &["a", "source", "k_w", "level", "energy"]);
        let mut panels = Vec::new();
        let mut counts = Vec::new();
        for &a in &cfg.sweep.a_values {
            let p = ModelParams { a, ..cfg.model };
            let src = if device {
                SpectroscopySource::Device { cfg: cfg.device.clone(), params: p, probe: cfg.probe.clone() }
            } else {
                SpectroscopySource::Effective(p)
            };
            let scan = spectroscopy_scan(&src, &path, exec)?;
            let mut levels: Vec<Vec<(f64, f64)>> = Vec::new();
            for s in &scan {
                for (l, &e) in s.levels.iter().enumerate() {
                    t.push(row![a, source, s.k.kw(), l + 1, e]);
                    if levels.len() <= l {
                        levels.resize(l + 1, Vec::new());
                    }
                    levels[l].push((s.k.kw(), e));
                }
            }
            counts.push(serde_json::json!({ "a": a, "max_levels": levels.len() }));
            let mut panel = Panel::new(format!("a = {a}"), "k_w (k_x = k_y = k_z = 0)", "E (MHz)");
            for (l, pts) in levels.into_iter().enumerate() {
                let label = format!("E{}", l + 1);
                panel = panel.with(if device { Series::dots(label, pts) } else { Series::line(label, pts) });
            }
            panels.push(panel);
        }
        let products = Products::new()
            .table(t)
            .figure(Figure::Lines { name: "fig2_spectrum_cut".into(), panels })
            .result("source", source)
            .result("levels", counts);
        Ok(((), products))
    })
}

/// A_x sweeps and the fitted field for each α.
fn gauge_sweeps(cfg: &RunConfig, exec: Exec) -> Result<(Vec<(f64, f64)>, Products)> {
    let a_x = if cfg.sweep.a_x.is_empty() { default_ax_sweep() } else { cfg.sweep.a_x.clone() };
    let mut pts = Table::new("gauge_shift", &["alpha", "a_x", "delta_e", "y", "kw_plus", "kw_minus", "separation"]);
    let mut fits =
        Table::new("gauge_fit", &["alpha", "slope", "intercept", "r2", "max_residual", "b_z", "b_z_closed", "nonlinear"]);
    let mut shift = Panel::new("gauge potential against monopole shift", "Y", "A_x");
    let mut sep = Panel::new("monopole separation", "A_x", "k_w+ - k_w-");
    let mut fields = Vec::new();
    let mut summary = Vec::new();
    for (n, &alpha) in cfg.sweep.alphas.iter().enumerate() {
        let s = monopole_shift_vs_ax(&cfg.model, alpha, &a_x, exec)?;
        for q in &s.points {
            pts.push(row![alpha, q.a_x, q.delta_e, q.y, q.node_plus.kw(), q.node_minus.kw(), q.separation]);
        }
        let closed = magnetic_field_closed(&GaugeProfile::new(alpha, 0.0));
        fits.push(row![alpha, s.fit.slope, s.fit.intercept, s.fit.r2, s.fit.max_residual, s.b_z, closed, s.nonlinear]);
        shift = shift.with(Series::dots(format!("α = {alpha}"), s.points.iter().map(|q| (q.y, q.a_x)).collect()).colored(n));
        let ys: Vec<f64> = s.points.iter().map(|q| q.y).collect();
        let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &y| (l.min(y), h.max(y)));
        shift = shift.with(Series::line("", [lo, hi].iter().map(|&y| (y, s.fit.intercept + s.fit.slope * y)).collect()).colored(n));
        sep = sep.with(Series::line(format!("α = {alpha}"), s.points.iter().map(|q| (q.a_x, q.separation)).collect()).colored(n));
        fields.push((alpha, s.b_z));
        summary.push(serde_json::json!({ "alpha": alpha, "b_z": s.b_z, "b_z_closed": closed, "r2": s.fit.r2 }));
    }
    let products = Products::new()
        .table(pts)
        .table(fits)
        .figure(Figure::Lines { name: "fig3_gauge".into(), panels: vec![shift, sep] })
        .result("fields", summary);
    Ok((fields, products))
}

fn fig3_gauge(r: &mut Runner) -> std::result::Result<(), RunError> {
    r.stage("gauge-sweep", gauge_sweeps).map(|_| ())
}

fn fig3_efield(r: &mut Runner) -> std::result::Result<(), RunError> {
    r.stage("separation", |_, _| {
        let mut sched = Table::new("separation_schedule", &["segment", "direction", "alpha", "tau", "lambda", "b_w"]);
        let mut field =
            Table::new("pseudo_electric", &["segment", "direction", "alpha", "tau_mid", "b_w_start", "b_w_end", "e5_w"]);
        let mut bw_panel = Panel::new("monopole separation", "τ", "b_w");
        let mut e5_panel = Panel::new("pseudo-electric field", "τ", "E5_w");
        let mut summary = Vec::new();
        for (i, s) in SeparationSchedule::standard_segments().iter().enumerate() {
            let dir = format!("{:?}", s.direction).to_lowercase();
            let bw = s.b_w()?;
            for ((&t, &l), &b) in s.tau.iter().zip(&s.lambda).zip(&bw) {
                sched.push(row![i + 1, dir.as_str(), s.alpha, t, l, b]);
            }
            let e5 = pseudo_electric_field(s)?;
            for x in &e5 {
                field.push(row![i + 1, dir.as_str(), s.alpha, x.tau_mid, x.b_w_start, x.b_w_end, x.e5_w]);
            }
            let label = format!("{dir}, α = {}", s.alpha);
            bw_panel = bw_panel.with(Series::line(label.clone(), s.tau.iter().copied().zip(bw.iter().copied()).collect()));
            e5_panel = e5_panel.with(Series::dots(label, e5.iter().map(|x| (x.tau_mid, x.e5_w)).collect()));
            let mean = e5.iter().map(|x| x.e5_w).sum::<f64>() / e5.len() as f64;
            summary.push(serde_json::json!({ "segment": i + 1, "direction": dir, "alpha": s.alpha, "mean_e5_w": mean }));
        }
        let products = Products::new()
            .table(sched)
            .table(field)
            .figure(Figure::Lines { name: "fig3_efield".into(), panels: vec![bw_panel, e5_panel] })
            .result("segments", summary);
        Ok(((), products))
    })
}

fn chern_form_products(cfg: &RunConfig, field: &CurvatureField) -> Products {
    let m = cfg.model.m;
    let (nq, nt) = (field.grid.n_q, field.grid.n_theta);
    let mut ff = Table::new("chern_form", &["i_q", "i_theta", "q", "theta", "weight", "chern_form", "closed_form"]);
    let mut comps = Table::new(
        "curvature",
        &["i_q", "i_theta", "mu", "nu", "q", "theta", "re_00", "im_00", "re_01", "im_01", "re_10", "im_10", "re_11", "im_11"],
    );
    let mut worst: f64 = 0.0;
    for (n, c) in field.cells.iter().enumerate() {
        let (i, j) = (n / nt, n % nt);
        let closed = chern_form_closed(c.q, c.theta, m);
        ff.push(row![i, j, c.q, c.theta, c.weight, c.chern_form, closed]);
        if c.q >= 0.05 * m.abs() && closed != 0.0 {
            worst = worst.max((c.chern_form - closed).abs() / closed.abs());
        }
        for comp in &c.components {
            let f = comp.f;
            comps.push(row![
                i,
                j,
                comp.mu.symbol(),
                comp.nu.symbol(),
                c.q,
                c.theta,
                f[0][0].re,
                f[0][0].im,
                f[0][1].re,
                f[0][1].im,
                f[1][0].re,
                f[1][0].im,
                f[1][1].re,
                f[1][1].im
            ]);
        }
    }
    let qs: Vec<f64> = (0..nq).map(|i| field.cells[i * nt].q).collect();
    let ths: Vec<f64> = (0..nt).map(|j| field.cells[j].theta).collect();
    let heat = Heatmap {
        title: format!("Chern form, m = {m}"),
        x_label: "q (MHz)".into(),
        y_label: "θ".into(),
        x_edges: edges(&qs),
        y_edges: edges(&ths),
        values: field.cells.iter().map(|c| c.chern_form).collect(),
    };
    let j = ths.iter().enumerate().min_by(|a, b| (a.1 - FRAC_PI_4).abs().total_cmp(&(b.1 - FRAC_PI_4).abs())).map_or(0, |x| x.0);
    let cut = Panel::new(format!("θ = {:.4}", ths[j]), "q (MHz)", "Chern form")
        .with(Series::dots("lattice", (0..nq).map(|i| (qs[i], field.cells[i * nt + j].chern_form)).collect()))
        .with(Series::line("closed form", (0..nq).map(|i| (qs[i], chern_form_closed(qs[i], ths[j], m))).collect()));
    let integral = field.integrate();
    Products::new()
        .table(ff)
        .table(comps)
        .figure(Figure::Heat { name: "fig4_chern_form".into(), maps: vec![heat] })
        .figure(Figure::Lines { name: "fig4_chern_form_cut".into(), panels: vec![cut] })
        .result("rank", field.rank)
        .result("second_chern", integral)
        .result("second_chern_closed", second_chern_closed(field.q_max, m))
        .result("max_relative_error", worst)
}

fn fig4_chernform(r: &mut Runner) -> std::result::Result<(), RunError> {
    let field = r.stage("field", |cfg, exec| {
        let field = chern_form_field(&cfg.model, Valley::Plus, cfg.grid.q_cut, cfg.grid.hopf(), exec)?;
        let products = chern_form_products(cfg, &field);
        Ok((field, products))
    })?;
    if r.cfg.sweep.subsample == 0 {
        return Ok(());
    }
    r.stage("protocol", |cfg, exec| {
        let s = cfg.sweep.subsample;
        let (nq, nt) = (field.grid.n_q, field.grid.n_theta);
        let cells: Vec<(usize, usize)> =
            (0..s).flat_map(|k| (0..s).map(move |l| ((2 * k + 1) * nq / (2 * s), (2 * l + 1) * nt / (2 * s)))).collect();
        let runs = exec.try_map(cells.len(), |n| {
            let c = &field.cells[cells[n].0 * nt + cells[n].1];
            nonadiabatic_curvature(&cfg.model, c.q, c.theta, &cfg.protocol, None)
        })?;
        let mut t = Table::new(
            "protocol_overlay",
            &["i_q", "i_theta", "q", "theta", "chern_form_protocol", "chern_form_lattice", "closed_form", "max_leakage"],
        );
        let mut worst: f64 = 0.0;
        let mut pairs = Vec::new();
        for (&(i, j), p) in cells.iter().zip(&runs) {
            let c = &field.cells[i * nt + j];
            t.push(row![i, j, c.q, c.theta, p.chern_form, c.chern_form, chern_form_closed(c.q, c.theta, cfg.model.m), p.max_leakage]);
            if c.chern_form != 0.0 {
                worst = worst.max((p.chern_form - c.chern_form).abs() / c.chern_form.abs());
            }
            pairs.push((c.chern_form, p.chern_form));
        }
        let hi = pairs.iter().fold(0.0f64, |a, p| a.max(p.0.abs()).max(p.1.abs()));
        let panel = Panel::new("protocol against lattice", "lattice", "protocol")
            .with(Series::dots("subsample", pairs))
            .with(Series::line("equal", vec![(-hi, -hi), (hi, hi)]));
        let products = Products::new()
            .table(t)
            .figure(Figure::Lines { name: "fig4_protocol_overlay".into(), panels: vec![panel] })
            .result("points", cells.len())
            .result("max_relative_difference", worst);
        Ok(((), products))
    })
}

fn fig4_c2sweep(r: &mut Runner) -> std::result::Result<(), RunError> {
    r.stage("sweep", |cfg, exec| {
        let g = &cfg.grid;
        let mode = mode_name(cfg.sweep.mode);
        let mut t = Table::new("c2_sweep", &["m", "mode", "q_cut", "c2", "c2_closed", "c2_extrapolated"]);
        let mut pts = Vec::new();
        let mut extra = Vec::new();
        for &m in &cfg.sweep.masses {
            let p = cfg.model.with_mass(m);
            let c2 = second_chern(cfg, &p, exec)?;
            let ext = if cfg.sweep.mode == Mode::Ideal && g.extrapolate {
                Some(second_chern_reduced_extrapolated(&p, g.q_cut, g.hopf(), exec)?.extrapolated)
            } else {
                None
            };
            t.push(row![m, mode, g.q_cut, c2, second_chern_closed(g.q_cut, m), opt(ext)]);
            pts.push((m, c2));
            if let Some(e) = ext {
                extra.push((m, e));
            }
        }
        let lo = cfg.sweep.masses.iter().copied().fold(f64::INFINITY, f64::min).min(-1.0);
        let hi = cfg.sweep.masses.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(1.0);
        let branch = |a: f64, b: f64| linspace(a, b, 100).into_iter().map(|m| (m, second_chern_closed(g.q_cut, m))).collect();
        let mut panel = Panel::new(format!("second Chern number, q_cut = {} MHz", g.q_cut), "m (MHz)", "C2")
            .with(Series::line("closed form", branch(lo, -0.01 * (hi - lo))).colored(0))
            .with(Series::line("", branch(0.01 * (hi - lo), hi)).colored(0))
            .with(Series::dots(mode, pts.clone()).colored(1));
        if !extra.is_empty() {
            panel = panel.with(Series::dots("extrapolated", extra).colored(2));
        }
        let products = Products::new()
            .table(t)
            .figure(Figure::Lines { name: "fig4_c2_sweep".into(), panels: vec![panel] })
            .result("mode", mode)
            .result("values", pts);
        Ok(((), products))
    })
}

fn fig4_current(r: &mut Runner) -> std::result::Result<(), RunError> {
    let fields = r.stage("magnetic-field", gauge_sweeps)?;
    let e5 = r.stage("pseudo-electric", |_, _| {
        let s = pseudo_electric_field(&SeparationSchedule::expanding(1.0))?;
        let mut t = Table::new("pseudo_electric", &["tau_mid", "b_w_start", "b_w_end", "e5_w"]);
        for x in &s {
            t.push(row![x.tau_mid, x.b_w_start, x.b_w_end, x.e5_w]);
        }
        let mean = s.iter().map(|x| x.e5_w).sum::<f64>() / s.len() as f64;
        Ok((mean, Products::new().table(t).result("e5_w", mean)))
    })?;
    let c2 = r.stage("second-chern", |cfg, exec| {
        let c2 = second_chern(cfg, &cfg.model, exec)?;
        let closed = second_chern_closed(cfg.grid.q_cut, cfg.model.m);
        let mut t = Table::new("second_chern", &["mode", "m", "q_cut", "c2", "c2_closed"]);
        t.push(row![mode_name(cfg.sweep.mode), cfg.model.m, cfg.grid.q_cut, c2, closed]);
        Ok((c2, Products::new().table(t).result("c2", c2)))
    })?;
    r.stage("current", |_, _| {
        let recs: Vec<(f64, ResponseRecord)> = fields.iter().map(|&(a, b)| (a, ResponseRecord::new(c2, e5, b))).collect();
        let mut t = Table::new("current", &["alpha", "b_z", "e5_w", "c2", "j_z"]);
        for (a, x) in &recs {
            t.push(row![*a, x.b_z, x.e5_w, x.c2, x.j_z]);
        }
        let b: Vec<f64> = recs.iter().map(|x| x.1.b_z).collect();
        let j: Vec<f64> = recs.iter().map(|x| x.1.j_z).collect();
        let fit = linear_fit(&b, &j)?;
        let expected = c2 * e5 / (2.0 * PI * PI);
        let mut f = Table::new("current_fit", &["slope", "intercept", "r2", "expected_slope", "relative_error"]);
        let rel = (fit.slope - expected).abs() / expected.abs();
        f.push(row![fit.slope, fit.intercept, fit.r2, expected, rel]);
        let (lo, hi) = b.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
        let panel = Panel::new("topological current", "B^z", "J^z")
            .with(Series::dots("response", b.iter().copied().zip(j.iter().copied()).collect()))
            .with(Series::line("fit", [lo, hi].iter().map(|&x| (x, fit.intercept + fit.slope * x)).collect()));
        let products = Products::new()
            .table(t)
            .table(f)
            .figure(Figure::Lines { name: "fig4_current".into(), panels: vec![panel] })
            .result("slope", fit.slope)
            .result("expected_slope", expected)
            .result("r2", fit.r2);
        Ok(((), products))
    })?;
    r.stage("yang-charge", |cfg, exec| {
        let m = cfg.model.m.abs();
        let y = yang_charge(&cfg.model, -m, m, cfg.grid.q_cut, cfg.grid.hopf(), exec)?;
        let mut t = Table::new("yang_charge", &["m_neg", "m_pos", "q_cut", "c2_neg", "c2_pos", "delta"]);
        t.push(row![-m, m, cfg.grid.q_cut, y.c2_neg, y.c2_pos, y.delta]);
        Ok(((), Products::new().table(t).result("delta", y.delta)))
    })
}

fn invariants(r: &mut Runner) -> std::result::Result<(), RunError> {
    r.stage("symmetry", |cfg, _| {
        let mut t = Table::new("symmetry", &["case", "m", "chiral", "cp", "chiral_defect", "cp_defect", "cp_square_defect"]);
        for (case, p) in [("massless", cfg.model.with_mass(0.0)), ("massive", cfg.model)] {
            let s = symmetry_report(&p);
            t.push(row![case, p.m, s.chiral, s.cp, s.chiral_defect, s.cp_defect, s.cp_square_defect]);
        }
        Ok(((), Products::new().table(t)))
    })?;
    r.stage("monopoles", |cfg, _| {
        let pair = monopole_positions(cfg.model.lambda)?;
        let mut t = Table::new("monopoles", &["valley", "k_x", "k_y", "k_z", "k_w", "b_w"]);
        for (v, k) in [(Valley::Plus, pair.plus), (Valley::Minus, pair.minus)] {
            t.push(row![valley_name(v), k.0[0], k.0[1], k.0[2], k.0[3], pair.b_w]);
        }
        Ok(((), Products::new().table(t).result("b_w", pair.b_w)))
    })?;
    r.stage("winding", |cfg, exec| {
        let p = cfg.model.with_mass(0.0);
        let mut t = Table::new("winding", &["valley", "a", "radius", "value", "coarse", "min_det", "reference"]);
        let mut out = Vec::new();
        for v in [Valley::Plus, Valley::Minus] {
            let w = winding3_sphere(&p, v, cfg.winding.radius, cfg.winding.grid(), exec)?;
            let reference = (p.a == 0.0).then_some(v.sign());
            t.push(row![valley_name(v), p.a, w.radius, w.value, w.coarse, w.min_det, opt(reference)]);
            out.push(w.value);
        }
        Ok(((), Products::new().table(t).result("values", out)))
    })?;
    r.stage("second-chern", |cfg, exec| {
        let (p, g) = (&cfg.model, &cfg.grid);
        let sgn = p.m.signum();
        let mut t = Table::new("second_chern", &["method", "valley", "q_cut", "value", "reference"]);
        let mut summary = serde_json::Map::new();
        if p.a == 0.0 {
            let red = second_chern_reduced(p, g.q_cut, g.hopf(), exec)?;
            t.push(row!["reduced", "+", g.q_cut, red.value, second_chern_closed(g.q_cut, p.m)]);
            summary.insert("reduced".into(), red.value.into());
            if g.extrapolate {
                let e = second_chern_reduced_extrapolated(p, g.q_cut, g.hopf(), exec)?;
                t.push(row!["reduced-extrapolated", "+", f64::INFINITY, e.extrapolated, 0.5 * sgn]);
                summary.insert("extrapolated".into(), e.extrapolated.into());
            }
        } else if g.extrapolate {
            let e = second_chern_full4d_extrapolated(p, Valley::Plus, g.q_cut, g.full4d, exec)?;
            let reference = if p.a.abs() == 1.0 { 0.125 * sgn } else { 0.5 * sgn };
            t.push(row!["full4d-extrapolated", "+", f64::INFINITY, e.extrapolated, reference]);
            summary.insert("extrapolated".into(), e.extrapolated.into());
        }
        let v = valley_chern(p, g.q_cut, g.full4d, exec)?;
        let closed = (p.a == 0.0).then(|| second_chern_closed(g.q_cut, p.m));
        t.push(row!["full4d", "+", g.q_cut, v.c2_plus, opt(closed)]);
        t.push(row!["full4d", "-", g.q_cut, v.c2_minus, opt(closed.map(|c| -c))]);
        t.push(row!["full4d-valley", "", g.q_cut, v.c2_valley, opt(closed)]);
        summary.insert("valley".into(), v.c2_valley.into());
        let mut products = Products::new().table(t);
        products.results = summary;
        Ok(((), products))
    })
}

fn device(r: &mut Runner) -> std::result::Result<(), RunError> {
    r.stage("couplers", |cfg, _| {
        let mut t = Table::new("couplers", &["edge", "j_static", "dj_dphi", "omega_re", "omega_im", "dispersive_ratio"]);
        let mut worst: f64 = 0.0;
        for j in 0..4 {
            let e = effective_coupling(&cfg.device, j)?;
            t.push(row![e.edge + 1, e.j_static, e.dj_dphi, e.omega.re, e.omega.im, e.dispersive_ratio]);
            worst = worst.max(e.dispersive_ratio);
        }
        let products = Products::new()
            .table(t)
            .result("max_dispersive_ratio", worst)
            .result("warnings", cfg.device.dispersive_warnings());
        Ok(((), products))
    })?;
    r.stage("floquet", |cfg, exec| {
        let p = cfg.model.with_mass(0.0);
        let kw = linspace(0.0, PI, cfg.sweep.n_floquet);
        let quads: Vec<_> =
            kw.iter().map(|&w| bloch_to_couplings(&bloch_vector(&Momentum([0.0, 0.0, 0.0, w]), &p), p.a)).collect();
        let largest = quads.iter().map(|q| q.max_abs()).fold(0.0, f64::max);
        let units = if largest > 0.0 { cfg.probe.scale / largest } else { 1.0 };
        let opts = FloquetOptions { scale: Some(cfg.probe.scale), ..Default::default() };
        let res = exec.try_map(kw.len(), |i| floquet_effective_hamiltonian(&cfg.device, &quads[i].scaled(units), opts))?;
        let mut t = Table::new(
            "floquet",
            &[
                "k_w",
                "target_e1",
                "target_e2",
                "target_e3",
                "target_e4",
                "e1",
                "e2",
                "e3",
                "e4",
                "spectrum_error",
                "coupling_error",
                "diagonal_residual",
                "period",
            ],
        );
        let mut panel = Panel::new(format!("Floquet spectrum, a = {}", p.a), "k_w", "E (MHz)");
        let mut worst: f64 = 0.0;
        for (w, f) in kw.iter().zip(&res) {
            let (a, b) = (f.target_spectrum, f.spectrum);
            t.push(row![
                *w,
                a[0],
                a[1],
                a[2],
                a[3],
                b[0],
                b[1],
                b[2],
                b[3],
                f.spectrum_error,
                f.coupling_error,
                f.diagonal_residual,
                f.period
            ]);
            worst = worst.max(f.spectrum_error);
        }
        for l in 0..4 {
            panel = panel
                .with(Series::line(format!("target E{}", l + 1), kw.iter().zip(&res).map(|(w, f)| (*w, f.target_spectrum[l])).collect()))
                .with(Series::dots(format!("extracted E{}", l + 1), kw.iter().zip(&res).map(|(w, f)| (*w, f.spectrum[l])).collect()));
        }
        let products = Products::new()
            .table(t)
            .figure(Figure::Lines { name: "device_floquet".into(), panels: vec![panel] })
            .result("coupling_scale", cfg.probe.scale)
            .result("max_spectrum_error", worst);
        Ok(((), products))
    })?;
    r.stage("autler-townes", |cfg, exec| {
        let rabi = linspace(0.0, 2.0 * U_MAX, cfg.sweep.rabi_points);
        let res = exec.try_map(rabi.len(), |i| ats_dressing(&cfg.device, rabi[i]))?;
        let mut t = Table::new(
            "autler_townes",
            &["rabi", "drive_freq", "e_minus", "e_plus", "splitting", "shift", "margin", "disturbs_manifold"],
        );
        let mut worst: f64 = 0.0;
        for d in &res {
            t.push(row![d.rabi, d.drive_freq, d.e_minus, d.e_plus, d.splitting, d.shift, d.margin, d.disturbs_manifold]);
            if d.rabi > 0.0 {
                worst = worst.max((d.splitting - d.rabi).abs() / d.rabi);
            }
        }
        let panel = Panel::new("Autler-Townes splitting", "Ω_d (MHz)", "splitting (MHz)")
            .with(Series::dots("dressed", res.iter().map(|d| (d.rabi, d.splitting)).collect()))
            .with(Series::line("Ω_d", rabi.iter().map(|&x| (x, x)).collect()));
        let products = Products::new()
            .table(t)
            .figure(Figure::Lines { name: "device_autler_townes".into(), panels: vec![panel] })
            .result("max_relative_deviation", worst);
        Ok(((), products))
    })?;
    r.stage("protocol", |cfg, exec| {
        let m = cfg.model.m;
        let points: Vec<(bool, f64)> =
            [false, true].iter().flat_map(|&open| [0.5, 1.0, 2.0].map(|s| (open, s * m.abs()))).collect();
        let res = exec.try_map(points.len(), |i| {
            let (open, q) = points[i];
            let dec = open.then_some(&cfg.device.decoherence);
            nonadiabatic_curvature(&cfg.model, q, FRAC_PI_4, &cfg.protocol, dec)
        })?;
        let mut t = Table::new(
            "protocol",
            &["system", "q", "theta", "plane", "sector", "curvature", "leakage", "vacuum", "decoupling_residual"],
        );
        let mut ff = Table::new("protocol_chern_form", &["system", "q", "theta", "trace", "chern_form", "closed_form", "max_leakage"]);
        for (&(open, q), p) in points.iter().zip(&res) {
            let sys = if open { "open" } else { "closed" };
            for pl in &p.planes {
                let (mu, nu) = pl.plane.axes();
                let name = format!("{}{}", mu.symbol(), nu.symbol());
                for s in &pl.sectors {
                    t.push(row![sys, q, p.theta, name.as_str(), s.label as i64, s.curvature, s.leakage, s.vacuum, pl.decoupling_residual]);
                }
            }
            ff.push(row![sys, q, p.theta, p.trace, p.chern_form, chern_form_closed(q, p.theta, m), p.max_leakage]);
        }
        Ok(((), Products::new().table(t).table(ff)))
    })
}
