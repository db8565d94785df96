//! End-to-end acceptance criteria.
//!
//! Each criterion runs the library against an independent reference and
//! returns a report instead of failing; [`AcceptanceReport::passed`] is the
//! overall verdict. Checks marked as not enforced are recorded for
//! comparison only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::time::Instant;

use crate::device::{
    ats_dressing, floquet_effective_hamiltonian, measured_second_chern, nonadiabatic_curvature, Decoherence,
    DeviceConfig, FloquetOptions, ProtocolOptions,
};
use crate::error::Result;
use crate::exec::Exec;
use crate::fit::linear_fit;
use crate::model::{
    bloch_to_couplings, bloch_vector, monopole_positions, spectrum_analytic, spectrum_numeric, BlochVector, CouplingQuad,
    Momentum, ModelParams, Valley,
};
use crate::pme::{
    default_ax_sweep, locate_node, monopole_shift_vs_ax, pseudo_electric_field, topological_current, GaugeProfile,
    SeparationSchedule, SCHEDULE_RATE,
};
use crate::topo::{
    chern_form_closed, chern_form_field, second_chern_closed, second_chern_full4d, second_chern_full4d_extrapolated,
    second_chern_reduced, second_chern_reduced_extrapolated, winding3_sphere, CurvatureField, HopfGrid, WindingGrid,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Quick,
    Full,
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "quick" => Ok(Level::Quick),
            "full" => Ok(Level::Full),
            other => Err(format!("unknown level `{other}` (expected quick or full)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    /// Allowed deviation; relative when `relative` is set.
    pub tolerance: f64,
    pub relative: bool,
    pub passed: bool,
    pub enforced: bool,
}

impl Check {
    pub fn rel(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        let passed = (value - target).abs() <= tol * target.abs();
        Self { name: name.into(), value, target, tolerance: tol, relative: true, passed, enforced: true }
    }

    pub fn abs(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        let passed = (value - target).abs() <= tol;
        Self { name: name.into(), value, target, tolerance: tol, relative: false, passed, enforced: true }
    }

    /// `value ≤ bound`.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, target: bound, tolerance: 0.0, relative: false, passed: value <= bound, enforced: true }
    }

    /// `value ≥ bound`.
    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, target: bound, tolerance: 0.0, relative: false, passed: value >= bound, enforced: true }
    }

    /// Recorded next to `target`, never failing.
    pub fn report(name: impl Into<String>, value: f64, target: f64) -> Self {
        let mut c = Self::rel(name, value, target, 0.0);
        c.passed = true;
        c.enforced = false;
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub error: Option<String>,
    pub seconds: f64,
    pub notes: Vec<String>,
}

impl CriterionReport {
    /// One summary line: status, title, then every enforced check.
    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let mut parts: Vec<String> = self
            .checks
            .iter()
            .filter(|c| c.enforced)
            .map(|c| {
                let mark = if c.passed { "" } else { " ✗" };
                format!("{}={:.6}{}", c.name, c.value, mark)
            })
            .collect();
        if let Some(e) = &self.error {
            parts.push(format!("error: {e}"));
        }
        format!("criterion {} [{status}] {} ({:.1} s): {}", self.id, self.title, self.seconds, parts.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceReport {
    pub level: Level,
    pub passed: bool,
    pub criteria: Vec<CriterionReport>,
}

/// References the criteria are checked against; tests swap in perturbed
/// versions to confirm that the harness notices.
#[derive(Debug, Clone, Copy)]
pub struct Oracles {
    /// Chern form `(q, θ, m) ↦ 3 tr(F_qθ F_φϕ)/4π²`.
    pub chern_form: fn(f64, f64, f64) -> f64,
    /// Second Chern number `(q_cut, m)` with a finite cutoff.
    pub second_chern: fn(f64, f64) -> f64,
}

impl Default for Oracles {
    fn default() -> Self {
        Self { chern_form: chern_form_closed, second_chern: second_chern_closed }
    }
}

pub const CRITERIA: [(u8, &str); 9] = [
    (1, "spectrum oracle"),
    (2, "monopole geometry"),
    (3, "chern-form field"),
    (4, "second chern number with cutoff"),
    (5, "winding charge"),
    (6, "generic-a fractional second chern number"),
    (7, "parity magnetic effect linearity"),
    (8, "curvature protocol equivalence"),
    (9, "device layer"),
];

pub const M_REF: f64 = 8.0;
pub const Q_CUT: f64 = 200.0;

pub fn acceptance_suite(level: Level, exec: Exec) -> AcceptanceReport {
    acceptance_suite_with(level, exec, &Oracles::default())
}

pub fn acceptance_suite_with(level: Level, exec: Exec, oracles: &Oracles) -> AcceptanceReport {
    let criteria: Vec<CriterionReport> = CRITERIA.iter().map(|&(id, _)| run_criterion(id, level, exec, oracles)).collect();
    AcceptanceReport { level, passed: criteria.iter().all(|c| c.passed), criteria }
}

type Outcome = Result<(Vec<Check>, Vec<String>)>;

/// Run one criterion (1–9).
pub fn run_criterion(id: u8, level: Level, exec: Exec, oracles: &Oracles) -> CriterionReport {
    let title = CRITERIA.iter().find(|c| c.0 == id).map(|c| c.1).unwrap_or("unknown criterion");
    let start = Instant::now();
    let outcome: Outcome = match id {
        1 => spectrum_oracle(level, exec),
        2 => monopole_geometry(),
        3 => chern_form_criterion(exec, oracles),
        4 => second_chern_criterion(level, exec, oracles),
        5 => winding_criterion(exec),
        6 => generic_a_criterion(exec),
        7 => pme_criterion(exec),
        8 => protocol_criterion(level, exec, oracles),
        9 => device_criterion(level, exec),
        _ => Ok((vec![Check::abs("criterion id", id as f64, 1.0, 0.0)], vec![])),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (mut checks, notes, error) = match outcome {
        Ok((c, n)) => (c, n, None),
        Err(e) => (Vec::new(), Vec::new(), Some(e.to_string())),
    };
    if let Some(limit) = runtime_limit(id) {
        checks.push(Check::at_most("runtime_s", seconds, limit));
    }
    let passed = error.is_none() && checks.iter().all(|c| c.passed || !c.enforced);
    CriterionReport { id, title: title.to_string(), passed, checks, error, seconds, notes }
}

fn runtime_limit(id: u8) -> Option<f64> {
    match id {
        1 => Some(10.0),
        3 => Some(120.0),
        8 => Some(900.0),
        _ => None,
    }
}

fn spectrum_oracle(level: Level, exec: Exec) -> Outcome {
    let n = match level {
        Level::Quick => 1000,
        Level::Full => 20_000,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let a_set = [0.0, 0.5, -0.5, 1.0, -1.0];
    let samples: Vec<(Momentum, ModelParams)> = (0..n)
        .map(|_| {
            let k = Momentum(std::array::from_fn(|_| rng.random_range(-PI..PI)));
            let a = a_set[rng.random_range(0..a_set.len())];
            let lambda = rng.random_range(-1.5..=1.5);
            (k, ModelParams::new(a, lambda, 0.0))
        })
        .collect();
    let errs = exec.map(n, |i| {
        let (k, p) = &samples[i];
        let num = spectrum_numeric(k, p);
        let ana = spectrum_analytic(&bloch_vector(k, p), p.a);
        let scale = ana.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
        let diff = num.iter().zip(&ana).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        // near a node the spectrum vanishes; compare on the unit scale there
        diff / scale.max(1.0)
    });
    let worst = errs.iter().copied().fold(0.0, f64::max);
    Ok((
        vec![Check::at_least("samples", n as f64, 1000.0), Check::at_most("max_relative_error", worst, 1e-9)],
        vec![],
    ))
}

fn monopole_geometry() -> Outcome {
    let mut checks = Vec::new();
    // the scalar gauge shift moves energies only, so a unit profile leaves the nodes in place
    let gauge = GaugeProfile::new(1.0, 0.0);
    for lambda in [0.0, 0.5, (0.4 * PI).cos()] {
        let p = ModelParams::new(0.0, lambda, 0.0);
        let expect = lambda.acos();
        let plus = locate_node(&p, &gauge, Valley::Plus)?;
        let minus = locate_node(&p, &gauge, Valley::Minus)?;
        let off_axis = plus.k.0[..3].iter().chain(&minus.k.0[..3]).fold(0.0_f64, |m, x| m.max(x.abs()));
        checks.push(Check::abs(format!("kw_plus(Λ={lambda:.4})"), plus.k.kw(), expect, 1e-6));
        checks.push(Check::abs(format!("kw_minus(Λ={lambda:.4})"), minus.k.kw(), -expect, 1e-6));
        checks.push(Check::at_most(format!("off_axis(Λ={lambda:.4})"), off_axis, 1e-6));
        let pair = monopole_positions(lambda)?;
        checks.push(Check::abs(format!("separation(Λ={lambda:.4})"), 2.0 * pair.b_w, 2.0 * expect, 1e-12));
    }
    let b = |tau: f64| monopole_positions((0.2 * PI * tau).cos()).map(|p| p.b_w);
    checks.push(Check::abs("b_w(τ=2)/π", b(2.0)? / PI, 0.4, 1e-12));
    checks.push(Check::abs("b_w(τ=3)/π", b(3.0)? / PI, 0.6, 1e-12));
    Ok((checks, vec![]))
}

/// Largest relative deviation from the oracle over cells with `q ≥ 0.05 m`.
fn field_deviation(field: &CurvatureField, m: f64, oracles: &Oracles) -> (f64, usize) {
    let mut worst = 0.0_f64;
    let mut n = 0;
    for c in field.cells.iter().filter(|c| c.q >= 0.05 * m.abs()) {
        let reference = (oracles.chern_form)(c.q, c.theta, m);
        worst = worst.max((c.chern_form - reference).abs() / reference.abs());
        n += 1;
    }
    (worst, n)
}

fn chern_form_criterion(exec: Exec, oracles: &Oracles) -> Outcome {
    let p = ModelParams::new(0.0, 0.0, M_REF);
    let grid = HopfGrid::default();
    let field = chern_form_field(&p, Valley::Plus, Q_CUT, grid, exec)?;
    let (worst, n) = field_deviation(&field, M_REF, oracles);
    Ok((
        vec![
            Check::abs("grid_cells", (grid.n_q * grid.n_theta) as f64, 96.0 * 64.0, 0.0),
            Check::at_most("max_relative_error", worst, 0.01),
        ],
        vec![format!("{n} cells compared")],
    ))
}

fn second_chern_criterion(level: Level, exec: Exec, oracles: &Oracles) -> Outcome {
    let grid = HopfGrid::default();
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    let mut reduced = [0.0; 2];
    for (i, m) in [M_REF, -M_REF].into_iter().enumerate() {
        let p = ModelParams::new(0.0, 0.0, m);
        reduced[i] = second_chern_reduced(&p, Q_CUT, grid, exec)?.value;
        checks.push(Check::rel(format!("reduced(m={m})"), reduced[i], (oracles.second_chern)(Q_CUT, m), 0.01));
    }
    checks.push(Check::abs("sign_flip_sum", reduced[0] + reduced[1], 0.0, 1e-12));
    let masses: &[f64] = match level {
        Level::Quick => &[M_REF],
        Level::Full => &[M_REF, -M_REF],
    };
    for (i, &m) in masses.iter().enumerate() {
        let p = ModelParams::new(0.0, 0.0, m);
        let full = second_chern_full4d(&p, Valley::Plus, Q_CUT, HopfGrid::full4d_default(), exec)?.value;
        checks.push(Check::rel(format!("full4d(m={m})"), full, reduced[i], 0.02));
    }
    for m in [M_REF, -M_REF] {
        let p = ModelParams::new(0.0, 0.0, m);
        let ex = second_chern_reduced_extrapolated(&p, Q_CUT, grid, exec)?;
        checks.push(Check::rel(format!("extrapolated(m={m})"), ex.extrapolated, 0.5 * m.signum(), 0.02));
    }
    if level == Level::Full {
        let p = ModelParams::new(0.0, 0.0, M_REF);
        let reference = (oracles.second_chern)(Q_CUT, M_REF);
        for g in [grid.coarsened(), grid, HopfGrid { n_q: 2 * grid.n_q, n_theta: 2 * grid.n_theta, ..grid }] {
            let v = second_chern_reduced(&p, Q_CUT, g, exec)?.value;
            notes.push(format!("convergence n_q={} n_theta={}: C2={v:.8} (error {:.2e})", g.n_q, g.n_theta, v - reference));
            checks.push(Check::report(format!("reduced({}x{})", g.n_q, g.n_theta), v, reference));
        }
    }
    Ok((checks, notes))
}

fn winding_criterion(exec: Exec) -> Outcome {
    let grid = WindingGrid::default();
    let radius = 0.5;
    let p = ModelParams::default();
    let plus = winding3_sphere(&p, Valley::Plus, radius, grid, exec)?;
    let minus = winding3_sphere(&p, Valley::Minus, radius, grid, exec)?;
    let deformed = winding3_sphere(&ModelParams::new(0.5, 0.0, 0.0), Valley::Plus, radius, grid, exec)?;
    Ok((
        vec![
            Check::abs("w3(valley +)", plus.value, 1.0, 0.02),
            Check::abs("w3(valley −)", minus.value, -1.0, 0.02),
            Check::report("w3(a=0.5) vs quoted 2", deformed.value, 2.0),
        ],
        vec![format!("a = 0.5 winding {:.4}; the quoted value 2 is recorded, not enforced", deformed.value)],
    ))
}

fn generic_a_criterion(exec: Exec) -> Outcome {
    let grid = HopfGrid::full4d_default();
    let half = second_chern_full4d_extrapolated(&ModelParams::new(0.5, 0.0, M_REF), Valley::Plus, 2.0 * Q_CUT, grid, exec)?;
    let flat = second_chern_full4d(&ModelParams::new(1.0, 0.0, M_REF), Valley::Plus, Q_CUT, grid, exec)?;
    Ok((
        vec![
            Check::rel("C2(a=0.5, extrapolated)", half.extrapolated, 0.5, 0.03),
            Check::report("C2(a=1) vs sgn(m)/8", flat.value, 0.125),
        ],
        vec![
            format!("a = 0.5: C2({}) = {:.5}, C2({}) = {:.5}", half.q_cut, half.c_q, 2.0 * half.q_cut, half.c_2q),
            "a = 1: lowest two bands occupied; the flat pair sits at zero energy".to_string(),
        ],
    ))
}

fn pme_criterion(exec: Exec) -> Outcome {
    let p = ModelParams::default();
    let mut checks = Vec::new();
    let e5: Vec<f64> = pseudo_electric_field(&SeparationSchedule::expanding(1.0))?.iter().map(|s| s.e5_w).collect();
    let e5_mean = e5.iter().sum::<f64>() / e5.len() as f64;
    checks.push(Check::abs("E5", e5_mean, SCHEDULE_RATE, 1e-9));
    let c2 = second_chern_reduced_extrapolated(&ModelParams::new(0.0, 0.0, M_REF), Q_CUT, HopfGrid::default(), exec)?
        .extrapolated;
    let mut b = Vec::new();
    for alpha in [1.0, 0.75, 0.5, 0.25] {
        let sweep = monopole_shift_vs_ax(&p, alpha, &default_ax_sweep(), exec)?;
        checks.push(Check::at_least(format!("R2(A_x vs Y, α={alpha})"), sweep.fit.r2, 0.99));
        let seps: Vec<f64> = sweep.points.iter().map(|pt| pt.separation).collect();
        let drift = seps.iter().map(|s| (s - seps[0]).abs()).fold(0.0, f64::max);
        checks.push(Check::at_most(format!("separation_drift(α={alpha})"), drift, 1e-6));
        b.push(sweep.b_z);
    }
    let j: Vec<f64> = b.iter().map(|&bz| topological_current(c2, e5_mean, bz)).collect();
    let fit = linear_fit(&b, &j)?;
    checks.push(Check::at_least("R2(J vs B)", fit.r2, 0.999));
    checks.push(Check::rel("slope", fit.slope, 0.5 * SCHEDULE_RATE / (2.0 * PI * PI), 0.01));
    let notes = vec![format!("B^z = {b:?}, C2 = {c2:.6}")];
    Ok((checks, notes))
}

fn protocol_criterion(level: Level, exec: Exec, oracles: &Oracles) -> Outcome {
    let p = ModelParams::new(0.0, 0.0, M_REF);
    let grid = HopfGrid::default();
    let field = chern_form_field(&p, Valley::Plus, Q_CUT, grid, exec)?;
    let opts = ProtocolOptions::default();
    // 8 × 8 cells spread over the 96 × 64 grid
    let picks: Vec<usize> = (0..8)
        .flat_map(|k| (0..8).map(move |l| (6 + 12 * k) * grid.n_theta + 4 + 8 * l))
        .collect();
    let errs = exec.try_map(picks.len(), |n| {
        let cell = &field.cells[picks[n]];
        let r = nonadiabatic_curvature(&p, cell.q, cell.theta, &opts, None)?;
        Ok::<_, crate::Error>((r.chern_form - cell.chern_form).abs() / cell.chern_form.abs())
    })?;
    let worst = errs.iter().copied().fold(0.0, f64::max);
    let (n_q, n_theta) = match level {
        Level::Quick => (8, 8),
        Level::Full => (16, 12),
    };
    let closed = measured_second_chern(&p, Q_CUT, n_q, n_theta, &opts, None, exec)?;
    let open = measured_second_chern(&p, Q_CUT, n_q, n_theta, &opts, Some(&Decoherence::default()), exec)?;
    let ideal = (oracles.second_chern)(Q_CUT, M_REF);
    Ok((
        vec![
            Check::at_most("max_relative_error(8x8)", worst, 0.05),
            Check::at_most("|C2_open| − |C2_ideal|", open.value.abs() - ideal.abs(), -f64::MIN_POSITIVE),
            Check::report("C2_closed_protocol", closed.value, ideal),
            Check::report("C2_open", open.value, ideal),
        ],
        vec![format!(
            "measured on {n_q}x{n_theta}: closed {:.5}, open {:.5}, ideal {ideal:.5}",
            closed.value, open.value
        )],
    ))
}

fn device_criterion(level: Level, exec: Exec) -> Outcome {
    let cfg = DeviceConfig::default();
    let mut cases: Vec<(String, BlochVector, f64, f64)> = vec![
        ("x+w".into(), BlochVector::new([1.0, 0.0, 0.0, 1.0]), 0.0, 5.0),
        ("x+w".into(), BlochVector::new([1.0, 0.0, 0.0, 1.0]), 0.0, 2.5),
        ("x+w".into(), BlochVector::new([1.0, 0.0, 0.0, 1.0]), 0.5, 5.0),
        ("generic".into(), BlochVector::new([0.3, -1.0, 0.2, 0.7]), 1.0, 5.0),
    ];
    if level == Level::Full {
        cases.push(("generic".into(), BlochVector::new([0.3, -1.0, 0.2, 0.7]), 0.25, 5.0));
        cases.push(("generic".into(), BlochVector::new([0.3, -1.0, 0.2, 0.7]), 0.0, 1.0));
    }
    let results = exec.try_map(cases.len(), |i| {
        let (_, d, a, scale) = &cases[i];
        let quad = bloch_to_couplings(d, *a);
        floquet_effective_hamiltonian(&cfg, &quad.scaled(scale / quad.max_abs()), FloquetOptions::default())
    })?;
    let mut checks: Vec<Check> = cases
        .iter()
        .zip(&results)
        .map(|((name, _, a, s), r)| Check::at_most(format!("spectrum_error({name}, a={a}, {s} MHz)"), r.spectrum_error, 0.05))
        .collect();
    let opts = FloquetOptions { scale: Some(5.0), ..Default::default() };
    let idle = floquet_effective_hamiltonian(&cfg, &CouplingQuad::zero(), opts)?;
    checks.push(Check::at_most("idle_coupling/scale", idle.coupling_error, 0.02));
    for rabi in [1.0, 4.0, 6.92] {
        let d = ats_dressing(&cfg, rabi)?;
        checks.push(Check::rel(format!("ats_splitting({rabi} MHz)"), d.splitting, rabi, 0.01));
    }
    Ok((checks, vec![]))
}
