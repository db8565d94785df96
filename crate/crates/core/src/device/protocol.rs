//! Slow-ramp measurement of the non-Abelian Berry curvature.
//!
//! At a point `(q, θ)` of the valley model, the Hamiltonian is ramped along
//! the tangent of one Hopf coordinate and the generalized force conjugate to
//! another is recorded. A Clifford commutant of the ramp family splits the
//! four-level problem into two two-level sectors; each sector is started in
//! its ground state and its first-order force deflection gives one
//! eigenvalue of the curvature matrix. Forward and reverse ramps cancel the
//! adiabatic force, and two rates are combined by Richardson extrapolation.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::config::Decoherence;
use super::lindblad::{lindblad_rhs, qubit_channels, with_vacuum};
use super::ode::{dopri45, Tolerance};
use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::linalg::{eigh, to_dyn4, CMat, CMat4, C64, I};
use crate::model::{ModelParams, Valley, ValleyModel, DIAMOND_BASIS};
use crate::topo::{hopf_embed, hopf_jacobian, HopfAxis, RadialMap};

pub const LEAKAGE_LIMIT: f64 = 0.05;
pub const DECOUPLING_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolOptions {
    /// `v ‖∂_μH‖ / (2π G²)`: ramp speed in units of the gap.
    pub adiabaticity: f64,
    /// Averaging window, in periods of the local gap.
    pub window_periods: f64,
    /// Smooth velocity turn-on, in periods of the local gap.
    pub turn_on_periods: f64,
    /// Combine rates `v` and `v/2`; otherwise report the `v` estimate.
    pub richardson: bool,
    pub tol: Tolerance,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        Self {
            adiabaticity: 0.002,
            window_periods: 5.0,
            turn_on_periods: 10.0,
            richardson: true,
            tol: Tolerance { rtol: 1e-9, atol: 1e-11, max_steps: 2_000_000 },
        }
    }
}

/// Ramp `μ` and force `ν` for the two measured planes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Plane {
    QTheta,
    PhiVarphi,
}

impl Plane {
    /// `(force axis ν, ramp axis μ)`: the response measures `F_{νμ}`.
    pub fn axes(self) -> (HopfAxis, HopfAxis) {
        match self {
            Plane::QTheta => (HopfAxis::Q, HopfAxis::Theta),
            Plane::PhiVarphi => (HopfAxis::Phi, HopfAxis::Varphi),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorResponse {
    /// Commutant eigenvalue labelling the sector.
    pub label: i8,
    /// Extrapolated (or single-rate) curvature eigenvalue.
    pub curvature: f64,
    /// Estimates at rates `v` and `v/2`.
    pub at_rate: [f64; 2],
    /// Largest upper-band population at the end of a ramp.
    pub leakage: f64,
    /// Largest population lost to the vacuum (open system only).
    pub vacuum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneResponse {
    pub plane: Plane,
    pub ramp_rate: f64,
    pub decoupling_residual: f64,
    pub sectors: [SectorResponse; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResult {
    pub q: f64,
    pub theta: f64,
    pub open_system: bool,
    pub planes: [PlaneResponse; 2],
    /// `|⟨c_i|c'_j⟩|²` between the sector ground states of the two planes.
    pub overlaps: [[f64; 2]; 2],
    /// `tr(F_qθ F_φϕ)`.
    pub trace: f64,
    /// `3 tr(F_qθ F_φϕ) / 4π²`.
    pub chern_form: f64,
    pub max_leakage: f64,
}

/// Unit element along `a` orthogonal to `basis` under `⟨A, B⟩ = Re tr(AB)/4`.
fn orthonormalize(a: &CMat4, basis: &[CMat4]) -> Option<CMat4> {
    let dot = |x: &CMat4, y: &CMat4| (x * y).trace().re / 4.0;
    let mut v = *a;
    for b in basis {
        v -= b.scale(dot(&v, b));
    }
    let n = dot(&v, &v);
    (n > 1e-20 * dot(a, a).max(1e-300)).then(|| v.unscale(n.sqrt()))
}

/// Commutant `C = i G1 G2 G3` of a three-element Clifford family.
fn clifford_commutant(ops: [&CMat4; 3]) -> Option<(CMat4, f64)> {
    let mut g: Vec<CMat4> = Vec::new();
    for op in ops {
        let next = orthonormalize(op, &g)?;
        g.push(next);
    }
    let cm = (g[0] * g[1] * g[2]) * I;
    let residual = ops
        .iter()
        .map(|x| (cm * *x - *x * cm).norm() / x.norm().max(1e-300))
        .fold(0.0, f64::max);
    Some((cm, residual))
}

struct Ramp {
    h0: CMat,
    d_mu: CMat,
    force: CMat,
    t_on: f64,
    t_w: f64,
}

impl Ramp {
    fn lambda(&self, v: f64, t: f64) -> f64 {
        let start = -v * (0.5 * self.t_on + 0.5 * self.t_w);
        if t <= self.t_on {
            start + v * (0.5 * t - self.t_on / (2.0 * PI) * (PI * t / self.t_on).sin())
        } else {
            start + v * (0.5 * self.t_on + (t - self.t_on))
        }
    }

    fn h(&self, v: f64, t: f64) -> CMat {
        &self.h0 + self.d_mu.scale(self.lambda(v, t))
    }
}

/// Window-averaged force for one ramp direction; returns
/// `(⟨M⟩, upper-band population, vacuum population)`.
fn run_ramp(
    ramp: &Ramp,
    v: f64,
    psi0: &CMat,
    channels: Option<&[CMat]>,
    tol: Tolerance,
    max_dt: f64,
) -> Result<(f64, f64, f64)> {
    let n = ramp.h0.nrows();
    let t_end = ramp.t_on + ramp.t_w;
    // state: closed → ψ (n), open → ρ (n²), plus one accumulator slot
    let (mut y, width) = match channels {
        None => (psi0.column(0).iter().copied().collect::<Vec<_>>(), n),
        Some(_) => ((psi0 * psi0.adjoint()).iter().copied().collect::<Vec<_>>(), n * n),
    };
    y.push(C64::default());
    let force_of = |y: &[C64]| -> f64 {
        match channels {
            None => {
                let psi = CMat::from_column_slice(n, 1, &y[..n]);
                (psi.adjoint() * &ramp.force * &psi)[(0, 0)].re
            }
            Some(_) => {
                let rho = CMat::from_column_slice(n, n, &y[..n * n]);
                (&ramp.force * rho).trace().re
            }
        }
    };
    let k = C64::new(0.0, -2.0 * PI);
    for (t0, t1, accumulate) in [(0.0, ramp.t_on, false), (ramp.t_on, t_end, true)] {
        let f = |t: f64, y: &[C64], dy: &mut [C64]| {
            let h = ramp.h(v, t);
            match channels {
                None => {
                    let psi = CMat::from_column_slice(n, 1, &y[..n]);
                    let d = (&h * psi) * k;
                    dy[..n].copy_from_slice(d.as_slice());
                }
                Some(ch) => {
                    let rho = CMat::from_column_slice(n, n, &y[..n * n]);
                    let d = lindblad_rhs(&h, ch, &rho);
                    dy[..n * n].copy_from_slice(d.as_slice());
                }
            }
            dy[width] = if accumulate { C64::from(force_of(y)) } else { C64::default() };
        };
        y = dopri45(f, &y, t0, t1, max_dt, tol, |_, _| {})?;
    }
    let mean = y[width].re / ramp.t_w;
    let h_end = ramp.h(v, t_end);
    let (vals, vecs) = eigh(&h_end);
    // upper band: positive-energy eigenstates of the manifold
    let (upper, vacuum) = match channels {
        None => {
            let psi = CMat::from_column_slice(n, 1, &y[..n]);
            let mut p = 0.0;
            for (i, e) in vals.iter().enumerate() {
                if *e > 0.0 {
                    p += (vecs.column(i).adjoint() * &psi)[(0, 0)].norm_sqr();
                }
            }
            (p, 0.0)
        }
        Some(_) => {
            let rho = CMat::from_column_slice(n, n, &y[..n * n]);
            let mut p = 0.0;
            for (i, e) in vals.iter().enumerate() {
                // the vacuum sits at zero energy and is excluded
                if *e > 1e-12 {
                    let col = vecs.column(i);
                    p += (col.adjoint() * &rho * col)[(0, 0)].re;
                }
            }
            (p, rho[(0, 0)].re)
        }
    };
    Ok((mean, upper, vacuum))
}

fn as_column(v: &nalgebra::DVector<C64>) -> CMat {
    CMat::from_column_slice(v.len(), 1, v.as_slice())
}

/// Curvature eigenvalue of one sector from forward and reverse ramps.
#[allow(clippy::too_many_arguments)]
fn sector_curvature(
    h0: &CMat4,
    d_mu: &CMat4,
    d_nu: &CMat4,
    proj: &CMat,
    channels: Option<&[CMat]>,
    v: f64,
    gap: f64,
    opts: &ProtocolOptions,
) -> Result<(f64, f64, f64)> {
    let period = 1.0 / gap;
    let (t_on, t_w) = (opts.turn_on_periods * period, opts.window_periods * period);
    let max_dt = period / 16.0;
    let (h0d, dmd, dnd) = (to_dyn4(h0), to_dyn4(d_mu), to_dyn4(d_nu));
    let sector_ground = |h: &CMat| -> CMat {
        let hs = proj.adjoint() * h * proj;
        let (_, vecs) = eigh(&hs);
        as_column(&(proj * vecs.column(0)))
    };
    let mut means = [0.0; 2];
    let (mut leak, mut vac) = (0.0_f64, 0.0_f64);
    for (k, dir) in [1.0, -1.0].into_iter().enumerate() {
        let vv = dir * v;
        let ramp_full = Ramp { h0: h0d.clone(), d_mu: dmd.clone(), force: -dnd.clone(), t_on, t_w };
        let g0 = sector_ground(&ramp_full.h(vv, 0.0));
        let (mean, up, lost) = match channels {
            None => {
                let ramp = Ramp {
                    h0: proj.adjoint() * &h0d * proj,
                    d_mu: proj.adjoint() * &dmd * proj,
                    force: -(proj.adjoint() * &dnd * proj),
                    t_on,
                    t_w,
                };
                run_ramp(&ramp, vv, &(proj.adjoint() * g0), None, opts.tol, max_dt)?
            }
            Some(ch) => {
                let ramp = Ramp {
                    h0: with_vacuum(&h0d),
                    d_mu: with_vacuum(&dmd),
                    force: with_vacuum(&(-dnd.clone())),
                    t_on,
                    t_w,
                };
                let mut psi = CMat::zeros(5, 1);
                psi.view_mut((1, 0), (4, 1)).copy_from(&g0);
                run_ramp(&ramp, vv, &psi, Some(ch), opts.tol, max_dt)?
            }
        };
        means[k] = mean;
        leak = leak.max(up);
        vac = vac.max(lost);
    }
    // M = M₀ + F v / 2π in cycle units
    Ok((2.0 * PI * (means[0] - means[1]) / (2.0 * v), leak, vac))
}

/// Hamiltonian and tangent derivatives of the + valley at `(q, θ, 0, 0)`.
fn tangent_family(model: &ValleyModel, q: f64, theta: f64) -> (CMat4, [CMat4; 4]) {
    let x = [q, theta, 0.0, 0.0];
    let h0 = model.hamiltonian(hopf_embed(x));
    let jac = hopf_jacobian(x);
    let dq: [CMat4; 4] = std::array::from_fn(|a| model.derivative(a));
    let d = std::array::from_fn(|mu| {
        let mut m = CMat4::zeros();
        for (a, da) in dq.iter().enumerate() {
            m += da.scale(jac[a][mu]);
        }
        m
    });
    (h0, d)
}

/// Measure `F_qθ`, `F_φϕ` and `tr(F_qθ F_φϕ)` at `(q, θ)` (with `φ = ϕ = 0`)
/// for the + valley. `decoherence` switches on the open-system evolution.
pub fn nonadiabatic_curvature(
    p: &ModelParams,
    q: f64,
    theta: f64,
    opts: &ProtocolOptions,
    decoherence: Option<&Decoherence>,
) -> Result<ProtocolResult> {
    if p.m == 0.0 {
        return Err(invalid("m", "the protocol needs a gapped family (m ≠ 0)"));
    }
    if !(q > 0.0 && q.is_finite()) || !(0.0..=PI / 2.0).contains(&theta) {
        return Err(invalid("point", format!("need q > 0 and θ in [0, π/2], got ({q}, {theta})")));
    }
    if !(opts.adiabaticity > 0.0 && opts.window_periods > 0.0 && opts.turn_on_periods > 0.0) {
        return Err(invalid("protocol", "adiabaticity and durations must be positive"));
    }
    let model = ValleyModel::new(*p, Valley::Plus)?;
    let (h0, d) = tangent_family(&model, q, theta);
    let channels = match decoherence {
        Some(dec) => Some(qubit_channels(dec, &DIAMOND_BASIS)?),
        None => None,
    };
    let (vals, _) = eigh(&to_dyn4(&h0));
    let gap = vals[2] - vals[1];
    let mut planes = Vec::with_capacity(2);
    let mut ground_states: Vec<[CMat; 2]> = Vec::with_capacity(2);
    for plane in [Plane::QTheta, Plane::PhiVarphi] {
        let (nu, mu) = plane.axes();
        let (d_nu, d_mu) = (d[nu.index()], d[mu.index()]);
        let scale = h0.norm();
        let degenerate = d_mu.norm() < 1e-12 * scale || d_nu.norm() < 1e-12 * scale;
        let (cm, residual) = if degenerate {
            (CMat4::identity(), 0.0)
        } else {
            clifford_commutant([&h0, &d_mu, &d_nu]).ok_or(Error::Decoupling { residual: 1.0, limit: DECOUPLING_LIMIT })?
        };
        if residual > DECOUPLING_LIMIT {
            return Err(Error::Decoupling { residual, limit: DECOUPLING_LIMIT });
        }
        let (cvals, cvecs) = eigh(&to_dyn4(&cm));
        let projs: [CMat; 2] = if degenerate {
            let (_, hv) = eigh(&to_dyn4(&h0));
            [0, 1].map(|k| CMat::from_fn(4, 2, |r, j| hv[(r, [k, k + 2][j])]))
        } else {
            [0, 2].map(|k| cvecs.columns(k, 2).into_owned())
        };
        let grounds = projs.clone().map(|pr| {
            let hs = pr.adjoint() * to_dyn4(&h0) * &pr;
            let (_, vecs) = eigh(&hs);
            as_column(&(&pr * vecs.column(0)))
        });
        let norm_mu = (d_mu * d_mu).trace().re.max(0.0).sqrt() / 2.0;
        let v = if degenerate { 0.0 } else { opts.adiabaticity * 2.0 * PI * gap * gap / norm_mu };
        let mut sectors = Vec::with_capacity(2);
        for (k, pr) in projs.iter().enumerate() {
            let label = if degenerate { 0 } else if cvals[2 * k] < 0.0 { -1 } else { 1 };
            if degenerate {
                sectors.push(SectorResponse { label, curvature: 0.0, at_rate: [0.0; 2], leakage: 0.0, vacuum: 0.0 });
                continue;
            }
            let run = |rate: f64| sector_curvature(&h0, &d_mu, &d_nu, pr, channels.as_deref(), rate, gap, opts);
            let (f1, l1, v1) = run(v)?;
            let (f2, l2, v2) = if opts.richardson { run(0.5 * v)? } else { (f1, l1, v1) };
            let leakage = l1.max(l2);
            if decoherence.is_none() && leakage > LEAKAGE_LIMIT {
                return Err(Error::RampTooFast { leakage, limit: LEAKAGE_LIMIT });
            }
            let curvature = if opts.richardson { (4.0 * f2 - f1) / 3.0 } else { f1 };
            sectors.push(SectorResponse { label, curvature, at_rate: [f1, f2], leakage, vacuum: v1.max(v2) });
        }
        planes.push(PlaneResponse {
            plane,
            ramp_rate: v,
            decoupling_residual: residual,
            sectors: [sectors[0], sectors[1]],
        });
        ground_states.push(grounds);
    }
    let mut overlaps = [[0.0; 2]; 2];
    let mut trace = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let o = (ground_states[0][i].adjoint() * &ground_states[1][j])[(0, 0)].norm_sqr();
            overlaps[i][j] = o;
            trace += planes[0].sectors[i].curvature * planes[1].sectors[j].curvature * o;
        }
    }
    let max_leakage = planes.iter().flat_map(|p| p.sectors.iter().map(|s| s.leakage)).fold(0.0, f64::max);
    Ok(ProtocolResult {
        q,
        theta,
        open_system: decoherence.is_some(),
        planes: [planes[0].clone(), planes[1].clone()],
        overlaps,
        trace,
        chern_form: 3.0 * trace / (4.0 * PI * PI),
        max_leakage,
    })
}

/// Second Chern number assembled from protocol measurements on a midpoint
/// grid `q = |m| sinh(s)`, `θ` in `(0, π/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredChern {
    pub value: f64,
    pub q_cut: f64,
    pub n_q: usize,
    pub n_theta: usize,
    pub open_system: bool,
    pub points: Vec<ProtocolResult>,
}

pub fn measured_second_chern(
    p: &ModelParams,
    q_cut: f64,
    n_q: usize,
    n_theta: usize,
    opts: &ProtocolOptions,
    decoherence: Option<&Decoherence>,
    exec: Exec,
) -> Result<MeasuredChern> {
    if n_q == 0 || n_theta == 0 || !(q_cut > 0.0) {
        return Err(invalid("grid", "need n_q, n_theta ≥ 1 and q_cut > 0"));
    }
    let radial = RadialMap { scale: p.m.abs() };
    let hs = radial.s(q_cut) / n_q as f64;
    let ht = 0.5 * PI / n_theta as f64;
    let points = exec.try_map(n_q * n_theta, |n| {
        let (i, j) = (n / n_theta, n % n_theta);
        let s = (i as f64 + 0.5) * hs;
        let th = (j as f64 + 0.5) * ht;
        nonadiabatic_curvature(p, radial.q(s), th, opts, decoherence)
    })?;
    let terms: Vec<f64> = points
        .iter()
        .enumerate()
        .map(|(n, r)| {
            let s = ((n / n_theta) as f64 + 0.5) * hs;
            // φ and ϕ each span 2π
            4.0 * PI * PI * r.chern_form * radial.dq_ds(s) * hs * ht
        })
        .collect();
    Ok(MeasuredChern {
        value: crate::linalg::pairwise_sum(&terms),
        q_cut,
        n_q,
        n_theta,
        open_system: decoherence.is_some(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo::chern_form_closed;
    use std::f64::consts::FRAC_PI_4;

    fn params() -> ModelParams {
        ModelParams { m: 8.0, ..ModelParams::default() }
    }

    #[test]
    fn closed_system_matches_curvature_at_reference_point() {
        let r = nonadiabatic_curvature(&params(), 8.0, FRAC_PI_4, &ProtocolOptions::default(), None).unwrap();
        let exact = chern_form_closed(8.0, FRAC_PI_4, 8.0);
        assert!((r.chern_form / exact - 1.0).abs() < 0.05, "{} vs {exact}", r.chern_form);
        assert!(r.max_leakage < LEAKAGE_LIMIT);
        assert!(r.planes.iter().all(|p| p.decoupling_residual < DECOUPLING_LIMIT));
    }

    #[test]
    fn richardson_improves_on_single_rates() {
        let opts = ProtocolOptions { adiabaticity: 0.01, ..Default::default() };
        let r = nonadiabatic_curvature(&params(), 5.0, 0.6, &opts, None).unwrap();
        let reference = nonadiabatic_curvature(&params(), 5.0, 0.6, &ProtocolOptions::default(), None).unwrap();
        for (pl, rp) in r.planes.iter().zip(&reference.planes) {
            for (s, rs) in pl.sectors.iter().zip(&rp.sectors) {
                let err = |x: f64| (x - rs.curvature).abs();
                assert!(err(s.curvature) < err(s.at_rate[1]));
                assert!(err(s.at_rate[1]) < err(s.at_rate[0]));
            }
        }
    }

    #[test]
    fn pole_gives_zero() {
        let r = nonadiabatic_curvature(&params(), 4.0, 0.0, &ProtocolOptions::default(), None).unwrap();
        assert_eq!(r.chern_form, 0.0);
    }

    #[test]
    fn deformed_gammas_fail_to_decouple() {
        let p = ModelParams { a: 0.5, ..params() };
        let err = nonadiabatic_curvature(&p, 8.0, FRAC_PI_4, &ProtocolOptions::default(), None).unwrap_err();
        assert!(matches!(err, Error::Decoupling { .. }), "{err:?}");
    }

    #[test]
    fn fast_ramp_is_rejected() {
        let opts = ProtocolOptions { adiabaticity: 0.5, turn_on_periods: 0.5, ..Default::default() };
        let err = nonadiabatic_curvature(&params(), 8.0, FRAC_PI_4, &opts, None).unwrap_err();
        assert!(matches!(err, Error::RampTooFast { .. }), "{err:?}");
    }

    #[test]
    fn decoherence_shrinks_the_response() {
        let opts = ProtocolOptions::default();
        let closed = nonadiabatic_curvature(&params(), 8.0, FRAC_PI_4, &opts, None).unwrap();
        let open = nonadiabatic_curvature(&params(), 8.0, FRAC_PI_4, &opts, Some(&Decoherence::default())).unwrap();
        assert!(open.open_system);
        assert!(open.chern_form.abs() < closed.chern_form.abs());
        assert!(open.chern_form > 0.0);
        let ideal = nonadiabatic_curvature(&params(), 8.0, FRAC_PI_4, &opts, Some(&Decoherence::ideal())).unwrap();
        assert!((ideal.chern_form / closed.chern_form - 1.0).abs() < 1e-4);
    }
}
