//! Master-equation dynamics of the single-excitation manifold plus vacuum.
//!
//! Index 0 is the vacuum; index `r ≥ 1` is the state with one excitation on
//! the qubit `sites[r − 1]`.

use serde::{Deserialize, Serialize};

use super::config::Decoherence;
use super::ode::{dopri45, Tolerance};
use crate::error::{invalid, Result};
use crate::linalg::{c, eigvalsh, hermiticity_defect, CMat, C64};

/// Relaxation `√Γ1 |0⟩⟨r|` and dephasing `√(2γ_φ) |r⟩⟨r|` for every site.
pub fn qubit_channels(dec: &Decoherence, sites: &[usize]) -> Result<Vec<CMat>> {
    dec.validate()?;
    let n = sites.len() + 1;
    let rates = dec.rates();
    let mut out = Vec::new();
    for (k, &q) in sites.iter().enumerate() {
        if q >= 4 {
            return Err(invalid("sites", format!("qubit index {q} out of range")));
        }
        let r = k + 1;
        let (g1, gphi) = rates[q];
        if g1 > 0.0 {
            let mut l = CMat::zeros(n, n);
            l[(0, r)] = c(g1.sqrt(), 0.0);
            out.push(l);
        }
        if gphi > 0.0 {
            let mut l = CMat::zeros(n, n);
            l[(r, r)] = c((2.0 * gphi).sqrt(), 0.0);
            out.push(l);
        }
    }
    Ok(out)
}

/// Embed a manifold operator next to the vacuum (block `0 ⊕ h`).
pub fn with_vacuum(h: &CMat) -> CMat {
    let n = h.nrows() + 1;
    let mut out = CMat::zeros(n, n);
    out.view_mut((1, 1), (n - 1, n - 1)).copy_from(h);
    out
}

/// Right-hand side `−2πi[H, ρ] + Σ D[L]ρ`.
pub fn lindblad_rhs(h: &CMat, channels: &[CMat], rho: &CMat) -> CMat {
    let k = C64::new(0.0, -2.0 * std::f64::consts::PI);
    let mut d = (h * rho - rho * h) * k;
    for l in channels {
        let ld = l.adjoint();
        let ldl = &ld * l;
        d += l * rho * &ld - (&ldl * rho + rho * &ldl).scale(0.5);
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CMat>,
    pub max_trace_deviation: f64,
    pub max_hermiticity_defect: f64,
    pub min_eigenvalue: f64,
}

/// Integrate the master equation over `[t0, t1]`, recording the state every
/// `record_dt` (and at both ends).
pub fn lindblad_evolve<F>(
    h_path: F,
    rho0: &CMat,
    channels: &[CMat],
    t0: f64,
    t1: f64,
    record_dt: f64,
    tol: Tolerance,
) -> Result<Trajectory>
where
    F: Fn(f64) -> CMat,
{
    let n = rho0.nrows();
    if rho0.ncols() != n || channels.iter().any(|l| l.nrows() != n || l.ncols() != n) {
        return Err(invalid("rho0", "state and channels must be square of equal size"));
    }
    let tr0 = rho0.trace();
    if (tr0 - C64::from(1.0)).norm() > 1e-10 {
        return Err(invalid("rho0", format!("trace must be 1, got {tr0}")));
    }
    if !(t1 > t0) {
        return Err(invalid("duration", "must be positive"));
    }
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        max_trace_deviation: 0.0,
        max_hermiticity_defect: 0.0,
        min_eigenvalue: f64::INFINITY,
    };
    let mut next_record = t0;
    let y0: Vec<C64> = rho0.iter().copied().collect();
    let f = |t: f64, y: &[C64], dy: &mut [C64]| {
        let rho = CMat::from_column_slice(n, n, y);
        let d = lindblad_rhs(&h_path(t), channels, &rho);
        dy.copy_from_slice(d.as_slice());
    };
    let mut observe = |t: f64, y: &[C64]| {
        let rho = CMat::from_column_slice(n, n, y);
        traj.max_trace_deviation = traj.max_trace_deviation.max((rho.trace() - C64::from(1.0)).norm());
        traj.max_hermiticity_defect = traj.max_hermiticity_defect.max(hermiticity_defect(&rho));
        if t >= next_record || t >= t1 {
            let herm = (&rho + rho.adjoint()).scale(0.5);
            traj.min_eigenvalue = traj.min_eigenvalue.min(eigvalsh(&herm)[0]);
            traj.times.push(t);
            traj.states.push(rho);
            next_record = t + record_dt;
        }
    };
    dopri45(f, &y0, t0, t1, record_dt.max(1e-12), tol, &mut observe)?;
    Ok(traj)
}
