use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::config::{edge_qubits, DeviceConfig};
use crate::error::{invalid, Result};
use crate::linalg::{c, CMat, C64};

/// Sites 0..4 are Q1..Q4, sites 4..8 are C1..C4.
pub const N_SITES: usize = 8;

pub fn coupler_site(j: usize) -> usize {
    4 + j
}

/// Instantaneous parameters of the circuit at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitSnapshot {
    /// Bare qubit frequencies, MHz.
    pub qubit: [f64; 4],
    pub coupler: [f64; 4],
    /// Pump term `Ω_d cos(ω_d t + φ_d)`, MHz.
    pub pump: f64,
}

impl CircuitSnapshot {
    /// Evaluate the flux-modulated coupler frequencies and the pump at `t` (µs).
    pub fn at(cfg: &DeviceConfig, bare: &[f64; 4], t: f64) -> Self {
        let coupler = std::array::from_fn(|j| {
            let m = &cfg.modulation[j];
            let flux = cfg.couplers[j].flux_bias + m.amplitude * (2.0 * PI * m.freq * t + m.phase).cos();
            cfg.couplers[j].frequency(flux)
        });
        let wd = cfg.pump.freq.unwrap_or(bare[0] + cfg.anharmonicity);
        let pump = cfg.pump.rabi * (2.0 * PI * wd * t + cfg.pump.phase).cos();
        Self { qubit: *bare, coupler, pump }
    }
}

/// Exchange terms `(site_a, site_b, g)`.
pub fn exchange_terms(cfg: &DeviceConfig) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::with_capacity(12);
    for j in 0..4 {
        let (a, b) = edge_qubits(j);
        let cp = &cfg.couplers[j];
        out.push((a, coupler_site(j), cp.g_qc));
        out.push((b, coupler_site(j), cp.g_qc));
        out.push((a, b, cp.g_direct));
    }
    out
}

/// Single-excitation block (8×8), energies measured from the ground state.
pub fn single_excitation_hamiltonian(cfg: &DeviceConfig, snap: &CircuitSnapshot) -> CMat {
    let mut h = CMat::zeros(N_SITES, N_SITES);
    for i in 0..4 {
        h[(i, i)] = c(snap.qubit[i], 0.0);
        h[(coupler_site(i), coupler_site(i))] = c(snap.coupler[i], 0.0);
    }
    for (a, b, g) in exchange_terms(cfg) {
        h[(a, b)] += c(g, 0.0);
        h[(b, a)] += c(g, 0.0);
    }
    h
}

/// Hilbert-space layout of the full circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpace {
    /// Local dimension of each site (Q1 has 3 levels in ATS mode).
    pub dims: [usize; N_SITES],
}

impl CircuitSpace {
    pub fn new(ats: bool) -> Self {
        let mut dims = [2; N_SITES];
        if ats {
            dims[0] = 3;
        }
        Self { dims }
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Mixed-radix index; site 0 is the fastest digit.
    pub fn index(&self, occ: &[usize; N_SITES]) -> usize {
        let mut idx = 0;
        for s in (0..N_SITES).rev() {
            idx = idx * self.dims[s] + occ[s];
        }
        idx
    }

    pub fn occupation(&self, mut idx: usize) -> [usize; N_SITES] {
        let mut occ = [0; N_SITES];
        for s in 0..N_SITES {
            occ[s] = idx % self.dims[s];
            idx /= self.dims[s];
        }
        occ
    }

    /// Index of the state with one excitation on `site`.
    pub fn single(&self, site: usize) -> usize {
        let mut occ = [0; N_SITES];
        occ[site] = 1;
        self.index(&occ)
    }
}

/// Full circuit Hamiltonian: spins `−½ω σ^z` (Q1 a three-level transmon in
/// ATS mode), exchange couplings, and the Q1 pump in ATS mode.
///
/// The pump operator is `(b + b†)/√2` for the three-level Q1, so its
/// `1↔2` element is one.
pub fn build_circuit_hamiltonian(
    cfg: &DeviceConfig,
    bare: &[f64; 4],
    t: f64,
    ats: bool,
) -> Result<CMat> {
    if !t.is_finite() {
        return Err(invalid("t", "time must be finite"));
    }
    let space = CircuitSpace::new(ats);
    let snap = CircuitSnapshot::at(cfg, bare, t);
    let n = space.dim();
    let mut h = CMat::zeros(n, n);
    let freqs: [f64; N_SITES] =
        std::array::from_fn(|s| if s < 4 { snap.qubit[s] } else { snap.coupler[s - 4] });
    let level = |site: usize, n: usize| -> f64 {
        let w = freqs[site];
        match n {
            0 => -0.5 * w,
            1 => 0.5 * w,
            _ => 1.5 * w + cfg.anharmonicity,
        }
    };
    // ladder matrix element ⟨n+1|b†|n⟩
    let raise = |site: usize, n: usize| -> f64 {
        if site == 0 && space.dims[0] == 3 {
            ((n + 1) as f64).sqrt()
        } else {
            1.0
        }
    };
    let terms = exchange_terms(cfg);
    for idx in 0..n {
        let occ = space.occupation(idx);
        h[(idx, idx)] = c((0..N_SITES).map(|s| level(s, occ[s])).sum(), 0.0);
        for &(a, b, g) in &terms {
            // b† on `a`, b on `b`, and the conjugate
            for (src, dst) in [(a, b), (b, a)] {
                if occ[dst] == 0 || occ[src] + 1 >= space.dims[src] {
                    continue;
                }
                let mut o2 = occ;
                o2[dst] -= 1;
                o2[src] += 1;
                let amp = g * raise(src, occ[src]) * raise(dst, occ[dst] - 1);
                let j = space.index(&o2);
                h[(j, idx)] += c(amp, 0.0);
            }
        }
        if ats && snap.pump != 0.0 && occ[0] + 1 < 3 {
            let mut o2 = occ;
            o2[0] += 1;
            let amp = snap.pump * raise(0, occ[0]) / 2f64.sqrt();
            let j = space.index(&o2);
            h[(j, idx)] += c(amp, 0.0);
            h[(idx, j)] += c(amp, 0.0);
        }
    }
    Ok(h)
}

/// Dispersive coupling of one edge and its parametric modulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCoupling {
    pub edge: usize,
    /// Static `J` at the flux bias, MHz.
    pub j_static: f64,
    /// `∂J/∂φ` at the flux bias, MHz per flux quantum.
    pub dj_dphi: f64,
    /// `Ω = (δ/2) ∂J/∂φ e^{−iφ}`, MHz.
    pub omega: C64,
    /// Largest `|g/Δ|` over the flux excursion.
    pub dispersive_ratio: f64,
}

/// `J(φ) = g_d + g²(1/Δ_a + 1/Δ_b)/2` with `Δ = ω_Q − ω_C(φ)`.
pub fn dispersive_j(cfg: &DeviceConfig, bare: &[f64; 4], edge: usize, flux: f64) -> f64 {
    let (a, b) = edge_qubits(edge);
    let cp = &cfg.couplers[edge];
    let wc = cp.frequency(flux);
    cp.g_direct + cp.g_qc * cp.g_qc * (1.0 / (bare[a] - wc) + 1.0 / (bare[b] - wc)) / 2.0
}

pub fn effective_coupling(cfg: &DeviceConfig, edge: usize) -> Result<EffectiveCoupling> {
    if edge >= 4 {
        return Err(invalid("edge", format!("edges are 0..4, got {edge}")));
    }
    let bare = cfg.qubit_freqs;
    let cp = &cfg.couplers[edge];
    let m = &cfg.modulation[edge];
    let phi0 = cp.flux_bias;
    let h = 1e-5;
    let j_static = dispersive_j(cfg, &bare, edge, phi0);
    let dj_dphi = (dispersive_j(cfg, &bare, edge, phi0 + h) - dispersive_j(cfg, &bare, edge, phi0 - h)) / (2.0 * h);
    let omega = C64::from_polar(0.5 * m.amplitude * dj_dphi, -m.phase);
    let (a, b) = edge_qubits(edge);
    let mut ratio: f64 = 0.0;
    for k in 0..=32 {
        let flux = phi0 + m.amplitude * (PI * k as f64 / 32.0).cos();
        let wc = cp.frequency(flux);
        for q in [a, b] {
            ratio = ratio.max((cp.g_qc / (bare[q] - wc)).abs());
        }
    }
    Ok(EffectiveCoupling { edge, j_static, dj_dphi, omega, dispersive_ratio: ratio })
}

/// Project the full Hamiltonian onto the single-excitation sector.
pub fn single_excitation_block(space: &CircuitSpace, h: &CMat) -> CMat {
    let idx: Vec<usize> = (0..N_SITES).map(|s| space.single(s)).collect();
    let ground = space.index(&[0; N_SITES]);
    let e0 = h[(ground, ground)];
    CMat::from_fn(N_SITES, N_SITES, |i, j| {
        let v = h[(idx[i], idx[j])];
        if i == j {
            v - e0
        } else {
            v
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::config::Modulation;
    use crate::linalg::eigvalsh;

    #[test]
    fn full_space_reduces_to_single_excitation_block() {
        let mut cfg = DeviceConfig::default();
        cfg.modulation[1] = Modulation { amplitude: 0.05, freq: 400.0, phase: 0.3 };
        let t = 0.00123;
        let bare = cfg.qubit_freqs;
        let space = CircuitSpace::new(false);
        let h = build_circuit_hamiltonian(&cfg, &bare, t, false).unwrap();
        assert_eq!(h.nrows(), 256);
        let blk = single_excitation_block(&space, &h);
        let direct = single_excitation_hamiltonian(&cfg, &CircuitSnapshot::at(&cfg, &bare, t));
        assert!((blk - direct).norm() < 1e-9);
    }

    #[test]
    fn excitation_number_is_conserved_without_pump() {
        let cfg = DeviceConfig::default();
        let space = CircuitSpace::new(false);
        let h = build_circuit_hamiltonian(&cfg, &cfg.qubit_freqs, 0.0, false).unwrap();
        for i in 0..space.dim() {
            for j in 0..space.dim() {
                if h[(i, j)].norm() > 0.0 {
                    let ni: usize = space.occupation(i).iter().sum();
                    let nj: usize = space.occupation(j).iter().sum();
                    assert_eq!(ni, nj);
                }
            }
        }
    }

    #[test]
    fn ats_mode_dimension_and_hermiticity() {
        let mut cfg = DeviceConfig::default();
        cfg.pump.rabi = 5.0;
        let h = build_circuit_hamiltonian(&cfg, &cfg.qubit_freqs, 0.01, true).unwrap();
        assert_eq!(h.nrows(), 384);
        assert!(crate::linalg::hermiticity_defect(&h) < 1e-12);
    }

    #[test]
    fn two_site_exchange_splitting() {
        // qubit and coupler only: splitting √(Δ² + 4g²)
        let cfg = DeviceConfig::default();
        let snap = CircuitSnapshot::at(&cfg, &cfg.qubit_freqs, 0.0);
        let h = single_excitation_hamiltonian(&cfg, &snap);
        let sub = CMat::from_fn(2, 2, |i, j| h[([0, 4][i], [0, 4][j])]);
        let e = eigvalsh(&sub);
        let d = snap.qubit[0] - snap.coupler[0];
        let g = cfg.couplers[0].g_qc;
        assert!(((e[1] - e[0]) - (d * d + 4.0 * g * g).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn idle_coupler_cancels_static_exchange() {
        let cfg = DeviceConfig::default();
        for j in 0..4 {
            assert!(effective_coupling(&cfg, j).unwrap().j_static.abs() < 1e-9);
        }
    }

    #[test]
    fn detuned_pair_off_point() {
        // g = 40, g_d = 2, Δ = −800 on both qubits: J = 0
        let mut cfg = DeviceConfig::default();
        let wq = 5000.0;
        cfg.qubit_freqs[0] = wq;
        cfg.qubit_freqs[1] = wq;
        let cp = &mut cfg.couplers[0];
        cp.g_qc = 40.0;
        cp.g_direct = 2.0;
        cp.omega_max = (wq + 800.0) / (PI * cp.flux_bias).cos().sqrt();
        let e = effective_coupling(&cfg, 0).unwrap();
        assert!(e.j_static.abs() < 1e-9, "{}", e.j_static);
    }

    #[test]
    fn modulated_coupling_phase_and_bound() {
        let mut cfg = DeviceConfig::default();
        cfg.modulation[2] = Modulation { amplitude: 0.04, freq: 600.0, phase: 0.7 };
        let e = effective_coupling(&cfg, 2).unwrap();
        assert!((e.omega.norm() - 0.02 * e.dj_dphi.abs()).abs() < 1e-12);
        let arg = if e.dj_dphi > 0.0 { -0.7 } else { PI - 0.7 };
        assert!((crate::model::wrap_angle(e.omega.arg() - arg)).abs() < 1e-12);
    }
}
