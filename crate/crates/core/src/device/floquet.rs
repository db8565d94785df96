use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::circuit::{dispersive_j, single_excitation_hamiltonian, CircuitSnapshot};
use super::config::{edge_qubits, DeviceConfig, Modulation};
use super::ode::propagate_rk4;
use crate::error::{invalid, Error, Result};
use crate::linalg::{c, eigh, eigvalsh4, log_unitary, polar, CMat, CMat4, C64, I};
use crate::model::{diamond_matrix, CouplingQuad, Momentum, DIAMOND_BASIS};
use crate::pme::{gauge_shift, GaugeProfile};

/// Minimum separation between modulation tones, MHz.
pub const TONE_BANDWIDTH: f64 = 50.0;
/// Largest `|g/Δ|` the flux excursion may reach.
pub const MAX_EXCURSION_RATIO: f64 = 0.5;
/// Phase advance per RK4 step at the largest frequency in the frame.
const PHASE_PER_STEP: f64 = 0.04;
/// Quadrature points for first-harmonic integrals.
const HARMONIC_NODES: usize = 256;
/// Relative tolerance of the per-edge coupling calibration.
const EDGE_TOL: f64 = 1e-4;

/// Common period of commensurate tones (MHz → µs), checking for collisions.
pub fn common_period(tones: &[f64]) -> Result<f64> {
    for (i, &a) in tones.iter().enumerate() {
        if !(a > 0.0) {
            return Err(invalid("tones", format!("tone {a} MHz must be positive")));
        }
        for &b in &tones[i + 1..] {
            if (a - b).abs() < TONE_BANDWIDTH {
                return Err(Error::ToneAliasing { f1: a, f2: b, bandwidth: TONE_BANDWIDTH });
            }
        }
    }
    // gcd on a 1 kHz lattice
    let ints: Vec<u64> = tones.iter().map(|t| (t * 1e3).round() as u64).collect();
    for (t, n) in tones.iter().zip(&ints) {
        if (t * 1e3 - *n as f64).abs() > 1e-6 {
            return Err(invalid("tones", format!("{t} MHz is not on the 1 kHz lattice")));
        }
    }
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    let g = ints.iter().fold(0, |acc, &n| gcd(acc, n));
    Ok(1e3 / g as f64)
}

/// Flux waveform of edge `j` at drive phase `θ`.
fn flux_at(cfg: &DeviceConfig, j: usize, amplitude: f64, theta: f64) -> f64 {
    cfg.couplers[j].flux_bias + amplitude * theta.cos()
}

/// First cosine harmonic of `J(Φ + δ cos θ)`.
pub fn coupling_harmonic(cfg: &DeviceConfig, bare: &[f64; 4], edge: usize, amplitude: f64) -> f64 {
    let n = HARMONIC_NODES;
    let mut acc = 0.0;
    for k in 0..n {
        let th = 2.0 * PI * (k as f64 + 0.5) / n as f64;
        acc += dispersive_j(cfg, bare, edge, flux_at(cfg, edge, amplitude, th)) * th.cos();
    }
    2.0 * acc / n as f64
}

/// Time-averaged dispersive shift of each qubit from its couplers.
pub fn mean_dispersive_shift(cfg: &DeviceConfig, bare: &[f64; 4]) -> [f64; 4] {
    let mut shift = [0.0; 4];
    let n = HARMONIC_NODES;
    for j in 0..4 {
        let (a, b) = edge_qubits(j);
        let cp = &cfg.couplers[j];
        let amp = cfg.modulation[j].amplitude;
        for k in 0..n {
            let th = 2.0 * PI * (k as f64 + 0.5) / n as f64;
            let wc = cp.frequency(flux_at(cfg, j, amp, th));
            for q in [a, b] {
                shift[q] += cp.g_qc * cp.g_qc / (bare[q] - wc) / n as f64;
            }
        }
    }
    shift
}

/// Largest usable flux amplitude on edge `j`.
fn max_amplitude(cfg: &DeviceConfig, bare: &[f64; 4], j: usize) -> f64 {
    let cp = &cfg.couplers[j];
    let (a, b) = edge_qubits(j);
    let ok = |amp: f64| {
        if cp.flux_bias.abs() + amp > 0.45 {
            return false;
        }
        (0..=64).all(|k| {
            let wc = cp.frequency(flux_at(cfg, j, amp, PI * k as f64 / 64.0));
            [a, b].iter().all(|&q| bare[q] < wc && (cp.g_qc / (bare[q] - wc)).abs() <= MAX_EXCURSION_RATIO)
        })
    };
    let (mut lo, mut hi) = (0.0, 0.45);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Flux amplitude and phase realizing `omega` (MHz) on edge `j`.
///
/// The amplitude inverts the exact first harmonic of the dispersive `J`.
/// The phase follows the sign of the edge detuning and of the harmonic.
pub fn modulation_for(cfg: &DeviceConfig, bare: &[f64; 4], j: usize, omega: C64) -> Result<Modulation> {
    let freq = cfg.edge_tone(j);
    let need = 2.0 * omega.norm();
    if need == 0.0 {
        return Ok(Modulation { amplitude: 0.0, freq, phase: 0.0 });
    }
    let amax = max_amplitude(cfg, bare, j);
    let reach = coupling_harmonic(cfg, bare, j, amax).abs();
    if reach < need {
        return Err(invalid(
            "coupling",
            format!("|Ω| = {:.3} MHz on edge {} exceeds the modulation reach {:.3} MHz", omega.norm(), j + 1, reach / 2.0),
        ));
    }
    let (mut lo, mut hi) = (0.0, amax);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if coupling_harmonic(cfg, bare, j, mid).abs() < need {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let amplitude = 0.5 * (lo + hi);
    let j1 = coupling_harmonic(cfg, bare, j, amplitude);
    let (a, b) = edge_qubits(j);
    let mut phase = if cfg.qubit_freqs[a] > cfg.qubit_freqs[b] { -omega.arg() } else { omega.arg() };
    if j1 < 0.0 {
        phase += PI;
    }
    Ok(Modulation { amplitude, freq, phase: phase.rem_euclid(2.0 * PI) })
}

/// Stroboscopic effective Hamiltonian of the qubit manifold (qubit order,
/// rotating frame at the planned frequencies).
///
/// Propagates the single-excitation block over one period `T`, projects on
/// the dressed qubit states at `t = 0` and takes `i log(polar(P†UP))/(2πT)`.
pub fn stroboscopic_hamiltonian(cfg: &DeviceConfig, bare: &[f64; 4], period: f64) -> CMat4 {
    let w_ref = cfg.qubit_freqs[0];
    let shifted = |t: f64| {
        let mut h = single_excitation_hamiltonian(cfg, &CircuitSnapshot::at(cfg, bare, t));
        for i in 0..h.nrows() {
            h[(i, i)] -= c(w_ref, 0.0);
        }
        h
    };
    let h0 = shifted(0.0);
    let mut bound: f64 = 0.0;
    for i in 0..h0.nrows() {
        bound = bound.max((0..h0.ncols()).map(|j| h0[(i, j)].norm()).sum::<f64>());
    }
    let amp_max = cfg.modulation.iter().map(|m| m.amplitude).fold(0.0, f64::max);
    let bound = bound * (1.0 + amp_max) + 200.0;
    let steps = ((2.0 * PI * bound * period) / PHASE_PER_STEP).ceil() as usize;
    let u = propagate_rk4(shifted, h0.nrows(), 0.0, period, steps.max(64));
    let p = dressed_qubit_states(&h0);
    let m = p.adjoint() * u * &p;
    let w = polar(&m);
    let h = (log_unitary(&w) * I).unscale(2.0 * PI * period);
    let h = (&h + h.adjoint()).unscale(2.0);
    CMat4::from_fn(|i, j| h[(i, j)])
}

/// Eigenvectors of `h` with the largest weight on each bare qubit, phased so
/// that the bare component is real and positive.
fn dressed_qubit_states(h: &CMat) -> CMat {
    let (_, vecs) = eigh(h);
    let n = h.nrows();
    let mut p = CMat::zeros(n, 4);
    for q in 0..4 {
        let best = (0..n)
            .max_by(|&a, &b| vecs[(q, a)].norm().total_cmp(&vecs[(q, b)].norm()))
            .expect("non-empty");
        let ph = vecs[(q, best)].conj() / vecs[(q, best)].norm();
        for r in 0..n {
            p[(r, q)] = vecs[(r, best)] * ph;
        }
    }
    p
}

fn to_diamond(h: &CMat4) -> CMat4 {
    CMat4::from_fn(|i, j| h[(DIAMOND_BASIS[i], DIAMOND_BASIS[j])])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetResult {
    /// Extracted effective Hamiltonian, diamond ordering, MHz.
    pub h_eff: CMat4,
    /// Target `diamond_matrix(couplings)`, MHz.
    pub target: CMat4,
    pub spectrum: [f64; 4],
    pub target_spectrum: [f64; 4],
    /// Largest eigenvalue deviation over the coupling scale.
    pub spectrum_error: f64,
    /// Largest off-diagonal deviation over the coupling scale.
    pub coupling_error: f64,
    /// Largest residual diagonal entry, MHz.
    pub diagonal_residual: f64,
    pub period: f64,
    pub bare_freqs: [f64; 4],
    pub modulation: [Modulation; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloquetOptions {
    /// Frequency-calibration rounds against the extracted diagonal.
    pub rounds: usize,
    /// Per-edge coupling calibration rounds (single tone, swap-rate style).
    /// Zero keeps the dispersive first-harmonic amplitudes.
    pub edge_rounds: usize,
    /// Coupling scale used to normalize errors, MHz; `None` uses `max |Ω|`.
    pub scale: Option<f64>,
}

impl Default for FloquetOptions {
    fn default() -> Self {
        Self { rounds: 4, edge_rounds: 8, scale: None }
    }
}

/// Measured coupling `⟨Q_a|H|Q_b⟩` of edge `j` with only its own tone on.
fn single_edge_coupling(cfg: &DeviceConfig, j: usize, period: f64) -> C64 {
    let mut one = cfg.clone();
    for k in 0..4 {
        if k != j {
            one.modulation[k].amplitude = 0.0;
        }
    }
    let shift = mean_dispersive_shift(&one, &one.qubit_freqs);
    let bare: [f64; 4] = std::array::from_fn(|i| one.qubit_freqs[i] - shift[i]);
    let h = stroboscopic_hamiltonian(&one, &bare, period);
    let (a, b) = edge_qubits(j);
    h[(a, b)]
}

/// Calibrate modulation for `target` (MHz) and extract the Floquet effective
/// Hamiltonian of the full four-tone drive.
///
/// Amplitudes and phases start from the dispersive first harmonic and are
/// then corrected edge by edge with only that edge's tone applied. Bare qubit
/// frequencies start from the mean dispersive shift and are corrected against
/// the extracted diagonal of the joint drive.
pub fn floquet_effective_hamiltonian(
    cfg: &DeviceConfig,
    target: &CouplingQuad,
    opts: FloquetOptions,
) -> Result<FloquetResult> {
    cfg.validate()?;
    let tones: Vec<f64> = (0..4).map(|j| cfg.edge_tone(j)).collect();
    let period = common_period(&tones)?;
    let w_ref = cfg.qubit_freqs[0];
    for (i, w) in cfg.qubit_freqs.iter().enumerate() {
        let cycles = (w - w_ref) * period;
        if (cycles - cycles.round()).abs() > 1e-9 {
            return Err(invalid("qubit_freqs", format!("Q{} is not commensurate with the tone period", i + 1)));
        }
    }
    let mut cfg = cfg.clone();
    let omegas = target.as_array();
    let shift0 = mean_dispersive_shift(&cfg, &cfg.qubit_freqs);
    let bare0: [f64; 4] = std::array::from_fn(|i| cfg.qubit_freqs[i] - shift0[i]);
    for j in 0..4 {
        cfg.modulation[j] = modulation_for(&cfg, &bare0, j, omegas[j])?;
    }
    for j in 0..4 {
        if omegas[j].norm() == 0.0 {
            continue;
        }
        let (a, b) = edge_qubits(j);
        let lower_first = cfg.qubit_freqs[a] > cfg.qubit_freqs[b];
        let want = omegas[j].norm();
        let mut prev: Option<(f64, f64)> = None;
        for _ in 0..opts.edge_rounds {
            let got = single_edge_coupling(&cfg, j, period);
            let m = &mut cfg.modulation[j];
            let dphase = omegas[j].arg() - got.arg();
            m.phase = if lower_first { m.phase - dphase } else { m.phase + dphase }.rem_euclid(2.0 * PI);
            let mag = got.norm();
            if mag == 0.0 || ((mag - want) / want).abs() < EDGE_TOL {
                break;
            }
            let next = match prev {
                // secant on |Ω|(δ); the response is convex in δ
                Some((a0, m0)) if (mag - m0).abs() > 1e-12 => {
                    m.amplitude + (want - mag) * (m.amplitude - a0) / (mag - m0)
                }
                _ => m.amplitude * want / mag,
            };
            prev = Some((m.amplitude, mag));
            m.amplitude = next.max(0.0);
        }
    }
    let shift = mean_dispersive_shift(&cfg, &cfg.qubit_freqs);
    let mut bare: [f64; 4] = std::array::from_fn(|i| cfg.qubit_freqs[i] - shift[i]);
    let mut h = CMat4::zeros();
    for round in 0..=opts.rounds {
        h = stroboscopic_hamiltonian(&cfg, &bare, period);
        if round < opts.rounds {
            for i in 0..4 {
                bare[i] -= h[(i, i)].re;
            }
        }
    }
    let h_eff = to_diamond(&h);
    let tgt = diamond_matrix(target);
    let scale = opts.scale.unwrap_or_else(|| target.max_abs()).max(1e-12);
    let spectrum = eigvalsh4(&h_eff);
    let target_spectrum = eigvalsh4(&tgt);
    let spectrum_error =
        spectrum.iter().zip(&target_spectrum).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
    let mut coupling_error: f64 = 0.0;
    let mut diagonal_residual: f64 = 0.0;
    for i in 0..4 {
        diagonal_residual = diagonal_residual.max(h_eff[(i, i)].norm());
        for j in 0..4 {
            if i != j {
                coupling_error = coupling_error.max((h_eff[(i, j)] - tgt[(i, j)]).norm() / scale);
            }
        }
    }
    Ok(FloquetResult {
        h_eff,
        target: tgt,
        spectrum,
        target_spectrum,
        spectrum_error,
        coupling_error,
        diagonal_residual,
        period,
        bare_freqs: bare,
        modulation: cfg.modulation,
    })
}

/// Couplings in MHz for a Bloch vector at the device coupling scale.
pub fn target_couplings(cfg: &DeviceConfig, quad: &CouplingQuad) -> CouplingQuad {
    quad.scaled(cfg.coupling_scale)
}

/// Autler–Townes dressing of the Q1 1↔2 transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtsDressing {
    pub rabi: f64,
    pub drive_freq: f64,
    /// Dressed quasienergies relative to the bare `|1⟩` level, MHz.
    pub e_minus: f64,
    pub e_plus: f64,
    pub splitting: f64,
    /// Programmable shift carried by the lower branch, `splitting / 2`.
    pub shift: f64,
    /// Distance from `E₊` to the nearest other qubit level, MHz.
    pub margin: f64,
    /// `margin` fell below five coupling scales.
    pub disturbs_manifold: bool,
}

/// Rabi frequency whose Autler–Townes shift reproduces the gauge shift at `k`.
pub fn pump_rabi_for(g: &GaugeProfile, k: &Momentum) -> f64 {
    2.0 * gauge_shift(k, g).abs()
}

/// Pump steps per drive period.
const ATS_STEPS: usize = 400;

/// Floquet quasienergies of a three-level Q1 pumped at the 1↔2 resonance.
pub fn ats_dressing(cfg: &DeviceConfig, rabi: f64) -> Result<AtsDressing> {
    if !(rabi >= 0.0 && rabi.is_finite()) {
        return Err(invalid("rabi", format!("Ω_d must be ≥ 0, got {rabi}")));
    }
    let w1 = cfg.qubit_freqs[0];
    let eta = cfg.anharmonicity;
    let wd = cfg.pump.freq.unwrap_or(w1 + eta);
    if !(wd > 0.0) {
        return Err(invalid("pump.freq", "drive frequency must be positive"));
    }
    let td = 1.0 / wd;
    let s2 = 2f64.sqrt();
    // levels relative to |1⟩
    let h = |t: f64| {
        let d = rabi * (2.0 * PI * wd * t + cfg.pump.phase).cos();
        let mut m = CMat::zeros(3, 3);
        m[(0, 0)] = c(-w1, 0.0);
        m[(2, 2)] = c(w1 + eta, 0.0);
        m[(0, 1)] = c(d / s2, 0.0);
        m[(1, 0)] = c(d / s2, 0.0);
        m[(1, 2)] = c(d, 0.0);
        m[(2, 1)] = c(d, 0.0);
        m
    };
    let u = propagate_rk4(h, 3, 0.0, td, ATS_STEPS);
    let eig = nalgebra::linalg::Schur::new(u).unpack();
    let (q, t) = eig;
    // quasienergy of each Floquet state, folded next to the |1⟩ level
    let mut states: Vec<(f64, f64)> = (0..3)
        .map(|k| {
            let e = -t[(k, k)].arg() / (2.0 * PI * td);
            let e = e - wd * (e / wd).round();
            let w_ground = q[(0, k)].norm_sqr();
            (e, w_ground)
        })
        .collect();
    // drop the ground-like state
    states.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (mut em, mut ep) = (states[0].0, states[1].0);
    if em > ep {
        std::mem::swap(&mut em, &mut ep);
    }
    let splitting = ep - em;
    let scale = cfg.coupling_scale.max(1e-12);
    let margin = (1..4).map(|i| (cfg.qubit_freqs[i] - (w1 + ep)).abs()).fold(f64::INFINITY, f64::min);
    Ok(AtsDressing {
        rabi,
        drive_freq: wd,
        e_minus: em,
        e_plus: ep,
        splitting,
        shift: 0.5 * splitting,
        margin,
        disturbs_manifold: margin < 5.0 * scale,
    })
}
