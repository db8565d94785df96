use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Coupler `C_j` sits on edge `Q_j – Q_{j+1}` (indices mod 4).
pub fn edge_qubits(j: usize) -> (usize, usize) {
    (j % 4, (j + 1) % 4)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplerConfig {
    /// Sweet-spot frequency `ω_C0`, MHz; `ω_C(φ) = ω_C0 √|cos πφ|`.
    pub omega_max: f64,
    /// Static flux bias `Φ_j`, flux quanta.
    pub flux_bias: f64,
    /// Qubit–coupler coupling, equal for both qubits of the edge, MHz.
    pub g_qc: f64,
    /// Direct qubit–qubit coupling, MHz.
    pub g_direct: f64,
}

impl CouplerConfig {
    pub fn frequency(&self, flux: f64) -> f64 {
        self.omega_max * (PI * flux).cos().abs().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Modulation {
    /// `δ_j`, flux quanta.
    #[serde(default)]
    pub amplitude: f64,
    /// `ω_φj`, MHz.
    #[serde(default)]
    pub freq: f64,
    /// `φ_j`, radians.
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pump {
    /// Rabi frequency `Ω_d`, MHz.
    #[serde(default)]
    pub rabi: f64,
    /// Drive frequency, MHz; `None` means resonant with the 1→2 transition of Q1.
    #[serde(default)]
    pub freq: Option<f64>,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Decoherence {
    /// Per-qubit T1, µs.
    pub t1: [f64; 4],
    /// Per-qubit T2, µs.
    pub t2: [f64; 4],
}

impl Default for Decoherence {
    fn default() -> Self {
        Self { t1: [20.0; 4], t2: [4.0; 4] }
    }
}

impl Decoherence {
    pub fn ideal() -> Self {
        Self { t1: [f64::INFINITY; 4], t2: [f64::INFINITY; 4] }
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..4 {
            let (t1, t2) = (self.t1[i], self.t2[i]);
            if !(t1 > 0.0) || !(t2 > 0.0) {
                return Err(invalid("decoherence", format!("Q{}: T1 and T2 must be positive", i + 1)));
            }
            if t2 > 2.0 * t1 {
                return Err(invalid("decoherence", format!("Q{}: T2 = {t2} µs exceeds 2·T1 = {} µs", i + 1, 2.0 * t1)));
            }
        }
        Ok(())
    }

    /// `(1/T1, γ_φ)` per qubit, with `γ_φ = 1/T2 − 1/(2 T1)`.
    pub fn rates(&self) -> [(f64, f64); 4] {
        std::array::from_fn(|i| {
            let g1 = 1.0 / self.t1[i];
            (g1, (1.0 / self.t2[i] - 0.5 * g1).max(0.0))
        })
    }
}

/// Device parameters. Qubit frequencies are the dressed (rotating-frame)
/// targets; bare frequencies are calibrated from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub qubit_freqs: [f64; 4],
    /// Q1 anharmonicity `ω_12 − ω_01`, MHz.
    pub anharmonicity: f64,
    pub couplers: [CouplerConfig; 4],
    #[serde(default)]
    pub modulation: [Modulation; 4],
    #[serde(default)]
    pub pump: Pump,
    #[serde(default)]
    pub decoherence: Decoherence,
    /// MHz of exchange coupling per unit Bloch-vector component.
    pub coupling_scale: f64,
}

/// Idle coupler–qubit detuning of the representative device, MHz.
pub const IDLE_DETUNING: f64 = -1500.0;
/// Representative qubit–coupler coupling, MHz.
pub const G_QC: f64 = 250.0;
const IDLE_FLUX: f64 = 0.2;

impl Default for DeviceConfig {
    fn default() -> Self {
        Self::with_qubits([5000.0, 5300.0, 4900.0, 5500.0])
    }
}

impl DeviceConfig {
    /// Representative device around the given qubit frequencies: each
    /// coupler idles [`IDLE_DETUNING`] above the upper qubit of its edge, with
    /// the direct coupling cancelling the mediated one.
    pub fn with_qubits(qubit_freqs: [f64; 4]) -> Self {
        Self::representative(qubit_freqs, G_QC, IDLE_DETUNING)
    }

    /// As [`with_qubits`](Self::with_qubits) with explicit coupling and idle detuning.
    pub fn representative(qubit_freqs: [f64; 4], g_qc: f64, idle_detuning: f64) -> Self {
        let couplers = std::array::from_fn(|j| {
            let (a, b) = edge_qubits(j);
            let idle = qubit_freqs[a].max(qubit_freqs[b]) - idle_detuning;
            let omega_max = idle / (PI * IDLE_FLUX).cos().sqrt();
            let da = qubit_freqs[a] - idle;
            let db = qubit_freqs[b] - idle;
            // direct coupling cancels the coupler-mediated one at idle
            let g_direct = -g_qc * g_qc * (1.0 / da + 1.0 / db) / 2.0;
            CouplerConfig { omega_max, flux_bias: IDLE_FLUX, g_qc, g_direct }
        });
        Self {
            qubit_freqs,
            anharmonicity: -250.0,
            couplers,
            modulation: [Modulation::default(); 4],
            pump: Pump::default(),
            decoherence: Decoherence::default(),
            coupling_scale: 1.0,
        }
    }
}

pub const DISPERSIVE_RATIO: f64 = 0.2;

impl DeviceConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn validate(&self) -> Result<()> {
        for (i, f) in self.qubit_freqs.iter().enumerate() {
            if !(f.is_finite() && *f > 0.0) {
                return Err(invalid("qubit_freqs", format!("Q{} frequency must be positive, got {f}", i + 1)));
            }
        }
        if !(self.anharmonicity.is_finite() && self.anharmonicity < 0.0) {
            return Err(invalid("anharmonicity", "must be negative (transmon)"));
        }
        for (j, c) in self.couplers.iter().enumerate() {
            if !(c.omega_max > 0.0) || !(c.flux_bias.abs() < 0.5) {
                return Err(invalid("couplers", format!("C{}: need ω_C0 > 0 and |Φ| < 1/2", j + 1)));
            }
            if !c.g_qc.is_finite() || !c.g_direct.is_finite() {
                return Err(invalid("couplers", format!("C{}: couplings must be finite", j + 1)));
            }
            let (a, b) = edge_qubits(j);
            for q in [a, b] {
                if self.qubit_freqs[q] >= c.frequency(c.flux_bias) {
                    return Err(invalid(
                        "couplers",
                        format!("Q{} must sit below coupler C{} (Δ < 0)", q + 1, j + 1),
                    ));
                }
            }
        }
        for (j, m) in self.modulation.iter().enumerate() {
            if !(m.amplitude >= 0.0 && m.freq >= 0.0 && m.phase.is_finite()) {
                return Err(invalid("modulation", format!("C{}: amplitude and frequency must be ≥ 0", j + 1)));
            }
        }
        if !(self.coupling_scale > 0.0) {
            return Err(invalid("coupling_scale", "must be positive"));
        }
        self.decoherence.validate()
    }

    /// `Δ_ij = ω_Qi − ω_Cj` at the static bias, for both qubits of edge `j`.
    pub fn detunings(&self, j: usize) -> (f64, f64) {
        let (a, b) = edge_qubits(j);
        let wc = self.couplers[j].frequency(self.couplers[j].flux_bias);
        (self.qubit_freqs[a] - wc, self.qubit_freqs[b] - wc)
    }

    /// Edges whose `|g/Δ|` exceeds [`DISPERSIVE_RATIO`].
    pub fn dispersive_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for j in 0..4 {
            let (da, db) = self.detunings(j);
            let g = self.couplers[j].g_qc;
            let r = (g / da).abs().max((g / db).abs());
            if r > DISPERSIVE_RATIO {
                out.push(format!("C{}: |g/Δ| = {r:.3} above {DISPERSIVE_RATIO}", j + 1));
            }
        }
        out
    }

    /// Modulation tone of edge `j`: the planned qubit detuning.
    pub fn edge_tone(&self, j: usize) -> f64 {
        let (a, b) = edge_qubits(j);
        (self.qubit_freqs[a] - self.qubit_freqs[b]).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_dispersive_at_idle() {
        let c = DeviceConfig::default();
        c.validate().unwrap();
        assert!(c.dispersive_warnings().is_empty());
        assert_eq!([0, 1, 2, 3].map(|j| c.edge_tone(j)), [300.0, 400.0, 600.0, 500.0]);
    }

    #[test]
    fn t2_above_twice_t1_is_rejected() {
        let mut c = DeviceConfig::default();
        c.decoherence.t2[2] = 50.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn toml_roundtrip() {
        let c = DeviceConfig::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(DeviceConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn dephasing_rate_from_t1_t2() {
        let r = Decoherence::default().rates();
        assert!((r[0].0 - 0.05).abs() < 1e-15);
        assert!((r[0].1 - (0.25 - 0.025)).abs() < 1e-15);
    }
}
