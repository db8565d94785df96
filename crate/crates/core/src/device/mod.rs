//! Superconducting-circuit emulation of the four-band model.

pub mod circuit;
pub mod config;
pub mod floquet;
pub mod lindblad;
pub mod ode;
pub mod protocol;
pub mod spectroscopy;

pub use circuit::{
    build_circuit_hamiltonian, dispersive_j, effective_coupling, single_excitation_block,
    single_excitation_hamiltonian, CircuitSnapshot, CircuitSpace, EffectiveCoupling,
};
pub use config::{CouplerConfig, Decoherence, DeviceConfig, Modulation, Pump};
pub use floquet::{
    ats_dressing, common_period, floquet_effective_hamiltonian, modulation_for, pump_rabi_for, AtsDressing, FloquetOptions,
    FloquetResult,
};
pub use lindblad::{lindblad_evolve, lindblad_rhs, qubit_channels, with_vacuum, Trajectory};
pub use ode::Tolerance;
pub use protocol::{
    measured_second_chern, nonadiabatic_curvature, MeasuredChern, Plane, PlaneResponse, ProtocolOptions,
    ProtocolResult, SectorResponse,
};
pub use spectroscopy::{
    absorption_peaks, distinct_levels, k_path, spectroscopy_scan, PathPoint, ProbeSettings, ScanPoint,
    SpectroscopySource,
};
