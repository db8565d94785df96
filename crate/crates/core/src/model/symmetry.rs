use serde::{Deserialize, Serialize};

use super::{LatticeModel, ModelParams, Momentum};
use crate::linalg::{kron2, pauli, CMat4};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub chiral: bool,
    pub cp: bool,
    /// max_k ‖{Γ̃0, H}‖ / ‖H‖
    pub chiral_defect: f64,
    /// max_k ‖U H* U† + H‖ / ‖H‖ with U = σ1⊗σ2
    pub cp_defect: f64,
    /// ‖(CP)² + 1‖; zero for the antiunitary σ1⊗σ2·K.
    pub cp_square_defect: f64,
}

const TOL: f64 = 1e-12;

/// Deterministic quasi-random sample of the zone (additive recurrence).
fn sample_momenta(n: usize) -> impl Iterator<Item = Momentum> {
    const G: [f64; 4] = [0.8566748838545029, 0.733891856627126, 0.6287067210378086, 0.5385972572236101];
    (1..=n).map(|i| {
        let k = G.map(|g| ((i as f64 * g).fract() * 2.0 - 1.0) * std::f64::consts::PI);
        Momentum::new(k)
    })
}

pub fn symmetry_report(p: &ModelParams) -> SymmetryReport {
    let model = LatticeModel::new(*p);
    let g0 = model.gammas.g0;
    let u = kron2(&pauli(1), &pauli(2));
    // (CP)² = U U*
    let cp_sq = u * u.conjugate();
    let cp_square_defect = (cp_sq + CMat4::identity()).norm();

    let mut chiral_defect: f64 = 0.0;
    let mut cp_defect: f64 = 0.0;
    for k in sample_momenta(256) {
        let h = model.hamiltonian(&k);
        let n = h.norm().max(1e-300);
        chiral_defect = chiral_defect.max((g0 * h + h * g0).norm() / n);
        cp_defect = cp_defect.max((u * h.conjugate() * u.adjoint() + h).norm() / n);
    }
    SymmetryReport {
        chiral: chiral_defect < TOL,
        cp: cp_defect < TOL && cp_square_defect < TOL,
        chiral_defect,
        cp_defect,
        cp_square_defect,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z2_monopole_has_both_symmetries() {
        let r = symmetry_report(&ModelParams::new(0.0, 0.0, 0.0));
        assert!(r.chiral && r.cp, "{r:?}");
        assert!(r.cp_square_defect < 1e-15);
    }

    #[test]
    fn deformation_breaks_cp_only() {
        let r = symmetry_report(&ModelParams::new(0.5, 0.3, 0.0));
        assert!(r.chiral && !r.cp, "{r:?}");
    }

    #[test]
    fn mass_breaks_chiral_and_cp() {
        let r = symmetry_report(&ModelParams::new(0.0, 0.0, 0.8));
        assert!(!r.chiral && !r.cp, "{r:?}");
    }
}
