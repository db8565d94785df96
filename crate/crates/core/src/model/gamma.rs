use crate::linalg::{c, kron2, pauli, CMat4};

/// The deformed Gamma matrices Γ̃x, Γ̃y, Γ̃z, Γ̃w and the chiral operator Γ̃0.
///
/// Kronecker convention: in `σa ⊗ σb` the first factor indexes the outer 2×2
/// blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSet {
    pub gx: CMat4,
    pub gy: CMat4,
    pub gz: CMat4,
    pub gw: CMat4,
    pub g0: CMat4,
    pub a: f64,
}

impl GammaSet {
    pub fn new(a: f64) -> Self {
        let s = |i: usize, j: usize| kron2(&pauli(i), &pauli(j));
        let a_c = c(a, 0.0);
        Self {
            gx: s(0, 1) + s(1, 0) * a_c,
            gy: s(2, 3) + s(3, 2) * a_c,
            gz: s(0, 2) + s(2, 0) * a_c,
            gw: s(1, 3) + s(3, 1) * a_c,
            g0: s(3, 3),
            a,
        }
    }

    /// Γ̃x, Γ̃y, Γ̃z, Γ̃w in axis order.
    pub fn spatial(&self) -> [&CMat4; 4] {
        [&self.gx, &self.gy, &self.gz, &self.gw]
    }

    pub fn all(&self) -> [&CMat4; 5] {
        [&self.gx, &self.gy, &self.gz, &self.gw, &self.g0]
    }

    /// Σ coeffs[i]·Γ̃_i + mass·Γ̃0.
    pub fn combine(&self, coeffs: [f64; 4], mass: f64) -> CMat4 {
        let mut h = self.g0 * c(mass, 0.0);
        for (g, &x) in self.spatial().into_iter().zip(coeffs.iter()) {
            if x != 0.0 {
                h += g * c(x, 0.0);
            }
        }
        h
    }
}

/// Convenience wrapper matching the operation name used elsewhere.
pub fn gamma_set(a: f64) -> GammaSet {
    GammaSet::new(a)
}
