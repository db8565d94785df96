//! Mapping between Bloch vectors and the four parametric exchange couplings of
//! the diamond (single-excitation) Hamiltonian.

use serde::{Deserialize, Serialize};

use super::BlochVector;
use crate::error::{Error, Result};
use crate::linalg::{c, CMat4, C64};

/// Qubit carried by each row/column of the diamond matrix (0-based: Q1 = 0).
///
/// Q1 and Q2 are exchanged relative to the natural order, which makes the
/// diamond matrix coincide entry by entry with `Σ d_i Γ̃_i`.
pub const DIAMOND_BASIS: [usize; 4] = [1, 0, 2, 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingQuad {
    pub omega12: C64,
    pub omega23: C64,
    pub omega34: C64,
    pub omega41: C64,
}

impl CouplingQuad {
    pub fn zero() -> Self {
        let z = c(0.0, 0.0);
        Self { omega12: z, omega23: z, omega34: z, omega41: z }
    }

    /// Couplings in edge order 12, 23, 34, 41.
    pub fn as_array(&self) -> [C64; 4] {
        [self.omega12, self.omega23, self.omega34, self.omega41]
    }

    pub fn from_array(x: [C64; 4]) -> Self {
        Self { omega12: x[0], omega23: x[1], omega34: x[2], omega41: x[3] }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::from_array(self.as_array().map(|z| z * s))
    }

    pub fn max_abs(&self) -> f64 {
        self.as_array().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

pub fn bloch_to_couplings(d: &BlochVector, a: f64) -> CouplingQuad {
    let BlochVector { dx, dy, dz, dw } = *d;
    CouplingQuad {
        omega12: c(dx + a * dw, dz + a * dy),
        omega23: c(dw + a * dx, -(dy + a * dz)),
        omega34: c(dx - a * dw, -dz + a * dy),
        omega41: c(-dw + a * dx, -dy + a * dz),
    }
}

/// Inverse of [`bloch_to_couplings`].
///
/// The forward map is injective for every `a`; the quad is rejected when it
/// is not in the image for this `a` (relative residual above 1e-9).
pub fn couplings_to_bloch(q: &CouplingQuad, a: f64) -> Result<BlochVector> {
    let d = BlochVector {
        dx: 0.5 * (q.omega12 + q.omega34).re,
        dy: -0.5 * (q.omega23 + q.omega41).im,
        dz: 0.5 * (q.omega12 - q.omega34).im,
        dw: 0.5 * (q.omega23 - q.omega41).re,
    };
    let back = bloch_to_couplings(&d, a);
    let residual: f64 = back
        .as_array()
        .iter()
        .zip(q.as_array().iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let scale = q.max_abs().max(1.0);
    if residual > 1e-9 * scale {
        return Err(Error::CouplingsNotInImage { a, residual });
    }
    Ok(d)
}

/// The diamond effective Hamiltonian in the [`DIAMOND_BASIS`] ordering.
pub fn diamond_matrix(q: &CouplingQuad) -> CMat4 {
    let z = c(0.0, 0.0);
    let CouplingQuad { omega12: o12, omega23: o23, omega34: o34, omega41: o41 } = *q;
    CMat4::new(
        z, o12.conj(), o23, z, //
        o12, z, z, o41.conj(), //
        o23.conj(), z, z, o34, //
        z, o41, o34.conj(), z,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigvalsh4;
    use crate::model::GammaSet;

    #[test]
    fn reference_quad_at_half() {
        let q = bloch_to_couplings(&BlochVector::new([1.0, 2.0, 3.0, 4.0]), 0.5);
        assert_eq!(q.omega12, c(3.0, 4.0));
        assert_eq!(q.omega23, c(4.5, -3.5));
        assert_eq!(q.omega34, c(-1.0, -2.0));
        assert_eq!(q.omega41, c(-3.5, -0.5));
        let e = eigvalsh4(&diamond_matrix(&q));
        let s = 30f64.sqrt();
        for (x, y) in e.iter().zip([-1.5 * s, -0.5 * s, 0.5 * s, 1.5 * s]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_vector_gives_zero_couplings() {
        for a in [-1.0, 0.0, 0.5, 1.0] {
            assert_eq!(bloch_to_couplings(&BlochVector::new([0.0; 4]), a), CouplingQuad::zero());
        }
    }

    #[test]
    fn pure_x_at_a_zero() {
        let q = bloch_to_couplings(&BlochVector::new([1.0, 0.0, 0.0, 0.0]), 0.0);
        assert_eq!(q.as_array(), [c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, -0.0)]);
        let e = eigvalsh4(&diamond_matrix(&q));
        for (x, y) in e.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn diamond_equals_gamma_combination_entrywise() {
        for a in [0.0, 0.5, -1.0, 1.0] {
            let d = BlochVector::new([0.3, -1.1, 2.0, 0.7]);
            let g = GammaSet::new(a);
            let h = g.combine(d.as_array(), 0.0);
            assert!((diamond_matrix(&bloch_to_couplings(&d, a)) - h).norm() < 1e-14);
        }
    }

    #[test]
    fn inverse_holds_at_flat_limit_and_rejects_foreign_quads() {
        let d = BlochVector::new([0.2, 0.4, -0.6, 0.9]);
        for a in [1.0, -1.0, 0.5] {
            let back = couplings_to_bloch(&bloch_to_couplings(&d, a), a).unwrap();
            for (x, y) in back.as_array().iter().zip(d.as_array()) {
                assert!((x - y).abs() < 1e-14);
            }
        }
        let mut q = bloch_to_couplings(&d, 0.5);
        q.omega23 += c(0.1, 0.0);
        assert!(matches!(couplings_to_bloch(&q, 0.5), Err(Error::CouplingsNotInImage { .. })));
    }
}
