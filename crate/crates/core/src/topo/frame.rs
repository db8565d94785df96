use nalgebra::SMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{eigh4, CMat4, C64};

/// Which bands form the subspace whose geometry is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Filling {
    /// The lower two of the four bands.
    LowerHalf,
    /// The `n` lowest bands (n ∈ {1, 2}).
    Lowest(usize),
    /// A single band by ascending index.
    Band(usize),
}

impl Filling {
    fn range(self) -> Result<(usize, usize)> {
        match self {
            Filling::LowerHalf => Ok((0, 2)),
            Filling::Lowest(n) if (1..=2).contains(&n) => Ok((0, n)),
            Filling::Band(i) if i < 4 => Ok((i, i + 1)),
            other => Err(invalid("filling", format!("{other:?} does not select 1 or 2 of 4 bands"))),
        }
    }
}

pub const DEFAULT_GAP_TOL: f64 = 1e-6;

pub type Frame = SMatrix<C64, 4, 2>;

/// Orthonormal frame of a selected band subspace at one parameter point.
///
/// Rank-1 frames keep a zero second column; the link algebra pads the
/// corresponding overlap entry with 1 so the same 2×2 code serves both ranks.
#[derive(Debug, Clone, PartialEq)]
pub struct BandSubspace {
    pub frame: Frame,
    pub rank: usize,
    pub energies: [f64; 2],
    /// Smallest gap to an unselected band.
    pub gap: f64,
}

impl BandSubspace {
    /// Energy shared by the subspace (mean over selected bands).
    pub fn energy(&self) -> f64 {
        self.energies[..self.rank].iter().sum::<f64>() / self.rank as f64
    }

    /// Apply an r×r change of basis `frame ← frame · u`.
    pub fn rotated(&self, u: &crate::linalg::CMat2) -> Self {
        let mut out = self.clone();
        if self.rank == 2 {
            out.frame = self.frame * u;
        } else {
            out.frame.set_column(0, &(self.frame.column(0) * u[(0, 0)]));
        }
        out
    }
}

pub fn occupied_frame(h: &CMat4, filling: Filling, tol_gap: f64) -> Result<BandSubspace> {
    let (lo, hi) = filling.range()?;
    let (vals, vecs) = eigh4(h);
    let mut gap = f64::INFINITY;
    if lo > 0 {
        gap = gap.min(vals[lo] - vals[lo - 1]);
    }
    if hi < 4 {
        gap = gap.min(vals[hi] - vals[hi - 1]);
    }
    if gap <= tol_gap {
        return Err(Error::DegeneracyCrossing { gap, tol: tol_gap, location: String::new() });
    }
    let rank = hi - lo;
    let mut frame = Frame::zeros();
    let mut energies = [0.0; 2];
    for j in 0..rank {
        frame.set_column(j, &vecs.column(lo + j).fixed_rows::<4>(0));
        energies[j] = vals[lo + j];
    }
    Ok(BandSubspace { frame, rank, energies, gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{hamiltonian, valley_hamiltonian, ModelParams, Momentum, Valley};

    #[test]
    fn gapped_dirac_point_gives_rank_two() {
        let p = ModelParams::new(0.0, 0.0, 8.0);
        let h = valley_hamiltonian([0.0; 4], Valley::Plus, &p).unwrap();
        let b = occupied_frame(&h, Filling::LowerHalf, DEFAULT_GAP_TOL).unwrap();
        assert_eq!(b.rank, 2);
        assert!((b.energy() + 8.0).abs() < 1e-12);
        let g = b.frame.adjoint() * b.frame;
        assert!((g - nalgebra::Matrix2::identity()).norm() < 1e-12);
        let resid = h * b.frame - b.frame * C64::new(-8.0, 0.0);
        assert!(resid.norm() < 1e-10);
    }

    #[test]
    fn lowest_band_at_zone_center() {
        let p = ModelParams::new(0.5, 0.0, 0.0);
        let h = hamiltonian(&Momentum::zero(), &p);
        let b = occupied_frame(&h, Filling::Lowest(1), DEFAULT_GAP_TOL).unwrap();
        assert_eq!(b.rank, 1);
        assert!((b.energy() + 1.5).abs() < 1e-12);
    }

    #[test]
    fn fourfold_node_is_rejected() {
        let h = valley_hamiltonian([0.0; 4], Valley::Plus, &ModelParams::default()).unwrap();
        assert!(matches!(
            occupied_frame(&h, Filling::LowerHalf, DEFAULT_GAP_TOL),
            Err(Error::DegeneracyCrossing { .. })
        ));
    }
}
