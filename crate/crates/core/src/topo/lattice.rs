//! Link-variable discretization of the non-Abelian Berry curvature.
//!
//! A link is the unitary polar factor of the frame overlap `V_a† V_b`. Loops
//! built from links are covariant under any change of frame basis, so the
//! eigensolver's gauge choice drops out of every trace.

use std::f64::consts::PI;

use super::frame::BandSubspace;
use crate::error::{Error, Result};
use crate::linalg::{log_unitary2, polar2, CMat2, I, ONE, ZERO};

/// Links whose overlap has a singular value below this are rejected.
pub const LINK_SIGMA_MIN: f64 = 0.05;
/// Loops with an eigenphase within this distance of ±π are flagged.
pub const BRANCH_MARGIN: f64 = 0.2;
/// Halvings attempted by [`curvature_at`] before giving up.
pub const MAX_REFINE: u32 = 5;

/// Unitary parallel transporter from `a` to `b`.
pub fn link(a: &BandSubspace, b: &BandSubspace) -> Result<CMat2> {
    let mut m = a.frame.adjoint() * b.frame;
    if a.rank == 1 {
        m[(0, 1)] = ZERO;
        m[(1, 0)] = ZERO;
        m[(1, 1)] = ONE;
    }
    let (u, sigma_min) = polar2(&m);
    if sigma_min < LINK_SIGMA_MIN {
        return Err(Error::SingularLink { sigma_min, location: String::new() });
    }
    Ok(u)
}

/// Ordered product of links around `corners`, based at `corners[0]`.
pub fn wilson_loop(corners: [&BandSubspace; 4]) -> Result<CMat2> {
    let mut w = CMat2::identity();
    for i in 0..4 {
        w *= link(corners[i], corners[(i + 1) % 4])?;
    }
    Ok(w)
}

/// `i log W`, the flux (curvature times signed area) threaded by a loop.
pub fn loop_flux(w: &CMat2) -> Result<CMat2> {
    let (l, max_arg) = log_unitary2(w);
    if max_arg > PI - BRANCH_MARGIN {
        return Err(Error::BranchAmbiguity { phase: max_arg, location: String::new() });
    }
    let f = l * I;
    // exact hermiticity
    Ok((f + f.adjoint()).scale(0.5))
}

/// Clover estimate of `F_μν` at the centre of a 3×3 stencil.
///
/// `st[i][j]` sits at offset `(i − 1) h_mu` along μ and `(j − 1) h_nu` along
/// ν. Averaging the four loops based at the centre cancels the first-order
/// error of a single corner plaquette.
pub fn clover(st: [[&BandSubspace; 3]; 3], h_mu: f64, h_nu: f64) -> Result<CMat2> {
    let mut acc = CMat2::zeros();
    for (s1, s2) in [(1i32, 1i32), (-1, 1), (-1, -1), (1, -1)] {
        let at = |i: i32, j: i32| st[(i + 1) as usize][(j + 1) as usize];
        let w = wilson_loop([at(0, 0), at(s1, 0), at(s1, s2), at(0, s2)])?;
        acc += loop_flux(&w)?.scale((s1 * s2) as f64);
    }
    Ok(acc.unscale(4.0 * h_mu * h_nu))
}

/// Curvature `F_μν` at `x` from frames evaluated on demand.
///
/// A flagged loop or singular link halves both steps and retries, up to
/// [`MAX_REFINE`] times.
pub fn curvature_at<F>(frame: &F, x: [f64; 4], mu: usize, nu: usize, h_mu: f64, h_nu: f64) -> Result<CMat2>
where
    F: Fn([f64; 4]) -> Result<BandSubspace>,
{
    assert!(mu < 4 && nu < 4 && mu != nu);
    let mut scale = 1.0;
    let mut attempt = 0;
    loop {
        let (hm, hn) = (h_mu * scale, h_nu * scale);
        let mut nodes = Vec::with_capacity(9);
        for i in -1..=1 {
            for j in -1..=1 {
                let mut y = x;
                y[mu] += i as f64 * hm;
                y[nu] += j as f64 * hn;
                nodes.push(frame(y).map_err(|e| e.at(format!("{y:?}")))?);
            }
        }
        let st = [
            [&nodes[0], &nodes[1], &nodes[2]],
            [&nodes[3], &nodes[4], &nodes[5]],
            [&nodes[6], &nodes[7], &nodes[8]],
        ];
        match clover(st, hm, hn) {
            Ok(f) => return Ok(f),
            Err(Error::SingularLink { .. } | Error::BranchAmbiguity { .. }) if attempt < MAX_REFINE => {
                attempt += 1;
                scale *= 0.5;
            }
            Err(e) => return Err(e.at(format!("{x:?} ({mu},{nu})"))),
        }
    }
}

/// One cell of a plaquette lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Plaquette {
    /// Flux divided by the cell area.
    pub f: CMat2,
    /// Eigenphase near ±π: the flux is only known modulo 2π.
    pub flagged: bool,
}

/// Per-cell curvature on a 2D slice of frames, `frames[i][j]` at
/// `(i h_mu, j h_nu)`. Cell `(i, j)` is the loop through nodes
/// `(i, j) → (i+1, j) → (i+1, j+1) → (i, j+1)`.
pub fn plaquette_curvature(frames: &[Vec<BandSubspace>], h_mu: f64, h_nu: f64) -> Result<Vec<Vec<Plaquette>>> {
    let n = frames.len();
    let mut out = Vec::with_capacity(n.saturating_sub(1));
    for i in 0..n.saturating_sub(1) {
        let cols = frames[i].len().min(frames[i + 1].len());
        let mut row = Vec::with_capacity(cols.saturating_sub(1));
        for j in 0..cols.saturating_sub(1) {
            let w = wilson_loop([&frames[i][j], &frames[i + 1][j], &frames[i + 1][j + 1], &frames[i][j + 1]])
                .map_err(|e| e.at(format!("cell ({i},{j})")))?;
            let area = h_mu * h_nu;
            let cell = match loop_flux(&w) {
                Ok(f) => Plaquette { f: f.unscale(area), flagged: false },
                Err(Error::BranchAmbiguity { .. }) => {
                    let (l, _) = log_unitary2(&w);
                    Plaquette { f: (l * I).unscale(area), flagged: true }
                }
                Err(e) => return Err(e),
            };
            row.push(cell);
        }
        out.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, pauli, CMat4};
    use crate::topo::frame::{occupied_frame, Filling, DEFAULT_GAP_TOL};

    /// Two-level Dirac cone d·σ embedded in the upper block; lowest band.
    fn cone_frame(theta: f64, phi: f64) -> BandSubspace {
        let d = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
        let blk = pauli(1) * c(d[0], 0.0) + pauli(2) * c(d[1], 0.0) + pauli(3) * c(d[2], 0.0);
        let mut h = CMat4::zeros();
        h.fixed_view_mut::<2, 2>(0, 0).copy_from(&blk);
        h[(2, 2)] = c(5.0, 0.0);
        h[(3, 3)] = c(6.0, 0.0);
        occupied_frame(&h, Filling::Band(0), DEFAULT_GAP_TOL).unwrap()
    }

    #[test]
    fn dirac_monopole_flux_is_one() {
        let (nt, np) = (40, 80);
        let (ht, hp) = (PI / nt as f64, 2.0 * PI / np as f64);
        let frames: Vec<Vec<_>> = (0..=nt)
            .map(|i| (0..=np).map(|j| cone_frame(i as f64 * ht, j as f64 * hp)).collect())
            .collect();
        let cells = plaquette_curvature(&frames, ht, hp).unwrap();
        let flux: f64 = cells.iter().flatten().map(|p| p.f[(0, 0)].re * ht * hp).sum();
        let ch = flux / (2.0 * PI);
        assert!((ch.abs() - 1.0).abs() < 1e-9, "{ch}");
        assert!(cells.iter().flatten().all(|p| !p.flagged));
    }

    #[test]
    fn constant_frames_have_zero_curvature() {
        let b = cone_frame(0.3, 0.2);
        let row = vec![b.clone(); 4];
        let frames = vec![row; 4];
        let cells = plaquette_curvature(&frames, 0.1, 0.1).unwrap();
        assert!(cells.iter().flatten().all(|p| p.f.norm() < 1e-14));
    }

    #[test]
    fn clover_matches_monopole_density() {
        // lowest band of d·σ carries Berry curvature ∓ sinθ/2
        let f = |x: [f64; 4]| Ok(cone_frame(x[0], x[1]));
        let x = [0.7, 1.1, 0.0, 0.0];
        let fx = curvature_at(&f, x, 0, 1, 1e-2, 1e-2).unwrap();
        assert!((fx[(0, 0)].re.abs() - 0.5 * x[0].sin()).abs() < 1e-5, "{}", fx[(0, 0)]);
        let fy = curvature_at(&f, x, 1, 0, 1e-2, 1e-2).unwrap();
        assert!((fx + fy).norm() < 1e-14);
    }

    #[test]
    fn orthogonal_frames_give_singular_link() {
        let a = cone_frame(0.0, 0.0);
        let b = cone_frame(PI, 0.0);
        assert!(matches!(link(&a, &b), Err(Error::SingularLink { .. })));
    }

    #[test]
    fn rank_one_padding_leaves_identity_block() {
        let a = cone_frame(0.2, 0.1);
        let b = cone_frame(0.25, 0.3);
        let u = link(&a, &b).unwrap();
        assert_eq!(u[(1, 1)], ONE);
        assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-14);
    }
}
