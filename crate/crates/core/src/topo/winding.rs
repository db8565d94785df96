//! Three-dimensional winding number of the chiral off-diagonal block on a
//! small hypersphere around a nodal point of the lattice model.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use super::hopf::hopf_embed;
use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::linalg::{c, CMat2, CMat4};
use crate::model::{bloch_jacobian, monopole_positions, LatticeModel, ModelParams, Momentum, Valley};

/// Values farther than this from an integer do not round.
pub const INTEGER_TOL: f64 = 0.05;

/// Off-diagonal block `Q` of a chirally symmetric Hamiltonian in the
/// eigenbasis of `Γ̃0 = diag(1, −1, −1, 1)`: rows {0, 3}, columns {1, 2}.
pub fn chiral_block(h: &CMat4) -> CMat2 {
    CMat2::new(h[(0, 1)], h[(0, 2)], h[(3, 1)], h[(3, 2)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindingGrid {
    pub n_theta: usize,
    pub n_phi: usize,
    pub n_varphi: usize,
}

impl Default for WindingGrid {
    fn default() -> Self {
        Self { n_theta: 24, n_phi: 24, n_varphi: 24 }
    }
}

impl WindingGrid {
    pub fn coarsened(self) -> Self {
        Self { n_theta: self.n_theta / 2, n_phi: self.n_phi / 2, n_varphi: self.n_varphi / 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindingResult {
    pub value: f64,
    /// Same integral at half resolution.
    pub coarse: f64,
    pub radius: f64,
    /// Smallest |det Q| met on the sphere.
    pub min_det: f64,
    pub grid: WindingGrid,
}

impl WindingResult {
    /// The integer both resolutions round to, if they agree.
    pub fn rounded(&self) -> Option<i64> {
        let r = self.value.round();
        let ok = (self.value - r).abs() < INTEGER_TOL && (self.coarse - r).abs() < INTEGER_TOL;
        ok.then_some(r as i64)
    }

    pub fn integer(&self) -> Result<i64> {
        self.rounded().ok_or(Error::NonIntegerWinding { value: self.value, tol: INTEGER_TOL })
    }
}

fn sphere_integral(
    model: &LatticeModel,
    center: [f64; 4],
    radius: f64,
    grid: WindingGrid,
    exec: Exec,
) -> Result<(f64, f64)> {
    let (ht, hp, hv) =
        (FRAC_PI_2 / grid.n_theta as f64, 2.0 * PI / grid.n_phi as f64, 2.0 * PI / grid.n_varphi as f64);
    let n = grid.n_theta * grid.n_phi * grid.n_varphi;
    let gammas = model.gammas.spatial();
    let samples = exec.try_map(n, |idx| {
        let l = idx % grid.n_varphi;
        let k = (idx / grid.n_varphi) % grid.n_phi;
        let j = idx / (grid.n_varphi * grid.n_phi);
        let (t, p, v) = ((j as f64 + 0.5) * ht, k as f64 * hp, l as f64 * hv);
        let dir = hopf_embed([1.0, t, p, v]);
        let (st, ct) = t.sin_cos();
        let (sp, cp) = p.sin_cos();
        let (sv, cv) = v.sin_cos();
        let tangents = [
            [-st * cp, -st * sp, ct * cv, ct * sv],
            [-ct * sp, ct * cp, 0.0, 0.0],
            [0.0, 0.0, -st * sv, st * cv],
        ];
        let km = Momentum([0, 1, 2, 3].map(|i| center[i] + radius * dir[i]));
        let h = model.hamiltonian(&km);
        let q = chiral_block(&h);
        let det = q.determinant().norm();
        let scale = q.norm().max(1e-300);
        let qinv = match q.try_inverse() {
            Some(inv) if det > 1e-10 * scale * scale => inv,
            _ => return Err(Error::GapClosing { det, location: format!("k = {:?}", km.0) }),
        };
        let jac = bloch_jacobian(&km, &model.params);
        let a: Vec<CMat2> = tangents
            .iter()
            .map(|tv| {
                let mut dh = CMat4::zeros();
                for (i, g) in gammas.iter().enumerate() {
                    let coeff: f64 = (0..4).map(|jj| jac[i][jj] * radius * tv[jj]).sum();
                    dh += *g * c(coeff, 0.0);
                }
                qinv * chiral_block(&dh)
            })
            .collect();
        let comm = a[1] * a[2] - a[2] * a[1];
        let density = (a[0] * comm).trace().re / (8.0 * PI * PI);
        Ok((density * ht * hp * hv, det))
    })?;
    let terms: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let min_det = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    Ok((crate::linalg::pairwise_sum(&terms), min_det))
}

/// Winding number of `Q(k)` over the 3-sphere of `radius` (radians) around
/// the nodal point of the given valley.
pub fn winding3_sphere(p: &ModelParams, valley: Valley, radius: f64, grid: WindingGrid, exec: Exec) -> Result<WindingResult> {
    p.validate()?;
    if p.m != 0.0 {
        return Err(invalid("m", "the winding number needs the chiral (massless) model"));
    }
    if !(radius > 0.0 && radius < PI) {
        return Err(invalid("radius", format!("must lie in (0, π), got {radius}")));
    }
    if grid.n_theta < 4 || grid.n_phi < 4 || grid.n_varphi < 4 {
        return Err(invalid("grid", format!("resolution too small: {grid:?}")));
    }
    let pair = monopole_positions(p.lambda)?;
    if pair.merged {
        return Err(Error::MonopolesMerged { lambda: p.lambda });
    }
    let center = match valley {
        Valley::Plus => pair.plus.0,
        Valley::Minus => pair.minus.0,
    };
    let model = LatticeModel::new(*p);
    let (value, min_det) = sphere_integral(&model, center, radius, grid, exec)?;
    let (coarse, _) = sphere_integral(&model, center, radius, grid.coarsened(), exec)?;
    Ok(WindingResult { value, coarse, radius, min_det, grid })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chiral_block_reconstructs_massless_hamiltonian() {
        let p = ModelParams::new(0.5, 0.2, 0.0);
        let h = LatticeModel::new(p).hamiltonian(&Momentum::new([0.3, -0.7, 1.1, 0.4]));
        let q = chiral_block(&h);
        // diagonal chiral blocks vanish
        for (r, s) in [(0, 0), (0, 3), (1, 1), (1, 2), (2, 2)] {
            assert!(h[(r, s)].norm() < 1e-14);
        }
        assert_eq!(q[(1, 0)], h[(3, 1)]);
    }

    #[test]
    fn massive_model_is_rejected() {
        let p = ModelParams::new(0.0, 0.0, 1.0);
        assert!(winding3_sphere(&p, Valley::Plus, 0.3, WindingGrid::default(), Exec::Sequential).is_err());
    }
}
