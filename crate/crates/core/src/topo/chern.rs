//! Second Chern numbers of the gapped valley model in Hopf coordinates.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use super::frame::{occupied_frame, BandSubspace, Filling, DEFAULT_GAP_TOL};
use super::hopf::{hopf_embed, RadialMap};
use super::lattice::{clover, curvature_at, link, loop_flux};
use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::linalg::{pairwise_sum, CMat2};
use crate::model::{ModelParams, Valley, ValleyModel};

const FOUR_PI2: f64 = 4.0 * PI * PI;

/// `FF(q, θ) = 3 m q³ cosθ sinθ / (8π² (m² + q²)^{5/2})` for the a = 0 valley.
pub fn chern_form_closed(q: f64, theta: f64, m: f64) -> f64 {
    let r2 = m * m + q * q;
    if r2 == 0.0 {
        return 0.0;
    }
    3.0 * m * q.powi(3) * theta.cos() * theta.sin() / (8.0 * PI * PI * r2.powf(2.5))
}

/// `4π² ∫₀^Q ∫₀^{π/2} FF dθ dq`, the cut-off second Chern number at a = 0.
pub fn second_chern_closed(q_cut: f64, m: f64) -> f64 {
    if m == 0.0 {
        return 0.0;
    }
    let r2 = m * m + q_cut * q_cut;
    0.5 * m.signum() - 0.75 * m * (1.0 / r2.sqrt() - m * m / (3.0 * r2.powf(1.5)))
}

/// Large-cutoff limit from two cutoffs `Q` and `2Q`, cancelling the `1/Q` tail.
pub fn extrapolate_cutoff(c_q: f64, c_2q: f64) -> f64 {
    2.0 * c_2q - c_q
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HopfAxis {
    Q,
    Theta,
    Phi,
    Varphi,
}

impl HopfAxis {
    pub const ALL: [HopfAxis; 4] = [HopfAxis::Q, HopfAxis::Theta, HopfAxis::Phi, HopfAxis::Varphi];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> &'static str {
        match self {
            HopfAxis::Q => "q",
            HopfAxis::Theta => "theta",
            HopfAxis::Phi => "phi",
            HopfAxis::Varphi => "varphi",
        }
    }
}

/// Grid resolution on `[0, q_cut] × [0, π/2] × [0, 2π)²`.
///
/// The radial axis is uniform in `s` with `q = |m| sinh s`; all axes use cell
/// midpoints. `n_phi`/`n_varphi` only matter for the full 4D integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopfGrid {
    pub n_q: usize,
    pub n_theta: usize,
    pub n_phi: usize,
    pub n_varphi: usize,
}

impl Default for HopfGrid {
    fn default() -> Self {
        Self { n_q: 96, n_theta: 64, n_phi: 16, n_varphi: 16 }
    }
}

impl HopfGrid {
    pub fn full4d_default() -> Self {
        Self { n_q: 32, n_theta: 16, n_phi: 24, n_varphi: 24 }
    }

    /// Half the resolution along q and θ.
    pub fn coarsened(self) -> Self {
        Self { n_q: (self.n_q / 2).max(2), n_theta: (self.n_theta / 2).max(2), ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_q < 2 || self.n_theta < 2 || self.n_phi < 3 || self.n_varphi < 3 {
            return Err(invalid("grid", format!("resolution too small: {self:?}")));
        }
        Ok(())
    }
}

/// Band frames of the valley model as a function of `(s, θ, φ, ϕ)`.
#[derive(Debug, Clone)]
pub struct HopfFrames {
    pub model: ValleyModel,
    pub radial: RadialMap,
    pub filling: Filling,
    pub tol_gap: f64,
}

impl HopfFrames {
    pub fn new(p: &ModelParams, valley: Valley) -> Result<Self> {
        if p.m == 0.0 {
            return Err(invalid("m", "a nonzero mass is required to gap the valley"));
        }
        Ok(Self {
            model: ValleyModel::new(*p, valley)?,
            radial: RadialMap { scale: p.m.abs() },
            filling: Filling::LowerHalf,
            tol_gap: DEFAULT_GAP_TOL,
        })
    }

    pub fn frame(&self, x: [f64; 4]) -> Result<BandSubspace> {
        let q = self.radial.q(x[0]);
        let h = self.model.hamiltonian(hopf_embed([q, x[1], x[2], x[3]]));
        occupied_frame(&h, self.filling, self.tol_gap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureComponent {
    pub mu: HopfAxis,
    pub nu: HopfAxis,
    /// Row-major 2×2; for rank-1 subspaces only entry (0, 0) is meaningful.
    pub f: [[num_complex::Complex64; 2]; 2],
}

impl CurvatureComponent {
    fn new(mu: HopfAxis, nu: HopfAxis, m: &CMat2) -> Self {
        Self { mu, nu, f: [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]] }
    }

    pub fn matrix(&self) -> CMat2 {
        CMat2::new(self.f[0][0], self.f[0][1], self.f[1][0], self.f[1][1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureCell {
    pub q: f64,
    pub theta: f64,
    pub phi: f64,
    pub varphi: f64,
    /// `dq dθ` measure of the cell.
    pub weight: f64,
    pub components: Vec<CurvatureComponent>,
    /// `3 tr(F_qθ F_φϕ) / 4π²`.
    pub chern_form: f64,
}

impl CurvatureCell {
    /// `F_μν`, using antisymmetry when only `F_νμ` is stored.
    pub fn component(&self, mu: HopfAxis, nu: HopfAxis) -> Option<CMat2> {
        self.components.iter().find_map(|c| {
            if c.mu == mu && c.nu == nu {
                Some(c.matrix())
            } else if c.mu == nu && c.nu == mu {
                Some(-c.matrix())
            } else {
                None
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureField {
    pub params: ModelParams,
    pub valley: Valley,
    pub q_max: f64,
    pub grid: HopfGrid,
    pub rank: usize,
    /// Row-major over (q, θ).
    pub cells: Vec<CurvatureCell>,
}

impl CurvatureField {
    /// `4π² Σ FF dq dθ`.
    pub fn integrate(&self) -> f64 {
        let terms: Vec<f64> = self.cells.iter().map(|c| FOUR_PI2 * c.chern_form * c.weight).collect();
        pairwise_sum(&terms)
    }
}

struct Axes {
    h_s: f64,
    h_theta: f64,
}

impl Axes {
    fn new(radial: &RadialMap, q_max: f64, grid: &HopfGrid) -> Self {
        Self { h_s: radial.s(q_max) / grid.n_q as f64, h_theta: FRAC_PI_2 / grid.n_theta as f64 }
    }

    /// Node `i` of the ghost-padded axis sits at `(i − 1/2) h`.
    fn s(&self, i: usize) -> f64 {
        (i as f64 - 0.5) * self.h_s
    }

    fn theta(&self, j: usize) -> f64 {
        (j as f64 - 0.5) * self.h_theta
    }
}

/// `F_qθ` and `F_φϕ` on the (q, θ) midpoint grid at `(φ, ϕ) = (0, 0)`.
pub fn chern_form_field(
    p: &ModelParams,
    valley: Valley,
    q_max: f64,
    grid: HopfGrid,
    exec: Exec,
) -> Result<CurvatureField> {
    if !(q_max > 0.0 && q_max.is_finite()) {
        return Err(invalid("q_cut", format!("must be positive, got {q_max}")));
    }
    grid.validate()?;
    let hf = HopfFrames::new(p, valley)?;
    let ax = Axes::new(&hf.radial, q_max, &grid);
    let (ns, nt) = (grid.n_q + 2, grid.n_theta + 2);
    let nodes = exec.try_map(ns * nt, |n| {
        let x = [ax.s(n / nt), ax.theta(n % nt), 0.0, 0.0];
        hf.frame(x).map_err(|e| e.at(format!("s={:.4}, θ={:.4}", x[0], x[1])))
    })?;
    let node = |i: usize, j: usize| &nodes[i * nt + j];
    let frame_fn = |x: [f64; 4]| hf.frame(x);
    let h_angle = ax.h_theta;

    let cells = exec.try_map(grid.n_q * grid.n_theta, |n| {
        let (i, j) = (n / grid.n_theta + 1, n % grid.n_theta + 1);
        let x = [ax.s(i), ax.theta(j), 0.0, 0.0];
        let st = [
            [node(i - 1, j - 1), node(i - 1, j), node(i - 1, j + 1)],
            [node(i, j - 1), node(i, j), node(i, j + 1)],
            [node(i + 1, j - 1), node(i + 1, j), node(i + 1, j + 1)],
        ];
        let f_st = match clover(st, ax.h_s, ax.h_theta) {
            Ok(f) => f,
            Err(Error::SingularLink { .. } | Error::BranchAmbiguity { .. }) => {
                curvature_at(&frame_fn, x, 0, 1, 0.5 * ax.h_s, 0.5 * ax.h_theta)?
            }
            Err(e) => return Err(e),
        };
        let dq = hf.radial.dq_ds(x[0]);
        let f_qt = f_st.unscale(dq);
        let f_pv = curvature_at(&frame_fn, x, 2, 3, h_angle, h_angle)?;
        let ff = 3.0 * (f_qt * f_pv).trace().re / FOUR_PI2;
        Ok(CurvatureCell {
            q: hf.radial.q(x[0]),
            theta: x[1],
            phi: 0.0,
            varphi: 0.0,
            weight: dq * ax.h_s * ax.h_theta,
            components: vec![
                CurvatureComponent::new(HopfAxis::Q, HopfAxis::Theta, &f_qt),
                CurvatureComponent::new(HopfAxis::Phi, HopfAxis::Varphi, &f_pv),
            ],
            chern_form: ff,
        })
    })?;
    Ok(CurvatureField { params: *p, valley, q_max, grid, rank: nodes[0].rank, cells })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChernEstimate {
    pub value: f64,
    /// Same integral at half resolution, when a convergence check was run.
    pub coarse: Option<f64>,
    pub drift: Option<f64>,
    pub q_cut: f64,
    pub grid: HopfGrid,
}

/// Relative drift between two resolutions above which integration fails.
pub const RESOLUTION_DRIFT: f64 = 1e-2;

/// Second Chern number of the + valley from the Chern form alone (a = 0).
///
/// The integral is also evaluated at half resolution; a relative drift above
/// [`RESOLUTION_DRIFT`] is reported as a resolution error.
pub fn second_chern_reduced(p: &ModelParams, q_cut: f64, grid: HopfGrid, exec: Exec) -> Result<ChernEstimate> {
    if p.a != 0.0 {
        return Err(invalid("a", "the Chern-form reduction holds only for a = 0"));
    }
    let fine = chern_form_field(p, Valley::Plus, q_cut, grid, exec)?.integrate();
    let coarse = chern_form_field(p, Valley::Plus, q_cut, grid.coarsened(), exec)?.integrate();
    let drift = (fine - coarse).abs() / fine.abs().max(1e-12);
    if drift > RESOLUTION_DRIFT {
        return Err(Error::Resolution { value_fine: fine, value_coarse: coarse, drift });
    }
    Ok(ChernEstimate { value: fine, coarse: Some(coarse), drift: Some(drift), q_cut, grid })
}

/// Second Chern number from all six curvature components on a 4D Hopf grid.
pub fn second_chern_full4d(
    p: &ModelParams,
    valley: Valley,
    q_cut: f64,
    grid: HopfGrid,
    exec: Exec,
) -> Result<ChernEstimate> {
    if !(q_cut > 0.0 && q_cut.is_finite()) {
        return Err(invalid("q_cut", format!("must be positive, got {q_cut}")));
    }
    grid.validate()?;
    let hf = HopfFrames::new(p, valley)?;
    let ax = Axes::new(&hf.radial, q_cut, &grid);
    let h_phi = 2.0 * PI / grid.n_phi as f64;
    let h_vphi = 2.0 * PI / grid.n_varphi as f64;
    let dims = [grid.n_q + 2, grid.n_theta + 2, grid.n_phi, grid.n_varphi];
    let h = [ax.h_s, ax.h_theta, h_phi, h_vphi];
    let coord = |idx: [usize; 4]| [ax.s(idx[0]), ax.theta(idx[1]), idx[2] as f64 * h_phi, idx[3] as f64 * h_vphi];
    let flat = |idx: [usize; 4]| ((idx[0] * dims[1] + idx[1]) * dims[2] + idx[2]) * dims[3] + idx[3];
    let unflat = |mut n: usize| {
        let l = n % dims[3];
        n /= dims[3];
        let k = n % dims[2];
        n /= dims[2];
        [n / dims[1], n % dims[1], k, l]
    };
    let total = dims.iter().product();
    let nodes = exec.try_map(total, |n| {
        let x = coord(unflat(n));
        hf.frame(x).map_err(|e| e.at(format!("{x:?}")))
    })?;
    // neighbour along axis `a` by `d` ∈ {-1, 0, 1}; angles wrap
    let shift = |mut idx: [usize; 4], a: usize, d: i64| {
        let n = dims[a] as i64;
        let v = idx[a] as i64 + d;
        idx[a] = if a >= 2 { v.rem_euclid(n) as usize } else { v as usize };
        idx
    };
    // forward links U(x → x + e_a); None past the padded edge or where singular
    let links: Vec<[Option<CMat2>; 4]> = exec.map(total, |n| {
        let idx = unflat(n);
        [0, 1, 2, 3].map(|a| {
            if a < 2 && idx[a] + 1 >= dims[a] {
                return None;
            }
            link(&nodes[n], &nodes[flat(shift(idx, a, 1))]).ok()
        })
    });
    drop(nodes);
    let hop = |x: [usize; 4], a: usize, d: i64| -> Option<CMat2> {
        if d > 0 {
            links[flat(x)][a]
        } else {
            links[flat(shift(x, a, -1))][a].map(|u| u.adjoint())
        }
    };
    let clover_cached = |c: [usize; 4], mu: usize, nu: usize| -> Option<CMat2> {
        let mut acc = CMat2::zeros();
        for (s1, s2) in [(1i64, 1i64), (-1, 1), (-1, -1), (1, -1)] {
            let x1 = shift(c, mu, s1);
            let x2 = shift(x1, nu, s2);
            let x3 = shift(c, nu, s2);
            let w = hop(c, mu, s1)? * hop(x1, nu, s2)? * hop(x2, mu, -s1)? * hop(x3, nu, -s2)?;
            acc += loop_flux(&w).ok()?.scale((s1 * s2) as f64);
        }
        Some(acc.unscale(4.0 * h[mu] * h[nu]))
    };
    let frame_fn = |x: [f64; 4]| hf.frame(x);
    let interior = [grid.n_q, grid.n_theta, grid.n_phi, grid.n_varphi];
    let n_cells: usize = interior.iter().product();
    let terms = exec.try_map(n_cells, |n| {
        let l = n % interior[3];
        let k = (n / interior[3]) % interior[2];
        let j = (n / (interior[3] * interior[2])) % interior[1];
        let i = n / (interior[3] * interior[2] * interior[1]);
        let c = [i + 1, j + 1, k, l];
        let mut f = [[CMat2::zeros(); 4]; 4];
        for mu in 0..4 {
            for nu in mu + 1..4 {
                f[mu][nu] = match clover_cached(c, mu, nu) {
                    Some(v) => v,
                    None => curvature_at(&frame_fn, coord(c), mu, nu, 0.5 * h[mu], 0.5 * h[nu])?,
                };
            }
        }
        let tr = |a: &CMat2, b: &CMat2| (a * b).trace().re;
        let density = (tr(&f[0][1], &f[2][3]) - tr(&f[0][2], &f[1][3]) + tr(&f[0][3], &f[1][2])) / FOUR_PI2;
        Ok(density * h.iter().product::<f64>())
    })?;
    Ok(ChernEstimate { value: pairwise_sum(&terms), coarse: None, drift: None, q_cut, grid })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffExtrapolation {
    pub q_cut: f64,
    pub c_q: f64,
    pub c_2q: f64,
    /// [`extrapolate_cutoff`] of the two.
    pub extrapolated: f64,
}

/// Radial cell count at `2 q_cut` that keeps the spacing in `s` unchanged.
fn doubled_cutoff_grid(grid: HopfGrid, m: f64, q_cut: f64) -> HopfGrid {
    let r = RadialMap { scale: m.abs() };
    let n_q = (grid.n_q as f64 * r.s(2.0 * q_cut) / r.s(q_cut)).round() as usize;
    HopfGrid { n_q, ..grid }
}

pub fn second_chern_reduced_extrapolated(
    p: &ModelParams,
    q_cut: f64,
    grid: HopfGrid,
    exec: Exec,
) -> Result<CutoffExtrapolation> {
    let c_q = second_chern_reduced(p, q_cut, grid, exec)?.value;
    let c_2q = second_chern_reduced(p, 2.0 * q_cut, doubled_cutoff_grid(grid, p.m, q_cut), exec)?.value;
    Ok(CutoffExtrapolation { q_cut, c_q, c_2q, extrapolated: extrapolate_cutoff(c_q, c_2q) })
}

pub fn second_chern_full4d_extrapolated(
    p: &ModelParams,
    valley: Valley,
    q_cut: f64,
    grid: HopfGrid,
    exec: Exec,
) -> Result<CutoffExtrapolation> {
    let c_q = second_chern_full4d(p, valley, q_cut, grid, exec)?.value;
    let g2 = doubled_cutoff_grid(grid, p.m, q_cut);
    let c_2q = second_chern_full4d(p, valley, 2.0 * q_cut, g2, exec)?.value;
    Ok(CutoffExtrapolation { q_cut, c_q, c_2q, extrapolated: extrapolate_cutoff(c_q, c_2q) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValleyChern {
    pub c2_plus: f64,
    pub c2_minus: f64,
    /// `(C₂⁺ − C₂⁻) / 2`.
    pub c2_valley: f64,
}

pub fn valley_chern(p: &ModelParams, q_cut: f64, grid: HopfGrid, exec: Exec) -> Result<ValleyChern> {
    let c2_plus = second_chern_full4d(p, Valley::Plus, q_cut, grid, exec)?.value;
    let c2_minus = second_chern_full4d(p, Valley::Minus, q_cut, grid, exec)?.value;
    Ok(ValleyChern { c2_plus, c2_minus, c2_valley: 0.5 * (c2_plus - c2_minus) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_reference_point() {
        let v = chern_form_closed(8.0, PI / 4.0, 8.0);
        let expect = 3.0 / (2f64.powf(3.5) * 8.0 * PI * PI * 8.0);
        assert!((v - expect).abs() < 1e-16);
        assert!((v - 4.19794312683659e-4).abs() < 1e-15);
        assert_eq!(chern_form_closed(3.0, 0.0, 8.0), 0.0);
        assert!(chern_form_closed(3.0, FRAC_PI_2, 8.0).abs() < 1e-18);
        assert_eq!(chern_form_closed(3.0, 0.4, 0.0), 0.0);
    }

    #[test]
    fn closed_cutoff_values() {
        assert!((second_chern_closed(200.0, 8.0) - 0.470039932915).abs() < 1e-11);
        assert!((second_chern_closed(200.0, 80.0) - 0.234263567781).abs() < 1e-11);
        assert_eq!(second_chern_closed(0.0, 8.0), 0.0);
        assert_eq!(second_chern_closed(200.0, -8.0), -second_chern_closed(200.0, 8.0));
        let ext = extrapolate_cutoff(second_chern_closed(200.0, 8.0), second_chern_closed(400.0, 8.0));
        assert!((ext - 0.5).abs() < 1e-4);
    }

    #[test]
    fn closed_antiderivative_matches_quadrature() {
        // midpoint rule in q against the antiderivative; θ integral of sinθcosθ is 1/2
        let (m, q_cut, n) = (8.0, 50.0, 200_000);
        let h = q_cut / n as f64;
        let s: f64 = (0..n).map(|i| chern_form_closed((i as f64 + 0.5) * h, PI / 4.0, m) * 2.0).sum();
        let c = FOUR_PI2 * s * h * 0.5;
        assert!((c - second_chern_closed(q_cut, m)).abs() < 1e-8, "{c}");
    }

    #[test]
    fn reduced_requires_a_zero_and_mass() {
        let g = HopfGrid::default();
        assert!(second_chern_reduced(&ModelParams::new(0.5, 0.0, 8.0), 200.0, g, Exec::Sequential).is_err());
        assert!(second_chern_reduced(&ModelParams::new(0.0, 0.0, 0.0), 200.0, g, Exec::Sequential).is_err());
    }
}
