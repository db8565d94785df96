//! Synthetic gauge fields and the parity-magnetic-effect response.
//!
//! A momentum-dependent energy shift `u0(k) = f(k_x − A_x)` plays the role of
//! a vector potential; the energy shift of a monopole per unit `A_x` defines
//! the magnetic field. The monopole separation `b_w(τ) = arccos Λ(τ)` changing
//! in fictitious time is the pseudo-electric field.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::fit::{linear_fit, LinearFit};
use crate::linalg::{eigvalsh4, CMat4, C64};
use crate::model::{monopole_positions, wrap_angle, LatticeModel, ModelParams, Momentum, Valley};
use crate::topo::{second_chern_reduced, HopfGrid};

/// Peak pump shift, MHz.
pub const U_MAX: f64 = 3.46;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeProfile {
    pub alpha: f64,
    #[serde(default = "default_u_max")]
    pub u_max: f64,
    #[serde(default)]
    pub a_x: f64,
}

fn default_u_max() -> f64 {
    U_MAX
}

impl GaugeProfile {
    pub fn new(alpha: f64, a_x: f64) -> Self {
        Self { alpha, u_max: U_MAX, a_x }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(invalid("alpha", format!("must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.u_max.is_finite() && self.u_max >= 0.0) {
            return Err(invalid("u_max", format!("must be finite and ≥ 0, got {}", self.u_max)));
        }
        if !self.a_x.is_finite() {
            return Err(invalid("a_x", "must be finite"));
        }
        Ok(())
    }

    /// The triangle profile `f(k_x)` before the `A_x` offset.
    pub fn profile(&self, kx: f64) -> f64 {
        let k = wrap_angle(kx);
        if k <= -0.75 * PI {
            self.alpha * (4.0 * self.u_max / PI) * (k + PI)
        } else {
            -self.alpha * (4.0 * self.u_max / (7.0 * PI)) * (k - PI)
        }
    }
}

/// `u0(k) = f(k_x − A_x)`, MHz.
pub fn gauge_shift(k: &Momentum, g: &GaugeProfile) -> f64 {
    g.profile(k.kx() - g.a_x)
}

pub fn pump_hamiltonian(k: &Momentum, p: &ModelParams, g: &GaugeProfile) -> CMat4 {
    LatticeModel::new(*p).hamiltonian(k) + CMat4::identity() * C64::new(gauge_shift(k, g), 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeLocation {
    pub k: Momentum,
    /// Mean eigenvalue at the node, MHz.
    pub energy: f64,
    /// Residual spread `E4 − E1` at the located point.
    pub spread: f64,
}

/// Minimize `f` on `[lo, hi]` by golden-section search.
fn golden<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

const SCAN: usize = 64;

/// Locate the nodal point of one valley of `H_pump` by minimizing the band
/// spread `E4 − E1`: a coarse (k_x, k_w) scan, then golden-section sweeps
/// along each axis.
///
/// The spread is used rather than a middle-band gap because the two middle
/// bands are flat and degenerate everywhere at `a = ±1`.
pub fn locate_node(p: &ModelParams, g: &GaugeProfile, valley: Valley) -> Result<NodeLocation> {
    p.validate()?;
    g.validate()?;
    monopole_positions(p.lambda)?;
    let spread = |k: [f64; 4]| {
        let e = eigvalsh4(&pump_hamiltonian(&Momentum(k), p, g));
        e[3] - e[0]
    };
    let sgn = valley.sign();
    let h = PI / SCAN as f64;
    let mut best = ([0.0; 4], f64::INFINITY);
    for i in 0..2 * SCAN {
        for j in 0..=SCAN {
            let k = [-PI + i as f64 * h, 0.0, 0.0, sgn * j as f64 * h];
            let s = spread(k);
            if s < best.1 {
                best = (k, s);
            }
        }
    }
    let mut k = best.0;
    let mut width = 2.0 * h;
    for _ in 0..4 {
        for axis in 0..4 {
            let line = |t: f64| {
                let mut y = k;
                y[axis] = t;
                spread(y)
            };
            k[axis] = golden(line, k[axis] - width, k[axis] + width, 1e-12);
        }
        width *= 0.25;
    }
    let e = eigvalsh4(&pump_hamiltonian(&Momentum(k), p, g));
    Ok(NodeLocation { k: Momentum(k), energy: e.iter().sum::<f64>() / 4.0, spread: e[3] - e[0] })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftPoint {
    pub a_x: f64,
    /// Energy shift of the + monopole relative to `A_x = 0`, MHz.
    pub delta_e: f64,
    /// `ΔE / F_Y` with unit fictitious force.
    pub y: f64,
    pub node_plus: Momentum,
    pub node_minus: Momentum,
    /// `k_w⁺ − k_w⁻`.
    pub separation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSweep {
    pub alpha: f64,
    pub points: Vec<ShiftPoint>,
    /// Fit of `A_x` against `Y`.
    pub fit: LinearFit,
    /// `B^z = −∂_Y A_x`.
    pub b_z: f64,
    /// R² below [`LINEARITY_R2`].
    pub nonlinear: bool,
}

pub const LINEARITY_R2: f64 = 0.99;

/// Unit fictitious force converting energy shifts into displacements.
pub const F_Y: f64 = 1.0;

/// The `A_x` sweep used for the magnetic-field calibration.
pub fn default_ax_sweep() -> Vec<f64> {
    vec![-PI / 2.0, -PI / 4.0, 0.0, PI / 4.0, PI / 2.0]
}

pub fn monopole_shift_vs_ax(p: &ModelParams, alpha: f64, a_x: &[f64], exec: Exec) -> Result<ShiftSweep> {
    for &v in a_x {
        if !(-PI..=PI).contains(&v) {
            return Err(invalid("a_x", format!("{v} outside one period [−π, π]")));
        }
    }
    let base = locate_node(p, &GaugeProfile::new(alpha, 0.0), Valley::Plus)?;
    let points = exec.try_map(a_x.len(), |i| {
        let g = GaugeProfile::new(alpha, a_x[i]);
        let plus = locate_node(p, &g, Valley::Plus)?;
        let minus = locate_node(p, &g, Valley::Minus)?;
        let delta_e = plus.energy - base.energy;
        Ok::<_, Error>(ShiftPoint {
            a_x: a_x[i],
            delta_e,
            y: delta_e / F_Y,
            node_plus: plus.k,
            node_minus: minus.k,
            separation: plus.k.kw() - minus.k.kw(),
        })
    })?;
    let ys: Vec<f64> = points.iter().map(|pt| pt.y).collect();
    let fit = linear_fit(&ys, a_x)?;
    Ok(ShiftSweep { alpha, points, b_z: -fit.slope, nonlinear: fit.r2 < LINEARITY_R2, fit })
}

/// `B^z` implied by the linear branch of the profile: `−7π / (4 α u_max)`.
pub fn magnetic_field_closed(g: &GaugeProfile) -> f64 {
    -7.0 * PI / (4.0 * g.alpha * g.u_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Expanding,
    Merging,
}

/// Monopole separation driven in fictitious time, `Λ(τ)` sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationSchedule {
    pub tau: Vec<f64>,
    pub lambda: Vec<f64>,
    pub direction: Direction,
    /// Field strength α used while this segment runs.
    pub alpha: f64,
}

/// Rate of `Λ(τ) = cos(0.2π τ)`.
pub const SCHEDULE_RATE: f64 = 0.2 * PI;

impl SeparationSchedule {
    pub fn from_fn(tau: Vec<f64>, direction: Direction, alpha: f64, f: impl Fn(f64) -> f64) -> Self {
        let lambda = tau.iter().map(|&t| f(t)).collect();
        Self { tau, lambda, direction, alpha }
    }

    fn cosine(t0: f64, t1: f64, direction: Direction, alpha: f64) -> Self {
        let n = ((t1 - t0) / 0.5).round() as usize;
        let tau = (0..=n).map(|i| t0 + 0.5 * i as f64).collect();
        Self::from_fn(tau, direction, alpha, |t| (SCHEDULE_RATE * t).cos())
    }

    /// τ ∈ [0, 5]: nodes leave `k_w = 0` and separate.
    pub fn expanding(alpha: f64) -> Self {
        Self::cosine(0.0, 5.0, Direction::Expanding, alpha)
    }

    /// τ ∈ [6, 10]: nodes approach from the zone boundary and merge.
    pub fn merging(alpha: f64) -> Self {
        Self::cosine(6.0, 10.0, Direction::Merging, alpha)
    }

    /// The three fictitious modulations: expanding (α = 1), merging (α = 1),
    /// expanding (α = 0.5).
    pub fn standard_segments() -> Vec<Self> {
        vec![Self::expanding(1.0), Self::merging(1.0), Self::expanding(0.5)]
    }

    pub fn b_w(&self) -> Result<Vec<f64>> {
        self.lambda
            .iter()
            .map(|&l| {
                if !(-1.0..=1.0).contains(&l) {
                    Err(Error::NoNodalPoints { lambda: l })
                } else {
                    Ok(l.acos())
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct E5Sample {
    pub tau_mid: f64,
    pub b_w_start: f64,
    pub b_w_end: f64,
    /// `Δb_w / Δτ` over the interval.
    pub e5_w: f64,
}

/// `E5^w = ∂_τ b_w` per interval of the schedule.
pub fn pseudo_electric_field(s: &SeparationSchedule) -> Result<Vec<E5Sample>> {
    if s.tau.len() != s.lambda.len() || s.tau.len() < 2 {
        return Err(invalid("schedule", "need ≥ 2 (τ, Λ) samples of equal length"));
    }
    let b = s.b_w()?;
    let sign = match s.direction {
        Direction::Expanding => 1.0,
        Direction::Merging => -1.0,
    };
    let mut out = Vec::with_capacity(b.len() - 1);
    for i in 0..b.len() - 1 {
        let dt = s.tau[i + 1] - s.tau[i];
        if dt <= 0.0 {
            return Err(invalid("tau", format!("grid must increase, got {} then {}", s.tau[i], s.tau[i + 1])));
        }
        let db = b[i + 1] - b[i];
        if db * sign < 0.0 {
            return Err(Error::NonMonotoneSchedule { tau: s.tau[i] });
        }
        out.push(E5Sample { tau_mid: 0.5 * (s.tau[i] + s.tau[i + 1]), b_w_start: b[i], b_w_end: b[i + 1], e5_w: db / dt });
    }
    Ok(out)
}

/// `J^z = C₂ E5^w B^z / 2π²`.
pub fn topological_current(c2: f64, e5: f64, bz: f64) -> f64 {
    c2 * e5 * bz / (2.0 * PI * PI)
}

/// `J5^z = C₂,v E^z B^z / 4π²`.
pub fn valley_current(c2v: f64, ez: f64, bz: f64) -> f64 {
    c2v * ez * bz / (4.0 * PI * PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub b_z: f64,
    pub e5_w: f64,
    pub c2: f64,
    pub j_z: f64,
}

impl ResponseRecord {
    pub fn new(c2: f64, e5_w: f64, b_z: f64) -> Self {
        Self { b_z, e5_w, c2, j_z: topological_current(c2, e5_w, b_z) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YangCharge {
    pub c2_neg: f64,
    pub c2_pos: f64,
    /// `C₂(m₊) − C₂(m₋)`.
    pub delta: f64,
}

/// Jump of the valley-+ second Chern number across the mass transition.
pub fn yang_charge(p: &ModelParams, m_neg: f64, m_pos: f64, q_cut: f64, grid: HopfGrid, exec: Exec) -> Result<YangCharge> {
    if !(m_neg < 0.0 && m_pos > 0.0) {
        return Err(invalid("m", format!("need m_neg < 0 < m_pos, got {m_neg}, {m_pos}")));
    }
    let c2_neg = second_chern_reduced(&p.with_mass(m_neg), q_cut, grid, exec)?.value;
    let c2_pos = second_chern_reduced(&p.with_mass(m_pos), q_cut, grid, exec)?.value;
    Ok(YangCharge { c2_neg, c2_pos, delta: c2_pos - c2_neg })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_examples() {
        let g = GaugeProfile::new(1.0, 0.0);
        assert!((g.profile(-0.75 * PI) - U_MAX).abs() < 1e-12);
        assert!(g.profile(PI).abs() < 1e-12 && g.profile(-PI).abs() < 1e-12);
        let h = GaugeProfile::new(0.5, 0.0);
        assert!((gauge_shift(&Momentum::zero(), &h) - 2.0 * U_MAX / 7.0).abs() < 1e-12);
    }

    #[test]
    fn branches_agree_at_seams() {
        let g = GaugeProfile::new(0.8, 0.0);
        let left = 0.8 * (4.0 * U_MAX / PI) * (-0.75 * PI + PI);
        let right = -0.8 * (4.0 * U_MAX / (7.0 * PI)) * (-0.75 * PI - PI);
        assert!((left - right).abs() < 1e-12);
        assert!((g.profile(PI - 1e-15) - g.profile(-PI)).abs() < 1e-12);
    }

    #[test]
    fn current_examples() {
        assert!((topological_current(0.5, SCHEDULE_RATE, 1.0) - 1.0 / (20.0 * PI)).abs() < 1e-15);
        assert_eq!(topological_current(0.5, SCHEDULE_RATE, 0.0), 0.0);
        assert!((valley_current(0.5, 1.0, 1.0) - 0.5 / (4.0 * PI * PI)).abs() < 1e-15);
    }

    #[test]
    fn expanding_schedule_has_constant_field() {
        let e = pseudo_electric_field(&SeparationSchedule::expanding(1.0)).unwrap();
        assert_eq!(e.len(), 10);
        for s in &e {
            assert!((s.e5_w - SCHEDULE_RATE).abs() < 1e-12);
        }
        let m = pseudo_electric_field(&SeparationSchedule::merging(1.0)).unwrap();
        for s in &m {
            assert!((s.e5_w + SCHEDULE_RATE).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_lambda_has_zero_field_and_bad_direction_is_rejected() {
        let s = SeparationSchedule::from_fn(vec![0.0, 1.0, 2.0], Direction::Expanding, 1.0, |_| 0.3);
        assert!(pseudo_electric_field(&s).unwrap().iter().all(|e| e.e5_w == 0.0));
        let grow = SeparationSchedule::from_fn(vec![0.0, 1.0, 2.0], Direction::Expanding, 1.0, |t| t.cos());
        assert!(pseudo_electric_field(&grow).is_ok());
        let flip = SeparationSchedule::from_fn(vec![0.0, 1.0, 2.0], Direction::Merging, 1.0, |t| t.cos());
        assert!(matches!(pseudo_electric_field(&flip), Err(Error::NonMonotoneSchedule { .. })));
    }

    #[test]
    fn node_sits_at_monopole_with_shifted_energy() {
        let p = ModelParams::new(0.5, 0.0, 0.0);
        let g = GaugeProfile::new(1.0, -PI / 4.0);
        let n = locate_node(&p, &g, Valley::Plus).unwrap();
        assert!(n.k.kx().abs() < 1e-8 && (n.k.kw() - PI / 2.0).abs() < 1e-8, "{:?}", n.k);
        assert!((n.energy - g.profile(PI / 4.0)).abs() < 1e-8);
    }
}
