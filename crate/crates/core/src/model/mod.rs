//! Momentum-space four-band model with deformable Gamma matrices.
//!
//! `H(k) = Σ_i d_i(k) Γ̃_i + m Γ̃0` with `d_i = v_i sin k_i` for `i ∈ {x,y,z}` and
//! `d_w = v_w (Λ + 3 − Σ_j cos k_j)` where the sum runs over all four axes.
//! Energies are in MHz, momenta in radians.

mod couplings;
mod gamma;
mod symmetry;

pub use couplings::{
    bloch_to_couplings, couplings_to_bloch, diamond_matrix, CouplingQuad, DIAMOND_BASIS,
};
pub use gamma::{gamma_set, GammaSet};
pub use symmetry::{symmetry_report, SymmetryReport};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::linalg::{eigvalsh4, CMat4};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Deformation of the Gamma matrices.
    #[serde(default)]
    pub a: f64,
    /// Λ, controls the monopole separation.
    #[serde(default)]
    pub lambda: f64,
    /// Fermi velocities along x, y, z, w (MHz per radian).
    #[serde(default = "default_velocity")]
    pub v: [f64; 4],
    /// Chiral-breaking mass (MHz).
    #[serde(default)]
    pub m: f64,
}

fn default_velocity() -> [f64; 4] {
    [1.0; 4]
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { a: 0.0, lambda: 0.0, v: default_velocity(), m: 0.0 }
    }
}

impl ModelParams {
    pub fn new(a: f64, lambda: f64, m: f64) -> Self {
        Self { a, lambda, m, ..Self::default() }
    }

    pub fn with_mass(self, m: f64) -> Self {
        Self { m, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.a.is_finite() {
            return Err(invalid("a", "must be finite"));
        }
        if !self.lambda.is_finite() {
            return Err(invalid("lambda", "must be finite"));
        }
        if !self.m.is_finite() {
            return Err(invalid("m", "must be finite"));
        }
        if self.v.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid("v", format!("velocities must be finite and > 0, got {:?}", self.v)));
        }
        Ok(())
    }

    /// β = √(1 − Λ²), the w-velocity renormalization at the nodes.
    pub fn beta(&self) -> Result<f64> {
        if self.lambda.abs() >= 1.0 {
            return Err(Error::MonopolesMerged { lambda: self.lambda });
        }
        Ok((1.0 - self.lambda * self.lambda).sqrt())
    }
}

/// Wrap an angle into `[−π, π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid may round up to exactly 2π
    if y >= PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// A point of the first Brillouin zone, components canonically in `[−π, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Momentum(pub [f64; 4]);

impl Momentum {
    pub fn new(k: [f64; 4]) -> Self {
        Momentum(k.map(wrap_angle))
    }

    pub fn zero() -> Self {
        Momentum([0.0; 4])
    }

    pub fn kx(&self) -> f64 {
        self.0[0]
    }

    pub fn kw(&self) -> f64 {
        self.0[3]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub dw: f64,
}

impl BlochVector {
    pub fn new(d: [f64; 4]) -> Self {
        Self { dx: d[0], dy: d[1], dz: d[2], dw: d[3] }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.dx, self.dy, self.dz, self.dw]
    }

    pub fn norm(&self) -> f64 {
        self.as_array().iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

pub fn bloch_vector(k: &Momentum, p: &ModelParams) -> BlochVector {
    let [kx, ky, kz, kw] = k.0;
    let cos_sum = kx.cos() + ky.cos() + kz.cos() + kw.cos();
    BlochVector {
        dx: p.v[0] * kx.sin(),
        dy: p.v[1] * ky.sin(),
        dz: p.v[2] * kz.sin(),
        dw: p.v[3] * (p.lambda + 3.0 - cos_sum),
    }
}

/// ∂d/∂k_j as a 4×4 Jacobian, row = component of d, column = momentum axis.
pub fn bloch_jacobian(k: &Momentum, p: &ModelParams) -> [[f64; 4]; 4] {
    let [kx, ky, kz, kw] = k.0;
    [
        [p.v[0] * kx.cos(), 0.0, 0.0, 0.0],
        [0.0, p.v[1] * ky.cos(), 0.0, 0.0],
        [0.0, 0.0, p.v[2] * kz.cos(), 0.0],
        [p.v[3] * kx.sin(), p.v[3] * ky.sin(), p.v[3] * kz.sin(), p.v[3] * kw.sin()],
    ]
}

/// Lattice model with a cached Gamma set.
#[derive(Debug, Clone)]
pub struct LatticeModel {
    pub params: ModelParams,
    pub gammas: GammaSet,
}

impl LatticeModel {
    pub fn new(params: ModelParams) -> Self {
        Self { gammas: GammaSet::new(params.a), params }
    }

    pub fn hamiltonian(&self, k: &Momentum) -> CMat4 {
        let d = bloch_vector(k, &self.params);
        self.gammas.combine(d.as_array(), self.params.m)
    }
}

pub fn hamiltonian(k: &Momentum, p: &ModelParams) -> CMat4 {
    LatticeModel::new(*p).hamiltonian(k)
}

/// ±(1+a)|d| and ±(1−a)|d|, ascending. Massless closed form.
pub fn spectrum_analytic(d: &BlochVector, a: f64) -> [f64; 4] {
    let n = d.norm();
    let mut e = [(1.0 + a) * n, -(1.0 + a) * n, (1.0 - a) * n, -(1.0 - a) * n];
    e.sort_by(f64::total_cmp);
    e
}

pub fn spectrum_numeric(k: &Momentum, p: &ModelParams) -> [f64; 4] {
    eigvalsh4(&hamiltonian(k, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Valley {
    Plus,
    Minus,
}

impl Valley {
    pub fn sign(self) -> f64 {
        match self {
            Valley::Plus => 1.0,
            Valley::Minus => -1.0,
        }
    }
}

/// Linearized Hamiltonian around `K_±`, with the mass term when `m ≠ 0`.
#[derive(Debug, Clone)]
pub struct ValleyModel {
    pub params: ModelParams,
    pub valley: Valley,
    pub gammas: GammaSet,
    scale: [f64; 4],
}

impl ValleyModel {
    pub fn new(params: ModelParams, valley: Valley) -> Result<Self> {
        params.validate()?;
        let beta = params.beta()?;
        let v = params.v;
        let scale = [v[0], v[1], v[2], valley.sign() * beta * v[3]];
        Ok(Self { params, valley, gammas: GammaSet::new(params.a), scale })
    }

    pub fn hamiltonian(&self, q: [f64; 4]) -> CMat4 {
        let coeffs = [0, 1, 2, 3].map(|i| self.scale[i] * q[i]);
        self.gammas.combine(coeffs, self.params.m)
    }

    /// ∂H/∂q_i.
    pub fn derivative(&self, axis: usize) -> CMat4 {
        self.gammas.spatial()[axis] * crate::linalg::c(self.scale[axis], 0.0)
    }
}

pub fn valley_hamiltonian(q: [f64; 4], valley: Valley, p: &ModelParams) -> Result<CMat4> {
    Ok(ValleyModel::new(*p, valley)?.hamiltonian(q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonopolePair {
    pub plus: Momentum,
    pub minus: Momentum,
    /// Half the separation along k_w, `arccos Λ`.
    pub b_w: f64,
    /// |Λ| = 1: the two nodes sit on the same point of the zone.
    pub merged: bool,
}

pub fn monopole_positions(lambda: f64) -> Result<MonopolePair> {
    if !lambda.is_finite() {
        return Err(invalid("lambda", "must be finite"));
    }
    if lambda.abs() > 1.0 {
        return Err(Error::NoNodalPoints { lambda });
    }
    let b_w = lambda.acos();
    Ok(MonopolePair {
        plus: Momentum([0.0, 0.0, 0.0, b_w]),
        minus: Momentum([0.0, 0.0, 0.0, -b_w]),
        b_w,
        merged: lambda.abs() == 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigvalsh4;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn bloch_vector_examples() {
        let p = ModelParams::default();
        let d = bloch_vector(&Momentum::new([0.0; 4]), &p);
        assert_eq!(d.as_array(), [0.0, 0.0, 0.0, -1.0]);
        let d = bloch_vector(&Momentum::new([0.0, 0.0, 0.0, PI / 2.0]), &p);
        assert!(d.norm() < 1e-15);
        let d = bloch_vector(&Momentum::new([PI / 2.0, 0.0, 0.0, PI / 2.0]), &p);
        for (x, y) in d.as_array().iter().zip([1.0, 0.0, 0.0, 1.0]) {
            assert!(close(*x, y, 1e-15));
        }
    }

    #[test]
    fn hamiltonian_examples() {
        let p = ModelParams::default();
        let h = hamiltonian(&Momentum::new([0.0, 0.0, 0.0, PI / 2.0]), &p);
        assert!(h.norm() < 1e-15);
        let e = eigvalsh4(&hamiltonian(&Momentum::new([PI / 2.0, 0.0, 0.0, PI / 2.0]), &p));
        let s = 2f64.sqrt();
        for (x, y) in e.iter().zip([-s, -s, s, s]) {
            assert!(close(*x, y, 1e-12));
        }
    }

    #[test]
    fn spectrum_analytic_examples() {
        let d = BlochVector::new([1.0, 0.0, 0.0, 0.0]);
        assert_eq!(spectrum_analytic(&d, 0.5), [-1.5, -0.5, 0.5, 1.5]);
        assert_eq!(spectrum_analytic(&d, 1.0), [-2.0, 0.0, 0.0, 2.0]);
        assert_eq!(spectrum_analytic(&BlochVector::new([0.0; 4]), 0.3), [0.0; 4]);
    }

    #[test]
    fn valley_examples() {
        let p = ModelParams::new(0.0, 0.0, 8.0);
        assert_eq!(p.beta().unwrap(), 1.0);
        let e = eigvalsh4(&valley_hamiltonian([0.0; 4], Valley::Plus, &p).unwrap());
        for (x, y) in e.iter().zip([-8.0, -8.0, 8.0, 8.0]) {
            assert!(close(*x, y, 1e-12));
        }
        // valley − equals valley + with q_w ↦ −q_w
        let q = [0.3, -1.2, 0.7, 2.1];
        let p = ModelParams::new(0.0, 0.4, 0.0);
        let em = eigvalsh4(&valley_hamiltonian(q, Valley::Minus, &p).unwrap());
        let ep = eigvalsh4(&valley_hamiltonian([q[0], q[1], q[2], -q[3]], Valley::Plus, &p).unwrap());
        for (x, y) in em.iter().zip(ep.iter()) {
            assert!(close(*x, *y, 1e-12));
        }
        assert!(matches!(
            valley_hamiltonian(q, Valley::Plus, &ModelParams::new(0.0, 1.0, 0.0)),
            Err(Error::MonopolesMerged { .. })
        ));
    }

    #[test]
    fn monopole_position_examples() {
        let mp = monopole_positions(0.0).unwrap();
        assert!(close(mp.b_w, PI / 2.0, 1e-15));
        assert_eq!(mp.plus.0, [0.0, 0.0, 0.0, PI / 2.0]);
        let mp = monopole_positions(1.0).unwrap();
        assert!(mp.merged && mp.b_w == 0.0);
        let b2 = monopole_positions((0.4 * PI).cos()).unwrap().b_w;
        let b3 = monopole_positions((0.6 * PI).cos()).unwrap().b_w;
        assert!(close(b2, 0.4 * PI, 1e-14) && close(b3, 0.6 * PI, 1e-14));
        assert!(matches!(monopole_positions(1.2), Err(Error::NoNodalPoints { .. })));
    }

    #[test]
    fn wrapping_is_canonical() {
        assert_eq!(wrap_angle(PI), -PI);
        assert_eq!(wrap_angle(-PI), -PI);
        assert!(close(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, 1e-15));
        let k = Momentum::new([7.0, -7.0, 0.1, 100.0]);
        assert!(k.0.iter().all(|x| (-PI..PI).contains(x)));
    }

    #[test]
    fn validation_rejects_nonpositive_velocity() {
        let mut p = ModelParams::default();
        p.v[2] = 0.0;
        assert!(p.validate().is_err());
        p.v[2] = 1.0;
        p.a = f64::NAN;
        assert!(p.validate().is_err());
    }
}
