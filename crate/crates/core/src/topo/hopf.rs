use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{invalid, Result};

/// Hopf coordinates of a 4-vector:
/// `(q cosθ cosφ, q cosθ sinφ, q sinθ cosϕ, q sinθ sinϕ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfPoint {
    pub q: f64,
    pub theta: f64,
    pub phi: f64,
    pub varphi: f64,
}

impl HopfPoint {
    pub fn new(q: f64, theta: f64, phi: f64, varphi: f64) -> Result<Self> {
        if !(q >= 0.0 && q.is_finite()) {
            return Err(invalid("q", format!("radial momentum must be ≥ 0, got {q}")));
        }
        if !(0.0..=FRAC_PI_2).contains(&theta) {
            return Err(invalid("theta", format!("must lie in [0, π/2], got {theta}")));
        }
        if !(0.0..2.0 * PI).contains(&phi) {
            return Err(invalid("phi", format!("must lie in [0, 2π), got {phi}")));
        }
        if !(0.0..2.0 * PI).contains(&varphi) {
            return Err(invalid("varphi", format!("must lie in [0, 2π), got {varphi}")));
        }
        Ok(Self { q, theta, phi, varphi })
    }

    pub fn to_cartesian(&self) -> [f64; 4] {
        hopf_embed([self.q, self.theta, self.phi, self.varphi])
    }
}

/// The Hopf embedding without range checks; smooth through q < 0 and θ
/// outside [0, π/2], which the lattice stencils use as ghost points.
///
/// The chart `(q, θ, φ, ϕ)` has Jacobian `−q³ sinθ cosθ`, i.e. opposite
/// orientation to Cartesian `(q_x, q_y, q_z, q_w)`.
pub fn hopf_embed(x: [f64; 4]) -> [f64; 4] {
    let [q, t, p, v] = x;
    let (st, ct) = t.sin_cos();
    let (sp, cp) = p.sin_cos();
    let (sv, cv) = v.sin_cos();
    [q * ct * cp, q * ct * sp, q * st * cv, q * st * sv]
}

/// `∂(q_x, q_y, q_z, q_w)/∂(q, θ, φ, ϕ)`; row `a`, column `μ`.
pub fn hopf_jacobian(x: [f64; 4]) -> [[f64; 4]; 4] {
    let [q, t, p, v] = x;
    let (st, ct) = t.sin_cos();
    let (sp, cp) = p.sin_cos();
    let (sv, cv) = v.sin_cos();
    [
        [ct * cp, -q * st * cp, -q * ct * sp, 0.0],
        [ct * sp, -q * st * sp, q * ct * cp, 0.0],
        [st * cv, q * ct * cv, 0.0, -q * st * sv],
        [st * sv, q * ct * sv, 0.0, q * st * cv],
    ]
}

/// Geometric radial coordinate `q = scale · sinh(s)`.
///
/// Uniform in `s`, the grid is linear below `scale` and exponential above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialMap {
    pub scale: f64,
}

impl RadialMap {
    pub fn q(&self, s: f64) -> f64 {
        self.scale * s.sinh()
    }

    pub fn dq_ds(&self, s: f64) -> f64 {
        self.scale * s.cosh()
    }

    pub fn s(&self, q: f64) -> f64 {
        (q / self.scale).asinh()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_preserves_norm() {
        for &(q, t, p, v) in &[(1.0, 0.3, 1.0, 5.0), (8.0, 0.0, 0.0, 0.0), (200.0, 1.5, 6.0, 2.0)] {
            let x = HopfPoint::new(q, t, p, v).unwrap().to_cartesian();
            let n = x.iter().map(|c| c * c).sum::<f64>().sqrt();
            assert!((n - q).abs() < 1e-12 * q.max(1.0));
        }
    }

    #[test]
    fn range_checks() {
        assert!(HopfPoint::new(-1.0, 0.0, 0.0, 0.0).is_err());
        assert!(HopfPoint::new(1.0, 2.0, 0.0, 0.0).is_err());
        assert!(HopfPoint::new(1.0, 0.0, 2.0 * PI, 0.0).is_err());
    }

    #[test]
    fn chart_is_negatively_oriented() {
        // numeric Jacobian determinant of the embedding
        let x0 = [1.7, 0.4, 0.9, 2.2];
        let h = 1e-6;
        let mut jac = nalgebra::Matrix4::<f64>::zeros();
        for j in 0..4 {
            let mut xp = x0;
            let mut xm = x0;
            xp[j] += h;
            xm[j] -= h;
            let (fp, fm) = (hopf_embed(xp), hopf_embed(xm));
            for i in 0..4 {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let expect = -x0[0].powi(3) * x0[1].sin() * x0[1].cos();
        assert!((jac.determinant() - expect).abs() < 1e-6, "{}", jac.determinant());
    }

    #[test]
    fn jacobian_matches_differences() {
        let x0 = [2.3, 0.7, 1.1, 4.0];
        let jac = hopf_jacobian(x0);
        let h = 1e-6;
        for mu in 0..4 {
            let (mut xp, mut xm) = (x0, x0);
            xp[mu] += h;
            xm[mu] -= h;
            let (fp, fm) = (hopf_embed(xp), hopf_embed(xm));
            for a in 0..4 {
                assert!((jac[a][mu] - (fp[a] - fm[a]) / (2.0 * h)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn radial_map_roundtrip() {
        let r = RadialMap { scale: 8.0 };
        assert!((r.q(r.s(200.0)) - 200.0).abs() < 1e-10);
        assert!((r.dq_ds(0.0) - 8.0).abs() < 1e-15);
    }
}
