//! Small dense complex linear algebra used throughout the crate.
//!
//! Everything here works on `nalgebra` matrices with `Complex<f64>` entries.
//! Hermitian eigensolves are sorted ascending and phase-fixed so that frames
//! are reproducible run to run.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CMat4 = Matrix4<C64>;
pub type CMat2 = Matrix2<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Pauli matrices σ0..σ3.
pub fn pauli(k: usize) -> CMat2 {
    match k {
        0 => CMat2::new(ONE, ZERO, ZERO, ONE),
        1 => CMat2::new(ZERO, ONE, ONE, ZERO),
        2 => CMat2::new(ZERO, -I, I, ZERO),
        3 => CMat2::new(ONE, ZERO, ZERO, -ONE),
        _ => panic!("pauli index {k} out of range"),
    }
}

/// Kronecker product with the first factor forming the outer 2×2 blocks.
pub fn kron2(outer: &CMat2, inner: &CMat2) -> CMat4 {
    let mut out = CMat4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k, 2 * j + l)] = outer[(i, j)] * inner[(k, l)];
                }
            }
        }
    }
    out
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn to_dyn4(m: &CMat4) -> CMat {
    CMat::from_fn(4, 4, |i, j| m[(i, j)])
}

/// Frobenius norm of `a - a†`, relative to the norm of `a` (or absolute if `a ≈ 0`).
pub fn hermiticity_defect(a: &CMat) -> f64 {
    let d = (a - a.adjoint()).norm();
    let n = a.norm();
    if n > 0.0 {
        d / n
    } else {
        d
    }
}

/// Multiply the column so that its largest-magnitude component is real and positive.
///
/// Ties (within 1e-9 relative) go to the lowest index.
pub fn fix_phase(col: &mut DVector<C64>) {
    let mut best = 0usize;
    let mut best_mag = -1.0;
    for (i, z) in col.iter().enumerate() {
        let mag = z.norm();
        if mag > best_mag * (1.0 + 1e-9) {
            best = i;
            best_mag = mag;
        }
    }
    if best_mag > 0.0 {
        let z = col[best];
        let phase = z.conj() / z.norm();
        col.iter_mut().for_each(|x| *x *= phase);
    }
}

/// Hermitian eigensolve, eigenvalues ascending, every eigenvector phase-fixed.
pub fn eigh(h: &CMat) -> (Vec<f64>, CMat) {
    let n = h.nrows();
    // symmetrize to kill roundoff asymmetry before the solver sees it
    let hs = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(hs);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut vals = Vec::with_capacity(n);
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vals.push(eig.eigenvalues[src]);
        let mut col: DVector<C64> = eig.eigenvectors.column(src).into_owned();
        fix_phase(&mut col);
        vecs.set_column(dst, &col);
    }
    (vals, vecs)
}

pub fn eigvalsh(h: &CMat) -> Vec<f64> {
    let hs = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let mut v: Vec<f64> = SymmetricEigen::new(hs).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn eigh4(h: &CMat4) -> (Vec<f64>, CMat) {
    eigh(&to_dyn4(h))
}

pub fn eigvalsh4(h: &CMat4) -> [f64; 4] {
    let v = eigvalsh(&to_dyn4(h));
    [v[0], v[1], v[2], v[3]]
}

/// Smallest eigenvalue of a 2×2 Hermitian matrix.
fn herm2_min_eig(a: &CMat2) -> f64 {
    let tr = a[(0, 0)].re + a[(1, 1)].re;
    let det = a[(0, 0)].re * a[(1, 1)].re - a[(0, 1)].norm_sqr();
    0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt())
}

/// Unitary polar factor of a 2×2 matrix, `M (M†M)^{-1/2}`.
///
/// Returns the unitary factor and the smallest singular value of `m`.
pub fn polar2(m: &CMat2) -> (CMat2, f64) {
    let a = m.adjoint() * m;
    let smin2 = herm2_min_eig(&a).max(0.0);
    let det = (a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)]).re.max(0.0);
    let sdet = det.sqrt();
    let tr = a[(0, 0)].re + a[(1, 1)].re;
    let denom = (tr + 2.0 * sdet).sqrt();
    if denom == 0.0 {
        return (CMat2::identity(), 0.0);
    }
    // sqrt of a 2×2 PSD matrix: (A + √det I) / √(tr A + 2√det)
    let sqrt_a = (a + CMat2::identity() * C64::new(sdet, 0.0)) / C64::new(denom, 0.0);
    match sqrt_a.try_inverse() {
        Some(inv) => (m * inv, smin2.sqrt()),
        None => (CMat2::identity(), 0.0),
    }
}

/// Principal logarithm of a 2×2 unitary matrix.
///
/// Returns `(log U, max |arg λ|)`; the second value lets callers flag loops
/// whose eigenphases sit near the branch cut at ±π.
pub fn log_unitary2(u: &CMat2) -> (CMat2, f64) {
    let tr = u[(0, 0)] + u[(1, 1)];
    let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
    let disc = (tr * tr - det * 4.0).sqrt();
    let l1 = (tr + disc) * 0.5;
    let l2 = (tr - disc) * 0.5;
    let ln = |z: C64| C64::new(z.norm().ln(), z.arg());
    let max_arg = l1.arg().abs().max(l2.arg().abs());
    let id = CMat2::identity();
    let diff = l1 - l2;
    let f1 = ln(l1);
    let f2 = ln(l2);
    // f(U) = f(λ2) I + [f(λ1) - f(λ2)] / (λ1 - λ2) (U - λ2 I)
    let dd = if diff.norm() > 1e-7 {
        (f1 - f2) / diff
    } else {
        // divided difference → derivative of log at the midpoint
        let mid = (l1 + l2) * 0.5;
        let mut d = ONE / mid;
        d -= diff * diff / (mid * mid * mid) / 12.0;
        d
    };
    (id * f2 + (u - id * l2) * dd, max_arg)
}

/// `exp(-i 2π H dt)` for a Hermitian matrix via its eigendecomposition.
pub fn expm_herm(h: &CMat, scale: f64) -> CMat {
    let (vals, vecs) = eigh(h);
    let n = vals.len();
    let mut d = CMat::zeros(n, n);
    for (i, e) in vals.iter().enumerate() {
        d[(i, i)] = C64::from_polar(1.0, -e * scale);
    }
    &vecs * d * vecs.adjoint()
}

/// Nearest unitary to `m` (polar factor) via SVD.
pub fn polar(m: &CMat) -> CMat {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    u * vt
}

/// Principal matrix logarithm of a (near-)unitary matrix via complex Schur form.
///
/// The Schur form of a normal matrix is diagonal, so this is exact up to the
/// non-normality of the input.
pub fn log_unitary(u: &CMat) -> CMat {
    let schur = nalgebra::linalg::Schur::new(u.clone());
    let (q, t) = schur.unpack();
    let n = t.nrows();
    let mut d = CMat::zeros(n, n);
    for i in 0..n {
        let z = t[(i, i)];
        d[(i, i)] = C64::new(z.norm().ln(), z.arg());
    }
    &q * d * q.adjoint()
}

/// Pairwise (cascade) summation; deterministic for a given input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
