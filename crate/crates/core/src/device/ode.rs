//! Integrators for `dψ/dt = f(t, ψ)` over complex state vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

/// Classical RK4 for the propagator `dU/dt = −2πi H(t) U` on `[t0, t1]`.
pub fn propagate_rk4<F>(h: F, dim: usize, t0: f64, t1: f64, steps: usize) -> CMat
where
    F: Fn(f64) -> CMat,
{
    let mut u = CMat::identity(dim, dim);
    let dt = (t1 - t0) / steps as f64;
    let k = C64::new(0.0, -2.0 * std::f64::consts::PI);
    for n in 0..steps {
        let t = t0 + n as f64 * dt;
        let hm = h(t + 0.5 * dt);
        let (h0, h1) = (h(t), h(t + dt));
        let k1 = (&h0 * &u) * k;
        let k2 = (&hm * (&u + &k1 * C64::from(0.5 * dt))) * k;
        let k3 = (&hm * (&u + &k2 * C64::from(0.5 * dt))) * k;
        let k4 = (&h1 * (&u + &k3 * C64::from(dt))) * k;
        u += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * C64::from(dt / 6.0);
    }
    u
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-10, max_steps: 2_000_000 }
    }
}

// Dormand–Prince 5(4) tableau
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive Dormand–Prince integration from `t0` to `t1`.
///
/// `observe(t, y)` is called after every accepted step (and at `t0`).
/// `max_dt` caps the step so that features of the drive are resolved.
pub fn dopri45<F, O>(
    f: F,
    y0: &[C64],
    t0: f64,
    t1: f64,
    max_dt: f64,
    tol: Tolerance,
    mut observe: O,
) -> Result<Vec<C64>>
where
    F: Fn(f64, &[C64], &mut [C64]),
    O: FnMut(f64, &[C64]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let span = t1 - t0;
    let mut dt = (span / 100.0).min(max_dt);
    let mut k: Vec<Vec<C64>> = vec![vec![C64::default(); n]; 7];
    let mut tmp = vec![C64::default(); n];
    let mut y5 = vec![C64::default(); n];
    observe(t, &y);
    f(t, &y, &mut k[0]);
    let mut steps = 0;
    while t < t1 {
        if steps > tol.max_steps || dt < 1e-14 * span.abs().max(1e-300) {
            return Err(Error::StepSize { t, dt });
        }
        steps += 1;
        let h = dt.min(t1 - t);
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (r, a) in A[s].iter().enumerate().take(s) {
                    if *a != 0.0 {
                        acc += k[r][i] * (h * a);
                    }
                }
                tmp[i] = acc;
            }
            f(t + C[s] * h, &tmp, &mut k[s]);
        }
        let mut err: f64 = 0.0;
        for i in 0..n {
            let mut s5 = y[i];
            let mut e = C64::default();
            for s in 0..7 {
                s5 += k[s][i] * (h * B5[s]);
                e += k[s][i] * (h * (B5[s] - B4[s]));
            }
            y5[i] = s5;
            let sc = tol.atol + tol.rtol * y[i].norm().max(s5.norm());
            err = err.max(e.norm() / sc);
        }
        if err <= 1.0 {
            t += h;
            std::mem::swap(&mut y, &mut y5);
            // FSAL: last stage is f(t+h, y5)
            k.swap(0, 6);
            observe(t, &y);
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        dt = (h * fac).min(max_dt);
        if err > 1.0 && !err.is_finite() {
            dt = h * 0.2;
        }
    }
    Ok(y)
}
