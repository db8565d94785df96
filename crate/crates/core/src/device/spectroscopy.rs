//! Energy spectroscopy along a momentum path.
//!
//! The effective source reports the four eigenvalues of the lattice model.
//! The device source calibrates the Floquet drive at every point, sums unit
//! Lorentzians at the eigenvalues of the extracted generator (a weak local
//! probe on each qubit gives every eigenstate unit weight) and reports the
//! resolved absorption peaks.

use serde::{Deserialize, Serialize};

use super::config::DeviceConfig;
use super::floquet::{floquet_effective_hamiltonian, FloquetOptions};
use crate::error::{invalid, Result};
use crate::exec::Exec;
use crate::linalg::eigvalsh4;
use crate::model::{bloch_to_couplings, bloch_vector, spectrum_numeric, Momentum, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    /// Distance along the path.
    pub coord: f64,
    pub k: Momentum,
}

/// `n` evenly spaced points from `start` to `end` inclusive.
pub fn k_path(start: Momentum, end: Momentum, n: usize) -> Result<Vec<PathPoint>> {
    if n < 2 {
        return Err(invalid("path", "need at least two points"));
    }
    let len = start.0.iter().zip(&end.0).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt();
    Ok((0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            let k = std::array::from_fn(|a| start.0[a] + t * (end.0[a] - start.0[a]));
            PathPoint { coord: t * len, k: Momentum(k) }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSettings {
    /// Coupling magnitude (MHz) of the largest target along the path.
    pub scale: f64,
    /// Lorentzian half width, MHz.
    pub linewidth: f64,
    /// Frequency grid step, MHz.
    pub resolution: f64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self { scale: 5.0, linewidth: 0.3, resolution: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(clippy::large_enum_variant)]
pub enum SpectroscopySource {
    Effective(ModelParams),
    Device { cfg: DeviceConfig, params: ModelParams, probe: ProbeSettings },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub coord: f64,
    pub k: Momentum,
    /// Eigenvalues (effective) or peak centres (device), model units, ascending.
    pub levels: Vec<f64>,
}

/// Group ascending `levels` closer than `tol` and return the group means.
pub fn distinct_levels(levels: &[f64], tol: f64) -> Vec<f64> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for &e in levels {
        match out.last_mut() {
            Some((sum, n)) if (e - *sum / *n as f64).abs() <= tol => {
                *sum += e;
                *n += 1;
            }
            _ => out.push((e, 1)),
        }
    }
    out.into_iter().map(|(s, n)| s / n as f64).collect()
}

/// Local maxima of `Σ_n γ² / ((ω − E_n)² + γ²)`, refined by a parabola.
pub fn absorption_peaks(energies: &[f64], linewidth: f64, resolution: f64) -> Vec<f64> {
    let lo = energies.iter().copied().fold(f64::INFINITY, f64::min) - 5.0 * linewidth;
    let hi = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 5.0 * linewidth;
    let n = ((hi - lo) / resolution).ceil() as usize + 1;
    let g2 = linewidth * linewidth;
    let a = |w: f64| energies.iter().map(|e| g2 / ((w - e).powi(2) + g2)).sum::<f64>();
    let ys: Vec<f64> = (0..n).map(|i| a(lo + i as f64 * resolution)).collect();
    let mut peaks = Vec::new();
    for i in 1..n - 1 {
        if ys[i] > ys[i - 1] && ys[i] >= ys[i + 1] {
            let den = ys[i - 1] - 2.0 * ys[i] + ys[i + 1];
            let off = if den != 0.0 { 0.5 * (ys[i - 1] - ys[i + 1]) / den } else { 0.0 };
            peaks.push(lo + (i as f64 + off) * resolution);
        }
    }
    peaks
}

pub fn spectroscopy_scan(source: &SpectroscopySource, path: &[PathPoint], exec: Exec) -> Result<Vec<ScanPoint>> {
    match source {
        SpectroscopySource::Effective(p) => {
            p.validate()?;
            Ok(exec.map(path.len(), |i| {
                let pt = path[i];
                ScanPoint { coord: pt.coord, k: pt.k, levels: spectrum_numeric(&pt.k, p).to_vec() }
            }))
        }
        SpectroscopySource::Device { cfg, params, probe } => {
            params.validate()?;
            cfg.validate()?;
            if params.m != 0.0 {
                return Err(invalid("m", "device spectroscopy implements the massless model only"));
            }
            if !(probe.scale > 0.0 && probe.linewidth > 0.0 && probe.resolution > 0.0) {
                return Err(invalid("probe", "scale, linewidth and resolution must be positive"));
            }
            let quads: Vec<_> = path.iter().map(|pt| bloch_to_couplings(&bloch_vector(&pt.k, params), params.a)).collect();
            let largest = quads.iter().map(|q| q.max_abs()).fold(0.0, f64::max);
            let units = if largest > 0.0 { probe.scale / largest } else { 1.0 };
            let opts = FloquetOptions { scale: Some(probe.scale), ..Default::default() };
            exec.try_map(path.len(), |i| {
                let r = floquet_effective_hamiltonian(cfg, &quads[i].scaled(units), opts)?;
                let e = eigvalsh4(&r.h_eff);
                let levels = absorption_peaks(&e, probe.linewidth, probe.resolution).into_iter().map(|w| w / units).collect();
                Ok(ScanPoint { coord: path[i].coord, k: path[i].k, levels })
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn kw_path(n: usize) -> Vec<PathPoint> {
        k_path(Momentum([0.0, 0.0, 0.0, -PI]), Momentum([0.0, 0.0, 0.0, PI]), n).unwrap()
    }

    #[test]
    fn massless_branches_cross_at_the_monopoles() {
        let scan = spectroscopy_scan(&SpectroscopySource::Effective(ModelParams::default()), &kw_path(401), Exec::Sequential)
            .unwrap();
        for s in &scan {
            assert!((s.levels[0] - s.levels[1]).abs() < 1e-9 && (s.levels[2] - s.levels[3]).abs() < 1e-9);
        }
        let node = |target: f64| {
            let s = scan.iter().min_by(|a, b| (a.k.kw() - target).abs().total_cmp(&(b.k.kw() - target).abs())).unwrap();
            (s.k.kw(), s.levels[3])
        };
        for t in [-FRAC_PI_2, FRAC_PI_2] {
            let (kw, e) = node(t);
            assert!((kw - t).abs() < 1e-2 && e.abs() < 1e-9);
        }
    }

    #[test]
    fn flat_band_leaves_three_levels() {
        let p = ModelParams { a: 1.0, ..ModelParams::default() };
        let scan = spectroscopy_scan(&SpectroscopySource::Effective(p), &kw_path(21), Exec::Sequential).unwrap();
        for s in scan.iter().filter(|s| s.levels[3] > 1e-3) {
            assert_eq!(distinct_levels(&s.levels, 1e-9).len(), 3);
        }
    }

    #[test]
    fn slope_ratio_near_node() {
        let p = ModelParams { a: 0.5, ..ModelParams::default() };
        let h = 1e-4;
        let path = k_path(Momentum([0.0, 0.0, 0.0, FRAC_PI_2]), Momentum([0.0, 0.0, 0.0, FRAC_PI_2 + h]), 2).unwrap();
        let scan = spectroscopy_scan(&SpectroscopySource::Effective(p), &path, Exec::Sequential).unwrap();
        let de: Vec<f64> = (0..4).map(|i| scan[1].levels[i] - scan[0].levels[i]).collect();
        assert!((de[3] / de[2] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn peaks_resolve_separated_lines() {
        let p = absorption_peaks(&[-2.0, -1.0, 1.0, 1.0], 0.1, 0.005);
        assert_eq!(p.len(), 3);
        assert!((p[1] + 1.0).abs() < 0.01 && (p[2] - 1.0).abs() < 0.01);
    }

    #[test]
    fn device_peaks_follow_the_model() {
        let p = ModelParams::default();
        let path = k_path(Momentum([0.0, 0.0, 0.0, 0.3]), Momentum([0.0, 0.0, 0.0, 1.2]), 3).unwrap();
        let source = SpectroscopySource::Device { cfg: DeviceConfig::default(), params: p, probe: ProbeSettings::default() };
        let scan = spectroscopy_scan(&source, &path, Exec::Sequential).unwrap();
        for s in &scan {
            let exact = distinct_levels(&spectrum_numeric(&s.k, &p), 1e-9);
            assert_eq!(s.levels.len(), exact.len());
            for (a, b) in s.levels.iter().zip(&exact) {
                assert!((a - b).abs() < 0.05 * exact.last().unwrap().abs(), "{a} vs {b}");
            }
        }
    }
}
