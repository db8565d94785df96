use proptest::prelude::*;
use std::f64::consts::PI;

use xplab_core::device::{
    build_circuit_hamiltonian, lindblad_evolve, qubit_channels, CircuitSpace, Decoherence, DeviceConfig, Modulation,
    Tolerance,
};
use xplab_core::linalg::{c, eigvalsh, hermiticity_defect, CMat, CMat2};
use xplab_core::model::{
    bloch_to_couplings, couplings_to_bloch, gamma_set, hamiltonian, spectrum_analytic, spectrum_numeric,
    bloch_vector, BlochVector, Momentum, ModelParams, Valley, ValleyModel,
};
use xplab_core::topo::{
    chern_form_closed, clover, hopf_embed, occupied_frame, second_chern_closed, BandSubspace, Filling,
    DEFAULT_GAP_TOL,
};

fn angle() -> impl Strategy<Value = f64> {
    -PI..PI
}

fn momentum() -> impl Strategy<Value = Momentum> {
    [angle(), angle(), angle(), angle()].prop_map(Momentum)
}

fn unitary2(a: f64, b: f64, g: f64, d: f64) -> CMat2 {
    let (ca, sa) = (a.cos(), a.sin());
    let e = |x: f64| c(x.cos(), x.sin());
    CMat2::new(e(b) * ca, e(g) * sa, -e(-g) * sa, e(-b) * ca) * e(d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn spectrum_matches_closed_form(k in momentum(), a in -1.0..=1.0f64, lambda in -1.5..=1.5f64,
                                    v in prop::array::uniform4(0.3..2.0f64)) {
        let p = ModelParams { a, lambda, v, m: 0.0 };
        let num = spectrum_numeric(&k, &p);
        let ana = spectrum_analytic(&bloch_vector(&k, &p), a);
        let scale = ana[3].abs().max(1.0);
        for (x, y) in num.iter().zip(&ana) {
            prop_assert!((x - y).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn hamiltonian_is_hermitian_and_chiral(k in momentum(), a in -1.0..=1.0f64, lambda in -1.5..=1.5f64) {
        let h = hamiltonian(&k, &ModelParams::new(a, lambda, 0.0));
        prop_assert!((h - h.adjoint()).norm() < 1e-14);
        let g0 = gamma_set(a).g0;
        prop_assert!((g0 * h + h * g0).norm() < 1e-13);
    }

    #[test]
    fn couplings_roundtrip(d in prop::array::uniform4(-3.0..3.0f64), a in -1.0..=1.0f64) {
        let back = couplings_to_bloch(&bloch_to_couplings(&BlochVector::new(d), a), a).unwrap();
        for (x, y) in back.as_array().iter().zip(d) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn hopf_embedding_keeps_radius(q in 0.0..50.0f64, t in 0.0..PI / 2.0, p in angle(), v in angle()) {
        let x = hopf_embed([q, t, p, v]);
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        prop_assert!((r - q).abs() < 1e-12 * q.max(1.0));
    }

    #[test]
    fn chern_form_is_odd_in_mass(q in 0.01..100.0f64, t in 0.0..PI / 2.0, m in 0.1..50.0f64) {
        prop_assert_eq!(chern_form_closed(q, t, -m), -chern_form_closed(q, t, m));
        prop_assert!(chern_form_closed(q, t, m) >= 0.0);
    }

    #[test]
    fn truncated_second_chern_grows_with_cutoff(q in 1.0..500.0f64, m in 0.5..30.0f64) {
        let lo = second_chern_closed(q, m);
        let hi = second_chern_closed(2.0 * q, m);
        prop_assert!(lo < hi && hi < 0.5);
    }

    #[test]
    fn curvature_spectrum_is_gauge_invariant(q in 0.5..20.0f64, t in 0.2..1.3f64,
                                              angles in prop::collection::vec(0.0..2.0 * PI, 36)) {
        let model = ValleyModel::new(ModelParams::new(0.0, 0.0, 4.0), Valley::Plus).unwrap();
        let h = 0.05;
        let frame = |i: usize, j: usize| -> BandSubspace {
            let x = [q + (i as f64 - 1.0) * h, t + (j as f64 - 1.0) * h, 0.0, 0.0];
            occupied_frame(&model.hamiltonian(hopf_embed(x)), Filling::LowerHalf, DEFAULT_GAP_TOL).unwrap()
        };
        let plain: Vec<Vec<BandSubspace>> = (0..3).map(|i| (0..3).map(|j| frame(i, j)).collect()).collect();
        let rotated: Vec<Vec<BandSubspace>> = (0..3)
            .map(|i| (0..3).map(|j| {
                let a = &angles[4 * (3 * i + j)..];
                plain[i][j].rotated(&unitary2(a[0], a[1], a[2], a[3]))
            }).collect())
            .collect();
        let st = |f: &Vec<Vec<BandSubspace>>| -> CMat2 {
            clover([[&f[0][0], &f[0][1], &f[0][2]], [&f[1][0], &f[1][1], &f[1][2]], [&f[2][0], &f[2][1], &f[2][2]]], h, h).unwrap()
        };
        let (f0, f1) = (st(&plain), st(&rotated));
        let ev = |m: &CMat2| {
            let d = CMat::from_fn(2, 2, |r, s| m[(r, s)]);
            eigvalsh(&d)
        };
        for (x, y) in ev(&f0).iter().zip(ev(&f1)) {
            prop_assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn circuit_conserves_excitations(t in 0.0..0.01f64, amp in prop::array::uniform4(0.0..0.1f64)) {
        let mut cfg = DeviceConfig::default();
        for (j, a) in amp.iter().enumerate() {
            cfg.modulation[j] = Modulation { amplitude: *a, freq: cfg.edge_tone(j), phase: 0.3 * j as f64 };
        }
        let h = build_circuit_hamiltonian(&cfg, &cfg.qubit_freqs, t, false).unwrap();
        let space = CircuitSpace::new(false);
        let n = |i: usize| space.occupation(i).iter().sum::<usize>();
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                if n(i) != n(j) {
                    prop_assert!(h[(i, j)].norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn lindblad_preserves_trace_and_hermiticity(entries in prop::array::uniform6(-2.0..2.0f64),
                                                t1 in 1.0..40.0f64, ratio in 0.1..2.0f64) {
        let mut h = CMat::zeros(3, 3);
        h[(1, 1)] = c(entries[0], 0.0);
        h[(2, 2)] = c(entries[1], 0.0);
        h[(1, 2)] = c(entries[2], entries[3]);
        h[(2, 1)] = c(entries[2], -entries[3]);
        let dec = Decoherence { t1: [t1; 4], t2: [ratio * t1; 4] };
        let ch = qubit_channels(&dec, &[0, 1]).unwrap();
        let mut rho0 = CMat::zeros(3, 3);
        rho0[(1, 1)] = c(0.5, 0.0);
        rho0[(2, 2)] = c(0.5, 0.0);
        rho0[(1, 2)] = c(0.5 * entries[4].cos(), 0.5 * entries[4].sin());
        rho0[(2, 1)] = rho0[(1, 2)].conj();
        let drive = entries[5];
        let tr = lindblad_evolve(|t| {
            let mut m = h.clone();
            m[(1, 2)] += c(drive * (7.0 * t).cos(), 0.0);
            m[(2, 1)] += c(drive * (7.0 * t).cos(), 0.0);
            m
        }, &rho0, &ch, 0.0, 2.0, 0.25, Tolerance::default()).unwrap();
        prop_assert!(tr.max_trace_deviation < 1e-8);
        prop_assert!(tr.max_hermiticity_defect < 1e-10);
        prop_assert!(tr.min_eigenvalue > -1e-8);
        prop_assert!(hermiticity_defect(tr.states.last().unwrap()) < 1e-10);
    }
}
