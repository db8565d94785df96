use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use xplab_core::device::{
    ats_dressing, build_circuit_hamiltonian, effective_coupling, pump_rabi_for, CircuitSpace, DeviceConfig,
};
use xplab_core::linalg::{c, eigvalsh4, kron2, pauli, CMat4, C64};
use xplab_core::model::{
    bloch_to_couplings, bloch_vector, diamond_matrix, gamma_set, hamiltonian, monopole_positions, spectrum_analytic,
    symmetry_report, valley_hamiltonian, BlochVector, CouplingQuad, Momentum, ModelParams, Valley,
};
use xplab_core::pme::{
    gauge_shift, pseudo_electric_field, topological_current, yang_charge, GaugeProfile, SeparationSchedule,
    SCHEDULE_RATE, U_MAX,
};
use xplab_core::topo::{
    chern_form_closed, occupied_frame, second_chern_closed, second_chern_full4d, second_chern_reduced,
    valley_chern, Filling, HopfGrid, DEFAULT_GAP_TOL,
};
use xplab_core::Exec;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn gamma_examples() {
    let g0 = gamma_set(0.0);
    assert!((g0.gx - kron2(&pauli(0), &pauli(1))).norm() < 1e-15);
    for a in [-1.0, -0.3, 0.0, 0.5, 1.0] {
        let g = gamma_set(a);
        assert!((g.g0 * g.gx + g.gx * g.g0).norm() < 1e-15);
    }
    let g = gamma_set(0.5);
    let expect = CMat4::identity() * c(1.25, 0.0) + kron2(&pauli(1), &pauli(1));
    assert!((g.gx * g.gx - expect).norm() < 1e-14);
}

#[test]
fn bloch_and_spectrum_examples() {
    let p = ModelParams::default();
    let d = bloch_vector(&Momentum([PI / 2.0, 0.0, 0.0, PI / 2.0]), &p);
    assert!(close(d.dx, 1.0, 1e-15) && close(d.dw, 1.0, 1e-15));
    let e = eigvalsh4(&hamiltonian(&Momentum([PI / 2.0, 0.0, 0.0, PI / 2.0]), &p));
    let r2 = 2f64.sqrt();
    for (x, y) in e.iter().zip([-r2, -r2, r2, r2]) {
        assert!(close(*x, y, 1e-12));
    }
    let unit = BlochVector::new([1.0, 0.0, 0.0, 0.0]);
    assert_eq!(spectrum_analytic(&unit, 0.5), [-1.5, -0.5, 0.5, 1.5]);
    assert_eq!(spectrum_analytic(&unit, 1.0), [-2.0, 0.0, 0.0, 2.0]);
    let h = hamiltonian(&Momentum([0.3, -1.1, 2.0, 0.7]), &p);
    let g0 = gamma_set(0.0).g0;
    assert!((g0 * h + h * g0).norm() < 1e-13);
}

#[test]
fn gapped_dirac_point() {
    let p = ModelParams::new(0.0, 0.0, 8.0);
    let h = valley_hamiltonian([0.0; 4], Valley::Plus, &p).unwrap();
    let e = eigvalsh4(&h);
    for (x, y) in e.iter().zip([-8.0, -8.0, 8.0, 8.0]) {
        assert!(close(*x, y, 1e-12));
    }
    let f = occupied_frame(&h, Filling::LowerHalf, DEFAULT_GAP_TOL).unwrap();
    assert_eq!(f.rank, 2);
    assert!(close(f.energy(), -8.0, 1e-12));
    let zero = valley_hamiltonian([0.0; 4], Valley::Plus, &ModelParams::default()).unwrap();
    assert!(occupied_frame(&zero, Filling::LowerHalf, DEFAULT_GAP_TOL).is_err());
}

#[test]
fn monopole_examples() {
    let pair = monopole_positions(0.0).unwrap();
    assert!(close(pair.b_w, FRAC_PI_2, 1e-15));
    assert!(monopole_positions(1.0).unwrap().merged);
    assert!(close(monopole_positions((0.4 * PI).cos()).unwrap().b_w, 0.4 * PI, 1e-12));
    assert!(close(monopole_positions((0.6 * PI).cos()).unwrap().b_w, 0.6 * PI, 1e-12));
    assert!(monopole_positions(1.2).is_err());
}

#[test]
fn symmetry_examples() {
    let s = symmetry_report(&ModelParams::default());
    assert!(s.chiral && s.cp);
    let s = symmetry_report(&ModelParams::new(0.5, 0.0, 0.0));
    assert!(s.chiral && !s.cp);
    assert!(!symmetry_report(&ModelParams::new(0.0, 0.0, 3.0)).chiral);
}

#[test]
fn coupling_examples() {
    let q = bloch_to_couplings(&BlochVector::new([1.0, 2.0, 3.0, 4.0]), 0.5);
    let expect = [c(3.0, 4.0), c(4.5, -3.5), c(-1.0, -2.0), c(-3.5, -0.5)];
    for (x, y) in q.as_array().iter().zip(expect) {
        assert!((x - y).norm() < 1e-14);
    }
    let e = eigvalsh4(&diamond_matrix(&q));
    let s = 30f64.sqrt();
    for (x, y) in e.iter().zip([-1.5 * s, -0.5 * s, 0.5 * s, 1.5 * s]) {
        assert!(close(*x, y, 1e-12));
    }
    assert_eq!(bloch_to_couplings(&BlochVector::new([0.0; 4]), 0.7), CouplingQuad::zero());
}

#[test]
fn chern_form_examples() {
    assert!(close(chern_form_closed(8.0, FRAC_PI_4, 8.0), 4.198e-4, 1e-7));
    assert_eq!(chern_form_closed(5.0, 0.0, 8.0), 0.0);
    assert_eq!(chern_form_closed(5.0, 1.0, 0.0), 0.0);
    assert!(close(second_chern_closed(200.0, 8.0), 0.4700, 5e-5));
    assert_eq!(second_chern_closed(200.0, -8.0), -second_chern_closed(200.0, 8.0));
}

#[test]
fn reduced_and_full_methods_agree() {
    let p = ModelParams::new(0.0, 0.0, 8.0);
    let r = second_chern_reduced(&p, 200.0, HopfGrid::default(), Exec::default()).unwrap();
    assert!(close(r.value, 0.470, 0.005));
    let g = HopfGrid { n_q: 24, n_theta: 12, n_phi: 16, n_varphi: 16 };
    let plus = second_chern_full4d(&p, Valley::Plus, 200.0, g, Exec::default()).unwrap().value;
    let minus = second_chern_full4d(&p, Valley::Minus, 200.0, g, Exec::default()).unwrap().value;
    assert!(close(plus, r.value, 0.03 * r.value));
    assert!(close(plus, -minus, 1e-10));
    let v = valley_chern(&p.with_mass(-8.0), 200.0, g, Exec::default()).unwrap();
    assert!(close(v.c2_valley, -plus, 1e-10));
}

#[test]
fn yang_charge_examples() {
    let p = ModelParams::default();
    let g = HopfGrid::default();
    let near = yang_charge(&p, -8.0, 8.0, 200.0, g, Exec::default()).unwrap();
    assert!(close(near.delta, 0.940, 0.01));
    let far = yang_charge(&p, -80.0, 80.0, 200.0, g, Exec::default()).unwrap();
    assert!(far.delta < near.delta);
    assert!(yang_charge(&p, 8.0, 8.0, 200.0, g, Exec::default()).is_err());
}

#[test]
fn gauge_profile_examples() {
    let g = GaugeProfile::new(1.0, 0.0);
    assert!(close(gauge_shift(&Momentum([-0.75 * PI, 0.0, 0.0, 0.0]), &g), U_MAX, 1e-12));
    assert!(close(gauge_shift(&Momentum([PI, 0.0, 0.0, 0.0]), &g), 0.0, 1e-12));
    let h = GaugeProfile::new(0.5, 0.0);
    assert!(close(gauge_shift(&Momentum::zero(), &h), 0.9886, 1e-4));
}

#[test]
fn field_and_current_examples() {
    let e = pseudo_electric_field(&SeparationSchedule::expanding(1.0)).unwrap();
    assert!(e.iter().all(|s| close(s.e5_w, 0.2 * PI, 1e-12)));
    assert!(close(topological_current(0.5, SCHEDULE_RATE, 1.0), 0.01592, 1e-5));
    assert_eq!(topological_current(0.5, SCHEDULE_RATE, 0.0), 0.0);
}

#[test]
fn uncoupled_circuit_is_diagonal_in_bare_frequencies() {
    let mut cfg = DeviceConfig::default();
    for cp in cfg.couplers.iter_mut() {
        cp.g_qc = 0.0;
        cp.g_direct = 0.0;
    }
    let h = build_circuit_hamiltonian(&cfg, &cfg.qubit_freqs, 0.0, false).unwrap();
    let off: f64 = (0..h.nrows()).flat_map(|i| (0..h.ncols()).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| h[(i, j)].norm()).sum();
    assert_eq!(off, 0.0);
    let space = CircuitSpace::new(false);
    let vac = space.index(&[0; 8]);
    for q in 0..4 {
        let e = (h[(space.single(q), space.single(q))] - h[(vac, vac)]).re;
        assert!(close(e, cfg.qubit_freqs[q], 1e-9));
    }
}

#[test]
fn unmodulated_edge_has_static_coupling_only() {
    let cfg = DeviceConfig::default();
    let e = effective_coupling(&cfg, 0).unwrap();
    assert_eq!(e.omega, C64::default());
    assert!(e.j_static.abs() < 1e-9);
}

#[test]
fn pumped_gauge_profile_peaks_at_u_max() {
    let cfg = DeviceConfig::default();
    let g = GaugeProfile::new(1.0, 0.0);
    let peak = (0..64)
        .map(|i| Momentum([-PI + i as f64 * PI / 32.0, 0.0, 0.0, 0.0]))
        .map(|k| ats_dressing(&cfg, pump_rabi_for(&g, &k)).unwrap().shift)
        .fold(0.0, f64::max);
    assert!(close(peak, U_MAX, 0.01 * U_MAX), "{peak}");
    let idle = ats_dressing(&cfg, 0.0).unwrap().splitting;
    assert!(idle.abs() < 1e-5, "{idle}");
}
