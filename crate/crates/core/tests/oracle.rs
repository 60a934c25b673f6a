use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use tfcka_core::channel::{channel_statistics, dark_count_adjusted, no_photon_phase_error, no_photon_probability};
use tfcka_core::fock::{
    apply_loss, apply_multiport, apply_polarization_misalignment, click_partition, conditional_click_state, evolve,
    kg_angles, measure_statistics, no_click_conditional_state, oracle_dark_count_statistics, oracle_statistics,
    oracle_statistics_at, prepare_initial_on_ports, w_state, QubitDensityMatrix,
};
use tfcka_core::params::misalignment_angle;
use tfcka_core::SetupParams;

fn setup(n: usize, m: usize, q: f64, t: f64, theta: f64, phi: f64) -> SetupParams {
    SetupParams { polarization_misalignment: theta, phase_misalignment: phi, ..SetupParams::ideal(n, m, q, t) }
}

// Hermitian embedding of an n-qubit density matrix: [[Re, -Im], [Im, Re]]
fn real_embedding(rho: &QubitDensityMatrix) -> DMatrix<f64> {
    let d = rho.dim();
    DMatrix::from_fn(2 * d, 2 * d, |r, c| {
        let z = rho.get(r % d, c % d);
        match (r < d, c < d) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

#[test]
fn conditional_states_are_density_matrices() {
    let a = misalignment_angle(0.02);
    for &(n, m, q, t, th, ph) in &[(3, 3, 0.9, 0.5, a, a), (4, 6, 0.5, 0.9, 0.3, 0.0), (2, 4, 0.99, 0.1, 0.0, 0.3)] {
        let s = evolve(&setup(n, m, q, t, th, ph)).unwrap();
        for rho in [conditional_click_state(&s, 1).unwrap().1, no_click_conditional_state(&s).unwrap().1] {
            assert!((rho.trace().re - 1.0).abs() < 1e-12);
            assert!(rho.trace().im.abs() < 1e-12);
            assert!(rho.hermiticity_defect() < 1e-12);
            let eig = SymmetricEigen::new(real_embedding(&rho));
            let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min > -1e-12, "negative eigenvalue {min}");
        }
    }
}

#[test]
fn click_classes_are_complete() {
    for &(n, m) in &[(2, 2), (3, 5), (4, 4)] {
        let s = evolve(&setup(n, m, 0.6, 0.7, 0.2, 0.1)).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        let part = click_partition(&s);
        let total: f64 = part.single.iter().sum::<f64>() + part.none + part.multiple;
        assert!((total - 1.0).abs() < 1e-12);
        let p1 = conditional_click_state(&s, 1).unwrap().0;
        assert!((part.single[0] - p1).abs() < 1e-14);
        let p0 = no_click_conditional_state(&s).unwrap().0;
        assert!((part.none - p0).abs() < 1e-14);
    }
}

#[test]
fn every_detector_sees_the_same_statistics() {
    let a = misalignment_angle(0.02);
    for &(n, m) in &[(2, 3), (3, 3), (3, 5), (4, 4)] {
        let p = setup(n, m, 0.8, 0.6, a, a);
        let first = oracle_statistics_at(&p, 1).unwrap();
        for j in 2..=m {
            let other = oracle_statistics_at(&p, j).unwrap();
            assert!((first.click_prob - other.click_prob).abs() < 1e-13, "N={n} M={m} j={j}");
            assert!((first.qber - other.qber).abs() < 1e-12);
            assert!((first.phase_error - other.phase_error).abs() < 1e-12);
        }
    }
}

#[test]
fn input_port_choice_does_not_matter() {
    let (m, q, t, th) = (4, 0.7, 0.8, 0.2);
    let stats = |ports: &[usize]| {
        let s = prepare_initial_on_ports(m, q, 0.1, ports).unwrap();
        let s = apply_multiport(&apply_polarization_misalignment(&apply_loss(&s, t), th));
        let (p, rho) = conditional_click_state(&s, 1).unwrap();
        let st = measure_statistics(&rho, &kg_angles(ports, m, 1));
        (p, st.max_qber(), st.phase_error)
    };
    let (a, b) = (stats(&[1, 2]), stats(&[1, 3]));
    assert!((a.0 - b.0).abs() < 1e-13, "{a:?} vs {b:?}");
    assert!((a.1 - b.1).abs() < 1e-12, "{a:?} vs {b:?}");
    assert!((a.2 - b.2).abs() < 1e-12, "{a:?} vs {b:?}");
}

#[test]
fn high_q_lossless_click_heralds_w_state() {
    for n in 2..=5 {
        for j in 1..=n {
            let s = evolve(&SetupParams::ideal(n, n, 1.0 - 1e-7, 1.0)).unwrap();
            let (_, rho) = conditional_click_state(&s, j).unwrap();
            let f = rho.fidelity_with_pure(&w_state(n, n, j));
            assert!(f > 1.0 - 1e-6, "N={n} j={j}: fidelity {f}");
        }
    }
}

#[test]
fn w_state_statistics() {
    for n in 2..=6 {
        let rho = QubitDensityMatrix::from_pure(n, &w_state(n, n, 1));
        let st = measure_statistics(&rho, &vec![0.0; n]);
        for &qb in &st.qber_per_pair {
            assert!((qb - (0.5 - 1.0 / n as f64)).abs() < 1e-12);
        }
        assert!(st.phase_error.abs() < 1e-12);
    }
}

#[test]
fn no_photon_branch_matches_closed_form() {
    for &(n, m, q, t) in &[(2, 2, 0.5, 0.3), (3, 4, 0.9, 0.5), (4, 4, 0.99, 0.9)] {
        let p = setup(n, m, q, t, 0.1, 0.2);
        let (p0, rho) = no_click_conditional_state(&evolve(&p).unwrap()).unwrap();
        assert!((p0 - no_photon_probability(&p).unwrap()).abs() < 1e-13);
        let st = measure_statistics(&rho, &vec![0.0; n]);
        assert!((st.phase_error - no_photon_phase_error(&p).unwrap()).abs() < 1e-12);
        assert!((st.max_qber() - 0.5).abs() < 1e-12);
    }
}

#[test]
fn dark_counts_match_oracle() {
    let a = misalignment_angle(0.02);
    for &(n, m, q, t, pd) in &[(2, 2, 0.9, 0.01, 1e-3), (3, 3, 0.95, 0.1, 1e-4), (3, 5, 0.5, 0.5, 0.05)] {
        let p = setup(n, m, q, t, a, a).with_dark_counts(pd);
        let an = dark_count_adjusted(&p).unwrap();
        let or = oracle_dark_count_statistics(&p).unwrap();
        assert!((an.click_prob - or.click_prob).abs() < 1e-12);
        assert!((an.qber - or.qber).abs() < 1e-10);
        assert!((an.phase_error - or.phase_error).abs() < 1e-10);
    }
}

#[test]
fn closed_forms_match_oracle_off_grid() {
    for &(n, m, q, t, th, ph) in &[(5, 5, 0.93, 0.37, 0.11, 0.07), (6, 6, 0.8, 0.2, 0.0, 0.2), (2, 8, 0.3, 0.95, 0.4, 0.4)] {
        let p = setup(n, m, q, t, th, ph);
        let an = channel_statistics(&p).unwrap();
        let or = oracle_statistics(&p).unwrap();
        assert!((an.click_prob - or.click_prob).abs() < 1e-10);
        assert!((an.qber - or.qber).abs() < 1e-10);
        assert!((an.phase_error - or.phase_error).abs() < 1e-10);
    }
}

#[test]
fn fidelity_helper_on_known_states() {
    let plus = [Complex64::new(0.5f64.sqrt(), 0.0), Complex64::new(0.5f64.sqrt(), 0.0)];
    let rho = QubitDensityMatrix::from_pure(1, &plus);
    assert!((rho.fidelity_with_pure(&plus) - 1.0).abs() < 1e-15);
    let zero = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    assert!((rho.fidelity_with_pure(&zero) - 0.5).abs() < 1e-15);
}
