use num_complex::Complex64;
use proptest::prelude::*;
use qnet::dynamics::{doubled_means, integrate_means, Drive, DriveProfile};
use qnet::linalg::{eigenvalues, CMatrix};
use qnet::observer::{
    build_quantum_observer, classical_luenberger, closed_form_error_a, detectable, one_way_cascade, two_way_cascade,
    ClassicalPlant,
};

#[test]
fn gain_strictly_helps_on_grid() {
    for &g in &[0.05, 0.2, 0.5, 1.0, 4.0] {
        for &gl in &[0.01, 0.1, 0.5, 2.0, 10.0] {
            let plain = build_quantum_observer(1.0, g, gl, false).unwrap();
            let want = -0.5 * g - (g * gl / 2.0).sqrt();
            assert!((plain.error_rate().re - want).abs() < 1e-10);
            assert!(plain.error_rate().re < -0.5 * g);
            let verified = build_quantum_observer(1.0, g, gl, true).unwrap();
            assert!(verified.error_rate().re < -0.5 * g);
        }
    }
}

#[test]
fn cascades_over_damping_grid() {
    for &g in &[0.01, 0.1, 0.5, 1.0, 3.0, 10.0] {
        for &w in &[-2.0, 0.0, 1.0, 5.0] {
            let one = one_way_cascade(w, g).unwrap();
            let ev = eigenvalues(&one.joint.as_ref().unwrap().to_doubled().abar);
            assert!(ev.iter().all(|z| z.re < -1e-9), "one-way γ={g}: {ev:?}");
            let two = two_way_cascade(w, g).unwrap();
            let ev = eigenvalues(&two.joint_drift);
            assert_eq!(ev.iter().filter(|z| z.re.abs() < 1e-9).count(), 1, "two-way γ={g}: {ev:?}");
        }
    }
}

#[test]
fn error_block_matches_closed_form() {
    for &w in &[0.0, 1.0, -3.0] {
        for &g in &[0.1, 0.5, 2.0] {
            for &gl in &[0.0, 0.5, 2.0, 8.0] {
                for verifiable in [false, true] {
                    let sys = build_quantum_observer(w, g, gl, verifiable).unwrap();
                    assert!(sys.is_autonomous());
                    assert!((sys.error_rate() - closed_form_error_a(w, g, gl, verifiable)).norm() <= 1e-10);
                }
            }
        }
    }
}

#[test]
fn undetectable_pairs_are_reported() {
    let a = CMatrix::from_row_slice(
        2,
        2,
        &[Complex64::new(0.3, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(-1.0, 0.0)],
    );
    let c = CMatrix::from_row_slice(1, 2, &[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
    let d = detectable(&a, &c).unwrap();
    assert!(!d.detectable);
    assert!(d.gain.is_none());
}

fn real_matrix(rows: usize, cols: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec(-2.0f64..2.0, rows * cols)
        .prop_map(move |v| CMatrix::from_fn(rows, cols, |i, j| Complex64::new(v[i * cols + j], 0.0)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn detectable_gain_stabilises(
        (a, c) in (1usize..=3, 1usize..=2).prop_flat_map(|(n, p)| (real_matrix(n, n), real_matrix(p, n)))
    ) {
        let d = detectable(&a, &c).unwrap();
        if d.detectable {
            let gain = d.gain.unwrap();
            let plant = ClassicalPlant::new(a.clone(), CMatrix::zeros(a.nrows(), 1), c.clone()).unwrap();
            let sys = classical_luenberger(&plant, &gain).unwrap();
            let margin = eigenvalues(&sys.error_a).iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(margin < -1e-9, "margin {margin}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn any_disturbance_is_rejected(
        amp in -3.0f64..3.0,
        freq in 0.0f64..6.0,
        verifiable in any::<bool>(),
    ) {
        let sys = build_quantum_observer(1.0, 0.5, 2.0, verifiable).unwrap();
        let ss = sys.joint.as_ref().unwrap();
        let x0 = doubled_means(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let u = Drive::new(sys.disturbance_input.unwrap(), DriveProfile::Sinusoid { amplitude: Complex64::new(amp, 0.0), frequency: freq });
        let free = integrate_means(ss, &x0, &[], 5.0, 1e-2).unwrap();
        let driven = integrate_means(ss, &x0, &[u], 5.0, 1e-2).unwrap();
        let e = sys.error_selector();
        for (x, y) in free.coordinate(&e).iter().zip(driven.coordinate(&e)) {
            prop_assert!((x - y).norm() <= 1e-9);
        }
    }
}
