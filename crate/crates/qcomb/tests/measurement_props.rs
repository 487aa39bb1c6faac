mod common;

use common::*;
use qcomb::causal::system_environment_fragment;
use qcomb::comb::{CircuitFragment, FragmentShape};
use qcomb::linalg::Matrix;
use qcomb::majorization::{shannon_entropy, ProbVector};
use qcomb::measurement::{bell_basis, cc_indicator, dc_indicator, is_eigencircuit, outcome_distribution};
use qcomb::tensor::LabeledOperator;

fn swap(d: usize) -> Matrix<f64> {
    Matrix::from_fn(d * d, d * d, |r, c| {
        let (i, j) = (c / d, c % d);
        C::new(if r == j * d + i { 1.0 } else { 0.0 }, 0.0)
    })
}

fn conjugate_outputs(f: &CircuitFragment<f64>, ua: &Matrix<f64>, uc: &Matrix<f64>) -> CircuitFragment<f64> {
    let j = f.choi.align_to(&FragmentShape::causal_map(2).layout()).unwrap();
    let w = ua.kron(&Matrix::identity(2)).kron(uc);
    let m = w.matmul(j.matrix()).matmul(&w.adjoint());
    CircuitFragment::new(f.shape.clone(), LabeledOperator::new(j.layout().clone(), m).unwrap()).unwrap()
}

#[test]
fn bell_basis_resolves_identity() {
    for d in 2..=4 {
        let sum = bell_basis::<f64>(d)
            .unwrap()
            .iter()
            .fold(Matrix::zeros(d * d, d * d), |acc, v| &acc + &Matrix::outer(v));
        assert!(sum.max_abs_diff(&Matrix::identity(d * d)) < 1e-12, "d = {d}");
    }
}

#[test]
fn indicators_are_valid_testers_for_random_unitaries() {
    for seed in 0..20 {
        let mut r = rng(seed);
        let us: Vec<_> = (0..4).map(|_| haar_unitary(&mut r, 2)).collect();
        for t in [cc_indicator(&us[0], &us[1]).unwrap(), dc_indicator(&us[2], &us[3]).unwrap()] {
            assert_eq!(t.outcome_count(), 4);
            assert!(t.validity_report(1e-9).passed(), "seed {seed}");
            assert!(t.elements().iter().all(|e| e.min_eigenvalue() >= -1e-9));
        }
    }
}

#[test]
fn unitary_covariance_of_cc_indicator() {
    let id = Matrix::identity(2);
    for seed in 0..20 {
        let mut r = rng(100 + seed);
        let f = random_causal_fragment(&mut r, 2);
        let (u1, u2) = (haar_unitary(&mut r, 2), haar_unitary(&mut r, 2));
        let rotated = outcome_distribution(&f, &cc_indicator(&u1, &u2).unwrap()).unwrap().probs;
        let absorbed = conjugate_outputs(&f, &u1, &u2);
        let plain = outcome_distribution(&absorbed, &cc_indicator(&id, &id).unwrap()).unwrap().probs;
        for (a, b) in rotated.iter().zip(&plain) {
            assert!((a - b).abs() < 1e-9, "seed {seed}: {rotated:?} vs {plain:?}");
        }
    }
}

#[test]
fn comb_probabilities_match_state_vector_simulation() {
    for seed in 0..20 {
        let mut r = rng(200 + seed);
        let psi = random_vector(&mut r, 4);
        let u = haar_unitary(&mut r, 4);
        let us: Vec<_> = (0..4).map(|_| haar_unitary(&mut r, 2)).collect();

        let rho = LabeledOperator::new(layout(&[("A", 2), ("E", 2)]), Matrix::outer(&psi)).unwrap();
        let step = qcomb::comb::Channel::unitary(u.clone(), &[sys("B", 2), sys("E", 2)], &[sys("C", 2), sys("F", 2)])
            .unwrap()
            .trace_outputs(&["F"])
            .unwrap();
        let f = qcomb::comb::build_fragment(&rho, &[step]).unwrap();
        let cc = outcome_distribution(&f, &cc_indicator(&us[0], &us[1]).unwrap()).unwrap().probs;
        let dc = outcome_distribution(&f, &dc_indicator(&us[2], &us[3]).unwrap()).unwrap().probs;

        let (cc_sim, dc_sim) = simulate_indicators(2, &psi, &u, [&us[0], &us[1], &us[2], &us[3]]);
        for (a, b) in cc.iter().zip(&cc_sim).chain(dc.iter().zip(&dc_sim)) {
            assert!((a - b).abs() < 1e-9, "seed {seed}: {cc:?}/{cc_sim:?} {dc:?}/{dc_sim:?}");
        }
    }
}

#[test]
fn cc_eigencircuits_factorize() {
    // swap with a local rotation W on the environment is purely common-cause;
    // U2 = conj(U1)·W† undoes the rotation so outcome 0 becomes certain
    for seed in 0..20 {
        let mut r = rng(300 + seed);
        let (w, u1) = (haar_unitary(&mut r, 2), haar_unitary(&mut r, 2));
        let u2 = u1.conj().matmul(&w.adjoint());
        let f = system_environment_fragment(&swap(2).matmul(&Matrix::identity(2).kron(&w))).unwrap();
        let t = cc_indicator(&u1, &u2).unwrap();
        let x = is_eigencircuit(&f, &t, 1e-9).unwrap().expect("eigencircuit");

        let v = u1.kron(&u2);
        let phi = Matrix::outer(&bell_basis::<f64>(2).unwrap()[x]);
        let ac = v.adjoint().matmul(&phi).matmul(&v);
        let want = LabeledOperator::new(layout(&[("A", 2), ("C", 2)]), ac)
            .unwrap()
            .kron(&LabeledOperator::identity(layout(&[("B", 2)])))
            .unwrap()
            .align_to(f.choi.layout())
            .unwrap();
        assert!(f.choi.distance(&want).unwrap() < 1e-6, "seed {seed}");
    }
}

#[test]
fn cc_eigencircuit_is_never_reported_without_factorization() {
    for seed in 0..100 {
        let mut r = rng(400 + seed);
        let f = random_causal_fragment(&mut r, 2);
        let (u1, u2) = (haar_unitary(&mut r, 2), haar_unitary(&mut r, 2));
        if let Some(x) = is_eigencircuit(&f, &cc_indicator(&u1, &u2).unwrap(), 1e-9).unwrap() {
            let v = u1.kron(&u2);
            let ac = v.adjoint().matmul(&Matrix::outer(&bell_basis::<f64>(2).unwrap()[x])).matmul(&v);
            let want = LabeledOperator::new(layout(&[("A", 2), ("C", 2)]), ac)
                .unwrap()
                .kron(&LabeledOperator::identity(layout(&[("B", 2)])))
                .unwrap()
                .align_to(f.choi.layout())
                .unwrap();
            assert!(f.choi.distance(&want).unwrap() < 1e-6);
        }
    }
}

#[test]
fn zero_dc_entropy_means_unitary_decoupled_channel() {
    for seed in 0..20 {
        let mut r = rng(500 + seed);
        let (v, u3) = (haar_unitary(&mut r, 2), haar_unitary(&mut r, 2));
        let env = haar_unitary(&mut r, 2);
        // B evolves by V alone; the environment gets an unrelated rotation
        let f = system_environment_fragment(&v.kron(&env)).unwrap();
        let u4 = u3.adjoint().matmul(&v.adjoint());
        let p = outcome_distribution(&f, &dc_indicator(&u3, &u4).unwrap()).unwrap();
        let h = shannon_entropy(&ProbVector::new(p.probs).unwrap()).unwrap();
        assert!(h < 1e-6, "seed {seed}: h_dc = {h}");

        let bc = f.choi.partial_trace(&["A"]).unwrap();
        let ev = bc.eigvalsh();
        assert!((ev[3] - 2.0).abs() < 1e-6 && ev[..3].iter().all(|e| e.abs() < 1e-6), "{ev:?}");
        let rho_a = f.choi.partial_trace(&["B", "C"]).unwrap().scale(0.5);
        let product = rho_a.kron(&bc).unwrap().align_to(f.choi.layout()).unwrap();
        assert!(f.choi.distance(&product).unwrap() < 1e-6);
    }
}
