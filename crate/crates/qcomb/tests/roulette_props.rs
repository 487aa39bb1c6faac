mod common;

use common::*;
use qcomb::comb::FragmentShape;
use qcomb::linalg::Matrix;
use qcomb::majorization::{majorizes, ProbVector};
use qcomb::measurement::{cc_indicator, dc_indicator};
use qcomb::roulette::{uncertainty_bound, verify_relation, RouletteReport};

fn check_report_invariants(r: &RouletteReport) {
    let c = r.c as f64;
    let m = r.w.len();
    for pair in r.p_win.windows(2) {
        assert!(pair[0] <= pair[1]);
    }
    assert!(r.p_win.iter().all(|p| (0.0..=1.0).contains(p)));
    assert!(r.c_improved >= r.c_basic - 1e-9, "{} < {}", r.c_improved, r.c_basic);
    assert!(r.c_basic >= -1e-7);

    let w = ProbVector::new(r.w.clone()).unwrap();
    let uniform = ProbVector::new(vec![1.0 / m as f64; m]).unwrap();
    let mut top = vec![0.0; m];
    top[..r.c].iter_mut().for_each(|v| *v = 1.0 / c);
    let top = ProbVector::new(top).unwrap();
    let loose = |y: &ProbVector<f64>, x: &ProbVector<f64>| {
        qcomb::majorization::prefix_slacks(y.entries(), x.entries()).iter().all(|s| *s >= -1e-7)
    };
    assert!(loose(&w, &uniform) && loose(&top, &w));
    assert!(majorizes(&top, &ProbVector::new(r.w_flat.clone()).unwrap()).unwrap() || loose(&top, &w));
}

#[test]
fn random_testers_satisfy_the_relation_on_random_fragments() {
    for seed in 0..50 {
        let mut r = rng(700 + seed);
        let ms = [random_tester(&mut r, 2, 2 + (seed as usize % 2)), random_tester(&mut r, 2, 2)];
        let report = uncertainty_bound(&ms, &FragmentShape::causal_map(2)).unwrap();
        check_report_invariants(&report);
        let f = random_causal_fragment(&mut r, 2);
        let v = verify_relation(&f, &report);
        assert!(v.passed(), "seed {seed}: {:?} / {:?}", v.slack_w, v.entropy_margin);
        assert!(v.slack_w.iter().chain(&v.slack_w_flat).all(|s| *s >= -1e-7));
    }
}

#[test]
fn identical_testers_have_zero_bound() {
    let mut r = rng(31);
    let t = cc_indicator(&haar_unitary(&mut r, 2), &haar_unitary(&mut r, 2)).unwrap();
    let report = uncertainty_bound(&[t.clone(), t], &FragmentShape::causal_map(2)).unwrap();
    check_report_invariants(&report);
    assert!(report.c_basic.abs() < 1e-6, "{}", report.c_basic);
    assert!((report.w[0] - 0.5).abs() < 1e-7 && (report.w[1] - 0.5).abs() < 1e-7);
}

#[test]
fn common_eigencircuit_gives_zero_bound() {
    // (U ⊗ Ū)φ⁺ = φ⁺, so φ⁺_AC ⊗ 1_B is certain for both indicators
    let mut r = rng(32);
    let u = haar_unitary(&mut r, 2);
    let id = Matrix::identity(2);
    let ms = [cc_indicator(&id, &id).unwrap(), cc_indicator(&u, &u.conj()).unwrap()];
    let report = uncertainty_bound(&ms, &FragmentShape::causal_map(2)).unwrap();
    check_report_invariants(&report);
    assert!(report.c_basic.abs() < 1e-6, "{}", report.c_basic);
    let mut sorted = report.w.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    assert!((sorted[0] - 0.5).abs() < 1e-7 && (sorted[1] - 0.5).abs() < 1e-7);
}

#[test]
fn incompatible_indicators_have_positive_bound() {
    let id = Matrix::identity(2);
    let ms = [cc_indicator(&id, &id).unwrap(), dc_indicator(&id, &id).unwrap()];
    let report = uncertainty_bound(&ms, &FragmentShape::causal_map(2)).unwrap();
    check_report_invariants(&report);
    assert!(report.c_basic > 1.0);
    assert!(report.w[1] < 0.5 - 1e-3);
}
