mod common;

use common::{rng, t_transform_witness};
use num_rational::Ratio;
use proptest::prelude::*;
use qcomb::majorization::{flatness, lub, majorizes, prefix_slacks, renyi_entropy, shannon_entropy, ProbVector};
use rand::seq::SliceRandom;
use rand::Rng;

type Q = Ratio<i64>;

fn random_simplex(r: &mut impl Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| -r.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

/// y·D for D a random convex combination of permutation matrices, so x ≺ y.
fn random_majorized(r: &mut impl Rng, y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let weights = random_simplex(r, 4);
    let mut x = vec![0.0; n];
    for w in weights {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(r);
        for (i, &p) in perm.iter().enumerate() {
            x[p] += w * y[i];
        }
    }
    x
}

fn sorted_desc(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn rationals(nums: &[i64]) -> Vec<Q> {
    let total: i64 = nums.iter().sum::<i64>().max(1);
    nums.iter().map(|&n| Q::new(n, total)).collect()
}

#[test]
fn entropies_reverse_the_majorization_order() {
    let mut r = rng(7);
    for _ in 0..100 {
        let n = r.random_range(2..7);
        let y = random_simplex(&mut r, n);
        let x = random_majorized(&mut r, &y);
        let (py, px) = (ProbVector::new(y).unwrap(), ProbVector::new(x).unwrap());
        assert!(majorizes(&py, &px).unwrap());
        let hy = shannon_entropy(&py).unwrap();
        let hx = shannon_entropy(&px).unwrap();
        assert!(hx >= hy - 1e-12);
        for alpha in [0.5, 2.0, f64::INFINITY] {
            let (ry, rx) = (renyi_entropy(&py, alpha).unwrap(), renyi_entropy(&px, alpha).unwrap());
            assert!(rx >= ry - 1e-12, "α = {alpha}: {rx} < {ry}");
        }
    }
}

#[test]
fn doubly_stochastic_witness_exists_in_three_dimensions() {
    let mut r = rng(11);
    for _ in 0..100 {
        let y = sorted_desc(&random_simplex(&mut r, 3));
        let x = sorted_desc(&random_majorized(&mut r, &y));
        let d = t_transform_witness(&y, &x);
        for i in 0..3 {
            let row: f64 = (0..3).map(|j| d[(i, j)].re).sum();
            let col: f64 = (0..3).map(|j| d[(j, i)].re).sum();
            assert!((row - 1.0).abs() < 1e-8 && (col - 1.0).abs() < 1e-8);
            for j in 0..3 {
                assert!(d[(i, j)].re >= -1e-8 && d[(i, j)].im == 0.0);
            }
        }
        for j in 0..3 {
            let yd: f64 = (0..3).map(|i| y[i] * d[(i, j)].re).sum();
            assert!((yd - x[j]).abs() < 1e-8, "{y:?} {x:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn flatness_is_sorted_majorized_and_idempotent(nums in prop::collection::vec(0i64..30, 1..8)) {
        let v = rationals(&nums);
        let f = flatness(&v);
        let out = f.entries().to_vec();
        prop_assert!(out.windows(2).all(|w| w[0] >= w[1]));
        // v's sorted prefix sums dominate those of F(v) exactly
        prop_assert!(prefix_slacks(&v, &out).iter().all(|s| *s >= Q::from_integer(0)));
        prop_assert_eq!(flatness(&out).into_entries(), out);
    }

    #[test]
    fn flatness_is_idempotent_in_floating_point(seed in any::<u64>(), n in 1usize..9) {
        let v = random_simplex(&mut rng(seed), n);
        let once = flatness(&v).into_entries();
        prop_assert_eq!(flatness(&once).into_entries(), once);
    }

    #[test]
    fn lub_ignores_entry_order(a in prop::collection::vec(0i64..30, 2..6), b in prop::collection::vec(0i64..30, 2..6), seed in any::<u64>()) {
        prop_assume!(a.iter().sum::<i64>() > 0 && b.iter().sum::<i64>() > 0);
        let (va, vb) = (rationals(&a), rationals(&b));
        let base = lub(&[ProbVector::new(va.clone()).unwrap(), ProbVector::new(vb.clone()).unwrap()]).unwrap();
        let mut r = rng(seed);
        let (mut sa, mut sb) = (va, vb);
        sa.shuffle(&mut r);
        sb.shuffle(&mut r);
        let shuffled = lub(&[ProbVector::new(sa.clone()).unwrap(), ProbVector::new(sb.clone()).unwrap()]).unwrap();
        prop_assert_eq!(base.entries(), shuffled.entries());
        // and it is an upper bound
        prop_assert!(majorizes(&base, &ProbVector::new(sa).unwrap()).unwrap());
        prop_assert!(majorizes(&base, &ProbVector::new(sb).unwrap()).unwrap());
    }
}
