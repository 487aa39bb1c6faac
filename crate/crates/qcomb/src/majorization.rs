//! Majorization preorder, the aggregate prefix-maximum bound, the flatness
//! process and least upper bounds on the majorization lattice.
//!
//! Everything except the entropies is generic over ordered fields, so exact
//! rational arithmetic (`num_rational::Ratio<i64>`) works as well as floats.

use std::cmp::Ordering;

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};
use serde::Serialize;

use crate::error::{Error, Result};

pub trait Field: Clone + Num + PartialOrd + FromPrimitive + ToPrimitive {}
impl<T: Clone + Num + PartialOrd + FromPrimitive + ToPrimitive> Field for T {}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbVector<T> {
    entries: Vec<T>,
    total: T,
}

fn sum<T: Field>(v: &[T]) -> T {
    v.iter().cloned().fold(T::zero(), |a, b| a + b)
}

fn abs<T: Field>(x: T) -> T {
    if x < T::zero() {
        T::zero() - x
    } else {
        x
    }
}

fn lit<T: Field>(x: f64) -> T {
    T::from_f64(x).expect("tolerance representable")
}

fn sorted_desc<T: Field>(v: &[T]) -> Vec<T> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    s
}

impl<T: Field> ProbVector<T> {
    /// Nonnegative entries; the total is their sum.
    pub fn new(entries: Vec<T>) -> Result<Self> {
        if entries.iter().any(|x| !(*x >= T::zero())) {
            return Err(Error::InvalidProbability("negative or NaN entry".into()));
        }
        let total = sum(&entries);
        Ok(Self { entries, total })
    }

    /// Nonnegative entries that must sum to `total` within 1e-9.
    pub fn with_total(entries: Vec<T>, total: T) -> Result<Self> {
        let v = Self::new(entries)?;
        if abs(v.total.clone() - total.clone()) > lit(1e-9) {
            return Err(Error::InvalidProbability("entries do not sum to the declared total".into()));
        }
        Ok(Self { entries: v.entries, total })
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<T> {
        self.entries
    }

    pub fn total(&self) -> &T {
        &self.total
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sorted(&self) -> Self {
        Self { entries: sorted_desc(&self.entries), total: self.total.clone() }
    }

    /// Running sums of the descending rearrangement.
    pub fn prefix_sums(&self) -> Vec<T> {
        prefix(&sorted_desc(&self.entries))
    }
}

fn prefix<T: Field>(v: &[T]) -> Vec<T> {
    let mut acc = T::zero();
    v.iter()
        .map(|x| {
            acc = acc.clone() + x.clone();
            acc.clone()
        })
        .collect()
}

fn totals_match<T: Field>(a: &T, b: &T) -> Result<()> {
    if abs(a.clone() - b.clone()) > lit(1e-9) {
        let f = |x: &T| x.to_f64().unwrap_or(f64::NAN);
        return Err(Error::TotalMismatch(f(a), f(b)));
    }
    Ok(())
}

/// Slack of each prefix inequality Σ_{≤k} y↓ − Σ_{≤k} x↓ after zero-padding.
pub fn prefix_slacks<T: Field>(y: &[T], x: &[T]) -> Vec<T> {
    let n = y.len().max(x.len());
    let mut ys = sorted_desc(y);
    let mut xs = sorted_desc(x);
    ys.resize(n, T::zero());
    xs.resize(n, T::zero());
    prefix(&ys).into_iter().zip(prefix(&xs)).map(|(a, b)| a - b).collect()
}

/// True iff x ≺ y.
pub fn majorizes<T: Field>(y: &ProbVector<T>, x: &ProbVector<T>) -> Result<bool> {
    totals_match(&y.total, &x.total)?;
    let n = y.len().max(x.len()).max(1);
    let tol: T = lit::<T>(1e-12) * T::from_usize(n).unwrap();
    Ok(prefix_slacks(&y.entries, &x.entries).iter().all(|s| *s >= T::zero() - tol.clone()))
}

/// b_k = max_S Σ_{≤k} s↓ − max_S Σ_{<k} s↓. Not necessarily sorted.
pub fn aggregate_bound<T: Field>(set: &[ProbVector<T>]) -> Result<Vec<T>> {
    let first = set.first().ok_or(Error::EmptyInput)?;
    for v in &set[1..] {
        totals_match(&first.total, &v.total)?;
    }
    let n = set.iter().map(|v| v.len()).max().unwrap_or(0);
    let mut best = vec![T::zero(); n];
    for v in set {
        let mut s = sorted_desc(&v.entries);
        s.resize(n, T::zero());
        for (b, p) in best.iter_mut().zip(prefix(&s)) {
            if p > *b {
                *b = p;
            }
        }
    }
    let mut prev = T::zero();
    Ok(best
        .into_iter()
        .map(|b| {
            let d = b.clone() - prev.clone();
            prev = b;
            d
        })
        .collect())
}

/// One averaging step T; returns false when x is already nonincreasing.
fn flatten_step<T: Field>(x: &mut [T]) -> bool {
    let Some(j) = (1..x.len()).find(|&j| x[j] > x[j - 1]) else {
        return false;
    };
    // x_{-1} = +∞, so i = 0 always qualifies
    let mut window_sum = x[j].clone();
    let mut i = j;
    let avg = loop {
        i -= 1;
        window_sum = window_sum + x[i].clone();
        let avg = window_sum.clone() / T::from_usize(j - i + 1).unwrap();
        if i == 0 || x[i - 1] >= avg {
            break avg;
        }
    };
    for v in &mut x[i..=j] {
        *v = avg.clone();
    }
    true
}

/// The flatness process: d − 1 applications of the averaging step.
pub fn flatness<T: Field>(v: &[T]) -> ProbVector<T> {
    let mut x = v.to_vec();
    for _ in 1..x.len() {
        if !flatten_step(&mut x) {
            break;
        }
    }
    let total = sum(v);
    ProbVector { entries: x, total }
}

/// Least upper bound ∨S = F(b_S).
pub fn lub<T: Field>(set: &[ProbVector<T>]) -> Result<ProbVector<T>> {
    let b = aggregate_bound(set)?;
    let mut out = flatness(&b);
    out.total = set[0].total.clone();
    Ok(out)
}

/// Direct sum ⊕_b p_b / c of several distributions.
pub fn direct_sum_scaled<T: Field>(parts: &[ProbVector<T>]) -> Result<ProbVector<T>> {
    if parts.is_empty() {
        return Err(Error::EmptyInput);
    }
    let c = T::from_usize(parts.len()).unwrap();
    let entries = parts.iter().flat_map(|p| p.entries.iter().map(|x| x.clone() / c.clone())).collect();
    ProbVector::new(entries)
}

fn check_normalized<F: Float + FromPrimitive>(v: &ProbVector<F>) -> Result<()> {
    if (v.total - F::one()).abs() > F::from_f64(1e-9).unwrap() {
        return Err(Error::DomainError(format!(
            "entropy needs a normalized vector (total {})",
            v.total.to_f64().unwrap_or(f64::NAN)
        )));
    }
    Ok(())
}

/// Shannon entropy in bits.
pub fn shannon_entropy<F: Float + FromPrimitive>(v: &ProbVector<F>) -> Result<F> {
    check_normalized(v)?;
    Ok(shannon_bits(&v.entries))
}

pub(crate) fn shannon_bits<F: Float>(p: &[F]) -> F {
    p.iter().filter(|x| **x > F::zero()).fold(F::zero(), |h, &x| h - x * x.log2())
}

/// Rényi entropy of order α ≥ 0 in bits (α = 1 is Shannon, α = ∞ min-entropy).
pub fn renyi_entropy<F: Float + FromPrimitive>(v: &ProbVector<F>, alpha: F) -> Result<F> {
    check_normalized(v)?;
    if alpha.is_nan() || alpha < F::zero() {
        return Err(Error::DomainError("Rényi order must be nonnegative".into()));
    }
    let pos = v.entries.iter().copied().filter(|x| *x > F::zero());
    Ok(if alpha == F::zero() {
        F::from_usize(pos.count()).unwrap().log2()
    } else if alpha == F::one() {
        shannon_bits(&v.entries)
    } else if alpha.is_infinite() {
        -pos.fold(F::zero(), F::max).log2()
    } else {
        let s = pos.fold(F::zero(), |a, x| a + x.powf(alpha));
        s.log2() / (F::one() - alpha)
    })
}
