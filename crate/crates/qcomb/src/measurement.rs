//! Interactive measurements (testers): interventions followed by a final
//! POVM, their CJ operators, outcome statistics, and the Bell-basis
//! common-cause / direct-cause indicators for causal maps A | B → C.

use num_complex::Complex;
use serde::Serialize;

use crate::comb::{link_product, Channel, CircuitFragment, FragmentShape, ValidationReport};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{cplx, czero, Real};
use crate::tensor::{LabeledOperator, SpaceLayout, SystemLabel};

/// Register label carried by the indicator interventions.
pub const REGISTER: &str = "R";

/// A finite family {J_x} of tester elements, each on the open systems of
/// the fragment shape it is meant to probe.
#[derive(Clone, Debug)]
pub struct InteractiveMeasurement<T> {
    shape: FragmentShape,
    elements: Vec<LabeledOperator<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutcomeDistribution<T> {
    pub probs: Vec<T>,
}

impl<T: Real> InteractiveMeasurement<T> {
    /// Elements are aligned to the shape; each must be PSD and their sum a
    /// deterministic dual comb.
    pub fn new(shape: FragmentShape, elements: Vec<LabeledOperator<T>>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidPovm("a tester needs at least one outcome".into()));
        }
        let layout = shape.layout();
        let elements = elements
            .iter()
            .map(|e| e.align_to(&layout).map_err(|err| Error::ShapeError(err.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let tol = T::default_tol();
        for (x, e) in elements.iter().enumerate() {
            if !e.is_hermitian(tol) || e.min_eigenvalue() < -tol {
                return Err(Error::InvalidPovm(format!("element {x} is not positive semidefinite")));
            }
        }
        let t = Self { shape, elements };
        let report = t.validity_report(T::lit(1e-7).max(tol));
        if !report.passed() {
            let worst = report.failures().into_iter().map(|c| c.name.clone()).collect::<Vec<_>>();
            return Err(Error::InvalidPovm(format!("elements do not sum to a dual comb: {}", worst.join(", "))));
        }
        Ok(t)
    }

    pub fn shape(&self) -> &FragmentShape {
        &self.shape
    }

    pub fn elements(&self) -> &[LabeledOperator<T>] {
        &self.elements
    }

    pub fn outcome_count(&self) -> usize {
        self.elements.len()
    }

    pub fn total(&self) -> LabeledOperator<T> {
        let mut acc = LabeledOperator::zeros(self.shape.layout());
        for e in &self.elements {
            acc = acc.add(e).expect("aligned at construction");
        }
        acc
    }

    pub fn validity_report(&self, tol: T) -> ValidationReport {
        validate_tester_sum(&self.total(), &self.shape, tol)
    }

    pub fn cast<U: Real>(&self) -> InteractiveMeasurement<U> {
        InteractiveMeasurement { shape: self.shape.clone(), elements: self.elements.iter().map(|e| e.cast()).collect() }
    }
}

/// Dual-comb conditions on K = Σ_x J_x: peeling slots from the last,
/// K must be Ξ ⊗ 1 on each final output and the remaining marginal over
/// the slot's inputs carries on; the leftover scalar is 1.
pub fn validate_tester_sum<T: Real>(k: &LabeledOperator<T>, shape: &FragmentShape, tol: T) -> ValidationReport {
    let mut report = ValidationReport { tol: tol.to_f64().unwrap_or(0.0), checks: vec![] };
    let mut cur = match k.align_to(&shape.layout()) {
        Ok(k) => k,
        Err(_) => {
            report.fail("layout");
            return report;
        }
    };
    report.push("hermitian", cur.hermiticity_residual());
    for i in (0..shape.a()).rev() {
        let slot = &shape.steps[i];
        let outs: Vec<&str> = slot.outputs.iter().map(|l| l.name.as_str()).collect();
        let ins: Vec<&str> = slot.inputs.iter().map(|l| l.name.as_str()).collect();
        let dout: usize = slot.outputs.iter().map(|l| l.dim).product();
        let step = (|| -> Result<(T, LabeledOperator<T>)> {
            let xi = cur.partial_trace(&outs)?.scale(T::one() / T::from_usize(dout).unwrap());
            let ext = xi.kron(&LabeledOperator::identity(SpaceLayout::new(slot.outputs.clone())?))?;
            Ok((cur.distance(&ext)?, xi.partial_trace(&ins)?))
        })();
        match step {
            Ok((r, next)) => {
                report.push(format!("dual[{}]", i + 1), r);
                cur = next;
            }
            Err(_) => {
                report.fail(format!("dual[{}]", i + 1));
                return report;
            }
        }
    }
    report.push("normalization", (cur.trace().re - T::one()).abs());
    report
}

/// J_x = M_x^T ⋆ Λ^{a−1} ⋆ … ⋆ Λ^1. Every label that is not an open system
/// of `shape` is a register and must be contracted away.
pub fn build_tester<T: Real>(
    shape: &FragmentShape,
    interventions: &[Channel<T>],
    povm: &[LabeledOperator<T>],
) -> Result<InteractiveMeasurement<T>> {
    let tol = T::default_tol();
    let first = povm.first().ok_or_else(|| Error::InvalidPovm("empty POVM".into()))?;
    let plabels = first.layout().clone();
    let mut total = LabeledOperator::zeros(plabels.clone());
    for (x, m) in povm.iter().enumerate() {
        let m = m.align_to(&plabels).map_err(|e| Error::InvalidPovm(format!("element {x}: {e}")))?;
        if !m.is_hermitian(tol) || m.min_eigenvalue() < -tol {
            return Err(Error::InvalidPovm(format!("element {x} is not positive semidefinite")));
        }
        total = total.add(&m)?;
    }
    let dev = total.distance(&LabeledOperator::identity(plabels.clone()))?;
    if dev > tol {
        return Err(Error::InvalidPovm(format!("elements sum to identity only within {dev}")));
    }

    let open = shape.layout();
    // registers: produced by one intervention, consumed by a later one or the POVM
    let mut produced: Vec<&str> = vec![];
    for (k, lam) in interventions.iter().enumerate() {
        for s in lam.inputs.systems() {
            if !open.contains(&s.name) && !produced.contains(&s.name.as_str()) {
                return Err(Error::ShapeError(format!("intervention {} reads unknown register `{}`", k + 1, s.name)));
            }
        }
        for s in lam.outputs.systems() {
            if !open.contains(&s.name) {
                produced.push(&s.name);
            }
        }
    }

    let mut elements = Vec::with_capacity(povm.len());
    for m in povm {
        let mut j = m.align_to(&plabels)?.transpose();
        for lam in interventions.iter().rev() {
            j = link_product(&j, &lam.choi)?;
        }
        let stray: Vec<&str> = j.layout().names().into_iter().filter(|n| !open.contains(n)).collect();
        if !stray.is_empty() {
            return Err(Error::ShapeError(format!("register chain leaves {} open", stray.join(", "))));
        }
        elements.push(j.align_to(&open).map_err(|e| Error::ShapeError(e.to_string()))?);
    }
    InteractiveMeasurement::new(shape.clone(), elements)
}

/// Heisenberg–Weyl Bell basis: Φ_(a,b) = Σ_k ω^{bk} |k, k+a⟩ / √d at index a·d + b.
pub fn bell_basis<T: Real>(d: usize) -> Result<Vec<Vec<Complex<T>>>> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!("Bell basis needs d ≥ 2, got {d}")));
    }
    let norm = T::one() / T::from_usize(d).unwrap().sqrt();
    let tau = T::lit(std::f64::consts::TAU);
    let mut out = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in 0..d {
            let mut v = vec![czero(); d * d];
            for k in 0..d {
                let th = tau * T::from_usize((b * k) % d).unwrap() / T::from_usize(d).unwrap();
                v[k * d + (k + a) % d] = cplx(th.cos(), th.sin()) * norm;
            }
            out.push(v);
        }
    }
    Ok(out)
}

fn check_unitary<T: Real>(u: &Matrix<T>, what: &str) -> Result<usize> {
    if !u.is_square() || !u.is_unitary(T::default_tol()) {
        return Err(Error::InvalidChannel(format!("{what} is not unitary")));
    }
    Ok(u.rows())
}

fn sys(name: &str, d: usize) -> SystemLabel {
    SystemLabel::new(name, d)
}

fn layout(labels: &[(&str, usize)]) -> SpaceLayout {
    SpaceLayout::new(labels.iter().map(|(n, d)| sys(n, *d)).collect()).expect("distinct static labels")
}

/// (V ⊗ W)† Φ_i (V ⊗ W) for every Bell state, on the given pair of systems.
fn rotated_bell_povm<T: Real>(
    v: &Matrix<T>,
    w: &Matrix<T>,
    first: &str,
    second: &str,
) -> Result<Vec<LabeledOperator<T>>> {
    let d = v.rows();
    let vw = v.kron(w);
    let vwd = vw.adjoint();
    bell_basis::<T>(d)?
        .iter()
        .map(|phi| {
            let m = vwd.matmul(&Matrix::outer(phi)).matmul(&vw);
            LabeledOperator::new(layout(&[(first, d), (second, d)]), m)
        })
        .collect()
}

/// Maximal common-cause indicator: keep a copy of A in the register, feed
/// 1/d into B, and measure (R, C) in the rotated Bell basis.
pub fn cc_indicator<T: Real>(u1: &Matrix<T>, u2: &Matrix<T>) -> Result<InteractiveMeasurement<T>> {
    let d = check_unitary(u1, "U1")?;
    if check_unitary(u2, "U2")? != d {
        return Err(Error::InvalidChannel("U1 and U2 differ in dimension".into()));
    }
    let keep = Channel::identity(sys("A", d), sys(REGISTER, d))?;
    let feed = Channel::state(Matrix::identity(d).scale(T::one() / T::from_usize(d).unwrap()), &[sys("B", d)])?;
    let lam = keep.parallel(&feed)?;
    let povm = rotated_bell_povm(u1, u2, REGISTER, "C")?;
    build_tester(&FragmentShape::causal_map(d), &[lam], &povm)
}

/// Maximal direct-cause indicator: discard A, feed half of U3 Φ₁ U3† into B
/// and measure (C, R) in the rotated Bell basis.
pub fn dc_indicator<T: Real>(u3: &Matrix<T>, u4: &Matrix<T>) -> Result<InteractiveMeasurement<T>> {
    let d = check_unitary(u3, "U3")?;
    if check_unitary(u4, "U4")? != d {
        return Err(Error::InvalidChannel("U3 and U4 differ in dimension".into()));
    }
    let phi1 = &bell_basis::<T>(d)?[0];
    let u3e = u3.kron(&Matrix::identity(d));
    let rho = u3e.matmul(&Matrix::outer(phi1)).matmul(&u3e.adjoint());
    let discard = Channel::trace(&[sys("A", d)])?;
    let feed = Channel::state(rho, &[sys("B", d), sys(REGISTER, d)])?;
    let lam = discard.parallel(&feed)?;
    let povm = rotated_bell_povm(u4, &Matrix::identity(d), "C", REGISTER)?;
    build_tester(&FragmentShape::causal_map(d), &[lam], &povm)
}

/// p_x = J^Φ ⋆ J_x. Float dust down to −1e-12 is clamped; the vector is
/// renormalized only if it already sums to 1 within 1e-9.
pub fn outcome_distribution<T: Real>(
    f: &CircuitFragment<T>,
    t: &InteractiveMeasurement<T>,
) -> Result<OutcomeDistribution<T>> {
    if f.shape != t.shape {
        return Err(Error::ShapeError("fragment and tester slot structures differ".into()));
    }
    let j = f.choi.align_to(&t.shape.layout())?;
    let phi = j.matrix().data();
    let dust = T::default_tol().max(T::lit(1e-9)) * T::lit(1e-3);
    let slack = T::default_tol().max(T::lit(1e-9));
    let mut probs = Vec::with_capacity(t.elements.len());
    for (x, e) in t.elements.iter().enumerate() {
        let p = phi.iter().zip(e.matrix().data()).fold(T::zero(), |acc, (a, b)| acc + (*a * *b).re);
        if p < -dust {
            return Err(Error::InvalidProbability(format!("outcome {x} has probability {p}")));
        }
        probs.push(p.max(T::zero()));
    }
    let total: T = probs.iter().copied().sum();
    if (total - T::one()).abs() > slack {
        return Err(Error::InvalidProbability(format!("probabilities sum to {total}")));
    }
    for p in &mut probs {
        *p /= total;
    }
    Ok(OutcomeDistribution { probs })
}

/// Some outcome certain within `tol`; returns its index.
pub fn is_eigencircuit<T: Real>(
    f: &CircuitFragment<T>,
    t: &InteractiveMeasurement<T>,
    tol: T,
) -> Result<Option<usize>> {
    let p = outcome_distribution(f, t)?;
    Ok(p.probs.iter().position(|&x| x >= T::one() - tol))
}
