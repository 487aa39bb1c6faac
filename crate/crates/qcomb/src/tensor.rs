//! Operators on labeled composite Hilbert spaces.
//!
//! Index convention: row-major Kronecker order with the first listed system
//! as the most significant digit.

use std::collections::HashSet;
use std::fmt;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{cone, czero, Real};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemLabel {
    pub name: String,
    pub dim: usize,
}

impl SystemLabel {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        Self { name: name.into(), dim }
    }
}

impl fmt::Display for SystemLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.dim)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceLayout {
    systems: Vec<SystemLabel>,
}

impl SpaceLayout {
    pub fn new(systems: Vec<SystemLabel>) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &systems {
            if s.dim == 0 {
                return Err(Error::InvalidDimension(format!("system `{}` has dimension 0", s.name)));
            }
            if !seen.insert(s.name.as_str()) {
                return Err(Error::LabelCollision(s.name.clone()));
            }
        }
        Ok(Self { systems })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn systems(&self) -> &[SystemLabel] {
        &self.systems
    }

    pub fn names(&self) -> Vec<&str> {
        self.systems.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.systems.iter().map(|s| s.dim).collect()
    }

    pub fn dim(&self) -> usize {
        self.systems.iter().map(|s| s.dim).product()
    }

    pub fn len(&self) -> usize {
        self.systems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.systems.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.systems.iter().position(|s| s.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.position(name).is_some()
    }

    pub fn get(&self, name: &str) -> Option<&SystemLabel> {
        self.systems.iter().find(|s| s.name == name)
    }

    /// Sub-layout with the named systems, in this layout's order.
    pub fn select(&self, names: &[&str]) -> Result<SpaceLayout> {
        for n in names {
            if !self.contains(n) {
                return Err(Error::LabelNotFound((*n).to_string()));
            }
        }
        Ok(SpaceLayout {
            systems: self.systems.iter().filter(|s| names.contains(&s.name.as_str())).cloned().collect(),
        })
    }

    pub fn without(&self, names: &[&str]) -> SpaceLayout {
        SpaceLayout {
            systems: self.systems.iter().filter(|s| !names.contains(&s.name.as_str())).cloned().collect(),
        }
    }

    pub fn concat(&self, other: &SpaceLayout) -> Result<SpaceLayout> {
        let mut systems = self.systems.clone();
        systems.extend(other.systems.iter().cloned());
        SpaceLayout::new(systems)
    }

    /// Same set of labels (with equal dims), ignoring order.
    pub fn same_systems(&self, other: &SpaceLayout) -> bool {
        self.len() == other.len() && self.systems.iter().all(|s| other.get(&s.name) == Some(s))
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.systems.len()];
        for k in (0..self.systems.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.systems[k + 1].dim;
        }
        strides
    }
}

impl fmt::Display for SpaceLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.systems.iter().map(ToString::to_string).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// Flat offsets of every multi-index over `dims` (first digit most
/// significant) when digit `k` carries weight `strides[k]`.
fn offsets(dims: &[usize], strides: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    for (&d, &s) in dims.iter().zip(strides) {
        let mut next = Vec::with_capacity(out.len() * d);
        for &base in &out {
            for digit in 0..d {
                next.push(base + digit * s);
            }
        }
        out = next;
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledOperator<T> {
    layout: SpaceLayout,
    matrix: Matrix<T>,
}

impl<T: Real> LabeledOperator<T> {
    pub fn new(layout: SpaceLayout, matrix: Matrix<T>) -> Result<Self> {
        let d = layout.dim();
        if !matrix.is_square() || matrix.rows() != d {
            return Err(Error::LayoutMismatch(format!(
                "{}x{} matrix on layout {} of dimension {}",
                matrix.rows(),
                matrix.cols(),
                layout,
                d
            )));
        }
        Ok(Self { layout, matrix })
    }

    pub fn identity(layout: SpaceLayout) -> Self {
        let d = layout.dim();
        Self { layout, matrix: Matrix::identity(d) }
    }

    pub fn zeros(layout: SpaceLayout) -> Self {
        let d = layout.dim();
        Self { layout, matrix: Matrix::zeros(d, d) }
    }

    pub fn scalar(value: T) -> Self {
        Self { layout: SpaceLayout::empty(), matrix: Matrix::diag(&[value]) }
    }

    /// |v⟩⟨v| on the given layout.
    pub fn pure(layout: SpaceLayout, v: &[Complex<T>]) -> Result<Self> {
        Self::new(layout, Matrix::outer(v))
    }

    /// Unnormalized |I⟩⟨I| = Σ_ij |ii⟩⟨jj| between two equal-dimension systems.
    pub fn max_entangled_unnormalized(a: SystemLabel, b: SystemLabel) -> Result<Self> {
        if a.dim != b.dim {
            return Err(Error::InvalidDimension(format!("{a} and {b} differ in dimension")));
        }
        let d = a.dim;
        let mut v = vec![czero::<T>(); d * d];
        for k in 0..d {
            v[k * d + k] = cone();
        }
        Self::pure(SpaceLayout::new(vec![a, b])?, &v)
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn trace(&self) -> Complex<T> {
        self.matrix.trace()
    }

    pub fn scale(&self, s: T) -> Self {
        Self { layout: self.layout.clone(), matrix: self.matrix.scale(s) }
    }

    pub fn map_matrix(&self, f: impl FnOnce(&Matrix<T>) -> Matrix<T>) -> Result<Self> {
        Self::new(self.layout.clone(), f(&self.matrix))
    }

    pub fn cast<U: Real>(&self) -> LabeledOperator<U> {
        LabeledOperator { layout: self.layout.clone(), matrix: self.matrix.cast() }
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.matrix.is_hermitian(tol)
    }

    pub fn hermiticity_residual(&self) -> T {
        self.matrix.max_abs_diff(&self.matrix.adjoint())
    }

    pub fn eigvalsh(&self) -> Vec<T> {
        self.matrix.eigvalsh()
    }

    pub fn min_eigenvalue(&self) -> T {
        self.matrix.min_eigenvalue()
    }

    pub fn rename(&self, from: &str, to: &str) -> Result<Self> {
        let pos = self.layout.position(from).ok_or_else(|| Error::LabelNotFound(from.to_string()))?;
        let mut systems = self.layout.systems.clone();
        systems[pos].name = to.to_string();
        Ok(Self { layout: SpaceLayout::new(systems)?, matrix: self.matrix.clone() })
    }

    fn check_labels(&self, names: &[&str]) -> Result<()> {
        for n in names {
            if !self.layout.contains(n) {
                return Err(Error::LabelNotFound((*n).to_string()));
            }
        }
        Ok(())
    }

    /// Split the layout into (kept, over) offset tables.
    fn split_offsets(&self, over: &[&str]) -> (SpaceLayout, Vec<usize>, Vec<usize>) {
        let strides = self.layout.strides();
        let (mut kd, mut ks, mut td, mut ts) = (vec![], vec![], vec![], vec![]);
        let mut kept = vec![];
        for (s, &st) in self.layout.systems.iter().zip(&strides) {
            if over.contains(&s.name.as_str()) {
                td.push(s.dim);
                ts.push(st);
            } else {
                kd.push(s.dim);
                ks.push(st);
                kept.push(s.clone());
            }
        }
        (SpaceLayout { systems: kept }, offsets(&kd, &ks), offsets(&td, &ts))
    }

    pub fn kron(&self, other: &Self) -> Result<Self> {
        for s in &other.layout.systems {
            if self.layout.contains(&s.name) {
                return Err(Error::LabelCollision(s.name.clone()));
            }
        }
        Ok(Self { layout: self.layout.concat(&other.layout)?, matrix: self.matrix.kron(&other.matrix) })
    }

    pub fn partial_trace(&self, over: &[&str]) -> Result<Self> {
        self.check_labels(over)?;
        let (kept, ko, to) = self.split_offsets(over);
        let n = self.dim();
        let m = self.matrix.data();
        let out = Matrix::from_fn(ko.len(), ko.len(), |a, b| {
            to.iter().map(|&t| m[(ko[a] + t) * n + ko[b] + t]).sum()
        });
        Ok(Self { layout: kept, matrix: out })
    }

    pub fn partial_transpose(&self, over: &[&str]) -> Result<Self> {
        self.check_labels(over)?;
        let (_, ko, to) = self.split_offsets(over);
        let n = self.dim();
        let m = self.matrix.data();
        let mut out = Matrix::zeros(n, n);
        for &rk in &ko {
            for &ck in &ko {
                for &rt in &to {
                    for &ct in &to {
                        out[(rk + rt, ck + ct)] = m[(rk + ct) * n + ck + rt];
                    }
                }
            }
        }
        Ok(Self { layout: self.layout.clone(), matrix: out })
    }

    pub fn transpose(&self) -> Self {
        Self { layout: self.layout.clone(), matrix: self.matrix.transpose() }
    }

    pub fn permute_systems(&self, new_order: &[&str]) -> Result<Self> {
        let perm_ok = new_order.len() == self.layout.len()
            && new_order.iter().collect::<HashSet<_>>().len() == new_order.len()
            && new_order.iter().all(|n| self.layout.contains(n));
        if !perm_ok {
            return Err(Error::LayoutMismatch(format!(
                "{:?} is not a permutation of {}",
                new_order, self.layout
            )));
        }
        if new_order.iter().zip(self.layout.names()).all(|(a, b)| *a == b) {
            return Ok(self.clone());
        }
        let old_strides = self.layout.strides();
        let mut dims = vec![];
        let mut strides = vec![];
        let mut systems = vec![];
        for name in new_order {
            let pos = self.layout.position(name).unwrap();
            dims.push(self.layout.systems[pos].dim);
            strides.push(old_strides[pos]);
            systems.push(self.layout.systems[pos].clone());
        }
        let map = offsets(&dims, &strides);
        let n = self.dim();
        let m = self.matrix.data();
        let out = Matrix::from_fn(n, n, |a, b| m[map[a] * n + map[b]]);
        Ok(Self { layout: SpaceLayout { systems }, matrix: out })
    }

    /// Reorder to match `target`'s system order (same label set required).
    pub fn align_to(&self, target: &SpaceLayout) -> Result<Self> {
        if !self.layout.same_systems(target) {
            return Err(Error::LayoutMismatch(format!("{} vs {}", self.layout, target)));
        }
        self.permute_systems(&target.names())
    }

    /// Tensor with the identity on every system of `full` missing here, then
    /// reorder to `full`.
    pub fn extend_to(&self, full: &SpaceLayout) -> Result<Self> {
        let missing: Vec<SystemLabel> =
            full.systems.iter().filter(|s| !self.layout.contains(&s.name)).cloned().collect();
        let ext = self.kron(&Self::identity(SpaceLayout::new(missing)?))?;
        ext.align_to(full)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let o = other.align_to(&self.layout)?;
        Ok(Self { layout: self.layout.clone(), matrix: &self.matrix + &o.matrix })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let o = other.align_to(&self.layout)?;
        Ok(Self { layout: self.layout.clone(), matrix: &self.matrix - &o.matrix })
    }

    /// Max-entry distance after aligning `other` to this layout.
    pub fn distance(&self, other: &Self) -> Result<T> {
        let o = other.align_to(&self.layout)?;
        Ok(self.matrix.max_abs_diff(&o.matrix))
    }

    /// Hermitian product Tr[A B], aligned by label.
    pub fn trace_product(&self, other: &Self) -> Result<Complex<T>> {
        let o = other.align_to(&self.layout)?;
        Ok(self.matrix.trace_product(&o.matrix))
    }
}

impl<T: Real> fmt::Display for LabeledOperator<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "operator on {}", self.layout)?;
        let n = self.dim();
        for i in 0..n {
            let row: Vec<String> = (0..n)
                .map(|j| {
                    let z = self.matrix[(i, j)];
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  {}", row.join(" "))?;
        }
        Ok(())
    }
}

pub fn kron<T: Real>(a: &LabeledOperator<T>, b: &LabeledOperator<T>) -> Result<LabeledOperator<T>> {
    a.kron(b)
}

pub fn partial_trace<T: Real>(m: &LabeledOperator<T>, over: &[&str]) -> Result<LabeledOperator<T>> {
    m.partial_trace(over)
}

pub fn partial_transpose<T: Real>(m: &LabeledOperator<T>, over: &[&str]) -> Result<LabeledOperator<T>> {
    m.partial_transpose(over)
}

pub fn permute_systems<T: Real>(m: &LabeledOperator<T>, new_order: &[&str]) -> Result<LabeledOperator<T>> {
    m.permute_systems(new_order)
}
