//! Choi operators of channels, the link product, and quantum combs
//! (circuit fragments with definite causal order).

use std::collections::HashMap;

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{czero, Real};
use crate::tensor::{LabeledOperator, SpaceLayout, SystemLabel};

#[derive(Clone, Debug)]
pub enum ChannelKind<T> {
    Unitary(Matrix<T>),
    Kraus(Vec<Matrix<T>>),
    State(Matrix<T>),
    Trace,
}

/// A CPTP map with its Choi operator on `[inputs…, outputs…]`.
#[derive(Clone, Debug)]
pub struct Channel<T> {
    pub choi: LabeledOperator<T>,
    pub inputs: SpaceLayout,
    pub outputs: SpaceLayout,
}

fn vectorize<T: Real>(k: &Matrix<T>, din: usize, dout: usize) -> Vec<Complex<T>> {
    let mut v = vec![czero(); din * dout];
    for i in 0..din {
        for o in 0..dout {
            v[i * dout + o] = k[(o, i)];
        }
    }
    v
}

pub fn choi_of_channel<T: Real>(
    kind: ChannelKind<T>,
    inputs: &[SystemLabel],
    outputs: &[SystemLabel],
) -> Result<Channel<T>> {
    let tol = T::default_tol();
    let inl = SpaceLayout::new(inputs.to_vec())?;
    let outl = SpaceLayout::new(outputs.to_vec())?;
    let full = inl.concat(&outl)?;
    let (din, dout) = (inl.dim(), outl.dim());
    let check_shape = |m: &Matrix<T>, what: &str| -> Result<()> {
        if m.rows() != dout || m.cols() != din {
            return Err(Error::InvalidChannel(format!(
                "{what} is {}x{}, expected {dout}x{din}",
                m.rows(),
                m.cols()
            )));
        }
        Ok(())
    };
    let choi = match kind {
        ChannelKind::Unitary(u) => {
            check_shape(&u, "unitary")?;
            if !u.is_unitary(tol) {
                return Err(Error::InvalidChannel("matrix is not unitary".into()));
            }
            LabeledOperator::pure(full, &vectorize(&u, din, dout))?
        }
        ChannelKind::Kraus(ks) => {
            if ks.is_empty() {
                return Err(Error::InvalidChannel("empty Kraus list".into()));
            }
            let mut acc = Matrix::zeros(din, din);
            let mut choi = Matrix::zeros(din * dout, din * dout);
            for k in &ks {
                check_shape(k, "Kraus operator")?;
                acc = &acc + &k.adjoint().matmul(k);
                choi = &choi + &Matrix::outer(&vectorize(k, din, dout));
            }
            let dev = acc.max_abs_diff(&Matrix::identity(din));
            if dev > tol {
                return Err(Error::InvalidChannel(format!("sum of K†K deviates from identity by {dev}")));
            }
            LabeledOperator::new(full, choi)?
        }
        ChannelKind::State(rho) => {
            if din != 1 {
                return Err(Error::InvalidChannel("a state preparation takes no inputs".into()));
            }
            if rho.rows() != dout || rho.cols() != dout {
                return Err(Error::InvalidChannel(format!(
                    "state is {}x{}, expected {dout}x{dout}",
                    rho.rows(),
                    rho.cols()
                )));
            }
            check_state(&rho, tol)?;
            LabeledOperator::new(full, rho)?
        }
        ChannelKind::Trace => {
            if dout != 1 {
                return Err(Error::InvalidChannel("the trace channel has no outputs".into()));
            }
            LabeledOperator::identity(full)
        }
    };
    Ok(Channel { choi, inputs: inl, outputs: outl })
}

fn check_state<T: Real>(rho: &Matrix<T>, tol: T) -> Result<()> {
    if !rho.is_hermitian(tol) {
        return Err(Error::InvalidState("not Hermitian".into()));
    }
    let tr = rho.trace().re;
    if (tr - T::one()).abs() > tol {
        return Err(Error::InvalidState(format!("trace {tr} ≠ 1")));
    }
    let lam = rho.min_eigenvalue();
    if lam < -tol {
        return Err(Error::InvalidState(format!("negative eigenvalue {lam}")));
    }
    Ok(())
}

impl<T: Real> Channel<T> {
    pub fn unitary(u: Matrix<T>, inputs: &[SystemLabel], outputs: &[SystemLabel]) -> Result<Self> {
        choi_of_channel(ChannelKind::Unitary(u), inputs, outputs)
    }

    pub fn identity(input: SystemLabel, output: SystemLabel) -> Result<Self> {
        let d = input.dim;
        Self::unitary(Matrix::identity(d), &[input], &[output])
    }

    pub fn state(rho: Matrix<T>, outputs: &[SystemLabel]) -> Result<Self> {
        choi_of_channel(ChannelKind::State(rho), &[], outputs)
    }

    pub fn trace(inputs: &[SystemLabel]) -> Result<Self> {
        choi_of_channel(ChannelKind::Trace, inputs, &[])
    }

    /// Choi operator given directly; checked for CP and TP.
    pub fn from_choi(choi: LabeledOperator<T>, inputs: &[SystemLabel], outputs: &[SystemLabel]) -> Result<Self> {
        let tol = T::default_tol();
        let inl = SpaceLayout::new(inputs.to_vec())?;
        let outl = SpaceLayout::new(outputs.to_vec())?;
        let choi = choi.align_to(&inl.concat(&outl)?)?;
        if !choi.is_hermitian(tol) || choi.min_eigenvalue() < -tol {
            return Err(Error::InvalidChannel("Choi operator is not positive semidefinite".into()));
        }
        let ch = Self { choi, inputs: inl, outputs: outl };
        let dev = ch.tp_residual()?;
        if dev > tol {
            return Err(Error::InvalidChannel(format!("not trace preserving (residual {dev})")));
        }
        Ok(ch)
    }

    pub fn tp_residual(&self) -> Result<T> {
        let outs = self.outputs.names();
        let marg = self.choi.partial_trace(&outs)?;
        marg.distance(&LabeledOperator::identity(self.inputs.clone()))
    }

    /// Discard some outputs.
    pub fn trace_outputs(&self, names: &[&str]) -> Result<Self> {
        for n in names {
            if !self.outputs.contains(n) {
                return Err(Error::LabelNotFound((*n).to_string()));
            }
        }
        Ok(Self {
            choi: self.choi.partial_trace(names)?,
            inputs: self.inputs.clone(),
            outputs: self.outputs.without(names),
        })
    }

    /// Independent parallel composition.
    pub fn parallel(&self, other: &Self) -> Result<Self> {
        let inputs = self.inputs.concat(&other.inputs)?;
        let outputs = self.outputs.concat(&other.outputs)?;
        let choi = self.choi.kron(&other.choi)?.align_to(&inputs.concat(&outputs)?)?;
        Ok(Self { choi, inputs, outputs })
    }

    /// E(ρ) = J ⋆ ρ; `rho` must live exactly on the channel's inputs.
    pub fn apply(&self, rho: &LabeledOperator<T>) -> Result<LabeledOperator<T>> {
        if !rho.layout().same_systems(&self.inputs) {
            return Err(Error::LayoutMismatch(format!("state on {} for inputs {}", rho.layout(), self.inputs)));
        }
        link_product(&self.choi, rho)?.align_to(&self.outputs)
    }

    /// Sequential composition: `self` first, then `next` (shared labels are wired).
    pub fn then(&self, next: &Self) -> Result<Self> {
        let shared: Vec<&str> =
            next.inputs.names().into_iter().filter(|n| self.outputs.contains(n)).collect();
        let mut ins = self.inputs.systems().to_vec();
        ins.extend(next.inputs.systems().iter().filter(|s| !shared.contains(&s.name.as_str())).cloned());
        let mut outs: Vec<SystemLabel> =
            self.outputs.systems().iter().filter(|s| !shared.contains(&s.name.as_str())).cloned().collect();
        outs.extend(next.outputs.systems().iter().cloned());
        let inputs = SpaceLayout::new(ins)?;
        let outputs = SpaceLayout::new(outs)?;
        let choi = link_product(&next.choi, &self.choi)?.align_to(&inputs.concat(&outputs)?)?;
        Ok(Self { choi, inputs, outputs })
    }
}

/// M ⋆ N = Tr_Y[M^{T_Y} N] over the shared labels Y. The result lives on
/// M's unshared systems followed by N's.
pub fn link_product<T: Real>(m: &LabeledOperator<T>, n: &LabeledOperator<T>) -> Result<LabeledOperator<T>> {
    let mut shared = vec![];
    for s in m.layout().systems() {
        if let Some(t) = n.layout().get(&s.name) {
            if t.dim != s.dim {
                return Err(Error::LayoutMismatch(format!(
                    "`{}` has dimension {} and {}",
                    s.name, s.dim, t.dim
                )));
            }
            shared.push(s.name.as_str());
        }
    }
    if shared.is_empty() {
        return m.kron(n);
    }
    let x = m.layout().without(&shared);
    let z = n.layout().without(&shared);
    let y = m.layout().select(&shared)?;
    let mut m_order = x.names();
    m_order.extend(y.names());
    let mut n_order = y.names();
    n_order.extend(z.names());
    let mp = m.permute_systems(&m_order)?;
    let np = n.permute_systems(&n_order)?;
    let (dx, dy, dz) = (x.dim(), y.dim(), z.dim());
    let mm = mp.matrix().data();
    let nn = np.matrix().data();
    let (mdim, ndim) = (dx * dy, dy * dz);
    // R[(x z),(x' z')] = Σ_{y,y'} M[(x y'),(x' y)] · N[(y' z),(y z')]
    let out = Matrix::from_fn(dx * dz, dx * dz, |r, c| {
        let (xi, zi) = (r / dz, r % dz);
        let (xj, zj) = (c / dz, c % dz);
        let mut acc = czero::<T>();
        for yp in 0..dy {
            let mrow = (xi * dy + yp) * mdim + xj * dy;
            let nrow = (yp * dz + zi) * ndim;
            for yy in 0..dy {
                acc += mm[mrow + yy] * nn[nrow + yy * dz + zj];
            }
        }
        acc
    });
    LabeledOperator::new(x.concat(&z)?, out)
}

/// One time step of a comb: the open systems it receives and emits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Slot {
    pub inputs: Vec<SystemLabel>,
    pub outputs: Vec<SystemLabel>,
}

/// Slot structure H₁ | H₂→H₃ | … | H_{2a−2}→H_{2a−1} of an a-comb.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FragmentShape {
    pub steps: Vec<Slot>,
}

impl FragmentShape {
    pub fn new(steps: Vec<Slot>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::ShapeError("a comb needs at least one step".into()));
        }
        if !steps[0].inputs.is_empty() {
            return Err(Error::ShapeError("the first step is a state and takes no inputs".into()));
        }
        let shape = Self { steps };
        SpaceLayout::new(shape.open_systems())
            .map_err(|e| Error::ShapeError(format!("open systems must be distinct: {e}")))?;
        Ok(shape)
    }

    /// Causal map A | B → C with all dimensions `d`.
    pub fn causal_map(d: usize) -> Self {
        Self::new(vec![
            Slot { inputs: vec![], outputs: vec![SystemLabel::new("A", d)] },
            Slot { inputs: vec![SystemLabel::new("B", d)], outputs: vec![SystemLabel::new("C", d)] },
        ])
        .expect("static shape")
    }

    pub fn a(&self) -> usize {
        self.steps.len()
    }

    pub fn open_systems(&self) -> Vec<SystemLabel> {
        self.steps.iter().flat_map(|s| s.inputs.iter().chain(&s.outputs).cloned()).collect()
    }

    pub fn layout(&self) -> SpaceLayout {
        SpaceLayout::new(self.open_systems()).expect("validated at construction")
    }

    pub fn input_names(&self) -> Vec<&str> {
        self.steps.iter().flat_map(|s| s.inputs.iter().map(|l| l.name.as_str())).collect()
    }

    pub fn output_names(&self) -> Vec<&str> {
        self.steps.iter().flat_map(|s| s.outputs.iter().map(|l| l.name.as_str())).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.steps.iter().flat_map(|s| &s.inputs).map(|l| l.dim).product()
    }

    pub fn output_dim(&self) -> usize {
        self.steps.iter().flat_map(|s| &s.outputs).map(|l| l.dim).product()
    }
}

fn names(labels: &[SystemLabel]) -> Vec<&str> {
    labels.iter().map(|l| l.name.as_str()).collect()
}

fn dim(labels: &[SystemLabel]) -> usize {
    labels.iter().map(|l| l.dim).product()
}

#[derive(Clone, Debug)]
pub struct CircuitFragment<T> {
    pub shape: FragmentShape,
    pub choi: LabeledOperator<T>,
}

impl<T: Real> CircuitFragment<T> {
    /// Wrap an operator with a shape; the operator is reordered to the
    /// shape's canonical layout but not otherwise checked.
    pub fn new(shape: FragmentShape, choi: LabeledOperator<T>) -> Result<Self> {
        let choi = choi.align_to(&shape.layout()).map_err(|e| Error::ShapeError(e.to_string()))?;
        Ok(Self { shape, choi })
    }

    pub fn validate(&self, tol: T) -> ValidationReport {
        validate_comb(&self.choi, &self.shape, tol)
    }
}

/// Assemble J = J^a ⋆ … ⋆ J² ⋆ ρ. Labels produced by one step and consumed
/// by the next are memory and are contracted immediately; everything else
/// is an open system of the comb.
pub fn build_fragment<T: Real>(initial: &LabeledOperator<T>, steps: &[Channel<T>]) -> Result<CircuitFragment<T>> {
    let tol = T::default_tol();
    check_state(initial.matrix(), tol)?;

    // step index that produced each label (0 = initial state)
    let mut producer: HashMap<String, usize> = HashMap::new();
    for s in initial.layout().systems() {
        producer.insert(s.name.clone(), 0);
    }
    let mut consumed: HashMap<String, usize> = HashMap::new();
    for (k, ch) in steps.iter().enumerate() {
        let step = k + 1;
        for s in ch.inputs.systems() {
            match producer.get(&s.name) {
                Some(&p) if p + 1 != step => {
                    return Err(Error::ShapeError(format!(
                        "memory `{}` produced at step {} is consumed at step {}",
                        s.name,
                        p + 1,
                        step + 1
                    )))
                }
                Some(_) => {
                    if consumed.insert(s.name.clone(), step).is_some() {
                        return Err(Error::ShapeError(format!("`{}` consumed twice", s.name)));
                    }
                }
                None => {
                    if consumed.contains_key(&s.name) {
                        return Err(Error::ShapeError(format!("`{}` used twice", s.name)));
                    }
                }
            }
        }
        for s in ch.outputs.systems() {
            if producer.contains_key(&s.name) || ch.inputs.contains(&s.name) {
                return Err(Error::ShapeError(format!("label `{}` produced twice", s.name)));
            }
            producer.insert(s.name.clone(), step);
        }
        // an open input may not reuse any label seen so far
        for s in ch.inputs.systems() {
            if !producer.contains_key(&s.name) && steps[..k].iter().any(|c| c.inputs.contains(&s.name)) {
                return Err(Error::ShapeError(format!("input `{}` appears in two steps", s.name)));
            }
        }
    }

    let is_memory = |name: &str| consumed.contains_key(name);
    let mut slots = vec![Slot {
        inputs: vec![],
        outputs: initial.layout().systems().iter().filter(|s| !is_memory(&s.name)).cloned().collect(),
    }];
    for ch in steps {
        slots.push(Slot {
            inputs: ch.inputs.systems().iter().filter(|s| !producer.contains_key(&s.name)).cloned().collect(),
            outputs: ch.outputs.systems().iter().filter(|s| !is_memory(&s.name)).cloned().collect(),
        });
    }
    let shape = FragmentShape::new(slots)?;

    let mut running = initial.clone();
    for ch in steps {
        running = link_product(&ch.choi, &running)?;
    }
    CircuitFragment::new(shape, running)
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    pub tol: f64,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub(crate) fn push<T: Real>(&mut self, name: impl Into<String>, residual: T) {
        let r = residual.to_f64().unwrap_or(f64::INFINITY);
        self.checks.push(Check { name: name.into(), residual: r, passed: r <= self.tol });
    }

    pub(crate) fn fail(&mut self, name: impl Into<String>) {
        self.checks.push(Check { name: name.into(), residual: f64::INFINITY, passed: false });
    }
}

/// Report-style comb check: PSD, TP, and the nested non-signalling
/// conditions Tr_{H_{2i−1}} J(i) = J(i−1) ⊗ 1_{H_{2i−2}}.
pub fn validate_comb<T: Real>(j: &LabeledOperator<T>, shape: &FragmentShape, tol: T) -> ValidationReport {
    let mut report = ValidationReport { tol: tol.to_f64().unwrap_or(0.0), checks: vec![] };
    let j = match j.align_to(&shape.layout()) {
        Ok(j) => j,
        Err(_) => {
            report.fail("layout");
            return report;
        }
    };
    report.push("hermitian", j.hermiticity_residual());
    report.push("psd", (-j.min_eigenvalue()).max(T::zero()));

    let tp = j
        .partial_trace(&shape.output_names())
        .and_then(|m| m.distance(&LabeledOperator::identity(SpaceLayout::new(
            shape.steps.iter().flat_map(|s| s.inputs.clone()).collect(),
        )?)));
    match tp {
        Ok(r) => report.push("tp", r),
        Err(_) => report.fail("tp"),
    }

    let mut current = j;
    for i in (1..shape.a()).rev() {
        let slot = &shape.steps[i];
        let outs = names(&slot.outputs);
        let ins = names(&slot.inputs);
        let res = (|| -> Result<(T, LabeledOperator<T>)> {
            let marg = current.partial_trace(&outs)?;
            let prev = marg.partial_trace(&ins)?.scale(T::one() / T::from_usize(dim(&slot.inputs)).unwrap());
            let ext = prev.kron(&LabeledOperator::identity(SpaceLayout::new(slot.inputs.clone())?))?;
            Ok((marg.distance(&ext)?, prev))
        })();
        match res {
            Ok((r, prev)) => {
                report.push(format!("ns[{}]", i + 1), r);
                current = prev;
            }
            Err(_) => {
                report.fail(format!("ns[{}]", i + 1));
                return report;
            }
        }
    }
    report.push("normalization", (current.trace().re - T::one()).abs());
    report
}
