//! Random instances and independent oracles shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use qcomb::comb::{build_fragment, Channel, CircuitFragment, FragmentShape};
use qcomb::linalg::Matrix;
use qcomb::measurement::{build_tester, InteractiveMeasurement, REGISTER};
use qcomb::tensor::{LabeledOperator, SpaceLayout, SystemLabel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type C = Complex64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sys(name: &str, d: usize) -> SystemLabel {
    SystemLabel::new(name, d)
}

pub fn layout(names: &[(&str, usize)]) -> SpaceLayout {
    SpaceLayout::new(names.iter().map(|(n, d)| sys(n, *d)).collect()).unwrap()
}

pub fn gaussian(rng: &mut impl Rng) -> C {
    C::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_vector(rng: &mut impl Rng, n: usize) -> Vec<C> {
    let v: Vec<C> = (0..n).map(|_| gaussian(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// Haar unitary: Gram–Schmidt on a complex Ginibre matrix, column by column.
pub fn haar_unitary(rng: &mut impl Rng, n: usize) -> Matrix<f64> {
    let mut cols: Vec<Vec<C>> = vec![];
    while cols.len() < n {
        let mut v: Vec<C> = (0..n).map(|_| gaussian(rng)).collect();
        for c in &cols {
            let ip: C = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in v.iter_mut().zip(c) {
                *x -= ip * y;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            cols.push(v.into_iter().map(|z| z / norm).collect());
        }
    }
    Matrix::from_fn(n, n, |r, c| cols[c][r])
}

pub fn random_hermitian(rng: &mut impl Rng, n: usize) -> Matrix<f64> {
    let g = Matrix::from_fn(n, n, |_, _| gaussian(rng));
    (&g + &g.adjoint()).scale(0.5)
}

/// Density matrix of the given rank (Wishart-style).
pub fn random_density(rng: &mut impl Rng, n: usize, rank: usize) -> Matrix<f64> {
    let g = Matrix::from_fn(n, rank, |_, _| gaussian(rng));
    let m = g.matmul(&g.adjoint());
    let t = m.trace().re;
    m.scale(1.0 / t)
}

/// Random a = 2 comb A | B → C: pure state on (A, E) followed by a Haar
/// unitary on (B, E) → (C, F) with F discarded.
pub fn random_causal_fragment(rng: &mut impl Rng, d: usize) -> CircuitFragment<f64> {
    let psi = random_vector(rng, d * d);
    let rho = LabeledOperator::new(layout(&[("A", d), ("E", d)]), Matrix::outer(&psi)).unwrap();
    let u = haar_unitary(rng, d * d);
    let step = Channel::unitary(u, &[sys("B", d), sys("E", d)], &[sys("C", d), sys("F", d)])
        .unwrap()
        .trace_outputs(&["F"])
        .unwrap();
    build_fragment(&rho, &[step]).unwrap()
}

/// Random POVM with `k` elements on dimension `n`: G_i ↦ S^{-1/2} G_i S^{-1/2}.
pub fn random_povm(rng: &mut impl Rng, n: usize, k: usize) -> Vec<Matrix<f64>> {
    let gs: Vec<Matrix<f64>> = (0..k)
        .enumerate()
        .map(|(i, _)| {
            // the first element has full rank so that S is invertible
            let rank = if i == 0 { n } else { 1 + rng.random_range(0..n) };
            random_density(rng, n, rank)
        })
        .collect();
    let s = gs.iter().skip(1).fold(gs[0].clone(), |acc, g| &acc + g);
    let (vals, vecs) = s.eigh();
    let inv_sqrt = Matrix::diag(&vals.iter().map(|v| 1.0 / v.sqrt()).collect::<Vec<_>>());
    let w = vecs.matmul(&inv_sqrt).matmul(&vecs.adjoint());
    gs.iter().map(|g| w.matmul(g).matmul(&w)).collect()
}

/// Random tester on the qubit-or-qudit causal map: A is sent through a
/// Haar unitary into the register, B receives a random state, and (R, C)
/// is measured with a random `k`-outcome POVM.
pub fn random_tester(rng: &mut impl Rng, d: usize, k: usize) -> InteractiveMeasurement<f64> {
    let keep = Channel::unitary(haar_unitary(rng, d), &[sys("A", d)], &[sys(REGISTER, d)]).unwrap();
    let rank = 1 + rng.random_range(0..d);
    let feed = Channel::state(random_density(rng, d, rank), &[sys("B", d)]).unwrap();
    let lam = keep.parallel(&feed).unwrap();
    let povm: Vec<_> = random_povm(rng, d * d, k)
        .into_iter()
        .map(|m| LabeledOperator::new(layout(&[(REGISTER, d), ("C", d)]), m).unwrap())
        .collect();
    build_tester(&FragmentShape::causal_map(d), &[lam], &povm).unwrap()
}

/// Pure state over named subsystems, most significant first.
#[derive(Clone, Debug)]
pub struct StateVector {
    pub names: Vec<String>,
    pub dims: Vec<usize>,
    pub amp: Vec<C>,
}

impl StateVector {
    pub fn new(parts: &[(&str, usize)], amp: Vec<C>) -> Self {
        let dims: Vec<usize> = parts.iter().map(|p| p.1).collect();
        assert_eq!(amp.len(), dims.iter().product::<usize>());
        Self { names: parts.iter().map(|p| p.0.to_string()).collect(), dims, amp }
    }

    pub fn tensor(&self, other: &Self) -> Self {
        let mut amp = Vec::with_capacity(self.amp.len() * other.amp.len());
        for a in &self.amp {
            for b in &other.amp {
                amp.push(a * b);
            }
        }
        Self {
            names: self.names.iter().chain(&other.names).cloned().collect(),
            dims: self.dims.iter().chain(&other.dims).copied().collect(),
            amp,
        }
    }

    fn pos(&self, name: &str) -> usize {
        self.names.iter().position(|n| n == name).unwrap_or_else(|| panic!("no subsystem {name}"))
    }

    fn digits(&self, mut i: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            out[k] = i % self.dims[k];
            i /= self.dims[k];
        }
        out
    }

    fn index(&self, digits: &[usize]) -> usize {
        digits.iter().zip(&self.dims).fold(0, |acc, (x, d)| acc * d + x)
    }

    /// Apply `u` to the listed subsystems (first = most significant) and
    /// relabel them as `outs` (same dimensions).
    pub fn apply(&mut self, u: &Matrix<f64>, on: &[&str], outs: &[&str]) {
        let pos: Vec<usize> = on.iter().map(|n| self.pos(n)).collect();
        let sub_dims: Vec<usize> = pos.iter().map(|&p| self.dims[p]).collect();
        let mut out = vec![C::new(0.0, 0.0); self.amp.len()];
        for (i, a) in self.amp.iter().enumerate() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            let dg = self.digits(i);
            let col = pos.iter().zip(&sub_dims).fold(0, |acc, (&p, d)| acc * d + dg[p]);
            for row in 0..u.rows() {
                let mut nd = dg.clone();
                let mut r = row;
                for k in (0..pos.len()).rev() {
                    nd[pos[k]] = r % sub_dims[k];
                    r /= sub_dims[k];
                }
                out[self.index(&nd)] += u[(row, col)] * a;
            }
        }
        self.amp = out;
        for (p, n) in pos.iter().zip(outs) {
            self.names[*p] = n.to_string();
        }
    }

    /// Reduced density matrix on `keep`, in the listed order.
    pub fn reduced(&self, keep: &[&str]) -> Matrix<f64> {
        let pos: Vec<usize> = keep.iter().map(|n| self.pos(n)).collect();
        let kd: Vec<usize> = pos.iter().map(|&p| self.dims[p]).collect();
        let n: usize = kd.iter().product();
        let mut rho = Matrix::zeros(n, n);
        // group amplitudes by the traced-out digits
        let mut groups: std::collections::BTreeMap<Vec<usize>, Vec<(usize, C)>> = Default::default();
        for (i, a) in self.amp.iter().enumerate() {
            let dg = self.digits(i);
            let key: Vec<usize> = (0..dg.len()).filter(|k| !pos.contains(k)).map(|k| dg[k]).collect();
            let idx = pos.iter().zip(&kd).fold(0, |acc, (&p, d)| acc * d + dg[p]);
            groups.entry(key).or_default().push((idx, *a));
        }
        for g in groups.values() {
            for (i, a) in g {
                for (j, b) in g {
                    rho[(*i, *j)] += a * b.conj();
                }
            }
        }
        rho
    }
}

/// (|00⟩ + |11⟩ + …)/√d on two named systems.
pub fn max_entangled(a: &str, b: &str, d: usize) -> StateVector {
    let mut amp = vec![C::new(0.0, 0.0); d * d];
    for k in 0..d {
        amp[k * d + k] = C::new(1.0 / (d as f64).sqrt(), 0.0);
    }
    StateVector::new(&[(a, d), (b, d)], amp)
}

/// Bell basis written out independently: |Φ_(a,b)⟩ = Σ_k ω^{bk}|k⟩|k+a⟩/√d.
pub fn bell_vectors(d: usize) -> Vec<Vec<C>> {
    let mut out = vec![];
    for a in 0..d {
        for b in 0..d {
            let mut v = vec![C::new(0.0, 0.0); d * d];
            for k in 0..d {
                let th = 2.0 * std::f64::consts::PI * ((b * k) % d) as f64 / d as f64;
                v[k * d + (k + a) % d] = C::from_polar(1.0 / (d as f64).sqrt(), th);
            }
            out.push(v);
        }
    }
    out
}

/// ⟨v| M ρ M† |v⟩ for every rotated Bell vector.
pub fn bell_probabilities(rho: &Matrix<f64>, m: &Matrix<f64>, d: usize) -> Vec<f64> {
    let r = m.matmul(rho).matmul(&m.adjoint());
    bell_vectors(d)
        .iter()
        .map(|v| {
            let rv = r.apply(v);
            v.iter().zip(&rv).map(|(a, b)| a.conj() * b).sum::<C>().re
        })
        .collect()
}

/// Circuit-level simulation of the CC and DC indicators on the
/// system–environment circuit with interaction `u` on (B, E).
pub fn simulate_indicators(
    d: usize,
    psi_ae: &[C],
    u: &Matrix<f64>,
    us: [&Matrix<f64>; 4],
) -> (Vec<f64>, Vec<f64>) {
    let id = Matrix::identity(d);
    // CC: A is kept as the register, B is half of a maximally entangled pair with a purifier G
    let mut s = StateVector::new(&[("A", d), ("E", d)], psi_ae.to_vec()).tensor(&max_entangled("B", "G", d));
    s.apply(u, &["B", "E"], &["C", "F"]);
    let cc = bell_probabilities(&s.reduced(&["A", "C"]), &us[0].kron(us[1]), d);
    // DC: A is discarded, (B, R) start in (U3 ⊗ 1)|Φ₀⟩
    let mut br = max_entangled("B", "R", d);
    br.apply(us[2], &["B"], &["B"]);
    let mut s = StateVector::new(&[("A", d), ("E", d)], psi_ae.to_vec()).tensor(&br);
    s.apply(u, &["B", "E"], &["C", "F"]);
    let dc = bell_probabilities(&s.reduced(&["C", "R"]), &us[3].kron(&id), d);
    (cc, dc)
}

/// A doubly stochastic D with x = y·D for x ≺ y, built from at most n − 1
/// T-transforms (the classical constructive proof). Both inputs are
/// sorted nonincreasing.
pub fn t_transform_witness(y: &[f64], x: &[f64]) -> Matrix<f64> {
    let n = y.len();
    let mut cur = y.to_vec();
    let mut d = Matrix::<f64>::identity(n);
    for _ in 0..2 * n {
        // j: last index with cur_j > x_j; k: first index after j with cur_k < x_k
        let Some(j) = (0..n).rev().find(|&i| cur[i] > x[i] + 1e-15) else { break };
        let Some(k) = (j + 1..n).find(|&i| cur[i] < x[i] - 1e-15) else { break };
        let delta = (cur[j] - x[j]).min(x[k] - cur[k]);
        let gap = cur[j] - cur[k];
        let t = if gap > 0.0 { 1.0 - delta / gap } else { 1.0 };
        // T = t·1 + (1 − t)·(swap j,k); row vector update cur ← cur·T
        let mut tm = Matrix::<f64>::identity(n);
        tm[(j, j)] = C::new(t, 0.0);
        tm[(k, k)] = C::new(t, 0.0);
        tm[(j, k)] = C::new(1.0 - t, 0.0);
        tm[(k, j)] = C::new(1.0 - t, 0.0);
        let (a, b) = (cur[j], cur[k]);
        cur[j] = t * a + (1.0 - t) * b;
        cur[k] = (1.0 - t) * a + t * b;
        d = d.matmul(&tm);
    }
    d
}

fn bell_op(a: &str, b: &str, d: usize) -> LabeledOperator<f64> {
    LabeledOperator::max_entangled_unnormalized(sys(a, d), sys(b, d)).unwrap()
}

/// ρ_A ⊗ |I⟩⟨I|_{BC}: a valid causal map for any state ρ_A.
pub fn state_times_identity(rho: Matrix<f64>, d: usize) -> LabeledOperator<f64> {
    LabeledOperator::new(layout(&[("A", d)]), rho).unwrap().kron(&bell_op("B", "C", d)).unwrap()
}

pub fn shape3(d: usize) -> FragmentShape {
    use qcomb::comb::Slot;
    FragmentShape::new(vec![
        Slot { inputs: vec![], outputs: vec![sys("A", d)] },
        Slot { inputs: vec![sys("B", d)], outputs: vec![sys("C", d)] },
        Slot { inputs: vec![sys("D", d)], outputs: vec![sys("G", d)] },
    ])
    .unwrap()
}

/// Ten operators that are not valid combs for their declared shape, each
/// breaking a different condition.
pub fn constructed_violations() -> Vec<(&'static str, LabeledOperator<f64>, FragmentShape)> {
    let d = 2;
    let cm = FragmentShape::causal_map(d);
    let half = Matrix::<f64>::identity(d).scale(0.5);
    let good = state_times_identity(half.clone(), d);
    let mut out = vec![];

    let mut m = good.matrix().clone();
    m[(0, 1)] += C::new(0.0, 0.2);
    out.push(("non-hermitian", LabeledOperator::new(good.layout().clone(), m).unwrap(), cm.clone()));

    // kernel direction of the saturating comb given weight −0.1
    let mut kv = vec![C::new(0.0, 0.0); 8];
    kv[1] = C::new(1.0, 0.0);
    let m = &good.matrix().clone() - &Matrix::outer(&kv).scale(0.1);
    out.push(("negative eigenvalue", LabeledOperator::new(good.layout().clone(), m).unwrap(), cm.clone()));

    out.push(("trace deficit", good.scale(0.9), cm.clone()));
    out.push(("trace excess", good.scale(1.1), cm.clone()));

    // A copies B: signalling backwards in time
    let mut sig = Matrix::zeros(8, 8);
    for b in 0..2 {
        for c in 0..2 {
            let i = b * 4 + b * 2 + c;
            sig[(i, i)] = C::new(1.0, 0.0);
        }
    }
    let sig = sig.scale(0.5);
    out.push(("backward signalling", LabeledOperator::new(good.layout().clone(), sig).unwrap(), cm.clone()));

    let relabeled = LabeledOperator::new(layout(&[("A", 2), ("B", 2), ("Q", 2)]), good.matrix().clone()).unwrap();
    out.push(("wrong labels", relabeled, cm.clone()));

    out.push(("wrong dimension", state_times_identity(Matrix::identity(3).scale(1.0 / 3.0), 3), cm.clone()));

    // amplitude damping with one Kraus operator missing
    let k0 = Matrix::from_rows(&[vec![C::new(1.0, 0.0), C::new(0.0, 0.0)], vec![C::new(0.0, 0.0), C::new(0.6, 0.0)]]);
    let ch = qcomb::comb::choi_of_channel(
        qcomb::comb::ChannelKind::Kraus(vec![k0]),
        &[sys("B", 2)],
        &[sys("C", 2)],
    );
    let leaky = match ch {
        Ok(c) => c.choi,
        // rejected at construction: build the Choi directly
        Err(_) => {
            let v = vec![C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(0.6, 0.0)];
            LabeledOperator::new(layout(&[("B", 2), ("C", 2)]), Matrix::outer(&v)).unwrap()
        }
    };
    let leaky = LabeledOperator::new(layout(&[("A", 2)]), half.clone()).unwrap().kron(&leaky).unwrap();
    out.push(("non-trace-preserving step", leaky, cm.clone()));

    // three slots, C depends on the later input D
    let j = LabeledOperator::new(layout(&[("A", 2)]), half.clone())
        .unwrap()
        .kron(&LabeledOperator::identity(layout(&[("B", 2)])))
        .unwrap()
        .kron(&bell_op("D", "C", 2))
        .unwrap()
        .kron(&LabeledOperator::identity(layout(&[("G", 2)])).scale(0.5))
        .unwrap();
    out.push(("future input signals to past output", j, shape3(2)));

    let bad_state = Matrix::diag(&[1.5, -0.5]);
    out.push(("indefinite initial state", state_times_identity(bad_state, 2), cm));
    out
}

/// a = 1 shape: a single state on a qubit A.
pub fn state_shape() -> FragmentShape {
    use qcomb::comb::Slot;
    FragmentShape::new(vec![Slot { inputs: vec![], outputs: vec![sys("A", 2)] }]).unwrap()
}

/// A qubit POVM with `k` outcomes as an a = 1 tester.
pub fn random_state_tester(rng: &mut impl Rng, k: usize) -> InteractiveMeasurement<f64> {
    let elems = random_povm(rng, 2, k)
        .into_iter()
        .map(|m| LabeledOperator::new(layout(&[("A", 2)]), m).unwrap())
        .collect();
    InteractiveMeasurement::new(state_shape(), elems).unwrap()
}

/// max over `samples` Haar-random pure states of (1/c)·max_x ⟨ψ|M_x|ψ⟩.
/// Elements are transposed to match the Tr[Jᵀ ρ] pairing.
pub fn haar_best_single_cell(rng: &mut impl Rng, ms: &[InteractiveMeasurement<f64>], samples: usize) -> f64 {
    let elems: Vec<Matrix<f64>> = ms.iter().flat_map(|m| m.elements().iter().map(|e| e.matrix().transpose())).collect();
    let mut best = f64::NEG_INFINITY;
    for _ in 0..samples {
        let psi = random_vector(rng, 2);
        for e in &elems {
            let v = e.apply(&psi);
            let p: f64 = psi.iter().zip(&v).map(|(a, b)| a.conj() * b).sum::<C>().re;
            best = best.max(p);
        }
    }
    best / ms.len() as f64
}
