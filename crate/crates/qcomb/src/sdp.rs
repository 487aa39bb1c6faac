//! Dense primal–dual interior-point solver for
//!
//!   maximize Tr[C X]  s.t.  Tr[A_i X] = b_i,  X ⪰ 0
//!
//! over complex Hermitian X. The problem is mapped to the real symmetric
//! cone through the block embedding X ↦ [[Re X, −Im X], [Im X, Re X]] and
//! solved with Nesterov–Todd scaling and Mehrotra predictor–corrector steps.

use num_complex::Complex64;

use crate::comb::FragmentShape;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, sym_eigh, Matrix};
use crate::tensor::{LabeledOperator, SpaceLayout};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const MAX_ITER: usize = 200;
const STEP_FRACTION: f64 = 0.95;
const START_EPS: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct SdpProblem {
    pub objective: LabeledOperator<f64>,
    pub constraints: Vec<(LabeledOperator<f64>, f64)>,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub x: LabeledOperator<f64>,
    pub value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct SdpOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: MAX_ITER }
    }
}

/// Orthonormal basis of Hermitian d×d matrices under Tr[AB].
pub fn hermitian_basis(d: usize) -> Vec<Matrix<f64>> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d);
    for j in 0..d {
        for k in j..d {
            let mut m = Matrix::zeros(d, d);
            if j == k {
                m[(j, j)] = Complex64::new(1.0, 0.0);
                out.push(m);
                continue;
            }
            m[(j, k)] = Complex64::new(s, 0.0);
            m[(k, j)] = Complex64::new(s, 0.0);
            out.push(m);
            let mut m = Matrix::zeros(d, d);
            m[(j, k)] = Complex64::new(0.0, -s);
            m[(k, j)] = Complex64::new(0.0, s);
            out.push(m);
        }
    }
    out
}

/// Equality constraints whose solution set (within the PSD cone) is
/// exactly the set of combs of the given shape: the nested NS conditions
/// expanded over a Hermitian basis, plus Tr J = Π d_in.
pub fn comb_constraints(shape: &FragmentShape) -> Vec<(LabeledOperator<f64>, f64)> {
    let full = shape.layout();
    let mut out = vec![];
    for i in (1..shape.a()).rev() {
        let slot = &shape.steps[i];
        if slot.inputs.is_empty() {
            continue;
        }
        let mut k_sys: Vec<_> = shape.steps[..i].iter().flat_map(|s| s.inputs.iter().chain(&s.outputs).cloned()).collect();
        k_sys.extend(slot.inputs.iter().cloned());
        let kl = SpaceLayout::new(k_sys).expect("shape labels are distinct");
        let in_layout = SpaceLayout::new(slot.inputs.clone()).expect("shape labels are distinct");
        let in_names = in_layout.names();
        let din = in_layout.dim() as f64;
        for b in hermitian_basis(kl.dim()) {
            let bop = LabeledOperator::new(kl.clone(), b).expect("basis matches layout");
            let avg = bop
                .partial_trace(&in_names)
                .and_then(|t| t.kron(&LabeledOperator::identity(in_layout.clone())))
                .expect("inputs are part of the layout")
                .scale(1.0 / din);
            let a = bop.sub(&avg.align_to(&kl).expect("same systems")).expect("same layout");
            if a.matrix().max_abs() < 1e-14 {
                continue;
            }
            out.push((a.extend_to(&full).expect("subset of the shape"), 0.0));
        }
    }
    out.push((LabeledOperator::identity(full), shape.input_dim() as f64));
    out
}

// ---- dense real helpers (row-major n×n) ----

fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            let row = &b[k * n..(k + 1) * n];
            for (cij, bkj) in c[i * n..(i + 1) * n].iter_mut().zip(row) {
                *cij += aik * bkj;
            }
        }
    }
    c
}

fn transpose(a: &[f64], n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = a[i * n + j];
        }
    }
    t
}

fn symmetrize(a: &mut [f64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn eye(n: usize, s: f64) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = s;
    }
    m
}

/// G M Gᵀ
fn congruence(g: &[f64], m: &[f64], n: usize) -> Vec<f64> {
    let mut r = matmul(&matmul(g, m, n), &transpose(g, n), n);
    symmetrize(&mut r, n);
    r
}

/// Hermitian matrix as a real vector [Re…, Im…]; the dot product is Tr[AB].
fn herm_vec(m: &Matrix<f64>) -> Vec<f64> {
    let d = m.data();
    d.iter().map(|z| z.re).chain(d.iter().map(|z| z.im)).collect()
}

/// emb(H)/2 on the 2n-dimensional real space, from the [Re, Im] vector.
fn embed_half(v: &[f64], n: usize) -> Vec<f64> {
    let nn = 2 * n;
    let (re, im) = v.split_at(n * n);
    let mut out = vec![0.0; nn * nn];
    for r in 0..n {
        for c in 0..n {
            let (x, y) = (0.5 * re[r * n + c], 0.5 * im[r * n + c]);
            out[r * nn + c] = x;
            out[(r + n) * nn + c + n] = x;
            out[r * nn + c + n] = -y;
            out[(r + n) * nn + c] = y;
        }
    }
    out
}

fn project(z: &[f64], n: usize) -> Matrix<f64> {
    let nn = 2 * n;
    Matrix::from_fn(n, n, |r, c| {
        let re = 0.5 * (z[r * nn + c] + z[(r + n) * nn + c + n]);
        let im = 0.5 * (z[(r + n) * nn + c] - z[r * nn + c + n]);
        Complex64::new(re, im)
    })
}

/// Rank-revealing modified Gram–Schmidt: drops redundant rows, rejects
/// inconsistent right-hand sides.
fn orthonormalize(rows: &[(Vec<f64>, f64)]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut qs: Vec<Vec<f64>> = vec![];
    let mut bs: Vec<f64> = vec![];
    for (a, b) in rows {
        let norm0 = dot(a, a).sqrt();
        let mut v = a.clone();
        let mut beta = *b;
        for _pass in 0..2 {
            for (q, bq) in qs.iter().zip(&bs) {
                let c = dot(&v, q);
                axpy(-c, q, &mut v);
                beta -= c * bq;
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm0 == 0.0 || norm <= 1e-9 * norm0 {
            if beta.abs() > 1e-8 * (1.0 + b.abs()) {
                return Err(Error::Infeasible(format!(
                    "constraint right-hand sides are inconsistent (residual {beta:.3e})"
                )));
            }
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        qs.push(v);
        bs.push(beta / norm);
    }
    Ok((qs, bs))
}

struct Scaling {
    g: Vec<f64>,
    gt: Vec<f64>,
    w: Vec<f64>,
    d: Vec<f64>,
}

fn nt_scaling(z: &[f64], s: &[f64], n: usize) -> Option<Scaling> {
    let l = cholesky(z, n)?;
    let mut lsl = matmul(&matmul(&transpose(&l, n), s, n), &l, n);
    symmetrize(&mut lsl, n);
    let (ev, u) = sym_eigh(&lsl, n);
    if ev.iter().any(|&e| !(e > 0.0)) {
        return None;
    }
    let d: Vec<f64> = ev.iter().map(|e| e.sqrt()).collect();
    let mut lu = matmul(&l, &u, n);
    for i in 0..n {
        for j in 0..n {
            lu[i * n + j] /= d[j].sqrt();
        }
    }
    let gt = transpose(&lu, n);
    let mut w = matmul(&lu, &gt, n);
    symmetrize(&mut w, n);
    Some(Scaling { g: lu, gt, w, d })
}

/// Largest α with diag(d) + α Δ ⪰ 0.
fn max_step(d: &[f64], delta: &[f64], n: usize) -> f64 {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = delta[i * n + j] / (d[i] * d[j]).sqrt();
        }
    }
    let (ev, _) = sym_eigh(&m, n);
    if ev[0] < 0.0 {
        -1.0 / ev[0]
    } else {
        f64::INFINITY
    }
}

/// Cholesky factor of the Schur complement, regularized if it has lost
/// definiteness near the optimum; solves refine against the exact matrix.
struct Schur {
    l: Vec<f64>,
    m: Vec<f64>,
    regularized: bool,
}

impl Schur {
    fn factor(m: Vec<f64>, k: usize) -> Option<Self> {
        if let Some(l) = cholesky(&m, k) {
            return Some(Self { l, m, regularized: false });
        }
        let top = (0..k).fold(0.0f64, |t, i| t.max(m[i * k + i].abs())).max(f64::MIN_POSITIVE);
        let mut delta = 1e-14;
        while delta <= 1e-6 {
            let mut reg = m.clone();
            for i in 0..k {
                reg[i * k + i] += delta * top;
            }
            if let Some(l) = cholesky(&reg, k) {
                return Some(Self { l, m, regularized: true });
            }
            delta *= 10.0;
        }
        None
    }

    fn solve(&self, k: usize, rhs: &[f64]) -> Option<Vec<f64>> {
        let mut x = cholesky_solve(&self.l, k, rhs);
        if self.regularized {
            for _ in 0..3 {
                let r: Vec<f64> = (0..k).map(|i| rhs[i] - dot(&self.m[i * k..(i + 1) * k], &x)).collect();
                let dx = cholesky_solve(&self.l, k, &r);
                axpy(1.0, &dx, &mut x);
            }
        }
        x.iter().all(|v| v.is_finite()).then_some(x)
    }
}

struct Direction {
    dz: Vec<f64>,
    dy: Vec<f64>,
    ds: Vec<f64>,
    dz_s: Vec<f64>,
    ds_s: Vec<f64>,
}

struct Solver<'a> {
    n: usize,
    a: &'a [Vec<f64>],
}

impl Solver<'_> {
    fn op(&self, z: &[f64]) -> Vec<f64> {
        self.a.iter().map(|ai| dot(ai, z)).collect()
    }

    fn adj(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        for (ai, yi) in self.a.iter().zip(y) {
            axpy(*yi, ai, &mut out);
        }
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        sc: &Scaling,
        schur: &Schur,
        rp: &[f64],
        rd: &[f64],
        wrdw_op: &[f64],
        rc: &[f64],
    ) -> Option<Direction> {
        let n = self.n;
        let mut r = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                r[i * n + j] = 2.0 * rc[i * n + j] / (sc.d[i] + sc.d[j]);
            }
        }
        let grg = congruence(&sc.g, &r, n);
        let agrg = self.op(&grg);
        let rhs: Vec<f64> = (0..rp.len()).map(|k| rp[k] - agrg[k] + wrdw_op[k]).collect();
        let dy = schur.solve(rp.len(), &rhs)?;
        let mut ds = rd.to_vec();
        axpy(-1.0, &self.adj(&dy), &mut ds);
        symmetrize(&mut ds, n);
        let ds_s = congruence(&sc.gt, &ds, n);
        let mut dz_s = r;
        axpy(-1.0, &ds_s, &mut dz_s);
        symmetrize(&mut dz_s, n);
        let dz = congruence(&sc.g, &dz_s, n);
        if dz.iter().chain(&dy).chain(&ds).any(|v| !v.is_finite()) {
            return None;
        }
        Some(Direction { dz, dy, ds, dz_s, ds_s })
    }
}

pub fn solve_sdp(p: &SdpProblem, tol: f64) -> Result<SdpSolution> {
    solve_sdp_with(p, SdpOptions { tol, ..SdpOptions::default() })
}

pub fn solve_sdp_with(p: &SdpProblem, opts: SdpOptions) -> Result<SdpSolution> {
    let layout = p.objective.layout().clone();
    let herm_tol = 1e-10;
    if !p.objective.is_hermitian(herm_tol) {
        return Err(Error::InvalidInput("objective is not Hermitian".into()));
    }
    let mut originals = Vec::with_capacity(p.constraints.len());
    for (k, (a, b)) in p.constraints.iter().enumerate() {
        let a = a.align_to(&layout)?;
        if !a.is_hermitian(herm_tol) {
            return Err(Error::InvalidInput(format!("constraint {k} is not Hermitian")));
        }
        originals.push((a.matrix().hermitian_part(), *b));
    }
    let n = layout.dim();
    let nn = 2 * n;
    let rows: Vec<(Vec<f64>, f64)> = originals.iter().map(|(a, b)| (herm_vec(a), *b)).collect();
    let (qs, beta) = orthonormalize(&rows)?;
    let m = qs.len();
    let amat: Vec<Vec<f64>> = qs.iter().map(|q| embed_half(q, n)).collect();
    let solver = Solver { n: nn, a: &amat };
    let mut cm = embed_half(&herm_vec(&p.objective.matrix().hermitian_part()), n);
    cm.iter_mut().for_each(|v| *v = -*v);

    // start: the scalar multiple of 1 that best fits the constraints, nudged inward
    let tr: Vec<f64> = amat.iter().map(|a| (0..nn).map(|i| a[i * nn + i]).sum()).collect();
    let tt = dot(&tr, &tr);
    let t = if tt > 0.0 { dot(&tr, &beta) / tt } else { 1.0 };
    let t = if t > 0.0 { t } else { 1.0 };
    let mut z = eye(nn, t + START_EPS);
    let mut y = vec![0.0; m];
    let eta = 1.0 + dot(&cm, &cm).sqrt();
    let mut s = eye(nn, eta);

    let finish = |z: &[f64], y: &[f64], iterations: usize| -> SdpSolution {
        let x = project(z, n);
        let value = p.objective.matrix().trace_product(&x).re;
        let dual_value = -dot(&beta, y);
        let residual = originals.iter().fold(0.0f64, |r, (a, b)| r.max((a.trace_product(&x).re - b).abs()));
        SdpSolution {
            x: LabeledOperator::new(layout.clone(), x).expect("layout dimension"),
            value,
            dual_value,
            gap: (value - dual_value).abs(),
            residual,
            iterations,
        }
    };

    let mut best: Option<(f64, Vec<f64>, Vec<f64>, usize)> = None;
    let mut stalled = 0;
    for iter in 0..opts.max_iter {
        let az = solver.op(&z);
        let rp: Vec<f64> = beta.iter().zip(&az).map(|(b, a)| b - a).collect();
        let mut rd = cm.clone();
        axpy(-1.0, &solver.adj(&y), &mut rd);
        axpy(-1.0, &s, &mut rd);
        let pobj = dot(&cm, &z);
        let dobj = dot(&beta, &y);
        let gap = (pobj - dobj).abs();
        let res = max_abs(&rp).max(max_abs(&rd));
        let merit = gap.max(res);
        if !merit.is_finite() {
            break;
        }
        if best.as_ref().map_or(true, |b| merit < b.0) {
            best = Some((merit, z.clone(), y.clone(), iter));
        }
        if gap <= opts.tol && res <= opts.tol {
            return Ok(finish(&z, &y, iter));
        }
        let scale = 1.0 + max_abs(&beta) + max_abs(&cm);
        if max_abs(&y) > 1e10 * scale || max_abs(&z) > 1e10 * scale {
            return Err(Error::Infeasible("iterates diverge".into()));
        }

        let Some(sc) = nt_scaling(&z, &s, nn) else { break };
        let wa: Vec<Vec<f64>> = amat.iter().map(|a| congruence(&sc.w, a, nn)).collect();
        let mut schur = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let v = dot(&amat[i], &wa[j]);
                schur[i * m + j] = v;
                schur[j * m + i] = v;
            }
        }
        let Some(schur) = Schur::factor(schur, m) else { break };
        let wrdw_op = solver.op(&congruence(&sc.w, &rd, nn));
        let mu = dot(&z, &s) / nn as f64;

        // predictor
        let mut rc = vec![0.0; nn * nn];
        for i in 0..nn {
            rc[i * nn + i] = -sc.d[i] * sc.d[i];
        }
        let Some(aff) = solver.direction(&sc, &schur, &rp, &rd, &wrdw_op, &rc) else { break };
        let ap = max_step(&sc.d, &aff.dz_s, nn).min(1.0);
        let ad = max_step(&sc.d, &aff.ds_s, nn).min(1.0);
        let mut z_aff = z.clone();
        axpy(ap, &aff.dz, &mut z_aff);
        let mut s_aff = s.clone();
        axpy(ad, &aff.ds, &mut s_aff);
        let mu_aff = dot(&z_aff, &s_aff) / nn as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let cross = matmul(&aff.dz_s, &aff.ds_s, nn);
        for i in 0..nn {
            for j in 0..nn {
                rc[i * nn + j] -= 0.5 * (cross[i * nn + j] + cross[j * nn + i]);
            }
            rc[i * nn + i] += sigma * mu;
        }
        let Some(dir) = solver.direction(&sc, &schur, &rp, &rd, &wrdw_op, &rc) else { break };
        let ap = (STEP_FRACTION * max_step(&sc.d, &dir.dz_s, nn)).min(1.0);
        let ad = (STEP_FRACTION * max_step(&sc.d, &dir.ds_s, nn)).min(1.0);
        if ap.min(ad) < 1e-12 {
            stalled += 1;
            if stalled > 5 {
                break;
            }
        } else {
            stalled = 0;
        }
        axpy(ap, &dir.dz, &mut z);
        symmetrize(&mut z, nn);
        axpy(ad, &dir.dy, &mut y);
        axpy(ad, &dir.ds, &mut s);
        symmetrize(&mut s, nn);
    }
    let (_, bz, by, it) = best.ok_or_else(|| Error::InvalidInput("solver produced no finite iterate".into()))?;
    let sol = finish(&bz, &by, it);
    let gap = sol.gap;
    Err(Error::Unconverged { best: Box::new(sol), gap })
}
