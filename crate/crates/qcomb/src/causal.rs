//! Causal uncertainty: the H(T_CC) + H(T_DC) ≥ 2 log d relation for causal
//! maps A | B → C, system–environment circuit families, inference of the
//! causal structure from the two indicator entropies, and landscape scans.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::comb::{build_fragment, Channel, CircuitFragment, FragmentShape};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::majorization::shannon_bits;
use crate::measurement::{cc_indicator, dc_indicator, outcome_distribution, InteractiveMeasurement};
use crate::roulette::uncertainty_bound;
use crate::tensor::{LabeledOperator, SpaceLayout, SystemLabel};

pub const ZERO_TOL: f64 = 1e-6;
pub const INTERIOR_MARGIN: f64 = 1e-3;
pub const SEARCH_BUDGET: usize = 2000;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn sys(name: &str, d: usize) -> SystemLabel {
    SystemLabel::new(name, d)
}

fn layout(names: &[&str], d: usize) -> SpaceLayout {
    SpaceLayout::new(names.iter().map(|n| sys(n, d)).collect()).expect("distinct static labels")
}

/// The two-parameter system–environment interaction on (B, E).
pub fn u_alpha_beta(alpha: f64, beta: f64) -> Matrix<f64> {
    let e = Complex64::from_polar(1.0, -alpha);
    let (cb, sb) = (c((beta / 2.0).cos(), 0.0), c(0.0, -(beta / 2.0).sin()));
    let z = c(0.0, 0.0);
    Matrix::from_rows(&[vec![e, z, z, z], vec![z, cb, sb, z], vec![z, sb, cb, z], vec![z, z, z, e]])
        .scale_c(Complex64::from_polar(1.0, alpha / 2.0))
}

/// cos(π/4)·1 + i sin(π/4)·SWAP.
pub fn partial_swap() -> Matrix<f64> {
    let s = FRAC_1_SQRT_2;
    let e = Complex64::from_polar(1.0, FRAC_PI_4);
    let z = c(0.0, 0.0);
    Matrix::from_rows(&[
        vec![e, z, z, z],
        vec![z, c(s, 0.0), c(0.0, s), z],
        vec![z, c(0.0, s), c(s, 0.0), z],
        vec![z, z, z, e],
    ])
}

pub fn rz(theta: f64) -> Matrix<f64> {
    let z = c(0.0, 0.0);
    Matrix::from_rows(&[
        vec![Complex64::from_polar(1.0, -theta / 2.0), z],
        vec![z, Complex64::from_polar(1.0, theta / 2.0)],
    ])
}

pub fn ry(theta: f64) -> Matrix<f64> {
    let (s, co) = (theta / 2.0).sin_cos();
    Matrix::from_real(2, 2, &[co, -s, s, co])
}

/// CNOT on (q1, q2); `control_first` picks q1 as control.
fn cnot(control_first: bool) -> Matrix<f64> {
    let p = if control_first { [0, 1, 3, 2] } else { [0, 3, 2, 1] };
    Matrix::from_fn(4, 4, |r, col| if p[col] == r { c(1.0, 0.0) } else { c(0.0, 0.0) })
}

/// Three-CNOT canonical two-qubit interaction exp(−i(α/2·ZZ + β/4·XX + γ/4·YY))
/// (up to a global phase) on (B, E); γ = β recovers `u_alpha_beta`.
pub fn u_alpha_beta_gamma(alpha: f64, beta: f64, gamma: f64) -> Matrix<f64> {
    let id = Matrix::identity(2);
    let (t1, t2, t3) = (alpha + FRAC_PI_2, -beta / 2.0 - FRAC_PI_2, gamma / 2.0 + FRAC_PI_2);
    let gates = [
        id.kron(&rz(-FRAC_PI_2)),
        cnot(false),
        rz(t1).kron(&ry(t2)),
        cnot(true),
        id.kron(&ry(t3)),
        cnot(false),
        rz(FRAC_PI_2).kron(&id),
    ];
    gates.iter().fold(Matrix::identity(4), |acc, g| g.matmul(&acc))
}

/// Tr_F[U(φ⁺_AE)] for a d²×d² unitary U: (B, E) → (C, F).
pub fn system_environment_fragment(u: &Matrix<f64>) -> Result<CircuitFragment<f64>> {
    let d = (u.rows() as f64).sqrt().round() as usize;
    if d * d != u.rows() {
        return Err(Error::InvalidDimension(format!("{}x{} is not a bipartite unitary", u.rows(), u.cols())));
    }
    let phi = LabeledOperator::max_entangled_unnormalized(sys("A", d), sys("E", d))?.scale(1.0 / d as f64);
    let step = Channel::unitary(u.clone(), &[sys("B", d), sys("E", d)], &[sys("C", d), sys("F", d)])?
        .trace_outputs(&["F"])?;
    build_fragment(&phi, &[step])
}

pub fn partial_swap_fragment() -> CircuitFragment<f64> {
    system_environment_fragment(&partial_swap()).expect("static unitary")
}

/// 1_A/d ⊗ |I⟩⟨I|_{BC}: maximally mixed A, identity channel B → C.
pub fn saturating_fragment(d: usize) -> Result<CircuitFragment<f64>> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!("need d ≥ 2, got {d}")));
    }
    let rho = LabeledOperator::identity(layout(&["A"], d)).scale(1.0 / d as f64);
    let j = rho.kron(&LabeledOperator::max_entangled_unnormalized(sys("B", d), sys("C", d))?)?;
    CircuitFragment::new(FragmentShape::causal_map(d), j)
}

/// φ⁺_AC ⊗ 1_B: a purely common-cause map.
pub fn common_cause_fragment(d: usize) -> Result<CircuitFragment<f64>> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!("need d ≥ 2, got {d}")));
    }
    let phi = LabeledOperator::max_entangled_unnormalized(sys("A", d), sys("C", d))?.scale(1.0 / d as f64);
    let j = phi.kron(&LabeledOperator::identity(layout(&["B"], d)))?;
    CircuitFragment::new(FragmentShape::causal_map(d), j)
}

fn causal_dim(f: &CircuitFragment<f64>) -> Result<usize> {
    let s = &f.shape;
    let ok = s.a() == 2
        && s.steps[0].outputs.len() == 1
        && s.steps[1].inputs.len() == 1
        && s.steps[1].outputs.len() == 1;
    let d = s.steps[0].outputs.first().map_or(0, |l| l.dim);
    if !ok || *s != FragmentShape::causal_map(d) {
        return Err(Error::ShapeError("expected a causal map A | B → C with equal dimensions".into()));
    }
    Ok(d)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JointUncertainty {
    pub h_cc: f64,
    pub h_dc: f64,
    pub sum: f64,
}

/// Shannon entropies of the CC(U1,U2) and DC(U3,U4) outcome distributions.
pub fn joint_uncertainty(
    f: &CircuitFragment<f64>,
    u1: &Matrix<f64>,
    u2: &Matrix<f64>,
    u3: &Matrix<f64>,
    u4: &Matrix<f64>,
) -> Result<JointUncertainty> {
    causal_dim(f)?;
    joint_with(f, &cc_indicator(u1, u2)?, &dc_indicator(u3, u4)?)
}

fn joint_with(
    f: &CircuitFragment<f64>,
    cc: &InteractiveMeasurement<f64>,
    dc: &InteractiveMeasurement<f64>,
) -> Result<JointUncertainty> {
    let h_cc = shannon_bits(&outcome_distribution(f, cc)?.probs);
    let h_dc = shannon_bits(&outcome_distribution(f, dc)?.probs);
    Ok(JointUncertainty { h_cc, h_dc, sum: h_cc + h_dc })
}

#[derive(Clone, Debug, Serialize)]
pub struct CausalBoundReport {
    pub d: usize,
    pub bound: f64,
    pub vq: Vec<f64>,
    pub w_halved: Vec<f64>,
    pub from_sdp: bool,
}

/// ∨Q₁ = (1, 1/d², …, 1/d², 0, …) with d² copies of 1/d²; 2H(∨Q₁/2) − 2 = 2 log d.
pub fn causal_bound(d: usize) -> Result<CausalBoundReport> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!("need d ≥ 2, got {d}")));
    }
    let m = d * d;
    let mut vq = vec![0.0; 2 * m];
    vq[0] = 1.0;
    for v in &mut vq[1..=m] {
        *v = 1.0 / m as f64;
    }
    let w_halved: Vec<f64> = vq.iter().map(|v| v / 2.0).collect();
    let bound = 2.0 * shannon_bits(&w_halved) - 2.0;
    Ok(CausalBoundReport { d, bound, vq, w_halved, from_sdp: false })
}

/// The same report computed by the roulette SDPs (feasible for d = 2 only,
/// because the exhaustive game is capped at 12 cells).
pub fn causal_bound_sdp(d: usize) -> Result<CausalBoundReport> {
    let id = Matrix::identity(d);
    let ms = [cc_indicator(&id, &id)?, dc_indicator(&id, &id)?];
    let r = uncertainty_bound(&ms, &FragmentShape::causal_map(d))?;
    Ok(CausalBoundReport {
        d,
        bound: r.c_basic,
        vq: r.w.iter().map(|v| 2.0 * v).collect(),
        w_halved: r.w,
        from_sdp: true,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CausalTag {
    PurelyCommonCause,
    PurelyDirectCause,
    Mixture,
    NonMarkovian,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct CausalVerdict {
    pub tag: CausalTag,
    pub h_cc: f64,
    pub h_dc: f64,
    pub d: usize,
    pub bound: f64,
    pub max_entangled_init: bool,
    pub zero_tol: f64,
    pub interior_margin: f64,
    /// Euler angles (z, y, z) of U2 and U4 when found by search
    pub cc_angles: Option<[f64; 3]>,
    pub dc_angles: Option<[f64; 3]>,
    pub evaluations: usize,
}

/// Decision table on the two indicator entropies (bits).
pub fn infer_causal_structure(h_cc: f64, h_dc: f64, d: usize, max_entangled_init: bool) -> Result<CausalVerdict> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!("need d ≥ 2, got {d}")));
    }
    let top = 2.0 * (d as f64).log2();
    for (name, h) in [("h_cc", h_cc), ("h_dc", h_dc)] {
        if !h.is_finite() || h < -ZERO_TOL || h > top + ZERO_TOL {
            return Err(Error::InvalidInput(format!("{name} = {h} lies outside [0, {top}]")));
        }
    }
    let inside = |h: f64| h > INTERIOR_MARGIN && h < top - INTERIOR_MARGIN;
    let tag = if h_cc <= ZERO_TOL {
        if max_entangled_init {
            CausalTag::PurelyCommonCause
        } else {
            CausalTag::Inconclusive
        }
    } else if h_dc <= ZERO_TOL {
        CausalTag::PurelyDirectCause
    } else if inside(h_cc) && inside(h_dc) {
        CausalTag::Mixture
    } else if inside(h_cc) && max_entangled_init {
        CausalTag::NonMarkovian
    } else {
        CausalTag::Inconclusive
    };
    Ok(CausalVerdict {
        tag,
        h_cc,
        h_dc,
        d,
        bound: top,
        max_entangled_init,
        zero_tol: ZERO_TOL,
        interior_margin: INTERIOR_MARGIN,
        cc_angles: None,
        dc_angles: None,
        evaluations: 0,
    })
}

/// Rz(a)·Ry(b)·Rz(c).
pub fn euler(angles: &[f64; 3]) -> Matrix<f64> {
    rz(angles[0]).matmul(&ry(angles[1])).matmul(&rz(angles[2]))
}

/// Derivative-free minimisation of 1 − max_x p_x over one Euler-parametrised
/// unitary: a 5³ grid, then Nelder–Mead from the best grid point.
fn search_certain_outcome(
    f: &CircuitFragment<f64>,
    build: impl Fn(&Matrix<f64>) -> Result<InteractiveMeasurement<f64>>,
    budget: usize,
) -> Result<([f64; 3], f64, usize)> {
    let mut evals = 0usize;
    let mut cost = |x: &[f64; 3]| -> Result<f64> {
        evals += 1;
        let p = outcome_distribution(f, &build(&euler(x))?)?;
        Ok(1.0 - p.probs.iter().fold(0.0f64, |m, &v| m.max(v)))
    };
    let grid = |k: usize, hi: f64| hi * k as f64 / 5.0;
    let mut best = ([0.0; 3], f64::INFINITY);
    for i in 0..5 {
        for j in 0..5 {
            for k in 0..5 {
                let x = [grid(i, TAU), grid(j, PI) + PI / 10.0, grid(k, TAU)];
                let v = cost(&x)?;
                if v < best.1 {
                    best = (x, v);
                }
            }
        }
    }
    let remaining = budget.saturating_sub(125);
    let (x, v) = nelder_mead(&mut cost, best.0, 0.3, remaining, 1e-12)?;
    let (x, v) = if v < best.1 { (x, v) } else { best };
    Ok((x, v, evals))
}

fn nelder_mead(
    cost: &mut impl FnMut(&[f64; 3]) -> Result<f64>,
    x0: [f64; 3],
    step: f64,
    budget: usize,
    ftol: f64,
) -> Result<([f64; 3], f64)> {
    let mut used = 0usize;
    let mut eval = |x: &[f64; 3], used: &mut usize| -> Result<f64> {
        *used += 1;
        cost(x)
    };
    let mut simplex: Vec<([f64; 3], f64)> = Vec::with_capacity(4);
    simplex.push((x0, eval(&x0, &mut used)?));
    for i in 0..3 {
        let mut x = x0;
        x[i] += step;
        simplex.push((x, eval(&x, &mut used)?));
    }
    let lerp = |a: &[f64; 3], b: &[f64; 3], t: f64| -> [f64; 3] { std::array::from_fn(|i| a[i] + t * (b[i] - a[i])) };
    while used + 4 <= budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[3].1 - simplex[0].1 <= ftol {
            break;
        }
        let centroid: [f64; 3] = std::array::from_fn(|i| simplex[..3].iter().map(|p| p.0[i]).sum::<f64>() / 3.0);
        let worst = simplex[3];
        let xr = lerp(&centroid, &worst.0, -1.0);
        let fr = eval(&xr, &mut used)?;
        if fr < simplex[0].1 {
            let xe = lerp(&centroid, &worst.0, -2.0);
            let fe = eval(&xe, &mut used)?;
            simplex[3] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[2].1 {
            simplex[3] = (xr, fr);
        } else {
            let xc = if fr < worst.1 { lerp(&centroid, &xr, 0.5) } else { lerp(&centroid, &worst.0, 0.5) };
            let fc = eval(&xc, &mut used)?;
            if fc < worst.1.min(fr) {
                simplex[3] = (xc, fc);
            } else {
                let best = simplex[0].0;
                for p in simplex.iter_mut().skip(1) {
                    p.0 = lerp(&best, &p.0, 0.5);
                    p.1 = eval(&p.0, &mut used)?;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(simplex[0])
}

/// Infer from a fragment with identity indicators; in search mode, look for
/// U2 (resp. U4) making the CC (resp. DC) outcome certain before deciding.
/// A failed search never manufactures a zero entropy.
pub fn infer_fragment(f: &CircuitFragment<f64>, max_entangled_init: bool, search: bool) -> Result<CausalVerdict> {
    let d = causal_dim(f)?;
    let id = Matrix::identity(d);
    let base = joint_with(f, &cc_indicator(&id, &id)?, &dc_indicator(&id, &id)?)?;
    if !search || base.h_cc <= ZERO_TOL || base.h_dc <= ZERO_TOL {
        return infer_causal_structure(base.h_cc, base.h_dc, d, max_entangled_init);
    }
    if d != 2 {
        return Err(Error::InvalidInput("the Euler-angle search covers qubit indicators only".into()));
    }
    let half = SEARCH_BUDGET / 2;
    let (cc_x, _, e1) = search_certain_outcome(f, |u| cc_indicator(&id, u), half)?;
    let (dc_x, _, e2) = search_certain_outcome(f, |u| dc_indicator(&id, u), half)?;
    let h_cc_found = shannon_bits(&outcome_distribution(f, &cc_indicator(&id, &euler(&cc_x))?)?.probs);
    let h_dc_found = shannon_bits(&outcome_distribution(f, &dc_indicator(&id, &euler(&dc_x))?)?.probs);
    let (h_cc, cc_angles) = if h_cc_found <= ZERO_TOL { (h_cc_found, Some(cc_x)) } else { (base.h_cc, None) };
    let (h_dc, dc_angles) = if h_dc_found <= ZERO_TOL { (h_dc_found, Some(dc_x)) } else { (base.h_dc, None) };
    let mut v = infer_causal_structure(h_cc, h_dc, d, max_entangled_init)?;
    v.cc_angles = cc_angles;
    v.dc_angles = dc_angles;
    v.evaluations = e1 + e2;
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Axis {
    Fixed(f64),
    /// `n` evenly spaced points over [lo, hi]; a single point sits at the midpoint.
    Range { lo: f64, hi: f64, n: usize },
}

impl Axis {
    pub fn full(n: usize) -> Self {
        Axis::Range { lo: -PI, hi: PI, n }
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        match *self {
            Axis::Fixed(v) if v.is_finite() => Ok(vec![v]),
            Axis::Range { lo, hi, n } if n >= 1 && lo.is_finite() && hi.is_finite() && lo <= hi => Ok(if n == 1 {
                vec![0.5 * (lo + hi)]
            } else {
                (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
            }),
            _ => Err(Error::InvalidInput(format!("invalid grid axis {self:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GammaAxis {
    Axis(Axis),
    /// γ = β at every point
    TieBeta,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Family {
    AlphaBeta,
    AlphaBetaGamma,
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ab" | "u_alpha_beta" => Ok(Family::AlphaBeta),
            "abg" | "u_alpha_beta_gamma" => Ok(Family::AlphaBetaGamma),
            _ => Err(Error::InvalidInput(format!("unknown circuit family `{s}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Grid {
    pub alpha: Axis,
    pub beta: Axis,
    pub gamma: Option<GammaAxis>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub params: Vec<f64>,
    pub h_cc: f64,
    pub h_dc: f64,
    pub sum: f64,
}

/// Joint uncertainty over a parameter grid, α outermost; row order is the
/// grid order regardless of how the points are scheduled.
pub fn scan_landscape(
    family: Family,
    grid: &Grid,
    indicators: [&Matrix<f64>; 4],
) -> Result<Vec<ScanRow>> {
    let alphas = grid.alpha.points()?;
    let betas = grid.beta.points()?;
    let mut points: Vec<Vec<f64>> = vec![];
    match family {
        Family::AlphaBeta => {
            if grid.gamma.is_some() {
                return Err(Error::InvalidInput("the αβ family takes no γ axis".into()));
            }
            for &a in &alphas {
                for &b in &betas {
                    points.push(vec![a, b]);
                }
            }
        }
        Family::AlphaBetaGamma => {
            let gammas = match grid.gamma.unwrap_or(GammaAxis::TieBeta) {
                GammaAxis::Axis(ax) => Some(ax.points()?),
                GammaAxis::TieBeta => None,
            };
            for &a in &alphas {
                for &b in &betas {
                    match &gammas {
                        Some(gs) => points.extend(gs.iter().map(|&g| vec![a, b, g])),
                        None => points.push(vec![a, b, b]),
                    }
                }
            }
        }
    }
    let cc = cc_indicator(indicators[0], indicators[1])?;
    let dc = dc_indicator(indicators[2], indicators[3])?;
    if cc.shape() != &FragmentShape::causal_map(2) {
        return Err(Error::InvalidDimension("the circuit families act on qubits".into()));
    }
    points
        .into_par_iter()
        .map(|p| {
            let u = match family {
                Family::AlphaBeta => u_alpha_beta(p[0], p[1]),
                Family::AlphaBetaGamma => u_alpha_beta_gamma(p[0], p[1], p[2]),
            };
            let f = system_environment_fragment(&u)?;
            let j = joint_with(&f, &cc, &dc)?;
            Ok(ScanRow { params: p, h_cc: j.h_cc, h_dc: j.h_dc, sum: j.sum })
        })
        .collect()
}
