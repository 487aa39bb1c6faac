//! The quantum roulette game: for every chip count k, the best k cells
//! (measurement b, outcome x) and the winning probability p_win,k, each an
//! SDP over combs. Successive differences give the universal bound vector.

use rayon::prelude::*;
use serde::Serialize;

use crate::comb::{CircuitFragment, FragmentShape};
use crate::error::{Error, Result};
use crate::majorization::{direct_sum_scaled, flatness, prefix_slacks, shannon_bits, ProbVector};
use crate::measurement::{outcome_distribution, InteractiveMeasurement};
use crate::sdp::{comb_constraints, solve_sdp, SdpProblem, DEFAULT_TOL};
use crate::tensor::LabeledOperator;

pub const MAX_CELLS: usize = 12;
const PRUNE_SLACK: f64 = 1e-9;
const CHUNK: usize = 16;
const NORMALIZE_TOL: f64 = 1e-7;

/// A cell of the roulette table: outcome `outcome` of measurement `measurement`.
pub type Cell = (usize, usize);

#[derive(Clone, Debug, Serialize)]
pub struct Level {
    pub k: usize,
    /// (1/c)·max_S Tr[J_S^T X], before clamping
    pub raw: f64,
    pub subset: Vec<Cell>,
    pub gap: f64,
    pub residual: f64,
    pub iterations: usize,
    pub solved: usize,
    pub pruned: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RouletteReport {
    #[serde(skip)]
    pub measurements: Vec<InteractiveMeasurement<f64>>,
    pub c: usize,
    pub shape: FragmentShape,
    pub p_win: Vec<f64>,
    pub p_win_raw: Vec<f64>,
    pub w: Vec<f64>,
    pub w_flat: Vec<f64>,
    pub c_basic: f64,
    pub c_improved: f64,
    pub levels: Vec<Level>,
}

struct Game<'a> {
    cells: Vec<Cell>,
    objectives: Vec<LabeledOperator<f64>>,
    constraints: Vec<(LabeledOperator<f64>, f64)>,
    shape: &'a FragmentShape,
    c: usize,
}

struct Solved {
    value: f64,
    gap: f64,
    residual: f64,
    iterations: usize,
}

impl<'a> Game<'a> {
    fn new(ms: &[InteractiveMeasurement<f64>], shape: &'a FragmentShape) -> Result<Self> {
        if ms.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut cells = vec![];
        let mut objectives = vec![];
        for (b, m) in ms.iter().enumerate() {
            if m.shape() != shape {
                return Err(Error::ShapeError(format!("measurement {b} was built for a different slot structure")));
            }
            for (x, j) in m.elements().iter().enumerate() {
                cells.push((b, x));
                objectives.push(j.transpose());
            }
        }
        if cells.len() > MAX_CELLS {
            return Err(Error::TooManyCells { cells: cells.len(), limit: MAX_CELLS });
        }
        Ok(Self { cells, objectives, constraints: comb_constraints(shape), shape, c: ms.len() })
    }

    fn solve(&self, subset: &[usize]) -> Result<Solved> {
        let mut obj = LabeledOperator::zeros(self.shape.layout());
        for &z in subset {
            obj = obj.add(&self.objectives[z])?;
        }
        let p = SdpProblem { objective: obj, constraints: self.constraints.clone() };
        match solve_sdp(&p, DEFAULT_TOL) {
            Ok(s) => Ok(Solved { value: s.value, gap: s.gap, residual: s.residual, iterations: s.iterations }),
            Err(e) => Err(Error::Subset { subset: subset.iter().map(|&z| self.cells[z]).collect(), source: Box::new(e) }),
        }
    }

    /// Exhaustive search over size-k subsets with a sum-of-singles prune.
    fn level(&self, k: usize, singles: &[f64]) -> Result<Level> {
        let c = self.c as f64;
        if k == 0 {
            return Ok(Level { k, raw: 0.0, subset: vec![], gap: 0.0, residual: 0.0, iterations: 0, solved: 0, pruned: 0 });
        }
        let mut subsets: Vec<(f64, usize, Vec<usize>)> = combinations(self.cells.len(), k)
            .into_iter()
            .enumerate()
            .map(|(idx, s)| (s.iter().map(|&z| singles[z]).sum(), idx, s))
            .collect();
        subsets.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

        let mut best: Option<(Solved, &[usize])> = None;
        let (mut solved, mut pruned) = (0, 0);
        for chunk in subsets.chunks(CHUNK) {
            let incumbent = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.0.value);
            let live: Vec<&(f64, usize, Vec<usize>)> =
                chunk.iter().filter(|(bound, _, _)| *bound > incumbent + PRUNE_SLACK).collect();
            pruned += chunk.len() - live.len();
            if live.is_empty() {
                // bounds are sorted, so nothing later can win either
                pruned += subsets.len() - solved - pruned;
                break;
            }
            let results: Vec<Result<Solved>> = live.par_iter().map(|(_, _, s)| self.solve(s)).collect();
            for ((_, _, s), r) in live.iter().zip(results) {
                let r = r?;
                solved += 1;
                if best.as_ref().map_or(true, |b| r.value > b.0.value) {
                    best = Some((r, s));
                }
            }
        }
        let (b, subset) = best.expect("at least one subset is solved");
        Ok(Level {
            k,
            raw: b.value / c,
            subset: subset.iter().map(|&z| self.cells[z]).collect(),
            gap: b.gap,
            residual: b.residual,
            iterations: b.iterations,
            solved,
            pruned,
        })
    }

    fn singles(&self) -> Result<Vec<f64>> {
        (0..self.cells.len()).into_par_iter().map(|z| self.solve(&[z]).map(|s| s.value)).collect()
    }
}

/// Lexicographic k-subsets of 0..n.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] != i + n - k) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// p_win,k and the best subset of k cells.
pub fn p_win(ms: &[InteractiveMeasurement<f64>], shape: &FragmentShape, k: usize) -> Result<(f64, Vec<Cell>)> {
    let game = Game::new(ms, shape)?;
    if k > game.cells.len() {
        return Err(Error::InvalidInput(format!("k = {k} exceeds the {} cells", game.cells.len())));
    }
    let singles = game.singles()?;
    let level = game.level(k, &singles)?;
    Ok((level.raw, level.subset))
}

fn entropy_bound(c: usize, v: &[f64]) -> f64 {
    let c = c as f64;
    c * shannon_bits(v) - c * c.log2()
}

pub fn uncertainty_bound(ms: &[InteractiveMeasurement<f64>], shape: &FragmentShape) -> Result<RouletteReport> {
    let game = Game::new(ms, shape)?;
    let singles = game.singles()?;
    let levels: Vec<Level> = (1..=game.cells.len()).map(|k| game.level(k, &singles)).collect::<Result<_>>()?;
    let raw: Vec<f64> = levels.iter().map(|l| l.raw).collect();
    let mut p = Vec::with_capacity(raw.len());
    let mut prev = 0.0f64;
    for &r in &raw {
        prev = r.max(prev).min(1.0);
        p.push(prev);
    }
    let top = *p.last().expect("at least one cell");
    if (top - 1.0).abs() > NORMALIZE_TOL {
        return Err(Error::InvalidProbability(format!("p_win at full coverage is {top}, not 1")));
    }
    let mut w: Vec<f64> = std::iter::once(0.0).chain(p.iter().copied()).collect::<Vec<_>>().windows(2).map(|x| x[1] - x[0]).collect();
    w.iter_mut().for_each(|x| *x /= top);
    let w_flat = flatness(&w).into_entries();
    let c_basic = entropy_bound(game.c, &w);
    // F(w) ≺ w, so the flat bound is never weaker; only summation order could say otherwise
    let c_improved = entropy_bound(game.c, &w_flat).max(c_basic);
    Ok(RouletteReport {
        measurements: ms.to_vec(),
        c: game.c,
        shape: shape.clone(),
        c_basic,
        c_improved,
        p_win: p,
        p_win_raw: raw,
        w,
        w_flat,
        levels,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Verification {
    pub accepted: bool,
    pub refusal: Option<String>,
    pub distributions: Vec<Vec<f64>>,
    pub direct_sum: Vec<f64>,
    pub slack_w: Vec<f64>,
    pub slack_w_flat: Vec<f64>,
    pub entropy_sum: f64,
    pub entropy_margin: f64,
    pub majorized_by_w: bool,
    pub majorized_by_w_flat: bool,
    pub entropy_ok: bool,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.accepted && self.majorized_by_w && self.majorized_by_w_flat && self.entropy_ok
    }

    fn refuse(reason: String) -> Self {
        Self {
            accepted: false,
            refusal: Some(reason),
            distributions: vec![],
            direct_sum: vec![],
            slack_w: vec![],
            slack_w_flat: vec![],
            entropy_sum: f64::NAN,
            entropy_margin: f64::NAN,
            majorized_by_w: false,
            majorized_by_w_flat: false,
            entropy_ok: false,
        }
    }
}

/// Check ⊕_b p_b / c ≺ w, ≺ F(w) and Σ_b H(p_b) ≥ C on a concrete fragment.
pub fn verify_relation(f: &CircuitFragment<f64>, report: &RouletteReport) -> Verification {
    const TOL: f64 = 1e-7;
    if f.shape != report.shape {
        return Verification::refuse("fragment shape differs from the report's".into());
    }
    let v = f.validate(1e-7);
    if !v.passed() {
        let names: Vec<String> = v.failures().iter().map(|c| format!("{} ({:.3e})", c.name, c.residual)).collect();
        return Verification::refuse(format!("not a valid comb: {}", names.join(", ")));
    }
    let mut dists = vec![];
    for m in &report.measurements {
        match outcome_distribution(f, m) {
            Ok(d) => dists.push(d.probs),
            Err(e) => return Verification::refuse(e.to_string()),
        }
    }
    let parts: Vec<ProbVector<f64>> = dists.iter().map(|d| ProbVector::new(d.clone()).expect("clamped")).collect();
    let sum = direct_sum_scaled(&parts).expect("nonempty").into_entries();
    let slack_w = prefix_slacks(&report.w, &sum);
    let slack_w_flat = prefix_slacks(&report.w_flat, &sum);
    let entropy_sum: f64 = dists.iter().map(|d| shannon_bits(d)).sum();
    let entropy_margin = entropy_sum - report.c_basic;
    Verification {
        accepted: true,
        refusal: None,
        majorized_by_w: slack_w.iter().all(|s| *s >= -TOL),
        majorized_by_w_flat: slack_w_flat.iter().all(|s| *s >= -TOL),
        entropy_ok: entropy_margin >= -TOL,
        distributions: dists,
        direct_sum: sum,
        slack_w,
        slack_w_flat,
        entropy_sum,
        entropy_margin,
    }
}
