//! Outer layer: the finite multiplier sweep and the full solve pipeline.
//!
//! Each outer iteration solves the prefix equations of the constraints still
//! ahead, takes the largest candidate multiplier, assigns it to every
//! variable up to the last index attaining it, and restarts past that block.
//! The sweep runs on the reduced (all-decreasing) problem; [`solve`] wires it
//! together with feasibility checking, the sense flip, reduction and the
//! mapping back to original indexing.

use thiserror::Error;

use crate::kernel::{ClippedInverse, KernelError, prefix_sum, solve_prefix};
use crate::preprocess::{ReduceError, ReducedProblem, reduce};
use crate::problem::{
    Feasibility, Problem, ProblemError, Sense, Solution, TraceBlock, check_feasibility, flip_sense,
};
use crate::verify;

/// Knobs of the multiplier sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Solve a prefix equation only when the running champion fails its
    /// constraint. Output is identical with the rule on or off.
    pub skip_rule: bool,
    /// When a single constrained variable remains, settle it directly instead
    /// of running a full final iteration.
    pub final_shortcut: bool,
    /// Relative residual tolerance of the inner root solve.
    pub eps_root: f64,
    /// Relative tolerance for treating candidate multipliers as tied; the
    /// largest tied index wins.
    pub eps_tie: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { skip_rule: true, final_shortcut: false, eps_root: 1e-12, eps_tie: 1e-9 }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("infeasible problem: prefix of lower bounds exceeds rho at constraint {constraint}")]
    Infeasible { constraint: usize },
    #[error(transparent)]
    Reduce(#[from] ReduceError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("internal invariant violated: {0}")]
    Internal(&'static str),
}

/// Mutable state of one multiplier sweep over the reduced problem.
///
/// `settled` variables (0-based count) already carry their final multiplier;
/// `base` is the right-hand side of the constraint that closed the last
/// block, so every remaining constraint sees `gamma = rho_j - base`. Blocks
/// only ever grow rightward and sigma entries are written exactly once.
#[derive(Debug)]
struct SweepState {
    settled: usize,
    base: f64,
    sigma: Vec<f64>,
    blocks: Vec<TraceBlock>,
    iterations: usize,
}

/// Runs the multiplier sweep on the surviving subproblem and returns its
/// solution in inner indexing. The trace ends at the last inner variable;
/// with no inner constraints at all the trace is empty and every variable
/// rests on its upper bound.
pub fn sweep(rp: &ReducedProblem, opts: &SolverOptions) -> Result<Solution, SolveError> {
    match &rp.inner {
        Some(inner) => sweep_problem(inner, opts),
        None => Ok(Solution {
            x_star: Vec::new(),
            sigma_star: Vec::new(),
            nu_star: Vec::new(),
            kappa_star: Vec::new(),
            trace: Vec::new(),
            iterations: 0,
        }),
    }
}

fn sweep_problem(q: &Problem, opts: &SolverOptions) -> Result<Solution, SolveError> {
    let m = q.len();
    let maps: Vec<ClippedInverse> = (0..m)
        .map(|i| ClippedInverse::new(&q.terms()[i], q.lower()[i], q.upper()[i]))
        .collect();
    let mut state =
        SweepState { settled: 0, base: 0.0, sigma: vec![0.0; m], blocks: Vec::new(), iterations: 0 };

    while state.settled < m {
        if opts.final_shortcut
            && state.settled == m - 1
            && let Some(&rho_m) = q.rho().get(&m)
        {
            settle_last_directly(&maps[m - 1], rho_m - state.base, &mut state);
            break;
        }

        let start = state.settled;
        let mut candidates: Vec<(usize, f64)> = Vec::new();
        let mut champion: Option<f64> = None;
        let mut upper_sum = 0.0f64;
        let mut upto = start;
        for (&j, &rho_j) in q.rho().range(start + 1..) {
            while upto < j {
                upper_sum += q.upper()[upto];
                upto += 1;
            }
            let gamma = rho_j - state.base;
            let root = if gamma >= upper_sum {
                0.0
            } else {
                if opts.skip_rule
                    && let Some(best) = champion
                {
                    // The prefix curve is non-increasing, so the root can
                    // only beat (or tie) the champion when the curve still
                    // exceeds gamma just below it.
                    let probe = (best - opts.eps_tie * (1.0 + best)).max(0.0);
                    if prefix_sum(&maps[start..j], probe) < gamma {
                        continue;
                    }
                }
                solve_prefix(&maps[start..j], gamma, opts.eps_root)?
            };
            candidates.push((j, root));
            champion = Some(champion.map_or(root, |c: f64| c.max(root)));
        }

        let Some(mu) = champion else {
            // No constraint ahead; the rest of the variables sit on their
            // (finite, validated by reduction) upper bounds with multiplier 0.
            match state.blocks.last_mut() {
                Some(last) if last.mu == 0.0 => last.k = m,
                Some(_) => state.blocks.push(TraceBlock { mu: 0.0, k: m }),
                None => {}
            }
            state.settled = m;
            break;
        };
        let tie = opts.eps_tie * (1.0 + mu);
        let k = candidates
            .iter()
            .filter(|&&(_, s)| s >= mu - tie)
            .map(|&(j, _)| j)
            .max()
            .expect("champion implies a candidate");
        if k <= state.settled {
            return Err(SolveError::Internal("block end did not advance"));
        }
        for s in state.sigma.iter_mut().take(k).skip(state.settled) {
            *s = mu;
        }
        state.blocks.push(TraceBlock { mu, k });
        state.iterations += 1;
        state.base = q.rho()[&k];
        state.settled = k;
    }

    let x: Vec<f64> = (0..m).map(|i| maps[i].eval(state.sigma[i])).collect();
    let (nu, kappa) = verify::reconstruct_box_multipliers(q, &x, &state.sigma);
    Ok(Solution {
        x_star: x,
        sigma_star: state.sigma,
        nu_star: nu,
        kappa_star: kappa,
        trace: state.blocks,
        iterations: state.iterations,
    })
}

/// One remaining constrained variable: its value is the leftover budget
/// clipped to the box, and its multiplier the matching inverse image. This
/// reproduces exactly what the skipped final iteration would compute.
fn settle_last_directly(map: &ClippedInverse, gamma: f64, state: &mut SweepState) {
    assert!(
        gamma > map.lo(),
        "leftover budget {gamma} at or below the lower bound of the last variable"
    );
    let mu = if gamma >= map.hi() { 0.0 } else { map.term().h(gamma).max(0.0) };
    let m = state.sigma.len();
    state.sigma[m - 1] = mu;
    state.blocks.push(TraceBlock { mu, k: m });
    state.settled = m;
}

/// Full pipeline: sense normalization, feasibility, reduction, sweep, and the
/// mapping back to the original variables.
pub fn solve(p: &Problem, opts: &SolverOptions) -> Result<Solution, SolveError> {
    match p.sense() {
        Sense::PrefixSumGe => {
            let (flipped, map) = flip_sense(p)?;
            let sol = solve_le(&flipped, opts)?;
            Ok(map.map_solution(sol))
        }
        Sense::PrefixSumLe => solve_le(p, opts),
    }
}

fn solve_le(p: &Problem, opts: &SolverOptions) -> Result<Solution, SolveError> {
    if let Feasibility::Infeasible { constraint } = check_feasibility(p) {
        return Err(SolveError::Infeasible { constraint });
    }
    let rp = reduce(p)?;
    let inner = sweep(&rp, opts)?;
    Ok(rp.restore_solution(p, &inner))
}
