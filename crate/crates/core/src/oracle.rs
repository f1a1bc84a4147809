//! Brute-force reference optimizer for desk-scale instances.
//!
//! Enumerates a Cartesian grid over the (clipped) boxes, discards points
//! violating any prefix constraint, and returns the feasible grid point with
//! the smallest objective. Used by the test suites and the CLI `--oracle`
//! flag; never a production path.

use rayon::prelude::*;
use thiserror::Error;

use crate::problem::{Feasibility, Problem, Sense, check_feasibility, flip_sense};

const MAX_GRID_POINTS: f64 = 1e8;
const MAX_DIMS: usize = 6;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("grid of {points} points exceeds the enumeration budget")]
    GridTooLarge { points: f64 },
    #[error("no grid point satisfies every prefix constraint; refine the grid")]
    NoFeasibleGridPoint,
    #[error("grid enumeration supports at most {MAX_DIMS} variables, got {n}")]
    TooManyVariables { n: usize },
    #[error("grid needs at least 3 points per dimension")]
    TooFewPoints,
    #[error("infeasible problem: constraint {constraint}")]
    Infeasible { constraint: usize },
}

/// Grid resolution and the finite substitute box for infinite bounds.
#[derive(Clone, Debug)]
pub struct GridSpec {
    /// Points per dimension, at least 3.
    pub points_per_dim: usize,
    /// Radius substituted for infinite bounds: each box is clipped to
    /// `[max(l, a - r), min(u, a + r)]` around the anchor coordinate `a`.
    pub bound_fallback: f64,
    /// Center for the infinite-bound clipping, typically a solver solution.
    /// Defaults to the feasibility witness: lower bounds truncated at `-r`.
    pub anchor: Option<Vec<f64>>,
}

impl GridSpec {
    pub fn new(points_per_dim: usize, bound_fallback: f64) -> Self {
        Self { points_per_dim, bound_fallback, anchor: None }
    }

    pub fn with_anchor(mut self, anchor: Vec<f64>) -> Self {
        self.anchor = Some(anchor);
        self
    }
}

/// Best feasible grid point plus the clipped boxes and steps it was found on.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub boxes: Vec<(f64, f64)>,
    pub steps: Vec<f64>,
}

/// Exhaustive grid minimization. Feasibility is strict (`<=` with no
/// tolerance); ties resolve to the first point in row-major order, so the
/// result is deterministic even though slices of the first dimension are
/// searched in parallel.
pub fn grid_solve(p: &Problem, g: &GridSpec) -> Result<GridSolution, OracleError> {
    if p.sense() == Sense::PrefixSumGe {
        let (flipped, map) = flip_sense(p).map_err(|_| OracleError::NoFeasibleGridPoint)?;
        let anchor = g.anchor.as_ref().map(|a| a.iter().map(|v| -v).collect());
        let spec = GridSpec { anchor, ..g.clone() };
        let sol = grid_solve(&flipped, &spec)?;
        return Ok(GridSolution {
            x: map.map_point(&sol.x),
            objective: sol.objective,
            boxes: sol.boxes.iter().map(|&(lo, hi)| (-hi, -lo)).collect(),
            steps: sol.steps,
        });
    }

    let n = p.len();
    if n > MAX_DIMS {
        return Err(OracleError::TooManyVariables { n });
    }
    if g.points_per_dim < 3 {
        return Err(OracleError::TooFewPoints);
    }
    if let Feasibility::Infeasible { constraint } = check_feasibility(p) {
        return Err(OracleError::Infeasible { constraint });
    }
    let total = (g.points_per_dim as f64).powi(n as i32);
    if total > MAX_GRID_POINTS {
        return Err(OracleError::GridTooLarge { points: total });
    }

    let r = g.bound_fallback;
    let mut boxes = Vec::with_capacity(n);
    for i in 0..n {
        let anchor = match &g.anchor {
            Some(a) => a[i],
            None => p.lower()[i].max(-r),
        };
        let lo = p.lower()[i].max(anchor - r);
        let hi = p.upper()[i].min(anchor + r);
        boxes.push((lo, hi));
    }

    let k = g.points_per_dim;
    let mut coords: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut steps = Vec::with_capacity(n);
    for (i, &(lo, hi)) in boxes.iter().enumerate() {
        let step = (hi - lo) / (k - 1) as f64;
        steps.push(step);
        let col: Vec<f64> =
            (0..k).map(|t| if t + 1 == k { hi } else { lo + step * t as f64 }).collect();
        values.push(col.iter().map(|&x| p.terms()[i].value(x)).collect());
        coords.push(col);
    }

    // Admissible lower bound on the objective of any completion of a partial
    // assignment; lets the search discard whole subtrees without losing the
    // exact grid minimum.
    let col_min: Vec<f64> = values
        .iter()
        .map(|col| col.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    let mut tail_min = vec![0.0f64; n + 1];
    for i in (0..n).rev() {
        tail_min[i] = tail_min[i + 1] + col_min[i];
    }

    let rho: Vec<Option<f64>> = (1..=n).map(|j| p.rho().get(&j).copied()).collect();

    struct Search<'a> {
        coords: &'a [Vec<f64>],
        values: &'a [Vec<f64>],
        tail_min: &'a [f64],
        rho: &'a [Option<f64>],
        n: usize,
    }

    struct Best {
        objective: f64,
        index: Vec<usize>,
        feasible_points: u64,
    }

    impl Search<'_> {
        fn descend(
            &self,
            depth: usize,
            prefix_sum: f64,
            partial_obj: f64,
            index: &mut Vec<usize>,
            best: &mut Best,
        ) {
            if self.tail_min[depth].is_finite()
                && partial_obj + self.tail_min[depth] >= best.objective
            {
                return;
            }
            if depth == self.n {
                best.feasible_points += 1;
                if partial_obj < best.objective {
                    best.objective = partial_obj;
                    best.index = index.clone();
                }
                return;
            }
            for t in 0..self.coords[depth].len() {
                let sum = prefix_sum + self.coords[depth][t];
                if let Some(rho) = self.rho[depth]
                    && sum > rho
                {
                    continue;
                }
                index.push(t);
                self.descend(depth + 1, sum, partial_obj + self.values[depth][t], index, best);
                index.pop();
            }
        }
    }

    let search = Search { coords: &coords, values: &values, tail_min: &tail_min, rho: &rho, n };

    let merged = (0..k)
        .into_par_iter()
        .map(|t0| {
            let mut best =
                Best { objective: f64::INFINITY, index: Vec::new(), feasible_points: 0 };
            let x0 = coords[0][t0];
            if let Some(rho) = rho[0]
                && x0 > rho
            {
                return best;
            }
            let mut index = vec![t0];
            search.descend(1, x0, values[0][t0], &mut index, &mut best);
            best
        })
        .reduce(
            || Best { objective: f64::INFINITY, index: Vec::new(), feasible_points: 0 },
            |a, b| {
                let feasible_points = a.feasible_points + b.feasible_points;
                let mut keep = if b.objective < a.objective
                    || (b.objective == a.objective && !b.index.is_empty() && (a.index.is_empty() || b.index < a.index))
                {
                    b
                } else {
                    a
                };
                keep.feasible_points = feasible_points;
                keep
            },
        );

    if merged.feasible_points == 0 {
        return Err(OracleError::NoFeasibleGridPoint);
    }
    debug_assert_eq!(merged.index.len(), n);
    let x: Vec<f64> = merged.index.iter().enumerate().map(|(i, &t)| coords[i][t]).collect();
    Ok(GridSolution { x, objective: merged.objective, boxes, steps })
}

/// First-order bound on how far the true optimum can sit below the best grid
/// point: `sum_d |f_d'| * step_d` with the derivative magnitude taken at the
/// clipped box corners (nudged one step inward where the derivative blows
/// up).
pub fn objective_gap_bound(p: &Problem, sol: &GridSolution) -> f64 {
    let mut bound = 0.0;
    for i in 0..p.len() {
        let (lo, hi) = sol.boxes[i];
        let step = sol.steps[i];
        let mut slope: f64 = 0.0;
        for corner in [lo, hi] {
            let mut d = p.terms()[i].derivative(corner).abs();
            if !d.is_finite() {
                let inward = if corner == lo { lo + step } else { hi - step };
                d = p.terms()[i].derivative(inward).abs();
            }
            if d.is_finite() {
                slope = slope.max(d);
            }
        }
        bound += slope * step;
    }
    bound
}
