//! waterladder: a finite-step solver for separable convex minimization under
//! nested prefix-sum inequality constraints and box constraints.
//!
//! The solver handles problems of the form
//!
//! ```text
//! minimize    sum_n f_n(x_n)
//! subject to  x_1 + ... + x_j <= rho_j      for j in a sparse index set L
//!             l_n <= x_n <= u_n             (infinite bounds allowed)
//! ```
//!
//! with every `f_n` strictly convex. It works in two layers: an outer sweep
//! settles Lagrange-multiplier blocks in finitely many steps, and an inner
//! root solve intersects prefix sums of clipped inverse-derivative maps with
//! their budgets, in closed form for the catalog objective families. The
//! classical water-filling, cave-filling and multi-level water-filling power
//! allocations all drop out as special cases; see [`scenarios`].
//!
//! # Example
//!
//! ```
//! use waterladder::scenarios::capacity_waterfilling;
//! use waterladder::solver::{solve, SolverOptions};
//! use waterladder::verify::kkt_check;
//!
//! let problem = capacity_waterfilling(&[4.0, 1.0], &[f64::INFINITY; 2], 1.0).unwrap();
//! let solution = solve(&problem, &SolverOptions::default()).unwrap();
//! assert!((solution.x_star[0] - 0.875).abs() < 1e-9);
//! assert!(kkt_check(&problem, &solution, 1e-6).pass);
//! ```

// Negated comparisons like `!(x > 0.0)` are used on purpose: they reject NaN
// along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod kernel;
pub mod oracle;
pub mod preprocess;
pub mod problem;
pub mod scenarios;
pub mod solver;
pub mod verify;

pub use problem::{
    Feasibility, ObjectiveTerm, Problem, ProblemError, Sense, Solution, TermKind, TraceBlock,
    check_feasibility, flip_sense,
};
pub use solver::{SolveError, SolverOptions, solve};
pub use verify::{KktReport, kkt_check};
