//! Command-line front end and the on-disk problem/solution/chart formats.
//!
//! Problem files use the versioned JSON schema `waterladder/1` (see
//! [`ProblemFile`]); solutions are written as JSON with the primal point,
//! multipliers, block trace and an optional verification report. Chart files
//! are CSV samples of the per-term response curves and their prefix sums,
//! plus marker rows locating the solution on them.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{ClippedInverse, prefix_sum, solve_prefix};
use crate::oracle::{GridSpec, grid_solve, objective_gap_bound};
use crate::preprocess::reduce;
use crate::problem::{Problem, Sense, Solution, TermKind, flip_sense};
use crate::solver::{SolveError, SolverOptions, solve};
use crate::verify::{KktReport, kkt_check};

pub const SCHEMA_VERSION: &str = "waterladder/1";

/// Exit codes of the CLI.
pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_INVALID_INPUT: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Parser)]
#[command(name = "waterladder", version, about = "Separable convex solver for nested prefix and box constraints")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one or more problem files.
    Solve(SolveArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Problem file; repeat for batch mode.
    #[arg(long = "input", required = true)]
    input: Vec<PathBuf>,
    /// Solution file (single input only; batch mode writes `<input>.sol.json`).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Verify the solution and embed the report.
    #[arg(long)]
    kkt: bool,
    /// Verification tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Cross-check against the exhaustive grid oracle.
    #[arg(long)]
    oracle: bool,
    /// Grid points per dimension for --oracle.
    #[arg(long, default_value_t = 41)]
    grid: usize,
    /// Write chart samples and marker rows to this path (single input only).
    #[arg(long)]
    chart: Option<PathBuf>,
    /// Solve every prefix equation instead of skipping dominated ones.
    #[arg(long = "no-skip-rule")]
    no_skip_rule: bool,
    /// Print the multiplier block log.
    #[arg(long)]
    trace: bool,
}

/// Problem file, schema `waterladder/1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemFile {
    pub version: String,
    /// "le" or "ge".
    pub sense: String,
    pub terms: Vec<TermSpec>,
    pub lower: Vec<BoundSpec>,
    pub upper: Vec<BoundSpec>,
    pub constraints: Vec<ConstraintSpec>,
}

/// One catalog term: `kind` is one of `scaled_exp` (param `w`),
/// `neg_log_capacity`, `inverse_linear`, `log_inv_snr` (param `lambda`).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermSpec {
    pub kind: String,
    pub params: BTreeMap<String, f64>,
}

/// A bound: a number, or the strings `"-inf"` / `"+inf"`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundSpec {
    Number(f64),
    Keyword(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstraintSpec {
    /// 1-based prefix length.
    pub j: usize,
    pub rho: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolutionFile {
    pub x: Vec<f64>,
    pub sigma: Vec<f64>,
    pub nu: Vec<f64>,
    pub kappa: Vec<f64>,
    pub trace: Vec<TraceEntry>,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kkt: Option<KktFile>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceEntry {
    pub mu: f64,
    pub k: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KktFile {
    pub residuals: ResidualsFile,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidualsFile {
    pub stationarity: f64,
    pub monotone: f64,
    pub primal: f64,
    pub comp_slack_constraints: f64,
    pub comp_slack_boxes: f64,
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("unsupported schema version {0:?}, expected {SCHEMA_VERSION:?}")]
    Version(String),
    #[error("unknown sense {0:?}, expected \"le\" or \"ge\"")]
    Sense(String),
    #[error("term {index}: unknown kind {kind:?}")]
    UnknownKind { index: usize, kind: String },
    #[error("term {index}: missing parameter {param:?}")]
    MissingParam { index: usize, param: &'static str },
    #[error("bound {index}: {text:?} is not a number, \"-inf\" or \"+inf\"")]
    BadBound { index: usize, text: String },
    #[error("custom terms cannot be serialized")]
    Unserializable,
    #[error(transparent)]
    Problem(#[from] crate::problem::ProblemError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn parse_bound(index: usize, b: &BoundSpec) -> Result<f64, SchemaError> {
    match b {
        BoundSpec::Number(v) => Ok(*v),
        BoundSpec::Keyword(s) => match s.as_str() {
            "-inf" => Ok(f64::NEG_INFINITY),
            "+inf" | "inf" => Ok(f64::INFINITY),
            _ => Err(SchemaError::BadBound { index, text: s.clone() }),
        },
    }
}

fn bound_spec(v: f64) -> BoundSpec {
    if v == f64::NEG_INFINITY {
        BoundSpec::Keyword("-inf".into())
    } else if v == f64::INFINITY {
        BoundSpec::Keyword("+inf".into())
    } else {
        BoundSpec::Number(v)
    }
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_problem(&self) -> Result<Problem, SchemaError> {
        if self.version != SCHEMA_VERSION {
            return Err(SchemaError::Version(self.version.clone()));
        }
        let sense = match self.sense.as_str() {
            "le" => Sense::PrefixSumLe,
            "ge" => Sense::PrefixSumGe,
            other => return Err(SchemaError::Sense(other.to_string())),
        };
        let mut terms = Vec::with_capacity(self.terms.len());
        for (index, spec) in self.terms.iter().enumerate() {
            let param = |name: &'static str| {
                spec.params
                    .get(name)
                    .copied()
                    .ok_or(SchemaError::MissingParam { index, param: name })
            };
            let term = match spec.kind.as_str() {
                "scaled_exp" => crate::problem::ObjectiveTerm::scaled_exp(param("w")?),
                "neg_log_capacity" => {
                    crate::problem::ObjectiveTerm::neg_log_capacity(param("lambda")?)
                }
                "inverse_linear" => crate::problem::ObjectiveTerm::inverse_linear(param("lambda")?),
                "log_inv_snr" => crate::problem::ObjectiveTerm::log_inv_snr(param("lambda")?),
                other => {
                    return Err(SchemaError::UnknownKind { index, kind: other.to_string() });
                }
            }?;
            terms.push(term);
        }
        let lower = self
            .lower
            .iter()
            .enumerate()
            .map(|(i, b)| parse_bound(i, b))
            .collect::<Result<Vec<_>, _>>()?;
        let upper = self
            .upper
            .iter()
            .enumerate()
            .map(|(i, b)| parse_bound(i, b))
            .collect::<Result<Vec<_>, _>>()?;
        let rho: BTreeMap<usize, f64> = self.constraints.iter().map(|c| (c.j, c.rho)).collect();
        Ok(Problem::new(terms, lower, upper, rho, sense)?)
    }

    pub fn from_problem(p: &Problem) -> Result<Self, SchemaError> {
        let mut terms = Vec::with_capacity(p.len());
        for t in p.terms() {
            let (kind, key, value) = match t.kind() {
                TermKind::ScaledExp { weight } => ("scaled_exp", "w", *weight),
                TermKind::NegLogCapacity { gain } => ("neg_log_capacity", "lambda", *gain),
                TermKind::InverseLinear { weight } => ("inverse_linear", "lambda", *weight),
                TermKind::LogInvSnr { gain } => ("log_inv_snr", "lambda", *gain),
                _ => return Err(SchemaError::Unserializable),
            };
            terms.push(TermSpec {
                kind: kind.to_string(),
                params: [(key.to_string(), value)].into_iter().collect(),
            });
        }
        Ok(ProblemFile {
            version: SCHEMA_VERSION.to_string(),
            sense: match p.sense() {
                Sense::PrefixSumLe => "le".to_string(),
                Sense::PrefixSumGe => "ge".to_string(),
            },
            terms,
            lower: p.lower().iter().map(|&v| bound_spec(v)).collect(),
            upper: p.upper().iter().map(|&v| bound_spec(v)).collect(),
            constraints: p.rho().iter().map(|(&j, &rho)| ConstraintSpec { j, rho }).collect(),
        })
    }
}

impl SolutionFile {
    pub fn new(s: &Solution, kkt: Option<&KktReport>) -> Self {
        SolutionFile {
            x: s.x_star.clone(),
            sigma: s.sigma_star.clone(),
            nu: s.nu_star.clone(),
            kappa: s.kappa_star.clone(),
            trace: s.trace.iter().map(|b| TraceEntry { mu: b.mu, k: b.k }).collect(),
            iterations: s.iterations,
            kkt: kkt.map(|r| KktFile {
                residuals: ResidualsFile {
                    stationarity: r.stationarity_residual,
                    monotone: r.monotone_violation,
                    primal: r.primal_violation,
                    comp_slack_constraints: r.comp_slack_constraints,
                    comp_slack_boxes: r.comp_slack_boxes,
                },
                pass: r.pass,
            }),
        }
    }
}

/// Writes the chart data of a solved instance as CSV.
///
/// Sample rows trace each surviving term's response `xi_n` and the prefix
/// curves `c_n` over a log-spaced multiplier grid; `marker_solution` rows
/// place each variable at `(sigma_n, x_n)` and `marker_prefix` rows give the
/// first-iteration candidate multipliers against their right-hand sides. The
/// `eta` column is the water level `1/varsigma`. Curves of a `ge` problem are
/// drawn on its flipped image.
pub fn emit_chart_data(p: &Problem, s: &Solution) -> Result<String, SolveError> {
    let (image, sol);
    if p.sense() == Sense::PrefixSumGe {
        let (flipped, map) = flip_sense(p)?;
        image = flipped;
        // The image of the solution under the same substitution.
        sol = Solution {
            x_star: s.x_star.iter().map(|v| -v).collect(),
            sigma_star: s.sigma_star.clone(),
            nu_star: s.kappa_star.clone(),
            kappa_star: s.nu_star.clone(),
            trace: s.trace.clone(),
            iterations: s.iterations,
        };
        let _ = map;
    } else {
        image = p.clone();
        sol = s.clone();
    }

    let rp = reduce(&image)?;
    let mut out = String::new();
    out.push_str("row,index,varsigma,eta,xi,c,value\n");

    if let Some(inner) = &rp.inner {
        let maps: Vec<ClippedInverse> = (0..inner.len())
            .map(|i| ClippedInverse::new(&inner.terms()[i], inner.lower()[i], inner.upper()[i]))
            .collect();

        // First-iteration candidate multipliers over the inner constraints.
        let mut prefix_markers: Vec<(usize, f64, f64)> = Vec::new();
        for (&j, &rho_j) in inner.rho() {
            let root = solve_prefix(&maps[..j], rho_j, 1e-12)?;
            let orig_j = rp.constraint_origin.get(&j).copied().unwrap_or(j);
            prefix_markers.push((orig_j, root, rho_j));
        }

        let mut pool: Vec<f64> = Vec::new();
        for m in &maps {
            for v in [m.h_at_hi(), m.h_at_lo()] {
                if v.is_finite() && v > 0.0 {
                    pool.push(v);
                }
            }
        }
        pool.extend(sol.sigma_star.iter().copied().filter(|v| v.is_finite() && *v > 0.0));
        pool.extend(prefix_markers.iter().map(|m| m.1).filter(|v| v.is_finite() && *v > 0.0));
        let (lo, hi) = if pool.is_empty() {
            (0.01, 100.0)
        } else {
            let min = pool.iter().copied().fold(f64::INFINITY, f64::min);
            let max = pool.iter().copied().fold(0.0f64, f64::max);
            (min / 10.0, max * 10.0)
        };

        const SAMPLES: usize = 200;
        let ratio = (hi / lo).ln();
        for t in 0..SAMPLES {
            let varsigma = lo * (ratio * t as f64 / (SAMPLES - 1) as f64).exp();
            for (m, map) in maps.iter().enumerate() {
                let label = rp.index_map[m] + 1;
                let xi = map.eval(varsigma);
                let c = prefix_sum(&maps[..=m], varsigma);
                writeln!(out, "sample,{label},{varsigma},{},{xi},{c},", 1.0 / varsigma)
                    .expect("string write");
            }
        }

        for (orig_j, root, gamma) in prefix_markers {
            writeln!(out, "marker_prefix,{orig_j},{root},{},,,{gamma}", 1.0 / root)
                .expect("string write");
        }
    }

    for (i, (&x, &sigma)) in sol.x_star.iter().zip(&sol.sigma_star).enumerate() {
        writeln!(out, "marker_solution,{},{sigma},{},,,{x}", i + 1, 1.0 / sigma)
            .expect("string write");
    }
    Ok(out)
}

#[derive(Debug)]
enum RunFailure {
    Invalid(String),
    Infeasible { constraint: usize },
    Internal(String),
}

impl RunFailure {
    fn exit_code(&self) -> i32 {
        match self {
            RunFailure::Invalid(_) => EXIT_INVALID_INPUT,
            RunFailure::Infeasible { .. } => EXIT_INFEASIBLE,
            RunFailure::Internal(_) => EXIT_INTERNAL,
        }
    }

    fn report(&self, file: &Path) {
        let (kind, message, constraint) = match self {
            RunFailure::Invalid(m) => ("invalid_input", m.clone(), None),
            RunFailure::Infeasible { constraint } => (
                "infeasible",
                format!("constraint j={constraint} is violated by the lower-bound prefix"),
                Some(*constraint),
            ),
            RunFailure::Internal(m) => ("internal", m.clone(), None),
        };
        let mut diag = serde_json::json!({
            "level": "error",
            "kind": kind,
            "file": file.display().to_string(),
            "message": message,
        });
        if let Some(j) = constraint {
            diag["constraint"] = serde_json::json!(j);
        }
        eprintln!("{diag}");
    }
}

fn solve_failure(err: SolveError) -> RunFailure {
    match err {
        SolveError::Infeasible { constraint } => RunFailure::Infeasible { constraint },
        SolveError::Reduce(e) => RunFailure::Invalid(e.to_string()),
        SolveError::Problem(e) => RunFailure::Invalid(e.to_string()),
        SolveError::Kernel(e) => RunFailure::Internal(e.to_string()),
        SolveError::Internal(m) => RunFailure::Internal(m.to_string()),
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let benign = matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = err.print();
            return if benign { EXIT_OK } else { EXIT_INVALID_INPUT };
        }
    };
    match cli.command {
        Command::Solve(args) => run_solve(&args),
    }
}

fn run_solve(args: &SolveArgs) -> i32 {
    if args.input.len() > 1 && (args.output.is_some() || args.chart.is_some()) {
        eprintln!(
            "{}",
            serde_json::json!({
                "level": "error",
                "kind": "invalid_input",
                "message": "--output/--chart require a single --input",
            })
        );
        return EXIT_INVALID_INPUT;
    }
    for path in &args.input {
        if let Err(failure) = solve_one(args, path) {
            failure.report(path);
            return failure.exit_code();
        }
    }
    EXIT_OK
}

fn solve_one(args: &SolveArgs, path: &Path) -> Result<(), RunFailure> {
    let text = fs::read_to_string(path)
        .map_err(|e| RunFailure::Invalid(format!("cannot read {}: {e}", path.display())))?;
    let file = ProblemFile::from_json(&text).map_err(|e| RunFailure::Invalid(e.to_string()))?;
    let problem = file.to_problem().map_err(|e| RunFailure::Invalid(e.to_string()))?;

    let opts = SolverOptions { skip_rule: !args.no_skip_rule, ..SolverOptions::default() };
    let solution = solve(&problem, &opts).map_err(solve_failure)?;

    if args.trace {
        for (i, b) in solution.trace.iter().enumerate() {
            println!("block {}: mu={} k={}", i + 1, b.mu, b.k);
        }
        println!("iterations: {}", solution.iterations);
    }

    let report = if args.kkt { Some(kkt_check(&problem, &solution, args.tol)) } else { None };

    if args.oracle {
        let radius = 2.0 + 2.0 * solution.x_star.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let spec = GridSpec::new(args.grid, radius).with_anchor(solution.x_star.clone());
        let grid = grid_solve(&problem, &spec)
            .map_err(|e| RunFailure::Invalid(format!("oracle: {e}")))?;
        let bound = objective_gap_bound(&problem, &grid);
        let f_solver = problem.objective(&solution.x_star);
        let gap = f_solver - grid.objective;
        println!(
            "oracle: objective={f_solver} grid_best={} gap={gap} bound={bound} ok={}",
            grid.objective,
            gap <= bound
        );
    }

    if let Some(chart_path) = &args.chart {
        let chart = emit_chart_data(&problem, &solution)
            .map_err(|e| RunFailure::Internal(format!("chart: {e}")))?;
        fs::write(chart_path, chart)
            .map_err(|e| RunFailure::Invalid(format!("cannot write chart: {e}")))?;
    }

    let out = SolutionFile::new(&solution, report.as_ref());
    let rendered = serde_json::to_string_pretty(&out)
        .map_err(|e| RunFailure::Internal(format!("serialization: {e}")))?;
    match (&args.output, args.input.len()) {
        (Some(path), _) => fs::write(path, rendered)
            .map_err(|e| RunFailure::Invalid(format!("cannot write output: {e}")))?,
        (None, 1) => println!("{rendered}"),
        (None, _) => {
            let target = path.with_extension("sol.json");
            fs::write(&target, rendered)
                .map_err(|e| RunFailure::Invalid(format!("cannot write output: {e}")))?;
        }
    }
    Ok(())
}
