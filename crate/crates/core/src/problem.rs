//! Problem data model: objective-term catalog, box bounds, nested prefix
//! constraints, feasibility checking and the sense-flip transform.
//!
//! A problem instance minimizes `sum_n f_n(x_n)` subject to prefix-sum
//! constraints `x_1 + ... + x_j <= rho_j` for `j` in a sparse index set `L`,
//! and box constraints `l_n <= x_n <= u_n` with infinite bounds allowed.
//! Every `f_n` is strictly convex on its box and continuously differentiable
//! on the interior.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Shared scalar function used by [`CustomTerm`] closures.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied objective term given by closures.
///
/// The `value` and `derivative` closures must be total on the finite part of
/// the term's domain, including finite box endpoints (the derivative is taken
/// as its one-sided limit there). When a box endpoint is infinite the solver
/// never calls the closures at `±inf`; instead the corresponding
/// `derivative_limit_*` field supplies the limit of `f'` (which may itself be
/// `±inf`). Classification of a custom term with an infinite bound fails if
/// the matching limit is absent.
#[derive(Clone)]
pub struct CustomTerm {
    /// `f(x)`.
    pub value: ScalarFn,
    /// `f'(x)`.
    pub derivative: ScalarFn,
    /// Optional closed-form inverse of `-f'`; the kernel falls back to
    /// monotone bisection when absent.
    pub inverse_neg_derivative: Option<ScalarFn>,
    /// Limit of `f'(x)` as `x` approaches the lower end of the domain, used
    /// when the paired box bound is `-inf`.
    pub derivative_limit_lower: Option<f64>,
    /// Limit of `f'(x)` as `x` approaches the upper end of the domain, used
    /// when the paired box bound is `+inf`.
    pub derivative_limit_upper: Option<f64>,
}

impl fmt::Debug for CustomTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomTerm")
            .field("inverse_neg_derivative", &self.inverse_neg_derivative.is_some())
            .field("derivative_limit_lower", &self.derivative_limit_lower)
            .field("derivative_limit_upper", &self.derivative_limit_upper)
            .finish()
    }
}

impl PartialEq for CustomTerm {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.value, &other.value)
            && Arc::ptr_eq(&self.derivative, &other.derivative)
            && match (&self.inverse_neg_derivative, &other.inverse_neg_derivative) {
                (Some(a), Some(b)) => Arc::ptr_eq(a, b),
                (None, None) => true,
                _ => false,
            }
            && self.derivative_limit_lower == other.derivative_limit_lower
            && self.derivative_limit_upper == other.derivative_limit_upper
    }
}

/// The objective-function catalog.
#[derive(Clone, Debug, PartialEq)]
pub enum TermKind {
    /// `f(x) = w * exp(-x)` with `w > 0`, decreasing on all of `R`.
    ScaledExp { weight: f64 },
    /// `f(x) = -log(1 + g*x)` with `g > 0`, decreasing on `(-1/g, inf)`.
    NegLogCapacity { gain: f64 },
    /// `f(x) = w / x` with `w > 0`, decreasing on `(0, inf)`.
    InverseLinear { weight: f64 },
    /// `f(x) = log(1 + 1/(g*x))` with `g > 0`, decreasing on `(0, inf)`.
    LogInvSnr { gain: f64 },
    /// Closure-backed term.
    Custom(CustomTerm),
    /// `f(x) = inner(-x)`, produced by the sense-flip transform.
    Mirrored(Box<ObjectiveTerm>),
}

/// One strictly convex scalar objective term together with the open interval
/// on which its derivative is defined.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveTerm {
    kind: TermKind,
    domain: (f64, f64),
}

impl ObjectiveTerm {
    /// `w * exp(-x)`.
    pub fn scaled_exp(weight: f64) -> Result<Self, ProblemError> {
        if !(weight > 0.0) {
            return Err(ProblemError::NonPositiveParameter { what: "scaled_exp weight" });
        }
        Ok(Self { kind: TermKind::ScaledExp { weight }, domain: (f64::NEG_INFINITY, f64::INFINITY) })
    }

    /// `-log(1 + gain*x)`.
    pub fn neg_log_capacity(gain: f64) -> Result<Self, ProblemError> {
        if !(gain > 0.0) {
            return Err(ProblemError::NonPositiveParameter { what: "neg_log_capacity gain" });
        }
        Ok(Self { kind: TermKind::NegLogCapacity { gain }, domain: (-1.0 / gain, f64::INFINITY) })
    }

    /// `weight / x` on `x > 0`.
    pub fn inverse_linear(weight: f64) -> Result<Self, ProblemError> {
        if !(weight > 0.0) {
            return Err(ProblemError::NonPositiveParameter { what: "inverse_linear weight" });
        }
        Ok(Self { kind: TermKind::InverseLinear { weight }, domain: (0.0, f64::INFINITY) })
    }

    /// `log(1 + 1/(gain*x))` on `x > 0`.
    pub fn log_inv_snr(gain: f64) -> Result<Self, ProblemError> {
        if !(gain > 0.0) {
            return Err(ProblemError::NonPositiveParameter { what: "log_inv_snr gain" });
        }
        Ok(Self { kind: TermKind::LogInvSnr { gain }, domain: (0.0, f64::INFINITY) })
    }

    /// Closure-backed term on the open interval `domain`.
    pub fn custom(term: CustomTerm, domain: (f64, f64)) -> Result<Self, ProblemError> {
        if domain.0.is_nan() || domain.1.is_nan() || !(domain.0 < domain.1) {
            return Err(ProblemError::InvalidDomain);
        }
        Ok(Self { kind: TermKind::Custom(term), domain })
    }

    pub fn kind(&self) -> &TermKind {
        &self.kind
    }

    /// Open interval on which the derivative is defined.
    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// The reflected term `x -> f(-x)`. Reflecting twice returns the original
    /// term, so the sense-flip round trip is exact.
    pub fn mirrored(self) -> Self {
        match self.kind {
            TermKind::Mirrored(inner) => *inner,
            _ => {
                let domain = (-self.domain.1, -self.domain.0);
                Self { kind: TermKind::Mirrored(Box::new(self)), domain }
            }
        }
    }

    /// `f(x)`. Infinite arguments follow the IEEE limit of the closed forms.
    pub fn value(&self, x: f64) -> f64 {
        match &self.kind {
            TermKind::ScaledExp { weight } => weight * (-x).exp(),
            TermKind::NegLogCapacity { gain } => -(1.0 + gain * x).ln(),
            TermKind::InverseLinear { weight } => weight / x,
            TermKind::LogInvSnr { gain } => (1.0 + 1.0 / (gain * x)).ln(),
            TermKind::Custom(c) => (c.value)(x),
            TermKind::Mirrored(inner) => inner.value(-x),
        }
    }

    /// `f'(x)`. For custom terms at `±inf` the supplied limits are used; a
    /// missing limit yields NaN, which classification reports as an invalid
    /// objective.
    pub fn derivative(&self, x: f64) -> f64 {
        match &self.kind {
            TermKind::ScaledExp { weight } => -weight * (-x).exp(),
            TermKind::NegLogCapacity { gain } => -gain / (1.0 + gain * x),
            TermKind::InverseLinear { weight } => -weight / (x * x),
            TermKind::LogInvSnr { gain } => -1.0 / (gain * x * x + x),
            TermKind::Custom(c) => {
                if x == f64::NEG_INFINITY {
                    c.derivative_limit_lower.unwrap_or(f64::NAN)
                } else if x == f64::INFINITY {
                    c.derivative_limit_upper.unwrap_or(f64::NAN)
                } else {
                    (c.derivative)(x)
                }
            }
            TermKind::Mirrored(inner) => -inner.derivative(-x),
        }
    }

    /// `h(x) = -f'(x)`, the positive strictly decreasing map used throughout
    /// the solver. Infinite arguments produce the one-sided limit.
    pub fn h(&self, x: f64) -> f64 {
        -self.derivative(x)
    }

    /// Closed-form inverse of `h` when the kind provides one.
    pub fn h_inv(&self, varsigma: f64) -> Option<f64> {
        match &self.kind {
            TermKind::ScaledExp { weight } => Some(weight.ln() - varsigma.ln()),
            TermKind::NegLogCapacity { gain } => Some(1.0 / varsigma - 1.0 / gain),
            TermKind::InverseLinear { weight } => Some((weight / varsigma).sqrt()),
            // Algebraically (sqrt(1 + 4g/s) - 1) / (2g); written to avoid
            // cancellation when 4g/s is small. The limit at 0 is +inf.
            TermKind::LogInvSnr { gain } => {
                if varsigma == 0.0 {
                    Some(f64::INFINITY)
                } else {
                    Some(2.0 / (varsigma * ((1.0 + 4.0 * gain / varsigma).sqrt() + 1.0)))
                }
            }
            TermKind::Custom(c) => c.inverse_neg_derivative.as_ref().map(|f| f(varsigma)),
            TermKind::Mirrored(inner) => match inner.kind() {
                TermKind::Custom(c) => {
                    c.inverse_neg_derivative.as_ref().map(|f| -f(-varsigma))
                }
                _ => None,
            },
        }
    }
}

/// Direction of the prefix-sum constraints.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    /// `sum_{n<=j} x_n <= rho_j`.
    PrefixSumLe,
    /// `sum_{n<=j} x_n >= rho_j`; converted by [`flip_sense`] before solving.
    PrefixSumGe,
}

/// Outcome of [`check_feasibility`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Feasibility {
    Feasible,
    /// Smallest violating constraint index (1-based).
    Infeasible { constraint: usize },
}

/// A multiplier block of the outer iteration: all variables up to `k`
/// (1-based, inclusive) that are not covered by an earlier block share the
/// multiplier value `mu`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceBlock {
    pub mu: f64,
    pub k: usize,
}

/// Solver output in the indexing and sign convention of the original problem.
///
/// For `PrefixSumGe` inputs the reported multipliers are those of the
/// equivalent `PrefixSumLe` image; `x_star`, `nu_star` and `kappa_star` are
/// mapped back to the original orientation.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub x_star: Vec<f64>,
    pub sigma_star: Vec<f64>,
    pub nu_star: Vec<f64>,
    pub kappa_star: Vec<f64>,
    /// Multiplier blocks in outer-iteration order; the last block ends at N.
    /// Empty when the problem has no linear constraints.
    pub trace: Vec<TraceBlock>,
    /// Outer iterations actually performed by the multiplier sweep.
    pub iterations: usize,
}

/// Errors raised while building or transforming problems.
#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("problem needs at least one objective term")]
    Empty,
    #[error("terms/lower/upper lengths differ: {terms}/{lower}/{upper}")]
    MismatchedLengths { terms: usize, lower: usize, upper: usize },
    #[error("bounds of variable {index} are not an interval (need l < u, no NaN)")]
    InvalidBound { index: usize },
    #[error("box of variable {index} is not contained in the term's domain")]
    BoundOutsideDomain { index: usize },
    #[error("right-hand side of constraint {constraint} is not finite")]
    NonFiniteRho { constraint: usize },
    #[error("constraint index {constraint} outside 1..=N")]
    ConstraintOutOfRange { constraint: usize },
    #[error("variable {index} has an infinite upper bound but no constraint covers it")]
    UnboundedBox { index: usize },
    #[error("{what} must be positive")]
    NonPositiveParameter { what: &'static str },
    #[error("custom term domain is not a valid open interval")]
    InvalidDomain,
    #[error("derivative of term {index} is undefined on the negated domain")]
    DomainError { index: usize },
}

/// The full problem instance. Immutable after construction; safe to share
/// across threads.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    terms: Vec<ObjectiveTerm>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rho: BTreeMap<usize, f64>,
    sense: Sense,
}

impl Problem {
    /// Validates and builds a problem. `rho` maps 1-based constraint indices
    /// to right-hand sides; it may be any subset of `1..=N`. An empty
    /// constraint set requires every upper bound finite (lower bounds for
    /// `PrefixSumGe`), since the unconstrained optimum sits on the box.
    pub fn new(
        terms: Vec<ObjectiveTerm>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        rho: BTreeMap<usize, f64>,
        sense: Sense,
    ) -> Result<Self, ProblemError> {
        let n = terms.len();
        if n == 0 {
            return Err(ProblemError::Empty);
        }
        if lower.len() != n || upper.len() != n {
            return Err(ProblemError::MismatchedLengths {
                terms: n,
                lower: lower.len(),
                upper: upper.len(),
            });
        }
        for i in 0..n {
            let (l, u) = (lower[i], upper[i]);
            if l.is_nan() || u.is_nan() || !(l < u) || l == f64::INFINITY || u == f64::NEG_INFINITY
            {
                return Err(ProblemError::InvalidBound { index: i });
            }
            let (dl, du) = terms[i].domain();
            if l < dl || u > du {
                return Err(ProblemError::BoundOutsideDomain { index: i });
            }
        }
        for (&j, &r) in &rho {
            if j == 0 || j > n {
                return Err(ProblemError::ConstraintOutOfRange { constraint: j });
            }
            if !r.is_finite() {
                return Err(ProblemError::NonFiniteRho { constraint: j });
            }
        }
        if rho.is_empty() {
            let free_side = match sense {
                Sense::PrefixSumLe => &upper,
                Sense::PrefixSumGe => &lower,
            };
            if let Some(i) = free_side.iter().position(|b| !b.is_finite()) {
                return Err(ProblemError::UnboundedBox { index: i });
            }
        }
        Ok(Self { terms, lower, upper, rho, sense })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[ObjectiveTerm] {
        &self.terms
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Sparse constraint set: 1-based index -> right-hand side.
    pub fn rho(&self) -> &BTreeMap<usize, f64> {
        &self.rho
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    /// `sum_n f_n(x_n)`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.terms.iter().zip(x).map(|(t, &v)| t.value(v)).sum()
    }
}

/// Records the variable transform applied by [`flip_sense`] so solutions can
/// be mapped back (`x = -y`, box multipliers swapped).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VariableMap {
    negated: bool,
}

impl VariableMap {
    pub fn negated(&self) -> bool {
        self.negated
    }

    /// Maps a point of the transformed problem back to original coordinates.
    pub fn map_point(&self, y: &[f64]) -> Vec<f64> {
        if self.negated { y.iter().map(|v| -v).collect() } else { y.to_vec() }
    }

    /// Maps a solution of the transformed problem back: primal negated and
    /// the upper/lower box multipliers exchanged. The prefix multipliers and
    /// the trace carry over unchanged.
    pub fn map_solution(&self, s: Solution) -> Solution {
        if !self.negated {
            return s;
        }
        Solution {
            x_star: s.x_star.iter().map(|v| -v).collect(),
            sigma_star: s.sigma_star,
            nu_star: s.kappa_star,
            kappa_star: s.nu_star,
            trace: s.trace,
            iterations: s.iterations,
        }
    }
}

/// Existence test for the feasible set.
///
/// For `PrefixSumLe` the set is non-empty iff every prefix of lower bounds
/// stays at or below its right-hand side; any `-inf` in the prefix satisfies
/// the inequality outright. Equality is feasible. `PrefixSumGe` problems are
/// checked through their flipped image, i.e. prefix sums of upper bounds must
/// reach `rho_j`. Returns the smallest violating index otherwise.
pub fn check_feasibility(p: &Problem) -> Feasibility {
    let mut prefix = 0.0f64;
    let mut upto = 0usize;
    for (&j, &r) in p.rho() {
        match p.sense() {
            Sense::PrefixSumLe => {
                while upto < j {
                    prefix += p.lower()[upto];
                    upto += 1;
                }
                if prefix > r {
                    return Feasibility::Infeasible { constraint: j };
                }
            }
            Sense::PrefixSumGe => {
                while upto < j {
                    prefix += p.upper()[upto];
                    upto += 1;
                }
                if prefix < r {
                    return Feasibility::Infeasible { constraint: j };
                }
            }
        }
    }
    Feasibility::Feasible
}

/// Rewrites a problem in the opposite constraint sense by substituting
/// `y_n = -x_n`: terms become `f_n(-y)`, boxes `[-u_n, -l_n]`, right-hand
/// sides `-rho_j`. Applying the transform twice restores the original problem
/// bit for bit.
pub fn flip_sense(p: &Problem) -> Result<(Problem, VariableMap), ProblemError> {
    let terms: Vec<ObjectiveTerm> = p.terms().iter().map(|t| t.clone().mirrored()).collect();
    for (i, t) in terms.iter().enumerate() {
        let (dl, du) = t.domain();
        if dl.is_nan() || du.is_nan() || !(dl < du) {
            return Err(ProblemError::DomainError { index: i });
        }
    }
    let lower: Vec<f64> = p.upper().iter().map(|v| -v).collect();
    let upper: Vec<f64> = p.lower().iter().map(|v| -v).collect();
    let rho: BTreeMap<usize, f64> = p.rho().iter().map(|(&j, &r)| (j, -r)).collect();
    let sense = match p.sense() {
        Sense::PrefixSumLe => Sense::PrefixSumGe,
        Sense::PrefixSumGe => Sense::PrefixSumLe,
    };
    let flipped = Problem::new(terms, lower, upper, rho, sense)?;
    Ok((flipped, VariableMap { negated: true }))
}
