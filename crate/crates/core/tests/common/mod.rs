//! Seeded random instance generators shared by the integration suites.

#![allow(dead_code)] // each test binary uses its own slice of this module

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand::rngs::StdRng;
use waterladder::problem::{CustomTerm, ObjectiveTerm, Problem, Sense};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CatalogKind {
    ScaledExp,
    NegLogCapacity,
    InverseLinear,
    LogInvSnr,
}

pub const CATALOG: [CatalogKind; 4] = [
    CatalogKind::ScaledExp,
    CatalogKind::NegLogCapacity,
    CatalogKind::InverseLinear,
    CatalogKind::LogInvSnr,
];

fn log_uniform(rng: &mut StdRng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Random box for one term of `kind`; returns `(term, lower, upper, interior)`
/// where `interior` is a strictly feasible coordinate used to build
/// right-hand sides.
fn random_term(rng: &mut StdRng, kind: CatalogKind) -> (ObjectiveTerm, f64, f64, f64) {
    let param = log_uniform(rng, 0.1, 10.0);
    match kind {
        CatalogKind::ScaledExp => {
            let term = ObjectiveTerm::scaled_exp(param).unwrap();
            let lower =
                if rng.random_bool(0.5) { f64::NEG_INFINITY } else { rng.random_range(-3.0..0.0) };
            let base = if lower.is_finite() { lower } else { -2.0 };
            let upper = if rng.random_bool(0.3) {
                f64::INFINITY
            } else {
                base + rng.random_range(0.5..4.0)
            };
            let hi = if upper.is_finite() { upper } else { base + 3.0 };
            let lo = if lower.is_finite() { lower } else { hi - 3.0 };
            let interior = rng.random_range(lo + 0.05 * (hi - lo)..hi - 0.05 * (hi - lo));
            (term, lower, upper, interior)
        }
        CatalogKind::NegLogCapacity => {
            let term = ObjectiveTerm::neg_log_capacity(param).unwrap();
            let lower = if rng.random_bool(0.7) { 0.0 } else { rng.random_range(0.0..0.5) };
            let upper = if rng.random_bool(0.5) {
                f64::INFINITY
            } else {
                lower + rng.random_range(0.5..3.0)
            };
            let hi = if upper.is_finite() { upper } else { lower + 2.5 };
            let interior = rng.random_range(lower + 0.05 * (hi - lower)..hi - 0.05 * (hi - lower));
            (term, lower, upper, interior)
        }
        CatalogKind::InverseLinear | CatalogKind::LogInvSnr => {
            let term = match kind {
                CatalogKind::InverseLinear => ObjectiveTerm::inverse_linear(param).unwrap(),
                _ => ObjectiveTerm::log_inv_snr(param).unwrap(),
            };
            let lower = 0.0;
            let upper =
                if rng.random_bool(0.3) { f64::INFINITY } else { rng.random_range(0.6..3.0) };
            let hi = if upper.is_finite() { upper } else { 2.5 };
            let interior = rng.random_range(0.1 * hi..0.95 * hi);
            (term, lower, upper, interior)
        }
    }
}

/// Feasible instance of a single catalog kind with `n` terms, mixed finite
/// and infinite bounds and a random constraint subset always containing N.
pub fn random_catalog_problem(rng: &mut StdRng, kind: CatalogKind, n: usize) -> Problem {
    catalog_problem(rng, kind, n, false)
}

/// Same, with every prefix constrained.
pub fn random_catalog_problem_full_l(rng: &mut StdRng, kind: CatalogKind, n: usize) -> Problem {
    catalog_problem(rng, kind, n, true)
}

fn catalog_problem(rng: &mut StdRng, kind: CatalogKind, n: usize, full_l: bool) -> Problem {
    let mut terms = Vec::with_capacity(n);
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut interior = Vec::with_capacity(n);
    for _ in 0..n {
        let (t, lo, hi, x) = random_term(rng, kind);
        terms.push(t);
        lower.push(lo);
        upper.push(hi);
        interior.push(x);
    }
    let rho = random_rho(rng, &interior, n, full_l);
    Problem::new(terms, lower, upper, rho, Sense::PrefixSumLe).expect("generated instance valid")
}

/// Right-hand sides anchored at the interior point's prefix sums; some tight,
/// some slack, always containing the full-length constraint.
fn random_rho(rng: &mut StdRng, interior: &[f64], n: usize, full_l: bool) -> BTreeMap<usize, f64> {
    let mut rho = BTreeMap::new();
    let mut prefix = 0.0;
    for (i, x) in interior.iter().enumerate() {
        prefix += x;
        let j = i + 1;
        if full_l || j == n || rng.random_bool(0.35) {
            let slack = if rng.random_bool(0.25) { 0.0 } else { rng.random_range(0.05..1.5) };
            rho.insert(j, prefix + slack);
        }
    }
    rho
}

fn quadratic(rng: &mut StdRng, center: f64) -> ObjectiveTerm {
    let curvature = rng.random_range(0.3..3.0);
    ObjectiveTerm::custom(
        CustomTerm {
            value: Arc::new(move |x: f64| curvature * (x - center) * (x - center)),
            derivative: Arc::new(move |x: f64| 2.0 * curvature * (x - center)),
            inverse_neg_derivative: Some(Arc::new(move |s: f64| center - s / (2.0 * curvature))),
            derivative_limit_lower: None,
            derivative_limit_upper: None,
        },
        (f64::NEG_INFINITY, f64::INFINITY),
    )
    .unwrap()
}

fn shifted_exp(rng: &mut StdRng, rising: bool) -> ObjectiveTerm {
    let rate = rng.random_range(0.4..2.0);
    let shift = rng.random_range(-1.0..1.0);
    let sign = if rising { 1.0 } else { -1.0 };
    ObjectiveTerm::custom(
        CustomTerm {
            value: Arc::new(move |x: f64| (sign * rate * (x - shift)).exp()),
            derivative: Arc::new(move |x: f64| sign * rate * (sign * rate * (x - shift)).exp()),
            inverse_neg_derivative: None,
            derivative_limit_lower: None,
            derivative_limit_upper: None,
        },
        (f64::NEG_INFINITY, f64::INFINITY),
    )
    .unwrap()
}

/// Instance mixing all four catalog kinds in one problem, so prefix windows
/// have no common closed family and take the bisection route.
pub fn random_mixed_catalog_problem(rng: &mut StdRng, n: usize) -> Problem {
    let mut terms = Vec::with_capacity(n);
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut interior = Vec::with_capacity(n);
    for _ in 0..n {
        let kind = CATALOG[rng.random_range(0..CATALOG.len())];
        let (t, lo, hi, x) = random_term(rng, kind);
        terms.push(t);
        lower.push(lo);
        upper.push(hi);
        interior.push(x);
    }
    let rho = random_rho(rng, &interior, n, false);
    Problem::new(terms, lower, upper, rho, Sense::PrefixSumLe).expect("generated instance valid")
}

/// Instance mixing increasing, interior-minimum and decreasing custom terms
/// (plus catalog exponentials) on finite boxes. Exercises the pinning and
/// tightening paths against the grid oracle.
pub fn random_mixed_class_problem(rng: &mut StdRng, n: usize) -> Problem {
    let mut terms = Vec::with_capacity(n);
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut interior = Vec::with_capacity(n);
    for _ in 0..n {
        let lo = rng.random_range(-2.0..0.0);
        let hi = lo + rng.random_range(1.0..3.0);
        let term = match rng.random_range(0..4) {
            // Interior minimum somewhere inside the box.
            0 => {
                let center = rng.random_range(lo + 0.2..hi - 0.2);
                quadratic(rng, center)
            }
            // Center at or below the lower bound: increasing on the box.
            1 => {
                let center = lo - rng.random_range(0.0..1.0);
                quadratic(rng, center)
            }
            2 => shifted_exp(rng, true),
            _ => {
                if rng.random_bool(0.5) {
                    shifted_exp(rng, false)
                } else {
                    ObjectiveTerm::scaled_exp(log_uniform(rng, 0.2, 5.0)).unwrap()
                }
            }
        };
        terms.push(term);
        lower.push(lo);
        upper.push(hi);
        interior.push(rng.random_range(lo + 0.05 * (hi - lo)..hi - 0.05 * (hi - lo)));
    }
    let rho = random_rho(rng, &interior, n, false);
    Problem::new(terms, lower, upper, rho, Sense::PrefixSumLe).expect("generated instance valid")
}

/// Feasible `PrefixSumGe` instance over increasing objectives on finite
/// boxes, the natural shape of demand-covering problems.
pub fn random_ge_problem(rng: &mut StdRng, n: usize) -> Problem {
    let mut terms = Vec::with_capacity(n);
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut interior = Vec::with_capacity(n);
    for _ in 0..n {
        let lo = rng.random_range(-1.0..0.5);
        let hi = lo + rng.random_range(1.0..3.0);
        let term = if rng.random_bool(0.5) {
            let center = lo - rng.random_range(0.1..1.0);
            quadratic(rng, center)
        } else {
            shifted_exp(rng, true)
        };
        terms.push(term);
        lower.push(lo);
        upper.push(hi);
        interior.push(rng.random_range(lo + 0.05 * (hi - lo)..hi - 0.05 * (hi - lo)));
    }
    let mut rho = BTreeMap::new();
    let mut prefix = 0.0;
    for (i, x) in interior.iter().enumerate() {
        prefix += x;
        let j = i + 1;
        if j == n || rng.random_bool(0.35) {
            let slack = if rng.random_bool(0.25) { 0.0 } else { rng.random_range(0.05..1.0) };
            rho.insert(j, prefix - slack);
        }
    }
    Problem::new(terms, lower, upper, rho, Sense::PrefixSumGe).expect("generated instance valid")
}

/// Stand-alone classical water-filler: bisection on the water level `w` in
/// `sum_n max(w - 1/g_n, 0) = total`. Deliberately independent of the solver
/// stack so cross-checks mean something.
pub fn classic_waterfill(gains: &[f64], total: f64) -> Vec<f64> {
    let poured = |level: f64| -> f64 {
        gains.iter().map(|&g| (level - 1.0 / g).max(0.0)).sum::<f64>()
    };
    let mut lo = 0.0f64;
    let mut hi = gains.iter().map(|&g| 1.0 / g).fold(0.0f64, f64::max) + total;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if poured(mid) < total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let level = 0.5 * (lo + hi);
    gains.iter().map(|&g| (level - 1.0 / g).max(0.0)).collect()
}
