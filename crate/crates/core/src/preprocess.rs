//! Reduction of a feasible problem to an equivalent one whose surviving terms
//! are all strictly decreasing on their boxes.
//!
//! Three rewrites are applied:
//! - monotonically increasing terms are pinned to their lower bound;
//! - terms with an interior stationary point `z` get their upper bound
//!   tightened to `z` (the optimizer never exceeds it);
//! - if some constraint's right-hand side equals the prefix sum of lower
//!   bounds, every variable up to the largest such index is pinned and those
//!   constraints are dropped.
//!
//! Surviving right-hand sides are shifted by the pinned prefix sums, and the
//! [`ReducedProblem`] keeps enough bookkeeping to map an inner solution back
//! to the original indexing, including consistent multipliers.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::problem::{ObjectiveTerm, Problem, Sense, Solution, TermKind, TraceBlock};
use crate::verify;

/// Monotonicity class of a term on a box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TermClass {
    /// `f' > 0` throughout: the optimum pins to the lower bound.
    Increasing,
    /// `f'` crosses zero at the contained point.
    InteriorMin(f64),
    /// `f' < 0` throughout.
    Decreasing,
}

#[derive(Debug, Error, PartialEq)]
pub enum ReduceError {
    #[error("variable {index} has an increasing objective and no finite lower bound to pin to")]
    UnboundedPin { index: usize },
    #[error("term {index} violates the strict-convexity contract")]
    InvalidObjective { index: usize },
    #[error("variable {index} is not covered by any constraint and has an infinite upper bound")]
    Unbounded { index: usize },
}

const STATIONARY_MAX_ITER: usize = 200;

fn probe_offset(lo: f64, hi: f64) -> f64 {
    let span = if lo.is_finite() && hi.is_finite() { hi - lo } else { 1.0 };
    1e-8 * span.max(1.0)
}

/// Decides the monotonicity class of `term` on `(lo, hi)`.
///
/// Catalog kinds are classified analytically (they are always decreasing on
/// their domains, and their mirror images increasing). Custom terms are
/// classified from derivative signs just inside the endpoints; an interior
/// stationary point is located by bisection on `f'`.
pub fn classify_term(
    term: &ObjectiveTerm,
    lo: f64,
    hi: f64,
) -> Result<TermClass, ReduceError> {
    classify_indexed(term, lo, hi, usize::MAX)
}

fn classify_indexed(
    term: &ObjectiveTerm,
    lo: f64,
    hi: f64,
    index: usize,
) -> Result<TermClass, ReduceError> {
    match term.kind() {
        TermKind::ScaledExp { .. }
        | TermKind::NegLogCapacity { .. }
        | TermKind::InverseLinear { .. }
        | TermKind::LogInvSnr { .. } => Ok(TermClass::Decreasing),
        TermKind::Mirrored(inner) => Ok(match classify_indexed(inner, -hi, -lo, index)? {
            TermClass::Increasing => TermClass::Decreasing,
            TermClass::Decreasing => TermClass::Increasing,
            TermClass::InteriorMin(z) => TermClass::InteriorMin(-z),
        }),
        TermKind::Custom(_) => classify_custom(term, lo, hi, index),
    }
}

fn classify_custom(
    term: &ObjectiveTerm,
    lo: f64,
    hi: f64,
    index: usize,
) -> Result<TermClass, ReduceError> {
    let delta = probe_offset(lo, hi);
    let at_lo = if lo.is_finite() { lo + delta } else { f64::NEG_INFINITY };
    let at_hi = if hi.is_finite() { hi - delta } else { f64::INFINITY };
    let d_lo = term.derivative(at_lo);
    let d_hi = term.derivative(at_hi);
    if d_lo.is_nan() || d_hi.is_nan() {
        return Err(ReduceError::InvalidObjective { index });
    }
    if d_lo >= 0.0 && d_hi > 0.0 {
        return Ok(TermClass::Increasing);
    }
    if d_lo < 0.0 && d_hi <= 0.0 {
        return Ok(TermClass::Decreasing);
    }
    if d_lo < 0.0 && d_hi > 0.0 {
        let z = stationary_point(term, at_lo, at_hi, d_lo, index)?;
        return Ok(TermClass::InteriorMin(z));
    }
    // f' positive near the lower end and negative near the upper end cannot
    // happen for a strictly convex function.
    Err(ReduceError::InvalidObjective { index })
}

/// Root of `f'` inside `(a, b)` given `f'(a) < 0 < f'(b)`.
fn stationary_point(
    term: &ObjectiveTerm,
    a: f64,
    b: f64,
    d_at_a: f64,
    index: usize,
) -> Result<f64, ReduceError> {
    let mut neg = a;
    let mut pos = b;
    // Pull infinite probes back to a finite bracket.
    if !neg.is_finite() {
        let mut c = if pos.is_finite() { pos - 1.0 } else { -1.0 };
        let mut span = 1.0;
        while term.derivative(c) >= 0.0 {
            span *= 2.0;
            c -= span;
            if !c.is_finite() {
                return Err(ReduceError::InvalidObjective { index });
            }
        }
        neg = c;
    }
    if !pos.is_finite() {
        let mut c = neg + 1.0;
        let mut span = 1.0;
        while term.derivative(c) <= 0.0 {
            span *= 2.0;
            c += span;
            if !c.is_finite() {
                return Err(ReduceError::InvalidObjective { index });
            }
        }
        pos = c;
    }
    let scale = if d_at_a.is_finite() { d_at_a.abs() } else { 1.0 };
    let tol = 1e-12 * (1.0 + scale);
    let mut mid = 0.5 * (neg + pos);
    for _ in 0..STATIONARY_MAX_ITER {
        mid = 0.5 * (neg + pos);
        let d = term.derivative(mid);
        if d.is_nan() {
            return Err(ReduceError::InvalidObjective { index });
        }
        if d.abs() <= tol {
            return Ok(mid);
        }
        if d < 0.0 {
            neg = mid;
        } else {
            pos = mid;
        }
    }
    Ok(mid)
}

/// Equivalent problem over the surviving variables, all strictly decreasing
/// on their (possibly tightened) boxes, plus the bookkeeping needed to map
/// solutions back.
///
/// Variable indices in the maps are 0-based positions in the original
/// problem; constraint indices are the 1-based `j` of the prefix sums.
#[derive(Clone, Debug)]
pub struct ReducedProblem {
    /// Surviving subproblem in `PrefixSumLe` sense, or `None` when every
    /// variable was pinned.
    pub inner: Option<Problem>,
    /// Original variable index -> pinned value (its lower bound).
    pub pinned: BTreeMap<usize, f64>,
    /// Original variable index -> stationary point used as the new upper
    /// bound (surviving interior-minimum terms only).
    pub tightened_upper: BTreeMap<usize, f64>,
    /// Original constraint index -> pinned prefix mass subtracted from its
    /// right-hand side (surviving constraints only).
    pub rho_shift: BTreeMap<usize, f64>,
    /// Surviving original variable indices in order.
    pub index_map: Vec<usize>,
    /// Inner constraint index -> original constraint index. When several
    /// original constraints collapse onto one surviving prefix, the entry is
    /// the one with the smallest shifted right-hand side (largest index on
    /// ties); that constraint is the binding one.
    pub constraint_origin: BTreeMap<usize, usize>,
    /// Original constraint indices where the right-hand side equals the
    /// prefix of lower bounds, in increasing order. Everything up to the last
    /// cut is pinned.
    pub equality_cuts: Vec<usize>,
}

impl ReducedProblem {
    /// Number of variables of the original problem.
    pub fn original_len(&self) -> usize {
        self.pinned.len() + self.index_map.len()
    }

    /// Rebuilds a full-length primal point from an inner one.
    pub fn restore_point(&self, inner_x: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.original_len()];
        for (&i, &v) in &self.pinned {
            x[i] = v;
        }
        for (m, &orig) in self.index_map.iter().enumerate() {
            x[orig] = inner_x[m];
        }
        x
    }

    /// Lifts an inner solution to the original problem: pinned variables are
    /// re-inserted, multiplier blocks are mapped to original constraint
    /// indices, blocks for the pinned prefix are prepended so that every box
    /// multiplier stays complementary, and `nu`/`kappa` are rebuilt.
    pub fn restore_solution(&self, original: &Problem, inner: &Solution) -> Solution {
        let n = self.original_len();
        let x = self.restore_point(&inner.x_star);
        for (&i, &z) in &self.tightened_upper {
            debug_assert!(
                x[i] <= z + 1e-12 * (1.0 + z.abs()),
                "optimizer exceeded the stationary point of variable {i}"
            );
        }

        let mut blocks: Vec<TraceBlock> = Vec::new();
        for b in &inner.trace {
            let k = match self.constraint_origin.get(&b.k) {
                Some(&orig_j) => orig_j,
                // Synthetic block covering trailing unconstrained variables.
                None => n,
            };
            blocks.push(TraceBlock { mu: b.mu, k });
        }

        if !self.equality_cuts.is_empty() {
            let seed = blocks.first().map(|b| b.mu).unwrap_or(0.0);
            let mut prefix_blocks: Vec<TraceBlock> = Vec::new();
            let mut value = seed;
            let mut upper = self.equality_cuts.len();
            while upper > 0 {
                let cut = self.equality_cuts[upper - 1];
                let start = if upper > 1 { self.equality_cuts[upper - 2] } else { 0 };
                let mut need = f64::NEG_INFINITY;
                for (term, xv) in original.terms()[start..cut].iter().zip(&x[start..cut]) {
                    need = need.max(term.h(*xv));
                }
                value = value.max(need).max(0.0);
                prefix_blocks.push(TraceBlock { mu: value, k: cut });
                upper -= 1;
            }
            prefix_blocks.reverse();
            prefix_blocks.extend(blocks);
            blocks = prefix_blocks;
        }

        // Cover any tail of variables beyond the last constrained block.
        match blocks.last_mut() {
            Some(last) if last.k < n => {
                if last.mu == 0.0 {
                    last.k = n;
                } else {
                    blocks.push(TraceBlock { mu: 0.0, k: n });
                }
            }
            None if !self.index_map.is_empty() || !self.pinned.is_empty() => {
                // No constraints anywhere: sigma identically zero, empty trace.
            }
            _ => {}
        }

        // Adjacent blocks with the same multiplier collapse into one.
        let mut merged: Vec<TraceBlock> = Vec::new();
        for b in blocks {
            match merged.last_mut() {
                Some(prev) if prev.mu == b.mu => prev.k = b.k,
                _ => merged.push(b),
            }
        }

        let mut sigma = vec![0.0; n];
        let mut start = 0usize;
        for b in &merged {
            for s in sigma.iter_mut().take(b.k).skip(start) {
                *s = b.mu;
            }
            start = b.k;
        }

        let (nu, kappa) = verify::reconstruct_box_multipliers(original, &x, &sigma);
        Solution {
            x_star: x,
            sigma_star: sigma,
            nu_star: nu,
            kappa_star: kappa,
            trace: merged,
            iterations: inner.iterations,
        }
    }
}

/// Tolerance for detecting a right-hand side equal to its lower-bound prefix.
fn equality_eps(rho: f64) -> f64 {
    1e-9 * rho.abs().max(1.0)
}

/// Applies the pinning and tightening rewrites to a feasible `PrefixSumLe`
/// problem. Flip the sense first otherwise.
pub fn reduce(p: &Problem) -> Result<ReducedProblem, ReduceError> {
    debug_assert_eq!(p.sense(), Sense::PrefixSumLe, "reduce expects the Le normal form");
    let n = p.len();

    let mut classes = Vec::with_capacity(n);
    for (i, term) in p.terms().iter().enumerate() {
        classes.push(classify_indexed(term, p.lower()[i], p.upper()[i], i)?);
    }

    let mut pinned: BTreeMap<usize, f64> = BTreeMap::new();
    for (i, class) in classes.iter().enumerate() {
        if matches!(class, TermClass::Increasing) {
            if !p.lower()[i].is_finite() {
                return Err(ReduceError::UnboundedPin { index: i });
            }
            pinned.insert(i, p.lower()[i]);
        }
    }

    // Right-hand sides that exactly meet the lower-bound prefix pin the whole
    // prefix; the largest such index wins.
    let mut equality_cuts: Vec<usize> = Vec::new();
    {
        let mut prefix = 0.0f64;
        let mut upto = 0usize;
        for (&j, &r) in p.rho() {
            while upto < j {
                prefix += p.lower()[upto];
                upto += 1;
            }
            if prefix.is_finite() && (prefix - r).abs() <= equality_eps(r) {
                equality_cuts.push(j);
            }
        }
    }
    let j_max = equality_cuts.last().copied().unwrap_or(0);
    for i in 0..j_max {
        pinned.insert(i, p.lower()[i]);
    }

    let mut index_map = Vec::new();
    let mut tightened_upper = BTreeMap::new();
    let mut inner_terms = Vec::new();
    let mut inner_lower = Vec::new();
    let mut inner_upper = Vec::new();
    for (i, class) in classes.iter().enumerate() {
        if pinned.contains_key(&i) {
            continue;
        }
        let mut hi = p.upper()[i];
        if let TermClass::InteriorMin(z) = *class {
            tightened_upper.insert(i, z);
            hi = z;
        }
        index_map.push(i);
        inner_terms.push(p.terms()[i].clone());
        inner_lower.push(p.lower()[i]);
        inner_upper.push(hi);
    }

    // Shift surviving constraints by the pinned prefix mass and re-index them
    // over the surviving variables, keeping the tightest when several
    // collapse onto the same prefix.
    let mut rho_shift = BTreeMap::new();
    let mut inner_rho: BTreeMap<usize, f64> = BTreeMap::new();
    let mut constraint_origin: BTreeMap<usize, usize> = BTreeMap::new();
    {
        let mut pin_prefix = 0.0f64;
        let mut surv_prefix = 0usize;
        let mut upto = 0usize;
        for (&j, &r) in p.rho() {
            while upto < j {
                if pinned.contains_key(&upto) {
                    pin_prefix += p.lower()[upto];
                } else {
                    surv_prefix += 1;
                }
                upto += 1;
            }
            if j <= j_max {
                continue;
            }
            if surv_prefix == 0 {
                // Constraint covers pinned variables only; feasibility makes
                // it vacuous.
                continue;
            }
            let shifted = r - pin_prefix;
            rho_shift.insert(j, pin_prefix);
            match inner_rho.get(&surv_prefix) {
                Some(&existing) if existing < shifted => {}
                Some(&existing) if existing == shifted => {
                    constraint_origin.insert(surv_prefix, j);
                }
                _ => {
                    inner_rho.insert(surv_prefix, shifted);
                    constraint_origin.insert(surv_prefix, j);
                }
            }
        }
    }

    let inner = if index_map.is_empty() {
        None
    } else {
        // Variables past the last constraint have nothing pushing them off
        // their upper bound, so it must be finite for a minimum to exist.
        let last_constrained = inner_rho.keys().max().copied().unwrap_or(0);
        for m in last_constrained..index_map.len() {
            if !inner_upper[m].is_finite() {
                return Err(ReduceError::Unbounded { index: index_map[m] });
            }
        }
        let q = Problem::new(
            inner_terms,
            inner_lower,
            inner_upper,
            inner_rho,
            Sense::PrefixSumLe,
        )
        .map_err(|_| ReduceError::InvalidObjective { index: 0 })?;
        for (m, &orig) in index_map.iter().enumerate() {
            sample_h_positive(&q, m).map_err(|_| ReduceError::InvalidObjective { index: orig })?;
        }
        Some(q)
    };

    Ok(ReducedProblem {
        inner,
        pinned,
        tightened_upper,
        rho_shift,
        index_map,
        constraint_origin,
        equality_cuts,
    })
}

/// Samples `h` near the endpoints and at the midpoint of the (open) box of
/// inner variable `m`; every surviving term must have `h > 0` there. Catalog
/// kinds are positive and strictly decreasing on their domains analytically,
/// so only closure-backed terms are probed.
fn sample_h_positive(q: &Problem, m: usize) -> Result<(), ()> {
    let term = &q.terms()[m];
    if !matches!(term.kind(), TermKind::Custom(_) | TermKind::Mirrored(_)) {
        return Ok(());
    }
    let (lo, hi) = (q.lower()[m], q.upper()[m]);
    let delta = probe_offset(lo, hi);
    let near_lo = if lo.is_finite() { lo + delta } else { hi.min(0.0) - 1e6 };
    let near_hi = if hi.is_finite() { hi - delta } else { lo.max(0.0) + 1e6 };
    let mid = 0.5 * (near_lo + near_hi);
    // The value near the lower end is the supremum and must be genuinely
    // positive; further out h may underflow to zero, and next to a tightened
    // stationary bound it may round to a signed zero.
    if !(term.h(near_lo) > 0.0) || !(term.h(mid) >= 0.0) {
        return Err(());
    }
    if !(term.h(near_hi) > -1e-9 * (1.0 + term.h(mid).abs())) {
        return Err(());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{CustomTerm, ObjectiveTerm};
    use std::sync::Arc;

    fn custom(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
        domain: (f64, f64),
    ) -> ObjectiveTerm {
        ObjectiveTerm::custom(
            CustomTerm {
                value: Arc::new(value),
                derivative: Arc::new(derivative),
                inverse_neg_derivative: None,
                derivative_limit_lower: None,
                derivative_limit_upper: None,
            },
            domain,
        )
        .unwrap()
    }

    #[test]
    fn scaled_exp_is_decreasing() {
        let t = ObjectiveTerm::scaled_exp(2.0).unwrap();
        assert_eq!(classify_term(&t, f64::NEG_INFINITY, 0.4).unwrap(), TermClass::Decreasing);
    }

    #[test]
    fn parabola_has_interior_minimum() {
        let t = custom(|x| (x - 1.0) * (x - 1.0), |x| 2.0 * (x - 1.0), (f64::NEG_INFINITY, f64::INFINITY));
        match classify_term(&t, 0.0, 3.0).unwrap() {
            TermClass::InteriorMin(z) => {
                assert!((z - 1.0).abs() < 1e-6, "stationary point {z} should be 1")
            }
            other => panic!("expected interior minimum, got {other:?}"),
        }
    }

    #[test]
    fn exponential_is_increasing() {
        let t = custom(|x| x.exp(), |x| x.exp(), (f64::NEG_INFINITY, f64::INFINITY));
        assert_eq!(classify_term(&t, 0.0, 2.0).unwrap(), TermClass::Increasing);
    }

    #[test]
    fn concave_term_is_rejected() {
        let t = custom(
            |x| -(x - 1.0) * (x - 1.0),
            |x| -2.0 * (x - 1.0),
            (f64::NEG_INFINITY, f64::INFINITY),
        );
        assert_eq!(
            classify_term(&t, 0.0, 3.0),
            Err(ReduceError::InvalidObjective { index: usize::MAX })
        );
    }

    #[test]
    fn sample4_reduces_to_itself() {
        let p = crate::problem::tests::sample4();
        let rp = reduce(&p).unwrap();
        assert!(rp.pinned.is_empty());
        assert!(rp.tightened_upper.is_empty());
        assert_eq!(rp.index_map, vec![0, 1, 2, 3]);
        let inner = rp.inner.unwrap();
        assert_eq!(inner.rho(), p.rho());
        assert_eq!(inner.upper(), p.upper());
    }

    #[test]
    fn increasing_term_pins_to_lower_bound() {
        let terms = vec![
            custom(|x| x.exp(), |x| x.exp(), (f64::NEG_INFINITY, f64::INFINITY)),
            ObjectiveTerm::scaled_exp(1.0).unwrap(),
        ];
        let p = Problem::new(
            terms,
            vec![0.0, 0.0],
            vec![2.0, 2.0],
            [(2usize, 1.5)].into_iter().collect(),
            Sense::PrefixSumLe,
        )
        .unwrap();
        let rp = reduce(&p).unwrap();
        assert_eq!(rp.pinned.get(&0), Some(&0.0));
        assert_eq!(rp.index_map, vec![1]);
        // Pinned value is zero, so the shift is zero.
        assert_eq!(rp.rho_shift.get(&2), Some(&0.0));
        assert_eq!(rp.inner.unwrap().rho()[&1], 1.5);
    }

    #[test]
    fn unbounded_pin_is_an_error() {
        // e^x is increasing with f' -> 0 at -inf; the limit sign must be
        // supplied for the infinite bound.
        let term = ObjectiveTerm::custom(
            CustomTerm {
                value: Arc::new(|x: f64| x.exp()),
                derivative: Arc::new(|x: f64| x.exp()),
                inverse_neg_derivative: None,
                derivative_limit_lower: Some(0.0),
                derivative_limit_upper: Some(f64::INFINITY),
            },
            (f64::NEG_INFINITY, f64::INFINITY),
        )
        .unwrap();
        let p = Problem::new(
            vec![term],
            vec![f64::NEG_INFINITY],
            vec![1.0],
            [(1usize, 5.0)].into_iter().collect(),
            Sense::PrefixSumLe,
        )
        .unwrap();
        assert_eq!(reduce(&p).unwrap_err(), ReduceError::UnboundedPin { index: 0 });
    }

    #[test]
    fn equality_rhs_pins_the_prefix() {
        let terms = vec![
            ObjectiveTerm::scaled_exp(1.0).unwrap(),
            ObjectiveTerm::scaled_exp(1.0).unwrap(),
        ];
        let p = Problem::new(
            terms,
            vec![1.0, 1.0],
            vec![3.0, 3.0],
            [(1usize, 1.0), (2usize, 5.0)].into_iter().collect(),
            Sense::PrefixSumLe,
        )
        .unwrap();
        let rp = reduce(&p).unwrap();
        assert_eq!(rp.pinned.get(&0), Some(&1.0));
        assert_eq!(rp.equality_cuts, vec![1]);
        let inner = rp.inner.unwrap();
        assert_eq!(inner.len(), 1);
        assert_eq!(inner.rho()[&1], 4.0, "rho' = 5 - pinned 1");
    }

    #[test]
    fn stationary_bound_tightens_upper() {
        let terms = vec![custom(
            |x| (x - 1.0) * (x - 1.0),
            |x| 2.0 * (x - 1.0),
            (f64::NEG_INFINITY, f64::INFINITY),
        )];
        let p = Problem::new(
            terms,
            vec![0.0],
            vec![3.0],
            [(1usize, 10.0)].into_iter().collect(),
            Sense::PrefixSumLe,
        )
        .unwrap();
        let rp = reduce(&p).unwrap();
        let z = *rp.tightened_upper.get(&0).unwrap();
        assert!((z - 1.0).abs() < 1e-6);
        assert!((rp.inner.unwrap().upper()[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn reduce_is_idempotent_on_sample4() {
        let p = crate::problem::tests::sample4();
        let rp = reduce(&p).unwrap();
        let again = reduce(rp.inner.as_ref().unwrap()).unwrap();
        assert!(again.pinned.is_empty());
        assert!(again.rho_shift.values().all(|&s| s == 0.0));
    }
}
