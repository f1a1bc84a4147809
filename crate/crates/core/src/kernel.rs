//! Inner layer: per-term clipped inverse-derivative maps, their prefix sums,
//! and the multiplier root solve.
//!
//! For each term the map `eval` sends a candidate multiplier to the box
//! projection of `h^{-1}`; summing the maps over a window gives a
//! non-increasing curve whose intersection with the window's right-hand side
//! is the candidate multiplier of that window. Catalog windows of a single
//! family are solved exactly by walking the clip breakpoints; everything else
//! falls back to bracketed bisection.

use thiserror::Error;

use crate::problem::{ObjectiveTerm, TermKind};

const MAX_BISECT_ITER: usize = 400;
/// Residual this far above the root tolerance signals a term whose `h` is not
/// the strictly decreasing function it claims to be.
const MALFORMED_RESIDUAL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("no multiplier bracket for right-hand side {gamma}: prefix curve never crosses it")]
    BracketFailure { gamma: f64 },
}

/// One term's response to a multiplier: `h^{-1}` projected onto `[lo, hi]`.
///
/// The cached endpoint values `h(hi) <= h(lo)` delimit the strict branch; the
/// map is constant at `hi` below the first and constant at `lo` above the
/// second, hence non-increasing everywhere.
#[derive(Clone, Debug)]
pub struct ClippedInverse {
    term: ObjectiveTerm,
    lo: f64,
    hi: f64,
    h_at_hi: f64,
    h_at_lo: f64,
}

impl ClippedInverse {
    pub fn new(term: &ObjectiveTerm, lo: f64, hi: f64) -> Self {
        let h_at_hi = term.h(hi);
        let h_at_lo = term.h(lo);
        Self { term: term.clone(), lo, hi, h_at_hi, h_at_lo }
    }

    pub fn term(&self) -> &ObjectiveTerm {
        &self.term
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// `h` evaluated at the upper bound (limit for infinite bounds).
    pub fn h_at_hi(&self) -> f64 {
        self.h_at_hi
    }

    /// `h` evaluated at the lower bound (limit for infinite bounds).
    pub fn h_at_lo(&self) -> f64 {
        self.h_at_lo
    }

    /// The clipped inverse at `varsigma >= 0`.
    pub fn eval(&self, varsigma: f64) -> f64 {
        debug_assert!(varsigma >= 0.0);
        if varsigma < self.h_at_hi {
            return self.hi;
        }
        if varsigma >= self.h_at_lo {
            return self.lo;
        }
        let raw = match self.term.h_inv(varsigma) {
            Some(v) => v,
            None => self.invert_h(varsigma),
        };
        raw.clamp(self.lo, self.hi)
    }

    /// Monotone bisection inverse for terms without a closed form.
    fn invert_h(&self, varsigma: f64) -> f64 {
        // Finite seed inside the box.
        let mut a = if self.lo.is_finite() {
            self.lo
        } else {
            let mut c = if self.hi.is_finite() { self.hi - 1.0 } else { -1.0 };
            let mut span = 1.0;
            while self.term.h(c) < varsigma && span < 1e300 {
                span *= 2.0;
                c -= span;
            }
            c
        };
        let mut b = if self.hi.is_finite() {
            self.hi
        } else {
            let mut c = a + 1.0;
            let mut span = 1.0;
            while self.term.h(c) > varsigma && span < 1e300 {
                span *= 2.0;
                c += span;
            }
            c
        };
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if !(a < mid && mid < b) {
                break;
            }
            if self.term.h(mid) >= varsigma {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }
}

/// Sum of the clipped inverses over a window; non-increasing in `varsigma`.
pub fn prefix_sum(maps: &[ClippedInverse], varsigma: f64) -> f64 {
    maps.iter().map(|m| m.eval(varsigma)).sum()
}

/// Interval outside which the prefix curve is flat: below `lo` it sits at the
/// sum of upper bounds, at or above `hi` at the sum of lower bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn of(maps: &[ClippedInverse]) -> Self {
        let lo = maps.iter().map(|m| m.h_at_hi()).fold(f64::INFINITY, f64::min).max(0.0);
        let hi = maps.iter().map(|m| m.h_at_lo()).fold(0.0f64, f64::max);
        Self { lo, hi }
    }
}

/// Solves `prefix_sum(maps, varsigma) = gamma` for the largest non-negative
/// root.
///
/// Requires `gamma` strictly above the sum of lower bounds. When `gamma`
/// reaches the sum of upper bounds the multiplier is zero by convention.
/// Windows made of a single catalog family are solved in closed form by an
/// active-set walk over the clip breakpoints; otherwise bisection over the
/// bracket (expanded rightward when unbounded) finds the root. If the curve
/// plateaus exactly at `gamma` the right edge of the plateau is returned.
pub fn solve_prefix(
    maps: &[ClippedInverse],
    gamma: f64,
    eps_root: f64,
) -> Result<f64, KernelError> {
    assert!(!maps.is_empty(), "prefix window must be non-empty");
    let sum_lo: f64 = maps.iter().map(|m| m.lo()).sum();
    assert!(
        gamma > sum_lo,
        "right-hand side {gamma} not above the lower-bound sum {sum_lo}"
    );
    let sum_hi: f64 = maps.iter().map(|m| m.hi()).sum();
    if gamma >= sum_hi {
        return Ok(0.0);
    }
    if let Some(family) = Family::of(maps)
        && let Some(root) = family_walk(maps, family, gamma, eps_root)
    {
        return Ok(root);
    }
    bisect(maps, gamma, eps_root)
}

/// Catalog families whose unclipped prefix equation has a closed-form root.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Family {
    /// `w e^{-x}`: active sum `sum ln w - k ln s`.
    Exp,
    /// `-log(1+gx)`: active sum `k/s - sum 1/g`.
    Harmonic,
    /// `w/x`: active sum `sum sqrt(w) / sqrt(s)`.
    Sqrt,
}

impl Family {
    fn of(maps: &[ClippedInverse]) -> Option<Family> {
        let mut family = None;
        for m in maps {
            let f = match m.term().kind() {
                TermKind::ScaledExp { .. } => Family::Exp,
                TermKind::NegLogCapacity { .. } => Family::Harmonic,
                TermKind::InverseLinear { .. } => Family::Sqrt,
                _ => return None,
            };
            match family {
                None => family = Some(f),
                Some(existing) if existing == f => {}
                _ => return None,
            }
        }
        family
    }
}

fn family_param(m: &ClippedInverse) -> f64 {
    match m.term().kind() {
        TermKind::ScaledExp { weight } => *weight,
        TermKind::NegLogCapacity { gain } => *gain,
        TermKind::InverseLinear { weight } => *weight,
        _ => unreachable!("family windows only contain catalog kinds"),
    }
}

/// Running sums describing the currently active (strict-branch) terms.
#[derive(Default)]
struct ActiveSum {
    count: usize,
    acc: f64,
}

impl ActiveSum {
    fn add(&mut self, family: Family, param: f64) {
        self.count += 1;
        self.acc += match family {
            Family::Exp => param.ln(),
            Family::Harmonic => 1.0 / param,
            Family::Sqrt => param.sqrt(),
        };
    }

    fn remove(&mut self, family: Family, param: f64) {
        self.count -= 1;
        self.acc -= match family {
            Family::Exp => param.ln(),
            Family::Harmonic => 1.0 / param,
            Family::Sqrt => param.sqrt(),
        };
    }

    /// Root of the unclipped active sum equalling `target`, if any.
    fn solve(&self, family: Family, target: f64) -> Option<f64> {
        if self.count == 0 {
            return None;
        }
        let k = self.count as f64;
        match family {
            Family::Exp => Some(((self.acc - target) / k).exp()),
            Family::Harmonic => {
                let d = target + self.acc;
                if d > 0.0 { Some(k / d) } else { None }
            }
            Family::Sqrt => {
                if target > 0.0 {
                    let r = self.acc / target;
                    Some(r * r)
                } else {
                    None
                }
            }
        }
    }
}

/// Exact multi-level evaluation for single-family windows: walk the clip
/// breakpoints from the largest multiplier down, solving the unclipped
/// equation on each segment and accepting the first root that lands inside.
fn family_walk(
    maps: &[ClippedInverse],
    family: Family,
    gamma: f64,
    eps_root: f64,
) -> Option<f64> {
    #[derive(Clone, Copy)]
    enum Event {
        /// Crossing `h(lo)` downward: the term leaves its lower clip.
        Activate(usize),
        /// Crossing `h(hi)` downward: the term reaches its upper clip.
        Saturate(usize),
    }

    let mut events: Vec<(f64, Event)> = Vec::new();
    let mut active = ActiveSum::default();
    let mut clipped = 0.0f64;
    for (i, m) in maps.iter().enumerate() {
        let bot = m.h_at_lo();
        if bot.is_finite() {
            clipped += m.lo();
            events.push((bot, Event::Activate(i)));
        } else {
            active.add(family, family_param(m));
        }
        let top = m.h_at_hi();
        if top.is_finite() && top > 0.0 {
            events.push((top.max(0.0), Event::Saturate(i)));
        }
    }
    events.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    let mut seg_hi = f64::INFINITY;
    let mut idx = 0usize;
    loop {
        let seg_lo = if idx < events.len() { events[idx].0 } else { 0.0 };
        if seg_lo < seg_hi
            && let Some(root) =
                segment_root(&active, family, clipped, gamma, seg_lo, seg_hi, eps_root)
        {
            return Some(root);
        }
        if idx >= events.len() {
            return None;
        }
        // Apply every event at this breakpoint before moving on.
        let at = events[idx].0;
        while idx < events.len() && events[idx].0 == at {
            match events[idx].1 {
                Event::Activate(i) => {
                    clipped -= maps[i].lo();
                    active.add(family, family_param(&maps[i]));
                }
                Event::Saturate(i) => {
                    active.remove(family, family_param(&maps[i]));
                    clipped += maps[i].hi();
                }
            }
            idx += 1;
        }
        seg_hi = at;
    }
}

fn segment_root(
    active: &ActiveSum,
    family: Family,
    clipped: f64,
    gamma: f64,
    seg_lo: f64,
    seg_hi: f64,
    eps_root: f64,
) -> Option<f64> {
    if active.count == 0 {
        // Flat segment; a hit means the plateau sits exactly at gamma and the
        // right edge is the largest root.
        if seg_hi.is_finite() && (clipped - gamma).abs() <= eps_root * (1.0 + gamma.abs()) {
            return Some(seg_hi);
        }
        return None;
    }
    let candidate = active.solve(family, gamma - clipped)?;
    if !candidate.is_finite() {
        return None;
    }
    let slack = 1e-9 * (1.0 + candidate.abs());
    if candidate >= seg_lo - slack && candidate <= seg_hi + slack {
        return Some(candidate.max(0.0));
    }
    None
}

/// Bisection of the prefix curve; the invariant is `c(lo) >= gamma > c(hi)`.
fn bisect(maps: &[ClippedInverse], gamma: f64, eps_root: f64) -> Result<f64, KernelError> {
    let bracket = Bracket::of(maps);
    let mut lo = bracket.lo;
    if !(prefix_sum(maps, lo) >= gamma) {
        return Err(KernelError::BracketFailure { gamma });
    }
    let mut hi = if bracket.hi.is_finite() && bracket.hi > lo {
        bracket.hi
    } else {
        // Expand rightward until the curve drops below gamma.
        let mut h = lo.max(1.0);
        loop {
            h *= 2.0;
            if prefix_sum(maps, h) < gamma {
                break h;
            }
            if h > 1e308 {
                return Err(KernelError::BracketFailure { gamma });
            }
        }
    };
    if !(prefix_sum(maps, hi) < gamma) {
        return Err(KernelError::BracketFailure { gamma });
    }
    for _ in 0..MAX_BISECT_ITER {
        let mid = 0.5 * (lo + hi);
        if !(lo < mid && mid < hi) {
            break;
        }
        if prefix_sum(maps, mid) >= gamma {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    let residual = (prefix_sum(maps, lo) - gamma).abs();
    if residual > MALFORMED_RESIDUAL.max(eps_root) * (1.0 + gamma.abs()) {
        return Err(KernelError::BracketFailure { gamma });
    }
    Ok(lo)
}
