//! Independent first-order optimality verification.
//!
//! Given a candidate solution, the checker evaluates the stationarity,
//! monotonicity, primal-feasibility and complementary-slackness residuals of
//! the constrained problem and reports them together with a pass verdict.
//! Nothing here reuses the solver's iteration machinery; only the terms'
//! derivative maps are shared.

use crate::problem::{Problem, Sense, Solution, flip_sense};

/// Residuals of the optimality system, all non-negative.
///
/// Constraint complementarity is only meaningful at constrained indices; at
/// unconstrained indices the multiplier profile must instead stay constant,
/// and that gap violation is folded into `comp_slack_constraints`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KktReport {
    /// `max_n | -h_n(x_n) + sigma_n + nu_n - kappa_n |`.
    pub stationarity_residual: f64,
    /// `max_n max(0, sigma_{n+1} - sigma_n)` with the sentinel
    /// `sigma_{N+1} = 0` (also catches a negative final multiplier).
    pub monotone_violation: f64,
    /// `max_{j in L} max(0, sum_{i<=j} x_i - rho_j)`.
    pub primal_violation: f64,
    /// At `n in L`: `|(sigma_n - sigma_{n+1}) * (sum_{i<=n} x_i - rho_n)|`;
    /// at `n not in L`: `|sigma_n - sigma_{n+1}|`.
    pub comp_slack_constraints: f64,
    /// `max_n` of `|nu_n (x_n - u_n)|` and `|kappa_n (x_n - l_n)|`; terms
    /// with an infinite bound contribute zero.
    pub comp_slack_boxes: f64,
    pub pass: bool,
}

/// Box multipliers consistent with a primal/prefix-multiplier pair:
/// `nu_n = max(h_n(x_n) - sigma_n, 0)` and `kappa_n = max(sigma_n - h_n(x_n), 0)`.
/// Multipliers of infinite bounds are forced to zero.
pub fn reconstruct_box_multipliers(
    p: &Problem,
    x: &[f64],
    sigma: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let n = p.len();
    let mut nu = vec![0.0; n];
    let mut kappa = vec![0.0; n];
    for i in 0..n {
        let h = p.terms()[i].h(x[i]);
        if p.upper()[i].is_finite() {
            nu[i] = (h - sigma[i]).max(0.0);
        }
        if p.lower()[i].is_finite() {
            kappa[i] = (sigma[i] - h).max(0.0);
        }
    }
    (nu, kappa)
}

/// Evaluates every optimality residual of `s` against `p`.
///
/// `PrefixSumGe` problems are verified through their flipped image, the form
/// the optimality system is written for. The function always returns a
/// report; unverifiable inputs simply fail it.
pub fn kkt_check(p: &Problem, s: &Solution, tol: f64) -> KktReport {
    if p.sense() == Sense::PrefixSumGe {
        let Ok((flipped, _)) = flip_sense(p) else {
            return failed_report();
        };
        let image = Solution {
            x_star: s.x_star.iter().map(|v| -v).collect(),
            sigma_star: s.sigma_star.clone(),
            nu_star: s.kappa_star.clone(),
            kappa_star: s.nu_star.clone(),
            trace: s.trace.clone(),
            iterations: s.iterations,
        };
        return kkt_check(&flipped, &image, tol);
    }

    let n = p.len();
    if s.x_star.len() != n
        || s.sigma_star.len() != n
        || s.nu_star.len() != n
        || s.kappa_star.len() != n
    {
        return failed_report();
    }

    let sigma_at = |i: usize| if i < n { s.sigma_star[i] } else { 0.0 };
    // NaN (e.g. inf - inf at a singular boundary) counts as an infinite
    // residual rather than vanishing inside f64::max.
    let worse = |acc: f64, r: f64| if r.is_nan() { f64::INFINITY } else { acc.max(r) };

    let mut stationarity = 0.0f64;
    let mut monotone = 0.0f64;
    let mut comp_boxes = 0.0f64;
    for i in 0..n {
        let h = p.terms()[i].h(s.x_star[i]);
        stationarity = worse(stationarity, (-h + s.sigma_star[i] + s.nu_star[i] - s.kappa_star[i]).abs());
        monotone = worse(monotone, (sigma_at(i + 1) - sigma_at(i)).max(0.0));
        if p.upper()[i].is_finite() {
            comp_boxes = worse(comp_boxes, (s.nu_star[i] * (s.x_star[i] - p.upper()[i])).abs());
        }
        if p.lower()[i].is_finite() {
            comp_boxes = worse(comp_boxes, (s.kappa_star[i] * (s.x_star[i] - p.lower()[i])).abs());
        }
    }

    let mut primal = 0.0f64;
    let mut comp_constraints = 0.0f64;
    let mut prefix = 0.0f64;
    for i in 0..n {
        prefix += s.x_star[i];
        let step = sigma_at(i) - sigma_at(i + 1);
        match p.rho().get(&(i + 1)) {
            Some(&rho) => {
                primal = worse(primal, (prefix - rho).max(0.0));
                comp_constraints = worse(comp_constraints, (step * (prefix - rho)).abs());
            }
            None => {
                // No constraint here, so the multiplier cannot step.
                comp_constraints = worse(comp_constraints, step.abs());
            }
        }
    }

    let sigma_scale = 1.0 + s.sigma_star.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let rho_scale = 1.0 + p.rho().values().fold(0.0f64, |a, &v| a.max(v.abs()));
    let box_scale = 1.0 + s.x_star.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let pass = stationarity <= tol * sigma_scale
        && monotone <= tol * sigma_scale
        && primal <= tol * rho_scale
        && comp_constraints <= tol * sigma_scale * rho_scale
        && comp_boxes <= tol * sigma_scale * box_scale;

    KktReport {
        stationarity_residual: stationarity,
        monotone_violation: monotone,
        primal_violation: primal,
        comp_slack_constraints: comp_constraints,
        comp_slack_boxes: comp_boxes,
        pass,
    }
}

fn failed_report() -> KktReport {
    KktReport {
        stationarity_residual: f64::INFINITY,
        monotone_violation: f64::INFINITY,
        primal_violation: f64::INFINITY,
        comp_slack_constraints: f64::INFINITY,
        comp_slack_boxes: f64::INFINITY,
        pass: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ObjectiveTerm;
    use crate::solver::{SolverOptions, solve};

    #[test]
    fn sample4_box_multipliers() {
        let p = crate::problem::tests::sample4();
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        let (nu, kappa) = reconstruct_box_multipliers(&p, &sol.x_star, &sol.sigma_star);
        // Variable 2 sits on its upper bound: nu_2 = h_2(-1.2) - sigma_2.
        let expect = 5.0 * 1.2f64.exp() - 4.451;
        assert!((nu[1] - expect).abs() < 1e-2, "nu_2 = {}, expected about {expect}", nu[1]);
        assert_eq!(kappa[1], 0.0);
        // Variable 1 is interior: both box multipliers vanish.
        assert!(nu[0].abs() < 1e-8 && kappa[0].abs() < 1e-8);
    }

    #[test]
    fn lower_bound_case_reconstructs_kappa() {
        let p = Problem::new(
            vec![ObjectiveTerm::neg_log_capacity(2.0).unwrap()],
            vec![0.0],
            vec![1.0],
            [(1usize, 0.5)].into_iter().collect(),
            Sense::PrefixSumLe,
        )
        .unwrap();
        let (nu, kappa) = reconstruct_box_multipliers(&p, &[0.0], &[5.0]);
        assert_eq!(nu[0], 0.0);
        assert!((kappa[0] - 3.0).abs() < 1e-12, "kappa = sigma - h(l) = 5 - 2");
    }

    #[test]
    fn sample4_solution_passes() {
        let p = crate::problem::tests::sample4();
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        let report = kkt_check(&p, &sol, 1e-6);
        assert!(report.pass, "{report:?}");
        assert!(report.stationarity_residual < 1e-9);
    }

    #[test]
    fn perturbed_primal_is_caught() {
        let p = crate::problem::tests::sample4();
        let mut sol = solve(&p, &SolverOptions::default()).unwrap();
        sol.x_star[0] += 0.1;
        let report = kkt_check(&p, &sol, 1e-6);
        assert!(report.primal_violation > 0.09, "{report:?}");
        assert!(!report.pass);
    }

    #[test]
    fn perturbed_multiplier_order_is_caught() {
        let p = crate::problem::tests::sample4();
        let mut sol = solve(&p, &SolverOptions::default()).unwrap();
        sol.sigma_star[2] = sol.sigma_star[1] + 1.0;
        let report = kkt_check(&p, &sol, 1e-6);
        assert!(report.monotone_violation > 0.5, "{report:?}");
        assert!(!report.pass);
    }
}
