//! Constructors for the power-allocation problem families.
//!
//! Each function maps application parameters (channel gains, per-channel
//! caps, power budgets) onto a [`Problem`] instance; the generic solver then
//! reproduces the family's closed-form allocation:
//!
//! - [`capacity_waterfilling`]: capacity maximization under a total power
//!   budget; water-filling with per-channel ceilings (cave-filling).
//! - [`inverse_mse_allocation`]: inverse-linear cost under fully nested
//!   budgets, the multi-level water-filling of linear MIMO transceivers.
//! - [`exp_power_min`]: exponential cost with non-positive variables, as in
//!   power minimization for non-linear transceiver architectures.
//! - [`af_multihop_snr`]: end-to-end SNR maximization across relay hops under
//!   a short-term power constraint.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::problem::{ObjectiveTerm, Problem, Sense};

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("gain {index} must be positive")]
    NonPositiveGain { index: usize },
    #[error("total power must be positive")]
    NonPositivePower,
    #[error("right-hand side {constraint} must be positive")]
    NonPositiveRhs { constraint: usize },
    #[error("cap {index} must be positive")]
    NonPositiveCap { index: usize },
    #[error("gains and caps/rhs lists must have equal length")]
    LengthMismatch,
}

fn check_gains(gains: &[f64]) -> Result<(), ScenarioError> {
    match gains.iter().position(|g| !(*g > 0.0)) {
        Some(index) => Err(ScenarioError::NonPositiveGain { index }),
        None => Ok(()),
    }
}

/// Power allocation over non-interfering channels maximizing total capacity:
/// minimize `-sum log(1 + g_n x_n)` subject to `sum x_n <= total_power` and
/// `0 <= x_n <= cap_n`. Caps may be infinite; with every cap infinite the
/// optimum is the classical water-filling allocation, otherwise water fills
/// against the ceilings. When the caps sum to at most the budget the solver
/// simply returns the caps.
pub fn capacity_waterfilling(
    gains: &[f64],
    caps: &[f64],
    total_power: f64,
) -> Result<Problem, ScenarioError> {
    check_gains(gains)?;
    if gains.len() != caps.len() {
        return Err(ScenarioError::LengthMismatch);
    }
    if let Some(index) = caps.iter().position(|c| !(*c > 0.0)) {
        return Err(ScenarioError::NonPositiveCap { index });
    }
    if !(total_power > 0.0) {
        return Err(ScenarioError::NonPositivePower);
    }
    let n = gains.len();
    let terms = gains
        .iter()
        .map(|&g| ObjectiveTerm::neg_log_capacity(g).expect("validated gain"))
        .collect();
    let rho: BTreeMap<usize, f64> = [(n, total_power)].into_iter().collect();
    Ok(Problem::new(terms, vec![0.0; n], caps.to_vec(), rho, Sense::PrefixSumLe)
        .expect("scenario construction is structurally valid"))
}

/// Inverse-MSE style allocation: minimize `sum w_n / x_n` subject to the full
/// nested family `sum_{i<=j} x_i <= rho_j` and `0 <= x_n <= 1`. Right-hand
/// sides must be strictly positive since the objective lives on `x > 0`.
pub fn inverse_mse_allocation(weights: &[f64], rho: &[f64]) -> Result<Problem, ScenarioError> {
    check_gains(weights)?;
    if weights.len() != rho.len() {
        return Err(ScenarioError::LengthMismatch);
    }
    if let Some(j) = rho.iter().position(|r| !(*r > 0.0)) {
        return Err(ScenarioError::NonPositiveRhs { constraint: j + 1 });
    }
    let n = weights.len();
    let terms = weights
        .iter()
        .map(|&w| ObjectiveTerm::inverse_linear(w).expect("validated weight"))
        .collect();
    let rho_map: BTreeMap<usize, f64> = rho.iter().enumerate().map(|(i, &r)| (i + 1, r)).collect();
    Ok(Problem::new(terms, vec![0.0; n], vec![1.0; n], rho_map, Sense::PrefixSumLe)
        .expect("scenario construction is structurally valid"))
}

/// Exponential power minimization: minimize `sum g_n e^{-x_n}` subject to the
/// full nested family and `x_n <= 0`. The upper bound comes from the
/// constraint set; lower bounds are free.
pub fn exp_power_min(gains: &[f64], rho: &[f64]) -> Result<Problem, ScenarioError> {
    check_gains(gains)?;
    if gains.len() != rho.len() {
        return Err(ScenarioError::LengthMismatch);
    }
    let n = gains.len();
    let terms =
        gains.iter().map(|&g| ObjectiveTerm::scaled_exp(g).expect("validated gain")).collect();
    let rho_map: BTreeMap<usize, f64> = rho.iter().enumerate().map(|(i, &r)| (i + 1, r)).collect();
    Ok(Problem::new(
        terms,
        vec![f64::NEG_INFINITY; n],
        vec![0.0; n],
        rho_map,
        Sense::PrefixSumLe,
    )
    .expect("scenario construction is structurally valid"))
}

/// Power allocation across amplify-and-forward hops maximizing the end-to-end
/// SNR: minimize `sum log(1 + 1/(g_n x_n))` subject to `sum x_n <=
/// total_power` and `0 <= x_n <= cap_n`. With the caps summing to at most the
/// budget the allocation is just the caps.
pub fn af_multihop_snr(
    gains: &[f64],
    caps: &[f64],
    total_power: f64,
) -> Result<Problem, ScenarioError> {
    check_gains(gains)?;
    if gains.len() != caps.len() {
        return Err(ScenarioError::LengthMismatch);
    }
    if let Some(index) = caps.iter().position(|c| !(*c > 0.0)) {
        return Err(ScenarioError::NonPositiveCap { index });
    }
    if !(total_power > 0.0) {
        return Err(ScenarioError::NonPositivePower);
    }
    let n = gains.len();
    let terms =
        gains.iter().map(|&g| ObjectiveTerm::log_inv_snr(g).expect("validated gain")).collect();
    let rho: BTreeMap<usize, f64> = [(n, total_power)].into_iter().collect();
    Ok(Problem::new(terms, vec![0.0; n], caps.to_vec(), rho, Sense::PrefixSumLe)
        .expect("scenario construction is structurally valid"))
}
