use serde::{Deserialize, Serialize};

use super::ModelConstants;
use crate::error::{Error, Result};
use crate::sim::Regime;

/// The unspecified universal constants `c, c'` of the first i.i.d. sample
/// size term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniversalConstants {
    pub c: f64,
    pub c_prime: f64,
}

impl Default for UniversalConstants {
    fn default() -> Self {
        Self { c: 1.0, c_prime: 1.0 }
    }
}

/// `4 C U delta^{-1} / (1 - delta^{-1})^2`.
pub fn n_min_formula(c: f64, delta_inv: f64, u: f64) -> f64 {
    4.0 * c * u * delta_inv / (1.0 - delta_inv).powi(2)
}

fn ceil_count(x: f64) -> u64 {
    // `as` saturates at u64::MAX for huge or infinite values.
    (x.ceil() as u64).max(1)
}

/// Minimum trajectory length, at least 1.
pub fn bound_n_min(k: &ModelConstants) -> u64 {
    ceil_count(n_min_formula(k.c, k.delta_inv, k.u))
}

/// `3` for independent trajectories, `3 + 24 sqrt(3) U C / (delta - 1)` for
/// consecutive windows.
pub fn regime_multiplier(k: &ModelConstants, regime: Regime) -> f64 {
    match regime {
        Regime::RestartRecord => 3.0,
        Regime::Consecutive if k.delta_inv == 0.0 => 3.0,
        Regime::Consecutive => 3.0 + 24.0 * 3f64.sqrt() * k.u * k.c / k.delta_minus_one(),
    }
}

/// Lower end of the admissible regularization range for `n` trajectories.
pub fn lambda_lo(k: &ModelConstants, p: usize, epsilon: f64, regime: Regime, n: f64) -> f64 {
    let p = p as f64;
    4.0 * (regime_multiplier(k, regime) * (8.0 * p * p / epsilon).ln() / (n * k.l)).sqrt()
}

/// Upper end `m / (1536 U sqrt(d))`.
pub fn lambda_hi(k: &ModelConstants) -> f64 {
    k.m / (1536.0 * k.u * (k.d as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryBounds {
    pub regime: Regime,
    pub epsilon: f64,
    pub p: usize,
    /// `lambda_lo` evaluated at `n_min`.
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub n_min: u64,
    pub n_min_terms: [f64; 3],
    /// Index into `n_min_terms` of the term that depends on `c, c'`.
    pub constant_dependent_term: Option<usize>,
    pub big_n_min: u64,
    pub big_n_min_raw: f64,
    pub kappa: f64,
    /// Per-node failure budget and its two halves.
    pub epsilon_splits: [f64; 3],
    pub universal_constants: UniversalConstants,
    pub multiplier: f64,
    pub feasible: bool,
}

/// Sufficient conditions on `lambda`, `n` and `N` for exact recovery with
/// probability `1 - epsilon`. `p` is the number of nodes minus one.
pub fn bound_lambda_and_n(
    k: &ModelConstants,
    p: usize,
    epsilon: f64,
    regime: Regime,
    universal: UniversalConstants,
) -> Result<TheoryBounds> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::invalid("epsilon", format!("{epsilon} is outside (0, 0.5)")));
    }
    if p < 2 {
        return Err(Error::invalid("p", "need at least three nodes"));
    }
    let pf = p as f64;
    if regime == Regime::Consecutive && pf * epsilon <= 8.0 {
        return Err(Error::Constraint(format!(
            "consecutive windows need epsilon > 8/p = {:.6}, got {epsilon}",
            8.0 / pf
        )));
    }
    let (l, u, d) = (k.l, k.u, k.d as f64);
    let multiplier = regime_multiplier(k, regime);
    let log_union = (8.0 * pf * pf / epsilon).ln();
    let inv_m2 = if k.m.is_finite() { 1.0 / (k.m * k.m) } else { 0.0 };
    let third = multiplier * 6144f64.powi(2) * (u * u / l) * d * log_union * inv_m2;
    let (n_min_terms, constant_dependent_term) = match regime {
        Regime::RestartRecord => (
            [
                (4.0 * universal.c_prime * pf / epsilon).ln() / universal.c,
                3456f64.powi(2) * (u / l + 0.5) * (2.0 * pf).ln() * d,
                third,
            ],
            Some(0),
        ),
        Regime::Consecutive => {
            let mixing = if k.delta_inv == 0.0 { 0.0 } else { 4.0 * 8f64.sqrt() * k.c * u / k.delta_minus_one() };
            (
                [
                    33f64.powi(2) * pf.ln() * (u / l + 0.5 + mixing).powi(2),
                    2.0 * (8.0 * pf * pf / (pf * epsilon - 8.0)).ln(),
                    third,
                ],
                None,
            )
        }
    };
    let n_min = ceil_count(n_min_terms.iter().copied().fold(0.0, f64::max));
    let lambda_lo = lambda_lo(k, p, epsilon, regime, n_min as f64);
    let lambda_hi = lambda_hi(k);
    let eps1 = epsilon / pf;
    Ok(TheoryBounds {
        regime,
        epsilon,
        p,
        lambda_lo,
        lambda_hi,
        n_min,
        n_min_terms,
        constant_dependent_term,
        big_n_min: bound_n_min(k),
        big_n_min_raw: n_min_formula(k.c, k.delta_inv, k.u),
        kappa: 1.0 / (256.0 * u),
        epsilon_splits: [eps1, eps1 / 2.0, eps1 / 2.0],
        universal_constants: universal,
        multiplier,
        feasible: lambda_lo <= lambda_hi * (1.0 + 1e-12),
    })
}

/// Externally quoted trajectory lengths for two constant sets, kept so that
/// reports show the formula value next to the quoted one.
pub const REFERENCE_CASES: [(f64, f64, f64, f64); 2] = [(2.8, 0.7, 1.3, 115.0), (6.8, 0.89, 1.55, 2900.0)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCheck {
    pub c: f64,
    pub delta_inv: f64,
    pub u: f64,
    pub quoted: f64,
    pub formula: f64,
    pub n_min: u64,
    pub relative_gap: f64,
    /// Set when the formula and the quoted value differ by more than 5%.
    pub flagged: bool,
}

pub fn reference_checks() -> Vec<ReferenceCheck> {
    REFERENCE_CASES
        .iter()
        .map(|&(c, delta_inv, u, quoted)| {
            let formula = n_min_formula(c, delta_inv, u);
            let relative_gap = (formula - quoted).abs() / quoted;
            ReferenceCheck {
                c,
                delta_inv,
                u,
                quoted,
                formula,
                n_min: ceil_count(formula),
                relative_gap,
                flagged: relative_gap > 0.05,
            }
        })
        .collect()
}

/// Constants and bounds for one model, regime and `epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub model_hash: String,
    pub regime: Regime,
    pub epsilon: f64,
    pub constants: ModelConstants,
    /// `None` when the regime constraint on `epsilon` fails; see `error`.
    pub bounds: Option<TheoryBounds>,
    pub error: Option<String>,
    pub reference: Vec<ReferenceCheck>,
}

impl TheoryReport {
    pub fn new(model_hash: String, regime: Regime, epsilon: f64, constants: ModelConstants, p: usize, universal: UniversalConstants) -> Self {
        let (bounds, error) = match bound_lambda_and_n(&constants, p, epsilon, regime, universal) {
            Ok(b) => (Some(b), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Self {
            model_hash,
            regime,
            epsilon,
            constants,
            bounds,
            error,
            reference: reference_checks(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
