use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::bounds::n_min_formula;
use super::constants::spectral_constants;
use crate::error::{Error, Result};
use crate::estimator::{GramProblem, WienerEstimate};
use crate::linalg::{max_abs, spectral_norm, CMatrix, CVector};
use crate::model::LdsModel;
use crate::spectral::{expected_finite_psd, SpectralDesign};

/// Coefficients treated as structurally nonzero in an oracle filter.
const SUPPORT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaCondition {
    pub holds: bool,
    pub lhs: f64,
    pub lambda: f64,
}

/// `2 |cross - gram w|_inf`, the Gram form of `(2/n)|X^H (Y - X w)|_inf`.
pub fn lambda_condition_lhs(problem: &GramProblem, w: &CVector) -> f64 {
    2.0 * max_abs(&(&problem.cross - &problem.gram * w))
}

fn check_oracle(design: &SpectralDesign, oracle: &WienerEstimate) -> Result<()> {
    if oracle.node != design.node || oracle.p() != design.p() {
        return Err(Error::invalid(
            "oracle",
            format!(
                "filter for node {} with {} coefficients does not match design for node {} with {} columns",
                oracle.node,
                oracle.p(),
                design.node,
                design.p()
            ),
        ));
    }
    Ok(())
}

/// Whether `lambda >= (2/n)|X^H (Y - X W)|_inf` for the oracle filter `W`
/// expressed in the design's scale.
pub fn diagnose_lambda_condition(design: &SpectralDesign, oracle: &WienerEstimate, lambda: f64) -> Result<LambdaCondition> {
    check_oracle(design, oracle)?;
    let resid = &design.response - &design.design * &oracle.coefficients;
    let lhs = 2.0 * max_abs(&(design.design.adjoint() * resid)) / design.n() as f64;
    Ok(LambdaCondition {
        holds: lambda >= lhs,
        lhs,
        lambda,
    })
}

/// Support mask of an oracle filter.
pub fn oracle_support(w: &CVector) -> Vec<bool> {
    w.iter().map(|z| z.norm() > SUPPORT_TOL).collect()
}

/// `|v_{M^c}|_1 - 3 |v_M|_1`; nonpositive exactly when `v` is in the cone.
pub fn cone_violation(v: &CVector, support: &[bool]) -> f64 {
    let (mut on, mut off) = (0.0, 0.0);
    for (z, &s) in v.iter().zip(support) {
        if s {
            on += z.norm();
        } else {
            off += z.norm();
        }
    }
    off - 3.0 * on
}

fn rayleigh(gram: &CMatrix, v: &CVector) -> f64 {
    v.dotc(&(gram * v)).re / v.norm_squared()
}

/// Minimum of `v^H G v / |v|^2` over `trials` random cone vectors on the
/// boundary `|v_{M^c}|_1 = 3 |v_M|_1` and over every nonzero vector in
/// `extra`. Infinite when the support is empty and `extra` has no nonzero
/// vector, since the cone is then `{0}`.
pub fn restricted_eigenvalue_from_gram(
    gram: &CMatrix,
    support: &[bool],
    trials: usize,
    extra: &[&CVector],
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::invalid("trials", "need at least one trial"));
    }
    let p = gram.nrows();
    if support.len() != p {
        return Err(Error::invalid("support", "length differs from the Gram dimension"));
    }
    let mut kappa = f64::INFINITY;
    for v in extra {
        if v.norm_squared() > 0.0 {
            kappa = kappa.min(rayleigh(gram, v));
        }
    }
    if !support.iter().any(|&s| s) {
        return Ok(kappa);
    }
    let has_off = support.iter().any(|&s| !s);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    for _ in 0..trials {
        let mut v = CVector::from_fn(p, |_, _| Complex64::new(normal(), normal()));
        let on: f64 = v.iter().zip(support).filter(|(_, &s)| s).map(|(z, _)| z.norm()).sum();
        let off: f64 = v.iter().zip(support).filter(|(_, &s)| !s).map(|(z, _)| z.norm()).sum();
        if has_off && off > 0.0 {
            let scale = 3.0 * on / off;
            for (z, &s) in v.iter_mut().zip(support) {
                if !s {
                    *z *= scale;
                }
            }
        }
        kappa = kappa.min(rayleigh(gram, &v));
    }
    Ok(kappa)
}

/// Empirical restricted eigenvalue of the design over the cone of the
/// oracle's support, including the measured error `delta_hat` when given.
pub fn diagnose_restricted_eigenvalue(
    design: &SpectralDesign,
    oracle: &WienerEstimate,
    trials: usize,
    delta_hat: Option<&CVector>,
    seed: u64,
) -> Result<f64> {
    check_oracle(design, oracle)?;
    let problem = design.gram();
    let extra: Vec<&CVector> = delta_hat.into_iter().collect();
    restricted_eigenvalue_from_gram(&problem.gram, &oracle_support(&oracle.coefficients), trials, &extra, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBoundCheck {
    pub error_norm: f64,
    pub bound: f64,
    pub kappa_hat: f64,
    pub holds: bool,
}

/// Compares `|delta|_2` with `(3 / kappa_hat) lambda sqrt(d)`. `None` when
/// `kappa_hat` is not positive. `abs_tol` absorbs the solver's optimality
/// tolerance.
pub fn error_bound_check(delta: &CVector, kappa_hat: f64, lambda: f64, d: usize, abs_tol: f64) -> Option<ErrorBoundCheck> {
    if !(kappa_hat > 0.0) {
        return None;
    }
    let error_norm = delta.norm();
    let bound = 3.0 / kappa_hat * lambda * (d as f64).sqrt();
    Some(ErrorBoundCheck {
        error_norm,
        bound,
        kappa_hat,
        holds: error_norm <= bound + abs_tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdGap {
    /// `|Phi - Phi_hat|_2` of the normalized process.
    pub gap: f64,
    /// `2 C delta^{-1} / (N (1 - delta^{-1})^2)`.
    pub bound: f64,
    /// `1 / (2U)`, the target once `N` reaches the minimum length.
    pub half_inv_u: f64,
    pub n_min: f64,
    pub lemma_holds: bool,
}

/// Gap between the limit PSD and the finite-`N` expected PSD, both exact,
/// against its geometric bound.
pub fn diagnose_psd_gap(model: &LdsModel, frequency: f64, trajectory_len: usize) -> Result<PsdGap> {
    let sc = spectral_constants(model, frequency)?;
    let phi_n = crate::spectral::analytic_psd(model, frequency)?.rescaled(&sc.scales);
    let fin = expected_finite_psd(model, frequency, trajectory_len)?.rescaled(&sc.scales);
    let gap = spectral_norm(&(phi_n.matrix - fin.matrix));
    let big_n = trajectory_len as f64;
    let bound = 2.0 * sc.c * sc.delta_inv / (big_n * (1.0 - sc.delta_inv).powi(2));
    let half_inv_u = 0.5 / sc.u;
    let n_min = n_min_formula(sc.c, sc.delta_inv, sc.u);
    let tol = 1e-12 * sc.c.max(1.0);
    let lemma_holds = gap <= bound + tol && (big_n < n_min || gap <= half_inv_u + tol);
    Ok(PsdGap {
        gap,
        bound,
        half_inv_u,
        n_min,
        lemma_holds,
    })
}
