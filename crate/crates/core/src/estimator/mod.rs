//! Wiener-filter estimators for one node's spectral regression, and the
//! thresholding decoder that turns per-node estimates into edge sets.

mod baselines;
mod solver;
mod threshold;
mod wiener;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};

pub use baselines::{cig_baseline, unregularized_from_gram, unregularized_wiener};
pub use solver::{lambda_grid, solve_gram, solve_gram_from, solve_regularized_wiener};
pub use threshold::{largest_gap_threshold, threshold_topology, PairScore, RecoveryResult};
pub use wiener::{exact_wiener, exact_wiener_regression, wiener_from_inverse};

/// Sufficient statistics of the normalized regression for one node:
/// `gram = (1/n) X^H X`, `cross = (1/n) X^H Y`, `response_energy = (1/n)|Y|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramProblem {
    pub gram: CMatrix,
    pub cross: CVector,
    pub response_energy: f64,
    pub n: usize,
}

impl GramProblem {
    pub fn p(&self) -> usize {
        self.cross.len()
    }

    /// Smooth part `(1/2n)|Y - X beta|^2`.
    pub fn loss(&self, beta: &CVector) -> f64 {
        let quad = beta.dotc(&(&self.gram * beta)).re;
        let lin = self.cross.dotc(beta).re;
        0.5 * quad - lin + 0.5 * self.response_energy
    }

    pub fn objective(&self, beta: &CVector, lambda: f64) -> f64 {
        self.loss(beta) + lambda * crate::linalg::l1_norm(beta)
    }

    /// `(1/n) X^H (X beta - Y)`.
    pub fn gradient(&self, beta: &CVector) -> CVector {
        &self.gram * beta - &self.cross
    }

    /// Smallest `lambda` with an all-zero solution: `(1/n)|X^H Y|_inf`.
    pub fn lambda_max(&self) -> f64 {
        crate::linalg::max_abs(&self.cross)
    }

    /// Group-lasso KKT residual: for nonzero coordinates
    /// `|g_j + lambda beta_j/|beta_j||`, for zero coordinates
    /// `max(0, |g_j| - lambda)`.
    pub fn kkt_residual(&self, beta: &CVector, lambda: f64) -> f64 {
        let g = self.gradient(beta);
        g.iter()
            .zip(beta.iter())
            .map(|(gj, bj)| {
                let mag = bj.norm();
                if mag > 0.0 {
                    (gj + bj * (lambda / mag)).norm()
                } else {
                    (gj.norm() - lambda).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        let ok = self.gram.iter().chain(self.cross.iter()).all(|z| z.re.is_finite() && z.im.is_finite())
            && self.response_energy.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::NonFinite)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub power_iters: usize,
    pub power_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 50_000,
            power_iters: 30,
            power_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub iterations: usize,
    pub kkt_residual: f64,
    pub objective: f64,
    /// Objective after every accepted iterate, starting with the initial point.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

/// Coefficients of node `node` regressed on the other nodes, ordered like
/// the design columns.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerEstimate {
    pub node: usize,
    pub coefficients: CVector,
    pub lambda: f64,
    pub stats: Option<SolverStats>,
}

impl WienerEstimate {
    pub fn p(&self) -> usize {
        self.coefficients.len()
    }

    /// Coefficient on node `j`, or `None` for `j == node`.
    pub fn coefficient_of(&self, j: usize) -> Option<num_complex::Complex64> {
        crate::linalg::column_of(self.node, j).map(|l| self.coefficients[l])
    }

    /// Re-expresses coefficients fitted on variables with scales
    /// `from_scales` (indexed by node) in variables with scales `to_scales`:
    /// `beta'[l] = beta[l] * (to[j]/from[j]) * (from[i]/to[i])`.
    pub fn rescaled(&self, from_scales: &[f64], to_scales: &[f64]) -> Self {
        let i = self.node;
        let cols = crate::linalg::column_nodes(self.p() + 1, i);
        let resp = from_scales[i] / to_scales[i];
        let coefficients = CVector::from_fn(self.p(), |l, _| {
            let j = cols[l];
            self.coefficients[l] * (to_scales[j] / from_scales[j] * resp)
        });
        Self {
            coefficients,
            ..self.clone()
        }
    }
}
