use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::experiment::{mean, Experiment};
use crate::error::{Error, Result};
use crate::estimator::{cig_baseline, unregularized_from_gram};
use crate::graph::Pair;
use crate::linalg::pseudo_inverse;
use crate::spectral::{expected_finite_psd, SpectralMatrix};

/// Mean relative errors of the three estimators at one sample count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub n: usize,
    pub trials: usize,
    pub lambda: f64,
    pub regularized: f64,
    pub unregularized: f64,
    pub cig: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    /// `|E_M \ E|`.
    pub strict_two_hop: usize,
    /// Threshold on the unit-diagonal inverse PSD used by the CIG baseline.
    pub cig_threshold: f64,
}

/// Half the smallest modulus over `E_M` of the unit-diagonal inverse of the
/// expected length-`N` PSD, which is the limit of the empirical PSD as `n`
/// grows.
pub fn cig_threshold(exp: &Experiment) -> Result<f64> {
    let fin = expected_finite_psd(&exp.model, exp.frequency, exp.trajectory_len)?;
    let inv = fin.rescaled(&fin.diagonal_scales()).inverse()?;
    let min = exp
        .two_hop
        .pairs
        .iter()
        .map(|&(i, j)| inv[(i, j)].norm())
        .fold(f64::INFINITY, f64::min);
    Ok(if min.is_finite() { 0.5 * min } else { f64::INFINITY })
}

/// CIG support, through the pseudo-inverse when the estimate is singular
/// (fewer samples than nodes).
fn cig_support(psd: &SpectralMatrix, threshold: f64) -> Result<BTreeSet<Pair>> {
    match cig_baseline(psd, threshold) {
        Err(Error::Singular(_)) => {
            let inv = pseudo_inverse(&psd.matrix);
            let p1 = psd.dim();
            Ok((0..p1)
                .flat_map(|i| (i + 1..p1).map(move |j| (i, j)))
                .filter(|&(i, j)| inv[(i, j)].norm() >= threshold)
                .collect())
        }
        other => other,
    }
}

fn error_of(e_hat: &BTreeSet<Pair>, truth: &BTreeSet<Pair>) -> usize {
    e_hat.symmetric_difference(truth).count()
}

/// Regularized estimator at the configured lambda, the unregularized
/// least-squares filter (both decoded with `tau1 = tau2 = m`) and the CIG
/// support of the unit-diagonal empirical PSD, averaged over
/// `config.trials` trials at each `n`.
pub fn compare_baselines(exp: &Experiment, n_grid: &[usize]) -> Result<ComparisonTable> {
    let tau_cig = cig_threshold(exp)?;
    let truth = exp.graph.edges();
    let rows = n_grid
        .iter()
        .map(|&n| {
            let lambda = exp.lambdas(n)?[0];
            let errs: Vec<[usize; 3]> = (0..exp.config.trials as u64)
                .into_par_iter()
                .map(|t| -> Result<[usize; 3]> {
                    let data = exp.trial_data(n, t)?;
                    let reg = exp.run_on(&data, t)?.relative_error;
                    let unreg: Vec<_> = data
                        .problems
                        .iter()
                        .enumerate()
                        .map(|(i, pb)| unregularized_from_gram(pb, i))
                        .collect();
                    let unreg = exp.decode(&unreg)?.relative_error(&exp.graph);
                    let normalized = data.psd_hat.rescaled(&data.psd_hat.diagonal_scales());
                    let cig = error_of(&cig_support(&normalized, tau_cig)?, truth);
                    Ok([reg, unreg, cig])
                })
                .collect::<Result<_>>()?;
            let col = |k: usize| mean(&errs.iter().map(|e| e[k] as f64).collect::<Vec<_>>());
            Ok(ComparisonRow {
                n,
                trials: errs.len(),
                lambda,
                regularized: col(0),
                unregularized: col(1),
                cig: col(2),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonTable {
        rows,
        strict_two_hop: exp.two_hop.strict_two_hop.len(),
        cig_threshold: tau_cig,
    })
}
