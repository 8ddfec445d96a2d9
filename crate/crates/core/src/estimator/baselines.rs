use std::collections::BTreeSet;

use super::{GramProblem, WienerEstimate};
use crate::error::{Error, Result};
use crate::graph::Pair;
use crate::linalg::pseudo_inverse;
use crate::spectral::{SpectralDesign, SpectralMatrix};

/// Minimum-norm least squares `X^+ Y`.
pub fn unregularized_wiener(design: &SpectralDesign) -> WienerEstimate {
    WienerEstimate {
        node: design.node,
        coefficients: pseudo_inverse(&design.design) * &design.response,
        lambda: 0.0,
        stats: None,
    }
}

/// `gram^+ cross`, equal to `X^+ Y` for the design the statistics came from.
pub fn unregularized_from_gram(problem: &GramProblem, node: usize) -> WienerEstimate {
    WienerEstimate {
        node,
        coefficients: pseudo_inverse(&problem.gram) * &problem.cross,
        lambda: 0.0,
        stats: None,
    }
}

/// Pairs whose inverse-PSD entry has modulus at least `threshold`.
pub fn cig_baseline(psd: &SpectralMatrix, threshold: f64) -> Result<BTreeSet<Pair>> {
    let inv = psd
        .inverse()
        .map_err(|_| Error::Singular("PSD estimate is not invertible".into()))?;
    let p1 = psd.dim();
    let mut edges = BTreeSet::new();
    for i in 0..p1 {
        for j in i + 1..p1 {
            if inv[(i, j)].norm() >= threshold {
                edges.insert((i, j));
            }
        }
    }
    Ok(edges)
}
