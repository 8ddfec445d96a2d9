use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::wiener_from_inverse;
use crate::graph::{two_hop_closure, Graph};
use crate::linalg::{hermitian_eigenvalues, CMatrix};
use crate::model::LdsModel;
use crate::spectral::{analytic_autocorr_auto, analytic_psd, AugmentedSystem, LAG_CUTOFF};

/// Relative margin added to the asymptotic decay rate when fitting the
/// autocovariance envelope.
pub const ENVELOPE_MARGIN: f64 = 1e-6;

/// Constants of the normalized process: every node is scaled by
/// `sqrt(Phi_x(f)_jj)` at the analysis frequency, matching the column
/// normalization of the designs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    pub frequencies: Vec<f64>,
    /// `lambda_min` of the inverse normalized PSD.
    pub l: f64,
    /// `lambda_max` of the inverse normalized PSD.
    pub u: f64,
    /// Envelope `||R(tau)|| <= C delta^{-|tau|}`.
    pub c: f64,
    pub delta_inv: f64,
    pub d: usize,
    /// `min_i m_i`; infinite for a graph without edges.
    pub m: f64,
    pub m_i: Vec<f64>,
    pub rho_aug: f64,
    pub tau_max: usize,
}

impl ModelConstants {
    pub fn delta(&self) -> f64 {
        1.0 / self.delta_inv
    }

    /// `delta - 1`, computed as `(1 - delta^{-1}) / delta^{-1}`.
    pub fn delta_minus_one(&self) -> f64 {
        (1.0 - self.delta_inv) / self.delta_inv
    }
}

/// Fits `(C, delta^{-1})` to lag norms. With a positive decay rate `rho`
/// the rate is `rho (1 + margin)`; for a nilpotent transition the smallest
/// geometric rate dominating the observed lags is used instead, and a
/// sequence with no nonzero lag gets `delta^{-1} = 0`, `C = ||R(0)||`.
pub fn fit_envelope(norms: &[f64], rho: f64) -> (f64, f64) {
    let r0 = norms.first().copied().unwrap_or(0.0);
    let tail = norms.iter().skip(1).copied().fold(0.0, f64::max);
    if tail <= LAG_CUTOFF * r0 {
        return (r0, 0.0);
    }
    let rate = if rho >= 1e-9 {
        rho
    } else {
        norms
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, &v)| v > 0.0)
            .map(|(tau, &v)| (v / r0).powf(1.0 / tau as f64))
            .fold(0.0, f64::max)
    };
    let delta_inv = (rate * (1.0 + ENVELOPE_MARGIN)).min(1.0 - f64::EPSILON);
    let log_rate = delta_inv.ln();
    let c = norms
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(tau, &v)| (v.ln() - tau as f64 * log_rate).exp())
        .fold(0.0, f64::max);
    (c, delta_inv)
}

pub(crate) struct SpectralConstants {
    pub scales: Vec<f64>,
    pub inv: CMatrix,
    pub l: f64,
    pub u: f64,
    pub c: f64,
    pub delta_inv: f64,
    pub rho: f64,
    pub tau_max: usize,
}

/// Everything except the graph-dependent `d` and `m`.
pub(crate) fn spectral_constants(model: &LdsModel, frequency: f64) -> Result<SpectralConstants> {
    let phi = analytic_psd(model, frequency)?;
    let scales = phi.diagonal_scales();
    let phi_n = phi.rescaled(&scales);
    let inv = phi_n.inverse()?;
    let eig = hermitian_eigenvalues(&inv);
    let (l, u) = (eig[0], eig[eig.len() - 1]);
    if !(l > 0.0) {
        return Err(Error::Singular(format!("inverse PSD has eigenvalue {l:e}")));
    }
    let seq = analytic_autocorr_auto(model)?.rescaled(&scales);
    let rho = AugmentedSystem::new(model).spectral_radius();
    let (c, delta_inv) = fit_envelope(&seq.norms(), rho);
    Ok(SpectralConstants {
        scales,
        inv,
        l,
        u,
        c,
        delta_inv,
        rho,
        tau_max: seq.tau_max(),
    })
}

/// Per-node separation `m_i = min_{j ~ i} |Im W_i[j]|` from the inverse
/// normalized PSD.
fn separations(inv: &CMatrix, graph: &Graph) -> Result<Vec<f64>> {
    (0..graph.node_count())
        .map(|i| {
            let w = wiener_from_inverse(inv, i)?;
            let mut m_i = f64::INFINITY;
            for j in graph.neighbors(i) {
                let v = w.coefficient_of(j).expect("neighbor differs from node").im.abs();
                if v < 1e-12 {
                    return Err(Error::DegenerateSeparation { i, j });
                }
                m_i = m_i.min(v);
            }
            Ok(m_i)
        })
        .collect()
}

pub fn compute_constants(model: &LdsModel, graph: &Graph, frequency: f64) -> Result<ModelConstants> {
    model.check_support(graph)?;
    let sc = spectral_constants(model, frequency)?;
    let m_i = separations(&sc.inv, graph)?;
    Ok(ModelConstants {
        frequencies: vec![frequency],
        l: sc.l,
        u: sc.u,
        c: sc.c,
        delta_inv: sc.delta_inv,
        d: two_hop_closure(graph).max_degree(graph.node_count()),
        m: m_i.iter().copied().fold(f64::INFINITY, f64::min),
        m_i,
        rho_aug: sc.rho,
        tau_max: sc.tau_max,
    })
}

/// Worst case over a set of frequencies: smallest `L` and `m_i`, largest
/// `U` and `C`.
pub fn compute_constants_over_grid(model: &LdsModel, graph: &Graph, frequencies: &[f64]) -> Result<ModelConstants> {
    let (first, rest) = frequencies
        .split_first()
        .ok_or_else(|| Error::invalid("frequencies", "grid is empty"))?;
    let mut acc = compute_constants(model, graph, *first)?;
    for &f in rest {
        let k = compute_constants(model, graph, f)?;
        acc.frequencies.push(f);
        acc.l = acc.l.min(k.l);
        acc.u = acc.u.max(k.u);
        acc.c = acc.c.max(k.c);
        acc.tau_max = acc.tau_max.max(k.tau_max);
        for (a, b) in acc.m_i.iter_mut().zip(&k.m_i) {
            *a = a.min(*b);
        }
    }
    acc.m = acc.m_i.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(acc)
}

/// Shortest length tried: `N = 2` puts the frequency at `pi`, where the
/// imaginary parts of every filter vanish.
pub const MIN_TRAJECTORY_LEN: usize = 4;

/// Lengths scanned below the jump iterate when looking for a smaller
/// admissible `N`.
const LEN_SCAN_LIMIT: usize = 512;

/// Trajectory length `N` with `N >= N_min` for constants evaluated at
/// `f = 2 pi / N`. Starting from `start`, `N` jumps to `N_min` until it is
/// admissible; since `N_min` is not monotone in `N`, the lengths below the
/// result (up to [`LEN_SCAN_LIMIT`] of them) are then scanned for the
/// smallest admissible one.
pub fn resolve_trajectory_len(model: &LdsModel, graph: &Graph, start: usize) -> Result<(usize, ModelConstants)> {
    let start = start.max(MIN_TRAJECTORY_LEN);
    let at = |len: usize| -> Result<(u64, ModelConstants)> {
        let k = compute_constants(model, graph, crate::spectral::default_frequency(len))?;
        Ok((super::bound_n_min(&k), k))
    };
    let mut big_n = start;
    for _ in 0..64 {
        let (need, k) = at(big_n)?;
        if need <= big_n as u64 {
            let lo = start.max(big_n.saturating_sub(LEN_SCAN_LIMIT));
            for len in lo..big_n {
                let (need, k) = at(len)?;
                if need <= len as u64 {
                    return Ok((len, k));
                }
            }
            return Ok((big_n, k));
        }
        big_n = usize::try_from(need).map_err(|_| Error::invalid("N", "minimum trajectory length overflows"))?;
    }
    Err(Error::invalid("N", "trajectory length iteration did not settle"))
}
