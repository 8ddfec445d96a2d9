use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::WienerEstimate;
use crate::error::{Error, Result};
use crate::graph::{Graph, Pair};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub i: usize,
    pub j: usize,
    /// `|W_i[j]| + |W_j[i]|`.
    pub magnitude_score: f64,
    /// `|Im W_i[j]| + |Im W_j[i]|`.
    pub imag_score: f64,
}

/// Decoded topology: `e_m_hat` estimates the two-hop closure, `e_hat` the
/// edge set.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub node_count: usize,
    pub e_m_hat: BTreeSet<Pair>,
    pub e_hat: BTreeSet<Pair>,
    pub tau1: f64,
    pub tau2: f64,
    pub scores: Vec<PairScore>,
}

impl RecoveryResult {
    /// False positives plus false negatives of `e_hat` against `graph`.
    pub fn relative_error(&self, graph: &Graph) -> usize {
        self.e_hat.symmetric_difference(graph.edges()).count()
    }

    /// Score table; node indices are written 1-based.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(["i", "j", "magnitude_score", "imag_score", "in_E_M_hat", "in_E_hat"])?;
        for s in &self.scores {
            let pair = (s.i, s.j);
            w.write_record([
                (s.i + 1).to_string(),
                (s.j + 1).to_string(),
                format!("{:e}", s.magnitude_score),
                format!("{:e}", s.imag_score),
                u8::from(self.e_m_hat.contains(&pair)).to_string(),
                u8::from(self.e_hat.contains(&pair)).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))
    }
}

/// Builds both edge sets from one estimate per node. A pair enters
/// `e_m_hat` when its magnitude score is at least `tau1`, and `e_hat` when it
/// is in `e_m_hat` and its imaginary score is at least `tau2`.
pub fn threshold_topology(estimates: &[WienerEstimate], tau1: f64, tau2: f64) -> Result<RecoveryResult> {
    let p1 = estimates.len();
    let mut by_node: Vec<Option<&WienerEstimate>> = vec![None; p1];
    for est in estimates {
        if est.node >= p1 {
            return Err(Error::invalid("estimates", format!("node {} out of range", est.node)));
        }
        if est.p() + 1 != p1 {
            return Err(Error::invalid(
                "estimates",
                format!("node {} has {} coefficients, expected {}", est.node, est.p(), p1.saturating_sub(1)),
            ));
        }
        by_node[est.node] = Some(est);
    }
    let by_node = by_node
        .into_iter()
        .enumerate()
        .map(|(i, e)| e.ok_or(Error::MissingEstimate(i)))
        .collect::<Result<Vec<_>>>()?;

    let mut scores = Vec::with_capacity(p1 * p1.saturating_sub(1) / 2);
    let mut e_m_hat = BTreeSet::new();
    let mut e_hat = BTreeSet::new();
    for i in 0..p1 {
        for j in i + 1..p1 {
            let a = by_node[i].coefficient_of(j).expect("j != i");
            let b = by_node[j].coefficient_of(i).expect("i != j");
            let magnitude_score = a.norm() + b.norm();
            let imag_score = a.im.abs() + b.im.abs();
            if magnitude_score >= tau1 {
                e_m_hat.insert((i, j));
                if imag_score >= tau2 {
                    e_hat.insert((i, j));
                }
            }
            scores.push(PairScore {
                i,
                j,
                magnitude_score,
                imag_score,
            });
        }
    }
    Ok(RecoveryResult {
        node_count: p1,
        e_m_hat,
        e_hat,
        tau1,
        tau2,
        scores,
    })
}

/// Heuristic threshold for model-free use: the midpoint of the widest gap
/// between consecutive sorted scores. Returns `None` for fewer than two
/// scores.
pub fn largest_gap_threshold(scores: &[f64]) -> Option<f64> {
    let mut sorted: Vec<f64> = scores.iter().copied().filter(|s| s.is_finite()).collect();
    sorted.sort_by(f64::total_cmp);
    sorted
        .windows(2)
        .max_by(|a, b| (a[1] - a[0]).total_cmp(&(b[1] - b[0])))
        .map(|w| 0.5 * (w[0] + w[1]))
}
