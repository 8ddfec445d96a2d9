use serde::{Deserialize, Serialize};

use super::config::GraphSpec;
use super::experiment::{Experiment, TrialSummary};
use crate::error::Result;

/// Outcome of the minimum sample count search. `n_min` is `None` when the
/// range was exhausted without a success.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NMinSearch {
    pub n_min: Option<usize>,
    pub required: usize,
    /// Every evaluated sample count, sorted by `n`.
    pub curve: Vec<TrialSummary>,
}

/// Doubles `n` from the range start until at least `required` trials have
/// zero relative error, then bisects between the last failure and the first
/// success.
pub fn find_n_min(exp: &Experiment) -> Result<NMinSearch> {
    let range = &exp.config.n_search;
    let required = exp.config.required();
    let mut curve = Vec::new();
    let mut eval = |n: usize| -> Result<bool> {
        let reports = exp.run_trials(n)?;
        let s = TrialSummary::from_reports(n, &reports);
        let ok = s.successes >= required;
        curve.push(s);
        Ok(ok)
    };

    let mut lo = None;
    let mut n = range.start;
    let hi = loop {
        if eval(n)? {
            break Some(n);
        }
        lo = Some(n);
        if n >= range.max {
            break None;
        }
        n = n.saturating_mul(2).min(range.max);
    };

    let n_min = match (lo, hi) {
        (_, None) => None,
        (None, Some(h)) => Some(h),
        (Some(mut l), Some(mut h)) => {
            while h - l > 1 && (h - l) as f64 > range.rel_tol * h as f64 {
                let mid = l + (h - l) / 2;
                if eval(mid)? {
                    h = mid;
                } else {
                    l = mid;
                }
            }
            Some(h)
        }
    };
    curve.sort_by_key(|s| s.n);
    Ok(NMinSearch { n_min, required, curve })
}

/// One row of the `n_min` versus `log p` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub graph: String,
    pub p: usize,
    pub log_p: f64,
    pub trajectory_len: usize,
    pub n_min: Option<usize>,
    /// Theorem sample size for the same constants, when defined.
    pub theorem_n_min: Option<u64>,
}

/// Runs [`find_n_min`] for each graph with the remaining settings of `exp`.
pub fn nmin_vs_log_p(exp: &Experiment, graphs: &[GraphSpec]) -> Result<Vec<ScalingPoint>> {
    graphs
        .iter()
        .map(|g| {
            let mut cfg = exp.config.clone();
            cfg.graph = g.clone();
            let e = Experiment::prepare(cfg)?;
            let search = find_n_min(&e)?;
            Ok(ScalingPoint {
                graph: g.label(),
                p: e.p(),
                log_p: (e.p() as f64).ln(),
                trajectory_len: e.trajectory_len,
                n_min: search.n_min,
                theorem_n_min: e.bounds.as_ref().ok().map(|b| b.n_min),
            })
        })
        .collect()
}
