use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, LambdaRule, PilotObjective};
use crate::error::{Error, Result};
use crate::estimator::{solve_gram_from, threshold_topology, GramProblem, RecoveryResult, WienerEstimate};
use crate::graph::{two_hop_closure, Graph, TwoHopSet};
use crate::linalg::CVector;
use crate::model::LdsModel;
use crate::sim::{derive_seed, simulate_dft};
use crate::spectral::{analytic_psd, default_frequency, SpectralMatrix};
use crate::theory::{
    bound_lambda_and_n, compute_constants, error_bound_check, lambda_condition_lhs, lambda_lo, oracle_support,
    resolve_trajectory_len, restricted_eigenvalue_from_gram, ModelConstants, TheoryBounds, MIN_TRAJECTORY_LEN,
};

/// Pilot trials use indices from here on so they never share seeds with
/// evaluation trials.
const PILOT_INDEX_BASE: u64 = 1 << 40;

/// Absolute slack when checking the error bound.
const BOUND_ABS_TOL: f64 = 1e-9;

/// Everything derived from the config before any trial runs.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub graph: Graph,
    pub two_hop: TwoHopSet,
    pub model: LdsModel,
    pub trajectory_len: usize,
    pub frequency: f64,
    pub constants: ModelConstants,
    /// Analytic PSD at the analysis frequency.
    pub psd: SpectralMatrix,
    /// `sqrt(Phi_jj)`.
    pub scales: Vec<f64>,
    /// Limit Wiener filters of the unit-diagonal PSD.
    pub oracle: Vec<WienerEstimate>,
    pub bounds: std::result::Result<TheoryBounds, String>,
    /// Resolved `kappa_cal` for the calibrated rule.
    pub kappa_cal: Option<f64>,
    pub pilot: Vec<PilotPoint>,
}

/// Pilot outcome for one candidate `kappa_cal`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotPoint {
    pub kappa_cal: f64,
    pub lambda: f64,
    pub lambda_condition_rate: f64,
    pub successes: usize,
    pub trials: usize,
    pub mean_node_error: f64,
}

/// Per-trial checks of the lambda condition and the error bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialDiagnostics {
    /// Lambda condition at every node.
    pub lambda_condition_holds: bool,
    pub lambda_condition_nodes: usize,
    pub lambda_condition_lhs_max: f64,
    pub kappa_hat: Vec<f64>,
    /// `bound - error` per node where the bound applies.
    pub bound_slack: Vec<Option<f64>>,
    /// Nodes where the lambda condition holds, `kappa_hat > 0` and the
    /// error exceeds the bound.
    pub bound_violations: usize,
    pub bound_checked: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: u64,
    pub seed: u64,
    pub n: usize,
    pub lambda: f64,
    /// `|E_hat \ E| + |E \ E_hat|`.
    pub relative_error: usize,
    #[serde(skip)]
    pub recovered: Option<RecoveryResult>,
    /// `|W_hat_i - W_i|_2` in the design scale.
    pub node_errors: Vec<f64>,
    pub diagnostics: Option<TrialDiagnostics>,
}

impl TrialReport {
    pub fn success(&self) -> bool {
        self.relative_error == 0
    }

    pub fn mean_node_error(&self) -> f64 {
        mean(&self.node_errors)
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Sufficient statistics of one simulated trial.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub n: usize,
    pub seed: u64,
    pub psd_hat: SpectralMatrix,
    pub problems: Vec<GramProblem>,
    /// Oracle filters expressed in each design's scale.
    pub targets: Vec<CVector>,
}

impl Experiment {
    /// Builds the experiment and, for the calibrated rule without a given
    /// `kappa_cal`, runs the pilot.
    pub fn prepare(config: ExperimentConfig) -> Result<Self> {
        let mut exp = Self::prepare_uncalibrated(config)?;
        if matches!(exp.config.lambda, LambdaRule::Calibrated { kappa_cal: None, .. }) && !exp.config.oracle {
            exp.calibrate()?;
        }
        Ok(exp)
    }

    /// As [`Experiment::prepare`] without the pilot; `lambdas` fails for an
    /// uncalibrated rule until [`Experiment::calibrate`] runs.
    pub fn prepare_uncalibrated(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let graph = config.graph.build()?;
        let model = config.model.build(&graph)?;
        let trajectory_len = match config.trajectory_len {
            Some(len) => len,
            None => resolve_trajectory_len(&model, &graph, MIN_TRAJECTORY_LEN)?.0,
        };
        let frequency = config.frequency.unwrap_or_else(|| default_frequency(trajectory_len));
        let constants = compute_constants(&model, &graph, frequency)?;
        let psd = analytic_psd(&model, frequency)?;
        let scales = psd.diagonal_scales();
        let normalized = psd.rescaled(&scales);
        let oracle = (0..graph.node_count())
            .map(|i| crate::estimator::exact_wiener(&normalized, i))
            .collect::<Result<Vec<_>>>()?;
        let bounds = bound_lambda_and_n(&constants, graph.p(), config.epsilon, config.regime, config.universal_constants)
            .map_err(|e| e.to_string());
        let kappa_cal = match &config.lambda {
            LambdaRule::Calibrated { kappa_cal, .. } => *kappa_cal,
            _ => None,
        };
        Ok(Self {
            two_hop: two_hop_closure(&graph),
            config,
            graph,
            model,
            trajectory_len,
            frequency,
            constants,
            psd,
            scales,
            oracle,
            bounds,
            kappa_cal,
            pilot: Vec::new(),
        })
    }

    pub fn p(&self) -> usize {
        self.graph.p()
    }

    /// Decoding thresholds `tau1 = tau2 = m`.
    pub fn threshold(&self) -> f64 {
        self.constants.m
    }

    /// `sqrt(ln(p^2 / eps) / (n L))`, the calibrated rule without `kappa_cal`.
    pub fn calibrated_rate(&self, n: usize) -> f64 {
        let p = self.p().max(1) as f64;
        ((p * p / self.config.epsilon).ln() / (n as f64 * self.constants.l)).sqrt()
    }

    /// Regularization weights for `n` samples; several only for the grid rule.
    pub fn lambdas(&self, n: usize) -> Result<Vec<f64>> {
        match &self.config.lambda {
            LambdaRule::Theorem => {
                if self.p() < 2 {
                    return Err(Error::invalid("lambda", "theorem rule needs at least three nodes"));
                }
                Ok(vec![lambda_lo(&self.constants, self.p(), self.config.epsilon, self.config.regime, n as f64)])
            }
            LambdaRule::Calibrated { .. } => {
                let k = self
                    .kappa_cal
                    .ok_or_else(|| Error::invalid("lambda", "kappa_cal is not calibrated"))?;
                Ok(vec![k * self.calibrated_rate(n)])
            }
            LambdaRule::Fixed { value } => Ok(vec![*value]),
            LambdaRule::Grid { values } => {
                let mut v = values.clone();
                v.sort_by(|a, b| b.total_cmp(a));
                Ok(v)
            }
        }
    }

    /// Whether the theorem rule is in use and `lambda_lo(n) > lambda_hi`.
    pub fn theorem_infeasible(&self, n: usize) -> bool {
        if self.config.lambda != LambdaRule::Theorem {
            return false;
        }
        match &self.bounds {
            Ok(b) => lambda_lo(&self.constants, self.p(), self.config.epsilon, self.config.regime, n as f64) > b.lambda_hi * (1.0 + 1e-12),
            Err(_) => true,
        }
    }

    pub fn trial_seed(&self, trial: u64) -> u64 {
        derive_seed(self.config.seed, trial)
    }

    /// Simulates trial `trial` with `n` trajectories and reduces it to the
    /// per-node normalized Gram problems.
    pub fn trial_data(&self, n: usize, trial: u64) -> Result<TrialData> {
        let seed = self.trial_seed(trial);
        let dft = simulate_dft(
            &self.model,
            &self.graph,
            self.config.regime,
            n,
            self.trajectory_len,
            self.frequency,
            seed,
        )?;
        let psd_hat = dft.empirical_psd();
        let emp_scales = psd_hat.diagonal_scales();
        let p1 = self.graph.node_count();
        let problems = (0..p1)
            .map(|i| GramProblem::from_empirical_psd(&psd_hat.matrix, i, n))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::invalid("trial", format!("trial {trial}, n = {n}: {e}")))?;
        let targets = self
            .oracle
            .iter()
            .map(|w| w.rescaled(&self.scales, &emp_scales).coefficients)
            .collect();
        Ok(TrialData {
            n,
            seed,
            psd_hat,
            problems,
            targets,
        })
    }

    /// Solves every node at `lambda`, warm-started from `init`.
    pub fn solve_all(&self, data: &TrialData, lambda: f64, init: Option<&[WienerEstimate]>) -> Result<Vec<WienerEstimate>> {
        data.problems
            .iter()
            .enumerate()
            .map(|(i, problem)| {
                let start = init.map_or_else(|| CVector::zeros(problem.p()), |w| w[i].coefficients.clone());
                let (coefficients, stats) = solve_gram_from(problem, lambda, &self.config.solver, start)
                    .map_err(|e| Error::invalid("trial", format!("seed {}, node {i}: {e}", data.seed)))?;
                Ok(WienerEstimate {
                    node: i,
                    coefficients,
                    lambda,
                    stats: Some(stats),
                })
            })
            .collect()
    }

    pub fn decode(&self, estimates: &[WienerEstimate]) -> Result<RecoveryResult> {
        let tau = self.threshold();
        threshold_topology(estimates, tau, tau)
    }

    /// Errors, diagnostics and decoded topology of estimates at `lambda`.
    pub fn evaluate(&self, data: &TrialData, trial: u64, estimates: &[WienerEstimate], lambda: f64) -> Result<TrialReport> {
        let recovered = self.decode(estimates)?;
        let mut node_errors = Vec::with_capacity(estimates.len());
        let mut diag = TrialDiagnostics {
            lambda_condition_holds: true,
            lambda_condition_nodes: 0,
            lambda_condition_lhs_max: 0.0,
            kappa_hat: Vec::with_capacity(estimates.len()),
            bound_slack: Vec::with_capacity(estimates.len()),
            bound_violations: 0,
            bound_checked: 0,
        };
        for (i, est) in estimates.iter().enumerate() {
            let target = &data.targets[i];
            let delta = &est.coefficients - target;
            node_errors.push(delta.norm());
            let lhs = lambda_condition_lhs(&data.problems[i], target);
            let holds = lambda >= lhs;
            diag.lambda_condition_lhs_max = diag.lambda_condition_lhs_max.max(lhs);
            diag.lambda_condition_holds &= holds;
            diag.lambda_condition_nodes += usize::from(holds);
            let support = oracle_support(target);
            let kappa = restricted_eigenvalue_from_gram(
                &data.problems[i].gram,
                &support,
                self.config.re_trials,
                &[&delta],
                derive_seed(data.seed, i as u64),
            )?;
            diag.kappa_hat.push(kappa);
            let check = if holds {
                error_bound_check(&delta, kappa, lambda, self.constants.d, BOUND_ABS_TOL)
            } else {
                None
            };
            diag.bound_slack.push(check.map(|c| c.bound - c.error_norm));
            if let Some(c) = check {
                diag.bound_checked += 1;
                diag.bound_violations += usize::from(!c.holds);
            }
        }
        Ok(TrialReport {
            trial,
            seed: data.seed,
            n: data.n,
            lambda,
            relative_error: recovered.relative_error(&self.graph),
            recovered: Some(recovered),
            node_errors,
            diagnostics: Some(diag),
        })
    }

    /// Simulate, estimate, decode and score one trial.
    pub fn run_trial(&self, n: usize, trial: u64) -> Result<TrialReport> {
        if self.config.oracle {
            return self.oracle_trial(n, trial);
        }
        let data = self.trial_data(n, trial)?;
        self.run_on(&data, trial)
    }

    /// Estimation, decoding and scoring on already simulated data.
    pub fn run_on(&self, data: &TrialData, trial: u64) -> Result<TrialReport> {
        let n = data.n;
        let mut best: Option<TrialReport> = None;
        let mut warm: Option<Vec<WienerEstimate>> = None;
        for lambda in self.lambdas(n)? {
            let est = self.solve_all(data, lambda, warm.as_deref())?;
            let report = self.evaluate(data, trial, &est, lambda)?;
            if best.as_ref().map_or(true, |b| report.relative_error < b.relative_error) {
                best = Some(report);
            }
            warm = Some(est);
        }
        Ok(best.expect("at least one lambda"))
    }

    fn oracle_trial(&self, n: usize, trial: u64) -> Result<TrialReport> {
        let recovered = self.decode(&self.oracle)?;
        Ok(TrialReport {
            trial,
            seed: self.trial_seed(trial),
            n,
            lambda: 0.0,
            relative_error: recovered.relative_error(&self.graph),
            recovered: Some(recovered),
            node_errors: vec![0.0; self.oracle.len()],
            diagnostics: None,
        })
    }

    /// Trials `0..config.trials` at `n`, in parallel.
    pub fn run_trials(&self, n: usize) -> Result<Vec<TrialReport>> {
        (0..self.config.trials as u64)
            .into_par_iter()
            .map(|t| self.run_trial(n, t))
            .collect()
    }

    /// Picks `kappa_cal` on the pilot grid by the configured objective. For
    /// the lambda condition objective the largest grid value is used when no
    /// value reaches the target rate.
    pub fn calibrate(&mut self) -> Result<f64> {
        let LambdaRule::Calibrated { pilot, .. } = &self.config.lambda else {
            return Err(Error::invalid("lambda", "calibration needs the calibrated rule"));
        };
        let pilot = pilot.clone();
        let mut grid = pilot.grid.clone();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let rate = self.calibrated_rate(pilot.n);
        let per_trial: Vec<Vec<TrialReport>> = (0..pilot.trials as u64)
            .into_par_iter()
            .map(|t| {
                let idx = PILOT_INDEX_BASE + t;
                let data = self.trial_data(pilot.n, idx)?;
                let mut warm: Option<Vec<WienerEstimate>> = None;
                let mut out = Vec::with_capacity(grid.len());
                for &k in grid.iter().rev() {
                    let est = self.solve_all(&data, k * rate, warm.as_deref())?;
                    out.push(self.evaluate(&data, idx, &est, k * rate)?);
                    warm = Some(est);
                }
                out.reverse();
                Ok(out)
            })
            .collect::<Result<_>>()?;
        self.pilot = grid
            .iter()
            .enumerate()
            .map(|(g, &k)| {
                let reports: Vec<&TrialReport> = per_trial.iter().map(|r| &r[g]).collect();
                let holds = reports
                    .iter()
                    .filter(|r| r.diagnostics.as_ref().is_some_and(|d| d.lambda_condition_holds))
                    .count();
                PilotPoint {
                    kappa_cal: k,
                    lambda: k * rate,
                    lambda_condition_rate: holds as f64 / reports.len() as f64,
                    successes: reports.iter().filter(|r| r.success()).count(),
                    trials: reports.len(),
                    mean_node_error: mean(&reports.iter().map(|r| r.mean_node_error()).collect::<Vec<_>>()),
                }
            })
            .collect();
        let chosen = match pilot.objective {
            PilotObjective::LambdaCondition => self
                .pilot
                .iter()
                .find(|pt| pt.lambda_condition_rate >= pilot.target_rate)
                .map_or(*grid.last().expect("validated non-empty"), |pt| pt.kappa_cal),
            PilotObjective::EstimationError => {
                self.pilot
                    .iter()
                    .min_by(|a, b| a.mean_node_error.total_cmp(&b.mean_node_error))
                    .expect("validated non-empty")
                    .kappa_cal
            }
        };
        self.kappa_cal = Some(chosen);
        Ok(chosen)
    }
}

/// Aggregate of the trials at one sample count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub n: usize,
    pub trials: usize,
    pub successes: usize,
    pub mean_relative_error: f64,
    pub mean_node_error: f64,
    pub mean_lambda: f64,
    pub lambda_condition_rate: Option<f64>,
    pub bound_violations: usize,
}

impl TrialSummary {
    pub fn from_reports(n: usize, reports: &[TrialReport]) -> Self {
        let diag: Vec<&TrialDiagnostics> = reports.iter().filter_map(|r| r.diagnostics.as_ref()).collect();
        Self {
            n,
            trials: reports.len(),
            successes: reports.iter().filter(|r| r.success()).count(),
            mean_relative_error: mean(&reports.iter().map(|r| r.relative_error as f64).collect::<Vec<_>>()),
            mean_node_error: mean(&reports.iter().map(TrialReport::mean_node_error).collect::<Vec<_>>()),
            mean_lambda: mean(&reports.iter().map(|r| r.lambda).collect::<Vec<_>>()),
            lambda_condition_rate: (!diag.is_empty())
                .then(|| diag.iter().filter(|d| d.lambda_condition_holds).count() as f64 / diag.len() as f64),
            bound_violations: diag.iter().map(|d| d.bound_violations).sum(),
        }
    }
}
