use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{chain_graph, complete_graph, grid_graph, random_tree, Graph};
use crate::model::ModelSpec;
use crate::sim::Regime;
use crate::theory::UniversalConstants;

/// Topology generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum GraphSpec {
    Grid { rows: usize, cols: usize },
    Chain { nodes: usize },
    Complete { nodes: usize },
    RandomTree { nodes: usize, seed: u64 },
    /// Edge-list file in the format of [`Graph::save`].
    EdgeList { path: PathBuf },
}

impl Default for GraphSpec {
    fn default() -> Self {
        GraphSpec::Grid { rows: 3, cols: 3 }
    }
}

impl GraphSpec {
    pub fn build(&self) -> Result<Graph> {
        match self {
            GraphSpec::Grid { rows, cols } => grid_graph(*rows, *cols),
            GraphSpec::Chain { nodes } => chain_graph(*nodes),
            GraphSpec::Complete { nodes } => complete_graph(*nodes),
            GraphSpec::RandomTree { nodes, seed } => random_tree(*nodes, *seed),
            GraphSpec::EdgeList { path } => Graph::load(path),
        }
    }

    pub fn label(&self) -> String {
        match self {
            GraphSpec::Grid { rows, cols } => format!("grid{rows}x{cols}"),
            GraphSpec::Chain { nodes } => format!("chain{nodes}"),
            GraphSpec::Complete { nodes } => format!("complete{nodes}"),
            GraphSpec::RandomTree { nodes, seed } => format!("tree{nodes}s{seed}"),
            GraphSpec::EdgeList { path } => path.display().to_string(),
        }
    }
}

/// What the pilot optimizes when picking `kappa_cal`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PilotObjective {
    /// Smallest grid value for which the lambda condition holds at every
    /// node in at least `target_rate` of the pilot trials.
    #[default]
    LambdaCondition,
    /// Grid value with the smallest mean `|W_hat_i - W_i|_2`.
    EstimationError,
}

/// Pilot grid used to pick `kappa_cal` when it is not given. Pilot trials
/// run at `n` samples with seeds disjoint from the evaluation trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PilotConfig {
    #[serde(default)]
    pub objective: PilotObjective,
    #[serde(default = "default_pilot_n")]
    pub n: usize,
    #[serde(default = "default_pilot_trials")]
    pub trials: usize,
    #[serde(default = "default_pilot_grid")]
    pub grid: Vec<f64>,
    #[serde(default = "default_pilot_rate")]
    pub target_rate: f64,
}

fn default_pilot_n() -> usize {
    1024
}

fn default_pilot_trials() -> usize {
    20
}

/// Quarter-octave steps from 1/8 to 8.
fn default_pilot_grid() -> Vec<f64> {
    (-12..=12).map(|k| 2f64.powf(k as f64 / 4.0)).collect()
}

fn default_pilot_rate() -> f64 {
    0.95
}

impl Default for PilotConfig {
    fn default() -> Self {
        Self {
            objective: PilotObjective::default(),
            n: default_pilot_n(),
            trials: default_pilot_trials(),
            grid: default_pilot_grid(),
            target_rate: default_pilot_rate(),
        }
    }
}

/// How the regularization weight is chosen for a sample count `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", deny_unknown_fields)]
pub enum LambdaRule {
    /// Smallest admissible theorem value `lambda_lo(n)` for the configured
    /// regime.
    Theorem,
    /// `kappa_cal * sqrt(ln(p^2 / eps) / (n L))`.
    Calibrated {
        #[serde(default)]
        kappa_cal: Option<f64>,
        #[serde(default)]
        pilot: PilotConfig,
    },
    Fixed { value: f64 },
    /// Each trial keeps the grid value with the smallest relative error.
    Grid { values: Vec<f64> },
}

impl Default for LambdaRule {
    fn default() -> Self {
        LambdaRule::Calibrated {
            kappa_cal: None,
            pilot: PilotConfig::default(),
        }
    }
}

impl LambdaRule {
    pub fn label(&self) -> String {
        match self {
            LambdaRule::Theorem => "theorem".into(),
            LambdaRule::Calibrated { kappa_cal: Some(k), .. } => format!("calibrated(kappa_cal={k})"),
            LambdaRule::Calibrated { kappa_cal: None, .. } => "calibrated(pilot)".into(),
            LambdaRule::Fixed { value } => format!("fixed({value})"),
            LambdaRule::Grid { values } => format!("grid({} values)", values.len()),
        }
    }
}

/// Parses `theorem`, `calibrated`, `calibrated:<kappa>` and `fixed:<value>`.
impl FromStr for LambdaRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: String| Error::invalid("lambda-rule", why);
        let num = |v: &str| v.parse::<f64>().map_err(|e| bad(format!("`{v}`: {e}")));
        match s.split_once(':') {
            None if s == "theorem" => Ok(LambdaRule::Theorem),
            None if s == "calibrated" => Ok(LambdaRule::default()),
            Some(("calibrated", v)) => Ok(LambdaRule::Calibrated {
                kappa_cal: Some(num(v)?),
                pilot: PilotConfig::default(),
            }),
            Some(("fixed", v)) => Ok(LambdaRule::Fixed { value: num(v)? }),
            _ => Err(bad(format!("unknown rule `{s}`"))),
        }
    }
}

/// Search range for the minimum sample count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NSearch {
    pub start: usize,
    pub max: usize,
    /// Bisection stops once the bracket is within this fraction of its
    /// upper end (0 bisects to a single sample).
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

fn default_rel_tol() -> f64 {
    0.05
}

impl Default for NSearch {
    fn default() -> Self {
        Self {
            start: 1,
            max: 1 << 20,
            rel_tol: default_rel_tol(),
        }
    }
}

fn default_regime() -> Regime {
    Regime::RestartRecord
}

fn default_epsilon() -> f64 {
    0.05
}

fn default_trials() -> usize {
    45
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_re_trials() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub graph: GraphSpec,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default = "default_regime")]
    pub regime: Regime,
    /// Trajectory length; the smallest self-consistent `N >= N_min` when
    /// absent.
    #[serde(default)]
    pub trajectory_len: Option<usize>,
    /// Analysis frequency; `2 pi / N` when absent.
    #[serde(default)]
    pub frequency: Option<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub lambda: LambdaRule,
    /// Sample counts for `recover` and `compare`.
    #[serde(default)]
    pub n_values: Vec<usize>,
    #[serde(default)]
    pub n_search: NSearch,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Error-free trials needed for a sample count to count as a success;
    /// all trials when absent.
    #[serde(default)]
    pub required_successes: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub universal_constants: UniversalConstants,
    #[serde(default)]
    pub solver: crate::estimator::SolverOptions,
    /// Random cone directions for the restricted eigenvalue estimate.
    #[serde(default = "default_re_trials")]
    pub re_trials: usize,
    /// Replace estimates by the analytic Wiener filters.
    #[serde(default)]
    pub oracle: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("every field has a default")
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn required(&self) -> usize {
        self.required_successes.unwrap_or(self.trials)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |why: String| Err(Error::Config(why));
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return bad(format!("epsilon {} is outside (0, 0.5)", self.epsilon));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if let Some(r) = self.required_successes {
            if r == 0 || r > self.trials {
                return bad(format!("required_successes {r} must be in 1..={}", self.trials));
            }
        }
        let s = &self.n_search;
        if s.start == 0 || s.start > s.max {
            return bad(format!("n_search range [{}, {}] is empty", s.start, s.max));
        }
        if !(s.rel_tol >= 0.0 && s.rel_tol < 1.0) {
            return bad(format!("n_search.rel_tol {} is outside [0, 1)", s.rel_tol));
        }
        if self.n_values.contains(&0) {
            return bad("n_values must be positive".into());
        }
        if self.trajectory_len == Some(0) {
            return bad("trajectory_len must be positive".into());
        }
        if let Some(f) = self.frequency {
            if !(f > 0.0 && f < std::f64::consts::TAU) {
                return bad(format!("frequency {f} is outside (0, 2 pi)"));
            }
        }
        if self.re_trials == 0 {
            return bad("re_trials must be at least 1".into());
        }
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        match &self.lambda {
            LambdaRule::Theorem => {}
            LambdaRule::Fixed { value } if !finite_nonneg(*value) => {
                return bad(format!("fixed lambda {value} must be finite and nonnegative"));
            }
            LambdaRule::Fixed { .. } => {}
            LambdaRule::Grid { values } => {
                if values.is_empty() || !values.iter().all(|&v| finite_nonneg(v)) {
                    return bad("lambda grid must be non-empty, finite and nonnegative".into());
                }
            }
            LambdaRule::Calibrated { kappa_cal, pilot } => {
                if let Some(k) = kappa_cal {
                    if !(k.is_finite() && *k > 0.0) {
                        return bad(format!("kappa_cal {k} must be positive"));
                    }
                } else if pilot.n == 0
                    || pilot.trials == 0
                    || pilot.grid.is_empty()
                    || !pilot.grid.iter().all(|&k| k.is_finite() && k > 0.0)
                    || !(pilot.target_rate > 0.0 && pilot.target_rate <= 1.0)
                {
                    return bad("pilot needs n, trials >= 1, positive grid values and a rate in (0, 1]".into());
                }
            }
        }
        if let GraphSpec::Grid { rows, cols } = self.graph {
            if rows == 0 || cols == 0 {
                return bad("grid dimensions must be positive".into());
            }
        }
        Ok(())
    }
}

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default)]
pub struct ConfigOverrides {
    pub regime: Option<Regime>,
    pub epsilon: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub lambda: Option<LambdaRule>,
    pub n_values: Option<Vec<usize>>,
}

impl ConfigOverrides {
    pub fn apply(self, mut cfg: ExperimentConfig) -> Result<ExperimentConfig> {
        if let Some(v) = self.regime {
            cfg.regime = v;
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
            if cfg.required_successes.is_some_and(|r| r > v) {
                cfg.required_successes = None;
            }
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.out_dir {
            cfg.out_dir = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.n_values {
            cfg.n_values = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
