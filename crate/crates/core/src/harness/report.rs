use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::compare::ComparisonTable;
use super::experiment::{Experiment, PilotPoint, TrialReport, TrialSummary};
use super::plot::{LinePlot, Series};
use super::search::{NMinSearch, ScalingPoint};
use crate::error::{Error, Result};
use crate::theory::{reference_checks, ModelConstants, ReferenceCheck, TheoryBounds};

/// Results to write; empty parts produce no files.
#[derive(Debug, Clone, Default)]
pub struct RunResults {
    pub trials: Vec<TrialReport>,
    pub nmin: Option<NMinSearch>,
    pub comparison: Option<ComparisonTable>,
    pub scaling: Vec<ScalingPoint>,
}

impl RunResults {
    /// Trial summaries grouped by `n`, ascending.
    pub fn summaries(&self) -> Vec<TrialSummary> {
        let mut by_n: BTreeMap<usize, Vec<TrialReport>> = BTreeMap::new();
        for t in &self.trials {
            by_n.entry(t.n).or_default().push(t.clone());
        }
        by_n.iter().map(|(&n, r)| TrialSummary::from_reports(n, r)).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphInfo {
    pub spec: String,
    pub node_count: usize,
    pub edge_count: usize,
    pub strict_two_hop: usize,
}

/// Run manifest written as `manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub package_version: String,
    pub config: super::ExperimentConfig,
    pub graph: GraphInfo,
    pub model_hash: String,
    pub trajectory_len: usize,
    pub frequency: f64,
    pub constants: ModelConstants,
    pub bounds: Option<TheoryBounds>,
    pub bounds_error: Option<String>,
    /// `theorem`, `calibrated(...)`, `fixed(...)` or `grid(...)`.
    pub lambda_rule: String,
    pub kappa_cal: Option<f64>,
    pub pilot: Vec<PilotPoint>,
    pub nmin: Option<NMinOutcome>,
    pub reference: Vec<ReferenceCheck>,
    /// SHA-256 of every table, keyed by file name.
    pub files: BTreeMap<String, String>,
    /// SHA-256 over the config and all tables.
    pub content_hash: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct NMinOutcome {
    pub n_min: Option<usize>,
    pub required: usize,
    pub trials: usize,
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Config(format!("csv buffer: {e}")))
}

const SUMMARY_HEADER: [&str; 8] = [
    "n",
    "trials",
    "successes",
    "mean_relative_error",
    "mean_node_error",
    "mean_lambda",
    "lambda_condition_rate",
    "bound_violations",
];

fn summary_row(s: &TrialSummary) -> Vec<String> {
    vec![
        s.n.to_string(),
        s.trials.to_string(),
        s.successes.to_string(),
        s.mean_relative_error.to_string(),
        s.mean_node_error.to_string(),
        s.mean_lambda.to_string(),
        fmt_opt(s.lambda_condition_rate),
        s.bound_violations.to_string(),
    ]
}

fn trial_rows(trials: &[TrialReport]) -> Vec<Vec<String>> {
    let mut sorted: Vec<&TrialReport> = trials.iter().collect();
    sorted.sort_by_key(|t| (t.n, t.trial));
    sorted
        .into_iter()
        .map(|t| {
            let d = t.diagnostics.as_ref();
            vec![
                t.n.to_string(),
                t.trial.to_string(),
                t.seed.to_string(),
                t.lambda.to_string(),
                t.relative_error.to_string(),
                fmt_opt(t.recovered.as_ref().map(|r| r.e_hat.len())),
                fmt_opt(d.map(|d| u8::from(d.lambda_condition_holds))),
                fmt_opt(d.map(|d| d.kappa_hat.iter().copied().fold(f64::INFINITY, f64::min))),
                t.mean_node_error().to_string(),
                t.node_errors.iter().copied().fold(0.0, f64::max).to_string(),
                fmt_opt(d.map(|d| d.bound_violations)),
            ]
        })
        .collect()
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes the tables, plots and `manifest.json` into `dir` and returns the
/// written paths. Output depends only on the inputs, so reruns of the same
/// configuration are byte-identical.
pub fn emit_report(exp: &Experiment, results: &RunResults, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tables: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    let mut plots: BTreeMap<String, String> = BTreeMap::new();

    if !results.trials.is_empty() {
        tables.insert(
            "trials.csv".into(),
            csv_bytes(
                &[
                    "n",
                    "trial",
                    "seed",
                    "lambda",
                    "relative_error",
                    "edges_recovered",
                    "lambda_condition_holds",
                    "kappa_hat_min",
                    "mean_node_error",
                    "max_node_error",
                    "bound_violations",
                ],
                trial_rows(&results.trials),
            )?,
        );
        let summaries = results.summaries();
        tables.insert("summary.csv".into(), csv_bytes(&SUMMARY_HEADER, summaries.iter().map(summary_row))?);
        plots.insert(
            "error_vs_n.svg".into(),
            LinePlot {
                title: "Relative error versus n".into(),
                x_label: "n (trajectories)".into(),
                y_label: "mean relative error".into(),
                log_x: true,
                series: vec![Series {
                    name: exp.config.lambda.label(),
                    points: summaries.iter().map(|s| (s.n as f64, s.mean_relative_error)).collect(),
                }],
            }
            .to_svg(),
        );
    }
    if let Some(search) = &results.nmin {
        tables.insert("nmin_curve.csv".into(), csv_bytes(&SUMMARY_HEADER, search.curve.iter().map(summary_row))?);
        plots.insert(
            "nmin_curve.svg".into(),
            LinePlot {
                title: "Error-free trials versus n".into(),
                x_label: "n (trajectories)".into(),
                y_label: "fraction of error-free trials".into(),
                log_x: true,
                series: vec![Series {
                    name: "success rate".into(),
                    points: search
                        .curve
                        .iter()
                        .map(|s| (s.n as f64, s.successes as f64 / s.trials as f64))
                        .collect(),
                }],
            }
            .to_svg(),
        );
    }
    if let Some(cmp) = &results.comparison {
        tables.insert(
            "comparison.csv".into(),
            csv_bytes(
                &["n", "trials", "lambda", "regularized", "unregularized", "cig", "strict_two_hop"],
                cmp.rows.iter().map(|r| {
                    vec![
                        r.n.to_string(),
                        r.trials.to_string(),
                        r.lambda.to_string(),
                        r.regularized.to_string(),
                        r.unregularized.to_string(),
                        r.cig.to_string(),
                        cmp.strict_two_hop.to_string(),
                    ]
                }),
            )?,
        );
        let series = |name: &str, f: fn(&super::ComparisonRow) -> f64| Series {
            name: name.into(),
            points: cmp.rows.iter().map(|r| (r.n as f64, f(r))).collect(),
        };
        plots.insert(
            "comparison.svg".into(),
            LinePlot {
                title: "Exact topology recovery: estimators compared".into(),
                x_label: "n (trajectories)".into(),
                y_label: "mean relative error".into(),
                log_x: true,
                series: vec![
                    series("regularized", |r| r.regularized),
                    series("unregularized", |r| r.unregularized),
                    series("CIG", |r| r.cig),
                ],
            }
            .to_svg(),
        );
    }
    if !results.scaling.is_empty() {
        tables.insert(
            "nmin_vs_logp.csv".into(),
            csv_bytes(
                &["graph", "p", "log_p", "trajectory_len", "n_min", "theorem_n_min"],
                results.scaling.iter().map(|s| {
                    vec![
                        s.graph.clone(),
                        s.p.to_string(),
                        s.log_p.to_string(),
                        s.trajectory_len.to_string(),
                        fmt_opt(s.n_min),
                        fmt_opt(s.theorem_n_min),
                    ]
                }),
            )?,
        );
        plots.insert(
            "nmin_vs_logp.svg".into(),
            LinePlot {
                title: "n_min versus log p".into(),
                x_label: "log p".into(),
                y_label: "n_min".into(),
                log_x: false,
                series: vec![Series {
                    name: "measured".into(),
                    points: results
                        .scaling
                        .iter()
                        .filter_map(|s| s.n_min.map(|n| (s.log_p, n as f64)))
                        .collect(),
                }],
            }
            .to_svg(),
        );
    }

    let config_json = exp.config.to_json();
    let mut total = Sha256::new();
    total.update(config_json.as_bytes());
    let mut files = BTreeMap::new();
    let mut written = Vec::new();
    for (name, bytes) in &tables {
        let digest = Sha256::digest(bytes);
        total.update(format!("blob {} {}\0", name, bytes.len()).as_bytes());
        total.update(bytes);
        files.insert(name.clone(), hex(&digest));
        written.push(write(dir, name, bytes)?);
    }
    for (name, svg) in &plots {
        written.push(write(dir, name, svg.as_bytes())?);
    }

    let manifest = Manifest {
        package_version: env!("CARGO_PKG_VERSION").into(),
        config: exp.config.clone(),
        graph: GraphInfo {
            spec: exp.config.graph.label(),
            node_count: exp.graph.node_count(),
            edge_count: exp.graph.edge_count(),
            strict_two_hop: exp.two_hop.strict_two_hop.len(),
        },
        model_hash: exp.model.content_hash(),
        trajectory_len: exp.trajectory_len,
        frequency: exp.frequency,
        constants: exp.constants.clone(),
        bounds: exp.bounds.as_ref().ok().cloned(),
        bounds_error: exp.bounds.as_ref().err().cloned(),
        lambda_rule: match exp.kappa_cal {
            Some(k) if matches!(exp.config.lambda, super::LambdaRule::Calibrated { .. }) => {
                format!("calibrated(kappa_cal={k})")
            }
            _ => exp.config.lambda.label(),
        },
        kappa_cal: exp.kappa_cal,
        pilot: exp.pilot.clone(),
        nmin: results.nmin.as_ref().map(|s| NMinOutcome {
            n_min: s.n_min,
            required: s.required,
            trials: exp.config.trials,
        }),
        reference: reference_checks(),
        files,
        content_hash: hex(&total.finalize()),
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    written.push(write(dir, "manifest.json", json.as_bytes())?);
    Ok(written)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{ExperimentConfig, GraphSpec, LambdaRule};
    use crate::model::ModelSpec;

    fn exp() -> Experiment {
        Experiment::prepare(ExperimentConfig {
            graph: GraphSpec::Chain { nodes: 4 },
            model: ModelSpec {
                target_radius: 0.3,
                ..ModelSpec::default()
            },
            lambda: LambdaRule::Fixed { value: 0.05 },
            trials: 3,
            ..ExperimentConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn empty_results_write_manifest_only() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&exp(), &RunResults::default(), dir.path()).unwrap();
        assert_eq!(files, vec![dir.path().join("manifest.json")]);
        let m: serde_json::Value = serde_json::from_slice(&std::fs::read(&files[0]).unwrap()).unwrap();
        assert!(m["files"].as_object().unwrap().is_empty());
        assert_eq!(m["lambda_rule"], "fixed(0.05)");
        assert_eq!(m["reference"][1]["flagged"], true);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let e = exp();
        let run = || RunResults {
            trials: [64usize, 256].iter().flat_map(|&n| e.run_trials(n).unwrap()).collect(),
            ..Default::default()
        };
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let fa = emit_report(&e, &run(), a.path()).unwrap();
        emit_report(&e, &run(), b.path()).unwrap();
        assert!(fa.iter().any(|p| p.ends_with("trials.csv")));
        for f in &fa {
            let name = f.file_name().unwrap();
            assert_eq!(std::fs::read(f).unwrap(), std::fs::read(b.path().join(name)).unwrap(), "{name:?}");
        }
        let summary = std::fs::read_to_string(a.path().join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 3);
        assert!(summary.starts_with("n,trials,successes,"));
    }
}
