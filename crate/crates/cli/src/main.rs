use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use netlds::harness::{
    compare_baselines, emit_report, find_n_min, nmin_vs_log_p, ConfigOverrides, Experiment, ExperimentConfig, GraphSpec,
    LambdaRule, RunResults, TrialData, TrialSummary,
};
use netlds::sim::{load_batch, save_batch, write_batch_csv};
use netlds::spectral::DftBatch;
use netlds::theory::{diagnose_psd_gap, TheoryReport};
use netlds::{simulate, GramProblem, Regime};

/// Exit code when the theorem rule cannot produce an admissible lambda.
const EXIT_INFEASIBLE: u8 = 2;

#[derive(Parser)]
#[command(name = "netlds", version, about = "Topology learning for networked linear dynamical systems")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// `iid` or `consecutive`.
    #[arg(long, global = true)]
    regime: Option<Regime>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `theorem`, `calibrated`, `calibrated:<kappa>` or `fixed:<lambda>`.
    #[arg(long = "lambda-rule", global = true)]
    lambda_rule: Option<LambdaRule>,
    /// Sample counts, comma separated.
    #[arg(long = "n-values", global = true, value_delimiter = ',')]
    n_values: Option<Vec<usize>>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate trajectories and save them as a binary batch.
    Simulate {
        /// Number of trajectories; defaults to the first config n value.
        #[arg(long)]
        n: Option<usize>,
        /// Also write the samples as CSV.
        #[arg(long)]
        csv: bool,
    },
    /// Recover the topology from a saved batch, or run Monte Carlo trials
    /// at every configured n.
    Recover {
        #[arg(long)]
        batch: Option<PathBuf>,
    },
    /// Search the smallest n meeting the success criterion.
    Nmin {
        /// Square grid sides for the n_min against log p table.
        #[arg(long = "grid-sides", value_delimiter = ',')]
        grid_sides: Option<Vec<usize>>,
    },
    /// Compare the regularized, unregularized and CIG estimators.
    Compare,
    /// Print model constants and the sample size bounds.
    Bounds,
    /// Finite-length PSD gap and per-trial estimator diagnostics.
    Diagnose {
        #[arg(long)]
        n: Option<usize>,
    },
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let base = match &self.config {
            Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        let overrides = ConfigOverrides {
            regime: self.regime,
            epsilon: self.epsilon,
            trials: self.trials,
            seed: self.seed,
            out_dir: self.out.clone(),
            lambda: self.lambda_rule.clone(),
            n_values: self.n_values.clone(),
        };
        Ok(overrides.apply(base)?)
    }
}

fn first_n(cfg: &ExperimentConfig) -> Result<usize> {
    match cfg.n_values.first() {
        Some(&n) => Ok(n),
        None => bail!("no sample count given; set n_values or pass --n"),
    }
}

fn report(exp: &Experiment, results: &RunResults, dir: &Path) -> Result<()> {
    for path in emit_report(exp, results, dir)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn infeasible_at(exp: &Experiment, ns: &[usize]) -> bool {
    exp.config.lambda == LambdaRule::Theorem && (exp.bounds.is_err() || ns.iter().any(|&n| exp.theorem_infeasible(n)))
}

fn simulate_cmd(cfg: ExperimentConfig, n: Option<usize>, csv: bool) -> Result<bool> {
    let n = n.map_or_else(|| first_n(&cfg), Ok)?;
    let exp = Experiment::prepare_uncalibrated(cfg)?;
    let dir = &exp.config.out_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let batch = simulate(&exp.model, &exp.graph, exp.config.regime, n, exp.trajectory_len, exp.config.seed)?;
    let bin = dir.join("batch.bin");
    save_batch(&batch, &bin)?;
    println!("{}", bin.display());
    let graph = dir.join("graph.txt");
    exp.graph.save(&graph)?;
    println!("{}", graph.display());
    if csv {
        let path = dir.join("batch.csv");
        write_batch_csv(&batch, &path)?;
        println!("{}", path.display());
    }
    Ok(false)
}

fn recover_batch(exp: &Experiment, path: &Path) -> Result<bool> {
    let batch = load_batch(path).with_context(|| format!("loading {}", path.display()))?;
    if batch.node_count != exp.graph.node_count() {
        bail!(
            "batch has {} nodes but the configured graph has {}",
            batch.node_count,
            exp.graph.node_count()
        );
    }
    let dft = DftBatch::from_batch(&batch, exp.frequency);
    let psd_hat = dft.empirical_psd();
    let emp_scales = psd_hat.diagonal_scales();
    let problems = (0..batch.node_count)
        .map(|i| GramProblem::from_empirical_psd(&psd_hat.matrix, i, batch.n))
        .collect::<netlds::Result<Vec<_>>>()?;
    let targets = exp
        .oracle
        .iter()
        .map(|w| w.rescaled(&exp.scales, &emp_scales).coefficients)
        .collect();
    let data = TrialData {
        n: batch.n,
        seed: batch.seed,
        psd_hat,
        problems,
        targets,
    };
    let trial = exp.run_on(&data, 0)?;
    let dir = &exp.config.out_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    if let Some(rec) = &trial.recovered {
        let scores = dir.join("scores.csv");
        rec.write_csv(&scores)?;
        println!("{}", scores.display());
    }
    println!(
        "n = {}, lambda = {:.6e}, relative error {}",
        trial.n, trial.lambda, trial.relative_error
    );
    let infeasible = infeasible_at(exp, &[batch.n]);
    report(
        exp,
        &RunResults {
            trials: vec![trial],
            ..RunResults::default()
        },
        dir,
    )?;
    Ok(infeasible)
}

fn recover_cmd(exp: &Experiment, batch: Option<&Path>) -> Result<bool> {
    if let Some(path) = batch {
        return recover_batch(exp, path);
    }
    if exp.config.n_values.is_empty() {
        bail!("no sample counts; set n_values or pass --n-values");
    }
    let mut trials = Vec::new();
    for &n in &exp.config.n_values {
        let reports = exp.run_trials(n)?;
        let s = TrialSummary::from_reports(n, &reports);
        println!(
            "n = {n}: {}/{} exact, mean relative error {:.3}, lambda {:.4e}",
            s.successes, s.trials, s.mean_relative_error, s.mean_lambda
        );
        trials.extend(reports);
    }
    let results = RunResults {
        trials,
        ..RunResults::default()
    };
    report(exp, &results, &exp.config.out_dir)?;
    Ok(infeasible_at(exp, &exp.config.n_values))
}

fn nmin_cmd(exp: &Experiment, grid_sides: Option<&[usize]>) -> Result<bool> {
    let search = find_n_min(exp)?;
    match search.n_min {
        Some(n) => println!("n_min = {n} ({} of {} trials)", search.required, exp.config.trials),
        None => println!("n_min not reached up to n = {}", exp.config.n_search.max),
    }
    let scaling = match grid_sides {
        Some(sides) => {
            let graphs: Vec<GraphSpec> = sides.iter().map(|&s| GraphSpec::Grid { rows: s, cols: s }).collect();
            nmin_vs_log_p(exp, &graphs)?
        }
        None => Vec::new(),
    };
    let checked = [search.n_min.unwrap_or(exp.config.n_search.max)];
    let results = RunResults {
        nmin: Some(search),
        scaling,
        ..RunResults::default()
    };
    report(exp, &results, &exp.config.out_dir)?;
    Ok(infeasible_at(exp, &checked))
}

fn compare_cmd(exp: &Experiment) -> Result<bool> {
    if exp.config.n_values.is_empty() {
        bail!("no sample counts; set n_values or pass --n-values");
    }
    let table = compare_baselines(exp, &exp.config.n_values)?;
    for r in &table.rows {
        println!(
            "n = {}: regularized {:.3}, unregularized {:.3}, cig {:.3}",
            r.n, r.regularized, r.unregularized, r.cig
        );
    }
    let results = RunResults {
        comparison: Some(table),
        ..RunResults::default()
    };
    report(exp, &results, &exp.config.out_dir)?;
    Ok(infeasible_at(exp, &exp.config.n_values))
}

fn bounds_cmd(exp: &Experiment) -> Result<bool> {
    let rep = TheoryReport::new(
        exp.model.content_hash(),
        exp.config.regime,
        exp.config.epsilon,
        exp.constants.clone(),
        exp.p(),
        exp.config.universal_constants,
    );
    let json = rep.to_json()?;
    println!("{json}");
    let dir = &exp.config.out_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join("bounds.json"), format!("{json}\n"))?;
    Ok(rep.bounds.as_ref().map_or(true, |b| !b.feasible))
}

fn diagnose_cmd(exp: &Experiment, n: Option<usize>) -> Result<bool> {
    let n = n.map_or_else(|| first_n(&exp.config), Ok)?;
    let gap = diagnose_psd_gap(&exp.model, exp.frequency, exp.trajectory_len)?;
    let reports = exp.run_trials(n)?;
    let summary = TrialSummary::from_reports(n, &reports);
    let out = serde_json::json!({
        "trajectory_len": exp.trajectory_len,
        "frequency": exp.frequency,
        "constants": exp.constants,
        "psd_gap": gap,
        "summary": summary,
        "trials": reports,
    });
    let json = serde_json::to_string_pretty(&out)?;
    println!("{json}");
    let dir = &exp.config.out_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join("diagnose.json"), format!("{json}\n"))?;
    Ok(infeasible_at(exp, &[n]))
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = cli.common.config()?;
    match cli.command {
        Command::Simulate { n, csv } => return simulate_cmd(cfg, n, csv),
        Command::Bounds => return bounds_cmd(&Experiment::prepare_uncalibrated(cfg)?),
        _ => {}
    }
    let exp = Experiment::prepare(cfg)?;
    match &cli.command {
        Command::Simulate { .. } | Command::Bounds => unreachable!("handled above"),
        Command::Recover { batch } => recover_cmd(&exp, batch.as_deref()),
        Command::Nmin { grid_sides } => nmin_cmd(&exp, grid_sides.as_deref()),
        Command::Compare => compare_cmd(&exp),
        Command::Diagnose { n } => diagnose_cmd(&exp, *n),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("theorem rule infeasible: lambda_lo exceeds lambda_hi or the bounds are undefined");
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
