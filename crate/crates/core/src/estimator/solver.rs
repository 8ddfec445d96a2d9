use num_complex::Complex64;

use super::{GramProblem, SolverOptions, SolverStats, WienerEstimate};
use crate::error::{Error, Result};
use crate::linalg::{power_iteration, CVector};
use crate::spectral::SpectralDesign;

/// Complex modulus soft-thresholding `z max(0, 1 - t/|z|)`.
fn shrink(z: Complex64, t: f64) -> Complex64 {
    let mag = z.norm();
    if mag <= t {
        Complex64::new(0.0, 0.0)
    } else {
        z * (1.0 - t / mag)
    }
}

fn prox_step(problem: &GramProblem, at: &CVector, lambda: f64, lip: f64) -> CVector {
    let g = problem.gradient(at);
    CVector::from_fn(at.len(), |j, _| shrink(at[j] - g[j] / lip, lambda / lip))
}

/// Accelerated proximal gradient on the Gram form of the lasso objective,
/// started at zero.
pub fn solve_gram(problem: &GramProblem, lambda: f64, opts: &SolverOptions) -> Result<(CVector, SolverStats)> {
    solve_gram_from(problem, lambda, opts, CVector::zeros(problem.p()))
}

/// As [`solve_gram`] with a warm start.
pub fn solve_gram_from(
    problem: &GramProblem,
    lambda: f64,
    opts: &SolverOptions,
    init: CVector,
) -> Result<(CVector, SolverStats)> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", format!("{lambda} must be finite and nonnegative")));
    }
    if init.len() != problem.p() {
        return Err(Error::invalid("init", "length differs from the design width"));
    }
    problem.check_finite()?;
    let p = problem.p();
    let mut x = init;
    let mut fx = problem.objective(&x, lambda);
    let mut trace = vec![fx];
    let mut kkt = problem.kkt_residual(&x, lambda);
    if p == 0 || kkt <= opts.tol {
        return Ok((x, SolverStats { iterations: 0, kkt_residual: kkt, objective: fx, trace }));
    }

    let mut lip = power_iteration(&problem.gram, opts.power_iters, opts.power_tol);
    if lip <= 0.0 {
        // Zero Gram: the loss is linear and the solution is the prox of -cross.
        lip = 1.0;
    }
    let mut y = x.clone();
    let mut t = 1.0_f64;
    for it in 1..=opts.max_iters {
        let mut next = prox_step(problem, &y, lambda, lip);
        let mut f_next = problem.objective(&next, lambda);
        let slack = 1e-13 * fx.abs().max(1.0);
        if f_next > fx {
            // Restart momentum from the last accepted iterate.
            next = prox_step(problem, &x, lambda, lip);
            f_next = problem.objective(&next, lambda);
            t = 1.0;
            if f_next > fx + slack {
                lip *= 2.0;
                y = x.clone();
                continue;
            }
            y = next.clone();
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            y = &next + (&next - &x) * Complex64::from(beta);
            t = t_next;
        }
        x = next;
        fx = f_next;
        trace.push(fx);
        kkt = problem.kkt_residual(&x, lambda);
        if kkt <= opts.tol {
            return Ok((x, SolverStats { iterations: it, kkt_residual: kkt, objective: fx, trace }));
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_iters,
        residual: kkt,
    })
}

/// Minimizer of `(1/2n)|Y - X beta|^2 + lambda sum_j |beta_j|` for the
/// normalized design.
pub fn solve_regularized_wiener(
    design: &SpectralDesign,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<WienerEstimate> {
    let problem = design.gram();
    let (coefficients, stats) = solve_gram(&problem, lambda, opts)?;
    Ok(WienerEstimate {
        node: design.node,
        coefficients,
        lambda,
        stats: Some(stats),
    })
}

/// `points` values geometrically spaced from `lambda_max` down to
/// `ratio * lambda_max`.
pub fn lambda_grid(lambda_max: f64, ratio: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lambda_max],
        _ => (0..points)
            .map(|k| lambda_max * ratio.powf(k as f64 / (points - 1) as f64))
            .collect(),
    }
}
