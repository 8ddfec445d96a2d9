//! Analytic second-order structure of the stationary state process.
//!
//! The state is augmented with the previous innovation, `s(k) = (x(k),
//! w(k-1))`, which turns the MA(1)-driven system into a first-order one:
//!
//! ```text
//! s(k+1) = [h  G theta1; 0  0] s(k) + [G theta0; I] w(k)
//! ```
//!
//! so `R_x(tau)` is the state block of `A^tau Sigma` where `Sigma` solves the
//! discrete Lyapunov equation `Sigma = A Sigma A^T + B B^T`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eigenvalues, inverse, spectral_norm_real, to_complex, CMatrix,
};
use crate::model::LdsModel;

/// Hard cap on the number of autocorrelation lags.
pub const MAX_LAGS: usize = 100_000;
/// Lags are truncated once `||R(tau)|| < LAG_CUTOFF * ||R(0)||`.
pub const LAG_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralKind {
    /// Limit PSD `Phi_x(f)`.
    AnalyticPsd,
    /// Bartlett-windowed finite-`N` PSD: the covariance of DFT rows.
    ExpectedFinite,
    Empirical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMatrix {
    pub frequency: f64,
    pub matrix: CMatrix,
    pub kind: SpectralKind,
}

impl SpectralMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn inverse(&self) -> Result<CMatrix> {
        inverse(&self.matrix, "spectral matrix")
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    /// Largest entrywise deviation from Hermitian symmetry, relative to the
    /// largest entry.
    pub fn hermitian_defect(&self) -> f64 {
        let scale = self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        (&self.matrix - self.matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
            / scale
    }

    /// `sqrt(diag)`: the per-node scales a column normalization divides by.
    pub fn diagonal_scales(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|j| self.matrix[(j, j)].re.max(0.0).sqrt())
            .collect()
    }

    /// `D^{-1} M D^{-1}` with `D = diag(scales)`.
    pub fn rescaled(&self, scales: &[f64]) -> Self {
        let m = CMatrix::from_fn(self.dim(), self.dim(), |a, b| {
            self.matrix[(a, b)] / (scales[a] * scales[b])
        });
        Self {
            frequency: self.frequency,
            matrix: m,
            kind: self.kind,
        }
    }
}

/// `R_x(0), ..., R_x(tau_max)`; negative lags follow from
/// `R_x(-tau) = R_x(tau)^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutocorrSequence {
    pub matrices: Vec<DMatrix<f64>>,
}

impl AutocorrSequence {
    pub fn tau_max(&self) -> usize {
        self.matrices.len() - 1
    }

    /// `R_x(tau)`, zero beyond the stored range.
    pub fn lag(&self, tau: i64) -> DMatrix<f64> {
        let k = tau.unsigned_abs() as usize;
        match self.matrices.get(k) {
            Some(m) if tau >= 0 => m.clone(),
            Some(m) => m.transpose(),
            None => {
                let n = self.matrices[0].nrows();
                DMatrix::zeros(n, n)
            }
        }
    }

    pub fn norms(&self) -> Vec<f64> {
        self.matrices.iter().map(spectral_norm_real).collect()
    }

    /// `D^{-1} R(tau) D^{-1}` for every lag.
    pub fn rescaled(&self, scales: &[f64]) -> Self {
        Self {
            matrices: self
                .matrices
                .iter()
                .map(|m| DMatrix::from_fn(m.nrows(), m.ncols(), |a, b| m[(a, b)] / (scales[a] * scales[b])))
                .collect(),
        }
    }

    /// Truncated DTFT `sum_{|tau| <= tau_max} R(tau) e^{-i f tau}`.
    pub fn dtft(&self, frequency: f64) -> CMatrix {
        let mut acc = to_complex(&self.matrices[0]);
        for (tau, m) in self.matrices.iter().enumerate().skip(1) {
            let z = Complex64::from_polar(1.0, -frequency * tau as f64);
            let mc = to_complex(m);
            acc += &mc * z + mc.transpose() * z.conj();
        }
        acc
    }

    /// `(1/N) sum_{|q| < N} (N - |q|) R(q) e^{-i f q}` using the stored lags.
    pub fn bartlett(&self, frequency: f64, trajectory_len: usize) -> CMatrix {
        let big_n = trajectory_len as f64;
        let mut acc = to_complex(&self.matrices[0]);
        let last = self.tau_max().min(trajectory_len.saturating_sub(1));
        for q in 1..=last {
            let weight = (big_n - q as f64) / big_n;
            let z = Complex64::from_polar(weight, -frequency * q as f64);
            let mc = to_complex(&self.matrices[q]);
            acc += &mc * z + mc.transpose() * z.conj();
        }
        acc
    }
}

/// Augmented first-order form of the MA(1)-driven system.
pub struct AugmentedSystem {
    pub transition: DMatrix<f64>,
    pub noise_cov: DMatrix<f64>,
    pub state_dim: usize,
}

impl AugmentedSystem {
    pub fn new(model: &LdsModel) -> Self {
        let p1 = model.node_count();
        let ma = model.ma();
        let gain = model.noise_gain();
        let mut a = DMatrix::zeros(2 * p1, 2 * p1);
        a.view_mut((0, 0), (p1, p1)).copy_from(model.h());
        let mut b = DMatrix::zeros(2 * p1, p1);
        for i in 0..p1 {
            a[(i, p1 + i)] = gain[i] * ma.theta1;
            b[(i, i)] = gain[i] * ma.theta0;
            b[(p1 + i, i)] = 1.0;
        }
        let q = &b * b.transpose();
        Self {
            transition: a,
            noise_cov: q,
            state_dim: p1,
        }
    }

    pub fn spectral_radius(&self) -> f64 {
        crate::linalg::spectral_radius(&self.transition)
    }
}

/// Solves `X = A X A^T + Q` by the doubling form of the fixed-point
/// iteration `X <- A X A^T + Q`.
pub fn solve_discrete_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut x = q.clone();
    let mut ak = a.clone();
    let mut converged = false;
    for _ in 0..64 {
        let incr = &ak * &x * ak.transpose();
        let incr_norm = incr.amax();
        x += incr;
        if !x.iter().all(|v| v.is_finite()) {
            break;
        }
        if incr_norm <= 1e-17 * x.amax().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        ak = &ak * &ak;
    }
    let residual = (a * &x * a.transpose() + q - &x).amax();
    let scale = x.amax().max(1.0);
    if !converged || !residual.is_finite() || residual > 1e-10 * scale {
        return Err(Error::LyapunovDivergence { residual });
    }
    Ok((&x + x.transpose()).scale(0.5))
}

/// Stationary covariance of the augmented state.
pub fn stationary_covariance(model: &LdsModel) -> Result<DMatrix<f64>> {
    let aug = AugmentedSystem::new(model);
    solve_discrete_lyapunov(&aug.transition, &aug.noise_cov)
}

/// Exact autocovariances `R_x(0..=tau_max)`.
pub fn analytic_autocorr(model: &LdsModel, tau_max: usize) -> Result<AutocorrSequence> {
    autocorr_until(model, |tau, _, _| tau >= tau_max)
}

/// Autocovariances up to the first lag where both `||R_x(tau)||` and the
/// augmented lag covariance fall below `LAG_CUTOFF` times their lag-0
/// values, capped at `MAX_LAGS`.
pub fn analytic_autocorr_auto(model: &LdsModel) -> Result<AutocorrSequence> {
    autocorr_until(model, |tau, r_ratio, aug_ratio| {
        tau >= MAX_LAGS || (tau >= 1 && r_ratio < LAG_CUTOFF && aug_ratio < LAG_CUTOFF)
    })
}

fn autocorr_until(
    model: &LdsModel,
    mut stop: impl FnMut(usize, f64, f64) -> bool,
) -> Result<AutocorrSequence> {
    let aug = AugmentedSystem::new(model);
    let sigma = solve_discrete_lyapunov(&aug.transition, &aug.noise_cov)?;
    let p1 = aug.state_dim;
    // Only the state columns of A^tau Sigma are needed.
    let mut cols = sigma.columns(0, p1).into_owned();
    let r0 = cols.rows(0, p1).into_owned();
    let r0_norm = spectral_norm_real(&r0).max(f64::MIN_POSITIVE);
    let aug0 = cols.amax().max(f64::MIN_POSITIVE);
    let mut matrices = vec![r0];
    let mut tau = 0;
    loop {
        let last = &matrices[tau];
        if stop(tau, spectral_norm_real(last) / r0_norm, cols.amax() / aug0) {
            break;
        }
        cols = &aug.transition * &cols;
        matrices.push(cols.rows(0, p1).into_owned());
        tau += 1;
    }
    Ok(AutocorrSequence { matrices })
}

/// `Phi_x(f) = (I - H)^{-1} Phi_P (I - H)^{-H}` with
/// `H_ij = h_ij / (e^{if} - h_ii)` and
/// `Phi_P(i,i) = gain_i^2 |theta0 + theta1 e^{-if}|^2 / |e^{if} - h_ii|^2`.
pub fn analytic_psd(model: &LdsModel, frequency: f64) -> Result<SpectralMatrix> {
    let p1 = model.node_count();
    let h = model.h();
    let z = Complex64::from_polar(1.0, frequency);
    let ma_power = model.ma().power_at(frequency);
    let mut i_minus_h = CMatrix::identity(p1, p1);
    let mut phi_p = CMatrix::zeros(p1, p1);
    for i in 0..p1 {
        let denom = z - h[(i, i)];
        if denom.norm() < 1e-14 {
            return Err(Error::IllPosed { frequency });
        }
        for j in 0..p1 {
            if i != j && h[(i, j)] != 0.0 {
                i_minus_h[(i, j)] = -h[(i, j)] / denom;
            }
        }
        let g = model.noise_gain()[i];
        phi_p[(i, i)] = Complex64::from(g * g * ma_power / denom.norm_sqr());
    }
    let t = inverse(&i_minus_h, "I - H").map_err(|_| Error::IllPosed { frequency })?;
    let mut phi = &t * phi_p * t.adjoint();
    symmetrize(&mut phi);
    Ok(SpectralMatrix {
        frequency,
        matrix: phi,
        kind: SpectralKind::AnalyticPsd,
    })
}

/// Covariance of DFT rows for length-`N` trajectories:
/// `(1/N) sum_{|q| < N} (N - |q|) R_x(q) e^{-i f q}`.
pub fn expected_finite_psd(model: &LdsModel, frequency: f64, trajectory_len: usize) -> Result<SpectralMatrix> {
    if trajectory_len == 0 {
        return Err(Error::invalid("N", "must be at least 1"));
    }
    // Lags past the automatic cutoff contribute below 1e-12 relative.
    let seq = analytic_autocorr_auto(model)?;
    let mut m = seq.bartlett(frequency, trajectory_len);
    symmetrize(&mut m);
    Ok(SpectralMatrix {
        frequency,
        matrix: m,
        kind: SpectralKind::ExpectedFinite,
    })
}

fn symmetrize(m: &mut CMatrix) {
    let h = (m.clone() + m.adjoint()).scale(0.5);
    *m = h;
}
