use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::sim::TrajectoryBatch;

use super::{SpectralDesign, SpectralKind, SpectralMatrix};

/// Default analysis frequency `2 pi / N`.
pub fn default_frequency(trajectory_len: usize) -> f64 {
    std::f64::consts::TAU / trajectory_len as f64
}

/// Precomputed `e^{-i f k}` for `k < N`.
pub struct Twiddles {
    factors: Vec<Complex64>,
    norm: f64,
}

impl Twiddles {
    pub fn new(trajectory_len: usize, frequency: f64) -> Self {
        let factors = (0..trajectory_len)
            .map(|k| Complex64::from_polar(1.0, -frequency * k as f64))
            .collect();
        Self {
            factors,
            norm: 1.0 / (trajectory_len as f64).sqrt(),
        }
    }

    /// `acc[i] += x[i] e^{-i f k}`.
    #[inline]
    pub fn accumulate(&self, k: usize, x: &[f64], acc: &mut [Complex64]) {
        let w = self.factors[k];
        for (a, &xi) in acc.iter_mut().zip(x) {
            *a += w * xi;
        }
    }

    pub fn finish(&self, acc: &mut [Complex64]) {
        for a in acc {
            *a *= self.norm;
        }
    }
}

/// `(1/sqrt(N)) sum_k x(k) e^{-i f k}`.
pub fn dft_coefficient(samples: &[f64], frequency: f64) -> Result<Complex64> {
    if samples.is_empty() {
        return Err(Error::invalid("samples", "need at least one sample"));
    }
    let tw = Twiddles::new(samples.len(), frequency);
    let mut acc = [Complex64::new(0.0, 0.0)];
    for (k, &x) in samples.iter().enumerate() {
        tw.accumulate(k, &[x], &mut acc);
    }
    tw.finish(&mut acc);
    Ok(acc[0])
}

/// DFT coefficients of `n` trajectories at one frequency: an `n x (p+1)`
/// complex table whose row `r` is `X^r`.
#[derive(Debug, Clone, PartialEq)]
pub struct DftBatch {
    pub frequency: f64,
    pub trajectory_len: usize,
    pub node_count: usize,
    pub n: usize,
    rows: Vec<Complex64>,
}

impl DftBatch {
    pub fn new(frequency: f64, trajectory_len: usize, node_count: usize, rows: Vec<Complex64>) -> Self {
        assert_eq!(rows.len() % node_count.max(1), 0, "ragged DFT rows");
        let n = rows.len() / node_count.max(1);
        Self {
            frequency,
            trajectory_len,
            node_count,
            n,
            rows,
        }
    }

    pub fn from_batch(batch: &TrajectoryBatch, frequency: f64) -> Self {
        let p1 = batch.node_count;
        let tw = Twiddles::new(batch.trajectory_len, frequency);
        let mut rows = vec![Complex64::new(0.0, 0.0); batch.n * p1];
        for (r, row) in rows.chunks_mut(p1).enumerate() {
            for (k, x) in batch.trajectory(r).chunks(p1).enumerate() {
                tw.accumulate(k, x, row);
            }
            tw.finish(row);
        }
        Self::new(frequency, batch.trajectory_len, p1, rows)
    }

    pub fn value(&self, r: usize, i: usize) -> Complex64 {
        self.rows[r * self.node_count + i]
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.rows[r * self.node_count..(r + 1) * self.node_count]
    }

    /// Sample covariance `(1/n) sum_r X^r (X^r)^H`; the process is zero-mean
    /// so no centring is applied.
    pub fn empirical_psd(&self) -> SpectralMatrix {
        let p1 = self.node_count;
        let mut m = CMatrix::zeros(p1, p1);
        for r in 0..self.n {
            let row = self.row(r);
            for a in 0..p1 {
                let xa = row[a];
                for b in a..p1 {
                    m[(a, b)] += xa * row[b].conj();
                }
            }
        }
        let inv_n = 1.0 / self.n as f64;
        for a in 0..p1 {
            for b in a..p1 {
                let v = m[(a, b)] * inv_n;
                m[(a, b)] = v;
                m[(b, a)] = v.conj();
            }
            m[(a, a)].im = 0.0;
        }
        SpectralMatrix {
            frequency: self.frequency,
            matrix: m,
            kind: SpectralKind::Empirical,
        }
    }

    /// Design for regressing node `node` on all others (column-normalized).
    pub fn design(&self, node: usize) -> Result<SpectralDesign> {
        SpectralDesign::from_dft(self, node)
    }
}
