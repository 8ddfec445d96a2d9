use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimator::GramProblem;
use crate::linalg::{column_nodes, CMatrix, CVector};
use crate::sim::TrajectoryBatch;

use super::DftBatch;

/// Column-normalized complex regression problem for one node at one
/// frequency. Every column of `design` and the `response` have norm
/// `sqrt(n)`; the raw scales are kept so coefficients can be mapped back.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDesign {
    pub node: usize,
    pub frequency: f64,
    pub response: CVector,
    pub design: CMatrix,
    pub column_scales: Vec<f64>,
    pub response_scale: f64,
    /// Node held by each design column.
    pub column_nodes: Vec<usize>,
}

fn norm_scale(values: impl Iterator<Item = Complex64>, n: usize) -> f64 {
    (values.map(|z| z.norm_sqr()).sum::<f64>() / n as f64).sqrt()
}

impl SpectralDesign {
    pub(crate) fn from_dft(dft: &DftBatch, node: usize) -> Result<Self> {
        let p1 = dft.node_count;
        if node >= p1 {
            return Err(Error::invalid("node", format!("{node} out of range for {p1} nodes")));
        }
        if dft.n == 0 {
            return Err(Error::invalid("batch", "no trajectories"));
        }
        if (0..dft.n).any(|r| dft.row(r).iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
            return Err(Error::NonFinite);
        }
        let n = dft.n;
        let cols = column_nodes(p1, node);
        let scale_of = |j: usize| -> Result<f64> {
            let s = norm_scale((0..n).map(|r| dft.value(r, j)), n);
            if s > 0.0 {
                Ok(s)
            } else {
                Err(Error::ZeroColumn { node: j })
            }
        };
        let response_scale = scale_of(node)?;
        let column_scales = cols.iter().map(|&j| scale_of(j)).collect::<Result<Vec<_>>>()?;
        let response = CVector::from_fn(n, |r, _| dft.value(r, node) / response_scale);
        let design = CMatrix::from_fn(n, cols.len(), |r, l| dft.value(r, cols[l]) / column_scales[l]);
        Ok(Self {
            node,
            frequency: dft.frequency,
            response,
            design,
            column_scales,
            response_scale,
            column_nodes: cols,
        })
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn p(&self) -> usize {
        self.design.ncols()
    }

    /// Normalized-scale coefficients to the scale of the raw DFT data.
    pub fn to_raw(&self, beta: &CVector) -> CVector {
        CVector::from_fn(beta.len(), |l, _| beta[l] * (self.response_scale / self.column_scales[l]))
    }

    /// Raw-scale coefficients into this design's normalized scale.
    pub fn from_raw(&self, beta_raw: &CVector) -> CVector {
        CVector::from_fn(beta_raw.len(), |l, _| {
            beta_raw[l] * (self.column_scales[l] / self.response_scale)
        })
    }

    /// Sufficient statistics `(1/n) X^H X`, `(1/n) X^H Y`, `(1/n) |Y|^2`.
    pub fn gram(&self) -> GramProblem {
        let inv_n = 1.0 / self.n() as f64;
        GramProblem {
            gram: (self.design.adjoint() * &self.design).scale(inv_n),
            cross: (self.design.adjoint() * &self.response).scale(inv_n),
            response_energy: self.response.norm_squared() * inv_n,
            n: self.n(),
        }
    }

    /// CSV with interleaved real/imaginary columns:
    /// `y_re,y_im,x{j}_re,x{j}_im,...` where `j` is the node of each column.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        let mut header = vec!["y_re".to_string(), "y_im".to_string()];
        for &j in &self.column_nodes {
            header.push(format!("x{j}_re"));
            header.push(format!("x{j}_im"));
        }
        w.write_record(&header)?;
        for r in 0..self.n() {
            let mut rec = vec![format!("{:e}", self.response[r].re), format!("{:e}", self.response[r].im)];
            for l in 0..self.p() {
                rec.push(format!("{:e}", self.design[(r, l)].re));
                rec.push(format!("{:e}", self.design[(r, l)].im));
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))
    }
}

/// DFT at `frequency`, then the column-normalized design for `node`.
pub fn build_design(batch: &TrajectoryBatch, node: usize, frequency: f64) -> Result<SpectralDesign> {
    DftBatch::from_batch(batch, frequency).design(node)
}

impl GramProblem {
    /// Normalized sufficient statistics for `node` straight from an
    /// empirical PSD. Equal to `design(node).gram()` because each variable
    /// is scaled by its own column norm regardless of which node is the
    /// response.
    pub fn from_empirical_psd(psd: &CMatrix, node: usize, n: usize) -> Result<Self> {
        let p1 = psd.nrows();
        let scales: Vec<f64> = (0..p1).map(|j| psd[(j, j)].re.max(0.0).sqrt()).collect();
        if let Some(j) = scales.iter().position(|&s| s == 0.0) {
            return Err(Error::ZeroColumn { node: j });
        }
        let cols = column_nodes(p1, node);
        let at = |a: usize, b: usize| (psd[(a, b)] / (scales[a] * scales[b])).conj();
        Ok(GramProblem {
            gram: CMatrix::from_fn(cols.len(), cols.len(), |l, m| at(cols[l], cols[m])),
            cross: CVector::from_fn(cols.len(), |l, _| at(cols[l], node)),
            response_energy: 1.0,
            n,
        })
    }
}
