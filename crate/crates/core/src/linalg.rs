//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// `(M + M^H) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigenvalues of a Hermitian matrix in ascending order. Only the Hermitian
/// part of `m` is used.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

pub fn spectral_norm_real(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Eigenvalues of a real square matrix. The unshifted Schur iteration can
/// stall on spectra symmetric about zero, so a few diagonal shifts are
/// tried in turn.
pub fn real_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    for shift in [0.0, 0.137, -0.291, 0.523, -0.711] {
        let s = shift * scale;
        let shifted = m + DMatrix::identity(n, n) * s;
        if let Some(schur) = shifted.try_schur(f64::EPSILON, 10_000) {
            return Ok(schur.complex_eigenvalues().iter().map(|z| z - s).collect());
        }
    }
    // Complex shifts break the real symmetry that stalls the real iteration.
    let c = to_complex(m);
    for shift in [Complex64::new(0.0, 0.173), Complex64::new(0.11, -0.29), Complex64::new(-0.37, 0.41)] {
        let s = shift * scale;
        let shifted = &c + CMatrix::identity(n, n) * s;
        if let Some(vals) = shifted.try_schur(f64::EPSILON, 10_000).and_then(|sc| sc.eigenvalues()) {
            return Ok(vals.iter().map(|z| z - s).collect());
        }
    }
    Err(Error::Singular("eigenvalue iteration did not converge".into()))
}

/// Spectral radius of a real square matrix; infinite if the eigenvalue
/// iteration fails.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    match real_eigenvalues(m) {
        Ok(vals) => vals.iter().map(|z| z.norm()).fold(0.0, f64::max),
        Err(_) => f64::INFINITY,
    }
}

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Inverse via LU; fails when the matrix is numerically singular.
pub fn inverse(m: &CMatrix, what: &str) -> Result<CMatrix> {
    let n = m.nrows();
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Singular(format!("{what}: zero or non-finite matrix")));
    }
    let lu = m.clone().lu();
    let inv = lu
        .try_inverse()
        .ok_or_else(|| Error::Singular(format!("{what}: LU pivot vanished")))?;
    // Reject matrices whose inverse is dominated by round-off.
    let residual = (m * &inv - CMatrix::identity(n, n))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if !residual.is_finite() || residual > 1e-6 {
        return Err(Error::Singular(format!(
            "{what}: inverse residual {residual:e}"
        )));
    }
    Ok(inv)
}

/// Moore-Penrose pseudo-inverse with a relative singular value cutoff.
pub fn pseudo_inverse(m: &CMatrix) -> CMatrix {
    if m.is_empty() {
        return CMatrix::zeros(m.ncols(), m.nrows());
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = smax * 1e-12 * m.nrows().max(m.ncols()) as f64;
    svd.pseudo_inverse(cutoff.max(f64::MIN_POSITIVE))
        .expect("pseudo-inverse cutoff is non-negative")
}

/// Largest eigenvalue of a Hermitian positive semidefinite matrix by power
/// iteration, stopping after `max_iters` or once the relative change drops
/// below `rel_tol`.
pub fn power_iteration(m: &CMatrix, max_iters: usize, rel_tol: f64) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    // Deterministic start with no special alignment to a coordinate axis.
    let mut v = CVector::from_fn(n, |k, _| Complex64::new(1.0 + 0.1 * k as f64, 0.05 * k as f64));
    v /= Complex64::from(v.norm());
    let mut estimate = 0.0_f64;
    for _ in 0..max_iters {
        let w = m * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dotc(&w).re;
        v = w / Complex64::from(norm);
        let done = estimate > 0.0 && ((next - estimate).abs() <= rel_tol * next.abs());
        estimate = next;
        if done {
            break;
        }
    }
    // Rayleigh quotient at the final iterate.
    let w = m * &v;
    estimate.max(v.dotc(&w).re)
}

/// Entrywise maximum modulus.
pub fn max_abs(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn l1_norm(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm()).sum()
}

/// Indices `0..node_count` without `node`; column `l` of node `node`'s
/// design holds node `column_nodes(..)[l]`.
pub fn column_nodes(node_count: usize, node: usize) -> Vec<usize> {
    (0..node_count).filter(|&j| j != node).collect()
}

/// Design column of node `j` in the regression for node `node`.
pub fn column_of(node: usize, j: usize) -> Option<usize> {
    match j.cmp(&node) {
        std::cmp::Ordering::Less => Some(j),
        std::cmp::Ordering::Equal => None,
        std::cmp::Ordering::Greater => Some(j - 1),
    }
}

/// Removes row and column `k`.
pub fn remove_index(m: &CMatrix, k: usize) -> CMatrix {
    m.clone().remove_row(k).remove_column(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_iteration_matches_eigendecomposition() {
        let a = CMatrix::from_fn(4, 3, |r, c| Complex64::new((r + 2 * c) as f64 * 0.3 - 0.5, (r * c) as f64 * 0.1));
        let g = a.adjoint() * &a;
        let top = *hermitian_eigenvalues(&g).last().unwrap();
        assert!((power_iteration(&g, 500, 1e-14) - top).abs() < 1e-9 * top);
    }

    #[test]
    fn column_mapping_round_trips() {
        let cols = column_nodes(5, 2);
        assert_eq!(cols, vec![0, 1, 3, 4]);
        for (l, &j) in cols.iter().enumerate() {
            assert_eq!(column_of(2, j), Some(l));
        }
        assert_eq!(column_of(2, 2), None);
    }

    #[test]
    fn inverse_rejects_singular() {
        let m = CMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        assert!(inverse(&m, "ones").is_err());
        let m = CMatrix::identity(3, 3) * Complex64::new(2.0, 0.0);
        let inv = inverse(&m, "diag").unwrap();
        assert!((inv[(1, 1)].re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn spectral_radius_of_rotation() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0]);
        assert!((spectral_radius(&m) - 0.5).abs() < 1e-12);
    }
}
