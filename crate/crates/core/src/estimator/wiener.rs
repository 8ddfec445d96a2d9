use super::WienerEstimate;
use crate::error::{Error, Result};
use crate::linalg::{column_nodes, CMatrix, CVector};
use crate::spectral::SpectralMatrix;

/// `W_i[j] = -K(i,j) / K(i,i)` for a precomputed inverse PSD `K`.
pub fn wiener_from_inverse(inv: &CMatrix, node: usize) -> Result<WienerEstimate> {
    let p1 = inv.nrows();
    if node >= p1 {
        return Err(Error::invalid("node", format!("{node} out of range for {p1} nodes")));
    }
    let kii = inv[(node, node)].re;
    if !(kii > 0.0) {
        return Err(Error::Singular(format!("inverse PSD diagonal at node {node} is {kii}")));
    }
    let cols = column_nodes(p1, node);
    let coefficients = CVector::from_fn(cols.len(), |l, _| -inv[(node, cols[l])] / kii);
    Ok(WienerEstimate {
        node,
        coefficients,
        lambda: 0.0,
        stats: None,
    })
}

fn require_pd(psd: &SpectralMatrix) -> Result<()> {
    let eig = psd.eigenvalues();
    match eig.first() {
        Some(&lo) if lo > 0.0 => Ok(()),
        Some(&lo) => Err(Error::Singular(format!("PSD has eigenvalue {lo:e}"))),
        None => Err(Error::invalid("psd", "empty matrix")),
    }
}

/// Limit Wiener filter from the inverse PSD.
pub fn exact_wiener(psd: &SpectralMatrix, node: usize) -> Result<WienerEstimate> {
    require_pd(psd)?;
    wiener_from_inverse(&psd.inverse()?, node)
}

/// Same filter as [`exact_wiener`] through the population normal equations
/// `conj(Phi_ibar) beta = conj(Phi_{ibar,i})`.
pub fn exact_wiener_regression(psd: &SpectralMatrix, node: usize) -> Result<WienerEstimate> {
    require_pd(psd)?;
    let p1 = psd.dim();
    if node >= p1 {
        return Err(Error::invalid("node", format!("{node} out of range for {p1} nodes")));
    }
    let cols = column_nodes(p1, node);
    let phi = &psd.matrix;
    let gram = CMatrix::from_fn(cols.len(), cols.len(), |a, b| phi[(cols[a], cols[b])].conj());
    let cross = CVector::from_fn(cols.len(), |a, _| phi[(cols[a], node)].conj());
    let coefficients = if cols.is_empty() {
        cross
    } else {
        gram.cholesky()
            .ok_or_else(|| Error::Singular("PSD sub-block".into()))?
            .solve(&cross)
    };
    Ok(WienerEstimate {
        node,
        coefficients,
        lambda: 0.0,
        stats: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{chain_graph, grid_graph, random_tree, two_hop_closure, Graph};
    use crate::model::{ModelSpec, WeightRule};
    use crate::spectral::{analytic_psd, SpectralKind};
    use num_complex::Complex64;
    use std::f64::consts::TAU;

    fn psd_of(m: CMatrix) -> SpectralMatrix {
        SpectralMatrix {
            frequency: 0.0,
            matrix: m,
            kind: SpectralKind::AnalyticPsd,
        }
    }

    #[test]
    fn diagonal_psd_has_zero_filter() {
        let phi = psd_of(CMatrix::from_diagonal(&CVector::from_vec(vec![
            Complex64::from(1.0),
            Complex64::from(2.5),
            Complex64::from(0.7),
        ])));
        for i in 0..3 {
            assert!(exact_wiener(&phi, i).unwrap().coefficients.camax() < 1e-15);
        }
    }

    #[test]
    fn two_by_two_inverse_formula() {
        let k = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(1.0, 1.0),
                Complex64::new(1.0, -1.0),
                Complex64::new(3.0, 0.0),
            ],
        );
        let w = wiener_from_inverse(&k, 0).unwrap();
        assert!((w.coefficients[0] - Complex64::new(-0.5, -0.5)).norm() < 1e-15);
        let phi = psd_of(k.try_inverse().unwrap());
        let w2 = exact_wiener(&phi, 0).unwrap();
        assert!((w2.coefficients[0] - Complex64::new(-0.5, -0.5)).norm() < 1e-12);
    }

    #[test]
    fn chain_support_and_imaginary_parts() {
        let g = chain_graph(3).unwrap();
        let m = ModelSpec::default().build(&g).unwrap();
        let phi = analytic_psd(&m, TAU / 64.0).unwrap();
        let w = exact_wiener(&phi, 0).unwrap();
        assert!(w.coefficient_of(1).unwrap().norm() > 1e-8);
        assert!(w.coefficient_of(2).unwrap().norm() > 1e-8);
        assert!(w.coefficient_of(1).unwrap().im.abs() > 1e-8);
        assert!(w.coefficient_of(2).unwrap().im.abs() < 1e-12);
    }

    fn check_oracle_support(g: &Graph, spec: &ModelSpec) {
        let m = spec.build(g).unwrap();
        let em = two_hop_closure(g);
        let phi = analytic_psd(&m, TAU / 50.0).unwrap();
        let scale = phi.matrix.camax();
        for i in 0..g.node_count() {
            let a = exact_wiener(&phi, i).unwrap();
            let b = exact_wiener_regression(&phi, i).unwrap();
            assert!((&a.coefficients - &b.coefficients).camax() <= 1e-10 * scale.max(1.0));
            for j in (0..g.node_count()).filter(|&j| j != i) {
                let c = a.coefficient_of(j).unwrap();
                assert_eq!(c.norm() > 1e-8, em.contains(i, j), "support ({i},{j})");
                assert_eq!(c.im.abs() > 1e-8, g.has_edge(i, j), "imag ({i},{j})");
            }
        }
    }

    #[test]
    fn oracle_support_on_random_models() {
        for seed in 0..4u64 {
            let spec = ModelSpec {
                weights: WeightRule::Random { seed },
                target_radius: 0.5 + 0.1 * seed as f64,
                ..ModelSpec::default()
            };
            check_oracle_support(&grid_graph(3, 4).unwrap(), &spec);
            check_oracle_support(&random_tree(9, seed).unwrap(), &spec);
        }
        check_oracle_support(&grid_graph(5, 5).unwrap(), &ModelSpec::default());
    }

    #[test]
    fn singular_psd_is_rejected() {
        let phi = psd_of(CMatrix::from_element(2, 2, Complex64::from(1.0)));
        assert!(matches!(exact_wiener(&phi, 0), Err(Error::Singular(_))));
    }
}
