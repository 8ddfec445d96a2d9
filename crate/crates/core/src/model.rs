//! Ground-truth networked LDS models driven by MA(1) excitation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::spectral_radius;

/// Models with spectral radius at or above `1 - STABILITY_MARGIN` are rejected.
pub const STABILITY_MARGIN: f64 = 1e-6;

/// Moving-average coefficients of the per-node excitation
/// `e_i(k) = gain_i * (theta0 * w_i(k) + theta1 * w_i(k - 1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaCoefficients {
    pub theta0: f64,
    pub theta1: f64,
}

impl MaCoefficients {
    pub const WHITE: Self = Self {
        theta0: 1.0,
        theta1: 0.0,
    };

    /// `w(k) - 0.3 w(k-1)`.
    pub const DEFAULT_COLORED: Self = Self {
        theta0: 1.0,
        theta1: -0.3,
    };

    /// `|theta0 + theta1 e^{-i f}|^2`.
    pub fn power_at(&self, f: f64) -> f64 {
        self.theta0 * self.theta0
            + self.theta1 * self.theta1
            + 2.0 * self.theta0 * self.theta1 * f.cos()
    }
}

impl Default for MaCoefficients {
    fn default() -> Self {
        Self::DEFAULT_COLORED
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdsModel {
    h: DMatrix<f64>,
    noise_gain: DVector<f64>,
    ma: MaCoefficients,
    radius: f64,
}

impl LdsModel {
    pub fn new(h: DMatrix<f64>, noise_gain: DVector<f64>, ma: MaCoefficients) -> Result<Self> {
        if !h.is_square() || h.nrows() == 0 {
            return Err(Error::invalid("h", "must be a non-empty square matrix"));
        }
        if noise_gain.len() != h.nrows() {
            return Err(Error::invalid(
                "noise_gain",
                format!("length {} does not match {} nodes", noise_gain.len(), h.nrows()),
            ));
        }
        if noise_gain.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
            return Err(Error::invalid("noise_gain", "entries must be positive and finite"));
        }
        if h.iter().any(|x| !x.is_finite()) || !ma.theta0.is_finite() || !ma.theta1.is_finite() {
            return Err(Error::NonFinite);
        }
        if ma.theta0 == 0.0 && ma.theta1 == 0.0 {
            return Err(Error::invalid("ma", "excitation must not vanish"));
        }
        let radius = spectral_radius(&h);
        if radius >= 1.0 - STABILITY_MARGIN {
            return Err(Error::Unstable {
                radius,
                limit: 1.0 - STABILITY_MARGIN,
            });
        }
        Ok(Self {
            h,
            noise_gain,
            ma,
            radius,
        })
    }

    /// `x(k+1) = h x(k) + w(k)` with unit white noise.
    pub fn white(h: DMatrix<f64>) -> Result<Self> {
        let n = h.nrows();
        Self::new(h, DVector::from_element(n, 1.0), MaCoefficients::WHITE)
    }

    pub fn node_count(&self) -> usize {
        self.h.nrows()
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn noise_gain(&self) -> &DVector<f64> {
        &self.noise_gain
    }

    pub fn ma(&self) -> MaCoefficients {
        self.ma
    }

    pub fn spectral_radius(&self) -> f64 {
        self.radius
    }

    /// Checks that the off-diagonal pattern of `h` is exactly the edge set
    /// of `graph` (both directions non-zero on every edge).
    pub fn check_support(&self, graph: &Graph) -> Result<()> {
        let n = self.node_count();
        if graph.node_count() != n {
            return Err(Error::SupportMismatch(format!(
                "graph has {} nodes, model has {n}",
                graph.node_count()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let nonzero = self.h[(i, j)] != 0.0;
                if nonzero != graph.has_edge(i, j) {
                    return Err(Error::SupportMismatch(format!(
                        "h[{i},{j}] = {} but edge present = {}",
                        self.h[(i, j)],
                        graph.has_edge(i, j)
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of burn-in steps `K` with `rho(h)^K < 1e-8`, at least one.
    pub fn burn_in(&self) -> usize {
        if self.radius < 1e-300 {
            return 1;
        }
        let k = (1e-8_f64.ln() / self.radius.ln()).ceil();
        (k as usize).max(1)
    }

    /// Short content hash identifying the model parameters.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.node_count() as u64).to_le_bytes());
        for x in self.h.iter().chain(self.noise_gain.iter()) {
            hasher.update(x.to_le_bytes());
        }
        hasher.update(self.ma.theta0.to_le_bytes());
        hasher.update(self.ma.theta1.to_le_bytes());
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// How edge weights of `h` are generated on a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WeightRule {
    /// `h_ij = +1` for `i < j`, `-1` for `i > j` on every edge, so each edge
    /// has a maximally asymmetric coupling pair.
    Antisymmetric,
    /// Independent weights with uniform magnitude in `[0.3, 1]` and random
    /// sign for every directed coupling, drawn from `seed`.
    Random { seed: u64 },
}

/// Parameters for building an [`LdsModel`] on a graph. After the rule fills
/// in unit-scale weights, `h` is rescaled so its spectral radius equals
/// `target_radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub weights: WeightRule,
    /// Diagonal entry `h_ii` before rescaling, relative to unit coupling.
    #[serde(default = "default_self_weight")]
    pub self_weight: f64,
    pub target_radius: f64,
    #[serde(default)]
    pub ma: MaCoefficients,
    #[serde(default = "default_gain")]
    pub gain: f64,
}

fn default_self_weight() -> f64 {
    0.5
}

fn default_gain() -> f64 {
    1.0
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            weights: WeightRule::Antisymmetric,
            self_weight: default_self_weight(),
            target_radius: 0.6,
            ma: MaCoefficients::DEFAULT_COLORED,
            gain: default_gain(),
        }
    }
}

impl ModelSpec {
    pub fn build(&self, graph: &Graph) -> Result<LdsModel> {
        if !(self.target_radius >= 0.0 && self.target_radius < 1.0 - STABILITY_MARGIN) {
            return Err(Error::invalid(
                "target_radius",
                format!("{} is outside [0, 1)", self.target_radius),
            ));
        }
        let n = graph.node_count();
        let mut h = DMatrix::from_diagonal_element(n, n, self.self_weight);
        match &self.weights {
            WeightRule::Antisymmetric => {
                for &(i, j) in graph.edges() {
                    h[(i, j)] = 1.0;
                    h[(j, i)] = -1.0;
                }
            }
            WeightRule::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let draw = |rng: &mut ChaCha8Rng| {
                    let mag = rng.random_range(0.3..=1.0);
                    if rng.random_bool(0.5) {
                        mag
                    } else {
                        -mag
                    }
                };
                for &(i, j) in graph.edges() {
                    h[(i, j)] = draw(&mut rng);
                    h[(j, i)] = draw(&mut rng);
                }
            }
        }
        let radius = spectral_radius(&h);
        if radius > 0.0 {
            h *= self.target_radius / radius;
        }
        LdsModel::new(h, DVector::from_element(n, self.gain), self.ma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{chain_graph, grid_graph};

    #[test]
    fn rejects_unstable_and_bad_gain() {
        let h = DMatrix::from_diagonal_element(2, 2, 1.0);
        assert!(matches!(LdsModel::white(h), Err(Error::Unstable { .. })));
        let h = DMatrix::zeros(2, 2);
        let gain = DVector::from_vec(vec![1.0, 0.0]);
        assert!(LdsModel::new(h, gain, MaCoefficients::WHITE).is_err());
    }

    #[test]
    fn spec_builds_scaled_model_with_graph_support() {
        let g = grid_graph(3, 3).unwrap();
        for weights in [WeightRule::Antisymmetric, WeightRule::Random { seed: 3 }] {
            let spec = ModelSpec {
                weights,
                target_radius: 0.7,
                ..ModelSpec::default()
            };
            let m = spec.build(&g).unwrap();
            assert!((m.spectral_radius() - 0.7).abs() < 1e-9);
            m.check_support(&g).unwrap();
        }
    }

    #[test]
    fn support_mismatch_detected() {
        let g = chain_graph(3).unwrap();
        let m = ModelSpec::default().build(&g).unwrap();
        let other = crate::graph::complete_graph(3).unwrap();
        assert!(matches!(m.check_support(&other), Err(Error::SupportMismatch(_))));
    }

    #[test]
    fn burn_in_matches_decay_target() {
        let m = LdsModel::white(DMatrix::from_diagonal_element(1, 1, 0.7)).unwrap();
        let k = m.burn_in();
        assert!(0.7_f64.powi(k as i32) < 1e-8);
        assert!(0.7_f64.powi(k as i32 - 1) >= 1e-8);
        assert_eq!(LdsModel::white(DMatrix::zeros(2, 2)).unwrap().burn_in(), 1);
    }

    #[test]
    fn ma_power_expansion() {
        let ma = MaCoefficients::DEFAULT_COLORED;
        for f in [0.0, 0.4, 2.0] {
            assert!((ma.power_at(f) - (1.09 - 0.6 * f64::cos(f))).abs() < 1e-14);
        }
    }
}
