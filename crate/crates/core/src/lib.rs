//! Topology learning for networked linear dynamical systems driven by
//! colored noise.
//!
//! The pipeline simulates trajectories ([`sim`]), turns them into per-node
//! complex regressions at one frequency ([`spectral`]), estimates sparse
//! Wiener filters ([`estimator`]) and decodes edges from their imaginary
//! parts. [`theory`] evaluates the sufficient sample sizes and [`harness`]
//! runs repeated experiments.

pub mod error;
pub mod estimator;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod sim;
pub mod spectral;
pub mod theory;

pub use error::{Error, Result};
pub use estimator::{
    exact_wiener, solve_regularized_wiener, threshold_topology, GramProblem, RecoveryResult, SolverOptions,
    WienerEstimate,
};
pub use graph::{chain_graph, complete_graph, grid_graph, random_tree, two_hop_closure, Graph, Pair, TwoHopSet};
pub use linalg::{CMatrix, CVector};
pub use model::{LdsModel, MaCoefficients, ModelSpec, WeightRule};
pub use sim::{simulate, simulate_dft, Regime, TrajectoryBatch};
pub use spectral::{
    analytic_autocorr, analytic_psd, build_design, dft_coefficient, expected_finite_psd, SpectralDesign,
    SpectralMatrix,
};
pub use theory::{bound_lambda_and_n, bound_n_min, compute_constants, ModelConstants, TheoryBounds};
