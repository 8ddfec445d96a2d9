//! Simulation of the networked LDS under MA(1) excitation, in the two
//! recording regimes.
//!
//! Every node draws its innovations `w_i(k)` from its own ChaCha stream,
//! keyed by `(seed, regime, trajectory)` and selected by node index, so
//! trajectories can be generated in any order or in parallel and still be
//! bit-identical.

mod io;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::LdsModel;
use crate::spectral::{DftBatch, Twiddles};

pub use io::{load_batch, read_batch, save_batch, write_batch, write_batch_csv};

/// How the `n` trajectories are recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Independent trajectories, each with its own burn-in (i.i.d. rows).
    RestartRecord,
    /// Contiguous windows of a single long run (correlated rows).
    Consecutive,
}

impl Regime {
    pub fn tag(self) -> u8 {
        match self {
            Regime::RestartRecord => 0,
            Regime::Consecutive => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Regime::RestartRecord),
            1 => Some(Regime::Consecutive),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Regime::RestartRecord => "iid",
            Regime::Consecutive => "consecutive",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid" | "restart_record" | "restart-record" => Ok(Regime::RestartRecord),
            "consecutive" => Ok(Regime::Consecutive),
            other => Err(Error::invalid("regime", format!("unknown regime `{other}`"))),
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// `n` trajectories of `N` samples over all nodes, stored row-major as
/// `[trajectory][sample][node]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBatch {
    pub regime: Regime,
    pub n: usize,
    pub trajectory_len: usize,
    pub node_count: usize,
    pub seed: u64,
    pub burn_in: usize,
    pub data: Vec<f64>,
}

impl TrajectoryBatch {
    pub fn sample(&self, r: usize, k: usize, i: usize) -> f64 {
        self.data[(r * self.trajectory_len + k) * self.node_count + i]
    }

    /// Samples of trajectory `r`, `N x (p+1)` row-major.
    pub fn trajectory(&self, r: usize) -> &[f64] {
        let len = self.trajectory_len * self.node_count;
        &self.data[r * len..(r + 1) * len]
    }

    /// Time series of node `i` in trajectory `r`.
    pub fn series(&self, r: usize, i: usize) -> Vec<f64> {
        (0..self.trajectory_len).map(|k| self.sample(r, k, i)).collect()
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Identifies one independent innovation stream family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub regime: Regime,
    pub trajectory: u64,
}

impl StreamKey {
    fn base(&self) -> u64 {
        splitmix(splitmix(splitmix(self.seed) ^ u64::from(self.regime.tag() + 1)) ^ self.trajectory)
    }
}

/// Derives an independent sub-seed, e.g. one per Monte Carlo trial.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix(splitmix(master) ^ splitmix(index.wrapping_add(0xA5A5)))
}

/// MA(1) excitation generator: one ChaCha stream per node.
pub struct NoiseStream {
    rngs: Vec<ChaCha8Rng>,
    prev: Vec<f64>,
    gain: Vec<f64>,
    theta0: f64,
    theta1: f64,
}

impl NoiseStream {
    pub fn new(model: &LdsModel, key: StreamKey) -> Self {
        let base = key.base();
        let mut rngs: Vec<ChaCha8Rng> = (0..model.node_count())
            .map(|node| {
                let mut rng = ChaCha8Rng::seed_from_u64(base);
                rng.set_stream(node as u64);
                rng
            })
            .collect();
        let prev = rngs
            .iter_mut()
            .map(|rng| StandardNormal.sample(rng))
            .collect();
        let ma = model.ma();
        Self {
            rngs,
            prev,
            gain: model.noise_gain().iter().copied().collect(),
            theta0: ma.theta0,
            theta1: ma.theta1,
        }
    }

    /// Fills `out` with the next excitation vector `e(k)`.
    pub fn next_into(&mut self, out: &mut [f64]) {
        for (i, rng) in self.rngs.iter_mut().enumerate() {
            let w: f64 = StandardNormal.sample(rng);
            out[i] = self.gain[i] * (self.theta0 * w + self.theta1 * self.prev[i]);
            self.prev[i] = w;
        }
    }
}

/// `length x (p+1)` matrix of excitation samples from the stream `key`.
pub fn sample_noise(model: &LdsModel, length: usize, key: StreamKey) -> Result<DMatrix<f64>> {
    if length == 0 {
        return Err(Error::invalid("length", "must be at least 1"));
    }
    let p1 = model.node_count();
    let mut stream = NoiseStream::new(model, key);
    let mut out = DMatrix::zeros(length, p1);
    let mut e = vec![0.0; p1];
    for k in 0..length {
        stream.next_into(&mut e);
        for i in 0..p1 {
            out[(k, i)] = e[i];
        }
    }
    Ok(out)
}

/// Sparse row representation of `h` used by the time stepper.
struct Propagator {
    rows: Vec<Vec<(usize, f64)>>,
}

impl Propagator {
    fn new(model: &LdsModel) -> Self {
        let h = model.h();
        let rows = (0..h.nrows())
            .map(|i| {
                (0..h.ncols())
                    .filter(|&j| h[(i, j)] != 0.0)
                    .map(|j| (j, h[(i, j)]))
                    .collect()
            })
            .collect();
        Self { rows }
    }

    /// `next = h x + e`.
    fn step(&self, x: &[f64], e: &[f64], next: &mut [f64]) {
        for (i, row) in self.rows.iter().enumerate() {
            let mut acc = e[i];
            for &(j, w) in row {
                acc += w * x[j];
            }
            next[i] = acc;
        }
    }
}

/// Runs one chain from the zero state: `burn_in` unrecorded steps, then
/// calls `sink(k, x)` for `steps` recorded samples.
fn run_chain(
    model: &LdsModel,
    prop: &Propagator,
    key: StreamKey,
    burn_in: usize,
    steps: usize,
    mut sink: impl FnMut(usize, &[f64]),
) {
    let p1 = model.node_count();
    let mut noise = NoiseStream::new(model, key);
    let mut x = vec![0.0; p1];
    let mut next = vec![0.0; p1];
    let mut e = vec![0.0; p1];
    for _ in 0..burn_in {
        noise.next_into(&mut e);
        prop.step(&x, &e, &mut next);
        std::mem::swap(&mut x, &mut next);
    }
    for k in 0..steps {
        sink(k, &x);
        noise.next_into(&mut e);
        prop.step(&x, &e, &mut next);
        std::mem::swap(&mut x, &mut next);
    }
}

fn validate(model: &LdsModel, graph: &Graph, n: usize, trajectory_len: usize) -> Result<()> {
    model.check_support(graph)?;
    if n == 0 {
        return Err(Error::invalid("n", "need at least one trajectory"));
    }
    if trajectory_len == 0 {
        return Err(Error::invalid("N", "need at least one sample per trajectory"));
    }
    Ok(())
}

/// Simulates `n` trajectories of length `trajectory_len`.
pub fn simulate(
    model: &LdsModel,
    graph: &Graph,
    regime: Regime,
    n: usize,
    trajectory_len: usize,
    seed: u64,
) -> Result<TrajectoryBatch> {
    validate(model, graph, n, trajectory_len)?;
    let p1 = model.node_count();
    let burn_in = model.burn_in();
    let prop = Propagator::new(model);
    let stride = trajectory_len * p1;
    let mut data = vec![0.0; n * stride];
    match regime {
        Regime::RestartRecord => {
            data.par_chunks_mut(stride).enumerate().for_each(|(r, chunk)| {
                let key = StreamKey {
                    seed,
                    regime,
                    trajectory: r as u64,
                };
                run_chain(model, &prop, key, burn_in, trajectory_len, |k, x| {
                    chunk[k * p1..(k + 1) * p1].copy_from_slice(x);
                });
            });
        }
        Regime::Consecutive => {
            let key = StreamKey {
                seed,
                regime,
                trajectory: 0,
            };
            run_chain(model, &prop, key, burn_in, n * trajectory_len, |k, x| {
                data[k * p1..(k + 1) * p1].copy_from_slice(x);
            });
        }
    }
    Ok(TrajectoryBatch {
        regime,
        n,
        trajectory_len,
        node_count: p1,
        seed,
        burn_in,
        data,
    })
}

/// Same trajectories as [`simulate`], reduced on the fly to their DFT
/// coefficients at frequency `f`. Memory is `O(n (p+1))` instead of
/// `O(n N (p+1))`.
pub fn simulate_dft(
    model: &LdsModel,
    graph: &Graph,
    regime: Regime,
    n: usize,
    trajectory_len: usize,
    frequency: f64,
    seed: u64,
) -> Result<DftBatch> {
    validate(model, graph, n, trajectory_len)?;
    let p1 = model.node_count();
    let burn_in = model.burn_in();
    let prop = Propagator::new(model);
    let tw = Twiddles::new(trajectory_len, frequency);
    let mut rows = vec![Complex64::new(0.0, 0.0); n * p1];
    match regime {
        Regime::RestartRecord => {
            rows.par_chunks_mut(p1).enumerate().for_each(|(r, row)| {
                let key = StreamKey {
                    seed,
                    regime,
                    trajectory: r as u64,
                };
                run_chain(model, &prop, key, burn_in, trajectory_len, |k, x| {
                    tw.accumulate(k, x, row);
                });
                tw.finish(row);
            });
        }
        Regime::Consecutive => {
            let key = StreamKey {
                seed,
                regime,
                trajectory: 0,
            };
            run_chain(model, &prop, key, burn_in, n * trajectory_len, |t, x| {
                let (r, k) = (t / trajectory_len, t % trajectory_len);
                tw.accumulate(k, x, &mut rows[r * p1..(r + 1) * p1]);
            });
            rows.chunks_mut(p1).for_each(|row| tw.finish(row));
        }
    }
    Ok(DftBatch::new(frequency, trajectory_len, p1, rows))
}
