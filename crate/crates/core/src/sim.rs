//! Seeded Monte Carlo sampling of chain paths and partial sums.
//!
//! Samples are produced in fixed-size tasks; task `k` draws from the ChaCha8
//! stream `k` of the master seed, so the sample multiset depends only on the
//! seed and the count, never on the worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::ChainSpec;
use crate::error::{Error, Result};
use crate::numeric::TestKernel;
use crate::observables::{WindowObservable, INTEGER_TOL};

pub const TASK_SIZE: usize = 4096;
pub const BATCHES: usize = 32;

pub fn task_rng(master: u64, task: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(task);
    rng
}

/// Inverse-CDF sampler for a chain.
#[derive(Clone, Debug)]
pub struct Sampler {
    initial: Vec<f64>,
    steps: Vec<Vec<Vec<f64>>>,
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

fn draw(cum: &[f64], u: f64) -> usize {
    let u = u * cum[cum.len() - 1];
    cum.partition_point(|&c| c <= u).min(cum.len() - 1)
}

impl Sampler {
    pub fn new(chain: &ChainSpec) -> Self {
        Sampler {
            initial: cumulative(chain.initial()),
            steps: (0..chain.horizon())
                .map(|j| chain.kernel(j).iter().map(|row| cumulative(row)).collect())
                .collect(),
        }
    }

    /// Path `x_0..x_{len-1}`.
    pub fn path_into(&self, rng: &mut impl Rng, out: &mut Vec<usize>, len: usize) {
        out.clear();
        let mut x = draw(&self.initial, rng.random());
        out.push(x);
        for j in 0..len - 1 {
            x = draw(&self.steps[j][x], rng.random());
            out.push(x);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamRecord {
    pub task: u64,
    pub first: usize,
    pub count: usize,
}

fn streams(count: usize) -> Vec<StreamRecord> {
    (0..count.div_ceil(TASK_SIZE))
        .map(|k| StreamRecord { task: k as u64, first: k * TASK_SIZE, count: TASK_SIZE.min(count - k * TASK_SIZE) })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathBatch {
    pub seed: u64,
    pub paths: Vec<Vec<usize>>,
    pub streams: Vec<StreamRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub seed: u64,
    pub count: usize,
    pub values: Vec<f64>,
    pub streams: Vec<StreamRecord>,
}

/// Full paths `x_0..=x_N`.
pub fn sample_paths(chain: &ChainSpec, count: usize, seed: u64) -> PathBatch {
    let sampler = Sampler::new(chain);
    let len = chain.horizon() + 1;
    let streams = streams(count);
    let paths = streams
        .par_iter()
        .map(|s| {
            let mut rng = task_rng(seed, s.task);
            (0..s.count)
                .map(|_| {
                    let mut p = Vec::with_capacity(len);
                    sampler.path_into(&mut rng, &mut p, len);
                    p
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    PathBatch { seed, paths, streams }
}

/// One statistic per sampled path prefix of length `len`.
pub fn sample_statistic(
    chain: &ChainSpec,
    len: usize,
    count: usize,
    seed: u64,
    stat: impl Fn(&[usize]) -> f64 + Sync,
) -> Result<SampleBatch> {
    if len == 0 || len > chain.horizon() + 1 {
        return Err(Error::InvalidArgument(format!("path length {len} outside 1..={}", chain.horizon() + 1)));
    }
    let sampler = Sampler::new(chain);
    let streams = streams(count);
    let values = streams
        .par_iter()
        .map(|s| {
            let mut rng = task_rng(seed, s.task);
            let mut p = Vec::with_capacity(len);
            (0..s.count)
                .map(|_| {
                    sampler.path_into(&mut rng, &mut p, len);
                    stat(&p)
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(SampleBatch { seed, count, values, streams })
}

/// Samples of `S_n f`.
pub fn sample_sums(chain: &ChainSpec, f: &WindowObservable, n: usize, count: usize, seed: u64) -> Result<SampleBatch> {
    if n == 0 || n > f.len() {
        return Err(Error::InvalidArgument(format!("n = {n} outside 1..={}", f.len())));
    }
    let len = (f.reach(n) + 1).min(chain.horizon() + 1);
    sample_statistic(chain, len, count, seed, |p| f.partial_sum(p, n))
}

/// Mean and batch-means standard error.
pub fn batch_mean(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let b = BATCHES.min(n);
    if b < 2 {
        return (mean, f64::INFINITY);
    }
    let size = n / b;
    let means: Vec<f64> = (0..b).map(|k| xs[k * size..(k + 1) * size].iter().sum::<f64>() / size as f64).collect();
    let m = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (b - 1) as f64;
    (mean, (var / b as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalEstimate {
    pub u: f64,
    pub mean: f64,
    pub se: f64,
    pub hits: usize,
    /// Fewer than `min_hits` samples landed in the kernel support.
    pub flagged: bool,
}

/// Estimates of `E g(S - u)` for each `u`.
pub fn empirical_local_counts(batch: &SampleBatch, g: &TestKernel, u_grid: &[f64], min_hits: usize) -> Vec<LocalEstimate> {
    u_grid
        .par_iter()
        .map(|&u| {
            let ys: Vec<f64> = batch.values.iter().map(|&s| g.eval(s - u)).collect();
            let hits = ys.iter().filter(|&&y| y != 0.0).count();
            let (mean, se) = batch_mean(&ys);
            LocalEstimate { u, mean, se, hits, flagged: hits < min_hits }
        })
        .collect()
}

/// Empirical `P(S = u)` for integer-valued samples.
pub fn lattice_frequencies(batch: &SampleBatch) -> Result<Vec<(i64, f64)>> {
    let mut counts = std::collections::BTreeMap::new();
    for &v in &batch.values {
        let r = v.round();
        if (v - r).abs() > 1e-9 {
            return Err(Error::InvalidObservable(format!("sample {v} is not an integer")));
        }
        *counts.entry(r as i64).or_insert(0usize) += 1;
    }
    let n = batch.values.len() as f64;
    Ok(counts.into_iter().map(|(k, c)| (k, c as f64 / n)).collect())
}

/// Empirical marginal laws of `X_j` for every `j`.
pub fn empirical_marginals(chain: &ChainSpec, batch: &PathBatch) -> Vec<Vec<f64>> {
    let n = batch.paths.len() as f64;
    (0..=chain.horizon())
        .map(|j| {
            let mut m = vec![0.0; chain.size(j)];
            for p in &batch.paths {
                m[p[j]] += 1.0;
            }
            m.iter().map(|c| c / n).collect()
        })
        .collect()
}

/// True when all sampled values are integers.
pub fn integer_samples(batch: &SampleBatch) -> bool {
    batch.values.iter().all(|v| (v - v.round()).abs() <= INTEGER_TOL.max(1e-9))
}
