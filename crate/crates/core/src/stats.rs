//! Deterministic accumulation of Monte Carlo moments.
//!
//! Replications are grouped into fixed-size chunks; each chunk is summed
//! sequentially and chunk results are merged by a pairwise tree in chunk
//! order. The result is bit-identical for any worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const CHUNK: u64 = 4096;

/// Running sums for `k` jointly sampled outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub sum: Vec<f64>,
    /// Row-major `k × k` sums of products.
    pub cross: Vec<f64>,
}

impl Moments {
    pub fn new(k: usize) -> Self {
        Self {
            count: 0,
            sum: vec![0.0; k],
            cross: vec![0.0; k * k],
        }
    }

    pub fn dim(&self) -> usize {
        self.sum.len()
    }

    pub fn push(&mut self, x: &[f64]) {
        let k = self.dim();
        self.count += 1;
        for i in 0..k {
            self.sum[i] += x[i];
            for j in 0..k {
                self.cross[i * k + j] += x[i] * x[j];
            }
        }
    }

    pub fn merge(mut self, other: &Moments) -> Self {
        self.count += other.count;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.cross.iter_mut().zip(&other.cross) {
            *a += b;
        }
        self
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.sum[i] / self.count as f64
    }

    /// Sample covariance of outputs `i` and `j`.
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        let n = self.count as f64;
        if self.count < 2 {
            return 0.0;
        }
        let k = self.dim();
        ((self.cross[i * k + j] - self.sum[i] * self.sum[j] / n) / (n - 1.0)).max(if i == j {
            0.0
        } else {
            f64::NEG_INFINITY
        })
    }

    /// Standard error of the mean of output `i`.
    pub fn std_error(&self, i: usize) -> f64 {
        (self.covariance(i, i) / self.count as f64).sqrt()
    }

    pub fn estimate(&self, i: usize, seed: u64) -> RevenueEstimate {
        RevenueEstimate {
            mean: self.mean(i),
            std_error: self.std_error(i),
            n_samples: self.count,
            seed,
        }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevenueEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl RevenueEstimate {
    /// `|mean − target| ≤ sigmas · std_error`.
    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        (self.mean - target).abs() <= sigmas * self.std_error
    }
}

fn tree_merge(mut parts: Vec<Moments>, k: usize) -> Moments {
    if parts.is_empty() {
        return Moments::new(k);
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a.merge(&b)),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop().unwrap()
}

/// Runs `n` replications of `sample`, which writes `k` outputs for
/// replication index `i` into the provided buffer.
pub fn replicate<F>(n: u64, k: usize, sample: F) -> Moments
where
    F: Fn(u64, &mut [f64]) + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut m = Moments::new(k);
            let mut buf = vec![0.0; k];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                sample(i, &mut buf);
                m.push(&buf);
            }
            m
        })
        .collect();
    tree_merge(parts, k)
}

/// Fallible variant of [`replicate`]; the first error in index order wins.
pub fn try_replicate<F, E>(n: u64, k: usize, sample: F) -> Result<Moments, E>
where
    F: Fn(u64, &mut [f64]) -> Result<(), E> + Sync,
    E: Send,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Result<Vec<Moments>, E> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut m = Moments::new(k);
            let mut buf = vec![0.0; k];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                sample(i, &mut buf)?;
                m.push(&buf);
            }
            Ok(m)
        })
        .collect();
    Ok(tree_merge(parts?, k))
}
