//! Replica-parallel map/reduce with a fixed reduction order.
//!
//! Replicas are cut into fixed-size chunks; each chunk folds its replicas in
//! index order and chunks are merged in chunk order. The result depends only on
//! the seed and replica count, never on the thread count.

use rayon::prelude::*;

use crate::error::{invalid, Result};

const CHUNK: u64 = 256;

pub trait Merge {
    fn merge(&mut self, other: Self);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSpec {
    pub seed: u64,
    pub replicas: u64,
    pub threads: usize,
}

impl RunSpec {
    pub fn new(seed: u64, replicas: u64) -> Self {
        Self {
            seed,
            replicas,
            threads: 1,
        }
    }

    pub fn threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn reseeded(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

pub fn run_ensemble<A, I, F>(spec: &RunSpec, init: I, per_replica: F) -> Result<A>
where
    A: Merge + Send,
    I: Fn() -> A + Sync,
    F: Fn(u64, &mut A) -> Result<()> + Sync,
{
    if spec.replicas == 0 {
        return Err(invalid("replica count must be positive"));
    }
    let chunks = spec.replicas.div_ceil(CHUNK);
    let run_chunk = |c: u64| -> Result<A> {
        let mut acc = init();
        let end = ((c + 1) * CHUNK).min(spec.replicas);
        for replica in c * CHUNK..end {
            per_replica(replica, &mut acc)?;
        }
        Ok(acc)
    };
    let parts: Vec<A> = if spec.threads <= 1 {
        (0..chunks).map(run_chunk).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.threads)
            .build()
            .map_err(|e| invalid(format!("thread pool: {e}")))?;
        pool.install(|| (0..chunks).into_par_iter().map(run_chunk).collect::<Result<_>>())?
    };
    let mut parts = parts.into_iter();
    let mut total = parts.next().expect("at least one chunk");
    for part in parts {
        total.merge(part);
    }
    Ok(total)
}

/// Running mean and variance (Welford, merged with Chan's update).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        self.m2 / (self.count - 1) as f64
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

impl Merge for Moments {
    fn merge(&mut self, other: Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other;
            return;
        }
        let n = self.count + other.count;
        let d = other.mean - self.mean;
        let mean = self.mean + d * other.count as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.count as f64 * other.count as f64) / n as f64;
        self.mean = mean;
        self.count = n;
    }
}

impl<T: Merge> Merge for Vec<T> {
    fn merge(&mut self, other: Self) {
        assert_eq!(self.len(), other.len(), "merging accumulators of different shape");
        for (a, b) in self.iter_mut().zip(other) {
            a.merge(b);
        }
    }
}

impl<A: Merge, B: Merge> Merge for (A, B) {
    fn merge(&mut self, other: Self) {
        self.0.merge(other.0);
        self.1.merge(other.1);
    }
}

impl Merge for u64 {
    fn merge(&mut self, other: Self) {
        *self += other;
    }
}

/// Standard error of a frequency `hits / trials`.
pub fn proportion_stderr(hits: u64, trials: u64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    let p = hits as f64 / trials as f64;
    (p * (1.0 - p) / trials as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_match_two_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.5 - 7.0).collect();
        let mut a = Moments::default();
        let mut b = Moments::default();
        for (i, &x) in xs.iter().enumerate() {
            if i < 313 {
                a.push(x)
            } else {
                b.push(x)
            }
        }
        a.merge(b);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((a.mean - mean).abs() < 1e-12);
        assert!((a.variance() - var).abs() < 1e-9);
    }

    #[test]
    fn result_is_independent_of_threads() {
        let run = |threads| {
            let spec = RunSpec::new(5, 3000).threads(threads);
            run_ensemble(&spec, Moments::default, |r, acc| {
                acc.push((r as f64).sin());
                Ok(())
            })
            .unwrap()
        };
        let one = run(1);
        for t in [2, 3, 7] {
            let other = run(t);
            assert_eq!(one.mean.to_bits(), other.mean.to_bits());
            assert_eq!(one.variance().to_bits(), other.variance().to_bits());
        }
    }

    #[test]
    fn zero_replicas_is_an_error() {
        let spec = RunSpec::new(0, 0);
        assert!(run_ensemble(&spec, || 0u64, |_, _| Ok(())).is_err());
    }
}
