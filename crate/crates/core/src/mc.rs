//! Deterministic parallel Monte Carlo averaging.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub trials: usize,
    pub master_seed: u64,
    /// Receivers drawn (without replacement) per trial when averaging over
    /// receivers; `None` uses all of them.
    pub receiver_subsample: Option<usize>,
}

impl McConfig {
    pub fn new(trials: usize, master_seed: u64) -> Result<Self> {
        let c = Self {
            trials,
            master_seed,
            receiver_subsample: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_receiver_subsample(mut self, n: usize) -> Result<Self> {
        self.receiver_subsample = Some(n);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::param("trials", "need at least one trial"));
        }
        if self.receiver_subsample == Some(0) {
            return Err(Error::param("receiver_subsample", "must be at least 1"));
        }
        Ok(())
    }
}

/// Sample mean with its standard error (zero for a single trial).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MeanEstimate<T = f64> {
    pub mean: T,
    pub stderr: T,
    pub trials: usize,
}

impl<T: Real> MeanEstimate<T> {
    pub fn from_samples(xs: &[T]) -> Self {
        let n = xs.len();
        let nf = T::from_usize_lossy(n.max(1));
        let mean = xs.iter().copied().sum::<T>() / nf;
        let stderr = if n > 1 {
            let ss: T = xs.iter().map(|&x| (x - mean) * (x - mean)).sum();
            (ss / (T::from_usize_lossy(n - 1) * nf)).sqrt()
        } else {
            T::zero()
        };
        Self { mean, stderr, trials: n }
    }
}

/// Evaluates `f(trial)` for every trial index in parallel and reduces in
/// index order, so the result does not depend on the thread count.
pub fn parallel_mean<T, F>(trials: usize, f: F) -> Result<MeanEstimate<T>>
where
    T: Real,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let xs = (0..trials).into_par_iter().map(f).collect::<Result<Vec<T>>>()?;
    Ok(MeanEstimate::from_samples(&xs))
}

/// Like [`parallel_mean`] for trials that produce `dims` outputs at once
/// (common random numbers across the outputs).
pub fn parallel_means<T, F>(trials: usize, dims: usize, f: F) -> Result<Vec<MeanEstimate<T>>>
where
    T: Real,
    F: Fn(usize) -> Result<Vec<T>> + Sync + Send,
{
    let rows = (0..trials).into_par_iter().map(f).collect::<Result<Vec<Vec<T>>>>()?;
    if let Some(r) = rows.iter().find(|r| r.len() != dims) {
        return Err(Error::Numerical(format!("trial produced {} outputs, expected {dims}", r.len())));
    }
    Ok((0..dims)
        .map(|d| {
            let col: Vec<T> = rows.iter().map(|r| r[d]).collect();
            MeanEstimate::from_samples(&col)
        })
        .collect())
}
