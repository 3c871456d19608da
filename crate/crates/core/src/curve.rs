//! Sampled spectral-efficiency curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Pilot-assisted joint decoding across the cluster.
    NetworkMimo,
    MaxSinr,
    Tdma,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CurvePoint<T = f64> {
    pub snr_db: T,
    /// bits/s/Hz/user
    pub c: T,
    pub stderr: T,
    /// Pilot fraction used at this point, when the scheme has one.
    pub alpha: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SpectralEfficiencyCurve<T = f64> {
    pub scheme: Scheme,
    pub cluster_size: usize,
    /// Coherence length in symbols, for pilot-assisted curves.
    pub coherence: Option<T>,
    /// Whether out-of-cluster interference was on.
    pub interference: bool,
    pub points: Vec<CurvePoint<T>>,
}

impl<T: Real> SpectralEfficiencyCurve<T> {
    pub fn snr_db(&self) -> Vec<T> {
        self.points.iter().map(|p| p.snr_db).collect()
    }

    pub fn values(&self) -> Vec<T> {
        self.points.iter().map(|p| p.c).collect()
    }

    /// Value at the grid point closest to `snr_db`.
    pub fn at(&self, snr_db: T) -> Option<&CurvePoint<T>> {
        self.points
            .iter()
            .min_by(|a, b| (a.snr_db - snr_db).abs().partial_cmp(&(b.snr_db - snr_db).abs()).expect("finite grid"))
    }
}

/// Inclusive grid `lo, lo + step, ..., hi` in dB.
pub fn snr_grid<T: Real>(lo: T, hi: T, step: T) -> Result<Vec<T>> {
    if !(step > T::zero()) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::param("snr_grid", format!("need lo <= hi and step > 0, got {lo}:{hi}:{step}")));
    }
    let n = ((hi - lo) / step + T::lit(1e-9)).floor().to_usize().unwrap_or(0);
    if n > 100_000 {
        return Err(Error::param("snr_grid", "more than 100000 points"));
    }
    Ok((0..=n).map(|i| lo + step * T::from_usize_lossy(i)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_inclusive() {
        let g = snr_grid(0.0f64, 40.0, 5.0).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(*g.last().unwrap(), 40.0);
        assert_eq!(snr_grid(0.0f64, 1.0, 0.3).unwrap().len(), 4);
        assert!(snr_grid(1.0f64, 0.0, 1.0).is_err());
        assert!(snr_grid(0.0f64, 1.0, 0.0).is_err());
    }
}
