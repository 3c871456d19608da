//! Link budgets, the full-cooperation ceiling, saturation diagnostics and
//! SIR distributions.
//!
//! Out-of-cluster interference scales with transmit power just like the
//! desired signal, so a receiver's SINR is the harmonic mean of its SNR and
//! its (power-independent) SIR. Spectral efficiency therefore grows in the
//! usual way only while SNR is well below SIR and saturates above it.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::SpectralEfficiencyCurve;
use crate::error::{Error, Result};
use crate::geometry::{cluster_sir_with_totals, ClusterSpec, HexLayout, InterferenceField, UserPlacement};
use crate::rng::{stream, Domain};
use crate::scalar::{to_db, Real};

/// `snr sir / (snr + sir)`, with an infinite SIR (or SNR) dropping out.
#[inline]
pub fn harmonic_sinr<T: Real>(snr: T, sir: T) -> T {
    if sir.is_infinite() {
        snr
    } else if snr.is_infinite() {
        sir
    } else {
        snr * sir / (snr + sir)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LinkBudget<T = f64> {
    pub snr: Vec<T>,
    pub sir: Vec<T>,
    pub sinr: Vec<T>,
}

impl<T: Real> LinkBudget<T> {
    pub fn new(snr: Vec<T>, sir: Vec<T>) -> Result<Self> {
        if snr.len() != sir.len() {
            return Err(Error::param("sir", "need one SIR per SNR"));
        }
        if snr.iter().chain(&sir).any(|&x| !(x > T::zero())) {
            return Err(Error::param("snr", "SNR and SIR must be > 0"));
        }
        let sinr = snr.iter().zip(&sir).map(|(&a, &b)| harmonic_sinr(a, b)).collect();
        Ok(Self { snr, sir, sinr })
    }
}

/// Large-cluster full-cooperation uplink ceiling (bits/s/Hz/user) when every
/// receiver has the given SIR:
/// `2 log2((1 + r)/2) - log2(e) (r - 1)^2 / (4 sir)`, `r = sqrt(1 + 4 sir)`.
pub fn cinf_full_cooperation<T: Real>(sir: T) -> T {
    if sir.is_infinite() {
        return T::infinity();
    }
    if sir < T::lit(1e-6) {
        // s - s^2 + 5 s^3 / 3 nats; the closed form cancels catastrophically here
        return (sir - sir * sir + T::lit(5.0 / 3.0) * sir * sir * sir) * T::LOG2_E();
    }
    let r = (T::one() + T::lit(4.0) * sir).sqrt();
    let rm1 = T::lit(4.0) * sir / (r + T::one());
    // (1 + r)/2 = 1 + (r - 1)/2
    T::LOG2_E() * (T::lit(2.0) * (rm1 / T::lit(2.0)).ln_1p() - rm1 * rm1 / (T::lit(4.0) * sir))
}

/// The SIR whose full-cooperation ceiling equals `c_inf` (linear SIR).
pub fn invert_effective_sir<T: Real>(c_inf: T) -> Result<T> {
    if !(c_inf > T::zero()) || !c_inf.is_finite() {
        return Err(Error::param("c_inf", format!("must be finite and > 0, got {c_inf}")));
    }
    // bisection on ln(sir)
    let mut lo = T::zero();
    let mut hi = T::zero();
    while cinf_full_cooperation(lo.exp()) > c_inf {
        lo -= T::lit(8.0);
        if lo < T::lit(-700.0) {
            return Err(Error::Numerical("SIR bracket underflow".into()));
        }
    }
    while cinf_full_cooperation(hi.exp()) < c_inf {
        hi += T::lit(8.0);
        if hi > T::lit(700.0) {
            return Err(Error::Numerical("SIR bracket overflow".into()));
        }
    }
    for _ in 0..200 {
        if hi - lo <= T::lit(1e-13) * T::one().max(hi.abs()) {
            break;
        }
        let mid = (lo + hi) * T::lit(0.5);
        if cinf_full_cooperation(mid.exp()) < c_inf {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(((lo + hi) * T::lit(0.5)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// SNR below 0 dB.
    Noise,
    /// Between 0 dB and the saturation point: growth by degrees of freedom.
    DoF,
    /// Above the saturation point.
    Saturation,
}

/// What the saturation point is derived from.
#[derive(Debug, Clone, PartialEq)]
pub enum SaturationReference<'a, T> {
    /// Per-receiver SIR (linear); `SNR_sat = SIR`.
    Sir(Vec<T>),
    /// A known ceiling together with the interference-free curve of the same
    /// configuration: `SNR_sat` is where a straight line through the top
    /// 10 dB of the interference-free curve reaches the ceiling.
    Ceiling {
        c_inf: T,
        interference_free: &'a SpectralEfficiencyCurve<T>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SaturationReport<T = f64> {
    /// Ceiling: the one supplied, or the curve's last value when the SIR is
    /// finite. `None` for a curve that never saturates.
    pub c_inf: Option<T>,
    /// Whether the last two curve points agree within 1% (only meaningful
    /// when the ceiling was read off the curve).
    pub c_inf_converged: bool,
    /// Per-receiver saturation SNR in dB (one entry for the intersection method).
    pub snr_sat_db: Vec<T>,
    /// One label per curve point, using the smallest saturation SNR.
    pub labels: Vec<Regime>,
}

const MIN_SPAN_DB: f64 = 20.0;
const FIT_SPAN_DB: f64 = 10.0;

/// Least-squares line through the curve points within the top 10 dB of SNR,
/// intersected with the horizontal `c_inf`. Returns the SNR (dB).
pub fn intersection_snr_sat<T: Real>(interference_free: &SpectralEfficiencyCurve<T>, c_inf: T) -> Result<T> {
    let pts = &interference_free.points;
    let top = pts
        .iter()
        .map(|p| p.snr_db)
        .fold(T::neg_infinity(), T::max);
    let sel: Vec<_> = pts.iter().filter(|p| p.snr_db >= top - T::lit(FIT_SPAN_DB)).collect();
    if sel.len() < 2 {
        return Err(Error::CurveTooShort {
            span_db: 0.0,
            required_db: FIT_SPAN_DB,
        });
    }
    let n = T::from_usize_lossy(sel.len());
    let mx = sel.iter().map(|p| p.snr_db).sum::<T>() / n;
    let my = sel.iter().map(|p| p.c).sum::<T>() / n;
    let sxy: T = sel.iter().map(|p| (p.snr_db - mx) * (p.c - my)).sum();
    let sxx: T = sel.iter().map(|p| (p.snr_db - mx) * (p.snr_db - mx)).sum();
    let slope = sxy / sxx;
    if !(slope > T::zero()) {
        return Err(Error::Numerical("interference-free curve is not increasing at high SNR".into()));
    }
    Ok(mx + (c_inf - my) / slope)
}

pub fn saturation_report<T: Real>(
    curve: &SpectralEfficiencyCurve<T>,
    reference: &SaturationReference<'_, T>,
) -> Result<SaturationReport<T>> {
    let snr = curve.snr_db();
    let (lo, hi) = snr
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(a, b), &x| (a.min(x), b.max(x)));
    let span = hi - lo;
    if snr.is_empty() || span < T::lit(MIN_SPAN_DB) {
        return Err(Error::CurveTooShort {
            span_db: if snr.is_empty() { 0.0 } else { span.to_f64_lossy() },
            required_db: MIN_SPAN_DB,
        });
    }
    let values = curve.values();
    let n = values.len();
    let converged = n >= 2 && ((values[n - 1] - values[n - 2]) / values[n - 1]).abs() < T::lit(0.01);
    let (c_inf, snr_sat_db) = match reference {
        SaturationReference::Sir(sir) => {
            if sir.is_empty() || sir.iter().any(|&s| !(s > T::zero())) {
                return Err(Error::param("sir", "need at least one positive SIR"));
            }
            let sat: Vec<T> = sir.iter().map(|&s| to_db(s)).collect();
            let finite = sat.iter().any(|s| s.is_finite());
            (finite.then(|| values[n - 1]), sat)
        }
        SaturationReference::Ceiling {
            c_inf,
            interference_free,
        } => (Some(*c_inf), vec![intersection_snr_sat(interference_free, *c_inf)?]),
    };
    let sat = snr_sat_db.iter().copied().fold(T::infinity(), T::min);
    let labels = snr
        .iter()
        .map(|&x| {
            if x < T::zero() {
                Regime::Noise
            } else if x < sat {
                Regime::DoF
            } else {
                Regime::Saturation
            }
        })
        .collect();
    Ok(SaturationReport {
        c_inf,
        c_inf_converged: converged,
        snr_sat_db,
        labels,
    })
}

/// Empirical distribution of in-cluster SIR (dB), pooled over receivers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SirCdf<T = f64> {
    sorted_db: Vec<T>,
    pub samples: usize,
    pub receivers: usize,
}

impl<T: Real> SirCdf<T> {
    pub fn from_values(mut db: Vec<T>, samples: usize, receivers: usize) -> Self {
        db.sort_by(|a, b| a.partial_cmp(b).expect("SIR values are never NaN"));
        Self {
            sorted_db: db,
            samples,
            receivers,
        }
    }

    pub fn sorted_db(&self) -> &[T] {
        &self.sorted_db
    }

    /// Inverse CDF with linear interpolation between order statistics.
    pub fn quantile(&self, p: T) -> T {
        let n = self.sorted_db.len();
        if n == 1 {
            return self.sorted_db[0];
        }
        let pos = p.max(T::zero()).min(T::one()) * T::from_usize_lossy(n - 1);
        let i = pos.floor().to_usize().unwrap_or(0).min(n - 2);
        let frac = pos - T::from_usize_lossy(i);
        self.sorted_db[i] + (self.sorted_db[i + 1] - self.sorted_db[i]) * frac
    }

    pub fn median(&self) -> T {
        self.quantile(T::lit(0.5))
    }

    /// Fraction of values strictly below `db`.
    pub fn fraction_below(&self, db: T) -> T {
        let k = self.sorted_db.partition_point(|&x| x < db);
        T::from_usize_lossy(k) / T::from_usize_lossy(self.sorted_db.len())
    }
}

/// SIR distribution over independent uniform placements of the in-cluster
/// users; out-of-cluster users stay centered.
pub fn sir_cdf<T: Real>(layout: &HexLayout<T>, cluster: &ClusterSpec, samples: usize, seed: u64) -> Result<SirCdf<T>> {
    sir_distribution(layout, cluster, samples, seed, true)
}

/// As [`sir_cdf`], with the choice of randomizing or centering in-cluster users.
pub fn sir_distribution<T: Real>(
    layout: &HexLayout<T>,
    cluster: &ClusterSpec,
    samples: usize,
    seed: u64,
    randomized: bool,
) -> Result<SirCdf<T>> {
    if samples == 0 {
        return Err(Error::param("samples", "need at least one sample"));
    }
    let members = cluster.members()?;
    let totals = InterferenceField::new(layout).totals()?;
    let per_sample = (0..samples)
        .into_par_iter()
        .map(|i| {
            let placement = if randomized {
                UserPlacement::Randomized {
                    seed: stream(seed, Domain::Placement, i as u64).next_u64(),
                }
            } else {
                UserPlacement::Centered
            };
            cluster_sir_with_totals(layout, &members, placement, &totals)
        })
        .collect::<Result<Vec<Vec<T>>>>()?;
    let db = per_sample.into_iter().flatten().map(to_db).collect();
    Ok(SirCdf::from_values(db, samples, members.len()))
}
