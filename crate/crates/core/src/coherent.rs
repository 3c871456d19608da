//! Pilot-assisted channel estimation and coherent Network MIMO uplink.
//!
//! A share `alpha` of every coherence interval carries orthogonal pilots, so
//! each of the `K` coefficients seen by a receiver is estimated from
//! `alpha L / K` symbols. Estimation errors act as extra Gaussian noise on
//! the payload; the cluster then decodes jointly with the estimated
//! channel.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::curve::{CurvePoint, Scheme, SpectralEfficiencyCurve};
use crate::error::{Error, Result};
use crate::fading::{effective_coherence, FadingModel};
use crate::geometry::{geometry_profile, ClusterSpec, GeometryProfile, HexLayout, UserPlacement};
use crate::linalg::{ln_det_hpd, CMatrix};
use crate::mc::{parallel_means, McConfig, MeanEstimate};
use crate::quadrature::integrate;
use crate::regimes::harmonic_sinr;
use crate::rng::{complex_normal, stream, Domain};
use crate::scalar::{from_db, Real};

/// Estimation MMSE of a unit-variance coefficient with block fading:
/// `1 / (1 + g SINR L alpha / K)`.
pub fn mmse_block<T: Real>(g: T, sinr: T, coherence: T, alpha: T, k: usize) -> T {
    let energy = g * sinr * coherence * alpha / T::from_usize_lossy(k);
    if g == T::zero() || alpha == T::zero() {
        return T::one();
    }
    T::one() / (T::one() + energy)
}

/// Doppler power spectrum of the fading, normalized to unit integral.
#[derive(Clone)]
pub enum DopplerSpectrum<T> {
    /// Flat over `[-doppler, doppler]`.
    Rectangular { doppler: T },
    /// Arbitrary density supported on `[-support, support]`.
    Custom {
        support: T,
        density: Arc<dyn Fn(T) -> T + Send + Sync>,
    },
}

impl<T: Real> fmt::Debug for DopplerSpectrum<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DopplerSpectrum::Rectangular { doppler } => f.debug_struct("Rectangular").field("doppler", doppler).finish(),
            DopplerSpectrum::Custom { support, .. } => f.debug_struct("Custom").field("support", support).finish(),
        }
    }
}

impl<T: Real> DopplerSpectrum<T> {
    pub fn custom(support: T, density: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        DopplerSpectrum::Custom {
            support,
            density: Arc::new(density),
        }
    }

    /// Checks support and unit normalization (to 1e-6).
    pub fn validate(&self) -> Result<()> {
        match self {
            DopplerSpectrum::Rectangular { doppler } => {
                if !(*doppler > T::zero() && *doppler <= T::lit(0.5)) {
                    return Err(Error::param("fd", format!("normalized Doppler must lie in (0, 1/2], got {doppler}")));
                }
            }
            DopplerSpectrum::Custom { support, density } => {
                if !(*support > T::zero() && *support <= T::lit(0.5)) {
                    return Err(Error::param("support", format!("must lie in (0, 1/2], got {support}")));
                }
                let total = integrate(|x| density(x), -*support, *support, T::lit(1e-10))?;
                if (total - T::one()).abs() > T::lit(1e-6) {
                    return Err(Error::SpectrumNotNormalized {
                        integral: total.to_f64_lossy(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Estimation MMSE with continuous fading:
/// `1 - integral g SINR S^2 / (K/alpha + g SINR S)`.
/// Rectangular spectra use the closed form, which equals [`mmse_block`]
/// with `L = 1/(2 f_D)`.
pub fn mmse_continuous<T: Real>(g: T, sinr: T, spectrum: &DopplerSpectrum<T>, alpha: T, k: usize) -> Result<T> {
    spectrum.validate()?;
    if alpha == T::zero() || g == T::zero() {
        return Ok(T::one());
    }
    let kf = T::from_usize_lossy(k);
    match spectrum {
        DopplerSpectrum::Rectangular { doppler } => {
            Ok(T::one() / (T::one() + g * sinr * (alpha / kf) / (T::lit(2.0) * *doppler)))
        }
        DopplerSpectrum::Custom { support, density } => {
            let c = g * sinr;
            let floor = kf / alpha;
            let v = integrate(
                |nu| {
                    let s = density(nu);
                    c * s * s / (floor + c * s)
                },
                -*support,
                *support,
                T::lit(1e-10),
            )?;
            Ok(T::one() - v)
        }
    }
}

/// Estimation MMSE for every `(receiver, transmitter)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MmseTable<T = f64> {
    receivers: usize,
    transmitters: usize,
    mmse: Vec<T>,
}

impl<T: Real> MmseTable<T> {
    pub fn from_fn(receivers: usize, transmitters: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut mmse = Vec::with_capacity(receivers * transmitters);
        for n in 0..receivers {
            for k in 0..transmitters {
                let m = f(n, k);
                if !(m >= T::zero() && m <= T::one()) {
                    return Err(Error::param("mmse", format!("entry ({n}, {k}) = {m} is outside [0, 1]")));
                }
                mmse.push(m);
            }
        }
        Ok(Self {
            receivers,
            transmitters,
            mmse,
        })
    }

    /// Block-fading MMSE for every pair, with a common pilot fraction.
    pub fn block(profile: &GeometryProfile<T>, sinr: &[T], coherence: T, alpha: T) -> Result<Self> {
        check_len(profile, sinr, "sinr")?;
        let k = profile.transmitters();
        Self::from_fn(profile.receivers(), k, |n, j| mmse_block(profile.g(n, j), sinr[n], coherence, alpha, k))
    }

    pub fn constant(receivers: usize, transmitters: usize, value: T) -> Result<Self> {
        Self::from_fn(receivers, transmitters, |_, _| value)
    }

    #[inline]
    pub fn get(&self, n: usize, k: usize) -> T {
        self.mmse[n * self.transmitters + k]
    }

    fn check(&self, profile: &GeometryProfile<T>) -> Result<()> {
        if self.receivers != profile.receivers() || self.transmitters != profile.transmitters() {
            return Err(Error::param(
                "mmse",
                format!(
                    "table is {}x{}, profile is {}x{}",
                    self.receivers,
                    self.transmitters,
                    profile.receivers(),
                    profile.transmitters()
                ),
            ));
        }
        Ok(())
    }
}

fn check_len<T: Real>(profile: &GeometryProfile<T>, v: &[T], name: &'static str) -> Result<()> {
    if v.len() != profile.receivers() {
        return Err(Error::param(
            name,
            format!("expected {} per-receiver values, got {}", profile.receivers(), v.len()),
        ));
    }
    if v.iter().any(|&x| !(x >= T::zero())) {
        return Err(Error::param(name, "values must be >= 0"));
    }
    Ok(())
}

/// Effective SINR upon payload detection with mismatched decoding.
pub fn effective_sinr<T: Real>(profile: &GeometryProfile<T>, sinr: &[T], mmse: &MmseTable<T>) -> Result<Vec<T>> {
    Ok(network_mimo_variances(profile, sinr, mmse)?
        .iter()
        .map(|row| row.iter().copied().sum())
        .collect())
}

/// Per-entry variance `sigma^2_nk` of the equivalent channel after
/// estimation; row `n` sums to the effective SINR of receiver `n`.
pub fn network_mimo_variances<T: Real>(
    profile: &GeometryProfile<T>,
    sinr: &[T],
    mmse: &MmseTable<T>,
) -> Result<Vec<Vec<T>>> {
    check_len(profile, sinr, "sinr")?;
    mmse.check(profile)?;
    Ok((0..profile.receivers())
        .map(|n| {
            let s = sinr[n];
            let residual: T = (0..profile.transmitters()).map(|k| profile.g(n, k) * mmse.get(n, k)).sum();
            let denom = T::one() + s * residual;
            (0..profile.transmitters())
                .map(|k| profile.g(n, k) * s * (T::one() - mmse.get(n, k)) / denom)
                .collect()
        })
        .collect())
}

/// Per-receiver SINR from SNR and the profile's out-of-cluster SIR.
fn link_sinr<T: Real>(profile: &GeometryProfile<T>, snr: &[T]) -> Result<Vec<T>> {
    check_len(profile, snr, "snr")?;
    Ok(snr.iter().zip(profile.sir()).map(|(&a, &b)| harmonic_sinr(a, b)).collect())
}

/// Spectral efficiency `(1 - alpha) E[log2 det(I + S S^H)] / N` at several
/// pilot fractions, all from the same channel draws.
fn se_at_alphas<T: Real>(
    profile: &GeometryProfile<T>,
    sinr: &[T],
    coherence: T,
    alphas: &[T],
    mc: &McConfig,
) -> Result<Vec<MeanEstimate<T>>> {
    mc.validate()?;
    let (n, k) = (profile.receivers(), profile.transmitters());
    let sigmas = alphas
        .iter()
        .map(|&a| {
            let mmse = MmseTable::block(profile, sinr, coherence, a)?;
            let var = network_mimo_variances(profile, sinr, &mmse)?;
            Ok(var.into_iter().flatten().map(|v| v.sqrt()).collect::<Vec<T>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = T::LOG2_E() / T::from_usize_lossy(n);
    parallel_means(mc.trials, alphas.len(), |t| {
        let mut rng = stream(mc.master_seed, Domain::Channel, t as u64);
        let z: Vec<_> = (0..n * k).map(|_| complex_normal::<T, _>(&mut rng)).collect();
        alphas
            .iter()
            .zip(&sigmas)
            .map(|(&a, sd)| {
                let s = CMatrix::from_fn(n, k, |i, j| z[i * k + j] * sd[i * k + j]);
                Ok((T::one() - a) * scale * ln_det_hpd(s.identity_plus_gram_rows())?)
            })
            .collect()
    })
}

/// Monte Carlo Network MIMO spectral efficiency (bits/s/Hz/user) at a fixed
/// pilot fraction. `snr` is per receiver; SINR combines it with the
/// profile's SIR.
pub fn network_mimo_se<T: Real>(
    profile: &GeometryProfile<T>,
    snr: &[T],
    coherence: T,
    alpha: T,
    mc: &McConfig,
) -> Result<MeanEstimate<T>> {
    if !(alpha >= T::zero() && alpha < T::one()) {
        return Err(Error::param("alpha", format!("pilot fraction must lie in [0, 1), got {alpha}")));
    }
    if !(coherence >= T::one()) {
        return Err(Error::param("L", format!("coherence must be >= 1 symbol, got {coherence}")));
    }
    let sinr = link_sinr(profile, snr)?;
    Ok(se_at_alphas(profile, &sinr, coherence, &[alpha], mc)?[0])
}

/// Coarse grid followed by golden-section refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct AlphaSearch<T = f64> {
    /// Interior grid points `i/(grid+1)`, `i = 1..=grid`.
    pub grid: usize,
    /// Golden-section stops once the bracket is narrower than this.
    pub width: T,
}

impl<T: Real> Default for AlphaSearch<T> {
    fn default() -> Self {
        Self {
            grid: 32,
            width: T::lit(1e-3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub enum PilotConfig<T = f64> {
    Fixed(T),
    Optimize(AlphaSearch<T>),
}

impl<T: Real> Default for PilotConfig<T> {
    fn default() -> Self {
        PilotConfig::Optimize(AlphaSearch::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct AlphaOptimum<T = f64> {
    pub alpha: T,
    pub se: MeanEstimate<T>,
}

/// Pilot fraction maximizing the Monte Carlo spectral efficiency. All
/// candidates share the same channel draws, so comparisons are free of
/// independent sampling jitter. The returned point is the best of every
/// evaluated candidate, grid points included.
pub fn optimize_alpha<T: Real>(
    profile: &GeometryProfile<T>,
    snr: &[T],
    coherence: T,
    mc: &McConfig,
    search: &AlphaSearch<T>,
) -> Result<AlphaOptimum<T>> {
    if search.grid < 8 {
        return Err(Error::param("alpha_grid", format!("need at least 8 grid points, got {}", search.grid)));
    }
    if !(search.width > T::zero()) {
        return Err(Error::param("alpha_width", "refinement width must be > 0"));
    }
    if !(coherence >= T::one()) {
        return Err(Error::param("L", format!("coherence must be >= 1 symbol, got {coherence}")));
    }
    let sinr = link_sinr(profile, snr)?;
    let step = T::one() / T::from_usize_lossy(search.grid + 1);
    let grid: Vec<T> = (1..=search.grid).map(|i| step * T::from_usize_lossy(i)).collect();
    let values = se_at_alphas(profile, &sinr, coherence, &grid, mc)?;
    let best_i = (0..grid.len())
        .max_by(|&a, &b| values[a].mean.partial_cmp(&values[b].mean).expect("finite spectral efficiency"))
        .expect("nonempty grid");
    let mut best = AlphaOptimum {
        alpha: grid[best_i],
        se: values[best_i],
    };

    let eval = |a: T| -> Result<MeanEstimate<T>> { Ok(se_at_alphas(profile, &sinr, coherence, &[a], mc)?[0]) };
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let mut lo = step * T::from_usize_lossy(best_i);
    let mut hi = step * T::from_usize_lossy(best_i + 2);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    for (x, f) in [(x1, f1), (x2, f2)] {
        if f.mean > best.se.mean {
            best = AlphaOptimum { alpha: x, se: f };
        }
    }
    while hi - lo > search.width {
        if f1.mean >= f2.mean {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = eval(x1)?;
            if f1.mean > best.se.mean {
                best = AlphaOptimum { alpha: x1, se: f1 };
            }
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = eval(x2)?;
            if f2.mean > best.se.mean {
                best = AlphaOptimum { alpha: x2, se: f2 };
            }
        }
    }
    Ok(best)
}

/// Spectral efficiency versus SNR (dB) for a profile, one optimized (or
/// fixed) pilot fraction per point. Every point reuses the same channel
/// draws.
pub fn coherent_curve_for_profile<T: Real>(
    profile: &GeometryProfile<T>,
    coherence: T,
    snr_grid_db: &[T],
    mc: &McConfig,
    pilot: &PilotConfig<T>,
) -> Result<SpectralEfficiencyCurve<T>> {
    if snr_grid_db.is_empty() {
        return Err(Error::param("snr_grid", "grid is empty"));
    }
    let points = snr_grid_db
        .iter()
        .map(|&db| {
            let snr = vec![from_db(db); profile.receivers()];
            let (alpha, se) = match pilot {
                PilotConfig::Fixed(a) => (*a, network_mimo_se(profile, &snr, coherence, *a, mc)?),
                PilotConfig::Optimize(search) => {
                    let o = optimize_alpha(profile, &snr, coherence, mc, search)?;
                    (o.alpha, o.se)
                }
            };
            Ok(CurvePoint {
                snr_db: db,
                c: se.mean,
                stderr: se.stderr,
                alpha: Some(alpha),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralEfficiencyCurve {
        scheme: Scheme::NetworkMimo,
        cluster_size: profile.transmitters(),
        coherence: Some(coherence),
        interference: profile.sir().iter().any(|s| s.is_finite()),
        points,
    })
}

/// Coherent Network MIMO curve for a cluster of the hexagonal layout. With
/// `include_out_of_cluster == false` every transmitter outside the cluster
/// is switched off.
#[allow(clippy::too_many_arguments)]
pub fn coherent_curve<T: Real>(
    layout: &HexLayout<T>,
    cluster: &ClusterSpec,
    placement: UserPlacement,
    fading: &FadingModel<T>,
    snr_grid_db: &[T],
    mc: &McConfig,
    include_out_of_cluster: bool,
    pilot: &PilotConfig<T>,
) -> Result<SpectralEfficiencyCurve<T>> {
    fading.validate()?;
    let mut profile = geometry_profile(layout, cluster, placement)?;
    if !include_out_of_cluster {
        profile = profile.without_interference();
    }
    coherent_curve_for_profile(&profile, effective_coherence(fading), snr_grid_db, mc, pilot)
}

/// High-SNR ceiling of the optimized coherent spectral efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CoherentCeiling<T = f64> {
    pub c_inf: T,
    pub stderr: T,
    pub alpha: T,
    /// The two SNRs (dB) probed, 40 and 50 dB above the largest SIR.
    pub probe_db: [T; 2],
    /// Relative difference between the two probes.
    pub relative_change: T,
}

/// Evaluates the optimized spectral efficiency at `SIR + 40 dB` and
/// `SIR + 50 dB` and accepts the latter when both agree within 1%.
pub fn coherent_ceiling<T: Real>(
    profile: &GeometryProfile<T>,
    coherence: T,
    mc: &McConfig,
    search: &AlphaSearch<T>,
) -> Result<CoherentCeiling<T>> {
    let sir_db = profile
        .sir()
        .iter()
        .map(|&s| crate::scalar::to_db(s))
        .fold(T::neg_infinity(), T::max);
    if !sir_db.is_finite() {
        return Err(Error::Precondition(
            "no out-of-cluster interference: the spectral efficiency grows without bound".into(),
        ));
    }
    let probes = [sir_db + T::lit(40.0), sir_db + T::lit(50.0)];
    let at = |db: T| optimize_alpha(profile, &vec![from_db(db); profile.receivers()], coherence, mc, search);
    let lo = at(probes[0])?;
    let hi = at(probes[1])?;
    let change = ((hi.se.mean - lo.se.mean) / hi.se.mean).abs();
    if change >= T::lit(0.01) {
        return Err(Error::Numerical(format!(
            "spectral efficiency still moving at high SNR (relative change {change})"
        )));
    }
    Ok(CoherentCeiling {
        c_inf: hi.se.mean,
        stderr: hi.se.stderr,
        alpha: hi.alpha,
        probe_db: probes,
        relative_change: change,
    })
}
