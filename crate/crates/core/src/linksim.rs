//! Small MIMO interference cluster with perfect channel knowledge:
//! distributed Max-SINR beamforming against round-robin TDMA.
//!
//! Out-of-cluster interference is folded into unit-variance white noise, so
//! every link is scaled by the per-user SINR budget (the harmonic
//! combination of SNR and SIR).

use num_complex::Complex;

use crate::curve::{CurvePoint, Scheme, SpectralEfficiencyCurve};
use crate::error::{Error, Result};
use crate::geometry::GeometryProfile;
use crate::linalg::{inner, ln_det_hpd, norm, normalize, solve_hpd, CMatrix};
use crate::mc::{parallel_means, McConfig};
use crate::regimes::harmonic_sinr;
use crate::rng::{complex_normal, stream, Domain};
use crate::scalar::{from_db, Real};

pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct MimoClusterConfig<T = f64> {
    /// Number of transmitter/receiver pairs (`K = N`).
    pub pairs: usize,
    pub antennas: usize,
    pub streams: usize,
    /// Out-of-cluster SIR in dB; `+inf` for an isolated cluster.
    pub sir_db: T,
    /// Average link gains; `None` means unit variance on every link.
    pub profile: Option<GeometryProfile<T>>,
}

impl<T: Real> MimoClusterConfig<T> {
    pub fn new(pairs: usize, antennas: usize, sir_db: T) -> Result<Self> {
        let c = Self {
            pairs,
            antennas,
            streams: 1,
            sir_db,
            profile: None,
        };
        c.validate()?;
        Ok(c)
    }

    /// Three pairs with two antennas per node.
    pub fn reference(sir_db: T) -> Result<Self> {
        Self::new(3, 2, sir_db)
    }

    pub fn with_profile(mut self, profile: GeometryProfile<T>) -> Result<Self> {
        self.profile = Some(profile);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pairs < 2 {
            return Err(Error::param("pairs", "an interference cluster needs at least 2 pairs"));
        }
        if self.antennas == 0 {
            return Err(Error::param("antennas", "must be at least 1"));
        }
        if self.streams == 0 || self.streams > self.antennas {
            return Err(Error::param("streams", "must lie in 1..=antennas"));
        }
        if self.streams != 1 {
            return Err(Error::param("streams", "only single-stream beamforming is supported"));
        }
        if self.sir_db.is_nan() || self.sir_db == T::neg_infinity() {
            return Err(Error::param("sir_db", "must be finite or +inf"));
        }
        if let Some(p) = &self.profile {
            if p.receivers() != self.pairs || p.transmitters() != self.pairs {
                return Err(Error::param(
                    "profile",
                    format!("expected {0}x{0} gains, got {1}x{2}", self.pairs, p.receivers(), p.transmitters()),
                ));
            }
        }
        Ok(())
    }
}

/// Per-link channel matrices; `get(n, k)` maps transmitter `k` to receiver `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkChannels<T> {
    pairs: usize,
    antennas: usize,
    h: Vec<CMatrix<T>>,
}

impl<T: Real> LinkChannels<T> {
    pub fn from_fn(pairs: usize, antennas: usize, mut f: impl FnMut(usize, usize) -> CMatrix<T>) -> Result<Self> {
        if pairs == 0 || antennas == 0 {
            return Err(Error::param("pairs", "need at least one pair and one antenna"));
        }
        let mut h = Vec::with_capacity(pairs * pairs);
        for n in 0..pairs {
            for k in 0..pairs {
                let m = f(n, k);
                if m.rows() != antennas || m.cols() != antennas {
                    return Err(Error::param(
                        "channels",
                        format!("link ({n}, {k}) is {}x{}, expected {antennas}x{antennas}", m.rows(), m.cols()),
                    ));
                }
                h.push(m);
            }
        }
        Ok(Self { pairs, antennas, h })
    }

    /// Rayleigh draw from the `(seed, Channel, trial)` stream, link by link
    /// in row-major order.
    pub fn draw(config: &MimoClusterConfig<T>, seed: u64, trial: u64) -> Self {
        let mut rng = stream(seed, Domain::Channel, trial);
        let (k, m) = (config.pairs, config.antennas);
        let kf = T::from_usize_lossy(k);
        let h = (0..k * k)
            .map(|idx| {
                let sd = config.profile.as_ref().map_or(T::one(), |p| (kf * p.g(idx / k, idx % k)).sqrt());
                CMatrix::from_fn(m, m, |_, _| complex_normal::<T, _>(&mut rng) * sd)
            })
            .collect();
        Self { pairs: k, antennas: m, h }
    }

    pub fn pairs(&self) -> usize {
        self.pairs
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn get(&self, n: usize, k: usize) -> &CMatrix<T> {
        &self.h[n * self.pairs + k]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerState<T> {
    pub transmit: Vec<Vec<Complex<T>>>,
    pub receive: Vec<Vec<Complex<T>>>,
    pub iterations: usize,
    pub converged: bool,
    /// Achieved SINR of each user in the forward network.
    pub sinr: Vec<T>,
    /// Achieved SINR in the reciprocal network (roles swapped).
    pub reverse_sinr: Vec<T>,
    /// `sum_n log2(1 + SINR_n)` after every iteration.
    pub objective: Vec<T>,
}

impl<T: Real> BeamformerState<T> {
    /// Mean of `log2(1 + SINR)` over users.
    pub fn spectral_efficiency(&self) -> T {
        self.sinr.iter().map(|&s| s.ln_1p()).sum::<T>() * T::LOG2_E() / T::from_usize_lossy(self.sinr.len())
    }
}

fn check_budget<T: Real>(channels: &LinkChannels<T>, budget: &[T]) -> Result<()> {
    if budget.len() != channels.pairs {
        return Err(Error::param(
            "sinr_budget",
            format!("need one entry per user ({}), got {}", channels.pairs, budget.len()),
        ));
    }
    if budget.iter().any(|&b| !(b >= T::zero()) || !b.is_finite()) {
        return Err(Error::param("sinr_budget", "entries must be finite and >= 0"));
    }
    Ok(())
}

/// `(I + sum_{k != n} rho |.|^2 terms)^-1 H v` style filter update. `link(n, k)`
/// returns the effective matrix from node `k` to node `n` in the current
/// direction.
fn update_filters<'a, T: Real>(
    k: usize,
    m: usize,
    budget: &[T],
    link: impl Fn(usize, usize) -> &'a CMatrix<T>,
    other: &[Vec<Complex<T>>],
) -> Result<Vec<Vec<Complex<T>>>> {
    (0..k)
        .map(|n| {
            let mut cov = CMatrix::identity(m);
            for j in (0..k).filter(|&j| j != n) {
                let x = link(n, j).mul_vec(&other[j]);
                for r in 0..m {
                    for c in 0..m {
                        cov[(r, c)] += x[r] * x[c].conj() * budget[n];
                    }
                }
            }
            let mut w = solve_hpd(&cov, &link(n, n).mul_vec(&other[n]))?;
            if norm(&w) > T::zero() {
                normalize(&mut w)?;
            } else {
                w = unit(m);
            }
            Ok(w)
        })
        .collect()
}

fn sinr_of<'a, T: Real>(
    k: usize,
    budget: &[T],
    link: impl Fn(usize, usize) -> &'a CMatrix<T>,
    rx: &[Vec<Complex<T>>],
    tx: &[Vec<Complex<T>>],
) -> Vec<T> {
    (0..k)
        .map(|n| {
            let gain = |j: usize| inner(&rx[n], &link(n, j).mul_vec(&tx[j])).norm_sqr();
            let interference: T = (0..k).filter(|&j| j != n).map(gain).sum();
            budget[n] * gain(n) / (T::one() + budget[n] * interference)
        })
        .collect()
}

/// Phase-invariant distance between unit vectors.
fn filter_change<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> T {
    (T::lit(2.0) * (T::one() - inner(a, b).norm()).max(T::zero())).sqrt()
}

fn unit<T: Real>(m: usize) -> Vec<Complex<T>> {
    let mut v = vec![Complex::new(T::zero(), T::zero()); m];
    v[0] = Complex::new(T::one(), T::zero());
    v
}

/// Dominant right singular vector by power iteration on `H^H H`.
fn dominant_right_singular<T: Real>(h: &CMatrix<T>) -> Vec<Complex<T>> {
    let m = h.cols();
    let mut v = vec![Complex::new(T::one(), T::zero()); m];
    let mut scale = T::one() / T::from_usize_lossy(m).sqrt();
    for z in v.iter_mut() {
        *z *= scale;
    }
    for _ in 0..500 {
        let mut next = h.conj_transpose_mul_vec(&h.mul_vec(&v));
        scale = norm(&next);
        if !(scale > T::zero()) {
            return unit(m);
        }
        for z in next.iter_mut() {
            *z /= scale;
        }
        let done = filter_change(&v, &next) < T::epsilon().sqrt() * T::lit(1e-2);
        v = next;
        if done {
            break;
        }
    }
    v
}

/// Alternating Max-SINR iteration started from each direct link's dominant
/// singular pair. Hitting `max_iter` is reported through `converged`, not as
/// an error.
pub fn max_sinr_solve<T: Real>(
    channels: &LinkChannels<T>,
    sinr_budget: &[T],
    max_iter: usize,
    tol: T,
) -> Result<BeamformerState<T>> {
    let init = (0..channels.pairs)
        .map(|k| dominant_right_singular(channels.get(k, k)))
        .collect();
    max_sinr_solve_from(channels, sinr_budget, init, max_iter, tol)
}

/// Same as [`max_sinr_solve`] with explicit initial transmit filters.
pub fn max_sinr_solve_from<T: Real>(
    channels: &LinkChannels<T>,
    sinr_budget: &[T],
    mut transmit: Vec<Vec<Complex<T>>>,
    max_iter: usize,
    tol: T,
) -> Result<BeamformerState<T>> {
    check_budget(channels, sinr_budget)?;
    let (k, m) = (channels.pairs, channels.antennas);
    if transmit.len() != k || transmit.iter().any(|v| v.len() != m) {
        return Err(Error::param("transmit", "need one filter of length `antennas` per user"));
    }
    for v in transmit.iter_mut() {
        normalize(v)?;
    }
    if max_iter == 0 {
        return Err(Error::param("max_iter", "must be at least 1"));
    }
    let reverse: Vec<CMatrix<T>> = (0..k * k)
        .map(|idx| channels.get(idx % k, idx / k).conj_transpose())
        .collect();
    let fwd = |n: usize, j: usize| channels.get(n, j);
    let rev = |n: usize, j: usize| &reverse[n * k + j];

    let mut receive = update_filters(k, m, sinr_budget, fwd, &transmit)?;
    let mut objective = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let new_transmit = update_filters(k, m, sinr_budget, rev, &receive)?;
        let new_receive = update_filters(k, m, sinr_budget, fwd, &new_transmit)?;
        let change = transmit
            .iter()
            .zip(&new_transmit)
            .chain(receive.iter().zip(&new_receive))
            .map(|(a, b)| filter_change(a, b))
            .fold(T::zero(), T::max);
        transmit = new_transmit;
        receive = new_receive;
        let sinr = sinr_of(k, sinr_budget, fwd, &receive, &transmit);
        objective.push(sinr.iter().map(|&s| s.ln_1p()).sum::<T>() * T::LOG2_E());
        if change < tol {
            converged = true;
            break;
        }
    }
    let sinr = sinr_of(k, sinr_budget, fwd, &receive, &transmit);
    let reverse_sinr = sinr_of(k, sinr_budget, rev, &transmit, &receive);
    Ok(BeamformerState {
        transmit,
        receive,
        iterations,
        converged,
        sinr,
        reverse_sinr,
        objective,
    })
}

/// Per-user round-robin TDMA spectral efficiency: user `n` owns `1/K` of the
/// time and splits its power equally over `antennas` transmit antennas.
pub fn tdma_user_rates<T: Real>(channels: &LinkChannels<T>, sinr_budget: &[T]) -> Result<Vec<T>> {
    check_budget(channels, sinr_budget)?;
    let (k, m) = (channels.pairs, channels.antennas);
    let share = T::one() / T::from_usize_lossy(k);
    (0..k)
        .map(|n| {
            let s = (sinr_budget[n] / T::from_usize_lossy(m)).sqrt();
            let h = channels.get(n, n);
            let scaled = CMatrix::from_fn(m, m, |r, c| h[(r, c)] * s);
            Ok(share * ln_det_hpd(scaled.identity_plus_gram_rows())? * T::LOG2_E())
        })
        .collect()
}

/// Mean TDMA spectral efficiency per user (bits/s/Hz).
pub fn tdma_se<T: Real>(channels: &LinkChannels<T>, sinr_budget: &[T]) -> Result<T> {
    let rates = tdma_user_rates(channels, sinr_budget)?;
    Ok(rates.iter().copied().sum::<T>() / T::from_usize_lossy(rates.len()))
}

/// Max-SINR and TDMA curves over `snr_grid_db`, with the same channel draws
/// at every SNR.
pub fn linksim_curve<T: Real>(
    config: &MimoClusterConfig<T>,
    snr_grid_db: &[T],
    mc: &McConfig,
) -> Result<(SpectralEfficiencyCurve<T>, SpectralEfficiencyCurve<T>)> {
    config.validate()?;
    mc.validate()?;
    if snr_grid_db.is_empty() || snr_grid_db.iter().any(|x| !x.is_finite()) {
        return Err(Error::param("snr_grid", "need at least one finite SNR"));
    }
    let sir = from_db(config.sir_db);
    let budgets: Vec<T> = snr_grid_db.iter().map(|&s| harmonic_sinr(from_db(s), sir)).collect();
    let g = snr_grid_db.len();
    let tol = T::lit(DEFAULT_TOL);
    // ascending SNR, each solve starting from the previous filters
    let mut order: Vec<usize> = (0..g).collect();
    order.sort_by(|&a, &b| snr_grid_db[a].partial_cmp(&snr_grid_db[b]).unwrap_or(std::cmp::Ordering::Equal));
    let est = parallel_means(mc.trials, 2 * g, |t| {
        let ch = LinkChannels::draw(config, mc.master_seed, t as u64);
        let mut out = vec![T::zero(); 2 * g];
        let mut warm: Option<Vec<Vec<Complex<T>>>> = None;
        for &i in &order {
            let b = vec![budgets[i]; config.pairs];
            let st = match warm.take() {
                Some(v) => max_sinr_solve_from(&ch, &b, v, DEFAULT_MAX_ITER, tol)?,
                None => max_sinr_solve(&ch, &b, DEFAULT_MAX_ITER, tol)?,
            };
            out[i] = st.spectral_efficiency();
            warm = Some(st.transmit);
            out[g + i] = tdma_se(&ch, &b)?;
        }
        Ok(out)
    })?;
    let curve = |scheme, offset: usize| SpectralEfficiencyCurve {
        scheme,
        cluster_size: config.pairs,
        coherence: None,
        interference: config.sir_db.is_finite(),
        points: snr_grid_db
            .iter()
            .enumerate()
            .map(|(i, &snr_db)| CurvePoint {
                snr_db,
                c: est[offset + i].mean,
                stderr: est[offset + i].stderr,
                alpha: None,
            })
            .collect(),
    };
    Ok((curve(Scheme::MaxSinr, 0), curve(Scheme::Tdma, g)))
}
