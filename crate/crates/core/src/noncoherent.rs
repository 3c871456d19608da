//! High-power spectral-efficiency upper bounds without channel knowledge at
//! the receivers.
//!
//! With block fading of length `L` and `K > L` transmitters, no scheme can
//! exceed
//!
//! ```text
//! C_ub = -(1/K) sum_n (1/L) E[log2 det(X^H G_n X)]
//! ```
//!
//! where `X` is the `K x L` signal block and `G_n = diag(g_n1..g_nK)`. The
//! bound is estimated here by Monte Carlo and, for large systems, by the
//! fixed-point expression
//!
//! ```text
//! C_ub ~ (N/K) log2 e + (1/K) sum_n [log2(a_n/L) - (1/L) sum_k log2(1 + a_n g_nk)],
//! sum_k g_nk / (g_nk + 1/a_n) = L.
//! ```

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GainLattice, GeometryProfile, HexLayout, Sector, TailSeries};
use crate::linalg::{ln_det_hpd, weighted_gram, CMatrix};
use crate::mc::{parallel_mean, McConfig};
use crate::rng::{complex_normal, stream, Domain};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FixedPointSolution<T = f64> {
    pub a: T,
    /// `|sum_k g_k/(g_k + 1/a) - L|`
    pub residual: T,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundMethod {
    MonteCarlo,
    Asymptotic,
    InfiniteSystem,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BoundResult<T = f64> {
    /// bits/s/Hz/user
    pub c_ub: T,
    pub method: BoundMethod,
    /// Monte Carlo standard error.
    pub stderr: Option<T>,
    /// Common fixed point `a`, for the isotropic and infinite-system forms.
    pub fixed_point: Option<T>,
}

/// Distribution of the transmitted symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SignalModel {
    #[default]
    GaussianIid,
}

fn check_dimensions(k: usize, l: usize) -> Result<()> {
    if l == 0 {
        return Err(Error::param("L", "coherence length must be at least 1"));
    }
    if k <= l {
        return Err(Error::Precondition(format!(
            "the bound needs more transmitters than coherence symbols (K = {k}, L = {l}); \
             with K <= L it grows without limit in the power"
        )));
    }
    Ok(())
}

/// `sum_k a g_k / (1 + a g_k)`, strictly increasing in `a`.
fn occupancy<T: Real>(g: &[T], a: T) -> T {
    g.iter().map(|&x| a * x / (T::one() + a * x)).sum()
}

/// Bisection for the root of an increasing map `f(a) = target` on `a > 0`,
/// working in `ln a`. `start` must satisfy `f(start) <= target`.
fn solve_increasing<T: Real>(
    mut f: impl FnMut(T) -> Result<T>,
    target: T,
    start: T,
    rtol: T,
) -> Result<(T, T, usize)> {
    let mut lo = start.ln();
    let mut hi = lo;
    let mut iterations = 0;
    let mut f_hi = f(hi.exp())?;
    while f_hi < target {
        lo = hi;
        hi += T::LN_2();
        iterations += 1;
        if hi > T::max_value().ln() - T::lit(2.0) {
            return Err(Error::Numerical("fixed-point bracket overflowed".into()));
        }
        f_hi = f(hi.exp())?;
    }
    let mut best = (hi.exp(), (f_hi - target).abs());
    while hi - lo > rtol * (T::one() + hi.abs()) {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid.exp())?;
        iterations += 1;
        if (v - target).abs() < best.1 {
            best = (mid.exp(), (v - target).abs());
        }
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((best.0, best.1, iterations))
}

/// Nonnegative solution `a` of `sum_k g_k / (g_k + 1/a) = L`.
///
/// The left side is bounded by the number of nonzero gains, so at least
/// `L + 1` of them are required.
pub fn fixed_point_a<T: Real>(g_row: &[T], l: usize) -> Result<FixedPointSolution<T>> {
    check_dimensions(g_row.len(), l)?;
    if g_row.iter().any(|&x| !(x >= T::zero()) || !x.is_finite()) {
        return Err(Error::param("g", "gains must be finite and >= 0"));
    }
    let nonzero = g_row.iter().filter(|&&x| x > T::zero()).count();
    if nonzero <= l {
        return Err(Error::NoFixedPoint { nonzero, coherence: l });
    }
    let target = T::from_usize_lossy(l);
    let total: T = g_row.iter().copied().sum();
    // occupancy(a) < a * total, so the root exceeds L / total
    let start = target / total;
    let (a, residual, iterations) =
        solve_increasing(|a| Ok(occupancy(g_row, a)), target, start, T::epsilon() * T::lit(4.0))?;
    Ok(FixedPointSolution { a, residual, iterations })
}

fn row_term<T: Real>(g_row: &[T], l: usize) -> Result<(T, T)> {
    let fp = fixed_point_a(g_row, l)?;
    let lf = T::from_usize_lossy(l);
    let logs: T = g_row.iter().map(|&g| (fp.a * g).ln_1p()).sum();
    Ok(((fp.a / lf).log2() - logs * T::LOG2_E() / lf, fp.a))
}

/// Large-system approximation of the bound for a general profile.
pub fn asymptotic_upper_bound<T: Real>(profile: &GeometryProfile<T>, l: usize) -> Result<BoundResult<T>> {
    let (n, k) = (profile.receivers(), profile.transmitters());
    check_dimensions(k, l)?;
    let terms = (0..n)
        .into_par_iter()
        .map(|i| row_term(profile.row(i), l).map(|t| t.0))
        .collect::<Result<Vec<T>>>()?;
    let nf = T::from_usize_lossy(n);
    let kf = T::from_usize_lossy(k);
    Ok(BoundResult {
        c_ub: nf / kf * T::LOG2_E() + terms.into_iter().sum::<T>() / kf,
        method: BoundMethod::Asymptotic,
        stderr: None,
        fixed_point: None,
    })
}

/// Large-system bound when every receiver sees the same multiset of shares
/// `g_set` (which must sum to one); `n_over_k` is `N/K`.
pub fn isotropic_upper_bound<T: Real>(g_set: &[T], l: usize, n_over_k: T) -> Result<BoundResult<T>> {
    let total: T = g_set.iter().copied().sum();
    if (total - T::one()).abs() > T::lit(1e3) * T::epsilon() * T::from_usize_lossy(g_set.len().max(1)) {
        return Err(Error::param("g", format!("shares must sum to 1, got {total}")));
    }
    if !(n_over_k > T::zero()) {
        return Err(Error::param("n_over_k", "must be > 0"));
    }
    let (term, a) = row_term(g_set, l)?;
    Ok(BoundResult {
        c_ub: n_over_k * (T::LOG2_E() + term),
        method: BoundMethod::Asymptotic,
        stderr: None,
        fixed_point: Some(a),
    })
}

/// Monte Carlo estimate of the bound with IID unit-variance complex
/// Gaussian signals. With `mc.receiver_subsample = Some(m)` each trial
/// averages over `m` receivers drawn without replacement, which leaves the
/// estimator unbiased.
pub fn mc_upper_bound<T: Real>(
    profile: &GeometryProfile<T>,
    l: usize,
    signal: SignalModel,
    mc: &McConfig,
) -> Result<BoundResult<T>> {
    let SignalModel::GaussianIid = signal;
    mc.validate()?;
    let (n, k) = (profile.receivers(), profile.transmitters());
    check_dimensions(k, l)?;
    for i in 0..n {
        let nonzero = profile.row(i).iter().filter(|&&x| x > T::zero()).count();
        if nonzero < l {
            return Err(Error::Precondition(format!(
                "receiver {i} sees only {nonzero} nonzero gains; X^H G X is singular for L = {l}"
            )));
        }
    }
    let m = mc.receiver_subsample.map_or(n, |m| m.min(n));
    let scale = T::from_usize_lossy(n) / T::from_usize_lossy(k) / T::from_usize_lossy(l) * T::LOG2_E()
        / T::from_usize_lossy(m);
    let est = parallel_mean(mc.trials, |t| {
        let mut rng = stream(mc.master_seed, Domain::Signal, t as u64);
        let x = CMatrix::from_fn(k, l, |_, _| complex_normal::<T, _>(&mut rng));
        let receivers: Vec<usize> = if m == n {
            (0..n).collect()
        } else {
            let mut pick = stream(mc.master_seed, Domain::ReceiverSubsample, t as u64);
            sample(&mut pick, n, m).into_vec()
        };
        let mut acc = T::zero();
        for r in receivers {
            acc -= ln_det_hpd(weighted_gram(&x, profile.row(r)))?;
        }
        Ok(acc * scale)
    })?;
    Ok(BoundResult {
        c_ub: est.mean,
        method: BoundMethod::MonteCarlo,
        stderr: Some(est.stderr),
        fixed_point: None,
    })
}

/// Series orders used for the continuum tail of the nonlinear lattice sums.
const SERIES_TERMS: usize = 6;

/// Large-system bound for the entire (infinite) hexagonal system, where
/// every receiver sees the full lattice of centered users.
pub fn infinite_system_bound<T: Real>(layout: &HexLayout<T>, l: usize) -> Result<BoundResult<T>> {
    if l == 0 {
        return Err(Error::param("L", "coherence length must be at least 1"));
    }
    let mut lattice = GainLattice::new(*layout, Sector::S3);
    let d = T::one() / lattice.sum(|y| y, &TailSeries::linear(T::one()))?.value;
    let lf = T::from_usize_lossy(l);
    // alternating series of x/(1+x) and ln(1+x)
    let sign = |j: usize| if j.is_multiple_of(2) { T::one() } else { -T::one() };
    let occ_coeffs: Vec<T> = (0..SERIES_TERMS).map(sign).collect();
    let log_coeffs: Vec<T> = (0..SERIES_TERMS).map(|j| sign(j) / T::from_usize_lossy(j + 1)).collect();

    let occupancy = |lat: &mut GainLattice<T>, a: T| -> Result<T> {
        let s = a * d;
        let series = TailSeries {
            coeffs: occ_coeffs.clone(),
            scale: s,
        };
        Ok(lat.sum(|y| s * y / (T::one() + s * y), &series)?.value)
    };
    // occupancy(a) < a, so a > L
    let (a, _, _) = solve_increasing(|a| occupancy(&mut lattice, a), lf, lf, T::lit(1e-12))?;
    let s = a * d;
    let logs = lattice
        .sum(
            |y| (s * y).ln_1p(),
            &TailSeries {
                coeffs: log_coeffs,
                scale: s,
            },
        )?
        .value;
    Ok(BoundResult {
        c_ub: (a / lf).log2() + T::LOG2_E() - logs * T::LOG2_E() / lf,
        method: BoundMethod::InfiniteSystem,
        stderr: None,
        fixed_point: Some(a),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_fixed_point_closed_form() {
        let g = vec![1.0 / 200.0; 200];
        let fp = fixed_point_a(&g, 100).unwrap();
        assert_relative_eq!(fp.a, 200.0, max_relative = 1e-12);
        assert!(fp.residual < 1e-12 * 100.0);
    }

    #[test]
    fn two_gain_fixed_point() {
        // 0.9/(0.9 + b) + 0.1/(0.1 + b) = 1  =>  b^2 = 0.09
        let fp = fixed_point_a(&[0.9, 0.1], 1).unwrap();
        assert_relative_eq!(fp.a, 10.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn unreachable_level_set() {
        assert!(matches!(
            fixed_point_a(&[0.5, 0.5, 0.0, 0.0], 2),
            Err(Error::NoFixedPoint { nonzero: 2, coherence: 2 })
        ));
        assert!(matches!(fixed_point_a(&[0.5, 0.5], 2), Err(Error::Precondition(_))));
    }

    #[test]
    fn uniform_bound_closed_form() {
        let p = GeometryProfile::<f64>::uniform(200, 200).unwrap();
        let b = asymptotic_upper_bound(&p, 100).unwrap();
        // log2 e + log2(200/100) - 2 log2(2)
        let exact = std::f64::consts::LOG2_E - 1.0;
        assert_relative_eq!(b.c_ub, exact, max_relative = 1e-12);
        let iso = isotropic_upper_bound(&[1.0 / 200.0; 200], 100, 1.0).unwrap();
        assert_relative_eq!(iso.c_ub, exact, max_relative = 1e-12);
        assert_relative_eq!(iso.fixed_point.unwrap(), 200.0, max_relative = 1e-12);
    }

    #[test]
    fn isotropic_profile_matches_general_form() {
        let set = [0.5, 0.2, 0.1, 0.08, 0.05, 0.04, 0.03];
        let p = GeometryProfile::isotropic(&set, 7).unwrap();
        let a = asymptotic_upper_bound(&p, 3).unwrap().c_ub;
        let b = isotropic_upper_bound(&set, 3, 1.0).unwrap().c_ub;
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn mc_rejects_k_not_above_l() {
        let p = GeometryProfile::<f64>::uniform(2, 2).unwrap();
        let mc = McConfig::new(10, 1).unwrap();
        assert!(matches!(
            mc_upper_bound(&p, 2, SignalModel::GaussianIid, &mc),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn mc_is_invariant_to_transmitter_relabeling() {
        // permuting columns of every row permutes the rows of X, which has
        // the same distribution; with a fixed seed the estimate changes only
        // by sampling noise
        let rows = vec![vec![0.5, 0.3, 0.15, 0.05], vec![0.1, 0.2, 0.3, 0.4]];
        let perm = [2, 0, 3, 1];
        let permuted: Vec<Vec<f64>> = rows.iter().map(|r| perm.iter().map(|&j| r[j]).collect()).collect();
        let mc = McConfig::new(20_000, 5).unwrap();
        let a = mc_upper_bound(&GeometryProfile::from_shares(rows, vec![1.0; 2]).unwrap(), 2, SignalModel::GaussianIid, &mc).unwrap();
        let b = mc_upper_bound(&GeometryProfile::from_shares(permuted, vec![1.0; 2]).unwrap(), 2, SignalModel::GaussianIid, &mc).unwrap();
        let se = (a.stderr.unwrap().powi(2) + b.stderr.unwrap().powi(2)).sqrt();
        assert!((a.c_ub - b.c_ub).abs() < 4.0 * se, "{} vs {}", a.c_ub, b.c_ub);
    }

    #[test]
    fn infinite_system_l1000() {
        let b = infinite_system_bound(&HexLayout::<f64>::reference(), 1000).unwrap();
        assert!((b.c_ub - 7.98).abs() < 0.02, "{}", b.c_ub);
    }
}
