//! Checks against closed forms and brute-force computations that share no
//! code with the library internals.

use coop_limits::geometry::{
    average_power_gain, normalization_constant, ring, HexLayout, Sector, SectorId, UserPlacement,
};
use coop_limits::geometry::GeometryProfile;
use coop_limits::mc::McConfig;
use coop_limits::noncoherent::{infinite_system_bound, mc_upper_bound, SignalModel};
use statrs::function::gamma::digamma;

/// For K = 2, L = 1, N = 1 and g = (1/2, 1/2) the quadratic form is half a
/// Gamma(2, 1) variable, so E[ln] = psi(2) - ln 2.
fn digamma_closed_form() -> f64 {
    0.5 * (1.0 - digamma(2.0) / std::f64::consts::LN_2)
}

#[test]
fn two_by_one_bound_matches_digamma() {
    let exact = digamma_closed_form();
    assert!((exact - 0.19503).abs() < 1e-5);
    let p = GeometryProfile::from_shares(vec![vec![0.5, 0.5]], vec![f64::INFINITY]).unwrap();
    let b = mc_upper_bound(&p, 1, SignalModel::GaussianIid, &McConfig::new(200_000, 21).unwrap()).unwrap();
    let se = b.stderr.unwrap();
    assert!((b.c_ub - exact).abs() < 4.0 * se, "{} vs {exact} (se {se})", b.c_ub);
}

/// Every centered-user gain seen by the sector-3 receiver of cell (0, 0),
/// listed tier by tier out to `tiers`.
fn brute_gains(layout: &HexLayout<f64>, tiers: usize) -> Vec<f64> {
    let rx = SectorId::new(0, 0, Sector::S3);
    let mut out = Vec::new();
    for t in 0..=tiers {
        let cells: Vec<(i64, i64)> = if t == 0 { vec![(0, 0)] } else { ring(t).collect() };
        for (u, v) in cells {
            for s in Sector::ALL {
                out.push(average_power_gain(rx, SectorId::new(u, v, s), UserPlacement::Centered, layout).unwrap());
            }
        }
    }
    out
}

/// Large-system bound of the sector-3 receiver when only the first `tiers`
/// tiers transmit.
fn truncated_bound(layout: &HexLayout<f64>, d: f64, tiers: usize, l: f64) -> (f64, f64) {
    let g: Vec<f64> = brute_gains(layout, tiers).iter().map(|x| x * d).collect();
    let occ = |a: f64| g.iter().map(|&x| a * x / (1.0 + a * x)).sum::<f64>();
    let (mut lo, mut hi) = (l.ln(), (l * 1e9).ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if occ(mid.exp()) < l {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = (0.5 * (lo + hi)).exp();
    let logs: f64 = g.iter().map(|&x| (a * x).ln_1p()).sum();
    ((a * std::f64::consts::E / l).log2() - logs / std::f64::consts::LN_2 / l, a)
}

#[test]
fn infinite_bound_matches_extrapolated_lattice() {
    let layout = HexLayout::<f64>::reference();
    let d = normalization_constant(&layout, SectorId::new(0, 0, Sector::S3)).unwrap();
    let total: f64 = brute_gains(&layout, 400).iter().sum();
    // the truncated sum is short of the full one only by a far tail
    assert!((total * d - 1.0).abs() < 1e-4, "{}", total * d);
    // truncation error decays like T^(2 - gamma); Richardson on T and 2T
    let (c1, a1) = truncated_bound(&layout, d, 200, 1000.0);
    let (c2, a2) = truncated_bound(&layout, d, 400, 1000.0);
    let w = 2f64.powf(layout.decay_exponent() - 2.0);
    let c = (w * c2 - c1) / (w - 1.0);
    let a = (w * a2 - a1) / (w - 1.0);
    let lib = infinite_system_bound(&layout, 1000).unwrap();
    assert!((lib.c_ub - c).abs() < 2e-4, "{} vs {c} (raw {c1}, {c2})", lib.c_ub);
    assert!((lib.fixed_point.unwrap() / a - 1.0).abs() < 1e-3);
}
