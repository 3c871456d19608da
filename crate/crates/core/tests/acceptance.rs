//! Acceptance checks against the reference results, one line per criterion.
//! Run with `cargo test -p coop-limits --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use coop_limits::coherent::{coherent_ceiling, coherent_curve, AlphaSearch, PilotConfig};
use coop_limits::coherent::{mmse_block, mmse_continuous, DopplerSpectrum};
use coop_limits::curve::SpectralEfficiencyCurve;
use coop_limits::fading::FadingModel;
use coop_limits::geometry::{
    geometry_profile, normalization_constant, out_of_cluster_sir, wraparound_fragment, ClusterSpec, GeometryProfile,
    HexLayout, Sector, SectorId, UserPlacement,
};
use coop_limits::linksim::{linksim_curve, MimoClusterConfig};
use coop_limits::mc::McConfig;
use coop_limits::noncoherent::{
    asymptotic_upper_bound, fixed_point_a, infinite_system_bound, isotropic_upper_bound, mc_upper_bound,
    SignalModel,
};
use coop_limits::regimes::{cinf_full_cooperation, intersection_snr_sat, invert_effective_sir, sir_cdf};
use coop_limits::{from_db, to_db};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use statrs::function::gamma::digamma;

type Outcome = Result<String, String>;

struct Runner {
    failures: usize,
}

impl Runner {
    fn check(&mut self, id: u32, name: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let mut outcome = f();
        let took = start.elapsed();
        if let (Ok(msg), Some(b)) = (&outcome, budget) {
            if took > b {
                outcome = Err(format!("{msg}; took {took:.1?}, budget {b:?}"));
            }
        }
        match outcome {
            Ok(msg) => println!("[PASS] {id:>2} {name}: {msg} ({took:.2?})"),
            Err(msg) => {
                self.failures += 1;
                println!("[FAIL] {id:>2} {name}: {msg} ({took:.2?})");
            }
        }
    }
}

fn within(label: &str, value: f64, target: f64, tol: f64) -> Outcome {
    let msg = format!("{label} = {value:.5} (target {target} +- {tol})");
    if (value - target).abs() <= tol {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn all(parts: Vec<Outcome>) -> Outcome {
    let failed = parts.iter().any(|p| p.is_err());
    let joined = parts
        .into_iter()
        .map(|p| match p {
            Ok(m) => m,
            Err(m) => format!("FAILED {m}"),
        })
        .collect::<Vec<_>>()
        .join("; ");
    if failed {
        Err(joined)
    } else {
        Ok(joined)
    }
}

fn require(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn e(err: coop_limits::Error) -> String {
    err.to_string()
}

fn layout() -> HexLayout<f64> {
    HexLayout::reference()
}

const PEDESTRIAN_L: f64 = 20_000.0;

fn normalization() -> Outcome {
    let d = normalization_constant(&layout(), SectorId::new(0, 0, Sector::S3)).map_err(e)?;
    within("D", d, 0.157, 0.002)
}

fn facing_sir() -> Outcome {
    let sir = out_of_cluster_sir(&layout(), &ClusterSpec::FacingThree, UserPlacement::Centered).map_err(e)?;
    all(sir
        .iter()
        .enumerate()
        .map(|(n, &s)| within(&format!("SIR_{}", n + 1), to_db(s), 9.2, 0.15))
        .collect())
}

fn sir_distribution() -> Outcome {
    let cdf = sir_cdf(&layout(), &ClusterSpec::FacingThree, 10_000, 2024).map_err(e)?;
    let below = cdf.fraction_below(20.0);
    all(vec![
        within("median dB", cdf.median(), 9.6, 0.3),
        require(
            (0.85..=0.93).contains(&below),
            format!("P(SIR < 20 dB) = {below:.4} (target [0.85, 0.93])"),
        ),
    ])
}

fn pilot() -> PilotConfig<f64> {
    PilotConfig::Optimize(AlphaSearch::default())
}

fn coherent_saturation() -> Outcome {
    let l = layout();
    let mc = McConfig::new(2000, 7).map_err(e)?;
    let profile = geometry_profile(&l, &ClusterSpec::FacingThree, UserPlacement::Centered).map_err(e)?;
    let ceiling = coherent_ceiling(&profile, PEDESTRIAN_L, &mc, &AlphaSearch::default()).map_err(e)?;
    let fading = FadingModel::block(20_000).map_err(e)?;
    let grid = [20.0, 40.0, 60.0];
    let with = coherent_curve(&l, &ClusterSpec::FacingThree, UserPlacement::Centered, &fading, &grid, &mc, true, &pilot())
        .map_err(e)?;
    let without =
        coherent_curve(&l, &ClusterSpec::FacingThree, UserPlacement::Centered, &fading, &grid, &mc, false, &pilot())
            .map_err(e)?;
    let c = |curve: &SpectralEfficiencyCurve<f64>, db: f64| curve.at(db).map(|p| p.c).unwrap_or(f64::NAN);
    let rise = c(&with, 60.0) - c(&with, 40.0);
    let free_rise = c(&without, 40.0) - c(&without, 20.0);
    all(vec![
        within("C_inf", ceiling.c_inf, 2.54, 0.1),
        require(
            rise < 0.05 * c(&with, 40.0),
            format!("C(60) - C(40) = {rise:.4} vs 5% of C(40) = {:.4}", 0.05 * c(&with, 40.0)),
        ),
        require(
            free_rise > 1.0,
            format!("interference-free C(40) - C(20) = {free_rise:.3} bits (needs > 1)"),
        ),
    ])
}

fn cluster_ordering() -> Outcome {
    let l = layout();
    let mc = McConfig::new(2000, 11).map_err(e)?;
    let fading = FadingModel::block(20_000).map_err(e)?;
    let at20 = |cluster: ClusterSpec| {
        coherent_curve(&l, &cluster, UserPlacement::Centered, &fading, &[20.0], &mc, true, &pilot())
            .map(|c| (c.points[0].c, c.points[0].stderr))
            .map_err(e)
    };
    let (c1, s1) = at20(ClusterSpec::Single)?;
    let (c3, s3) = at20(ClusterSpec::FacingThree)?;
    let (c21, s21) = at20(ClusterSpec::SevenCell)?;
    let m1 = (c3 - c1) / (s3 * s3 + s1 * s1).sqrt();
    let m21 = (c3 - c21) / (s3 * s3 + s21 * s21).sqrt();
    require(
        m1 > 3.0 && m21 > 3.0,
        format!("C(1) = {c1:.4}, C(3) = {c3:.4}, C(21) = {c21:.4}; margins {m1:.1} and {m21:.1} standard errors"),
    )
}

fn dirichlet_rows(rng: &mut ChaCha8Rng, rows: usize, k: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            let r: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let s: f64 = r.iter().sum();
            r.into_iter().map(|x| x / s).collect()
        })
        .collect()
}

fn fragment_bounds() -> Outcome {
    let frag = wraparound_fragment(&layout(), 20).map_err(e)?;
    let asym = asymptotic_upper_bound(&frag, 100).map_err(e)?;
    let mc = McConfig::new(20, 5).map_err(e)?.with_receiver_subsample(60).map_err(e)?;
    let sim = mc_upper_bound(&frag, 100, SignalModel::GaussianIid, &mc).map_err(e)?;

    // smaller random instances: the Monte Carlo/asymptotic gap shrinks as
    // K and L grow together
    let mut gaps = Vec::new();
    for scale in [1usize, 2, 4] {
        let (k, l) = (60 * scale, 20 * scale);
        let mut rng = ChaCha8Rng::seed_from_u64(31 + scale as u64);
        let mut sq = 0.0;
        let profiles = 6;
        for i in 0..profiles {
            let p = GeometryProfile::from_shares(dirichlet_rows(&mut rng, 4, k), vec![f64::INFINITY; 4]).map_err(e)?;
            let a = asymptotic_upper_bound(&p, l).map_err(e)?.c_ub;
            let m = mc_upper_bound(&p, l, SignalModel::GaussianIid, &McConfig::new(200, 100 + i).map_err(e)?)
                .map_err(e)?
                .c_ub;
            sq += (m - a) * (m - a);
        }
        gaps.push((sq / profiles as f64).sqrt());
    }
    let shrinking = gaps.windows(2).all(|w| w[1] < w[0]);
    all(vec![
        within("asymptotic", asym.c_ub, 5.181, 0.005),
        within("Monte Carlo", sim.c_ub, 5.183, 0.05),
        require(shrinking, format!("RMS gaps at x1, x2, x4: {gaps:?}")),
    ])
}

fn infinite_bounds() -> Outcome {
    let a = infinite_system_bound(&layout(), 20_000).map_err(e)?;
    let b = infinite_system_bound(&layout(), 1000).map_err(e)?;
    all(vec![within("L=20000", a.c_ub, 11.86, 0.02), within("L=1000", b.c_ub, 7.98, 0.02)])
}

fn sir_inversion() -> Outcome {
    all(vec![
        within("11.86 ->", to_db(invert_effective_sir(11.86).map_err(e)?), 39.96, 0.05),
        within("7.98 ->", to_db(invert_effective_sir(7.98).map_err(e)?), 28.02, 0.05),
    ])
}

fn digamma_oracle() -> Outcome {
    let exact = 0.5 * (1.0 - digamma(2.0) / std::f64::consts::LN_2);
    let p = GeometryProfile::from_shares(vec![vec![0.5, 0.5]], vec![f64::INFINITY]).map_err(e)?;
    let b = mc_upper_bound(&p, 1, SignalModel::GaussianIid, &McConfig::new(1_000_000, 3).map_err(e)?).map_err(e)?;
    all(vec![
        within("C_ub", b.c_ub, 0.19503, 0.002),
        within("vs closed form", b.c_ub - exact, 0.0, 0.002),
    ])
}

fn mmse_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let g = 10f64.powf(rng.gen_range(-4.0..0.0));
        let sinr = 10f64.powf(rng.gen_range(-3.0..6.0));
        let alpha = rng.gen_range(1e-4..0.99);
        let k = rng.gen_range(1..100usize);
        let l = rng.gen_range(1..200_000usize);
        let spec = DopplerSpectrum::Rectangular { doppler: 1.0 / (2.0 * l as f64) };
        let c = mmse_continuous(g, sinr, &spec, alpha, k).map_err(e)?;
        let b = mmse_block(g, sinr, l as f64, alpha, k);
        worst = worst.max((c - b).abs() / b / f64::EPSILON);
    }
    require(worst <= 4.0, format!("worst relative difference {worst:.1} ulp over 1000 points"))
}

fn linksim() -> Outcome {
    let grid: Vec<f64> = (0..=12).map(|i| 5.0 * i as f64).collect();
    let mc = McConfig::new(2000, 8).map_err(e)?;
    let (m_free, t_free) = linksim_curve(&MimoClusterConfig::reference(f64::INFINITY).map_err(e)?, &grid, &mc).map_err(e)?;
    let (m_sat, t_sat) = linksim_curve(&MimoClusterConfig::reference(20.0).map_err(e)?, &grid, &mc).map_err(e)?;
    let slope = |c: &SpectralEfficiencyCurve<f64>| {
        (c.at(40.0).map(|p| p.c).unwrap_or(f64::NAN) - c.at(30.0).map(|p| p.c).unwrap_or(f64::NAN)) * 3.0 / 10.0
    };
    let ceiling = |c: &SpectralEfficiencyCurve<f64>| c.points.last().map(|p| p.c).unwrap_or(f64::NAN);
    let (sm, st) = (slope(&m_free), slope(&t_free));
    let inflection_m = intersection_snr_sat(&m_free, ceiling(&m_sat)).map_err(e)?;
    let inflection_t = intersection_snr_sat(&t_free, ceiling(&t_sat)).map_err(e)?;
    let ratio = ceiling(&m_sat) / ceiling(&t_sat);
    all(vec![
        require((0.85..=1.05).contains(&sm), format!("Max-SINR slope {sm:.3} bits/3 dB")),
        require((0.55..=0.72).contains(&st), format!("TDMA slope {st:.3} bits/3 dB")),
        within("Max-SINR inflection dB", inflection_m, 20.0, 3.0),
        within("TDMA inflection dB", inflection_t, 20.0, 3.0),
        require(ratio >= 1.5, format!("ceiling ratio {ratio:.3}")),
    ])
}

fn property_suites() -> Outcome {
    let l = layout();
    let mut parts = Vec::new();

    let mut worst_row: f64 = 0.0;
    let mut worst_scale: f64 = 0.0;
    let scaled = l.with_cell_radius(37.5).map_err(e)?;
    for cluster in [ClusterSpec::Single, ClusterSpec::FacingThree, ClusterSpec::SevenCell] {
        for place in [UserPlacement::Centered, UserPlacement::Randomized { seed: 4 }] {
            let p = geometry_profile(&l, &cluster, place).map_err(e)?;
            let q = geometry_profile(&scaled, &cluster, place).map_err(e)?;
            for n in 0..p.receivers() {
                worst_row = worst_row.max((p.row(n).iter().sum::<f64>() - 1.0).abs());
                for k in 0..p.transmitters() {
                    worst_scale = worst_scale.max((p.g(n, k) - q.g(n, k)).abs());
                }
                worst_scale = worst_scale.max((p.sir()[n] / q.sir()[n] - 1.0).abs());
            }
        }
    }
    parts.push(require(worst_row < 1e-12, format!("row sums within {worst_row:.1e}")));
    parts.push(require(worst_scale < 1e-9, format!("R scaling changes <= {worst_scale:.1e}")));

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst_fp: f64 = 0.0;
    for _ in 0..200 {
        let k = rng.gen_range(3..300usize);
        let g: Vec<f64> = (0..k).map(|_| rng.gen_range(1e-6..1.0)).collect();
        let lcoh = rng.gen_range(1..k);
        let fp = fixed_point_a(&g, lcoh).map_err(e)?;
        let occ: f64 = g.iter().map(|&x| x / (x + 1.0 / fp.a)).sum();
        worst_fp = worst_fp.max((occ - lcoh as f64).abs() / lcoh as f64);
    }
    parts.push(require(worst_fp < 1e-12, format!("fixed-point residual / L <= {worst_fp:.1e}")));

    let mut worst_trip: f64 = 0.0;
    for i in 0..=90 {
        let s = from_db(-20.0 + i as f64);
        let back = invert_effective_sir(cinf_full_cooperation(s)).map_err(e)?;
        worst_trip = worst_trip.max((back / s - 1.0).abs());
    }
    parts.push(require(worst_trip < 1e-8, format!("inversion round trip <= {worst_trip:.1e}")));

    let a = fixed_point_a(&[0.005f64; 200], 100).map_err(e)?.a;
    let uni = isotropic_upper_bound(&[0.005f64; 200], 100, 1.0).map_err(e)?.c_ub;
    parts.push(require(
        (a - 200.0).abs() < 1e-9 && (uni - 0.4427).abs() < 1e-4,
        format!("uniform a = {a}, bound = {uni:.5}"),
    ));

    let vanishing: Vec<f64> = [2usize, 4, 8, 16, 64]
        .iter()
        .map(|&r| isotropic_upper_bound(&vec![1.0 / (10 * r) as f64; 10 * r], 10, 1.0).map(|b| b.c_ub))
        .collect::<Result<_, _>>()
        .map_err(e)?;
    parts.push(require(
        vanishing.windows(2).all(|w| w[1] < w[0]),
        format!("bound vs K/L: {vanishing:.4?}"),
    ));

    let run = |threads: usize| -> Result<(u64, u64), String> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|x| x.to_string())?;
        pool.install(|| {
            let p = GeometryProfile::<f64>::uniform(8, 8).map_err(e)?;
            let mc = McConfig::new(101, 6).map_err(e)?;
            let b = mc_upper_bound(&p, 3, SignalModel::GaussianIid, &mc).map_err(e)?;
            let cdf = sir_cdf(&layout(), &ClusterSpec::FacingThree, 300, 6).map_err(e)?;
            Ok((b.c_ub.to_bits(), cdf.median().to_bits()))
        })
    };
    let (one, many) = (run(1)?, run(4)?);
    parts.push(require(one == many, "1 and 4 threads bit-identical".to_string()));
    all(parts)
}

fn main() -> ExitCode {
    let mut r = Runner { failures: 0 };
    let secs = |s: u64| Some(Duration::from_secs(s));
    r.check(1, "normalization constant", secs(1), normalization);
    r.check(2, "facing-sector SIR", secs(1), facing_sir);
    r.check(3, "SIR distribution", secs(60), sir_distribution);
    r.check(4, "coherent saturation", None, coherent_saturation);
    r.check(5, "cluster-size ordering", None, cluster_ordering);
    r.check(6, "fragment bounds", secs(1800), fragment_bounds);
    r.check(7, "infinite-system bounds", secs(120), infinite_bounds);
    r.check(8, "SIR inversion", secs(1), sir_inversion);
    r.check(9, "digamma oracle", secs(10), digamma_oracle);
    r.check(10, "MMSE equivalence", None, mmse_equivalence);
    r.check(11, "linksim slopes and ceiling", None, linksim);
    r.check(12, "property suites", None, property_suites);
    if r.failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{} criteria failed", r.failures);
        ExitCode::FAILURE
    }
}
