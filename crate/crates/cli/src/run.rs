//! Executes a resolved configuration and writes its outputs.

use std::path::PathBuf;
use std::time::Instant;

use serde_json::{json, Value};

use coop_limits::coherent::{coherent_ceiling, coherent_curve, AlphaSearch, PilotConfig};
use coop_limits::curve::SpectralEfficiencyCurve;
use coop_limits::fading::{doppler_from_physical, effective_coherence, FadingModel};
use coop_limits::geometry::{
    geometry_profile, normalization_constant, out_of_cluster_sir, wraparound_fragment, ClusterSpec, GeometryProfile,
    HexLayout, Sector, SectorId, UserPlacement,
};
use coop_limits::linksim::{linksim_curve, MimoClusterConfig};
use coop_limits::mc::McConfig;
use coop_limits::noncoherent::{
    asymptotic_upper_bound, infinite_system_bound, mc_upper_bound, BoundResult, SignalModel,
};
use coop_limits::regimes::{
    invert_effective_sir, saturation_report, sir_cdf, SaturationReference, SaturationReport, SirCdf,
};
use coop_limits::{to_db, Error};

use crate::config::{ClusterArg, Experiment, ExperimentConfig, PlacementArg};
use crate::error::CliError;
use crate::output::{cell, num, nums, OutputSink, Report, Series};

pub struct Outcome {
    pub report: Report,
    pub report_path: PathBuf,
}

/// Runs the experiment, inside a pool of `threads` workers when capped.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut sink = OutputSink::new(&cfg.out, &cfg.experiment.slug(), cfg.gnuplot)?;
    let results = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::config("threads", e.to_string()))?
            .install(|| execute(cfg, &mut sink))?,
        None => execute(cfg, &mut sink)?,
    };
    let report = Report {
        experiment: cfg.experiment.to_string(),
        config: cfg.clone(),
        results,
        files: sink.files().to_vec(),
        seeds: json!({
            "master": cfg.seed,
            "generator": "ChaCha8, one stream per (domain, trial)",
        }),
        runtime_s: start.elapsed().as_secs_f64(),
        version: coop_limits::VERSION.to_string(),
    };
    let report_path = sink.write_report(&report)?;
    Ok(Outcome { report, report_path })
}

fn execute(cfg: &ExperimentConfig, sink: &mut OutputSink) -> Result<Value, CliError> {
    match cfg.experiment {
        Experiment::GeometrySir => geometry_sir(cfg, sink),
        Experiment::SirCdf => sir_cdf_experiment(cfg, sink),
        Experiment::CoherentCurve => coherent_experiment(cfg, sink),
        Experiment::NoncoherentMc => noncoherent(cfg, sink, true),
        Experiment::NoncoherentAsymptotic => noncoherent(cfg, sink, false),
        Experiment::InfiniteBound => infinite_bound(cfg, sink),
        Experiment::InvertSir => invert_sir(cfg, sink),
        Experiment::Linksim => linksim(cfg, sink),
        Experiment::PaperExample(n) => paper_example(n, cfg, sink),
    }
}

fn layout(cfg: &ExperimentConfig) -> Result<HexLayout<f64>, CliError> {
    cfg.layout()
}

fn placement(cfg: &ExperimentConfig) -> UserPlacement {
    match cfg.placement {
        PlacementArg::Centered => UserPlacement::Centered,
        PlacementArg::Randomized => UserPlacement::Randomized { seed: cfg.seed },
    }
}

fn mc(cfg: &ExperimentConfig) -> Result<McConfig, CliError> {
    Ok(McConfig::new(cfg.trials, cfg.seed)?)
}

fn pilot(cfg: &ExperimentConfig) -> PilotConfig<f64> {
    match cfg.alpha {
        Some(a) => PilotConfig::Fixed(a),
        None => PilotConfig::Optimize(AlphaSearch::default()),
    }
}

fn fading(cfg: &ExperimentConfig, l: usize) -> Result<FadingModel<f64>, CliError> {
    Ok(match cfg.fd {
        Some(fd) => FadingModel::continuous_rect(fd)?,
        None => FadingModel::block(l)?,
    })
}

fn grid(cfg: &ExperimentConfig) -> Result<Vec<f64>, CliError> {
    cfg.snr_grid.points()
}

fn member_json(m: &SectorId) -> Value {
    json!({ "u": m.u, "v": m.v, "sector": m.sector.number() })
}

fn origin() -> SectorId {
    SectorId::new(0, 0, Sector::S3)
}

fn geometry_sir(cfg: &ExperimentConfig, sink: &mut OutputSink) -> Result<Value, CliError> {
    let l = layout(cfg)?;
    let spec = cfg.cluster.spec();
    let d = normalization_constant(&l, origin())?;
    let sir = out_of_cluster_sir(&l, &spec, placement(cfg))?;
    let sir_db: Vec<f64> = sir.iter().map(|&s| to_db(s)).collect();
    let mut out = json!({ "D": d, "sir_dB": nums(&sir_db) });
    if spec.is_whole_system() {
        return Ok(out);
    }
    let members = spec.members()?;
    let profile = geometry_profile(&l, &spec, placement(cfg))?;
    let rows: Vec<Vec<String>> = members
        .iter()
        .enumerate()
        .map(|(n, m)| {
            let mut r = vec![n.to_string(), m.u.to_string(), m.v.to_string(), m.sector.number().to_string()];
            r.push(cell(sir_db[n]));
            r.extend(profile.row(n).iter().map(|&g| cell(g)));
            r
        })
        .collect();
    let mut header = vec!["receiver".to_string(), "u".into(), "v".into(), "sector".into(), "SIR_dB".into()];
    header.extend((0..members.len()).map(|k| format!("g_to_{k}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    sink.table("profile", &header, &rows)?;
    out["members"] = members.iter().map(member_json).collect();
    out["g"] = profile.rows().map(nums).collect();
    Ok(out)
}

fn cdf_summary(cdf: &SirCdf<f64>) -> Value {
    json!({
        "median_dB": num(cdf.median()),
        "p10_dB": num(cdf.quantile(0.1)),
        "p90_dB": num(cdf.quantile(0.9)),
        "fraction_below_20dB": cdf.fraction_below(20.0),
        "samples": cdf.samples,
        "receivers": cdf.receivers,
    })
}

fn write_cdf(cdf: &SirCdf<f64>, sink: &mut OutputSink) -> Result<(), CliError> {
    let xs = cdf.sorted_db();
    let n = xs.len() as f64;
    let rows: Vec<Vec<String>> = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| vec![cell(x), cell((i + 1) as f64 / n)])
        .collect();
    let name = sink.table("sir-cdf", &["SIR_dB", "CDF"], &rows)?;
    sink.plot(&name, "sir-cdf", "SIR (dB)", "CDF", &[Series { column: 2, title: "CDF", error_column: None }])
}

fn sir_cdf_experiment(cfg: &ExperimentConfig, sink: &mut OutputSink) -> Result<Value, CliError> {
    let cdf = sir_cdf(&layout(cfg)?, &cfg.cluster.spec(), cfg.samples, cfg.seed)?;
    write_cdf(&cdf, sink)?;
    Ok(cdf_summary(&cdf))
}

fn curve_json(c: &SpectralEfficiencyCurve<f64>) -> Value {
    json!({
        "scheme": c.scheme,
        "cluster_size": c.cluster_size,
        "coherence": c.coherence,
        "interference": c.interference,
        "points": c.points.iter().map(|p| json!({
            "snr_dB": p.snr_db,
            "c": num(p.c),
            "stderr": num(p.stderr),
            "alpha": p.alpha,
        })).collect::<Vec<_>>(),
    })
}

const CURVE_HEADER: [&str; 4] = ["SNR_dB", "C_bits_s_Hz_user", "stderr_bits_s_Hz_user", "alpha"];

fn write_curve(
    sink: &mut OutputSink,
    stem: &str,
    c: &SpectralEfficiencyCurve<f64>,
    labels: Option<&SaturationReport<f64>>,
) -> Result<(), CliError> {
    let mut header = CURVE_HEADER.to_vec();
    if labels.is_some() {
        header.push("regime");
    }
    let rows: Vec<Vec<String>> = c
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut r = vec![cell(p.snr_db), cell(p.c), cell(p.stderr), p.alpha.map(cell).unwrap_or_default()];
            if let Some(rep) = labels {
                r.push(format!("{:?}", rep.labels[i]));
            }
            r
        })
        .collect();
    let name = sink.table(stem, &header, &rows)?;
    sink.plot(
        &name,
        stem,
        "SNR (dB)",
        "bits/s/Hz/user",
        &[Series { column: 2, title: stem, error_column: Some(3) }],
    )
}

fn saturation_json(r: &SaturationReport<f64>) -> Value {
    json!({
        "c_inf": r.c_inf.map(num),
        "c_inf_converged": r.c_inf_converged,
        "snr_sat_dB": nums(&r.snr_sat_db),
        "labels": r.labels,
    })
}

/// Regime labels from the per-receiver SIR; `None` when the curve spans
/// too little SNR to say.
fn regimes(c: &SpectralEfficiencyCurve<f64>, sir: Vec<f64>) -> Result<Option<SaturationReport<f64>>, CliError> {
    match saturation_report(c, &SaturationReference::Sir(sir)) {
        Ok(r) => Ok(Some(r)),
        Err(Error::CurveTooShort { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn coherent_experiment(cfg: &ExperimentConfig, sink: &mut OutputSink) -> Result<Value, CliError> {
    coherent_for(cfg, sink, cfg.cluster, !cfg.no_out_of_cluster, "curve")
}

/// Profile for the noncoherent bounds: a cluster of the layout, or the
/// wraparound fragment when the whole system is requested.
fn bound_profile(cfg: &ExperimentConfig) -> Result<GeometryProfile<f64>, CliError> {
    let l = layout(cfg)?;
    Ok(match cfg.cluster {
        ClusterArg::Whole => wraparound_fragment(&l, cfg.side)?,
        c => geometry_profile(&l, &c.spec(), placement(cfg))?,
    })
}

fn bound_json(b: &BoundResult<f64>, l: usize) -> Value {
    json!({
        "L": l,
        "method": b.method,
        "c_ub": num(b.c_ub),
        "stderr": b.stderr.map(num),
        "a": b.fixed_point.map(num),
    })
}

fn noncoherent(cfg: &ExperimentConfig, sink: &mut OutputSink, monte_carlo: bool) -> Result<Value, CliError> {
    let profile = bound_profile(cfg)?;
    let mut rows = Vec::new();
    let mut out = Vec::new();
    for &l in &cfg.coherence {
        let b = if monte_carlo {
            let mut m = mc(cfg)?;
            if cfg.subsample < profile.receivers() {
                m = m.with_receiver_subsample(cfg.subsample)?;
            }
            mc_upper_bound(&profile, l, SignalModel::GaussianIid, &m)?
        } else {
            asymptotic_upper_bound(&profile, l)?
        };
        rows.push(vec![l.to_string(), cell(b.c_ub), b.stderr.map(cell).unwrap_or_default()]);
        out.push(bound_json(&b, l));
    }
    sink.table("bound", &["L_symbols", "C_ub_bits_s_Hz_user", "stderr_bits_s_Hz_user"], &rows)?;
    Ok(single_or_list(out, profile.transmitters()))
}

fn single_or_list(mut out: Vec<Value>, k: usize) -> Value {
    if out.len() == 1 {
        let mut v = out.remove(0);
        v["K"] = json!(k);
        v
    } else {
        json!({ "K": k, "bounds": out })
    }
}

fn infinite_rows(cfg: &ExperimentConfig, sink: &mut OutputSink) -> Result<Vec<Value>, CliError> {
    let l = layout(cfg)?;
    let mut rows = Vec::new();
    let mut out = Vec::new();
    for &len in &cfg.coherence {
        let b = infinite_system_bound(&l, len)?;
        let sir_db = to_db(invert_effective_sir(b.c_ub)?);
        rows.push(vec![
            len.to_string(),
            cell(b.c_ub),
            b.fixed_point.map(cell).unwrap_or_default(),
            cell(sir_db),
        ]);
        let mut v = bound_json(&b, len);
        v["equivalent_sir_dB"] = num(sir_db);
        out.push(v);
    }
    sink.table(
        "infinite-bound",
        &["L_symbols", "C_ub_bits_s_Hz_user", "a", "equivalent_SIR_dB"],
        &rows,
    )?;
    Ok(out)
}

fn infinite_bound(cfg: &ExperimentConfig, sink: &mut OutputSink) -> Result<Value, CliError> {
    let out = infinite_rows(cfg, sink)?;
    Ok(match <[Value; 1]>::try_from(out) {
        Ok([v]) => v,
        Err(out) => json!({ "bounds": out }),
    })
}

fn invert_sir(cfg: &ExperimentConfig, sink: &mut OutputSink) -> Result<Value, CliError> {
    let mut rows = Vec::new();
    let mut out = Vec::new();
    for &c in &cfg.c_inf {
        let db = to_db(invert_effective_sir(c)?);
        rows.push(vec![cell(c), cell(db)]);
        out.push(json!({ "c_inf": c, "sir_dB": num(db) }));
    }
    sink.table("invert-sir", &["C_inf_bits_s_Hz_user", "SIR_dB"], &rows)?;
    Ok(json!({ "inversions": out }))
}

fn linksim_pair(
    cfg: &ExperimentConfig,
    sink: &mut OutputSink,
    sir_db: Option<f64>,
    stem: &str,
) -> Result<Value, CliError> {
    let g = grid(cfg)?;
    let lc = MimoClusterConfig::reference(sir_db.unwrap_or(f64::INFINITY))?;
    let (max_sinr, tdma) = linksim_curve(&lc, &g, &mc(cfg)?)?;
    let rows: Vec<Vec<String>> = max_sinr
        .points
        .iter()
        .zip(&tdma.points)
        .map(|(m, t)| vec![cell(m.snr_db), cell(m.c), cell(m.stderr), cell(t.c), cell(t.stderr)])
        .collect();
    let name = sink.table(
        stem,
        &[
            "SNR_dB",
            "C_maxsinr_bits_s_Hz_user",
            "stderr_maxsinr_bits_s_Hz_user",
            "C_tdma_bits_s_Hz_user",
            "stderr_tdma_bits_s_Hz_user",
        ],
        &rows,
    )?;
    sink.plot(
        &name,
        stem,
        "SNR (dB)",
        "bits/s/Hz/user",
        &[
            Series { column: 2, title: "Max-SINR", error_column: Some(3) },
            Series { column: 4, title: "TDMA", error_column: Some(5) },
        ],
    )?;
    let top_ratio = max_sinr.points.last().zip(tdma.points.last()).map(|(m, t)| num(m.c / t.c));
    Ok(json!({
        "sir_dB": sir_db.map_or(num(f64::INFINITY), num),
        "pairs": lc.pairs,
        "antennas": lc.antennas,
        "max_sinr": curve_json(&max_sinr),
        "tdma": curve_json(&tdma),
        "maxsinr_over_tdma_at_top": top_ratio,
    }))
}

fn linksim(cfg: &ExperimentConfig, sink: &mut OutputSink) -> Result<Value, CliError> {
    let sir = if cfg.no_out_of_cluster { None } else { cfg.sir_db };
    linksim_pair(cfg, sink, sir, "linksim")
}

fn coherent_for(
    cfg: &ExperimentConfig,
    sink: &mut OutputSink,
    cluster: ClusterArg,
    include: bool,
    stem: &str,
) -> Result<Value, CliError> {
    let l = layout(cfg)?;
    let spec = cluster.spec();
    let c = coherent_curve(
        &l,
        &spec,
        placement(cfg),
        &fading(cfg, cfg.coherence[0])?,
        &grid(cfg)?,
        &mc(cfg)?,
        include,
        &pilot(cfg),
    )?;
    let sir = if include {
        out_of_cluster_sir(&l, &spec, placement(cfg))?
    } else {
        vec![f64::INFINITY]
    };
    let rep = regimes(&c, sir)?;
    write_curve(sink, stem, &c, rep.as_ref())?;
    Ok(json!({ "curve": curve_json(&c), "saturation": rep.as_ref().map(saturation_json) }))
}

fn paper_example(n: u8, cfg: &ExperimentConfig, sink: &mut OutputSink) -> Result<Value, CliError> {
    match n {
        1 => {
            let mut rows = Vec::new();
            let mut out = Vec::new();
            for &v in &cfg.velocity {
                let fd = doppler_from_physical(v, cfg.wavelength, cfg.coherence_bw)?;
                let l = effective_coherence(&FadingModel::continuous_rect(fd)?);
                rows.push(vec![cell(v), cell(v * 3.6), cell(fd), cell(l)]);
                out.push(json!({ "velocity_m_s": v, "fd": fd, "L": l }));
            }
            sink.table("doppler", &["velocity_m_s", "velocity_km_h", "fd_normalized", "L_symbols"], &rows)?;
            Ok(json!({
                "wavelength_m": cfg.wavelength,
                "coherence_bw_Hz": cfg.coherence_bw,
                "doppler": out,
            }))
        }
        2 => {
            let mut v = geometry_sir(cfg, sink)?;
            let members: Vec<SectorId> = ClusterSpec::SevenCell.members()?;
            v["seven_cell_members"] = members.iter().map(member_json).collect();
            Ok(v)
        }
        3 => {
            let mut curves = serde_json::Map::new();
            for (cluster, stem) in [
                (ClusterArg::Single, "k1"),
                (ClusterArg::Facing3, "k3"),
                (ClusterArg::SevenCell, "k21"),
            ] {
                curves.insert(stem.into(), coherent_for(cfg, sink, cluster, true, stem)?);
            }
            curves.insert("k3_no_interference".into(), coherent_for(cfg, sink, ClusterArg::Facing3, false, "k3-free")?);
            Ok(Value::Object(curves))
        }
        4 => {
            let l = layout(cfg)?;
            let spec = cfg.cluster.spec();
            let sir = out_of_cluster_sir(&l, &spec, UserPlacement::Centered)?;
            let sir_db: Vec<f64> = sir.iter().map(|&s| to_db(s)).collect();
            let profile = geometry_profile(&l, &spec, UserPlacement::Centered)?;
            let ceiling = coherent_ceiling(
                &profile,
                effective_coherence(&fading(cfg, cfg.coherence[0])?),
                &mc(cfg)?,
                &AlphaSearch::default(),
            )?;
            let cdf = sir_cdf(&l, &spec, cfg.samples, cfg.seed)?;
            write_cdf(&cdf, sink)?;
            Ok(json!({
                "sir_dB": nums(&sir_db),
                "c_inf": ceiling.c_inf,
                "c_inf_stderr": ceiling.stderr,
                "alpha": ceiling.alpha,
                "probe_snr_dB": ceiling.probe_db,
                "relative_change": ceiling.relative_change,
                "randomized_sir": cdf_summary(&cdf),
            }))
        }
        5 => {
            let frag = wraparound_fragment(&layout(cfg)?, cfg.side)?;
            let l = cfg.coherence[0];
            let asym = asymptotic_upper_bound(&frag, l)?;
            let mut m = mc(cfg)?;
            if cfg.subsample < frag.receivers() {
                m = m.with_receiver_subsample(cfg.subsample)?;
            }
            let sim = mc_upper_bound(&frag, l, SignalModel::GaussianIid, &m)?;
            sink.table(
                "fragment",
                &["method", "L_symbols", "C_ub_bits_s_Hz_user", "stderr_bits_s_Hz_user"],
                &[
                    vec!["monte-carlo".into(), l.to_string(), cell(sim.c_ub), sim.stderr.map(cell).unwrap_or_default()],
                    vec!["asymptotic".into(), l.to_string(), cell(asym.c_ub), String::new()],
                ],
            )?;
            Ok(json!({
                "side": cfg.side,
                "K": frag.transmitters(),
                "monte_carlo": bound_json(&sim, l),
                "asymptotic": bound_json(&asym, l),
            }))
        }
        6 => {
            let out = infinite_rows(cfg, sink)?;
            Ok(match <[Value; 1]>::try_from(out) {
                Ok([v]) => v,
                Err(out) => json!({ "bounds": out }),
            })
        }
        7 => {
            let free = linksim_pair(cfg, sink, None, "linksim-free")?;
            let sat = linksim_pair(cfg, sink, cfg.sir_db, "linksim")?;
            Ok(json!({ "interference_free": free, "with_interference": sat }))
        }
        _ => Err(CliError::config("experiment", format!("example id {n} is outside 1..=7"))),
    }
}
