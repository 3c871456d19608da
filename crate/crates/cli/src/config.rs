//! Experiment configuration: a plain `key = value` file overlaid by
//! command-line flags, resolved against per-experiment defaults.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const OUT_ENV: &str = "COOP_LIMITS_OUT";
pub const DEFAULT_OUT: &str = "coop-limits-out";

pub const EXPERIMENT_NAMES: [&str; 9] = [
    "geometry-sir",
    "sir-cdf",
    "coherent-curve",
    "noncoherent-mc",
    "noncoherent-asymptotic",
    "infinite-bound",
    "invert-sir",
    "linksim",
    "paper-example",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    GeometrySir,
    SirCdf,
    CoherentCurve,
    NoncoherentMc,
    NoncoherentAsymptotic,
    InfiniteBound,
    InvertSir,
    Linksim,
    PaperExample(u8),
}

impl Experiment {
    /// Parses a name plus the optional example id.
    pub fn parse(name: &str, id: Option<&str>) -> Result<Self, CliError> {
        let e = match name {
            "geometry-sir" => Experiment::GeometrySir,
            "sir-cdf" => Experiment::SirCdf,
            "coherent-curve" => Experiment::CoherentCurve,
            "noncoherent-mc" => Experiment::NoncoherentMc,
            "noncoherent-asymptotic" => Experiment::NoncoherentAsymptotic,
            "infinite-bound" => Experiment::InfiniteBound,
            "invert-sir" => Experiment::InvertSir,
            "linksim" => Experiment::Linksim,
            "paper-example" => {
                let raw = id.ok_or_else(|| CliError::config("experiment", "paper-example needs an id from 1 to 7"))?;
                let n: u8 = raw
                    .parse()
                    .map_err(|_| CliError::config("experiment", format!("example id `{raw}` is not a number")))?;
                if !(1..=7).contains(&n) {
                    return Err(CliError::config("experiment", format!("example id {n} is outside 1..=7")));
                }
                Experiment::PaperExample(n)
            }
            other => return Err(CliError::UnknownExperiment(other.to_string())),
        };
        if id.is_some() && !matches!(e, Experiment::PaperExample(_)) {
            return Err(CliError::config("experiment", format!("`{name}` takes no id")));
        }
        Ok(e)
    }

    /// Stem for output file names.
    pub fn slug(&self) -> String {
        match self {
            Experiment::PaperExample(n) => format!("paper-example-{n}"),
            other => other.to_string(),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Experiment::GeometrySir => "geometry-sir",
            Experiment::SirCdf => "sir-cdf",
            Experiment::CoherentCurve => "coherent-curve",
            Experiment::NoncoherentMc => "noncoherent-mc",
            Experiment::NoncoherentAsymptotic => "noncoherent-asymptotic",
            Experiment::InfiniteBound => "infinite-bound",
            Experiment::InvertSir => "invert-sir",
            Experiment::Linksim => "linksim",
            Experiment::PaperExample(n) => return write!(f, "paper-example {n}"),
        };
        f.write_str(s)
    }
}

impl Serialize for Experiment {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Experiment {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let mut it = s.split_whitespace();
        let name = it.next().unwrap_or_default();
        Experiment::parse(name, it.next()).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterArg {
    Single,
    Facing3,
    #[serde(rename = "7cell")]
    SevenCell,
    Whole,
}

impl FromStr for ClusterArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "single" | "1" => Ok(ClusterArg::Single),
            "facing3" | "3" => Ok(ClusterArg::Facing3),
            "7cell" | "21" => Ok(ClusterArg::SevenCell),
            "whole" => Ok(ClusterArg::Whole),
            _ => Err(format!("expected single, facing3, 7cell or whole, got `{s}`")),
        }
    }
}

impl ClusterArg {
    pub fn spec(self) -> coop_limits::geometry::ClusterSpec {
        use coop_limits::geometry::ClusterSpec;
        match self {
            ClusterArg::Single => ClusterSpec::Single,
            ClusterArg::Facing3 => ClusterSpec::FacingThree,
            ClusterArg::SevenCell => ClusterSpec::SevenCell,
            ClusterArg::Whole => ClusterSpec::WholeSystem,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlacementArg {
    Centered,
    Randomized,
}

impl FromStr for PlacementArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "centered" => Ok(PlacementArg::Centered),
            "randomized" => Ok(PlacementArg::Randomized),
            _ => Err(format!("expected centered or randomized, got `{s}`")),
        }
    }
}

/// Inclusive SNR grid `lo:hi:step` in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl SnrGrid {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        coop_limits::curve::snr_grid(self.lo, self.hi, self.step).map_err(|e| CliError::config("snr_grid", e.to_string()))
    }
}

impl FromStr for SnrGrid {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected lo:hi:step in dB, got `{s}`"));
        }
        let num = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("`{x}` is not a number"));
        let g = SnrGrid {
            lo: num(parts[0])?,
            hi: num(parts[1])?,
            step: num(parts[2])?,
        };
        if !(g.step > 0.0) || !(g.lo <= g.hi) || !g.lo.is_finite() || !g.hi.is_finite() {
            return Err(format!("need finite lo <= hi and step > 0, got `{s}`"));
        }
        Ok(g)
    }
}

impl fmt::Display for SnrGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.step)
    }
}

/// Values supplied explicitly through a file or flags; `None` means "use the
/// experiment default".
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub experiment: Option<String>,
    pub example_id: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub threads: Option<usize>,
    pub gamma: Option<f64>,
    pub q_db: Option<f64>,
    pub coherence: Option<usize>,
    pub fd: Option<f64>,
    pub cluster: Option<ClusterArg>,
    pub placement: Option<PlacementArg>,
    pub snr_grid: Option<SnrGrid>,
    /// `Some(inf)` is an explicit interference-free setting.
    pub sir_db: Option<f64>,
    pub no_out_of_cluster: Option<bool>,
    pub samples: Option<usize>,
    pub side: Option<usize>,
    pub subsample: Option<usize>,
    pub alpha: Option<f64>,
    pub c_inf: Option<Vec<f64>>,
    pub wavelength: Option<f64>,
    pub coherence_bw: Option<f64>,
    pub velocity: Option<Vec<f64>>,
    pub gnuplot: Option<bool>,
    /// Keys that were set, for deviation reporting.
    pub explicit: BTreeSet<String>,
}

pub const KEYS: [&str; 24] = [
    "experiment",
    "id",
    "out",
    "seed",
    "trials",
    "threads",
    "gamma",
    "q_db",
    "L",
    "fd",
    "cluster",
    "placement",
    "snr_grid",
    "sir_db",
    "no_out_of_cluster",
    "samples",
    "side",
    "subsample",
    "alpha",
    "c_inf",
    "wavelength",
    "coherence_bw",
    "velocity",
    "gnuplot",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::config(key, format!("cannot parse `{value}` as {}", std::any::type_name::<T>())))
}

fn parse_with<T>(key: &str, value: &str, f: impl FnOnce(&str) -> Result<T, String>) -> Result<T, CliError> {
    f(value.trim()).map_err(|r| CliError::config(key, r))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value.split(',').map(|v| parse::<f64>(key, v)).collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(CliError::config(key, format!("expected a boolean, got `{other}`"))),
    }
}

fn parse_sir(key: &str, value: &str) -> Result<f64, CliError> {
    match value.trim() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        v => {
            let x: f64 = parse(key, v)?;
            if !x.is_finite() {
                return Err(CliError::config(key, "use `inf` for an interference-free cluster"));
            }
            Ok(x)
        }
    }
}

/// `q-db` and `q_db` name the same key.
pub fn normalize_key(key: &str) -> String {
    let k = key.trim().replace('-', "_");
    if k.eq_ignore_ascii_case("l") {
        "L".to_string()
    } else {
        k
    }
}

impl Overrides {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = normalize_key(key);
        let k = key.as_str();
        match k {
            "experiment" => {
                // `paper-example 4` carries its id inline
                let mut it = value.split_whitespace();
                self.experiment = it.next().map(str::to_string);
                if let Some(id) = it.next() {
                    self.example_id = Some(id.to_string());
                }
            }
            "id" => self.example_id = Some(value.trim().to_string()),
            "out" => self.out = Some(PathBuf::from(value.trim())),
            "seed" => self.seed = Some(parse(k, value)?),
            "trials" => self.trials = Some(parse(k, value)?),
            "threads" => self.threads = Some(parse(k, value)?),
            "gamma" => self.gamma = Some(parse(k, value)?),
            "q_db" => self.q_db = Some(parse(k, value)?),
            "L" => self.coherence = Some(parse(k, value)?),
            "fd" => self.fd = Some(parse(k, value)?),
            "cluster" => self.cluster = Some(parse_with(k, value, str::parse)?),
            "placement" => self.placement = Some(parse_with(k, value, str::parse)?),
            "snr_grid" => self.snr_grid = Some(parse_with(k, value, str::parse)?),
            "sir_db" => self.sir_db = Some(parse_sir(k, value)?),
            "no_out_of_cluster" => self.no_out_of_cluster = Some(parse_bool(k, value)?),
            "samples" => self.samples = Some(parse(k, value)?),
            "side" => self.side = Some(parse(k, value)?),
            "subsample" => self.subsample = Some(parse(k, value)?),
            "alpha" => self.alpha = Some(parse(k, value)?),
            "c_inf" => self.c_inf = Some(parse_list(k, value)?),
            "wavelength" => self.wavelength = Some(parse(k, value)?),
            "coherence_bw" => self.coherence_bw = Some(parse(k, value)?),
            "velocity" => self.velocity = Some(parse_list(k, value)?),
            "gnuplot" => self.gnuplot = Some(parse_bool(k, value)?),
            _ => {
                return Err(CliError::config(
                    &key,
                    format!("unknown key; valid keys are {}", KEYS.join(", ")),
                ))
            }
        }
        if k != "experiment" && k != "id" && k != "out" && k != "threads" && k != "gnuplot" {
            self.explicit.insert(key);
        }
        Ok(())
    }

    /// Applies every `key = value` line of a configuration file. Blank lines
    /// and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(&format!("line {}", i + 1), format!("expected key = value, got `{line}`")))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut o = Self::default();
        o.apply_text(&text)?;
        Ok(o)
    }

    /// Values in `other` win.
    pub fn merge(mut self, other: Overrides) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            experiment, example_id, out, seed, trials, threads, gamma, q_db, coherence, fd, cluster, placement,
            snr_grid, sir_db, no_out_of_cluster, samples, side, subsample, alpha, c_inf, wavelength, coherence_bw,
            velocity, gnuplot
        );
        self.explicit.extend(other.explicit);
        self
    }
}

/// Fully resolved configuration; this is what a report records and what
/// `--replay` reads back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub trials: usize,
    pub threads: Option<usize>,
    pub gamma: f64,
    pub q_db: f64,
    /// Coherence lengths in symbols; more than one only for the
    /// infinite-system example.
    #[serde(rename = "L")]
    pub coherence: Vec<usize>,
    pub fd: Option<f64>,
    pub cluster: ClusterArg,
    pub placement: PlacementArg,
    pub snr_grid: SnrGrid,
    /// `None` for an interference-free link simulation.
    pub sir_db: Option<f64>,
    pub no_out_of_cluster: bool,
    pub samples: usize,
    pub side: usize,
    pub subsample: usize,
    pub alpha: Option<f64>,
    pub c_inf: Vec<f64>,
    /// Carrier wavelength (m), coherence bandwidth (Hz) and velocities (m/s)
    /// for the Doppler example.
    pub wavelength: f64,
    pub coherence_bw: f64,
    pub velocity: Vec<f64>,
    pub gnuplot: bool,
    pub out: PathBuf,
    /// Keys set explicitly on top of the defaults of a reference example.
    pub deviations: Vec<String>,
}

pub const PEDESTRIAN_L: usize = 20_000;
pub const VEHICULAR_L: usize = 1000;

struct Defaults {
    trials: usize,
    coherence: Vec<usize>,
    grid: SnrGrid,
    sir_db: Option<f64>,
    cluster: ClusterArg,
}

fn defaults(e: Experiment) -> Defaults {
    let coherent_grid = SnrGrid {
        lo: -10.0,
        hi: 60.0,
        step: 5.0,
    };
    let link_grid = SnrGrid {
        lo: 0.0,
        hi: 60.0,
        step: 5.0,
    };
    let (trials, coherence, grid, sir_db) = match e {
        Experiment::CoherentCurve | Experiment::PaperExample(3) | Experiment::PaperExample(4) => {
            (2000, vec![PEDESTRIAN_L], coherent_grid, None)
        }
        Experiment::NoncoherentMc | Experiment::NoncoherentAsymptotic | Experiment::PaperExample(5) => {
            (20, vec![100], coherent_grid, None)
        }
        Experiment::InfiniteBound => (1, vec![PEDESTRIAN_L], coherent_grid, None),
        Experiment::PaperExample(6) => (1, vec![PEDESTRIAN_L, VEHICULAR_L], coherent_grid, None),
        Experiment::Linksim | Experiment::PaperExample(7) => (1000, vec![PEDESTRIAN_L], link_grid, Some(20.0)),
        _ => (1000, vec![PEDESTRIAN_L], coherent_grid, None),
    };
    // the noncoherent bounds need K > L, so they default to the fragment
    let cluster = match e {
        Experiment::NoncoherentMc | Experiment::NoncoherentAsymptotic => ClusterArg::Whole,
        _ => ClusterArg::Facing3,
    };
    Defaults {
        trials,
        coherence,
        grid,
        sir_db,
        cluster,
    }
}

impl ExperimentConfig {
    pub fn resolve(o: Overrides) -> Result<Self, CliError> {
        let name = o
            .experiment
            .clone()
            .ok_or_else(|| CliError::config("experiment", format!("no experiment given; choose one of {}", EXPERIMENT_NAMES.join(", "))))?;
        let experiment = Experiment::parse(&name, o.example_id.as_deref())?;
        let d = defaults(experiment);
        if o.coherence.is_some() && o.fd.is_some() {
            return Err(CliError::config("fd", "give either L or fd, not both"));
        }
        let coherence = match (o.coherence, o.fd) {
            (Some(l), _) => vec![l],
            (None, Some(fd)) => {
                let m = coop_limits::fading::FadingModel::continuous_rect(fd)
                    .map_err(|e| CliError::config("fd", e.to_string()))?;
                vec![coop_limits::fading::effective_coherence(&m).round() as usize]
            }
            (None, None) => d.coherence,
        };
        let out = match o.out {
            Some(p) => p,
            None => std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        };
        let deviations = match experiment {
            Experiment::PaperExample(_) => o.explicit.iter().cloned().collect(),
            _ => Vec::new(),
        };
        let sir_db = match o.sir_db {
            Some(x) if x.is_infinite() => None,
            Some(x) => Some(x),
            None => d.sir_db,
        };
        let cfg = ExperimentConfig {
            experiment,
            seed: o.seed.unwrap_or(1),
            trials: o.trials.unwrap_or(d.trials),
            threads: o.threads,
            gamma: o.gamma.unwrap_or(3.8),
            q_db: o.q_db.unwrap_or(20.0),
            coherence,
            fd: o.fd,
            cluster: o.cluster.unwrap_or(d.cluster),
            placement: o.placement.unwrap_or(PlacementArg::Centered),
            snr_grid: o.snr_grid.unwrap_or(d.grid),
            sir_db,
            no_out_of_cluster: o.no_out_of_cluster.unwrap_or(false),
            samples: o.samples.unwrap_or(10_000),
            side: o.side.unwrap_or(20),
            subsample: o.subsample.unwrap_or(50),
            alpha: o.alpha,
            c_inf: o.c_inf.unwrap_or_else(|| vec![11.86, 7.98]),
            wavelength: o.wavelength.unwrap_or(0.15),
            coherence_bw: o.coherence_bw.unwrap_or(370e3),
            velocity: o.velocity.unwrap_or_else(|| vec![1.3875, 27.75]),
            gnuplot: o.gnuplot.unwrap_or(false),
            out,
            deviations,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.layout()?;
        if self.trials == 0 {
            return Err(CliError::config("trials", "must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(CliError::config("threads", "must be at least 1"));
        }
        if self.coherence.contains(&0) {
            return Err(CliError::config("L", "coherence length must be at least 1 symbol"));
        }
        if self.samples == 0 {
            return Err(CliError::config("samples", "must be at least 1"));
        }
        if self.side == 0 {
            return Err(CliError::config("side", "fragment needs at least one cell per side"));
        }
        if self.subsample == 0 {
            return Err(CliError::config("subsample", "must be at least 1"));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(CliError::config("alpha", format!("pilot fraction must lie in (0, 1), got {a}")));
            }
        }
        if self.c_inf.is_empty() || self.c_inf.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(CliError::config("c_inf", "need positive finite ceilings"));
        }
        if let Some(fd) = self.fd {
            coop_limits::fading::FadingModel::continuous_rect(fd).map_err(|e| CliError::config("fd", e.to_string()))?;
        }
        for (key, x) in [("wavelength", self.wavelength), ("coherence_bw", self.coherence_bw)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(CliError::config(key, format!("must be positive and finite, got {x}")));
            }
        }
        if self.velocity.is_empty() || self.velocity.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(CliError::config("velocity", "need positive finite velocities"));
        }
        self.snr_grid.points()?;
        Ok(())
    }

    pub fn layout(&self) -> Result<coop_limits::geometry::HexLayout<f64>, CliError> {
        coop_limits::geometry::HexLayout::new(self.gamma, self.q_db).map_err(|e| match e {
            coop_limits::Error::InvalidParameter { name, reason } => CliError::config(name, reason),
            other => CliError::config("gamma", other.to_string()),
        })
    }
}

/// Layered configuration: optional file, then flags on top.
pub fn parse_config(file_text: Option<&str>, flags: Overrides) -> Result<ExperimentConfig, CliError> {
    let mut base = Overrides::default();
    if let Some(t) = file_text {
        base.apply_text(t)?;
    }
    ExperimentConfig::resolve(base.merge(flags))
}
