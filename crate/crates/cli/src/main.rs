use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use coop_limits_cli::config::{parse_config, Overrides, EXPERIMENT_NAMES};
use coop_limits_cli::output::read_report;
use coop_limits_cli::{run, CliError, ExperimentConfig};

const AFTER_HELP: &str = "\
Experiments:
  geometry-sir             D, per-receiver out-of-cluster SIR and gain shares of a cluster
  sir-cdf                  SIR distribution over randomized in-cluster users
  coherent-curve           pilot-assisted Network MIMO spectral efficiency vs SNR
  noncoherent-mc           Monte Carlo noncoherent upper bound (--cluster whole: wraparound fragment)
  noncoherent-asymptotic   large-system noncoherent upper bound
  infinite-bound           noncoherent bound of the infinite hexagonal system
  invert-sir               SIR whose full-cooperation ceiling equals each --c-inf value
  linksim                  Max-SINR vs TDMA in a 3-pair, 2-antenna MIMO cluster
  paper-example <1..7>     reference examples: 1 Doppler, 2 hex layout, 3 cluster-size curves,
                           4 facing-sector SIR and ceiling, 5 20x20 fragment, 6 infinite system,
                           7 Max-SINR vs TDMA

Configuration files hold `key = value` lines with the same names as the
flags (`q-db` and `q_db` are equivalent, `#` starts a comment). Flags win
over file values. For reference examples every explicitly set key is recorded
as a deviation in the report.

Exit codes: 0 success, 2 configuration or precondition error,
3 numerical non-convergence, 1 other failures. Errors are printed to
stderr as one JSON object.";

#[derive(Debug, Parser)]
#[command(name = "coop-limits", version, about = "Spectral-efficiency limits of cooperative cellular networks", after_help = AFTER_HELP)]
struct Args {
    /// Experiment name (see below).
    experiment: Option<String>,
    /// Example id for `paper-example`.
    id: Option<String>,

    /// Experiment name, alternative to the positional form.
    #[arg(long = "experiment", value_name = "NAME")]
    experiment_flag: Option<String>,
    /// Key-value configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Rerun the configuration recorded in a JSON report.
    #[arg(long, value_name = "REPORT", conflicts_with = "config")]
    replay: Option<PathBuf>,
    /// Output directory [default: $COOP_LIMITS_OUT, else ./coop-limits-out].
    #[arg(long, value_name = "DIR")]
    out: Option<String>,
    /// Master seed [default: 1].
    #[arg(long)]
    seed: Option<String>,
    /// Monte Carlo trials [default: 2000 coherent, 20 noncoherent-mc, 1000 linksim].
    #[arg(long)]
    trials: Option<String>,
    /// Worker thread cap; results do not depend on it [default: all cores].
    #[arg(long)]
    threads: Option<String>,
    /// Path-loss exponent, must exceed 2 [default: 3.8].
    #[arg(long)]
    gamma: Option<String>,
    /// Antenna front-to-back ratio Q in dB [default: 20].
    #[arg(long = "q-db", value_name = "DB")]
    q_db: Option<String>,
    /// Coherence length in symbols [default: 20000; 100 for noncoherent
    /// experiments; 20000 and 1000 for paper-example 6].
    #[arg(long = "L", value_name = "SYMBOLS")]
    coherence: Option<String>,
    /// Normalized Doppler in (0, 1/2] for continuous fading; excludes --L.
    #[arg(long)]
    fd: Option<String>,
    /// Cluster: single, facing3, 7cell or whole [default: facing3; whole for
    /// noncoherent experiments].
    #[arg(long)]
    cluster: Option<String>,
    /// In-cluster user placement: centered or randomized [default: centered].
    #[arg(long)]
    placement: Option<String>,
    /// SNR grid lo:hi:step in dB [default: -10:60:5; 0:60:5 for linksim].
    #[arg(long = "snr-grid", value_name = "LO:HI:STEP")]
    snr_grid: Option<String>,
    /// Out-of-cluster SIR in dB for linksim, or `inf` [default: 20].
    #[arg(long = "sir-db", value_name = "DB", allow_hyphen_values = true)]
    sir_db: Option<String>,
    /// Switch off every transmitter outside the cluster.
    #[arg(long = "no-out-of-cluster")]
    no_out_of_cluster: bool,
    /// Randomized placements for SIR distributions [default: 10000].
    #[arg(long)]
    samples: Option<String>,
    /// Cells per side of the wraparound fragment [default: 20].
    #[arg(long)]
    side: Option<String>,
    /// Receivers averaged per Monte Carlo trial of the noncoherent bound [default: 50].
    #[arg(long)]
    subsample: Option<String>,
    /// Fixed pilot fraction in (0, 1) instead of optimizing it.
    #[arg(long)]
    alpha: Option<String>,
    /// Comma-separated ceilings for invert-sir [default: 11.86,7.98].
    #[arg(long = "c-inf", value_name = "LIST")]
    c_inf: Option<String>,
    /// Carrier wavelength in m for paper-example 1 [default: 0.15].
    #[arg(long)]
    wavelength: Option<String>,
    /// Coherence bandwidth in Hz for paper-example 1 [default: 370000].
    #[arg(long = "coherence-bw", value_name = "HZ")]
    coherence_bw: Option<String>,
    /// Comma-separated velocities in m/s for paper-example 1 [default: 1.3875,27.75].
    #[arg(long, value_name = "LIST")]
    velocity: Option<String>,
    /// Also write a gnuplot script per curve.
    #[arg(long)]
    gnuplot: bool,
}

impl Args {
    fn overrides(&self) -> Result<Overrides, CliError> {
        let mut o = Overrides::default();
        if let Some(e) = self.experiment_flag.as_ref().or(self.experiment.as_ref()) {
            o.set("experiment", e)?;
        }
        if let Some(id) = &self.id {
            o.set("id", id)?;
        }
        let pairs: [(&str, &Option<String>); 20] = [
            ("out", &self.out),
            ("seed", &self.seed),
            ("trials", &self.trials),
            ("threads", &self.threads),
            ("gamma", &self.gamma),
            ("q_db", &self.q_db),
            ("L", &self.coherence),
            ("fd", &self.fd),
            ("cluster", &self.cluster),
            ("placement", &self.placement),
            ("snr_grid", &self.snr_grid),
            ("sir_db", &self.sir_db),
            ("samples", &self.samples),
            ("side", &self.side),
            ("subsample", &self.subsample),
            ("alpha", &self.alpha),
            ("c_inf", &self.c_inf),
            ("wavelength", &self.wavelength),
            ("coherence_bw", &self.coherence_bw),
            ("velocity", &self.velocity),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                o.set(k, v)?;
            }
        }
        if self.no_out_of_cluster {
            o.set("no_out_of_cluster", "true")?;
        }
        if self.gnuplot {
            o.set("gnuplot", "true")?;
        }
        Ok(o)
    }
}

fn resolve(args: &Args) -> Result<ExperimentConfig, CliError> {
    if let Some(path) = &args.replay {
        let mut cfg = read_report(path)?.config;
        if let Some(out) = &args.out {
            cfg.out = out.into();
        }
        if let Some(t) = &args.threads {
            let mut o = Overrides::default();
            o.set("threads", t)?;
            cfg.threads = o.threads;
        }
        return Ok(cfg);
    }
    let text = match &args.config {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|source| CliError::Io {
            path: p.clone(),
            source,
        })?),
        None => None,
    };
    let flags = args.overrides()?;
    if flags.experiment.is_none() && text.is_none() {
        return Err(CliError::config(
            "experiment",
            format!("no experiment given; choose one of {}", EXPERIMENT_NAMES.join(", ")),
        ));
    }
    parse_config(text.as_deref(), flags)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = resolve(&args).and_then(|cfg| run(&cfg));
    match result {
        Ok(outcome) => {
            match serde_json::to_string_pretty(&outcome.report) {
                Ok(s) => println!("{s}"),
                Err(e) => eprintln!("{}", CliError::from(e).to_json()),
            }
            eprintln!("report written to {}", outcome.report_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
