//! Command-line front end.
//!
//! Every subcommand accepts an optional positional config file plus flag
//! overrides; flags win. Exit codes: 0 all verdicts pass, 1 usage/config/IO
//! error, 2 statistical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bolab::config::{parse_config_structure, validate, ConfigErrors, SubcommandKind};
use bolab::run::run;
use bolab::{config, exec};

#[derive(Parser)]
#[command(
    name = "bolab",
    version,
    about = "Monte-Carlo laboratory for the Benjamin-Ono flow in Birkhoff coordinates"
)]
struct Cli {
    /// Master seed (required for stochastic subcommands).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for ensemble kernels (0 = library default). Outputs
    /// are byte-identical for any value.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Output path for the data file; the manifest lands next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output encoding.
    #[arg(long, global = true, value_parser = ["csv", "json"])]
    format: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct MeasureArgs {
    /// Radial law of the per-mode draws.
    #[arg(long, value_parser = ["gaussian", "radial-exponential", "radial-exponential-normalized"])]
    law: Option<String>,
    /// Amplitude family.
    #[arg(long, value_parser = ["power", "power-log"])]
    amp_family: Option<String>,
    /// Power exponent p of the amplitude rule.
    #[arg(long, allow_negative_numbers = true)]
    amp_p: Option<f64>,
    /// Log exponent q of the amplitude rule.
    #[arg(long, allow_negative_numbers = true)]
    amp_q: Option<f64>,
}

impl MeasureArgs {
    fn push_overrides(&self, overrides: &mut Vec<(&'static str, String)>) {
        if let Some(v) = &self.law {
            overrides.push(("law", v.clone()));
        }
        if let Some(v) = &self.amp_family {
            overrides.push(("amp-family", v.clone()));
        }
        if let Some(v) = self.amp_p {
            overrides.push(("amp-p", v.to_string()));
        }
        if let Some(v) = self.amp_q {
            overrides.push(("amp-q", v.to_string()));
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a state under the truncated flow; optionally emit the
    /// truncation-error profile.
    Flow {
        config: Option<PathBuf>,
        /// Truncation level N.
        #[arg(long)]
        n: Option<usize>,
        /// Evolution time (either sign).
        #[arg(long, allow_negative_numbers = true)]
        t: Option<f64>,
        /// Input state file (CSV `n,re,im` or JSON [[re,im],…]).
        #[arg(long)]
        state: Option<PathBuf>,
        /// Truncation levels for the error profile, e.g. `1,2,4`.
        #[arg(long)]
        profile: Option<String>,
        /// Norm regularity s for the profile.
        #[arg(long, allow_negative_numbers = true)]
        s: Option<f64>,
    },
    /// Draw states from the truncated measure and summarize law moments.
    Sample {
        config: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[command(flatten)]
        measure: MeasureArgs,
    },
    /// Tail-mass products deciding which regularities carry mass.
    Tailmass {
        config: Option<PathBuf>,
        /// Largest truncation level of the dyadic scan.
        #[arg(long)]
        n: Option<usize>,
        /// Regularity σ probed by the product.
        #[arg(long)]
        sigma: Option<f64>,
        #[command(flatten)]
        measure: MeasureArgs,
    },
    /// Renormalized-phase Cauchy diagnostics along a truncation grid.
    Renorm {
        config: Option<PathBuf>,
        /// Power exponent of the amplitude rule α_n = n^{-p}.
        #[arg(long, allow_negative_numbers = true)]
        alpha_p: Option<f64>,
        /// Tracked mode index.
        #[arg(long)]
        n: Option<usize>,
        /// Truncation grid, e.g. `32,64,128`.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        /// Also dump per-sample phase trajectories.
        #[arg(long)]
        dump_trajectories: bool,
    },
    /// Paired Monte-Carlo invariance test of the flow.
    Invariance {
        config: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, allow_negative_numbers = true)]
        t: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        /// Test the renormalized flow instead of the plain truncated one.
        #[arg(long)]
        renormalized: bool,
        /// Run the broken-flow sentinel; the run must fail (exit 2).
        #[arg(long)]
        negative_control: bool,
        #[command(flatten)]
        measure: MeasureArgs,
    },
    /// Weak-convergence scan of one functional across truncation levels.
    Weakconv {
        config: Option<PathBuf>,
        /// Truncation grid, e.g. `1,2,4,8`.
        #[arg(long)]
        grid: Option<String>,
        /// Reference truncation level.
        #[arg(long)]
        n_ref: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        /// Functional id (F1..F5).
        #[arg(long)]
        functional: Option<String>,
        #[command(flatten)]
        measure: MeasureArgs,
    },
    /// Gibbs-weighted statistics with effective-sample-size monitoring.
    Gibbs {
        config: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, allow_negative_numbers = true)]
        t: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        /// Cutoff half-width a.
        #[arg(long)]
        cutoff_width: Option<f64>,
        /// Cutoff profile shape.
        #[arg(long, value_parser = ["hat", "window"])]
        cutoff_shape: Option<String>,
    },
}

impl Command {
    fn kind(&self) -> SubcommandKind {
        match self {
            Command::Flow { .. } => SubcommandKind::Flow,
            Command::Sample { .. } => SubcommandKind::Sample,
            Command::Tailmass { .. } => SubcommandKind::TailMass,
            Command::Renorm { .. } => SubcommandKind::Renorm,
            Command::Invariance { .. } => SubcommandKind::Invariance,
            Command::Weakconv { .. } => SubcommandKind::WeakConv,
            Command::Gibbs { .. } => SubcommandKind::Gibbs,
        }
    }

    fn config_path(&self) -> Option<&PathBuf> {
        match self {
            Command::Flow { config, .. }
            | Command::Sample { config, .. }
            | Command::Tailmass { config, .. }
            | Command::Renorm { config, .. }
            | Command::Invariance { config, .. }
            | Command::Weakconv { config, .. }
            | Command::Gibbs { config, .. } => config.as_ref(),
        }
    }

    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut o: Vec<(&'static str, String)> = Vec::new();
        match self {
            Command::Flow {
                n,
                t,
                state,
                profile,
                s,
                ..
            } => {
                if let Some(v) = n {
                    o.push(("n", v.to_string()));
                }
                if let Some(v) = t {
                    o.push(("t", v.to_string()));
                }
                if let Some(v) = state {
                    o.push(("state", v.display().to_string()));
                }
                if let Some(v) = profile {
                    o.push(("profile", v.clone()));
                }
                if let Some(v) = s {
                    o.push(("s", v.to_string()));
                }
            }
            Command::Sample {
                n,
                samples,
                measure,
                ..
            } => {
                if let Some(v) = n {
                    o.push(("n", v.to_string()));
                }
                if let Some(v) = samples {
                    o.push(("samples", v.to_string()));
                }
                measure.push_overrides(&mut o);
            }
            Command::Tailmass {
                n,
                sigma,
                measure,
                ..
            } => {
                if let Some(v) = n {
                    o.push(("n", v.to_string()));
                }
                if let Some(v) = sigma {
                    o.push(("sigma", v.to_string()));
                }
                measure.push_overrides(&mut o);
            }
            Command::Renorm {
                alpha_p,
                n,
                grid,
                samples,
                dump_trajectories,
                ..
            } => {
                if let Some(v) = alpha_p {
                    o.push(("amp-p", v.to_string()));
                }
                if let Some(v) = n {
                    o.push(("mode", v.to_string()));
                }
                if let Some(v) = grid {
                    o.push(("grid", v.clone()));
                }
                if let Some(v) = samples {
                    o.push(("samples", v.to_string()));
                }
                if *dump_trajectories {
                    o.push(("dump-trajectories", "true".to_string()));
                }
            }
            Command::Invariance {
                n,
                t,
                samples,
                renormalized,
                negative_control,
                measure,
                ..
            } => {
                if let Some(v) = n {
                    o.push(("n", v.to_string()));
                }
                if let Some(v) = t {
                    o.push(("t", v.to_string()));
                }
                if let Some(v) = samples {
                    o.push(("samples", v.to_string()));
                }
                if *renormalized {
                    o.push(("renormalized", "true".to_string()));
                    o.push(("amp-p", "0.5".to_string()));
                }
                if *negative_control {
                    o.push(("negative-control", "true".to_string()));
                }
                measure.push_overrides(&mut o);
            }
            Command::Weakconv {
                grid,
                n_ref,
                samples,
                functional,
                measure,
                ..
            } => {
                if let Some(v) = grid {
                    o.push(("grid", v.clone()));
                }
                if let Some(v) = n_ref {
                    o.push(("n-ref", v.to_string()));
                }
                if let Some(v) = samples {
                    o.push(("samples", v.to_string()));
                }
                if let Some(v) = functional {
                    o.push(("functional", v.clone()));
                }
                measure.push_overrides(&mut o);
            }
            Command::Gibbs {
                n,
                t,
                samples,
                cutoff_width,
                cutoff_shape,
                ..
            } => {
                if let Some(v) = n {
                    o.push(("n", v.to_string()));
                }
                if let Some(v) = t {
                    o.push(("t", v.to_string()));
                }
                if let Some(v) = samples {
                    o.push(("samples", v.to_string()));
                }
                if let Some(v) = cutoff_width {
                    o.push(("cutoff-width", v.to_string()));
                }
                if let Some(v) = cutoff_shape {
                    o.push(("cutoff-shape", v.clone()));
                }
            }
        }
        o
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version are not usage errors.
            use clap::error::ErrorKind;
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    exec::configure_workers(cli.workers);

    let kind = cli.command.kind();
    let file_text = match cli.command.config_path() {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(text) => text,
            Err(e) => {
                eprintln!("error: cannot read config {}: {e}", path.display());
                return ExitCode::from(1);
            }
        },
        None => String::new(),
    };

    let mut cfg = match parse_config_structure(&file_text, Some(kind)) {
        Ok(cfg) => cfg,
        Err(errors) => {
            eprintln!("{errors}");
            return ExitCode::from(1);
        }
    };

    let mut override_errors = Vec::new();
    for (key, value) in cli.command.overrides() {
        if let Err(v) = config::apply_key(&mut cfg, key, &value, 0) {
            override_errors.push(v);
        }
    }
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    if let Some(format) = &cli.format {
        if let Err(v) = config::apply_key(&mut cfg, "format", format, 0) {
            override_errors.push(v);
        }
    }
    override_errors.extend(validate(&cfg));
    if !override_errors.is_empty() {
        eprintln!("{}", ConfigErrors(override_errors));
        return ExitCode::from(1);
    }

    match run(&cfg) {
        Ok(outcome) => {
            eprintln!(
                "wrote {} and {}",
                outcome.data_path.display(),
                outcome.manifest_path.display()
            );
            ExitCode::from(outcome.exit.code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
