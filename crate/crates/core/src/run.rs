//! Experiment dispatch: one validated config in, data files plus a run
//! manifest out.
//!
//! Exit-code contract: 0 when every verdict passes, 2 on a statistical
//! failure (including degenerate importance weights), 1 for usage, config,
//! or I/O problems (mapped by the binary). Identical (config, seed) produce
//! byte-identical payloads for any worker count; `runtime_ms` is the single
//! non-deterministic field.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::config::{ExperimentConfig, OutputFormat, SubcommandKind};
use crate::encode::{fmt_f64, to_json_string};
use crate::flow::{convergence_profile, flow_truncated, FlowSpec};
use crate::harness::gibbs::{CenteringRule, CutoffProfile, GibbsSpec};
use crate::harness::{
    builtin_functionals, gibbs::gibbs_weighted_statistics, invariance_test, weak_convergence_test,
    EnsembleSpec, FlowKind, HarnessError,
};
use crate::measures::{
    classify_sigma, sample_state, tail_mass_log_product, tail_mass_product, MeasureError,
    SeriesVerdict,
};
use crate::renorm::{phase_convergence_diagnostic, RenormContext, RenormError};
use crate::state::{BirkhoffState, SobolevIndex, StateError};
use crate::{exec, stats};

/// Factor by which the negative-control sentinel rescales phase angles.
pub const BROKEN_PHASE_FACTOR: f64 = 1.1;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("state file {path}: {source}")]
    State {
        path: PathBuf,
        source: StateError,
    },
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Renorm(#[from] RenormError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Pass,
    StatFailure,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Pass => 0,
            ExitStatus::StatFailure => 2,
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub exit: ExitStatus,
    pub data_path: PathBuf,
    pub manifest_path: PathBuf,
}

#[derive(Serialize)]
struct Manifest<'a> {
    artifact_version: &'a str,
    subcommand: &'a str,
    config_echo: &'a str,
    seed: Option<u64>,
    workers: usize,
    rng_scheme: &'a str,
    runtime_ms: u128,
}

fn write_file(path: &Path, content: &str) -> Result<(), RunError> {
    std::fs::write(path, content).map_err(|source| RunError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn effective_format(cfg: &ExperimentConfig) -> OutputFormat {
    cfg.format.unwrap_or(match cfg.subcommand {
        SubcommandKind::Invariance | SubcommandKind::WeakConv | SubcommandKind::Gibbs => {
            OutputFormat::Json
        }
        _ => OutputFormat::Csv,
    })
}

fn default_out(cfg: &ExperimentConfig) -> PathBuf {
    let ext = match effective_format(cfg) {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    PathBuf::from(format!("bolab_{}.{}", cfg.subcommand.name(), ext))
}

/// Run one experiment and write its artifacts.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome, RunError> {
    let started = Instant::now();
    let out_path = cfg.out.clone().unwrap_or_else(|| default_out(cfg));
    let config_echo = cfg.to_text();

    let (data, extra_files, pass) = match cfg.subcommand {
        SubcommandKind::Flow => flow_cmd(cfg)?,
        SubcommandKind::Sample => sample_cmd(cfg)?,
        SubcommandKind::TailMass => tailmass_cmd(cfg)?,
        SubcommandKind::Renorm => renorm_cmd(cfg)?,
        SubcommandKind::Invariance => invariance_cmd(cfg, &config_echo, started)?,
        SubcommandKind::WeakConv => weakconv_cmd(cfg, &config_echo, started)?,
        SubcommandKind::Gibbs => gibbs_cmd(cfg, &config_echo, started)?,
    };

    write_file(&out_path, &data)?;
    for (suffix, content) in &extra_files {
        let mut side = out_path.as_os_str().to_owned();
        side.push(suffix);
        write_file(Path::new(&side), content)?;
    }

    let manifest_path = {
        let mut p = out_path.as_os_str().to_owned();
        p.push(".manifest.json");
        PathBuf::from(p)
    };
    let manifest = Manifest {
        artifact_version: env!("CARGO_PKG_VERSION"),
        subcommand: cfg.subcommand.name(),
        config_echo: &config_echo,
        seed: cfg.seed,
        workers: exec::worker_count(),
        rng_scheme: "splitmix64-counter(seed, domain, sample, mode)",
        runtime_ms: started.elapsed().as_millis(),
    };
    write_file(&manifest_path, &to_json_string(&manifest))?;

    Ok(RunOutcome {
        exit: if pass {
            ExitStatus::Pass
        } else {
            ExitStatus::StatFailure
        },
        data_path: out_path,
        manifest_path,
    })
}

type HandlerOutput = (String, Vec<(&'static str, String)>, bool);

fn flow_cmd(cfg: &ExperimentConfig) -> Result<HandlerOutput, RunError> {
    let path = cfg
        .state_path
        .clone()
        .expect("validated flow config carries a state path");
    let text = std::fs::read_to_string(&path).map_err(|source| RunError::Read {
        path: path.clone(),
        source,
    })?;
    let is_json = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("json"))
        .unwrap_or(false);
    let state = if is_json {
        BirkhoffState::from_json(&text)
    } else {
        BirkhoffState::from_csv(&text)
    }
    .map_err(|source| RunError::State {
        path: path.clone(),
        source,
    })?;

    let evolved = flow_truncated(
        &state,
        FlowSpec {
            n: cfg.n,
            t: cfg.t,
        },
    );
    let data = match effective_format(cfg) {
        OutputFormat::Csv => evolved.to_csv(),
        OutputFormat::Json => evolved.to_json(),
    };
    let mut extra = Vec::new();
    if !cfg.profile.is_empty() {
        let s = SobolevIndex::new(cfg.s);
        let errors = convergence_profile(&state, cfg.t, s, &cfg.profile);
        let mut csv = String::from("N,error\n");
        for (n, e) in cfg.profile.iter().zip(&errors) {
            csv.push_str(&format!("{n},{}\n", fmt_f64(*e)));
        }
        extra.push((".profile.csv", csv));
    }
    Ok((data, extra, true))
}

#[derive(Serialize)]
struct MomentsSummary {
    empirical_second: f64,
    empirical_fourth: f64,
    expected_second: f64,
    expected_fourth: f64,
}

#[derive(Serialize)]
struct RunSummary<'a> {
    law: &'a str,
    amps: AmpEcho<'a>,
    n: usize,
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    moments: Option<MomentsSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    product_values: Option<Vec<(usize, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    classification: Option<&'a str>,
}

#[derive(Serialize)]
struct AmpEcho<'a> {
    family: &'a str,
    p: f64,
    q: f64,
}

fn amp_echo(cfg: &ExperimentConfig) -> AmpEcho<'_> {
    AmpEcho {
        family: cfg.amp_family.name(),
        p: cfg.amp_p,
        q: cfg.amp_q,
    }
}

fn sample_cmd(cfg: &ExperimentConfig) -> Result<HandlerOutput, RunError> {
    let amps = cfg.amplitudes();
    let law = cfg.radial_law();
    let seed = cfg.seed.expect("validated stochastic config has a seed");
    let states: Vec<BirkhoffState> = exec::map_indexed(cfg.samples, |i| {
        sample_state(&amps, law, cfg.n, seed, i as u64)
    });

    let data = match effective_format(cfg) {
        OutputFormat::Csv => {
            let mut csv = String::from("sample,n,re,im\n");
            for (i, st) in states.iter().enumerate() {
                for mode in 1..=st.len() {
                    let c = st.coeff(mode);
                    csv.push_str(&format!(
                        "{i},{mode},{},{}\n",
                        fmt_f64(c.re),
                        fmt_f64(c.im)
                    ));
                }
            }
            csv
        }
        OutputFormat::Json => {
            let rows: Vec<String> = states.iter().map(|st| st.to_json()).collect();
            format!("[{}]", rows.join(","))
        }
    };

    // Empirical law moments recovered from the normalized draws.
    let mut second = Vec::with_capacity(cfg.samples * cfg.n);
    let mut fourth = Vec::with_capacity(cfg.samples * cfg.n);
    for st in &states {
        for mode in 1..=st.len() {
            let g2 = st.modulus_sq(mode) / amps.amplitude(mode).powi(2);
            second.push(g2);
            fourth.push(g2 * g2);
        }
    }
    let summary = RunSummary {
        law: cfg.law.name(),
        amps: amp_echo(cfg),
        n: cfg.n,
        seed: cfg.seed,
        moments: Some(MomentsSummary {
            empirical_second: stats::mean(&second),
            empirical_fourth: stats::mean(&fourth),
            expected_second: law.second_moment(),
            expected_fourth: law.modulus_fourth_moment(),
        }),
        product_values: None,
        classification: None,
    };
    Ok((
        data,
        vec![(".summary.json", to_json_string(&summary))],
        true,
    ))
}

fn tailmass_cmd(cfg: &ExperimentConfig) -> Result<HandlerOutput, RunError> {
    let amps = cfg.amplitudes();
    let law = cfg.radial_law();
    let sigma = SobolevIndex::new(cfg.sigma);
    let classification = classify_sigma(&amps, sigma, cfg.n);
    let mut rows = Vec::new();
    for &(n, _) in &classification.partial_sums {
        let product = tail_mass_product(&amps, sigma, n, law)?;
        let log_product = tail_mass_log_product(&amps, sigma, n, law)?;
        rows.push((n, product, log_product));
    }
    let mut csv = String::from("N,product,log_product\n");
    for (n, p, lp) in &rows {
        csv.push_str(&format!("{n},{},{}\n", fmt_f64(*p), fmt_f64(*lp)));
    }
    let verdict = match classification.verdict {
        SeriesVerdict::Diverges => "diverges",
        SeriesVerdict::Converges => "converges",
        SeriesVerdict::Undecided => "undecided",
    };
    let summary = RunSummary {
        law: cfg.law.name(),
        amps: amp_echo(cfg),
        n: cfg.n,
        seed: cfg.seed,
        moments: None,
        product_values: Some(rows.iter().map(|(n, p, _)| (*n, *p)).collect()),
        classification: Some(verdict),
    };
    let data = match effective_format(cfg) {
        OutputFormat::Csv => csv,
        OutputFormat::Json => to_json_string(&summary),
    };
    Ok((
        data,
        vec![(".summary.json", to_json_string(&summary))],
        true,
    ))
}

fn renorm_cmd(cfg: &ExperimentConfig) -> Result<HandlerOutput, RunError> {
    let ctx = RenormContext::new(cfg.amplitudes(), cfg.radial_law())?;
    let seed = cfg.seed.expect("validated stochastic config has a seed");
    let report = phase_convergence_diagnostic(
        &ctx,
        cfg.mode,
        &cfg.grid,
        cfg.samples,
        seed,
        cfg.dump_trajectories,
    );
    let mut csv = String::from("N,empirical_var,predicted_var,ratio\n");
    let mut pass = true;
    for pair in &report.pairs {
        pass &= (0.85..=1.15).contains(&pair.ratio);
        csv.push_str(&format!(
            "{},{},{},{}\n",
            pair.n_hi,
            fmt_f64(pair.mean_sq_increment),
            fmt_f64(pair.predicted),
            fmt_f64(pair.ratio)
        ));
    }
    let mut extra = Vec::new();
    if let Some(trajectories) = &report.trajectories {
        let mut dump = String::from("sample,N,phase\n");
        for (i, traj) in trajectories.iter().enumerate() {
            for (n, value) in cfg.grid.iter().zip(traj) {
                dump.push_str(&format!("{i},{n},{}\n", fmt_f64(*value)));
            }
        }
        extra.push((".trajectories.csv", dump));
    }
    Ok((csv, extra, pass))
}

#[derive(Serialize)]
struct PerFunctionalRow {
    id: String,
    mean_before: f64,
    mean_after: f64,
    std_error: f64,
    z: f64,
    verdict: bool,
}

#[derive(Serialize)]
struct InvarianceRunReport<'a> {
    config_echo: &'a str,
    per_functional: Vec<PerFunctionalRow>,
    seed: u64,
    runtime_ms: u128,
}

fn invariance_cmd(
    cfg: &ExperimentConfig,
    config_echo: &str,
    started: Instant,
) -> Result<HandlerOutput, RunError> {
    let seed = cfg.seed.expect("validated stochastic config has a seed");
    let sampler = EnsembleSpec {
        amps: cfg.amplitudes(),
        law: cfg.radial_law(),
        n_modes: cfg.n,
        seed,
    };
    let kind = if cfg.negative_control {
        FlowKind::BrokenPhaseScale {
            factor: BROKEN_PHASE_FACTOR,
        }
    } else if cfg.renormalized {
        FlowKind::Renormalized
    } else {
        FlowKind::Truncated
    };
    let functionals = builtin_functionals();
    let reports = invariance_test(&sampler, kind, cfg.t, &functionals, cfg.samples)?;
    let pass = reports.iter().all(|r| r.verdict);
    let rows: Vec<PerFunctionalRow> = reports
        .iter()
        .map(|r| PerFunctionalRow {
            id: r.id.clone(),
            mean_before: r.mean_before,
            mean_after: r.mean_after,
            std_error: r.std_error,
            z: r.z,
            verdict: r.verdict,
        })
        .collect();
    let data = match effective_format(cfg) {
        OutputFormat::Json => to_json_string(&InvarianceRunReport {
            config_echo,
            per_functional: rows,
            seed,
            runtime_ms: started.elapsed().as_millis(),
        }),
        OutputFormat::Csv => {
            let mut csv = String::from("id,mean_before,mean_after,std_error,z,verdict\n");
            for r in &rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.id,
                    fmt_f64(r.mean_before),
                    fmt_f64(r.mean_after),
                    fmt_f64(r.std_error),
                    fmt_f64(r.z),
                    r.verdict
                ));
            }
            csv
        }
    };
    Ok((data, vec![], pass))
}

#[derive(Serialize)]
struct WeakConvRunReport<'a> {
    config_echo: &'a str,
    #[serde(flatten)]
    report: crate::harness::WeakConvergenceReport,
    seed: u64,
    runtime_ms: u128,
}

fn weakconv_cmd(
    cfg: &ExperimentConfig,
    config_echo: &str,
    started: Instant,
) -> Result<HandlerOutput, RunError> {
    let seed = cfg.seed.expect("validated stochastic config has a seed");
    let functionals = builtin_functionals();
    let functional = functionals
        .iter()
        .find(|f| f.id == cfg.functional)
        .expect("validated functional id");
    let report = weak_convergence_test(
        &cfg.amplitudes(),
        cfg.radial_law(),
        functional,
        &cfg.grid,
        cfg.n_ref,
        cfg.samples,
        seed,
        seed ^ 0x9E37_79B9_7F4A_7C15,
    );
    let pass = report
        .points
        .iter()
        .filter(|p| p.n >= report.arity)
        .all(|p| p.z.abs() <= 3.0);
    let data = match effective_format(cfg) {
        OutputFormat::Json => to_json_string(&WeakConvRunReport {
            config_echo,
            report,
            seed,
            runtime_ms: started.elapsed().as_millis(),
        }),
        OutputFormat::Csv => {
            let mut csv = String::from("n,mean,std_error,z\n");
            for p in &report.points {
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    p.n,
                    fmt_f64(p.mean),
                    fmt_f64(p.std_error),
                    fmt_f64(p.z)
                ));
            }
            csv.push_str(&format!(
                "reference,{},{},\n",
                fmt_f64(report.reference_mean),
                fmt_f64(report.reference_std_error)
            ));
            csv
        }
    };
    Ok((data, vec![], pass))
}

#[derive(Serialize)]
struct GibbsRunReport<'a> {
    config_echo: &'a str,
    #[serde(flatten)]
    report: crate::harness::gibbs::GibbsReport,
    runtime_ms: u128,
}

#[derive(Serialize)]
struct GibbsFailureReport<'a> {
    config_echo: &'a str,
    error: String,
    seed: u64,
    runtime_ms: u128,
}

fn gibbs_cmd(
    cfg: &ExperimentConfig,
    config_echo: &str,
    started: Instant,
) -> Result<HandlerOutput, RunError> {
    let seed = cfg.seed.expect("validated stochastic config has a seed");
    let spec = GibbsSpec {
        n: cfg.n,
        cutoff: match cfg.cutoff_shape {
            crate::config::CutoffShape::Hat => CutoffProfile::TriangularHat {
                half_width: cfg.cutoff_width,
            },
            crate::config::CutoffShape::Window => CutoffProfile::Window {
                half_width: cfg.cutoff_width,
            },
        },
        centering: CenteringRule::Harmonic,
    };
    let functionals = builtin_functionals();
    match gibbs_weighted_statistics(
        &cfg.amplitudes(),
        cfg.radial_law(),
        &spec,
        &functionals,
        cfg.t,
        cfg.samples,
        seed,
    ) {
        Ok(report) => {
            let pass = report.per_functional.iter().all(|r| r.verdict);
            let data = to_json_string(&GibbsRunReport {
                config_echo,
                report,
                runtime_ms: started.elapsed().as_millis(),
            });
            Ok((data, vec![], pass))
        }
        Err(HarnessError::DegenerateWeights { ess, minimum }) => {
            // A statistical outcome, not a crash: report and exit 2.
            let data = to_json_string(&GibbsFailureReport {
                config_echo,
                error: format!(
                    "degenerate importance weights: effective sample size {ess:.1} < {minimum}"
                ),
                seed,
                runtime_ms: started.elapsed().as_millis(),
            });
            Ok((data, vec![], false))
        }
        Err(other) => Err(other.into()),
    }
}
