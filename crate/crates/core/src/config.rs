//! Experiment configuration: key-value text format, exhaustive validation,
//! canonical serialization.
//!
//! A config is `key = value` lines with `#` comments. Parsing reports every
//! violation it finds (unknown keys, duplicates with both locations, type
//! mismatches, missing seeds, admissibility failures), not just the first.
//! `to_text` emits the canonical form: parse → serialize → parse is a fixed
//! point.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::encode::fmt_f64;
use crate::measures::{classify_sigma, AmplitudeSequence, RadialLaw, SeriesVerdict};
use crate::state::SobolevIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubcommandKind {
    Flow,
    Sample,
    TailMass,
    Renorm,
    Invariance,
    WeakConv,
    Gibbs,
}

impl SubcommandKind {
    pub fn name(self) -> &'static str {
        match self {
            SubcommandKind::Flow => "flow",
            SubcommandKind::Sample => "sample",
            SubcommandKind::TailMass => "tailmass",
            SubcommandKind::Renorm => "renorm",
            SubcommandKind::Invariance => "invariance",
            SubcommandKind::WeakConv => "weakconv",
            SubcommandKind::Gibbs => "gibbs",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "flow" => Some(SubcommandKind::Flow),
            "sample" => Some(SubcommandKind::Sample),
            "tailmass" => Some(SubcommandKind::TailMass),
            "renorm" => Some(SubcommandKind::Renorm),
            "invariance" => Some(SubcommandKind::Invariance),
            "weakconv" => Some(SubcommandKind::WeakConv),
            "gibbs" => Some(SubcommandKind::Gibbs),
            _ => None,
        }
    }

    /// Stochastic subcommands require an explicit seed.
    pub fn is_stochastic(self) -> bool {
        !matches!(self, SubcommandKind::Flow | SubcommandKind::TailMass)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LawChoice {
    Gaussian,
    RadialExponential,
    RadialExponentialNormalized,
}

impl LawChoice {
    pub fn name(self) -> &'static str {
        match self {
            LawChoice::Gaussian => "gaussian",
            LawChoice::RadialExponential => "radial-exponential",
            LawChoice::RadialExponentialNormalized => "radial-exponential-normalized",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "gaussian" => Some(LawChoice::Gaussian),
            "radial-exponential" => Some(LawChoice::RadialExponential),
            "radial-exponential-normalized" => Some(LawChoice::RadialExponentialNormalized),
            _ => None,
        }
    }

    pub fn instantiate(self) -> RadialLaw {
        match self {
            LawChoice::Gaussian => RadialLaw::gaussian(),
            LawChoice::RadialExponential => RadialLaw::radial_exponential(),
            LawChoice::RadialExponentialNormalized => RadialLaw::radial_exponential_normalized(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmpFamily {
    Power,
    PowerLog,
}

impl AmpFamily {
    pub fn name(self) -> &'static str {
        match self {
            AmpFamily::Power => "power",
            AmpFamily::PowerLog => "power-log",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "power" => Some(AmpFamily::Power),
            "power-log" => Some(AmpFamily::PowerLog),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn name(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "csv" => Some(OutputFormat::Csv),
            "json" => Some(OutputFormat::Json),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutoffShape {
    Hat,
    Window,
}

impl CutoffShape {
    pub fn name(self) -> &'static str {
        match self {
            CutoffShape::Hat => "hat",
            CutoffShape::Window => "window",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "hat" => Some(CutoffShape::Hat),
            "window" => Some(CutoffShape::Window),
            _ => None,
        }
    }
}

/// Fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub subcommand: SubcommandKind,
    pub law: LawChoice,
    pub amp_family: AmpFamily,
    pub amp_p: f64,
    pub amp_q: f64,
    /// Truncation level.
    pub n: usize,
    /// Tracked mode index (renorm diagnostics).
    pub mode: usize,
    pub t: f64,
    /// Norm regularity for flow profiles and distances.
    pub s: f64,
    /// Regularity probed by tail-mass products.
    pub sigma: f64,
    pub samples: usize,
    pub seed: Option<u64>,
    pub grid: Vec<usize>,
    pub n_ref: usize,
    pub functional: String,
    pub cutoff_shape: CutoffShape,
    pub cutoff_width: f64,
    pub negative_control: bool,
    pub renormalized: bool,
    pub dump_trajectories: bool,
    pub state_path: Option<PathBuf>,
    pub profile: Vec<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

impl ExperimentConfig {
    pub fn defaults(subcommand: SubcommandKind) -> Self {
        let (n, samples, grid) = match subcommand {
            SubcommandKind::Flow => (8, 1, vec![]),
            SubcommandKind::Sample => (16, 100, vec![]),
            SubcommandKind::TailMass => (1024, 1, vec![]),
            SubcommandKind::Renorm => (1024, 10_000, vec![32, 64, 128, 256, 512, 1024]),
            SubcommandKind::Invariance => (32, 20_000, vec![]),
            SubcommandKind::WeakConv => (256, 20_000, vec![1, 2, 4, 8]),
            SubcommandKind::Gibbs => (16, 50_000, vec![]),
        };
        let amp_p = match subcommand {
            SubcommandKind::Renorm => 0.5,
            _ => 1.0,
        };
        ExperimentConfig {
            subcommand,
            law: LawChoice::Gaussian,
            amp_family: AmpFamily::Power,
            amp_p,
            amp_q: 0.0,
            n,
            mode: 1,
            t: 1.0,
            s: 0.0,
            sigma: 1.0,
            samples,
            seed: None,
            grid,
            n_ref: 256,
            functional: "F1".to_string(),
            cutoff_shape: CutoffShape::Hat,
            cutoff_width: 2.0,
            negative_control: false,
            renormalized: false,
            dump_trajectories: false,
            state_path: None,
            profile: vec![],
            out: None,
            format: None,
        }
    }

    pub fn radial_law(&self) -> RadialLaw {
        self.law.instantiate()
    }

    pub fn amplitudes(&self) -> AmplitudeSequence {
        match self.amp_family {
            AmpFamily::Power => AmplitudeSequence::power(self.amp_p),
            AmpFamily::PowerLog => AmplitudeSequence::power_log(self.amp_p, self.amp_q),
        }
        .expect("validated exponents are finite")
    }

    /// Canonical key-value form; `parse_config(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut push = |key: &str, value: String| {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&value);
            out.push('\n');
        };
        push("subcommand", self.subcommand.name().to_string());
        push("law", self.law.name().to_string());
        push("amp-family", self.amp_family.name().to_string());
        push("amp-p", fmt_f64(self.amp_p));
        push("amp-q", fmt_f64(self.amp_q));
        push("n", self.n.to_string());
        push("mode", self.mode.to_string());
        push("t", fmt_f64(self.t));
        push("s", fmt_f64(self.s));
        push("sigma", fmt_f64(self.sigma));
        push("samples", self.samples.to_string());
        if let Some(seed) = self.seed {
            push("seed", seed.to_string());
        }
        if !self.grid.is_empty() {
            push(
                "grid",
                self.grid
                    .iter()
                    .map(|n| n.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
        }
        push("n-ref", self.n_ref.to_string());
        push("functional", self.functional.clone());
        push("cutoff-shape", self.cutoff_shape.name().to_string());
        push("cutoff-width", fmt_f64(self.cutoff_width));
        push("negative-control", self.negative_control.to_string());
        push("renormalized", self.renormalized.to_string());
        push("dump-trajectories", self.dump_trajectories.to_string());
        if let Some(path) = &self.state_path {
            push("state", path.display().to_string());
        }
        if !self.profile.is_empty() {
            push(
                "profile",
                self.profile
                    .iter()
                    .map(|n| n.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
        }
        if let Some(path) = &self.out {
            push("out", path.display().to_string());
        }
        if let Some(format) = self.format {
            push("format", format.name().to_string());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigViolation {
    Malformed {
        line: usize,
        content: String,
    },
    UnknownKey {
        key: String,
        line: usize,
    },
    DuplicateKey {
        key: String,
        first_line: usize,
        line: usize,
    },
    TypeMismatch {
        key: String,
        line: usize,
        expected: &'static str,
        got: String,
    },
    MissingSeed,
    MissingKey {
        key: &'static str,
        reason: String,
    },
    SubcommandMismatch {
        expected: &'static str,
        got: String,
    },
    Invariant {
        message: String,
    },
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigViolation::Malformed { line, content } => {
                write!(f, "line {line}: expected `key = value`, got `{content}`")
            }
            ConfigViolation::UnknownKey { key, line } => {
                write!(f, "line {line}: unknown key `{key}`")
            }
            ConfigViolation::DuplicateKey {
                key,
                first_line,
                line,
            } => write!(
                f,
                "line {line}: duplicate key `{key}` (first set on line {first_line})"
            ),
            ConfigViolation::TypeMismatch {
                key,
                line,
                expected,
                got,
            } => write!(f, "line {line}: key `{key}` expects {expected}, got `{got}`"),
            ConfigViolation::MissingSeed => {
                write!(f, "stochastic subcommands require an explicit `seed`")
            }
            ConfigViolation::MissingKey { key, reason } => {
                write!(f, "missing key `{key}`: {reason}")
            }
            ConfigViolation::SubcommandMismatch { expected, got } => write!(
                f,
                "config declares subcommand `{got}` but `{expected}` was invoked"
            ),
            ConfigViolation::Invariant { message } => write!(f, "{message}"),
        }
    }
}

/// All violations found in one parse, in source order.
#[derive(Debug, Error)]
pub struct ConfigErrors(pub Vec<ConfigViolation>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.0.len())?;
        for v in &self.0 {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

const KNOWN_KEYS: &[&str] = &[
    "subcommand",
    "law",
    "amp-family",
    "amp-p",
    "amp-q",
    "n",
    "mode",
    "t",
    "s",
    "sigma",
    "samples",
    "seed",
    "grid",
    "n-ref",
    "functional",
    "cutoff-shape",
    "cutoff-width",
    "negative-control",
    "renormalized",
    "dump-trajectories",
    "state",
    "profile",
    "out",
    "format",
];

fn parse_usize_list(value: &str) -> Option<Vec<usize>> {
    if value.trim().is_empty() {
        return Some(vec![]);
    }
    value
        .split(',')
        .map(|part| part.trim().parse::<usize>().ok())
        .collect()
}

/// Apply one typed key to a config under construction.
pub fn apply_key(
    cfg: &mut ExperimentConfig,
    key: &str,
    value: &str,
    line: usize,
) -> Result<(), ConfigViolation> {
    let mismatch = |expected: &'static str| ConfigViolation::TypeMismatch {
        key: key.to_string(),
        line,
        expected,
        got: value.to_string(),
    };
    match key {
        "law" => cfg.law = LawChoice::parse(value).ok_or_else(|| {
            mismatch("gaussian | radial-exponential | radial-exponential-normalized")
        })?,
        "amp-family" => {
            cfg.amp_family = AmpFamily::parse(value).ok_or_else(|| mismatch("power | power-log"))?
        }
        "amp-p" => {
            cfg.amp_p = value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| mismatch("a finite real"))?
        }
        "amp-q" => {
            cfg.amp_q = value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| mismatch("a finite real"))?
        }
        "n" => {
            cfg.n = value
                .parse::<usize>()
                .ok()
                .filter(|v| *v >= 1)
                .ok_or_else(|| mismatch("a positive integer"))?
        }
        "mode" => {
            cfg.mode = value
                .parse::<usize>()
                .ok()
                .filter(|v| *v >= 1)
                .ok_or_else(|| mismatch("a positive integer"))?
        }
        "t" => {
            cfg.t = value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| mismatch("a finite real"))?
        }
        "s" => {
            cfg.s = value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| mismatch("a finite real"))?
        }
        "sigma" => {
            cfg.sigma = value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| mismatch("a finite real"))?
        }
        "samples" => {
            cfg.samples = value
                .parse::<usize>()
                .ok()
                .filter(|v| *v >= 1)
                .ok_or_else(|| mismatch("a positive integer"))?
        }
        "seed" => cfg.seed = Some(value.parse::<u64>().map_err(|_| mismatch("a u64"))?),
        "grid" => {
            cfg.grid = parse_usize_list(value)
                .ok_or_else(|| mismatch("a comma-separated list of positive integers"))?
        }
        "n-ref" => {
            cfg.n_ref = value
                .parse::<usize>()
                .ok()
                .filter(|v| *v >= 1)
                .ok_or_else(|| mismatch("a positive integer"))?
        }
        "functional" => cfg.functional = value.to_string(),
        "cutoff-shape" => {
            cfg.cutoff_shape =
                CutoffShape::parse(value).ok_or_else(|| mismatch("hat | window"))?
        }
        "cutoff-width" => {
            cfg.cutoff_width = value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v > 0.0)
                .ok_or_else(|| mismatch("a positive real"))?
        }
        "negative-control" => {
            cfg.negative_control = value.parse::<bool>().map_err(|_| mismatch("true | false"))?
        }
        "renormalized" => {
            cfg.renormalized = value.parse::<bool>().map_err(|_| mismatch("true | false"))?
        }
        "dump-trajectories" => {
            cfg.dump_trajectories = value.parse::<bool>().map_err(|_| mismatch("true | false"))?
        }
        "state" => cfg.state_path = Some(PathBuf::from(value)),
        "profile" => {
            cfg.profile = parse_usize_list(value)
                .ok_or_else(|| mismatch("a comma-separated list of positive integers"))?
        }
        "out" => cfg.out = Some(PathBuf::from(value)),
        "format" => {
            cfg.format = Some(OutputFormat::parse(value).ok_or_else(|| mismatch("csv | json"))?)
        }
        other => {
            return Err(ConfigViolation::UnknownKey {
                key: other.to_string(),
                line,
            })
        }
    }
    Ok(())
}

/// Cross-field checks; returns every violation found.
pub fn validate(cfg: &ExperimentConfig) -> Vec<ConfigViolation> {
    let mut violations = Vec::new();
    if cfg.subcommand.is_stochastic() && cfg.seed.is_none() {
        violations.push(ConfigViolation::MissingSeed);
    }
    match cfg.subcommand {
        SubcommandKind::Flow => {
            if cfg.state_path.is_none() {
                violations.push(ConfigViolation::MissingKey {
                    key: "state",
                    reason: "flow evolves a state read from a CSV or JSON file".to_string(),
                });
            }
        }
        SubcommandKind::Invariance => {
            if cfg.samples < 1_000 {
                violations.push(ConfigViolation::Invariant {
                    message: format!(
                        "invariance needs samples ≥ 1000, got {}",
                        cfg.samples
                    ),
                });
            }
            if cfg.renormalized {
                violations.extend(renorm_admissibility(cfg));
            }
        }
        SubcommandKind::Gibbs => {
            if cfg.samples < 10_000 {
                violations.push(ConfigViolation::Invariant {
                    message: format!("gibbs needs samples ≥ 10000, got {}", cfg.samples),
                });
            }
        }
        SubcommandKind::Renorm => {
            violations.extend(renorm_admissibility(cfg));
            if cfg.grid.len() < 2 {
                violations.push(ConfigViolation::Invariant {
                    message: "renorm needs a grid of at least two truncation levels".to_string(),
                });
            } else if !cfg.grid.windows(2).all(|w| w[0] < w[1]) {
                violations.push(ConfigViolation::Invariant {
                    message: format!("grid must increase strictly, got {:?}", cfg.grid),
                });
            } else if cfg.mode > cfg.grid[0] {
                violations.push(ConfigViolation::Invariant {
                    message: format!(
                        "tracked mode {} exceeds the smallest grid level {}",
                        cfg.mode, cfg.grid[0]
                    ),
                });
            }
        }
        SubcommandKind::WeakConv => {
            if cfg.grid.is_empty() {
                violations.push(ConfigViolation::Invariant {
                    message: "weakconv needs a nonempty grid".to_string(),
                });
            } else {
                if !cfg.grid.windows(2).all(|w| w[0] < w[1]) {
                    violations.push(ConfigViolation::Invariant {
                        message: format!("grid must increase strictly, got {:?}", cfg.grid),
                    });
                }
                if cfg.n_ref < *cfg.grid.last().unwrap() {
                    violations.push(ConfigViolation::Invariant {
                        message: format!(
                            "n-ref = {} must dominate the grid maximum {}",
                            cfg.n_ref,
                            cfg.grid.last().unwrap()
                        ),
                    });
                }
            }
            if !["F1", "F2", "F3", "F4", "F5"].contains(&cfg.functional.as_str()) {
                violations.push(ConfigViolation::Invariant {
                    message: format!(
                        "functional must be one of F1..F5, got `{}`",
                        cfg.functional
                    ),
                });
            }
        }
        SubcommandKind::Sample | SubcommandKind::TailMass => {}
    }
    violations
}

/// The divergence/moment conditions of the renormalized regime.
fn renorm_admissibility(cfg: &ExperimentConfig) -> Vec<ConfigViolation> {
    let mut violations = Vec::new();
    let amps = match cfg.amp_family {
        AmpFamily::Power => AmplitudeSequence::power(cfg.amp_p),
        AmpFamily::PowerLog => AmplitudeSequence::power_log(cfg.amp_p, cfg.amp_q),
    };
    let amps = match amps {
        Ok(a) => a,
        Err(e) => {
            violations.push(ConfigViolation::Invariant {
                message: e.to_string(),
            });
            return violations;
        }
    };
    let zero = SobolevIndex::new(0.0);
    if classify_sigma(&amps, zero, 1).verdict != SeriesVerdict::Diverges {
        violations.push(ConfigViolation::Invariant {
            message: format!(
                "renormalized runs need Σ|α_n|² = ∞; the rule (p = {}, q = {}) gives a convergent series",
                cfg.amp_p, cfg.amp_q
            ),
        });
    }
    if classify_sigma(&amps.pow_rule(2.0), zero, 1).verdict != SeriesVerdict::Converges {
        violations.push(ConfigViolation::Invariant {
            message: format!(
                "renormalized runs need Σ|α_n|⁴ < ∞; the rule (p = {}, q = {}) gives a divergent series",
                cfg.amp_p, cfg.amp_q
            ),
        });
    }
    if (cfg.law.instantiate().second_moment() - 1.0).abs() > 1e-12 {
        violations.push(ConfigViolation::Invariant {
            message: format!(
                "renormalized runs need a law with unit second moment; `{}` has {}",
                cfg.law.name(),
                cfg.law.instantiate().second_moment()
            ),
        });
    }
    violations
}

/// Parse a standalone config file (must declare its subcommand) and run
/// all cross-field validation, reporting every violation found.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let (cfg, mut violations) = parse_config_lenient(text, None);
    if let Some(cfg) = &cfg {
        violations.extend(validate(cfg));
    }
    match cfg {
        Some(cfg) if violations.is_empty() => Ok(cfg),
        _ => Err(ConfigErrors(violations)),
    }
}

/// Structural parse only: key syntax, known keys, duplicates, types, and
/// subcommand resolution. Cross-field validation is the caller's second
/// step (the CLI merges flag overrides in between).
pub fn parse_config_structure(
    text: &str,
    cli_subcommand: Option<SubcommandKind>,
) -> Result<ExperimentConfig, ConfigErrors> {
    let (cfg, violations) = parse_config_lenient(text, cli_subcommand);
    match cfg {
        Some(cfg) if violations.is_empty() => Ok(cfg),
        _ => Err(ConfigErrors(violations)),
    }
}

/// Best-effort parse: always returns whatever config could be built along
/// with every structural violation encountered.
fn parse_config_lenient(
    text: &str,
    cli_subcommand: Option<SubcommandKind>,
) -> (Option<ExperimentConfig>, Vec<ConfigViolation>) {
    let mut violations = Vec::new();
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            violations.push(ConfigViolation::Malformed {
                line: line_no,
                content: line.to_string(),
            });
            continue;
        };
        let key = k.trim().to_string();
        let value = v.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            violations.push(ConfigViolation::UnknownKey { key, line: line_no });
            continue;
        }
        if let Some(&first_line) = seen.get(&key) {
            violations.push(ConfigViolation::DuplicateKey {
                key,
                first_line,
                line: line_no,
            });
            continue;
        }
        seen.insert(key.clone(), line_no);
        entries.push((line_no, key, value));
    }

    let declared = entries.iter().find(|(_, k, _)| k == "subcommand");
    let subcommand = match (declared, cli_subcommand) {
        (Some((line, _, value)), cli) => match SubcommandKind::parse(value) {
            Some(sub) => {
                if let Some(cli_sub) = cli {
                    if cli_sub != sub {
                        violations.push(ConfigViolation::SubcommandMismatch {
                            expected: cli_sub.name(),
                            got: value.clone(),
                        });
                    }
                }
                Some(sub)
            }
            None => {
                violations.push(ConfigViolation::TypeMismatch {
                    key: "subcommand".to_string(),
                    line: *line,
                    expected: "flow | sample | tailmass | renorm | invariance | weakconv | gibbs",
                    got: value.clone(),
                });
                cli_subcommand
            }
        },
        (None, Some(cli_sub)) => Some(cli_sub),
        (None, None) => {
            violations.push(ConfigViolation::MissingKey {
                key: "subcommand",
                reason: "standalone configs must name their subcommand".to_string(),
            });
            None
        }
    };

    let Some(subcommand) = subcommand else {
        return (None, violations);
    };
    let mut cfg = ExperimentConfig::defaults(subcommand);
    for (line, key, value) in &entries {
        if key == "subcommand" {
            continue;
        }
        if let Err(v) = apply_key(&mut cfg, key, value, *line) {
            violations.push(v);
        }
    }
    (Some(cfg), violations)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_invariance_config_fills_defaults() {
        let cfg = parse_config("subcommand = invariance\nseed = 7\n").unwrap();
        assert_eq!(cfg.subcommand, SubcommandKind::Invariance);
        assert_eq!(cfg.n, 32);
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(cfg.law, LawChoice::Gaussian);
    }

    #[test]
    fn round_trip_is_a_fixed_point() {
        let text = "subcommand = gibbs\nseed = 9\nn = 16\ncutoff-width = 0.5\nt = 1.7\nsamples = 50000\n";
        let cfg = parse_config(text).unwrap();
        let canonical = cfg.to_text();
        let reparsed = parse_config(&canonical).unwrap();
        assert_eq!(reparsed, cfg);
        assert_eq!(reparsed.to_text(), canonical);
    }

    #[test]
    fn duplicate_keys_report_both_locations() {
        let err = parse_config("subcommand = sample\nseed = 1\nn = 4\nn = 8\n").unwrap_err();
        assert!(err.0.iter().any(|v| matches!(
            v,
            ConfigViolation::DuplicateKey {
                first_line: 3,
                line: 4,
                ..
            }
        )));
    }

    #[test]
    fn unknown_keys_and_type_errors_are_all_reported() {
        let err = parse_config(
            "subcommand = invariance\nbogus = 1\nn = minus\nsamples = 500\n",
        )
        .unwrap_err();
        assert!(err
            .0
            .iter()
            .any(|v| matches!(v, ConfigViolation::UnknownKey { .. })));
        assert!(err
            .0
            .iter()
            .any(|v| matches!(v, ConfigViolation::TypeMismatch { .. })));
        // samples below the harness minimum and the missing seed also show up.
        assert!(err
            .0
            .iter()
            .any(|v| matches!(v, ConfigViolation::Invariant { .. })));
        assert!(err.0.iter().any(|v| matches!(v, ConfigViolation::MissingSeed)));
    }

    #[test]
    fn stochastic_runs_demand_a_seed() {
        let err = parse_config("subcommand = sample\n").unwrap_err();
        assert!(err.0.contains(&ConfigViolation::MissingSeed));
        assert!(parse_config("subcommand = tailmass\n").is_ok());
    }

    #[test]
    fn renorm_rejects_convergent_square_sums() {
        let err =
            parse_config("subcommand = renorm\nseed = 3\namp-p = 2.0\n").unwrap_err();
        assert!(err.0.iter().any(|v| matches!(
            v,
            ConfigViolation::Invariant { message } if message.contains("Σ|α_n|²")
        )));
    }

    #[test]
    fn renorm_rejects_unnormalized_law() {
        let err = parse_config(
            "subcommand = renorm\nseed = 3\nlaw = radial-exponential\n",
        )
        .unwrap_err();
        assert!(err.0.iter().any(|v| matches!(
            v,
            ConfigViolation::Invariant { message } if message.contains("second moment")
        )));
        assert!(parse_config(
            "subcommand = renorm\nseed = 3\nlaw = radial-exponential-normalized\n"
        )
        .is_ok());
    }

    #[test]
    fn cli_subcommand_must_match_declared_one() {
        let err = parse_config_structure(
            "subcommand = gibbs\nseed = 1\n",
            Some(SubcommandKind::Sample),
        )
        .unwrap_err();
        assert!(err
            .0
            .iter()
            .any(|v| matches!(v, ConfigViolation::SubcommandMismatch { .. })));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = parse_config(
            "# a comment\nsubcommand = tailmass\n\nsigma = 0.4 # trailing comment\n",
        )
        .unwrap();
        assert_eq!(cfg.sigma, 0.4);
    }

    #[test]
    fn flow_requires_a_state_file() {
        let err = parse_config("subcommand = flow\n").unwrap_err();
        assert!(err
            .0
            .iter()
            .any(|v| matches!(v, ConfigViolation::MissingKey { key: "state", .. })));
        let ok = parse_config("subcommand = flow\nstate = in.csv\nprofile = 1,2,4\n").unwrap();
        assert_eq!(ok.profile, vec![1, 2, 4]);
    }

    #[test]
    fn weakconv_grid_and_reference_are_checked() {
        let err = parse_config(
            "subcommand = weakconv\nseed = 5\ngrid = 4,2\nn-ref = 1\nfunctional = F9\n",
        )
        .unwrap_err();
        let messages: Vec<String> = err.0.iter().map(|v| v.to_string()).collect();
        assert!(messages.iter().any(|m| m.contains("increase strictly")));
        assert!(messages.iter().any(|m| m.contains("n-ref")));
        assert!(messages.iter().any(|m| m.contains("F1..F5")));
    }
}
