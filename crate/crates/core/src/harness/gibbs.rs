//! Gibbs-type density and self-normalized importance sampling.
//!
//! The density against the sampling measure is
//!
//! ```text
//! G_N(ζ) = χ(Σ_{n≤N} n|ζ_n|² − c_N) · exp(Σ_{k≤N} (Σ_{k₁=k}^{N} |ζ_{k₁}|²)²)
//! ```
//!
//! a function of the actions only, hence exactly conserved by every phase
//! flow here. Weights live in log space end to end (the exponent easily
//! overflows a double), normalization is log-sum-exp, and weight collapse is
//! reported through the effective sample size rather than silently
//! degrading the estimates.

use serde::Serialize;

use crate::exec;
use crate::flow::{flow_truncated, FlowSpec};
use crate::harness::{HarnessError, TestFunctional};
use crate::measures::{sample_state, AmplitudeSequence, RadialLaw};
use crate::state::BirkhoffState;
use crate::stats::log_sum_exp;

/// Continuous, compactly supported cutoff profile χ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutoffProfile {
    /// χ(x) = max(0, 1 − |x|/a) on [−a, a].
    TriangularHat { half_width: f64 },
    /// χ ≡ 1 on [−a, a], 0 outside.
    Window { half_width: f64 },
}

impl CutoffProfile {
    pub fn evaluate(&self, x: f64) -> f64 {
        match self {
            CutoffProfile::TriangularHat { half_width } => (1.0 - x.abs() / half_width).max(0.0),
            CutoffProfile::Window { half_width } => {
                if x.abs() <= *half_width {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn half_width(&self) -> f64 {
        match self {
            CutoffProfile::TriangularHat { half_width } | CutoffProfile::Window { half_width } => {
                *half_width
            }
        }
    }
}

/// Rule for the centering constant c_N.
#[derive(Debug, Clone, PartialEq)]
pub enum CenteringRule {
    /// Σ_{k≤N} 1/k, the mean of Σ n|ζ_n|² under the 1/n-amplitude Gaussian
    /// base measure.
    Harmonic,
    /// Explicit per-level constants (index 0 holds c_1).
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsSpec {
    pub n: usize,
    pub cutoff: CutoffProfile,
    pub centering: CenteringRule,
}

impl GibbsSpec {
    /// Default configuration: triangular hat with half-width 2, harmonic
    /// centering.
    pub fn new(n: usize) -> Self {
        GibbsSpec {
            n,
            cutoff: CutoffProfile::TriangularHat { half_width: 2.0 },
            centering: CenteringRule::Harmonic,
        }
    }

    pub fn centering_constant(&self) -> f64 {
        match &self.centering {
            CenteringRule::Harmonic => (1..=self.n).map(|k| 1.0 / k as f64).sum(),
            CenteringRule::Explicit(cs) => cs[self.n - 1],
        }
    }
}

/// Log-space density value at a state, or exclusion by the cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GibbsDensity {
    Included { log_weight: f64, cutoff_value: f64 },
    Excluded,
}

/// Evaluate χ(Σ n|ζ_n|² − c_N) and the quartic log-weight. Everything is a
/// function of the actions, so the value is exactly flow-invariant.
pub fn gibbs_log_density(state: &BirkhoffState, spec: &GibbsSpec) -> GibbsDensity {
    let n = spec.n;
    let mut weighted_action = 0.0;
    for k in 1..=n {
        weighted_action += k as f64 * state.modulus_sq(k);
    }
    let cutoff_value = spec.cutoff.evaluate(weighted_action - spec.centering_constant());
    if cutoff_value == 0.0 {
        return GibbsDensity::Excluded;
    }
    let mut suffix = 0.0;
    let mut log_weight = 0.0;
    for k in (1..=n).rev() {
        suffix += state.modulus_sq(k);
        log_weight += suffix * suffix;
    }
    GibbsDensity::Included {
        log_weight,
        cutoff_value,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GibbsFunctionalReport {
    pub id: String,
    /// Self-normalized weighted mean of F over the retained draws.
    pub mean_before: f64,
    /// The same mean after the flow pushforward (weights are unchanged).
    pub mean_after: f64,
    /// Standard error of the weighted mean.
    pub mean_std_error: f64,
    /// z-score of the weighted mean against zero.
    pub mean_z: f64,
    /// Standard error of the weighted paired difference.
    pub paired_std_error: f64,
    pub paired_z: f64,
    /// Pass iff |paired_z| ≤ 3.
    pub verdict: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GibbsReport {
    pub per_functional: Vec<GibbsFunctionalReport>,
    pub effective_sample_size: f64,
    pub retained: usize,
    pub excluded: usize,
    pub seed: u64,
}

/// Minimum effective sample size before the weights count as degenerate.
pub const MIN_EFFECTIVE_SAMPLES: f64 = 50.0;

/// Self-normalized importance-sampling estimates of ∫F G_N dμ / ∫G_N dμ,
/// before and after the flow pushforward, over the same draws.
#[allow(clippy::too_many_arguments)]
pub fn gibbs_weighted_statistics(
    amps: &AmplitudeSequence,
    law: RadialLaw,
    spec: &GibbsSpec,
    functionals: &[TestFunctional],
    t: f64,
    m_samples: usize,
    seed: u64,
) -> Result<GibbsReport, HarnessError> {
    const MINIMUM: usize = 10_000;
    if m_samples < MINIMUM {
        return Err(HarnessError::TooFewSamples {
            minimum: MINIMUM,
            got: m_samples,
        });
    }
    let n = spec.n;
    let k = functionals.len();
    let rows: Vec<Option<(f64, Vec<f64>)>> = exec::map_indexed(m_samples, |i| {
        let st = sample_state(amps, law, n, seed, i as u64);
        match gibbs_log_density(&st, spec) {
            GibbsDensity::Excluded => None,
            GibbsDensity::Included {
                log_weight,
                cutoff_value,
            } => {
                let pushed = flow_truncated(&st, FlowSpec { n, t });
                let mut vals = Vec::with_capacity(2 * k);
                for f in functionals {
                    vals.push(f.evaluate(&st));
                }
                for f in functionals {
                    vals.push(f.evaluate(&pushed));
                }
                Some((log_weight + cutoff_value.ln(), vals))
            }
        }
    });

    let retained: Vec<&(f64, Vec<f64>)> = rows.iter().flatten().collect();
    let excluded = m_samples - retained.len();
    if retained.is_empty() {
        return Err(HarnessError::DegenerateWeights {
            ess: 0.0,
            minimum: MIN_EFFECTIVE_SAMPLES,
        });
    }
    let log_weights: Vec<f64> = retained.iter().map(|r| r.0).collect();
    let lse = log_sum_exp(&log_weights);
    let weights: Vec<f64> = log_weights.iter().map(|lw| (lw - lse).exp()).collect();
    let ess = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
    if ess < MIN_EFFECTIVE_SAMPLES {
        return Err(HarnessError::DegenerateWeights {
            ess,
            minimum: MIN_EFFECTIVE_SAMPLES,
        });
    }

    let per_functional = functionals
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let before: Vec<f64> = retained.iter().map(|r| r.1[j]).collect();
            let after: Vec<f64> = retained.iter().map(|r| r.1[k + j]).collect();
            let mean_before: f64 = weights.iter().zip(&before).map(|(w, x)| w * x).sum();
            let mean_after: f64 = weights.iter().zip(&after).map(|(w, x)| w * x).sum();
            let mean_var: f64 = weights
                .iter()
                .zip(&before)
                .map(|(w, x)| {
                    let d = x - mean_before;
                    w * w * d * d
                })
                .sum();
            let mean_std_error = mean_var.sqrt();
            let paired_mean: f64 = weights
                .iter()
                .zip(before.iter().zip(&after))
                .map(|(w, (b, a))| w * (a - b))
                .sum();
            let paired_var: f64 = weights
                .iter()
                .zip(before.iter().zip(&after))
                .map(|(w, (b, a))| {
                    let d = (a - b) - paired_mean;
                    w * w * d * d
                })
                .sum();
            let paired_std_error = paired_var.sqrt();
            let mean_z = if mean_std_error > 0.0 {
                mean_before / mean_std_error
            } else {
                0.0
            };
            let paired_z = crate::harness::paired_z_score(paired_mean, paired_std_error, f.bound);
            GibbsFunctionalReport {
                id: f.id.to_string(),
                mean_before,
                mean_after,
                mean_std_error,
                mean_z,
                paired_std_error,
                paired_z,
                verdict: paired_z.abs() <= 3.0,
            }
        })
        .collect();

    Ok(GibbsReport {
        per_functional,
        effective_sample_size: ess,
        retained: retained.len(),
        excluded,
        seed,
    })
}
