//! Statistical verification engine.
//!
//! Invariance is tested with paired (common-random-numbers) estimators: the
//! same draws are pushed through the flow and the paired difference of a
//! bounded functional has population mean exactly zero under invariance, so
//! the 3σ policy is sharp. Two-sample distances and weak-convergence scans
//! strengthen the mean tests, and a deliberately broken flow keeps the
//! harness falsifiable.

pub mod functionals;
pub mod gibbs;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::exec;
use crate::flow::{flow_truncated, FlowSpec};
use crate::measures::{sample_state, AmplitudeSequence, RadialLaw};
use crate::renorm::{renorm_flow, RenormContext, RenormError};
use crate::rng::{domain, substream};
use crate::state::BirkhoffState;
use crate::stats::{ks_pvalue, ks_statistic, mean_stats, pairwise_map_sum, pairwise_sum};

pub use functionals::{builtin_functionals, f1_gaussian_expectation, TestFunctional};

/// Paired differences below this fraction of a functional's bound are
/// floating-point residue, not statistics: functionals of the conserved
/// actions come back bit-near-identical under every modulus-preserving
/// flow, and a z-ratio of rounding noise would be meaningless. Such
/// differences count as exactly zero.
pub const PAIRED_NOISE_FLOOR: f64 = 1e-12;

fn paired_z_score(mean_diff: f64, std_error: f64, scale: f64) -> f64 {
    if mean_diff.abs() <= PAIRED_NOISE_FLOOR * scale || std_error == 0.0 {
        0.0
    } else {
        mean_diff / std_error
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("need at least {minimum} samples, got {got}")]
    TooFewSamples { minimum: usize, got: usize },
    #[error("ensembles disagree in truncation level ({a} vs {b})")]
    DimensionMismatch { a: usize, b: usize },
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("renormalized flow needs admissible amplitudes: {0}")]
    InvalidRenorm(#[from] RenormError),
    #[error(
        "importance weights degenerate: effective sample size {ess:.1} < {minimum} \
         (cutoff or parameters exclude nearly all samples)"
    )]
    DegenerateWeights { ess: f64, minimum: f64 },
}

/// Ensemble description: measure parameters plus the master seed.
#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub amps: AmplitudeSequence,
    pub law: RadialLaw,
    pub n_modes: usize,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn draw(&self, sample: u64) -> BirkhoffState {
        sample_state(&self.amps, self.law, self.n_modes, self.seed, sample)
    }
}

/// Which map gets tested for invariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowKind {
    /// The exact truncated flow.
    Truncated,
    /// The truncated flow with the per-mode renormalization rotation.
    Renormalized,
    /// Negative control: apply the flow, then rescale every coefficient's
    /// argument by `factor`. Wrapping makes the pushed-forward angles
    /// non-uniform, destroying the rotation invariance the clean flows rely
    /// on, so a sound harness must reject it.
    BrokenPhaseScale { factor: f64 },
}

fn apply_flow(
    state: &BirkhoffState,
    kind: FlowKind,
    ctx: Option<&RenormContext>,
    n: usize,
    t: f64,
) -> BirkhoffState {
    match kind {
        FlowKind::Truncated => flow_truncated(state, FlowSpec { n, t }),
        FlowKind::Renormalized => {
            renorm_flow(state, ctx.expect("context prepared for renormalized flow"), n, t)
        }
        FlowKind::BrokenPhaseScale { factor } => {
            let flowed = flow_truncated(state, FlowSpec { n, t });
            let coeffs = flowed
                .coeffs()
                .iter()
                .map(|z| Complex64::from_polar(z.norm(), factor * z.arg()))
                .collect();
            BirkhoffState::new(coeffs).expect("argument rescaling keeps moduli")
        }
    }
}

/// Paired invariance verdict for one functional.
#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub id: String,
    pub mean_before: f64,
    pub mean_after: f64,
    /// Standard error of the paired difference.
    pub std_error: f64,
    pub z: f64,
    /// Pass iff |z| ≤ 3.
    pub verdict: bool,
    pub sample_count: usize,
    pub seed: u64,
}

/// Monte-Carlo means of F(ζ) and F(flow(ζ)) over the same draws, with the
/// paired z-score per functional.
pub fn invariance_test(
    sampler: &EnsembleSpec,
    flow: FlowKind,
    t: f64,
    functionals: &[TestFunctional],
    m_samples: usize,
) -> Result<Vec<InvarianceReport>, HarnessError> {
    const MINIMUM: usize = 1_000;
    if m_samples < MINIMUM {
        return Err(HarnessError::TooFewSamples {
            minimum: MINIMUM,
            got: m_samples,
        });
    }
    let ctx = match flow {
        FlowKind::Renormalized => Some(RenormContext::new(sampler.amps, sampler.law)?),
        _ => None,
    };
    let n = sampler.n_modes;
    let k = functionals.len();
    let rows: Vec<Vec<f64>> = exec::map_indexed(m_samples, |i| {
        let st = sampler.draw(i as u64);
        let pushed = apply_flow(&st, flow, ctx.as_ref(), n, t);
        let mut row = Vec::with_capacity(2 * k);
        for f in functionals {
            row.push(f.evaluate(&st));
        }
        for f in functionals {
            row.push(f.evaluate(&pushed));
        }
        row
    });

    let reports = functionals
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let before: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let after: Vec<f64> = rows.iter().map(|r| r[k + j]).collect();
            let diff: Vec<f64> = before
                .iter()
                .zip(&after)
                .map(|(b, a)| a - b)
                .collect();
            let d = mean_stats(&diff);
            let z = paired_z_score(d.mean, d.std_error, f.bound);
            InvarianceReport {
                id: f.id.to_string(),
                mean_before: pairwise_sum(&before) / m_samples as f64,
                mean_after: pairwise_sum(&after) / m_samples as f64,
                std_error: d.std_error,
                z,
                verdict: z.abs() <= 3.0,
                sample_count: m_samples,
                seed: sampler.seed,
            }
        })
        .collect();
    Ok(reports)
}

/// Materialize an ensemble of independent draws.
pub fn sample_ensemble(sampler: &EnsembleSpec, m_samples: usize) -> Vec<BirkhoffState> {
    exec::map_indexed(m_samples, |i| sampler.draw(i as u64))
}

/// Push every member of an ensemble through a flow.
pub fn push_forward(
    ensemble: &[BirkhoffState],
    kind: FlowKind,
    ctx: Option<&RenormContext>,
    n: usize,
    t: f64,
) -> Vec<BirkhoffState> {
    ensemble
        .iter()
        .map(|st| apply_flow(st, kind, ctx, n, t))
        .collect()
}

/// Two-sample statistic choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TwoSampleStat {
    /// Energy distance on the first 8 real coordinates with a permutation
    /// p-value.
    EnergyDistance { permutations: usize },
    /// Kolmogorov-Smirnov on each of the 8 leading real coordinates,
    /// Bonferroni-corrected.
    PerMarginalKs,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TwoSampleResult {
    pub statistic: f64,
    pub p_value: f64,
}

const EMBED_DIM: usize = 8;

fn embed(state: &BirkhoffState) -> [f64; EMBED_DIM] {
    let mut v = [0.0; EMBED_DIM];
    for mode in 1..=4 {
        let c = state.coeff(mode);
        v[2 * (mode - 1)] = c.re;
        v[2 * (mode - 1) + 1] = c.im;
    }
    v
}

/// Energy distance in the V-statistic (all-pairs) convention, so identical
/// ensembles give exactly zero.
fn energy_statistic(dist: &[Vec<f64>], idx_a: &[usize], idx_b: &[usize]) -> f64 {
    let na = idx_a.len() as f64;
    let nb = idx_b.len() as f64;
    let mut cross = 0.0;
    for &i in idx_a {
        for &j in idx_b {
            cross += dist[i][j];
        }
    }
    let mut within_a = 0.0;
    for &i in idx_a {
        for &j in idx_a {
            within_a += dist[i][j];
        }
    }
    let mut within_b = 0.0;
    for &i in idx_b {
        for &j in idx_b {
            within_b += dist[i][j];
        }
    }
    2.0 * cross / (na * nb) - within_a / (na * na) - within_b / (nb * nb)
}

/// Compare two ensembles drawn at the same truncation level.
pub fn two_sample_test(
    ens_a: &[BirkhoffState],
    ens_b: &[BirkhoffState],
    stat: TwoSampleStat,
    seed: u64,
) -> Result<TwoSampleResult, HarnessError> {
    if ens_a.is_empty() || ens_b.is_empty() {
        return Err(HarnessError::EmptyEnsemble);
    }
    let (la, lb) = (ens_a[0].len(), ens_b[0].len());
    if la != lb {
        return Err(HarnessError::DimensionMismatch { a: la, b: lb });
    }
    match stat {
        TwoSampleStat::EnergyDistance { permutations } => {
            let pooled: Vec<[f64; EMBED_DIM]> = ens_a
                .iter()
                .chain(ens_b.iter())
                .map(embed)
                .collect();
            let total = pooled.len();
            let mut dist = vec![vec![0.0; total]; total];
            for i in 0..total {
                for j in (i + 1)..total {
                    let d: f64 = pooled[i]
                        .iter()
                        .zip(&pooled[j])
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                        .sqrt();
                    dist[i][j] = d;
                    dist[j][i] = d;
                }
            }
            let na = ens_a.len();
            let idx_a: Vec<usize> = (0..na).collect();
            let idx_b: Vec<usize> = (na..total).collect();
            let observed = energy_statistic(&dist, &idx_a, &idx_b);
            let exceed: Vec<u32> = exec::map_indexed(permutations, |p| {
                let mut order: Vec<usize> = (0..total).collect();
                let mut stream = substream(seed, domain::PERMUTATION, p as u64, 0);
                // Fisher-Yates keyed per permutation index.
                for i in (1..total).rev() {
                    let j = (stream.next_u64() % (i as u64 + 1)) as usize;
                    order.swap(i, j);
                }
                let perm_stat = energy_statistic(&dist, &order[..na], &order[na..]);
                u32::from(perm_stat >= observed)
            });
            let count: u32 = exceed.iter().sum();
            Ok(TwoSampleResult {
                statistic: observed,
                p_value: (1.0 + count as f64) / (1.0 + permutations as f64),
            })
        }
        TwoSampleStat::PerMarginalKs => {
            let ea: Vec<[f64; EMBED_DIM]> = ens_a.iter().map(embed).collect();
            let eb: Vec<[f64; EMBED_DIM]> = ens_b.iter().map(embed).collect();
            let mut max_d = 0.0f64;
            let mut min_p = 1.0f64;
            for c in 0..EMBED_DIM {
                let xs: Vec<f64> = ea.iter().map(|v| v[c]).collect();
                let ys: Vec<f64> = eb.iter().map(|v| v[c]).collect();
                let d = ks_statistic(&xs, &ys);
                let p = ks_pvalue(d, xs.len(), ys.len());
                max_d = max_d.max(d);
                min_p = min_p.min(p);
            }
            Ok(TwoSampleResult {
                statistic: max_d,
                p_value: (min_p * EMBED_DIM as f64).min(1.0),
            })
        }
    }
}

/// One truncation level of a weak-convergence scan.
#[derive(Debug, Clone, Serialize)]
pub struct WeakConvergencePoint {
    pub n: usize,
    pub mean: f64,
    pub std_error: f64,
    /// Combined z-score against the reference estimate.
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakConvergenceReport {
    pub functional: String,
    pub arity: usize,
    pub points: Vec<WeakConvergencePoint>,
    pub reference_n: usize,
    pub reference_mean: f64,
    pub reference_std_error: f64,
    /// First grid level from which the estimates are bit-identical (the
    /// counter-based draws make truncations share their leading modes).
    pub stabilized_from: Option<usize>,
}

/// Estimate ∫F dμ_N along a truncation grid against a high-N reference
/// drawn with an independent seed.
#[allow(clippy::too_many_arguments)]
pub fn weak_convergence_test(
    amps: &AmplitudeSequence,
    law: RadialLaw,
    functional: &TestFunctional,
    n_grid: &[usize],
    n_ref: usize,
    m_samples: usize,
    seed: u64,
    ref_seed: u64,
) -> WeakConvergenceReport {
    assert!(!n_grid.is_empty());
    assert!(n_ref >= *n_grid.last().unwrap());
    let estimate = |n: usize, s: u64| {
        let vals: Vec<f64> = exec::map_indexed(m_samples, |i| {
            functional.evaluate(&sample_state(amps, law, n, s, i as u64))
        });
        mean_stats(&vals)
    };
    let reference = estimate(n_ref, ref_seed);
    let points: Vec<WeakConvergencePoint> = n_grid
        .iter()
        .map(|&n| {
            let st = estimate(n, seed);
            let combined =
                (st.std_error * st.std_error + reference.std_error * reference.std_error).sqrt();
            let z = if combined > 0.0 {
                (st.mean - reference.mean) / combined
            } else {
                0.0
            };
            WeakConvergencePoint {
                n,
                mean: st.mean,
                std_error: st.std_error,
                z,
            }
        })
        .collect();

    let stabilized_from = points
        .iter()
        .position(|p| {
            p.n >= functional.arity
                && points
                    .iter()
                    .filter(|q| q.n >= p.n)
                    .all(|q| q.mean.to_bits() == p.mean.to_bits())
        })
        .map(|i| points[i].n);

    WeakConvergenceReport {
        functional: functional.id.to_string(),
        arity: functional.arity,
        points,
        reference_n: n_ref,
        reference_mean: reference.mean,
        reference_std_error: reference.std_error,
        stabilized_from,
    }
}

/// Standard error of a paired difference vector (helper for external
/// calibration tests).
pub fn paired_std_error(diff: &[f64]) -> f64 {
    let m = pairwise_sum(diff) / diff.len() as f64;
    (pairwise_map_sum(diff, |x| {
        let d = x - m;
        d * d
    }) / ((diff.len() - 1) as f64 * diff.len() as f64))
        .sqrt()
}
