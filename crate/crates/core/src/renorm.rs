//! The divergent-amplitude regime: renormalization constants, centered
//! action sums, limit phases, and the renormalized flow.
//!
//! When Σ|α_n|² = ∞ but Σ|α_n|⁴ < ∞ the raw frequencies β_{N,n} diverge
//! with N, yet the combination β_{N,n} + 2n c_N with c_N = Σ_{k≤N}|α_k|²
//! converges almost surely: algebraically
//!
//! ```text
//! β_{N,n}(π_N ζ) + 2n c_N = n² − 2 Σ_{k≤n}(k−n)|ζ_k|² − 2n S_N,
//! S_N = Σ_{k≤N}(|ζ_k|² − |α_k|²),
//! ```
//!
//! and S_N is a centered sum whose tail variance C·Σ_{k>N}|α_k|⁴ vanishes.
//! The renormalized flow multiplies the truncated flow by e^{i2tn c_N} per
//! mode; moduli are untouched, so it remains measure preserving.

use thiserror::Error;

use crate::exec;
use crate::flow::{cis, flow_truncated, FlowSpec};
use crate::measures::{classify_sigma, AmplitudeSequence, RadialLaw, SeriesVerdict};
use crate::rng::{domain, StreamKey};
use crate::state::{BirkhoffState, SobolevIndex};
use crate::stats::{mean_stats, pairwise_map_sum, pairwise_sum};

#[derive(Debug, Error)]
pub enum RenormError {
    #[error("Σ|α_n|² must diverge; the rule {0:?} gives a convergent series")]
    SquareSumConverges(AmplitudeSequence),
    #[error("Σ|α_n|⁴ must converge; the rule {0:?} gives a divergent series")]
    FourthSumDiverges(AmplitudeSequence),
    #[error("the law must have unit second moment, got {0}")]
    LawNotNormalized(f64),
}

/// Amplitudes and law admissible for the renormalized regime.
#[derive(Debug, Clone)]
pub struct RenormContext {
    amps: AmplitudeSequence,
    law: RadialLaw,
}

impl RenormContext {
    pub fn new(amps: AmplitudeSequence, law: RadialLaw) -> Result<Self, RenormError> {
        let zero = SobolevIndex::new(0.0);
        if classify_sigma(&amps, zero, 1).verdict != SeriesVerdict::Diverges {
            return Err(RenormError::SquareSumConverges(amps));
        }
        if classify_sigma(&amps.pow_rule(2.0), zero, 1).verdict != SeriesVerdict::Converges {
            return Err(RenormError::FourthSumDiverges(amps));
        }
        let m2 = law.second_moment();
        if (m2 - 1.0).abs() > 1e-12 {
            return Err(RenormError::LawNotNormalized(m2));
        }
        Ok(RenormContext { amps, law })
    }

    pub fn amps(&self) -> &AmplitudeSequence {
        &self.amps
    }

    pub fn law(&self) -> RadialLaw {
        self.law
    }

    /// C = Var|g|², the fluctuation scale of the centered sums.
    pub fn excess(&self) -> f64 {
        self.law.modulus_sq_variance()
    }

    fn alpha_sq(&self, k: usize) -> f64 {
        let a = self.amps.amplitude(k);
        a * a
    }

    fn alpha_fourth(&self, k: usize) -> f64 {
        let a = self.amps.amplitude(k);
        a * a * a * a
    }

    /// Σ_{k in (lo, hi]} |α_k|⁴.
    pub fn fourth_window(&self, lo: usize, hi: usize) -> f64 {
        (lo + 1..=hi).map(|k| self.alpha_fourth(k)).sum()
    }
}

/// c_N = Σ_{k≤N} |α_k|².
pub fn renorm_constant(ctx: &RenormContext, n: usize) -> f64 {
    assert!(n >= 1);
    (1..=n).map(|k| ctx.alpha_sq(k)).sum()
}

/// S_N = Σ_{k≤N} (|ζ_k|² − |α_k|²).
pub fn centered_sum(state: &BirkhoffState, ctx: &RenormContext, n: usize) -> f64 {
    assert!(n <= state.len(), "centered sum needs n ≤ state length");
    (1..=n)
        .map(|k| state.modulus_sq(k) - ctx.alpha_sq(k))
        .sum()
}

/// Renormalized frequency n² − 2 Σ_{k≤n}(k−n)|ζ_k|² − 2n S_N; equals
/// β_{N,n}(π_N ζ) + 2n c_N.
pub fn limit_phase(state: &BirkhoffState, ctx: &RenormContext, mode: usize, n: usize) -> f64 {
    assert!(mode >= 1 && mode <= n, "mode must satisfy 1 ≤ mode ≤ n");
    assert!(n <= state.len());
    let nf = mode as f64;
    let mut local = 0.0;
    for k in 1..=mode {
        local += (k as f64 - nf) * state.modulus_sq(k);
    }
    nf * nf - 2.0 * local - 2.0 * nf * centered_sum(state, ctx, n)
}

/// Renormalized flow: mode n gets the extra rotation e^{i2tn c_N} on top of
/// the truncated flow. Moduli are preserved.
pub fn renorm_flow(state: &BirkhoffState, ctx: &RenormContext, n: usize, t: f64) -> BirkhoffState {
    assert!(n <= state.len());
    let c = renorm_constant(ctx, n);
    let flowed = flow_truncated(state, FlowSpec { n, t });
    let coeffs = (1..=flowed.len())
        .map(|mode| flowed.coeff(mode) * cis(2.0 * t * mode as f64 * c))
        .collect();
    BirkhoffState::new(coeffs).expect("rotations keep coefficients finite")
}

/// One consecutive-pair entry of a Cauchy diagnostic along the N grid.
#[derive(Debug, Clone, Copy)]
pub struct PhasePair {
    pub n_lo: usize,
    pub n_hi: usize,
    /// Empirical mean of the squared phase increment across samples.
    pub mean_sq_increment: f64,
    pub std_error: f64,
    /// (2n)² · C · Σ_{k in (N, N']} |α_k|⁴.
    pub predicted: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct PhaseConvergenceReport {
    pub mode: usize,
    pub pairs: Vec<PhasePair>,
    /// Per-sample trajectories of the renormalized phase along the grid,
    /// kept only on request.
    pub trajectories: Option<Vec<Vec<f64>>>,
}

/// Track the renormalized phase of one mode along an increasing N grid over
/// independent draws and compare the empirical L² increments with the
/// closed-form prediction.
pub fn phase_convergence_diagnostic(
    ctx: &RenormContext,
    mode: usize,
    n_grid: &[usize],
    m_samples: usize,
    seed: u64,
    keep_trajectories: bool,
) -> PhaseConvergenceReport {
    assert!(!n_grid.is_empty());
    assert!(n_grid.windows(2).all(|w| w[0] < w[1]), "grid must increase");
    assert!(mode >= 1 && mode <= n_grid[0]);
    let max_n = *n_grid.last().unwrap();
    let trajectories: Vec<Vec<f64>> = exec::map_indexed(m_samples, |i| {
        let key = StreamKey::new(&[seed, domain::ENSEMBLE, i as u64]);
        let mut s = 0.0; // running centered sum
        let mut local = 0.0; // Σ_{k≤mode}(k−mode)|ζ_k|²
        let mut grid_iter = n_grid.iter().peekable();
        let mut out = Vec::with_capacity(n_grid.len());
        for k in 1..=max_n {
            let mut stream = key.stream(k as u64);
            let msq = (ctx.law.sample(&mut stream) * ctx.amps.amplitude(k)).norm_sqr();
            s += msq - ctx.alpha_sq(k);
            if k <= mode {
                local += (k as f64 - mode as f64) * msq;
            }
            while let Some(&&g) = grid_iter.peek() {
                if g == k {
                    let nf = mode as f64;
                    out.push(nf * nf - 2.0 * local - 2.0 * nf * s);
                    grid_iter.next();
                } else {
                    break;
                }
            }
        }
        out
    });

    let c = ctx.excess();
    let pairs = (0..n_grid.len() - 1)
        .map(|j| {
            let sq: Vec<f64> = trajectories
                .iter()
                .map(|traj| {
                    let d = traj[j + 1] - traj[j];
                    d * d
                })
                .collect();
            let stats = mean_stats(&sq);
            let factor = 2.0 * mode as f64;
            let predicted = factor * factor * c * ctx.fourth_window(n_grid[j], n_grid[j + 1]);
            PhasePair {
                n_lo: n_grid[j],
                n_hi: n_grid[j + 1],
                mean_sq_increment: stats.mean,
                std_error: stats.std_error,
                predicted,
                ratio: stats.mean / predicted,
            }
        })
        .collect();

    PhaseConvergenceReport {
        mode,
        pairs,
        trajectories: keep_trajectories.then_some(trajectories),
    }
}

/// Window variance entry for the centered sums themselves.
#[derive(Debug, Clone, Copy)]
pub struct VariancePair {
    pub n_lo: usize,
    pub n_hi: usize,
    pub empirical_var: f64,
    pub predicted_var: f64,
    pub ratio: f64,
}

/// Empirical Var(S_{N'} − S_N) across consecutive grid points against the
/// independence prediction C · Σ_{k in (N, N']} |α_k|⁴.
pub fn centered_sum_variance_profile(
    ctx: &RenormContext,
    n_grid: &[usize],
    m_samples: usize,
    seed: u64,
) -> Vec<VariancePair> {
    assert!(n_grid.len() >= 2);
    assert!(n_grid.windows(2).all(|w| w[0] < w[1]));
    let max_n = *n_grid.last().unwrap();
    let sums: Vec<Vec<f64>> = exec::map_indexed(m_samples, |i| {
        let key = StreamKey::new(&[seed, domain::ENSEMBLE, i as u64]);
        let mut s = 0.0;
        let mut grid_iter = n_grid.iter().peekable();
        let mut out = Vec::with_capacity(n_grid.len());
        for k in 1..=max_n {
            let mut stream = key.stream(k as u64);
            let msq = (ctx.law.sample(&mut stream) * ctx.amps.amplitude(k)).norm_sqr();
            s += msq - ctx.alpha_sq(k);
            while let Some(&&g) = grid_iter.peek() {
                if g == k {
                    out.push(s);
                    grid_iter.next();
                } else {
                    break;
                }
            }
        }
        out
    });
    let c = ctx.excess();
    (0..n_grid.len() - 1)
        .map(|j| {
            let increments: Vec<f64> = sums.iter().map(|s| s[j + 1] - s[j]).collect();
            let m = pairwise_sum(&increments) / increments.len() as f64;
            let var = pairwise_map_sum(&increments, |x| {
                let d = x - m;
                d * d
            }) / (increments.len() - 1) as f64;
            let predicted = c * ctx.fourth_window(n_grid[j], n_grid[j + 1]);
            VariancePair {
                n_lo: n_grid[j],
                n_hi: n_grid[j + 1],
                empirical_var: var,
                predicted_var: predicted,
                ratio: var / predicted,
            }
        })
        .collect()
}

/// Mean h^{-1} distance between renormalized-flow outputs at consecutive
/// truncations: the Cauchy-in-N diagnostic for the flow itself.
///
/// Uses the exact per-mode identity: phases at N and N' differ by
/// −2n(S_{N'} − S_N), so ‖out_{N'} − out_N‖²_{h^{-1}} =
/// Σ_{n≤N} n^{-2}|ζ_n|²·4sin²(nt·ΔS) + Σ_{N<n≤N'} n^{-2}|ζ_n|².
pub fn renorm_cauchy_profile(
    ctx: &RenormContext,
    n_grid: &[usize],
    t: f64,
    m_samples: usize,
    seed: u64,
) -> Vec<(usize, usize, f64)> {
    assert!(n_grid.len() >= 2);
    assert!(n_grid.windows(2).all(|w| w[0] < w[1]));
    let max_n = *n_grid.last().unwrap();
    let per_sample: Vec<Vec<f64>> = exec::map_indexed(m_samples, |i| {
        let key = StreamKey::new(&[seed, domain::ENSEMBLE, i as u64]);
        let mut msq = Vec::with_capacity(max_n);
        for k in 1..=max_n {
            let mut stream = key.stream(k as u64);
            msq.push((ctx.law.sample(&mut stream) * ctx.amps.amplitude(k)).norm_sqr());
        }
        let mut s_at = Vec::with_capacity(n_grid.len());
        let mut s = 0.0;
        let mut grid_iter = n_grid.iter().peekable();
        for (k, &m) in msq.iter().enumerate() {
            s += m - ctx.alpha_sq(k + 1);
            while let Some(&&g) = grid_iter.peek() {
                if g == k + 1 {
                    s_at.push(s);
                    grid_iter.next();
                } else {
                    break;
                }
            }
        }
        (0..n_grid.len() - 1)
            .map(|j| {
                let delta_s = s_at[j + 1] - s_at[j];
                let mut acc = 0.0;
                for n in 1..=n_grid[j] {
                    let phase = n as f64 * t * delta_s;
                    let sn = phase.sin();
                    acc += msq[n - 1] / (n * n) as f64 * 4.0 * sn * sn;
                }
                for n in n_grid[j] + 1..=n_grid[j + 1] {
                    acc += msq[n - 1] / (n * n) as f64;
                }
                acc.sqrt()
            })
            .collect()
    });
    (0..n_grid.len() - 1)
        .map(|j| {
            let vals: Vec<f64> = per_sample.iter().map(|v| v[j]).collect();
            (n_grid[j], n_grid[j + 1], mean_stats(&vals).mean)
        })
        .collect()
}
