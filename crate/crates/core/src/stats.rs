//! Order-stable statistics helpers.
//!
//! Summation is pairwise so accumulation error grows like O(log n) and the
//! result depends only on the slice contents and order, never on worker
//! count. The test statistics here (Wilson interval, chi-square and
//! Kolmogorov-Smirnov p-values, log-sum-exp) back the Monte-Carlo harness.

use statrs::distribution::{ChiSquared, ContinuousCDF};

const PAIRWISE_LEAF: usize = 32;

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_LEAF {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Pairwise summation of `f(x)` over the slice, without allocating.
pub fn pairwise_map_sum<F: Fn(f64) -> f64 + Copy>(xs: &[f64], f: F) -> f64 {
    if xs.len() <= PAIRWISE_LEAF {
        let mut acc = 0.0;
        for &x in xs {
            acc += f(x);
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_map_sum(&xs[..mid], f) + pairwise_map_sum(&xs[mid..], f)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "mean of an empty slice");
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance, two-pass.
pub fn sample_variance(xs: &[f64]) -> f64 {
    assert!(xs.len() >= 2, "variance needs at least two values");
    let m = mean(xs);
    pairwise_map_sum(xs, |x| {
        let d = x - m;
        d * d
    }) / (xs.len() - 1) as f64
}

/// Mean together with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStats {
    pub mean: f64,
    pub std_error: f64,
    pub count: usize,
}

pub fn mean_stats(xs: &[f64]) -> MeanStats {
    let m = mean(xs);
    let se = if xs.len() >= 2 {
        (sample_variance(xs) / xs.len() as f64).sqrt()
    } else {
        0.0
    };
    MeanStats {
        mean: m,
        std_error: se,
        count: xs.len(),
    }
}

/// 97.5% standard-normal quantile, for two-sided 95% intervals.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Wilson 95% confidence interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    assert!(trials > 0, "wilson interval needs at least one trial");
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (Z_95 / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Upper-tail p-value of a chi-square statistic.
pub fn chi_square_pvalue(statistic: f64, dof: f64) -> f64 {
    let dist = ChiSquared::new(dof).expect("positive degrees of freedom");
    dist.sf(statistic).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_unstable_by(|p, q| p.total_cmp(q));
    ys.sort_unstable_by(|p, q| p.total_cmp(q));
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < xs.len() && j < ys.len() {
        let t = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= t {
            i += 1;
        }
        while j < ys.len() && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic two-sample KS p-value (Kolmogorov distribution tail).
pub fn ks_pvalue(d: f64, n: usize, m: usize) -> f64 {
    let ne = (n as f64 * m as f64) / (n + m) as f64;
    let sqrt_ne = ne.sqrt();
    let lambda = (sqrt_ne + 0.12 + 0.11 / sqrt_ne) * d;
    kolmogorov_sf(lambda)
}

/// Q_KS(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// log Σ e^{x_i}, stabilized by the maximum.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + pairwise_map_sum(xs, |x| (x - m).exp()).ln()
}
