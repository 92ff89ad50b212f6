//! Radial laws, amplitude sequences, ensemble sampling, tail-mass products.
//!
//! A measure on sequence space is induced by ζ_n = ζ*_n g_n with g_n i.i.d.
//! from a rotation-invariant law on ℂ and (ζ*_n) a deterministic amplitude
//! sequence. Rotation invariance of the per-mode law is what makes these
//! measures invariant under the phase flows, so the supported laws are
//! radial by construction and sampled exactly: uniform angle plus an exact
//! radius transform (no MCMC, no rejection).
//!
//! The tail-mass product Π_n ∫ e^{−|ζ*_n|²(x²+y²)n^{2σ}} f dxdy decides
//! whether the measure charges h^σ: the product tends to zero exactly when
//! Σ|ζ*_n|² n^{2σ} diverges. For the Gaussian law each factor has the
//! closed form 1/(1+λ); every law also gets an adaptive radial quadrature
//! route so the closed form is independently checkable.

use num_complex::Complex64;
use thiserror::Error;

use crate::exec;
use crate::rng::{domain, Stream, StreamKey};
use crate::state::{BirkhoffState, SobolevIndex};
use crate::stats::wilson_interval;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("radial quadrature did not converge to tolerance (lambda = {lambda})")]
    QuadratureFailure { lambda: f64 },
}

/// Scale that renormalizes the radial-exponential law to unit second moment.
const RADIAL_EXP_UNIT_SCALE: f64 = 0.408_248_290_463_863_1; // 1/sqrt(6)

/// Rotation-invariant probability law on ℂ with full support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialLaw {
    /// Density (1/π) e^{−(x²+y²)}; E|g|² = 1, E|g|⁴ = 2.
    Gaussian,
    /// Density e^{−r/c}/(2πc²) with r = |z|; radius is Gamma(2, 1/c).
    RadialExponential { scale: f64 },
}

impl RadialLaw {
    pub fn gaussian() -> Self {
        RadialLaw::Gaussian
    }

    /// Raw radial-exponential law (c = 1): E|g|² = 6.
    pub fn radial_exponential() -> Self {
        RadialLaw::RadialExponential { scale: 1.0 }
    }

    /// Radial-exponential rescaled to E|g|² = 1 (needed where the law must
    /// be normalized).
    pub fn radial_exponential_normalized() -> Self {
        RadialLaw::RadialExponential {
            scale: RADIAL_EXP_UNIT_SCALE,
        }
    }

    /// E|g|² = ∫(x²+y²) f dxdy.
    pub fn second_moment(&self) -> f64 {
        match self {
            RadialLaw::Gaussian => 1.0,
            RadialLaw::RadialExponential { scale } => 6.0 * scale * scale,
        }
    }

    /// ∫(x⁴+y⁴) f dxdy = (3/4) E|g|⁴ for any radial law.
    pub fn fourth_moment(&self) -> f64 {
        0.75 * self.modulus_fourth_moment()
    }

    /// E|g|⁴ = ∫(x²+y²)² f dxdy.
    pub fn modulus_fourth_moment(&self) -> f64 {
        match self {
            RadialLaw::Gaussian => 2.0,
            RadialLaw::RadialExponential { scale } => 120.0 * scale.powi(4),
        }
    }

    /// Var |g|² = E|g|⁴ − (E|g|²)², the constant scaling centered-action
    /// fluctuations.
    pub fn modulus_sq_variance(&self) -> f64 {
        let m2 = self.second_moment();
        self.modulus_fourth_moment() - m2 * m2
    }

    /// Density of the radius |g| at r ≥ 0.
    pub fn radius_density(&self, r: f64) -> f64 {
        if r < 0.0 {
            return 0.0;
        }
        match self {
            RadialLaw::Gaussian => 2.0 * r * (-r * r).exp(),
            RadialLaw::RadialExponential { scale } => {
                let inv = 1.0 / scale;
                r * inv * inv * (-r * inv).exp()
            }
        }
    }

    /// One radius draw: inverse CDF for the Gaussian, sum of two
    /// exponentials (Gamma(2)) for the radial-exponential family.
    #[inline]
    pub fn sample_radius(&self, stream: &mut Stream) -> f64 {
        match self {
            RadialLaw::Gaussian => (-stream.next_f64().ln()).sqrt(),
            RadialLaw::RadialExponential { scale } => {
                scale * (-stream.next_f64().ln() - stream.next_f64().ln())
            }
        }
    }

    /// One draw of g: uniform angle, exact radius.
    #[inline]
    pub fn sample(&self, stream: &mut Stream) -> Complex64 {
        let theta = stream.next_angle();
        let r = self.sample_radius(stream);
        Complex64::from_polar(r, theta)
    }

    pub fn name(&self) -> &'static str {
        match self {
            RadialLaw::Gaussian => "gaussian",
            RadialLaw::RadialExponential { scale } => {
                if *scale == 1.0 {
                    "radial-exponential"
                } else {
                    "radial-exponential-normalized"
                }
            }
        }
    }
}

/// Deterministic amplitude rule n ↦ ζ*_n. All amplitudes are nonzero and
/// finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AmplitudeSequence {
    /// ζ*_n = n^{−p}.
    Power { p: f64 },
    /// ζ*_n = n^{−p} / ln(n+1)^q.
    PowerLog { p: f64, q: f64 },
}

impl AmplitudeSequence {
    pub fn power(p: f64) -> Result<Self, MeasureError> {
        if !p.is_finite() {
            return Err(MeasureError::InvalidParameter(format!(
                "power exponent must be finite, got {p}"
            )));
        }
        Ok(AmplitudeSequence::Power { p })
    }

    pub fn power_log(p: f64, q: f64) -> Result<Self, MeasureError> {
        if !p.is_finite() || !q.is_finite() {
            return Err(MeasureError::InvalidParameter(format!(
                "power-log exponents must be finite, got p={p}, q={q}"
            )));
        }
        Ok(AmplitudeSequence::PowerLog { p, q })
    }

    #[inline]
    pub fn amplitude(&self, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            AmplitudeSequence::Power { p } => nf.powf(-p),
            AmplitudeSequence::PowerLog { p, q } => nf.powf(-p) / (nf + 1.0).ln().powf(*q),
        }
    }

    fn exponents(&self) -> (f64, f64) {
        match self {
            AmplitudeSequence::Power { p } => (*p, 0.0),
            AmplitudeSequence::PowerLog { p, q } => (*p, *q),
        }
    }

    /// The rule for |ζ*_n|^{2m} as an amplitude sequence (exponents scaled).
    pub fn pow_rule(&self, m: f64) -> AmplitudeSequence {
        let (p, q) = self.exponents();
        if q == 0.0 {
            AmplitudeSequence::Power { p: p * m }
        } else {
            AmplitudeSequence::PowerLog { p: p * m, q: q * m }
        }
    }
}

/// One draw from the truncated measure: (ζ*_1 g_1, …, ζ*_N g_N).
///
/// Mode n of sample i is a pure function of (seed, i, n), independent of N,
/// so truncations share their leading modes sample for sample.
pub fn sample_state(
    amps: &AmplitudeSequence,
    law: RadialLaw,
    n: usize,
    seed: u64,
    sample: u64,
) -> BirkhoffState {
    assert!(n >= 1);
    let key = StreamKey::new(&[seed, domain::ENSEMBLE, sample]);
    let coeffs = (1..=n)
        .map(|mode| {
            let mut stream = key.stream(mode as u64);
            law.sample(&mut stream) * amps.amplitude(mode)
        })
        .collect();
    BirkhoffState::new(coeffs).expect("amplitudes and draws are finite")
}

/// Per-mode factor ∫ e^{−λ(x²+y²)} f dxdy in closed form where available.
fn factor_closed_form(law: RadialLaw, lambda: f64) -> Option<f64> {
    match law {
        RadialLaw::Gaussian => Some(1.0 / (1.0 + lambda)),
        RadialLaw::RadialExponential { .. } => None,
    }
}

/// The same factor by adaptive Simpson quadrature on the radius, relative
/// tolerance ~1e-10. Public so the closed form can be cross-checked.
pub fn tail_mass_factor_quadrature(law: RadialLaw, lambda: f64) -> Result<f64, MeasureError> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(MeasureError::InvalidParameter(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    let rmax = match law {
        RadialLaw::Gaussian => 9.0,
        RadialLaw::RadialExponential { scale } => 50.0 * scale,
    };
    // Beyond the effective support of e^{−λr²} the integrand is below 1e-300.
    let upper = if lambda > 1.0 {
        rmax.min(30.0 / lambda.sqrt() + 1.0)
    } else {
        rmax
    };
    let integrand = |r: f64| (-lambda * r * r).exp() * law.radius_density(r);
    let coarse = simpson_panels(&integrand, 0.0, upper, 64);
    let tol = 1e-13 + 1e-11 * coarse.abs();
    // Adaptive refinement starts from a 64-panel grid: a single top-level
    // interval can miss a peak that sits between its three probe points.
    const PANELS: usize = 64;
    let mut total = 0.0;
    let h = upper / PANELS as f64;
    for i in 0..PANELS {
        let a = i as f64 * h;
        let piece = adaptive_simpson(&integrand, a, a + h, tol / PANELS as f64, 50)
            .ok_or(MeasureError::QuadratureFailure { lambda })?;
        total += piece;
    }
    Ok(total)
}

fn simpson_panels<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for i in 1..panels {
        let x = a + i as f64 * h;
        acc += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    acc * h / 3.0
}

fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    depth: usize,
) -> Option<f64> {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> Option<f64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Some(left + right + delta / 15.0);
        }
        if depth == 0 {
            return None;
        }
        let l = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
        let r = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
        Some(l + r)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, depth)
}

fn lambda_at(amps: &AmplitudeSequence, sigma: SobolevIndex, mode: usize) -> f64 {
    let a = amps.amplitude(mode);
    a * a * sigma.weight(mode)
}

/// Π_{n≤N} ∫ e^{−|ζ*_n|²(x²+y²)n^{2σ}} f dxdy. N = 0 gives the empty
/// product 1. Each factor is ≤ 1, so the product is nonincreasing in N.
pub fn tail_mass_product(
    amps: &AmplitudeSequence,
    sigma: SobolevIndex,
    n: usize,
    law: RadialLaw,
) -> Result<f64, MeasureError> {
    let mut product = 1.0;
    for mode in 1..=n {
        let lambda = lambda_at(amps, sigma, mode);
        let factor = match factor_closed_form(law, lambda) {
            Some(f) => f,
            None => tail_mass_factor_quadrature(law, lambda)?,
        };
        product *= factor;
    }
    Ok(product)
}

/// Log of the tail-mass product. For the Gaussian law this is the exact
/// negation of Σ_{mode ≤ N} ln1p(λ_mode) accumulated in mode order, so
/// `log_product + Σ ln1p(λ_n) = 0` holds bit-exactly.
pub fn tail_mass_log_product(
    amps: &AmplitudeSequence,
    sigma: SobolevIndex,
    n: usize,
    law: RadialLaw,
) -> Result<f64, MeasureError> {
    match law {
        RadialLaw::Gaussian => {
            let mut sum = 0.0;
            for mode in 1..=n {
                sum += lambda_at(amps, sigma, mode).ln_1p();
            }
            Ok(-sum)
        }
        _ => {
            let mut log = 0.0;
            for mode in 1..=n {
                let lambda = lambda_at(amps, sigma, mode);
                log += tail_mass_factor_quadrature(law, lambda)?.ln();
            }
            Ok(log)
        }
    }
}

/// Verdict on Σ |ζ*_n|² n^{2σ}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesVerdict {
    Diverges,
    Converges,
    /// The analytic rule does not cover the family.
    Undecided,
}

#[derive(Debug, Clone)]
pub struct SigmaClassification {
    pub verdict: SeriesVerdict,
    /// Partial sums on a dyadic grid of N, ending at N_max.
    pub partial_sums: Vec<(usize, f64)>,
}

/// Classify Σ |ζ*_n|² n^{2σ} analytically from the rule's exponents and
/// report partial sums on a dyadic grid.
///
/// The term is n^{2σ−2p} / ln^{2q}(n+1): the series diverges when the power
/// exponent exceeds −1, converges when it is below −1, and on the boundary
/// the log correction decides (convergent exactly when 2q > 1).
pub fn classify_sigma(
    amps: &AmplitudeSequence,
    sigma: SobolevIndex,
    n_max: usize,
) -> SigmaClassification {
    assert!(n_max >= 1);
    let (p, q) = amps.exponents();
    let exponent = 2.0 * sigma.value() - 2.0 * p;
    let verdict = if exponent < -1.0 || (exponent == -1.0 && 2.0 * q > 1.0) {
        SeriesVerdict::Converges
    } else {
        SeriesVerdict::Diverges
    };

    let mut partial_sums = Vec::new();
    let mut sum = 0.0;
    let mut next_record = 1usize;
    for mode in 1..=n_max {
        sum += lambda_at(amps, sigma, mode);
        if mode == next_record || mode == n_max {
            partial_sums.push((mode, sum));
            while next_record <= mode {
                next_record *= 2;
            }
        }
    }
    SigmaClassification {
        verdict,
        partial_sums,
    }
}

/// Monte-Carlo estimate of P(‖ζ − center‖_{h^s} < ε) under the truncated
/// measure, with a Wilson 95% interval.
#[derive(Debug, Clone, Copy)]
pub struct BallProbability {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub hits: u64,
    pub samples: u64,
    /// The center's tail beyond the truncation already exceeds ε, so the
    /// estimate is structurally 0: increase N.
    pub truncation_obstructed: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn ball_probability(
    amps: &AmplitudeSequence,
    law: RadialLaw,
    center: &BirkhoffState,
    eps: f64,
    s: SobolevIndex,
    n: usize,
    m_samples: usize,
    seed: u64,
) -> BallProbability {
    assert!(eps > 0.0);
    assert!(m_samples >= 1);
    let obstructed = center.tail_norm(n, s) >= eps;
    let hits_per_sample = exec::map_indexed(m_samples, |i| {
        let st = sample_state(amps, law, n, seed, i as u64);
        u64::from(st.h_distance(center, s) < eps)
    });
    let hits: u64 = hits_per_sample.iter().sum();
    let (lower, upper) = wilson_interval(hits, m_samples as u64);
    BallProbability {
        estimate: hits as f64 / m_samples as f64,
        lower,
        upper,
        hits,
        samples: m_samples as u64,
        truncation_obstructed: obstructed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use crate::stats::{chi_square_pvalue, ks_pvalue, ks_statistic, mean_stats};

    #[test]
    fn gaussian_moment_calibration() {
        let law = RadialLaw::gaussian();
        let m = 200_000;
        let vals: Vec<(f64, f64, f64, f64)> = exec::map_indexed(m, |i| {
            let mut s = substream(7, domain::PROBE, i as u64, 0);
            let g = law.sample(&mut s);
            let r2 = g.norm_sqr();
            (r2, r2 * r2, g.re, g.im)
        });
        let second: Vec<f64> = vals.iter().map(|v| v.0).collect();
        let fourth: Vec<f64> = vals.iter().map(|v| v.1).collect();
        let re: Vec<f64> = vals.iter().map(|v| v.2).collect();
        let im: Vec<f64> = vals.iter().map(|v| v.3).collect();
        assert!((mean_stats(&second).mean - 1.0).abs() < 0.01);
        assert!((mean_stats(&fourth).mean - 2.0).abs() < 0.05);
        assert!(mean_stats(&re).mean.abs() < 0.01);
        assert!(mean_stats(&im).mean.abs() < 0.01);
    }

    #[test]
    fn normalized_radial_exponential_has_unit_second_moment() {
        let law = RadialLaw::radial_exponential_normalized();
        assert!((law.second_moment() - 1.0).abs() < 1e-12);
        // E|g|^4 = 120/36 = 10/3 after rescaling.
        assert!((law.modulus_fourth_moment() - 10.0 / 3.0).abs() < 1e-12);
        let m = 200_000;
        let vals: Vec<f64> = exec::map_indexed(m, |i| {
            let mut s = substream(8, domain::PROBE, i as u64, 0);
            law.sample(&mut s).norm_sqr()
        });
        let st = mean_stats(&vals);
        assert!((st.mean - 1.0).abs() < 5.0 * st.std_error + 0.01);
    }

    #[test]
    fn raw_radial_exponential_moments() {
        let law = RadialLaw::radial_exponential();
        assert_eq!(law.second_moment(), 6.0);
        assert_eq!(law.modulus_fourth_moment(), 120.0);
        assert_eq!(law.fourth_moment(), 90.0);
        assert!((RadialLaw::gaussian().fourth_moment() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn sampler_angles_are_uniform() {
        let law = RadialLaw::gaussian();
        let bins = 64usize;
        let m = 100_000usize;
        let mut counts = vec![0u64; bins];
        for i in 0..m {
            let mut s = substream(9, domain::PROBE, i as u64, 0);
            let g = law.sample(&mut s);
            let mut a = g.arg();
            if a < 0.0 {
                a += std::f64::consts::TAU;
            }
            let b = ((a / std::f64::consts::TAU) * bins as f64) as usize;
            counts[b.min(bins - 1)] += 1;
        }
        let expected = m as f64 / bins as f64;
        let stat: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        let p = chi_square_pvalue(stat, (bins - 1) as f64);
        assert!(p > 0.001, "chi-square p = {p}");
    }

    #[test]
    fn sample_state_norm_expectation_matches_closed_form() {
        let amps = AmplitudeSequence::power(1.0).unwrap();
        let law = RadialLaw::gaussian();
        let n = 16;
        let s = SobolevIndex::new(0.5);
        let m = 50_000;
        let vals: Vec<f64> = exec::map_indexed(m, |i| {
            sample_state(&amps, law, n, 11, i as u64)
                .h_norm(s)
                .powi(2)
        });
        let stat = mean_stats(&vals);
        let expected: f64 = (1..=n)
            .map(|k| s.weight(k) * amps.amplitude(k).powi(2) * law.second_moment())
            .sum();
        assert!(
            (stat.mean - expected).abs() < 3.0 * stat.std_error,
            "mean {} expected {expected} se {}",
            stat.mean,
            stat.std_error
        );
    }

    #[test]
    fn sample_state_marginal_matches_radial_law() {
        // ζ_2 / ζ*_2 should be distributed like a direct draw from the law.
        let amps = AmplitudeSequence::power_log(1.0, 1.0).unwrap();
        let law = RadialLaw::gaussian();
        let m = 100_000;
        let scaled: Vec<f64> = (0..m)
            .map(|i| sample_state(&amps, law, 2, 13, i as u64).coeff(2).norm() / amps.amplitude(2))
            .collect();
        let direct: Vec<f64> = (0..m)
            .map(|i| {
                let mut s = substream(14, domain::PROBE, i as u64, 0);
                law.sample(&mut s).norm()
            })
            .collect();
        let d = ks_statistic(&scaled, &direct);
        let p = ks_pvalue(d, m, m);
        assert!(p > 0.01, "ks d={d} p={p}");
    }

    #[test]
    fn amplitude_rules_reject_non_finite_parameters() {
        assert!(AmplitudeSequence::power(f64::NAN).is_err());
        assert!(AmplitudeSequence::power_log(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn amplitudes_are_nonzero() {
        let rules = [
            AmplitudeSequence::power(0.5).unwrap(),
            AmplitudeSequence::power_log(1.0, 1.0).unwrap(),
        ];
        for rule in rules {
            for n in [1usize, 2, 10, 1000] {
                let a = rule.amplitude(n);
                assert!(a.is_finite() && a != 0.0);
            }
        }
    }

    #[test]
    fn gaussian_product_with_unit_factors() {
        // ζ*_n = 1/n at σ = 1 gives λ_n = 1 and factors 1/2, so the product
        // tracks 2^{-N} to a few ulps per factor.
        let amps = AmplitudeSequence::power(1.0).unwrap();
        let sigma = SobolevIndex::new(1.0);
        for n in [1usize, 4, 20] {
            let p = tail_mass_product(&amps, sigma, n, RadialLaw::gaussian()).unwrap();
            let expected = 0.5f64.powi(n as i32);
            assert!(
                (p - expected).abs() <= 1e-12 * expected,
                "n = {n}: {p} vs {expected}"
            );
        }
        assert_eq!(
            tail_mass_product(&amps, sigma, 0, RadialLaw::gaussian()).unwrap(),
            1.0
        );
    }

    #[test]
    fn product_is_nonincreasing_in_n() {
        let amps = AmplitudeSequence::power_log(1.0, 1.0).unwrap();
        for law in [
            RadialLaw::gaussian(),
            RadialLaw::radial_exponential_normalized(),
        ] {
            let mut prev = 1.0;
            for n in [1usize, 2, 4, 8, 16, 32] {
                let p = tail_mass_product(&amps, SobolevIndex::new(0.6), n, law).unwrap();
                assert!(p <= prev + 1e-15, "law {law:?} n {n}");
                prev = p;
            }
        }
    }

    #[test]
    fn quadrature_matches_gaussian_closed_form() {
        for lambda in [0.0, 1e-6, 0.03, 0.5, 1.0, 7.0, 150.0] {
            let exact = 1.0 / (1.0 + lambda);
            let quad = tail_mass_factor_quadrature(RadialLaw::gaussian(), lambda).unwrap();
            assert!(
                (quad - exact).abs() <= 1e-9 * exact,
                "lambda {lambda}: {quad} vs {exact}"
            );
        }
    }

    #[test]
    fn log_product_identity_is_exact_for_gaussian() {
        // Same summation order as the implementation, so the cancellation
        // is bit-exact.
        let amps = AmplitudeSequence::power_log(1.0, 1.0).unwrap();
        let sigma = SobolevIndex::new(0.8);
        let n = 200;
        let log = tail_mass_log_product(&amps, sigma, n, RadialLaw::gaussian()).unwrap();
        let mut sum = 0.0;
        for mode in 1..=n {
            let a = amps.amplitude(mode);
            sum += (a * a * sigma.weight(mode)).ln_1p();
        }
        assert_eq!(log + sum, 0.0);
    }

    #[test]
    fn convergent_sigma_keeps_the_product_above_a_floor() {
        // σ = 0.4, ζ*_n = n^{-1}/ln(n+1): Σ λ_n converges, and since
        // ln(1+x) ≤ x the log-product is bounded below by −Σ λ_n. Terms are
        // below n^{-1.2}, so the tail past K is below K^{-0.2}/0.2.
        let amps = AmplitudeSequence::power_log(1.0, 1.0).unwrap();
        let sigma = SobolevIndex::new(0.4);
        let k = 4096usize;
        let mut partial = 0.0;
        for mode in 1..=k {
            partial += lambda_at(&amps, sigma, mode);
        }
        let floor = (-(partial + (k as f64).powf(-0.2) / 0.2)).exp();
        assert!(floor > 0.0);
        for n in [16usize, 256, 4096, 65536] {
            let p = tail_mass_product(&amps, sigma, n, RadialLaw::gaussian()).unwrap();
            assert!(p >= floor, "n {n}: product {p} below floor {floor}");
        }
    }

    #[test]
    fn classification_examples() {
        let amps = AmplitudeSequence::power_log(1.0, 1.0).unwrap();
        // Boundary exponent with 2q = 2 > 1: converges.
        assert_eq!(
            classify_sigma(&amps, SobolevIndex::new(0.5), 64).verdict,
            SeriesVerdict::Converges
        );
        // Above the boundary: diverges, and dyadic partial sums keep growing.
        let diverging = classify_sigma(&amps, SobolevIndex::new(0.7), 1 << 14);
        assert_eq!(diverging.verdict, SeriesVerdict::Diverges);
        let sums = &diverging.partial_sums;
        assert!(sums.windows(2).all(|w| w[1].1 > w[0].1));
        // Plain power below the boundary: converges.
        let power = AmplitudeSequence::power(1.0).unwrap();
        assert_eq!(
            classify_sigma(&power, SobolevIndex::new(0.2), 64).verdict,
            SeriesVerdict::Converges
        );
    }

    #[test]
    fn boundary_without_log_correction_diverges() {
        let power = AmplitudeSequence::power(1.0).unwrap();
        assert_eq!(
            classify_sigma(&power, SobolevIndex::new(0.5), 64).verdict,
            SeriesVerdict::Diverges
        );
    }

    #[test]
    fn ball_probability_whole_space() {
        let amps = AmplitudeSequence::power(1.0).unwrap();
        let center = BirkhoffState::zeros(1);
        let r = ball_probability(
            &amps,
            RadialLaw::gaussian(),
            &center,
            1e6,
            SobolevIndex::new(0.0),
            4,
            2_000,
            17,
        );
        assert_eq!(r.estimate, 1.0);
        assert!(!r.truncation_obstructed);
    }

    #[test]
    fn ball_probability_matches_radial_cdf() {
        // P(|g| < 1) = 1 − e^{−1} for the Gaussian law.
        let amps = AmplitudeSequence::power(0.0).unwrap();
        let center = BirkhoffState::zeros(1);
        let r = ball_probability(
            &amps,
            RadialLaw::gaussian(),
            &center,
            1.0,
            SobolevIndex::new(0.0),
            1,
            100_000,
            18,
        );
        let exact = 1.0 - (-1.0f64).exp();
        assert!(
            r.lower < exact && exact < r.upper,
            "[{}, {}] vs {exact}",
            r.lower,
            r.upper
        );
        assert!(r.lower > 0.0);
    }

    #[test]
    fn ball_probability_positive_around_reachable_centers() {
        // Any finitely supported center gets positive mass once eps clears
        // its tail beyond the truncation.
        let amps = AmplitudeSequence::power(1.0).unwrap();
        let center = BirkhoffState::new(vec![
            Complex64::new(0.5, 0.0),
            Complex64::new(0.0, -0.25),
        ])
        .unwrap();
        let r = ball_probability(
            &amps,
            RadialLaw::gaussian(),
            &center,
            1.0,
            SobolevIndex::new(0.0),
            4,
            50_000,
            20,
        );
        assert!(!r.truncation_obstructed);
        assert!(r.lower > 0.0, "interval [{}, {}]", r.lower, r.upper);
    }

    #[test]
    fn ball_probability_flags_truncation_obstruction() {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 8];
        coeffs[7] = Complex64::new(10.0, 0.0);
        let center = BirkhoffState::new(coeffs).unwrap();
        let amps = AmplitudeSequence::power(1.0).unwrap();
        let r = ball_probability(
            &amps,
            RadialLaw::gaussian(),
            &center,
            0.5,
            SobolevIndex::new(0.0),
            4,
            2_000,
            19,
        );
        assert!(r.truncation_obstructed);
        assert_eq!(r.estimate, 0.0);
    }

    #[test]
    fn radius_densities_integrate_to_one() {
        for law in [
            RadialLaw::gaussian(),
            RadialLaw::radial_exponential(),
            RadialLaw::radial_exponential_normalized(),
        ] {
            let total = tail_mass_factor_quadrature(law, 0.0).unwrap();
            assert!((total - 1.0).abs() < 1e-9, "{law:?}: {total}");
        }
    }

    #[test]
    fn radial_exponential_radius_distribution() {
        // Radius draws should match the Gamma(2) density: check the mean and
        // a KS test against inverse-transform-free direct simulation.
        let law = RadialLaw::radial_exponential();
        let m = 100_000;
        let vals: Vec<f64> = (0..m)
            .map(|i| {
                let mut s = Stream::from_key(&[23, i as u64]);
                law.sample_radius(&mut s)
            })
            .collect();
        let stat = mean_stats(&vals);
        assert!((stat.mean - 2.0).abs() < 5.0 * stat.std_error + 0.01);
    }
}
