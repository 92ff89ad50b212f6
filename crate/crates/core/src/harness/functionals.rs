//! The bounded test-functional panel.
//!
//! Moduli are conserved exactly by every flow here, so a panel of
//! modulus-only functionals cannot falsify anything; F₂, F₃ and F₅ read
//! phases and carry the statistical power.

use crate::state::BirkhoffState;

/// A bounded continuous functional reading finitely many leading modes.
#[derive(Debug, Clone, Copy)]
pub struct TestFunctional {
    pub id: &'static str,
    /// Number of leading modes the functional reads.
    pub arity: usize,
    /// Declared bound: |F(ζ)| ≤ bound for all ζ.
    pub bound: f64,
    eval: fn(&BirkhoffState) -> f64,
}

impl TestFunctional {
    pub fn evaluate(&self, state: &BirkhoffState) -> f64 {
        (self.eval)(state)
    }
}

fn f1(state: &BirkhoffState) -> f64 {
    // exp(−‖π₄ζ‖²_{h⁰})
    let mut acc = 0.0;
    for n in 1..=4 {
        acc += state.modulus_sq(n);
    }
    (-acc).exp()
}

fn f2(state: &BirkhoffState) -> f64 {
    let z = state.coeff(1);
    z.re * (-z.norm_sqr()).exp()
}

fn f3(state: &BirkhoffState) -> f64 {
    // cos(arg ζ₂ − 2 arg ζ₁), regularized near vanishing moduli.
    let z1 = state.coeff(1);
    let z2 = state.coeff(2);
    let numer = (z2 * z1.conj() * z1.conj()).re;
    let denom = (z2.norm() * z1.norm_sqr()).max(1e-12);
    (numer / denom).clamp(-1.0, 1.0)
}

fn f4(state: &BirkhoffState) -> f64 {
    state.modulus_sq(3).min(1.0)
}

fn f5(state: &BirkhoffState) -> f64 {
    (state.coeff(1).re + state.coeff(2).im).sin()
}

/// The built-in panel F₁…F₅.
pub fn builtin_functionals() -> Vec<TestFunctional> {
    vec![
        TestFunctional {
            id: "F1",
            arity: 4,
            bound: 1.0,
            eval: f1,
        },
        TestFunctional {
            id: "F2",
            arity: 1,
            bound: 0.5,
            eval: f2,
        },
        TestFunctional {
            id: "F3",
            arity: 2,
            bound: 1.0,
            eval: f3,
        },
        TestFunctional {
            id: "F4",
            arity: 3,
            bound: 1.0,
            eval: f4,
        },
        TestFunctional {
            id: "F5",
            arity: 2,
            bound: 1.0,
            eval: f5,
        },
    ]
}

/// Closed-form ∫ F₁ dμ_N for the Gaussian law: Π_{n≤min(4,N)} 1/(1+|ζ*_n|²).
///
/// Test oracle for the weak-convergence harness (|ζ*_n g|² is exponential
/// with mean |ζ*_n|², and E e^{−λ|g|²} = 1/(1+λ)).
pub fn f1_gaussian_expectation(amps: &crate::measures::AmplitudeSequence, n: usize) -> f64 {
    (1..=n.min(4))
        .map(|k| {
            let a = amps.amplitude(k);
            1.0 / (1.0 + a * a)
        })
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec;
    use crate::rng::{domain, substream};
    use num_complex::Complex64;

    fn random_probe(i: u64) -> BirkhoffState {
        let mut s = substream(97, domain::PROBE, i, 0);
        let len = 1 + (s.next_u64() % 6) as usize;
        BirkhoffState::new(
            (0..len)
                .map(|_| {
                    let scale = 4.0 * s.next_f64();
                    Complex64::new(
                        scale * (s.next_f64() - 0.5),
                        scale * (s.next_f64() - 0.5),
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn values_at_zero() {
        let z = BirkhoffState::zeros(4);
        let fs = builtin_functionals();
        assert_eq!(fs[0].evaluate(&z), 1.0); // F1
        assert_eq!(fs[1].evaluate(&z), 0.0); // F2
        assert_eq!(fs[3].evaluate(&z), 0.0); // F4
        assert_eq!(fs[4].evaluate(&z), 0.0); // F5
    }

    #[test]
    fn bounds_hold_on_a_million_probes() {
        let fs = builtin_functionals();
        let violations: usize = exec::map_indexed(1_000_000, |i| {
            let st = random_probe(i as u64);
            fs.iter()
                .filter(|f| f.evaluate(&st).abs() > f.bound)
                .count()
        })
        .into_iter()
        .sum();
        assert_eq!(violations, 0);
    }

    #[test]
    fn continuity_spot_checks() {
        let fs = builtin_functionals();
        for i in 0..200u64 {
            let st = random_probe(i);
            let mut coeffs = st.coeffs().to_vec();
            coeffs[0] += Complex64::new(1e-9, -1e-9);
            let perturbed = BirkhoffState::new(coeffs).unwrap();
            for f in &fs {
                let d = (f.evaluate(&perturbed) - f.evaluate(&st)).abs();
                assert!(d < 1e-6, "{} jumped by {d}", f.id);
            }
        }
    }

    #[test]
    fn f3_is_a_pure_phase_cosine() {
        let st = BirkhoffState::new(vec![
            Complex64::from_polar(0.7, 0.4),
            Complex64::from_polar(1.3, 1.9),
        ])
        .unwrap();
        let expected = (1.9 - 2.0 * 0.4f64).cos();
        let got = builtin_functionals()[2].evaluate(&st);
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn arities_match_the_modes_read() {
        // Changing a mode beyond the declared arity must not change the value.
        let fs = builtin_functionals();
        let st = random_probe(12345);
        for f in &fs {
            let mut coeffs = st.coeffs().to_vec();
            while coeffs.len() <= f.arity {
                coeffs.push(Complex64::new(0.0, 0.0));
            }
            coeffs[f.arity] += Complex64::new(0.9, -0.4);
            let bumped = BirkhoffState::new(coeffs).unwrap();
            assert_eq!(f.evaluate(&bumped), f.evaluate(&st), "{}", f.id);
        }
    }

    #[test]
    fn f1_oracle_matches_monte_carlo() {
        let amps = crate::measures::AmplitudeSequence::power(1.0).unwrap();
        let law = crate::measures::RadialLaw::gaussian();
        let f1 = builtin_functionals()[0];
        let m = 100_000;
        let vals: Vec<f64> = exec::map_indexed(m, |i| {
            f1.evaluate(&crate::measures::sample_state(&amps, law, 4, 51, i as u64))
        });
        let stats = crate::stats::mean_stats(&vals);
        let oracle = f1_gaussian_expectation(&amps, 4);
        assert!(
            (stats.mean - oracle).abs() <= 4.0 * stats.std_error,
            "mc {} oracle {oracle}",
            stats.mean
        );
    }

    #[test]
    fn norms_used_by_f1_match_projection() {
        let st = random_probe(777);
        let f1 = builtin_functionals()[0];
        let s0 = crate::state::SobolevIndex::new(0.0);
        let direct = (-st.project(4).h_norm(s0).powi(2)).exp();
        assert!((f1.evaluate(&st) - direct).abs() < 1e-15);
    }
}
