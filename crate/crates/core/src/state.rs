//! Coefficient vectors, weighted norms, projections, tail diagnostics.
//!
//! A [`BirkhoffState`] holds finitely many complex coefficients
//! (ζ_1, …, ζ_M) and stands for the infinite sequence that is zero beyond
//! M. Every operation here is consistent with that zero-extension, so the
//! "full" flow statements downstream are exact on such states.

use num_complex::Complex64;
use thiserror::Error;

use crate::encode::fmt_f64;

#[derive(Debug, Error)]
pub enum StateError {
    #[error("a state needs at least one coefficient")]
    Empty,
    #[error("coefficient {index} is not finite")]
    NonFinite { index: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Regularity exponent s of the weighted norm (Σ n^{2s} |ζ_n|²)^{1/2}.
///
/// Negative values are allowed (the renormalized regime is measured in
/// h^{-1}).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevIndex(f64);

impl SobolevIndex {
    pub fn new(s: f64) -> Self {
        assert!(s.is_finite(), "regularity exponent must be finite");
        SobolevIndex(s)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Weight n^{2s}, evaluated as exp(2s ln n); exactly 1 at n = 1.
    #[inline]
    pub fn weight(self, n: usize) -> f64 {
        if n == 1 || self.0 == 0.0 {
            1.0
        } else {
            (2.0 * self.0 * (n as f64).ln()).exp()
        }
    }
}

/// Finite complex coefficient vector (ζ_1, …, ζ_M), zero beyond M.
#[derive(Debug, Clone, PartialEq)]
pub struct BirkhoffState {
    coeffs: Vec<Complex64>,
}

impl BirkhoffState {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self, StateError> {
        if coeffs.is_empty() {
            return Err(StateError::Empty);
        }
        for (i, c) in coeffs.iter().enumerate() {
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(StateError::NonFinite { index: i + 1 });
            }
        }
        Ok(BirkhoffState { coeffs })
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len >= 1);
        BirkhoffState {
            coeffs: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    /// Truncation level M of the representation.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coefficient ζ_n, 1-based; zero for n beyond the stored length.
    #[inline]
    pub fn coeff(&self, n: usize) -> Complex64 {
        debug_assert!(n >= 1);
        self.coeffs
            .get(n - 1)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Action |ζ_n|², 1-based, zero-extended.
    #[inline]
    pub fn modulus_sq(&self, n: usize) -> f64 {
        self.coeff(n).norm_sqr()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Weighted norm (Σ_{n≤M} n^{2s} |ζ_n|²)^{1/2}.
    pub fn h_norm(&self, s: SobolevIndex) -> f64 {
        let mut acc = 0.0;
        for n in 1..=self.len() {
            acc += s.weight(n) * self.modulus_sq(n);
        }
        acc.sqrt()
    }

    /// Orthogonal projection onto the first `n` modes; output length
    /// min(n, M). Idempotent.
    pub fn project(&self, n: usize) -> BirkhoffState {
        assert!(n >= 1);
        let keep = n.min(self.len());
        BirkhoffState {
            coeffs: self.coeffs[..keep].to_vec(),
        }
    }

    /// Tail norm (Σ_{n>N} n^{2s} |ζ_n|²)^{1/2}.
    pub fn tail_norm(&self, n: usize, s: SobolevIndex) -> f64 {
        assert!(n >= 1);
        let mut acc = 0.0;
        for k in (n + 1)..=self.len() {
            acc += s.weight(k) * self.modulus_sq(k);
        }
        acc.sqrt()
    }

    /// ‖self − other‖_{h^s}, both operands zero-extended.
    pub fn h_distance(&self, other: &BirkhoffState, s: SobolevIndex) -> f64 {
        let len = self.len().max(other.len());
        let mut acc = 0.0;
        for n in 1..=len {
            let d = self.coeff(n) - other.coeff(n);
            acc += s.weight(n) * d.norm_sqr();
        }
        acc.sqrt()
    }

    /// CSV rows `n,re,im` with a header, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,re,im\n");
        for (i, c) in self.coeffs.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", i + 1, fmt_f64(c.re), fmt_f64(c.im)));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, StateError> {
        let mut coeffs = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (idx == 0 && line.eq_ignore_ascii_case("n,re,im")) {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(StateError::Parse {
                    line: idx + 1,
                    message: format!("expected 3 fields, got {}", parts.len()),
                });
            }
            let n: usize = parts[0].parse().map_err(|e| StateError::Parse {
                line: idx + 1,
                message: format!("bad index: {e}"),
            })?;
            if n != coeffs.len() + 1 {
                return Err(StateError::Parse {
                    line: idx + 1,
                    message: format!("index {n} out of order, expected {}", coeffs.len() + 1),
                });
            }
            let re: f64 = parts[1].parse().map_err(|e| StateError::Parse {
                line: idx + 1,
                message: format!("bad re: {e}"),
            })?;
            let im: f64 = parts[2].parse().map_err(|e| StateError::Parse {
                line: idx + 1,
                message: format!("bad im: {e}"),
            })?;
            coeffs.push(Complex64::new(re, im));
        }
        BirkhoffState::new(coeffs)
    }

    /// JSON array of [re, im] pairs, 17 significant digits.
    pub fn to_json(&self) -> String {
        let pairs: Vec<String> = self
            .coeffs
            .iter()
            .map(|c| format!("[{},{}]", fmt_f64(c.re), fmt_f64(c.im)))
            .collect();
        format!("[{}]", pairs.join(","))
    }

    pub fn from_json(text: &str) -> Result<Self, StateError> {
        let pairs: Vec<[f64; 2]> = serde_json::from_str(text).map_err(|e| StateError::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        BirkhoffState::new(
            pairs
                .into_iter()
                .map(|[re, im]| Complex64::new(re, im))
                .collect(),
        )
    }
}
