//! Exact evaluation of the flow, its truncations, and the Hamiltonian
//! structure.
//!
//! The truncated flow on the first N modes is
//!
//! ```text
//! ζ_n(t) = ζ_n(0) · exp(i t β_{N,n}(ζ)),   β_{N,n} = n² − 2 Σ_{k≤N} min(n,k)|ζ_k|²
//! ```
//!
//! so there is no time stepping anywhere: evolution is a closed-form phase
//! rotation with frequencies that depend only on the conserved actions.
//! Frequencies are evaluated by an O(N) prefix-sum rearrangement
//!
//! ```text
//! β_{N,n} = n² − 2·[ Σ_{k≤n}(k−n)|ζ_k|² + n Σ_{k≤N}|ζ_k|² ]
//! ```
//!
//! (the O(N²) double loop is kept as a test oracle). The Hamiltonian, the
//! vector field, and a finite-difference Jacobian determinant (the volume
//! preservation check) complete the module.

use num_complex::Complex64;
use thiserror::Error;

use crate::state::{BirkhoffState, SobolevIndex};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("finite-difference step must be positive, got {0}")]
    DegenerateStep(f64),
    #[error("jacobian matrix is numerically singular")]
    SingularJacobian,
}

/// Frequencies β_{N,n}, n = 1…N.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector {
    beta: Vec<f64>,
}

impl PhaseVector {
    /// β_{N,n}, 1-based.
    #[inline]
    pub fn value(&self, n: usize) -> f64 {
        self.beta[n - 1]
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.beta
    }
}

/// Truncation level and evolution time of one flow application.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSpec {
    pub n: usize,
    pub t: f64,
}

/// Large trig arguments are reduced mod 2π before exponentiation.
const TRIG_REDUCTION_THRESHOLD: f64 = (1u64 << 30) as f64;

/// e^{iθ} with argument reduction for very large |θ|.
#[inline]
pub(crate) fn cis(theta: f64) -> Complex64 {
    let reduced = if theta.abs() > TRIG_REDUCTION_THRESHOLD {
        theta % std::f64::consts::TAU
    } else {
        theta
    };
    let (s, c) = reduced.sin_cos();
    Complex64::new(c, s)
}

/// Frequencies β_{N,n} = n² − 2 Σ_{k=1}^{N} min(n,k)|ζ_k|², via prefix sums.
pub fn phase_vector(state: &BirkhoffState, n: usize) -> PhaseVector {
    assert!(n >= 1);
    let m = state.len().min(n);
    let mut q_total = 0.0;
    for k in 1..=m {
        q_total += state.modulus_sq(k);
    }
    let mut beta = Vec::with_capacity(n);
    let mut prefix_weighted = 0.0; // Σ_{k≤n} k|ζ_k|²
    let mut prefix_plain = 0.0; // Σ_{k≤n} |ζ_k|²
    for mode in 1..=n {
        let msq = state.modulus_sq(mode);
        let nf = mode as f64;
        prefix_weighted += nf * msq;
        prefix_plain += msq;
        beta.push(nf * nf - 2.0 * (prefix_weighted + nf * (q_total - prefix_plain)));
    }
    PhaseVector { beta }
}

/// Truncated flow: (ζ_n e^{itβ_{N,n}(π_N ζ)})_{n≤N}; moduli are conserved.
pub fn flow_truncated(state: &BirkhoffState, spec: FlowSpec) -> BirkhoffState {
    let beta = phase_vector(state, spec.n);
    let keep = state.len().min(spec.n);
    let coeffs = (1..=keep)
        .map(|mode| state.coeff(mode) * cis(spec.t * beta.value(mode)))
        .collect();
    BirkhoffState::new(coeffs).expect("unit-modulus rotation keeps coefficients finite")
}

/// Full flow on a finitely supported state: exact, equals the truncation at
/// N = M bit for bit.
pub fn flow_full(state: &BirkhoffState, t: f64) -> BirkhoffState {
    flow_truncated(
        state,
        FlowSpec {
            n: state.len(),
            t,
        },
    )
}

/// H = −½ Σ_{k≤N} k²|ζ_k|² + ½ Σ_{k≤N} (Σ_{k₁=k}^{N} |ζ_{k₁}|²)².
pub fn hamiltonian(state: &BirkhoffState, n: usize) -> f64 {
    assert!(n >= 1);
    let mut quadratic = 0.0;
    let mut suffix = 0.0;
    let mut quartic = 0.0;
    for k in (1..=n).rev() {
        let msq = state.modulus_sq(k);
        let kf = k as f64;
        quadratic += kf * kf * msq;
        suffix += msq;
        quartic += suffix * suffix;
    }
    0.5 * (quartic - quadratic)
}

/// Right-hand side of the evolution equation: (i β_{N,n}(ζ) ζ_n)_{n≤N}.
pub fn vector_field(state: &BirkhoffState, n: usize) -> BirkhoffState {
    let beta = phase_vector(state, n);
    let keep = state.len().min(n);
    let coeffs = (1..=keep)
        .map(|mode| Complex64::new(0.0, beta.value(mode)) * state.coeff(mode))
        .collect();
    BirkhoffState::new(coeffs).expect("finite frequencies keep the field finite")
}

/// Determinant of the central-difference Jacobian of (ξ, η) ↦ Φ_N(t), the
/// volume-preservation check. The state is zero-padded to N modes.
pub fn flow_jacobian_det(
    state: &BirkhoffState,
    spec: FlowSpec,
    fd_step: f64,
) -> Result<f64, FlowError> {
    if !fd_step.is_finite() || fd_step <= 0.0 {
        return Err(FlowError::DegenerateStep(fd_step));
    }
    let n = spec.n;
    let dim = 2 * n;
    let mut base = vec![0.0; dim];
    for k in 1..=n {
        let c = state.coeff(k);
        base[k - 1] = c.re;
        base[n + k - 1] = c.im;
    }
    let eval = |coords: &[f64]| -> Vec<f64> {
        let st = BirkhoffState::new(
            (0..n)
                .map(|i| Complex64::new(coords[i], coords[n + i]))
                .collect(),
        )
        .expect("perturbed coordinates stay finite");
        let out = flow_truncated(&st, spec);
        let mut v = vec![0.0; dim];
        for k in 1..=n {
            let c = out.coeff(k);
            v[k - 1] = c.re;
            v[n + k - 1] = c.im;
        }
        v
    };
    let mut jacobian = vec![vec![0.0; dim]; dim];
    for j in 0..dim {
        let mut plus = base.clone();
        plus[j] += fd_step;
        let mut minus = base.clone();
        minus[j] -= fd_step;
        let fp = eval(&plus);
        let fm = eval(&minus);
        let inv = 1.0 / (2.0 * fd_step);
        for i in 0..dim {
            jacobian[i][j] = (fp[i] - fm[i]) * inv;
        }
    }
    lu_determinant(jacobian).ok_or(FlowError::SingularJacobian)
}

/// Determinant via LU with partial pivoting; None on a singular pivot.
fn lu_determinant(mut a: Vec<Vec<f64>>) -> Option<f64> {
    let n = a.len();
    let mut det = 1.0;
    for col in 0..n {
        let (pivot_row, pivot_abs) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        if pivot_abs == 0.0 || !pivot_abs.is_finite() {
            return None;
        }
        if pivot_row != col {
            a.swap(pivot_row, col);
            det = -det;
        }
        det *= a[col][col];
        let (top, bottom) = a.split_at_mut(col + 1);
        let pivot = &top[col];
        for row in bottom.iter_mut() {
            let factor = row[col] / pivot[col];
            if factor != 0.0 {
                for c in col..n {
                    row[c] -= factor * pivot[c];
                }
            }
        }
    }
    Some(det)
}

/// ‖Φ(t)ζ − Φ_N(t)(π_N ζ)‖_{h^s} for each N in `n_list`; reaches 0 exactly
/// once N covers the support.
pub fn convergence_profile(
    state: &BirkhoffState,
    t: f64,
    s: SobolevIndex,
    n_list: &[usize],
) -> Vec<f64> {
    let full = flow_full(state, t);
    n_list
        .iter()
        .map(|&n| full.h_distance(&flow_truncated(state, FlowSpec { n, t }), s))
        .collect()
}
