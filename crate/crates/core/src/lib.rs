//! Monte-Carlo laboratory for the Benjamin-Ono flow written in Birkhoff
//! coordinates.
//!
//! In these coordinates the flow decouples into phase rotations
//! ζ_n ↦ ζ_n e^{itβ_{N,n}(ζ)} whose frequencies depend on the state only
//! through the conserved actions |ζ_n|². This crate evaluates those flows
//! exactly (no time stepping), samples the rotation-invariant product
//! measures built from radial laws and amplitude sequences, and runs the
//! statistical machinery that probes their invariance at desk scale:
//!
//! - [`state`]: coefficient vectors, weighted h^s norms, projections;
//! - [`flow`]: exact truncated/full flows, the Hamiltonian, Liouville checks;
//! - [`measures`]: radial laws, ensemble sampling, tail-mass products;
//! - [`renorm`]: divergent-amplitude regime, renormalized phases and flow;
//! - [`harness`]: paired invariance tests, two-sample tests, weak-convergence
//!   scans, Gibbs-type reweighting;
//! - [`config`] / [`run`]: experiment configuration, dispatch, reports.
//!
//! Ensemble kernels are data-parallel over sample indices (rayon behind the
//! default `parallel` feature, plain iteration without it). All randomness is
//! counter-based: a draw is a pure function of (seed, domain, sample, mode),
//! so results are byte-identical for any worker count.

pub mod config;
pub mod encode;
pub mod exec;
pub mod flow;
pub mod harness;
pub mod measures;
pub mod renorm;
pub mod rng;
pub mod run;
pub mod state;
pub mod stats;

pub use num_complex::Complex64;
pub use state::{BirkhoffState, SobolevIndex};
