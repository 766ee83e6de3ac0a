//! Computational toolkit for finite metric-measure spaces.
//!
//! The central object is the canonical map `x ↦ d(x, ·)` of a finite metric
//! space into `L²(μ)` for a measure with strictly positive atoms. Around it the
//! crate provides:
//!
//! * [`metric`]: metric-measure spaces, axiom validation, snowflakes, gauge
//!   constants and the pushforward along the canonical map;
//! * [`canonical`]: the canonical image, the kernel `Δ(d)`, the induced metrics
//!   `ρ_d`, `θ_d`, `κ_d`, the operators `T_d`/`J_d` and Lipschitz-norm audits;
//! * [`separation`]: `E`-sets, uniform separation profiles and certificates,
//!   extremal Lipschitz constants of the canonical maps;
//! * [`gauge`]: the pseudometric `W_d` on metrics bi-Lipschitz to `d`, the
//!   openness radius transfer and near-isometry diagnostics;
//! * [`embed`]: classical double-centering, projection search, the embedding
//!   pipeline and quadruple inequalities;
//! * [`counterexample`]: Hadamard codes, hat-function bumps and the mixed
//!   non-doubling space with its covering and mass-scaling audits.
//!
//! All spaces are small dense matrices; every scan is exhaustive unless a
//! sampled mode is requested explicitly.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with the sign.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod canonical;
pub mod counterexample;
pub mod embed;
mod error;
pub mod fixtures;
pub mod gauge;
pub mod metric;
pub mod random;
pub mod separation;

pub use error::{Error, Result};
pub use metric::{
    LipschitzReport, MetricMatrix, MetricMeasureSpace, SquareMatrix, ValidationMode,
    ValidationReport,
};
