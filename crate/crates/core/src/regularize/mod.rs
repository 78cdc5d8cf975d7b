//! Regularized spectral sums for truncated delta operators.
//!
//! Two routes produce the same analytic objects. In the absolutely
//! convergent region (`Re(s) >= REGION_THRESHOLD`) the direct route sums
//! the materialized window and closes the lattice remainder with Hurwitz
//! zeta tails. Everywhere else the heat route samples the kernel trace,
//! splits the Mellin transform at a model scale and continues through the
//! small-u power expansion; its output is Laurent data (residue, constant
//! term, derivative) at any requested center.
//!
//! Conventions: zeta-type sums run over |lambda|^-s of the nonzero
//! spectrum plus the kernel dimension; eta-type sums carry sign(lambda)
//! and the normalization pi^{-1/2} Gamma((s+1)/2). Kernel modes never
//! enter a window; they are counted separately and added back as the
//! constant dim-ker shift.

mod direct;
mod heat;
mod tails;
mod taylor;

pub use direct::{direct_sample, eta_bar_direct, zeta_bar_direct};
pub use heat::{
    continue_to, continue_to_zero, det_zeta, heat_sample, split_kernel, DetValue, HeatSource,
    HeatTraceModel,
};
pub use tails::TailSpec;
pub use taylor::{taylor_in_t, TaylorFit};

use crate::specfun::SpecFunError;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Real part above which both window sums and lattice tails converge
/// absolutely for every family handled here.
pub const REGION_THRESHOLD: f64 = 2.5;

/// Default gate on the weighted RMS misfit of the small-u power model.
pub const DEFAULT_FIT_TOLERANCE: f64 = 1e-7;

/// Condition-number gate for the Taylor design (largest over smallest
/// eigenvalue of the column-scaled normal matrix).
pub const TAYLOR_CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegularizeError {
    /// Direct summation requested in the strip where it diverges.
    #[error("Re(s) = {re} is below the absolute-convergence threshold {threshold}")]
    Region { re: f64, threshold: f64 },
    /// Window contents inconsistent with the declared truncation.
    #[error("{what}: required {required}, given {given}")]
    TruncationTooSmall {
        what: &'static str,
        required: usize,
        given: usize,
    },
    /// Sampled heat trace rejects the small-u power model.
    #[error("heat-trace fit residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    FitFailure { residual: f64, tolerance: f64 },
    #[error("continuation did not converge: {0}")]
    NonConvergence(String),
    /// Normal matrix of a least-squares design is numerically singular.
    #[error("design condition number {cond:.3e} exceeds the gate")]
    IllConditioned { cond: f64 },
    #[error("invalid sample: {0}")]
    InvalidSample(String),
}

impl From<SpecFunError> for RegularizeError {
    fn from(err: SpecFunError) -> Self {
        RegularizeError::NonConvergence(err.to_string())
    }
}

/// Which regularized sum a routine is building.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SumKind {
    Zeta,
    Eta,
}

/// A single evaluated quantity with a one-sided numerical error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueWithError {
    pub value: Complex64,
    pub error: f64,
}

/// Laurent data of a continued sum at a center: the residue of the
/// simple pole (zero when regular), the constant term and the first
/// derivative in s, plus one shared error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaurentData {
    pub at: Complex64,
    pub residue: Complex64,
    pub constant: Complex64,
    pub derivative: Complex64,
    pub error: f64,
}

/// Provenance of a sampled meromorphic function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MethodTag {
    #[serde(rename = "direct+tail")]
    DirectTail,
    #[serde(rename = "heat-trace")]
    HeatTrace,
}

/// Values of a continued sum on a list of sample points, optionally with
/// the Laurent data at a distinguished target center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeromorphicSample {
    pub s_points: Vec<Complex64>,
    pub values: Vec<Complex64>,
    pub errors: Vec<f64>,
    pub target: Option<LaurentData>,
    pub method_tag: MethodTag,
}

impl MeromorphicSample {
    pub fn new(
        s_points: Vec<Complex64>,
        values: Vec<Complex64>,
        errors: Vec<f64>,
        target: Option<LaurentData>,
        method_tag: MethodTag,
    ) -> Result<Self, RegularizeError> {
        if s_points.len() != values.len() || s_points.len() != errors.len() {
            return Err(RegularizeError::InvalidSample(format!(
                "length mismatch: {} points, {} values, {} errors",
                s_points.len(),
                values.len(),
                errors.len()
            )));
        }
        for s in &s_points {
            if !s.re.is_finite() || !s.im.is_finite() {
                return Err(RegularizeError::InvalidSample(format!(
                    "non-finite sample point {s}"
                )));
            }
        }
        for v in &values {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(RegularizeError::InvalidSample(format!(
                    "non-finite sample value {v}"
                )));
            }
        }
        for &e in &errors {
            if e.is_nan() || e < 0.0 {
                return Err(RegularizeError::InvalidSample(format!(
                    "error bound {e} must be nonnegative"
                )));
            }
        }
        Ok(MeromorphicSample {
            s_points,
            values,
            errors,
            target,
            method_tag,
        })
    }
}
