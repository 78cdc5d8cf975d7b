//! Direct summation in the absolutely convergent region.
//!
//! The window contributes a compensated power sum, the lattice remainder
//! comes from the closed tails, and the kernel dimension is added as a
//! constant. Requests below the convergence threshold are refused rather
//! than extrapolated; that is the heat route's job.

use super::tails::{self, TailSpec};
use super::{
    MeromorphicSample, MethodTag, RegularizeError, SumKind, ValueWithError, REGION_THRESHOLD,
};
use crate::assemble::TotalSpectrum;
use crate::families;
use crate::numerics::sum::sum_complex_ascending;
use crate::specfun::{gamma, real_pow_complex, SQRT_PI};
use num_complex::Complex64;

fn check_region(s: Complex64) -> Result<(), RegularizeError> {
    if !s.re.is_finite() || !s.im.is_finite() {
        return Err(RegularizeError::InvalidSample(format!(
            "non-finite sample point {s}"
        )));
    }
    if s.re < REGION_THRESHOLD {
        return Err(RegularizeError::Region {
            re: s.re,
            threshold: REGION_THRESHOLD,
        });
    }
    Ok(())
}

/// Split a spectrum into its nonzero window and kernel count at the
/// scale-relative threshold.
fn split_spectrum(spec: &TotalSpectrum) -> (Vec<f64>, usize) {
    let scale = spec
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let tau = families::kernel_threshold(scale);
    let mut window = Vec::with_capacity(spec.eigenvalues.len());
    let mut kernel = 0usize;
    for &v in &spec.eigenvalues {
        if v.abs() <= tau {
            kernel += 1;
        } else {
            window.push(v);
        }
    }
    (window, kernel)
}

fn check_window(window: &[f64], kernel: usize, tail: &TailSpec) -> Result<(), RegularizeError> {
    tail.validate()?;
    match tails::required_nonzero(tail) {
        Some(required) => {
            if window.len() != required {
                return Err(RegularizeError::TruncationTooSmall {
                    what: "window eigenvalues for the declared tail",
                    required,
                    given: window.len(),
                });
            }
        }
        None => {
            if window.is_empty() && kernel == 0 {
                return Err(RegularizeError::TruncationTooSmall {
                    what: "materialized eigenvalues",
                    required: 1,
                    given: 0,
                });
            }
        }
    }
    Ok(())
}

/// Normalized zeta at one convergent point:
/// Gamma(s/2) [sum |lambda|^-s + tail] + dim ker.
pub fn zeta_bar_direct(
    spec: &TotalSpectrum,
    s: Complex64,
    tail: &TailSpec,
) -> Result<ValueWithError, RegularizeError> {
    check_region(s)?;
    let (window, kernel) = split_spectrum(spec);
    check_window(&window, kernel, tail)?;
    let terms: Vec<Complex64> = window
        .iter()
        .map(|&l| real_pow_complex(l.abs(), -s))
        .collect();
    let wsum = sum_complex_ascending(&terms);
    let wabs: f64 = terms.iter().map(|t| t.norm()).sum();
    let (tval, terr) = tails::zeta_tail(s, tail)?;
    let g = gamma(s / 2.0)?;
    let value = g * (wsum + tval) + kernel as f64;
    let error = g.norm() * (terr + 1e-15 * (wabs + tval.norm()));
    Ok(ValueWithError { value, error })
}

/// Normalized eta at one convergent point:
/// pi^{-1/2} Gamma((s+1)/2) [sum sign(lambda) |lambda|^-s + tail] + dim ker.
pub fn eta_bar_direct(
    spec: &TotalSpectrum,
    s: Complex64,
    tail: &TailSpec,
) -> Result<ValueWithError, RegularizeError> {
    check_region(s)?;
    let (window, kernel) = split_spectrum(spec);
    check_window(&window, kernel, tail)?;
    let terms: Vec<Complex64> = window
        .iter()
        .map(|&l| l.signum() * real_pow_complex(l.abs(), -s))
        .collect();
    // Ascending-magnitude ordering puts the +-|lambda| partners next to
    // each other, so symmetric spectra cancel at working precision.
    let wsum = sum_complex_ascending(&terms);
    let wabs: f64 = terms.iter().map(|t| t.norm()).sum();
    let (tval, terr) = tails::eta_tail(s, tail)?;
    let g = gamma((s + 1.0) / 2.0)? / SQRT_PI;
    let value = g * (wsum + tval) + kernel as f64;
    let error = g.norm() * (terr + 1e-15 * (wabs + tval.norm()));
    Ok(ValueWithError { value, error })
}

/// Evaluate one of the direct sums on a list of convergent points.
pub fn direct_sample(
    spec: &TotalSpectrum,
    s_points: &[Complex64],
    kind: SumKind,
    tail: &TailSpec,
) -> Result<MeromorphicSample, RegularizeError> {
    let mut values = Vec::with_capacity(s_points.len());
    let mut errors = Vec::with_capacity(s_points.len());
    for &s in s_points {
        let v = match kind {
            SumKind::Zeta => zeta_bar_direct(spec, s, tail)?,
            SumKind::Eta => eta_bar_direct(spec, s, tail)?,
        };
        values.push(v.value);
        errors.push(v.error);
    }
    MeromorphicSample::new(
        s_points.to_vec(),
        values,
        errors,
        None,
        MethodTag::DirectTail,
    )
}
