//! Numerical laboratory for adiabatic spectral limits of first-order operator
//! families over the circle.
//!
//! The crate is organized around the pipeline
//!
//! ```text
//! families  ->  assemble  ->  regularize  ->  detbundle / lab
//!                 |                               |
//!              specfun  <-------------------------+
//! ```
//!
//! * [`specfun`]: gamma, digamma, Hurwitz zeta, the gamma-ratio weight
//!   f(s) = sqrt(pi) Gamma(s - 1/2) / Gamma(s), and Laurent-coefficient
//!   extraction by contour integration.
//! * [`families`]: scalar flux families D(theta) = -i d/dx + a(theta) + c*theta/(2*pi)
//!   on the circle fiber, finite matrix loops, and stabilization of
//!   non-invertible loops.
//! * [`assemble`]: Fourier-truncated matrices for the adiabatic operator
//!   delta_t and the chiral operator P_t, plus the in-repo Hermitian
//!   eigensolver that produces their spectra.
//! * [`regularize`]: convergent-region eta/zeta sums, heat-trace analytic
//!   continuation to s = 0, zeta-determinants and Taylor-in-t fits.
//! * [`detbundle`]: connection one-form of the determinant line bundle,
//!   holonomy, spectral flow and the residue-trace index formula.
//! * [`lab`]: scripted limit experiments with extrapolation, tolerance
//!   verdicts and report emission; also hosts the acceptance runner.

pub mod assemble;
pub mod detbundle;
pub mod families;
pub mod lab;
pub mod linalg;
pub mod numerics;
pub mod regularize;
pub mod report;
pub mod specfun;
pub mod tolerances;

pub use num_complex::Complex64;

/// Validates that a complex scalar is finite in both components.
///
/// IO boundaries (family files, CLI arguments) construct scalars through this
/// check; internal arithmetic uses `Complex64` directly.
pub fn checked_complex(re: f64, im: f64) -> Result<Complex64, String> {
    if re.is_finite() && im.is_finite() {
        Ok(Complex64::new(re, im))
    } else {
        Err(format!("non-finite complex scalar ({re}, {im})"))
    }
}
