//! Per-fiber spectral quantities: explicit spectra, normalized zeta/eta via
//! Hurwitz closed forms or finite sums, and the regularized traces of |D|.

use super::{kernel_threshold, FamilyError, FamilySpec, FiberSpectralData};
use crate::linalg::hermitian_eigenvalues;
use crate::specfun::{
    self, gamma, hurwitz_zeta, laurent_coefficients, real_pow_complex, SQRT_PI,
};
use num_complex::Complex64;

/// Spectrum of D(theta): exact eigenvalues k + flux for flux families with
/// |k| <= cutoff, eigenvalues for Hermitian square loops, singular values
/// (sqrt of all eigenvalues of D^*D, kernel zeros included) otherwise.
pub fn fiber_spectrum(family: &FamilySpec, theta: f64, cutoff: usize) -> FiberSpectralData {
    assert!(cutoff >= 1, "cutoff must be at least 1");
    match family {
        FamilySpec::Flux(flux) => {
            let x = flux.flux(theta);
            let values: Vec<f64> = (-(cutoff as i64)..=cutoff as i64)
                .map(|k| k as f64 + x)
                .collect();
            let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let thr = kernel_threshold(max_abs);
            let kernel_dim = values.iter().filter(|v| v.abs() < thr).count();
            FiberSpectralData {
                theta,
                values,
                kernel_dim,
                kernel_threshold: thr,
            }
        }
        FamilySpec::MatrixLoop(ml) => {
            let d = ml.at(theta);
            let values: Vec<f64> = if ml.rows == ml.cols && d.hermiticity_defect() < 1e-12 {
                hermitian_eigenvalues(&d).expect("small Hermitian eigensolve")
            } else {
                let dd = d.adjoint().mul(&d);
                hermitian_eigenvalues(&dd)
                    .expect("small Hermitian eigensolve")
                    .iter()
                    .map(|l| l.max(0.0).sqrt())
                    .collect()
            };
            let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let thr = kernel_threshold(max_abs);
            let kernel_dim = values.iter().filter(|v| v.abs() < thr).count();
            FiberSpectralData {
                theta,
                values,
                kernel_dim,
                kernel_threshold: thr,
            }
        }
    }
}

/// Normalized fiber zeta: Gamma(s/2) * sum over nonzero spectrum of
/// (lambda^* lambda)^{-s/2} plus the kernel dimension.
///
/// Flux families use the Hurwitz closed form with frac in (0, 1); at
/// crossings (frac = 1) the nonzero spectrum is +-{1, 2, ...}.
pub fn fiber_eta_bar(
    family: &FamilySpec,
    theta: f64,
    s: Complex64,
) -> Result<Complex64, FamilyError> {
    match family {
        FamilySpec::Flux(flux) => {
            let (frac, ker) = flux.frac_and_kernel(theta);
            if ker > 0 {
                // Spectrum is the integers: the signed sum cancels exactly,
                // so the weight (possibly at a pole) never enters.
                return Ok(Complex64::new(ker as f64, 0.0));
            }
            let weight = gamma((s + 1.0) / 2.0)? / SQRT_PI;
            // Pole-cancelling difference: eta is entire at s = 1.
            let diff = specfun::hurwitz_zeta_diff(s, frac, 1.0 - frac)?;
            Ok(weight * diff + ker as f64)
        }
        FamilySpec::MatrixLoop(ml) => {
            let defect = ml.hermiticity_defect(64);
            if !defect.is_finite() || defect > 1e-12 {
                return Err(FamilyError::NotSelfAdjoint { defect });
            }
            let weight = gamma((s + 1.0) / 2.0)? / SQRT_PI;
            let data = fiber_spectrum(family, theta, 1);
            let terms: Vec<Complex64> = data
                .nonzero_values()
                .iter()
                .map(|&l| l.signum() * real_pow_complex(l.abs(), -s))
                .collect();
            let sum = crate::numerics::sum::sum_complex_ascending(&terms);
            Ok(weight * sum + data.kernel_dim as f64)
        }
    }
}

/// Normalized fiber zeta bar (see module docs); kernel dimension added as is.
pub fn fiber_zeta_bar(
    family: &FamilySpec,
    theta: f64,
    s: Complex64,
) -> Result<Complex64, FamilyError> {
    let weight = gamma(s / 2.0)?;
    match family {
        FamilySpec::Flux(flux) => {
            let (frac, ker) = flux.frac_and_kernel(theta);
            if ker > 0 {
                // Nonzero spectrum +-{1,2,...}: two copies of zeta_H(s, 1).
                let z = hurwitz_zeta(s, 1.0)?;
                return Ok(weight * 2.0 * z + ker as f64);
            }
            let sum = hurwitz_zeta(s, frac)? + hurwitz_zeta(s, 1.0 - frac)?;
            Ok(weight * sum + ker as f64)
        }
        FamilySpec::MatrixLoop(ml) => {
            let d = ml.at(theta);
            let dd = d.adjoint().mul(&d);
            let evals = hermitian_eigenvalues(&dd).expect("small Hermitian eigensolve");
            let max_abs = evals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let thr = kernel_threshold(max_abs.sqrt());
            let mut kernel = 0usize;
            let mut terms = Vec::new();
            for &l in &evals {
                if l.max(0.0).sqrt() < thr {
                    kernel += 1;
                } else {
                    terms.push(real_pow_complex(l, -s / 2.0));
                }
            }
            let sum = crate::numerics::sum::sum_complex_ascending(&terms);
            Ok(weight * sum + kernel as f64)
        }
    }
}

/// Regularized trace of |D(theta)|: the continued value zeta(D, -1).
///
/// For flux families this is -(frac^2 - frac + 1/6); a kernel makes the
/// regularized trace on the complement ill-matched with the closed form, so
/// it is reported as an error.
pub fn tr_zeta_abs(family: &FamilySpec, theta: f64) -> Result<f64, FamilyError> {
    match family {
        FamilySpec::Flux(flux) => {
            let (frac, ker) = flux.frac_and_kernel(theta);
            if ker > 0 {
                return Err(FamilyError::KernelPresent { theta });
            }
            Ok(-(frac * frac - frac + 1.0 / 6.0))
        }
        FamilySpec::MatrixLoop(_) => {
            let data = fiber_spectrum(family, theta, 1);
            if data.kernel_dim > 0 {
                return Err(FamilyError::KernelPresent { theta });
            }
            // Finite spectrum: zeta(D, -1) is literally the sum of |lambda|.
            let terms: Vec<f64> = data.values.iter().map(|v| v.abs()).collect();
            Ok(crate::numerics::sum::sum_ascending_magnitude(&terms))
        }
    }
}

/// Wodzicki-style residue trace of |D(theta)|, computed spectrally as the
/// residue at s = 0 of s -> zeta(D, s - 1).
///
/// Identically 0 for every supported family: Hurwitz zeta is regular at -1
/// and finite spectra give entire functions. The computed residue is
/// returned rather than a hardwired zero.
pub fn tr_w_abs(family: &FamilySpec, theta: f64) -> Result<f64, FamilyError> {
    match family {
        FamilySpec::Flux(flux) => {
            let (frac, ker) = flux.frac_and_kernel(theta);
            if ker > 0 {
                return Err(FamilyError::KernelPresent { theta });
            }
            let zeta_abs = |s: Complex64| {
                let z1 = hurwitz_zeta(s, frac).expect("off-pole evaluation");
                let z2 = hurwitz_zeta(s, 1.0 - frac).expect("off-pole evaluation");
                z1 + z2
            };
            let expansion = laurent_coefficients(
                |s| zeta_abs(s - 1.0),
                Complex64::new(0.0, 0.0),
                -1,
                0,
                0.1,
            )?;
            Ok(expansion.coefficient(-1).re)
        }
        FamilySpec::MatrixLoop(_) => Ok(0.0),
    }
}
