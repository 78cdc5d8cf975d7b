//! Loops of fiber operators over the circle and their per-fiber spectral
//! data: flux families D(theta) = -i d/dx + a(theta) + c theta/(2 pi) on the
//! fiber circle, finite-rank matrix loops, normalized fiber zeta/eta values,
//! regularized traces, and finite-rank stabilization.

mod io;
mod spectral;
mod stabilize;

pub use io::{load_family, parse_family, serialize_family};
pub use spectral::{fiber_eta_bar, fiber_spectrum, fiber_zeta_bar, tr_w_abs, tr_zeta_abs};
pub use stabilize::{stabilize, BumpProfile, CoverInterval, StabilizedFamily};

use crate::linalg::CMatrix;
use crate::specfun::SpecFunError;
use num_complex::Complex64;
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FamilyError {
    #[error("fourier data does not describe a real potential: mode {mode} breaks conjugate symmetry")]
    RealityViolation { mode: i64 },
    #[error("matrix loop shape invalid: {0}")]
    ShapeError(String),
    #[error("eta is undefined: matrix loop is not Hermitian square (defect {defect:.3e})")]
    NotSelfAdjoint { defect: f64 },
    #[error("kernel present at theta = {theta}: regularized trace excludes it")]
    KernelPresent { theta: f64 },
    #[error("no valid stabilization cover at the requested resolution: {0}")]
    CoverFailure(String),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error("family file error: {0}")]
    Io(String),
    #[error("family schema error: {0}")]
    Schema(String),
}

/// Scale-aware zero detection threshold for kernel counting.
pub fn kernel_threshold(max_abs_eigenvalue: f64) -> f64 {
    1e-9 * (1.0 + max_abs_eigenvalue)
}

/// Flux family: D(theta) = -i d/dx + a(theta) + c theta/(2 pi) on the fiber
/// circle, with a real trigonometric polynomial a.
#[derive(Debug, Clone)]
pub struct FluxFamily {
    /// Signed Fourier modes (m, a_hat_m); conjugate-symmetric.
    modes: Vec<(i64, Complex64)>,
    /// Winding c: the full flux gains c when theta wraps once.
    pub winding: i64,
    /// Default fiber mode cutoff K used when callers do not override it.
    pub fiber_mode_cutoff: usize,
}

impl FluxFamily {
    pub fn new(
        mut modes: Vec<(i64, Complex64)>,
        winding: i64,
        fiber_mode_cutoff: usize,
    ) -> Result<Self, FamilyError> {
        modes.sort_by_key(|&(m, _)| m);
        for &(m, coeff) in &modes {
            let partner = modes.iter().find(|&&(m2, _)| m2 == -m).map(|&(_, c)| c);
            match partner {
                Some(c) if (c.conj() - coeff).norm() <= 1e-12 * (1.0 + coeff.norm()) => {}
                _ => return Err(FamilyError::RealityViolation { mode: m }),
            }
        }
        Ok(FluxFamily {
            modes,
            winding,
            fiber_mode_cutoff,
        })
    }

    /// Convenience constructor for a constant potential a(theta) = value.
    pub fn constant(value: f64, winding: i64, cutoff: usize) -> Self {
        FluxFamily::new(vec![(0, Complex64::new(value, 0.0))], winding, cutoff)
            .expect("constant potential is real")
    }

    pub fn modes(&self) -> &[(i64, Complex64)] {
        &self.modes
    }

    /// The periodic part a(theta).
    pub fn a(&self, theta: f64) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(m, coeff) in &self.modes {
            acc += coeff * Complex64::from_polar(1.0, m as f64 * theta);
        }
        acc.re
    }

    /// d a / d theta.
    pub fn a_prime(&self, theta: f64) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(m, coeff) in &self.modes {
            acc += Complex64::new(0.0, m as f64) * coeff * Complex64::from_polar(1.0, m as f64 * theta);
        }
        acc.re
    }

    /// Full flux x(theta) = a(theta) + c theta / (2 pi).
    pub fn flux(&self, theta: f64) -> f64 {
        self.a(theta) + self.winding as f64 * theta / TAU
    }

    /// d x / d theta, the speed of the whole spectrum.
    pub fn flux_prime(&self, theta: f64) -> f64 {
        self.a_prime(theta) + self.winding as f64 / TAU
    }

    /// Fractional part of the flux in (0, 1], together with the kernel
    /// dimension at this angle. When the flux sits on an integer the
    /// spectrum is exactly the integers: frac is reported as 1 and the
    /// kernel has dimension 1 (the k = -flux mode).
    pub fn frac_and_kernel(&self, theta: f64) -> (f64, usize) {
        let x = self.flux(theta);
        let g = x - x.floor();
        let thr = kernel_threshold(0.0);
        if g < thr || 1.0 - g < thr {
            (1.0, 1)
        } else {
            (g, 0)
        }
    }
}

/// Finite-rank loop of rows x cols matrices with finite Fourier data.
#[derive(Debug, Clone)]
pub struct MatrixLoop {
    pub rows: usize,
    pub cols: usize,
    /// Signed Fourier modes (m, coefficient matrix).
    coeffs: Vec<(i64, CMatrix)>,
}

impl MatrixLoop {
    pub fn new(rows: usize, cols: usize, mut coeffs: Vec<(i64, CMatrix)>) -> Result<Self, FamilyError> {
        if rows == 0 || cols == 0 {
            return Err(FamilyError::ShapeError("zero dimension".into()));
        }
        for (m, c) in &coeffs {
            if c.n_rows() != rows || c.n_cols() != cols {
                return Err(FamilyError::ShapeError(format!(
                    "mode {m} has shape {}x{}, expected {rows}x{cols}",
                    c.n_rows(),
                    c.n_cols()
                )));
            }
        }
        coeffs.sort_by_key(|&(m, _)| m);
        Ok(MatrixLoop { rows, cols, coeffs })
    }

    pub fn coeffs(&self) -> &[(i64, CMatrix)] {
        &self.coeffs
    }

    /// The matrix D(theta).
    pub fn at(&self, theta: f64) -> CMatrix {
        let mut out = CMatrix::zeros(self.rows, self.cols);
        for (m, c) in &self.coeffs {
            let phase = Complex64::from_polar(1.0, *m as f64 * theta);
            out = out.add(&c.scale(phase));
        }
        out
    }

    /// d D / d theta at theta.
    pub fn derivative_at(&self, theta: f64) -> CMatrix {
        let mut out = CMatrix::zeros(self.rows, self.cols);
        for (m, c) in &self.coeffs {
            let phase = Complex64::new(0.0, *m as f64) * Complex64::from_polar(1.0, *m as f64 * theta);
            out = out.add(&c.scale(phase));
        }
        out
    }

    /// Fiberwise index of the loop, cols - rows.
    pub fn fiber_index(&self) -> i64 {
        self.cols as i64 - self.rows as i64
    }

    /// Worst Hermiticity defect over a theta scan (square loops only).
    pub fn hermiticity_defect(&self, samples: usize) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        (0..samples)
            .map(|j| self.at(TAU * j as f64 / samples as f64).hermiticity_defect())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian_square(&self) -> bool {
        self.rows == self.cols && self.hermiticity_defect(64) < 1e-12
    }
}

/// A loop of fiber operators: either a flux family or a matrix loop.
#[derive(Debug, Clone)]
pub enum FamilySpec {
    Flux(FluxFamily),
    MatrixLoop(MatrixLoop),
}

impl FamilySpec {
    pub fn name_hint(&self) -> &'static str {
        match self {
            FamilySpec::Flux(_) => "flux",
            FamilySpec::MatrixLoop(_) => "matrix_loop",
        }
    }
}

/// Per-angle spectral snapshot of a fiber operator.
#[derive(Debug, Clone)]
pub struct FiberSpectralData {
    pub theta: f64,
    /// Signed eigenvalues (flux or Hermitian square loops) or singular
    /// values, plain ascending.
    pub values: Vec<f64>,
    pub kernel_dim: usize,
    pub kernel_threshold: f64,
}

impl FiberSpectralData {
    /// Values re-sorted ascending by magnitude, as eta-type sums consume them.
    pub fn values_by_magnitude(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(|x, y| x.abs().partial_cmp(&y.abs()).unwrap());
        v
    }

    /// Nonzero values only (magnitude at or above the kernel threshold).
    pub fn nonzero_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .copied()
            .filter(|v| v.abs() >= self.kernel_threshold)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reality_validation_rejects_one_sided_modes() {
        let bad = FluxFamily::new(vec![(1, Complex64::new(0.3, 0.0))], 0, 8);
        assert!(matches!(bad, Err(FamilyError::RealityViolation { mode: 1 })));
        let good = FluxFamily::new(
            vec![
                (1, Complex64::new(0.3, -0.1)),
                (-1, Complex64::new(0.3, 0.1)),
            ],
            0,
            8,
        );
        assert!(good.is_ok());
    }

    #[test]
    fn flux_evaluation_and_derivative() {
        // a(theta) = 0.5 + 0.2 sin(theta): modes (+-1, -+0.1i).
        let fam = FluxFamily::new(
            vec![
                (0, Complex64::new(0.5, 0.0)),
                (1, Complex64::new(0.0, -0.1)),
                (-1, Complex64::new(0.0, 0.1)),
            ],
            0,
            8,
        )
        .unwrap();
        let th = 0.73;
        assert!((fam.a(th) - (0.5 + 0.2 * th.sin())).abs() < 1e-14);
        assert!((fam.a_prime(th) - 0.2 * th.cos()).abs() < 1e-14);
        assert!((fam.flux(th) - fam.a(th)).abs() < 1e-15);
    }

    #[test]
    fn winding_enters_flux_linearly() {
        let fam = FluxFamily::constant(0.1, 2, 8);
        assert!((fam.flux(TAU / 2.0) - (0.1 + 1.0)).abs() < 1e-14);
        assert!((fam.flux_prime(1.0) - 2.0 / TAU).abs() < 1e-14);
    }

    #[test]
    fn frac_detects_integer_crossing() {
        let fam = FluxFamily::constant(0.0, 1, 8);
        // At theta = 0 the flux is 0: kernel of dimension 1, frac 1.
        let (frac, ker) = fam.frac_and_kernel(0.0);
        assert_eq!(ker, 1);
        assert!((frac - 1.0).abs() < 1e-15);
        // Away from crossings frac is the plain fractional part.
        let (frac, ker) = fam.frac_and_kernel(TAU * 0.3);
        assert_eq!(ker, 0);
        assert!((frac - 0.3).abs() < 1e-12);
    }

    #[test]
    fn matrix_loop_evaluates_fourier_data() {
        // D(theta) = [cos theta, sin theta].
        let half = Complex64::new(0.5, 0.0);
        let half_i = Complex64::new(0.0, 0.5);
        let plus = CMatrix::from_fn(1, 2, |_, j| if j == 0 { half } else { -half_i });
        let minus = CMatrix::from_fn(1, 2, |_, j| if j == 0 { half } else { half_i });
        let loop_ = MatrixLoop::new(1, 2, vec![(1, plus), (-1, minus)]).unwrap();
        let th = 1.1;
        let d = loop_.at(th);
        assert!((d[(0, 0)].re - th.cos()).abs() < 1e-14 && d[(0, 0)].im.abs() < 1e-15);
        assert!((d[(0, 1)].re - th.sin()).abs() < 1e-14);
        let dd = loop_.derivative_at(th);
        assert!((dd[(0, 0)].re + th.sin()).abs() < 1e-14);
        assert!((dd[(0, 1)].re - th.cos()).abs() < 1e-14);
        assert_eq!(loop_.fiber_index(), 1);
    }
}
