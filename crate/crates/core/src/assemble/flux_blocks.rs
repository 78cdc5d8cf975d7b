//! Per-fiber-mode assembly for scalar flux families with zero winding.
//! Fiber mode k is preserved by both the base derivative and a(theta), so
//! delta_t splits into independent 2(2M+1) blocks.

use crate::families::FluxFamily;
use crate::linalg::{hermitian_eigenvalues, CMatrix, LinalgError};
use num_complex::Complex64;

/// Toeplitz matrix of the fiber symbol lambda_k(theta) = k + a(theta) over
/// base modes -M..M: entry (i, j) couples mode m_j to m_i = m_j + p with
/// coefficient a_hat_p, plus k on the diagonal.
pub fn fiber_toeplitz(flux: &FluxFamily, k: i64, m_cutoff: usize) -> CMatrix {
    let n = 2 * m_cutoff + 1;
    let mut b = CMatrix::zeros(n, n);
    for i in 0..n {
        b[(i, i)] = Complex64::new(k as f64, 0.0);
    }
    for &(p, coeff) in flux.modes() {
        for j in 0..n {
            let i = j as i64 + p;
            if i >= 0 && (i as usize) < n {
                b[(i as usize, j)] += coeff;
            }
        }
    }
    b
}

/// Hermitian block [[t m, B_k], [B_k, -t m]] of delta_t at fiber mode k.
pub fn delta_block(flux: &FluxFamily, k: i64, t: f64, m_cutoff: usize) -> CMatrix {
    let n = 2 * m_cutoff + 1;
    let b = fiber_toeplitz(flux, k, m_cutoff);
    let mut h = CMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        let tm = t * (i as i64 - m_cutoff as i64) as f64;
        h[(i, i)] = Complex64::new(tm, 0.0);
        h[(n + i, n + i)] = Complex64::new(-tm, 0.0);
        for j in 0..n {
            h[(i, n + j)] = b[(i, j)];
            h[(n + i, j)] = b[(i, j)];
        }
    }
    h
}

/// Chiral block P_t = t d/dtheta + lambda_k(theta) in base Fourier modes:
/// i t m on the diagonal plus the fiber Toeplitz.
pub fn chiral_block(flux: &FluxFamily, k: i64, t: f64, m_cutoff: usize) -> CMatrix {
    let n = 2 * m_cutoff + 1;
    let mut p = fiber_toeplitz(flux, k, m_cutoff);
    for i in 0..n {
        let m = (i as i64 - m_cutoff as i64) as f64;
        p[(i, i)] += Complex64::new(0.0, t * m);
    }
    p
}

/// Eigenvalues of a stored block with the [[A, B], [B, -A]] structure
/// (A, B Hermitian), via the exact half-dimension reduction: with
/// S = A + iB, the spectrum is {+-sqrt(mu) : mu in eig(S*S)}. If S q = l p
/// and S* p = l q, the pair (p, q) assembles an eigenvector for +l and
/// (p, -q) for -l, so the pairing is exact, not approximate.
pub fn paired_block_eigenvalues(h: &CMatrix) -> Result<Vec<f64>, LinalgError> {
    let dim = h.n_rows();
    debug_assert_eq!(dim % 2, 0);
    let n = dim / 2;
    let s = CMatrix::from_fn(n, n, |i, j| {
        h[(i, j)] + Complex64::new(0.0, 1.0) * h[(i, n + j)]
    });
    let gram = s.adjoint().mul(&s);
    let mu = hermitian_eigenvalues(&gram)?;
    let mut out = Vec::with_capacity(dim);
    for &m in mu.iter().rev() {
        out.push(-m.max(0.0).sqrt());
    }
    for &m in &mu {
        out.push(m.max(0.0).sqrt());
    }
    Ok(out)
}
