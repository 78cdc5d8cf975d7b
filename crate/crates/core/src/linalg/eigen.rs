//! Hermitian eigensolvers: Householder reduction to real tridiagonal form
//! followed by implicit-shift QL (eigenvalues only), and a cyclic Jacobi
//! iteration with eigenvectors for small functional-calculus matrices.

use super::{CMatrix, LinalgError};
use num_complex::Complex64;

/// Eigenvalues of a Hermitian matrix in ascending order.
///
/// Only the lower triangle is read; the strict upper triangle is assumed to
/// mirror it. Cost O(n^3) with a small constant; suitable up to a few
/// thousand rows.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Result<Vec<f64>, LinalgError> {
    assert!(a.is_square(), "eigenvalues need a square matrix");
    let n = a.n_rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![a[(0, 0)].re]);
    }
    let (d, e) = householder_tridiagonalize(a);
    let mut vals = tridiagonal_eigenvalues(d, e)?;
    vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(vals)
}

/// Reduce Hermitian A to a real symmetric tridiagonal (d, e) by unitary
/// similarity; e[i] couples i and i+1. Off-diagonal phases are absorbed by a
/// diagonal unitary, which leaves eigenvalues untouched.
fn householder_tridiagonalize(a: &CMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = a.n_rows();
    // Work on the symmetrized lower triangle.
    let mut m = CMatrix::from_fn(n, n, |i, j| if i >= j { a[(i, j)] } else { a[(j, i)].conj() });
    let mut e_complex = vec![Complex64::new(0.0, 0.0); n.saturating_sub(1)];

    for k in 0..n.saturating_sub(2) {
        let m_len = n - k - 1;
        // Column segment x = M[k+1.., k].
        let mut xnorm_sq = 0.0;
        for i in 0..m_len {
            xnorm_sq += m[(k + 1 + i, k)].norm_sqr();
        }
        let xnorm = xnorm_sq.sqrt();
        if xnorm == 0.0 {
            e_complex[k] = Complex64::new(0.0, 0.0);
            continue;
        }
        let x0 = m[(k + 1, k)];
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let alpha = -phase * xnorm;
        // Householder vector v = x - alpha e1.
        let mut v: Vec<Complex64> = (0..m_len).map(|i| m[(k + 1 + i, k)]).collect();
        v[0] -= alpha;
        let vnorm_sq: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        e_complex[k] = alpha;
        if vnorm_sq == 0.0 {
            continue;
        }
        // w = 2 B v / |v|^2 on the trailing block B = M[k+1.., k+1..].
        let mut w = vec![Complex64::new(0.0, 0.0); m_len];
        for i in 0..m_len {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..m_len {
                let bij = if i >= j {
                    m[(k + 1 + i, k + 1 + j)]
                } else {
                    m[(k + 1 + j, k + 1 + i)].conj()
                };
                acc += bij * v[j];
            }
            w[i] = 2.0 * acc / vnorm_sq;
        }
        // c = <v, w> / |v|^2 is real because B is Hermitian.
        let c: Complex64 = v.iter().zip(w.iter()).map(|(vi, wi)| vi.conj() * wi).sum();
        let c = c / vnorm_sq;
        // B := B - v u^* - u v^*, with u = w - c v.
        let u: Vec<Complex64> = w.iter().zip(v.iter()).map(|(wi, vi)| wi - c * vi).collect();
        for i in 0..m_len {
            for j in 0..=i {
                let delta = v[i] * u[j].conj() + u[i] * v[j].conj();
                let entry = m[(k + 1 + i, k + 1 + j)] - delta;
                m[(k + 1 + i, k + 1 + j)] = entry;
            }
        }
        // Record the annihilated column.
        m[(k + 1, k)] = alpha;
        for i in 1..m_len {
            m[(k + 1 + i, k)] = Complex64::new(0.0, 0.0);
        }
    }
    if n >= 2 {
        e_complex[n - 2] = m[(n - 1, n - 2)];
    }
    let d: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    let e: Vec<f64> = e_complex.iter().map(|z| z.norm()).collect();
    (d, e)
}

/// Implicit-shift QL on a real symmetric tridiagonal matrix; returns the
/// eigenvalues unordered.
fn tridiagonal_eigenvalues(mut d: Vec<f64>, e_in: Vec<f64>) -> Result<Vec<f64>, LinalgError> {
    let n = d.len();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&e_in);

    for l in 0..n {
        let mut iterations = 0;
        loop {
            // Find a small subdiagonal element to split at.
            let mut m_split = l;
            while m_split < n - 1 {
                let dd = d[m_split].abs() + d[m_split + 1].abs();
                if e[m_split].abs() <= f64::EPSILON * dd {
                    break;
                }
                m_split += 1;
            }
            if m_split == l {
                break;
            }
            iterations += 1;
            if iterations > 60 {
                return Err(LinalgError::IterationLimit { index: l });
            }
            // Wilkinson-style shift.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m_split] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            for i in (l..m_split).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m_split] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                f = 0.0;
                let _ = f;
            }
            if r == 0.0 && m_split > l + 1 {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m_split] = 0.0;
        }
    }
    Ok(d)
}

/// Cyclic Jacobi diagonalization of a small Hermitian matrix, with vectors.
///
/// Returns eigenvalues ascending and a unitary whose columns are the matching
/// eigenvectors. Intended for small n (functional calculus on fibers).
pub fn hermitian_eigen_small(a: &CMatrix) -> Result<(Vec<f64>, CMatrix), LinalgError> {
    assert!(a.is_square());
    let n = a.n_rows();
    let mut m = CMatrix::from_fn(n, n, |i, j| if i >= j { a[(i, j)] } else { a[(j, i)].conj() });
    let mut v = CMatrix::identity(n);
    if n <= 1 {
        return Ok(((0..n).map(|i| m[(i, i)].re).collect(), v));
    }

    let scale: f64 = m.max_norm().max(1e-300);
    for sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m[(q, p)].norm());
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        if sweep == 59 {
            return Err(LinalgError::IterationLimit { index: 0 });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(q, p)].conj(); // A[p][q]
                let b = apq.norm();
                if b <= 1e-18 * scale {
                    continue;
                }
                let phase = apq / b;
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let theta = (aqq - app) / (2.0 * b);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // G differs from identity at: G[p][p]=c, G[p][q]=s,
                // G[q][p]=-s conj(phase), G[q][q]=c conj(phase).
                let gqp = -s * phase.conj();
                let gqq = c * phase.conj();
                // Columns: M := M G, V := V G.
                for i in 0..n {
                    let mip = m[(i, p)];
                    let miq = m[(i, q)];
                    m[(i, p)] = c * mip + gqp * miq;
                    m[(i, q)] = s * mip + gqq * miq;
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = c * vip + gqp * viq;
                    v[(i, q)] = s * vip + gqq * viq;
                }
                // Rows: M := G^* M.
                for j in 0..n {
                    let mpj = m[(p, j)];
                    let mqj = m[(q, j)];
                    m[(p, j)] = c * mpj + gqp.conj() * mqj;
                    m[(q, j)] = s * mpj + gqq.conj() * mqj;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.partial_cmp(&m[(j, j)].re).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| m[(i, i)].re).collect();
    let vecs = CMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok((vals, vecs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn two_by_two_closed_form() {
        // [[1, i], [-i, 1]] has eigenvalues 0 and 2.
        let mut a = CMatrix::zeros(2, 2);
        a[(0, 0)] = c(1.0, 0.0);
        a[(1, 1)] = c(1.0, 0.0);
        a[(0, 1)] = c(0.0, 1.0);
        a[(1, 0)] = c(0.0, -1.0);
        let vals = hermitian_eigenvalues(&a).unwrap();
        assert!((vals[0] - 0.0).abs() < 1e-14 && (vals[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn diagonal_passthrough() {
        let a = CMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                c(i as f64 - 1.5, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let vals = hermitian_eigenvalues(&a).unwrap();
        assert_eq!(vals.len(), 4);
        for (k, v) in vals.iter().enumerate() {
            assert!((v - (k as f64 - 1.5)).abs() < 1e-14);
        }
    }

    #[test]
    fn clement_matrix_exact_spectrum() {
        // The n=5 Clement-Kac tridiagonal has spectrum {-4,-2,0,2,4} after
        // symmetrization: offdiag e_k = sqrt(k (n-k)).
        let n = 5;
        let a = CMatrix::from_fn(n, n, |i, j| {
            if i == j + 1 || j == i + 1 {
                let k = i.min(j) + 1;
                c(((k * (n - k)) as f64).sqrt(), 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let vals = hermitian_eigenvalues(&a).unwrap();
        for (v, expect) in vals.iter().zip([-4.0, -2.0, 0.0, 2.0, 4.0]) {
            assert!((v - expect).abs() < 1e-12, "{v} vs {expect}");
        }
    }

    #[test]
    fn jacobi_matches_ql_and_reconstructs() {
        let n = 6;
        // Deterministic pseudo-random Hermitian matrix.
        let mut seed = 0x12345678u64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut a = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                if i == j {
                    a[(i, i)] = c(next(), 0.0);
                } else {
                    let z = c(next(), next());
                    a[(i, j)] = z;
                    a[(j, i)] = z.conj();
                }
            }
        }
        let vals_ql = hermitian_eigenvalues(&a).unwrap();
        let (vals_j, vecs) = hermitian_eigen_small(&a).unwrap();
        for (x, y) in vals_ql.iter().zip(vals_j.iter()) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
        // A V = V diag(vals)
        let av = a.mul(&vecs);
        for j in 0..n {
            for i in 0..n {
                let resid = av[(i, j)] - vals_j[j] * vecs[(i, j)];
                assert!(resid.norm() < 1e-12);
            }
        }
        // Unitarity of V.
        let vv = vecs.adjoint().mul(&vecs);
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((vv[(i, j)] - expect).norm() < 1e-12);
            }
        }
    }
}
