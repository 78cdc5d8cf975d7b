//! Small-t Taylor reads of adiabatic quantities.
//!
//! Fits v(t) on samples from (0, 0.5] against 1, t, ..., t^J, optionally
//! extended by ln t and t ln t, and reports least-squares standard
//! errors so a genuinely logarithmic family shows up as a significant
//! log coefficient instead of a silently wrong polynomial.

use super::{RegularizeError, TAYLOR_CONDITION_LIMIT};
use crate::linalg::{hermitian_eigenvalues, lu_inverse, lu_solve, CMatrix};
use num_complex::Complex64;

/// Least-squares read of a t-expansion with significance data.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorFit {
    /// Polynomial coefficients of 1, t, ..., t^J.
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub log_coefficient: Option<f64>,
    pub log_standard_error: Option<f64>,
    /// Coefficient of t ln t when the log extension is on.
    pub t_log_coefficient: Option<f64>,
    pub t_log_standard_error: Option<f64>,
    /// Plain RMS misfit over the samples.
    pub residual: f64,
    /// lambda_max / lambda_min of the column-scaled normal matrix.
    pub condition: f64,
    pub dof: usize,
}

/// Fit samples (t_i, v_i) with t_i in (0, 0.5] to a degree-`order`
/// polynomial, optionally extended by {ln t, t ln t}.
pub fn taylor_in_t(
    samples: &[(f64, f64)],
    order: usize,
    with_log: bool,
) -> Result<TaylorFit, RegularizeError> {
    let n = samples.len();
    if n < order + 3 {
        return Err(RegularizeError::InvalidSample(format!(
            "need at least {} samples for order {order}, got {n}",
            order + 3
        )));
    }
    for &(t, v) in samples {
        if !(t.is_finite() && t > 0.0 && t <= 0.5) {
            return Err(RegularizeError::InvalidSample(format!(
                "sample abscissa {t} outside the adiabatic window (0, 0.5]"
            )));
        }
        if !v.is_finite() {
            return Err(RegularizeError::InvalidSample(format!(
                "non-finite sample value {v} at t = {t}"
            )));
        }
    }
    let p = order + 1 + if with_log { 2 } else { 0 };
    let mut design = vec![vec![0.0f64; p]; n];
    for (i, &(t, _)) in samples.iter().enumerate() {
        let mut pw = 1.0;
        for j in 0..=order {
            design[i][j] = pw;
            pw *= t;
        }
        if with_log {
            design[i][order + 1] = t.ln();
            design[i][order + 2] = t * t.ln();
        }
    }
    let mut norms = vec![0.0f64; p];
    for (j, norm) in norms.iter_mut().enumerate() {
        *norm = design.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt();
        if !(*norm > 0.0) {
            return Err(RegularizeError::IllConditioned { cond: f64::INFINITY });
        }
    }
    let mut gram = vec![vec![0.0f64; p]; p];
    let mut rhs = vec![0.0f64; p];
    for (i, &(_, v)) in samples.iter().enumerate() {
        for j in 0..p {
            let bj = design[i][j] / norms[j];
            rhs[j] += bj * v;
            for k in 0..p {
                gram[j][k] += bj * design[i][k] / norms[k];
            }
        }
    }
    let gm = CMatrix::from_fn(p, p, |i, j| Complex64::new(gram[i][j], 0.0));
    let eig = hermitian_eigenvalues(&gm)
        .map_err(|e| RegularizeError::NonConvergence(format!("normal-matrix spectrum: {e}")))?;
    let lam_max = eig.iter().fold(0.0f64, |m, &v| m.max(v));
    let lam_min = eig.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let condition = if lam_min <= 0.0 {
        f64::INFINITY
    } else {
        lam_max / lam_min
    };
    if condition > TAYLOR_CONDITION_LIMIT {
        return Err(RegularizeError::IllConditioned { cond: condition });
    }
    let rhs_c: Vec<Complex64> = rhs.iter().map(|&r| Complex64::new(r, 0.0)).collect();
    let sol = lu_solve(&gm, &rhs_c)
        .map_err(|e| RegularizeError::NonConvergence(format!("normal equations: {e}")))?;
    let beta: Vec<f64> = (0..p).map(|j| sol[j].re / norms[j]).collect();
    let mut ssr = 0.0;
    for (i, &(_, v)) in samples.iter().enumerate() {
        let mut pred = 0.0;
        for j in 0..p {
            pred += beta[j] * design[i][j];
        }
        ssr += (pred - v) * (pred - v);
    }
    let dof = n.saturating_sub(p).max(1);
    let sigma2 = ssr / dof as f64;
    let inv = lu_inverse(&gm)
        .map_err(|e| RegularizeError::NonConvergence(format!("covariance inverse: {e}")))?;
    let se: Vec<f64> = (0..p)
        .map(|j| (sigma2 * inv[(j, j)].re).max(0.0).sqrt() / norms[j])
        .collect();
    let (mut log_c, mut log_se, mut tlog_c, mut tlog_se) = (None, None, None, None);
    if with_log {
        log_c = Some(beta[order + 1]);
        log_se = Some(se[order + 1]);
        tlog_c = Some(beta[order + 2]);
        tlog_se = Some(se[order + 2]);
    }
    Ok(TaylorFit {
        coefficients: beta[..=order].to_vec(),
        standard_errors: se[..=order].to_vec(),
        log_coefficient: log_c,
        log_standard_error: log_se,
        t_log_coefficient: tlog_c,
        t_log_standard_error: tlog_se,
        residual: (ssr / n as f64).sqrt(),
        condition,
        dof,
    })
}
