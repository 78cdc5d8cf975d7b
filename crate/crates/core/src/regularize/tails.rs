//! Analytic lattice tails and the theta kernels behind them.
//!
//! A truncated spectrum keeps a finite window; whatever the window cut
//! off lives on one of the model lattices below and is summed in closed
//! form. Closed pieces are Hurwitz zeta evaluations. Open pieces are
//! Euler-Maclaurin sums anchored far enough out that the first omitted
//! correction is tiny, and that omitted term is returned as the error
//! bound instead of being dropped silently.

use super::RegularizeError;
use crate::numerics::quad::adaptive_simpson;
use crate::numerics::sum::Accumulator;
use crate::specfun::{gamma, hurwitz_zeta_shifted, real_pow_complex, SQRT_PI};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Smallest anchor for Euler-Maclaurin closure of one-dimensional sums.
const EM_ANCHOR: i64 = 32;

/// Exponent cutoff: exp(-x) underflows to zero near x = 745.
const EXP_FLOOR: f64 = 745.0;

/// Crossover between direct and image-summed theta evaluation.
const THETA_CROSSOVER: f64 = 3.0;

/// Where the lattice beyond a finite window lives.
///
/// The descriptors mirror the spectra the assembler produces. `Ladder`
/// is the scalar fiber family t(k + frac) over all integers k with the
/// window |k| <= cutoff materialized. `ConstantFamily` is the total
/// space of a constant-flux delta operator, +-sqrt(t^2 m^2 + (k+frac)^2)
/// over the integer plane with the box |k| <= k_cutoff, |m| <= m_cutoff
/// materialized (negative cutoffs mean an empty window). `frac` is the
/// fractional flux in [0, 1]; integer flux puts a kernel mode on the
/// lattice and that mode must then sit inside the window, never in the
/// tail region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailSpec {
    /// Finite spectrum: nothing beyond the window.
    None,
    /// Scalar ladder t(k + frac), k ranging over the integers.
    Ladder { t: f64, frac: f64, cutoff: i64 },
    /// Symmetric total-space lattice of a constant-flux family.
    ConstantFamily {
        t: f64,
        frac: f64,
        k_cutoff: i64,
        m_cutoff: i64,
    },
}

impl TailSpec {
    pub(crate) fn validate(&self) -> Result<(), RegularizeError> {
        let check = |t: f64, frac: f64| {
            if !(t.is_finite() && t > 0.0) {
                Err(RegularizeError::InvalidSample(format!(
                    "tail scale t = {t} must be positive and finite"
                )))
            } else if !(0.0..=1.0).contains(&frac) {
                Err(RegularizeError::InvalidSample(format!(
                    "fractional flux {frac} outside [0, 1]"
                )))
            } else {
                Ok(())
            }
        };
        match *self {
            TailSpec::None => Ok(()),
            TailSpec::Ladder { t, frac, .. } => check(t, frac),
            TailSpec::ConstantFamily { t, frac, .. } => check(t, frac),
        }
    }
}

/// Lattice point count of a symmetric window |k| <= c.
pub(crate) fn lat(c: i64) -> usize {
    if c < 0 {
        0
    } else {
        (2 * c + 1) as usize
    }
}

/// Lattice position of the kernel mode for integer flux, if any.
fn kernel_site(frac: f64) -> Option<i64> {
    if frac == frac.round() {
        Some(-(frac.round() as i64))
    } else {
        None
    }
}

/// True when the declared tail region would contain a zero mode.
pub(crate) fn tail_contains_kernel(tail: &TailSpec) -> bool {
    match *tail {
        TailSpec::None => false,
        TailSpec::Ladder { frac, cutoff, .. } => {
            kernel_site(frac).map_or(false, |k0| k0.abs() > cutoff)
        }
        TailSpec::ConstantFamily {
            frac,
            k_cutoff,
            m_cutoff,
            ..
        } => kernel_site(frac).map_or(false, |k0| k0.abs() > k_cutoff || m_cutoff < 0),
    }
}

/// Number of nonzero window eigenvalues consistent with the descriptor,
/// or `None` when the spectrum is declared finite.
pub(crate) fn required_nonzero(tail: &TailSpec) -> Option<usize> {
    match *tail {
        TailSpec::None => None,
        TailSpec::Ladder { frac, cutoff, .. } => {
            let zero = kernel_site(frac).map_or(0, |k0| usize::from(k0.abs() <= cutoff));
            Some(lat(cutoff) - zero)
        }
        TailSpec::ConstantFamily {
            frac,
            k_cutoff,
            m_cutoff,
            ..
        } => {
            let zero = kernel_site(frac)
                .map_or(0, |k0| usize::from(k0.abs() <= k_cutoff && m_cutoff >= 0));
            Some(2 * (lat(k_cutoff) * lat(m_cutoff) - zero))
        }
    }
}

/// First lattice index on each side of the window |k| <= cutoff: the
/// positive side starts at max(cutoff+1, 0), the negative side (indexed
/// by |k|) at max(cutoff+1, 1). With cutoff = -1 both sides together
/// cover every integer exactly once.
fn side_starts(cutoff: i64) -> (i64, i64) {
    ((cutoff + 1).max(0), (cutoff + 1).max(1))
}

/// theta_f(x) = sum over integers k of exp(-x (k+f)^2); direct above the
/// modular crossover, image sum below it.
pub(crate) fn theta_shifted(x: f64, f: f64) -> f64 {
    debug_assert!(x > 0.0, "theta needs positive argument, got {x}");
    if x >= THETA_CROSSOVER {
        let span = (EXP_FLOOR / x).sqrt();
        let lo = (-f - span).floor() as i64;
        let hi = (-f + span).ceil() as i64;
        let mut acc = Accumulator::new();
        for k in lo..=hi {
            let y = k as f64 + f;
            acc.add((-x * y * y).exp());
        }
        acc.value()
    } else {
        let lead = (PI / x).sqrt();
        let p_max = ((EXP_FLOOR * x).sqrt() / PI).ceil() as i64 + 1;
        let mut corr = Accumulator::new();
        for p in 1..=p_max {
            let pf = p as f64;
            corr.add((-PI * PI * pf * pf / x).exp() * (2.0 * PI * pf * f).cos());
        }
        lead * (1.0 + 2.0 * corr.value())
    }
}

/// S1(x, f) = sum over integers k of (k+f) exp(-x (k+f)^2); identically
/// zero at integer f, antisymmetric under f -> 1 - f.
pub(crate) fn s1_shifted(x: f64, f: f64) -> f64 {
    debug_assert!(x > 0.0, "S1 needs positive argument, got {x}");
    if f == f.round() {
        return 0.0;
    }
    if x >= THETA_CROSSOVER {
        // Pair k+f against -(k+1-f) so opposite wings cancel digit by digit.
        let k_max = (EXP_FLOOR / x).sqrt().ceil() as i64 + 1;
        let mut acc = Accumulator::new();
        for k in (0..=k_max).rev() {
            let a = k as f64 + f;
            let b = k as f64 + 1.0 - f;
            acc.add(a * (-x * a * a).exp());
            acc.add(-b * (-x * b * b).exp());
        }
        acc.value()
    } else {
        let lead = (PI / x).sqrt();
        let p_max = ((EXP_FLOOR * x).sqrt() / PI).ceil() as i64 + 1;
        let mut acc = Accumulator::new();
        for p in 1..=p_max {
            let pf = p as f64;
            acc.add(
                (2.0 * PI * pf / x)
                    * (2.0 * PI * pf * f).sin()
                    * (-PI * PI * pf * pf / x).exp(),
            );
        }
        lead * acc.value()
    }
}

/// Compensated complex accumulator built from two real ones.
pub(crate) struct CAcc {
    re: Accumulator,
    im: Accumulator,
}

impl CAcc {
    pub(crate) fn new() -> Self {
        CAcc {
            re: Accumulator::new(),
            im: Accumulator::new(),
        }
    }

    pub(crate) fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub(crate) fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// C0(s) = (sqrt(pi)/2) Gamma((s-1)/2) / Gamma(s/2), the half-line
/// integral of (x^2 + 1)^{-s/2}.
fn c0_factor(s: Complex64) -> Result<Complex64, RegularizeError> {
    let num = gamma((s - 1.0) / 2.0)?;
    let den = gamma(s / 2.0)?;
    Ok(0.5 * SQRT_PI * num / den)
}

/// Sum over m >= a of (c^2 m^2 + q^2)^{-s/2} for q >= 0, a >= 1.
///
/// Direct terms run to an anchor, the remainder closes with the tail
/// integral plus second-order Euler-Maclaurin edge terms; the first
/// omitted (B4) correction becomes the bound.
pub(crate) fn one_dim_tail(
    s: Complex64,
    c: f64,
    q: f64,
    a: i64,
) -> Result<(Complex64, f64), RegularizeError> {
    debug_assert!(a >= 1 && c > 0.0 && q >= 0.0);
    if q == 0.0 {
        let z = hurwitz_zeta_shifted(s, a as f64)?;
        let v = real_pow_complex(c, -s) * z;
        return Ok((v, 1e-12 * v.norm()));
    }
    let anchor = a.max(EM_ANCHOR);
    let mut direct = CAcc::new();
    for m in (a..anchor).rev() {
        let x = m as f64;
        direct.add(real_pow_complex(c * c * x * x + q * q, -s / 2.0));
    }
    let aa = anchor as f64;
    let neg_half_s = -s / 2.0;
    let ga2 = c * c * aa * aa + q * q;
    let ga = real_pow_complex(ga2, neg_half_s);
    let gprime = -s * c * c * aa * real_pow_complex(ga2, -(s + 2.0) / 2.0);
    // Integral over [anchor, inf) through y = anchor/x; the integrand
    // vanishes like y^{Re(s)-2} at the origin, regular for Re(s) > 2.
    let integrand = move |y: f64| -> Complex64 {
        if y <= 0.0 {
            return Complex64::default();
        }
        let x = aa / y;
        real_pow_complex(c * c * x * x + q * q, neg_half_s) * (aa / (y * y))
    };
    let tol = 1e-13 * ga.norm() * aa + 1e-300;
    let tail_integral = adaptive_simpson(&integrand, 0.0, 1.0, tol);
    let m4 = ga2.powf(-(s.re + 4.0) / 2.0);
    let m6 = ga2.powf(-(s.re + 6.0) / 2.0);
    let third_mag = 3.0 * (s * (s + 2.0)).norm() * c.powi(4) * aa * m4
        + (s * (s + 2.0) * (s + 4.0)).norm() * c.powi(6) * aa.powi(3) * m6;
    let value = direct.value() + tail_integral + 0.5 * ga - gprime / 12.0;
    let bound = third_mag / 360.0 + 2.0 * tol;
    Ok((value, bound))
}

/// Full-line sum over m of (c^2 m^2 + q^2)^{-s/2} for q > 0.
pub(crate) fn s_full(s: Complex64, c: f64, q: f64) -> Result<(Complex64, f64), RegularizeError> {
    let (t, b) = one_dim_tail(s, c, q, 1)?;
    Ok((real_pow_complex(q, -s) + 2.0 * t, 2.0 * b))
}

/// Leading Poisson term of `s_full`: the full-line integral
/// 2 C0(s) q^{1-s} / c. The difference s_full - d_line decays like
/// exp(-2 pi q / c).
fn d_line(s: Complex64, c: f64, q: f64) -> Result<Complex64, RegularizeError> {
    Ok(2.0 * c0_factor(s)? * real_pow_complex(q, 1.0 - s) / c)
}

fn kernel_in_tail_error() -> RegularizeError {
    RegularizeError::InvalidSample(
        "declared tail region contains a kernel lattice mode; widen the window".into(),
    )
}

/// Zeta-type ladder tail: sum of |t(k+frac)|^{-s} over |k| > cutoff.
pub(crate) fn ladder_zeta_tail(
    s: Complex64,
    t: f64,
    frac: f64,
    cutoff: i64,
) -> Result<(Complex64, f64), RegularizeError> {
    if tail_contains_kernel(&TailSpec::Ladder { t, frac, cutoff }) {
        return Err(kernel_in_tail_error());
    }
    let (jp, jm) = side_starts(cutoff);
    let (ap, am) = (jp as f64 + frac, jm as f64 - frac);
    let zp = hurwitz_zeta_shifted(s, ap)?;
    let zm = hurwitz_zeta_shifted(s, am)?;
    let ts = real_pow_complex(t, -s);
    let v = ts * (zp + zm);
    Ok((v, 1e-12 * ts.norm() * (zp.norm() + zm.norm())))
}

/// Eta-type ladder tail: sign-weighted version of `ladder_zeta_tail`;
/// exactly zero at frac = 0 where the wings mirror each other.
pub(crate) fn ladder_eta_tail(
    s: Complex64,
    t: f64,
    frac: f64,
    cutoff: i64,
) -> Result<(Complex64, f64), RegularizeError> {
    if tail_contains_kernel(&TailSpec::Ladder { t, frac, cutoff }) {
        return Err(kernel_in_tail_error());
    }
    let (jp, jm) = side_starts(cutoff);
    let (ap, am) = (jp as f64 + frac, jm as f64 - frac);
    let zp = hurwitz_zeta_shifted(s, ap)?;
    let zm = hurwitz_zeta_shifted(s, am)?;
    let ts = real_pow_complex(t, -s);
    let v = ts * (zp - zm);
    Ok((v, 1e-12 * ts.norm() * (zp.norm() + zm.norm())))
}

/// Zeta-type tail of a constant-flux total space: the box complement is
/// split into full columns (closed by the Poisson leading term plus
/// exponentially small remainders) and the row overhangs of the interior
/// columns (one-dimensional Euler-Maclaurin tails).
pub(crate) fn constant_family_zeta_tail(
    s: Complex64,
    t: f64,
    frac: f64,
    k_cutoff: i64,
    m_cutoff: i64,
) -> Result<(Complex64, f64), RegularizeError> {
    if tail_contains_kernel(&TailSpec::ConstantFamily {
        t,
        frac,
        k_cutoff,
        m_cutoff,
    }) {
        return Err(kernel_in_tail_error());
    }
    let mut value = CAcc::new();
    let mut err = 0.0;
    // Full columns |k| > k_cutoff: leading Poisson terms sum to Hurwitz
    // zetas of s - 1 across both wings.
    let (jp0, jm0) = side_starts(k_cutoff);
    let zsum = hurwitz_zeta_shifted(s - 1.0, jp0 as f64 + frac)?
        + hurwitz_zeta_shifted(s - 1.0, jm0 as f64 - frac)?;
    let closed = 4.0 * c0_factor(s)? * zsum / t;
    value.add(closed);
    err += 1e-12 * closed.norm();
    // Poisson remainders per column decay like exp(-2 pi q / t); march
    // outward until they die and bound the rest geometrically.
    let ratio = (-2.0 * PI / t).exp().min(0.9);
    let mut last = f64::INFINITY;
    let mut converged = false;
    for step in 0..400 {
        let qp = (jp0 + step) as f64 + frac;
        let qm = (jm0 + step) as f64 - frac;
        let (sp, bp) = s_full(s, t, qp)?;
        let rp = sp - d_line(s, t, qp)?;
        let (sm, bm) = s_full(s, t, qm)?;
        let rm = sm - d_line(s, t, qm)?;
        value.add(2.0 * rp);
        value.add(2.0 * rm);
        err += 2.0 * (bp + bm) + 1e-13 * (sp.norm() + sm.norm());
        last = rp.norm().max(rm.norm());
        if last < 1e-16 * (1.0 + value.value().norm()) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(RegularizeError::NonConvergence(
            "column Poisson remainders did not reach the stopping floor".into(),
        ));
    }
    err += 4.0 * last * ratio / (1.0 - ratio);
    // Row overhangs of interior columns |k| <= k_cutoff.
    if k_cutoff >= 0 {
        for k in -k_cutoff..=k_cutoff {
            let q = (k as f64 + frac).abs();
            if m_cutoff >= 0 {
                if q == 0.0 {
                    let z = hurwitz_zeta_shifted(s, (m_cutoff + 1) as f64)?;
                    let v = 4.0 * real_pow_complex(t, -s) * z;
                    value.add(v);
                    err += 1e-12 * v.norm();
                } else {
                    let (v, b) = one_dim_tail(s, t, q, m_cutoff + 1)?;
                    value.add(4.0 * v);
                    err += 4.0 * b;
                }
            } else {
                // Empty row window: the whole column is tail. q > 0 here
                // because a zero column would be a kernel mode in the tail.
                let (v, b) = s_full(s, t, q)?;
                value.add(2.0 * v);
                err += 2.0 * b;
            }
        }
    }
    Ok((value.value(), err))
}

/// Tail of the zeta-type sum for any descriptor.
pub(crate) fn zeta_tail(
    s: Complex64,
    tail: &TailSpec,
) -> Result<(Complex64, f64), RegularizeError> {
    match *tail {
        TailSpec::None => Ok((Complex64::default(), 0.0)),
        TailSpec::Ladder { t, frac, cutoff } => ladder_zeta_tail(s, t, frac, cutoff),
        TailSpec::ConstantFamily {
            t,
            frac,
            k_cutoff,
            m_cutoff,
        } => constant_family_zeta_tail(s, t, frac, k_cutoff, m_cutoff),
    }
}

/// Tail of the eta-type sum. The constant-family tail vanishes exactly:
/// beyond a symmetric box the lattice pairs +-lambda.
pub(crate) fn eta_tail(
    s: Complex64,
    tail: &TailSpec,
) -> Result<(Complex64, f64), RegularizeError> {
    match *tail {
        TailSpec::None => Ok((Complex64::default(), 0.0)),
        TailSpec::Ladder { t, frac, cutoff } => ladder_eta_tail(s, t, frac, cutoff),
        TailSpec::ConstantFamily { .. } => {
            if tail_contains_kernel(tail) {
                return Err(kernel_in_tail_error());
            }
            Ok((Complex64::default(), 0.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn brute_theta(x: f64, f: f64) -> f64 {
        let mut acc = Accumulator::new();
        for k in (-60..=60i64).rev() {
            let y = k as f64 + f;
            acc.add((-x * y * y).exp());
        }
        acc.value()
    }

    fn brute_s1(x: f64, f: f64) -> f64 {
        let mut acc = Accumulator::new();
        for k in (-60..=60i64).rev() {
            let y = k as f64 + f;
            acc.add(y * (-x * y * y).exp());
        }
        acc.value()
    }

    #[test]
    fn theta_both_branches_match_brute_force() {
        for &x in &[0.4, 1.0, 2.9, 3.1, 6.0] {
            for &f in &[0.0, 0.25, 0.37, 0.5, 1.0] {
                let got = theta_shifted(x, f);
                let want = brute_theta(x, f);
                assert!(
                    (got - want).abs() <= 1e-13 * want.abs() + 1e-15,
                    "theta({x}, {f}): got {got}, brute {want}"
                );
            }
        }
    }

    #[test]
    fn s1_both_branches_match_brute_force() {
        for &x in &[0.4, 1.0, 2.9, 3.1, 6.0] {
            for &f in &[0.1, 0.25, 0.37, 0.8] {
                let got = s1_shifted(x, f);
                let want = brute_s1(x, f);
                assert!(
                    (got - want).abs() <= 1e-13 * (1.0 + want.abs()),
                    "S1({x}, {f}): got {got}, brute {want}"
                );
            }
        }
        // Integer and half-integer flux kill the sum exactly.
        assert_eq!(s1_shifted(0.7, 0.0), 0.0);
        assert_eq!(s1_shifted(4.0, 1.0), 0.0);
        assert!(s1_shifted(5.0, 0.5).abs() < 1e-18);
        // Antisymmetry under f -> 1 - f.
        let plus = s1_shifted(1.3, 0.3);
        let minus = s1_shifted(1.3, 0.7);
        assert!((plus + minus).abs() < 1e-15 * plus.abs());
    }

    #[test]
    fn one_dim_tail_matches_long_direct_sum() {
        let s = c64(3.0, 0.4);
        let (c, q, a) = (0.7, 1.3, 2i64);
        let mut brute = CAcc::new();
        for m in (a..500_000).rev() {
            let x = m as f64;
            brute.add(real_pow_complex(c * c * x * x + q * q, -s / 2.0));
        }
        let want = brute.value();
        let (got, bound) = one_dim_tail(s, c, q, a).unwrap();
        // The brute sum itself is truncated at 5e5; allow for that too.
        let brute_cut = 2e-11;
        assert!(
            (got - want).norm() <= bound + 1e-10 * want.norm() + brute_cut,
            "tail {got}, brute {want}, bound {bound}"
        );
    }

    #[test]
    fn one_dim_tail_reduces_to_hurwitz_on_the_axis() {
        let s = c64(4.2, -0.3);
        let (v, _) = one_dim_tail(s, 0.6, 0.0, 5).unwrap();
        let want = real_pow_complex(0.6, -s) * hurwitz_zeta_shifted(s, 5.0).unwrap();
        assert!((v - want).norm() <= 1e-12 * want.norm());
    }

    #[test]
    fn ladder_tails_match_long_direct_sums() {
        let s = c64(3.5, 0.0);
        let (t, frac, cutoff) = (0.8, 0.3, 4i64);
        let mut zeta = Accumulator::new();
        let mut eta = Accumulator::new();
        for k in (-200_000..=200_000i64).rev() {
            if k.abs() <= cutoff {
                continue;
            }
            let lam = t * (k as f64 + frac);
            let p = lam.abs().powf(-s.re);
            zeta.add(p);
            eta.add(lam.signum() * p);
        }
        let (zv, _) = ladder_zeta_tail(s, t, frac, cutoff).unwrap();
        let (ev, _) = ladder_eta_tail(s, t, frac, cutoff).unwrap();
        assert!((zv.re - zeta.value()).abs() <= 1e-10 * zeta.value().abs() + 1e-11);
        assert!((ev.re - eta.value()).abs() <= 1e-10 * eta.value().abs().max(1.0) + 1e-11);
        assert!(zv.im.abs() < 1e-15 && ev.im.abs() < 1e-15);
    }

    #[test]
    fn ladder_tail_with_empty_window_covers_every_mode() {
        // cutoff = -1 splits the integers into the two wings k >= 0 and
        // k <= -1; the closed form must reproduce the full lattice sum.
        let s = c64(4.0, 0.0);
        let (t, frac) = (1.3, 0.25);
        let mut brute = Accumulator::new();
        for k in (-200_000..=200_000i64).rev() {
            brute.add((t * (k as f64 + frac)).abs().powf(-4.0));
        }
        let (v, _) = ladder_zeta_tail(s, t, frac, -1).unwrap();
        assert!((v.re - brute.value()).abs() <= 1e-10 * brute.value());
    }

    #[test]
    fn constant_family_tail_matches_box_complement() {
        let s = c64(5.0, 0.0);
        let (t, frac, kc, mc) = (0.8, 0.3, 2i64, 3i64);
        let half = 1500i64;
        let mut brute = Accumulator::new();
        for k in -half..=half {
            for m in -half..=half {
                if k.abs() <= kc && m.abs() <= mc {
                    continue;
                }
                let lam2 = t * t * (m * m) as f64 + (k as f64 + frac).powi(2);
                brute.add(2.0 * lam2.powf(-s.re / 2.0));
            }
        }
        let want = brute.value();
        let (got, err) = constant_family_zeta_tail(s, t, frac, kc, mc).unwrap();
        // Brute truncation at the half-width box is ~2e-9 absolute.
        assert!(
            (got.re - want).abs() <= 1e-8 * want + err + 3e-9,
            "tail {} vs brute {want}, err {err}",
            got.re
        );
        assert!(got.im.abs() < 1e-12);
    }

    #[test]
    fn constant_family_tail_with_empty_window() {
        // k_cutoff = m_cutoff = -1: the tail is the entire lattice.
        let s = c64(5.0, 0.0);
        let (t, frac) = (1.0, 0.5);
        let half = 1500i64;
        let mut brute = Accumulator::new();
        for k in -half..=half {
            for m in -half..=half {
                let lam2 = t * t * (m * m) as f64 + (k as f64 + frac).powi(2);
                brute.add(2.0 * lam2.powf(-2.5));
            }
        }
        let want = brute.value();
        let (got, err) = constant_family_zeta_tail(s, t, frac, -1, -1).unwrap();
        assert!(
            (got.re - want).abs() <= 1e-8 * want + err + 3e-9,
            "tail {} vs brute {want}",
            got.re
        );
    }

    #[test]
    fn kernel_in_tail_is_rejected() {
        // Integer flux with the zero mode outside the window.
        assert!(ladder_zeta_tail(c64(3.0, 0.0), 1.0, 0.0, -1).is_err());
        assert!(constant_family_zeta_tail(c64(3.0, 0.0), 1.0, 1.0, 3, -1).is_err());
        assert!(eta_tail(
            c64(3.0, 0.0),
            &TailSpec::ConstantFamily {
                t: 1.0,
                frac: 0.0,
                k_cutoff: -1,
                m_cutoff: 2
            }
        )
        .is_err());
        // Same flux with the mode inside the window is fine.
        assert!(ladder_zeta_tail(c64(3.0, 0.0), 1.0, 0.0, 2).is_ok());
    }

    #[test]
    fn window_counts_track_kernel_sites() {
        assert_eq!(required_nonzero(&TailSpec::None), None);
        let ladder = TailSpec::Ladder {
            t: 1.0,
            frac: 0.3,
            cutoff: 4,
        };
        assert_eq!(required_nonzero(&ladder), Some(9));
        let ladder_int = TailSpec::Ladder {
            t: 1.0,
            frac: 1.0,
            cutoff: 4,
        };
        assert_eq!(required_nonzero(&ladder_int), Some(8));
        let family = TailSpec::ConstantFamily {
            t: 0.5,
            frac: 0.25,
            k_cutoff: 2,
            m_cutoff: 1,
        };
        assert_eq!(required_nonzero(&family), Some(30));
        let family_int = TailSpec::ConstantFamily {
            t: 0.5,
            frac: 0.0,
            k_cutoff: 2,
            m_cutoff: 1,
        };
        assert_eq!(required_nonzero(&family_int), Some(28));
    }
}
