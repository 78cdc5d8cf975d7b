//! Complex special functions and Laurent-coefficient extraction.
//!
//! Everything regularized in this crate bottoms out here: Gamma and digamma
//! (Lanczos with reflection), the Hurwitz zeta continuation (Euler-Maclaurin
//! with exact Bernoulli values at non-positive integers and a functional
//! equation branch deep in the left half-plane), the Gamma-ratio weight
//! f(s) = sqrt(pi) Gamma(s - 1/2) / Gamma(s), and contour extraction of
//! Laurent coefficients.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use thiserror::Error;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
pub const SQRT_PI: f64 = 1.772_453_850_905_516;

/// |s - pole| below this counts as on-pole.
pub const POLE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecFunError {
    /// Evaluation requested on a pole of the function.
    #[error("pole of order {order} at s = {location}")]
    Pole { location: Complex64, order: u32 },
    /// Contour coefficients moved under radius halving beyond tolerance.
    #[error("laurent coefficient of order {order} unstable under radius halving (rel. change {delta:.3e})")]
    NonConvergence { order: i32, delta: f64 },
}

/// Laurent data of a meromorphic function around `center`.
///
/// `coefficients` holds a contiguous order range; `radius_used` is the
/// contour radius that produced the stored values (after the halving check).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaurentExpansion {
    pub center: Complex64,
    pub coefficients: BTreeMap<i32, Complex64>,
    pub radius_used: f64,
}

impl LaurentExpansion {
    pub fn coefficient(&self, order: i32) -> Complex64 {
        self.coefficients
            .get(&order)
            .copied()
            .unwrap_or_else(|| Complex64::new(0.0, 0.0))
    }
}

// Lanczos g = 7, 9-term coefficient set (Godfrey's table); ~15 significant
// digits on the reflected half-plane boundary.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn near_nonpositive_integer(s: Complex64) -> Option<i64> {
    if s.im.abs() > POLE_EPS || s.re > 0.5 {
        return None;
    }
    let n = s.re.round();
    if n <= 0.0 && (s.re - n).abs() <= POLE_EPS {
        Some(n as i64)
    } else {
        None
    }
}

/// Principal-branch power with a positive real base.
pub fn real_pow_complex(base: f64, expo: Complex64) -> Complex64 {
    debug_assert!(base > 0.0);
    (expo * base.ln()).exp()
}

/// Gamma function on the complex plane (simple poles at 0, -1, -2, ...).
pub fn gamma(s: Complex64) -> Result<Complex64, SpecFunError> {
    if near_nonpositive_integer(s).is_some() {
        return Err(SpecFunError::Pole {
            location: s,
            order: 1,
        });
    }
    Ok(gamma_unchecked(s))
}

fn gamma_unchecked(s: Complex64) -> Complex64 {
    if s.re < 0.5 {
        // Reflection: Gamma(s) = pi / (sin(pi s) Gamma(1 - s)).
        let sin = (PI * s).sin();
        PI / (sin * gamma_unchecked(Complex64::new(1.0, 0.0) - s))
    } else {
        let z = s - 1.0;
        let mut x = Complex64::new(LANCZOS[0], 0.0);
        for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
            x += c / (z + i as f64);
        }
        let t = z + LANCZOS_G + 0.5;
        let sqrt_2pi = (2.0 * PI).sqrt();
        sqrt_2pi * ((z + 0.5) * t.ln()).exp() * (-t).exp() * x
    }
}

/// Gamma restricted to positive real arguments (fast path for tail formulas).
pub fn gamma_real(a: f64) -> f64 {
    assert!(
        a > 0.0 || (a - a.round()).abs() > POLE_EPS,
        "gamma_real: pole at {a}"
    );
    gamma_unchecked(Complex64::new(a, 0.0)).re
}

/// Constant Laurent coefficient of Gamma at the non-positive integer `s0`.
///
/// At s0 = -n the expansion is Gamma(s) = (-1)^n/n! [1/(s+n) + psi(n+1)] + O(s+n),
/// so the finite part is (-1)^n (H_n - gamma) / n!.
pub fn gamma_finite_part(s0: i64) -> Complex64 {
    assert!(s0 <= 0, "gamma_finite_part: argument must be <= 0");
    let n = (-s0) as u64;
    let mut harmonic = 0.0;
    let mut factorial = 1.0;
    for k in 1..=n {
        harmonic += 1.0 / k as f64;
        factorial *= k as f64;
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    Complex64::new(sign * (harmonic - EULER_GAMMA) / factorial, 0.0)
}

// B_{2k} / (2k) for the digamma asymptotic series.
const DIGAMMA_TAIL: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
];

/// Digamma psi(s) = Gamma'(s)/Gamma(s).
pub fn digamma(s: Complex64) -> Result<Complex64, SpecFunError> {
    if near_nonpositive_integer(s).is_some() {
        return Err(SpecFunError::Pole {
            location: s,
            order: 1,
        });
    }
    Ok(digamma_unchecked(s))
}

fn digamma_unchecked(s: Complex64) -> Complex64 {
    if s.re < 0.5 {
        // psi(s) = psi(1 - s) - pi cot(pi s)
        let cot = ((PI * s).cos()) / ((PI * s).sin());
        return digamma_unchecked(Complex64::new(1.0, 0.0) - s) - PI * cot;
    }
    let mut z = s;
    let mut acc = Complex64::new(0.0, 0.0);
    while z.re < 10.0 {
        acc -= 1.0 / z;
        z += 1.0;
    }
    let inv2 = 1.0 / (z * z);
    let mut tail = Complex64::new(0.0, 0.0);
    let mut p = inv2;
    for &c in DIGAMMA_TAIL.iter() {
        tail += c * p;
        p *= inv2;
    }
    acc + z.ln() - 0.5 / z - tail
}

// Even-index Bernoulli numbers B_2 .. B_20.
const BERNOULLI_EVEN: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

fn bernoulli_number(k: usize) -> f64 {
    match k {
        0 => 1.0,
        1 => -0.5,
        _ if k % 2 == 1 => 0.0,
        _ => {
            assert!(k / 2 <= BERNOULLI_EVEN.len(), "Bernoulli number B_{k} not tabulated");
            BERNOULLI_EVEN[k / 2 - 1]
        }
    }
}

/// Bernoulli polynomial B_n(a) = sum_k C(n,k) B_k a^{n-k}, for n <= 21.
pub fn bernoulli_poly(n: usize, a: f64) -> f64 {
    let mut binom = 1.0;
    let mut terms = Vec::with_capacity(n + 1);
    for k in 0..=n {
        // binom = C(n, k), updated incrementally.
        terms.push(binom * bernoulli_number(k) * a.powi((n - k) as i32));
        binom *= (n - k) as f64 / (k + 1) as f64;
    }
    crate::numerics::sum::sum_ascending_magnitude(&terms)
}

/// Hurwitz zeta for `a` in (0, 1]; analytic continuation, simple pole at s=1.
pub fn hurwitz_zeta(s: Complex64, a: f64) -> Result<Complex64, SpecFunError> {
    assert!(a > 0.0 && a <= 1.0, "hurwitz_zeta: a must lie in (0, 1]");
    hurwitz_zeta_shifted(s, a)
}

/// Internal shifted representation of the Hurwitz zeta: any real `a > 0`.
///
/// Exposed so the downward recursion zeta_H(s, a) = zeta_H(s, a+1) + a^{-s}
/// can be exercised directly. Branch selection: exact Bernoulli values at
/// non-positive integer s; the Hurwitz functional equation for Re(s) < -3
/// (where the Euler-Maclaurin principal sum would cancel catastrophically);
/// Euler-Maclaurin with N = 25 interior terms and tail through B_14 elsewhere.
pub fn hurwitz_zeta_shifted(s: Complex64, a: f64) -> Result<Complex64, SpecFunError> {
    assert!(a > 0.0, "hurwitz_zeta_shifted: a must be positive");
    if (s - Complex64::new(1.0, 0.0)).norm() <= POLE_EPS {
        return Err(SpecFunError::Pole {
            location: s,
            order: 1,
        });
    }
    // Exact values at non-positive integers: zeta_H(-n, a) = -B_{n+1}(a)/(n+1).
    if s.im.abs() <= POLE_EPS && s.re <= 0.5 {
        let n = -s.re.round();
        if (s.re + n).abs() <= POLE_EPS && (0.0..=20.0).contains(&n) {
            let n = n as usize;
            return Ok(Complex64::new(
                -bernoulli_poly(n + 1, a) / (n + 1) as f64,
                0.0,
            ));
        }
    }
    if s.re < -3.0 {
        if a <= 1.0 {
            return Ok(hurwitz_reflected(s, a));
        }
        // Shift into (0, 1] first, then add back the finitely many terms.
        let shift = (a - 1.0).ceil();
        let base = a - shift;
        let mut v = hurwitz_reflected(s, if base <= 0.0 { base + 1.0 } else { base });
        let start = if base <= 0.0 { base + 1.0 } else { base };
        let mut x = start;
        while x < a - 0.5 {
            v -= real_pow_complex(x, -s);
            x += 1.0;
        }
        return Ok(v);
    }
    Ok(hurwitz_euler_maclaurin(s, a))
}

const EM_INTERIOR: usize = 25;
const EM_BERNOULLI_ORDERS: usize = 7; // tail through B_14

fn hurwitz_euler_maclaurin(s: Complex64, a: f64) -> Complex64 {
    let n = EM_INTERIOR as f64;
    let mut terms: Vec<Complex64> = (0..EM_INTERIOR)
        .map(|k| real_pow_complex(k as f64 + a, -s))
        .collect();
    let edge = n + a;
    // Integral term + half-weight edge term.
    terms.push(real_pow_complex(edge, Complex64::new(1.0, 0.0) - s) / (s - 1.0));
    terms.push(0.5 * real_pow_complex(edge, -s));
    // Asymptotic corrections B_{2k}/(2k)! * (s)_{2k-1} * edge^{-s-2k+1}.
    let mut pochhammer = s;
    let mut factorial = 1.0;
    for k in 1..=EM_BERNOULLI_ORDERS {
        factorial *= (2 * k - 1) as f64 * (2 * k) as f64; // (2k)!
        let b2k = BERNOULLI_EVEN[k - 1];
        let expo = Complex64::new(1.0 - 2.0 * k as f64, 0.0) - s;
        terms.push(b2k / factorial * pochhammer * real_pow_complex(edge, expo));
        pochhammer *= (s + (2 * k - 1) as f64) * (s + (2 * k) as f64);
    }
    crate::numerics::sum::sum_complex_ascending(&terms)
}

/// Functional-equation branch for Re(s) < -3, 0 < a <= 1:
/// zeta_H(s,a) = 2 Gamma(1-s)/(2pi)^{1-s} [sin(pi s/2) C + cos(pi s/2) S]
/// with C = sum cos(2 pi n a) n^{s-1}, S = sum sin(2 pi n a) n^{s-1}.
fn hurwitz_reflected(s: Complex64, a: f64) -> Complex64 {
    let one_minus_s = Complex64::new(1.0, 0.0) - s;
    let mut c_terms = Vec::new();
    let mut s_terms = Vec::new();
    let p = one_minus_s.re; // > 4 in this branch
    for n in 1..20_000usize {
        let nf = n as f64;
        let w = real_pow_complex(nf, -one_minus_s);
        let phase = TAU * nf * a;
        c_terms.push(phase.cos() * w);
        s_terms.push(phase.sin() * w);
        // Crude tail bound sum_{m>n} m^{-p} <= n^{1-p}/(p-1).
        if nf.powf(1.0 - p) / (p - 1.0) < 1e-18 {
            break;
        }
    }
    let c = crate::numerics::sum::sum_complex_ascending(&c_terms);
    let sn = crate::numerics::sum::sum_complex_ascending(&s_terms);
    let half = 0.5 * PI * s;
    let prefactor = 2.0 * gamma_unchecked(one_minus_s) * real_pow_complex(TAU, -one_minus_s);
    prefactor * (half.sin() * c + half.cos() * sn)
}

/// Riemann zeta, as the a = 1 Hurwitz specialization.
pub fn riemann_zeta(s: Complex64) -> Result<Complex64, SpecFunError> {
    hurwitz_zeta(s, 1.0)
}

/// expm1(w)/w, stable for small |w|.
fn expm1_over(w: Complex64) -> Complex64 {
    if w.norm() < 0.25 {
        // Truncated exponential series; relative error below 1e-16 here.
        let mut acc = Complex64::new(1.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for k in 2..=12 {
            term *= w / k as f64;
            acc += term;
        }
        acc
    } else {
        (w.exp() - 1.0) / w
    }
}

/// zeta_H(s, a) - zeta_H(s, b) with the simple pole at s = 1 cancelled
/// analytically, so the difference is entire in s. Both offsets must be
/// positive. Used for eta-type signed sums, which stay finite at s = 1.
pub fn hurwitz_zeta_diff(s: Complex64, a: f64, b: f64) -> Result<Complex64, SpecFunError> {
    assert!(a > 0.0 && b > 0.0, "hurwitz_zeta_diff: offsets must be positive");
    if a == b {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if (s - Complex64::new(1.0, 0.0)).norm() >= 0.25 {
        return Ok(hurwitz_zeta_shifted(s, a)? - hurwitz_zeta_shifted(s, b)?);
    }
    // Euler-Maclaurin on the difference. Only the integral terms
    // (N+.)^{1-s}/(s-1) are singular; their combination
    //   [(N+a)^{1-s} - (N+b)^{1-s}] / (s-1)
    // is regularized through expm1.
    let n = EM_INTERIOR as f64;
    let mut terms: Vec<Complex64> = (0..EM_INTERIOR)
        .map(|k| real_pow_complex(k as f64 + a, -s) - real_pow_complex(k as f64 + b, -s))
        .collect();
    let ea = n + a;
    let eb = n + b;
    let u = Complex64::new(1.0, 0.0) - s;
    let log_ratio = (ea / eb).ln();
    terms.push(-real_pow_complex(eb, u) * log_ratio * expm1_over(u * log_ratio));
    terms.push(0.5 * (real_pow_complex(ea, -s) - real_pow_complex(eb, -s)));
    let mut pochhammer = s;
    let mut factorial = 1.0;
    for k in 1..=EM_BERNOULLI_ORDERS {
        factorial *= (2 * k - 1) as f64 * (2 * k) as f64; // (2k)!
        let b2k = BERNOULLI_EVEN[k - 1];
        let expo = Complex64::new(1.0 - 2.0 * k as f64, 0.0) - s;
        let pair = real_pow_complex(ea, expo) - real_pow_complex(eb, expo);
        terms.push(b2k / factorial * pochhammer * pair);
        pochhammer *= (s + (2 * k - 1) as f64) * (s + (2 * k) as f64);
    }
    Ok(crate::numerics::sum::sum_complex_ascending(&terms))
}

/// The Gamma-ratio weight f(s) = sqrt(pi) Gamma(s - 1/2) / Gamma(s).
///
/// Poles at s in {1/2, -1/2, -3/2, ...}; at non-positive integers the
/// Gamma(s) pole in the denominator wins and f vanishes.
pub fn f_weight(s: Complex64) -> Result<Complex64, SpecFunError> {
    let half_shift = s - 0.5;
    if near_nonpositive_integer(half_shift).is_some() {
        return Err(SpecFunError::Pole {
            location: s,
            order: 1,
        });
    }
    if near_nonpositive_integer(s).is_some() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(SQRT_PI * gamma_unchecked(half_shift) / gamma_unchecked(s))
}

/// Contour-integral Laurent coefficients of `f` around `z` for orders
/// `k_min..=k_max`, with a mandatory radius-halving stability check.
///
/// Near-zero coefficients are compared absolutely (deviation measured
/// against max(1, |c|)); otherwise the 1e-6 relative gate applies.
pub fn laurent_coefficients<F>(
    f: F,
    z: Complex64,
    k_min: i32,
    k_max: i32,
    radius: f64,
) -> Result<LaurentExpansion, SpecFunError>
where
    F: Fn(Complex64) -> Complex64,
{
    assert!(k_min >= -2 && k_max >= k_min, "order range invalid");
    assert!(radius > 0.0);
    let coarse = contour_coefficients(&f, z, k_min, k_max, radius);
    let fine = contour_coefficients(&f, z, k_min, k_max, 0.5 * radius);
    for (idx, k) in (k_min..=k_max).enumerate() {
        let delta = (coarse[idx] - fine[idx]).norm() / fine[idx].norm().max(1.0);
        if delta > 1e-6 {
            return Err(SpecFunError::NonConvergence { order: k, delta });
        }
    }
    let mut coefficients = BTreeMap::new();
    for (idx, k) in (k_min..=k_max).enumerate() {
        coefficients.insert(k, fine[idx]);
    }
    Ok(LaurentExpansion {
        center: z,
        coefficients,
        radius_used: 0.5 * radius,
    })
}

const CONTOUR_SAMPLES: usize = 128;

fn contour_coefficients<F>(f: &F, z: Complex64, k_min: i32, k_max: i32, r: f64) -> Vec<Complex64>
where
    F: Fn(Complex64) -> Complex64,
{
    let samples: Vec<Complex64> = (0..CONTOUR_SAMPLES)
        .map(|j| {
            let theta = TAU * j as f64 / CONTOUR_SAMPLES as f64;
            f(z + Complex64::from_polar(r, theta))
        })
        .collect();
    (k_min..=k_max)
        .map(|k| {
            let terms: Vec<Complex64> = samples
                .iter()
                .enumerate()
                .map(|(j, &v)| {
                    let theta = TAU * j as f64 / CONTOUR_SAMPLES as f64;
                    v * Complex64::from_polar(r.powi(-k), -k as f64 * theta)
                })
                .collect();
            crate::numerics::sum::sum_complex_ascending(&terms) / CONTOUR_SAMPLES as f64
        })
        .collect()
}
