//! Shared numerical utilities: compensated summation, quadrature rules,
//! incomplete gamma integrals and smooth bump profiles.

pub mod igamma;
pub mod quad;
pub mod sum;

/// Quintic smoothstep: 0 for x <= 0, 1 for x >= 1, C^2 monotone in between.
pub fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
    }
}

/// Plateau bump on the interval [lo, hi] with ramp width `ramp` at both ends.
/// Equals 1 on [lo+ramp, hi-ramp], 0 outside [lo, hi].
pub fn bump(x: f64, lo: f64, hi: f64, ramp: f64) -> f64 {
    debug_assert!(hi - lo > 2.0 * ramp);
    smoothstep((x - lo) / ramp) * smoothstep((hi - x) / ramp)
}

/// Wraps an angle into [0, 2*pi).
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut t = theta % two_pi;
    if t < 0.0 {
        t += two_pi;
    }
    t
}

/// Fractional part in [0, 1).
pub fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}
