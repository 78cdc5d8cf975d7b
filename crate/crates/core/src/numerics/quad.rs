//! Quadrature rules used across the crate: adaptive Simpson for oracle
//! integrals, periodic trapezoid for loop integrals over the base circle, and
//! composite Simpson on logarithmic grids for heat-trace integrals.

use num_complex::Complex64;

/// Adaptive Simpson on [a, b] to absolute tolerance `tol` (complex-valued).
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, tol: f64) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    simpson_step(f, a, b, fa, fm, fb, tol, 50)
}

fn simpson_rule(a: f64, b: f64, fa: Complex64, fm: Complex64, fb: Complex64) -> Complex64 {
    (fa + 4.0 * fm + fb) * ((b - a) / 6.0)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: Complex64,
    fm: Complex64,
    fb: Complex64,
    tol: f64,
    depth: u32,
) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let whole = simpson_rule(a, b, fa, fm, fb);
    let left = simpson_rule(a, m, fa, flm, fm);
    let right = simpson_rule(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.norm() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, 0.5 * tol, depth - 1)
    }
}

/// Real-valued adaptive Simpson.
pub fn adaptive_simpson_real<F>(f: &F, a: f64, b: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    adaptive_simpson(&|x| Complex64::new(f(x), 0.0), a, b, tol).re
}

/// Trapezoid rule for a 2*pi-periodic function sampled on `n` equispaced
/// points (spectrally accurate for analytic periodic integrands). Returns the
/// integral over [0, 2*pi).
pub fn periodic_trapezoid<F>(f: &F, n: usize) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let h = std::f64::consts::TAU / n as f64;
    let samples: Vec<Complex64> = (0..n).map(|j| f(j as f64 * h)).collect();
    crate::numerics::sum::sum_complex_ascending(&samples) * h
}

/// Real periodic trapezoid over [0, 2*pi).
pub fn periodic_trapezoid_real<F>(f: &F, n: usize) -> f64
where
    F: Fn(f64) -> f64,
{
    periodic_trapezoid(&|x| Complex64::new(f(x), 0.0), n).re
}

/// Composite Simpson of `f` over [a, b] after the substitution u = exp(v),
/// i.e. computes int_a^b f(u) du with logarithmically spaced nodes. `n` is the
/// number of (even) subintervals in v.
pub fn simpson_log_grid<F>(f: &F, a: f64, b: f64, n: usize) -> f64
where
    F: Fn(f64) -> f64,
{
    assert!(a > 0.0 && b > a);
    let n = if n % 2 == 0 { n } else { n + 1 };
    let va = a.ln();
    let vb = b.ln();
    let h = (vb - va) / n as f64;
    let g = |v: f64| {
        let u = v.exp();
        f(u) * u
    };
    let mut terms = Vec::with_capacity(n + 1);
    terms.push(g(va));
    for j in 1..n {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        terms.push(w * g(va + j as f64 * h));
    }
    terms.push(g(vb));
    crate::numerics::sum::sum_ascending_magnitude(&terms) * h / 3.0
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1],
/// computed by Newton iteration on Legendre polynomials.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Initial guess (Abramowitz-Stegun 25.4.45-ish).
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Legendre quadrature of `f` on [a, b] with `n` points.
pub fn gauss_legendre_integrate<F>(f: &F, a: f64, b: f64, n: usize) -> f64
where
    F: Fn(f64) -> f64,
{
    let (xs, ws) = gauss_legendre(n);
    let c = 0.5 * (b - a);
    let d = 0.5 * (b + a);
    let terms: Vec<f64> = xs
        .iter()
        .zip(ws.iter())
        .map(|(&x, &w)| w * f(c * x + d))
        .collect();
    crate::numerics::sum::sum_ascending_magnitude(&terms) * c
}
