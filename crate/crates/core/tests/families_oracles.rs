//! Cross-checks for the family layer against routes that do not share code
//! with the library: raw spectral sums with integral tail corrections,
//! classical trigonometric closed forms, Abel-smoothed sums and dense SVDs.

use adlim_core::families::{
    fiber_eta_bar, fiber_spectrum, fiber_zeta_bar, parse_family, serialize_family, stabilize,
    tr_w_abs, tr_zeta_abs, FamilySpec, FluxFamily,
};
use adlim_core::numerics::quad::periodic_trapezoid_real;
use adlim_core::numerics::sum::sum_complex_ascending;
use adlim_core::specfun::gamma;
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn cpow(base: f64, expo: Complex64) -> Complex64 {
    // base > 0
    (expo * base.ln()).exp()
}

/// Sum_{k >= 0} (k + a)^{-s} by direct summation with a midpoint integral
/// tail; trustworthy for Re(s) >= 2.5 or so.
fn one_sided_sum(s: Complex64, a: f64, n_terms: usize) -> Complex64 {
    let terms: Vec<Complex64> = (0..n_terms).map(|k| cpow(k as f64 + a, -s)).collect();
    let edge = n_terms as f64 + a - 0.5;
    let tail = cpow(edge, Complex64::new(1.0, 0.0) - s) / (s - 1.0);
    sum_complex_ascending(&terms) + tail
}

/// Direct-sum oracle for the normalized zeta of a flux fiber with
/// fractional part `f` in (0, 1) and no kernel.
fn zeta_bar_direct(s: Complex64, f: f64) -> Complex64 {
    let w = gamma(s / 2.0).unwrap();
    w * (one_sided_sum(s, f, 4000) + one_sided_sum(s, 1.0 - f, 4000))
}

/// Direct-sum oracle for the normalized eta of a flux fiber.
fn eta_bar_direct(s: Complex64, f: f64) -> Complex64 {
    let w = gamma((s + 1.0) / 2.0).unwrap() / PI.sqrt();
    w * (one_sided_sum(s, f, 4000) - one_sided_sum(s, 1.0 - f, 4000))
}

/// Abel-summation oracle for the zeta-regularized trace of |D| on a flux
/// fiber: S(eps) = sum |n+f| e^{-eps|n+f|} = 2/eps^2 + Tr + O(eps^2), with
/// a purely even error series, extrapolated in eps^2.
fn tr_abs_abel(f: f64) -> f64 {
    let sample = |eps: f64| -> f64 {
        let mut acc = 0.0f64;
        let mut comp = 0.0f64;
        // Two one-sided lattices {k+f} and {k+1-f}, summed until negligible.
        for a in [f, 1.0 - f] {
            let mut k = 0usize;
            loop {
                let lam = k as f64 + a;
                let term = lam * (-eps * lam).exp();
                let y = term - comp;
                let t = acc + y;
                comp = (t - acc) - y;
                acc = t;
                k += 1;
                if lam > 60.0 / eps {
                    break;
                }
            }
        }
        acc - 2.0 / (eps * eps)
    };
    // Lagrange extrapolation to eps^2 = 0 through three samples.
    let eps = [0.1, 0.05, 0.025];
    let xs: Vec<f64> = eps.iter().map(|e| e * e).collect();
    let ys: Vec<f64> = eps.iter().map(|&e| sample(e)).collect();
    let mut out = 0.0;
    for i in 0..3 {
        let mut w = 1.0;
        for j in 0..3 {
            if i != j {
                w *= xs[j] / (xs[j] - xs[i]);
            }
        }
        out += w * ys[i];
    }
    out
}

fn flux_family(modes: Vec<(i64, Complex64)>, winding: i64) -> FamilySpec {
    FamilySpec::Flux(FluxFamily::new(modes, winding, 32).unwrap())
}

fn to_nalgebra(m: &adlim_core::linalg::CMatrix) -> nalgebra::DMatrix<Complex64> {
    nalgebra::DMatrix::from_fn(m.n_rows(), m.n_cols(), |i, j| m[(i, j)])
}

#[test]
fn zeta_bar_matches_direct_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0101);
    let fam = flux_family(
        vec![
            (0, c(0.31, 0.0)),
            (1, c(0.05, -0.04)),
            (-1, c(0.05, 0.04)),
        ],
        0,
    );
    let FamilySpec::Flux(flux) = &fam else { unreachable!() };
    for _ in 0..20 {
        let theta = rng.gen::<f64>() * TAU;
        let s = c(3.0 + 3.0 * rng.gen::<f64>(), 8.0 * rng.gen::<f64>() - 4.0);
        let (frac, ker) = flux.frac_and_kernel(theta);
        assert_eq!(ker, 0);
        let ours = fiber_zeta_bar(&fam, theta, s).unwrap();
        let oracle = zeta_bar_direct(s, frac);
        assert!(
            (ours - oracle).norm() < 1e-8 * oracle.norm().max(1.0),
            "theta={theta} s={s}: {ours} vs {oracle}"
        );
    }
}

#[test]
fn eta_bar_matches_direct_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0102);
    let fam = flux_family(vec![(0, c(0.27, 0.0)), (2, c(0.0, -0.03)), (-2, c(0.0, 0.03))], 0);
    let FamilySpec::Flux(flux) = &fam else { unreachable!() };
    for _ in 0..20 {
        let theta = rng.gen::<f64>() * TAU;
        let s = c(3.0 + 3.0 * rng.gen::<f64>(), 8.0 * rng.gen::<f64>() - 4.0);
        let (frac, _) = flux.frac_and_kernel(theta);
        let ours = fiber_eta_bar(&fam, theta, s).unwrap();
        let oracle = eta_bar_direct(s, frac);
        assert!(
            (ours - oracle).norm() < 1e-8 * oracle.norm().max(1.0),
            "theta={theta} s={s}: {ours} vs {oracle}"
        );
    }
}

#[test]
fn zeta_bar_trigonometric_closed_forms() {
    // sum_{n in Z} (n+f)^{-2} = pi^2 / sin^2(pi f) and
    // sum_{n in Z} (n+f)^{-4} = pi^4 (1 + 2cos^2(pi f)) / (3 sin^4(pi f)).
    for f in [0.5, 0.25, 0.1, 0.8] {
        let fam = flux_family(vec![(0, c(f, 0.0))], 0);
        let s2 = fiber_zeta_bar(&fam, 0.0, c(2.0, 0.0)).unwrap();
        let sin = (PI * f).sin();
        let expect2 = PI * PI / (sin * sin);
        assert!((s2.re - expect2).abs() < 1e-9 * expect2, "f={f}");
        let s4 = fiber_zeta_bar(&fam, 0.0, c(4.0, 0.0)).unwrap();
        let cos = (PI * f).cos();
        // Gamma(2) = 1, so the bare lattice sum carries through.
        let expect4 = PI.powi(4) * (1.0 + 2.0 * cos * cos) / (3.0 * sin.powi(4));
        assert!((s4.re - expect4).abs() < 1e-9 * expect4, "f={f}");
    }
}

#[test]
fn eta_bar_quarter_flux_catalan() {
    // Signed lattice sum at s = 2 for flux 1/4:
    // psi'(1/4) - psi'(3/4) = 16 K, weighted by Gamma(3/2)/sqrt(pi) = 1/2.
    const CATALAN: f64 = 0.915_965_594_177_219_0;
    let fam = flux_family(vec![(0, c(0.25, 0.0))], 0);
    let v = fiber_eta_bar(&fam, 0.0, c(2.0, 0.0)).unwrap();
    assert!((v.re - 8.0 * CATALAN).abs() < 1e-11, "{v}");
    assert!(v.im.abs() < 1e-13);
}

#[test]
fn eta_bar_odd_under_flux_reflection() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0103);
    for _ in 0..12 {
        let f = 0.05 + 0.9 * rng.gen::<f64>();
        let s = c(1.0 + 2.0 * rng.gen::<f64>(), 2.0 * rng.gen::<f64>() - 1.0);
        let a = flux_family(vec![(0, c(f, 0.0))], 0);
        let b = flux_family(vec![(0, c(1.0 - f, 0.0))], 0);
        let va = fiber_eta_bar(&a, 1.0, s).unwrap();
        let vb = fiber_eta_bar(&b, 1.0, s).unwrap();
        assert!((va + vb).norm() < 1e-10 * va.norm().max(1.0), "f={f} s={s}");
    }
}

#[test]
fn tr_abs_matches_abel_summation() {
    for f in [0.5, 0.25, 0.37, 0.91] {
        let fam = flux_family(vec![(0, c(f, 0.0))], 0);
        let ours = tr_zeta_abs(&fam, 0.0).unwrap();
        let oracle = tr_abs_abel(f);
        assert!((ours - oracle).abs() < 1e-7, "f={f}: {ours} vs {oracle}");
    }
}

#[test]
fn tr_w_vanishes_for_flux_fibers() {
    for f in [0.5, 0.25, 0.66] {
        let fam = flux_family(vec![(0, c(f, 0.0))], 0);
        let w = tr_w_abs(&fam, 0.0).unwrap();
        assert!(w.abs() < 1e-9, "f={f}: {w}");
    }
}

#[test]
fn stabilize_index_matches_flux_quadrature() {
    // Independent index oracle: the net winding is the loop integral of the
    // flux derivative.
    for (winding, a0) in [(1i64, 0.1), (-1, 0.1), (2, 0.1), (0, 0.5)] {
        let fam = flux_family(
            vec![(0, c(a0, 0.0)), (1, c(0.0, -0.01)), (-1, c(0.0, 0.01))],
            winding,
        );
        let FamilySpec::Flux(flux) = &fam else { unreachable!() };
        // flux(2pi) - flux(0) = winding, so the loop integral is c itself.
        let integral = periodic_trapezoid_real(&|th| flux.flux_prime(th), 512);
        let oracle = integral.round() as i64;
        assert_eq!(oracle, winding);
        let st = stabilize(&fam, 720).unwrap();
        assert_eq!(st.index(), oracle, "winding={winding}");
    }
}

#[test]
fn stabilized_min_singular_value_matches_dense_svd() {
    // Circle loop [cos, sin]: D_U is a rotation, so every singular value is
    // exactly 1; also cross-check our gram route against nalgebra's SVD.
    let text = r#"{"type": "matrix_loop", "rows": 1, "cols": 2,
        "fourier": [
          {"mode": 1, "entries": [[[0.5, 0.0], [0.0, -0.5]]]},
          {"mode": -1, "entries": [[[0.5, 0.0], [0.0, 0.5]]]}
        ]}"#;
    let fam = parse_family(text).unwrap();
    let st = stabilize(&fam, 720).unwrap();
    assert!((st.validated_min_singular_value - 1.0).abs() < 1e-9);
    for j in 0..37 {
        let th = TAU * j as f64 / 37.0;
        let du = to_nalgebra(&st.du_at(th));
        let svd = du.svd(false, false);
        let min_sv = svd
            .singular_values
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert!((min_sv - 1.0).abs() < 1e-9, "theta={th}");
    }

    // Winding flux: compare the validated minimum against a dense SVD scan.
    let fam = flux_family(vec![(0, c(0.1, 0.0))], 1);
    let st = stabilize(&fam, 720).unwrap();
    let mut dense_min = f64::INFINITY;
    for j in 0..720 {
        let th = TAU * j as f64 / 720.0;
        let du = to_nalgebra(&st.du_at(th));
        let svd = du.svd(false, false);
        dense_min = dense_min.min(
            svd.singular_values
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min),
        );
    }
    assert!(
        (st.validated_min_singular_value - dense_min).abs() < 1e-9 * dense_min.max(1.0),
        "{} vs {dense_min}",
        st.validated_min_singular_value
    );
}

#[test]
fn spectrum_is_periodic_up_to_relabeling() {
    // flux(theta + 2pi) = flux(theta) + c: the eigenvalue *set* repeats.
    let fam = flux_family(
        vec![(0, c(0.3, 0.0)), (1, c(0.0, -0.05)), (-1, c(0.0, 0.05))],
        1,
    );
    let a = fiber_spectrum(&fam, 0.7, 16);
    let b = fiber_spectrum(&fam, 0.7 + TAU, 16);
    // Interior eigenvalues match after shifting the mode window by c.
    for (x, y) in a.values.iter().skip(1).zip(b.values.iter()) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn io_round_trip_preserves_evaluations() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0104);
    for _ in 0..8 {
        let mut modes = vec![(0i64, c(rng.gen::<f64>() - 0.5, 0.0))];
        for m in 1..4i64 {
            let re = 0.2 * (rng.gen::<f64>() - 0.5);
            let im = 0.2 * (rng.gen::<f64>() - 0.5);
            modes.push((m, c(re, im)));
            modes.push((-m, c(re, -im)));
        }
        let winding = rng.gen_range(-2..3);
        let fam = flux_family(modes, winding);
        let again = parse_family(&serialize_family(&fam)).unwrap();
        let (FamilySpec::Flux(f1), FamilySpec::Flux(f2)) = (&fam, &again) else {
            unreachable!()
        };
        for j in 0..16 {
            let th = TAU * j as f64 / 16.0;
            assert!((f1.flux(th) - f2.flux(th)).abs() < 1e-15);
            assert!((f1.a_prime(th) - f2.a_prime(th)).abs() < 1e-15);
        }
    }
}
