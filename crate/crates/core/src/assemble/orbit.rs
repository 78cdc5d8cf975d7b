//! Winding flux families: the fiber modes form orbits k -> k + c around the
//! base loop. Each orbit is realized on an enlarged theta-domain of length
//! 2*pi*N (N = orbit size inside the truncation window) carrying the symbol
//! v(T) = k0 + a(T mod 2pi) + c*T/(2pi). The periodic identification of
//! mode labels puts the label seam at |v| of order K, far above the energy
//! window, so low-lying spectra are unaffected.
//!
//! The derivative on the enlarged circle is the exact Fourier (spectral)
//! differentiation matrix, built directly from its symbol i*omega. Local
//! difference stencils are unusable here: any collocated antisymmetric
//! stencil has a spurious symbol zero at the zone edge and fills the energy
//! window with doubler copies of the spectrum, while a staggered two-field
//! pair leaves a seam-localized mode whose energy falls off like O(h). The
//! spectral derivative has a strictly monotone symbol and neither artifact.

use crate::families::FluxFamily;
use crate::linalg::{hermitian_eigenvalues, BandedSym, CMatrix, LinalgError};
use num_complex::Complex64;
use std::f64::consts::TAU;

/// Discretized orbit: grid data for one residue class of fiber modes.
#[derive(Debug, Clone)]
pub struct OrbitGrid {
    /// Smallest (c > 0) or largest (c < 0) mode in the orbit.
    pub base_mode: i64,
    /// Number of fiber modes merged into the enlarged domain.
    pub cell_count: usize,
    /// Grid points per original 2*pi cell.
    pub points_per_cell: usize,
    /// Grid spacing.
    pub h: f64,
    /// Adiabatic parameter.
    pub t: f64,
    /// Symbol samples v(T_i) at staggered nodes T_i = (i + 1/2) h.
    pub symbol: Vec<f64>,
    /// Symbol derivative v'(T_i), used by the kernel-counting operators.
    pub symbol_prime: Vec<f64>,
}

impl OrbitGrid {
    /// Nodes on the enlarged circle; the delta block acts on twice this many.
    pub fn len(&self) -> usize {
        self.symbol.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbol.is_empty()
    }
}

/// Split the truncated mode window |k| <= K into orbits of k -> k + c and
/// discretize each with 2M+1 points per cell.
pub fn orbit_grids(flux: &FluxFamily, t: f64, k_cutoff: usize, m_cutoff: usize) -> Vec<OrbitGrid> {
    let c = flux.winding;
    assert!(c != 0, "orbit reduction requires nonzero winding");
    let step = c.abs();
    let kk = k_cutoff as i64;
    let ppc = 2 * m_cutoff + 1;
    let mut grids = Vec::new();
    for r in 0..step {
        let mut modes: Vec<i64> = (-kk..=kk).filter(|k| (k - r).rem_euclid(step) == 0).collect();
        if modes.is_empty() {
            continue;
        }
        if c < 0 {
            modes.reverse();
        }
        let base_mode = modes[0];
        let n_cells = modes.len();
        let h = TAU / ppc as f64;
        let total = n_cells * ppc;
        let mut symbol = Vec::with_capacity(total);
        let mut symbol_prime = Vec::with_capacity(total);
        for i in 0..total {
            // Staggered nodes avoid placing a point exactly on the seam.
            let theta_big = (i as f64 + 0.5) * h;
            symbol.push(base_mode as f64 + flux.a(theta_big) + c as f64 * theta_big / TAU);
            symbol_prime.push(flux.flux_prime(theta_big));
        }
        grids.push(OrbitGrid {
            base_mode,
            cell_count: n_cells,
            points_per_cell: ppc,
            h,
            t,
            symbol,
            symbol_prime,
        });
    }
    grids
}

/// Circulant rows of the spectral first and second derivative on the
/// enlarged circle of g nodes: row_s[(j - i) mod g] is the (i, j) entry of
/// the matrix with exact symbol i*omega_k, and row_lap likewise for
/// -omega_k^2. The second derivative is built from its own symbol rather
/// than by squaring the first: on even grids the first-derivative symbol
/// must vanish at the Nyquist mode (its sine transform is zero there), and
/// squaring would leave that mode with no kinetic energy.
fn spectral_rows(g: usize, h: f64) -> (Vec<f64>, Vec<f64>) {
    let big_l = g as f64 * h;
    let base = TAU / big_l;
    let delta = TAU / g as f64;
    let k_max = (g - 1) / 2;
    let nyquist = if g % 2 == 0 { Some(0.5 * g as f64 * base) } else { None };
    let mut row_s = vec![0.0; g];
    let mut row_lap = vec![0.0; g];
    let mut lap0 = 0.0;
    for k in 1..=k_max {
        lap0 += 2.0 * (k as f64 * base).powi(2);
    }
    if let Some(w) = nyquist {
        lap0 += w * w;
    }
    row_lap[0] = -lap0 / g as f64;
    for d in 1..=g / 2 {
        let mut s_sum = 0.0;
        let mut l_sum = 0.0;
        for k in 1..=k_max {
            let w = k as f64 * base;
            let phase = k as f64 * d as f64 * delta;
            s_sum += w * phase.sin();
            l_sum += 2.0 * w * w * phase.cos();
        }
        if let Some(w) = nyquist {
            l_sum += w * w * if d % 2 == 0 { 1.0 } else { -1.0 };
        }
        row_s[d] = 2.0 * s_sum / g as f64;
        row_s[g - d] = -row_s[d];
        row_lap[d] = -l_sum / g as f64;
        row_lap[g - d] = row_lap[d];
    }
    if g % 2 == 0 {
        // d = g/2 was written twice with opposite signs; the entry is zero.
        row_s[g / 2] = 0.0;
    }
    (row_s, row_lap)
}

/// Eigenvalues of the periodic orbit block of delta_t, via the exact
/// reduction: with A = -i t S (S the spectral derivative) and V the real
/// symbol, [[A, V], [V, -A]] has spectrum +-sqrt(eig(M_red)) where
/// M_red = -t^2 S^2 + V^2 + t (S V - V S) is real symmetric.
pub fn delta_orbit_eigenvalues(grid: &OrbitGrid) -> Result<Vec<f64>, LinalgError> {
    let g = grid.len();
    let (row_s, row_lap) = spectral_rows(g, grid.h);
    let t2 = grid.t * grid.t;
    let mut m_red = CMatrix::zeros(g, g);
    for i in 0..g {
        for j in 0..g {
            let d = (j + g - i) % g;
            let mut val = -t2 * row_lap[d] + grid.t * row_s[d] * (grid.symbol[j] - grid.symbol[i]);
            if i == j {
                val += grid.symbol[i] * grid.symbol[i];
            }
            m_red[(i, j)] = Complex64::new(val, 0.0);
        }
    }
    let mu = hermitian_eigenvalues(&m_red)?;
    let mut out = Vec::with_capacity(2 * g);
    for &m in mu.iter().rev() {
        out.push(-m.max(0.0).sqrt());
    }
    for &m in &mu {
        out.push(m.max(0.0).sqrt());
    }
    Ok(out)
}

/// Materialize the full Hermitian orbit block [[-itS, V], [V, itS]].
/// Intended for small validation runs only.
pub fn delta_orbit_matrix(grid: &OrbitGrid) -> CMatrix {
    let g = grid.len();
    let (row_s, _) = spectral_rows(g, grid.h);
    let mut h = CMatrix::zeros(2 * g, 2 * g);
    for i in 0..g {
        let v = Complex64::new(grid.symbol[i], 0.0);
        h[(i, g + i)] = v;
        h[(g + i, i)] = v;
        for j in 0..g {
            let a = Complex64::new(0.0, -grid.t * row_s[(j + g - i) % g]);
            h[(i, j)] += a;
            h[(g + i, g + j)] -= a;
        }
    }
    h
}

/// 4th-order centered first-derivative weights: f'(x_i) ~
/// [-f_{i+2} + 8 f_{i+1} - 8 f_{i-1} + f_{i-2}] / (12h). Used only by the
/// chiral interval matrix below, which exists to exhibit the square
/// truncation's behavior; the periodic delta blocks never touch it.
fn stencil(h: f64) -> [(i64, f64); 4] {
    let w1 = 8.0 / (12.0 * h);
    let w2 = 1.0 / (12.0 * h);
    [(1, w1), (2, -w2), (-1, -w1), (-2, w2)]
}

/// Entries of the Dirichlet chiral matrix T = t S + V on the enlarged
/// interval (no wrap; couplings beyond the ends are dropped). `sign`
/// selects T (+1) or its formal adjoint -t S + V (-1).
fn chiral_entry(grid: &OrbitGrid, sign: f64, i: i64, j: i64) -> f64 {
    let g = grid.len() as i64;
    if i < 0 || j < 0 || i >= g || j >= g {
        return 0.0;
    }
    let mut val = if i == j { grid.symbol[i as usize] } else { 0.0 };
    for (o, w) in stencil(grid.h) {
        if j - i == o {
            val += sign * grid.t * w;
        }
    }
    val
}

/// Kernel and cokernel counts of the chiral operator on the orbit interval.
///
/// A square truncation of P cannot separate the two sides: its singular
/// values coincide with those of its transpose. The counts instead come
/// from the supersymmetric pair, discretized directly as second-order
/// Dirichlet operators:
///   P* P = -t^2 d^2/dT^2 + v^2 - t v',
///   P P* = -t^2 d^2/dT^2 + v^2 + t v'.
/// Each is banded (bandwidth 2); the count is the inertia below tau^2.
/// For a winding ramp the first well closes to an exponentially small
/// ground level (one per orbit) while the second stays above t |v'|,
/// reproducing the line index that the interval inherits.
pub fn chiral_kernel_counts(grid: &OrbitGrid, tau: f64) -> (usize, usize) {
    let g = grid.len();
    let t2 = grid.t * grid.t;
    let h2 = grid.h * grid.h;
    // 4th-order Laplacian stencil: [-1, 16, -30, 16, -1] / (12 h^2).
    let w0 = 30.0 / (12.0 * h2);
    let w1 = -16.0 / (12.0 * h2);
    let w2 = 1.0 / (12.0 * h2);
    let count = |sign: f64| -> usize {
        let mut m = BandedSym::zeros(g, 2);
        for i in 0..g {
            let potential = grid.symbol[i] * grid.symbol[i]
                + sign * grid.t * grid.symbol_prime[i];
            m.set(i, i, t2 * w0 + potential);
            if i + 1 < g {
                m.set(i, i + 1, t2 * w1);
            }
            if i + 2 < g {
                m.set(i, i + 2, t2 * w2);
            }
        }
        crate::linalg::inertia_below(&m, tau * tau)
    };
    (count(-1.0), count(1.0))
}

/// Materialize the Dirichlet chiral matrix for dense cross-checks.
pub fn chiral_orbit_matrix(grid: &OrbitGrid) -> CMatrix {
    let g = grid.len();
    CMatrix::from_fn(g, g, |i, j| {
        Complex64::new(chiral_entry(grid, 1.0, i as i64, j as i64), 0.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::FluxFamily;

    #[test]
    fn orbits_partition_the_mode_window() {
        let flux = FluxFamily::constant(0.1, 2, 8);
        let grids = orbit_grids(&flux, 0.5, 5, 4);
        assert_eq!(grids.len(), 2);
        let total: usize = grids.iter().map(|g| g.cell_count).sum();
        assert_eq!(total, 11);
        for g in &grids {
            assert_eq!(g.len(), g.cell_count * 9);
        }
    }

    #[test]
    fn symbol_matches_fiber_flux_values() {
        // Node in cell j of the orbit carries mode k0 + j*c at angle
        // theta = T - 2*pi*j; its symbol must be the exact fiber eigenvalue.
        let flux = FluxFamily::new(
            vec![
                (0, Complex64::new(0.1, 0.0)),
                (1, Complex64::new(0.0, -0.02)),
                (-1, Complex64::new(0.0, 0.02)),
            ],
            1,
            8,
        )
        .unwrap();
        let grids = orbit_grids(&flux, 0.3, 4, 6);
        assert_eq!(grids.len(), 1);
        let g = &grids[0];
        for (i, &v) in g.symbol.iter().enumerate() {
            let theta_big = (i as f64 + 0.5) * g.h;
            let cell = (theta_big / TAU).floor();
            let theta = theta_big - TAU * cell;
            let mode = g.base_mode + cell as i64 * flux.winding;
            let expect = mode as f64 + flux.flux(theta);
            assert!((v - expect).abs() < 1e-12, "node {i}");
        }
    }

    #[test]
    fn spectral_rows_differentiate_plane_waves() {
        // The circulant rows must apply the exact symbols i*omega and
        // -omega^2 to every representable plane wave, on both grid parities.
        for g in [12usize, 15] {
            let h = 0.3;
            let big_l = g as f64 * h;
            let (row_s, row_lap) = spectral_rows(g, h);
            let k_max = (g - 1) / 2;
            for k in 1..=k_max {
                let w = k as f64 * TAU / big_l;
                for i in 0..g {
                    let x = |j: usize| (j as f64 + 0.5) * h;
                    let mut ds = 0.0;
                    let mut dl = 0.0;
                    for j in 0..g {
                        let d = (j + g - i) % g;
                        ds += row_s[d] * (w * x(j)).sin();
                        dl += row_lap[d] * (w * x(j)).sin();
                    }
                    let expect_s = w * (w * x(i)).cos();
                    let expect_l = -w * w * (w * x(i)).sin();
                    assert!((ds - expect_s).abs() < 1e-10 * (1.0 + w), "g={g} k={k}");
                    assert!((dl - expect_l).abs() < 1e-10 * (1.0 + w * w), "g={g} k={k}");
                }
            }
        }
    }

    #[test]
    fn reduced_orbit_spectrum_matches_dense_block() {
        let flux = FluxFamily::constant(0.0, 1, 8);
        let grid = &orbit_grids(&flux, 0.8, 2, 3)[0];
        let reduced = delta_orbit_eigenvalues(grid).unwrap();
        let dense = delta_orbit_matrix(grid);
        assert!(dense.hermiticity_defect() < 1e-13);
        let direct = hermitian_eigenvalues(&dense).unwrap();
        for (r, d) in reduced.iter().zip(direct.iter()) {
            // The gram route loses half the digits near zero (sqrt of an
            // eps-level eigenvalue), so near-kernel modes only match to
            // the sqrt(eps)-scale noise floor.
            let tol = if d.abs() > 0.5 { 1e-9 } else { 5e-8 };
            assert!((r - d).abs() < tol, "{r} vs {d}");
        }
    }

    #[test]
    fn orbit_spectrum_reproduces_the_oscillator_ladder() {
        // c=1, a=0: the symbol is an exact linear ramp with slope 1/(2*pi),
        // so near its zero the squared operator is an exact harmonic
        // oscillator with levels t*n/pi and the block eigenvalues follow
        // +-sqrt(t*n/pi) up to exponentially small edge effects. A local
        // difference stencil would interleave doubler or seam artifacts
        // among the rungs; the spectral block must produce each exactly once.
        let t = 0.5;
        let flux = FluxFamily::constant(0.0, 1, 8);
        let grid = &orbit_grids(&flux, t, 3, 24)[0];
        let eigs = delta_orbit_eigenvalues(grid).unwrap();
        // Seam closure splits the one-dimensional line kernel into a +- pair
        // far below arithmetic resolution; the gram route reports both.
        let tiny = eigs.iter().filter(|l| l.abs() < 0.05).count();
        assert_eq!(tiny, 2);
        let window: Vec<f64> =
            eigs.iter().copied().filter(|l| (0.25..1.29).contains(l)).collect();
        assert_eq!(window.len(), 10, "{window:?}");
        for (n, lam) in window.iter().enumerate() {
            let expect = (t * (n + 1) as f64 / std::f64::consts::PI).sqrt();
            assert!((lam - expect).abs() < 4e-3, "rung {n}: {lam} vs {expect}");
        }
    }

    #[test]
    fn kernel_counts_detect_the_flow_direction() {
        // c=1, a=0: v ramps upward through zero; P has one oscillator
        // ground state and P* none. c=-1 swaps the sides.
        let tau = (0.15 * (0.4 / std::f64::consts::PI).sqrt()).max(1e-3);
        for (winding, expect) in [(1i64, (1usize, 0usize)), (-1, (0, 1))] {
            let flux = FluxFamily::constant(0.0, winding, 16);
            let grid = &orbit_grids(&flux, 0.4, 12, 10)[0];
            assert_eq!(chiral_kernel_counts(grid, tau), expect, "c={winding}");
        }
    }
}
