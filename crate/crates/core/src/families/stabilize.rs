//! Finite-rank stabilization: append rows/columns built from bump functions
//! and kernel frames so that the augmented loop D_U has no kernel anywhere
//! on the base circle, while recording dim U^- - dim U^+ = index.

use super::{kernel_threshold, FamilyError, FamilySpec, FluxFamily, MatrixLoop};
use crate::linalg::{hermitian_eigen_small, hermitian_eigenvalues, CMatrix};
use crate::numerics::{bump, wrap_angle};
use num_complex::Complex64;
use std::f64::consts::TAU;

/// One interval of the stabilization cover with its spectral level.
#[derive(Debug, Clone)]
pub struct CoverInterval {
    pub start: f64,
    pub end: f64,
    pub level: f64,
}

/// Plateau bump with quintic smoothstep ramps, wrapped onto the circle.
/// `lo > hi` is allowed and means the plateau wraps through 0.
#[derive(Debug, Clone)]
pub struct BumpProfile {
    pub lo: f64,
    pub hi: f64,
    pub ramp: f64,
}

impl BumpProfile {
    /// Identically 1 on the whole circle.
    pub fn full() -> Self {
        BumpProfile {
            lo: 0.0,
            hi: TAU,
            ramp: 0.0,
        }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        if self.ramp == 0.0 && self.lo == 0.0 && self.hi == TAU {
            return 1.0;
        }
        // Support is [lo - ramp, hi + ramp] with the plateau on [lo, hi].
        let mut t = wrap_angle(theta);
        let hi = if self.hi >= self.lo { self.hi } else { self.hi + TAU };
        let a = self.lo - self.ramp;
        let b = hi + self.ramp;
        if t < a {
            t += TAU;
        }
        bump(t, a, b, self.ramp)
    }
}

/// A detected spectral crossing of a winding flux family.
#[derive(Debug, Clone)]
pub struct Crossing {
    pub theta: f64,
    /// Integer level hit by the flux.
    pub level: i64,
    /// Fiber mode whose eigenvalue crosses zero (mode = -level).
    pub mode: i64,
    /// +1 for upward crossings, -1 for downward.
    pub direction: i64,
}

/// Alternative block dressings used to probe stabilization invariance.
#[derive(Debug, Clone)]
pub enum StabilizationVariant {
    Standard,
    /// Multiply the appended rows by a fixed real trigonometric polynomial
    /// (must be nonvanishing; checked during validation).
    ScaledRow(Vec<(i64, Complex64)>),
    /// Multiply the appended rows by exp(i w theta).
    PhaseTwist(i64),
}

/// Stabilized family: base loop plus the appended block data.
#[derive(Debug, Clone)]
pub struct StabilizedFamily {
    pub base: FamilySpec,
    pub cover: Vec<CoverInterval>,
    pub bumps: Vec<BumpProfile>,
    pub u_plus_dim: usize,
    pub u_minus_dim: usize,
    /// Columns hitting the cokernel (present when the fiber index is < 0).
    pub d12: Option<MatrixLoop>,
    /// Rows killing the kernel (present when the fiber index is > 0).
    pub d21: Option<MatrixLoop>,
    /// Coupling block between U^+ and U^-; unused by the supported covers.
    pub d22: Option<MatrixLoop>,
    pub crossings: Vec<Crossing>,
    /// Dressing applied to the appended blocks.
    pub variant: StabilizationVariant,
    /// Smallest singular value of D_U found during grid validation.
    pub validated_min_singular_value: f64,
}

impl StabilizedFamily {
    pub fn index(&self) -> i64 {
        self.u_minus_dim as i64 - self.u_plus_dim as i64
    }

    /// Dressing factor multiplying the appended blocks at theta.
    pub fn variant_factor(&self, theta: f64) -> Complex64 {
        match &self.variant {
            StabilizationVariant::Standard => Complex64::new(1.0, 0.0),
            StabilizationVariant::ScaledRow(modes) => {
                let mut g = Complex64::new(0.0, 0.0);
                for &(m, coeff) in modes {
                    g += coeff * Complex64::from_polar(1.0, m as f64 * theta);
                }
                g
            }
            StabilizationVariant::PhaseTwist(w) => {
                Complex64::from_polar(1.0, *w as f64 * theta)
            }
        }
    }

    /// Assembled D_U at theta. Flux families are truncated at their
    /// default fiber mode cutoff (column/row index k + K); their appended
    /// blocks are evaluated from the bump profiles directly, so away from
    /// the bump supports D_U restricts to D exactly.
    pub fn du_at(&self, theta: f64) -> CMatrix {
        match &self.base {
            FamilySpec::Flux(flux) => {
                let k = flux.fiber_mode_cutoff as i64;
                let n = (2 * k + 1) as usize;
                let x = flux.flux(theta);
                let rows = n + self.u_minus_dim;
                let cols = n + self.u_plus_dim;
                let mut m = CMatrix::zeros(rows, cols);
                for j in 0..n {
                    m[(j, j)] = Complex64::new((j as i64 - k) as f64 + x, 0.0);
                }
                let factor = self.variant_factor(theta);
                for (r, (cr, bp)) in self.crossings.iter().zip(self.bumps.iter()).enumerate() {
                    let col = (cr.mode + k) as usize;
                    let value = factor * bp.eval(theta);
                    if self.u_minus_dim > 0 {
                        m[(n + r, col)] = value;
                    } else {
                        m[(col, n + r)] = value.conj();
                    }
                }
                m
            }
            FamilySpec::MatrixLoop(ml) => {
                let d = ml.at(theta);
                let rows = ml.rows + self.u_minus_dim;
                let cols = ml.cols + self.u_plus_dim;
                let mut m = CMatrix::zeros(rows, cols);
                for i in 0..ml.rows {
                    for j in 0..ml.cols {
                        m[(i, j)] = d[(i, j)];
                    }
                }
                if let Some(d21) = &self.d21 {
                    let block = d21.at(theta);
                    for r in 0..d21.rows {
                        for c in 0..d21.cols {
                            m[(ml.rows + r, c)] = block[(r, c)];
                        }
                    }
                }
                if let Some(d12) = &self.d12 {
                    let block = d12.at(theta);
                    for r in 0..d12.rows {
                        for c in 0..d12.cols {
                            m[(r, ml.cols + c)] = block[(r, c)];
                        }
                    }
                }
                m
            }
        }
    }

    /// Smallest singular value of D_U over a uniform grid.
    pub fn min_singular_value(&self, grid: usize) -> f64 {
        let mut min = f64::INFINITY;
        for j in 0..grid {
            let theta = TAU * j as f64 / grid as f64;
            let d = self.du_at(theta);
            // Gram on the thinner side keeps the eigenproblem small.
            let gram = if d.n_rows() >= d.n_cols() {
                d.adjoint().mul(&d)
            } else {
                d.mul(&d.adjoint())
            };
            let evals = hermitian_eigenvalues(&gram).expect("gram eigensolve");
            min = min.min(evals[0].max(0.0).sqrt());
        }
        min
    }
}

/// Build a stabilization of `family`, validating injectivity of D_U on a
/// grid of at least 720 points.
pub fn stabilize(family: &FamilySpec, grid_points: usize) -> Result<StabilizedFamily, FamilyError> {
    stabilize_with(family, grid_points, &StabilizationVariant::Standard)
}

/// As `stabilize`, with an alternative block dressing.
pub fn stabilize_with(
    family: &FamilySpec,
    grid_points: usize,
    variant: &StabilizationVariant,
) -> Result<StabilizedFamily, FamilyError> {
    let grid = grid_points.max(16);
    let mut out = match family {
        FamilySpec::Flux(flux) => stabilize_flux(flux, grid, variant)?,
        FamilySpec::MatrixLoop(ml) => stabilize_matrix_loop(ml, grid, variant)?,
    };
    let check_grid = grid.max(720);
    let min_sv = out.min_singular_value(check_grid);
    let floor = 10.0 * kernel_threshold(spectral_scale(family));
    if min_sv <= floor {
        return Err(FamilyError::CoverFailure(format!(
            "validated min singular value {min_sv:.3e} not above {floor:.3e} on {check_grid}-grid"
        )));
    }
    out.validated_min_singular_value = min_sv;
    Ok(out)
}

fn spectral_scale(family: &FamilySpec) -> f64 {
    match family {
        FamilySpec::Flux(flux) => flux.fiber_mode_cutoff as f64 + 2.0,
        FamilySpec::MatrixLoop(ml) => {
            let mut s = 0.0f64;
            for j in 0..64 {
                s = s.max(ml.at(TAU * j as f64 / 64.0).max_norm());
            }
            s
        }
    }
}

fn stabilize_flux(
    flux: &FluxFamily,
    grid: usize,
    variant: &StabilizationVariant,
) -> Result<StabilizedFamily, FamilyError> {
    let crossings = detect_crossings(flux, grid)?;
    if crossings.is_empty() {
        // Already invertible: empty stabilization, cover records the gap.
        let mut min_gap = f64::INFINITY;
        for j in 0..grid {
            let x = flux.flux(TAU * j as f64 / grid as f64);
            min_gap = min_gap.min((x - x.round()).abs());
        }
        return Ok(StabilizedFamily {
            base: FamilySpec::Flux(flux.clone()),
            cover: vec![CoverInterval {
                start: 0.0,
                end: TAU,
                level: min_gap * min_gap,
            }],
            bumps: Vec::new(),
            u_plus_dim: 0,
            u_minus_dim: 0,
            d12: None,
            d21: None,
            d22: None,
            crossings,
            variant: variant.clone(),
            validated_min_singular_value: 0.0,
        });
    }

    let c = flux.winding;
    if c == 0 {
        return Err(FamilyError::CoverFailure(
            "flux touches an integer without net winding; no canonical cover".into(),
        ));
    }
    if crossings.len() as i64 != c.abs() || crossings.iter().any(|cr| cr.direction != c.signum()) {
        return Err(FamilyError::CoverFailure(format!(
            "expected {} monotone crossings, found {} (non-monotone flux)",
            c.abs(),
            crossings.len()
        )));
    }
    let delta = 0.05; // spectral level: bump plateau where |k + x| < delta
    let k_cut = flux.fiber_mode_cutoff as i64;
    let n_fiber = (2 * k_cut + 1) as usize;
    let mut cover = Vec::new();
    let mut bumps = Vec::new();
    for cr in &crossings {
        if cr.mode.abs() > k_cut {
            return Err(FamilyError::CoverFailure(format!(
                "crossing mode {} outside fiber cutoff {k_cut}",
                cr.mode
            )));
        }
        // Solve |mode + x(theta)| = delta on both sides of the crossing.
        let target_lo = cr.level as f64 - delta * cr.direction as f64;
        let target_hi = cr.level as f64 + delta * cr.direction as f64;
        let lo = solve_flux_level(flux, cr.theta, -1.0, target_lo)?;
        let hi = solve_flux_level(flux, cr.theta, 1.0, target_hi)?;
        // Ramps extend beyond the plateau; shrink them rather than let the
        // support wrap through the seam (mode labels reshuffle there).
        let width = hi - lo;
        let ramp = (0.5 * width).min(0.9 * lo).min(0.9 * (TAU - hi));
        if !(lo > 0.0 && hi < TAU) || ramp < 0.02 * width {
            return Err(FamilyError::CoverFailure(format!(
                "bump support for crossing at theta={:.4} touches the seam",
                cr.theta
            )));
        }
        cover.push(CoverInterval {
            start: lo,
            end: hi,
            level: delta * delta,
        });
        bumps.push(BumpProfile { lo, hi, ramp });
    }

    // One appended row (c > 0) or column (c < 0) per crossing, hitting the
    // crossing mode, projected to Fourier data.
    let n_rank = crossings.len();
    let samples = 256usize;
    let mut theta_samples = Vec::with_capacity(samples);
    for j in 0..samples {
        theta_samples.push(TAU * j as f64 / samples as f64);
    }
    let mut block_samples: Vec<CMatrix> = theta_samples
        .iter()
        .map(|&th| {
            let mut b = CMatrix::zeros(n_rank, n_fiber);
            for (r, (cr, bp)) in crossings.iter().zip(bumps.iter()).enumerate() {
                let col = (cr.mode + k_cut) as usize;
                b[(r, col)] = Complex64::new(bp.eval(th), 0.0);
            }
            b
        })
        .collect();
    apply_variant(&mut block_samples, &theta_samples, variant);
    let block_loop = fourier_project(n_rank, n_fiber, &theta_samples, &block_samples, 32)?;

    let (u_minus, u_plus, d21, d12) = if c > 0 {
        (n_rank, 0, Some(block_loop), None)
    } else {
        // Columns: transpose the row data.
        let cols: Vec<CMatrix> = block_samples.iter().map(|b| b.adjoint()).collect();
        let col_loop = fourier_project(n_fiber, n_rank, &theta_samples, &cols, 32)?;
        (0, n_rank, None, Some(col_loop))
    };

    Ok(StabilizedFamily {
        base: FamilySpec::Flux(flux.clone()),
        cover,
        bumps,
        u_plus_dim: u_plus,
        u_minus_dim: u_minus,
        d12,
        d21,
        d22: None,
        crossings,
        variant: variant.clone(),
        validated_min_singular_value: 0.0,
    })
}

/// Locate crossings of integer flux levels by grid scan plus bisection.
fn detect_crossings(flux: &FluxFamily, grid: usize) -> Result<Vec<Crossing>, FamilyError> {
    let mut out: Vec<Crossing> = Vec::new();
    for j in 0..grid {
        let t0 = TAU * j as f64 / grid as f64;
        let t1 = TAU * (j + 1) as f64 / grid as f64;
        let x0 = flux.flux(t0);
        let x1 = flux.flux(t1);
        let f0 = x0.floor();
        let f1 = x1.floor();
        if (f1 - f0).abs() > 1.5 {
            return Err(FamilyError::CoverFailure(
                "multiple crossings in one grid cell; refine the grid".into(),
            ));
        }
        // floor(x) changes exactly when an integer level is crossed; a hit
        // landing on a grid node is picked up by the cell ending there.
        let (level, direction) = if f1 > f0 {
            (f1, 1)
        } else if f1 < f0 {
            (f0, -1)
        } else {
            continue;
        };
        let theta = bisect_flux(flux, t0, t1, level);
        // Guard against the same node-exact crossing surfacing twice.
        if out
            .last()
            .is_some_and(|c| c.level == level as i64 && (c.theta - theta).abs() < 1e-9)
        {
            continue;
        }
        out.push(Crossing {
            theta,
            level: level as i64,
            mode: -(level as i64),
            direction,
        });
    }
    Ok(out)
}

fn bisect_flux(flux: &FluxFamily, mut lo: f64, mut hi: f64, level: f64) -> f64 {
    let mut f_lo = flux.flux(lo) - level;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = flux.flux(mid) - level;
        if (f_lo < 0.0) == (f_mid < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// March from `start` in `direction` until the flux reaches `target`.
fn solve_flux_level(
    flux: &FluxFamily,
    start: f64,
    direction: f64,
    target: f64,
) -> Result<f64, FamilyError> {
    let step = direction * TAU / 720.0;
    let mut prev = start;
    for j in 1..721 {
        let t = start + step * j as f64;
        let sign_prev = flux.flux(prev) - target;
        let sign_t = flux.flux(t) - target;
        if (sign_prev < 0.0) != (sign_t < 0.0) {
            let (lo, hi) = if prev < t { (prev, t) } else { (t, prev) };
            return Ok(bisect_flux_value(flux, lo, hi, target));
        }
        prev = t;
    }
    Err(FamilyError::CoverFailure(format!(
        "flux never reaches level {target} near theta={start:.4}"
    )))
}

fn bisect_flux_value(flux: &FluxFamily, mut lo: f64, mut hi: f64, target: f64) -> f64 {
    let mut f_lo = flux.flux(lo) - target;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = flux.flux(mid) - target;
        if (f_lo < 0.0) == (f_mid < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn stabilize_matrix_loop(
    ml: &MatrixLoop,
    grid: usize,
    variant: &StabilizationVariant,
) -> Result<StabilizedFamily, FamilyError> {
    let q_ker = (ml.cols as i64 - ml.rows as i64).max(0) as usize;
    let q_coker = (ml.rows as i64 - ml.cols as i64).max(0) as usize;
    if q_ker == 0 && q_coker == 0 {
        // Square loop: supported only if invertible everywhere.
        let mut min_sv = f64::INFINITY;
        for j in 0..grid.max(720) {
            let d = ml.at(TAU * j as f64 / grid.max(720) as f64);
            let gram = d.adjoint().mul(&d);
            let evals = hermitian_eigenvalues(&gram).expect("gram eigensolve");
            min_sv = min_sv.min(evals[0].max(0.0).sqrt());
        }
        if min_sv <= 10.0 * kernel_threshold(spectral_scale(&FamilySpec::MatrixLoop(ml.clone()))) {
            return Err(FamilyError::CoverFailure(
                "square loop with kernel: rank-varying covers are not supported".into(),
            ));
        }
        return Ok(StabilizedFamily {
            base: FamilySpec::MatrixLoop(ml.clone()),
            cover: vec![CoverInterval {
                start: 0.0,
                end: TAU,
                level: min_sv * min_sv,
            }],
            bumps: Vec::new(),
            u_plus_dim: 0,
            u_minus_dim: 0,
            d12: None,
            d21: None,
            d22: None,
            crossings: Vec::new(),
            variant: variant.clone(),
            validated_min_singular_value: 0.0,
        });
    }
    if q_ker > 1 || q_coker > 1 {
        return Err(FamilyError::CoverFailure(
            "kernel rank above 1 is not supported by the frame tracker".into(),
        ));
    }

    // Track a smooth periodic frame of ker D (or ker D^*) around the loop.
    let track_cokernel = q_coker == 1;
    let dim = if track_cokernel { ml.rows } else { ml.cols };
    let samples = grid.max(256).next_power_of_two();
    let mut theta_samples = Vec::with_capacity(samples);
    let mut frames: Vec<Vec<Complex64>> = Vec::with_capacity(samples);
    let mut min_level = f64::INFINITY;
    for j in 0..samples {
        let th = TAU * j as f64 / samples as f64;
        theta_samples.push(th);
        let d = ml.at(th);
        let gram = if track_cokernel {
            d.mul(&d.adjoint())
        } else {
            d.adjoint().mul(&d)
        };
        let (vals, vecs) = hermitian_eigen_small(&gram).expect("fiber gram eigensolve");
        let scale = vals.last().copied().unwrap_or(0.0).max(1e-30);
        if vals.len() > 1 && vals[1] < 1e-6 * scale {
            return Err(FamilyError::CoverFailure(format!(
                "kernel rank exceeds 1 at theta={th:.4}"
            )));
        }
        min_level = min_level.min(if vals.len() > 1 { vals[1] } else { scale });
        let mut v: Vec<Complex64> = (0..dim).map(|i| vecs[(i, 0)]).collect();
        if let Some(prev) = frames.last() {
            // Align with the previous frame: project and renormalize.
            let overlap: Complex64 = prev.iter().zip(v.iter()).map(|(p, w)| w.conj() * p).sum();
            if overlap.norm() < 0.2 {
                return Err(FamilyError::CoverFailure(format!(
                    "kernel frame lost continuity at theta={th:.4}"
                )));
            }
            let phase = overlap / overlap.norm();
            for w in &mut v {
                *w *= phase;
            }
        }
        frames.push(v);
    }
    // Close the loop: distribute the holonomy phase so the frame is periodic.
    let first = &frames[0];
    let last = &frames[samples - 1];
    let step_overlap: Complex64 = last.iter().zip(first.iter()).map(|(l, f)| l.conj() * f).sum();
    if step_overlap.norm() < 0.2 {
        return Err(FamilyError::CoverFailure(
            "kernel frame does not close up around the loop".into(),
        ));
    }
    let mismatch = step_overlap / step_overlap.norm();
    let psi = mismatch.arg();
    for (j, frame) in frames.iter_mut().enumerate() {
        let correction = Complex64::from_polar(1.0, psi * j as f64 / samples as f64);
        for w in frame.iter_mut() {
            *w *= correction;
        }
    }

    // Appended block: row F^*(theta) (kernel case) or column F(theta).
    let mut block_samples: Vec<CMatrix> = frames
        .iter()
        .map(|f| {
            if track_cokernel {
                CMatrix::from_fn(dim, 1, |i, _| f[i])
            } else {
                CMatrix::from_fn(1, dim, |_, j| f[j].conj())
            }
        })
        .collect();
    apply_variant(&mut block_samples, &theta_samples, variant);
    let (rows, cols) = if track_cokernel { (dim, 1) } else { (1, dim) };
    let block_loop = fourier_project(rows, cols, &theta_samples, &block_samples, 24)?;

    Ok(StabilizedFamily {
        base: FamilySpec::MatrixLoop(ml.clone()),
        cover: vec![CoverInterval {
            start: 0.0,
            end: TAU,
            level: min_level,
        }],
        bumps: vec![BumpProfile::full()],
        u_plus_dim: q_coker,
        u_minus_dim: q_ker,
        d12: if track_cokernel { Some(block_loop.clone()) } else { None },
        d21: if track_cokernel { None } else { Some(block_loop) },
        d22: None,
        crossings: Vec::new(),
        variant: variant.clone(),
        validated_min_singular_value: 0.0,
    })
}

fn apply_variant(
    samples: &mut [CMatrix],
    thetas: &[f64],
    variant: &StabilizationVariant,
) {
    match variant {
        StabilizationVariant::Standard => {}
        StabilizationVariant::ScaledRow(modes) => {
            for (b, &th) in samples.iter_mut().zip(thetas.iter()) {
                let mut g = Complex64::new(0.0, 0.0);
                for &(m, coeff) in modes {
                    g += coeff * Complex64::from_polar(1.0, m as f64 * th);
                }
                *b = b.scale(g);
            }
        }
        StabilizationVariant::PhaseTwist(w) => {
            for (b, &th) in samples.iter_mut().zip(thetas.iter()) {
                *b = b.scale(Complex64::from_polar(1.0, *w as f64 * th));
            }
        }
    }
}

/// Project matrix samples on a uniform theta grid to Fourier modes |m| <= m_max.
fn fourier_project(
    rows: usize,
    cols: usize,
    thetas: &[f64],
    samples: &[CMatrix],
    m_max: i64,
) -> Result<MatrixLoop, FamilyError> {
    let n = samples.len() as f64;
    let mut coeffs = Vec::new();
    for m in -m_max..=m_max {
        let mut acc = CMatrix::zeros(rows, cols);
        for (b, &th) in samples.iter().zip(thetas.iter()) {
            let phase = Complex64::from_polar(1.0 / n, -(m as f64) * th);
            acc = acc.add(&b.scale(phase));
        }
        if acc.max_norm() > 1e-14 {
            coeffs.push((m, acc));
        }
    }
    MatrixLoop::new(rows, cols, coeffs)
}
