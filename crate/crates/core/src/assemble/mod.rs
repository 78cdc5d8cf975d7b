//! Truncated matrix realizations of the adiabatic operators delta_t and P_t.
//!
//! The basis on the total space is e^{i(m theta + k x)} tensor the fiber
//! spinor (E+, E-), with base modes |m| <= M and fiber modes |k| <= K. For
//! zero-winding scalar families both delta_t and P_t preserve k, so the
//! realization is a list of independent per-k blocks. Winding families mix
//! fiber modes along orbits k -> k + c; those blocks live on an enlarged
//! theta-domain (see `orbit`). Matrix loops are assembled densely over the
//! base modes alone.
//!
//! Assembly is lazy: an [`AssembledOperator`] stores the family and block
//! descriptors, and [`spectrum`] materializes one block at a time, so the
//! peak memory is a single block per worker thread.

mod dense_loop;
mod flux_blocks;
mod orbit;

pub use dense_loop::{delta_dense, loop_mode_support, stabilized_loop};
pub use flux_blocks::{chiral_block, delta_block, fiber_toeplitz, paired_block_eigenvalues};
pub use orbit::{
    chiral_kernel_counts, chiral_orbit_matrix, delta_orbit_eigenvalues, delta_orbit_matrix,
    orbit_grids, OrbitGrid,
};

use crate::families::{FamilySpec, FluxFamily, MatrixLoop, StabilizedFamily};
use crate::linalg::{hermitian_eigenvalues, CMatrix, LinalgError};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Default spectral window Lambda used by truncation diagnostics: modes with
/// |lambda| > Lambda are treated as asymptotic tail.
pub const DEFAULT_ENERGY_WINDOW: f64 = 8.0;

#[derive(Debug, Error)]
pub enum AssembleError {
    #[error("truncation too small: {what} requires at least {required}, got {given}")]
    TruncationTooSmall {
        what: &'static str,
        required: usize,
        given: usize,
    },
    #[error("eigensolve failed on block {block}: {source}")]
    EigensolveFailure { block: String, source: LinalgError },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported assembly: {0}")]
    Unsupported(String),
}

/// One independent block of a truncated operator.
#[derive(Debug, Clone)]
pub enum BlockSpec {
    /// Fiber mode k of a zero-winding scalar family; materializes to a
    /// 2(2M+1) Hermitian matrix (delta_t) or a (2M+1) chiral matrix (P_t).
    FluxFiber { k: i64 },
    /// One residue-class orbit of a winding family on its enlarged domain.
    Orbit { grid: OrbitGrid },
    /// Dense double-Fourier realization of a matrix loop.
    DenseLoop { ml: MatrixLoop },
}

impl BlockSpec {
    pub fn label(&self) -> String {
        match self {
            BlockSpec::FluxFiber { k } => k.to_string(),
            BlockSpec::Orbit { grid } => format!("orbit{}", grid.base_mode),
            BlockSpec::DenseLoop { .. } => "loop".to_string(),
        }
    }
}

/// Which operator a realization stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// The self-adjoint delta_t.
    Delta,
    /// The chiral P_t = t d/dtheta + D (sign +1) or its formal adjoint
    /// -t d/dtheta + D (sign -1).
    Chiral { adjoint: bool },
}

/// A truncated operator: family data plus the block decomposition.
#[derive(Debug, Clone)]
pub struct AssembledOperator {
    pub family: FamilySpec,
    pub kind: OperatorKind,
    pub t: f64,
    pub fiber_cutoff: usize,
    pub base_cutoff: usize,
    pub blocks: Vec<BlockSpec>,
    /// Human-readable description of the ordered basis.
    pub basis_doc: String,
}

/// All eigenvalues of a truncated delta_t, with provenance.
#[derive(Debug, Clone, Serialize)]
pub struct TotalSpectrum {
    pub t: f64,
    pub fiber_cutoff: usize,
    pub base_cutoff: usize,
    /// Per-block eigenvalues in block order, each list ascending.
    pub blocks: Vec<(String, Vec<f64>)>,
    /// Merged ascending list.
    pub eigenvalues: Vec<f64>,
    /// True when the merged spectrum equals its negation within tolerance.
    pub symmetry_flag: bool,
}

/// One line of a truncation diagnostic.
#[derive(Debug, Clone, Serialize)]
pub struct TruncationRow {
    pub fiber_cutoff: usize,
    pub base_cutoff: usize,
    pub zeta_probe: f64,
    pub eta_probe: f64,
    pub diff_from_prev: Option<f64>,
    /// True when the cutoffs sit below the resolution heuristic
    /// M >= Lambda/t, K >= Lambda.
    pub insufficient: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationReport {
    pub t: f64,
    pub probe_s: f64,
    pub window: f64,
    pub rows: Vec<TruncationRow>,
    /// True when successive probe differences are non-increasing.
    pub monotone: bool,
}

/// Cutoffs below which a truncation cannot resolve the window
/// [-Lambda, Lambda]: base modes reach t*M, fiber modes reach K.
pub fn recommended_cutoffs(t: f64, window: f64) -> (usize, usize) {
    let k = window.ceil().max(1.0) as usize;
    let m = (window / t).ceil().max(1.0) as usize;
    (k, m)
}

fn check_positive_t(t: f64) -> Result<(), AssembleError> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(AssembleError::InvalidParameter(format!(
            "adiabatic parameter must be positive and finite, got {t}"
        )))
    }
}

fn flux_mode_support(flux: &FluxFamily) -> usize {
    flux.modes()
        .iter()
        .map(|(p, _)| p.unsigned_abs() as usize)
        .max()
        .unwrap_or(0)
}

fn flux_blocks_c0(k_cutoff: usize) -> Vec<BlockSpec> {
    let kk = k_cutoff as i64;
    (-kk..=kk).map(|k| BlockSpec::FluxFiber { k }).collect()
}

/// Assemble delta_t for a family at truncation (K, M).
pub fn assemble_delta_t(
    family: &FamilySpec,
    t: f64,
    k_cutoff: usize,
    m_cutoff: usize,
) -> Result<AssembledOperator, AssembleError> {
    check_positive_t(t)?;
    let (blocks, basis_doc) = match family {
        FamilySpec::Flux(flux) => {
            let support = flux_mode_support(flux);
            if m_cutoff < support {
                return Err(AssembleError::TruncationTooSmall {
                    what: "base cutoff below the potential's Fourier support",
                    required: support,
                    given: m_cutoff,
                });
            }
            if flux.winding == 0 {
                (
                    flux_blocks_c0(k_cutoff),
                    format!(
                        "per fiber mode k = -{K}..{K}: E+ base modes m = -{M}..{M}, \
                         then E- base modes; functions e^(i(m theta + k x))",
                        K = k_cutoff,
                        M = m_cutoff
                    ),
                )
            } else {
                if m_cutoff < 2 {
                    return Err(AssembleError::TruncationTooSmall {
                        what: "base cutoff for the orbit stencil",
                        required: 2,
                        given: m_cutoff,
                    });
                }
                if k_cutoff < flux.winding.unsigned_abs() as usize {
                    return Err(AssembleError::TruncationTooSmall {
                        what: "fiber cutoff below one winding step",
                        required: flux.winding.unsigned_abs() as usize,
                        given: k_cutoff,
                    });
                }
                let grids = orbit_grids(flux, t, k_cutoff, m_cutoff);
                (
                    grids
                        .into_iter()
                        .map(|grid| BlockSpec::Orbit { grid })
                        .collect(),
                    format!(
                        "per residue class mod {c}: enlarged-domain grid values \
                         (E+ then E-), staggered step 2 pi/{ppc}, spectral \
                         periodic derivative",
                        c = flux.winding.abs(),
                        ppc = 2 * m_cutoff + 1
                    ),
                )
            }
        }
        FamilySpec::MatrixLoop(ml) => {
            let support = loop_mode_support(ml);
            if m_cutoff < support {
                return Err(AssembleError::TruncationTooSmall {
                    what: "base cutoff below the loop's Fourier support",
                    required: support,
                    given: m_cutoff,
                });
            }
            (
                vec![BlockSpec::DenseLoop { ml: ml.clone() }],
                format!(
                    "E+ sector: {cols} components per base mode m = -{M}..{M}, \
                     then E- sector with {rows} components per mode",
                    cols = ml.cols,
                    rows = ml.rows,
                    M = m_cutoff
                ),
            )
        }
    };
    Ok(AssembledOperator {
        family: family.clone(),
        kind: OperatorKind::Delta,
        t,
        fiber_cutoff: k_cutoff,
        base_cutoff: m_cutoff,
        blocks,
        basis_doc,
    })
}

/// Assemble delta_t for a stabilized matrix loop: the loop is enlarged by
/// the stabilization blocks before the dense double-Fourier realization.
pub fn assemble_delta_t_stabilized(
    st: &StabilizedFamily,
    t: f64,
    k_cutoff: usize,
    m_cutoff: usize,
) -> Result<AssembledOperator, AssembleError> {
    let du = stabilized_loop(st)?;
    assemble_delta_t(&FamilySpec::MatrixLoop(du), t, k_cutoff, m_cutoff)
}

/// Assemble the chiral operator P_t = t d/dtheta + D for a scalar family.
pub fn assemble_p_t(
    family: &FamilySpec,
    t: f64,
    k_cutoff: usize,
    m_cutoff: usize,
) -> Result<AssembledOperator, AssembleError> {
    let FamilySpec::Flux(_) = family else {
        return Err(AssembleError::Unsupported(
            "the chiral realization is defined for scalar flux families".into(),
        ));
    };
    let mut op = assemble_delta_t(family, t, k_cutoff, m_cutoff)?;
    op.kind = OperatorKind::Chiral { adjoint: false };
    op.basis_doc = format!("single spinor component; {}", op.basis_doc);
    Ok(op)
}

impl AssembledOperator {
    pub fn is_hermitian(&self) -> bool {
        self.kind == OperatorKind::Delta
    }

    /// Formal adjoint. Delta_t is self-adjoint; the chiral realization
    /// flips the sign of the derivative term.
    pub fn adjoint(&self) -> AssembledOperator {
        let mut out = self.clone();
        if let OperatorKind::Chiral { adjoint } = self.kind {
            out.kind = OperatorKind::Chiral { adjoint: !adjoint };
        }
        out
    }

    fn chiral_sign(&self) -> f64 {
        match self.kind {
            OperatorKind::Delta => 1.0,
            OperatorKind::Chiral { adjoint } => {
                if adjoint {
                    -1.0
                } else {
                    1.0
                }
            }
        }
    }

    /// Materialize one block as a dense matrix.
    pub fn block_matrix(&self, index: usize) -> Result<CMatrix, AssembleError> {
        let spec = self.blocks.get(index).ok_or_else(|| {
            AssembleError::InvalidParameter(format!("block index {index} out of range"))
        })?;
        let m = match (&self.kind, spec) {
            (OperatorKind::Delta, BlockSpec::FluxFiber { k }) => {
                let FamilySpec::Flux(flux) = &self.family else {
                    unreachable!("flux block on a non-flux family");
                };
                delta_block(flux, *k, self.t, self.base_cutoff)
            }
            (OperatorKind::Delta, BlockSpec::Orbit { grid }) => delta_orbit_matrix(grid),
            (OperatorKind::Delta, BlockSpec::DenseLoop { ml }) => {
                delta_dense(ml, self.t, self.base_cutoff)?
            }
            (OperatorKind::Chiral { adjoint }, BlockSpec::FluxFiber { k }) => {
                let FamilySpec::Flux(flux) = &self.family else {
                    unreachable!("flux block on a non-flux family");
                };
                let p = chiral_block(flux, *k, self.t, self.base_cutoff);
                if *adjoint {
                    p.adjoint()
                } else {
                    p
                }
            }
            (OperatorKind::Chiral { adjoint }, BlockSpec::Orbit { grid }) => {
                let p = chiral_orbit_matrix(grid);
                if *adjoint {
                    p.adjoint()
                } else {
                    p
                }
            }
            (OperatorKind::Chiral { .. }, BlockSpec::DenseLoop { .. }) => {
                return Err(AssembleError::Unsupported(
                    "no chiral realization for matrix loops".into(),
                ))
            }
        };
        Ok(m)
    }

    /// Total truncated dimension.
    pub fn dimension(&self) -> usize {
        let chiral = matches!(self.kind, OperatorKind::Chiral { .. });
        self.blocks
            .iter()
            .map(|b| match b {
                BlockSpec::FluxFiber { .. } => {
                    let n = 2 * self.base_cutoff + 1;
                    if chiral {
                        n
                    } else {
                        2 * n
                    }
                }
                BlockSpec::Orbit { grid } => {
                    if chiral {
                        grid.len()
                    } else {
                        2 * grid.len()
                    }
                }
                BlockSpec::DenseLoop { ml } => (ml.rows + ml.cols) * (2 * self.base_cutoff + 1),
            })
            .sum()
    }
}

fn block_eigenvalues(op: &AssembledOperator, spec: &BlockSpec) -> Result<Vec<f64>, AssembleError> {
    let fail = |source: LinalgError| AssembleError::EigensolveFailure {
        block: spec.label(),
        source,
    };
    match spec {
        BlockSpec::FluxFiber { k } => {
            let FamilySpec::Flux(flux) = &op.family else {
                unreachable!("flux block on a non-flux family");
            };
            let h = delta_block(flux, *k, op.t, op.base_cutoff);
            paired_block_eigenvalues(&h).map_err(fail)
        }
        BlockSpec::Orbit { grid } => delta_orbit_eigenvalues(grid).map_err(fail),
        BlockSpec::DenseLoop { ml } => {
            let h = delta_dense(ml, op.t, op.base_cutoff)?;
            hermitian_eigenvalues(&h).map_err(fail)
        }
    }
}

/// All eigenvalues of a truncated delta_t. Blocks are solved independently
/// (in parallel) and merged in block order, so the result is deterministic.
pub fn spectrum(op: &AssembledOperator) -> Result<TotalSpectrum, AssembleError> {
    if op.kind != OperatorKind::Delta {
        return Err(AssembleError::Unsupported(
            "eigenvalue listing applies to the self-adjoint delta_t; \
             query the chiral operator through its singular data"
                .into(),
        ));
    }
    let per_block: Vec<(String, Vec<f64>)> = op
        .blocks
        .par_iter()
        .map(|spec| Ok((spec.label(), block_eigenvalues(op, spec)?)))
        .collect::<Result<_, AssembleError>>()?;
    let mut eigenvalues: Vec<f64> =
        per_block.iter().flat_map(|(_, v)| v.iter().copied()).collect();
    // Stable sort: ties keep block order, identical across runs.
    eigenvalues.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    let max_abs = eigenvalues
        .iter()
        .fold(0.0f64, |acc, &x| acc.max(x.abs()));
    let tol = 1e-10 * (1.0 + max_abs);
    let symmetry_flag = eigenvalues
        .iter()
        .zip(eigenvalues.iter().rev())
        .all(|(a, b)| (a + b).abs() <= tol);
    Ok(TotalSpectrum {
        t: op.t,
        fiber_cutoff: op.fiber_cutoff,
        base_cutoff: op.base_cutoff,
        blocks: per_block,
        eigenvalues,
        symmetry_flag,
    })
}

/// CSV dump of a spectrum, one eigenvalue per row.
pub fn spectrum_csv(spec: &TotalSpectrum) -> String {
    let mut out = String::from("t,fiber_cutoff,base_cutoff,block,eigenvalue_index,eigenvalue\n");
    for (label, evals) in &spec.blocks {
        for (i, l) in evals.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{:.17e}\n",
                spec.t, spec.fiber_cutoff, spec.base_cutoff, label, i, l
            ));
        }
    }
    out
}

/// Kernel threshold for the chiral realization. The near-kernel singular
/// values of P_t scale like the harmonic-oscillator gap sqrt(t |c| / pi);
/// the floor covers the zero-winding case.
pub fn default_kernel_tau(t: f64, winding: i64) -> f64 {
    (0.15 * (t * winding.abs() as f64 / std::f64::consts::PI).sqrt()).max(1e-3)
}

/// Number of singular values of P_t below tau, on each side:
/// (dim ker P_t, dim ker P_t*) in the truncation.
pub fn p_t_kernel_counts(op: &AssembledOperator, tau: f64) -> Result<(usize, usize), AssembleError> {
    let OperatorKind::Chiral { .. } = op.kind else {
        return Err(AssembleError::Unsupported(
            "kernel counting applies to the chiral realization".into(),
        ));
    };
    let sign = op.chiral_sign();
    let mut ker = 0usize;
    let mut coker = 0usize;
    for (idx, spec) in op.blocks.iter().enumerate() {
        match spec {
            BlockSpec::Orbit { grid } => {
                let (a, b) = chiral_kernel_counts(grid, tau);
                if sign > 0.0 {
                    ker += a;
                    coker += b;
                } else {
                    ker += b;
                    coker += a;
                }
            }
            BlockSpec::FluxFiber { .. } | BlockSpec::DenseLoop { .. } => {
                let p = op.block_matrix(idx)?;
                let fail = |source: LinalgError| AssembleError::EigensolveFailure {
                    block: spec.label(),
                    source,
                };
                let gram = p.adjoint().mul(&p);
                let co_gram = p.mul(&p.adjoint());
                let t2 = tau * tau;
                ker += hermitian_eigenvalues(&gram)
                    .map_err(fail)?
                    .iter()
                    .filter(|&&m| m < t2)
                    .count();
                coker += hermitian_eigenvalues(&co_gram)
                    .map_err(|source| AssembleError::EigensolveFailure {
                        block: spec.label(),
                        source,
                    })?
                    .iter()
                    .filter(|&&m| m < t2)
                    .count();
            }
        }
    }
    Ok((ker, coker))
}

/// dim ker P_t - dim ker P_t* at the default threshold.
pub fn p_t_index(op: &AssembledOperator) -> Result<i64, AssembleError> {
    let winding = match &op.family {
        FamilySpec::Flux(flux) => flux.winding,
        FamilySpec::MatrixLoop(_) => 0,
    };
    let (ker, coker) = p_t_kernel_counts(op, default_kernel_tau(op.t, winding))?;
    Ok(ker as i64 - coker as i64)
}

/// Conservative reach of a zero-winding fiber block: eigenvalues of the
/// k-block of delta_t satisfy lambda^2 >= min_theta |k + a|^2 - t C with
/// C = sum_p |p a_hat_p| (the commutator of the mode diagonal with the
/// Toeplitz part). Blocks whose reach exceeds the window by a unit margin
/// cannot contribute window eigenvalues and are skipped identically at
/// every truncation.
fn flux_block_out_of_window(flux: &FluxFamily, k: i64, window: f64) -> bool {
    let samples = 1024;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..samples {
        let v = k as f64 + flux.a(std::f64::consts::TAU * i as f64 / samples as f64);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo <= 0.0 && hi >= 0.0 {
        return false;
    }
    lo.abs().min(hi.abs()) >= window + 1.0
}

/// Windowed zeta/eta partial sums of a truncated delta_t spectrum:
/// sum over tau < |lambda| <= window of |lambda|^(-s) and
/// sign(lambda) |lambda|^(-s), accumulated in block order. The floor tau
/// keeps kernel modes (and for winding families the exponentially small
/// near-kernel cluster, which the block solvers only resolve to the
/// sqrt(eps) noise floor) out of the negative powers.
fn window_probes(
    op: &AssembledOperator,
    probe_s: f64,
    window: f64,
) -> Result<(f64, f64), AssembleError> {
    let floor = match &op.family {
        FamilySpec::Flux(flux) if flux.winding != 0 => default_kernel_tau(op.t, flux.winding),
        _ => crate::families::kernel_threshold(window),
    };
    let contributions: Vec<(f64, f64)> = op
        .blocks
        .par_iter()
        .map(|spec| {
            if let BlockSpec::FluxFiber { k } = spec {
                let FamilySpec::Flux(flux) = &op.family else {
                    unreachable!("flux block on a non-flux family");
                };
                if flux_block_out_of_window(flux, *k, window) {
                    return Ok((0.0, 0.0));
                }
            }
            let evals = block_eigenvalues(op, spec)?;
            let mut zeta = 0.0;
            let mut eta = 0.0;
            for &l in &evals {
                let a = l.abs();
                if a > floor && a <= window {
                    let w = a.powf(-probe_s);
                    zeta += w;
                    eta += l.signum() * w;
                }
            }
            Ok((zeta, eta))
        })
        .collect::<Result<_, AssembleError>>()?;
    let mut zeta = 0.0;
    let mut eta = 0.0;
    for (z, e) in contributions {
        zeta += z;
        eta += e;
    }
    Ok((zeta, eta))
}

/// Run the window probes over a sequence of increasing truncations and
/// report successive differences.
pub fn truncation_report(
    family: &FamilySpec,
    t: f64,
    truncations: &[(usize, usize)],
    probe_s: f64,
) -> Result<TruncationReport, AssembleError> {
    if truncations.is_empty() {
        return Err(AssembleError::InvalidParameter(
            "truncation sequence is empty".into(),
        ));
    }
    for w in truncations.windows(2) {
        if w[1].0 < w[0].0 || w[1].1 < w[0].1 {
            return Err(AssembleError::InvalidParameter(
                "truncation sequence must be non-decreasing in both cutoffs".into(),
            ));
        }
    }
    let window = DEFAULT_ENERGY_WINDOW;
    let (k_min, m_min) = recommended_cutoffs(t, window);
    let mut rows: Vec<TruncationRow> = Vec::with_capacity(truncations.len());
    for &(k_cutoff, m_cutoff) in truncations {
        let op = assemble_delta_t(family, t, k_cutoff, m_cutoff)?;
        let (zeta_probe, eta_probe) = window_probes(&op, probe_s, window)?;
        let diff_from_prev = rows.last().map(|prev: &TruncationRow| {
            (zeta_probe - prev.zeta_probe)
                .abs()
                .max((eta_probe - prev.eta_probe).abs())
        });
        rows.push(TruncationRow {
            fiber_cutoff: k_cutoff,
            base_cutoff: m_cutoff,
            zeta_probe,
            eta_probe,
            diff_from_prev,
            insufficient: k_cutoff < k_min || m_cutoff < m_min,
        });
    }
    let diffs: Vec<f64> = rows.iter().filter_map(|r| r.diff_from_prev).collect();
    let monotone = diffs.windows(2).all(|w| w[1] <= w[0]);
    Ok(TruncationReport {
        t,
        probe_s,
        window,
        rows,
        monotone,
    })
}
