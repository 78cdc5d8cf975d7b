//! JSON (de)serialization of family descriptions.
//!
//! Flux families:
//!   {"type": "flux", "fourier": [[m, re, im], ...], "winding": c,
//!    "fiber_mode_cutoff": K}
//! Matrix loops:
//!   {"type": "matrix_loop", "rows": m, "cols": n,
//!    "fourier": [{"mode": m, "entries": [[[re, im], ...], ...]}, ...]}

use super::{FamilyError, FamilySpec, FluxFamily, MatrixLoop};
use crate::linalg::CMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;

fn default_cutoff() -> usize {
    32
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FluxDoc {
    #[serde(rename = "type")]
    kind: String,
    fourier: Vec<(i64, f64, f64)>,
    #[serde(default)]
    winding: i64,
    #[serde(default = "default_cutoff")]
    fiber_mode_cutoff: usize,
}

#[derive(Serialize, Deserialize)]
struct MatrixModeDoc {
    mode: i64,
    /// rows x cols nested array of [re, im] pairs.
    entries: Vec<Vec<(f64, f64)>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixLoopDoc {
    #[serde(rename = "type")]
    kind: String,
    rows: usize,
    cols: usize,
    fourier: Vec<MatrixModeDoc>,
}

fn schema_err(err: impl std::fmt::Display) -> FamilyError {
    FamilyError::Schema(err.to_string())
}

/// Parse a family description from JSON text.
pub fn parse_family(text: &str) -> Result<FamilySpec, FamilyError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(schema_err)?;
    let kind = value
        .get("type")
        .and_then(|v| v.as_str())
        .ok_or_else(|| FamilyError::Schema("missing string field \"type\"".into()))?
        .to_owned();
    match kind.as_str() {
        "flux" => {
            let doc: FluxDoc = serde_json::from_value(value).map_err(schema_err)?;
            let modes = doc
                .fourier
                .iter()
                .map(|&(m, re, im)| (m, Complex64::new(re, im)))
                .collect();
            Ok(FamilySpec::Flux(FluxFamily::new(
                modes,
                doc.winding,
                doc.fiber_mode_cutoff,
            )?))
        }
        "matrix_loop" => {
            let doc: MatrixLoopDoc = serde_json::from_value(value).map_err(schema_err)?;
            let mut coeffs = Vec::with_capacity(doc.fourier.len());
            for mode_doc in &doc.fourier {
                if mode_doc.entries.len() != doc.rows
                    || mode_doc.entries.iter().any(|r| r.len() != doc.cols)
                {
                    return Err(FamilyError::Schema(format!(
                        "mode {} entries are not a {}x{} array",
                        mode_doc.mode, doc.rows, doc.cols
                    )));
                }
                let m = CMatrix::from_fn(doc.rows, doc.cols, |i, j| {
                    let (re, im) = mode_doc.entries[i][j];
                    Complex64::new(re, im)
                });
                coeffs.push((mode_doc.mode, m));
            }
            Ok(FamilySpec::MatrixLoop(MatrixLoop::new(
                doc.rows, doc.cols, coeffs,
            )?))
        }
        other => Err(FamilyError::Schema(format!(
            "unknown family type {other:?}"
        ))),
    }
}

/// Read and parse a family description from a file.
pub fn load_family(path: &Path) -> Result<FamilySpec, FamilyError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| FamilyError::Io(format!("{}: {e}", path.display())))?;
    parse_family(&text)
}

/// Serialize a family back to canonical JSON text.
pub fn serialize_family(family: &FamilySpec) -> String {
    match family {
        FamilySpec::Flux(flux) => {
            let doc = FluxDoc {
                kind: "flux".into(),
                fourier: flux
                    .modes()
                    .iter()
                    .map(|&(m, c)| (m, c.re, c.im))
                    .collect(),
                winding: flux.winding,
                fiber_mode_cutoff: flux.fiber_mode_cutoff,
            };
            serde_json::to_string_pretty(&doc).expect("flux serialization")
        }
        FamilySpec::MatrixLoop(ml) => {
            let doc = MatrixLoopDoc {
                kind: "matrix_loop".into(),
                rows: ml.rows,
                cols: ml.cols,
                fourier: ml
                    .coeffs()
                    .iter()
                    .map(|(m, mat)| MatrixModeDoc {
                        mode: *m,
                        entries: (0..ml.rows)
                            .map(|i| {
                                (0..ml.cols)
                                    .map(|j| (mat[(i, j)].re, mat[(i, j)].im))
                                    .collect()
                            })
                            .collect(),
                    })
                    .collect(),
            };
            serde_json::to_string_pretty(&doc).expect("matrix loop serialization")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flux_round_trip() {
        let text = r#"{"type": "flux",
            "fourier": [[0, 0.5, 0.0], [1, 0.0, -0.1], [-1, 0.0, 0.1]],
            "winding": 2, "fiber_mode_cutoff": 16}"#;
        let fam = parse_family(text).unwrap();
        let FamilySpec::Flux(flux) = &fam else {
            panic!("expected flux family")
        };
        assert_eq!(flux.winding, 2);
        assert_eq!(flux.fiber_mode_cutoff, 16);
        assert!((flux.a(0.0) - 0.5).abs() < 1e-15);
        let again = parse_family(&serialize_family(&fam)).unwrap();
        let FamilySpec::Flux(flux2) = &again else {
            panic!("expected flux family")
        };
        assert_eq!(flux.modes(), flux2.modes());
        assert_eq!(flux2.winding, 2);
    }

    #[test]
    fn flux_defaults() {
        let fam = parse_family(r#"{"type": "flux", "fourier": [[0, 0.25, 0.0]]}"#).unwrap();
        let FamilySpec::Flux(flux) = &fam else {
            panic!("expected flux family")
        };
        assert_eq!(flux.winding, 0);
        assert_eq!(flux.fiber_mode_cutoff, 32);
    }

    #[test]
    fn matrix_loop_round_trip() {
        let text = r#"{"type": "matrix_loop", "rows": 1, "cols": 2,
            "fourier": [
              {"mode": 1, "entries": [[[0.5, 0.0], [0.0, -0.5]]]},
              {"mode": -1, "entries": [[[0.5, 0.0], [0.0, 0.5]]]}
            ]}"#;
        let fam = parse_family(text).unwrap();
        let FamilySpec::MatrixLoop(ml) = &fam else {
            panic!("expected matrix loop")
        };
        let at0 = ml.at(0.0);
        assert!((at0[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!(at0[(0, 1)].norm() < 1e-15);
        let again = parse_family(&serialize_family(&fam)).unwrap();
        let FamilySpec::MatrixLoop(ml2) = &again else {
            panic!("expected matrix loop")
        };
        let d = ml2.at(1.3).sub(&ml.at(1.3));
        assert!(d.max_norm() < 1e-15);
    }

    #[test]
    fn rejects_unknown_fields_and_bad_shapes() {
        assert!(matches!(
            parse_family(r#"{"type": "flux", "fourier": [], "extra": 1}"#),
            Err(FamilyError::Schema(_))
        ));
        assert!(matches!(
            parse_family(r#"{"fourier": []}"#),
            Err(FamilyError::Schema(_))
        ));
        assert!(matches!(
            parse_family(r#"{"type": "spin"}"#),
            Err(FamilyError::Schema(_))
        ));
        // One-sided Fourier data violates reality of the potential.
        assert!(matches!(
            parse_family(r#"{"type": "flux", "fourier": [[1, 0.3, 0.0]]}"#),
            Err(FamilyError::RealityViolation { .. })
        ));
        // Entries array with the wrong shape.
        let bad = r#"{"type": "matrix_loop", "rows": 2, "cols": 2,
            "fourier": [{"mode": 0, "entries": [[[1.0, 0.0]]]}]}"#;
        assert!(matches!(parse_family(bad), Err(FamilyError::Schema(_))));
    }
}
