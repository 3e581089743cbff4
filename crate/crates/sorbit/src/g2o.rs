//! Reading and writing g2o pose-graph files.
//!
//! Supported records are `VERTEX_SE2`, `VERTEX_SE3:QUAT`, `EDGE_SE2` and
//! `EDGE_SE3:QUAT`; `FIX` lines are accepted and ignored. Anisotropic
//! information matrices are reduced to scalar precisions:
//!
//! * SE(3): `τ = 3 / tr(Σ_t)` and `κ = 3 / (2 tr(Σ_R))`
//! * SE(2): `τ = 2 / tr(Σ_t)` and `κ = 1 / σ_θ²`
//!
//! where `Σ = Λ⁻¹` is the covariance of the full information matrix `Λ` and
//! `Σ_t`, `Σ_R` are its translational and rotational diagonal blocks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, Matrix3, Quaternion, Rotation3, UnitQuaternion};
use sorbit_core::graph::{Mode, PoseGraph, PoseSet, RelativeMeasurement};
use sorbit_core::synth::rotation_2d;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum G2oError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("file mixes SE2 and SE3 records")]
    MixedDimension,
}

fn parse_err(line: usize, reason: impl Into<String>) -> G2oError {
    G2oError::Parse { line, reason: reason.into() }
}

/// A parsed g2o file.
#[derive(Debug, Clone, PartialEq)]
pub struct G2oFile {
    pub graph: PoseGraph,
    /// Original vertex ids, indexed by compacted node index.
    pub ids: Vec<u64>,
    /// Vertex estimates present in the file, by compacted node index.
    pub vertices: BTreeMap<usize, (DMatrix<f64>, DVector<f64>)>,
}

struct RawEdge {
    line: usize,
    i: u64,
    j: u64,
    rotation: DMatrix<f64>,
    translation: DVector<f64>,
    kappa: f64,
    tau: f64,
}

fn numbers(line: usize, fields: &[&str]) -> Result<Vec<f64>, G2oError> {
    fields
        .iter()
        .map(|f| match f.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(_) => Err(parse_err(line, format!("non-finite value `{f}`"))),
            Err(_) => Err(parse_err(line, format!("invalid number `{f}`"))),
        })
        .collect()
}

fn id(line: usize, field: &str) -> Result<u64, G2oError> {
    field.parse::<u64>().map_err(|_| parse_err(line, format!("invalid vertex id `{field}`")))
}

fn quaternion_rotation(line: usize, q: &[f64]) -> Result<DMatrix<f64>, G2oError> {
    let quat = Quaternion::new(q[3], q[0], q[1], q[2]);
    if !(quat.norm() > 1e-12) {
        return Err(parse_err(line, "zero quaternion"));
    }
    let r = UnitQuaternion::from_quaternion(quat).to_rotation_matrix();
    Ok(DMatrix::from_column_slice(3, 3, r.matrix().as_slice()))
}

/// Symmetric matrix from its upper triangle listed row by row.
fn upper_triangular(dim: usize, entries: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    let mut k = 0;
    for r in 0..dim {
        for c in r..dim {
            m[(r, c)] = entries[k];
            m[(c, r)] = entries[k];
            k += 1;
        }
    }
    m
}

fn covariance(line: usize, info: DMatrix<f64>) -> Result<DMatrix<f64>, G2oError> {
    let chol = info.cholesky().ok_or_else(|| parse_err(line, "information matrix is not positive definite"))?;
    Ok(chol.inverse())
}

fn precisions(line: usize, kappa: f64, tau: f64) -> Result<(f64, f64), G2oError> {
    if !(kappa > 0.0 && kappa.is_finite() && tau > 0.0 && tau.is_finite()) {
        return Err(parse_err(line, "information matrix yields non-positive precision"));
    }
    Ok((kappa, tau))
}

/// Isotropic `(κ, τ)` of an SE(3) information matrix.
pub fn isotropize_se3(info: &DMatrix<f64>) -> Option<(f64, f64)> {
    let sigma = covariance(0, info.clone()).ok()?;
    let tau = 3.0 / sigma.view((0, 0), (3, 3)).trace();
    let kappa = 3.0 / (2.0 * sigma.view((3, 3), (3, 3)).trace());
    precisions(0, kappa, tau).ok()
}

/// Isotropic `(κ, τ)` of an SE(2) information matrix.
pub fn isotropize_se2(info: &DMatrix<f64>) -> Option<(f64, f64)> {
    let sigma = covariance(0, info.clone()).ok()?;
    let tau = 2.0 / (sigma[(0, 0)] + sigma[(1, 1)]);
    let kappa = 1.0 / sigma[(2, 2)];
    precisions(0, kappa, tau).ok()
}

/// Parses g2o text. Vertex ids are compacted to `0..n` in ascending order.
pub fn parse_g2o(text: &str) -> Result<G2oFile, G2oError> {
    let mut dim: Option<usize> = None;
    let mut set_dim = |d: usize| match dim {
        Some(prev) if prev != d => Err(G2oError::MixedDimension),
        _ => {
            dim = Some(d);
            Ok(())
        }
    };
    let mut edges = Vec::new();
    let mut raw_vertices: BTreeMap<u64, (DMatrix<f64>, DVector<f64>)> = BTreeMap::new();
    let mut ids = BTreeSet::new();

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("");
        let fields: Vec<&str> = content.split_whitespace().collect();
        let Some((&tag, rest)) = fields.split_first() else { continue };
        let expect = |n: usize| {
            if rest.len() == n {
                Ok(())
            } else {
                Err(parse_err(line, format!("{tag} expects {n} fields, found {}", rest.len())))
            }
        };
        match tag {
            "VERTEX_SE3:QUAT" => {
                expect(8)?;
                set_dim(3)?;
                let v = id(line, rest[0])?;
                let x = numbers(line, &rest[1..])?;
                let pose = (quaternion_rotation(line, &x[3..7])?, DVector::from_row_slice(&x[..3]));
                if raw_vertices.insert(v, pose).is_some() {
                    return Err(parse_err(line, format!("duplicate vertex {v}")));
                }
                ids.insert(v);
            }
            "VERTEX_SE2" => {
                expect(4)?;
                set_dim(2)?;
                let v = id(line, rest[0])?;
                let x = numbers(line, &rest[1..])?;
                if raw_vertices.insert(v, (rotation_2d(x[2]), DVector::from_row_slice(&x[..2]))).is_some() {
                    return Err(parse_err(line, format!("duplicate vertex {v}")));
                }
                ids.insert(v);
            }
            "EDGE_SE3:QUAT" => {
                expect(30)?;
                set_dim(3)?;
                let (i, j) = (id(line, rest[0])?, id(line, rest[1])?);
                let x = numbers(line, &rest[2..])?;
                let sigma = covariance(line, upper_triangular(6, &x[7..]))?;
                let (kappa, tau) = precisions(
                    line,
                    3.0 / (2.0 * sigma.view((3, 3), (3, 3)).trace()),
                    3.0 / sigma.view((0, 0), (3, 3)).trace(),
                )?;
                let rotation = quaternion_rotation(line, &x[3..7])?;
                edges.push(RawEdge { line, i, j, rotation, translation: DVector::from_row_slice(&x[..3]), kappa, tau });
                ids.extend([i, j]);
            }
            "EDGE_SE2" => {
                expect(11)?;
                set_dim(2)?;
                let (i, j) = (id(line, rest[0])?, id(line, rest[1])?);
                let x = numbers(line, &rest[2..])?;
                let sigma = covariance(line, upper_triangular(3, &x[3..]))?;
                let (kappa, tau) = precisions(line, 1.0 / sigma[(2, 2)], 2.0 / (sigma[(0, 0)] + sigma[(1, 1)]))?;
                edges.push(RawEdge { line, i, j, rotation: rotation_2d(x[2]), translation: DVector::from_row_slice(&x[..2]), kappa, tau });
                ids.extend([i, j]);
            }
            "FIX" => {}
            other => return Err(parse_err(line, format!("unsupported record type `{other}`"))),
        }
    }

    let d = dim.ok_or_else(|| parse_err(0, "no pose records found"))?;
    let ids: Vec<u64> = ids.into_iter().collect();
    let index: BTreeMap<u64, usize> = ids.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let lines: Vec<usize> = edges.iter().map(|e| e.line).collect();
    let measurements = edges
        .into_iter()
        .map(|e| RelativeMeasurement::pose(index[&e.i], index[&e.j], e.rotation, e.translation, e.kappa, e.tau))
        .collect();
    let graph = PoseGraph::new(d, ids.len(), Mode::Full, measurements).map_err(|err| match err {
        sorbit_core::Error::InvalidMeasurement { edge, reason } => parse_err(lines[edge], reason),
        other => parse_err(0, other.to_string()),
    })?;
    let vertices = raw_vertices.into_iter().map(|(v, pose)| (index[&v], pose)).collect();
    Ok(G2oFile { graph, ids, vertices })
}

fn push_values(out: &mut String, values: impl IntoIterator<Item = f64>) {
    for v in values {
        // Display prints the shortest decimal that parses back to the same f64.
        let _ = write!(out, " {v}");
    }
}

fn quaternion_of(r: &DMatrix<f64>) -> [f64; 4] {
    let m = Matrix3::from_iterator(r.iter().copied());
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m));
    [q.i, q.j, q.k, q.w]
}

/// Serializes a full-pose graph with isotropic information matrices that
/// reproduce each edge's `κ` and `τ`. Vertex records are written for the
/// supplied poses; `ids` maps node indices back to file ids.
pub fn write_g2o(graph: &PoseGraph, poses: Option<&PoseSet>, ids: Option<&[u64]>) -> Result<String, sorbit_core::Error> {
    if graph.mode() != Mode::Full {
        return Err(sorbit_core::Error::Mode);
    }
    let d = graph.d();
    let name = |k: usize| ids.map_or(k as u64, |v| v[k]);
    let mut out = String::new();
    if let Some(p) = poses {
        for k in 0..graph.n() {
            let (r, t) = (p.rotations.block(k), &p.translations[k]);
            if d == 3 {
                out.push_str(&format!("VERTEX_SE3:QUAT {}", name(k)));
                push_values(&mut out, t.iter().copied().chain(quaternion_of(&r)));
            } else {
                out.push_str(&format!("VERTEX_SE2 {}", name(k)));
                push_values(&mut out, [t[0], t[1], r[(1, 0)].atan2(r[(0, 0)])]);
            }
            out.push('\n');
        }
    }
    for e in graph.edges() {
        let t = e.translation.as_ref().expect("full mode");
        let tau = e.tau.expect("full mode");
        if d == 3 {
            out.push_str(&format!("EDGE_SE3:QUAT {} {}", name(e.i), name(e.j)));
            push_values(&mut out, t.iter().copied().chain(quaternion_of(&e.rotation)));
            let diag = [tau, tau, tau, 2.0 * e.kappa, 2.0 * e.kappa, 2.0 * e.kappa];
            for r in 0..6 {
                push_values(&mut out, (r..6).map(|c| if r == c { diag[r] } else { 0.0 }));
            }
        } else {
            out.push_str(&format!("EDGE_SE2 {} {}", name(e.i), name(e.j)));
            push_values(&mut out, [t[0], t[1], e.rotation[(1, 0)].atan2(e.rotation[(0, 0)])]);
            push_values(&mut out, [tau, 0.0, 0.0, tau, 0.0, e.kappa]);
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const IDENTITY_EDGE: &str = "EDGE_SE3:QUAT 0 1 1 0 0 0 0 0 1 1 0 0 0 0 0 1 0 0 0 0 1 0 0 0 1 0 0 1 0 1";

    #[test]
    fn identity_quaternion_edge() {
        let f = parse_g2o(IDENTITY_EDGE).unwrap();
        let e = &f.graph.edges()[0];
        assert_eq!(e.rotation, DMatrix::identity(3, 3));
        assert_eq!(e.translation.as_ref().unwrap().as_slice(), &[1.0, 0.0, 0.0]);
        assert!((e.tau.unwrap() - 1.0).abs() < 1e-15);
        assert!((e.kappa - 0.5).abs() < 1e-15);
    }

    #[test]
    fn vertices_only() {
        let f = parse_g2o("VERTEX_SE2 4 0 0 0\nVERTEX_SE2 9 1 0 0.5\n").unwrap();
        assert_eq!((f.graph.n(), f.graph.edges().len()), (2, 0));
        assert_eq!(f.ids, vec![4, 9]);
    }

    #[test]
    fn malformed_records() {
        assert!(matches!(parse_g2o("EDGE_SE3:QUAT 0 1 2 3"), Err(G2oError::Parse { line: 1, .. })));
        assert_eq!(parse_g2o("VERTEX_SE2 0 0 0 0\nVERTEX_SE3:QUAT 1 0 0 0 0 0 0 1"), Err(G2oError::MixedDimension));
        assert!(matches!(parse_g2o("# header\nVERTEX_SE2 0 0 x 0"), Err(G2oError::Parse { line: 2, .. })));
        assert!(matches!(parse_g2o("EDGE_SE2 0 1 1 0 0 1 0 0 1 0 -1"), Err(G2oError::Parse { line: 1, .. })));
        assert!(matches!(parse_g2o("LANDMARK 0 1"), Err(G2oError::Parse { .. })));
        let dup = format!("{IDENTITY_EDGE}\n{IDENTITY_EDGE}");
        assert!(matches!(parse_g2o(&dup), Err(G2oError::Parse { line: 2, .. })));
    }

    #[test]
    fn se2_isotropization() {
        let info = DMatrix::from_row_slice(3, 3, &[4.0, 0.0, 0.0, 0.0, 4.0, 0.0, 0.0, 0.0, 9.0]);
        let (kappa, tau) = isotropize_se2(&info).unwrap();
        assert!((kappa - 9.0).abs() < 1e-12 && (tau - 4.0).abs() < 1e-12);
    }
}
