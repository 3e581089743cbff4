//! JSON estimate files, ground-truth sidecars and MatrixMarket export.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sorbit_core::graph::{PoseSet, RotationSet};
use sorbit_core::linalg::SparseSymMatrix;
use sorbit_core::synth::CubeParams;

/// Poses as plain arrays: each rotation row-major, each translation a vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseFile {
    pub d: usize,
    pub n: usize,
    pub rotations: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translations: Option<Vec<Vec<f64>>>,
    /// Generator parameters, present in ground-truth sidecars.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<CubeParams>,
}

impl PoseFile {
    pub fn from_rotations(r: &RotationSet) -> Self {
        let rotations = r.blocks().iter().map(|b| b.transpose().iter().copied().collect()).collect();
        Self { d: r.d(), n: r.n(), rotations, translations: None, params: None }
    }

    pub fn from_poses(p: &PoseSet) -> Self {
        let mut out = Self::from_rotations(&p.rotations);
        out.translations = Some(p.translations.iter().map(|t| t.iter().copied().collect()).collect());
        out
    }

    pub fn rotation_set(&self) -> Result<RotationSet, String> {
        if self.rotations.len() != self.n {
            return Err(format!("expected {} rotations, found {}", self.n, self.rotations.len()));
        }
        let blocks = self
            .rotations
            .iter()
            .map(|r| {
                if r.len() == self.d * self.d {
                    Ok(DMatrix::from_row_slice(self.d, self.d, r))
                } else {
                    Err(format!("rotation has {} entries, expected {}", r.len(), self.d * self.d))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        RotationSet::from_blocks(&blocks).map_err(|e| e.to_string())
    }

    pub fn pose_set(&self) -> Result<PoseSet, String> {
        let rotations = self.rotation_set()?;
        match &self.translations {
            None => Ok(PoseSet::from_rotations(rotations)),
            Some(ts) => {
                let ts = ts.iter().map(|t| DVector::from_column_slice(t)).collect();
                PoseSet::new(rotations, ts).map_err(|e| e.to_string())
            }
        }
    }
}

/// File-level failure that names the offending path.
#[derive(Debug, thiserror::Error)]
#[error("{}: {reason}", path.display())]
pub struct FileError {
    pub path: PathBuf,
    pub reason: String,
}

impl FileError {
    pub fn new(path: &Path, reason: impl ToString) -> Self {
        Self { path: path.to_path_buf(), reason: reason.to_string() }
    }
}

pub fn read_text(path: &Path) -> Result<String, FileError> {
    std::fs::read_to_string(path).map_err(|e| FileError::new(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), FileError> {
    std::fs::write(path, text).map_err(|e| FileError::new(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, FileError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| FileError::new(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FileError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| FileError::new(path, e))?;
    write_text(path, &(text + "\n"))
}

/// MatrixMarket coordinate text for a symmetric matrix (lower triangle, 1-based).
pub fn matrix_market(m: &SparseSymMatrix) -> String {
    let entries: Vec<(usize, usize, f64)> = m.upper_triplets().collect();
    let mut out = String::from("%%MatrixMarket matrix coordinate real symmetric\n");
    out.push_str(&format!("{} {} {}\n", m.dim(), m.dim(), entries.len()));
    for (r, c, v) in entries {
        out.push_str(&format!("{} {} {v}\n", c + 1, r + 1));
    }
    out
}
