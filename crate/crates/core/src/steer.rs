//! Representation interventions: orthogonal erasure and additive shifts.

use crate::cav::Cav;
use crate::error::{Error, Result};
use crate::linalg::{check_rows, dot, EmbeddingMatrix, UnitVector};

fn check_dim(h: &[f64], v: &UnitVector) -> Result<()> {
    if h.len() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: v.dim(),
            got: h.len(),
        });
    }
    Ok(())
}

/// `h - (v·h) v`. Rows already orthogonal to `v` come back bit-identical.
pub fn orthogonalize(h: &[f64], v: &UnitVector) -> Result<Vec<f64>> {
    check_dim(h, v)?;
    let c = dot(h, v.as_slice());
    if c == 0.0 {
        return Ok(h.to_vec());
    }
    Ok(h.iter().zip(v.as_slice()).map(|(x, u)| x - c * u).collect())
}

/// `h + alpha v`.
pub fn additive_steer(h: &[f64], v: &UnitVector, alpha: f64) -> Result<Vec<f64>> {
    check_dim(h, v)?;
    if alpha == 0.0 {
        return Ok(h.to_vec());
    }
    Ok(h.iter().zip(v.as_slice()).map(|(x, u)| x + alpha * u).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SteerMode {
    Orthogonalize,
    Additive(f64),
}

fn steer_rows(m: &EmbeddingMatrix, rows: &[usize], v: &UnitVector, mode: SteerMode) -> Result<EmbeddingMatrix> {
    check_rows(rows, m.n())?;
    if m.d() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: v.dim(),
            got: m.d(),
        });
    }
    let d = m.d();
    let mut data = m.data().to_vec();
    for &i in rows {
        let out = match mode {
            SteerMode::Orthogonalize => orthogonalize(m.row(i), v)?,
            SteerMode::Additive(alpha) => additive_steer(m.row(i), v, alpha)?,
        };
        data[i * d..(i + 1) * d].copy_from_slice(&out);
    }
    EmbeddingMatrix::new(m.n(), d, data)
}

/// Copy of `m` with the listed rows orthogonalised against `v`; every other
/// row is copied verbatim.
pub fn orthogonalize_matrix(m: &EmbeddingMatrix, rows: &[usize], v: &UnitVector) -> Result<EmbeddingMatrix> {
    steer_rows(m, rows, v, SteerMode::Orthogonalize)
}

/// An embedding matrix before and after steering with one CAV.
#[derive(Clone, Debug)]
pub struct SteeredBatch {
    pub original: EmbeddingMatrix,
    pub steered: EmbeddingMatrix,
    pub cav: Cav,
    pub mode: SteerMode,
    /// Rows that were modified.
    pub rows: Vec<usize>,
}

impl SteeredBatch {
    pub fn apply(m: &EmbeddingMatrix, rows: &[usize], cav: &Cav, mode: SteerMode) -> Result<Self> {
        Ok(Self {
            steered: steer_rows(m, rows, &cav.direction, mode)?,
            original: m.clone(),
            cav: cav.clone(),
            mode,
            rows: rows.to_vec(),
        })
    }

    /// Largest `|r·v| / max(1, ‖r‖)` over the steered rows.
    pub fn max_residual(&self) -> f64 {
        let v = self.cav.direction.as_slice();
        self.rows
            .iter()
            .map(|&i| {
                let r = self.steered.row(i);
                dot(r, v).abs() / crate::linalg::norm(r).max(1.0)
            })
            .fold(0.0, f64::max)
    }
}
