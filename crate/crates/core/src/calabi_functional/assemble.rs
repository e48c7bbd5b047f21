use super::adjoint::MuPipeline;
use super::functional::d_apply;
use crate::error::{KflowError, Result};
use crate::grid_core::ScalarField;
use crate::kahler_geometry::KahlerPotential;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Largest grid accepted by [`assemble_d`].
pub const MAX_ASSEMBLY_POINTS: usize = 4096;
/// Singular values below this fraction of the largest count as kernel.
pub const KERNEL_REL_TOL: f64 = 1e-8;
/// Largest matrix accepted by [`decode_matrix`].
pub const MAX_MATRIX_ENTRIES: usize = 1 << 26;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub points: usize,
    /// Singular values of `W^{1/2} D W^{-1/2}`, descending.
    pub singular_values: Vec<f64>,
    pub kernel_dimension: usize,
    /// Smallest singular value above the kernel threshold.
    pub smallest_nonzero_singular_value: f64,
    /// Smallest eigenvalue of `D*D` divided by its largest.
    pub min_eigenvalue_rel: f64,
    /// Smallest eigenvalue of `D*D` in absolute units.
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// Relative asymmetry of the `ω_φ`-symmetrized `D*D`.
    pub symmetry_residual: f64,
}

/// Dense matrix of `D^φ` on the point basis, with its `ω_φ`-weighted spectrum.
pub struct AssembledD {
    /// `matrix[(i, j)] = (D δ_j)(x_i)`.
    pub matrix: DMatrix<f64>,
    /// Volume density `W` at each point.
    pub weights: Vec<f64>,
    pub report: SpectrumReport,
}

impl AssembledD {
    /// `D*χ = W⁻¹ Dᵀ W χ`, the transpose in the `ω_φ`-weighted inner product.
    pub fn adjoint_apply(&self, chi: &ScalarField) -> ScalarField {
        let wc = DMatrix::from_iterator(chi.values.len(), 1, chi.values.iter().zip(&self.weights).map(|(c, w)| c * w));
        let t = self.matrix.transpose() * wc;
        ScalarField { spec: chi.spec, values: t.iter().zip(&self.weights).map(|(x, w)| x / w).collect() }
    }

    /// `D*D` in the `ω_φ`-weighted inner product.
    pub fn dstar_d(&self) -> DMatrix<f64> {
        let n = self.weights.len();
        let mut wd = self.matrix.clone();
        for i in 0..n {
            wd.row_mut(i).scale_mut(self.weights[i]);
        }
        let mut m = self.matrix.transpose() * wd;
        for i in 0..n {
            m.row_mut(i).scale_mut(1.0 / self.weights[i]);
        }
        m
    }
}

pub fn assemble_d(phi: &KahlerPotential) -> Result<AssembledD> {
    let spec = phi.spec();
    let n = spec.total();
    if n > MAX_ASSEMBLY_POINTS {
        return Err(KflowError::SizeGuard(format!("{n} grid points exceed the assembly limit {MAX_ASSEMBLY_POINTS}")));
    }
    let weights = MuPipeline::new(phi)?.vol;
    let mut matrix = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut delta = ScalarField::zeros(spec);
        delta.values[j] = 1.0;
        let col = d_apply(phi, &delta)?;
        for i in 0..n {
            matrix[(i, j)] = col.values[i];
        }
    }
    // B = W^{1/2} D W^{-1/2} has BᵀB similar to D*D and is orthogonal-friendly
    let sq: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let b = DMatrix::from_fn(n, n, |i, j| sq[i] * matrix[(i, j)] / sq[j]);
    let mut sv: Vec<f64> = b.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let smax = sv.first().copied().unwrap_or(0.0);
    let kernel_dimension = sv.iter().filter(|&&s| s < KERNEL_REL_TOL * smax).count();
    let smallest_nonzero_singular_value = sv.iter().rev().copied().find(|&s| s >= KERNEL_REL_TOL * smax).unwrap_or(0.0);
    let btb = b.transpose() * &b;
    let asym = (&btb - btb.transpose()).abs().max();
    let scale = btb.abs().max();
    let eig = SymmetricEigen::new(btb).eigenvalues;
    let min_eigenvalue = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let max_eigenvalue = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let report = SpectrumReport {
        points: n,
        kernel_dimension,
        smallest_nonzero_singular_value,
        min_eigenvalue_rel: if max_eigenvalue > 0.0 { min_eigenvalue / max_eigenvalue } else { 0.0 },
        min_eigenvalue,
        max_eigenvalue,
        symmetry_residual: if scale > 0.0 { asym / scale } else { 0.0 },
        singular_values: sv,
    };
    Ok(AssembledD { matrix, weights, report })
}

/// Plain binary: `rows: u64 LE`, `cols: u64 LE`, then row-major `f64 LE`.
pub fn encode_matrix(m: &DMatrix<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * m.len());
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    out
}

pub fn decode_matrix(bytes: &[u8]) -> Result<DMatrix<f64>> {
    if bytes.len() < 16 {
        return Err(KflowError::Format("matrix: truncated header".into()));
    }
    let rows = u64::from_le_bytes(bytes[..8].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    // Each dimension is bounded too: a 0×huge matrix has no entries but
    // would still be iterated column by column.
    let limit = MAX_MATRIX_ENTRIES as u64;
    let entries = rows
        .checked_mul(cols)
        .filter(|&e| e <= limit && rows <= limit && cols <= limit)
        .ok_or_else(|| KflowError::Format(format!("matrix: {rows}x{cols} exceeds the size limit")))?
        as usize;
    if bytes.len() - 16 != entries * 8 {
        return Err(KflowError::Format(format!(
            "matrix: expected {} payload bytes, found {}",
            entries * 8,
            bytes.len() - 16
        )));
    }
    let (rows, cols) = (rows as usize, cols as usize);
    let vals: Vec<f64> = bytes[16..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(DMatrix::from_fn(rows, cols, |i, j| vals[i * cols + j]))
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    std::fs::write(path, encode_matrix(m))?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    decode_matrix(&std::fs::read(path)?)
}
