//! Diagonal and block incomplete-LU preconditioners.
//!
//! The block variant factors each contiguous index block of the matrix
//! independently with zero fill-in, ignoring couplings between blocks; with
//! one point per block it degenerates to the diagonal variant.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::mesh::split_counts;
use crate::sparse::{CsrMatrix, SparseMatrix};

/// An approximate inverse applied as `z = P⁻¹ r` inside the iterative solver.
#[derive(Debug, Clone)]
pub enum Preconditioner {
    /// Point-Jacobi: the diagonal of the system matrix.
    Jacobi { diag: Vec<f64> },
    /// Per-block zero-fill incomplete LU with unit lower triangle implied;
    /// the factors of block `b` act on index range `blocks[b]`.
    BlockIlu {
        blocks: Vec<Range<usize>>,
        factors: Vec<CsrMatrix>,
    },
}

impl Preconditioner {
    pub fn n(&self) -> usize {
        match self {
            Preconditioner::Jacobi { diag } => diag.len(),
            Preconditioner::BlockIlu { blocks, .. } => {
                blocks.last().map(|b| b.end).unwrap_or(0)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preconditioner::Jacobi { .. } => "diagonal",
            Preconditioner::BlockIlu { .. } => "block-ilu",
        }
    }

    /// Apply the approximate inverse to a residual.
    pub fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        match self {
            Preconditioner::Jacobi { .. } => apply_pc1(self, r),
            Preconditioner::BlockIlu { .. } => apply_pc2(self, r),
        }
    }
}

/// Split `0..n` into `count` contiguous near-equal ranges.
pub fn uniform_blocks(n: usize, count: usize) -> Result<Vec<Range<usize>>> {
    if count == 0 || count > n {
        return Err(Error::InvalidArgument(format!(
            "cannot split {} rows into {} blocks",
            n, count
        )));
    }
    let mut out = Vec::with_capacity(count);
    let mut start = 0;
    for s in split_counts(n, count) {
        out.push(start..start + s);
        start += s;
    }
    Ok(out)
}

/// Build the diagonal preconditioner from the system matrix.
pub fn build_pc1(a: &SparseMatrix) -> Result<Preconditioner> {
    let diag = a.diagonal();
    if let Some(row) = diag.iter().position(|d| *d == 0.0) {
        return Err(Error::Breakdown {
            row,
            reason: "zero diagonal entry".to_string(),
        });
    }
    Ok(Preconditioner::Jacobi { diag })
}

/// Divide the residual by the stored diagonal.
pub fn apply_pc1(p: &Preconditioner, r: &[f64]) -> Result<Vec<f64>> {
    let diag = match p {
        Preconditioner::Jacobi { diag } => diag,
        _ => {
            return Err(Error::InvalidArgument(
                "diagonal application on a block factorization".to_string(),
            ))
        }
    };
    if r.len() != diag.len() {
        return Err(Error::DimensionMismatch(format!(
            "residual length {} does not match {}",
            r.len(),
            diag.len()
        )));
    }
    Ok(r.iter().zip(diag.iter()).map(|(ri, di)| ri / di).collect())
}

fn validate_partition(n: usize, blocks: &[Range<usize>]) -> Result<()> {
    if blocks.is_empty() {
        return Err(Error::InvalidArgument("empty block partition".to_string()));
    }
    let mut expect = 0;
    for b in blocks {
        if b.start != expect || b.end <= b.start {
            return Err(Error::InvalidArgument(format!(
                "blocks must be non-empty contiguous ranges covering the index set; found {}..{} where {} was expected",
                b.start, b.end, expect
            )));
        }
        expect = b.end;
    }
    if expect != n {
        return Err(Error::DimensionMismatch(format!(
            "partition covers {} of {} rows",
            expect, n
        )));
    }
    Ok(())
}

/// Build the per-block zero-fill incomplete LU preconditioner. Couplings
/// between blocks are discarded; each block is factored on its own sparsity
/// pattern.
pub fn build_pc2(a: &SparseMatrix, blocks: &[Range<usize>]) -> Result<Preconditioner> {
    validate_partition(a.n(), blocks)?;
    let csr = a.to_csr();

    let mut factors = Vec::with_capacity(blocks.len());
    for block in blocks {
        let nb = block.end - block.start;
        let mut entries = Vec::new();
        for i in block.clone() {
            let (cols, vals) = csr.row(i);
            for (j, v) in cols.iter().zip(vals.iter()) {
                if block.contains(j) {
                    entries.push((i - block.start, j - block.start, *v));
                }
            }
        }
        let mut lu = CsrMatrix::from_entries(nb, entries)?;
        factor_in_place(&mut lu, block.start)?;
        factors.push(lu);
    }
    Ok(Preconditioner::BlockIlu {
        blocks: blocks.to_vec(),
        factors,
    })
}

/// In-place zero-fill LU on the existing pattern: for each row, eliminate
/// with the rows above it, updating only stored positions.
fn factor_in_place(lu: &mut CsrMatrix, global_offset: usize) -> Result<()> {
    let nb = lu.n();
    for i in 0..nb {
        let row_cols: Vec<usize> = lu.row(i).0.to_vec();
        for (ki, &k) in row_cols.iter().enumerate() {
            if k >= i {
                break;
            }
            let pivot_pos = lu.position(k, k).ok_or(Error::Breakdown {
                row: global_offset + k,
                reason: "missing pivot in factor pattern".to_string(),
            })?;
            let pivot = lu.values_mut()[pivot_pos];
            if pivot == 0.0 {
                return Err(Error::Breakdown {
                    row: global_offset + k,
                    reason: "zero pivot during factorization".to_string(),
                });
            }
            let ik_pos = lu.position(i, k).expect("stored entry");
            lu.values_mut()[ik_pos] /= pivot;
            let lik = lu.values_mut()[ik_pos];
            for &j in &row_cols[ki + 1..] {
                if let Some(kj_pos) = lu.position(k, j) {
                    let update = lik * lu.values_mut()[kj_pos];
                    let ij_pos = lu.position(i, j).expect("stored entry");
                    lu.values_mut()[ij_pos] -= update;
                }
            }
        }
        let diag_ok = lu
            .position(i, i)
            .map(|p| lu.values_mut()[p] != 0.0)
            .unwrap_or(false);
        if !diag_ok {
            return Err(Error::Breakdown {
                row: global_offset + i,
                reason: "zero pivot after factorization".to_string(),
            });
        }
    }
    Ok(())
}

/// Per-block forward substitution over the strictly-lower entries with an
/// implied unit diagonal, then upper back substitution dividing by the
/// stored pivot.
pub fn apply_pc2(p: &Preconditioner, r: &[f64]) -> Result<Vec<f64>> {
    let (blocks, factors) = match p {
        Preconditioner::BlockIlu { blocks, factors } => (blocks, factors),
        _ => {
            return Err(Error::InvalidArgument(
                "block application on a diagonal preconditioner".to_string(),
            ))
        }
    };
    let n = p.n();
    if r.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "residual length {} does not match {}",
            r.len(),
            n
        )));
    }
    let mut z = r.to_vec();
    for (block, lu) in blocks.iter().zip(factors.iter()) {
        let nb = block.end - block.start;
        let zb = &mut z[block.start..block.end];
        for i in 0..nb {
            let (cols, vals) = lu.row(i);
            let mut acc = zb[i];
            for (j, v) in cols.iter().zip(vals.iter()) {
                if *j >= i {
                    break;
                }
                acc -= v * zb[*j];
            }
            zb[i] = acc;
        }
        for i in (0..nb).rev() {
            let (cols, vals) = lu.row(i);
            let mut acc = zb[i];
            let mut diag = 0.0;
            for (j, v) in cols.iter().zip(vals.iter()) {
                if *j == i {
                    diag = *v;
                } else if *j > i {
                    acc -= v * zb[*j];
                }
            }
            zb[i] = acc / diag;
        }
    }
    Ok(z)
}
