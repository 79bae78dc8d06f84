//! Sparse matrices in diagonal (DIA) and compressed-sparse-row (CSR) form.
//!
//! DIA is the assembly and solver format: a sorted list of diagonal offsets
//! with one band array per offset. Band entries whose column falls outside
//! the matrix are stored as explicit zeros so kernels stay branch-light;
//! in-range entries participate in products whether zero or not. CSR is the
//! format factorizations want. Conversions are explicit, and a DIA -> CSR ->
//! DIA round trip reproduces the stored bands exactly.
//!
//! `spmv` accumulates strictly in ascending column order within each row in
//! both layouts, so the two layouts of the same matrix produce bit-identical
//! products.

use crate::error::{Error, Result};
use std::io::{BufRead, Write};

/// Diagonal-storage sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DiaMatrix {
    n: usize,
    offsets: Vec<i64>,
    bands: Vec<Vec<f64>>,
}

impl DiaMatrix {
    /// Zero matrix with the given diagonal offsets (sorted, deduplicated).
    pub fn zero(n: usize, offsets: &[i64]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("matrix size must be positive".into()));
        }
        let mut offs = offsets.to_vec();
        offs.sort();
        offs.dedup();
        for &o in &offs {
            if o.unsigned_abs() as usize >= n {
                return Err(Error::InvalidArgument(format!(
                    "offset {o} out of range for size {n}"
                )));
            }
        }
        let bands = vec![vec![0.0; n]; offs.len()];
        Ok(Self { n, offsets: offs, bands })
    }

    /// Identity matrix.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n, &[0]).expect("size checked");
        for v in &mut m.bands[0] {
            *v = 1.0;
        }
        m
    }

    /// Constant-coefficient tridiagonal matrix (`sub`, `diag`, `sup`).
    /// For `n == 1` only the diagonal exists.
    pub fn tridiagonal(n: usize, sub: f64, diag: f64, sup: f64) -> Result<Self> {
        let offsets: &[i64] = if n == 1 { &[0] } else { &[-1, 0, 1] };
        let mut m = Self::zero(n, offsets)?;
        for i in 0..n {
            m.set(i, i, diag)?;
            if i > 0 {
                m.set(i, i - 1, sub)?;
            }
            if i + 1 < n {
                m.set(i, i + 1, sup)?;
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn offsets(&self) -> &[i64] {
        &self.offsets
    }

    pub fn band(&self, k: usize) -> &[f64] {
        &self.bands[k]
    }

    /// Write entry `(i, j)`; the offset `j - i` must be one of the stored
    /// diagonals.
    pub fn set(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        let off = j as i64 - i as i64;
        let k = self
            .offsets
            .binary_search(&off)
            .map_err(|_| Error::InvalidArgument(format!("offset {off} not present in matrix")))?;
        if i >= self.n || j >= self.n {
            return Err(Error::InvalidArgument(format!("index ({i}, {j}) out of range")));
        }
        self.bands[k][i] = value;
        Ok(())
    }

    /// Add to entry `(i, j)`.
    pub fn add(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        let off = j as i64 - i as i64;
        let k = self
            .offsets
            .binary_search(&off)
            .map_err(|_| Error::InvalidArgument(format!("offset {off} not present in matrix")))?;
        if i >= self.n || j >= self.n {
            return Err(Error::InvalidArgument(format!("index ({i}, {j}) out of range")));
        }
        self.bands[k][i] += value;
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let off = j as i64 - i as i64;
        match self.offsets.binary_search(&off) {
            Ok(k) => self.bands[k][i],
            Err(_) => 0.0,
        }
    }
}

/// Compressed-sparse-row matrix. Column indices are strictly increasing
/// within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from `(row, col, value)` entries; entries are sorted, duplicates
    /// rejected.
    pub fn from_entries(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("matrix size must be positive".into()));
        }
        for &(i, j, _) in &entries {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!("entry ({i}, {j}) out of range for size {n}")));
            }
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(Error::InvalidArgument(format!(
                    "duplicate entry at ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        for (i, j, v) in entries {
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            values.push(v);
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self { n, row_ptr, col_idx, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Column indices and values of one row.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Index into `values` for entry `(i, j)`, if stored.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi].binary_search(&j).ok().map(|k| lo + k)
    }
}

/// A sparse matrix in one of the two supported layouts.
#[derive(Debug, Clone, PartialEq)]
pub enum SparseMatrix {
    Dia(DiaMatrix),
    Csr(CsrMatrix),
}

impl From<DiaMatrix> for SparseMatrix {
    fn from(m: DiaMatrix) -> Self {
        SparseMatrix::Dia(m)
    }
}

impl From<CsrMatrix> for SparseMatrix {
    fn from(m: CsrMatrix) -> Self {
        SparseMatrix::Csr(m)
    }
}

impl SparseMatrix {
    pub fn identity(n: usize) -> Self {
        DiaMatrix::identity(n).into()
    }

    pub fn n(&self) -> usize {
        match self {
            SparseMatrix::Dia(m) => m.n,
            SparseMatrix::Csr(m) => m.n,
        }
    }

    pub fn layout_name(&self) -> &'static str {
        match self {
            SparseMatrix::Dia(_) => "dia",
            SparseMatrix::Csr(_) => "csr",
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            SparseMatrix::Dia(m) => m.get(i, j),
            SparseMatrix::Csr(m) => m.get(i, j),
        }
    }

    /// Matrix-vector product. Accumulation runs in ascending column order
    /// per row in both layouts.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        if x.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {n}x{n} but vector has length {}",
                x.len()
            )));
        }
        let mut y = vec![0.0; n];
        match self {
            SparseMatrix::Dia(m) => {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (k, &off) in m.offsets.iter().enumerate() {
                        let j = i as i64 + off;
                        if j >= 0 && (j as usize) < n {
                            acc += m.bands[k][i] * x[j as usize];
                        }
                    }
                    y[i] = acc;
                }
            }
            SparseMatrix::Csr(m) => {
                for i in 0..n {
                    let (cols, vals) = m.row(i);
                    let mut acc = 0.0;
                    for (j, v) in cols.iter().zip(vals) {
                        acc += v * x[*j];
                    }
                    y[i] = acc;
                }
            }
        }
        Ok(y)
    }

    /// Per-row sums of absolute values, diagonal included.
    pub fn abs_row_sums(&self) -> Vec<f64> {
        let n = self.n();
        let mut sums = vec![0.0; n];
        match self {
            SparseMatrix::Dia(m) => {
                for i in 0..n {
                    for (k, &off) in m.offsets.iter().enumerate() {
                        let j = i as i64 + off;
                        if j >= 0 && (j as usize) < n {
                            sums[i] += m.bands[k][i].abs();
                        }
                    }
                }
            }
            SparseMatrix::Csr(m) => {
                for i in 0..n {
                    let (_, vals) = m.row(i);
                    sums[i] = vals.iter().map(|v| v.abs()).sum();
                }
            }
        }
        sums
    }

    /// Main diagonal as a dense vector (zeros where no entry is stored).
    pub fn diagonal(&self) -> Vec<f64> {
        let n = self.n();
        (0..n).map(|i| self.get(i, i)).collect()
    }

    /// Largest absolute stored value.
    pub fn max_abs(&self) -> f64 {
        match self {
            SparseMatrix::Dia(m) => m
                .bands
                .iter()
                .flat_map(|b| b.iter())
                .fold(0.0, |acc: f64, v| acc.max(v.abs())),
            SparseMatrix::Csr(m) => m.values.iter().fold(0.0, |acc: f64, v| acc.max(v.abs())),
        }
    }

    /// Count of stored entries with nonzero value.
    pub fn nnz(&self) -> usize {
        match self {
            SparseMatrix::Dia(m) => {
                let n = m.n;
                let mut count = 0;
                for (k, &off) in m.offsets.iter().enumerate() {
                    for i in 0..n {
                        let j = i as i64 + off;
                        if j >= 0 && (j as usize) < n && m.bands[k][i] != 0.0 {
                            count += 1;
                        }
                    }
                }
                count
            }
            SparseMatrix::Csr(m) => m.values.iter().filter(|v| **v != 0.0).count(),
        }
    }

    /// Largest per-row count of nonzero values.
    pub fn max_nonzeros_per_row(&self) -> usize {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).filter(|&j| self.get(i, j) != 0.0).count())
            .max()
            .unwrap_or(0)
    }

    /// Largest elementwise asymmetry `|A_ij - A_ji|` over the stored pattern.
    pub fn symmetry_defect(&self) -> f64 {
        let mut defect: f64 = 0.0;
        match self {
            SparseMatrix::Dia(m) => {
                let n = m.n;
                for (k, &off) in m.offsets.iter().enumerate() {
                    for i in 0..n {
                        let j = i as i64 + off;
                        if j >= 0 && (j as usize) < n {
                            defect = defect.max((m.bands[k][i] - self.get(j as usize, i)).abs());
                        }
                    }
                }
            }
            SparseMatrix::Csr(m) => {
                for i in 0..m.n {
                    let (cols, vals) = m.row(i);
                    for (j, v) in cols.iter().zip(vals) {
                        defect = defect.max((v - self.get(*j, i)).abs());
                    }
                }
            }
        }
        defect
    }

    /// Convert to CSR. Every in-range stored band position becomes a CSR
    /// entry, explicit zeros included, so the stored pattern survives.
    pub fn to_csr(&self) -> CsrMatrix {
        match self {
            SparseMatrix::Csr(m) => m.clone(),
            SparseMatrix::Dia(m) => {
                let n = m.n;
                let mut entries = Vec::new();
                for i in 0..n {
                    for (k, &off) in m.offsets.iter().enumerate() {
                        let j = i as i64 + off;
                        if j >= 0 && (j as usize) < n {
                            entries.push((i, j as usize, m.bands[k][i]));
                        }
                    }
                }
                CsrMatrix::from_entries(n, entries).expect("conversion entries are in range and unique")
            }
        }
    }

    /// Convert to DIA. The offset list is the set of distinct `col - row`
    /// values among stored entries; unfilled in-range positions become
    /// explicit zeros.
    pub fn to_dia(&self) -> DiaMatrix {
        match self {
            SparseMatrix::Dia(m) => m.clone(),
            SparseMatrix::Csr(m) => {
                let n = m.n;
                let mut offsets: Vec<i64> = Vec::new();
                for i in 0..n {
                    let (cols, _) = m.row(i);
                    for &j in cols {
                        offsets.push(j as i64 - i as i64);
                    }
                }
                offsets.sort();
                offsets.dedup();
                if offsets.is_empty() {
                    offsets.push(0);
                }
                let mut dia = DiaMatrix::zero(n, &offsets).expect("offsets derived in range");
                for i in 0..n {
                    let (cols, vals) = m.row(i);
                    for (j, v) in cols.iter().zip(vals) {
                        dia.set(i, *j, *v).expect("entry in stored offsets");
                    }
                }
                dia
            }
        }
    }

    /// Dense copy, for small matrices in tests and diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        (0..n).map(|i| (0..n).map(|j| self.get(i, j)).collect()).collect()
    }

    /// Dump nonzero entries in Matrix Market coordinate form (1-based,
    /// general real). Values use the shortest exact decimal representation,
    /// so a dump/load round trip is bit-exact.
    pub fn write_matrix_market<W: Write>(&self, w: &mut W) -> Result<()> {
        let n = self.n();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = self.get(i, j);
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", n, n, entries.len())?;
        for (i, j, v) in entries {
            writeln!(w, "{} {} {}", i + 1, j + 1, v)?;
        }
        Ok(())
    }

    pub fn dump_matrix_market(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_matrix_market(&mut f)
    }

    /// Load a coordinate-form Matrix Market file into CSR layout.
    pub fn read_matrix_market<R: BufRead>(r: &mut R) -> Result<SparseMatrix> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty matrix file".into()))??;
        let h = header.to_lowercase();
        if !h.starts_with("%%matrixmarket") || !h.contains("coordinate") || !h.contains("general") {
            return Err(Error::Parse(format!("unsupported matrix header: {header}")));
        }
        let mut dims: Option<(usize, usize, usize)> = None;
        let mut entries = Vec::new();
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            let fields: Vec<&str> = t.split_whitespace().collect();
            if dims.is_none() {
                if fields.len() != 3 {
                    return Err(Error::Parse(format!("bad size line: {t}")));
                }
                let rows: usize = fields[0].parse().map_err(|_| Error::Parse(format!("bad size line: {t}")))?;
                let cols: usize = fields[1].parse().map_err(|_| Error::Parse(format!("bad size line: {t}")))?;
                let nnz: usize = fields[2].parse().map_err(|_| Error::Parse(format!("bad size line: {t}")))?;
                if rows != cols {
                    return Err(Error::Parse(format!("matrix must be square, got {rows}x{cols}")));
                }
                dims = Some((rows, cols, nnz));
                continue;
            }
            if fields.len() != 3 {
                return Err(Error::Parse(format!("bad entry line: {t}")));
            }
            let i: usize = fields[0].parse().map_err(|_| Error::Parse(format!("bad entry line: {t}")))?;
            let j: usize = fields[1].parse().map_err(|_| Error::Parse(format!("bad entry line: {t}")))?;
            let v: f64 = fields[2].parse().map_err(|_| Error::Parse(format!("bad entry line: {t}")))?;
            if i == 0 || j == 0 {
                return Err(Error::Parse("matrix entries are 1-based".into()));
            }
            entries.push((i - 1, j - 1, v));
        }
        let (n, _, nnz) = dims.ok_or_else(|| Error::Parse("missing size line".into()))?;
        if entries.len() != nnz {
            return Err(Error::Parse(format!(
                "size line promised {nnz} entries, found {}",
                entries.len()
            )));
        }
        Ok(CsrMatrix::from_entries(n, entries)?.into())
    }

    pub fn load_matrix_market(path: &std::path::Path) -> Result<SparseMatrix> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_matrix_market(&mut f)
    }
}
