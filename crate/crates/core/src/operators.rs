//! Assembly of diffusion operators on structured grids.
//!
//! The operators act on interior-node values with boundary data eliminated.
//! All assemblies produce the *generator* form: `du/dt = M u`, with `M`
//! symmetric and negative semi-definite. Symmetry on non-uniform grids is
//! obtained by normalizing each face conductance with the geometric mean of
//! the two adjacent cell widths and rebuilding the diagonal as the negative
//! sum of the row couplings (plus Dirichlet boundary stiffness). On uniform
//! grids this coincides exactly with the plain flux-difference form.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mesh::NonuniformGrid;
use crate::sparse::{CsrMatrix, DiaMatrix, SparseMatrix};

/// Boundary treatment for the eliminated boundary nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Fixed zero value at the boundary nodes.
    Dirichlet,
    /// Zero flux through the boundary faces.
    Neumann,
}

impl BoundaryKind {
    pub fn name(&self) -> &'static str {
        match self {
            BoundaryKind::Dirichlet => "dirichlet",
            BoundaryKind::Neumann => "neumann",
        }
    }
}

/// A discretized diffusion problem: the grid, the assembled generator, and
/// the coefficient data it was built from.
#[derive(Debug, Clone)]
pub struct DiffusionProblem {
    pub grid: NonuniformGrid,
    pub operator: SparseMatrix,
    pub diffusivity: Vec<f64>,
    pub boundary: BoundaryKind,
    /// Unit field direction per cell for anisotropic operators; `None` for
    /// isotropic ones.
    pub field_direction: Option<Vec<[f64; 2]>>,
}

impl DiffusionProblem {
    /// Number of unknowns the operator acts on.
    pub fn n(&self) -> usize {
        self.operator.n()
    }

    /// Backward-Euler system matrix `A = I - dt * M` for this problem.
    pub fn be_system(&self, dt: f64) -> Result<SparseMatrix> {
        be_system(&self.operator, dt)
    }
}

fn harmonic_mean(a: f64, b: f64) -> f64 {
    let s = a + b;
    if s == 0.0 {
        0.0
    } else {
        2.0 * a * b / s
    }
}

fn check_diffusivity_1d(alpha: &[f64], n: usize) -> Result<()> {
    if alpha.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "diffusivity has {} entries for {} interior nodes",
            alpha.len(),
            n
        )));
    }
    if let Some(bad) = alpha.iter().position(|a| !(*a > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "diffusivity must be positive; entry {} is {}",
            bad, alpha[bad]
        )));
    }
    Ok(())
}

/// Assemble the 1-D variable-coefficient diffusion generator
/// `(d/dx)(alpha du/dx)` on the interior nodes of `grid`.
///
/// Face diffusivities are harmonic means of the two adjacent cell values;
/// boundary faces take the single adjacent cell value. The result is exactly
/// symmetric and its Gershgorin disks lie in the closed left half-line.
pub fn assemble_diffusion_1d(
    grid: &NonuniformGrid,
    alpha: &[f64],
    boundary: BoundaryKind,
) -> Result<DiffusionProblem> {
    if grid.ndim() != 1 {
        return Err(Error::InvalidArgument(format!(
            "one-dimensional assembly on a {}-d grid",
            grid.ndim()
        )));
    }
    let n = grid.n_interior(0);
    check_diffusivity_1d(alpha, n)?;

    let h = grid.spacings(0);
    let w = grid.cell_widths(0);

    // Face conductances g_f = alpha_f / h_f; face f sits between nodes
    // f-1 and f, with f = 0 and f = n the boundary faces.
    let mut g = vec![0.0; n + 1];
    g[0] = alpha[0] / h[0];
    g[n] = alpha[n - 1] / h[n];
    for f in 1..n {
        g[f] = harmonic_mean(alpha[f - 1], alpha[f]) / h[f];
    }

    let offsets: Vec<i64> = if n == 1 { vec![0] } else { vec![-1, 0, 1] };
    let mut m = DiaMatrix::zero(n, &offsets)?;

    // Interior couplings, one value per symmetric pair.
    for f in 1..n {
        let c = g[f] / (w[f - 1] * w[f]).sqrt();
        m.add(f - 1, f, c)?;
        m.add(f, f - 1, c)?;
        m.add(f - 1, f - 1, -c)?;
        m.add(f, f, -c)?;
    }
    if boundary == BoundaryKind::Dirichlet {
        m.add(0, 0, -g[0] / w[0])?;
        m.add(n - 1, n - 1, -g[n] / w[n - 1])?;
    }

    Ok(DiffusionProblem {
        grid: grid.clone(),
        operator: SparseMatrix::Dia(m),
        diffusivity: alpha.to_vec(),
        boundary,
        field_direction: None,
    })
}

/// Assemble the 2-D anisotropic diffusion generator
/// `div( kappa * bhat bhat^T * grad u )` with zero Dirichlet boundaries.
///
/// Normal fluxes are face-centered; the tangential gradient in the cross
/// term is the average of the four one-sided gradient samples adjacent to
/// the face. For an axis-aligned field direction the cross terms vanish
/// identically and each grid line reduces exactly to the 1-D stencil.
pub fn assemble_aniso_2d(
    grid: &NonuniformGrid,
    kappa: &[f64],
    bhat: &[[f64; 2]],
) -> Result<DiffusionProblem> {
    if grid.ndim() != 2 {
        return Err(Error::InvalidArgument(format!(
            "two-dimensional assembly on a {}-d grid",
            grid.ndim()
        )));
    }
    let nx = grid.n_interior(0);
    let ny = grid.n_interior(1);
    let n = nx * ny;
    if kappa.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "diffusivity has {} entries for {} nodes",
            kappa.len(),
            n
        )));
    }
    if bhat.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "field direction has {} entries for {} nodes",
            bhat.len(),
            n
        )));
    }
    if let Some(bad) = kappa.iter().position(|k| !(*k >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "diffusivity must be non-negative; entry {} is {}",
            bad, kappa[bad]
        )));
    }
    for (i, b) in bhat.iter().enumerate() {
        let norm = (b[0] * b[0] + b[1] * b[1]).sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "field direction must be a unit vector; entry {} has norm {}",
                i, norm
            )));
        }
    }

    let hx = grid.spacings(0);
    let hy = grid.spacings(1);
    let wx = grid.cell_widths(0);
    let wy = grid.cell_widths(1);

    // Per-cell tensor components kappa * bhat bhat^T.
    let txx: Vec<f64> = (0..n).map(|p| kappa[p] * bhat[p][0] * bhat[p][0]).collect();
    let txy: Vec<f64> = (0..n).map(|p| kappa[p] * bhat[p][0] * bhat[p][1]).collect();
    let tyy: Vec<f64> = (0..n).map(|p| kappa[p] * bhat[p][1] * bhat[p][1]).collect();

    let id = |i: usize, j: usize| j * nx + i;
    let mut entries: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    // The pattern must exist even when every accumulated value is zero (the
    // all-zero coefficient case still produces a stored stencil), so seed
    // the diagonal.
    for p in 0..n {
        entries.insert((p, p), 0.0);
    }
    let mut add = |row: usize, col: usize, val: f64| {
        if val != 0.0 {
            *entries.entry((row, col)).or_insert(0.0) += val;
        }
    };

    // Averaged tensor at a face from the adjacent cells (single-sided at
    // boundary faces); conductance uses the harmonic mean of kappa with the
    // arithmetic mean of the direction products.
    let face_tensor = |cells: &[usize]| -> (f64, f64, f64) {
        match cells {
            [p] => (txx[*p], txy[*p], tyy[*p]),
            [p, q] => {
                let kf = harmonic_mean(kappa[*p], kappa[*q]);
                let scale = |a: f64, b: f64, ka: f64, kb: f64| {
                    // Recover direction products from the cell tensors,
                    // guarding the kappa = 0 cells.
                    let da = if ka > 0.0 { a / ka } else { 0.0 };
                    let db = if kb > 0.0 { b / kb } else { 0.0 };
                    kf * 0.5 * (da + db)
                };
                (
                    scale(txx[*p], txx[*q], kappa[*p], kappa[*q]),
                    scale(txy[*p], txy[*q], kappa[*p], kappa[*q]),
                    scale(tyy[*p], tyy[*q], kappa[*p], kappa[*q]),
                )
            }
            _ => unreachable!(),
        }
    };

    // x-faces: face fi sits between columns fi-1 and fi.
    for fi in 0..=nx {
        for j in 0..ny {
            let left = fi.checked_sub(1).map(|i| id(i, j));
            let right = if fi < nx { Some(id(fi, j)) } else { None };
            let cells: Vec<usize> = left.iter().chain(right.iter()).copied().collect();
            let (fxx, fxy, _) = face_tensor(&cells);
            let h = hx[fi];

            // Normal-flux part.
            match (left, right) {
                (Some(p), Some(q)) => {
                    let c = fxx / h / (wx[fi - 1] * wx[fi]).sqrt();
                    add(p, q, c);
                    add(q, p, c);
                    add(p, p, -c);
                    add(q, q, -c);
                }
                (None, Some(q)) => add(q, q, -fxx / h / wx[0]),
                (Some(p), None) => add(p, p, -fxx / h / wx[nx - 1]),
                (None, None) => unreachable!(),
            }

            // Cross part: fxy times the averaged tangential gradient. Each
            // sample (u_hi - u_lo) / h_s contributes to both adjacent rows
            // with the divergence sign of this face.
            if fxy != 0.0 {
                for &(row, sign, wxr) in [
                    left.map(|p| (p, 1.0, wx[fi - 1])),
                    right.map(|q| (q, -1.0, wx[fi])),
                ]
                .iter()
                .flatten()
                {
                    for ci in [fi.checked_sub(1), if fi < nx { Some(fi) } else { None }]
                        .iter()
                        .flatten()
                    {
                        // Upward sample (j -> j+1) and downward sample (j-1 -> j).
                        let scale = sign * fxy / (4.0 * wxr);
                        if j + 1 < ny {
                            let c = scale / hy[j + 1];
                            add(row, id(*ci, j + 1), c);
                            add(row, id(*ci, j), -c);
                        } else {
                            add(row, id(*ci, j), -scale / hy[j + 1]);
                        }
                        if j > 0 {
                            let c = scale / hy[j];
                            add(row, id(*ci, j), c);
                            add(row, id(*ci, j - 1), -c);
                        } else {
                            add(row, id(*ci, j), scale / hy[j]);
                        }
                    }
                }
            }
        }
    }

    // y-faces: face fj sits between rows fj-1 and fj.
    for fj in 0..=ny {
        for i in 0..nx {
            let down = fj.checked_sub(1).map(|j| id(i, j));
            let up = if fj < ny { Some(id(i, fj)) } else { None };
            let cells: Vec<usize> = down.iter().chain(up.iter()).copied().collect();
            let (_, fxy, fyy) = face_tensor(&cells);
            let h = hy[fj];

            match (down, up) {
                (Some(p), Some(q)) => {
                    let c = fyy / h / (wy[fj - 1] * wy[fj]).sqrt();
                    add(p, q, c);
                    add(q, p, c);
                    add(p, p, -c);
                    add(q, q, -c);
                }
                (None, Some(q)) => add(q, q, -fyy / h / wy[0]),
                (Some(p), None) => add(p, p, -fyy / h / wy[ny - 1]),
                (None, None) => unreachable!(),
            }

            if fxy != 0.0 {
                for &(row, sign, wyr) in [
                    down.map(|p| (p, 1.0, wy[fj - 1])),
                    up.map(|q| (q, -1.0, wy[fj])),
                ]
                .iter()
                .flatten()
                {
                    for cj in [fj.checked_sub(1), if fj < ny { Some(fj) } else { None }]
                        .iter()
                        .flatten()
                    {
                        let scale = sign * fxy / (4.0 * wyr);
                        if i + 1 < nx {
                            let c = scale / hx[i + 1];
                            add(row, id(i + 1, *cj), c);
                            add(row, id(i, *cj), -c);
                        } else {
                            add(row, id(i, *cj), -scale / hx[i + 1]);
                        }
                        if i > 0 {
                            let c = scale / hx[i];
                            add(row, id(i, *cj), c);
                            add(row, id(i - 1, *cj), -c);
                        } else {
                            add(row, id(i, *cj), scale / hx[i]);
                        }
                    }
                }
            }
        }
    }

    // With varying coefficients the two rows of a coupling pair sample the
    // tangential gradient through different faces; average each pair so the
    // stored operator is exactly symmetric. Constant-coefficient and
    // axis-aligned cases are already pairwise equal, so this changes nothing
    // there.
    let pairs: std::collections::BTreeSet<(usize, usize)> = entries
        .keys()
        .filter(|(r, c)| r != c)
        .map(|&(r, c)| (r.min(c), r.max(c)))
        .collect();
    for (r, c) in pairs {
        let a = entries.get(&(r, c)).copied().unwrap_or(0.0);
        let b = entries.get(&(c, r)).copied().unwrap_or(0.0);
        let v = 0.5 * (a + b);
        entries.insert((r, c), v);
        entries.insert((c, r), v);
    }

    let entry_list: Vec<(usize, usize, f64)> =
        entries.into_iter().map(|((r, c), v)| (r, c, v)).collect();
    let csr = CsrMatrix::from_entries(n, entry_list)?;
    let operator = SparseMatrix::Dia(SparseMatrix::Csr(csr).to_dia());

    Ok(DiffusionProblem {
        grid: grid.clone(),
        operator,
        diffusivity: kappa.to_vec(),
        boundary: BoundaryKind::Dirichlet,
        field_direction: Some(bhat.to_vec()),
    })
}

/// Temperature-dependent parallel conductivity `kappa0 * beta(T) * T^{5/2}`
/// with the low-temperature cutoff modification `beta = min(1, (T/T_cut)^{5/2})`.
#[derive(Debug, Clone, Copy)]
pub struct TemperatureCoefficient {
    pub kappa0: f64,
    pub t_cut: f64,
}

impl TemperatureCoefficient {
    pub fn new(kappa0: f64, t_cut: f64) -> Result<Self> {
        if !(kappa0 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "base conductivity must be positive, got {}",
                kappa0
            )));
        }
        if !(t_cut > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cutoff temperature must be positive, got {}",
                t_cut
            )));
        }
        Ok(TemperatureCoefficient { kappa0, t_cut })
    }

    /// Cutoff factor: 1 above `t_cut`, `(T/t_cut)^{5/2}` below it.
    pub fn beta(&self, temperature: f64) -> f64 {
        if temperature < self.t_cut {
            (temperature / self.t_cut).powf(2.5)
        } else {
            1.0
        }
    }
}

/// Evaluate the lagged nonlinear diffusivity at a frozen temperature field.
pub fn lagged_diffusivity(coeff: &TemperatureCoefficient, temperature: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = temperature.iter().position(|t| !(*t > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "temperature must be positive; entry {} is {}",
            bad, temperature[bad]
        )));
    }
    Ok(temperature
        .iter()
        .map(|&t| coeff.kappa0 * coeff.beta(t) * t.powf(2.5))
        .collect())
}

/// Backward-Euler system matrix `A = I - dt * M`, in the same storage layout
/// as `M`. `A` is symmetric positive definite whenever `M` is symmetric
/// negative semi-definite.
pub fn be_system(m: &SparseMatrix, dt: f64) -> Result<SparseMatrix> {
    if !(dt >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time step must be non-negative, got {}",
            dt
        )));
    }
    match m {
        SparseMatrix::Dia(d) => {
            let mut offsets = d.offsets().to_vec();
            if !offsets.contains(&0) {
                offsets.push(0);
                offsets.sort_unstable();
            }
            let mut a = DiaMatrix::zero(d.n(), &offsets)?;
            for (k, &off) in d.offsets().iter().enumerate() {
                let band = d.band(k);
                for i in 0..d.n() {
                    let j = i as i64 + off;
                    if j >= 0 && (j as usize) < d.n() && band[i] != 0.0 {
                        a.add(i, j as usize, -dt * band[i])?;
                    }
                }
            }
            for i in 0..d.n() {
                a.add(i, i, 1.0)?;
            }
            Ok(SparseMatrix::Dia(a))
        }
        SparseMatrix::Csr(c) => {
            let mut entries: Vec<(usize, usize, f64)> = Vec::new();
            for i in 0..c.n() {
                let mut has_diag = false;
                let (cols, vals) = c.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    let mut val = -dt * v;
                    if j == i {
                        has_diag = true;
                        val += 1.0;
                    }
                    entries.push((i, j, val));
                }
                if !has_diag {
                    entries.push((i, i, 1.0));
                }
            }
            Ok(SparseMatrix::Csr(CsrMatrix::from_entries(c.n(), entries)?))
        }
    }
}
