//! Preconditioned conjugate gradient solver with communication-event
//! bookkeeping.
//!
//! Each matrix-vector product is tallied as one local (point-to-point)
//! exchange; the two inner products and the convergence check of every
//! iteration are tallied as three global reductions. These counts feed the
//! communication cost model.

use crate::error::{Error, Result};
use crate::precond::Preconditioner;
use crate::sparse::SparseMatrix;

/// Default relative residual tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Default iteration cap for an n-unknown system.
pub fn default_kmax(n: usize) -> usize {
    10 * n.max(1)
}

/// Outcome bookkeeping for one solve or one integrator step.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Iterations (or stages) actually performed.
    pub iterations: usize,
    /// Preconditioned residual inner product r·z per iteration, starting
    /// with the initial residual; empty for stage-based integrators.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// Point-to-point exchange events (one per matrix-vector product).
    pub local_exchanges: usize,
    /// Global reduction events (inner products and convergence checks).
    pub global_reductions: usize,
}

impl SolveReport {
    pub fn stage_report(stages: usize) -> Self {
        SolveReport {
            iterations: stages,
            residual_history: Vec::new(),
            converged: true,
            local_exchanges: stages,
            global_reductions: 0,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn check_lengths(a: &SparseMatrix, b: &[f64], x0: &[f64], p: &Preconditioner) -> Result<()> {
    let n = a.n();
    if b.len() != n || x0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "system of size {} with right-hand side {} and start {}",
            n,
            b.len(),
            x0.len()
        )));
    }
    if p.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "preconditioner of size {} for a system of size {}",
            p.n(),
            n
        )));
    }
    Ok(())
}

/// Solve `A x = b` by preconditioned conjugate gradients.
///
/// Converges when the preconditioned inner product r·z falls to `tol²` of
/// its initial value, so `tol` is a relative residual-norm threshold. If
/// `kmax` is exhausted the best iterate is returned with the converged flag
/// down. A non-positive search-direction curvature `p·y` aborts with a
/// not-positive-definite error.
pub fn pcg_solve(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    p: &Preconditioner,
    tol: f64,
    kmax: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let (x, report, _) = solve_inner(a, b, x0, p, tol, kmax, false)?;
    Ok((x, report))
}

/// As `pcg_solve`, additionally returning every iterate starting with `x0`.
pub fn pcg_solve_traced(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    p: &Preconditioner,
    tol: f64,
    kmax: usize,
) -> Result<(Vec<f64>, SolveReport, Vec<Vec<f64>>)> {
    solve_inner(a, b, x0, p, tol, kmax, true)
}

fn solve_inner(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    p: &Preconditioner,
    tol: f64,
    kmax: usize,
    trace: bool,
) -> Result<(Vec<f64>, SolveReport, Vec<Vec<f64>>)> {
    check_lengths(a, b, x0, p)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {}",
            tol
        )));
    }
    if kmax == 0 {
        return Err(Error::InvalidArgument(
            "iteration cap must be at least 1".to_string(),
        ));
    }

    let mut local_exchanges = 0;
    let mut global_reductions = 0;
    let mut iterates = Vec::new();
    if trace {
        iterates.push(x0.to_vec());
    }

    let ax0 = a.spmv(x0)?;
    local_exchanges += 1;
    let mut r: Vec<f64> = b.iter().zip(ax0.iter()).map(|(bi, ai)| bi - ai).collect();
    let mut z = p.apply(&r)?;
    let mut rr = dot(&r, &z);
    let mut history = vec![rr];

    if rr < 0.0 {
        return Err(Error::NotPositiveDefinite(format!(
            "preconditioned residual product is negative ({})",
            rr
        )));
    }
    if rr == 0.0 {
        let report = SolveReport {
            iterations: 0,
            residual_history: history,
            converged: true,
            local_exchanges,
            global_reductions,
        };
        return Ok((x0.to_vec(), report, iterates));
    }

    let threshold = tol * tol * rr;
    let mut x = x0.to_vec();
    let mut dir = z.clone();
    let mut iterations = 0;
    let mut converged = false;

    for _ in 0..kmax {
        let y = a.spmv(&dir)?;
        local_exchanges += 1;
        let py = dot(&dir, &y);
        global_reductions += 1;
        if py <= 0.0 {
            return Err(Error::NotPositiveDefinite(format!(
                "search-direction curvature is {} at iteration {}",
                py,
                iterations + 1
            )));
        }
        let alpha = rr / py;
        for i in 0..x.len() {
            x[i] += alpha * dir[i];
            r[i] -= alpha * y[i];
        }
        z = p.apply(&r)?;
        let rr_new = dot(&r, &z);
        global_reductions += 1;
        iterations += 1;
        history.push(rr_new);
        if trace {
            iterates.push(x.clone());
        }
        // Convergence check is the third reduction of the iteration.
        global_reductions += 1;
        if rr_new <= threshold {
            converged = true;
            break;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..dir.len() {
            dir[i] = z[i] + beta * dir[i];
        }
    }

    let report = SolveReport {
        iterations,
        residual_history: history,
        converged,
        local_exchanges,
        global_reductions,
    };
    Ok((x, report, iterates))
}

/// Euclidean norm of the unpreconditioned residual `b - A x`.
pub fn residual_norm(a: &SparseMatrix, x: &[f64], b: &[f64]) -> Result<f64> {
    let ax = a.spmv(x)?;
    if b.len() != ax.len() {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side length {} for a system of size {}",
            b.len(),
            ax.len()
        )));
    }
    Ok(b.iter()
        .zip(ax.iter())
        .map(|(bi, ai)| (bi - ai) * (bi - ai))
        .sum::<f64>()
        .sqrt())
}
