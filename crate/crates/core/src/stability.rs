//! Explicit-Euler stability limits from spectral-radius bounds.
//!
//! The forward-Euler step limit for du/dt = M u with M negative
//! semi-definite is dt <= 2 / |lambda|_max. Two cheap upper bounds for
//! |lambda|_max are provided - row sums (Gershgorin) and a grid-spacing
//! estimate - plus power iteration as an accurate reference. For a sparse
//! symmetric matrix with at most p nonzeros per row the row-sum bound
//! overestimates by at most sqrt(p).

use crate::error::{Error, Result};
use crate::mesh::NonuniformGrid;
use crate::rng::unit_from;
use crate::sparse::SparseMatrix;

/// How a spectral-radius bound was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMethod {
    /// Maximum absolute row sum.
    Gershgorin,
    /// Worst-case uniform-grid estimate from spacings and peak diffusivity.
    GridEstimate,
    /// Power iteration on the assembled matrix.
    PowerIteration,
}

impl BoundMethod {
    pub fn name(&self) -> &'static str {
        match self {
            BoundMethod::Gershgorin => "gershgorin",
            BoundMethod::GridEstimate => "grid-estimate",
            BoundMethod::PowerIteration => "power-iteration",
        }
    }
}

/// An upper bound on |lambda|_max together with the Euler step it implies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityBound {
    pub lambda_max_bound: f64,
    /// `2 / lambda_max_bound`; infinite for a zero bound (a zero operator
    /// imposes no step limit).
    pub dt_euler: f64,
    pub method: BoundMethod,
}

impl StabilityBound {
    pub fn from_lambda(lambda_max_bound: f64, method: BoundMethod) -> Self {
        let dt_euler = if lambda_max_bound == 0.0 {
            f64::INFINITY
        } else {
            2.0 / lambda_max_bound
        };
        Self { lambda_max_bound, dt_euler, method }
    }
}

/// Row-sum bound: `max_i sum_j |A_ij|`.
pub fn gershgorin_bound(m: &SparseMatrix) -> StabilityBound {
    let bound = m.abs_row_sums().into_iter().fold(0.0, f64::max);
    StabilityBound::from_lambda(bound, BoundMethod::Gershgorin)
}

/// Smallest left edge and largest right edge over all Gershgorin disks:
/// `(min_i(a_ii - R_i), max_i(a_ii + R_i))` with `R_i` the off-diagonal
/// absolute row sum. For a symmetric matrix, a positive left edge certifies
/// positive definiteness and a non-positive right edge certifies negative
/// semi-definiteness.
pub fn gershgorin_disk_extremes(m: &SparseMatrix) -> (f64, f64) {
    let diag = m.diagonal();
    let abs_sums = m.abs_row_sums();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (d, s) in diag.iter().zip(abs_sums.iter()) {
        let r = s - d.abs();
        lo = lo.min(d - r);
        hi = hi.max(d + r);
    }
    (lo, hi)
}

/// Grid-spacing estimate: `alpha_max * 4 * sum_d 1 / min(h_d)^2`, the
/// uniform-grid worst case over all dimensions.
pub fn ktilde_bound(grid: &NonuniformGrid, alpha_max: f64) -> Result<StabilityBound> {
    if !(alpha_max >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "peak diffusivity must be non-negative, got {alpha_max}"
        )));
    }
    let sum: f64 = (0..grid.ndim())
        .map(|d| {
            let h = grid.min_spacing(d);
            1.0 / (h * h)
        })
        .sum();
    Ok(StabilityBound::from_lambda(alpha_max * 4.0 * sum, BoundMethod::GridEstimate))
}

/// Result of a power-iteration eigenvalue estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaEstimate {
    /// Estimated `|lambda|_max`.
    pub value: f64,
    /// Whether the Rayleigh quotient settled within tolerance.
    pub converged: bool,
    pub iterations: usize,
}

impl LambdaEstimate {
    pub fn bound(&self) -> StabilityBound {
        StabilityBound::from_lambda(self.value, BoundMethod::PowerIteration)
    }
}

/// Dominant-eigenvalue magnitude of a symmetric matrix by power iteration
/// with a deterministic start vector. Stops when the relative change of the
/// Rayleigh quotient drops below `tol`; a run that exhausts `max_iterations`
/// comes back with `converged = false` and the last estimate.
pub fn power_iteration(m: &SparseMatrix, tol: f64, max_iterations: usize) -> Result<LambdaEstimate> {
    let n = m.n();
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    // deterministic pseudo-random start, never the zero vector
    let mut v: Vec<f64> = (0..n).map(|i| 0.5 + unit_from(&[i as u64])).collect();
    let norm = (v.iter().map(|x| x * x).sum::<f64>()).sqrt();
    for x in &mut v {
        *x /= norm;
    }

    let mut rayleigh_prev = f64::NAN;
    for it in 0..max_iterations {
        let w = m.spmv(&v)?;
        let rayleigh: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let wnorm = (w.iter().map(|x| x * x).sum::<f64>()).sqrt();
        if wnorm == 0.0 {
            // start vector lies in the null space; the dominant magnitude of
            // a zero operator is zero
            return Ok(LambdaEstimate { value: 0.0, converged: true, iterations: it + 1 });
        }
        for (x, wi) in v.iter_mut().zip(&w) {
            *x = wi / wnorm;
        }
        if it > 0 && (rayleigh - rayleigh_prev).abs() <= tol * rayleigh.abs() {
            return Ok(LambdaEstimate { value: rayleigh.abs(), converged: true, iterations: it + 1 });
        }
        rayleigh_prev = rayleigh;
    }
    Ok(LambdaEstimate {
        value: rayleigh_prev.abs(),
        converged: false,
        iterations: max_iterations,
    })
}
