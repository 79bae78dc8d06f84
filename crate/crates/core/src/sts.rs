//! Second-order super time-stepping (Runge-Kutta-Legendre) integrator,
//! plus explicit-Euler sub-cycling and the hybrid Euler-prefix scheme.
//!
//! One super step covers a time step `dt` that exceeds the explicit limit
//! `dt_euler` by running `s` cheap stages, with `s` growing only like the
//! square root of the step ratio.

use crate::error::{Error, Result};
use crate::krylov::SolveReport;
use crate::sparse::SparseMatrix;
use crate::stability::gershgorin_bound;

/// Default explicit-Euler safety factor: exactly 1.0 would leave the most
/// oscillatory mode undamped.
pub const DEFAULT_SAFETY: f64 = 0.9;

/// Stage count for a super step of `dt` against an explicit limit
/// `dt_euler`: the smallest integer `s` with `(s² + s - 2)/4 ≥ dt/dt_euler`,
/// never below the structural floor of 2. With `force_odd`, even counts are
/// bumped up by one.
pub fn rkl2_stages(dt: f64, dt_euler: f64, force_odd: bool) -> Result<usize> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time step must be positive, got {}",
            dt
        )));
    }
    if !(dt_euler > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "explicit step limit must be positive, got {}",
            dt_euler
        )));
    }
    let ratio = dt / dt_euler;
    let mut s = ((9.0 + 16.0 * ratio).sqrt() - 1.0) / 2.0;
    if !s.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "step ratio {} is out of range",
            ratio
        )));
    }
    s = s.ceil();
    let mut s = (s as usize).max(2);
    if force_odd && s % 2 == 0 {
        s += 1;
    }
    Ok(s)
}

/// Precomputed stage coefficients for an `s`-stage super step.
///
/// Arrays are indexed by stage number; index 0 (and, for the recursion
/// coefficients, index 1) is unused padding so the code reads like the
/// recursion it implements.
#[derive(Debug, Clone)]
pub struct StsSchedule {
    pub s: usize,
    pub b: Vec<f64>,
    pub mu: Vec<f64>,
    pub mu_tilde: Vec<f64>,
    pub nu: Vec<f64>,
    pub gamma: Vec<f64>,
    pub force_odd: bool,
}

impl StsSchedule {
    /// Build the coefficient set for a fixed stage count.
    pub fn new(s: usize) -> Result<Self> {
        Self::build(s, false, false)
    }

    /// Build the schedule sized for a step of `dt` against `dt_euler`.
    pub fn for_ratio(dt: f64, dt_euler: f64, force_odd: bool) -> Result<Self> {
        let s = rkl2_stages(dt, dt_euler, force_odd)?;
        Self::build(s, force_odd, false)
    }

    /// The mistranscribed variant pairing the stage constant with the
    /// current stage weight instead of the previous one; kept only so the
    /// convergence test can demonstrate it loses an order of accuracy.
    #[cfg(test)]
    pub(crate) fn with_shifted_stage_constant(s: usize) -> Self {
        Self::build(s, false, true).unwrap()
    }

    fn build(s: usize, force_odd: bool, shifted_gamma: bool) -> Result<Self> {
        if s < 2 {
            return Err(Error::InvalidArgument(format!(
                "the two-term stage recursion needs at least 2 stages, got {}",
                s
            )));
        }
        let sf = s as f64;
        let w1 = 4.0 / (sf * sf + sf - 2.0);
        let mut b = vec![0.0; s + 1];
        for (k, bk) in b.iter_mut().enumerate() {
            *bk = if k <= 2 {
                1.0 / 3.0
            } else {
                let kf = k as f64;
                (kf * kf + kf - 2.0) / (2.0 * kf * (kf + 1.0))
            };
        }
        let mut mu = vec![0.0; s + 1];
        let mut mu_tilde = vec![0.0; s + 1];
        let mut nu = vec![0.0; s + 1];
        let mut gamma = vec![0.0; s + 1];
        mu_tilde[1] = b[1] * w1;
        for k in 2..=s {
            let kf = k as f64;
            let ratio_prev = b[k] / b[k - 1];
            mu[k] = (2.0 * kf - 1.0) / kf * ratio_prev;
            mu_tilde[k] = w1 * mu[k];
            nu[k] = -(kf - 1.0) / kf * (b[k] / b[k - 2]);
            // The stage constant multiplying the frozen initial slope pairs
            // with the previous stage weight b[k-1]; pairing it with b[k]
            // demotes the scheme to first order (see the convergence test).
            let weight = if shifted_gamma { b[k] } else { b[k - 1] };
            gamma[k] = (weight - 1.0) * mu_tilde[k];
        }
        Ok(StsSchedule {
            s,
            b,
            mu,
            mu_tilde,
            nu,
            gamma,
            force_odd,
        })
    }

    /// Growth factor of the scalar recursion for `z = dt * lambda`: the
    /// stage polynomial evaluated at `z`.
    pub fn scalar_growth(&self, z: f64) -> f64 {
        1.0 + self.growth_deviation(z)
    }

    /// `scalar_growth(z) - 1`, computed by the recursion on the deviations
    /// so that tiny `z` do not cancel against the constant term and
    /// numerical derivatives at 0 stay exact to roundoff-in-`z` scale.
    pub fn growth_deviation(&self, z: f64) -> f64 {
        let mut d_prev2 = 0.0;
        let mut d_prev1 = self.mu_tilde[1] * z;
        for k in 2..=self.s {
            let d = self.mu[k] * d_prev1
                + self.nu[k] * d_prev2
                + self.mu_tilde[k] * z * (1.0 + d_prev1)
                + self.gamma[k] * z;
            d_prev2 = d_prev1;
            d_prev1 = d;
        }
        d_prev1
    }
}

fn check_state(m: &SparseMatrix, u: &[f64]) -> Result<()> {
    if u.len() != m.n() {
        return Err(Error::DimensionMismatch(format!(
            "state length {} for an operator of size {}",
            u.len(),
            m.n()
        )));
    }
    Ok(())
}

/// One super step `u(t) -> u(t + dt)` using the stage recursion; the report
/// tallies one point-to-point exchange per stage and no global reductions.
pub fn rkl2_step(
    m: &SparseMatrix,
    u_n: &[f64],
    dt: f64,
    schedule: &StsSchedule,
) -> Result<(Vec<f64>, SolveReport)> {
    check_state(m, u_n)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time step must be positive, got {}",
            dt
        )));
    }
    let s = schedule.s;
    let m0 = m.spmv(u_n)?;
    let mut u_prev2 = u_n.to_vec();
    let mut u_prev1: Vec<f64> = u_n
        .iter()
        .zip(m0.iter())
        .map(|(u, m0i)| u + schedule.mu_tilde[1] * dt * m0i)
        .collect();
    for k in 2..=s {
        let mu_k = schedule.mu[k];
        let nu_k = schedule.nu[k];
        let mu_tilde_k = schedule.mu_tilde[k];
        let gamma_k = schedule.gamma[k];
        let base = 1.0 - mu_k - nu_k;
        let m_prev = m.spmv(&u_prev1)?;
        let u_k: Vec<f64> = (0..u_n.len())
            .map(|i| {
                mu_k * u_prev1[i]
                    + nu_k * u_prev2[i]
                    + base * u_n[i]
                    + mu_tilde_k * dt * m_prev[i]
                    + gamma_k * dt * m0[i]
            })
            .collect();
        u_prev2 = std::mem::replace(&mut u_prev1, u_k);
    }
    Ok((u_prev1, SolveReport::stage_report(s)))
}

/// Split `dt` into `n_cycles` equal super steps, re-sizing the stage count
/// for each cycle from the operator's own stability bound.
pub fn rkl2_subcycled(
    m: &SparseMatrix,
    u_n: &[f64],
    dt: f64,
    n_cycles: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    check_state(m, u_n)?;
    if n_cycles == 0 {
        return Err(Error::InvalidArgument(
            "cycle count must be at least 1".to_string(),
        ));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time step must be positive, got {}",
            dt
        )));
    }
    let dt_euler = gershgorin_bound(m).dt_euler;
    let dt_cycle = dt / n_cycles as f64;
    let mut u = u_n.to_vec();
    let mut total_stages = 0;
    for _ in 0..n_cycles {
        let schedule = StsSchedule::for_ratio(dt_cycle, dt_euler, false)?;
        let (next, rep) = rkl2_step(m, &u, dt_cycle, &schedule)?;
        total_stages += rep.iterations;
        u = next;
    }
    Ok((u, SolveReport::stage_report(total_stages)))
}

/// Advance `dt` with explicit Euler steps of `safety * dt_euler` (the
/// explicit limit computed from the operator's absolute row sums), finishing
/// with a partial step that lands exactly on `dt`. Returns the state and the
/// number of steps taken.
pub fn euler_subcycle(
    m: &SparseMatrix,
    u_n: &[f64],
    dt: f64,
    safety: f64,
) -> Result<(Vec<f64>, usize)> {
    check_state(m, u_n)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time step must be positive, got {}",
            dt
        )));
    }
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "safety factor must lie in (0, 1], got {}",
            safety
        )));
    }
    let h = safety * gershgorin_bound(m).dt_euler;
    let steps = if dt <= h { 1 } else { (dt / h).ceil() as usize };
    let mut u = u_n.to_vec();
    let mut advanced = 0.0;
    for k in 0..steps {
        let step = if k + 1 == steps { dt - advanced } else { h };
        let mu = m.spmv(&u)?;
        for i in 0..u.len() {
            u[i] += step * mu[i];
        }
        advanced += step;
    }
    Ok((u, steps))
}

/// Damp the stiffest modes with an explicit-Euler prefix over
/// `fraction * dt`, then complete the step with a single super step over the
/// remainder.
pub fn hybrid_euler_rkl2(
    m: &SparseMatrix,
    u_n: &[f64],
    dt: f64,
    fraction: f64,
    safety: f64,
) -> Result<(Vec<f64>, SolveReport)> {
    check_state(m, u_n)?;
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "prefix fraction must lie in (0, 1), got {}",
            fraction
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time step must be positive, got {}",
            dt
        )));
    }
    let (u_mid, euler_steps) = euler_subcycle(m, u_n, fraction * dt, safety)?;
    let remainder = (1.0 - fraction) * dt;
    let dt_euler = gershgorin_bound(m).dt_euler;
    let schedule = StsSchedule::for_ratio(remainder, dt_euler, false)?;
    let (u_out, rep) = rkl2_step(m, &u_mid, remainder, &schedule)?;
    Ok((u_out, SolveReport::stage_report(euler_steps + rep.iterations)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::NonuniformGrid;
    use crate::operators::{assemble_diffusion_1d, BoundaryKind};
    use crate::rng::unit_from;
    use crate::sparse::DiaMatrix;
    use approx::assert_relative_eq;

    fn brute_force_stages(ratio: f64) -> usize {
        let mut s = 2;
        loop {
            let sf = s as f64;
            if (sf * sf + sf - 2.0) / 4.0 >= ratio {
                return s;
            }
            s += 1;
        }
    }

    #[test]
    fn stage_count_examples() {
        assert_eq!(rkl2_stages(1.0, 1.0, false).unwrap(), 2);
        assert_eq!(rkl2_stages(100.0, 1.0, false).unwrap(), 20);
        assert_eq!(rkl2_stages(500.0, 1.0, false).unwrap(), 45);
        assert_eq!(rkl2_stages(1e-9, 1.0, false).unwrap(), 2);
        assert_eq!(rkl2_stages(100.0, 1.0, true).unwrap(), 21);
        assert!(rkl2_stages(1.0, 0.0, false).is_err());
        assert!(rkl2_stages(0.0, 1.0, false).is_err());
    }

    #[test]
    fn stage_count_is_minimal_for_stability() {
        let mut ratio = 0.1;
        while ratio <= 1e4 {
            let s = rkl2_stages(ratio, 1.0, false).unwrap();
            assert_eq!(s, brute_force_stages(ratio), "ratio {}", ratio);
            let odd = rkl2_stages(ratio, 1.0, true).unwrap();
            assert!(odd % 2 == 1 && (odd == s || odd == s + 1));
            ratio *= 1.37;
        }
    }

    #[test]
    fn coefficient_invariants() {
        for s in [2usize, 5, 20, 45] {
            let sch = StsSchedule::new(s).unwrap();
            assert_eq!(sch.b[0], 1.0 / 3.0);
            assert_eq!(sch.b[1], 1.0 / 3.0);
            assert_eq!(sch.b[2], 1.0 / 3.0);
            for k in 2..s {
                assert!(sch.b[k + 1] >= sch.b[k]);
                assert!(sch.b[k + 1] < 0.5);
            }
            let sf = s as f64;
            assert_relative_eq!(
                sch.mu_tilde[1],
                4.0 / (3.0 * (sf * sf + sf - 2.0)),
                max_relative = 1e-14
            );
        }
        assert!(StsSchedule::new(1).is_err());
    }

    #[test]
    fn two_stage_polynomial_is_the_quadratic_taylor_expansion() {
        let sch = StsSchedule::new(2).unwrap();
        for z in [-1.5, -0.3, 0.0, 0.4, 2.0] {
            assert_relative_eq!(
                sch.scalar_growth(z),
                1.0 + z + 0.5 * z * z,
                max_relative = 1e-14,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn growth_polynomial_matches_the_exponential_to_second_order() {
        for s in [5usize, 20, 45] {
            let sch = StsSchedule::new(s).unwrap();
            let h = 1e-5;
            assert_eq!(sch.scalar_growth(0.0), 1.0);
            let dp = sch.growth_deviation(h);
            let dm = sch.growth_deviation(-h);
            let gp = (dp - dm) / (2.0 * h);
            let gpp = (dp + dm) / (h * h);
            assert_relative_eq!(gp, 1.0, epsilon = 1e-6);
            assert_relative_eq!(gpp, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn zero_operator_is_a_fixed_point() {
        let m = SparseMatrix::Dia(DiaMatrix::zero(4, &[0]).unwrap());
        let u = vec![1.0, -2.0, 3.5, 0.25];
        for s in [2usize, 7, 45] {
            let sch = StsSchedule::new(s).unwrap();
            let (out, report) = rkl2_step(&m, &u, 3.0, &sch).unwrap();
            for (a, b) in out.iter().zip(u.iter()) {
                assert_relative_eq!(a, b, max_relative = 1e-13, epsilon = 1e-13);
            }
            assert_eq!(report.local_exchanges, s);
            assert_eq!(report.global_reductions, 0);
        }
        assert_eq!(rkl2_subcycled(&m, &u, 3.0, 5).unwrap().0.len(), 4);
        let (h, _) = hybrid_euler_rkl2(&m, &u, 3.0, 0.25, 0.9).unwrap();
        for (a, b) in h.iter().zip(u.iter()) {
            assert_relative_eq!(a, b, max_relative = 1e-13, epsilon = 1e-13);
        }
    }

    #[test]
    fn matrix_step_agrees_with_scalar_recursion() {
        // A 1x1 operator turns the step into the scalar growth factor.
        for (s, z) in [(2usize, -0.7), (9, -5.0), (45, -900.0)] {
            let dt = 0.125;
            let mut d = DiaMatrix::zero(1, &[0]).unwrap();
            d.set(0, 0, z / dt).unwrap();
            let m = SparseMatrix::Dia(d);
            let sch = StsSchedule::new(s).unwrap();
            let (out, _) = rkl2_step(&m, &[1.0], dt, &sch).unwrap();
            assert_relative_eq!(out[0], sch.scalar_growth(z), max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    fn heat_problem(n: usize) -> (SparseMatrix, Vec<f64>, f64, f64) {
        let grid = NonuniformGrid::uniform(n, 1.0).unwrap();
        let p = assemble_diffusion_1d(&grid, &vec![1.0; n], BoundaryKind::Dirichlet).unwrap();
        let x = grid.node_positions(0);
        let u0: Vec<f64> = x.iter().map(|&xi| (std::f64::consts::PI * xi).sin()).collect();
        let dx = 1.0 / (n as f64 + 1.0);
        // Fundamental-mode eigenvalue of the discrete operator.
        let lambda1 = -4.0 / (dx * dx) * (std::f64::consts::PI * dx / 2.0).sin().powi(2);
        let dt_euler = gershgorin_bound(&p.operator).dt_euler;
        (p.operator, u0, lambda1, dt_euler)
    }

    fn l2_error_after(m: &SparseMatrix, u0: &[f64], lambda1: f64, dt_total: f64, steps: usize, sch_of: impl Fn(f64) -> StsSchedule) -> f64 {
        let dt = dt_total / steps as f64;
        let sch = sch_of(dt);
        let mut u = u0.to_vec();
        for _ in 0..steps {
            u = rkl2_step(m, &u, dt, &sch).unwrap().0;
        }
        // Exact solution of the semi-discrete system for the sampled mode.
        let decay = (lambda1 * dt_total).exp();
        let n = u.len();
        let err2: f64 = u
            .iter()
            .zip(u0.iter())
            .map(|(ui, u0i)| (ui - decay * u0i) * (ui - decay * u0i))
            .sum();
        (err2 / n as f64).sqrt()
    }

    #[test]
    fn halving_the_step_quarters_the_error() {
        let n = 32;
        let (m, u0, lambda1, dt_euler) = heat_problem(n);
        let dt = 10.0 * dt_euler;
        let sch_for = |step: f64| StsSchedule::for_ratio(step, dt_euler, false).unwrap();
        let e1 = l2_error_after(&m, &u0, lambda1, dt, 1, sch_for);
        let e2 = l2_error_after(&m, &u0, lambda1, dt, 2, sch_for);
        let ratio = e1 / e2;
        assert!(
            (3.5..=4.5).contains(&ratio),
            "error ratio {} (errors {} {})",
            ratio,
            e1,
            e2
        );
    }

    #[test]
    fn shifted_stage_constant_loses_an_order() {
        let n = 32;
        let (m, u0, lambda1, dt_euler) = heat_problem(n);
        let dt = 10.0 * dt_euler;
        let sch_for = |step: f64| {
            let s = rkl2_stages(step, dt_euler, false).unwrap();
            StsSchedule::with_shifted_stage_constant(s)
        };
        let e1 = l2_error_after(&m, &u0, lambda1, dt, 1, &sch_for);
        let e2 = l2_error_after(&m, &u0, lambda1, dt, 2, &sch_for);
        let order = (e1 / e2).log2();
        assert!(order < 1.5, "shifted variant still shows order {}", order);
    }

    #[test]
    fn max_norm_is_non_increasing_across_steps() {
        let n = 32;
        let (m, u0, _, dt_euler) = heat_problem(n);
        for ratio in [5.0, 50.0, 500.0] {
            let dt = ratio * dt_euler;
            let sch = StsSchedule::for_ratio(dt, dt_euler, false).unwrap();
            let mut u = u0.clone();
            let mut last = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for _ in 0..20 {
                u = rkl2_step(&m, &u, dt, &sch).unwrap().0;
                let norm = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                assert!(norm <= last * (1.0 + 1e-12), "ratio {}: {} after {}", ratio, norm, last);
                last = norm;
            }
        }
    }

    #[test]
    fn extreme_ratio_undershoot_is_removed_by_sub_cycling() {
        // The stage polynomial is bounded by one but not sign-preserving, so a
        // single step over a very stiff interval can push positive data
        // negative. Moderate ratios stay positive, and splitting the extreme
        // step into cycles of moderate ratio restores positivity.
        let n = 32;
        let (m, _, _, dt_euler) = heat_problem(n);
        let u0: Vec<f64> = (0..n).map(|i| unit_from(&[42, i as u64])).collect();
        let peak = u0.iter().fold(0.0f64, |a, v| a.max(*v));
        let min_of = |u: &[f64]| u.iter().fold(f64::INFINITY, |a, v| a.min(*v));
        for ratio in [5.0, 50.0] {
            let dt = ratio * dt_euler;
            let sch = StsSchedule::for_ratio(dt, dt_euler, false).unwrap();
            let (u, _) = rkl2_step(&m, &u0, dt, &sch).unwrap();
            assert!(min_of(&u) >= -1e-12 * peak, "ratio {}: min {}", ratio, min_of(&u));
        }
        let dt = 500.0 * dt_euler;
        let sch = StsSchedule::for_ratio(dt, dt_euler, false).unwrap();
        let (single, _) = rkl2_step(&m, &u0, dt, &sch).unwrap();
        assert!(min_of(&single) < -1e-3 * peak, "expected undershoot, min {}", min_of(&single));
        let (cycled, _) = rkl2_subcycled(&m, &u0, dt, 100).unwrap();
        assert!(min_of(&cycled) >= -1e-12 * peak, "cycled min {}", min_of(&cycled));
    }

    #[test]
    fn single_cycle_matches_plain_step() {
        let n = 16;
        let (m, u0, _, dt_euler) = heat_problem(n);
        let dt = 20.0 * dt_euler;
        let sch = StsSchedule::for_ratio(dt, dt_euler, false).unwrap();
        let (direct, _) = rkl2_step(&m, &u0, dt, &sch).unwrap();
        let (cycled, cycled_report) = rkl2_subcycled(&m, &u0, dt, 1).unwrap();
        assert_eq!(direct, cycled);
        assert_eq!(cycled_report, SolveReport::stage_report(sch.s));
        assert!(rkl2_subcycled(&m, &u0, dt, 0).is_err());
    }

    #[test]
    fn sub_cycling_damps_the_stiffest_mode_harder() {
        // Splitting a ratio-500 step into 10 ratio-50 cycles compounds the
        // per-cycle damping of the stiffest mode.
        let z = -1000.0;
        let s_single = rkl2_stages(500.0, 1.0, false).unwrap();
        let single = StsSchedule::new(s_single).unwrap().scalar_growth(z).abs();
        let s_cycle = rkl2_stages(50.0, 1.0, false).unwrap();
        let per_cycle = StsSchedule::new(s_cycle).unwrap().scalar_growth(z / 10.0).abs();
        let total = per_cycle.powi(10);
        assert!(total < single, "cycled {} vs single {}", total, single);
    }

    #[test]
    fn euler_single_step_within_limit() {
        let m = SparseMatrix::Dia(DiaMatrix::tridiagonal(3, 1.0, -2.0, 1.0).unwrap());
        let u = vec![1.0, 2.0, 0.5];
        // Gershgorin bound 4 -> dt_euler = 0.5; dt below safety * 0.5.
        let dt = 0.3;
        let (out, steps) = euler_subcycle(&m, &u, dt, 0.9).unwrap();
        assert_eq!(steps, 1);
        let mu = m.spmv(&u).unwrap();
        for i in 0..3 {
            assert_relative_eq!(out[i], u[i] + dt * mu[i], max_relative = 1e-14);
        }
    }

    #[test]
    fn euler_step_count_ceils_the_ratio() {
        let m = SparseMatrix::Dia(DiaMatrix::tridiagonal(9, 100.0, -200.0, 100.0).unwrap());
        let dt_euler = gershgorin_bound(&m).dt_euler;
        assert_relative_eq!(dt_euler, 0.005, max_relative = 1e-12);
        let u = vec![1.0; 9];
        let (_, steps) = euler_subcycle(&m, &u, 500.0 * dt_euler, 0.9).unwrap();
        assert_eq!(steps, 556);
    }

    #[test]
    fn euler_per_step_factor_on_the_stiffest_mode() {
        let mut d = DiaMatrix::zero(1, &[0]).unwrap();
        d.set(0, 0, -400.0).unwrap();
        let m = SparseMatrix::Dia(d);
        // dt_euler = 0.005, two full steps of 0.9 * dt_euler.
        let (out, steps) = euler_subcycle(&m, &[1.0], 0.009, 0.9).unwrap();
        assert_eq!(steps, 2);
        assert_relative_eq!(out[0], 0.64, max_relative = 1e-12);
    }

    #[test]
    fn zero_operator_euler_is_identity_in_one_step() {
        let m = SparseMatrix::Dia(DiaMatrix::zero(2, &[0]).unwrap());
        let (out, steps) = euler_subcycle(&m, &[1.0, -1.0], 5.0, 0.9).unwrap();
        assert_eq!(steps, 1);
        assert_eq!(out, vec![1.0, -1.0]);
    }

    #[test]
    fn hybrid_prefix_crushes_the_stiffest_mode() {
        // Scalar stand-in for the most oscillatory grid mode at step ratio
        // 500: the Euler prefix runs 139 sub-steps at factor -0.8 (last one
        // partial at -0.6) before the super step finishes the remainder.
        let mut d = DiaMatrix::zero(1, &[0]).unwrap();
        d.set(0, 0, -400.0).unwrap();
        let m = SparseMatrix::Dia(d);
        let dt_euler = 0.005;
        let dt = 500.0 * dt_euler;
        let (_, steps) = euler_subcycle(&m, &[1.0], 0.25 * dt, 0.9).unwrap();
        assert_eq!(steps, 139);
        let (out, _) = hybrid_euler_rkl2(&m, &[1.0], dt, 0.25, 0.9).unwrap();
        let damping = out[0].abs();
        assert!(damping < 1e-10, "hybrid damping {}", damping);
        // A single implicit backward-Euler step only damps this mode to
        // 1/(1 + 1000) ~ 1e-3; the hybrid does far better.
        let be_factor = 1.0 / (1.0 - dt * -400.0);
        assert!(damping < be_factor);
    }

    #[test]
    fn hybrid_approaches_plain_super_step_for_tiny_prefix() {
        let n = 16;
        let (m, u0, _, dt_euler) = heat_problem(n);
        let dt = 20.0 * dt_euler;
        let sch = StsSchedule::for_ratio(dt, dt_euler, false).unwrap();
        let (direct, _) = rkl2_step(&m, &u0, dt, &sch).unwrap();
        let (hybrid, _) = hybrid_euler_rkl2(&m, &u0, dt, 1e-9, 0.9).unwrap();
        let peak = direct.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for (h, d) in hybrid.iter().zip(direct.iter()) {
            assert!((h - d).abs() <= 1e-6 * peak, "{} vs {}", h, d);
        }
        assert!(hybrid_euler_rkl2(&m, &u0, dt, 0.0, 0.9).is_err());
        assert!(hybrid_euler_rkl2(&m, &u0, dt, 1.0, 0.9).is_err());
    }

    #[test]
    fn state_length_is_validated() {
        let m = SparseMatrix::identity(3);
        let sch = StsSchedule::new(2).unwrap();
        assert!(rkl2_step(&m, &[1.0; 2], 1.0, &sch).is_err());
        assert!(euler_subcycle(&m, &[1.0; 2], 1.0, 0.9).is_err());
        assert!(euler_subcycle(&m, &[1.0; 3], 1.0, 0.0).is_err());
        assert!(rkl2_step(&m, &[1.0; 3], 0.0, &sch).is_err());
    }
}
