//! Per-mode growth factors for the competing one-step schemes, and the
//! stage-count speedup model for the accelerated explicit integrator.
//!
//! For constant-coefficient diffusion on a uniform 1-D grid the semi-discrete
//! operator has eigenvalues `lambda(k) = -(4*alpha/dx^2) sin^2(k*dx/2)`, so a
//! step of size `dt = ratio * dt_euler` multiplies each Fourier mode by a
//! scheme-specific function of the single dimensionless number
//! `z = dt * lambda`.  Everything here is a pure function of `z` (and the
//! stage count), which makes the scheme comparison exact and cheap.

use crate::error::{Error, Result};
use crate::sts::{rkl2_stages, StsSchedule};

/// Mode-grid resolution used for sampled growth-factor curves.
pub const MODE_SAMPLES: usize = 512;

/// Step-size ratios for the standard four-panel curve set.
pub const PANEL_RATIOS: [f64; 4] = [0.2, 5.0, 50.0, 500.0];

/// Scaled eigenvalue `z = dt * lambda(k)` of a mode with dimensionless
/// wavenumber `k_dx` in `(0, pi]`, for a step of `ratio` times the explicit
/// Euler limit `dt_euler = dx^2 / (2*alpha)`:
///
/// `z = -2 * ratio * sin^2(k_dx / 2)`.
///
/// The grid spacing and diffusivity cancel; `z <= 0` always.
pub fn mode_z(k_dx: f64, ratio: f64) -> f64 {
    let s = (0.5 * k_dx).sin();
    -2.0 * ratio * s * s
}

/// Exact per-step decay of a mode: `e^z`.
pub fn amp_exact(z: f64) -> f64 {
    z.exp()
}

/// Forward-Euler growth factor `1 + z` (stable only for `z >= -2`).
pub fn amp_euler(z: f64) -> f64 {
    1.0 + z
}

/// Backward-Euler growth factor `1 / (1 - z)`; in `(0, 1]` for `z <= 0` and
/// tending to zero as `z -> -inf`.
pub fn amp_be(z: f64) -> f64 {
    1.0 / (1.0 - z)
}

/// Growth factor of the `s`-stage accelerated explicit scheme, evaluated by
/// running the stage recursion on the scalar problem `u' = (z/dt) u`.
/// A polynomial in `z` of degree `s`; bounded by one in magnitude whenever
/// `s` covers the implied step ratio.
pub fn amp_rkl2(z: f64, s: usize) -> Result<f64> {
    Ok(StsSchedule::new(s)?.scalar_growth(z))
}

/// Stage count for a bare step ratio (minimal, no odd rounding).
pub fn stages_for_ratio(ratio: f64) -> Result<usize> {
    rkl2_stages(ratio, 1.0, false)
}

/// Ratio of explicit-Euler steps to accelerated-scheme stages needed to cover
/// the same interval: `ratio / s(ratio)`, the idealized speedup when one
/// Euler step costs the same as one stage.  Piecewise linear in `ratio` with
/// jumps where the integer stage count changes.
pub fn speedup_estimate(ratio: f64) -> Result<f64> {
    let s = stages_for_ratio(ratio)?;
    Ok(ratio / s as f64)
}

/// One row of the speedup curve.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupRow {
    pub ratio: f64,
    pub stages: usize,
    pub speedup: f64,
}

/// Speedup curve on a log-spaced ratio grid ending exactly at `max_ratio`.
/// No smoothing is applied, so the integer stage count shows through as a
/// sawtooth.
pub fn speedup_table(max_ratio: f64, samples: usize) -> Result<Vec<SpeedupRow>> {
    if !(max_ratio > 0.0) || !max_ratio.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "speedup table needs a positive finite max ratio, got {max_ratio}"
        )));
    }
    let lo = max_ratio.min(0.1);
    let rows = if lo == max_ratio { 1 } else { samples.max(2) };
    let mut out = Vec::with_capacity(rows);
    for i in 0..rows {
        let ratio = if i + 1 == rows {
            max_ratio
        } else {
            lo * (max_ratio / lo).powf(i as f64 / (rows - 1) as f64)
        };
        let stages = stages_for_ratio(ratio)?;
        out.push(SpeedupRow {
            ratio,
            stages,
            speedup: ratio / stages as f64,
        });
    }
    Ok(out)
}

/// Sampled growth factors of every scheme over the mode grid
/// `k_dx = pi * i / MODE_SAMPLES`, `i = 1 ..= MODE_SAMPLES` (the highest
/// resolved mode `pi` included, the trivial mode `0` excluded), at one step
/// ratio.
///
/// The forward-Euler column is populated only where the scheme is stable for
/// every mode (`ratio <= 1`); otherwise it is `None` and serializes blank.
#[derive(Debug, Clone)]
pub struct AmplificationCurve {
    pub ratio: f64,
    pub stages: usize,
    pub k_dx: Vec<f64>,
    pub exact: Vec<f64>,
    pub euler: Vec<Option<f64>>,
    pub be: Vec<f64>,
    pub rkl2: Vec<f64>,
}

impl AmplificationCurve {
    pub fn sample(ratio: f64) -> Result<Self> {
        if !(ratio > 0.0) || !ratio.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "amplification curve needs a positive finite ratio, got {ratio}"
            )));
        }
        let stages = stages_for_ratio(ratio)?;
        let schedule = StsSchedule::new(stages)?;
        let n = MODE_SAMPLES;
        let mut k_dx = Vec::with_capacity(n);
        let mut exact = Vec::with_capacity(n);
        let mut euler = Vec::with_capacity(n);
        let mut be = Vec::with_capacity(n);
        let mut rkl2 = Vec::with_capacity(n);
        for i in 1..=n {
            let k = std::f64::consts::PI * i as f64 / n as f64;
            let z = mode_z(k, ratio);
            k_dx.push(k);
            exact.push(amp_exact(z));
            euler.push(if ratio <= 1.0 { Some(amp_euler(z)) } else { None });
            be.push(amp_be(z));
            rkl2.push(schedule.scalar_growth(z));
        }
        Ok(Self {
            ratio,
            stages,
            k_dx,
            exact,
            euler,
            be,
            rkl2,
        })
    }

    /// Serialize as CSV with the fixed column order
    /// `k_dx,exact,euler,be,rkl2`; unstable forward-Euler entries are blank.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k_dx,exact,euler,be,rkl2\n");
        for i in 0..self.k_dx.len() {
            let euler = match self.euler[i] {
                Some(v) => format!("{v}"),
                None => String::new(),
            };
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.k_dx[i], self.exact[i], euler, self.be[i], self.rkl2[i]
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{CsrMatrix, SparseMatrix};
    use crate::sts::rkl2_step;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn scaled_eigenvalue_examples() {
        assert_eq!(mode_z(PI, 500.0), -1000.0);
        assert_relative_eq!(mode_z(0.5 * PI, 1.0), -1.0, max_relative = 1e-12);
        assert!(mode_z(1e-9, 5.0).abs() < 1e-15);
        for i in 1..=64 {
            let k = PI * i as f64 / 64.0;
            assert!(mode_z(k, 3.0) <= 0.0);
        }
    }

    #[test]
    fn all_schemes_are_exact_at_zero_stiffness() {
        assert_eq!(amp_exact(0.0), 1.0);
        assert_eq!(amp_euler(0.0), 1.0);
        assert_eq!(amp_be(0.0), 1.0);
        assert_eq!(amp_rkl2(0.0, 7).unwrap(), 1.0);
    }

    #[test]
    fn implicit_factor_at_the_stiffest_mode() {
        let z = mode_z(PI, 500.0);
        assert_eq!(amp_be(z), 1.0 / 1001.0);
        assert!(amp_exact(z) < 1e-300);
        assert_eq!(amp_euler(mode_z(PI, 0.2)), 0.6);
    }

    #[test]
    fn accelerated_factor_at_the_stiffest_mode_is_half_ish() {
        let s = stages_for_ratio(500.0).unwrap();
        assert_eq!(s, 45);
        let g = amp_rkl2(-1000.0, s).unwrap().abs();
        assert!((0.3..=0.7).contains(&g), "|G| = {g}");
    }

    #[test]
    fn high_mode_comparison_shows_the_damping_gap() {
        // The implicit scheme crushes the stiffest mode while the accelerated
        // explicit one only attenuates it moderately.
        for ratio in [5.0, 50.0, 500.0] {
            let z = mode_z(PI, ratio);
            let s = stages_for_ratio(ratio).unwrap();
            let g_rkl2 = amp_rkl2(z, s).unwrap().abs();
            let g_be = amp_be(z).abs();
            assert!(g_rkl2 > 0.25, "ratio {ratio}: accelerated {g_rkl2}");
            assert!(g_be < 0.1, "ratio {ratio}: implicit {g_be}");
        }
    }

    #[test]
    fn stage_polynomial_is_bounded_on_its_stability_span() {
        for s in 2..=60usize {
            let span = (s * s + s - 2) as f64 / 2.0;
            for i in 0..=200 {
                let z = -span * i as f64 / 200.0;
                let g = amp_rkl2(z, s).unwrap().abs();
                assert!(g <= 1.0 + 1e-12, "s {s} z {z}: |G| = {g}");
            }
        }
    }

    #[test]
    fn speedup_spot_values() {
        assert_eq!(speedup_estimate(1.0).unwrap(), 0.5);
        assert_eq!(speedup_estimate(100.0).unwrap(), 5.0);
        assert_relative_eq!(
            speedup_estimate(500.0).unwrap(),
            500.0 / 45.0,
            max_relative = 1e-15
        );
        assert!(speedup_estimate(0.0).is_err());
    }

    #[test]
    fn speedup_table_is_jagged_not_smoothed() {
        let rows = speedup_table(100.0, 200).unwrap();
        assert_eq!(rows.len(), 200);
        assert_eq!(rows.last().unwrap().ratio, 100.0);
        assert_eq!(rows.last().unwrap().speedup, 5.0);
        let mut saw_drop = false;
        for w in rows.windows(2) {
            assert!(w[1].ratio > w[0].ratio);
            if w[1].stages == w[0].stages {
                // Fixed denominator: strictly increasing within a plateau.
                assert!(w[1].speedup > w[0].speedup);
            } else if w[1].speedup < w[0].speedup {
                saw_drop = true;
            }
        }
        assert!(saw_drop, "stage-count jumps should dent the curve");
        let capped = speedup_table(1.0, 50).unwrap();
        assert!(capped.iter().all(|r| r.speedup <= 0.5));
        let single = speedup_table(0.05, 50).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].ratio, 0.05);
    }

    #[test]
    fn curve_factors_stay_inside_the_unit_interval() {
        for ratio in PANEL_RATIOS {
            let c = AmplificationCurve::sample(ratio).unwrap();
            assert_eq!(c.k_dx.len(), MODE_SAMPLES);
            assert_eq!(*c.k_dx.last().unwrap(), PI);
            for i in 0..c.k_dx.len() {
                // e^z underflows to 0.0 below z ~ -745, so the open lower
                // bound only holds where the factor is representable.
                assert!(c.exact[i] >= 0.0 && c.exact[i] < 1.0);
                assert!(mode_z(c.k_dx[i], ratio) > -708.0 || c.exact[i] < 1e-300);
                assert!(c.be[i].abs() <= 1.0);
                assert!(c.rkl2[i].abs() <= 1.0 + 1e-12);
                assert_eq!(c.euler[i].is_some(), ratio <= 1.0);
            }
        }
    }

    #[test]
    fn accelerated_damping_is_not_monotone_in_mode_number() {
        let c = AmplificationCurve::sample(500.0).unwrap();
        let mags: Vec<f64> = c.rkl2.iter().map(|g| g.abs()).collect();
        let rises = mags.windows(2).filter(|w| w[1] > w[0] + 1e-9).count();
        assert!(rises > 0, "expected interior rebounds in |G|");
    }

    #[test]
    fn low_modes_favor_the_accelerated_scheme() {
        let c = AmplificationCurve::sample(5.0).unwrap();
        let mut checked = 0;
        for i in 0..c.k_dx.len() {
            if c.k_dx[i] > 0.2 {
                break;
            }
            let err_rkl2 = (c.rkl2[i] - c.exact[i]).abs();
            let err_be = (c.be[i] - c.exact[i]).abs();
            assert!(
                err_rkl2 < err_be,
                "k_dx {}: accelerated {} vs implicit {}",
                c.k_dx[i],
                err_rkl2,
                err_be
            );
            checked += 1;
        }
        assert!(checked >= 30);
    }

    #[test]
    fn euler_column_blanks_exactly_when_unstable() {
        let stable = AmplificationCurve::sample(0.2).unwrap();
        let csv = stable.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "k_dx,exact,euler,be,rkl2");
        assert_eq!(csv.lines().count(), MODE_SAMPLES + 1);
        assert!(!csv.contains(",,"));
        let unstable = AmplificationCurve::sample(50.0).unwrap();
        for line in unstable.to_csv().lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 5);
            assert_eq!(fields[2], "");
        }
    }

    #[test]
    fn scalar_recursion_matches_a_periodic_operator_eigenmode() {
        // A wrap-around second-difference ring has eigenvectors
        // cos(2*pi*m*j/n); stepping one of them must damp it by exactly the
        // scalar growth factor of the matching z.
        let n = 16usize;
        let dx = 1.0 / n as f64;
        let mut entries = Vec::new();
        for j in 0..n {
            entries.push((j, j, -2.0 / (dx * dx)));
            entries.push((j, (j + 1) % n, 1.0 / (dx * dx)));
            entries.push((j, (j + n - 1) % n, 1.0 / (dx * dx)));
        }
        let m = SparseMatrix::Csr(CsrMatrix::from_entries(n, entries).unwrap());
        let dt_euler = crate::stability::gershgorin_bound(&m).dt_euler;
        for ratio in [5.0, 50.0] {
            let dt = ratio * dt_euler;
            let sch = StsSchedule::for_ratio(dt, dt_euler, false).unwrap();
            for mode in [1usize, 3, 5] {
                let v: Vec<f64> = (0..n)
                    .map(|j| (2.0 * PI * mode as f64 * j as f64 / n as f64).cos())
                    .collect();
                let lambda = -4.0 / (dx * dx)
                    * (PI * mode as f64 / n as f64).sin().powi(2);
                let g = sch.scalar_growth(lambda * dt);
                let (u, _) = rkl2_step(&m, &v, dt, &sch).unwrap();
                for j in 0..n {
                    assert_relative_eq!(u[j], g * v[j], max_relative = 1e-10, epsilon = 1e-10);
                }
            }
        }
    }
}
