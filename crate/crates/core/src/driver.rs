//! Time-stepped runs over named problems: operator reassembly for
//! state-dependent coefficients, integrator dispatch, snapshot capture, and
//! per-step work tallies.

use crate::error::{Error, Result};
use crate::krylov::{default_kmax, pcg_solve, SolveReport};
use crate::mesh::{preset_grid, NonuniformGrid};
use crate::operators::{
    assemble_aniso_2d, assemble_diffusion_1d, lagged_diffusivity, BoundaryKind, DiffusionProblem,
    TemperatureCoefficient,
};
use crate::precond::{build_pc1, build_pc2, uniform_blocks};
use crate::stability::gershgorin_bound;
use crate::sts::{euler_subcycle, hybrid_euler_rkl2, rkl2_step, rkl2_subcycled, StsSchedule};

/// How the spatial operator is produced from the problem data.
#[derive(Debug, Clone)]
pub enum OperatorKind {
    /// 1-D variable-coefficient diffusion with one diffusivity per node.
    Line { alpha: Vec<f64> },
    /// 2-D anisotropic diffusion with per-cell magnitude and unit direction.
    Plane { kappa: Vec<f64>, bhat: Vec<[f64; 2]> },
    /// 2-D field-aligned conduction whose magnitude is re-evaluated from the
    /// current state before every step (lagged coefficient).
    LaggedConduction {
        coeff: TemperatureCoefficient,
        bhat: Vec<[f64; 2]>,
    },
}

/// A named initial-value problem: grid, boundary treatment, initial state,
/// and the rule for building the spatial operator.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub grid: NonuniformGrid,
    pub boundary: BoundaryKind,
    pub u0: Vec<f64>,
    pub kind: OperatorKind,
}

impl Problem {
    /// Assemble the spatial operator for the given state. Linear kinds
    /// ignore the state; the lagged kind evaluates its coefficient on it.
    pub fn assemble(&self, state: &[f64]) -> Result<DiffusionProblem> {
        match &self.kind {
            OperatorKind::Line { alpha } => {
                assemble_diffusion_1d(&self.grid, alpha, self.boundary)
            }
            OperatorKind::Plane { kappa, bhat } => {
                self.require_dirichlet()?;
                assemble_aniso_2d(&self.grid, kappa, bhat)
            }
            OperatorKind::LaggedConduction { coeff, bhat } => {
                self.require_dirichlet()?;
                let kappa = lagged_diffusivity(coeff, state)?;
                assemble_aniso_2d(&self.grid, &kappa, bhat)
            }
        }
    }

    /// Whether the operator must be rebuilt from the evolving state.
    pub fn is_state_dependent(&self) -> bool {
        matches!(self.kind, OperatorKind::LaggedConduction { .. })
    }

    fn require_dirichlet(&self) -> Result<()> {
        match self.boundary {
            BoundaryKind::Dirichlet => Ok(()),
            BoundaryKind::Neumann => Err(Error::InvalidArgument(
                "two-dimensional operators support only fixed-value boundaries".to_string(),
            )),
        }
    }
}

/// The named problem catalog accepted by [`preset_problem`].
pub const PROBLEM_PRESETS: &[&str] = &[
    "linear-1d",
    "linear-1d-neumann",
    "varcoef-1d",
    "mas-corona-1d",
    "aniso-2d-tilted",
    "tc-nonlinear-2d",
];

/// Build one of the canned problems by name.
pub fn preset_problem(name: &str) -> Result<Problem> {
    match name {
        "linear-1d" => {
            let grid = NonuniformGrid::uniform(64, 1.0)?;
            let u0 = half_sine(&grid);
            Ok(Problem {
                name: name.to_string(),
                boundary: BoundaryKind::Dirichlet,
                kind: OperatorKind::Line { alpha: vec![1.0; 64] },
                grid,
                u0,
            })
        }
        "linear-1d-neumann" => {
            let grid = NonuniformGrid::uniform(64, 1.0)?;
            // Zero slope at both walls keeps the profile compatible with the
            // no-flux boundary; the offset keeps the state positive.
            let u0: Vec<f64> = grid
                .node_positions(0)
                .iter()
                .map(|x| 1.5 + (std::f64::consts::PI * x).cos())
                .collect();
            Ok(Problem {
                name: name.to_string(),
                boundary: BoundaryKind::Neumann,
                kind: OperatorKind::Line { alpha: vec![1.0; 64] },
                grid,
                u0,
            })
        }
        "varcoef-1d" => {
            let n = 64usize;
            let grid = NonuniformGrid::uniform(n, 1.0)?;
            // Linear ramp spanning exactly one decade across the unknowns.
            let alpha: Vec<f64> =
                (0..n).map(|i| 1.0 + 9.0 * i as f64 / (n - 1) as f64).collect();
            let u0 = half_sine(&grid);
            Ok(Problem {
                name: name.to_string(),
                boundary: BoundaryKind::Dirichlet,
                kind: OperatorKind::Line { alpha },
                grid,
                u0,
            })
        }
        "mas-corona-1d" => {
            let grid = preset_grid("mas-corona-1d")?;
            let origin = grid.origin(0);
            let length = grid.length(0);
            let u0: Vec<f64> = grid
                .node_positions(0)
                .iter()
                .map(|x| (std::f64::consts::PI * (x - origin) / length).sin())
                .collect();
            let n = grid.n_interior(0);
            Ok(Problem {
                name: name.to_string(),
                boundary: BoundaryKind::Dirichlet,
                kind: OperatorKind::Line { alpha: vec![1.0; n] },
                grid,
                u0,
            })
        }
        "aniso-2d-tilted" => {
            let grid = NonuniformGrid::product(&[
                NonuniformGrid::uniform(16, 1.0)?,
                NonuniformGrid::uniform(16, 1.0)?,
            ])?;
            let n = grid.n_points();
            let theta = 30f64.to_radians();
            let bhat = vec![[theta.cos(), theta.sin()]; n];
            let u0 = product_sine(&grid);
            Ok(Problem {
                name: name.to_string(),
                boundary: BoundaryKind::Dirichlet,
                kind: OperatorKind::Plane { kappa: vec![1.0; n], bhat },
                grid,
                u0,
            })
        }
        "tc-nonlinear-2d" => {
            let grid = NonuniformGrid::product(&[
                NonuniformGrid::uniform(20, 1.0)?,
                NonuniformGrid::uniform(10, 1.0)?,
            ])?;
            let n = grid.n_points();
            let bhat = vec![[1.0, 0.0]; n];
            // Strictly positive temperature field with a strong interior peak.
            let u0: Vec<f64> = product_sine(&grid).iter().map(|v| 0.5 + 2.0 * v).collect();
            Ok(Problem {
                name: name.to_string(),
                boundary: BoundaryKind::Dirichlet,
                kind: OperatorKind::LaggedConduction {
                    coeff: TemperatureCoefficient::new(1.0, 1.0)?,
                    bhat,
                },
                grid,
                u0,
            })
        }
        other => Err(Error::UnknownPreset {
            name: other.to_string(),
            available: PROBLEM_PRESETS.join(", "),
        }),
    }
}

fn half_sine(grid: &NonuniformGrid) -> Vec<f64> {
    grid.node_positions(0)
        .iter()
        .map(|x| (std::f64::consts::PI * x).sin())
        .collect()
}

fn product_sine(grid: &NonuniformGrid) -> Vec<f64> {
    let xs = grid.node_positions(0);
    let ys = grid.node_positions(1);
    let lx = grid.length(0);
    let ly = grid.length(1);
    let mut u = Vec::with_capacity(xs.len() * ys.len());
    for y in &ys {
        for x in &xs {
            u.push(
                (std::f64::consts::PI * x / lx).sin() * (std::f64::consts::PI * y / ly).sin(),
            );
        }
    }
    u
}

/// Time-integration scheme plus its scheme-specific knobs.
#[derive(Debug, Clone, PartialEq)]
pub enum Integrator {
    /// Backward Euler solved by PCG with the diagonal preconditioner.
    BePcgPc1,
    /// Backward Euler solved by PCG with the block incomplete factorization.
    BePcgPc2 { blocks: usize },
    /// One accelerated super step per time step.
    Rkl2 { force_odd: bool },
    /// One accelerated super step with a caller-chosen stage count, kept
    /// fixed across steps (and refinement levels) instead of re-sized from
    /// the stability ratio. The count must still cover the ratio.
    Rkl2Fixed { stages: usize },
    /// Each time step split into equal super-step cycles.
    Rkl2Subcycled { cycles: usize },
    /// Forward Euler sub-stepped at a fraction of the stability limit.
    Euler { safety: f64 },
    /// Explicit prefix over part of the step, then one super step.
    Hybrid { fraction: f64, safety: f64 },
}

/// Names accepted by [`Integrator::from_name`].
pub const INTEGRATOR_NAMES: &[&str] = &[
    "be-pcg-pc1",
    "be-pcg-pc2",
    "rkl2",
    "rkl2-subcycled",
    "euler",
    "hybrid",
];

impl Integrator {
    /// The scheme's stable identifier, as listed in [`INTEGRATOR_NAMES`].
    pub fn name(&self) -> &'static str {
        match self {
            Integrator::BePcgPc1 => "be-pcg-pc1",
            Integrator::BePcgPc2 { .. } => "be-pcg-pc2",
            Integrator::Rkl2 { .. } => "rkl2",
            Integrator::Rkl2Fixed { .. } => "rkl2-fixed",
            Integrator::Rkl2Subcycled { .. } => "rkl2-subcycled",
            Integrator::Euler { .. } => "euler",
            Integrator::Hybrid { .. } => "hybrid",
        }
    }

    /// Build a scheme from its identifier with default knobs.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "be-pcg-pc1" => Ok(Integrator::BePcgPc1),
            "be-pcg-pc2" => Ok(Integrator::BePcgPc2 { blocks: 4 }),
            "rkl2" => Ok(Integrator::Rkl2 { force_odd: false }),
            "rkl2-subcycled" => Ok(Integrator::Rkl2Subcycled { cycles: 10 }),
            "euler" => Ok(Integrator::Euler { safety: 0.9 }),
            "hybrid" => Ok(Integrator::Hybrid { fraction: 0.25, safety: 0.9 }),
            other => Err(Error::InvalidArgument(format!(
                "unknown integrator '{}'; available: {}",
                other,
                INTEGRATOR_NAMES.join(", ")
            ))),
        }
    }
}

/// How the time step is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtPolicy {
    /// Use this step size directly.
    Fixed(f64),
    /// Multiply the initial operator's explicit stability limit.
    RatioOfEuler(f64),
}

/// Everything a run needs besides the problem itself.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub integrator: Integrator,
    pub dt: DtPolicy,
    pub steps: usize,
    /// Relative residual tolerance for implicit solves.
    pub tol: f64,
    /// Iteration cap for implicit solves; 0 picks a size-based default.
    pub kmax: usize,
    /// Record the state every this many steps; 0 keeps only the endpoints.
    pub snapshot_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            integrator: Integrator::BePcgPc1,
            dt: DtPolicy::RatioOfEuler(10.0),
            steps: 10,
            tol: 1e-10,
            kmax: 0,
            snapshot_every: 0,
        }
    }
}

/// Work record for one completed time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// 1-based index of the completed step.
    pub step: usize,
    /// Physical time after the step.
    pub t: f64,
    pub report: SolveReport,
}

/// Output of a run: the step size actually used, captured states, and the
/// per-step reports.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSeries {
    pub problem_name: String,
    pub integrator_name: &'static str,
    /// Step size shared by every step of the run.
    pub dt: f64,
    /// Explicit stability limit of the initial operator.
    pub dt_euler_initial: f64,
    /// Step indices at which states were captured; starts with 0.
    pub snapshot_steps: Vec<usize>,
    /// Captured states, aligned with `snapshot_steps`.
    pub snapshots: Vec<Vec<f64>>,
    pub records: Vec<StepRecord>,
}

impl RunSeries {
    /// The state after the last completed step (the initial state for an
    /// empty run).
    pub fn final_state(&self) -> &[f64] {
        self.snapshots.last().expect("a run always captures the initial state")
    }

    pub fn final_time(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.t)
    }

    pub fn total_iterations(&self) -> usize {
        self.records.iter().map(|r| r.report.iterations).sum()
    }

    pub fn total_local_exchanges(&self) -> usize {
        self.records.iter().map(|r| r.report.local_exchanges).sum()
    }

    pub fn total_global_reductions(&self) -> usize {
        self.records.iter().map(|r| r.report.global_reductions).sum()
    }
}

/// Advance a problem `steps` times with the configured scheme.
///
/// The step size is frozen from the initial operator even when the operator
/// is state-dependent; explicit stage counts, by contrast, are re-sized each
/// step from the current operator. Implicit solves warm-start from the
/// previous state and report failure with the offending step index.
pub fn run(problem: &Problem, cfg: &RunConfig) -> Result<RunSeries> {
    let n = problem.grid.n_points();
    if problem.u0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "initial state has {} entries for {} grid points",
            problem.u0.len(),
            n
        )));
    }

    let mut u = problem.u0.clone();
    let mut assembled = problem.assemble(&u)?;
    let dt_euler_initial = gershgorin_bound(&assembled.operator).dt_euler;
    let dt = match cfg.dt {
        DtPolicy::Fixed(v) => v,
        DtPolicy::RatioOfEuler(r) => {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "step ratio must be positive and finite, got {}",
                    r
                )));
            }
            if !dt_euler_initial.is_finite() {
                return Err(Error::InvalidArgument(
                    "operator has no finite explicit limit; use a fixed step".to_string(),
                ));
            }
            r * dt_euler_initial
        }
    };
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "step size must be positive and finite, got {}",
            dt
        )));
    }

    let mut series = RunSeries {
        problem_name: problem.name.clone(),
        integrator_name: cfg.integrator.name(),
        dt,
        dt_euler_initial,
        snapshot_steps: vec![0],
        snapshots: vec![u.clone()],
        records: Vec::with_capacity(cfg.steps),
    };

    for k in 1..=cfg.steps {
        if k > 1 && problem.is_state_dependent() {
            assembled = problem.assemble(&u)?;
        }
        let (next, report) = advance(&assembled, &u, dt, cfg, k)?;
        u = next;
        series.records.push(StepRecord { step: k, t: dt * k as f64, report });
        if k == cfg.steps || (cfg.snapshot_every > 0 && k % cfg.snapshot_every == 0) {
            series.snapshot_steps.push(k);
            series.snapshots.push(u.clone());
        }
    }
    Ok(series)
}

fn advance(
    assembled: &DiffusionProblem,
    u: &[f64],
    dt: f64,
    cfg: &RunConfig,
    step: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let at_step = |e: Error| match e {
        Error::Breakdown { row, reason } => Error::Breakdown {
            row,
            reason: format!("time step {}: {}", step, reason),
        },
        Error::NotPositiveDefinite(msg) => {
            Error::NotPositiveDefinite(format!("time step {}: {}", step, msg))
        }
        other => other,
    };
    match &cfg.integrator {
        Integrator::BePcgPc1 | Integrator::BePcgPc2 { .. } => {
            let a = assembled.be_system(dt)?;
            let pc = match &cfg.integrator {
                Integrator::BePcgPc2 { blocks } => {
                    build_pc2(&a, &uniform_blocks(a.n(), *blocks)?).map_err(at_step)?
                }
                _ => build_pc1(&a).map_err(at_step)?,
            };
            let kmax = if cfg.kmax == 0 { default_kmax(a.n()) } else { cfg.kmax };
            let (x, report) = pcg_solve(&a, u, u, &pc, cfg.tol, kmax).map_err(at_step)?;
            if !report.converged {
                return Err(Error::NotConverged { step, iterations: report.iterations });
            }
            Ok((x, report))
        }
        Integrator::Rkl2 { force_odd } => {
            let dt_euler = gershgorin_bound(&assembled.operator).dt_euler;
            let schedule = StsSchedule::for_ratio(dt, dt_euler, *force_odd)?;
            rkl2_step(&assembled.operator, u, dt, &schedule).map_err(at_step)
        }
        Integrator::Rkl2Fixed { stages } => {
            let schedule = StsSchedule::new(*stages)?;
            let dt_euler = gershgorin_bound(&assembled.operator).dt_euler;
            let s = *stages as f64;
            let covered = 0.25 * (s * s + s - 2.0) * dt_euler;
            if dt > covered * (1.0 + 1e-9) {
                return Err(Error::InvalidArgument(format!(
                    "{} stages cover steps up to {}, got {}",
                    stages, covered, dt
                )));
            }
            rkl2_step(&assembled.operator, u, dt, &schedule).map_err(at_step)
        }
        Integrator::Rkl2Subcycled { cycles } => {
            rkl2_subcycled(&assembled.operator, u, dt, *cycles).map_err(at_step)
        }
        Integrator::Euler { safety } => {
            let (x, sub_steps) = euler_subcycle(&assembled.operator, u, dt, *safety)?;
            Ok((x, SolveReport::stage_report(sub_steps)))
        }
        Integrator::Hybrid { fraction, safety } => {
            hybrid_euler_rkl2(&assembled.operator, u, dt, *fraction, *safety).map_err(at_step)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sts::rkl2_stages;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    #[test]
    fn every_preset_builds_and_assembles() {
        for name in PROBLEM_PRESETS {
            let p = preset_problem(name).unwrap();
            assert_eq!(p.name, *name);
            assert_eq!(p.u0.len(), p.grid.n_points(), "{name}");
            let assembled = p.assemble(&p.u0).unwrap();
            assert_eq!(assembled.n(), p.u0.len(), "{name}");
        }
    }

    #[test]
    fn unknown_preset_lists_the_catalog() {
        let err = preset_problem("no-such-problem").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("no-such-problem"), "{msg}");
        assert!(msg.contains("linear-1d"), "{msg}");
        assert!(msg.contains("tc-nonlinear-2d"), "{msg}");
    }

    #[test]
    fn integrator_names_round_trip() {
        for name in INTEGRATOR_NAMES {
            assert_eq!(Integrator::from_name(name).unwrap().name(), *name);
        }
        let msg = Integrator::from_name("bogus").unwrap_err().to_string();
        assert!(msg.contains("bogus") && msg.contains("rkl2-subcycled"), "{msg}");
    }

    #[test]
    fn zero_steps_echo_the_initial_state() {
        let p = preset_problem("linear-1d").unwrap();
        for name in INTEGRATOR_NAMES {
            let cfg = RunConfig {
                integrator: Integrator::from_name(name).unwrap(),
                steps: 0,
                ..RunConfig::default()
            };
            let series = run(&p, &cfg).unwrap();
            assert_eq!(series.snapshot_steps, vec![0]);
            assert_eq!(series.snapshots, vec![p.u0.clone()]);
            assert!(series.records.is_empty());
            assert_eq!(series.final_time(), 0.0);
            assert_eq!(series.final_state(), &p.u0[..]);
        }
    }

    #[test]
    fn dt_policies_coincide() {
        let p = preset_problem("linear-1d").unwrap();
        let by_ratio = run(
            &p,
            &RunConfig { dt: DtPolicy::RatioOfEuler(15.0), steps: 4, ..RunConfig::default() },
        )
        .unwrap();
        assert!(by_ratio.dt_euler_initial > 0.0 && by_ratio.dt_euler_initial.is_finite());
        assert_eq!(by_ratio.dt, 15.0 * by_ratio.dt_euler_initial);
        let fixed = run(
            &p,
            &RunConfig { dt: DtPolicy::Fixed(by_ratio.dt), steps: 4, ..RunConfig::default() },
        )
        .unwrap();
        assert_eq!(by_ratio.snapshots, fixed.snapshots);
        assert_eq!(by_ratio.records, fixed.records);
    }

    #[test]
    fn snapshot_cadence_always_brackets_the_run() {
        let p = preset_problem("linear-1d").unwrap();
        let cadence = RunConfig { steps: 5, snapshot_every: 2, ..RunConfig::default() };
        let series = run(&p, &cadence).unwrap();
        assert_eq!(series.snapshot_steps, vec![0, 2, 4, 5]);
        assert_eq!(series.snapshots.len(), 4);

        let endpoints = RunConfig { steps: 5, snapshot_every: 0, ..RunConfig::default() };
        let series = run(&p, &endpoints).unwrap();
        assert_eq!(series.snapshot_steps, vec![0, 5]);

        let aligned = RunConfig { steps: 6, snapshot_every: 3, ..RunConfig::default() };
        let series = run(&p, &aligned).unwrap();
        assert_eq!(series.snapshot_steps, vec![0, 3, 6]);
        assert_eq!(series.final_time(), series.dt * 6.0);
    }

    #[test]
    fn preconditioner_choice_does_not_change_the_answer() {
        let p = preset_problem("linear-1d").unwrap();
        let base = RunConfig {
            dt: DtPolicy::RatioOfEuler(50.0),
            steps: 10,
            tol: 1e-12,
            ..RunConfig::default()
        };
        let diagonal = run(&p, &RunConfig { integrator: Integrator::BePcgPc1, ..base.clone() })
            .unwrap();
        let blocked = run(
            &p,
            &RunConfig { integrator: Integrator::BePcgPc2 { blocks: 4 }, ..base },
        )
        .unwrap();
        let d = diff_norm(diagonal.final_state(), blocked.final_state());
        assert!(
            d <= 1e-8 * norm(&p.u0),
            "preconditioners disagree by {d:e}"
        );
    }

    #[test]
    fn no_flux_run_conserves_the_weighted_sum() {
        let p = preset_problem("linear-1d-neumann").unwrap();
        // The operator is the symmetrized form of the finite-volume
        // divergence, so the invariant carries square-root cell weights.
        let weights: Vec<f64> = p.grid.cell_widths(0).iter().map(|w| w.sqrt()).collect();
        let mass =
            |u: &[f64]| -> f64 { u.iter().zip(&weights).map(|(ui, wi)| ui * wi).sum() };
        let m0 = mass(&p.u0);
        assert!(m0 > 0.0);
        for integrator in [
            Integrator::BePcgPc1,
            Integrator::BePcgPc2 { blocks: 4 },
            Integrator::Rkl2 { force_odd: false },
            Integrator::Rkl2Subcycled { cycles: 4 },
            Integrator::Euler { safety: 0.9 },
            Integrator::Hybrid { fraction: 0.25, safety: 0.9 },
        ] {
            let name = integrator.name();
            let cfg = RunConfig {
                integrator,
                dt: DtPolicy::RatioOfEuler(20.0),
                steps: 5,
                tol: 1e-12,
                snapshot_every: 1,
                ..RunConfig::default()
            };
            let series = run(&p, &cfg).unwrap();
            for (step, u) in series.snapshot_steps.iter().zip(&series.snapshots) {
                let m = mass(u);
                assert!(
                    (m - m0).abs() <= 1e-10 * m0.abs(),
                    "{name}: weighted sum drifted to {m} from {m0} at step {step}"
                );
            }
        }
    }

    #[test]
    fn fixed_value_decay_is_monotone_in_the_max_norm() {
        let p = preset_problem("linear-1d").unwrap();
        for integrator in [Integrator::BePcgPc1, Integrator::Rkl2 { force_odd: false }] {
            let name = integrator.name();
            let cfg = RunConfig {
                integrator,
                dt: DtPolicy::RatioOfEuler(10.0),
                steps: 20,
                snapshot_every: 1,
                ..RunConfig::default()
            };
            let series = run(&p, &cfg).unwrap();
            let peaks: Vec<f64> = series.snapshots.iter().map(|u| max_abs(u)).collect();
            for w in peaks.windows(2) {
                assert!(
                    w[1] <= w[0] * (1.0 + 1e-12),
                    "{name}: peak rose from {} to {}",
                    w[0],
                    w[1]
                );
            }
            assert!(peaks.last().unwrap() < &(0.9 * peaks[0]), "{name}: no visible decay");
        }
    }

    #[test]
    fn work_tallies_add_up_across_a_run() {
        let p = preset_problem("linear-1d").unwrap();
        let steps = 6;

        let implicit = run(
            &p,
            &RunConfig {
                integrator: Integrator::BePcgPc1,
                dt: DtPolicy::RatioOfEuler(30.0),
                steps,
                ..RunConfig::default()
            },
        )
        .unwrap();
        let iters = implicit.total_iterations();
        assert!(iters > 0);
        assert_eq!(implicit.total_global_reductions(), 3 * iters);
        assert_eq!(implicit.total_local_exchanges(), iters + steps);

        let accelerated = run(
            &p,
            &RunConfig {
                integrator: Integrator::Rkl2 { force_odd: false },
                dt: DtPolicy::RatioOfEuler(30.0),
                steps,
                ..RunConfig::default()
            },
        )
        .unwrap();
        let s = rkl2_stages(accelerated.dt, accelerated.dt_euler_initial, false).unwrap();
        assert_eq!(accelerated.total_global_reductions(), 0);
        assert_eq!(accelerated.total_local_exchanges(), steps * s);
        assert_eq!(accelerated.total_iterations(), steps * s);

        let explicit = run(
            &p,
            &RunConfig {
                integrator: Integrator::Euler { safety: 0.9 },
                dt: DtPolicy::RatioOfEuler(4.0),
                steps,
                ..RunConfig::default()
            },
        )
        .unwrap();
        assert_eq!(explicit.total_global_reductions(), 0);
        assert_eq!(explicit.total_local_exchanges(), explicit.total_iterations());
    }

    #[test]
    fn fixed_stage_count_matches_the_auto_sized_schedule() {
        let p = preset_problem("linear-1d").unwrap();
        let base = RunConfig {
            dt: DtPolicy::RatioOfEuler(30.0),
            steps: 3,
            ..RunConfig::default()
        };
        let auto = run(
            &p,
            &RunConfig { integrator: Integrator::Rkl2 { force_odd: false }, ..base.clone() },
        )
        .unwrap();
        let s = rkl2_stages(auto.dt, auto.dt_euler_initial, false).unwrap();
        let fixed = run(
            &p,
            &RunConfig { integrator: Integrator::Rkl2Fixed { stages: s }, ..base.clone() },
        )
        .unwrap();
        assert_eq!(auto.snapshots, fixed.snapshots);

        let short = run(
            &p,
            &RunConfig { integrator: Integrator::Rkl2Fixed { stages: s - 1 }, ..base },
        );
        assert!(
            matches!(short, Err(Error::InvalidArgument(_))),
            "an uncovering stage count must be rejected, got {short:?}"
        );
    }

    #[test]
    fn lagged_coefficient_is_refreshed_every_step() {
        let p = preset_problem("tc-nonlinear-2d").unwrap();
        let cfg = RunConfig {
            integrator: Integrator::Rkl2 { force_odd: false },
            dt: DtPolicy::RatioOfEuler(10.0),
            steps: 3,
            ..RunConfig::default()
        };
        let lagged = run(&p, &cfg).unwrap();

        // Freezing the coefficient at its initial evaluation must give a
        // different trajectory once the state has moved.
        let (coeff, bhat) = match &p.kind {
            OperatorKind::LaggedConduction { coeff, bhat } => (coeff.clone(), bhat.clone()),
            _ => unreachable!(),
        };
        let frozen_kappa = lagged_diffusivity(&coeff, &p.u0).unwrap();
        let frozen = Problem {
            kind: OperatorKind::Plane { kappa: frozen_kappa, bhat },
            ..p.clone()
        };
        let frozen_series =
            run(&frozen, &RunConfig { dt: DtPolicy::Fixed(lagged.dt), ..cfg }).unwrap();
        let d = diff_norm(lagged.final_state(), frozen_series.final_state());
        assert!(
            d > 1e-8 * norm(lagged.final_state()),
            "coefficient refresh left no trace (diff {d:e})"
        );
    }

    #[test]
    fn implicit_and_accelerated_agree_on_the_conduction_problem() {
        let p = preset_problem("tc-nonlinear-2d").unwrap();
        let base = RunConfig {
            dt: DtPolicy::RatioOfEuler(20.0),
            steps: 5,
            tol: 1e-10,
            ..RunConfig::default()
        };
        let accelerated = run(
            &p,
            &RunConfig { integrator: Integrator::Rkl2 { force_odd: false }, ..base.clone() },
        )
        .unwrap();
        let implicit = run(
            &p,
            &RunConfig { integrator: Integrator::BePcgPc2 { blocks: 4 }, ..base },
        )
        .unwrap();
        let rel = diff_norm(accelerated.final_state(), implicit.final_state())
            / norm(implicit.final_state());
        assert!(rel < 0.05, "schemes diverged: relative difference {rel}");
    }

    #[test]
    fn nonconvergence_carries_the_step_index() {
        let p = preset_problem("linear-1d").unwrap();
        let cfg = RunConfig {
            integrator: Integrator::BePcgPc1,
            dt: DtPolicy::RatioOfEuler(200.0),
            steps: 3,
            tol: 1e-14,
            kmax: 2,
            ..RunConfig::default()
        };
        match run(&p, &cfg) {
            Err(Error::NotConverged { step, iterations }) => {
                assert_eq!(step, 1);
                assert_eq!(iterations, 2);
            }
            other => panic!("expected a non-convergence failure, got {other:?}"),
        }
    }

    #[test]
    fn no_flux_boundary_is_rejected_in_two_dimensions() {
        let mut p = preset_problem("aniso-2d-tilted").unwrap();
        p.boundary = BoundaryKind::Neumann;
        let err = run(&p, &RunConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)), "{err:?}");
    }

    #[test]
    fn state_length_is_validated() {
        let mut p = preset_problem("linear-1d").unwrap();
        p.u0.pop();
        let err = run(&p, &RunConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)), "{err:?}");
    }
}
