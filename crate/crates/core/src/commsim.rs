//! Deterministic virtual-cluster cost model.
//!
//! Replays a solve's communication tallies on a block-decomposed grid and
//! models how each event class spends wall time: compute intervals scale with
//! a rank's point count, halo exchanges synchronize only face neighbors, and
//! reductions act as a barrier across every rank — so any load imbalance
//! encountered before a reduction is paid by all ranks.  No real message
//! passing happens; the whole model is sequential and reproducible.

use crate::error::{Error, Result};
use crate::krylov::SolveReport;
use crate::mesh::{decompose, Decomposition};
use crate::rng::unit_from;

/// Production-style scaling grid used by the built-in topology presets.
pub const SCALING_GRID: [usize; 3] = [181, 251, 602];

/// Named topology lists accepted by [`preset_topologies`].
pub const TOPOLOGY_PRESETS: &[&str] = &["comet", "stampede"];

/// Built-in processor-topology sweeps (one row per machine allocation size).
pub fn preset_topologies(name: &str) -> Result<Vec<Vec<usize>>> {
    let table: &[[usize; 3]] = match name {
        "comet" => &[
            [2, 3, 4],
            [2, 4, 6],
            [3, 4, 8],
            [4, 6, 9],
            [6, 8, 9],
            [6, 8, 18],
            [6, 12, 24],
        ],
        "stampede" => &[
            [2, 4, 8],
            [4, 4, 8],
            [4, 8, 8],
            [4, 8, 16],
            [8, 8, 16],
            [8, 16, 16],
            [8, 16, 32],
        ],
        _ => {
            return Err(Error::UnknownPreset {
                name: name.to_string(),
                available: TOPOLOGY_PRESETS.join(", "),
            })
        }
    };
    Ok(table.iter().map(|t| t.to_vec()).collect())
}

/// Time-unit knobs for the virtual cluster.
///
/// Compute cost accrues once per local-exchange interval (each halo exchange
/// is preceded by one sweep over the rank's points).  Jitter is a
/// multiplicative perturbation of each compute interval, drawn reproducibly
/// from `(seed, rank, interval)`.
#[derive(Debug, Clone)]
pub struct CostModel {
    /// Compute time per grid point per local-event interval.
    pub compute_per_point: f64,
    /// Fixed cost of one halo exchange.
    pub local_latency: f64,
    /// Per-surface-point cost of one halo exchange.
    pub surface_cost_per_point: f64,
    /// Fixed cost of one all-rank reduction.
    pub global_latency: f64,
    /// Relative half-width of the compute perturbation, in [0, 1).
    pub jitter_amplitude: f64,
    /// Seed for the jitter sequence.
    pub seed: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            compute_per_point: 1e-6,
            local_latency: 2e-5,
            surface_cost_per_point: 1e-8,
            global_latency: 2e-3,
            jitter_amplitude: 0.02,
            seed: 7,
        }
    }
}

impl CostModel {
    fn validate(&self) -> Result<()> {
        let costs = [
            ("compute_per_point", self.compute_per_point),
            ("local_latency", self.local_latency),
            ("surface_cost_per_point", self.surface_cost_per_point),
            ("global_latency", self.global_latency),
        ];
        for (name, v) in costs {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "cost model {name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.jitter_amplitude) {
            return Err(Error::InvalidArgument(format!(
                "jitter amplitude must lie in [0, 1), got {}",
                self.jitter_amplitude
            )));
        }
        Ok(())
    }

    fn jitter(&self, rank: usize, interval: usize) -> f64 {
        if self.jitter_amplitude == 0.0 {
            return 0.0;
        }
        let u = unit_from(&[self.seed, rank as u64, interval as u64]);
        self.jitter_amplitude * (2.0 * u - 1.0)
    }
}

/// Modeled wall-time decomposition for one (tallies, decomposition) pair,
/// reported along the critical rank (the last one to finish).
///
/// `total_time` is defined as the sum of the three components, so the
/// decomposition identity holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub ranks: usize,
    pub total_time: f64,
    pub compute_time: f64,
    pub local_time: f64,
    pub global_time: f64,
    /// Parallel efficiency relative to a reference row; 1.0 for a standalone
    /// simulation (filled in by [`sweep_topologies`] relative to the smallest
    /// topology of the sweep).
    pub efficiency: f64,
}

/// Replay a solve's tallies on a decomposed grid under a cost model.
///
/// The event schedule is reconstructed from the tallies: any local exchanges
/// beyond one-per-iteration run first (setup work), then each iteration runs
/// one local exchange followed by its share of the global reductions.  With a
/// single rank every exchange and reduction is a no-op, so non-compute time
/// is exactly zero.
pub fn simulate(report: &SolveReport, d: &Decomposition, c: &CostModel) -> Result<ScalingReport> {
    c.validate()?;
    let n = d.rank_count();
    if n == 0 {
        return Err(Error::InvalidArgument("decomposition has no ranks".into()));
    }
    let points: Vec<f64> = (0..n).map(|r| d.points(r) as f64).collect();
    let neighbors: Vec<Vec<usize>> = (0..n).map(|r| d.neighbors(r)).collect();
    let surface: Vec<f64> = (0..n).map(|r| d.surface_points(r) as f64).collect();

    let iterations = report.iterations;
    let setup_locals = report.local_exchanges.saturating_sub(iterations);
    let globals_before = |k: usize| {
        if iterations == 0 {
            0
        } else {
            report.global_reductions * k / iterations
        }
    };

    let mut clock = vec![0.0f64; n];
    let mut compute = vec![0.0f64; n];
    let mut local = vec![0.0f64; n];
    let mut global = vec![0.0f64; n];
    let mut interval = 0usize;

    let local_event = |clock: &mut Vec<f64>,
                           compute: &mut Vec<f64>,
                           local: &mut Vec<f64>,
                           interval: &mut usize| {
        for r in 0..n {
            let w = points[r] * c.compute_per_point * (1.0 + c.jitter(r, *interval));
            clock[r] += w;
            compute[r] += w;
        }
        *interval += 1;
        if n > 1 {
            let before = clock.clone();
            for r in 0..n {
                let mut m = before[r];
                for &q in &neighbors[r] {
                    m = m.max(before[q]);
                }
                let add =
                    (m - before[r]) + c.local_latency + surface[r] * c.surface_cost_per_point;
                local[r] += add;
                clock[r] = before[r] + add;
            }
        }
    };
    let global_event = |clock: &mut Vec<f64>, global: &mut Vec<f64>| {
        if n > 1 {
            let m = clock.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for r in 0..n {
                global[r] += (m - clock[r]) + c.global_latency;
                clock[r] = m + c.global_latency;
            }
        }
    };

    for _ in 0..setup_locals {
        local_event(&mut clock, &mut compute, &mut local, &mut interval);
    }
    for k in 0..iterations {
        local_event(&mut clock, &mut compute, &mut local, &mut interval);
        for _ in globals_before(k)..globals_before(k + 1) {
            global_event(&mut clock, &mut global);
        }
    }

    let mut crit = 0;
    for r in 1..n {
        if clock[r] > clock[crit] {
            crit = r;
        }
    }
    Ok(ScalingReport {
        ranks: n,
        total_time: compute[crit] + local[crit] + global[crit],
        compute_time: compute[crit],
        local_time: local[crit],
        global_time: global[crit],
        efficiency: 1.0,
    })
}

/// Synthetic per-iteration tallies of the implicit solver: one setup exchange
/// plus, per iteration, one halo exchange and three all-rank reductions.
pub fn synthetic_pcg_report(iterations: usize) -> SolveReport {
    SolveReport {
        iterations,
        residual_history: Vec::new(),
        converged: true,
        local_exchanges: iterations + 1,
        global_reductions: 3 * iterations,
    }
}

/// One row of a topology sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub profile: String,
    pub topology: Vec<usize>,
    pub cores: usize,
    pub imbalance: f64,
    pub report: ScalingReport,
}

/// Run every (profile, topology) pair and fill in parallel efficiency
/// relative to the smallest topology of the sweep (per profile):
/// `eff = (T_ref * N_ref) / (T * N)`.
pub fn sweep_topologies(
    grid_sizes: &[usize],
    topologies: &[Vec<usize>],
    profiles: &[(String, SolveReport)],
    c: &CostModel,
) -> Result<Vec<SweepRow>> {
    if topologies.is_empty() {
        return Err(Error::InvalidArgument("no topologies to sweep".into()));
    }
    let mut rows = Vec::with_capacity(topologies.len() * profiles.len());
    for (name, report) in profiles {
        let mut first: Option<(f64, f64)> = None;
        let mut best_ranks = usize::MAX;
        // Reference row: smallest rank count in the list (first on ties).
        for topo in topologies {
            let d = decompose(grid_sizes, topo)?;
            if d.rank_count() < best_ranks {
                best_ranks = d.rank_count();
            }
        }
        for topo in topologies {
            let d = decompose(grid_sizes, topo)?;
            let mut rep = simulate(report, &d, c)?;
            let work = rep.total_time * d.rank_count() as f64;
            if first.is_none() && d.rank_count() == best_ranks {
                first = Some((rep.total_time, d.rank_count() as f64));
            }
            if let Some((t0, n0)) = first {
                rep.efficiency = t0 * n0 / work;
            }
            rows.push(SweepRow {
                profile: name.clone(),
                topology: topo.clone(),
                cores: d.rank_count(),
                imbalance: d.max_load_imbalance(),
                report: rep,
            });
        }
        // A reference later in the list than some rows: rescale those rows.
        if let Some((t0, n0)) = first {
            for row in rows.iter_mut().filter(|r| &r.profile == name) {
                row.report.efficiency =
                    t0 * n0 / (row.report.total_time * row.cores as f64);
            }
        }
    }
    Ok(rows)
}

/// Fixed-column CSV for a sweep: `cores,profile,compute_t,local_t,global_t,efficiency`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("cores,profile,compute_t,local_t,global_t,efficiency\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.cores,
            r.profile,
            r.report.compute_time,
            r.report.local_time,
            r.report.global_time,
            r.report.efficiency
        ));
    }
    out
}
