//! Command-line front end: each subcommand runs one experiment and writes
//! CSV artifacts stamped with a hash of the effective configuration, so
//! identical invocations produce byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use stiffstep::analysis::{speedup_table, AmplificationCurve, PANEL_RATIOS};
use stiffstep::commsim::{self, CostModel, SCALING_GRID};
use stiffstep::config::Config;
use stiffstep::driver::{self, DtPolicy, Integrator, RunConfig};
use stiffstep::stability::{gershgorin_bound, ktilde_bound, power_iteration};

#[derive(Parser)]
#[command(
    name = "stiffstep",
    version,
    about = "Stiff-diffusion integration experiments emitting plot-ready CSV files"
)]
struct Cli {
    /// Key=value config file overlaid onto the built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if absent. Falls back to $STIFFSTEP_OUT,
    /// then the current directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the communication model's jitter stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Temporal-order study: halve the step repeatedly and report errors
    /// between successive refinements with the observed order.
    Converge {
        /// Integration scheme to study.
        #[arg(long)]
        scheme: Option<String>,
        /// Problem preset to integrate.
        #[arg(long)]
        preset: Option<String>,
        /// Coarsest step as a multiple of the explicit limit.
        #[arg(long)]
        dt_ratio: Option<f64>,
        /// Step count of the coarsest run.
        #[arg(long)]
        steps: Option<usize>,
        /// Number of halvings.
        #[arg(long)]
        levels: Option<usize>,
        /// Inner solver tolerance for implicit schemes.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Explicit step-limit estimates for a preset problem: row-sum bound,
    /// spacing-based bound, and the power-iteration reference.
    Stability {
        #[arg(long)]
        preset: Option<String>,
    },
    /// Per-mode amplification-factor curves, one CSV per step-size ratio.
    Amp {
        /// Step-size ratios (comma separated); defaults to the standard
        /// four-panel set.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        ratios: Vec<f64>,
    },
    /// Stage count and idealized speedup over a log-spaced ratio grid.
    Speedup {
        /// Largest step-size ratio in the table.
        #[arg(long)]
        max_ratio: Option<f64>,
        /// Number of table rows.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Integrate a preset problem and write snapshots, per-step work
    /// records, and a key=value manifest.
    Run {
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        scheme: Option<String>,
        /// Block count for the blocked preconditioner.
        #[arg(long)]
        blocks: Option<usize>,
        /// Step size as a multiple of the explicit limit.
        #[arg(long)]
        dt_ratio: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Inner solver tolerance for implicit schemes.
        #[arg(long)]
        tol: Option<f64>,
        /// Record the state every this many steps (0: endpoints only).
        #[arg(long)]
        snapshot_every: Option<usize>,
    },
    /// Communication cost sweep over a machine's processor topologies.
    ScaleSim {
        /// Topology list preset.
        #[arg(long)]
        preset: Option<String>,
    },
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let out_dir = resolve_out_dir(&cli)?;
    let mut eff = match &cli.config {
        Some(path) => Config::from_file(path)
            .with_context(|| format!("reading config {}", path.display()))?,
        None => Config::new(),
    };
    if let Some(seed) = cli.seed {
        eff.set("cost", "seed", &seed.to_string());
    }
    match &cli.command {
        Command::Converge { scheme, preset, dt_ratio, steps, levels, tol } => cmd_converge(
            &mut eff,
            &out_dir,
            scheme.as_deref(),
            preset.as_deref(),
            *dt_ratio,
            *steps,
            *levels,
            *tol,
        ),
        Command::Stability { preset } => cmd_stability(&mut eff, &out_dir, preset.as_deref()),
        Command::Amp { ratios } => cmd_amp(&mut eff, &out_dir, ratios),
        Command::Speedup { max_ratio, samples } => {
            cmd_speedup(&mut eff, &out_dir, *max_ratio, *samples)
        }
        Command::Run { preset, scheme, blocks, dt_ratio, steps, tol, snapshot_every } => cmd_run(
            &mut eff,
            &out_dir,
            preset.as_deref(),
            scheme.as_deref(),
            *blocks,
            *dt_ratio,
            *steps,
            *tol,
            *snapshot_every,
        ),
        Command::ScaleSim { preset } => cmd_scale_sim(&mut eff, &out_dir, preset.as_deref()),
    }
}

fn resolve_out_dir(cli: &Cli) -> anyhow::Result<PathBuf> {
    let dir = cli
        .out
        .clone()
        .or_else(|| std::env::var_os("STIFFSTEP_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}

/// Flag value if given, else the config entry, else the built-in default.
/// The resolved value is written back so the config hash reflects it.
fn resolve_str(
    eff: &mut Config,
    section: &str,
    key: &str,
    flag: Option<&str>,
    default: &str,
) -> String {
    let value = flag
        .map(str::to_string)
        .or_else(|| eff.get(section, key).map(str::to_string))
        .unwrap_or_else(|| default.to_string());
    eff.set(section, key, &value);
    value
}

fn resolve_f64(
    eff: &mut Config,
    section: &str,
    key: &str,
    flag: Option<f64>,
    default: f64,
) -> anyhow::Result<f64> {
    let value = match flag {
        Some(v) => v,
        None => eff.get_f64(section, key)?.unwrap_or(default),
    };
    eff.set(section, key, &format!("{value}"));
    Ok(value)
}

fn resolve_usize(
    eff: &mut Config,
    section: &str,
    key: &str,
    flag: Option<usize>,
    default: usize,
) -> anyhow::Result<usize> {
    let value = match flag {
        Some(v) => v,
        None => eff.get_usize(section, key)?.unwrap_or(default),
    };
    eff.set(section, key, &value.to_string());
    Ok(value)
}

fn write_artifact(dir: &Path, name: &str, content: &str) -> anyhow::Result<()> {
    let path = dir.join(name);
    fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn hash_line(eff: &Config) -> String {
    format!("# config_hash={}\n", eff.hash())
}

/// Scheme-specific knobs shared by the run and convergence commands.
fn build_integrator(eff: &mut Config, section: &str, name: &str, blocks: Option<usize>)
    -> anyhow::Result<Integrator> {
    let mut integrator = Integrator::from_name(name)?;
    match &mut integrator {
        Integrator::BePcgPc2 { blocks: b } => {
            *b = resolve_usize(eff, section, "blocks", blocks, 4)?;
        }
        Integrator::Rkl2Subcycled { cycles } => {
            *cycles = resolve_usize(eff, section, "cycles", None, 10)?;
        }
        Integrator::Euler { safety } => {
            *safety = resolve_f64(eff, section, "safety", None, 0.9)?;
        }
        Integrator::Hybrid { fraction, safety } => {
            *fraction = resolve_f64(eff, section, "fraction", None, 0.25)?;
            *safety = resolve_f64(eff, section, "safety", None, 0.9)?;
        }
        _ => {}
    }
    Ok(integrator)
}

#[allow(clippy::too_many_arguments)]
fn cmd_converge(
    eff: &mut Config,
    out_dir: &Path,
    scheme: Option<&str>,
    preset: Option<&str>,
    dt_ratio: Option<f64>,
    steps: Option<usize>,
    levels: Option<usize>,
    tol: Option<f64>,
) -> anyhow::Result<()> {
    eff.set("cli", "command", "converge");
    let scheme = resolve_str(eff, "converge", "scheme", scheme, "rkl2");
    let preset = resolve_str(eff, "converge", "preset", preset, "linear-1d");
    let dt_ratio = resolve_f64(eff, "converge", "dt_ratio", dt_ratio, 10.0)?;
    let base_steps = resolve_usize(eff, "converge", "steps", steps, 8)?;
    let levels = resolve_usize(eff, "converge", "levels", levels, 5)?;
    let tol = resolve_f64(eff, "converge", "tol", tol, 1e-12)?;
    if !(dt_ratio > 0.0) || base_steps == 0 {
        bail!("convergence study needs a positive coarsest ratio and step count");
    }
    if levels < 2 {
        bail!("convergence study needs at least 2 halvings, got {levels}");
    }
    // For the accelerated scheme the stage schedule is frozen at the
    // coarsest level's count: re-sizing it per level would change the error
    // constant between refinements and hide the temporal order.
    let integrator = if scheme == "rkl2" {
        let stages = stiffstep::rkl2_stages(dt_ratio, 1.0, false)?;
        eff.set("converge", "stages", &stages.to_string());
        Integrator::Rkl2Fixed { stages }
    } else {
        build_integrator(eff, "converge", &scheme, None)?
    };

    let problem = driver::preset_problem(&preset)?;
    let u0_norm = l2(&problem.u0);
    // One run per refinement level plus one finer reference partner; the
    // error at a level is its distance to the next refinement, so the
    // shared horizon base_steps * dt stays fixed.
    let mut finals: Vec<(f64, usize, Vec<f64>)> = Vec::with_capacity(levels + 1);
    for level in 0..=levels {
        let factor = (1u64 << level) as f64;
        let cfg = RunConfig {
            integrator: integrator.clone(),
            dt: DtPolicy::RatioOfEuler(dt_ratio / factor),
            steps: base_steps << level,
            tol,
            ..RunConfig::default()
        };
        let series = driver::run(&problem, &cfg)?;
        finals.push((series.dt, cfg.steps, series.final_state().to_vec()));
    }

    let mut csv = hash_line(eff);
    csv.push_str("level,dt,steps,error,order\n");
    let mut prev_error: Option<f64> = None;
    for level in 0..levels {
        let (dt, steps, ref state) = finals[level];
        let error = diff_l2(state, &finals[level + 1].2) / u0_norm;
        let order = match prev_error {
            Some(p) if error > 0.0 => format!("{}", (p / error).log2()),
            _ => String::new(),
        };
        csv.push_str(&format!("{level},{dt},{steps},{error},{order}\n"));
        prev_error = Some(error);
    }
    write_artifact(out_dir, &format!("converge_{preset}_{scheme}.csv"), &csv)
}

fn cmd_stability(eff: &mut Config, out_dir: &Path, preset: Option<&str>) -> anyhow::Result<()> {
    eff.set("cli", "command", "stability");
    let preset = resolve_str(eff, "stability", "preset", preset, "mas-corona-1d");
    let problem = driver::preset_problem(&preset)?;
    let assembled = problem.assemble(&problem.u0)?;

    let gersh = gershgorin_bound(&assembled.operator);
    let alpha_max = assembled.diffusivity.iter().cloned().fold(0.0f64, f64::max);
    let ktilde = ktilde_bound(&problem.grid, alpha_max)?;
    let power = power_iteration(&assembled.operator, 1e-12, 50_000)?.bound();

    let mut csv = hash_line(eff);
    csv.push_str("method,lambda_bound,dt_euler\n");
    for b in [&gersh, &ktilde, &power] {
        csv.push_str(&format!(
            "{},{},{}\n",
            b.method.name(),
            b.lambda_max_bound,
            b.dt_euler
        ));
    }
    print!("{csv}");
    write_artifact(out_dir, &format!("stability_{preset}.csv"), &csv)
}

fn cmd_amp(eff: &mut Config, out_dir: &Path, ratios: &[f64]) -> anyhow::Result<()> {
    eff.set("cli", "command", "amp");
    let ratios: Vec<f64> = if !ratios.is_empty() {
        ratios.to_vec()
    } else if let Some(text) = eff.get("amp", "ratios") {
        text.split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("parsing amp ratios '{text}'"))?
    } else {
        PANEL_RATIOS.to_vec()
    };
    for r in &ratios {
        if !(*r > 0.0) || !r.is_finite() {
            bail!("amplification ratio must be positive and finite, got {r}");
        }
    }
    let listed: Vec<String> = ratios.iter().map(|r| format!("{r}")).collect();
    eff.set("amp", "ratios", &listed.join(","));

    for r in &ratios {
        let curve = AmplificationCurve::sample(*r)?;
        let csv = format!("{}{}", hash_line(eff), curve.to_csv());
        write_artifact(out_dir, &format!("amp_ratio_{r}.csv"), &csv)?;
    }
    Ok(())
}

fn cmd_speedup(
    eff: &mut Config,
    out_dir: &Path,
    max_ratio: Option<f64>,
    samples: Option<usize>,
) -> anyhow::Result<()> {
    eff.set("cli", "command", "speedup");
    let max_ratio = resolve_f64(eff, "speedup", "max_ratio", max_ratio, 1000.0)?;
    let samples = resolve_usize(eff, "speedup", "samples", samples, 256)?;
    let rows = speedup_table(max_ratio, samples)?;
    let mut csv = hash_line(eff);
    csv.push_str("ratio,stages,speedup\n");
    for row in &rows {
        csv.push_str(&format!("{},{},{}\n", row.ratio, row.stages, row.speedup));
    }
    write_artifact(out_dir, "speedup.csv", &csv)
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    eff: &mut Config,
    out_dir: &Path,
    preset: Option<&str>,
    scheme: Option<&str>,
    blocks: Option<usize>,
    dt_ratio: Option<f64>,
    steps: Option<usize>,
    tol: Option<f64>,
    snapshot_every: Option<usize>,
) -> anyhow::Result<()> {
    eff.set("cli", "command", "run");
    let preset = resolve_str(eff, "run", "preset", preset, "linear-1d");
    let scheme = resolve_str(eff, "run", "scheme", scheme, "be-pcg-pc1");
    let dt_ratio = resolve_f64(eff, "run", "dt_ratio", dt_ratio, 10.0)?;
    let steps = resolve_usize(eff, "run", "steps", steps, 10)?;
    let tol = resolve_f64(eff, "run", "tol", tol, 1e-10)?;
    let snapshot_every = resolve_usize(eff, "run", "snapshot_every", snapshot_every, 1)?;
    let kmax = resolve_usize(eff, "run", "kmax", None, 0)?;
    let integrator = build_integrator(eff, "run", &scheme, blocks)?;

    let problem = driver::preset_problem(&preset)?;
    let cfg = RunConfig { integrator, dt: DtPolicy::RatioOfEuler(dt_ratio), steps, tol, kmax,
        snapshot_every };
    let series = driver::run(&problem, &cfg)?;

    let stem = format!("run_{preset}_{scheme}");
    write_artifact(out_dir, &format!("{stem}_snapshots.csv"), &snapshots_csv(eff, &problem, &series))?;
    write_artifact(out_dir, &format!("{stem}_steps.csv"), &steps_csv(eff, &series))?;
    let manifest = manifest_text(eff, &cfg, &series);
    print!("{manifest}");
    write_artifact(out_dir, &format!("{stem}_manifest.txt"), &manifest)
}

fn snapshots_csv(eff: &Config, problem: &driver::Problem, series: &driver::RunSeries) -> String {
    let mut out = hash_line(eff);
    if problem.grid.ndim() == 1 {
        let xs = problem.grid.node_positions(0);
        out.push_str("step,t,x,u\n");
        for (step, state) in series.snapshot_steps.iter().zip(&series.snapshots) {
            let t = series.dt * *step as f64;
            for (x, u) in xs.iter().zip(state) {
                out.push_str(&format!("{step},{t},{x},{u}\n"));
            }
        }
    } else {
        let xs = problem.grid.node_positions(0);
        let ys = problem.grid.node_positions(1);
        out.push_str("step,t,x,y,u\n");
        for (step, state) in series.snapshot_steps.iter().zip(&series.snapshots) {
            let t = series.dt * *step as f64;
            for (j, y) in ys.iter().enumerate() {
                for (i, x) in xs.iter().enumerate() {
                    out.push_str(&format!("{step},{t},{x},{y},{}\n", state[j * xs.len() + i]));
                }
            }
        }
    }
    out
}

fn steps_csv(eff: &Config, series: &driver::RunSeries) -> String {
    let mut out = hash_line(eff);
    out.push_str("step,t,iterations,local_exchanges,global_reductions,rel_residual\n");
    for rec in &series.records {
        let h = &rec.report.residual_history;
        let rel = match (h.first(), h.last()) {
            (Some(first), Some(last)) if *first > 0.0 => format!("{}", (last / first).sqrt()),
            _ => String::new(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            rec.step,
            rec.t,
            rec.report.iterations,
            rec.report.local_exchanges,
            rec.report.global_reductions,
            rel
        ));
    }
    out
}

fn manifest_text(eff: &Config, cfg: &RunConfig, series: &driver::RunSeries) -> String {
    let mut pairs: Vec<(String, String)> = vec![
        ("config_hash".into(), eff.hash()),
        ("dt".into(), format!("{}", series.dt)),
        ("dt_euler_initial".into(), format!("{}", series.dt_euler_initial)),
        ("final_time".into(), format!("{}", series.final_time())),
        ("integrator".into(), series.integrator_name.to_string()),
        ("preset".into(), series.problem_name.clone()),
        ("snapshots".into(), series.snapshots.len().to_string()),
        ("steps".into(), cfg.steps.to_string()),
        ("tol".into(), format!("{}", cfg.tol)),
        ("total_global_reductions".into(), series.total_global_reductions().to_string()),
        ("total_iterations".into(), series.total_iterations().to_string()),
        ("total_local_exchanges".into(), series.total_local_exchanges().to_string()),
    ];
    pairs.sort();
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(&format!("{k}={v}\n"));
    }
    out
}

fn cmd_scale_sim(eff: &mut Config, out_dir: &Path, preset: Option<&str>) -> anyhow::Result<()> {
    eff.set("cli", "command", "scale-sim");
    let preset = resolve_str(eff, "scale-sim", "preset", preset, "comet");
    let pcg_iterations = resolve_usize(eff, "scale-sim", "pcg_iterations", None, 20)?;
    let rkl2_stages = resolve_usize(eff, "scale-sim", "rkl2_stages", None, 21)?;

    let defaults = CostModel::default();
    let model = CostModel {
        compute_per_point: resolve_f64(eff, "cost", "compute_per_point", None,
            defaults.compute_per_point)?,
        local_latency: resolve_f64(eff, "cost", "local_latency", None, defaults.local_latency)?,
        surface_cost_per_point: resolve_f64(eff, "cost", "surface_cost_per_point", None,
            defaults.surface_cost_per_point)?,
        global_latency: resolve_f64(eff, "cost", "global_latency", None, defaults.global_latency)?,
        jitter_amplitude: resolve_f64(eff, "cost", "jitter_amplitude", None,
            defaults.jitter_amplitude)?,
        seed: {
            let seed = eff.get_u64("cost", "seed")?.unwrap_or(defaults.seed);
            eff.set("cost", "seed", &seed.to_string());
            seed
        },
    };

    let topologies = commsim::preset_topologies(&preset)?;
    let profiles = vec![
        ("pcg".to_string(), commsim::synthetic_pcg_report(pcg_iterations)),
        ("rkl2".to_string(), stiffstep::SolveReport::stage_report(rkl2_stages)),
    ];
    let rows = commsim::sweep_topologies(&SCALING_GRID, &topologies, &profiles, &model)?;
    let csv = format!("{}{}", hash_line(eff), commsim::sweep_csv(&rows));
    write_artifact(out_dir, &format!("scale_sim_{preset}.csv"), &csv)
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn diff_l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
