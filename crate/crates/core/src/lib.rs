//! Stiff-diffusion time integration laboratory.
//!
//! Compares implicit backward-Euler steps solved by preconditioned
//! conjugate gradients against explicit super time-stepping on structured
//! diffusion problems, with stability bounds, amplification-factor
//! analysis, and a communication cost model for both schemes.

pub mod analysis;
pub mod commsim;
pub mod config;
pub mod driver;
pub mod error;
pub mod krylov;
pub mod mesh;
pub mod operators;
pub mod precond;
mod rng;
pub mod sparse;
pub mod stability;
pub mod sts;

pub use analysis::{
    amp_be, amp_euler, amp_exact, amp_rkl2, mode_z, speedup_estimate, AmplificationCurve,
};
pub use commsim::{preset_topologies, simulate, sweep_topologies, CostModel, ScalingReport};
pub use driver::{
    preset_problem, run, DtPolicy, Integrator, OperatorKind, Problem, RunConfig, RunSeries,
};
pub use error::{Error, Result};
pub use krylov::{pcg_solve, residual_norm, SolveReport};
pub use mesh::{Decomposition, NonuniformGrid};
pub use operators::{
    assemble_aniso_2d, assemble_diffusion_1d, be_system, lagged_diffusivity, BoundaryKind,
    DiffusionProblem, TemperatureCoefficient,
};
pub use precond::{build_pc1, build_pc2, Preconditioner};
pub use sparse::{CsrMatrix, DiaMatrix, SparseMatrix};
pub use stability::{gershgorin_bound, ktilde_bound, power_iteration, StabilityBound};
pub use sts::{
    euler_subcycle, hybrid_euler_rkl2, rkl2_stages, rkl2_step, rkl2_subcycled, StsSchedule,
};
