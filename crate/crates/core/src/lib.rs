//! Pseudo-spectral solver for the incompressible Navier-Stokes and
//! Boussinesq equations on periodic boxes, with explicit Runge-Kutta time
//! stepping, embedded-pair step-size control and work-precision tooling.
//!
//! Fields live in spectral space in real-to-complex layout: the first axis
//! stores wavenumbers `0..=N/2`, the other axes the full range in FFT order.
//! Physical arrays index the first axis fastest.

// NaN must fail positivity checks, so `!(x > 0.0)` is intended.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod config;
pub mod control;
pub mod diagnostics;
pub mod driver;
pub mod error;
pub mod field;
pub mod grid;
pub mod integrate;
pub mod physics;
pub mod problems;
pub mod spectral;
pub mod tableau;
pub mod transform;
pub mod workprec;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, RngState};
pub use config::{
    parse_config, parse_config_with, ControllerSettings, Method, Overrides, RunConfig, StepMode,
};
pub use control::{
    adaptive_advance, error_norm, propose_step, scale_vector, AdvanceOutcome, ControllerConfig,
    ControllerState, ErrorMeasure, ScaleVector,
};
pub use diagnostics::{
    compare_series, dissipation_rate, energy_spectrum, field_error_norms, kinetic_energy,
    DiagnosticsRecord, SpectrumRecord,
};
pub use driver::{resume_simulation, run_simulation, RunOutput, Simulation};
pub use error::{Error, Result};
pub use field::SpectralField;
pub use grid::{GridSpec, WavenumberField};
pub use integrate::{ab2_step, rk_step, StateVector, StepOutcome};
pub use physics::{
    apply_forcing, boussinesq_rhs, leray_project, ns_rhs, Fields, FlowState, ForcingOutcome,
    PhysParams, RhsEvaluator,
};
pub use problems::{
    hit_init, rayleigh_taylor_grid, rayleigh_taylor_init, taylor_green_init, HitParams,
    ProblemKind, ProblemSpec, RtParams,
};
pub use spectral::{curl, dealiased_product, Dealiaser};
pub use tableau::{verify_order_conditions, ButcherPair, OrderResiduals};
pub use transform::{forward_transform, inverse_transform, Transformer};
pub use workprec::{
    parse_matrix, work_precision, write_report, BenchMatrix, Setting, WorkPrecisionPoint,
};
