//! Bound-constrained solvers for `min f(x)` subject to `x >= 0`.

mod config;
mod lbfgsb;
pub mod search;
mod spg;
mod trace;
mod tron;

pub use config::{
    CauchyParams, CauchyVariant, CgSettings, LbfgsParams, SolverConfig, SpgParams, SubspaceVariant,
    TrustRegionParams, WolfeParams,
};
pub use lbfgsb::solve_lbfgsb;
pub use search::{binding_set, pg_norm, project};
pub use spg::solve_spg;
pub use trace::{SolveResult, SolveStatus, SolverTrace, StepKind, TraceRecord, TRACE_HEADER};
pub use tron::{solve_tron, DEFAULT_CG_RTOL};
