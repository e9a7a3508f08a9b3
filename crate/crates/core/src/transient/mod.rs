//! Cycle-counting executor layered on the architectural ISA: transactions,
//! fault-triggered transient windows with rollback, the flag-revert stall
//! seen by dependent conditional jumps, a virtual time-stamp counter and
//! seeded measurement noise.

mod config;
mod pipeline;
mod sim;
#[cfg(test)]
mod tests;

use thiserror::Error;

use crate::isa::{AsmError, IsaError};

pub use config::{flatten_toml, BaseLatency, MicroConfig, NoiseKind, NoiseModel, Suppression};
pub use pipeline::{jcc_cost, rdtsc, PendingRevert, PipelineState, Transaction};
pub use sim::{
    execute, run, transient_execute, write_trace_csv, Outcome, RunResult, TraceEntry,
    TransientEffects,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Isa(#[from] IsaError),
    #[error(transparent)]
    Asm(#[from] AsmError),
    #[error("privileged access to {addr:#x} at pc {pc} outside a transaction")]
    PrivilegedAccessUntransacted { pc: usize, addr: u64 },
    #[error("instruction budget of {budget} exceeded")]
    Runaway { budget: u64 },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
