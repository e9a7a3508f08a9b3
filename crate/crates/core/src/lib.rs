//! Simulation of the transient-execution EFLAGS timing channel: a
//! transiently set ZF, once rolled back, briefly slows the next JZ/JE, and
//! timing that jump across candidate values leaks a byte.
//!
//! Layers, bottom up: [`isa`] (architectural semantics), [`transient`]
//! (cycle costs, transactions, rollback and the revert stall), [`harness`]
//! (the timing attack and its victim), [`analysis`] (decoders and sweeps)
//! and [`mitigation`] (delay and flag-rewrite gadgets).

pub mod analysis;
pub mod harness;
pub mod isa;
pub mod mitigation;
pub mod transient;
