//! Minimal x86-flavoured instruction set: registers, EFLAGS, privilege-tagged
//! memory, the architectural executor and a small assembler.

mod asm;
mod exec;
mod flags;
mod instr;
mod memory;
mod state;

use thiserror::Error;

pub use asm::{assemble, disassemble};
pub use exec::{execute_architectural, jcc_taken, step, DataPort, UserPort};
pub use flags::{Flag, Flags};
pub use instr::{Instruction, MemRef, Opcode, Operand, Program, Reg};
pub use memory::{MemoryBuilder, MemorySpace, Privilege, PAGE_SIZE};
pub use state::ArchState;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IsaError {
    #[error("access to unmapped address {addr:#x}")]
    UnmappedAddress { addr: u64 },
    #[error("access to privileged address {addr:#x}")]
    PrivilegedAddress { addr: u64 },
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("POPF on empty stack")]
    StackUnderflow,
    #[error("{0} is not a jump")]
    NotAJump(Opcode),
    #[error("invalid operands for {0}")]
    BadOperands(Opcode),
    #[error("pc {pc} outside program")]
    PcOutOfRange { pc: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AsmError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: label `{label}` defined twice")]
    DuplicateLabel { line: usize, label: String },
    #[error("line {line}: undefined label `{label}`")]
    UndefinedLabel { line: usize, label: String },
}
