use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use super::AsmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Opcode {
    Mov,
    Sub,
    Cmp,
    Cmpxchg,
    Jz,
    Je,
    Jmp,
    Nop,
    Lahf,
    Sahf,
    Pushf,
    Popf,
    Rdtsc,
    Xbegin,
    Xend,
    Halt,
    Label,
}

impl Opcode {
    pub const ALL: [Opcode; 17] = [
        Opcode::Mov,
        Opcode::Sub,
        Opcode::Cmp,
        Opcode::Cmpxchg,
        Opcode::Jz,
        Opcode::Je,
        Opcode::Jmp,
        Opcode::Nop,
        Opcode::Lahf,
        Opcode::Sahf,
        Opcode::Pushf,
        Opcode::Popf,
        Opcode::Rdtsc,
        Opcode::Xbegin,
        Opcode::Xend,
        Opcode::Halt,
        Opcode::Label,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            Opcode::Mov => "MOV",
            Opcode::Sub => "SUB",
            Opcode::Cmp => "CMP",
            Opcode::Cmpxchg => "CMPXCHG",
            Opcode::Jz => "JZ",
            Opcode::Je => "JE",
            Opcode::Jmp => "JMP",
            Opcode::Nop => "NOP",
            Opcode::Lahf => "LAHF",
            Opcode::Sahf => "SAHF",
            Opcode::Pushf => "PUSHF",
            Opcode::Popf => "POPF",
            Opcode::Rdtsc => "RDTSC",
            Opcode::Xbegin => "XBEGIN",
            Opcode::Xend => "XEND",
            Opcode::Halt => "HALT",
            Opcode::Label => "LABEL",
        }
    }

    pub fn is_jump(self) -> bool {
        matches!(self, Opcode::Jz | Opcode::Je | Opcode::Jmp)
    }

    /// Jumps whose outcome depends on ZF.
    pub fn is_flag_dependent_jump(self) -> bool {
        matches!(self, Opcode::Jz | Opcode::Je)
    }

    /// Instructions that architecturally write the flag register.
    pub fn writes_flags(self) -> bool {
        matches!(
            self,
            Opcode::Sub | Opcode::Cmp | Opcode::Cmpxchg | Opcode::Sahf | Opcode::Popf
        )
    }

    /// Opcodes that carry a label operand (jump targets and the XBEGIN
    /// fallback).
    pub fn takes_label(self) -> bool {
        self.is_jump() || self == Opcode::Xbegin
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

impl FromStr for Opcode {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.to_ascii_uppercase();
        Opcode::ALL
            .iter()
            .copied()
            .find(|op| op.mnemonic() == upper && *op != Opcode::Label)
            .ok_or(())
    }
}

const REG_NAMES: [&str; 15] = [
    "rax", "rbx", "rcx", "rdx", "rsi", "rdi", "rbp", "r8", "r9", "r10", "r11", "r12", "r13", "r14",
    "r15",
];

/// A 64-bit general purpose register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Reg(u8);

impl Reg {
    pub const COUNT: usize = REG_NAMES.len();

    pub const RAX: Reg = Reg(0);
    pub const RBX: Reg = Reg(1);
    pub const RCX: Reg = Reg(2);
    pub const RDX: Reg = Reg(3);
    pub const R8: Reg = Reg(7);
    pub const R9: Reg = Reg(8);

    pub fn new(index: usize) -> Option<Reg> {
        (index < Self::COUNT).then_some(Reg(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        REG_NAMES[self.index()]
    }

    pub fn all() -> impl Iterator<Item = Reg> {
        (0..Self::COUNT as u8).map(Reg)
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Reg {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        REG_NAMES
            .iter()
            .position(|n| *n == lower)
            .map(|i| Reg(i as u8))
            .ok_or(())
    }
}

/// Byte-sized memory operand `[base + disp]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MemRef {
    pub base: Reg,
    pub disp: i64,
}

impl MemRef {
    pub fn new(base: Reg, disp: i64) -> MemRef {
        MemRef { base, disp }
    }
}

impl fmt::Display for MemRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.disp {
            0 => write!(f, "[{}]", self.base),
            d if d < 0 => write!(f, "[{}-{:#x}]", self.base, d.unsigned_abs()),
            d => write!(f, "[{}+{:#x}]", self.base, d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operand {
    Reg(Reg),
    Imm(u64),
    Mem(MemRef),
    Label(String),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Reg(r) => write!(f, "{r}"),
            Operand::Imm(v) => write!(f, "{v:#x}"),
            Operand::Mem(m) => write!(f, "{m}"),
            Operand::Label(l) => f.write_str(l),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instruction {
    pub opcode: Opcode,
    pub operands: Vec<Operand>,
}

impl Instruction {
    pub fn new(opcode: Opcode, operands: Vec<Operand>) -> Instruction {
        Instruction { opcode, operands }
    }

    pub fn bare(opcode: Opcode) -> Instruction {
        Instruction::new(opcode, Vec::new())
    }

    pub fn label(name: impl Into<String>) -> Instruction {
        Instruction::new(Opcode::Label, vec![Operand::Label(name.into())])
    }

    pub fn jump(opcode: Opcode, target: impl Into<String>) -> Instruction {
        Instruction::new(opcode, vec![Operand::Label(target.into())])
    }

    /// Symbol carried by a jump, XBEGIN or LABEL.
    pub fn label_name(&self) -> Option<&str> {
        match self.operands.first() {
            Some(Operand::Label(l)) => Some(l),
            _ => None,
        }
    }

    /// Memory operand, if any.
    pub fn mem_operand(&self) -> Option<MemRef> {
        self.operands.iter().find_map(|o| match o {
            Operand::Mem(m) => Some(*m),
            _ => None,
        })
    }

    /// Checks operand shapes. Called for every instruction entering a
    /// [`Program`], so the executor can rely on them.
    pub fn validate(&self) -> Result<(), String> {
        use Opcode::*;
        use Operand as O;
        let ops = self.operands.as_slice();
        let ok = match self.opcode {
            Mov => matches!(ops, [O::Reg(_), O::Reg(_) | O::Imm(_) | O::Mem(_)]),
            Sub | Cmp => matches!(
                ops,
                [O::Reg(_), O::Reg(_) | O::Imm(_) | O::Mem(_)] | [O::Mem(_), O::Reg(_) | O::Imm(_)]
            ),
            Cmpxchg => matches!(ops, [O::Mem(_), O::Reg(_)]),
            Jz | Je | Jmp | Xbegin | Label => matches!(ops, [O::Label(_)]),
            Rdtsc => matches!(ops, [O::Reg(_)]),
            Nop | Lahf | Sahf | Pushf | Popf | Xend | Halt => ops.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid operands for {}", self.opcode))
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.opcode == Opcode::Label {
            return write!(f, "{}:", self.label_name().unwrap_or_default());
        }
        write!(f, "{}", self.opcode)?;
        for (i, op) in self.operands.iter().enumerate() {
            let sep = if i == 0 { " " } else { ", " };
            write!(f, "{sep}{op}")?;
        }
        Ok(())
    }
}

/// A validated instruction sequence with every label resolved to the slot
/// index of its LABEL pseudo-instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    instructions: Vec<Instruction>,
    targets: Vec<Option<usize>>,
    labels: HashMap<String, usize>,
}

impl Program {
    /// Validates operands and resolves labels. The error's line number is
    /// the 1-based instruction slot.
    pub fn new(instructions: Vec<Instruction>) -> Result<Program, AsmError> {
        let mut labels = HashMap::new();
        for (i, instr) in instructions.iter().enumerate() {
            instr.validate().map_err(|message| AsmError::Parse {
                line: i + 1,
                message,
            })?;
            if instr.opcode == Opcode::Label {
                let name = instr.label_name().unwrap_or_default().to_string();
                if labels.insert(name.clone(), i).is_some() {
                    return Err(AsmError::DuplicateLabel {
                        line: i + 1,
                        label: name,
                    });
                }
            }
        }
        let targets = instructions
            .iter()
            .enumerate()
            .map(|(i, instr)| {
                if !instr.opcode.takes_label() {
                    return Ok(None);
                }
                let name = instr.label_name().unwrap_or_default();
                labels
                    .get(name)
                    .copied()
                    .map(Some)
                    .ok_or_else(|| AsmError::UndefinedLabel {
                        line: i + 1,
                        label: name.to_string(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Program {
            instructions,
            targets,
            labels,
        })
    }

    pub fn empty() -> Program {
        Program {
            instructions: Vec::new(),
            targets: Vec::new(),
            labels: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn into_instructions(self) -> Vec<Instruction> {
        self.instructions
    }

    pub fn get(&self, pc: usize) -> Option<&Instruction> {
        self.instructions.get(pc)
    }

    /// Resolved target slot of the jump/XBEGIN at `pc`.
    pub fn target(&self, pc: usize) -> Option<usize> {
        self.targets.get(pc).copied().flatten()
    }

    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.labels.get(name).copied()
    }

    pub fn label_count(&self) -> usize {
        self.labels.len()
    }

    /// Number of real (non-LABEL) instructions.
    pub fn instruction_count(&self) -> usize {
        self.instructions
            .iter()
            .filter(|i| i.opcode != Opcode::Label)
            .count()
    }
}
