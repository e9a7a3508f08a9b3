//! Software and hardware mitigations: a NOP delay before the Jcc, flag
//! rewrites (LAHF;SAHF or PUSHF;POPF) that clear the pending revert, and a
//! switch that removes the stall penalty altogether.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::analysis::{run_experiments, signal_cycles, Accuracy, SecretSource};
use crate::harness::{AttackConfig, AttackError, DecodeRule};
use crate::isa::{execute_architectural, ArchState, Instruction, IsaError, Opcode, Program};
use crate::transient::MicroConfig;

pub const DEFAULT_DELAY: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Gadget {
    /// NOPs before the jump.
    Delay(usize),
    LahfSahf,
    PushfPopf,
    /// Hardware fix: the stall penalty is zero. Leaves programs untouched.
    HardwareOff,
}

impl Gadget {
    pub fn delay(count: usize) -> Gadget {
        Gadget::Delay(count)
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        match self {
            Gadget::Delay(0) => Err(AttackError::InvalidGadget("delay:0".into())),
            _ => Ok(()),
        }
    }

    /// Instructions inserted before the jump.
    pub fn instructions(&self) -> Vec<Instruction> {
        match *self {
            Gadget::Delay(n) => vec![Instruction::bare(Opcode::Nop); n],
            Gadget::LahfSahf => vec![
                Instruction::bare(Opcode::Lahf),
                Instruction::bare(Opcode::Sahf),
            ],
            Gadget::PushfPopf => vec![
                Instruction::bare(Opcode::Pushf),
                Instruction::bare(Opcode::Popf),
            ],
            Gadget::HardwareOff => Vec::new(),
        }
    }

    /// The configuration the gadget runs under.
    pub fn configure(&self, micro: &MicroConfig) -> MicroConfig {
        match self {
            Gadget::HardwareOff => MicroConfig {
                jcc_stall_penalty: 0,
                ..micro.clone()
            },
            _ => micro.clone(),
        }
    }

    pub fn is_flag_rewrite(&self) -> bool {
        matches!(self, Gadget::LahfSahf | Gadget::PushfPopf)
    }
}

impl fmt::Display for Gadget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gadget::Delay(n) => write!(f, "delay:{n}"),
            Gadget::LahfSahf => f.write_str("lahf_sahf"),
            Gadget::PushfPopf => f.write_str("pushf_popf"),
            Gadget::HardwareOff => f.write_str("hardware_off"),
        }
    }
}

/// Parses `delay`, `delay:N` (N ≥ 1), `lahf_sahf`, `pushf_popf` or
/// `hardware_off`.
impl FromStr for Gadget {
    type Err = AttackError;

    fn from_str(s: &str) -> Result<Gadget, AttackError> {
        let bad = || AttackError::InvalidGadget(s.to_string());
        let (name, count) = match s.split_once(':') {
            Some((n, c)) => (n, Some(c)),
            None => (s, None),
        };
        let g = match (name, count) {
            ("delay", None) => Gadget::Delay(DEFAULT_DELAY),
            ("delay", Some(c)) => Gadget::Delay(c.parse().map_err(|_| bad())?),
            ("lahf_sahf", None) => Gadget::LahfSahf,
            ("pushf_popf", None) => Gadget::PushfPopf,
            ("hardware_off", None) => Gadget::HardwareOff,
            _ => return Err(bad()),
        };
        g.validate()?;
        Ok(g)
    }
}

impl TryFrom<String> for Gadget {
    type Error = AttackError;

    fn try_from(s: String) -> Result<Gadget, AttackError> {
        s.parse()
    }
}

impl From<Gadget> for String {
    fn from(g: Gadget) -> String {
        g.to_string()
    }
}

/// Index of the jump the gadget guards: the first JZ/JE at or after the
/// first transaction's fallback label, or the first one in the program if
/// there is no transaction.
pub fn guarded_jump(program: &Program) -> Option<usize> {
    let instrs = program.instructions();
    let start = instrs
        .iter()
        .position(|i| i.opcode == Opcode::Xbegin)
        .map(|x| program.target(x).filter(|&t| t > x).unwrap_or(x + 1))
        .unwrap_or(0);
    (start..instrs.len()).find(|&i| instrs[i].opcode.is_flag_dependent_jump())
}

/// Inserts the gadget right before the guarded jump, after any label that
/// precedes it, so jumps to that label run the gadget too.
pub fn apply_gadget(program: &Program, gadget: &Gadget) -> Result<Program, AttackError> {
    gadget.validate()?;
    let at = guarded_jump(program).ok_or(AttackError::NoFlagDependentJump)?;
    let mut instrs = program.instructions().to_vec();
    instrs.splice(at..at, gadget.instructions());
    Ok(Program::new(instrs)?)
}

/// Runs a rewrite gadget's two instructions architecturally on `state`.
pub fn flag_rewrite_semantics(state: &ArchState, gadget: &Gadget) -> Result<ArchState, IsaError> {
    let program = Program::new(gadget.instructions()).expect("gadget instructions are well formed");
    let mut s = state.clone();
    s.pc = 0;
    while s.pc < program.len() {
        s = execute_architectural(&s, &program)?;
    }
    s.pc = state.pc;
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MitigationReport {
    pub gadget: Gadget,
    pub rule: DecodeRule,
    pub experiments: usize,
    pub baseline: Accuracy,
    pub mitigated: Accuracy,
    pub baseline_accuracy: f64,
    pub mitigated_accuracy: f64,
    pub signal_before: i64,
    pub signal_after: i64,
}

impl MitigationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Accuracy with and without `gadget` over the same experiment seeds, and
/// the zero-noise signal before and after.
pub fn evaluate_mitigation(
    micro: &MicroConfig,
    attack: &AttackConfig,
    source: &SecretSource,
    gadget: &Gadget,
    experiments: usize,
) -> Result<MitigationReport, AttackError> {
    gadget.validate()?;
    let before = run_experiments(micro, attack, source, None, experiments)?;
    let after = run_experiments(micro, attack, source, Some(gadget), experiments)?;
    let baseline = Accuracy::of(&before, attack.decode_rule);
    let mitigated = Accuracy::of(&after, attack.decode_rule);
    Ok(MitigationReport {
        gadget: *gadget,
        rule: attack.decode_rule,
        experiments,
        baseline,
        mitigated,
        baseline_accuracy: baseline.rate(),
        mitigated_accuracy: mitigated.rate(),
        signal_before: signal_cycles(micro, None)?,
        signal_after: signal_cycles(micro, Some(gadget))?,
    })
}
