use serde::{Deserialize, Serialize};

use crate::isa::{Instruction, Opcode};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    #[default]
    Additive,
}

/// Timing noise injected at RDTSC reads.
///
/// Each read stalls for an independent uniform draw in
/// `[0, per_sample_jitter]` before sampling the counter and another after
/// it, so a region bracketed by two reads gains between `0` and
/// `2 * per_sample_jitter` cycles. With probability `outlier_prob` the
/// pre-sample stall also gains `outlier_magnitude` cycles, which lands
/// inside the region for the closing read.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub per_sample_jitter: u64,
    pub outlier_prob: f64,
    pub outlier_magnitude: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            kind: NoiseKind::Additive,
            per_sample_jitter: 4,
            outlier_prob: 0.01,
            outlier_magnitude: 5000,
        }
    }
}

impl NoiseModel {
    pub fn none() -> NoiseModel {
        NoiseModel {
            kind: NoiseKind::None,
            per_sample_jitter: 0,
            outlier_prob: 0.0,
            outlier_magnitude: 0,
        }
    }

    pub fn is_none(&self) -> bool {
        self.kind == NoiseKind::None
    }
}

/// Base latency per opcode class, in cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseLatency {
    pub jump: u64,
    pub alu: u64,
    /// MOV from memory. ALU instructions with a memory operand pay
    /// `alu + load`.
    pub load: u64,
    pub nop: u64,
    /// LAHF, SAHF, PUSHF, POPF.
    pub flag_image: u64,
    pub rdtsc: u64,
    /// XBEGIN and XEND.
    pub transaction: u64,
}

impl Default for BaseLatency {
    fn default() -> Self {
        BaseLatency {
            jump: 1,
            alu: 1,
            load: 4,
            nop: 1,
            flag_image: 2,
            rdtsc: 0,
            transaction: 1,
        }
    }
}

impl BaseLatency {
    pub fn of(&self, instr: &Instruction) -> u64 {
        let mem = instr.mem_operand().is_some();
        match instr.opcode {
            Opcode::Jz | Opcode::Je | Opcode::Jmp => self.jump,
            Opcode::Mov if mem => self.load,
            Opcode::Mov => self.alu,
            Opcode::Sub | Opcode::Cmp | Opcode::Cmpxchg => {
                self.alu + if mem { self.load } else { 0 }
            }
            Opcode::Nop => self.nop,
            Opcode::Lahf | Opcode::Sahf | Opcode::Pushf | Opcode::Popf => self.flag_image,
            Opcode::Rdtsc => self.rdtsc,
            Opcode::Xbegin | Opcode::Xend => self.transaction,
            Opcode::Halt | Opcode::Label => 0,
        }
    }
}

/// Mechanism that suppresses the fault raised by the privileged access.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Suppression {
    /// Transactional abort.
    #[default]
    Tsx,
    /// Signal/interrupt handler; same rollback, `handler_extra_latency`
    /// more cycles.
    Handler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MicroConfig {
    /// Instructions executed transiently after the faulting access.
    pub transient_window: usize,
    /// Cycles after the squash during which a dependent Jcc stalls.
    pub revert_stall_window: u64,
    pub jcc_stall_penalty: u64,
    pub base_latency: BaseLatency,
    /// Probability that a privileged byte's true value reaches transient
    /// execution; otherwise 0 is forwarded.
    pub secret_transiently_readable: f64,
    pub noise: NoiseModel,
    pub rng_seed: u64,
    pub suppression: Suppression,
    /// Cycles from the fault to the restored fallback path under TSX.
    pub abort_latency: u64,
    pub handler_extra_latency: u64,
    /// Instruction budget per run, transient instructions included.
    pub max_instructions: u64,
}

impl Default for MicroConfig {
    fn default() -> Self {
        MicroConfig {
            transient_window: 8,
            revert_stall_window: 8,
            jcc_stall_penalty: 20,
            base_latency: BaseLatency::default(),
            secret_transiently_readable: 1.0,
            noise: NoiseModel::default(),
            rng_seed: 0x5eed_f1a6_5eed_f1a6,
            suppression: Suppression::Tsx,
            abort_latency: 10,
            handler_extra_latency: 150,
            max_instructions: 1_000_000,
        }
    }
}

impl MicroConfig {
    /// Defaults with noise switched off.
    pub fn noiseless() -> MicroConfig {
        MicroConfig {
            noise: NoiseModel::none(),
            ..MicroConfig::default()
        }
    }

    pub fn abort_overhead(&self) -> u64 {
        match self.suppression {
            Suppression::Tsx => self.abort_latency,
            Suppression::Handler => self.abort_latency + self.handler_extra_latency,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(SimError::Config(format!(
                    "{name} must lie in [0, 1], got {p}"
                )))
            }
        };
        prob(
            "secret_transiently_readable",
            self.secret_transiently_readable,
        )?;
        prob("noise.outlier_prob", self.noise.outlier_prob)?;
        if self.max_instructions == 0 {
            return Err(SimError::Config("max_instructions must be positive".into()));
        }
        Ok(())
    }

    /// Parses the flat `key = value` text form. Nested fields use dotted
    /// keys (`noise.per_sample_jitter = 4`); unknown keys are rejected.
    pub fn from_config_str(text: &str) -> Result<MicroConfig, SimError> {
        let cfg: MicroConfig =
            toml::from_str(text).map_err(|e| SimError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Writes every field as dotted `key = value` lines. Fails for seeds
    /// above `i64::MAX`, which the text form cannot carry.
    pub fn to_config_string(&self) -> Result<String, SimError> {
        let value = toml::Value::try_from(self).map_err(|e| SimError::Config(e.to_string()))?;
        Ok(flatten_toml(&value, ""))
    }
}

/// Renders a TOML table as dotted `key = value` lines.
pub fn flatten_toml(value: &toml::Value, prefix: &str) -> String {
    let mut out = String::new();
    if let toml::Value::Table(table) = value {
        for (k, v) in table {
            let key = if prefix.is_empty() {
                k.clone()
            } else {
                format!("{prefix}.{k}")
            };
            match v {
                toml::Value::Table(_) => out.push_str(&flatten_toml(v, &key)),
                other => out.push_str(&format!("{key} = {other}\n")),
            }
        }
    }
    out
}
