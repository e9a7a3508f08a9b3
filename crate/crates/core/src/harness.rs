//! The timing attack: per candidate value, time a transaction whose
//! faulting SUB compares the candidate with a privileged byte, then decode
//! the byte from which candidate ran slowest.

use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::io::Write;
use thiserror::Error;

use crate::analysis::{Histogram, MeanProfile, ProfileAccumulator};
use crate::isa::{assemble, ArchState, MemorySpace, Privilege, Program, Reg};
use crate::transient::{execute, MicroConfig, SimError};

/// Kernel address the victim's secret is placed at.
pub const DEFAULT_SECRET_ADDR: u64 = 0xffff_8880_0000_0000;
/// A user page mapped next to the victim, for completeness of the address
/// space; the attack itself only needs the kernel mapping.
pub const USER_SCRATCH_ADDR: u64 = 0x0040_0000;

const START_REG: Reg = Reg::R8;
const END_REG: Reg = Reg::R9;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("passes must be at least 1")]
    NoPasses,
    #[error("experiments must be at least 1")]
    NoExperiments,
    #[error("offset {offset} outside secret of {len} bytes")]
    OffsetOutOfRange { offset: usize, len: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("program has no flag-dependent jump after its transaction")]
    NoFlagDependentJump,
    #[error("invalid gadget `{0}`")]
    InvalidGadget(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<crate::isa::AsmError> for AttackError {
    fn from(e: crate::isa::AsmError) -> Self {
        AttackError::Sim(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeRule {
    /// Mode of the per-pass argmax.
    #[default]
    ArgmaxMode,
    /// Argmax of the mean time per candidate. Weak baseline.
    MeanMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    /// Largest candidate value tried (inclusive).
    pub to: u8,
    pub passes: usize,
    /// Half-open `[start, end)` range of secret offsets; `None` means the
    /// whole secret.
    pub offset_range: Option<(usize, usize)>,
    pub decode_rule: DecodeRule,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            to: 255,
            passes: 2000,
            offset_range: None,
            decode_rule: DecodeRule::ArgmaxMode,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<(), AttackError> {
        if self.to == 0 {
            return Err(AttackError::Config("to must lie in [1, 255]".into()));
        }
        if self.passes == 0 {
            return Err(AttackError::NoPasses);
        }
        if let Some((s, e)) = self.offset_range {
            if s > e {
                return Err(AttackError::Config(format!(
                    "offset_range [{s}, {e}) is reversed"
                )));
            }
        }
        Ok(())
    }

    pub fn offsets(&self, victim: &VictimSpec) -> Vec<usize> {
        let (s, e) = self.offset_range.unwrap_or((0, victim.secret.len()));
        (s..e).collect()
    }
}

/// The co-running victim holding the secret in kernel memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VictimSpec {
    #[serde(serialize_with = "ser_secret", deserialize_with = "de_secret")]
    pub secret: Vec<u8>,
    /// Whether the victim keeps touching the secret.
    pub keep_cached: bool,
    /// Readability of the secret when the victim does not keep it cached.
    pub degraded_readability: f64,
    /// Written as a hex string; read from a string or an integer.
    #[serde(serialize_with = "ser_addr", deserialize_with = "de_addr")]
    pub secret_addr: u64,
}

impl Default for VictimSpec {
    fn default() -> Self {
        VictimSpec {
            secret: b"SECRET".to_vec(),
            keep_cached: true,
            degraded_readability: 0.1,
            secret_addr: DEFAULT_SECRET_ADDR,
        }
    }
}

fn ser_secret<S: Serializer>(secret: &[u8], s: S) -> Result<S::Ok, S::Error> {
    match std::str::from_utf8(secret) {
        Ok(text) => s.serialize_str(text),
        Err(_) => secret.serialize(s),
    }
}

fn de_secret<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Secret {
        Text(String),
        Bytes(Vec<u8>),
    }
    Ok(match Secret::deserialize(d)? {
        Secret::Text(t) => t.into_bytes(),
        Secret::Bytes(b) => b,
    })
}

fn ser_addr<S: Serializer>(addr: &u64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{addr:#x}"))
}

fn de_addr<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Addr {
        Int(u64),
        Text(String),
    }
    match Addr::deserialize(d)? {
        Addr::Int(a) => Ok(a),
        Addr::Text(t) => {
            let t = t.trim();
            let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
                Some(hex) => u64::from_str_radix(&hex.replace('_', ""), 16),
                None => t.replace('_', "").parse(),
            };
            parsed.map_err(|_| serde::de::Error::custom(format!("bad address `{t}`")))
        }
    }
}

impl VictimSpec {
    pub fn new(secret: impl Into<Vec<u8>>) -> VictimSpec {
        VictimSpec {
            secret: secret.into(),
            ..VictimSpec::default()
        }
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        if self.secret.is_empty() {
            return Err(AttackError::Config(
                "victim secret must be non-empty".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.degraded_readability) {
            return Err(AttackError::Config(
                "degraded_readability must lie in [0, 1]".into(),
            ));
        }
        if self
            .secret_addr
            .checked_add(self.secret.len() as u64)
            .is_none()
        {
            return Err(AttackError::Config(
                "secret overflows the address space".into(),
            ));
        }
        Ok(())
    }

    /// Memory with the secret on kernel pages and a user scratch page.
    pub fn install(&self) -> MemorySpace {
        MemorySpace::builder()
            .map(USER_SCRATCH_ADDR, 64, Privilege::User)
            .with_bytes(self.secret_addr, &self.secret, Privilege::Kernel)
            .build()
    }

    /// Readability the victim's access pattern leaves the secret in.
    pub fn readability(&self, micro: &MicroConfig) -> f64 {
        if self.keep_cached {
            micro.secret_transiently_readable
        } else {
            self.degraded_readability
        }
    }
}

/// One step of the victim loop: sum every secret byte (it runs privileged)
/// and record how readable that leaves the secret.
pub fn victim_step(
    victim: &VictimSpec,
    micro: &MicroConfig,
    mut memory: MemorySpace,
) -> MemorySpace {
    let mut dummy = 0u64;
    for i in 0..victim.secret.len() as u64 {
        if let Ok((b, _)) = memory.read(victim.secret_addr + i) {
            dummy = dummy.wrapping_add(u64::from(b));
        }
    }
    std::hint::black_box(dummy);
    memory.set_residency(Some(victim.readability(micro)));
    memory
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Actor {
    Victim,
    Attacker,
}

/// Interleaving of victim and attacker: one victim step before each pass.
pub fn co_run_schedule(passes: usize) -> impl Iterator<Item = Actor> {
    (0..passes).flat_map(|_| [Actor::Victim, Actor::Attacker])
}

/// Text of the timed gadget for one candidate.
pub fn attack_source(secret_addr: u64, offset: usize, test_num: u8) -> String {
    let addr = secret_addr.wrapping_add(offset as u64);
    format!(
        "RDTSC {START_REG}
MOV rcx, {addr:#x}
MOV rbx, {test_num:#x}
XBEGIN abort
SUB rbx, [rcx]
XEND
abort:
JZ equal
JMP notequal
equal: NOP
notequal: NOP
RDTSC {END_REG}
"
    )
}

pub fn build_attack_program(
    victim: &VictimSpec,
    offset: usize,
    test_num: u8,
) -> Result<Program, AttackError> {
    if offset >= victim.secret.len() {
        return Err(AttackError::OffsetOutOfRange {
            offset,
            len: victim.secret.len(),
        });
    }
    Ok(assemble(&attack_source(
        victim.secret_addr,
        offset,
        test_num,
    ))?)
}

/// Programs for candidates `0..=to` at one offset.
pub fn build_attack_programs(
    victim: &VictimSpec,
    offset: usize,
    to: u8,
) -> Result<Vec<Program>, AttackError> {
    (0..=to)
        .map(|t| build_attack_program(victim, offset, t))
        .collect()
}

/// One sweep over all candidates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PassRecord {
    /// `(test_num, spend_time)` in candidate order.
    pub timings: Vec<(u8, u64)>,
    pub max_time: u64,
    pub argmax: u8,
}

impl PassRecord {
    /// Builds the record with the strict-greater update, so the first
    /// maximum wins.
    pub fn from_timings(timings: Vec<(u8, u64)>) -> PassRecord {
        let mut max_time = 0;
        let mut argmax = 0;
        for &(t, spend) in &timings {
            if max_time < spend {
                max_time = spend;
                argmax = t;
            }
        }
        PassRecord {
            timings,
            max_time,
            argmax,
        }
    }
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent seed for a sub-stream such as `[offset, pass]`.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(base), |acc, &i| {
        mix(acc ^ i.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15))
    })
}

/// Runs one pass over precompiled candidate programs.
pub fn run_pass_with(
    micro: &MicroConfig,
    programs: &[Program],
    memory: &MemorySpace,
    rng: &mut Pcg64Mcg,
) -> Result<PassRecord, AttackError> {
    let mut timings = Vec::with_capacity(programs.len());
    for (t, program) in programs.iter().enumerate() {
        let out = execute(micro, ArchState::new(memory.clone()), program, rng, None)?;
        let spend = out
            .state
            .reg(END_REG)
            .wrapping_sub(out.state.reg(START_REG));
        timings.push((t as u8, spend));
    }
    Ok(PassRecord::from_timings(timings))
}

/// One pass at `offset`, seeded from `micro.rng_seed`.
pub fn run_pass(
    micro: &MicroConfig,
    attack: &AttackConfig,
    victim: &VictimSpec,
    offset: usize,
) -> Result<PassRecord, AttackError> {
    attack.validate()?;
    victim.validate()?;
    let programs = build_attack_programs(victim, offset, attack.to)?;
    let memory = victim_step(victim, micro, victim.install());
    let mut rng = Pcg64Mcg::seed_from_u64(derive_seed(micro.rng_seed, &[offset as u64, 0]));
    run_pass_with(micro, &programs, &memory, &mut rng)
}

/// Compact per-pass log line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassSummary {
    pub pass: usize,
    pub argmax: u8,
    pub max_time: u64,
}

/// Everything collected while leaking one byte.
#[derive(Debug, Clone, PartialEq)]
pub struct ByteLeak {
    pub offset: usize,
    pub decoded: u8,
    pub histogram: Histogram,
    pub profile: ProfileAccumulator,
    pub passes: Vec<PassSummary>,
}

impl ByteLeak {
    pub fn decode(&self, rule: DecodeRule) -> u8 {
        match rule {
            DecodeRule::ArgmaxMode => self.histogram.mode(),
            DecodeRule::MeanMax => self.profile.argmax_mean(),
        }
    }
}

/// Leaks one byte from precompiled programs. Pass `p` draws from the
/// stream `derive_seed(micro.rng_seed, [offset, p])`.
pub fn leak_byte_with(
    micro: &MicroConfig,
    attack: &AttackConfig,
    victim: &VictimSpec,
    programs: &[Program],
    offset: usize,
) -> Result<ByteLeak, AttackError> {
    if attack.passes == 0 {
        return Err(AttackError::NoPasses);
    }
    let mut memory = victim.install();
    let mut histogram = Histogram::new();
    let mut profile = ProfileAccumulator::new(programs.len());
    let mut passes = Vec::with_capacity(attack.passes);
    let mut pass = 0;
    for actor in co_run_schedule(attack.passes) {
        match actor {
            Actor::Victim => memory = victim_step(victim, micro, memory),
            Actor::Attacker => {
                let seed = derive_seed(micro.rng_seed, &[offset as u64, pass as u64]);
                let mut rng = Pcg64Mcg::seed_from_u64(seed);
                let record = run_pass_with(micro, programs, &memory, &mut rng)?;
                histogram.add(record.argmax);
                profile.add(&record);
                passes.push(PassSummary {
                    pass,
                    argmax: record.argmax,
                    max_time: record.max_time,
                });
                pass += 1;
            }
        }
    }
    let mut leak = ByteLeak {
        offset,
        decoded: 0,
        histogram,
        profile,
        passes,
    };
    leak.decoded = leak.decode(attack.decode_rule);
    Ok(leak)
}

pub fn leak_byte(
    micro: &MicroConfig,
    attack: &AttackConfig,
    victim: &VictimSpec,
    offset: usize,
) -> Result<ByteLeak, AttackError> {
    attack.validate()?;
    victim.validate()?;
    let programs = build_attack_programs(victim, offset, attack.to)?;
    leak_byte_with(micro, attack, victim, &programs, offset)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ByteReport {
    pub offset: usize,
    pub decoded: u8,
    pub truth: u8,
    pub passes: usize,
    pub histogram: Vec<u64>,
    #[serde(skip)]
    pub pass_log: Vec<PassSummary>,
    #[serde(skip)]
    pub profile: MeanProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeakReport {
    pub success_rate: f64,
    pub decoded: Vec<u8>,
    pub bytes: Vec<ByteReport>,
    pub micro: MicroConfig,
    pub attack: AttackConfig,
    pub victim: VictimSpec,
}

pub fn leak_string(
    micro: &MicroConfig,
    attack: &AttackConfig,
    victim: &VictimSpec,
) -> Result<LeakReport, AttackError> {
    micro.validate()?;
    attack.validate()?;
    victim.validate()?;
    let offsets = attack.offsets(victim);
    let bytes = offsets
        .par_iter()
        .map(|&offset| {
            let leak = leak_byte(micro, attack, victim, offset)?;
            Ok(ByteReport {
                offset,
                decoded: leak.decoded,
                truth: victim.secret[offset],
                passes: leak.passes.len(),
                histogram: leak.histogram.bins().to_vec(),
                pass_log: leak.passes,
                profile: leak.profile.profile(),
            })
        })
        .collect::<Result<Vec<_>, AttackError>>()?;
    let hits = bytes.iter().filter(|b| b.decoded == b.truth).count();
    let success_rate = if bytes.is_empty() {
        1.0
    } else {
        hits as f64 / bytes.len() as f64
    };
    Ok(LeakReport {
        success_rate,
        decoded: bytes.iter().map(|b| b.decoded).collect(),
        bytes,
        micro: micro.clone(),
        attack: attack.clone(),
        victim: victim.clone(),
    })
}

impl LeakReport {
    /// Pretty JSON; field order follows the struct.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    /// CSV with columns `offset,pass,argmax,max_time`.
    pub fn write_passes_csv<W: Write>(&self, out: W) -> Result<(), AttackError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["offset", "pass", "argmax", "max_time"])?;
        for b in &self.bytes {
            for p in &b.pass_log {
                w.write_record([
                    b.offset.to_string(),
                    p.pass.to_string(),
                    p.argmax.to_string(),
                    p.max_time.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::{disassemble, Opcode, Operand};

    fn quiet() -> MicroConfig {
        MicroConfig::noiseless()
    }

    #[test]
    fn program_has_one_flag_writer_inside_the_transaction() {
        let v = VictimSpec::new("A");
        let p = build_attack_program(&v, 0, 7).unwrap();
        let ins = p.instructions();
        let begin = ins.iter().position(|i| i.opcode == Opcode::Xbegin).unwrap();
        let end = ins.iter().position(|i| i.opcode == Opcode::Xend).unwrap();
        let writers = ins[begin..end]
            .iter()
            .filter(|i| i.opcode.writes_flags())
            .count();
        assert_eq!(writers, 1);
    }

    #[test]
    fn candidates_differ_in_one_immediate() {
        let v = VictimSpec::new("A");
        let a = build_attack_program(&v, 0, 0).unwrap();
        let b = build_attack_program(&v, 0, 1).unwrap();
        let diffs: Vec<_> = a
            .instructions()
            .iter()
            .zip(b.instructions())
            .filter(|(x, y)| x != y)
            .collect();
        assert_eq!(diffs.len(), 1);
        assert_eq!(diffs[0].0.operands[1], Operand::Imm(0));
        assert_eq!(diffs[0].1.operands[1], Operand::Imm(1));
    }

    #[test]
    fn disassembly_follows_listing_order() {
        let v = VictimSpec::new("A");
        let text = disassemble(&build_attack_program(&v, 0, 0x41).unwrap());
        let ops: Vec<&str> = text
            .lines()
            .map(|l| l.split_whitespace().next().unwrap())
            .collect();
        assert_eq!(
            ops,
            [
                "RDTSC",
                "MOV",
                "MOV",
                "XBEGIN",
                "SUB",
                "XEND",
                "abort:",
                "JZ",
                "JMP",
                "equal:",
                "NOP",
                "notequal:",
                "NOP",
                "RDTSC"
            ]
        );
        assert!(text.contains("JZ equal\nJMP notequal\n"));
    }

    #[test]
    fn offset_outside_secret_is_rejected() {
        let v = VictimSpec::new("AB");
        assert!(matches!(
            build_attack_program(&v, 2, 0),
            Err(AttackError::OffsetOutOfRange { offset: 2, len: 2 })
        ));
    }

    #[test]
    fn noiseless_pass_finds_the_byte() {
        let v = VictimSpec::new([0x42]);
        let r = run_pass(&quiet(), &AttackConfig::default(), &v, 0).unwrap();
        assert_eq!(r.argmax, 0x42);
        assert_eq!(r.timings.len(), 256);
        assert_eq!(r.max_time, r.timings.iter().map(|t| t.1).max().unwrap());
    }

    #[test]
    fn unreadable_secret_decodes_zero() {
        let micro = MicroConfig {
            secret_transiently_readable: 0.0,
            ..quiet()
        };
        let r = run_pass(
            &micro,
            &AttackConfig::default(),
            &VictimSpec::new([0x42]),
            0,
        )
        .unwrap();
        assert_eq!(r.argmax, 0);
    }

    #[test]
    fn secret_outside_tested_range_gives_no_signal() {
        let attack = AttackConfig {
            to: 1,
            ..AttackConfig::default()
        };
        let r = run_pass(&quiet(), &attack, &VictimSpec::new([200]), 0).unwrap();
        assert!(r.argmax <= 1);
        assert_eq!(r.timings[0].1, r.timings[1].1);
    }

    #[test]
    fn first_maximum_wins() {
        let r = PassRecord::from_timings(vec![(0, 5), (1, 9), (2, 9), (3, 1)]);
        assert_eq!((r.argmax, r.max_time), (1, 9));
    }

    #[test]
    fn zero_passes_is_an_error() {
        let attack = AttackConfig {
            passes: 0,
            ..AttackConfig::default()
        };
        assert!(matches!(
            leak_byte(&quiet(), &attack, &VictimSpec::new("A"), 0),
            Err(AttackError::NoPasses)
        ));
    }

    #[test]
    fn config_validation() {
        let bad_to = AttackConfig {
            to: 0,
            ..AttackConfig::default()
        };
        assert!(bad_to.validate().is_err());
        assert!(VictimSpec::new("").validate().is_err());
    }

    #[test]
    fn noiseless_string_leaks_fully() {
        let attack = AttackConfig {
            passes: 1,
            ..AttackConfig::default()
        };
        let r = leak_string(&quiet(), &attack, &VictimSpec::new("SECRET")).unwrap();
        assert_eq!(r.success_rate, 1.0);
        assert_eq!(r.decoded, b"SECRET");
        for b in &r.bytes {
            assert_eq!(b.histogram.iter().sum::<u64>(), b.passes as u64);
        }
    }

    #[test]
    fn empty_offset_range_is_vacuously_successful() {
        let attack = AttackConfig {
            offset_range: Some((3, 3)),
            passes: 1,
            ..AttackConfig::default()
        };
        let r = leak_string(&quiet(), &attack, &VictimSpec::new("SECRET")).unwrap();
        assert!(r.bytes.is_empty());
        assert_eq!(r.success_rate, 1.0);
    }

    #[test]
    fn victim_step_sets_readability() {
        let micro = MicroConfig {
            secret_transiently_readable: 0.8,
            ..quiet()
        };
        let mut v = VictimSpec::new("S");
        let m = victim_step(&v, &micro, v.install());
        assert_eq!(m.residency(), Some(0.8));
        v.keep_cached = false;
        let m = victim_step(&v, &micro, v.install());
        assert_eq!(m.residency(), Some(0.1));
    }

    #[test]
    fn schedule_alternates() {
        let s: Vec<Actor> = co_run_schedule(2).collect();
        assert_eq!(
            s,
            [
                Actor::Victim,
                Actor::Attacker,
                Actor::Victim,
                Actor::Attacker
            ]
        );
    }

    #[test]
    fn derived_seeds_differ_per_stream() {
        let a = derive_seed(1, &[0, 0]);
        assert_ne!(a, derive_seed(1, &[0, 1]));
        assert_ne!(a, derive_seed(1, &[1, 0]));
        assert_ne!(a, derive_seed(2, &[0, 0]));
        assert_eq!(a, derive_seed(1, &[0, 0]));
    }

    #[test]
    fn victim_secret_serializes_as_text_or_bytes() {
        let v = VictimSpec::new("hi");
        let json = serde_json::to_string(&v).unwrap();
        assert!(json.contains("\"secret\":\"hi\""));
        let v = VictimSpec::new([0xff, 0x00]);
        let json = serde_json::to_string(&v).unwrap();
        let back: VictimSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.secret, [0xff, 0x00]);
    }

    #[test]
    fn secret_addr_is_hex_text() {
        let v = VictimSpec::default();
        let json = serde_json::to_string(&v).unwrap();
        assert!(json.contains("\"secret_addr\":\"0xffff888000000000\""));
        assert_eq!(serde_json::from_str::<VictimSpec>(&json).unwrap(), v);
        let v: VictimSpec = serde_json::from_str(r#"{"secret_addr": 4096}"#).unwrap();
        assert_eq!(v.secret_addr, 4096);
        let v: VictimSpec =
            serde_json::from_str(r#"{"secret_addr": "0xffff_8000_0000_0000"}"#).unwrap();
        assert_eq!(v.secret_addr, 0xffff_8000_0000_0000);
        assert!(serde_json::from_str::<VictimSpec>(r#"{"secret_addr": "0xzz"}"#).is_err());
    }
}
