use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;
use serde::Serialize;
use std::io::Write;

use crate::isa::{
    self, ArchState, DataPort, Flag, IsaError, MemorySpace, Opcode, Privilege, Program, UserPort,
};

use super::pipeline::{jcc_cost, rdtsc, PendingRevert, PipelineState, Transaction};
use super::{MicroConfig, SimError};

/// One executed (or transiently executed) instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TraceEntry {
    pub pc: usize,
    pub opcode: Opcode,
    /// Latency charged to this step, stall penalty included. A faulting
    /// access also carries the abort overhead.
    pub cycle_cost: u64,
    /// Measurement noise injected at this step.
    pub noise: u64,
    pub transient: bool,
    pub stalled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub final_state: ArchState,
    pub cycles: u64,
    pub trace: Vec<TraceEntry>,
    pub aborted: bool,
}

/// Final state and timing without a trace; the hot path of the harness.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub state: ArchState,
    pub cycles: u64,
    pub aborted: bool,
}

/// Runs `program` from `state`, seeding all noise from `config.rng_seed`.
pub fn run(
    config: &MicroConfig,
    state: ArchState,
    program: &Program,
) -> Result<RunResult, SimError> {
    let mut rng = Pcg64Mcg::seed_from_u64(config.rng_seed);
    let mut trace = Vec::new();
    let out = execute(config, state, program, &mut rng, Some(&mut trace))?;
    Ok(RunResult {
        final_state: out.state,
        cycles: out.cycles,
        trace,
        aborted: out.aborted,
    })
}

/// Runs `program` drawing noise from a caller-owned generator.
pub fn execute<R: Rng>(
    config: &MicroConfig,
    mut state: ArchState,
    program: &Program,
    rng: &mut R,
    mut trace: Option<&mut Vec<TraceEntry>>,
) -> Result<Outcome, SimError> {
    let lat = &config.base_latency;
    let mut pipe = PipelineState::default();
    let mut executed: u64 = 0;
    let mut aborted = false;

    while state.pc < program.len() {
        executed += 1;
        if executed > config.max_instructions {
            return Err(SimError::Runaway {
                budget: config.max_instructions,
            });
        }
        pipe.retire_expired();
        let pc = state.pc;
        let instr = &program.instructions()[pc];
        let mut noise = 0;
        let mut stalled = false;

        let cost = match instr.opcode {
            Opcode::Xbegin => {
                // Nested XBEGIN flattens into the outer transaction.
                if pipe.transaction.is_none() {
                    let fallback = program.target(pc).ok_or_else(|| {
                        IsaError::UnknownLabel(instr.label_name().unwrap_or_default().into())
                    })?;
                    pipe.transaction = Some(Transaction {
                        checkpoint: state.clone(),
                        fallback,
                    });
                }
                state.pc += 1;
                lat.transaction
            }
            Opcode::Xend => {
                pipe.transaction = None;
                state.pc += 1;
                lat.transaction
            }
            Opcode::Rdtsc => {
                let issued = pipe.cycle;
                pipe.cycle += lat.rdtsc;
                let (value, injected) = rdtsc(&config.noise, &mut pipe, rng);
                noise = injected;
                isa::step(&mut state, program, &mut UserPort { tsc: value })?;
                // Charged below together with every other step.
                pipe.cycle = issued;
                lat.rdtsc
            }
            Opcode::Jz | Opcode::Je | Opcode::Jmp => {
                let (c, s) = jcc_cost(config, &pipe, instr.opcode);
                stalled = s;
                isa::step(&mut state, program, &mut UserPort::default())?;
                c
            }
            _ => match isa::step(&mut state, program, &mut UserPort::default()) {
                Ok(()) => {
                    if instr.opcode.writes_flags() {
                        pipe.pending_revert = None;
                    }
                    lat.of(instr)
                }
                Err(IsaError::PrivilegedAddress { addr }) => {
                    let Some(txn) = pipe.transaction.take() else {
                        return Err(SimError::PrivilegedAccessUntransacted { pc, addr });
                    };
                    let cost = lat.of(instr) + config.abort_overhead();
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(TraceEntry {
                            pc,
                            opcode: instr.opcode,
                            cycle_cost: cost,
                            noise: 0,
                            transient: true,
                            stalled: false,
                        });
                    }
                    let effects = transient_execute(
                        config,
                        &state,
                        program,
                        pc,
                        &txn.checkpoint,
                        rng,
                        trace.as_deref_mut(),
                    );
                    executed += effects.executed;
                    let squash_cycle = pipe.cycle + cost;
                    if let Some(flag) = effects.changed_flag {
                        pipe.pending_revert = Some(PendingRevert {
                            flag,
                            expires_at: squash_cycle + config.revert_stall_window,
                        });
                    }
                    state = txn.checkpoint;
                    state.pc = txn.fallback;
                    aborted = true;
                    pipe.cycle += cost;
                    continue;
                }
                Err(e) => return Err(e.into()),
            },
        };

        pipe.cycle += cost + noise;
        if let Some(t) = trace.as_deref_mut() {
            t.push(TraceEntry {
                pc,
                opcode: instr.opcode,
                cycle_cost: cost,
                noise,
                transient: false,
                stalled,
            });
        }
    }

    Ok(Outcome {
        state,
        cycles: pipe.cycle,
        aborted,
    })
}

/// Flag effects left behind by a squashed transient window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TransientEffects {
    /// Flag that differed from its checkpoint value at some point in the
    /// window. Only ZF is tracked.
    pub changed_flag: Option<Flag>,
    /// Value forwarded by the first privileged load, if any.
    pub forwarded: Option<u8>,
    /// Instructions executed in the shadow, the faulting one included.
    pub executed: u64,
}

/// Load port of the transient window: privileged bytes are forwarded
/// (the true value with probability `readable`, else 0) and stores to
/// privileged pages never land.
struct ForwardingPort<'r, R> {
    readable: f64,
    rng: &'r mut R,
    forwarded: Option<u8>,
}

impl<R: Rng> DataPort for ForwardingPort<'_, R> {
    fn load(&mut self, mem: &MemorySpace, addr: u64) -> Result<u8, IsaError> {
        let (value, privilege) = mem.read(addr)?;
        if privilege == Privilege::User {
            return Ok(value);
        }
        let pass = if self.readable >= 1.0 {
            true
        } else if self.readable <= 0.0 {
            false
        } else {
            self.rng.gen_bool(self.readable)
        };
        let v = if pass { value } else { 0 };
        self.forwarded.get_or_insert(v);
        Ok(v)
    }

    fn store(&mut self, mem: &mut MemorySpace, addr: u64, value: u8) -> Result<(), IsaError> {
        match mem.privilege(addr) {
            None => Err(IsaError::UnmappedAddress { addr }),
            Some(Privilege::Kernel) => Ok(()),
            Some(Privilege::User) => mem.write(addr, value),
        }
    }
}

/// Executes the faulting instruction at `fault_pc` and up to
/// `transient_window` further instructions on a shadow copy of `state`.
///
/// The shadow stops early at XEND, XBEGIN, RDTSC, HALT, the end of the
/// program or a shadow fault. Nothing reaches `state`.
pub fn transient_execute<R: Rng>(
    config: &MicroConfig,
    state: &ArchState,
    program: &Program,
    fault_pc: usize,
    checkpoint: &ArchState,
    rng: &mut R,
    mut trace: Option<&mut Vec<TraceEntry>>,
) -> TransientEffects {
    let mut shadow = state.clone();
    shadow.pc = fault_pc;
    let readable = state
        .mem
        .residency()
        .unwrap_or(config.secret_transiently_readable);
    let mut port = ForwardingPort {
        readable,
        rng,
        forwarded: None,
    };
    let mut effects = TransientEffects::default();

    for i in 0..=config.transient_window {
        let pc = shadow.pc;
        let Some(instr) = program.get(pc) else { break };
        if matches!(
            instr.opcode,
            Opcode::Xend | Opcode::Xbegin | Opcode::Rdtsc | Opcode::Halt
        ) {
            break;
        }
        if isa::step(&mut shadow, program, &mut port).is_err() {
            break;
        }
        effects.executed += 1;
        if shadow.flags.zf != checkpoint.flags.zf {
            effects.changed_flag = Some(Flag::Zf);
        }
        // The faulting instruction itself is logged by the caller together
        // with the abort overhead.
        if i > 0 {
            if let Some(t) = trace.as_deref_mut() {
                t.push(TraceEntry {
                    pc,
                    opcode: instr.opcode,
                    cycle_cost: 0,
                    noise: 0,
                    transient: true,
                    stalled: false,
                });
            }
        }
    }
    effects.forwarded = port.forwarded;
    effects
}

/// Writes `trace` as CSV with columns
/// `step,pc,opcode,cycle_cost,transient,stalled`. `cycle_cost` includes the
/// noise injected at that step, so the column sums to the run's cycles.
pub fn write_trace_csv<W: Write>(trace: &[TraceEntry], out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "pc", "opcode", "cycle_cost", "transient", "stalled"])?;
    for (step, e) in trace.iter().enumerate() {
        w.write_record([
            step.to_string(),
            e.pc.to_string(),
            e.opcode.mnemonic().to_string(),
            (e.cycle_cost + e.noise).to_string(),
            u8::from(e.transient).to_string(),
            u8::from(e.stalled).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
