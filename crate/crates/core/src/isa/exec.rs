use super::{
    ArchState, Flags, Instruction, IsaError, MemRef, MemorySpace, Opcode, Operand, Privilege,
    Program,
};

/// How data accesses reach memory.
///
/// The architectural path only ever sees user pages. The transient path in
/// the simulator swaps in a port that forwards privileged bytes instead of
/// faulting.
pub trait DataPort {
    fn load(&mut self, mem: &MemorySpace, addr: u64) -> Result<u8, IsaError>;

    fn store(&mut self, mem: &mut MemorySpace, addr: u64, value: u8) -> Result<(), IsaError>;

    /// Value written by RDTSC.
    fn timestamp(&mut self) -> u64 {
        0
    }
}

/// Unprivileged access: kernel pages raise [`IsaError::PrivilegedAddress`].
#[derive(Debug, Default, Clone, Copy)]
pub struct UserPort {
    pub tsc: u64,
}

impl DataPort for UserPort {
    fn load(&mut self, mem: &MemorySpace, addr: u64) -> Result<u8, IsaError> {
        match mem.read(addr)? {
            (v, Privilege::User) => Ok(v),
            (_, Privilege::Kernel) => Err(IsaError::PrivilegedAddress { addr }),
        }
    }

    fn store(&mut self, mem: &mut MemorySpace, addr: u64, value: u8) -> Result<(), IsaError> {
        match mem.privilege(addr) {
            None => Err(IsaError::UnmappedAddress { addr }),
            Some(Privilege::Kernel) => Err(IsaError::PrivilegedAddress { addr }),
            Some(Privilege::User) => mem.write(addr, value),
        }
    }

    fn timestamp(&mut self) -> u64 {
        self.tsc
    }
}

/// Whether a jump with `opcode` is taken under `flags`.
pub fn jcc_taken(flags: &Flags, opcode: Opcode) -> Result<bool, IsaError> {
    match opcode {
        Opcode::Jz | Opcode::Je => Ok(flags.zf),
        Opcode::Jmp => Ok(true),
        other => Err(IsaError::NotAJump(other)),
    }
}

/// Executes the instruction at `state.pc` on the architectural path and
/// returns the successor state.
pub fn execute_architectural(state: &ArchState, program: &Program) -> Result<ArchState, IsaError> {
    let mut next = state.clone();
    step(&mut next, program, &mut UserPort::default())?;
    Ok(next)
}

fn effective_address(state: &ArchState, m: MemRef) -> u64 {
    state.reg(m.base).wrapping_add(m.disp as u64)
}

fn read_operand<P: DataPort>(
    state: &ArchState,
    op: &Operand,
    port: &mut P,
) -> Result<u64, IsaError> {
    match op {
        Operand::Reg(r) => Ok(state.reg(*r)),
        Operand::Imm(v) => Ok(*v),
        Operand::Mem(m) => port
            .load(&state.mem, effective_address(state, *m))
            .map(u64::from),
        Operand::Label(_) => Err(IsaError::BadOperands(Opcode::Label)),
    }
}

/// Shared body of SUB and CMP: byte arithmetic for a memory destination,
/// 64-bit otherwise. Returns the result and where to store it.
fn subtract<P: DataPort>(
    state: &ArchState,
    instr: &Instruction,
    port: &mut P,
) -> Result<(u64, Option<u64>), IsaError> {
    let [dst, src] = instr.operands.as_slice() else {
        return Err(IsaError::BadOperands(instr.opcode));
    };
    let rhs = read_operand(state, src, port)?;
    match dst {
        Operand::Reg(r) => Ok((state.reg(*r).wrapping_sub(rhs), None)),
        Operand::Mem(m) => {
            let addr = effective_address(state, *m);
            let lhs = port.load(&state.mem, addr)?;
            Ok((u64::from(lhs.wrapping_sub(rhs as u8)), Some(addr)))
        }
        _ => Err(IsaError::BadOperands(instr.opcode)),
    }
}

/// Executes one instruction in place. On error `state` is left untouched,
/// which is what lets the simulator replay a faulting instruction on its
/// transient path.
pub fn step<P: DataPort>(
    state: &mut ArchState,
    program: &Program,
    port: &mut P,
) -> Result<(), IsaError> {
    let pc = state.pc;
    let instr = program.get(pc).ok_or(IsaError::PcOutOfRange { pc })?;
    let mut next_pc = pc + 1;
    match instr.opcode {
        Opcode::Nop | Opcode::Label | Opcode::Xbegin | Opcode::Xend => {}
        Opcode::Halt => next_pc = program.len(),
        Opcode::Mov => {
            let [Operand::Reg(dst), src] = instr.operands.as_slice() else {
                return Err(IsaError::BadOperands(instr.opcode));
            };
            let v = read_operand(state, src, port)?;
            state.set_reg(*dst, v);
        }
        Opcode::Sub => {
            let (result, mem_dst) = subtract(state, instr, port)?;
            match (mem_dst, &instr.operands[0]) {
                (Some(addr), _) => port.store(&mut state.mem, addr, result as u8)?,
                (None, Operand::Reg(r)) => state.set_reg(*r, result),
                _ => unreachable!("subtract validated the destination"),
            }
            state.flags = Flags::from_result(result);
        }
        Opcode::Cmp => {
            let (result, _) = subtract(state, instr, port)?;
            state.flags = Flags::from_result(result);
        }
        Opcode::Cmpxchg => {
            let [Operand::Mem(m), Operand::Reg(src)] = instr.operands.as_slice() else {
                return Err(IsaError::BadOperands(instr.opcode));
            };
            let addr = effective_address(state, *m);
            let current = port.load(&state.mem, addr)?;
            let al = state.reg(super::Reg::RAX) as u8;
            if al == current {
                let v = state.reg(*src) as u8;
                port.store(&mut state.mem, addr, v)?;
            } else {
                let rax = state.reg(super::Reg::RAX) & !0xff;
                state.set_reg(super::Reg::RAX, rax | u64::from(current));
            }
            state.flags = Flags::from_result(u64::from(al.wrapping_sub(current)));
        }
        Opcode::Jz | Opcode::Je | Opcode::Jmp => {
            if jcc_taken(&state.flags, instr.opcode)? {
                next_pc = program.target(pc).ok_or_else(|| {
                    IsaError::UnknownLabel(instr.label_name().unwrap_or_default().into())
                })?;
            }
        }
        Opcode::Lahf => {
            let low = state.flags.low_byte();
            state.set_ah(low);
        }
        Opcode::Sahf => state.flags = state.flags.with_low_byte(state.ah()),
        Opcode::Pushf => state.stack.push(u64::from(state.flags.image())),
        Opcode::Popf => {
            let image = state.stack.pop().ok_or(IsaError::StackUnderflow)?;
            state.flags = Flags::from_image(image as u16);
        }
        Opcode::Rdtsc => {
            let [Operand::Reg(dst)] = instr.operands.as_slice() else {
                return Err(IsaError::BadOperands(instr.opcode));
            };
            let t = port.timestamp();
            state.set_reg(*dst, t);
        }
    }
    state.pc = next_pc;
    Ok(())
}
