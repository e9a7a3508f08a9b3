use super::{Flags, MemorySpace, Reg};

/// Architectural state: everything a transaction abort rolls back.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArchState {
    pub regs: [u64; Reg::COUNT],
    pub flags: Flags,
    /// Index of the next instruction; equal to the program length once halted.
    pub pc: usize,
    pub stack: Vec<u64>,
    pub mem: MemorySpace,
}

impl ArchState {
    pub fn new(mem: MemorySpace) -> ArchState {
        ArchState {
            mem,
            ..ArchState::default()
        }
    }

    pub fn reg(&self, r: Reg) -> u64 {
        self.regs[r.index()]
    }

    pub fn set_reg(&mut self, r: Reg, value: u64) {
        self.regs[r.index()] = value;
    }

    /// The AH view: bits 8..16 of RAX.
    pub fn ah(&self) -> u8 {
        (self.reg(Reg::RAX) >> 8) as u8
    }

    pub fn set_ah(&mut self, value: u8) {
        let rax = self.reg(Reg::RAX) & !0xff00;
        self.set_reg(Reg::RAX, rax | (u64::from(value) << 8));
    }
}
